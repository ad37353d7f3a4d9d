//! Activity-growth classification of automaton states.
//!
//! The directed state graph has an edge for every occurrence of a state in a
//! section word (parallel edges and loops kept with multiplicity). An
//! automaton is exponential iff some strongly connected component over the
//! nontrivial states carries more edges than vertices, i.e. two nontrivial
//! cycles reach each other. Otherwise every cycle-component is a single
//! cycle and the cycle partial order (`c1 < c2` when `c2` reaches `c1`)
//! grades states by polynomial degree.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::perm::Letter;
use crate::spec::{word_section_raw, AutomatonSpec, StateId, Word};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Activity degree of a state or automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "degree")]
pub enum Activity {
    /// Polynomial of the given degree; -1 means finitary (or the identity).
    Poly(i32),
    Exponential,
}

impl std::fmt::Display for Activity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activity::Poly(d) => write!(f, "{d}"),
            Activity::Exponential => write!(f, "exponential"),
        }
    }
}

/// Hierarchy level: degree-`d` states on a cycle sit at level `d~`, off-cycle
/// ones at `d`. The identity is the unique state at `-1~`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "level")]
pub enum Hierarchy {
    OnCycle(i32),
    OffCycle(i32),
}

impl std::fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hierarchy::OnCycle(d) => write!(f, "{d}~"),
            Hierarchy::OffCycle(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StateReport {
    pub name: String,
    pub degree: Activity,
    /// Present for polynomial automata only.
    pub hierarchy: Option<Hierarchy>,
    pub trivial: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    pub id: usize,
    pub states: Vec<String>,
    pub degree: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct ActivityReport {
    pub overall: Activity,
    pub states: Vec<StateReport>,
    pub cycles: Vec<CycleReport>,
    /// Pairs `(lower, upper)` of cycle ids with `lower < upper` covering the
    /// reachability order.
    pub cycle_order: Vec<(usize, usize)>,
}

impl ActivityReport {
    pub fn degree_of(&self, name: &str) -> Option<Activity> {
        self.states.iter().find(|s| s.name == name).map(|s| s.degree)
    }

    pub fn hierarchy_of(&self, name: &str) -> Option<Hierarchy> {
        self.states
            .iter()
            .find(|s| s.name == name)
            .and_then(|s| s.hierarchy)
    }
}

/// A state counts as declared-identity when its recursion is the canonical
/// trivial one: identity root and every section empty or a bare self-loop.
fn is_declared_identity(spec: &AutomatonSpec, id: StateId) -> bool {
    let def = spec.state(id);
    def.root.is_identity()
        && def.sections.iter().all(|w| {
            w.is_empty() || (w.len() == 1 && w[0].state() == id && !w[0].is_inverse())
        })
}

/// Classify every state of the spec.
///
/// Validates first that every state other than a declared identity acts
/// nontrivially; a hidden identity would corrupt the cycle analysis.
pub fn activity_classify(spec: &Arc<AutomatonSpec>) -> Result<ActivityReport> {
    let n = spec.state_count();
    let mut trivial = vec![false; n];
    for id in 0..n as StateId {
        if is_declared_identity(spec, id) {
            trivial[id as usize] = true;
        } else if Element::state(spec, &spec.state(id).name)?.is_trivial()? {
            return Err(Error::Validation(format!(
                "non-identity state `{}` acts trivially",
                spec.state(id).name
            )));
        }
    }

    // Edges with multiplicity between nontrivial states.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (i, def) in spec.states().iter().enumerate() {
        if trivial[i] {
            continue;
        }
        for w in &def.sections {
            for g in w {
                let t = g.state() as usize;
                if !trivial[t] {
                    edges.push((i, t));
                }
            }
        }
    }

    let scc = tarjan_scc(n, &edges);
    let comp_of = &scc.comp_of;
    let mut comp_vertices = vec![0usize; scc.count];
    let mut comp_edges = vec![0usize; scc.count];
    for i in 0..n {
        if !trivial[i] {
            comp_vertices[comp_of[i]] += 1;
        }
    }
    for &(u, v) in &edges {
        if comp_of[u] == comp_of[v] {
            comp_edges[comp_of[u]] += 1;
        }
    }

    let exponential = (0..scc.count).any(|c| comp_edges[c] > comp_vertices[c]);

    // Condensation DAG over components, deduplicated.
    let mut dag: Vec<Vec<usize>> = vec![Vec::new(); scc.count];
    for &(u, v) in &edges {
        let (cu, cv) = (comp_of[u], comp_of[v]);
        if cu != cv && !dag[cu].contains(&cv) {
            dag[cu].push(cv);
        }
    }

    // A cycle component is one carrying at least one internal edge.
    let is_cycle: Vec<bool> = (0..scc.count).map(|c| comp_edges[c] >= 1).collect();

    // Longest chain of cycle components below each component (Tarjan yields
    // reverse topological order: successors are numbered before sources).
    let mut cycle_degree: Vec<i32> = vec![-1; scc.count];
    for c in 0..scc.count {
        let mut best: i32 = -1;
        for &d in &dag[c] {
            best = best.max(cycle_degree[d]);
        }
        // Reachable-cycle degree seen from c; if c is itself a cycle, the
        // chain extends by one.
        cycle_degree[c] = if is_cycle[c] { best + 1 } else { best };
    }

    let mut states = Vec::with_capacity(n);
    for (i, def) in spec.states().iter().enumerate() {
        let (degree, hierarchy) = if trivial[i] {
            (
                Activity::Poly(-1),
                if exponential {
                    None
                } else {
                    Some(Hierarchy::OnCycle(-1))
                },
            )
        } else if exponential {
            (Activity::Exponential, None)
        } else {
            let c = comp_of[i];
            let d = cycle_degree[c];
            let h = if is_cycle[c] {
                Hierarchy::OnCycle(d)
            } else {
                Hierarchy::OffCycle(d)
            };
            (Activity::Poly(d), Some(h))
        };
        states.push(StateReport {
            name: def.name.clone(),
            degree,
            hierarchy,
            trivial: trivial[i],
        });
    }

    let overall = if exponential {
        Activity::Exponential
    } else {
        Activity::Poly(
            states
                .iter()
                .map(|s| match s.degree {
                    Activity::Poly(d) => d,
                    Activity::Exponential => unreachable!(),
                })
                .max()
                .unwrap_or(-1),
        )
    };

    let mut cycles = Vec::new();
    let mut cycle_id_of_comp: HashMap<usize, usize> = HashMap::new();
    if !exponential {
        for c in 0..scc.count {
            if is_cycle[c] {
                let id = cycles.len();
                cycle_id_of_comp.insert(c, id);
                cycles.push(CycleReport {
                    id,
                    states: (0..n)
                        .filter(|&i| !trivial[i] && comp_of[i] == c)
                        .map(|i| spec.state(i as StateId).name.clone())
                        .collect(),
                    degree: cycle_degree[c],
                });
            }
        }
    }
    // c1 < c2 when c2 reaches c1 through the condensation.
    let mut cycle_order = Vec::new();
    for (&c_hi, &hi) in &cycle_id_of_comp {
        let mut stack = vec![c_hi];
        let mut seen = vec![false; scc.count];
        seen[c_hi] = true;
        while let Some(c) = stack.pop() {
            for &d in &dag[c] {
                if !seen[d] {
                    seen[d] = true;
                    if let Some(&lo) = cycle_id_of_comp.get(&d) {
                        cycle_order.push((lo, hi));
                    }
                    stack.push(d);
                }
            }
        }
    }
    cycle_order.sort_unstable();

    Ok(ActivityReport {
        overall,
        states,
        cycles,
        cycle_order,
    })
}

struct Scc {
    comp_of: Vec<usize>,
    count: usize,
}

/// Iterative Tarjan over an edge list.
fn tarjan_scc(n: usize, edges: &[(usize, usize)]) -> Scc {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
    }
    const NONE: usize = usize::MAX;
    let mut index = vec![NONE; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp_of = vec![NONE; n];
    let mut next_index = 0usize;
    let mut count = 0usize;

    for root in 0..n {
        if index[root] != NONE {
            continue;
        }
        // (vertex, next child offset)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = call.last_mut() {
            if *child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == NONE {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp_of[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
                call.pop();
                if let Some(&mut (u, _)) = call.last_mut() {
                    low[u] = low[u].min(low[v]);
                }
            }
        }
    }
    Scc { comp_of, count }
}

/// Number of length-`n` words `v` with a nontrivial section `e(v)`, computed
/// by dynamic programming over the reachable section words.
pub fn activity_count(e: &Element, n: usize) -> Result<u64> {
    let spec = e.spec().clone();
    let mut memo: HashMap<(Word, usize), u64> = HashMap::new();
    let mut trivial_memo: HashMap<Word, bool> = HashMap::new();
    fn go(
        spec: &AutomatonSpec,
        w: &Word,
        n: usize,
        memo: &mut HashMap<(Word, usize), u64>,
        trivial_memo: &mut HashMap<Word, bool>,
    ) -> Result<u64> {
        let trivial = match trivial_memo.get(w) {
            Some(&t) => t,
            None => {
                let t = crate::bisim::is_trivial_word(spec, w, crate::DEFAULT_CLOSURE_BUDGET)?;
                trivial_memo.insert(w.clone(), t);
                t
            }
        };
        if trivial {
            return Ok(0);
        }
        if n == 0 {
            return Ok(1);
        }
        if let Some(&v) = memo.get(&(w.clone(), n)) {
            return Ok(v);
        }
        let mut total = 0u64;
        for x in 0..spec.m() as Letter {
            let s = word_section_raw(spec, w, x);
            total += go(spec, &s, n - 1, memo, trivial_memo)?;
        }
        memo.insert((w.clone(), n), total);
        Ok(total)
    }
    go(&spec, &e.word().into(), n, &mut memo, &mut trivial_memo)
}
