//! Level orbits: Schreier graphs and transitivity checks.

use crate::element::{all_words, Element};
use crate::error::Result;
use crate::perm::Letter;
use std::collections::{HashMap, VecDeque};

#[derive(Clone, Debug)]
pub struct SchreierEdge {
    pub from: Vec<Letter>,
    pub label: String,
    pub to: Vec<Letter>,
}

/// One labeled edge `(v, v.g)` per generator `g` and level-`n` vertex `v`.
pub fn schreier_graph(generators: &[(String, Element)], n: usize) -> Result<Vec<SchreierEdge>> {
    let mut edges = Vec::new();
    if generators.is_empty() {
        return Ok(edges);
    }
    let m = generators[0].1.m();
    for v in all_words(m, n) {
        for (label, g) in generators {
            edges.push(SchreierEdge {
                from: v.clone(),
                label: label.clone(),
                to: g.act(&v)?,
            });
        }
    }
    Ok(edges)
}

/// Orbit of the all-zeros vertex under the group generated by `generators`.
pub fn orbit_of_zero(generators: &[Element], n: usize) -> Result<Vec<Vec<Letter>>> {
    let mut seen: HashMap<Vec<Letter>, ()> = HashMap::new();
    let start = vec![0 as Letter; n];
    seen.insert(start.clone(), ());
    let mut queue = VecDeque::from([start]);
    let mut gens: Vec<Element> = Vec::new();
    for g in generators {
        gens.push(g.clone());
        gens.push(g.inverse());
    }
    while let Some(v) = queue.pop_front() {
        for g in &gens {
            let w = g.act(&v)?;
            if !seen.contains_key(&w) {
                seen.insert(w.clone(), ());
                queue.push_back(w);
            }
        }
    }
    let mut orbit: Vec<_> = seen.into_keys().collect();
    orbit.sort();
    Ok(orbit)
}

/// Does the group generated by `generators` act transitively on level `n`?
pub fn transitive_on_level(generators: &[Element], n: usize) -> Result<bool> {
    if n == 0 {
        return Ok(true);
    }
    if generators.is_empty() {
        return Ok(false);
    }
    let m = generators[0].m();
    Ok(orbit_of_zero(generators, n)?.len() == m.pow(n as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::AutomatonSpec;

    #[test]
    fn long_range_schreier_level_one() {
        let spec =
            AutomatonSpec::parse("m = 2\nstate a = [a, b] ()\nstate b = [b, 1] (0 1)\n").unwrap();
        let a = Element::state(&spec, "a").unwrap();
        let b = Element::state(&spec, "b").unwrap();
        let edges =
            schreier_graph(&[("a".into(), a.clone()), ("b".into(), b.clone())], 1).unwrap();
        // b swaps 0 <-> 1, a fixes both.
        for e in &edges {
            match e.label.as_str() {
                "a" => assert_eq!(e.from, e.to),
                "b" => assert_ne!(e.from, e.to),
                _ => unreachable!(),
            }
        }
        // Identity generator gives loops only.
        let loops = schreier_graph(&[("e".into(), Element::identity(&spec))], 2).unwrap();
        assert!(loops.iter().all(|e| e.from == e.to));
    }

    #[test]
    fn long_range_transitive_up_to_level_ten() {
        let spec =
            AutomatonSpec::parse("m = 2\nstate a = [a, b] ()\nstate b = [b, 1] (0 1)\n").unwrap();
        let a = Element::state(&spec, "a").unwrap();
        let b = Element::state(&spec, "b").unwrap();
        let gens = vec![a.clone(), b];
        for n in 1..=10 {
            assert!(transitive_on_level(&gens, n).unwrap(), "level {n}");
        }
        // a alone has trivial root permutation, so not transitive on level 1.
        assert!(!transitive_on_level(&[a], 1).unwrap());
        assert!(transitive_on_level(&[], 0).unwrap());
    }
}
