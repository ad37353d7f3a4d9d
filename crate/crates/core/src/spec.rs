//! Automaton specs: finite sets of states with wreath recursion.
//!
//! A state is `s = <<w_0, ..., w_{m-1}>> sigma` where each section `w_x` is a
//! (possibly empty, possibly signed) word over the declared states and
//! `sigma` is the root permutation. Word-valued sections support the
//! recursive constructions where a new state's section is an arbitrary
//! element of a previously built group.
//!
//! The text format, one state per line:
//!
//! ```text
//! m = 2
//! state b = [b, 1] (0 1)
//! state a = [a, b] ()
//! ```
//!
//! Each section is `1` (the identity) or a `.`-separated word whose factors
//! are `NAME` or `NAME^-1`. The trailing permutation is cycle notation and
//! may be omitted for the identity. Lines starting with `#` are comments.

use crate::error::{Error, Result};
use crate::perm::{Letter, Permutation};
use smallvec::SmallVec;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub type StateId = u32;

/// One signed generator occurrence in a word.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gen(u32);

impl Gen {
    pub fn new(state: StateId, inv: bool) -> Self {
        Gen(state << 1 | inv as u32)
    }
    #[inline]
    pub fn state(self) -> StateId {
        self.0 >> 1
    }
    #[inline]
    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }
    pub fn inverse(self) -> Gen {
        Gen(self.0 ^ 1)
    }
}

impl std::fmt::Debug for Gen {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}",
            self.state(),
            if self.is_inverse() { "'" } else { "" }
        )
    }
}

/// A word over signed states. The empty word is the identity.
pub type Word = SmallVec<[Gen; 4]>;

/// Freely reduce in place: cancel adjacent `g g^-1` pairs.
pub fn reduce_word(word: &mut Word) {
    let mut out: Word = SmallVec::with_capacity(word.len());
    for &g in word.iter() {
        if let Some(&top) = out.last() {
            if top == g.inverse() {
                out.pop();
                continue;
            }
        }
        out.push(g);
    }
    *word = out;
}

/// Invert a word: reverse order, flip exponents.
pub fn invert_word(word: &[Gen]) -> Word {
    word.iter().rev().map(|g| g.inverse()).collect()
}

#[derive(Clone, Debug)]
pub struct StateDef {
    pub name: String,
    pub sections: Vec<Word>,
    pub root: Permutation,
}

static SPEC_COUNTER: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
pub struct AutomatonSpec {
    m: usize,
    states: Vec<StateDef>,
    index: HashMap<String, StateId>,
    /// Process-unique id, used by caches to tell specs apart cheaply.
    uid: u64,
}

impl AutomatonSpec {
    pub fn new(m: usize, states: Vec<StateDef>) -> Result<Arc<Self>> {
        if m < 2 {
            return Err(Error::Validation(format!("alphabet size m = {m} < 2")));
        }
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if s.name == "1" {
                return Err(Error::Validation("`1` is reserved for the identity".into()));
            }
            if index.insert(s.name.clone(), i as StateId).is_some() {
                return Err(Error::Validation(format!("duplicate state `{}`", s.name)));
            }
            if s.sections.len() != m {
                return Err(Error::Validation(format!(
                    "state `{}` has {} sections, expected {m}",
                    s.name,
                    s.sections.len()
                )));
            }
            if s.root.degree() != m {
                return Err(Error::Validation(format!(
                    "state `{}` has a root permutation of degree {}, expected {m}",
                    s.name,
                    s.root.degree()
                )));
            }
        }
        let n = states.len() as u32;
        for s in &states {
            for w in &s.sections {
                for g in w {
                    if g.state() >= n {
                        return Err(Error::Validation(format!(
                            "state `{}` references undeclared state id {}",
                            s.name,
                            g.state()
                        )));
                    }
                }
            }
        }
        Ok(Arc::new(AutomatonSpec {
            m,
            states,
            index,
            uid: SPEC_COUNTER.fetch_add(1, Ordering::Relaxed),
        }))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: StateId) -> &StateDef {
        &self.states[id as usize]
    }

    pub fn states(&self) -> &[StateDef] {
        &self.states
    }

    pub fn lookup(&self, name: &str) -> Result<StateId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    /// True if `self` declares the same leading states as `base` (so elements
    /// over `base` can be reinterpreted over `self` unchanged).
    pub fn extends(&self, base: &AutomatonSpec) -> bool {
        if self.uid == base.uid {
            return true;
        }
        self.m == base.m
            && self.states.len() >= base.states.len()
            && base.states.iter().zip(&self.states).all(|(a, b)| {
                a.name == b.name && a.root == b.root && a.sections == b.sections
            })
    }

    /// Combined spec: all states of `base` plus `new_states`. New sections may
    /// reference both old and new states by name.
    pub fn extend(base: &AutomatonSpec, new_states: Vec<RawStateDef>) -> Result<Arc<Self>> {
        let mut names: HashMap<String, StateId> = base.index.clone();
        for (i, s) in new_states.iter().enumerate() {
            let id = (base.states.len() + i) as StateId;
            if names.insert(s.name.clone(), id).is_some() {
                return Err(Error::Validation(format!(
                    "state `{}` already declared",
                    s.name
                )));
            }
        }
        let mut states = base.states.clone();
        for s in new_states {
            let sections = s
                .sections
                .iter()
                .map(|w| resolve_word(&names, w))
                .collect::<Result<Vec<_>>>()?;
            states.push(StateDef {
                name: s.name,
                sections,
                root: s.root,
            });
        }
        AutomatonSpec::new(base.m, states)
    }

    /// Reinterpret the automaton on blocks of `k` letters: same states, new
    /// alphabet `m^k`. Block `v` encodes the length-`k` word over the original
    /// alphabet with the first letter most significant.
    pub fn k_collapse(self: &Arc<Self>, k: usize) -> Result<Arc<Self>> {
        if k == 0 {
            return Err(Error::Validation("k-collapse requires k >= 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let mk = self.m.checked_pow(k as u32).ok_or_else(|| {
            Error::Validation(format!("m^k overflow for m = {}, k = {k}", self.m))
        })?;
        if mk > u16::MAX as usize {
            return Err(Error::Validation(format!(
                "collapsed alphabet m^k = {mk} too large"
            )));
        }
        let mut states = Vec::with_capacity(self.states.len());
        for (id, def) in self.states.iter().enumerate() {
            let mut images = Vec::with_capacity(mk);
            let mut sections = Vec::with_capacity(mk);
            for block in 0..mk {
                let v = decode_block(block, self.m, k);
                let mut cur: Word = smallvec::smallvec![Gen::new(id as StateId, false)];
                let mut out = 0usize;
                for &x in &v {
                    let root = word_root_raw(self, &cur);
                    out = out * self.m + root.apply(x) as usize;
                    cur = word_section_raw(self, &cur, x);
                }
                images.push(out as Letter);
                sections.push(cur);
            }
            states.push(StateDef {
                name: def.name.clone(),
                sections,
                root: Permutation::from_images(images)?,
            });
        }
        AutomatonSpec::new(mk, states)
    }

    pub fn parse(text: &str) -> Result<Arc<Self>> {
        let mut m: Option<usize> = None;
        let mut raw: Vec<(usize, RawStateDef)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("m") {
                let rest = rest.trim_start();
                if let Some(v) = rest.strip_prefix('=') {
                    m = Some(v.trim().parse::<usize>().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("bad alphabet size `{}`", v.trim()),
                    })?);
                    continue;
                }
            }
            if let Some(rest) = line.strip_prefix("state ") {
                let m = m.ok_or(Error::Parse {
                    line: line_no,
                    msg: "missing `m = <int>` header before first state".into(),
                })?;
                raw.push((line_no, parse_state_line(rest, m, line_no)?));
                continue;
            }
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unrecognized line `{line}`"),
            });
        }
        let m = m.ok_or(Error::Parse {
            line: 0,
            msg: "missing `m = <int>` header".into(),
        })?;
        let mut names: HashMap<String, StateId> = HashMap::new();
        for (i, (line_no, s)) in raw.iter().enumerate() {
            if names.insert(s.name.clone(), i as StateId).is_some() {
                return Err(Error::Parse {
                    line: *line_no,
                    msg: format!("duplicate state `{}`", s.name),
                });
            }
        }
        let mut states = Vec::with_capacity(raw.len());
        for (line_no, s) in raw {
            let sections = s
                .sections
                .iter()
                .map(|w| {
                    resolve_word(&names, w).map_err(|e| Error::Parse {
                        line: line_no,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            states.push(StateDef {
                name: s.name,
                sections,
                root: s.root,
            });
        }
        AutomatonSpec::new(m, states)
    }

    /// Render in the text format accepted by [`AutomatonSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "m = {}", self.m);
        for s in &self.states {
            let sections = s
                .sections
                .iter()
                .map(|w| self.word_to_text(w))
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "state {} = [{}] {}", s.name, sections, s.root);
        }
        out
    }

    pub fn word_to_text(&self, w: &[Gen]) -> String {
        if w.is_empty() {
            return "1".into();
        }
        w.iter()
            .map(|g| {
                let name = &self.states[g.state() as usize].name;
                if g.is_inverse() {
                    format!("{name}^-1")
                } else {
                    name.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(".")
    }

    /// Parse a `.`-separated word such as `a.b^-1` (or `1`).
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let mut out = Word::new();
        let text = text.trim();
        if text.is_empty() || text == "1" {
            return Ok(out);
        }
        for tok in text.split('.') {
            let (name, inv) = match tok.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (tok, false),
            };
            let name = name.trim();
            if name == "1" {
                continue;
            }
            out.push(Gen::new(self.lookup(name)?, inv));
        }
        Ok(out)
    }
}

/// A state definition whose section words are still lists of names.
#[derive(Clone, Debug)]
pub struct RawStateDef {
    pub name: String,
    pub sections: Vec<Vec<(String, bool)>>,
    pub root: Permutation,
}

fn resolve_word(names: &HashMap<String, StateId>, w: &[(String, bool)]) -> Result<Word> {
    w.iter()
        .map(|(name, inv)| {
            names
                .get(name)
                .map(|&id| Gen::new(id, *inv))
                .ok_or_else(|| Error::UnknownState(name.clone()))
        })
        .collect()
}

fn parse_state_line(rest: &str, m: usize, line: usize) -> Result<RawStateDef> {
    let perr = |msg: String| Error::Parse { line, msg };
    let eq = rest
        .find('=')
        .ok_or_else(|| perr("expected `state NAME = [..] PERM`".into()))?;
    let name = rest[..eq].trim().to_string();
    if name.is_empty() || name == "1" {
        return Err(perr(format!("bad state name `{name}`")));
    }
    let rhs = rest[eq + 1..].trim();
    let open = rhs
        .find('[')
        .ok_or_else(|| perr("missing `[` in section list".into()))?;
    let close = rhs
        .rfind(']')
        .ok_or_else(|| perr("missing `]` in section list".into()))?;
    let mut sections = Vec::new();
    for part in rhs[open + 1..close].split(',') {
        let part = part.trim();
        let mut word = Vec::new();
        if !(part.is_empty() || part == "1") {
            for tok in part.split('.') {
                let (n, inv) = match tok.trim().strip_suffix("^-1") {
                    Some(n) => (n.trim(), true),
                    None => (tok.trim(), false),
                };
                if n == "1" || n.is_empty() {
                    continue;
                }
                word.push((n.to_string(), inv));
            }
        }
        sections.push(word);
    }
    if sections.len() != m {
        return Err(perr(format!(
            "state `{name}` lists {} sections, expected {m}",
            sections.len()
        )));
    }
    let root = Permutation::parse_cycles(m, rhs[close + 1..].trim())
        .map_err(|e| perr(e.to_string()))?;
    Ok(RawStateDef {
        name,
        sections,
        root,
    })
}

pub fn decode_block(block: usize, m: usize, k: usize) -> Vec<Letter> {
    let mut v = vec![0 as Letter; k];
    let mut b = block;
    for i in (0..k).rev() {
        v[i] = (b % m) as Letter;
        b /= m;
    }
    v
}

pub fn encode_block(v: &[Letter], m: usize) -> usize {
    v.iter().fold(0usize, |acc, &x| acc * m + x as usize)
}

/// Root permutation of a word (left-to-right composition of factor roots).
pub(crate) fn word_root_raw(spec: &AutomatonSpec, word: &[Gen]) -> Permutation {
    let mut p = Permutation::identity(spec.m);
    for g in word {
        let root = &spec.states[g.state() as usize].root;
        if g.is_inverse() {
            p = p.then(&root.inverse());
        } else {
            p = p.then(root);
        }
    }
    p
}

/// Section of a word at letter `x`, freely reduced.
///
/// Per the multiplication rule, the section of `f.g` at `x` is
/// `f_x . g_{x.root(f)}`; inverse factors use `(s^-1)_x = (s_{x.root(s)^-1})^-1`.
pub(crate) fn word_section_raw(spec: &AutomatonSpec, word: &[Gen], x: Letter) -> Word {
    let mut out = Word::new();
    let mut pos = x;
    for g in word {
        let def = &spec.states[g.state() as usize];
        if g.is_inverse() {
            let y = def.root.inverse().apply(pos);
            for h in def.sections[y as usize].iter().rev() {
                push_reduced(&mut out, h.inverse());
            }
            pos = y;
        } else {
            for &h in &def.sections[pos as usize] {
                push_reduced(&mut out, h);
            }
            pos = def.root.apply(pos);
        }
    }
    out
}

#[inline]
fn push_reduced(out: &mut Word, g: Gen) {
    if let Some(&top) = out.last() {
        if top == g.inverse() {
            out.pop();
            return;
        }
    }
    out.push(g);
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const LONG_RANGE: &str = "\
m = 2
state a = [a, b] ()
state b = [b, 1] (0 1)
";

    #[test]
    fn parse_long_range() {
        let spec = AutomatonSpec::parse(LONG_RANGE).unwrap();
        assert_eq!(spec.m(), 2);
        assert_eq!(spec.state_count(), 2);
        let b = spec.lookup("b").unwrap();
        assert_eq!(spec.state(b).root.to_string(), "(0 1)");
        assert!(spec.state(b).sections[1].is_empty());
    }

    #[test]
    fn round_trip_text() {
        let spec = AutomatonSpec::parse(LONG_RANGE).unwrap();
        let text = spec.to_text();
        let spec2 = AutomatonSpec::parse(&text).unwrap();
        assert!(spec2.extends(&spec));
        assert!(spec.extends(&spec2));
    }

    #[test]
    fn rejects_undeclared_state_with_line_number() {
        let err = AutomatonSpec::parse("m = 2\nstate a = [a, c] ()\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains('c'), "{msg}");
    }

    #[test]
    fn rejects_missing_header() {
        assert!(AutomatonSpec::parse("state a = [a, 1] ()").is_err());
    }

    #[test]
    fn k_collapse_agrees_with_blocked_action() {
        use crate::element::{all_words, Element};
        let spec = AutomatonSpec::parse(LONG_RANGE).unwrap();
        assert!(Arc::ptr_eq(&spec.k_collapse(1).unwrap(), &spec));
        let collapsed = spec.k_collapse(2).unwrap();
        assert_eq!(collapsed.m(), 4);
        assert_eq!(collapsed.state_count(), spec.state_count());
        let block = |w: &[Letter]| -> Vec<Letter> {
            w.chunks(2).map(|c| encode_block(c, 2) as Letter).collect()
        };
        for name in ["a", "b"] {
            let e = Element::state(&spec, name).unwrap();
            let ec = Element::state(&collapsed, name).unwrap();
            for w in all_words(2, 8) {
                assert_eq!(ec.act(&block(&w)).unwrap(), block(&e.act(&w).unwrap()));
            }
        }
        // Collapse commutes with multiplication and with sections at block
        // boundaries.
        let a = Element::state(&spec, "a").unwrap();
        let b = Element::state(&spec, "b").unwrap();
        let ab = a.multiply(&b).unwrap();
        let abc = Element::parse(&collapsed, "a.b").unwrap();
        for w in all_words(2, 8) {
            assert_eq!(abc.act(&block(&w)).unwrap(), block(&ab.act(&w).unwrap()));
        }
        for v in all_words(2, 2) {
            let sec = ab.section(&v).unwrap();
            let sec_c = abc.section(&block(&v)).unwrap();
            for w in all_words(2, 6) {
                assert_eq!(
                    sec_c.act(&block(&w)).unwrap(),
                    block(&sec.act(&w).unwrap())
                );
            }
        }
    }

    #[test]
    fn free_reduction() {
        let mut w: Word = smallvec::smallvec![
            Gen::new(0, false),
            Gen::new(1, false),
            Gen::new(1, true),
            Gen::new(0, true),
        ];
        reduce_word(&mut w);
        assert!(w.is_empty());
    }
}
