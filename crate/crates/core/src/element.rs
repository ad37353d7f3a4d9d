//! Group elements: signed words over the states of an automaton spec.
//!
//! The action on words follows the sequential rule: reading letter `x` in
//! state `a` outputs `x.sigma_a` and continues in the section `a_x`, so for a
//! word `xw` we have `(xw).a = (x.sigma_a)(w.a_x)`. Products act on the right:
//! `w.(e1 e2) = (w.e1).e2`.

use crate::error::{Error, Result};
use crate::perm::{Letter, Permutation};
use crate::spec::{
    invert_word, reduce_word, word_root_raw, word_section_raw, AutomatonSpec, Gen, Word,
};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Clone)]
pub struct Element {
    spec: Arc<AutomatonSpec>,
    word: Word,
}

impl Element {
    pub fn identity(spec: &Arc<AutomatonSpec>) -> Self {
        Element {
            spec: spec.clone(),
            word: Word::new(),
        }
    }

    pub fn from_word(spec: &Arc<AutomatonSpec>, mut word: Word) -> Self {
        reduce_word(&mut word);
        Element {
            spec: spec.clone(),
            word,
        }
    }

    pub fn state(spec: &Arc<AutomatonSpec>, name: &str) -> Result<Self> {
        let id = spec.lookup(name)?;
        Ok(Element {
            spec: spec.clone(),
            word: smallvec::smallvec![Gen::new(id, false)],
        })
    }

    /// Parse a `.`-separated word such as `a.b^-1`.
    pub fn parse(spec: &Arc<AutomatonSpec>, text: &str) -> Result<Self> {
        Ok(Element::from_word(spec, spec.parse_word(text)?))
    }

    pub fn spec(&self) -> &Arc<AutomatonSpec> {
        &self.spec
    }

    pub fn word(&self) -> &[Gen] {
        &self.word
    }

    pub fn word_len(&self) -> usize {
        self.word.len()
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    pub fn to_text(&self) -> String {
        self.spec.word_to_text(&self.word)
    }

    /// Reinterpret over a spec that extends this element's spec.
    pub fn lift(&self, spec: &Arc<AutomatonSpec>) -> Result<Element> {
        if !spec.extends(&self.spec) {
            return Err(Error::SpecMismatch);
        }
        Ok(Element {
            spec: spec.clone(),
            word: self.word.clone(),
        })
    }

    pub fn multiply(&self, other: &Element) -> Result<Element> {
        if !same_spec(&self.spec, &other.spec) {
            return Err(Error::SpecMismatch);
        }
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        reduce_word(&mut word);
        Ok(Element {
            spec: self.spec.clone(),
            word,
        })
    }

    pub fn inverse(&self) -> Element {
        Element {
            spec: self.spec.clone(),
            word: invert_word(&self.word),
        }
    }

    /// `self` conjugated by `by`: `by^-1 . self . by`.
    pub fn conjugate(&self, by: &Element) -> Result<Element> {
        by.inverse().multiply(self)?.multiply(by)
    }

    pub fn pow(&self, e: i64) -> Element {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut out = Element::identity(&self.spec);
        for _ in 0..e.unsigned_abs() {
            out = out.multiply(&base).expect("same spec");
        }
        out
    }

    /// Root permutation (the action on the first level).
    pub fn root(&self) -> Permutation {
        word_root_raw(&self.spec, &self.word)
    }

    /// Section at a single letter.
    pub fn section_at(&self, x: Letter) -> Result<Element> {
        self.check_letter(x)?;
        Ok(Element {
            spec: self.spec.clone(),
            word: word_section_raw(&self.spec, &self.word, x),
        })
    }

    /// Section at a vertex `v` (a word over the alphabet).
    pub fn section(&self, v: &[Letter]) -> Result<Element> {
        let mut cur = self.clone();
        for &x in v {
            cur = cur.section_at(x)?;
        }
        Ok(cur)
    }

    /// Apply the automorphism to a word over the alphabet.
    pub fn act(&self, w: &[Letter]) -> Result<Vec<Letter>> {
        let mut out = Vec::with_capacity(w.len());
        let mut cur = self.word.clone();
        for &x in w {
            self.check_letter(x)?;
            let root = word_root_raw(&self.spec, &cur);
            out.push(root.apply(x));
            cur = word_section_raw(&self.spec, &cur, x);
        }
        Ok(out)
    }

    fn check_letter(&self, x: Letter) -> Result<()> {
        if (x as usize) < self.spec.m() {
            Ok(())
        } else {
            Err(Error::LetterOutOfRange {
                letter: x as usize,
                m: self.spec.m(),
            })
        }
    }

    /// Depth-`d` portrait: root permutations of every vertex above level `d`.
    pub fn portrait(&self, depth: usize) -> Portrait {
        let mut nodes = BTreeMap::new();
        let mut layer: Vec<(Vec<Letter>, Word)> = vec![(Vec::new(), self.word.clone())];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (v, w) in layer {
                nodes.insert(v.clone(), word_root_raw(&self.spec, &w));
                for x in 0..self.spec.m() as Letter {
                    let mut child = v.clone();
                    child.push(x);
                    next.push((child, word_section_raw(&self.spec, &w, x)));
                }
            }
            layer = next;
        }
        Portrait {
            m: self.spec.m(),
            depth,
            nodes,
        }
    }
}

impl std::fmt::Debug for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

pub(crate) fn same_spec(a: &Arc<AutomatonSpec>, b: &Arc<AutomatonSpec>) -> bool {
    Arc::ptr_eq(a, b) || a.uid() == b.uid()
}

/// Finite-depth fingerprint of an automorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Portrait {
    pub m: usize,
    pub depth: usize,
    pub nodes: BTreeMap<Vec<Letter>, Permutation>,
}

impl Portrait {
    /// Reconstruct the action on a word of length <= depth from stored
    /// permutations alone.
    pub fn act(&self, w: &[Letter]) -> Result<Vec<Letter>> {
        if w.len() > self.depth {
            return Err(Error::Invalid(format!(
                "portrait depth {} cannot act on a word of length {}",
                self.depth,
                w.len()
            )));
        }
        let mut out = Vec::with_capacity(w.len());
        let mut v: Vec<Letter> = Vec::new();
        for &x in w {
            let p = self
                .nodes
                .get(&v)
                .ok_or_else(|| Error::Invalid("portrait is missing a node".into()))?;
            out.push(p.apply(x));
            v.push(x);
        }
        Ok(out)
    }
}

/// Parse a word over the alphabet: contiguous digits for m <= 10
/// (e.g. `0110`), otherwise `-`-separated numbers (e.g. `3-11-0`).
pub fn parse_tree_word(m: usize, text: &str) -> Result<Vec<Letter>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<Letter> = if m <= 10 && !text.contains('-') {
        text.chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as Letter)
                    .ok_or_else(|| Error::Invalid(format!("bad letter `{c}`")))
            })
            .collect::<Result<_>>()?
    } else {
        text.split('-')
            .map(|t| {
                t.parse::<Letter>()
                    .map_err(|_| Error::Invalid(format!("bad letter `{t}`")))
            })
            .collect::<Result<_>>()?
    };
    for &x in &parts {
        if x as usize >= m {
            return Err(Error::LetterOutOfRange {
                letter: x as usize,
                m,
            });
        }
    }
    Ok(parts)
}

pub fn format_tree_word(m: usize, w: &[Letter]) -> String {
    if m <= 10 {
        w.iter().map(|x| x.to_string()).collect()
    } else {
        w.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// All `m^n` words of length `n`, in lexicographic order.
pub fn all_words(m: usize, n: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * m);
        for w in &out {
            for x in 0..m as Letter {
                let mut v = w.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn random_word<R: rand::Rng + ?Sized>(m: usize, len: usize, rng: &mut R) -> Vec<Letter> {
    (0..len).map(|_| rng.random_range(0..m) as Letter).collect()
}

/// Random signed word over the spec's states, for randomized tests.
pub fn random_element<R: rand::Rng + ?Sized>(
    spec: &Arc<AutomatonSpec>,
    len: usize,
    rng: &mut R,
) -> Element {
    let n = spec.state_count() as u32;
    let word: Word = (0..len)
        .map(|_| Gen::new(rng.random_range(0..n), rng.random_bool(0.5)))
        .collect();
    Element::from_word(spec, word)
}
