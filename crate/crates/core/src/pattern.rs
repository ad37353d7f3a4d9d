//! The pattern semigroup: canonical words in idempotent letters
//! `q_{-1}, q_0, ..., q_k` with the relations `q_i^2 = q_i`.
//!
//! A pattern is kept canonical (no two adjacent letters equal), so
//! composition is concatenation followed by merging at the boundary.

use crate::error::{Error, Result};
use smallvec::SmallVec;
use std::fmt;

/// A pattern letter index; `-1` is the rooted letter `q_-1`.
pub type PatternLetter = i8;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pattern {
    letters: SmallVec<[PatternLetter; 8]>,
}

impl Pattern {
    pub fn empty() -> Self {
        Pattern::default()
    }

    pub fn single(i: PatternLetter) -> Self {
        debug_assert!(i >= -1);
        Pattern {
            letters: smallvec::smallvec![i],
        }
    }

    /// Canonicalize an arbitrary letter sequence: adjacent repetitions of a
    /// letter are equivalent to a single instance.
    pub fn canonicalize(seq: &[PatternLetter]) -> Self {
        let mut letters = SmallVec::new();
        for &x in seq {
            if letters.last() != Some(&x) {
                letters.push(x);
            }
        }
        Pattern { letters }
    }

    /// Composition is concatenation (then canonicalization at the seam).
    pub fn concat(&self, other: &Pattern) -> Pattern {
        let mut letters = self.letters.clone();
        for &x in &other.letters {
            if letters.last() != Some(&x) {
                letters.push(x);
            }
        }
        Pattern { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[PatternLetter] {
        &self.letters
    }

    /// Does the pattern contain the letter `q_-1` (membership in `D`)?
    pub fn contains_rooted(&self) -> bool {
        self.letters.contains(&-1)
    }

    pub fn max_letter(&self) -> Option<PatternLetter> {
        self.letters.iter().copied().max()
    }

    /// Shift every letter index down by one. Only valid on patterns without
    /// `q_-1`; the result is again canonical.
    pub fn shift_down(&self) -> Pattern {
        debug_assert!(!self.contains_rooted());
        Pattern {
            letters: self.letters.iter().map(|&x| x - 1).collect(),
        }
    }

    /// Split at the `q_-1` letters: `p = p_0 q_-1 p_1 ... q_-1 p_l` with
    /// every block free of `q_-1` (blocks may be empty).
    pub fn rooted_decomposition(&self) -> Vec<Pattern> {
        let mut blocks = vec![Pattern::empty()];
        for &x in &self.letters {
            if x == -1 {
                blocks.push(Pattern::empty());
            } else {
                blocks.last_mut().unwrap().letters.push(x);
            }
        }
        blocks
    }

    /// Parse letters like `q0 q-1 q2`; the empty string is the empty pattern.
    pub fn parse(text: &str) -> Result<Pattern> {
        let mut seq = Vec::new();
        for tok in text.split_whitespace() {
            let body = tok
                .strip_prefix('q')
                .ok_or_else(|| Error::Invalid(format!("bad pattern letter `{tok}`")))?;
            let i: i32 = body
                .parse()
                .map_err(|_| Error::Invalid(format!("bad pattern letter `{tok}`")))?;
            if !(-1..=126).contains(&i) {
                return Err(Error::Invalid(format!("letter index {i} out of range")));
            }
            seq.push(i as PatternLetter);
        }
        Ok(Pattern::canonicalize(&seq))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        let mut first = true;
        for &x in &self.letters {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "q{x}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// The two alternating patterns of each length in the two-letter semigroup
/// over `{q_-1, q_0}`; `first` is the starting letter.
pub fn alternating_pattern(first: PatternLetter, second: PatternLetter, len: usize) -> Pattern {
    let seq: Vec<PatternLetter> = (0..len)
        .map(|i| if i % 2 == 0 { first } else { second })
        .collect();
    Pattern::canonicalize(&seq)
}
