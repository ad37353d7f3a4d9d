//! Permutations of `{0..m-1}` with composition in right-action order.
//!
//! Throughout the crate permutations act on the right: `x.p` is `p.apply(x)`,
//! and `p.then(q)` is the permutation sending `x` to `(x.p).q`. This matches
//! the multiplication rule for tree automorphisms, where the root permutation
//! of a product is the left factor's followed by the right factor's.

use crate::error::{Error, Result};
use smallvec::SmallVec;
use std::fmt;

pub type Letter = u16;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: SmallVec<[Letter; 8]>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        Permutation {
            images: (0..m as Letter).collect(),
        }
    }

    pub fn from_images(images: Vec<Letter>) -> Result<Self> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &x in &images {
            if (x as usize) >= m || seen[x as usize] {
                return Err(Error::InvalidPermutation(format!(
                    "images {images:?} are not a bijection on 0..{m}"
                )));
            }
            seen[x as usize] = true;
        }
        Ok(Permutation {
            images: images.into(),
        })
    }

    /// The transposition `(a b)` on `{0..m-1}`; `a == b` gives the identity.
    pub fn transposition(m: usize, a: Letter, b: Letter) -> Self {
        let mut p = Self::identity(m);
        p.images.swap(a as usize, b as usize);
        p
    }

    /// The cyclic shift `(0 1 2 ... m-1)`, sending `x` to `x+1 mod m`.
    pub fn cyclic_shift(m: usize) -> Self {
        Permutation {
            images: (0..m).map(|x| ((x + 1) % m) as Letter).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, x: Letter) -> Letter {
        self.images[x as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    /// `self` followed by `other` (right-action composition).
    pub fn then(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.degree(), other.degree());
        Permutation {
            images: self.images.iter().map(|&x| other.apply(x)).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = smallvec::smallvec![0 as Letter; self.degree()];
        for (i, &x) in self.images.iter().enumerate() {
            images[x as usize] = i as Letter;
        }
        Permutation { images }
    }

    pub fn pow(&self, e: i64) -> Permutation {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut out = Permutation::identity(self.degree());
        for _ in 0..e.unsigned_abs() {
            out = out.then(&base);
        }
        out
    }

    pub fn images(&self) -> &[Letter] {
        &self.images
    }

    pub fn fixes(&self, x: Letter) -> bool {
        self.apply(x) == x
    }

    /// All `m!` permutations of `{0..m-1}`, in lexicographic image order.
    pub fn enumerate_sym(m: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut images: Vec<Letter> = (0..m as Letter).collect();
        loop {
            out.push(Permutation {
                images: images.clone().into(),
            });
            if !next_permutation(&mut images) {
                break;
            }
        }
        out
    }

    /// All permutations fixing 0, i.e. `stab(0)` inside `Sym(m)`.
    pub fn enumerate_stab0(m: usize) -> Vec<Permutation> {
        Permutation::enumerate_sym(m)
            .into_iter()
            .filter(|p| p.fixes(0))
            .collect()
    }

    pub fn random<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> Permutation {
        use rand::seq::SliceRandom;
        let mut images: Vec<Letter> = (0..m as Letter).collect();
        images.shuffle(rng);
        Permutation {
            images: images.into(),
        }
    }

    /// Parse cycle notation such as `(0 1)(2 3)`; `()` or the empty string is
    /// the identity. `m` fixes the degree.
    pub fn parse_cycles(m: usize, text: &str) -> Result<Permutation> {
        let mut p = Self::identity(m);
        let s = text.trim();
        if s.is_empty() || s == "id" {
            return Ok(p);
        }
        let bad = |msg: &str| Error::InvalidPermutation(format!("{msg} in `{text}`"));
        let mut rest = s;
        while !rest.is_empty() {
            let open = rest.find('(').ok_or_else(|| bad("expected `(`"))?;
            if !rest[..open].trim().is_empty() {
                return Err(bad("unexpected text between cycles"));
            }
            let close = rest.find(')').ok_or_else(|| bad("missing `)`"))?;
            let cycle: Vec<Letter> = rest[open + 1..close]
                .split_whitespace()
                .map(|t| {
                    t.parse::<Letter>()
                        .map_err(|_| bad(&format!("bad symbol `{t}`")))
                })
                .collect::<Result<_>>()?;
            for &x in &cycle {
                if x as usize >= m {
                    return Err(Error::LetterOutOfRange {
                        letter: x as usize,
                        m,
                    });
                }
            }
            // A cycle (c0 c1 ... ck) composes into the running product.
            if cycle.len() > 1 {
                let mut cp = Self::identity(m);
                for i in 0..cycle.len() {
                    cp.images[cycle[i] as usize] = cycle[(i + 1) % cycle.len()];
                }
                let count = cycle.iter().collect::<std::collections::HashSet<_>>();
                if count.len() != cycle.len() {
                    return Err(bad("repeated symbol in cycle"));
                }
                p = p.then(&cp);
            }
            rest = &rest[close + 1..];
        }
        Ok(p)
    }

    /// Compact name fragment: the image word, e.g. `(0 1)` on m=2 is `10`.
    /// Only used for generated state names with m <= 10.
    pub fn image_tag(&self) -> String {
        self.images.iter().map(|x| x.to_string()).collect()
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation; identity prints as `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.degree();
        let mut seen = vec![false; m];
        let mut wrote = false;
        for start in 0..m {
            if seen[start] || self.images[start] as usize == start {
                continue;
            }
            write!(f, "(")?;
            let mut x = start;
            let mut first = true;
            while !seen[x] {
                seen[x] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{x}")?;
                first = false;
                x = self.images[x] as usize;
            }
            write!(f, ")")?;
            wrote = true;
        }
        if !wrote {
            write!(f, "()")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn next_permutation(a: &mut [Letter]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn group_axioms_on_random_triples() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = 2 + (rand::Rng::random_range(&mut rng, 0..6usize));
            let p = Permutation::random(m, &mut rng);
            let q = Permutation::random(m, &mut rng);
            let r = Permutation::random(m, &mut rng);
            assert_eq!(p.then(&q).then(&r), p.then(&q.then(&r)));
            assert!(p.then(&p.inverse()).is_identity());
            assert!(p.inverse().then(&p).is_identity());
            let e = Permutation::identity(m);
            assert_eq!(p.then(&e), p);
            assert_eq!(e.then(&p), p);
        }
    }

    #[test]
    fn cycle_notation_round_trip() {
        for m in 2..6 {
            for p in Permutation::enumerate_sym(m) {
                let text = p.to_string();
                let back = Permutation::parse_cycles(m, &text).unwrap();
                assert_eq!(p, back, "round-trip failed for {text}");
            }
        }
    }

    #[test]
    fn parse_composes_left_to_right() {
        // (0 1)(1 2): first swap 0,1 then swap 1,2; 0 -> 1 -> 2.
        let p = Permutation::parse_cycles(3, "(0 1)(1 2)").unwrap();
        assert_eq!(p.apply(0), 2);
        assert_eq!(p.apply(1), 0);
        assert_eq!(p.apply(2), 1);
    }

    #[test]
    fn cyclic_shift_matches_definition() {
        let g = Permutation::cyclic_shift(4);
        assert_eq!(g.apply(0), 1);
        assert_eq!(g.apply(3), 0);
        assert_eq!(g.to_string(), "(0 1 2 3)");
    }

    #[test]
    fn sym_enumeration_sizes() {
        assert_eq!(Permutation::enumerate_sym(2).len(), 2);
        assert_eq!(Permutation::enumerate_sym(4).len(), 24);
        assert_eq!(Permutation::enumerate_stab0(3).len(), 2);
    }
}
