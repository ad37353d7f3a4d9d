//! Sparse nonnegative measures with explicit defect tracking.
//!
//! A measure never renormalizes: mass lost to truncation (length caps,
//! Neumann tails, enumeration budgets) is carried in `defect` and reported,
//! so every downstream check can use one-sided defect allowances.

use crate::bisim::{Key, KeyMode};
use crate::element::{same_spec, Element};
use crate::error::{Error, Result};
use crate::pattern::Pattern;
use crate::weight::{clamp_nonneg, Weight};
use std::collections::BTreeMap;

/// Sparse measure over ordered keys (deterministic iteration order).
#[derive(Clone, Debug)]
pub struct SparseMeasure<K: Ord + Clone, W: Weight> {
    weights: BTreeMap<K, W>,
    defect: W,
}

impl<K: Ord + Clone, W: Weight> Default for SparseMeasure<K, W> {
    fn default() -> Self {
        SparseMeasure {
            weights: BTreeMap::new(),
            defect: W::zero(),
        }
    }
}

impl<K: Ord + Clone, W: Weight> SparseMeasure<K, W> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(key: K) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(key, W::one());
        SparseMeasure {
            weights,
            defect: W::zero(),
        }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (K, W)>) -> Self {
        let mut out = Self::zero();
        for (k, w) in entries {
            out.add_weight(k, w);
        }
        out
    }

    pub fn add_weight(&mut self, key: K, w: W) {
        if w.is_zero() {
            return;
        }
        let slot = self.weights.entry(key).or_insert_with(W::zero);
        *slot = slot.clone() + w;
    }

    pub fn add_defect(&mut self, w: W) {
        self.defect = self.defect.clone() + w;
    }

    pub fn set_defect(&mut self, w: W) {
        self.defect = w;
    }

    pub fn scale(&self, c: &W) -> Self {
        if c.is_zero() {
            let mut out = Self::zero();
            out.defect = self.defect.clone() * c.clone();
            return out;
        }
        SparseMeasure {
            weights: self
                .weights
                .iter()
                .map(|(k, w)| (k.clone(), w.clone() * c.clone()))
                .collect(),
            defect: self.defect.clone() * c.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, w) in &other.weights {
            out.add_weight(k.clone(), w.clone());
        }
        out.defect = out.defect + other.defect.clone();
        out
    }

    pub fn mass(&self) -> W {
        self.weights
            .values()
            .fold(W::zero(), |acc, w| acc + w.clone())
    }

    pub fn defect(&self) -> &W {
        &self.defect
    }

    pub fn weight(&self, key: &K) -> W {
        self.weights.get(key).cloned().unwrap_or_else(W::zero)
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &W)> {
        self.weights.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.weights.keys()
    }

    pub fn is_probability(&self, eps: f64) -> bool {
        ((self.mass() + self.defect.clone()).to_f64() - 1.0).abs() <= eps
    }

    /// Largest pointwise difference in weights (union of supports).
    pub fn linf_distance(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in self.weights.keys().chain(other.weights.keys()) {
            let d = (self.weight(k).to_f64() - other.weight(k).to_f64()).abs();
            worst = worst.max(d);
        }
        worst
    }

    /// Total-variation distance, treating missing keys as weight zero.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        let mut seen: std::collections::BTreeSet<&K> = std::collections::BTreeSet::new();
        for k in self.weights.keys().chain(other.weights.keys()) {
            if seen.insert(k) {
                sum += (self.weight(k).to_f64() - other.weight(k).to_f64()).abs();
            }
        }
        sum / 2.0
    }

    pub fn map_keys<K2: Ord + Clone>(&self, f: impl Fn(&K) -> K2) -> SparseMeasure<K2, W> {
        let mut out = SparseMeasure::zero();
        for (k, w) in &self.weights {
            out.add_weight(f(k), w.clone());
        }
        out.defect = self.defect.clone();
        out
    }
}

/// Measures over patterns.
pub type PatternMeasure<W> = SparseMeasure<Pattern, W>;

impl<W: Weight> PatternMeasure<W> {
    /// Mass of the set `D` of patterns containing `q_-1`.
    pub fn rooted_mass(&self) -> W {
        self.iter()
            .filter(|(p, _)| p.contains_rooted())
            .fold(W::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// The alpha-moment of the length, in floating point.
    pub fn length_moment(&self, alpha: f64) -> f64 {
        self.iter()
            .map(|(p, w)| (p.len() as f64).powf(alpha) * w.to_f64())
            .sum()
    }

    /// Exact integer-power moment of the length.
    pub fn length_moment_exact(&self, alpha: u32) -> W {
        self.iter().fold(W::zero(), |acc, (p, w)| {
            let mut pw = W::one();
            for _ in 0..alpha {
                pw = pw * W::from_ratio(p.len() as i64, 1);
            }
            acc + pw * w.clone()
        })
    }

    /// Concatenation convolution: push-forward of the product measure under
    /// pattern composition. Patterns longer than `length_cap` are dropped
    /// into the defect.
    pub fn concat_convolve(&self, other: &Self, length_cap: usize) -> Self {
        let mut out = Self::zero();
        let mut dropped = W::zero();
        for (p, wp) in self.iter() {
            for (r, wr) in other.iter() {
                let w = wp.clone() * wr.clone();
                let pr = p.concat(r);
                if pr.len() > length_cap {
                    dropped = dropped + w;
                } else {
                    out.add_weight(pr, w);
                }
            }
        }
        // Cross defects: anything convolved with lost mass is lost.
        let cross = self.defect.clone() * (other.mass() + other.defect.clone())
            + self.mass() * other.defect.clone();
        out.defect = dropped + cross;
        out
    }

    /// Render in the text format `WEIGHT LETTERS` accepted by [`parse_pattern_measure`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, w) in self.iter() {
            if p.is_empty() {
                out.push_str(&format!("{}\n", w.to_f64()));
            } else {
                out.push_str(&format!("{} {}\n", w.to_f64(), p));
            }
        }
        out
    }
}

/// Parse the pattern-measure text format: one `WEIGHT LETTERS` line per
/// pattern, letters like `q0 q-1 q0`, empty letter list for the empty
/// pattern. `#` starts a comment.
pub fn parse_pattern_measure(text: &str) -> Result<PatternMeasure<f64>> {
    let mut out = PatternMeasure::zero();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, char::is_whitespace);
        let w_text = parts.next().unwrap();
        let weight: f64 = w_text.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("bad weight `{w_text}`"),
        })?;
        if weight < 0.0 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("negative weight {weight}"),
            });
        }
        let pattern = match parts.next() {
            Some(rest) => Pattern::parse(rest).map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?,
            None => Pattern::empty(),
        };
        out.add_weight(pattern, weight);
    }
    Ok(out)
}

/// Measure over group elements, keyed by canonical keys with a representative
/// element per key. Mixing key modes is an error.
#[derive(Clone)]
pub struct GroupMeasure<W: Weight> {
    mode: KeyMode,
    entries: BTreeMap<Key, (W, Element)>,
    defect: W,
}

impl<W: Weight> GroupMeasure<W> {
    pub fn new(mode: KeyMode) -> Self {
        GroupMeasure {
            mode,
            entries: BTreeMap::new(),
            defect: W::zero(),
        }
    }

    pub fn dirac(e: &Element, mode: KeyMode) -> Result<Self> {
        let mut out = Self::new(mode);
        out.add_element(e, W::one())?;
        Ok(out)
    }

    pub fn mode(&self) -> KeyMode {
        self.mode
    }

    pub fn add_element(&mut self, e: &Element, w: W) -> Result<()> {
        if w.is_zero() {
            return Ok(());
        }
        let key = e.key(self.mode)?;
        match self.entries.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let slot = o.get_mut();
                slot.0 = slot.0.clone() + w;
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert((w, e.clone()));
            }
        }
        Ok(())
    }

    pub fn add_keyed(&mut self, key: Key, rep: Element, w: W) {
        if w.is_zero() {
            return;
        }
        match self.entries.entry(key) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let slot = o.get_mut();
                slot.0 = slot.0.clone() + w;
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert((w, rep));
            }
        }
    }

    pub fn add_defect(&mut self, w: W) {
        self.defect = self.defect.clone() + w;
    }

    pub fn mass(&self) -> W {
        self.entries
            .values()
            .fold(W::zero(), |acc, (w, _)| acc + w.clone())
    }

    pub fn defect(&self) -> &W {
        &self.defect
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Key, &(W, Element))> {
        self.entries.iter()
    }

    pub fn weight_of_key(&self, key: &Key) -> W {
        self.entries
            .get(key)
            .map(|(w, _)| w.clone())
            .unwrap_or_else(W::zero)
    }

    pub fn scale(&self, c: &W) -> Self {
        GroupMeasure {
            mode: self.mode,
            entries: self
                .entries
                .iter()
                .map(|(k, (w, e))| (k.clone(), (w.clone() * c.clone(), e.clone())))
                .collect(),
            defect: self.defect.clone() * c.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.mode != other.mode {
            return Err(Error::KeyModeMismatch);
        }
        let mut out = self.clone();
        for (k, (w, e)) in other.iter() {
            out.add_keyed(k.clone(), e.clone(), w.clone());
        }
        out.defect = out.defect + other.defect.clone();
        Ok(out)
    }

    /// Convolution: push-forward of the product measure under group
    /// multiplication. Mass is multiplicative; defects combine with cross
    /// terms.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.mode != other.mode {
            return Err(Error::KeyModeMismatch);
        }
        let mut out = Self::new(self.mode);
        for (_, (wa, ea)) in self.iter() {
            for (_, (wb, eb)) in other.iter() {
                if !same_spec(ea.spec(), eb.spec()) {
                    return Err(Error::SpecMismatch);
                }
                let prod = ea.multiply(eb)?;
                out.add_element(&prod, wa.clone() * wb.clone())?;
            }
        }
        out.defect = self.defect.clone() * (other.mass() + other.defect.clone())
            + self.mass() * other.defect.clone();
        Ok(out)
    }

    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        let mut keys: std::collections::BTreeSet<&Key> = std::collections::BTreeSet::new();
        keys.extend(self.entries.keys());
        keys.extend(other.entries.keys());
        for k in keys {
            sum += (self.weight_of_key(k).to_f64() - other.weight_of_key(k).to_f64()).abs();
        }
        sum / 2.0
    }

    /// Uniform measure on a list of (distinct) elements.
    pub fn uniform(elements: &[Element], mode: KeyMode) -> Result<Self> {
        let mut out = Self::new(mode);
        let w = W::from_ratio(1, elements.len() as i64);
        for e in elements {
            out.add_element(e, w.clone())?;
        }
        Ok(out)
    }
}

impl<W: Weight> std::fmt::Debug for GroupMeasure<W> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupMeasure[{} keys", self.entries.len())?;
        for (_, (w, e)) in self.entries.iter().take(8) {
            write!(f, ", {:?}: {:.6}", e, w.to_f64())?;
        }
        write!(f, "; defect {:.3e}]", self.defect.to_f64())
    }
}

/// Subtract measures pointwise, clamping at zero (float use only).
pub fn saturating_sub<K: Ord + Clone, W: Weight>(
    a: &SparseMeasure<K, W>,
    b: &SparseMeasure<K, W>,
) -> SparseMeasure<K, W> {
    let mut out = SparseMeasure::zero();
    for (k, w) in a.iter() {
        let d = clamp_nonneg(w.clone() - b.weight(k));
        out.add_weight(k.clone(), d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let m: PatternMeasure<f64> = SparseMeasure::dirac(Pattern::empty());
        assert_eq!(m.length_moment(1.0), 0.0);
        let m: PatternMeasure<f64> =
            SparseMeasure::dirac(Pattern::canonicalize(&[0, -1, 0]));
        assert_eq!(m.length_moment(2.0), 9.0);
        let mut mix: PatternMeasure<f64> = SparseMeasure::zero();
        mix.add_weight(Pattern::single(0), 0.5);
        mix.add_weight(Pattern::empty(), 0.5);
        assert_eq!(mix.length_moment(1.0), 0.5);
    }

    #[test]
    fn concat_convolve_tracks_defect() {
        let mut a: PatternMeasure<f64> = SparseMeasure::zero();
        a.add_weight(Pattern::single(0), 0.5);
        a.add_weight(Pattern::canonicalize(&[0, -1, 0]), 0.5);
        let out = a.concat_convolve(&a, 3);
        // Products of lengths (1,1), (1,3), (3,1), (3,3) -> lengths 1, 3|4, 5.
        // Anything longer than 3 is dropped into the defect.
        let total = out.mass() + *out.defect();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(*out.defect() > 0.0);
    }

    #[test]
    fn parse_pattern_measure_format() {
        let text = "# comment\n0.5 q0 q-1 q0\n0.25 q1\n0.25\n";
        let m = parse_pattern_measure(text).unwrap();
        assert_eq!(m.support_len(), 3);
        assert!((m.weight(&Pattern::empty()) - 0.25).abs() < 1e-15);
        assert!(m.is_probability(1e-12));
        assert!(parse_pattern_measure("x q0").is_err());
        assert!(parse_pattern_measure("-0.5 q0").is_err());
    }
}
