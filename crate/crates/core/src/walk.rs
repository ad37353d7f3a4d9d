//! Random-walk simulation and plug-in entropy estimation.
//!
//! Walk positions are tracked as nodes of a lazily built Cayley graph over
//! the finitely supported step measure: each distinct group element (under
//! the chosen key mode) becomes a node the first time it is visited, and
//! transitions `(node, step) -> node` are cached. A replica then advances by
//! table lookups, so the expensive bisimulation keying runs once per visited
//! element rather than once per step.

use crate::bisim::KeyMode;
use crate::element::Element;
use crate::error::{Error, Result};
use crate::measure::GroupMeasure;
use crate::rng::replica_rng;
use crate::Key;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use std::collections::HashMap;

/// Key policy for walk positions. `Auto` uses exact canonical keys, the
/// common refinement of every finite depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyDepth {
    Auto,
    Depth(u32),
}

impl KeyDepth {
    fn mode(self) -> KeyMode {
        match self {
            KeyDepth::Auto => KeyMode::Exact,
            KeyDepth::Depth(d) => KeyMode::Depth(d),
        }
    }

    pub fn label(self) -> String {
        match self {
            KeyDepth::Auto => "exact".into(),
            KeyDepth::Depth(d) => d.to_string(),
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SeriesEntry {
    pub n: usize,
    pub h_hat: f64,
    /// Miller-Madow corrected estimate `h_hat + (K-1)/(2N)`.
    pub h_mm: f64,
    pub se: f64,
    pub h_over_n: f64,
    pub distinct_keys: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EntropySeries {
    pub horizons: Vec<usize>,
    pub depth: String,
    pub n_walks: usize,
    pub entries: Vec<SeriesEntry>,
}

struct CayleyWalker {
    steps: Vec<Element>,
    cumulative: Vec<f64>,
    mode: KeyMode,
    nodes: Vec<(Element, Key)>,
    index: HashMap<Key, u32>,
    transitions: HashMap<(u32, u16), u32>,
}

impl CayleyWalker {
    fn new(steps: &GroupMeasure<f64>, mode: KeyMode) -> Result<CayleyWalker> {
        let mass = steps.mass();
        if !(0.999_999..=1.000_001).contains(&mass) {
            return Err(Error::Invalid(format!(
                "step measure mass {mass} is not a probability"
            )));
        }
        let mut support = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (_, (w, e)) in steps.iter() {
            acc += w;
            support.push(e.clone());
            cumulative.push(acc);
        }
        let spec = support
            .first()
            .ok_or_else(|| Error::Invalid("empty step measure".into()))?
            .spec()
            .clone();
        let identity = Element::identity(&spec);
        let key = identity.key(mode)?;
        let mut index = HashMap::new();
        index.insert(key.clone(), 0u32);
        Ok(CayleyWalker {
            steps: support,
            cumulative,
            mode,
            nodes: vec![(identity, key)],
            index,
            transitions: HashMap::new(),
        })
    }

    fn draw_step<R: Rng + ?Sized>(&self, rng: &mut R) -> u16 {
        let u: f64 = rng.random_range(0.0..*self.cumulative.last().unwrap());
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => (i as u16).min(self.steps.len() as u16 - 1),
        }
    }

    fn advance(&mut self, node: u32, step: u16) -> Result<u32> {
        if let Some(&next) = self.transitions.get(&(node, step)) {
            return Ok(next);
        }
        let product = self.nodes[node as usize]
            .0
            .multiply(&self.steps[step as usize])?;
        let key = product.key(self.mode)?;
        let next = match self.index.get(&key) {
            Some(&id) => id,
            None => {
                let id = self.nodes.len() as u32;
                self.index.insert(key.clone(), id);
                self.nodes.push((product, key));
                id
            }
        };
        self.transitions.insert((node, step), next);
        Ok(next)
    }

    fn node_key(&self, node: u32) -> &Key {
        &self.nodes[node as usize].1
    }
}

/// Simulate `n_walks` independent walks and estimate `H(Z_n)` at each
/// horizon from the empirical distribution of position keys.
///
/// Replicas are independent seeded streams, split into parallel chunks; the
/// aggregation is by canonical key, so results do not depend on scheduling.
pub fn walk_entropy_series(
    steps: &GroupMeasure<f64>,
    horizons: &[usize],
    n_walks: usize,
    depth: KeyDepth,
    seed: u64,
) -> Result<EntropySeries> {
    if horizons.windows(2).any(|w| w[1] <= w[0]) || horizons.is_empty() {
        return Err(Error::Invalid("horizons must be strictly increasing".into()));
    }
    let max_n = *horizons.last().unwrap();
    let threads = rayon::current_num_threads().max(1);
    let chunk = n_walks.div_ceil(threads);
    let ranges: Vec<(u64, u64)> = (0..threads)
        .map(|t| {
            let lo = (t * chunk).min(n_walks) as u64;
            let hi = ((t + 1) * chunk).min(n_walks) as u64;
            (lo, hi)
        })
        .filter(|(lo, hi)| lo < hi)
        .collect();

    let partials: Vec<Result<Vec<HashMap<Key, u64>>>> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut walker = CayleyWalker::new(steps, depth.mode())?;
            let mut counts: Vec<HashMap<Key, u64>> = vec![HashMap::new(); horizons.len()];
            for replica in lo..hi {
                let mut rng = replica_rng(seed, replica);
                let mut node = 0u32;
                let mut h_idx = 0usize;
                for step_no in 1..=max_n {
                    let s = walker.draw_step(&mut rng);
                    node = walker.advance(node, s)?;
                    if step_no == horizons[h_idx] {
                        let key = walker.node_key(node).clone();
                        *counts[h_idx].entry(key).or_default() += 1;
                        h_idx += 1;
                        if h_idx == horizons.len() {
                            break;
                        }
                    }
                }
            }
            Ok(counts)
        })
        .collect();

    let mut merged: Vec<HashMap<Key, u64>> = vec![HashMap::new(); horizons.len()];
    for part in partials {
        let part = part?;
        for (slot, h) in merged.iter_mut().zip(part) {
            for (k, c) in h {
                *slot.entry(k).or_default() += c;
            }
        }
    }

    let mut entries = Vec::new();
    for (idx, &n) in horizons.iter().enumerate() {
        // Fixed key sort before accumulation, for reproducible rounding.
        let mut by_key: Vec<(&Key, u64)> = merged[idx].iter().map(|(k, &c)| (k, c)).collect();
        by_key.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let counts: Vec<u64> = by_key.into_iter().map(|(_, c)| c).collect();
        let (h_hat, h_mm) = plugin_entropy(&counts, n_walks as u64);
        let se = bootstrap_se(&counts, n_walks as u64, 32, seed ^ 0x5eed_b007);
        entries.push(SeriesEntry {
            n,
            h_hat,
            h_mm,
            se,
            h_over_n: h_hat / n as f64,
            distinct_keys: counts.len(),
        });
    }
    Ok(EntropySeries {
        horizons: horizons.to_vec(),
        depth: depth.label(),
        n_walks,
        entries,
    })
}

/// Plug-in entropy of a count vector, with the Miller-Madow correction.
pub fn plugin_entropy(counts: &[u64], total: u64) -> (f64, f64) {
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    let k = counts.iter().filter(|&&c| c > 0).count() as f64;
    (h, h + (k - 1.0).max(0.0) / (2.0 * n))
}

/// Bootstrap standard error of the plug-in estimate: multinomial resamples
/// of the empirical distribution.
pub fn bootstrap_se(counts: &[u64], total: u64, resamples: usize, seed: u64) -> f64 {
    if counts.len() <= 1 {
        return 0.0;
    }
    let mut rng = replica_rng(seed, u64::MAX);
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut remaining = total;
        let mut rest_mass = 1.0f64;
        let mut h = 0.0;
        for &c in counts {
            if remaining == 0 {
                break;
            }
            let p = (c as f64 / total as f64 / rest_mass).clamp(0.0, 1.0);
            let draw = if p >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, p).map(|b| b.sample(&mut rng)).unwrap_or(0)
            };
            if draw > 0 {
                let q = draw as f64 / total as f64;
                h -= q * q.ln();
            }
            remaining -= draw;
            rest_mass -= c as f64 / total as f64;
            if rest_mass <= 0.0 {
                break;
            }
        }
        estimates.push(h);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let var = estimates.iter().map(|h| (h - mean).powi(2)).sum::<f64>()
        / (estimates.len() as f64 - 1.0);
    var.sqrt()
}

/// Sampled trajectory endpoints `Z_n` for external inspection.
pub fn sample_walk_endpoints(
    steps: &GroupMeasure<f64>,
    n: usize,
    walks: usize,
    seed: u64,
) -> Result<Vec<Element>> {
    let mut walker = CayleyWalker::new(steps, KeyMode::Exact)?;
    let mut out = Vec::with_capacity(walks);
    for replica in 0..walks as u64 {
        let mut rng = replica_rng(seed, replica);
        let mut node = 0u32;
        for _ in 0..n {
            let s = walker.draw_step(&mut rng);
            node = walker.advance(node, s)?;
        }
        out.push(walker.nodes[node as usize].0.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::uniform_level_measure;
    use crate::mother::MotherGroup;
    use crate::KeyMode;

    #[test]
    fn two_element_subgroup_walk_stays_below_log2() {
        let g = MotherGroup::new(2, 0).unwrap();
        let steps: GroupMeasure<f64> =
            uniform_level_measure(&g, 0, KeyMode::Exact, 100).unwrap();
        let series =
            walk_entropy_series(&steps, &[1, 4, 16], 4000, KeyDepth::Auto, 11).unwrap();
        for e in &series.entries {
            assert!(e.h_hat <= (2.0f64).ln() + 1e-9, "h = {}", e.h_hat);
            assert!(e.distinct_keys <= 2);
        }
    }

    #[test]
    fn odometer_walk_tracks_binomial_entropy() {
        // Steps uniform on {b, b^-1}: Z_n = b^S with S a simple random walk,
        // so H(Z_n) is the entropy of Binomial(n, 1/2).
        let spec = crate::spec::AutomatonSpec::parse(
            "m = 2\nstate a = [a, b] ()\nstate b = [b, 1] (0 1)\n",
        )
        .unwrap();
        let b = Element::state(&spec, "b").unwrap();
        let mut steps: GroupMeasure<f64> = GroupMeasure::new(KeyMode::Exact);
        steps.add_element(&b, 0.5).unwrap();
        steps.add_element(&b.inverse(), 0.5).unwrap();
        let n = 16usize;
        let walks = 60_000;
        let series =
            walk_entropy_series(&steps, &[n], walks, KeyDepth::Auto, 23).unwrap();
        // Exact binomial entropy.
        let mut probs = Vec::new();
        let mut coef = 1.0f64;
        for i in 0..=n {
            probs.push(coef / (2.0f64).powi(n as i32));
            coef = coef * (n - i) as f64 / (i + 1) as f64;
        }
        let h_exact: f64 = probs.iter().map(|p| -p * p.ln()).sum();
        let e = &series.entries[0];
        assert!(
            (e.h_mm - h_exact).abs() < 0.02 + 3.0 * e.se,
            "estimated {} vs exact {h_exact} (se {})",
            e.h_mm,
            e.se
        );
    }

    #[test]
    fn estimates_match_exact_convolution_entropy() {
        let g = MotherGroup::new(2, 0).unwrap();
        let mut steps: GroupMeasure<f64> = uniform_level_measure::<f64>(&g, 0, KeyMode::Exact, 100)
            .unwrap()
            .scale(&0.5);
        steps = steps
            .add(
                &uniform_level_measure::<f64>(&g, -1, KeyMode::Exact, 100)
                    .unwrap()
                    .scale(&0.5),
            )
            .unwrap();
        let exact = crate::entropy::exact_walk_entropy(&steps, 8).unwrap();
        let series =
            walk_entropy_series(&steps, &[4, 8], 50_000, KeyDepth::Auto, 31).unwrap();
        for e in &series.entries {
            let h = exact[e.n - 1];
            assert!(
                (e.h_mm - h).abs() <= 0.02 + 3.0 * e.se,
                "n={}: {} vs {}",
                e.n,
                e.h_mm,
                h
            );
        }
    }

    #[test]
    fn depth_keys_stabilize_to_exact() {
        let g = MotherGroup::new(2, 1).unwrap();
        let mut steps: GroupMeasure<f64> = uniform_level_measure::<f64>(&g, 0, KeyMode::Exact, 100)
            .unwrap()
            .scale(&0.5);
        steps = steps
            .add(
                &uniform_level_measure::<f64>(&g, 1, KeyMode::Exact, 100)
                    .unwrap()
                    .scale(&0.5),
            )
            .unwrap();
        let n = 16;
        let walks = 20_000;
        let exact = walk_entropy_series(&steps, &[n], walks, KeyDepth::Auto, 7).unwrap();
        let mut prev = -1.0;
        for d in [2u32, 8, n as u32, n as u32 + 2] {
            let series =
                walk_entropy_series(&steps, &[n], walks, KeyDepth::Depth(d), 7).unwrap();
            let h = series.entries[0].h_hat;
            // Non-decreasing in depth, bounded by the exact-key estimate.
            assert!(h >= prev - 1e-12, "depth {d}");
            assert!(h <= exact.entries[0].h_hat + 1e-12);
            prev = h;
        }
        // Depth n and n+2 agree within 1%.
        let h_n = walk_entropy_series(&steps, &[n], walks, KeyDepth::Depth(n as u32), 7)
            .unwrap()
            .entries[0]
            .h_hat;
        let h_n2 = walk_entropy_series(&steps, &[n], walks, KeyDepth::Depth(n as u32 + 2), 7)
            .unwrap()
            .entries[0]
            .h_hat;
        assert!((h_n2 - h_n).abs() <= 0.01 * h_n.max(1e-9));
        assert!((exact.entries[0].h_hat - h_n).abs() <= 0.01 * h_n.max(1e-9));
    }

    #[test]
    fn walks_are_reproducible_across_thread_counts() {
        let g = MotherGroup::new(2, 0).unwrap();
        let steps: GroupMeasure<f64> =
            uniform_level_measure(&g, 0, KeyMode::Exact, 100).unwrap();
        let a = walk_entropy_series(&steps, &[4, 8], 2000, KeyDepth::Auto, 5).unwrap();
        let b = walk_entropy_series(&steps, &[4, 8], 2000, KeyDepth::Auto, 5).unwrap();
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            assert_eq!(x.h_hat, y.h_hat);
            assert_eq!(x.se, y.se);
        }
    }
}
