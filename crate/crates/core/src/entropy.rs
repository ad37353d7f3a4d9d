//! Entropy of sparse measures and the inequalities used as checks:
//! the convolution bound `H(mu*nu) <= |nu| H(mu) + |mu| H(nu)`, an explicit
//! entropy-variance bound for integer-valued variables, tail-entropy
//! reports, exact walk entropies for small supports, and the entropy scan
//! of evaluated alternating patterns.

use crate::error::Result;
use crate::evaluate::uniform_level_measure;
use crate::measure::{GroupMeasure, PatternMeasure, SparseMeasure};
use crate::mother::MotherGroup;

use crate::weight::Weight;
use crate::KeyMode;
use rand::Rng;

/// Shannon entropy in nats (`0 log 0 = 0`); defined for any finite
/// nonnegative measure, not only probabilities.
pub fn entropy_of_weights(weights: impl Iterator<Item = f64>) -> f64 {
    weights
        .filter(|&w| w > 0.0)
        .map(|w| -w * w.ln())
        .sum()
}

pub fn entropy<K: Ord + Clone, W: Weight>(mu: &SparseMeasure<K, W>) -> f64 {
    entropy_of_weights(mu.iter().map(|(_, w)| w.to_f64()))
}

pub fn group_entropy<W: Weight>(mu: &GroupMeasure<W>) -> f64 {
    entropy_of_weights(mu.iter().map(|(_, (w, _))| w.to_f64()))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `H(mu * nu) <= |nu| H(mu) + |mu| H(nu)` for group measures.
pub fn check_convolution_entropy<W: Weight>(
    mu: &GroupMeasure<W>,
    nu: &GroupMeasure<W>,
) -> Result<InequalityCheck> {
    let conv = mu.convolve(nu)?;
    let lhs = group_entropy(&conv);
    let rhs = nu.mass().to_f64() * group_entropy(mu) + mu.mass().to_f64() * group_entropy(nu);
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

/// Same bound for measures on the integers under additive convolution.
pub fn check_convolution_entropy_z(
    mu: &SparseMeasure<i64, f64>,
    nu: &SparseMeasure<i64, f64>,
) -> InequalityCheck {
    let mut conv: SparseMeasure<i64, f64> = SparseMeasure::zero();
    for (x, wx) in mu.iter() {
        for (y, wy) in nu.iter() {
            conv.add_weight(x + y, wx * wy);
        }
    }
    let lhs = entropy(&conv);
    let rhs = nu.mass() * entropy(mu) + mu.mass() * entropy(nu);
    InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    }
}

/// Entropy-variance bound for an integer-valued probability measure, in the
/// explicit maximum-entropy form `H(N) <= 1/2 log(2 pi e (Var N + 1/12))`.
pub fn check_entropy_variance(nu: &SparseMeasure<i64, f64>) -> InequalityCheck {
    let mass = nu.mass();
    let mean: f64 = nu.iter().map(|(x, w)| *x as f64 * w).sum::<f64>() / mass;
    let var: f64 = nu
        .iter()
        .map(|(x, w)| (*x as f64 - mean).powi(2) * w)
        .sum::<f64>()
        / mass;
    let lhs = entropy(nu);
    let rhs = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * (var + 1.0 / 12.0)).ln();
    InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    }
}

/// Tail entropy of a pattern measure beyond a length radius.
pub fn tail_entropy_beyond(mu: &PatternMeasure<f64>, radius: usize) -> f64 {
    entropy_of_weights(
        mu.iter()
            .filter(|(p, _)| p.len() > radius)
            .map(|(_, w)| *w),
    )
}

/// Tail entropy of a group measure beyond a word-length radius
/// (representative word length).
pub fn group_tail_entropy_beyond<W: Weight>(mu: &GroupMeasure<W>, radius: usize) -> f64 {
    entropy_of_weights(
        mu.iter()
            .filter(|(_, (_, e))| e.word_len() > radius)
            .map(|(_, (w, _))| w.to_f64()),
    )
}

/// Tail entropies of a family of measures at several radii, with the
/// supremum over the family per radius.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TailReport {
    pub radii: Vec<usize>,
    /// `tails[i][j]` = tail entropy of family member `i` beyond `radii[j]`.
    pub tails: Vec<Vec<f64>>,
    pub sup_tails: Vec<f64>,
}

pub fn tail_report(family: &[PatternMeasure<f64>], radii: &[usize]) -> TailReport {
    let tails: Vec<Vec<f64>> = family
        .iter()
        .map(|mu| radii.iter().map(|&r| tail_entropy_beyond(mu, r)).collect())
        .collect();
    let sup_tails = (0..radii.len())
        .map(|j| {
            tails
                .iter()
                .map(|row| row[j])
                .fold(0.0f64, |a, b| a.max(b))
        })
        .collect();
    TailReport {
        radii: radii.to_vec(),
        tails,
        sup_tails,
    }
}

/// Exact entropies `H(mu^{*n})` for `n = 1..=n_max` by repeated convolution.
pub fn exact_walk_entropy<W: Weight>(mu: &GroupMeasure<W>, n_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max);
    let mut power = mu.clone();
    out.push(group_entropy(&power));
    for _ in 1..n_max {
        power = power.convolve(mu)?;
        out.push(group_entropy(&power));
    }
    Ok(out)
}

/// Exact `H(eval(p_l))` for the alternating patterns `q_0 q_-1 q_0 ...` of
/// lengths `1..=len_max`, with the ratio `H/l`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PatternEntropyRow {
    pub len: usize,
    pub entropy: f64,
    pub ratio: f64,
    pub support: usize,
}

pub fn pattern_entropy_scan(
    mother: &MotherGroup,
    len_max: usize,
    budget: usize,
) -> Result<Vec<PatternEntropyRow>> {
    let q0: GroupMeasure<f64> = uniform_level_measure(mother, 0, KeyMode::Exact, budget)?;
    let qm1: GroupMeasure<f64> = uniform_level_measure(mother, -1, KeyMode::Exact, budget)?;
    let mut rows = Vec::new();
    let mut acc = GroupMeasure::dirac(&mother.identity(), KeyMode::Exact)?;
    for len in 1..=len_max {
        // Letters alternate q0, q-1, q0, ...
        acc = if len % 2 == 1 {
            acc.convolve(&q0)?
        } else {
            acc.convolve(&qm1)?
        };
        let h = group_entropy(&acc);
        rows.push(PatternEntropyRow {
            len,
            entropy: h,
            ratio: h / len as f64,
            support: acc.support_len(),
        });
    }
    Ok(rows)
}

/// Monte Carlo check that first-level sections at nonzero vertices of a
/// one-step sample from `eval(mu)` follow `eval(R_11 mu)`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SectionDistributionReport {
    pub tv: f64,
    pub samples: usize,
    pub ok: bool,
}

pub fn section_distribution_check<R: Rng + ?Sized>(
    mu: &PatternMeasure<f64>,
    mother: &MotherGroup,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<SectionDistributionReport> {
    // The support must stabilize level 1 vertexwise for the section law to
    // be well defined per vertex; measures on {q0, q1, empty} with m = 2
    // qualify, as do {q1, empty} for general m.
    let r11 = crate::ascend::r_apply(mu, mother.m(), crate::ascend::DEFAULT_LENGTH_CAP).entries
        [1][1]
        .clone();
    let expected: GroupMeasure<f64> = crate::evaluate::evaluate_measure(
        &r11,
        mother,
        KeyMode::Exact,
        crate::evaluate::DEFAULT_ENUM_BUDGET,
    )?;
    let mut counts: std::collections::BTreeMap<crate::Key, u64> = Default::default();
    let mut total = 0u64;
    for _ in 0..samples {
        let x = crate::evaluate::sample_step(mu, mother, rng)?;
        for i in 1..mother.m() as crate::Letter {
            let sec = x.section_at(i)?;
            *counts.entry(sec.key(KeyMode::Exact)?).or_default() += 1;
            total += 1;
        }
    }
    let mut tv = 0.0;
    let mut seen: std::collections::BTreeSet<&crate::Key> = Default::default();
    for (k, c) in &counts {
        seen.insert(k);
        tv += (*c as f64 / total as f64 - expected.weight_of_key(k)).abs();
    }
    for (k, (w, _)) in expected.iter() {
        if !seen.contains(k) {
            tv += w;
        }
    }
    tv /= 2.0;
    Ok(SectionDistributionReport {
        tv,
        samples,
        ok: tv <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{alternating_pattern, Pattern};
    use crate::perm::Permutation;

    #[test]
    fn entropy_basics() {
        let mut u: SparseMeasure<i64, f64> = SparseMeasure::zero();
        for i in 0..8 {
            u.add_weight(i, 1.0 / 8.0);
        }
        assert!((entropy(&u) - (8.0f64).ln()).abs() < 1e-12);
        let point: SparseMeasure<i64, f64> = SparseMeasure::dirac(3);
        assert_eq!(entropy(&point), 0.0);
        let mut m: SparseMeasure<i64, f64> = SparseMeasure::zero();
        m.add_weight(0, 0.5);
        m.add_weight(1, 0.25);
        m.add_weight(2, 0.25);
        assert!((entropy(&m) - 1.5 * (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounded_by_log_support() {
        let mut rng = crate::rng::replica_rng(3, 0);
        for _ in 0..100 {
            let n = rng.random_range(1..12);
            let mut m: SparseMeasure<i64, f64> = SparseMeasure::zero();
            let mut total = 0.0;
            let ws: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            for w in &ws {
                total += w;
            }
            for (i, w) in ws.iter().enumerate() {
                m.add_weight(i as i64, w / total);
            }
            assert!(entropy(&m) <= (n as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn convolution_entropy_bound() {
        // Point masses: 0 <= 0.
        let g = MotherGroup::new(2, 0).unwrap();
        let id: GroupMeasure<f64> = GroupMeasure::dirac(&g.identity(), KeyMode::Exact).unwrap();
        let c = check_convolution_entropy(&id, &id).unwrap();
        assert!(c.holds && c.lhs == 0.0);
        // Uniform on Z2 with itself: log 2 <= 2 log 2.
        let swap = g.rooted(&Permutation::transposition(2, 0, 1)).unwrap();
        let z2: GroupMeasure<f64> =
            GroupMeasure::uniform(&[g.identity(), swap], KeyMode::Exact).unwrap();
        let c = check_convolution_entropy(&z2, &z2).unwrap();
        assert!((c.lhs - (2.0f64).ln()).abs() < 1e-12);
        assert!((c.rhs - 2.0 * (2.0f64).ln()).abs() < 1e-12);
        assert!(c.holds);
        // Random sparse integer pairs (sub-probability allowed).
        let mut rng = crate::rng::replica_rng(4, 0);
        for _ in 0..100 {
            let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
                let mut m: SparseMeasure<i64, f64> = SparseMeasure::zero();
                for _ in 0..rng.random_range(1..8) {
                    m.add_weight(rng.random_range(-10..10), rng.random_range(0.01..0.5));
                }
                m
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            assert!(check_convolution_entropy_z(&a, &b).holds);
        }
    }

    #[test]
    fn entropy_variance_bound() {
        let point: SparseMeasure<i64, f64> = SparseMeasure::dirac(5);
        let c = check_entropy_variance(&point);
        assert!(c.holds && c.lhs == 0.0 && c.rhs > 0.0);
        for k in 1..=100i64 {
            let mut u: SparseMeasure<i64, f64> = SparseMeasure::zero();
            for i in 0..k {
                u.add_weight(i, 1.0 / k as f64);
            }
            assert!(check_entropy_variance(&u).holds, "uniform k = {k}");
        }
        // Binomial(20, 1/2).
        let mut b: SparseMeasure<i64, f64> = SparseMeasure::zero();
        let mut coef = 1.0f64;
        for i in 0..=20i64 {
            b.add_weight(i, coef / (2.0f64).powi(20));
            coef = coef * (20 - i) as f64 / (i + 1) as f64;
        }
        assert!(check_entropy_variance(&b).holds);
    }

    #[test]
    fn tail_entropy_matches_geometric_closed_form() {
        // Weights (1-r) r^i on integer keys; tail beyond l has closed form
        // sum_{i>l} (1-r) r^i (A + iB), A = -ln(1-r), B = -ln r.
        let r: f64 = 0.6;
        let mut m: PatternMeasure<f64> = SparseMeasure::zero();
        // Use strictly alternating patterns so length equals the index.
        for i in 0..60usize {
            m.add_weight(
                alternating_pattern(0, -1, i),
                (1.0 - r) * r.powi(i as i32),
            );
        }
        for l in [0usize, 3, 7] {
            let a = -(1.0 - r).ln();
            let b = -r.ln();
            let geom_tail: f64 = r.powi(l as i32 + 1) / (1.0 - r);
            let mean_tail: f64 = r.powi(l as i32 + 1)
                * ((l as f64 + 1.0) - l as f64 * r)
                / (1.0 - r).powi(2);
            let closed = (1.0 - r) * (a * geom_tail + b * mean_tail);
            let got = tail_entropy_beyond(&m, l);
            assert!((got - closed).abs() < 1e-9, "l={l}: {got} vs {closed}");
        }
        // Finite support: zero tail beyond the max radius.
        assert_eq!(tail_entropy_beyond(&m, 60), 0.0);
        // Non-increasing in the radius.
        let report = tail_report(&[m], &[0, 1, 2, 4, 8, 16]);
        for w in report.sup_tails.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn exact_walk_entropy_on_uniform_subgroup() {
        let g = MotherGroup::new(3, 0).unwrap();
        let u: GroupMeasure<f64> = uniform_level_measure(&g, -1, KeyMode::Exact, 100).unwrap();
        let hs = exact_walk_entropy(&u, 4).unwrap();
        for h in hs {
            assert!((h - (6.0f64).ln()).abs() < 1e-9);
        }
        let id: GroupMeasure<f64> = GroupMeasure::dirac(&g.identity(), KeyMode::Exact).unwrap();
        for h in exact_walk_entropy(&id, 4).unwrap() {
            assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn subadditivity_on_exact_convolutions() {
        let g = MotherGroup::new(2, 0).unwrap();
        let mut mu: GroupMeasure<f64> = uniform_level_measure(&g, 0, KeyMode::Exact, 100)
            .unwrap()
            .scale(&0.5);
        mu = mu
            .add(&uniform_level_measure::<f64>(&g, -1, KeyMode::Exact, 100).unwrap().scale(&0.5))
            .unwrap();
        let hs = exact_walk_entropy(&mu, 12).unwrap();
        for n in 1..hs.len() {
            for m in 1..=n {
                if n + m <= hs.len() {
                    assert!(hs[n + m - 1] <= hs[n - 1] + hs[m - 1] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn pattern_entropy_scan_monotone() {
        let g = MotherGroup::new(2, 0).unwrap();
        let rows = pattern_entropy_scan(&g, 12, 100).unwrap();
        assert!((rows[0].entropy - (2.0f64).ln()).abs() < 1e-12 || rows[0].entropy > 0.0);
        for w in rows.windows(2) {
            assert!(w[1].entropy >= w[0].entropy - 1e-9);
        }
        // H(eval(q_-1)) = log m!.
        let q: GroupMeasure<f64> = uniform_level_measure(&g, -1, KeyMode::Exact, 100).unwrap();
        assert!((group_entropy(&q) - (2.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn section_distribution_examples() {
        let g = MotherGroup::new(2, 1).unwrap();
        let mut rng = crate::rng::replica_rng(8, 0);
        // delta_empty: sections always trivial.
        let mu: PatternMeasure<f64> = SparseMeasure::dirac(Pattern::empty());
        let rep = section_distribution_check(&mu, &g, 2000, 0.02, &mut rng).unwrap();
        assert!(rep.ok, "tv = {}", rep.tv);
        // delta_{q1}: sections distributed as eval(q0).
        let mu: PatternMeasure<f64> = SparseMeasure::dirac(Pattern::single(1));
        let rep = section_distribution_check(&mu, &g, 20_000, 0.02, &mut rng).unwrap();
        assert!(rep.ok, "tv = {}", rep.tv);
        // Mixture on {q0, q1, empty}.
        let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
        mu.add_weight(Pattern::single(1), 0.4);
        mu.add_weight(Pattern::single(0), 0.4);
        mu.add_weight(Pattern::empty(), 0.2);
        let rep = section_distribution_check(&mu, &g, 50_000, 0.02, &mut rng).unwrap();
        assert!(rep.ok, "tv = {}", rep.tv);
    }
}
