//! Evaluation of patterns into the mother group: each letter `q_i` becomes
//! the uniform measure on the level subgroup `L_{m,i}` (or one uniform
//! sample from it), extended multiplicatively to patterns and linearly to
//! pattern measures.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::measure::{GroupMeasure, PatternMeasure};
use crate::mother::MotherGroup;
use crate::pattern::Pattern;
use crate::weight::Weight;
use crate::KeyMode;
use rand::Rng;
use std::collections::BTreeMap;

/// Default budget on subgroup enumeration size for exact evaluation.
pub const DEFAULT_ENUM_BUDGET: usize = 20_000;

/// Uniform measure on the level subgroup `L_{m,k}`.
pub fn uniform_level_measure<W: Weight>(
    mother: &MotherGroup,
    k: i32,
    mode: KeyMode,
    budget: usize,
) -> Result<GroupMeasure<W>> {
    let elements = mother.enumerate_level(k, budget)?;
    GroupMeasure::uniform(&elements, mode)
}

/// Exact evaluation of a single pattern: the convolution of uniform
/// subgroup measures over its letters.
pub fn evaluate_exact<W: Weight>(
    p: &Pattern,
    mother: &MotherGroup,
    mode: KeyMode,
    budget: usize,
) -> Result<GroupMeasure<W>> {
    let mut cache: BTreeMap<i8, GroupMeasure<W>> = BTreeMap::new();
    evaluate_exact_cached(p, mother, mode, budget, &mut cache)
}

fn evaluate_exact_cached<W: Weight>(
    p: &Pattern,
    mother: &MotherGroup,
    mode: KeyMode,
    budget: usize,
    cache: &mut BTreeMap<i8, GroupMeasure<W>>,
) -> Result<GroupMeasure<W>> {
    let mut out = GroupMeasure::dirac(&mother.identity(), mode)?;
    for &letter in p.letters() {
        if letter as i32 > mother.r() {
            return Err(Error::Validation(format!(
                "letter q{letter} exceeds the target group's level r = {}",
                mother.r()
            )));
        }
        if !cache.contains_key(&letter) {
            let q = uniform_level_measure(mother, letter as i32, mode, budget)?;
            cache.insert(letter, q);
        }
        out = out.convolve(&cache[&letter])?;
    }
    Ok(out)
}

/// Linear extension to pattern measures: `eval(mu) = sum_p mu(p) eval(p)`.
pub fn evaluate_measure<W: Weight>(
    mu: &PatternMeasure<W>,
    mother: &MotherGroup,
    mode: KeyMode,
    budget: usize,
) -> Result<GroupMeasure<W>> {
    let mut cache: BTreeMap<i8, GroupMeasure<W>> = BTreeMap::new();
    let mut out = GroupMeasure::new(mode);
    for (p, w) in mu.iter() {
        let ev = evaluate_exact_cached(p, mother, mode, budget, &mut cache)?;
        out = out.add(&ev.scale(w))?;
    }
    out.add_defect(W::from_f64(mu.defect().to_f64()));
    Ok(out)
}

/// One multiplicative sample: the product over the letters of independent
/// uniform subgroup samples.
pub fn evaluate_sample<R: Rng + ?Sized>(
    p: &Pattern,
    mother: &MotherGroup,
    rng: &mut R,
) -> Result<Element> {
    let mut out = mother.identity();
    for &letter in p.letters() {
        if letter as i32 > mother.r() {
            return Err(Error::Validation(format!(
                "letter q{letter} exceeds the target group's level r = {}",
                mother.r()
            )));
        }
        out = out.multiply(&mother.sample_level(letter as i32, rng)?)?;
    }
    Ok(out)
}

/// Draw one pattern from `mu` and evaluate it multiplicatively.
pub fn sample_step<R: Rng + ?Sized>(
    mu: &PatternMeasure<f64>,
    mother: &MotherGroup,
    rng: &mut R,
) -> Result<Element> {
    let mass = mu.mass();
    let mut u = rng.random_range(0.0..mass);
    for (p, w) in mu.iter() {
        if u < *w {
            return evaluate_sample(p, mother, rng);
        }
        u -= w;
    }
    Err(Error::Invalid("empty measure".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SparseMeasure;
    use crate::perm::Permutation;

    #[test]
    fn empty_pattern_evaluates_to_identity() {
        let g = MotherGroup::new(2, 0).unwrap();
        let ev: GroupMeasure<f64> =
            evaluate_exact(&Pattern::empty(), &g, KeyMode::Exact, 100).unwrap();
        assert_eq!(ev.support_len(), 1);
        assert_eq!(
            ev.weight_of_key(&crate::Key::identity(2)),
            1.0
        );
    }

    #[test]
    fn rooted_letter_evaluates_to_uniform_sym() {
        let g = MotherGroup::new(2, 0).unwrap();
        let ev: GroupMeasure<f64> =
            evaluate_exact(&Pattern::single(-1), &g, KeyMode::Exact, 100).unwrap();
        assert_eq!(ev.support_len(), 2);
        for (_, (w, _)) in ev.iter() {
            assert!((w - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_subgroup_measures_are_idempotent() {
        // q_i * q_i = q_i exactly: m=2 for i in {-1,0,1}; m=3 for i in {-1,0}.
        let g2 = MotherGroup::new(2, 1).unwrap();
        for i in -1..=1 {
            let q: GroupMeasure<f64> =
                uniform_level_measure(&g2, i, KeyMode::Exact, 100).unwrap();
            let qq = q.convolve(&q).unwrap();
            assert!(qq.tv_distance(&q) < 1e-12, "m=2 i={i}");
        }
        let g3 = MotherGroup::new(3, 0).unwrap();
        for i in -1..=0 {
            let q: GroupMeasure<f64> =
                uniform_level_measure(&g3, i, KeyMode::Exact, 100).unwrap();
            let qq = q.convolve(&q).unwrap();
            assert!(qq.tv_distance(&q) < 1e-12, "m=3 i={i}");
        }
    }

    #[test]
    fn evaluation_is_a_homomorphism() {
        // eval(concat(p, r)) = eval(p) * eval(r) on all patterns over
        // {q-1, q0, q1} with |p|, |r| <= 4 would be large; sample the grid.
        let g = MotherGroup::new(2, 1).unwrap();
        let mut patterns = vec![Pattern::empty()];
        for _ in 0..4 {
            let mut next = patterns.clone();
            for p in &patterns {
                for letter in -1..=1 {
                    let q = p.concat(&Pattern::single(letter));
                    if q.len() <= 4 && !next.contains(&q) {
                        next.push(q);
                    }
                }
            }
            patterns = next;
        }
        let short: Vec<_> = patterns.iter().filter(|p| p.len() <= 2).collect();
        for p in &short {
            for r in &short {
                let lhs: GroupMeasure<f64> =
                    evaluate_exact(&p.concat(r), &g, KeyMode::Exact, 100).unwrap();
                let rhs = evaluate_exact::<f64>(p, &g, KeyMode::Exact, 100)
                    .unwrap()
                    .convolve(&evaluate_exact(r, &g, KeyMode::Exact, 100).unwrap())
                    .unwrap();
                assert!(lhs.tv_distance(&rhs) < 1e-12, "p={p} r={r}");
            }
        }
    }

    #[test]
    fn non_rooted_patterns_fix_vertex_zero() {
        let g = MotherGroup::new(3, 1).unwrap();
        for letters in [vec![0i8], vec![1], vec![0, 1]] {
            let ev: GroupMeasure<f64> = evaluate_exact(
                &Pattern::canonicalize(&letters),
                &g,
                KeyMode::Exact,
                10_000,
            )
            .unwrap();
            for (_, (_, e)) in ev.iter() {
                assert_eq!(e.act(&[0]).unwrap(), vec![0]);
            }
        }
    }

    #[test]
    fn sample_frequencies_match_uniform_law() {
        let g = MotherGroup::new(2, 0).unwrap();
        let members = g.enumerate_level(0, 10).unwrap();
        let keys: Vec<_> = members
            .iter()
            .map(|e| e.key(KeyMode::Exact).unwrap())
            .collect();
        let mut rng = crate::rng::replica_rng(17, 0);
        let mut counts = vec![0usize; keys.len()];
        let n = 20_000;
        for _ in 0..n {
            let e = evaluate_sample(&Pattern::single(0), &g, &mut rng).unwrap();
            let k = e.key(KeyMode::Exact).unwrap();
            let idx = keys.iter().position(|kk| *kk == k).unwrap();
            counts[idx] += 1;
        }
        let p = 1.0 / keys.len() as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn measure_evaluation_is_linear() {
        let g = MotherGroup::new(2, 0).unwrap();
        let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
        mu.add_weight(Pattern::single(0), 0.5);
        mu.add_weight(Pattern::single(-1), 0.5);
        let ev = evaluate_measure::<f64>(&mu, &g, KeyMode::Exact, 100).unwrap();
        let swap = g
            .rooted(&Permutation::transposition(2, 0, 1))
            .unwrap();
        // 1/2 uniform on L_0 + 1/2 uniform on Sym(2): identity carries 1/2.
        assert!((ev.weight_of_key(&crate::Key::identity(2)) - 0.5).abs() < 1e-12);
        assert!(
            (ev.weight_of_key(&swap.key(KeyMode::Exact).unwrap()) - 0.25).abs() < 1e-12
        );
        assert!((ev.mass() - 1.0).abs() < 1e-12);
    }
}
