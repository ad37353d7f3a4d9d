//! Ascension operators on pattern measures and on group measures.
//!
//! The letter rules for the 2x2 matrix of operators `R_ij` are
//!
//! ```text
//! R_ij q_k  (k >= 0):  q_k if i=j=0;  q_{k-1} if i=j=1;  0 otherwise
//! R_ij q_-1:           mass (m-1)^j / m on the empty pattern
//! ```
//!
//! extended multiplicatively: for `p = p_0 q_-1 p_1 ... q_-1 p_l` with blocks
//! in `D^c`,
//!
//! ```text
//! R_ij p = (R_ii p_0) . prod_t [ 1/m R_00 p_t + (m-1)/m R_11 p_t ]
//!          . (m-1)^j/m . (R_jj p_l)
//! ```
//!
//! (the scalar `(m-1)^j/m` is forced by `R_ij q_-1` and validated against
//! the total-mass identity
//! `mass(R_ij nu) = 1_{i=j}(1 - nu(D)) + nu(D) (m-1)^j / m`).
//!
//! The pattern ascension operator is
//! `T mu = R_00 mu + (R_01 mu)(1 - R_11 mu)^{-1}(R_10 mu)`, with the Neumann
//! series truncated under a certified tolerance. The scalar multiple of the
//! empty pattern inside `R_11 mu` is summed in closed form, so measures whose
//! series part is purely scalar (e.g. the point mass on `q_-1`) ascend with
//! zero defect.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::measure::{GroupMeasure, PatternMeasure, SparseMeasure};
use crate::pattern::Pattern;
use crate::weight::{clamp_nonneg, Weight};
use rand::Rng;

/// Default cap on pattern length inside operator outputs.
pub const DEFAULT_LENGTH_CAP: usize = 64;

/// Guard on Monte Carlo chain length.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// 2x2 matrix of pattern measures representing `R mu`.
#[derive(Clone, Debug)]
pub struct AscensionMatrix<W: Weight> {
    pub m: usize,
    pub entries: [[PatternMeasure<W>; 2]; 2],
}

impl<W: Weight> AscensionMatrix<W> {
    pub fn zero(m: usize) -> Self {
        AscensionMatrix {
            m,
            entries: [
                [SparseMeasure::zero(), SparseMeasure::zero()],
                [SparseMeasure::zero(), SparseMeasure::zero()],
            ],
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &PatternMeasure<W> {
        &self.entries[i][j]
    }

    /// Matrix product with concatenation convolution in the entries.
    pub fn matmul(&self, other: &Self, length_cap: usize) -> Self {
        let mut out = AscensionMatrix::zero(self.m);
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = SparseMeasure::zero();
                for k in 0..2 {
                    acc = acc.add(
                        &self.entries[i][k].concat_convolve(&other.entries[k][j], length_cap),
                    );
                }
                out.entries[i][j] = acc;
            }
        }
        out
    }

    pub fn row_masses(&self) -> [[W; 2]; 2] {
        [
            [self.entries[0][0].mass(), self.entries[0][1].mass()],
            [self.entries[1][0].mass(), self.entries[1][1].mass()],
        ]
    }
}

fn frac<W: Weight>(num: i64, den: i64) -> W {
    W::from_ratio(num, den)
}

/// `R` applied to a single pattern (unit mass), as a 2x2 matrix of measures.
pub fn r_apply_pattern<W: Weight>(p: &Pattern, m: usize, length_cap: usize) -> AscensionMatrix<W> {
    let mut out = AscensionMatrix::zero(m);
    let blocks = p.rooted_decomposition();
    let l = blocks.len() - 1;
    if l == 0 {
        out.entries[0][0] = SparseMeasure::dirac(p.clone());
        out.entries[1][1] = SparseMeasure::dirac(p.shift_down());
        return out;
    }
    // Middle factor: product over interior blocks of
    // 1/m * id-block + (m-1)/m * shifted-block.
    let mut middle: PatternMeasure<W> = SparseMeasure::dirac(Pattern::empty());
    for t in 1..l {
        let mut mix: PatternMeasure<W> = SparseMeasure::zero();
        mix.add_weight(blocks[t].clone(), frac(1, m as i64));
        mix.add_weight(blocks[t].shift_down(), frac((m as i64) - 1, m as i64));
        middle = middle.concat_convolve(&mix, length_cap);
    }
    for i in 0..2 {
        let left = if i == 0 {
            blocks[0].clone()
        } else {
            blocks[0].shift_down()
        };
        let with_left = prepend(&middle, &left, length_cap);
        for j in 0..2 {
            let right = if j == 0 {
                blocks[l].clone()
            } else {
                blocks[l].shift_down()
            };
            let scalar: W = if j == 0 {
                frac(1, m as i64)
            } else {
                frac(m as i64 - 1, m as i64)
            };
            out.entries[i][j] = append(&with_left, &right, length_cap).scale(&scalar);
        }
    }
    out
}

fn prepend<W: Weight>(
    measure: &PatternMeasure<W>,
    p: &Pattern,
    length_cap: usize,
) -> PatternMeasure<W> {
    let mut out = SparseMeasure::zero();
    let mut dropped = W::zero();
    for (q, w) in measure.iter() {
        let pq = p.concat(q);
        if pq.len() > length_cap {
            dropped = dropped + w.clone();
        } else {
            out.add_weight(pq, w.clone());
        }
    }
    out.add_defect(dropped + measure.defect().clone());
    out
}

fn append<W: Weight>(
    measure: &PatternMeasure<W>,
    p: &Pattern,
    length_cap: usize,
) -> PatternMeasure<W> {
    let mut out = SparseMeasure::zero();
    let mut dropped = W::zero();
    for (q, w) in measure.iter() {
        let qp = q.concat(p);
        if qp.len() > length_cap {
            dropped = dropped + w.clone();
        } else {
            out.add_weight(qp, w.clone());
        }
    }
    out.add_defect(dropped + measure.defect().clone());
    out
}

/// `R mu`, linear extension over the support.
pub fn r_apply<W: Weight>(
    mu: &PatternMeasure<W>,
    m: usize,
    length_cap: usize,
) -> AscensionMatrix<W> {
    let mut out = AscensionMatrix::zero(m);
    for (p, w) in mu.iter() {
        let rp = r_apply_pattern::<W>(p, m, length_cap);
        for i in 0..2 {
            for j in 0..2 {
                out.entries[i][j] = out.entries[i][j].add(&rp.entries[i][j].scale(w));
            }
        }
    }
    out
}

/// The averaged legacy operator `A mu`, via the product formula over the
/// `q_-1`-decomposition: every block contributes
/// `1/m * block + (m-1)/m * shifted block`.
pub fn a_apply<W: Weight>(
    mu: &PatternMeasure<W>,
    m: usize,
    length_cap: usize,
) -> PatternMeasure<W> {
    let mut out: PatternMeasure<W> = SparseMeasure::zero();
    for (p, w) in mu.iter() {
        let mut acc: PatternMeasure<W> = SparseMeasure::dirac(Pattern::empty());
        for block in p.rooted_decomposition() {
            let mut mix: PatternMeasure<W> = SparseMeasure::zero();
            mix.add_weight(block.clone(), frac(1, m as i64));
            mix.add_weight(block.shift_down(), frac(m as i64 - 1, m as i64));
            acc = acc.concat_convolve(&mix, length_cap);
        }
        out = out.add(&acc.scale(w));
    }
    out
}

/// Basis size above which the resolvent falls back to a truncated series.
const MAX_RESOLVENT_DIM: usize = 4096;

/// Compute `y = b (1 - nu)^{-1}` in the pattern semigroup algebra.
///
/// Within the length cap the reachable patterns form a finite basis, so `y`
/// solves the finite linear system `y = b + y * nu` (right concatenation by
/// `nu`), which Gaussian elimination handles exactly for rational weights
/// and with no series truncation at all. Mass leaving the cap is dropped
/// (the caller certifies it through the final mass deficit). Requires
/// `mass(nu) < 1`, which holds whenever `mu(D) > 0`.
fn resolvent_right<W: Weight>(
    b: &PatternMeasure<W>,
    nu: &PatternMeasure<W>,
    length_cap: usize,
) -> Result<PatternMeasure<W>> {
    // Reachable basis: supports of b closed under right-concat by supp(nu).
    let mut basis: indexmap::IndexMap<Pattern, usize> = indexmap::IndexMap::new();
    for (p, _) in b.iter() {
        let next = basis.len();
        basis.entry(p.clone()).or_insert(next);
    }
    let nu_support: Vec<(Pattern, W)> = nu.iter().map(|(p, w)| (p.clone(), w.clone())).collect();
    let mut frontier = 0usize;
    while frontier < basis.len() {
        if basis.len() > MAX_RESOLVENT_DIM {
            return resolvent_series(b, nu, length_cap);
        }
        let p = basis.get_index(frontier).unwrap().0.clone();
        for (r, _) in &nu_support {
            let pr = p.concat(r);
            if pr.len() <= length_cap {
                let next = basis.len();
                basis.entry(pr).or_insert(next);
            }
        }
        frontier += 1;
    }
    let dim = basis.len();
    if dim == 0 {
        return Ok(SparseMeasure::zero());
    }
    // (I - M) y = b with M[q][p] = sum of nu(r) over p.r = q.
    let mut mat: Vec<Vec<W>> = vec![vec![W::zero(); dim + 1]; dim];
    for (p, &col) in basis.iter() {
        mat[col][col] = W::one();
        for (r, w) in &nu_support {
            let pr = p.concat(r);
            if pr.len() <= length_cap {
                let row = basis[&pr];
                mat[row][col] = mat[row][col].clone() - w.clone();
            }
        }
    }
    for (p, w) in b.iter() {
        mat[basis[p]][dim] = w.clone();
    }
    // Gaussian elimination; pivots chosen by float magnitude (the system is
    // strictly column diagonally dominant for sub-unit nu mass).
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&a, &b| {
                mat[a][col]
                    .to_f64()
                    .abs()
                    .partial_cmp(&mat[b][col].to_f64().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if mat[pivot_row][col].is_zero() {
            return Err(Error::Invalid("singular resolvent system".into()));
        }
        mat.swap(col, pivot_row);
        let inv = W::one() / mat[col][col].clone();
        for j in col..=dim {
            mat[col][j] = mat[col][j].clone() * inv.clone();
        }
        for row in 0..dim {
            if row != col && !mat[row][col].is_zero() {
                let factor = mat[row][col].clone();
                for j in col..=dim {
                    mat[row][j] = mat[row][j].clone() - factor.clone() * mat[col][j].clone();
                }
            }
        }
    }
    let mut out: PatternMeasure<W> = SparseMeasure::zero();
    for (p, &row) in basis.iter() {
        let w = mat[row][dim].clone();
        if !w.is_zero() {
            out.add_weight(p.clone(), clamp_nonneg(w));
        }
    }
    Ok(out)
}

/// Truncated-series fallback when the reachable basis is too large.
fn resolvent_series<W: Weight>(
    b: &PatternMeasure<W>,
    nu: &PatternMeasure<W>,
    length_cap: usize,
) -> Result<PatternMeasure<W>> {
    let ratio = nu.mass().to_f64();
    if ratio >= 1.0 {
        return Err(Error::Invalid("series divergent: nu has full mass".into()));
    }
    let max_terms = ((1e-12f64.ln()) / ratio.ln()).ceil().max(1.0) as usize;
    let mut out = b.clone();
    let mut term = b.clone();
    for _ in 0..max_terms {
        term = term.concat_convolve(nu, length_cap);
        if term.mass().to_f64() <= 0.0 {
            break;
        }
        out = out.add(&term);
    }
    Ok(out)
}

/// Exact pattern ascension
/// `T mu = R_00 mu + (R_01 mu)(1 - R_11 mu)^{-1}(R_10 mu)`.
///
/// The resolvent is evaluated by a finite exact solve over the patterns
/// reachable within the length cap, so for rational weights the only losses
/// are cap drops; the output defect is certified as `1 - mass` for
/// probability input. `tol` bounds the defect the caller is willing to
/// accept from the fallback series path.
pub fn t_pattern_exact<W: Weight>(
    mu: &PatternMeasure<W>,
    m: usize,
    tol: f64,
    length_cap: usize,
) -> Result<PatternMeasure<W>> {
    if tol <= 0.0 {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    if !mu.is_probability(1e-9) {
        return Err(Error::Invalid(format!(
            "T needs a probability measure (mass + defect = {}, defect = {})",
            (mu.mass() + mu.defect().clone()).to_f64(),
            mu.defect().to_f64()
        )));
    }
    let r = r_apply(mu, m, length_cap);
    let rooted_mass = mu.rooted_mass().to_f64();
    let mut out = r.entries[0][0].clone();
    if rooted_mass > 0.0 {
        let y = resolvent_right(&r.entries[0][1], &r.entries[1][1], length_cap)?;
        out = out.add(&y.concat_convolve(&r.entries[1][0], length_cap));
    }
    let mass = out.mass();
    if mass > W::one() {
        // Rounding overshoot; left in place it compounds through the
        // resolvent denominator on later iterations, so scale it out.
        out = out.scale(&(W::one() / mass));
    }
    // Certify all losses at once.
    let defect = clamp_nonneg(W::one() - out.mass());
    out.set_defect(defect);
    Ok(out)
}

/// One Monte Carlo sample of `T mu` via the two-state chain: from state `i`,
/// draw `P ~ mu`, move to `j` and emit a block with law `(R_ij P)`; stop on
/// return to state 0 and output the concatenation.
pub fn t_pattern_sample<R: Rng + ?Sized>(
    mu: &PatternMeasure<f64>,
    m: usize,
    rng: &mut R,
    max_steps: usize,
) -> Result<Pattern> {
    let mass = mu.mass();
    if mass <= 0.0 {
        return Err(Error::Invalid("empty measure".into()));
    }
    let support: Vec<(&Pattern, f64)> = mu.iter().map(|(p, w)| (p, *w)).collect();
    let draw = |rng: &mut R| -> &Pattern {
        let mut u = rng.random_range(0.0..mass);
        for (p, w) in &support {
            if u < *w {
                return p;
            }
            u -= w;
        }
        support.last().unwrap().0
    };
    let mut state = 0usize;
    let mut acc = Pattern::empty();
    for step in 0..max_steps {
        let p = draw(rng);
        let rp = r_apply_pattern::<f64>(p, m, usize::MAX);
        let w0 = rp.entries[state][0].mass();
        let w1 = rp.entries[state][1].mass();
        let total = w0 + w1;
        debug_assert!((total - 1.0).abs() < 1e-9);
        let j = if rng.random_range(0.0..total) < w0 { 0 } else { 1 };
        let entry = &rp.entries[state][j];
        // Draw the block within the chosen entry.
        let mut u = rng.random_range(0.0..entry.mass());
        let mut block = Pattern::empty();
        for (q, w) in entry.iter() {
            if u < *w {
                block = q.clone();
                break;
            }
            u -= w;
        }
        acc = acc.concat(&block);
        state = j;
        if state == 0 {
            let _ = step;
            return Ok(acc);
        }
    }
    Err(Error::MaxStepsExceeded(max_steps))
}

/// Per-step record of iterated ascension.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IterationStep {
    pub k: usize,
    /// Mass of the rooted-letter set `D`.
    pub eps: f64,
    pub moment1: f64,
    pub moment2: f64,
    pub defect: f64,
    pub support: usize,
    /// Tail entropy beyond each requested length radius.
    pub tails: Vec<(usize, f64)>,
    pub fact_a_ok: bool,
    pub fact_b_ok: bool,
    /// Present when the support lies in `Q_{k-1} + {q_k}`: top-letter mass
    /// must be conserved.
    pub fact_c_ok: Option<bool>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct IterationDiagnostics {
    pub steps: Vec<IterationStep>,
    pub aborted: Option<String>,
}

pub struct IterateOptions {
    pub tol: f64,
    pub length_cap: usize,
    pub defect_budget: f64,
    pub tail_radii: Vec<usize>,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            tol: 1e-12,
            length_cap: DEFAULT_LENGTH_CAP,
            defect_budget: 1e-6,
            tail_radii: vec![2, 4, 8, 16],
        }
    }
}

/// Iterate `T` from `mu`, recording diagnostics and checking at every step:
/// (a) pointwise monotonicity on `D^c`, (b) strict decrease of the `D` mass
/// while positive, (c) conservation of the top-letter mass for measures on
/// `Q_{k-1} + {q_k}`.
pub fn iterate_t(
    mu: &PatternMeasure<f64>,
    m: usize,
    k_max: usize,
    opts: &IterateOptions,
) -> Result<(Vec<PatternMeasure<f64>>, IterationDiagnostics)> {
    let mut measures = vec![mu.clone()];
    let mut steps = Vec::new();
    let mut aborted = None;
    let top_letter = mu.iter().filter_map(|(p, _)| p.max_letter()).max();
    // Support in Q_{k-1} + {q_k} means the top letter only occurs alone.
    let conserved_top = top_letter.filter(|&k| {
        k >= 0
            && mu
                .iter()
                .all(|(p, _)| !p.letters().contains(&k) || *p == Pattern::single(k))
    });
    steps.push(step_record(0, mu, conserved_top, None, m));
    for k in 1..=k_max {
        let prev = measures.last().unwrap();
        let next = t_pattern_exact(prev, m, opts.tol, opts.length_cap)?;
        steps.push(step_record(k, &next, conserved_top, Some(prev), m));
        if next.defect().to_f64() > opts.defect_budget {
            aborted = Some(format!(
                "defect {} exceeded budget {} at step {k}",
                next.defect(),
                opts.defect_budget
            ));
            measures.push(next);
            break;
        }
        measures.push(next);
    }
    // eps_k must be non-increasing.
    for w in steps.windows(2) {
        if w[1].eps > w[0].eps + 1e-12 {
            return Err(Error::Validation(format!(
                "eps increased from {} to {} at step {}",
                w[0].eps, w[1].eps, w[1].k
            )));
        }
    }
    Ok((measures, IterationDiagnostics { steps, aborted }))
}

fn step_record(
    k: usize,
    mu: &PatternMeasure<f64>,
    conserved_top: Option<i8>,
    prev: Option<&PatternMeasure<f64>>,
    _m: usize,
) -> IterationStep {
    let tails = [2usize, 4, 8, 16]
        .iter()
        .map(|&r| (r, crate::entropy::tail_entropy_beyond(mu, r)))
        .collect();
    let (fact_a_ok, fact_b_ok, fact_c_ok) = match prev {
        None => (true, true, conserved_top.map(|_| true)),
        Some(prev) => {
            let a_ok = prev
                .iter()
                .filter(|(p, _)| !p.contains_rooted())
                .all(|(p, w)| mu.weight(p) >= w - 1e-12);
            let prev_eps = prev.rooted_mass();
            let eps = mu.rooted_mass();
            let b_ok = if prev_eps > prev.defect().to_f64() + 1e-12 {
                eps < prev_eps + 1e-15
            } else {
                true
            };
            let c_ok = conserved_top.map(|top| {
                let allowance = 1e-10 + mu.defect() + prev.defect();
                (mu.weight(&Pattern::single(top)) - prev.weight(&Pattern::single(top))).abs()
                    <= allowance
            });
            (a_ok, b_ok, c_ok)
        }
    };
    IterationStep {
        k,
        eps: mu.rooted_mass(),
        moment1: mu.length_moment(1.0),
        moment2: mu.length_moment(2.0),
        defect: mu.defect().to_f64(),
        support: mu.support_len(),
        tails,
        fact_a_ok,
        fact_b_ok,
        fact_c_ok,
    }
}

/// One checked inequality: `lhs <= rhs` up to the stated allowance.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub applicable: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct MomentReport {
    pub checks: Vec<BoundCheck>,
    pub defect: f64,
}

impl MomentReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.holds)
    }
}

/// Check the first/second moment bounds relating `T mu`, `A mu` and `mu` in
/// exact rational arithmetic on the truncated measures:
///
/// - ascension moments: `Tmu(|p|) <= m Amu(|p|)` and the second-moment bound
///   with the `2 m^3 / ((m-1) mu(D))` prefactor;
/// - length of legacy (supports in `Q_0 + {q_1}` only):
///   `Amu(|p|) <= 1 + (m-1)/m^2 mu(|p|)`,
///   `Amu(|p|^2) <= (m-1)^2/m^4 mu(|p|^2) + 3 mu(|p|)`;
/// - contraction (same support class): `Tmu(|p|) <= (m-1)/m mu(|p|) + m`,
///   `Tmu(|p|^2) <= 2/mu(D) (mu(|p|)+m)^2 + (m-1)^2/m^3 mu(|p|^2)`.
pub fn check_moment_bounds(
    mu: &PatternMeasure<num_rational::BigRational>,
    m: usize,
    tol: f64,
    length_cap: usize,
) -> Result<MomentReport> {
    use num_rational::BigRational as Q;
    let mi = m as i64;
    let on_q0_q1 = mu.iter().all(|(p, _)| {
        (*p == Pattern::single(1)) || p.letters().iter().all(|&x| x == -1 || x == 0)
    });
    let d_mass = mu.rooted_mass();
    let amu = a_apply(mu, m, length_cap);
    let tmu = t_pattern_exact(mu, m, tol, length_cap)?;

    let mu1 = mu.length_moment_exact(1);
    let mu2 = mu.length_moment_exact(2);
    let a1 = amu.length_moment_exact(1);
    let a2 = amu.length_moment_exact(2);
    let t1 = tmu.length_moment_exact(1);
    let t2 = tmu.length_moment_exact(2);

    let q = |n: i64, d: i64| -> Q { Weight::from_ratio(n, d) };
    let mut checks = Vec::new();
    let mut push = |name: &'static str, lhs: Q, rhs: Q, applicable: bool| {
        checks.push(BoundCheck {
            name,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            holds: lhs <= rhs,
            applicable,
        });
    };

    // T moments against A moments.
    push("ascension-moment-1", t1.clone(), q(mi, 1) * a1.clone(), true);
    let d_positive = !d_mass.is_zero();
    if d_positive {
        let pref = q(2 * mi * mi * mi, 1) / (q(mi - 1, 1) * d_mass.clone());
        push(
            "ascension-moment-2",
            t2.clone(),
            pref * a1.clone() * a1.clone() + q(mi, 1) * a2.clone(),
            true,
        );
    }
    // Length of legacy and contraction, on Q_0 + {q_1} support.
    push(
        "legacy-moment-1",
        a1.clone(),
        q(1, 1) + q(mi - 1, mi * mi) * mu1.clone(),
        on_q0_q1,
    );
    push(
        "legacy-moment-2",
        a2,
        q((mi - 1) * (mi - 1), mi * mi * mi * mi) * mu2.clone() + q(3, 1) * mu1.clone(),
        on_q0_q1,
    );
    push(
        "contraction-moment-1",
        t1,
        q(mi - 1, mi) * mu1.clone() + q(mi, 1),
        on_q0_q1,
    );
    if d_positive {
        let s = mu1 + q(mi, 1);
        push(
            "contraction-moment-2",
            t2,
            q(2, 1) / d_mass * s.clone() * s + q((mi - 1) * (mi - 1), mi * mi * mi) * mu2,
            on_q0_q1,
        );
    }
    Ok(MomentReport {
        checks,
        defect: tmu.defect().to_f64(),
    })
}

/// The m x m matrix `M_ij = E X(i) 1_{i.X = j}` with group-measure entries.
#[derive(Clone)]
pub struct GroupMatrix<W: Weight> {
    pub m: usize,
    pub entries: Vec<Vec<GroupMeasure<W>>>,
}

impl<W: Weight> GroupMatrix<W> {
    pub fn zero(m: usize, mode: crate::KeyMode) -> Self {
        GroupMatrix {
            m,
            entries: (0..m)
                .map(|_| (0..m).map(|_| GroupMeasure::new(mode)).collect())
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let mode = self.entries[0][0].mode();
        let mut out = GroupMatrix::zero(self.m, mode);
        for i in 0..self.m {
            for j in 0..self.m {
                let mut acc = GroupMeasure::new(mode);
                for k in 0..self.m {
                    acc = acc.add(&self.entries[i][k].convolve(&other.entries[k][j])?)?;
                }
                out.entries[i][j] = acc;
            }
        }
        Ok(out)
    }

    pub fn mass_matrix(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.mass().to_f64()).collect())
            .collect()
    }
}

/// Build `M` from a finitely supported exact-keyed measure: each support
/// element contributes its level-1 sections split by where it moves `i`.
pub fn m_matrix<W: Weight>(mu: &GroupMeasure<W>) -> Result<GroupMatrix<W>> {
    if mu.mode() != crate::KeyMode::Exact {
        return Err(Error::Invalid(
            "M matrix needs exact keys (sections of depth-keyed measures are ambiguous)".into(),
        ));
    }
    let mut m_opt = None;
    for (_, (_, e)) in mu.iter() {
        m_opt = Some(e.m());
        break;
    }
    let m = m_opt.ok_or_else(|| Error::Invalid("empty measure".into()))?;
    let mut out = GroupMatrix::zero(m, crate::KeyMode::Exact);
    for (_, (w, e)) in mu.iter() {
        let root = e.root();
        for i in 0..m as crate::Letter {
            let j = root.apply(i);
            let sec = e.section_at(i)?;
            out.entries[i as usize][j as usize].add_element(&sec, w.clone())?;
        }
    }
    Ok(out)
}

/// Exact (truncated) group-level ascension
/// `T mu = M_00 + M_0* (I - M_**)^{-1} M_*0`.
///
/// Requires the level-1 position chain started at 0 to return to 0 with
/// probability one, which holds whenever the group generated by the support
/// is transitive on level 1 (check via `orbits::transitive_on_level`); the
/// implementation verifies certain return directly so that degenerate but
/// well-defined inputs (e.g. a point mass at the identity) pass.
pub fn t_group_exact<W: Weight>(mu: &GroupMeasure<W>, tol: f64) -> Result<GroupMeasure<W>> {
    let mat = m_matrix(mu)?;
    let m = mat.m;
    // Reachability of 0 from every state reachable from 0.
    let masses = mat.mass_matrix();
    let reach_from = |start: usize| -> Vec<bool> {
        let mut seen = vec![false; m];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for (j, &w) in masses[i].iter().enumerate() {
                if w > 1e-15 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let from0 = reach_from(0);
    for i in 1..m {
        if from0[i] && !reach_from(i)[0] {
            return Err(Error::Validation(format!(
                "level-1 chain can reach vertex {i} but never return to 0; \
                 the support is not transitive on level 1"
            )));
        }
    }

    let mode = mu.mode();
    let mut acc = mat.entries[0][0].clone();
    // Row vector V = M_0*, then V <- V M_** term by term.
    let mut v: Vec<GroupMeasure<W>> = (1..m).map(|j| mat.entries[0][j].clone()).collect();
    let max_rounds = 10_000usize;
    for _ in 0..max_rounds {
        let v_mass: f64 = v.iter().map(|e| e.mass().to_f64()).sum();
        if v_mass <= tol {
            break;
        }
        for (idx, vi) in v.iter().enumerate() {
            let i = idx + 1;
            acc = acc.add(&vi.convolve(&mat.entries[i][0])?)?;
        }
        let mut next: Vec<GroupMeasure<W>> = (0..m - 1).map(|_| GroupMeasure::new(mode)).collect();
        for (jdx, slot) in next.iter_mut().enumerate() {
            let j = jdx + 1;
            for (idx, vi) in v.iter().enumerate() {
                let i = idx + 1;
                *slot = slot.add(&vi.convolve(&mat.entries[i][j])?)?;
            }
        }
        v = next;
    }
    let defect = clamp_nonneg(W::one() - acc.mass());
    let mut acc = acc;
    acc.add_defect(defect);
    Ok(acc)
}

/// Sample the ascended walk: run the step chain until the running product
/// fixes vertex 0 again and return its section at 0.
pub fn t_group_sample<R: Rng + ?Sized>(
    steps: &GroupMeasure<f64>,
    rng: &mut R,
    max_steps: usize,
) -> Result<Element> {
    let support: Vec<(f64, &Element)> = steps.iter().map(|(_, (w, e))| (*w, e)).collect();
    if support.is_empty() {
        return Err(Error::Invalid("empty step measure".into()));
    }
    let mass: f64 = support.iter().map(|(w, _)| w).sum();
    let spec = support[0].1.spec().clone();
    let mut section = Element::identity(&spec);
    let mut pos: crate::Letter = 0;
    for _ in 0..max_steps {
        let mut u = rng.random_range(0.0..mass);
        let mut x = support[0].1;
        for (w, e) in &support {
            if u < *w {
                x = e;
                break;
            }
            u -= w;
        }
        section = section.multiply(&x.section_at(pos)?)?;
        pos = x.root().apply(pos);
        if pos == 0 {
            return Ok(section);
        }
    }
    Err(Error::MaxStepsExceeded(max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::Pattern;
    use rand::SeedableRng;

    fn dirac(letters: &[i8]) -> PatternMeasure<f64> {
        SparseMeasure::dirac(Pattern::canonicalize(letters))
    }

    #[test]
    fn letter_rules() {
        // R q_-1: mass (m-1)^j/m on the empty pattern.
        for m in [2usize, 3, 5] {
            let r = r_apply_pattern::<f64>(&Pattern::single(-1), m, 64);
            for i in 0..2 {
                assert!(
                    (r.entry(i, 0).weight(&Pattern::empty()) - 1.0 / m as f64).abs() < 1e-15
                );
                assert!(
                    (r.entry(i, 1).weight(&Pattern::empty()) - (m as f64 - 1.0) / m as f64)
                        .abs()
                        < 1e-15
                );
            }
        }
        // R q_1: diagonal, shift on the lower corner.
        let r = r_apply_pattern::<f64>(&Pattern::single(1), 2, 64);
        assert_eq!(r.entry(0, 0).weight(&Pattern::single(1)), 1.0);
        assert_eq!(r.entry(1, 1).weight(&Pattern::single(0)), 1.0);
        assert_eq!(r.entry(0, 1).mass(), 0.0);
        assert_eq!(r.entry(1, 0).mass(), 0.0);
    }

    #[test]
    fn total_mass_formula_random_measures() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(41);
        use rand::Rng;
        for m in [2usize, 3, 5] {
            for _ in 0..60 {
                let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
                let parts = rng.random_range(1..6);
                let mut total = 0.0;
                let mut raw = Vec::new();
                for _ in 0..parts {
                    let len = rng.random_range(0..6);
                    let letters: Vec<i8> =
                        (0..len).map(|_| rng.random_range(-1..3)).collect();
                    let w: f64 = rng.random_range(0.01..1.0);
                    total += w;
                    raw.push((Pattern::canonicalize(&letters), w));
                }
                for (p, w) in raw {
                    mu.add_weight(p, w / total);
                }
                let d = mu.rooted_mass();
                let r = r_apply(&mu, m, 10_000);
                for i in 0..2 {
                    for j in 0..2 {
                        let expected = if i == j { 1.0 - d } else { 0.0 }
                            + d * ((m - 1) as f64).powi(j as i32) / m as f64;
                        assert!(
                            (r.entry(i, j).mass() - expected).abs() < 1e-12,
                            "m={m} i={i} j={j}"
                        );
                    }
                }
                // Row stochasticity.
                let rm = r.row_masses();
                assert!((rm[0][0] + rm[0][1] - 1.0).abs() < 1e-12);
                assert!((rm[1][0] + rm[1][1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn r_is_multiplicative_on_patterns() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        use rand::Rng;
        for m in [2usize, 3] {
            for _ in 0..50 {
                let len_p = rng.random_range(0..5);
                let len_r = rng.random_range(0..4);
                let p = Pattern::canonicalize(
                    &(0..len_p).map(|_| rng.random_range(-1..2)).collect::<Vec<i8>>(),
                );
                let q = Pattern::canonicalize(
                    &(0..len_r).map(|_| rng.random_range(-1..2)).collect::<Vec<i8>>(),
                );
                let lhs = r_apply_pattern::<f64>(&p.concat(&q), m, 1000);
                let rhs = r_apply_pattern::<f64>(&p, m, 1000)
                    .matmul(&r_apply_pattern::<f64>(&q, m, 1000), 1000);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            lhs.entry(i, j).linf_distance(rhs.entry(i, j)) < 1e-12,
                            "p={p} q={q} m={m} i={i} j={j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn averaged_legacy_examples() {
        // A delta_empty = delta_empty.
        let a = a_apply(&dirac(&[]), 2, 64);
        assert_eq!(a.weight(&Pattern::empty()), 1.0);
        // A delta_{q0} = 1/m q0 + (m-1)/m q_-1.
        for m in [2usize, 3] {
            let a = a_apply(&dirac(&[0]), m, 64);
            assert!((a.weight(&Pattern::single(0)) - 1.0 / m as f64).abs() < 1e-15);
            assert!(
                (a.weight(&Pattern::single(-1)) - (m as f64 - 1.0) / m as f64).abs() < 1e-15
            );
        }
        // m=2: A delta_{q0 q-1 q0} = 1/4 (q0 + q0q-1 + q-1q0 + q-1).
        let a = a_apply(&dirac(&[0, -1, 0]), 2, 64);
        for letters in [vec![0i8], vec![0, -1], vec![-1, 0], vec![-1]] {
            assert!(
                (a.weight(&Pattern::canonicalize(&letters)) - 0.25).abs() < 1e-15,
                "{letters:?}"
            );
        }
        // A maps probability measures to probability measures.
        assert!((a.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn a_equals_product_formula_on_single_patterns() {
        // Explicit expansion over all 2^blocks combinations, |p| <= 10.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(43);
        use rand::Rng;
        for m in [2usize, 3] {
            for _ in 0..40 {
                let len = rng.random_range(0..10);
                let p = Pattern::canonicalize(
                    &(0..len).map(|_| rng.random_range(-1..2)).collect::<Vec<i8>>(),
                );
                let a = a_apply(&SparseMeasure::dirac(p.clone()), m, 10_000);
                // Independent expansion.
                let blocks = p.rooted_decomposition();
                let mut expanded: PatternMeasure<f64> = SparseMeasure::dirac(Pattern::empty());
                for b in &blocks {
                    let mut mix: PatternMeasure<f64> = SparseMeasure::zero();
                    mix.add_weight(b.clone(), 1.0 / m as f64);
                    mix.add_weight(b.shift_down(), (m as f64 - 1.0) / m as f64);
                    expanded = expanded.concat_convolve(&mix, 10_000);
                }
                assert!(a.linf_distance(&expanded) < 1e-12);
            }
        }
    }

    #[test]
    fn t_fixed_points_exact() {
        for m in [2usize, 3, 5] {
            // T delta_{q_-1} = delta_empty with zero defect.
            let t = t_pattern_exact(&dirac(&[-1]), m, 1e-12, 64).unwrap();
            assert_eq!(t.support_len(), 1);
            assert!((t.weight(&Pattern::empty()) - 1.0).abs() < crate::EPS_NUM);
            assert!(t.defect().abs() < crate::EPS_NUM);
            // T delta_{q_k} = delta_{q_k} for k >= 0, zero defect.
            for k in 0..3i8 {
                let t = t_pattern_exact(&dirac(&[k]), m, 1e-12, 64).unwrap();
                assert_eq!(t.weight(&Pattern::single(k)), 1.0);
                assert_eq!(*t.defect(), 0.0);
            }
            // In exact rational arithmetic the fixed points are literal.
            use num_rational::BigRational;
            let mu: PatternMeasure<BigRational> = SparseMeasure::dirac(Pattern::single(-1));
            let t = t_pattern_exact(&mu, m, 1e-12, 64).unwrap();
            assert_eq!(t.weight(&Pattern::empty()), Weight::one());
            assert!(Weight::is_zero(t.defect()));
        }
    }

    #[test]
    fn t_on_the_half_half_measure() {
        // mu = 1/2 q0 + 1/2 q-1 on m=2: T mu = 1/2 q0 + 1/3 empty + 1/6 q-1.
        let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
        mu.add_weight(Pattern::single(0), 0.5);
        mu.add_weight(Pattern::single(-1), 0.5);
        let t = t_pattern_exact(&mu, 2, 1e-14, 64).unwrap();
        assert!((t.weight(&Pattern::single(0)) - 0.5).abs() < 1e-12);
        assert!((t.weight(&Pattern::empty()) - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.weight(&Pattern::single(-1)) - 1.0 / 6.0).abs() < 1e-12);
        assert!(t.defect().to_f64() < 1e-12);
        // Mass conservation.
        assert!((t.mass() + t.defect() - 1.0).abs() < crate::EPS_NUM);
    }

    #[test]
    fn t_exact_in_rationals_is_exactly_rational() {
        use num_rational::BigRational;
        let mut mu: PatternMeasure<BigRational> = SparseMeasure::zero();
        mu.add_weight(Pattern::single(0), Weight::from_ratio(1, 2));
        mu.add_weight(Pattern::single(-1), Weight::from_ratio(1, 2));
        let t = t_pattern_exact(&mu, 2, 1e-30, 64).unwrap();
        assert_eq!(t.weight(&Pattern::single(0)), Weight::from_ratio(1, 2));
        // The finite resolvent solve gives the weights exactly.
        assert_eq!(t.weight(&Pattern::empty()), Weight::from_ratio(1, 3));
        assert_eq!(t.weight(&Pattern::single(-1)), Weight::from_ratio(1, 6));
        assert!(Weight::is_zero(t.defect()));
    }

    #[test]
    fn sampler_matches_exact_law() {
        let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
        mu.add_weight(Pattern::single(0), 0.5);
        mu.add_weight(Pattern::single(-1), 0.5);
        let exact = t_pattern_exact(&mu, 2, 1e-9, 64).unwrap();
        let mut rng = crate::rng::replica_rng(5, 0);
        let n = 100_000;
        let mut counts: std::collections::BTreeMap<Pattern, usize> = Default::default();
        for _ in 0..n {
            let p = t_pattern_sample(&mu, 2, &mut rng, DEFAULT_MAX_STEPS).unwrap();
            *counts.entry(p).or_default() += 1;
        }
        let mut empirical: PatternMeasure<f64> = SparseMeasure::zero();
        for (p, c) in counts {
            empirical.add_weight(p, c as f64 / n as f64);
        }
        assert!(empirical.tv_distance(&exact) < 0.02);
        // Degenerate cases.
        assert_eq!(
            t_pattern_sample(&dirac(&[-1]), 2, &mut rng, 100).unwrap(),
            Pattern::empty()
        );
        assert_eq!(
            t_pattern_sample(&dirac(&[1]), 2, &mut rng, 100).unwrap(),
            Pattern::single(1)
        );
    }

    #[test]
    fn iterate_preserves_facts() {
        // mu = 1/3 (q1 + q0 + q-1), m=2: q1 mass constant, eps -> 0.
        let mut mu: PatternMeasure<f64> = SparseMeasure::zero();
        for letters in [vec![1i8], vec![0], vec![-1]] {
            mu.add_weight(Pattern::canonicalize(&letters), 1.0 / 3.0);
        }
        let opts = IterateOptions {
            defect_budget: 0.05,
            ..Default::default()
        };
        let (seq, diag) = iterate_t(&mu, 2, 60, &opts).unwrap();
        assert!(diag.aborted.is_none(), "{:?}", diag.aborted);
        for s in &diag.steps {
            assert!(s.fact_a_ok && s.fact_b_ok);
            assert_eq!(s.fact_c_ok, Some(true));
        }
        let last = seq.last().unwrap();
        assert!((last.weight(&Pattern::single(1)) - 1.0 / 3.0).abs() < 1e-9);
        assert!(last.rooted_mass() < 1e-3);
        // Constant sequence for delta_{q1}.
        let (seq, _) = iterate_t(&dirac(&[1]), 2, 5, &IterateOptions::default()).unwrap();
        for muk in &seq {
            assert_eq!(muk.weight(&Pattern::single(1)), 1.0);
        }
    }

    #[test]
    fn moment_bounds_hold_on_random_measures() {
        use num_rational::BigRational;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(44);
        use rand::Rng;
        for m in [2usize, 3, 5] {
            for _ in 0..20 {
                let mut mu: PatternMeasure<BigRational> = SparseMeasure::zero();
                let parts = rng.random_range(1..5u32);
                let mut weights: Vec<i64> = (0..parts).map(|_| rng.random_range(1..20)).collect();
                let total: i64 = weights.iter().sum();
                if rng.random_bool(0.5) {
                    weights[0] += 0; // keep q1 chances even
                }
                for (idx, w) in weights.iter().enumerate() {
                    let p = if idx == 0 && rng.random_bool(0.3) {
                        Pattern::single(1)
                    } else {
                        let len = rng.random_range(1..9);
                        let first = if rng.random_bool(0.5) { 0 } else { -1 };
                        crate::pattern::alternating_pattern(first, -1 - first, len)
                    };
                    mu.add_weight(p, Weight::from_ratio(*w, total));
                }
                let report = check_moment_bounds(&mu, m, 1e-12, 200).unwrap();
                assert!(report.all_hold(), "m={m}: {report:?}");
            }
        }
        // Point mass on empty pattern: all bounds trivial.
        let mu: PatternMeasure<BigRational> = SparseMeasure::dirac(Pattern::empty());
        assert!(check_moment_bounds(&mu, 2, 1e-12, 64).unwrap().all_hold());
    }

    #[test]
    fn group_matrix_for_identity_measure() {
        let g = crate::mother::MotherGroup::new(2, 0).unwrap();
        let mu: GroupMeasure<f64> =
            GroupMeasure::dirac(&g.identity(), crate::KeyMode::Exact).unwrap();
        let mat = m_matrix(&mu).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                if i == j {
                    assert!((mat.entries[i][j].mass() - 1.0).abs() < 1e-15);
                } else {
                    assert_eq!(mat.entries[i][j].support_len(), 0);
                }
            }
        }
        // T delta_id = delta_id.
        let t = t_group_exact(&mu, 1e-12).unwrap();
        assert_eq!(t.support_len(), 1);
        assert!((t.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_depth_keyed_input() {
        let g = crate::mother::MotherGroup::new(2, 0).unwrap();
        let mu: GroupMeasure<f64> =
            GroupMeasure::dirac(&g.identity(), crate::KeyMode::Depth(3)).unwrap();
        assert!(m_matrix(&mu).is_err());
    }
}
