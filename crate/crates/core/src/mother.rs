//! Mother groups and their level subgroups.
//!
//! The (m,r) mother group is generated by the states
//!
//! ```text
//! alpha_{k,sigma} = <<alpha_{k,sigma}, alpha_{k-1,sigma}, 1, ..., 1>>   0 <= k <= r
//! alpha_{-1,sigma} = sigma (rooted)
//! beta_{k,rho}     = <<beta_{k,rho}, beta_{k-1,rho}, 1, ..., 1>>        1 <= k <= r
//! beta_{0,rho}     = <<beta_{0,rho}, 1, ..., 1>> rho                    0.rho = 0
//! ```
//!
//! Identity-valued generators (`sigma = id`, `rho = id`) act trivially and
//! are represented by the empty word rather than by trivial states, so the
//! generated spec satisfies the standing assumption that every declared
//! state acts nontrivially.
//!
//! The level generator `lambda_{w,sigma}` (first `|w|` nonzero letters agree
//! with `w` => permute the next nonzero letter and its follower by `sigma`)
//! is realized as a word over mother generators:
//!
//! ```text
//! lambda_{w,sigma}   = c^-1 . lambda_{1..1,sigma} . c,
//!     c = beta_{k-1,(1 w_k)} ... beta_{0,(1 w_1)}
//! lambda_{1..1,(outer,inners)} =
//!     prod_i  beta_{k,(1 i)} . alpha_{k,inner_i} . beta_{k,(1 i)}
//!     . beta_{k,outer}
//! ```

use crate::element::Element;
use crate::error::{Error, Result};
use crate::perm::{Letter, Permutation};
use crate::spec::{AutomatonSpec, RawStateDef, StateId};
use std::collections::BTreeMap;
use std::sync::Arc;

/// An automorphism of the first two levels fixing vertex 0 and its children:
/// `outer` permutes the level-1 vertices `1..m-1` (stored as a permutation of
/// `{0..m-1}` fixing 0) and `inner[i-1]` acts on the children of vertex `i`.
/// The pair `(x, y)` of consecutive letters maps to `(x.outer, y.inner_x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwoLevelPerm {
    pub outer: Permutation,
    pub inner: Vec<Permutation>,
}

impl TwoLevelPerm {
    pub fn identity(m: usize) -> Self {
        TwoLevelPerm {
            outer: Permutation::identity(m),
            inner: vec![Permutation::identity(m); m - 1],
        }
    }

    pub fn new(outer: Permutation, inner: Vec<Permutation>) -> Result<Self> {
        let m = outer.degree();
        if !outer.fixes(0) {
            return Err(Error::Validation("outer permutation must fix 0".into()));
        }
        if inner.len() != m - 1 || inner.iter().any(|p| p.degree() != m) {
            return Err(Error::Validation(format!(
                "expected {} inner permutations of degree {m}",
                m - 1
            )));
        }
        Ok(TwoLevelPerm { outer, inner })
    }

    pub fn m(&self) -> usize {
        self.outer.degree()
    }

    #[inline]
    fn inner_at(&self, x: Letter) -> &Permutation {
        &self.inner[x as usize - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.outer.is_identity() && self.inner.iter().all(|p| p.is_identity())
    }

    /// `(x, y) . self`, the imprimitive action on two consecutive letters
    /// (`x` nonzero).
    pub fn act_pair(&self, x: Letter, y: Letter) -> (Letter, Letter) {
        (self.outer.apply(x), self.inner_at(x).apply(y))
    }

    /// Wreath multiplication in right-action order:
    /// `(x,y).(self.then(t)) = ((x,y).self).t`.
    pub fn then(&self, t: &TwoLevelPerm) -> TwoLevelPerm {
        let m = self.m();
        TwoLevelPerm {
            outer: self.outer.then(&t.outer),
            inner: (1..m as Letter)
                .map(|x| self.inner_at(x).then(t.inner_at(self.outer.apply(x))))
                .collect(),
        }
    }

    pub fn inverse(&self) -> TwoLevelPerm {
        let m = self.m();
        let outer = self.outer.inverse();
        TwoLevelPerm {
            inner: (1..m as Letter)
                .map(|x| self.inner_at(outer.apply(x)).inverse())
                .collect(),
            outer,
        }
    }

    /// All `(m-1)! (m!)^(m-1)` elements of `Sym(m) wr Sym(m-1)`.
    pub fn enumerate(m: usize) -> Vec<TwoLevelPerm> {
        let outers: Vec<_> = Permutation::enumerate_stab0(m);
        let inners = Permutation::enumerate_sym(m);
        let mut out = Vec::new();
        let mut stack: Vec<Vec<Permutation>> = vec![Vec::new()];
        while let Some(chosen) = stack.pop() {
            if chosen.len() == m - 1 {
                for o in &outers {
                    out.push(TwoLevelPerm {
                        outer: o.clone(),
                        inner: chosen.clone(),
                    });
                }
                continue;
            }
            for p in inners.iter().rev() {
                let mut next = chosen.clone();
                next.push(p.clone());
                stack.push(next);
            }
        }
        out
    }

    pub fn random<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> TwoLevelPerm {
        let outer = loop {
            let p = Permutation::random(m, rng);
            if p.fixes(0) {
                break p;
            }
        };
        TwoLevelPerm {
            outer,
            inner: (1..m).map(|_| Permutation::random(m, rng)).collect(),
        }
    }
}

/// The (m,r) mother group: generated spec plus generator lookup tables.
pub struct MotherGroup {
    m: usize,
    r: i32,
    spec: Arc<AutomatonSpec>,
    alpha: BTreeMap<(i32, Permutation), StateId>,
    beta: BTreeMap<(i32, Permutation), StateId>,
}

impl MotherGroup {
    /// Build the generators of the (m,r) mother group; `r >= 0, m >= 2`.
    pub fn new(m: usize, r: i32) -> Result<MotherGroup> {
        if m < 2 {
            return Err(Error::Validation("mother group needs m >= 2".into()));
        }
        if r < 0 {
            return Err(Error::Validation("mother group needs r >= 0".into()));
        }
        let sym: Vec<_> = Permutation::enumerate_sym(m)
            .into_iter()
            .filter(|p| !p.is_identity())
            .collect();
        let stab0: Vec<_> = Permutation::enumerate_stab0(m)
            .into_iter()
            .filter(|p| !p.is_identity())
            .collect();

        let mut defs: Vec<RawStateDef> = Vec::new();
        let alpha_name = |k: i32, p: &Permutation| {
            if k < 0 {
                format!("s_{}", p.image_tag())
            } else {
                format!("a{k}_{}", p.image_tag())
            }
        };
        let beta_name = |k: i32, p: &Permutation| format!("b{k}_{}", p.image_tag());

        // Rooted generators alpha_{-1,sigma} = sigma.
        for p in &sym {
            defs.push(RawStateDef {
                name: alpha_name(-1, p),
                sections: vec![Vec::new(); m],
                root: p.clone(),
            });
        }
        // alpha_{k,sigma} = <<alpha_k, alpha_{k-1}, 1, ..., 1>>.
        for k in 0..=r {
            for p in &sym {
                let mut sections = vec![Vec::new(); m];
                sections[0] = vec![(alpha_name(k, p), false)];
                sections[1] = vec![(alpha_name(k - 1, p), false)];
                defs.push(RawStateDef {
                    name: alpha_name(k, p),
                    sections,
                    root: Permutation::identity(m),
                });
            }
        }
        // beta_{0,rho} = <<beta_0, 1, ..., 1>> rho;
        // beta_{k,rho} = <<beta_k, beta_{k-1}, 1, ..., 1>>.
        for k in 0..=r {
            for p in &stab0 {
                let mut sections = vec![Vec::new(); m];
                sections[0] = vec![(beta_name(k, p), false)];
                let root = if k == 0 {
                    p.clone()
                } else {
                    sections[1] = vec![(beta_name(k - 1, p), false)];
                    Permutation::identity(m)
                };
                defs.push(RawStateDef {
                    name: beta_name(k, p),
                    sections,
                    root,
                });
            }
        }

        let empty = AutomatonSpec::new(m, Vec::new())?;
        let spec = AutomatonSpec::extend(&empty, defs)?;
        let mut alpha = BTreeMap::new();
        let mut beta = BTreeMap::new();
        for k in -1..=r {
            for p in &sym {
                alpha.insert((k, p.clone()), spec.lookup(&alpha_name(k, p))?);
            }
        }
        for k in 0..=r {
            for p in &stab0 {
                beta.insert((k, p.clone()), spec.lookup(&beta_name(k, p))?);
            }
        }
        Ok(MotherGroup {
            m,
            r,
            spec,
            alpha,
            beta,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> i32 {
        self.r
    }

    pub fn spec(&self) -> &Arc<AutomatonSpec> {
        &self.spec
    }

    /// Number of generator states actually declared (identity-valued
    /// generators are the empty word, not states).
    pub fn realized_state_count(&self) -> usize {
        self.spec.state_count()
    }

    pub fn identity(&self) -> Element {
        Element::identity(&self.spec)
    }

    pub fn alpha(&self, k: i32, sigma: &Permutation) -> Result<Element> {
        if k < -1 || k > self.r {
            return Err(Error::Validation(format!("alpha level {k} out of range")));
        }
        if sigma.is_identity() {
            return Ok(self.identity());
        }
        let id = *self
            .alpha
            .get(&(k, sigma.clone()))
            .ok_or_else(|| Error::Validation(format!("no alpha generator for {sigma}")))?;
        Ok(Element::from_word(
            &self.spec,
            smallvec::smallvec![crate::spec::Gen::new(id, false)],
        ))
    }

    pub fn beta(&self, k: i32, rho: &Permutation) -> Result<Element> {
        if !rho.fixes(0) {
            return Err(Error::Validation(format!(
                "beta permutation {rho} must fix 0"
            )));
        }
        if k < 0 || k > self.r {
            return Err(Error::Validation(format!("beta level {k} out of range")));
        }
        if rho.is_identity() {
            return Ok(self.identity());
        }
        let id = *self
            .beta
            .get(&(k, rho.clone()))
            .ok_or_else(|| Error::Validation(format!("no beta generator for {rho}")))?;
        Ok(Element::from_word(
            &self.spec,
            smallvec::smallvec![crate::spec::Gen::new(id, false)],
        ))
    }

    pub fn rooted(&self, sigma: &Permutation) -> Result<Element> {
        self.alpha(-1, sigma)
    }

    fn check_level_word(&self, w: &[Letter]) -> Result<()> {
        if w.iter().any(|&x| x == 0 || x as usize >= self.m) {
            return Err(Error::Validation(format!(
                "level word {w:?} must use letters 1..{}",
                self.m - 1
            )));
        }
        if w.len() as i32 > self.r {
            return Err(Error::Validation(format!(
                "level word of length {} needs r >= {}, have r = {}",
                w.len(),
                w.len(),
                self.r
            )));
        }
        Ok(())
    }

    /// The conjugator `c = beta_{k-1,(1 w_k)} ... beta_{0,(1 w_1)}` mapping
    /// the first `k` nonzero letters `1..1` to `w`.
    pub fn level_conjugator(&self, w: &[Letter]) -> Result<Element> {
        self.check_level_word(w)?;
        let mut out = self.identity();
        for (j, &wj) in w.iter().enumerate().rev() {
            let t = Permutation::transposition(self.m, 1, wj);
            out = out.multiply(&self.beta(j as i32, &t)?)?;
        }
        Ok(out)
    }

    /// The level generator `lambda_{w,sigma}` as a word over mother
    /// generators.
    pub fn lambda(&self, w: &[Letter], sigma: &TwoLevelPerm) -> Result<Element> {
        self.check_level_word(w)?;
        if sigma.m() != self.m {
            return Err(Error::AlphabetMismatch {
                expected: self.m,
                got: sigma.m(),
            });
        }
        let k = w.len() as i32;
        let mut core = self.identity();
        for i in 1..self.m as Letter {
            let inner = &sigma.inner[i as usize - 1];
            if inner.is_identity() {
                continue;
            }
            let conj = self.beta(k, &Permutation::transposition(self.m, 1, i))?;
            let factor = self.alpha(k, inner)?.conjugate(&conj)?;
            core = core.multiply(&factor)?;
        }
        core = core.multiply(&self.beta(k, &sigma.outer)?)?;
        let conj = self.level_conjugator(w)?;
        core.conjugate(&conj)
    }

    /// Uniform sample from the level subgroup `L_{m,k}`: independent uniform
    /// lambda factors over all `(m-1)^k` level words (uniform rooted
    /// permutation for `k = -1`).
    pub fn sample_level<R: rand::Rng + ?Sized>(&self, k: i32, rng: &mut R) -> Result<Element> {
        if k == -1 {
            return self.rooted_or_identity(&Permutation::random(self.m, rng));
        }
        if k < -1 {
            return Err(Error::Validation("level k must be >= -1".into()));
        }
        let mut out = self.identity();
        for w in level_words(self.m, k as usize) {
            let sigma = TwoLevelPerm::random(self.m, rng);
            out = out.multiply(&self.lambda(&w, &sigma)?)?;
        }
        Ok(out)
    }

    /// All elements of one factor `L^w ~= Sym(m) wr Sym(m-1)`.
    pub fn enumerate_level_factor(&self, w: &[Letter]) -> Result<Vec<Element>> {
        TwoLevelPerm::enumerate(self.m)
            .iter()
            .map(|s| self.lambda(w, s))
            .collect()
    }

    /// All elements of `L_{m,k}` (direct product over level words), within a
    /// budget on the total count.
    pub fn enumerate_level(&self, k: i32, budget: usize) -> Result<Vec<Element>> {
        if k == -1 {
            return Permutation::enumerate_sym(self.m)
                .iter()
                .map(|p| self.rooted_or_identity(p))
                .collect();
        }
        let words = level_words(self.m, k as usize);
        let factor = TwoLevelPerm::enumerate(self.m);
        let needed = factor.len().checked_pow(words.len() as u32);
        match needed {
            Some(n) if n <= budget => {}
            _ => {
                return Err(Error::EnumerationBudget {
                    needed: needed.unwrap_or(usize::MAX),
                    budget,
                })
            }
        }
        let mut out = vec![self.identity()];
        for w in &words {
            let factors: Vec<Element> = factor
                .iter()
                .map(|s| self.lambda(w, s))
                .collect::<Result<_>>()?;
            let mut next = Vec::with_capacity(out.len() * factors.len());
            for e in &out {
                for f in &factors {
                    next.push(e.multiply(f)?);
                }
            }
            out = next;
        }
        Ok(out)
    }

    fn rooted_or_identity(&self, p: &Permutation) -> Result<Element> {
        if p.is_identity() {
            Ok(self.identity())
        } else {
            self.rooted(p)
        }
    }

    /// Extend the mother spec with the conjugating automorphism
    /// `delta = <<delta, delta gamma^-1, ..., delta gamma^-(m-1)>>` (trivial
    /// root) and return the extended spec together with delta.
    pub fn with_delta(&self) -> Result<(Arc<AutomatonSpec>, Element)> {
        let m = self.m;
        let name = |i: usize| format!("d{i}");
        let gamma = Permutation::cyclic_shift(m);
        let mut defs = Vec::new();
        for i in 0..m {
            defs.push(RawStateDef {
                name: name(i),
                sections: (0..m).map(|x| vec![(name(x), false)]).collect(),
                root: gamma.pow(-(i as i64)),
            });
        }
        let spec = AutomatonSpec::extend(&self.spec, defs)?;
        let delta = Element::state(&spec, "d0")?;
        Ok((spec, delta))
    }
}

/// The words `{1..m-1}^k` indexing level-`k` lambda factors, lexicographic.
pub fn level_words(m: usize, k: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for w in &out {
            for x in 1..m as Letter {
                let mut v = w.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Closed-form action of `alpha_{k,sigma}`: if the first `k+1` nonzero
/// letters are all 1, permute the following letter by `sigma`.
pub fn alpha_action(k: i32, sigma: &Permutation, w: &[Letter]) -> Vec<Letter> {
    let mut out = w.to_vec();
    let mut nonzero_seen = 0i64;
    let needed = (k + 1) as i64;
    for (i, &x) in w.iter().enumerate() {
        if nonzero_seen == needed {
            out[i] = sigma.apply(x);
            return out;
        }
        if x != 0 {
            if x != 1 {
                return out;
            }
            nonzero_seen += 1;
        }
    }
    out
}

/// Closed-form action of `beta_{k,rho}`: if the first `k` nonzero letters
/// are all 1, permute the next nonzero letter by `rho`.
pub fn beta_action(k: i32, rho: &Permutation, w: &[Letter]) -> Result<Vec<Letter>> {
    if !rho.fixes(0) {
        return Err(Error::Validation(format!(
            "beta permutation {rho} must fix 0"
        )));
    }
    let mut out = w.to_vec();
    let mut nonzero_seen = 0i64;
    for (i, &x) in w.iter().enumerate() {
        if x == 0 {
            continue;
        }
        if nonzero_seen == k as i64 {
            out[i] = rho.apply(x);
            return Ok(out);
        }
        if x != 1 {
            return Ok(out);
        }
        nonzero_seen += 1;
    }
    Ok(out)
}

/// Closed-form action of `lambda_{w,sigma}`: if the first `|w|` nonzero
/// letters agree with `w`, the `|w|+1`st nonzero letter `x` and the letter
/// `y` following it map to `(x.outer, y.inner_x)`.
pub fn lambda_action(w: &[Letter], sigma: &TwoLevelPerm, word: &[Letter]) -> Result<Vec<Letter>> {
    if w.iter().any(|&x| x == 0) {
        return Err(Error::Validation("level word must not contain 0".into()));
    }
    let mut out = word.to_vec();
    let mut matched = 0usize;
    let mut i = 0usize;
    while i < word.len() {
        let x = word[i];
        if matched == w.len() {
            if x != 0 {
                out[i] = sigma.outer.apply(x);
                if i + 1 < word.len() {
                    out[i + 1] = sigma.inner[x as usize - 1].apply(word[i + 1]);
                }
                return Ok(out);
            }
        } else if x != 0 {
            if x != w[matched] {
                return Ok(out);
            }
            matched += 1;
        }
        i += 1;
    }
    Ok(out)
}

/// Does the element lie in `W_k`, the subgroup whose level-`k` sections are
/// all trivial?
pub fn in_w(e: &Element, k: usize) -> Result<bool> {
    for v in crate::element::all_words(e.m(), k) {
        if !e.section(&v)?.is_trivial()? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Check the recursion identity `a = (prod_i a_i^{(1 i)}) rho` where
/// `a = <<a, g_1, ..., g_{m-1}>> rho` and `a_i = <<a_i, g_i, 1, ..., 1>>`.
///
/// The transpositions `(1 i)` and the trailing `rho` are realized as
/// beta_0-type states: the conjugation must act along the whole 0-ray, which
/// a rooted permutation does not do.
pub fn verify_product_identity(
    mother: &MotherGroup,
    sections: &[Element],
    rho: &Permutation,
) -> Result<bool> {
    let m = mother.m();
    if sections.len() != m - 1 {
        return Err(Error::Validation(format!(
            "need {} section elements, got {}",
            m - 1,
            sections.len()
        )));
    }
    if !rho.fixes(0) {
        return Err(Error::Validation(format!("rho = {rho} must fix 0")));
    }
    let base = mother.spec();
    let g_words: Vec<Vec<(String, bool)>> = sections
        .iter()
        .map(|g| {
            g.word()
                .iter()
                .map(|gen| (base.state(gen.state()).name.clone(), gen.is_inverse()))
                .collect()
        })
        .collect();

    let mut defs = Vec::new();
    // a = <<a, g_1, ..., g_{m-1}>> rho
    let mut a_sections: Vec<Vec<(String, bool)>> = vec![vec![("vp_a".into(), false)]];
    a_sections.extend(g_words.iter().cloned());
    defs.push(RawStateDef {
        name: "vp_a".into(),
        sections: a_sections,
        root: rho.clone(),
    });
    // a_i = <<a_i, g_i, 1, ..., 1>>
    for (i, gw) in g_words.iter().enumerate() {
        let name = format!("vp_a{}", i + 1);
        let mut sections = vec![Vec::new(); m];
        sections[0] = vec![(name.clone(), false)];
        sections[1] = gw.clone();
        defs.push(RawStateDef {
            name,
            sections,
            root: Permutation::identity(m),
        });
    }
    let spec = AutomatonSpec::extend(base, defs)?;

    let a = Element::state(&spec, "vp_a")?;
    let mut product = Element::identity(&spec);
    for i in 1..m {
        let ai = Element::state(&spec, &format!("vp_a{i}"))?;
        let conj = mother
            .beta(0, &Permutation::transposition(m, 1, i as Letter))?
            .lift(&spec)?;
        product = product.multiply(&ai.conjugate(&conj)?)?;
    }
    let rho_deep = mother.beta(0, rho)?.lift(&spec)?;
    product = product.multiply(&rho_deep)?;
    a.equals(&product)
}
