//! Python bindings for the automaton-group workbench: specs and elements
//! with exact algebra, mother groups, pattern ascension and walk entropy.

use ascension_core::ascend::{iterate_t, t_pattern_exact, IterateOptions};
use ascension_core::element::parse_tree_word;
use ascension_core::evaluate::evaluate_measure;
use ascension_core::measure::{parse_pattern_measure, GroupMeasure, PatternMeasure};
use ascension_core::mother::MotherGroup;
use ascension_core::walk::{walk_entropy_series, KeyDepth};
use ascension_core::{AutomatonSpec, Element, KeyMode};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::sync::Arc;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An automaton spec: a finite set of states with wreath recursion.
#[pyclass(name = "Spec", skip_from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: Arc<AutomatonSpec>,
}

#[pymethods]
impl PySpec {
    /// Parse the text format (`m = 2`, `state b = [b, 1] (0 1)`, ...).
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PySpec {
            inner: AutomatonSpec::parse(text).map_err(err)?,
        })
    }

    /// The (m,r) mother-group spec.
    #[staticmethod]
    fn mother(m: usize, r: i32) -> PyResult<Self> {
        Ok(PySpec {
            inner: MotherGroup::new(m, r).map_err(err)?.spec().clone(),
        })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.states().iter().map(|s| s.name.clone()).collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Build an element from a word such as `"a.b^-1"` (or `"1"`).
    fn element(&self, word: &str) -> PyResult<PyElement> {
        Ok(PyElement {
            inner: Element::parse(&self.inner, word).map_err(err)?,
        })
    }

    /// Activity classification as a JSON string.
    fn classify_json(&self) -> PyResult<String> {
        let report = ascension_core::activity::activity_classify(&self.inner).map_err(err)?;
        serde_json::to_string(&report).map_err(err)
    }

    /// The k-collapse acting on blocks of k letters.
    fn collapse(&self, k: usize) -> PyResult<Self> {
        Ok(PySpec {
            inner: self.inner.k_collapse(k).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Spec(m={}, states={})",
            self.inner.m(),
            self.inner.state_count()
        )
    }
}

/// A tree automorphism given as a signed word over a spec's states.
#[pyclass(name = "Element", skip_from_py_object)]
#[derive(Clone)]
struct PyElement {
    inner: Element,
}

#[pymethods]
impl PyElement {
    /// Apply to a word over the alphabet, e.g. `"0110"`.
    fn act(&self, word: &str) -> PyResult<String> {
        let w = parse_tree_word(self.inner.m(), word).map_err(err)?;
        let out = self.inner.act(&w).map_err(err)?;
        Ok(ascension_core::element::format_tree_word(self.inner.m(), &out))
    }

    fn mul(&self, other: &PyElement) -> PyResult<PyElement> {
        Ok(PyElement {
            inner: self.inner.multiply(&other.inner).map_err(err)?,
        })
    }

    fn inv(&self) -> PyElement {
        PyElement {
            inner: self.inner.inverse(),
        }
    }

    fn section(&self, vertex: &str) -> PyResult<PyElement> {
        let v = parse_tree_word(self.inner.m(), vertex).map_err(err)?;
        Ok(PyElement {
            inner: self.inner.section(&v).map_err(err)?,
        })
    }

    /// Exact word-problem decision by bisimulation.
    fn is_trivial(&self) -> PyResult<bool> {
        self.inner.is_trivial().map_err(err)
    }

    fn equals(&self, other: &PyElement) -> PyResult<bool> {
        self.inner.equals(&other.inner).map_err(err)
    }

    /// Hex form of the exact canonical key (minimized section automaton).
    fn key_hex(&self) -> PyResult<String> {
        Ok(self.inner.key(KeyMode::Exact).map_err(err)?.to_hex())
    }

    fn word(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Element({})", self.inner.to_text())
    }
}

/// Iterate the pattern ascension operator on a measure given in the text
/// format (`WEIGHT LETTERS` lines); returns one dict per step.
#[pyfunction]
#[pyo3(signature = (measure, m, iterations, tol=1e-12, length_cap=64))]
fn ascend_iterate(
    py: Python<'_>,
    measure: &str,
    m: usize,
    iterations: usize,
    tol: f64,
    length_cap: usize,
) -> PyResult<Vec<Py<pyo3::types::PyDict>>> {
    let mu = parse_pattern_measure(measure).map_err(err)?;
    let opts = IterateOptions {
        tol,
        length_cap,
        defect_budget: 0.05,
        ..Default::default()
    };
    let (_, diag) = iterate_t(&mu, m, iterations, &opts).map_err(err)?;
    diag.steps
        .iter()
        .map(|s| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("k", s.k)?;
            d.set_item("eps", s.eps)?;
            d.set_item("moment1", s.moment1)?;
            d.set_item("moment2", s.moment2)?;
            d.set_item("defect", s.defect)?;
            d.set_item("support", s.support)?;
            Ok(d.unbind())
        })
        .collect()
}

/// One exact ascension step; returns `(weight, letters)` pairs.
#[pyfunction]
#[pyo3(signature = (measure, m, tol=1e-12, length_cap=64))]
fn ascend_once(
    measure: &str,
    m: usize,
    tol: f64,
    length_cap: usize,
) -> PyResult<Vec<(f64, String)>> {
    let mu: PatternMeasure<f64> = parse_pattern_measure(measure).map_err(err)?;
    let t = t_pattern_exact(&mu, m, tol, length_cap).map_err(err)?;
    Ok(t.iter().map(|(p, w)| (*w, p.to_string())).collect())
}

/// Walk-entropy series for the evaluation of a pattern measure on the
/// (m,r) mother group; returns rows `(n, h_hat, h_mm, se, h_over_n, keys)`.
#[pyfunction]
#[pyo3(signature = (measure, m, r, horizons, n_walks, seed=0))]
fn walk_entropy(
    measure: &str,
    m: usize,
    r: i32,
    horizons: Vec<usize>,
    n_walks: usize,
    seed: u64,
) -> PyResult<Vec<(usize, f64, f64, f64, f64, usize)>> {
    let mu = parse_pattern_measure(measure).map_err(err)?;
    let mother = MotherGroup::new(m, r).map_err(err)?;
    let steps: GroupMeasure<f64> =
        evaluate_measure(&mu, &mother, KeyMode::Exact, 20_000).map_err(err)?;
    let series =
        walk_entropy_series(&steps, &horizons, n_walks, KeyDepth::Auto, seed).map_err(err)?;
    Ok(series
        .entries
        .iter()
        .map(|e| (e.n, e.h_hat, e.h_mm, e.se, e.h_over_n, e.distinct_keys))
        .collect())
}

/// Run a named verification suite; returns `(name, passed, details)` rows.
#[pyfunction]
fn verify(suite: &str) -> PyResult<Vec<(String, bool, String)>> {
    let outcomes = ascension_core::checks::run_suite(suite).map_err(err)?;
    Ok(outcomes
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.details))
        .collect())
}

#[pymodule]
fn ascension_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyElement>()?;
    m.add_function(wrap_pyfunction!(ascend_iterate, m)?)?;
    m.add_function(wrap_pyfunction!(ascend_once, m)?)?;
    m.add_function(wrap_pyfunction!(walk_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
