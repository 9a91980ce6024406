//! Python bindings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::Value;

use relgraph::bass_serre::build_tree_ball;
use relgraph::cli;
use relgraph::complexes::{bounded_trivial, omega_k, pi1_presentation, Triviality};
use relgraph::graph::Graph;
use relgraph::graph_of_groups::{self, fixtures, GraphOfGroupsDescriptor, GroupWord};
use relgraph::small_cancellation::{self as sc, Dehn, Rational, Syllable};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Python object to JSON through the `json` module.
fn to_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

#[pyclass(name = "GraphOfGroups", frozen)]
struct PyGraphOfGroups {
    inner: graph_of_groups::GraphOfGroups,
}

impl PyGraphOfGroups {
    fn word(&self, tokens: &Bound<'_, PyAny>) -> PyResult<GroupWord> {
        let Value::Array(tokens) = to_value(tokens)? else {
            return Err(PyValueError::new_err("a word is a list of tokens"));
        };
        self.inner.parse_word(&tokens).map_err(err)
    }
}

#[pymethods]
impl PyGraphOfGroups {
    /// One of `sl2z`, `c4-free-c6`, `infinite-dihedral`, `hnn-c6`, `s3-amalgam`, `free-rank2`.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        fixtures::by_name(name).map(|inner| PyGraphOfGroups { inner }).ok_or_else(|| PyValueError::new_err(format!("unknown fixture `{name}`")))
    }

    #[staticmethod]
    fn from_descriptor(descriptor: &Bound<'_, PyAny>) -> PyResult<Self> {
        let d: GraphOfGroupsDescriptor = serde_json::from_value(to_value(descriptor)?).map_err(err)?;
        Ok(PyGraphOfGroups { inner: d.build().map_err(err)? })
    }

    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    /// Normal form of a word, as tokens.
    fn reduce(&self, py: Python<'_>, word: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let nf = self.inner.try_reduce(&self.word(word)?).map_err(err)?;
        let text = serde_json::to_string(&self.inner.word_to_tokens(&nf.word)).map_err(err)?;
        Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
    }

    fn format(&self, word: &Bound<'_, PyAny>) -> PyResult<String> {
        Ok(self.inner.format_word(&self.word(word)?))
    }

    fn words_equal(&self, u: &Bound<'_, PyAny>, v: &Bound<'_, PyAny>) -> PyResult<bool> {
        self.inner.words_equal(&self.word(u)?, &self.word(v)?).map_err(err)
    }

    /// Vertex counts per level of the Bass–Serre tree ball.
    #[pyo3(signature = (radius, basepoint = 0))]
    fn tree_levels(&self, radius: usize, basepoint: usize) -> PyResult<Vec<usize>> {
        Ok(build_tree_ball(&self.inner, basepoint, radius, 1_000_000).map_err(err)?.level_counts())
    }

    #[pyo3(signature = (radius, basepoint = 0))]
    fn tree_dot(&self, radius: usize, basepoint: usize) -> PyResult<String> {
        Ok(build_tree_ball(&self.inner, basepoint, radius, 1_000_000).map_err(err)?.to_dot())
    }

    fn __repr__(&self) -> String {
        format!("GraphOfGroups(vertices={}, edges={})", self.inner.vertex_count(), self.inner.graph().edge_count())
    }
}

/// An amalgam `A *_C B`; elements are lists of `(side, element)` syllables.
#[pyclass(name = "Amalgam", frozen)]
struct PyAmalgam {
    inner: sc::Amalgam,
}

fn ratio(lambda: (i64, i64)) -> PyResult<Rational> {
    if lambda.1 == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    Ok(Rational::new(lambda.0, lambda.1))
}

#[pymethods]
impl PyAmalgam {
    #[new]
    fn new(gog: &PyGraphOfGroups) -> PyResult<Self> {
        Ok(PyAmalgam { inner: sc::Amalgam::new(&gog.inner).map_err(err)? })
    }

    fn canonical(&self, w: Vec<Syllable>) -> Vec<Syllable> {
        self.inner.canonical(&w)
    }

    fn symmetrize(&self, r: Vec<Syllable>) -> PyResult<Vec<Vec<Syllable>>> {
        Ok(sc::symmetrize(&self.inner, &r).map_err(err)?.members)
    }

    fn max_piece(&self, r: Vec<Syllable>) -> PyResult<usize> {
        Ok(sc::pieces(&self.inner, &sc::symmetrize(&self.inner, &r).map_err(err)?).max_piece)
    }

    /// `(holds, max_piece, relator_length)` for `C'(λ)` on `r^m`.
    fn check_cprime(&self, r: Vec<Syllable>, m: usize, lambda: (i64, i64)) -> PyResult<(bool, usize, usize)> {
        let v = sc::check_cprime(&self.inner, &r, m, ratio(lambda)?).map_err(err)?;
        Ok((v.holds, v.max_piece, v.relator_length))
    }

    /// `(k, M)` for the relator `r`.
    fn compute_m(&self, r: Vec<Syllable>) -> PyResult<(usize, usize)> {
        let t = sc::compute_m(&self.inner, &r).map_err(err)?;
        Ok((t.k, t.m_const))
    }

    /// Dehn's algorithm for `r^m` applied to `w`: `(reduced, area)`.
    fn dehn_reduce(&self, r: Vec<Syllable>, m: usize, w: Vec<Syllable>) -> PyResult<(Vec<Syllable>, usize)> {
        let set = sc::symmetrize(&self.inner, &self.inner.pow(&r, m)).map_err(err)?;
        let res = Dehn::new(&self.inner, set).map_err(err)?.reduce(&w);
        Ok((res.reduced, res.area))
    }
}

/// Verdict on `π1(Ω_k(Γ))` for a finite graph: `"YES"`, `"NO"` or `"UNKNOWN"`.
#[pyfunction]
#[pyo3(signature = (vertices, edges, k, effort = 10_000))]
fn omega_simply_connected(vertices: usize, edges: Vec<(usize, usize)>, k: usize, effort: usize) -> PyResult<&'static str> {
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= vertices || b >= vertices) {
        return Err(PyValueError::new_err(format!("edge ({a}, {b}) out of range")));
    }
    let g = Graph::from_edges(vertices, &edges);
    let x = omega_k(&g, &vec![true; vertices], k, relgraph::complexes::DEFAULT_LOOP_CAP).map_err(err)?;
    let (p, _) = pi1_presentation(&x).map_err(err)?;
    Ok(match bounded_trivial(&p, effort) {
        Triviality::Yes { .. } => "YES",
        Triviality::No { .. } => "NO",
        Triviality::Unknown { .. } => "UNKNOWN",
    })
}

/// Runs a job spec given as JSON text; returns `(exit_code, report_json)`.
#[pyfunction]
fn run_job(spec: &str) -> (i32, String) {
    let out = cli::run_str(spec);
    (out.code, out.report.to_string())
}

#[pyfunction]
fn version() -> &'static str {
    cli::VERSION
}

#[pymodule]
fn relgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraphOfGroups>()?;
    m.add_class::<PyAmalgam>()?;
    m.add_function(wrap_pyfunction!(omega_simply_connected, m)?)?;
    m.add_function(wrap_pyfunction!(run_job, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
