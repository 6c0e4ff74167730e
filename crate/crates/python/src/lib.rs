//! Python bindings: envelopes, both prototype solvers, the optimality
//! certifiers and k-medoid clustering.

use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use chebclust::optimality::{check_alternation, check_subdifferential, deviation_profile};
use chebclust::{
    build_envelope, build_lp, k_medoid, lower_bound, solve_simplex, BasisSpec, ChebyshevBasis, ClusterConfig, Grid,
    ReferenceBasis, Side, SignalGroup, SignalId, SolverChoice, Termination, WarmStart,
};

pyo3::create_exception!(chebclust_py, ChebclustError, PyException);

fn err(e: chebclust::Error) -> PyErr {
    ChebclustError::new_err(e.to_string())
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Upper => "upper",
        Side::Lower => "lower",
    }
}

fn parse_side(s: &str) -> PyResult<Side> {
    match s {
        "upper" | "+" => Ok(Side::Upper),
        "lower" | "-" => Ok(Side::Lower),
        other => Err(ChebclustError::new_err(format!("unknown side `{other}`"))),
    }
}

fn group(t: Vec<f64>, rows: Vec<Vec<f64>>, ids: Option<Vec<String>>) -> PyResult<SignalGroup> {
    let grid = Grid::new(t).map_err(err)?;
    match ids {
        Some(ids) => SignalGroup::new(grid, ids.into_iter().map(SignalId::new).collect(), rows).map_err(err),
        None => SignalGroup::from_rows(grid, rows).map_err(err),
    }
}

/// Upper and lower curve on a grid.
#[pyclass(frozen)]
pub struct Envelope {
    inner: chebclust::Envelope,
}

#[pymethods]
impl Envelope {
    #[new]
    fn new(t: Vec<f64>, upper: Vec<f64>, lower: Vec<f64>) -> PyResult<Self> {
        let grid = Grid::new(t).map_err(err)?;
        let inner = chebclust::Envelope::from_curves(grid, upper, lower).map_err(err)?;
        Ok(Envelope { inner })
    }

    /// Pointwise max and min of `rows` sampled at `t`.
    #[staticmethod]
    #[pyo3(signature = (t, rows, ids=None))]
    fn from_signals(t: Vec<f64>, rows: Vec<Vec<f64>>, ids: Option<Vec<String>>) -> PyResult<Self> {
        let inner = build_envelope(&group(t, rows, ids)?).map_err(err)?;
        Ok(Envelope { inner })
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.grid().points().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.upper().to_vec()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.lower().to_vec()
    }

    /// `(delta_star, witness_indices)`.
    #[pyo3(signature = (tol=1e-9))]
    fn lower_bound(&self, tol: f64) -> (f64, Vec<usize>) {
        let lb = lower_bound(&self.inner, tol);
        (lb.delta_star, lb.witnesses)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Chebyshev system of basis functions.
#[pyclass(frozen)]
pub struct Basis {
    inner: ChebyshevBasis,
}

#[pymethods]
impl Basis {
    #[staticmethod]
    fn monomial(degree: usize) -> Self {
        Basis { inner: ChebyshevBasis::monomial(degree) }
    }

    #[staticmethod]
    fn chebyshev(degree: usize, a: f64, b: f64) -> PyResult<Self> {
        Ok(Basis { inner: ChebyshevBasis::chebyshev(degree, a, b).map_err(err)? })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn evaluate(&self, coeffs: Vec<f64>, t: Vec<f64>) -> PyResult<Vec<f64>> {
        t.iter().map(|&x| self.inner.evaluate(&coeffs, x).map_err(err)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Basis({}, degree={})", self.inner.kind().name(), self.inner.degree())
    }
}

/// Result of an exchange solve.
#[pyclass(frozen, get_all)]
pub struct SolveReport {
    coeffs: Vec<f64>,
    delta: f64,
    delta_star: f64,
    termination: String,
    iterations: usize,
    exchanges: usize,
    history: Vec<f64>,
    /// Final reference basis nodes (grid indices) and their sides.
    nodes: Vec<usize>,
    sides: Vec<String>,
    double_point: Option<usize>,
    warm_start: String,
}

#[pymethods]
impl SolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(delta={}, termination='{}', iterations={})",
            self.delta, self.termination, self.iterations
        )
    }
}

/// Minimax prototype by the exchange method. `warm_nodes`/`warm_sides` give
/// a previous reference basis to start from.
#[pyfunction]
#[pyo3(signature = (envelope, basis, warm_nodes=None, warm_sides=None, tol=1e-9, max_iter=1000))]
fn solve_exchange(
    envelope: &Envelope,
    basis: &Basis,
    warm_nodes: Option<Vec<usize>>,
    warm_sides: Option<Vec<String>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<SolveReport> {
    let warm = match (warm_nodes, warm_sides) {
        (Some(nodes), Some(sides)) => {
            let sides = sides.iter().map(|s| parse_side(s)).collect::<PyResult<Vec<Side>>>()?;
            Some(ReferenceBasis::new(nodes, sides).map_err(err)?)
        }
        (None, None) => None,
        _ => return Err(ChebclustError::new_err("warm_nodes and warm_sides go together")),
    };
    let opts = chebclust::ExchangeOptions { tol, max_iter };
    let rep = chebclust::solve_exchange(&envelope.inner, &basis.inner, warm.as_ref(), &opts).map_err(err)?;
    let (nodes, sides) = match &rep.basis {
        Some(b) => (b.nodes().to_vec(), b.sides().iter().map(|&s| side_name(s).to_owned()).collect()),
        None => (Vec::new(), Vec::new()),
    };
    Ok(SolveReport {
        termination: rep.termination.name().to_owned(),
        warm_start: match rep.warm {
            WarmStart::Cold => "cold".to_owned(),
            WarmStart::Used => "used".to_owned(),
            WarmStart::Rejected(why) => format!("rejected: {why}"),
        },
        coeffs: rep.coeffs,
        delta: rep.delta,
        delta_star: rep.delta_star,
        iterations: rep.iterations,
        exchanges: rep.exchanges,
        history: rep.history,
        nodes,
        sides,
        double_point: rep.double_point,
    })
}

/// Minimax prototype by the simplex method: `(coeffs, objective, status)`.
#[pyfunction]
#[pyo3(signature = (envelope, basis, limit=50_000))]
fn solve_lp(envelope: &Envelope, basis: &Basis, limit: usize) -> PyResult<(Vec<f64>, f64, String)> {
    let lp = build_lp(&envelope.inner, &basis.inner).map_err(err)?;
    let sol = solve_simplex(&lp, limit);
    let coeffs = sol.x.get(..basis.inner.dimension()).map(<[f64]>::to_vec).unwrap_or_default();
    Ok((coeffs, sol.objective, format!("{:?}", sol.status).to_lowercase()))
}

/// Verdict of both optimality certifiers.
#[pyclass(frozen, get_all)]
pub struct Verdict {
    optimal: bool,
    delta: f64,
    alternation: String,
    subdifferential: bool,
    improving_direction: Option<Vec<f64>>,
}

#[pymethods]
impl Verdict {
    fn __repr__(&self) -> String {
        format!(
            "Verdict(optimal={}, delta={}, alternation='{}')",
            if self.optimal { "True" } else { "False" },
            self.delta,
            self.alternation
        )
    }
}

#[pyfunction]
fn check(envelope: &Envelope, basis: &Basis, coeffs: Vec<f64>) -> PyResult<Verdict> {
    let profile = deviation_profile(&envelope.inner, &basis.inner, &coeffs).map_err(err)?;
    let alt = check_alternation(&profile, basis.inner.degree());
    let sub = check_subdifferential(&profile, &basis.inner, envelope.inner.grid()).map_err(err)?;
    Ok(Verdict {
        optimal: alt.optimal && sub.optimal,
        delta: profile.delta,
        alternation: alt.reason.name().to_owned(),
        subdifferential: sub.optimal,
        improving_direction: sub.improving_direction,
    })
}

/// Outcome of a clustering run.
#[pyclass(frozen, get_all)]
pub struct Clustering {
    assignment: Vec<usize>,
    /// Prototype coefficients per cluster.
    prototypes: Vec<Vec<f64>>,
    deltas: Vec<f64>,
    terminations: Vec<String>,
    converged: bool,
    iterations: usize,
}

#[pymethods]
impl Clustering {
    fn __repr__(&self) -> String {
        format!(
            "Clustering(k={}, converged={}, iterations={})",
            self.prototypes.len(),
            if self.converged { "True" } else { "False" },
            self.iterations
        )
    }
}

#[pyfunction]
#[pyo3(signature = (
    t, rows, k, ids=None, degree=1, basis="monomial", solver="exchange",
    seed=0, max_iter=100, tol=1e-9, skip_rules=true
))]
#[allow(clippy::too_many_arguments)]
fn cluster(
    t: Vec<f64>,
    rows: Vec<Vec<f64>>,
    k: usize,
    ids: Option<Vec<String>>,
    degree: usize,
    basis: &str,
    solver: &str,
    seed: u64,
    max_iter: usize,
    tol: f64,
    skip_rules: bool,
) -> PyResult<Clustering> {
    let spec = match basis {
        "monomial" => BasisSpec::Monomial { degree },
        "chebyshev" => BasisSpec::Chebyshev { degree },
        other => return Err(ChebclustError::new_err(format!("unknown basis `{other}`"))),
    };
    let mut config = ClusterConfig::new(k, spec);
    config.solver = match solver {
        "exchange" => SolverChoice::Exchange,
        "lp" => SolverChoice::Lp,
        "cross-check" => SolverChoice::CrossCheck,
        other => return Err(ChebclustError::new_err(format!("unknown solver `{other}`"))),
    };
    config.seed = seed;
    config.max_iter = max_iter;
    config.tol = tol;
    config.skip_rules = skip_rules;
    let (state, converged) = k_medoid(&group(t, rows, ids)?, &config).map_err(err)?;
    let protos: Vec<_> = state.clusters().iter().map(|c| c.prototype()).collect();
    Ok(Clustering {
        assignment: state.assignment().to_vec(),
        prototypes: protos.iter().map(|p| p.map(|p| p.coeffs.clone()).unwrap_or_default()).collect(),
        deltas: protos.iter().map(|p| p.map_or(f64::NAN, |p| p.delta)).collect(),
        terminations: protos
            .iter()
            .map(|p| p.map_or(Termination::IterationLimit, |p| p.termination).name().to_owned())
            .collect(),
        converged,
        iterations: state.iterations(),
    })
}

#[pymodule]
pub fn chebclust_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Envelope>()?;
    m.add_class::<Basis>()?;
    m.add_class::<SolveReport>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Clustering>()?;
    m.add_function(wrap_pyfunction!(solve_exchange, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add("ChebclustError", m.py().get_type::<ChebclustError>())?;
    Ok(())
}
