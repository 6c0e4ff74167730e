//! Exchange (de la Vallée-Poussin) procedure for two-curve approximation.
//!
//! A reference basis is a set of `n + 2` grid nodes with alternating side
//! labels. On a basis the *Chebyshev interpolation* solves
//!
//! ```text
//! S(A, t_k) + σ_k d = target_k,   target_k = S_max(t_k) if σ_k = +1, S_min(t_k) if σ_k = −1
//! ```
//!
//! for the coefficients `A` and the levelled deviation `d`. A grid point whose
//! deviation exceeds `d` then replaces one node so that the labels still
//! alternate, which never lowers `d`. The loop stops when no point deviates by
//! more than `d` (an alternation certificate), or when the lower bound
//! `Δ* = ½ max (S_max − S_min)` is attained (a double point).
//!
//! Starting bases are built from the maximal-difference points so that `d`
//! exceeds `Δ*` from the first iteration on; this keeps a node from ever
//! carrying both labels.

use crate::basis::{ChebyshevBasis, DesignMatrix};
use crate::envelope::{lower_bound_of, Envelope, LowerBound, Side, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{null_space, Lu};

/// Scaled pivot threshold for the interpolation systems.
pub const SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeOptions {
    /// Absolute tolerance on deviation comparisons.
    pub tol: f64,
    /// Maximum number of interpolation solves.
    pub max_iter: usize,
}

impl Default for ExchangeOptions {
    fn default() -> Self {
        ExchangeOptions { tol: DEFAULT_TOLERANCE, max_iter: 1000 }
    }
}

/// `n + 2` sorted grid indices with strictly alternating sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceBasis {
    nodes: Vec<usize>,
    sides: Vec<Side>,
}

impl ReferenceBasis {
    pub fn new(nodes: Vec<usize>, sides: Vec<Side>) -> Result<Self> {
        if nodes.len() != sides.len() {
            return Err(Error::Dimension("basis nodes and sides differ in length".into()));
        }
        if nodes.len() < 2 {
            return Err(Error::Dimension("a reference basis needs at least 2 nodes".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("basis nodes must be strictly increasing".into()));
        }
        if sides.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("basis sides must alternate".into()));
        }
        Ok(ReferenceBasis { nodes, sides })
    }

    /// Sides alternate starting with `first`.
    pub fn alternating(nodes: Vec<usize>, first: Side) -> Result<Self> {
        let sides = (0..nodes.len())
            .map(|k| if k % 2 == 0 { first } else { first.opposite() })
            .collect();
        Self::new(nodes, sides)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether the basis fits a grid of `points` points and a basis of
    /// `dimension` functions.
    pub fn fits(&self, points: usize, dimension: usize) -> bool {
        self.nodes.len() == dimension + 1 && self.nodes.iter().all(|&i| i < points)
    }

    fn side_of(&self, index: usize) -> Option<Side> {
        self.nodes.binary_search(&index).ok().map(|k| self.sides[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationResult {
    pub coeffs: Vec<f64>,
    /// Levelled deviation `d`; negative when the labels point the wrong way.
    pub deviation: f64,
    /// `S(A, t_k) + σ_k d − target_k` per node.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxDeviation {
    pub index: usize,
    pub side: Side,
    pub value: f64,
    /// Both sides attain `value` at `index` within the tolerance.
    pub double_point: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    OptimalAlternation,
    OptimalDoublePoint,
    IterationLimit,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::OptimalAlternation => "optimal-alternation",
            Termination::OptimalDoublePoint => "optimal-double-point",
            Termination::IterationLimit => "iteration-limit",
        }
    }

    pub fn is_optimal(self) -> bool {
        self != Termination::IterationLimit
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarmStart {
    Cold,
    Used,
    /// The supplied basis was not usable; the solve started cold.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub coeffs: Vec<f64>,
    /// Maximal deviation of the returned prototype.
    pub delta: f64,
    /// Final reference basis (the certificate on alternation termination).
    pub basis: Option<ReferenceBasis>,
    /// Point where both sides attain `delta`, on double-point termination.
    pub double_point: Option<usize>,
    pub delta_star: f64,
    /// Linear solves performed (starting fits and interpolations).
    pub iterations: usize,
    pub exchanges: usize,
    pub termination: Termination,
    /// Levelled deviation `d` of each interpolation in the exchange loop.
    pub history: Vec<f64>,
    pub warm: WarmStart,
}

/// Outcome of the starting-basis construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    Basis(ReferenceBasis),
    /// `Δ*` is attained; no exchange is needed.
    Optimal { coeffs: Vec<f64>, delta: f64, double_point: usize },
}

struct Problem<'a> {
    design: &'a DesignMatrix,
    upper: &'a [f64],
    lower: &'a [f64],
}

impl Problem<'_> {
    fn points(&self) -> usize {
        self.upper.len()
    }

    fn dim(&self) -> usize {
        self.design.cols()
    }

    fn target(&self, i: usize, side: Side) -> f64 {
        match side {
            Side::Upper => self.upper[i],
            Side::Lower => self.lower[i],
        }
    }

    fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.upper[i] + self.lower[i])
    }
}

fn residual(p: &Problem<'_>, values: &[f64], i: usize, side: Side) -> f64 {
    match side {
        Side::Upper => p.upper[i] - values[i],
        Side::Lower => values[i] - p.lower[i],
    }
}

fn check_problem(design: &DesignMatrix, upper: &[f64], lower: &[f64]) -> Result<()> {
    if upper.len() != design.rows() || lower.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "design matrix has {} rows, curves have {} and {} values",
            design.rows(),
            upper.len(),
            lower.len()
        )));
    }
    Ok(())
}

fn interpolate(p: &Problem<'_>, basis: &ReferenceBasis) -> Result<InterpolationResult> {
    let m = p.dim();
    let k = m + 1;
    if basis.len() != k {
        return Err(Error::Dimension(format!(
            "a degree-{} basis needs {} reference nodes, got {}",
            m - 1,
            k,
            basis.len()
        )));
    }
    if let Some(&bad) = basis.nodes.iter().find(|&&i| i >= p.points()) {
        return Err(Error::Dimension(format!("reference node {bad} is outside the grid")));
    }
    let mut mat = Vec::with_capacity(k * k);
    let mut rhs = Vec::with_capacity(k);
    for (&i, &side) in basis.nodes.iter().zip(&basis.sides) {
        mat.extend_from_slice(p.design.row(i));
        mat.push(side.sign());
        rhs.push(p.target(i, side));
    }
    let lu = Lu::factor(mat.clone(), k, SINGULARITY_TOL).ok_or_else(|| {
        Error::DegenerateBasis(format!("interpolation system on nodes {:?} is singular", basis.nodes))
    })?;
    let mut x = lu.solve(&rhs);
    // one step of iterative refinement
    let r: Vec<f64> = (0..k)
        .map(|i| rhs[i] - crate::basis::dot(&mat[i * k..(i + 1) * k], &x))
        .collect();
    for (xi, ci) in x.iter_mut().zip(lu.solve(&r)) {
        *xi += ci;
    }
    let deviation = x.pop().expect("k >= 1");
    let residuals = basis
        .nodes
        .iter()
        .zip(&basis.sides)
        .map(|(&i, &side)| crate::basis::dot(p.design.row(i), &x) + side.sign() * deviation - p.target(i, side))
        .collect();
    Ok(InterpolationResult { coeffs: x, deviation, residuals })
}

fn max_deviation_of(p: &Problem<'_>, values: &[f64], tol: f64) -> MaxDeviation {
    let mut best = MaxDeviation { index: 0, side: Side::Upper, value: f64::NEG_INFINITY, double_point: false };
    for i in 0..p.points() {
        let up = residual(p, values, i, Side::Upper);
        let lo = residual(p, values, i, Side::Lower);
        let v = up.max(lo);
        if v > best.value {
            best = MaxDeviation {
                index: i,
                side: if up >= lo { Side::Upper } else { Side::Lower },
                value: v,
                double_point: (up - lo).abs() <= tol,
            };
        }
    }
    best
}

/// Largest deviation among points that are not basis nodes, if it exceeds
/// `d + tol`. Ties go to the lowest index, upper side first.
fn entering_point(
    p: &Problem<'_>,
    values: &[f64],
    basis: &ReferenceBasis,
    d: f64,
    tol: f64,
) -> Option<(usize, Side, f64)> {
    let mut best: Option<(usize, Side, f64)> = None;
    for i in 0..p.points() {
        if basis.side_of(i).is_some() {
            continue;
        }
        for side in [Side::Upper, Side::Lower] {
            let r = residual(p, values, i, side);
            if r > d + tol && best.is_none_or(|b| r > b.2) {
                best = Some((i, side, r));
            }
        }
    }
    best
}

/// Solves for the coefficients of the prototype through `values` at `nodes`.
fn fit_through(p: &Problem<'_>, nodes: &[usize], values: &[f64]) -> Result<Vec<f64>> {
    let m = p.dim();
    let mut mat = Vec::with_capacity(m * m);
    for &i in nodes {
        mat.extend_from_slice(p.design.row(i));
    }
    let lu = Lu::factor(mat, m, SINGULARITY_TOL)
        .ok_or_else(|| Error::DegenerateBasis(format!("basis is singular on nodes {nodes:?}")))?;
    Ok(lu.solve(values))
}

/// Single-point exchange. The entering point replaces the neighbouring node
/// carrying the same side; when its only neighbour carries the opposite side
/// the node at the far end of the basis is dropped instead.
pub fn exchange_step(basis: &ReferenceBasis, entering: usize, side: Side) -> Result<ReferenceBasis> {
    if let Some(existing) = basis.side_of(entering) {
        return Err(Error::Exchange(if existing == side {
            format!("point {entering} is already a node on the same side")
        } else {
            format!("point {entering} would become a double node")
        }));
    }
    let mut nodes = basis.nodes.clone();
    let mut sides = basis.sides.clone();
    let last = nodes.len() - 1;
    let pos = nodes.partition_point(|&i| i < entering);
    if pos == 0 {
        if sides[0] == side {
            nodes[0] = entering;
        } else {
            nodes.pop();
            sides.pop();
            nodes.insert(0, entering);
            sides.insert(0, side);
        }
    } else if pos == nodes.len() {
        if sides[last] == side {
            nodes[last] = entering;
        } else {
            nodes.remove(0);
            sides.remove(0);
            nodes.push(entering);
            sides.push(side);
        }
    } else {
        let k = if sides[pos - 1] == side { pos - 1 } else { pos };
        nodes[k] = entering;
    }
    ReferenceBasis::new(nodes, sides)
}

pub fn chebyshev_interpolation(
    env: &Envelope,
    basis: &ChebyshevBasis,
    reference: &ReferenceBasis,
) -> Result<InterpolationResult> {
    let design = basis.design_matrix(env.grid())?;
    let p = Problem { design: &design, upper: env.upper(), lower: env.lower() };
    interpolate(&p, reference)
}

pub fn find_max_deviation(env: &Envelope, basis: &ChebyshevBasis, coeffs: &[f64], tol: f64) -> Result<MaxDeviation> {
    let values = basis.evaluate_on_grid(coeffs, env.grid())?;
    let design = basis.design_matrix(env.grid())?;
    let p = Problem { design: &design, upper: env.upper(), lower: env.lower() };
    Ok(max_deviation_of(&p, &values, tol))
}

pub fn initialize_basis(env: &Envelope, basis: &ChebyshevBasis, tol: f64) -> Result<Initialization> {
    let design = basis.design_matrix(env.grid())?;
    let p = Problem { design: &design, upper: env.upper(), lower: env.lower() };
    let opts = ExchangeOptions { tol, ..ExchangeOptions::default() };
    let goal = lower_bound_of(p.upper, p.lower, tol).delta_star;
    match initialize(&p, &opts, goal)? {
        Start::Basis(b, _) => Ok(Initialization::Basis(b)),
        Start::Optimal { coeffs, delta, double_point, .. } => Ok(Initialization::Optimal { coeffs, delta, double_point }),
        Start::Exhausted { .. } => Err(Error::InsufficientData(
            "iteration limit reached while constructing the starting basis".into(),
        )),
    }
}

pub fn solve_exchange(
    env: &Envelope,
    basis: &ChebyshevBasis,
    warm: Option<&ReferenceBasis>,
    opts: &ExchangeOptions,
) -> Result<SolveReport> {
    let design = basis.design_matrix(env.grid())?;
    solve_samples(&design, env.upper(), env.lower(), warm, opts)
}

/// [`solve_exchange`] on raw samples; `design.row(i)` holds `g(t_i)`.
pub fn solve_samples(
    design: &DesignMatrix,
    upper: &[f64],
    lower: &[f64],
    warm: Option<&ReferenceBasis>,
    opts: &ExchangeOptions,
) -> Result<SolveReport> {
    check_problem(design, upper, lower)?;
    let p = Problem { design, upper, lower };
    solve_problem(&p, warm, opts, None)
}

enum Start {
    Basis(ReferenceBasis, usize),
    Optimal { coeffs: Vec<f64>, delta: f64, double_point: usize, iterations: usize },
    Exhausted { coeffs: Vec<f64>, delta: f64, iterations: usize },
}

/// `goal`, when given, is a level at which the search may stop early: any
/// prototype reaching it is accepted.
fn solve_problem(
    p: &Problem<'_>,
    warm: Option<&ReferenceBasis>,
    opts: &ExchangeOptions,
    goal: Option<f64>,
) -> Result<SolveReport> {
    let m = p.dim();
    if p.points() < m + 1 {
        return Err(Error::InsufficientData(format!(
            "{} grid points cannot support a degree-{} prototype (need {})",
            p.points(),
            m - 1,
            m + 1
        )));
    }
    let lb = lower_bound_of(p.upper, p.lower, opts.tol);
    let goal = goal.map_or(lb.delta_star, |g| g.max(lb.delta_star));

    let mut warm_state = WarmStart::Cold;
    if let Some(w) = warm {
        match try_warm(p, w, &lb, opts) {
            Ok(first) => {
                let report = exchange_loop(p, &lb, goal, w.clone(), Some(first), 1, opts)?;
                return Ok(SolveReport { warm: WarmStart::Used, ..report });
            }
            Err(reason) => warm_state = WarmStart::Rejected(reason),
        }
    }

    let report = match initialize(p, opts, goal)? {
        Start::Basis(b, used) => exchange_loop(p, &lb, goal, b, None, used, opts)?,
        Start::Optimal { coeffs, delta, double_point, iterations } => SolveReport {
            coeffs,
            delta,
            basis: None,
            double_point: Some(double_point),
            delta_star: lb.delta_star,
            iterations,
            exchanges: 0,
            termination: Termination::OptimalDoublePoint,
            history: Vec::new(),
            warm: WarmStart::Cold,
        },
        Start::Exhausted { coeffs, delta, iterations } => SolveReport {
            coeffs,
            delta,
            basis: None,
            double_point: None,
            delta_star: lb.delta_star,
            iterations,
            exchanges: 0,
            termination: Termination::IterationLimit,
            history: Vec::new(),
            warm: WarmStart::Cold,
        },
    };
    Ok(SolveReport { warm: warm_state, ..report })
}

fn try_warm(
    p: &Problem<'_>,
    w: &ReferenceBasis,
    lb: &LowerBound,
    opts: &ExchangeOptions,
) -> std::result::Result<InterpolationResult, String> {
    if !w.fits(p.points(), p.dim()) {
        return Err("basis does not fit the current grid and degree".into());
    }
    let interp = interpolate(p, w).map_err(|e| e.to_string())?;
    if interp.deviation <= lb.delta_star + opts.tol {
        return Err(format!(
            "basis deviation {} does not exceed the lower bound {}",
            interp.deviation, lb.delta_star
        ));
    }
    Ok(interp)
}

fn exchange_loop(
    p: &Problem<'_>,
    lb: &LowerBound,
    goal: f64,
    mut basis: ReferenceBasis,
    mut first: Option<InterpolationResult>,
    mut iterations: usize,
    opts: &ExchangeOptions,
) -> Result<SolveReport> {
    let tol = opts.tol;
    let mut history = Vec::new();
    let mut exchanges = 0;
    loop {
        let interp = match first.take() {
            Some(i) => i,
            None => {
                iterations += 1;
                interpolate(p, &basis)?
            }
        };
        let d = interp.deviation;
        history.push(d);
        let values = p.design.combine(&interp.coeffs);
        let worst = max_deviation_of(p, &values, tol);
        let report = |termination, double_point, basis: Option<ReferenceBasis>, history: Vec<f64>| SolveReport {
            coeffs: interp.coeffs.clone(),
            delta: worst.value,
            basis,
            double_point,
            delta_star: lb.delta_star,
            iterations,
            exchanges,
            termination,
            history,
            warm: WarmStart::Cold,
        };
        // a node's own side sits at d by construction; leave it to rounding
        if off_node_max(p, &values, &basis) <= d + tol {
            return Ok(report(Termination::OptimalAlternation, None, Some(basis), history));
        }
        if worst.value <= goal + tol {
            let at = double_point_of(p, worst.value, tol).unwrap_or(worst.index);
            return Ok(report(Termination::OptimalDoublePoint, Some(at), Some(basis), history));
        }
        let Some((index, side, _)) = entering_point(p, &values, &basis, d, tol) else {
            // only nodes carry the excess, on their opposite side
            return Ok(report(Termination::IterationLimit, None, Some(basis), history));
        };
        if iterations >= opts.max_iter {
            return Ok(report(Termination::IterationLimit, None, Some(basis), history));
        }
        basis = exchange_step(&basis, index, side)?;
        exchanges += 1;
    }
}

/// Largest deviation over all points and sides except each node's own side.
fn off_node_max(p: &Problem<'_>, values: &[f64], basis: &ReferenceBasis) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..p.points() {
        let own = basis.side_of(i);
        for side in [Side::Upper, Side::Lower] {
            if own != Some(side) {
                best = best.max(residual(p, values, i, side));
            }
        }
    }
    best
}

fn double_point_of(p: &Problem<'_>, delta: f64, tol: f64) -> Option<usize> {
    (0..p.points()).find(|&i| (0.5 * (p.upper[i] - p.lower[i]) - delta).abs() <= tol)
}

/// Starting basis from the maximal-difference points `W`.
///
/// With `|W| ≥ n + 1` the prototype through the midpoints of the first
/// `n + 1` witnesses is the only candidate for `Δ*`; if it fails, the worst
/// point joins those witnesses.
///
/// With `|W| ≤ n` the witnesses are padded to `n + 1` nodes and levelled at
/// `Δ*`. If that prototype fails, the problem restricted to prototypes
/// through the witness midpoints is solved on the remaining points; its
/// solution either attains `Δ*` or yields an alternating basis that, with the
/// witnesses inserted, has deviation above `Δ*`.
fn initialize(p: &Problem<'_>, opts: &ExchangeOptions, goal: f64) -> Result<Start> {
    let m = p.dim();
    let n_points = p.points();
    if n_points < m + 1 {
        return Err(Error::InsufficientData(format!(
            "{n_points} grid points cannot support a degree-{} prototype (need {})",
            m - 1,
            m + 1
        )));
    }
    let tol = opts.tol;
    let lb = lower_bound_of(p.upper, p.lower, tol);
    let witnesses = &lb.witnesses;

    if witnesses.len() >= m {
        let nodes = &witnesses[..m];
        let mids: Vec<f64> = nodes.iter().map(|&i| p.midpoint(i)).collect();
        let coeffs = fit_through(p, nodes, &mids)?;
        let values = p.design.combine(&coeffs);
        let worst = max_deviation_of(p, &values, tol);
        if worst.value <= goal + tol {
            return Ok(Start::Optimal { coeffs, delta: worst.value, double_point: nodes[0], iterations: 1 });
        }
        let mut all = nodes.to_vec();
        let pos = all.partition_point(|&i| i < worst.index);
        all.insert(pos, worst.index);
        let sides = (0..all.len())
            .map(|k| if (k as isize - pos as isize) % 2 == 0 { worst.side } else { worst.side.opposite() })
            .collect();
        return Ok(Start::Basis(ReferenceBasis::new(all, sides)?, 1));
    }

    // pad with points as far (in index) from every chosen node as possible;
    // pinned functions are nearly flat next to the witnesses
    let need = m - witnesses.len();
    let padding = spread_padding(n_points, witnesses, need);
    let mut nodes: Vec<usize> = witnesses.iter().chain(&padding).copied().collect();
    nodes.sort_unstable();
    let targets: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            if witnesses.binary_search(&i).is_ok() {
                p.midpoint(i)
            } else if k % 2 == 0 {
                p.upper[i] - lb.delta_star
            } else {
                p.lower[i] + lb.delta_star
            }
        })
        .collect();
    let start = fit_through(p, &nodes, &targets)?;
    let start_values = p.design.combine(&start);
    let worst = max_deviation_of(p, &start_values, tol);
    if worst.value <= goal + tol {
        return Ok(Start::Optimal { coeffs: start, delta: worst.value, double_point: witnesses[0], iterations: 1 });
    }
    pinned_start(p, &lb, goal, &start, &start_values, opts)
}

/// Farthest-point selection in index space, ties to the lowest index.
fn spread_padding(points: usize, witnesses: &[usize], need: usize) -> Vec<usize> {
    let mut dist: Vec<usize> = (0..points)
        .map(|i| witnesses.iter().map(|&w| i.abs_diff(w)).min().unwrap_or(usize::MAX))
        .collect();
    let mut chosen = Vec::with_capacity(need);
    for _ in 0..need {
        let (best, _) = dist
            .iter()
            .enumerate()
            .fold((0, 0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        chosen.push(best);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = (*d).min(i.abs_diff(best));
        }
    }
    chosen
}

/// Solves the problem restricted to prototypes `start + Σ b_j φ_j` where the
/// `φ_j` vanish at every witness, and lifts the result back.
fn pinned_start(
    p: &Problem<'_>,
    lb: &LowerBound,
    goal: f64,
    start: &[f64],
    start_values: &[f64],
    opts: &ExchangeOptions,
) -> Result<Start> {
    let m = p.dim();
    let witnesses = &lb.witnesses;
    let l = witnesses.len();
    let reduced_dim = m - l;

    // φ_j: orthonormal coefficient vectors whose prototypes vanish at every witness
    let witness_rows: Vec<&[f64]> = witnesses.iter().map(|&w| p.design.row(w)).collect();
    let phis = null_space(&witness_rows, m);
    debug_assert_eq!(phis.len(), reduced_dim);

    // remaining points; the parity of witnesses below a point fixes the sign
    // that turns the φ_j into a Chebyshev system there
    let rest: Vec<usize> = (0..p.points()).filter(|i| witnesses.binary_search(i).is_err()).collect();
    let flipped: Vec<bool> = rest.iter().map(|&i| witnesses.partition_point(|&w| w < i) % 2 == 1).collect();
    let mut rows = Vec::with_capacity(rest.len());
    let mut upper = Vec::with_capacity(rest.len());
    let mut lower = Vec::with_capacity(rest.len());
    for (&i, &flip) in rest.iter().zip(&flipped) {
        let s = if flip { -1.0 } else { 1.0 };
        rows.push(phis.iter().map(|phi| s * crate::basis::dot(p.design.row(i), phi)).collect::<Vec<f64>>());
        let up = p.upper[i] - start_values[i];
        let lo = p.lower[i] - start_values[i];
        if flip {
            upper.push(-lo);
            lower.push(-up);
        } else {
            upper.push(up);
            lower.push(lo);
        }
    }
    let design = DesignMatrix::from_rows(rows)?;
    let reduced = Problem { design: &design, upper: &upper, lower: &lower };
    let sub = solve_problem(&reduced, None, opts, Some(goal))?;

    let mut coeffs = start.to_vec();
    for (b, phi) in sub.coeffs.iter().zip(&phis) {
        for (c, v) in coeffs.iter_mut().zip(phi) {
            *c += b * v;
        }
    }
    let values = p.design.combine(&coeffs);
    let worst = max_deviation_of(p, &values, opts.tol);
    let iterations = 1 + sub.iterations;
    if worst.value <= goal + opts.tol {
        return Ok(Start::Optimal { coeffs, delta: worst.value, double_point: witnesses[0], iterations });
    }
    let (Termination::OptimalAlternation, Some(sub_basis)) = (sub.termination, sub.basis.as_ref()) else {
        return Ok(Start::Exhausted { coeffs, delta: worst.value, iterations });
    };

    // lift: undo the side swap on flipped points, then slot the witnesses in
    let mut merged: Vec<(usize, Option<Side>)> = sub_basis
        .nodes()
        .iter()
        .zip(sub_basis.sides())
        .map(|(&r, &side)| (rest[r], Some(if flipped[r] { side.opposite() } else { side })))
        .chain(witnesses.iter().map(|&w| (w, None)))
        .collect();
    merged.sort_unstable_by_key(|x| x.0);
    let first = merged.iter().position(|x| x.1.is_some()).expect("reduced basis is nonempty");
    for k in (0..first).rev() {
        merged[k].1 = merged[k + 1].1.map(Side::opposite);
    }
    for k in first + 1..merged.len() {
        if merged[k].1.is_none() {
            merged[k].1 = merged[k - 1].1.map(Side::opposite);
        }
    }
    let (nodes, sides): (Vec<usize>, Vec<Side>) = merged.into_iter().map(|(i, s)| (i, s.expect("filled"))).unzip();
    let basis = ReferenceBasis::new(nodes, sides)
        .map_err(|e| Error::DegenerateBasis(format!("lifted starting basis is invalid: {e}")))?;
    Ok(Start::Basis(basis, iterations))
}
