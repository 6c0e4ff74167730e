//! Linear-programming route to the two-curve problem.
//!
//! The minimax problem is rewritten as
//!
//! ```text
//! minimise z  subject to  S_max(t_i) − S(A, t_i) ≤ z,  S(A, t_i) − S_min(t_i) ≤ z
//! ```
//!
//! with `n + 2` free variables `(a_0, …, a_n, z)` and `2N` rows, and solved
//! with a dense two-phase tableau simplex using Bland's rule throughout.

use std::fmt::Write as _;
use std::io;

use crate::basis::{ChebyshevBasis, DesignMatrix};
use crate::envelope::{Envelope, Side};
use crate::error::{Error, Result};
use crate::linalg::Lu;

/// Pivot elements smaller than this are never used.
pub const PIVOT_TOL: f64 = 1e-10;
/// Feasibility tolerance on constraint residuals and phase-one objective.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Default simplex iteration limit.
pub const DEFAULT_LIMIT: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    Free,
    NonNegative,
}

/// Origin of a row in the minimax reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLabel {
    pub index: usize,
    pub side: Side,
}

/// `minimise cᵀx` subject to `row_r · x (≤ | = | ≥) rhs_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub relations: Vec<Relation>,
    pub bounds: Vec<VarBound>,
    pub labels: Vec<Option<RowLabel>>,
}

impl LpProblem {
    pub fn new(
        objective: Vec<f64>,
        matrix: Vec<Vec<f64>>,
        rhs: Vec<f64>,
        relations: Vec<Relation>,
        bounds: Vec<VarBound>,
    ) -> Result<Self> {
        let labels = vec![None; matrix.len()];
        let p = LpProblem { objective, matrix, rhs, relations, bounds, labels };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let m = self.matrix.len();
        if n == 0 {
            return Err(Error::Dimension("LP has no variables".into()));
        }
        if self.rhs.len() != m || self.relations.len() != m || self.labels.len() != m {
            return Err(Error::Dimension("LP row data differ in length".into()));
        }
        if self.bounds.len() != n {
            return Err(Error::Dimension("LP bounds do not match variable count".into()));
        }
        if let Some(r) = self.matrix.iter().position(|row| row.len() != n) {
            return Err(Error::Dimension(format!("LP row {r} has the wrong length")));
        }
        let finite = self.objective.iter().chain(&self.rhs).chain(self.matrix.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Invalid("LP data must be finite".into()));
        }
        Ok(())
    }

    /// Largest violation of any row at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((row, &b), rel) in self.matrix.iter().zip(&self.rhs).zip(&self.relations) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match rel {
                Relation::Le => lhs - b,
                Relation::Ge => b - lhs,
                Relation::Eq => (lhs - b).abs(),
            };
            worst = worst.max(v);
        }
        for (v, bound) in x.iter().zip(&self.bounds) {
            if *bound == VarBound::NonNegative {
                worst = worst.max(-v);
            }
        }
        worst
    }

    fn dual_route_applicable(&self) -> bool {
        self.bounds.iter().all(|b| *b == VarBound::Free) && self.relations.iter().all(|r| *r == Relation::Le)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Which standard form the tableau is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Dual route when every variable is free and every row is `≤`.
    Auto,
    /// Free variables split into nonnegative pairs, one slack per inequality.
    Primal,
    /// Tableau of the dual problem: one row per primal variable, one column
    /// per primal row. Primal values are recovered as simplex multipliers.
    Dual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Rows of the original problem that are active in the final basis.
    pub basic_rows: Vec<usize>,
    pub iterations: usize,
    pub route: Route,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub limit: usize,
    pub route: Route,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { limit: DEFAULT_LIMIT, route: Route::Auto }
    }
}

/// The minimax LP for an envelope and basis. Columns are `a_0 … a_n, z`;
/// rows `0..N` are upper-curve rows and rows `N..2N` lower-curve rows.
pub fn build_lp(env: &Envelope, basis: &ChebyshevBasis) -> Result<LpProblem> {
    let design = basis.design_matrix(env.grid())?;
    build_lp_from_samples(&design, env.upper(), env.lower())
}

/// [`build_lp`] on raw samples; `design.row(i)` holds `g(t_i)`.
pub fn build_lp_from_samples(design: &DesignMatrix, upper: &[f64], lower: &[f64]) -> Result<LpProblem> {
    let n = design.rows();
    if upper.len() != n || lower.len() != n {
        return Err(Error::Dimension(format!(
            "design matrix has {n} rows, curves have {} and {} values",
            upper.len(),
            lower.len()
        )));
    }
    let k = design.cols();
    let mut objective = vec![0.0; k + 1];
    objective[k] = 1.0;
    let mut matrix = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    // S_max − g·A ≤ z  ⇔  −g·A − z ≤ −S_max
    for i in 0..n {
        let mut row: Vec<f64> = design.row(i).iter().map(|v| -v).collect();
        row.push(-1.0);
        matrix.push(row);
        rhs.push(-upper[i]);
        labels.push(Some(RowLabel { index: i, side: Side::Upper }));
    }
    // g·A − S_min ≤ z  ⇔  g·A − z ≤ S_min
    for i in 0..n {
        let mut row = design.row(i).to_vec();
        row.push(-1.0);
        matrix.push(row);
        rhs.push(lower[i]);
        labels.push(Some(RowLabel { index: i, side: Side::Lower }));
    }
    let p = LpProblem {
        objective,
        matrix,
        rhs,
        relations: vec![Relation::Le; 2 * n],
        bounds: vec![VarBound::Free; k + 1],
        labels,
    };
    p.validate()?;
    Ok(p)
}

pub fn solve_simplex(p: &LpProblem, limit: usize) -> LpSolution {
    solve_simplex_with(p, &SimplexOptions { limit, route: Route::Auto })
}

pub fn solve_simplex_with(p: &LpProblem, opts: &SimplexOptions) -> LpSolution {
    let dual = match opts.route {
        Route::Auto | Route::Dual => p.dual_route_applicable(),
        Route::Primal => false,
    };
    if dual {
        let sol = solve_dual_route(p, opts.limit);
        // an infeasible dual leaves primal infeasibility and unboundedness
        // undistinguished; the primal route settles it
        if sol.status != LpStatus::Unbounded {
            return sol;
        }
    }
    solve_primal_route(p, opts.limit)
}

// ---------------------------------------------------------------------------
// standard-form tableau: minimise cᵀx, Ax = b, x ≥ 0
// ---------------------------------------------------------------------------

struct StandardForm {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunOutcome {
    Optimal,
    Unbounded,
    Limit,
}

struct Tableau {
    m: usize,
    // structural + artificial columns
    width: usize,
    structural: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    reduced: Vec<f64>,
    value: f64,
    basis: Vec<usize>,
    // row r was multiplied by −1 to make b_r ≥ 0
    negated: Vec<bool>,
    iterations: usize,
    // initial tableau, costs in force; used to rebuild from the basis
    orig: Vec<f64>,
    orig_rhs: Vec<f64>,
    costs: Vec<f64>,
}

/// Pivots between rebuilds of the tableau from the original data.
const REFRESH_INTERVAL: usize = 50;

impl Tableau {
    fn new(sf: &StandardForm) -> Tableau {
        let m = sf.rows;
        let width = sf.cols + m;
        let mut t = vec![0.0; m * width];
        let mut rhs = vec![0.0; m];
        let mut negated = vec![false; m];
        for r in 0..m {
            let s = if sf.b[r] < 0.0 { -1.0 } else { 1.0 };
            negated[r] = s < 0.0;
            for c in 0..sf.cols {
                t[r * width + c] = s * sf.a[r * sf.cols + c];
            }
            t[r * width + sf.cols + r] = 1.0;
            rhs[r] = s * sf.b[r];
        }
        Tableau {
            m,
            width,
            structural: sf.cols,
            reduced: vec![0.0; width],
            value: 0.0,
            basis: (sf.cols..sf.cols + m).collect(),
            negated,
            iterations: 0,
            orig: t.clone(),
            orig_rhs: rhs.clone(),
            costs: vec![0.0; width],
            t,
            rhs,
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    /// Installs a cost vector over all columns and prices out the basis.
    fn set_costs(&mut self, costs: &[f64]) {
        self.costs.copy_from_slice(costs);
        self.reduced.copy_from_slice(costs);
        self.value = 0.0;
        for r in 0..self.m {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.width..(r + 1) * self.width];
                for (d, v) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * v;
                }
                self.value += cb * self.rhs[r];
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f != 0.0 {
                for (v, pr) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.t[i * w + c] = 0.0;
                self.rhs[i] -= f * self.rhs[r];
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-13 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.reduced[c];
        if f != 0.0 {
            for (v, pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.reduced[c] = 0.0;
            self.value += f * self.rhs[r];
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Bland's rule: lowest-index improving column enters; the ratio test
    /// breaks ties by lowest basic variable index.
    fn run(&mut self, eligible: usize, limit: usize) -> RunOutcome {
        let mut since_refresh = 0;
        loop {
            if since_refresh >= REFRESH_INTERVAL {
                self.refresh();
                since_refresh = 0;
            }
            let mut entering = (0..eligible).find(|&j| self.reduced[j] < -FEASIBILITY_TOL);
            if entering.is_none() && since_refresh > 0 {
                // confirm optimality on a freshly rebuilt tableau
                self.refresh();
                since_refresh = 0;
                entering = (0..eligible).find(|&j| self.reduced[j] < -FEASIBILITY_TOL);
            }
            let Some(c) = entering else {
                return RunOutcome::Optimal;
            };
            since_refresh += 1;
            if self.iterations >= limit {
                return RunOutcome::Limit;
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[r] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if ratio < best && !tie || tie && self.basis[r] < self.basis[br] {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return RunOutcome::Unbounded,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    /// Rebuilds the tableau, right-hand side and reduced costs from the
    /// original data for the current basis. Keeps the drifted tableau when the
    /// basis matrix cannot be factored.
    fn refresh(&mut self) {
        let (m, w) = (self.m, self.width);
        let mut bmat = vec![0.0; m * m];
        for r in 0..m {
            for (k, &col) in self.basis.iter().enumerate() {
                bmat[r * m + k] = self.orig[r * w + col];
            }
        }
        let Some(lu) = Lu::factor(bmat, m, 1e-14) else {
            return;
        };
        let mut column = vec![0.0; m];
        for c in 0..w {
            for r in 0..m {
                column[r] = self.orig[r * w + c];
            }
            let sol = lu.solve(&column);
            for r in 0..m {
                self.t[r * w + c] = sol[r];
            }
        }
        for (k, &col) in self.basis.iter().enumerate() {
            for r in 0..m {
                self.t[r * w + col] = if r == k { 1.0 } else { 0.0 };
            }
        }
        self.rhs = lu.solve(&self.orig_rhs);
        for v in &mut self.rhs {
            if *v < 0.0 && *v > -FEASIBILITY_TOL {
                *v = 0.0;
            }
        }
        let costs = self.costs.clone();
        self.set_costs(&costs);
    }

    /// Phase-one multipliers for the original (un-negated) rows, read off the
    /// reduced costs of the artificial columns.
    fn multipliers(&self, art_cost: f64) -> Vec<f64> {
        (0..self.m)
            .map(|r| {
                let pi = art_cost - self.reduced[self.structural + r];
                if self.negated[r] {
                    -pi
                } else {
                    pi
                }
            })
            .collect()
    }

    fn primal_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.rhs[r];
            }
        }
        x
    }
}

struct StandardOutcome {
    status: LpStatus,
    x: Vec<f64>,
    tableau: Tableau,
}

fn phase_one(sf: &StandardForm, limit: usize) -> (Tableau, Option<LpStatus>) {
    let mut tab = Tableau::new(sf);
    let mut costs = vec![0.0; tab.width];
    for c in costs.iter_mut().skip(sf.cols) {
        *c = 1.0;
    }
    tab.set_costs(&costs);
    let scale = sf.b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    match tab.run(tab.width, limit) {
        RunOutcome::Limit => return (tab, Some(LpStatus::IterationLimit)),
        RunOutcome::Unbounded => unreachable!("phase one is bounded below by zero"),
        RunOutcome::Optimal => {}
    }
    if tab.value > FEASIBILITY_TOL * scale {
        return (tab, Some(LpStatus::Infeasible));
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..tab.m {
        if tab.basis[r] >= sf.cols {
            if let Some(c) = (0..sf.cols).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                tab.pivot(r, c);
            }
        }
    }
    (tab, None)
}

fn solve_standard(sf: &StandardForm, limit: usize) -> StandardOutcome {
    let (mut tab, early) = phase_one(sf, limit);
    if let Some(status) = early {
        return StandardOutcome { status, x: Vec::new(), tableau: tab };
    }
    let mut costs = vec![0.0; tab.width];
    costs[..sf.cols].copy_from_slice(&sf.c);
    tab.set_costs(&costs);
    let status = match tab.run(sf.cols, limit) {
        RunOutcome::Optimal => LpStatus::Optimal,
        RunOutcome::Unbounded => LpStatus::Unbounded,
        RunOutcome::Limit => LpStatus::IterationLimit,
    };
    let x = tab.primal_values();
    StandardOutcome { status, x, tableau: tab }
}

fn solve_primal_route(p: &LpProblem, limit: usize) -> LpSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    // column layout: for each variable its positive part, then negative parts
    // of free variables, then one slack per inequality row
    let mut neg_col = vec![None; n];
    let mut cols = n;
    for (j, b) in p.bounds.iter().enumerate() {
        if *b == VarBound::Free {
            neg_col[j] = Some(cols);
            cols += 1;
        }
    }
    let mut slack_col = vec![None; m];
    for (r, rel) in p.relations.iter().enumerate() {
        if *rel != Relation::Eq {
            slack_col[r] = Some(cols);
            cols += 1;
        }
    }
    let mut a = vec![0.0; m * cols];
    for r in 0..m {
        for j in 0..n {
            let v = p.matrix[r][j];
            a[r * cols + j] = v;
            if let Some(nc) = neg_col[j] {
                a[r * cols + nc] = -v;
            }
        }
        match (p.relations[r], slack_col[r]) {
            (Relation::Le, Some(s)) => a[r * cols + s] = 1.0,
            (Relation::Ge, Some(s)) => a[r * cols + s] = -1.0,
            _ => {}
        }
    }
    let mut c = vec![0.0; cols];
    for j in 0..n {
        c[j] = p.objective[j];
        if let Some(nc) = neg_col[j] {
            c[nc] = -p.objective[j];
        }
    }
    let sf = StandardForm { rows: m, cols, a, b: p.rhs.clone(), c };
    let out = solve_standard(&sf, limit);
    let iterations = out.tableau.iterations;
    if out.status != LpStatus::Optimal {
        return LpSolution {
            status: out.status,
            x: Vec::new(),
            objective: f64::NAN,
            basic_rows: Vec::new(),
            iterations,
            route: Route::Primal,
        };
    }
    let x: Vec<f64> = (0..n).map(|j| out.x[j] - neg_col[j].map_or(0.0, |nc| out.x[nc])).collect();
    let in_basis: Vec<bool> = {
        let mut v = vec![false; sf.cols];
        for &b in &out.tableau.basis {
            if b < sf.cols {
                v[b] = true;
            }
        }
        v
    };
    let basic_rows = (0..m).filter(|&r| slack_col[r].is_none_or(|s| !in_basis[s])).collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: p.objective.iter().zip(&x).map(|(c, v)| c * v).sum(),
        x,
        basic_rows,
        iterations,
        route: Route::Primal,
    }
}

/// `min cᵀx, Ax ≤ b, x free` through its dual `min bᵀμ, Aᵀμ = −c, μ ≥ 0`.
/// The primal optimum is `−bᵀμ*` and `x` is the multiplier vector of the
/// dual's equality rows, i.e. the solution of `a_r·x = b_r` on basic rows.
fn solve_dual_route(p: &LpProblem, limit: usize) -> LpSolution {
    let n = p.num_vars();
    let m = p.num_rows();
    let mut a = vec![0.0; n * m];
    for r in 0..m {
        for j in 0..n {
            a[j * m + r] = p.matrix[r][j];
        }
    }
    let sf = StandardForm {
        rows: n,
        cols: m,
        a,
        b: p.objective.iter().map(|c| -c).collect(),
        c: p.rhs.clone(),
    };
    let out = solve_standard(&sf, limit);
    let iterations = out.tableau.iterations;
    let status = match out.status {
        LpStatus::Optimal => LpStatus::Optimal,
        LpStatus::Unbounded => LpStatus::Infeasible,
        LpStatus::Infeasible => LpStatus::Unbounded,
        LpStatus::IterationLimit => LpStatus::IterationLimit,
    };
    if status != LpStatus::Optimal {
        return LpSolution {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            basic_rows: Vec::new(),
            iterations,
            route: Route::Dual,
        };
    }
    let tab = &out.tableau;
    let basic_rows: Vec<usize> = {
        let mut v: Vec<usize> = tab.basis.iter().copied().filter(|&b| b < m).collect();
        v.sort_unstable();
        v
    };
    // multipliers: reduced cost of artificial r is 0 − π_r in phase two
    let mut x = tab.multipliers(0.0);
    // refine by solving the basic rows exactly when the basis is square
    if basic_rows.len() == n {
        let mut mat = Vec::with_capacity(n * n);
        for &r in &basic_rows {
            mat.extend_from_slice(&p.matrix[r]);
        }
        if let Some(lu) = Lu::factor(mat, n, 1e-14) {
            let b: Vec<f64> = basic_rows.iter().map(|&r| p.rhs[r]).collect();
            x = lu.solve(&b);
        }
    }
    LpSolution {
        status,
        objective: p.objective.iter().zip(&x).map(|(c, v)| c * v).sum(),
        x,
        basic_rows,
        iterations,
        route: Route::Dual,
    }
}

// ---------------------------------------------------------------------------
// convex hull feasibility
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HullFeasibility {
    pub feasible: bool,
    /// Convex weights (`Λ ≥ 0`, `ΣΛ = 1`, `MΛ ≈ 0`) when feasible.
    pub weights: Vec<f64>,
    /// When infeasible, a unit vector `y` with `y·m_j > 0` for every column.
    pub separating: Option<Vec<f64>>,
}

/// Decides whether the origin is a convex combination of `columns` with a
/// phase-one simplex on `MΛ = 0, 1ᵀΛ = 1, Λ ≥ 0`.
pub fn feasibility_in_convex_hull(columns: &[Vec<f64>]) -> Result<HullFeasibility> {
    let m = columns.len();
    if m == 0 {
        return Err(Error::Dimension("convex hull of no columns".into()));
    }
    let d = columns[0].len();
    if columns.iter().any(|c| c.len() != d) {
        return Err(Error::Dimension("columns differ in length".into()));
    }
    let rows = d + 1;
    let mut a = vec![0.0; rows * m];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            a[i * m + j] = *v;
        }
        a[d * m + j] = 1.0;
    }
    let mut b = vec![0.0; rows];
    b[d] = 1.0;
    let sf = StandardForm { rows, cols: m, a, b, c: vec![0.0; m] };
    let (tab, early) = phase_one(&sf, DEFAULT_LIMIT);
    match early {
        None => {
            let weights = tab.primal_values();
            Ok(HullFeasibility { feasible: true, weights, separating: None })
        }
        Some(_) => {
            // phase-one duals π = (y, η): y·m_j + η ≤ 0 for all j, η > 0
            let pi = tab.multipliers(1.0);
            let y: Vec<f64> = pi[..d].iter().map(|v| -v).collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let separating = (norm > 0.0).then(|| y.iter().map(|v| v / norm).collect());
            Ok(HullFeasibility { feasible: false, weights: Vec::new(), separating })
        }
    }
}

// ---------------------------------------------------------------------------
// fixed-format MPS dump
// ---------------------------------------------------------------------------

/// Writes `p` as a fixed-format MPS file. Columns of the minimax LP are named
/// `A0 … An, Z`; rows `U<i>` / `L<i>` for labelled rows, `R<r>` otherwise.
pub fn write_mps<W: io::Write>(p: &LpProblem, name: &str, mut out: W) -> io::Result<()> {
    let n = p.num_vars();
    let col_name = |j: usize| if p.labels.iter().any(Option::is_some) && j + 1 == n {
        "Z".to_string()
    } else {
        format!("A{j}")
    };
    let row_name = |r: usize| match p.labels[r] {
        Some(RowLabel { index, side: Side::Upper }) => format!("U{index}"),
        Some(RowLabel { index, side: Side::Lower }) => format!("L{index}"),
        None => format!("R{r}"),
    };
    let mut s = String::new();
    let _ = writeln!(s, "NAME          {name}");
    let _ = writeln!(s, "ROWS");
    let _ = writeln!(s, " N  COST");
    for (r, rel) in p.relations.iter().enumerate() {
        let t = match rel {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(s, " {t:<2} {}", row_name(r));
    }
    let _ = writeln!(s, "COLUMNS");
    for j in 0..n {
        let cname = col_name(j);
        if p.objective[j] != 0.0 {
            let _ = writeln!(s, "    {:<8}  {:<8}  {:>12}", cname, "COST", mps_number(p.objective[j]));
        }
        for r in 0..p.num_rows() {
            let v = p.matrix[r][j];
            if v != 0.0 {
                let _ = writeln!(s, "    {:<8}  {:<8}  {:>12}", cname, row_name(r), mps_number(v));
            }
        }
    }
    let _ = writeln!(s, "RHS");
    for (r, &b) in p.rhs.iter().enumerate() {
        if b != 0.0 {
            let _ = writeln!(s, "    {:<8}  {:<8}  {:>12}", "RHS", row_name(r), mps_number(b));
        }
    }
    let _ = writeln!(s, "BOUNDS");
    for (j, b) in p.bounds.iter().enumerate() {
        if *b == VarBound::Free {
            let _ = writeln!(s, " FR {:<8}  {}", "BND", col_name(j));
        }
    }
    let _ = writeln!(s, "ENDATA");
    out.write_all(s.as_bytes())
}

/// Most precise representation that fits the 12-character numeric field.
fn mps_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for digits in (0..=8).rev() {
        let e = format!("{v:.digits$E}");
        if e.len() <= 12 {
            return e;
        }
    }
    format!("{v:.0E}")
}
