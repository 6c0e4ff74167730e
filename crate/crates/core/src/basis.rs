//! Sampling grids and Chebyshev systems of basis functions.
//!
//! A prototype is a linear combination `S(A, t) = Σ a_i g_i(t)` of `n + 1`
//! basis functions. Three families are supported: monomials, Chebyshev
//! polynomials on an interval, and custom functions given by their values on
//! a grid.

use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Threshold on `|det| / Π‖row‖` below which a node subset is considered
/// degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Strictly increasing sample times `t_1 < … < t_N` inside `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    a: f64,
    b: f64,
}

impl Grid {
    /// Grid whose interval is `[t_1, t_N]`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let (a, b) = match (points.first(), points.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::Dimension("a grid needs at least 2 points".into())),
        };
        Self::with_interval(points, a, b)
    }

    pub fn with_interval(points: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Dimension(format!(
                "a grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Invalid("grid values must be finite".into()));
        }
        if let Some(w) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "grid must be strictly increasing (t[{}] = {} >= t[{}] = {})",
                w,
                points[w],
                w + 1,
                points[w + 1]
            )));
        }
        if a > points[0] || b < points[points.len() - 1] {
            return Err(Error::Invalid(format!(
                "grid points must lie inside [{a}, {b}]"
            )));
        }
        Ok(Grid { points, a, b })
    }

    /// `n` equally spaced points covering `[a, b]`, endpoints included.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("a grid needs at least 2 points, got {n}")));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
        points[n - 1] = b;
        Self::with_interval(points, a, b)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Index of an exact grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Monomial,
    ChebyshevPolynomial,
    CustomSampleMatrix,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Monomial => "monomial",
            BasisKind::ChebyshevPolynomial => "chebyshev",
            BasisKind::CustomSampleMatrix => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Monomial { degree: usize, domain: Option<(f64, f64)> },
    Chebyshev { degree: usize, a: f64, b: f64 },
    // values[i][j] = g_i(t_j)
    Custom { grid: Grid, values: Vec<Vec<f64>> },
}

/// Functions `g_0 … g_n` forming (by assumption, see
/// [`check_chebyshev_system`]) a Chebyshev system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBasis {
    repr: Repr,
}

impl ChebyshevBasis {
    /// `g_0 = 1, g_i(t) = t^i`, defined on the whole real line.
    pub fn monomial(degree: usize) -> Self {
        ChebyshevBasis { repr: Repr::Monomial { degree, domain: None } }
    }

    /// Monomials restricted to `[a, b]`.
    pub fn monomial_on(degree: usize, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        Ok(ChebyshevBasis { repr: Repr::Monomial { degree, domain: Some((a, b)) } })
    }

    /// Chebyshev polynomials of the first kind after mapping `[a, b]` onto
    /// `[-1, 1]`.
    pub fn chebyshev(degree: usize, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        if a == b {
            return Err(Error::Invalid("chebyshev basis needs a < b".into()));
        }
        Ok(ChebyshevBasis { repr: Repr::Chebyshev { degree, a, b } })
    }

    /// Custom basis from `values[i][j] = g_i(t_j)`; degree is `values.len() - 1`.
    pub fn custom(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension("custom basis needs at least one function".into()));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::Dimension(format!(
                    "custom basis function {i} has {} values, grid has {}",
                    row.len(),
                    grid.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("custom basis function {i} has non-finite values")));
            }
        }
        Ok(ChebyshevBasis { repr: Repr::Custom { grid, values } })
    }

    pub fn kind(&self) -> BasisKind {
        match self.repr {
            Repr::Monomial { .. } => BasisKind::Monomial,
            Repr::Chebyshev { .. } => BasisKind::ChebyshevPolynomial,
            Repr::Custom { .. } => BasisKind::CustomSampleMatrix,
        }
    }

    pub fn degree(&self) -> usize {
        match &self.repr {
            Repr::Monomial { degree, .. } | Repr::Chebyshev { degree, .. } => *degree,
            Repr::Custom { values, .. } => values.len() - 1,
        }
    }

    /// Number of functions, `n + 1`.
    pub fn dimension(&self) -> usize {
        self.degree() + 1
    }

    /// `(g_0(t), …, g_n(t))`.
    pub fn functions_at(&self, t: f64) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Monomial { degree, domain } => {
                if let Some((a, b)) = *domain {
                    in_domain(t, a, b)?;
                }
                let mut out = Vec::with_capacity(degree + 1);
                let mut p = 1.0;
                for _ in 0..=*degree {
                    out.push(p);
                    p *= t;
                }
                Ok(out)
            }
            Repr::Chebyshev { degree, a, b } => {
                in_domain(t, *a, *b)?;
                let x = ((2.0 * t - a - b) / (b - a)).clamp(-1.0, 1.0);
                let mut out = Vec::with_capacity(degree + 1);
                out.push(1.0);
                if *degree >= 1 {
                    out.push(x);
                }
                for k in 2..=*degree {
                    let next = 2.0 * x * out[k - 1] - out[k - 2];
                    out.push(next);
                }
                Ok(out)
            }
            Repr::Custom { grid, values } => {
                let j = grid.index_of(t).ok_or(Error::Domain { t, a: grid.a(), b: grid.b() })?;
                Ok(values.iter().map(|row| row[j]).collect())
            }
        }
    }

    /// `S(A, t) = Σ a_i g_i(t)`.
    pub fn evaluate(&self, coeffs: &[f64], t: f64) -> Result<f64> {
        self.check_coeffs(coeffs)?;
        let g = self.functions_at(t)?;
        Ok(dot(coeffs, &g))
    }

    pub fn evaluate_on_grid(&self, coeffs: &[f64], grid: &Grid) -> Result<Vec<f64>> {
        self.check_coeffs(coeffs)?;
        grid.points().iter().map(|&t| self.evaluate(coeffs, t)).collect()
    }

    /// Values of all basis functions at every grid point.
    pub fn design_matrix(&self, grid: &Grid) -> Result<DesignMatrix> {
        let cols = self.dimension();
        let mut data = Vec::with_capacity(grid.len() * cols);
        for &t in grid.points() {
            data.extend(self.functions_at(t)?);
        }
        Ok(DesignMatrix { rows: grid.len(), cols, data })
    }

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dimension() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                self.dimension(),
                coeffs.len()
            )));
        }
        Ok(())
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::Invalid(format!("invalid interval [{a}, {b}]")));
    }
    Ok(())
}

fn in_domain(t: f64, a: f64, b: f64) -> Result<()> {
    if t.is_nan() || t < a || t > b {
        return Err(Error::Domain { t, a, b });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `N × (n + 1)` matrix of `g_i(t_j)`; row `j` belongs to grid point `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::Dimension("design matrix needs at least one row and column".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("design matrix rows differ in length".into()));
        }
        let n = rows.len();
        Ok(DesignMatrix { rows: n, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `S(A, t_i)` for every row.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), coeffs)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChebyshevCheck {
    Pass { subsets_checked: usize },
    Fail { nodes: Vec<usize>, scaled_determinant: f64 },
}

impl ChebyshevCheck {
    pub fn passed(&self) -> bool {
        matches!(self, ChebyshevCheck::Pass { .. })
    }
}

/// Sampled verification of the Chebyshev-system determinant condition.
///
/// All `C(N, n+1)` increasing node subsets are checked when there are at most
/// `sample_budget` of them; otherwise `sample_budget` distinct subsets are
/// drawn with a ChaCha generator seeded by `seed`. The determinant of
/// `{g_i(t_{j_k})}` is divided by the product of the Euclidean norms of its
/// rows before comparison with [`DEGENERACY_TOL`].
pub fn check_chebyshev_system(
    basis: &ChebyshevBasis,
    grid: &Grid,
    sample_budget: usize,
    seed: u64,
) -> Result<ChebyshevCheck> {
    let k = basis.dimension();
    let n = grid.len();
    if n < k {
        return Err(Error::Dimension(format!(
            "grid has {n} points, need at least {k} for a degree-{} basis",
            basis.degree()
        )));
    }
    let design = basis.design_matrix(grid)?;
    let mut checked = 0usize;
    let mut test = |nodes: &[usize]| -> Option<ChebyshevCheck> {
        checked += 1;
        let det = scaled_determinant(&design, nodes);
        (det.abs() < DEGENERACY_TOL)
            .then(|| ChebyshevCheck::Fail { nodes: nodes.to_vec(), scaled_determinant: det })
    };

    if binomial_at_most(n, k, sample_budget) {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if let Some(fail) = test(&combo) {
                return Ok(fail);
            }
            // next combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(ChebyshevCheck::Pass { subsets_checked: checked });
                }
                i -= 1;
                if combo[i] < n - k + i {
                    combo[i] += 1;
                    for j in i + 1..k {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut attempts = 0usize;
    while seen.len() < sample_budget && attempts < sample_budget.saturating_mul(20) {
        attempts += 1;
        let mut nodes = index::sample(&mut rng, n, k).into_vec();
        nodes.sort_unstable();
        if !seen.insert(nodes.clone()) {
            continue;
        }
        if let Some(fail) = test(&nodes) {
            return Ok(fail);
        }
    }
    Ok(ChebyshevCheck::Pass { subsets_checked: checked })
}

fn scaled_determinant(design: &DesignMatrix, nodes: &[usize]) -> f64 {
    let k = nodes.len();
    // row i = function i sampled at the nodes
    let mut m = vec![0.0; k * k];
    for (c, &node) in nodes.iter().enumerate() {
        for (r, v) in design.row(node).iter().enumerate() {
            m[r * k + c] = *v;
        }
    }
    let mut norm = 1.0;
    for r in 0..k {
        let rn = m[r * k..(r + 1) * k].iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn == 0.0 {
            return 0.0;
        }
        norm *= rn;
    }
    linalg::determinant(m, k) / norm
}

fn binomial_at_most(n: usize, k: usize, limit: usize) -> bool {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > limit as u128 {
            return false;
        }
    }
    c <= limit as u128
}
