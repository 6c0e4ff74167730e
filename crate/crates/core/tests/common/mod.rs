#![allow(dead_code)]

use chebclust::{build_envelope, ChebyshevBasis, Envelope, Grid, SignalGroup};
use rand::Rng;

/// Sum of three random sinusoids plus an offset.
pub fn smooth_signal<R: Rng>(rng: &mut R, grid: &Grid) -> Vec<f64> {
    let offset = rng.gen_range(-0.5..0.5);
    let terms: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..8.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    grid.points()
        .iter()
        .map(|&t| offset + terms.iter().map(|(a, f, ph)| a * (f * t + ph).sin()).sum::<f64>())
        .collect()
}

pub struct Instance {
    pub group: SignalGroup,
    pub env: Envelope,
    pub basis: ChebyshevBasis,
}

/// Random instance with `N ∈ [5, 200]`, `l ∈ [2, 10]`, `n ∈ [0, min(4, N − 2)]`.
/// Every third instance gets a narrow bump on one signal so that the
/// envelope gap decides the optimum; odd instances use the Chebyshev basis.
pub fn random_instance<R: Rng>(rng: &mut R, index: usize) -> Instance {
    let points = rng.gen_range(5..=200);
    let l = rng.gen_range(2..=10);
    let n = rng.gen_range(0..=4usize).min(points - 2);
    let grid = Grid::uniform(0.0, 1.0, points).unwrap();
    let mut rows: Vec<Vec<f64>> = (0..l).map(|_| smooth_signal(rng, &grid)).collect();
    if index % 3 == 0 {
        let centre = rng.gen_range(0.0..1.0);
        let height = rng.gen_range(4.0..8.0);
        let width: f64 = 0.02;
        for (v, &t) in rows[0].iter_mut().zip(grid.points()) {
            *v += height * (-((t - centre) / width).powi(2)).exp();
        }
    }
    let group = SignalGroup::from_rows(grid.clone(), rows).unwrap();
    let env = build_envelope(&group).unwrap();
    let basis = if index % 2 == 0 {
        ChebyshevBasis::monomial(n)
    } else {
        ChebyshevBasis::chebyshev(n, 0.0, 1.0).unwrap()
    };
    Instance { group, env, basis }
}

/// Dense Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..m {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Minimum of the minimax LP over all of its basic feasible solutions.
pub fn vertex_enumeration(env: &Envelope, basis: &ChebyshevBasis) -> Option<f64> {
    let m = basis.dimension();
    let design = basis.design_matrix(env.grid()).unwrap();
    let n_pts = env.len();
    // rows: −g·a − z ≤ −u_i  and  g·a − z ≤ l_i
    let mut rows = Vec::with_capacity(2 * n_pts);
    let mut rhs = Vec::with_capacity(2 * n_pts);
    for i in 0..n_pts {
        let mut r: Vec<f64> = design.row(i).iter().map(|v| -v).collect();
        r.push(-1.0);
        rows.push(r);
        rhs.push(-env.upper()[i]);
    }
    for i in 0..n_pts {
        let mut r = design.row(i).to_vec();
        r.push(-1.0);
        rows.push(r);
        rhs.push(env.lower()[i]);
    }
    let mut best: Option<f64> = None;
    for active in subsets(2 * n_pts, m + 1) {
        let a: Vec<Vec<f64>> = active.iter().map(|&r| rows[r].clone()).collect();
        let b: Vec<f64> = active.iter().map(|&r| rhs[r]).collect();
        let Some(x) = solve_dense(a, b) else { continue };
        let feasible = rows
            .iter()
            .zip(&rhs)
            .all(|(r, &b)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
        if feasible {
            let z = x[m];
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}
