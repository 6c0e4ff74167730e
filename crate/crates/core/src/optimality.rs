//! Independent optimality certificates for a candidate prototype.
//!
//! A prototype is optimal for an envelope iff either some grid point attains
//! the maximal deviation on both sides, or `n + 2` increasing points attain it
//! with alternating sides. Equivalently the origin lies in the convex hull of
//! `+g(t)` over positive and `−g(t)` over negative maximal deviation points.
//! Both tests are implemented here and are expected to agree.

use crate::basis::{ChebyshevBasis, Grid};
use crate::envelope::{Envelope, Side};
use crate::error::{Error, Result};
use crate::lpsolver::feasibility_in_convex_hull;

/// Relative tolerance for membership in `T+` / `T−`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationProfile {
    /// `S_max − S` per grid point.
    pub upper: Vec<f64>,
    /// `S − S_min` per grid point.
    pub lower: Vec<f64>,
    pub delta: f64,
    /// Points attaining `delta` on the upper side.
    pub t_plus: Vec<usize>,
    /// Points attaining `delta` on the lower side.
    pub t_minus: Vec<usize>,
}

impl DeviationProfile {
    /// Profile of prototype values against envelope curves.
    pub fn from_values(upper: &[f64], lower: &[f64], values: &[f64]) -> Result<Self> {
        if upper.len() != values.len() || lower.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} prototype values for {} grid points",
                values.len(),
                upper.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::EmptyInput("deviation profile of an empty grid".into()));
        }
        let up: Vec<f64> = upper.iter().zip(values).map(|(u, s)| u - s).collect();
        let lo: Vec<f64> = values.iter().zip(lower).map(|(s, l)| s - l).collect();
        let delta = up.iter().chain(&lo).copied().fold(f64::NEG_INFINITY, f64::max);
        let cut = delta - MEMBERSHIP_TOL * delta.abs().max(1.0);
        let attaining = |d: &[f64]| d.iter().enumerate().filter(|(_, v)| **v >= cut).map(|(i, _)| i).collect();
        Ok(DeviationProfile { t_plus: attaining(&up), t_minus: attaining(&lo), upper: up, lower: lo, delta })
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    fn is_member(&self, i: usize, side: Side) -> bool {
        match side {
            Side::Upper => self.t_plus.binary_search(&i).is_ok(),
            Side::Lower => self.t_minus.binary_search(&i).is_ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    DoublePoint,
    AlternatingSequence,
    Subdifferential,
    NotOptimal,
}

impl VerdictReason {
    pub fn name(self) -> &'static str {
        match self {
            VerdictReason::DoublePoint => "double-point",
            VerdictReason::AlternatingSequence => "alternating-sequence",
            VerdictReason::Subdifferential => "subdifferential",
            VerdictReason::NotOptimal => "not-optimal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    None,
    DoublePoint(usize),
    Alternating { nodes: Vec<usize>, sides: Vec<Side> },
    /// Positive convex weights on `(point, side)` pairs with `Σ λ σ g = 0`.
    Weights { points: Vec<(usize, Side)>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityVerdict {
    pub optimal: bool,
    pub reason: VerdictReason,
    pub certificate: Certificate,
    /// Coefficient direction along which the maximal deviation decreases,
    /// when one was found.
    pub improving_direction: Option<Vec<f64>>,
}

impl OptimalityVerdict {
    fn rejected(direction: Option<Vec<f64>>) -> Self {
        OptimalityVerdict {
            optimal: false,
            reason: VerdictReason::NotOptimal,
            certificate: Certificate::None,
            improving_direction: direction,
        }
    }
}

pub fn deviation_profile(env: &Envelope, basis: &ChebyshevBasis, coeffs: &[f64]) -> Result<DeviationProfile> {
    let values = basis.evaluate_on_grid(coeffs, env.grid())?;
    DeviationProfile::from_values(env.upper(), env.lower(), &values)
}

/// Double point, else a greedy left-to-right search for `n + 2` points with
/// alternating sides, trying both starting sides.
pub fn check_alternation(profile: &DeviationProfile, n: usize) -> OptimalityVerdict {
    if let Some(&i) = profile.t_plus.iter().find(|i| profile.t_minus.binary_search(i).is_ok()) {
        return OptimalityVerdict {
            optimal: true,
            reason: VerdictReason::DoublePoint,
            certificate: Certificate::DoublePoint(i),
            improving_direction: None,
        };
    }
    let need = n + 2;
    for first in [Side::Upper, Side::Lower] {
        let mut want = first;
        let mut nodes = Vec::with_capacity(need);
        let mut sides = Vec::with_capacity(need);
        for i in 0..profile.len() {
            if profile.is_member(i, want) {
                nodes.push(i);
                sides.push(want);
                want = want.opposite();
                if nodes.len() == need {
                    return OptimalityVerdict {
                        optimal: true,
                        reason: VerdictReason::AlternatingSequence,
                        certificate: Certificate::Alternating { nodes, sides },
                        improving_direction: None,
                    };
                }
            }
        }
    }
    OptimalityVerdict::rejected(None)
}

/// Convex-hull test on `+g(t)`, `t ∈ T+` and `−g(t)`, `t ∈ T−`.
pub fn check_subdifferential(
    profile: &DeviationProfile,
    basis: &ChebyshevBasis,
    grid: &Grid,
) -> Result<OptimalityVerdict> {
    if grid.len() != profile.len() {
        return Err(Error::Dimension(format!(
            "profile has {} points, grid has {}",
            profile.len(),
            grid.len()
        )));
    }
    let points: Vec<(usize, Side)> = profile
        .t_plus
        .iter()
        .map(|&i| (i, Side::Upper))
        .chain(profile.t_minus.iter().map(|&i| (i, Side::Lower)))
        .collect();
    let mut columns = Vec::with_capacity(points.len());
    for &(i, side) in &points {
        let g = basis.functions_at(grid.points()[i])?;
        columns.push(g.into_iter().map(|v| side.sign() * v).collect::<Vec<f64>>());
    }
    let hull = feasibility_in_convex_hull(&columns)?;
    if !hull.feasible {
        return Ok(OptimalityVerdict::rejected(hull.separating));
    }
    let (points, weights) = points
        .into_iter()
        .zip(hull.weights)
        .filter(|(_, w)| *w > 0.0)
        .unzip();
    Ok(OptimalityVerdict {
        optimal: true,
        reason: VerdictReason::Subdifferential,
        certificate: Certificate::Weights { points, weights },
        improving_direction: None,
    })
}

/// Classical single-curve alternation test; requires `upper == lower`.
pub fn check_classical(env: &Envelope, basis: &ChebyshevBasis, coeffs: &[f64]) -> Result<OptimalityVerdict> {
    if let Some(i) = env.upper().iter().zip(env.lower()).position(|(u, l)| u != l) {
        return Err(Error::Precondition(format!(
            "single-curve check needs equal curves; they differ at grid index {i}"
        )));
    }
    let profile = deviation_profile(env, basis, coeffs)?;
    Ok(check_alternation(&profile, basis.degree()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_line_env() -> Envelope {
        let g = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        Envelope::from_curves(g, vec![1.0, 0.75, 0.5], vec![0.0, 0.25, 0.5]).unwrap()
    }

    fn single(points: Vec<f64>, f: impl Fn(f64) -> f64) -> Envelope {
        let vals: Vec<f64> = points.iter().map(|&t| f(t)).collect();
        Envelope::from_curves(Grid::new(points).unwrap(), vals.clone(), vals).unwrap()
    }

    #[test]
    fn two_line_profile() {
        let p = deviation_profile(&two_line_env(), &ChebyshevBasis::monomial(1), &[0.5, 0.0]).unwrap();
        assert_eq!(p.delta, 0.5);
        assert_eq!(p.t_plus, vec![0]);
        assert_eq!(p.t_minus, vec![0]);
        let v = check_alternation(&p, 1);
        assert!(v.optimal);
        assert_eq!(v.certificate, Certificate::DoublePoint(0));
    }

    #[test]
    fn prototype_on_upper_curve() {
        let env = two_line_env();
        let p = DeviationProfile::from_values(env.upper(), env.lower(), env.upper()).unwrap();
        assert_eq!(p.delta, 1.0);
        assert_eq!(p.t_minus, vec![0]);
        assert!(p.t_plus.is_empty());
    }

    #[test]
    fn two_line_subdifferential_weights() {
        let env = two_line_env();
        let b = ChebyshevBasis::monomial(1);
        let p = deviation_profile(&env, &b, &[0.5, 0.0]).unwrap();
        let v = check_subdifferential(&p, &b, env.grid()).unwrap();
        assert!(v.optimal);
        let Certificate::Weights { weights, .. } = v.certificate else { panic!() };
        assert_eq!(weights.len(), 2);
        assert!(weights.iter().all(|w| (w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn one_sided_profile_is_infeasible() {
        let g = Grid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let env = Envelope::from_curves(g.clone(), vec![2.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        let b = ChebyshevBasis::monomial(1);
        let p = deviation_profile(&env, &b, &[0.0, 0.0]).unwrap();
        assert!(p.t_minus.is_empty());
        let v = check_subdifferential(&p, &b, &g).unwrap();
        assert!(!v.optimal);
        // raising the constant term lowers both upper deviations
        let y = v.improving_direction.unwrap();
        assert!(y[0] > 0.0 && y[0] + y[1] > 0.0);
        assert!(!check_alternation(&p, 1).optimal);
    }

    #[test]
    fn classical_step_and_parabola() {
        let env = single(vec![0.0, 1.0], |t| t);
        let v = check_classical(&env, &ChebyshevBasis::monomial(0), &[0.5]).unwrap();
        assert!(v.optimal);
        assert_eq!(v.reason, VerdictReason::AlternatingSequence);
        assert!(!check_classical(&env, &ChebyshevBasis::monomial(0), &[0.4]).unwrap().optimal);

        // best line for t² on [0,1] is t − 1/8
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let env = single(grid, |t| t * t);
        let b = ChebyshevBasis::monomial(1);
        let v = check_classical(&env, &b, &[-0.125, 1.0]).unwrap();
        let Certificate::Alternating { nodes, sides } = v.certificate else { panic!("{v:?}") };
        assert_eq!(nodes, vec![0, 50, 100]);
        assert_eq!(sides, vec![Side::Upper, Side::Lower, Side::Upper]);
        let p = deviation_profile(&env, &b, &[-0.125, 1.0]).unwrap();
        assert!(check_subdifferential(&p, &b, env.grid()).unwrap().optimal);
        assert!(!check_alternation(&deviation_profile(&env, &b, &[-0.025, 1.0]).unwrap(), 1).optimal);
    }

    #[test]
    fn classical_needs_equal_curves() {
        let r = check_classical(&two_line_env(), &ChebyshevBasis::monomial(1), &[0.5, 0.0]);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
