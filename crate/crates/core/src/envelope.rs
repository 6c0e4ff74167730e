//! Upper and lower envelopes of a signal group.
//!
//! Approximating every member of a group in the uniform norm is the same as
//! approximating the pair `(S_max, S_min)`: the deviation of a prototype from
//! the group at `t` is `max(S_max(t) - S(t), S(t) - S_min(t))`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::basis::Grid;
use crate::error::{Error, Result};

/// Default absolute tolerance for comparing deviation values.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Opaque signal identifier. Ordering is lexicographic on the string form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId(Arc<str>);

impl SignalId {
    pub fn new(id: impl AsRef<str>) -> Self {
        SignalId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SignalId {
    fn from(s: &str) -> Self {
        SignalId::new(s)
    }
}

impl From<String> for SignalId {
    fn from(s: String) -> Self {
        SignalId::new(s)
    }
}

/// Which curve a deviation is measured against. `Upper` is the positive
/// side (`S_max − S`), `Lower` the negative side (`S − S_min`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }
}

/// Rows of signal values sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGroup {
    grid: Grid,
    ids: Vec<SignalId>,
    samples: Vec<Vec<f64>>,
}

impl SignalGroup {
    pub fn new(grid: Grid, ids: Vec<SignalId>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != samples.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} signals",
                ids.len(),
                samples.len()
            )));
        }
        let mut seen = HashSet::new();
        for (id, row) in ids.iter().zip(&samples) {
            if !seen.insert(id.clone()) {
                return Err(Error::Invalid(format!("duplicate signal id `{id}`")));
            }
            validate_row(&grid, id, row)?;
        }
        Ok(SignalGroup { grid, ids, samples })
    }

    /// Group with ids `"0"`, `"1"`, ….
    pub fn from_rows(grid: Grid, samples: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..samples.len()).map(|i| SignalId::new(i.to_string())).collect();
        Self::new(grid, ids, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ids(&self) -> &[SignalId] {
        &self.ids
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn position(&self, id: &SignalId) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn row(&self, id: &SignalId) -> Option<&[f64]> {
        self.position(id).map(|i| self.samples[i].as_slice())
    }

    /// Subgroup made of the given row positions, in that order.
    pub fn subset(&self, rows: &[usize]) -> SignalGroup {
        SignalGroup {
            grid: self.grid.clone(),
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            samples: rows.iter().map(|&r| self.samples[r].clone()).collect(),
        }
    }

    /// Removes `removed` and appends `added`.
    pub fn with_changes(&self, added: &[(SignalId, Vec<f64>)], removed: &[SignalId]) -> Result<SignalGroup> {
        for id in removed {
            if self.position(id).is_none() {
                return Err(Error::NotFound(id.to_string()));
            }
        }
        let drop: HashSet<&SignalId> = removed.iter().collect();
        let mut ids = Vec::with_capacity(self.len() + added.len());
        let mut samples = Vec::with_capacity(self.len() + added.len());
        for (id, row) in self.ids.iter().zip(&self.samples) {
            if !drop.contains(id) {
                ids.push(id.clone());
                samples.push(row.clone());
            }
        }
        for (id, row) in added {
            ids.push(id.clone());
            samples.push(row.clone());
        }
        SignalGroup::new(self.grid.clone(), ids, samples)
    }
}

fn validate_row(grid: &Grid, id: &SignalId, row: &[f64]) -> Result<()> {
    if row.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "signal `{id}` has {} values, grid has {}",
            row.len(),
            grid.len()
        )));
    }
    if let Some(i) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("signal `{id}` has a non-finite value at index {i}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Witnesses {
    upper: Vec<SignalId>,
    lower: Vec<SignalId>,
}

/// Pointwise `S_max` / `S_min` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    grid: Grid,
    upper: Vec<f64>,
    lower: Vec<f64>,
    witnesses: Option<Witnesses>,
}

impl Envelope {
    /// Envelope from explicit curves, without witness tracking.
    pub fn from_curves(grid: Grid, upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        if upper.len() != grid.len() || lower.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "envelope curves have {} and {} values, grid has {}",
                upper.len(),
                lower.len(),
                grid.len()
            )));
        }
        for (i, (u, l)) in upper.iter().zip(&lower).enumerate() {
            if !u.is_finite() || !l.is_finite() {
                return Err(Error::Invalid(format!("non-finite envelope value at index {i}")));
            }
            if u < l {
                return Err(Error::Invalid(format!("upper < lower at index {i} ({u} < {l})")));
            }
        }
        Ok(Envelope { grid, upper, lower, witnesses: None })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn upper_witnesses(&self) -> Option<&[SignalId]> {
        self.witnesses.as_ref().map(|w| w.upper.as_slice())
    }

    pub fn lower_witnesses(&self) -> Option<&[SignalId]> {
        self.witnesses.as_ref().map(|w| w.lower.as_slice())
    }

    /// Ids that attain the upper or lower curve somewhere.
    pub fn witness_ids(&self) -> HashSet<SignalId> {
        match &self.witnesses {
            Some(w) => w.upper.iter().chain(&w.lower).cloned().collect(),
            None => HashSet::new(),
        }
    }

    /// Same values (witnesses ignored).
    pub fn same_curves(&self, other: &Envelope) -> bool {
        self.upper == other.upper && self.lower == other.lower
    }

    /// `(S_max − S, S − S_min)` at every grid point.
    pub fn deviations(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(values)?;
        let up = self.upper.iter().zip(values).map(|(u, s)| u - s).collect();
        let lo = values.iter().zip(&self.lower).map(|(s, l)| s - l).collect();
        Ok((up, lo))
    }

    /// `max_i max(S_max(t_i) − S(t_i), S(t_i) − S_min(t_i))`.
    pub fn max_deviation(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(max_deviation(&self.upper, &self.lower, values))
    }

    /// Multiplies every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> Envelope {
        Envelope {
            grid: self.grid.clone(),
            upper: self.upper.iter().map(|v| v * c).collect(),
            lower: self.lower.iter().map(|v| v * c).collect(),
            witnesses: self.witnesses.clone(),
        }
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} prototype values for a {}-point envelope",
                values.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn max_deviation(upper: &[f64], lower: &[f64], values: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for ((u, l), s) in upper.iter().zip(lower).zip(values) {
        best = best.max(u - s).max(s - l);
    }
    best
}

/// Pointwise extrema over the group with witness ids; ties go to the
/// smallest id.
pub fn build_envelope(group: &SignalGroup) -> Result<Envelope> {
    if group.is_empty() {
        return Err(Error::EmptyInput("cannot build the envelope of an empty group".into()));
    }
    let n = group.grid.len();
    let mut upper = Vec::with_capacity(n);
    let mut lower = Vec::with_capacity(n);
    let mut up_w = Vec::with_capacity(n);
    let mut lo_w = Vec::with_capacity(n);
    for i in 0..n {
        let (u, uw, l, lw) = extrema_at(group, i);
        upper.push(u);
        lower.push(l);
        up_w.push(uw);
        lo_w.push(lw);
    }
    Ok(Envelope {
        grid: group.grid.clone(),
        upper,
        lower,
        witnesses: Some(Witnesses { upper: up_w, lower: lo_w }),
    })
}

fn extrema_at(group: &SignalGroup, i: usize) -> (f64, SignalId, f64, SignalId) {
    let mut u = f64::NEG_INFINITY;
    let mut l = f64::INFINITY;
    let mut uw: Option<&SignalId> = None;
    let mut lw: Option<&SignalId> = None;
    for (id, row) in group.ids.iter().zip(&group.samples) {
        let v = row[i];
        if v > u || (v == u && uw.is_some_and(|w| id < w)) {
            u = v;
            uw = Some(id);
        }
        if v < l || (v == l && lw.is_some_and(|w| id < w)) {
            l = v;
            lw = Some(id);
        }
    }
    (u, uw.expect("nonempty").clone(), l, lw.expect("nonempty").clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeUpdate {
    pub envelope: Envelope,
    pub group: SignalGroup,
    /// False iff both curves are unchanged at every grid point.
    pub changed: bool,
}

/// Envelope of `group` after removing `removed` and adding `added`, computed
/// incrementally from `env` (which must have been built from `group`).
/// Points whose witness is removed are rescanned over the remaining rows.
pub fn update_envelope(
    env: &Envelope,
    group: &SignalGroup,
    added: &[(SignalId, Vec<f64>)],
    removed: &[SignalId],
) -> Result<EnvelopeUpdate> {
    let witnesses = env
        .witnesses
        .as_ref()
        .ok_or_else(|| Error::Invalid("incremental update needs an envelope built from a group".into()))?;
    if env.grid != group.grid || env.len() != group.grid.len() {
        return Err(Error::Dimension("envelope and group grids differ".into()));
    }
    let new_group = group.with_changes(added, removed)?;
    if new_group.is_empty() {
        return Err(Error::EmptyInput("update would leave the group empty".into()));
    }
    let gone: HashSet<&SignalId> = removed.iter().collect();

    let mut upper = env.upper.clone();
    let mut lower = env.lower.clone();
    let mut up_w = witnesses.upper.clone();
    let mut lo_w = witnesses.lower.clone();
    for i in 0..env.len() {
        if gone.contains(&up_w[i]) || gone.contains(&lo_w[i]) {
            let (u, uw, l, lw) = extrema_at(&new_group, i);
            upper[i] = u;
            up_w[i] = uw;
            lower[i] = l;
            lo_w[i] = lw;
            continue;
        }
        for (id, row) in added {
            let v = row[i];
            if v > upper[i] || (v == upper[i] && *id < up_w[i]) {
                upper[i] = v;
                up_w[i] = id.clone();
            }
            if v < lower[i] || (v == lower[i] && *id < lo_w[i]) {
                lower[i] = v;
                lo_w[i] = id.clone();
            }
        }
    }
    let changed = upper != env.upper || lower != env.lower;
    Ok(EnvelopeUpdate {
        envelope: Envelope {
            grid: env.grid.clone(),
            upper,
            lower,
            witnesses: Some(Witnesses { upper: up_w, lower: lo_w }),
        },
        group: new_group,
        changed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    /// Half the largest gap `S_max − S_min`.
    pub delta_star: f64,
    /// Grid indices whose half-gap is within the tolerance of `delta_star`.
    pub witnesses: Vec<usize>,
}

pub fn lower_bound(env: &Envelope, tol: f64) -> LowerBound {
    lower_bound_of(&env.upper, &env.lower, tol)
}

pub(crate) fn lower_bound_of(upper: &[f64], lower: &[f64], tol: f64) -> LowerBound {
    let half: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| 0.5 * (u - l)).collect();
    let delta_star = half.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let witnesses = half
        .iter()
        .enumerate()
        .filter(|(_, h)| **h >= delta_star - tol)
        .map(|(i, _)| i)
        .collect();
    LowerBound { delta_star, witnesses }
}

/// True when some grid point has `S_max − S_min` equal to twice the
/// prototype's maximal deviation: no prototype can do better.
pub fn no_update_needed(env: &Envelope, prototype: &[f64], tol: f64) -> Result<bool> {
    let delta = env.max_deviation(prototype)?;
    Ok(env
        .upper
        .iter()
        .zip(&env.lower)
        .any(|(u, l)| (0.5 * (u - l) - delta).abs() <= tol))
}

/// Whether an alternation certificate of an incumbent prototype still holds
/// under a new envelope: each certificate node keeps deviation `delta` on its
/// side and no grid point deviates by more than `delta`.
pub fn certificate_retained(
    env: &Envelope,
    prototype: &[f64],
    nodes: &[usize],
    sides: &[Side],
    delta: f64,
    tol: f64,
) -> Result<bool> {
    if nodes.len() != sides.len() {
        return Err(Error::Dimension("certificate nodes and sides differ in length".into()));
    }
    if nodes.iter().any(|&i| i >= env.len()) {
        return Ok(false);
    }
    let (up, lo) = env.deviations(prototype)?;
    let kept = nodes.iter().zip(sides).all(|(&i, side)| {
        let dev = match side {
            Side::Upper => up[i],
            Side::Lower => lo[i],
        };
        (dev - delta).abs() <= tol
    });
    if !kept {
        return Ok(false);
    }
    let worst = up.iter().chain(&lo).copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(worst <= delta + tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    fn two_line_pair() -> SignalGroup {
        SignalGroup::from_rows(grid3(), vec![vec![1.0, 0.75, 0.5], vec![0.0, 0.25, 0.5]]).unwrap()
    }

    #[test]
    fn build_examples() {
        let env = build_envelope(&two_line_pair()).unwrap();
        assert_eq!(env.upper(), &[1.0, 0.75, 0.5]);
        assert_eq!(env.lower(), &[0.0, 0.25, 0.5]);
        // t = 1 is a tie; smallest id wins both sides
        assert_eq!(env.upper_witnesses().unwrap()[2].as_str(), "0");
        assert_eq!(env.lower_witnesses().unwrap()[2].as_str(), "0");

        let single = SignalGroup::from_rows(grid3(), vec![vec![3.0, -1.0, 2.0]]).unwrap();
        let env = build_envelope(&single).unwrap();
        assert_eq!(env.upper(), env.lower());

        let g2 = Grid::new(vec![0.0, 1.0]).unwrap();
        let grp = SignalGroup::from_rows(g2, vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![1.5, 1.5]]).unwrap();
        let env = build_envelope(&grp).unwrap();
        assert_eq!(env.upper(), &[2.0, 2.0]);
        assert_eq!(env.lower(), &[1.0, 1.0]);
    }

    #[test]
    fn empty_group_is_rejected() {
        let grp = SignalGroup::from_rows(grid3(), vec![]).unwrap();
        assert!(matches!(build_envelope(&grp), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn group_validation() {
        assert!(SignalGroup::from_rows(grid3(), vec![vec![1.0, 2.0]]).is_err());
        assert!(SignalGroup::from_rows(grid3(), vec![vec![1.0, f64::NAN, 2.0]]).is_err());
        let ids = vec![SignalId::new("a"), SignalId::new("a")];
        assert!(SignalGroup::new(grid3(), ids, vec![vec![0.0; 3], vec![1.0; 3]]).is_err());
    }

    #[test]
    fn update_examples() {
        let grp = two_line_pair();
        let env = build_envelope(&grp).unwrap();

        let inside = vec![(SignalId::new("in"), vec![0.5, 0.5, 0.5])];
        let up = update_envelope(&env, &grp, &inside, &[]).unwrap();
        assert!(!up.changed);
        assert!(up.envelope.same_curves(&env));

        // "in" witnesses nothing strictly, so removing it is a no-op too
        let up2 = update_envelope(&up.envelope, &up.group, &[], &[SignalId::new("in")]).unwrap();
        assert!(!up2.changed);

        let spike = vec![(SignalId::new("x"), vec![0.5, 0.9, 0.5])];
        let up3 = update_envelope(&env, &grp, &spike, &[]).unwrap();
        assert!(up3.changed);
        assert_eq!(up3.envelope.upper(), &[1.0, 0.9, 0.5]);
        assert_eq!(up3.envelope.lower(), env.lower());
        assert_eq!(up3.envelope, build_envelope(&up3.group).unwrap());

        let err = update_envelope(&env, &grp, &[], &[SignalId::new("nope")]);
        assert!(matches!(err, Err(Error::NotFound(_))));
    }

    #[test]
    fn removing_a_witness_rescans() {
        let grp = two_line_pair();
        let env = build_envelope(&grp).unwrap();
        let extra = vec![(SignalId::new("2"), vec![0.4, 0.5, 0.6])];
        let up = update_envelope(&env, &grp, &extra, &[]).unwrap();
        let up = update_envelope(&up.envelope, &up.group, &[], &[SignalId::new("0")]).unwrap();
        assert!(up.changed);
        assert_eq!(up.envelope, build_envelope(&up.group).unwrap());
        assert_eq!(up.envelope.upper(), &[0.4, 0.5, 0.6]);
        assert_eq!(up.envelope.lower(), &[0.0, 0.25, 0.5]);
    }

    #[test]
    fn lower_bound_examples() {
        let env = build_envelope(&two_line_pair()).unwrap();
        let lb = lower_bound(&env, DEFAULT_TOLERANCE);
        assert_eq!(lb.delta_star, 0.5);
        assert_eq!(lb.witnesses, vec![0]);

        let flat = Envelope::from_curves(grid3(), vec![1.0; 3], vec![1.0; 3]).unwrap();
        let lb = lower_bound(&flat, DEFAULT_TOLERANCE);
        assert_eq!(lb.delta_star, 0.0);
        assert_eq!(lb.witnesses, vec![0, 1, 2]);

        let g2 = Grid::new(vec![0.0, 1.0]).unwrap();
        let env = Envelope::from_curves(g2, vec![2.0, 2.0], vec![1.0, 0.0]).unwrap();
        let lb = lower_bound(&env, DEFAULT_TOLERANCE);
        assert_eq!(lb.delta_star, 1.0);
        assert_eq!(lb.witnesses, vec![1]);
    }

    #[test]
    fn no_update_needed_examples() {
        let env = build_envelope(&two_line_pair()).unwrap();
        assert!(no_update_needed(&env, &[0.5, 0.5, 0.5], DEFAULT_TOLERANCE).unwrap());

        let band = Envelope::from_curves(grid3(), vec![0.1; 3], vec![-0.1; 3]).unwrap();
        assert!(!no_update_needed(&band, &[0.0, 0.5, 0.0], DEFAULT_TOLERANCE).unwrap());

        let flat = Envelope::from_curves(grid3(), vec![0.3; 3], vec![0.3; 3]).unwrap();
        assert!(no_update_needed(&flat, &[0.3; 3], DEFAULT_TOLERANCE).unwrap());
    }

    #[test]
    fn certificate_retention() {
        let g = Grid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let env = Envelope::from_curves(g.clone(), vec![1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let proto = [0.5, 0.5, 0.5];
        let nodes = [0, 1, 2];
        let sides = [Side::Upper, Side::Lower, Side::Upper];
        assert!(certificate_retained(&env, &proto, &nodes, &sides, 0.5, 1e-9).unwrap());
        let wider = Envelope::from_curves(g, vec![1.0, 0.0, 1.2], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(!certificate_retained(&wider, &proto, &nodes, &sides, 0.5, 1e-9).unwrap());
    }
}
