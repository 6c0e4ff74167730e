//! k-medoid style clustering of signals under the uniform norm.
//!
//! Each cluster is represented by the prototype minimising the maximal
//! deviation from its members. The outer loop alternates nearest-prototype
//! assignment with prototype recomputation. A prototype is kept without a
//! solve when
//!
//! 1. the cluster envelope did not change,
//! 2. the incumbent's alternation certificate still holds on the new
//!    envelope, or
//! 3. some grid point has an envelope gap of twice the incumbent's maximal
//!    deviation, so nothing can do better.
//!
//! Otherwise the exchange solver is restarted from the previous certificate.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{ChebyshevBasis, Grid};
use crate::envelope::{
    build_envelope, certificate_retained, no_update_needed, update_envelope, Envelope, SignalGroup, SignalId,
    DEFAULT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::exchange::{solve_exchange, ExchangeOptions, ReferenceBasis, Termination, WarmStart};
use crate::lpsolver::{build_lp, solve_simplex, LpStatus, DEFAULT_LIMIT};
use crate::optimality::{check_alternation, deviation_profile, Certificate};

/// Largest allowed gap between the exchange and LP objectives in cross-check mode.
pub const CROSS_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSpec {
    Monomial { degree: usize },
    /// Chebyshev polynomials on the grid interval.
    Chebyshev { degree: usize },
}

impl BasisSpec {
    pub fn degree(self) -> usize {
        match self {
            BasisSpec::Monomial { degree } | BasisSpec::Chebyshev { degree } => degree,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisSpec::Monomial { .. } => "monomial",
            BasisSpec::Chebyshev { .. } => "chebyshev",
        }
    }

    pub fn build(self, grid: &Grid) -> Result<ChebyshevBasis> {
        match self {
            BasisSpec::Monomial { degree } => Ok(ChebyshevBasis::monomial(degree)),
            BasisSpec::Chebyshev { degree } => ChebyshevBasis::chebyshev(degree, grid.a(), grid.b()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Exchange,
    Lp,
    /// Both solvers; their objectives must agree within [`CROSS_CHECK_TOL`].
    CrossCheck,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Exchange => "exchange",
            SolverChoice::Lp => "lp",
            SolverChoice::CrossCheck => "cross-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    pub basis: BasisSpec,
    pub solver: SolverChoice,
    /// Maximum number of outer (assign + update) iterations.
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub skip_rules: bool,
    /// Interpolation-solve limit per exchange run.
    pub solver_max_iter: usize,
}

impl ClusterConfig {
    pub fn new(k: usize, basis: BasisSpec) -> Self {
        ClusterConfig {
            k,
            basis,
            solver: SolverChoice::Exchange,
            max_iter: 100,
            tol: DEFAULT_TOLERANCE,
            seed: 0,
            skip_rules: true,
            solver_max_iter: ExchangeOptions::default().max_iter,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("max iterations must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::Invalid(format!("tolerance {} is not a nonnegative number", self.tol)));
        }
        Ok(())
    }

    fn exchange_options(&self) -> ExchangeOptions {
        ExchangeOptions { tol: self.tol, max_iter: self.solver_max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub coeffs: Vec<f64>,
    /// Prototype values on the grid.
    pub values: Vec<f64>,
    /// Maximal deviation from the cluster envelope.
    pub delta: f64,
    /// Alternation basis certifying `delta`; also the next warm start.
    pub certificate: Option<ReferenceBasis>,
    /// Point where both sides attain `delta`, when that certifies it.
    pub double_point: Option<usize>,
    pub termination: Termination,
    /// Solver iterations: interpolation solves, or simplex pivots for the LP.
    pub iterations: usize,
    pub exchanges: usize,
    /// Levelled deviation per exchange interpolation; empty for the LP.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipRule {
    EnvelopeUnchanged,
    CertificateRetained,
    NoUpdateNeeded,
}

impl SkipRule {
    pub fn name(self) -> &'static str {
        match self {
            SkipRule::EnvelopeUnchanged => "envelope-unchanged",
            SkipRule::CertificateRetained => "certificate-retained",
            SkipRule::NoUpdateNeeded => "no-update-needed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterEvent {
    Moved { signal: SignalId, from: Option<usize>, to: usize },
    Repaired { cluster: usize, signal: SignalId },
    Skipped { cluster: usize, rule: SkipRule },
    Solved { cluster: usize, iterations: usize, exchanges: usize, warm: WarmStart, delta: f64, termination: Termination },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    /// 0 for the initial prototypes.
    pub iteration: usize,
    pub moves: usize,
    pub events: Vec<ClusterEvent>,
    pub sum_delta: f64,
    pub max_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    group: Option<SignalGroup>,
    envelope: Option<Envelope>,
    prototype: Option<Prototype>,
}

impl Cluster {
    fn empty() -> Self {
        Cluster { group: None, envelope: None, prototype: None }
    }

    pub fn members(&self) -> &[SignalId] {
        self.group.as_ref().map_or(&[], |g| g.ids())
    }

    pub fn group(&self) -> Option<&SignalGroup> {
        self.group.as_ref()
    }

    pub fn envelope(&self) -> Option<&Envelope> {
        self.envelope.as_ref()
    }

    pub fn prototype(&self) -> Option<&Prototype> {
        self.prototype.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringState {
    signals: SignalGroup,
    basis: ChebyshevBasis,
    assignment: Vec<usize>,
    clusters: Vec<Cluster>,
    iterations: usize,
    log: Vec<IterationLog>,
}

impl ClusteringState {
    /// State with the given assignment and no prototypes yet.
    pub fn new(signals: SignalGroup, basis: ChebyshevBasis, assignment: Vec<usize>, k: usize) -> Result<Self> {
        if assignment.len() != signals.len() {
            return Err(Error::Dimension(format!(
                "{} assignments for {} signals",
                assignment.len(),
                signals.len()
            )));
        }
        if let Some(&c) = assignment.iter().find(|&&c| c >= k) {
            return Err(Error::Invalid(format!("cluster index {c} is out of range for k = {k}")));
        }
        Ok(ClusteringState {
            signals,
            basis,
            assignment,
            clusters: vec![Cluster::empty(); k],
            iterations: 0,
            log: Vec::new(),
        })
    }

    pub fn signals(&self) -> &SignalGroup {
        &self.signals
    }

    pub fn basis(&self) -> &ChebyshevBasis {
        &self.basis
    }

    /// Cluster index per signal row.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, id: &SignalId) -> Option<usize> {
        self.signals.position(id).map(|r| self.assignment[r])
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn log(&self) -> &[IterationLog] {
        &self.log
    }

    /// Prototype values of every cluster; `None` for clusters never solved.
    pub fn prototype_values(&self) -> Vec<Option<&[f64]>> {
        self.clusters
            .iter()
            .map(|c| c.prototype.as_ref().map(|p| p.values.as_slice()))
            .collect()
    }

    /// Adds signals to `cluster` and updates the affected prototypes.
    pub fn insert_signals(
        &mut self,
        added: &[(SignalId, Vec<f64>)],
        cluster: usize,
        config: &ClusterConfig,
    ) -> Result<Vec<ClusterEvent>> {
        if cluster >= self.k() {
            return Err(Error::Invalid(format!("cluster index {cluster} is out of range")));
        }
        self.signals = self.signals.with_changes(added, &[])?;
        self.assignment.extend(std::iter::repeat_n(cluster, added.len()));
        let events = update_prototypes(self, config)?;
        self.push_log(0, events.clone());
        Ok(events)
    }

    /// Removes signals and updates the affected prototypes.
    pub fn remove_signals(&mut self, removed: &[SignalId], config: &ClusterConfig) -> Result<Vec<ClusterEvent>> {
        let gone: HashSet<&SignalId> = removed.iter().collect();
        let signals = self.signals.with_changes(&[], removed)?;
        self.assignment = self
            .signals
            .ids()
            .iter()
            .zip(&self.assignment)
            .filter(|(id, _)| !gone.contains(id))
            .map(|(_, &c)| c)
            .collect();
        self.signals = signals;
        let events = update_prototypes(self, config)?;
        self.push_log(0, events.clone());
        Ok(events)
    }

    fn push_log(&mut self, moves: usize, events: Vec<ClusterEvent>) {
        let (sum_delta, max_delta) = self.delta_summary();
        self.log.push(IterationLog { iteration: self.iterations, moves, events, sum_delta, max_delta });
    }

    fn delta_summary(&self) -> (f64, f64) {
        let deltas = self.clusters.iter().filter_map(|c| c.prototype.as_ref().map(|p| p.delta));
        deltas.fold((0.0f64, 0.0f64), |(s, m), d| (s + d, m.max(d)))
    }
}

/// `max_i |signal_i − prototype_i|`.
pub fn chebyshev_distance(signal: &[f64], prototype: &[f64]) -> Result<f64> {
    if signal.len() != prototype.len() {
        return Err(Error::Dimension(format!(
            "signal has {} values, prototype has {}",
            signal.len(),
            prototype.len()
        )));
    }
    Ok(signal.iter().zip(prototype).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Nearest-prototype assignment. A signal keeps its current cluster on an
/// exact tie with it; other ties go to the lowest cluster index. Clusters
/// without a prototype attract nobody.
pub fn assign(signals: &SignalGroup, prototypes: &[Option<&[f64]>], current: Option<&[usize]>) -> Result<Vec<usize>> {
    if prototypes.iter().all(Option::is_none) {
        return Err(Error::EmptyInput("assignment needs at least one prototype".into()));
    }
    let mut out = Vec::with_capacity(signals.len());
    for (r, row) in signals.samples().iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        let mut dists = vec![f64::INFINITY; prototypes.len()];
        for (c, p) in prototypes.iter().enumerate() {
            let Some(p) = p else { continue };
            let d = chebyshev_distance(row, p)?;
            dists[c] = d;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        let (mut choice, bd) = best.expect("some prototype exists");
        if let Some(&inc) = current.and_then(|cur| cur.get(r)) {
            if inc < dists.len() && dists[inc] == bd {
                choice = inc;
            }
        }
        out.push(choice);
    }
    Ok(out)
}

/// Farthest-first seeding. The first anchor is the signal of largest sup
/// norm; each further anchor maximises its distance to the anchors so far.
/// The seed only breaks exact ties. Anchors own their clusters; the other
/// signals join the nearest anchor.
pub fn initialize_assignment(signals: &SignalGroup, k: usize, seed: u64) -> Result<Vec<usize>> {
    let l = signals.len();
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if l < k {
        return Err(Error::InsufficientData(format!("{l} signals cannot form {k} clusters")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = signals.samples();
    let norms: Vec<f64> = rows.iter().map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
    let mut anchors = vec![pick_max(&norms, &[], &mut rng)];
    let mut nearest: Vec<f64> = rows.iter().map(|r| chebyshev_distance(r, &rows[anchors[0]])).collect::<Result<_>>()?;
    while anchors.len() < k {
        let next = pick_max(&nearest, &anchors, &mut rng);
        anchors.push(next);
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(chebyshev_distance(r, &rows[next])?);
        }
    }
    let anchor_of: HashMap<usize, usize> = anchors.iter().enumerate().map(|(c, &r)| (r, c)).collect();
    let mut out = Vec::with_capacity(l);
    for (r, row) in rows.iter().enumerate() {
        if let Some(&c) = anchor_of.get(&r) {
            out.push(c);
            continue;
        }
        let mut best = (0, f64::INFINITY);
        for (c, &a) in anchors.iter().enumerate() {
            let d = chebyshev_distance(row, &rows[a])?;
            if d < best.1 {
                best = (c, d);
            }
        }
        out.push(best.0);
    }
    Ok(out)
}

fn pick_max(values: &[f64], excluded: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let best = values
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(i, v)| !excluded.contains(i) && **v == best)
        .map(|(i, _)| i)
        .collect();
    *ties.choose(rng).expect("at least one candidate")
}

enum Update {
    Skip(SkipRule, Option<Prototype>),
    Solved(Prototype, usize, usize, WarmStart),
}

struct ClusterResult {
    group: SignalGroup,
    envelope: Envelope,
    update: Update,
}

/// Recomputes the prototypes of clusters whose membership changed.
pub fn update_prototypes(state: &mut ClusteringState, config: &ClusterConfig) -> Result<Vec<ClusterEvent>> {
    let k = state.k();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (r, &c) in state.assignment.iter().enumerate() {
        members[c].push(r);
    }
    let results: Vec<Option<ClusterResult>> = (0..k)
        .into_par_iter()
        .map(|c| update_cluster(state, &members[c], c, config))
        .collect::<Result<_>>()?;

    let mut events = Vec::new();
    for (c, res) in results.into_iter().enumerate() {
        let cluster = &mut state.clusters[c];
        let Some(res) = res else {
            if members[c].is_empty() {
                *cluster = Cluster::empty();
            } else {
                events.push(ClusterEvent::Skipped { cluster: c, rule: SkipRule::EnvelopeUnchanged });
            }
            continue;
        };
        cluster.group = Some(res.group);
        cluster.envelope = Some(res.envelope);
        match res.update {
            Update::Skip(rule, proto) => {
                if let Some(p) = proto {
                    cluster.prototype = Some(p);
                }
                events.push(ClusterEvent::Skipped { cluster: c, rule });
            }
            Update::Solved(p, iterations, exchanges, warm) => {
                events.push(ClusterEvent::Solved {
                    cluster: c,
                    iterations,
                    exchanges,
                    warm,
                    delta: p.delta,
                    termination: p.termination,
                });
                cluster.prototype = Some(p);
            }
        }
    }
    Ok(events)
}

/// `None` when the membership is unchanged (or the cluster is empty).
fn update_cluster(
    state: &ClusteringState,
    rows: &[usize],
    c: usize,
    config: &ClusterConfig,
) -> Result<Option<ClusterResult>> {
    let cluster = &state.clusters[c];
    if rows.is_empty() {
        return Ok(None);
    }
    let ids: Vec<&SignalId> = rows.iter().map(|&r| &state.signals.ids()[r]).collect();
    let (group, envelope, changed) = match (&cluster.group, &cluster.envelope, &cluster.prototype) {
        (Some(old), Some(env), Some(_)) => {
            let old_ids: HashSet<&SignalId> = old.ids().iter().collect();
            let new_ids: HashSet<&SignalId> = ids.iter().copied().collect();
            if old_ids == new_ids {
                return Ok(None);
            }
            let removed: Vec<SignalId> = old.ids().iter().filter(|id| !new_ids.contains(id)).cloned().collect();
            let added: Vec<(SignalId, Vec<f64>)> = rows
                .iter()
                .filter(|&&r| !old_ids.contains(&state.signals.ids()[r]))
                .map(|&r| (state.signals.ids()[r].clone(), state.signals.samples()[r].clone()))
                .collect();
            let upd = update_envelope(env, old, &added, &removed)?;
            (upd.group, upd.envelope, upd.changed)
        }
        _ => {
            let group = state.signals.subset(rows);
            let envelope = build_envelope(&group)?;
            (group, envelope, true)
        }
    };

    if config.skip_rules {
        if let Some(incumbent) = &cluster.prototype {
            if !changed {
                return Ok(Some(ClusterResult { group, envelope, update: Update::Skip(SkipRule::EnvelopeUnchanged, None) }));
            }
            if let Some(cert) = incumbent.certificate.as_ref().filter(|_| incumbent.termination == Termination::OptimalAlternation) {
                if certificate_retained(&envelope, &incumbent.values, cert.nodes(), cert.sides(), incumbent.delta, config.tol)? {
                    return Ok(Some(ClusterResult {
                        group,
                        envelope,
                        update: Update::Skip(SkipRule::CertificateRetained, None),
                    }));
                }
            }
            if no_update_needed(&envelope, &incumbent.values, config.tol)? {
                let delta = envelope.max_deviation(&incumbent.values)?;
                let double_point = envelope
                    .upper()
                    .iter()
                    .zip(envelope.lower())
                    .position(|(u, l)| (0.5 * (u - l) - delta).abs() <= config.tol);
                let proto = Prototype {
                    delta,
                    double_point,
                    termination: Termination::OptimalDoublePoint,
                    ..incumbent.clone()
                };
                return Ok(Some(ClusterResult {
                    group,
                    envelope,
                    update: Update::Skip(SkipRule::NoUpdateNeeded, Some(proto)),
                }));
            }
        }
    }

    let warm = cluster.prototype.as_ref().and_then(|p| p.certificate.as_ref());
    let (proto, iterations, exchanges, warm_state) = solve_cluster(&envelope, &state.basis, warm, config)?;
    Ok(Some(ClusterResult { group, envelope, update: Update::Solved(proto, iterations, exchanges, warm_state) }))
}

fn solve_cluster(
    env: &Envelope,
    basis: &ChebyshevBasis,
    warm: Option<&ReferenceBasis>,
    config: &ClusterConfig,
) -> Result<(Prototype, usize, usize, WarmStart)> {
    let exchange = |warm| -> Result<_> {
        let rep = solve_exchange(env, basis, warm, &config.exchange_options())?;
        let values = basis.evaluate_on_grid(&rep.coeffs, env.grid())?;
        let certificate = match rep.termination {
            Termination::OptimalAlternation => rep.basis.clone(),
            _ => rep.basis.clone().or_else(|| warm.cloned()),
        };
        let proto = Prototype {
            coeffs: rep.coeffs,
            values,
            delta: rep.delta,
            certificate,
            double_point: rep.double_point,
            termination: rep.termination,
            iterations: rep.iterations,
            exchanges: rep.exchanges,
            history: rep.history,
        };
        Ok((proto, rep.iterations, rep.exchanges, rep.warm))
    };
    match config.solver {
        SolverChoice::Exchange => exchange(warm),
        SolverChoice::Lp => {
            let proto = solve_lp(env, basis, warm)?;
            let iterations = proto.iterations;
            Ok((proto, iterations, 0, WarmStart::Cold))
        }
        SolverChoice::CrossCheck => {
            let out = exchange(warm)?;
            let lp = solve_lp(env, basis, warm)?;
            if (out.0.delta - lp.delta).abs() > CROSS_CHECK_TOL {
                return Err(Error::SolverDisagreement { exchange: out.0.delta, lp: lp.delta });
            }
            Ok(out)
        }
    }
}

/// LP prototype; the certificate is read off the deviation profile.
fn solve_lp(env: &Envelope, basis: &ChebyshevBasis, previous: Option<&ReferenceBasis>) -> Result<Prototype> {
    let sol = solve_simplex(&build_lp(env, basis)?, DEFAULT_LIMIT);
    if sol.status != LpStatus::Optimal {
        return Err(Error::NotConverged(format!("linear program ended with status {:?}", sol.status)));
    }
    let coeffs = sol.x[..basis.dimension()].to_vec();
    let profile = deviation_profile(env, basis, &coeffs)?;
    let verdict = check_alternation(&profile, basis.degree());
    let (certificate, double_point, termination) = match verdict.certificate {
        Certificate::Alternating { nodes, sides } => {
            (Some(ReferenceBasis::new(nodes, sides)?), None, Termination::OptimalAlternation)
        }
        Certificate::DoublePoint(i) => (previous.cloned(), Some(i), Termination::OptimalDoublePoint),
        _ => (previous.cloned(), None, Termination::IterationLimit),
    };
    Ok(Prototype {
        values: basis.evaluate_on_grid(&coeffs, env.grid())?,
        coeffs,
        delta: profile.delta,
        certificate,
        double_point,
        termination,
        iterations: sol.iterations,
        exchanges: 0,
        history: Vec::new(),
    })
}

/// Moves into each empty cluster the signal farthest from its own prototype,
/// never taking the last member of a cluster.
fn repair_empty(state: &ClusteringState, assignment: &mut [usize]) -> Result<Vec<ClusterEvent>> {
    let k = state.k();
    let mut events = Vec::new();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return Ok(events);
        };
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in state.signals.samples().iter().enumerate() {
            let own = assignment[r];
            if counts[own] < 2 {
                continue;
            }
            let Some(p) = state.clusters[own].prototype.as_ref() else { continue };
            let d = chebyshev_distance(row, &p.values)?;
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((r, d));
            }
        }
        let (r, _) = best.ok_or_else(|| Error::InsufficientData("no signal available to refill an empty cluster".into()))?;
        assignment[r] = empty;
        events.push(ClusterEvent::Repaired { cluster: empty, signal: state.signals.ids()[r].clone() });
    }
}

/// Full clustering run. Returns the final state and whether the last
/// assignment pass moved no signal.
pub fn k_medoid(signals: &SignalGroup, config: &ClusterConfig) -> Result<(ClusteringState, bool)> {
    config.validate()?;
    if signals.len() < config.k {
        return Err(Error::InsufficientData(format!(
            "{} signals cannot form {} clusters",
            signals.len(),
            config.k
        )));
    }
    let grid = signals.grid();
    let basis = config.basis.build(grid)?;
    if grid.len() < basis.dimension() + 1 {
        return Err(Error::InsufficientData(format!(
            "{} grid points cannot support a degree-{} prototype (need {})",
            grid.len(),
            basis.degree(),
            basis.dimension() + 1
        )));
    }
    let initial = initialize_assignment(signals, config.k, config.seed)?;
    let mut state = ClusteringState::new(signals.clone(), basis, initial, config.k)?;
    let events = update_prototypes(&mut state, config)?;
    state.push_log(0, events);

    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(state.assignment.clone());
    let mut converged = false;
    while state.iterations < config.max_iter {
        state.iterations += 1;
        let mut next = assign(&state.signals, &state.prototype_values(), Some(&state.assignment))?;
        let mut events: Vec<ClusterEvent> = Vec::new();
        events.extend(repair_empty(&state, &mut next)?);
        let mut moves = 0;
        for (r, (&old, &new)) in state.assignment.iter().zip(&next).enumerate() {
            if old != new {
                moves += 1;
                events.push(ClusterEvent::Moved { signal: state.signals.ids()[r].clone(), from: Some(old), to: new });
            }
        }
        if moves == 0 {
            state.push_log(0, events);
            converged = true;
            break;
        }
        let cycle = !seen.insert(next.clone());
        state.assignment = next;
        events.extend(update_prototypes(&mut state, config)?);
        state.push_log(moves, events);
        if cycle {
            break;
        }
    }
    Ok((state, converged))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(chebyshev_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(chebyshev_distance(&[1.0, 0.75, 0.5], &[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(chebyshev_distance(&[0.0, 0.0], &[1.0, -2.0]).unwrap(), 2.0);
        assert!(chebyshev_distance(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn assign_examples() {
        let g = SignalGroup::from_rows(grid3(), vec![vec![0.4; 3], vec![0.5; 3]]).unwrap();
        let zero = vec![0.0; 3];
        let one = vec![1.0; 3];
        let a = assign(&g, &[Some(&zero), Some(&one)], None).unwrap();
        assert_eq!(a, vec![0, 0]);
        let a = assign(&g, &[Some(&zero), Some(&one)], Some(&[1, 1])).unwrap();
        assert_eq!(a, vec![0, 1]);
        let a = assign(&g, &[Some(&one)], None).unwrap();
        assert_eq!(a, vec![0, 0]);
    }

    #[test]
    fn farthest_first_seeds_each_bundle() {
        let rows = vec![vec![0.0; 3], vec![0.0; 3], vec![5.0; 3], vec![5.0; 3]];
        let g = SignalGroup::from_rows(grid3(), rows).unwrap();
        let a = initialize_assignment(&g, 2, 3).unwrap();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
        assert_eq!(initialize_assignment(&g, 1, 0).unwrap(), vec![0; 4]);
        let mut all = initialize_assignment(&g, 4, 9).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_line_pair_single_cluster() {
        let g = SignalGroup::from_rows(grid3(), vec![vec![1.0, 0.75, 0.5], vec![0.0, 0.25, 0.5]]).unwrap();
        let (state, converged) = k_medoid(&g, &ClusterConfig::new(1, BasisSpec::Monomial { degree: 1 })).unwrap();
        assert!(converged);
        let p = state.clusters()[0].prototype().unwrap();
        assert!((p.delta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_many_clusters() {
        let g = SignalGroup::from_rows(grid3(), vec![vec![0.0; 3]]).unwrap();
        let r = k_medoid(&g, &ClusterConfig::new(2, BasisSpec::Monomial { degree: 0 }));
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn no_changes_means_all_skips() {
        let g = SignalGroup::from_rows(grid3(), vec![vec![0.0; 3], vec![1.0; 3], vec![9.0; 3]]).unwrap();
        let config = ClusterConfig::new(2, BasisSpec::Monomial { degree: 0 });
        let (mut state, _) = k_medoid(&g, &config).unwrap();
        let events = update_prototypes(&mut state, &config).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| matches!(e, ClusterEvent::Skipped { rule: SkipRule::EnvelopeUnchanged, .. })));
    }

    #[test]
    fn insert_and_remove_signals() {
        let g = SignalGroup::from_rows(grid3(), vec![vec![1.0, 0.75, 0.5], vec![0.0, 0.25, 0.5]]).unwrap();
        let config = ClusterConfig::new(1, BasisSpec::Monomial { degree: 1 });
        let (mut state, _) = k_medoid(&g, &config).unwrap();
        let before = state.clusters()[0].prototype().unwrap().clone();
        let ev = state.insert_signals(&[(SignalId::new("mid"), vec![0.5, 0.5, 0.5])], 0, &config).unwrap();
        assert_eq!(ev, vec![ClusterEvent::Skipped { cluster: 0, rule: SkipRule::EnvelopeUnchanged }]);
        assert_eq!(state.clusters()[0].prototype().unwrap(), &before);
        assert_eq!(state.cluster_of(&SignalId::new("mid")), Some(0));

        let ev = state.remove_signals(&[SignalId::new("0")], &config).unwrap();
        assert!(matches!(ev[0], ClusterEvent::Solved { .. }));
        assert_eq!(state.signals().len(), 2);
        assert_eq!(state.assignment().len(), 2);
        let p = state.clusters()[0].prototype().unwrap();
        assert!(p.delta <= before.delta + 1e-9);
    }
}
