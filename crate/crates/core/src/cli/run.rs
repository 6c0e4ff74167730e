use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use super::document::{
    format_float, to_json, AssignmentDoc, CertificateDoc, CheckDocument, ClusterDoc, ConfigEcho, EnvelopeDocument,
    EventDoc, InputFingerprint, IterationDoc, RunDocument, VerdictDoc, SCHEMA_VERSION,
};
use super::ingest::ingest_csv;
use super::{ApproxArgs, CheckArgs, ClusterArgs, Command, EnvelopeArgs, InputArgs};
use crate::basis::Grid;
use crate::clustering::{k_medoid, BasisSpec, ClusterConfig, ClusterEvent, ClusteringState, Prototype};
use crate::envelope::{build_envelope, lower_bound, Envelope, Side, SignalGroup};
use crate::error::{Error, Result};
use crate::exchange::{Termination, WarmStart};
use crate::lpsolver::{build_lp, write_mps};
use crate::optimality::{check_alternation, check_subdifferential, deviation_profile, Certificate, OptimalityVerdict};

/// Runs one command and writes the human-readable report to `out`.
/// Returns the exit code; errors are left to the caller.
pub fn run(command: &Command, out: &mut dyn Write) -> Result<i32> {
    let start = Instant::now();
    let (mut tree, code) = match command {
        Command::Approx(a) => approx(a)?,
        Command::Cluster(a) => cluster(a)?,
        Command::Check(a) => check(a)?,
        Command::Envelope(a) => envelope(a)?,
    };
    tree.leaf(format!("elapsed: {:.3} ms", start.elapsed().as_secs_f64() * 1e3));
    let mut text = String::new();
    tree.render(&mut text);
    out.write_all(text.as_bytes()).map_err(|e| Error::Parse(format!("cannot write report: {e}")))?;
    Ok(code)
}

struct Node {
    label: String,
    children: Vec<Node>,
}

impl Node {
    fn new(label: impl Into<String>) -> Self {
        Node { label: label.into(), children: Vec::new() }
    }

    fn leaf(&mut self, label: impl Into<String>) {
        self.children.push(Node::new(label));
    }

    fn render(&self, out: &mut String) {
        out.push_str(&self.label);
        out.push('\n');
        render_children(&self.children, "", out);
    }
}

fn render_children(children: &[Node], prefix: &str, out: &mut String) {
    for (i, c) in children.iter().enumerate() {
        let last = i + 1 == children.len();
        out.push_str(prefix);
        out.push_str(if last { "└─ " } else { "├─ " });
        out.push_str(&c.label);
        out.push('\n');
        let deeper = format!("{prefix}{}", if last { "   " } else { "│  " });
        render_children(&c.children, &deeper, out);
    }
}

fn load(input: &InputArgs) -> Result<SignalGroup> {
    ingest_csv(&input.input, input.layout.into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn input_node(fp: &InputFingerprint) -> Node {
    Node::new(format!(
        "input: {} signals × {} points, t ∈ [{}, {}], sha256 {}",
        fp.signals,
        fp.grid_points,
        fp.t_first,
        fp.t_last,
        &fp.sha256[..16]
    ))
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Upper => "upper",
        Side::Lower => "lower",
    }
}

fn warm_name(w: &WarmStart) -> String {
    match w {
        WarmStart::Cold => "cold".into(),
        WarmStart::Used => "used".into(),
        WarmStart::Rejected(why) => format!("rejected: {why}"),
    }
}

fn prototype_certificate(p: &Prototype, grid: &Grid) -> CertificateDoc {
    match p.termination {
        Termination::OptimalDoublePoint => match p.double_point {
            Some(i) => CertificateDoc::DoublePoint { node: i, time: grid.points()[i] },
            None => CertificateDoc::None,
        },
        Termination::OptimalAlternation => match &p.certificate {
            Some(b) => CertificateDoc::Alternation {
                nodes: b.nodes().to_vec(),
                times: b.nodes().iter().map(|&i| grid.points()[i]).collect(),
                sides: b.sides().iter().map(|&s| side_name(s).to_owned()).collect(),
            },
            None => CertificateDoc::None,
        },
        Termination::IterationLimit => CertificateDoc::None,
    }
}

fn verdict_certificate(v: &OptimalityVerdict, grid: &Grid) -> CertificateDoc {
    match &v.certificate {
        Certificate::DoublePoint(i) => CertificateDoc::DoublePoint { node: *i, time: grid.points()[*i] },
        Certificate::Alternating { nodes, sides } => CertificateDoc::Alternation {
            nodes: nodes.clone(),
            times: nodes.iter().map(|&i| grid.points()[i]).collect(),
            sides: sides.iter().map(|&s| side_name(s).to_owned()).collect(),
        },
        _ => CertificateDoc::None,
    }
}

fn certificate_line(c: &CertificateDoc) -> String {
    match c {
        CertificateDoc::DoublePoint { node, time } => format!("certificate: double point at t = {time} (index {node})"),
        CertificateDoc::Alternation { times, sides, .. } => {
            let pts: Vec<String> = times
                .iter()
                .zip(sides)
                .map(|(t, s)| format!("{t}{}", if s == "upper" { "+" } else { "−" }))
                .collect();
            format!("certificate: alternation at {}", pts.join(" "))
        }
        CertificateDoc::None => "certificate: none".into(),
    }
}

fn coeff_line(coeffs: &[f64]) -> String {
    let c: Vec<String> = coeffs.iter().map(|v| v.to_string()).collect();
    format!("coefficients: [{}]", c.join(", "))
}

fn event_doc(e: &ClusterEvent) -> EventDoc {
    let blank = EventDoc {
        kind: String::new(),
        cluster: None,
        signal: None,
        from: None,
        rule: None,
        iterations: None,
        warm_start: None,
        delta: None,
    };
    match e {
        ClusterEvent::Moved { signal, from, to } => EventDoc {
            kind: "moved".into(),
            cluster: Some(*to),
            signal: Some(signal.as_str().to_owned()),
            from: *from,
            ..blank
        },
        ClusterEvent::Repaired { cluster, signal } => EventDoc {
            kind: "repaired".into(),
            cluster: Some(*cluster),
            signal: Some(signal.as_str().to_owned()),
            ..blank
        },
        ClusterEvent::Skipped { cluster, rule } => EventDoc {
            kind: "skipped".into(),
            cluster: Some(*cluster),
            rule: Some(rule.name().to_owned()),
            ..blank
        },
        ClusterEvent::Solved { cluster, iterations, warm, delta, .. } => EventDoc {
            kind: "solved".into(),
            cluster: Some(*cluster),
            iterations: Some(*iterations),
            warm_start: Some(warm_name(warm)),
            delta: Some(*delta),
            ..blank
        },
    }
}

fn cluster_docs(state: &ClusteringState, tol: f64) -> Vec<ClusterDoc> {
    let grid = state.signals().grid();
    let mut docs = Vec::new();
    for (index, c) in state.clusters().iter().enumerate() {
        let (Some(p), Some(env)) = (c.prototype(), c.envelope()) else { continue };
        docs.push(ClusterDoc {
            index,
            members: c.members().iter().map(|id| id.as_str().to_owned()).collect(),
            coefficients: p.coeffs.clone(),
            delta: p.delta,
            delta_star: lower_bound(env, tol).delta_star,
            termination: p.termination.name().to_owned(),
            certificate: prototype_certificate(p, grid),
            iterations: p.iterations,
            exchanges: p.exchanges,
            history: p.history.clone(),
        });
    }
    docs
}

fn run_document(command: &str, fp: InputFingerprint, config: ConfigEcho, state: &ClusteringState, converged: bool) -> RunDocument {
    RunDocument {
        schema_version: SCHEMA_VERSION,
        command: command.into(),
        input: fp,
        converged,
        outer_iterations: state.iterations(),
        clusters: cluster_docs(state, config.tol),
        config,
        assignment: state
            .signals()
            .ids()
            .iter()
            .zip(state.assignment())
            .map(|(id, &c)| AssignmentDoc { id: id.as_str().to_owned(), cluster: c })
            .collect(),
        log: state
            .log()
            .iter()
            .map(|l| IterationDoc {
                iteration: l.iteration,
                moves: l.moves,
                sum_delta: l.sum_delta,
                max_delta: l.max_delta,
                events: l.events.iter().map(event_doc).collect(),
            })
            .collect(),
    }
}

fn cluster_node(doc: &ClusterDoc) -> Node {
    let mut node = Node::new(format!("cluster {} ({} members)", doc.index, doc.members.len()));
    node.leaf(format!("Δ = {}  (Δ* = {})", doc.delta, doc.delta_star));
    node.leaf(format!("termination: {}", doc.termination));
    node.leaf(certificate_line(&doc.certificate));
    node.leaf(coeff_line(&doc.coefficients));
    node.leaf(format!("solver: {} iterations, {} exchanges", doc.iterations, doc.exchanges));
    node
}

/// One trace block: `(cluster, envelope, prototype values)`.
type TraceBlock<'a> = (usize, &'a Envelope, &'a [f64]);

fn write_trace(path: &Path, blocks: &[TraceBlock<'_>], with_cluster: bool) -> Result<()> {
    let io = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["t", "s_max", "s_min", "prototype", "upper_deviation", "lower_deviation"];
    if with_cluster {
        header.insert(0, "cluster");
    }
    w.write_record(&header).map_err(io)?;
    for &(c, env, values) in blocks {
        for (i, &t) in env.grid().points().iter().enumerate() {
            let (u, l, s) = (env.upper()[i], env.lower()[i], values[i]);
            let mut rec: Vec<String> = [t, u, l, s, u - s, s - l].iter().map(|&v| format_float(v)).collect();
            if with_cluster {
                rec.insert(0, c.to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn state_trace(state: &ClusteringState) -> Vec<TraceBlock<'_>> {
    state
        .clusters()
        .iter()
        .enumerate()
        .filter_map(|(c, cl)| Some((c, cl.envelope()?, cl.prototype()?.values.as_slice())))
        .collect()
}

fn approx(a: &ApproxArgs) -> Result<(Node, i32)> {
    let group = load(&a.input)?;
    let fp = InputFingerprint::of(&group);
    let spec = a.model.spec();
    let mut config = ClusterConfig::new(1, spec);
    config.solver = a.solver.into();
    config.tol = a.model.tol;
    config.max_iter = 1;
    config.solver_max_iter = a.max_iter;

    if let Some(path) = &a.lp_dump {
        let env = build_envelope(&group)?;
        let lp = build_lp(&env, &spec.build(group.grid())?)?;
        let file = File::create(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        write_mps(&lp, "CHEBCLUST", BufWriter::new(file))
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }

    let (state, _) = k_medoid(&group, &config)?;
    let optimal = state.clusters().iter().filter_map(|c| c.prototype()).all(|p| p.termination.is_optimal());
    let echo = ConfigEcho {
        degree: spec.degree(),
        basis: spec.name().into(),
        solver: config.solver.name().into(),
        tol: config.tol,
        max_iter: a.max_iter,
        k: None,
        seed: None,
        skip_rules: None,
    };
    let doc = run_document("approx", fp, echo, &state, optimal);
    outputs(&a.output.out, &doc)?;
    if let Some(path) = &a.output.trace_out {
        write_trace(path, &state_trace(&state), false)?;
    }

    let mut tree = Node::new("chebclust approx");
    tree.children.push(input_node(&doc.input));
    tree.leaf(format!(
        "model: {} degree {}, solver {}, tol {:e}",
        doc.config.basis, doc.config.degree, doc.config.solver, doc.config.tol
    ));
    for c in &doc.clusters {
        let mut node = cluster_node(c);
        node.label = "prototype".into();
        tree.children.push(node);
    }
    Ok((tree, if optimal { 0 } else { 1 }))
}

fn cluster(a: &ClusterArgs) -> Result<(Node, i32)> {
    let group = load(&a.input)?;
    let fp = InputFingerprint::of(&group);
    let spec = a.model.spec();
    let mut config = ClusterConfig::new(a.k, spec);
    config.solver = a.solver.into();
    config.tol = a.model.tol;
    config.max_iter = a.max_iter;
    config.solver_max_iter = a.solver_max_iter;
    config.seed = a.seed;
    config.skip_rules = !a.no_skip_rules;

    let (state, converged) = k_medoid(&group, &config)?;
    let optimal = state.clusters().iter().filter_map(|c| c.prototype()).all(|p| p.termination.is_optimal());
    let echo = ConfigEcho {
        degree: spec.degree(),
        basis: spec.name().into(),
        solver: config.solver.name().into(),
        tol: config.tol,
        max_iter: config.max_iter,
        k: Some(config.k),
        seed: Some(config.seed),
        skip_rules: Some(config.skip_rules),
    };
    let doc = run_document("cluster", fp, echo, &state, converged);
    outputs(&a.output.out, &doc)?;
    if let Some(path) = &a.output.trace_out {
        write_trace(path, &state_trace(&state), true)?;
    }

    let mut tree = Node::new("chebclust cluster");
    tree.children.push(input_node(&doc.input));
    tree.leaf(format!(
        "model: k = {}, {} degree {}, solver {}, seed {}, skip rules {}",
        config.k,
        doc.config.basis,
        doc.config.degree,
        doc.config.solver,
        config.seed,
        if config.skip_rules { "on" } else { "off" }
    ));
    let mut iters = Node::new(format!(
        "iterations: {} ({})",
        state.iterations(),
        if converged { "converged" } else { "not converged" }
    ));
    for l in state.log() {
        let solved = l.events.iter().filter(|e| matches!(e, ClusterEvent::Solved { .. })).count();
        let skipped = l.events.iter().filter(|e| matches!(e, ClusterEvent::Skipped { .. })).count();
        iters.leaf(format!(
            "{}: {} moves, {} solved, {} skipped, ΣΔ = {}, max Δ = {}",
            l.iteration, l.moves, solved, skipped, l.sum_delta, l.max_delta
        ));
    }
    tree.children.push(iters);
    for c in &doc.clusters {
        tree.children.push(cluster_node(c));
    }
    Ok((tree, if converged && optimal { 0 } else { 1 }))
}

fn outputs<T: serde::Serialize>(out: &Option<std::path::PathBuf>, doc: &T) -> Result<()> {
    match out {
        Some(path) => write_file(path, &to_json(doc)),
        None => Ok(()),
    }
}

fn parse_spec(basis: &str, degree: usize) -> Result<BasisSpec> {
    match basis {
        "monomial" => Ok(BasisSpec::Monomial { degree }),
        "chebyshev" => Ok(BasisSpec::Chebyshev { degree }),
        other => Err(Error::Parse(format!("unknown basis `{other}` in result document"))),
    }
}

/// Cluster index, member rows and prototype coefficients.
type CheckTarget = (usize, Vec<usize>, Vec<f64>);

fn check(a: &CheckArgs) -> Result<(Node, i32)> {
    let group = load(&a.input)?;
    let fp = InputFingerprint::of(&group);
    let grid = group.grid();

    let (spec, tol, targets): (BasisSpec, f64, Vec<CheckTarget>) = match (&a.from_result, &a.coeffs) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let doc: RunDocument = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: not a result document: {e}", path.display())))?;
            if doc.input.sha256 != fp.sha256 {
                return Err(Error::Invalid(format!(
                    "{} was produced from different input (sha256 {} vs {})",
                    path.display(),
                    &doc.input.sha256[..16.min(doc.input.sha256.len())],
                    &fp.sha256[..16]
                )));
            }
            let spec = parse_spec(&doc.config.basis, doc.config.degree)?;
            let mut targets = Vec::new();
            for c in doc.clusters {
                let rows = c
                    .members
                    .iter()
                    .map(|m| {
                        group
                            .ids()
                            .iter()
                            .position(|id| id.as_str() == m)
                            .ok_or_else(|| Error::NotFound(m.clone()))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                targets.push((c.index, rows, c.coefficients));
            }
            (spec, doc.config.tol, targets)
        }
        (None, Some(coeffs)) => (a.model.spec(), a.model.tol, vec![(0, (0..group.len()).collect(), coeffs.clone())]),
        (None, None) => return Err(Error::Invalid("either --coeffs or --from-result is required".into())),
    };
    let basis = spec.build(grid)?;

    let mut verdicts = Vec::new();
    let mut envelopes = Vec::new();
    let mut values = Vec::new();
    for (cluster, rows, coeffs) in targets {
        if coeffs.len() != basis.dimension() {
            return Err(Error::Dimension(format!(
                "{} coefficients given for a degree-{} basis (need {})",
                coeffs.len(),
                basis.degree(),
                basis.dimension()
            )));
        }
        let env = build_envelope(&group.subset(&rows))?;
        let profile = deviation_profile(&env, &basis, &coeffs)?;
        let alt = check_alternation(&profile, basis.degree());
        let sub = check_subdifferential(&profile, &basis, grid)?;
        verdicts.push(VerdictDoc {
            cluster,
            delta: profile.delta,
            delta_star: lower_bound(&env, tol).delta_star,
            optimal: alt.optimal && sub.optimal,
            alternation: alt.reason.name().into(),
            alternation_certificate: verdict_certificate(&alt, grid),
            subdifferential: if sub.optimal { "accepted" } else { "rejected" }.into(),
            improving_direction: sub.improving_direction.clone(),
            coefficients: coeffs.clone(),
        });
        values.push(basis.evaluate_on_grid(&coeffs, grid)?);
        envelopes.push(env);
    }
    let doc = CheckDocument {
        schema_version: SCHEMA_VERSION,
        command: "check".into(),
        input: fp,
        config: ConfigEcho {
            degree: spec.degree(),
            basis: spec.name().into(),
            solver: "none".into(),
            tol,
            max_iter: 0,
            k: None,
            seed: None,
            skip_rules: None,
        },
        verdicts,
    };
    outputs(&a.output.out, &doc)?;
    if let Some(path) = &a.output.trace_out {
        let blocks: Vec<TraceBlock<'_>> = doc
            .verdicts
            .iter()
            .zip(&envelopes)
            .zip(&values)
            .map(|((v, e), s)| (v.cluster, e, s.as_slice()))
            .collect();
        write_trace(path, &blocks, a.from_result.is_some())?;
    }

    let mut tree = Node::new("chebclust check");
    tree.children.push(input_node(&doc.input));
    tree.leaf(format!("model: {} degree {}", doc.config.basis, doc.config.degree));
    for v in &doc.verdicts {
        let mut node = Node::new(format!(
            "cluster {}: {}",
            v.cluster,
            if v.optimal { "optimal" } else { "not optimal" }
        ));
        node.leaf(format!("Δ = {}  (Δ* = {})", v.delta, v.delta_star));
        node.leaf(format!("alternation: {}", v.alternation));
        node.leaf(certificate_line(&v.alternation_certificate));
        node.leaf(format!("subdifferential: {}", v.subdifferential));
        if let Some(d) = &v.improving_direction {
            node.leaf(format!("improving direction: {}", coeff_line(d).trim_start_matches("coefficients: ")));
        }
        tree.children.push(node);
    }
    Ok((tree, 0))
}

fn envelope(a: &EnvelopeArgs) -> Result<(Node, i32)> {
    let group = load(&a.input)?;
    let fp = InputFingerprint::of(&group);
    let env = build_envelope(&group)?;
    let lb = lower_bound(&env, a.tol);
    let doc = EnvelopeDocument {
        schema_version: SCHEMA_VERSION,
        command: "envelope".into(),
        input: fp,
        t: env.grid().points().to_vec(),
        s_max: env.upper().to_vec(),
        s_min: env.lower().to_vec(),
        delta_star: lb.delta_star,
        witnesses: lb.witnesses.clone(),
    };
    outputs(&a.output.out, &doc)?;
    if let Some(path) = &a.output.trace_out {
        let io = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(["t", "s_max", "s_min"]).map_err(io)?;
        for ((t, u), l) in doc.t.iter().zip(&doc.s_max).zip(&doc.s_min) {
            w.write_record([format_float(*t), format_float(*u), format_float(*l)]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    }
    let mut tree = Node::new("chebclust envelope");
    tree.children.push(input_node(&doc.input));
    let times: Vec<String> = lb.witnesses.iter().map(|&i| env.grid().points()[i].to_string()).collect();
    tree.leaf(format!("Δ* = {} at t = {}", lb.delta_star, times.join(", ")));
    Ok((tree, 0))
}
