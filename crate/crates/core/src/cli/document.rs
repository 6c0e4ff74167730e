//! Machine-readable run documents.
//!
//! Documents are JSON with a `schema_version` field. Every float is written
//! with 17 significant digits so values survive a round trip exactly.

use std::io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envelope::SignalGroup;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub grid_points: usize,
    pub signals: usize,
    pub t_first: f64,
    pub t_last: f64,
    /// SHA-256 over the grid, ids and values.
    pub sha256: String,
}

impl InputFingerprint {
    pub fn of(group: &SignalGroup) -> Self {
        let mut h = Sha256::new();
        let points = group.grid().points();
        h.update((points.len() as u64).to_le_bytes());
        for t in points {
            h.update(t.to_bits().to_le_bytes());
        }
        for (id, row) in group.ids().iter().zip(group.samples()) {
            h.update((id.as_str().len() as u64).to_le_bytes());
            h.update(id.as_str().as_bytes());
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let sha256 = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        InputFingerprint {
            grid_points: points.len(),
            signals: group.len(),
            t_first: points[0],
            t_last: points[points.len() - 1],
            sha256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub degree: usize,
    pub basis: String,
    pub solver: String,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skip_rules: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateDoc {
    Alternation { nodes: Vec<usize>, times: Vec<f64>, sides: Vec<String> },
    DoublePoint { node: usize, time: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub index: usize,
    pub members: Vec<String>,
    pub coefficients: Vec<f64>,
    pub delta: f64,
    pub delta_star: f64,
    pub termination: String,
    pub certificate: CertificateDoc,
    pub iterations: usize,
    pub exchanges: usize,
    /// Levelled deviation of each exchange interpolation.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub id: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDoc {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cluster: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub signal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warm_start: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDoc {
    pub iteration: usize,
    pub moves: usize,
    pub sum_delta: f64,
    pub max_delta: f64,
    pub events: Vec<EventDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub schema_version: u32,
    pub command: String,
    pub input: InputFingerprint,
    pub config: ConfigEcho,
    pub converged: bool,
    pub outer_iterations: usize,
    pub clusters: Vec<ClusterDoc>,
    pub assignment: Vec<AssignmentDoc>,
    pub log: Vec<IterationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDoc {
    pub cluster: usize,
    pub coefficients: Vec<f64>,
    pub delta: f64,
    pub delta_star: f64,
    pub optimal: bool,
    pub alternation: String,
    pub alternation_certificate: CertificateDoc,
    pub subdifferential: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub improving_direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckDocument {
    pub schema_version: u32,
    pub command: String,
    pub input: InputFingerprint,
    pub config: ConfigEcho,
    pub verdicts: Vec<VerdictDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDocument {
    pub schema_version: u32,
    pub command: String,
    pub input: InputFingerprint,
    pub t: Vec<f64>,
    pub s_max: Vec<f64>,
    pub s_min: Vec<f64>,
    pub delta_star: f64,
    pub witnesses: Vec<usize>,
}

/// Pretty JSON with every float as `d.dddddddddddddddde±x`.
struct Precise {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{}", format_float(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut buf = Vec::new();
    let fmt = Precise { inner: serde_json::ser::PrettyFormatter::with_indent(b"  ") };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    doc.serialize(&mut ser).expect("documents serialize to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Grid;

    #[test]
    fn floats_round_trip_exactly() {
        let doc = EnvelopeDocument {
            schema_version: SCHEMA_VERSION,
            command: "envelope".into(),
            input: InputFingerprint::of(
                &SignalGroup::from_rows(Grid::new(vec![0.0, 0.1]).unwrap(), vec![vec![0.1 + 0.2, 1.0 / 3.0]]).unwrap(),
            ),
            t: vec![0.0, 0.1],
            s_max: vec![0.1 + 0.2, 1.0 / 3.0],
            s_min: vec![-1e-300, 5e-324],
            delta_star: 0.0,
            witnesses: vec![0, 1],
        };
        let text = to_json(&doc);
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        let back: EnvelopeDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn fingerprint_depends_on_values() {
        let g = Grid::new(vec![0.0, 1.0]).unwrap();
        let a = InputFingerprint::of(&SignalGroup::from_rows(g.clone(), vec![vec![0.0, 1.0]]).unwrap());
        let b = InputFingerprint::of(&SignalGroup::from_rows(g, vec![vec![0.0, 1.5]]).unwrap());
        assert_ne!(a.sha256, b.sha256);
        assert_eq!(a.sha256.len(), 64);
    }
}
