//! CSV ingestion.
//!
//! Wide layout: the first row holds the grid times after one label cell; each
//! further row is a signal id followed by its values.
//!
//! Long layout: rows `id, t, value` with an optional header row. The grid is
//! the sorted union of all times and every signal must cover all of it.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::basis::Grid;
use crate::envelope::{SignalGroup, SignalId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Wide,
    Long,
}

pub fn ingest_csv(path: &Path, layout: Layout) -> Result<SignalGroup> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    match layout {
        Layout::Wide => read_wide(file),
        Layout::Long => read_long(file),
    }
}

fn records<R: Read>(reader: R) -> Result<Vec<(u64, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn number(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {what} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: {what} `{field}` is not finite")));
    }
    Ok(v)
}

pub fn read_wide<R: Read>(reader: R) -> Result<SignalGroup> {
    let rows = records(reader)?;
    let Some(((head_line, header), body)) = rows.split_first() else {
        return Err(Error::Parse("input is empty".into()));
    };
    if header.len() < 2 {
        return Err(Error::Parse(format!("line {head_line}: header needs a label cell and at least one time")));
    }
    let times = header[1..]
        .iter()
        .map(|f| number(f, *head_line, "time"))
        .collect::<Result<Vec<f64>>>()?;
    let grid = Grid::new(times).map_err(|e| Error::Parse(format!("line {head_line}: {e}")))?;
    if body.is_empty() {
        return Err(Error::Parse("input has a header but no signals".into()));
    }
    let mut ids = Vec::with_capacity(body.len());
    let mut samples = Vec::with_capacity(body.len());
    let mut seen = HashMap::new();
    for (line, rec) in body {
        if rec.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        if let Some(first) = seen.insert(rec[0].clone(), *line) {
            return Err(Error::Parse(format!(
                "line {line}: signal id `{}` already used on line {first}",
                rec[0]
            )));
        }
        let values = rec[1..]
            .iter()
            .map(|f| number(f, *line, "value"))
            .collect::<Result<Vec<f64>>>()?;
        ids.push(SignalId::new(&rec[0]));
        samples.push(values);
    }
    SignalGroup::new(grid, ids, samples)
}

pub fn read_long<R: Read>(reader: R) -> Result<SignalGroup> {
    let rows = records(reader)?;
    let mut rows = rows.as_slice();
    if let Some((_, first)) = rows.first() {
        if first.len() == 3 && first[1].parse::<f64>().is_err() {
            rows = &rows[1..];
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("input has no observations".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, HashMap<u64, (f64, u64)>> = HashMap::new();
    let mut times: BTreeSet<u64> = BTreeSet::new();
    for (line, rec) in rows {
        if rec.len() != 3 {
            return Err(Error::Parse(format!("line {line}: expected 3 fields (id, t, value), found {}", rec.len())));
        }
        let t = number(&rec[1], *line, "time")?;
        let v = number(&rec[2], *line, "value")?;
        // −0 and +0 are the same time
        let key = (t + 0.0).to_bits();
        let entry = cells.entry(rec[0].clone()).or_insert_with(|| {
            order.push(rec[0].clone());
            HashMap::new()
        });
        if let Some((_, first)) = entry.insert(key, (v, *line)) {
            return Err(Error::Parse(format!(
                "line {line}: duplicate observation for signal `{}` at t = {t} (first on line {first})",
                rec[0]
            )));
        }
        times.insert(key);
    }
    let mut grid_times: Vec<f64> = times.iter().map(|&b| f64::from_bits(b)).collect();
    grid_times.sort_by(f64::total_cmp);
    let grid = Grid::new(grid_times.clone())?;
    let mut ids = Vec::with_capacity(order.len());
    let mut samples = Vec::with_capacity(order.len());
    for id in &order {
        let obs = &cells[id];
        let mut row = Vec::with_capacity(grid_times.len());
        for &t in &grid_times {
            match obs.get(&t.to_bits()) {
                Some(&(v, _)) => row.push(v),
                None => {
                    return Err(Error::Parse(format!("signal `{id}` has no observation at t = {t}")));
                }
            }
        }
        ids.push(SignalId::new(id));
        samples.push(row);
    }
    SignalGroup::new(grid, ids, samples)
}
