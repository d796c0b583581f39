//! CSV formats for graphs, signals, masks, labels and normalization stats.
//!
//! Every `*_to_csv` function renders to a string so callers can stage several
//! outputs and commit them together with [`write_atomic`].

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::dataset::{Dataset, NormStats};
use crate::error::{Error, Result};
use crate::graph::{NodeLabel, SensorGraph, SensorKind, SignalMatrix};
use crate::learn::SolverTrace;
use crate::reconstruct::ObservationMask;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `bytes` to a temporary file beside `path`, then rename over it.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("line {}: {e}", line + 1)))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(out)
}

fn parse_matrix(rows: &[Vec<String>], first_line: usize, what: &str) -> Result<DMatrix<f64>> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    let mut m = DMatrix::zeros(n_rows, n_cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::data(format!(
                "{what}: line {} has {} fields, expected {n_cols}",
                first_line + i,
                row.len()
            )));
        }
        for (j, field) in row.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::data(format!(
                    "{what}: row {i}, column {j}: cannot parse {field:?}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "{what}: row {i}, column {j}: value {field} is not finite"
                )));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn push_row<I: IntoIterator<Item = String>>(out: &mut String, fields: I) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&f);
        first = false;
    }
    out.push('\n');
}

fn matrix_rows(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        push_row(out, m.row(i).iter().map(|&v| fmt_f64(v)));
    }
}

/// First row holds the node ids, then one row of weights per node.
pub fn adjacency_to_csv(g: &SensorGraph) -> String {
    let mut out = String::new();
    push_row(&mut out, g.labels().iter().map(|l| l.id.to_string()));
    matrix_rows(&mut out, g.weights());
    out
}

pub fn parse_adjacency(text: &str) -> Result<SensorGraph> {
    let rows = records(text)?;
    let (header, body) = rows
        .split_first()
        .ok_or_else(|| Error::data("adjacency: empty file"))?;
    let ids = header
        .iter()
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| Error::data(format!("adjacency: node id {s:?} is not an integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = parse_matrix(body, 2, "adjacency")?;
    if m.nrows() != ids.len() || m.ncols() != ids.len() {
        return Err(Error::data(format!(
            "adjacency: {} node ids but a {}x{} weight block",
            ids.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    let labels = ids
        .into_iter()
        .map(|id| NodeLabel { id, kind: None })
        .collect();
    SensorGraph::new(m, labels).map_err(|e| match e {
        Error::Domain(msg) | Error::Dimension(msg) => Error::data(format!("adjacency: {msg}")),
        other => other,
    })
}

pub fn read_adjacency(path: impl AsRef<Path>) -> Result<SensorGraph> {
    let path = path.as_ref();
    parse_adjacency(&read_text(path)?).map_err(|e| prefix(path, e))
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// One row per node, one column per snapshot; `header` labels the columns.
pub fn signals_to_csv(x: &SignalMatrix, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        push_row(&mut out, h.iter().cloned());
    }
    matrix_rows(&mut out, &x.values);
    out
}

/// A first row containing any non-numeric field is taken as a header.
pub fn parse_signals(text: &str, normalized: bool) -> Result<(SignalMatrix, Option<Vec<String>>)> {
    let mut rows = records(text)?;
    if rows.is_empty() {
        return Err(Error::data("signals: empty file"));
    }
    let header = if rows[0].iter().any(|f| f64::from_str(f).is_err()) {
        Some(rows.remove(0))
    } else {
        None
    };
    let first_line = if header.is_some() { 2 } else { 1 };
    let m = parse_matrix(&rows, first_line, "signals")?;
    if let Some(h) = &header {
        if h.len() != m.ncols() {
            return Err(Error::data(format!(
                "signals: header has {} fields but rows have {}",
                h.len(),
                m.ncols()
            )));
        }
    }
    Ok((SignalMatrix::new(m, normalized), header))
}

pub fn read_signals(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    parse_signals(&read_text(path)?, false)
        .map(|(x, _)| x)
        .map_err(|e| prefix(path, e))
}

pub fn mask_to_csv(mask: &ObservationMask) -> String {
    let m = mask.matrix();
    let mut out = String::new();
    for i in 0..m.nrows() {
        push_row(
            &mut out,
            m.row(i)
                .iter()
                .map(|&b| if b { "1" } else { "0" }.to_owned()),
        );
    }
    out
}

pub fn parse_mask(text: &str) -> Result<ObservationMask> {
    let rows = records(text)?;
    let m = parse_matrix(&rows, 1, "mask")?;
    ObservationMask::from_f64(&m)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<ObservationMask> {
    let path = path.as_ref();
    parse_mask(&read_text(path)?).map_err(|e| prefix(path, e))
}

pub fn labels_to_csv(labels: &[NodeLabel]) -> String {
    let mut out = String::from("node_id,kind\n");
    for l in labels {
        let kind = l.kind.map_or("", |k| k.as_str());
        let _ = writeln!(out, "{},{kind}", l.id);
    }
    out
}

pub fn parse_labels(text: &str) -> Result<Vec<NodeLabel>> {
    let rows = records(text)?;
    let body = match rows.first() {
        Some(h) if h.first().is_some_and(|f| f == "node_id") => &rows[1..],
        _ => &rows[..],
    };
    body.iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != 2 {
                return Err(Error::data(format!(
                    "labels: record {} needs 2 fields",
                    i + 1
                )));
            }
            let id = r[0]
                .parse()
                .map_err(|_| Error::data(format!("labels: bad node id {:?}", r[0])))?;
            let kind = if r[1].is_empty() {
                None
            } else {
                Some(r[1].parse::<SensorKind>()?)
            };
            Ok(NodeLabel { id, kind })
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<NodeLabel>> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?).map_err(|e| prefix(path, e))
}

pub fn norm_stats_to_csv(stats: &NormStats) -> String {
    let mut out = String::from("kind,min,max\n");
    for (kind, (lo, hi)) in &stats.ranges {
        let _ = writeln!(out, "{kind},{},{}", fmt_f64(*lo), fmt_f64(*hi));
    }
    out
}

pub fn parse_norm_stats(text: &str) -> Result<NormStats> {
    let rows = records(text)?;
    let mut stats = NormStats::default();
    for r in rows.iter().skip(1) {
        if r.len() != 3 {
            return Err(Error::data("norm stats: records need kind,min,max"));
        }
        let kind: SensorKind = r[0].parse()?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::data(format!("norm stats: bad number {s:?}")))
        };
        stats.ranges.insert(kind, (parse(&r[1])?, parse(&r[2])?));
    }
    Ok(stats)
}

pub fn read_norm_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    let path = path.as_ref();
    parse_norm_stats(&read_text(path)?).map_err(|e| prefix(path, e))
}

pub fn trace_to_csv(trace: &SolverTrace) -> String {
    let mut out = String::from("iteration,objective,rel_change_w,rel_change_d\n");
    for k in 0..trace.objective_history.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            k + 1,
            fmt_f64(trace.objective_history[k]),
            fmt_f64(trace.rel_change_w_history[k]),
            fmt_f64(trace.rel_change_d_history[k])
        );
    }
    out
}

pub const DATASET_FILES: [&str; 5] = [
    "train_clean.csv",
    "train_noisy.csv",
    "test.csv",
    "norm_stats.csv",
    "labels.csv",
];

/// `(file name, contents)` for every dataset file.
pub fn dataset_files(ds: &Dataset) -> Vec<(&'static str, String)> {
    vec![
        (DATASET_FILES[0], signals_to_csv(&ds.train_clean, None)),
        (DATASET_FILES[1], signals_to_csv(&ds.train_noisy, None)),
        (DATASET_FILES[2], signals_to_csv(&ds.test, None)),
        (DATASET_FILES[3], norm_stats_to_csv(&ds.norm_stats)),
        (DATASET_FILES[4], labels_to_csv(&ds.labels)),
    ]
}

pub fn read_dataset_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let sig = |name: &str| -> Result<SignalMatrix> {
        let mut x = read_signals(dir.join(name))?;
        x.normalized = true;
        Ok(x)
    };
    let ds = Dataset {
        train_clean: sig(DATASET_FILES[0])?,
        train_noisy: sig(DATASET_FILES[1])?,
        test: sig(DATASET_FILES[2])?,
        norm_stats: read_norm_stats(dir.join(DATASET_FILES[3]))?,
        labels: read_labels(dir.join(DATASET_FILES[4]))?,
    };
    let n = ds.labels.len();
    for (name, x) in [
        (DATASET_FILES[0], &ds.train_clean),
        (DATASET_FILES[1], &ds.train_noisy),
        (DATASET_FILES[2], &ds.test),
    ] {
        if x.n_nodes() != n {
            return Err(Error::data(format!(
                "{}: {} rows but labels.csv lists {n} nodes",
                dir.join(name).display(),
                x.n_nodes()
            )));
        }
    }
    if ds.train_clean.values.shape() != ds.train_noisy.values.shape() {
        return Err(Error::data(
            "train_clean.csv and train_noisy.csv differ in shape",
        ));
    }
    Ok(ds)
}
