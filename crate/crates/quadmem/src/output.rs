//! Artifact files: CSV traces, JSON sidecars, array state, Matrix Market.
//!
//! Every file is written to a temporary name in its destination directory
//! and renamed into place, so readers never see a partial artifact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use quadmem_core::crossbar::CrossbarArray;
use quadmem_core::experiments::{Column, ExperimentTrace, MetaValue, Unit};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let ctx = |what: &str| format!("{what} {}", path.display());
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(ctx("creating"), e))?;
    f.write_all(bytes).map_err(|e| CliError::io(ctx("writing"), e))?;
    f.sync_all().map_err(|e| CliError::io(ctx("syncing"), e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(ctx("renaming into"), e)
    })
}

/// Shortest round-trip text for a value; whole numbers for index and count
/// columns.
pub fn format_value(unit: Unit, v: f64) -> String {
    if unit.is_integral() && v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// CSV body: a header of unit-suffixed names, then one row per sample.
pub fn trace_csv(trace: &ExperimentTrace) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trace.headers()).map_err(|e| CliError::format("csv", e))?;
    for k in 0..trace.len() {
        w.write_record(trace.columns.iter().map(|c| format_value(c.unit, c.values[k])))
            .map_err(|e| CliError::format("csv", e))?;
    }
    w.into_inner().map_err(|e| CliError::format("csv", e))
}

/// Parses a trace CSV written by [`trace_csv`]. Header names must end in a
/// known unit suffix.
pub fn read_trace_csv(path: &Path, name: &str) -> Result<ExperimentTrace, CliError> {
    let ctx = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(format!("reading {ctx}"), io),
        other => CliError::format(&ctx, format!("{other:?}")),
    })?;
    let headers = r.headers().map_err(|e| CliError::format(&ctx, e))?.clone();
    let mut columns = Vec::new();
    for h in &headers {
        let (base, suffix) = h
            .rsplit_once('_')
            .ok_or_else(|| CliError::format(&ctx, format!("column `{h}` has no unit suffix")))?;
        let unit = Unit::from_suffix(suffix)
            .ok_or_else(|| CliError::format(&ctx, format!("column `{h}` has unknown unit `{suffix}`")))?;
        columns.push(Column {
            base: base.to_string(),
            unit,
            values: Vec::new(),
        });
    }
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::format(&ctx, e))?;
        for (c, field) in columns.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::format(&ctx, format!("row {}: `{field}` is not a number", line + 2)))?;
            c.values.push(v);
        }
    }
    let mut trace = ExperimentTrace::new(name);
    trace.columns = columns;
    trace.validate().map_err(|e| CliError::format(&ctx, e))?;
    Ok(trace)
}

pub fn meta_json(meta: &[(String, MetaValue)]) -> Map<String, Value> {
    meta.iter()
        .map(|(k, v)| {
            let v = match v {
                MetaValue::Integer(n) => Value::from(*n),
                MetaValue::Number(x) => Value::from(*x),
                MetaValue::Text(s) => Value::from(s.clone()),
            };
            (k.clone(), v)
        })
        .collect()
}

/// Sidecar metadata of one artifact set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    /// UTC creation time, RFC 3339.
    pub created: String,
    /// The resolved configuration; feeding it back reproduces the run.
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub metadata: Map<String, Value>,
    /// Experiment-specific structured results.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
}

/// Naming and placement of one run's artifacts:
/// `<dir>/<experiment>-<timestamp>-<seed>[-<part>].<ext>`.
#[derive(Debug, Clone)]
pub struct ArtifactSet {
    pub dir: PathBuf,
    pub stem: String,
    pub created: String,
    written: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new(dir: &Path, experiment: &str, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating output directory {}", dir.display()), e))?;
        let now = chrono::Utc::now();
        let base = format!("{experiment}-{}-{seed}", now.format("%Y%m%dT%H%M%S%3fZ"));
        // two runs inside one millisecond must not overwrite each other
        let mut stem = base.clone();
        let mut n = 1;
        while dir.join(format!("{stem}.json")).exists() {
            stem = format!("{base}.{n}");
            n += 1;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            stem,
            created: now.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            written: Vec::new(),
        })
    }

    pub fn path(&self, part: Option<&str>, ext: &str) -> PathBuf {
        match part {
            Some(p) => self.dir.join(format!("{}-{p}.{ext}", self.stem)),
            None => self.dir.join(format!("{}.{ext}", self.stem)),
        }
    }

    pub fn write(&mut self, part: Option<&str>, ext: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(part, ext);
        atomic_write(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, part: Option<&str>, value: &T) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::format("json", e))?;
        bytes.push(b'\n');
        self.write(part, "json", &bytes)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Serialized array snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayStateFile {
    pub schema_version: u32,
    pub array: CrossbarArray,
}

impl ArrayStateFile {
    pub fn new(array: CrossbarArray) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            array,
        }
    }
}

pub fn read_array_state(path: &Path) -> Result<CrossbarArray, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let file: ArrayStateFile = serde_json::from_str(&text).map_err(|e| CliError::format(path.display().to_string(), e))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::format(
            path.display().to_string(),
            format!("unsupported schema_version {}", file.schema_version),
        ));
    }
    file.array
        .validate()
        .map_err(|e| CliError::format(path.display().to_string(), e))?;
    Ok(file.array)
}

/// Target conductances, one inner list per row; `null` leaves a cell alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsFile {
    pub schema_version: u32,
    #[serde(rename = "conductance_S")]
    pub conductance: Vec<Vec<Option<f64>>>,
}

pub fn read_targets(path: &Path) -> Result<TargetsFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let file: TargetsFile = serde_json::from_str(&text).map_err(|e| CliError::format(path.display().to_string(), e))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::format(
            path.display().to_string(),
            format!("unsupported schema_version {}", file.schema_version),
        ));
    }
    Ok(file)
}

/// Dense row-major matrix in Matrix Market array format (column-major body).
pub fn matrix_market(rows: usize, cols: usize, values: &[f64], comment: &str) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    for line in comment.lines() {
        s.push_str(&format!("% {line}\n"));
    }
    s.push_str(&format!("{rows} {cols}\n"));
    for j in 0..cols {
        for i in 0..rows {
            s.push_str(&format!("{:e}\n", values[i * cols + j]));
        }
    }
    s
}

/// Parses the array format written by [`matrix_market`] into row-major
/// values.
pub fn parse_matrix_market(text: &str) -> Option<(usize, usize, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let mut dims = lines.next()?.split_whitespace().map(|t| t.parse::<usize>());
    let (rows, cols) = (dims.next()?.ok()?, dims.next()?.ok()?);
    let col_major: Vec<f64> = lines.map(|l| l.trim().parse().ok()).collect::<Option<_>>()?;
    if col_major.len() != rows * cols {
        return None;
    }
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            out[i * cols + j] = col_major[j * rows + i];
        }
    }
    Some((rows, cols, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = ExperimentTrace::new("x");
        t.push_column("t", Unit::Second, vec![0.0, 0.5, 1.0]).unwrap();
        t.push_column("cycle", Unit::Index, vec![0.0, 1.0, 2.0]).unwrap();
        t.push_column("dq_l1", Unit::Coulomb, vec![1.234e-12, 0.0, 5.5e-7]).unwrap();
        let bytes = trace_csv(&t).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("t_s,cycle_idx,dq_l1_C\n"));
        assert!(text.contains("\n5e-1,1,0e0\n"));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        atomic_write(&p, &bytes).unwrap();
        let back = read_trace_csv(&p, "x").unwrap();
        assert_eq!(back.columns, t.columns);
    }

    #[test]
    fn matrix_market_round_trip() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let text = matrix_market(2, 3, &v, "conductance, S");
        assert!(text.starts_with("%%MatrixMarket matrix array real general\n% conductance, S\n2 3\n1e0\n4e0\n"));
        assert_eq!(parse_matrix_market(&text), Some((2, 3, v.to_vec())));
    }

    #[test]
    fn artifact_names() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = ArtifactSet::new(dir.path(), "s1", 42).unwrap();
        assert!(a.stem.starts_with("s1-") && a.stem.ends_with("-42"));
        let p = a.write(None, "csv", b"x\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x\n");
        a.write(Some("state"), "json", b"{}").unwrap();
        assert!(a.path(Some("state"), "json").exists());
        // no temp files left behind
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
