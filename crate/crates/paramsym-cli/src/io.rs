//! Input loading, atomic output and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use paramsym::infinity::{Excision, PolySymbol};
use paramsym::symbol::json::parse_node;
use paramsym::symbol::{parse_document, Expr};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}{source}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Library { path: Option<PathBuf>, source: paramsym::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Input { .. } => "InputError",
            CliError::Usage(_) => "UsageError",
            CliError::Library { source, .. } => source.kind(),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            CliError::Io { path, .. } | CliError::Input { path, .. } => Some(path),
            CliError::Library { path, .. } => path.as_deref(),
            CliError::Usage(_) => None,
        }
    }

    /// Failed checks rather than failed runs.
    pub fn is_verification(&self) -> bool {
        matches!(self.kind(), "ConvergenceError" | "NotElliptic" | "SectorError")
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let Some(p) = self.path() {
            v["path"] = json!(p.display().to_string());
        }
        if let CliError::Library { source: paramsym::Error::Grammar { path, .. }, .. } = self {
            v["location"] = json!(path);
        }
        v
    }
}

impl From<paramsym::Error> for CliError {
    fn from(source: paramsym::Error) -> Self {
        CliError::Library { path: None, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn at<T>(path: &Path, r: paramsym::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Library { path: Some(path.to_path_buf()), source })
}

/// A file read for this run, with its content hash.
pub struct Input {
    pub path: PathBuf,
    pub text: String,
    pub sha256: String,
}

pub fn read_input(path: &Path) -> CliResult<Input> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input { path: path.to_path_buf(), message: "not UTF-8".into() })?;
    Ok(Input { path: path.to_path_buf(), text, sha256 })
}

/// A symbol file: a plain expression document, optionally with `order` and
/// `regularity`, or a polyhomogeneous symbol given by `components`.
pub struct SymbolFile {
    pub dim: usize,
    pub expr: Expr,
    pub poly: Option<PolySymbol>,
}

impl SymbolFile {
    pub fn require_poly(&self, path: &Path) -> CliResult<&PolySymbol> {
        self.poly.as_ref().ok_or_else(|| CliError::Input {
            path: path.to_path_buf(),
            message: "symbol needs \"order\" and \"regularity\"".into(),
        })
    }
}

pub fn parse_symbol(input: &Input) -> CliResult<SymbolFile> {
    let bad = |message: String| CliError::Input { path: input.path.clone(), message };
    let v: Value = serde_json::from_str(&input.text).map_err(|e| bad(e.to_string()))?;
    let order = v.get("order").map(|o| o.as_f64().ok_or_else(|| bad("order must be a number".into()))).transpose()?;
    let regularity = v.get("regularity").map(|o| o.as_f64().ok_or_else(|| bad("regularity must be a number".into()))).transpose()?;
    if let Some(parts) = v.get("components") {
        let dim = v.get("dim").and_then(Value::as_u64).ok_or_else(|| bad("missing dimension".into()))? as usize;
        if dim == 0 || dim > 3 {
            return Err(bad(format!("dimension {dim} outside 1..=3")));
        }
        let (d, nu) = order.zip(regularity).ok_or_else(|| bad("components need \"order\" and \"regularity\"".into()))?;
        let parts = parts.as_array().ok_or_else(|| bad("components must be an array".into()))?;
        let exprs = parts
            .iter()
            .enumerate()
            .map(|(i, p)| at(&input.path, parse_node(p, dim, &format!("components[{i}]"))))
            .collect::<CliResult<Vec<_>>>()?;
        let excision = match v.get("excision").and_then(Value::as_str).unwrap_or("covariable") {
            "covariable" => Excision::Covariable,
            "joint" => Excision::Joint,
            "none" => Excision::None,
            other => return Err(bad(format!("unknown excision {other:?}"))),
        };
        let poly = PolySymbol::classical(dim, d, nu, exprs, excision);
        return Ok(SymbolFile { dim, expr: poly.full(), poly: Some(poly) });
    }
    let doc = at(&input.path, parse_document(&input.text))?;
    let poly = order.zip(regularity).map(|(d, nu)| PolySymbol::raw(doc.dim, d, nu, doc.expr.clone()));
    Ok(SymbolFile { dim: doc.dim, expr: doc.expr, poly })
}

/// Parses `lo,hi,per_decade`.
pub fn parse_grid(s: &str) -> CliResult<(f64, f64, usize)> {
    let bad = || CliError::Usage(format!("grid {s:?} must be lo,hi,points_per_decade"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi > lo && n > 0) {
        return Err(bad());
    }
    Ok((lo, hi, n))
}

pub fn parse_point(s: &str, dim: usize) -> CliResult<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("point {s:?} must be comma-separated numbers")))?;
    if v.len() != dim {
        return Err(CliError::Usage(format!("point has {} coordinates, symbol dimension is {dim}", v.len())));
    }
    Ok(v)
}

/// Reads the columns `names` from a CSV file with a header row.
pub fn read_columns(input: &Input, names: &[&str]) -> CliResult<Vec<Vec<f64>>> {
    let bad = |message: String| CliError::Input { path: input.path.clone(), message };
    let mut rdr = csv::Reader::from_reader(input.text.as_bytes());
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).ok_or_else(|| bad(format!("missing column {n:?}"))))
        .collect::<CliResult<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            let v: f64 = rec.get(i).unwrap_or("").trim().parse().map_err(|_| bad(format!("row {}: column {:?} is not a number", row + 1, names[c])))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

/// Output directory with atomic writes and a record of everything written.
pub struct Output {
    dir: PathBuf,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

impl Output {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Output { dir: dir.to_path_buf(), inputs: Vec::new(), outputs: Vec::new() })
    }

    pub fn record_input(&mut self, input: &Input) {
        self.inputs.push(FileRecord { path: input.path.display().to_string(), sha256: input.sha256.clone() });
    }

    fn write_at(&self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let io = |source| CliError::Io { path: path.to_path_buf(), source };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        self.write_at(&path, bytes)?;
        self.outputs.push(FileRecord { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, v: &Value) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(v).expect("JSON values serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let err = |e: csv::Error| CliError::Input { path: path.clone(), message: e.to_string() };
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Input { path: path.clone(), message: e.to_string() })?;
        self.write(name, &bytes)
    }

    pub fn finish(self, manifest: Option<&Path>, command: &str, args: Vec<String>, constants: Value, verdict: &str) -> CliResult<()> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let v = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "arguments": args,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "constants": constants,
            "verdict": verdict,
            "timestamp": stamp,
        });
        let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| self.dir.join("manifest.json"));
        let mut text = serde_json::to_string_pretty(&v).expect("JSON values serialize");
        text.push('\n');
        self.write_at(&path, text.as_bytes())
    }
}
