//! CSV tables stamped with the configuration hash, and the run manifest.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

const HASH_PREFIX: &str = "# config_hash=";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing `{HASH_PREFIX}` header line")]
    MissingHash { path: PathBuf },
    #[error("{path}: written by configuration {found}, expected {expected}")]
    HashMismatch { path: PathBuf, found: String, expected: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: cannot parse `{text}` in column `{column}`")]
    Parse { path: PathBuf, row: usize, column: String, text: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Round-trip formatting: 17 significant digits for finite values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `header` and `rows` after a `# config_hash=` line.
pub fn write_csv<I>(path: &Path, hash: &str, header: &[&str], rows: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut file = BufWriter::new(File::create(path).map_err(io_err(path))?);
    writeln!(file, "{HASH_PREFIX}{hash}").map_err(io_err(path))?;
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// A parsed table.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize, IoError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| IoError::MissingColumn {
            path: self.path.clone(),
            column: name.into(),
        })
    }

    fn parse<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T, IoError> {
        let text = &self.rows[row][col];
        text.parse().map_err(|_| IoError::Parse {
            path: self.path.clone(),
            row: row + 1,
            column: self.header[col].clone(),
            text: text.clone(),
        })
    }

    pub fn f64_at(&self, row: usize, col: usize) -> Result<f64, IoError> {
        self.parse(row, col)
    }

    /// `None` for an empty cell.
    pub fn opt_f64_at(&self, row: usize, col: usize) -> Result<Option<f64>, IoError> {
        if self.rows[row][col].is_empty() {
            Ok(None)
        } else {
            self.parse(row, col).map(Some)
        }
    }

    pub fn usize_at(&self, row: usize, col: usize) -> Result<usize, IoError> {
        self.parse(row, col)
    }

    pub fn i64_at(&self, row: usize, col: usize) -> Result<i64, IoError> {
        self.parse(row, col)
    }
}

/// Reads a table; refuses it unless its hash equals `expected` (when given).
pub fn read_csv(path: &Path, expected: Option<&str>) -> Result<Table, IoError> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    let hash = first
        .trim_end()
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| IoError::MissingHash { path: path.to_path_buf() })?
        .to_string();
    if let Some(e) = expected {
        if e != hash {
            return Err(IoError::HashMismatch { path: path.to_path_buf(), found: hash, expected: e.into() });
        }
    }
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .map_err(csv_err)?;
    Ok(Table { path: path.to_path_buf(), hash, header, rows })
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes text, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Record of a simulate run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    /// `(N, total events, replicas over budget)`.
    pub lattices: Vec<(usize, u64, Vec<u64>)>,
    /// Relative path and SHA-256 of every output file.
    pub files: Vec<(String, String)>,
    pub wall_clock_seconds: Option<f64>,
}

impl RunManifest {
    pub fn partial(&self) -> bool {
        self.lattices.iter().any(|l| !l.2.is_empty())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{HASH_PREFIX}{}\n", self.config_hash));
        s.push_str(&format!("code_version = {}\n", self.code_version));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str("replica_streams = ChaCha8 seeded from seed, stream = replica id\n");
        s.push_str(&format!("partial = {}\n", self.partial()));
        for (n, events, over) in &self.lattices {
            let over: Vec<String> = over.iter().map(u64::to_string).collect();
            s.push_str(&format!("lattice N={n} events={events} over_budget=[{}]\n", over.join(",")));
        }
        if let Some(w) = self.wall_clock_seconds {
            s.push_str(&format!("wall_clock_seconds = {w:.3}\n"));
        }
        for (path, digest) in &self.files {
            s.push_str(&format!("file {path} sha256={digest}\n"));
        }
        s
    }

    /// Parses the fields needed downstream: hash, seed and the file inventory.
    pub fn parse(text: &str) -> Option<Self> {
        let mut m = RunManifest::default();
        let mut lines = text.lines();
        m.config_hash = lines.next()?.strip_prefix(HASH_PREFIX)?.to_string();
        for line in lines {
            if let Some(v) = line.strip_prefix("code_version = ") {
                m.code_version = v.to_string();
            } else if let Some(v) = line.strip_prefix("seed = ") {
                m.seed = v.parse().ok()?;
            } else if let Some(rest) = line.strip_prefix("file ") {
                let (path, digest) = rest.rsplit_once(" sha256=")?;
                m.files.push((path.to_string(), digest.to_string()));
            } else if let Some(rest) = line.strip_prefix("lattice N=") {
                let (n, rest) = rest.split_once(" events=")?;
                let (events, over) = rest.split_once(" over_budget=")?;
                let over = over.trim_start_matches('[').trim_end_matches(']');
                let over = over.split(',').filter(|s| !s.is_empty()).map(|s| s.parse().ok()).collect::<Option<_>>()?;
                m.lattices.push((n.parse().ok()?, events.parse().ok()?, over));
            } else if let Some(v) = line.strip_prefix("wall_clock_seconds = ") {
                m.wall_clock_seconds = v.parse().ok();
            }
        }
        Some(m)
    }
}
