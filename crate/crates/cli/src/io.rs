//! Canonical on-disk format: a self-describing JSON document with sorted
//! keys and 17-significant-digit floats, so serialize ∘ parse ∘ serialize is
//! byte-identical and digests are stable across platforms.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use buresproj::matcore::{c, CMat, PsdMatrix, Tolerances};
use buresproj::chanrep::ChannelRep;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug)]
pub enum IoError {
    Read(String),
    Parse(String),
    Validate(String),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Read(m) => write!(f, "read error: {m}"),
            IoError::Parse(m) => write!(f, "parse error: {m}"),
            IoError::Validate(m) => write!(f, "validation error: {m}"),
        }
    }
}

impl std::error::Error for IoError {}

pub type IoResult<T> = Result<T, IoError>;

/// Parsed document: a matrix, a Kraus-list channel, or an ensemble.
#[derive(Debug, Clone)]
pub enum Document {
    Matrix { mat: CMat },
    Channel { kraus: Vec<CMat> },
    Ensemble { members: Vec<CMat> },
}

// ---- canonical float formatting ----

struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{:.16e}", value)
    }
}

/// Canonical serialization: sorted keys (serde_json's default map is
/// ordered), fixed float formatting, trailing newline.
pub fn to_canonical_string(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    serde::Serialize::serialize(v, &mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("canonical JSON is UTF-8")
}

pub fn sha256_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> IoResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| IoError::Read(e.to_string()))?;
        f.write_all(contents.as_bytes())
            .map_err(|e| IoError::Read(e.to_string()))?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path).map_err(|e| IoError::Read(e.to_string()))
}

// ---- matrix <-> JSON ----

fn entry_to_value(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

fn mat_to_rows(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|cc| entry_to_value(m[(r, cc)])).collect()))
            .collect(),
    )
}

fn rows_to_mat(v: &Value) -> IoResult<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| IoError::Parse("matrix data must be an array of rows".into()))?;
    let nrows = rows.len();
    if nrows == 0 {
        return Err(IoError::Parse("matrix has no rows".into()));
    }
    let first = rows[0]
        .as_array()
        .ok_or_else(|| IoError::Parse("matrix row must be an array".into()))?;
    let ncols = first.len();
    let mut m = CMat::zeros(nrows, ncols);
    for (r, rowv) in rows.iter().enumerate() {
        let row = rowv
            .as_array()
            .ok_or_else(|| IoError::Parse("matrix row must be an array".into()))?;
        if row.len() != ncols {
            return Err(IoError::Parse("ragged matrix rows".into()));
        }
        for (cc, entry) in row.iter().enumerate() {
            let pair = entry
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| IoError::Parse("entry must be a [re, im] pair".into()))?;
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| IoError::Parse("non-numeric real part".into()))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| IoError::Parse("non-numeric imaginary part".into()))?;
            m[(r, cc)] = c(re, im);
        }
    }
    Ok(m)
}

/// Matrix document of the given kind (`psd`, `hermitian`, or `general`).
pub fn matrix_value(kind: &str, m: &CMat) -> Value {
    let mut obj = Map::new();
    obj.insert("data".into(), mat_to_rows(m));
    obj.insert(
        "dims".into(),
        json!([m.nrows(), m.ncols()]),
    );
    obj.insert("kind".into(), Value::String(kind.into()));
    obj.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    Value::Object(obj)
}

/// Kraus-list channel document.
pub fn channel_value(ch: &ChannelRep) -> Value {
    let mut obj = Map::new();
    obj.insert(
        "data".into(),
        Value::Array(ch.kraus().iter().map(mat_to_rows).collect()),
    );
    obj.insert("dims".into(), json!([ch.dim_in(), ch.dim_out()]));
    obj.insert("kind".into(), Value::String("channel_kraus".into()));
    obj.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    Value::Object(obj)
}

/// Ensemble document (ordered member list; projector families use this too).
pub fn ensemble_value(members: &[CMat]) -> Value {
    let d = members.first().map(|m| m.nrows()).unwrap_or(0);
    let mut obj = Map::new();
    obj.insert(
        "data".into(),
        Value::Array(members.iter().map(mat_to_rows).collect()),
    );
    obj.insert("dims".into(), json!([d, d]));
    obj.insert("kind".into(), Value::String("ensemble".into()));
    obj.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    Value::Object(obj)
}

pub fn parse_document(text: &str) -> IoResult<Document> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let obj = v
        .as_object()
        .ok_or_else(|| IoError::Parse("document must be a JSON object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| IoError::Parse("missing kind".into()))?;
    let data = obj
        .get("data")
        .ok_or_else(|| IoError::Parse("missing data".into()))?;
    match kind {
        "psd" | "hermitian" | "general" => Ok(Document::Matrix {
            mat: rows_to_mat(data)?,
        }),
        "channel_kraus" => {
            let arr = data
                .as_array()
                .ok_or_else(|| IoError::Parse("channel data must be a Kraus list".into()))?;
            let kraus: Vec<CMat> = arr.iter().map(rows_to_mat).collect::<IoResult<_>>()?;
            if kraus.is_empty() {
                return Err(IoError::Validate("empty Kraus list".into()));
            }
            Ok(Document::Channel { kraus })
        }
        "ensemble" => {
            let arr = data
                .as_array()
                .ok_or_else(|| IoError::Parse("ensemble data must be a matrix list".into()))?;
            Ok(Document::Ensemble {
                members: arr.iter().map(rows_to_mat).collect::<IoResult<_>>()?,
            })
        }
        other => Err(IoError::Parse(format!("unknown kind {other:?}"))),
    }
}

pub fn read_document(path: &Path) -> IoResult<Document> {
    let text = fs::read_to_string(path)
        .map_err(|e| IoError::Read(format!("{}: {e}", path.display())))?;
    parse_document(&text)
}

pub fn read_psd(path: &Path, tol: &Tolerances) -> IoResult<PsdMatrix> {
    match read_document(path)? {
        Document::Matrix { mat } => PsdMatrix::new(mat, tol.psd_tol)
            .map_err(|e| IoError::Validate(format!("{}: {e}", path.display()))),
        _ => Err(IoError::Validate(format!(
            "{}: expected a matrix document",
            path.display()
        ))),
    }
}

pub fn read_channel(path: &Path) -> IoResult<ChannelRep> {
    match read_document(path)? {
        Document::Channel { kraus } => ChannelRep::from_kraus(kraus)
            .map_err(|e| IoError::Validate(format!("{}: {e}", path.display()))),
        _ => Err(IoError::Validate(format!(
            "{}: expected a channel_kraus document",
            path.display()
        ))),
    }
}

pub fn read_matrix_list(path: &Path) -> IoResult<Vec<CMat>> {
    match read_document(path)? {
        Document::Ensemble { members } => Ok(members),
        Document::Matrix { mat } => Ok(vec![mat]),
        _ => Err(IoError::Validate(format!(
            "{}: expected an ensemble or matrix document",
            path.display()
        ))),
    }
}
