//! CSV output and the binary parameter container.
//!
//! CSV: header row, `,` separator, `.` decimal point, LF line endings.
//! Floats use the shortest representation that round-trips.
//!
//! Parameter container, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `ODEFLOWP` |
//! | 4 | format version (1) |
//! | 5 x 8 | `L, q, m, d, d'` as u64 |
//! | ... | f64 matrices `A, V_1..V_L, W_1..W_L, B`, row-major |

use std::fmt::Write as _;
use std::path::Path;

use odeflow_core::{Dims, ResNetParams};

use crate::error::{Result, RunError};

pub const PARAM_MAGIC: &[u8; 8] = b"ODEFLOWP";
pub const PARAM_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 5 * 8;

/// Accumulates one CSV document in memory.
#[derive(Clone, Debug)]
pub struct Csv {
    columns: usize,
    text: String,
}

/// A CSV cell.
pub enum Cell<'a> {
    Int(u64),
    Float(f64),
    Text(&'a str),
}

impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell<'_> {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "true" } else { "false" })
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::Text(v)
    }
}

/// Shortest round-trip form, exponent notation outside `[1e-5, 1e16)`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { columns: header.len(), text }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        assert_eq!(cells.len(), self.columns, "csv row width differs from header");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match cell {
                Cell::Int(v) => write!(self.text, "{v}").unwrap(),
                Cell::Float(v) => self.text.push_str(&fmt_float(*v)),
                Cell::Text(s) => {
                    debug_assert!(!s.contains([',', '\n', '"']));
                    self.text.push_str(s)
                }
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Row-based CSV reader for the files written by [`Csv`].
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().map(|h| h.split(',').map(str::to_owned).collect()).unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

pub fn encode_params(params: &ResNetParams) -> Vec<u8> {
    let d = params.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * d.param_count());
    out.extend_from_slice(PARAM_MAGIC);
    out.extend_from_slice(&PARAM_VERSION.to_le_bytes());
    for v in [d.depth, d.hidden, d.width, d.input, d.output] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in params.to_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_params(bytes: &[u8], origin: &Path) -> Result<ResNetParams> {
    let bad = |message: &str| RunError::Format { path: origin.to_owned(), message: message.to_owned() };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..8] != PARAM_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != PARAM_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 5];
    for (i, d) in dims.iter_mut().enumerate() {
        let start = 12 + 8 * i;
        let v = u64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
        *d = usize::try_from(v).map_err(|_| bad("dimension overflows usize"))?;
    }
    let dims = Dims::new(dims[0], dims[1], dims[2], dims[3], dims[4]);
    dims.validate().map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    let expected = dims
        .param_count()
        .checked_mul(8)
        .ok_or_else(|| bad("parameter count overflows"))?;
    if body.len() != expected {
        return Err(bad(&format!("expected {expected} payload bytes, found {}", body.len())));
    }
    let flat: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ResNetParams::from_flat(dims, &flat).map_err(|e| bad(&e.to_string()))
}

pub fn write_params(path: &Path, params: &ResNetParams) -> Result<()> {
    std::fs::write(path, encode_params(params)).map_err(RunError::io(path))
}

pub fn read_params(path: &Path) -> Result<ResNetParams> {
    let bytes = std::fs::read(path).map_err(RunError::io(path))?;
    decode_params(&bytes, path)
}

/// `snap_{t}.bin`, with `t` printed to at most six decimals.
pub fn snapshot_name(t: f64) -> String {
    let mut s = format!("{t:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    format!("snap_{s}.bin")
}
