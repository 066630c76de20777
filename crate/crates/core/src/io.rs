//! On-disk formats.
//!
//! * `RCURCMAT` binary matrices: 8-byte magic, `u32` version (1), `u64` rows,
//!   `u64` cols, then `rows * cols` row-major `f64`, all little-endian.
//! * Observations as JSON with keys in sorted order.
//! * Solve traces as CSV (`iter,e_k,zeta_k,wall_ms`) with a trailing
//!   `# termination=...` line.
//! * Binary 8-bit PGM (`P5`) frames.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RcurcError, Result};
use crate::linalg::DenseMatrix;
use crate::sampling::{CcsObservation, IndexSet, Mask};
use crate::solver::{SolveReport, Termination, TraceRow};

pub const MATRIX_MAGIC: &[u8; 8] = b"RCURCMAT";
pub const MATRIX_VERSION: u32 = 1;
const MATRIX_HEADER_LEN: u64 = 8 + 4 + 8 + 8;

pub const OBSERVATION_SCHEMA: u32 = 1;

pub const TRACE_HEADER: &str = "iter,e_k,zeta_k,wall_ms";

fn format_err(offset: u64, message: impl Into<String>) -> RcurcError {
    RcurcError::Format {
        offset,
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| RcurcError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| RcurcError::io(path, e))
}

pub fn encode_matrix(m: &DenseMatrix) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(RcurcError::arg(format!(
            "refusing to write a degenerate {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN as usize + m.data().len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    let len = bytes.len() as u64;
    if len < MATRIX_HEADER_LEN {
        return Err(format_err(
            len,
            format!("truncated header: expected {MATRIX_HEADER_LEN} bytes, found {len}"),
        ));
    }
    if &bytes[..8] != MATRIX_MAGIC {
        return Err(format_err(0, "bad magic, expected RCURCMAT"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(format_err(8, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(MATRIX_HEADER_LEN))
        .ok_or_else(|| format_err(12, format!("dimensions {rows}x{cols} overflow")))?;
    if len != expected {
        return Err(format_err(
            len.min(expected),
            format!("payload length mismatch: expected {expected} bytes, found {len}"),
        ));
    }
    let data: Vec<f64> = bytes[MATRIX_HEADER_LEN as usize..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(p) = data.iter().position(|v| !v.is_finite()) {
        return Err(format_err(
            MATRIX_HEADER_LEN + 8 * p as u64,
            "non-finite matrix entry",
        ));
    }
    DenseMatrix::new(rows as usize, cols as usize, data)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_bytes(path.as_ref(), &encode_matrix(m)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    decode_matrix(&read_bytes(path.as_ref())?)
}

/// One decoded 8-bit grayscale frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels.
    pub pixels: Vec<u8>,
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    let mut pos = 0usize;

    fn skip_space(bytes: &[u8], pos: &mut usize) {
        while *pos < bytes.len() {
            match bytes[*pos] {
                b'#' => {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => *pos += 1,
                _ => break,
            }
        }
    }

    fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<(&'a [u8], u64)> {
        skip_space(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
            *pos += 1;
        }
        if start == *pos {
            return Err(format_err(start as u64, "truncated PGM header"));
        }
        Ok((&bytes[start..*pos], start as u64))
    }

    fn number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
        let (tok, at) = token(bytes, pos)?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| format_err(at, "expected a decimal number in PGM header"))
    }

    let (magic, _) = token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(format_err(
            0,
            format!(
                "unsupported image type {:?}, only binary PGM (P5) is accepted",
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let width = number(bytes, &mut pos)?;
    let height = number(bytes, &mut pos)?;
    let maxval_at = pos as u64;
    let maxval = number(bytes, &mut pos)?;
    if maxval == 0 || maxval > 255 {
        return Err(format_err(
            maxval_at,
            format!("maxval {maxval} unsupported, only 8-bit PGM is accepted"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(format_err(3, "empty frame"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err(pos as u64, "missing raster"));
    }
    pos += 1;
    let need = width * height;
    let have = bytes.len() - pos;
    if have < need {
        return Err(format_err(
            bytes.len() as u64,
            format!("truncated raster: expected {need} bytes, found {have}"),
        ));
    }
    Ok(Frame {
        width,
        height,
        pixels: bytes[pos..pos + need].to_vec(),
    })
}

pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Frame> {
    decode_pgm(&read_bytes(path.as_ref())?).map_err(|e| annotate(path.as_ref(), e))
}

pub fn write_pgm(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(frame))
}

fn annotate(path: &Path, e: RcurcError) -> RcurcError {
    match e {
        RcurcError::Format { offset, message } => RcurcError::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Stacks frames as columns. Each frame is vectorized column-major, so pixel
/// `(row y, col x)` lands in matrix row `x * height + y`.
pub fn frames_to_matrix<P: AsRef<Path>>(paths: &[P]) -> Result<DenseMatrix> {
    let Some(first) = paths.first() else {
        return Err(RcurcError::arg("no frames given"));
    };
    let head = read_pgm(first)?;
    let (w, h) = (head.width, head.height);
    let n = paths.len();
    let mut out = DenseMatrix::zeros(w * h, n);
    let mut put = |col: usize, f: &Frame| {
        for y in 0..h {
            for x in 0..w {
                out.set(x * h + y, col, f64::from(f.pixels[y * w + x]));
            }
        }
    };
    put(0, &head);
    for (col, p) in paths.iter().enumerate().skip(1) {
        let f = read_pgm(p)?;
        if (f.width, f.height) != (w, h) {
            return Err(format_err(
                0,
                format!(
                    "{}: frame is {}x{}, expected {w}x{h}",
                    p.as_ref().display(),
                    f.width,
                    f.height
                ),
            ));
        }
        put(col, &f);
    }
    Ok(out)
}

/// Inverse of the column layout of [`frames_to_matrix`] for one column,
/// rounding and clamping to `0..=255`.
pub fn column_to_frame(m: &DenseMatrix, col: usize, width: usize, height: usize) -> Result<Frame> {
    if m.rows() != width * height || col >= m.cols() {
        return Err(RcurcError::arg(format!(
            "column {col} of a {}x{} matrix is not a {width}x{height} frame",
            m.rows(),
            m.cols()
        )));
    }
    let mut pixels = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            pixels[y * width + x] = m.get(x * height + y, col).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(Frame {
        width,
        height,
        pixels,
    })
}

/// JSON layout of an observation. Field order is alphabetical so the
/// serialized keys are sorted.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationFile {
    col_idx: Vec<usize>,
    n1: usize,
    n2: usize,
    omega_c: Vec<(usize, usize)>,
    omega_r: Vec<(usize, usize)>,
    row_idx: Vec<usize>,
    schema: u32,
    /// `[row, col, value]` for every entry of `omega_r ∪ omega_c`, row-major.
    values: Vec<(usize, usize, f64)>,
}

pub fn observation_to_json(obs: &CcsObservation) -> Result<String> {
    let mut values: Vec<(usize, usize, f64)> = obs.union_entries().collect();
    values.sort_by_key(|&(i, j, _)| (i, j));
    let file = ObservationFile {
        col_idx: obs.col_idx().values().to_vec(),
        n1: obs.shape().0,
        n2: obs.shape().1,
        omega_c: obs.omega_c().entries().to_vec(),
        omega_r: obs.omega_r().entries().to_vec(),
        row_idx: obs.row_idx().values().to_vec(),
        schema: OBSERVATION_SCHEMA,
        values,
    };
    let mut s = serde_json::to_string(&file).map_err(|e| RcurcError::Schema(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn observation_from_json(text: &str) -> Result<CcsObservation> {
    let file: ObservationFile = serde_json::from_str(text).map_err(|e| RcurcError::Schema(e.to_string()))?;
    if file.schema != OBSERVATION_SCHEMA {
        return Err(RcurcError::Schema(format!(
            "unsupported observation schema {}",
            file.schema
        )));
    }
    let shape = (file.n1, file.n2);
    let schema = |e: RcurcError| RcurcError::Schema(e.to_string());
    let row_idx = IndexSet::new(file.row_idx, file.n1).map_err(schema)?;
    let col_idx = IndexSet::new(file.col_idx, file.n2).map_err(schema)?;
    let omega_r = Mask::new(file.omega_r, shape).map_err(schema)?;
    let omega_c = Mask::new(file.omega_c, shape).map_err(schema)?;

    let mut values = file.values;
    values.sort_by_key(|&(i, j, _)| (i, j));
    if let Some(w) = values.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
        return Err(RcurcError::Schema(format!(
            "duplicate value for entry ({}, {})",
            w[0].0, w[0].1
        )));
    }
    let union = omega_r.union(&omega_c);
    if union.len() != values.len() {
        return Err(RcurcError::Schema(format!(
            "{} values for {} observed entries",
            values.len(),
            union.len()
        )));
    }
    let lookup = |mask: &Mask| -> Result<Vec<f64>> {
        mask.entries()
            .iter()
            .map(|&(i, j)| {
                values
                    .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
                    .map(|p| values[p].2)
                    .map_err(|_| RcurcError::Schema(format!("no value for entry ({i}, {j})")))
            })
            .collect()
    };
    let values_r = lookup(&omega_r)?;
    let values_c = lookup(&omega_c)?;
    CcsObservation::new(row_idx, col_idx, omega_r, values_r, omega_c, values_c).map_err(schema)
}

pub fn write_observation(path: impl AsRef<Path>, obs: &CcsObservation) -> Result<()> {
    write_bytes(path.as_ref(), observation_to_json(obs)?.as_bytes())
}

pub fn read_observation(path: impl AsRef<Path>) -> Result<CcsObservation> {
    let bytes = read_bytes(path.as_ref())?;
    let text = String::from_utf8(bytes)
        .map_err(|e| format_err(e.utf8_error().valid_up_to() as u64, "observation is not UTF-8"))?;
    observation_from_json(&text)
}

/// Seventeen significant digits: enough to round-trip any `f64`.
fn full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trace_to_csv(report: &SolveReport) -> String {
    let mut out = String::with_capacity(64 * (report.trace.len() + 2));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for row in &report.trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iter,
            full_precision(row.e_k),
            full_precision(row.zeta_k),
            full_precision(row.wall_ms)
        ));
    }
    out.push_str(&format!("# termination={}\n", report.termination));
    out
}

pub fn write_trace(path: impl AsRef<Path>, report: &SolveReport) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| RcurcError::io(path, e))?;
    file.write_all(trace_to_csv(report).as_bytes())
        .map_err(|e| RcurcError::io(path, e))
}

/// Parses a trace written by [`write_trace`].
pub fn parse_trace(text: &str) -> Result<(Vec<TraceRow>, Option<Termination>)> {
    let mut lines = text.lines();
    let mut offset = 0u64;
    match lines.next() {
        Some(h) if h == TRACE_HEADER => offset += h.len() as u64 + 1,
        _ => return Err(format_err(0, format!("expected header {TRACE_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    let mut termination = None;
    for line in lines {
        if let Some(rest) = line.strip_prefix("# termination=") {
            termination = Some(match rest {
                "converged" => Termination::Converged,
                "max_iters" => Termination::MaxIters,
                "stagnated" => Termination::Stagnated,
                other => return Err(format_err(offset, format!("unknown termination {other:?}"))),
            });
        } else if !line.is_empty() {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || format_err(offset, format!("malformed trace row {line:?}"));
            if fields.len() != 4 {
                return Err(bad());
            }
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            rows.push(TraceRow {
                iter: fields[0].parse().map_err(|_| bad())?,
                e_k: real(fields[1])?,
                zeta_k: real(fields[2])?,
                wall_ms: real(fields[3])?,
            });
        }
        offset += line.len() as u64 + 1;
    }
    Ok((rows, termination))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<(Vec<TraceRow>, Option<Termination>)> {
    let bytes = read_bytes(path.as_ref())?;
    parse_trace(&String::from_utf8_lossy(&bytes))
}
