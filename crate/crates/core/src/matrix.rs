//! Matrix assembly: normalized symmetric and rectangular ensembles, entry
//! truncation, block decomposition, and the threshold parameter windows.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FieldSample;
use crate::tail::NormalizationSeq;

/// Dense symmetric matrix, full storage with exact mirror equality.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::validation("symmetric matrix data length mismatch"));
        }
        let m = SymMatrix { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::validation("matrix not symmetric"));
                }
            }
        }
        Ok(m)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Dense rectangular data matrix with its aspect ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    pub p: usize,
    pub n: usize,
    pub gamma: f64,
    pub data: Vec<f64>,
}

impl RectMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// Reflect the upper triangle of a square field sample and divide by
/// `a_{n^2}`.
pub fn build_wigner(field: &FieldSample, seq: &NormalizationSeq) -> Result<SymMatrix> {
    if !field.is_square() {
        return Err(Error::validation(format!(
            "wigner matrix needs a square field, got {} x {}",
            field.p, field.n
        )));
    }
    let n = field.n;
    let b = seq.norm_constant((n * n) as u64)?;
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, field.get(i, j) / b);
        }
    }
    Ok(m)
}

/// Divide a `p x n` field sample by `a_{np}`.
pub fn build_data(field: &FieldSample, seq: &NormalizationSeq) -> Result<RectMatrix> {
    let (p, n) = (field.p, field.n);
    let a = seq.norm_constant((n * p) as u64)?;
    let data = field.values.iter().map(|x| x / a).collect();
    Ok(RectMatrix { p, n, gamma: p as f64 / n as f64, data })
}

/// Coordinate-list form of the entries above a threshold.
#[derive(Debug, Clone, Default)]
pub struct SparseEntries {
    pub rows: usize,
    pub cols: usize,
    /// Sorted row-major `(i, j, value)` with `|value| > eps`.
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseEntries {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Split a dense matrix into the sparse part above `eps` and the dense
/// remainder, an exact entrywise decomposition.
pub fn truncate_dense(
    rows: usize,
    cols: usize,
    data: &[f64],
    eps: f64,
) -> Result<(SparseEntries, Vec<f64>)> {
    if eps < 0.0 {
        return Err(Error::validation("truncation threshold must be nonnegative"));
    }
    let mut above = SparseEntries { rows, cols, entries: Vec::new() };
    let mut below = data.to_vec();
    for i in 0..rows {
        for j in 0..cols {
            let v = data[i * cols + j];
            if v.abs() > eps {
                above.entries.push((i as u32, j as u32, v));
                below[i * cols + j] = 0.0;
            }
        }
    }
    Ok((above, below))
}

pub fn truncate_sym(m: &SymMatrix, eps: f64) -> Result<(SparseEntries, SymMatrix)> {
    let (above, below) = truncate_dense(m.n, m.n, &m.data, eps)?;
    Ok((above, SymMatrix { n: m.n, data: below }))
}

pub fn truncate_rect(m: &RectMatrix, eps: f64) -> Result<(SparseEntries, RectMatrix)> {
    let (above, below) = truncate_dense(m.p, m.n, &m.data, eps)?;
    Ok((above, RectMatrix { p: m.p, n: m.n, gamma: m.gamma, data: below }))
}

/// An `r x r` block grid over a matrix, with per-block max-norms.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub r: usize,
    /// blocks per column of the grid (row direction)
    pub kp: usize,
    /// blocks per row of the grid (column direction)
    pub kn: usize,
    /// row-major `kp x kn` max-norms
    pub max_norms: Vec<f64>,
}

impl BlockDecomposition {
    #[inline]
    pub fn norm(&self, bi: usize, bj: usize) -> f64 {
        self.max_norms[bi * self.kn + bj]
    }

    pub fn global_max(&self) -> f64 {
        self.max_norms.iter().fold(0.0, |acc, x| acc.max(*x))
    }

    /// Blocks whose max-norm exceeds `eps`.
    pub fn surviving(&self, eps: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for bi in 0..self.kp {
            for bj in 0..self.kn {
                if self.norm(bi, bj) > eps {
                    out.push((bi, bj));
                }
            }
        }
        out
    }
}

pub fn block_decompose_dense(
    rows: usize,
    cols: usize,
    data: &[f64],
    r: usize,
) -> Result<BlockDecomposition> {
    if r == 0 || r > rows || r > cols {
        return Err(Error::validation(format!("block side {r} out of range")));
    }
    if !rows.is_multiple_of(r) || !cols.is_multiple_of(r) {
        return Err(Error::validation(format!(
            "block side {r} must divide both dimensions {rows} x {cols}; trim first"
        )));
    }
    let kp = rows / r;
    let kn = cols / r;
    let mut max_norms = vec![0.0f64; kp * kn];
    for i in 0..rows {
        let bi = i / r;
        for j in 0..cols {
            let v = data[i * cols + j].abs();
            let cell = &mut max_norms[bi * kn + j / r];
            if v > *cell {
                *cell = v;
            }
        }
    }
    Ok(BlockDecomposition { r, kp, kn, max_norms })
}

pub fn block_decompose(m: &SymMatrix, r: usize) -> Result<BlockDecomposition> {
    block_decompose_dense(m.n, m.n, &m.data, r)
}

/// Default block side `ceil(n^{1-eta})` with `eta = 0.9`.
pub fn default_block_side(n: usize) -> usize {
    (n as f64).powf(0.1).ceil() as usize
}

/// Largest multiple of `r` not exceeding `n`; ensembles are trimmed to this
/// so the grid tiles exactly.
pub fn trim_to_multiple(n: usize, r: usize) -> usize {
    (n / r) * r
}

/// Truncation thresholds: a fixed level, or the n-dependent pair
/// `eps_n = n^beta / b_n` and `eps~_n = b_n^{(kappa-1)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub enum TruncationParams {
    FixedEps(f64),
    Adaptive { beta: f64, eta: f64, kappa: f64 },
}

impl TruncationParams {
    pub fn fixed(eps: f64) -> Result<Self> {
        if eps < 0.0 {
            return Err(Error::validation("eps must be nonnegative"));
        }
        Ok(TruncationParams::FixedEps(eps))
    }

    pub fn adaptive(alpha: f64, beta: f64, eta: f64, kappa: f64, n: usize, b_n: f64) -> Result<Self> {
        let (lo, hi) = beta_window(alpha)?;
        if !(beta > lo && beta < hi) {
            return Err(Error::validation(format!(
                "beta {beta} outside ({lo}, {hi}) for alpha {alpha}"
            )));
        }
        if !(eta > 5.0 / 6.0 && eta < 1.0) {
            return Err(Error::validation(format!("eta {eta} outside (5/6, 1)")));
        }
        if kappa <= eta {
            return Err(Error::validation(format!("kappa {kappa} must exceed eta {eta}")));
        }
        let t = TruncationParams::Adaptive { beta, eta, kappa };
        let eps = t.eps(n, b_n);
        let eps_tilde = t.eps_tilde(b_n).unwrap();
        if eps_tilde <= eps {
            return Err(Error::validation(format!(
                "second threshold {eps_tilde} not above first {eps} at n = {n}"
            )));
        }
        Ok(t)
    }

    /// First threshold at matrix size `n` with normalization `b_n`.
    pub fn eps(&self, n: usize, b_n: f64) -> f64 {
        match self {
            TruncationParams::FixedEps(e) => *e,
            TruncationParams::Adaptive { beta, .. } => (n as f64).powf(*beta) / b_n,
        }
    }

    /// Second (coarser) threshold; only defined in adaptive mode.
    pub fn eps_tilde(&self, b_n: f64) -> Option<f64> {
        match self {
            TruncationParams::FixedEps(_) => None,
            TruncationParams::Adaptive { kappa, .. } => Some(b_n.powf((kappa - 1.0) / 2.0)),
        }
    }

    /// Threshold the block-spectrum shortcut keys on: the fixed level, or
    /// the coarser second threshold in adaptive mode.
    pub fn sparse_threshold(&self, _n: usize, b_n: f64) -> f64 {
        match self {
            TruncationParams::FixedEps(e) => *e,
            TruncationParams::Adaptive { .. } => self.eps_tilde(b_n).unwrap(),
        }
    }
}

/// Open interval of admissible `beta` exponents for `2 <= alpha < 4`.
pub fn beta_window(alpha: f64) -> Result<(f64, f64)> {
    if !(2.0..4.0).contains(&alpha) {
        return Err(Error::validation(format!(
            "adaptive truncation is defined for alpha in [2, 4), got {alpha}"
        )));
    }
    let lo = 4.0 / (3.0 * alpha);
    let hi = 2.0 * (8.0 - alpha) / (alpha * (10.0 - alpha));
    assert!(lo < hi, "beta window empty at alpha = {alpha}");
    Ok((lo, hi))
}

/// Midpoint-beta adaptive parameters for `2 <= alpha < 4`; for smaller alpha
/// the thresholds do not need to shrink with n, so callers pick a fixed
/// ladder instead.
pub fn default_truncation(alpha: f64, n: usize, b_n: f64) -> Result<TruncationParams> {
    if alpha < 2.0 {
        return Err(Error::validation(
            "alpha < 2: choose a fixed eps ladder (TruncationParams::fixed)",
        ));
    }
    let (lo, hi) = beta_window(alpha)?;
    TruncationParams::adaptive(alpha, 0.5 * (lo + hi), 0.9, 0.95, n, b_n)
}

const MAGIC: &[u8; 8] = b"HTMX0001";

/// Write a dense row-major array in the flat binary format: an 8-byte magic,
/// two little-endian u32 dimensions, then little-endian f64 values.
pub fn write_array_bin<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::validation("array shape mismatch"));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_array_bin<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<f64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::validation("bad magic in binary matrix file"));
    }
    let mut dim = [0u8; 4];
    r.read_exact(&mut dim)?;
    let rows = u32::from_le_bytes(dim) as usize;
    r.read_exact(&mut dim)?;
    let cols = u32::from_le_bytes(dim) as usize;
    let mut data = vec![0.0f64; rows * cols];
    let mut buf = [0u8; 8];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok((rows, cols, data))
}

/// CSV form: one row per matrix row, shortest-round-trip float formatting.
pub fn write_array_csv<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::validation("array shape mismatch"));
    }
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| format!("{}", data[i * cols + j])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_array_csv<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<f64>)> {
    let mut text = String::new();
    let mut rd = std::io::BufReader::new(r);
    rd.read_to_string(&mut text)?;
    let mut data = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::validation(format!("csv parse: {e}")))?;
        if rows == 0 {
            cols = vals.len();
        } else if vals.len() != cols {
            return Err(Error::validation("ragged csv matrix"));
        }
        data.extend(vals);
        rows += 1;
    }
    Ok((rows, cols, data))
}

pub fn load_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut f = std::fs::File::open(path)?;
    let mut head = [0u8; 8];
    use std::io::Seek;
    let is_bin = f.read_exact(&mut head).is_ok() && &head == MAGIC;
    f.seek(std::io::SeekFrom::Start(0))?;
    if is_bin {
        read_array_bin(&mut f)
    } else {
        read_array_csv(&mut f)
    }
}
