//! Dense symmetric eigensolver, singular values via the Gram route, the
//! block-sparse spectrum shortcut for thresholded matrices, and norm
//! machinery for perturbation accounting.

use crate::error::{Error, Result};
use crate::matrix::{SparseEntries, SymMatrix};
use crate::rng::mix2;

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
/// When vectors are requested, row `k` of `vectors` is the unit eigenvector
/// paired with `values[k]`.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
}

/// Householder tridiagonalization followed by implicit-shift QL.
pub fn sym_eig(m: &SymMatrix, want_vectors: bool) -> Result<Eig> {
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    let n = m.n;
    if n == 0 {
        return Ok(Eig { values: vec![], vectors: want_vectors.then(Vec::new) });
    }
    let mut a = m.data.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tridiagonalize(&mut a, &mut d, &mut e, n, want_vectors);
    ql_implicit(&mut d, &mut e, if want_vectors { Some(&mut a) } else { None }, n)?;

    // sort descending, carrying vectors along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        order
            .iter()
            .map(|&col| (0..n).map(|row| a[row * n + col]).collect())
            .collect()
    });
    Ok(Eig { values, vectors })
}

/// Householder reduction to tridiagonal form (in place). With
/// `accumulate`, `a` ends up holding the orthogonal transform whose columns
/// carry the basis for the later QL rotations.
fn tridiagonalize(a: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize, accumulate: bool) {
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    if accumulate {
                        a[j * n + i] = a[i * n + j] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f_acc += e[j] * a[i * n + j];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if accumulate {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += a[i * n + k] * a[k * n + j];
                    }
                    for k in 0..i {
                        a[k * n + j] -= g * a[k * n + i];
                    }
                }
            }
            d[i] = a[i * n + i];
            a[i * n + i] = 1.0;
            for j in 0..i {
                a[j * n + i] = 0.0;
                a[i * n + j] = 0.0;
            }
        } else {
            d[i] = a[i * n + i];
        }
    }
}

/// QL with implicit shifts on a tridiagonal `(d, e)`; rotations are applied
/// to the columns of `v` when present.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut v: Option<&mut [f64]>, n: usize) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::numeric("QL iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            if g < 0.0 {
                r = -r;
            }
            g = d[m] - d[l] + e[l] / (g + r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(vv) = v.as_deref_mut() {
                    for k in 0..n {
                        f = vv[k * n + i + 1];
                        vv[k * n + i + 1] = s * vv[k * n + i] + c * f;
                        vv[k * n + i] = c * vv[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Descending singular values of a dense `rows x cols` array, computed as
/// square roots of the eigenvalues of the smaller Gram matrix.
pub fn singular_values_dense(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), rows * cols);
    let k = rows.min(cols);
    if k == 0 {
        return Vec::new();
    }
    let gram = if rows <= cols {
        // A A'
        let mut g = vec![0.0f64; rows * rows];
        for i in 0..rows {
            for j in i..rows {
                let mut s = 0.0;
                for t in 0..cols {
                    s += data[i * cols + t] * data[j * cols + t];
                }
                g[i * rows + j] = s;
                g[j * rows + i] = s;
            }
        }
        SymMatrix { n: rows, data: g }
    } else {
        // A' A
        let mut g = vec![0.0f64; cols * cols];
        for i in 0..cols {
            for j in i..cols {
                let mut s = 0.0;
                for t in 0..rows {
                    s += data[t * cols + i] * data[t * cols + j];
                }
                g[i * cols + j] = s;
                g[j * cols + i] = s;
            }
        }
        SymMatrix { n: cols, data: g }
    };
    let eig = sym_eig(&gram, false).expect("gram eigensolve");
    eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect()
}

pub fn singular_values(m: &crate::matrix::RectMatrix) -> Vec<f64> {
    singular_values_dense(m.p, m.n, &m.data)
}

/// Result of a power-iteration spectral norm estimate. `frobenius` is always
/// a certified upper envelope; `value` converges from below.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub frobenius: f64,
}

/// Spectral norm of a dense array by power iteration on the Gram operator,
/// with a deterministic pseudo-random start vector.
pub fn spectral_norm_dense(
    rows: usize,
    cols: usize,
    data: &[f64],
    tol: f64,
    max_iter: usize,
) -> NormEstimate {
    let frobenius = data.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frobenius == 0.0 {
        return NormEstimate { value: 0.0, converged: true, iterations: 0, frobenius };
    }
    let mut v: Vec<f64> = (0..cols)
        .map(|i| crate::rng::u64_to_unit_half_open(mix2(0x5EED, i as u64)) - 0.5)
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0f64; rows];
    let mut sigma = 0.0f64;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        // w = A v
        for i in 0..rows {
            let row = &data[i * cols..(i + 1) * cols];
            w[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        // v = A' w
        for x in v.iter_mut() {
            *x = 0.0;
        }
        for i in 0..rows {
            let wi = w[i];
            if wi != 0.0 {
                let row = &data[i * cols..(i + 1) * cols];
                for (j, a) in row.iter().enumerate() {
                    v[j] += a * wi;
                }
            }
        }
        let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm_v == 0.0 {
            return NormEstimate { value: 0.0, converged: true, iterations, frobenius };
        }
        // v was unit, so ||A'(A v)|| is a Rayleigh estimate of sigma^2
        let next = norm_v.sqrt();
        for x in v.iter_mut() {
            *x /= norm_v;
        }
        if (next - sigma).abs() <= tol * next.max(1e-300) {
            sigma = next;
            converged = true;
            break;
        }
        sigma = next;
    }
    NormEstimate { value: sigma.min(frobenius), converged, iterations, frobenius }
}

pub fn spectral_norm_sym(m: &SymMatrix, tol: f64, max_iter: usize) -> NormEstimate {
    spectral_norm_dense(m.n, m.n, &m.data, tol, max_iter)
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

/// Why the sparse shortcut declined to produce a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallbackReason {
    /// a diagonal block holds an above-threshold entry
    DiagonalBlock,
    /// some block row (equivalently column) holds two distinct nonzero blocks
    MultipleBlocksInRow,
}

/// One positive singular value contributed by an off-diagonal block pair.
#[derive(Debug, Clone, Copy)]
pub struct BlockSingular {
    pub value: f64,
    /// upper-triangle block coordinates (bi < bj) it came from
    pub block: (usize, usize),
}

/// Output of the block-sparse spectrum shortcut. On the structured event the
/// nonzero spectrum of the thresholded symmetric matrix is exactly
/// `{ +s, -s : s in singulars }`; otherwise the caller falls back to the
/// dense path. The fallback is a value, not an error.
#[derive(Debug, Clone)]
pub enum SparseSpectrum {
    Spectrum { singulars: Vec<BlockSingular> },
    Fallback { reason: FallbackReason },
}

/// Spectrum of a thresholded symmetric matrix from its surviving entries,
/// valid when every block row has at most one nonzero off-diagonal block and
/// all diagonal blocks are empty.
pub fn sparse_truncated_spectrum(above: &SparseEntries, r: usize) -> Result<SparseSpectrum> {
    if above.rows != above.cols {
        return Err(Error::validation("sparse shortcut needs a square matrix"));
    }
    if r == 0 || !above.rows.is_multiple_of(r) {
        return Err(Error::validation("block side must divide the matrix order"));
    }
    use std::collections::BTreeMap;
    let mut row_partner: BTreeMap<usize, usize> = BTreeMap::new();
    for &(i, j, _) in &above.entries {
        let bi = i as usize / r;
        let bj = j as usize / r;
        if bi == bj {
            return Ok(SparseSpectrum::Fallback { reason: FallbackReason::DiagonalBlock });
        }
        match row_partner.get(&bi) {
            None => {
                row_partner.insert(bi, bj);
            }
            Some(&prev) if prev == bj => {}
            Some(_) => {
                return Ok(SparseSpectrum::Fallback {
                    reason: FallbackReason::MultipleBlocksInRow,
                })
            }
        }
    }

    // group the upper-triangle entries by block pair and take block SVDs
    let mut blocks: BTreeMap<(usize, usize), Vec<(usize, usize, f64)>> = BTreeMap::new();
    for &(i, j, v) in &above.entries {
        let (i, j) = (i as usize, j as usize);
        if i < j {
            blocks.entry((i / r, j / r)).or_default().push((i % r, j % r, v));
        }
        if i == j {
            unreachable!("diagonal entries live in diagonal blocks");
        }
    }
    let mut singulars = Vec::new();
    for ((bi, bj), cells) in blocks {
        let mut dense = vec![0.0f64; r * r];
        for (li, lj, v) in cells {
            dense[li * r + lj] = v;
        }
        let sv = singular_values_dense(r, r, &dense);
        let top = sv.first().copied().unwrap_or(0.0);
        // the Gram route resolves sigma down to sqrt(eps) relative to the
        // top value; anything below that floor is a numerical zero
        let floor = top * (f64::EPSILON * r as f64).sqrt() * 4.0;
        for s in sv {
            if s > floor && s > 0.0 {
                singulars.push(BlockSingular { value: s, block: (bi, bj) });
            }
        }
    }
    singulars.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
    Ok(SparseSpectrum::Spectrum { singulars })
}

/// Observed eigenvalue displacement next to its certified bounds.
#[derive(Debug, Clone)]
pub struct WeylGap {
    pub gap: f64,
    pub spectral_bound: NormEstimate,
    pub frobenius_bound: f64,
}

/// Largest eigenvalue displacement between `m` and `m + e`, with the
/// spectral-norm bound on `e` that Weyl's inequality promises.
pub fn weyl_gap(m: &SymMatrix, e: &SymMatrix) -> Result<WeylGap> {
    if m.n != e.n {
        return Err(Error::validation("weyl_gap: dimension mismatch"));
    }
    let lam_m = sym_eig(m, false)?.values;
    let mut sum = SymMatrix::zeros(m.n);
    for i in 0..m.n * m.n {
        sum.data[i] = m.data[i] + e.data[i];
    }
    let lam_s = sym_eig(&sum, false)?.values;
    let gap = lam_m
        .iter()
        .zip(&lam_s)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let spectral_bound = spectral_norm_sym(e, 1e-8, 1000);
    Ok(WeylGap { gap, spectral_bound, frobenius_bound: e.frobenius() })
}

/// Split eigenvalues into the positive points (descending) and negative
/// points (most negative first); zeros are dropped.
pub fn spectrum_point_sets(eigs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pos: Vec<f64> = eigs.iter().copied().filter(|&x| x > 0.0).collect();
    let mut neg: Vec<f64> = eigs.iter().copied().filter(|&x| x < 0.0).collect();
    pos.sort_by(|a, b| b.partial_cmp(a).unwrap());
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (pos, neg)
}

/// Largest fraction of the vector's squared mass carried by the row ranges
/// of a single pair of blocks of side `r`.
pub fn localization_score(v: &[f64], r: usize) -> f64 {
    assert!(r >= 1 && !v.is_empty());
    let total: f64 = v.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 0.0;
    }
    let k = v.len().div_ceil(r);
    let mut masses = vec![0.0f64; k];
    for (i, x) in v.iter().enumerate() {
        masses[i / r] += x * x;
    }
    masses.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if masses.len() == 1 {
        return 1.0;
    }
    (masses[0] + masses[1]) / total
}
