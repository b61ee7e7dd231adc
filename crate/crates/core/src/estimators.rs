//! Empirical estimators cross-checking the closed-form limit quantities:
//! the extremal index from block exceedance frequencies, the probabilities
//! of the block-structure events behind the sparse spectrum shortcut, and
//! the decay of the truncated-remainder norm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::matrix::{self, TruncationParams};
use crate::rng::mix2;
use crate::spectra;
use crate::stats;
use crate::tail::NormalizationSeq;

/// Extremal index estimate with its binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    pub stderr: f64,
    pub acceptance: f64,
    pub blocks: u64,
}

/// Estimate the extremal index from fresh `r x r` blocks: with
/// `k = n / r`, the scaled exceedance frequency
/// `u^alpha k^2 P(block max > a_{n^2} u)` converges to theta.
pub fn estimate_extremal_index(
    model: &FieldModel,
    n: usize,
    r: usize,
    u: f64,
    reps: u64,
    seed: u64,
) -> Result<ThetaEstimate> {
    if r == 0 || r * 8 > n {
        return Err(Error::validation(format!("block side {r} not << n = {n}")));
    }
    if u < 1.0 {
        return Err(Error::validation("u must be at least 1"));
    }
    if reps == 0 {
        return Err(Error::validation("reps must be positive"));
    }
    let alpha = model.alpha();
    let k = (n / r) as u64;
    let total = reps * k * k;
    let seq = NormalizationSeq::exact(alpha, model.tail_constant()?);
    let threshold = seq.norm_constant((n * n) as u64)? * u;

    let chunk = 1u64 << 14;
    let chunks: Vec<u64> = (0..total.div_ceil(chunk)).collect();
    let accepted: u64 = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(total);
            let mut acc = 0u64;
            for b in lo..hi {
                let block_seed = mix2(seed ^ 0x7E7A_0000_0000_0000, b);
                if model
                    .block_max_exceeds(r, block_seed, threshold)
                    .expect("block scan")
                {
                    acc += 1;
                }
            }
            acc
        })
        .sum();

    if accepted == 0 {
        return Err(Error::numeric(
            "no block exceedances observed; lower u or enlarge n".to_string(),
        ));
    }
    let p_hat = accepted as f64 / total as f64;
    let scale = u.powf(alpha) * (k * k) as f64;
    Ok(ThetaEstimate {
        theta_hat: scale * p_hat,
        stderr: scale * stats::binomial_se(p_hat, total),
        acceptance: p_hat,
        blocks: total,
    })
}

/// Monte Carlo frequencies of the block-structure events on the thresholded
/// symmetric ensemble.
#[derive(Debug, Clone, Copy)]
pub struct BlockEventProbs {
    /// some block row holds two distinct nonzero blocks
    pub p_multi_row: f64,
    /// some diagonal block is nonzero
    pub p_diag_nonzero: f64,
    /// some block row holds three consecutive nonzero blocks
    pub p_three_consecutive: f64,
    pub reps: u64,
}

pub fn block_event_probs(
    model: &FieldModel,
    n: usize,
    trunc: &TruncationParams,
    r: usize,
    reps: u64,
    seed: u64,
) -> Result<BlockEventProbs> {
    if !n.is_multiple_of(r) {
        return Err(Error::validation(format!("block side {r} must divide n = {n}")));
    }
    if reps == 0 {
        return Err(Error::validation("reps must be positive"));
    }
    let alpha = model.alpha();
    let seq = NormalizationSeq::exact(alpha, model.tail_constant()?);
    let b_n = seq.norm_constant((n * n) as u64)?;
    let eps = trunc.eps(n, b_n);
    let k = n / r;

    let counts: Vec<(u64, u64, u64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let field = model
                .generate(n, n, mix2(seed ^ 0xE7E7, rep))
                .expect("field generation");
            // surviving upper-triangle block coordinates of the reflected matrix
            let mut nonzero = std::collections::BTreeSet::new();
            for i in 0..n {
                for j in i..n {
                    if field.get(i, j).abs() > eps * b_n {
                        nonzero.insert((i / r, j / r));
                        nonzero.insert((j / r, i / r));
                    }
                }
            }
            let mut multi = 0u64;
            let mut diag = 0u64;
            let mut consec = 0u64;
            'rows: for bi in 0..k {
                let cols: Vec<usize> =
                    nonzero.range((bi, 0)..=(bi, k - 1)).map(|&(_, c)| c).collect();
                if cols.len() > 1 {
                    multi = 1;
                }
                for w in cols.windows(3) {
                    if w[2] == w[0] + 2 && w[1] == w[0] + 1 {
                        consec = 1;
                        break 'rows;
                    }
                }
            }
            for bi in 0..k {
                if nonzero.contains(&(bi, bi)) {
                    diag = 1;
                    break;
                }
            }
            (multi, diag, consec)
        })
        .collect();

    let total = reps as f64;
    Ok(BlockEventProbs {
        p_multi_row: counts.iter().map(|c| c.0).sum::<u64>() as f64 / total,
        p_diag_nonzero: counts.iter().map(|c| c.1).sum::<u64>() as f64 / total,
        p_three_consecutive: counts.iter().map(|c| c.2).sum::<u64>() as f64 / total,
        reps,
    })
}

/// Median spectral norm of the below-threshold remainder for each level.
pub fn truncated_norm_profile(
    model: &FieldModel,
    n: usize,
    eps_list: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if eps_list.is_empty() || reps == 0 {
        return Err(Error::validation("need at least one eps and one rep"));
    }
    let alpha = model.alpha();
    let seq = NormalizationSeq::exact(alpha, model.tail_constant()?);
    let norms: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let field = model
                .generate(n, n, mix2(seed ^ 0x7237, rep))
                .expect("field generation");
            let mat = matrix::build_wigner(&field, &seq).expect("wigner build");
            eps_list
                .iter()
                .map(|&eps| {
                    let (_, below) = matrix::truncate_sym(&mat, eps).expect("truncate");
                    let est = spectra::spectral_norm_sym(&below, 1e-8, 1000);
                    if est.converged {
                        est.value
                    } else {
                        est.frobenius
                    }
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(eps_list.len());
    for (idx, &eps) in eps_list.iter().enumerate() {
        let per_rep: Vec<f64> = norms.iter().map(|row| row[idx]).collect();
        out.push((eps, stats::median(&per_rep)?));
    }
    Ok(out)
}

/// CSV export of a truncated-norm profile: one row per threshold.
pub fn write_norm_profile_csv<W: std::io::Write>(
    w: &mut W,
    rows: &[(f64, f64)],
    fingerprint: &str,
    version: &str,
) -> Result<()> {
    writeln!(w, "# fingerprint={fingerprint} version={version}")?;
    writeln!(w, "eps,median_remainder_norm")?;
    for (eps, norm) in rows {
        writeln!(w, "{eps},{norm}")?;
    }
    Ok(())
}

/// CSV export of extremal-index estimates over a threshold ladder: one row
/// per u with the estimate and its binomial standard error.
pub fn write_theta_sweep_csv<W: std::io::Write>(
    w: &mut W,
    rows: &[(f64, ThetaEstimate)],
    fingerprint: &str,
    version: &str,
) -> Result<()> {
    writeln!(w, "# fingerprint={fingerprint} version={version}")?;
    writeln!(w, "u,theta_hat,stderr,acceptance,blocks")?;
    for (u, est) in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            u, est.theta_hat, est.stderr, est.acceptance, est.blocks
        )?;
    }
    Ok(())
}
