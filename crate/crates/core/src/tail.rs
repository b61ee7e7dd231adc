//! Regularly varying entry distributions and their normalization sequences.
//!
//! A `TailModel` is a univariate law with `P(|X| > x) ~ c x^{-alpha}`. The
//! slowly varying factor is fixed to a constant (exact power tails), which
//! makes the normalization sequence `a_n` — defined by `n P(|X| > a_n) -> 1`
//! — available in closed form: `a_n = (c n)^{1/alpha}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::rng::{u64_to_unit_half_open, u64_to_unit_open_closed, RngStream};

/// Quantile function supplied by the caller for custom laws.
pub type QuantileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A sampler closure drawing one value from a stream.
pub type SampleFn = Arc<dyn Fn(&mut RngStream) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum TailFamily {
    /// `|X| = scale * U^{-1/alpha}` exactly; sign independent of magnitude.
    ExactPareto,
    /// Exact Pareto magnitude with the signed mean subtracted analytically,
    /// so the law has mean zero. Requires `alpha > 1`.
    ShiftedParetoCentered,
    /// User-supplied quantile function `F^{-1}(u)` for the signed variable.
    CustomInverseCdf(QuantileFn),
}

impl fmt::Debug for TailFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailFamily::ExactPareto => write!(f, "ExactPareto"),
            TailFamily::ShiftedParetoCentered => write!(f, "ShiftedParetoCentered"),
            TailFamily::CustomInverseCdf(_) => write!(f, "CustomInverseCdf(..)"),
        }
    }
}

/// A regularly varying entry law with tail index `alpha` in (0, 4).
#[derive(Debug, Clone)]
pub struct TailModel {
    pub alpha: f64,
    /// Probability that a large value is positive.
    pub rho: f64,
    pub scale: f64,
    pub family: TailFamily,
}

impl TailModel {
    pub fn new(alpha: f64, rho: f64, scale: f64, family: TailFamily) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 4.0) {
            return Err(Error::validation(format!("alpha {alpha} outside (0, 4)")));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::validation(format!("rho {rho} outside [0, 1]")));
        }
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::validation(format!("scale {scale} must be positive")));
        }
        if matches!(family, TailFamily::ShiftedParetoCentered) && alpha <= 1.0 {
            return Err(Error::validation(
                "centered Pareto needs alpha > 1 for a finite mean",
            ));
        }
        Ok(TailModel { alpha, rho, scale, family })
    }

    pub fn exact_pareto(alpha: f64, rho: f64, scale: f64) -> Result<Self> {
        Self::new(alpha, rho, scale, TailFamily::ExactPareto)
    }

    pub fn centered_pareto(alpha: f64, rho: f64, scale: f64) -> Result<Self> {
        Self::new(alpha, rho, scale, TailFamily::ShiftedParetoCentered)
    }

    /// Mean of the signed Pareto mixture before centering.
    fn signed_mean(&self) -> f64 {
        (2.0 * self.rho - 1.0) * self.scale * self.alpha / (self.alpha - 1.0)
    }

    /// True when the law is mean-zero by construction, as the matrix
    /// ensembles require for `alpha >= 2`.
    pub fn is_mean_zero(&self) -> bool {
        match self.family {
            TailFamily::ShiftedParetoCentered => true,
            TailFamily::ExactPareto => self.rho == 0.5,
            TailFamily::CustomInverseCdf(_) => false,
        }
    }

    /// Tail constant `c` with `P(|X| > x) ~ c x^{-alpha}`; `None` for custom
    /// laws, which must use the Monte Carlo normalization.
    pub fn tail_constant(&self) -> Option<f64> {
        match self.family {
            TailFamily::ExactPareto | TailFamily::ShiftedParetoCentered => {
                Some(self.scale.powf(self.alpha))
            }
            TailFamily::CustomInverseCdf(_) => None,
        }
    }

    /// Draw from two raw words: one for the magnitude, one for the sign.
    /// Keeping the transform word-addressed lets the lattice generator
    /// reproduce any single cell in isolation.
    #[inline]
    pub fn sample_from_words(&self, mag_word: u64, sign_word: u64) -> f64 {
        match &self.family {
            TailFamily::ExactPareto => {
                let u = u64_to_unit_open_closed(mag_word);
                self.signed(pareto_magnitude(self.scale, self.alpha, u), sign_word)
            }
            TailFamily::ShiftedParetoCentered => {
                let u = u64_to_unit_open_closed(mag_word);
                self.signed(pareto_magnitude(self.scale, self.alpha, u), sign_word)
                    - self.signed_mean()
            }
            TailFamily::CustomInverseCdf(qf) => qf(u64_to_unit_half_open(mag_word)),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let mag = rng.next_u64();
        let sign = rng.next_u64();
        self.sample_from_words(mag, sign)
    }

    #[inline]
    fn signed(&self, magnitude: f64, sign_word: u64) -> f64 {
        if u64_to_unit_half_open(sign_word) < self.rho {
            magnitude
        } else {
            -magnitude
        }
    }

    /// CDF of the law, available for the exact family; drives the KS
    /// self-check of the sampler.
    pub fn cdf_exact_pareto(&self, x: f64) -> f64 {
        // P(X <= x) for the two-sided exact Pareto (no centering).
        let tail = |y: f64| (y / self.scale).powf(-self.alpha).min(1.0);
        if x >= 0.0 {
            (1.0 - self.rho) + self.rho * (1.0 - if x > 0.0 { tail(x) } else { 1.0 })
        } else {
            (1.0 - self.rho) * tail(-x)
        }
    }
}

#[inline]
fn pareto_magnitude(scale: f64, alpha: f64, u: f64) -> f64 {
    if alpha == 1.0 {
        scale / u
    } else {
        scale * u.powf(-1.0 / alpha)
    }
}

/// How `a_n` is obtained.
pub enum NormMethod {
    /// `a_n = (c n)^{1/alpha}` from a known tail constant `c`.
    Exact { tail_constant: f64 },
    /// Empirical `(1 - 1/n)` quantile of `|X|` over a large sample drawn from
    /// `sampler`; deterministic given `seed`.
    MonteCarloQuantile { sampler: SampleFn, seed: u64 },
}

impl fmt::Debug for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormMethod::Exact { tail_constant } => {
                write!(f, "Exact {{ tail_constant: {tail_constant} }}")
            }
            NormMethod::MonteCarloQuantile { seed, .. } => {
                write!(f, "MonteCarloQuantile {{ seed: {seed} }}")
            }
        }
    }
}

/// The sequence `a_n` with `n P(|X| > a_n) -> 1`, cached per `n`.
///
/// The cache is behind a mutex: warm it sequentially, read it from as many
/// threads as you like afterwards.
#[derive(Debug)]
pub struct NormalizationSeq {
    pub alpha: f64,
    method: NormMethod,
    cache: Mutex<BTreeMap<u64, f64>>,
}

impl NormalizationSeq {
    pub fn exact(alpha: f64, tail_constant: f64) -> Self {
        NormalizationSeq {
            alpha,
            method: NormMethod::Exact { tail_constant },
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Exact sequence for a unit-scale exact-Pareto law: `a_n = n^{1/alpha}`.
    pub fn exact_unit(alpha: f64) -> Self {
        Self::exact(alpha, 1.0)
    }

    pub fn monte_carlo(alpha: f64, sampler: SampleFn, seed: u64) -> Self {
        NormalizationSeq {
            alpha,
            method: NormMethod::MonteCarloQuantile { sampler, seed },
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Sequence for an entry law: analytic when the tail constant is known,
    /// otherwise (custom quantile laws) forced onto the Monte Carlo route.
    pub fn for_tail(model: &TailModel, seed: u64) -> Self {
        match model.tail_constant() {
            Some(c) => Self::exact(model.alpha, c),
            None => {
                let m = model.clone();
                Self::monte_carlo(model.alpha, Arc::new(move |rng| m.sample(rng)), seed)
            }
        }
    }

    /// `a_n`; rejects `n = 0`. Idempotent through the cache.
    pub fn norm_constant(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::validation("normalization needs n >= 1"));
        }
        match &self.method {
            NormMethod::Exact { tail_constant } => {
                Ok((tail_constant * n as f64).powf(1.0 / self.alpha))
            }
            NormMethod::MonteCarloQuantile { sampler, seed } => {
                {
                    let cache = self.cache.lock().unwrap();
                    if let Some(&v) = cache.get(&n) {
                        return Ok(v);
                    }
                }
                let v = self.mc_quantile(sampler, *seed, n)?;
                self.cache.lock().unwrap().insert(n, v);
                Ok(v)
            }
        }
    }

    /// Pre-compute `a_n` for each requested `n` before any parallel phase.
    pub fn warm(&self, ns: &[u64]) -> Result<()> {
        for &n in ns {
            self.norm_constant(n)?;
        }
        Ok(())
    }

    fn mc_quantile(&self, sampler: &SampleFn, seed: u64, n: u64) -> Result<f64> {
        // Sample size: at least 100 n, scaled up so the relative error of the
        // (1 - 1/n) quantile stays within ~2% at three standard errors. The
        // quantile sensitivity is 1/alpha, hence the alpha^-2 factor.
        let per = ((3.0 / (0.02 * self.alpha)).powi(2).ceil() as u64).max(100);
        let total = (per.saturating_mul(n)).min(2_000_000_000);
        let keep = (total / n + 1) as usize;

        let mut rng = RngStream::new(seed, n);
        // min-heap of the `keep` largest |X|; the quantile is its minimum
        let mut top: Vec<f64> = Vec::with_capacity(keep + 1);
        for _ in 0..total {
            let x = sampler(&mut rng).abs();
            if top.len() < keep {
                top.push(x);
                if top.len() == keep {
                    top.sort_by(|a, b| a.partial_cmp(b).unwrap());
                }
            } else if x > top[0] {
                let pos = top.partition_point(|&t| t < x);
                top.insert(pos, x);
                top.remove(0);
            }
        }
        if top.len() < keep {
            return Err(Error::numeric("quantile sample too small"));
        }
        Ok(top[0])
    }
}

/// Hill estimator of the tail index from the `k` largest order statistics
/// of `|samples|`.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::validation("hill: empty sample"));
    }
    if k == 0 || k >= samples.len() {
        return Err(Error::validation(format!(
            "hill: k = {k} must be in [1, {})",
            samples.len()
        )));
    }
    let mut mags: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let pivot = mags[k];
    if pivot <= 0.0 {
        return Err(Error::numeric("hill: non-positive pivot"));
    }
    let mean_log: f64 = mags[..k].iter().map(|&x| (x / pivot).ln()).sum::<f64>() / k as f64;
    if mean_log <= 0.0 {
        return Err(Error::numeric("hill: degenerate sample (zero log-spacings)"));
    }
    Ok(1.0 / mean_log)
}
