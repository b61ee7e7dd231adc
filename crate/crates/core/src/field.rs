//! Stationary m-dependent random fields with regularly varying marginals.
//!
//! Every model is driven by i.i.d. noise placed on an extended integer
//! lattice through counter-based words, so a field sample is a pure function
//! of `(model, p, n, seed)` and any sub-block can be regenerated on its own.

use crate::error::{Error, Result};
use crate::limit::ClusterShapeSpec;
use crate::rng::{lattice_word, u64_to_unit_half_open};
use crate::spectra;
use crate::stats;
use crate::tail::TailModel;

const DOMAIN_NOISE_MAG: u64 = 1;
const DOMAIN_NOISE_SIGN: u64 = 2;
const DOMAIN_COEFF: u64 = 3;

/// The implemented stationary m-dependent field constructions.
#[derive(Debug, Clone)]
pub enum FieldModel {
    /// Independent entries; the degenerate m = 0 case.
    Iid { tail: TailModel },
    /// Two-dimensional moving average `X_it = sum h_kl Z_{i-k,t-l}` over a
    /// square coefficient array.
    LinearMa { filter: Vec<Vec<f64>>, noise: TailModel },
    /// Moving maximum with nonnegative coefficients and nonnegative noise;
    /// only defined for tail index below 2.
    MaxLinear { filter: Vec<Vec<f64>>, noise: TailModel },
    /// The fixed random-coefficient example
    /// `X_it = 4 Z_it + e_{i-1,t} Z_{i-1,t} + 3 Z_{i-1,t-1}` with Bernoulli
    /// coefficients `e` of parameter `q`.
    RandomCoeffBernoulli { q: f64, noise: TailModel },
    /// `X_it = e_it * sum_{j,s=0..m} Z_{i+j,t+s}` with independent Rademacher
    /// signs `e`.
    RademacherSum { m: usize, noise: TailModel },
}

impl FieldModel {
    pub fn iid(tail: TailModel) -> Result<Self> {
        Ok(FieldModel::Iid { tail })
    }

    pub fn linear_ma(filter: Vec<Vec<f64>>, noise: TailModel) -> Result<Self> {
        validate_filter(&filter)?;
        if noise.alpha >= 2.0 && !noise.is_mean_zero() {
            return Err(Error::validation(
                "linear filter with alpha >= 2 needs mean-zero noise",
            ));
        }
        Ok(FieldModel::LinearMa { filter, noise })
    }

    pub fn max_linear(filter: Vec<Vec<f64>>, noise: TailModel) -> Result<Self> {
        validate_filter(&filter)?;
        if filter.iter().flatten().any(|&h| h < 0.0) {
            return Err(Error::validation("max-linear filter must be nonnegative"));
        }
        if noise.alpha >= 2.0 {
            return Err(Error::validation("max-linear requires alpha < 2"));
        }
        if noise.rho != 1.0 {
            return Err(Error::validation("max-linear requires nonnegative noise (rho = 1)"));
        }
        Ok(FieldModel::MaxLinear { filter, noise })
    }

    pub fn random_coeff_bernoulli(q: f64, noise: TailModel) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::validation(format!("q = {q} outside (0, 1)")));
        }
        Ok(FieldModel::RandomCoeffBernoulli { q, noise })
    }

    pub fn rademacher_sum(m: usize, noise: TailModel) -> Result<Self> {
        Ok(FieldModel::RademacherSum { m, noise })
    }

    pub fn noise(&self) -> &TailModel {
        match self {
            FieldModel::Iid { tail } => tail,
            FieldModel::LinearMa { noise, .. }
            | FieldModel::MaxLinear { noise, .. }
            | FieldModel::RandomCoeffBernoulli { noise, .. }
            | FieldModel::RademacherSum { noise, .. } => noise,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.noise().alpha
    }

    /// Dependence range m: entries farther apart than this in sup-distance
    /// are independent.
    pub fn dependence_range(&self) -> usize {
        match self {
            FieldModel::Iid { .. } => 0,
            FieldModel::LinearMa { filter, .. } | FieldModel::MaxLinear { filter, .. } => {
                filter.len() - 1
            }
            FieldModel::RandomCoeffBernoulli { .. } => 1,
            FieldModel::RademacherSum { m, .. } => *m,
        }
    }

    /// Tail constant of the marginal: `P(|X| > x) ~ c x^{-alpha}`.
    pub fn tail_constant(&self) -> Result<f64> {
        let alpha = self.alpha();
        let cz = self
            .noise()
            .tail_constant()
            .ok_or_else(|| Error::validation("custom noise law has no closed tail constant"))?;
        Ok(match self {
            FieldModel::Iid { .. } => cz,
            FieldModel::LinearMa { filter, .. } | FieldModel::MaxLinear { filter, .. } => {
                cz * power_sum(filter, alpha)
            }
            FieldModel::RandomCoeffBernoulli { q, .. } => {
                cz * (4f64.powf(alpha) + q + 3f64.powf(alpha))
            }
            FieldModel::RademacherSum { m, .. } => cz * ((m + 1) * (m + 1)) as f64,
        })
    }

    /// Whether the field marginal is mean-zero, as matrix ensembles require
    /// for alpha >= 2.
    pub fn is_mean_zero(&self) -> bool {
        match self {
            FieldModel::Iid { tail } => tail.is_mean_zero(),
            FieldModel::LinearMa { noise, .. } => noise.is_mean_zero(),
            FieldModel::MaxLinear { .. } => false,
            FieldModel::RandomCoeffBernoulli { noise, .. } => noise.is_mean_zero(),
            // the independent sign makes the product mean-zero regardless
            FieldModel::RademacherSum { .. } => true,
        }
    }

    pub fn validate_for_ensemble(&self) -> Result<()> {
        if self.alpha() >= 2.0 && !self.is_mean_zero() {
            return Err(Error::validation(
                "ensembles with alpha >= 2 need a mean-zero field; use centered noise",
            ));
        }
        Ok(())
    }

    /// Worst-case amplification of a single noise value into a field entry;
    /// used for conservative early rejection when scanning for block maxima.
    pub(crate) fn coeff_abs_sum(&self) -> f64 {
        match self {
            FieldModel::Iid { .. } => 1.0,
            FieldModel::LinearMa { filter, .. } => {
                filter.iter().flatten().map(|h| h.abs()).sum()
            }
            FieldModel::MaxLinear { filter, .. } => {
                filter.iter().flatten().cloned().fold(0.0, f64::max)
            }
            FieldModel::RandomCoeffBernoulli { .. } => 8.0,
            FieldModel::RademacherSum { m, .. } => ((m + 1) * (m + 1)) as f64,
        }
    }

    /// Stable human-readable tag, stamped into sample metadata and outputs.
    pub fn describe(&self) -> String {
        match self {
            FieldModel::Iid { tail } => format!("iid(alpha={},rho={})", tail.alpha, tail.rho),
            FieldModel::LinearMa { filter, noise } => format!(
                "linear-ma(h={:?},alpha={},rho={})",
                filter, noise.alpha, noise.rho
            ),
            FieldModel::MaxLinear { filter, noise } => {
                format!("max-linear(h={:?},alpha={})", filter, noise.alpha)
            }
            FieldModel::RandomCoeffBernoulli { q, noise } => {
                format!("random-coeff-bernoulli(q={q},alpha={})", noise.alpha)
            }
            FieldModel::RademacherSum { m, noise } => {
                format!("rademacher-sum(m={m},alpha={})", noise.alpha)
            }
        }
    }

    /// Closed-form extremal index and cluster shape, where the model has one.
    pub fn theoretical_cluster(&self) -> Result<ClusterShapeSpec> {
        let alpha = self.alpha();
        match self {
            FieldModel::Iid { tail } => Ok(ClusterShapeSpec::closed_iid(tail.rho)),
            FieldModel::LinearMa { filter, noise } => {
                Ok(cluster_for_filter(filter, alpha, noise.rho))
            }
            // same extremal index and cluster law as the linear filter
            FieldModel::MaxLinear { filter, noise } => {
                Ok(cluster_for_filter(filter, alpha, noise.rho))
            }
            FieldModel::RandomCoeffBernoulli { q, .. } => {
                let theta = 4f64.powf(alpha) / (4f64.powf(alpha) + q + 3f64.powf(alpha));
                Ok(ClusterShapeSpec::closed_random_coeff(theta, *q))
            }
            FieldModel::RademacherSum { m, .. } => {
                let theta = 1.0 / ((m + 1) * (m + 1)) as f64;
                Ok(ClusterShapeSpec::closed_rademacher(theta, *m))
            }
        }
    }

    /// Generate the `p x n` restriction of the field.
    pub fn generate(&self, p: usize, n: usize, seed: u64) -> Result<FieldSample> {
        if p == 0 || n == 0 {
            return Err(Error::validation("field dimensions must be positive"));
        }
        let values = match self {
            FieldModel::Iid { tail } => {
                let mut v = Vec::with_capacity(p * n);
                for i in 0..p as i64 {
                    for j in 0..n as i64 {
                        v.push(noise_at(tail, seed, i, j));
                    }
                }
                v
            }
            FieldModel::LinearMa { filter, noise } => {
                let m = filter.len() - 1;
                let z = NoisePlane::new(noise, seed, -(m as i64), p as i64, -(m as i64), n as i64);
                let mut v = Vec::with_capacity(p * n);
                for i in 0..p as i64 {
                    for t in 0..n as i64 {
                        let mut acc = 0.0;
                        for (k, row) in filter.iter().enumerate() {
                            for (l, &h) in row.iter().enumerate() {
                                acc += h * z.get(i - k as i64, t - l as i64);
                            }
                        }
                        v.push(acc);
                    }
                }
                v
            }
            FieldModel::MaxLinear { filter, noise } => {
                let m = filter.len() - 1;
                let z = NoisePlane::new(noise, seed, -(m as i64), p as i64, -(m as i64), n as i64);
                let mut v = Vec::with_capacity(p * n);
                for i in 0..p as i64 {
                    for t in 0..n as i64 {
                        let mut acc = f64::NEG_INFINITY;
                        for (k, row) in filter.iter().enumerate() {
                            for (l, &h) in row.iter().enumerate() {
                                acc = acc.max(h * z.get(i - k as i64, t - l as i64));
                            }
                        }
                        v.push(acc);
                    }
                }
                v
            }
            FieldModel::RandomCoeffBernoulli { q, noise } => {
                let z = NoisePlane::new(noise, seed, -1, p as i64, -1, n as i64);
                let mut v = Vec::with_capacity(p * n);
                for i in 0..p as i64 {
                    for t in 0..n as i64 {
                        let eps = bernoulli_at(seed, *q, i - 1, t);
                        let x = 4.0 * z.get(i, t) + eps * z.get(i - 1, t) + 3.0 * z.get(i - 1, t - 1);
                        v.push(x);
                    }
                }
                v
            }
            FieldModel::RademacherSum { m, noise } => {
                let mm = *m as i64;
                let z = NoisePlane::new(noise, seed, 0, p as i64 + mm, 0, n as i64 + mm);
                let mut v = Vec::with_capacity(p * n);
                for i in 0..p as i64 {
                    for t in 0..n as i64 {
                        let mut acc = 0.0;
                        for j in 0..=mm {
                            for s in 0..=mm {
                                acc += z.get(i + j, t + s);
                            }
                        }
                        v.push(rademacher_at(seed, i, t) * acc);
                    }
                }
                v
            }
        };
        Ok(FieldSample { p, n, values, seed, model_tag: self.describe() })
    }

    /// Does the `r x r` block under `seed` have an entry above `threshold`
    /// in absolute value? Equivalent to `generate(r, r, seed)` followed by a
    /// max scan, but with a cheap conservative pre-pass over the raw noise
    /// words so that the vast majority of blocks are rejected without ever
    /// materializing a field value.
    pub fn block_max_exceeds(&self, r: usize, seed: u64, threshold: f64) -> Result<bool> {
        let noise = self.noise();
        let amp = self.coeff_abs_sum();
        let mut mag_floor = threshold / amp;
        if let crate::tail::TailFamily::ShiftedParetoCentered = noise.family {
            // centering shifts each value by a constant; widen the floor
            mag_floor -= noise.scale * noise.alpha / (noise.alpha - 1.0);
        }
        let u_cut = if mag_floor <= noise.scale {
            1.0
        } else {
            (noise.scale / mag_floor).powf(noise.alpha)
        };

        let (i0, i1, j0, j1) = self.noise_extent(r, r);
        let mut candidate = false;
        'scan: for i in i0..i1 {
            for j in j0..j1 {
                let w = lattice_word(seed, DOMAIN_NOISE_MAG, i, j);
                if u64_to_unit_half_open(w) < u_cut {
                    candidate = true;
                    break 'scan;
                }
            }
        }
        if !candidate {
            return Ok(false);
        }
        let sample = self.generate(r, r, seed)?;
        Ok(sample.values.iter().any(|x| x.abs() > threshold))
    }

    /// Extent of the noise lattice backing a `p x n` sample.
    fn noise_extent(&self, p: usize, n: usize) -> (i64, i64, i64, i64) {
        let m = self.dependence_range() as i64;
        match self {
            FieldModel::RademacherSum { .. } => (0, p as i64 + m, 0, n as i64 + m),
            _ => (-m, p as i64, -m, n as i64),
        }
    }
}

/// Noise values cached on a rectangular window of the extended lattice.
struct NoisePlane {
    i0: i64,
    j0: i64,
    cols: usize,
    values: Vec<f64>,
}

impl NoisePlane {
    fn new(noise: &TailModel, seed: u64, i0: i64, i1: i64, j0: i64, j1: i64) -> Self {
        let rows = (i1 - i0) as usize;
        let cols = (j1 - j0) as usize;
        let mut values = Vec::with_capacity(rows * cols);
        for i in i0..i1 {
            for j in j0..j1 {
                values.push(noise_at(noise, seed, i, j));
            }
        }
        NoisePlane { i0, j0, cols, values }
    }

    #[inline]
    fn get(&self, i: i64, j: i64) -> f64 {
        let r = (i - self.i0) as usize;
        let c = (j - self.j0) as usize;
        self.values[r * self.cols + c]
    }
}

#[inline]
fn noise_at(noise: &TailModel, seed: u64, i: i64, j: i64) -> f64 {
    let mag = lattice_word(seed, DOMAIN_NOISE_MAG, i, j);
    let sign = lattice_word(seed, DOMAIN_NOISE_SIGN, i, j);
    noise.sample_from_words(mag, sign)
}

#[inline]
fn bernoulli_at(seed: u64, q: f64, i: i64, j: i64) -> f64 {
    let w = lattice_word(seed, DOMAIN_COEFF, i, j);
    if u64_to_unit_half_open(w) < q {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn rademacher_at(seed: u64, i: i64, j: i64) -> f64 {
    let w = lattice_word(seed, DOMAIN_COEFF, i, j);
    if w & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn validate_filter(filter: &[Vec<f64>]) -> Result<()> {
    if filter.is_empty() || filter.iter().any(|row| row.len() != filter.len()) {
        return Err(Error::validation("filter must be a non-empty square array"));
    }
    if filter.iter().flatten().all(|&h| h == 0.0) {
        return Err(Error::validation("filter must have a nonzero coefficient"));
    }
    Ok(())
}

fn power_sum(filter: &[Vec<f64>], alpha: f64) -> f64 {
    filter.iter().flatten().map(|h| h.abs().powf(alpha)).sum()
}

fn max_abs(filter: &[Vec<f64>]) -> f64 {
    filter.iter().flatten().map(|h| h.abs()).fold(0.0, f64::max)
}

fn cluster_for_filter(filter: &[Vec<f64>], alpha: f64, rho: f64) -> ClusterShapeSpec {
    let mx = max_abs(filter);
    let theta = mx.powf(alpha) / power_sum(filter, alpha);
    let side = filter.len();
    let flat: Vec<f64> = filter.iter().flatten().map(|&h| h / mx).collect();
    let mut sv = spectra::singular_values_dense(side, side, &flat);
    sv.truncate(side);
    ClusterShapeSpec::closed_filter(theta, side, flat, sv, rho)
}

/// A concrete `p x n` realization, row-major.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub p: usize,
    pub n: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model_tag: String,
}

impl FieldSample {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_square(&self) -> bool {
        self.p == self.n
    }
}

/// Pearson correlation of the bounded transform `sign(x) min(|x|, 1)`
/// between entries at lattice offset `(di, dj)`, over at least `pairs`
/// pairs. Entries at sup-distance beyond the dependence range must show
/// correlation at the sampling-noise level.
pub fn dependence_correlation(
    model: &FieldModel,
    di: usize,
    dj: usize,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let side = (pairs as f64).sqrt().ceil() as usize;
    let sample = model.generate(side + di, side + dj, seed)?;
    let bounded = |x: f64| x.signum() * x.abs().min(1.0);
    let mut xs = Vec::with_capacity(side * side);
    let mut ys = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            xs.push(bounded(sample.get(i, j)));
            ys.push(bounded(sample.get(i + di, j + dj)));
        }
    }
    stats::pearson(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail::TailModel;

    fn pareto(alpha: f64, rho: f64) -> TailModel {
        TailModel::exact_pareto(alpha, rho, 1.0).unwrap()
    }

    fn example_filter() -> Vec<Vec<f64>> {
        vec![vec![1.0, 1.0], vec![-2.0, 2.0]]
    }

    #[test]
    fn identity_filter_reproduces_noise() {
        let noise = pareto(1.0, 0.5);
        let ma = FieldModel::linear_ma(vec![vec![1.0]], noise.clone()).unwrap();
        let iid = FieldModel::iid(noise).unwrap();
        let a = ma.generate(8, 9, 5).unwrap();
        let b = iid.generate(8, 9, 5).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn degenerate_max_filter_reproduces_noise() {
        let noise = pareto(1.0, 1.0);
        let mx = FieldModel::max_linear(vec![vec![1.0]], noise.clone()).unwrap();
        let iid = FieldModel::iid(noise).unwrap();
        let a = mx.generate(6, 6, 9).unwrap();
        let b = iid.generate(6, 6, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn dependence_ranges() {
        assert_eq!(FieldModel::iid(pareto(1.0, 0.5)).unwrap().dependence_range(), 0);
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        assert_eq!(ma.dependence_range(), 1);
        let rs = FieldModel::rademacher_sum(3, pareto(1.0, 0.5)).unwrap();
        assert_eq!(rs.dependence_range(), 3);
        let rc = FieldModel::random_coeff_bernoulli(0.5, pareto(1.0, 0.5)).unwrap();
        assert_eq!(rc.dependence_range(), 1);
    }

    #[test]
    fn max_linear_guards() {
        assert!(FieldModel::max_linear(example_filter(), pareto(1.0, 1.0)).is_err());
        let nonneg = vec![vec![1.0, 0.5], vec![0.0, 2.0]];
        assert!(FieldModel::max_linear(nonneg.clone(), pareto(2.5, 1.0)).is_err());
        assert!(FieldModel::max_linear(nonneg, pareto(1.0, 0.5)).is_err());
        assert!(FieldModel::linear_ma(vec![vec![0.0]], pareto(1.0, 0.5)).is_err());
    }

    #[test]
    fn generation_is_reproducible() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        let a = ma.generate(40, 40, 77).unwrap();
        let b = ma.generate(40, 40, 77).unwrap();
        assert_eq!(a.values, b.values);
        let c = ma.generate(40, 40, 78).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn blocks_regenerate_independently_of_dimensions() {
        // the top-left corner of a bigger sample equals the small sample
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        let small = ma.generate(10, 10, 123).unwrap();
        let big = ma.generate(25, 30, 123).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(small.get(i, j), big.get(i, j));
            }
        }
    }

    #[test]
    fn independence_at_lag_beyond_m() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        let r = dependence_correlation(&ma, 2, 2, 1_000_000, 3).unwrap();
        assert!(r.abs() <= 0.01, "corr {r}");
    }

    #[test]
    fn dependence_at_lag_within_m_is_visible() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        let r = dependence_correlation(&ma, 1, 1, 1_000_000, 3).unwrap();
        assert!(r.abs() > 0.05, "corr {r}");
    }

    #[test]
    fn theoretical_theta_values() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        let c = ma.theoretical_cluster().unwrap();
        assert!((c.theta - 1.0 / 3.0).abs() < 1e-12);

        let iid = FieldModel::iid(pareto(1.0, 0.5)).unwrap();
        assert_eq!(iid.theoretical_cluster().unwrap().theta, 1.0);

        let rc = FieldModel::random_coeff_bernoulli(0.5, pareto(1.0, 0.5)).unwrap();
        let c = rc.theoretical_cluster().unwrap();
        assert!((c.theta - 8.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_tail_index_preserved_by_filters() {
        let models: Vec<FieldModel> = vec![
            FieldModel::iid(pareto(1.0, 0.5)).unwrap(),
            FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap(),
            FieldModel::max_linear(vec![vec![1.0, 0.5], vec![0.25, 2.0]], pareto(1.0, 1.0)).unwrap(),
            FieldModel::random_coeff_bernoulli(0.5, pareto(1.0, 0.5)).unwrap(),
            FieldModel::rademacher_sum(1, pareto(1.0, 0.5)).unwrap(),
        ];
        for model in models {
            let sample = model.generate(340, 340, 21).unwrap();
            let alpha_hat = crate::tail::hill_tail_index(&sample.values, 900).unwrap();
            assert!(
                (alpha_hat - 1.0).abs() <= 0.15,
                "{}: alpha_hat {alpha_hat}",
                model.describe()
            );
        }
    }

    #[test]
    fn block_scan_agrees_with_direct_max() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        for seed in 0..200 {
            let threshold = 60.0;
            let fast = ma.block_max_exceeds(12, seed, threshold).unwrap();
            let slow = ma
                .generate(12, 12, seed)
                .unwrap()
                .values
                .iter()
                .any(|x| x.abs() > threshold);
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn tail_constants() {
        let ma = FieldModel::linear_ma(example_filter(), pareto(1.0, 0.5)).unwrap();
        assert!((ma.tail_constant().unwrap() - 6.0).abs() < 1e-12);
        let rs = FieldModel::rademacher_sum(1, pareto(1.0, 0.5)).unwrap();
        assert!((rs.tail_constant().unwrap() - 4.0).abs() < 1e-12);
    }
}
