//! Small statistical toolbox shared by the estimators and the comparison
//! harness: Kolmogorov-Smirnov statistics, quantiles, Pearson correlation.

use crate::error::{Error, Result};

/// Sort a copy of `xs` ascending, rejecting NaNs.
pub fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::numeric("sample contains NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// One-sample KS statistic of `xs` against an analytic CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((i as f64 / n - f).abs());
    }
    Ok(d)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    let a = sorted(xs)?;
    let b = sorted(ys)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Rough standard-error scale of a two-sample KS statistic; used only to set
/// slack when testing monotone trends, not for hypothesis testing.
pub fn ks_two_sample_se(n1: usize, n2: usize) -> f64 {
    0.5 * ((n1 + n2) as f64 / (n1 as f64 * n2 as f64)).sqrt()
}

pub fn ks_one_sample_se(n: usize) -> f64 {
    0.5 / (n as f64).sqrt()
}

/// p-quantile by linear interpolation of order statistics.
pub fn quantile(sorted_xs: &[f64], p: f64) -> f64 {
    let n = sorted_xs.len();
    assert!(n > 0 && (0.0..=1.0).contains(&p));
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted_xs[lo] * (1.0 - w) + sorted_xs[hi] * w
}

pub fn median(xs: &[f64]) -> Result<f64> {
    let v = sorted(xs)?;
    Ok(quantile(&v, 0.5))
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::validation("pearson: mismatched or tiny samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::numeric("pearson: zero variance"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Exact binomial standard error of a frequency estimate.
pub fn binomial_se(p_hat: f64, n: u64) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// CDF of the Fréchet law `exp(-theta * x^{-alpha})` on `(0, ∞)`.
pub fn frechet_cdf(theta: f64, alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-theta * x.powf(-alpha)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![4.0, 3.0, 2.0, 1.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn ks_disjoint_supports_is_one() {
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ks_two_sample_known_value() {
        // same fixture as common reference implementations
        let a = vec![1.0, 1.0, 4.0, 4.0];
        let b = vec![1.0, 1.0, 1.0, 4.0];
        assert!((ks_two_sample(&a, &b).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ks_one_sample_uniform() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d <= 0.5e-3 + 1e-12, "d = {d}");
    }

    #[test]
    fn quantile_endpoints() {
        let v = vec![1.0, 2.0, 3.0, 10.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 10.0);
        assert_eq!(median(&v).unwrap(), 2.5);
    }

    #[test]
    fn pearson_of_linear_data_is_one() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 7.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_constant_input() {
        let xs = vec![2.0; 10];
        let ys: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(pearson(&xs, &ys).is_err());
    }
}
