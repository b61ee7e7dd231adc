//! Monte Carlo harness: configuration documents, ensemble trial runners with
//! the sparse-or-dense solver policy, reference draws from the limit
//! process, and distribution comparisons.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::limit::{self, ClusterShapeSpec};
use crate::matrix::{self, SparseEntries, TruncationParams};
use crate::rng::{mix2, RngStream};
use crate::spectra::{self, SparseSpectrum};
use crate::stats;
use crate::tail::{NormalizationSeq, TailModel};

/// Entry-law and field-model section of a config document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// iid | linear-ma | max-linear | random-coeff-bernoulli | rademacher-sum
    pub family: String,
    pub alpha: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// exact-pareto | centered-pareto
    #[serde(default = "default_tail")]
    pub tail: String,
    #[serde(default)]
    pub filter: Vec<Vec<f64>>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub m: usize,
}

fn default_rho() -> f64 {
    0.5
}
fn default_scale() -> f64 {
    1.0
}
fn default_tail() -> String {
    "exact-pareto".into()
}
fn default_q() -> f64 {
    0.5
}

impl ModelConfig {
    pub fn build(&self) -> Result<FieldModel> {
        let tail = match self.tail.as_str() {
            "exact-pareto" => TailModel::exact_pareto(self.alpha, self.rho, self.scale)?,
            "centered-pareto" => TailModel::centered_pareto(self.alpha, self.rho, self.scale)?,
            other => return Err(Error::validation(format!("unknown tail family '{other}'"))),
        };
        match self.family.as_str() {
            "iid" => FieldModel::iid(tail),
            "linear-ma" => FieldModel::linear_ma(self.filter.clone(), tail),
            "max-linear" => FieldModel::max_linear(self.filter.clone(), tail),
            "random-coeff-bernoulli" => FieldModel::random_coeff_bernoulli(self.q, tail),
            "rademacher-sum" => FieldModel::rademacher_sum(self.m, tail),
            other => Err(Error::validation(format!("unknown model family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// wigner | covariance
    #[serde(default = "default_kind")]
    pub kind: String,
    pub n: usize,
    /// rows of the data matrix; 0 derives p from gamma
    #[serde(default)]
    pub p: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_kind() -> String {
    "wigner".into()
}
fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reps: u64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub seed: u64,
    /// dense | sparse (sparse falls back to dense per trial when needed)
    #[serde(default = "default_solver")]
    pub solver: String,
    /// reference draws per empirical trial for the comparison harness
    #[serde(default = "default_reference_factor")]
    pub reference_factor: u64,
}

fn default_top_k() -> usize {
    1
}
fn default_solver() -> String {
    "sparse".into()
}
fn default_reference_factor() -> u64 {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    /// fixed | adaptive
    #[serde(default = "default_trunc_mode")]
    pub mode: String,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// 0 selects ceil(n^{0.1})
    #[serde(default)]
    pub block_side: usize,
    /// 0 selects the midpoint of the admissible window
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_trunc_mode() -> String {
    "fixed".into()
}
fn default_eps() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.9
}
fn default_kappa() -> f64 {
    0.95
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            mode: default_trunc_mode(),
            eps: default_eps(),
            block_side: 0,
            beta: 0.0,
            eta: default_eta(),
            kappa: default_kappa(),
        }
    }
}

/// Extremal-index estimator settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// 0 selects ceil(n^{0.3})
    #[serde(default)]
    pub r: usize,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default = "default_est_reps")]
    pub reps: u64,
}

fn default_u() -> f64 {
    1.0
}
fn default_est_reps() -> u64 {
    200
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { r: 0, u: default_u(), reps: default_est_reps() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out_dir() }
    }
}

/// A full experiment document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub ensemble: EnsembleConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parse a document that is either a full experiment config or just a
/// `[model]` section.
pub fn parse_model_section(text: &str) -> Result<ModelConfig> {
    if let Ok(full) = ExperimentConfig::from_toml(text) {
        return Ok(full.model);
    }
    #[derive(Deserialize)]
    struct ModelOnly {
        model: ModelConfig,
    }
    toml::from_str::<ModelOnly>(text)
        .map(|m| m.model)
        .map_err(|e| Error::ConfigParse(e.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the canonical serialization; stamped into every output.
    pub fn fingerprint(&self) -> String {
        format!("{:016x}", fnv1a64(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.reps == 0 {
            return Err(Error::validation("run.reps must be positive"));
        }
        if self.run.top_k == 0 {
            return Err(Error::validation("run.top_k must be positive"));
        }
        if !matches!(self.run.solver.as_str(), "dense" | "sparse") {
            return Err(Error::validation(format!(
                "unknown solver '{}'",
                self.run.solver
            )));
        }
        if !matches!(self.ensemble.kind.as_str(), "wigner" | "covariance") {
            return Err(Error::validation(format!(
                "unknown ensemble kind '{}'",
                self.ensemble.kind
            )));
        }
        if !matches!(self.truncation.mode.as_str(), "fixed" | "adaptive") {
            return Err(Error::validation(format!(
                "unknown truncation mode '{}'",
                self.truncation.mode
            )));
        }
        let model = self.model.build()?;
        model.validate_for_ensemble()?;
        Ok(())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Which solver ultimately produced a trial's spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverPath {
    Dense,
    Sparse,
    SparseFallback,
}

impl SolverPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverPath::Dense => "dense",
            SolverPath::Sparse => "sparse",
            SolverPath::SparseFallback => "sparse-fallback",
        }
    }
}

/// Top-of-spectrum summary of one trial.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: u64,
    /// k largest positive points, descending, zero-padded when the sparse
    /// spectrum is rank-deficient
    pub top: Vec<f64>,
    /// k most negative points (symmetric ensembles only), zero-padded
    pub bottom: Vec<f64>,
    pub path: SolverPath,
    pub event_s: bool,
    /// wall-clock diagnostic; never serialized, so outputs stay byte-stable
    pub wall_ms: f64,
}

/// Geometry and thresholds a run resolved to, plus its results.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trials: Vec<TrialResult>,
    pub n_used: usize,
    pub p_used: usize,
    pub r_used: usize,
    pub threshold_used: f64,
    pub fingerprint: String,
}

impl RunOutput {
    pub fn event_s_rate(&self) -> f64 {
        self.trials.iter().filter(|t| t.event_s).count() as f64 / self.trials.len() as f64
    }

    pub fn values_at_rank(&self, rank: usize, positive: bool) -> Vec<f64> {
        self.trials
            .iter()
            .map(|t| if positive { t.top[rank - 1] } else { t.bottom[rank - 1] })
            .collect()
    }
}

fn resolve_block_side(cfg: &ExperimentConfig, n: usize) -> usize {
    if cfg.truncation.block_side > 0 {
        cfg.truncation.block_side
    } else {
        matrix::default_block_side(n)
    }
}

fn resolve_truncation(
    cfg: &ExperimentConfig,
    alpha: f64,
    n: usize,
    b_n: f64,
) -> Result<TruncationParams> {
    match cfg.truncation.mode.as_str() {
        "fixed" => TruncationParams::fixed(cfg.truncation.eps),
        "adaptive" => {
            let beta = if cfg.truncation.beta > 0.0 {
                cfg.truncation.beta
            } else {
                let (lo, hi) = matrix::beta_window(alpha)?;
                0.5 * (lo + hi)
            };
            TruncationParams::adaptive(
                alpha,
                beta,
                cfg.truncation.eta,
                cfg.truncation.kappa,
                n,
                b_n,
            )
        }
        other => Err(Error::validation(format!("unknown truncation mode '{other}'"))),
    }
}

fn pad_to(mut v: Vec<f64>, k: usize) -> Vec<f64> {
    v.truncate(k);
    while v.len() < k {
        v.push(0.0);
    }
    v
}

/// Run symmetric-ensemble trials under the configured solver policy.
pub fn run_wigner_trials(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.ensemble.kind != "wigner" {
        return Err(Error::validation("config is not a wigner ensemble"));
    }
    let model = cfg.model.build()?;
    let alpha = model.alpha();
    let r = resolve_block_side(cfg, cfg.ensemble.n);
    let n = matrix::trim_to_multiple(cfg.ensemble.n, r);
    if n == 0 {
        return Err(Error::validation("n too small for the block side"));
    }
    let seq = NormalizationSeq::exact(alpha, model.tail_constant()?);
    let b_n = seq.norm_constant((n * n) as u64)?;
    let trunc = resolve_truncation(cfg, alpha, n, b_n)?;
    let threshold = trunc.sparse_threshold(n, b_n);
    let k = cfg.run.top_k;
    let dense_only = cfg.run.solver == "dense";

    let trials: Vec<TrialResult> = (0..cfg.run.reps)
        .into_par_iter()
        .map(|trial| {
            let t0 = std::time::Instant::now();
            let field = model
                .generate(n, n, mix2(cfg.run.seed, trial))
                .expect("field generation");
            let mut path = SolverPath::Dense;
            let mut event_s = false;
            let (top, bottom) = if dense_only {
                let mat = matrix::build_wigner(&field, &seq).expect("wigner build");
                let eig = spectra::sym_eig(&mat, false).expect("dense eigensolve");
                let (pos, neg) = spectra::spectrum_point_sets(&eig.values);
                (pad_to(pos, k), pad_to(neg, k))
            } else {
                // surviving entries of the reflected matrix, no dense build
                let mut entries = Vec::new();
                for i in 0..n {
                    for j in i..n {
                        let v = field.get(i, j) / b_n;
                        if v.abs() > threshold {
                            entries.push((i as u32, j as u32, v));
                            if i != j {
                                entries.push((j as u32, i as u32, v));
                            }
                        }
                    }
                }
                entries.sort_by_key(|&(i, j, _)| (i, j));
                let above = SparseEntries { rows: n, cols: n, entries };
                match spectra::sparse_truncated_spectrum(&above, r).expect("sparse path") {
                    SparseSpectrum::Spectrum { singulars } => {
                        path = SolverPath::Sparse;
                        event_s = true;
                        let pos: Vec<f64> = singulars.iter().map(|s| s.value).collect();
                        let neg: Vec<f64> = pos.iter().map(|v| -v).collect();
                        (pad_to(pos, k), pad_to(neg, k))
                    }
                    SparseSpectrum::Fallback { .. } => {
                        path = SolverPath::SparseFallback;
                        let mat = matrix::build_wigner(&field, &seq).expect("wigner build");
                        let eig = spectra::sym_eig(&mat, false).expect("dense eigensolve");
                        let (pos, neg) = spectra::spectrum_point_sets(&eig.values);
                        (pad_to(pos, k), pad_to(neg, k))
                    }
                }
            };
            TrialResult {
                trial,
                top,
                bottom,
                path,
                event_s,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();

    Ok(RunOutput {
        trials,
        n_used: n,
        p_used: n,
        r_used: r,
        threshold_used: threshold,
        fingerprint: cfg.fingerprint(),
    })
}

/// Run sample-covariance trials; the spectrum reported is of `A A'`.
pub fn run_cov_trials(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.ensemble.kind != "covariance" {
        return Err(Error::validation("config is not a covariance ensemble"));
    }
    let model = cfg.model.build()?;
    let alpha = model.alpha();
    let r = resolve_block_side(cfg, cfg.ensemble.n);
    let n = matrix::trim_to_multiple(cfg.ensemble.n, r);
    let p_raw = if cfg.ensemble.p > 0 {
        cfg.ensemble.p
    } else {
        (cfg.ensemble.gamma * n as f64).round() as usize
    };
    let p = matrix::trim_to_multiple(p_raw, r);
    if n == 0 || p == 0 {
        return Err(Error::validation("dimensions too small for the block side"));
    }
    let seq = NormalizationSeq::exact(alpha, model.tail_constant()?);
    let a_np = seq.norm_constant((n * p) as u64)?;
    let trunc = resolve_truncation(cfg, alpha, n, a_np)?;
    let threshold = trunc.sparse_threshold(n, a_np);
    let k = cfg.run.top_k;
    let dense_only = cfg.run.solver == "dense";

    let trials: Vec<TrialResult> = (0..cfg.run.reps)
        .into_par_iter()
        .map(|trial| {
            let t0 = std::time::Instant::now();
            let field = model
                .generate(p, n, mix2(cfg.run.seed, trial))
                .expect("field generation");
            let mut path = SolverPath::Dense;
            let mut event_s = false;
            let top = if dense_only {
                let a = matrix::build_data(&field, &seq).expect("data build");
                let sv = spectra::singular_values(&a);
                pad_to(sv.iter().map(|s| s * s).collect(), k)
            } else {
                match cov_sparse_top(&field, a_np, threshold) {
                    Some(lams) => {
                        path = SolverPath::Sparse;
                        event_s = true;
                        pad_to(lams, k)
                    }
                    None => {
                        path = SolverPath::SparseFallback;
                        let a = matrix::build_data(&field, &seq).expect("data build");
                        let sv = spectra::singular_values(&a);
                        pad_to(sv.iter().map(|s| s * s).collect(), k)
                    }
                }
            };
            TrialResult {
                trial,
                top,
                bottom: Vec::new(),
                path,
                event_s,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();

    Ok(RunOutput {
        trials,
        n_used: n,
        p_used: p,
        r_used: r,
        threshold_used: threshold,
        fingerprint: cfg.fingerprint(),
    })
}

/// Sparse covariance path. Distinct connected components of the survivor
/// support share no rows and no columns, so after a permutation the
/// thresholded matrix is a direct sum and the nonzero spectrum of
/// `A^{>eps} A^{>eps}'` is exactly the union of squared component singular
/// values. Components beyond the size cap (never seen at these densities)
/// signal a dense fallback.
fn cov_sparse_top(
    field: &crate::field::FieldSample,
    a_np: f64,
    threshold: f64,
) -> Option<Vec<f64>> {
    const COMPONENT_CAP: usize = 128;
    let (p, n) = (field.p, field.n);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..p {
        for j in 0..n {
            let v = field.get(i, j) / a_np;
            if v.abs() > threshold {
                entries.push((i, j, v));
            }
        }
    }
    if entries.is_empty() {
        return Some(Vec::new());
    }
    // union-find over the row and column nodes touched by survivors
    let mut parent: std::collections::BTreeMap<usize, usize> = Default::default();
    fn find(parent: &mut std::collections::BTreeMap<usize, usize>, x: usize) -> usize {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = find(parent, p);
        parent.insert(x, root);
        root
    }
    let col_node = |j: usize| p + j;
    for &(i, j, _) in &entries {
        let a = find(&mut parent, i);
        let b = find(&mut parent, col_node(j));
        if a != b {
            parent.insert(a, b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
    for &(i, j, v) in &entries {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push((i, j, v));
    }
    let mut lams = Vec::new();
    for cells in groups.values() {
        let mut rows: Vec<usize> = cells.iter().map(|c| c.0).collect();
        let mut cols: Vec<usize> = cells.iter().map(|c| c.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        if rows.len() > COMPONENT_CAP || cols.len() > COMPONENT_CAP {
            return None;
        }
        let (nr, nc) = (rows.len(), cols.len());
        let mut dense = vec![0.0f64; nr * nc];
        for &(i, j, v) in cells {
            let li = rows.binary_search(&i).unwrap();
            let lj = cols.binary_search(&j).unwrap();
            dense[li * nc + lj] = v;
        }
        let sv = spectra::singular_values_dense(nr, nc, &dense);
        let top = sv.first().copied().unwrap_or(0.0);
        let floor = top * (f64::EPSILON * nr.max(nc) as f64).sqrt() * 4.0;
        for s in sv {
            if s > floor && s > 0.0 {
                lams.push(s * s);
            }
        }
    }
    lams.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Some(lams)
}

/// Cluster spec whose center intensity matches what the ensemble projects
/// onto its spectrum. Only the blocks strictly above the diagonal contribute
/// distinct clusters to a symmetric matrix — the mirrored copy supplies the
/// minus pair of the same singular values, not new points — so the center
/// intensity carries a factor 1/2 there. The rectangular ensemble uses the
/// field's full cluster intensity.
pub fn effective_cluster(cluster: &ClusterShapeSpec, kind: &str) -> ClusterShapeSpec {
    let mut c = cluster.clone();
    if kind == "wigner" {
        c.theta *= 0.5;
    }
    c
}

/// Reference draws of the top-k limit points; one row per draw.
pub fn reference_topk(
    cluster: &ClusterShapeSpec,
    alpha: f64,
    kind: &str,
    k: usize,
    draws: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let eff = effective_cluster(cluster, kind);
    (0..draws)
        .map(|i| {
            let mut rng = RngStream::new(seed ^ 0x5EF5_0000, i);
            let s = limit::sample_limit_spectrum_wigner(&eff, alpha, k, &mut rng)?;
            Ok(if kind == "covariance" { s.cov_top } else { s.wigner_top })
        })
        .collect()
}

/// What an empirical sample is compared against.
pub enum Reference<'a> {
    Sample(&'a [f64]),
    Cdf(Box<dyn Fn(f64) -> f64 + 'a>),
}

/// KS statistic plus a quantile-quantile table on the percentile grid.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub ks: f64,
    pub n_empirical: usize,
    pub n_reference: usize,
    /// rows (probability, empirical quantile, reference quantile)
    pub qq: Vec<(f64, f64, f64)>,
}

pub fn compare_distributions(empirical: &[f64], reference: Reference) -> Result<Comparison> {
    let emp_sorted = stats::sorted(empirical)?;
    let (ks, n_ref, ref_quantile): (f64, usize, Box<dyn Fn(f64) -> f64>) = match reference {
        Reference::Sample(r) => {
            let ks = stats::ks_two_sample(empirical, r)?;
            let rs = stats::sorted(r)?;
            (ks, rs.len(), Box::new(move |p| stats::quantile(&rs, p)))
        }
        Reference::Cdf(cdf) => {
            let ks = stats::ks_one_sample(empirical, &cdf)?;
            // invert the CDF by bisection on a wide bracket
            let inv = move |p: f64| -> f64 {
                let (mut lo, mut hi) = (-1e12, 1e12);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            (ks, 0, Box::new(inv))
        }
    };
    let qq = (1..=99)
        .map(|pct| {
            let p = pct as f64 / 100.0;
            (p, stats::quantile(&emp_sorted, p), ref_quantile(p))
        })
        .collect();
    Ok(Comparison { ks, n_empirical: empirical.len(), n_reference: n_ref, qq })
}

/// Marginal KS per rank plus one joint statistic for the top pair, taken as
/// the larger of the two marginal statistics.
#[derive(Debug, Clone, Serialize)]
pub struct RankComparison {
    pub ks_per_rank: Vec<f64>,
    pub ks_joint_top2: Option<f64>,
}

pub fn compare_topk(empirical: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<RankComparison> {
    if empirical.is_empty() || reference.is_empty() {
        return Err(Error::validation("empty trial set"));
    }
    let k = empirical[0].len().min(reference[0].len());
    let mut ks_per_rank = Vec::with_capacity(k);
    for rank in 0..k {
        let e: Vec<f64> = empirical.iter().map(|row| row[rank]).collect();
        let r: Vec<f64> = reference.iter().map(|row| row[rank]).collect();
        ks_per_rank.push(stats::ks_two_sample(&e, &r)?);
    }
    let ks_joint_top2 =
        (k >= 2).then(|| ks_per_rank[0].max(ks_per_rank[1]));
    Ok(RankComparison { ks_per_rank, ks_joint_top2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub ks_top: f64,
    pub se_proxy: f64,
    pub event_s_rate: f64,
}

/// Run the full pipeline at each size and report the top-rank KS against
/// fresh reference draws; used to watch the distance shrink with n.
pub fn convergence_sweep(cfg: &ExperimentConfig, n_list: &[usize]) -> Result<Vec<SweepRow>> {
    if n_list.is_empty() {
        return Err(Error::validation("empty n list"));
    }
    cfg.validate()?;
    let model = cfg.model.build()?;
    let cluster = model.theoretical_cluster()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut c = cfg.clone();
        c.ensemble.n = n;
        let out = if cfg.ensemble.kind == "wigner" {
            run_wigner_trials(&c)?
        } else {
            run_cov_trials(&c)?
        };
        let emp: Vec<Vec<f64>> = out.trials.iter().map(|t| t.top.clone()).collect();
        let reference = reference_topk(
            &cluster,
            model.alpha(),
            &cfg.ensemble.kind,
            cfg.run.top_k,
            cfg.run.reps * cfg.run.reference_factor,
            cfg.run.seed ^ n as u64,
        )?;
        let cmp = compare_topk(&emp, &reference)?;
        rows.push(SweepRow {
            n: out.n_used,
            ks_top: cmp.ks_per_rank[0],
            se_proxy: stats::ks_two_sample_se(emp.len(), reference.len()),
            event_s_rate: out.event_s_rate(),
        });
    }
    Ok(rows)
}

/// Machine-readable run summary. No timing fields: repeated runs must
/// serialize identically.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub tool_version: String,
    pub fingerprint: String,
    pub kind: String,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub threshold: f64,
    pub reps: u64,
    pub top_k: usize,
    pub event_s_rate: f64,
    pub ks_per_rank: Vec<f64>,
    pub ks_joint_top2: Option<f64>,
    /// the exact configuration this run resolved from
    pub config: ExperimentConfig,
}

pub fn summarize(cfg: &ExperimentConfig, out: &RunOutput, cmp: &RankComparison) -> Summary {
    Summary {
        schema_version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        fingerprint: out.fingerprint.clone(),
        kind: cfg.ensemble.kind.clone(),
        n: out.n_used,
        p: out.p_used,
        r: out.r_used,
        threshold: out.threshold_used,
        reps: cfg.run.reps,
        top_k: cfg.run.top_k,
        event_s_rate: out.event_s_rate(),
        ks_per_rank: cmp.ks_per_rank.clone(),
        ks_joint_top2: cmp.ks_joint_top2,
        config: cfg.clone(),
    }
}

/// Gnuplot-ready QQ table for one rank of a run against reference draws.
pub fn write_qq_csv<W: Write>(
    w: &mut W,
    cmp: &Comparison,
    fingerprint: &str,
    version: &str,
) -> Result<()> {
    writeln!(w, "# fingerprint={fingerprint} version={version}")?;
    writeln!(w, "prob,empirical_quantile,reference_quantile")?;
    for (p, eq, rq) in &cmp.qq {
        writeln!(w, "{p},{eq},{rq}")?;
    }
    Ok(())
}

/// Trial CSV: one row per (trial, rank, side); values in shortest
/// round-trip formatting. No timing columns, same-seed runs match byte
/// for byte.
pub fn write_trials_csv<W: Write>(w: &mut W, out: &RunOutput, version: &str) -> Result<()> {
    writeln!(w, "# fingerprint={} version={}", out.fingerprint, version)?;
    writeln!(w, "trial,rank,side,value,path,event_s")?;
    for t in &out.trials {
        for (idx, v) in t.top.iter().enumerate() {
            writeln!(
                w,
                "{},{},pos,{},{},{}",
                t.trial,
                idx + 1,
                v,
                t.path.as_str(),
                t.event_s
            )?;
        }
        for (idx, v) in t.bottom.iter().enumerate() {
            writeln!(
                w,
                "{},{},neg,{},{},{}",
                t.trial,
                idx + 1,
                v,
                t.path.as_str(),
                t.event_s
            )?;
        }
    }
    Ok(())
}

/// Limit-process reference CSV with the documented columns.
pub fn write_limit_csv<W: Write>(
    w: &mut W,
    cluster: &ClusterShapeSpec,
    alpha: f64,
    kind: &str,
    k: usize,
    draws: u64,
    seed: u64,
    fingerprint: &str,
    version: &str,
) -> Result<()> {
    writeln!(w, "# fingerprint={fingerprint} version={version}")?;
    writeln!(w, "trial,i,j,p,sigma,wigner_point,cov_point")?;
    let eff = effective_cluster(cluster, kind);
    for d in 0..draws {
        let mut rng = RngStream::new(seed ^ 0x5EF5_0000, d);
        let s = limit::sample_limit_spectrum_wigner(&eff, alpha, k, &mut rng)
            .map_err(|e| Error::numeric(format!("limit draw {d}: {e}")))?;
        for (i, cl) in s.clusters.iter().enumerate() {
            for (j, sig) in cl.sigmas.iter().enumerate() {
                let wp = cl.p * sig;
                writeln!(w, "{},{},{},{},{},{},{}", d, i + 1, j + 1, cl.p, sig, wp, wp * wp)?;
            }
        }
    }
    Ok(())
}

/// Parse a CSV produced by this crate: `#` lines are comments, the first
/// remaining line is the header. Returns (header, rows).
pub fn read_csv_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if header.is_none() {
            header = Some(cells);
        } else {
            rows.push(cells);
        }
    }
    header
        .map(|h| (h, rows))
        .ok_or_else(|| Error::validation("csv has no header row"))
}

/// Extract a numeric column; with `rank`, rows are grouped by the `trial`
/// column and the rank-th largest value per group is taken.
pub fn csv_column_values(
    text: &str,
    column: &str,
    rank: Option<usize>,
    filter: Option<(&str, &str)>,
) -> Result<Vec<f64>> {
    let (header, rows) = read_csv_table(text)?;
    let col = header
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::validation(format!("column '{column}' not found")))?;
    let filter_idx = match filter {
        Some((name, _)) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::validation(format!("column '{name}' not found")))?,
        ),
        None => None,
    };
    let keep = |row: &Vec<String>| -> bool {
        match (filter_idx, filter) {
            (Some(idx), Some((_, want))) => row[idx] == want,
            _ => true,
        }
    };
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::validation(format!("bad number '{s}': {e}")))
    };
    match rank {
        None => rows.iter().filter(|r| keep(r)).map(|r| parse(&r[col])).collect(),
        Some(k) => {
            if k == 0 {
                return Err(Error::validation("rank is 1-based"));
            }
            let trial_idx = header
                .iter()
                .position(|h| h == "trial")
                .ok_or_else(|| Error::validation("rank extraction needs a 'trial' column"))?;
            // group in file order so draws stay paired with their trial index
            let mut order: Vec<String> = Vec::new();
            let mut groups: std::collections::HashMap<String, Vec<f64>> = Default::default();
            for row in rows.iter().filter(|r| keep(r)) {
                let key = row[trial_idx].clone();
                if !groups.contains_key(&key) {
                    order.push(key.clone());
                }
                groups.entry(key).or_default().push(parse(&row[col])?);
            }
            order
                .into_iter()
                .map(|key| {
                    let mut vs = groups.remove(&key).unwrap();
                    vs.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    vs.get(k - 1).copied().ok_or_else(|| {
                        Error::validation(format!("a trial has fewer than {k} values"))
                    })
                })
                .collect()
        }
    }
}
