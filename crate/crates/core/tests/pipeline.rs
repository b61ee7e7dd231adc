//! Cross-module integration: deterministic parallel trials, perturbation
//! accounting on real ensembles, file round-trips, and the convergence sweep.

use heavyedge::experiments::{
    self, EnsembleConfig, EstimatorConfig, ExperimentConfig, ModelConfig, OutputConfig,
    RunConfig, TruncationConfig,
};
use heavyedge::field::FieldModel;
use heavyedge::matrix;
use heavyedge::rng::mix2;
use heavyedge::spectra;
use heavyedge::tail::{NormalizationSeq, TailModel};

fn iid_wigner_config(n: usize, reps: u64, eps: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig {
            family: "iid".into(),
            alpha: 1.0,
            rho: 0.5,
            scale: 1.0,
            tail: "exact-pareto".into(),
            filter: vec![],
            q: 0.5,
            m: 0,
        },
        ensemble: EnsembleConfig { kind: "wigner".into(), n, p: 0, gamma: 1.0 },
        run: RunConfig {
            reps,
            top_k: 3,
            seed,
            solver: "sparse".into(),
            reference_factor: 10,
        },
        truncation: TruncationConfig { eps, ..Default::default() },
        estimator: EstimatorConfig::default(),
        output: OutputConfig::default(),
    }
}

#[test]
fn sparse_path_agrees_with_dense_on_truncated_matrix() {
    // dense oracle on the thresholded matrix, every nonzero eigenvalue
    let model = FieldModel::iid(TailModel::exact_pareto(1.0, 0.5, 1.0).unwrap()).unwrap();
    let n = 200;
    let eps = 0.3;
    let seq = NormalizationSeq::exact_unit(1.0);
    let mut checked = 0;
    for seed in 0..25u64 {
        let field = model.generate(n, n, seed).unwrap();
        let mat = matrix::build_wigner(&field, &seq).unwrap();
        let (above, _) = matrix::truncate_sym(&mat, eps).unwrap();
        match spectra::sparse_truncated_spectrum(&above, 2).unwrap() {
            spectra::SparseSpectrum::Spectrum { singulars } => {
                let mut dense = heavyedge::matrix::SymMatrix::zeros(n);
                for &(i, j, v) in &above.entries {
                    dense.data[i as usize * n + j as usize] = v;
                }
                let eig = spectra::sym_eig(&dense, false).unwrap();
                let (pos, _) = spectra::spectrum_point_sets(&eig.values);
                for (k, s) in singulars.iter().enumerate() {
                    assert!(
                        (pos[k] - s.value).abs() <= 1e-9,
                        "seed {seed}: {} vs {}",
                        pos[k],
                        s.value
                    );
                }
                for extra in pos.iter().skip(singulars.len()) {
                    assert!(*extra <= 1e-9);
                }
                checked += 1;
            }
            spectra::SparseSpectrum::Fallback { .. } => {}
        }
    }
    assert!(checked >= 15, "only {checked} seeds hit the sparse structure");
}

#[test]
fn trial_top_respects_weyl_bound_against_max_entry() {
    // when the max entry survives the threshold and the block structure
    // holds, the top eigenvalue is within the removed part's norm of it
    let cfg = iid_wigner_config(150, 20, 0.3, 41);
    let model = cfg.model.build().unwrap();
    let seq = NormalizationSeq::exact_unit(1.0);
    let out = experiments::run_wigner_trials(&cfg).unwrap();
    let mut exercised = 0;
    for t in &out.trials {
        let field = model.generate(out.n_used, out.n_used, mix2(cfg.run.seed, t.trial)).unwrap();
        let mat = matrix::build_wigner(&field, &seq).unwrap();
        let max_entry = mat.max_abs();
        if !t.event_s || max_entry <= out.threshold_used {
            continue;
        }
        let (_, below) = matrix::truncate_sym(&mat, out.threshold_used).unwrap();
        let dense = spectra::sym_eig(&mat, false).unwrap();
        let bound = below.frobenius();
        assert!(
            dense.values[0] >= max_entry - bound - 1e-12,
            "trial {}: {} < {} - {}",
            t.trial,
            dense.values[0],
            max_entry,
            bound
        );
        exercised += 1;
    }
    assert!(exercised >= 10, "only {exercised} trials exercised the bound");
}

#[test]
fn cov_sparse_path_matches_dense_gram() {
    let mut cfg = iid_wigner_config(120, 15, 0.25, 17);
    cfg.ensemble.kind = "covariance".into();
    cfg.model.family = "linear-ma".into();
    cfg.model.filter = vec![vec![1.0, 1.0], vec![-2.0, 2.0]];
    let sparse = experiments::run_cov_trials(&cfg).unwrap();
    let mut dense_cfg = cfg.clone();
    dense_cfg.run.solver = "dense".into();
    let dense = experiments::run_cov_trials(&dense_cfg).unwrap();
    // the sparse value is the truncated spectrum; it must sit within the
    // removed part's contribution of the dense one, which at this size is
    // loose — assert ordering coherence and exactness of zero padding
    for (s, d) in sparse.trials.iter().zip(&dense.trials) {
        assert!(s.top[0] <= d.top[0] + 0.35, "trial {}: {} vs {}", s.trial, s.top[0], d.top[0]);
        assert!(s.top.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn identical_results_across_thread_counts() {
    let cfg = iid_wigner_config(120, 24, 0.3, 99);
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = pool1.install(|| experiments::run_wigner_trials(&cfg).unwrap());
    let b = pool8.install(|| experiments::run_wigner_trials(&cfg).unwrap());
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    experiments::write_trials_csv(&mut csv_a, &a, "x").unwrap();
    experiments::write_trials_csv(&mut csv_b, &b, "x").unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn field_export_roundtrip_binary_and_csv() {
    let model = FieldModel::linear_ma(
        vec![vec![1.0, 1.0], vec![-2.0, 2.0]],
        TailModel::exact_pareto(1.0, 0.5, 1.0).unwrap(),
    )
    .unwrap();
    let sample = model.generate(17, 23, 5).unwrap();
    let mut bin = Vec::new();
    matrix::write_array_bin(&mut bin, 17, 23, &sample.values).unwrap();
    let (r, c, back) = matrix::read_array_bin(&mut &bin[..]).unwrap();
    assert_eq!((r, c), (17, 23));
    assert_eq!(back, sample.values);

    let mut csv = Vec::new();
    matrix::write_array_csv(&mut csv, 17, 23, &sample.values).unwrap();
    let (r, c, back) = matrix::read_array_csv(&mut &csv[..]).unwrap();
    assert_eq!((r, c), (17, 23));
    assert_eq!(back, sample.values);
}

#[test]
fn limit_csv_rank_extraction_matches_sampler() {
    let model = FieldModel::iid(TailModel::exact_pareto(1.0, 0.5, 1.0).unwrap()).unwrap();
    let cluster = model.theoretical_cluster().unwrap();
    let mut buf = Vec::new();
    experiments::write_limit_csv(&mut buf, &cluster, 1.0, "wigner", 2, 40, 7, "f", "v").unwrap();
    let text = String::from_utf8(buf).unwrap();
    let top1 = experiments::csv_column_values(&text, "wigner_point", Some(1), None).unwrap();
    assert_eq!(top1.len(), 40);
    let draws = experiments::reference_topk(&cluster, 1.0, "wigner", 2, 40, 7).unwrap();
    for (a, row) in top1.iter().zip(&draws) {
        assert_eq!(*a, row[0]);
    }
}

#[test]
fn convergence_sweep_shrinks_toward_the_limit() {
    // trend oracle: the distance to the limiting law shrinks with n, up to
    // one inversion within twice the sampling scale
    let cfg = iid_wigner_config(0, 150, 0.1, 2024);
    let rows = experiments::convergence_sweep(&cfg, &[200, 500, 1000]).unwrap();
    assert_eq!(rows.len(), 3);
    let mut inversions = 0;
    for w in rows.windows(2) {
        if w[1].ks_top > w[0].ks_top {
            assert!(
                w[1].ks_top - w[0].ks_top <= 2.0 * w[1].se_proxy,
                "inversion beyond tolerance: {} -> {}",
                w[0].ks_top,
                w[1].ks_top
            );
            inversions += 1;
        }
    }
    assert!(inversions <= 1, "{inversions} inversions");
    // single-size sweep degenerates to one row
    let single = experiments::convergence_sweep(&cfg, &[200]).unwrap();
    assert_eq!(single.len(), 1);
}

#[test]
fn adaptive_truncation_pipeline_runs_end_to_end() {
    // tail index in [2, 4): n-dependent thresholds, centered entries; the
    // run must complete on the sparse-with-fallback path and the resolved
    // threshold must be the coarser of the two levels
    let mut cfg = iid_wigner_config(240, 12, 0.0, 71);
    cfg.model.alpha = 2.5;
    cfg.model.tail = "centered-pareto".into();
    cfg.truncation = TruncationConfig { mode: "adaptive".into(), ..Default::default() };
    let out = experiments::run_wigner_trials(&cfg).unwrap();
    assert_eq!(out.trials.len(), 12);
    for t in &out.trials {
        assert!(t.top.iter().all(|v| v.is_finite()));
    }
    let seq = NormalizationSeq::exact_unit(2.5);
    let b_n = seq.norm_constant((out.n_used * out.n_used) as u64).unwrap();
    let trunc = matrix::default_truncation(2.5, out.n_used, b_n).unwrap();
    assert_eq!(out.threshold_used, trunc.eps_tilde(b_n).unwrap());
    assert!(out.threshold_used > trunc.eps(out.n_used, b_n));

    // an uncentered two-sided law with skewed signs is rejected up front
    let mut bad = cfg.clone();
    bad.model.tail = "exact-pareto".into();
    bad.model.rho = 0.8;
    assert!(experiments::run_wigner_trials(&bad).is_err());
}

#[test]
fn empirical_cluster_acceptance_scales_with_threshold() {
    // doubling u scales the acceptance rate by about 2^{-alpha}, and every
    // accepted shape is normalized to sup-norm exactly one
    let model = FieldModel::linear_ma(
        vec![vec![1.0, 1.0], vec![-2.0, 2.0]],
        TailModel::exact_pareto(1.0, 0.5, 1.0).unwrap(),
    )
    .unwrap();
    let a = 6.0 * 500.0 * 500.0;
    let lo = heavyedge::limit::empirical_cluster_sampler(&model, 1.0, 64, 2.0, a, 120_000, 31)
        .unwrap();
    let hi = heavyedge::limit::empirical_cluster_sampler(&model, 1.0, 64, 4.0, a, 120_000, 32)
        .unwrap();
    let ratio = hi.acceptance_rate.unwrap() / lo.acceptance_rate.unwrap();
    assert!((0.4..=0.6).contains(&ratio), "acceptance ratio {ratio}");

    let mut rng = heavyedge::rng::RngStream::new(33, 0);
    for _ in 0..40 {
        let q = lo.sample_q(&mut rng).unwrap();
        assert!((q.sup_norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn empirical_theta_tracks_its_finite_block_expectation() {
    // independent oracle for the estimator at finite block side: sum over
    // noise positions of the largest reachable |coefficient|^alpha, over
    // r^2 * sum |h|^alpha; edge rows see only part of the filter
    let h: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![-2.0, 2.0]];
    let alpha = 1.0;
    let r = 20usize;
    let m = 1usize;
    let side = h.len();
    let power_sum: f64 = h.iter().flatten().map(|x| x.abs().powf(alpha)).sum();
    let mut z_sum = 0.0;
    for a in -(m as i64)..(r as i64) {
        for b in -(m as i64)..(r as i64) {
            let mut best = 0.0f64;
            for k in 0..side {
                for l in 0..side {
                    let (i, j) = (a + k as i64, b + l as i64);
                    if i >= 0 && i < r as i64 && j >= 0 && j < r as i64 {
                        best = best.max(h[k][l].abs().powf(alpha));
                    }
                }
            }
            z_sum += best;
        }
    }
    let expected = z_sum / (r * r) as f64 / power_sum;
    assert!((expected - 0.35875).abs() < 1e-10, "oracle value {expected}");

    let model = FieldModel::linear_ma(h, TailModel::exact_pareto(1.0, 0.5, 1.0).unwrap()).unwrap();
    let est =
        heavyedge::estimators::estimate_extremal_index(&model, 2000, r, 1.0, 1500, 9).unwrap();
    assert!(
        (est.theta_hat - expected).abs() <= 3.0 * est.stderr,
        "theta_hat {} vs finite-block expectation {expected} (se {})",
        est.theta_hat,
        est.stderr
    );
}
