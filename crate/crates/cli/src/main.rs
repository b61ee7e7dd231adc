//! Command-line front end: generate fields, extract spectra, run Monte Carlo
//! ensembles against the limit process, and compare distributions.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 on
//! numeric failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heavyedge::error::Error;
use heavyedge::experiments::{self, ExperimentConfig, Reference};
use heavyedge::matrix::{self, SymMatrix};
use heavyedge::spectra;
use heavyedge::stats;
use heavyedge::estimators;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "heavyedge", version, about = "Heavy-tailed random matrix simulations")]
struct Cli {
    /// Worker threads for trial-parallel phases (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a field sample and write it as a matrix file
    Gen {
        /// config with a [model] section
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// bin | csv
        #[arg(long, default_value = "bin")]
        format: String,
    },
    /// Print the top of the spectrum of a stored symmetric matrix
    Eig {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// use the thresholded block shortcut instead of a dense solve
        #[arg(long, default_value_t = false)]
        sparse: bool,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// block side for the shortcut (0 = default)
        #[arg(long, default_value_t = 0)]
        block: usize,
    },
    /// Run ensemble trials from a config; writes trials.csv and summary.json
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// override the [output] directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the limiting point process; writes a reference CSV
    Limit {
        #[arg(long)]
        config: PathBuf,
        /// number of draws (0 = reps * reference_factor)
        #[arg(long, default_value_t = 0)]
        draws: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the extremal index; prints the estimate and the closed form
    Theta {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two samples, or a sample against a Fréchet law
    Compare {
        /// empirical CSV
        #[arg(long)]
        a: PathBuf,
        /// reference CSV (omit when using --frechet)
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long, default_value = "value")]
        column: String,
        /// column in the reference file when it differs
        #[arg(long)]
        column_b: Option<String>,
        /// per-trial rank to extract (0 = use all rows)
        #[arg(long, default_value_t = 0)]
        rank: usize,
        /// row filter like side=pos
        #[arg(long)]
        filter: Option<String>,
        /// compare against exp(-theta x^{-alpha}) instead of a second file
        #[arg(long, default_value_t = false)]
        frechet: bool,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// report path (JSON); QQ table lands next to it as .qq.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate summary.json files under a directory into one table
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("heavyedge: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heavyedge: {e}");
            let code = match e {
                Error::Numeric(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cmd: Command) -> heavyedge::Result<()> {
    match cmd {
        Command::Gen { config, rows, cols, seed, out, format } => {
            let text = fs::read_to_string(&config)?;
            let model_cfg = experiments::parse_model_section(&text)?;
            let model = model_cfg.build()?;
            let sample = model.generate(rows, cols, seed)?;
            let mut file = fs::File::create(&out)?;
            match format.as_str() {
                "bin" => matrix::write_array_bin(&mut file, rows, cols, &sample.values)?,
                "csv" => {
                    writeln!(file, "# model={} seed={} version={}", sample.model_tag, seed, VERSION)?;
                    matrix::write_array_csv(&mut file, rows, cols, &sample.values)?;
                }
                other => return Err(Error::validation(format!("unknown format '{other}'"))),
            }
            Ok(())
        }

        Command::Eig { input, top, sparse, eps, block } => {
            let (rows, cols, data) = matrix::load_matrix(&input)?;
            if rows != cols {
                return Err(Error::validation("eig needs a square matrix"));
            }
            let m = SymMatrix::from_rows(rows, data)?;
            if sparse {
                let r = if block > 0 { block } else { matrix::default_block_side(rows) };
                if !rows.is_multiple_of(r) {
                    return Err(Error::validation(format!(
                        "block side {r} must divide the order {rows}"
                    )));
                }
                let (above, _) = matrix::truncate_sym(&m, eps)?;
                match spectra::sparse_truncated_spectrum(&above, r)? {
                    spectra::SparseSpectrum::Spectrum { singulars } => {
                        for (i, s) in singulars.iter().take(top).enumerate() {
                            println!(
                                "pos {} {} block=({},{})",
                                i + 1,
                                s.value,
                                s.block.0,
                                s.block.1
                            );
                        }
                        return Ok(());
                    }
                    spectra::SparseSpectrum::Fallback { reason } => {
                        eprintln!("sparse structure absent ({reason:?}); dense path used");
                    }
                }
            }
            let eig = spectra::sym_eig(&m, false)?;
            let (pos, neg) = spectra::spectrum_point_sets(&eig.values);
            for (i, v) in pos.iter().take(top).enumerate() {
                println!("pos {} {v}", i + 1);
            }
            for (i, v) in neg.iter().take(top).enumerate() {
                println!("neg {} {v}", i + 1);
            }
            Ok(())
        }

        Command::Simulate { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            fs::create_dir_all(&dir)?;
            let run_out = if cfg.ensemble.kind == "wigner" {
                experiments::run_wigner_trials(&cfg)?
            } else {
                experiments::run_cov_trials(&cfg)?
            };
            let model = cfg.model.build()?;
            let cluster = model.theoretical_cluster()?;
            let emp: Vec<Vec<f64>> = run_out.trials.iter().map(|t| t.top.clone()).collect();
            let reference = experiments::reference_topk(
                &cluster,
                model.alpha(),
                &cfg.ensemble.kind,
                cfg.run.top_k,
                cfg.run.reps * cfg.run.reference_factor,
                cfg.run.seed,
            )?;
            let cmp = experiments::compare_topk(&emp, &reference)?;

            let mut trials_file = fs::File::create(dir.join("trials.csv"))?;
            experiments::write_trials_csv(&mut trials_file, &run_out, VERSION)?;
            let summary = experiments::summarize(&cfg, &run_out, &cmp);
            let json = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::validation(e.to_string()))?;
            fs::write(dir.join("summary.json"), json)?;
            // QQ table of the top rank against the reference draws
            let top1: Vec<f64> = run_out.values_at_rank(1, true);
            let ref1: Vec<f64> = reference.iter().map(|r| r[0]).collect();
            let qq = experiments::compare_distributions(&top1, Reference::Sample(&ref1))?;
            let mut qq_file = fs::File::create(dir.join("qq_rank1.csv"))?;
            experiments::write_qq_csv(&mut qq_file, &qq, &run_out.fingerprint, VERSION)?;
            Ok(())
        }

        Command::Limit { config, draws, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            cfg.validate()?;
            let model = cfg.model.build()?;
            let cluster = model.theoretical_cluster()?;
            let n_draws = if draws > 0 { draws } else { cfg.run.reps * cfg.run.reference_factor };
            let path = out.unwrap_or_else(|| {
                Path::new(&cfg.output.dir).join("limit.csv")
            });
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            let mut file = fs::File::create(&path)?;
            experiments::write_limit_csv(
                &mut file,
                &cluster,
                model.alpha(),
                &cfg.ensemble.kind,
                cfg.run.top_k,
                n_draws,
                cfg.run.seed,
                &cfg.fingerprint(),
                VERSION,
            )?;
            Ok(())
        }

        Command::Theta { config, seed } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let model = cfg.model.build()?;
            let n = cfg.ensemble.n;
            let r = if cfg.estimator.r > 0 {
                cfg.estimator.r
            } else {
                (n as f64).powf(0.3).ceil() as usize
            };
            let est = estimators::estimate_extremal_index(
                &model,
                n,
                r,
                cfg.estimator.u,
                cfg.estimator.reps,
                seed.unwrap_or(cfg.run.seed),
            )?;
            let closed = model
                .theoretical_cluster()
                .map(|c| format!("{}", c.theta))
                .unwrap_or_else(|_| "n/a".into());
            println!(
                "theta_hat {} stderr {} closed_form {closed}",
                est.theta_hat, est.stderr
            );
            Ok(())
        }

        Command::Compare { a, b, column, column_b, rank, filter, frechet, theta, alpha, out } => {
            let rank_opt = (rank > 0).then_some(rank);
            let filt = match &filter {
                Some(f) => {
                    let (k, v) = f
                        .split_once('=')
                        .ok_or_else(|| Error::validation("filter must look like side=pos"))?;
                    Some((k, v))
                }
                None => None,
            };
            let text_a = fs::read_to_string(&a)?;
            let xs = experiments::csv_column_values(&text_a, &column, rank_opt, filt)?;
            let cmp = if frechet {
                experiments::compare_distributions(
                    &xs,
                    Reference::Cdf(Box::new(move |x| stats::frechet_cdf(theta, alpha, x))),
                )?
            } else {
                let b = b.ok_or_else(|| Error::validation("need --b or --frechet"))?;
                let text_b = fs::read_to_string(&b)?;
                let col_b = column_b.as_deref().unwrap_or(&column);
                // reference files carry no side column; only filter when present
                let filt_b = match (filt, experiments::read_csv_table(&text_b)?.0) {
                    (Some((name, want)), header) if header.iter().any(|h| h == name) => {
                        Some((name, want))
                    }
                    _ => None,
                };
                let ys = experiments::csv_column_values(&text_b, col_b, rank_opt, filt_b)?;
                experiments::compare_distributions(&xs, Reference::Sample(&ys))?
            };
            let json = serde_json::json!({
                "schema_version": 1,
                "tool_version": VERSION,
                "ks": cmp.ks,
                "n_empirical": cmp.n_empirical,
                "n_reference": cmp.n_reference,
            });
            fs::write(&out, serde_json::to_string_pretty(&json).unwrap())?;
            let qq_path = out.with_extension("qq.csv");
            let mut qq = fs::File::create(&qq_path)?;
            experiments::write_qq_csv(&mut qq, &cmp, "-", VERSION)?;
            Ok(())
        }

        Command::Report { dir } => {
            let mut rows = Vec::new();
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                collect_summaries(&path, &mut rows)?;
            }
            rows.sort();
            println!("file\tkind\tn\treps\tevent_s_rate\tks_top1\tks_joint_top2");
            for row in rows {
                println!("{row}");
            }
            Ok(())
        }
    }
}

fn collect_summaries(path: &Path, rows: &mut Vec<String>) -> heavyedge::Result<()> {
    if path.is_dir() {
        for entry in fs::read_dir(path)? {
            collect_summaries(&entry?.path(), rows)?;
        }
        return Ok(());
    }
    if path.file_name().and_then(|f| f.to_str()) != Some("summary.json") {
        return Ok(());
    }
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::validation(e.to_string()))?;
    let ks_top = v["ks_per_rank"]
        .as_array()
        .and_then(|a| a.first())
        .and_then(|x| x.as_f64())
        .map(|x| x.to_string())
        .unwrap_or_else(|| "-".into());
    let joint = v["ks_joint_top2"].as_f64().map(|x| x.to_string()).unwrap_or_else(|| "-".into());
    rows.push(format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        path.display(),
        v["kind"].as_str().unwrap_or("-"),
        v["n"],
        v["reps"],
        v["event_s_rate"],
        ks_top,
        joint
    ));
    Ok(())
}
