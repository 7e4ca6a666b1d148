//! `floquet`: band tables, localization plans, gap reports, verification and
//! determinant profiles for odd-order periodic matrix operators.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use floquet_core::bands::{build_band_table, detect_gaps, detect_gaps_two_resolutions};
use floquet_core::localization::plan_intervals;
use floquet_core::monodromy::DeterminantEvaluator;
use floquet_core::verify::{refine_grid, run_verification, VerifyOptions};
use floquet_core::{compute_m_norm, compute_threshold, load_operator_spec_file, Error, ErrorKind, Result};

use config::{ConfigFile, DeterminantFile, EffectiveConfig, GridSpec, ToleranceFile};
use output::{band_csv, determinant_csv, DeterminantRow, OutputDir};

#[derive(Debug, Parser)]
#[command(
    name = "floquet",
    version,
    about = "Band structure of odd-order periodic matrix differential operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the coefficient norm and the threshold index.
    Norm(CommonArgs),
    /// Write the band table (bands.csv) and its gap report (gaps.json).
    Bands(CommonArgs),
    /// Write the localization plan for every grid point (plans.json).
    Localize(CommonArgs),
    /// Detect gaps at two grid resolutions (gaps.json).
    Gaps(CommonArgs),
    /// Run the predicate suite (verification.json).
    Verify(CommonArgs),
    /// Sample |Delta(lambda, t)| on a real lambda window (determinant.csv).
    Determinant(DeterminantArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Operator coefficient file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Fourier truncation K (blocks -K..=K).
    #[arg(long)]
    truncation: Option<usize>,
    /// Largest satellite block |k| in the localization plan.
    #[arg(long, allow_negative_numbers = true)]
    k_max: Option<i64>,
    /// Number of positive band indices to tabulate.
    #[arg(long)]
    s_max: Option<usize>,
    /// Uniform grid on (t_lo, t_hi] with this many points.
    #[arg(long)]
    t_count: Option<usize>,
    /// Lower end of the uniform grid (excluded).
    #[arg(long, allow_negative_numbers = true)]
    t_lo: Option<f64>,
    /// Upper end of the uniform grid (included).
    #[arg(long, allow_negative_numbers = true)]
    t_hi: Option<f64>,
    /// Explicit grid, comma separated (overrides the uniform grid).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t_points: Option<Vec<f64>>,
    /// Relative tolerance for the Hermitian check of fiber matrices.
    #[arg(long)]
    hermitian_tol: Option<f64>,
    /// Absolute tolerance of the monodromy integrator.
    #[arg(long)]
    ode_abs: Option<f64>,
    /// Relative tolerance of the monodromy integrator.
    #[arg(long)]
    ode_rel: Option<f64>,
    /// Allowed relative eigenvalue shift when the truncation grows.
    #[arg(long)]
    eig_stability: Option<f64>,
    /// Monodromy window as a multiple of pi: |lambda| <= (w pi)^n.
    #[arg(long)]
    monodromy_window: Option<f64>,
    /// Directory for output files (created if missing).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DeterminantArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Left end of the sampled lambda window.
    #[arg(long, allow_negative_numbers = true)]
    lambda_lo: Option<f64>,
    /// Right end of the sampled lambda window.
    #[arg(long, allow_negative_numbers = true)]
    lambda_hi: Option<f64>,
    /// Number of equally spaced lambda samples, ends included.
    #[arg(long)]
    samples: Option<usize>,
    /// Quasimomenta for the profile, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t_values: Option<Vec<f64>>,
}

impl CommonArgs {
    fn overrides(&self) -> ConfigFile {
        let t_grid = match (&self.t_points, self.t_count, self.t_lo, self.t_hi) {
            (Some(points), ..) => Some(GridSpec::Points(points.clone())),
            (None, None, None, None) => None,
            (None, count, lo, hi) => Some(GridSpec::Uniform {
                count: count.unwrap_or(config::DEFAULT_GRID_COUNT),
                lo: lo.unwrap_or(-1.0),
                hi: hi.unwrap_or(1.0),
            }),
        };
        ConfigFile {
            spec_path: self.spec.clone(),
            truncation: self.truncation,
            k_max: self.k_max,
            s_max: self.s_max,
            t_grid,
            tolerances: Some(ToleranceFile {
                hermitian: self.hermitian_tol,
                ode_abs: self.ode_abs,
                ode_rel: self.ode_rel,
                eig_stability: self.eig_stability,
            }),
            monodromy_window: self.monodromy_window,
            output_dir: self.output_dir.clone(),
            determinant: None,
        }
    }

    fn file_config(&self) -> Result<ConfigFile> {
        let base = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        Ok(base.merged(self.overrides()))
    }

    fn resolve(&self) -> Result<(EffectiveConfig, floquet_core::OperatorSpec)> {
        EffectiveConfig::resolve(self.file_config()?)
    }
}

/// Exit status of a completed run: success or a falsified claim.
enum Outcome {
    Passed,
    Falsified,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Falsified => 1,
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Norm(a) => cmd_norm(a),
        Command::Bands(a) => cmd_bands(a),
        Command::Localize(a) => cmd_localize(a),
        Command::Gaps(a) => cmd_gaps(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Determinant(a) => cmd_determinant(a),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Falsified) => ExitCode::from(1),
        Err(e) => {
            eprintln!("floquet: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

fn cmd_norm(args: &CommonArgs) -> Result<Outcome> {
    let cfg = args.file_config()?;
    let path = cfg
        .spec_path
        .ok_or_else(|| Error::Validation("no operator spec given (use --spec or spec_path)".into()))?;
    let spec = load_operator_spec_file(&path)?;
    let norm = compute_m_norm(&spec);
    let record = json!({
        "order": spec.order(),
        "dim": spec.dim(),
        "m_value": norm.m_value,
        "entrywise_bound": norm.entrywise_bound,
        "per_v": norm.per_v,
        "threshold": compute_threshold(norm.m_value),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&record).expect("norm record serializes")
    );
    Ok(Outcome::Passed)
}

fn cmd_bands(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = args.resolve()?;
    let out = OutputDir::create(&cfg)?;
    let table = build_band_table(&spec, &cfg.t_grid, &cfg.band_options())?;
    out.write("bands.csv", &band_csv(&table))?;
    out.write_json("gaps.json", &detect_gaps(&table))?;
    Ok(Outcome::Passed)
}

fn cmd_localize(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = args.resolve()?;
    let out = OutputDir::create(&cfg)?;
    let mut records = Vec::with_capacity(cfg.t_grid.len());
    let mut overlaps = 0usize;
    for &t in &cfg.t_grid {
        let plan = plan_intervals(&spec, cfg.m_norm, t, cfg.k_max)?;
        let overlap = plan.overlapping_pair(0.0);
        if let Some((a, b)) = &overlap {
            eprintln!("floquet: intervals {a} and {b} overlap at t={t}");
            overlaps += 1;
        }
        records.push(json!({ "t": t, "plan": plan, "overlap": overlap }));
    }
    out.write_json("plans.json", &records)?;
    Ok(if overlaps == 0 {
        Outcome::Passed
    } else {
        Outcome::Falsified
    })
}

fn cmd_gaps(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = args.resolve()?;
    let out = OutputDir::create(&cfg)?;
    let opts = cfg.band_options();
    let coarse = build_band_table(&spec, &cfg.t_grid, &opts)?;
    let fine = build_band_table(&spec, &refine_grid(&cfg.t_grid), &opts)?;
    let report = detect_gaps_two_resolutions(&coarse, &fine);
    out.write_json("gaps.json", &report)?;
    if !report.within_bound {
        eprintln!("floquet: {} gaps exceed the bound {}", report.gaps.len(), report.bound);
        return Ok(Outcome::Falsified);
    }
    Ok(Outcome::Passed)
}

fn cmd_verify(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = args.resolve()?;
    let out = OutputDir::create(&cfg)?;
    let opts = VerifyOptions {
        bands: cfg.band_options(),
        monodromy: cfg.monodromy_options(),
        eig_stability: cfg.tolerances.eig_stability,
        ..VerifyOptions::defaults(&spec, cfg.t_grid.clone())
    };
    let summary = run_verification(&spec, &opts)?;
    out.write_json("verification.json", &summary)?;
    for p in &summary.predicates {
        println!("{} {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.claim);
    }
    Ok(if summary.all_passed {
        Outcome::Passed
    } else {
        Outcome::Falsified
    })
}

fn cmd_determinant(args: &DeterminantArgs) -> Result<Outcome> {
    let mut file = args.common.file_config()?;
    let det = file.determinant.take().unwrap_or_default();
    file.determinant = Some(DeterminantFile {
        lambda_lo: args.lambda_lo.or(det.lambda_lo),
        lambda_hi: args.lambda_hi.or(det.lambda_hi),
        samples: args.samples.or(det.samples),
        t: args.t_values.clone().or(det.t),
    });
    let (cfg, spec) = EffectiveConfig::resolve(file)?;
    let evaluator = DeterminantEvaluator::new(&spec, cfg.monodromy_options());
    let d = &cfg.determinant;
    for lambda in [d.lambda_lo, d.lambda_hi] {
        evaluator.check_window(Complex64::new(lambda, 0.0))?;
    }
    let out = OutputDir::create(&cfg)?;

    let lambdas: Vec<f64> = (0..d.samples)
        .map(|j| d.lambda_lo + (d.lambda_hi - d.lambda_lo) * j as f64 / (d.samples - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(lambdas.len() * d.t.len());
    for &t in &d.t {
        // Each sample stands alone: an integrator failure is recorded and the scan goes on.
        let values: Vec<Result<Complex64>> = lambdas
            .par_iter()
            .map(|&l| evaluator.determinant(Complex64::new(l, 0.0), t))
            .collect();
        let scale = values
            .iter()
            .filter_map(|v| v.as_ref().ok())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        for (&lambda, value) in lambdas.iter().zip(values) {
            rows.push(match value {
                Ok(z) => DeterminantRow {
                    lambda,
                    t,
                    abs_normalized: if scale > 0.0 { z.norm() / scale } else { 0.0 },
                    value: Some(z),
                    status: "ok".into(),
                },
                Err(e) => {
                    eprintln!("floquet: lambda={lambda} t={t}: {e}");
                    DeterminantRow {
                        lambda,
                        t,
                        abs_normalized: f64::NAN,
                        value: None,
                        status: e.to_string(),
                    }
                }
            });
        }
    }
    out.write("determinant.csv", &determinant_csv(&rows))?;
    Ok(Outcome::Passed)
}
