//! The five CLI entry points: `run`, `sweep`, `oracle-check`, `powerlaw`,
//! and `figure`.

use std::path::{Path, PathBuf};

use uasim::analytics::{power_law_fidelity, simulated_base, PowerLawModel};
use uasim::circuit::NoiseModel;
use uasim::fock::oracle_run;
use uasim::protocol::{replay_sample, run_single_sample, sample_rng};

use crate::config::{resolve_threads, with_thread_pool, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::figures;
use crate::output::{
    existing_keys, read_draw_record, sidecar_path, write_draw_record, write_rows, DrawRecord,
    ResultRow,
};
use crate::runner::{safe_enhancement, Point, Runner};

pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Elementwise covariance tolerance for the oracle comparison.
pub const ORACLE_COV_TOL: f64 = 5e-3;
/// Herald-probability tolerance for the oracle comparison.
pub const ORACLE_PROB_TOL: f64 = 1e-3;
/// Largest noise at which the Gaussian-vs-Fock comparison is validated.
pub const ORACLE_SIGMA_LIMIT: f64 = 0.05;
/// Largest system (modes × replicas) the Fock oracle handles at the default
/// cutoff.
pub const ORACLE_MODE_LIMIT: usize = 4;

fn print_row(row: &ResultRow) {
    println!(
        "sigma={:.4} N={} n={} k={}  F={:.6} (±{:.1e})  P={:.6}  eps={:.3}",
        row.sigma,
        row.modes,
        row.replicas,
        row.noisy_params,
        row.fidelity,
        row.fidelity_stderr,
        row.prob_exact,
        row.enhancement_vs_n1
    );
}

pub fn run(
    config_path: &Path,
    seed: Option<u64>,
    samples: Option<usize>,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(m) = samples {
        cfg.samples = m;
        if m == 0 {
            return Err(CliError::Config("samples must be >= 1".into()));
        }
    }
    let modes = cfg.modes.single("modes")?;
    let replicas = cfg.replicas.single("replicas")?;
    if !cfg.record_draws.is_empty() {
        cfg.sigma.single("record_draws")?;
    }
    let out_path = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let threads = resolve_threads(threads)?;

    let target = cfg.target(modes)?;
    let squeezing = cfg.squeezing.for_modes(modes)?;
    let rows = with_thread_pool(threads, || -> Result<Vec<ResultRow>> {
        let mut runner = Runner::new();
        let mut rows = Vec::new();
        for sigma in cfg.sigma.values() {
            let point = Point {
                modes,
                replicas,
                squeezing: squeezing.clone(),
                prep_phases: cfg.prep_phases.clone(),
                weighting: cfg.weighting,
                sigma,
                samples: cfg.samples,
                seed: cfg.seed,
            };
            rows.push(runner.evaluate(&point, &target)?);
        }
        Ok(rows)
    })??;

    for row in &rows {
        print_row(row);
    }
    write_rows(&out_path, &rows, false)?;

    // sidecar records for flagged samples, for replay elsewhere
    let sigma0 = rows.first().map(|r| r.sigma).unwrap_or(0.0);
    let noise = NoiseModel::new(sigma0)?;
    let ua = cfg.ua_config(modes, replicas)?;
    for &index in &cfg.record_draws {
        let mut rng = sample_rng(cfg.seed, index);
        let sample = run_single_sample(&ua, &target, &noise, &mut rng)?;
        let path = sidecar_path(&out_path, index);
        write_draw_record(
            &path,
            &DrawRecord {
                schema_version: crate::config::SCHEMA_VERSION,
                seed: cfg.seed,
                sample: index,
                sigma: sigma0,
                draws: sample.draws,
            },
        )?;
        println!("recorded draws for sample {index} -> {}", path.display());
    }
    println!("wrote {} rows to {}", rows.len(), out_path.display());
    Ok(())
}

pub fn sweep(config_path: &Path, resume: bool, threads: Option<usize>) -> Result<()> {
    let cfg = ExperimentConfig::load(config_path)?;
    let out_path = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let threads = resolve_threads(threads)?;
    let known = if resume {
        existing_keys(&out_path)?
    } else {
        Default::default()
    };

    let mut mode_values = cfg.modes.values();
    mode_values.dedup();
    let mut replica_values = cfg.replicas.values();
    replica_values.sort_unstable();
    replica_values.dedup();

    let rows = with_thread_pool(threads, || -> Result<Vec<ResultRow>> {
        let mut runner = Runner::new();
        let mut rows = Vec::new();
        for &modes in &mode_values {
            let target = cfg.target(modes)?;
            let squeezing = cfg.squeezing.for_modes(modes)?;
            for sigma in cfg.sigma.values() {
                for &replicas in &replica_values {
                    let point = Point {
                        modes,
                        replicas,
                        squeezing: squeezing.clone(),
                        prep_phases: cfg.prep_phases.clone(),
                        weighting: cfg.weighting,
                        sigma,
                        samples: cfg.samples,
                        seed: cfg.seed,
                    };
                    let probe = ResultRow {
                        sigma,
                        modes,
                        replicas,
                        noisy_params: target.noisy_param_count(),
                        fidelity: 1.0,
                        fidelity_stderr: 0.0,
                        prob_exact: 1.0,
                        prob_approx: 1.0,
                        prob_stderr: 0.0,
                        enhancement_vs_n1: 1.0,
                        samples: cfg.samples,
                        seed: cfg.seed,
                        wallclock: 0.0,
                    };
                    if known.contains(&probe.key()) {
                        continue;
                    }
                    rows.push(runner.evaluate(&point, &target)?);
                }
            }
        }
        Ok(rows)
    })??;

    for row in &rows {
        print_row(row);
    }
    write_rows(&out_path, &rows, resume)?;
    println!(
        "wrote {} new rows to {}{}",
        rows.len(),
        out_path.display(),
        if resume { " (resume)" } else { "" }
    );
    Ok(())
}

pub fn oracle_check(config_path: &Path, sample: usize, cutoff: Option<usize>) -> Result<()> {
    let cfg = ExperimentConfig::load(config_path)?;
    let modes = cfg.modes.single("modes")?;
    let replicas = cfg.replicas.single("replicas")?;
    let sigma = cfg.sigma.single("oracle-check")?;
    if modes * replicas > ORACLE_MODE_LIMIT {
        return Err(CliError::Config(format!(
            "Fock oracle handles at most {ORACLE_MODE_LIMIT} total modes; \
             this config has {modes}×{replicas} = {}",
            modes * replicas
        )));
    }
    let cutoff = cutoff.unwrap_or_else(|| cfg.oracle_cutoff());
    if sigma > ORACLE_SIGMA_LIMIT {
        return Err(CliError::Regime(format!(
            "Gaussian approximation out of validated regime: sigma={sigma} exceeds {ORACLE_SIGMA_LIMIT}"
        )));
    }

    let ua = cfg.ua_config(modes, replicas)?;
    let target = cfg.target(modes)?;
    let noise = NoiseModel::new(sigma)?;
    let csv_path = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let side = sidecar_path(&csv_path, sample);

    let draws = if side.exists() {
        let rec = read_draw_record(&side)?;
        if rec.seed != cfg.seed || rec.sample != sample || rec.sigma != sigma {
            return Err(CliError::Config(format!(
                "sidecar {} was recorded for seed={} sample={} sigma={}, \
                 which does not match this config",
                side.display(),
                rec.seed,
                rec.sample,
                rec.sigma
            )));
        }
        rec.draws
    } else {
        let mut rng = sample_rng(cfg.seed, sample);
        let s = run_single_sample(&ua, &target, &noise, &mut rng)?;
        write_draw_record(
            &side,
            &DrawRecord {
                schema_version: crate::config::SCHEMA_VERSION,
                seed: cfg.seed,
                sample,
                sigma,
                draws: s.draws.clone(),
            },
        )?;
        s.draws
    };

    let gaussian = replay_sample(&ua, &target, &draws)?;
    let oracle = oracle_run(&ua, &target, &draws, cutoff)?;

    let a = gaussian.conditioned.matrix();
    let b = oracle.conditioned_covariance.matrix();
    let mut cov_dev = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            cov_dev = cov_dev.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    let prob_dev = (gaussian.exact_p - oracle.herald_probability).abs();

    println!("oracle check: sample {sample}, sigma={sigma}, N={modes}, n={replicas}, cutoff={cutoff}");
    println!("  covariance deviation:         {cov_dev:.3e} (tolerance {ORACLE_COV_TOL:.1e})");
    println!("  herald probability deviation: {prob_dev:.3e} (tolerance {ORACLE_PROB_TOL:.1e})");
    println!("  truncation leakage:           {:.3e}", oracle.leakage);

    if cov_dev <= ORACLE_COV_TOL && prob_dev <= ORACLE_PROB_TOL {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::OracleBounds(format!(
            "covariance deviation {cov_dev:.3e} (tolerance {ORACLE_COV_TOL:.1e}), \
             probability deviation {prob_dev:.3e} (tolerance {ORACLE_PROB_TOL:.1e})"
        )))
    }
}

/// Linearly spaced values, inclusive of both ends.
pub fn linspace(from: f64, to: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![from];
    }
    (0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// One extrapolated row: base measured on the single-mode pipeline, scaled
/// with exponent 2k.
pub fn powerlaw_row(
    modes: usize,
    replicas: usize,
    sigma: f64,
    r_base: f64,
    samples: usize,
    seed: u64,
) -> Result<ResultRow> {
    let started = std::time::Instant::now();
    let k = PowerLawModel::params_for_modes(modes)?;
    let base = simulated_base(replicas, sigma, r_base, samples, seed)?;
    let base1 = simulated_base(1, sigma, r_base, samples, seed)?;
    let scale = |b: f64, s: f64| -> Result<(f64, f64)> {
        let v = power_law_fidelity(b, k)?;
        let deriv = 2.0 * k as f64 * b.powi(2 * k as i32 - 1);
        Ok((v, deriv * s))
    };
    let (fidelity, fidelity_stderr) = scale(base.fidelity, base.fidelity_stderr)?;
    let (prob_exact, prob_stderr) = scale(base.probability, base.probability_stderr)?;
    let (prob_approx, _) = scale(base.probability_approx, 0.0)?;
    let f1 = power_law_fidelity(base1.fidelity, k)?;
    Ok(ResultRow {
        sigma,
        modes,
        replicas,
        noisy_params: k,
        fidelity,
        fidelity_stderr,
        prob_exact,
        prob_approx,
        prob_stderr,
        enhancement_vs_n1: safe_enhancement(f1, fidelity)?,
        samples,
        seed,
        wallclock: started.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn powerlaw(
    modes: usize,
    replicas: usize,
    sigma_from: f64,
    sigma_to: f64,
    steps: usize,
    r_base: f64,
    samples: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    if modes < 2 {
        return Err(CliError::Config(
            "power-law extrapolation needs --modes >= 2".into(),
        ));
    }
    if !replicas.is_power_of_two() {
        return Err(CliError::Config(format!(
            "--n must be a power of two, got {replicas}"
        )));
    }
    if steps == 0 {
        return Err(CliError::Config("--steps must be >= 1".into()));
    }
    for s in [sigma_from, sigma_to] {
        if !s.is_finite() || s < 0.0 {
            return Err(CliError::Config(format!(
                "sigma bounds must be finite and >= 0, got {s}"
            )));
        }
    }
    let samples = samples.unwrap_or(DEFAULT_SAMPLES);
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let out_path = out.unwrap_or_else(|| PathBuf::from("powerlaw.csv"));
    let threads = resolve_threads(threads)?;

    let rows = with_thread_pool(threads, || -> Result<Vec<ResultRow>> {
        linspace(sigma_from, sigma_to, steps)
            .into_iter()
            .map(|sigma| powerlaw_row(modes, replicas, sigma, r_base, samples, seed))
            .collect()
    })??;
    for row in &rows {
        print_row(row);
    }
    write_rows(&out_path, &rows, false)?;
    println!("wrote {} rows to {}", rows.len(), out_path.display());
    Ok(())
}

pub fn figure(
    id: &str,
    out_dir: Option<PathBuf>,
    samples: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Numerical(format!("cannot create {}: {e}", out_dir.display())))?;
    let samples = samples.unwrap_or(DEFAULT_SAMPLES);
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let threads = resolve_threads(threads)?;

    let written = with_thread_pool(threads, || figures::emit(id, &out_dir, samples, seed))??;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
