//! Named data presets: each bundles squeezing values, noise grids, and
//! circuit choices for one figure-style dataset and emits CSVs (one per
//! curve family, since the row format carries no squeezing column).

use std::path::{Path, PathBuf};

use uasim::circuit::{clements_mesh, random_mesh_parameters, CircuitSpec};
use uasim::protocol::Weighting;

use crate::commands::{linspace, powerlaw_row};
use crate::error::{CliError, Result};
use crate::output::write_rows;
use crate::runner::{Point, Runner};

pub const PRESETS: &[&str] = &[
    "fig-fid2mode",
    "fig-345modes",
    "fig-10mode",
    "fig-powerlaw-agreement",
    "fig-216mode",
    "fig-enhancement",
];

/// Reference two-mode interferometer used across the two-mode presets; the
/// angles are fixed so different squeezing configurations see the identical
/// circuit.
pub fn two_mode_reference() -> CircuitSpec {
    clements_mesh(2, &[1.51], &[0.9], &[0.7, 0.0]).expect("static mesh parameters")
}

/// Seeded full mesh used by the multimode presets.
fn seeded_mesh(modes: usize, seed: u64) -> Result<CircuitSpec> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (thetas, phis, out) = random_mesh_parameters(modes, &mut rng);
    Ok(clements_mesh(modes, &thetas, &phis, &out)?)
}

const MESH_SEED: u64 = 7;

struct Curve<'a> {
    file: &'a str,
    squeezing: Vec<f64>,
    replicas: Vec<usize>,
    sigmas: Vec<f64>,
    target: CircuitSpec,
}

fn run_curves(out_dir: &Path, samples: usize, seed: u64, curves: Vec<Curve>) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for curve in curves {
        let mut runner = Runner::new();
        let mut rows = Vec::new();
        for &sigma in &curve.sigmas {
            for &replicas in &curve.replicas {
                let point = Point {
                    modes: curve.target.modes(),
                    replicas,
                    squeezing: curve.squeezing.clone(),
                    prep_phases: Vec::new(),
                    weighting: Weighting::HeraldWeighted,
                    sigma,
                    samples,
                    seed,
                };
                rows.push(runner.evaluate(&point, &curve.target)?);
            }
        }
        let path = out_dir.join(curve.file);
        write_rows(&path, &rows, false)?;
        written.push(path);
    }
    Ok(written)
}

pub fn emit(id: &str, out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    match id {
        "fig-fid2mode" => fid2mode(out_dir, samples, seed),
        "fig-345modes" => multimode(out_dir, samples, seed),
        "fig-10mode" => ten_mode(out_dir, samples, seed),
        "fig-powerlaw-agreement" => powerlaw_agreement(out_dir, samples, seed),
        "fig-216mode" => large_extrapolation(out_dir, samples, seed),
        "fig-enhancement" => enhancement_curves(out_dir, samples, seed),
        other => Err(CliError::Config(format!(
            "unknown figure preset `{other}`; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Two-mode fidelity and success probability, with the pair of
/// equal-mean-photon squeezing configurations for the invariance comparison.
fn fid2mode(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let sigmas = linspace(0.0, 0.1, 11);
    let curves = vec![
        Curve {
            file: "fig-fid2mode_r050-070.csv",
            squeezing: vec![0.5, 0.7],
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: two_mode_reference(),
        },
        Curve {
            file: "fig-fid2mode_r070-070.csv",
            squeezing: vec![0.7, 0.7],
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: two_mode_reference(),
        },
        Curve {
            file: "fig-fid2mode_r020-0805.csv",
            squeezing: vec![0.2, 0.805],
            replicas: vec![1, 2],
            sigmas,
            target: two_mode_reference(),
        },
    ];
    run_curves(out_dir, samples, seed, curves)
}

/// Three-, four-, and five-mode meshes with graded squeezing.
fn multimode(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let sigmas = linspace(0.0, 0.1, 11);
    let squeezings: [(usize, &str, Vec<f64>); 3] = [
        (3, "fig-345modes_N3.csv", vec![0.5, 0.6, 0.7]),
        (4, "fig-345modes_N4.csv", vec![0.3, 0.4, 0.5, 0.6]),
        (5, "fig-345modes_N5.csv", vec![0.3, 0.4, 0.5, 0.6, 0.7]),
    ];
    let mut curves = Vec::new();
    for (modes, file, squeezing) in squeezings {
        curves.push(Curve {
            file,
            squeezing,
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: seeded_mesh(modes, MESH_SEED)?,
        });
    }
    run_curves(out_dir, samples, seed, curves)
}

/// Ten modes at weak squeezing on a reduced noise scale.
fn ten_mode(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let curves = vec![Curve {
        file: "fig-10mode.csv",
        squeezing: vec![0.1; 10],
        replicas: vec![1, 2],
        sigmas: linspace(0.0, 0.01, 6),
        target: seeded_mesh(10, MESH_SEED)?,
    }];
    run_curves(out_dir, samples, seed, curves)
}

/// Direct simulation vs extrapolation at matching noisy-parameter counts:
/// a full five-mode mesh (24 parameters), the same mesh with only the first
/// 19 parameters noisy, and a ten-mode mesh (99 parameters).
fn powerlaw_agreement(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let sigmas = linspace(0.002, 0.01, 5);
    let five = seeded_mesh(5, MESH_SEED)?;
    let five_sub = five.with_noisy_limit(19);
    let ten = seeded_mesh(10, MESH_SEED)?;

    let direct = vec![
        Curve {
            file: "fig-powerlaw-agreement_direct-N5.csv",
            squeezing: vec![0.1; 5],
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: five,
        },
        Curve {
            file: "fig-powerlaw-agreement_direct-N5sub.csv",
            squeezing: vec![0.1; 5],
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: five_sub,
        },
        Curve {
            file: "fig-powerlaw-agreement_direct-N10.csv",
            squeezing: vec![0.1; 10],
            replicas: vec![1, 2],
            sigmas: sigmas.clone(),
            target: ten,
        },
    ];
    let mut written = run_curves(out_dir, samples, seed, direct)?;

    // matching extrapolated curves from the measured single-mode base
    let mut rows = Vec::new();
    for &sigma in &sigmas {
        for replicas in [1usize, 2] {
            for modes in [5usize, 10] {
                rows.push(powerlaw_row(modes, replicas, sigma, 0.1, samples, seed)?);
            }
        }
    }
    let path = out_dir.join("fig-powerlaw-agreement_power.csv");
    write_rows(&path, &rows, false)?;
    written.push(path);
    Ok(written)
}

/// Power-law extrapolation to a 216-mode system.
fn large_extrapolation(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    for sigma in linspace(0.0, 0.1, 11) {
        for replicas in [1usize, 2] {
            rows.push(powerlaw_row(216, replicas, sigma, 0.1, samples, seed)?);
        }
    }
    let path = out_dir.join("fig-216mode.csv");
    write_rows(&path, &rows, false)?;
    Ok(vec![path])
}

/// Infidelity enhancement across noise, replica count, and circuit size.
fn enhancement_curves(out_dir: &Path, samples: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let mut rows = Vec::new();
    for sigma in linspace(0.01, 0.1, 10) {
        for replicas in [2usize, 4] {
            // mode counts whose full meshes carry 3, 8, 24, and 99 noisy
            // parameters
            for modes in [2usize, 3, 5, 10] {
                rows.push(powerlaw_row(modes, replicas, sigma, 0.1, samples, seed)?);
            }
        }
    }
    let path = out_dir.join("fig-enhancement.csv");
    write_rows(&path, &rows, false)?;
    Ok(vec![path])
}
