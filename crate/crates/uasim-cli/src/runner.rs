//! Evaluation of one sweep point: the averaged ensemble itself plus the
//! unprotected (single-replica) companion run that anchors the enhancement
//! column.

use std::collections::HashMap;
use std::time::Instant;

use uasim::circuit::{CircuitSpec, NoiseModel};
use uasim::protocol::{run_ensemble, UAConfig, Weighting};

use crate::error::{CliError, Result};
use crate::output::ResultRow;

/// Infidelities below this are treated as exactly zero when forming the
/// enhancement ratio (both runs perfect, e.g. at σ = 0).
const PERFECT_TOL: f64 = 1e-12;

pub fn safe_enhancement(f_unprotected: f64, f_protected: f64) -> Result<f64> {
    let iu = 1.0 - f_unprotected;
    let ip = 1.0 - f_protected;
    if ip.abs() < PERFECT_TOL {
        if iu.abs() < PERFECT_TOL {
            return Ok(1.0);
        }
        return Err(CliError::Numerical(
            "enhancement undefined: protected run is exact but unprotected is not".into(),
        ));
    }
    Ok(iu / ip)
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct Point {
    pub modes: usize,
    pub replicas: usize,
    pub squeezing: Vec<f64>,
    pub prep_phases: Vec<(usize, f64)>,
    pub weighting: Weighting,
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Point {
    fn ua_config(&self, replicas: usize) -> Result<UAConfig> {
        Ok(UAConfig::new(self.modes, replicas, self.squeezing.clone())?
            .with_prep_phases(self.prep_phases.clone())?
            .with_weighting(self.weighting))
    }

    fn context(&self) -> String {
        format!(
            "sigma={}, N={}, n={}",
            self.sigma, self.modes, self.replicas
        )
    }
}

/// Caches the unprotected fidelity per (modes, sigma, squeezing) so a sweep
/// over replica counts pays for each companion run once.
#[derive(Default)]
pub struct Runner {
    unprotected: HashMap<(usize, u64, Vec<u64>), f64>,
}

impl Runner {
    pub fn new() -> Self {
        Self::default()
    }

    fn cache_key(&self, point: &Point) -> (usize, u64, Vec<u64>) {
        (
            point.modes,
            point.sigma.to_bits(),
            point.squeezing.iter().map(|r| r.to_bits()).collect(),
        )
    }

    fn unprotected_fidelity(&mut self, point: &Point, target: &CircuitSpec) -> Result<f64> {
        let key = self.cache_key(point);
        if let Some(&f) = self.unprotected.get(&key) {
            return Ok(f);
        }
        let config = point.ua_config(1)?;
        let noise = NoiseModel::new(point.sigma)?;
        let e = run_ensemble(&config, target, &noise, point.samples, point.seed)
            .map_err(|err| CliError::Numerical(format!("{} (at {})", err, point.context())))?;
        self.unprotected.insert(key, e.fidelity);
        Ok(e.fidelity)
    }

    /// Runs the ensemble for `point` and assembles the result row.
    pub fn evaluate(&mut self, point: &Point, target: &CircuitSpec) -> Result<ResultRow> {
        let started = Instant::now();
        let config = point.ua_config(point.replicas)?;
        let noise = NoiseModel::new(point.sigma)?;
        let e = run_ensemble(&config, target, &noise, point.samples, point.seed)
            .map_err(|err| CliError::Numerical(format!("{} (at {})", err, point.context())))?;
        let f1 = if point.replicas == 1 {
            self.unprotected.insert(self.cache_key(point), e.fidelity);
            e.fidelity
        } else {
            self.unprotected_fidelity(point, target)?
        };
        let enhancement = safe_enhancement(f1, e.fidelity)
            .map_err(|err| CliError::Numerical(format!("{err} (at {})", point.context())))?;
        Ok(ResultRow {
            sigma: point.sigma,
            modes: point.modes,
            replicas: point.replicas,
            noisy_params: target.noisy_param_count(),
            fidelity: e.fidelity,
            fidelity_stderr: e.fidelity_stderr,
            prob_exact: e.mean_exact_p,
            prob_approx: e.mean_approx_p,
            prob_stderr: e.exact_p_stderr,
            enhancement_vs_n1: enhancement,
            samples: e.samples,
            seed: e.seed,
            wallclock: started.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uasim::circuit::Gate;

    #[test]
    fn enhancement_ratio_and_edge_cases() {
        assert!((safe_enhancement(0.9, 0.95).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(safe_enhancement(1.0, 1.0).unwrap(), 1.0);
        assert!(safe_enhancement(0.9, 1.0).is_err());
    }

    fn small_point(replicas: usize) -> Point {
        Point {
            modes: 1,
            replicas,
            squeezing: vec![0.3],
            prep_phases: vec![],
            weighting: Weighting::HeraldWeighted,
            sigma: 0.05,
            samples: 200,
            seed: 7,
        }
    }

    fn phase_target() -> CircuitSpec {
        CircuitSpec::new(
            1,
            vec![Gate::Phase {
                mode: 0,
                phi: 0.4,
                noisy: true,
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_replica_row_seeds_the_companion_cache() {
        let target = phase_target();
        let mut runner = Runner::new();
        let row1 = runner.evaluate(&small_point(1), &target).unwrap();
        assert!((row1.enhancement_vs_n1 - 1.0).abs() < 1e-12);
        assert_eq!(runner.unprotected.len(), 1);

        let row2 = runner.evaluate(&small_point(2), &target).unwrap();
        let expect = (1.0 - row1.fidelity) / (1.0 - row2.fidelity);
        assert!((row2.enhancement_vs_n1 - expect).abs() < 1e-12);
        // still one cache entry: the n = 2 row reused it
        assert_eq!(runner.unprotected.len(), 1);
    }
}
