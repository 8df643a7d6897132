//! Closed-form single-mode averaging model, the power-law extrapolation to
//! large mode counts, and the enhancement metric.
//!
//! The single-mode model describes phase-averaged squeezing on one arm of a
//! two-mode squeezed state: n replica phases δⱼ ~ N(0, v) combine into
//! αe^{iφ_β} = (Σ e^{iδⱼ})/n, the effective squeezing obeys
//! tanh r′ = α tanh r, and heralding succeeds with |cosh r′ / cosh r|².

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::circuit::{CircuitSpec, Gate, NoiseModel};
use crate::error::{Result, UaError};
use crate::gaussian::{gaussian_fidelity, CovarianceMatrix};
use crate::protocol::{run_ensemble, UAConfig};

/// Phase-noise variance accepted by the small-noise expansions.
pub const MAX_MODEL_VARIANCE: f64 = 0.1;
/// Above this variance the expansions still run but accuracy degrades.
pub const SOFT_MODEL_VARIANCE: f64 = 0.05;

/// ⟨tanh r′⟩ ≈ (1 − (v/2 − v/(2n))) tanh r in the low-noise limit.
pub fn averaged_tanh(r: f64, v: f64, n: usize) -> Result<f64> {
    check_variance(v)?;
    check_replicas(n)?;
    Ok((1.0 - (v / 2.0 - v / (2.0 * n as f64))) * r.tanh())
}

/// ⟨cos φ_β⟩ ≈ cos √(v/n).
pub fn averaged_cos_phase(v: f64, n: usize) -> Result<f64> {
    check_variance(v)?;
    check_replicas(n)?;
    Ok((v / n as f64).sqrt().cos())
}

fn check_variance(v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(UaError::ModelRange(format!(
            "noise variance must be finite and >= 0, got {v}"
        )));
    }
    if v > MAX_MODEL_VARIANCE {
        return Err(UaError::ModelRange(format!(
            "noise variance {v} outside the small-noise expansion range (max {MAX_MODEL_VARIANCE})"
        )));
    }
    Ok(())
}

fn check_replicas(n: usize) -> Result<()> {
    if n == 0 {
        return Err(UaError::ModelRange("replica count must be >= 1".into()));
    }
    Ok(())
}

/// Single-mode averaging channel with noise variance `v` over `n` replicas.
#[derive(Debug, Clone, Copy)]
pub struct SingleModeChannelModel {
    pub r: f64,
    pub v: f64,
    pub n: usize,
}

impl SingleModeChannelModel {
    pub fn new(r: f64, v: f64, n: usize) -> Result<Self> {
        check_variance(v)?;
        check_replicas(n)?;
        Ok(Self { r, v, n })
    }

    /// True when `v` exceeds the soft accuracy bound of the expansions.
    pub fn beyond_recommended_range(&self) -> bool {
        self.v > SOFT_MODEL_VARIANCE
    }

    /// Replica average αe^{iφ_β} = (Σ e^{iδⱼ})/n for a concrete draw.
    pub fn replica_average(deltas: &[f64]) -> (f64, f64) {
        let n = deltas.len().max(1) as f64;
        let re: f64 = deltas.iter().map(|d| d.cos()).sum::<f64>() / n;
        let im: f64 = deltas.iter().map(|d| d.sin()).sum::<f64>() / n;
        ((re * re + im * im).sqrt(), im.atan2(re))
    }

    /// ⟨tanh r′⟩ under the noise average.
    pub fn averaged_tanh(&self) -> f64 {
        averaged_tanh(self.r, self.v, self.n).expect("validated at construction")
    }

    /// Effective squeezing r′ with tanh r′ = ⟨tanh r′⟩.
    pub fn averaged_r_prime(&self) -> f64 {
        self.averaged_tanh().atanh()
    }

    pub fn averaged_cos_phase(&self) -> f64 {
        averaged_cos_phase(self.v, self.n).expect("validated at construction")
    }
}

/// Noise-averaged two-mode output covariance of the single-mode model:
/// diagonal blocks (1+t′²)/(1−t′²)·I with t′ = ⟨tanh r′⟩, correlation block
/// ±(2t′/(1−t′²))·⟨cos φ_β⟩ with the rotation-induced off-diagonal term
/// averaged to zero.
pub fn single_mode_output_covariance(model: &SingleModeChannelModel) -> CovarianceMatrix {
    let t = model.averaged_tanh();
    let a = (1.0 + t * t) / (1.0 - t * t);
    let y = 2.0 * t / (1.0 - t * t) * model.averaged_cos_phase();
    two_mode_squeezed_like(a, y, 0.0)
}

/// Output covariance for one concrete draw (fixed α, φ_β), keeping the full
/// off-diagonal series 𝒞 = 2 sech²r′ Σ (N+1) t′^{2N+1} sin φ_β.
pub fn single_mode_output_covariance_for_draw(
    r: f64,
    deltas: &[f64],
) -> Result<CovarianceMatrix> {
    let (alpha, phi_beta) = SingleModeChannelModel::replica_average(deltas);
    let t_prime = alpha * r.tanh();
    let r_prime = t_prime.atanh();
    let a = (1.0 + t_prime * t_prime) / (1.0 - t_prime * t_prime);
    let y = 2.0 * t_prime / (1.0 - t_prime * t_prime) * phi_beta.cos();
    let c = cross_term_series(r_prime, phi_beta)?;
    Ok(two_mode_squeezed_like(a, y, c))
}

/// Σ cutoff guards for the cross-term series.
const SERIES_TERM_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 10_000;

/// 2 sech²r′ Σ_{N≥0} (N+1) (tanh r′)^{2N+1} sin φ_β, truncated when terms
/// drop below 1e-14.
pub fn cross_term_series(r_prime: f64, phi_beta: f64) -> Result<f64> {
    let t = r_prime.tanh();
    let pref = 2.0 * phi_beta.sin() / r_prime.cosh().powi(2);
    let mut sum = 0.0;
    let mut pow = t; // t^{2N+1} at N = 0
    for n in 0..SERIES_MAX_TERMS {
        let term = (n + 1) as f64 * pow;
        sum += term;
        if term.abs() < SERIES_TERM_TOL {
            return Ok(pref * sum);
        }
        pow *= t * t;
    }
    Err(UaError::Numerical(format!(
        "cross-term series failed to converge within {SERIES_MAX_TERMS} terms (tanh r′ = {t})"
    )))
}

fn two_mode_squeezed_like(a: f64, y: f64, c: f64) -> CovarianceMatrix {
    let mut v = DMatrix::zeros(4, 4);
    for q in 0..4 {
        v[(q, q)] = a;
    }
    v[(0, 2)] = -y;
    v[(2, 0)] = -y;
    v[(1, 3)] = y;
    v[(3, 1)] = y;
    v[(0, 3)] = c;
    v[(3, 0)] = c;
    v[(1, 2)] = c;
    v[(2, 1)] = c;
    CovarianceMatrix::from_matrix_unchecked(v)
}

/// Herald probability |cosh r′ / cosh r|² of the single-mode model.
pub fn single_mode_success_prob(model: &SingleModeChannelModel) -> f64 {
    let r_prime = model.averaged_r_prime();
    (r_prime.cosh() / model.r.cosh()).powi(2)
}

/// Fidelity of the noise-averaged model state against its noiseless limit.
pub fn single_mode_fidelity(model: &SingleModeChannelModel) -> Result<f64> {
    let ideal = single_mode_output_covariance(&SingleModeChannelModel::new(model.r, 0.0, model.n)?);
    gaussian_fidelity(&ideal, &single_mode_output_covariance(model))
}

/// Base point for power-law extrapolation: single-mode fidelity and success
/// probability at a given replica count.
#[derive(Debug, Clone, Copy)]
pub struct BasePoint {
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub probability: f64,
    pub probability_stderr: f64,
    /// Mean of the product approximation to the herald probability.
    pub probability_approx: f64,
}

type BaseKey = (usize, u64, u64, usize, u64);

fn base_cache() -> &'static Mutex<HashMap<BaseKey, BasePoint>> {
    static CACHE: OnceLock<Mutex<HashMap<BaseKey, BasePoint>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The power law's base case, measured operationally: the single-mode
/// pipeline (one squeezed mode, one noisy phase shifter, n replicas) run as
/// a Monte-Carlo ensemble.  Results are cached per parameter set.
pub fn simulated_base(
    n: usize,
    sigma: f64,
    r_base: f64,
    samples: usize,
    seed: u64,
) -> Result<BasePoint> {
    check_replicas(n)?;
    if !n.is_power_of_two() {
        return Err(UaError::Config(format!(
            "replica count must be a power of two, got {n}"
        )));
    }
    let key: BaseKey = (n, sigma.to_bits(), r_base.to_bits(), samples, seed);
    if let Some(hit) = base_cache().lock().unwrap().get(&key) {
        return Ok(*hit);
    }
    let config = UAConfig::new(1, n, vec![r_base])?;
    let target = CircuitSpec::new(
        1,
        vec![Gate::Phase {
            mode: 0,
            phi: 0.0,
            noisy: true,
        }],
    )?;
    let noise = NoiseModel::new(sigma)?;
    let e = run_ensemble(&config, &target, &noise, samples, seed)?;
    let point = BasePoint {
        fidelity: e.fidelity,
        fidelity_stderr: e.fidelity_stderr,
        probability: e.mean_exact_p,
        probability_stderr: e.exact_p_stderr,
        probability_approx: e.mean_approx_p,
    };
    base_cache().lock().unwrap().insert(key, point);
    Ok(point)
}

/// Extrapolation model F(N, n) = F₁^{2(N²−1)} and likewise for P.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawModel {
    pub base_fidelity: f64,
    pub base_probability: f64,
    pub noisy_params: usize,
}

impl PowerLawModel {
    pub fn new(base_fidelity: f64, base_probability: f64, noisy_params: usize) -> Result<Self> {
        for (name, x) in [
            ("base fidelity", base_fidelity),
            ("base probability", base_probability),
        ] {
            if !(x > 0.0 && x <= 1.0) {
                return Err(UaError::ModelRange(format!(
                    "{name} must lie in (0, 1], got {x}"
                )));
            }
        }
        Ok(Self {
            base_fidelity,
            base_probability,
            noisy_params,
        })
    }

    /// Noisy-parameter count for a full mesh on `modes` modes (N² − 1).
    /// The extrapolation is meaningful only from two modes up.
    pub fn params_for_modes(modes: usize) -> Result<usize> {
        if modes < 2 {
            return Err(UaError::ModelRange(format!(
                "power-law extrapolation needs at least 2 modes, got {modes}"
            )));
        }
        Ok(modes * modes - 1)
    }

    pub fn fidelity(&self) -> f64 {
        power_law_fidelity(self.base_fidelity, self.noisy_params)
            .expect("base validated at construction")
    }

    pub fn probability(&self) -> f64 {
        power_law_probability(self.base_probability, self.noisy_params)
            .expect("base validated at construction")
    }
}

/// F = F₁^{2k} for k noisy parameters.
pub fn power_law_fidelity(base: f64, k: usize) -> Result<f64> {
    if !(base > 0.0 && base <= 1.0) {
        return Err(UaError::ModelRange(format!(
            "base fidelity must lie in (0, 1], got {base}"
        )));
    }
    Ok(base.powi(2 * k as i32))
}

/// P = P₁^{2k} for k noisy parameters.
pub fn power_law_probability(base: f64, k: usize) -> Result<f64> {
    power_law_fidelity(base, k)
}

/// Enhancement ε = (1 − F_unprotected)/(1 − F_protected).
pub fn enhancement(f_unprotected: f64, f_protected: f64) -> Result<f64> {
    for (name, f) in [
        ("unprotected", f_unprotected),
        ("protected", f_protected),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(UaError::ModelRange(format!(
                "{name} fidelity must lie in [0, 1], got {f}"
            )));
        }
    }
    if f_protected >= 1.0 {
        return Err(UaError::ModelRange(
            "enhancement saturated: protected fidelity is exactly 1".into(),
        ));
    }
    Ok((1.0 - f_unprotected) / (1.0 - f_protected))
}
