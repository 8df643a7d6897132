//! End-to-end statistical behavior of the averaging pipeline: small-noise
//! scaling, agreement with the closed-form single-mode channel, and the
//! ordering of fidelity with replica count.

use approx::assert_abs_diff_eq;
use uasim::analytics::{
    enhancement, single_mode_output_covariance, single_mode_success_prob, SingleModeChannelModel,
};
use uasim::circuit::{CircuitSpec, Gate, NoiseModel};
use uasim::protocol::{run_ensemble, UAConfig};

fn noisy_phase_target(modes: usize) -> CircuitSpec {
    CircuitSpec::new(
        modes,
        vec![Gate::Phase {
            mode: 0,
            phi: 0.0,
            noisy: true,
        }],
    )
    .unwrap()
}

/// Unprotected single-mode infidelity follows sigma^2 sinh^2(2r) at small
/// noise.
#[test]
fn small_noise_infidelity_is_quadratic() {
    let r = 0.5;
    for sigma in [0.02_f64, 0.04] {
        let config = UAConfig::new(1, 1, vec![r]).unwrap();
        let noise = NoiseModel::new(sigma).unwrap();
        let e = run_ensemble(&config, &noisy_phase_target(1), &noise, 4000, 11).unwrap();
        let predicted = sigma * sigma * (2.0 * r).sinh().powi(2);
        let got = 1.0 - e.fidelity;
        assert!(
            (got - predicted).abs() < 0.1 * predicted,
            "sigma={sigma}: infidelity {got:.3e} vs quadratic law {predicted:.3e}"
        );
    }
}

/// The heralded mixture of the two-arm pipeline reproduces the closed-form
/// noise-averaged channel covariance: equal diagonal blocks at the effective
/// squeezing, cross block damped by the phase average, off-diagonal washed
/// out.
#[test]
fn averaged_channel_matches_closed_form_covariance() {
    let r = 0.3;
    let sigma = 0.05;
    let target = CircuitSpec::new(
        2,
        vec![
            Gate::BeamSplitter {
                a: 0,
                b: 1,
                theta: std::f64::consts::FRAC_PI_4,
                noisy: false,
            },
            Gate::Phase {
                mode: 0,
                phi: 0.0,
                noisy: true,
            },
        ],
    )
    .unwrap();
    for n in [1usize, 2, 4] {
        let config = UAConfig::new(2, n, vec![-r, r]).unwrap();
        let noise = NoiseModel::new(sigma).unwrap();
        let e = run_ensemble(&config, &target, &noise, 20_000, 5).unwrap();
        let model = SingleModeChannelModel::new(r, sigma * sigma, n).unwrap();
        let want = single_mode_output_covariance(&model);
        let a = e.mixture.matrix();
        let b = want.matrix();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(a[(i, j)], b[(i, j)], epsilon = 1.5e-3);
            }
        }
        assert_abs_diff_eq!(
            e.mean_exact_p,
            single_mode_success_prob(&model),
            epsilon = 1e-3
        );
    }
}

/// More replicas mean higher heralded fidelity, and the infidelity
/// enhancement stays strictly between 1 and the replica count.
#[test]
fn enhancement_stays_below_replica_count() {
    let sigma = 0.05;
    let mut fid = Vec::new();
    for n in [1usize, 2, 4] {
        let config = UAConfig::new(1, n, vec![0.4]).unwrap();
        let noise = NoiseModel::new(sigma).unwrap();
        let e = run_ensemble(&config, &noisy_phase_target(1), &noise, 6000, 23).unwrap();
        fid.push(e.fidelity);
    }
    assert!(fid[1] > fid[0] && fid[2] > fid[1]);
    for (i, n) in [2usize, 4].iter().enumerate() {
        let eps = enhancement(fid[0], fid[i + 1]).unwrap();
        assert!(
            eps > 1.0 && eps < *n as f64,
            "n = {n}: enhancement {eps:.3} outside (1, n)"
        );
    }
}

/// Success probability degrades smoothly with noise and never exceeds one.
#[test]
fn herald_probability_monotone_in_noise() {
    let mut probs = Vec::new();
    for sigma in [0.0_f64, 0.04, 0.08] {
        let config = UAConfig::new(1, 2, vec![0.5]).unwrap();
        let noise = NoiseModel::new(sigma).unwrap();
        let e = run_ensemble(&config, &noisy_phase_target(1), &noise, 4000, 31).unwrap();
        assert!(e.mean_exact_p <= 1.0 + 1e-12);
        probs.push(e.mean_exact_p);
    }
    assert_abs_diff_eq!(probs[0], 1.0, epsilon = 1e-12);
    assert!(probs[1] > probs[2], "P(0.04)={} P(0.08)={}", probs[1], probs[2]);
}
