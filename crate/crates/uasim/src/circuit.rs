//! Linear-optical circuits as ordered gate lists, plus Gaussian parameter
//! noise and compilation down to symplectic transforms.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UaError};
use crate::gaussian::SymplecticTransform;

/// One circuit element.  Phase and beamsplitter angles carry a `noisy` flag
/// marking them as subject to parameter noise; squeezers never do.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum Gate {
    Squeeze { mode: usize, r: f64 },
    Phase { mode: usize, phi: f64, noisy: bool },
    BeamSplitter { a: usize, b: usize, theta: f64, noisy: bool },
}

impl Gate {
    pub fn is_noisy(&self) -> bool {
        match self {
            Gate::Squeeze { .. } => false,
            Gate::Phase { noisy, .. } | Gate::BeamSplitter { noisy, .. } => *noisy,
        }
    }

    fn validate(&self, modes: usize) -> Result<()> {
        let check = |m: usize| -> Result<()> {
            if m >= modes {
                Err(UaError::ModeIndex { mode: m, modes })
            } else {
                Ok(())
            }
        };
        match *self {
            Gate::Squeeze { mode, .. } | Gate::Phase { mode, .. } => check(mode),
            Gate::BeamSplitter { a, b, .. } => {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(UaError::Circuit(format!(
                        "beamsplitter needs two distinct modes, got ({a}, {b})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// An ordered gate list on `modes` modes.  The first listed gate acts on the
/// state first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    modes: usize,
    gates: Vec<Gate>,
}

impl CircuitSpec {
    pub fn new(modes: usize, gates: Vec<Gate>) -> Result<Self> {
        if modes == 0 {
            return Err(UaError::Circuit("circuit needs at least one mode".into()));
        }
        for g in &gates {
            g.validate(modes)?;
        }
        Ok(Self { modes, gates })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn noisy_param_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_noisy()).count()
    }

    /// Copy of the circuit keeping only the first `limit` noisy flags (in
    /// gate order); later noisy gates become fixed.  Used to build
    /// reduced-parameter sub-circuits from a full mesh.
    pub fn with_noisy_limit(&self, limit: usize) -> Self {
        let mut left = limit;
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let mut g = *g;
                if g.is_noisy() {
                    if left > 0 {
                        left -= 1;
                    } else {
                        match &mut g {
                            Gate::Phase { noisy, .. } | Gate::BeamSplitter { noisy, .. } => {
                                *noisy = false
                            }
                            Gate::Squeeze { .. } => {}
                        }
                    }
                }
                g
            })
            .collect();
        Self {
            modes: self.modes,
            gates,
        }
    }
}

/// The noisy-flag count; the power-law exponent input k.
pub fn count_noisy_params(circuit: &CircuitSpec) -> usize {
    circuit.noisy_param_count()
}

/// Zero-mean Gaussian perturbation applied to every noisy-flagged angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(UaError::Config(format!(
                "noise standard deviation must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Rectangular mesh of phase shifters and nearest-neighbor beamsplitters
/// realizing an arbitrary passive unitary on `modes` modes.
///
/// Columns run left to right; column `c` holds beamsplitters on pairs
/// (i, i+1) with i ≡ c (mod 2), each preceded by a phase shifter on mode i.
/// A final layer of output phase shifters follows.  The output phase on the
/// last mode is pinned to zero and not noisy (dropping the unobservable
/// global phase), so `output_phases.last()` is ignored and the noisy
/// parameter count is modes² − 1.
pub fn clements_mesh(
    modes: usize,
    thetas: &[f64],
    phis: &[f64],
    output_phases: &[f64],
) -> Result<CircuitSpec> {
    if modes == 0 {
        return Err(UaError::Circuit("mesh needs at least one mode".into()));
    }
    let pairs = modes * (modes - 1) / 2;
    if thetas.len() != pairs || phis.len() != pairs {
        return Err(UaError::Config(format!(
            "mesh on {} modes needs {} beamsplitter and {} phase parameters, got {} and {}",
            modes,
            pairs,
            pairs,
            thetas.len(),
            phis.len()
        )));
    }
    if output_phases.len() != modes {
        return Err(UaError::Config(format!(
            "mesh on {} modes needs {} output phases, got {}",
            modes,
            modes,
            output_phases.len()
        )));
    }

    let mut gates = Vec::new();
    let mut next = 0;
    for col in 0..modes {
        let mut i = col % 2;
        while i + 1 < modes {
            gates.push(Gate::Phase {
                mode: i,
                phi: phis[next],
                noisy: true,
            });
            gates.push(Gate::BeamSplitter {
                a: i,
                b: i + 1,
                theta: thetas[next],
                noisy: true,
            });
            next += 1;
            i += 2;
        }
    }
    debug_assert_eq!(next, pairs);
    for (m, &phi) in output_phases.iter().enumerate().take(modes - 1) {
        gates.push(Gate::Phase {
            mode: m,
            phi,
            noisy: true,
        });
    }
    gates.push(Gate::Phase {
        mode: modes - 1,
        phi: 0.0,
        noisy: false,
    });
    CircuitSpec::new(modes, gates)
}

/// Reproducible target parameters for `clements_mesh`: beamsplitter angles
/// uniform on [0, π/2), phases uniform on [0, 2π).  Returns
/// (thetas, phis, output_phases).
pub fn random_mesh_parameters<R: Rng>(modes: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pairs = modes * (modes.saturating_sub(1)) / 2;
    let tau = 2.0 * std::f64::consts::PI;
    let thetas = (0..pairs)
        .map(|_| rng.gen::<f64>() * std::f64::consts::FRAC_PI_2)
        .collect();
    let phis = (0..pairs).map(|_| rng.gen::<f64>() * tau).collect();
    let output_phases = (0..modes).map(|_| rng.gen::<f64>() * tau).collect();
    (thetas, phis, output_phases)
}

/// Perturbs every noisy-flagged angle by an independent Gaussian(0, σ²) draw,
/// consuming draws in gate order, and records the draws for replay.
pub fn sample_noisy_instance_with_draws<R: Rng>(
    circuit: &CircuitSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> (CircuitSpec, Vec<f64>) {
    let normal = Normal::new(0.0, noise.sigma()).expect("sigma validated at construction");
    let mut draws = Vec::with_capacity(circuit.noisy_param_count());
    let gates = circuit
        .gates
        .iter()
        .map(|g| match *g {
            Gate::Phase {
                mode,
                phi,
                noisy: true,
            } => {
                let d = normal.sample(rng);
                draws.push(d);
                Gate::Phase {
                    mode,
                    phi: phi + d,
                    noisy: true,
                }
            }
            Gate::BeamSplitter {
                a,
                b,
                theta,
                noisy: true,
            } => {
                let d = normal.sample(rng);
                draws.push(d);
                Gate::BeamSplitter {
                    a,
                    b,
                    theta: theta + d,
                    noisy: true,
                }
            }
            other => other,
        })
        .collect();
    (
        CircuitSpec {
            modes: circuit.modes,
            gates,
        },
        draws,
    )
}

/// As `sample_noisy_instance_with_draws`, discarding the draw record.
pub fn sample_noisy_instance<R: Rng>(
    circuit: &CircuitSpec,
    noise: &NoiseModel,
    rng: &mut R,
) -> CircuitSpec {
    sample_noisy_instance_with_draws(circuit, noise, rng).0
}

/// Re-applies a recorded draw list to the noisy angles of `circuit`.
pub fn apply_noise_record(circuit: &CircuitSpec, draws: &[f64]) -> Result<CircuitSpec> {
    let expected = circuit.noisy_param_count();
    if draws.len() != expected {
        return Err(UaError::NoiseRecordLength {
            got: draws.len(),
            expected,
        });
    }
    let mut it = draws.iter();
    let gates = circuit
        .gates
        .iter()
        .map(|g| match *g {
            Gate::Phase {
                mode,
                phi,
                noisy: true,
            } => Gate::Phase {
                mode,
                phi: phi + it.next().expect("length checked"),
                noisy: true,
            },
            Gate::BeamSplitter {
                a,
                b,
                theta,
                noisy: true,
            } => Gate::BeamSplitter {
                a,
                b,
                theta: theta + it.next().expect("length checked"),
                noisy: true,
            },
            other => other,
        })
        .collect();
    Ok(CircuitSpec {
        modes: circuit.modes,
        gates,
    })
}

/// Compiles `circuit` to a symplectic transform on `total_modes` modes with
/// the circuit's modes embedded at [offset, offset + N); identity elsewhere.
/// The first listed gate is applied to the state first.
pub fn compile_to_symplectic(
    circuit: &CircuitSpec,
    total_modes: usize,
    offset: usize,
) -> Result<SymplecticTransform> {
    if offset + circuit.modes > total_modes {
        return Err(UaError::Dimension(format!(
            "embedding {} modes at offset {} exceeds {} total modes",
            circuit.modes, offset, total_modes
        )));
    }
    let mut s = SymplecticTransform::identity(total_modes);
    for g in &circuit.gates {
        let t = match *g {
            Gate::Squeeze { mode, r } => {
                SymplecticTransform::squeeze(total_modes, offset + mode, r)?
            }
            Gate::Phase { mode, phi, .. } => {
                SymplecticTransform::phase(total_modes, offset + mode, phi)?
            }
            Gate::BeamSplitter { a, b, theta, .. } => {
                SymplecticTransform::beamsplitter(total_modes, offset + a, offset + b, theta)?
            }
        };
        s = s.then(&t)?;
    }
    Ok(s)
}
