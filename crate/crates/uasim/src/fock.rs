//! Brute-force truncated Fock-space simulator.  Amplitude tensors are dense,
//! gates act by exponentiating truncated generators, and truncation loss is
//! tracked explicitly.  Serves as the independent cross-check for the
//! covariance pipeline on small systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::{CircuitSpec, Gate};
use crate::error::{Result, UaError};
use crate::gaussian::CovarianceMatrix;
use crate::protocol::UAConfig;

/// Hard cap on amplitude-tensor size (bytes).
pub const TENSOR_BYTE_LIMIT: usize = 1 << 30;
/// Truncation leakage tolerated when state content approaches the cutoff.
pub const LEAKAGE_BUDGET: f64 = 1e-6;
/// Herald probabilities below this signal a misconfigured projection.
pub const MIN_HERALD_WEIGHT: f64 = 1e-15;

/// Norm bookkeeping around one operation.
#[derive(Debug, Clone, Copy)]
pub struct TruncationReport {
    pub pre_norm: f64,
    pub post_norm: f64,
    /// Upper bound on the squared amplitude lost to truncation.
    pub leakage: f64,
}

/// Dense state vector on `modes` modes, each truncated at `cutoff` photons.
/// Amplitudes are stored row-major with the last mode varying fastest.
#[derive(Debug, Clone)]
pub struct FockStateTensor {
    modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl FockStateTensor {
    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self> {
        if modes == 0 {
            return Err(UaError::Dimension("need at least one mode".into()));
        }
        let dim = cutoff + 1;
        let mut len: usize = 1;
        for _ in 0..modes {
            len = len.checked_mul(dim).ok_or(UaError::FockTensorTooLarge {
                bytes: usize::MAX,
                limit: TENSOR_BYTE_LIMIT,
            })?;
        }
        let bytes = len * std::mem::size_of::<Complex64>();
        if bytes > TENSOR_BYTE_LIMIT {
            return Err(UaError::FockTensorTooLarge {
                bytes,
                limit: TENSOR_BYTE_LIMIT,
            });
        }
        let mut amps = vec![Complex64::ZERO; len];
        amps[0] = Complex64::ONE;
        Ok(Self {
            modes,
            cutoff,
            amps,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude of the basis state with occupation `ks` (one per mode).
    pub fn amplitude(&self, ks: &[usize]) -> Result<Complex64> {
        if ks.len() != self.modes {
            return Err(UaError::Dimension(format!(
                "{} occupation numbers for {} modes",
                ks.len(),
                self.modes
            )));
        }
        let mut idx = 0;
        for &k in ks {
            if k > self.cutoff {
                return Err(UaError::Dimension(format!(
                    "occupation {k} above cutoff {}",
                    self.cutoff
                )));
            }
            idx = idx * (self.cutoff + 1) + k;
        }
        Ok(self.amps[idx])
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn stride(&self, mode: usize) -> usize {
        (self.cutoff + 1).pow((self.modes - 1 - mode) as u32)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(UaError::ModeIndex {
                mode,
                modes: self.modes,
            });
        }
        Ok(())
    }

    /// Applies a dense (cutoff+1)×(cutoff+1) single-mode operator.
    fn apply_single_mode(&mut self, mode: usize, op: &DMatrix<Complex64>) {
        let dim = self.cutoff + 1;
        let stride = self.stride(mode);
        let block = stride * dim;
        let mut vec_in = vec![Complex64::ZERO; dim];
        for major in (0..self.amps.len()).step_by(block) {
            for minor in 0..stride {
                let base = major + minor;
                for (k, v) in vec_in.iter_mut().enumerate() {
                    *v = self.amps[base + k * stride];
                }
                for k in 0..dim {
                    let mut acc = Complex64::ZERO;
                    for (l, v) in vec_in.iter().enumerate() {
                        acc += op[(k, l)] * v;
                    }
                    self.amps[base + k * stride] = acc;
                }
            }
        }
    }
}

/// exp of the real matrix `g` (scaling and squaring with a Taylor core;
/// the generators here are small and well scaled).
fn real_expm(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let norm = g.iter().fold(0.0_f64, |a, x| a.max(x.abs())) * n as f64;
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = g / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.iter().fold(0.0_f64, |a, x| a.max(x.abs())) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Fraction of a squeezed vacuum with parameter `r` lying above `cutoff`
/// photons: 1 − Σ_{2k ≤ cutoff} tanh^{2k}r (2k)!/(4^k k!²) / cosh r.
pub fn squeezed_vacuum_tail(r: f64, cutoff: usize) -> f64 {
    let t2 = r.tanh().powi(2);
    let mut kept = 0.0;
    let mut coeff = 1.0; // (2k)! / (4^k k!^2) at k = 0
    let mut k = 0;
    loop {
        if 2 * k > cutoff {
            break;
        }
        kept += coeff;
        k += 1;
        // ratio (2k)!/(4^k k!^2) ÷ previous = (2k-1)/(2k) · t² applied below
        coeff *= t2 * (2 * k - 1) as f64 / (2 * k) as f64;
    }
    (1.0 - kept / r.cosh()).max(0.0)
}

/// Single-mode squeezer exp((r/2)(â² − â†²)) on `mode`.
///
/// The truncated generator is skew-symmetric, so the operator is orthogonal
/// on the truncated space (norm-preserving); accuracy is guarded by the
/// closed-form squeezed-vacuum tail at this cutoff.
pub fn fock_squeeze(
    state: &FockStateTensor,
    mode: usize,
    r: f64,
) -> Result<(FockStateTensor, TruncationReport)> {
    state.check_mode(mode)?;
    let tail = squeezed_vacuum_tail(r, state.cutoff);
    if tail > LEAKAGE_BUDGET {
        return Err(UaError::TruncationLeakage {
            leakage: tail,
            budget: LEAKAGE_BUDGET,
            cutoff: state.cutoff,
        });
    }
    let dim = state.cutoff + 1;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim.saturating_sub(2) {
        // ⟨k|â²|k+2⟩ = √((k+1)(k+2))
        let c = 0.5 * r * (((k + 1) * (k + 2)) as f64).sqrt();
        g[(k, k + 2)] = c;
        g[(k + 2, k)] = -c;
    }
    let u = real_expm(&g).map(|x| Complex64::new(x, 0.0));
    let pre = state.norm_squared();
    let mut out = state.clone();
    out.apply_single_mode(mode, &u);
    let post = out.norm_squared();
    Ok((
        out,
        TruncationReport {
            pre_norm: pre.sqrt(),
            post_norm: post.sqrt(),
            leakage: tail,
        },
    ))
}

/// Phase rotation: the amplitude of k photons in `mode` gains e^{−iφk}.
pub fn fock_phase(state: &FockStateTensor, mode: usize, phi: f64) -> Result<FockStateTensor> {
    state.check_mode(mode)?;
    let stride = state.stride(mode);
    let dim = state.cutoff + 1;
    let block = stride * dim;
    let phases: Vec<Complex64> = (0..dim)
        .map(|k| Complex64::from_polar(1.0, -phi * k as f64))
        .collect();
    let mut out = state.clone();
    for major in (0..out.amps.len()).step_by(block) {
        for (k, ph) in phases.iter().enumerate() {
            let lo = major + k * stride;
            for a in &mut out.amps[lo..lo + stride] {
                *a *= ph;
            }
        }
    }
    Ok(out)
}

/// Beamsplitter exp(θ(âᵢ†âⱼ − âᵢâⱼ†)) between modes `i` and `j`.
///
/// The generator conserves total photon number, so it block-diagonalizes by
/// kᵢ + kⱼ; each block generator is skew-symmetric and is exponentiated on
/// whatever slice of the block survives the cutoff, keeping every block
/// exactly orthogonal.
pub fn fock_beamsplitter(
    state: &FockStateTensor,
    i: usize,
    j: usize,
    theta: f64,
) -> Result<FockStateTensor> {
    state.check_mode(i)?;
    state.check_mode(j)?;
    if i == j {
        return Err(UaError::Circuit(format!(
            "beamsplitter needs two distinct modes, got ({i}, {j})"
        )));
    }
    let c = state.cutoff;
    // per-total-photon blocks: indexed by ki within [max(0, t−c), min(c, t)]
    let blocks: Vec<(usize, DMatrix<f64>)> = (0..=2 * c)
        .map(|t| {
            let lo = t.saturating_sub(c);
            let hi = t.min(c);
            let d = hi - lo + 1;
            let mut g = DMatrix::<f64>::zeros(d, d);
            for a in 0..d.saturating_sub(1) {
                let ki = lo + a; // coupling (ki, kj=t−ki) ↔ (ki+1, kj−1)
                let kj = t - ki;
                let amp = theta * (((ki + 1) * kj) as f64).sqrt();
                g[(a + 1, a)] = amp;
                g[(a, a + 1)] = -amp;
            }
            (lo, real_expm(&g))
        })
        .collect();

    let si = state.stride(i);
    let sj = state.stride(j);
    let dim = c + 1;
    let mut out = state.clone();
    let mut scratch = vec![Complex64::ZERO; dim];
    // enumerate flat indices with ki = kj = 0
    let len = out.amps.len();
    for base in 0..len {
        if (base / si) % dim != 0 || (base / sj) % dim != 0 {
            continue;
        }
        for (t, (lo, u)) in blocks.iter().enumerate() {
            let d = u.nrows();
            for (a, s) in scratch.iter_mut().take(d).enumerate() {
                let ki = lo + a;
                *s = out.amps[base + ki * si + (t - ki) * sj];
            }
            for a in 0..d {
                let mut acc = Complex64::ZERO;
                for b in 0..d {
                    acc += u[(a, b)] * scratch[b];
                }
                let ki = lo + a;
                out.amps[base + ki * si + (t - ki) * sj] = acc;
            }
        }
    }
    Ok(out)
}

/// Applies one gate in the Fock picture, embedded at `offset`.
pub fn fock_apply_gate(
    state: &FockStateTensor,
    gate: &Gate,
    offset: usize,
) -> Result<FockStateTensor> {
    match *gate {
        Gate::Squeeze { mode, r } => Ok(fock_squeeze(state, offset + mode, r)?.0),
        Gate::Phase { mode, phi, .. } => fock_phase(state, offset + mode, phi),
        Gate::BeamSplitter { a, b, theta, .. } => {
            fock_beamsplitter(state, offset + a, offset + b, theta)
        }
    }
}

/// Applies a whole circuit (first gate first) embedded at `offset`.
pub fn fock_apply_circuit(
    state: &FockStateTensor,
    circuit: &CircuitSpec,
    offset: usize,
) -> Result<FockStateTensor> {
    if offset + circuit.modes() > state.modes {
        return Err(UaError::Dimension(format!(
            "embedding {} modes at offset {} exceeds {} total modes",
            circuit.modes(),
            offset,
            state.modes
        )));
    }
    let mut s = state.clone();
    for g in circuit.gates() {
        s = fock_apply_gate(&s, g, offset)?;
    }
    Ok(s)
}

/// Projects `ancilla` modes onto vacuum.  Returns the renormalized state on
/// the kept modes (original order) and the herald probability.
pub fn project_vacuum(
    state: &FockStateTensor,
    ancilla: &[usize],
) -> Result<(FockStateTensor, f64)> {
    let mut is_anc = vec![false; state.modes];
    for &m in ancilla {
        if m >= state.modes {
            return Err(UaError::ModeIndex {
                mode: m,
                modes: state.modes,
            });
        }
        if is_anc[m] {
            return Err(UaError::Config(format!("duplicate ancilla mode {m}")));
        }
        is_anc[m] = true;
    }
    let kept: Vec<usize> = (0..state.modes).filter(|m| !is_anc[*m]).collect();
    if kept.is_empty() {
        return Err(UaError::Config(
            "projecting every mode leaves no output state".into(),
        ));
    }
    let total = state.norm_squared();
    let mut out = FockStateTensor::vacuum(kept.len(), state.cutoff)?;
    out.amps[0] = Complex64::ZERO;
    let dim = state.cutoff + 1;
    let kept_strides: Vec<usize> = kept.iter().map(|&m| state.stride(m)).collect();
    let anc_strides: Vec<usize> = ancilla.iter().map(|&m| state.stride(m)).collect();
    let mut weight = 0.0;
    for (idx, amp) in state.amps.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        if anc_strides.iter().any(|&s| (idx / s) % dim != 0) {
            continue;
        }
        let mut oidx = 0;
        for &s in &kept_strides {
            oidx = oidx * dim + (idx / s) % dim;
        }
        out.amps[oidx] = *amp;
        weight += amp.norm_sqr();
    }
    let p = weight / total;
    if p < MIN_HERALD_WEIGHT {
        return Err(UaError::VacuumWeightTooSmall {
            weight: p,
            min: MIN_HERALD_WEIGHT,
        });
    }
    let scale = Complex64::new(1.0 / weight.sqrt(), 0.0);
    for a in &mut out.amps {
        *a *= scale;
    }
    Ok((out, p))
}

/// |⟨ψ0|ψ1⟩|², with both states normalized internally.
pub fn state_fidelity(a: &FockStateTensor, b: &FockStateTensor) -> Result<f64> {
    if a.modes != b.modes || a.cutoff != b.cutoff {
        return Err(UaError::Dimension(format!(
            "state shapes differ: {} modes cutoff {} vs {} modes cutoff {}",
            a.modes, a.cutoff, b.modes, b.cutoff
        )));
    }
    let mut ip = Complex64::ZERO;
    for (x, y) in a.amps.iter().zip(&b.amps) {
        ip += x.conj() * y;
    }
    Ok(ip.norm_sqr() / (a.norm_squared() * b.norm_squared()))
}

/// Quadrature covariance of a Fock state from its second moments
/// ⟨âᵢ†âⱼ⟩ and ⟨âᵢâⱼ⟩ (both exact within the truncation since they only
/// lower photon numbers).
pub fn covariance_from_fock(state: &FockStateTensor) -> Result<CovarianceMatrix> {
    let m = state.modes;
    let norm = state.norm_squared();
    if norm <= 0.0 {
        return Err(UaError::Numerical("zero-norm state has no moments".into()));
    }
    let lowered: Vec<FockStateTensor> = (0..m).map(|i| lower(state, i)).collect();
    let mut nmat = DMatrix::<Complex64>::zeros(m, m); // ⟨âᵢ†âⱼ⟩
    let mut mmat = DMatrix::<Complex64>::zeros(m, m); // ⟨âᵢâⱼ⟩
    for i in 0..m {
        for j in 0..m {
            let mut nij = Complex64::ZERO;
            for (x, y) in lowered[i].amps.iter().zip(&lowered[j].amps) {
                nij += x.conj() * y;
            }
            nmat[(i, j)] = nij / norm;
            let aj_ai = lower(&lowered[j], i); // âᵢâⱼ|ψ⟩ (i≠j commute; i=j fine)
            let mut mij = Complex64::ZERO;
            for (x, y) in state.amps.iter().zip(&aj_ai.amps) {
                mij += x.conj() * y;
            }
            mmat[(i, j)] = mij / norm;
        }
    }
    let mut v = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let d = if i == j { 1.0 } else { 0.0 };
            v[(2 * i, 2 * j)] = 2.0 * (mmat[(i, j)].re + nmat[(i, j)].re) + d;
            v[(2 * i + 1, 2 * j + 1)] = 2.0 * (nmat[(i, j)].re - mmat[(i, j)].re) + d;
            v[(2 * i, 2 * j + 1)] = 2.0 * (mmat[(i, j)].im + nmat[(i, j)].im);
            v[(2 * i + 1, 2 * j)] = 2.0 * (mmat[(j, i)].im + nmat[(j, i)].im);
        }
    }
    Ok(CovarianceMatrix::from_matrix_unchecked(v))
}

/// âᵢ|ψ⟩ (unnormalized).
fn lower(state: &FockStateTensor, mode: usize) -> FockStateTensor {
    let mut out = state.clone();
    for a in &mut out.amps {
        *a = Complex64::ZERO;
    }
    let stride = state.stride(mode);
    let dim = state.cutoff + 1;
    for (idx, amp) in state.amps.iter().enumerate() {
        let k = (idx / stride) % dim;
        if k > 0 {
            out.amps[idx - stride] += (k as f64).sqrt() * amp;
        }
    }
    out
}

/// Closed-form output state of two equally squeezed modes sent through a
/// passive 2-mode circuit: with M the mode transformation
/// (U âⱼ† U† = Σₖ M_{kj} âₖ†) and W = M Mᵀ, the state is
/// sech r · exp(−(tanh r / 2) Σ W_{kl} âₖ†âₗ†) |00⟩.
pub fn bogoliubov_output_state(
    r: f64,
    circuit: &CircuitSpec,
    cutoff: usize,
) -> Result<FockStateTensor> {
    if circuit.modes() != 2 {
        return Err(UaError::Dimension(format!(
            "closed form covers 2 modes, circuit has {}",
            circuit.modes()
        )));
    }
    let tail = squeezed_vacuum_tail(r, cutoff);
    if tail > LEAKAGE_BUDGET {
        return Err(UaError::TruncationLeakage {
            leakage: tail,
            budget: LEAKAGE_BUDGET,
            cutoff,
        });
    }
    // accumulate the complex 2×2 creation-operator map, later gates on the left
    let mut mmap = [
        [Complex64::ONE, Complex64::ZERO],
        [Complex64::ZERO, Complex64::ONE],
    ];
    for g in circuit.gates() {
        let step = match *g {
            Gate::Squeeze { .. } => {
                return Err(UaError::Circuit(
                    "closed form needs a passive circuit; found a squeezer".into(),
                ))
            }
            Gate::Phase { mode, phi, .. } => {
                let e = Complex64::from_polar(1.0, -phi);
                if mode == 0 {
                    [
                        [e, Complex64::ZERO],
                        [Complex64::ZERO, Complex64::ONE],
                    ]
                } else {
                    [
                        [Complex64::ONE, Complex64::ZERO],
                        [Complex64::ZERO, e],
                    ]
                }
            }
            Gate::BeamSplitter { a, theta, .. } => {
                let (s, c) = theta.sin_cos();
                let (c, s) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0));
                if a == 0 {
                    [[c, s], [-s, c]]
                } else {
                    [[c, -s], [s, c]]
                }
            }
        };
        let mut next = [[Complex64::ZERO; 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    next[k][j] += step[k][l] * mmap[l][j];
                }
            }
        }
        mmap = next;
    }
    let mut w = [[Complex64::ZERO; 2]; 2];
    for k in 0..2 {
        for l in 0..2 {
            for j in 0..2 {
                w[k][l] += mmap[k][j] * mmap[l][j];
            }
        }
    }

    // expand exp(−(t/2) Σ W_{kl} âₖ†âₗ†)|00⟩ term by term
    let t = r.tanh();
    let mut state = FockStateTensor::vacuum(2, cutoff)?;
    let mut term = state.clone();
    let mut k = 0usize;
    loop {
        k += 1;
        if k > cutoff {
            break;
        }
        term = apply_quadratic_raiser(&term, &w);
        let coeff = Complex64::new(-t / 2.0, 0.0) / k as f64;
        for a in &mut term.amps {
            *a *= coeff;
        }
        for (s, x) in state.amps.iter_mut().zip(&term.amps) {
            *s += x;
        }
    }
    let sech = 1.0 / r.cosh();
    for a in &mut state.amps {
        *a *= sech;
    }
    Ok(state)
}

/// Σ_{kl} W_{kl} âₖ†âₗ† applied to a 2-mode state (overflow truncated).
fn apply_quadratic_raiser(
    state: &FockStateTensor,
    w: &[[Complex64; 2]; 2],
) -> FockStateTensor {
    let c = state.cutoff;
    let dim = c + 1;
    let mut out = state.clone();
    for a in &mut out.amps {
        *a = Complex64::ZERO;
    }
    for (idx, amp) in state.amps.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let k0 = idx / dim;
        let k1 = idx % dim;
        // â₀†â₀†, â₀†â₁† (+ symmetric), â₁†â₁†
        if k0 + 2 <= c {
            let f = (((k0 + 1) * (k0 + 2)) as f64).sqrt();
            out.amps[(k0 + 2) * dim + k1] += w[0][0] * f * amp;
        }
        if k0 + 1 <= c && k1 + 1 <= c {
            let f = (((k0 + 1) * (k1 + 1)) as f64).sqrt();
            out.amps[(k0 + 1) * dim + (k1 + 1)] += (w[0][1] + w[1][0]) * f * amp;
        }
        if k1 + 2 <= c {
            let f = (((k1 + 1) * (k1 + 2)) as f64).sqrt();
            out.amps[k0 * dim + (k1 + 2)] += w[1][1] * f * amp;
        }
    }
    out
}

/// Covariance of the closed-form two-mode output state.
pub fn bogoliubov_output_moments(
    r: f64,
    circuit: &CircuitSpec,
    cutoff: usize,
) -> Result<CovarianceMatrix> {
    covariance_from_fock(&bogoliubov_output_state(r, circuit, cutoff)?)
}

/// Result of replaying one recorded noise draw in Fock space.
#[derive(Debug, Clone)]
pub struct OracleRun {
    /// Heralded state on the N signal modes.
    pub conditioned: FockStateTensor,
    /// Quadrature covariance of the heralded state.
    pub conditioned_covariance: CovarianceMatrix,
    pub herald_probability: f64,
    /// Overlap-squared with the noiseless reference output.
    pub fidelity_vs_ideal: f64,
    /// Norm lost to truncation before the projection.
    pub leakage: f64,
}

/// Replays a recorded noise draw (replica-major, as produced by the
/// covariance pipeline) through the full Fock-space pipeline.
pub fn oracle_run(
    config: &UAConfig,
    target: &CircuitSpec,
    draws: &[f64],
    cutoff: usize,
) -> Result<OracleRun> {
    if target.modes() != config.modes() {
        return Err(UaError::Dimension(format!(
            "target acts on {} modes but config has {} signal modes",
            target.modes(),
            config.modes()
        )));
    }
    let k = target.noisy_param_count();
    let expected = config.replicas() * k;
    if draws.len() != expected {
        return Err(UaError::NoiseRecordLength {
            got: draws.len(),
            expected,
        });
    }
    let n_modes = config.modes();
    let replicas = config.replicas();
    let total = config.total_modes();

    let mut psi = FockStateTensor::vacuum(total, cutoff)?;
    for (m, &r) in config.squeezing().iter().enumerate() {
        if r != 0.0 {
            psi = fock_squeeze(&psi, m, r)?.0;
        }
    }
    for &(m, phi) in config.prep_phases() {
        psi = fock_phase(&psi, m, phi)?;
    }
    // encode: balanced tree, stride doubling, θ = π/4
    let mut layers = Vec::new();
    let mut stride = 1;
    while stride < replicas {
        let mut base = 0;
        while base < replicas {
            for i in 0..n_modes {
                layers.push((base * n_modes + i, (base + stride) * n_modes + i));
            }
            base += 2 * stride;
        }
        stride *= 2;
    }
    for &(a, b) in &layers {
        psi = fock_beamsplitter(&psi, a, b, std::f64::consts::FRAC_PI_4)?;
    }
    for rep in 0..replicas {
        let chunk = if k == 0 {
            &[][..]
        } else {
            &draws[rep * k..(rep + 1) * k]
        };
        let inst = crate::circuit::apply_noise_record(target, chunk)?;
        psi = fock_apply_circuit(&psi, &inst, rep * n_modes)?;
    }
    // decode: inverse tree (reverse order, θ → −θ)
    for &(a, b) in layers.iter().rev() {
        psi = fock_beamsplitter(&psi, a, b, -std::f64::consts::FRAC_PI_4)?;
    }

    let leakage = (1.0 - psi.norm_squared()).max(0.0);
    let (conditioned, p) = if replicas == 1 {
        (psi, 1.0)
    } else {
        project_vacuum(&psi, &config.ancilla_modes())?
    };

    // noiseless reference on the signal modes
    let mut ideal = FockStateTensor::vacuum(n_modes, cutoff)?;
    for (m, &r) in config.squeezing().iter().enumerate() {
        if r != 0.0 {
            ideal = fock_squeeze(&ideal, m, r)?.0;
        }
    }
    for &(m, phi) in config.prep_phases() {
        ideal = fock_phase(&ideal, m, phi)?;
    }
    ideal = fock_apply_circuit(&ideal, target, 0)?;

    let fidelity_vs_ideal = state_fidelity(&ideal, &conditioned)?;
    let conditioned_covariance = covariance_from_fock(&conditioned)?;
    Ok(OracleRun {
        conditioned,
        conditioned_covariance,
        herald_probability: p,
        fidelity_vs_ideal,
        leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_tensor_shape_and_norm() {
        let v = FockStateTensor::vacuum(2, 3).unwrap();
        assert_eq!(v.amplitudes().len(), 16);
        assert_abs_diff_eq!(v.norm_squared(), 1.0);
        assert_eq!(v.amplitude(&[0, 0]).unwrap(), Complex64::ONE);
    }

    #[test]
    fn tensor_size_guard_trips() {
        assert!(matches!(
            FockStateTensor::vacuum(12, 14),
            Err(UaError::FockTensorTooLarge { .. })
        ));
    }

    #[test]
    fn squeeze_matches_closed_form_amplitudes() {
        let v = FockStateTensor::vacuum(1, 20).unwrap();
        let (s, rep) = fock_squeeze(&v, 0, 0.5).unwrap();
        assert!(rep.leakage < 1e-6);
        // ⟨2k|S(r)|0⟩ = (−tanh r)^k √((2k)!) / (2^k k! √cosh r)
        let t: f64 = 0.5_f64.tanh();
        let c0 = 1.0 / 0.5_f64.cosh().sqrt();
        assert_abs_diff_eq!(s.amplitude(&[0]).unwrap().re, c0, epsilon = 1e-9);
        assert_abs_diff_eq!(c0, 0.94171, epsilon = 5e-6);
        let a2 = -t * (2.0_f64).sqrt() / 2.0 * c0;
        assert_abs_diff_eq!(s.amplitude(&[2]).unwrap().re, a2, epsilon = 1e-9);
        let a4 = t * t * (24.0_f64).sqrt() / 8.0 * c0;
        assert_abs_diff_eq!(s.amplitude(&[4]).unwrap().re, a4, epsilon = 1e-9);
        for k in [1, 3, 5, 7] {
            assert!(s.amplitude(&[k]).unwrap().norm() < 1e-12);
        }
        assert_abs_diff_eq!(s.norm_squared(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeeze_leakage_guard_trips() {
        let v = FockStateTensor::vacuum(1, 6).unwrap();
        assert!(matches!(
            fock_squeeze(&v, 0, 1.2),
            Err(UaError::TruncationLeakage { .. })
        ));
    }

    #[test]
    fn squeeze_zero_is_identity() {
        let v = FockStateTensor::vacuum(2, 5).unwrap();
        let (s, _) = fock_squeeze(&v, 1, 0.0).unwrap();
        for (a, b) in v.amplitudes().iter().zip(s.amplitudes()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn phase_rotates_single_photon() {
        let v = FockStateTensor::vacuum(1, 4).unwrap();
        let mut one = v.clone();
        one.amps[0] = Complex64::ZERO;
        one.amps[1] = Complex64::ONE;
        let rot = fock_phase(&one, 0, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(rot.amplitude(&[1]).unwrap().re, -1.0, epsilon = 1e-12);
        let quarter = fock_phase(&one, 0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(quarter.amplitude(&[1]).unwrap().im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rot.norm_squared(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn beamsplitter_balanced_on_single_photon() {
        let v = FockStateTensor::vacuum(2, 3).unwrap();
        let mut one = v.clone();
        one.amps[0] = Complex64::ZERO;
        let idx10 = 1 * 4 + 0;
        one.amps[idx10] = Complex64::ONE; // |1,0⟩
        let out = fock_beamsplitter(&one, 0, 1, std::f64::consts::FRAC_PI_4).unwrap();
        let a10 = out.amplitude(&[1, 0]).unwrap();
        let a01 = out.amplitude(&[0, 1]).unwrap();
        assert_abs_diff_eq!(a10.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(a01.norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.norm_squared(), 1.0, epsilon = 1e-14);
    }

    /// Beamsplitter sign convention must match the symplectic one: compare
    /// first-moment rotation via the covariance of a squeezed state.
    #[test]
    fn beamsplitter_sign_matches_symplectic_convention() {
        use crate::gaussian::{CovarianceMatrix, SymplecticTransform};
        let v = FockStateTensor::vacuum(2, 16).unwrap();
        let (sq, _) = fock_squeeze(&v, 0, 0.3).unwrap();
        let theta = 0.6;
        let mixed = fock_beamsplitter(&sq, 0, 1, theta).unwrap();
        let got = covariance_from_fock(&mixed).unwrap();

        let want = CovarianceMatrix::vacuum(2)
            .apply_transform(&SymplecticTransform::squeeze(2, 0, 0.3).unwrap())
            .unwrap()
            .apply_transform(&SymplecticTransform::beamsplitter(2, 0, 1, theta).unwrap())
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    got.matrix()[(i, j)],
                    want.matrix()[(i, j)],
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn beamsplitter_conserves_photon_number() {
        let v = FockStateTensor::vacuum(2, 16).unwrap();
        let (sq, _) = fock_squeeze(&v, 0, 0.4).unwrap();
        let before: f64 = covariance_from_fock(&sq)
            .unwrap()
            .mean_photon_numbers()
            .iter()
            .sum();
        let after: f64 = covariance_from_fock(&fock_beamsplitter(&sq, 0, 1, 0.9).unwrap())
            .unwrap()
            .mean_photon_numbers()
            .iter()
            .sum();
        assert_abs_diff_eq!(before, after, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_projection_probability() {
        // two opposite squeezers + balanced beamsplitter = TMSV; heralding
        // one arm on vacuum leaves vacuum with P = 1/cosh²r
        let r = 0.5;
        let v = FockStateTensor::vacuum(2, 16).unwrap();
        let (s, _) = fock_squeeze(&v, 0, r).unwrap();
        let (s, _) = fock_squeeze(&s, 1, -r).unwrap();
        let s = fock_beamsplitter(&s, 0, 1, std::f64::consts::FRAC_PI_4).unwrap();
        let (kept, p) = project_vacuum(&s, &[1]).unwrap();
        assert_abs_diff_eq!(p, 1.0 / r.cosh().powi(2), epsilon = 1e-6);
        assert_abs_diff_eq!(p, 0.78645, epsilon = 1e-5);
        assert_abs_diff_eq!(kept.amplitude(&[0]).unwrap().norm(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn project_identity_on_product_vacuum() {
        let v = FockStateTensor::vacuum(3, 12).unwrap();
        let (sq, _) = fock_squeeze(&v, 0, 0.3).unwrap();
        let (kept, p) = project_vacuum(&sq, &[1, 2]).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            kept.amplitude(&[0]).unwrap().re,
            1.0 / 0.3_f64.cosh().sqrt(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn state_fidelity_examples() {
        let v = FockStateTensor::vacuum(1, 16).unwrap();
        assert_abs_diff_eq!(state_fidelity(&v, &v).unwrap(), 1.0, epsilon = 1e-14);
        let mut one = v.clone();
        one.amps[0] = Complex64::ZERO;
        one.amps[1] = Complex64::ONE;
        assert_abs_diff_eq!(state_fidelity(&v, &one).unwrap(), 0.0, epsilon = 1e-14);
        let (sq, _) = fock_squeeze(&v, 0, 0.3).unwrap();
        assert_abs_diff_eq!(
            state_fidelity(&v, &sq).unwrap(),
            1.0 / 0.3_f64.cosh(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(state_fidelity(&v, &sq).unwrap(), 0.95663, epsilon = 5e-6);
    }

    #[test]
    fn covariance_of_squeezed_fock_state() {
        let v = FockStateTensor::vacuum(1, 30).unwrap();
        let (sq, _) = fock_squeeze(&v, 0, 0.5).unwrap();
        let cov = covariance_from_fock(&sq).unwrap();
        assert_abs_diff_eq!(cov.matrix()[(0, 0)], (-1.0_f64).exp(), epsilon = 1e-7);
        assert_abs_diff_eq!(cov.matrix()[(1, 1)], 1.0_f64.exp(), epsilon = 1e-7);
        assert_abs_diff_eq!(cov.matrix()[(0, 1)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn bogoliubov_matches_gate_by_gate_and_symplectic() {
        use crate::circuit::Gate;
        let r = 0.3;
        let circuit = CircuitSpec::new(
            2,
            vec![
                Gate::Phase {
                    mode: 0,
                    phi: 0.4,
                    noisy: false,
                },
                Gate::BeamSplitter {
                    a: 0,
                    b: 1,
                    theta: 0.9,
                    noisy: false,
                },
                Gate::Phase {
                    mode: 1,
                    phi: -0.2,
                    noisy: false,
                },
            ],
        )
        .unwrap();
        let closed = bogoliubov_output_state(r, &circuit, 16).unwrap();

        let v = FockStateTensor::vacuum(2, 16).unwrap();
        let (s, _) = fock_squeeze(&v, 0, r).unwrap();
        let (s, _) = fock_squeeze(&s, 1, r).unwrap();
        let gate_by_gate = fock_apply_circuit(&s, &circuit, 0).unwrap();
        let f = state_fidelity(&closed, &gate_by_gate).unwrap();
        assert!(
            (1.0 - f).abs() < 1e-8,
            "closed form vs gate-by-gate overlap deficit {}",
            1.0 - f
        );

        // and against the covariance pipeline
        use crate::gaussian::{CovarianceMatrix, SymplecticTransform};
        let cov_fock = bogoliubov_output_moments(r, &circuit, 16).unwrap();
        let cov_sympl = CovarianceMatrix::vacuum(2)
            .apply_transform(&SymplecticTransform::squeeze(2, 0, r).unwrap())
            .unwrap()
            .apply_transform(&SymplecticTransform::squeeze(2, 1, r).unwrap())
            .unwrap()
            .apply_transform(&crate::circuit::compile_to_symplectic(&circuit, 2, 0).unwrap())
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    cov_fock.matrix()[(i, j)],
                    cov_sympl.matrix()[(i, j)],
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn bogoliubov_theta_zero_gives_independent_modes() {
        use crate::circuit::Gate;
        let circuit = CircuitSpec::new(
            2,
            vec![Gate::BeamSplitter {
                a: 0,
                b: 1,
                theta: 0.0,
                noisy: false,
            }],
        )
        .unwrap();
        let state = bogoliubov_output_state(0.3, &circuit, 12).unwrap();
        let t: f64 = 0.3_f64.tanh();
        let c0 = 1.0 / 0.3_f64.cosh(); // sech r per mode, squared overall
        assert_abs_diff_eq!(state.amplitude(&[0, 0]).unwrap().re, c0, epsilon = 1e-9);
        // |2,0⟩ amplitude −t √2/2 · sech
        assert_abs_diff_eq!(
            state.amplitude(&[2, 0]).unwrap().re,
            -t * std::f64::consts::SQRT_2 / 2.0 * c0,
            epsilon = 1e-9
        );
        assert!(state.amplitude(&[1, 1]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn bogoliubov_rejects_active_circuits() {
        let circuit = CircuitSpec::new(2, vec![Gate::Squeeze { mode: 0, r: 0.1 }]).unwrap();
        assert!(bogoliubov_output_state(0.3, &circuit, 8).is_err());
    }
}
