//! Gaussian states as real covariance matrices and symplectic transforms.
//!
//! Quadratures are interleaved as (x1, p1, x2, p2, ...) and the vacuum
//! covariance is the identity, so a mode squeezed by `r` has variances
//! (e^{-2r}, e^{+2r}).  All transforms act on covariances as S V S^T.

use nalgebra::DMatrix;

use crate::error::{Result, UaError};

/// Max allowed |V - V^T| entry for a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Lowest eigenvalue of V + i*Omega tolerated before a state is rejected.
pub const PHYSICALITY_TOL: f64 = -1e-9;
/// Max |nu - 1| over symplectic eigenvalues for a state to count as pure.
pub const PURITY_TOL: f64 = 1e-8;
/// Max allowed |S Omega S^T - Omega| entry for a symplectic transform.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Smallest Cholesky pivot accepted when inverting the heralding block.
pub const HERALD_PIVOT_TOL: f64 = 1e-12;
/// Fidelity may exceed 1 by at most this much before it is an error.
pub const FIDELITY_OVERSHOOT_TOL: f64 = 1e-9;

/// The symplectic form Omega = diag of [[0, 1], [-1, 0]] blocks.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for m in 0..modes {
        w[(2 * m, 2 * m + 1)] = 1.0;
        w[(2 * m + 1, 2 * m)] = -1.0;
    }
    w
}

/// Covariance matrix of a zero-mean Gaussian state on `modes` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    mat: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Vacuum state: identity covariance.
    pub fn vacuum(modes: usize) -> Self {
        Self {
            mat: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// Wraps an externally supplied matrix, enforcing symmetry and the
    /// uncertainty relation min eig(V + i*Omega) >= -1e-9.
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() % 2 != 0 {
            return Err(UaError::Dimension(format!(
                "covariance must be square with even side, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let max_asym = max_asymmetry(&mat);
        if max_asym > SYMMETRY_TOL {
            return Err(UaError::NotSymmetric {
                max_asymmetry: max_asym,
            });
        }
        let v = Self::from_matrix_unchecked(mat);
        let min_eig = v.min_heisenberg_eigenvalue();
        if min_eig < PHYSICALITY_TOL {
            return Err(UaError::Unphysical { min_eig });
        }
        Ok(v)
    }

    /// Wraps a matrix produced by internal arithmetic.  The result is
    /// symmetrized to absorb round-off but not re-validated.
    pub(crate) fn from_matrix_unchecked(mat: DMatrix<f64>) -> Self {
        let sym = 0.5 * (&mat + mat.transpose());
        Self { mat: sym }
    }

    pub fn modes(&self) -> usize {
        self.mat.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// V -> S V S^T.
    pub fn apply_transform(&self, s: &SymplecticTransform) -> Result<Self> {
        if s.matrix().nrows() != self.mat.nrows() {
            return Err(UaError::Dimension(format!(
                "transform is {}x{} but covariance is {}x{}",
                s.matrix().nrows(),
                s.matrix().ncols(),
                self.mat.nrows(),
                self.mat.ncols()
            )));
        }
        Ok(Self::from_matrix_unchecked(
            s.matrix() * &self.mat * s.matrix().transpose(),
        ))
    }

    /// Covariance restricted to `modes` (in the given order).
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let idx = quad_indices(modes, self.modes())?;
        let mut out = DMatrix::zeros(idx.len(), idx.len());
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                out[(a, b)] = self.mat[(ia, ib)];
            }
        }
        Ok(Self { mat: out })
    }

    /// Mean photon number of each mode: (V_xx + V_pp - 2) / 4.
    pub fn mean_photon_numbers(&self) -> Vec<f64> {
        (0..self.modes())
            .map(|m| (self.mat[(2 * m, 2 * m)] + self.mat[(2 * m + 1, 2 * m + 1)] - 2.0) / 4.0)
            .collect()
    }

    /// Symplectic eigenvalues (one per mode, descending).  Computed as the
    /// paired singular values of L^T Omega L with V = L L^T the Cholesky
    /// factorization.  An eigenvector-built V^{1/2} is not reliable here:
    /// covariances routinely carry degenerate eigenvalue clusters (any pure
    /// state has them) and the dense eigensolver can attach those values to
    /// the wrong vectors, which corrupts the root by far more than rounding.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let l = match self.mat.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                // Physical covariances are positive definite, so a failed
                // factorization means rounding pushed an eigenvalue to ~0;
                // nudge the diagonal by a relative epsilon and retry.
                let n = self.mat.nrows();
                let bump = 1e-12 * self.mat.diagonal().amax().max(1.0);
                let jittered = &self.mat + DMatrix::identity(n, n) * bump;
                match jittered.cholesky() {
                    Some(c) => c.l(),
                    // Not a state at all; report maximal impurity rather
                    // than a made-up spectrum.
                    None => return vec![f64::INFINITY; self.modes()],
                }
            }
        };
        let k = l.transpose() * symplectic_form(self.modes()) * &l;
        let svd = k.svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv.into_iter().step_by(2).collect()
    }

    /// Max |nu - 1| over symplectic eigenvalues; 0 for a pure state.
    pub fn purity_deviation(&self) -> f64 {
        self.symplectic_eigenvalues()
            .iter()
            .map(|nu| (nu - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_pure(&self) -> bool {
        self.purity_deviation() <= PURITY_TOL
    }

    /// Smallest eigenvalue of the Hermitian matrix V + i*Omega, computed via
    /// the real embedding [[V, Omega], [-Omega, V]].
    pub fn min_heisenberg_eigenvalue(&self) -> f64 {
        let n = self.mat.nrows();
        let w = symplectic_form(self.modes());
        // V + iB with B = Omega embeds as the real symmetric [[V, -B], [B, V]].
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        e.view_mut((0, 0), (n, n)).copy_from(&self.mat);
        e.view_mut((n, n), (n, n)).copy_from(&self.mat);
        e.view_mut((0, n), (n, n)).copy_from(&(-&w));
        e.view_mut((n, 0), (n, n)).copy_from(&w);
        e.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn quad_indices(modes: &[usize], total: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(2 * modes.len());
    for &m in modes {
        if m >= total {
            return Err(UaError::ModeIndex {
                mode: m,
                modes: total,
            });
        }
        idx.push(2 * m);
        idx.push(2 * m + 1);
    }
    Ok(idx)
}

/// A linear-optics (or squeezing) transform S with S Omega S^T = Omega.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    mat: DMatrix<f64>,
}

impl SymplecticTransform {
    pub fn identity(modes: usize) -> Self {
        Self {
            mat: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// Wraps an externally supplied matrix after checking S Omega S^T = Omega.
    pub fn from_matrix(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() % 2 != 0 {
            return Err(UaError::Dimension(format!(
                "transform must be square with even side, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let s = Self { mat };
        let dev = s.symplectic_deviation();
        if dev > SYMPLECTIC_TOL {
            return Err(UaError::NotSymplectic { deviation: dev });
        }
        Ok(s)
    }

    /// Max |S Omega S^T - Omega| entry.
    pub fn symplectic_deviation(&self) -> f64 {
        let w = symplectic_form(self.modes());
        let d = &self.mat * &w * self.mat.transpose() - &w;
        d.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    pub fn modes(&self) -> usize {
        self.mat.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Single-mode squeezer: x -> e^{-r} x, p -> e^{+r} p on `mode`.
    pub fn squeeze(modes: usize, mode: usize, r: f64) -> Result<Self> {
        check_mode(mode, modes)?;
        let mut s = Self::identity(modes);
        s.mat[(2 * mode, 2 * mode)] = (-r).exp();
        s.mat[(2 * mode + 1, 2 * mode + 1)] = r.exp();
        Ok(s)
    }

    /// Phase rotation by `phi` on `mode`: block [[cos, sin], [-sin, cos]].
    pub fn phase(modes: usize, mode: usize, phi: f64) -> Result<Self> {
        check_mode(mode, modes)?;
        let (sin, cos) = phi.sin_cos();
        let mut s = Self::identity(modes);
        s.mat[(2 * mode, 2 * mode)] = cos;
        s.mat[(2 * mode, 2 * mode + 1)] = sin;
        s.mat[(2 * mode + 1, 2 * mode)] = -sin;
        s.mat[(2 * mode + 1, 2 * mode + 1)] = cos;
        Ok(s)
    }

    /// Beamsplitter of mixing angle `theta` (transmissivity cos^2 theta)
    /// between modes `a` and `b`: +sin couples a<-b, -sin couples b<-a.
    pub fn beamsplitter(modes: usize, a: usize, b: usize, theta: f64) -> Result<Self> {
        check_mode(a, modes)?;
        check_mode(b, modes)?;
        if a == b {
            return Err(UaError::Circuit(format!(
                "beamsplitter needs two distinct modes, got ({a}, {b})"
            )));
        }
        let (sin, cos) = theta.sin_cos();
        let mut s = Self::identity(modes);
        for k in 0..2 {
            s.mat[(2 * a + k, 2 * a + k)] = cos;
            s.mat[(2 * b + k, 2 * b + k)] = cos;
            s.mat[(2 * a + k, 2 * b + k)] = sin;
            s.mat[(2 * b + k, 2 * a + k)] = -sin;
        }
        Ok(s)
    }

    /// The transform applying `self` first and then `next`.
    pub fn then(&self, next: &SymplecticTransform) -> Result<Self> {
        if next.mat.nrows() != self.mat.nrows() {
            return Err(UaError::Dimension(format!(
                "cannot compose {}x{} with {}x{}",
                self.mat.nrows(),
                self.mat.ncols(),
                next.mat.nrows(),
                next.mat.ncols()
            )));
        }
        Ok(Self {
            mat: &next.mat * &self.mat,
        })
    }

    /// Transpose; for an orthogonal (passive) transform this is the inverse.
    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
        }
    }
}

fn check_mode(mode: usize, modes: usize) -> Result<()> {
    if mode >= modes {
        return Err(UaError::ModeIndex { mode, modes });
    }
    Ok(())
}

/// Projects the `ancilla` modes of `v` onto the vacuum.
///
/// Returns the conditioned covariance on the remaining modes (in their
/// original order) together with the exact heralding probability
/// 2^m / sqrt(det(B + I)), where B is the ancilla block.
pub fn condition_on_vacuum(
    v: &CovarianceMatrix,
    ancilla: &[usize],
) -> Result<(CovarianceMatrix, f64)> {
    let total = v.modes();
    if ancilla.is_empty() {
        return Err(UaError::Config(
            "condition_on_vacuum needs at least one ancilla mode".into(),
        ));
    }
    let mut seen = vec![false; total];
    for &m in ancilla {
        if m >= total {
            return Err(UaError::ModeIndex {
                mode: m,
                modes: total,
            });
        }
        if seen[m] {
            return Err(UaError::Config(format!("duplicate ancilla mode {m}")));
        }
        seen[m] = true;
    }
    let kept: Vec<usize> = (0..total).filter(|m| !seen[*m]).collect();
    if kept.is_empty() {
        return Err(UaError::Config(
            "conditioning every mode leaves no output state".into(),
        ));
    }

    let ki = quad_indices(&kept, total)?;
    let ai = quad_indices(ancilla, total)?;
    let m = v.matrix();
    let a = gather(m, &ki, &ki);
    let b = gather(m, &ai, &ai);
    let c = gather(m, &ki, &ai);

    let bi = &b + DMatrix::identity(ai.len(), ai.len());
    let chol = bi
        .clone()
        .cholesky()
        .ok_or_else(|| UaError::Numerical("Cholesky of heralding block failed".into()))?;
    let mut det = 1.0;
    let mut min_pivot = f64::INFINITY;
    for i in 0..ai.len() {
        let p = chol.l_dirty()[(i, i)].powi(2);
        det *= p;
        min_pivot = min_pivot.min(p);
    }
    if min_pivot < HERALD_PIVOT_TOL {
        return Err(UaError::SingularHerald { pivot: min_pivot });
    }
    let exact_p = 2f64.powi(ancilla.len() as i32) / det.sqrt();

    let solved = chol.solve(&c.transpose()); // (B+I)^{-1} C^T
    let out = a - c * solved;
    Ok((CovarianceMatrix::from_matrix_unchecked(out), exact_p))
}

fn gather(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for (a, &ia) in rows.iter().enumerate() {
        for (b, &ib) in cols.iter().enumerate() {
            out[(a, b)] = m[(ia, ib)];
        }
    }
    out
}

/// Product approximation of the vacuum-herald probability over every mode of
/// `v_ancilla`: prod_i (1 - nbar_i).  Valid only while each nbar_i < 1.
pub fn herald_probability_approx(v_ancilla: &CovarianceMatrix) -> Result<f64> {
    let mut p = 1.0;
    for (mode, nbar) in v_ancilla.mean_photon_numbers().into_iter().enumerate() {
        if nbar >= 1.0 {
            return Err(UaError::PhotonNumberTooLarge { mode, nbar });
        }
        p *= 1.0 - nbar;
    }
    Ok(p.min(1.0))
}

/// Fidelity between a pure reference `v0` and an arbitrary Gaussian `v1`:
/// F = 2^N / sqrt(det(V0 + V1)).
pub fn gaussian_fidelity(v0: &CovarianceMatrix, v1: &CovarianceMatrix) -> Result<f64> {
    if v0.modes() != v1.modes() {
        return Err(UaError::Dimension(format!(
            "fidelity between {}-mode and {}-mode states",
            v0.modes(),
            v1.modes()
        )));
    }
    let dev = v0.purity_deviation();
    if dev > PURITY_TOL {
        return Err(UaError::NotPure { deviation: dev });
    }
    let sum = v0.matrix() + v1.matrix();
    let chol = sum
        .cholesky()
        .ok_or_else(|| UaError::Numerical("V0 + V1 is not positive definite".into()))?;
    let mut det = 1.0;
    for i in 0..2 * v0.modes() {
        det *= chol.l_dirty()[(i, i)].powi(2);
    }
    let f = 2f64.powi(v0.modes() as i32) / det.sqrt();
    if f > 1.0 + FIDELITY_OVERSHOOT_TOL {
        return Err(UaError::FidelityOvershoot { value: f });
    }
    Ok(f.min(1.0))
}

/// Diagnostic summary of how close `mat` is to a valid covariance matrix.
#[derive(Debug, Clone)]
pub struct PhysicalityReport {
    pub max_asymmetry: f64,
    pub min_heisenberg_eigenvalue: f64,
    pub symplectic_eigenvalues: Vec<f64>,
    pub purity_deviation: f64,
    pub is_physical: bool,
    pub is_pure: bool,
}

/// Never fails: reports symmetry, uncertainty and purity diagnostics so a
/// caller can decide what to do with a questionable matrix.
pub fn check_physicality(mat: &DMatrix<f64>) -> PhysicalityReport {
    let max_asymmetry = max_asymmetry(mat);
    let v = CovarianceMatrix::from_matrix_unchecked(mat.clone());
    let min_eig = v.min_heisenberg_eigenvalue();
    let nus = v.symplectic_eigenvalues();
    let purity_deviation = nus.iter().map(|nu| (nu - 1.0).abs()).fold(0.0, f64::max);
    PhysicalityReport {
        max_asymmetry,
        min_heisenberg_eigenvalue: min_eig,
        symplectic_eigenvalues: nus,
        purity_deviation,
        is_physical: max_asymmetry <= SYMMETRY_TOL && min_eig >= PHYSICALITY_TOL,
        is_pure: purity_deviation <= PURITY_TOL,
    }
}
