//! Two-level density operators in the basis (|e⟩, |g⟩), so that σ_z = diag(1, -1)
//! and b_z = +1 is the excited state.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BlochVector = Vector3<f64>;
pub type Operator2 = Matrix2<Complex64>;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const CI: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub mod pauli {
    use super::*;

    pub fn identity() -> Operator2 {
        Operator2::new(C1, C0, C0, C1)
    }
    pub fn x() -> Operator2 {
        Operator2::new(C0, C1, C1, C0)
    }
    pub fn y() -> Operator2 {
        Operator2::new(C0, -CI, CI, C0)
    }
    pub fn z() -> Operator2 {
        Operator2::new(C1, C0, C0, -C1)
    }
    /// σ⁺ = σ_x + iσ_y = 2|e⟩⟨g|, the normalization used by the monopole moment.
    pub fn raising() -> Operator2 {
        x() + y() * CI
    }
    /// σ⁻ = σ_x - iσ_y = 2|g⟩⟨e|.
    pub fn lowering() -> Operator2 {
        x() - y() * CI
    }

    /// ½(c₀ 𝟙 + v·σ) for real components.
    pub fn from_components(c0: f64, v: &Vector3<f64>) -> Operator2 {
        let half = |z: f64| Complex64::new(0.5 * z, 0.0);
        Operator2::new(
            half(c0 + v.z),
            Complex64::new(0.5 * v.x, -0.5 * v.y),
            Complex64::new(0.5 * v.x, 0.5 * v.y),
            half(c0 - v.z),
        )
    }

    /// Components (Tr ρ, Tr σ_x ρ, Tr σ_y ρ, Tr σ_z ρ).
    pub fn components(m: &Operator2) -> (Complex64, Vector3<Complex64>) {
        let tr = m[(0, 0)] + m[(1, 1)];
        let bx = m[(0, 1)] + m[(1, 0)];
        let by = CI * (m[(0, 1)] - m[(1, 0)]);
        let bz = m[(0, 0)] - m[(1, 1)];
        (tr, Vector3::new(bx, by, bz))
    }
}

/// Largest deviation of `m` from Hermiticity.
pub fn hermiticity_defect(m: &Operator2) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    rho: Operator2,
}

impl QubitState {
    pub fn excited() -> Self {
        Self::from_bloch_unchecked(&Vector3::new(0.0, 0.0, 1.0))
    }

    pub fn ground() -> Self {
        Self::from_bloch_unchecked(&Vector3::new(0.0, 0.0, -1.0))
    }

    pub fn from_bloch(b: &BlochVector) -> Result<Self> {
        if b.iter().any(|v| !v.is_finite()) || b.norm() > 1.0 + 1e-10 {
            return Err(Error::Domain(format!(
                "Bloch vector {:?} is not a valid state",
                b.as_slice()
            )));
        }
        Ok(Self::from_bloch_unchecked(b))
    }

    pub(crate) fn from_bloch_unchecked(b: &BlochVector) -> Self {
        Self {
            rho: pauli::from_components(1.0, b),
        }
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: Operator2) -> Result<Self> {
        let state = Self { rho };
        state.check(1e-10)?;
        Ok(state)
    }

    pub fn matrix(&self) -> &Operator2 {
        &self.rho
    }

    pub fn bloch(&self) -> BlochVector {
        let (_, v) = pauli::components(&self.rho);
        Vector3::new(v.x.re, v.y.re, v.z.re)
    }

    pub fn trace(&self) -> Complex64 {
        self.rho[(0, 0)] + self.rho[(1, 1)]
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Eigenvalues, ascending. For a Hermitian 2×2 these are ½(t ∓ |b|).
    pub fn eigenvalues(&self) -> [f64; 2] {
        let t = self.trace().re;
        let r = self.bloch().norm();
        [0.5 * (t - r), 0.5 * (t + r)]
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let herm = hermiticity_defect(&self.rho);
        let tr = (self.trace() - C1).norm();
        let min_eig = self.eigenvalues()[0];
        if herm > tol || tr > tol || min_eig < -tol {
            return Err(Error::Domain(format!(
                "not a density operator: hermiticity defect {herm:e}, trace defect {tr:e}, min eigenvalue {min_eig:e}"
            )));
        }
        Ok(())
    }

    /// Splits the state into at most two weighted pure states along ±b̂.
    pub fn pure_decomposition(&self) -> Vec<(f64, [Complex64; 2])> {
        let b = self.bloch();
        let r = b.norm();
        if r > 1.0 - 1e-14 {
            return vec![(1.0, pure_amplitudes(&(b / r)))];
        }
        if r < 1e-15 {
            return vec![
                (0.5, pure_amplitudes(&Vector3::z())),
                (0.5, pure_amplitudes(&-Vector3::z())),
            ];
        }
        let n = b / r;
        vec![
            (0.5 * (1.0 + r), pure_amplitudes(&n)),
            (0.5 * (1.0 - r), pure_amplitudes(&-n)),
        ]
    }
}

/// Amplitudes (ψ_e, ψ_g) of the pure state with unit Bloch vector `n`.
pub fn pure_amplitudes(n: &BlochVector) -> [Complex64; 2] {
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x);
    [
        Complex64::new((0.5 * theta).cos(), 0.0),
        Complex64::from_polar((0.5 * theta).sin(), phi),
    ]
}
