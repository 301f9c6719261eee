//! Dirichlet cavity of a massless scalar field in one dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions within this relative distance of a wall count as inside the
/// cavity. Guards against roundoff when a worldline ends exactly on a wall.
const WALL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub length: f64,
    pub n_modes: usize,
    /// Detector gap Ω.
    pub omega_gap: f64,
    /// Coupling λ.
    pub coupling: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            length: std::f64::consts::PI,
            n_modes: 1,
            omega_gap: 1.0,
            coupling: 0.01,
        }
    }
}

impl CavityConfig {
    pub fn new(length: f64, n_modes: usize, omega_gap: f64, coupling: f64) -> Result<Self> {
        let cfg = Self {
            length,
            n_modes,
            omega_gap,
            coupling,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "cavity length must be positive, got {}",
                self.length
            )));
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidConfig("n_modes must be at least 1".into()));
        }
        if !(self.omega_gap > 0.0 && self.omega_gap.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "omega_gap must be positive, got {}",
                self.omega_gap
            )));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coupling must be non-negative, got {}",
                self.coupling
            )));
        }
        Ok(())
    }

    pub fn with_modes(mut self, n_modes: usize) -> Self {
        self.n_modes = n_modes;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    fn check_mode(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n_modes {
            return Err(Error::Domain(format!(
                "mode index {j} outside 1..={}",
                self.n_modes
            )));
        }
        Ok(())
    }

    /// Wavenumber k_j = jπ/L.
    pub fn wavenumber(&self, j: usize) -> Result<f64> {
        self.check_mode(j)?;
        Ok(j as f64 * std::f64::consts::PI / self.length)
    }

    /// ω_j = k_j for the massless field.
    pub fn mode_frequency(&self, j: usize) -> Result<f64> {
        self.wavenumber(j)
    }

    /// Highest retained frequency.
    pub fn max_frequency(&self) -> f64 {
        self.n_modes as f64 * std::f64::consts::PI / self.length
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = WALL_SLACK * self.length.max(1.0);
        x >= -slack && x <= self.length + slack
    }

    pub(crate) fn ensure_inside(&self, x: f64, tau: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfCavity {
                x,
                length: self.length,
                tau,
            })
        }
    }

    /// sin(k_j x), unnormalized.
    pub fn mode_profile(&self, j: usize, x: f64) -> Result<f64> {
        let k = self.wavenumber(j)?;
        self.ensure_inside(x, f64::NAN)?;
        Ok((k * x).sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cfg(length: f64) -> CavityConfig {
        CavityConfig::new(length, 8, 1.0, 0.01).unwrap()
    }

    #[test]
    fn frequencies() {
        assert_abs_diff_eq!(cfg(PI).mode_frequency(1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg(PI).mode_frequency(5).unwrap(), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg(1.0).mode_frequency(2).unwrap(), 2.0 * PI, epsilon = 1e-15);
        assert!(cfg(PI).mode_frequency(0).is_err());
        assert!(cfg(PI).mode_frequency(9).is_err());
    }

    #[test]
    fn profiles() {
        let c = cfg(PI);
        assert_eq!(c.mode_profile(1, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(c.mode_profile(1, PI / 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.mode_profile(2, PI / 2.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.mode_profile(3, PI).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn outside_positions_are_rejected() {
        let c = cfg(PI);
        assert!(matches!(c.mode_profile(1, -0.01), Err(Error::OutOfCavity { .. })));
        assert!(matches!(c.mode_profile(1, PI + 1e-6), Err(Error::OutOfCavity { .. })));
    }

    #[test]
    fn invalid_configs() {
        assert!(CavityConfig::new(0.0, 1, 1.0, 0.1).is_err());
        assert!(CavityConfig::new(1.0, 0, 1.0, 0.1).is_err());
        assert!(CavityConfig::new(1.0, 1, -1.0, 0.1).is_err());
        assert!(CavityConfig::new(1.0, 1, 1.0, -0.1).is_err());
    }
}
