//! The central harmonic particle and the unit system.
//!
//! All quantities are carried in user units with `hbar` and `kb` explicit;
//! the reduced system `hbar = kb = m = Omega = 1` is the conventional choice
//! for dimensionless work and is what [`ParticleParams::reduced`] returns.

use crate::error::{Error, Result};

/// Mass, trap frequency and the two fundamental constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleParams {
    /// Particle mass `m`.
    pub mass: f64,
    /// Trap angular frequency `Omega`.
    pub omega: f64,
    /// Action quantum `hbar`.
    pub hbar: f64,
    /// Boltzmann constant `kb`.
    pub kb: f64,
}

impl ParticleParams {
    pub fn new(mass: f64, omega: f64, hbar: f64, kb: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("omega", omega), ("hbar", hbar), ("kb", kb)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { mass, omega, hbar, kb })
    }

    /// Reduced units `hbar = kb = m = Omega = 1`.
    pub fn reduced() -> Self {
        Self { mass: 1.0, omega: 1.0, hbar: 1.0, kb: 1.0 }
    }

    /// Transverse oscillator level `E_n = hbar Omega (n + 1/2)`.
    pub fn energy_level(&self, n: usize) -> f64 {
        self.hbar * self.omega * (n as f64 + 0.5)
    }

    /// Oscillator length `sqrt(hbar / m Omega)`.
    pub fn oscillator_length(&self) -> f64 {
        (self.hbar / (self.mass * self.omega)).sqrt()
    }
}

/// `coth(x)` with the exact `T = 0` limit: callers pass `x = +inf` (or any
/// `x >= X_ONE`) to get 1 without evaluating a large exponential.
pub(crate) fn coth(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // tanh saturates to 1.0 exactly well before 20; avoid the division noise.
    if x >= 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

/// `coth(hbar nu / 2 kb T)` where `T = 0` means the exact limit 1.
pub(crate) fn thermal_coth(nu: f64, temperature: f64, p: &ParticleParams) -> f64 {
    if temperature == 0.0 {
        1.0
    } else {
        coth(p.hbar * nu / (2.0 * p.kb * temperature))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive() {
        assert!(ParticleParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ParticleParams::new(1.0, -2.0, 1.0, 1.0).is_err());
        assert!(ParticleParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn coth_limits() {
        assert_eq!(coth(25.0), 1.0);
        assert!((coth(1.0) - 1.0 / 1f64.tanh()).abs() < 1e-15);
        // small-argument growth ~ 1/x
        assert!((coth(1e-6) * 1e-6 - 1.0).abs() < 1e-9);
        let p = ParticleParams::reduced();
        assert_eq!(thermal_coth(3.0, 0.0, &p), 1.0);
    }
}
