use serde::{Deserialize, Serialize};

use super::LagKernel;
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, TimeGrid};
use crate::kernel::CtpKernel;

/// Harmonic oscillator of mass `m` and frequency `omega0`.
///
/// `epsilon` regulates the poles in the variable `omega^2 - omega0^2` and
/// so carries units of frequency squared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorModel {
    pub m: f64,
    pub omega0: f64,
    pub epsilon: f64,
}

impl OscillatorModel {
    /// Model with the default regulator `1e-3 * omega0^2`.
    pub fn new(m: f64, omega0: f64) -> Result<Self> {
        Self::with_epsilon(m, omega0, 1e-3 * omega0 * omega0)
    }

    pub fn with_epsilon(m: f64, omega0: f64, epsilon: f64) -> Result<Self> {
        let model = Self { m, omega0, epsilon };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {}",
                self.m
            )));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega0 must be positive, got {}",
                self.omega0
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.epsilon >= self.omega0 * self.omega0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon ({}) must be small against omega0^2 ({})",
                self.epsilon,
                self.omega0 * self.omega0
            )));
        }
        Ok(())
    }

    /// Retarded response `D^r(t) = -Theta(t) sin(omega0 t) / (m omega0)`.
    pub fn retarded(&self, t: f64) -> f64 {
        if t > 0.0 {
            -(self.omega0 * t).sin() / (self.m * self.omega0)
        } else {
            0.0
        }
    }

    /// `(n, f, i)` at frequency `omega`, with `D^f = i f`.
    pub fn spectrum(&self, omega: f64) -> (f64, f64, f64) {
        let x = omega * omega - self.omega0 * self.omega0;
        let den = self.m * (x * x + self.epsilon * self.epsilon);
        let di = -self.epsilon / den;
        (x / den, sign(omega) * di, di)
    }

    /// Inverse kernel components at `omega`.
    pub fn inverse_spectrum(&self, omega: f64) -> (f64, f64, f64) {
        let x = omega * omega - self.omega0 * self.omega0;
        (self.m * x, self.m * self.epsilon * sign(omega), self.m * self.epsilon)
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl LagKernel for OscillatorModel {
    // D++(tau) = -i exp(-i omega0 |tau|) / (2 m omega0)
    fn at(&self, tau: f64) -> Result<(f64, f64, f64)> {
        let c = 2.0 * self.m * self.omega0;
        let dn = -(self.omega0 * tau.abs()).sin() / c;
        let df = -(self.omega0 * tau).sin() / c;
        let di = -(self.omega0 * tau).cos() / c;
        Ok((dn, df, di))
    }
}

pub fn oscillator_kernel_time(model: &OscillatorModel, grid: TimeGrid) -> Result<CtpKernel> {
    model.validate()?;
    model.sample(grid)
}

/// The oscillator kernel and its inverse on a frequency grid.
pub fn oscillator_kernel_freq(model: &OscillatorModel, grid: FrequencyGrid) -> Result<(CtpKernel, CtpKernel)> {
    model.validate()?;
    let k = CtpKernel::from_spectrum(grid, |w| model.spectrum(w))?;
    let inv = CtpKernel::from_spectrum(grid, |w| model.inverse_spectrum(w))?;
    Ok((k, inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors() {
        let m = OscillatorModel::new(1.0, 1.0).unwrap();
        assert_eq!(m.at(0.0).unwrap(), (0.0, 0.0, -0.5));
        let (dn, df, di) = m.at(std::f64::consts::FRAC_PI_2).unwrap();
        assert!((dn + 0.5).abs() < 1e-15 && (df + 0.5).abs() < 1e-15 && di.abs() < 1e-15);
        let m2 = OscillatorModel::new(2.0, 2.0).unwrap();
        assert_eq!(m2.at(0.0).unwrap().2, -0.125);
    }

    #[test]
    fn frequency_anchor_at_zero() {
        let m = OscillatorModel::new(1.0, 1.0).unwrap();
        let (n, f, i) = m.spectrum(0.0);
        assert!((n + 1.0).abs() < 1e-5);
        assert_eq!(f, 0.0);
        assert!(i.abs() < 1e-2);
        assert_eq!(m.inverse_spectrum(0.0).0, -1.0);
    }

    #[test]
    fn rejects_bad_regulator() {
        assert!(OscillatorModel::with_epsilon(1.0, 1.0, 0.0).is_err());
        assert!(OscillatorModel::with_epsilon(1.0, 1.0, -1e-3).is_err());
        assert!(OscillatorModel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn retarded_is_causal() {
        let m = OscillatorModel::new(1.0, 1.3).unwrap();
        for t in [-2.0, -0.1, 0.0] {
            assert_eq!(m.retarded(t), 0.0);
        }
        for t in [0.3, 1.7, -0.4] {
            let (dn, df, _) = m.at(t).unwrap();
            assert!((dn + df - m.retarded(t)).abs() < 1e-15);
        }
    }
}
