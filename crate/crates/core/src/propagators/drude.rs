use serde::{Deserialize, Serialize};

use super::oscillator::sign;
use super::LagKernel;
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, TimeGrid};
use crate::kernel::CtpKernel;
use crate::quadrature::drude_cosine_integral;

/// Continuous spectrum `rho(Omega) = Theta(Omega) lambda^2 Omega Lambda / (Lambda^2 + Omega^2)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeModel {
    pub m: f64,
    pub lambda: f64,
    /// Cutoff frequency `Lambda`.
    pub cutoff: f64,
}

impl DrudeModel {
    pub fn new(m: f64, lambda: f64, cutoff: f64) -> Result<Self> {
        let model = Self { m, lambda, cutoff };
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
        if !(self.lambda.is_finite() && self.lambda != 0.0) {
            return Err(Error::InvalidParameter("coupling lambda must be non-zero".into()));
        }
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    pub fn spectral_density(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let l = self.cutoff;
        self.lambda * self.lambda * omega * l / (l * l + omega * omega).powi(2)
    }

    fn amplitude(&self) -> f64 {
        self.lambda * self.lambda * std::f64::consts::PI / self.m
    }

    /// `D^r(omega) = lambda^2 pi / (2m (omega + i Lambda)^2)` split as `(n, f)`.
    pub fn retarded_spectrum(&self, omega: f64) -> (f64, f64) {
        let l = self.cutoff;
        let d = (omega * omega + l * l).powi(2);
        let a = self.amplitude();
        (0.5 * a * (omega * omega - l * l) / d, -a * omega * l / d)
    }

    /// `(n, f, i)` at frequency `omega`.
    pub fn spectrum(&self, omega: f64) -> (f64, f64, f64) {
        let (n, f) = self.retarded_spectrum(omega);
        (n, f, sign(omega) * f)
    }

    /// Inverse kernel: `(D^-1)^r = 2m (omega + i Lambda)^2 / (lambda^2 pi)`,
    /// `(D^-1)^i = 4 m Lambda |omega| / (lambda^2 pi)`.
    pub fn inverse_spectrum(&self, omega: f64) -> (f64, f64, f64) {
        let l = self.cutoff;
        let a = self.amplitude();
        (
            2.0 * (omega * omega - l * l) / a,
            4.0 * omega * l / a,
            4.0 * omega.abs() * l / a,
        )
    }

    /// `D^r(t) = -Theta(t) t lambda^2 pi exp(-Lambda t) / (2m)`.
    pub fn retarded(&self, t: f64) -> f64 {
        if t > 0.0 {
            -0.5 * self.amplitude() * t * (-self.cutoff * t).exp()
        } else {
            0.0
        }
    }
}

/// Prefactor applied to the cosine integral in the time-domain `D^i`.
///
/// The closed form `D^i(t) = -(lambda^2 / (pi m Lambda)) int_0^inf z cos(z Lambda t) / (z^2+1)^2 dz`
/// pins `D^i(0) = -lambda^2 / (2 pi m Lambda)`. The Fourier transform of the
/// frequency-domain `D^i` carries `lambda^2 / (m Lambda)` instead, a factor
/// `pi` larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrudeTimeNormalization {
    /// `D^i(0) = -lambda^2 / (2 pi m Lambda)`.
    #[default]
    Anchored,
    /// Matches the transform of the frequency-domain kernel.
    FourierConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeTimeOptions {
    pub normalization: DrudeTimeNormalization,
    /// Absolute error target for the cosine integral.
    pub tolerance: f64,
}

impl Default for DrudeTimeOptions {
    fn default() -> Self {
        Self {
            normalization: DrudeTimeNormalization::Anchored,
            tolerance: 1e-10,
        }
    }
}

/// Time-domain Drude kernel evaluated lag by lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeLags {
    pub model: DrudeModel,
    pub options: DrudeTimeOptions,
}

impl DrudeLags {
    pub fn imaginary(&self, tau: f64) -> Result<f64> {
        let m = &self.model;
        let base = m.lambda * m.lambda / (m.m * m.cutoff);
        let pre = match self.options.normalization {
            DrudeTimeNormalization::Anchored => base / std::f64::consts::PI,
            DrudeTimeNormalization::FourierConsistent => base,
        };
        Ok(-pre * drude_cosine_integral(m.cutoff * tau, self.options.tolerance)?)
    }
}

impl LagKernel for DrudeLags {
    fn at(&self, tau: f64) -> Result<(f64, f64, f64)> {
        let r_fwd = self.model.retarded(tau);
        let r_bwd = self.model.retarded(-tau);
        Ok((0.5 * (r_fwd + r_bwd), 0.5 * (r_fwd - r_bwd), self.imaginary(tau)?))
    }
}

pub fn drude_kernel_time(model: &DrudeModel, grid: TimeGrid) -> Result<CtpKernel> {
    drude_kernel_time_with(model, grid, DrudeTimeOptions::default())
}

pub fn drude_kernel_time_with(model: &DrudeModel, grid: TimeGrid, options: DrudeTimeOptions) -> Result<CtpKernel> {
    model.validate()?;
    DrudeLags { model: *model, options }.sample(grid)
}

/// The Drude kernel and its inverse on a frequency grid.
pub fn drude_kernel_freq(model: &DrudeModel, grid: FrequencyGrid) -> Result<(CtpKernel, CtpKernel)> {
    model.validate()?;
    let k = CtpKernel::from_spectrum(grid, |w| model.spectrum(w))?;
    let inv = CtpKernel::from_spectrum(grid, |w| model.inverse_spectrum(w))?;
    Ok((k, inv))
}
