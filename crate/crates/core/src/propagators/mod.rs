//! Concrete spectral models in both domains, spectral synthesis, and the
//! discrete Fourier bridge between time and frequency kernels.

mod drude;
mod fourier;
mod oscillator;
mod spectral;

pub use drude::{
    drude_kernel_freq, drude_kernel_time, drude_kernel_time_with, DrudeLags, DrudeModel, DrudeTimeNormalization,
    DrudeTimeOptions,
};
pub use fourier::{fourier_bridge, frequency_to_time, time_to_frequency};
pub use oscillator::{oscillator_kernel_freq, oscillator_kernel_time, OscillatorModel};
pub use spectral::{synthesize_from_spectral, synthesize_with, SpectralDensity, SynthesisOptions};

use crate::error::Result;
use crate::grid::TimeGrid;
use crate::kernel::CtpKernel;

/// A time-translation-invariant kernel evaluated at a lag `tau = t - t'`.
pub trait LagKernel {
    /// `(Dn, Df, Di)` at lag `tau`.
    fn at(&self, tau: f64) -> Result<(f64, f64, f64)>;

    /// Samples the kernel on a time grid.
    fn sample(&self, grid: TimeGrid) -> Result<CtpKernel> {
        let n = grid.len();
        let dt = grid.dt();
        let lags = (0..2 * n - 1)
            .map(|k| self.at((k as f64 - (n as f64 - 1.0)) * dt))
            .collect::<Result<Vec<_>>>()?;
        CtpKernel::from_lag_table(grid, &lags)
    }
}
