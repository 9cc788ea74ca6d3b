//! Discrete transform with the convention `D(omega) = int dt e^{i omega t} D(t)`.
//!
//! A Toeplitz kernel on `n` time points has lags `k dt`, `|k| <= n - 1`.
//! With `N = 2n - 1` the pair
//!
//! ```text
//!   D(omega_q) = dt sum_k e^{i omega_q k dt} D_k,    omega_q = 2 pi q / (N dt)
//!   D_k        = 1/(N dt) sum_q e^{-i omega_q k dt} D(omega_q)
//! ```
//!
//! is exact, so a round trip reproduces the input to rounding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Domain, FrequencyGrid, Grid, TimeGrid};
use crate::kernel::CtpKernel;

/// Toeplitz deviation, relative to the largest entry, accepted by [`time_to_frequency`].
const TOEPLITZ_TOL: f64 = 1e-10;

/// Transforms to the other domain. Frequency kernels land on a time grid
/// starting at zero.
pub fn fourier_bridge(k: &CtpKernel) -> Result<CtpKernel> {
    match k.domain() {
        Domain::Time => time_to_frequency(k),
        Domain::Frequency => frequency_to_time(k, 0.0),
    }
}

pub fn time_to_frequency(k: &CtpKernel) -> Result<CtpKernel> {
    let Grid::Time(tg) = *k.grid() else {
        return Err(Error::DomainMismatch { expected: "time" });
    };
    let n = tg.len();
    let nn = 2 * n - 1;
    let dt = tg.dt();
    let lags = k.lag_table(TOEPLITZ_TOL)?;
    let mut planner = FftPlanner::<f64>::new();
    // e^{+i...} is the unnormalised inverse transform in rustfft
    let fft = planner.plan_fft_inverse(nn);

    let transform = |pick: fn(&(f64, f64, f64)) -> f64| -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); nn];
        for (idx, v) in lags.iter().enumerate() {
            let k = idx as isize - (n as isize - 1);
            buf[k.rem_euclid(nn as isize) as usize] = Complex64::new(pick(v), 0.0);
        }
        fft.process(&mut buf);
        (0..nn)
            .map(|p| {
                let q = p as isize - (n as isize - 1);
                buf[q.rem_euclid(nn as isize) as usize] * dt
            })
            .collect()
    };
    let dn = transform(|v| v.0);
    let df = transform(|v| v.1);
    let di = transform(|v| v.2);

    let omega_max = 2.0 * std::f64::consts::PI * (n as f64 - 1.0) / (nn as f64 * dt);
    let grid = FrequencyGrid::new(omega_max, nn)?;
    let col = |v: Vec<f64>| DMatrix::from_vec(nn, 1, v);
    CtpKernel::from_parts(
        grid.into(),
        col(dn.iter().map(|z| z.re).collect()),
        col(df.iter().map(|z| z.im).collect()),
        col(di.iter().map(|z| z.re).collect()),
    )
}

/// Inverse of [`time_to_frequency`]; the frequency grid must have an odd
/// number of points.
pub fn frequency_to_time(k: &CtpKernel, start: f64) -> Result<CtpKernel> {
    let Grid::Frequency(fg) = *k.grid() else {
        return Err(Error::DomainMismatch { expected: "frequency" });
    };
    let nn = fg.len();
    if nn % 2 == 0 {
        return Err(Error::InvalidGrid(format!(
            "frequency grid needs an odd number of points for the inverse transform, got {nn}"
        )));
    }
    let n = nn.div_ceil(2);
    let dt = 2.0 * std::f64::consts::PI * (n as f64 - 1.0) / (nn as f64 * fg.omega_max());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(nn);

    let transform = |vals: Vec<Complex64>| -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); nn];
        for (p, v) in vals.into_iter().enumerate() {
            let q = p as isize - (n as isize - 1);
            buf[q.rem_euclid(nn as isize) as usize] = v;
        }
        fft.process(&mut buf);
        let norm = 1.0 / (nn as f64 * dt);
        (0..nn)
            .map(|idx| {
                let lag = idx as isize - (n as isize - 1);
                buf[lag.rem_euclid(nn as isize) as usize].re * norm
            })
            .collect()
    };
    let re = |m: &DMatrix<f64>| m.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>();
    let dn = transform(re(k.dn()));
    let df = transform(k.df().iter().map(|v| Complex64::new(0.0, *v)).collect());
    let di = transform(re(k.di()));

    let tg = TimeGrid::with_step(start, dt, n)?;
    let table: Vec<(f64, f64, f64)> = (0..nn).map(|i| (dn[i], df[i], di[i])).collect();
    let at = |i: usize, j: usize| table[i + n - 1 - j];
    CtpKernel::from_parts(
        tg.into(),
        DMatrix::from_fn(n, n, |i, j| at(i, j).0),
        DMatrix::from_fn(n, n, |i, j| at(i, j).1),
        DMatrix::from_fn(n, n, |i, j| at(i, j).2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maps_to_zero() {
        let g = TimeGrid::new(0.0, 1.0, 6).unwrap();
        let f = fourier_bridge(&CtpKernel::zeros(g.into())).unwrap();
        assert_eq!(f.len(), 11);
        assert_eq!(f.norm(), 0.0);
    }

    #[test]
    fn non_toeplitz_is_rejected() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let mut di = DMatrix::zeros(3, 3);
        di[(0, 0)] = 1.0;
        let k = CtpKernel::new(g.into(), DMatrix::zeros(3, 3), DMatrix::zeros(3, 3), di).unwrap();
        assert!(matches!(fourier_bridge(&k), Err(Error::NotToeplitz(_))));
    }

    #[test]
    fn even_frequency_grid_is_rejected() {
        let g = FrequencyGrid::new(1.0, 4).unwrap();
        assert!(frequency_to_time(&CtpKernel::zeros(g.into()), 0.0).is_err());
    }
}
