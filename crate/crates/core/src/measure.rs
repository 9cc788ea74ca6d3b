//! Repeated coordinate measurements of an ensemble average at a few
//! discrete times.
//!
//! Outcomes are labelled by `(z_l, z_dl)`: `z_l` is the averaged coordinate
//! recorded at `t_l` and `z_dl` the branch difference. The latest `z_d` is
//! always pinned to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianDist;
use crate::grid::{Grid, TimeGrid};
use crate::kernel::CtpKernel;
use crate::propagators::LagKernel;

/// Toeplitz deviation accepted when reading lags off a time kernel.
const TOEPLITZ_TOL: f64 = 1e-10;

/// `|D^r(tau)|` below this fraction of `|D^i(0)|` counts as a mass-shell zero.
const MASS_SHELL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSchedule {
    times: Vec<f64>,
}

impl MeasurementSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidSchedule("no measurement times".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite measurement time".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSchedule(format!(
                "times must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Lags of a sampled time kernel, linearly interpolated.
#[derive(Debug, Clone)]
pub struct InterpolatedLags {
    dt: f64,
    half: usize,
    table: Vec<(f64, f64, f64)>,
}

impl InterpolatedLags {
    pub fn new(k: &CtpKernel) -> Result<Self> {
        let table = k.lag_table(TOEPLITZ_TOL)?;
        let Grid::Time(tg) = *k.grid() else {
            return Err(Error::DomainMismatch { expected: "time" });
        };
        Ok(Self {
            dt: tg.dt(),
            half: tg.len() - 1,
            table,
        })
    }

    pub fn max_lag(&self) -> f64 {
        self.half as f64 * self.dt
    }
}

impl LagKernel for InterpolatedLags {
    fn at(&self, tau: f64) -> Result<(f64, f64, f64)> {
        let x = tau / self.dt + self.half as f64;
        let last = (self.table.len() - 1) as f64;
        let slack = 1e-9;
        if !(x >= -slack && x <= last + slack) {
            return Err(Error::InvalidSchedule(format!(
                "lag {tau} outside kernel support |tau| <= {}",
                self.max_lag()
            )));
        }
        let x = x.clamp(0.0, last);
        let i = (x.floor() as usize).min(self.table.len() - 2);
        let f = x - i as f64;
        let (a, b) = (self.table[i], self.table[i + 1]);
        Ok((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1), a.2 + f * (b.2 - a.2)))
    }

    fn sample(&self, grid: TimeGrid) -> Result<CtpKernel> {
        let n = grid.len();
        let dt = grid.dt();
        let lags = (0..2 * n - 1)
            .map(|k| self.at((k as f64 - (n as f64 - 1.0)) * dt))
            .collect::<Result<Vec<_>>>()?;
        CtpKernel::from_lag_table(grid, &lags)
    }
}

/// Kernel restricted to the measurement times, entry `(l, l')` holding the
/// lag `t_l - t_l'`.
#[derive(Debug, Clone, PartialEq)]
pub struct StroboscopeForm {
    times: Vec<f64>,
    mean: DVector<f64>,
    dn: DMatrix<f64>,
    df: DMatrix<f64>,
    di: DMatrix<f64>,
    n_s: f64,
    hbar: f64,
}

impl StroboscopeForm {
    /// Evaluates a lag kernel at every pair of schedule times.
    pub fn from_lags<L: LagKernel + ?Sized>(
        lags: &L,
        schedule: &MeasurementSchedule,
        mean: DVector<f64>,
        n_s: f64,
        hbar: f64,
    ) -> Result<Self> {
        let t = schedule.times();
        let m = t.len();
        if mean.len() != m {
            return Err(Error::InvalidParameter(format!(
                "mean has {} entries for {m} measurement times",
                mean.len()
            )));
        }
        if !(n_s >= 1.0 && n_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ensemble size must be >= 1, got {n_s}"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let mut dn = DMatrix::zeros(m, m);
        let mut df = DMatrix::zeros(m, m);
        let mut di = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..=a {
                let (n, f, i) = lags.at(t[a] - t[b])?;
                if a == b {
                    // equal-time retarded and advanced parts vanish
                    di[(a, a)] = i;
                } else {
                    dn[(a, b)] = n;
                    dn[(b, a)] = n;
                    df[(a, b)] = f;
                    df[(b, a)] = -f;
                    di[(a, b)] = i;
                    di[(b, a)] = i;
                }
            }
        }
        if let Some(l) = (0..m).find(|&l| di[(l, l)] >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "equal-time D^i must be negative, got {} at t = {}",
                di[(l, l)],
                t[l]
            )));
        }
        Ok(Self {
            times: t.to_vec(),
            mean,
            dn,
            df,
            di,
            n_s,
            hbar,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn dn(&self) -> &DMatrix<f64> {
        &self.dn
    }

    pub fn df(&self) -> &DMatrix<f64> {
        &self.df
    }

    pub fn di(&self) -> &DMatrix<f64> {
        &self.di
    }

    /// `D^r = D^n + D^f`, lower triangular.
    pub fn retarded(&self) -> DMatrix<f64> {
        &self.dn + &self.df
    }

    pub fn n_s(&self) -> f64 {
        self.n_s
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// The same form for a different ensemble size.
    pub fn with_ensemble_size(&self, n_s: f64) -> Result<Self> {
        if !(n_s >= 1.0 && n_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ensemble size must be >= 1, got {n_s}"
            )));
        }
        Ok(Self { n_s, ..self.clone() })
    }

    fn require(&self, m: usize) -> Result<()> {
        if self.len() != m {
            return Err(Error::InvalidSchedule(format!(
                "expected {m} measurement times, got {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `(D^i(0), D^i(tau), D^r(tau))` for two observations.
    fn pair(&self) -> (f64, f64, f64) {
        (self.di[(0, 0)], self.di[(1, 0)], self.dn[(1, 0)] + self.df[(1, 0)])
    }
}

/// Samples a time-translation-invariant time-domain kernel at the schedule,
/// interpolating linearly between grid points.
pub fn sample_kernel_at_times(
    k: &CtpKernel,
    schedule: &MeasurementSchedule,
    mean: DVector<f64>,
    n_s: f64,
    hbar: f64,
) -> Result<StroboscopeForm> {
    let Grid::Time(tg) = *k.grid() else {
        return Err(Error::DomainMismatch { expected: "time" });
    };
    let slack = 1e-9 * tg.dt();
    if let Some(t) = schedule
        .times()
        .iter()
        .find(|&&t| t < tg.start() - slack || t > tg.end() + slack)
    {
        return Err(Error::InvalidSchedule(format!(
            "time {t} outside kernel grid [{}, {}]",
            tg.start(),
            tg.end()
        )));
    }
    StroboscopeForm::from_lags(&InterpolatedLags::new(k)?, schedule, mean, n_s, hbar)
}

/// Distribution over `(z_1, z_1d)`; `z_1d` is pinned to zero.
pub fn single_observation(form: &StroboscopeForm) -> Result<GaussianDist> {
    form.require(1)?;
    let var = -form.hbar * form.di[(0, 0)] / form.n_s;
    GaussianDist::with_pinned(
        DVector::from_vec(vec![form.mean[0], 0.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![var, 0.0])),
        vec![(1, 0.0)],
    )
}

/// Independent Gaussians in `z+ = z_2 + z_1` and `z- = z_2 - z_1` after
/// integrating out `z_1d`.
pub fn double_observation_marginal(form: &StroboscopeForm) -> Result<GaussianDist> {
    form.require(2)?;
    let (i0, it, _) = form.pair();
    if it.abs() >= i0.abs() {
        return Err(Error::Degenerate(format!(
            "|D^i(tau)| = {:.6e} reaches |D^i(0)| = {:.6e}; z- has no spread",
            it.abs(),
            i0.abs()
        )));
    }
    let s = -2.0 * form.hbar / form.n_s;
    let x = &form.mean;
    GaussianDist::new(
        DVector::from_vec(vec![x[1] + x[0], x[1] - x[0]]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![s * (i0 + it), s * (i0 - it)])),
    )
}

/// Exponent of the two-observation distribution,
///
/// ```text
///   (N_s / 2 hbar) [ a11 u1^2 + 2 i z_1d (b1 u1 + b2 u2) + c z_1d^2 ],   u = z - mean,
/// ```
///
/// with `z_2d` pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoObservationExponent {
    pub prefactor: f64,
    pub a11: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub mean: [f64; 2],
    pub pinned_zd2: f64,
}

impl TwoObservationExponent {
    pub fn exponent(&self, z1: f64, z2: f64, zd1: f64) -> Complex64 {
        let (u1, u2) = (z1 - self.mean[0], z2 - self.mean[1]);
        let lin = self.b1 * u1 + self.b2 * u2;
        Complex64::new(self.a11 * u1 * u1 + self.c * zd1 * zd1, 2.0 * zd1 * lin) * self.prefactor
    }

    /// Gaussian over `(z_1, z_2)` obtained by integrating `z_1d` out in
    /// closed form.
    pub fn integrate_zd1(&self) -> Result<GaussianDist> {
        if self.c >= 0.0 {
            return Err(Error::Degenerate(format!(
                "z_1d direction does not decay (c = {:.6e})",
                self.c
            )));
        }
        let q = DMatrix::from_row_slice(
            2,
            2,
            &[
                self.a11 + self.b1 * self.b1 / self.c,
                self.b1 * self.b2 / self.c,
                self.b1 * self.b2 / self.c,
                self.b2 * self.b2 / self.c,
            ],
        );
        // density ~ exp(prefactor u^T Q u), so covariance = -(2 prefactor Q)^{-1}
        let cov = (q * (-2.0 * self.prefactor))
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("marginal quadratic form is singular".into()))?;
        let cov = (&cov + cov.transpose()) * 0.5;
        GaussianDist::new(DVector::from_vec(self.mean.to_vec()), cov)
    }
}

pub fn full_two_observation(form: &StroboscopeForm) -> Result<TwoObservationExponent> {
    form.require(2)?;
    let (i0, it, rt) = form.pair();
    if rt.abs() <= MASS_SHELL_TOL * i0.abs() {
        return Err(Error::MassShell {
            tau: form.times[1] - form.times[0],
        });
    }
    Ok(TwoObservationExponent {
        prefactor: form.n_s / (2.0 * form.hbar),
        a11: 1.0 / i0,
        b1: -it / (i0 * rt),
        b2: 1.0 / rt,
        c: (i0 * i0 - it * it) / (i0 * rt * rt),
        mean: [form.mean[0], form.mean[1]],
        pinned_zd2: 0.0,
    })
}

/// Position `X = (z_1 + z_2)/2` and velocity `V = (z_2 - z_1)/tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityDistribution {
    pub dist: GaussianDist,
    pub tau: f64,
    pub sigma_product: f64,
    /// `hbar / 2 N_s`.
    pub uncertainty_bound: f64,
}

pub fn velocity_distribution(form: &StroboscopeForm) -> Result<VelocityDistribution> {
    form.require(2)?;
    let tau = form.times[1] - form.times[0];
    if tau <= 0.0 {
        return Err(Error::InvalidSchedule("velocity needs a positive spacing".into()));
    }
    let marginal = double_observation_marginal(form)?;
    let (vp, vm) = (marginal.variance(0), marginal.variance(1));
    let (mp, mm) = (marginal.mean()[0], marginal.mean()[1]);
    let (vx, vv) = (vp / 4.0, vm / (tau * tau));
    let dist = GaussianDist::new(
        DVector::from_vec(vec![mp / 2.0, mm / tau]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![vx, vv])),
    )?;
    Ok(VelocityDistribution {
        dist,
        tau,
        sigma_product: (vx * vv).sqrt(),
        uncertainty_bound: form.hbar / (2.0 * form.n_s),
    })
}

/// One-sided derivative `dD^i/dtau` at `0+`, by a Richardson-extrapolated
/// forward difference with step `h`.
pub fn one_sided_derivative<L: LagKernel + ?Sized>(lags: &L, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let d0 = lags.at(0.0)?.2;
    let f1 = (lags.at(h)?.2 - d0) / h;
    let f2 = (lags.at(2.0 * h)?.2 - d0) / (2.0 * h);
    Ok(2.0 * f1 - f2)
}

/// One row of the measurement sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_s: f64,
    pub tau: f64,
    pub var_z1: f64,
    pub var_plus: f64,
    pub var_minus: f64,
    pub var_x: f64,
    pub var_v: f64,
    pub sigma_product: f64,
}

/// Evaluates the single and double observation laws for measurements at
/// `0` and `tau` with zero mean.
pub fn sweep_row<L: LagKernel + ?Sized>(lags: &L, n_s: f64, tau: f64, hbar: f64) -> Result<SweepRow> {
    let one = StroboscopeForm::from_lags(
        lags,
        &MeasurementSchedule::new(vec![0.0])?,
        DVector::zeros(1),
        n_s,
        hbar,
    )?;
    let two = StroboscopeForm::from_lags(
        lags,
        &MeasurementSchedule::new(vec![0.0, tau])?,
        DVector::zeros(2),
        n_s,
        hbar,
    )?;
    let marginal = double_observation_marginal(&two)?;
    let vel = velocity_distribution(&two)?;
    Ok(SweepRow {
        n_s,
        tau,
        var_z1: single_observation(&one)?.variance(0),
        var_plus: marginal.variance(0),
        var_minus: marginal.variance(1),
        var_x: vel.dist.variance(0),
        var_v: vel.dist.variance(1),
        sigma_product: vel.sigma_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64, f64, f64);

    impl LagKernel for Fixed {
        fn at(&self, tau: f64) -> Result<(f64, f64, f64)> {
            if tau == 0.0 {
                Ok((0.0, 0.0, self.0))
            } else {
                let s = tau.signum();
                Ok((self.2 / 2.0, s * self.2 / 2.0, self.1))
            }
        }
    }

    fn form(i0: f64, it: f64, rt: f64) -> StroboscopeForm {
        let s = MeasurementSchedule::new(vec![0.0, 0.5]).unwrap();
        StroboscopeForm::from_lags(&Fixed(i0, it, rt), &s, DVector::from_vec(vec![1.0, 2.0]), 10.0, 1.0).unwrap()
    }

    #[test]
    fn schedule_must_increase() {
        assert!(MeasurementSchedule::new(vec![0.0, 0.0]).is_err());
        assert!(MeasurementSchedule::new(vec![]).is_err());
        assert!(MeasurementSchedule::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn retarded_part_is_causal() {
        let f = form(-1.0, -0.3, 0.7);
        let r = f.retarded();
        assert_eq!(r[(0, 0)], 0.0);
        assert_eq!(r[(0, 1)], 0.0);
        assert_eq!(r[(1, 0)], 0.7);
    }

    #[test]
    fn mass_shell_is_rejected() {
        assert!(matches!(
            full_two_observation(&form(-1.0, -0.3, 0.0)),
            Err(Error::MassShell { .. })
        ));
    }

    #[test]
    fn degenerate_correlation_is_rejected() {
        assert!(matches!(
            double_observation_marginal(&form(-1.0, -1.0, 0.5)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn positive_equal_time_imaginary_part_is_rejected() {
        let s = MeasurementSchedule::new(vec![0.0]).unwrap();
        let r = StroboscopeForm::from_lags(&Fixed(0.1, 0.0, 0.0), &s, DVector::zeros(1), 1.0, 1.0);
        assert!(matches!(r, Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn zero_slice_factorises() {
        let e = full_two_observation(&form(-1.0, -0.3, 0.7)).unwrap();
        let v = e.exponent(1.4, 2.0, 0.0);
        assert_eq!(v.im, 0.0);
        assert!((v.re - e.prefactor * 0.16 / -1.0).abs() < 1e-15);
    }
}
