use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::oscillator::sign;
use super::DrudeModel;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::kernel::CtpKernel;
use crate::quadrature::{integrate, QuadratureOptions};

/// Non-negative spectral density `rho(Omega)` on `(0, omega_max]`.
#[derive(Clone)]
pub struct SpectralDensity {
    rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    omega_max: f64,
    m: f64,
    features: Vec<f64>,
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralDensity")
            .field("omega_max", &self.omega_max)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl SpectralDensity {
    pub fn new(rho: impl Fn(f64) -> f64 + Send + Sync + 'static, omega_max: f64, m: f64) -> Result<Self> {
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(Error::InvalidSpectralDensity(format!(
                "omega_max must be positive, got {omega_max}"
            )));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {m}")));
        }
        Ok(Self {
            rho: Arc::new(rho),
            omega_max,
            m,
            features: Vec::new(),
        })
    }

    /// Adds frequencies where `rho` has structure narrower than the
    /// default panel width; the quadrature splits there.
    pub fn with_features(mut self, omegas: impl IntoIterator<Item = f64>) -> Self {
        self.features
            .extend(omegas.into_iter().filter(|w| *w > 0.0 && *w < self.omega_max));
        self
    }

    pub fn drude(model: &DrudeModel, omega_max: f64) -> Result<Self> {
        model.validate()?;
        let model = *model;
        Self::new(move |w| model.spectral_density(w), omega_max, model.m)
    }

    pub fn zero(omega_max: f64, m: f64) -> Result<Self> {
        Self::new(|_| 0.0, omega_max, m)
    }

    /// `rho(Omega)`, zero for `Omega <= 0` and beyond the cutoff.
    pub fn eval(&self, omega: f64) -> f64 {
        if omega <= 0.0 || omega > self.omega_max {
            0.0
        } else {
            (self.rho)(omega)
        }
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn mass(&self) -> f64 {
        self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Lorentzian width in the variable `omega^2 - Omega^2`; `None` picks
    /// `1e-14 * omega_max^2`.
    pub epsilon: Option<f64>,
    pub quadrature: QuadratureOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            quadrature: QuadratureOptions {
                abs_tol: 1e-10,
                rel_tol: 1e-10,
                max_panels: 50_000,
            },
        }
    }
}

const INITIAL_PANELS: usize = 64;

pub fn synthesize_from_spectral(rho: &SpectralDensity, grid: FrequencyGrid) -> Result<CtpKernel> {
    synthesize_with(rho, grid, SynthesisOptions::default())
}

/// Superposes oscillator kernels, `D(omega) = 2 int dOmega Omega rho(Omega) D_Omega(omega)`.
///
/// Integrates in `u = Omega^2`, where the weight becomes `rho(sqrt u) du`
/// and each oscillator contributes `1 / (m (omega^2 - u + i eps))`.
pub fn synthesize_with(rho: &SpectralDensity, grid: FrequencyGrid, opts: SynthesisOptions) -> Result<CtpKernel> {
    let u_max = rho.omega_max * rho.omega_max;
    let eps = opts.epsilon.unwrap_or(1e-14 * u_max);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let negative = Cell::new(None::<(f64, f64)>);
    let weight = |u: f64| {
        let w = u.max(0.0).sqrt();
        let r = rho.eval(w);
        if r < 0.0 || !r.is_finite() {
            negative.set(Some((w, r)));
        }
        r
    };

    let mut vals = Vec::with_capacity(grid.len());
    for w in grid.points() {
        let w2 = w * w;
        let mut pts: Vec<f64> = (0..=INITIAL_PANELS)
            .map(|k| (rho.omega_max * k as f64 / INITIAL_PANELS as f64).powi(2))
            .chain(rho.features.iter().map(|w| w * w))
            .collect();
        let mut d = eps;
        while d < u_max {
            for p in [w2 - d, w2 + d] {
                if p > 0.0 && p < u_max {
                    pts.push(p);
                }
            }
            d *= 10.0;
        }
        if w2 < u_max {
            pts.push(w2);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();

        let negative_err =
            |at: f64, value: f64| Error::InvalidSpectralDensity(format!("rho({at}) = {value} is negative"));
        let n_res = integrate(
            |u| {
                let x = w2 - u;
                weight(u) * x / (x * x + eps * eps)
            },
            &pts,
            opts.quadrature,
        );
        if let Some((at, value)) = negative.get() {
            return Err(negative_err(at, value));
        }
        let (n_int, _) = n_res?;
        let (i_int, _) = integrate(
            |u| {
                let x = w2 - u;
                weight(u) * eps / (x * x + eps * eps)
            },
            &pts,
            opts.quadrature,
        )?;
        let di = -i_int / rho.m;
        vals.push((n_int / rho.m, sign(w) * di, di));
    }
    let col = |f: fn(&(f64, f64, f64)) -> f64| DMatrix::from_iterator(vals.len(), 1, vals.iter().map(f));
    CtpKernel::new(grid.into(), col(|v| v.0), col(|v| v.1), col(|v| v.2))
}
