//! A harmonic measuring apparatus: normal modes coupled linearly to the
//! ensemble average, read out through a weighted pointer coordinate
//! `y = (1/N_a) sum_n kappa_n y_n`.
//!
//! Block matrices are ordered `(+ branch, - branch)` as in [`crate::kernel`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, TimeGrid};
use crate::kernel::{block_of, decompose_block, inverse_layout, kernel_inverse, BlockMatrix, CtpKernel, Tolerances};
use crate::measure::{InterpolatedLags, MeasurementSchedule, StroboscopeForm};
use crate::propagators::LagKernel;
use crate::qclt::{
    coordinate_distribution_with, AverageAction, CoordinateDistribution, CoordinateOptions, GeneratorQuadratic,
};

/// Relative tolerance for the block relations of dressed and discrete
/// pointer propagators.
const BLOCK_TOL: f64 = 1e-9;

/// Condition number above which a stroboscope matrix counts as singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusMode {
    pub kernel: CtpKernel,
    pub g: f64,
    pub kappa: f64,
}

impl ApparatusMode {
    pub fn new(kernel: CtpKernel, g: f64, kappa: f64) -> Result<Self> {
        if !(g.is_finite() && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coupling g = {g}, kappa = {kappa}"
            )));
        }
        kernel.validate(Tolerances::default().structural * kernel.norm().max(1.0))?;
        Ok(Self { kernel, g, kappa })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointerModel {
    modes: Vec<ApparatusMode>,
    n_s: usize,
    system_kernel: CtpKernel,
    x_cl: DVector<f64>,
    hbar: f64,
}

impl PointerModel {
    /// All kernels share one grid and `x_cl` is sampled on it.
    pub fn new(
        modes: Vec<ApparatusMode>,
        n_s: usize,
        system_kernel: CtpKernel,
        x_cl: DVector<f64>,
        hbar: f64,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidParameter("apparatus needs at least one mode".into()));
        }
        if n_s == 0 {
            return Err(Error::InvalidParameter("N_s must be positive".into()));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if let Some(m) = modes.iter().find(|m| m.kernel.grid() != system_kernel.grid()) {
            return Err(Error::GridMismatch(format!(
                "mode grid {:?} differs from system grid {:?}",
                m.kernel.grid(),
                system_kernel.grid()
            )));
        }
        if x_cl.len() != system_kernel.len() {
            return Err(Error::GridMismatch(format!(
                "x_cl has {} samples, grid {}",
                x_cl.len(),
                system_kernel.len()
            )));
        }
        Ok(Self {
            modes,
            n_s,
            system_kernel,
            x_cl,
            hbar,
        })
    }

    pub fn modes(&self) -> &[ApparatusMode] {
        &self.modes
    }

    pub fn n_a(&self) -> usize {
        self.modes.len()
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn system_kernel(&self) -> &CtpKernel {
        &self.system_kernel
    }

    pub fn x_cl(&self) -> &DVector<f64> {
        &self.x_cl
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn with_ensemble_size(&self, n_s: usize) -> Result<Self> {
        Self::new(
            self.modes.clone(),
            n_s,
            self.system_kernel.clone(),
            self.x_cl.clone(),
            self.hbar,
        )
    }
}

/// Couplings `g_n sum_l delta(t - t_l)` acting only at the schedule times.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCouplingSchedule {
    pub schedule: MeasurementSchedule,
}

impl DiscreteCouplingSchedule {
    pub fn new(schedule: MeasurementSchedule) -> Self {
        Self { schedule }
    }
}

fn weight_diag(k: &CtpKernel, inverse: bool) -> DVector<Complex64> {
    let w = k.grid().weights();
    let n = w.len();
    DVector::from_fn(2 * n, |i, _| {
        let v = if inverse { 1.0 / w[i % n] } else { w[i % n] };
        Complex64::new(v, 0.0)
    })
}

fn scale_columns(m: &mut DMatrix<Complex64>, d: &DVector<Complex64>) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col *= d[j];
    }
}

/// `G_D = [G^-1 + (g / N_s) sigma D sigma]^-1`.
///
/// Frequency kernels are dressed pointwise through the inverse kernels.
/// Time kernels use the resolvent `G (1 + (g/N_s) sigma D sigma G)^-1`,
/// which stays finite for causal kernels whose own inverse does not exist.
pub fn dressed_mode_kernel(mode: &ApparatusMode, n_s: usize, d: &CtpKernel) -> Result<CtpKernel> {
    if n_s == 0 {
        return Err(Error::InvalidParameter("N_s must be positive".into()));
    }
    let g = &mode.kernel;
    if g.grid() != d.grid() {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", g.grid(), d.grid())));
    }
    let c = mode.g / n_s as f64;
    if c == 0.0 {
        return Ok(g.clone());
    }
    match g.domain() {
        Domain::Frequency => kernel_inverse(&kernel_inverse(g)?.add_scaled(d, c)?),
        Domain::Time => {
            let w = weight_diag(g, false);
            let mut p = block_of(g).into_matrix();
            scale_columns(&mut p, &w);
            let mut s = inverse_layout(d).into_matrix();
            scale_columns(&mut s, &w);
            let m = DMatrix::identity(p.nrows(), p.ncols()) + (s * &p) * Complex64::new(c, 0.0);
            // R = P M^-1, solved as M^T R^T = P^T
            let rt = m.transpose().lu().solve(&p.transpose()).ok_or(Error::SingularKernel {
                condition: f64::INFINITY,
            })?;
            let mut r = rt.transpose();
            scale_columns(&mut r, &weight_diag(g, true));
            let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
            decompose_block(
                &BlockMatrix::new(*g.grid(), r)?,
                BLOCK_TOL * scale.max(f64::MIN_POSITIVE),
            )
        }
    }
}

fn dressed_modes(p: &PointerModel) -> Result<Vec<CtpKernel>> {
    p.modes
        .iter()
        .map(|m| dressed_mode_kernel(m, p.n_s, &p.system_kernel))
        .collect()
}

/// `y_cl(t) = (1/N_a) sum_n kappa_n g_n int dt' G^r_{D,n}(t, t') x_cl(t')`.
pub fn pointer_trajectory_cont(p: &PointerModel) -> Result<DVector<f64>> {
    if p.system_kernel.domain() != Domain::Time {
        return Err(Error::DomainMismatch { expected: "time" });
    }
    let n_a = p.n_a() as f64;
    let mut y = DVector::zeros(p.x_cl.len());
    for (mode, dressed) in p.modes.iter().zip(dressed_modes(p)?) {
        let weight = mode.kappa * mode.g / n_a;
        if weight != 0.0 {
            y += dressed.apply_retarded(&p.x_cl)? * weight;
        }
    }
    Ok(y)
}

/// `G_P = (1/N_a) sum_n kappa_n^2 G_{D,n}`.
pub fn pointer_kernel(p: &PointerModel) -> Result<CtpKernel> {
    let n_a = p.n_a() as f64;
    let mut acc = CtpKernel::zeros(*p.system_kernel.grid());
    for (mode, dressed) in p.modes.iter().zip(dressed_modes(p)?) {
        acc = acc.add_scaled(&dressed, mode.kappa * mode.kappa / n_a)?;
    }
    Ok(acc)
}

/// Pointer law: trajectories are Gaussian around `y_cl` with covariance
/// `-hbar G_P^i / N_a`; the branch difference is damped by `(G_P^-1)^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerDistribution {
    pub law: CoordinateDistribution,
    pub kernel: CtpKernel,
    pub n_a: usize,
    pub hbar: f64,
}

impl PointerDistribution {
    /// `(G_P^-1)^i = -(G_P^r)^-1 G_P^i (G_P^a)^-1`.
    pub fn decoherence_kernel(&self) -> Result<CtpKernel> {
        Ok(self.action()?.inverse)
    }

    /// Pointer action with the ensemble size replaced by `N_a`; its
    /// imaginary part on `y_d` is the pointer decoherence.
    pub fn action(&self) -> Result<AverageAction> {
        Ok(AverageAction {
            n_s: self.n_a,
            mean: DVector::zeros(self.kernel.len()),
            inverse: kernel_inverse(&self.kernel)?,
            hbar: self.hbar,
        })
    }
}

pub fn pointer_distribution(p: &PointerModel) -> Result<PointerDistribution> {
    pointer_distribution_with(p, CoordinateOptions::default())
}

pub fn pointer_distribution_with(p: &PointerModel, opts: CoordinateOptions) -> Result<PointerDistribution> {
    let kernel = pointer_kernel(p)?;
    let mean = match kernel.domain() {
        Domain::Time => pointer_trajectory_cont(p)?,
        // amplitudes are centred; the classical response lives in the time domain
        Domain::Frequency => DVector::zeros(kernel.len()),
    };
    let w = GeneratorQuadratic::new(mean, kernel.clone(), p.hbar)?;
    Ok(PointerDistribution {
        law: coordinate_distribution_with(&w, p.n_a(), opts)?,
        kernel,
        n_a: p.n_a(),
        hbar: p.hbar,
    })
}

/// Pointer under couplings acting at the schedule times only.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePointer {
    pub times: Vec<f64>,
    /// `y_cl` on the time grid.
    pub trajectory: DVector<f64>,
    /// `(1 - (N_a/N_s) D^r G^r_gg)^-1` over schedule indices.
    pub feedback: DMatrix<f64>,
    /// `G_{P,discr}` on the time grid.
    pub propagator: BlockMatrix,
}

impl DiscretePointer {
    pub fn kernel(&self) -> Result<CtpKernel> {
        let scale = self.propagator.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        decompose_block(&self.propagator, BLOCK_TOL * scale.max(f64::MIN_POSITIVE))
    }
}

fn lag_block(v: (f64, f64, f64)) -> [[Complex64; 2]; 2] {
    let (n, f, i) = v;
    [
        [Complex64::new(n, i), Complex64::new(-f, i)],
        [Complex64::new(f, i), Complex64::new(-n, i)],
    ]
}

/// `2 rows x 2 cols` block matrix with entry `(a, b)` built from `lag(a, b)`.
fn lag_matrix(
    rows: usize,
    cols: usize,
    mut lag: impl FnMut(usize, usize) -> Result<(f64, f64, f64)>,
) -> Result<DMatrix<Complex64>> {
    let mut m = DMatrix::zeros(2 * rows, 2 * cols);
    for a in 0..rows {
        for b in 0..cols {
            let blk = lag_block(lag(a, b)?);
            for (s, row) in blk.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    m[(s * rows + a, t * cols + b)] = *v;
                }
            }
        }
    }
    Ok(m)
}

fn metric(n: usize) -> DVector<Complex64> {
    DVector::from_fn(2 * n, |i, _| Complex64::new(if i < n { 1.0 } else { -1.0 }, 0.0))
}

fn smallest_singular(m: &DMatrix<Complex64>) -> (f64, f64) {
    let sv = m.clone().singular_values();
    (sv.min(), sv.max())
}

fn invert_stroboscope(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (min, max) = smallest_singular(&m);
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::SingularStroboscope { smallest: min });
    }
    m.try_inverse().ok_or(Error::SingularStroboscope { smallest: min })
}

fn interpolate(grid: &TimeGrid, x: &DVector<f64>, t: f64) -> f64 {
    let s = ((t - grid.start()) / grid.dt()).clamp(0.0, (grid.len() - 1) as f64);
    let i = (s.floor() as usize).min(grid.len().saturating_sub(2));
    let f = s - i as f64;
    if grid.len() == 1 {
        return x[0];
    }
    x[i] + f * (x[i + 1] - x[i])
}

/// Pointer trajectory and propagator for couplings at the schedule times.
///
/// The branch difference at the last time is pinned, so the stroboscope
/// inverse is taken on the remaining `2 N_m - 1` coordinates.
pub fn discrete_pointer(p: &PointerModel, dsc: &DiscreteCouplingSchedule) -> Result<DiscretePointer> {
    let Grid::Time(tg) = *p.system_kernel.grid() else {
        return Err(Error::DomainMismatch { expected: "time" });
    };
    let times = dsc.schedule.times();
    let m = times.len();
    let nt = tg.len();
    let n_a = p.n_a() as f64;
    let n_s = p.n_s as f64;
    let grid_t = tg.points();

    let mean = DVector::from_iterator(m, times.iter().map(|&t| interpolate(&tg, &p.x_cl, t)));
    let form = crate::measure::sample_kernel_at_times(&p.system_kernel, &dsc.schedule, mean.clone(), n_s, p.hbar)?;
    let lags = p
        .modes
        .iter()
        .map(|md| InterpolatedLags::new(&md.kernel))
        .collect::<Result<Vec<_>>>()?;

    let averaged = |rows: &[f64], cols: &[f64], weight: &dyn Fn(&ApparatusMode) -> f64| {
        let mut acc = DMatrix::zeros(2 * rows.len(), 2 * cols.len());
        for (md, l) in p.modes.iter().zip(&lags) {
            let w = weight(md) / n_a;
            if w != 0.0 {
                acc += lag_matrix(rows.len(), cols.len(), |a, b| l.at(rows[a] - cols[b]))? * Complex64::new(w, 0.0);
            }
        }
        Ok::<_, Error>(acc)
    };
    let g_kg = averaged(grid_t.as_slice(), times, &|md| md.kappa * md.g)?;
    let g_gg = averaged(times, times, &|md| md.g * md.g)?;

    let mut free = CtpKernel::zeros(*p.system_kernel.grid());
    for md in &p.modes {
        free = free.add_scaled(&md.kernel, md.kappa * md.kappa / (n_a * n_a))?;
    }

    let d_block = stroboscope_block(&form);
    let (t_mat, t_inv) = average_difference_basis(m);
    let q = &t_inv * &d_block * t_inv.transpose();
    let pinned = 2 * m - 1;
    let scale = q.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let leak = (0..2 * m)
        .map(|i| q[(pinned, i)].norm().max(q[(i, pinned)].norm()))
        .fold(0.0, f64::max);
    if leak > 1e-12 * scale {
        return Err(Error::InvalidKernel(format!(
            "last branch difference is not pinned (coupling {leak:.3e})"
        )));
    }
    let keep = |mat: &DMatrix<Complex64>, rows: bool, cols: bool| {
        let r = if rows { pinned } else { mat.nrows() };
        let c = if cols { pinned } else { mat.ncols() };
        DMatrix::from_fn(r, c, |i, j| mat[(i, j)])
    };
    let q_red = keep(&q, true, true);
    let z_red = invert_stroboscope(q_red)?;

    let sigma_m = metric(m);
    let a = DMatrix::from_fn(2 * m, 2 * m, |i, j| g_gg[(i, j)] * sigma_m[i] * sigma_m[j] * n_a);
    let te = keep(&t_mat, false, true);
    let a_red = te.transpose() * &a * &te;
    let k_inv = invert_stroboscope(z_red * Complex64::new(n_s, 0.0) - a_red)?;

    let mut left = g_kg.clone();
    scale_columns(&mut left, &sigma_m);
    let left = left * &te;
    let correction = &left * k_inv * left.transpose();
    let propagator = BlockMatrix::new(*p.system_kernel.grid(), block_of(&free).into_matrix() + correction)?;

    // retarded form of the trajectory
    let dr = form.retarded();
    let ggr = DMatrix::from_fn(m, m, |a, b| g_gg[(a, b)].re - g_gg[(a, m + b)].re);
    let gkgr = DMatrix::from_fn(nt, m, |a, b| g_kg[(a, b)].re - g_kg[(a, m + b)].re);
    let f_inv = DMatrix::identity(m, m) - (&dr * &ggr) * (n_a / n_s);
    let feedback = f_inv
        .try_inverse()
        .ok_or(Error::SingularStroboscope { smallest: 0.0 })?;
    let trajectory = gkgr * (&feedback * mean);

    Ok(DiscretePointer {
        times: times.to_vec(),
        trajectory,
        feedback,
        propagator,
    })
}

/// Block matrix of the stroboscope kernel, ordered `(+ times, - times)`.
pub fn stroboscope_block(form: &StroboscopeForm) -> DMatrix<Complex64> {
    let m = form.len();
    lag_matrix(m, m, |a, b| {
        Ok((form.dn()[(a, b)], form.df()[(a, b)], form.di()[(a, b)]))
    })
    .expect("infallible")
}

/// `x~ = T (x, x_d)` with `x_pm = x +- x_d / 2`; returns `(T, T^-1)`.
fn average_difference_basis(m: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let mut t = DMatrix::zeros(2 * m, 2 * m);
    let mut ti = DMatrix::zeros(2 * m, 2 * m);
    let c = |v: f64| Complex64::new(v, 0.0);
    for l in 0..m {
        t[(l, l)] = c(1.0);
        t[(l, m + l)] = c(0.5);
        t[(m + l, l)] = c(1.0);
        t[(m + l, m + l)] = c(-0.5);
        ti[(l, l)] = c(0.5);
        ti[(l, m + l)] = c(0.5);
        ti[(m + l, l)] = c(1.0);
        ti[(m + l, m + l)] = c(-1.0);
    }
    (t, ti)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_inverse() {
        let (t, ti) = average_difference_basis(3);
        let id = &t * &ti;
        assert!((id - DMatrix::identity(6, 6)).iter().all(|z| z.norm() < 1e-15));
    }
}
