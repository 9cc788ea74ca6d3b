//! CTP two-point functions and their block algebra.
//!
//! A kernel stores the three real components `(D^n, D^f, D^i)`. The 2x2
//! closed-time-path block is
//!
//! ```text
//!   D++ =  Dn + i Di     D+- = -Df + i Di
//!   D-+ =  Df + i Di     D-- = -Dn + i Di
//! ```
//!
//! and the retarded/advanced parts are `D^r = Dn + Df`, `D^a = Dn - Df`.
//!
//! Time-domain kernels are dense `n x n` matrices sampled at grid points.
//! Operator products and inverses fold in the trapezoidal weights `W`: a
//! kernel `A` acts on a function as `A W x`.
//!
//! Frequency-domain kernels are diagonal (time-translation invariance makes
//! every operator a multiplication) and are stored as `n x 1` columns of
//! their diagonal values. There `Df(omega)` is purely imaginary; the `df`
//! slot stores its imaginary coefficient, `Df = i * df`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid};

/// Tolerances for structural checks and inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance for symmetry and block-structure checks.
    pub structural: f64,
    /// Largest accepted condition number of a retarded operator.
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-12,
            max_condition: 1e12,
        }
    }
}

/// The triple `(D^n, D^f, D^i)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CtpKernel {
    grid: Grid,
    dn: DMatrix<f64>,
    df: DMatrix<f64>,
    di: DMatrix<f64>,
}

impl CtpKernel {
    /// Builds a kernel and validates the symmetry invariants.
    pub fn new(grid: Grid, dn: DMatrix<f64>, df: DMatrix<f64>, di: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(grid, dn, df, di, Tolerances::default().structural)
    }

    pub fn with_tolerance(grid: Grid, dn: DMatrix<f64>, df: DMatrix<f64>, di: DMatrix<f64>, tol: f64) -> Result<Self> {
        let k = Self::from_parts(grid, dn, df, di)?;
        k.validate(tol)?;
        Ok(k)
    }

    /// Builds a kernel checking only shapes. Products of kernels are in
    /// general not symmetric, so they come out through this constructor.
    pub fn from_parts(grid: Grid, dn: DMatrix<f64>, df: DMatrix<f64>, di: DMatrix<f64>) -> Result<Self> {
        let n = grid.len();
        let shape = match grid.domain() {
            Domain::Time => (n, n),
            Domain::Frequency => (n, 1),
        };
        for (name, m) in [("dn", &dn), ("df", &df), ("di", &di)] {
            if m.shape() != shape {
                return Err(Error::InvalidKernel(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidKernel(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self { grid, dn, df, di })
    }

    /// Time-domain kernel from lag functions, `D(t_i - t_j)`.
    pub fn from_lags(grid: crate::grid::TimeGrid, lag: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self> {
        let n = grid.len();
        let dt = grid.dt();
        let lags: Vec<(f64, f64, f64)> = (0..2 * n - 1)
            .map(|k| lag((k as f64 - (n as f64 - 1.0)) * dt))
            .collect();
        Self::from_lag_table(grid, &lags)
    }

    /// Toeplitz kernel from `2n - 1` lag values ordered from `-(n-1) dt`
    /// to `(n-1) dt`.
    pub fn from_lag_table(grid: crate::grid::TimeGrid, lags: &[(f64, f64, f64)]) -> Result<Self> {
        let n = grid.len();
        if lags.len() != 2 * n - 1 {
            return Err(Error::GridMismatch(format!("{} lags for {n} grid points", lags.len())));
        }
        let at = |i: usize, j: usize| lags[i + n - 1 - j];
        let dn = DMatrix::from_fn(n, n, |i, j| at(i, j).0);
        let df = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { at(i, j).1 });
        let di = DMatrix::from_fn(n, n, |i, j| at(i, j).2);
        Self::new(grid.into(), dn, df, di)
    }

    /// Frequency-domain kernel from pointwise values `(n, f, i)`, with
    /// `f` the imaginary coefficient of `D^f`.
    pub fn from_spectrum(grid: crate::grid::FrequencyGrid, value: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self> {
        let vals: Vec<(f64, f64, f64)> = grid.points().into_iter().map(value).collect();
        let n = vals.len();
        let dn = DMatrix::from_iterator(n, 1, vals.iter().map(|v| v.0));
        let df = DMatrix::from_iterator(n, 1, vals.iter().map(|v| v.1));
        let di = DMatrix::from_iterator(n, 1, vals.iter().map(|v| v.2));
        Self::new(grid.into(), dn, df, di)
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        let c = match grid.domain() {
            Domain::Time => n,
            Domain::Frequency => 1,
        };
        Self {
            grid,
            dn: DMatrix::zeros(n, c),
            df: DMatrix::zeros(n, c),
            di: DMatrix::zeros(n, c),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.grid.domain()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `D^n`; an `n x 1` column of diagonal values in the frequency domain.
    pub fn dn(&self) -> &DMatrix<f64> {
        &self.dn
    }

    pub fn df(&self) -> &DMatrix<f64> {
        &self.df
    }

    pub fn di(&self) -> &DMatrix<f64> {
        &self.di
    }

    /// Checks the symmetry invariants of a physical kernel.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.len();
        match self.domain() {
            Domain::Time => {
                let dev = |m: &DMatrix<f64>, sign: f64| {
                    let mut worst = 0.0f64;
                    for i in 0..n {
                        for j in 0..n {
                            worst = worst.max((m[(i, j)] - sign * m[(j, i)]).abs());
                        }
                    }
                    worst
                };
                for (what, m, s) in [
                    ("Dn must be symmetric", &self.dn, 1.0),
                    ("Di must be symmetric", &self.di, 1.0),
                    ("Df must be antisymmetric", &self.df, -1.0),
                ] {
                    let d = dev(m, s);
                    if d > tol {
                        return Err(Error::InvalidKernel(format!("{what} (deviation {d:.3e})")));
                    }
                }
            }
            Domain::Frequency => {
                for k in 0..n {
                    let q = n - 1 - k;
                    let even_n = (self.dn[k] - self.dn[q]).abs();
                    let even_i = (self.di[k] - self.di[q]).abs();
                    let odd_f = (self.df[k] + self.df[q]).abs();
                    if even_n > tol || even_i > tol || odd_f > tol {
                        return Err(Error::InvalidKernel(format!(
                            "parity violated at omega index {k}: Dn, Di must be even and Df odd"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Componentwise linear combination `self + s * other`.
    pub fn add_scaled(&self, other: &CtpKernel, s: f64) -> Result<CtpKernel> {
        same_grid(self, other)?;
        Ok(CtpKernel {
            grid: self.grid,
            dn: &self.dn + &other.dn * s,
            df: &self.df + &other.df * s,
            di: &self.di + &other.di * s,
        })
    }

    pub fn scale(&self, s: f64) -> CtpKernel {
        CtpKernel {
            grid: self.grid,
            dn: &self.dn * s,
            df: &self.df * s,
            di: &self.di * s,
        }
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &CtpKernel) -> f64 {
        let d = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax();
        d(&self.dn, &other.dn)
            .max(d(&self.df, &other.df))
            .max(d(&self.di, &other.di))
    }

    /// Frobenius norm of the three components taken together.
    pub fn norm(&self) -> f64 {
        (self.dn.norm_squared() + self.df.norm_squared() + self.di.norm_squared()).sqrt()
    }

    /// Lag values `(Dn, Df, Di)` at `k dt`, `k = -(n-1)..=(n-1)`, of a
    /// time-translation-invariant kernel. `rel_tol` bounds the accepted
    /// Toeplitz deviation relative to the largest entry.
    pub fn lag_table(&self, rel_tol: f64) -> Result<Vec<(f64, f64, f64)>> {
        if self.domain() != Domain::Time {
            return Err(Error::DomainMismatch { expected: "time" });
        }
        let n = self.len();
        let scale = self.dn.amax().max(self.df.amax()).max(self.di.amax());
        let lag = |m: &DMatrix<f64>, k: isize| {
            if k >= 0 {
                m[(k as usize, 0)]
            } else {
                m[(0, (-k) as usize)]
            }
        };
        let mut worst = 0.0f64;
        for m in [&self.dn, &self.df, &self.di] {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((m[(i, j)] - lag(m, i as isize - j as isize)).abs());
                }
            }
        }
        if worst > rel_tol * scale {
            return Err(Error::NotToeplitz(worst));
        }
        Ok((-(n as isize - 1)..n as isize)
            .map(|k| (lag(&self.dn, k), lag(&self.df, k), lag(&self.di, k)))
            .collect())
    }

    fn weights(&self) -> Option<DVector<f64>> {
        match self.grid {
            Grid::Time(g) => Some(g.weights()),
            Grid::Frequency(_) => None,
        }
    }

    /// Retarded response applied to a function sampled on a time grid,
    /// `(D^r x)(t) = sum_j D^r(t, t_j) w_j x_j`.
    pub fn apply_retarded(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (r, _) = retarded_advanced(self)?;
        let w = self.weights().expect("time domain");
        Ok(r * x.component_mul(&w))
    }
}

fn same_grid(a: &CtpKernel, b: &CtpKernel) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)));
    }
    Ok(())
}

/// The `2n x 2n` CTP block matrix, ordered `(+ block, - block)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    grid: Grid,
    data: DMatrix<Complex64>,
}

/// Branch index of the closed time path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn offset(self, n: usize) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => n,
        }
    }
}

impl BlockMatrix {
    pub fn new(grid: Grid, data: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.len();
        if data.shape() != (2 * n, 2 * n) {
            return Err(Error::InvalidKernel(format!(
                "block matrix has shape {:?}, expected {}x{}",
                data.shape(),
                2 * n,
                2 * n
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn block(&self, row: Branch, col: Branch) -> DMatrix<Complex64> {
        let n = self.grid.len();
        self.data.view((row.offset(n), col.offset(n)), (n, n)).into_owned()
    }

    /// Elementwise maximum of `|D++ + D-- - D+- - D-+|`.
    pub fn block_identity_deviation(&self) -> f64 {
        use Branch::*;
        let s = self.block(Plus, Plus) + self.block(Minus, Minus) - self.block(Plus, Minus) - self.block(Minus, Plus);
        s.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Conjugation by the CTP metric `diag(1, -1)`.
    pub fn metric_conjugate(&self) -> BlockMatrix {
        let n = self.grid.len();
        let mut data = self.data.clone();
        for i in 0..2 * n {
            for j in 0..2 * n {
                if (i < n) != (j < n) {
                    data[(i, j)] = -data[(i, j)];
                }
            }
        }
        BlockMatrix { grid: self.grid, data }
    }
}

/// Assembles the block matrix of a validated kernel.
pub fn assemble_block(k: &CtpKernel) -> Result<BlockMatrix> {
    k.validate(Tolerances::default().structural)?;
    Ok(block_of(k))
}

/// Block layout without validation (used for products and diagnostics).
pub fn block_of(k: &CtpKernel) -> BlockMatrix {
    let n = k.len();
    let freq = k.domain() == Domain::Frequency;
    let at = |m: &DMatrix<f64>, i: usize, j: usize| match (freq, i == j) {
        (false, _) => m[(i, j)],
        (true, true) => m[i],
        (true, false) => 0.0,
    };
    let mut data = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let dn = Complex64::new(at(&k.dn, i, j), 0.0);
            let idi = Complex64::new(0.0, at(&k.di, i, j));
            let df = if freq {
                Complex64::new(0.0, at(&k.df, i, j))
            } else {
                Complex64::new(at(&k.df, i, j), 0.0)
            };
            data[(i, j)] = dn + idi;
            data[(i, n + j)] = -df + idi;
            data[(n + i, j)] = df + idi;
            data[(n + i, n + j)] = -dn + idi;
        }
    }
    BlockMatrix { grid: k.grid, data }
}

/// Layout of an inverse propagator, `sigma Block(K) sigma`.
pub fn inverse_layout(k: &CtpKernel) -> BlockMatrix {
    block_of(k).metric_conjugate()
}

/// Recovers the kernel components from a block matrix, checking every
/// block relation against `tol`.
pub fn decompose_block(m: &BlockMatrix, tol: f64) -> Result<CtpKernel> {
    use Branch::*;
    let pp = m.block(Plus, Plus);
    let pm = m.block(Plus, Minus);
    let mp = m.block(Minus, Plus);
    let mm = m.block(Minus, Minus);
    let n = m.grid.len();

    let check = |relation: &'static str, dev: f64| -> Result<()> {
        if dev > tol {
            Err(Error::BlockStructure {
                relation,
                deviation: dev,
                tolerance: tol,
            })
        } else {
            Ok(())
        }
    };
    let max_over = |f: &dyn Fn(usize, usize) -> f64| {
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(f(i, j));
            }
        }
        worst
    };

    check("D++ + D-- = D+- + D-+", m.block_identity_deviation())?;
    check(
        "Re D-- = -Re D++",
        max_over(&|i, j| (pp[(i, j)].re + mm[(i, j)].re).abs()),
    )?;
    check(
        "Im D-- = Im D++",
        max_over(&|i, j| (pp[(i, j)].im - mm[(i, j)].im).abs()),
    )?;

    let frequency = m.grid.domain() == Domain::Frequency;
    if frequency {
        check(
            "frequency-domain blocks are diagonal",
            max_over(&|i, j| {
                if i == j {
                    0.0
                } else {
                    pp[(i, j)]
                        .norm()
                        .max(pm[(i, j)].norm())
                        .max(mp[(i, j)].norm())
                        .max(mm[(i, j)].norm())
                }
            }),
        )?;
        check(
            "Re D+- = Re D-+ = 0",
            max_over(&|i, j| pm[(i, j)].re.abs().max(mp[(i, j)].re.abs())),
        )?;
        check(
            "Im (D+- + D-+)/2 = Im D++",
            max_over(&|i, j| (0.5 * (pm[(i, j)].im + mp[(i, j)].im) - pp[(i, j)].im).abs()),
        )?;
    } else {
        check(
            "Im D+- = Im D++",
            max_over(&|i, j| (pm[(i, j)].im - pp[(i, j)].im).abs()),
        )?;
        check(
            "Im D-+ = Im D++",
            max_over(&|i, j| (mp[(i, j)].im - pp[(i, j)].im).abs()),
        )?;
        check(
            "Re D+- = -Re D-+",
            max_over(&|i, j| (pm[(i, j)].re + mp[(i, j)].re).abs()),
        )?;
    }

    if frequency {
        let dn = DMatrix::from_fn(n, 1, |i, _| pp[(i, i)].re);
        let di = DMatrix::from_fn(n, 1, |i, _| pp[(i, i)].im);
        let df = DMatrix::from_fn(n, 1, |i, _| (0.5 * (mp[(i, i)] - pm[(i, i)])).im);
        return CtpKernel::from_parts(m.grid, dn, df, di);
    }
    let dn = DMatrix::from_fn(n, n, |i, j| pp[(i, j)].re);
    let di = DMatrix::from_fn(n, n, |i, j| pp[(i, j)].im);
    let df = DMatrix::from_fn(n, n, |i, j| (0.5 * (mp[(i, j)] - pm[(i, j)])).re);
    CtpKernel::from_parts(m.grid, dn, df, di)
}

/// `(D^r, D^a)` of a time-domain kernel.
pub fn retarded_advanced(k: &CtpKernel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if k.domain() != Domain::Time {
        return Err(Error::DomainMismatch { expected: "time" });
    }
    Ok((&k.dn + &k.df, &k.dn - &k.df))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse kernel: `(D^-1)^r = (D^r)^-1`, `(D^-1)^a = (D^a)^-1`,
/// `(D^-1)^i = -(D^r)^-1 D^i (D^a)^-1`.
///
/// The result satisfies `Block(K) W sigma Block(K^-1) sigma W = 1` (see
/// [`inverse_residual`]).
pub fn kernel_inverse(k: &CtpKernel) -> Result<CtpKernel> {
    kernel_inverse_with(k, Tolerances::default())
}

pub fn kernel_inverse_with(k: &CtpKernel, tol: Tolerances) -> Result<CtpKernel> {
    let n = k.len();
    match k.domain() {
        Domain::Time => {
            let w = k.weights().expect("time grid");
            let winv = w.map(|x| 1.0 / x);
            let r_op = (&k.dn + &k.df) * DMatrix::from_diagonal(&w);
            let cond = condition_number(&r_op);
            if !(cond.is_finite() && cond <= tol.max_condition) {
                return Err(Error::SingularKernel { condition: cond });
            }
            let r_op_inv = r_op
                .clone()
                .lu()
                .try_inverse()
                .ok_or(Error::SingularKernel { condition: cond })?;
            let a_op_inv = ((&k.dn - &k.df) * DMatrix::from_diagonal(&w))
                .lu()
                .try_inverse()
                .ok_or(Error::SingularKernel { condition: cond })?;
            let wi = DMatrix::from_diagonal(&winv);
            let r_inv = &r_op_inv * &wi;
            let a_inv = &a_op_inv * &wi;
            let i_op = -(&r_op_inv * (&k.di * DMatrix::from_diagonal(&w)) * &a_op_inv);
            let i_inv = i_op * &wi;
            let dn = (&r_inv + &a_inv) * 0.5;
            let df = (&r_inv - &a_inv) * 0.5;
            CtpKernel::from_parts(k.grid, dn, df, i_inv)
        }
        Domain::Frequency => {
            let mut dn = DMatrix::zeros(n, 1);
            let mut df = DMatrix::zeros(n, 1);
            let mut di = DMatrix::zeros(n, 1);
            let scale = (0..n)
                .map(|q| Complex64::new(k.dn[q], k.df[q]).norm())
                .fold(0.0, f64::max);
            for q in 0..n {
                let r = Complex64::new(k.dn[q], k.df[q]);
                if r.norm() == 0.0 || scale / r.norm() > tol.max_condition {
                    let condition = if r.norm() == 0.0 {
                        f64::INFINITY
                    } else {
                        scale / r.norm()
                    };
                    return Err(Error::SingularKernel { condition });
                }
                let ri = r.inv();
                dn[q] = ri.re;
                df[q] = ri.im;
                di[q] = -k.di[q] / r.norm_sqr();
            }
            CtpKernel::from_parts(k.grid, dn, df, di)
        }
    }
}

/// Maximum deviation of `Block(K) W sigma Block(K_inv) sigma W` from the
/// identity.
pub fn inverse_residual(k: &CtpKernel, k_inv: &CtpKernel) -> Result<f64> {
    same_grid(k, k_inv)?;
    let n = k.len();
    let Some(w) = k.weights() else {
        let mut worst = 0.0f64;
        for q in 0..n {
            let b = point_block(k, q);
            let mut l = point_block(k_inv, q);
            l[0][1] = -l[0][1];
            l[1][0] = -l[1][0];
            for (r, row) in b.iter().enumerate() {
                for (c, (l0, l1)) in l[0].iter().zip(&l[1]).enumerate() {
                    let v = row[0] * l0 + row[1] * l1;
                    let id = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((v - id).norm());
                }
            }
        }
        return Ok(worst);
    };
    let b = block_of(k).into_matrix();
    let l = inverse_layout(k_inv).into_matrix();
    let w2 = DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| Complex64::new(w[i % n], 0.0)));
    let prod = &w2 * b * &w2 * l;
    let id = DMatrix::<Complex64>::identity(2 * n, 2 * n);
    Ok((prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// The 2x2 CTP block of a frequency-domain kernel at grid index `q`.
pub fn point_block(k: &CtpKernel, q: usize) -> [[Complex64; 2]; 2] {
    debug_assert_eq!(k.domain(), Domain::Frequency);
    let dn = Complex64::new(k.dn[q], 0.0);
    let df = Complex64::new(0.0, k.df[q]);
    let idi = Complex64::new(0.0, k.di[q]);
    [[dn + idi, -df + idi], [df + idi, -dn + idi]]
}

/// Product of kernels in the metric representation `sigma Block(A)`:
/// `(prod A)^{r,a} = prod A^{r,a}` and
/// `(prod A)^i = sum_j (A_1..A_{j-1})^r A_j^i (A_{j+1}..A_n)^a`.
///
/// Operator products fold in the quadrature weights. Time domain only.
pub fn kernel_product(ks: &[CtpKernel]) -> Result<CtpKernel> {
    let first = ks.first().ok_or_else(|| Error::InvalidKernel("empty product".into()))?;
    for k in ks {
        same_grid(first, k)?;
    }
    if ks.len() == 1 {
        return Ok(first.clone());
    }
    if first.domain() != Domain::Time {
        return Err(Error::DomainMismatch { expected: "time" });
    }
    let w = first.weights().expect("time grid");
    let wd = DMatrix::from_diagonal(&w);
    let wi = DMatrix::from_diagonal(&w.map(|x| 1.0 / x));
    let n = first.len();

    let r_ops: Vec<DMatrix<f64>> = ks.iter().map(|k| (&k.dn + &k.df) * &wd).collect();
    let a_ops: Vec<DMatrix<f64>> = ks.iter().map(|k| (&k.dn - &k.df) * &wd).collect();
    let i_ops: Vec<DMatrix<f64>> = ks.iter().map(|k| &k.di * &wd).collect();

    // prefix[j] = R_0..R_{j-1}, suffix[j] = A_j..A_{m-1}
    let m = ks.len();
    let mut prefix = vec![DMatrix::identity(n, n)];
    for r in &r_ops {
        let next = prefix.last().unwrap() * r;
        prefix.push(next);
    }
    let mut suffix = vec![DMatrix::identity(n, n); m + 1];
    for j in (0..m).rev() {
        suffix[j] = &a_ops[j] * &suffix[j + 1];
    }
    let mut i_op = DMatrix::zeros(n, n);
    for j in 0..m {
        i_op += &prefix[j] * &i_ops[j] * &suffix[j + 1];
    }
    let r = &prefix[m] * &wi;
    let a = &suffix[0] * &wi;
    let dn = (&r + &a) * 0.5;
    let df = (&r - &a) * 0.5;
    CtpKernel::from_parts(first.grid, dn, df, i_op * &wi)
}

/// `j~^T Block W j~` for the physical source `j_+ = j, j_- = -j`;
/// vanishes whenever `D++ + D-- = D+- + D-+`.
pub fn physical_source_null(k: &CtpKernel, j: &DVector<f64>) -> Result<f64> {
    physical_source_null_block(&block_of(k), j)
}

pub fn physical_source_null_block(m: &BlockMatrix, j: &DVector<f64>) -> Result<f64> {
    let n = m.grid.len();
    if j.len() != n {
        return Err(Error::GridMismatch(format!("source has {} entries, grid {n}", j.len())));
    }
    let w = match m.grid {
        Grid::Time(g) => g.weights(),
        Grid::Frequency(_) => return Err(Error::DomainMismatch { expected: "time" }),
    };
    let v = DVector::from_fn(2 * n, |i, _| {
        let s = if i < n { 1.0 } else { -1.0 };
        Complex64::new(s * w[i % n] * j[i % n], 0.0)
    });
    Ok((v.transpose() * &m.data * &v)[(0, 0)].norm())
}

/// Expectation values `<x_pm(t)> = int dt' [D_{pm,+} - D_{pm,-}](t,t') j(t')`
/// on both branches, computed from the block matrix.
pub fn physical_response(k: &CtpKernel, j: &DVector<f64>) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    use Branch::*;
    let w = k.weights().ok_or(Error::DomainMismatch { expected: "time" })?;
    let b = block_of(k);
    let src = j.component_mul(&w).map(|x| Complex64::new(x, 0.0));
    let plus = (b.block(Plus, Plus) - b.block(Plus, Minus)) * &src;
    let minus = (b.block(Minus, Plus) - b.block(Minus, Minus)) * &src;
    Ok((plus, minus))
}

/// Which block layout a quadratic form uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `Block(K)`, the propagator layout.
    Propagator,
    /// `sigma Block(K) sigma`, the layout of an inverse propagator.
    Inverse,
}

/// `u~^T M u~` for CTP doublets `u~ = (plus, minus)`.
///
/// Time domain: `sum w_i w_j u_s(i) M_ss'(i,j) u_s'(j)`. Frequency domain:
/// `sum w_k conj(u_s(k)) M_ss'(k,k) u_s'(k)` over Fourier amplitudes of
/// real signals.
pub fn quadratic_form(
    k: &CtpKernel,
    layout: Layout,
    plus: &DVector<Complex64>,
    minus: &DVector<Complex64>,
) -> Result<Complex64> {
    let n = k.len();
    if plus.len() != n || minus.len() != n {
        return Err(Error::GridMismatch("doublet length differs from grid".into()));
    }
    let w = k.grid.weights();
    match k.domain() {
        Domain::Time => {
            let m = match layout {
                Layout::Propagator => block_of(k),
                Layout::Inverse => inverse_layout(k),
            }
            .into_matrix();
            let uw = DVector::from_fn(
                2 * n,
                |i, _| if i < n { plus[i] * w[i] } else { minus[i - n] * w[i - n] },
            );
            Ok((uw.transpose() * m * &uw)[(0, 0)])
        }
        Domain::Frequency => {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..n {
                let mut b = point_block(k, q);
                if layout == Layout::Inverse {
                    b[0][1] = -b[0][1];
                    b[1][0] = -b[1][0];
                }
                let up = [plus[q], minus[q]];
                for (s, us) in up.iter().enumerate() {
                    for (t, ut) in up.iter().enumerate() {
                        acc += us.conj() * b[s][t] * ut * w[q];
                    }
                }
            }
            Ok(acc)
        }
    }
}
