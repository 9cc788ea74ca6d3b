//! Central limit theorem for averages over `N_s` identical systems.
//!
//! The average of `N_s` independent copies of an observable with cumulant
//! generator `w(j)` has generator `N_s w(j / N_s)`: the `k`-th cumulant is
//! suppressed by `N_s^{1-k}`, leaving a Gaussian with variance `c2 / N_s`.
//! For trajectories the same rescaling turns the CTP generator functional
//! into a Gaussian action with effective Planck constant `hbar / N_s`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianDist;
use crate::grid::{Domain, Grid};
use crate::kernel::{kernel_inverse, quadratic_form, CtpKernel, Layout};

/// Cumulants `(c1, c2, ...)` of one observable in one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantGenerator {
    cumulants: Vec<f64>,
}

/// Truncation order used when a law is expanded into cumulants.
pub const DEFAULT_ORDER: usize = 4;

impl CumulantGenerator {
    pub fn new(cumulants: Vec<f64>) -> Result<Self> {
        if cumulants.is_empty() {
            return Err(Error::InvalidParameter("empty cumulant list".into()));
        }
        if cumulants.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite cumulant".into()));
        }
        if cumulants.len() > 1 && cumulants[1] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative variance c2 = {}",
                cumulants[1]
            )));
        }
        Ok(Self { cumulants })
    }

    pub fn cumulants(&self) -> &[f64] {
        &self.cumulants
    }

    pub fn order(&self) -> usize {
        self.cumulants.len()
    }

    /// `k`-th cumulant, 1-based.
    pub fn cumulant(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.cumulants.get(i)).copied()
    }

    /// `w(j) = sum_k c_k (i j)^k / k!` summed over the stored orders.
    pub fn evaluate(&self, j: f64) -> Complex64 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.cumulants.iter().enumerate() {
            term *= Complex64::new(0.0, j) / (k + 1) as f64;
            acc += term * c;
        }
        acc
    }
}

/// Mixture of preparations with probabilities `p_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<(f64, CumulantGenerator)>,
    pub n_s: usize,
}

impl EnsembleSpec {
    pub fn new(members: Vec<(f64, CumulantGenerator)>, n_s: usize) -> Result<Self> {
        let spec = Self { members, n_s };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no members".into()));
        }
        if self.n_s == 0 {
            return Err(Error::InvalidParameter("N_s must be positive".into()));
        }
        if let Some((p, _)) = self.members.iter().find(|(p, _)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter(format!("weight {p} is not a probability")));
        }
        let total: f64 = self.members.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Result of [`quench_average`]; `truncated` is set when member orders
/// differed and the output was cut to the shortest.
#[derive(Debug, Clone, PartialEq)]
pub struct QuenchedGenerator {
    pub generator: CumulantGenerator,
    pub truncated: bool,
}

/// `w_q = sum_k p_k w_k`, coefficient by coefficient. This is an average of
/// generators, not the cumulants of the mixture distribution.
pub fn quench_average(spec: &EnsembleSpec) -> Result<QuenchedGenerator> {
    spec.validate()?;
    let order = spec.members.iter().map(|(_, g)| g.order()).min().expect("non-empty");
    let truncated = spec.members.iter().any(|(_, g)| g.order() != order);
    let mut c = vec![0.0; order];
    for (p, g) in &spec.members {
        for (acc, ck) in c.iter_mut().zip(g.cumulants()) {
            *acc += p * ck;
        }
    }
    Ok(QuenchedGenerator {
        generator: CumulantGenerator::new(c)?,
        truncated,
    })
}

/// Generator of the `N_s`-average, `N_s w(j / N_s)`: `c_k -> c_k / N_s^{k-1}`.
pub fn scale_generator(w: &CumulantGenerator, n_s: usize) -> Result<CumulantGenerator> {
    if n_s == 0 {
        return Err(Error::InvalidParameter("N_s must be positive".into()));
    }
    let n = n_s as f64;
    let c = w
        .cumulants()
        .iter()
        .enumerate()
        .map(|(k, c)| c / n.powi(k as i32))
        .collect();
    CumulantGenerator::new(c)
}

/// Gaussian limit of the `N_s`-average together with the scaled higher
/// cumulants it neglects.
#[derive(Debug, Clone, PartialEq)]
pub struct CltGaussian {
    pub dist: GaussianDist,
    /// Cumulants of order 3 and up of the average, each `O(N_s^{-2})` or smaller.
    pub residuals: Vec<f64>,
}

pub fn clt_gaussian(w: &CumulantGenerator, n_s: usize) -> Result<CltGaussian> {
    let scaled = scale_generator(w, n_s)?;
    let c = scaled.cumulants();
    let mean = c[0];
    let var = c.get(1).copied().unwrap_or(0.0);
    Ok(CltGaussian {
        dist: GaussianDist::scalar(mean, var)?,
        residuals: c.iter().skip(2).copied().collect(),
    })
}

/// Single-system laws with closed-form cumulants and a sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SingleSystemLaw {
    Uniform {
        low: f64,
        high: f64,
    },
    /// `high` with probability `p`, `low` otherwise.
    TwoPoint {
        low: f64,
        high: f64,
        p: f64,
    },
}

impl SingleSystemLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SingleSystemLaw::Uniform { low, high } | SingleSystemLaw::TwoPoint { low, high, .. }
                if !(low.is_finite() && high.is_finite() && high > low) =>
            {
                Err(Error::InvalidParameter(format!("need low < high, got [{low}, {high}]")))
            }
            SingleSystemLaw::TwoPoint { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidParameter(format!("p = {p} is not a probability")))
            }
            _ => Ok(()),
        }
    }

    /// Cumulants up to order four.
    pub fn generator(&self) -> Result<CumulantGenerator> {
        self.validate()?;
        let c = match *self {
            SingleSystemLaw::Uniform { low, high } => {
                let h = high - low;
                vec![0.5 * (low + high), h * h / 12.0, 0.0, -h.powi(4) / 120.0]
            }
            SingleSystemLaw::TwoPoint { low, high, p } => {
                let h = high - low;
                let q = p * (1.0 - p);
                vec![
                    low + p * h,
                    q * h * h,
                    q * (1.0 - 2.0 * p) * h.powi(3),
                    q * (1.0 - 6.0 * q) * h.powi(4),
                ]
            }
        };
        CumulantGenerator::new(c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SingleSystemLaw::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            SingleSystemLaw::TwoPoint { low, high, p } => {
                if rng.random::<f64>() < p {
                    high
                } else {
                    low
                }
            }
        }
    }

    /// Average of `n_s` independent draws.
    pub fn sample_average<R: Rng + ?Sized>(&self, n_s: usize, rng: &mut R) -> f64 {
        (0..n_s).map(|_| self.sample(rng)).sum::<f64>() / n_s as f64
    }
}

/// Bounded pair correlations between systems of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    n_s: usize,
    /// `(n1, n2, c(n1, n2))` for ordered pairs with non-zero weight.
    pairs: Vec<(usize, usize, f64)>,
    /// Optional `sum |W_{n1..nl}|` for orders `l >= 3`, indexed by `l - 3`.
    higher_norms: Vec<f64>,
}

impl CorrelationModel {
    pub fn new(n_s: usize, pairs: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::InvalidParameter("N_s must be positive".into()));
        }
        if let Some(p) = pairs
            .iter()
            .find(|(a, b, c)| *a >= n_s || *b >= n_s || a == b || !c.is_finite())
        {
            return Err(Error::InvalidParameter(format!("invalid pair {p:?}")));
        }
        Ok(Self {
            n_s,
            pairs,
            higher_norms: Vec::new(),
        })
    }

    /// Each system correlated with its `k` successors on a ring.
    pub fn ring(n_s: usize, k: usize, weight: f64) -> Result<Self> {
        if k >= n_s {
            return Err(Error::InvalidParameter(format!("{k} neighbours on a ring of {n_s}")));
        }
        let pairs = (0..n_s)
            .flat_map(|a| (1..=k).map(move |d| (a, (a + d) % n_s, weight)))
            .collect();
        Self::new(n_s, pairs)
    }

    /// Every ordered pair correlated with the same weight.
    pub fn all_to_all(n_s: usize, weight: f64) -> Result<Self> {
        let pairs = (0..n_s)
            .flat_map(|a| (0..n_s).filter(move |b| *b != a).map(move |b| (a, b, weight)))
            .collect();
        Self::new(n_s, pairs)
    }

    pub fn with_higher_norms(mut self, norms: Vec<f64>) -> Self {
        self.higher_norms = norms;
        self
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn c_max(&self) -> f64 {
        self.pairs.iter().map(|p| p.2.abs()).fold(0.0, f64::max)
    }

    /// Largest number of partners of a single system.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n_s];
        for &(a, _, _) in &self.pairs {
            deg[a] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterBound {
    pub bound: f64,
    /// Set when a system is correlated with more than half of the ensemble,
    /// so the neighbourhood grows with `N_s` and the bound does not vanish.
    pub strong_coupling: bool,
}

/// `N_s^{-l} sum |W_{n1..nl}|`. Exact for `l = 2`; for `l >= 3` uses the
/// supplied norm or the counting bound `c_max N_s deg^{l-1}`.
pub fn cluster_suppression(model: &CorrelationModel, l: usize) -> Result<ClusterBound> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!(
            "cluster order must be at least 2, got {l}"
        )));
    }
    let n = model.n_s as f64;
    let total = if l == 2 {
        model.pairs.iter().map(|p| p.2.abs()).sum::<f64>()
    } else if let Some(norm) = model.higher_norms.get(l - 3) {
        *norm
    } else {
        model.c_max() * n * (model.max_degree() as f64).powi(l as i32 - 1)
    };
    Ok(ClusterBound {
        bound: total / n.powi(l as i32),
        strong_coupling: 2 * model.max_degree() > model.n_s,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("need at least two matching points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Gaussian part of the single-system generator functional: the classical
/// trajectory and the connected two-point kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorQuadratic {
    pub mean: DVector<f64>,
    pub kernel: CtpKernel,
    pub hbar: f64,
}

impl GeneratorQuadratic {
    pub fn new(mean: DVector<f64>, kernel: CtpKernel, hbar: f64) -> Result<Self> {
        if mean.len() != kernel.len() {
            return Err(Error::GridMismatch(format!(
                "mean has {} entries, kernel grid {}",
                mean.len(),
                kernel.len()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mean".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { mean, kernel, hbar })
    }

    /// Classical trajectory driven by a physical source, `x_cl = D^r W j`.
    pub fn driven(kernel: CtpKernel, j: &DVector<f64>, hbar: f64) -> Result<Self> {
        if j.len() != kernel.len() {
            return Err(Error::GridMismatch("source length differs from grid".into()));
        }
        let mean = kernel.apply_retarded(j)?;
        Self::new(mean, kernel, hbar)
    }
}

fn check_n_s(n_s: usize) -> Result<f64> {
    if n_s == 0 {
        return Err(Error::InvalidParameter("N_s must be positive".into()));
    }
    Ok(n_s as f64)
}

/// `S_q = (N_s / 2) (x~ - x~_cl)^T D~^{-1} (x~ - x~_cl)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageAction {
    pub n_s: usize,
    pub mean: DVector<f64>,
    pub inverse: CtpKernel,
    pub hbar: f64,
}

impl AverageAction {
    pub fn effective_hbar(&self) -> f64 {
        self.hbar / self.n_s as f64
    }

    /// Action at the doublet `(plus, minus)`; the classical trajectory is
    /// subtracted on both branches.
    pub fn evaluate(&self, plus: &DVector<Complex64>, minus: &DVector<Complex64>) -> Result<Complex64> {
        let mean = self.mean.map(|v| Complex64::new(v, 0.0));
        let q = quadratic_form(&self.inverse, Layout::Inverse, &(plus - &mean), &(minus - &mean))?;
        Ok(q * (0.5 * self.n_s as f64))
    }

    /// `Im S_q = (N_s / 2) x_d^T (D^{-1})^i x_d` for a real time-domain
    /// branch difference.
    pub fn decoherence(&self, x_d: &DVector<f64>) -> Result<f64> {
        let Grid::Time(g) = *self.inverse.grid() else {
            return Err(Error::DomainMismatch { expected: "time" });
        };
        if x_d.len() != g.len() {
            return Err(Error::GridMismatch("x_d length differs from grid".into()));
        }
        let v = x_d.component_mul(&g.weights());
        Ok(0.5 * self.n_s as f64 * v.dot(&(self.inverse.di() * &v)))
    }

    /// Frequency-domain form over Fourier amplitudes,
    /// `(N_s / 2) sum |x_d(omega)|^2 (D^{-1})^i(omega) d omega / 2 pi`.
    pub fn decoherence_spectral(&self, x_d: &DVector<Complex64>) -> Result<f64> {
        if self.inverse.domain() != Domain::Frequency {
            return Err(Error::DomainMismatch { expected: "frequency" });
        }
        if x_d.len() != self.inverse.len() {
            return Err(Error::GridMismatch("x_d length differs from grid".into()));
        }
        let w = self.inverse.grid().weights();
        let s: f64 = (0..x_d.len())
            .map(|q| x_d[q].norm_sqr() * self.inverse.di()[q] * w[q])
            .sum();
        Ok(0.5 * self.n_s as f64 * s)
    }
}

pub fn average_action(w: &GeneratorQuadratic, n_s: usize) -> Result<AverageAction> {
    check_n_s(n_s)?;
    Ok(AverageAction {
        n_s,
        mean: w.mean.clone(),
        inverse: kernel_inverse(&w.kernel)?,
        hbar: w.hbar,
    })
}

pub fn decoherence_functional(w: &GeneratorQuadratic, n_s: usize, x_d: &DVector<f64>) -> Result<f64> {
    average_action(w, n_s)?.decoherence(x_d)
}

pub fn decoherence_functional_spectral(w: &GeneratorQuadratic, n_s: usize, x_d: &DVector<Complex64>) -> Result<f64> {
    average_action(w, n_s)?.decoherence_spectral(x_d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateOptions {
    /// An eigenvalue of `-D^i` this many times the median positive one
    /// marks a flat (on-shell) direction.
    pub flat_ratio: f64,
    /// Relative size below which eigenvalues count as zero.
    pub zero_tol: f64,
}

impl Default for CoordinateOptions {
    fn default() -> Self {
        Self {
            flat_ratio: 1e4,
            zero_tol: 1e-10,
        }
    }
}

/// On-shell directions along which the amplitude distribution is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatDirections {
    /// Unit vectors spanning the flat subspace.
    pub modes: Vec<DVector<f64>>,
    /// Matching eigenvalues of `-D^i`.
    pub eigenvalues: Vec<f64>,
    pub median_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateDistribution {
    Gaussian(GaussianDist),
    /// The amplitudes along these directions are uniformly distributed;
    /// no Gaussian is returned.
    Flat(FlatDirections),
}

impl CoordinateDistribution {
    pub fn gaussian(&self) -> Option<&GaussianDist> {
        match self {
            CoordinateDistribution::Gaussian(g) => Some(g),
            CoordinateDistribution::Flat(_) => None,
        }
    }
}

pub fn coordinate_distribution(w: &GeneratorQuadratic, n_s: usize) -> Result<CoordinateDistribution> {
    coordinate_distribution_with(w, n_s, CoordinateOptions::default())
}

/// Gaussian with mean `x_cl` and covariance `-(hbar / N_s) D^i`. In the
/// frequency domain the covariance is diagonal over Fourier amplitudes.
pub fn coordinate_distribution_with(
    w: &GeneratorQuadratic,
    n_s: usize,
    opts: CoordinateOptions,
) -> Result<CoordinateDistribution> {
    let n = check_n_s(n_s)?;
    let k = &w.kernel;
    let minus_di = match k.domain() {
        Domain::Time => -k.di().clone(),
        Domain::Frequency => DMatrix::from_diagonal(&(-k.di().column(0))),
    };
    let eig = SymmetricEigen::new(minus_di.clone());
    let max = eig.eigenvalues.amax();
    if max == 0.0 {
        return Err(Error::Degenerate("D^i vanishes identically".into()));
    }
    let min = eig.eigenvalues.min();
    if min < -opts.zero_tol * max {
        return Err(Error::InvalidKernel(format!(
            "D^i is not negative semidefinite (eigenvalue of -D^i {min:.3e})"
        )));
    }
    let mut positive: Vec<f64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|v| *v > opts.zero_tol * max)
        .collect();
    positive.sort_by(f64::total_cmp);
    let median = positive[positive.len() / 2];
    let flat: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > opts.flat_ratio * median)
        .collect();
    if !flat.is_empty() {
        return Ok(CoordinateDistribution::Flat(FlatDirections {
            modes: flat.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
            eigenvalues: flat.iter().map(|&i| eig.eigenvalues[i]).collect(),
            median_eigenvalue: median,
        }));
    }
    let mut cov = minus_di * (w.hbar / n);
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(CoordinateDistribution::Gaussian(GaussianDist::new(
        w.mean.clone(),
        cov,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(c: &[f64]) -> CumulantGenerator {
        CumulantGenerator::new(c.to_vec()).unwrap()
    }

    #[test]
    fn quench_examples() {
        let two = EnsembleSpec::new(vec![(0.5, gen(&[0.0, 1.0])), (0.5, gen(&[0.0, 3.0]))], 10).unwrap();
        assert_eq!(quench_average(&two).unwrap().generator.cumulants(), &[0.0, 2.0]);
        let first = EnsembleSpec::new(vec![(1.0, gen(&[0.2, 1.0, 3.0])), (0.0, gen(&[9.0, 9.0, 9.0]))], 1).unwrap();
        assert_eq!(quench_average(&first).unwrap().generator.cumulants(), &[0.2, 1.0, 3.0]);
        let mixed = EnsembleSpec::new(vec![(0.5, gen(&[1.0, 1.0, 5.0])), (0.5, gen(&[1.0, 3.0]))], 1).unwrap();
        let q = quench_average(&mixed).unwrap();
        assert!(q.truncated);
        assert_eq!(q.generator.order(), 2);
    }

    #[test]
    fn ensemble_validation() {
        assert!(EnsembleSpec::new(vec![(0.4, gen(&[0.0, 1.0]))], 3).is_err());
        assert!(EnsembleSpec::new(vec![(1.0, gen(&[0.0, 1.0]))], 0).is_err());
        assert!(CumulantGenerator::new(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scale_generator(&gen(&[1.0, 4.0]), 4).unwrap().cumulants(), &[1.0, 1.0]);
        assert_eq!(
            scale_generator(&gen(&[0.3, 2.0, 8.0]), 4).unwrap().cumulant(3),
            Some(0.5)
        );
        assert_eq!(
            scale_generator(&gen(&[0.3, 2.0, 8.0]), 1).unwrap().cumulants(),
            &[0.3, 2.0, 8.0]
        );
    }

    #[test]
    fn clt_examples() {
        let g = clt_gaussian(&gen(&[0.0, 1.0]), 100).unwrap();
        assert_eq!(g.dist.mean()[0], 0.0);
        assert!((g.dist.variance(0) - 0.01).abs() < 1e-18);
        let pinned = clt_gaussian(&gen(&[2.5, 0.0]), 7).unwrap();
        assert_eq!(pinned.dist.pinned(), &[(0, 2.5)]);
    }

    #[test]
    fn cluster_examples() {
        let r = CorrelationModel::ring(100, 5, 1.0).unwrap();
        assert!((cluster_suppression(&r, 2).unwrap().bound - 0.05).abs() < 1e-15);
        let r = CorrelationModel::ring(1000, 5, 1.0).unwrap();
        assert!((cluster_suppression(&r, 2).unwrap().bound - 0.005).abs() < 1e-15);
        let a = cluster_suppression(&CorrelationModel::all_to_all(50, 1.0).unwrap(), 2).unwrap();
        assert!(a.strong_coupling);
        assert!(a.bound > 0.9);
        assert!(cluster_suppression(&r, 1).is_err());
    }

    #[test]
    fn uniform_law_cumulants() {
        let g = SingleSystemLaw::Uniform { low: 0.0, high: 1.0 }.generator().unwrap();
        assert_eq!(g.cumulant(1), Some(0.5));
        assert!((g.cumulant(2).unwrap() - 1.0 / 12.0).abs() < 1e-17);
        let c = clt_gaussian(&g, 50).unwrap();
        assert!((c.dist.variance(0) - 1.0 / 600.0).abs() < 1e-17);
    }
}
