//! Droplet chains left by a single charged particle in a supersaturated
//! chamber.
//!
//! Ionizations are weighted by products of free propagators on both
//! branches. With equal branch points the phases cancel, so straightness
//! only emerges once the amplitude is summed over droplet-sized cells:
//! off the free-particle line the phase oscillates across a cell and the
//! sum is suppressed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest phase step between neighbouring lattice points of a cell.
const MAX_PHASE_STEP: f64 = 0.25;

/// Upper bound on lattice points per cell axis.
const MAX_CELL_POINTS: usize = 4097;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChamberConfig {
    pub m: f64,
    pub hbar: f64,
    pub r_dr: f64,
    /// de Broglie wavelength `2 pi hbar / (m v)` of the particle.
    pub lambda: f64,
    /// `n_dr / n_ss`.
    pub density_ratio: f64,
    pub tau_i: f64,
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    /// Emission point; the box centre when absent.
    #[serde(default)]
    pub source: Option<[f64; 3]>,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_ratio_min")]
    pub ratio_min: f64,
    /// Minimum lattice points per cell axis.
    #[serde(default = "default_cell_points")]
    pub cell_points: usize,
    /// Candidate cells extend this many cells from the free-motion point
    /// along each axis.
    #[serde(default = "default_reach")]
    pub lattice_reach: usize,
    #[serde(default)]
    pub max_droplets: Option<usize>,
}

fn default_ratio_min() -> f64 {
    10.0
}

fn default_cell_points() -> usize {
    7
}

fn default_reach() -> usize {
    1
}

impl ChamberConfig {
    /// Configuration with `hbar = 1` and the mass fixed by the wavelength
    /// at the given speed.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r_dr: f64,
        lambda: f64,
        speed: f64,
        density_ratio: f64,
        tau_i: f64,
        box_min: [f64; 3],
        box_max: [f64; 3],
        t_end: f64,
    ) -> Result<Self> {
        let cfg = Self {
            m: 2.0 * PI / (lambda * speed),
            hbar: 1.0,
            r_dr,
            lambda,
            density_ratio,
            tau_i,
            box_min,
            box_max,
            source: None,
            t_start: 0.0,
            t_end,
            ratio_min: default_ratio_min(),
            cell_points: default_cell_points(),
            lattice_reach: default_reach(),
            max_droplets: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("hbar", self.hbar),
            ("r_dr", self.r_dr),
            ("lambda", self.lambda),
            ("tau_i", self.tau_i),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
        if self.r_dr / self.lambda < self.ratio_min {
            return Err(Error::InvalidConfig(format!(
                "r_dr / lambda = {} is below the required {}",
                self.r_dr / self.lambda,
                self.ratio_min
            )));
        }
        if !(self.density_ratio > 1.0 && self.density_ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "density ratio must exceed 1, got {}",
                self.density_ratio
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidConfig("t_end must exceed t_start".into()));
        }
        if (0..3).any(|k| !(self.box_max[k] > self.box_min[k])) {
            return Err(Error::InvalidConfig("box has non-positive extent".into()));
        }
        if self.cell_points == 0 {
            return Err(Error::InvalidConfig("cell_points must be positive".into()));
        }
        let s = self.source();
        if (0..3).any(|k| s[k] < self.box_min[k] || s[k] > self.box_max[k]) {
            return Err(Error::InvalidConfig("source lies outside the box".into()));
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        2.0 * PI * self.hbar / (self.m * self.lambda)
    }

    pub fn depletion_radius(&self) -> f64 {
        self.r_dr * self.density_ratio.cbrt()
    }

    pub fn source(&self) -> [f64; 3] {
        self.source
            .unwrap_or_else(|| std::array::from_fn(|k| 0.5 * (self.box_min[k] + self.box_max[k])))
    }

    fn inside(&self, x: &Vector3<f64>) -> bool {
        (0..3).all(|k| x[k] >= self.box_min[k] && x[k] <= self.box_max[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: [f64; 3],
}

impl Event {
    pub fn new(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }

    fn pos(&self) -> Vector3<f64> {
        Vector3::from(self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The configured droplet count was reached.
    MaxDroplets,
    /// The free-motion point left the box.
    LeftBox,
    /// The next ionization falls after `t_end`.
    TimeUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletChain {
    pub start: Event,
    pub events: Vec<Event>,
    pub end: Event,
    /// Set by the simulation; `None` for hand-built chains.
    pub stop: Option<StopReason>,
}

impl DropletChain {
    /// Times must increase strictly from `start` through `events` to `end`.
    pub fn new(start: Event, events: Vec<Event>, end: Event) -> Result<Self> {
        let mut last = start.t;
        for e in events.iter().chain(std::iter::once(&end)) {
            if !(e.t > last) {
                return Err(Error::InvalidChain(format!("times not increasing at t = {}", e.t)));
            }
            last = e.t;
        }
        if events
            .iter()
            .chain([&start, &end])
            .any(|e| e.x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidChain("non-finite position".into()));
        }
        Ok(Self {
            start,
            events,
            end,
            stop: None,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `start, events..., end`.
    pub fn points(&self) -> Vec<Event> {
        std::iter::once(self.start)
            .chain(self.events.iter().copied())
            .chain(std::iter::once(self.end))
            .collect()
    }

    /// Consecutive droplets must be further apart than `r`.
    pub fn check_separation(&self, r: f64) -> Result<()> {
        for w in self.events.windows(2) {
            let d = (w[1].pos() - w[0].pos()).norm();
            if !(d > r) {
                return Err(Error::InvalidChain(format!(
                    "droplets at t = {} and t = {} are {d} apart, not more than {r}",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(())
    }
}

/// `D_0(x, t) = (m / (2 pi i hbar t))^{3/2} exp(i m x^2 / (2 hbar t))`.
pub fn free_propagator(x: [f64; 3], t: f64, m: f64, hbar: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "propagation time must be positive, got {t}"
        )));
    }
    let modulus = (m / (2.0 * PI * hbar * t)).powf(1.5);
    let x2: f64 = x.iter().map(|v| v * v).sum();
    Ok(Complex64::from_polar(modulus, -0.75 * PI + m * x2 / (2.0 * hbar * t)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainAmplitude {
    /// `prod_j |D_0|^2`.
    pub modulus: f64,
    pub log_modulus: f64,
    /// Single-branch phase `sum_j m dx_j^2 / (2 hbar dt_j)`.
    pub phase: f64,
    /// Phase of `D_0 ... D_0^*` with equal branch points; always zero.
    pub net_phase: f64,
}

pub fn chain_amplitude(cfg: &ChamberConfig, chain: &DropletChain) -> Result<ChainAmplitude> {
    chain.check_separation(cfg.r_dr)?;
    let pts = chain.points();
    let mut log_modulus = 0.0;
    let (mut phase, mut conjugate) = (0.0, 0.0);
    for w in pts.windows(2) {
        let dt = w[1].t - w[0].t;
        let dx = w[1].pos() - w[0].pos();
        log_modulus += 3.0 * (cfg.m / (2.0 * PI * cfg.hbar * dt)).ln();
        phase += cfg.m * dx.norm_squared() / (2.0 * cfg.hbar * dt);
        conjugate -= cfg.m * dx.norm_squared() / (2.0 * cfg.hbar * dt);
    }
    Ok(ChainAmplitude {
        modulus: log_modulus.exp(),
        log_modulus,
        phase,
        net_phase: phase + conjugate,
    })
}

/// Gradient of the single-branch phase with respect to every droplet.
pub fn phase_gradient(cfg: &ChamberConfig, chain: &DropletChain) -> Vec<[f64; 3]> {
    let pts = chain.points();
    let c = cfg.m / cfg.hbar;
    (1..pts.len() - 1)
        .map(|j| {
            let vin = (pts[j].pos() - pts[j - 1].pos()) / (pts[j].t - pts[j - 1].t);
            let vout = (pts[j + 1].pos() - pts[j].pos()) / (pts[j + 1].t - pts[j].t);
            ((vin - vout) * c).into()
        })
        .collect()
}

/// Straight line from `start` to `end` evaluated at `times`.
pub fn saddle_chain(start: Event, end: Event, times: &[f64]) -> Result<DropletChain> {
    if !(end.t > start.t) {
        return Err(Error::InvalidChain(format!(
            "end time {} does not follow start time {}",
            end.t, start.t
        )));
    }
    let v = (end.pos() - start.pos()) / (end.t - start.t);
    let events = times
        .iter()
        .map(|&t| Event::new(t, (start.pos() + v * (t - start.t)).into()))
        .collect();
    DropletChain::new(start, events, end)
}

/// Normalized lattice sum `(1/n) sum_p exp(i (g d_p + k d_p^2 / 2))` over a
/// cell of side `r` centred on zero.
fn cell_sum_1d(g: f64, k: f64, r: f64, min_points: usize) -> f64 {
    let span = g.abs() * r + 0.25 * k.abs() * r * r;
    let n = ((span / MAX_PHASE_STEP).ceil() as usize + 1).clamp(min_points, MAX_CELL_POINTS);
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let d = ((p as f64 + 0.5) / n as f64 - 0.5) * r;
        acc += Complex64::from_polar(1.0, g * d + 0.5 * k * d * d);
    }
    acc.norm() / n as f64
}

/// Product over droplets of `|cell-summed amplitude|^2 / N^2`, each cell
/// of side `r_dr` summed with the other droplets held at their centres.
/// The phase is separable across axes, so each cell sum factorises into
/// three one-dimensional lattice sums.
pub fn coarse_grained_weight(cfg: &ChamberConfig, chain: &DropletChain) -> f64 {
    let pts = chain.points();
    let c = cfg.m / cfg.hbar;
    let mut weight = 1.0;
    for j in 1..pts.len() - 1 {
        let (dt1, dt2) = (pts[j].t - pts[j - 1].t, pts[j + 1].t - pts[j].t);
        let vin = (pts[j].pos() - pts[j - 1].pos()) / dt1;
        let vout = (pts[j + 1].pos() - pts[j].pos()) / dt2;
        let g = (vin - vout) * c;
        let k = c * (1.0 / dt1 + 1.0 / dt2);
        for axis in 0..3 {
            let s = cell_sum_1d(g[axis], k, cfg.r_dr, cfg.cell_points);
            weight *= s * s;
        }
    }
    weight
}

/// Perpendicular frame `(n, e1, e2)` with `e1` rotated by `phi` about `n`.
fn frame(n: &Vector3<f64>, phi: f64) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = n.cross(&helper).normalize();
    let b = n.cross(&a);
    let e1 = a * phi.cos() + b * phi.sin();
    (e1, n.cross(&e1))
}

/// Draws one droplet chain. The first ionization fixes the direction of
/// flight isotropically; later droplets are chosen among cells around the
/// free-motion point with probability proportional to the coarse-grained
/// weight, skipping ionizations with no admissible cell. Each candidate is
/// weighted as the last interior event of a chain through the two previous
/// droplets, closed at the free-motion point one mean ionization time later
/// in place of the droplets not yet formed.
pub fn simulate_chamber(cfg: &ChamberConfig, seed: u64, speed: f64) -> Result<DropletChain> {
    cfg.validate()?;
    if !((speed - cfg.speed()).abs() <= 1e-9 * cfg.speed()) {
        return Err(Error::InvalidConfig(format!(
            "speed {speed} does not match the wavelength (expected {})",
            cfg.speed()
        )));
    }
    let x0 = Vector3::from(cfg.source());
    let reach = (0..3)
        .map(|k| (x0[k] - cfg.box_min[k]).min(cfg.box_max[k] - x0[k]))
        .fold(f64::INFINITY, f64::min);
    if reach < 3.0 * cfg.tau_i * speed {
        return Err(Error::InvalidConfig(format!(
            "box leaves room for fewer than three droplets: {reach} from source, spacing {}",
            cfg.tau_i * speed
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = Vector3::from(rng.sample::<[f64; 3], _>(UnitSphere));
    let (e1, e2) = frame(&n, rng.random_range(0.0..2.0 * PI));
    let wait = Exp::new(1.0 / cfg.tau_i).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let classical = |t: f64| x0 + n * (speed * (t - cfg.t_start));
    let start = Event::new(cfg.t_start, x0.into());
    let end = Event::new(cfg.t_end, classical(cfg.t_end).into());

    let reach = cfg.lattice_reach as isize;
    let offsets: Vec<Vector3<f64>> = (-reach..=reach)
        .flat_map(|a| (-reach..=reach).flat_map(move |b| (-reach..=reach).map(move |c| (a, b, c))))
        .map(|(a, b, c)| (n * a as f64 + e1 * b as f64 + e2 * c as f64) * cfg.r_dr)
        .collect();
    let depletion = cfg.depletion_radius();

    let mut droplets: Vec<Event> = Vec::new();
    let mut t = cfg.t_start;
    let stop = loop {
        if cfg.max_droplets.is_some_and(|k| droplets.len() >= k) {
            break StopReason::MaxDroplets;
        }
        t += rng.sample(wait);
        if t >= cfg.t_end {
            break StopReason::TimeUp;
        }
        let predicted = classical(t);
        if !cfg.inside(&predicted) {
            break StopReason::LeftBox;
        }
        let free = |x: &Vector3<f64>| cfg.inside(x) && droplets.iter().all(|d| (d.pos() - x).norm() > depletion);
        if droplets.is_empty() {
            droplets.push(Event::new(t, predicted.into()));
            continue;
        }
        let ahead = Event::new(t + cfg.tau_i, classical(t + cfg.tau_i).into());
        let prev2 = if droplets.len() >= 2 {
            droplets[droplets.len() - 2]
        } else {
            start
        };
        let prev1 = *droplets.last().expect("non-empty");
        let mut candidates = Vec::new();
        let mut weights = Vec::new();
        for off in &offsets {
            let x = predicted + off;
            if !free(&x) {
                continue;
            }
            let trial = DropletChain {
                start: prev2,
                events: vec![prev1, Event::new(t, x.into())],
                end: ahead,
                stop: None,
            };
            let w = coarse_grained_weight(cfg, &trial);
            if w > 0.0 {
                candidates.push(x);
                weights.push(w);
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let pick = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .sample(&mut rng);
        droplets.push(Event::new(t, candidates[pick].into()));
    };

    let mut chain = DropletChain::new(start, droplets, end)?;
    chain.stop = Some(stop);
    Ok(chain)
}

/// Largest perpendicular distance of the droplets from their
/// least-squares line.
pub fn collinearity(chain: &DropletChain) -> f64 {
    let k = chain.events.len();
    if k < 3 {
        return 0.0;
    }
    let centre = chain.events.iter().map(|e| e.pos()).sum::<Vector3<f64>>() / k as f64;
    let mut m = DMatrix::zeros(k, 3);
    for (i, e) in chain.events.iter().enumerate() {
        let d = e.pos() - centre;
        for c in 0..3 {
            m[(i, c)] = d[c];
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let dir = Vector3::new(vt[(best, 0)], vt[(best, 1)], vt[(best, 2)]);
    chain
        .events
        .iter()
        .map(|e| {
            let d = e.pos() - centre;
            (d - dir * d.dot(&dir)).norm()
        })
        .fold(0.0, f64::max)
}

/// Mean distance between consecutive droplets.
pub fn mean_spacing(chain: &DropletChain) -> Option<f64> {
    if chain.events.len() < 2 {
        return None;
    }
    let total: f64 = chain.events.windows(2).map(|w| (w[1].pos() - w[0].pos()).norm()).sum();
    Some(total / (chain.events.len() - 1) as f64)
}
