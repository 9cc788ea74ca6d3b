//! Uniform time and frequency grids.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_start, t_start + dt, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if end <= start {
            return Err(Error::InvalidGrid(format!(
                "t_end ({end}) must exceed t_start ({start})"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        Ok(Self { start, end, n })
    }

    /// Grid with `n` points starting at `start` and spacing `dt`.
    pub fn with_step(start: f64, dt: f64, n: usize) -> Result<Self> {
        Self::new(start, start + dt * (n as f64 - 1.0), n)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.end - self.start) / (self.n as f64 - 1.0)
    }

    pub fn point(&self, k: usize) -> f64 {
        self.start + self.dt() * k as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> DVector<f64> {
        let dt = self.dt();
        DVector::from_fn(self.n, |k, _| if k == 0 || k + 1 == self.n { 0.5 * dt } else { dt })
    }
}

/// Symmetric frequency grid `-omega_max, ..., omega_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omega_max: f64,
    n: usize,
}

impl FrequencyGrid {
    pub fn new(omega_max: f64, n: usize) -> Result<Self> {
        if !(omega_max.is_finite() && omega_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "omega_max must be positive, got {omega_max}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        Ok(Self { omega_max, n })
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn d_omega(&self) -> f64 {
        2.0 * self.omega_max / (self.n as f64 - 1.0)
    }

    /// `omega_k`, computed so that `omega_k == -omega_{n-1-k}` holds exactly.
    pub fn point(&self, k: usize) -> f64 {
        let half = (self.n as f64 - 1.0) / 2.0;
        (k as f64 - half) / half * self.omega_max
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    /// Trapezoidal weights including the `1/2pi` of the inverse transform.
    pub fn weights(&self) -> DVector<f64> {
        let dw = self.d_omega() / (2.0 * std::f64::consts::PI);
        DVector::from_fn(self.n, |k, _| if k == 0 || k + 1 == self.n { 0.5 * dw } else { dw })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Time(TimeGrid),
    Frequency(FrequencyGrid),
}

impl Grid {
    pub fn domain(&self) -> Domain {
        match self {
            Grid::Time(_) => Domain::Time,
            Grid::Frequency(_) => Domain::Frequency,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Time(g) => g.len(),
            Grid::Frequency(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Time(g) => g.points(),
            Grid::Frequency(g) => g.points(),
        }
    }

    pub fn weights(&self) -> DVector<f64> {
        match self {
            Grid::Time(g) => g.weights(),
            Grid::Frequency(g) => g.weights(),
        }
    }

    pub fn as_time(&self) -> Option<&TimeGrid> {
        match self {
            Grid::Time(g) => Some(g),
            Grid::Frequency(_) => None,
        }
    }

    pub fn as_frequency(&self) -> Option<&FrequencyGrid> {
        match self {
            Grid::Frequency(g) => Some(g),
            Grid::Time(_) => None,
        }
    }
}

impl From<TimeGrid> for Grid {
    fn from(g: TimeGrid) -> Self {
        Grid::Time(g)
    }
}

impl From<FrequencyGrid> for Grid {
    fn from(g: FrequencyGrid) -> Self {
        Grid::Frequency(g)
    }
}
