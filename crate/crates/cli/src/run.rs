//! Task execution. Every number comes from the library; this module only
//! wires configuration to calls and results to tables.

use maclim::apparatus::{
    discrete_pointer, dressed_mode_kernel, pointer_distribution_with, pointer_trajectory_cont, ApparatusMode,
    DiscreteCouplingSchedule, PointerModel,
};
use maclim::chamber::{collinearity, mean_spacing, simulate_chamber, ChamberConfig, DropletChain, StopReason};
use maclim::grid::TimeGrid;
use maclim::kernel::CtpKernel;
use maclim::measure::{sweep_row, MeasurementSchedule};
use maclim::propagators::LagKernel;
use maclim::qclt::{clt_gaussian, loglog_slope, CoordinateOptions, SingleSystemLaw};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Numerical, Result};
use crate::output::{real, Artifact, Cell, Table};
use crate::scenario::{KernelModel, Scenario, Task};

impl LagKernel for KernelModel {
    fn at(&self, tau: f64) -> maclim::Result<(f64, f64, f64)> {
        match self {
            KernelModel::Drude(d) => d.at(tau),
            KernelModel::Oscillator(o) => o.at(tau),
        }
    }
}

/// Runs a validated scenario and returns its artifacts without touching
/// the filesystem.
pub fn execute(s: &Scenario) -> Result<Vec<Artifact>> {
    match &s.task {
        Task::CltSweep { law, n_s, samples } => clt_sweep(s.seed, law, n_s, *samples),
        Task::TwoObservation { kernel, n_s, tau, hbar } => {
            two_observation(&s.resolve("task.kernel", kernel)?, n_s, tau, *hbar)
        }
        Task::DressingSweep {
            mode_kernel,
            system_kernel,
            grid,
            g,
            kappa,
            n_s,
        } => {
            let grid = grid.time_grid().during("grid", "TimeGrid::new")?;
            let mode = sample(&s.resolve("task.mode_kernel", mode_kernel)?, grid)?;
            let sys = sample(&s.resolve("task.system_kernel", system_kernel)?, grid)?;
            dressing_sweep(mode, &sys, *g, *kappa, n_s)
        }
        Task::Pointer {
            system_kernel,
            grid,
            modes,
            n_s,
            signal,
            measurement_times,
            hbar,
        } => {
            let grid = grid.time_grid().during("grid", "TimeGrid::new")?;
            let sys = sample(&s.resolve("task.system_kernel", system_kernel)?, grid)?;
            let mut built = Vec::with_capacity(modes.len());
            for (i, m) in modes.iter().enumerate() {
                let k = sample(&s.resolve(&format!("task.modes[{i}].kernel"), &m.kernel)?, grid)?;
                built.push(ApparatusMode::new(k, m.g, m.kappa).during("apparatus", "ApparatusMode::new")?);
            }
            let x = DVector::from_iterator(grid.len(), grid.points().into_iter().map(|t| signal.at(t)));
            let p = PointerModel::new(built, *n_s, sys, x, *hbar).during("apparatus", "PointerModel::new")?;
            pointer(&p, grid, measurement_times.as_deref())
        }
        Task::Chamber { config, runs } => chamber(config, s.seed, *runs),
    }
}

fn sample(k: &KernelModel, grid: TimeGrid) -> Result<CtpKernel> {
    k.sample(grid).during("propagators", "LagKernel::sample")
}

fn clt_sweep(seed: u64, law: &SingleSystemLaw, sizes: &[usize], samples: usize) -> Result<Vec<Artifact>> {
    let w = law.generator().during("qclt", "SingleSystemLaw::generator")?;
    let rows = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let xs: Vec<f64> = (0..samples).map(|_| law.sample_average(n, &mut rng)).collect();
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let fourth = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k;
            let limit = clt_gaussian(&w, n).during("qclt", "clt_gaussian")?.dist.variance(0);
            Ok((n, var, limit, ((fourth - var * var) / k).sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(vec!["n_s", "variance_mc", "variance_clt", "std_error"]);
    for &(n, v, l, e) in &rows {
        table.push(vec![Cell::Int(n as u64), Cell::Real(v), Cell::Real(l), Cell::Real(e)]);
    }
    let mut artifacts = vec![Artifact::Csv {
        file: "clt_sweep.csv".into(),
        table,
    }];
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
        let mc: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let lim: Vec<f64> = rows.iter().map(|r| r.2).collect();
        artifacts.push(Artifact::Json {
            file: "summary.json".into(),
            body: json!({
                "slope_mc": real(loglog_slope(&xs, &mc).during("qclt", "loglog_slope")?),
                "slope_clt": real(loglog_slope(&xs, &lim).during("qclt", "loglog_slope")?),
            }),
        });
    }
    Ok(artifacts)
}

fn two_observation(k: &KernelModel, sizes: &[f64], taus: &[f64], hbar: f64) -> Result<Vec<Artifact>> {
    let points: Vec<(f64, f64)> = sizes.iter().flat_map(|&n| taus.iter().map(move |&t| (n, t))).collect();
    let rows = points
        .par_iter()
        .map(|&(n, t)| sweep_row(k, n, t, hbar).during("measure", "sweep_row"))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(vec![
        "n_s",
        "tau",
        "var_z1",
        "var_plus",
        "var_minus",
        "var_x",
        "var_v",
        "sigma_product",
    ]);
    for r in rows {
        table.push(
            [
                r.n_s,
                r.tau,
                r.var_z1,
                r.var_plus,
                r.var_minus,
                r.var_x,
                r.var_v,
                r.sigma_product,
            ]
            .into_iter()
            .map(Cell::Real)
            .collect(),
        );
    }
    Ok(vec![Artifact::Csv {
        file: "two_observation.csv".into(),
        table,
    }])
}

fn dressing_sweep(mode: CtpKernel, sys: &CtpKernel, g: f64, kappa: f64, sizes: &[usize]) -> Result<Vec<Artifact>> {
    let mode = ApparatusMode::new(mode, g, kappa).during("apparatus", "ApparatusMode::new")?;
    let devs = sizes
        .par_iter()
        .map(|&n| {
            dressed_mode_kernel(&mode, n, sys)
                .during("apparatus", "dressed_mode_kernel")
                .map(|d| d.max_abs_diff(&mode.kernel))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(vec!["n_s", "deviation"]);
    for (&n, &d) in sizes.iter().zip(&devs) {
        table.push(vec![Cell::Int(n as u64), Cell::Real(d)]);
    }
    let mut artifacts = vec![Artifact::Csv {
        file: "dressing.csv".into(),
        table,
    }];
    if sizes.len() >= 2 && devs.iter().all(|d| *d > 0.0) {
        let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
        artifacts.push(Artifact::Json {
            file: "summary.json".into(),
            body: json!({ "slope": real(loglog_slope(&xs, &devs).during("qclt", "loglog_slope")?) }),
        });
    }
    Ok(artifacts)
}

fn pointer(p: &PointerModel, grid: TimeGrid, times: Option<&[f64]>) -> Result<Vec<Artifact>> {
    let y = pointer_trajectory_cont(p).during("apparatus", "pointer_trajectory_cont")?;
    // sampled smooth kernels decay fast enough to trip flat-mode detection
    let opts = CoordinateOptions {
        flat_ratio: f64::INFINITY,
        ..CoordinateOptions::default()
    };
    let dist = pointer_distribution_with(p, opts).during("apparatus", "pointer_distribution")?;
    let gauss = dist.law.gaussian();
    let discrete = match times {
        Some(ts) => {
            let schedule = MeasurementSchedule::new(ts.to_vec()).during("measure", "MeasurementSchedule::new")?;
            Some(
                discrete_pointer(p, &DiscreteCouplingSchedule::new(schedule))
                    .during("apparatus", "discrete_pointer")?,
            )
        }
        None => None,
    };

    let mut columns = vec!["t", "x_cl", "y_cont", "y_variance"];
    if discrete.is_some() {
        columns.push("y_discrete");
    }
    let mut table = Table::new(columns);
    for (i, t) in grid.points().into_iter().enumerate() {
        let var = gauss.map_or(f64::NAN, |g| g.variance(i));
        let mut row = vec![
            Cell::Real(t),
            Cell::Real(p.x_cl()[i]),
            Cell::Real(y[i]),
            Cell::Real(var),
        ];
        if let Some(d) = &discrete {
            row.push(Cell::Real(d.trajectory[i]));
        }
        table.push(row);
    }
    let mut artifacts = vec![Artifact::Csv {
        file: "pointer.csv".into(),
        table,
    }];
    if let Some(d) = discrete {
        let mut fb = Table::new(vec!["l", "k", "feedback"]);
        for l in 0..d.feedback.nrows() {
            for k in 0..d.feedback.ncols() {
                fb.push(vec![
                    Cell::Int(l as u64),
                    Cell::Int(k as u64),
                    Cell::Real(d.feedback[(l, k)]),
                ]);
            }
        }
        artifacts.push(Artifact::Csv {
            file: "feedback.csv".into(),
            table: fb,
        });
    }
    Ok(artifacts)
}

/// Chain CSV with columns `(j, t, x, y, z)`; `j = 0` is the source.
pub fn chain_table(chain: &DropletChain) -> Table {
    let mut table = Table::new(vec!["j", "t", "x", "y", "z"]);
    let start = std::iter::once(&chain.start);
    for (j, e) in start.chain(&chain.events).enumerate() {
        table.push(vec![
            Cell::Int(j as u64),
            Cell::Real(e.t),
            Cell::Real(e.x[0]),
            Cell::Real(e.x[1]),
            Cell::Real(e.x[2]),
        ]);
    }
    table
}

pub fn simulate(cfg: &ChamberConfig, seed: u64) -> Result<DropletChain> {
    simulate_chamber(cfg, seed, cfg.speed()).during("chamber", "simulate_chamber")
}

fn stats(xs: &[f64]) -> Value {
    if xs.is_empty() {
        return Value::Null;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
    json!({ "count": xs.len(), "mean": real(mean), "sd": real(sd), "min": real(lo), "max": real(hi) })
}

fn chamber(cfg: &ChamberConfig, seed: u64, runs: u64) -> Result<Vec<Artifact>> {
    let chains = (0..runs)
        .into_par_iter()
        .map(|i| simulate(cfg, seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let col: Vec<f64> = chains.iter().map(collinearity).collect();
    let spacing: Vec<f64> = chains.iter().filter_map(mean_spacing).collect();
    let within = col.iter().filter(|&&c| c < cfg.r_dr).count();
    let count = |r: StopReason| chains.iter().filter(|c| c.stop == Some(r)).count();
    let lengths: Vec<f64> = chains.iter().map(|c| c.len() as f64).collect();
    let body = json!({
        "runs": runs,
        "first_seed": seed,
        "droplets": stats(&lengths),
        "collinearity": {
            "max_deviation": stats(&col),
            "within_r_dr": within,
            "fraction_within_r_dr": real(within as f64 / runs as f64),
        },
        "spacing": {
            "mean_per_run": stats(&spacing),
            "expected": real(cfg.tau_i * cfg.speed()),
        },
        "stop": {
            "max_droplets": count(StopReason::MaxDroplets),
            "left_box": count(StopReason::LeftBox),
            "time_up": count(StopReason::TimeUp),
        },
    });
    Ok(vec![
        Artifact::Csv {
            file: "chain.csv".into(),
            table: chain_table(&chains[0]),
        },
        Artifact::Json {
            file: "ensemble.json".into(),
            body,
        },
    ])
}
