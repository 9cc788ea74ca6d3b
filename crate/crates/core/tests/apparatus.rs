use std::f64::consts::PI;

use maclim::apparatus::*;
use maclim::grid::{FrequencyGrid, TimeGrid};
use maclim::kernel::{block_of, inverse_layout, kernel_inverse, CtpKernel};
use maclim::measure::MeasurementSchedule;
use maclim::propagators::{
    drude_kernel_freq, drude_kernel_time, oscillator_kernel_freq, oscillator_kernel_time, DrudeLags, DrudeModel,
    DrudeTimeOptions, LagKernel, OscillatorModel,
};
use maclim::qclt::{loglog_slope, CoordinateOptions};
use maclim::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

fn drude() -> DrudeModel {
    DrudeModel::new(1.0, 1.0, 1.0).unwrap()
}

fn osc() -> OscillatorModel {
    OscillatorModel::new(1.0, 1.0).unwrap()
}

fn time_grid(n: usize) -> TimeGrid {
    TimeGrid::new(0.0, 8.0, n).unwrap()
}

fn osc_mode(grid: TimeGrid, g: f64, kappa: f64) -> ApparatusMode {
    ApparatusMode::new(oscillator_kernel_time(&osc(), grid).unwrap(), g, kappa).unwrap()
}

fn model(modes: Vec<ApparatusMode>, n_s: usize, x: DVector<f64>) -> PointerModel {
    let grid = *modes[0].kernel.grid();
    let d = drude_kernel_time(&drude(), *grid.as_time().unwrap()).unwrap();
    PointerModel::new(modes, n_s, d, x, 1.0).unwrap()
}

fn cmax(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn zero_coupling_leaves_mode_untouched() {
    let grid = time_grid(41);
    let mode = osc_mode(grid, 0.0, 1.0);
    let d = drude_kernel_time(&drude(), grid).unwrap();
    assert_eq!(dressed_mode_kernel(&mode, 10, &d).unwrap(), mode.kernel);
}

#[test]
fn dressing_is_suppressed_as_inverse_ensemble_size() {
    let grid = time_grid(61);
    let mode = osc_mode(grid, 1.0, 1.0);
    let d = drude_kernel_time(&drude(), grid).unwrap();
    let sizes = [10usize, 100, 1000, 10_000];
    let devs: Vec<f64> = sizes
        .iter()
        .map(|&n| dressed_mode_kernel(&mode, n, &d).unwrap().max_abs_diff(&mode.kernel))
        .collect();
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &devs).unwrap();
    assert!((slope + 1.0).abs() < 0.05, "slope {slope}");

    let a = dressed_mode_kernel(&mode, 100, &d).unwrap().max_abs_diff(&mode.kernel);
    let b = dressed_mode_kernel(&mode, 800, &d).unwrap().max_abs_diff(&mode.kernel);
    assert!((a / b - 8.0).abs() < 0.4, "{}", a / b);
}

/// `[Block(G)^-1 + c sigma Block(D) sigma]^-1` with dense complex matrices.
#[test]
fn frequency_dressing_matches_dense_inversion() {
    let grid = FrequencyGrid::new(3.0, 64).unwrap();
    let (g, _) = oscillator_kernel_freq(&osc(), grid).unwrap();
    let (d, _) = drude_kernel_freq(&drude(), grid).unwrap();
    let mode = ApparatusMode::new(g.clone(), 1.0, 1.0).unwrap();
    let dressed = dressed_mode_kernel(&mode, 10, &d).unwrap();

    let c = Complex64::new(0.1, 0.0);
    let inv_g = block_of(&g).into_matrix().try_inverse().unwrap();
    let want = (inv_g + inverse_layout(&d).into_matrix() * c).try_inverse().unwrap();
    let got = block_of(&dressed).into_matrix();
    assert!(cmax(&(&got - &want)) < 1e-9 * cmax(&want));
}

#[test]
fn time_resolvent_matches_inverse_route_for_regular_kernels() {
    let grid = time_grid(31);
    let w = grid.weights();
    let base = drude_kernel_time(&drude(), grid).unwrap();
    // a diagonal shift makes the retarded part invertible
    let shift = DMatrix::from_diagonal(&w.map(|x| 0.3 / x));
    let g = CtpKernel::new(grid.into(), base.dn() + shift, base.df().clone(), base.di().clone()).unwrap();
    let d = drude_kernel_time(&DrudeModel::new(1.0, 0.5, 2.0).unwrap(), grid).unwrap();
    let mode = ApparatusMode::new(g.clone(), 2.0, 1.0).unwrap();
    let got = dressed_mode_kernel(&mode, 7, &d).unwrap();
    let want = kernel_inverse(&kernel_inverse(&g).unwrap().add_scaled(&d, 2.0 / 7.0).unwrap()).unwrap();
    assert!(
        got.max_abs_diff(&want) < 1e-8 * want.norm(),
        "{}",
        got.max_abs_diff(&want)
    );
}

#[test]
fn trajectory_of_zero_input_is_zero() {
    let grid = time_grid(41);
    let p = model(vec![osc_mode(grid, 1.0, 1.0)], 10, DVector::zeros(41));
    assert_eq!(pointer_trajectory_cont(&p).unwrap().amax(), 0.0);
}

#[test]
fn impulse_gives_free_retarded_response() {
    let grid = time_grid(81);
    let k0 = 20;
    let mut x = DVector::zeros(81);
    x[k0] = 1.0;
    let p = model(vec![osc_mode(grid, 1.0, 1.0)], 1_000_000_000_000, x);
    let y = pointer_trajectory_cont(&p).unwrap();
    let t = grid.points();
    for (i, ti) in t.iter().enumerate() {
        let free = if i > k0 { -(ti - t[k0]).sin() } else { 0.0 };
        assert!((y[i] - free * grid.dt()).abs() < 1e-10, "i={i}");
    }
}

#[test]
fn modes_are_averaged_over_apparatus_size() {
    let grid = time_grid(41);
    let x = DVector::from_fn(41, |i, _| (i as f64 * 0.2).sin());
    let one = pointer_trajectory_cont(&model(vec![osc_mode(grid, 2.0, 1.0)], 10, x.clone())).unwrap();
    let two = pointer_trajectory_cont(&model(vec![osc_mode(grid, 2.0, 1.0), osc_mode(grid, 0.0, 1.0)], 10, x)).unwrap();
    assert!((one * 0.5 - two).amax() < 1e-14);
}

#[test]
fn trajectory_is_causal() {
    let grid = time_grid(41);
    let x = DVector::from_fn(41, |i, _| if i >= 25 { 1.0 } else { 0.0 });
    let y = pointer_trajectory_cont(&model(vec![osc_mode(grid, 1.0, 1.0)], 10, x)).unwrap();
    // the dense resolvent leaves rounding-level acausal entries
    assert!(y.rows(0, 26).amax() < 1e-14 * y.amax());
    assert!(y.rows(26, 15).amax() > 0.0);
}

/// `m (y'' + omega0^2 y) = -(kappa g / N_a) x` for a single oscillator mode.
#[test]
fn trajectory_obeys_the_oscillator_equation() {
    let residual = |n: usize| {
        let grid = time_grid(n);
        let t = grid.points();
        let x = DVector::from_fn(n, |i, _| t[i] * t[i] * (-t[i]).exp());
        let y = pointer_trajectory_cont(&model(vec![osc_mode(grid, 1.5, 2.0)], 1_000_000_000, x.clone())).unwrap();
        let h = grid.dt();
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let acc = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
            worst = worst.max((acc + y[i] + 3.0 * x[i]).abs());
        }
        worst
    };
    let (coarse, fine) = (residual(81), residual(161));
    assert!(coarse < 0.05, "{coarse}");
    assert!(coarse / fine > 3.5, "{coarse} -> {fine}");
}

#[test]
fn pointer_kernel_weights() {
    let grid = time_grid(31);
    let x = DVector::zeros(31);
    let single = pointer_kernel(&model(vec![osc_mode(grid, 0.0, 1.0)], 10, x.clone())).unwrap();
    assert_eq!(single, osc_mode(grid, 0.0, 1.0).kernel);

    let doubled = pointer_kernel(&model(vec![osc_mode(grid, 0.5, 2.0)], 10, x.clone())).unwrap();
    let base = pointer_kernel(&model(vec![osc_mode(grid, 0.5, 1.0)], 10, x.clone())).unwrap();
    assert!(doubled.max_abs_diff(&base.scale(4.0)) < 1e-14);

    let pair = pointer_kernel(&model(vec![osc_mode(grid, 0.5, 1.0), osc_mode(grid, 0.5, 1.0)], 10, x)).unwrap();
    assert!(pair.max_abs_diff(&base) < 1e-15);
}

#[test]
fn pointer_distribution_uses_pointer_kernel() {
    let grid = TimeGrid::new(0.0, 4.0, 21).unwrap();
    let drude_mode = || ApparatusMode::new(drude_kernel_time(&drude(), grid).unwrap(), 0.5, 1.0).unwrap();
    let x = DVector::from_fn(21, |i, _| 0.1 * i as f64);
    let opts = CoordinateOptions {
        flat_ratio: f64::INFINITY,
        ..CoordinateOptions::default()
    };
    let p = model(vec![drude_mode()], 10, x.clone());
    let dist = pointer_distribution_with(&p, opts).unwrap();
    let gauss = dist.law.gaussian().unwrap();
    let gp = pointer_kernel(&p).unwrap();
    assert!((gauss.covariance() + gp.di()).amax() < 1e-12);
    assert!((gauss.mean() - pointer_trajectory_cont(&p).unwrap()).amax() < 1e-15);

    let four = model((0..4).map(|_| drude_mode()).collect(), 10, x);
    let g4 = pointer_distribution_with(&four, opts).unwrap();
    let ratio = gauss.variance(7) / g4.law.gaussian().unwrap().variance(7);
    assert!((ratio - 4.0).abs() < 1e-12);
}

#[test]
fn pointer_decoherence_vanishes_without_branch_difference() {
    let grid = FrequencyGrid::new(5.0, 33).unwrap();
    let (g, _) = drude_kernel_freq(&drude(), grid).unwrap();
    let (d, _) = drude_kernel_freq(&DrudeModel::new(1.0, 0.7, 1.5).unwrap(), grid).unwrap();
    let p = PointerModel::new(
        vec![ApparatusMode::new(g, 1.0, 1.0).unwrap()],
        20,
        d,
        DVector::zeros(33),
        1.0,
    )
    .unwrap();
    let dist = pointer_distribution(&p).unwrap();
    let action = dist.action().unwrap();
    assert_eq!(action.decoherence_spectral(&DVector::zeros(33)).unwrap(), 0.0);
    let y_d = DVector::from_fn(33, |q, _| Complex64::new(1.0 / (1.0 + q as f64), 0.0));
    assert!(action.decoherence_spectral(&y_d).unwrap() > 0.0);
    assert!(dist.decoherence_kernel().unwrap().di().iter().all(|v| *v >= 0.0));
}

fn discrete_fixture(n_s: usize, times: Vec<f64>) -> (PointerModel, DiscreteCouplingSchedule) {
    let grid = time_grid(41);
    let t = grid.points();
    let x = DVector::from_fn(41, |i, _| (0.7 * t[i]).cos());
    let modes = vec![osc_mode(grid, 1.0, 1.5), osc_mode(grid, 0.6, -0.4)];
    let p = model(modes, n_s, x);
    (
        p,
        DiscreteCouplingSchedule::new(MeasurementSchedule::new(times).unwrap()),
    )
}

fn branch_block(n: f64, f: f64, i: f64) -> [[Complex64; 2]; 2] {
    [
        [Complex64::new(n, i), Complex64::new(-f, i)],
        [Complex64::new(f, i), Complex64::new(-n, i)],
    ]
}

/// Dense elimination of the stroboscope coordinates and their sources,
/// `v = (x~, j~)`, with every apparatus mode integrated out separately.
fn discrete_oracle(p: &PointerModel, times: &[f64], n_s: f64) -> (DVector<f64>, DMatrix<Complex64>) {
    let grid = p.system_kernel().grid().as_time().unwrap();
    let t = grid.points();
    let (nt, m) = (t.len(), times.len());
    let n_a = p.modes().len() as f64;
    let couplings = [(1.0, 1.5), (0.6, -0.4)];
    let lag = |tau: f64| osc().at(tau).unwrap();

    let mut g_kg = DMatrix::<Complex64>::zeros(2 * nt, 2 * m);
    let mut g_gg = DMatrix::<Complex64>::zeros(2 * m, 2 * m);
    let mut free = DMatrix::<Complex64>::zeros(2 * nt, 2 * nt);
    for &(g, kappa) in &couplings {
        for a in 0..nt {
            for l in 0..m {
                let (dn, df, di) = lag(t[a] - times[l]);
                let b = branch_block(dn, df, di);
                for s in 0..2 {
                    for r in 0..2 {
                        g_kg[(s * nt + a, r * m + l)] += b[s][r] * (kappa * g / n_a);
                    }
                }
            }
            for c in 0..nt {
                let (dn, df, di) = lag(t[a] - t[c]);
                let b = branch_block(dn, df, di);
                for s in 0..2 {
                    for r in 0..2 {
                        free[(s * nt + a, r * nt + c)] += b[s][r] * (kappa * kappa / (n_a * n_a));
                    }
                }
            }
        }
        for l in 0..m {
            for k in 0..m {
                let (dn, df, di) = lag(times[l] - times[k]);
                let b = branch_block(dn, df, di);
                for s in 0..2 {
                    for r in 0..2 {
                        g_gg[(s * m + l, r * m + k)] += b[s][r] * (g * g / n_a);
                    }
                }
            }
        }
    }

    let sys = DrudeLags {
        model: drude(),
        options: DrudeTimeOptions::default(),
    };
    let mut dmat = DMatrix::<Complex64>::zeros(2 * m, 2 * m);
    for l in 0..m {
        for k in 0..m {
            let (mut dn, mut df, di) = sys.at(times[l] - times[k]).unwrap();
            if l == k {
                dn = 0.0;
                df = 0.0;
            }
            let b = branch_block(dn, df, di);
            for s in 0..2 {
                for r in 0..2 {
                    dmat[(s * m + l, r * m + k)] = b[s][r];
                }
            }
        }
    }
    let sig = |k: usize, n: usize| if k < n { 1.0 } else { -1.0 };
    let a = DMatrix::from_fn(2 * m, 2 * m, |i, j| g_gg[(i, j)] * (n_a * sig(i, m) * sig(j, m)));
    let c = &dmat / Complex64::new(n_s, 0.0);
    let mut big = DMatrix::<Complex64>::zeros(4 * m, 4 * m);
    big.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&a);
    big.view_mut((2 * m, 2 * m), (2 * m, 2 * m)).copy_from(&c);
    for i in 0..2 * m {
        big[(i, 2 * m + i)] = Complex64::new(1.0, 0.0);
        big[(2 * m + i, i)] = Complex64::new(1.0, 0.0);
    }
    let inv = big.try_inverse().unwrap();
    let xx = -inv.view((0, 0), (2 * m, 2 * m)).into_owned();
    let xj = inv.view((0, 2 * m), (2 * m, 2 * m)).into_owned();

    let left = DMatrix::from_fn(2 * nt, 2 * m, |i, j| g_kg[(i, j)] * sig(j, m));
    let prop = free + &left * xx * left.transpose();
    let xbar = DVector::from_fn(2 * m, |i, _| {
        let tl = times[i % m];
        Complex64::new((0.7 * tl).cos(), 0.0)
    });
    let y = left * xj * xbar;
    (DVector::from_fn(nt, |i, _| y[i].re), prop)
}

#[test]
fn discrete_pointer_matches_dense_elimination() {
    for (n_s, times) in [(10usize, vec![1.0, 3.0]), (3, vec![0.6, 2.2, 5.0])] {
        let (p, dsc) = discrete_fixture(n_s, times.clone());
        let got = discrete_pointer(&p, &dsc).unwrap();
        let (y, prop) = discrete_oracle(&p, &times, n_s as f64);
        assert!(
            (&got.trajectory - &y).amax() < 1e-6 * y.amax(),
            "{}",
            (&got.trajectory - &y).amax()
        );
        let dev = cmax(&(got.propagator.matrix() - &prop));
        assert!(dev < 1e-6 * cmax(&prop), "{dev}");
        got.kernel().unwrap();
    }
}

#[test]
fn discrete_pointer_without_feedback() {
    let (p, dsc) = discrete_fixture(1_000_000_000_000, vec![1.0, 3.0]);
    let got = discrete_pointer(&p, &dsc).unwrap();
    assert!((&got.feedback - DMatrix::identity(2, 2)).amax() < 1e-10);
    let t = p.system_kernel().grid().as_time().unwrap().points();
    for (i, ti) in t.iter().enumerate() {
        let free: f64 = [1.0f64, 3.0]
            .iter()
            .map(|&tl| {
                let (n, f, _) = osc().at(ti - tl).unwrap();
                (1.5 * 1.0 + 0.6 * -0.4) / 2.0 * (n + f) * (0.7 * tl).cos()
            })
            .sum();
        assert!((got.trajectory[i] - free).abs() < 1e-10);
    }
}

#[test]
fn single_measurement_has_no_feedback() {
    let (p, dsc) = discrete_fixture(3, vec![2.0]);
    let got = discrete_pointer(&p, &dsc).unwrap();
    assert!((got.feedback[(0, 0)] - 1.0).abs() <= 1e-15);
}

#[test]
fn mass_shell_spacing_is_singular() {
    let grid = TimeGrid::new(0.0, 2.0 * PI, 41).unwrap();
    let sys = oscillator_kernel_time(&osc(), grid).unwrap();
    let mode = osc_mode(grid, 1.0, 1.0);
    let p = PointerModel::new(vec![mode], 10, sys, DVector::zeros(41), 1.0).unwrap();
    let dsc = DiscreteCouplingSchedule::new(MeasurementSchedule::new(vec![0.0, PI]).unwrap());
    assert!(matches!(
        discrete_pointer(&p, &dsc),
        Err(Error::SingularStroboscope { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectory_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let grid = time_grid(31);
        let t = grid.points();
        let phase = seed as f64 * 0.01;
        let x1 = DVector::from_fn(31, |i, _| (t[i] + phase).sin());
        let x2 = DVector::from_fn(31, |i, _| (0.3 * t[i] - phase).cos());
        let y = |x: DVector<f64>| pointer_trajectory_cont(&model(vec![osc_mode(grid, 1.2, 0.8)], 10, x)).unwrap();
        let lhs = y(&x1 * a + &x2 * b);
        let rhs = y(x1) * a + y(x2) * b;
        prop_assert!((lhs - rhs).amax() < 1e-12 * (1.0 + a.abs() + b.abs()));
    }
}
