#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use floatfarm::farm::{equilibrium_guess, ColumnSim};
use floatfarm::harness::{FarmSetup, LpvConfig, TurbineConfig};
use floatfarm::lpv::DiscreteLpvGrid;
use floatfarm::mpc::{horizon_cost, rad_to_rpm, rpm_to_rad, CommandPlan, MpcConfig, NlPredictor};
use floatfarm::plant::{Drivetrain, WindVector};
use floatfarm::wake::WakeParams;

pub const SPACING: f64 = 882.0;

pub fn setup() -> FarmSetup {
    FarmSetup::build(&TurbineConfig::default(), Path::new(".")).unwrap()
}

/// One column of `rows` turbines held at `rpm` in steady `wind` long enough
/// for the wakes to develop.
pub fn spun_up_column(setup: &FarmSetup, drivetrain: Drivetrain, rows: usize, wind: f64, rpm: f64, seconds: f64) -> ColumnSim {
    let turbine = Arc::new(setup.turbine(drivetrain));
    let ctrl = Arc::new(setup.ctrl.clone());
    let stations: Vec<f64> = (0..rows).map(|r| r as f64 * SPACING).collect();
    let init = (0..rows)
        .map(|_| equilibrium_guess(&turbine, &ctrl, rpm_to_rad(rpm), wind))
        .collect();
    let mut col = ColumnSim::new(turbine, ctrl, &stations, &WakeParams::default(), init).unwrap();
    let front = WindVector::streamwise(wind);
    let cmd = vec![rpm_to_rad(rpm); rows];
    let dt = 0.05;
    for _ in 0..(seconds / dt).round() as usize {
        col.step(&front, &cmd, dt).unwrap();
    }
    col
}

/// A small LPV lattice around the operating points used in the tests.
pub fn small_grid(setup: &FarmSetup, dt: f64) -> Arc<DiscreteLpvGrid> {
    let cfg = LpvConfig {
        grid: None,
        omega_rpm: vec![9.0, 10.0, 11.0, 12.0],
        wind: vec![10.0, 12.0, 14.0, 16.0],
    };
    Arc::new(setup.lpv_grid(&cfg, Path::new(".")).unwrap().discretize(dt).unwrap())
}

/// Default settings with a single planned horizon.
pub fn one_horizon() -> MpcConfig {
    MpcConfig {
        n_horizons: 2,
        ..MpcConfig::default()
    }
}

pub fn nl_predictor(rows: usize, wind: f64, rpm: f64) -> NlPredictor {
    let s = setup();
    let col = spun_up_column(&s, Drivetrain::Stiff, rows, wind, rpm, 200.0);
    NlPredictor::from_measurement(&[col], &[WindVector::streamwise(wind)], 0.5).unwrap()
}

/// Cost of holding one command per turbine (rpm) over a single horizon.
pub fn cost_at(pred: &NlPredictor, rpm: &[f64], p_sp: f64, cfg: &MpcConfig) -> f64 {
    let plan = CommandPlan::from_commands(rpm.iter().map(|&r| vec![rpm_to_rad(r)]).collect());
    horizon_cost(&plan, pred, p_sp, cfg).unwrap()
}

pub fn in_box(plan: &CommandPlan, cfg: &MpcConfig) -> bool {
    plan.commands
        .iter()
        .flatten()
        .all(|&w| (cfg.omega_min_rpm..=cfg.omega_max_rpm).contains(&rad_to_rpm(w)))
}

/// Lowest single-turbine cost on a 0.001 rpm lattice over the box, and where.
pub fn fine_scan(pred: &NlPredictor, p_sp: f64, cfg: &MpcConfig) -> (f64, f64) {
    let n = ((cfg.omega_max_rpm - cfg.omega_min_rpm) / 0.001).round() as usize;
    (0..=n)
        .map(|k| {
            let r = cfg.omega_min_rpm + 0.001 * k as f64;
            (cost_at(pred, &[r], p_sp, cfg), r)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

pub fn coarse_axis(step: f64) -> Vec<f64> {
    let n = (4.0 / step).round() as usize;
    (0..=n).map(|k| 8.0 + step * k as f64).collect()
}

/// Exhaustive two-turbine search; returns the lowest cost and its commands.
pub fn grid_search(pred: &NlPredictor, p_sp: f64, cfg: &MpcConfig, axis: &[f64]) -> (f64, [f64; 2]) {
    let mut best = (f64::INFINITY, [0.0; 2]);
    for &a in axis {
        for &b in axis {
            let c = cost_at(pred, &[a, b], p_sp, cfg);
            if c < best.0 {
                best = (c, [a, b]);
            }
        }
    }
    best
}
