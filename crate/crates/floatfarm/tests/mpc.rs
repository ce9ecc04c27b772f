mod common;

use common::*;
use floatfarm::control::blended_command;
use floatfarm::mpc::*;
use floatfarm::plant::{dof, generator_power, Drivetrain, WindVector};

#[test]
fn single_turbine_solution_matches_fine_scan() {
    let cfg = one_horizon();
    let pred = nl_predictor(1, 14.0, 10.0);
    let p_sp = 4.5;
    let plan = solve_mpc(&pred, p_sp, None, &cfg, 0.0).unwrap();
    assert!(in_box(&plan, &cfg));

    let (best, best_rpm) = fine_scan(&pred, p_sp, &cfg);
    assert!(
        (plan.cost - best).abs() < 1e-3,
        "solver {:.6} at {:.4} rpm, scan {best:.6} at {best_rpm:.3} rpm",
        plan.cost,
        rad_to_rpm(plan.commands[0][0])
    );
}

#[test]
fn two_turbine_first_command_matches_grid_search() {
    let cfg = one_horizon();
    let pred = nl_predictor(2, 14.0, 10.0);
    let step = 0.25;
    let axis = coarse_axis(step);

    // out of reach above and below: the optimum is a unique box corner
    for (p_sp, corner) in [(20.0, 12.0), (2.0, 8.0)] {
        let plan = solve_mpc(&pred, p_sp, None, &cfg, 0.0).unwrap();
        let (best, arg) = grid_search(&pred, p_sp, &cfg, &axis);
        let got = plan.first();
        for i in 0..2 {
            assert!(
                (rad_to_rpm(got[i]) - arg[i]).abs() <= step,
                "P_sp {p_sp}: turbine {i} at {:.3} rpm, grid optimum {arg:?}",
                rad_to_rpm(got[i])
            );
        }
        assert_eq!(rad_to_rpm(got[0]), corner, "front turbine saturates");
        assert!(plan.cost <= best + 1e-9);
    }

    // reachable: power depends on the speed sum, so only the cost is unique
    let plan = solve_mpc(&pred, 8.0, None, &cfg, 0.0).unwrap();
    assert!(in_box(&plan, &cfg));
    let (best, arg) = grid_search(&pred, 8.0, &cfg, &axis);
    assert!(plan.cost <= best + 1e-9, "solver {} vs grid {best} at {arg:?}", plan.cost);
}

#[test]
fn regularizer_alone_holds_rotor_speeds() {
    let cfg = MpcConfig { q_e: 0.0, ..one_horizon() };
    let pred = nl_predictor(2, 14.0, 10.0);
    let plan = solve_mpc(&pred, 30.0, None, &cfg, 0.0).unwrap();
    for (c, w) in plan.first().iter().zip(pred.rotor_speeds()) {
        assert!((rad_to_rpm(*c) - rad_to_rpm(w)).abs() < 1e-3);
    }
}

#[test]
fn nl_predictor_reproduces_standalone_turbine() {
    let s = setup();
    let wind = 13.0;
    let col = spun_up_column(&s, Drivetrain::Stiff, 1, wind, 10.0, 50.0);
    let front = WindVector::streamwise(wind);
    let mut pred = NlPredictor::from_measurement(&[col.clone()], &[front], 0.5).unwrap();

    let turbine = s.turbine(Drivetrain::Stiff);
    let mut x = col.states[0];
    x.0[dof::TWIST] = 0.0;
    x.0[dof::OMEGA_G] = turbine.params.gear_ratio * x.omega_r();
    let mut cs = col.ctrl_states[0];
    let cmd = rpm_to_rad(10.7);
    for _ in 0..200 {
        let hub = turbine.hub_relative_wind(&x, &front);
        let (eta, next) = blended_command(cmd, &x, &hub, &cs, &s.ctrl, 0.5).unwrap();
        let expected = generator_power(x.omega_r(), eta.torque, &turbine.params);
        x = turbine.step(&x, &eta, &front, 0.5).unwrap();
        cs = next;
        assert_eq!(pred.step(&[cmd]).unwrap(), expected);
        assert_eq!(pred.rotor_speeds()[0], x.omega_r());
    }
}

#[test]
fn lpvtd_tracks_nl_near_a_lattice_node() {
    let s = setup();
    let grid = small_grid(&s, 1.0);
    let wind = 14.0;
    let col = spun_up_column(&s, Drivetrain::TwoMass, 2, wind, 10.0, 300.0);
    let fronts = [WindVector::streamwise(wind)];
    let mut nl = NlPredictor::from_measurement(&[col.clone()], &fronts, 0.5).unwrap();
    let mut lpv = LpvtdPredictor::from_measurement(&[col], &fronts, grid, &Default::default()).unwrap();
    let cmd = [rpm_to_rad(10.2), rpm_to_rad(9.9)];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p_lpv = lpv.step(&cmd).unwrap();
        let p_nl = nl.step(&cmd).unwrap();
        nl.step(&cmd).unwrap();
        worst = worst.max((p_lpv - p_nl).abs() / p_nl);
    }
    assert!(worst < 0.10, "worst relative power difference {worst:.4}");
}

#[test]
fn solves_are_deterministic() {
    let cfg = MpcConfig::default();
    let pred = nl_predictor(2, 14.0, 10.0);
    let a = solve_mpc(&pred, 8.5, None, &cfg, 0.0).unwrap();
    let b = solve_mpc(&pred, 8.5, None, &cfg, 0.0).unwrap();
    assert_eq!(a.commands, b.commands);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());

    let mut m1 = FarmMpc::new(cfg.clone()).unwrap();
    let mut m2 = FarmMpc::new(cfg.clone()).unwrap();
    let c1 = m1.receding_horizon_step(&pred, 8.5, 0.0).unwrap();
    let c2 = m2.receding_horizon_step(&pred, 8.5, 0.0).unwrap();
    assert_eq!(c1, c2);
    assert!(c1.iter().all(|&w| (8.0..=12.0).contains(&rad_to_rpm(w))));
    // the shifted plan bounds the next solve from unchanged conditions
    let again = m1.receding_horizon_step(&pred, 8.5, 50.0).unwrap();
    assert!(again.iter().all(|&w| (8.0..=12.0).contains(&rad_to_rpm(w))));
    let t = &m1.telemetry[1];
    assert!(t.cost <= t.warm_cost);
}

#[test]
fn predictor_copies_are_independent() {
    let pred = nl_predictor(2, 14.0, 10.0);
    let mut a = pred.clone();
    a.step(&[rpm_to_rad(12.0); 2]).unwrap();
    assert_ne!(a.rotor_speeds(), pred.rotor_speeds());
    let b = pred.clone();
    assert_eq!(b.rotor_speeds(), pred.rotor_speeds());
}
