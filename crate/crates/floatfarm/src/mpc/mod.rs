//! Receding-horizon farm controller.
//!
//! Decision variables are per-turbine rotor-speed commands held piecewise
//! constant over `N_C - 1` horizons of length `T_C`. The cost adds a tracking
//! term `Q_e (P_sp - sum P_gen)^2` integrated over the prediction and a
//! regularizer `Q_w (omega_r - omega_c)^2` sampled at each horizon start.
//! Power enters in MW and rotor speed in rpm. The optimizer works in rpm.

pub mod lpvtd;
pub mod nl;

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

pub use lpvtd::LpvtdPredictor;
pub use nl::NlPredictor;

pub fn rpm_to_rad(v: f64) -> f64 {
    v * PI / 30.0
}

pub fn rad_to_rpm(v: f64) -> f64 {
    v * 30.0 / PI
}

/// Which model the controller predicts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// Plant, inner loop and PDE wake.
    #[default]
    NlMpc,
    /// Scheduled LPV turbines and delay-line wakes.
    LpvtdMpc,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::NlMpc => "nl-mpc",
            PredictorKind::LpvtdMpc => "lpvtd-mpc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nl-mpc" => Ok(PredictorKind::NlMpc),
            "lpvtd-mpc" => Ok(PredictorKind::LpvtdMpc),
            other => Err(FarmError::Config(format!("unknown controller `{other}` (expected nl-mpc or lpvtd-mpc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub max_iter: usize,
    /// Central-difference step (rpm).
    pub fd_step: f64,
    /// Stop when the projected-gradient step is below this (rpm).
    pub tol: f64,
    /// Stop when an iteration improves the cost by less than this fraction.
    pub rel_tol: f64,
    /// L-BFGS memory.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iter: 30,
            fd_step: 1e-2,
            tol: 1e-3,
            rel_tol: 1e-6,
            memory: 6,
            armijo: 1e-4,
            max_backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Horizon length `T_C` (s).
    pub horizon: f64,
    /// `N_C`; the plan spans `N_C - 1` horizons.
    pub n_horizons: usize,
    /// Tracking weight on power error (1/MW^2 s).
    pub q_e: f64,
    /// Regularization weight on speed deviation (1/rpm^2).
    pub q_omega: f64,
    /// Command box (rpm).
    pub omega_min_rpm: f64,
    pub omega_max_rpm: f64,
    /// Re-solve interval (s); `None` uses the horizon length.
    pub update_interval: Option<f64>,
    pub predictor: PredictorKind,
    /// Predictor steps (s).
    pub nl_dt: f64,
    pub lpv_dt: f64,
    pub optimizer: OptimizerSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            n_horizons: 5,
            q_e: 1.0,
            q_omega: 0.01,
            omega_min_rpm: 8.0,
            omega_max_rpm: 12.0,
            update_interval: None,
            predictor: PredictorKind::default(),
            nl_dt: 0.5,
            lpv_dt: 1.0,
            optimizer: OptimizerSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FarmError::Config(m));
        if !(self.horizon > 0.0) {
            return bad(format!("horizon length must be positive, got {}", self.horizon));
        }
        if self.n_horizons < 2 {
            return bad(format!("need N_C >= 2, got {}", self.n_horizons));
        }
        if !(self.q_e >= 0.0) || !(self.q_omega >= 0.0) {
            return bad("MPC weights must be non-negative".into());
        }
        if !(self.omega_min_rpm > 0.0 && self.omega_min_rpm <= self.omega_max_rpm) {
            return bad(format!(
                "command bounds [{}, {}] rpm are not ordered and positive",
                self.omega_min_rpm, self.omega_max_rpm
            ));
        }
        if let Some(t) = self.update_interval {
            if !(t > 0.0) {
                return bad(format!("update interval must be positive, got {t}"));
            }
        }
        for (name, dt) in [("nl_dt", self.nl_dt), ("lpv_dt", self.lpv_dt)] {
            if !(dt > 0.0) || steps_per(self.horizon, dt).is_none() {
                return bad(format!("{name} = {dt} must divide the horizon {}", self.horizon));
            }
        }
        let o = &self.optimizer;
        if !(o.fd_step > 0.0) || o.memory == 0 || !(o.armijo > 0.0 && o.armijo < 1.0) {
            return bad("optimizer settings out of range".into());
        }
        Ok(())
    }

    /// Number of planned horizons, `N_C - 1`.
    pub fn n_plan(&self) -> usize {
        self.n_horizons - 1
    }

    pub fn update_interval(&self) -> f64 {
        self.update_interval.unwrap_or(self.horizon)
    }

    pub fn predictor_dt(&self) -> f64 {
        match self.predictor {
            PredictorKind::NlMpc => self.nl_dt,
            PredictorKind::LpvtdMpc => self.lpv_dt,
        }
    }

    fn project(&self, v: f64) -> f64 {
        v.clamp(self.omega_min_rpm, self.omega_max_rpm)
    }
}

fn steps_per(horizon: f64, dt: f64) -> Option<usize> {
    let n = (horizon / dt).round();
    ((n * dt - horizon).abs() < 1e-9 * horizon && n >= 1.0).then_some(n as usize)
}

/// A model that can be rolled forward under rotor-speed commands. Copies
/// are independent.
pub trait Predictor: Clone + Send + Sync {
    fn n_turbines(&self) -> usize;
    fn dt(&self) -> f64;
    /// Current rotor speeds (rad/s).
    fn rotor_speeds(&self) -> Vec<f64>;
    /// Advances one step under `omega_c` (rad/s); returns the farm generator
    /// power at the step start (W).
    fn step(&mut self, omega_c: &[f64]) -> Result<f64>;
}

/// Per-turbine commands over the planned horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandPlan {
    /// `commands[i][q]`, rad/s.
    pub commands: Vec<Vec<f64>>,
    /// Simulation time of the solve (s).
    pub time: f64,
    pub cost: f64,
    pub iterations: usize,
    pub hit_iteration_limit: bool,
    pub cost_evaluations: usize,
    /// Cost of the best starting point.
    pub warm_cost: f64,
    pub wall_time: f64,
}

impl CommandPlan {
    /// Plan holding constant commands.
    pub fn constant(omega_c: &[f64], n_plan: usize) -> Self {
        Self::from_commands(omega_c.iter().map(|&w| vec![w; n_plan]).collect())
    }

    pub fn from_commands(commands: Vec<Vec<f64>>) -> Self {
        Self {
            commands,
            time: 0.0,
            cost: f64::NAN,
            iterations: 0,
            hit_iteration_limit: false,
            cost_evaluations: 0,
            warm_cost: f64::NAN,
            wall_time: 0.0,
        }
    }

    pub fn n_turbines(&self) -> usize {
        self.commands.len()
    }

    /// Commands for the first horizon (rad/s).
    pub fn first(&self) -> Vec<f64> {
        self.commands.iter().map(|c| c[0]).collect()
    }

    /// Drops the first `k` horizons, repeating the last command at the end.
    pub fn shifted(&self, k: usize) -> Self {
        let commands = self
            .commands
            .iter()
            .map(|c| {
                let last = *c.last().expect("plans have at least one horizon");
                (0..c.len()).map(|q| c.get(q + k).copied().unwrap_or(last)).collect()
            })
            .collect();
        Self::from_commands(commands)
    }

    fn to_rpm(&self) -> Vec<f64> {
        self.commands.iter().flatten().map(|&w| rad_to_rpm(w)).collect()
    }

    fn check(&self, n_turbines: usize, cfg: &MpcConfig) -> Result<()> {
        if self.commands.len() != n_turbines {
            return Err(FarmError::Dimension {
                expected: n_turbines,
                got: self.commands.len(),
            });
        }
        if let Some(c) = self.commands.iter().find(|c| c.len() != cfg.n_plan()) {
            return Err(FarmError::Dimension {
                expected: cfg.n_plan(),
                got: c.len(),
            });
        }
        Ok(())
    }

    /// Number of entries resting on either bound.
    pub fn saturated(&self, cfg: &MpcConfig) -> usize {
        self.commands
            .iter()
            .flatten()
            .filter(|&&w| {
                let r = rad_to_rpm(w);
                (r - cfg.omega_min_rpm).abs() < 1e-9 || (r - cfg.omega_max_rpm).abs() < 1e-9
            })
            .count()
    }
}

/// Cost of a plan given as a flat turbine-major rpm vector.
fn cost_rpm<P: Predictor>(pred: &P, plan: &[f64], p_sp_mw: f64, cfg: &MpcConfig) -> Result<f64> {
    let n = pred.n_turbines();
    let nq = cfg.n_plan();
    let steps = steps_per(cfg.horizon, pred.dt())
        .ok_or_else(|| FarmError::Config(format!("predictor step {} does not divide the horizon", pred.dt())))?;
    let dt = pred.dt();
    let mut p = pred.clone();
    let mut cmd = vec![0.0; n];
    let mut cost = 0.0;
    for q in 0..nq {
        let omega = p.rotor_speeds();
        for i in 0..n {
            let c = plan[i * nq + q];
            cmd[i] = rpm_to_rad(c);
            cost += cfg.q_omega * (rad_to_rpm(omega[i]) - c).powi(2);
        }
        if cfg.q_e == 0.0 {
            // tracking term vanishes; the trajectory is still needed for omega
            for _ in 0..steps {
                p.step(&cmd)?;
            }
            continue;
        }
        for _ in 0..steps {
            let e = p_sp_mw - 1e-6 * p.step(&cmd)?;
            cost += cfg.q_e * e * e * dt;
        }
    }
    if cost.is_finite() {
        Ok(cost)
    } else {
        Err(FarmError::Diverged { dof: "horizon cost" })
    }
}

/// Cost of `plan` from the predictor's current state, with the setpoint (MW)
/// held over the whole prediction.
pub fn horizon_cost<P: Predictor>(plan: &CommandPlan, predictor: &P, p_sp_mw: f64, cfg: &MpcConfig) -> Result<f64> {
    plan.check(predictor.n_turbines(), cfg)?;
    cost_rpm(predictor, &plan.to_rpm(), p_sp_mw, cfg)
}

struct Objective<'a, P: Predictor> {
    pred: &'a P,
    p_sp: f64,
    cfg: &'a MpcConfig,
    evals: std::sync::atomic::AtomicUsize,
}

impl<P: Predictor> Objective<'_, P> {
    /// Failed predictions count as infinitely expensive.
    fn value(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        cost_rpm(self.pred, x, self.p_sp, self.cfg).unwrap_or(f64::INFINITY)
    }

    /// Central differences, evaluated in parallel; one-sided where a side fails.
    fn gradient(&self, x: &[f64], fx: f64) -> Vec<f64> {
        let h = self.cfg.optimizer.fd_step;
        let vals: Vec<f64> = (0..2 * x.len())
            .into_par_iter()
            .map(|k| {
                let mut z = x.to_vec();
                z[k / 2] += if k % 2 == 0 { h } else { -h };
                self.value(&z)
            })
            .collect();
        vals.chunks(2)
            .map(|v| match (v[0].is_finite(), v[1].is_finite()) {
                (true, true) => (v[0] - v[1]) / (2.0 * h),
                (true, false) => (v[0] - fx) / h,
                (false, true) => (fx - v[1]) / h,
                (false, false) => 0.0,
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes the horizon cost over the command box by projected L-BFGS.
///
/// Starts from the cheaper of `warm` (if given) and the plan holding current
/// rotor speeds, so the result never costs more than the warm start. Hitting
/// the iteration limit returns the best iterate with the flag set.
pub fn solve_mpc<P: Predictor>(predictor: &P, p_sp_mw: f64, warm: Option<&CommandPlan>, cfg: &MpcConfig, time: f64) -> Result<CommandPlan> {
    cfg.validate()?;
    let start = Instant::now();
    let n_t = predictor.n_turbines();
    let nq = cfg.n_plan();
    let obj = Objective {
        pred: predictor,
        p_sp: p_sp_mw,
        cfg,
        evals: Default::default(),
    };
    let hold = CommandPlan::constant(&predictor.rotor_speeds(), nq);
    let mut starts = Vec::new();
    if let Some(w) = warm {
        w.check(n_t, cfg)?;
        starts.push(w.to_rpm());
    }
    starts.push(hold.to_rpm());
    let (mut x, mut fx) = starts
        .into_iter()
        .map(|s| {
            let s: Vec<f64> = s.into_iter().map(|v| cfg.project(v)).collect();
            let f = obj.value(&s);
            (s, f)
        })
        .reduce(|best, cand| if cand.1 < best.1 { cand } else { best })
        .expect("at least one start");
    if !fx.is_finite() {
        return Err(FarmError::Diverged { dof: "MPC warm start" });
    }
    let warm_cost = fx;

    let o = &cfg.optimizer;
    let n = x.len();
    let mut g = obj.gradient(&x, fx);
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < o.max_iter {
        let active: Vec<bool> = (0..n)
            .map(|i| (x[i] <= cfg.omega_min_rpm && g[i] > 0.0) || (x[i] >= cfg.omega_max_rpm && g[i] < 0.0))
            .collect();
        let pg = (0..n).map(|i| (cfg.project(x[i] - g[i]) - x[i]).abs()).fold(0.0, f64::max);
        if pg < o.tol {
            converged = true;
            break;
        }
        iterations += 1;

        // two-loop recursion on the free variables
        let mut d: Vec<f64> = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
        let mut alpha = vec![0.0; mem.len()];
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= alpha[k] * yi);
        }
        let gamma = match mem.last() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 0.5 / g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12),
        };
        d.iter_mut().for_each(|v| *v *= gamma);
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (alpha[k] - b) * si);
        }
        for i in 0..n {
            if active[i] {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..n).map(|i| if active[i] { 0.0 } else { -gamma.abs() * g[i] }).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=o.max_backtracks {
            let xn: Vec<f64> = (0..n).map(|i| cfg.project(x[i] + t * d[i])).collect();
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            let fn_ = obj.value(&xn);
            if fn_.is_finite() && fn_ <= fx + o.armijo * decrease && fn_ <= fx {
                accepted = Some((xn, fn_));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            if mem.is_empty() {
                converged = true;
                break;
            }
            mem.clear();
            continue;
        };
        let gn = obj.gradient(&xn, fn_);
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            mem.push((s, y, 1.0 / sy));
            if mem.len() > o.memory {
                mem.remove(0);
            }
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement <= o.rel_tol * fx.abs().max(1e-12) {
            converged = true;
            break;
        }
    }

    let commands = (0..n_t)
        .map(|i| (0..nq).map(|q| rpm_to_rad(x[i * nq + q])).collect())
        .collect();
    Ok(CommandPlan {
        commands,
        time,
        cost: fx,
        iterations,
        hit_iteration_limit: !converged,
        cost_evaluations: obj.evals.into_inner(),
        warm_cost,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One row of solver telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub time: f64,
    pub p_sp_mw: f64,
    pub cost: f64,
    pub warm_cost: f64,
    pub iterations: usize,
    pub cost_evaluations: usize,
    pub wall_time: f64,
    pub hit_iteration_limit: bool,
    /// Plan entries resting on a bound.
    pub saturated: usize,
}

pub fn write_telemetry_csv<W: std::io::Write>(records: &[SolveRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush().map_err(|e| FarmError::io("<telemetry>", e))?;
    Ok(())
}

/// Receding-horizon wrapper: keeps the previous plan for warm starts and
/// logs every solve.
#[derive(Debug, Clone)]
pub struct FarmMpc {
    pub cfg: MpcConfig,
    pub plan: Option<CommandPlan>,
    pub telemetry: Vec<SolveRecord>,
}

impl FarmMpc {
    pub fn new(cfg: MpcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            plan: None,
            telemetry: Vec::new(),
        })
    }

    /// Solves from the predictor's (freshly measured) state and returns the
    /// first-horizon commands (rad/s) to dispatch.
    pub fn receding_horizon_step<P: Predictor>(&mut self, predictor: &P, p_sp_mw: f64, time: f64) -> Result<Vec<f64>> {
        let shift = (self.cfg.update_interval() / self.cfg.horizon).round() as usize;
        let warm = self.plan.as_ref().map(|p| p.shifted(shift));
        let plan = solve_mpc(predictor, p_sp_mw, warm.as_ref(), &self.cfg, time)?;
        if plan.hit_iteration_limit {
            log::debug!("MPC solve at t = {time} s stopped at the iteration limit");
        }
        self.telemetry.push(SolveRecord {
            time,
            p_sp_mw,
            cost: plan.cost,
            warm_cost: plan.warm_cost,
            iterations: plan.iterations,
            cost_evaluations: plan.cost_evaluations,
            wall_time: plan.wall_time,
            hit_iteration_limit: plan.hit_iteration_limit,
            saturated: plan.saturated(&self.cfg),
        });
        let first = plan.first();
        self.plan = Some(plan);
        Ok(first)
    }

    pub fn total_solve_time(&self) -> f64 {
        self.telemetry.iter().map(|r| r.wall_time).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First-order rotor `w' = (w_c - w) / tau` making `k w` watts.
    #[derive(Clone)]
    struct Toy {
        w: Vec<f64>,
        tau: f64,
        k: f64,
        dt: f64,
    }

    impl Predictor for Toy {
        fn n_turbines(&self) -> usize {
            self.w.len()
        }
        fn dt(&self) -> f64 {
            self.dt
        }
        fn rotor_speeds(&self) -> Vec<f64> {
            self.w.clone()
        }
        fn step(&mut self, c: &[f64]) -> Result<f64> {
            let p: f64 = self.w.iter().map(|w| self.k * w).sum();
            for (w, c) in self.w.iter_mut().zip(c) {
                *w += self.dt * (c - *w) / self.tau;
            }
            Ok(p)
        }
    }

    fn cfg(n_horizons: usize) -> MpcConfig {
        MpcConfig {
            n_horizons,
            ..MpcConfig::default()
        }
    }

    #[test]
    fn matched_plan_costs_nothing() {
        let w = rpm_to_rad(10.0);
        let toy = Toy {
            w: vec![w, w],
            tau: 5.0,
            k: 1e6,
            dt: 0.5,
        };
        let p_sp = 2.0 * w;
        let plan = CommandPlan::constant(&[w, w], 4);
        assert!(horizon_cost(&plan, &toy, p_sp, &cfg(5)).unwrap() < 1e-20);
    }

    #[test]
    fn constant_error_integrates_by_rectangles() {
        // tau huge: power frozen, error eps over one horizon of T_C
        let w = rpm_to_rad(10.0);
        let toy = Toy {
            w: vec![w],
            tau: 1e30,
            k: 1e6,
            dt: 0.5,
        };
        let eps = 0.7;
        let mut c = cfg(2);
        c.q_omega = 0.0;
        let plan = CommandPlan::constant(&[rpm_to_rad(11.0)], 1);
        let got = horizon_cost(&plan, &toy, w + eps, &c).unwrap();
        assert!((got - eps * eps * 50.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn cost_grows_with_regularization_weight() {
        let w = rpm_to_rad(10.0);
        let toy = Toy {
            w: vec![w],
            tau: 5.0,
            k: 1e6,
            dt: 0.5,
        };
        let plan = CommandPlan::constant(&[rpm_to_rad(11.5)], 2);
        let mut prev = f64::NEG_INFINITY;
        for q in [0.0, 0.01, 0.1, 1.0] {
            let c = MpcConfig {
                n_horizons: 3,
                q_omega: q,
                ..MpcConfig::default()
            };
            let v = horizon_cost(&plan, &toy, 1.0, &c).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn without_tracking_weight_commands_stay_at_rotor_speed() {
        let toy = Toy {
            w: vec![rpm_to_rad(9.3), rpm_to_rad(11.1)],
            tau: 5.0,
            k: 1e6,
            dt: 0.5,
        };
        let mut c = cfg(3);
        c.q_e = 0.0;
        let warm = CommandPlan::constant(&[rpm_to_rad(12.0), rpm_to_rad(8.0)], 2);
        let plan = solve_mpc(&toy, 30.0, Some(&warm), &c, 0.0).unwrap();
        for (i, w0) in [9.3, 11.1].iter().enumerate() {
            for &v in &plan.commands[i] {
                assert!((rad_to_rpm(v) - w0).abs() < 1e-6, "{}", rad_to_rpm(v));
            }
        }
        assert!(plan.cost < 1e-10);
    }

    #[test]
    fn solution_never_costs_more_than_the_warm_start_and_stays_in_the_box() {
        let toy = Toy {
            w: vec![rpm_to_rad(10.0); 3],
            tau: 8.0,
            k: 1e6,
            dt: 1.0,
        };
        let c = cfg(4);
        for p_sp in [1.0, 3.0, 3.2, 5.0] {
            let warm = CommandPlan::constant(&[rpm_to_rad(9.0), rpm_to_rad(10.0), rpm_to_rad(11.0)], 3);
            let wc = horizon_cost(&warm, &toy, p_sp, &c).unwrap();
            let plan = solve_mpc(&toy, p_sp, Some(&warm), &c, 0.0).unwrap();
            assert!(plan.cost <= wc);
            assert!((horizon_cost(&plan, &toy, p_sp, &c).unwrap() - plan.cost).abs() < 1e-9);
            for &v in plan.commands.iter().flatten() {
                let r = rad_to_rpm(v);
                assert!((8.0..=12.0).contains(&r), "{r}");
            }
        }
    }

    #[test]
    fn shift_drops_leading_horizons() {
        let p = CommandPlan::from_commands(vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(p.shifted(1).commands, vec![vec![2.0, 3.0, 3.0]]);
        assert_eq!(p.shifted(0).commands, p.commands);
        assert_eq!(p.shifted(5).commands, vec![vec![3.0, 3.0, 3.0]]);
    }

    #[test]
    fn config_checks() {
        assert!(MpcConfig::default().validate().is_ok());
        assert!(cfg(1).validate().is_err());
        let mut c = MpcConfig::default();
        c.omega_min_rpm = 13.0;
        assert!(c.validate().is_err());
        c = MpcConfig::default();
        c.nl_dt = 0.3;
        assert!(c.validate().is_err());
        assert_eq!(PredictorKind::parse("lpvtd-mpc").unwrap(), PredictorKind::LpvtdMpc);
        assert!(PredictorKind::parse("pid").is_err());
    }
}
