//! Scenario orchestration: builds the farm, runs the truth simulation under
//! a farm controller and scores the result.

pub mod cli;
pub mod inflow;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{check_region2_gains, BlendConfig, ControllerConfig, GainCheck, Region2Gains, Region3Schedule, Region3Torque};
use crate::error::{FarmError, Result};
use crate::farm::{equilibrium_guess, ColumnSim, FarmLayout, TurbineSample};
use crate::lpv::io::load_grid;
use crate::lpv::{build_grid, design_region3_schedule, LpvGrid, Region3DesignConfig, TrimOptions, TurbineClosedLoop};
use crate::mpc::{rpm_to_rad, FarmMpc, LpvtdPredictor, MpcConfig, NlPredictor, PredictorKind, SolveRecord};
use crate::pjm::{composite_score, normalize_regd_signal, PowerPair, RegdSignal, Scorecard};
use crate::plant::{AeroSurfaces, Drivetrain, Turbine, TurbineParams};
use crate::wake::WakeParams;

pub use inflow::{ingest_inflow, synth_inflow, synth_regd, InflowBoundary, SynthInflow, SynthRegd};

/// Scenario schema version understood by this build.
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InflowSource {
    Synthetic(SynthInflow),
    Csv { path: PathBuf },
}

/// Inflow of one column and its scale factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnInflow {
    #[serde(default = "one")]
    pub scale: f64,
    pub source: InflowSource,
}

fn one() -> f64 {
    1.0
}

impl ColumnInflow {
    pub fn resolve(&self, base: &Path, duration: f64, seed: u64) -> Result<InflowBoundary> {
        match &self.source {
            InflowSource::Synthetic(spec) => {
                if !(self.scale > 0.0) {
                    return Err(FarmError::Config(format!("inflow scale factor must be positive, got {}", self.scale)));
                }
                Ok(synth_inflow(spec, duration, seed)?.scaled(self.scale))
            }
            InflowSource::Csv { path } => ingest_inflow(base.join(path), self.scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegulationSource {
    Synthetic(SynthRegd),
    Csv { path: PathBuf },
    /// Fixed raw value in `[-1, 1]`.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulationConfig {
    pub source: RegulationSource,
    /// Swing about the mean for a raw value of one (MW).
    pub amplitude: f64,
    pub mean: f64,
}

impl Default for RegulationConfig {
    fn default() -> Self {
        Self {
            source: RegulationSource::Synthetic(SynthRegd::default()),
            amplitude: 3.0,
            mean: 30.0,
        }
    }
}

impl RegulationConfig {
    /// Setpoint in MW against simulation time.
    pub fn resolve(&self, base: &Path, duration: f64, seed: u64) -> Result<RegdSignal> {
        let (t, raw) = match &self.source {
            RegulationSource::Synthetic(spec) => synth_regd(spec, duration, seed)?,
            RegulationSource::Csv { path } => {
                let s = RegdSignal::load(base.join(path))?;
                (s.time, s.value)
            }
            RegulationSource::Constant { value } => (vec![0.0], vec![*value]),
        };
        RegdSignal::new(t, normalize_regd_signal(&raw, self.amplitude, self.mean))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbineConfig {
    /// Turbine parameter TOML; built-in 5 MW reference values when absent.
    pub params: Option<PathBuf>,
    /// `C_p`/`C_T` table CSV; built-in surrogate table when absent.
    pub aero: Option<PathBuf>,
    /// Precomputed Region-3 gain schedule CSV; synthesized when absent.
    pub schedule: Option<PathBuf>,
    pub k_it: f64,
    pub k_p: f64,
    pub blend: BlendConfig,
    pub region3_torque: Region3Torque,
    pub wind_filter_tau: f64,
    pub design: Region3DesignConfig,
    /// Wind box (m/s) for the Region-2 gain condition.
    pub region2_wind: (f64, f64),
}

impl Default for TurbineConfig {
    fn default() -> Self {
        Self {
            params: None,
            aero: None,
            schedule: None,
            k_it: 0.0084,
            k_p: 0.0336,
            blend: BlendConfig::default(),
            region3_torque: Region3Torque::default(),
            wind_filter_tau: 5.0,
            design: Region3DesignConfig::default(),
            region2_wind: (3.0, 11.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpvConfig {
    /// Saved grid directory; built from the closed loop when absent.
    pub grid: Option<PathBuf>,
    pub omega_rpm: Vec<f64>,
    pub wind: Vec<f64>,
}

impl Default for LpvConfig {
    fn default() -> Self {
        Self {
            grid: None,
            omega_rpm: (0..9).map(|k| 8.0 + 0.5 * k as f64).collect(),
            wind: (0..9).map(|k| 8.0 + 2.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Keep every n-th simulation step in the series CSV.
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { stride: 20 }
    }
}

/// A complete run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub seed: u64,
    /// Farm startup with fixed commands, excluded from scoring (s).
    pub startup: f64,
    pub duration: f64,
    /// Truth simulation step (s).
    pub dt: f64,
    /// Command held during startup (rpm).
    pub nominal_rpm: f64,
    pub layout: FarmLayout,
    /// One entry per column.
    pub columns: Vec<ColumnInflow>,
    pub regulation: RegulationConfig,
    pub turbine: TurbineConfig,
    pub wake: WakeParams,
    pub mpc: MpcConfig,
    pub lpv: LpvConfig,
    pub output: OutputConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        let column = |scale| ColumnInflow {
            scale,
            source: InflowSource::Synthetic(SynthInflow::default()),
        };
        Self {
            version: SCENARIO_VERSION,
            seed: 1,
            startup: 500.0,
            duration: 2900.0,
            dt: 0.05,
            nominal_rpm: 10.0,
            layout: FarmLayout::default(),
            columns: vec![column(1.1), column(1.0)],
            regulation: RegulationConfig::default(),
            turbine: TurbineConfig::default(),
            wake: WakeParams::default(),
            mpc: MpcConfig::default(),
            lpv: LpvConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FarmError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("scenario {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FarmError::Config(m));
        if self.version != SCENARIO_VERSION {
            return bad(format!("scenario version {} is not supported (expected {SCENARIO_VERSION})", self.version));
        }
        self.layout.validate()?;
        if self.columns.len() != self.layout.columns {
            return bad(format!("{} inflow entries for {} columns", self.columns.len(), self.layout.columns));
        }
        if let Some(c) = self.columns.iter().find(|c| !(c.scale > 0.0)) {
            return bad(format!("inflow scale factors must be positive, got {}", c.scale));
        }
        if !(self.dt > 0.0) || !(self.startup >= 0.0) || !(self.startup < self.duration) {
            return bad(format!(
                "need dt > 0 and 0 <= startup < duration (dt {}, startup {}, duration {})",
                self.dt, self.startup, self.duration
            ));
        }
        for (name, v) in [("duration", self.duration), ("startup", self.startup), ("update interval", self.mpc.update_interval())] {
            if ((v / self.dt).round() * self.dt - v).abs() > 1e-9 * v.max(1.0) {
                return bad(format!("{name} {v} s is not a whole number of {} s steps", self.dt));
            }
        }
        if !(self.nominal_rpm >= self.mpc.omega_min_rpm && self.nominal_rpm <= self.mpc.omega_max_rpm) {
            return bad(format!("nominal command {} rpm lies outside the command box", self.nominal_rpm));
        }
        if self.output.stride == 0 {
            return bad("output stride must be at least 1".into());
        }
        self.wake.validate()?;
        self.mpc.validate()?;
        Ok(())
    }
}

/// Turbine model and inner-loop controller shared by every turbine.
#[derive(Debug, Clone)]
pub struct FarmSetup {
    pub params: TurbineParams,
    pub aero: Arc<AeroSurfaces>,
    pub ctrl: ControllerConfig,
}

impl FarmSetup {
    pub fn build(cfg: &TurbineConfig, base: &Path) -> Result<Self> {
        let params = match &cfg.params {
            Some(p) => TurbineParams::load(base.join(p))?,
            None => TurbineParams::default(),
        };
        let aero = Arc::new(match &cfg.aero {
            Some(p) => AeroSurfaces::load(base.join(p))?,
            None => AeroSurfaces::default_table(),
        });
        let schedule = match &cfg.schedule {
            Some(p) => Region3Schedule::load(base.join(p))?,
            None => design_region3_schedule(&params, &aero, &cfg.design)?.schedule,
        };
        let mut ctrl = ControllerConfig::new(Region2Gains::new(cfg.k_it, cfg.k_p, &params), schedule, &params);
        ctrl.blend = cfg.blend;
        ctrl.region3_torque = cfg.region3_torque;
        ctrl.wind_filter_tau = cfg.wind_filter_tau;
        Ok(Self { params, aero, ctrl })
    }

    pub fn turbine(&self, drivetrain: Drivetrain) -> Turbine {
        Turbine::new(self.params.clone(), self.aero.clone()).with_drivetrain(drivetrain)
    }

    pub fn closed_loop(&self) -> TurbineClosedLoop {
        TurbineClosedLoop::new(self.turbine(Drivetrain::Stiff), self.ctrl.clone())
    }

    /// Loads the configured grid or trims and linearizes a fresh one.
    pub fn lpv_grid(&self, cfg: &LpvConfig, base: &Path) -> Result<LpvGrid> {
        if let Some(dir) = &cfg.grid {
            return load_grid(base.join(dir));
        }
        let cl = self.closed_loop();
        let omega: Vec<f64> = cfg.omega_rpm.iter().map(|&r| rpm_to_rad(r)).collect();
        build_grid(
            || cl.clone(),
            &omega,
            &cfg.wind,
            |w, u| cl.trim_guess(w, u),
            |w, u| vec![w, u, 0.0, 0.0],
            &TrimOptions::default(),
        )
    }

    /// Region-2 gain condition over the command box and `wind` (m/s).
    pub fn gain_check(&self, omega_rpm: (f64, f64), wind: (f64, f64)) -> Result<GainCheck> {
        check_region2_gains(
            &self.ctrl.region2,
            &self.params,
            &self.aero,
            (rpm_to_rad(omega_rpm.0), rpm_to_rad(omega_rpm.1)),
            wind,
        )
    }
}

/// Per-turbine series on the simulation clock.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurbineSeries {
    pub omega_r: Vec<f64>,
    pub omega_c: Vec<f64>,
    pub pitch: Vec<f64>,
    pub torque: Vec<f64>,
    /// Generator power (W).
    pub power: Vec<f64>,
    /// Streamwise inflow at the rotor (m/s).
    pub wind: Vec<f64>,
    pub weight: Vec<f64>,
}

impl TurbineSeries {
    fn push(&mut self, s: &TurbineSample) {
        self.omega_r.push(s.omega_r);
        self.omega_c.push(s.omega_c);
        self.pitch.push(s.pitch);
        self.torque.push(s.torque);
        self.power.push(s.power);
        self.wind.push(s.wind);
        self.weight.push(s.weight);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub controller: PredictorKind,
    pub time: Vec<f64>,
    pub turbines: Vec<TurbineSeries>,
    /// Sum of the turbines' generator power (W).
    pub farm_power: Vec<f64>,
    /// Setpoint (W).
    pub setpoint: Vec<f64>,
    pub telemetry: Vec<SolveRecord>,
    /// The scored 10 s series.
    pub pair: PowerPair,
    pub scorecard: Scorecard,
    pub startup: f64,
    /// Total MPC solve wall time (s).
    pub solve_time: f64,
    pub wall_time: f64,
}

impl RunOutput {
    /// Fraction of post-startup samples in which turbine `i` has `s < 0.5`.
    pub fn below_rated_fraction(&self, i: usize) -> f64 {
        let w: Vec<f64> = self
            .time
            .iter()
            .zip(&self.turbines[i].weight)
            .filter(|(t, _)| **t >= self.startup)
            .map(|(_, &w)| w)
            .collect();
        w.iter().filter(|&&s| s < 0.5).count() as f64 / w.len().max(1) as f64
    }

    /// Writes `series.csv`, `pair.csv`, `telemetry.csv`, `intervals.csv` and
    /// `scorecard.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stride: usize) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| FarmError::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).map_err(|e| FarmError::io(&p, e))
        };

        let mut wr = csv::Writer::from_writer(create("series.csv")?);
        let mut header = vec!["time_s".to_string(), "farm_power_mw".into(), "setpoint_mw".into()];
        for i in 0..self.turbines.len() {
            for f in ["omega_r_rpm", "omega_c_rpm", "pitch_deg", "torque_knm", "power_mw", "wind_ms", "weight"] {
                header.push(format!("t{i}_{f}"));
            }
        }
        wr.write_record(&header)?;
        let rpm = 30.0 / std::f64::consts::PI;
        for k in (0..self.time.len()).step_by(stride.max(1)) {
            let mut row = vec![self.time[k], 1e-6 * self.farm_power[k], 1e-6 * self.setpoint[k]];
            for s in &self.turbines {
                row.extend([
                    rpm * s.omega_r[k],
                    rpm * s.omega_c[k],
                    s.pitch[k].to_degrees(),
                    1e-3 * s.torque[k],
                    1e-6 * s.power[k],
                    s.wind[k],
                    s.weight[k],
                ]);
            }
            wr.serialize(row)?;
        }
        wr.flush().map_err(|e| FarmError::io(dir.join("series.csv"), e))?;

        self.pair.write_csv(create("pair.csv")?)?;
        crate::mpc::write_telemetry_csv(&self.telemetry, create("telemetry.csv")?)?;
        self.scorecard.write_intervals_csv(create("intervals.csv")?)?;
        let json = self.scorecard.to_json()?;
        std::fs::write(dir.join("scorecard.json"), json).map_err(|e| FarmError::io(dir.join("scorecard.json"), e))?;
        Ok(())
    }
}

fn context_at(t: f64, what: &str) -> impl FnOnce(FarmError) -> FarmError + '_ {
    move |e| e.context(format!("t = {t:.2} s, {what}"))
}

/// Runs the closed loop: truth plant and PDE wake at `dt`, fixed commands
/// during startup, then the farm controller at its update interval.
///
/// Samples are taken at the start of every step, so the series hold
/// `duration / dt + 1` points on a shared clock.
pub fn run_scenario(s: &Scenario, base: &Path) -> Result<RunOutput> {
    s.validate()?;
    let wall = Instant::now();
    let setup = FarmSetup::build(&s.turbine, base).map_err(|e| e.context("turbine setup"))?;
    let inflows = s
        .columns
        .iter()
        .enumerate()
        .map(|(c, ci)| ci.resolve(base, s.duration, s.seed.wrapping_add(c as u64)).map_err(|e| e.context(format!("inflow of column {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let regulation = s
        .regulation
        .resolve(base, s.duration, s.seed.wrapping_add(1000))
        .map_err(|e| e.context("regulation signal"))?;

    let truth = Arc::new(setup.turbine(Drivetrain::TwoMass));
    let ctrl = Arc::new(setup.ctrl.clone());
    let stations = s.layout.stations();
    let nominal = rpm_to_rad(s.nominal_rpm);
    let mut columns = inflows
        .iter()
        .map(|inflow| {
            let u0 = inflow.at(0.0).u_x;
            let init = stations.iter().map(|_| equilibrium_guess(&truth, &ctrl, nominal, u0)).collect();
            ColumnSim::new(truth.clone(), ctrl.clone(), &stations, &s.wake, init)
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = match s.mpc.predictor {
        PredictorKind::LpvtdMpc => Some(Arc::new(
            setup
                .lpv_grid(&s.lpv, base)
                .and_then(|g| g.discretize(s.mpc.lpv_dt))
                .map_err(|e| e.context("LPV grid"))?,
        )),
        PredictorKind::NlMpc => None,
    };
    let mut mpc = FarmMpc::new(s.mpc.clone())?;

    let n_t = s.layout.n_turbines();
    let rows = s.layout.rows;
    let n_steps = (s.duration / s.dt).round() as usize;
    let startup_steps = (s.startup / s.dt).round() as usize;
    let update_steps = ((s.mpc.update_interval() / s.dt).round() as usize).max(1);
    let mut commands = vec![nominal; n_t];
    let mut time = Vec::with_capacity(n_steps + 1);
    let mut turbines = vec![TurbineSeries::default(); n_t];
    let mut setpoint = Vec::with_capacity(n_steps + 1);

    let mut k = 0;
    while k <= n_steps {
        let t = k as f64 * s.dt;
        if k >= startup_steps && (k - startup_steps) % update_steps == 0 && k < n_steps {
            let fronts: Vec<_> = inflows.iter().map(|b| b.at(t)).collect();
            let p_sp = regulation.at(t);
            commands = match s.mpc.predictor {
                PredictorKind::NlMpc => {
                    let pred = NlPredictor::from_measurement(&columns, &fronts, s.mpc.nl_dt).map_err(context_at(t, "NL predictor"))?;
                    mpc.receding_horizon_step(&pred, p_sp, t)
                }
                PredictorKind::LpvtdMpc => {
                    let g = grid.clone().expect("grid built for the LPVTD controller");
                    let pred = LpvtdPredictor::from_measurement(&columns, &fronts, g, &s.wake).map_err(context_at(t, "LPVTD predictor"))?;
                    mpc.receding_horizon_step(&pred, p_sp, t)
                }
            }
            .map_err(context_at(t, "MPC solve"))?;
        }
        let next_update = if k < startup_steps {
            startup_steps
        } else {
            startup_steps + ((k - startup_steps) / update_steps + 1) * update_steps
        };
        let end = next_update.min(n_steps + 1);
        let commands_ref = &commands;
        let samples = columns
            .par_iter_mut()
            .zip(&inflows)
            .enumerate()
            .map(|(c, (col, inflow))| {
                let cmd = &commands_ref[c * rows..(c + 1) * rows];
                let mut out = Vec::with_capacity((end - k) * rows);
                for j in k..end {
                    let tj = j as f64 * s.dt;
                    col.step(&inflow.at(tj), cmd, s.dt)
                        .map_err(|e| e.context(format!("t = {tj:.2} s, column {c}")))?;
                    out.extend_from_slice(&col.last);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        for (step, j) in (k..end).enumerate() {
            let tj = j as f64 * s.dt;
            time.push(tj);
            setpoint.push(1e6 * regulation.at(tj));
            for (c, col) in samples.iter().enumerate() {
                for r in 0..rows {
                    turbines[c * rows + r].push(&col[step * rows + r]);
                }
            }
        }
        k = end;
    }

    let farm_power: Vec<f64> = (0..time.len())
        .map(|k| turbines.iter().map(|s| s.power[k]).sum())
        .collect();
    let gen_mw: Vec<f64> = farm_power.iter().map(|p| 1e-6 * p).collect();
    let sp_mw: Vec<f64> = setpoint.iter().map(|p| 1e-6 * p).collect();
    let pair = PowerPair::from_raw(&time, &gen_mw, &sp_mw, s.startup, s.duration)?;
    let scorecard = composite_score(&pair).map_err(|e| e.context("scoring"))?;
    Ok(RunOutput {
        controller: s.mpc.predictor,
        time,
        turbines,
        farm_power,
        setpoint,
        solve_time: mpc.total_solve_time(),
        telemetry: mpc.telemetry,
        pair,
        scorecard,
        startup: s.startup,
        wall_time: wall.elapsed().as_secs_f64(),
    })
}

/// Runs on a dedicated pool of `workers` threads (all cores when `None`).
pub fn run_with_workers(s: &Scenario, base: &Path, workers: Option<usize>) -> Result<RunOutput> {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| FarmError::Config(format!("thread pool: {e}")))?
            .install(|| run_scenario(s, base)),
        None => run_scenario(s, base),
    }
}
