use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::{run_with_workers, FarmSetup, Scenario};
use crate::error::{FarmError, Result};
use crate::lpv::io::save_grid;
use crate::lpv::{design_region3_schedule, CL_STATE_NAMES};
use crate::mpc::PredictorKind;
use crate::pjm::{composite_score, PowerPair};

#[derive(Debug, Parser)]
#[command(name = "floatfarm", version, about = "Floating wind farm power tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write series, telemetry and scorecard.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// nl-mpc or lpvtd-mpc; overrides the scenario.
        #[arg(long)]
        controller: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a `time_s,p_gen_mw,p_sp_mw` CSV.
    Score {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trim and linearize the closed-loop grid and save it.
    BuildLpv {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "lpv-grid")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Synthesize the Region-3 gain schedule.
    DesignGains {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "gains")]
        out: PathBuf,
    },
    /// Check the scenario and the Region-2 gain condition.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// Failures the user can fix by editing inputs map to exit code 2.
fn exit_code(e: &FarmError) -> i32 {
    match e.root() {
        FarmError::Config(_) | FarmError::Toml(_) => 2,
        _ => 1,
    }
}

fn load_scenario(path: Option<&Path>) -> Result<(Scenario, PathBuf)> {
    match path {
        Some(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((Scenario::load(p)?, base))
        }
        None => Ok((Scenario::default(), PathBuf::from("."))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FarmError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| FarmError::io(path, e))
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run {
            scenario,
            controller,
            out,
            seed,
            workers,
        } => {
            let (mut s, base) = load_scenario(Some(&scenario))?;
            if let Some(c) = controller {
                s.mpc.predictor = PredictorKind::parse(&c)?;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let run = run_with_workers(&s, &base, workers)?;
            run.write(&out, s.output.stride)?;
            println!(
                "{}: composite {:.4} ({}), precision {:.4}, solve time {:.1} s, wall time {:.1} s",
                run.controller.name(),
                run.scorecard.composite,
                if run.scorecard.pass { "pass" } else { "fail" },
                run.scorecard.precision,
                run.solve_time,
                run.wall_time
            );
            Ok(0)
        }
        Command::Score { input, out } => {
            let pair = PowerPair::load(&input)?;
            let card = composite_score(&pair)?;
            let json = card.to_json()?;
            println!("{json}");
            if let Some(dir) = out {
                write_file(&dir.join("scorecard.json"), &json)?;
                let p = dir.join("intervals.csv");
                card.write_intervals_csv(std::fs::File::create(&p).map_err(|e| FarmError::io(&p, e))?)?;
            }
            Ok(0)
        }
        Command::BuildLpv { scenario, out, workers } => {
            let (s, base) = load_scenario(scenario.as_deref())?;
            let setup = FarmSetup::build(&s.turbine, &base)?;
            let build = || setup.lpv_grid(&s.lpv, &base);
            let grid = match workers {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| FarmError::Config(format!("thread pool: {e}")))?
                    .install(build)?,
                None => build()?,
            };
            save_grid(&grid, &out, &CL_STATE_NAMES)?;
            let worst = grid.models.iter().map(|m| m.trim_residual).fold(0.0, f64::max);
            println!("{} nodes written to {}, worst trim residual {worst:.2e}", grid.models.len(), out.display());
            Ok(0)
        }
        Command::DesignGains { scenario, out } => {
            let (s, base) = load_scenario(scenario.as_deref())?;
            let setup = FarmSetup::build(&s.turbine, &base)?;
            let d = design_region3_schedule(&setup.params, &setup.aero, &s.turbine.design)?;
            d.schedule.save(out.join("schedule.csv"))?;
            write_file(&out.join("design.json"), &serde_json::to_string_pretty(&d)?)?;
            println!("R = {:.4e}", d.r);
            for (k, u) in d.schedule.wind.iter().enumerate() {
                println!(
                    "u = {u:5.1} m/s  K_I = {:+.4e}  crossover {:.3} rad/s (limit {:.3})",
                    d.schedule.k_i[k], d.crossovers[k], d.pitch_frequency
                );
            }
            Ok(0)
        }
        Command::Validate { scenario } => {
            let (s, base) = load_scenario(scenario.as_deref())?;
            let setup = FarmSetup::build(&s.turbine, &base)?;
            let check = setup.gain_check((s.mpc.omega_min_rpm, s.mpc.omega_max_rpm), s.turbine.region2_wind)?;
            let g = &setup.ctrl.region2;
            println!(
                "K_IT = {:.4e}, K_p = {:.4e}, K_p bound = {:.4e} (L = {:.4e} N m s)",
                g.k_it, g.k_p, check.kp_bound, check.lipschitz
            );
            if check.pass {
                println!("scenario valid, gain condition holds");
                Ok(0)
            } else {
                eprintln!("gain condition violated: need K_IT > 0 and K_p > {:.4e}", check.kp_bound);
                Ok(2)
            }
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 on success, 2 on invalid input, 1 on runtime errors.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
