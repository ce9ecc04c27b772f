//! Multi-region inner-loop turbine controller.
//!
//! Region 2 regulates rotor speed with the feedback-linearizing generator
//! torque law, Region 3 with a gain-scheduled PI-LQR collective pitch law,
//! and the transition band blends both through a sigmoid in the low-passed
//! hub wind speed. Each law integrates the rotor-speed error
//! `e = omega_r - omega_c` in its own memory so that conditional integration
//! can hold either channel at its limit without disturbing the other.

pub mod schedule;

use serde::{Deserialize, Serialize};

pub use schedule::{FeedbackSignal, Region3Schedule};

use crate::error::{FarmError, Result};
use crate::plant::{dof, AeroSurfaces, TurbineParams, TurbineState, WindVector};
use crate::plant::{aero_power, ControlInput};

/// Region-2 torque-law gains.
///
/// The mirrored plant constants are copied in at construction so the law can
/// be evaluated without the full parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region2Gains {
    /// Integral gain `K_IT` (1/s^2).
    pub k_it: f64,
    /// Proportional gain `K_p` (1/s).
    pub k_p: f64,
    pub efficiency: f64,
    pub j_eq: f64,
    pub gear_ratio: f64,
    pub max_torque: f64,
}

impl Region2Gains {
    pub fn new(k_it: f64, k_p: f64, p: &TurbineParams) -> Self {
        Self {
            k_it,
            k_p,
            efficiency: p.generator_efficiency,
            j_eq: p.j_eq(),
            gear_ratio: p.gear_ratio,
            max_torque: p.max_generator_torque,
        }
    }

    /// Smallest admissible proportional gain, `(1 - nu_G) L / J_eq`.
    pub fn kp_bound(&self, lipschitz: f64) -> f64 {
        (1.0 - self.efficiency) * lipschitz / self.j_eq
    }

    /// Checks `K_IT > 0` and `K_p > (1 - nu_G) L / J_eq`.
    pub fn validate(&self, lipschitz: f64) -> Result<()> {
        if !(self.k_it > 0.0) {
            return Err(FarmError::Config(format!("K_IT must be positive, got {}", self.k_it)));
        }
        let bound = self.kp_bound(lipschitz);
        if !(self.k_p > bound) {
            return Err(FarmError::Config(format!(
                "K_p = {} does not exceed the stability bound {bound:.6e} (L = {lipschitz:.6e})",
                self.k_p
            )));
        }
        Ok(())
    }

    /// Torque-law scale `J_eq / ((1 - nu_G) N_G)`.
    fn scale(&self) -> f64 {
        self.j_eq / ((1.0 - self.efficiency) * self.gear_ratio)
    }
}

/// Which limit, if any, an actuator channel is resting on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Saturation {
    #[default]
    None,
    Lower,
    Upper,
}

fn clamp_sat(v: f64, lo: f64, hi: f64) -> (f64, Saturation) {
    if v < lo {
        (lo, Saturation::Lower)
    } else if v > hi {
        (hi, Saturation::Upper)
    } else {
        (v, Saturation::None)
    }
}

/// Region-2 generator torque `J_eq/((1-nu_G) N_G) (K_IT int_e + K_p e)`,
/// clamped to `[0, T_g,max]`.
pub fn region2_torque(e: f64, int_e: f64, g: &Region2Gains) -> (f64, Saturation) {
    let raw = g.scale() * (g.k_it * int_e + g.k_p * e);
    clamp_sat(raw, 0.0, g.max_torque)
}

/// Pre-substitution torque law `J_eq/N_G (K_IT int_e + K_p e) + P/(N_G omega_r)`.
pub fn region2_torque_model_based(e: f64, int_e: f64, omega_r: f64, power: f64, g: &Region2Gains) -> Result<f64> {
    if omega_r == 0.0 {
        return Err(FarmError::ZeroRotorSpeed { power });
    }
    Ok(g.j_eq / g.gear_ratio * (g.k_it * int_e + g.k_p * e) + power / (g.gear_ratio * omega_r))
}

/// Result of the Region-2 gain condition check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    /// Sampled Lipschitz constant of `T_a` in rotor speed (N m s/rad).
    pub lipschitz: f64,
    /// Required lower bound on `K_p`.
    pub kp_bound: f64,
    pub pass: bool,
}

/// Sampling lattice steps for the Lipschitz estimate. Points are taken on a
/// fixed absolute lattice so that a sub-box samples a subset of the pairs.
const OMEGA_STEP: f64 = 0.002;
const WIND_STEP: f64 = 0.25;

fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    let mut pts: Vec<f64> = (first..=last).map(|k| k as f64 * step).collect();
    if pts.is_empty() {
        pts.push(lo);
        if hi > lo {
            pts.push(hi);
        }
    }
    pts
}

/// Estimates `L = max |dT_a/d omega_r|` over `omega_box x wind_box` (zero
/// pitch) by difference quotients on a dense lattice and checks the gain
/// condition.
pub fn check_region2_gains(
    g: &Region2Gains,
    params: &TurbineParams,
    surfaces: &AeroSurfaces,
    omega_box: (f64, f64),
    wind_box: (f64, f64),
) -> Result<GainCheck> {
    if !(omega_box.0 <= omega_box.1) || !(wind_box.0 <= wind_box.1) {
        return Err(FarmError::Domain("gain-check boxes must be non-empty".into()));
    }
    if omega_box.0 <= 0.0 {
        return Err(FarmError::Domain("rotor-speed box must be strictly positive".into()));
    }
    let omegas = lattice(omega_box.0, omega_box.1, OMEGA_STEP);
    let winds = lattice(wind_box.0, wind_box.1, WIND_STEP);
    let mut lipschitz: f64 = 0.0;
    for &u in &winds {
        let wind = WindVector::streamwise(u);
        let torque = |w: f64| aero_power(w, 0.0, &wind, params, surfaces) / w;
        let mut prev = torque(omegas[0]);
        for pair in omegas.windows(2) {
            let next = torque(pair[1]);
            let q = ((next - prev) / (pair[1] - pair[0])).abs();
            if !q.is_finite() {
                return Err(FarmError::Domain(format!("torque surface not finite near u = {u}")));
            }
            lipschitz = lipschitz.max(q);
            prev = next;
        }
    }
    let kp_bound = g.kp_bound(lipschitz);
    Ok(GainCheck {
        lipschitz,
        kp_bound,
        pass: g.k_it > 0.0 && g.k_p > kp_bound,
    })
}

/// Region-3 collective pitch `-K_Ib(u) int_e - K_x(u) chi_fdbk`, clamped to `[0, beta_max]`.
pub fn region3_pitch(
    int_e: f64,
    chi_fdbk: &[f64],
    sched: &Region3Schedule,
    wind_mag: f64,
    max_pitch: f64,
) -> Result<(f64, Saturation)> {
    let (k_i, k_x) = sched.gains_at(wind_mag);
    if chi_fdbk.len() != k_x.len() {
        return Err(FarmError::Dimension {
            expected: k_x.len(),
            got: chi_fdbk.len(),
        });
    }
    let fb: f64 = k_x.iter().zip(chi_fdbk).map(|(k, x)| k * x).sum();
    Ok(clamp_sat(-k_i * int_e - fb, 0.0, max_pitch))
}

/// Sigmoid blend parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendConfig {
    /// Steepness `k_s` (s/m).
    pub k_s: f64,
    /// Midpoint `u_0` (m/s).
    pub u_0: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self { k_s: 5.0, u_0: 11.5 }
    }
}

/// `1 / (1 + exp(-k_s (u - u_0)))`.
pub fn sigmoid_weight(u: f64, b: &BlendConfig) -> f64 {
    1.0 / (1.0 + (-b.k_s * (u - b.u_0)).exp())
}

/// Generator torque applied through the pitch-weighted channel of the blend.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region3Torque {
    /// Region-2 torque capped at rated. While the pitch law is active the
    /// torque integrator is parked at the upper torque clamp, so torque only
    /// falls below rated once pitch has run down to its lower limit.
    #[default]
    Rated,
    /// No torque in Region 3; the blend reduces to `(1 - s) T_g`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub region2: Region2Gains,
    pub schedule: Region3Schedule,
    pub blend: BlendConfig,
    pub region3_torque: Region3Torque,
    pub rated_torque: f64,
    pub max_pitch: f64,
    /// Time constant of the wind-speed low-pass feeding blend and schedule (s).
    pub wind_filter_tau: f64,
    /// Optional actuator rate limits (rad/s, N m/s).
    pub pitch_rate_limit: Option<f64>,
    pub torque_rate_limit: Option<f64>,
}

impl ControllerConfig {
    pub fn new(region2: Region2Gains, schedule: Region3Schedule, p: &TurbineParams) -> Self {
        Self {
            region2,
            schedule,
            blend: BlendConfig::default(),
            region3_torque: Region3Torque::default(),
            rated_torque: p.rated_generator_torque,
            max_pitch: p.max_pitch,
            wind_filter_tau: 5.0,
            pitch_rate_limit: None,
            torque_rate_limit: None,
        }
    }

    /// Region-3 channel torque given the clamped Region-2 torque.
    pub fn region3_torque_value(&self, region2_torque: f64) -> f64 {
        match self.region3_torque {
            Region3Torque::Rated => region2_torque.min(self.rated_torque),
            Region3Torque::Zero => 0.0,
        }
    }

    /// Torque-integrator value whose integral term alone gives `torque`.
    pub fn torque_integral_for(&self, torque: f64) -> f64 {
        torque / (self.region2.scale() * self.region2.k_it)
    }
}

/// Error integrals of the two channels (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Integrators {
    pub torque: f64,
    pub pitch: f64,
}

impl Integrators {
    pub fn new(torque: f64, pitch: f64) -> Self {
        Self { torque, pitch }
    }
}

/// Controller memory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState {
    pub int_e: Integrators,
    /// Low-passed hub wind speed (m/s).
    pub wind_filtered: f64,
    /// Sigmoid weight used in the last command.
    pub weight: f64,
    /// Last applied command, used by the rate limiters.
    pub last: ControlInput,
}

impl ControllerState {
    /// Fresh state with the wind filter primed.
    pub fn primed(int_e: Integrators, wind: f64) -> Self {
        Self {
            int_e,
            wind_filtered: wind,
            ..Self::default()
        }
    }
}

/// Static evaluation of the blended law for given controller memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawOutput {
    pub input: ControlInput,
    /// Rotor-speed error `omega_r - omega_c`.
    pub error: f64,
    pub weight: f64,
    /// Raw (pre-blend, clamped) channel outputs.
    pub region2_torque: f64,
    pub region3_pitch: f64,
    pub region3_torque: f64,
    /// Conditional integration holds these integrators this step.
    pub freeze_torque: bool,
    pub freeze_pitch: bool,
}

/// Region-3 feedback vector built from the plant state.
pub fn feedback_vector(sched: &Region3Schedule, x: &TurbineState, error: f64) -> Vec<f64> {
    sched
        .feedback
        .iter()
        .map(|f| match f {
            FeedbackSignal::Surge => x.0[dof::SURGE],
            FeedbackSignal::Pitch => x.0[dof::PITCH],
            FeedbackSignal::SurgeRate => x.0[dof::SURGE_RATE],
            FeedbackSignal::PitchRate => x.0[dof::PITCH_RATE],
            FeedbackSignal::SpeedError => error,
        })
        .collect()
}

/// Evaluates both laws and the blend without touching controller memory.
pub fn control_law(omega_c: f64, x: &TurbineState, int_e: Integrators, wind_filtered: f64, cfg: &ControllerConfig) -> Result<LawOutput> {
    let e = x.omega_r() - omega_c;
    let s = sigmoid_weight(wind_filtered, &cfg.blend);
    let (tq, tq_sat) = region2_torque(e, int_e.torque, &cfg.region2);
    let chi = feedback_vector(&cfg.schedule, x, e);
    let (beta, beta_sat) = region3_pitch(int_e.pitch, &chi, &cfg.schedule, wind_filtered, cfg.max_pitch)?;
    let t3 = cfg.region3_torque_value(tq);

    // torque rises with its integrator; pitch moves as -K_Ib times its own
    let mut freeze_torque = match tq_sat {
        Saturation::Upper => e > 0.0,
        Saturation::Lower => e < 0.0,
        Saturation::None => false,
    };
    if s >= 0.5 && cfg.region3_torque == Region3Torque::Rated {
        // parked at the upper clamp, the proportional term has headroom above rated;
        // underspeed is pitch's job until pitch reaches its lower stop
        let at_cap = cfg.region2.scale() * cfg.region2.k_it * int_e.torque >= cfg.region2.max_torque;
        let pitch_active = beta_sat != Saturation::Lower;
        freeze_torque |= (at_cap && e > 0.0) || (pitch_active && (at_cap || e < 0.0));
    }
    let (k_i, _) = cfg.schedule.gains_at(wind_filtered);
    let push = -k_i * e;
    let freeze_pitch = match beta_sat {
        Saturation::Upper => push > 0.0,
        Saturation::Lower => push < 0.0,
        Saturation::None => false,
    };

    Ok(LawOutput {
        input: ControlInput {
            pitch: s * beta,
            torque: (1.0 - s) * tq + s * t3,
            yaw: 0.0,
        },
        error: e,
        weight: s,
        region2_torque: tq,
        region3_pitch: beta,
        region3_torque: t3,
        freeze_torque,
        freeze_pitch,
    })
}

fn rate_limit(target: f64, last: f64, limit: Option<f64>, dt: f64) -> f64 {
    match limit {
        Some(r) if dt > 0.0 => target.clamp(last - r * dt, last + r * dt),
        _ => target,
    }
}

/// One controller update over a step of length `dt`.
///
/// The wind filter is advanced first, the command is evaluated from the
/// current integrators, and each integrator then advances by `e dt` unless
/// frozen. `hub_wind` is the hub-relative wind.
pub fn blended_command(
    omega_c: f64,
    x: &TurbineState,
    hub_wind: &WindVector,
    cs: &ControllerState,
    cfg: &ControllerConfig,
    dt: f64,
) -> Result<(ControlInput, ControllerState)> {
    let mut next = *cs;
    let alpha = if dt > 0.0 {
        1.0 - (-dt / cfg.wind_filter_tau).exp()
    } else {
        0.0
    };
    next.wind_filtered += alpha * (hub_wind.magnitude() - next.wind_filtered);
    let law = control_law(omega_c, x, cs.int_e, next.wind_filtered, cfg)?;
    if !law.freeze_torque {
        next.int_e.torque += law.error * dt;
    }
    if !law.freeze_pitch {
        next.int_e.pitch += law.error * dt;
    }
    let mut input = law.input;
    input.pitch = rate_limit(input.pitch, cs.last.pitch, cfg.pitch_rate_limit, dt);
    input.torque = rate_limit(input.torque, cs.last.torque, cfg.torque_rate_limit, dt);
    next.weight = law.weight;
    next.last = input;
    Ok((input, next))
}

/// Integrator value at the Region-2 equilibrium for aerodynamic torque `t_a`,
/// `(1 - nu_G) T_a / (J_eq K_IT)`.
pub fn region2_equilibrium_integral(t_a: f64, g: &Region2Gains) -> f64 {
    (1.0 - g.efficiency) * t_a / (g.j_eq * g.k_it)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gains(j: f64, nu: f64, n: f64, k_it: f64, k_p: f64) -> Region2Gains {
        Region2Gains {
            k_it,
            k_p,
            efficiency: nu,
            j_eq: j,
            gear_ratio: n,
            max_torque: 1e9,
        }
    }

    fn scalar_schedule(k_i: f64, k_x: f64) -> Region3Schedule {
        Region3Schedule::new(vec![12.0], vec![k_i], vec![vec![k_x]], vec![FeedbackSignal::SpeedError]).unwrap()
    }

    #[test]
    fn region2_hand_values() {
        let g = gains(1000.0, 0.9, 10.0, 0.1, 1.0);
        assert_eq!(region2_torque(0.0, 0.0, &g).0, 0.0);
        let (t, sat) = region2_torque(0.5, 2.0, &g);
        assert!((t - 700.0).abs() < 1e-9, "{t}");
        assert_eq!(sat, Saturation::None);
    }

    #[test]
    fn region2_is_linear_away_from_clamps() {
        let g = gains(1000.0, 0.9, 10.0, 0.1, 1.0);
        let a = region2_torque(0.3, 1.0, &g).0;
        let b = region2_torque(0.1, 2.0, &g).0;
        let ab = region2_torque(0.4, 3.0, &g).0;
        assert!((ab - a - b).abs() < 1e-9);
    }

    #[test]
    fn region2_clamps_to_torque_range() {
        let mut g = gains(1000.0, 0.9, 10.0, 0.1, 1.0);
        g.max_torque = 500.0;
        assert_eq!(region2_torque(0.5, 2.0, &g), (500.0, Saturation::Upper));
        assert_eq!(region2_torque(-0.5, 0.0, &g), (0.0, Saturation::Lower));
    }

    #[test]
    fn model_based_law_hand_values() {
        let g = gains(1000.0, 0.9, 10.0, 0.1, 1.0);
        assert_eq!(region2_torque_model_based(0.0, 0.0, 1.0, 0.0, &g).unwrap(), 0.0);
        assert!((region2_torque_model_based(0.0, 0.0, 1.0, 5000.0, &g).unwrap() - 500.0).abs() < 1e-12);
        assert!(region2_torque_model_based(0.0, 0.0, 0.0, 1.0, &g).is_err());
    }

    #[test]
    fn model_based_law_with_generator_power_feedback_reduces_to_region2_law() {
        let g = gains(4.4e7, 0.944, 97.0, 0.008, 0.03);
        for &(e, int_e, w) in &[(0.01, 0.5, 1.1), (-0.02, 0.3, 0.9), (0.0, 0.7, 1.25)] {
            let t2 = region2_torque(e, int_e, &g).0;
            // fixed point T = law(P_gen(T)) with P_gen = nu N omega T
            let p_gen = g.efficiency * g.gear_ratio * w * t2;
            let t_fp = region2_torque_model_based(e, int_e, w, p_gen, &g).unwrap();
            assert!((t_fp - t2).abs() < 1e-9 * t2.abs().max(1.0), "{t_fp} vs {t2}");
        }
    }

    #[test]
    fn pitch_law_hand_value_and_clamp() {
        let s = scalar_schedule(0.02, 0.1);
        assert_eq!(region3_pitch(0.0, &[0.0], &s, 15.0, 0.5).unwrap().0, 0.0);
        let (b, sat) = region3_pitch(-1.0, &[0.5], &s, 15.0, 0.5).unwrap();
        assert_eq!(b, 0.0);
        assert_eq!(sat, Saturation::Lower);
        let (b, _) = region3_pitch(-10.0, &[0.5], &s, 15.0, 0.5).unwrap();
        assert!((b - (0.2 - 0.05)).abs() < 1e-15);
        assert!(matches!(region3_pitch(0.0, &[0.0, 1.0], &s, 15.0, 0.5), Err(FarmError::Dimension { .. })));
    }

    #[test]
    fn sigmoid_values() {
        let b = BlendConfig { k_s: 5.0, u_0: 11.5 };
        assert_eq!(sigmoid_weight(11.5, &b), 0.5);
        assert!((sigmoid_weight(12.0, &b) - 0.92414).abs() < 1e-5);
        assert!((sigmoid_weight(12.0, &b) - 1.0 / (1.0 + (-2.5f64).exp())).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sigmoid_is_antisymmetric_and_increasing(d in 0.0f64..10.0, k in 0.1f64..10.0, u0 in 5.0f64..15.0) {
            let b = BlendConfig { k_s: k, u_0: u0 };
            prop_assert!((sigmoid_weight(u0 + d, &b) + sigmoid_weight(u0 - d, &b) - 1.0).abs() < 1e-12);
            prop_assert!(sigmoid_weight(u0 + d + 0.1, &b) >= sigmoid_weight(u0 + d, &b));
        }
    }

    fn blend_cfg(mode: Region3Torque) -> ControllerConfig {
        let p = TurbineParams::default();
        let g = Region2Gains::new(0.008, 0.03, &p);
        let sched = Region3Schedule::new(
            vec![12.0, 24.0],
            vec![-0.05, -0.02],
            vec![vec![0.0, 0.0, 0.0, 0.0, -0.5], vec![0.0, 0.0, 0.0, 0.0, -0.2]],
            FeedbackSignal::standard(),
        )
        .unwrap();
        let mut c = ControllerConfig::new(g, sched, &p);
        c.region3_torque = mode;
        c
    }

    #[test]
    fn blend_limits_and_midpoint() {
        let cfg = blend_cfg(Region3Torque::Zero);
        let x = TurbineState::at_rotor_speed(1.2, 97.0);
        let int_e = Integrators::new(2.0, 2.0);
        let law_at = |u: f64| control_law(1.19, &x, int_e, u, &cfg).unwrap();

        let low = law_at(4.0);
        assert!(low.input.pitch.abs() < 1e-6);
        assert!((low.input.torque - low.region2_torque).abs() < 1e-6 * low.region2_torque);

        let high = law_at(20.0);
        assert!(high.input.torque.abs() < 1e-6 * high.region2_torque);
        assert!((high.input.pitch - high.region3_pitch).abs() < 1e-9);

        let mid = law_at(11.5);
        assert!(mid.region3_pitch > 0.0 && mid.region2_torque > 0.0);
        assert_eq!(mid.input.pitch, 0.5 * mid.region3_pitch);
        assert_eq!(mid.input.torque, 0.5 * mid.region2_torque);
    }

    #[test]
    fn rated_mode_caps_torque_in_region3() {
        let cfg = blend_cfg(Region3Torque::Rated);
        let x = TurbineState::at_rotor_speed(1.2, 97.0);
        let law = control_law(1.2, &x, Integrators::new(1.0, 5.0), 22.0, &cfg).unwrap();
        assert!((law.input.torque - cfg.rated_torque).abs() < 1e-3 * cfg.rated_torque);
        // below the cap the torque law still acts
        let i_low = cfg.torque_integral_for(0.5 * cfg.rated_torque);
        let law = control_law(1.2, &x, Integrators::new(i_low, 5.0), 22.0, &cfg).unwrap();
        assert!((law.input.torque - 0.5 * cfg.rated_torque).abs() < 1e-3 * cfg.rated_torque);
    }

    #[test]
    fn torque_integrator_held_at_cap_while_pitch_is_active() {
        let cfg = blend_cfg(Region3Torque::Rated);
        let i_cap = cfg.torque_integral_for(1.01 * cfg.region2.max_torque);
        let x = TurbineState::at_rotor_speed(1.19, 97.0);
        // pitch active: underspeed lowers pitch, torque stays put
        let law = control_law(1.2, &x, Integrators::new(i_cap, 5.0), 20.0, &cfg).unwrap();
        assert!(law.region3_pitch > 0.0);
        assert!(law.freeze_torque && !law.freeze_pitch);
        // pitch on its lower stop: torque integrator unwinds
        let law = control_law(1.2, &x, Integrators::new(i_cap, -5.0), 20.0, &cfg).unwrap();
        assert_eq!(law.region3_pitch, 0.0);
        assert!(!law.freeze_torque && law.freeze_pitch);
        // below the cap with pitch active, underspeed does not unwind torque but overspeed restores it
        let i_low = cfg.torque_integral_for(0.5 * cfg.rated_torque);
        let law = control_law(1.2, &x, Integrators::new(i_low, 5.0), 20.0, &cfg).unwrap();
        assert!(law.freeze_torque);
        let fast = TurbineState::at_rotor_speed(1.21, 97.0);
        let law = control_law(1.2, &fast, Integrators::new(i_low, 5.0), 20.0, &cfg).unwrap();
        assert!(!law.freeze_torque);
    }

    proptest! {
        #[test]
        fn blend_is_lipschitz_in_wind(u in 8.0f64..15.0, du in 1e-4f64..0.5, e in -0.05f64..0.05, int_e in 0.0f64..5.0) {
            for mode in [Region3Torque::Zero, Region3Torque::Rated] {
                let mut cfg = blend_cfg(mode);
                // single breakpoint removes the schedule's own wind sensitivity
                cfg.schedule = Region3Schedule::new(vec![12.0], vec![-0.05], vec![vec![0.0, 0.0, 0.0, 0.0, -0.5]], FeedbackSignal::standard()).unwrap();
                let x = TurbineState::at_rotor_speed(1.1 + e, 97.0);
                let int_e = Integrators::new(0.1 * int_e, int_e);
                let a = control_law(1.1, &x, int_e, u, &cfg).unwrap();
                let b = control_law(1.1, &x, int_e, u + du, &cfg).unwrap();
                let bound = cfg.blend.k_s / 4.0 * (a.region3_pitch.abs() + (a.region2_torque - a.region3_torque).abs());
                let dp = (a.input.pitch - b.input.pitch).abs();
                let dt = (a.input.torque - b.input.torque).abs();
                prop_assert!(dp + dt <= bound * du * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn integrator_freezes_on_saturated_torque() {
        let mut cfg = blend_cfg(Region3Torque::Zero);
        cfg.region2.max_torque = 1.0;
        let x = TurbineState::at_rotor_speed(1.3, 97.0);
        let cs = ControllerState::primed(Integrators::new(5.0, 5.0), 8.0);
        let (u, next) = blended_command(1.2, &x, &WindVector::streamwise(8.0), &cs, &cfg, 0.05).unwrap();
        assert!(u.torque <= 1.0 + 1e-9);
        assert_eq!(next.int_e.torque, cs.int_e.torque);
        assert!((next.int_e.pitch - (5.0 + 0.1 * 0.05)).abs() < 1e-12);
        // error of the opposite sign unfreezes
        let x = TurbineState::at_rotor_speed(1.1, 97.0);
        let (_, next) = blended_command(1.2, &x, &WindVector::streamwise(8.0), &cs, &cfg, 0.05).unwrap();
        assert!((next.int_e.torque - (cs.int_e.torque - 0.1 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn rate_limits_bound_command_changes() {
        let mut cfg = blend_cfg(Region3Torque::Rated);
        cfg.torque_rate_limit = Some(1000.0);
        let x = TurbineState::at_rotor_speed(1.2, 97.0);
        let cs = ControllerState::primed(Integrators::new(0.6, 0.0), 8.0);
        let (u, _) = blended_command(1.2, &x, &WindVector::streamwise(8.0), &cs, &cfg, 0.05).unwrap();
        assert!((u.torque - 50.0).abs() < 1e-9);
    }
}
