//! Reduced nonlinear floating-turbine plant.
//!
//! The platform is a rigid body with six uncoupled linear oscillators
//! (hydrostatic + mooring restoring, linear damping). Aerodynamic thrust acts
//! at hub height along the hub-relative wind and therefore couples surge and
//! pitch to the rotor. The drivetrain is either a two-mass torsional model
//! realizing `(delta_theta_r, omega_r, omega_g)` or the stiff single-inertia
//! limit used for controller design.
//!
//! Time integration is fixed-step classical RK4 with the control input held
//! constant over the step. With the default parameters the two-mass torsional
//! mode sits near 14 rad/s, so `dt <= 0.1 s` is required; the stiff mode is
//! limited by the platform and controller modes and tolerates `dt <= 0.5 s`.

pub mod aero;
pub mod params;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use aero::{AeroSurfaces, Coefficients};
pub use params::{PlatformParams, TurbineParams};

use crate::error::{FarmError, Result};

pub const N_STATES: usize = 15;

/// State vector indices.
pub mod dof {
    pub const SURGE: usize = 0;
    pub const SWAY: usize = 1;
    pub const HEAVE: usize = 2;
    pub const ROLL: usize = 3;
    pub const PITCH: usize = 4;
    pub const YAW: usize = 5;
    pub const TWIST: usize = 6;
    pub const SURGE_RATE: usize = 7;
    pub const SWAY_RATE: usize = 8;
    pub const HEAVE_RATE: usize = 9;
    pub const ROLL_RATE: usize = 10;
    pub const PITCH_RATE: usize = 11;
    pub const YAW_RATE: usize = 12;
    pub const OMEGA_R: usize = 13;
    pub const OMEGA_G: usize = 14;

    pub const NAMES: [&str; super::N_STATES] = [
        "surge", "sway", "heave", "roll", "pitch", "yaw", "twist", "surge_rate", "sway_rate",
        "heave_rate", "roll_rate", "pitch_rate", "yaw_rate", "omega_r", "omega_g",
    ];
}

/// Floating-turbine state `[r, Theta, delta_theta_r, r_dot, Theta_dot, omega_r, omega_g]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineState(pub [f64; N_STATES]);

impl Default for TurbineState {
    fn default() -> Self {
        Self([0.0; N_STATES])
    }
}

impl TurbineState {
    /// Platform at rest with the drivetrain spinning at `omega_r`.
    pub fn at_rotor_speed(omega_r: f64, gear_ratio: f64) -> Self {
        let mut x = Self::default();
        x.0[dof::OMEGA_R] = omega_r;
        x.0[dof::OMEGA_G] = gear_ratio * omega_r;
        x
    }

    pub fn omega_r(&self) -> f64 {
        self.0[dof::OMEGA_R]
    }

    pub fn omega_g(&self) -> f64 {
        self.0[dof::OMEGA_G]
    }

    pub fn platform_pitch(&self) -> f64 {
        self.0[dof::PITCH]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.0.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(FarmError::Diverged { dof: dof::NAMES[i] }),
            None => Ok(()),
        }
    }
}

/// Actuator commands `eta = [beta_c, T_g, gamma]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Collective blade pitch (rad).
    pub pitch: f64,
    /// Generator torque, high-speed side (N m).
    pub torque: f64,
    /// Nacelle yaw (rad); held streamwise-aligned.
    pub yaw: f64,
}

/// Wind velocity in the turbine frame (m/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WindVector {
    pub u_x: f64,
    pub u_y: f64,
    pub u_z: f64,
}

impl WindVector {
    pub const fn new(u_x: f64, u_y: f64, u_z: f64) -> Self {
        Self { u_x, u_y, u_z }
    }

    pub const fn streamwise(u: f64) -> Self {
        Self::new(u, 0.0, 0.0)
    }

    pub fn magnitude(&self) -> f64 {
        (self.u_x * self.u_x + self.u_y * self.u_y + self.u_z * self.u_z).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.u_x * k, self.u_y * k, self.u_z * k)
    }

    /// Unit direction, or streamwise when the vector vanishes.
    pub fn direction(&self) -> [f64; 3] {
        let m = self.magnitude();
        if m > 0.0 {
            [self.u_x / m, self.u_y / m, self.u_z / m]
        } else {
            [1.0, 0.0, 0.0]
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Drivetrain {
    /// Rigid shaft: `omega_g = N_G omega_r`, single inertia `J_eq`.
    Stiff,
    #[default]
    TwoMass,
}

/// Aerodynamic loads on the rotor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AeroLoads {
    pub power: f64,
    pub torque: f64,
    pub thrust: f64,
    pub cp: f64,
    pub ct: f64,
    pub tip_speed_ratio: f64,
    pub clamped: bool,
}

fn loads(omega_r: f64, beta: f64, wind: &WindVector, p: &TurbineParams, s: &AeroSurfaces) -> AeroLoads {
    let u = wind.magnitude();
    if u <= 0.0 {
        return AeroLoads::default();
    }
    let lambda = p.rotor_radius * omega_r / u;
    let c = s.eval(lambda, beta);
    let q = 0.5 * p.air_density * p.rotor_area() * u * u;
    let power = q * c.cp * u;
    // C_p vanishes at lambda = 0, so the torque limit at standstill is zero
    let torque = if omega_r.abs() > 1e-9 { power / omega_r } else { 0.0 };
    AeroLoads {
        power,
        torque,
        thrust: q * c.ct,
        cp: c.cp,
        ct: c.ct,
        tip_speed_ratio: lambda,
        clamped: c.clamped,
    }
}

/// Aerodynamic power `0.5 rho A C_p(lambda, beta) |u|^3` (W).
pub fn aero_power(omega_r: f64, beta: f64, wind: &WindVector, p: &TurbineParams, s: &AeroSurfaces) -> f64 {
    loads(omega_r, beta, wind, p, s).power
}

/// Aerodynamic torque `P / omega_r` (N m).
pub fn aero_torque(
    omega_r: f64,
    beta: f64,
    wind: &WindVector,
    p: &TurbineParams,
    s: &AeroSurfaces,
) -> Result<f64> {
    let l = loads(omega_r, beta, wind, p, s);
    if omega_r == 0.0 {
        if l.power != 0.0 {
            return Err(FarmError::ZeroRotorSpeed { power: l.power });
        }
        return Ok(0.0);
    }
    Ok(l.power / omega_r)
}

/// Rotor thrust `0.5 rho A C_T |u|^2` (N), the `C_T` used, and the clamp flag.
pub fn aero_thrust(
    omega_r: f64,
    beta: f64,
    wind: &WindVector,
    p: &TurbineParams,
    s: &AeroSurfaces,
) -> (f64, f64, bool) {
    let l = loads(omega_r, beta, wind, p, s);
    (l.thrust, l.ct, l.clamped)
}

/// Stiff-drivetrain rotor acceleration `(T_a - N_G T_g) / J_eq`.
pub fn drivetrain_rhs(aero_torque: f64, generator_torque: f64, p: &TurbineParams) -> f64 {
    (aero_torque - p.gear_ratio * generator_torque) / p.j_eq()
}

/// Generator-side electrical power `nu_G N_G omega_r T_g` (W).
pub fn generator_power(omega_r: f64, generator_torque: f64, p: &TurbineParams) -> f64 {
    p.generator_efficiency * p.gear_ratio * omega_r * generator_torque
}

/// The reduced floating-turbine model.
#[derive(Debug, Clone)]
pub struct Turbine {
    pub params: TurbineParams,
    pub aero: Arc<AeroSurfaces>,
    pub drivetrain: Drivetrain,
    /// Locks all six platform DOFs (bottom-fixed turbine).
    pub fixed_platform: bool,
}

impl Turbine {
    pub fn new(params: TurbineParams, aero: Arc<AeroSurfaces>) -> Self {
        Self {
            params,
            aero,
            drivetrain: Drivetrain::default(),
            fixed_platform: false,
        }
    }

    pub fn with_drivetrain(mut self, drivetrain: Drivetrain) -> Self {
        self.drivetrain = drivetrain;
        self
    }

    pub fn with_fixed_platform(mut self, fixed: bool) -> Self {
        self.fixed_platform = fixed;
        self
    }

    /// Wind seen by the rotor: inflow minus the hub velocity induced by platform motion.
    pub fn hub_relative_wind(&self, x: &TurbineState, wind: &WindVector) -> WindVector {
        let h = self.params.hub_height;
        let s = &x.0;
        WindVector::new(
            wind.u_x - (s[dof::SURGE_RATE] + h * s[dof::PITCH_RATE]),
            wind.u_y - (s[dof::SWAY_RATE] - h * s[dof::ROLL_RATE]),
            wind.u_z - s[dof::HEAVE_RATE],
        )
    }

    pub fn aero_loads(&self, x: &TurbineState, pitch: f64, wind: &WindVector) -> AeroLoads {
        let rel = self.hub_relative_wind(x, wind);
        loads(x.omega_r(), pitch, &rel, &self.params, &self.aero)
    }

    /// Continuous-time vector field `f(chi, eta, u)`.
    pub fn rhs(&self, x: &TurbineState, eta: &ControlInput, wind: &WindVector) -> [f64; N_STATES] {
        let p = &self.params;
        let s = &x.0;
        let mut d = [0.0; N_STATES];
        let rel = self.hub_relative_wind(x, wind);
        let l = loads(s[dof::OMEGA_R], eta.pitch, &rel, p, &self.aero);

        if !self.fixed_platform {
            let dir = rel.direction();
            let f = [l.thrust * dir[0], l.thrust * dir[1], l.thrust * dir[2]];
            let h = p.hub_height;
            let gen_force = [f[0], f[1], f[2], -f[1] * h, f[0] * h, 0.0];
            let pp = &p.platform;
            for k in 0..6 {
                d[k] = s[7 + k];
                d[7 + k] = (gen_force[k] - pp.stiffness[k] * s[k] - pp.damping[k] * s[7 + k]) / pp.inertia[k];
            }
        }

        match self.drivetrain {
            Drivetrain::Stiff => {
                let acc = drivetrain_rhs(l.torque, eta.torque, p);
                d[dof::TWIST] = 0.0;
                d[dof::OMEGA_R] = acc;
                d[dof::OMEGA_G] = p.gear_ratio * acc;
            }
            Drivetrain::TwoMass => {
                let n = p.gear_ratio;
                let slip = s[dof::OMEGA_R] - s[dof::OMEGA_G] / n;
                let shaft = p.drivetrain_stiffness * s[dof::TWIST] + p.drivetrain_damping * slip;
                d[dof::TWIST] = slip;
                d[dof::OMEGA_R] = (l.torque - shaft) / p.rotor_inertia;
                d[dof::OMEGA_G] = (shaft / n - eta.torque) / p.generator_inertia;
            }
        }
        d
    }

    /// One RK4 step with `eta` and `wind` held over `dt`.
    pub fn step(&self, x: &TurbineState, eta: &ControlInput, wind: &WindVector, dt: f64) -> Result<TurbineState> {
        if !(dt > 0.0) {
            return Err(FarmError::Domain(format!("time step must be positive, got {dt}")));
        }
        let k1 = self.rhs(x, eta, wind);
        let k2 = self.rhs(&axpy(x, 0.5 * dt, &k1), eta, wind);
        let k3 = self.rhs(&axpy(x, 0.5 * dt, &k2), eta, wind);
        let k4 = self.rhs(&axpy(x, dt, &k3), eta, wind);
        let mut out = *x;
        for i in 0..N_STATES {
            out.0[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if self.drivetrain == Drivetrain::Stiff {
            out.0[dof::OMEGA_G] = self.params.gear_ratio * out.0[dof::OMEGA_R];
        }
        out.check_finite()?;
        Ok(out)
    }
}

fn axpy(x: &TurbineState, a: f64, k: &[f64; N_STATES]) -> TurbineState {
    let mut y = *x;
    for i in 0..N_STATES {
        y.0[i] += a * k[i];
    }
    y
}

/// Free-function form of [`Turbine::step`].
pub fn step_turbine(
    x: &TurbineState,
    eta: &ControlInput,
    wind: &WindVector,
    dt: f64,
    turbine: &Turbine,
) -> Result<TurbineState> {
    turbine.step(x, eta, wind, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use aero::BETZ_LIMIT;
    use proptest::prelude::*;

    fn nrel(drivetrain: Drivetrain) -> Turbine {
        Turbine::new(TurbineParams::default(), Arc::new(AeroSurfaces::default_table())).with_drivetrain(drivetrain)
    }

    fn toy_params() -> TurbineParams {
        TurbineParams {
            rotor_radius: (100.0 / std::f64::consts::PI).sqrt(),
            ..TurbineParams::default()
        }
    }

    #[test]
    fn zero_cp_table_gives_zero_power() {
        let s = AeroSurfaces::constant(0.0, 0.0);
        let p = TurbineParams::default();
        assert_eq!(aero_power(1.0, 0.1, &WindVector::streamwise(12.0), &p, &s), 0.0);
        assert_eq!(aero_thrust(1.0, 0.1, &WindVector::streamwise(12.0), &p, &s).0, 0.0);
    }

    #[test]
    fn power_hand_evaluation() {
        let s = AeroSurfaces::constant(0.4, 0.0);
        let p = toy_params();
        let pw = aero_power(0.5, 0.0, &WindVector::streamwise(10.0), &p, &s);
        assert!((pw - 24_500.0).abs() < 1e-6, "{pw}");
    }

    #[test]
    fn thrust_hand_evaluation() {
        let s = AeroSurfaces::constant(0.0, 0.75);
        let p = toy_params();
        let (f, ct, _) = aero_thrust(0.5, 0.0, &WindVector::streamwise(8.0), &p, &s);
        assert!((f - 2_940.0).abs() < 1e-6, "{f}");
        assert!((ct - 0.75).abs() < 1e-12);
    }

    #[test]
    fn power_scales_with_wind_cubed_at_fixed_tip_speed_ratio() {
        let t = nrel(Drivetrain::Stiff);
        let (p, s) = (&t.params, &*t.aero);
        let p1 = aero_power(1.0, 0.05, &WindVector::streamwise(7.0), p, s);
        let p2 = aero_power(2.0, 0.05, &WindVector::streamwise(14.0), p, s);
        assert!((p2 / p1 - 8.0).abs() < 1e-9);
    }

    #[test]
    fn torque_singularity_at_zero_speed() {
        let s = AeroSurfaces::constant(0.4, 0.5);
        let p = TurbineParams::default();
        let err = aero_torque(0.0, 0.0, &WindVector::streamwise(10.0), &p, &s).unwrap_err();
        assert!(matches!(err, FarmError::ZeroRotorSpeed { .. }));
        let zero = AeroSurfaces::constant(0.0, 0.0);
        assert_eq!(aero_torque(0.0, 0.0, &WindVector::streamwise(10.0), &p, &zero).unwrap(), 0.0);
    }

    #[test]
    fn drivetrain_and_generator_hand_values() {
        let p = TurbineParams {
            rotor_inertia: 1000.0,
            generator_inertia: 0.0,
            gear_ratio: 10.0,
            ..TurbineParams::default()
        };
        assert!((drivetrain_rhs(500.0, 20.0, &p) - 0.3).abs() < 1e-15);
        assert_eq!(drivetrain_rhs(500.0, 50.0, &p), 0.0);
        assert!(drivetrain_rhs(500.0, 60.0, &p) < 0.0);

        let q = TurbineParams {
            generator_efficiency: 0.9,
            gear_ratio: 97.0,
            ..TurbineParams::default()
        };
        assert!((generator_power(1.2, 40_000.0, &q) - 4_190_400.0).abs() < 1e-6);
        assert_eq!(generator_power(1.2, 0.0, &q), 0.0);
    }

    #[test]
    fn rest_is_an_equilibrium_without_wind() {
        for dt in [Drivetrain::Stiff, Drivetrain::TwoMass] {
            let t = nrel(dt);
            let mut x = TurbineState::default();
            for _ in 0..200 {
                x = t.step(&x, &ControlInput::default(), &WindVector::default(), 0.05).unwrap();
            }
            assert_eq!(x, TurbineState::default());
        }
    }

    #[test]
    fn balanced_torque_keeps_rotor_speed_constant() {
        // constant-torque surface: C_p proportional to lambda gives T_a independent of omega
        let p = TurbineParams::default();
        let lam = vec![0.0, 20.0];
        let k = 0.02;
        let s = AeroSurfaces::new(lam.clone(), vec![0.0, 1.0], vec![0.0, 0.0, 20.0 * k, 20.0 * k], vec![0.0; 4]).unwrap();
        let t = Turbine::new(p.clone(), Arc::new(s)).with_drivetrain(Drivetrain::Stiff).with_fixed_platform(true);
        let wind = WindVector::streamwise(10.0);
        let x0 = TurbineState::at_rotor_speed(1.0, p.gear_ratio);
        let ta = t.aero_loads(&x0, 0.0, &wind).torque;
        let eta = ControlInput { pitch: 0.0, torque: ta / p.gear_ratio, yaw: 0.0 };
        let mut x = x0;
        for _ in 0..1000 {
            x = t.step(&x, &eta, &wind, 0.05).unwrap();
        }
        assert!((x.omega_r() - 1.0).abs() < 1e-12);
        assert_eq!(x.omega_g(), p.gear_ratio * x.omega_r());
    }

    #[test]
    fn pitch_impulse_matches_damped_oscillator() {
        let t = nrel(Drivetrain::Stiff);
        let pp = &t.params.platform;
        let (k, c, m) = (pp.stiffness[dof::PITCH], pp.damping[dof::PITCH], pp.inertia[dof::PITCH]);
        let wn = (k / m).sqrt();
        let zeta = c / (2.0 * (k * m).sqrt());
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        // a thrust impulse J at hub height imparts an initial pitch rate J h / I
        let v0 = 1e-3;
        let mut x = TurbineState::default();
        x.0[dof::PITCH_RATE] = v0;
        let dt = 0.05;
        let mut max_err: f64 = 0.0;
        for n in 1..=2000 {
            x = t.step(&x, &ControlInput::default(), &WindVector::default(), dt).unwrap();
            let tt = n as f64 * dt;
            let exact = v0 / wd * (-zeta * wn * tt).exp() * (wd * tt).sin();
            max_err = max_err.max((x.platform_pitch() - exact).abs());
        }
        assert!(max_err < 1e-9 * v0 / wd * 1e3, "max error {max_err}");
    }

    #[test]
    fn streamwise_wind_keeps_out_of_plane_dofs_at_zero() {
        let t = nrel(Drivetrain::TwoMass);
        let mut x = TurbineState::at_rotor_speed(1.1, 97.0);
        let eta = ControlInput { pitch: 0.05, torque: 40_000.0, yaw: 0.0 };
        for _ in 0..400 {
            x = t.step(&x, &eta, &WindVector::streamwise(13.0), 0.05).unwrap();
        }
        for i in [dof::SWAY, dof::ROLL, dof::YAW, dof::SWAY_RATE, dof::ROLL_RATE, dof::YAW_RATE] {
            assert_eq!(x.0[i], 0.0, "{}", dof::NAMES[i]);
        }
        assert!(x.0[dof::SURGE] != 0.0 && x.0[dof::PITCH] != 0.0);
    }

    #[test]
    fn stiff_energy_balance() {
        let t = nrel(Drivetrain::Stiff).with_fixed_platform(true);
        let p = &t.params;
        let wind = WindVector::streamwise(9.0);
        let eta = ControlInput { pitch: 0.0, torque: 30_000.0, yaw: 0.0 };
        let dt = 0.01;
        let mut x = TurbineState::at_rotor_speed(1.0, p.gear_ratio);
        let e0 = 0.5 * p.j_eq() * x.omega_r().powi(2);
        let mut work = 0.0;
        for _ in 0..3000 {
            let f = |s: &TurbineState| {
                let ta = t.aero_loads(s, eta.pitch, &wind).torque;
                (ta - p.gear_ratio * eta.torque) * s.omega_r()
            };
            let x1 = t.step(&x, &eta, &wind, dt).unwrap();
            work += 0.5 * dt * (f(&x) + f(&x1));
            x = x1;
        }
        let e1 = 0.5 * p.j_eq() * x.omega_r().powi(2);
        assert!(((e1 - e0) - work).abs() < 1e-5 * work.abs().max(e0 * 1e-3), "dE {} vs W {}", e1 - e0, work);
    }

    #[test]
    fn non_finite_state_reports_offending_dof() {
        let t = nrel(Drivetrain::Stiff);
        let mut x = TurbineState::default();
        x.0[dof::YAW] = f64::NAN;
        let err = t.step(&x, &ControlInput::default(), &WindVector::default(), 0.05).unwrap_err();
        assert!(matches!(err, FarmError::Diverged { dof: "yaw" }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn extracted_power_never_exceeds_betz(omega in 0.0f64..2.0, beta in -0.1f64..0.8, u in 0.5f64..30.0) {
            let t = nrel(Drivetrain::Stiff);
            let p = &t.params;
            let pw = aero_power(omega, beta, &WindVector::streamwise(u), p, &t.aero);
            let betz = 0.5 * p.air_density * p.rotor_area() * BETZ_LIMIT * u.powi(3);
            prop_assert!(pw >= 0.0 && pw <= betz * (1.0 + 1e-12));
        }

        #[test]
        fn thrust_nondecreasing_in_wind(lambda in 1.0f64..12.0, beta in 0.0f64..0.5, u in 1.0f64..25.0, du in 0.0f64..5.0) {
            let t = nrel(Drivetrain::Stiff);
            let r = t.params.rotor_radius;
            let f1 = aero_thrust(lambda * u / r, beta, &WindVector::streamwise(u), &t.params, &t.aero).0;
            let u2 = u + du;
            let f2 = aero_thrust(lambda * u2 / r, beta, &WindVector::streamwise(u2), &t.params, &t.aero).0;
            prop_assert!(f2 >= f1 * (1.0 - 1e-12));
        }

        #[test]
        fn stepping_is_deterministic(u in 4.0f64..20.0, tq in 0.0f64..45_000.0, b in 0.0f64..0.3) {
            let t = nrel(Drivetrain::TwoMass);
            let eta = ControlInput { pitch: b, torque: tq, yaw: 0.0 };
            let wind = WindVector::new(u, 0.3, -0.1);
            let run = || {
                let mut x = TurbineState::at_rotor_speed(1.0, 97.0);
                for _ in 0..100 { x = t.step(&x, &eta, &wind, 0.05).unwrap(); }
                x
            };
            let (a, c) = (run(), run());
            prop_assert!(a.0.iter().zip(c.0.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
