use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};

/// Rigid-body platform coefficients, ordered surge, sway, heave, roll, pitch, yaw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformParams {
    /// Effective mass / inertia including added mass (kg, kg m^2).
    pub inertia: [f64; 6],
    /// Hydrostatic plus mooring stiffness (N/m, N m/rad).
    pub stiffness: [f64; 6],
    /// Linear damping (N s/m, N m s/rad).
    pub damping: [f64; 6],
}

impl Default for PlatformParams {
    // OC4 semi-submersible, reduced to uncoupled rigid-body modes.
    fn default() -> Self {
        Self {
            inertia: [2.2e7, 2.2e7, 2.6e7, 1.5e10, 1.5e10, 1.2e10],
            stiffness: [7.08e4, 7.08e4, 3.836e6, 1.1e9, 1.1e9, 9.8e7],
            damping: [2.5e5, 2.5e5, 2.0e6, 8.1e8, 8.1e8, 2.2e8],
        }
    }
}

impl PlatformParams {
    /// Undamped natural frequency of one DOF (rad/s).
    pub fn natural_frequency(&self, dof: usize) -> f64 {
        (self.stiffness[dof] / self.inertia[dof]).sqrt()
    }
}

/// Turbine parameters. Defaults follow the NREL 5 MW reference turbine on
/// the OC4 semi-submersible; all values are overridable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineParams {
    /// Rotor inertia about the low-speed shaft (kg m^2).
    pub rotor_inertia: f64,
    /// Generator inertia about the high-speed shaft (kg m^2).
    pub generator_inertia: f64,
    pub gear_ratio: f64,
    /// Generator efficiency, strictly between 0 and 1.
    pub generator_efficiency: f64,
    pub rotor_radius: f64,
    pub air_density: f64,
    /// Hub height above the platform rotation point (m).
    pub hub_height: f64,
    /// Drivetrain torsional stiffness (N m/rad) and damping (N m s/rad).
    pub drivetrain_stiffness: f64,
    pub drivetrain_damping: f64,
    /// Rated generator torque, high-speed side (N m).
    pub rated_generator_torque: f64,
    pub max_generator_torque: f64,
    /// Upper pitch limit (rad).
    pub max_pitch: f64,
    pub platform: PlatformParams,
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self {
            rotor_inertia: 38_759_228.0,
            generator_inertia: 534.116,
            gear_ratio: 97.0,
            generator_efficiency: 0.944,
            rotor_radius: 63.0,
            air_density: 1.225,
            hub_height: 90.0,
            drivetrain_stiffness: 867_637_000.0,
            drivetrain_damping: 6_215_000.0,
            rated_generator_torque: 43_093.55,
            max_generator_torque: 47_402.91,
            max_pitch: 40f64.to_radians(),
            platform: PlatformParams::default(),
        }
    }
}

impl TurbineParams {
    /// Drivetrain inertia referred to the low-speed shaft, `J_r + N^2 J_g`.
    pub fn j_eq(&self) -> f64 {
        self.rotor_inertia + self.gear_ratio * self.gear_ratio * self.generator_inertia
    }

    /// Rotor swept area, `pi R^2`.
    pub fn rotor_area(&self) -> f64 {
        PI * self.rotor_radius * self.rotor_radius
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rotor_inertia", self.rotor_inertia),
            ("generator_inertia", self.generator_inertia),
            ("gear_ratio", self.gear_ratio),
            ("rotor_radius", self.rotor_radius),
            ("air_density", self.air_density),
            ("hub_height", self.hub_height),
            ("drivetrain_stiffness", self.drivetrain_stiffness),
            ("drivetrain_damping", self.drivetrain_damping),
            ("rated_generator_torque", self.rated_generator_torque),
            ("max_generator_torque", self.max_generator_torque),
            ("max_pitch", self.max_pitch),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FarmError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (k, name) in ["inertia", "stiffness"].iter().enumerate() {
            let arr = if k == 0 {
                &self.platform.inertia
            } else {
                &self.platform.stiffness
            };
            if arr.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(FarmError::Config(format!("platform {name} must be positive")));
            }
        }
        if self.platform.damping.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(FarmError::Config("platform damping must be non-negative".into()));
        }
        if !(self.generator_efficiency > 0.0 && self.generator_efficiency < 1.0) {
            return Err(FarmError::Config(format!(
                "generator_efficiency must lie in (0, 1), got {}",
                self.generator_efficiency
            )));
        }
        if self.rated_generator_torque > self.max_generator_torque {
            return Err(FarmError::Config(
                "rated generator torque exceeds the torque limit".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FarmError::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_derived_values_consistent() {
        let p = TurbineParams::default();
        p.validate().unwrap();
        assert!((p.rotor_area() - PI * 63.0 * 63.0).abs() < 1e-9);
        assert!((p.j_eq() - (38_759_228.0 + 97.0 * 97.0 * 534.116)).abs() < 1e-6);
    }

    #[test]
    fn efficiency_outside_unit_interval_is_rejected() {
        let mut p = TurbineParams::default();
        p.generator_efficiency = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn partial_toml_overrides_defaults() {
        let p = TurbineParams::from_toml_str("rotor_radius = 60.0\n").unwrap();
        assert_eq!(p.rotor_radius, 60.0);
        assert_eq!(p.gear_ratio, 97.0);
        assert!(TurbineParams::from_toml_str("gear_ratio = -1.0\n").is_err());
    }
}
