//! Experiment configuration: a flat `key = value` text format.
//!
//! ```text
//! # circular drive with a large left error
//! trajectory.kind = circular
//! trajectory.radius_m = 500
//! error.side = left
//! error.phi_rad = 2.617993877991494, 0, 0
//! ```
//!
//! Vectors are three comma-separated reals. Unknown or repeated keys are
//! parse errors; missing keys take the defaults of [`ExperimentConfig`].

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::error_dynamics::Side;
use crate::group::{Tangent, Vec3};
use crate::ins::{EarthModel, Gravitation, EARTH_MU};
use crate::scenario::{TrajectoryKind, TrajectorySpec, INJECTION_MARGIN};

pub const DEFAULT_OUTPUT: &str = "exactness.csv";

const DEFAULT_RADIUS: f64 = 500.0;
const DEFAULT_PERIOD: f64 = 120.0;
const DEFAULT_AMPLITUDES: [f64; 3] = [0.3, 0.2, 0.4];
const DEFAULT_FREQUENCIES: [f64; 3] = [1.0, 0.5, 0.8];
const DEFAULT_G: [f64; 3] = [0.0, 0.0, -9.81];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trajectory: TrajectorySpec,
    pub earth: EarthModel,
    pub error_side: Side,
    pub initial_error: Tangent,
    pub rng_seed: u64,
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trajectory: TrajectorySpec::default(),
            earth: EarthModel::default(),
            error_side: Side::Left,
            initial_error: Tangent::zero(),
            rng_seed: 0,
            output_path: DEFAULT_OUTPUT.to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = self.trajectory.validation_errors();
        errs.extend(self.earth.validation_errors());
        let e = &self.initial_error;
        if !e.to_vector().iter().all(|x| x.is_finite()) {
            errs.push("initial error must be finite".into());
        } else if e.phi.norm() > PI - INJECTION_MARGIN {
            errs.push(format!(
                "initial attitude error {} rad exceeds pi - {INJECTION_MARGIN}",
                e.phi.norm()
            ));
        }
        if self.output_path.is_empty() {
            errs.push("output path is empty".into());
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

struct Field<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Field<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            field: self.key.to_string(),
            message: message.into(),
        }
    }

    fn real(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .map_err(|e| self.err(format!("expected a real number: {e}")))
    }

    fn vec3(&self) -> Result<Vec3> {
        let parts: Vec<&str> = self.value.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(self.err(format!("expected 3 comma-separated reals, got {}", parts.len())));
        }
        let mut out = Vec3::zeros();
        for (i, p) in parts.iter().enumerate() {
            out[i] = p
                .parse::<f64>()
                .map_err(|e| self.err(format!("component {i}: {e}")))?;
        }
        Ok(out)
    }
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    let mut kind = None;
    let mut radius = DEFAULT_RADIUS;
    let mut period = DEFAULT_PERIOD;
    let mut yaw_rate = 0.0;
    let mut amplitudes = Vec3::from(DEFAULT_AMPLITUDES);
    let mut frequencies = Vec3::from(DEFAULT_FREQUENCIES);
    let mut mode = None;
    let mut g = Vec3::from(DEFAULT_G);
    let mut mu = EARTH_MU;
    let mut cfg = ExperimentConfig::default();
    let mut seen = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                field: content.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let f = Field {
            line,
            key: key.trim(),
            value: value.trim(),
        };
        if !seen.insert(f.key.to_string()) {
            return Err(f.err("duplicate key"));
        }
        let t = &mut cfg.trajectory;
        match f.key {
            "trajectory.kind" => {
                kind = Some(match f.value {
                    "static" | "circular" | "constant_yaw_rate" | "sinusoidal" => f.value,
                    other => return Err(f.err(format!("unknown trajectory kind `{other}`"))),
                })
            }
            "trajectory.radius_m" => radius = f.real()?,
            "trajectory.period_s" => period = f.real()?,
            "trajectory.yaw_rate_rad_s" => yaw_rate = f.real()?,
            "trajectory.amplitudes_rad" => amplitudes = f.vec3()?,
            "trajectory.frequencies_hz" => frequencies = f.vec3()?,
            "trajectory.origin_m" => t.origin_position = f.vec3()?,
            "trajectory.attitude_rad" => t.initial_attitude = f.vec3()?,
            "trajectory.duration_s" => t.duration = f.real()?,
            "trajectory.step_s" => t.step = f.real()?,
            "earth.rate_rad_s" => cfg.earth.omega_ie_e = Vec3::new(0.0, 0.0, f.real()?),
            "earth.gravitation_mode" => {
                mode = Some(match f.value {
                    "central" | "constant" => f.value,
                    other => return Err(f.err(format!("unknown gravitation mode `{other}`"))),
                })
            }
            "earth.G_mps2" => g = f.vec3()?,
            "earth.mu_m3_s2" => mu = f.real()?,
            "error.side" => {
                cfg.error_side = f.value.parse().map_err(|e: Error| f.err(e.to_string()))?
            }
            "error.phi_rad" => cfg.initial_error.phi = f.vec3()?,
            "error.nu_mps" => cfg.initial_error.nu = f.vec3()?,
            "error.rho_m" => cfg.initial_error.rho = f.vec3()?,
            "seed" => {
                cfg.rng_seed = f
                    .value
                    .parse()
                    .map_err(|e| f.err(format!("expected an unsigned integer: {e}")))?
            }
            "output" => cfg.output_path = f.value.to_string(),
            _ => return Err(f.err("unknown key")),
        }
    }

    cfg.trajectory.kind = match kind.unwrap_or("circular") {
        "static" => TrajectoryKind::Static,
        "constant_yaw_rate" => TrajectoryKind::ConstantYawRate { rate: yaw_rate },
        "sinusoidal" => TrajectoryKind::Sinusoidal {
            amplitudes,
            frequencies,
        },
        _ => TrajectoryKind::CircularGround { radius, period },
    };
    cfg.earth.gravitation = match mode.unwrap_or("central") {
        "constant" => Gravitation::ConstantVector(g),
        _ => Gravitation::CentralBody { mu },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn vec3_text(v: &Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

/// Writes a document that [`load_config`] parses back to `cfg`.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let t = &cfg.trajectory;
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("trajectory.kind", t.kind.name().to_string());
    match t.kind {
        TrajectoryKind::Static => {}
        TrajectoryKind::ConstantYawRate { rate } => kv("trajectory.yaw_rate_rad_s", format!("{rate:?}")),
        TrajectoryKind::CircularGround { radius, period } => {
            kv("trajectory.radius_m", format!("{radius:?}"));
            kv("trajectory.period_s", format!("{period:?}"));
        }
        TrajectoryKind::Sinusoidal {
            amplitudes,
            frequencies,
        } => {
            kv("trajectory.amplitudes_rad", vec3_text(&amplitudes));
            kv("trajectory.frequencies_hz", vec3_text(&frequencies));
        }
    }
    kv("trajectory.origin_m", vec3_text(&t.origin_position));
    kv("trajectory.attitude_rad", vec3_text(&t.initial_attitude));
    kv("trajectory.duration_s", format!("{:?}", t.duration));
    kv("trajectory.step_s", format!("{:?}", t.step));
    // only the z component of the earth rate is representable
    kv("earth.rate_rad_s", format!("{:?}", cfg.earth.omega_ie_e.z));
    match cfg.earth.gravitation {
        Gravitation::ConstantVector(g) => {
            kv("earth.gravitation_mode", "constant".into());
            kv("earth.G_mps2", vec3_text(&g));
        }
        Gravitation::CentralBody { mu } => {
            kv("earth.gravitation_mode", "central".into());
            kv("earth.mu_m3_s2", format!("{mu:?}"));
        }
    }
    kv("error.side", cfg.error_side.to_string());
    kv("error.phi_rad", vec3_text(&cfg.initial_error.phi));
    kv("error.nu_mps", vec3_text(&cfg.initial_error.nu));
    kv("error.rho_m", vec3_text(&cfg.initial_error.rho));
    kv("seed", cfg.rng_seed.to_string());
    kv("output", cfg.output_path.clone());
    out
}
