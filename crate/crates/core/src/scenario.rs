//! Analytic reference trajectories and the IMU signals that reproduce them.
//!
//! Every trajectory is described in a local east-north-up frame anchored at
//! an ECEF origin. Attitude, position and their derivatives are closed-form,
//! so the only error source in an experiment is the integrator. The IMU
//! readings are obtained by inverting the attitude and velocity equations:
//!
//! ```text
//! ω_ib^b = vee(Cᵀ(Ċ + (ω_ie×)C))
//! f^b    = Cᵀ(v̇_ib + (ω_ie×)v_ib - G)
//! ```

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::error_dynamics::Side;
use crate::group::{
    exp_se23, exp_so3, hat3, left_jacobian_so3, vee3, ExtendedPose, Mat3, Rotation, Tangent, Vec3,
};
use crate::ins::{
    gravitation_at, inertial_velocity, EarthModel, Gravitation, ImuSample, InputSample,
    InputSource, MIN_CENTRAL_RADIUS,
};

/// Margin kept between injected attitude errors and the logarithm cut at pi.
pub const INJECTION_MARGIN: f64 = 0.2;
/// Upper bound on the number of integration steps a trajectory may request.
pub const MAX_STEPS: f64 = 5e7;

/// Default origin: on the equatorial-radius sphere at 30.5° N, 114.3° E.
pub fn default_origin() -> Vec3 {
    let (lat, lon) = (30.5f64.to_radians(), 114.3f64.to_radians());
    Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()) * 6.378137e6
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryKind {
    Static,
    ConstantYawRate { rate: f64 },
    CircularGround { radius: f64, period: f64 },
    /// Attitude oscillation `φ_i(t) = A_i sin(2π f_i t)` about a fixed point.
    Sinusoidal { amplitudes: Vec3, frequencies: Vec3 },
}

impl TrajectoryKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Static => "static",
            TrajectoryKind::ConstantYawRate { .. } => "constant_yaw_rate",
            TrajectoryKind::CircularGround { .. } => "circular",
            TrajectoryKind::Sinusoidal { .. } => "sinusoidal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// ECEF origin, m.
    pub origin_position: Vec3,
    /// Body-to-local mounting rotation, axis-angle rad.
    pub initial_attitude: Vec3,
    pub duration: f64,
    pub step: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::CircularGround {
                radius: 500.0,
                period: 120.0,
            },
            origin_position: default_origin(),
            initial_attitude: Vec3::zeros(),
            duration: 300.0,
            step: 0.005,
        }
    }
}

impl TrajectorySpec {
    pub fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    /// Largest distance the trajectory moves away from its origin.
    fn max_excursion(&self) -> f64 {
        match self.kind {
            TrajectoryKind::CircularGround { radius, .. } => 2.0 * radius,
            _ => 0.0,
        }
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        if !(self.step > 0.0 && self.step.is_finite()) {
            errs.push(format!("step must be positive, got {}", self.step));
        }
        if !(self.duration >= self.step && self.duration.is_finite()) {
            errs.push(format!(
                "duration {} must be finite and at least one step",
                self.duration
            ));
        } else if self.duration / self.step > MAX_STEPS {
            errs.push(format!("duration/step exceeds {MAX_STEPS} steps"));
        }
        if !finite(&self.origin_position) {
            errs.push("origin must be finite".into());
        }
        if !(finite(&self.initial_attitude) && self.initial_attitude.norm() < PI) {
            errs.push("initial attitude must be finite with angle below pi".into());
        }
        match self.kind {
            TrajectoryKind::Static => {}
            TrajectoryKind::ConstantYawRate { rate } => {
                if !rate.is_finite() {
                    errs.push("yaw rate must be finite".into());
                }
            }
            TrajectoryKind::CircularGround { radius, period } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    errs.push(format!("radius must be positive, got {radius}"));
                }
                if !(period > 0.0 && period.is_finite()) {
                    errs.push(format!("period must be positive, got {period}"));
                }
            }
            TrajectoryKind::Sinusoidal {
                amplitudes,
                frequencies,
            } => {
                if !(finite(&amplitudes) && amplitudes.iter().map(|a| a.abs()).sum::<f64>() < PI) {
                    errs.push("sinusoid amplitudes must be finite and sum below pi".into());
                }
                if !(finite(&frequencies) && frequencies.iter().all(|f| *f >= 0.0)) {
                    errs.push("sinusoid frequencies must be finite and non-negative".into());
                }
            }
        }
        errs
    }

    /// Local kinematics at time `t`.
    fn local_at(&self, t: f64) -> LocalKinematics {
        match self.kind {
            TrajectoryKind::Static => LocalKinematics::at_rest(Mat3::identity(), Mat3::zeros()),
            TrajectoryKind::ConstantYawRate { rate } => {
                let h = *exp_so3(&Vec3::new(0.0, 0.0, rate * t)).matrix();
                LocalKinematics::at_rest(h, h * hat3(&Vec3::new(0.0, 0.0, rate)))
            }
            TrajectoryKind::CircularGround { radius, period } => {
                let w = TAU / period;
                let (s, c) = (w * t).sin_cos();
                let h = *exp_so3(&Vec3::new(0.0, 0.0, w * t)).matrix();
                LocalKinematics {
                    heading: h,
                    heading_rate: h * hat3(&Vec3::new(0.0, 0.0, w)),
                    position: Vec3::new(radius * s, radius * (1.0 - c), 0.0),
                    velocity: Vec3::new(radius * w * c, radius * w * s, 0.0),
                    acceleration: Vec3::new(-radius * w * w * s, radius * w * w * c, 0.0),
                }
            }
            TrajectoryKind::Sinusoidal {
                amplitudes,
                frequencies,
            } => {
                let mut phi = Vec3::zeros();
                let mut phi_dot = Vec3::zeros();
                for i in 0..3 {
                    let w = TAU * frequencies[i];
                    phi[i] = amplitudes[i] * (w * t).sin();
                    phi_dot[i] = amplitudes[i] * w * (w * t).cos();
                }
                let h = *exp_so3(&phi).matrix();
                let omega = left_jacobian_so3(&phi) * phi_dot;
                LocalKinematics::at_rest(h, hat3(&omega) * h)
            }
        }
    }
}

struct LocalKinematics {
    heading: Mat3,
    heading_rate: Mat3,
    position: Vec3,
    velocity: Vec3,
    acceleration: Vec3,
}

impl LocalKinematics {
    fn at_rest(heading: Mat3, heading_rate: Mat3) -> Self {
        LocalKinematics {
            heading,
            heading_rate,
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            acceleration: Vec3::zeros(),
        }
    }
}

/// East-north-up axes at `origin`, as columns of a local-to-ECEF rotation.
pub fn local_frame(origin: &Vec3) -> Mat3 {
    let up = origin.normalize();
    let horiz = origin.x.hypot(origin.y);
    let east = if horiz > 1e-9 * origin.norm() {
        Vec3::new(-origin.y / horiz, origin.x / horiz, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let north = up.cross(&east);
    Mat3::from_columns(&[east, north, up])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub chi_true: ExtendedPose,
    pub imu: ImuSample,
    pub gravitation: Vec3,
}

/// Analytic truth plus the synthesized inputs on the uniform grid. Also an
/// [`InputSource`] that evaluates the inputs at any instant.
#[derive(Debug, Clone)]
pub struct ReferenceStream {
    pub spec: TrajectorySpec,
    pub earth: EarthModel,
    pub samples: Vec<ReferenceSample>,
    local_to_ecef: Mat3,
    mount: Mat3,
}

impl ReferenceStream {
    pub fn initial_pose(&self) -> ExtendedPose {
        self.samples[0].chi_true
    }

    pub fn step(&self) -> f64 {
        self.spec.step
    }

    /// Truth, IMU and gravitation at any time.
    pub fn evaluate(&self, t: f64) -> Result<ReferenceSample> {
        let local = self.spec.local_at(t);
        let rot = self.local_to_ecef;
        let c = rot * local.heading * self.mount;
        let c_dot = rot * local.heading_rate * self.mount;
        let r = self.spec.origin_position + rot * local.position;
        let v_eb = rot * local.velocity;
        let a_eb = rot * local.acceleration;

        let w_ie = self.earth.omega_ie_e;
        let v_ib = inertial_velocity(&v_eb, &r, &self.earth);
        let v_ib_dot = a_eb + w_ie.cross(&v_eb);
        let gravitation = gravitation_at(&self.earth, &r)?;

        let ct = c.transpose();
        let omega_ib_b = vee3(&(ct * (c_dot + hat3(&w_ie) * c)))?;
        let f_b = ct * (v_ib_dot + w_ie.cross(&v_ib) - gravitation);

        Ok(ReferenceSample {
            t,
            chi_true: ExtendedPose::new(Rotation::new(c)?, v_ib, r),
            imu: ImuSample::new(t, omega_ib_b, f_b),
            gravitation,
        })
    }
}

impl InputSource for ReferenceStream {
    fn sample(&self, _step_start: f64, t: f64) -> InputSample {
        // synth_reference already evaluated the whole span, so this cannot fail
        // for times inside the run.
        let s = self
            .evaluate(t)
            .expect("reference trajectory was validated at construction");
        InputSample {
            imu: s.imu,
            gravitation: s.gravitation,
        }
    }
}

/// Builds the analytic reference for `spec` and samples it every `spec.step`.
pub fn synth_reference(spec: &TrajectorySpec, earth: &EarthModel) -> Result<ReferenceStream> {
    let mut errs = spec.validation_errors();
    errs.extend(earth.validation_errors());
    if !errs.is_empty() {
        return Err(Error::UnsupportedSpec(errs.join("; ")));
    }
    if let Gravitation::CentralBody { .. } = earth.gravitation {
        let clearance = spec.origin_position.norm() - spec.max_excursion();
        if !(clearance > MIN_CENTRAL_RADIUS) {
            return Err(Error::DegeneratePosition { radius: clearance });
        }
    }
    if spec.origin_position.norm() == 0.0 && spec.max_excursion() > 0.0 {
        return Err(Error::UnsupportedSpec(
            "moving trajectories need a nonzero origin to define the local frame".into(),
        ));
    }
    let local_to_ecef = if spec.origin_position.norm() > 0.0 {
        local_frame(&spec.origin_position)
    } else {
        Mat3::identity()
    };
    let mut stream = ReferenceStream {
        spec: *spec,
        earth: *earth,
        samples: Vec::new(),
        local_to_ecef,
        mount: *exp_so3(&spec.initial_attitude).matrix(),
    };
    let n = spec.steps();
    let samples = (0..=n)
        .map(|k| stream.evaluate(k as f64 * spec.step))
        .collect::<Result<Vec<_>>>()?;
    // stage times reach half a step past the last sample
    stream.evaluate(n as f64 * spec.step + 0.5 * spec.step)?;
    stream.samples = samples;
    Ok(stream)
}

/// Perturbs `truth0` so that its left or right error is exactly `exp(dx0)`.
pub fn inject_error(truth0: &ExtendedPose, dx0: &Tangent, side: Side) -> Result<ExtendedPose> {
    let angle = dx0.phi.norm();
    if !(angle <= PI - INJECTION_MARGIN) {
        return Err(Error::NearPiSingularity { angle });
    }
    let eta = exp_se23(dx0);
    Ok(match side {
        Side::Left => truth0.compose(&eta),
        Side::Right => eta.compose(truth0),
    })
}
