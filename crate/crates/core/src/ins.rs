//! ECEF strapdown kinematics written as a group-affine system on SE2(3).
//!
//! The navigation state `χ = (C_b^e, v_ib^e, r_ib^e)` evolves as
//! `χ̇ = χU + Wχ + f(χ)` where `U` carries the IMU readings, `W` the earth
//! rate and gravitation, and `f` is the invariant field of [`invariant_field`].

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::group::{
    hat3, invariant_field, orthonormality_residual, ExtendedPose, Mat5, Vec3, ROTATION_TOL,
};

/// WGS-84 earth rotation rate, rad/s.
pub const EARTH_RATE: f64 = 7.292115e-5;
/// WGS-84 gravitational parameter, m³/s².
pub const EARTH_MU: f64 = 3.986004418e14;
/// Smallest radius accepted by the central-body gravitation model.
pub const MIN_CENTRAL_RADIUS: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub omega_ib_b: Vec3,
    pub f_b: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, omega_ib_b: Vec3, f_b: Vec3) -> Self {
        ImuSample { t, omega_ib_b, f_b }
    }

    pub fn zero(t: f64) -> Self {
        Self::new(t, Vec3::zeros(), Vec3::zeros())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gravitation {
    ConstantVector(Vec3),
    /// Point-mass field `-mu r / |r|³`.
    CentralBody { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthModel {
    pub omega_ie_e: Vec3,
    pub gravitation: Gravitation,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            omega_ie_e: Vec3::new(0.0, 0.0, EARTH_RATE),
            gravitation: Gravitation::CentralBody { mu: EARTH_MU },
        }
    }
}

impl EarthModel {
    /// No rotation, no gravitation.
    pub fn inert() -> Self {
        EarthModel {
            omega_ie_e: Vec3::zeros(),
            gravitation: Gravitation::ConstantVector(Vec3::zeros()),
        }
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.omega_ie_e.iter().all(|x| x.is_finite()) && self.omega_ie_e.norm() < 1e-3) {
            errs.push(format!(
                "earth rate magnitude {} must be finite and below 1e-3 rad/s",
                self.omega_ie_e.norm()
            ));
        }
        match self.gravitation {
            Gravitation::CentralBody { mu } if !(mu > 0.0 && mu.is_finite()) => {
                errs.push(format!("central-body mu must be positive, got {mu}"))
            }
            Gravitation::ConstantVector(g) if !g.iter().all(|x| x.is_finite()) => {
                errs.push("gravitation vector must be finite".into())
            }
            _ => {}
        }
        errs
    }
}

/// Gravitational (not gravity) vector at ECEF position `r`.
pub fn gravitation_at(model: &EarthModel, r: &Vec3) -> Result<Vec3> {
    match model.gravitation {
        Gravitation::ConstantVector(g) => Ok(g),
        Gravitation::CentralBody { mu } => {
            let radius = r.norm();
            if !(radius > MIN_CENTRAL_RADIUS) {
                return Err(Error::DegeneratePosition { radius });
            }
            Ok(-r * (mu / (radius * radius * radius)))
        }
    }
}

/// `g = G - (ω_ie×)² r`
pub fn gravity_from_gravitation(earth: &EarthModel, gravitation: &Vec3, r: &Vec3) -> Vec3 {
    let w = hat3(&earth.omega_ie_e);
    gravitation - w * (w * r)
}

/// `G = g + (ω_ie×)² r`
pub fn gravitation_from_gravity(earth: &EarthModel, gravity: &Vec3, r: &Vec3) -> Vec3 {
    let w = hat3(&earth.omega_ie_e);
    gravity + w * (w * r)
}

/// Ground velocity `v_eb = v_ib - ω_ie × r`.
pub fn ground_velocity(state: &TrueState, earth: &EarthModel) -> Vec3 {
    state.chi.v - earth.omega_ie_e.cross(&state.chi.r)
}

/// Inertial velocity `v_ib = v_eb + ω_ie × r`.
pub fn inertial_velocity(v_eb: &Vec3, r: &Vec3, earth: &EarthModel) -> Vec3 {
    v_eb + earth.omega_ie_e.cross(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub chi: ExtendedPose,
    pub t: f64,
}

/// The factors `U` and `W` of `χ̇ = χU + Wχ + f(χ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineInputs {
    pub u: Mat5,
    pub w: Mat5,
}

impl AffineInputs {
    pub fn new(imu: &ImuSample, earth: &EarthModel, gravitation: &Vec3) -> Self {
        AffineInputs {
            u: body_input_matrix(imu),
            w: earth_input_matrix(earth, gravitation),
        }
    }

    /// `f_u(M) = MU + WM + f(M)`, valid for any 5x5 matrix.
    pub fn apply(&self, m: &Mat5) -> Mat5 {
        m * self.u + self.w * m + invariant_field(m)
    }
}

pub fn body_input_matrix(imu: &ImuSample) -> Mat5 {
    let mut u = Mat5::zeros();
    u.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&imu.omega_ib_b));
    u.fixed_view_mut::<3, 1>(0, 3).copy_from(&imu.f_b);
    u
}

pub fn earth_input_matrix(earth: &EarthModel, gravitation: &Vec3) -> Mat5 {
    let mut w = Mat5::zeros();
    w.fixed_view_mut::<3, 3>(0, 0).copy_from(&-hat3(&earth.omega_ie_e));
    w.fixed_view_mut::<3, 1>(0, 3).copy_from(gravitation);
    w
}

/// `χ̇` in factored form.
pub fn chi_dot(chi: &ExtendedPose, imu: &ImuSample, earth: &EarthModel, gravitation: &Vec3) -> Mat5 {
    AffineInputs::new(imu, earth, gravitation).apply(&chi.to_matrix())
}

/// `χ̇` assembled block by block from the attitude, velocity and position equations.
pub fn chi_dot_blockwise(
    chi: &ExtendedPose,
    imu: &ImuSample,
    earth: &EarthModel,
    gravitation: &Vec3,
) -> Mat5 {
    let c = chi.c.matrix();
    let wie = hat3(&earth.omega_ie_e);
    let mut m = Mat5::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(c * hat3(&imu.omega_ib_b) - wie * c));
    m.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(c * imu.f_b - wie * chi.v + gravitation));
    m.fixed_view_mut::<3, 1>(0, 4)
        .copy_from(&(chi.v - wie * chi.r));
    m
}

/// Normalized defect of `f_u(χ₁χ₂) = f_u(χ₁)χ₂ + χ₁f_u(χ₂) - χ₁f_u(I)χ₂`.
pub fn group_affine_residual(
    chi1: &ExtendedPose,
    chi2: &ExtendedPose,
    imu: &ImuSample,
    earth: &EarthModel,
    gravitation: &Vec3,
) -> f64 {
    let inputs = AffineInputs::new(imu, earth, gravitation);
    let a = chi1.to_matrix();
    let b = chi2.to_matrix();
    let lhs = inputs.apply(&(a * b));
    let rhs = inputs.apply(&a) * b + a * inputs.apply(&b) - a * inputs.apply(&Mat5::identity()) * b;
    (lhs - rhs).norm() / (1.0 + lhs.norm())
}

/// Normalized defect of `f(χ₁χ₂) = f(χ₁)χ₂ + χ₁f(χ₂)`.
pub fn invariant_field_residual(chi1: &ExtendedPose, chi2: &ExtendedPose) -> f64 {
    let a = chi1.to_matrix();
    let b = chi2.to_matrix();
    let lhs = invariant_field(&(a * b));
    let rhs = invariant_field(&a) * b + a * invariant_field(&b);
    (lhs - rhs).norm() / (1.0 + lhs.norm())
}

/// Inputs seen by the integrator at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputSample {
    pub imu: ImuSample,
    pub gravitation: Vec3,
}

/// Supplies IMU readings and the common gravitation vector to integrators.
///
/// `sample(step_start, t)` is queried at every RK4 stage time `t` of the step
/// beginning at `step_start`. Continuous sources evaluate at `t`; sampled
/// sources hold the value at `step_start`.
pub trait InputSource {
    fn sample(&self, step_start: f64, t: f64) -> InputSample;
}

impl<F> InputSource for F
where
    F: Fn(f64) -> InputSample,
{
    fn sample(&self, _step_start: f64, t: f64) -> InputSample {
        self(t)
    }
}

/// A uniformly sampled input stream held constant across each step.
#[derive(Debug, Clone)]
pub struct HeldInputs {
    samples: Vec<InputSample>,
    step: f64,
}

impl HeldInputs {
    pub fn new(samples: Vec<InputSample>, step: f64) -> Result<Self> {
        if samples.is_empty() || !(step > 0.0) {
            return Err(Error::InvalidArgument(
                "held input stream needs samples and a positive step".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1].imu.t < w[0].imu.t) {
            return Err(Error::InvalidArgument("sample times must be non-decreasing".into()));
        }
        Ok(HeldInputs { samples, step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl InputSource for HeldInputs {
    fn sample(&self, step_start: f64, _t: f64) -> InputSample {
        let idx = (step_start / self.step).round().max(0.0) as usize;
        self.samples[idx.min(self.samples.len() - 1)]
    }
}

/// One classical RK4 step for `ẋ = deriv(t, x)`.
pub fn rk4_step<const R: usize, const C: usize>(
    x: &SMatrix<f64, R, C>,
    t: f64,
    h: f64,
    mut deriv: impl FnMut(f64, &SMatrix<f64, R, C>) -> SMatrix<f64, R, C>,
) -> SMatrix<f64, R, C> {
    let half = 0.5 * h;
    let k1 = deriv(t, x);
    let k2 = deriv(t + half, &(x + k1 * half));
    let k3 = deriv(t + half, &(x + k2 * half));
    let k4 = deriv(t + h, &(x + k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Integrates a pose ODE on the uniform grid `t_n = n h`, monitoring the
/// attitude block's orthonormality after every step. No re-projection.
pub fn integrate_pose<S, D>(
    x0: &ExtendedPose,
    source: &S,
    h: f64,
    steps: usize,
    deriv: D,
) -> Result<Vec<ExtendedPose>>
where
    S: InputSource + ?Sized,
    D: Fn(&Mat5, &InputSample) -> Mat5,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*x0);
    let mut x = x0.to_matrix();
    for n in 0..steps {
        let t = n as f64 * h;
        x = rk4_step(&x, t, h, |s, m| deriv(m, &source.sample(t, s)));
        let pose = ExtendedPose::from_matrix_unchecked(&x);
        let drift = orthonormality_residual(pose.c.matrix());
        if !(drift <= ROTATION_TOL) {
            return Err(Error::DriftExceeded { t: t + h, drift });
        }
        out.push(pose);
    }
    Ok(out)
}

/// Integrates the full navigation equation from `chi0`.
pub fn propagate_chi<S: InputSource + ?Sized>(
    chi0: &ExtendedPose,
    source: &S,
    earth: &EarthModel,
    h: f64,
    steps: usize,
) -> Result<Vec<TrueState>> {
    let poses = integrate_pose(chi0, source, h, steps, |m, s| {
        AffineInputs::new(&s.imu, earth, &s.gravitation).apply(m)
    })?;
    Ok(poses
        .into_iter()
        .enumerate()
        .map(|(n, chi)| TrueState { chi, t: n as f64 * h })
        .collect())
}

fn body_increment_rate(m: &Mat5, s: &InputSample) -> Mat5 {
    m * body_input_matrix(&s.imu) + invariant_field(m)
}

/// Local (body) increment `χ_b`, starting from the identity.
pub fn propagate_chi_b<S: InputSource + ?Sized>(
    source: &S,
    h: f64,
    steps: usize,
) -> Result<Vec<ExtendedPose>> {
    integrate_pose(&ExtendedPose::identity(), source, h, steps, body_increment_rate)
}

/// Global (earth) increment `χ_e`, starting from the identity.
pub fn propagate_chi_e<S: InputSource + ?Sized>(
    earth: &EarthModel,
    source: &S,
    h: f64,
    steps: usize,
) -> Result<Vec<ExtendedPose>> {
    integrate_pose(&ExtendedPose::identity(), source, h, steps, |m, s| {
        earth_input_matrix(earth, &s.gravitation) * m + invariant_field(m)
    })
}

/// `χ̃_b = Φ_t(χ₀) χ_b`, integrated with the body-increment field from `chi0`.
pub fn propagate_chi_b_tilde<S: InputSource + ?Sized>(
    chi0: &ExtendedPose,
    source: &S,
    h: f64,
    steps: usize,
) -> Result<Vec<ExtendedPose>> {
    integrate_pose(chi0, source, h, steps, body_increment_rate)
}

/// The factors of `χ = χ_e Φ_t(χ₀) χ_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposedState {
    pub chi_e: ExtendedPose,
    pub chi_0: ExtendedPose,
    pub chi_b: ExtendedPose,
    pub t: f64,
}

pub fn recompose(d: &DecomposedState) -> ExtendedPose {
    d.chi_e.compose(&d.chi_0.flow(d.t).compose(&d.chi_b))
}

/// Same as [`recompose`], written out per component.
pub fn recompose_components(d: &DecomposedState) -> ExtendedPose {
    let ce = d.chi_e.c.matrix();
    let c0 = d.chi_0.c.matrix();
    let c = *ce * c0 * d.chi_b.c.matrix();
    let v = d.chi_e.v + ce * (c0 * d.chi_b.v + d.chi_0.v);
    let r = d.chi_e.r + ce * (c0 * d.chi_b.r + d.chi_0.r + d.chi_0.v * d.t);
    ExtendedPose::new(crate::group::Rotation::new_unchecked(c), v, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{exp_se23, exp_so3, pose_distance, Tangent};
    use nalgebra::Matrix1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn rand_pose(rng: &mut impl Rng) -> ExtendedPose {
        exp_se23(&Tangent::new(
            rand_vec(rng, 1.5),
            rand_vec(rng, 10.0),
            rand_vec(rng, 100.0),
        ))
    }

    #[test]
    fn gravitation_examples() {
        let constant = EarthModel {
            omega_ie_e: Vec3::zeros(),
            gravitation: Gravitation::ConstantVector(Vec3::new(0.0, 0.0, -9.81)),
        };
        let g = gravitation_at(&constant, &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(g, Vec3::new(0.0, 0.0, -9.81));

        let earth = EarthModel::default();
        let r = Vec3::new(6.378137e6, 0.0, 0.0);
        let g = gravitation_at(&earth, &r).unwrap();
        let expected = 3.986004418e14 / (6.378137e6f64 * 6.378137e6);
        assert!((g.x + expected).abs() <= 1e-12 * expected);
        assert!((g.x - -9.798285).abs() < 1e-6);
        assert_eq!((g.y, g.z), (0.0, 0.0));

        let gravity = gravity_from_gravitation(&earth, &g, &r);
        let centrifugal = (gravity - g).norm();
        let oracle = EARTH_RATE * EARTH_RATE * 6.378137e6;
        assert!((centrifugal - oracle).abs() <= 1e-15);
        assert!((centrifugal - 3.392e-2).abs() < 1e-5);
        // centrifugal term points outward
        assert!(gravity.x > g.x);
        let back = gravitation_from_gravity(&earth, &gravity, &r);
        assert!((back - g).amax() <= 1e-12);

        assert!(matches!(
            gravitation_at(&earth, &Vec3::new(10.0, 0.0, 0.0)),
            Err(Error::DegeneratePosition { .. })
        ));
    }

    #[test]
    fn ground_velocity_examples() {
        let earth = EarthModel::default();
        let v = Vec3::new(1.0, 2.0, 3.0);
        let at_center = TrueState {
            chi: ExtendedPose::new(exp_so3(&Vec3::zeros()), v, Vec3::zeros()),
            t: 0.0,
        };
        assert_eq!(ground_velocity(&at_center, &earth), v);

        let r = Vec3::new(4.0e6, 3.0e6, 2.0e6);
        let fixed = TrueState {
            chi: ExtendedPose::new(exp_so3(&Vec3::zeros()), earth.omega_ie_e.cross(&r), r),
            t: 0.0,
        };
        assert_eq!(ground_velocity(&fixed, &earth), Vec3::zeros());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chi = rand_pose(&mut rng);
        let st = TrueState { chi, t: 0.0 };
        let veb = ground_velocity(&st, &earth);
        assert!((inertial_velocity(&veb, &chi.r, &earth) - chi.v).amax() <= 1e-12);
    }

    #[test]
    fn chi_dot_examples() {
        let earth = EarthModel::inert();
        let zero = chi_dot(&ExtendedPose::identity(), &ImuSample::zero(0.0), &earth, &Vec3::zeros());
        assert_eq!(zero, Mat5::zeros());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let earth = EarthModel::default();
        for _ in 0..50 {
            let chi = rand_pose(&mut rng);
            let imu = ImuSample::new(0.0, rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 20.0));
            let g = rand_vec(&mut rng, 10.0);
            let a = chi_dot(&chi, &imu, &earth, &g);
            let b = chi_dot_blockwise(&chi, &imu, &earth, &g);
            assert!((a - b).amax() <= 1e-13 * (1.0 + a.amax()));
        }
    }

    #[test]
    fn static_ground_equilibrium() {
        let earth = EarthModel::default();
        let r = Vec3::new(3.2e6, 4.1e6, 3.3e6);
        let c = exp_so3(&Vec3::new(0.4, -1.2, 2.0));
        let chi = ExtendedPose::new(c, earth.omega_ie_e.cross(&r), r);
        let g_vec = gravitation_at(&earth, &r).unwrap();
        let gravity = gravity_from_gravitation(&earth, &g_vec, &r);
        let ct = c.matrix().transpose();
        let imu = ImuSample::new(0.0, ct * earth.omega_ie_e, ct * (-gravity));
        let d = chi_dot(&chi, &imu, &earth, &g_vec);
        let pos: Vec3 = d.fixed_view::<3, 1>(0, 4).into_owned();
        assert!(pos.amax() <= 1e-9);
        // attitude is balanced too
        assert!(d.fixed_view::<3, 3>(0, 0).amax() <= 1e-18);
    }

    #[test]
    fn group_affine_examples() {
        let earth = EarthModel::default();
        let imu = ImuSample::new(0.0, Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, -2.0, 9.0));
        let g = Vec3::new(0.0, 0.0, -9.8);
        let id = ExtendedPose::identity();
        assert_eq!(group_affine_residual(&id, &id, &imu, &earth, &g), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a = rand_pose(&mut rng);
            let b = rand_pose(&mut rng);
            let imu = ImuSample::new(0.0, rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 30.0));
            let earth = EarthModel {
                omega_ie_e: rand_vec(&mut rng, 5e-4),
                gravitation: Gravitation::ConstantVector(Vec3::zeros()),
            };
            let g = rand_vec(&mut rng, 10.0);
            assert!(group_affine_residual(&a, &b, &imu, &earth, &g) <= 1e-12);
            assert!(invariant_field_residual(&a, &b) <= 1e-13);
        }
    }

    #[test]
    fn rk4_constant_and_exponential() {
        let x = Mat5::identity() * 3.0;
        assert_eq!(rk4_step(&x, 0.0, 0.1, |_, _| Mat5::zeros()), x);

        let mut y = Matrix1::new(1.0);
        for n in 0..10 {
            y = rk4_step(&y, n as f64 * 0.1, 0.1, |_, v| *v);
        }
        // RK4 on ẋ = x multiplies by the degree-4 Taylor polynomial of e^h each step
        let amp: f64 = 1.0 + 0.1 + 0.01 / 2.0 + 0.001 / 6.0 + 0.0001 / 24.0;
        assert!((y[0] - amp.powi(10)).abs() <= 1e-14);
        let err = std::f64::consts::E - y[0];
        assert!(err > 0.0 && err <= 2.1e-6, "{err}");
    }

    fn wobbly(t: f64) -> InputSample {
        InputSample {
            imu: ImuSample::new(
                t,
                Vec3::new(0.8 * (1.3 * t).sin(), 0.5 * (0.7 * t).cos(), 0.3 + 0.2 * (2.1 * t).sin()),
                Vec3::new(2.0 * (0.9 * t).cos(), 1.0, -9.8 + (1.7 * t).sin()),
            ),
            gravitation: Vec3::new(3.0 * (2.0 * t).sin(), 2.0 * (3.0 * t).cos(), -9.8),
        }
    }

    fn final_error(h: f64, reference: &ExtendedPose, which: u8) -> f64 {
        let steps = (4.0 / h).round() as usize;
        let earth = EarthModel {
            omega_ie_e: Vec3::new(0.0, 0.0, 2e-4),
            ..EarthModel::inert()
        };
        let x0 = ExtendedPose::new(exp_so3(&Vec3::new(0.3, 0.1, -0.2)), Vec3::new(1.0, 2.0, 0.0), Vec3::zeros());
        let last = match which {
            0 => propagate_chi(&x0, &wobbly, &earth, h, steps).unwrap().last().unwrap().chi,
            1 => *propagate_chi_b(&wobbly, h, steps).unwrap().last().unwrap(),
            _ => *propagate_chi_e(&earth, &wobbly, h, steps).unwrap().last().unwrap(),
        };
        pose_distance(&last, reference)
    }

    #[test]
    fn fourth_order_convergence() {
        for which in 0..3u8 {
            let steps_ref = 4.0 / 0.00125;
            let reference = {
                let earth = EarthModel {
                    omega_ie_e: Vec3::new(0.0, 0.0, 2e-4),
                    ..EarthModel::inert()
                };
                let x0 = ExtendedPose::new(exp_so3(&Vec3::new(0.3, 0.1, -0.2)), Vec3::new(1.0, 2.0, 0.0), Vec3::zeros());
                let n = steps_ref as usize;
                match which {
                    0 => propagate_chi(&x0, &wobbly, &earth, 0.00125, n).unwrap().last().unwrap().chi,
                    1 => *propagate_chi_b(&wobbly, 0.00125, n).unwrap().last().unwrap(),
                    _ => *propagate_chi_e(&earth, &wobbly, 0.00125, n).unwrap().last().unwrap(),
                }
            };
            let e1 = final_error(0.02, &reference, which);
            let e2 = final_error(0.01, &reference, which);
            let ratio = e1 / e2;
            assert!((13.0..=19.0).contains(&ratio), "case {which}: ratio {ratio}");
        }
    }

    #[test]
    fn zero_inputs_keep_state() {
        let x0 = ExtendedPose::new(exp_so3(&Vec3::new(0.1, 0.2, 0.3)), Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0));
        let zero = |t: f64| InputSample { imu: ImuSample::zero(t), gravitation: Vec3::zeros() };
        let traj = propagate_chi(&x0, &zero, &EarthModel::inert(), 0.01, 100).unwrap();
        assert!(traj.iter().all(|s| s.chi == x0));
        let b = propagate_chi_b(&zero, 0.01, 100).unwrap();
        assert!(b.iter().all(|x| *x == ExtendedPose::identity()));
        let e = propagate_chi_e(&EarthModel::inert(), &zero, 0.01, 100).unwrap();
        assert!(e.iter().all(|x| *x == ExtendedPose::identity()));
    }

    #[test]
    fn body_increment_under_constant_specific_force() {
        let src = |t: f64| InputSample {
            imu: ImuSample::new(t, Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)),
            gravitation: Vec3::zeros(),
        };
        let h = 0.01;
        let b = propagate_chi_b(&src, h, 500).unwrap();
        for (n, x) in b.iter().enumerate().step_by(50) {
            let t = n as f64 * h;
            assert!((x.v - Vec3::new(t, 0.0, 0.0)).amax() <= 1e-12);
            assert!((x.r - Vec3::new(0.5 * t * t, 0.0, 0.0)).amax() <= 1e-11);
        }
    }

    #[test]
    fn earth_increment_rotates_at_earth_rate() {
        let earth = EarthModel {
            omega_ie_e: Vec3::new(0.0, 0.0, EARTH_RATE),
            gravitation: Gravitation::ConstantVector(Vec3::zeros()),
        };
        let src = |t: f64| InputSample { imu: ImuSample::zero(t), gravitation: Vec3::zeros() };
        let h = 1.0;
        let e = propagate_chi_e(&earth, &src, h, 3600).unwrap();
        for (n, x) in e.iter().enumerate().step_by(600) {
            let oracle = exp_so3(&(-earth.omega_ie_e * (n as f64 * h)));
            assert!((x.c.matrix() - oracle.matrix()).amax() <= 1e-13);
        }
    }

    #[test]
    fn earth_fixed_attitude_balance() {
        let earth = EarthModel::default();
        let c0 = exp_so3(&Vec3::new(0.5, -0.3, 1.0));
        let r = Vec3::new(6.378137e6, 0.0, 0.0);
        let chi0 = ExtendedPose::new(c0, earth.omega_ie_e.cross(&r), r);
        let g = gravitation_at(&earth, &r).unwrap();
        let gravity = gravity_from_gravitation(&earth, &g, &r);
        let ct = c0.matrix().transpose();
        let imu = ImuSample::new(0.0, ct * earth.omega_ie_e, ct * (-gravity));
        let src = move |t: f64| InputSample { imu: ImuSample { t, ..imu }, gravitation: g };
        let traj = propagate_chi(&chi0, &src, &earth, 0.1, 3000).unwrap();
        let last = traj.last().unwrap().chi;
        assert!((last.c.matrix() - c0.matrix()).amax() <= 1e-13);
        assert!((last.r - r).amax() <= 1e-6);
    }

    #[test]
    fn free_fall() {
        let g = Vec3::new(0.0, 0.0, -9.81);
        let earth = EarthModel {
            omega_ie_e: Vec3::zeros(),
            gravitation: Gravitation::ConstantVector(g),
        };
        let v0 = Vec3::new(3.0, -1.0, 20.0);
        let chi0 = ExtendedPose::new(exp_so3(&Vec3::new(0.2, 0.0, 0.0)), v0, Vec3::zeros());
        let src = move |t: f64| InputSample {
            imu: ImuSample::new(t, Vec3::new(0.0, 0.3, 0.0), Vec3::zeros()),
            gravitation: g,
        };
        let h = 0.01;
        let traj = propagate_chi(&chi0, &src, &earth, h, 1000).unwrap();
        for s in traj.iter().step_by(100) {
            assert!((s.chi.v - (v0 + g * s.t)).amax() <= 1e-11);
            assert!((s.chi.r - (v0 * s.t + g * (0.5 * s.t * s.t))).amax() <= 1e-10);
        }
    }

    #[test]
    fn chi_b_tilde_consistency() {
        let h = 0.01;
        let steps = 10_000;
        let b = propagate_chi_b(&wobbly, h, steps).unwrap();
        let same = propagate_chi_b_tilde(&ExtendedPose::identity(), &wobbly, h, steps).unwrap();
        assert!(b.iter().zip(&same).all(|(x, y)| pose_distance(x, y) <= 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let chi0 = rand_pose(&mut rng);
        let tilde = propagate_chi_b_tilde(&chi0, &wobbly, h, steps).unwrap();
        assert_eq!(tilde[0], chi0);
        for (n, (bt, bb)) in tilde.iter().zip(&b).enumerate() {
            let t = n as f64 * h;
            let composed = chi0.flow(t).compose(bb);
            let scale = 1.0 + composed.to_matrix().amax();
            assert!(pose_distance(bt, &composed) <= 1e-8 * scale, "t={t}");
        }
    }

    #[test]
    fn recompose_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let id = ExtendedPose::identity();
        let d = DecomposedState { chi_e: id, chi_0: id, chi_b: id, t: 17.0 };
        assert_eq!(recompose(&d), id);
        for _ in 0..100 {
            let d = DecomposedState {
                chi_e: rand_pose(&mut rng),
                chi_0: rand_pose(&mut rng),
                chi_b: rand_pose(&mut rng),
                t: rng.gen_range(0.0..300.0),
            };
            let a = recompose(&d);
            let b = recompose_components(&d);
            assert!(pose_distance(&a, &b) <= 1e-13 * (1.0 + a.to_matrix().amax()));
        }
    }

    #[test]
    fn held_inputs_hold_over_step() {
        let samples: Vec<_> = (0..4)
            .map(|n| InputSample {
                imu: ImuSample::new(n as f64 * 0.5, Vec3::new(n as f64, 0.0, 0.0), Vec3::zeros()),
                gravitation: Vec3::zeros(),
            })
            .collect();
        let held = HeldInputs::new(samples, 0.5).unwrap();
        assert_eq!(held.sample(0.5, 1.0).imu.omega_ib_b.x, 1.0);
        assert_eq!(held.sample(0.5, 0.75).imu.omega_ib_b.x, 1.0);
        assert_eq!(held.sample(1.0, 1.0).imu.omega_ib_b.x, 2.0);
        assert_eq!(held.sample(9.0, 9.0).imu.omega_ib_b.x, 3.0);
        assert!(HeldInputs::new(Vec::new(), 0.5).is_err());
    }

    #[test]
    fn drift_monitor_trips_on_coarse_steps() {
        let spin = |t: f64| InputSample {
            imu: ImuSample::new(t, Vec3::new(0.0, 0.0, 20.0), Vec3::zeros()),
            gravitation: Vec3::zeros(),
        };
        let res = propagate_chi_b(&spin, 0.05, 100);
        assert!(matches!(res, Err(Error::DriftExceeded { .. })));
    }
}
