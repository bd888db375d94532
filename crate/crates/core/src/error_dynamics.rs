//! Left- and right-invariant navigation errors and their log-linear dynamics.
//!
//! With identical inputs driving truth and estimate, the left error
//! `η_l = χ⁻¹χ̂` obeys `η̇ = ηU - Uη + f(η)` and the right error
//! `η_r = χ̂χ⁻¹` obeys `η̇ = Wη - ηW + f(η)`. Both are conjugation flows, so
//! their exponential coordinates evolve by the linear models [`f_left`] and
//! [`f_right`] exactly, whatever the size of the error. The closed forms
//! [`closed_form_left`] and [`closed_form_right`] express that solution
//! through the adjoint of a decomposed state and the flow matrix.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::group::{
    flow_matrix, hat3, invariant_field, log_se23, ExtendedPose, Mat3, Mat5, Mat9, Tangent, Vec3,
};
use crate::ins::{body_input_matrix, earth_input_matrix, EarthModel, ImuSample};

/// Entrywise agreement required between factored and blockwise error rates.
const DUAL_FORM_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(Error::InvalidArgument(format!(
                "error side must be `left` or `right`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupError {
    pub eta: ExtendedPose,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorVector {
    pub dx: Tangent,
    pub side: Side,
}

impl ErrorVector {
    pub fn new(dx: Tangent, side: Side) -> Self {
        ErrorVector { dx, side }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDynamicsMatrix {
    pub f: Mat9,
    pub side: Side,
    pub t: f64,
}

/// `η_l = χ⁻¹ χ̂`
pub fn left_error(truth: &ExtendedPose, estimate: &ExtendedPose) -> GroupError {
    GroupError {
        eta: truth.inverse().compose(estimate),
        side: Side::Left,
    }
}

/// `η_r = χ̂ χ⁻¹`
pub fn right_error(truth: &ExtendedPose, estimate: &ExtendedPose) -> GroupError {
    GroupError {
        eta: estimate.compose(&truth.inverse()),
        side: Side::Right,
    }
}

pub fn group_error(side: Side, truth: &ExtendedPose, estimate: &ExtendedPose) -> GroupError {
    match side {
        Side::Left => left_error(truth, estimate),
        Side::Right => right_error(truth, estimate),
    }
}

fn check_dual(what: &'static str, a: &Mat5, b: &Mat5) -> Result<()> {
    let residual = (a - b).amax();
    if residual > DUAL_FORM_TOL * (1.0 + a.amax()) {
        return Err(Error::InternalMismatch { what, residual });
    }
    Ok(())
}

/// Left group-error rate `ηU - Uη + f(η)`, cross-checked against its
/// per-block expansion.
pub fn eta_dot_left(eta: &ExtendedPose, imu: &ImuSample) -> Result<Mat5> {
    let m = eta.to_matrix();
    let u = body_input_matrix(imu);
    let factored = m * u - u * m + invariant_field(&m);

    let dc = eta.c.matrix();
    let w = hat3(&imu.omega_ib_b);
    let mut blockwise = Mat5::zeros();
    blockwise
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(dc * w - w * dc));
    blockwise
        .fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&((dc - Mat3::identity()) * imu.f_b - w * eta.v));
    blockwise
        .fixed_view_mut::<3, 1>(0, 4)
        .copy_from(&(eta.v - w * eta.r));

    check_dual("left error rate", &factored, &blockwise)?;
    Ok(factored)
}

/// Right group-error rate `Wη - ηW + f(η)`, cross-checked against its
/// per-block expansion.
pub fn eta_dot_right(eta: &ExtendedPose, earth: &EarthModel, gravitation: &Vec3) -> Result<Mat5> {
    let m = eta.to_matrix();
    let w_in = earth_input_matrix(earth, gravitation);
    let factored = w_in * m - m * w_in + invariant_field(&m);

    let dc = eta.c.matrix();
    let w = hat3(&earth.omega_ie_e);
    let mut blockwise = Mat5::zeros();
    blockwise
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(dc * w - w * dc));
    blockwise
        .fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&((Mat3::identity() - dc) * gravitation - w * eta.v));
    blockwise
        .fixed_view_mut::<3, 1>(0, 4)
        .copy_from(&(eta.v - w * eta.r));

    check_dual("right error rate", &factored, &blockwise)?;
    Ok(factored)
}

fn error_matrix(rate: &Vec3, velocity_block: Mat3) -> Mat9 {
    let w = -hat3(rate);
    let mut f = Mat9::zeros();
    for k in 0..3 {
        f.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(&w);
    }
    f.fixed_view_mut::<3, 3>(3, 0).copy_from(&velocity_block);
    f.fixed_view_mut::<3, 3>(6, 3).copy_from(&Mat3::identity());
    f
}

/// Left-error model: `[[-ω×,0,0],[-f×,-ω×,0],[0,I,-ω×]]`.
pub fn f_left(imu: &ImuSample) -> ErrorDynamicsMatrix {
    ErrorDynamicsMatrix {
        f: error_matrix(&imu.omega_ib_b, -hat3(&imu.f_b)),
        side: Side::Left,
        t: imu.t,
    }
}

/// Right-error model: `[[-ω_ie×,0,0],[G×,-ω_ie×,0],[0,I,-ω_ie×]]`. Depends
/// only on the earth rate and the common gravitation, never on the state.
pub fn f_right(earth: &EarthModel, gravitation: &Vec3, t: f64) -> ErrorDynamicsMatrix {
    ErrorDynamicsMatrix {
        f: error_matrix(&earth.omega_ie_e, hat3(gravitation)),
        side: Side::Right,
        t,
    }
}

/// RK4 on `δẋ = F δx` over the grid `t_n = n h`.
///
/// `f_of_t(step_start, t)` returns `F` at RK4 stage time `t` of the step
/// starting at `step_start`; see [`crate::ins::InputSource`].
pub fn propagate_error_linear<M>(
    f_of_t: M,
    dx0: &ErrorVector,
    h: f64,
    steps: usize,
) -> Vec<ErrorVector>
where
    M: Fn(f64, f64) -> Mat9,
{
    let side = dx0.side;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*dx0);
    let mut x = dx0.dx.to_vector();
    for n in 0..steps {
        let t = n as f64 * h;
        x = crate::ins::rk4_step(&x, t, h, |s, v| f_of_t(t, s) * v);
        out.push(ErrorVector::new(Tangent::from_vector(&x), side));
    }
    out
}

fn require_side(dx: &ErrorVector, side: Side) -> Result<()> {
    if dx.side != side {
        return Err(Error::InvalidArgument(format!(
            "expected a {side} error vector, got {}",
            dx.side
        )));
    }
    Ok(())
}

/// `δx_l(t) = Ad(χ̃_b(t)⁻¹) F_t Ad(χ₀) δx_l(0)`.
///
/// `dx0_actual` is the logarithm of the actual left error at time zero;
/// conjugating by `chi0` moves it to the frame in which the flow acts.
/// `chi_b_tilde_t` is the true trajectory's `Φ_t(χ₀) χ_b` at time `t`.
pub fn closed_form_left(
    dx0_actual: &ErrorVector,
    chi0: &ExtendedPose,
    chi_b_tilde_t: &ExtendedPose,
    t: f64,
) -> Result<ErrorVector> {
    require_side(dx0_actual, Side::Left)?;
    let m = closed_form_left_matrix(chi0, chi_b_tilde_t, t);
    Ok(ErrorVector::new(
        Tangent::from_vector(&(m * dx0_actual.dx.to_vector())),
        Side::Left,
    ))
}

pub fn closed_form_left_matrix(chi0: &ExtendedPose, chi_b_tilde_t: &ExtendedPose, t: f64) -> Mat9 {
    chi_b_tilde_t.inverse().adjoint() * flow_matrix(t) * chi0.adjoint()
}

/// `δx_r(t) = Ad(χ_e(t)) F_t δx_r(0)`.
pub fn closed_form_right(dx0: &ErrorVector, chi_e_t: &ExtendedPose, t: f64) -> Result<ErrorVector> {
    require_side(dx0, Side::Right)?;
    let m = chi_e_t.adjoint() * flow_matrix(t);
    Ok(ErrorVector::new(
        Tangent::from_vector(&(m * dx0.dx.to_vector())),
        Side::Right,
    ))
}

/// Central-difference defect of `d/dt M = F(t) M` with
/// `M(τ) = Ad(state(τ)⁻¹) F_τ` (left) or `Ad(state(τ)) F_τ` (right),
/// normalized by `‖M(t)‖`. `state_at` is `χ̃_b` for the left side and `χ_e`
/// for the right side.
pub fn factorization_residual<P, M>(
    side: Side,
    t: f64,
    h: f64,
    state_at: P,
    matrix_at: M,
) -> Result<f64>
where
    P: Fn(f64) -> Result<ExtendedPose>,
    M: Fn(f64) -> Mat9,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("difference step must be positive, got {h}")));
    }
    let m_of = |tau: f64| -> Result<Mat9> {
        let x = state_at(tau)?;
        let ad = match side {
            Side::Left => x.inverse().adjoint(),
            Side::Right => x.adjoint(),
        };
        Ok(ad * flow_matrix(tau))
    };
    let m_plus = m_of(t + h)?;
    let m_minus = m_of(t - h)?;
    let m_mid = m_of(t)?;
    let derivative = (m_plus - m_minus) / (2.0 * h);
    Ok((derivative - matrix_at(t) * m_mid).norm() / m_mid.norm())
}

/// `exp(F dt)` by scaling and squaring over a degree-12 Taylor polynomial.
pub fn discretize(f: &ErrorDynamicsMatrix, dt: f64) -> Result<Mat9> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(expm(&(f.f * dt)))
}

/// Matrix exponential for small dense matrices.
pub fn expm(a: &Mat9) -> Mat9 {
    const ORDER: usize = 12;
    let norm = one_norm(a);
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm >= 0.5 {
        scaled_norm *= 0.5;
        squarings += 1;
    }
    let scaled = a / 2f64.powi(squarings as i32);
    // Horner: I + A(I + A/2(I + A/3(...)))
    let mut acc = Mat9::identity();
    for k in (1..=ORDER).rev() {
        acc = Mat9::identity() + scaled * acc / k as f64;
    }
    for _ in 0..squarings {
        acc = acc * acc;
    }
    acc
}

fn one_norm(a: &Mat9) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exponential coordinates of a group error.
pub fn error_vector_from_group(eta: &GroupError) -> Result<ErrorVector> {
    Ok(ErrorVector::new(log_se23(&eta.eta)?, eta.side))
}
