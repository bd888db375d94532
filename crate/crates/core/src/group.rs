//! Closed-form SO(3) and SE2(3) algebra.
//!
//! An [`ExtendedPose`] packs an attitude matrix, a velocity and a position
//! into the 5x5 matrix
//!
//! ```text
//! | C  v  r |
//! | 0  1  0 |
//! | 0  0  1 |
//! ```
//!
//! The `(C, v, r)` record is the only stored representation; [`ExtendedPose::to_matrix`]
//! is a view. Tangent vectors are ordered `(attitude, velocity, position)`.

use nalgebra::{Matrix3, Matrix5, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat5 = Matrix5<f64>;
pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// Below this angle exp/log/Jacobians switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Logarithms refuse angles closer than this to pi.
pub const PI_MARGIN: f64 = 1e-6;
/// Orthonormality and determinant tolerance for admitting a rotation.
pub const ROTATION_TOL: f64 = 1e-9;
/// Symmetric-part tolerance accepted by [`vee3`].
pub const SKEW_TOL: f64 = 1e-9;

/// Cross-product matrix: `hat3(w) * u == w.cross(&u)`.
pub fn hat3(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat3`]. Tolerates a symmetric part up to [`SKEW_TOL`]
/// relative to the matrix scale.
pub fn vee3(m: &Mat3) -> Result<Vec3> {
    let residual = (m + m.transpose()).amax();
    if residual > SKEW_TOL * m.amax().max(1.0) {
        return Err(Error::NonSkew { residual });
    }
    Ok(Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    ))
}

/// Vee of the skew part, no validation.
fn vee_skew_part(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Frobenius norm of `mᵀm - I`.
pub fn orthonormality_residual(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// A direction-cosine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Admits `m` if it is orthonormal with unit determinant to [`ROTATION_TOL`].
    pub fn new(m: Mat3) -> Result<Self> {
        let ortho = orthonormality_residual(&m);
        let det = m.determinant();
        if !(ortho <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::NotARotation { ortho, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking. Callers are responsible for the invariant.
    pub fn new_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let s = vee_skew_part(&self.0).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// SO(3) exponential (Rodrigues).
pub fn exp_so3(phi: &Vec3) -> Rotation {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat3(phi);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// SO(3) logarithm on the principal branch.
pub fn log_so3(c: &Rotation) -> Result<Vec3> {
    let m = c.matrix();
    let axis = vee_skew_part(m);
    let s = axis.norm();
    let cos = 0.5 * (m.trace() - 1.0);
    let theta = s.atan2(cos);
    if theta > std::f64::consts::PI - PI_MARGIN {
        return Err(Error::NearPiSingularity { angle: theta });
    }
    let scale = if theta < SMALL_ANGLE {
        1.0 + theta * theta / 6.0
    } else {
        theta / s
    };
    Ok(axis * scale)
}

/// SO(3) left Jacobian.
pub fn left_jacobian_so3(phi: &Vec3) -> Mat3 {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    let k = hat3(phi);
    let (a, b) = if theta < SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Mat3::identity() + k * a + k * k * b
}

/// Closed-form inverse of [`left_jacobian_so3`], valid up to `pi - PI_MARGIN`.
pub fn inv_left_jacobian_so3(phi: &Vec3) -> Result<Mat3> {
    let theta2 = phi.norm_squared();
    let theta = theta2.sqrt();
    if theta > std::f64::consts::PI - PI_MARGIN {
        return Err(Error::NearPiSingularity { angle: theta });
    }
    let k = hat3(phi);
    let b = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Ok(Mat3::identity() - k * 0.5 + k * k * b)
}

/// Exponential coordinates of an extended pose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tangent {
    pub phi: Vec3,
    pub nu: Vec3,
    pub rho: Vec3,
}

impl Tangent {
    pub fn new(phi: Vec3, nu: Vec3, rho: Vec3) -> Self {
        Tangent { phi, nu, rho }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vec9 {
        let mut x = Vec9::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.phi);
        x.fixed_rows_mut::<3>(3).copy_from(&self.nu);
        x.fixed_rows_mut::<3>(6).copy_from(&self.rho);
        x
    }

    pub fn from_vector(x: &Vec9) -> Self {
        Tangent {
            phi: x.fixed_rows::<3>(0).into_owned(),
            nu: x.fixed_rows::<3>(3).into_owned(),
            rho: x.fixed_rows::<3>(6).into_owned(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// Lie-algebra matrix `ξ^∧`.
    pub fn hat(&self) -> Mat5 {
        let mut m = Mat5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.phi));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.nu);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.rho);
        m
    }

    /// Inverse of [`Tangent::hat`]; rejects matrices outside the algebra.
    pub fn vee(m: &Mat5) -> Result<Self> {
        let bottom = m.fixed_view::<2, 5>(3, 0).amax();
        if bottom > SKEW_TOL * m.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "bottom rows of algebra element are nonzero ({bottom:e})"
            )));
        }
        let block: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        Ok(Tangent {
            phi: vee3(&block)?,
            nu: m.fixed_view::<3, 1>(0, 3).into_owned(),
            rho: m.fixed_view::<3, 1>(0, 4).into_owned(),
        })
    }
}

impl std::ops::Add for Tangent {
    type Output = Tangent;
    fn add(self, o: Tangent) -> Tangent {
        Tangent::new(self.phi + o.phi, self.nu + o.nu, self.rho + o.rho)
    }
}

impl std::ops::Sub for Tangent {
    type Output = Tangent;
    fn sub(self, o: Tangent) -> Tangent {
        Tangent::new(self.phi - o.phi, self.nu - o.nu, self.rho - o.rho)
    }
}

impl std::ops::Mul<f64> for Tangent {
    type Output = Tangent;
    fn mul(self, s: f64) -> Tangent {
        Tangent::new(self.phi * s, self.nu * s, self.rho * s)
    }
}

/// An element of SE2(3): attitude, velocity and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedPose {
    pub c: Rotation,
    pub v: Vec3,
    pub r: Vec3,
}

impl ExtendedPose {
    pub fn new(c: Rotation, v: Vec3, r: Vec3) -> Self {
        ExtendedPose { c, v, r }
    }

    pub fn identity() -> Self {
        ExtendedPose::new(Rotation::identity(), Vec3::zeros(), Vec3::zeros())
    }

    pub fn to_matrix(&self) -> Mat5 {
        let mut m = Mat5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.c.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.r);
        m
    }

    /// Reads `(C, v, r)` out of a 5x5 matrix, checking the attitude block.
    pub fn from_matrix(m: &Mat5) -> Result<Self> {
        let c = Rotation::new(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self::from_matrix_with(c, m))
    }

    /// Like [`ExtendedPose::from_matrix`] without the rotation check. Used by
    /// integrators that monitor drift themselves.
    pub fn from_matrix_unchecked(m: &Mat5) -> Self {
        let c = Rotation::new_unchecked(m.fixed_view::<3, 3>(0, 0).into_owned());
        Self::from_matrix_with(c, m)
    }

    fn from_matrix_with(c: Rotation, m: &Mat5) -> Self {
        ExtendedPose {
            c,
            v: m.fixed_view::<3, 1>(0, 3).into_owned(),
            r: m.fixed_view::<3, 1>(0, 4).into_owned(),
        }
    }

    pub fn compose(&self, b: &ExtendedPose) -> ExtendedPose {
        let ca = self.c.matrix();
        ExtendedPose {
            c: self.c * b.c,
            v: ca * b.v + self.v,
            r: ca * b.r + self.r,
        }
    }

    pub fn inverse(&self) -> ExtendedPose {
        let ct = self.c.transpose();
        ExtendedPose {
            c: ct,
            v: -(ct * self.v),
            r: -(ct * self.r),
        }
    }

    /// `Ad_x`, satisfying `x ξ^∧ x⁻¹ = (Ad_x ξ)^∧`.
    pub fn adjoint(&self) -> Mat9 {
        let c = self.c.matrix();
        let mut ad = Mat9::zeros();
        for k in 0..3 {
            ad.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(c);
        }
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat3(&self.v) * c));
        ad.fixed_view_mut::<3, 3>(6, 0).copy_from(&(hat3(&self.r) * c));
        ad
    }

    /// The flow automorphism `Φ_t`: position advances by `t * v`.
    pub fn flow(&self, t: f64) -> ExtendedPose {
        ExtendedPose {
            c: self.c,
            v: self.v,
            r: self.r + self.v * t,
        }
    }

    /// Attitude angle of the rotation block.
    pub fn attitude_angle(&self) -> f64 {
        self.c.angle()
    }
}

pub fn compose(a: &ExtendedPose, b: &ExtendedPose) -> ExtendedPose {
    a.compose(b)
}

pub fn inverse(x: &ExtendedPose) -> ExtendedPose {
    x.inverse()
}

pub fn adjoint(x: &ExtendedPose) -> Mat9 {
    x.adjoint()
}

pub fn flow_phi(t: f64, x: &ExtendedPose) -> ExtendedPose {
    x.flow(t)
}

/// Tangent action of the flow: `Φ_t(exp ξ) = exp(F_t ξ)`.
pub fn flow_matrix(t: f64) -> Mat9 {
    let mut m = Mat9::identity();
    m.fixed_view_mut::<3, 3>(6, 3)
        .copy_from(&(Mat3::identity() * t));
    m
}

/// The invariant vector field `f(χ)`: only the position column, equal to `v`.
pub fn invariant_field(x: &Mat5) -> Mat5 {
    let mut m = Mat5::zeros();
    for i in 0..3 {
        m[(i, 4)] = x[(i, 3)];
    }
    m
}

pub fn exp_se23(xi: &Tangent) -> ExtendedPose {
    let j = left_jacobian_so3(&xi.phi);
    ExtendedPose {
        c: exp_so3(&xi.phi),
        v: j * xi.nu,
        r: j * xi.rho,
    }
}

pub fn log_se23(x: &ExtendedPose) -> Result<Tangent> {
    let phi = log_so3(&x.c)?;
    let jinv = inv_left_jacobian_so3(&phi)?;
    Ok(Tangent {
        phi,
        nu: jinv * x.v,
        rho: jinv * x.r,
    })
}

/// Max absolute entry difference between two poses' embeddings.
pub fn pose_distance(a: &ExtendedPose, b: &ExtendedPose) -> f64 {
    (a.to_matrix() - b.to_matrix()).amax()
}
