//! Named algebraic identities of the group, the flow and the error models,
//! each evaluated on seeded random samples against its own tolerance.
//!
//! The adjoint is injected so the suite can check itself: with a sign flipped
//! in one adjoint block, at least the conjugation identity must fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error_dynamics::{discretize, expm, f_left, f_right};
use crate::experiment::RunReport;
use crate::group::{
    exp_se23, exp_so3, flow_matrix, hat3, inv_left_jacobian_so3, invariant_field, left_jacobian_so3,
    log_se23, log_so3, ExtendedPose, Mat3, Mat5, Mat9, Tangent, Vec3, Vec9,
};
use crate::ins::{group_affine_residual, rk4_step, EarthModel, Gravitation, ImuSample};

pub const ROUND_TRIP_SAMPLES: usize = 10_000;
pub const SAMPLES: usize = 1_000;
/// Largest attitude angle drawn for round trips.
pub const MAX_ANGLE: f64 = 3.0;

/// A deliberate defect in the adjoint, for the self-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    FlipVelocityBlock,
    FlipPositionBlock,
}

pub const MUTATIONS: [Mutation; 2] = [Mutation::FlipVelocityBlock, Mutation::FlipPositionBlock];

fn adjoint_with(x: &ExtendedPose, mutation: Option<Mutation>) -> Mat9 {
    let mut ad = x.adjoint();
    let row = match mutation {
        None => return ad,
        Some(Mutation::FlipVelocityBlock) => 3,
        Some(Mutation::FlipPositionBlock) => 6,
    };
    let block = -ad.fixed_view::<3, 3>(row, 0).into_owned();
    ad.fixed_view_mut::<3, 3>(row, 0).copy_from(&block);
    ad
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl IdentityResult {
    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn vec(&mut self, scale: f64) -> Vec3 {
        Vec3::new(
            self.0.gen_range(-scale..scale),
            self.0.gen_range(-scale..scale),
            self.0.gen_range(-scale..scale),
        )
    }

    fn phi(&mut self, max_angle: f64) -> Vec3 {
        let axis = self.vec(1.0).normalize();
        axis * self.0.gen_range(0.0..max_angle)
    }

    fn tangent(&mut self) -> Tangent {
        Tangent::new(self.phi(MAX_ANGLE), self.vec(20.0), self.vec(1e3))
    }

    fn pose(&mut self) -> ExtendedPose {
        ExtendedPose::new(exp_so3(&self.phi(MAX_ANGLE)), self.vec(300.0), self.vec(1e4))
    }

    fn time(&mut self) -> f64 {
        self.0.gen_range(-100.0..100.0)
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    diff / (1.0 + scale)
}

fn max_over<F: FnMut() -> f64>(n: usize, mut f: F) -> f64 {
    (0..n).map(|_| f()).fold(0.0, f64::max)
}

/// `exp` by its power series, summed until the terms vanish.
fn series_exp5(a: &Mat5) -> Mat5 {
    let mut sum = Mat5::identity();
    let mut term = Mat5::identity();
    for k in 1..60 {
        term = term * a / k as f64;
        sum += term;
    }
    sum
}

fn hat_vec(x: &Vec9) -> Mat5 {
    Tangent::from_vector(x).hat()
}

/// Runs every identity with the given adjoint defect (none for the real suite).
pub fn run_identities(seed: u64, mutation: Option<Mutation>) -> Vec<IdentityResult> {
    let mut s = Sampler(ChaCha8Rng::seed_from_u64(seed));
    let ad = |x: &ExtendedPose| adjoint_with(x, mutation);
    let mut out = Vec::new();
    let mut push = |name, residual, tolerance, samples| {
        out.push(IdentityResult {
            name,
            residual,
            tolerance,
            samples,
        })
    };

    let r = max_over(ROUND_TRIP_SAMPLES, || {
        let phi = s.phi(MAX_ANGLE);
        match log_so3(&exp_so3(&phi)) {
            Ok(back) => (back - phi).norm(),
            Err(_) => f64::INFINITY,
        }
    });
    push("so3_exp_log_round_trip", r, 1e-9, ROUND_TRIP_SAMPLES);

    let r = max_over(ROUND_TRIP_SAMPLES, || {
        let xi = s.tangent();
        match log_se23(&exp_se23(&xi)) {
            Ok(back) => rel((back - xi).norm(), xi.norm()),
            Err(_) => f64::INFINITY,
        }
    });
    push("se23_exp_log_round_trip", r, 1e-9, ROUND_TRIP_SAMPLES);

    let r = max_over(ROUND_TRIP_SAMPLES, || {
        let x = s.pose();
        match log_se23(&x) {
            Ok(xi) => rel((exp_se23(&xi).to_matrix() - x.to_matrix()).norm(), x.to_matrix().norm()),
            Err(_) => f64::INFINITY,
        }
    });
    push("se23_log_exp_round_trip", r, 1e-9, ROUND_TRIP_SAMPLES);

    let r = max_over(SAMPLES, || {
        let xi = Tangent::new(s.phi(MAX_ANGLE), s.vec(2.0), s.vec(2.0));
        let m = series_exp5(&xi.hat());
        rel((exp_se23(&xi).to_matrix() - m).norm(), m.norm())
    });
    push("se23_exp_matches_series", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let xi = s.tangent();
        let (a, b) = (s.0.gen_range(-1.0..1.0), s.0.gen_range(-1.0..1.0));
        let lhs = exp_se23(&(xi * a)).compose(&exp_se23(&(xi * b))).to_matrix();
        rel((lhs - exp_se23(&(xi * (a + b))).to_matrix()).norm(), lhs.norm())
    });
    push("one_parameter_subgroup", r, 1e-11, SAMPLES);

    let r = max_over(SAMPLES, || {
        let phi = s.phi(MAX_ANGLE);
        match inv_left_jacobian_so3(&phi) {
            Ok(jinv) => (left_jacobian_so3(&phi) * jinv - Mat3::identity()).norm(),
            Err(_) => f64::INFINITY,
        }
    });
    push("left_jacobian_inverse", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (x, xi) = (s.pose(), s.tangent());
        let m = x.to_matrix();
        let lhs = m * xi.hat() * x.inverse().to_matrix();
        let rhs = hat_vec(&(ad(&x) * xi.to_vector()));
        rel((lhs - rhs).norm(), lhs.norm())
    });
    push("adjoint_conjugation", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (a, b) = (s.pose(), s.pose());
        let lhs = ad(&a.compose(&b));
        rel((lhs - ad(&a) * ad(&b)).norm(), lhs.norm())
    });
    push("adjoint_homomorphism", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let x = s.pose();
        let prod = ad(&x.inverse()) * ad(&x);
        (prod - Mat9::identity()).norm() / (1.0 + ad(&x).norm())
    });
    push("adjoint_inverse", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (a, b, t) = (s.pose(), s.pose(), s.time());
        let lhs = a.compose(&b).flow(t).to_matrix();
        let rhs = a.flow(t).compose(&b.flow(t)).to_matrix();
        rel((lhs - rhs).norm(), lhs.norm())
    });
    push("flow_automorphism", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (x, t1, t2) = (s.pose(), s.time(), s.time());
        let lhs = x.flow(t1).flow(t2).to_matrix();
        rel((lhs - x.flow(t1 + t2).to_matrix()).norm(), lhs.norm())
    });
    push("flow_semigroup", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let t = s.0.gen_range(-10.0..10.0);
        let xi = Tangent::new(s.phi(MAX_ANGLE), s.vec(10.0), s.vec(100.0));
        let lhs = exp_se23(&xi).flow(t).to_matrix();
        let rhs = exp_se23(&Tangent::from_vector(&(flow_matrix(t) * xi.to_vector()))).to_matrix();
        (lhs - rhs).norm()
    });
    push("flow_log_linearity", r, 1e-9, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (x, t) = (s.pose(), s.time());
        let lhs = flow_matrix(t) * ad(&x);
        rel((lhs - ad(&x.flow(t)) * flow_matrix(t)).norm(), lhs.norm())
    });
    push("flow_adjoint_intertwining", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (a, b) = (s.pose().to_matrix(), s.pose().to_matrix());
        let lhs = invariant_field(&(a * b));
        rel((lhs - (invariant_field(&a) * b + a * invariant_field(&b))).norm(), lhs.norm())
    });
    push("invariant_field_derivation", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (x, t) = (s.pose(), s.time());
        (invariant_field(&x.flow(t).to_matrix()) - invariant_field(&x.to_matrix())).amax()
    });
    push("invariant_field_flow_invariance", r, 0.0, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (a, b) = (s.pose(), s.pose());
        let imu = ImuSample::new(0.0, s.vec(2.0), s.vec(30.0));
        let earth = EarthModel {
            omega_ie_e: s.vec(1e-3),
            gravitation: Gravitation::ConstantVector(Vec3::zeros()),
        };
        group_affine_residual(&a, &b, &imu, &earth, &s.vec(10.0))
    });
    push("group_affine", r, 1e-12, SAMPLES);

    // χ̃_b = Φ_t(χ₀) χ_b collapses the left closed form to Ad(χ_b⁻¹) F_t
    let r = max_over(SAMPLES, || {
        let (chi0, chi_b, t) = (s.pose(), s.pose(), s.time());
        let tilde = chi0.flow(t).compose(&chi_b);
        let lhs = ad(&tilde.inverse()) * flow_matrix(t) * ad(&chi0);
        let rhs = ad(&chi_b.inverse()) * flow_matrix(t);
        rel((lhs - rhs).norm(), rhs.norm())
    });
    push("left_closed_form_collapse", r, 1e-12, SAMPLES);

    let r = max_over(SAMPLES, || {
        let (x, t) = (s.pose(), s.time());
        let c = x.c.matrix();
        let mut blocks = Mat9::zeros();
        for k in 0..3 {
            blocks.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(c);
        }
        blocks.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat3(&x.v) * c));
        blocks.fixed_view_mut::<3, 3>(6, 0).copy_from(&(hat3(&x.r) * c));
        blocks.fixed_view_mut::<3, 3>(6, 3).copy_from(&(c * t));
        let lhs = ad(&x) * flow_matrix(t);
        rel((lhs - blocks).norm(), blocks.norm())
    });
    push("right_closed_form_blocks", r, 1e-12, SAMPLES);

    // exp(F dt) against RK4 on Φ' = FΦ with 2000 substeps
    let r = max_over(50, || {
        let f = if s.0.gen_bool(0.5) {
            f_left(&ImuSample::new(0.0, s.vec(1.0), s.vec(20.0)))
        } else {
            let earth = EarthModel {
                omega_ie_e: s.vec(1e-3),
                gravitation: Gravitation::ConstantVector(Vec3::zeros()),
            };
            f_right(&earth, &s.vec(10.0), 0.0)
        };
        let dt = s.0.gen_range(0.1..1.0);
        let n = 2000;
        let mut phi = Mat9::identity();
        for k in 0..n {
            phi = rk4_step(&phi, k as f64 * dt / n as f64, dt / n as f64, |_, m| f.f * m);
        }
        match discretize(&f, dt) {
            Ok(d) => rel((d - phi).norm(), phi.norm()),
            Err(_) => f64::INFINITY,
        }
    });
    push("discretize_vs_fundamental", r, 1e-10, 50);

    let r = max_over(SAMPLES, || {
        let a = Mat9::from_fn(|_, _| s.0.gen_range(-0.5..0.5));
        let lhs = expm(&a) * expm(&(-a));
        (lhs - Mat9::identity()).norm()
    });
    push("expm_inverse", r, 1e-12, SAMPLES);

    out
}

/// Runs the suite on `seed`; the report's residual is the largest
/// residual-to-tolerance excess, so it is `<= 0` exactly when all pass.
pub fn identity_suite(seed: u64) -> (RunReport, Vec<IdentityResult>) {
    let start = Instant::now();
    let results = run_identities(seed, None);
    let failing: Vec<&str> = results.iter().filter(|r| !r.pass()).map(|r| r.name).collect();
    let max = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    let report = RunReport {
        name: "identities".into(),
        max_resid: max,
        final_resid: results.last().map_or(0.0, |r| r.residual),
        ratio: None,
        pass: failing.is_empty(),
        wall_time: start.elapsed().as_secs_f64(),
        notes: if failing.is_empty() {
            vec![format!("{} identities", results.len())]
        } else {
            vec![format!("failing: {}", failing.join(", "))]
        },
    };
    (report, results)
}

/// Reruns the suite with each adjoint mutation and lists the identities that
/// caught it. The self-test passes when every mutation is caught by
/// `adjoint_conjugation`.
pub fn mutation_self_test(seed: u64) -> (RunReport, Vec<(Mutation, Vec<&'static str>)>) {
    let start = Instant::now();
    let caught: Vec<(Mutation, Vec<&'static str>)> = MUTATIONS
        .iter()
        .map(|&m| {
            let names = run_identities(seed, Some(m))
                .into_iter()
                .filter(|r| !r.pass())
                .map(|r| r.name)
                .collect();
            (m, names)
        })
        .collect();
    let pass = caught.iter().all(|(_, names)| names.contains(&"adjoint_conjugation"));
    let report = RunReport {
        name: "identities-self-test".into(),
        max_resid: 0.0,
        final_resid: 0.0,
        ratio: None,
        pass,
        wall_time: start.elapsed().as_secs_f64(),
        notes: caught
            .iter()
            .map(|(m, names)| format!("{m:?} caught by: {}", names.join(", ")))
            .collect(),
    };
    (report, caught)
}
