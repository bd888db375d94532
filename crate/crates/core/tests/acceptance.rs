//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::sync::OnceLock;
use std::time::Instant;

use loglin_ins::config::ExperimentConfig;
use loglin_ins::error_dynamics::Side;
use loglin_ins::experiment::{self, ExactnessRun, RunReport};
use loglin_ins::group::{exp_se23, exp_so3, flow_matrix};
use loglin_ins::identities::identity_suite;
use loglin_ins::{Tangent, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, what: &str, pass: bool, detail: String) {
    println!(
        "criterion {n} ({what}): {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn headline_config(side: Side) -> ExperimentConfig {
    let axis = Vec3::new(1.0, -0.5, 0.7).normalize();
    ExperimentConfig {
        error_side: side,
        initial_error: Tangent::new(
            axis * 150f64.to_radians(),
            Vec3::new(10.0, -5.0, 3.0),
            Vec3::new(1000.0, -500.0, 200.0),
        ),
        ..ExperimentConfig::default()
    }
}

fn headline(side: Side) -> &'static (RunReport, ExactnessRun) {
    static LEFT: OnceLock<(RunReport, ExactnessRun)> = OnceLock::new();
    static RIGHT: OnceLock<(RunReport, ExactnessRun)> = OnceLock::new();
    let cell = match side {
        Side::Left => &LEFT,
        Side::Right => &RIGHT,
    };
    cell.get_or_init(|| experiment::exactness(&headline_config(side)).expect("headline run"))
}

#[test]
fn criterion_1_group_affine() {
    let (report, run) = experiment::affine_check(1000, 42);
    let pass = report.pass && run.residuals.len() == 1000 && report.wall_time < 1.0;
    verdict(
        1,
        "group-affine exactness",
        pass,
        format!("max={:.3e} in {:.3}s", report.max_resid, report.wall_time),
    );
    assert!(pass);
}

#[test]
fn criterion_2_flow_log_linearity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max = 0.0f64;
    for _ in 0..1000 {
        let t = rng.gen_range(-20.0..20.0);
        let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let xi = Tangent::new(
            axis.normalize() * rng.gen_range(0.0..3.0),
            Vec3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)),
            Vec3::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)),
        );
        // Φ_t(exp ξ) has attitude exp(φ), velocity Jν, position Jρ + tJν;
        // F_t ξ has the same φ and ν, and ρ + tν
        let lhs = exp_se23(&xi).flow(t).to_matrix();
        let moved = Tangent::from_vector(&(flow_matrix(t) * xi.to_vector()));
        assert_eq!(moved.rho, xi.rho + xi.nu * t);
        let rhs = exp_se23(&moved).to_matrix();
        max = max.max((lhs - rhs).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = max <= 1e-9 && secs < 1.0;
    verdict(2, "flow log-linearity", pass, format!("max={max:.3e} in {secs:.3}s"));
    assert!(pass);
}

fn exactness_criterion(n: u32, side: Side) {
    let (report, run) = headline(side);
    let pass = report.pass && report.wall_time < 30.0;
    verdict(
        n,
        &format!("{side} log-linear exactness"),
        pass,
        format!(
            "max_lin={:.3e} max_closed={:.3e} ratio={:?} in {:.1}s; {}",
            run.max_lin,
            run.max_closed,
            report.ratio,
            report.wall_time,
            report.notes.join("; ")
        ),
    );
    assert!(run.max_lin <= experiment::EXACTNESS_TOL);
    assert!(run.max_closed <= experiment::EXACTNESS_TOL);
    assert!(pass, "{report}");
}

#[test]
fn criterion_3_left_exactness() {
    exactness_criterion(3, Side::Left);
}

#[test]
fn criterion_4_right_exactness() {
    exactness_criterion(4, Side::Right);
}

#[test]
fn criterion_5_decomposition() {
    let (report, run) = experiment::decompose(&ExperimentConfig::default()).expect("decompose");
    let pass = report.pass && report.wall_time < 30.0;
    verdict(
        5,
        "decomposition consistency",
        pass,
        format!("max={:.3e} ratio={:?} in {:.1}s; {}", run.max, report.ratio, report.wall_time, report.notes.join("; ")),
    );
    assert!(run.max <= experiment::DECOMPOSE_TOL);
    assert!(pass, "{report}");
}

#[test]
fn criterion_6_angle_conservation() {
    let left = headline(Side::Left).1.angle_drift;
    let right = headline(Side::Right).1.angle_drift;
    let pass = left <= 1e-8 && right <= 1e-8;
    verdict(
        6,
        "error angle conservation",
        pass,
        format!("left drift={left:.3e} right drift={right:.3e}"),
    );
    let angle0 = headline(Side::Left).1.rows[0].dx_true.fixed_rows::<3>(0).norm();
    assert!((angle0 - 150f64.to_radians()).abs() < 1e-12);
    assert!(pass);
}

#[test]
fn criterion_7_factorization() {
    let left = experiment::factorization(Side::Left, 5.0, 1e-4).expect("left");
    let right = experiment::factorization(Side::Right, 5.0, 1e-4).expect("right");
    let pass = left.pass && right.pass;
    verdict(7, "factorization identity", pass, format!("{left}; {right}"));
    assert!(pass);
}

#[test]
fn criterion_8_algebra_suite() {
    let (report, results) = identity_suite(0);
    let get = |name: &str| {
        results
            .iter()
            .find(|r| r.name == name)
            .unwrap_or_else(|| panic!("missing identity {name}"))
    };
    let so3 = get("so3_exp_log_round_trip");
    let se23 = get("se23_exp_log_round_trip");
    let conj = get("adjoint_conjugation");
    let disc = get("discretize_vs_fundamental");
    let pass = so3.residual <= 1e-9
        && so3.samples >= 10_000
        && se23.residual <= 1e-9
        && se23.samples >= 10_000
        && conj.residual <= 1e-12
        && disc.residual <= 1e-10
        && report.pass
        && report.wall_time < 5.0;
    verdict(
        8,
        "algebra suite",
        pass,
        format!(
            "round trips {:.3e}/{:.3e}, conjugation {:.3e}, discretize {:.3e}, {} identities in {:.2}s",
            so3.residual,
            se23.residual,
            conj.residual,
            disc.residual,
            results.len(),
            report.wall_time
        ),
    );
    // rotation exp stays on SO(3) at the largest sampled angle
    assert!(exp_so3(&Vec3::new(3.0, 0.0, 0.0)).matrix().determinant() > 0.0);
    assert!(pass);
}
