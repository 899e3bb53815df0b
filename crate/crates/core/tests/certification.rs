mod common;

use common::*;
use rpi_core::certification::{certify, finite_step_bound, one_step_worst_case};
use rpi_core::closed_loop::build_grids;
use rpi_core::plant::augment;

#[test]
fn reference_coupled_tank_design_certifies_loosely() {
    let pb = coupled_tanks();
    let gains = coupled_tanks_gains();
    let (l, rho) = (coupled_tanks_l(), coupled_tanks_rho());
    let cert = certify(&pb, &gains, &l, &rho, 0.995, 1e-2).unwrap();
    println!("{:?}\nlambda* {} excess {}", cert.residuals, cert.lambda_star, cert.ultimate_excess);
    assert!(cert.is_certified(), "{:?}", cert.verdict);
    assert!(cert.lambda_star < 1.0);
    let aug = augment(&pb).unwrap();
    let grids = build_grids(&pb, &aug, &gains).unwrap();
    let one = one_step_worst_case(&aug, &grids, &l, &rho, 0.995).unwrap();
    println!("{one:?}");
    assert!(one.passes(cert.lambda_star, 1e-2));
    assert!(one.worst_image <= cert.lambda_star + 1e-9);
    let tight = certify(&pb, &gains, &l, &rho, 0.995, 1e-9).unwrap();
    assert!(!tight.is_certified());
    assert_eq!(finite_step_bound(&rho, 0.995).unwrap(), 674);
}

fn tank_certificate() -> (rpi_core::Problem, rpi_core::certification::Certificate<f64>) {
    let pb = coupled_tanks();
    let cert = certify(&pb, &coupled_tanks_gains(), &coupled_tanks_l(), &coupled_tanks_rho(), 0.995, 1e-2).unwrap();
    (pb, cert)
}

#[test]
fn perturbed_level_matrix_is_rejected() {
    let pb = coupled_tanks();
    let mut l = coupled_tanks_l();
    l[(0, 0)] += 0.05;
    l[(7, 2)] -= 0.05;
    let cert = certify(&pb, &coupled_tanks_gains(), &l, &coupled_tanks_rho(), 0.995, 1e-3).unwrap();
    assert!(!cert.is_certified());
    assert!(cert.residuals.max() > 1e-3, "{:?}", cert.residuals);
}

#[test]
fn inflated_gains_break_the_rate_budget() {
    let pb = coupled_tanks();
    let gains = coupled_tanks_gains().scale(10.0);
    let cert = certify(&pb, &gains, &coupled_tanks_l(), &coupled_tanks_rho(), 0.995, 1e-2).unwrap();
    assert!(!cert.is_certified());
    let aug = augment(&pb).unwrap();
    let grids = build_grids(&pb, &aug, &gains).unwrap();
    let one = one_step_worst_case(&aug, &grids, &coupled_tanks_l(), &coupled_tanks_rho(), 0.995).unwrap();
    assert!(one.rate_excess.unwrap() > 1e-2 || one.worst_image > 1.0, "{one:?}");
}

#[test]
fn wider_disturbances_never_shrink_the_ultimate_excess() {
    let gains = coupled_tanks_gains();
    let (l, rho) = (coupled_tanks_l(), coupled_tanks_rho());
    let mut last = f64::NEG_INFINITY;
    for s in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let pb = coupled_tanks().with_disturbance_scale(s);
        let aug = augment(&pb).unwrap();
        let grids = build_grids(&pb, &aug, &gains).unwrap();
        let one = one_step_worst_case(&aug, &grids, &l, &rho, 0.995).unwrap();
        assert!(one.ultimate_excess >= last - 1e-12, "scale {s}: {} < {last}", one.ultimate_excess);
        last = one.ultimate_excess;
    }
}

#[test]
fn multiplier_and_one_step_paths_agree_on_the_reference_design() {
    let (pb, cert) = tank_certificate();
    let aug = augment(&pb).unwrap();
    let grids = build_grids(&pb, &aug, &coupled_tanks_gains()).unwrap();
    let one = one_step_worst_case(&aug, &grids, &coupled_tanks_l(), &coupled_tanks_rho(), 0.995).unwrap();
    // Multipliers bound the support function from above, so the direct image can only be smaller.
    assert!(one.worst_image <= cert.lambda_star + 1e-9);
    assert!(one.ultimate_excess <= cert.ultimate_excess + 1e-9);
    assert!(1.0 - one.inclusion_excess >= cert.inclusion_margin - 1e-9);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
    /// Interior parameter pairs mix the vertex-pair residual matrices convexly.
    #[test]
    fn interior_pairs_are_no_worse_than_vertex_pairs(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
                                                    d in 0.0f64..1.0, e in 0.0f64..1.0, f in 0.0f64..1.0) {
        use rpi_core::conditions::{pair_residuals, residuals_vertex_pair_form};
        use rpi_core::Weights;
        let (pb, cert) = tank_certificate();
        let aug = augment(&pb).unwrap();
        let grids = build_grids(&pb, &aug, &coupled_tanks_gains()).unwrap();
        let vert = residuals_vertex_pair_form(&aug, &grids, &cert.candidate).unwrap();
        let w = |x: f64, y: f64, z: f64| {
            let s = 1.0 + x + y + z;
            Weights::new(vec![1.0 / s, x / s, y / s, z / s]).unwrap()
        };
        let at = pair_residuals(&aug, &grids, &cert.candidate, &w(a, b, c), &w(d, e, f)).unwrap();
        for ((name, x), (_, y)) in at.entries().iter().zip(vert.entries().iter()) {
            proptest::prop_assert!(*x <= *y + 1e-12, "{name}: {x} > {y}");
        }
    }
}
