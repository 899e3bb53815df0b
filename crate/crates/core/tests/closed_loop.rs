mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpi_core::closed_loop::{build_grids, control_law_step, direct_closed_loop, step_closed_loop};
use rpi_core::plant::augment;
use rpi_core::polytope_algebra::Simplex;
use rpi_core::{Gains, Mat, Problem};

fn random_weights(rng: &mut ChaCha8Rng, nv: usize) -> Simplex<f64> {
    let raw: Vec<f64> = (0..nv).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    Simplex::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

fn random_gains(rng: &mut ChaCha8Rng, nv: usize, nu: usize, ny: usize) -> Gains {
    let mut m = |r, c| Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let k = (0..nv).map(|_| m(nu, ny)).collect();
    let kbar = (0..nv).map(|_| m(nu, nu)).collect();
    let khat = (0..nv).map(|_| m(nu, ny)).collect();
    Gains::new(k, kbar, khat).unwrap()
}

fn blend(ms: &[Mat], w: &Simplex<f64>) -> Vec<Vec<f64>> {
    let (r, c) = ms[0].shape();
    (0..r)
        .map(|a| (0..c).map(|b| ms.iter().zip(w.weights()).map(|(m, wi)| wi * m[(a, b)]).sum()).collect())
        .collect()
}

fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// One step of the physical loop: plant update, measurements, incremental control law.
fn physical_step(
    pb: &Problem,
    g: &Gains,
    xi: &[f64],
    d: &[f64],
    alpha: &Simplex<f64>,
    alpha_plus: &Simplex<f64>,
) -> Vec<f64> {
    let (nx, nu) = (pb.c.cols(), g.n_u());
    let (np, ne) = (pb.bp.shape().1, pb.deta.cols());
    let (x, u) = xi.split_at(nx);
    let (p, eta) = (&d[..np], &d[np..np + ne]);
    let eta_plus = &d[np + ne..];
    let a = blend(pb.a.vertices(), alpha);
    let b = blend(pb.b.vertices(), alpha);
    let bp = blend(pb.bp.vertices(), alpha);
    let c = blend(&[pb.c.clone()], &Simplex::vertex(1, 0));
    let dn = blend(&[pb.deta.clone()], &Simplex::vertex(1, 0));
    let x_next = add(&add(&apply(&a, x), &apply(&b, u)), &apply(&bp, p));
    let y = add(&apply(&c, x), &apply(&dn, eta));
    let y_next = add(&apply(&c, &x_next), &apply(&dn, eta_plus));
    let k = apply(&blend(&g.k, alpha), &y);
    let kb = apply(&blend(&g.kbar, alpha), u);
    let kh = apply(&blend(&g.khat, alpha_plus), &y_next);
    let u_next: Vec<f64> = (0..nu).map(|r| u[r] + k[r] + kb[r] + kh[r]).collect();
    [x_next, u_next].concat()
}

#[test]
fn grid_sandwich_matches_direct_closed_loop() {
    let pb = common::coupled_tanks();
    let aug = augment(&pb).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let nv = pb.a.n_v();
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let gains = if trial == 0 { common::coupled_tanks_gains() } else { random_gains(&mut rng, nv, 1, 2) };
        let grids = build_grids(&pb, &aug, &gains).unwrap();
        let (a, ap) = (random_weights(&mut rng, nv), random_weights(&mut rng, nv));
        let s = grids.evaluate(&a, &ap).unwrap();
        let d = direct_closed_loop(&pb, &gains, &a, &ap).unwrap();
        for (x, y) in [(&s.acl, &d.acl), (&s.bcl, &d.bcl), (&s.adu, &d.adu), (&s.bdu, &d.bdu)] {
            worst = worst.max(x.max_abs_diff(y));
        }
        // Column by column against the physical loop.
        let (nxi, nd) = (s.acl.rows(), s.bcl.cols());
        for col in 0..nxi + nd {
            let mut xi = vec![0.0; nxi];
            let mut dv = vec![0.0; nd];
            if col < nxi {
                xi[col] = 1.0;
            } else {
                dv[col - nxi] = 1.0;
            }
            let expect = physical_step(&pb, &gains, &xi, &dv, &a, &ap);
            let m = if col < nxi { &s.acl } else { &s.bcl };
            let c = if col < nxi { col } else { col - nxi };
            for (r, e) in expect.iter().enumerate() {
                worst = worst.max((m[(r, c)] - e).abs());
            }
        }
    }
    assert!(worst <= 1e-12, "worst deviation {worst:e}");
}

#[test]
fn stepping_agrees_with_output_form_control_law() {
    let pb = common::coupled_tanks();
    let aug = augment(&pb).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gains = random_gains(&mut rng, 4, 1, 2).scale(0.3);
    let grids = build_grids(&pb, &aug, &gains).unwrap();
    let mut xi = vec![0.1, -0.05, 0.02];
    let mut eta = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let mut alpha = random_weights(&mut rng, 4);
    for _ in 0..50 {
        let alpha_plus = random_weights(&mut rng, 4);
        let eta_plus = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p = rng.gen_range(-1.0..1.0);
        let d = [vec![p], eta.clone(), eta_plus.clone()].concat();
        let (next, du) = step_closed_loop(&grids, &xi, &d, &alpha, &alpha_plus).unwrap();
        let y = [xi[0] + eta[0], xi[1] + eta[1]];
        let y_next = [next[0] + eta_plus[0], next[1] + eta_plus[1]];
        let u = control_law_step(&gains, &xi[2..], &y, &y_next, &alpha, &alpha_plus).unwrap();
        assert!((u[0] - next[2]).abs() < 1e-12);
        assert!((du[0] - (next[2] - xi[2])).abs() < 1e-12);
        xi = next;
        eta = eta_plus;
        alpha = alpha_plus;
    }
}

#[test]
fn mismatched_gains_are_rejected() {
    let pb = common::coupled_tanks();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wrong = random_gains(&mut rng, 3, 1, 2);
    let w = Simplex::uniform(4);
    assert!(direct_closed_loop(&pb, &wrong, &w, &w).is_err());
    let wrong = random_gains(&mut rng, 4, 1, 3);
    assert!(direct_closed_loop(&pb, &wrong, &w, &w).is_err());
}
