use num::{BigInt, BigRational, Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpi_core::polyhedron::{
    check_containment, convex_hull_2d, enumerate_vertices, polygon_area, project, projected_polygon, volume,
    Containment,
};
use rpi_core::{Mat, Polyhedron};

fn random_polygon(rng: &mut ChaCha8Rng, scale: f64) -> Polyhedron {
    let k = rng.gen_range(4..=8);
    let rows: Vec<[f64; 2]> = (0..k)
        .map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + rng.gen_range(-0.2..0.2)) / k as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let phi = (0..k).map(|_| scale * rng.gen_range(0.3..1.5)).collect();
    Polyhedron::new(Mat::from_rows(&rows).unwrap(), phi).unwrap()
}

#[test]
fn farkas_verdicts_match_vertex_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut yes, mut no, mut cases) = (0, 0, 0);
    while cases < 100 {
        let inner = random_polygon(&mut rng, 1.0);
        let s = rng.gen_range(0.8..2.5);
        let outer = random_polygon(&mut rng, s);
        let worst = enumerate_vertices(&inner)
            .unwrap()
            .iter()
            .map(|v| outer.max_violation(v))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst.abs() < 1e-6 {
            continue;
        }
        cases += 1;
        let brute = worst <= 0.0;
        match check_containment(&inner, &outer, 1e-9).unwrap() {
            Containment::Contained(c) => {
                assert!(brute, "certificate for a non-contained pair");
                let qp = &c.q * inner.p();
                assert!(qp.max_abs_diff(outer.p()) <= 1e-8);
                let qphi = c.q.mul_vec(inner.phi());
                assert!(qphi.iter().zip(outer.phi()).all(|(a, b)| *a <= b + 1e-8));
                assert!(c.q.min_entry() >= -1e-12);
                yes += 1;
            }
            Containment::NotContained { .. } => {
                assert!(!brute, "missed containment");
                no += 1;
            }
        }
    }
    assert!(yes > 10 && no > 10, "{yes} contained / {no} not");
}

fn rational_vertex_count(rows: &[[i64; 3]], rhs: &[i64]) -> usize {
    let q = |v: i64| BigRational::from_integer(BigInt::from(v));
    let det3 = |m: &[[BigRational; 3]; 3]| {
        &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]) - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
            + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
    };
    let l = rows.len();
    let mut found: Vec<[BigRational; 3]> = Vec::new();
    for a in 0..l {
        for b in a + 1..l {
            for c in b + 1..l {
                let idx = [a, b, c];
                let m: [[BigRational; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| q(rows[idx[i]][j])));
                let d = det3(&m);
                if d.is_zero() {
                    continue;
                }
                let x: [BigRational; 3] = std::array::from_fn(|k| {
                    let mk: [[BigRational; 3]; 3] = std::array::from_fn(|i| {
                        std::array::from_fn(|j| if j == k { q(rhs[idx[i]]) } else { m[i][j].clone() })
                    });
                    det3(&mk) / &d
                });
                let feasible = rows.iter().zip(rhs).all(|(r, &h)| {
                    let s = q(r[0]) * &x[0] + q(r[1]) * &x[1] + q(r[2]) * &x[2];
                    !(s - q(h)).is_positive()
                });
                if feasible && !found.contains(&x) {
                    found.push(x);
                }
            }
        }
    }
    found.len()
}

#[test]
fn vertex_counts_match_exact_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..30 {
        let mut rows: Vec<[i64; 3]> = vec![[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        let mut rhs: Vec<i64> = (0..6).map(|_| rng.gen_range(2..=5)).collect();
        for _ in 0..rng.gen_range(1..=6) {
            rows.push(std::array::from_fn(|_| rng.gen_range(-3..=3)));
            if rows.last().unwrap().iter().all(|&v| v == 0) {
                rows.pop();
                continue;
            }
            rhs.push(rng.gen_range(1..=6));
        }
        let p = Mat::from_rows(&rows.iter().map(|r| r.map(|v| v as f64)).collect::<Vec<_>>()).unwrap();
        let poly = Polyhedron::new(p, rhs.iter().map(|&v| v as f64).collect()).unwrap();
        let got = enumerate_vertices(&poly).unwrap().len();
        assert_eq!(got, rational_vertex_count(&rows, &rhs));
    }
}

#[test]
fn double_integrator_state_box() {
    let x = Polyhedron::from_box(&[-1.0, -1.0], &[1.25, 1.0]).unwrap();
    let mut v = enumerate_vertices(&x).unwrap();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(v, vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.25, -1.0], vec![1.25, 1.0]]);
    assert!((volume(&x).unwrap().value - 4.5).abs() < 1e-12);
}

#[test]
fn random_simplex_volume_matches_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        // Simplex around the origin: conv of 4 random points, built from its facets.
        let pts: Vec<[f64; 3]> = loop {
            let mut pts: Vec<[f64; 3]> = (0..4).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
            let c: [f64; 3] = std::array::from_fn(|d| pts.iter().map(|p| p[d]).sum::<f64>() / 4.0);
            for p in pts.iter_mut() {
                for d in 0..3 {
                    p[d] -= c[d];
                }
            }
            let m = Mat::from_fn(3, 3, |i, j| pts[i + 1][j] - pts[0][j]);
            if m.determinant().abs() > 0.1 {
                break pts;
            }
        };
        let mut rows = Vec::new();
        let mut phi = Vec::new();
        for skip in 0..4 {
            let f: Vec<&[f64; 3]> = pts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| p).collect();
            let u: Vec<f64> = (0..3).map(|d| f[1][d] - f[0][d]).collect();
            let w: Vec<f64> = (0..3).map(|d| f[2][d] - f[0][d]).collect();
            let mut n = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
            let mut b: f64 = (0..3).map(|d| n[d] * f[0][d]).sum();
            if b < 0.0 {
                n = n.map(|v| -v);
                b = -b;
            }
            rows.push(n);
            phi.push(b);
        }
        let poly = Polyhedron::new(Mat::from_rows(&rows).unwrap(), phi).unwrap();
        let m = Mat::from_fn(3, 3, |i, j| pts[i + 1][j] - pts[0][j]);
        let exact = m.determinant().abs() / 6.0;
        let got = volume(&poly).unwrap().value;
        assert!((got - exact).abs() < 1e-10 * exact.max(1.0), "{got} vs {exact}");
    }
}

fn random_polytope_3d(rng: &mut ChaCha8Rng) -> Polyhedron {
    let k = rng.gen_range(6..=12);
    let mut rows: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    for _ in 6..k {
        rows.push(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
    }
    let phi = (0..rows.len()).map(|_| rng.gen_range(0.5..2.0)).collect();
    Polyhedron::new(Mat::from_rows(&rows).unwrap(), phi).unwrap()
}

#[test]
fn projection_hull_equals_hull_of_projected_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..25 {
        let poly = random_polytope_3d(&mut rng);
        let dims = [0, 2];
        let direct = polygon_area(&projected_polygon(&poly, dims).unwrap());
        let pts: Vec<[f64; 2]> = enumerate_vertices(&poly).unwrap().iter().map(|v| [v[dims[0]], v[dims[1]]]).collect();
        let oracle = polygon_area(&convex_hull_2d(&pts));
        assert!((direct - oracle).abs() < 1e-9 * oracle.max(1.0), "{direct} vs {oracle}");
    }
}

#[test]
fn projection_composes() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let poly = random_polytope_3d(&mut rng);
        let twice = project(&project(&poly, &[0, 1]).unwrap(), &[0]).unwrap();
        let once = project(&poly, &[0]).unwrap();
        let a = volume(&twice).unwrap().value;
        let b = volume(&once).unwrap().value;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volume_is_monotone_under_containment(seed in 0u64..10_000, grow in 1.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = random_polytope_3d(&mut rng);
        let big = Polyhedron::new(small.p().clone(), small.phi().iter().map(|v| v * grow).collect()).unwrap();
        prop_assert!(check_containment(&small, &big, 1e-9).unwrap().is_contained());
        prop_assert!(volume(&small).unwrap().value <= volume(&big).unwrap().value + 1e-9);
    }

    #[test]
    fn normalization_preserves_membership(seed in 0u64..10_000, x in prop::array::uniform3(-2.0f64..2.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poly = random_polytope_3d(&mut rng);
        let unit = poly.normalized();
        prop_assert!(unit.has_unit_bounds());
        let a = poly.max_violation(&x) <= 0.0;
        let b = unit.max_violation(&x) <= 0.0;
        prop_assume!(poly.max_violation(&x).abs() > 1e-9);
        prop_assert_eq!(a, b);
    }
}
