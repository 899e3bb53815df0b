#![allow(dead_code)]

use rpi_core::{Gains, Mat, Polytope, Problem};

pub fn mat<R: AsRef<[f64]>>(rows: &[R]) -> Mat {
    Mat::from_rows(rows).unwrap()
}

/// Double integrator with one input; `b_values` lists the vertex values of B's first entry.
pub fn double_integrator(b_values: &[f64], rate: Option<(f64, f64)>) -> Problem {
    let nv = b_values.len();
    Problem {
        a: Polytope::constant(mat(&[[1.0, 1.0], [0.0, 1.0]]), nv),
        b: Polytope::new(b_values.iter().map(|&b| mat(&[[b], [1.0]])).collect()).unwrap(),
        bp: Polytope::constant(mat(&[[1.0], [1.0]]), nv),
        c: mat(&[[1.0, 0.0]]),
        deta: mat(&[[1.0]]),
        x: mat(&[[0.8, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
        u: mat(&[[1.0], [-1.25]]),
        udelta: rate.map(|(lo, hi)| mat(&[[1.0 / hi], [1.0 / lo]])),
        p: mat(&[[10.0], [-10.0]]),
        n: mat(&[[10.0], [-10.0]]),
    }
}

pub fn coupled_tanks() -> Problem {
    let a = [
        [[0.9886, 0.0], [0.0112, 0.9886]],
        [[0.9886, 0.0], [0.0112, 0.9840]],
        [[0.9840, 0.0], [0.0158, 0.9886]],
        [[0.9840, 0.0], [0.0158, 0.9840]],
    ];
    let b = mat(&[[0.0179], [0.0001]]);
    Problem {
        a: Polytope::new(a.iter().map(|m| mat(m)).collect()).unwrap(),
        b: Polytope::constant(b.clone(), 4),
        bp: Polytope::constant(b, 4),
        c: Mat::identity(2),
        deta: Mat::identity(2),
        x: mat(&[[-0.2, 0.0], [0.2, 0.0], [0.0, -0.2], [0.0, 0.2]]),
        u: mat(&[[-0.25], [0.25]]),
        udelta: Some(mat(&[[-0.5], [0.5]])),
        p: mat(&[[-3.9], [3.9]]),
        n: mat(&[[-50.0, 0.0], [50.0, 0.0], [0.0, -50.0], [0.0, 50.0]]),
    }
}

pub fn coupled_tanks_gains() -> Gains {
    let k = vec![
        mat(&[[-1.02e-5, 0.08e-5]]),
        mat(&[[-1.02e-5, 0.08e-5]]),
        mat(&[[-9.38e-4, -0.20e-4]]),
        mat(&[[3.41e-2, -0.018e-2]]),
    ];
    let kbar = [-0.2496, -0.2496, -0.2496, -0.2526].iter().map(|&v| mat(&[[v]])).collect();
    let khat = vec![mat(&[[-0.20, 0.0]]); 4];
    Gains::new(k, kbar, khat).unwrap()
}

pub fn coupled_tanks_l() -> Mat {
    mat(&[
        [0.03744, 0.17477, 0.00286],
        [-0.20000, 0.00000, 0.00000],
        [-0.03741, -0.17477, -0.00286],
        [0.0000, -0.20000, 0.00000],
        [0.00000, 0.00000, 0.25000],
        [0.00000, 0.20000, 0.00000],
        [0.20000, 0.00000, 0.00000],
        [-0.19202, 0.00000, -0.01522],
        [-0.02041, -0.18674, -0.00015],
        [0.00000, 0.00000, -0.25000],
        [0.19202, 0.00000, 0.01522],
        [0.02041, 0.18674, 0.00015],
    ])
}

pub fn coupled_tanks_rho() -> Vec<f64> {
    vec![0.05028, 0.03775, 0.05028, 0.05027, 0.04236, 0.05027, 0.03775, 0.03415, 0.05055, 0.04236, 0.03415, 0.05055]
}
