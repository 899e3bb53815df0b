//! The design problem (plant vertices, output map, normalized constraint and disturbance
//! sets) and its augmented state-plus-input form.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::polyhedron::HPolyhedron;
use crate::polytope_algebra::MatrixPolytope;
use crate::scalar::Real;

/// Plant `x₊ = A(α)x + B(α)u + B_p(α)p`, `y = Cx + D_η η`, with constraint and disturbance
/// sets `{z : S z ≤ 1}` stored by their row matrices `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvProblem<T> {
    pub a: MatrixPolytope<T>,
    pub b: MatrixPolytope<T>,
    pub bp: MatrixPolytope<T>,
    pub c: Matrix<T>,
    pub deta: Matrix<T>,
    pub x: Matrix<T>,
    pub u: Matrix<T>,
    /// Rate set; `None` drops the rate constraint.
    pub udelta: Option<Matrix<T>>,
    pub p: Matrix<T>,
    pub n: Matrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_v: usize,
    pub n_x: usize,
    pub n_u: usize,
    pub n_p: usize,
    pub n_y: usize,
    pub n_eta: usize,
}

impl Dims {
    pub fn n_xi(&self) -> usize {
        self.n_x + self.n_u
    }

    /// Length of `d₊ = [p; η; η₊]`.
    pub fn n_d(&self) -> usize {
        self.n_p + 2 * self.n_eta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    ShapeMismatch(String),
    VertexCountMismatch { a: usize, b: usize, bp: usize },
    NoInputs,
    ZeroRow { set: &'static str, row: usize },
    NonFinite { set: &'static str },
    Unbounded { set: &'static str },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            ValidationIssue::VertexCountMismatch { a, b, bp } => {
                write!(f, "vertex counts differ (A: {a}, B: {b}, Bp: {bp})")
            }
            ValidationIssue::NoInputs => write!(f, "the plant has no control inputs"),
            ValidationIssue::ZeroRow { set, row } => write!(f, "set {set} has a zero row at index {row}"),
            ValidationIssue::NonFinite { set } => write!(f, "set {set} has non-finite entries"),
            ValidationIssue::Unbounded { set } => write!(f, "set {set} is unbounded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_v: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl<T: Real> LpvProblem<T> {
    pub fn dims(&self) -> Dims {
        Dims {
            n_v: self.a.n_v(),
            n_x: self.a.shape().0,
            n_u: self.b.shape().1,
            n_p: self.bp.shape().1,
            n_y: self.c.rows(),
            n_eta: self.deta.cols(),
        }
    }

    /// Checks dimensions, vertex counts, and that every set is a bounded polytope with the
    /// origin in its interior (implied by unit bounds once rows are nonzero and finite).
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let (nv_a, nv_b, nv_bp) = (self.a.n_v(), self.b.n_v(), self.bp.n_v());
        if nv_a != nv_b || nv_a != nv_bp {
            issues.push(ValidationIssue::VertexCountMismatch { a: nv_a, b: nv_b, bp: nv_bp });
        }
        let d = self.dims();
        if d.n_u == 0 {
            issues.push(ValidationIssue::NoInputs);
        }
        let mut shape = |ok: bool, what: String| {
            if !ok {
                issues.push(ValidationIssue::ShapeMismatch(what));
            }
        };
        shape(self.a.shape().1 == d.n_x, format!("A is {:?}, must be square", self.a.shape()));
        shape(self.b.shape().0 == d.n_x, format!("B has {} rows, expected {}", self.b.shape().0, d.n_x));
        shape(self.bp.shape().0 == d.n_x, format!("Bp has {} rows, expected {}", self.bp.shape().0, d.n_x));
        shape(self.c.cols() == d.n_x, format!("C has {} columns, expected {}", self.c.cols(), d.n_x));
        shape(self.deta.rows() == d.n_y, format!("Deta has {} rows, expected {}", self.deta.rows(), d.n_y));
        shape(self.x.cols() == d.n_x, format!("X acts on {} coordinates, expected {}", self.x.cols(), d.n_x));
        shape(self.u.cols() == d.n_u, format!("U acts on {} coordinates, expected {}", self.u.cols(), d.n_u));
        if let Some(ud) = &self.udelta {
            shape(ud.cols() == d.n_u, format!("Udelta acts on {} coordinates, expected {}", ud.cols(), d.n_u));
        }
        shape(self.p.cols() == d.n_p, format!("P acts on {} coordinates, expected {}", self.p.cols(), d.n_p));
        shape(self.n.cols() == d.n_eta, format!("N acts on {} coordinates, expected {}", self.n.cols(), d.n_eta));
        let mut sets: Vec<(&'static str, &Matrix<T>)> =
            vec![("X", &self.x), ("U", &self.u), ("P", &self.p), ("N", &self.n)];
        if let Some(ud) = &self.udelta {
            sets.push(("Udelta", ud));
        }
        for (name, s) in sets {
            issues.extend(set_issues(name, s));
        }
        ValidationReport { n_v: nv_a, issues }
    }

    pub fn x_set(&self) -> Result<HPolyhedron<T>> {
        HPolyhedron::unit(self.x.clone())
    }

    pub fn u_set(&self) -> Result<HPolyhedron<T>> {
        HPolyhedron::unit(self.u.clone())
    }

    /// Uniform interval widening of the disturbance sets: `P`, `N` become `s·P`, `s·N`
    /// (rows divided by `s`).
    pub fn with_disturbance_scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.p = self.p.scale(T::one() / s);
        out.n = self.n.scale(T::one() / s);
        out
    }
}

fn set_issues<T: Real>(name: &'static str, s: &Matrix<T>) -> Vec<ValidationIssue> {
    if s.rows() == 0 || s.cols() == 0 {
        return vec![ValidationIssue::Unbounded { set: name }];
    }
    if !s.is_finite() {
        return vec![ValidationIssue::NonFinite { set: name }];
    }
    let tiny = T::of(1e-12);
    let zero_rows: Vec<ValidationIssue> = (0..s.rows())
        .filter(|&i| s.row(i).iter().fold(T::zero(), |m, v| m.max(v.abs())) < tiny)
        .map(|row| ValidationIssue::ZeroRow { set: name, row })
        .collect();
    if !zero_rows.is_empty() {
        return zero_rows;
    }
    match HPolyhedron::unit(s.clone()).and_then(|h| h.is_bounded()) {
        Ok(true) => Vec::new(),
        _ => vec![ValidationIssue::Unbounded { set: name }],
    }
}

/// Augmented system with state `ξ = [x; u]` and input `δu`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem<T> {
    pub dims: Dims,
    /// `[A(α) B(α); 0 I]`.
    pub a_aug: MatrixPolytope<T>,
    /// `[0; I]`.
    pub b_aug: Matrix<T>,
    /// `[B_p(α); 0]`.
    pub bp_aug: MatrixPolytope<T>,
    /// Maps `[x; u; x₊]` to `υ = [y; u; y₊]` (noise-free part).
    pub c_aug: Matrix<T>,
    /// Maps `[η; η₊]` to the noise part of `υ`.
    pub deta_aug: Matrix<T>,
    /// `𝕏 = blockdiag(X, U)`, the augmented state constraint `𝕏ξ ≤ 1`.
    pub xi: HPolyhedron<T>,
    /// `𝔻 = blockdiag(P, N, N)`, the stacked disturbance set `𝔻d₊ ≤ 1`.
    pub dbig: HPolyhedron<T>,
    /// Rate constraint rows `U_δ δu ≤ 1`, if any.
    pub udelta: Option<Matrix<T>>,
}

pub fn augment<T: Real>(problem: &LpvProblem<T>) -> Result<AugmentedSystem<T>> {
    let report = problem.validate();
    if !report.is_valid() {
        let msg: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
        return Err(Error::InvalidProblem(msg.join("; ")));
    }
    let d = problem.dims();
    let (nx, nu, ny, ne) = (d.n_x, d.n_u, d.n_y, d.n_eta);
    let a_aug = MatrixPolytope::new(
        (0..d.n_v)
            .map(|i| {
                let mut m = Matrix::zeros(nx + nu, nx + nu);
                m.set_block(0, 0, problem.a.vertex(i));
                m.set_block(0, nx, problem.b.vertex(i));
                m.set_block(nx, nx, &Matrix::identity(nu));
                m
            })
            .collect(),
    )?;
    let mut b_aug = Matrix::zeros(nx + nu, nu);
    b_aug.set_block(nx, 0, &Matrix::identity(nu));
    let bp_aug = problem.bp.map(|bp| {
        let mut m = Matrix::zeros(nx + nu, d.n_p);
        m.set_block(0, 0, bp);
        m
    })?;
    let mut c_aug = Matrix::zeros(2 * ny + nu, nx + nu + nx);
    c_aug.set_block(0, 0, &problem.c);
    c_aug.set_block(ny, nx, &Matrix::identity(nu));
    c_aug.set_block(ny + nu, nx + nu, &problem.c);
    let mut deta_aug = Matrix::zeros(2 * ny + nu, 2 * ne);
    deta_aug.set_block(0, 0, &problem.deta);
    deta_aug.set_block(ny + nu, ne, &problem.deta);
    let xi = HPolyhedron::unit(Matrix::block_diag(&[&problem.x, &problem.u]))?;
    let dbig = HPolyhedron::unit(Matrix::block_diag(&[&problem.p, &problem.n, &problem.n]))?;
    Ok(AugmentedSystem { dims: d, a_aug, b_aug, bp_aug, c_aug, deta_aug, xi, dbig, udelta: problem.udelta.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_integrator() -> LpvProblem<f64> {
        let m = |rows: &[&[f64]]| Matrix::from_rows(rows).unwrap();
        LpvProblem {
            a: MatrixPolytope::new(vec![m(&[&[1.0, 1.0], &[0.0, 1.0]])]).unwrap(),
            b: MatrixPolytope::new(vec![m(&[&[2.0], &[1.0]])]).unwrap(),
            bp: MatrixPolytope::new(vec![m(&[&[1.0], &[1.0]])]).unwrap(),
            c: m(&[&[1.0, 0.0]]),
            deta: m(&[&[1.0]]),
            x: m(&[&[0.8, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]),
            u: m(&[&[1.0], &[-1.25]]),
            udelta: None,
            p: m(&[&[10.0], &[-10.0]]),
            n: m(&[&[10.0], &[-10.0]]),
        }
    }

    #[test]
    fn double_integrator_is_valid_and_augments() {
        let pb = double_integrator();
        let r = pb.validate();
        assert!(r.is_valid(), "{:?}", r.issues);
        assert_eq!(r.n_v, 1);
        let aug = augment(&pb).unwrap();
        let expect = Matrix::from_rows(&[[1.0, 1.0, 2.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(aug.a_aug.vertex(0), &expect);
        assert_eq!(aug.b_aug.col(0), vec![0.0, 0.0, 1.0]);
        assert_eq!(aug.xi.n_rows(), 6);
        assert_eq!(aug.dbig.n_rows(), 6);
        assert_eq!(aug.dims.n_d(), 3);
    }

    #[test]
    fn zero_row_is_reported() {
        let mut pb = double_integrator();
        pb.x.row_mut(1).fill(0.0);
        let r = pb.validate();
        assert_eq!(r.issues, vec![ValidationIssue::ZeroRow { set: "X", row: 1 }]);
        assert!(matches!(augment(&pb), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn inputs_are_required() {
        let mut pb = double_integrator();
        pb.b = MatrixPolytope::new(vec![Matrix::zeros(2, 0)]).unwrap();
        pb.u = Matrix::zeros(0, 0);
        assert!(matches!(augment(&pb), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn unbounded_set_is_reported() {
        let mut pb = double_integrator();
        pb.x = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(pb.validate().issues, vec![ValidationIssue::Unbounded { set: "X" }]);
    }
}
