//! Matrix polytopes: simplex-weighted vertex matrices, their stacked forms, and the
//! block grids produced by composing two polytopes.
//!
//! Selector conventions used by the stacked forms, for weights `w` on `n_v` vertices:
//! `Γ(w) = [w₁I; …; w_{n_v}I]` has shape `(n_v·n) × n` and `Γ'(w) = [w₁I … w_{n_v}I]`
//! has shape `m × (n_v·m)`, so that `M(w) = rowStack·Γ(w) = Γ'(w)·colStack`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex<T> {
    weights: Vec<T>,
}

impl<T: Real> Simplex<T> {
    /// Accepts weights whose sum is within 1e-9 of one and renormalizes them.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSimplex("empty weight vector".into()));
        }
        let neg_tol = T::of(1e-12);
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < -neg_tol) {
            return Err(Error::InvalidSimplex(format!("weight {w} is negative or not finite")));
        }
        let weights: Vec<T> = weights.into_iter().map(|w| w.max(T::zero())).collect();
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-9) {
            return Err(Error::InvalidSimplex(format!("weights sum to {sum}")));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / sum).collect() })
    }

    /// The `i`-th vertex of the `n`-simplex.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut weights = vec![T::zero(); n];
        weights[i] = T::one();
        Self { weights }
    }

    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![T::one() / T::of(n as f64); n] }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Convex hull of equally shaped vertex matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolytope<T> {
    vertices: Vec<Matrix<T>>,
}

impl<T: Real> MatrixPolytope<T> {
    pub fn new(vertices: Vec<Matrix<T>>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidDimension("matrix polytope needs a vertex".into()))?;
        let shape = first.shape();
        if let Some(v) = vertices.iter().find(|v| v.shape() != shape) {
            return Err(Error::InvalidDimension(format!(
                "vertex shapes {:?} and {:?} differ",
                shape,
                v.shape()
            )));
        }
        Ok(Self { vertices })
    }

    /// `n_v` copies of a constant matrix.
    pub fn constant(m: Matrix<T>, n_v: usize) -> Self {
        Self { vertices: vec![m; n_v.max(1)] }
    }

    pub fn n_v(&self) -> usize {
        self.vertices.len()
    }

    /// Shape of each vertex matrix.
    pub fn shape(&self) -> (usize, usize) {
        self.vertices[0].shape()
    }

    pub fn vertex(&self, i: usize) -> &Matrix<T> {
        &self.vertices[i]
    }

    pub fn vertices(&self) -> &[Matrix<T>] {
        &self.vertices
    }

    /// `∑ wᵢ Mᵢ`.
    pub fn evaluate(&self, w: &Simplex<T>) -> Result<Matrix<T>> {
        if w.len() != self.n_v() {
            return Err(Error::InvalidDimension(format!(
                "{} weights for {} vertices",
                w.len(),
                self.n_v()
            )));
        }
        let (m, n) = self.shape();
        let mut out = Matrix::zeros(m, n);
        for (v, &wi) in self.vertices.iter().zip(w.weights()) {
            if wi != T::zero() {
                out.add_scaled(wi, v);
            }
        }
        Ok(out)
    }

    /// `[M₁ … M_{n_v}]`.
    pub fn row_stack(&self) -> Matrix<T> {
        let refs: Vec<&Matrix<T>> = self.vertices.iter().collect();
        Matrix::hstack(&refs).expect("equal vertex shapes")
    }

    /// `[M₁; …; M_{n_v}]`.
    pub fn col_stack(&self) -> Matrix<T> {
        let refs: Vec<&Matrix<T>> = self.vertices.iter().collect();
        Matrix::vstack(&refs).expect("equal vertex shapes")
    }

    pub fn map(&self, f: impl Fn(&Matrix<T>) -> Matrix<T>) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect())
    }
}

/// Column selector `Γ(w)` of shape `(n_v·n) × n`.
pub fn gamma<T: Real>(w: &Simplex<T>, n: usize) -> Matrix<T> {
    let nv = w.len();
    let mut g = Matrix::zeros(nv * n, n);
    for (k, &wk) in w.weights().iter().enumerate() {
        for d in 0..n {
            g[(k * n + d, d)] = wk;
        }
    }
    g
}

/// Row selector `Γ'(w)` of shape `m × (n_v·m)`.
pub fn gamma_prime<T: Real>(w: &Simplex<T>, m: usize) -> Matrix<T> {
    gamma(w, m).transpose()
}

/// `n_v × n_v` grid of equally shaped blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid<T> {
    blocks: Vec<Vec<Matrix<T>>>,
}

impl<T: Real> BlockGrid<T> {
    pub fn new(blocks: Vec<Vec<Matrix<T>>>) -> Result<Self> {
        let nv = blocks.len();
        if nv == 0 || blocks.iter().any(|r| r.len() != nv) {
            return Err(Error::InvalidDimension("block grid must be square and nonempty".into()));
        }
        let shape = blocks[0][0].shape();
        if blocks.iter().flatten().any(|b| b.shape() != shape) {
            return Err(Error::InvalidDimension("block grid shapes differ".into()));
        }
        Ok(Self { blocks })
    }

    pub fn from_fn(nv: usize, mut f: impl FnMut(usize, usize) -> Matrix<T>) -> Result<Self> {
        Self::new((0..nv).map(|i| (0..nv).map(|j| f(i, j)).collect()).collect())
    }

    pub fn n_v(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.blocks[0][0].shape()
    }

    pub fn block(&self, i: usize, j: usize) -> &Matrix<T> {
        &self.blocks[i][j]
    }

    /// Big matrix of shape `(n_v·m) × (n_v·p)` with block `(i, j)` at block-row `i`, block-column `j`.
    pub fn flatten(&self) -> Matrix<T> {
        let (m, p) = self.block_shape();
        let nv = self.n_v();
        let mut out = Matrix::zeros(nv * m, nv * p);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                out.set_block(i * m, j * p, b);
            }
        }
        out
    }

    /// `Γ'(row)·flatten·Γ(col)` computed as `∑ᵢ∑ⱼ rowᵢ colⱼ blocks[i][j]`.
    pub fn sandwich(&self, row: &Simplex<T>, col: &Simplex<T>) -> Result<Matrix<T>> {
        let nv = self.n_v();
        if row.len() != nv || col.len() != nv {
            return Err(Error::InvalidDimension("sandwich weights do not match grid".into()));
        }
        let (m, p) = self.block_shape();
        let mut out = Matrix::zeros(m, p);
        for (i, &ri) in row.weights().iter().enumerate() {
            for (j, &cj) in col.weights().iter().enumerate() {
                let w = ri * cj;
                if w != T::zero() {
                    out.add_scaled(w, &self.blocks[i][j]);
                }
            }
        }
        Ok(out)
    }

    /// Applies `f` to every block.
    pub fn map(&self, f: impl Fn(&Matrix<T>) -> Matrix<T>) -> Result<Self> {
        Self::new(self.blocks.iter().map(|r| r.iter().map(&f).collect()).collect())
    }
}

/// Grid with `blocks[i][j] = Mᵢ·Nⱼ`.
pub fn composed_product<T: Real>(m: &MatrixPolytope<T>, n: &MatrixPolytope<T>) -> Result<BlockGrid<T>> {
    check_compose(m, n)?;
    BlockGrid::from_fn(m.n_v(), |i, j| m.vertex(i) * n.vertex(j))
}

/// Grid with `blocks[i][j] = Fⱼ + Mᵢ·Nⱼ`.
pub fn composed_sum<T: Real>(
    f: &MatrixPolytope<T>,
    m: &MatrixPolytope<T>,
    n: &MatrixPolytope<T>,
) -> Result<BlockGrid<T>> {
    check_compose(m, n)?;
    if f.n_v() != m.n_v() {
        return Err(Error::InvalidDimension("vertex counts differ".into()));
    }
    if f.shape() != (m.shape().0, n.shape().1) {
        return Err(Error::InvalidDimension(format!(
            "summand shape {:?} does not match product shape {:?}",
            f.shape(),
            (m.shape().0, n.shape().1)
        )));
    }
    BlockGrid::from_fn(m.n_v(), |i, j| f.vertex(j) + &(m.vertex(i) * n.vertex(j)))
}

fn check_compose<T: Real>(m: &MatrixPolytope<T>, n: &MatrixPolytope<T>) -> Result<()> {
    if m.n_v() != n.n_v() {
        return Err(Error::InvalidDimension(format!(
            "vertex counts {} and {} differ",
            m.n_v(),
            n.n_v()
        )));
    }
    if m.shape().1 != n.shape().0 {
        return Err(Error::InvalidDimension(format!(
            "cannot compose {:?} with {:?}",
            m.shape(),
            n.shape()
        )));
    }
    Ok(())
}

/// Block diagonal with `n_v` copies of `m`.
pub fn diag_lift<T: Real>(m: &Matrix<T>, n_v: usize) -> Matrix<T> {
    let refs: Vec<&Matrix<T>> = std::iter::repeat(m).take(n_v).collect();
    Matrix::block_diag(&refs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_normalizes_small_drift() {
        let s = Simplex::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        let sum: f64 = s.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!(Simplex::new(vec![0.5, 0.6]).is_err());
        assert!(Simplex::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn midpoint_of_scaled_identities() {
        let p = MatrixPolytope::new(vec![Matrix::identity(2), Matrix::identity(2).scale(2.0)]).unwrap();
        let m = p.evaluate(&Simplex::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert!(m.max_abs_diff(&Matrix::identity(2).scale(1.5)) < 1e-15);
    }

    #[test]
    fn grid_flatten_places_blocks() {
        let g = BlockGrid::from_fn(2, |i, j| Matrix::filled(1, 2, (10 * i + j) as f64)).unwrap();
        let f = g.flatten();
        assert_eq!(f.shape(), (2, 4));
        assert_eq!(f[(1, 2)], 11.0);
        assert_eq!(f[(0, 3)], 1.0);
    }

    #[test]
    fn diag_lift_of_scalar() {
        let d = diag_lift(&Matrix::filled(1, 1, 2.0), 3);
        assert!(d.max_abs_diff(&Matrix::identity(3).scale(2.0)) == 0.0);
    }
}
