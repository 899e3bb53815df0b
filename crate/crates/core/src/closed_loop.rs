//! Gain schedules, the closed-loop block grids, pointwise stepping, and the deployable
//! output-form control law.
//!
//! Grid orientation: `grid.block(j, i)` holds the closed-loop vertex block built from plant
//! and `K`, `K̄` vertex `i` (the current parameter `α`) and `K̂` vertex `j` (the next
//! parameter `α₊`), so evaluating at `(α, α₊)` is `grid.sandwich(α₊, α)`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::plant::{AugmentedSystem, LpvProblem};
use crate::polytope_algebra::{composed_sum, BlockGrid, MatrixPolytope, Simplex};
use crate::scalar::Real;

/// Vertex gains of `δu = K(α)y + K̄(α)u + K̂(α₊)y₊`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule<T> {
    pub k: Vec<Matrix<T>>,
    pub kbar: Vec<Matrix<T>>,
    pub khat: Vec<Matrix<T>>,
}

impl<T: Real> GainSchedule<T> {
    pub fn new(k: Vec<Matrix<T>>, kbar: Vec<Matrix<T>>, khat: Vec<Matrix<T>>) -> Result<Self> {
        let nv = k.len();
        if nv == 0 || kbar.len() != nv || khat.len() != nv {
            return Err(Error::InvalidDimension(format!(
                "gain lists have lengths {}, {}, {}",
                k.len(),
                kbar.len(),
                khat.len()
            )));
        }
        let (nu, ny) = k[0].shape();
        let ok = k.iter().all(|m| m.shape() == (nu, ny))
            && khat.iter().all(|m| m.shape() == (nu, ny))
            && kbar.iter().all(|m| m.shape() == (nu, nu));
        if !ok {
            return Err(Error::InvalidDimension("inconsistent gain shapes".into()));
        }
        Ok(Self { k, kbar, khat })
    }

    pub fn zeros(n_v: usize, n_u: usize, n_y: usize) -> Self {
        Self {
            k: vec![Matrix::zeros(n_u, n_y); n_v],
            kbar: vec![Matrix::zeros(n_u, n_u); n_v],
            khat: vec![Matrix::zeros(n_u, n_y); n_v],
        }
    }

    /// The same gains for every vertex.
    pub fn constant(k: Matrix<T>, kbar: Matrix<T>, khat: Matrix<T>, n_v: usize) -> Result<Self> {
        Self::new(vec![k; n_v], vec![kbar; n_v], vec![khat; n_v])
    }

    pub fn n_v(&self) -> usize {
        self.k.len()
    }

    pub fn n_u(&self) -> usize {
        self.k[0].rows()
    }

    pub fn n_y(&self) -> usize {
        self.k[0].cols()
    }

    pub fn scale(&self, s: T) -> Self {
        let f = |v: &Vec<Matrix<T>>| v.iter().map(|m| m.scale(s)).collect();
        Self { k: f(&self.k), kbar: f(&self.kbar), khat: f(&self.khat) }
    }

    fn check(&self, problem: &LpvProblem<T>) -> Result<()> {
        let d = problem.dims();
        if self.n_v() != d.n_v || self.n_u() != d.n_u || self.n_y() != d.n_y {
            return Err(Error::InvalidDimension(format!(
                "gains for (n_v, n_u, n_y) = ({}, {}, {}) but plant has ({}, {}, {})",
                self.n_v(),
                self.n_u(),
                self.n_y(),
                d.n_v,
                d.n_u,
                d.n_y
            )));
        }
        Ok(())
    }
}

fn weighted<T: Real>(ms: &[Matrix<T>], w: &Simplex<T>) -> Result<Matrix<T>> {
    MatrixPolytope::new(ms.to_vec())?.evaluate(w)
}

/// The four closed-loop grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopGrids<T> {
    pub acl: BlockGrid<T>,
    pub bcl: BlockGrid<T>,
    pub adu: BlockGrid<T>,
    pub bdu: BlockGrid<T>,
}

/// Pointwise closed-loop matrices at one `(α, α₊)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices<T> {
    pub acl: Matrix<T>,
    pub bcl: Matrix<T>,
    pub adu: Matrix<T>,
    pub bdu: Matrix<T>,
}

impl<T: Real> ClosedLoopGrids<T> {
    pub fn n_v(&self) -> usize {
        self.acl.n_v()
    }

    pub fn evaluate(&self, alpha: &Simplex<T>, alpha_plus: &Simplex<T>) -> Result<ClosedLoopMatrices<T>> {
        Ok(ClosedLoopMatrices {
            acl: self.acl.sandwich(alpha_plus, alpha)?,
            bcl: self.bcl.sandwich(alpha_plus, alpha)?,
            adu: self.adu.sandwich(alpha_plus, alpha)?,
            bdu: self.bdu.sandwich(alpha_plus, alpha)?,
        })
    }
}

/// Builds the grids as composed sums `F_i + M_j N_i` with `M_j = [0; K̂_j]`.
pub fn build_grids<T: Real>(
    problem: &LpvProblem<T>,
    aug: &AugmentedSystem<T>,
    gains: &GainSchedule<T>,
) -> Result<ClosedLoopGrids<T>> {
    gains.check(problem)?;
    let d = aug.dims;
    let (nx, nu, np, ne, nv) = (d.n_x, d.n_u, d.n_p, d.n_eta, d.n_v);
    let (nxi, nd) = (d.n_xi(), d.n_d());
    let c = &problem.c;
    let deta = &problem.deta;

    let lift_khat = MatrixPolytope::new(
        gains
            .khat
            .iter()
            .map(|kh| {
                let mut m = Matrix::zeros(nxi, d.n_y);
                m.set_block(nx, 0, kh);
                m
            })
            .collect(),
    )?;
    let khat = MatrixPolytope::new(gains.khat.clone())?;

    // State grid.
    let f_acl = MatrixPolytope::new(
        (0..nv)
            .map(|i| {
                let mut m = aug.a_aug.vertex(i).clone();
                m.set_block(nx, 0, &(&gains.k[i] * c));
                m.set_block(nx, nx, &(&Matrix::identity(nu) + &gains.kbar[i]));
                m
            })
            .collect(),
    )?;
    let n_state = MatrixPolytope::new((0..nv).map(|i| c * &aug.a_aug.vertex(i).block(0, 0, nx, nxi)).collect())?;
    let acl = composed_sum(&f_acl, &lift_khat, &n_state)?;

    // Disturbance grid on d₊ = [p; η; η₊].
    let f_bcl = MatrixPolytope::new(
        (0..nv)
            .map(|i| {
                let mut m = Matrix::zeros(nxi, nd);
                m.set_block(0, 0, problem.bp.vertex(i));
                m.set_block(nx, np, &(&gains.k[i] * deta));
                m
            })
            .collect(),
    )?;
    let n_dist = MatrixPolytope::new(
        (0..nv)
            .map(|i| {
                let mut m = Matrix::zeros(d.n_y, nd);
                m.set_block(0, 0, &(c * problem.bp.vertex(i)));
                m.set_block(0, np + ne, deta);
                m
            })
            .collect(),
    )?;
    let bcl = composed_sum(&f_bcl, &lift_khat, &n_dist)?;

    // Increment grids: the u-rows of the above without the identity.
    let f_adu = MatrixPolytope::new(
        (0..nv)
            .map(|i| Matrix::hstack(&[&(&gains.k[i] * c), &gains.kbar[i]]).expect("consistent rows"))
            .collect(),
    )?;
    let adu = composed_sum(&f_adu, &khat, &n_state)?;
    let f_bdu = f_bcl.map(|m| m.block(nx, 0, nu, nd))?;
    let bdu = composed_sum(&f_bdu, &khat, &n_dist)?;
    Ok(ClosedLoopGrids { acl, bcl, adu, bdu })
}

/// Closed-loop matrices at `(α, α₊)` assembled directly from the evaluated plant and gains.
pub fn direct_closed_loop<T: Real>(
    problem: &LpvProblem<T>,
    gains: &GainSchedule<T>,
    alpha: &Simplex<T>,
    alpha_plus: &Simplex<T>,
) -> Result<ClosedLoopMatrices<T>> {
    gains.check(problem)?;
    let d = problem.dims();
    let (nx, nu, np, ne) = (d.n_x, d.n_u, d.n_p, d.n_eta);
    let a = problem.a.evaluate(alpha)?;
    let b = problem.b.evaluate(alpha)?;
    let bp = problem.bp.evaluate(alpha)?;
    let k = weighted(&gains.k, alpha)?;
    let kbar = weighted(&gains.kbar, alpha)?;
    let khat = weighted(&gains.khat, alpha_plus)?;
    let c = &problem.c;
    let deta = &problem.deta;
    let khc = &khat * c;
    let adu = Matrix::hstack(&[&(&(&k * c) + &(&khc * &a)), &(&kbar + &(&khc * &b))])?;
    let bdu = Matrix::hstack(&[&(&khc * &bp), &(&k * deta), &(&khat * deta)])?;
    let mut acl = Matrix::zeros(nx + nu, nx + nu);
    acl.set_block(0, 0, &a);
    acl.set_block(0, nx, &b);
    acl.set_block(nx, 0, &adu);
    for r in 0..nu {
        acl[(nx + r, nx + r)] = acl[(nx + r, nx + r)] + T::one();
    }
    let mut bcl = Matrix::zeros(nx + nu, np + 2 * ne);
    bcl.set_block(0, 0, &bp);
    bcl.set_block(nx, 0, &bdu);
    Ok(ClosedLoopMatrices { acl, bcl, adu, bdu })
}

/// One step `ξ₊ = 𝔸ᶜˡ(α₊,α)ξ + 𝔹ᶜˡ(α₊,α)d₊`, returning `(ξ₊, δu)`.
pub fn step_closed_loop<T: Real>(
    grids: &ClosedLoopGrids<T>,
    xi: &[T],
    d: &[T],
    alpha: &Simplex<T>,
    alpha_plus: &Simplex<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let (nxi, nd) = grids.bcl.block_shape();
    if xi.len() != nxi || d.len() != nd {
        return Err(Error::InvalidDimension(format!(
            "state/disturbance lengths {}/{} for grids {nxi}/{nd}",
            xi.len(),
            d.len()
        )));
    }
    let m = grids.evaluate(alpha, alpha_plus)?;
    let next: Vec<T> = m.acl.mul_vec(xi).iter().zip(m.bcl.mul_vec(d)).map(|(&a, b)| a + b).collect();
    let du: Vec<T> = m.adu.mul_vec(xi).iter().zip(m.bdu.mul_vec(d)).map(|(&a, b)| a + b).collect();
    Ok((next, du))
}

/// `u_k = (I + K̄(α_{k−1}))u_{k−1} + K(α_{k−1})y_{k−1} + K̂(α_k)y_k`.
///
/// With `u_prev = 0` and `y_prev = 0` this is the first-step transfer `u₀ = K̂(α₀)y₀`.
pub fn control_law_step<T: Real>(
    gains: &GainSchedule<T>,
    u_prev: &[T],
    y_prev: &[T],
    y_now: &[T],
    alpha_prev: &Simplex<T>,
    alpha_now: &Simplex<T>,
) -> Result<Vec<T>> {
    let (nu, ny) = (gains.n_u(), gains.n_y());
    if u_prev.len() != nu || y_prev.len() != ny || y_now.len() != ny {
        return Err(Error::InvalidDimension("control law argument lengths".into()));
    }
    let k = weighted(&gains.k, alpha_prev)?;
    let kbar = weighted(&gains.kbar, alpha_prev)?;
    let khat = weighted(&gains.khat, alpha_now)?;
    let a = kbar.mul_vec(u_prev);
    let b = k.mul_vec(y_prev);
    let c = khat.mul_vec(y_now);
    Ok((0..nu).map(|r| u_prev[r] + a[r] + b[r] + c[r]).collect())
}
