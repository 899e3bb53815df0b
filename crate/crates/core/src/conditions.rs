//! Residuals of the algebraic invariance, inclusion, rate-admissibility, left-inverse and
//! direction conditions for a candidate design.
//!
//! Multiplier matrices are stored in big-matrix form: block `(j, i)` of `h` (rows
//! `j·l_r..`, columns `i·l_r..`) is the multiplier for the vertex pair whose closed-loop
//! block is `grids.acl.block(j, i)`.

use crate::closed_loop::{ClosedLoopGrids, GainSchedule};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::plant::AugmentedSystem;
use crate::polyhedron::HPolyhedron;
use crate::polytope_algebra::{diag_lift, gamma, gamma_prime, Simplex};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution<T> {
    pub l: Matrix<T>,
    pub rho: Vec<T>,
    pub lambda: T,
    pub eps1: T,
    pub gains: GainSchedule<T>,
    pub h: Matrix<T>,
    pub v: Matrix<T>,
    pub g: Matrix<T>,
    /// Rate multipliers; empty (0 rows) without rate constraints.
    pub q: Matrix<T>,
    pub t: Matrix<T>,
    pub j: Matrix<T>,
    pub gammas: Vec<T>,
    pub psis: Vec<Vec<T>>,
}

impl<T: Real> CandidateSolution<T> {
    pub fn l_r(&self) -> usize {
        self.l.rows()
    }

    /// `Λ = {ξ : 𝕃ξ ≤ 1}`.
    pub fn invariant_set(&self) -> Result<HPolyhedron<T>> {
        level_set(&self.l, &vec![T::one(); self.l.rows()])
    }

    /// `Λ⁰ = {ξ : 𝕃ξ ≤ ρ}`; fails when some nonzero row has `ρ_r = 0`.
    pub fn ultimate_set(&self) -> Result<HPolyhedron<T>> {
        level_set(&self.l, &self.rho)
    }

    fn check_shapes(&self, aug: &AugmentedSystem<T>) -> Result<()> {
        let d = aug.dims;
        let (nv, nxi, lr) = (d.n_v, d.n_xi(), self.l.rows());
        let ld = aug.dbig.n_rows();
        let lxi = aug.xi.n_rows();
        let lud = aug.udelta.as_ref().map_or(0, |u| u.rows());
        let want = [
            ("L", self.l.shape(), (lr, nxi)),
            ("H", self.h.shape(), (nv * lr, nv * lr)),
            ("V", self.v.shape(), (nv * lr, nv * ld)),
            ("G", self.g.shape(), (lxi, lr)),
            ("Q", self.q.shape(), (nv * lud, nv * lr)),
            ("T", self.t.shape(), (nv * lud, nv * ld)),
            ("J", self.j.shape(), (nxi, lr)),
        ];
        for (name, got, exp) in want {
            if got != exp {
                return Err(Error::InvalidDimension(format!("{name} is {got:?}, expected {exp:?}")));
            }
        }
        if self.rho.len() != lr {
            return Err(Error::InvalidDimension(format!("rho has {} entries for {lr} rows", self.rho.len())));
        }
        if self.gammas.len() != self.psis.len() || self.psis.iter().any(|p| p.len() != nxi) {
            return Err(Error::InvalidDimension("directions and scalings disagree".into()));
        }
        if self.gains.n_v() != nv || self.gains.n_u() != d.n_u || self.gains.n_y() != d.n_y {
            return Err(Error::InvalidDimension("gain schedule does not match plant".into()));
        }
        Ok(())
    }
}

/// `{ξ : 𝕃ξ ≤ b}` without the vacuous all-zero rows of `𝕃`.
pub fn level_set<T: Real>(l: &Matrix<T>, b: &[T]) -> Result<HPolyhedron<T>> {
    let keep: Vec<usize> = (0..l.rows()).filter(|&r| l.row(r).iter().any(|v| v.abs() > T::of(1e-12))).collect();
    let p = Matrix::from_fn(keep.len(), l.cols(), |i, c| l[(keep[i], c)]);
    HPolyhedron::new(p, keep.iter().map(|&r| b[r]).collect())
}

/// Named residual entries in a fixed order.
pub const CONDITION_NAMES: [&str; 12] = [
    "state_invariance",
    "disturbance_invariance",
    "contraction",
    "ultimate_bound",
    "state_inclusion",
    "inclusion_budget",
    "rate_state",
    "rate_disturbance",
    "rate_budget",
    "left_inverse",
    "directions",
    "sign_and_bounds",
];

/// Max-abs residuals of equalities and max positive violations of inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport<T> {
    pub state_invariance: T,
    pub disturbance_invariance: T,
    pub contraction: T,
    pub ultimate_bound: T,
    pub state_inclusion: T,
    pub inclusion_budget: T,
    pub rate_state: T,
    pub rate_disturbance: T,
    pub rate_budget: T,
    pub left_inverse: T,
    pub directions: T,
    /// Negative multipliers, `ρ ∉ [0,1]`, `λ ∉ [0,1]`, negative scalings.
    pub sign_and_bounds: T,
    /// `(j, i)` block with the largest pair-indexed residual.
    pub worst_pair: (usize, usize),
}

impl<T: Real> ResidualReport<T> {
    fn zero() -> Self {
        let z = T::zero();
        Self {
            state_invariance: z,
            disturbance_invariance: z,
            contraction: z,
            ultimate_bound: z,
            state_inclusion: z,
            inclusion_budget: z,
            rate_state: z,
            rate_disturbance: z,
            rate_budget: z,
            left_inverse: z,
            directions: z,
            sign_and_bounds: z,
            worst_pair: (0, 0),
        }
    }

    pub fn entries(&self) -> [(&'static str, T); 12] {
        let v = [
            self.state_invariance,
            self.disturbance_invariance,
            self.contraction,
            self.ultimate_bound,
            self.state_inclusion,
            self.inclusion_budget,
            self.rate_state,
            self.rate_disturbance,
            self.rate_budget,
            self.left_inverse,
            self.directions,
            self.sign_and_bounds,
        ];
        std::array::from_fn(|k| (CONDITION_NAMES[k], v[k]))
    }

    pub fn max(&self) -> T {
        self.entries().iter().fold(T::zero(), |m, e| m.max(e.1))
    }

    /// First condition with residual above `tol`.
    pub fn violated(&self, tol: T) -> Option<&'static str> {
        self.entries().iter().find(|e| !(e.1 <= tol)).map(|e| e.0)
    }

    pub fn feasible(&self, tol: T) -> bool {
        self.violated(tol).is_none()
    }
}

fn pos<T: Real>(v: T) -> T {
    v.max(T::zero())
}

/// Residuals of the big-matrix conditions.
pub fn residuals<T: Real>(
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    cand: &CandidateSolution<T>,
) -> Result<ResidualReport<T>> {
    cand.check_shapes(aug)?;
    let nv = aug.dims.n_v;
    let lr = cand.l_r();
    let ld = aug.dbig.n_rows();
    let dl = diag_lift(&cand.l, nv);
    let dd = diag_lift(aug.dbig.p(), nv);
    let ones_r = Matrix::filled(lr, 1, T::one());
    let ones_d = Matrix::filled(ld, 1, T::one());
    let rho_col = Matrix::column(&cand.rho);

    let mut rep = ResidualReport::<T>::zero();
    let mut worst = (T::neg_infinity(), (0, 0));
    let mut note = |val: T, j: usize, i: usize| {
        if val > worst.0 {
            worst = (val, (j, i));
        }
    };

    // Equalities, scanned block-wise to locate the worst pair.
    let e_a = &(&cand.h * &dl) - &(&dl * &grids.acl.flatten());
    let e_b = &(&cand.v * &dd) - &(&dl * &grids.bcl.flatten());
    let nxi = cand.l.cols();
    let nd = aug.dbig.dim();
    for j in 0..nv {
        for i in 0..nv {
            let a = e_a.block(j * lr, i * nxi, lr, nxi).max_abs();
            let b = e_b.block(j * lr, i * nd, lr, nd).max_abs();
            rep.state_invariance = rep.state_invariance.max(a);
            rep.disturbance_invariance = rep.disturbance_invariance.max(b);
            note(a.max(b), j, i);
        }
    }

    // Row-sum budgets with λ·1 and ε₁ρ on every block.
    let c_sum = &(&cand.h * &diag_lift(&ones_r, nv)) + &(&cand.v * &diag_lift(&ones_d, nv));
    let d_sum = &(&cand.h * &diag_lift(&rho_col, nv)) + &(&cand.v * &diag_lift(&ones_d, nv));
    for j in 0..nv {
        for i in 0..nv {
            for r in 0..lr {
                let c = pos(c_sum[(j * lr + r, i)] - cand.lambda);
                let d = pos(d_sum[(j * lr + r, i)] - cand.eps1 * cand.rho[r]);
                rep.contraction = rep.contraction.max(c);
                rep.ultimate_bound = rep.ultimate_bound.max(d);
                note(c.max(d), j, i);
            }
        }
    }

    rep.state_inclusion = (&(&cand.g * &cand.l) - aug.xi.p()).max_abs();
    rep.inclusion_budget = (0..cand.g.rows())
        .map(|r| pos(cand.g.row(r).iter().copied().sum::<T>() - T::one()))
        .fold(T::zero(), T::max);

    if let Some(ud) = &aug.udelta {
        let lud = ud.rows();
        let du = diag_lift(ud, nv);
        let e_q = &(&cand.q * &dl) - &(&du * &grids.adu.flatten());
        let e_t = &(&cand.t * &dd) - &(&du * &grids.bdu.flatten());
        let budget = &(&cand.q * &diag_lift(&ones_r, nv)) + &(&cand.t * &diag_lift(&ones_d, nv));
        for j in 0..nv {
            for i in 0..nv {
                let a = e_q.block(j * lud, i * nxi, lud, nxi).max_abs();
                let b = e_t.block(j * lud, i * nd, lud, nd).max_abs();
                let c = (0..lud).map(|r| pos(budget[(j * lud + r, i)] - T::one())).fold(T::zero(), T::max);
                rep.rate_state = rep.rate_state.max(a);
                rep.rate_disturbance = rep.rate_disturbance.max(b);
                rep.rate_budget = rep.rate_budget.max(c);
                note(a.max(b).max(c), j, i);
            }
        }
    }

    finish_common(&mut rep, cand);
    rep.worst_pair = worst.1;
    Ok(rep)
}

fn finish_common<T: Real>(rep: &mut ResidualReport<T>, cand: &CandidateSolution<T>) {
    rep.left_inverse = (&(&cand.j * &cand.l) - &Matrix::identity(cand.l.cols())).max_abs();
    for (g, psi) in cand.gammas.iter().zip(&cand.psis) {
        for v in cand.l.mul_vec(psi) {
            rep.directions = rep.directions.max(pos(*g * v - T::one()));
        }
    }
    let neg = |m: &Matrix<T>| pos(-m.min_entry());
    let mut s = neg(&cand.h).max(neg(&cand.v)).max(neg(&cand.g));
    if cand.q.rows() > 0 {
        s = s.max(neg(&cand.q)).max(neg(&cand.t));
    }
    for &r in &cand.rho {
        s = s.max(pos(-r)).max(pos(r - T::one()));
    }
    for &g in &cand.gammas {
        s = s.max(pos(-g));
    }
    s = s.max(pos(-cand.lambda)).max(pos(cand.lambda - T::one()));
    rep.sign_and_bounds = s;
}

/// Residuals of the pointwise conditions at one parameter pair, with multipliers
/// `Γ'(α₊)·ℋ·Γ(α)` and so on.
pub fn pair_residuals<T: Real>(
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    cand: &CandidateSolution<T>,
    alpha: &Simplex<T>,
    alpha_plus: &Simplex<T>,
) -> Result<ResidualReport<T>> {
    cand.check_shapes(aug)?;
    let lr = cand.l_r();
    let ld = aug.dbig.n_rows();
    let nxi = cand.l.cols();
    let nd = aug.dbig.dim();
    let mut rep = ResidualReport::<T>::zero();
    let left = gamma_prime(alpha_plus, lr);
    let h = &(&left * &cand.h) * &gamma(alpha, lr);
    let v = &(&left * &cand.v) * &gamma(alpha, ld);
    let acl = grids.acl.sandwich(alpha_plus, alpha)?;
    let bcl = grids.bcl.sandwich(alpha_plus, alpha)?;
    debug_assert_eq!(acl.shape(), (nxi, nxi));
    rep.state_invariance = (&(&h * &cand.l) - &(&cand.l * &acl)).max_abs();
    rep.disturbance_invariance = (&(&v * aug.dbig.p()) - &(&cand.l * &bcl)).max_abs();
    debug_assert_eq!(bcl.cols(), nd);
    for r in 0..lr {
        let hs: T = h.row(r).iter().copied().sum();
        let hr: T = h.row(r).iter().zip(&cand.rho).map(|(a, b)| *a * *b).sum();
        let vs: T = v.row(r).iter().copied().sum();
        rep.contraction = rep.contraction.max(pos(hs + vs - cand.lambda));
        rep.ultimate_bound = rep.ultimate_bound.max(pos(hr + vs - cand.eps1 * cand.rho[r]));
    }
    rep.state_inclusion = (&(&cand.g * &cand.l) - aug.xi.p()).max_abs();
    rep.inclusion_budget = (0..cand.g.rows())
        .map(|r| pos(cand.g.row(r).iter().copied().sum::<T>() - T::one()))
        .fold(T::zero(), T::max);
    if let Some(ud) = &aug.udelta {
        let lud = ud.rows();
        let left = gamma_prime(alpha_plus, lud);
        let q = &(&left * &cand.q) * &gamma(alpha, lr);
        let t = &(&left * &cand.t) * &gamma(alpha, ld);
        let adu = grids.adu.sandwich(alpha_plus, alpha)?;
        let bdu = grids.bdu.sandwich(alpha_plus, alpha)?;
        rep.rate_state = (&(&q * &cand.l) - &(ud * &adu)).max_abs();
        rep.rate_disturbance = (&(&t * aug.dbig.p()) - &(ud * &bdu)).max_abs();
        for r in 0..lud {
            let s: T = q.row(r).iter().chain(t.row(r)).copied().sum();
            rep.rate_budget = rep.rate_budget.max(pos(s - T::one()));
        }
    }
    finish_common(&mut rep, cand);
    Ok(rep)
}

/// Pointwise residuals at every vertex pair; entries are the maxima over pairs and
/// `worst_pair` is the `(j, i)` pair with the largest residual.
pub fn residuals_vertex_pair_form<T: Real>(
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    cand: &CandidateSolution<T>,
) -> Result<ResidualReport<T>> {
    let nv = aug.dims.n_v;
    let mut out = ResidualReport::<T>::zero();
    let mut worst = T::neg_infinity();
    for j in 0..nv {
        for i in 0..nv {
            let r = pair_residuals(aug, grids, cand, &Simplex::vertex(nv, i), &Simplex::vertex(nv, j))?;
            let pair_max = [
                r.state_invariance,
                r.disturbance_invariance,
                r.contraction,
                r.ultimate_bound,
                r.rate_state,
                r.rate_disturbance,
                r.rate_budget,
            ]
            .into_iter()
            .fold(T::zero(), T::max);
            if pair_max > worst {
                worst = pair_max;
                out.worst_pair = (j, i);
            }
            let wp = out.worst_pair;
            let cur = out.entries();
            let new = r.entries();
            out = from_entries(std::array::from_fn(|k| cur[k].1.max(new[k].1)), wp);
        }
    }
    Ok(out)
}

fn from_entries<T: Real>(v: [T; 12], worst_pair: (usize, usize)) -> ResidualReport<T> {
    ResidualReport {
        state_invariance: v[0],
        disturbance_invariance: v[1],
        contraction: v[2],
        ultimate_bound: v[3],
        state_inclusion: v[4],
        inclusion_budget: v[5],
        rate_state: v[6],
        rate_disturbance: v[7],
        rate_budget: v[8],
        left_inverse: v[9],
        directions: v[10],
        sign_and_bounds: v[11],
        worst_pair,
    }
}
