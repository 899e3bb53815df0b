//! Independent verification of a design given only the plant, gains, `𝕃` and `ρ`:
//! multiplier recovery by LP, the multiplier-free one-step check, and the finite
//! convergence bound.

use rayon::prelude::*;

use crate::closed_loop::{build_grids, ClosedLoopGrids, GainSchedule};
use crate::conditions::{residuals, CandidateSolution, ResidualReport};
use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::matrix::Matrix;
use crate::plant::{augment, AugmentedSystem, LpvProblem};
use crate::polyhedron::{min_multiplier, support_over};
use crate::scalar::Real;

pub const DEFAULT_EPS1: f64 = 0.995;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Certified,
    Failed { condition: &'static str, worst_pair: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    /// Recovered multipliers with `lambda = λ*`.
    pub candidate: CandidateSolution<T>,
    pub lambda_star: T,
    /// `max (h·ρ + v·1 − ε₁ρ_r)`; negative means slack.
    pub ultimate_excess: T,
    /// `1 − max_r g_r·1`: how far `Λ` sits inside the constraint set.
    pub inclusion_margin: T,
    /// `1 − max (q·1 + t·1)`, if rate constraints exist.
    pub rate_margin: Option<T>,
    pub residuals: ResidualReport<T>,
    pub k_tilde: Option<u64>,
    pub tol: T,
    pub verdict: Verdict,
}

impl<T: Real> Certificate<T> {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// `min h·1` s.t. `hᵀ𝕃 = c`, `h·ρ ≤ cap`, `h ≥ 0`.
fn capped_multiplier<T: Real>(l: &Matrix<T>, rho: &[T], c: &[T], cap: T) -> Result<Option<Vec<T>>> {
    let lr = l.rows();
    let mut lp = LpProblem::new(lr);
    lp.set_objective(vec![-T::one(); lr]);
    for (d, &cd) in c.iter().enumerate() {
        lp.add_eq((0..lr).map(|k| (k, l[(k, d)])).collect(), cd);
    }
    lp.add_le(rho.iter().copied().enumerate().collect(), cap);
    Ok(lp.solve()?.optimal().map(|s| s.x))
}

struct RowRecovery<T> {
    h: Vec<T>,
    v: Vec<T>,
    lambda: T,
    excess: T,
}

fn recover_row<T: Real>(l: &Matrix<T>, rho: &[T], eps1: T, dbig: &Matrix<T>, r: usize, c: &[T], b: &[T]) -> Result<RowRecovery<T>> {
    let ld = dbig.rows();
    let lr = l.rows();
    let ones = vec![T::one(); ld];
    let (sigma, v) = min_multiplier(dbig, &ones, b)?
        .ok_or_else(|| Error::SolverError("disturbance multiplier LP infeasible".into()))?;
    let Some((m, h0)) = min_multiplier(l, rho, c)? else {
        return Ok(RowRecovery { h: vec![T::zero(); lr], v, lambda: T::infinity(), excess: T::infinity() });
    };
    let cap = (eps1 * rho[r] - sigma).max(m) + T::of(1e-10) * m.abs().max(T::one());
    let h = capped_multiplier(l, rho, c, cap)?.unwrap_or(h0);
    let h: Vec<T> = h.into_iter().map(|x| x.max(T::zero())).collect();
    let lambda = h.iter().copied().sum::<T>() + v.iter().copied().sum::<T>();
    Ok(RowRecovery { h, v, lambda, excess: m + sigma - eps1 * rho[r] })
}

/// Recovers all multipliers and checks every condition at `tol`.
pub fn certify<T: Real>(
    problem: &LpvProblem<T>,
    gains: &GainSchedule<T>,
    l: &Matrix<T>,
    rho: &[T],
    eps1: T,
    tol: T,
) -> Result<Certificate<T>> {
    let aug = augment(problem)?;
    let grids = build_grids(problem, &aug, gains)?;
    certify_with(&aug, &grids, gains, l, rho, eps1, tol)
}

pub fn certify_with<T: Real>(
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    gains: &GainSchedule<T>,
    l: &Matrix<T>,
    rho: &[T],
    eps1: T,
    tol: T,
) -> Result<Certificate<T>> {
    let nxi = aug.dims.n_xi();
    let nv = aug.dims.n_v;
    if l.cols() != nxi || rho.len() != l.rows() {
        return Err(Error::InvalidDimension(format!(
            "L is {:?} with {} bounds for state dimension {nxi}",
            l.shape(),
            rho.len()
        )));
    }
    let j = l.left_pseudo_inverse().ok_or(Error::RankDeficientL)?;
    if l.rank(T::of(1e-10)) < nxi {
        return Err(Error::RankDeficientL);
    }
    let lr = l.rows();
    let dbig = aug.dbig.p();
    let ld = dbig.rows();

    let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|jj| (0..nv).map(move |ii| (jj, ii))).collect();
    let rows: Vec<Result<Vec<RowRecovery<T>>>> = pairs
        .par_iter()
        .map(|&(jj, ii)| {
            let la = l * grids.acl.block(jj, ii);
            let lb = l * grids.bcl.block(jj, ii);
            (0..lr).map(|r| recover_row(l, rho, eps1, dbig, r, la.row(r), lb.row(r))).collect()
        })
        .collect();
    let mut h = Matrix::zeros(nv * lr, nv * lr);
    let mut v = Matrix::zeros(nv * lr, nv * ld);
    let mut lambda_star = T::zero();
    let mut ultimate_excess = T::neg_infinity();
    for (&(jj, ii), rec) in pairs.iter().zip(rows) {
        for (r, rr) in rec?.into_iter().enumerate() {
            h.row_mut(jj * lr + r)[ii * lr..(ii + 1) * lr].copy_from_slice(&rr.h);
            v.row_mut(jj * lr + r)[ii * ld..(ii + 1) * ld].copy_from_slice(&rr.v);
            lambda_star = lambda_star.max(rr.lambda);
            ultimate_excess = ultimate_excess.max(rr.excess);
        }
    }

    // Λ ⊆ Ξ.
    let xp = aug.xi.p();
    let mut g = Matrix::zeros(xp.rows(), lr);
    let mut worst_g = T::zero();
    let ones_r = vec![T::one(); lr];
    for r in 0..xp.rows() {
        match min_multiplier(l, &ones_r, xp.row(r))? {
            Some((val, gr)) => {
                worst_g = worst_g.max(val);
                g.row_mut(r).copy_from_slice(&gr);
            }
            None => worst_g = T::infinity(),
        }
    }

    // Rate admissibility.
    let (mut q, mut t, mut rate_margin) = (Matrix::zeros(0, nv * lr), Matrix::zeros(0, nv * ld), None);
    if let Some(ud) = &aug.udelta {
        let lud = ud.rows();
        q = Matrix::zeros(nv * lud, nv * lr);
        t = Matrix::zeros(nv * lud, nv * ld);
        let ones_d = vec![T::one(); ld];
        let mut worst = T::zero();
        for &(jj, ii) in &pairs {
            let ua = ud * grids.adu.block(jj, ii);
            let ub = ud * grids.bdu.block(jj, ii);
            for r in 0..lud {
                let mut total = T::zero();
                match min_multiplier(l, &ones_r, ua.row(r))? {
                    Some((val, qr)) => {
                        total = total + val;
                        q.row_mut(jj * lud + r)[ii * lr..(ii + 1) * lr].copy_from_slice(&qr);
                    }
                    None => total = T::infinity(),
                }
                if let Some((val, tr)) = min_multiplier(dbig, &ones_d, ub.row(r))? {
                    total = total + val;
                    t.row_mut(jj * lud + r)[ii * ld..(ii + 1) * ld].copy_from_slice(&tr);
                }
                worst = worst.max(total);
            }
        }
        rate_margin = Some(T::one() - worst);
    }

    let candidate = CandidateSolution {
        l: l.clone(),
        rho: rho.to_vec(),
        lambda: lambda_star,
        eps1,
        gains: gains.clone(),
        h,
        v,
        g,
        q,
        t,
        j,
        gammas: Vec::new(),
        psis: Vec::new(),
    };
    let res = residuals(aug, grids, &candidate)?;
    let verdict = match res.violated(tol) {
        Some(condition) => Verdict::Failed { condition, worst_pair: res.worst_pair },
        None if !(lambda_star < T::one()) => Verdict::Failed { condition: "contraction", worst_pair: res.worst_pair },
        None => Verdict::Certified,
    };
    let k_tilde = finite_step_bound(rho, eps1).ok();
    Ok(Certificate {
        candidate,
        lambda_star,
        ultimate_excess,
        inclusion_margin: T::one() - worst_g,
        rate_margin,
        residuals: res,
        k_tilde,
        tol,
        verdict,
    })
}

/// Steps needed to shrink `Λ` into `Λ⁰` at contraction rate `lambda_tilde`.
pub fn finite_step_bound<T: Real>(rho: &[T], lambda_tilde: T) -> Result<u64> {
    if !(lambda_tilde > T::zero() && lambda_tilde < T::one()) {
        return Err(Error::InvalidConfig(format!("contraction rate {lambda_tilde} outside (0, 1)")));
    }
    let mut eta = T::zero();
    for (r, &p) in rho.iter().enumerate() {
        if p <= T::of(1e-12) {
            return Err(Error::ZeroRho(r));
        }
        eta = eta.max(T::one() / p);
    }
    if eta <= T::one() {
        return Ok(0);
    }
    let k = ((T::one() / eta).ln() / lambda_tilde.ln()).ceil();
    Ok(k.to_f64_lossy() as u64)
}

/// Multiplier-free one-step margins.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepReport<T> {
    /// `max_{r,pair} sup_{Λ×Δ} 𝕃_r ξ₊`.
    pub worst_image: T,
    /// `max_{r,pair} sup_{Λ⁰×Δ} 𝕃_r ξ₊ − ε₁ρ_r`.
    pub ultimate_excess: T,
    /// `max_r sup_Λ 𝕏_r ξ − 1`.
    pub inclusion_excess: T,
    /// `max sup_{Λ×Δ} U_δ,r δu − 1`, if rate constraints exist.
    pub rate_excess: Option<T>,
    pub worst_pair: (usize, usize),
}

impl<T: Real> OneStepReport<T> {
    pub fn passes(&self, lambda: T, tol: T) -> bool {
        self.worst_image <= lambda + tol
            && self.ultimate_excess <= tol
            && self.inclusion_excess <= tol
            && self.rate_excess.map_or(true, |e| e <= tol)
    }
}

fn sup<T: Real>(p: &Matrix<T>, phi: &[T], c: &[T]) -> Result<T> {
    support_over(p, phi, c)?
        .map(|s| s.0)
        .ok_or(Error::UnboundedSet)
}

pub fn one_step_worst_case<T: Real>(
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    l: &Matrix<T>,
    rho: &[T],
    eps1: T,
) -> Result<OneStepReport<T>> {
    let nv = aug.dims.n_v;
    let lr = l.rows();
    let ones = vec![T::one(); lr];
    let dbig = aug.dbig.p();
    let ones_d = vec![T::one(); dbig.rows()];
    let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|jj| (0..nv).map(move |ii| (jj, ii))).collect();
    let per_pair: Vec<Result<(T, T, Option<T>)>> = pairs
        .par_iter()
        .map(|&(jj, ii)| {
            let la = l * grids.acl.block(jj, ii);
            let lb = l * grids.bcl.block(jj, ii);
            let (mut img, mut ub) = (T::neg_infinity(), T::neg_infinity());
            for r in 0..lr {
                let sd = sup(dbig, &ones_d, lb.row(r))?;
                img = img.max(sup(l, &ones, la.row(r))? + sd);
                ub = ub.max(sup(l, rho, la.row(r))? + sd - eps1 * rho[r]);
            }
            let rate = match &aug.udelta {
                Some(ud) => {
                    let ua = ud * grids.adu.block(jj, ii);
                    let ub = ud * grids.bdu.block(jj, ii);
                    let mut w = T::neg_infinity();
                    for r in 0..ud.rows() {
                        w = w.max(sup(l, &ones, ua.row(r))? + sup(dbig, &ones_d, ub.row(r))? - T::one());
                    }
                    Some(w)
                }
                None => None,
            };
            Ok((img, ub, rate))
        })
        .collect();
    let mut out = OneStepReport {
        worst_image: T::neg_infinity(),
        ultimate_excess: T::neg_infinity(),
        inclusion_excess: T::neg_infinity(),
        rate_excess: aug.udelta.as_ref().map(|_| T::neg_infinity()),
        worst_pair: (0, 0),
    };
    let mut worst_score = T::neg_infinity();
    for (&pair, res) in pairs.iter().zip(per_pair) {
        let (img, ub, rate) = res?;
        let score = img.max(ub + T::one()).max(rate.map_or(T::neg_infinity(), |r| r + T::one()));
        if score > worst_score {
            worst_score = score;
            out.worst_pair = pair;
        }
        out.worst_image = out.worst_image.max(img);
        out.ultimate_excess = out.ultimate_excess.max(ub);
        if let (Some(a), Some(b)) = (out.rate_excess.as_mut(), rate) {
            *a = a.max(b);
        }
    }
    let xp = aug.xi.p();
    for r in 0..xp.rows() {
        out.inclusion_excess = out.inclusion_excess.max(sup(l, &ones, xp.row(r))? - T::one());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope_algebra::MatrixPolytope;

    #[test]
    fn step_bound_arithmetic() {
        assert_eq!(finite_step_bound(&[1.0, 1.0], 0.995).unwrap(), 0);
        assert_eq!(finite_step_bound(&[0.05, 1.0], 0.995).unwrap(), 598);
        assert_eq!(finite_step_bound(&[0.5, 0.0], 0.995), Err(Error::ZeroRho(1)));
    }

    fn contractive_scalar() -> LpvProblem<f64> {
        // x₊ = 0.5x with no input effect and a negligible disturbance.
        let s = |v: f64| Matrix::filled(1, 1, v);
        LpvProblem {
            a: MatrixPolytope::new(vec![s(0.5)]).unwrap(),
            b: MatrixPolytope::new(vec![s(0.0)]).unwrap(),
            bp: MatrixPolytope::new(vec![s(0.0)]).unwrap(),
            c: s(1.0),
            deta: s(0.0),
            x: Matrix::from_rows(&[[0.5], [-0.5]]).unwrap(),
            u: Matrix::from_rows(&[[0.5], [-0.5]]).unwrap(),
            udelta: None,
            p: Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(),
            n: Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(),
        }
    }

    #[test]
    fn contractive_scalar_system() {
        let pb = contractive_scalar();
        // Kbar = -0.5 makes u₊ = 0.5u as well.
        let gains = GainSchedule::constant(Matrix::zeros(1, 1), Matrix::filled(1, 1, -0.5), Matrix::zeros(1, 1), 1).unwrap();
        let l = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let rho = vec![1.0; 4];
        let cert = certify(&pb, &gains, &l, &rho, 0.995, 1e-9).unwrap();
        assert!(cert.is_certified(), "{:?}", cert.verdict);
        assert!((cert.lambda_star - 0.5).abs() < 1e-12);
        let aug = augment(&pb).unwrap();
        let grids = build_grids(&pb, &aug, &gains).unwrap();
        let one = one_step_worst_case(&aug, &grids, &l, &rho, 0.995).unwrap();
        assert!((one.worst_image - 0.5).abs() < 1e-12);
        assert!(one.passes(0.5, 1e-12) && !one.passes(0.49, 1e-12));
    }

    #[test]
    fn rank_deficient_l_is_rejected() {
        let pb = contractive_scalar();
        let gains = GainSchedule::zeros(1, 1, 1);
        let l = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(certify(&pb, &gains, &l, &[1.0, 1.0], 0.995, 1e-9), Err(Error::RankDeficientL));
    }
}
