//! Multi-start design of the gains together with `Λ = {𝕃ξ ≤ 1}` and `Λ⁰ = {𝕃ξ ≤ ρ}`.
//!
//! The full bilinear program is solved by sequential LP (see [`crate::bilinear`]); every
//! few iterations the iterate is certified from scratch and the best certified design so
//! far is kept, so the recorded objective never decreases within a start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bilinear::{BilinearProgram, Slp, SlpOptions, SlpStatus};
use crate::certification::{certify_with, Certificate};
use crate::closed_loop::{build_grids, GainSchedule};
use crate::conditions::CandidateSolution;
use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::matrix::Matrix;
use crate::plant::{augment, AugmentedSystem, LpvProblem};
use crate::polyhedron::support_over;
use crate::scalar::Real;

/// A direction `ψ` (length `n_ξ`) whose scaled copy `γψ` must lie in `Λ`. With `free_input`
/// the input part of `ψ` is chosen by the optimizer within `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction<T> {
    pub psi: Vec<T>,
    pub free_input: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableBounds<T> {
    pub l: (T, T),
    pub gains: (T, T),
    pub multiplier_max: T,
    pub gamma_max: T,
    pub lambda_max: T,
}

impl<T: Real> Default for VariableBounds<T> {
    fn default() -> Self {
        Self {
            l: (T::of(-100.0), T::of(100.0)),
            gains: (T::of(-100.0), T::of(100.0)),
            multiplier_max: T::of(100.0),
            gamma_max: T::of(100.0),
            lambda_max: T::of(0.9999),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig<T> {
    pub l_r: usize,
    pub theta: T,
    pub directions: Vec<Direction<T>>,
    pub bounds: VariableBounds<T>,
    pub starts: usize,
    pub sweeps: usize,
    pub iterations_per_sweep: usize,
    /// Stop a start when the certified objective gains less than this over `stall_window` sweeps.
    pub stall_tol: T,
    pub stall_window: usize,
    pub seed: u64,
    pub eps1: T,
    /// The first iterate is `Ξ` shrunk by this factor.
    pub initial_shrink: T,
    pub restoration_iterations: usize,
    pub certify_tol: T,
}

impl<T: Real> SynthesisConfig<T> {
    pub fn new(l_r: usize, theta: T, directions: Vec<Direction<T>>) -> Self {
        Self {
            l_r,
            theta,
            directions,
            bounds: VariableBounds::default(),
            starts: 16,
            sweeps: 60,
            iterations_per_sweep: 5,
            stall_tol: T::of(1e-6),
            stall_window: 20,
            seed: 0,
            eps1: T::of(0.995),
            initial_shrink: T::of(4.0),
            restoration_iterations: 60,
            certify_tol: T::of(1e-6),
        }
    }

    fn uses_directions(&self) -> bool {
        self.theta < T::one()
    }

    pub fn validate(&self, aug: &AugmentedSystem<T>) -> Result<()> {
        let nxi = aug.dims.n_xi();
        let lxi = aug.xi.n_rows();
        if !(self.theta >= T::zero() && self.theta <= T::one()) {
            return Err(Error::InvalidConfig(format!("theta = {} outside [0, 1]", self.theta)));
        }
        if self.uses_directions() && self.directions.is_empty() {
            return Err(Error::InvalidConfig("theta < 1 needs at least one direction".into()));
        }
        if self.l_r <= nxi {
            return Err(Error::InvalidConfig(format!("l_r = {} must exceed the state dimension {nxi}", self.l_r)));
        }
        if self.l_r < lxi {
            return Err(Error::InvalidConfig(format!(
                "l_r = {} is smaller than the {lxi} constraint rows the initial set is built from",
                self.l_r
            )));
        }
        if let Some(d) = self.directions.iter().find(|d| d.psi.len() != nxi) {
            return Err(Error::InvalidConfig(format!("direction of length {} for state dimension {nxi}", d.psi.len())));
        }
        if self.starts == 0 || self.iterations_per_sweep == 0 {
            return Err(Error::InvalidConfig("starts and iterations per sweep must be positive".into()));
        }
        if !(self.eps1 > T::zero() && self.eps1 < T::one()) {
            return Err(Error::InvalidConfig(format!("eps1 = {} outside (0, 1)", self.eps1)));
        }
        if !(self.initial_shrink >= T::one()) {
            return Err(Error::InvalidConfig("initial shrink must be at least 1".into()));
        }
        Ok(())
    }
}

/// Variable offsets of the bilinear program.
#[derive(Debug, Clone)]
struct Layout {
    nv: usize,
    nx: usize,
    nu: usize,
    ny: usize,
    nxi: usize,
    lr: usize,
    ld: usize,
    lud: usize,
    l: usize,
    k: usize,
    kb: usize,
    kh: usize,
    h: usize,
    v: usize,
    g: usize,
    q: usize,
    t: usize,
    gam: usize,
    /// Offset of the free input part of each direction, if any.
    wu: Vec<Option<usize>>,
    rho: usize,
    lam: usize,
}

impl Layout {
    fn l(&self, r: usize, c: usize) -> usize {
        self.l + r * self.nxi + c
    }
    fn k(&self, i: usize, m: usize, y: usize) -> usize {
        self.k + (i * self.nu + m) * self.ny + y
    }
    fn kb(&self, i: usize, m: usize, c: usize) -> usize {
        self.kb + (i * self.nu + m) * self.nu + c
    }
    fn kh(&self, j: usize, m: usize, y: usize) -> usize {
        self.kh + (j * self.nu + m) * self.ny + y
    }
    fn h(&self, j: usize, i: usize, r: usize, k: usize) -> usize {
        self.h + ((j * self.nv + i) * self.lr + r) * self.lr + k
    }
    fn v(&self, j: usize, i: usize, r: usize, k: usize) -> usize {
        self.v + ((j * self.nv + i) * self.lr + r) * self.ld + k
    }
    fn g(&self, r: usize, k: usize) -> usize {
        self.g + r * self.lr + k
    }
    fn q(&self, j: usize, i: usize, r: usize, k: usize) -> usize {
        self.q + ((j * self.nv + i) * self.lud + r) * self.lr + k
    }
    fn t(&self, j: usize, i: usize, r: usize, k: usize) -> usize {
        self.t + ((j * self.nv + i) * self.lud + r) * self.ld + k
    }
}

fn build_program<T: Real>(
    problem: &LpvProblem<T>,
    aug: &AugmentedSystem<T>,
    cfg: &SynthesisConfig<T>,
) -> (BilinearProgram<T>, Layout) {
    let d = aug.dims;
    let (nv, nx, nu, ny, np, ne) = (d.n_v, d.n_x, d.n_u, d.n_y, d.n_p, d.n_eta);
    let nxi = d.n_xi();
    let nd = d.n_d();
    let lr = cfg.l_r;
    let dm = aug.dbig.p();
    let ld = dm.rows();
    let xx = aug.xi.p();
    let lxi = xx.rows();
    let ud = aug.udelta.clone();
    let lud = ud.as_ref().map_or(0, |u| u.rows());
    let b = &cfg.bounds;
    let zero = T::zero();
    let one = T::one();

    let mut p = BilinearProgram::default();
    let l0 = p.add_vars(lr * nxi, b.l.0, b.l.1);
    let k0 = p.add_vars(nv * nu * ny, b.gains.0, b.gains.1);
    let kb0 = p.add_vars(nv * nu * nu, b.gains.0, b.gains.1);
    let kh0 = p.add_vars(nv * nu * ny, b.gains.0, b.gains.1);
    let h0 = p.add_vars(nv * nv * lr * lr, zero, b.multiplier_max);
    let v0 = p.add_vars(nv * nv * lr * ld, zero, b.multiplier_max);
    let g0 = p.add_vars(lxi * lr, zero, b.multiplier_max);
    let q0 = p.add_vars(nv * nv * lud * lr, zero, b.multiplier_max);
    let t0 = p.add_vars(nv * nv * lud * ld, zero, b.multiplier_max);
    let dirs: &[Direction<T>] = if cfg.uses_directions() { &cfg.directions } else { &[] };
    let gam0 = p.add_vars(dirs.len(), zero, b.gamma_max);
    let wu: Vec<Option<usize>> = dirs
        .iter()
        .map(|dir| dir.free_input.then(|| p.add_vars(nu, -b.gamma_max, b.gamma_max)))
        .collect();
    let rho0 = p.add_vars(lr, zero, one);
    let lam = p.add_vars(1, zero, b.lambda_max);
    let lay = Layout {
        nv,
        nx,
        nu,
        ny,
        nxi,
        lr,
        ld,
        lud,
        l: l0,
        k: k0,
        kb: kb0,
        kh: kh0,
        h: h0,
        v: v0,
        g: g0,
        q: q0,
        t: t0,
        gam: gam0,
        wu,
        rho: rho0,
        lam,
    };

    let tb = dirs.len();
    for t in 0..tb {
        p.objective[gam0 + t] = (one - cfg.theta) / T::of(tb as f64);
    }
    for r in 0..lr {
        p.objective[rho0 + r] = -cfg.theta / T::of(lr as f64);
    }
    p.objective[lam] = T::of(-1e-4);

    let c = &problem.c;
    let de = &problem.deta;
    for i in 0..nv {
        let a = problem.a.vertex(i);
        let bi = problem.b.vertex(i);
        let bp = problem.bp.vertex(i);
        let ca = c * a;
        let cb = c * bi;
        let cbp = c * bp;
        for j in 0..nv {
            for r in 0..lr {
                // H𝕃 = 𝕃𝒜ᶜˡ, column by column.
                for col in 0..nxi {
                    let mut lin = Vec::new();
                    let mut bil: Vec<(usize, usize, T)> = (0..lr).map(|k| (lay.h(j, i, r, k), lay.l(k, col), one)).collect();
                    for q in 0..nx {
                        let aq = if col < nx { a[(q, col)] } else { bi[(q, col - nx)] };
                        if aq != zero {
                            lin.push((lay.l(r, q), -aq));
                        }
                    }
                    for m in 0..nu {
                        let lu = lay.l(r, nx + m);
                        if col < nx {
                            for y in 0..ny {
                                if c[(y, col)] != zero {
                                    bil.push((lu, lay.k(i, m, y), -c[(y, col)]));
                                }
                                if ca[(y, col)] != zero {
                                    bil.push((lu, lay.kh(j, m, y), -ca[(y, col)]));
                                }
                            }
                        } else {
                            let cc = col - nx;
                            if m == cc {
                                lin.push((lu, -one));
                            }
                            bil.push((lu, lay.kb(i, m, cc), -one));
                            for y in 0..ny {
                                if cb[(y, cc)] != zero {
                                    bil.push((lu, lay.kh(j, m, y), -cb[(y, cc)]));
                                }
                            }
                        }
                    }
                    p.push(lin, bil, true, zero);
                }
                // V𝔻 = 𝕃ℬᶜˡ.
                for col in 0..nd {
                    let mut lin: Vec<(usize, T)> =
                        (0..ld).filter(|&k| dm[(k, col)] != zero).map(|k| (lay.v(j, i, r, k), dm[(k, col)])).collect();
                    let mut bil = Vec::new();
                    for m in 0..nu {
                        let lu = lay.l(r, nx + m);
                        for y in 0..ny {
                            if col < np {
                                if cbp[(y, col)] != zero {
                                    bil.push((lu, lay.kh(j, m, y), -cbp[(y, col)]));
                                }
                            } else if col < np + ne {
                                if de[(y, col - np)] != zero {
                                    bil.push((lu, lay.k(i, m, y), -de[(y, col - np)]));
                                }
                            } else if de[(y, col - np - ne)] != zero {
                                bil.push((lu, lay.kh(j, m, y), -de[(y, col - np - ne)]));
                            }
                        }
                    }
                    if col < np {
                        for q in 0..nx {
                            if bp[(q, col)] != zero {
                                lin.push((lay.l(r, q), -bp[(q, col)]));
                            }
                        }
                    }
                    p.push(lin, bil, true, zero);
                }
                // Contraction and ultimate bound budgets.
                let mut lin: Vec<(usize, T)> = (0..lr).map(|k| (lay.h(j, i, r, k), one)).collect();
                lin.extend((0..ld).map(|k| (lay.v(j, i, r, k), one)));
                lin.push((lam, -one));
                p.push(lin, vec![], false, zero);
                let mut lin: Vec<(usize, T)> = (0..ld).map(|k| (lay.v(j, i, r, k), one)).collect();
                lin.push((rho0 + r, -cfg.eps1));
                let bil = (0..lr).map(|k| (lay.h(j, i, r, k), rho0 + k, one)).collect();
                p.push(lin, bil, false, zero);
            }
            if let Some(ud) = &ud {
                for r in 0..lud {
                    for col in 0..nxi {
                        let bil = (0..lr).map(|k| (lay.q(j, i, r, k), lay.l(k, col), one)).collect();
                        let mut lin = Vec::new();
                        for m in 0..nu {
                            let u = ud[(r, m)];
                            if u == zero {
                                continue;
                            }
                            for y in 0..ny {
                                if col < nx {
                                    lin.push((lay.k(i, m, y), -u * c[(y, col)]));
                                    lin.push((lay.kh(j, m, y), -u * ca[(y, col)]));
                                } else {
                                    lin.push((lay.kh(j, m, y), -u * cb[(y, col - nx)]));
                                }
                            }
                            if col >= nx {
                                lin.push((lay.kb(i, m, col - nx), -u));
                            }
                        }
                        p.push(lin, bil, true, zero);
                    }
                    for col in 0..nd {
                        let mut lin: Vec<(usize, T)> =
                            (0..ld).filter(|&k| dm[(k, col)] != zero).map(|k| (lay.t(j, i, r, k), dm[(k, col)])).collect();
                        for m in 0..nu {
                            let u = ud[(r, m)];
                            if u == zero {
                                continue;
                            }
                            for y in 0..ny {
                                if col < np {
                                    lin.push((lay.kh(j, m, y), -u * cbp[(y, col)]));
                                } else if col < np + ne {
                                    lin.push((lay.k(i, m, y), -u * de[(y, col - np)]));
                                } else {
                                    lin.push((lay.kh(j, m, y), -u * de[(y, col - np - ne)]));
                                }
                            }
                        }
                        p.push(lin, vec![], true, zero);
                    }
                    let mut lin: Vec<(usize, T)> = (0..lr).map(|k| (lay.q(j, i, r, k), one)).collect();
                    lin.extend((0..ld).map(|k| (lay.t(j, i, r, k), one)));
                    p.push(lin, vec![], false, one);
                }
            }
        }
    }
    // Λ inside the constraint set.
    for r in 0..lxi {
        for col in 0..nxi {
            p.push(vec![], (0..lr).map(|k| (lay.g(r, k), lay.l(k, col), one)).collect(), true, xx[(r, col)]);
        }
        p.push((0..lr).map(|k| (lay.g(r, k), one)).collect(), vec![], false, one);
    }
    // γψ inside Λ.
    for (t, dir) in dirs.iter().enumerate() {
        let g = gam0 + t;
        for r in 0..lr {
            let mut bil: Vec<(usize, usize, T)> = Vec::new();
            for q in 0..nxi {
                let free = q >= nx && dir.free_input;
                if !free && dir.psi[q] != zero {
                    bil.push((lay.l(r, q), g, dir.psi[q]));
                }
            }
            if let Some(w) = lay.wu[t] {
                bil.extend((0..nu).map(|m| (lay.l(r, nx + m), w + m, one)));
            }
            p.push(vec![], bil, false, one);
        }
        if let Some(w) = lay.wu[t] {
            for m in 0..nu {
                p.push(vec![(w + m, one), (g, -one)], vec![], false, zero);
                p.push(vec![(w + m, -one), (g, -one)], vec![], false, zero);
            }
        }
    }
    (p, lay)
}

/// Starting point of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGuess<T> {
    pub l: Matrix<T>,
    pub gains: GainSchedule<T>,
    pub rho: Vec<T>,
    pub lambda: T,
    pub j: Matrix<T>,
}

/// `𝕃` stacks the augmented constraint rows and `l_r − l_ξ` perturbed copies scaled to
/// support 1 over the constraint set, all multiplied by the initial shrink factor.
pub fn initial_guess<T: Real>(aug: &AugmentedSystem<T>, cfg: &SynthesisConfig<T>, rng: &mut ChaCha8Rng) -> Result<InitialGuess<T>> {
    let d = aug.dims;
    let nxi = d.n_xi();
    let xx = aug.xi.p();
    let lxi = xx.rows();
    let ones = vec![T::one(); lxi];
    let mut rows: Vec<Vec<T>> = xx.to_rows();
    while rows.len() < cfg.l_r {
        let base = xx.row(rng.gen_range(0..lxi));
        let cand: Vec<T> = base.iter().map(|&v| v + T::of(rng.gen_range(-0.5..0.5))).collect();
        let s = support_over(xx, &ones, &cand)?.map(|s| s.0).ok_or(Error::UnboundedSet)?;
        if s > T::of(1e-6) {
            rows.push(cand.into_iter().map(|v| v / s).collect());
        }
    }
    let l = Matrix::from_rows(&rows)?.scale(cfg.initial_shrink);
    let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| T::of(rng.gen_range(-0.2..0.2)));
    let k = (0..d.n_v).map(|_| draw(d.n_u, d.n_y)).collect();
    let kbar = (0..d.n_v).map(|_| draw(d.n_u, d.n_u)).collect();
    let khat = (0..d.n_v).map(|_| draw(d.n_u, d.n_y)).collect();
    let gains = GainSchedule::new(k, kbar, khat)?;
    let j = l.left_pseudo_inverse().ok_or(Error::RankDeficientL)?;
    debug_assert_eq!(j.shape(), (nxi, cfg.l_r));
    Ok(InitialGuess { l, gains, rho: vec![T::of(0.5); cfg.l_r], lambda: T::of(0.99), j })
}

/// Largest `γ ≤ γ_max` with `γψ ∈ Λ`, choosing free input parts in `[−1, 1]`; returns
/// `(γ, ψ used)`.
pub fn direction_scale<T: Real>(l: &Matrix<T>, n_x: usize, dir: &Direction<T>, gamma_max: T) -> Result<(T, Vec<T>)> {
    let nxi = l.cols();
    let nu = nxi - n_x;
    let mut lp = LpProblem::new(1 + nu);
    let mut obj = vec![T::zero(); 1 + nu];
    obj[0] = T::one();
    lp.set_objective(obj);
    lp.set_bounds(0, T::zero(), gamma_max);
    for m in 0..nu {
        lp.set_free(1 + m);
    }
    for r in 0..l.rows() {
        let lr = l.row(r);
        let mut coef = T::zero();
        let mut row = Vec::new();
        for q in 0..nxi {
            if q >= n_x && dir.free_input {
                row.push((1 + q - n_x, lr[q]));
            } else {
                coef = coef + lr[q] * dir.psi[q];
            }
        }
        row.push((0, coef));
        lp.add_le(row, T::one());
    }
    if dir.free_input {
        for m in 0..nu {
            lp.add_le(vec![(1 + m, T::one()), (0, -T::one())], T::zero());
            lp.add_le(vec![(1 + m, -T::one()), (0, -T::one())], T::zero());
        }
    }
    let s = lp.solve()?.optimal().ok_or_else(|| Error::SolverError("direction LP failed".into()))?;
    let g = s.x[0];
    let mut psi = dir.psi.clone();
    if dir.free_input {
        for m in 0..nu {
            psi[n_x + m] = if g > T::zero() { (s.x[1 + m] / g).max(-T::one()).min(T::one()) } else { T::zero() };
        }
    }
    Ok((g, psi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord<T> {
    pub sweep: usize,
    /// Objective of the best certified design so far.
    pub objective: Option<T>,
    /// Largest constraint violation of the current iterate.
    pub violation: T,
    pub radius: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome<T> {
    pub start: usize,
    pub history: Vec<SweepRecord<T>>,
    pub best: Option<(T, CandidateSolution<T>, Certificate<T>)>,
    pub final_violation: T,
    pub final_profile: Vec<(String, f64)>,
    pub iterations: usize,
    /// Set when a subproblem failed numerically and the start stopped early.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult<T> {
    pub candidate: CandidateSolution<T>,
    pub certificate: Certificate<T>,
    pub objective: T,
    pub best_start: usize,
    pub starts: Vec<StartOutcome<T>>,
}

impl<T: Real> SynthesisResult<T> {
    pub fn history(&self) -> Vec<&[SweepRecord<T>]> {
        self.starts.iter().map(|s| s.history.as_slice()).collect()
    }
}

struct Context<'a, T> {
    problem: &'a LpvProblem<T>,
    aug: AugmentedSystem<T>,
    cfg: &'a SynthesisConfig<T>,
    prog: BilinearProgram<T>,
    lay: Layout,
}

impl<'a, T: Real> Context<'a, T> {
    fn gains_of(&self, z: &[T]) -> GainSchedule<T> {
        let lay = &self.lay;
        let (nv, nu, ny) = (lay.nv, lay.nu, lay.ny);
        let k = (0..nv).map(|i| Matrix::from_fn(nu, ny, |m, y| z[lay.k(i, m, y)])).collect();
        let kbar = (0..nv).map(|i| Matrix::from_fn(nu, nu, |m, c| z[lay.kb(i, m, c)])).collect();
        let khat = (0..nv).map(|j| Matrix::from_fn(nu, ny, |m, y| z[lay.kh(j, m, y)])).collect();
        GainSchedule::new(k, kbar, khat).expect("layout shapes")
    }

    fn l_of(&self, z: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.lay.lr, self.lay.nxi, |r, c| z[self.lay.l(r, c)])
    }

    fn rho_of(&self, z: &[T]) -> Vec<T> {
        (0..self.lay.lr).map(|r| z[self.lay.rho + r]).collect()
    }

    fn certify_point(&self, l: &Matrix<T>, rho: &[T], gains: &GainSchedule<T>, tol: T) -> Result<Certificate<T>> {
        let grids = build_grids(self.problem, &self.aug, gains)?;
        certify_with(&self.aug, &grids, gains, l, rho, self.cfg.eps1, tol)
    }

    /// Objective value with exact direction scalings.
    fn score(&self, cert: &Certificate<T>) -> Result<(T, Vec<T>, Vec<Vec<T>>)> {
        let cand = &cert.candidate;
        let mut gammas = Vec::new();
        let mut psis = Vec::new();
        for dir in &self.cfg.directions {
            let (g, psi) = direction_scale(&cand.l, self.lay.nx, dir, self.cfg.bounds.gamma_max)?;
            gammas.push(g);
            psis.push(psi);
        }
        let theta = self.cfg.theta;
        let mut j = T::zero();
        if self.cfg.uses_directions() {
            let tb = T::of(gammas.len() as f64);
            j = j + (T::one() - theta) * gammas.iter().copied().sum::<T>() / tb;
        }
        j = j - theta * cand.rho.iter().copied().sum::<T>() / T::of(cand.rho.len() as f64);
        Ok((j, gammas, psis))
    }

    fn initial_point(&self, guess: &InitialGuess<T>) -> Result<Vec<T>> {
        let lay = &self.lay;
        let mut z = vec![T::zero(); self.prog.n_vars()];
        for r in 0..lay.lr {
            for c in 0..lay.nxi {
                z[lay.l(r, c)] = guess.l[(r, c)];
            }
            z[lay.rho + r] = guess.rho[r];
        }
        for i in 0..lay.nv {
            for m in 0..lay.nu {
                for y in 0..lay.ny {
                    z[lay.k(i, m, y)] = guess.gains.k[i][(m, y)];
                    z[lay.kh(i, m, y)] = guess.gains.khat[i][(m, y)];
                }
                for c in 0..lay.nu {
                    z[lay.kb(i, m, c)] = guess.gains.kbar[i][(m, c)];
                }
            }
        }
        z[lay.lam] = guess.lambda;
        // Exact minimal multipliers for the starting point.
        let cert = self.certify_point(&guess.l, &guess.rho, &guess.gains, T::infinity())?;
        let cand = &cert.candidate;
        let (nv, lr, ld, lud) = (lay.nv, lay.lr, lay.ld, lay.lud);
        for j in 0..nv {
            for i in 0..nv {
                for r in 0..lr {
                    for k in 0..lr {
                        z[lay.h(j, i, r, k)] = cand.h[(j * lr + r, i * lr + k)];
                    }
                    for k in 0..ld {
                        z[lay.v(j, i, r, k)] = cand.v[(j * lr + r, i * ld + k)];
                    }
                }
                for r in 0..lud {
                    for k in 0..lr {
                        z[lay.q(j, i, r, k)] = cand.q[(j * lud + r, i * lr + k)];
                    }
                    for k in 0..ld {
                        z[lay.t(j, i, r, k)] = cand.t[(j * lud + r, i * ld + k)];
                    }
                }
            }
        }
        for r in 0..cand.g.rows() {
            for k in 0..lr {
                z[lay.g(r, k)] = cand.g[(r, k)];
            }
        }
        if self.cfg.uses_directions() {
            for (t, dir) in self.cfg.directions.iter().enumerate() {
                let (g, psi) = direction_scale(&guess.l, lay.nx, dir, self.cfg.bounds.gamma_max)?;
                z[lay.gam + t] = g;
                if let Some(w) = lay.wu[t] {
                    for m in 0..lay.nu {
                        z[w + m] = g * psi[lay.nx + m];
                    }
                }
            }
        }
        self.prog.clamp(&mut z);
        Ok(z)
    }

    fn run_start(&self, start: usize) -> Result<StartOutcome<T>> {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(start as u64);
        let guess = initial_guess(&self.aug, cfg, &mut rng)?;
        let z0 = self.initial_point(&guess)?;
        let mut restore = Slp::new(&self.prog, z0, SlpOptions::restore(0.05));
        let mut failure = numerical(restore.run(&self.prog, cfg.restoration_iterations))?.err();
        let mut iterations = restore.iterations;
        let mut slp = Slp::new(&self.prog, restore.z, SlpOptions::optimize(10.0, 0.3));

        let mut history = Vec::new();
        let mut best: Option<(T, CandidateSolution<T>, Certificate<T>)> = None;
        let mut last_profile = Vec::new();
        for sweep in 0..cfg.sweeps {
            if failure.is_some() {
                break;
            }
            let status = match numerical(slp.run(&self.prog, cfg.iterations_per_sweep))? {
                Ok(s) => s,
                Err(msg) => {
                    failure = Some(msg);
                    break;
                }
            };
            let z = &slp.z;
            let l = self.l_of(z);
            let rho = self.rho_of(z);
            let gains = self.gains_of(z);
            match self.certify_point(&l, &rho, &gains, cfg.certify_tol) {
                Ok(cert) => {
                    last_profile = cert.residuals.entries().iter().map(|(n, v)| (n.to_string(), v.to_f64_lossy())).collect();
                    if cert.is_certified() {
                        let (score, gammas, psis) = self.score(&cert)?;
                        if best.as_ref().map_or(true, |b| score > b.0) {
                            let mut cand = cert.candidate.clone();
                            cand.gammas = gammas;
                            cand.psis = psis;
                            best = Some((score, cand, cert));
                        }
                    }
                }
                Err(Error::RankDeficientL) => last_profile = vec![("left_inverse".into(), f64::INFINITY)],
                Err(Error::NumericalFailure(_) | Error::SolverError(_)) => {
                    last_profile = vec![("certification".into(), f64::INFINITY)]
                }
                Err(e) => return Err(e),
            }
            history.push(SweepRecord {
                sweep,
                objective: best.as_ref().map(|b| b.0),
                violation: self.prog.max_violation(z),
                radius: slp.radius,
            });
            if status != SlpStatus::Running {
                break;
            }
            let w = cfg.stall_window;
            if history.len() > w {
                let now = history[history.len() - 1].objective;
                let then = history[history.len() - 1 - w].objective;
                if let (Some(a), Some(b)) = (now, then) {
                    if a - b < cfg.stall_tol {
                        break;
                    }
                }
            }
        }
        iterations += slp.iterations;
        Ok(StartOutcome {
            start,
            history,
            final_violation: self.prog.max_violation(&slp.z),
            final_profile: last_profile,
            best,
            iterations,
            failure,
        })
    }
}

/// Splits numerical solver failures, which end a start, from real errors.
fn numerical<V>(r: Result<V>) -> Result<std::result::Result<V, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::NumericalFailure(_) | Error::SolverError(_))) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Runs all starts (in parallel on the current rayon pool) and returns the best certified
/// design by objective, then smaller `λ*`, then lower start index.
pub fn synthesize<T: Real>(problem: &LpvProblem<T>, cfg: &SynthesisConfig<T>) -> Result<SynthesisResult<T>> {
    let aug = augment(problem)?;
    cfg.validate(&aug)?;
    let (prog, lay) = build_program(problem, &aug, cfg);
    let ctx = Context { problem, aug, cfg, prog, lay };
    let outcomes: Vec<Result<StartOutcome<T>>> = (0..cfg.starts).into_par_iter().map(|s| ctx.run_start(s)).collect();
    let mut starts = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        starts.push(o?);
    }
    let mut pick: Option<usize> = None;
    for (k, s) in starts.iter().enumerate() {
        let Some((score, _, cert)) = &s.best else { continue };
        let better = match pick.and_then(|p| starts[p].best.as_ref()) {
            None => true,
            Some((bs, _, bc)) => *score > *bs || (*score == *bs && cert.lambda_star < bc.lambda_star),
        };
        if better {
            pick = Some(k);
        }
    }
    match pick {
        Some(k) => {
            let (objective, candidate, certificate) = starts[k].best.clone().expect("picked start has a design");
            Ok(SynthesisResult { candidate, certificate, objective, best_start: starts[k].start, starts })
        }
        None => {
            let worst = starts
                .iter()
                .min_by(|a, b| a.final_violation.partial_cmp(&b.final_violation).unwrap_or(std::cmp::Ordering::Equal))
                .expect("at least one start");
            Err(Error::NoFeasibleStart {
                best_violation: worst.final_violation.to_f64_lossy(),
                profile: worst.final_profile.clone(),
            })
        }
    }
}
