//! Closed-loop rollouts: constraint checks, containment in Λ, entry into Λ⁰.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closed_loop::{control_law_step, step_closed_loop, ClosedLoopGrids};
use crate::conditions::CandidateSolution;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::plant::{AugmentedSystem, LpvProblem};
use crate::polyhedron::{enumerate_vertices, support_over, HPolyhedron};
use crate::polytope_algebra::Simplex;
use crate::scalar::Real;

/// Containment and constraint checks use this slack.
pub const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialRule<T> {
    /// A random vertex of Λ per rollout.
    Vertices,
    /// Hit-and-run samples inside Λ.
    HitAndRun,
    /// Cycled through by rollout index.
    List(Vec<Vec<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleRule<T> {
    /// Jumps between simplex vertices at every step.
    VertexHop,
    Uniform,
    /// `α₀, α₁, …`, repeated if shorter than the horizon.
    List(Vec<Vec<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceRule<T> {
    /// Vertices of 𝒫 × 𝒩 chosen greedily to push `max_r 𝕃_r ξ₊` up.
    Extreme,
    Uniform,
    /// `[p; η₊]` per step; `η₀ = 0`.
    List(Vec<Vec<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub horizon: usize,
    pub rollouts: usize,
    pub initial: InitialRule<T>,
    pub schedule: ScheduleRule<T>,
    pub disturbance: DisturbanceRule<T>,
    pub seed: u64,
    /// Slack allowed before a constraint or set check counts as violated.
    pub tol: T,
}

impl<T: Real> ScenarioConfig<T> {
    pub fn new(horizon: usize, rollouts: usize) -> Self {
        Self {
            horizon,
            rollouts,
            initial: InitialRule::Vertices,
            schedule: ScheduleRule::VertexHop,
            disturbance: DisturbanceRule::Extreme,
            seed: 0,
            tol: T::of(CHECK_TOL),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= T::zero()) {
            return Err(Error::InvalidConfig(format!("check tolerance {} is negative", self.tol)));
        }
        if self.horizon == 0 || self.rollouts == 0 {
            return Err(Error::InvalidConfig("horizon and rollouts must be at least 1".into()));
        }
        if matches!(&self.initial, InitialRule::List(v) if v.is_empty())
            || matches!(&self.schedule, ScheduleRule::List(v) if v.is_empty())
            || matches!(&self.disturbance, DisturbanceRule::List(v) if v.is_empty())
        {
            return Err(Error::InvalidConfig("user lists must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Violations {
    pub state: bool,
    pub input: bool,
    pub rate: bool,
    pub containment: bool,
    /// Left Λ⁰ after entering it.
    pub ultimate: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.state || self.input || self.rate || self.containment || self.ultimate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult<T> {
    /// `ξ_0 … ξ_K`.
    pub xi: Vec<Vec<T>>,
    /// `δu_k = u_k − u_{k−1}`; zero at `k = 0`.
    pub du: Vec<Vec<T>>,
    pub in_ultimate: Vec<bool>,
    pub entry: Option<usize>,
    /// `max_k max_r 𝕃_r ξ_k`.
    pub max_level: T,
    pub violations: Violations,
    /// Largest gap between the stepped input and the output-form control law.
    pub law_deviation: T,
    /// Largest `max_r S_r v − 1` seen for the state, input and rate sets; negative is slack.
    pub excess: Excess<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excess<T> {
    pub state: T,
    pub input: T,
    pub rate: T,
}

impl<T: Real> Excess<T> {
    fn none() -> Self {
        Self { state: T::neg_infinity(), input: T::neg_infinity(), rate: T::neg_infinity() }
    }
}

impl<T: Real> RolloutResult<T> {
    pub fn steps(&self) -> usize {
        self.xi.len() - 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rollouts: usize,
    pub state_violations: usize,
    pub input_violations: usize,
    pub rate_violations: usize,
    pub containment_violations: usize,
    pub ultimate_violations: usize,
    pub entered: usize,
    pub max_entry: Option<usize>,
    pub max_level: f64,
    pub max_law_deviation: f64,
    pub max_excess: Excess<f64>,
}

impl Default for Excess<f64> {
    fn default() -> Self {
        Excess::none()
    }
}

impl Summary {
    pub fn total_violations(&self) -> usize {
        self.state_violations
            + self.input_violations
            + self.rate_violations
            + self.containment_violations
            + self.ultimate_violations
    }

    /// Every rollout entered Λ⁰, no later than `k`.
    pub fn all_entered_by(&self, k: u64) -> bool {
        self.entered == self.rollouts && self.max_entry.map_or(false, |e| e as u64 <= k)
    }
}

#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub runs: Vec<RolloutResult<T>>,
    pub summary: Summary,
}

struct Setup<'a, T> {
    problem: &'a LpvProblem<T>,
    aug: &'a AugmentedSystem<T>,
    grids: &'a ClosedLoopGrids<T>,
    cand: &'a CandidateSolution<T>,
    cfg: &'a ScenarioConfig<T>,
    lambda_vertices: Vec<Vec<T>>,
    p_vertices: Vec<Vec<T>>,
    n_vertices: Vec<Vec<T>>,
    p_box: (Vec<T>, Vec<T>),
    n_box: (Vec<T>, Vec<T>),
    /// Strictly interior point of Λ for hit-and-run.
    center: Option<Vec<T>>,
}

/// Runs `cfg.rollouts` independent rollouts in parallel; rollout `i` draws from the stream
/// `(cfg.seed, i)`.
pub fn rollout<T: Real>(
    problem: &LpvProblem<T>,
    aug: &AugmentedSystem<T>,
    grids: &ClosedLoopGrids<T>,
    cand: &CandidateSolution<T>,
    cfg: &ScenarioConfig<T>,
) -> Result<Simulation<T>> {
    cfg.validate()?;
    let d = aug.dims;
    let lam = cand.invariant_set()?;
    let p_set = HPolyhedron::unit(problem.p.clone())?;
    let n_set = HPolyhedron::unit(problem.n.clone())?;
    let lambda_vertices = match cfg.initial {
        InitialRule::Vertices => enumerate_vertices(&lam)?,
        _ => Vec::new(),
    };
    if let InitialRule::List(v) = &cfg.initial {
        if let Some(x) = v.iter().find(|x| x.len() != d.n_xi()) {
            return Err(Error::InvalidDimension(format!("initial state of length {}", x.len())));
        }
    }
    if let ScheduleRule::List(v) = &cfg.schedule {
        for a in v {
            Simplex::new(a.clone())?;
            if a.len() != d.n_v {
                return Err(Error::InvalidDimension(format!("schedule entry of length {}", a.len())));
            }
        }
    }
    if let DisturbanceRule::List(v) = &cfg.disturbance {
        if let Some(x) = v.iter().find(|x| x.len() != d.n_p + d.n_eta) {
            return Err(Error::InvalidDimension(format!("disturbance entry of length {}", x.len())));
        }
    }
    let center = match cfg.initial {
        InitialRule::HitAndRun => Some(interior_point(&lam)?),
        _ => None,
    };
    let setup = Setup {
        problem,
        aug,
        grids,
        cand,
        cfg,
        lambda_vertices,
        p_vertices: enumerate_vertices(&p_set)?,
        n_vertices: enumerate_vertices(&n_set)?,
        p_box: bounding_box(&p_set)?,
        n_box: bounding_box(&n_set)?,
        center,
    };
    let runs: Vec<RolloutResult<T>> =
        (0..cfg.rollouts).into_par_iter().map(|i| setup.run(i)).collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs);
    Ok(Simulation { runs, summary })
}

fn summarize<T: Real>(runs: &[RolloutResult<T>]) -> Summary {
    let mut s = Summary { rollouts: runs.len(), ..Summary::default() };
    for r in runs {
        let v = r.violations;
        s.state_violations += v.state as usize;
        s.input_violations += v.input as usize;
        s.rate_violations += v.rate as usize;
        s.containment_violations += v.containment as usize;
        s.ultimate_violations += v.ultimate as usize;
        if let Some(e) = r.entry {
            s.entered += 1;
            s.max_entry = Some(s.max_entry.map_or(e, |m| m.max(e)));
        }
        s.max_level = s.max_level.max(r.max_level.to_f64_lossy());
        s.max_law_deviation = s.max_law_deviation.max(r.law_deviation.to_f64_lossy());
        let e = &mut s.max_excess;
        e.state = e.state.max(r.excess.state.to_f64_lossy());
        e.input = e.input.max(r.excess.input.to_f64_lossy());
        e.rate = e.rate.max(r.excess.rate.to_f64_lossy());
    }
    s
}

fn bounding_box<T: Real>(set: &HPolyhedron<T>) -> Result<(Vec<T>, Vec<T>)> {
    let n = set.dim();
    let mut lo = vec![T::zero(); n];
    let mut hi = vec![T::zero(); n];
    for k in 0..n {
        let mut e = vec![T::zero(); n];
        e[k] = T::one();
        hi[k] = set.support(&e)?.ok_or(Error::UnboundedSet)?.0;
        e[k] = -T::one();
        lo[k] = -set.support(&e)?.ok_or(Error::UnboundedSet)?.0;
    }
    Ok((lo, hi))
}

/// Chebyshev-style center: maximizes the smallest normalized slack.
fn interior_point<T: Real>(set: &HPolyhedron<T>) -> Result<Vec<T>> {
    let p = set.p();
    let n = p.cols();
    // Variables [x; t], rows P_r x + ‖P_r‖ t ≤ φ_r, maximize t.
    let mut big = Matrix::zeros(p.rows() + 1, n + 1);
    let mut phi = set.phi().to_vec();
    for r in 0..p.rows() {
        let norm = p.row(r).iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        for k in 0..n {
            big[(r, k)] = p[(r, k)];
        }
        big[(r, n)] = norm;
    }
    big[(p.rows(), n)] = -T::one();
    phi.push(T::zero());
    let mut c = vec![T::zero(); n + 1];
    c[n] = T::one();
    match support_over(&big, &phi, &c)? {
        Some((t, x)) if t > T::of(1e-9) => Ok(x[..n].to_vec()),
        _ => Err(Error::SamplingFailure("the invariant set has no interior point".into())),
    }
}

fn level<T: Real>(l: &Matrix<T>, xi: &[T]) -> Vec<T> {
    l.mul_vec(xi)
}

fn unit_violation<T: Real>(s: &Matrix<T>, v: &[T]) -> T {
    s.mul_vec(v).iter().fold(T::neg_infinity(), |m, &x| m.max(x - T::one()))
}

fn random_weights<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Simplex<T> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    Simplex::new(raw.iter().map(|v| T::of(v / s)).collect()).expect("normalized weights")
}

impl<T: Real> Setup<'_, T> {
    fn initial_state(&self, i: usize, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        match &self.cfg.initial {
            InitialRule::Vertices => Ok(self.lambda_vertices[rng.gen_range(0..self.lambda_vertices.len())].clone()),
            InitialRule::List(v) => Ok(v[i % v.len()].clone()),
            InitialRule::HitAndRun => {
                let lam = self.cand.invariant_set()?;
                let mut x = self.center.clone().expect("center computed for hit-and-run");
                for _ in 0..50 {
                    let dir: Vec<T> = (0..x.len()).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect();
                    let (lo, hi) = chord(&lam, &x, &dir);
                    if !(hi > lo) {
                        continue;
                    }
                    let t = lo + (hi - lo) * T::of(rng.gen_range(0.0..1.0));
                    for (xk, dk) in x.iter_mut().zip(&dir) {
                        *xk = *xk + t * *dk;
                    }
                }
                if lam.max_violation(&x) > T::of(CHECK_TOL) {
                    return Err(Error::SamplingFailure("hit-and-run left the set".into()));
                }
                Ok(x)
            }
        }
    }

    fn schedule(&self, k: usize, rng: &mut ChaCha8Rng) -> Simplex<T> {
        let nv = self.aug.dims.n_v;
        match &self.cfg.schedule {
            ScheduleRule::VertexHop => Simplex::vertex(nv, rng.gen_range(0..nv)),
            ScheduleRule::Uniform => random_weights(rng, nv),
            ScheduleRule::List(v) => Simplex::new(v[k % v.len()].clone()).expect("checked in rollout"),
        }
    }

    fn uniform_in(&self, set: &Matrix<T>, bx: &(Vec<T>, Vec<T>), rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
        for _ in 0..10_000 {
            let v: Vec<T> = bx.0.iter().zip(&bx.1).map(|(&l, &h)| l + (h - l) * T::of(rng.gen_range(0.0..1.0))).collect();
            if unit_violation(set, &v) <= T::zero() {
                return Ok(v);
            }
        }
        Err(Error::SamplingFailure("rejection sampling of a disturbance set failed".into()))
    }

    /// `(p, η₊)` for step `k`.
    fn disturbance(
        &self,
        k: usize,
        xi: &[T],
        eta: &[T],
        alpha: &Simplex<T>,
        alpha_plus: &Simplex<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<T>, Vec<T>)> {
        let np = self.aug.dims.n_p;
        match &self.cfg.disturbance {
            DisturbanceRule::List(v) => {
                let e = &v[k % v.len()];
                Ok((e[..np].to_vec(), e[np..].to_vec()))
            }
            DisturbanceRule::Uniform => Ok((
                self.uniform_in(&self.problem.p, &self.p_box, rng)?,
                self.uniform_in(&self.problem.n, &self.n_box, rng)?,
            )),
            DisturbanceRule::Extreme => {
                let mut best: Option<(T, usize, usize)> = None;
                // Random scan order so that ties do not always go the same way.
                let off_p = rng.gen_range(0..self.p_vertices.len());
                let off_n = rng.gen_range(0..self.n_vertices.len());
                for a in 0..self.p_vertices.len() {
                    for b in 0..self.n_vertices.len() {
                        let (ip, i_n) = ((a + off_p) % self.p_vertices.len(), (b + off_n) % self.n_vertices.len());
                        let d = [self.p_vertices[ip].as_slice(), eta, self.n_vertices[i_n].as_slice()].concat();
                        let (next, _) = step_closed_loop(self.grids, xi, &d, alpha, alpha_plus)?;
                        let score = level(&self.cand.l, &next).into_iter().fold(T::neg_infinity(), T::max);
                        if best.map_or(true, |(s, _, _)| score > s) {
                            best = Some((score, ip, i_n));
                        }
                    }
                }
                let (_, ip, i_n) = best.expect("disturbance sets have vertices");
                Ok((self.p_vertices[ip].clone(), self.n_vertices[i_n].clone()))
            }
        }
    }

    fn run(&self, index: usize) -> Result<RolloutResult<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index as u64);
        let d = self.aug.dims;
        let (nx, nu) = (d.n_x, d.n_u);
        let tol = self.cfg.tol;
        let l = &self.cand.l;
        let rho = &self.cand.rho;
        let mut xi = self.initial_state(index, &mut rng)?;
        let mut eta = match &self.cfg.disturbance {
            DisturbanceRule::Extreme => self.n_vertices[rng.gen_range(0..self.n_vertices.len())].clone(),
            DisturbanceRule::Uniform => self.uniform_in(&self.problem.n, &self.n_box, &mut rng)?,
            DisturbanceRule::List(_) => vec![T::zero(); d.n_eta],
        };
        let mut alpha = self.schedule(0, &mut rng);
        let mut out = RolloutResult {
            xi: Vec::with_capacity(self.cfg.horizon + 1),
            du: Vec::with_capacity(self.cfg.horizon + 1),
            in_ultimate: Vec::with_capacity(self.cfg.horizon + 1),
            entry: None,
            max_level: T::neg_infinity(),
            violations: Violations::default(),
            law_deviation: T::zero(),
            excess: Excess::none(),
        };
        let mut du = vec![T::zero(); nu];
        for k in 0..=self.cfg.horizon {
            let lv = level(l, &xi);
            let top = lv.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            out.max_level = out.max_level.max(top);
            let (ex, eu) = (unit_violation(&self.problem.x, &xi[..nx]), unit_violation(&self.problem.u, &xi[nx..]));
            out.excess.state = out.excess.state.max(ex);
            out.excess.input = out.excess.input.max(eu);
            let v = &mut out.violations;
            v.containment |= top > T::one() + tol;
            v.state |= ex > tol;
            v.input |= eu > tol;
            if let (Some(ud), true) = (&self.aug.udelta, k > 0) {
                let er = unit_violation(ud, &du);
                out.excess.rate = out.excess.rate.max(er);
                v.rate |= er > tol;
            }
            let inside = lv.iter().zip(rho).all(|(&a, &b)| a <= b);
            if out.entry.is_some() {
                v.ultimate |= lv.iter().zip(rho).any(|(&a, &b)| a > b + tol);
            } else if inside {
                out.entry = Some(k);
            }
            out.xi.push(xi.clone());
            out.du.push(du.clone());
            out.in_ultimate.push(inside);
            if k == self.cfg.horizon {
                break;
            }
            let alpha_plus = self.schedule(k + 1, &mut rng);
            let (p, eta_plus) = self.disturbance(k, &xi, &eta, &alpha, &alpha_plus, &mut rng)?;
            let dv = [p.as_slice(), eta.as_slice(), eta_plus.as_slice()].concat();
            let (next, step_du) = step_closed_loop(self.grids, &xi, &dv, &alpha, &alpha_plus)?;
            // Output-form law from measured outputs only.
            let y = output(self.problem, &xi[..nx], &eta);
            let y_next = output(self.problem, &next[..nx], &eta_plus);
            let u = control_law_step(&self.cand.gains, &xi[nx..], &y, &y_next, &alpha, &alpha_plus)?;
            for r in 0..nu {
                out.law_deviation = out.law_deviation.max((u[r] - next[nx + r]).abs());
            }
            du = step_du;
            xi = next;
            eta = eta_plus;
            alpha = alpha_plus;
        }
        Ok(out)
    }
}

fn output<T: Real>(problem: &LpvProblem<T>, x: &[T], eta: &[T]) -> Vec<T> {
    let a = problem.c.mul_vec(x);
    let b = problem.deta.mul_vec(eta);
    a.into_iter().zip(b).map(|(p, q)| p + q).collect()
}

/// Feasible step interval `[lo, hi]` of `x + t·dir` inside `set`.
fn chord<T: Real>(set: &HPolyhedron<T>, x: &[T], dir: &[T]) -> (T, T) {
    let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
    let pd = set.p().mul_vec(dir);
    let px = set.p().mul_vec(x);
    for r in 0..pd.len() {
        let slack = set.phi()[r] - px[r];
        if pd[r] > T::zero() {
            hi = hi.min(slack / pd[r]);
        } else if pd[r] < T::zero() {
            lo = lo.max(slack / pd[r]);
        }
    }
    (lo, hi)
}

/// Header `k,x1..,u1..,du1..,in_ultimate`.
pub fn csv_header(n_x: usize, n_u: usize) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=n_x).map(|i| format!("x{i}")));
    cols.extend((1..=n_u).map(|i| format!("u{i}")));
    cols.extend((1..=n_u).map(|i| format!("du{i}")));
    cols.push("in_ultimate".into());
    cols.join(",")
}

pub fn write_csv<T: Real>(run: &RolloutResult<T>, n_x: usize, w: &mut impl Write) -> Result<()> {
    let nu = run.xi[0].len() - n_x;
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(w, "{}", csv_header(n_x, nu)).map_err(io)?;
    for (k, (xi, du)) in run.xi.iter().zip(&run.du).enumerate() {
        let mut line = k.to_string();
        for v in xi.iter().chain(du) {
            line.push_str(&format!(",{:.16e}", v.to_f64_lossy()));
        }
        line.push_str(if run.in_ultimate[k] { ",1" } else { ",0" });
        writeln!(w, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn export_trajectory<T: Real>(run: &RolloutResult<T>, n_x: usize, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(f);
    write_csv(run, n_x, &mut w)?;
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Rows of a trajectory file as read back: `(ξ, δu, in Λ⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRows {
    pub header: Vec<String>,
    pub xi: Vec<Vec<f64>>,
    pub du: Vec<Vec<f64>>,
    pub in_ultimate: Vec<bool>,
}

pub fn read_csv(r: impl BufRead) -> Result<TrajectoryRows> {
    let bad = |m: String| Error::Io(format!("malformed trajectory file: {m}"));
    let mut lines = r.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("empty".into()))?
        .map_err(|e| Error::Io(e.to_string()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let nu = header.iter().filter(|h| h.starts_with("du")).count();
    let nxi = header.len() - 2 - nu;
    let mut out = TrajectoryRows { header, xi: Vec::new(), du: Vec::new(), in_ultimate: Vec::new() };
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Io(e.to_string()))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != out.header.len() || f[0].parse::<usize>().ok() != Some(i) {
            return Err(bad(format!("row {i}")));
        }
        let nums: Vec<f64> =
            f[1..f.len() - 1].iter().map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| bad(e.to_string()))?;
        out.xi.push(nums[..nxi].to_vec());
        out.du.push(nums[nxi..].to_vec());
        out.in_ultimate.push(f[f.len() - 1] == "1");
    }
    Ok(out)
}

pub fn import_trajectory(path: &Path) -> Result<TrajectoryRows> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(f))
}
