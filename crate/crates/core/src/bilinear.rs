//! Bilinear programs and a sequential-LP trust-region solver for them.
//!
//! A row is `Σ aₖ zₖ + Σ c·z_a·z_b  (= | ≤)  rhs`. The solver maximizes `cᵀz − μ·Σ violation`
//! with each step an LP on the linearization, ∞-norm trust region, and a second-order
//! correction that shifts the right-hand side by the curvature of the rejected step.

use crate::error::{Error, Result};
use crate::lp::{Basis, LpOutcome, LpProblem};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearRow<T> {
    pub linear: Vec<(usize, T)>,
    pub bilinear: Vec<(usize, usize, T)>,
    pub equality: bool,
    pub rhs: T,
}

impl<T: Real> BilinearRow<T> {
    pub fn value(&self, z: &[T]) -> T {
        let l = self.linear.iter().fold(T::zero(), |s, &(k, a)| s + a * z[k]);
        self.bilinear.iter().fold(l, |s, &(a, b, c)| s + c * z[a] * z[b])
    }

    pub fn violation(&self, z: &[T]) -> T {
        let v = self.value(z) - self.rhs;
        if self.equality {
            v.abs()
        } else {
            v.max(T::zero())
        }
    }

    fn curvature(&self, d: &[T]) -> T {
        self.bilinear.iter().fold(T::zero(), |s, &(a, b, c)| s + c * d[a] * d[b])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BilinearProgram<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub objective: Vec<T>,
    pub rows: Vec<BilinearRow<T>>,
}

impl<T: Real> BilinearProgram<T> {
    /// Adds a block of variables with common bounds; returns the first index.
    pub fn add_vars(&mut self, count: usize, lo: T, hi: T) -> usize {
        let start = self.lower.len();
        self.lower.extend(std::iter::repeat(lo).take(count));
        self.upper.extend(std::iter::repeat(hi).take(count));
        self.objective.extend(std::iter::repeat(T::zero()).take(count));
        start
    }

    pub fn n_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn push(&mut self, linear: Vec<(usize, T)>, bilinear: Vec<(usize, usize, T)>, equality: bool, rhs: T) {
        self.rows.push(BilinearRow { linear, bilinear, equality, rhs });
    }

    pub fn total_violation(&self, z: &[T]) -> T {
        self.rows.iter().fold(T::zero(), |s, r| s + r.violation(z))
    }

    pub fn max_violation(&self, z: &[T]) -> T {
        self.rows.iter().fold(T::zero(), |s, r| s.max(r.violation(z)))
    }

    pub fn objective_value(&self, z: &[T]) -> T {
        self.objective.iter().zip(z).fold(T::zero(), |s, (&c, &v)| s + c * v)
    }

    fn merit(&self, z: &[T], mu: T, with_objective: bool) -> T {
        let obj = if with_objective { self.objective_value(z) } else { T::zero() };
        obj - mu * self.total_violation(z)
    }

    pub fn clamp(&self, z: &mut [T]) {
        for (k, v) in z.iter_mut().enumerate() {
            *v = v.max(self.lower[k]).min(self.upper[k]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlpOptions<T> {
    pub penalty: T,
    pub initial_radius: T,
    pub max_radius: T,
    pub min_radius: T,
    /// Stop when the model predicts less than this improvement.
    pub min_predicted: T,
    /// Ignore the objective (pure feasibility restoration).
    pub feasibility_only: bool,
}

impl<T: Real> SlpOptions<T> {
    pub fn optimize(penalty: f64, radius: f64) -> Self {
        Self {
            penalty: T::of(penalty),
            initial_radius: T::of(radius),
            max_radius: T::of(10.0),
            min_radius: T::of(1e-9),
            min_predicted: T::of(1e-10),
            feasibility_only: false,
        }
    }

    pub fn restore(radius: f64) -> Self {
        Self { feasibility_only: true, ..Self::optimize(1.0, radius) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlpStatus {
    Running,
    /// Model predicts no improvement.
    Stationary,
    /// Trust region collapsed.
    RadiusCollapsed,
    /// Feasibility phase reached zero violation.
    Feasible,
}

/// Resumable SLP state.
#[derive(Debug, Clone)]
pub struct Slp<T> {
    pub z: Vec<T>,
    pub radius: T,
    pub status: SlpStatus,
    pub iterations: usize,
    merit: T,
    opts: SlpOptions<T>,
    basis: Option<Basis>,
}

struct Linearized<T> {
    lp: LpProblem<T>,
    /// LP row index of each program row.
    row_of: Vec<usize>,
    base_rhs: Vec<T>,
}

impl<T: Real> Slp<T> {
    pub fn new(prog: &BilinearProgram<T>, z0: Vec<T>, opts: SlpOptions<T>) -> Self {
        let mut z = z0;
        prog.clamp(&mut z);
        let merit = prog.merit(&z, opts.penalty, !opts.feasibility_only);
        Self { z, radius: opts.initial_radius, status: SlpStatus::Running, iterations: 0, merit, opts, basis: None }
    }

    fn linearize(&self, prog: &BilinearProgram<T>) -> Linearized<T> {
        let n = prog.n_vars();
        let z = &self.z;
        let n_eq = prog.rows.iter().filter(|r| r.equality).count();
        let n_in = prog.rows.len() - n_eq;
        let total = n + 2 * n_eq + n_in;
        let mut lp = LpProblem::new(total);
        let mut c = vec![T::zero(); total];
        if !self.opts.feasibility_only {
            c[..n].copy_from_slice(&prog.objective);
        }
        for v in c[n..].iter_mut() {
            *v = -self.opts.penalty;
        }
        lp.set_objective(c);
        for k in 0..n {
            lp.set_bounds(k, prog.lower[k].max(z[k] - self.radius), prog.upper[k].min(z[k] + self.radius));
        }
        let mut scratch = vec![T::zero(); n];
        let mut marked = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_of = Vec::with_capacity(prog.rows.len());
        let mut base_rhs = Vec::with_capacity(prog.rows.len());
        let mut next_elastic = n;
        for row in &prog.rows {
            let mut add = |k: usize, v: T| {
                if !marked[k] {
                    marked[k] = true;
                    touched.push(k);
                }
                scratch[k] = scratch[k] + v;
            };
            let mut rhs = row.rhs;
            for &(k, a) in &row.linear {
                add(k, a);
            }
            for &(a, b, cf) in &row.bilinear {
                add(a, cf * z[b]);
                add(b, cf * z[a]);
                rhs = rhs + cf * z[a] * z[b];
            }
            touched.sort_unstable();
            let mut coeffs: Vec<(usize, T)> = touched.iter().map(|&k| (k, scratch[k])).collect();
            for &k in &touched {
                scratch[k] = T::zero();
                marked[k] = false;
            }
            touched.clear();
            if row.equality {
                coeffs.push((next_elastic, T::one()));
                coeffs.push((next_elastic + 1, -T::one()));
                next_elastic += 2;
                row_of.push(lp.add_eq(coeffs, rhs));
            } else {
                coeffs.push((next_elastic, -T::one()));
                next_elastic += 1;
                row_of.push(lp.add_le(coeffs, rhs));
            }
            base_rhs.push(rhs);
        }
        Linearized { lp, row_of, base_rhs }
    }

    fn solve_lp(&mut self, lp: &LpProblem<T>, n: usize) -> Result<(Vec<T>, T)> {
        let outcome = match lp.solve_warm(self.basis.as_ref()) {
            Ok(o) => o,
            Err(_) if self.basis.is_some() => lp.solve()?,
            Err(e) => return Err(e),
        };
        match outcome {
            LpOutcome::Optimal(s) => {
                self.basis = Some(s.basis.clone());
                Ok((s.x[..n].to_vec(), s.value))
            }
            LpOutcome::Infeasible => Err(Error::NumericalFailure("trust-region LP infeasible".into())),
            LpOutcome::Unbounded => Err(Error::NumericalFailure("trust-region LP unbounded".into())),
        }
    }

    /// One trust-region iteration.
    pub fn step(&mut self, prog: &BilinearProgram<T>) -> Result<SlpStatus> {
        if self.status != SlpStatus::Running {
            return Ok(self.status);
        }
        let n = prog.n_vars();
        let with_obj = !self.opts.feasibility_only;
        if self.opts.feasibility_only && prog.total_violation(&self.z) < T::of(1e-9) {
            self.status = SlpStatus::Feasible;
            return Ok(self.status);
        }
        self.iterations += 1;
        let mut lin = self.linearize(prog);
        let (mut zn, model) = self.solve_lp(&lin.lp, n)?;
        let pred = model - self.merit;
        if pred < self.opts.min_predicted {
            self.status = SlpStatus::Stationary;
            return Ok(self.status);
        }
        let mut merit_new = prog.merit(&zn, self.opts.penalty, with_obj);
        let mut ratio = (merit_new - self.merit) / pred;
        if ratio < T::of(0.25) {
            let d: Vec<T> = zn.iter().zip(&self.z).map(|(&a, &b)| a - b).collect();
            for (k, row) in prog.rows.iter().enumerate() {
                lin.lp.set_rhs(lin.row_of[k], lin.base_rhs[k] - row.curvature(&d));
            }
            if let Ok((zs, _)) = self.solve_lp(&lin.lp, n) {
                let ms = prog.merit(&zs, self.opts.penalty, with_obj);
                let rs = (ms - self.merit) / pred;
                if rs > ratio {
                    zn = zs;
                    merit_new = ms;
                    ratio = rs;
                }
            }
        }
        if ratio > T::of(0.1) {
            self.z = zn;
            self.merit = merit_new;
            if ratio > T::of(0.5) {
                self.radius = (self.radius * T::of(2.0)).min(self.opts.max_radius);
            }
        } else {
            self.radius = self.radius * T::of(0.3);
        }
        if self.radius < self.opts.min_radius {
            self.status = SlpStatus::RadiusCollapsed;
        }
        Ok(self.status)
    }

    pub fn run(&mut self, prog: &BilinearProgram<T>, max_iterations: usize) -> Result<SlpStatus> {
        for _ in 0..max_iterations {
            if self.step(prog)? != SlpStatus::Running {
                break;
            }
        }
        Ok(self.status)
    }
}
