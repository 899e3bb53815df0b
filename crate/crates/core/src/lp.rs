//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row gets a logical variable (`a·x + s = b`), so the all-logical basis is always
//! available as a cold start and phase 1 minimizes the sum of bound violations of the
//! basic variables. A previous [`Basis`] can be passed back in to warm start a solve of
//! a structurally identical problem.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
struct Row<T> {
    coeffs: Vec<(usize, T)>,
    sense: Sense,
    rhs: T,
}

/// `maximize cᵀx` subject to sparse rows and per-variable bounds.
///
/// Variables default to `[0, ∞)`.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    objective: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    rows: Vec<Row<T>>,
    trivially_infeasible: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_pivots: usize,
    pub refactor_interval: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_pivots: 50_000,
            refactor_interval: 50,
            primal_tol: 1e-9,
            dual_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 40,
        }
    }
}

/// Basis description usable as a warm start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    head: Vec<usize>,
    at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Row multipliers for the maximization; nonnegative on `≤` rows at optimality.
    pub duals: Vec<T>,
    /// `c − Aᵀ·duals` per structural variable.
    pub reduced_costs: Vec<T>,
    pub basis: Basis,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome<T> {
    Optimal(LpSolution<T>),
    Infeasible,
    Unbounded,
}

impl<T> LpOutcome<T> {
    pub fn optimal(self) -> Option<LpSolution<T>> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl<T: Real> LpProblem<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![T::zero(); n_vars],
            lower: vec![T::zero(); n_vars],
            upper: vec![T::infinity(); n_vars],
            rows: Vec::new(),
            trivially_infeasible: false,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, c: Vec<T>) {
        assert_eq!(c.len(), self.n_vars(), "objective length");
        self.objective = c;
    }

    pub fn set_objective_coeff(&mut self, j: usize, c: T) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lower: T, upper: T) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, T::neg_infinity(), T::infinity());
    }

    pub fn bounds(&self, j: usize) -> (T, T) {
        (self.lower[j], self.upper[j])
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, sense: Sense, rhs: T) -> usize {
        let n = self.n_vars();
        assert!(coeffs.iter().all(|&(j, _)| j < n), "row references unknown variable");
        let coeffs: Vec<(usize, T)> = coeffs.into_iter().filter(|&(_, a)| a != T::zero()).collect();
        if coeffs.is_empty() {
            let tol = T::of(1e-12);
            let bad = match sense {
                Sense::Le => rhs < -tol,
                Sense::Ge => rhs > tol,
                Sense::Eq => rhs.abs() > tol,
            };
            self.trivially_infeasible |= bad;
        }
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, T)>, rhs: T) -> usize {
        self.add_row(coeffs, Sense::Le, rhs)
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, T)>, rhs: T) -> usize {
        self.add_row(coeffs, Sense::Ge, rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, T)>, rhs: T) -> usize {
        self.add_row(coeffs, Sense::Eq, rhs)
    }

    /// Adds `a·x ≤ rhs` from a dense coefficient slice.
    pub fn add_dense_le(&mut self, a: &[T], rhs: T) -> usize {
        let coeffs = a.iter().enumerate().map(|(j, &v)| (j, v)).collect();
        self.add_le(coeffs, rhs)
    }

    pub fn set_rhs(&mut self, i: usize, rhs: T) {
        self.rows[i].rhs = rhs;
    }

    pub fn rhs(&self, i: usize) -> T {
        self.rows[i].rhs
    }

    /// True when construction already found an empty row with an unsatisfiable bound.
    pub fn flagged_infeasible(&self) -> bool {
        self.trivially_infeasible
    }

    /// Row activities `A·x`.
    pub fn activities(&self, x: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| r.coeffs.iter().fold(T::zero(), |s, &(j, a)| s + a * x[j])).collect()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut v = T::zero();
        for (r, act) in self.rows.iter().zip(self.activities(x)) {
            let e = match r.sense {
                Sense::Le => act - r.rhs,
                Sense::Ge => r.rhs - act,
                Sense::Eq => (act - r.rhs).abs(),
            };
            v = v.max(e);
        }
        for j in 0..self.n_vars() {
            v = v.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        v
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).fold(T::zero(), |s, (&c, &v)| s + c * v)
    }

    pub fn solve(&self) -> Result<LpOutcome<T>> {
        self.solve_with(None, &LpOptions::default())
    }

    pub fn solve_warm(&self, basis: Option<&Basis>) -> Result<LpOutcome<T>> {
        self.solve_with(basis, &LpOptions::default())
    }

    pub fn solve_with(&self, basis: Option<&Basis>, opts: &LpOptions) -> Result<LpOutcome<T>> {
        if self.trivially_infeasible {
            return Ok(LpOutcome::Infeasible);
        }
        if let Some((j, _)) = self
            .objective
            .iter()
            .enumerate()
            .find(|(j, c)| !c.is_finite() || self.lower[*j].is_nan() || self.upper[*j].is_nan())
        {
            return Err(Error::SolverError(format!("non-finite data for variable {j}")));
        }
        if (0..self.n_vars()).any(|j| self.lower[j] > self.upper[j]) {
            return Ok(LpOutcome::Infeasible);
        }
        if self.rows.iter().any(|r| !r.rhs.is_finite() || r.coeffs.iter().any(|(_, a)| !a.is_finite())) {
            return Err(Error::SolverError("non-finite constraint data".into()));
        }
        let mut s = Simplex::new(self, opts);
        s.install_basis(basis);
        s.run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct Simplex<'a, T> {
    lp: &'a LpProblem<T>,
    opts: LpOptions,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, T)>>,
    cost: Vec<T>,
    lb: Vec<T>,
    ub: Vec<T>,
    b: Vec<T>,
    x: Vec<T>,
    head: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<T>,
    devex: Vec<T>,
    since_refactor: usize,
    pivots: usize,
    degenerate_streak: usize,
}

const NONBASIC: usize = usize::MAX;

impl<'a, T: Real> Simplex<'a, T> {
    fn new(lp: &'a LpProblem<T>, opts: &LpOptions) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                cols[j].push((i, a));
            }
        }
        for i in 0..m {
            cols.push(vec![(i, T::one())]);
        }
        let mut cost: Vec<T> = lp.objective.iter().map(|&c| -c).collect();
        cost.extend(std::iter::repeat(T::zero()).take(m));
        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        for r in &lp.rows {
            let (l, u) = match r.sense {
                Sense::Le => (T::zero(), T::infinity()),
                Sense::Eq => (T::zero(), T::zero()),
                Sense::Ge => (T::neg_infinity(), T::zero()),
            };
            lb.push(l);
            ub.push(u);
        }
        Self {
            lp,
            opts: *opts,
            m,
            n,
            cols,
            cost,
            lb,
            ub,
            b: lp.rows.iter().map(|r| r.rhs).collect(),
            x: vec![T::zero(); n + m],
            head: Vec::new(),
            pos: vec![NONBASIC; n + m],
            binv: Vec::new(),
            devex: vec![T::one(); n + m],
            since_refactor: 0,
            pivots: 0,
            degenerate_streak: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + self.m
    }

    fn nonbasic_value(&self, j: usize, at_upper: bool) -> T {
        let (l, u) = (self.lb[j], self.ub[j]);
        if at_upper && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            T::zero()
        }
    }

    fn install_basis(&mut self, basis: Option<&Basis>) {
        let total = self.total();
        let usable = basis.filter(|b| {
            b.head.len() == self.m && b.at_upper.len() == total && {
                let mut seen = vec![false; total];
                b.head.iter().all(|&j| j < total && !std::mem::replace(&mut seen[j], true))
            }
        });
        match usable {
            Some(b) => {
                self.head = b.head.clone();
                for j in 0..total {
                    self.x[j] = self.nonbasic_value(j, b.at_upper[j]);
                }
            }
            None => {
                self.head = (self.n..total).collect();
                for j in 0..total {
                    self.x[j] = self.nonbasic_value(j, false);
                }
            }
        }
        self.pos = vec![NONBASIC; total];
        for (p, &j) in self.head.iter().enumerate() {
            self.pos[j] = p;
        }
    }

    fn column_dot(&self, j: usize, v: &[T]) -> T {
        self.cols[j].iter().fold(T::zero(), |s, &(i, a)| s + a * v[i])
    }

    /// Recomputes the basis inverse and basic values; dependent basic columns are
    /// swapped for logicals of uncovered rows.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        for _attempt in 0..3 {
            let mut work = vec![T::zero(); m * m];
            for (p, &j) in self.head.iter().enumerate() {
                for &(i, a) in &self.cols[j] {
                    work[i * m + p] = a;
                }
            }
            let mut inv = vec![T::zero(); m * m];
            for i in 0..m {
                inv[i * m + i] = T::one();
            }
            let mut pivot_row_of = vec![usize::MAX; m];
            let mut row_used = vec![false; m];
            let mut failed = Vec::new();
            // Unit columns first keeps elimination fill low.
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by_key(|&p| (self.cols[self.head[p]].len() != 1, p));
            let tiny = T::of(1e-11);
            for &p in &order {
                let mut best = usize::MAX;
                let mut best_val = T::zero();
                for i in 0..m {
                    if !row_used[i] {
                        let v = work[i * m + p].abs();
                        if v > best_val {
                            best_val = v;
                            best = i;
                        }
                    }
                }
                if best == usize::MAX || best_val <= tiny {
                    failed.push(p);
                    continue;
                }
                let r = best;
                row_used[r] = true;
                pivot_row_of[p] = r;
                let piv = work[r * m + p];
                for k in 0..m {
                    work[r * m + k] = work[r * m + k] / piv;
                    inv[r * m + k] = inv[r * m + k] / piv;
                }
                // The pivot rows are usually sparse, so eliminate over their nonzeros only.
                let wr: Vec<(usize, T)> =
                    (0..m).filter_map(|k| Some((k, work[r * m + k])).filter(|e| e.1 != T::zero())).collect();
                let ir: Vec<(usize, T)> =
                    (0..m).filter_map(|k| Some((k, inv[r * m + k])).filter(|e| e.1 != T::zero())).collect();
                for i in 0..m {
                    if i == r {
                        continue;
                    }
                    let f = work[i * m + p];
                    if f == T::zero() {
                        continue;
                    }
                    for &(k, v) in &wr {
                        work[i * m + k] = work[i * m + k] - f * v;
                    }
                    for &(k, v) in &ir {
                        inv[i * m + k] = inv[i * m + k] - f * v;
                    }
                }
            }
            if failed.is_empty() {
                let mut binv = vec![T::zero(); m * m];
                for p in 0..m {
                    let r = pivot_row_of[p];
                    binv[p * m..(p + 1) * m].copy_from_slice(&inv[r * m..(r + 1) * m]);
                }
                self.binv = binv;
                self.since_refactor = 0;
                self.recompute_basics();
                return Ok(());
            }
            let free_rows: Vec<usize> = (0..m).filter(|&i| !row_used[i]).collect();
            for (&p, &r) in failed.iter().zip(&free_rows) {
                let old = self.head[p];
                let logical = self.n + r;
                if self.pos[logical] != NONBASIC {
                    continue;
                }
                self.pos[old] = NONBASIC;
                let v = self.x[old];
                let at_upper = self.ub[old].is_finite()
                    && (!self.lb[old].is_finite() || (self.ub[old] - v).abs() < (v - self.lb[old]).abs());
                self.x[old] = self.nonbasic_value(old, at_upper);
                self.head[p] = logical;
                self.pos[logical] = p;
            }
        }
        Err(Error::NumericalFailure("basis repair did not converge".into()))
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.total() {
            if self.pos[j] == NONBASIC && self.x[j] != T::zero() {
                for &(i, a) in &self.cols[j] {
                    r[i] = r[i] - a * self.x[j];
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let v = row.iter().zip(&r).fold(T::zero(), |s, (&a, &b)| s + a * b);
            self.x[self.head[p]] = v;
        }
    }

    fn infeasibility(&self) -> T {
        let tol = T::of(self.opts.primal_tol);
        let mut s = T::zero();
        for &j in &self.head {
            let v = self.x[j];
            if v < self.lb[j] - tol {
                s = s + (self.lb[j] - v);
            } else if v > self.ub[j] + tol {
                s = s + (v - self.ub[j]);
            }
        }
        s
    }

    fn phase_cost(&self, phase: Phase, j: usize) -> T {
        match phase {
            Phase::Two => self.cost[j],
            Phase::One => {
                if self.pos[j] == NONBASIC {
                    return T::zero();
                }
                let tol = T::of(self.opts.primal_tol);
                let v = self.x[j];
                if v < self.lb[j] - tol {
                    -T::one()
                } else if v > self.ub[j] + tol {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    fn duals(&self, phase: Phase) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for p in 0..m {
            let c = self.phase_cost(phase, self.head[p]);
            if c == T::zero() {
                continue;
            }
            let row = &self.binv[p * m..(p + 1) * m];
            for (yi, &a) in y.iter_mut().zip(row) {
                *yi = *yi + c * a;
            }
        }
        y
    }

    /// Entering candidate: (index, direction +1/-1, reduced cost).
    fn price(&self, phase: Phase, y: &[T], bland: bool) -> Option<(usize, T)> {
        let dtol = T::of(self.opts.dual_tol);
        let mut best: Option<(usize, T)> = None;
        let mut best_score = T::zero();
        for j in 0..self.total() {
            if self.pos[j] != NONBASIC {
                continue;
            }
            let (l, u) = (self.lb[j], self.ub[j]);
            if l == u {
                continue;
            }
            let d = self.phase_cost(phase, j) - self.column_dot(j, y);
            let v = self.x[j];
            let can_up = v < u;
            let can_down = v > l;
            let dir = if d < -dtol && can_up {
                T::one()
            } else if d > dtol && can_down {
                -T::one()
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let score = d * d / self.devex[j];
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let mut alpha = vec![T::zero(); m];
        for &(i, a) in &self.cols[j] {
            for p in 0..m {
                let v = self.binv[p * m + i];
                if v != T::zero() {
                    alpha[p] = alpha[p] + v * a;
                }
            }
        }
        alpha
    }

    fn run(&mut self) -> Result<LpOutcome<T>> {
        self.refactor()?;
        let mut verified_optimal = 0;
        loop {
            if self.pivots >= self.opts.max_pivots {
                return Err(Error::NumericalFailure(format!(
                    "pivot budget of {} exhausted",
                    self.opts.max_pivots
                )));
            }
            if self.since_refactor >= self.opts.refactor_interval {
                self.refactor()?;
            }
            let phase = if self.infeasibility() > T::zero() { Phase::One } else { Phase::Two };
            let y = self.duals(phase);
            let bland = self.degenerate_streak >= self.opts.bland_after;
            let Some((q, dir)) = self.price(phase, &y, bland) else {
                // Confirm the verdict on a fresh factorization before returning it.
                if self.since_refactor > 0 && verified_optimal < 3 {
                    verified_optimal += 1;
                    self.refactor()?;
                    continue;
                }
                if phase == Phase::One {
                    return Ok(LpOutcome::Infeasible);
                }
                return Ok(LpOutcome::Optimal(self.solution(&y)));
            };
            let alpha = self.ftran(q);
            match self.ratio_test(phase, q, dir, &alpha) {
                Step::Unbounded => {
                    if phase == Phase::One {
                        return Err(Error::NumericalFailure("unbounded phase-1 ray".into()));
                    }
                    return Ok(LpOutcome::Unbounded);
                }
                Step::Flip(t) => {
                    self.move_along(q, dir, t, &alpha);
                    self.note_step(t);
                    self.pivots += 1;
                }
                Step::Pivot(r, t, leave_value) => {
                    self.move_along(q, dir, t, &alpha);
                    self.note_step(t);
                    self.pivot(q, r, &alpha, leave_value);
                    self.pivots += 1;
                }
            }
        }
    }

    fn note_step(&mut self, t: T) {
        if t <= T::of(1e-12) {
            self.degenerate_streak += 1;
        } else {
            self.degenerate_streak = 0;
        }
    }

    fn move_along(&mut self, q: usize, dir: T, t: T, alpha: &[T]) {
        if t == T::zero() {
            return;
        }
        self.x[q] = self.x[q] + dir * t;
        for (p, &a) in alpha.iter().enumerate() {
            if a != T::zero() {
                let j = self.head[p];
                self.x[j] = self.x[j] - dir * t * a;
            }
        }
    }

    /// Harris two-pass ratio test with phase-1 breakpoints at violated bounds.
    fn ratio_test(&self, phase: Phase, q: usize, dir: T, alpha: &[T]) -> Step<T> {
        let ptol = T::of(self.opts.primal_tol);
        let pivtol = T::of(self.opts.pivot_tol);
        let range = self.ub[q] - self.lb[q];
        // (position, exact ratio, bound value reached)
        let mut cands: Vec<(usize, T, T, T)> = Vec::new();
        let mut theta_max = T::infinity();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= pivtol {
                continue;
            }
            let j = self.head[p];
            let rate = -dir * a;
            let v = self.x[j];
            let (l, u) = (self.lb[j], self.ub[j]);
            let below = v < l - ptol;
            let above = v > u + ptol;
            let target = if phase == Phase::One && below {
                if rate > T::zero() {
                    Some(l)
                } else {
                    None
                }
            } else if phase == Phase::One && above {
                if rate < T::zero() {
                    Some(u)
                } else {
                    None
                }
            } else if rate < T::zero() {
                if l.is_finite() {
                    Some(l)
                } else {
                    None
                }
            } else if u.is_finite() {
                Some(u)
            } else {
                None
            };
            let Some(bound) = target else { continue };
            let exact = ((bound - v) / rate).max(T::zero());
            let relaxed = if below || above {
                exact
            } else {
                ((bound - v).abs() + ptol) / rate.abs()
            };
            theta_max = theta_max.min(relaxed);
            cands.push((p, exact, bound, a.abs()));
        }
        if range.is_finite() && range <= theta_max {
            return Step::Flip(range);
        }
        if cands.is_empty() {
            return Step::Unbounded;
        }
        let bland = self.degenerate_streak >= self.opts.bland_after;
        let mut chosen: Option<(usize, T, T, T)> = None;
        for c in cands.into_iter().filter(|c| c.1 <= theta_max) {
            chosen = match chosen {
                None => Some(c),
                Some(best) => {
                    let better = if bland {
                        self.head[c.0] < self.head[best.0]
                    } else {
                        c.3 > best.3 || (c.3 == best.3 && self.head[c.0] < self.head[best.0])
                    };
                    if better {
                        Some(c)
                    } else {
                        Some(best)
                    }
                }
            };
        }
        let (p, t, bound, _) = chosen.expect("theta_max is attained by a candidate");
        Step::Pivot(p, t, bound)
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &[T], leave_value: T) {
        let m = self.m;
        let leaving = self.head[r];
        let ar = alpha[r];
        // Devex reference weights from the pivot row.
        let row_r: Vec<T> = self.binv[r * m..(r + 1) * m].to_vec();
        let wq = self.devex[q].max(T::one());
        for j in 0..self.total() {
            if self.pos[j] != NONBASIC || j == q {
                continue;
            }
            let arj = self.column_dot(j, &row_r);
            if arj != T::zero() {
                let ratio = arj / ar;
                let w = ratio * ratio * wq;
                if w > self.devex[j] {
                    self.devex[j] = w;
                }
            }
        }
        self.devex[leaving] = (wq / (ar * ar)).max(T::one());

        for k in 0..m {
            self.binv[r * m + k] = self.binv[r * m + k] / ar;
        }
        let pivot_row: Vec<(usize, T)> =
            (0..m).filter_map(|k| Some((k, self.binv[r * m + k])).filter(|e| e.1 != T::zero())).collect();
        for (p, &a) in alpha.iter().enumerate() {
            if p == r || a == T::zero() {
                continue;
            }
            let row = &mut self.binv[p * m..(p + 1) * m];
            for &(k, v) in &pivot_row {
                row[k] = row[k] - a * v;
            }
        }
        self.x[leaving] = leave_value;
        self.pos[leaving] = NONBASIC;
        self.head[r] = q;
        self.pos[q] = r;
        self.since_refactor += 1;
    }

    fn solution(&self, y: &[T]) -> LpSolution<T> {
        let x: Vec<T> = self.x[..self.n].to_vec();
        let value = self.lp.objective_value(&x);
        let duals: Vec<T> = y.iter().map(|&v| -v).collect();
        let reduced_costs = (0..self.n).map(|j| self.lp.objective[j] - self.column_dot(j, &duals)).collect();
        let at_upper = (0..self.total())
            .map(|j| self.pos[j] == NONBASIC && self.ub[j].is_finite() && self.x[j] == self.ub[j] && self.lb[j] != self.ub[j])
            .collect();
        LpSolution {
            x,
            value,
            duals,
            reduced_costs,
            basis: Basis { head: self.head.clone(), at_upper },
            pivots: self.pivots,
        }
    }
}

enum Step<T> {
    Unbounded,
    Flip(T),
    Pivot(usize, T, T),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound() {
        let mut lp = LpProblem::<f64>::new(1);
        lp.set_objective(vec![1.0]);
        lp.set_free(0);
        lp.add_le(vec![(0, 1.0)], 3.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows() {
        let mut lp = LpProblem::<f64>::new(1);
        lp.set_free(0);
        lp.add_le(vec![(0, 1.0)], -1.0);
        lp.add_le(vec![(0, -1.0)], -2.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LpProblem::<f64>::new(2);
        lp.set_objective(vec![1.0, 1.0]);
        lp.add_le(vec![(0, 1.0), (1, -1.0)], 1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn empty_row_flags_infeasibility() {
        let mut lp = LpProblem::<f64>::new(2);
        lp.add_le(vec![(0, 0.0)], -1.0);
        assert!(lp.flagged_infeasible());
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn equality_and_bounds() {
        // max x + 2y, x + y = 4, 0 <= x <= 3, 1 <= y <= 2
        let mut lp = LpProblem::<f64>::new(2);
        lp.set_objective(vec![1.0, 2.0]);
        lp.set_bounds(0, 0.0, 3.0);
        lp.set_bounds(1, 1.0, 2.0);
        lp.add_eq(vec![(0, 1.0), (1, 1.0)], 4.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        assert!((s.value - 6.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_reuses_basis() {
        let mut lp = LpProblem::<f64>::new(2);
        lp.set_objective(vec![3.0, 2.0]);
        lp.add_le(vec![(0, 1.0), (1, 1.0)], 4.0);
        lp.add_le(vec![(0, 1.0), (1, 3.0)], 6.0);
        lp.add_le(vec![(0, 1.0)], 3.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        let again = lp.solve_warm(Some(&s.basis)).unwrap().optimal().unwrap();
        assert_eq!(again.pivots, 0);
        assert_eq!(again.value, s.value);
        lp.set_rhs(0, 3.5);
        let moved = lp.solve_warm(Some(&s.basis)).unwrap().optimal().unwrap();
        assert!((moved.value - 10.0).abs() < 1e-12);
    }
}
