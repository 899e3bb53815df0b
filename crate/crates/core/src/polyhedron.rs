//! H-representation polyhedra, the Farkas containment check, and low-dimensional geometry
//! (vertices, volume, projection).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp::{LpOutcome, LpProblem};
use crate::matrix::{dot, Matrix};
use crate::scalar::Real;

/// `{x : P x ≤ φ}` with `φ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolyhedron<T> {
    p: Matrix<T>,
    phi: Vec<T>,
}

impl<T: Real> HPolyhedron<T> {
    pub fn new(p: Matrix<T>, phi: Vec<T>) -> Result<Self> {
        let (l, n) = p.shape();
        if l == 0 || n == 0 {
            return Err(Error::InvalidPolyhedron("needs at least one row and one column".into()));
        }
        if phi.len() != l {
            return Err(Error::InvalidDimension(format!("{} bounds for {l} rows", phi.len())));
        }
        if !p.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolyhedron("non-finite data".into()));
        }
        if let Some(i) = phi.iter().position(|&v| v <= T::zero()) {
            return Err(Error::InvalidPolyhedron(format!("bound {i} is not positive")));
        }
        let tiny = T::of(1e-12);
        if let Some(i) = (0..l).position(|i| norm(p.row(i)) < tiny) {
            return Err(Error::InvalidPolyhedron(format!("row {i} has near-zero norm")));
        }
        Ok(Self { p, phi })
    }

    /// `{x : P x ≤ 1}`.
    pub fn unit(p: Matrix<T>) -> Result<Self> {
        let l = p.rows();
        Self::new(p, vec![T::one(); l])
    }

    /// Axis-aligned box `lo ≤ x ≤ hi` (requires `lo < 0 < hi`).
    pub fn from_box(lo: &[T], hi: &[T]) -> Result<Self> {
        let n = lo.len();
        let mut rows = Vec::with_capacity(2 * n);
        let mut phi = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut r = vec![T::zero(); n];
            r[i] = T::one();
            rows.push(r.clone());
            phi.push(hi[i]);
            r[i] = -T::one();
            rows.push(r);
            phi.push(-lo[i]);
        }
        Self::new(Matrix::from_rows(&rows)?, phi)
    }

    pub fn p(&self) -> &Matrix<T> {
        &self.p
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.p.cols()
    }

    pub fn n_rows(&self) -> usize {
        self.p.rows()
    }

    /// Same set with every row divided by its bound, so the bound vector is all ones.
    pub fn normalized(&self) -> Self {
        let p = Matrix::from_fn(self.n_rows(), self.dim(), |i, j| self.p[(i, j)] / self.phi[i]);
        Self { p, phi: vec![T::one(); self.n_rows()] }
    }

    pub fn has_unit_bounds(&self) -> bool {
        self.phi.iter().all(|&v| v == T::one())
    }

    /// Largest `P_r x − φ_r`.
    pub fn max_violation(&self, x: &[T]) -> T {
        (0..self.n_rows())
            .map(|i| dot(self.p.row(i), x) - self.phi[i])
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        self.max_violation(x) <= tol
    }

    /// `max cᵀx` over the set; `None` when unbounded in that direction.
    pub fn support(&self, c: &[T]) -> Result<Option<(T, Vec<T>)>> {
        support_over(&self.p, &self.phi, c)
    }

    pub fn is_bounded(&self) -> Result<bool> {
        let n = self.dim();
        for i in 0..n {
            for s in [T::one(), -T::one()] {
                let mut c = vec![T::zero(); n];
                c[i] = s;
                if self.support(&c)?.is_none() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Image of the set under `x ↦ x / s` for `s > 0`, i.e. the rows `s·P x ≤ φ`.
    pub fn scaled_rows(&self, s: T) -> Self {
        Self { p: self.p.scale(s), phi: self.phi.clone() }
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

/// `max cᵀx` over `{x : Px ≤ φ}` with no sign requirement on `φ`.
pub fn support_over<T: Real>(p: &Matrix<T>, phi: &[T], c: &[T]) -> Result<Option<(T, Vec<T>)>> {
    let n = p.cols();
    let mut lp = LpProblem::new(n);
    for j in 0..n {
        lp.set_free(j);
    }
    lp.set_objective(c.to_vec());
    for i in 0..p.rows() {
        lp.add_dense_le(p.row(i), phi[i]);
    }
    match lp.solve()? {
        LpOutcome::Optimal(s) => Ok(Some((s.value, s.x))),
        LpOutcome::Unbounded => Ok(None),
        LpOutcome::Infeasible => Err(Error::SolverError("support LP infeasible for a set containing the origin".into())),
    }
}

/// Nonnegative `Q` with `Q P₁ = P₂` and `Q φ₁ ≤ φ₂` certifying `inner ⊆ outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentCertificate<T> {
    pub q: Matrix<T>,
    pub residual_eq: T,
    pub residual_ineq: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Containment<T> {
    Contained(ContainmentCertificate<T>),
    /// Row of `outer` that no admissible multiplier satisfies, with the excess `min Q_r φ₁ − φ₂,r`
    /// (infinite when `P₂,r` is outside the cone of `inner`'s rows).
    NotContained { row: usize, excess: T },
}

impl<T> Containment<T> {
    pub fn is_contained(&self) -> bool {
        matches!(self, Containment::Contained(_))
    }
}

/// Row-wise multiplier LP: `min q·φ₁` s.t. `q P₁ = target`, `q ≥ 0`. `None` if infeasible.
pub fn min_multiplier<T: Real>(p1: &Matrix<T>, phi1: &[T], target: &[T]) -> Result<Option<(T, Vec<T>)>> {
    let (l1, n) = p1.shape();
    let mut lp = LpProblem::new(l1);
    lp.set_objective(phi1.iter().map(|&v| -v).collect());
    for d in 0..n {
        let coeffs = (0..l1).map(|k| (k, p1[(k, d)])).collect();
        lp.add_eq(coeffs, target[d]);
    }
    match lp.solve()? {
        LpOutcome::Optimal(s) => Ok(Some((-s.value, s.x))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::SolverError("multiplier LP unbounded".into())),
    }
}

/// Extended Farkas check of `inner ⊆ outer`.
pub fn check_containment<T: Real>(
    inner: &HPolyhedron<T>,
    outer: &HPolyhedron<T>,
    tol: T,
) -> Result<Containment<T>> {
    if inner.dim() != outer.dim() {
        return Err(Error::InvalidDimension(format!(
            "containment between dimensions {} and {}",
            inner.dim(),
            outer.dim()
        )));
    }
    let (l1, l2) = (inner.n_rows(), outer.n_rows());
    let mut q = Matrix::zeros(l2, l1);
    for r in 0..l2 {
        match min_multiplier(&inner.p, &inner.phi, outer.p.row(r))? {
            None => return Ok(Containment::NotContained { row: r, excess: T::infinity() }),
            Some((value, qr)) => {
                if value > outer.phi[r] + tol {
                    return Ok(Containment::NotContained { row: r, excess: value - outer.phi[r] });
                }
                for (k, v) in qr.into_iter().enumerate() {
                    q[(r, k)] = v.max(T::zero());
                }
            }
        }
    }
    let residual_eq = (&q * &inner.p).max_abs_diff(&outer.p);
    let qphi = q.mul_vec(&inner.phi);
    let residual_ineq = qphi
        .iter()
        .zip(&outer.phi)
        .fold(T::zero(), |m, (&a, &b)| m.max(a - b));
    Ok(Containment::Contained(ContainmentCertificate { q, residual_eq, residual_ineq }))
}

/// All vertices of a bounded polyhedron of dimension at most 4.
pub fn enumerate_vertices<T: Real>(poly: &HPolyhedron<T>) -> Result<Vec<Vec<T>>> {
    let n = poly.dim();
    if n > 4 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !poly.is_bounded()? {
        return Err(Error::UnboundedSet);
    }
    let l = poly.n_rows();
    let feas_tol = T::of(1e-9);
    let dedupe_tol = T::of(1e-9);
    let mut out: Vec<Vec<T>> = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    if n > l {
        return Ok(out);
    }
    loop {
        let a = Matrix::from_fn(n, n, |i, j| poly.p[(subset[i], j)]);
        let b: Vec<T> = subset.iter().map(|&i| poly.phi[i]).collect();
        if let Some(x) = a.solve(&b) {
            let scale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
            if x.iter().all(|v| v.is_finite()) && poly.max_violation(&x) <= feas_tol * scale {
                let dup = out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| (*a - *b).abs() <= dedupe_tol * scale));
                if !dup {
                    out.push(x);
                }
            }
        }
        if !next_subset(&mut subset, l) {
            break;
        }
    }
    Ok(out)
}

pub(crate) fn next_subset(s: &mut [usize], total: usize) -> bool {
    let k = s.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if s[i] < total - k + i {
            s[i] += 1;
            for t in i + 1..k {
                s[t] = s[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Volume with a standard error (zero for the exact low-dimensional computation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate<T> {
    pub value: T,
    pub std_error: T,
}

/// Monte-Carlo sample count for 4-dimensional volumes.
pub const MC_SAMPLES: usize = 1_000_000;

/// Exact for `n ≤ 3`; Monte-Carlo over the bounding box for `n = 4`.
pub fn volume<T: Real>(poly: &HPolyhedron<T>) -> Result<VolumeEstimate<T>> {
    let verts = enumerate_vertices(poly)?;
    let exact = |value| Ok(VolumeEstimate { value, std_error: T::zero() });
    if verts.is_empty() {
        return exact(T::zero());
    }
    match poly.dim() {
        1 => {
            let (lo, hi) = verts.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), v| (a.min(v[0]), b.max(v[0])));
            exact(hi - lo)
        }
        2 => {
            let pts: Vec<[T; 2]> = verts.iter().map(|v| [v[0], v[1]]).collect();
            exact(polygon_area(&convex_hull_2d(&pts)))
        }
        3 => exact(polytope_volume_3d(poly, &verts)),
        _ => Ok(monte_carlo_volume(poly, &verts, MC_SAMPLES, 0x5eed)),
    }
}

fn polytope_volume_3d<T: Real>(poly: &HPolyhedron<T>, verts: &[Vec<T>]) -> T {
    let k = T::of(verts.len() as f64);
    let c: Vec<T> = (0..3).map(|d| verts.iter().map(|v| v[d]).sum::<T>() / k).collect();
    let scale = verts.iter().flatten().fold(T::one(), |m, v| m.max(v.abs()));
    let tol = T::of(1e-8) * scale;
    let mut seen: Vec<Vec<usize>> = Vec::new();
    let mut vol = T::zero();
    for r in 0..poly.n_rows() {
        let row = poly.p.row(r);
        let on: Vec<usize> = (0..verts.len()).filter(|&i| (dot(row, &verts[i]) - poly.phi[r]).abs() <= tol).collect();
        if on.len() < 3 || seen.contains(&on) {
            continue;
        }
        let face: Vec<&Vec<T>> = on.iter().map(|&i| &verts[i]).collect();
        let fk = T::of(face.len() as f64);
        let fc: Vec<T> = (0..3).map(|d| face.iter().map(|v| v[d]).sum::<T>() / fk).collect();
        // In-plane basis from the face normal.
        let nrm = norm(row);
        let nvec: Vec<T> = row.iter().map(|&v| v / nrm).collect();
        let u = {
            let d: Vec<T> = (0..3).map(|i| face[0][i] - fc[i]).collect();
            let nd = norm(&d);
            d.into_iter().map(|x| x / nd).collect::<Vec<T>>()
        };
        let w = [
            nvec[1] * u[2] - nvec[2] * u[1],
            nvec[2] * u[0] - nvec[0] * u[2],
            nvec[0] * u[1] - nvec[1] * u[0],
        ];
        let mut ordered: Vec<(T, &Vec<T>)> = face
            .iter()
            .map(|v| {
                let d: Vec<T> = (0..3).map(|i| v[i] - fc[i]).collect();
                (dot(&d, &w).atan2(dot(&d, &u)), *v)
            })
            .collect();
        ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for t in 0..ordered.len() {
            let a = ordered[t].1;
            let b = ordered[(t + 1) % ordered.len()].1;
            vol = vol + tetra_volume(&c, &fc, a, b);
        }
        seen.push(on);
    }
    vol
}

fn tetra_volume<T: Real>(a: &[T], b: &[T], c: &[T], d: &[T]) -> T {
    let u: Vec<T> = (0..3).map(|i| b[i] - a[i]).collect();
    let v: Vec<T> = (0..3).map(|i| c[i] - a[i]).collect();
    let w: Vec<T> = (0..3).map(|i| d[i] - a[i]).collect();
    let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0]) + u[2] * (v[0] * w[1] - v[1] * w[0]);
    det.abs() / T::of(6.0)
}

fn monte_carlo_volume<T: Real>(poly: &HPolyhedron<T>, verts: &[Vec<T>], samples: usize, seed: u64) -> VolumeEstimate<T> {
    let n = poly.dim();
    let lo: Vec<f64> = (0..n).map(|d| verts.iter().map(|v| v[d].to_f64_lossy()).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..n).map(|d| verts.iter().map(|v| v[d].to_f64_lossy()).fold(f64::NEG_INFINITY, f64::max)).collect();
    let box_vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut x = vec![T::zero(); n];
    for _ in 0..samples {
        for d in 0..n {
            x[d] = T::of(lo[d] + (hi[d] - lo[d]) * rng.gen::<f64>());
        }
        if poly.contains(&x, T::zero()) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    let se = box_vol * (frac * (1.0 - frac) / samples as f64).sqrt();
    VolumeEstimate { value: T::of(box_vol * frac), std_error: T::of(se) }
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull_2d<T: Real>(points: &[[T; 2]]) -> Vec<[T; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[T; 2], a: &[T; 2], b: &[T; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[T; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= T::zero() {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[T; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= T::zero() {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of an ordered polygon.
pub fn polygon_area<T: Real>(poly: &[[T; 2]]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut s = T::zero();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s = s + a[0] * b[1] - a[1] * b[0];
    }
    s.abs() / T::of(2.0)
}

/// Fourier–Motzkin projection onto `keep` (in the given order), eliminating at most two
/// coordinates, with LP-based removal of redundant rows.
pub fn project<T: Real>(poly: &HPolyhedron<T>, keep: &[usize]) -> Result<HPolyhedron<T>> {
    let n = poly.dim();
    if keep.is_empty() || keep.iter().any(|&k| k >= n) {
        return Err(Error::InvalidDimension(format!("projection indices {keep:?} for dimension {n}")));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(Error::InvalidDimension("repeated projection index".into()));
    }
    let eliminate: Vec<usize> = (0..n).filter(|d| !keep.contains(d)).collect();
    if eliminate.len() > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !poly.is_bounded()? {
        return Err(Error::UnboundedSet);
    }
    let mut rows: Vec<(Vec<T>, T)> = (0..poly.n_rows()).map(|i| (poly.p.row(i).to_vec(), poly.phi[i])).collect();
    rows = prune_redundant(rows)?;
    for &e in &eliminate {
        let (mut pos, mut neg, mut out) = (Vec::new(), Vec::new(), Vec::new());
        let tiny = T::of(1e-12);
        for r in rows {
            if r.0[e] > tiny {
                pos.push(r);
            } else if r.0[e] < -tiny {
                neg.push(r);
            } else {
                let mut a = r.0;
                a[e] = T::zero();
                out.push((a, r.1));
            }
        }
        for p in &pos {
            for q in &neg {
                let (sp, sq) = (-q.0[e], p.0[e]);
                let mut a: Vec<T> = p.0.iter().zip(&q.0).map(|(&x, &y)| sp * x + sq * y).collect();
                a[e] = T::zero();
                let b = sp * p.1 + sq * q.1;
                let nrm = norm(&a);
                if nrm > tiny * b.abs().max(T::one()) {
                    out.push((a.iter().map(|&v| v / nrm).collect(), b / nrm));
                }
            }
        }
        rows = prune_redundant(out)?;
    }
    let p = Matrix::from_fn(rows.len(), keep.len(), |i, j| rows[i].0[keep[j]]);
    let phi = rows.iter().map(|r| r.1).collect();
    HPolyhedron::new(p, phi)
}

/// Drops rows whose omission leaves the LP support value within 1e-9 of their bound.
fn prune_redundant<T: Real>(mut rows: Vec<(Vec<T>, T)>) -> Result<Vec<(Vec<T>, T)>> {
    let tol = T::of(1e-9);
    let mut i = 0;
    while i < rows.len() {
        let others: Vec<&(Vec<T>, T)> = rows.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, r)| r).collect();
        let redundant = if others.is_empty() {
            false
        } else {
            let n = rows[i].0.len();
            let p = Matrix::from_fn(others.len(), n, |a, b| others[a].0[b]);
            let phi: Vec<T> = others.iter().map(|r| r.1).collect();
            match support_over(&p, &phi, &rows[i].0)? {
                Some((v, _)) => v <= rows[i].1 + tol,
                None => false,
            }
        };
        if redundant {
            rows.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(rows)
}

/// Vertices of the projection onto two coordinates as a counter-clockwise polygon.
pub fn projected_polygon<T: Real>(poly: &HPolyhedron<T>, dims: [usize; 2]) -> Result<Vec<[T; 2]>> {
    let proj = project(poly, &dims)?;
    let verts = enumerate_vertices(&proj)?;
    let pts: Vec<[T; 2]> = verts.iter().map(|v| [v[0], v[1]]).collect();
    Ok(convex_hull_2d(&pts))
}
