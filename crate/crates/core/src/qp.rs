//! Pointwise-in-time CBF-CLF quadratic program.
//!
//! ```text
//! minimize    uᵀu  (+ p·δ² when the CLF row is relaxed)
//! subject to  ζ_i(x, u) ≥ 0          one GEQ row per barrier
//!             η(x, u)   ≤ 0 (+ δ)    the CLF row
//!             u_l ≤ u ≤ u_u
//! ```
//!
//! Scalar-input problems without relaxation are solved by interval
//! intersection. Everything else goes through a dual active-set method
//! (Goldfarb–Idnani) specialized to the identity Hessian, which starts from
//! the unconstrained minimizer `u = 0` and adds violated constraints one at a
//! time.

use nalgebra::{Cholesky, DMatrix};

use crate::certificates::{LyapunovCertificate, SafetySpec};
use crate::error::{check_dim, Error, Result};
use crate::system::Vector;

/// Row feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// A row counts as active when its residual is within this of zero.
pub const ACTIVE_TOL: f64 = 1e-8;
/// KKT stationarity residual accepted by the checks.
pub const STATIONARITY_TOL: f64 = 1e-6;
/// Penalty used when CLF relaxation is enabled without an explicit weight.
pub const DEFAULT_CLF_PENALTY: f64 = 1e3;

const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `coeff·u + offset ≥ 0`
    Geq,
    /// `coeff·u + offset ≤ 0`
    Leq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpRow {
    pub coeff: Vector,
    pub offset: f64,
    pub sense: Sense,
}

impl QpRow {
    pub fn geq(coeff: Vector, offset: f64) -> Self {
        Self { coeff, offset, sense: Sense::Geq }
    }

    pub fn leq(coeff: Vector, offset: f64) -> Self {
        Self { coeff, offset, sense: Sense::Leq }
    }

    pub fn value(&self, u: &Vector) -> f64 {
        self.coeff.dot(u) + self.offset
    }

    /// Signed residual, nonnegative when satisfied. `slack` loosens LEQ rows.
    pub fn residual(&self, u: &Vector, slack: f64) -> f64 {
        match self.sense {
            Sense::Geq => self.value(u),
            Sense::Leq => slack - self.value(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub dim: usize,
    pub rows: Vec<QpRow>,
    pub lower: Vector,
    pub upper: Vector,
    /// Penalty `p` on a shared slack `δ ≥ 0` added to every LEQ row.
    pub relax_clf: Option<f64>,
}

impl QpProblem {
    pub fn new(rows: Vec<QpRow>, lower: Vector, upper: Vector) -> Self {
        Self {
            dim: lower.len(),
            rows,
            lower,
            upper,
            relax_clf: None,
        }
    }

    pub fn with_relaxation(mut self, penalty: Option<f64>) -> Self {
        self.relax_clf = penalty;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("QP dimension must be positive".into()));
        }
        check_dim("QP lower bound", self.dim, self.lower.len())?;
        check_dim("QP upper bound", self.dim, self.upper.len())?;
        for row in &self.rows {
            check_dim("QP row", self.dim, row.coeff.len())?;
            if !row.offset.is_finite() || row.coeff.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter("QP row has non-finite entries".into()));
            }
        }
        if self
            .lower
            .iter()
            .zip(self.upper.iter())
            .any(|(l, u)| !(l <= u))
        {
            return Err(Error::InvalidParameter(
                "QP box must satisfy lower <= upper".into(),
            ));
        }
        if let Some(p) = self.relax_clf {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "CLF relaxation penalty must be positive, got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &Vector, slack: f64) -> f64 {
        u.norm_squared() + self.relax_clf.map_or(0.0, |p| p * slack * slack)
    }

    /// Rows whose residual is within [`ACTIVE_TOL`] of zero.
    pub fn active_rows(&self, u: &Vector, slack: f64) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.residual(u, slack).abs() <= ACTIVE_TOL)
            .map(|(i, _)| i)
            .collect()
    }

    fn most_violated(&self, u: &Vector, slack: f64) -> (usize, f64) {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.residual(u, slack)))
            .fold((0, f64::INFINITY), |acc, (i, r)| if r < acc.1 { (i, r) } else { acc })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: Vector,
    pub slack: f64,
    pub active_set: Vec<usize>,
    pub objective: f64,
}

/// Minimizes the strictly convex objective over the feasible polytope.
pub fn solve(p: &QpProblem) -> Result<QpSolution> {
    p.validate()?;
    if p.dim == 1 && p.relax_clf.is_none() {
        solve_interval(p)
    } else {
        solve_active_set(p)
    }
}

/// Closed form for one decision variable: intersect the half-lines and
/// project zero onto the result.
pub fn solve_interval(p: &QpProblem) -> Result<QpSolution> {
    p.validate()?;
    if p.dim != 1 || p.relax_clf.is_some() {
        return Err(Error::InvalidParameter(
            "interval solver needs a scalar, unrelaxed problem".into(),
        ));
    }
    let (mut lo, mut hi) = (p.lower[0], p.upper[0]);
    for (i, row) in p.rows.iter().enumerate() {
        // orient as a·u + c ≥ 0
        let (a, c) = match row.sense {
            Sense::Geq => (row.coeff[0], row.offset),
            Sense::Leq => (-row.coeff[0], -row.offset),
        };
        if a > 0.0 {
            lo = lo.max(-c / a);
        } else if a < 0.0 {
            hi = hi.min(-c / a);
        } else if c < -FEASIBILITY_TOL {
            return Err(Error::Infeasible { row: i, residual: c });
        }
    }
    if lo > hi {
        if lo - hi > FEASIBILITY_TOL * (1.0 + lo.abs().max(hi.abs())) {
            let probe = Vector::from_element(1, (0.5 * (lo + hi)).clamp(p.lower[0], p.upper[0]));
            let (row, residual) = p.most_violated(&probe, 0.0);
            return Err(Error::Infeasible { row, residual });
        }
        let mid = 0.5 * (lo + hi);
        lo = mid;
        hi = mid;
    }
    let u_star = Vector::from_element(1, 0.0_f64.clamp(lo, hi));
    Ok(QpSolution {
        active_set: p.active_rows(&u_star, 0.0),
        objective: p.objective(&u_star, 0.0),
        u_star,
        slack: 0.0,
    })
}

/// Dual active-set solver for `min ‖z‖²` over `{z : n_jᵀ z ≥ b_j}`.
pub fn solve_active_set(p: &QpProblem) -> Result<QpSolution> {
    p.validate()?;
    let m = p.dim;
    let scale = p.relax_clf.map(|pen| 1.0 / pen.sqrt());
    let nz = m + usize::from(scale.is_some());

    // Constraint list: rows first (so indices line up), then the box, then δ ≥ 0.
    let mut normals: Vec<Vector> = Vec::with_capacity(p.rows.len() + 2 * m + 1);
    let mut rhs: Vec<f64> = Vec::with_capacity(normals.capacity());
    for row in &p.rows {
        let mut n = Vector::zeros(nz);
        match row.sense {
            Sense::Geq => {
                n.rows_mut(0, m).copy_from(&row.coeff);
                rhs.push(-row.offset);
            }
            Sense::Leq => {
                n.rows_mut(0, m).copy_from(&(-&row.coeff));
                if let Some(s) = scale {
                    n[m] = s;
                }
                rhs.push(row.offset);
            }
        }
        normals.push(n);
    }
    for j in 0..m {
        let mut n = Vector::zeros(nz);
        n[j] = 1.0;
        normals.push(n.clone());
        rhs.push(p.lower[j]);
        normals.push(-n);
        rhs.push(-p.upper[j]);
    }
    if scale.is_some() {
        let mut n = Vector::zeros(nz);
        n[m] = 1.0;
        normals.push(n);
        rhs.push(0.0);
    }
    let norms: Vec<f64> = normals.iter().map(|n| n.norm()).collect();

    let mut z = Vector::zeros(nz);
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        // most violated (normalized) constraint outside the active set
        let mut pick: Option<(usize, f64)> = None;
        for (j, n) in normals.iter().enumerate() {
            if active.contains(&j) || norms[j] == 0.0 {
                if norms[j] == 0.0 && rhs[j] > FEASIBILITY_TOL {
                    return Err(infeasible_at(p, j, -rhs[j]));
                }
                continue;
            }
            let s = (n.dot(&z) - rhs[j]) / norms[j];
            if s < -FEASIBILITY_TOL * 1e-2 && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((j, s));
            }
        }
        let Some((add, _)) = pick else { break };
        let n_p = &normals[add];
        let mut lambda_p = 0.0;

        loop {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(Error::NumericalFailure(
                    "active-set iteration limit reached".into(),
                ));
            }
            let (step, r) = directions(&normals, &active, n_p)?;
            let s_p = n_p.dot(&z) - rhs[add];

            // dual step limit from multipliers that would turn negative
            let mut partial: Option<(usize, f64)> = None;
            for (pos, &rj) in r.iter().enumerate() {
                if rj > 0.0 {
                    let t = lambda[pos] / rj;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((pos, t));
                    }
                }
            }

            // a full active set spans the space; the projected step is rounding noise
            let dependent = active.len() >= nz || step.norm() <= 1e-10 * norms[add];
            if dependent {
                let Some((drop, t)) = partial else {
                    return Err(infeasible_at(p, add, s_p));
                };
                for (pos, l) in lambda.iter_mut().enumerate() {
                    *l -= t * r[pos];
                }
                lambda_p += t;
                active.remove(drop);
                lambda.remove(drop);
                continue;
            }

            let full = -s_p / step.dot(n_p);
            let (t, drop) = match partial {
                Some((pos, t1)) if t1 < full => (t1, Some(pos)),
                _ => (full, None),
            };
            z += &step * t;
            for (pos, l) in lambda.iter_mut().enumerate() {
                *l -= t * r[pos];
            }
            lambda_p += t;
            match drop {
                Some(pos) => {
                    active.remove(pos);
                    lambda.remove(pos);
                }
                None => {
                    active.push(add);
                    lambda.push(lambda_p);
                    break;
                }
            }
        }
    }

    let u_star = Vector::from_iterator(m, z.iter().take(m).copied());
    let slack = match scale {
        Some(s) => (z[m] * s).max(0.0),
        None => 0.0,
    };
    let (row, residual) = p.most_violated(&u_star, slack);
    if !p.rows.is_empty() && residual < -FEASIBILITY_TOL * (1.0 + p.rows[row].coeff.norm()) {
        return Err(Error::NumericalFailure(format!(
            "row {row} violated by {residual:.3e} after convergence"
        )));
    }
    let u_star = clamp_box(u_star, &p.lower, &p.upper);
    Ok(QpSolution {
        active_set: p.active_rows(&u_star, slack),
        objective: p.objective(&u_star, slack),
        u_star,
        slack,
    })
}

// Primal direction z = (I − N N⁺) n_p and dual direction r = N⁺ n_p.
fn directions(normals: &[Vector], active: &[usize], n_p: &Vector) -> Result<(Vector, Vec<f64>)> {
    if active.is_empty() {
        return Ok((n_p.clone(), Vec::new()));
    }
    let cols: Vec<Vector> = active.iter().map(|&j| normals[j].clone()).collect();
    let n = DMatrix::from_columns(&cols);
    let gram = n.transpose() * &n;
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::NumericalFailure("active constraint normals are dependent".into()))?;
    let r = chol.solve(&(n.transpose() * n_p));
    let step = n_p - &n * &r;
    Ok((step, r.iter().copied().collect()))
}

fn infeasible_at(p: &QpProblem, constraint: usize, residual: f64) -> Error {
    if constraint < p.rows.len() {
        Error::Infeasible { row: constraint, residual }
    } else {
        // a box face closed the polytope; report the worst row at the box projection of 0
        let probe = clamp_box(Vector::zeros(p.dim), &p.lower, &p.upper);
        let (row, residual) = p.most_violated(&probe, 0.0);
        Error::Infeasible { row, residual }
    }
}

fn clamp_box(mut u: Vector, lower: &Vector, upper: &Vector) -> Vector {
    for ((v, l), h) in u.iter_mut().zip(lower.iter()).zip(upper.iter()) {
        *v = v.clamp(*l, *h);
    }
    u
}

/// Builds the program at state `x`: one GEQ row per barrier, then the CLF row.
pub fn assemble(
    x: &Vector,
    safety: &SafetySpec,
    clf: &LyapunovCertificate,
    input_box: (&Vector, &Vector),
) -> Result<QpProblem> {
    for (i, b) in safety.barriers().iter().enumerate() {
        let h = b.h(x);
        if !(h > 0.0) {
            return Err(Error::StateOutsideSafeSet { barrier: i, value: h });
        }
    }
    let (lower, upper) = input_box;
    let mut rows = Vec::with_capacity(safety.len() + 1);
    for b in safety.barriers() {
        let z = b.zeta_affine(x);
        check_dim("barrier input coefficient", lower.len(), z.coeff.len())?;
        rows.push(QpRow::geq(z.coeff, z.offset));
    }
    let e = clf.eta_affine(x);
    check_dim("CLF input coefficient", lower.len(), e.coeff.len())?;
    rows.push(QpRow::leq(e.coeff, e.offset));
    let p = QpProblem::new(rows, lower.clone(), upper.clone());
    p.validate()?;
    Ok(p)
}

/// Input that makes the CLF row tight for a scalar input:
/// `u* = (−εV − L_f V) / L_g V`.
pub fn analytic_clf_input(x: &Vector, clf: &LyapunovCertificate) -> Result<Vector> {
    let row = clf.eta_affine(x);
    check_dim("analytic CLF input", 1, row.coeff.len())?;
    let lg = row.coeff[0];
    if lg.abs() <= f64::EPSILON * (1.0 + row.offset.abs()) {
        return Err(Error::DegenerateGradient);
    }
    Ok(Vector::from_element(1, -row.offset / lg))
}
