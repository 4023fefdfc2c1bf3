//! Hold-duration certificates for the zero-order hold.
//!
//! Under a held input `u_k` the state stays in the ball of radius
//! `r̄(t) = (‖f(x_k) + g(x_k)u_k‖ / L)(e^{L(t−t_k)} − 1)` around `x_k`. Each
//! barrier supplies a lower bound `s(r)` on `ζ̇` over a ball of radius `r`;
//! since the balls nest, `ζ̲(t) = ζ(x_k, u_k) + (t − t_k)·s(r̄(t))` minorizes
//! `ζ(x(t), u_k)` and its first zero is a safe period.
//!
//! The CLF period comes from the quadratic upper bound
//! `V̄(t) = V_k + (t − t_k)V̇_k + (t − t_k)² D/2`, whose nonzero root is
//! `−2V̇_k / D`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::certificates::{zeta, BarrierCertificate, LyapunovCertificate, SafetySpec};
use crate::error::{Error, Result};
use crate::system::{AffineSystem, StateVector, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryBound {
    pub speed_norm: f64,
    pub lipschitz_const: f64,
    pub anchor_time: f64,
}

impl TrajectoryBound {
    /// `r̄(t)`; zero before the anchor time.
    pub fn radius(&self, t: f64) -> f64 {
        let dt = (t - self.anchor_time).max(0.0);
        self.speed_norm / self.lipschitz_const * (self.lipschitz_const * dt).exp_m1()
    }

    /// `r̄` as a function of elapsed hold time.
    pub fn radius_after(&self, elapsed: f64) -> f64 {
        self.radius(self.anchor_time + elapsed)
    }
}

pub fn trajectory_bound(
    sys: &AffineSystem,
    x_k: &StateVector,
    u_k: &Vector,
) -> Result<TrajectoryBound> {
    let speed = sys.eval_vector_field(&x_k.entries, u_k)?.norm();
    Ok(TrajectoryBound {
        speed_norm: speed,
        lipschitz_const: sys.lipschitz_const(),
        anchor_time: x_k.time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMethod {
    #[default]
    Bisection,
    /// Secant iterates, falling back to bisection on the maintained bracket.
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub tau_min: f64,
    pub tau_max: f64,
    pub root_tol: f64,
    pub root_method: RootMethod,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            tau_min: 1e-4,
            tau_max: 2.0,
            root_tol: 1e-8,
            root_method: RootMethod::Bisection,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "trigger needs 0 < tau_min < tau_max, got tau_min = {}, tau_max = {}",
                self.tau_min, self.tau_max
            )));
        }
        if !(self.root_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "root tolerance must be positive, got {}",
                self.root_tol
            )));
        }
        Ok(())
    }
}

/// Why the hold ended where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limiting {
    /// Zero-based barrier index.
    Cbf(usize),
    Clf,
    TauMax,
    TauMin,
}

impl fmt::Display for Limiting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limiting::Cbf(i) => write!(f, "CBF({})", i + 1),
            Limiting::Clf => f.write_str("CLF"),
            Limiting::TauMax => f.write_str("TAU_MAX"),
            Limiting::TauMin => f.write_str("TAU_MIN"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerDecision {
    pub tau_cbf_per_barrier: Vec<f64>,
    pub tau_cbf: f64,
    pub tau_clf: f64,
    pub tau: f64,
    pub limiting: Limiting,
    /// False when `V̇_k ≥ 0` and no descent period could be certified.
    pub clf_certified: bool,
}

/// `ζ̲(t)` for one barrier.
pub fn zeta_lower_bound(
    cert: &BarrierCertificate,
    x_k: &StateVector,
    u_k: &Vector,
    bound: &TrajectoryBound,
    t: f64,
) -> Result<f64> {
    let z = zeta(cert, &x_k.entries, u_k)?;
    Ok(lower_bound_from(cert, &x_k.entries, u_k, z, bound, t - bound.anchor_time))
}

fn lower_bound_from(
    cert: &BarrierCertificate,
    x_k: &Vector,
    u_k: &Vector,
    zeta_k: f64,
    bound: &TrajectoryBound,
    elapsed: f64,
) -> f64 {
    if elapsed <= 0.0 {
        return zeta_k;
    }
    zeta_k + elapsed * cert.rate_bound(x_k, u_k, bound.radius_after(elapsed))
}

/// Largest `τ ∈ [0, hi]` found with `g ≥ 0` on `[0, τ]`, assuming `g(0) ≥ 0`,
/// `g(hi) < 0` and a single sign change. Always returns a point where `g ≥ 0`.
pub fn last_nonnegative(
    g: impl Fn(f64) -> f64,
    hi: f64,
    tol: f64,
    method: RootMethod,
) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    if method == RootMethod::Secant {
        let (mut a, mut ga) = (lo, g(lo));
        let (mut b, mut gb) = (hi, g(hi));
        for _ in 0..60 {
            if hi - lo <= tol || gb == ga {
                break;
            }
            let c = b - gb * (b - a) / (gb - ga);
            if !c.is_finite() || c <= lo || c >= hi {
                break;
            }
            let gc = g(c);
            if gc >= 0.0 {
                lo = c;
            } else {
                hi = c;
            }
            (a, ga, b, gb) = (b, gb, c, gc);
            if (b - a).abs() <= tol {
                // pin the bracket around the secant limit
                let probe = (c - tol).max(lo);
                if probe > lo && g(probe) >= 0.0 {
                    lo = probe;
                }
                break;
            }
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafePeriod {
    pub tau_cbf: f64,
    pub per_barrier: Vec<f64>,
}

/// Per-barrier safe periods and their minimum.
pub fn cbf_safe_period(
    safety: &SafetySpec,
    sys: &AffineSystem,
    x_k: &StateVector,
    u_k: &Vector,
    cfg: &TriggerConfig,
) -> Result<SafePeriod> {
    cfg.validate()?;
    let bound = trajectory_bound(sys, x_k, u_k)?;
    let x = &x_k.entries;
    let mut per_barrier = Vec::with_capacity(safety.len());
    for (i, cert) in safety.barriers().iter().enumerate() {
        let row = cert.zeta_affine(x);
        let z = row.eval(u_k);
        let scale = 1.0 + row.offset.abs() + row.coeff.norm() * u_k.norm();
        if z < -1e-8 * scale {
            return Err(Error::NonpositiveMargin { barrier: i, value: z });
        }
        let z = z.max(0.0);
        let g = |tau: f64| lower_bound_from(cert, x, u_k, z, &bound, tau);
        let tau = if g(cfg.tau_max) >= 0.0 {
            cfg.tau_max
        } else {
            last_nonnegative(g, cfg.tau_max, cfg.root_tol, cfg.root_method)
        };
        per_barrier.push(tau);
    }
    let tau_cbf = per_barrier.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SafePeriod { tau_cbf, per_barrier })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClfPeriod {
    pub tau: f64,
    pub vdot: f64,
    pub curvature: f64,
    pub certified: bool,
}

pub fn clf_update_period_detail(
    clf: &LyapunovCertificate,
    x_k: &StateVector,
    u_k: &Vector,
    cfg: &TriggerConfig,
) -> ClfPeriod {
    let vdot = clf.vdot(&x_k.entries, u_k);
    let curvature = clf.curvature_bound(&x_k.entries, u_k);
    let (tau, certified) = if vdot >= 0.0 {
        (cfg.tau_min, false)
    } else if curvature <= 0.0 {
        (cfg.tau_max, true)
    } else {
        (-2.0 * vdot / curvature, true)
    };
    ClfPeriod { tau, vdot, curvature, certified }
}

/// `τ_CLF = −2V̇_k / D`, with `tau_max` for concave decrease and `tau_min`
/// when `V̇_k ≥ 0`.
pub fn clf_update_period(
    clf: &LyapunovCertificate,
    x_k: &StateVector,
    u_k: &Vector,
    cfg: &TriggerConfig,
) -> f64 {
    clf_update_period_detail(clf, x_k, u_k, cfg).tau
}

/// Applies `τ = clamp(min(τ_CBF, τ_CLF), tau_min, tau_max)`.
pub fn combine(
    per_barrier: Vec<f64>,
    tau_clf: f64,
    clf_certified: bool,
    cfg: &TriggerConfig,
) -> TriggerDecision {
    let (arg, tau_cbf) = per_barrier
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, t)| if t < acc.1 { (i, t) } else { acc });
    let raw = tau_cbf.min(tau_clf);
    let (tau, limiting) = if raw < cfg.tau_min {
        log::warn!(
            "hold floor binds: min(tau_cbf = {tau_cbf:.3e}, tau_clf = {tau_clf:.3e}) < tau_min = {:.3e}; \
             safety certificate does not cover this hold",
            cfg.tau_min
        );
        (cfg.tau_min, Limiting::TauMin)
    } else if raw >= cfg.tau_max {
        (cfg.tau_max, Limiting::TauMax)
    } else if tau_clf < tau_cbf {
        (raw, if clf_certified { Limiting::Clf } else { Limiting::TauMin })
    } else {
        (raw, Limiting::Cbf(arg))
    };
    TriggerDecision {
        tau_cbf_per_barrier: per_barrier,
        tau_cbf,
        tau_clf,
        tau,
        limiting,
        clf_certified,
    }
}

/// Safe period, CLF period and the resulting hold for input `u_k` at `x_k`.
pub fn decide(
    safety: &SafetySpec,
    clf: &LyapunovCertificate,
    sys: &AffineSystem,
    x_k: &StateVector,
    u_k: &Vector,
    cfg: &TriggerConfig,
) -> Result<TriggerDecision> {
    let safe = cbf_safe_period(safety, sys, x_k, u_k, cfg)?;
    let clf_period = clf_update_period_detail(clf, x_k, u_k, cfg);
    Ok(combine(
        safe.per_barrier,
        clf_period.tau,
        clf_period.certified,
        cfg,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::LieTerms;
    use crate::system::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn at(t: f64, xs: &[f64]) -> StateVector {
        StateVector::from_slice(t, xs).unwrap()
    }

    fn single_integrator() -> AffineSystem {
        AffineSystem::new("single", 1, 1, 1.0, |_| Vector::zeros(1), |_| Matrix::identity(1, 1)).unwrap()
    }

    // h = x, ζ = u + x, fixed rate bound
    fn constant_rate_barrier(rate: f64) -> BarrierCertificate {
        BarrierCertificate::zeroing(
            "toy",
            1.0,
            |x| x[0],
            |_| LieTerms { drift: 0.0, input: Vector::from_element(1, 1.0) },
            move |_, _, _| rate,
        )
        .unwrap()
    }

    #[test]
    fn radius_closed_form() {
        let b = TrajectoryBound { speed_norm: 2.0, lipschitz_const: 1.0, anchor_time: 3.0 };
        assert_eq!(b.radius(3.0), 0.0);
        assert!((b.radius(4.0) - 2.0 * (std::f64::consts::E - 1.0)).abs() < 1e-12);
        assert!((b.radius(4.0) - 3.436_563_656_918_09).abs() < 1e-12);
        assert!(b.radius(3.5) < b.radius(3.6));
    }

    #[test]
    fn lower_bound_starts_at_zeta() {
        let cert = constant_rate_barrier(-2.0);
        let sys = single_integrator();
        let x = at(1.5, &[1.0]);
        let u = v(&[0.25]);
        let bound = trajectory_bound(&sys, &x, &u).unwrap();
        assert_eq!(zeta_lower_bound(&cert, &x, &u, &bound, 1.5).unwrap(), 1.25);
        assert_eq!(zeta_lower_bound(&cert, &x, &u, &bound, 2.0).unwrap(), 0.25);
    }

    #[test]
    fn linear_root() {
        let safety = SafetySpec::new(vec![constant_rate_barrier(-2.0)]).unwrap();
        let cfg = TriggerConfig::default();
        for method in [RootMethod::Bisection, RootMethod::Secant] {
            let cfg = TriggerConfig { root_method: method, ..cfg };
            let p = cbf_safe_period(&safety, &single_integrator(), &at(0.0, &[1.0]), &v(&[0.0]), &cfg)
                .unwrap();
            assert!((p.tau_cbf - 0.5).abs() <= cfg.root_tol, "{method:?}: {}", p.tau_cbf);
            assert!(p.tau_cbf <= 0.5);
        }
    }

    #[test]
    fn nonnegative_rates_give_horizon() {
        let safety =
            SafetySpec::new(vec![constant_rate_barrier(0.0), constant_rate_barrier(3.0)]).unwrap();
        let cfg = TriggerConfig::default();
        let p = cbf_safe_period(&safety, &single_integrator(), &at(0.0, &[1.0]), &v(&[0.0]), &cfg)
            .unwrap();
        assert_eq!(p.tau_cbf, cfg.tau_max);
        assert_eq!(p.per_barrier, vec![cfg.tau_max, cfg.tau_max]);
    }

    #[test]
    fn negative_margin_is_an_error() {
        let safety = SafetySpec::new(vec![constant_rate_barrier(-1.0)]).unwrap();
        let err = cbf_safe_period(
            &safety,
            &single_integrator(),
            &at(0.0, &[1.0]),
            &v(&[-2.0]),
            &TriggerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonpositiveMargin { barrier: 0, .. }));
    }

    fn toy_clf(curvature: f64) -> LyapunovCertificate {
        LyapunovCertificate::new(
            Vector::zeros(1),
            0.5,
            |x| x[0] * x[0],
            |x| LieTerms { drift: 0.0, input: Vector::from_element(1, 2.0 * x[0]) },
            move |_, _| curvature,
        )
        .unwrap()
    }

    #[test]
    fn clf_period_cases() {
        let cfg = TriggerConfig::default();
        // V̇ = 2·1·(−1) = −2, D = 4
        assert_eq!(clf_update_period(&toy_clf(4.0), &at(0.0, &[1.0]), &v(&[-1.0]), &cfg), 1.0);
        assert_eq!(clf_update_period(&toy_clf(4.0), &at(0.0, &[1.0]), &v(&[0.0]), &cfg), cfg.tau_min);
        assert_eq!(clf_update_period(&toy_clf(-1.0), &at(0.0, &[1.0]), &v(&[-1.0]), &cfg), cfg.tau_max);
        let d = clf_update_period_detail(&toy_clf(4.0), &at(0.0, &[1.0]), &v(&[0.0]), &cfg);
        assert!(!d.certified);
    }

    #[test]
    fn combine_rules() {
        let cfg = TriggerConfig { tau_min: 1e-3, tau_max: 2.0, ..TriggerConfig::default() };
        let d = combine(vec![0.4], 0.3166, true, &cfg);
        assert_eq!(d.tau, 0.3166);
        assert_eq!(d.limiting, Limiting::Clf);

        let d = combine(vec![5.0], 5.0, true, &cfg);
        assert_eq!(d.tau, 2.0);
        assert_eq!(d.limiting, Limiting::TauMax);

        let d = combine(vec![1e-9], 1.0, true, &cfg);
        assert_eq!(d.tau, cfg.tau_min);
        assert_eq!(d.limiting, Limiting::TauMin);

        let d = combine(vec![0.9, 0.3, 0.7], 0.5, true, &cfg);
        assert_eq!(d.limiting, Limiting::Cbf(1));
        assert_eq!(d.tau, 0.3);
        assert_eq!(d.tau_cbf, 0.3);

        // uncertified CLF floor is reported as the floor
        let d = combine(vec![1.0], cfg.tau_min, false, &cfg);
        assert_eq!(d.limiting, Limiting::TauMin);
        assert_eq!(d.tau, cfg.tau_min);
    }

    #[test]
    fn limiting_display() {
        assert_eq!(Limiting::Cbf(0).to_string(), "CBF(1)");
        assert_eq!(Limiting::TauMin.to_string(), "TAU_MIN");
    }

    #[test]
    fn config_validation() {
        assert!(TriggerConfig::default().validate().is_ok());
        let bad = TriggerConfig { tau_min: 3.0, ..TriggerConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TriggerConfig { root_tol: 0.0, ..TriggerConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn secant_returns_feasible_side() {
        // g(τ) = 1 − τ³ on [0, 2]; root at 1
        let g = |t: f64| 1.0 - t * t * t;
        for method in [RootMethod::Bisection, RootMethod::Secant] {
            let r = last_nonnegative(g, 2.0, 1e-10, method);
            assert!(g(r) >= 0.0);
            assert!((r - 1.0).abs() < 1e-9, "{method:?}: {r}");
        }
    }
}
