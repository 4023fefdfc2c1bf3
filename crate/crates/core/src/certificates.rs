//! Barrier and Lyapunov certificates.
//!
//! A [`BarrierCertificate`] carries a safety function `h` of relative degree
//! `r`, the stabilizing gain row `K` and the Lie-derivative terms needed to
//! form the exponential barrier constraint
//!
//! ```text
//! ζ(x, u) = L_f^r h(x) + L_g L_f^(r-1) h(x) · u + K · ξ(x) ≥ 0,
//! ξ(x) = [h, ḣ, …, h^(r-1)]
//! ```
//!
//! For `r = 1` this is the zeroing barrier constraint with the linear class-K
//! function `α(h) = K[0]·h`.
//!
//! A [`LyapunovCertificate`] carries `V`, its Lie derivatives, the decay rate
//! `ε` and an upper bound `D` on `d²V/dt²` used to size the hold period.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::system::Vector;

/// `value(u) = coeff · u + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub coeff: Vector,
    pub offset: f64,
}

impl AffineRow {
    pub fn new(coeff: Vector, offset: f64) -> Self {
        Self { coeff, offset }
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        self.coeff.dot(u) + self.offset
    }
}

/// Lie-derivative terms of a scalar function: `(L_f φ(x), L_g φ(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieTerms {
    pub drift: f64,
    pub input: Vector,
}

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type LieFn = Arc<dyn Fn(&Vector) -> LieTerms + Send + Sync>;
/// `(x_k, u_k, r) ↦` lower bound of `ζ̇` over the ball `‖x − x_k‖ ≤ r` under held `u_k`.
pub type RateBoundFn = Arc<dyn Fn(&Vector, &Vector, f64) -> f64 + Send + Sync>;
/// `(x_k, u_k) ↦ D`.
pub type CurvatureFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;

/// True iff the companion matrix `A_b − B_b K` is Hurwitz, i.e. every root of
/// `s^r + K[r-1] s^(r-1) + … + K[1] s + K[0]` has negative real part.
pub fn validate_gain_row(gain_row: &[f64]) -> bool {
    if gain_row.is_empty() || gain_row.iter().any(|k| !k.is_finite()) {
        return false;
    }
    match gain_row {
        [k0] => *k0 > 0.0,
        [k0, k1] => *k0 > 0.0 && *k1 > 0.0,
        _ => routh_hurwitz(gain_row),
    }
}

// Routh array over the monic polynomial built from the gain row.
fn routh_hurwitz(gain_row: &[f64]) -> bool {
    let r = gain_row.len();
    // coefficients from highest degree down: 1, K[r-1], …, K[0]
    let coeffs: Vec<f64> = std::iter::once(1.0)
        .chain(gain_row.iter().rev().copied())
        .collect();
    let width = r / 2 + 1;
    let mut prev: Vec<f64> = (0..width)
        .map(|j| coeffs.get(2 * j).copied().unwrap_or(0.0))
        .collect();
    let mut cur: Vec<f64> = (0..width)
        .map(|j| coeffs.get(2 * j + 1).copied().unwrap_or(0.0))
        .collect();
    if prev[0] <= 0.0 || cur[0] <= 0.0 {
        return false;
    }
    for _ in 2..=r {
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = prev.get(j + 1).copied().unwrap_or(0.0);
                let b = cur.get(j + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        if next[0] <= 0.0 {
            return false;
        }
        prev = cur;
        cur = next;
    }
    true
}

/// One barrier `h ≥ 0` in exponential form.
#[derive(Clone)]
pub struct BarrierCertificate {
    label: String,
    relative_degree: usize,
    gain_row: Vec<f64>,
    h: ScalarFn,
    transverse: VectorFn,
    lie: LieFn,
    rate_bound: RateBoundFn,
}

impl fmt::Debug for BarrierCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierCertificate")
            .field("label", &self.label)
            .field("relative_degree", &self.relative_degree)
            .field("gain_row", &self.gain_row)
            .finish_non_exhaustive()
    }
}

impl BarrierCertificate {
    /// `lie` returns `(L_f^r h, L_g L_f^(r-1) h)`; `transverse` returns `ξ`.
    pub fn new(
        label: impl Into<String>,
        relative_degree: usize,
        gain_row: Vec<f64>,
        h: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        transverse: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        lie: impl Fn(&Vector) -> LieTerms + Send + Sync + 'static,
        rate_bound: impl Fn(&Vector, &Vector, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let label = label.into();
        if relative_degree == 0 {
            return Err(Error::InvalidParameter(format!(
                "barrier {label}: relative degree must be at least 1"
            )));
        }
        check_dim("gain row", relative_degree, gain_row.len())?;
        if !validate_gain_row(&gain_row) {
            return Err(Error::InvalidParameter(format!(
                "barrier {label}: gain row {gain_row:?} does not stabilize the transverse dynamics"
            )));
        }
        Ok(Self {
            label,
            relative_degree,
            gain_row,
            h: Arc::new(h),
            transverse: Arc::new(transverse),
            lie: Arc::new(lie),
            rate_bound: Arc::new(rate_bound),
        })
    }

    /// Zeroing barrier (`r = 1`) with `α(h) = k·h`. `lie` returns `(L_f h, L_g h)`.
    pub fn zeroing(
        label: impl Into<String>,
        k: f64,
        h: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        lie: impl Fn(&Vector) -> LieTerms + Send + Sync + 'static,
        rate_bound: impl Fn(&Vector, &Vector, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let h: ScalarFn = Arc::new(h);
        let h_t = h.clone();
        Self::new(
            label,
            1,
            vec![k],
            move |x| h(x),
            move |x| Vector::from_element(1, h_t(x)),
            lie,
            rate_bound,
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relative_degree(&self) -> usize {
        self.relative_degree
    }

    pub fn gain_row(&self) -> &[f64] {
        &self.gain_row
    }

    pub fn h(&self, x: &Vector) -> f64 {
        (self.h)(x)
    }

    pub fn transverse(&self, x: &Vector) -> Vector {
        (self.transverse)(x)
    }

    pub fn lie_terms(&self, x: &Vector) -> LieTerms {
        (self.lie)(x)
    }

    /// `ζ(x, ·)` as an affine row in `u`.
    pub fn zeta_affine(&self, x: &Vector) -> AffineRow {
        let lie = self.lie_terms(x);
        let xi = self.transverse(x);
        let k_xi: f64 = self.gain_row.iter().zip(xi.iter()).map(|(k, v)| k * v).sum();
        AffineRow::new(lie.input, lie.drift + k_xi)
    }

    pub fn rate_bound(&self, x_k: &Vector, u_k: &Vector, radius: f64) -> f64 {
        (self.rate_bound)(x_k, u_k, radius)
    }
}

/// `ζ(x, u)` of one barrier.
pub fn zeta(cert: &BarrierCertificate, x: &Vector, u: &Vector) -> Result<f64> {
    let row = cert.zeta_affine(x);
    check_dim("input", row.coeff.len(), u.len())?;
    Ok(row.eval(u))
}

/// Ordered, nonempty list of barriers that jointly define the safe set.
#[derive(Debug, Clone)]
pub struct SafetySpec {
    barriers: Vec<BarrierCertificate>,
}

impl SafetySpec {
    pub fn new(barriers: Vec<BarrierCertificate>) -> Result<Self> {
        if barriers.is_empty() {
            return Err(Error::InvalidParameter(
                "safety spec needs at least one barrier".to_string(),
            ));
        }
        Ok(Self { barriers })
    }

    pub fn barriers(&self) -> &[BarrierCertificate] {
        &self.barriers
    }

    pub fn len(&self) -> usize {
        self.barriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.barriers.is_empty()
    }

    pub fn margins(&self, x: &Vector) -> Vec<f64> {
        self.barriers.iter().map(|b| b.h(x)).collect()
    }

    /// Smallest `h_i(x)` with its index.
    pub fn min_margin(&self, x: &Vector) -> (usize, f64) {
        self.barriers
            .iter()
            .enumerate()
            .map(|(i, b)| (i, b.h(x)))
            .fold((0, f64::INFINITY), |acc, (i, h)| if h < acc.1 { (i, h) } else { acc })
    }
}

/// Exponentially stabilizing control Lyapunov function about `target`.
#[derive(Clone)]
pub struct LyapunovCertificate {
    v: ScalarFn,
    lie: LieFn,
    epsilon: f64,
    curvature: CurvatureFn,
    target: Vector,
}

impl fmt::Debug for LyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCertificate")
            .field("epsilon", &self.epsilon)
            .field("target", &self.target.as_slice())
            .finish_non_exhaustive()
    }
}

impl LyapunovCertificate {
    /// `lie` returns `(L_f V, L_g V)`; `curvature` returns an upper bound on
    /// `d²V/dt²` along the held-input flow while `V ≤ V(x_k)`.
    pub fn new(
        target: Vector,
        epsilon: f64,
        v: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        lie: impl Fn(&Vector) -> LieTerms + Send + Sync + 'static,
        curvature: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self {
            v: Arc::new(v),
            lie: Arc::new(lie),
            epsilon,
            curvature: Arc::new(curvature),
            target,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.v)(x)
    }

    pub fn lie_terms(&self, x: &Vector) -> LieTerms {
        (self.lie)(x)
    }

    /// `η(x, ·) = L_f V + L_g V·u + εV` as an affine row in `u`.
    pub fn eta_affine(&self, x: &Vector) -> AffineRow {
        let lie = self.lie_terms(x);
        AffineRow::new(lie.input, lie.drift + self.epsilon * self.value(x))
    }

    /// `V̇` along `f(x) + g(x)u`.
    pub fn vdot(&self, x: &Vector, u: &Vector) -> f64 {
        let lie = self.lie_terms(x);
        lie.drift + lie.input.dot(u)
    }

    pub fn curvature_bound(&self, x_k: &Vector, u_k: &Vector) -> f64 {
        (self.curvature)(x_k, u_k)
    }
}

pub fn eta(cert: &LyapunovCertificate, x: &Vector, u: &Vector) -> Result<f64> {
    let row = cert.eta_affine(x);
    check_dim("input", row.coeff.len(), u.len())?;
    Ok(row.eval(u))
}

pub fn lyapunov_value(cert: &LyapunovCertificate, x: &Vector) -> f64 {
    cert.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gain_rows() {
        assert!(validate_gain_row(&[105.0, 20.5]));
        assert!(validate_gain_row(&[1.0]));
        assert!(!validate_gain_row(&[-1.0]));
        assert!(!validate_gain_row(&[0.0]));
        assert!(!validate_gain_row(&[]));
        assert!(!validate_gain_row(&[1.0, -0.1]));
        // (s+1)(s+2)(s+3) = s³ + 6s² + 11s + 6
        assert!(validate_gain_row(&[6.0, 11.0, 6.0]));
        // s³ + s² + s + 2: a·b = 1 < c = 2
        assert!(!validate_gain_row(&[2.0, 1.0, 1.0]));
        // (s+1)^4 = s⁴ + 4s³ + 6s² + 4s + 1
        assert!(validate_gain_row(&[1.0, 4.0, 6.0, 4.0]));
        // (s-1)(s+1)^3 has a right-half-plane root
        assert!(!validate_gain_row(&[-1.0, -2.0, 0.0, 2.0]));
    }

    proptest! {
        #[test]
        fn routh_matches_cubic_conditions(k0 in -5.0..5.0f64, k1 in -5.0..5.0f64, k2 in -5.0..5.0f64) {
            let expected = k0 > 0.0 && k1 > 0.0 && k2 > 0.0 && k2 * k1 > k0;
            prop_assert_eq!(validate_gain_row(&[k0, k1, k2]), expected);
        }

        #[test]
        fn routh_accepts_products_of_stable_roots(
            roots in proptest::collection::vec(0.1..10.0f64, 1..6)
        ) {
            // expand ∏ (s + p_i); coefficients low → high
            let mut poly = vec![1.0];
            for p in &roots {
                let mut next = vec![0.0; poly.len() + 1];
                for (i, c) in poly.iter().enumerate() {
                    next[i] += c * p;
                    next[i + 1] += c;
                }
                poly = next;
            }
            let gains = &poly[..poly.len() - 1];
            prop_assert!(validate_gain_row(gains));
        }
    }

    #[test]
    fn rejects_unstable_gain_at_construction() {
        let r = BarrierCertificate::zeroing(
            "bad",
            -1.0,
            |x| x[0],
            |_| LieTerms { drift: 0.0, input: Vector::from_element(1, 1.0) },
            |_, _, _| 0.0,
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn empty_safety_spec_is_rejected() {
        assert!(SafetySpec::new(Vec::new()).is_err());
    }

    #[test]
    fn epsilon_must_be_positive() {
        let r = LyapunovCertificate::new(
            Vector::zeros(1),
            -1.0,
            |x| x[0] * x[0],
            |x| LieTerms { drift: 0.0, input: Vector::from_element(1, 2.0 * x[0]) },
            |_, _| 0.0,
        );
        let err = r.unwrap_err();
        assert!(err.to_string().contains("epsilon must be positive"));
    }
}
