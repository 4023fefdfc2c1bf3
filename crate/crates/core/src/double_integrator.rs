//! Double-integrator presets: box constraints on position and velocity,
//! the quadratic Lyapunov function about a rest point, and the reference
//! parameter set used by the examples and the replication command.

use serde::{Deserialize, Serialize};

use crate::certificates::{BarrierCertificate, LieTerms, LyapunovCertificate, SafetySpec};
use crate::error::{Error, Result};
use crate::system::{double_integrator, AffineSystem, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxLimits {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Default for BoxLimits {
    fn default() -> Self {
        Self {
            x1_min: -10.0,
            x1_max: 10.0,
            x2_min: -10.0,
            x2_max: 10.0,
        }
    }
}

/// How the held input enters the barrier rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSigning {
    /// Keeps the sign of `u_k`: the input term is exact.
    #[default]
    Tight,
    /// Replaces every input term by `−gain·|u_k|`.
    Conservative,
}

/// Which upper bound on `d²V/dt²` the preset CLF uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureBound {
    /// Exact maxima of the quadratic and linear parts of `V''` over the
    /// ellipse `V(x) ≤ V(x_k)`.
    #[default]
    LevelSet,
    /// `2V + 5|u|√V + 2u²`, obtained from `|x1 − x1d|, |x2| ≤ √V`. Those
    /// inequalities do not hold for this `V` (the sharp constant is
    /// `√(4V/3)`), so this bound can undershoot `V''`.
    Literal,
}

/// The four box barriers: position limits with relative degree 2 and gain
/// row `k_b = [position, velocity]`, velocity limits with relative degree 1
/// and gain `k`.
pub fn double_integrator_safety(
    limits: &BoxLimits,
    k_b: [f64; 2],
    k: f64,
    signing: RateSigning,
) -> Result<SafetySpec> {
    let BoxLimits {
        x1_min,
        x1_max,
        x2_min,
        x2_max,
    } = *limits;
    if !(x1_min < x1_max) || !(x2_min < x2_max) {
        return Err(Error::InvalidParameter(format!(
            "box limits must satisfy min < max, got {limits:?}"
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "velocity barrier gain k must be positive, got {k}"
        )));
    }
    let [kp, kv] = k_b;
    let one = || Vector::from_element(1, 1.0);
    let minus_one = || Vector::from_element(1, -1.0);
    let conservative = signing == RateSigning::Conservative;

    // ζ1 = u + kv·x2 + kp·(x1 − x1_min);  ζ̇1 = kv·u + kp·x2
    let lower_position = BarrierCertificate::new(
        "x1_min",
        2,
        vec![kp, kv],
        move |x| x[0] - x1_min,
        move |x| Vector::from_column_slice(&[x[0] - x1_min, x[1]]),
        move |_| LieTerms { drift: 0.0, input: one() },
        move |x, u, r| {
            let input = if conservative { -kv * u[0].abs() } else { kv * u[0] };
            input + kp * (x[1] - r)
        },
    )?;
    // ζ2 = −u − kv·x2 + kp·(x1_max − x1);  ζ̇2 = −kv·u − kp·x2
    let upper_position = BarrierCertificate::new(
        "x1_max",
        2,
        vec![kp, kv],
        move |x| x1_max - x[0],
        move |x| Vector::from_column_slice(&[x1_max - x[0], -x[1]]),
        move |_| LieTerms { drift: 0.0, input: minus_one() },
        move |x, u, r| {
            let input = if conservative { -kv * u[0].abs() } else { -kv * u[0] };
            input - kp * (x[1] + r)
        },
    )?;
    // ζ3 = u + k·(x2 − x2_min);  ζ̇3 = k·u
    let lower_velocity = BarrierCertificate::zeroing(
        "x2_min",
        k,
        move |x| x[1] - x2_min,
        move |_| LieTerms { drift: 0.0, input: one() },
        move |_, u, _| if conservative { -k * u[0].abs() } else { k * u[0] },
    )?;
    // ζ4 = −u + k·(x2_max − x2);  ζ̇4 = −k·u
    let upper_velocity = BarrierCertificate::zeroing(
        "x2_max",
        k,
        move |x| x2_max - x[1],
        move |_| LieTerms { drift: 0.0, input: minus_one() },
        move |_, u, _| if conservative { -k * u[0].abs() } else { -k * u[0] },
    )?;
    SafetySpec::new(vec![
        lower_position,
        upper_position,
        lower_velocity,
        upper_velocity,
    ])
}

/// `V = eᵀ P e` with `e = (x1 − x1d, x2 − x2d)` and `P = [[1, ½], [½, 1]]`.
pub fn double_integrator_clf(
    target: [f64; 2],
    epsilon: f64,
    curvature: CurvatureBound,
) -> Result<LyapunovCertificate> {
    let [x1d, x2d] = target;
    let err = move |x: &Vector| (x[0] - x1d, x[1] - x2d);
    let v = move |x: &Vector| {
        let (e1, e2) = err(x);
        e1 * e1 + e1 * e2 + e2 * e2
    };
    let lie = move |x: &Vector| {
        let (e1, e2) = err(x);
        LieTerms {
            drift: (2.0 * e1 + e2) * x[1],
            input: Vector::from_element(1, e1 + 2.0 * e2),
        }
    };
    let bound = move |x: &Vector, u: &Vector| {
        let vk = v(x).max(0.0);
        let u = u[0];
        match curvature {
            CurvatureBound::LevelSet => {
                // V'' = 2e2² + 2u·e1 + (3u + 4x2d)·e2 + 2x2d² + 2x2d·u + 2u²
                // On eᵀPe ≤ Vk: max e2² = (P⁻¹)₂₂·Vk = 4Vk/3 and
                // max bᵀe = √(bᵀP⁻¹b)·√Vk with P⁻¹ = (4/3)[[1, −½], [−½, 1]].
                let (b1, b2) = (2.0 * u, 3.0 * u + 4.0 * x2d);
                let dual = (4.0 / 3.0) * (b1 * b1 - b1 * b2 + b2 * b2);
                8.0 / 3.0 * vk
                    + dual.max(0.0).sqrt() * vk.sqrt()
                    + 2.0 * x2d * x2d
                    + 2.0 * x2d * u
                    + 2.0 * u * u
            }
            CurvatureBound::Literal => {
                let s = vk.sqrt();
                2.0 * vk + 2.0 * u.abs() * s + 3.0 * s * u.abs() + 2.0 * u * u
            }
        }
    };
    LyapunovCertificate::new(
        Vector::from_column_slice(&target),
        epsilon,
        v,
        lie,
        bound,
    )
}

/// Exact `d²V/dt²` of the preset `V` at `x` under held `u`.
pub fn double_integrator_vddot(target: [f64; 2], x: &Vector, u: f64) -> f64 {
    let (e1, e2) = (x[0] - target[0], x[1] - target[1]);
    let x2 = x[1];
    2.0 * x2 * x2 + 2.0 * x2 * u + (2.0 * e1 + e2) * u + 2.0 * u * u
}

/// Reference parameters for the double-integrator study.
///
/// The velocity-barrier gain `k` has no reference value; `2.0`
/// keeps the first QP feasible from `x0 = [6, 5]` (any `k ≳ 1.05` does).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleIntegratorSetup {
    pub x0: [f64; 2],
    pub target: [f64; 2],
    pub limits: BoxLimits,
    pub epsilon: f64,
    pub lipschitz: f64,
    pub k_b: [f64; 2],
    pub k: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub signing: RateSigning,
    pub curvature: CurvatureBound,
}

impl Default for DoubleIntegratorSetup {
    fn default() -> Self {
        Self {
            x0: [6.0, 5.0],
            target: [-7.0, 0.0],
            limits: BoxLimits::default(),
            epsilon: 0.8,
            lipschitz: 1.0,
            k_b: [105.0, 20.5],
            k: 2.0,
            u_min: -20.0,
            u_max: 20.0,
            signing: RateSigning::Tight,
            curvature: CurvatureBound::LevelSet,
        }
    }
}

/// Everything the simulator needs for one plant.
#[derive(Debug, Clone)]
pub struct Plant {
    pub system: AffineSystem,
    pub safety: SafetySpec,
    pub clf: LyapunovCertificate,
    pub input_box: (Vector, Vector),
}

impl DoubleIntegratorSetup {
    pub fn build(&self) -> Result<Plant> {
        if !(self.u_min <= self.u_max) {
            return Err(Error::InvalidParameter(format!(
                "input bounds must satisfy u_min <= u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(Plant {
            system: double_integrator().with_lipschitz_const(self.lipschitz)?,
            safety: double_integrator_safety(&self.limits, self.k_b, self.k, self.signing)?,
            clf: double_integrator_clf(self.target, self.epsilon, self.curvature)?,
            input_box: (
                Vector::from_element(1, self.u_min),
                Vector::from_element(1, self.u_max),
            ),
        })
    }

    pub fn x0(&self) -> Vector {
        Vector::from_column_slice(&self.x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{eta, lyapunov_value, zeta};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn reference_safety() -> SafetySpec {
        double_integrator_safety(&BoxLimits::default(), [105.0, 20.5], 2.0, RateSigning::Tight)
            .unwrap()
    }

    #[test]
    fn zeta_values_by_hand() {
        let s = reference_safety();
        let b = s.barriers();
        assert_eq!(s.len(), 4);
        // 105·16 + 20.5·5
        assert_eq!(zeta(&b[0], &v(&[6.0, 5.0]), &v(&[0.0])).unwrap(), 1782.5);
        assert_eq!(b[0].h(&v(&[6.0, 0.0])), 16.0);
        assert_eq!(b[0].transverse(&v(&[6.0, 5.0])).as_slice(), &[16.0, 5.0]);
        // velocity barrier boundary
        assert_eq!(zeta(&b[2], &v(&[0.0, -10.0]), &v(&[0.0])).unwrap(), 0.0);
        let k1 = double_integrator_safety(&BoxLimits::default(), [105.0, 20.5], 1.0, RateSigning::Tight)
            .unwrap();
        assert_eq!(zeta(&k1.barriers()[3], &v(&[0.0, 0.0]), &v(&[0.0])).unwrap(), 10.0);
    }

    #[test]
    fn zeroing_barrier_reduces_to_direct_form() {
        let s = reference_safety();
        let b3 = &s.barriers()[2];
        assert_eq!(b3.relative_degree(), 1);
        for (x, u) in [([0.3, -2.0], 1.5), ([-4.0, 7.5], -3.0), ([9.0, 0.0], 0.0)] {
            let (x, uv) = (v(&x), v(&[u]));
            let lie = b3.lie_terms(&x);
            let direct = lie.drift + lie.input[0] * u + b3.gain_row()[0] * b3.h(&x);
            assert_eq!(zeta(b3, &x, &uv).unwrap(), direct);
        }
    }

    #[test]
    fn invalid_presets_are_rejected() {
        let bad = BoxLimits { x1_min: 1.0, x1_max: -1.0, ..BoxLimits::default() };
        assert!(double_integrator_safety(&bad, [105.0, 20.5], 1.0, RateSigning::Tight).is_err());
        assert!(double_integrator_safety(&BoxLimits::default(), [105.0, -1.0], 1.0, RateSigning::Tight)
            .is_err());
        assert!(double_integrator_safety(&BoxLimits::default(), [105.0, 20.5], 0.0, RateSigning::Tight)
            .is_err());
        assert!(double_integrator_clf([-7.0, 0.0], 0.0, CurvatureBound::LevelSet).is_err());
    }

    #[test]
    fn lyapunov_values_by_hand() {
        let clf = double_integrator_clf([-7.0, 0.0], 0.8, CurvatureBound::LevelSet).unwrap();
        assert_eq!(lyapunov_value(&clf, &v(&[-7.0, 0.0])), 0.0);
        assert_eq!(lyapunov_value(&clf, &v(&[-6.0, 0.0])), 1.0);
        assert_eq!(lyapunov_value(&clf, &v(&[6.0, 5.0])), 259.0);
    }

    #[test]
    fn eta_values_by_hand() {
        let clf = double_integrator_clf([-7.0, 0.0], 0.8, CurvatureBound::LevelSet).unwrap();
        let at = eta(&clf, &v(&[6.0, 5.0]), &v(&[0.0])).unwrap();
        // 5·(26 + 5) + 0.8·259
        assert!((at - 362.2).abs() < 1e-12);
        assert_eq!(eta(&clf, &v(&[-7.0, 0.0]), &v(&[0.0])).unwrap(), 0.0);
        let x = v(&[2.0, -1.0]);
        let (u1, u2, a) = (3.0, -5.0, 0.3);
        let mix = eta(&clf, &x, &v(&[a * u1 + (1.0 - a) * u2])).unwrap();
        let lin = a * eta(&clf, &x, &v(&[u1])).unwrap() + (1.0 - a) * eta(&clf, &x, &v(&[u2])).unwrap();
        assert!((mix - lin).abs() < 1e-12);
    }

    #[test]
    fn literal_curvature_bound_undershoots() {
        // e1 = −x2/2, u = 0: V'' = 2x2² but the literal bound gives 1.5·x2².
        let target = [0.0, 0.0];
        let lit = double_integrator_clf(target, 0.8, CurvatureBound::Literal).unwrap();
        let lvl = double_integrator_clf(target, 0.8, CurvatureBound::LevelSet).unwrap();
        let x = v(&[-0.5, 1.0]);
        let u = v(&[0.0]);
        let exact = double_integrator_vddot(target, &x, 0.0);
        assert_eq!(exact, 2.0);
        assert!(lit.curvature_bound(&x, &u) < exact);
        assert!(lvl.curvature_bound(&x, &u) >= exact);
    }

    #[test]
    fn setup_defaults_build() {
        let setup = DoubleIntegratorSetup::default();
        let plant = setup.build().unwrap();
        assert_eq!(plant.safety.len(), 4);
        assert_eq!(plant.system.lipschitz_const(), 1.0);
        assert_eq!(plant.clf.epsilon(), 0.8);
    }
}
