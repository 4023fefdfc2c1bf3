//! Control-affine plants `ẋ = f(x) + g(x)u`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub type DriftFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type InputMapFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// A state sample: entries of `x` together with the time it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub time: f64,
    pub entries: Vector,
}

impl StateVector {
    pub fn new(time: f64, entries: Vector) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "state time must be finite and nonnegative, got {time}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "state entries must be finite".to_string(),
            ));
        }
        Ok(Self { time, entries })
    }

    pub fn from_slice(time: f64, entries: &[f64]) -> Result<Self> {
        Self::new(time, Vector::from_column_slice(entries))
    }
}

/// Control-affine plant with a declared Lipschitz constant for the
/// closed-loop vector field under a held input.
///
/// The constant is a user declaration. Trajectory bounds derived from it are
/// only as valid as the declaration over the region the trajectory visits.
#[derive(Clone)]
pub struct AffineSystem {
    state_dim: usize,
    input_dim: usize,
    drift: DriftFn,
    input_map: InputMapFn,
    lipschitz_const: f64,
    label: String,
}

impl fmt::Debug for AffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineSystem")
            .field("label", &self.label)
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .field("lipschitz_const", &self.lipschitz_const)
            .finish_non_exhaustive()
    }
}

impl AffineSystem {
    pub fn new(
        label: impl Into<String>,
        state_dim: usize,
        input_dim: usize,
        lipschitz_const: f64,
        drift: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        input_map: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Result<Self> {
        if state_dim == 0 || input_dim == 0 {
            return Err(Error::InvalidParameter(
                "state and input dimensions must be positive".to_string(),
            ));
        }
        if !(lipschitz_const > 0.0 && lipschitz_const.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lipschitz constant must be positive, got {lipschitz_const}"
            )));
        }
        Ok(Self {
            state_dim,
            input_dim,
            drift: Arc::new(drift),
            input_map: Arc::new(input_map),
            lipschitz_const,
            label: label.into(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Returns a copy carrying a different Lipschitz declaration.
    pub fn with_lipschitz_const(&self, lipschitz_const: f64) -> Result<Self> {
        if !(lipschitz_const > 0.0 && lipschitz_const.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lipschitz constant must be positive, got {lipschitz_const}"
            )));
        }
        Ok(Self {
            lipschitz_const,
            ..self.clone()
        })
    }

    pub fn drift(&self, x: &Vector) -> Result<Vector> {
        check_dim("state", self.state_dim, x.len())?;
        let f = (self.drift)(x);
        check_dim("drift output", self.state_dim, f.len())?;
        Ok(f)
    }

    pub fn input_map(&self, x: &Vector) -> Result<Matrix> {
        check_dim("state", self.state_dim, x.len())?;
        let g = (self.input_map)(x);
        if g.nrows() != self.state_dim || g.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "input map shape",
                expected: self.state_dim * self.input_dim,
                actual: g.nrows() * g.ncols(),
            });
        }
        Ok(g)
    }

    /// `f(x) + g(x) u`.
    pub fn eval_vector_field(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        check_dim("input", self.input_dim, u.len())?;
        let mut dx = self.drift(x)?;
        dx += self.input_map(x)? * u;
        Ok(dx)
    }

    /// Unchecked evaluation for hot loops whose dimensions were validated
    /// once up front.
    pub(crate) fn vector_field_unchecked(&self, x: &Vector, u: &Vector) -> Vector {
        let mut dx = (self.drift)(x);
        dx.gemv(1.0, &(self.input_map)(x), u, 1.0);
        dx
    }
}

/// The double integrator `ẋ1 = x2, ẋ2 = u` with `L = 1`.
pub fn double_integrator() -> AffineSystem {
    AffineSystem::new(
        "double_integrator",
        2,
        1,
        1.0,
        |x| Vector::from_column_slice(&[x[1], 0.0]),
        |_| Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
    )
    .expect("double integrator parameters are valid")
}

/// Empirical Lipschitz estimate. Never used in place of the declared constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// Largest observed `‖F(x) − F(y)‖ / ‖x − y‖`.
    pub max_ratio: f64,
    pub samples: usize,
    pub declared: f64,
}

impl LipschitzEstimate {
    /// True when no sampled pair contradicted the declared constant.
    pub fn consistent_with_declaration(&self) -> bool {
        self.max_ratio <= self.declared * (1.0 + 1e-12)
    }
}

/// Samples random state pairs in `[state_lo, state_hi]` sharing a random held
/// input in `[input_lo, input_hi]`, and reports the largest difference ratio
/// of the closed-loop field. This is a lower estimate of the true constant.
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    sys: &AffineSystem,
    state_lo: &[f64],
    state_hi: &[f64],
    input_lo: &[f64],
    input_hi: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<LipschitzEstimate> {
    check_dim("state lower box", sys.state_dim(), state_lo.len())?;
    check_dim("state upper box", sys.state_dim(), state_hi.len())?;
    check_dim("input lower box", sys.input_dim(), input_lo.len())?;
    check_dim("input upper box", sys.input_dim(), input_hi.len())?;
    if state_lo.iter().zip(state_hi).any(|(lo, hi)| lo > hi)
        || input_lo.iter().zip(input_hi).any(|(lo, hi)| lo > hi)
    {
        return Err(Error::InvalidParameter(
            "sampling box lower bound exceeds upper bound".to_string(),
        ));
    }
    let mut draw = |lo: &[f64], hi: &[f64]| -> Vector {
        Vector::from_iterator(
            lo.len(),
            lo.iter().zip(hi).map(|(&a, &b)| {
                if a == b {
                    a
                } else {
                    rng.random_range(a..=b)
                }
            }),
        )
    };
    let mut max_ratio = 0.0_f64;
    for _ in 0..samples {
        let x = draw(state_lo, state_hi);
        let y = draw(state_lo, state_hi);
        let u = draw(input_lo, input_hi);
        let dist = (&x - &y).norm();
        if dist <= f64::EPSILON {
            continue;
        }
        let diff = sys.eval_vector_field(&x, &u)? - sys.eval_vector_field(&y, &u)?;
        max_ratio = max_ratio.max(diff.norm() / dist);
    }
    Ok(LipschitzEstimate {
        max_ratio,
        samples,
        declared: sys.lipschitz_const(),
    })
}
