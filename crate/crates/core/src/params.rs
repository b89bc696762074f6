//! Elastic constants and misfit potentials.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Lower end of the admissible Poisson-ratio range.
pub const NU_MIN: f64 = -1.0;
/// Upper end of the admissible Poisson-ratio range.
pub const NU_MAX: f64 = 0.5;

/// Isotropic elastic constants with the derived anisotropy parameter.
///
/// `beta = 1 - nu` controls the anisotropic kernel; the kernel stays strictly
/// positive exactly for `beta` in the open interval `(2/3, 3/2)`, i.e.
/// `nu` in `(-1/2, 1/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    pub nu: f64,
    pub shear_modulus: f64,
    pub beta: f64,
    pub kernel_positive: bool,
}

impl ElasticParams {
    /// Validates `nu` in `[-1, 1/2]` and `g > 0`, derives `beta` and the
    /// kernel-positivity classification.
    pub fn new(nu: f64, g: f64) -> Result<Self> {
        if !nu.is_finite() || !(NU_MIN..=NU_MAX).contains(&nu) {
            return Err(Error::Validation(format!(
                "poisson ratio nu = {nu} outside admissible range [{NU_MIN}, {NU_MAX}]"
            )));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::Validation(format!(
                "shear modulus G = {g} violates G > 0"
            )));
        }
        let beta = 1.0 - nu;
        // The boundary values 2/3 and 3/2 are excluded; the epsilon guards
        // against roundoff in beta = 1 - nu landing one ulp inside.
        Ok(Self {
            nu,
            shear_modulus: g,
            beta,
            kernel_positive: beta > 2.0 / 3.0 + 1e-12 && beta < 1.5 - 1e-12,
        })
    }

    /// Constructor with the normalization `G = 1/2` used throughout.
    pub fn with_nu(nu: f64) -> Result<Self> {
        Self::new(nu, 0.5)
    }

    /// Same classification, parameterized by `beta = 1 - nu`.
    pub fn with_beta(beta: f64) -> Result<Self> {
        Self::with_nu(1.0 - beta)
    }
}

/// Tag distinguishing the built-in sinusoidal potential from user-supplied
/// black boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Sinusoidal,
    UserSupplied,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Double-well misfit potential with wells pinned at -1 and +1.
///
/// Construction checks the well structure by dense sampling: `W` must exceed
/// `max(W(-1), W(1))` on the open interval and `W''(+-1)` must be positive.
/// The exception is [`MisfitPotential::unchecked`], which admits degenerate
/// diagnostics potentials (e.g. `W' == 0`) that deliberately fail the checks.
#[derive(Clone)]
pub struct MisfitPotential {
    kind: PotentialKind,
    value: ScalarFn,
    deriv: ScalarFn,
    second_deriv: ScalarFn,
}

impl fmt::Debug for MisfitPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MisfitPotential")
            .field("kind", &self.kind)
            .finish()
    }
}

impl MisfitPotential {
    /// The lattice-periodic potential `W(u) = (1 + cos(pi u)) / pi^2`.
    ///
    /// `W(+-1) = 0`, `W'(u) = -sin(pi u)/pi`, `W''(u) = -cos(pi u)`, so
    /// `W''(+-1) = 1` exactly.
    pub fn sinusoidal() -> Self {
        Self {
            kind: PotentialKind::Sinusoidal,
            value: Arc::new(|u| (1.0 + (PI * u).cos()) / (PI * PI)),
            deriv: Arc::new(|u| -(PI * u).sin() / PI),
            second_deriv: Arc::new(|u| -(PI * u).cos()),
        }
    }

    /// Wraps user-supplied `W`, `W'`, `W''` and validates the well structure
    /// by sampling 1000 interior points.
    pub fn user_supplied<V, D, S>(value: V, deriv: D, second_deriv: S) -> Result<Self>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let p = Self {
            kind: PotentialKind::UserSupplied,
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            second_deriv: Arc::new(second_deriv),
        };
        p.validate()?;
        Ok(p)
    }

    /// Unvalidated wrapper for degenerate test potentials.
    pub fn unchecked<V, D, S>(value: V, deriv: D, second_deriv: S) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::UserSupplied,
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            second_deriv: Arc::new(second_deriv),
        }
    }

    /// Dense-sampling well check: `W > max(W(-1), W(1))` strictly inside
    /// `(-1, 1)` and `W''(+-1) > 0`.
    pub fn validate(&self) -> Result<()> {
        let w_minus = self.value(-1.0);
        let w_plus = self.value(1.0);
        if !w_minus.is_finite() || !w_plus.is_finite() {
            return Err(Error::Validation("W(+-1) is not finite".into()));
        }
        let floor = w_minus.max(w_plus);
        let n = 1000;
        for j in 1..n {
            let u = -1.0 + 2.0 * j as f64 / n as f64;
            let w = self.value(u);
            if !w.is_finite() {
                return Err(Error::Validation(format!("W({u}) is not finite")));
            }
            if w <= floor {
                return Err(Error::Validation(format!(
                    "W({u}) = {w} does not exceed max(W(-1), W(1)) = {floor}"
                )));
            }
        }
        for u in [-1.0, 1.0] {
            let w2 = self.second_deriv(u);
            if !(w2 > 0.0) {
                return Err(Error::Validation(format!(
                    "W''({u}) = {w2} violates W''(+-1) > 0"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    /// The pair of well positions; fixed at `(-1, 1)` by normalization.
    pub fn well_positions(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    pub fn value(&self, u: f64) -> f64 {
        (self.value)(u)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        (self.deriv)(u)
    }

    pub fn second_deriv(&self, u: f64) -> f64 {
        (self.second_deriv)(u)
    }
}
