//! Stripe-noise characterizations for the stripe component `S`.
//!
//! Each model splits its penalty `J(S)` into a primal term (handled inside
//! the `S` update) and dual blocks `(operator on S, term)`:
//!
//! | model | primal | dual blocks |
//! |-------|--------|-------------|
//! | `fc`  | `λ‖S‖₁` | `(D_v, ι₀)`, plus `(D_t, ι₀)` when temporal |
//! | `s`   | `λ‖S‖₁` | none |
//! | `gs`  | none | `(I, λ Σ‖S(:,j,k)‖₂)` |
//! | `lr`  | none | `(I, λ Σ‖S(:,:,k)‖_*)` |
//! | `tv`  | `λ‖S‖₁` | `(D_v, μ‖·‖₁)` |

use std::fmt;
use std::str::FromStr;

use crate::cube::{Axis, Cube, CubeTuple, Dims};
use crate::error::{Error, Result};
use crate::linop::LinOp;
use crate::prox::ProxTerm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StripeModelKind {
    /// Flatness constraint.
    Fc,
    /// Sparsity.
    S,
    /// Group sparsity over vertical columns.
    Gs,
    /// Band-wise low rank.
    Lr,
    /// Vertical TV plus sparsity.
    Tv,
}

impl StripeModelKind {
    pub const ALL: [StripeModelKind; 5] = [
        StripeModelKind::Fc,
        StripeModelKind::S,
        StripeModelKind::Gs,
        StripeModelKind::Lr,
        StripeModelKind::Tv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StripeModelKind::Fc => "fc",
            StripeModelKind::S => "s",
            StripeModelKind::Gs => "gs",
            StripeModelKind::Lr => "lr",
            StripeModelKind::Tv => "tv",
        }
    }

    pub fn uses_mu(self) -> bool {
        self == StripeModelKind::Tv
    }
}

impl fmt::Display for StripeModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StripeModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StripeModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::config(format!("unknown stripe model '{s}' (expected fc, s, gs, lr, tv)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeModel {
    pub kind: StripeModelKind,
    /// Adds the temporal flatness constraint (`fc` only).
    pub temporal: bool,
    pub lambda: f64,
    pub mu: f64,
}

/// What a stripe model adds to the splitting problem.
#[derive(Debug, Clone)]
pub struct StripeContribution {
    /// Term applied by the primal prox step on `S`.
    pub primal: ProxTerm,
    pub blocks: Vec<(LinOp, ProxTerm)>,
}

/// `J(S)` with the flatness constraint reported separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeObjective {
    pub value: f64,
    /// `(‖D_v S‖_F, ‖D_t S‖_F)`; both zero for models without constraints.
    pub flatness: (f64, f64),
}

impl StripeObjective {
    /// Whether the constraint residuals are within `tol`, normalised by
    /// `1 + ‖S‖_F`.
    pub fn is_feasible(&self, s_norm: f64, tol: f64) -> bool {
        let scale = 1.0 + s_norm;
        self.flatness.0 / scale <= tol && self.flatness.1 / scale <= tol
    }
}

/// `(‖D_v s‖_F, ‖D_t s‖_F)`; the second entry is 0 unless `temporal` is set
/// and the cube has at least two bands.
pub fn flatness_residual(s: &Cube, temporal: bool) -> (f64, f64) {
    let [n1, _, n3] = s.dims();
    let v = if n1 >= 2 {
        s.diff(Axis::Vertical).map(|d| d.fro_norm()).unwrap_or(0.0)
    } else {
        0.0
    };
    let t = if temporal && n3 >= 2 {
        s.diff(Axis::Temporal).map(|d| d.fro_norm()).unwrap_or(0.0)
    } else {
        0.0
    };
    (v, t)
}

impl StripeModel {
    pub fn new(kind: StripeModelKind, lambda: f64, mu: f64, temporal: bool) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(StripeModel {
            kind,
            temporal: temporal && kind == StripeModelKind::Fc,
            lambda,
            mu,
        })
    }

    pub fn fc(lambda: f64, temporal: bool) -> Result<Self> {
        Self::new(StripeModelKind::Fc, lambda, 0.0, temporal)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn contribute(&self, dims: Dims) -> Result<StripeContribution> {
        let lam = self.lambda;
        let (primal, blocks) = match self.kind {
            StripeModelKind::Fc => {
                let mut blocks = vec![(LinOp::diff(Axis::Vertical, dims), ProxTerm::indicator_zero())];
                if self.temporal {
                    blocks.push((LinOp::diff(Axis::Temporal, dims), ProxTerm::indicator_zero()));
                }
                (ProxTerm::l1(lam)?, blocks)
            }
            StripeModelKind::S => (ProxTerm::l1(lam)?, vec![]),
            StripeModelKind::Gs => (
                ProxTerm::zero(),
                vec![(LinOp::identity(dims), ProxTerm::l21_columns(lam)?)],
            ),
            StripeModelKind::Lr => (
                ProxTerm::zero(),
                vec![(LinOp::identity(dims), ProxTerm::nuclear(lam)?)],
            ),
            StripeModelKind::Tv => (
                ProxTerm::l1(lam)?,
                vec![(LinOp::diff(Axis::Vertical, dims), ProxTerm::l1(self.mu)?)],
            ),
        };
        for (op, _) in &blocks {
            op.validate()?;
        }
        Ok(StripeContribution { primal, blocks })
    }

    /// `J(s)`: the primal term plus every non-indicator block term.
    pub fn objective(&self, s: &Cube) -> Result<StripeObjective> {
        let contrib = self.contribute(s.dims())?;
        let arg = CubeTuple::single(s.clone());
        let mut value = contrib.primal.evaluate(&arg)?;
        for (op, term) in &contrib.blocks {
            if !term.is_indicator() {
                value += term.evaluate(&op.apply(&arg)?)?;
            }
        }
        let flatness = if self.kind == StripeModelKind::Fc {
            flatness_residual(s, self.temporal)
        } else {
            (0.0, 0.0)
        };
        Ok(StripeObjective { value, flatness })
    }
}
