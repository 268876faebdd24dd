//! Asymptotic orders `α ε^β e^(−γ/ε)` as ε ↓ 0.
//!
//! Every quantity of the analysis (transition rates, reduced rates, inverse
//! transition rates, invariant measures and time scales) lives in this
//! class. It is closed under addition, multiplication and reciprocals, which
//! is what makes the hierarchy construction well defined for chains whose
//! rates have this form.
//!
//! Addition keeps only the dominant term. All summands are positive, so no
//! cancellation can ever promote a discarded lower-order term.
//!
//! Two orders are commensurate when their `β` and `γ` coincide exactly.
//! Exponents are user constants combined by `+`/`−`, so exact equality is used
//! on purpose; exponents that are results of inexact decimal arithmetic (for
//! example `0.1 + 0.2` versus `0.3`) will compare as different scale classes.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Natural log of `f64::MAX`; larger exponents overflow.
const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Option<OrderFields>", into = "Option<OrderFields>")]
pub enum AsymptoticOrder {
    /// The identically zero function; additive identity.
    Zero,
    /// `alpha · ε^beta · e^(−gamma/ε)` with `alpha > 0`.
    Term { alpha: f64, beta: f64, gamma: f64 },
}

/// Wire form of a non-zero order; the zero order is `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderFields {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl TryFrom<Option<OrderFields>> for AsymptoticOrder {
    type Error = Error;

    fn try_from(v: Option<OrderFields>) -> Result<Self> {
        match v {
            None => Ok(AsymptoticOrder::Zero),
            Some(f) => AsymptoticOrder::new(f.alpha, f.beta, f.gamma),
        }
    }
}

impl From<AsymptoticOrder> for Option<OrderFields> {
    fn from(x: AsymptoticOrder) -> Self {
        x.fields()
    }
}

/// Limit of `x(ε)/y(ε)` as ε ↓ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatioLimit {
    ZeroLimit,
    Finite(f64),
    InfiniteLimit,
}

/// How `x` compares to `y` as ε ↓ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScaleComparison {
    /// `x ≪ y`
    MuchSmaller,
    /// `x ~ c·y`
    Commensurate(f64),
    /// `x ≫ y`
    MuchLarger,
}

#[inline]
fn clean(v: f64) -> f64 {
    // folds -0.0 into 0.0
    v + 0.0
}

impl AsymptoticOrder {
    /// The constant function 1.
    pub const ONE: AsymptoticOrder = AsymptoticOrder::Term {
        alpha: 1.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && gamma.is_finite()) {
            return Err(Error::NonFinite);
        }
        if alpha <= 0.0 {
            return Err(Error::NonPositiveCoefficient(alpha));
        }
        Ok(AsymptoticOrder::Term {
            alpha,
            beta: clean(beta),
            gamma: clean(gamma),
        })
    }

    /// Shorthand for `e^(−gamma/ε)`.
    pub fn exp_decay(gamma: f64) -> Result<Self> {
        Self::new(1.0, 0.0, gamma)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AsymptoticOrder::Zero)
    }

    pub fn fields(&self) -> Option<OrderFields> {
        match *self {
            AsymptoticOrder::Zero => None,
            AsymptoticOrder::Term { alpha, beta, gamma } => Some(OrderFields { alpha, beta, gamma }),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        self.fields().map(|f| f.alpha)
    }

    pub fn beta(&self) -> Option<f64> {
        self.fields().map(|f| f.beta)
    }

    pub fn gamma(&self) -> Option<f64> {
        self.fields().map(|f| f.gamma)
    }

    /// Natural log of the value at `eps`; `-inf` for the zero order.
    pub fn ln_value(&self, eps: f64) -> f64 {
        match *self {
            AsymptoticOrder::Zero => f64::NEG_INFINITY,
            AsymptoticOrder::Term { alpha, beta, gamma } => {
                alpha.ln() + beta * eps.ln() - gamma / eps
            }
        }
    }

    /// Numeric value at a concrete `eps > 0`. Underflow silently yields 0.
    pub fn evaluate(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let ln = self.ln_value(eps);
        if ln > LN_MAX {
            return Err(Error::Overflow {
                what: self.to_string(),
                eps,
            });
        }
        Ok(ln.exp())
    }

    /// Reciprocal order; the zero order has none.
    pub fn recip(&self) -> Result<Self> {
        match *self {
            AsymptoticOrder::Zero => Err(Error::DivisionByZeroOrder),
            AsymptoticOrder::Term { alpha, beta, gamma } => Ok(AsymptoticOrder::Term {
                alpha: 1.0 / alpha,
                beta: clean(-beta),
                gamma: clean(-gamma),
            }),
        }
    }

    /// Multiplies the leading coefficient by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::NonFinite);
        }
        if c <= 0.0 {
            return Err(Error::NonPositiveCoefficient(c));
        }
        Ok(match *self {
            AsymptoticOrder::Zero => AsymptoticOrder::Zero,
            AsymptoticOrder::Term { alpha, beta, gamma } => AsymptoticOrder::Term {
                alpha: alpha * c,
                beta,
                gamma,
            },
        })
    }

    /// Orders the scale classes of two non-zero orders, ignoring `alpha`.
    /// `Greater` means `self` decays slower (is asymptotically larger).
    fn class_cmp(&self, other: &Self) -> Ordering {
        match (*self, *other) {
            (
                AsymptoticOrder::Term { beta: b1, gamma: g1, .. },
                AsymptoticOrder::Term { beta: b2, gamma: g2, .. },
            ) => g2
                .partial_cmp(&g1)
                .expect("finite exponents")
                .then(b2.partial_cmp(&b1).expect("finite exponents")),
            (AsymptoticOrder::Zero, AsymptoticOrder::Zero) => Ordering::Equal,
            (AsymptoticOrder::Zero, _) => Ordering::Less,
            (_, AsymptoticOrder::Zero) => Ordering::Greater,
        }
    }

    /// `lim x(ε)/y(ε)` as ε ↓ 0.
    pub fn ratio_limit(&self, y: &Self) -> Result<RatioLimit> {
        let (ay, ax) = match (*y, *self) {
            (AsymptoticOrder::Zero, _) => return Err(Error::DivisionByZeroOrder),
            (_, AsymptoticOrder::Zero) => return Ok(RatioLimit::ZeroLimit),
            (AsymptoticOrder::Term { alpha: ay, .. }, AsymptoticOrder::Term { alpha: ax, .. }) => {
                (ay, ax)
            }
        };
        Ok(match self.class_cmp(y) {
            Ordering::Less => RatioLimit::ZeroLimit,
            Ordering::Equal => RatioLimit::Finite(ax / ay),
            Ordering::Greater => RatioLimit::InfiniteLimit,
        })
    }

    pub fn compare_scale(&self, y: &Self) -> Result<ScaleComparison> {
        if self.is_zero() || y.is_zero() {
            return Err(Error::ZeroOrderComparison);
        }
        Ok(match self.ratio_limit(y)? {
            RatioLimit::ZeroLimit => ScaleComparison::MuchSmaller,
            RatioLimit::Finite(c) => ScaleComparison::Commensurate(c),
            RatioLimit::InfiniteLimit => ScaleComparison::MuchLarger,
        })
    }

    /// Whether `self` and `y` share `β` and `γ` (both non-zero).
    pub fn commensurate_with(&self, y: &Self) -> bool {
        !self.is_zero() && !y.is_zero() && self.class_cmp(y) == Ordering::Equal
    }
}

impl Add for AsymptoticOrder {
    type Output = AsymptoticOrder;

    fn add(self, rhs: AsymptoticOrder) -> AsymptoticOrder {
        match self.class_cmp(&rhs) {
            Ordering::Greater => self,
            Ordering::Less => rhs,
            Ordering::Equal => match (self, rhs) {
                (
                    AsymptoticOrder::Term { alpha: a1, beta, gamma },
                    AsymptoticOrder::Term { alpha: a2, .. },
                ) => AsymptoticOrder::Term {
                    alpha: a1 + a2,
                    beta,
                    gamma,
                },
                _ => AsymptoticOrder::Zero,
            },
        }
    }
}

impl Mul for AsymptoticOrder {
    type Output = AsymptoticOrder;

    fn mul(self, rhs: AsymptoticOrder) -> AsymptoticOrder {
        match (self, rhs) {
            (
                AsymptoticOrder::Term { alpha: a1, beta: b1, gamma: g1 },
                AsymptoticOrder::Term { alpha: a2, beta: b2, gamma: g2 },
            ) => AsymptoticOrder::Term {
                alpha: a1 * a2,
                beta: clean(b1 + b2),
                gamma: clean(g1 + g2),
            },
            _ => AsymptoticOrder::Zero,
        }
    }
}

impl std::iter::Sum for AsymptoticOrder {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(AsymptoticOrder::Zero, |acc, x| acc + x)
    }
}

impl<'a> std::iter::Sum<&'a AsymptoticOrder> for AsymptoticOrder {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(AsymptoticOrder::Zero, |acc, x| acc + *x)
    }
}

impl fmt::Display for AsymptoticOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AsymptoticOrder::Zero => write!(f, "0"),
            AsymptoticOrder::Term { alpha, beta, gamma } => {
                write!(f, "{alpha}")?;
                if beta != 0.0 {
                    write!(f, "·ε^{beta}")?;
                }
                if gamma != 0.0 {
                    write!(f, "·e^({}/ε)", -gamma)?;
                }
                Ok(())
            }
        }
    }
}
