//! Second-order truncated Taylor arithmetic.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to `n` chart coordinates. Arithmetic propagates all three exactly
//! (up to floating-point rounding), so seeding the coordinates once and
//! evaluating a field expression yields `f`, `∂f` and `∂²f` at a point
//! without any finite differencing.
//!
//! ```
//! use paraverify::jets::Jet2;
//!
//! // f(x, y) = 1 + x*y at (0.5, 1)
//! let x = Jet2::variable(0.5, 0, 2).unwrap();
//! let y = Jet2::variable(1.0, 1, 2).unwrap();
//! let f = Jet2::constant(1.0, 2) + &x * &y;
//! assert_eq!(f.value(), 1.5);
//! assert_eq!(f.gradient(), &[1.0, 0.5]);
//! assert_eq!(f.hessian(0, 1), 1.0);
//! assert_eq!(f.hessian(0, 0), 0.0);
//! ```

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Smallest `|cos x|` accepted by `tan`.
const TAN_POLE_TOLERANCE: f64 = 1e-12;

/// Largest integer exponent expanded into repeated multiplication.
pub const MAX_REPEATED_POWER: i64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for {dim} coordinates")]
    VarIndexOutOfRange { index: usize, dim: usize },
    #[error("jet dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{function} undefined at {value}")]
    Domain { function: &'static str, value: f64 },
    #[error("non-finite result")]
    NonFinite,
}

/// Elementary functions understood by jets and by the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Elementary {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Elementary {
    pub const ALL: [Elementary; 9] = [
        Elementary::Sin,
        Elementary::Cos,
        Elementary::Tan,
        Elementary::Exp,
        Elementary::Log,
        Elementary::Sinh,
        Elementary::Cosh,
        Elementary::Tanh,
        Elementary::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Tan => "tan",
            Elementary::Exp => "exp",
            Elementary::Log => "log",
            Elementary::Sinh => "sinh",
            Elementary::Cosh => "cosh",
            Elementary::Tanh => "tanh",
            Elementary::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Rejects arguments outside the function's domain.
    pub fn check_domain(self, v: f64) -> Result<(), JetError> {
        let ok = match self {
            Elementary::Log | Elementary::Sqrt => v > 0.0,
            Elementary::Tan => v.cos().abs() >= TAN_POLE_TOLERANCE,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(JetError::Domain {
                function: self.name(),
                value: v,
            })
        }
    }

    /// `f(v)`. Both the real and the jet carriers go through this, so their
    /// values agree bit for bit.
    pub fn value(self, v: f64) -> Result<f64, JetError> {
        self.check_domain(v)?;
        Ok(match self {
            Elementary::Sin => v.sin(),
            Elementary::Cos => v.cos(),
            Elementary::Tan => v.tan(),
            Elementary::Exp => v.exp(),
            Elementary::Log => v.ln(),
            Elementary::Sinh => v.sinh(),
            Elementary::Cosh => v.cosh(),
            Elementary::Tanh => v.tanh(),
            Elementary::Sqrt => v.sqrt(),
        })
    }

    /// `(f(v), f'(v), f''(v))`.
    pub fn taylor(self, v: f64) -> Result<(f64, f64, f64), JetError> {
        let f = self.value(v)?;
        Ok(match self {
            Elementary::Sin => (f, v.cos(), -f),
            Elementary::Cos => (f, -v.sin(), -f),
            Elementary::Tan => {
                let d = 1.0 + f * f;
                (f, d, 2.0 * f * d)
            }
            Elementary::Exp => (f, f, f),
            Elementary::Log => (f, 1.0 / v, -1.0 / (v * v)),
            Elementary::Sinh => (f, v.cosh(), f),
            Elementary::Cosh => (f, v.sinh(), f),
            Elementary::Tanh => {
                let d = 1.0 - f * f;
                (f, d, -2.0 * f * d)
            }
            Elementary::Sqrt => (f, 0.5 / f, -0.25 / (f * v)),
        })
    }
}

impl fmt::Display for Elementary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value, gradient and (symmetric, dense) Hessian of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    value: f64,
    gradient: Vec<f64>,
    // row-major n*n, always mirrored
    hessian: Vec<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Jet2 {
            value,
            gradient: vec![0.0; n],
            hessian: vec![0.0; n * n],
        }
    }

    /// The coordinate function `x_index`, valued `value` at the point.
    pub fn variable(value: f64, index: usize, n: usize) -> Result<Self, JetError> {
        if index >= n {
            return Err(JetError::VarIndexOutOfRange { index, dim: n });
        }
        let mut jet = Jet2::constant(value, n);
        jet.gradient[index] = 1.0;
        Ok(jet)
    }

    pub fn seed(value: f64, var_index: Option<usize>, n: usize) -> Result<Self, JetError> {
        match var_index {
            Some(i) => Jet2::variable(value, i, n),
            None => Ok(Jet2::constant(value, n)),
        }
    }

    /// Seeds every coordinate of `point`.
    pub fn seed_point(point: &[f64]) -> Vec<Jet2> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut jet = Jet2::constant(v, n);
                jet.gradient[i] = 1.0;
                jet
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }

    /// Row-major Hessian.
    pub fn hessian_flat(&self) -> &[f64] {
        &self.hessian
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|g| g.is_finite())
            && self.hessian.iter().all(|h| h.is_finite())
    }

    pub fn ensure_finite(self) -> Result<Self, JetError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(JetError::NonFinite)
        }
    }

    fn check_dim(&self, other: &Jet2) -> Result<(), JetError> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(JetError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }

    /// Builds a jet from a value, gradient and a generator for the upper
    /// triangle of the Hessian, mirroring it below the diagonal.
    fn assemble(value: f64, gradient: Vec<f64>, mut upper: impl FnMut(usize, usize) -> f64) -> Self {
        let n = gradient.len();
        let mut hessian = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let h = upper(i, j);
                hessian[i * n + j] = h;
                hessian[j * n + i] = h;
            }
        }
        Jet2 {
            value,
            gradient,
            hessian,
        }
    }

    /// Chain rule for `f(self)` given `(f, f', f'')` at `self.value`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.dim();
        let gradient = self.gradient.iter().map(|g| f1 * g).collect();
        Jet2::assemble(f0, gradient, |i, j| {
            f1 * self.hessian[i * n + j] + f2 * self.gradient[i] * self.gradient[j]
        })
    }

    pub fn apply(&self, function: Elementary) -> Result<Jet2, JetError> {
        let (f0, f1, f2) = function.taylor(self.value)?;
        self.compose(f0, f1, f2).ensure_finite()
    }

    pub fn try_add(&self, other: &Jet2) -> Result<Jet2, JetError> {
        self.check_dim(other)?;
        Ok(self.zip_linear(other, 1.0))
    }

    pub fn try_sub(&self, other: &Jet2) -> Result<Jet2, JetError> {
        self.check_dim(other)?;
        Ok(self.zip_linear(other, -1.0))
    }

    fn zip_linear(&self, other: &Jet2, sign: f64) -> Jet2 {
        let value = if sign > 0.0 {
            self.value + other.value
        } else {
            self.value - other.value
        };
        let combine = |a: f64, b: f64| if sign > 0.0 { a + b } else { a - b };
        Jet2 {
            value,
            gradient: self
                .gradient
                .iter()
                .zip(&other.gradient)
                .map(|(&a, &b)| combine(a, b))
                .collect(),
            hessian: self
                .hessian
                .iter()
                .zip(&other.hessian)
                .map(|(&a, &b)| combine(a, b))
                .collect(),
        }
    }

    pub fn try_mul(&self, other: &Jet2) -> Result<Jet2, JetError> {
        self.check_dim(other)?;
        let n = self.dim();
        let (a, b) = (self, other);
        let gradient = a
            .gradient
            .iter()
            .zip(&b.gradient)
            .map(|(&ga, &gb)| ga * b.value + a.value * gb)
            .collect();
        Ok(Jet2::assemble(a.value * b.value, gradient, |i, j| {
            a.hessian[i * n + j] * b.value
                + a.value * b.hessian[i * n + j]
                + (a.gradient[i] * b.gradient[j] + b.gradient[i] * a.gradient[j])
        }))
    }

    /// Quotient; the value is computed as a plain `a / b`.
    pub fn checked_div(&self, other: &Jet2) -> Result<Jet2, JetError> {
        self.check_dim(other)?;
        if other.value == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let v = other.value;
        let recip = other.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
        let mut q = self.try_mul(&recip)?;
        q.value = self.value / other.value;
        q.ensure_finite()
    }

    pub fn scale(&self, k: f64) -> Jet2 {
        Jet2 {
            value: self.value * k,
            gradient: self.gradient.iter().map(|g| g * k).collect(),
            hessian: self.hessian.iter().map(|h| h * k).collect(),
        }
    }

    pub fn add_real(&self, k: f64) -> Jet2 {
        let mut out = self.clone();
        out.value += k;
        out
    }

    pub fn div_real(&self, k: f64) -> Result<Jet2, JetError> {
        self.checked_div(&Jet2::constant(k, self.dim()))
    }

    /// Integer power by repeated multiplication; valid for negative bases.
    pub fn powi(&self, k: i64) -> Result<Jet2, JetError> {
        let n = self.dim();
        let mut acc = Jet2::constant(1.0, n);
        for step in 0..k.unsigned_abs() {
            acc = if step == 0 {
                self.clone()
            } else {
                acc.try_mul(self)?
            };
        }
        if k < 0 {
            Jet2::constant(1.0, n).checked_div(&acc)
        } else {
            acc.ensure_finite()
        }
    }

    /// Real power: integer exponents use [`Jet2::powi`], anything else is
    /// `exp(e·log a)` and needs a positive base.
    pub fn powf(&self, e: f64) -> Result<Jet2, JetError> {
        if e.fract() == 0.0 && e.abs() <= MAX_REPEATED_POWER as f64 {
            return self.powi(e as i64);
        }
        if self.value <= 0.0 {
            return Err(JetError::Domain {
                function: "pow",
                value: self.value,
            });
        }
        self.apply(Elementary::Log)?.scale(e).apply(Elementary::Exp)
    }

    /// `self^exponent = exp(exponent·log self)`.
    pub fn pow(&self, exponent: &Jet2) -> Result<Jet2, JetError> {
        if self.value <= 0.0 {
            return Err(JetError::Domain {
                function: "pow",
                value: self.value,
            });
        }
        self.apply(Elementary::Log)?
            .try_mul(exponent)?
            .apply(Elementary::Exp)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            value: -self.value,
            gradient: self.gradient.iter().map(|g| -g).collect(),
            hessian: self.hessian.iter().map(|h| -h).collect(),
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        -&self
    }
}

// Operator impls panic on dimension mismatch; use the `try_*` forms when the
// operands come from different charts.
macro_rules! jet_binop {
    ($trait:ident, $method:ident, $try:ident) => {
        impl $trait<&Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                self.$try(rhs).expect("jet dimension mismatch")
            }
        }
        impl $trait<Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, try_add);
jet_binop!(Sub, sub, try_sub);
jet_binop!(Mul, mul, try_mul);

impl Add<f64> for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: f64) -> Jet2 {
        self.add_real(rhs)
    }
}

impl Sub<f64> for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: f64) -> Jet2 {
        self.add_real(-rhs)
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}
