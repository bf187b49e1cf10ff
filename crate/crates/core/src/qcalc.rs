//! q- and (q,h)-difference calculus.
//!
//! Everything downstream is built from the pieces here: the q-bracket, finite
//! and infinite q-Pochhammer symbols, exact polynomial q-derivatives and the
//! scaling operator `f(w) -> f(cw)`, and the Jackson and (q,h) integrals.
//!
//! Infinite products and sums are truncated with a geometric tail bound and a
//! hard cap of [`MAX_ITERATIONS`] steps; exceeding the cap is an error, never a
//! silently truncated value.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration cap for truncated infinite sums and products.
pub const MAX_ITERATIONS: usize = 10_000;

/// Default relative tolerance for truncated infinite products.
pub const PRODUCT_TOL: f64 = 1e-17;

/// Default relative tolerance for truncated series and Jackson sums.
pub const SERIES_TOL: f64 = 1e-16;

/// Deformation parameter `0 < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 && q < 1.0 {
            Ok(QParam(q))
        } else {
            Err(Error::invalid(format!("q must lie in (0, 1), got {q}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `q^n` for any integer `n`.
    #[inline]
    pub fn pow(self, n: i32) -> f64 {
        self.0.powi(n)
    }
}

impl TryFrom<f64> for QParam {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        QParam::new(q)
    }
}

impl From<QParam> for f64 {
    fn from(q: QParam) -> f64 {
        q.0
    }
}

impl fmt::Display for QParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The q-bracket `[n] = (1 - q^n)/(1 - q)`, defined for negative `n` too.
#[inline]
pub fn q_bracket(n: i32, q: QParam) -> f64 {
    (1.0 - q.pow(n)) / (1.0 - q.value())
}

/// Finite q-Pochhammer symbol `(x; q)_n`.
pub fn q_pochhammer(x: f64, q: QParam, n: usize) -> f64 {
    let q = q.value();
    let mut prod = 1.0;
    let mut qj = 1.0;
    for _ in 0..n {
        prod *= 1.0 - qj * x;
        qj *= q;
    }
    prod
}

/// Infinite q-Pochhammer symbol `(x; q)_inf`.
///
/// The product stops once the remaining factors can change the result by a
/// relative amount below `tol` (the tail satisfies
/// `sum_{i>=j} |q^i x| = |q^j x| / (1 - q)`).
pub fn q_pochhammer_inf(x: f64, q: QParam, tol: f64) -> Result<f64> {
    let qv = q.value();
    let mut prod = 1.0;
    let mut term = x;
    for _ in 0..MAX_ITERATIONS {
        if term.abs() < tol * (1.0 - qv) {
            return Ok(prod);
        }
        prod *= 1.0 - term;
        term *= qv;
    }
    Err(Error::NonConvergence { what: format!("({x}; {qv})_inf"), iterations: MAX_ITERATIONS })
}

/// Infinite q-Pochhammer symbol with a complex argument.
pub fn q_pochhammer_inf_complex(z: Complex64, q: QParam, tol: f64) -> Result<Complex64> {
    let qv = q.value();
    let mut prod = Complex64::new(1.0, 0.0);
    let mut term = z;
    for _ in 0..MAX_ITERATIONS {
        if term.norm() < tol * (1.0 - qv) {
            return Ok(prod);
        }
        prod *= Complex64::new(1.0, 0.0) - term;
        term *= qv;
    }
    Err(Error::NonConvergence { what: format!("({z}; {qv})_inf"), iterations: MAX_ITERATIONS })
}

/// q-Pochhammer symbol with a real index, `(x; q)_r = (x; q)_inf / (x q^r; q)_inf`.
///
/// Nonnegative integer `r` falls back to the finite product, which also covers
/// arguments where the infinite quotient would be `0/0`.
pub fn q_pochhammer_real(x: f64, q: QParam, r: f64, tol: f64) -> Result<f64> {
    if r >= 0.0 && r.fract() == 0.0 && r < MAX_ITERATIONS as f64 {
        return Ok(q_pochhammer(x, q, r as usize));
    }
    let den = q_pochhammer_inf(x * q.value().powf(r), q, tol)?;
    if den == 0.0 {
        return Err(Error::Pole { at: x, what: format!("(x q^{r}; q)_inf vanishes") });
    }
    Ok(q_pochhammer_inf(x, q, tol)? / den)
}

/// Real polynomial in the monomial basis, lowest degree first.
///
/// Trailing zero coefficients are trimmed on construction, so the last
/// coefficient is nonzero unless the polynomial is zero (stored as `[0]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `c * w^n`.
    pub fn monomial(n: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = c;
        Polynomial::new(coeffs)
    }

    /// Polynomial `c1 w + c0`.
    pub fn linear(c1: f64, c0: f64) -> Self {
        Polynomial::new(vec![c0, c1])
    }

    /// Polynomial `c2 w^2 + c1 w + c0`.
    pub fn quadratic(c2: f64, c1: f64, c0: f64) -> Self {
        Polynomial::new(vec![c0, c1, c2])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `w^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Multiplication by a scalar.
    pub fn scale(&self, c: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Argument scaling `p(w) -> p(cw)`; with `c = q` this is the operator
    /// `Q`, with `c = 1/q` its inverse.
    pub fn scale_arg(&self, c: f64) -> Self {
        let mut ck = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|a| {
                let v = a * ck;
                ck *= c;
                v
            })
            .collect();
        Polynomial::new(coeffs)
    }

    /// Exact q-derivative: `c_k w^k -> [k] c_k w^(k-1)`.
    pub fn q_derivative(&self, q: QParam) -> Self {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| q_bracket(k as i32, q) * c)
            .collect();
        Polynomial::new(coeffs)
    }

    /// Multiplication by `w`.
    pub fn shift_up(&self) -> Self {
        if self.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        Polynomial::new(coeffs)
    }

    /// Largest coefficient magnitude.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `||self - reference||_inf / ||reference||_inf` over coefficients.
    pub fn relative_difference(&self, reference: &Polynomial) -> f64 {
        let diff = (self - reference).norm_inf();
        let scale = reference.norm_inf();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 && !(k == 0 && first) {
                continue;
            }
            if !first {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            let m = c.abs();
            match k {
                0 => write!(f, "{m}")?,
                1 => write!(f, "{m}w")?,
                _ => write!(f, "{m}w^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

fn zip_with(a: &Polynomial, b: &Polynomial, op: impl Fn(f64, f64) -> f64) -> Polynomial {
    let n = a.coeffs.len().max(b.coeffs.len());
    Polynomial::new((0..n).map(|k| op(a.coeff(k), b.coeff(k))).collect())
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// Exact q-derivative of a polynomial.
pub fn q_derivative_poly(p: &Polynomial, q: QParam) -> Polynomial {
    p.q_derivative(q)
}

/// Argument scaling `p(w) -> p(cw)`.
pub fn scale_poly(p: &Polynomial, c: f64) -> Polynomial {
    p.scale_arg(c)
}

/// Element `(q, h)` of the affine group acting by `x -> qx + h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub q: f64,
    pub h: f64,
}

impl AffineParams {
    pub fn new(q: f64, h: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 && h.is_finite() {
            Ok(AffineParams { q, h })
        } else {
            Err(Error::invalid(format!("affine parameters need q > 0 and finite h, got ({q}, {h})")))
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.q * x + self.h
    }

    /// Limit point `h / (1 - q)` of the iterated map, when `q != 1`.
    pub fn fixed_point(&self) -> Option<f64> {
        (self.q != 1.0).then(|| self.h / (1.0 - self.q))
    }
}

/// The (q,h)-difference quotient `(f(x) - f(qx+h)) / (x - (qx+h))`.
pub fn qh_derivative(f: impl Fn(f64) -> f64, x: f64, params: AffineParams) -> Result<f64> {
    let y = params.apply(x);
    let dx = x - y;
    if dx == 0.0 {
        return Err(Error::FixedPoint(x));
    }
    Ok((f(x) - f(y)) / dx)
}

/// Tail-controlled summation of `sum_k terms(k)` where `|terms(k)|` is
/// bounded by `bound_factor * q^k * |sample_k|`.
///
/// `next(k)` returns `(term, sample)`; summation stops when the geometric
/// tail `q^(k+1)/(1-q) * bound_factor * max(recent samples)` drops below
/// `tol` times the accumulated absolute mass.
fn geometric_sum<F>(mut next: F, q: f64, bound_factor: f64, tol: f64, what: &str) -> Result<f64>
where
    F: FnMut(usize) -> Result<(f64, f64)>,
{
    const WINDOW: usize = 8;
    let mut sum = 0.0;
    let mut mass = 0.0;
    let mut recent = [0.0f64; WINDOW];
    let mut qk = 1.0;
    for k in 0..MAX_ITERATIONS {
        let (term, sample) = next(k)?;
        if !term.is_finite() {
            return Err(Error::Domain(format!("{what}: non-finite term at step {k}")));
        }
        sum += term;
        mass += term.abs();
        recent[k % WINDOW] = sample.abs();
        qk *= q;
        if k + 1 >= WINDOW {
            let sup = recent.iter().fold(0.0f64, |m, v| m.max(*v));
            let tail = qk / (1.0 - q) * bound_factor * sup;
            if tail <= tol * mass || tail == 0.0 {
                return Ok(sum);
            }
        }
    }
    Err(Error::NonConvergence { what: what.to_string(), iterations: MAX_ITERATIONS })
}

/// Jackson integral `(1-q) sum_k q^k [b f(q^k b) - a f(q^k a)]` for a fallible integrand.
pub fn try_jackson_integral<F>(mut f: F, a: f64, b: f64, q: QParam, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let qv = q.value();
    let mut qk = 1.0;
    geometric_sum(
        |_| {
            let fb = if b != 0.0 { f(qk * b)? } else { 0.0 };
            let fa = if a != 0.0 { f(qk * a)? } else { 0.0 };
            let term = (1.0 - qv) * qk * (b * fb - a * fa);
            let sample = (b * fb).abs().max((a * fa).abs());
            qk *= qv;
            Ok((term, sample))
        },
        qv,
        1.0 - qv,
        tol,
        "Jackson integral",
    )
}

/// Jackson integral of `f` over `[a, b]`.
pub fn jackson_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, q: QParam, tol: f64) -> Result<f64> {
    try_jackson_integral(|x| Ok(f(x)), a, b, q, tol)
}

/// The (q,h)-integral `sum_k [x - (qx+h)] q^k f(q^k x + (1-q^k) h/(1-q))`,
/// the right inverse of [`qh_derivative`] (requires `q < 1`).
pub fn qh_integral(f: impl Fn(f64) -> f64, x: f64, params: AffineParams, tol: f64) -> Result<f64> {
    if !(params.q > 0.0 && params.q < 1.0) {
        return Err(Error::invalid("the (q,h)-integral needs 0 < q < 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (q, h) = (params.q, params.h);
    let step = x - params.apply(x);
    let x_inf = h / (1.0 - q);
    let mut qk = 1.0;
    geometric_sum(
        |_| {
            let point = qk * (x - x_inf) + x_inf;
            let fx = f(point);
            let term = step * qk * fx;
            qk *= q;
            Ok((term, fx))
        },
        q,
        step.abs(),
        tol,
        "(q,h)-integral",
    )
}
