//! Pearson q-difference equation `d_q(rho B) = rho A`.
//!
//! [`PearsonData`] holds `A(w) = a1 w + a0` and `B(w) = b2 w^2 + b1 w + b0`.
//! The equation is equivalent to
//!
//! ```text
//! rho(w) (B(w) - (1-q) w A(w)) = rho(q w) B(q w)
//! ```
//!
//! whose meromorphic solutions fall into ten cases ([`CaseTag`]). Each case
//! is a product of q-Pochhammer symbols built from the roots of `B` and of the
//! shifted polynomial `B(w) - (1-q) w A(w)`, possibly times `w^r`.
//! [`classify`] additionally fixes the support interval and rejects data whose
//! Jackson measure is not positive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcalc::{
    q_bracket, q_pochhammer_inf, q_pochhammer_inf_complex, Polynomial, QParam, PRODUCT_TOL,
};

/// Relative tolerance for the vanishing tests that select a case.
pub const CASE_TOL: f64 = 1e-12;

/// Largest `K` tried for the interval conditions of case i.
pub const MAX_INTERVAL_SEARCH: u32 = 200;

/// Number of grid points per endpoint checked for positivity of the weight
/// and of the recurrence coefficients after the case conditions pass.
pub const POSITIVITY_DEPTH: usize = 60;

/// Coefficients of `A(w) = a1 w + a0` and `B(w) = b2 w^2 + b1 w + b0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonData {
    pub a1: f64,
    pub a0: f64,
    pub b2: f64,
    pub b1: f64,
    pub b0: f64,
    pub q: QParam,
}

impl PearsonData {
    pub fn new(a1: f64, a0: f64, b2: f64, b1: f64, b0: f64, q: QParam) -> Result<Self> {
        let data = PearsonData { a1, a0, b2, b1, b0, q };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let c = [self.a1, self.a0, self.b2, self.b1, self.b0];
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Pearson coefficients must be finite"));
        }
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateData);
        }
        Ok(())
    }

    pub fn a_poly(&self) -> Polynomial {
        Polynomial::linear(self.a1, self.a0)
    }

    pub fn b_poly(&self) -> Polynomial {
        Polynomial::quadratic(self.b2, self.b1, self.b0)
    }

    /// Leading coefficient `b2 - (1-q) a1` of the shifted polynomial.
    pub fn shifted_b2(&self) -> f64 {
        self.b2 - (1.0 - self.q.value()) * self.a1
    }

    /// Linear coefficient `b1 - (1-q) a0` of the shifted polynomial.
    pub fn shifted_b1(&self) -> f64 {
        self.b1 - (1.0 - self.q.value()) * self.a0
    }

    /// `B(w) - (1-q) w A(w)`.
    pub fn shifted_poly(&self) -> Polynomial {
        Polynomial::quadratic(self.shifted_b2(), self.shifted_b1(), self.b0)
    }

    /// The same data multiplied by a common factor.
    pub fn scaled(&self, c: f64) -> Self {
        PearsonData {
            a1: c * self.a1,
            a0: c * self.a0,
            b2: c * self.b2,
            b1: c * self.b1,
            b0: c * self.b0,
            q: self.q,
        }
    }

    fn magnitude(&self) -> f64 {
        [self.a1, self.a0, self.b2, self.b1, self.b0].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn vanishes(&self, x: f64) -> bool {
        x == 0.0 || x.abs() <= CASE_TOL * self.magnitude()
    }
}

/// Roots of a polynomial of degree at most two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Roots {
    None,
    One { x: f64 },
    /// Real roots with `lo <= hi`.
    Two { lo: f64, hi: f64 },
    /// Complex-conjugate pair `re +- i im`, `im > 0`.
    Conjugate { re: f64, im: f64 },
}

impl Roots {
    /// Roots of `c2 w^2 + c1 w + c0`; vanishing leading coefficients lower the degree.
    pub fn of_quadratic(c2: f64, c1: f64, c0: f64) -> Roots {
        if c2 == 0.0 {
            if c1 == 0.0 {
                return Roots::None;
            }
            return Roots::One { x: -c0 / c1 };
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            let re = -c1 / (2.0 * c2);
            let im = (-disc).sqrt() / (2.0 * c2.abs());
            return Roots::Conjugate { re, im };
        }
        let t = -0.5 * (c1 + c1.signum_or_one() * disc.sqrt());
        let (r1, r2) = if t == 0.0 { (0.0, 0.0) } else { (t / c2, c0 / t) };
        Roots::Two { lo: r1.min(r2), hi: r1.max(r2) }
    }

}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Solution case of the Pearson equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
    #[serde(rename = "iii")]
    III,
    #[serde(rename = "iv")]
    IV,
    #[serde(rename = "v")]
    V,
    #[serde(rename = "vi-a")]
    VIa,
    #[serde(rename = "vi-b")]
    VIb,
    #[serde(rename = "vii-a")]
    VIIa,
    #[serde(rename = "vii-b")]
    VIIb,
    #[serde(rename = "viii")]
    VIII,
}

impl CaseTag {
    pub fn label(self) -> &'static str {
        match self {
            CaseTag::I => "i",
            CaseTag::II => "ii",
            CaseTag::III => "iii",
            CaseTag::IV => "iv",
            CaseTag::V => "v",
            CaseTag::VIa => "vi-a",
            CaseTag::VIb => "vi-b",
            CaseTag::VIIa => "vii-a",
            CaseTag::VIIb => "vii-b",
            CaseTag::VIII => "viii",
        }
    }

    /// Cases whose weight carries the factor `w^r`.
    pub fn has_exponent(self) -> bool {
        !matches!(self, CaseTag::I | CaseTag::II | CaseTag::III)
    }
}

/// Which positivity condition admitted the measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcase {
    /// Case i, complex-conjugate shifted roots.
    Alpha,
    /// Case i, `c < a` and `d > b`.
    Beta,
    /// Case i, both shifted roots below `a`.
    Gamma,
    /// Case i, both shifted roots in `(q^(K-1) a, q^K a)`.
    Delta { k: u32 },
    /// Case i, both shifted roots above `b`.
    Epsilon,
    /// Case i, both shifted roots in `(q^K b, q^(K-1) b)`.
    Zeta { k: u32 },
    /// Two-sided support `[a, b]` (cases ii, iii).
    TwoSided,
    /// Support `[0, a]` with `a > 0`.
    PositiveEndpoint,
    /// Support `[a, 0]` with `a < 0`.
    NegativeEndpoint,
}

/// Closed support interval of the Jackson measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A solved and (for [`classify`]) positivity-checked weight function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub case: CaseTag,
    pub q: QParam,
    /// Roots of `B` entering the weight: both roots in cases i–iii, the
    /// nonzero root in cases iv–vi, none otherwise.
    pub roots_b: Roots,
    /// Nonzero roots of `B(w) - (1-q) w A(w)` entering the weight.
    pub roots_shift: Roots,
    /// Exponent of the `w^r` factor.
    pub r: Option<f64>,
    /// Support of the positive Jackson measure, when one exists.
    pub support: Option<Interval>,
    pub subcase: Option<Subcase>,
}

/// Node of the Jackson grid with its measure factor `(1-q) q^k |endpoint|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacksonNode {
    pub x: f64,
    pub factor: f64,
}

/// Solves the Pearson equation: determines the case, the roots and the
/// exponent, without judging positivity.
pub fn classify_case(data: &PearsonData) -> Result<WeightSpec> {
    data.validate()?;
    let q = data.q;
    let qv = q.value();
    let (b2, b1, b0) = (data.b2, data.b1, data.b0);
    let (s2, s1) = (data.shifted_b2(), data.shifted_b1());
    let z = |x: f64| data.vanishes(x);
    let spec = |case, roots_b, roots_shift, r| WeightSpec {
        case,
        q,
        roots_b,
        roots_shift,
        r,
        support: None,
        subcase: None,
    };

    if !z(b0) {
        let roots_b = Roots::of_quadratic(if z(b2) { 0.0 } else { b2 }, if z(b1) { 0.0 } else { b1 }, b0);
        return Ok(match (z(s2), z(s1)) {
            (false, _) => spec(CaseTag::I, roots_b, Roots::of_quadratic(s2, if z(s1) { 0.0 } else { s1 }, b0), None),
            (true, false) => spec(CaseTag::II, roots_b, Roots::One { x: -b0 / s1 }, None),
            (true, true) => spec(CaseTag::III, roots_b, Roots::None, None),
        });
    }

    if !z(b1) {
        if z(b2) {
            return Err(Error::Unclassified("b0 = 0 and b2 = 0 with b1 != 0".into()));
        }
        let a = Roots::One { x: -b1 / b2 };
        if !z(s1) {
            let ratio = qv * b1 / s1;
            let r = -ratio.abs().ln() / qv.ln();
            let (case, shift) = if z(s2) {
                (CaseTag::V, Roots::None)
            } else {
                (CaseTag::IV, Roots::One { x: -s1 / s2 })
            };
            // A negative ratio means the modulus hides an alternating sign;
            // classify() rejects such data.
            return Ok(spec(case, a, shift, Some(r)));
        }
        if z(s2) {
            return Err(Error::Unclassified("b0 = 0, b1 - (1-q) a0 = 0 and b2 - (1-q) a1 = 0".into()));
        }
        let ratio = qv * b1 / s2;
        let r = -ratio.abs().ln() / qv.ln();
        let case = if ratio > 0.0 { CaseTag::VIa } else { CaseTag::VIb };
        return Ok(spec(case, a, Roots::None, Some(r)));
    }

    if z(b2) {
        return Err(Error::Unclassified("B vanishes identically while A does not".into()));
    }
    if !z(s1) {
        let ratio = qv * qv * b2 / s1;
        let r = -ratio.abs().ln() / qv.ln();
        let shift = if z(s2) { Roots::None } else { Roots::One { x: -s1 / s2 } };
        let case = if ratio > 0.0 { CaseTag::VIIa } else { CaseTag::VIIb };
        return Ok(spec(case, Roots::None, shift, Some(r)));
    }
    if z(s2) {
        return Err(Error::Unclassified("B(w) - (1-q) w A(w) vanishes identically".into()));
    }
    let ratio = qv * qv * b2 / s2;
    let r = -ratio.abs().ln() / qv.ln();
    Ok(spec(CaseTag::VIII, Roots::None, Roots::None, Some(r)))
}

/// Exponent-ratio sign for cases iv and v; negative values mean the true
/// solution alternates in sign along the grid.
fn exponent_ratio(data: &PearsonData, spec: &WeightSpec) -> f64 {
    let qv = data.q.value();
    match spec.case {
        CaseTag::IV | CaseTag::V => qv * data.b1 / data.shifted_b1(),
        _ => 1.0,
    }
}

/// Solves the Pearson equation and fixes the support of a positive Jackson
/// measure, rejecting data for which none exists.
pub fn classify(data: &PearsonData) -> Result<WeightSpec> {
    let mut spec = classify_case(data)?;
    let reject = |why: String| Err(Error::NoPositiveMeasure(why));
    match spec.case {
        CaseTag::VIIa | CaseTag::VIIb => {
            return reject("case vii: the recurrence coefficients R(q^n) are not positive for large n".into())
        }
        CaseTag::VIII => return reject("case viii: R(q^n) and D(q^n) vanish identically".into()),
        _ => {}
    }
    match spec.case {
        CaseTag::I | CaseTag::II | CaseTag::III => {
            let (a, b) = match spec.roots_b {
                Roots::Two { lo, hi } if lo < 0.0 && hi > 0.0 => (lo, hi),
                other => return reject(format!("roots of B must satisfy a < 0 < b, got {other:?}")),
            };
            spec.support = Some(Interval { lo: a, hi: b });
            spec.subcase = Some(match (spec.case, spec.roots_shift) {
                (CaseTag::III, _) => Subcase::TwoSided,
                (CaseTag::II, Roots::One { x: c }) => {
                    if c < a || c > b {
                        Subcase::TwoSided
                    } else {
                        return reject(format!("case ii needs c < a or c > b, got c = {c}"));
                    }
                }
                (CaseTag::I, roots) => interval_condition(roots, a, b, data.q)?,
                (_, roots) => return reject(format!("unexpected shifted roots {roots:?}")),
            });
        }
        _ => {
            let a = match spec.roots_b {
                Roots::One { x } => x,
                other => return reject(format!("expected one nonzero root of B, got {other:?}")),
            };
            let r = spec.r.unwrap_or(0.0);
            if exponent_ratio(data, &spec) < 0.0 {
                return reject(format!(
                    "q b1 / (b1 - (1-q) a0) = {} < 0: the solution alternates in sign on the grid",
                    exponent_ratio(data, &spec)
                ));
            }
            if matches!(spec.case, CaseTag::IV | CaseTag::V) && r <= -1.0 {
                return reject(format!("r = {r} <= -1: the measure is not finite near 0"));
            }
            if a > 0.0 {
                spec.support = Some(Interval { lo: 0.0, hi: a });
                spec.subcase = Some(Subcase::PositiveEndpoint);
            } else {
                spec.support = Some(Interval { lo: a, hi: 0.0 });
                spec.subcase = Some(Subcase::NegativeEndpoint);
                match signed_pow(a, r) {
                    Ok(v) if v > 0.0 => {}
                    Ok(_) => return reject(format!("a^r must be positive for a = {a}, r = {r}")),
                    Err(e) => return Err(e),
                }
            }
            if let (CaseTag::IV, Roots::One { x: c }) = (spec.case, spec.roots_shift) {
                let (lo, hi) = if a > 0.0 { (0.0, a) } else { (a, 0.0) };
                if !(c < lo || c > hi) {
                    return reject(format!("case iv needs c outside [{lo}, {hi}], got c = {c}"));
                }
            }
        }
    }
    check_positivity(data, &spec)?;
    Ok(spec)
}

fn interval_condition(roots: Roots, a: f64, b: f64, q: QParam) -> Result<Subcase> {
    let reject = |why: String| Err(Error::NoPositiveMeasure(why));
    let (c, d) = match roots {
        Roots::Conjugate { .. } => return Ok(Subcase::Alpha),
        Roots::Two { lo, hi } => (lo, hi),
        other => return reject(format!("case i needs two shifted roots, got {other:?}")),
    };
    if c < a && d > b {
        return Ok(Subcase::Beta);
    }
    if d < a {
        return Ok(Subcase::Gamma);
    }
    if c > b {
        return Ok(Subcase::Epsilon);
    }
    let qv = q.value();
    let find = |x: f64, end: f64| -> Option<u32> {
        // x lies strictly between q^K end and q^(K-1) end (same sign as end)
        let mut outer = end;
        for k in 1..=MAX_INTERVAL_SEARCH {
            let inner = outer * qv;
            if x.abs() < outer.abs() && x.abs() > inner.abs() {
                return Some(k);
            }
            outer = inner;
        }
        None
    };
    let inside = |x: f64, end: f64| x * end > 0.0 && x.abs() < end.abs();
    for (end, is_left) in [(a, true), (b, false)] {
        if inside(c, end) && inside(d, end) {
            return match (find(c, end), find(d, end)) {
                (Some(kc), Some(kd)) if kc == kd => {
                    Ok(if is_left { Subcase::Delta { k: kc } } else { Subcase::Zeta { k: kc } })
                }
                (Some(_), Some(_)) => reject(format!("shifted roots {c}, {d} lie in different q-intervals")),
                _ => reject(format!(
                    "undetermined: shifted roots {c}, {d} are closer to 0 than q^{MAX_INTERVAL_SEARCH} times the endpoint"
                )),
            };
        }
    }
    reject(format!("shifted roots c = {c}, d = {d} violate every interval condition for [{a}, {b}]"))
}

const UNDERFLOW_GUARD: f64 = 1e-200;

/// Numerical confirmation on the grid: weights and recurrence coefficients positive.
fn check_positivity(data: &PearsonData, spec: &WeightSpec) -> Result<()> {
    let q = data.q.value();
    let support = spec.support.expect("support set before positivity check");
    for end in [support.lo, support.hi] {
        if end == 0.0 {
            continue;
        }
        let mut x = end;
        let mut last = f64::INFINITY;
        for i in 0..POSITIVITY_DEPTH {
            let w = weight_eval(spec, x).map_err(|e| {
                if e.is_non_convergence() {
                    e
                } else {
                    Error::NoPositiveMeasure(format!("weight undefined at grid point q^{i}*{end}: {e}"))
                }
            })?;
            // theta factors decay faster than any power: past underflow the
            // sign is no longer observable
            if w == 0.0 && last > 0.0 && last < UNDERFLOW_GUARD {
                break;
            }
            last = w;
            if !(w > 0.0) {
                return Err(Error::NoPositiveMeasure(format!("weight {w} at grid point q^{i}*{end} is not positive")));
            }
            x *= q;
        }
    }
    let seq = crate::qhahn::structural_functions(data)?;
    for n in 1..=POSITIVITY_DEPTH {
        let r = seq.r(n)?;
        if !(r > 0.0) {
            return Err(Error::NoPositiveMeasure(format!("R(q^{n}) = {r} is not positive")));
        }
    }
    Ok(())
}

/// `x^r` extended to negative `x` as `sign(x)^round(r) |x|^r` when `r` is
/// within `1e-9` of an integer.
pub fn signed_pow(x: f64, r: f64) -> Result<f64> {
    if x > 0.0 {
        return Ok(x.powf(r));
    }
    if x == 0.0 {
        return if r > 0.0 {
            Ok(0.0)
        } else if r == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Pole { at: 0.0, what: format!("w^{r}") })
        };
    }
    let n = r.round();
    if (r - n).abs() > 1e-9 {
        return Err(Error::Domain(format!("{x}^{r}: non-integer power of a negative number")));
    }
    let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * x.abs().powf(r))
}

/// `(s w / root; q)_inf` multiplied over the roots (complex pairs combine to
/// `|(s w / z; q)_inf|^2`).
fn product_over_roots(roots: Roots, s: f64, w: f64, q: QParam, denominator: bool) -> Result<f64> {
    let check = |x: f64| -> Result<f64> { pochhammer_factor(x, q, denominator, w) };
    match roots {
        Roots::None => Ok(1.0),
        Roots::One { x } => check(s * w / x),
        Roots::Two { lo, hi } => Ok(check(s * w / lo)? * check(s * w / hi)?),
        Roots::Conjugate { re, im } => {
            let z = Complex64::new(s * w, 0.0) / Complex64::new(re, im);
            Ok(q_pochhammer_inf_complex(z, q, PRODUCT_TOL)?.norm_sqr())
        }
    }
}

/// `(x; q)_inf`, reporting a pole when a denominator factor vanishes.
fn pochhammer_factor(x: f64, q: QParam, denominator: bool, w: f64) -> Result<f64> {
    if denominator {
        let mut t = x;
        while t.abs() >= 0.5 {
            if (1.0 - t).abs() <= 1e-13 * t.abs().max(1.0) {
                return Err(Error::Pole { at: w, what: format!("denominator factor ({x}; q)_inf vanishes") });
            }
            t *= q.value();
        }
    }
    q_pochhammer_inf(x, q, PRODUCT_TOL)
}

/// Theta-type product `(s w; q)_inf (s q / w; q)_inf`.
fn theta(s: f64, w: f64, q: QParam, denominator: bool) -> Result<f64> {
    if w == 0.0 {
        return Err(Error::Pole { at: 0.0, what: "theta product at w = 0".into() });
    }
    Ok(pochhammer_factor(s * w, q, denominator, w)? * pochhammer_factor(s * q.value() / w, q, denominator, w)?)
}

/// Evaluates the weight `rho(w)` of a solved case.
pub fn weight_eval(spec: &WeightSpec, w: f64) -> Result<f64> {
    let q = spec.q;
    let qv = q.value();
    let power = match spec.r {
        Some(r) if spec.case.has_exponent() => signed_pow(w, r)?,
        _ => 1.0,
    };
    let value = match spec.case {
        CaseTag::I | CaseTag::II | CaseTag::III => {
            product_over_roots(spec.roots_b, qv, w, q, false)?
                / product_over_roots(spec.roots_shift, 1.0, w, q, true)?
        }
        CaseTag::IV | CaseTag::V => {
            power * product_over_roots(spec.roots_b, qv, w, q, false)?
                / product_over_roots(spec.roots_shift, 1.0, w, q, true)?
        }
        CaseTag::VIa => power * product_over_roots(spec.roots_b, qv, w, q, false)? / theta(-1.0, w, q, true)?,
        CaseTag::VIb => power * product_over_roots(spec.roots_b, qv, w, q, false)? / theta(1.0, w, q, true)?,
        CaseTag::VIIa => power * theta(-1.0, w, q, false)? / product_over_roots(spec.roots_shift, 1.0, w, q, true)?,
        CaseTag::VIIb => power * theta(1.0, w, q, false)? / product_over_roots(spec.roots_shift, 1.0, w, q, true)?,
        CaseTag::VIII => power,
    };
    Ok(value)
}

/// Value and rounding scale of the Pearson residual at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `d_q(rho B)(w) - (rho A)(w)`.
    pub value: f64,
    /// Magnitude of the terms combined: `(|rho B|(w) + |rho B|(qw)) / |(1-q) w| + |rho A|(w)`.
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.value.abs()
        } else {
            self.value.abs() / self.scale
        }
    }
}

/// Pointwise residual of the Pearson equation for `weight`.
pub fn pearson_residual_with(data: &PearsonData, weight: impl Fn(f64) -> Result<f64>, w: f64) -> Result<Residual> {
    let qv = data.q.value();
    if w == 0.0 {
        return Err(Error::Domain("the Pearson residual is a difference quotient and needs w != 0".into()));
    }
    let (a, b) = (data.a_poly(), data.b_poly());
    let rb = weight(w)? * b.eval(w);
    let rbq = weight(qv * w)? * b.eval(qv * w);
    let ra = weight(w)? * a.eval(w);
    let h = (1.0 - qv) * w;
    Ok(Residual { value: (rb - rbq) / h - ra, scale: (rb.abs() + rbq.abs()) / h.abs() + ra.abs() })
}

/// Pointwise residual of the Pearson equation for a solved case.
pub fn pearson_residual(data: &PearsonData, spec: &WeightSpec, w: f64) -> Result<Residual> {
    pearson_residual_with(data, |x| weight_eval(spec, x), w)
}

/// Pearson data of the weight `rho(q^k w) B(q w) ... B(q^k w)`:
/// `B` is unchanged and `A^(k)(w) = q^k A(q^k w) + sum_{j<k} q^j (d_q B)(q^j w)`.
pub fn derive(data: &PearsonData, k: u32) -> PearsonData {
    let q = data.q;
    let qk = q.pow(k as i32);
    let a1 = qk * qk * data.a1 + data.b2 * (1.0 - qk * qk) / (1.0 - q.value());
    let a0 = qk * data.a0 + data.b1 * q_bracket(k as i32, q);
    PearsonData { a1, a0, ..*data }
}

/// The first `depth` Jackson nodes of each nonzero endpoint with their
/// measure factors, interleaved (right endpoint first).
pub fn support_grid(spec: &WeightSpec, depth: usize) -> Result<Vec<JacksonNode>> {
    let support = spec
        .support
        .ok_or_else(|| Error::NoPositiveMeasure(format!("case {} has no support", spec.case.label())))?;
    let qv = spec.q.value();
    let mut out = Vec::with_capacity(2 * depth);
    let mut qk = 1.0;
    for _ in 0..depth {
        for end in [support.hi, support.lo] {
            if end != 0.0 {
                out.push(JacksonNode { x: qk * end, factor: (1.0 - qv) * qk * end.abs() });
            }
        }
        qk *= qv;
    }
    Ok(out)
}

/// Jackson measure of a positive weight: nodes and masses
/// `(1-q) q^k |endpoint| rho(q^k endpoint)`, truncated once the geometric tail
/// of the masses drops below `tol` times the total.
pub fn jackson_measure(spec: &WeightSpec, tol: f64) -> Result<Vec<(f64, f64)>> {
    let support = spec
        .support
        .ok_or_else(|| Error::NoPositiveMeasure(format!("case {} has no support", spec.case.label())))?;
    let qv = spec.q.value();
    let mut out = Vec::new();
    let mut total = 0.0;
    let mut qk = 1.0;
    let mut recent = [0.0f64; 8];
    for k in 0..crate::qcalc::MAX_ITERATIONS {
        let mut sample = 0.0f64;
        for end in [support.hi, support.lo] {
            if end != 0.0 {
                let x = qk * end;
                let mass = (1.0 - qv) * qk * end.abs() * weight_eval(spec, x)?;
                total += mass.abs();
                sample = sample.max(weight_eval(spec, x)?.abs() * end.abs());
                out.push((x, mass));
            }
        }
        recent[k % 8] = sample;
        qk *= qv;
        if k >= 8 {
            let sup = recent.iter().fold(0.0f64, |m, v| m.max(*v));
            if qk * sup <= tol * total {
                return Ok(out);
            }
        }
    }
    Err(Error::NonConvergence { what: "Jackson measure".into(), iterations: crate::qcalc::MAX_ITERATIONS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    fn hermite(qv: f64) -> PearsonData {
        PearsonData::new(1.0 / (1.0 - qv), 0.0, 1.0, 0.0, -1.0, q(qv)).unwrap()
    }

    #[test]
    fn discrete_hermite_classifies_as_case_iii() {
        let spec = classify(&hermite(0.5)).unwrap();
        assert_eq!(spec.case, CaseTag::III);
        assert_eq!(spec.roots_b, Roots::Two { lo: -1.0, hi: 1.0 });
        assert_eq!(spec.support, Some(Interval { lo: -1.0, hi: 1.0 }));
        assert_eq!(weight_eval(&spec, 0.0).unwrap(), 1.0);
        let at_one = weight_eval(&spec, 1.0).unwrap();
        assert!((at_one - 0.688_537_537_1).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_unclassified() {
        assert_eq!(PearsonData::new(0.0, 0.0, 0.0, 0.0, 0.0, q(0.5)), Err(Error::DegenerateData));
        // A nonzero, B zero, shifted polynomial -(1-q) w A(w) nonzero: case vii/viii family needs b2 != 0
        let d = PearsonData::new(1.0, 0.0, 0.0, 0.0, 0.0, q(0.5)).unwrap();
        assert!(matches!(classify_case(&d), Err(Error::Unclassified(_))));
    }

    #[test]
    fn case_viii_is_a_power() {
        let d = PearsonData::new(0.0, 0.0, 1.0, 0.0, 0.0, q(0.5)).unwrap();
        let spec = classify_case(&d).unwrap();
        assert_eq!(spec.case, CaseTag::VIII);
        let r = spec.r.unwrap();
        // B(w) rho(w) is q-periodic, so rho = w^-2
        assert!((r + 2.0).abs() < 1e-14);
        assert!((weight_eval(&spec, 0.3).unwrap() - 0.3f64.powf(r)).abs() < 1e-12);
        assert!(matches!(classify(&d), Err(Error::NoPositiveMeasure(_))));
    }

    #[test]
    fn signed_power_convention() {
        assert_eq!(signed_pow(-2.0, 2.0).unwrap(), 4.0);
        assert_eq!(signed_pow(-2.0, 3.0).unwrap(), -8.0);
        assert!(signed_pow(-2.0, 0.5).is_err());
        assert_eq!(signed_pow(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_roots() {
        assert_eq!(Roots::of_quadratic(1.0, -1.0, -2.0), Roots::Two { lo: -1.0, hi: 2.0 });
        match Roots::of_quadratic(1.0, -1.0, 1.25) {
            Roots::Conjugate { re, im } => {
                assert!((re - 0.5).abs() < 1e-15 && (im - 1.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(Roots::of_quadratic(0.0, 2.0, -1.0), Roots::One { x: 0.5 });
    }

    #[test]
    fn support_grid_examples() {
        let spec = WeightSpec {
            case: CaseTag::V,
            q: q(0.5),
            roots_b: Roots::One { x: 1.0 },
            roots_shift: Roots::None,
            r: Some(0.0),
            support: Some(Interval { lo: 0.0, hi: 1.0 }),
            subcase: Some(Subcase::PositiveEndpoint),
        };
        let grid = support_grid(&spec, 3).unwrap();
        let xs: Vec<f64> = grid.iter().map(|n| n.x).collect();
        let ws: Vec<f64> = grid.iter().map(|n| n.factor).collect();
        assert_eq!(xs, vec![1.0, 0.5, 0.25]);
        assert_eq!(ws, vec![0.5, 0.25, 0.125]);
        let sym = support_grid(&classify(&hermite(0.5)).unwrap(), 4).unwrap();
        let mut pos: Vec<f64> = sym.iter().filter(|n| n.x > 0.0).map(|n| n.x).collect();
        let mut neg: Vec<f64> = sym.iter().filter(|n| n.x < 0.0).map(|n| -n.x).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        assert_eq!(pos, neg);
        let total: f64 = support_grid(&spec, 60).unwrap().iter().map(|n| n.factor).sum();
        let reference = crate::qcalc::jackson_integral(|_| 1.0, 0.0, 1.0, q(0.5), 1e-16).unwrap();
        assert!((total - reference).abs() < 1e-15);
    }

    #[test]
    fn derive_zero_is_identity_and_composes() {
        let d = PearsonData::new(5.0 / 3.0, -5.0 / 3.0, 1.0, -1.0, -2.0, q(0.5)).unwrap();
        assert_eq!(derive(&d, 0), d);
        let mut iter = d;
        for k in 1..=4 {
            iter = derive(&iter, 1);
            let direct = derive(&d, k);
            assert!((iter.a1 - direct.a1).abs() <= 1e-12 * direct.a1.abs());
            assert!((iter.a0 - direct.a0).abs() <= 1e-12 * direct.a0.abs().max(1.0));
        }
    }

    #[test]
    fn hermite_residual_and_negative_control() {
        let d = hermite(0.5);
        let spec = classify(&d).unwrap();
        let mut wrong = spec;
        wrong.roots_b = Roots::Two { lo: -1.0, hi: 2.0 };
        let mut worst = 0.0f64;
        let mut worst_wrong = 0.0f64;
        for node in support_grid(&spec, 50).unwrap() {
            worst = worst.max(pearson_residual(&d, &spec, node.x).unwrap().relative());
            worst_wrong = worst_wrong.max(pearson_residual(&d, &wrong, node.x).unwrap().relative());
        }
        assert!(worst < 1e-12, "{worst}");
        assert!(worst_wrong > 1e-3, "{worst_wrong}");
    }

    proptest! {
        #[test]
        fn classification_is_scale_invariant(c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
            for d in [hermite(0.5),
                      PearsonData::new(5.0 / 3.0, -5.0 / 3.0, 1.0, -1.0, -2.0, q(0.5)).unwrap()] {
                let a = classify(&d).unwrap();
                let b = classify(&d.scaled(c)).unwrap();
                prop_assert_eq!(a.case, b.case);
                let (sa, sb) = (a.support.unwrap(), b.support.unwrap());
                prop_assert!((sa.lo - sb.lo).abs() <= 1e-12 * sa.lo.abs().max(1.0));
                prop_assert!((sa.hi - sb.hi).abs() <= 1e-12 * sa.hi.abs().max(1.0));
                prop_assert_eq!(a.subcase, b.subcase);
            }
        }

        #[test]
        fn residual_is_linear_in_the_weight(c in 0.1f64..10.0, k in 0usize..40) {
            let d = hermite(0.5);
            let spec = classify(&d).unwrap();
            let w = 0.5f64.powi(k as i32);
            let base = pearson_residual(&d, &spec, w).unwrap();
            let scaled = pearson_residual_with(&d, |x| Ok(c * weight_eval(&spec, x)?), w).unwrap();
            prop_assert!(scaled.relative() <= 1e-12 && base.relative() <= 1e-12);
        }
    }
}
