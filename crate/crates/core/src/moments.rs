//! Moments `mu_n = int w^n dsigma` of the Pearson measure.
//!
//! Four independent routes:
//!
//! * [`moments_by_recurrence`]: the three-term relation obtained by
//!   integrating the Pearson equation against `w^n`;
//! * [`moment_closed_form`]: product formulas for `mu_0` (cases i–vi) and for
//!   every `mu_n` in cases iv–vi, where shifting the exponent `r -> r + n`
//!   turns `mu_0` into `mu_n`;
//! * [`moments_direct`]: Jackson integration of `w^n rho(w)`;
//! * [`MomentFunction`]: a solution `mu(w)` of the second-order q-difference
//!   equation with `mu(q^(n+1)) = mu_n`, built from a basic hypergeometric
//!   series and its Casoratian.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pearson::{signed_pow, weight_eval, CaseTag, PearsonData, Roots, WeightSpec};
use crate::qcalc::{
    q_bracket, q_pochhammer_inf, q_pochhammer_inf_complex, q_pochhammer_real, try_jackson_integral, QParam,
    MAX_ITERATIONS, PRODUCT_TOL,
};

/// Route that produced a moment sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Recurrence,
    Direct,
    ClosedForm,
    Hypergeometric,
}

/// Moments `mu_0, ..., mu_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeq {
    pub mu: Vec<f64>,
    pub source: MomentSource,
}

impl MomentSeq {
    /// Moments divided by `mu_0`.
    pub fn normalized(&self) -> Vec<f64> {
        let mu0 = self.mu[0];
        self.mu.iter().map(|m| m / mu0).collect()
    }

    /// Determinant of the Hankel section `[mu_{i+j}]_{i,j=0..m}`.
    pub fn hankel_determinant(&self, m: usize) -> Result<f64> {
        if 2 * m >= self.mu.len() {
            return Err(Error::invalid(format!("Hankel section {m} needs {} moments", 2 * m + 1)));
        }
        let mut a: Vec<Vec<f64>> = (0..=m).map(|i| (0..=m).map(|j| self.mu[i + j]).collect()).collect();
        Ok(determinant(&mut a))
    }
}

fn determinant(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    det
}

/// Moments from `mu_1 = -a0 mu_0 / a1` and
/// `[n](b2 mu_{n+1} + b1 mu_n + b0 mu_{n-1}) + q^n (a1 mu_{n+1} + a0 mu_n) = 0`.
pub fn moments_by_recurrence(data: &PearsonData, mu0: f64, n_max: usize) -> Result<MomentSeq> {
    let q = data.q;
    let mut mu = vec![mu0];
    if n_max >= 1 {
        if data.a1 == 0.0 {
            return Err(Error::Singular(
                "a1 = 0: the first moment relation only says a0 mu_0 = 0".into(),
            ));
        }
        mu.push(-data.a0 * mu0 / data.a1);
    }
    for n in 1..n_max {
        let br = q_bracket(n as i32, q);
        let qn = q.pow(n as i32);
        let den = br * data.b2 + qn * data.a1;
        if den.abs() <= 1e-14 * (br * data.b2).abs().max((qn * data.a1).abs()) {
            return Err(Error::Singular(format!("coefficient of mu_{} vanishes", n + 1)));
        }
        let next = -(br * (data.b1 * mu[n] + data.b0 * mu[n - 1]) + qn * data.a0 * mu[n]) / den;
        mu.push(next);
    }
    Ok(MomentSeq { mu, source: MomentSource::Recurrence })
}

fn pair_product(roots: Roots, f: impl Fn(Complex64) -> Result<Complex64>) -> Result<f64> {
    match roots {
        Roots::None => Ok(1.0),
        Roots::One { x } => Ok(f(x.into())?.re),
        Roots::Two { lo, hi } => Ok(f(lo.into())?.re * f(hi.into())?.re),
        Roots::Conjugate { re, im } => Ok(f(Complex64::new(re, im))?.norm_sqr()),
    }
}

/// Closed-form moment `mu_n`: `n = 0` in cases i–iii, any `n` in cases iv–vi.
pub fn moment_closed_form(spec: &WeightSpec, n: usize) -> Result<f64> {
    let q = spec.q;
    let qv = q.value();
    let poch = |x: f64| q_pochhammer_inf(x, q, PRODUCT_TOL);
    let support = spec
        .support
        .ok_or_else(|| Error::Unsupported(format!("case {} has no positive measure", spec.case.label())))?;
    match spec.case {
        CaseTag::I | CaseTag::II | CaseTag::III => {
            if n != 0 {
                return Err(Error::Unsupported(format!("closed form for mu_{n} in case {}", spec.case.label())));
            }
            let (a, b) = (support.lo, support.hi);
            let mut mu0 = (1.0 - qv) * (b - a) * poch(qv)? * poch(qv * b / a)? * poch(qv * a / b)?;
            let den = pair_product(spec.roots_shift, |c| {
                Ok(q_pochhammer_inf_complex(a / c, q, PRODUCT_TOL)? * q_pochhammer_inf_complex(b / c, q, PRODUCT_TOL)?)
            })?;
            if spec.case == CaseTag::I {
                let cd = match spec.roots_shift {
                    Roots::Two { lo, hi } => lo * hi,
                    Roots::Conjugate { re, im } => re * re + im * im,
                    other => return Err(Error::Unsupported(format!("case i with shifted roots {other:?}"))),
                };
                mu0 *= poch(a * b / cd)?;
            }
            if den == 0.0 {
                return Err(Error::Pole { at: 0.0, what: "closed-form denominator vanishes".into() });
            }
            Ok(mu0 / den)
        }
        CaseTag::IV | CaseTag::V | CaseTag::VIa | CaseTag::VIb => {
            let a = match spec.roots_b {
                Roots::One { x } => x,
                other => return Err(Error::Unsupported(format!("expected one root of B, got {other:?}"))),
            };
            let r = spec.r.unwrap_or(0.0) + n as f64;
            let lead = (1.0 - qv) * a.abs() * signed_pow(a, r)?;
            match spec.case {
                CaseTag::IV => {
                    let c = match spec.roots_shift {
                        Roots::One { x } => x,
                        other => return Err(Error::Unsupported(format!("expected one shifted root, got {other:?}"))),
                    };
                    Ok(lead * q_pochhammer_real(qv, q, r, PRODUCT_TOL)? / q_pochhammer_real(a / c, q, r + 1.0, PRODUCT_TOL)?)
                }
                CaseTag::V => Ok(lead * q_pochhammer_real(qv, q, r, PRODUCT_TOL)?),
                CaseTag::VIa => Ok(lead * poch(qv)? * poch(-a * qv.powf(r + 1.0))? / (poch(-a)? * poch(-qv / a)?)),
                _ => Ok(lead * poch(qv)? * poch(a * qv.powf(r + 1.0))? / (poch(a)? * poch(qv / a)?)),
            }
        }
        _ => Err(Error::Unsupported(format!("no closed-form moments in case {}", spec.case.label()))),
    }
}

/// Closed-form `mu_0`.
pub fn mu0_closed_form(spec: &WeightSpec) -> Result<f64> {
    moment_closed_form(spec, 0)
}

/// `mu_n` by Jackson integration of `w^n rho(w)` over the support.
pub fn moments_direct(spec: &WeightSpec, n: usize, tol: f64) -> Result<f64> {
    let support = spec
        .support
        .ok_or_else(|| Error::NoPositiveMeasure(format!("case {} has no support", spec.case.label())))?;
    try_jackson_integral(|x| Ok(x.powi(n as i32) * weight_eval(spec, x)?), support.lo, support.hi, spec.q, tol)
}

/// `mu_0..=mu_N` by Jackson integration.
pub fn moments_direct_seq(spec: &WeightSpec, n_max: usize, tol: f64) -> Result<MomentSeq> {
    let mu = (0..=n_max).map(|n| moments_direct(spec, n, tol)).collect::<Result<Vec<_>>>()?;
    Ok(MomentSeq { mu, source: MomentSource::Direct })
}

/// Parameters of `3phi2(a1, a2, a3; b1, b2; q, z)`; complex entries allow
/// conjugate pairs whose contributions combine to a real series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QHypergeometricParams {
    pub numerator: [Complex64; 3],
    pub denominator: [Complex64; 2],
    pub q: QParam,
    pub z: f64,
}

impl QHypergeometricParams {
    pub fn real(numerator: [f64; 3], denominator: [f64; 2], q: QParam, z: f64) -> Self {
        QHypergeometricParams {
            numerator: numerator.map(Complex64::from),
            denominator: denominator.map(Complex64::from),
            q,
            z,
        }
    }
}

/// Basic hypergeometric series
/// `sum_k (a1, a2, a3; q)_k / (q, b1, b2; q)_k z^k` (no extra
/// `(-1)^k q^binom(k,2)` factors).
pub fn q_hypergeometric_3phi2(params: &QHypergeometricParams, tol: f64) -> Result<f64> {
    let q = params.q.value();
    let one = Complex64::new(1.0, 0.0);
    let mut term = one;
    let mut sum = one;
    let mut qk = 1.0;
    let mut growing = 0usize;
    for k in 0..MAX_ITERATIONS {
        let mut ratio = Complex64::new(params.z, 0.0) / (1.0 - q * qk);
        for a in params.numerator {
            ratio *= one - a * qk;
        }
        for b in params.denominator {
            let f = one - b * qk;
            if f.norm() <= 1e-15 {
                return Err(Error::Pole { at: params.z, what: format!("denominator Pochhammer factor vanishes at k = {k}") });
            }
            ratio /= f;
        }
        term *= ratio;
        qk *= q;
        if term.norm() == 0.0 {
            return finish(sum);
        }
        sum += term;
        let rho = ratio.norm().max(params.z.abs());
        if rho < 1.0 && term.norm() * rho / (1.0 - rho) <= tol * sum.norm() {
            return finish(sum);
        }
        growing = if ratio.norm() >= 1.0 { growing + 1 } else { 0 };
        if growing > 200 {
            return Err(Error::Divergence(format!("3phi2 terms keep growing at z = {}", params.z)));
        }
    }
    Err(Error::NonConvergence { what: "3phi2 series".into(), iterations: MAX_ITERATIONS })
}

fn finish(sum: Complex64) -> Result<f64> {
    if sum.im.abs() > 1e-12 * sum.norm().max(1e-300) {
        return Err(Error::Domain(format!("series value {sum} is not real")));
    }
    Ok(sum.re)
}

/// Moment function `mu(w) = c1 mu1(w) + c2 mu2(w)` with `mu(q^(n+1)) = mu_n`.
///
/// `mu1` is the series solution `2phi1(q t1, q t2; q b2/b0; q, w)` where
/// `t1, t2` solve `t^2 - e1 t + e2 = 0`, `e2 = (b2 - (1-q) a1)/(q^2 b0)`,
/// `e1 = -(b1 - (1-q) a0)/(q b0)`. It needs `B(1) = 0`. The second solution
/// `mu2` follows from the Casoratian
/// `W(q^m) = (b0/b2)^m ((b2 - (1-q) a1) q^m / b2; q)_inf / (q^m; q)_inf`
/// with `mu2(q) = 0`.
#[derive(Debug, Clone)]
pub struct MomentFunction {
    data: PearsonData,
    mu0: f64,
    params: QHypergeometricParams,
    tol: f64,
}

impl MomentFunction {
    pub fn new(data: &PearsonData, mu0: f64, tol: f64) -> Result<Self> {
        let (b2, b1, b0) = (data.b2, data.b1, data.b0);
        let scale = b2.abs().max(b1.abs()).max(b0.abs());
        if (b2 + b1 + b0).abs() > 1e-12 * scale {
            return Err(Error::Unsupported("moment function needs B(1) = 0".into()));
        }
        if b0 == 0.0 || b2 == 0.0 {
            return Err(Error::Unsupported("q-Wronskian undefined: b0 = 0 or b2 = 0".into()));
        }
        if data.a1 == 0.0 {
            return Err(Error::Unsupported("a1 = 0: boundary condition for mu_1 unavailable".into()));
        }
        let qv = data.q.value();
        let e2 = data.shifted_b2() / (qv * qv * b0);
        let e1 = -data.shifted_b1() / (qv * b0);
        let disc = Complex64::new(e1 * e1 - 4.0 * e2, 0.0).sqrt();
        let (t1, t2) = ((e1 + disc) / 2.0, (e1 - disc) / 2.0);
        let params = QHypergeometricParams {
            numerator: [t1 * qv, t2 * qv, Complex64::new(0.0, 0.0)],
            denominator: [Complex64::new(qv * b2 / b0, 0.0), Complex64::new(0.0, 0.0)],
            q: data.q,
            z: 0.0,
        };
        Ok(MomentFunction { data: *data, mu0, params, tol })
    }

    /// First solution `mu1(w)`.
    pub fn mu1(&self, w: f64) -> Result<f64> {
        q_hypergeometric_3phi2(&QHypergeometricParams { z: w, ..self.params }, self.tol)
    }

    /// Casoratian `mu2(w) mu1(qw) - mu2(qw) mu1(w)` at `w = q^m`, `m >= 1`.
    pub fn wronskian(&self, m: usize) -> Result<f64> {
        let q = self.data.q;
        let qm = q.pow(m as i32);
        let ratio = self.data.b0 / self.data.b2;
        Ok(ratio.powi(m as i32) * q_pochhammer_inf(self.data.shifted_b2() * qm / self.data.b2, q, PRODUCT_TOL)?
            / q_pochhammer_inf(qm, q, PRODUCT_TOL)?)
    }

    /// `(mu1(q^m), mu2(q^m))` for `m = 1..=m_max`.
    pub fn solutions(&self, m_max: usize) -> Result<Vec<(f64, f64)>> {
        let q = self.data.q;
        let mu1: Vec<f64> = (1..=m_max + 1).map(|m| self.mu1(q.pow(m as i32))).collect::<Result<_>>()?;
        let mut out = vec![(mu1[0], 0.0)];
        for m in 1..m_max {
            let (m1, m2) = out[m - 1];
            if m1 == 0.0 {
                return Err(Error::Singular(format!("mu1(q^{m}) = 0 blocks the Casoratian recursion")));
            }
            let next = (m2 * mu1[m] - self.wronskian(m)?) / m1;
            out.push((mu1[m], next));
        }
        Ok(out)
    }

    /// Moments `mu_0..=mu_N` as `c1 mu1(q^(n+1)) + c2 mu2(q^(n+1))`.
    pub fn moments(&self, n_max: usize) -> Result<MomentSeq> {
        let sol = self.solutions(n_max.max(1) + 1)?;
        let mu_1 = -self.data.a0 * self.mu0 / self.data.a1;
        let c1 = self.mu0 / sol[0].0;
        let c2 = (mu_1 - c1 * sol[1].0) / sol[1].1;
        let mu = (0..=n_max).map(|n| c1 * sol[n].0 + c2 * sol[n].1).collect();
        Ok(MomentSeq { mu, source: MomentSource::Hypergeometric })
    }

    /// Residual of the moment-function equation
    /// `(1-w)[b2 f(q^2 w) + b1 f(qw) + b0 f(w)] + (1-q) w [a1 f(q^2 w) + a0 f(qw)]`.
    pub fn residual(data: &PearsonData, f: impl Fn(f64) -> Result<f64>, w: f64) -> Result<(f64, f64)> {
        let q = data.q.value();
        let (f0, f1, f2) = (f(w)?, f(q * w)?, f(q * q * w)?);
        let left = (1.0 - w) * (data.b2 * f2 + data.b1 * f1 + data.b0 * f0);
        let right = (1.0 - q) * w * (data.a1 * f2 + data.a0 * f1);
        let scale = (1.0 - w).abs() * (data.b2 * f2).abs().max((data.b1 * f1).abs()).max((data.b0 * f0).abs())
            + ((1.0 - q) * w).abs() * (data.a1 * f2).abs().max((data.a0 * f1).abs());
        Ok((left + right, scale))
    }
}

/// Moments through the moment function when it is available, otherwise by
/// the recurrence (reported in the returned source tag).
pub fn moment_function(data: &PearsonData, mu0: f64, n_max: usize, tol: f64) -> Result<MomentSeq> {
    match MomentFunction::new(data, mu0, tol) {
        Ok(f) => f.moments(n_max),
        Err(Error::Unsupported(_)) => moments_by_recurrence(data, mu0, n_max),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pearson::classify;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    fn hermite() -> PearsonData {
        PearsonData::new(2.0, 0.0, 1.0, 0.0, -1.0, q(0.5)).unwrap()
    }

    #[test]
    fn hermite_moments() {
        let d = hermite();
        let spec = classify(&d).unwrap();
        let mu0 = mu0_closed_form(&spec).unwrap();
        assert!((mu0 - 1.6416325606551538).abs() < 1e-14);
        let direct = moments_direct(&spec, 0, 1e-16).unwrap();
        assert!((direct - mu0).abs() <= 1e-12 * mu0);
        let rec = moments_by_recurrence(&d, mu0, 6).unwrap();
        assert!((rec.mu[2] - 0.5 * mu0).abs() <= 1e-14 * mu0);
        for n in (1..6).step_by(2) {
            assert_eq!(rec.mu[n], 0.0);
            assert!(moments_direct(&spec, n, 1e-16).unwrap().abs() <= 1e-12 * mu0);
        }
    }

    #[test]
    fn generic_case_i_mu0() {
        let d = PearsonData::new(5.0 / 3.0, -5.0 / 3.0, 1.0, -1.0, -2.0, q(0.5)).unwrap();
        let spec = classify(&d).unwrap();
        let mu0 = mu0_closed_form(&spec).unwrap();
        assert!((mu0 - 3.5185545327036936).abs() < 1e-13);
    }

    #[test]
    fn series_trivial_values() {
        let p = QHypergeometricParams::real([0.3, 0.2, 0.1], [0.4, 0.6], q(0.5), 0.0);
        assert_eq!(q_hypergeometric_3phi2(&p, 1e-16).unwrap(), 1.0);
        let p = QHypergeometricParams::real([1.0, 0.2, 0.1], [0.4, 0.6], q(0.5), 0.7);
        assert_eq!(q_hypergeometric_3phi2(&p, 1e-16).unwrap(), 1.0);
    }

    #[test]
    fn series_q_binomial() {
        // 1phi0(a;;q,z) = (az;q)_inf / (z;q)_inf
        let (a, z) = (0.3, 0.4);
        let p = QHypergeometricParams::real([a, 0.0, 0.0], [0.0, 0.0], q(0.5), z);
        let got = q_hypergeometric_3phi2(&p, 1e-16).unwrap();
        let expected = q_pochhammer_inf(a * z, q(0.5), PRODUCT_TOL).unwrap()
            / q_pochhammer_inf(z, q(0.5), PRODUCT_TOL).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn divergent_series_is_reported() {
        let p = QHypergeometricParams::real([0.0, 0.0, 0.0], [0.0, 0.0], q(0.5), 1.5);
        assert!(matches!(q_hypergeometric_3phi2(&p, 1e-16), Err(Error::Divergence(_)) | Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn hankel_positive_for_hermite() {
        let d = hermite();
        let mu0 = mu0_closed_form(&classify(&d).unwrap()).unwrap();
        let m = moments_by_recurrence(&d, mu0, 8).unwrap();
        for k in 0..=4 {
            assert!(m.hankel_determinant(k).unwrap() > 0.0);
        }
    }
}
