//! q-Hahn orthogonal polynomials of Pearson data.
//!
//! The monic system `P_n` can be built three ways, all exposed and all
//! cross-checked in the test suite:
//!
//! * [`ops_by_recurrence`]: `P_{n+1} = (w - D(q^n)) P_n - R(q^n) P_{n-1}`
//!   with the structural functions `R = R_AB`, `D = D_AB`;
//! * [`ops_by_rodrigues`]: an exact polynomial recurrence for the Rodrigues
//!   numerators, divided by the closed-form leading coefficient;
//! * [`ops_by_forward`]: a product of first-order q-difference operators
//!   applied to the constant `1`.
//!
//! The structural functions are evaluated from rational functions whose
//! q-differences `f(x) - f(qx)` are formed symbolically, so `R(q^n)` and
//! `D(q^n)` keep full relative accuracy as `q^n -> 0`.

use std::fmt;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pearson::{self, PearsonData, WeightSpec};
use crate::qcalc::{q_bracket, Polynomial};

/// Origin of a structural sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqSource {
    FromPearson,
    FromMultiboson,
    Explicit,
}

type Generator = dyn Fn(usize) -> Result<(f64, f64)> + Send + Sync;

/// Lazily memoized pair of sequences `n -> (R(q^n), D(q^n))`.
///
/// Values are computed on first access and cached; the cache is guarded by a
/// lock so a sequence can be shared between threads.
pub struct StructuralSeq {
    source: SeqSource,
    generator: Arc<Generator>,
    cache: RwLock<Vec<(f64, f64)>>,
}

impl StructuralSeq {
    /// Sequence defined by a generator returning `(R(q^n), D(q^n))`.
    pub fn from_fn<F>(source: SeqSource, f: F) -> Self
    where
        F: Fn(usize) -> Result<(f64, f64)> + Send + Sync + 'static,
    {
        StructuralSeq { source, generator: Arc::new(f), cache: RwLock::new(Vec::new()) }
    }

    /// Finite explicit sequence; indices past the end are an error.
    pub fn explicit(r: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if r.len() != d.len() {
            return Err(Error::invalid("R and D sequences must have equal length"));
        }
        let len = r.len();
        Ok(StructuralSeq::from_fn(SeqSource::Explicit, move |n| {
            if n < len {
                Ok((r[n], d[n]))
            } else {
                Err(Error::invalid(format!("explicit sequence has {len} entries, index {n} requested")))
            }
        }))
    }

    pub fn source(&self) -> SeqSource {
        self.source
    }

    fn get(&self, n: usize) -> Result<(f64, f64)> {
        if let Some(v) = self.cache.read().expect("cache lock").get(n) {
            return Ok(*v);
        }
        let mut cache = self.cache.write().expect("cache lock");
        while cache.len() <= n {
            let next = (self.generator)(cache.len())?;
            cache.push(next);
        }
        Ok(cache[n])
    }

    /// `R(q^n)`.
    pub fn r(&self, n: usize) -> Result<f64> {
        Ok(self.get(n)?.0)
    }

    /// `D(q^n)`.
    pub fn d(&self, n: usize) -> Result<f64> {
        Ok(self.get(n)?.1)
    }

    /// `(R(q^n), D(q^n))` for `n < len`.
    pub fn prefix(&self, len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if len > 0 {
            self.get(len - 1)?;
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(cache[..len].iter().copied().unzip())
    }
}

impl Clone for StructuralSeq {
    fn clone(&self) -> Self {
        StructuralSeq {
            source: self.source,
            generator: Arc::clone(&self.generator),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

impl fmt::Debug for StructuralSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StructuralSeq")
            .field("source", &self.source)
            .field("cached", &self.cache.read().map(|c| c.len()).unwrap_or(0))
            .finish()
    }
}

#[derive(Debug, Clone)]
struct Rational {
    num: Polynomial,
    den: Polynomial,
}

impl Rational {
    fn eval(&self, x: f64) -> Result<f64> {
        let den = self.den.eval(x);
        let scale: f64 = self.den.coeffs().iter().enumerate().map(|(i, c)| c.abs() * x.abs().powi(i as i32)).sum();
        if den.abs() <= 1e-14 * scale || scale == 0.0 {
            return Err(Error::Pole { at: x, what: "structural function denominator vanishes".into() });
        }
        Ok(self.num.eval(x) / den)
    }

    /// `f(x) - f(qx)` with the numerator combined coefficient-wise so the
    /// cancellation at `x = 0` is exact.
    fn q_difference(&self, q: f64) -> Rational {
        let (n, d) = (self.num.coeffs(), self.den.coeffs());
        let mut out = vec![0.0; n.len() + d.len() - 1];
        for (i, ni) in n.iter().enumerate() {
            for (l, dl) in d.iter().enumerate() {
                out[i + l] += ni * dl * (q.powi(l as i32) - q.powi(i as i32));
            }
        }
        Rational { num: Polynomial::new(out), den: &self.den * &self.den.scale_arg(q) }
    }
}

/// The rational functions `beta(x)` and `eta(x)` of Pearson data, whose
/// values at `x = q^n` are the two subleading coefficients of the monic `P_n`,
/// together with `D(x) = beta(x) - beta(qx)` and
/// `R(x) = eta(x) - eta(qx) - beta(x) (beta(x) - beta(qx))`.
#[derive(Debug, Clone)]
pub struct StructuralFunctions {
    beta: Rational,
    eta: Rational,
    delta_beta: Rational,
    r: Rational,
}

impl StructuralFunctions {
    pub fn new(data: &PearsonData) -> Result<Self> {
        data.validate()?;
        let q = data.q.value();
        let (b2, b1, b0) = (data.b2, data.b1, data.b0);
        // sign-flipped shifted coefficients a_i (1-q) - b_i
        let (t1, t2) = (-data.shifted_b1(), -data.shifted_b2());
        let one_minus_x = Polynomial::linear(-1.0, 1.0);
        let den_q2 = Polynomial::quadratic(t2, 0.0, b2 * q * q);
        let den_q3 = Polynomial::quadratic(t2, 0.0, b2 * q * q * q);
        if den_q2.is_zero() {
            return Err(Error::Singular("b2 = 0 and b2 - (1-q) a1 = 0: structural functions undefined".into()));
        }
        let beta = Rational {
            num: (&one_minus_x * &Polynomial::linear(t1, b1 * q)).scale(q),
            den: den_q2.scale(1.0 - q),
        };
        let bracket = &(&Polynomial::linear(t1, b1 * q * q) * &Polynomial::linear(t1, b1 * q))
            + &den_q2.scale(b0 * (1.0 - q));
        let eta = Rational {
            num: (&(&one_minus_x * &Polynomial::linear(-1.0 / q, 1.0)) * &bracket).scale(q * q * q),
            den: (&den_q2 * &den_q3).scale((1.0 - q) * (1.0 - q) * (1.0 + q)),
        };
        // R in reduced form: the difference of the two q-differences loses
        // all relative accuracy once R ~ x^2, so its numerator is expanded
        // in x with the cancellation done symbolically.
        let quartic = Polynomial::new(vec![
            -b0 * b2 * b2 * q.powi(4),
            -b1 * b2 * q.powi(3) * t1,
            -q * q * (b2 * t1 * t1 + (2.0 * b0 * b2 - b1 * b1) * t2),
            b1 * q * t1 * t2,
            -b0 * t2 * t2,
        ]);
        let r_num = &(&Polynomial::new(vec![0.0, q, -q]) * &Polynomial::linear(t2, b2 * q * q)) * &quartic;
        let r_den = &(&(&Polynomial::quadratic(t2, 0.0, b2 * q) * &den_q2) * &den_q2) * &den_q3;
        Ok(StructuralFunctions {
            delta_beta: beta.q_difference(q),
            r: Rational { num: r_num, den: r_den },
            beta,
            eta,
        })
    }

    pub fn beta(&self, x: f64) -> Result<f64> {
        self.beta.eval(x)
    }

    pub fn eta(&self, x: f64) -> Result<f64> {
        self.eta.eval(x)
    }

    /// `D(x) = beta(x) - beta(qx)`.
    pub fn d(&self, x: f64) -> Result<f64> {
        self.delta_beta.eval(x)
    }

    /// `R(x) = (eta(x) - eta(qx)) - beta(x) (beta(x) - beta(qx))`.
    pub fn r(&self, x: f64) -> Result<f64> {
        self.r.eval(x)
    }
}

/// Memoized `R_AB(q^n)`, `D_AB(q^n)` of Pearson data.
pub fn structural_functions(data: &PearsonData) -> Result<StructuralSeq> {
    let funcs = StructuralFunctions::new(data)?;
    let q = data.q;
    Ok(StructuralSeq::from_fn(SeqSource::FromPearson, move |n| {
        let x = q.value().powi(n as i32);
        if n == 0 {
            return Ok((0.0, funcs.d(1.0)?));
        }
        Ok((funcs.r(x)?, funcs.d(x)?))
    }))
}

/// Monic orthogonal polynomials `P_0, ..., P_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonicOPS {
    pub polys: Vec<Polynomial>,
    pub data: PearsonData,
}

impl MonicOPS {
    pub fn get(&self, n: usize) -> &Polynomial {
        &self.polys[n]
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Largest coefficient-wise relative difference against `other`.
    pub fn max_relative_difference(&self, other: &MonicOPS) -> f64 {
        self.polys
            .iter()
            .zip(&other.polys)
            .map(|(a, b)| a.relative_difference(b))
            .fold(0.0, f64::max)
    }
}

/// Monic polynomials from the three-term recurrence of a structural sequence.
pub fn ops_from_seq(seq: &StructuralSeq, n_max: usize) -> Result<Vec<Polynomial>> {
    let mut polys = vec![Polynomial::constant(1.0)];
    let mut prev = Polynomial::zero();
    for n in 0..n_max {
        let cur = &polys[n];
        let next = &(&cur.shift_up() - &cur.scale(seq.d(n)?)) - &prev.scale(seq.r(n)?);
        prev = cur.clone();
        polys.push(next);
    }
    Ok(polys)
}

/// Monic system through the three-term recurrence.
pub fn ops_by_recurrence(data: &PearsonData, n_max: usize) -> Result<MonicOPS> {
    let seq = structural_functions(data)?;
    Ok(MonicOPS { polys: ops_from_seq(&seq, n_max)?, data: *data })
}

/// Closed-form leading coefficient of the Rodrigues numerator of degree `n`:
/// `q^(n(n-1)/2) prod_{l<n} (a1 - b2 [-2n+2+l])`.
pub fn rodrigues_leading(data: &PearsonData, n: usize) -> f64 {
    let q = data.q;
    let n = n as i32;
    let mut alpha = q.value().powi(n * (n - 1) / 2);
    for l in 0..n {
        alpha *= data.a1 - data.b2 * q_bracket(-2 * n + 2 + l, q);
    }
    alpha
}

/// Rodrigues numerators `R_{k,n}`, `k = 0..=n`, from the exact recurrence
/// `R_{k+1,n} = A R_{k,n}(qw) + B(s w) d_q R_{k,n} + (B(sw) - B(w))/((1-q)w) R_{k,n}(qw)`
/// with `s = q^(-(n-1-k))`.
pub fn rodrigues_numerators(data: &PearsonData, n: usize) -> Vec<Polynomial> {
    let q = data.q;
    let qv = q.value();
    let (a, b) = (data.a_poly(), data.b_poly());
    let mut out = vec![Polynomial::constant(1.0)];
    for k in 0..n {
        let s = q.pow(-((n - 1 - k) as i32));
        let cur = out.last().unwrap();
        let b_s = b.scale_arg(s);
        let quotient = Polynomial::linear(
            data.b2 * (s * s - 1.0) / (1.0 - qv),
            data.b1 * (s - 1.0) / (1.0 - qv),
        );
        let shifted = cur.scale_arg(qv);
        let next = &(&(&a * &shifted) + &(&b_s * &cur.q_derivative(q))) + &(&quotient * &shifted);
        out.push(next);
    }
    out
}

/// Monic system through the Rodrigues formula.
pub fn ops_by_rodrigues(data: &PearsonData, n_max: usize) -> Result<MonicOPS> {
    let mut polys = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let alpha = rodrigues_leading(data, n);
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::Singular(format!("Rodrigues normalizer alpha_{n} = {alpha}")));
        }
        let numerator = rodrigues_numerators(data, n).pop().unwrap();
        polys.push(numerator.scale(1.0 / alpha));
    }
    Ok(MonicOPS { polys, data: *data })
}

/// `A^(k) p + B d_q(Q^{-1} p)`.
fn forward_step(data_k: &PearsonData, b: &Polynomial, p: &Polynomial) -> Polynomial {
    let q = data_k.q;
    &(&data_k.a_poly() * p) + &(b * &p.scale_arg(1.0 / q.value()).q_derivative(q))
}

/// Monic system through the forward operator product
/// `prod_k (A^(k) + B d_q Q^{-1}) 1`, each factor divided by
/// `a1^(k) - b2 [-n+1+k]`.
pub fn ops_by_forward(data: &PearsonData, n_max: usize) -> Result<MonicOPS> {
    let q = data.q;
    let b = data.b_poly();
    let derived: Vec<PearsonData> = (0..n_max as u32).map(|k| pearson::derive(data, k)).collect();
    let mut polys = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut p = Polynomial::constant(1.0);
        for k in (0..n).rev() {
            let factor = derived[k].a1 - data.b2 * q_bracket(k as i32 + 1 - n as i32, q);
            if factor == 0.0 {
                return Err(Error::Singular(format!("forward prefactor a1^({k}) - b2[{}] vanishes", k as i32 + 1 - n as i32)));
            }
            p = forward_step(&derived[k], &b, &p).scale(1.0 / factor);
        }
        polys.push(p);
    }
    Ok(MonicOPS { polys, data: *data })
}

/// Hahn operator `A d_q p + B d_q(Q^{-1} d_q p)`.
pub fn hahn_apply(data: &PearsonData, p: &Polynomial) -> Polynomial {
    let q = data.q;
    let dp = p.q_derivative(q);
    &(&data.a_poly() * &dp) + &(&data.b_poly() * &dp.scale_arg(1.0 / q.value()).q_derivative(q))
}

/// Eigenvalue `a1 [n] + b2 [n][n-1] q^-(n-1)` of the Hahn operator on `P_n`.
pub fn hahn_eigenvalue(data: &PearsonData, n: usize) -> f64 {
    let q = data.q;
    let n = n as i32;
    if n == 1 {
        return data.a1;
    }
    data.a1 * q_bracket(n, q) + data.b2 * q_bracket(n, q) * q_bracket(n - 1, q) * q.pow(-(n - 1))
}

/// Subleading coefficients `(beta(q^n), gamma(q^n))` of the monic `P_n`
/// (coefficients of `w^(n-1)` and `w^(n-2)`) from the closed forms of the
/// coefficient iteration.
pub fn monic_subleading(data: &PearsonData, n: usize) -> (f64, f64) {
    let q = data.q;
    let qv = q.value();
    let n = n as i32;
    let br = |k: i32| q_bracket(k, q);
    let (a1, a0, b2, b1, b0) = (data.a1, data.a0, data.b2, data.b1, data.b0);
    let beta = br(n) * q.pow(1 - n) * (a0 - b1 * br(1 - n)) / (a1 - b2 * br(2 - 2 * n));
    let gamma = q.pow(3 - 2 * n) * (1.0 - q.pow(n)) * (1.0 - q.pow(n - 1)) / ((1.0 - qv) * (1.0 - qv) * (1.0 + qv))
        * ((a0 - b1 * br(2 - n)) * (a0 - b1 * br(1 - n)) + b0 * (a1 - b2 * br(2 - 2 * n)))
        / ((a1 - b2 * br(2 - 2 * n)) * (a1 - b2 * br(3 - 2 * n)));
    (beta, gamma)
}

/// `d_q^k P_n` divided by `[n][n-1]...[n-k+1]`, which makes it monic.
pub fn qderiv_closure_check(data: &PearsonData, n: usize, k: usize) -> Result<Polynomial> {
    if k > n {
        return Err(Error::invalid(format!("closure check needs k <= n, got k = {k}, n = {n}")));
    }
    let q = data.q;
    let mut p = ops_by_recurrence(data, n)?.polys.pop().unwrap();
    let mut norm = 1.0;
    for j in 0..k {
        p = p.q_derivative(q);
        norm *= q_bracket((n - j) as i32, q);
    }
    Ok(p.scale(1.0 / norm))
}

/// Values `P_0(x), ..., P_N(x)` of the monic system by the recurrence.
pub fn monic_values(seq: &StructuralSeq, x: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut prev = 0.0;
    for n in 0..n_max {
        let cur = out[n];
        out.push((x - seq.d(n)?) * cur - seq.r(n)? * prev);
        prev = cur;
    }
    Ok(out)
}

/// Values `P_0(x), ..., P_N(x)` at a mass point `x` of the orthogonality
/// measure.
///
/// Away from the accumulation point `P_n(x)` behaves as the minimal solution
/// of the recurrence and forward evaluation loses it to cancellation. Each
/// forward value carries a running rounding bound; values whose bound exceeds
/// `1e-7` relative are replaced by ratios from the backward continued
/// fraction, whose tail is doubled until they settle.
pub fn monic_values_at_mass_point(seq: &StructuralSeq, x: f64, n_max: usize) -> Result<Vec<f64>> {
    let (forward, bound) = forward_with_bound(seq, x, n_max)?;
    if forward.iter().zip(&bound).all(|(v, b)| *b <= 1e-7 * v.abs()) {
        return Ok(forward);
    }
    let Some(backward) = backward_values(seq, x, n_max)? else {
        return Ok(forward);
    };
    Ok(forward
        .iter()
        .zip(&bound)
        .zip(backward)
        .map(|((v, b), w)| if *b <= 1e-7 * v.abs() { *v } else { w })
        .collect())
}

fn forward_with_bound(seq: &StructuralSeq, x: f64, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut vals = vec![1.0];
    let mut bound = vec![0.0];
    for n in 0..n_max {
        let (a, r) = (x - seq.d(n)?, seq.r(n)?);
        let (prev, prev_bound) = if n == 0 { (0.0, 0.0) } else { (vals[n - 1], bound[n - 1]) };
        let (t1, t2) = (a * vals[n], r * prev);
        vals.push(t1 - t2);
        bound.push(a.abs() * bound[n] + r.abs() * prev_bound + 2.0 * f64::EPSILON * (t1.abs() + t2.abs()));
    }
    Ok((vals, bound))
}

fn backward_values(seq: &StructuralSeq, x: f64, n_max: usize) -> Result<Option<Vec<f64>>> {
    const MAX_TAIL: usize = 4096;
    let mut tail = n_max + 32;
    let mut previous: Option<Vec<f64>> = None;
    while tail <= MAX_TAIL {
        // ratios[k] = P_{k+1} / P_k
        let mut ratios = vec![0.0; n_max];
        let mut next = 0.0;
        for n in (1..=tail).rev() {
            let r = seq.r(n)?;
            next = if r == 0.0 { 0.0 } else { r / (x - seq.d(n)? - next) };
            if !next.is_finite() {
                return Ok(None);
            }
            if n <= n_max {
                ratios[n - 1] = next;
            }
        }
        let settled = previous.as_ref().is_some_and(|prev| {
            prev.iter().zip(&ratios).all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs())
        });
        if settled {
            let mut out = Vec::with_capacity(n_max + 1);
            out.push(1.0);
            for k in 0..n_max {
                out.push(out[k] * ratios[k]);
            }
            return Ok(Some(out));
        }
        previous = Some(ratios);
        tail *= 2;
    }
    Ok(None)
}

/// Orthonormal polynomial `P_n / ||P_n||` with the monic norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orthonormal {
    pub poly: Polynomial,
    pub norm: f64,
}

/// Squared norms `mu0 * R(q) ... R(q^n)` of the monic polynomials.
pub fn monic_norms_by_product(seq: &StructuralSeq, mu0: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = mu0;
    out.push(acc);
    for n in 1..=n_max {
        acc *= seq.r(n)?;
        out.push(acc);
    }
    Ok(out)
}

/// Jackson measure accurate to `tol` for polynomials of degree `2 n_max`.
///
/// Nodes accumulate at 0, where `P_n(0)^2 / ||P_n||^2` can grow like
/// `q^{-n^2}`, so the tail cut shrinks by that factor.
fn polynomial_measure(seq: &StructuralSeq, spec: &WeightSpec, n_max: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    let coarse = pearson::jackson_measure(spec, tol)?;
    let mu0: f64 = coarse.iter().map(|(_, m)| m).sum();
    let norms = monic_norms_by_product(seq, mu0, n_max)?;
    let growth = monic_values(seq, 0.0, n_max)?
        .iter()
        .zip(&norms)
        .map(|(v, h)| v * v * mu0 / h)
        .fold(1.0, f64::max);
    if growth <= 1.0 {
        return Ok(coarse);
    }
    pearson::jackson_measure(spec, (tol / growth).max(f64::MIN_POSITIVE))
}

/// Squared monic norms `int P_n^2 dsigma` by Jackson integration.
///
/// Grid values come from the three-term recurrence of `data`: evaluating the
/// monomial coefficients directly loses most digits for supports like `[0, 1]`.
pub fn monic_norms_by_integration(
    data: &PearsonData,
    spec: &WeightSpec,
    n_max: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let seq = structural_functions(data)?;
    let measure = polynomial_measure(&seq, spec, n_max, tol)?;
    let mut norms = vec![0.0; n_max + 1];
    for (x, mass) in measure {
        for (acc, v) in norms.iter_mut().zip(monic_values_at_mass_point(&seq, x, n_max)?) {
            *acc += mass * v * v;
        }
    }
    Ok(norms)
}

/// Gram matrix `int P_n P_m dsigma` of the orthonormal system, `n, m <= N`.
pub fn orthonormal_gram(data: &PearsonData, spec: &WeightSpec, n_max: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    let seq = structural_functions(data)?;
    let measure = polynomial_measure(&seq, spec, n_max, tol)?;
    let norms = monic_norms_by_product(&seq, measure.iter().map(|(_, m)| m).sum(), n_max)?;
    let scale: Vec<f64> = norms.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut gram = vec![vec![0.0; n_max + 1]; n_max + 1];
    for (x, mass) in measure {
        let vals: Vec<f64> =
            monic_values_at_mass_point(&seq, x, n_max)?.iter().zip(&scale).map(|(v, s)| v * s).collect();
        for (row, vi) in gram.iter_mut().zip(&vals) {
            for (g, vj) in row.iter_mut().zip(&vals) {
                *g += mass * vi * vj;
            }
        }
    }
    Ok(gram)
}

/// Orthonormal system `P_n / ||P_n||` with norms from Jackson integration.
pub fn orthonormalize(ops: &MonicOPS, spec: &WeightSpec, tol: f64) -> Result<Vec<Orthonormal>> {
    let norms = monic_norms_by_integration(&ops.data, spec, ops.polys.len().saturating_sub(1), tol)?;
    ops.polys
        .iter()
        .zip(norms)
        .enumerate()
        .map(|(n, (p, norm2))| {
            if !(norm2 > 0.0) {
                return Err(Error::NoPositiveMeasure(format!("squared norm of P_{n} is {norm2}")));
            }
            let norm = norm2.sqrt();
            Ok(Orthonormal { poly: p.scale(1.0 / norm), norm })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcalc::QParam;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    fn hermite() -> PearsonData {
        PearsonData::new(2.0, 0.0, 1.0, 0.0, -1.0, q(0.5)).unwrap()
    }

    #[test]
    fn reduced_r_matches_difference_form() {
        let cases = [
            hermite(),
            PearsonData::new(2.25, -1.5, 1.0, -1.0, 0.0, q(0.5)).unwrap(),
            PearsonData::new(1.3, -0.4, 0.7, 0.2, -0.3, q(0.3)).unwrap(),
        ];
        for data in cases {
            let f = StructuralFunctions::new(&data).unwrap();
            let delta_eta = f.eta.q_difference(data.q.value());
            for x in [0.9, 0.5, 0.25, 0.1] {
                let direct = delta_eta.eval(x).unwrap() - f.beta(x).unwrap() * f.d(x).unwrap();
                let reduced = f.r(x).unwrap();
                assert!((direct - reduced).abs() <= 1e-12 * direct.abs().max(1e-3), "{x}: {direct} {reduced}");
            }
        }
    }

    #[test]
    fn r_keeps_relative_accuracy_near_zero() {
        // b0 = 0 gives R(q^n) ~ q^{2n}
        let data = PearsonData::new(2.25, -1.5, 1.0, -1.0, 0.0, q(0.5)).unwrap();
        let seq = structural_functions(&data).unwrap();
        let ratio = seq.r(80).unwrap() / seq.r(79).unwrap();
        assert!((ratio - 0.25).abs() < 1e-6, "{ratio}");
    }

    fn generic() -> PearsonData {
        PearsonData::new(5.0 / 3.0, -5.0 / 3.0, 1.0, -1.0, -2.0, q(0.5)).unwrap()
    }

    #[test]
    fn hermite_structural_values() {
        let seq = structural_functions(&hermite()).unwrap();
        assert_eq!(seq.r(0).unwrap(), 0.0);
        for n in 1..40 {
            let expected = 0.5f64.powi(n as i32 - 1) * (1.0 - 0.5f64.powi(n as i32));
            let got = seq.r(n).unwrap();
            assert!((got - expected).abs() <= 1e-14 * expected, "n={n}: {got} vs {expected}");
            assert_eq!(seq.d(n).unwrap(), 0.0);
        }
    }

    #[test]
    fn generic_structural_values_match_reference() {
        // high-precision Gram-Schmidt reference values
        let seq = structural_functions(&generic()).unwrap();
        let r = [1.0909090909090908, 0.7108042984646773, 0.4180143715996898];
        let d = [1.0, 0.43478260869565216, 0.259954233409611];
        for n in 0..3 {
            assert!((seq.r(n + 1).unwrap() - r[n]).abs() < 1e-14);
            assert!((seq.d(n).unwrap() - d[n]).abs() < 1e-14);
        }
    }

    #[test]
    fn small_recurrence_examples() {
        let ops = ops_by_recurrence(&hermite(), 2).unwrap();
        assert_eq!(ops.polys[0], Polynomial::constant(1.0));
        assert_eq!(ops.polys[1], Polynomial::new(vec![0.0, 1.0]));
        assert_eq!(ops.polys[2], Polynomial::new(vec![-0.5, 0.0, 1.0]));
    }

    #[test]
    fn hahn_eigenvalue_examples() {
        let d = PearsonData::new(2.0, 0.3, 1.0, 0.1, -0.7, q(0.5)).unwrap();
        assert_eq!(hahn_eigenvalue(&d, 1), 2.0);
        assert!((hahn_eigenvalue(&d, 2) - 6.0).abs() < 1e-14);
        assert!(hahn_apply(&d, &Polynomial::constant(3.0)).is_zero());
    }

    #[test]
    fn rodrigues_leading_matches_numerator() {
        let d = generic();
        for n in 0..8 {
            let num = rodrigues_numerators(&d, n).pop().unwrap();
            assert_eq!(num.degree(), n);
            let alpha = rodrigues_leading(&d, n);
            assert!((num.leading() - alpha).abs() <= 1e-12 * alpha.abs());
        }
    }

    #[test]
    fn three_routes_agree_on_generic_data() {
        let d = generic();
        let rec = ops_by_recurrence(&d, 10).unwrap();
        let rod = ops_by_rodrigues(&d, 10).unwrap();
        let fwd = ops_by_forward(&d, 10).unwrap();
        assert!(rod.max_relative_difference(&rec) < 1e-9);
        assert!(fwd.max_relative_difference(&rec) < 1e-9);
    }

    #[test]
    fn subleading_closed_forms() {
        let d = generic();
        let ops = ops_by_recurrence(&d, 8).unwrap();
        let funcs = StructuralFunctions::new(&d).unwrap();
        for n in 2..=8 {
            let (beta, gamma) = monic_subleading(&d, n);
            let p = &ops.polys[n];
            let x = 0.5f64.powi(n as i32);
            assert!((p.coeff(n - 1) - beta).abs() <= 1e-9 * beta.abs().max(1.0));
            assert!((p.coeff(n - 2) - gamma).abs() <= 1e-9 * gamma.abs().max(1.0));
            assert!((funcs.beta(x).unwrap() - beta).abs() <= 1e-12 * beta.abs().max(1.0));
            assert!((funcs.eta(x).unwrap() - gamma).abs() <= 1e-12 * gamma.abs().max(1.0));
        }
    }

    #[test]
    fn closure_degree_bookkeeping() {
        let d = generic();
        let p = qderiv_closure_check(&d, 5, 4).unwrap();
        assert_eq!(p.degree(), 1);
        assert!((p.leading() - 1.0).abs() < 1e-14);
        let same = qderiv_closure_check(&d, 5, 0).unwrap();
        assert_eq!(same, ops_by_recurrence(&d, 5).unwrap().polys[5]);
    }

    #[test]
    fn sequence_is_shareable_across_threads() {
        let seq = Arc::new(structural_functions(&generic()).unwrap());
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let s = Arc::clone(&seq);
                std::thread::spawn(move || s.r(10 + t).unwrap())
            })
            .collect();
        let values: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for (t, v) in values.iter().enumerate() {
            assert_eq!(*v, seq.r(10 + t).unwrap());
        }
    }
}
