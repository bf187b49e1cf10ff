//! Jacobi operators of reduced Hamiltonians and their spectral data.
//!
//! A [`StructuralSeq`] defines the tridiagonal matrix with diagonal
//! `D(q^n)` and off-diagonal `sqrt R(q^{n+1})`. Its `M x M` truncation gives an
//! `M`-point Gauss rule for the spectral measure of the vacuum.

use nalgebra::{DMatrix, SymmetricEigen};
use twofloat::TwoFloat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcalc::MAX_ITERATIONS;
use crate::qhahn::{SeqSource, StructuralSeq};

/// Default truncation size.
pub const DEFAULT_TRUNCATION: usize = 40;

/// Truncated Jacobi matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobiOperator {
    /// `D(q^n)`, `n = 0..M`.
    pub diag: Vec<f64>,
    /// `sqrt R(q^{n+1})`, `n = 0..M-1`.
    pub offdiag: Vec<f64>,
}

impl JacobiOperator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.size();
        let mut out = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for (i, &b) in self.offdiag.iter().enumerate().take(m.saturating_sub(1)) {
            out[(i, i + 1)] = b;
            out[(i + 1, i)] = b;
        }
        out
    }
}

/// The `M x M` truncation. Fails when some `R(q^n)`, `1 <= n < M`, is not
/// positive.
pub fn jacobi_matrix(seq: &StructuralSeq, m: usize) -> Result<JacobiOperator> {
    if m == 0 {
        return Err(Error::invalid("truncation size must be at least 1"));
    }
    let mut diag = Vec::with_capacity(m);
    let mut offdiag = Vec::with_capacity(m - 1);
    for n in 0..m {
        diag.push(seq.d(n)?);
        if n + 1 < m {
            let r = seq.r(n + 1)?;
            if !(r > 0.0) {
                return Err(Error::NegativeR { n: n + 1, value: r });
            }
            offdiag.push(r.sqrt());
        }
    }
    Ok(JacobiOperator { diag, offdiag })
}

/// Nodes and weights of a discrete measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl DiscreteMeasure {
    /// `sum_i w_i x_i^k` for `k = 0..=k_max`.
    pub fn moments(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max)
            .map(|k| self.nodes.iter().zip(&self.weights).map(|(x, w)| w * x.powi(k as i32)).sum())
            .collect()
    }

    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

/// Eigenvalues and squared first eigenvector components of the truncation.
///
/// This is the Gauss rule of the spectral measure: exact for polynomials of
/// degree up to `2M - 1`.
pub fn spectrum(jacobi: &JacobiOperator) -> Result<DiscreteMeasure> {
    let m = jacobi.size();
    if m == 0 {
        return Err(Error::invalid("empty Jacobi matrix"));
    }
    let eig = SymmetricEigen::try_new(jacobi.to_matrix(), f64::EPSILON, MAX_ITERATIONS)
        .ok_or(Error::NonConvergence { what: "symmetric eigensolver".into(), iterations: MAX_ITERATIONS })?;
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let (nodes, weights) = pairs.into_iter().map(|(x, w)| (x, w / total)).unzip();
    Ok(DiscreteMeasure { nodes, weights, normalized: true })
}

/// Largest distance from a node of the `M/2` rule to the nearest node of the
/// `M` rule.
pub fn node_displacement(seq: &StructuralSeq, m: usize) -> Result<f64> {
    let full = spectrum(&jacobi_matrix(seq, m)?)?;
    let half = spectrum(&jacobi_matrix(seq, (m / 2).max(1))?)?;
    Ok(half
        .nodes
        .iter()
        .map(|x| full.nodes.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Deficiency indices (0,0): essentially self-adjoint, determinate.
    D,
    /// Deficiency indices look like (1,1).
    CCandidate,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeVerdict {
    pub verdict: Verdict,
    /// `sum_{n <= horizon} R(q^n)^{-1/2}`.
    pub partial_sum: f64,
    pub horizon: usize,
    /// True when the verdict is the analytic one for Pearson data rather
    /// than the numerical heuristic.
    pub analytic: bool,
    /// Fitted log-log slope of the terms over the second half of the horizon.
    pub slope: f64,
}

/// Heuristic deficiency-type test based on `sum R(q^n)^{-1/2}`.
///
/// The terms' log-log slope is fitted between `horizon/2` and `horizon`:
/// a slope of at least `-1` means the series diverges (type D), below `-1.1`
/// it converges (type C candidate). Sequences from Pearson data are type D
/// by theory, and finite orbits are trivially type D.
pub fn classify_type(seq: &StructuralSeq, horizon: usize) -> Result<TypeVerdict> {
    if horizon < 10 {
        return Err(Error::invalid("horizon must be at least 10"));
    }
    let mut terms = Vec::with_capacity(horizon);
    let mut finite = false;
    for n in 1..=horizon {
        let r = seq.r(n)?;
        if r <= 0.0 {
            finite = true;
            break;
        }
        terms.push(1.0 / r.sqrt());
    }
    let partial_sum: f64 = terms.iter().sum();
    let analytic = seq.source() == SeqSource::FromPearson;
    if finite || analytic {
        return Ok(TypeVerdict { verdict: Verdict::D, partial_sum, horizon, analytic, slope: f64::NAN });
    }
    let (lo, hi) = (horizon / 2, horizon);
    let slope = (terms[hi - 1] / terms[lo - 1]).ln() / (hi as f64 / lo as f64).ln();
    let verdict = if slope >= -1.0 {
        Verdict::D
    } else if slope < -1.1 {
        Verdict::CCandidate
    } else {
        Verdict::Inconclusive
    };
    Ok(TypeVerdict { verdict, partial_sum, horizon, analytic, slope })
}

/// `Exp_R(x) = sum_n x^n / (R(q) ... R(q^n))`.
///
/// Summation stops once the geometric bound on the tail, built from the
/// current ratio `|x| / R(q^{n+1})`, falls below `tol` times the sum. This
/// bound is valid when `R(q^n)` is eventually nondecreasing.
pub fn exp_r(seq: &StructuralSeq, x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ratio = 0.0;
    for n in 1..MAX_ITERATIONS {
        let r = seq.r(n)?;
        if r <= 0.0 {
            // finite orbit: the series terminates
            return Ok(sum);
        }
        term *= x / r;
        sum += term;
        ratio = x.abs() / seq.r(n + 1)?.max(f64::MIN_POSITIVE);
        if ratio < 1.0 && term.abs() * ratio / (1.0 - ratio) <= tol * sum.abs() {
            return Ok(sum);
        }
        if !sum.is_finite() {
            break;
        }
    }
    if ratio >= 1.0 {
        Err(Error::Divergence(format!("Exp_R({x}): term ratio {ratio} does not drop below 1")))
    } else {
        Err(Error::NonConvergence { what: "Exp_R series".into(), iterations: MAX_ITERATIONS })
    }
}

/// First- and second-kind solutions `P_n(w)`, `Q_n(w)`, `n = 0..=N`, of
/// `w X_n = sqrt R(q^n) X_{n-1} + D(q^n) X_n + sqrt R(q^{n+1}) X_{n+1}`
/// with `P_0 = 1`, `Q_0 = 0`, `Q_1 = R(q)^{-1/2}`.
pub fn recurrence_solutions(seq: &StructuralSeq, w: f64, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut p = vec![1.0];
    let mut q = vec![0.0];
    if n_max == 0 {
        return Ok((p, q));
    }
    let mut sqrt_r = vec![0.0];
    for n in 1..=n_max {
        let r = seq.r(n)?;
        if !(r > 0.0) {
            return Err(Error::NegativeR { n, value: r });
        }
        sqrt_r.push(r.sqrt());
    }
    p.push((w - seq.d(0)?) / sqrt_r[1]);
    q.push(1.0 / sqrt_r[1]);
    for n in 1..n_max {
        let d = seq.d(n)?;
        p.push(((w - d) * p[n] - sqrt_r[n] * p[n - 1]) / sqrt_r[n + 1]);
        q.push(((w - d) * q[n] - sqrt_r[n] * q[n - 1]) / sqrt_r[n + 1]);
    }
    Ok((p, q))
}

/// Casoratian `W_k = P_{k-1}(w) Q_k(w) - P_k(w) Q_{k-1}(w)` for
/// `k = 1..=N` (entry `k - 1`), equal to `R(q^k)^{-1/2}`.
///
/// In double precision the two products cancel to a few digits once `P_k`
/// grows, and the forward `Q_k` picks up a multiple of `P_k` that the
/// Casoratian ignores but the products do not. Both solutions are therefore
/// run in double-double arithmetic; the division by `sqrt R(q^{n+1})` is a
/// rounded reciprocal shared by `P` and `Q`, which moves `W_k` by at most
/// `k` ulps.
pub fn casoratian(seq: &StructuralSeq, w: f64, n_max: usize) -> Result<Vec<f64>> {
    let mut sqrt_r = vec![0.0];
    for n in 1..=n_max {
        let r = seq.r(n)?;
        if !(r > 0.0) {
            return Err(Error::NegativeR { n, value: r });
        }
        sqrt_r.push(r.sqrt());
    }
    let mut out = Vec::with_capacity(n_max);
    if n_max == 0 {
        return Ok(out);
    }
    let (mut p_prev, mut q_prev) = (TwoFloat::from(1.0), TwoFloat::from(0.0));
    let inv = 1.0 / sqrt_r[1];
    let (mut p, mut q) = (TwoFloat::from(w - seq.d(0)?) * inv, TwoFloat::from(inv));
    out.push(f64::from(p_prev * q - p * q_prev));
    for n in 1..n_max {
        let (shift, inv) = (w - seq.d(n)?, 1.0 / sqrt_r[n + 1]);
        let p_next = (p * shift - p_prev * sqrt_r[n]) * inv;
        let q_next = (q * shift - q_prev * sqrt_r[n]) * inv;
        (p_prev, q_prev, p, q) = (p, q, p_next, q_next);
        out.push(f64::from(p_prev * q - p * q_prev));
    }
    Ok(out)
}

/// Partial sums of the four entire functions
/// `A = w sum Q_k(0) Q_k(w)`, `B = -1 + w sum Q_k(0) P_k(w)`,
/// `C = 1 + w sum P_k(0) Q_k(w)`, `D = w sum P_k(0) P_k(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nevanlinna {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Largest absolute contribution of the last term `k = N`.
    pub last_increment: f64,
}

impl Nevanlinna {
    /// `AD - BC`, identically 1 for the full series.
    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }
}

pub fn nevanlinna_partial(seq: &StructuralSeq, w: f64, n_max: usize) -> Result<Nevanlinna> {
    let (p0, q0) = recurrence_solutions(seq, 0.0, n_max)?;
    let (pw, qw) = recurrence_solutions(seq, w, n_max)?;
    let mut out = Nevanlinna { a: 0.0, b: -1.0, c: 1.0, d: 0.0, last_increment: 0.0 };
    for k in 0..=n_max {
        let inc = [w * q0[k] * qw[k], w * q0[k] * pw[k], w * p0[k] * qw[k], w * p0[k] * pw[k]];
        out.a += inc[0];
        out.b += inc[1];
        out.c += inc[2];
        out.d += inc[3];
        out.last_increment = inc.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    Ok(out)
}

/// `<0| e^{i t H} |0> = sum_i w_i e^{i x_i t}`.
///
/// At `t = 0` a normalized measure returns exactly 1.
pub fn vacuum_amplitude(measure: &DiscreteMeasure, t: f64) -> Complex64 {
    if t == 0.0 && measure.normalized {
        return Complex64::new(1.0, 0.0);
    }
    measure.nodes.iter().zip(&measure.weights).map(|(&x, &w)| Complex64::from_polar(w, x * t)).sum()
}

/// `sum_n (i t)^n m_n / n!` for normalized moments `m_n`.
///
/// Terms are added until two consecutive ones fall below `tol`; running out
/// of moments first is a convergence failure.
pub fn moment_amplitude(normalized_moments: &[f64], t: f64, tol: f64) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut factor = Complex64::new(1.0, 0.0);
    let mut small = 0;
    for (n, &m) in normalized_moments.iter().enumerate() {
        if n > 0 {
            factor *= Complex64::new(0.0, t / n as f64);
        }
        let term = factor * m;
        sum += term;
        small = if term.norm() <= tol { small + 1 } else { 0 };
        if small >= 2 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { what: format!("moment series of the amplitude at t = {t}"), iterations: normalized_moments.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::moments_by_recurrence;
    use crate::pearson::PearsonData;
    use crate::qcalc::{q_pochhammer_inf, QParam};
    use crate::qhahn::structural_functions;
    use proptest::prelude::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    fn hermite() -> PearsonData {
        PearsonData::new(2.0, 0.0, 1.0, 0.0, -1.0, q(0.5)).unwrap()
    }

    fn harmonic() -> StructuralSeq {
        StructuralSeq::from_fn(SeqSource::Explicit, |n| Ok((n as f64, 0.0)))
    }

    #[test]
    fn hermite_jacobi_entries() {
        let seq = structural_functions(&hermite()).unwrap();
        let j = jacobi_matrix(&seq, 12).unwrap();
        for (n, b) in j.offdiag.iter().enumerate() {
            let expected = (0.5f64.powi(n as i32) * (1.0 - 0.5f64.powi(n as i32 + 1))).sqrt();
            assert!((b - expected).abs() < 1e-14);
        }
        assert!(j.diag.iter().all(|d| d.abs() < 1e-15));
        let mat = j.to_matrix();
        assert_eq!(mat, mat.transpose());
    }

    #[test]
    fn single_node() {
        let seq = StructuralSeq::explicit(vec![0.0], vec![0.25]).unwrap();
        let m = spectrum(&jacobi_matrix(&seq, 1).unwrap()).unwrap();
        assert_eq!((m.nodes, m.weights), (vec![0.25], vec![1.0]));
    }

    #[test]
    fn non_positive_r_is_rejected() {
        let seq = StructuralSeq::explicit(vec![0.0, 1.0, -1.0], vec![0.0; 3]).unwrap();
        assert_eq!(jacobi_matrix(&seq, 3), Err(Error::NegativeR { n: 2, value: -1.0 }));
    }

    #[test]
    fn gauss_rule_reproduces_moments() {
        let data = hermite();
        let seq = structural_functions(&data).unwrap();
        let m = spectrum(&jacobi_matrix(&seq, 20).unwrap()).unwrap();
        let exact = moments_by_recurrence(&data, 1.0, 15).unwrap().normalized();
        for (k, (a, b)) in m.moments(15).iter().zip(&exact).enumerate() {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-2), "k={k}: {a} vs {b}");
        }
        for (x, y) in m.nodes.iter().zip(m.nodes.iter().rev()) {
            assert!((x + y).abs() < 1e-10);
        }
    }

    #[test]
    fn type_verdicts() {
        let v = classify_type(&harmonic(), 200).unwrap();
        assert_eq!(v.verdict, Verdict::D);
        let fast = StructuralSeq::from_fn(SeqSource::Explicit, |n| Ok((0.5f64.powi(-4 * n as i32), 0.0)));
        assert_eq!(classify_type(&fast, 50).unwrap().verdict, Verdict::CCandidate);
        let pearson = structural_functions(&hermite()).unwrap();
        let v = classify_type(&pearson, 30).unwrap();
        assert!(v.analytic && v.verdict == Verdict::D);
        assert!(classify_type(&harmonic(), 5).is_err());
    }

    #[test]
    fn exponential_series() {
        assert_eq!(exp_r(&harmonic(), 0.0, 1e-15).unwrap(), 1.0);
        assert!((exp_r(&harmonic(), 1.0, 1e-16).unwrap() - std::f64::consts::E).abs() < 1e-15);
        let qv: f64 = 0.5;
        let bracket = StructuralSeq::from_fn(SeqSource::Explicit, move |n| {
            Ok(((1.0 - qv.powi(n as i32)) / (1.0 - qv), 0.0))
        });
        let x = 0.8;
        let product = 1.0 / q_pochhammer_inf((1.0 - qv) * x, q(qv), 1e-17).unwrap();
        assert!((exp_r(&bracket, x, 1e-16).unwrap() - product).abs() < 1e-14);
        assert!(matches!(exp_r(&bracket, 4.0, 1e-16), Err(Error::Divergence(_))));
    }

    #[test]
    fn second_kind_start() {
        let (p, q) = recurrence_solutions(&harmonic(), 0.3, 4).unwrap();
        assert_eq!((p[0], q[0], q[1]), (1.0, 0.0, 1.0));
        assert!((p[1] - 0.3).abs() < 1e-16);
    }

    #[test]
    fn nevanlinna_at_origin() {
        let n = nevanlinna_partial(&harmonic(), 0.0, 10).unwrap();
        assert_eq!((n.a, n.b, n.c, n.d), (0.0, -1.0, 1.0, 0.0));
        assert_eq!(n.determinant(), 1.0);
    }

    #[test]
    fn amplitude_routes() {
        let data = hermite();
        let seq = structural_functions(&data).unwrap();
        let m = spectrum(&jacobi_matrix(&seq, 40).unwrap()).unwrap();
        let mom = moments_by_recurrence(&data, 1.0, 79).unwrap().normalized();
        assert!((vacuum_amplitude(&m, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        for i in 0..=10 {
            let t = 0.5 * i as f64;
            let a = vacuum_amplitude(&m, t);
            let b = moment_amplitude(&mom, t, 1e-17).unwrap();
            assert!((a - b).norm() < 1e-10, "t={t}");
        }
        assert!(moment_amplitude(&mom[..5], 5.0, 1e-17).is_err());
    }

    proptest! {
        #[test]
        fn wronskian_identity(w in -3.0f64..3.0) {
            let seq = harmonic();
            let (p, q) = recurrence_solutions(&seq, w, 40).unwrap();
            for k in 1..=40 {
                let lhs = p[k - 1] * q[k] - p[k] * q[k - 1];
                let rhs = 1.0 / seq.r(k).unwrap().sqrt();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
            }
        }

        #[test]
        fn casoratian_matches_inverse_square_root(w in -3.0f64..3.0) {
            let shifted = StructuralSeq::from_fn(SeqSource::Explicit, |n| Ok((n as f64, 0.5)));
            let quadratic = StructuralSeq::from_fn(SeqSource::Explicit, |n| Ok(((n * (n + 1)) as f64 / 2.0, 0.0)));
            for seq in [harmonic(), shifted, quadratic] {
                for (k, got) in casoratian(&seq, w, 40).unwrap().into_iter().enumerate() {
                    let rhs = 1.0 / seq.r(k + 1).unwrap().sqrt();
                    prop_assert!((got - rhs).abs() <= 1e-10 * rhs, "k = {}: {} vs {}", k + 1, got, rhs);
                }
            }
        }

        #[test]
        fn amplitude_is_bounded(t in -20.0f64..20.0) {
            let seq = harmonic();
            let m = spectrum(&jacobi_matrix(&seq, 30).unwrap()).unwrap();
            prop_assert!(vacuum_amplitude(&m, t).norm() <= 1.0 + 1e-12);
        }
    }
}
