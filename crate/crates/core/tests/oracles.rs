//! Values frozen from an independent 50-digit computation: the weight was
//! built directly as an infinite product, the Jackson measure summed to
//! `q^220`, and the recurrence coefficients obtained by the Stieltjes
//! procedure.

#![allow(clippy::excessive_precision)]

use qhahn::moments::{moments_by_recurrence, moments_direct_seq, mu0_closed_form};
use qhahn::pearson::{classify, weight_eval, PearsonData};
use qhahn::qcalc::{q_pochhammer_inf, QParam};
use qhahn::qhahn::structural_functions;
use qhahn::spectral::{jacobi_matrix, spectrum};

fn q() -> QParam {
    QParam::new(0.5).unwrap()
}

/// `A(w) = (5/3)(w - 1)`, `B(w) = (w + 1)(w - 2)`; the shifted polynomial has roots 4 and -3.
fn bounded_case() -> PearsonData {
    PearsonData::new(5.0 / 3.0, -5.0 / 3.0, 1.0, -1.0, -2.0, q()).unwrap()
}

fn discrete_hermite() -> PearsonData {
    PearsonData::new(2.0, 0.0, 1.0, 0.0, -1.0, q()).unwrap()
}

const BOUNDED_R: [f64; 11] = [
    1.0909090909090909091,
    0.71080429846467734092,
    0.41801437159968981981,
    0.22810795772098791265,
    0.11933882501034624906,
    0.061060255724903594628,
    0.030886947121092735926,
    0.015533843322808002773,
    0.007789661405135306943,
    0.0039005341578021602229,
    0.0019516952643076397531,
];

const BOUNDED_D: [f64; 12] = [
    1.0,
    0.43478260869565217391,
    0.25995423340961098398,
    0.14599422839082039302,
    0.077835704748216123353,
    0.04024813603683332264,
    0.02047298292029121469,
    0.010325851055587273302,
    0.005185537578078732921,
    0.0025984561924029586362,
    0.0013006542694468795407,
    0.00065068421981749252468,
];

const BOUNDED_MOMENTS: [f64; 9] = [
    1.0,
    1.0,
    2.0909090909090909091,
    3.6561264822134387352,
    7.3930703893701118493,
    14.320467934616627348,
    28.719536965222290216,
    56.986570277415946286,
    114.05120435172985801,
];

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!((got - want).abs() <= tol * want.abs().max(1e-300), "{what}: got {got}, want {want}");
}

#[test]
fn pochhammer_products() {
    assert_close(q_pochhammer_inf(0.5, q(), 1e-17).unwrap(), 0.2887880950866024212788997, 1e-15, "(1/2; 1/2)");
    assert_close(q_pochhammer_inf(-0.5, q(), 1e-17).unwrap(), 2.384231029031371724149899, 1e-15, "(-1/2; 1/2)");
}

#[test]
fn bounded_case_recurrence_coefficients() {
    let seq = structural_functions(&bounded_case()).unwrap();
    for (n, want) in BOUNDED_R.iter().enumerate() {
        assert_close(seq.r(n + 1).unwrap(), *want, 1e-12, &format!("R_{}", n + 1));
    }
    for (n, want) in BOUNDED_D.iter().enumerate() {
        assert_close(seq.d(n).unwrap(), *want, 1e-12, &format!("D_{n}"));
    }
}

#[test]
fn bounded_case_moments() {
    let data = bounded_case();
    let spec = classify(&data).unwrap();
    let mu0 = mu0_closed_form(&spec).unwrap();
    let by_recurrence = moments_by_recurrence(&data, mu0, 8).unwrap().normalized();
    let direct = moments_direct_seq(&spec, 8, 1e-16).unwrap().normalized();
    for (k, want) in BOUNDED_MOMENTS.iter().enumerate() {
        assert_close(by_recurrence[k], *want, 1e-12, &format!("recurrence mu_{k}"));
        assert_close(direct[k], *want, 1e-12, &format!("direct mu_{k}"));
    }
}

#[test]
fn weight_ratios() {
    let bounded = classify(&bounded_case()).unwrap();
    let ratio = weight_eval(&bounded, 0.25).unwrap() / weight_eval(&bounded, 0.5).unwrap();
    assert_close(ratio, 14.0 / 15.0, 1e-14, "bounded w(1/4)/w(1/2)");
    let hermite = classify(&discrete_hermite()).unwrap();
    let ratio = weight_eval(&hermite, 0.25).unwrap() / weight_eval(&hermite, 0.5).unwrap();
    assert_close(ratio, 16.0 / 15.0, 1e-14, "hermite w(1/4)/w(1/2)");
}

#[test]
fn discrete_hermite_total_mass_and_moments() {
    let data = discrete_hermite();
    let mu0 = mu0_closed_form(&classify(&data).unwrap()).unwrap();
    assert_close(mu0, 1.6416325606551538663, 1e-14, "mu_0");
    let mu = moments_by_recurrence(&data, mu0, 8).unwrap().normalized();
    for (k, want) in [(2, 0.5), (4, 0.4375), (6, 0.423828125), (8, 0.4205169677734375)] {
        assert_close(mu[k], want, 1e-14, &format!("mu_{k}"));
    }
    for k in [1, 3, 5, 7] {
        assert!(mu[k].abs() <= 1e-15, "odd moment mu_{k} = {}", mu[k]);
    }
}

#[test]
fn spectral_masses_at_the_endpoints() {
    for (data, endpoint, want) in
        [(bounded_case(), 2.0, 0.44444444444444444444), (discrete_hermite(), 1.0, 0.20971122089755379885)]
    {
        let seq = structural_functions(&data).unwrap();
        let rule = spectrum(&jacobi_matrix(&seq, 40).unwrap()).unwrap();
        let (i, _) = rule
            .nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - endpoint).abs().total_cmp(&(b.1 - endpoint).abs()))
            .unwrap();
        assert_close(rule.nodes[i], endpoint, 1e-13, "node");
        assert_close(rule.weights[i], want, 1e-12, "mass");
    }
}
