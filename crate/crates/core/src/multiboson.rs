//! Reduction of single-cluster multiboson Hamiltonians
//!
//! ```text
//! H = h0(N_0, ..., N_n) + g0(N) a_0^{k_0} ... a_n^{k_n} + h.c.
//! ```
//!
//! to a Jacobi operator. Here `N_i = a_i* a_i` and a negative exponent means
//! a power of the creation operator. With a matrix `alpha` satisfying
//! `alpha k = e_0`, the operators `A_i = sum_j alpha_ij N_j` commute with each
//! other, `A_1, ..., A_n` are integrals of motion and
//! `[A_0, A] = -A`. On a joint eigenspace of the integrals the Hamiltonian is
//! a weighted shift plus a diagonal, described by the sequences `R(q^n)` and
//! `D(q^n)` of [`StructuralSeq`].
//!
//! [`fock_oracle`] builds the same operators as dense matrices on a
//! truncated Fock space; the tests use it as an independent reference.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcalc::{QParam, MAX_ITERATIONS};
use crate::qhahn::{SeqSource, StructuralSeq};

/// Largest truncated Fock dimension [`fock_oracle`] will allocate.
pub const FOCK_DIMENSION_CAP: usize = 2000;

/// Tolerance for recovering integer occupations from eigenvalues.
pub const LATTICE_TOL: f64 = 1e-9;

/// Real function of the mode occupations `(n_0, ..., n_N)`.
pub type OccupationFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Cluster vector `k`, the matrix `alpha`, the coupling `g0` and the free
/// part `h0`, the latter two as functions of the occupation numbers.
#[derive(Clone)]
pub struct MultibosonModel {
    k: Vec<i64>,
    alpha: DMatrix<f64>,
    g0: OccupationFn,
    h0: OccupationFn,
}

impl fmt::Debug for MultibosonModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultibosonModel").field("k", &self.k).field("alpha", &self.alpha).finish_non_exhaustive()
    }
}

impl MultibosonModel {
    /// Checks shapes only; the algebraic conditions are [`validate_model`].
    pub fn new(k: Vec<i64>, alpha: DMatrix<f64>, g0: OccupationFn, h0: OccupationFn) -> Result<Self> {
        if k.is_empty() || k.iter().all(|&c| c == 0) {
            return Err(Error::invalid("cluster vector k must be nonzero"));
        }
        if alpha.nrows() != k.len() || alpha.ncols() != k.len() {
            return Err(Error::invalid(format!(
                "alpha is {}x{}, expected {n}x{n}",
                alpha.nrows(),
                alpha.ncols(),
                n = k.len()
            )));
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("alpha has non-finite entries"));
        }
        Ok(MultibosonModel { k, alpha, g0, h0 })
    }

    /// Model with constant coupling and `h0 = sum_i omega_i n_i`.
    pub fn with_free_part(k: Vec<i64>, alpha: DMatrix<f64>, coupling: f64, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != k.len() {
            return Err(Error::invalid("one frequency per mode is required"));
        }
        let h0: OccupationFn = Arc::new(move |n: &[f64]| n.iter().zip(&omega).map(|(a, b)| a * b).sum());
        Self::new(k, alpha, Arc::new(move |_: &[f64]| coupling), h0)
    }

    pub fn modes(&self) -> usize {
        self.k.len()
    }

    pub fn k(&self) -> &[i64] {
        &self.k
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    /// `alpha^{-1}`.
    pub fn beta(&self) -> Result<DMatrix<f64>> {
        self.alpha.clone().try_inverse().ok_or(Error::SingularAlpha)
    }

    pub fn g0(&self, occupations: &[f64]) -> f64 {
        (self.g0)(occupations)
    }

    pub fn h0(&self, occupations: &[f64]) -> f64 {
        (self.h0)(occupations)
    }
}

/// Checks `det alpha != 0` and `alpha k = e_0`.
pub fn validate_model(m: &MultibosonModel) -> Result<()> {
    let hadamard: f64 = m.alpha.row_iter().map(|r| r.norm()).product();
    if hadamard == 0.0 || m.alpha.determinant().abs() <= 1e-12 * hadamard {
        return Err(Error::SingularAlpha);
    }
    for (row, alpha_row) in m.alpha.row_iter().enumerate() {
        let terms = alpha_row.iter().zip(&m.k).map(|(a, &k)| a * k as f64);
        let (value, scale) = terms.fold((0.0, 0.0), |(s, t), x| (s + x, t + x.abs()));
        let expected = if row == 0 { 1.0 } else { 0.0 };
        if (value - expected).abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::ConstraintViolation { row, value, expected });
        }
    }
    Ok(())
}

/// The diagonal polynomial `P_k(n)` of `a^k a^{-k}`:
/// `(n+1)...(n+k)` for `k > 0`, `1` for `k = 0`, `n(n-1)...(n+k+1)` for `k < 0`.
///
/// Evaluated as a formal product, so it vanishes for `0 <= n < -k`.
pub fn cluster_polynomial(k: i64, n: i64) -> f64 {
    let n = n as f64;
    if k >= 0 {
        (1..=k).map(|j| n + j as f64).product()
    } else {
        (0..-k).map(|j| n - j as f64).product()
    }
}

/// `G` at the given occupations: the `A A*` diagonal `g0(n)^2 prod_i P_{k_i}(n_i)`.
pub fn structural_g(m: &MultibosonModel, occupations: &[i64]) -> f64 {
    let poly: f64 = m.k.iter().zip(occupations).map(|(&k, &n)| cluster_polynomial(k, n)).product();
    if poly == 0.0 {
        return 0.0;
    }
    let occ: Vec<f64> = occupations.iter().map(|&n| n as f64).collect();
    m.g0(&occ).powi(2) * poly
}

/// The `A* A` diagonal at the given occupations, i.e. `G` at `n - k`.
pub fn lowering_diagonal(m: &MultibosonModel, occupations: &[i64]) -> f64 {
    let shifted: Vec<i64> = occupations.iter().zip(&m.k).map(|(n, k)| n - k).collect();
    if shifted.iter().any(|&n| n < 0) {
        return 0.0;
    }
    structural_g(m, &shifted)
}

/// Vacuum labels of a joint eigenspace of the integrals of motion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VacuumDecomposition {
    /// gcd of the cluster exponents.
    pub kappa: u64,
    /// The label set `L`, one label per irreducible component.
    pub labels: Vec<i64>,
    /// `lambda_{0,l}` for each label, in the same order.
    pub lambda0: Vec<f64>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `kappa`, `L = {0, k_0/kappa, ..., (kappa-1) k_0/kappa}` and
/// `lambda_{0,l} = (l - sum_{j>=1} beta_0j lambda_j) / k_0`.
pub fn vacuum_lambdas(m: &MultibosonModel, lambdas: &[f64]) -> Result<VacuumDecomposition> {
    let k0 = m.k[0];
    if k0 <= 0 {
        return Err(Error::Unsupported(
            "only k_0 > 0 is handled; relabel the modes so that mode 0 has a positive exponent".into(),
        ));
    }
    if lambdas.len() + 1 != m.modes() {
        return Err(Error::invalid(format!("expected {} integrals of motion, got {}", m.modes() - 1, lambdas.len())));
    }
    let beta = m.beta()?;
    let kappa = m.k.iter().fold(0, |g, &k| gcd(g, k.unsigned_abs()));
    let step = k0 / kappa as i64;
    let labels: Vec<i64> = (0..kappa as i64).map(|j| j * step).collect();
    let offset: f64 = lambdas.iter().enumerate().map(|(j, l)| beta[(0, j + 1)] * l).sum();
    let lambda0 = labels.iter().map(|&l| (l as f64 - offset) / k0 as f64).collect();
    Ok(VacuumDecomposition { kappa, labels, lambda0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionClass {
    Finite,
    Infinite,
}

/// Finite iff two cluster exponents have opposite signs.
pub fn dimension_class(m: &MultibosonModel) -> DimensionClass {
    let pos = m.k.iter().any(|&k| k > 0);
    let neg = m.k.iter().any(|&k| k < 0);
    if pos && neg {
        DimensionClass::Finite
    } else {
        DimensionClass::Infinite
    }
}

/// One irreducible component of a reduced Hamiltonian.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub lambdas: Vec<f64>,
    pub label: i64,
    pub lambda0: f64,
    pub kappa: u64,
    pub q: QParam,
    /// Number of states in the orbit, `None` when infinite.
    pub dimension: Option<usize>,
    /// Occupations of the vacuum.
    pub vacuum: Vec<i64>,
    /// `R(q^n)`, `D(q^n)`; padded with zeros past a finite orbit.
    pub seq: StructuralSeq,
}

fn to_lattice(values: &[f64]) -> Result<Vec<i64>> {
    values
        .iter()
        .map(|&v| {
            let r = v.round();
            if (v - r).abs() > LATTICE_TOL * v.abs().max(1.0) {
                Err(Error::NonLattice(values.to_vec()))
            } else {
                Ok(r as i64)
            }
        })
        .collect()
}

/// Reduces the model to the component labelled `l` of the eigenspace with
/// integrals `lambdas`.
///
/// The `n`-th state of the orbit has occupations `v_0 + n k`, where the vacuum
/// `v_0 = alpha^{-1} (lambda_{0,l}, lambdas)`. Then `R(q^n)` is the `A* A`
/// diagonal and `D(q^n)` the value of `h0` at `v_n`.
///
/// Models with mixed-sign `k` have finite orbits; their length is reported in
/// [`ReducedSystem::dimension`].
pub fn reduce(m: &MultibosonModel, lambdas: &[f64], l: i64, q: QParam) -> Result<ReducedSystem> {
    validate_model(m)?;
    let vac = vacuum_lambdas(m, lambdas)?;
    let pos = vac
        .labels
        .iter()
        .position(|&x| x == l)
        .ok_or_else(|| Error::invalid(format!("label {l} is not in L = {:?}", vac.labels)))?;
    let lambda0 = vac.lambda0[pos];
    let beta = m.beta()?;
    let mut eig = Vec::with_capacity(m.modes());
    eig.push(lambda0);
    eig.extend_from_slice(lambdas);
    let occ = beta * DVector::from_vec(eig);
    let vacuum = to_lattice(occ.as_slice())?;
    if vacuum.iter().any(|&n| n < 0) {
        return Err(Error::NonLattice(occ.as_slice().to_vec()));
    }
    let base = lowering_diagonal(m, &vacuum);
    if base != 0.0 {
        return Err(Error::Domain(format!("state {vacuum:?} is not annihilated by A (A*A = {base})")));
    }

    let state = {
        let (vacuum, k) = (vacuum.clone(), m.k.clone());
        move |n: usize| -> Vec<i64> { vacuum.iter().zip(&k).map(|(v, k)| v + n as i64 * k).collect() }
    };
    let dimension = match dimension_class(m) {
        DimensionClass::Infinite => None,
        DimensionClass::Finite => {
            let len = (1..=MAX_ITERATIONS).find(|&n| state(n).iter().any(|&x| x < 0));
            Some(len.ok_or(Error::NonConvergence { what: "orbit length".into(), iterations: MAX_ITERATIONS })?)
        }
    };
    let model = m.clone();
    let seq = StructuralSeq::from_fn(SeqSource::FromMultiboson, move |n| {
        if dimension.is_some_and(|d| n >= d) {
            return Ok((0.0, 0.0));
        }
        let v = state(n);
        let occ: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        Ok((lowering_diagonal(&model, &v), model.h0(&occ)))
    });
    Ok(ReducedSystem { lambdas: lambdas.to_vec(), label: l, lambda0, kappa: vac.kappa, q, dimension, vacuum, seq })
}

/// Dense matrices of the mode and cluster operators on the truncated Fock
/// space with occupations `0..=cutoff` per mode.
#[derive(Debug, Clone)]
pub struct FockTruncation {
    pub cutoff: usize,
    pub modes: usize,
    /// `a_i`.
    pub annihilators: Vec<DMatrix<f64>>,
    /// `a_i*`.
    pub creators: Vec<DMatrix<f64>>,
    /// `A = g0(N) a^k`.
    pub cluster: DMatrix<f64>,
    /// `A*`.
    pub cluster_adjoint: DMatrix<f64>,
    /// `A_i = sum_j alpha_ij N_j`.
    pub integrals: Vec<DMatrix<f64>>,
    k: Vec<i64>,
}

impl FockTruncation {
    pub fn dim(&self) -> usize {
        (self.cutoff + 1).pow(self.modes as u32)
    }

    /// Basis index of an occupation vector; mode 0 varies slowest.
    pub fn index(&self, occupations: &[i64]) -> Option<usize> {
        let side = self.cutoff as i64 + 1;
        let mut idx = 0i64;
        for &n in occupations {
            if !(0..side).contains(&n) {
                return None;
            }
            idx = idx * side + n;
        }
        Some(idx as usize)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<i64> {
        let side = self.cutoff + 1;
        let mut out = vec![0; self.modes];
        for slot in out.iter_mut().rev() {
            *slot = (index % side) as i64;
            index /= side;
        }
        out
    }

    /// True when every occupation stays `margin` below the cutoff, so that
    /// one application of `A` or `A*` does not leave the truncated space.
    pub fn is_interior(&self, occupations: &[i64], margin: i64) -> bool {
        occupations.iter().all(|&n| n >= 0 && n <= self.cutoff as i64 - margin)
    }

    /// Margin at which a single application of `A` or `A*` is unaffected by
    /// the truncation.
    pub fn cluster_margin(&self) -> i64 {
        self.k.iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Largest entry of `mat` in the columns of interior states.
    pub fn interior_max(&self, mat: &DMatrix<f64>, margin: i64) -> f64 {
        (0..self.dim())
            .filter(|&j| self.is_interior(&self.occupations(j), margin))
            .flat_map(|j| mat.column(j).iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    /// Orbits of `A` within the sector where `A_i = lambdas[i-1]`, found as
    /// connected components of the nonzero pattern of the `A` matrix.
    ///
    /// For each orbit, states whose `A` column vanishes are counted as
    /// vacua. States whose column could vanish only because a creation
    /// operator hit the cutoff are skipped.
    pub fn sector_orbits(&self, lambdas: &[f64]) -> Vec<Orbit> {
        let dim = self.dim();
        let in_sector: Vec<usize> = (0..dim)
            .filter(|&j| {
                lambdas.iter().enumerate().all(|(i, l)| (self.integrals[i + 1][(j, j)] - l).abs() <= LATTICE_TOL)
            })
            .collect();
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &j in &in_sector {
            for i in 0..dim {
                if self.cluster[(i, j)] != 0.0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut orbits: Vec<(usize, Orbit)> = Vec::new();
        for &j in &in_sector {
            let root = find(&mut parent, j);
            let occ = self.occupations(j);
            let near_top = occ.iter().zip(&self.k).any(|(&n, &k)| k < 0 && n - k > self.cutoff as i64);
            let is_vacuum = !near_top && self.cluster.column(j).iter().all(|&v| v == 0.0);
            let pos = match orbits.iter().position(|(r, _)| *r == root) {
                Some(p) => p,
                None => {
                    orbits.push((root, Orbit { states: Vec::new(), vacua: Vec::new() }));
                    orbits.len() - 1
                }
            };
            orbits[pos].1.states.push(occ.clone());
            if is_vacuum {
                orbits[pos].1.vacua.push(occ);
            }
        }
        orbits.into_iter().map(|(_, o)| o).collect()
    }
}

/// States of one orbit of `A` and the vacua found among them.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub states: Vec<Vec<i64>>,
    pub vacua: Vec<Vec<i64>>,
}

fn embed(op: &DMatrix<f64>, mode: usize, modes: usize, side: usize) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(side, side);
    let mut out = DMatrix::<f64>::identity(1, 1);
    for i in 0..modes {
        out = out.kronecker(if i == mode { op } else { &id });
    }
    out
}

/// Builds the truncated Fock representation of the model.
pub fn fock_oracle(m: &MultibosonModel, cutoff: usize) -> Result<FockTruncation> {
    let max_k = m.k.iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
    if cutoff < 3.max(2 * max_k) {
        return Err(Error::invalid(format!("cutoff must be at least max(3, 2 max|k|) = {}", 3.max(2 * max_k))));
    }
    let side = cutoff + 1;
    let dim = (side as u128).checked_pow(m.modes() as u32).unwrap_or(u128::MAX);
    if dim > FOCK_DIMENSION_CAP as u128 {
        return Err(Error::MemoryBudget(format!("Fock dimension {dim} (cap {FOCK_DIMENSION_CAP})")));
    }
    let dim = dim as usize;
    let mut single = DMatrix::<f64>::zeros(side, side);
    for n in 1..side {
        single[(n - 1, n)] = (n as f64).sqrt();
    }
    let modes = m.modes();
    let annihilators: Vec<_> = (0..modes).map(|i| embed(&single, i, modes, side)).collect();
    let creators: Vec<_> = annihilators.iter().map(|a| a.transpose()).collect();

    let mut truncation = FockTruncation {
        cutoff,
        modes,
        annihilators,
        creators,
        cluster: DMatrix::zeros(0, 0),
        cluster_adjoint: DMatrix::zeros(0, 0),
        integrals: Vec::new(),
        k: m.k.clone(),
    };
    let number: Vec<DVector<f64>> = (0..modes)
        .map(|i| DVector::from_fn(dim, |j, _| truncation.occupations(j)[i] as f64))
        .collect();
    let mut monomial = DMatrix::<f64>::identity(dim, dim);
    for (i, &k) in m.k.iter().enumerate() {
        let factor = if k >= 0 { &truncation.annihilators[i] } else { &truncation.creators[i] };
        for _ in 0..k.unsigned_abs() {
            monomial = &monomial * factor;
        }
    }
    let coupling = DVector::from_fn(dim, |j, _| {
        let occ: Vec<f64> = truncation.occupations(j).iter().map(|&n| n as f64).collect();
        m.g0(&occ)
    });
    truncation.cluster = DMatrix::from_diagonal(&coupling) * monomial;
    truncation.cluster_adjoint = truncation.cluster.transpose();
    truncation.integrals = (0..modes)
        .map(|i| {
            let diag = (0..modes).fold(DVector::zeros(dim), |acc, j| acc + &number[j] * m.alpha[(i, j)]);
            DMatrix::from_diagonal(&diag)
        })
        .collect();
    Ok(truncation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pearson::PearsonData;
    use crate::qhahn::structural_functions;

    fn constant(c: f64) -> OccupationFn {
        Arc::new(move |_: &[f64]| c)
    }

    fn model(k: Vec<i64>, alpha: &[f64]) -> MultibosonModel {
        let n = k.len();
        MultibosonModel::new(k, DMatrix::from_row_slice(n, n, alpha), constant(1.0), constant(0.0)).unwrap()
    }

    fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a * b - b * a
    }

    #[test]
    fn validation_examples() {
        assert_eq!(validate_model(&model(vec![1, 0], &[1.0, 0.0, 0.0, 1.0])), Ok(()));
        assert_eq!(
            validate_model(&model(vec![2, 0], &[1.0, 0.0, 0.0, 1.0])),
            Err(Error::ConstraintViolation { row: 0, value: 2.0, expected: 1.0 })
        );
        assert_eq!(validate_model(&model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0])), Ok(()));
        assert_eq!(validate_model(&model(vec![1, 1], &[1.0, 0.0, 1.0, 0.0])), Err(Error::SingularAlpha));
        assert!(MultibosonModel::new(vec![0, 0], DMatrix::identity(2, 2), constant(1.0), constant(0.0)).is_err());
    }

    #[test]
    fn cluster_polynomials() {
        assert_eq!(cluster_polynomial(0, 7), 1.0);
        assert_eq!(cluster_polynomial(2, 0), 2.0);
        assert_eq!(cluster_polynomial(-1, 0), 0.0);
        assert_eq!(cluster_polynomial(-2, 1), 0.0);
        assert_eq!(cluster_polynomial(-2, 5), 20.0);
        assert_eq!(cluster_polynomial(3, 2), 60.0);
    }

    #[test]
    fn two_mode_g() {
        let m = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        for n0 in 0..5 {
            for n1 in 0..5 {
                assert_eq!(structural_g(&m, &[n0, n1]), ((n0 + 1) * n1) as f64);
            }
        }
    }

    #[test]
    fn vacuum_labels() {
        let two = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        let v = vacuum_lambdas(&two, &[3.0]).unwrap();
        assert_eq!((v.kappa, v.labels.clone(), v.lambda0.clone()), (1, vec![0], vec![0.0]));
        let pair = model(vec![2], &[0.5]);
        let v = vacuum_lambdas(&pair, &[]).unwrap();
        assert_eq!((v.kappa, v.labels, v.lambda0), (2, vec![0, 1], vec![0.0, 0.5]));
        let flipped = model(vec![-1, 1], &[-1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(vacuum_lambdas(&flipped, &[0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dimension_classes() {
        assert_eq!(dimension_class(&model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0])), DimensionClass::Finite);
        assert_eq!(dimension_class(&model(vec![2, 1], &[0.5, 0.0, -0.5, 1.0])), DimensionClass::Infinite);
        assert_eq!(dimension_class(&model(vec![2], &[0.5])), DimensionClass::Infinite);
    }

    #[test]
    fn harmonic_ladder_reduces_to_n() {
        let m = model(vec![1], &[1.0]);
        let red = reduce(&m, &[], 0, QParam::new(0.5).unwrap()).unwrap();
        assert_eq!(red.dimension, None);
        for n in 0..30 {
            assert_eq!(red.seq.r(n).unwrap(), n as f64);
        }
    }

    #[test]
    fn two_mode_orbit_is_finite() {
        let m = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        let red = reduce(&m, &[4.0], 0, QParam::new(0.5).unwrap()).unwrap();
        assert_eq!(red.vacuum, vec![0, 4]);
        assert_eq!(red.dimension, Some(5));
        let r: Vec<f64> = (0..6).map(|n| red.seq.r(n).unwrap()).collect();
        // R(q^n) = n (lambda_1 - n + 1)
        assert_eq!(r, vec![0.0, 4.0, 6.0, 6.0, 4.0, 0.0]);
    }

    #[test]
    fn non_lattice_eigenvalues_are_rejected() {
        let m = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(reduce(&m, &[2.5], 0, QParam::new(0.5).unwrap()), Err(Error::NonLattice(_))));
        assert!(matches!(reduce(&m, &[-1.0], 0, QParam::new(0.5).unwrap()), Err(Error::NonLattice(_))));
    }

    #[test]
    fn coupling_can_encode_pearson_data() {
        // single mode, g0(n)^2 (n+1) = R_AB(q^{n+1}) for discrete q-Hermite I
        let q = 0.5f64;
        let g0: OccupationFn = Arc::new(move |n: &[f64]| {
            let m = n[0];
            (q.powf(m) * (1.0 - q.powf(m + 1.0)) / (m + 1.0)).sqrt()
        });
        let m = MultibosonModel::new(vec![1], DMatrix::from_element(1, 1, 1.0), g0, constant(0.0)).unwrap();
        let red = reduce(&m, &[], 0, QParam::new(q).unwrap()).unwrap();
        let hermite = PearsonData::new(2.0, 0.0, 1.0, 0.0, -1.0, QParam::new(q).unwrap()).unwrap();
        let reference = structural_functions(&hermite).unwrap();
        for n in 0..25 {
            let (a, b) = (red.seq.r(n).unwrap(), reference.r(n).unwrap());
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300), "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn oracle_ladder_operators() {
        let m = model(vec![1], &[1.0]);
        let fock = fock_oracle(&m, 4).unwrap();
        let a = &fock.annihilators[0];
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(fock.creators[0][(1, 0)], 1.0);
        assert_eq!(fock.creators[0], a.transpose());
        let comm = commutator(a, &fock.creators[0]) - DMatrix::identity(5, 5);
        for j in 0..4 {
            assert!(comm.column(j).amax() < 1e-12);
        }
        assert!(comm[(4, 4)].abs() > 1.0);
    }

    #[test]
    fn oracle_commutation_relations() {
        let m = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        let fock = fock_oracle(&m, 6).unwrap();
        let margin = fock.cluster_margin();
        let a = &fock.cluster;
        let a0 = &fock.integrals[0];
        assert!(fock.interior_max(&(commutator(a0, a) + a), margin) <= 1e-10);
        assert!(fock.interior_max(&commutator(a, &fock.integrals[1]), margin) <= 1e-10);
        assert!(fock.interior_max(&commutator(a0, &fock.integrals[1]), 0) <= 1e-10);
    }

    #[test]
    fn oracle_budget_and_cutoff() {
        let m = model(vec![1, -1], &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(fock_oracle(&m, 100), Err(Error::MemoryBudget(_))));
        assert!(matches!(fock_oracle(&m, 2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_mode_pairs_split_into_two_orbits() {
        let m = model(vec![2], &[0.5]);
        let fock = fock_oracle(&m, 10).unwrap();
        let orbits = fock.sector_orbits(&[]);
        assert_eq!(orbits.len(), 2);
        let mut vacua: Vec<_> = orbits.iter().map(|o| o.vacua.clone()).collect();
        vacua.sort();
        assert_eq!(vacua, vec![vec![vec![0]], vec![vec![1]]]);
    }
}
