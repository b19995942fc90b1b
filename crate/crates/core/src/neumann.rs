//! Neumann series for `ω = μ/(1−pζ)² + μ H[ω]`.
//!
//! The terms are `φ₁ = μ/(1−pζ)²` and `φₙ = μ H[φₙ₋₁]`; their sum `ω` is the
//! `∂̄`-derivative of the normalised map `ψ`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, Exponent, GridFunction};
use crate::transforms::{operator_norm_bound, BeurlingOperator, TransformConfig};

/// Pole location `p ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PoleParam(f64);

impl PoleParam {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::InvalidPole(p))
        }
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PoleParam {
    type Error = Error;
    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PoleParam> for f64 {
    fn from(p: PoleParam) -> f64 {
        p.0
    }
}

pub(crate) fn check_k(k: f64) -> Result<f64> {
    if (0.0..1.0).contains(&k) {
        Ok(k)
    } else {
        Err(Error::InvalidDilatationBound(k))
    }
}

/// Beltrami coefficient `μ` on the disk together with its declared bound `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatationField {
    mu: GridFunction,
    k: f64,
}

impl DilatationField {
    /// Checks `0 ≤ k < 1` and `‖μ‖_∞ ≤ k`.
    pub fn new(mu: GridFunction, k: f64) -> Result<Self> {
        check_k(k)?;
        let sup = mu.sup_norm();
        if sup > k * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::DilatationExceedsBound { sup, k });
        }
        Ok(Self { mu, k })
    }

    /// Uses the attained sup norm as the bound.
    pub fn from_field(mu: GridFunction) -> Result<Self> {
        let k = mu.sup_norm();
        Self::new(mu, k)
    }

    /// `μ ≡ value`.
    pub fn constant(grid: &Arc<DiskGrid>, value: Complex64) -> Result<Self> {
        Self::new(GridFunction::constant(grid, value), value.norm())
    }

    pub fn zero(grid: &Arc<DiskGrid>) -> Self {
        Self {
            mu: GridFunction::zeros(grid),
            k: 0.0,
        }
    }

    /// Band-limited random field (a few plane waves with wavenumbers in
    /// `[-3, 3]`), scaled so that its sup norm over the disk equals `k`.
    pub fn smooth_random(grid: &Arc<DiskGrid>, k: f64, seed: u64) -> Result<Self> {
        check_k(k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, Complex64)> = (0..6)
            .map(|_| {
                let a = rng.random_range(-3.0..3.0);
                let b = rng.random_range(-3.0..3.0);
                let amp = Complex64::from_polar(rng.random::<f64>(), rng.random_range(0.0..2.0 * PI));
                (a, b, amp)
            })
            .collect();
        let raw = GridFunction::from_fn(grid, |z| {
            modes
                .iter()
                .map(|&(a, b, amp)| amp * Complex64::from_polar(1.0, a * z.re + b * z.im))
                .sum()
        });
        let sup = raw.sup_norm();
        let mu = if sup > 0.0 { &raw * (k / sup) } else { raw };
        Self::new(mu, k)
    }

    pub fn mu(&self) -> &GridFunction {
        &self.mu
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        self.mu.grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.mu.sup_norm()
    }
}

/// `C(p,q) = (2π ∫₀¹ r (1−pr)^{−2q} dr)^{1/q}`, the constant in
/// `‖φ₁‖_q ≤ C(p,q) ‖μ‖_∞`.
pub fn cpq_constant(p: PoleParam, q: f64) -> Result<f64> {
    if !(q >= 2.0) || !q.is_finite() {
        return Err(Error::InvalidExponent { q, min: 2.0 });
    }
    let p = p.get();
    if p <= 1e-6 {
        return Ok(PI.powf(1.0 / q));
    }
    let integral = if p < 0.1 {
        // (1−pr)^{−2q} = Σ a_m (pr)^m, integrated against r dr.
        let mut a = 1.0;
        let mut pm = 1.0;
        let mut sum = 0.0;
        for m in 0..400 {
            let term = a * pm / (m as f64 + 2.0);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
            a *= (2.0 * q + m as f64) / (m as f64 + 1.0);
            pm *= p;
        }
        sum
    } else {
        let u = 1.0 - p;
        (u.powf(2.0 - 2.0 * q) / (2.0 - 2.0 * q) - u.powf(1.0 - 2.0 * q) / (1.0 - 2.0 * q)
            + 1.0 / ((1.0 - 2.0 * q) * (2.0 - 2.0 * q)))
            / (p * p)
    };
    Ok((2.0 * PI * integral).powf(1.0 / q))
}

/// `M = ‖H‖_q ‖μ‖_∞` and whether it is below one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    pub factor: f64,
    pub contractive: bool,
}

pub fn contraction_factor(mu: &DilatationField, q: f64, a_q: Option<f64>) -> Result<Contraction> {
    let hq = operator_norm_bound(q, a_q)?;
    let factor = hq * mu.sup_norm();
    Ok(Contraction {
        factor,
        contractive: factor < 1.0,
    })
}

/// `φ₁ = μ/(1−pζ)²`.
pub fn source_term(mu: &DilatationField, p: PoleParam) -> GridFunction {
    let p = p.get();
    mu.mu().map(|z, m| {
        let d = 1.0 - p * z;
        m / (d * d)
    })
}

/// `C(p,q) ‖H‖_q^{i−1} k^i`, the a-priori bound on `‖φᵢ‖_q`.
pub fn term_norm_bound(i: usize, p: PoleParam, q: f64, k: f64, h_norm: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::invalid("term index starts at 1"));
    }
    check_k(k)?;
    Ok(cpq_constant(p, q)? * h_norm.powi(i as i32 - 1) * k.powi(i as i32))
}

/// Bound on `‖ω_N − ω_m‖_q` for any `N > m`: `C(p,q)/‖H‖_q · M^{m+1}/(1−M)`.
pub fn tail_bound(m: usize, p: PoleParam, q: f64, h_norm: f64, contraction: f64) -> Result<f64> {
    if !(contraction < 1.0) {
        return Err(Error::NonContractive(contraction));
    }
    Ok(cpq_constant(p, q)? / h_norm * contraction.powi(m as i32 + 1) / (1.0 - contraction))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub q: f64,
    pub tol: f64,
    pub max_terms: usize,
    /// `A_q` for `q > 2`; ignored at `q = 2`.
    pub a_q: Option<f64>,
    pub transform: TransformConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            q: 2.0,
            tol: 1e-8,
            max_terms: 64,
            a_q: None,
            transform: TransformConfig::default(),
        }
    }
}

/// Terms of the series, their sum and convergence data.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub terms: Vec<GridFunction>,
    pub term_norms: Vec<f64>,
    pub omega: GridFunction,
    pub q: f64,
    pub p: PoleParam,
    /// Declared bound on `|μ|`.
    pub k: f64,
    pub contraction: f64,
    pub converged: bool,
    pub residual: f64,
    pub tol: f64,
}

impl NeumannSolution {
    /// `ω_m = φ₁ + … + φ_m`.
    pub fn partial_sum(&self, m: usize) -> GridFunction {
        let mut acc = GridFunction::zeros(self.omega.grid());
        for t in self.terms.iter().take(m) {
            acc = &acc + t;
        }
        acc
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        self.omega.grid()
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            grid_n: self.grid().n(),
            p: self.p.get(),
            k: self.k,
            q: self.q,
            terms: self.terms.len(),
            term_norms: self.term_norms.clone(),
            contraction: self.contraction,
            converged: self.converged,
            residual: self.residual,
            tol: self.tol,
        }
    }
}

/// Serializable metadata of a [`NeumannSolution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub grid_n: usize,
    pub p: f64,
    pub k: f64,
    pub q: f64,
    pub terms: usize,
    pub term_norms: Vec<f64>,
    pub contraction: f64,
    pub converged: bool,
    pub residual: f64,
    pub tol: f64,
}

/// Iterate until a term's `L^q` norm drops to `tol` (that term is kept) or a
/// term vanishes identically.
///
/// Errors with [`Error::NonContractive`] when `M ≥ 1`, and with
/// [`Error::MaxTermsExceeded`] (carrying the partial solution) when the
/// threshold is not reached within `max_terms` terms.
pub fn solve_beltrami(
    mu: &DilatationField,
    p: PoleParam,
    opts: &SolverOptions,
) -> Result<NeumannSolution> {
    let op = BeurlingOperator::new(mu.grid(), &opts.transform)?;
    solve_with_operator(mu, p, opts, &op)
}

/// As [`solve_beltrami`], reusing a precomputed operator.
pub fn solve_with_operator(
    mu: &DilatationField,
    p: PoleParam,
    opts: &SolverOptions,
    op: &BeurlingOperator,
) -> Result<NeumannSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive (got {})", opts.tol)));
    }
    if opts.max_terms == 0 {
        return Err(Error::invalid("max_terms must be at least 1"));
    }
    if op.grid().n() != mu.grid().n() {
        return Err(Error::GridMismatch(format!(
            "operator built for n = {}, dilatation has n = {}",
            op.grid().n(),
            mu.grid().n()
        )));
    }
    let q = Exponent::Finite(opts.q);
    let m = contraction_factor(mu, opts.q, opts.a_q)?;
    if !m.contractive {
        return Err(Error::NonContractive(m.factor));
    }

    let source = source_term(mu, p);
    let mut terms = Vec::new();
    let mut term_norms = Vec::new();
    let mut phi = source.clone();
    let mut reached = false;
    loop {
        let nrm = phi.norm(q);
        terms.push(phi);
        term_norms.push(nrm);
        if nrm <= opts.tol {
            reached = true;
            break;
        }
        if terms.len() == opts.max_terms {
            break;
        }
        let h = op.apply(terms.last().expect("nonempty"))?;
        phi = mu.mu() * &h;
    }

    let mut omega = GridFunction::zeros(mu.grid());
    for t in &terms {
        omega = &omega + t;
    }
    let h_omega = op.apply(&omega)?;
    let residual = (&(&omega - &source) - &(mu.mu() * &h_omega)).norm(q);
    let solution = NeumannSolution {
        terms,
        term_norms,
        omega,
        q: opts.q,
        p,
        k: mu.k(),
        contraction: m.factor,
        converged: reached && residual <= 10.0 * opts.tol,
        residual,
        tol: opts.tol,
    };
    if reached {
        Ok(solution)
    } else {
        Err(Error::MaxTermsExceeded {
            max_terms: opts.max_terms,
            last_norm: *solution.term_norms.last().expect("nonempty"),
            partial: Box::new(solution),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pole(p: f64) -> PoleParam {
        PoleParam::new(p).unwrap()
    }

    /// `(2π ∫₀¹ r (1−pr)^{−2q} dr)^{1/q}` by composite Simpson.
    fn cpq_quadrature(p: f64, q: f64) -> f64 {
        let m = 20_000;
        let f = |r: f64| r * (1.0 - p * r).powf(-2.0 * q);
        let h = 1.0 / m as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..m {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        (2.0 * PI * s * h / 3.0).powf(1.0 / q)
    }

    #[test]
    fn cpq_matches_closed_form_at_q2() {
        for p in [1e-7, 1e-4, 0.05, 0.099, 0.1, 0.3, 0.4, 0.5, 0.9, 0.999] {
            let closed = (PI * (3.0 - p) / (3.0 * (1.0 - p).powi(3))).sqrt();
            let got = cpq_constant(pole(p), 2.0).unwrap();
            if p > 1e-6 {
                assert_relative_eq!(got, closed, max_relative = 1e-12);
            }
        }
        assert_relative_eq!(cpq_constant(pole(0.0), 2.0).unwrap(), PI.sqrt());
        assert_relative_eq!(cpq_constant(pole(0.5), 2.0).unwrap(), 4.576456, max_relative = 1e-6);
        assert!(cpq_constant(pole(0.999), 2.0).unwrap() > 1e3);
    }

    #[test]
    fn cpq_matches_quadrature() {
        for &q in &[2.0, 2.5, 3.0, 4.0] {
            for &p in &[0.01, 0.08, 0.2, 0.6] {
                let got = cpq_constant(pole(p), q).unwrap();
                assert_relative_eq!(got, cpq_quadrature(p, q), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn cpq_rejects_bad_input() {
        assert!(cpq_constant(pole(0.3), 1.5).is_err());
        assert!(PoleParam::new(1.0).is_err());
        assert!(PoleParam::new(-0.1).is_err());
    }

    #[test]
    fn contraction_examples() {
        let g = build_grid(16).unwrap();
        let mu = DilatationField::constant(&g, c(0.3, 0.0)).unwrap();
        assert_relative_eq!(contraction_factor(&mu, 2.0, None).unwrap().factor, 0.3);
        let zero = DilatationField::zero(&g);
        assert_eq!(contraction_factor(&zero, 2.0, None).unwrap().factor, 0.0);
        let half = DilatationField::constant(&g, c(0.5, 0.0)).unwrap();
        let m = contraction_factor(&half, 3.0, Some(2.5)).unwrap();
        assert_relative_eq!(m.factor, 1.25);
        assert!(!m.contractive);
        assert!(matches!(
            contraction_factor(&half, 3.0, None),
            Err(Error::OperatorNormNotConfigured(_))
        ));
    }

    #[test]
    fn source_term_examples() {
        let g = build_grid(10).unwrap();
        let mu = DilatationField::constant(&g, c(0.2, 0.0)).unwrap();
        let s0 = source_term(&mu, pole(0.0));
        assert!(s0.values().iter().all(|&v| v == c(0.2, 0.0)));
        let s = source_term(&mu, pole(0.5));
        // n = 10: the cell centred at (0.7, 0.1) exists; evaluate formula there
        let z = c(0.7, 0.1);
        let expected = 0.2 / ((1.0 - 0.5 * z) * (1.0 - 0.5 * z));
        assert!((s.eval(z) - expected).norm() < 1e-14);
        assert_relative_eq!(0.2 / (0.6f64 * 0.6), 0.5555555555555556);
    }

    #[test]
    fn dilatation_bound_is_enforced() {
        let g = build_grid(8).unwrap();
        let f = GridFunction::constant(&g, c(0.5, 0.0));
        assert!(matches!(
            DilatationField::new(f.clone(), 0.4),
            Err(Error::DilatationExceedsBound { .. })
        ));
        assert!(matches!(
            DilatationField::new(f, 1.0),
            Err(Error::InvalidDilatationBound(_))
        ));
        let r = DilatationField::smooth_random(&g, 0.3, 1).unwrap();
        assert_relative_eq!(r.sup_norm(), 0.3, max_relative = 1e-12);
    }

    #[test]
    fn constant_mu_truncates() {
        let mut prev = f64::INFINITY;
        for n in [64, 128, 256] {
            let g = build_grid(n).unwrap();
            let mu = DilatationField::constant(&g, c(0.2, 0.0)).unwrap();
            let sol = solve_beltrami(&mu, pole(0.0), &SolverOptions::default()).unwrap();
            assert!(sol.converged);
            let phi2 = sol.term_norms[1];
            assert!(phi2 < prev, "n = {n}: {phi2} ≥ {prev}");
            prev = phi2;
            if n == 256 {
                assert!(phi2 <= 2e-2);
                assert!(sol.terms[1].sup_norm() <= 2e-2 * 10.0);
            }
        }
    }

    #[test]
    fn zero_mu_is_one_term() {
        let g = build_grid(16).unwrap();
        let sol = solve_beltrami(&DilatationField::zero(&g), pole(0.4), &SolverOptions::default())
            .unwrap();
        assert_eq!(sol.len(), 1);
        assert!(sol.converged);
        assert_eq!(sol.omega.sup_norm(), 0.0);
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn term_bounds_and_decay() {
        let g = build_grid(128).unwrap();
        let p = pole(0.4);
        let cp = cpq_constant(p, 2.0).unwrap();
        for seed in 0..3 {
            let mu = DilatationField::smooth_random(&g, 0.3, seed).unwrap();
            let sol = solve_beltrami(&mu, p, &SolverOptions::default()).unwrap();
            assert!(sol.converged, "seed {seed}");
            assert!(sol.residual <= 10.0 * sol.tol);
            for (i, &nrm) in sol.term_norms.iter().enumerate() {
                let bound = term_norm_bound(i + 1, p, 2.0, 0.3, 1.0).unwrap();
                assert!(nrm <= bound * 1.1, "seed {seed}, i = {}: {nrm} > {bound}", i + 1);
                assert_relative_eq!(bound, cp * 0.3f64.powi(i as i32 + 1), max_relative = 1e-12);
            }
            for w in sol.term_norms.windows(2) {
                assert!(w[1] <= sol.contraction * w[0] * 1.1);
            }
            let n = sol.len();
            for m in 0..n {
                let gap = (&sol.omega - &sol.partial_sum(m + 1)).norm(Exponent::Finite(2.0));
                let tail = tail_bound(m + 1, p, 2.0, 1.0, sol.contraction).unwrap();
                assert!(gap <= tail * 1.1, "m = {m}: {gap} > {tail}");
            }
        }
    }

    #[test]
    fn term_norm_bound_examples() {
        let p0 = pole(0.0);
        assert_relative_eq!(term_norm_bound(1, p0, 2.0, 0.3, 1.0).unwrap(), 0.5317362, max_relative = 1e-6);
        assert_relative_eq!(term_norm_bound(3, p0, 2.0, 0.3, 1.0).unwrap(), 0.0478563, max_relative = 1e-5);
        assert_eq!(term_norm_bound(2, p0, 2.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(term_norm_bound(0, p0, 2.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn non_contractive_and_max_terms() {
        let g = build_grid(16).unwrap();
        let mu = DilatationField::constant(&g, c(0.5, 0.0)).unwrap();
        let opts = SolverOptions {
            q: 3.0,
            a_q: Some(2.5),
            ..SolverOptions::default()
        };
        assert!(matches!(
            solve_beltrami(&mu, pole(0.0), &opts),
            Err(Error::NonContractive(_))
        ));
        let r = DilatationField::smooth_random(&g, 0.6, 4).unwrap();
        let opts = SolverOptions {
            max_terms: 2,
            ..SolverOptions::default()
        };
        match solve_beltrami(&r, pole(0.2), &opts) {
            Err(Error::MaxTermsExceeded { partial, max_terms, .. }) => {
                assert_eq!(max_terms, 2);
                assert_eq!(partial.len(), 2);
                assert!(!partial.converged);
            }
            other => panic!("expected max-terms error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn omega_is_sum_of_terms(seed in 0u64..1000, k in 0.0f64..0.5, p in 0.0f64..0.8) {
            let g = build_grid(16).unwrap();
            let mu = DilatationField::smooth_random(&g, k, seed).unwrap();
            let sol = solve_beltrami(&mu, pole(p), &SolverOptions::default()).unwrap();
            let sum = sol.partial_sum(sol.len());
            prop_assert!((&sum - &sol.omega).sup_norm() <= 1e-14 * (1.0 + sol.omega.sup_norm()));
            prop_assert!(sol.converged);
            let n = sol.len();
            prop_assert!(sol.term_norms[..n - 1].iter().all(|&t| t > 0.0));
        }
    }
}
