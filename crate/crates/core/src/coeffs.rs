//! Laurent coefficients `f(z) = 1/(z−p) + Σ bₙ zⁿ`, equivalently
//! `ψ(w) = w/(1−pw) + Σ bₙ w⁻ⁿ`, and the first-order coefficient bounds.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::neumann::{check_k, cpq_constant, DilatationField, PoleParam};
use crate::reconstruct::ReconstructedMap;

/// Coefficients `b₀..b_N` of a map with a simple pole at `p`, residue 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentCoefficients {
    pub p: PoleParam,
    pub k: f64,
    /// `b[n]` is `bₙ`; `b[0]` is the constant term.
    pub b: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientEntry {
    n: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct CoefficientDocument {
    p: f64,
    k: f64,
    coefficients: Vec<CoefficientEntry>,
}

impl Serialize for LaurentCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoefficientDocument {
            p: self.p.get(),
            k: self.k,
            coefficients: self
                .b
                .iter()
                .enumerate()
                .map(|(n, b)| CoefficientEntry { n, re: b.re, im: b.im })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentCoefficients {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = CoefficientDocument::deserialize(d)?;
        let p = PoleParam::new(doc.p).map_err(D::Error::custom)?;
        let len = doc.coefficients.iter().map(|e| e.n + 1).max().unwrap_or(0);
        let mut b = vec![Complex64::new(0.0, 0.0); len];
        let mut seen = vec![false; len];
        for e in doc.coefficients {
            if std::mem::replace(&mut seen[e.n], true) {
                return Err(D::Error::custom(format!("duplicate coefficient index {}", e.n)));
            }
            b[e.n] = Complex64::new(e.re, e.im);
        }
        Ok(Self { p, k: doc.k, b })
    }
}

impl LaurentCoefficients {
    /// Highest index present.
    pub fn n_max(&self) -> usize {
        self.b.len().saturating_sub(1)
    }

    /// `bₙ`, zero beyond the stored range.
    pub fn get(&self, n: usize) -> Complex64 {
        self.b.get(n).copied().unwrap_or_default()
    }

    /// Whether `b₀` vanishes to within `tol` (class with `b₀ = 0`).
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.get(0).norm() <= tol
    }

    /// Drop the constant term.
    pub fn normalized(mut self) -> Self {
        if let Some(b0) = self.b.first_mut() {
            *b0 = Complex64::new(0.0, 0.0);
        }
        self
    }
}

/// Anything with a `ψ`-side expansion `w/(1−pw) + remainder(w)` analytic in
/// `|w| > 1`.
pub trait LaurentSource {
    fn pole(&self) -> PoleParam;
    fn dilatation_bound(&self) -> f64;
    /// `ψ(w) − w/(1−pw)`.
    fn remainder(&self, w: Complex64) -> Complex64;
}

impl LaurentSource for ReconstructedMap<'_> {
    fn pole(&self) -> PoleParam {
        self.p()
    }

    fn dilatation_bound(&self) -> f64 {
        self.solution().k
    }

    fn remainder(&self, w: Complex64) -> Complex64 {
        ReconstructedMap::remainder(self, w)
    }
}

/// Extract `b₀..b_{n_max}` from samples of the remainder on `|w| = R`.
///
/// With `M` equispaced samples and forward DFT `X`, `bₙ Rⁿ = X_{M−n}/M`. At
/// least `8·n_max` (and never fewer than 128) samples are used.
pub fn coeff_from_map<S: LaurentSource + Sync>(
    source: &S,
    radius: f64,
    n_max: usize,
) -> Result<LaurentCoefficients> {
    if !(radius > 1.0) {
        return Err(Error::invalid(format!("contour radius must exceed 1 (got {radius})")));
    }
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    let m = (8 * n_max).max(128);
    let mut samples: Vec<Complex64> = {
        use rayon::prelude::*;
        (0..m)
            .into_par_iter()
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / m as f64;
                source.remainder(Complex64::from_polar(radius, theta))
            })
            .collect()
    };
    FftPlanner::new().plan_fft_forward(m).process(&mut samples);
    let scale = 1.0 / m as f64;
    let b = (0..=n_max)
        .map(|n| {
            let x = if n == 0 { samples[0] } else { samples[m - n] };
            x * scale * radius.powi(n as i32)
        })
        .collect();
    Ok(LaurentCoefficients {
        p: source.pole(),
        k: source.dilatation_bound(),
        b,
    })
}

fn check_index(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("coefficient index must be at least 1"))
    } else {
        Ok(())
    }
}

/// `(1/π)∬ μ(ζ) ζ^{n−1}/(1−pζ)² dA`, the first-order part of `bₙ`.
pub fn coeff_first_order(mu: &DilatationField, p: PoleParam, n: usize) -> Result<Complex64> {
    check_index(n)?;
    let pv = p.get();
    let f = mu.mu().map(|z, m| {
        let d = 1.0 - pv * z;
        m * z.powu(n as u32 - 1) / (d * d)
    });
    Ok(f.integrate() / PI)
}

/// `Σ_{m≥0} p^{2m}/(n+2m+1) = ∫₀¹ rⁿ/(1−p²r²) dr`.
pub fn series_factor(n: usize, p: PoleParam) -> Result<f64> {
    check_index(n)?;
    let p2 = p.get() * p.get();
    let mut sum = 0.0;
    let mut pw = 1.0;
    let mut m = 0usize;
    loop {
        let term = pw / (n + 2 * m + 1) as f64;
        sum += term;
        if term < 1e-15 {
            break;
        }
        pw *= p2;
        m += 1;
    }
    Ok(sum)
}

/// `C = C(p,2) / (√(nπ) (1−k))`, the constant of the `k²` remainder.
pub fn coeff_error_constant(n: usize, p: PoleParam, k: f64) -> Result<f64> {
    check_index(n)?;
    check_k(k)?;
    Ok(cpq_constant(p, 2.0)? / ((n as f64 * PI).sqrt() * (1.0 - k)))
}

/// `|bₙ| ≤ 2k Σ p^{2m}/(n+2m+1) + C k²`.
pub fn coeff_bound(n: usize, p: PoleParam, k: f64) -> Result<f64> {
    Ok(2.0 * k * series_factor(n, p)? + coeff_error_constant(n, p, k)? * k * k)
}

/// `μ(ζ) = k e^{−i(n−1)θ} ((1−pζ)/|1−pζ|)²` for `ζ = re^{iθ}`, which makes
/// `μ ζ^{n−1}/(1−pζ)²` non-negative. The origin takes the `θ = 0` value.
pub fn extremal_dilatation_for_coeff(
    grid: &Arc<DiskGrid>,
    n: usize,
    p: PoleParam,
    k: f64,
) -> Result<DilatationField> {
    check_index(n)?;
    check_k(k)?;
    let pv = p.get();
    let mu = GridFunction::from_fn(grid, |z| {
        let theta = if z.norm() == 0.0 { 0.0 } else { z.arg() };
        let a = 1.0 - pv * z;
        let u = a / a.norm();
        Complex64::from_polar(k, -((n - 1) as f64) * theta) * u * u
    });
    DilatationField::new(mu, k)
}

/// The same dilatation written on the exterior, `k (z/z̄)^{(n−3)/2} (z−p)/(z̄−p)`
/// with `(z/z̄)^{1/2}` taken as `e^{i arg z}`.
pub fn extremal_dilatation_exterior(z: Complex64, n: usize, p: PoleParam, k: f64) -> Complex64 {
    let pv = p.get();
    let phase = Complex64::from_polar(1.0, (n as f64 - 3.0) * z.arg());
    k * phase * (z - pv) / (z.conj() - pv)
}

/// Largest difference between the two forms under `z = 1/ζ` over the grid.
pub fn extremal_forms_discrepancy(grid: &Arc<DiskGrid>, n: usize, p: PoleParam, k: f64) -> Result<f64> {
    let inner = extremal_dilatation_for_coeff(grid, n, p, k)?;
    Ok(grid
        .centers()
        .iter()
        .zip(inner.mu().values())
        .map(|(&zeta, &v)| (extremal_dilatation_exterior(1.0 / zeta, n, p, k) - v).norm())
        .fold(0.0, f64::max))
}
