//! Reconstruction of `ψ` and `f(z) = ψ(1/z)` from a Neumann solution, the
//! first-order map and its `O(k²)` budget, and the deviation bound.

use std::f64::consts::PI;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, GridFunction};
use crate::neumann::{check_k, cpq_constant, source_term, DilatationField, NeumannSolution, PoleParam};
use crate::transforms::{cauchy_derivative, cauchy_transform};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `ψ` and `f` rebuilt from the partial sum `ω = Σ φᵢ`.
///
/// By linearity `Σ T[φᵢ] = T[ω]`, so one Cauchy transform per point suffices.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructedMap<'a> {
    p: PoleParam,
    solution: &'a NeumannSolution,
}

impl<'a> ReconstructedMap<'a> {
    pub fn new(solution: &'a NeumannSolution) -> Self {
        Self {
            p: solution.p,
            solution,
        }
    }

    pub fn p(&self) -> PoleParam {
        self.p
    }

    pub fn solution(&self) -> &NeumannSolution {
        self.solution
    }

    /// `T[ω](w)`, the part of `ψ` beyond its principal part.
    pub fn remainder(&self, w: Complex64) -> Complex64 {
        cauchy_transform(&self.solution.omega, w)
    }

    /// `ψ(w) = w/(1−pw) + T[ω](w)`.
    pub fn psi(&self, w: Complex64) -> Result<Complex64> {
        let p = self.p.get();
        let d = 1.0 - p * w;
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole(w));
        }
        Ok(w / d + self.remainder(w))
    }

    /// `f(z) = ψ(1/z)`. Fails at the pole `z = p` and at `z = 0`, where the
    /// series formula is not defined; see [`ReconstructedMap::f_at_origin`].
    pub fn f(&self, z: Complex64) -> Result<Complex64> {
        if z == Complex64::new(self.p.get(), 0.0) {
            return Err(Error::Pole(z));
        }
        if z == Complex64::new(0.0, 0.0) {
            return Err(Error::Origin);
        }
        self.psi(ONE / z).map_err(|_| Error::Pole(z))
    }

    /// `f(0) = lim_{w→∞} ψ(w) = −1/p`, since `T[ω](w) → 0`.
    pub fn f_at_origin(&self) -> Result<Complex64> {
        let p = self.p.get();
        if p == 0.0 {
            return Err(Error::Pole(Complex64::new(0.0, 0.0)));
        }
        Ok(Complex64::new(-1.0 / p, 0.0))
    }

    /// `f′(z) = −1/(z−p)² − T[ω]′(1/z)/z²`, for `z` inside the disk.
    pub fn f_derivative(&self, z: Complex64) -> Result<Complex64> {
        let d = z - self.p.get();
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole(z));
        }
        let principal = -ONE / (d * d);
        if z == Complex64::new(0.0, 0.0) {
            // T[ω](1/z) = (z/π)∬ω + O(z²).
            return Ok(principal + self.solution.omega.integrate() / PI);
        }
        let w = ONE / z;
        Ok(principal - cauchy_derivative(&self.solution.omega, w) / (z * z))
    }
}

/// `1/(z−p) + T[φ₁](1/z)`, the map to first order in `k`. Equals `−1/p` at
/// the origin.
pub fn first_order_map(mu: &DilatationField, p: PoleParam, z: Complex64) -> Result<Complex64> {
    let pv = p.get();
    if z == Complex64::new(pv, 0.0) {
        return Err(Error::Pole(z));
    }
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(-1.0 / pv, 0.0));
    }
    let phi1 = source_term(mu, p);
    Ok(ONE / (z - pv) + cauchy_transform(&phi1, ONE / z))
}

/// Where the Hölder factor `sup_w (∬_𝔻 |ζ−w|^{−s} dA)^{1/s}` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderRegion {
    /// All `w ∈ ℂ`; finite only for `q > 2`.
    WholePlane,
    /// `|w| ≥ radius > 1`, i.e. `|z| ≤ 1/radius` for `z = 1/w`.
    Exterior { radius: f64 },
}

impl HolderRegion {
    /// Region covering `f`-plane points with `|z| ≤ r < 1`.
    pub fn interior(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid(format!("interior radius must lie in (0,1) (got {r})")));
        }
        Ok(HolderRegion::Exterior { radius: 1.0 / r })
    }
}

/// `sup_w ∬_𝔻 |ζ−w|^{−s} dA` over the region. The integral is radially
/// decreasing in `|w|`, so the sup sits at `w = 0` or on `|w| = radius`.
pub fn holder_integral(s: f64, region: HolderRegion) -> Result<f64> {
    match region {
        HolderRegion::WholePlane => {
            if s >= 2.0 {
                return Err(Error::invalid(
                    "the whole-plane Hölder integral diverges for q = 2; use an exterior region",
                ));
            }
            Ok(2.0 * PI / (2.0 - s))
        }
        HolderRegion::Exterior { radius } => {
            if !(radius > 1.0) {
                return Err(Error::invalid(format!("exterior radius must exceed 1 (got {radius})")));
            }
            let rho2 = radius * radius;
            if s == 2.0 {
                return Ok(PI * (rho2 / (rho2 - 1.0)).ln());
            }
            let gl = GaussLegendre::new(48.try_into().expect("nonzero"));
            let total = gl.integrate(0.0, 1.0, |r| {
                r * gl.integrate(0.0, 2.0 * PI, |t| {
                    (r * r + rho2 - 2.0 * r * radius * t.cos()).powf(-0.5 * s)
                })
            });
            Ok(total)
        }
    }
}

/// `C′(p,q) = (1/π) C(p,q) sup (∬|ζ−w|^{−s})^{1/s}`, with `1/q + 1/s = 1`.
pub fn cauchy_bound_constant(p: PoleParam, q: f64, region: HolderRegion) -> Result<f64> {
    let cpq = cpq_constant(p, q)?;
    let s = q / (q - 1.0);
    Ok(cpq * holder_integral(s, region)?.powf(1.0 / s) / PI)
}

/// The `O(k²)` budget of the first-order map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticBudget {
    pub k: f64,
    pub k0: f64,
    pub c: f64,
}

impl AsymptoticBudget {
    pub fn new(k: f64, k0: f64, c: f64) -> Result<Self> {
        check_k(k)?;
        if !(k < k0 && k0 < 1.0) {
            return Err(Error::invalid(format!("need k < k0 < 1 (k = {k}, k0 = {k0})")));
        }
        Ok(Self { k, k0, c })
    }

    pub fn error(&self) -> f64 {
        self.c * self.k * self.k
    }
}

/// `c = C′(p,q) ‖H‖_q² / (1 − k₀‖H‖_q)`.
pub fn budget_c(p: PoleParam, q: f64, k0: f64, hq: f64, region: HolderRegion) -> Result<f64> {
    if !(k0 > 0.0 && k0 < 1.0) {
        return Err(Error::invalid(format!("k0 must lie in (0,1) (got {k0})")));
    }
    let m = k0 * hq;
    if !(m < 1.0) {
        return Err(Error::NonContractive(m));
    }
    Ok(cauchy_bound_constant(p, q, region)? * hq * hq / (1.0 - m))
}

/// `(1/π)∬_𝔻 dA / (|1−pζ|² |ζ−w|)` by midpoint quadrature; the cell holding
/// `w` uses the exact integral of `1/|ζ−w|`.
pub fn abs_kernel_integral(grid: &Arc<DiskGrid>, p: PoleParam, w: Complex64) -> f64 {
    let p = p.get();
    let own = grid.masked_cell_containing(w);
    let weight = |z: Complex64| 1.0 / (1.0 - p * z).norm_sqr();
    let mut sum = 0.0;
    for (s, &c) in grid.centers().iter().enumerate() {
        if Some(s) == own {
            continue;
        }
        sum += weight(c) / (c - w).norm();
    }
    sum *= grid.cell_area();
    if let Some(s) = own {
        let c = grid.centers()[s];
        sum += weight(c) * cell_abs_integral(c - w, grid.h());
    }
    sum / PI
}

/// `∬ 1/|u| dA` over the square of side `h` centred at `d`.
fn cell_abs_integral(d: Complex64, h: f64) -> f64 {
    let f = |x: f64, y: f64| {
        let a = if x == 0.0 { 0.0 } else { x * (y / x.abs()).asinh() };
        let b = if y == 0.0 { 0.0 } else { y * (x / y.abs()).asinh() };
        a + b
    };
    let (x0, x1) = (d.re - 0.5 * h, d.re + 0.5 * h);
    let (y0, y1) = (d.im - 0.5 * h, d.im + 0.5 * h);
    f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0)
}

/// Right side of `|f(z) − 1/(z−p)| ≤ (k/π)∬ |z|/(|1−pζ|²|zζ−1|) dA + c k²`.
pub fn deviation_bound(grid: &Arc<DiskGrid>, k: f64, p: PoleParam, z: Complex64, c: f64) -> Result<f64> {
    check_k(k)?;
    if z == Complex64::new(p.get(), 0.0) {
        return Err(Error::Pole(z));
    }
    let integral = if z == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        abs_kernel_integral(grid, p, ONE / z)
    };
    Ok(k * integral + c * k * k)
}

/// `μ(ζ) = k e^{iθ} (ζ−z)/|ζ−z| ((1−pζ)/|1−pζ|)²`, with `z` a `ψ`-plane
/// point. At `ζ = z` the direction factor is taken as 1.
pub fn pointwise_extremal_dilatation(
    grid: &Arc<DiskGrid>,
    z: Complex64,
    p: PoleParam,
    k: f64,
    theta: f64,
) -> Result<DilatationField> {
    check_k(k)?;
    let pv = p.get();
    let rot = Complex64::from_polar(k, theta);
    let mu = GridFunction::from_fn(grid, |zeta| {
        let d = zeta - z;
        let dir = if d.norm() == 0.0 { ONE } else { d / d.norm() };
        let a = 1.0 - pv * zeta;
        let u = a / a.norm();
        rot * dir * u * u
    });
    DilatationField::new(mu, k)
}

/// Outcome of the phase search for the pointwise extremal dilatation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaSearch {
    pub theta: f64,
    /// `|ψ(z) − z/(1−pz)|` at the optimal phase.
    pub deviation: f64,
    /// `|T[φ₁](z)|`, independent of the phase.
    pub first_order: f64,
}

/// Choose `θ` to maximise `|ψ(z) − z/(1−pz)|` for the pointwise extremal
/// dilatation.
///
/// Since `μ_θ = e^{iθ}μ₀` and every step of the series is complex-linear,
/// `φₙ(θ) = e^{inθ}φₙ(0)`. One solve at `θ = 0` therefore determines the
/// deviation `|Σ e^{inθ} T[φₙ(0)](z)|` for all phases; it is maximised by a
/// grid scan followed by golden-section refinement.
pub fn tune_theta(solution_at_zero: &NeumannSolution, z: Complex64) -> ThetaSearch {
    let t: Vec<Complex64> = solution_at_zero
        .terms
        .iter()
        .map(|phi| cauchy_transform(phi, z))
        .collect();
    let value = |theta: f64| {
        t.iter()
            .enumerate()
            .map(|(i, &v)| v * Complex64::from_polar(1.0, (i + 1) as f64 * theta))
            .sum::<Complex64>()
            .norm()
    };
    let scan = 256;
    let step = 2.0 * PI / scan as f64;
    let best = (0..scan)
        .map(|i| i as f64 * step)
        .max_by(|a, b| value(*a).total_cmp(&value(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (value(x1), value(x2));
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = value(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = value(x1);
        }
    }
    let theta = (0.5 * (lo + hi)).rem_euclid(2.0 * PI);
    ThetaSearch {
        theta,
        deviation: value(theta),
        first_order: t.first().map_or(0.0, |v| v.norm()),
    }
}
