//! Cauchy transform `T[ω](z) = −(1/π)∬ ω(ζ)/(ζ−z) dA` and Beurling transform
//! `H[ω](z) = −(1/π) p.v.∬ ω(ζ)/(ζ−z)² dA` of fields supported on the disk.
//!
//! Both operators come in two flavours. The direct sums are the reference
//! implementation. The fast paths convolve with the sampled lattice kernel on
//! a zero-padded square through a 2-D FFT; with a padding factor of at least
//! two there is no wrap-around, so on cell centres they reproduce the direct
//! sums up to FFT round-off.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, GridFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Evaluation strategy for the transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Fast,
    DirectOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformConfig {
    pad_factor: usize,
    pub method: Method,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            pad_factor: 2,
            method: Method::Fast,
        }
    }
}

impl TransformConfig {
    pub fn new(pad_factor: usize, method: Method) -> Result<Self> {
        if pad_factor < 2 {
            return Err(Error::InvalidPadFactor(pad_factor));
        }
        Ok(Self { pad_factor, method })
    }

    pub fn direct() -> Self {
        Self {
            method: Method::DirectOracle,
            ..Self::default()
        }
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }
}

/// `∬_cell 1/(ζ−z) dA` over the axis-aligned square of side `h` centred at
/// `c`, exact for any `z`. Vanishes when `z = c`.
pub fn cell_cauchy_integral(c: Complex64, h: f64, z: Complex64) -> Complex64 {
    let d = c - z;
    let (xa, xb) = (d.re - 0.5 * h, d.re + 0.5 * h);
    let (ya, yb) = (d.im - 0.5 * h, d.im + 0.5 * h);
    let dlog = |a: Complex64, b: Complex64| {
        let r = b / a;
        Complex64::new((b.norm() / a.norm()).ln(), r.arg())
    };
    // ∬ 1/u dA = (1/2i) ∮ ū/u du, counter-clockwise around the cell.
    let horizontal = |y: f64, x0: f64, x1: f64| {
        let mut s = Complex64::new(x1 - x0, 0.0);
        if y != 0.0 {
            s -= Complex64::new(0.0, 2.0 * y) * dlog(Complex64::new(x0, y), Complex64::new(x1, y));
        }
        s
    };
    let vertical = |x: f64, y0: f64, y1: f64| {
        let mut s = Complex64::new(0.0, -(y1 - y0));
        if x != 0.0 {
            s += 2.0 * x * dlog(Complex64::new(x, y0), Complex64::new(x, y1));
        }
        s
    };
    let loop_integral =
        horizontal(ya, xa, xb) + vertical(xb, ya, yb) + horizontal(yb, xb, xa) + vertical(xa, yb, ya);
    loop_integral / Complex64::new(0.0, 2.0)
}

/// Direct Cauchy transform at an arbitrary point.
///
/// Every cell contributes its midpoint value, except the masked cell that
/// contains `z`, which is integrated exactly over the cell. At a cell centre
/// that exact contribution is zero, i.e. the self-cell is skipped.
pub fn cauchy_transform(omega: &GridFunction, z: Complex64) -> Complex64 {
    let grid = omega.grid();
    let h2 = grid.cell_area();
    let own = grid.masked_cell_containing(z);
    let mut sum = ZERO;
    for (s, (&c, &w)) in grid.centers().iter().zip(omega.values()).enumerate() {
        if Some(s) == own || w == ZERO {
            continue;
        }
        sum += w / (c - z);
    }
    sum *= h2;
    if let Some(s) = own {
        sum += omega.values()[s] * cell_cauchy_integral(grid.centers()[s], grid.h(), z);
    }
    -sum / PI
}

/// `T[ω]` at many points; identical to calling [`cauchy_transform`] per point.
pub fn cauchy_transform_field(omega: &GridFunction, targets: &[Complex64]) -> Vec<Complex64> {
    targets
        .par_iter()
        .map(|&z| cauchy_transform(omega, z))
        .collect()
}

/// Complex derivative `T[ω]'(w) = −(1/π) Σ ω h²/(c−w)²` for `w` off the
/// support.
pub fn cauchy_derivative(omega: &GridFunction, w: Complex64) -> Complex64 {
    let grid = omega.grid();
    let mut sum = ZERO;
    for (&c, &v) in grid.centers().iter().zip(omega.values()) {
        let d = c - w;
        sum += v / (d * d);
    }
    -sum * grid.cell_area() / PI
}

/// Direct principal-value Beurling sum at `z`, skipping the masked cell that
/// contains it. Also serves as a diagnostic off the support.
pub fn beurling_at(omega: &GridFunction, z: Complex64) -> Complex64 {
    let grid = omega.grid();
    let own = grid.masked_cell_containing(z);
    let mut sum = ZERO;
    for (s, (&c, &w)) in grid.centers().iter().zip(omega.values()).enumerate() {
        if Some(s) == own {
            continue;
        }
        let d = c - z;
        sum += w / (d * d);
    }
    -sum * grid.cell_area() / PI
}

/// Circular convolution with a translation-invariant lattice kernel on the
/// padded square, diagonalised by the 2-D FFT.
#[derive(Clone)]
struct LatticeConvolution {
    grid: Arc<DiskGrid>,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    multiplier: Vec<Complex64>,
}

impl LatticeConvolution {
    fn new(grid: &Arc<DiskGrid>, pad: usize, kernel: impl Fn(i64, i64) -> Complex64) -> Self {
        let size = pad * grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let half = (size / 2) as i64;
        let wrap = |k: usize| {
            let k = k as i64;
            if k >= half {
                k - size as i64
            } else {
                k
            }
        };
        // The Nyquist row and column are never reached by offsets between
        // cells; leaving them empty keeps the kernel support symmetric.
        let mut multiplier = vec![ZERO; size * size];
        for r in 0..size {
            for c in 0..size {
                let (di, dj) = (wrap(c), wrap(r));
                if di != -half && dj != -half {
                    multiplier[r * size + c] = kernel(di, dj);
                }
            }
        }
        let mut conv = Self {
            grid: Arc::clone(grid),
            size,
            forward,
            inverse,
            multiplier: Vec::new(),
        };
        conv.fft2(&mut multiplier, true);
        let scale = 1.0 / (size * size) as f64;
        multiplier.iter_mut().for_each(|m| *m *= scale);
        conv.multiplier = multiplier;
        conv
    }

    fn fft2(&self, data: &mut [Complex64], forward: bool) {
        let n = self.size;
        let plan = if forward { &self.forward } else { &self.inverse };
        let rows = |data: &mut [Complex64]| {
            data.par_chunks_mut(n).for_each(|row| plan.process(row));
        };
        rows(data);
        transpose(data, n);
        rows(data);
        transpose(data, n);
    }

    fn apply(&self, omega: &GridFunction) -> Result<GridFunction> {
        if omega.grid().n() != self.grid.n() {
            return Err(Error::GridMismatch(format!(
                "operator built for n = {}, field has n = {}",
                self.grid.n(),
                omega.grid().n()
            )));
        }
        let n = self.size;
        let mut buf = vec![ZERO; n * n];
        for (s, &v) in omega.values().iter().enumerate() {
            let (i, j) = self.grid.cell_indices(s);
            buf[j * n + i] = v;
        }
        self.fft2(&mut buf, true);
        buf.par_iter_mut()
            .zip(self.multiplier.par_iter())
            .for_each(|(b, m)| *b *= m);
        self.fft2(&mut buf, false);
        let values = (0..self.grid.len())
            .map(|s| {
                let (i, j) = self.grid.cell_indices(s);
                buf[j * n + i]
            })
            .collect();
        GridFunction::from_values(&self.grid, values)
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Precomputed fast Beurling transform for one grid.
#[derive(Clone)]
pub struct BeurlingOperator {
    conv: LatticeConvolution,
}

impl BeurlingOperator {
    pub fn new(grid: &Arc<DiskGrid>, cfg: &TransformConfig) -> Result<Self> {
        if cfg.pad_factor < 2 {
            return Err(Error::InvalidPadFactor(cfg.pad_factor));
        }
        // −(h²/π)/(h·d)² with d the integer offset; h cancels.
        let conv = LatticeConvolution::new(grid, cfg.pad_factor, |di, dj| {
            if di == 0 && dj == 0 {
                ZERO
            } else {
                let d = Complex64::new(di as f64, dj as f64);
                -1.0 / (PI * d * d)
            }
        });
        Ok(Self { conv })
    }

    pub fn grid(&self) -> &Arc<DiskGrid> {
        &self.conv.grid
    }

    /// Side of the padded FFT square.
    pub fn padded_size(&self) -> usize {
        self.conv.size
    }

    /// Fourier multiplier on the padded square, row-major with row = y
    /// frequency. Includes the `1/N²` inverse-FFT normalisation.
    pub fn multiplier(&self) -> Vec<Complex64> {
        let s = (self.conv.size * self.conv.size) as f64;
        self.conv.multiplier.iter().map(|m| m * s).collect()
    }

    /// `H[ω]` restricted to the masked cells.
    pub fn apply(&self, omega: &GridFunction) -> Result<GridFunction> {
        self.conv.apply(omega)
    }
}

/// Fast Cauchy transform sampled at the masked cell centres.
#[derive(Clone)]
pub struct CauchyOperator {
    conv: LatticeConvolution,
}

impl CauchyOperator {
    pub fn new(grid: &Arc<DiskGrid>, cfg: &TransformConfig) -> Result<Self> {
        if cfg.pad_factor < 2 {
            return Err(Error::InvalidPadFactor(cfg.pad_factor));
        }
        // Offset (di, dj) is target minus source, so c − z = −h·(di + i·dj).
        let h = grid.h();
        let conv = LatticeConvolution::new(grid, cfg.pad_factor, |di, dj| {
            if di == 0 && dj == 0 {
                ZERO
            } else {
                h / (PI * Complex64::new(di as f64, dj as f64))
            }
        });
        Ok(Self { conv })
    }

    pub fn apply(&self, omega: &GridFunction) -> Result<GridFunction> {
        self.conv.apply(omega)
    }
}

/// `H[ω]` on the masked cells, by the configured method.
pub fn beurling_transform(omega: &GridFunction, cfg: &TransformConfig) -> Result<GridFunction> {
    if cfg.pad_factor < 2 {
        return Err(Error::InvalidPadFactor(cfg.pad_factor));
    }
    match cfg.method {
        Method::Fast => BeurlingOperator::new(omega.grid(), cfg)?.apply(omega),
        Method::DirectOracle => {
            let values = omega
                .grid()
                .centers()
                .par_iter()
                .map(|&z| beurling_at(omega, z))
                .collect();
            GridFunction::from_values(omega.grid(), values)
        }
    }
}

/// `T[ω]` on the masked cell centres, by the configured method.
pub fn cauchy_transform_grid(omega: &GridFunction, cfg: &TransformConfig) -> Result<GridFunction> {
    if cfg.pad_factor < 2 {
        return Err(Error::InvalidPadFactor(cfg.pad_factor));
    }
    match cfg.method {
        Method::Fast => CauchyOperator::new(omega.grid(), cfg)?.apply(omega),
        Method::DirectOracle => {
            let values = cauchy_transform_field(omega, omega.grid().centers());
            GridFunction::from_values(omega.grid(), values)
        }
    }
}

/// Bound on `‖H‖_q`: exactly 1 for `q = 2`; for `q > 2` the caller must
/// supply `A_q`.
pub fn operator_norm_bound(q: f64, configured: Option<f64>) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(Error::InvalidExponent { q, min: 2.0 });
    }
    if q == 2.0 {
        return Ok(1.0);
    }
    match configured {
        Some(a) if a.is_finite() && a > 0.0 => Ok(a),
        Some(a) => Err(Error::invalid(format!("A_q must be positive and finite (got {a})"))),
        None => Err(Error::OperatorNormNotConfigured(q)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Exponent};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn smooth_field(grid: &Arc<DiskGrid>, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, Complex64)> = (0..5)
            .map(|_| {
                (
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let f = GridFunction::from_fn(grid, |z| {
            modes
                .iter()
                .map(|&(a, b, amp)| amp * Complex64::from_polar(1.0, a * z.re + b * z.im))
                .sum()
        });
        let s = f.sup_norm();
        &f * (1.0 / s)
    }

    /// Exact cell integral by brute-force fine midpoint rule.
    fn cell_integral_brute(c0: Complex64, h: f64, z: Complex64, m: usize) -> Complex64 {
        let dh = h / m as f64;
        let mut s = ZERO;
        for a in 0..m {
            for b in 0..m {
                let p = c0
                    + c(
                        -0.5 * h + (a as f64 + 0.5) * dh,
                        -0.5 * h + (b as f64 + 0.5) * dh,
                    );
                s += 1.0 / (p - z);
            }
        }
        s * dh * dh
    }

    #[test]
    fn cell_integral_closed_form() {
        let h = 0.1;
        let c0 = c(0.2, -0.3);
        assert_eq!(cell_cauchy_integral(c0, h, c0), ZERO);
        for z in [c(0.5, 0.1), c(0.23, -0.31), c(0.2, -0.25), c(0.16, -0.34)] {
            let exact = cell_cauchy_integral(c0, h, z);
            let brute = cell_integral_brute(c0, h, z, 1000);
            assert!((exact - brute).norm() < 2e-4, "{z}: {exact} vs {brute}");
        }
        // far away the cell looks like a point mass
        let z = c(3.0, 1.0);
        let far = cell_cauchy_integral(c0, h, z);
        assert!((far - h * h / (c0 - z)).norm() < 1e-6);
    }

    #[test]
    fn cauchy_of_indicator() {
        let g = build_grid(256).unwrap();
        let one = GridFunction::constant(&g, c(1.0, 0.0));
        assert!((cauchy_transform(&one, c(0.3, 0.0)) - 0.3).norm() < 5e-3);
        assert!((cauchy_transform(&one, c(2.0, 0.0)) - 0.5).norm() < 5e-3);
        assert!((cauchy_transform(&one, c(1.0, 0.0)) - 1.0).norm() < 5e-3);
        let z = c(0.2, 0.4);
        assert!((cauchy_transform(&one, z) - z.conj()).norm() < 5e-3);
        let zero = GridFunction::zeros(&g);
        assert_eq!(cauchy_transform(&zero, c(0.3, 0.1)), ZERO);
    }

    #[test]
    fn cauchy_field_matches_pointwise() {
        let g = build_grid(32).unwrap();
        let w = smooth_field(&g, 3);
        let pts = [c(0.3, 0.0), c(2.0, 0.0), c(-0.1, 0.77)];
        let batch = cauchy_transform_field(&w, &pts);
        for (z, v) in pts.iter().zip(&batch) {
            assert_eq!(*v, cauchy_transform(&w, *z));
        }
        assert!(cauchy_transform_field(&w, &[]).is_empty());
    }

    #[test]
    fn beurling_of_indicator() {
        let g = build_grid(256).unwrap();
        let one = GridFunction::constant(&g, c(1.0, 0.0));
        let h = beurling_transform(&one, &TransformConfig::default()).unwrap();
        let inner = g
            .centers()
            .iter()
            .zip(h.values())
            .filter(|(z, _)| z.norm() <= 0.9)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        assert!(inner <= 5e-3, "{inner}");
        assert!((beurling_at(&one, c(2.0, 0.0)) + 0.25).norm() < 5e-3);
        let zero = GridFunction::zeros(&g);
        let hz = beurling_transform(&zero, &TransformConfig::default()).unwrap();
        assert_eq!(hz.sup_norm(), 0.0);
    }

    #[test]
    fn fast_matches_direct_oracle() {
        let g = build_grid(128).unwrap();
        let w = smooth_field(&g, 11);
        let fast = beurling_transform(&w, &TransformConfig::default()).unwrap();
        let direct = beurling_transform(&w, &TransformConfig::direct()).unwrap();
        let diff = (&fast - &direct).sup_norm();
        assert!(diff < 2e-2, "{diff}");
        assert!(diff < 1e-10, "lattice kernel should be exact: {diff}");

        let tf = cauchy_transform_grid(&w, &TransformConfig::default()).unwrap();
        let td = cauchy_transform_grid(&w, &TransformConfig::direct()).unwrap();
        assert!((&tf - &td).sup_norm() < 1e-10);
    }

    #[test]
    fn pad_factor_is_validated() {
        let g = build_grid(16).unwrap();
        assert!(matches!(
            TransformConfig::new(1, Method::Fast),
            Err(Error::InvalidPadFactor(1))
        ));
        assert!(BeurlingOperator::new(&g, &TransformConfig::new(3, Method::Fast).unwrap()).is_ok());
    }

    #[test]
    fn larger_padding_changes_nothing() {
        let g = build_grid(32).unwrap();
        let w = smooth_field(&g, 5);
        let a = beurling_transform(&w, &TransformConfig::default()).unwrap();
        let b = beurling_transform(&w, &TransformConfig::new(3, Method::Fast).unwrap()).unwrap();
        assert!((&a - &b).sup_norm() < 1e-12);
    }

    #[test]
    fn multiplier_tends_to_unimodular_symbol() {
        let g = build_grid(64).unwrap();
        let op = BeurlingOperator::new(&g, &TransformConfig::default()).unwrap();
        let m = op.multiplier();
        let size = op.padded_size();
        assert_abs_diff_eq!(m[0].norm(), 0.0, epsilon = 1e-12);
        // Low-to-mid frequencies: m(ξ) ≈ s·conj(ξ)/ξ for one global sign s.
        let mut sign = None;
        for (kx, ky) in [(3usize, 0usize), (0, 5), (4, 4), (7, 2), (2, 9)] {
            let xi = Complex64::new(kx as f64, ky as f64);
            let symbol = xi.conj() / xi;
            let v = m[ky * size + kx];
            let s = (v / symbol).re.signum();
            assert_eq!(*sign.get_or_insert(s), s);
            assert!((v - s * symbol).norm() < 0.1, "({kx},{ky}): {v} vs {symbol}");
        }
    }

    #[test]
    fn l2_isometry_sanity() {
        let g = build_grid(256).unwrap();
        let op = BeurlingOperator::new(&g, &TransformConfig::default()).unwrap();
        for seed in 0..3 {
            let w = smooth_field(&g, seed);
            let hw = op.apply(&w).unwrap();
            let ratio = hw.norm(Exponent::Finite(2.0)) / w.norm(Exponent::Finite(2.0));
            assert!(ratio <= 1.05, "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn dbar_and_d_of_cauchy_transform() {
        // ω(ζ) = (1 − |ζ|²)³ is C² with zero boundary values.
        let g = build_grid(128).unwrap();
        let w = GridFunction::from_fn(&g, |z| c((1.0 - z.norm_sqr()).powi(3), 0.0));
        let op = BeurlingOperator::new(&g, &TransformConfig::default()).unwrap();
        let hw = op.apply(&w).unwrap();
        let step = g.h();
        for &z in &[c(0.0, 0.0), c(0.3, -0.2), c(-0.45, 0.1)] {
            let z = g.centers()[g.masked_cell_containing(z).unwrap()];
            let t = |u: Complex64| cauchy_transform(&w, u);
            let dx = (t(z + step) - t(z - step)) / (2.0 * step);
            let dy = (t(z + c(0.0, step)) - t(z - c(0.0, step))) / (2.0 * step);
            let dbar = 0.5 * (dx + c(0.0, 1.0) * dy);
            let d = 0.5 * (dx - c(0.0, 1.0) * dy);
            assert!((dbar - w.eval(z)).norm() < 3e-2, "∂̄T at {z}: {dbar}");
            let hz = hw.eval(z);
            assert!((d - hz).norm() < 3e-2, "∂T at {z}: {d} vs {hz}");
        }
    }

    #[test]
    fn operator_norm_configuration() {
        assert_eq!(operator_norm_bound(2.0, None).unwrap(), 1.0);
        assert_eq!(operator_norm_bound(3.0, Some(2.0)).unwrap(), 2.0);
        assert!(matches!(
            operator_norm_bound(3.0, None),
            Err(Error::OperatorNormNotConfigured(_))
        ));
        assert!(operator_norm_bound(1.5, Some(1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn transforms_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s1 in 0u64..100, s2 in 0u64..100) {
            let g = build_grid(16).unwrap();
            let f = smooth_field(&g, s1);
            let h = smooth_field(&g, s2);
            let combo = &(&f * a) + &(&h * b);
            let cfg = TransformConfig::default();
            let lhs = beurling_transform(&combo, &cfg).unwrap();
            let rhs = &(&beurling_transform(&f, &cfg).unwrap() * a) + &(&beurling_transform(&h, &cfg).unwrap() * b);
            prop_assert!((&lhs - &rhs).sup_norm() < 1e-12);
            let z = Complex64::new(0.37, -0.21);
            let tl = cauchy_transform(&combo, z);
            let tr = a * cauchy_transform(&f, z) + b * cauchy_transform(&h, z);
            prop_assert!((tl - tr).norm() < 1e-12);
        }
    }
}
