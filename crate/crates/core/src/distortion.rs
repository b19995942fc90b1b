//! Distortion inequalities, classical bounds, sufficient conditions for a
//! quasiconformal extension, the area-theorem sum, and closed-form maps that
//! attain equality.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeffs::{LaurentCoefficients, LaurentSource};
use crate::error::{Error, Result};
use crate::neumann::{check_k, PoleParam};

/// Equality tolerance for checks on closed-form data.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Equality tolerance for checks on quadrature-derived data.
pub const QUADRATURE_TOL: f64 = 1e-3;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Witness {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// One inequality `lhs ≤ rhs`, evaluated at `witness`.
///
/// `pass` allows `lhs` to exceed `rhs` by `tolerance + slack`; `equality`
/// means `|rhs − lhs| ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub equality: bool,
    pub witness: Witness,
    pub tolerance: f64,
    pub slack: f64,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64, witness: Complex64) -> Self {
        Self::with_slack(name, lhs, rhs, tolerance, 0.0, witness)
    }

    pub fn with_slack(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        slack: f64,
        witness: Complex64,
    ) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            equality: margin.abs() <= tolerance,
            witness: witness.into(),
            tolerance,
            slack,
            pass: margin >= -(tolerance + slack),
        }
    }
}

/// Per-point values of a sampled condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub z: Witness,
    pub lhs: f64,
    pub rhs: f64,
}

/// A pointwise condition checked on a finite sample set. The report carries
/// the sample with the smallest margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCheck {
    pub report: BoundReport,
    pub samples: Vec<Sample>,
}

impl SampledCheck {
    fn from_samples(name: &str, tolerance: f64, samples: Vec<(Complex64, f64, f64)>) -> Self {
        let (z, lhs, rhs) = samples
            .iter()
            .copied()
            .min_by(|a, b| (a.2 - a.1).total_cmp(&(b.2 - b.1)))
            .expect("nonempty");
        let mut report = BoundReport::new(format!("{name}[{} samples]", samples.len()), lhs, rhs, tolerance, z);
        report.equality = samples.iter().all(|s| (s.2 - s.1).abs() <= tolerance);
        Self {
            report,
            samples: samples
                .into_iter()
                .map(|(z, lhs, rhs)| Sample { z: z.into(), lhs, rhs })
                .collect(),
        }
    }

    pub fn pass(&self) -> bool {
        self.report.pass
    }

    /// Margins `rhs − lhs` in sample order.
    pub fn margins(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rhs - s.lhs).collect()
    }
}

fn check_inside(z: Complex64) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("point {z} must lie in the open unit disk")))
    }
}

/// `|f′(z) + 1/(z−p)²| ≤ 1/((1−p²)(1−|z|²))`.
pub fn distortion_check(fprime: Complex64, z: Complex64, p: PoleParam, tolerance: f64) -> Result<BoundReport> {
    check_inside(z)?;
    let d = z - p.get();
    if d.norm() == 0.0 {
        return Err(Error::Pole(z));
    }
    let lhs = (fprime + ONE / (d * d)).norm();
    let rhs = 1.0 / ((1.0 - p.get().powi(2)) * (1.0 - z.norm_sqr()));
    Ok(BoundReport::new("distortion", lhs, rhs, tolerance, z))
}

/// `k/((1−p²)(1−|z|²))`, the bound on `|f′(z) + 1/(z−p)²|` for maps with a
/// `k`-quasiconformal extension.
pub fn distortion_bound_qc(z: Complex64, p: PoleParam, k: f64) -> Result<f64> {
    check_inside(z)?;
    check_k(k)?;
    Ok(k / ((1.0 - p.get().powi(2)) * (1.0 - z.norm_sqr())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalBound {
    /// `|z² f′(z)| ≤ 1/(1−|z|²)`.
    Loewner,
    /// `|z² f′(z) + 1| ≤ |z|²/(1−|z|²)`.
    Sugawa,
    /// `|z² f′(z) + 1| ≤ k|z|²/(1−|z|²)`.
    SigmaK,
}

pub fn classical_bound(z: Complex64, kind: ClassicalBound, k: Option<f64>) -> Result<f64> {
    check_inside(z)?;
    let r2 = z.norm_sqr();
    match kind {
        ClassicalBound::Loewner => Ok(1.0 / (1.0 - r2)),
        ClassicalBound::Sugawa => Ok(r2 / (1.0 - r2)),
        ClassicalBound::SigmaK => {
            let k = k.ok_or_else(|| Error::invalid("the sigma_k bound needs k"))?;
            Ok(check_k(k)? * r2 / (1.0 - r2))
        }
    }
}

fn check_samples(samples: &[Complex64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }
    samples.iter().try_for_each(|&z| check_inside(z))
}

/// `|z² f′(z) + 1| ≤ k|z|²` on every sample.
pub fn krzyz_test(
    fprime: impl Fn(Complex64) -> Complex64,
    k: f64,
    samples: &[Complex64],
    tolerance: f64,
) -> Result<SampledCheck> {
    check_k(k)?;
    check_samples(samples)?;
    let rows = samples
        .iter()
        .map(|&z| {
            let lhs = (z * z * fprime(z) + 1.0).norm();
            (z, lhs, k * z.norm_sqr())
        })
        .collect();
    Ok(SampledCheck::from_samples("krzyz", tolerance, rows))
}

/// `|(z−p)² f′(z) + 1| ≤ k|z−p|²/(1+p)²` on every sample.
pub fn pole_condition_test(
    fprime: impl Fn(Complex64) -> Complex64,
    k: f64,
    p: PoleParam,
    samples: &[Complex64],
    tolerance: f64,
) -> Result<SampledCheck> {
    check_k(k)?;
    check_samples(samples)?;
    let pv = p.get();
    let scale = k / (1.0 + pv).powi(2);
    let rows = samples
        .iter()
        .map(|&z| {
            let d = z - pv;
            if d.norm() == 0.0 {
                return Err(Error::Pole(z));
            }
            let lhs = (d * d * fprime(z) + 1.0).norm();
            Ok((z, lhs, scale * d.norm_sqr()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledCheck::from_samples("pole_condition", tolerance, rows))
}

/// `Σ n|bₙ|² ≤ 1/(1−p²)²` over the stored coefficients.
pub fn chichra_sum(coeffs: &LaurentCoefficients) -> BoundReport {
    chichra_sum_with_tolerance(coeffs, CLOSED_FORM_TOL)
}

pub fn chichra_sum_with_tolerance(coeffs: &LaurentCoefficients, tolerance: f64) -> BoundReport {
    let lhs: f64 = coeffs
        .b
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, b)| n as f64 * b.norm_sqr())
        .sum();
    let rhs = 1.0 / (1.0 - coeffs.p.get().powi(2)).powi(2);
    BoundReport::new(
        format!("chichra_area[n<={}]", coeffs.n_max()),
        lhs,
        rhs,
        tolerance,
        Complex64::new(0.0, 0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    /// `1/(z−p) + b₀ + a z̄₀z/(1−z̄₀z)`, equality in the distortion bound at `z₀`.
    ExtremalDistortion { z0: Complex64 },
    /// The `p = 0` member of the same family.
    SigmaExtremal { z0: Complex64 },
    /// `1/(z−p) + b₀ + a z^degree`.
    Monomial { degree: u32 },
}

/// A map `1/(z−p) + b₀ + …` known in closed form, with exact derivative and
/// Laurent data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormMap {
    pub kind: ClosedFormKind,
    pub p: PoleParam,
    pub b0: Complex64,
    pub a: Complex64,
}

/// Equality map of the distortion bound at `z0`, with
/// `a = −[(ζ₀ − 1/ζ̄₀)/(1−p²)]·[(1−pζ̄₀)/(1−pζ₀)]` and `ζ₀ = 1/z₀`.
pub fn extremal_distortion_map(z0: Complex64, p: PoleParam, b0: Complex64) -> Result<ClosedFormMap> {
    if z0.norm() == 0.0 {
        return Err(Error::invalid("z0 = 0 has no reciprocal"));
    }
    check_inside(z0)?;
    let pv = p.get();
    if z0 == Complex64::new(pv, 0.0) {
        return Err(Error::Pole(z0));
    }
    let zeta0 = ONE / z0;
    let a = -((zeta0 - ONE / zeta0.conj()) / (1.0 - pv * pv)) * ((1.0 - pv * zeta0.conj()) / (1.0 - pv * zeta0));
    let kind = if pv == 0.0 {
        ClosedFormKind::SigmaExtremal { z0 }
    } else {
        ClosedFormKind::ExtremalDistortion { z0 }
    };
    Ok(ClosedFormMap { kind, p, b0, a })
}

/// `1/z + b₀ − (1/z₀ − z̄₀) z̄₀z/(1−z̄₀z)`.
pub fn sigma_extremal_map(z0: Complex64, b0: Complex64) -> Result<ClosedFormMap> {
    extremal_distortion_map(z0, PoleParam::zero(), b0)
}

impl ClosedFormMap {
    pub fn monomial(p: PoleParam, b0: Complex64, a: Complex64, degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("monomial degree must be at least 1"));
        }
        Ok(Self {
            kind: ClosedFormKind::Monomial { degree },
            p,
            b0,
            a,
        })
    }

    fn z0(&self) -> Option<Complex64> {
        match self.kind {
            ClosedFormKind::ExtremalDistortion { z0 } | ClosedFormKind::SigmaExtremal { z0 } => Some(z0),
            ClosedFormKind::Monomial { .. } => None,
        }
    }

    fn check(&self, z: Complex64) -> Result<Complex64> {
        let d = z - self.p.get();
        if d.norm() == 0.0 {
            return Err(Error::Pole(z));
        }
        if let Some(z0) = self.z0() {
            if (1.0 - z0.conj() * z).norm() == 0.0 {
                return Err(Error::Pole(z));
            }
        }
        Ok(d)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let d = self.check(z)?;
        let tail = match self.kind {
            ClosedFormKind::Monomial { degree } => self.a * z.powu(degree),
            _ => {
                let c = self.z0().expect("extremal").conj();
                self.a * c * z / (1.0 - c * z)
            }
        };
        Ok(ONE / d + self.b0 + tail)
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let d = self.check(z)?;
        let tail = match self.kind {
            ClosedFormKind::Monomial { degree } => self.a * degree as f64 * z.powu(degree - 1),
            _ => {
                let c = self.z0().expect("extremal").conj();
                let e = 1.0 - c * z;
                self.a * c / (e * e)
            }
        };
        Ok(-ONE / (d * d) + tail)
    }

    /// Exact `b₀..b_{n_max}`.
    pub fn laurent(&self, n_max: usize) -> LaurentCoefficients {
        let b = (0..=n_max)
            .map(|n| match (n, self.kind) {
                (0, _) => self.b0,
                (n, ClosedFormKind::Monomial { degree }) => {
                    if n == degree as usize {
                        self.a
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }
                (n, _) => self.a * self.z0().expect("extremal").conj().powu(n as u32),
            })
            .collect();
        LaurentCoefficients { p: self.p, k: 0.0, b }
    }
}

impl LaurentSource for ClosedFormMap {
    fn pole(&self) -> PoleParam {
        self.p
    }

    fn dilatation_bound(&self) -> f64 {
        0.0
    }

    fn remainder(&self, w: Complex64) -> Complex64 {
        match self.kind {
            ClosedFormKind::Monomial { degree } => self.b0 + self.a * w.powi(-(degree as i32)),
            _ => {
                let c = self.z0().expect("extremal").conj();
                self.b0 + self.a * c / (w - c)
            }
        }
    }
}

/// `(g(z+h) − g(z−h))/(2h)` along the real direction.
pub fn centered_derivative(
    g: impl Fn(Complex64) -> Result<Complex64>,
    z: Complex64,
    step: f64,
) -> Result<Complex64> {
    Ok((g(z + step)? - g(z - step)?) / (2.0 * step))
}

/// `count` points uniformly distributed (by area) in `|z| ≤ max_radius`.
pub fn sample_points(count: usize, max_radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = max_radius * rng.random::<f64>().sqrt();
            Complex64::from_polar(r, rng.random_range(0.0..2.0 * PI))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::coeff_from_map;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pole(p: f64) -> PoleParam {
        PoleParam::new(p).unwrap()
    }

    #[test]
    fn distortion_examples() {
        let r = distortion_check(c(-4.0, 0.0), c(0.0, 0.0), pole(0.5), CLOSED_FORM_TOL).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_relative_eq!(r.rhs, 1.0 / 0.75);
        assert!(r.pass && !r.equality);
        let z = c(0.3, 0.4);
        let r0 = distortion_check(c(1.0, 0.0), z, pole(0.0), CLOSED_FORM_TOL).unwrap();
        assert_relative_eq!(r0.rhs, classical_bound(z, ClassicalBound::Loewner, None).unwrap());
        assert!(distortion_check(ONE, c(1.0, 0.0), pole(0.0), 1e-9).is_err());
        assert!(matches!(
            distortion_check(ONE, c(0.5, 0.0), pole(0.5), 1e-9),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn qc_and_classical_values() {
        assert_relative_eq!(distortion_bound_qc(c(0.0, 0.0), pole(0.0), 0.3).unwrap(), 0.3);
        assert_eq!(distortion_bound_qc(c(0.2, 0.1), pole(0.4), 0.0).unwrap(), 0.0);
        assert_relative_eq!(distortion_bound_qc(c(0.5, 0.0), pole(0.5), 0.3).unwrap(), 0.3 * 1.7777777777777777);
        let z = c(0.3, -0.4);
        assert_relative_eq!(classical_bound(z, ClassicalBound::Loewner, None).unwrap(), 1.0 / 0.75);
        assert_relative_eq!(classical_bound(z, ClassicalBound::Sugawa, None).unwrap(), 0.25 / 0.75);
        assert_eq!(classical_bound(c(0.0, 0.0), ClassicalBound::SigmaK, Some(0.4)).unwrap(), 0.0);
        assert!(classical_bound(z, ClassicalBound::SigmaK, None).is_err());
    }

    #[test]
    fn krzyz_examples() {
        let k = 0.3;
        let pts = sample_points(40, 0.99, 9);
        let eq = krzyz_test(|z| -1.0 / (z * z) + k, k, &pts, CLOSED_FORM_TOL).unwrap();
        assert!(eq.pass() && eq.report.equality);
        assert!(eq.margins().iter().all(|m| m.abs() < 1e-12));
        let twice = krzyz_test(|z| -1.0 / (z * z) + 2.0 * k, k, &pts, CLOSED_FORM_TOL).unwrap();
        assert!(!twice.pass());
        let plain = krzyz_test(|z| -1.0 / (z * z), k, &pts, CLOSED_FORM_TOL).unwrap();
        assert!(plain.pass());
        for (s, m) in plain.samples.iter().zip(plain.margins()) {
            assert!((m - k * (s.z.re.powi(2) + s.z.im.powi(2))).abs() < 1e-12);
        }
        assert!(krzyz_test(|z| z, k, &[], CLOSED_FORM_TOL).is_err());
    }

    #[test]
    fn pole_condition_threshold() {
        let (p, k) = (pole(0.2), 0.5);
        let threshold = k / 1.44;
        assert_relative_eq!(threshold, 0.3472222222222222);
        let pts = sample_points(30, 0.95, 4);
        let run = |eps: f64| {
            pole_condition_test(move |z| -1.0 / ((z - 0.2) * (z - 0.2)) + eps, k, p, &pts, CLOSED_FORM_TOL)
                .unwrap()
        };
        assert!(run(0.1).pass());
        assert!(!run(0.4).pass());
        let zero = run(0.0);
        assert!(zero.pass() && zero.report.lhs < 1e-12);
        assert!(pole_condition_test(|z| z, k, p, &[c(0.2, 0.0)], CLOSED_FORM_TOL).is_err());
    }

    #[test]
    fn extremal_map_attains_equality() {
        let p = pole(0.3);
        let z0 = c(0.5, 0.0);
        let f = extremal_distortion_map(z0, p, c(0.0, 0.0)).unwrap();
        let r = distortion_check(f.derivative(z0).unwrap(), z0, p, CLOSED_FORM_TOL).unwrap();
        assert!(r.equality && r.pass, "{r:?}");
        // |a| = (R − 1/R)/(1 − p²)
        let big_r = 2.0;
        assert_relative_eq!(f.a.norm(), (big_r - 1.0 / big_r) / (1.0 - 0.09), max_relative = 1e-14);
        assert!(extremal_distortion_map(c(0.0, 0.0), p, ONE).is_err());
        assert!(extremal_distortion_map(c(0.3, 0.0), p, ONE).is_err());
    }

    #[test]
    fn p_zero_is_the_sigma_family() {
        let z0 = c(0.3, 0.4);
        let b0 = c(0.1, 0.2);
        let f = extremal_distortion_map(z0, pole(0.0), b0).unwrap();
        assert!(matches!(f.kind, ClosedFormKind::SigmaExtremal { .. }));
        for z in [c(0.1, 0.2), c(-0.5, 0.3)] {
            let direct = 1.0 / z + b0 - (1.0 / z0 - z0.conj()) * z0.conj() * z / (1.0 - z0.conj() * z);
            assert!((f.eval(z).unwrap() - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_differences() {
        let f = extremal_distortion_map(c(0.4, 0.5), pole(0.5), c(0.3, 0.0)).unwrap();
        let m = ClosedFormMap::monomial(pole(0.2), c(0.0, 0.0), c(0.1, 0.1), 3).unwrap();
        for z in [c(0.1, 0.1), c(-0.3, 0.6), c(0.7, -0.2)] {
            for map in [&f, &m] {
                let fd = centered_derivative(|u| map.eval(u), z, 1e-5).unwrap();
                let an = map.derivative(z).unwrap();
                assert!((fd - an).norm() < 1e-6 * an.norm(), "{z}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn laurent_data_and_chichra() {
        let z0 = c(0.35, 0.35);
        let p = pole(0.5);
        let f = extremal_distortion_map(z0, p, c(0.2, 0.0)).unwrap();
        let exact = f.laurent(12);
        let extracted = coeff_from_map(&f, 2.0, 12).unwrap();
        for n in 0..=12 {
            assert!((exact.get(n) - extracted.get(n)).norm() < 1e-10 * (1.0 + exact.get(n).norm()) * 4f64.powi(n as i32));
            if n >= 1 {
                assert!((exact.get(n) - f.a * z0.conj().powu(n as u32)).norm() < 1e-15);
            }
        }
        let n_max = 200;
        let r = chichra_sum(&f.laurent(n_max));
        assert!(r.equality && r.pass, "{r:?}");
        assert_relative_eq!(r.rhs, 1.0 / 0.5625);

        let zero = LaurentCoefficients { p, k: 0.0, b: vec![c(0.0, 0.0); 5] };
        let z = chichra_sum(&zero);
        assert_eq!(z.lhs, 0.0);
        assert!(z.pass);
        let big = ClosedFormMap::monomial(p, c(0.0, 0.0), c(1.5 / 0.75, 0.0), 1).unwrap();
        assert!(!chichra_sum(&big.laurent(4)).pass);
    }

    #[test]
    fn sample_points_are_deterministic() {
        let a = sample_points(25, 0.7, 3);
        assert_eq!(a, sample_points(25, 0.7, 3));
        assert!(a.iter().all(|z| z.norm() <= 0.7));
    }

    #[test]
    fn report_serialization() {
        let r = BoundReport::new("x", 0.5, 1.0, 1e-9, c(0.1, -0.2));
        let text = serde_json::to_string(&r).unwrap();
        let order: Vec<usize> = ["name", "lhs", "rhs", "margin", "equality", "witness", "tolerance", "slack", "pass"]
            .iter()
            .map(|k| text.find(&format!("\"{k}\":")).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.contains(r#""witness":{"re":0.1,"im":-0.2}"#));
    }

    proptest! {
        #[test]
        fn reduction_to_sigma_k(re in -0.7f64..0.7, im in -0.7f64..0.7, k in 0.0f64..0.99) {
            let z = Complex64::new(re, im);
            prop_assume!(z.norm() > 1e-3);
            let lhs = distortion_bound_qc(z, PoleParam::zero(), k).unwrap() * z.norm_sqr();
            let rhs = classical_bound(z, ClassicalBound::SigmaK, Some(k)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs));
        }

        #[test]
        fn extremal_equality_everywhere(r in 0.05f64..0.95, t in 0.0f64..6.0, p in 0.0f64..0.9) {
            let z0 = Complex64::from_polar(r, t);
            prop_assume!((z0 - p).norm() > 1e-3);
            let f = extremal_distortion_map(z0, PoleParam::new(p).unwrap(), ONE).unwrap();
            let rep = distortion_check(f.derivative(z0).unwrap(), z0, PoleParam::new(p).unwrap(), 1e-9 * (1.0 / (1.0 - r * r)).max(1.0)).unwrap();
            prop_assert!(rep.equality);
        }
    }
}
