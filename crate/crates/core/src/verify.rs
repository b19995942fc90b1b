//! Quick self-check suite behind `qcx verify-all`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::coeffs::{coeff_bound, coeff_first_order, coeff_from_map, extremal_dilatation_for_coeff, series_factor};
use crate::distortion::{
    chichra_sum, distortion_bound_qc, distortion_check, extremal_distortion_map, krzyz_test,
    pole_condition_test, sample_points, BoundReport, CLOSED_FORM_TOL,
};
use crate::error::Result;
use crate::grid::{build_grid, Exponent, GridFunction};
use crate::neumann::{cpq_constant, solve_beltrami, DilatationField, PoleParam, SolverOptions};
use crate::reconstruct::ReconstructedMap;
use crate::transforms::{beurling_transform, cauchy_transform, TransformConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn error_report(name: &str, error: f64, tol: f64) -> BoundReport {
    BoundReport::new(name, error, tol, 0.0, ZERO)
}

/// Run every quick check on an `n × n` grid.
pub fn verify_all(grid_n: usize) -> Result<Vec<BoundReport>> {
    let grid = build_grid(grid_n)?;
    let h = grid.h();
    let mut out = Vec::new();

    let one = GridFunction::constant(&grid, Complex64::new(1.0, 0.0));
    let mut cauchy_err: f64 = 0.0;
    for z in [Complex64::new(0.3, 0.2), Complex64::new(-0.5, 0.1), Complex64::new(2.0, 0.0), Complex64::new(0.0, -1.5)] {
        let exact = if z.norm() < 1.0 { z.conj() } else { 1.0 / z };
        cauchy_err = cauchy_err.max((cauchy_transform(&one, z) - exact).norm());
    }
    out.push(error_report("cauchy_indicator", cauchy_err, 4.0 * h));

    let beurling = beurling_transform(&one, &TransformConfig::default())?;
    let inner = beurling
        .values()
        .iter()
        .zip(grid.centers())
        .filter(|(_, c)| c.norm() <= 0.9)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max);
    out.push(error_report("beurling_indicator", inner, 0.8 * h));

    let p = PoleParam::new(0.4)?;
    let closed = cpq_constant(p, 2.0)?;
    let oracle = (PI * (3.0 - 0.4) / (3.0 * 0.6f64.powi(3))).sqrt();
    out.push(error_report("cpq_closed_form", (closed / oracle - 1.0).abs(), 1e-12));

    let k = 0.2;
    let mu = DilatationField::constant(&grid, Complex64::new(k, 0.0))?;
    let sol = solve_beltrami(&mu, PoleParam::zero(), &SolverOptions::default())?;
    let map = ReconstructedMap::new(&sol);
    let f_err = (map.f(Complex64::new(0.5, 0.0))? - 2.1).norm();
    out.push(error_report("constant_mu_reconstruction", f_err, 8.0 * h));
    let phi2 = sol.terms.get(1).map_or(0.0, |t| t.norm(Exponent::Finite(2.0)));
    out.push(error_report("constant_mu_second_term", phi2, 0.1));
    let coeffs = coeff_from_map(&map, 2.0, 3)?;
    out.push(error_report("constant_mu_b1", (coeffs.get(1) - k).norm(), 4.0 * h));

    for n in 1..=3 {
        for pv in [0.0, 0.3] {
            let p = PoleParam::new(pv)?;
            let mu = extremal_dilatation_for_coeff(&grid, n, p, k)?;
            let got = coeff_first_order(&mu, p, n)?.norm();
            let want = 2.0 * k * series_factor(n, p)?;
            out.push(error_report(&format!("coeff_extremal[n={n},p={pv}]"), (got - want).abs(), 4.0 * h));
        }
    }
    out.push(error_report(
        "coeff_bound_reduction",
        (coeff_bound(1, PoleParam::zero(), 0.2)? - 0.25).abs(),
        1e-15,
    ));

    let mut distortion_err: f64 = 0.0;
    for (r, pv) in [(0.3, 0.0), (0.5, 0.2), (0.7, 0.5)] {
        let p = PoleParam::new(pv)?;
        let z0 = Complex64::from_polar(r, 1.0);
        let m = extremal_distortion_map(z0, p, ZERO)?;
        let rep = distortion_check(m.derivative(z0)?, z0, p, CLOSED_FORM_TOL)?;
        distortion_err = distortion_err.max(rep.margin.abs());
        let chi = chichra_sum(&m.laurent(200));
        distortion_err = distortion_err.max(chi.margin.abs());
    }
    out.push(error_report("distortion_equality", distortion_err, 1e-9));

    let samples = sample_points(25, 0.9, 7);
    let kz = 0.3;
    let krzyz = krzyz_test(|z| -1.0 / (z * z) + kz, kz, &samples, CLOSED_FORM_TOL)?;
    out.push(krzyz.report);
    let p = PoleParam::new(0.2)?;
    let shifted: Vec<Complex64> = samples.iter().map(|z| z * 0.9 + 0.05).collect();
    let eps = 0.5 / 1.44 * 0.99;
    let pole = pole_condition_test(|z| -1.0 / ((z - 0.2) * (z - 0.2)) + eps, 0.5, p, &shifted, CLOSED_FORM_TOL)?;
    out.push(pole.report);

    let p = PoleParam::new(0.3)?;
    let mu = DilatationField::smooth_random(&grid, k, 11)?;
    let sol = solve_beltrami(&mu, p, &SolverOptions::default())?;
    let map = ReconstructedMap::new(&sol);
    let mut worst: Option<BoundReport> = None;
    for z in sample_points(25, 0.7, 3) {
        if z.norm() < 1e-9 {
            continue;
        }
        let lhs = (map.f_derivative(z)? + 1.0 / ((z - 0.3) * (z - 0.3))).norm();
        let rep = BoundReport::with_slack("qc_distortion", lhs, distortion_bound_qc(z, p, k)?, 0.0, 1e-2, z);
        if worst.as_ref().is_none_or(|w| rep.margin < w.margin) {
            worst = Some(rep);
        }
    }
    out.extend(worst);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes_on_a_small_grid() {
        let reports = verify_all(64).unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
        assert!(reports.len() > 10);
    }
}
