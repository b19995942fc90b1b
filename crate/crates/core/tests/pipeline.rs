use num_complex::Complex64;
use qcx::distortion::chichra_sum;
use qcx::job::{emit_report, ReportFormat};
use qcx::{coeff_from_map, parse_config, run_job, Error, LaurentCoefficients, ReconstructedMap};

#[test]
fn identical_configs_give_identical_reports() {
    let text = r#"{"p":0.25,"k":0.15,"mu_spec":{"random":{"seed":9}},"grid_n":48,"n_max":5}"#;
    let first = emit_report(&run_job(&parse_config(text).unwrap()).unwrap(), ReportFormat::Json).unwrap();
    let second = emit_report(&run_job(&parse_config(text).unwrap()).unwrap(), ReportFormat::Json).unwrap();
    assert_eq!(first, second);
    let sol = first.find("\"solution\"").unwrap();
    let coeffs = first.find("\"coefficients\"").unwrap();
    let bounds = first.find("\"bounds\"").unwrap();
    assert!(sol < coeffs && coeffs < bounds);
}

#[test]
fn coefficients_round_trip_into_area_sum() {
    let cfg = parse_config(r#"{"p":0.4,"k":0.2,"mu_spec":{"coeff_extremal":{"n":2}},"grid_n":48}"#).unwrap();
    let result = run_job(&cfg).unwrap();
    let coeffs = result.coefficients.as_ref().unwrap();
    let text = serde_json::to_string_pretty(coeffs).unwrap();
    let back: LaurentCoefficients = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, coeffs);
    assert_eq!(chichra_sum(&back).lhs, chichra_sum(coeffs).lhs);
}

#[test]
fn extracted_coefficients_match_first_order_for_small_k() {
    let cfg = parse_config(r#"{"p":0.3,"k":0.02,"mu_spec":{"coeff_extremal":{"n":1}},"grid_n":64}"#).unwrap();
    let result = run_job(&cfg).unwrap();
    let map = ReconstructedMap::new(&result.neumann);
    let b = coeff_from_map(&map, 1.5, 2).unwrap();
    let first = qcx::coeffs::coeff_first_order(&result.mu, cfg.pole(), 1).unwrap();
    // The remainder is O(k²).
    assert!((b.get(1) - first).norm() < 4.0 * 0.02 * 0.02);
    assert!((b.get(1) - result.coefficients.as_ref().unwrap().get(1)).norm() < 1e-9);
}

#[test]
fn errors_name_their_stage_or_field() {
    match parse_config(r#"{"p":0.3,"k":0.2}"#).unwrap_err() {
        Error::Config { message, .. } => assert!(message.contains("mu_spec"), "{message}"),
        other => panic!("{other:?}"),
    }
    match parse_config(r#"{"p":1.3,"k":0.2,"mu_spec":"zero"}"#).unwrap_err() {
        Error::Config { path, .. } => assert_eq!(path, "p"),
        other => panic!("{other:?}"),
    }
    let err = parse_config(r#"{"p":0.3,"k":0.2,"mu_spec":{"pointwise_extremal":{"z":[0.1]}}}"#).unwrap_err();
    assert!(err.to_string().contains("mu_spec"), "{err}");
}

#[test]
fn pointwise_extremal_with_fixed_phase() {
    let cfg = parse_config(
        r#"{"p":0.2,"k":0.1,"mu_spec":{"pointwise_extremal":{"z":[1.2,-0.4],"theta":0.5}},"grid_n":32}"#,
    )
    .unwrap();
    let result = run_job(&cfg).unwrap();
    assert!(result.theta.is_none());
    let mu = result.mu.mu().eval(Complex64::new(0.0, 0.0));
    assert!((mu.norm() - 0.1).abs() < 1e-12);
    assert!(result.all_pass());
}
