//! End-to-end runs of the numerical identity suite on the three model
//! geometries, including the non-Einstein negative control.

use lich_core::model_geometry::suite::{
    default_chart, identity_suite, non_einstein_control,
};
use lich_core::model_geometry::ModelMetric;

#[test]
fn flat_torus_suite_passes() {
    let metric = ModelMetric::flat_torus(2);
    let chart = default_chart(&metric, 96, 4);
    let report = identity_suite(&metric, &chart, 3, 20260823).unwrap();
    println!("{report}");
    assert!(report.pass, "{report}");
}

#[test]
fn hyperbolic_ball_suite_passes() {
    let metric = ModelMetric::hyperbolic_ball(2);
    let chart = default_chart(&metric, 96, 4);
    let report = identity_suite(&metric, &chart, 3, 20260823).unwrap();
    println!("{report}");
    assert!(report.pass, "{report}");
}

#[test]
fn cusp_collar_suite_passes() {
    let metric = ModelMetric::product_collar(2, 0.0);
    let chart = default_chart(&metric, 96, 4);
    let report = identity_suite(&metric, &chart, 3, 20260823).unwrap();
    println!("{report}");
    assert!(report.pass, "{report}");
}

#[test]
fn non_einstein_collar_breaks_div_commutation() {
    let metric = ModelMetric::product_collar(3, 4.0);
    let chart = default_chart(&metric, 12, 4);
    let result = non_einstein_control(&metric, &chart, 3, 20260823).unwrap();
    println!(
        "control: slope {:.3}, finest {:.3e}, pass = {}",
        result.slope,
        result.residuals.last().unwrap(),
        result.pass
    );
    assert!(result.pass, "non-Einstein control unexpectedly converged");
}

#[test]
fn suite_report_serialises() {
    let metric = ModelMetric::flat_torus(2);
    let chart = default_chart(&metric, 8, 2);
    let report = identity_suite(&metric, &chart, 2, 7).unwrap();
    let json = serde_json::to_string_pretty(&report).unwrap();
    assert!(json.contains("lambda_div_commute"));
}
