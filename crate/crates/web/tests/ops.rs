use bpeq_web::{compare_controllers, fundamental_diagram, speed_field};
use serde_json::Value;

fn numbers(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn diagram_spans_free_flow_to_jam() {
    let d = fundamental_diagram(60.0, 25.0, 143.0, 51).unwrap();
    let density = numbers(&d["density"]);
    let speed = numbers(&d["speed"]);
    let flow = numbers(&d["flow"]);
    assert_eq!(density.len(), 51);
    assert_eq!(density[0], 0.0);
    assert!((density[50] - 143.0).abs() < 1e-9);
    assert!((speed[0] - 60.0).abs() < 1e-9);
    assert_eq!(speed[50], 0.0);
    assert!(speed.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(flow[0], 0.0);
    assert_eq!(flow[50], 0.0);
    assert!(flow.iter().cloned().fold(0.0, f64::max) > 500.0);
}

#[test]
fn diagram_rejects_bad_parameters() {
    assert!(fundamental_diagram(-1.0, 25.0, 143.0, 10).is_err());
    assert!(fundamental_diagram(60.0, 25.0, 143.0, 1).is_err());
}

#[test]
fn field_without_probes_is_free_flow() {
    let f = speed_field("[]", 20.0, 5.0, 500.0, 0.0, 40.0, 10, 5).unwrap();
    let rows = f["speed"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert!(numbers(row).iter().all(|&v| (v - 60.0).abs() < 1e-9));
    }
}

#[test]
fn field_follows_a_stopped_probe() {
    let probes = r#"[{"x": 500, "t": 40, "v": 0}, {"x": 100, "t": 40, "v": 50}]"#;
    let f = speed_field(probes, 20.0, 5.0, 500.0, 0.0, 40.0, 11, 3).unwrap();
    let last = numbers(&f["speed"][2]);
    assert!(last[10] < 1.0, "{last:?}");
    assert!((last[2] - 50.0).abs() < 1.0, "{last:?}");
}

#[test]
fn field_reports_malformed_probes() {
    let err = speed_field(r#"[{"x": 1, "t": 2}]"#, 20.0, 5.0, 500.0, 0.0, 40.0, 4, 4).unwrap_err();
    assert!(err.contains("`v`"), "{err}");
    assert!(speed_field("not json", 20.0, 5.0, 500.0, 0.0, 40.0, 4, 4).is_err());
    assert!(speed_field("[]", 20.0, 5.0, 500.0, 40.0, 0.0, 4, 4).is_err());
}

#[test]
fn comparison_runs_all_three_controllers() {
    let rows = compare_controllers(500.0, 0.8, 0.3, 0, 1200.0).unwrap();
    let rows = rows.as_array().unwrap();
    let names: Vec<&str> = rows
        .iter()
        .map(|r| r["controller"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["fixed", "bp_perfect", "bp_eq"]);
    for r in rows {
        assert!(r["mean_delay"].as_f64().unwrap() > 0.0);
        assert!(r["throughput"].as_u64().unwrap() > 0);
    }
    assert!(rows[2]["agreement"].as_f64().is_some());
    assert!(rows[0]["agreement"].is_null());
    assert_eq!(
        rows,
        compare_controllers(500.0, 0.8, 0.3, 0, 1200.0)
            .unwrap()
            .as_array()
            .unwrap()
    );
    assert!(compare_controllers(500.0, 0.8, 1.5, 0, 1200.0).is_err());
}
