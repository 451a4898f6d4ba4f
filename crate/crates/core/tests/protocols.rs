use std::f64::consts::PI;
use std::fs;

use qwalk::config::{parse_config, Format, Protocol};
use qwalk::protocol::{compare_to_oracle, run_protocol, write_bundle, ProtocolError, RunOptions};
use qwalk::transport::midpoints;
use serde_json::Value;

fn run(text: &str) -> qwalk::protocol::ResultBundle {
    run_protocol(&parse_config(text).unwrap(), &RunOptions::default()).unwrap()
}

#[test]
fn curvature_map_grid_has_pi_over_eleven_spacing() {
    let c = parse_config("protocol = \"curvature-map\"\ntheta1 = -0.5\ntheta2 = 0.5\n").unwrap();
    let ks = midpoints(c.params.grid);
    assert_eq!(ks.len() * ks.len(), 121);
    for w in ks.windows(2) {
        assert!((w[1] - w[0] - PI / 11.0).abs() < 1e-12);
    }
}

#[test]
fn curvature_map_writes_121_rows() {
    let dir = tempfile::tempdir().unwrap();
    let b = run("protocol = \"curvature-map\"\ntheta1 = 0.5\ntheta2 = 0.5\n");
    let formats = [Format::Csv, Format::Json, Format::Svg].into_iter().collect();
    write_bundle(&b, dir.path(), &formats).unwrap();
    let csv = fs::read_to_string(dir.path().join("curvature_map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k_xc_over_pi,k_yc_over_pi,lambda,omega_measured,omega_oracle,band_overlap_final"
    );
    assert_eq!(lines.count(), 121);
    let report = compare_to_oracle(&b).unwrap();
    assert!(report.pass(), "{report:?}");
    assert!(dir.path().join("omega_measured.svg").exists());
    assert!(dir.path().join("omega_oracle.svg").exists());
}

#[test]
fn chern_bloch_summary_reports_both_chern_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let b = run("protocol = \"chern-bloch\"\ntheta1 = -0.5\ntheta2 = 0.5\n");
    let formats = [Format::Json].into_iter().collect();
    write_bundle(&b, dir.path(), &formats).unwrap();
    let s: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let transport = s["chern_transport"].as_f64().unwrap();
    let spectral = s["chern_spectral"].as_f64().unwrap();
    assert!((transport + 1.0).abs() <= 0.05, "{transport}");
    assert!((spectral + 1.0).abs() < 1e-10);
    assert_eq!(s["oracle"]["pass"], Value::Bool(true));
}

/// At θ = (0, 5π/6) the curvature cancels over the zone but is not small
/// pointwise, so the flat-curvature check reports a failure.
#[test]
fn trivial_curvature_map_integrates_to_zero() {
    let b = run("protocol = \"curvature-map\"\ntheta1 = 0\ntheta2 = 0.8333333333333334\ngrid = 5\n");
    assert!(b.number("chern_transport").unwrap().abs() < 0.05);
    let r = compare_to_oracle(&b).unwrap();
    let check = |name: &str| r.checks.iter().find(|c| c.name == name).unwrap().clone();
    assert!(check("chern_deviation").pass);
    assert!(check("mean_abs_deviation").pass);
    let flat = check("mean_abs_omega");
    assert!(!flat.pass);
    let t = b.table("curvature_map").unwrap();
    let oracle = t.column("omega_oracle").unwrap();
    let oracle_mean = oracle.iter().map(|x| x.abs()).sum::<f64>() / oracle.len() as f64;
    assert!((flat.value - oracle_mean).abs() < 0.05, "{} vs {oracle_mean}", flat.value);
}

#[test]
fn edge_bundle_has_heatmap_and_metrics() {
    let b = run("protocol = \"edge\"\n");
    assert_eq!(b.summary["chirality"], Value::from("negative"));
    assert_eq!(b.summary["swap_outcome"], Value::from("reversed"));
    assert!(b.number("edge_contrast").unwrap() >= 2.0);
    let metrics = b.table("edge_metrics").unwrap();
    let widths: Vec<f64> = metrics.column("edge_width").unwrap();
    assert_eq!(widths, [3.0, 4.0, 6.0, 3.0, 4.0, 6.0]);
    assert_eq!(b.table("probability").unwrap().rows.len(), 64 * 64);
    let svg = &b.figures.iter().find(|f| f.name == "probability").unwrap().svg;
    assert!(svg.starts_with("<svg"));
}

#[test]
fn bulk_boundary_bundle_is_consistent() {
    let b = run("protocol = \"bulk-boundary\"\n");
    assert_eq!(b.summary["counts_match"], Value::Bool(true));
    assert_eq!(b.summary["chirality_consistent"], Value::Bool(true));
    assert!(compare_to_oracle(&b).unwrap().pass());
}

#[test]
fn ribbon_bundle_counts_interfaces() {
    let b = run("protocol = \"ribbon\"\nky_samples = 200\n");
    let nets = b.summary["interface_nets"].as_array().unwrap();
    assert_eq!(nets.len(), 2);
    assert_eq!(nets.iter().map(|v| v.as_i64().unwrap().abs()).sum::<i64>(), 2);
    assert_eq!(b.table("spectrum").unwrap().rows.len(), 200 * 48);
}

#[test]
fn recurrence_bundle() {
    let b = run("protocol = \"recurrence\"\n");
    assert_eq!(b.table("recurrence").unwrap().rows.len(), 11);
    assert!(b.number("net_drift").unwrap().abs() < 1.0);
    assert!(compare_to_oracle(&b).unwrap().pass());
}

#[test]
fn closed_gap_is_a_runtime_error() {
    let c = parse_config("protocol = \"chern-bloch\"\ntheta1 = 0\ntheta2 = 0\n").unwrap();
    let e = run_protocol(&c, &RunOptions::default()).unwrap_err();
    assert!(!e.is_config());
    assert!(matches!(e, ProtocolError::Transport(_)), "{e}");
}

#[test]
fn identical_configs_give_identical_tables_across_worker_counts() {
    let base = "protocol = \"curvature-map\"\ntheta1 = -0.5\ntheta2 = 0.5\ngrid = 4\nlattice = 48\ndk = 0.05\n";
    let mut outputs = Vec::new();
    for workers in [1, 3] {
        let dir = tempfile::tempdir().unwrap();
        let b = run(&format!("{base}workers = {workers}\n"));
        assert_eq!(b.workers, workers);
        write_bundle(&b, dir.path(), &[Format::Csv].into_iter().collect()).unwrap();
        outputs.push(fs::read(dir.path().join("curvature_map.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn every_protocol_has_a_default_config() {
    for p in Protocol::ALL {
        let c = parse_config(&format!("protocol = \"{p}\"\n")).unwrap();
        assert_eq!(c.protocol, p);
    }
}
