//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use qwalk::bands::{
    band_solve, curvature_from_states, curvature_plaquette, curvature_plaquette_band, Band, BzGrid,
};
use qwalk::config::{parse_config, Format};
use qwalk::lattice::{LatticeGeometry, Representation, SpinorField};
use qwalk::protocol::{run_protocol, write_bundle, ResultBundle, RunOptions};
use qwalk::spinor::{scale, C64};
use qwalk::transport::{plane_wave_mean_deviation, Drive};
use qwalk::walk::{evolve, WalkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(text: &str) -> ResultBundle {
    let config = parse_config(text).expect("valid config");
    run_protocol(&config, &RunOptions::default()).expect("protocol runs")
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn spectral_chern_quantization() -> Outcome {
    let grid = BzGrid::square(64).unwrap();
    let cases = [
        ("(-0.5, 0.5)", (-0.5, 0.5), -1),
        ("(0.5, 0.5)", (0.5, 0.5), -1),
        ("(0, 5/6)", (0.0, 5.0 / 6.0), 0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, (a, b), want) in cases {
        let c = curvature_plaquette(&band_solve(a * PI, b * PI, grid).unwrap())
            .unwrap()
            .chern;
        pass &= (c - want as f64).abs() < 1e-10;
        parts.push(format!("{label} pi: C = {c:.12}"));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn bloch_transport_chern() -> Outcome {
    let topo = run("protocol = \"chern-bloch\"\ntheta1 = -0.5\ntheta2 = 0.5\n");
    let trivial = run("protocol = \"chern-bloch\"\ntheta1 = 0\ntheta2 = 0.8333333333333334\n");
    let (c1, c0) = (
        topo.number("chern_transport").unwrap(),
        trivial.number("chern_transport").unwrap(),
    );
    let pass = within(c1, -1.05, -0.95) && within(c0, -0.05, 0.05);
    // Start-momentum sensitivity, for the record.
    let mut record = Vec::new();
    for k in [-0.5, -0.25, 0.25] {
        let b = run(&format!(
            "protocol = \"chern-bloch\"\ntheta1 = -0.5\ntheta2 = 0.5\nk_yc = {k}\n"
        ));
        record.push(format!("{k}: {:.4}", b.number("chern_transport").unwrap()));
    }
    Outcome {
        pass,
        detail: format!(
            "C(-0.5, 0.5) = {c1:.4}, C(0, 5/6) = {c0:.4}; k_yc/pi sensitivity [{}]",
            record.join(", ")
        ),
    }
}

fn curvature_reconstruction() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in [(-0.5, 0.5), (0.5, 0.5)] {
        let r = run(&format!(
            "protocol = \"curvature-map\"\ntheta1 = {a}\ntheta2 = {b}\n"
        ));
        let c = r.number("chern_transport").unwrap();
        let mad = r.number("mean_abs_deviation").unwrap();
        pass &= within(c, -1.15, -0.95) && mad < 0.1;
        parts.push(format!("({a}, {b}) pi: C = {c:.4}, MAD = {mad:.4}"));
    }
    let wide = run("protocol = \"curvature-map\"\ntheta1 = -0.5\ntheta2 = 0.5\ndk = 0.095\n");
    parts.push(format!(
        "record: MAD at dk = 0.095 pi is {:.4}",
        wide.number("mean_abs_deviation").unwrap()
    ));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn band_gap() -> Outcome {
    let sol = band_solve(-PI / 2.0, PI / 2.0, BzGrid::square(64).unwrap()).unwrap();
    let rel = (sol.gap - PI / 2.0).abs() / (PI / 2.0);
    Outcome {
        pass: rel <= 0.05,
        detail: format!(
            "zero-quasienergy gap {:.6} (pi/2 = {:.6}, off by {:.2}%); pi gap {:.4}",
            sol.gap,
            PI / 2.0,
            100.0 * rel,
            sol.gap_pi
        ),
    }
}

fn bloch_recurrence() -> Outcome {
    let b = run("protocol = \"recurrence\"\ntheta1 = -0.5\ntheta2 = 0.5\n");
    let d = b.number("net_drift").unwrap();
    Outcome {
        pass: d.abs() < 1.0,
        detail: format!(
            "|y(10) - y(0)| = {:.4}, max excursion {:.3}",
            d.abs(),
            b.number("max_excursion").unwrap()
        ),
    }
}

fn edge_chirality() -> (Outcome, i64) {
    let b = run("protocol = \"edge\"\ntheta1 = -0.25\ntheta2_left = 1\ntheta2_right = 0.2\nsteps = 12\n");
    let contrast = b.number("edge_contrast").unwrap();
    let chirality = b.summary["chirality"].as_str().unwrap().to_string();
    let swapped = b.summary["swapped_chirality"].as_str().unwrap().to_string();
    let outcome = b.summary["swap_outcome"].as_str().unwrap().to_string();
    let sign = match chirality.as_str() {
        "positive" => 1,
        "negative" => -1,
        _ => 0,
    };
    let pass = contrast >= 2.0 && sign != 0 && outcome == "reversed";
    (
        Outcome {
            pass,
            detail: format!(
                "p_edge {:.4} vs control {:.4} (x{contrast:.2}); drift {:.2} ({chirality}); swapped {swapped}, {outcome}",
                b.number("p_edge").unwrap(),
                b.number("p_edge_control").unwrap(),
                b.number("y_drift_edge").unwrap(),
            ),
        },
        sign,
    )
}

fn bulk_boundary(dynamical_sign: i64) -> Outcome {
    let b = run("protocol = \"bulk-boundary\"\ntheta1 = -0.25\ntheta2_left = 1\ntheta2_right = 0.2\n");
    let dc = (b.summary["chern_left"].as_i64().unwrap() - b.summary["chern_right"].as_i64().unwrap()).abs();
    let centre = b.summary["net_modes_centre"].as_i64().unwrap();
    let wrap = b.summary["net_modes_wrap"].as_i64();
    let v = b.summary["velocity_sign"].as_i64().unwrap();
    let pass = dc == 1
        && centre.abs() == 1
        && wrap.map(i64::abs) == Some(1)
        && b.summary["counts_match"] == Value::Bool(true)
        && v != 0
        && v == dynamical_sign;
    Outcome {
        pass,
        detail: format!(
            "|dC| = {dc}; net modes centre {centre}, wrap {wrap:?}; velocity sign {v} vs dynamical {dynamical_sign}"
        ),
    }
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let g = LatticeGeometry::square(32).unwrap();
    let mut norm: f64 = 0.0;
    for _ in 0..100 {
        let mut s = SpinorField::from_fn(g, Representation::Position, |_, _| {
            [
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            ]
        });
        s.normalize();
        let p = WalkParams::new(
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-0.5..0.5),
            10,
        );
        norm = norm.max((evolve(&s, &p).unwrap().norm_sqr() - 1.0).abs());
    }

    let grid = BzGrid::square(32).unwrap();
    let (mut gauge, mut anti_eps, mut anti_omega): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (a, b) in [(-0.5, 0.5), (0.5, 0.5), (0.0, 5.0 / 6.0), (-0.25, 0.2), (0.3, -0.7)] {
        let sol = band_solve(a * PI, b * PI, grid).unwrap();
        let lower = curvature_plaquette_band(&sol, Band::Lower).unwrap();
        let upper = curvature_plaquette_band(&sol, Band::Upper).unwrap();
        let dressed: Vec<_> = sol
            .u_lower
            .iter()
            .map(|u| scale(u, C64::from_polar(1.0, rng.random_range(-PI..PI))))
            .collect();
        let other = curvature_from_states(grid, &dressed, Band::Lower);
        for i in 0..grid.len() {
            gauge = gauge.max((lower.omega[i] - other.omega[i]).abs() * grid.cell_area());
            anti_omega = anti_omega.max((lower.omega[i] + upper.omega[i]).abs());
            anti_eps = anti_eps.max((sol.eps_lower[i] + sol.eps_upper[i]).abs());
        }
    }

    let deviation = |theta: (f64, f64), n: usize| {
        let drive = Drive {
            force: PI / 5.0 / n as f64,
            steps: n + 1,
            force_steps: n,
        };
        plane_wave_mean_deviation(theta, 11, drive).unwrap()
    };
    let d: Vec<f64> = [9, 18, 36].iter().map(|&n| deviation((-PI / 2.0, PI / 2.0), n)).collect();
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    let other: Vec<f64> = [9, 18, 36].iter().map(|&n| deviation((PI / 2.0, PI / 2.0), n)).collect();
    let other_ratios: Vec<f64> = other.windows(2).map(|w| w[1] / w[0]).collect();
    let of_pass = ratios.iter().all(|r| within(*r, 0.375, 0.625));

    let pass = norm < 1e-10 && gauge < 1e-10 && anti_eps < 1e-8 && anti_omega < 1e-8 && of_pass;
    Outcome {
        pass,
        detail: format!(
            "norm drift {norm:.1e}; gauge {gauge:.1e}; eps antisym {anti_eps:.1e}; omega antisym {anti_omega:.1e}; \
             O(F) at (-0.5, 0.5) pi: deviations {d:.4?}, ratios {ratios:.3?}; \
             record at (0.5, 0.5) pi: ratios {other_ratios:.3?}"
        ),
    }
}

fn determinism() -> Outcome {
    let configs = [
        ("chern-bloch", "protocol = \"chern-bloch\"\ntheta1 = -0.5\ntheta2 = 0.5\n", "lambda.csv"),
        ("curvature-map", "protocol = \"curvature-map\"\ntheta1 = -0.5\ntheta2 = 0.5\n", "curvature_map.csv"),
        ("edge", "protocol = \"edge\"\n", "probability.csv"),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, text, file) in configs {
        let mut bytes = Vec::new();
        for workers in [1, 8] {
            let dir = tempfile::tempdir().unwrap();
            let b = run(&format!("{text}workers = {workers}\n"));
            write_bundle(&b, dir.path(), &[Format::Csv].into_iter().collect()).unwrap();
            bytes.push(fs::read(dir.path().join(file)).unwrap());
        }
        let same = bytes[0] == bytes[1];
        pass &= same;
        parts.push(format!("{name} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn report(n: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = out.pass && in_time;
    let budget = limit
        .map(|l| format!(" (limit {:.0} s)", l.as_secs_f64()))
        .unwrap_or_default();
    println!(
        "criterion {n} {}: {title}: {} [{:.2} s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
    );
    pass
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(report(1, "spectral Chern quantization", Some(secs(5)), spectral_chern_quantization));
    results.push(report(2, "Bloch-oscillation transport Chern", Some(secs(120)), bloch_transport_chern));
    results.push(report(3, "curvature-map reconstruction", Some(secs(900)), curvature_reconstruction));
    results.push(report(4, "band gap", None, band_gap));
    results.push(report(5, "Bloch recurrence", None, bloch_recurrence));
    let mut sign = 0;
    results.push(report(6, "edge chirality", Some(secs(30)), || {
        let (o, s) = edge_chirality();
        sign = s;
        o
    }));
    results.push(report(7, "bulk-boundary correspondence", None, || bulk_boundary(sign)));
    results.push(report(8, "property suites", None, property_suites));
    results.push(report(9, "determinism across worker counts", None, determinism));
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
