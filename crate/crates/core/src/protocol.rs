//! Runs configured experiments and writes their result bundles.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bands::{
    band_solve, curvature_plaquette, phase_diagram, spectral_chern, BandError, BzGrid, PhaseCell,
};
use crate::config::{ConfigError, ExperimentConfig, Format, Params, Protocol, StartSpin};
use crate::edge::{
    bulk_boundary_check, chirality_swap_test, edge_metrics, run_edge, Chirality, EdgeConfig,
    EdgeError, EdgeRun,
};
use crate::lattice::{LatticeError, LatticeGeometry};
use crate::ribbon::{ribbon_spectrum, split_chain, InterfaceCount};
use crate::spinor::{SPIN_DOWN, SPIN_UP};
use crate::svg::{self, Heatmap};
use crate::transport::{
    bloch_recurrence, chern_bloch_oscillation, midpoints, plane_wave_mean_deviation,
    reconstruct_curvature, Drive, PacketExperiment, TransportError, WavePacketSpec,
};

/// Grid used for the spectral Chern reference.
pub const SPECTRAL_GRID: usize = 64;
/// Width sensitivity reported by the edge protocol.
pub const EDGE_WIDTHS: [usize; 3] = [3, 4, 6];
pub const BLOCH_CHERN_TOL: f64 = 0.05;
pub const MAP_CHERN_TOL: f64 = 0.15;
pub const MAP_MAD_TOL: f64 = 0.1;
pub const TRIVIAL_OMEGA_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("strict mode: {} warning(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Strict(Vec<String>),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ProtocolError {
    pub fn is_config(&self) -> bool {
        matches!(self, ProtocolError::Config(_))
    }
}

/// A named table of stringified values.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl DataTable {
    fn new(name: &str, header: &[&str]) -> Self {
        DataTable {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Parses a column as numbers; empty cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        self.rows
            .iter()
            .map(|r| {
                if r[c].is_empty() {
                    Some(f64::NAN)
                } else {
                    r[c].parse().ok()
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub name: String,
    pub svg: String,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Fail when the run produced warnings.
    pub strict: bool,
    /// Recorded in the manifest; protocols are deterministic.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub summary: Map<String, Value>,
    pub tables: Vec<DataTable>,
    pub figures: Vec<Figure>,
    pub warnings: Vec<String>,
    pub workers: usize,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

impl ResultBundle {
    pub fn protocol(&self) -> Protocol {
        self.config.protocol
    }

    pub fn table(&self, name: &str) -> Option<&DataTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(Value::as_f64)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn over_pi(x: f64) -> String {
    num(x / PI)
}

/// Runs an experiment on a pool of `config.workers` threads.
pub fn run_protocol(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ResultBundle, ProtocolError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| ProtocolError::Pool(e.to_string()))?;
    let start = Instant::now();
    let mut out = Output::default();
    pool.install(|| dispatch(config, &mut out))?;
    let wall_time_s = start.elapsed().as_secs_f64();
    for w in &out.warnings {
        log::warn!("{w}");
    }
    if options.strict && !out.warnings.is_empty() {
        return Err(ProtocolError::Strict(out.warnings));
    }
    Ok(ResultBundle {
        config: config.clone(),
        summary: out.summary,
        tables: out.tables,
        figures: out.figures,
        warnings: out.warnings,
        workers: pool.current_num_threads(),
        seed: options.seed,
        wall_time_s,
    })
}

#[derive(Default)]
struct Output {
    summary: Map<String, Value>,
    tables: Vec<DataTable>,
    figures: Vec<Figure>,
    warnings: Vec<String>,
}

impl Output {
    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }

    fn figure(&mut self, name: &str, h: Heatmap) {
        self.figures.push(Figure {
            name: name.to_string(),
            svg: svg::render(&h),
        });
    }
}

fn dispatch(config: &ExperimentConfig, out: &mut Output) -> Result<(), ProtocolError> {
    let p = &config.params;
    match config.protocol {
        Protocol::Bands => run_bands(p, out),
        Protocol::PhaseDiagram => run_phase_diagram(p, out),
        Protocol::ChernBloch => run_chern_bloch(p, out),
        Protocol::CurvatureMap => run_curvature_map(p, out),
        Protocol::Recurrence => run_recurrence(p, out),
        Protocol::Edge => run_edge_protocol(p, out),
        Protocol::Ribbon => run_ribbon(p, out),
        Protocol::BulkBoundary => run_bulk_boundary(p, out),
    }
}

fn theta(p: &Params) -> (f64, f64) {
    (p.theta1 * PI, p.theta2 * PI)
}

/// Reorders a BZ-grid field (index `i * ny + j`) into heatmap rows.
fn grid_to_rows(values: &[f64], grid: BzGrid) -> Vec<f64> {
    let mut rows = vec![0.0; values.len()];
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            rows[j * grid.nx + i] = values[grid.index(i, j)];
        }
    }
    rows
}

fn run_bands(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let (t1, t2) = theta(p);
    let grid = BzGrid::square(p.grid)?;
    let sol = band_solve(t1, t2, grid)?;
    let curvature = if sol.gap_closed {
        out.warnings.push(format!(
            "gap closed (zero gap {:e}, pi gap {:e}); curvature not computed",
            sol.gap, sol.gap_pi
        ));
        None
    } else {
        Some(curvature_plaquette(&sol)?)
    };
    let mut t = DataTable::new(
        "bands",
        &["kx_over_pi", "ky_over_pi", "eps_lower", "eps_upper", "omega_lower"],
    );
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let idx = grid.index(i, j);
            t.push(vec![
                over_pi(grid.kx(i)),
                over_pi(grid.ky(j)),
                num(sol.eps_lower[idx]),
                num(sol.eps_upper[idx]),
                opt(curvature.as_ref().map(|c| c.omega[idx])),
            ]);
        }
    }
    out.tables.push(t);
    out.put("theta1_over_pi", json!(p.theta1));
    out.put("theta2_over_pi", json!(p.theta2));
    out.put("gap_zero", json!(sol.gap));
    out.put("gap_pi", json!(sol.gap_pi));
    out.put("gap_closed", json!(sol.gap_closed));
    out.put("chern", json!(curvature.as_ref().map(|c| c.chern)));
    out.put("chern_integer", json!(curvature.as_ref().map(|c| c.chern_integer())));

    let zone = (-0.5, 0.5);
    let eps = grid_to_rows(&sol.eps_upper, grid);
    out.figure(
        "quasienergy_upper",
        Heatmap {
            title: "upper-band quasienergy",
            values: &eps,
            nx: grid.nx,
            ny: grid.ny,
            x_range: zone,
            y_range: zone,
            x_label: "kx / pi",
            y_label: "ky / pi",
            limits: None,
        },
    );
    if let Some(c) = &curvature {
        let omega = grid_to_rows(&c.omega, grid);
        out.figure(
            "curvature",
            Heatmap {
                title: "lower-band Berry curvature",
                values: &omega,
                nx: grid.nx,
                ny: grid.ny,
                x_range: zone,
                y_range: zone,
                x_label: "kx / pi",
                y_label: "ky / pi",
                limits: None,
            },
        );
    }
    Ok(())
}

fn run_phase_diagram(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let pd = phase_diagram(p.theta_grid, p.chern_grid)?;
    let n = pd.n();
    let mut t = DataTable::new("phase_diagram", &["theta1_over_pi", "theta2_over_pi", "chern"]);
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    let mut rows = vec![f64::NAN; n * n];
    for i in 0..n {
        for j in 0..n {
            let cell = pd.cells[i * n + j];
            let label = match cell {
                PhaseCell::Chern(c) => {
                    rows[j * n + i] = c as f64;
                    c.to_string()
                }
                PhaseCell::Boundary => "boundary".to_string(),
            };
            *counts.entry(label.clone()).or_default() += 1;
            t.push(vec![over_pi(pd.samples[i]), over_pi(pd.samples[j]), label]);
        }
    }
    out.tables.push(t);
    out.put("theta_grid", json!(p.theta_grid));
    out.put("chern_grid", json!(p.chern_grid));
    out.put("cell_counts", json!(counts));
    let range = (pd.samples[0] / PI, pd.samples[n - 1] / PI);
    out.figure(
        "phase_diagram",
        Heatmap {
            title: "lower-band Chern number (grey: gap closed)",
            values: &rows,
            nx: n,
            ny: n,
            x_range: range,
            y_range: range,
            x_label: "theta1 / pi",
            y_label: "theta2 / pi",
            limits: Some((-1.5, 1.5)),
        },
    );
    Ok(())
}

fn packet_experiment(p: &Params) -> Result<PacketExperiment, ProtocolError> {
    Ok(PacketExperiment {
        theta: theta(p),
        geometry: LatticeGeometry::square(p.lattice)?,
        dk: p.dk * PI,
        readout: p.readout,
    })
}

fn run_chern_bloch(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let exp = packet_experiment(p)?;
    let res = chern_bloch_oscillation(&exp, p.n_kx, p.force * PI, p.steps, p.k_yc * PI)?;
    let spectral = spectral_chern(exp.theta.0, exp.theta.1, SPECTRAL_GRID)?;
    let mut t = DataTable::new(
        "lambda",
        &[
            "kx_over_pi",
            "k_yc_over_pi",
            "x_plus",
            "x_minus",
            "lambda",
            "lambda_moment",
            "lambda_fit",
            "lambda_oracle",
            "band_overlap_final",
        ],
    );
    for (r, o) in res.records.iter().zip(&res.oracle) {
        t.push(vec![
            over_pi(r.k_c.0),
            over_pi(r.k_c.1),
            num(r.x_plus),
            num(r.x_minus),
            num(r.lambda),
            num(r.lambda_moment),
            opt(r.lambda_fit),
            num(*o),
            num(r.band_overlap),
        ]);
        if r.leakage_warning {
            out.warnings.push(format!(
                "band leakage at kx = {:.4} pi: final overlap {:.3}",
                r.k_c.0 / PI,
                r.band_overlap
            ));
        }
    }
    out.tables.push(t);
    let oracle_sum = res.oracle.iter().sum::<f64>() / (2.0 * p.n_kx as f64);
    let min_overlap = res
        .records
        .iter()
        .map(|r| r.band_overlap)
        .fold(f64::INFINITY, f64::min);
    out.put("readout", json!(p.readout.name()));
    out.put("chern_transport", json!(res.chern));
    out.put("chern_spectral", json!(spectral));
    out.put("chern_oracle_columns", json!(oracle_sum));
    out.put("min_band_overlap", json!(min_overlap));
    out.put(
        "leakage_points",
        json!(res.records.iter().filter(|r| r.leakage_warning).count()),
    );
    Ok(())
}

fn run_curvature_map(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let exp = packet_experiment(p)?;
    let drive = Drive {
        force: p.force * PI,
        steps: p.steps,
        force_steps: p.force_steps,
    };
    let res = reconstruct_curvature(&exp, p.grid, drive)?;
    let spectral = spectral_chern(exp.theta.0, exp.theta.1, SPECTRAL_GRID)?;
    let plane_wave = plane_wave_mean_deviation(exp.theta, p.grid, drive)?;
    let mut t = DataTable::new(
        "curvature_map",
        &[
            "k_xc_over_pi",
            "k_yc_over_pi",
            "lambda",
            "omega_measured",
            "omega_oracle",
            "band_overlap_final",
        ],
    );
    for pt in &res.points {
        t.push(vec![
            over_pi(pt.k_c.0),
            over_pi(pt.k_c.1),
            num(pt.record.lambda),
            num(pt.omega_measured),
            num(pt.omega_oracle),
            num(pt.record.band_overlap),
        ]);
        if pt.record.leakage_warning {
            out.warnings.push(format!(
                "band leakage at k = ({:.4}, {:.4}) pi: final overlap {:.3}",
                pt.k_c.0 / PI,
                pt.k_c.1 / PI,
                pt.record.band_overlap
            ));
        }
    }
    out.tables.push(t);
    let max_dev = res
        .points
        .iter()
        .map(|q| (q.omega_measured - q.omega_oracle).abs())
        .fold(0.0, f64::max);
    let mean_abs_omega =
        res.points.iter().map(|q| q.omega_measured.abs()).sum::<f64>() / res.points.len() as f64;
    out.put("readout", json!(p.readout.name()));
    out.put("grid", json!(p.grid));
    out.put("chern_transport", json!(res.chern_transport));
    out.put("chern_spectral", json!(spectral));
    out.put("mean_abs_deviation", json!(res.mean_abs_deviation));
    out.put("max_abs_deviation", json!(max_dev));
    out.put("mean_abs_omega", json!(mean_abs_omega));
    out.put("plane_wave_mean_deviation", json!(plane_wave));
    out.put("leakage_points", json!(res.leakage.len()));

    // Points are ordered by kx then ky; the heatmap wants ky rows.
    let n = p.grid;
    let grid_rows = |f: &dyn Fn(usize) -> f64| {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[j * n + i] = f(i * n + j);
            }
        }
        v
    };
    let measured = grid_rows(&|k| res.points[k].omega_measured);
    let oracle = grid_rows(&|k| res.points[k].omega_oracle);
    let lo = measured.iter().chain(&oracle).copied().fold(f64::INFINITY, f64::min);
    let hi = measured.iter().chain(&oracle).copied().fold(f64::NEG_INFINITY, f64::max);
    let limits = if hi - lo > 1e-12 { Some((lo, hi)) } else { None };
    let ks = midpoints(n);
    let range = (ks[0] / PI, ks[n - 1] / PI);
    for (name, title, values) in [
        ("omega_measured", "measured curvature", &measured),
        ("omega_oracle", "spectral curvature (path mean)", &oracle),
    ] {
        out.figure(
            name,
            Heatmap {
                title,
                values,
                nx: n,
                ny: n,
                x_range: range,
                y_range: range,
                x_label: "kx / pi",
                y_label: "ky / pi",
                limits,
            },
        );
    }
    Ok(())
}

fn run_recurrence(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let exp = packet_experiment(p)?;
    let spec = WavePacketSpec::lower((p.k_xc * PI, p.k_yc * PI), exp.dk);
    let ys = bloch_recurrence(exp.theta, &spec, p.force * PI, p.steps, exp.geometry)?;
    let mut t = DataTable::new("recurrence", &["step", "y_cm"]);
    for (s, y) in ys.iter().enumerate() {
        t.push(vec![s.to_string(), num(*y)]);
    }
    out.tables.push(t);
    let (first, last) = (ys[0], ys[ys.len() - 1]);
    let excursion = ys.iter().map(|y| (y - first).abs()).fold(0.0, f64::max);
    out.put("y_initial", json!(first));
    out.put("y_final", json!(last));
    out.put("net_drift", json!(last - first));
    out.put("max_excursion", json!(excursion));
    out.put(
        "full_period",
        json!(((p.force * p.steps as f64).abs() - 1.0).abs() < 1e-9),
    );
    Ok(())
}

fn edge_config(p: &Params) -> EdgeConfig {
    let mut c = EdgeConfig::new(p.theta1 * PI, p.theta2_left * PI, p.theta2_right * PI, p.steps);
    c.start_site = (p.start_x, p.start_y);
    c.start_spin = match p.start_spin {
        StartSpin::Up => SPIN_UP,
        StartSpin::Down => SPIN_DOWN,
    };
    c.edge_width = p.edge_width;
    c
}

/// θ₂ for the homogeneous control: the side with nonzero Chern number.
fn control_theta2(config: &EdgeConfig, chern: (i64, i64)) -> f64 {
    if chern.0 == 0 && chern.1 != 0 {
        config.theta2_right
    } else {
        config.theta2_left
    }
}

fn probability_rows(run: &EdgeRun) -> Vec<f64> {
    let g = run.geometry;
    let (nx, ny) = (g.size_x(), g.size_y());
    let mut v = vec![0.0; nx * ny];
    for r in 0..ny {
        let iy = g.wrap_y(r as i64 - (ny / 2) as i64);
        for c in 0..nx {
            let ix = g.wrap_x(c as i64 - (nx / 2) as i64);
            v[r * nx + c] = run.probability[g.index(ix, iy)];
        }
    }
    v
}

fn run_edge_protocol(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let geometry = LatticeGeometry::square(p.lattice)?;
    let config = edge_config(p);
    let chern = config.chern_numbers()?;
    let run = run_edge(&config, geometry)?;
    let control_config = config.homogeneous(control_theta2(&config, chern));
    let control = run_edge(&control_config, geometry)?;
    let swap = chirality_swap_test(&config, geometry)?;

    let mut t = DataTable::new(
        "edge_metrics",
        &["run", "edge_width", "p_edge", "y_drift_edge", "chirality"],
    );
    for (name, r, c) in [("domain_wall", &run, &config), ("control", &control, &control_config)] {
        for w in EDGE_WIDTHS {
            let m = edge_metrics(&r.probability, geometry, c, w);
            t.push(vec![
                name.to_string(),
                w.to_string(),
                num(m.p_edge),
                num(m.y_drift_edge),
                m.chirality.name().to_string(),
            ]);
        }
    }
    out.tables.push(t);
    let mut prob = DataTable::new("probability", &["x", "y", "p"]);
    for iy in 0..geometry.size_y() {
        for ix in 0..geometry.size_x() {
            prob.push(vec![
                geometry.signed_x(ix).to_string(),
                geometry.signed_y(iy).to_string(),
                num(run.probability[geometry.index(ix, iy)]),
            ]);
        }
    }
    out.tables.push(prob);

    if run.metrics.chirality == Chirality::Undefined {
        out.warnings.push(format!(
            "edge drift {:.3} below the chirality threshold",
            run.metrics.y_drift_edge
        ));
    }
    out.put("chern_left", json!(chern.0));
    out.put("chern_right", json!(chern.1));
    out.put("edge_width", json!(p.edge_width));
    out.put("p_edge", json!(run.metrics.p_edge));
    out.put("y_drift_edge", json!(run.metrics.y_drift_edge));
    out.put("chirality", json!(run.metrics.chirality.name()));
    out.put("control_theta2_over_pi", json!(control_config.theta2_left / PI));
    out.put("p_edge_control", json!(control.metrics.p_edge));
    out.put("y_drift_edge_control", json!(control.metrics.y_drift_edge));
    out.put(
        "edge_contrast",
        json!(run.metrics.p_edge / control.metrics.p_edge),
    );
    out.put("swapped_chirality", json!(swap.swapped.chirality.name()));
    out.put("swapped_y_drift_edge", json!(swap.swapped.y_drift_edge));
    out.put("swap_outcome", json!(format!("{:?}", swap.outcome).to_lowercase()));

    let n = p.lattice;
    let half = (n / 2) as f64;
    for (name, title, r) in [
        ("probability", "P(x, y) across the domain wall", &run),
        ("probability_control", "P(x, y) homogeneous control", &control),
    ] {
        let values = probability_rows(r);
        out.figure(
            name,
            Heatmap {
                title,
                values: &values,
                nx: n,
                ny: n,
                x_range: (-half, half - 1.0),
                y_range: (-half, half - 1.0),
                x_label: "x",
                y_label: "y",
                limits: None,
            },
        );
    }
    Ok(())
}

fn interface_table(counts: &[InterfaceCount]) -> DataTable {
    let mut t = DataTable::new(
        "interfaces",
        &["position", "flow_zero", "flow_pi", "net", "velocity_sign"],
    );
    for c in counts {
        t.push(vec![
            num(c.position),
            c.flow_zero.to_string(),
            c.flow_pi.to_string(),
            c.net().to_string(),
            c.velocity_sign().to_string(),
        ]);
    }
    t
}

fn run_ribbon(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let (t1, l, r) = (p.theta1 * PI, p.theta2_left * PI, p.theta2_right * PI);
    let angles = split_chain(p.width, t1, l, r);
    let strip = ribbon_spectrum(&angles, p.width, p.ky_samples)?;
    let mut t = DataTable::new(
        "spectrum",
        &["ky_over_pi", "eps_over_pi", "interface", "interface_weight"],
    );
    for (ky, states) in strip.ky.iter().zip(&strip.states) {
        for s in states {
            t.push(vec![
                over_pi(*ky),
                over_pi(s.eps),
                s.interface.map(|i| num(i as f64 - 0.5)).unwrap_or_default(),
                num(s.interface_weight),
            ]);
        }
    }
    out.tables.push(t);
    out.tables.push(interface_table(&strip.counts));
    if strip.unreliable {
        out.warnings.push(format!(
            "ribbon width {} too narrow for reliable interface counting",
            p.width
        ));
    }
    let cl = spectral_chern(t1, l, SPECTRAL_GRID)?;
    let cr = spectral_chern(t1, r, SPECTRAL_GRID)?;
    out.put("chern_left", json!(cl.round() as i64));
    out.put("chern_right", json!(cr.round() as i64));
    out.put("bulk_gap_left", json!(strip.bulk_gaps.0));
    out.put("bulk_gap_right", json!(strip.bulk_gaps.1));
    out.put("reference_zero", json!(strip.reference.0));
    out.put("reference_pi", json!(strip.reference.1));
    out.put("unreliable", json!(strip.unreliable));
    out.put(
        "interface_nets",
        json!(strip.counts.iter().map(|c| c.net()).collect::<Vec<_>>()),
    );
    Ok(())
}

fn run_bulk_boundary(p: &Params, out: &mut Output) -> Result<(), ProtocolError> {
    let config = edge_config(p);
    let report = bulk_boundary_check(&config, p.width, p.ky_samples)?;
    let geometry = LatticeGeometry::square(p.lattice)?;
    let run = run_edge(&config, geometry)?;
    let mut counts = vec![report.centre.clone()];
    counts.extend(report.wrap.clone());
    out.tables.push(interface_table(&counts));
    let dyn_sign = run.metrics.chirality.sign();
    let consistent = report.velocity_sign != 0 && report.velocity_sign == dyn_sign;
    if report.ribbon_unreliable {
        out.warnings.push(format!(
            "ribbon width {} too narrow for reliable interface counting",
            p.width
        ));
    }
    out.put("chern_left", json!(report.chern_left));
    out.put("chern_right", json!(report.chern_right));
    out.put("net_modes_centre", json!(report.centre.net()));
    out.put("net_modes_wrap", json!(report.wrap.as_ref().map(|w| w.net())));
    out.put("counts_match", json!(report.counts_match));
    out.put("velocity_sign", json!(report.velocity_sign));
    out.put("dynamical_chirality", json!(run.metrics.chirality.name()));
    out.put("y_drift_edge", json!(run.metrics.y_drift_edge));
    out.put("chirality_consistent", json!(consistent));
    out.put("ribbon_unreliable", json!(report.ribbon_unreliable));
    Ok(())
}

/// One comparison against an independent reference.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleCheck {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        OracleCheck {
            name: name.to_string(),
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }

    fn flag(name: &str, ok: bool) -> Self {
        OracleCheck {
            name: name.to_string(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn to_json(&self) -> Value {
        json!({
            "pass": self.pass(),
            "checks": self.checks.iter().map(|c| json!({
                "name": c.name,
                "value": c.value,
                "tolerance": c.tolerance,
                "pass": c.pass,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Compares a bundle's measurements with its spectral references. Returns
/// `None` for protocols without a reference.
pub fn compare_to_oracle(bundle: &ResultBundle) -> Option<OracleReport> {
    let n = |k: &str| bundle.number(k).unwrap_or(f64::NAN);
    let b = |k: &str| bundle.summary.get(k).and_then(Value::as_bool).unwrap_or(false);
    let checks = match bundle.protocol() {
        Protocol::ChernBloch => vec![OracleCheck::below(
            "chern_deviation",
            (n("chern_transport") - n("chern_spectral")).abs(),
            BLOCH_CHERN_TOL,
        )],
        Protocol::CurvatureMap => {
            let t = bundle.table("curvature_map")?;
            let m = t.column("omega_measured")?;
            let o = t.column("omega_oracle")?;
            let mad = m.iter().zip(&o).map(|(a, b)| (a - b).abs()).sum::<f64>() / m.len() as f64;
            let mut checks = vec![
                OracleCheck::below(
                    "chern_deviation",
                    (n("chern_transport") - n("chern_spectral")).abs(),
                    MAP_CHERN_TOL,
                ),
                OracleCheck::below("mean_abs_deviation", mad, MAP_MAD_TOL),
            ];
            if n("chern_spectral").round() == 0.0 {
                let mean = m.iter().map(|x| x.abs()).sum::<f64>() / m.len() as f64;
                checks.push(OracleCheck::below("mean_abs_omega", mean, TRIVIAL_OMEGA_TOL));
            }
            checks
        }
        Protocol::Recurrence if b("full_period") => vec![OracleCheck::below(
            "net_drift",
            n("net_drift").abs(),
            1.0,
        )],
        Protocol::BulkBoundary => vec![
            OracleCheck::flag("counts_match", b("counts_match")),
            OracleCheck::flag("chirality_consistent", b("chirality_consistent")),
        ],
        _ => return None,
    };
    Some(OracleReport { checks })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ProtocolError + '_ {
    move |source| ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the table as CSV.
pub fn write_csv(table: &DataTable, path: &Path) -> Result<(), ProtocolError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes the bundle under `dir` in the requested formats, plus `manifest.json`.
/// Returns the written paths.
pub fn write_bundle(
    bundle: &ResultBundle,
    dir: &Path,
    formats: &std::collections::BTreeSet<Format>,
) -> Result<Vec<PathBuf>, ProtocolError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = Vec::new();
    if formats.contains(&Format::Csv) {
        for t in &bundle.tables {
            let path = dir.join(format!("{}.csv", t.name));
            write_csv(t, &path)?;
            files.push(path);
        }
    }
    if formats.contains(&Format::Json) {
        let mut summary = bundle.summary.clone();
        summary.insert("protocol".into(), json!(bundle.protocol().name()));
        summary.insert("warnings".into(), json!(bundle.warnings));
        if let Some(r) = compare_to_oracle(bundle) {
            summary.insert("oracle".into(), r.to_json());
        }
        let path = dir.join("summary.json");
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(io_err(&path))?;
        files.push(path);
    }
    if formats.contains(&Format::Svg) {
        for f in &bundle.figures {
            let path = dir.join(format!("{}.svg", f.name));
            fs::write(&path, &f.svg).map_err(io_err(&path))?;
            files.push(path);
        }
    }
    let manifest = json!({
        "protocol": bundle.protocol().name(),
        "parameters": serde_json::to_value(bundle.config.parameter_table())?,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": bundle.workers,
        "seed": bundle.seed,
        "wall_time_s": bundle.wall_time_s,
        "warnings": bundle.warnings.len(),
        "files": files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect::<Vec<_>>(),
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&path))?;
    files.push(path);
    Ok(files)
}
