//! Wave-packet Hall transport: opposite-force drift runs, Chern numbers from
//! Bloch oscillations, and Berry-curvature reconstruction.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::bands::{
    bloch_matrix, curvature_path_integral, sampled_gaps, BandError, GAP_CLOSED_TOL,
};
use crate::fit::{fit_gaussian_at, fit_two_gaussians_at, FitError};
use crate::lattice::{unwrapped_histogram, LatticeError, LatticeGeometry, Representation, SpinorField};
use crate::spinor::{inner, su2_eigen, wrap_phase, Mat2, Spinor, C64};
use crate::walk::{evolve, evolve_observed, WalkError, WalkParams};

/// Sub-steps of the straight-line parallel transport fixing eigenspinor phases.
const TRANSPORT_SUBSTEPS: usize = 24;
/// Centre-of-mass correction passes after preparation.
const RECENTER_PASSES: usize = 3;
/// Final band overlap below which a drift run is flagged as leaking.
pub const LEAKAGE_THRESHOLD: f64 = 0.9;
/// Trapezoid points for the path-integral oracle.
pub const ORACLE_SAMPLES: usize = 201;
const GAP_GRID: usize = 64;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("invalid wave packet: {0}")]
    InvalidPacket(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PacketBand {
    Lower,
    Upper,
    /// The same spinor at every momentum.
    FixedSpin(Spinor),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WavePacketSpec {
    pub k_c: (f64, f64),
    /// Standard deviation of the momentum-space probability per axis.
    pub dk: f64,
    pub band: PacketBand,
}

impl WavePacketSpec {
    pub fn lower(k_c: (f64, f64), dk: f64) -> Self {
        WavePacketSpec {
            k_c,
            dk,
            band: PacketBand::Lower,
        }
    }

    pub fn validate(&self, geometry: LatticeGeometry) -> Result<(), TransportError> {
        if !(self.dk > 0.0) || !self.dk.is_finite() {
            return Err(TransportError::InvalidPacket(format!(
                "dk must be positive, got {}",
                self.dk
            )));
        }
        let side = geometry.size_x().min(geometry.size_y()) as f64;
        if 1.0 / self.dk > side / 6.0 {
            return Err(TransportError::InvalidPacket(format!(
                "spatial extent 1/dk = {:.2} exceeds lattice size / 6 = {:.2}",
                1.0 / self.dk,
                side / 6.0
            )));
        }
        Ok(())
    }
}

/// How the x centre of mass of a run is read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Moment mean of the lower-band component.
    ProjectedMoment,
    /// Gaussian fit to the marginal of the lower-band component.
    ProjectedFit,
    /// Moment mean of the full state.
    Moment,
    /// Gaussian fit to the marginal of the full state.
    Fit,
    /// Dominant component of a two-Gaussian fit to the full marginal.
    TwoGaussianFit,
}

impl Readout {
    pub fn name(&self) -> &'static str {
        match self {
            Readout::ProjectedMoment => "projected-moment",
            Readout::ProjectedFit => "projected-fit",
            Readout::Moment => "moment",
            Readout::Fit => "fit",
            Readout::TwoGaussianFit => "two-gaussian-fit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Readout::ProjectedMoment,
            Readout::ProjectedFit,
            Readout::Moment,
            Readout::Fit,
            Readout::TwoGaussianFit,
        ]
        .into_iter()
        .find(|r| r.name() == s)
    }

    fn projected(&self) -> bool {
        matches!(self, Readout::ProjectedMoment | Readout::ProjectedFit)
    }
}

/// Lower-band eigenspinors at every lattice momentum.
#[derive(Clone, Debug)]
pub struct BandTable {
    pub theta: (f64, f64),
    geometry: LatticeGeometry,
    lower: Vec<Spinor>,
}

impl BandTable {
    pub fn new(theta: (f64, f64), geometry: LatticeGeometry) -> Self {
        let nx = geometry.size_x();
        let lower = (0..geometry.len())
            .into_par_iter()
            .map(|i| {
                let (ix, iy) = (i % nx, i / nx);
                su2_eigen(&bloch_matrix(
                    theta.0,
                    theta.1,
                    geometry.momentum_x(ix),
                    geometry.momentum_y(iy),
                ))
                .u_lower
            })
            .collect();
        BandTable {
            theta,
            geometry,
            lower,
        }
    }

    /// Lower-band component of a position-space state.
    pub fn project_lower(&self, state: &SpinorField) -> Result<SpinorField, TransportError> {
        let mut k = state.to_momentum()?;
        let (up, down) = k.components_mut();
        for ((u, d), l) in up.iter_mut().zip(down.iter_mut()).zip(&self.lower) {
            let a = inner(l, &[*u, *d]);
            *u = l[0] * a;
            *d = l[1] * a;
        }
        Ok(k.to_position()?)
    }

    /// Weight of a state (either representation) in the lower band.
    pub fn lower_overlap(&self, state: &SpinorField) -> Result<f64, TransportError> {
        let k = match state.representation() {
            Representation::Position => state.to_momentum()?,
            Representation::Momentum => state.clone(),
        };
        let total = k.norm_sqr();
        let w: f64 = k
            .up()
            .iter()
            .zip(k.down())
            .zip(&self.lower)
            .map(|((u, d), l)| inner(l, &[*u, *d]).norm_sqr())
            .sum();
        Ok(w / total)
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }
}

fn require_gapped(theta: (f64, f64)) -> Result<(), TransportError> {
    let g = sampled_gaps(theta.0, theta.1, GAP_GRID);
    if g.closed() {
        return Err(BandError::GapClosed { gap: g.min() }.into());
    }
    Ok(())
}

fn band_spinor(theta: (f64, f64), kx: f64, ky: f64, band: PacketBand) -> Spinor {
    let e = su2_eigen(&bloch_matrix(theta.0, theta.1, kx, ky));
    match band {
        PacketBand::Upper => e.u_upper,
        _ => e.u_lower,
    }
}

/// Gaussian packet built in momentum space, centred at the origin in
/// position space.
///
/// Band eigenspinor phases follow parallel transport along the straight
/// line from `k_c`, giving a gauge that is smooth across the envelope.
pub fn prepare_wavepacket(
    theta: (f64, f64),
    spec: &WavePacketSpec,
    geometry: LatticeGeometry,
) -> Result<SpinorField, TransportError> {
    spec.validate(geometry)?;
    if !matches!(spec.band, PacketBand::FixedSpin(_)) {
        require_gapped(theta)?;
    }
    let (kxc, kyc) = spec.k_c;
    let nx = geometry.size_x();
    let amp: Vec<Spinor> = (0..geometry.len())
        .into_par_iter()
        .map(|i| {
            let (ix, iy) = (i % nx, i / nx);
            let dx = wrap_phase(geometry.momentum_x(ix) - kxc);
            let dy = wrap_phase(geometry.momentum_y(iy) - kyc);
            let env = (-(dx * dx + dy * dy) / (4.0 * spec.dk * spec.dk)).exp();
            let u = match spec.band {
                PacketBand::FixedSpin(s) => crate::spinor::normalized(s),
                band => {
                    let mut u = band_spinor(theta, kxc, kyc, band);
                    let m = TRANSPORT_SUBSTEPS as f64;
                    for s in 1..=TRANSPORT_SUBSTEPS {
                        let f = s as f64 / m;
                        let v = band_spinor(theta, kxc + dx * f, kyc + dy * f, band);
                        let ov = inner(&v, &u);
                        let n = ov.norm();
                        let ph = if n > 1e-300 { ov / n } else { C64::new(1.0, 0.0) };
                        u = [v[0] * ph, v[1] * ph];
                    }
                    u
                }
            };
            [u[0] * env, u[1] * env]
        })
        .collect();
    let phi = SpinorField::from_fn(geometry, Representation::Momentum, |ix, iy| {
        amp[geometry.index(ix, iy)]
    });
    let mut psi = phi.to_position()?;
    psi.normalize();
    for _ in 0..RECENTER_PASSES {
        let c = psi.center_of_mass()?;
        let mut k = psi.to_momentum()?;
        let (up, down) = k.components_mut();
        for iy in 0..geometry.size_y() {
            for ix in 0..nx {
                let i = geometry.index(ix, iy);
                let ph = C64::from_polar(
                    1.0,
                    -(geometry.momentum_x(ix) * c.x + geometry.momentum_y(iy) * c.y),
                );
                up[i] *= ph;
                down[i] *= ph;
            }
        }
        psi = k.to_position()?;
    }
    Ok(psi)
}

/// Mean and standard deviation of the momentum distribution per axis,
/// measured as offsets from `about` folded to `(−π, π]`.
pub fn momentum_moments(
    state: &SpinorField,
    about: (f64, f64),
) -> Result<((f64, f64), (f64, f64)), TransportError> {
    let k = match state.representation() {
        Representation::Position => state.to_momentum()?,
        Representation::Momentum => state.clone(),
    };
    let g = k.geometry();
    let p = k.probability();
    let (mut m, mut mx, mut my, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for iy in 0..g.size_y() {
        for ix in 0..g.size_x() {
            let w = p[g.index(ix, iy)];
            let dx = wrap_phase(g.momentum_x(ix) - about.0);
            let dy = wrap_phase(g.momentum_y(iy) - about.1);
            m += w;
            mx += w * dx;
            my += w * dy;
            sx += w * dx * dx;
            sy += w * dy * dy;
        }
    }
    let (mx, my) = (mx / m, my / m);
    let sd = ((sx / m - mx * mx).sqrt(), (sy / m - my * my).sqrt());
    Ok(((about.0 + mx, about.1 + my), sd))
}

/// x centre of mass under the given readout.
pub fn read_x(
    state: &SpinorField,
    table: &BandTable,
    readout: Readout,
) -> Result<f64, TransportError> {
    let s = if readout.projected() {
        table.project_lower(state)?
    } else {
        state.clone()
    };
    match readout {
        Readout::ProjectedMoment | Readout::Moment => Ok(s.center_of_mass()?.x),
        Readout::ProjectedFit | Readout::Fit => {
            let (xs, ys) = unwrapped_histogram(&s.marginal_x()?);
            Ok(fit_gaussian_at(&xs, &ys)?.center)
        }
        Readout::TwoGaussianFit => {
            let (xs, ys) = unwrapped_histogram(&s.marginal_x()?);
            Ok(fit_two_gaussians_at(&xs, &ys)?.dominant().center)
        }
    }
}

/// Result of a pair of opposite-force runs.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftRecord {
    pub k_c: (f64, f64),
    /// x displacement under +F.
    pub x_plus: f64,
    /// x displacement under −F.
    pub x_minus: f64,
    /// `(x_plus − x_minus) / 2`.
    pub lambda: f64,
    /// Smaller of the two final lower-band overlaps.
    pub band_overlap: f64,
    pub readout: Readout,
    /// Λ from the projected moment readout, for comparison.
    pub lambda_moment: f64,
    /// Λ from the projected Gaussian-fit readout, if the fits converged.
    pub lambda_fit: Option<f64>,
    pub leakage_warning: bool,
}

/// A ±F drive: `steps` steps with the force active on the first `force_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive {
    pub force: f64,
    pub steps: usize,
    pub force_steps: usize,
}

impl Drive {
    pub fn validate(&self) -> Result<(), TransportError> {
        if self.force_steps > self.steps {
            return Err(TransportError::InvalidDrive(format!(
                "force_steps {} exceeds steps {}",
                self.force_steps, self.steps
            )));
        }
        if self.force.abs() * self.force_steps as f64 > PI * (1.0 + 1e-12) {
            return Err(TransportError::InvalidDrive(format!(
                "|F| * force_steps = {:.4} exceeds pi",
                self.force.abs() * self.force_steps as f64
            )));
        }
        Ok(())
    }

    /// Momentum span `F · force_steps`.
    pub fn span(&self) -> f64 {
        self.force * self.force_steps as f64
    }

    fn params(&self, theta: (f64, f64), sign: f64) -> Result<WalkParams, TransportError> {
        Ok(
            WalkParams::new(theta.0, theta.1, sign * self.force, self.steps)
                .with_force_window(0..self.force_steps)?,
        )
    }
}

/// Runs the +F packet from `k_c` and the −F packet from `k_c + F·force_steps`
/// and reads the x displacements.
pub fn hall_drift(
    theta: (f64, f64),
    spec: &WavePacketSpec,
    drive: Drive,
    table: &BandTable,
    readout: Readout,
) -> Result<DriftRecord, TransportError> {
    drive.validate()?;
    let geometry = table.geometry();
    let mut minus_spec = *spec;
    minus_spec.k_c.1 += drive.span();

    let run = |spec: &WavePacketSpec, sign: f64| -> Result<Run, TransportError> {
        let start = prepare_wavepacket(theta, spec, geometry)?;
        let end = evolve(&start, &drive.params(theta, sign)?)?;
        measure_run(&start, &end, table, readout)
    };
    let plus = run(spec, 1.0)?;
    let minus = run(&minus_spec, -1.0)?;

    let band_overlap = plus.overlap.min(minus.overlap);
    let leakage_warning = band_overlap < LEAKAGE_THRESHOLD;
    if leakage_warning {
        log::warn!(
            "band overlap {:.3} at k_c = ({:.4}, {:.4}): interband leakage",
            band_overlap,
            spec.k_c.0,
            spec.k_c.1
        );
    }
    let lambda_fit = match (plus.fit, minus.fit) {
        (Some(a), Some(b)) => Some((a - b) / 2.0),
        _ => None,
    };
    Ok(DriftRecord {
        k_c: spec.k_c,
        x_plus: plus.dx,
        x_minus: minus.dx,
        lambda: (plus.dx - minus.dx) / 2.0,
        band_overlap,
        readout,
        lambda_moment: (plus.moment - minus.moment) / 2.0,
        lambda_fit,
        leakage_warning,
    })
}

struct Run {
    dx: f64,
    moment: f64,
    fit: Option<f64>,
    overlap: f64,
}

fn measure_run(
    start: &SpinorField,
    end: &SpinorField,
    table: &BandTable,
    readout: Readout,
) -> Result<Run, TransportError> {
    let p0 = table.project_lower(start)?;
    let p1 = table.project_lower(end)?;
    let moment = p1.center_of_mass()?.x - p0.center_of_mass()?.x;
    let fit_x = |s: &SpinorField| -> Result<f64, TransportError> {
        let (xs, ys) = unwrapped_histogram(&s.marginal_x()?);
        Ok(fit_gaussian_at(&xs, &ys)?.center)
    };
    let fit = match (fit_x(&p1), fit_x(&p0)) {
        (Ok(a), Ok(b)) => Some(a - b),
        _ => None,
    };
    let dx = match readout {
        Readout::ProjectedMoment => moment,
        Readout::ProjectedFit => fit.ok_or(FitError::NoConvergence(crate::fit::MAX_ITERATIONS))?,
        other => read_x(end, table, other)? - read_x(start, table, other)?,
    };
    Ok(Run {
        dx,
        moment,
        fit,
        overlap: table.lower_overlap(end)?,
    })
}

/// Midpoints `−π/2 + (j + ½)·π/n` of `n` cells spanning the reduced zone.
pub fn midpoints(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -PI / 2.0 + (j as f64 + 0.5) * PI / n as f64)
        .collect()
}

/// Common settings of the packet experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketExperiment {
    pub theta: (f64, f64),
    pub geometry: LatticeGeometry,
    pub dk: f64,
    pub readout: Readout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochChern {
    pub records: Vec<DriftRecord>,
    /// Column integral `∫ Ω dk_y` over the full zone at each k_x.
    pub oracle: Vec<f64>,
    pub chern: f64,
}

/// Chern number from full-zone Bloch-oscillation drives at `n_kx` columns:
/// `C = (1/2π) Σ Λ(k_x) · π/n_kx`.
pub fn chern_bloch_oscillation(
    exp: &PacketExperiment,
    n_kx: usize,
    force: f64,
    steps: usize,
    k_yc: f64,
) -> Result<BlochChern, TransportError> {
    if n_kx == 0 {
        return Err(TransportError::InvalidDrive("n_kx must be positive".into()));
    }
    if ((force * steps as f64).abs() - PI).abs() > 1e-9 {
        return Err(TransportError::InvalidDrive(format!(
            "F * steps = {:.6} must equal pi for a full-zone drive",
            force * steps as f64
        )));
    }
    let drive = Drive {
        force,
        steps,
        force_steps: steps,
    };
    let table = BandTable::new(exp.theta, exp.geometry);
    let kxs = midpoints(n_kx);
    let results: Vec<Result<(DriftRecord, f64), TransportError>> = kxs
        .par_iter()
        .map(|&kx| {
            let spec = WavePacketSpec::lower((kx, k_yc), exp.dk);
            let rec = hall_drift(exp.theta, &spec, drive, &table, exp.readout)?;
            let oracle =
                curvature_path_integral(exp.theta.0, exp.theta.1, (kx, k_yc), PI, ORACLE_SAMPLES)?;
            Ok((rec, oracle))
        })
        .collect();
    let mut records = Vec::with_capacity(n_kx);
    let mut oracle = Vec::with_capacity(n_kx);
    for r in results {
        let (rec, o) = r?;
        records.push(rec);
        oracle.push(o);
    }
    let chern = records.iter().map(|r| r.lambda).sum::<f64>() * (PI / n_kx as f64) / (2.0 * PI);
    Ok(BlochChern {
        records,
        oracle,
        chern,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvaturePoint {
    pub k_c: (f64, f64),
    pub record: DriftRecord,
    /// `Λ / (F · force_steps)`.
    pub omega_measured: f64,
    /// Mean spectral curvature along the driven segment.
    pub omega_oracle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub n: usize,
    /// Row-major by k_x, then k_y.
    pub points: Vec<CurvaturePoint>,
    /// `Σ ω · (π/n)² / 2π`.
    pub chern_transport: f64,
    /// Mean `|ω_measured − ω_oracle|`.
    pub mean_abs_deviation: f64,
    /// Indices of points whose runs leaked out of the band.
    pub leakage: Vec<usize>,
}

/// Measures the path-averaged curvature at `n × n` cell midpoints.
pub fn reconstruct_curvature(
    exp: &PacketExperiment,
    n: usize,
    drive: Drive,
) -> Result<ReconstructionResult, TransportError> {
    drive.validate()?;
    if n == 0 || drive.span() == 0.0 {
        return Err(TransportError::InvalidDrive(
            "reconstruction needs a nonzero grid and F * force_steps".into(),
        ));
    }
    let table = BandTable::new(exp.theta, exp.geometry);
    let ks = midpoints(n);
    let span = drive.span();
    let results: Vec<Result<CurvaturePoint, TransportError>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let k_c = (ks[idx / n], ks[idx % n]);
            let spec = WavePacketSpec::lower(k_c, exp.dk);
            let record = hall_drift(exp.theta, &spec, drive, &table, exp.readout)?;
            let (lo, len) = if span > 0.0 {
                (k_c, span)
            } else {
                ((k_c.0, k_c.1 + span), -span)
            };
            let integral =
                curvature_path_integral(exp.theta.0, exp.theta.1, lo, len, ORACLE_SAMPLES)?;
            Ok(CurvaturePoint {
                k_c,
                omega_measured: record.lambda / span,
                omega_oracle: integral / len,
                record,
            })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_reconstruction(n, points))
}

/// Aggregates per-point curvature into the Chern number and deviation.
pub fn summarize_reconstruction(n: usize, points: Vec<CurvaturePoint>) -> ReconstructionResult {
    let cell = (PI / n as f64).powi(2);
    let chern_transport = points.iter().map(|p| p.omega_measured).sum::<f64>() * cell / (2.0 * PI);
    let mean_abs_deviation = points
        .iter()
        .map(|p| (p.omega_measured - p.omega_oracle).abs())
        .sum::<f64>()
        / points.len().max(1) as f64;
    let leakage = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.record.leakage_warning)
        .map(|(i, _)| i)
        .collect();
    ReconstructionResult {
        n,
        points,
        chern_transport,
        mean_abs_deviation,
        leakage,
    }
}

/// y centre of mass at t = 0, 1, …, steps of a forced packet.
pub fn bloch_recurrence(
    theta: (f64, f64),
    spec: &WavePacketSpec,
    force: f64,
    steps: usize,
    geometry: LatticeGeometry,
) -> Result<Vec<f64>, TransportError> {
    let start = prepare_wavepacket(theta, spec, geometry)?;
    let params = WalkParams::new(theta.0, theta.1, force, steps);
    let mut ys = vec![start.center_of_mass()?.y];
    let mut err = None;
    evolve_observed(&start, &params, |_, s| match s.center_of_mass() {
        Ok(c) => ys.push(c.y),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e.into());
    }
    Ok(ys)
}

/// Ordered product `U(k_y + m_last) ⋯ U(k_y + m_first)` at fixed k_x.
fn propagator(theta: (f64, f64), kx: f64, ky: f64, offsets: &[f64]) -> Mat2 {
    offsets.iter().fold(Mat2::identity(), |acc, m| {
        bloch_matrix(theta.0, theta.1, kx, ky + m) * acc
    })
}

/// Exact x displacement of a lower-band plane wave at `(kx, ky + offsets[0])`
/// whose momentum visits `ky + offsets[t]` at step t: `⟨u|V† (−i∂_kx V)|u⟩`.
pub fn plane_wave_drift(theta: (f64, f64), kx: f64, ky: f64, offsets: &[f64]) -> f64 {
    let h = 1e-5;
    let first = offsets.first().copied().unwrap_or(0.0);
    let u = su2_eigen(&bloch_matrix(theta.0, theta.1, kx, ky + first)).u_lower;
    let v0 = propagator(theta, kx, ky, offsets).apply(&u);
    let vp = propagator(theta, kx + h, ky, offsets).apply(&u);
    let vm = propagator(theta, kx - h, ky, offsets).apply(&u);
    let dv = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
    let minus_i = C64::new(0.0, -1.0);
    inner(&v0, &[dv[0] * minus_i, dv[1] * minus_i]).re
}

/// Momentum offsets visited at each step of a run.
pub fn visited_offsets(drive: Drive, sign: f64) -> Vec<f64> {
    (0..drive.steps)
        .map(|t| sign * drive.force * t.min(drive.force_steps) as f64)
        .collect()
}

/// Λ of the ±F protocol in the narrow-packet limit, from exact plane-wave drifts.
pub fn plane_wave_lambda(theta: (f64, f64), k_c: (f64, f64), drive: Drive) -> f64 {
    let plus = plane_wave_drift(theta, k_c.0, k_c.1, &visited_offsets(drive, 1.0));
    let start = k_c.1 + drive.span();
    let minus = plane_wave_drift(theta, k_c.0, start, &visited_offsets(drive, -1.0));
    (plus - minus) / 2.0
}

/// Mean `|Λ/span − ω_oracle|` over `n × n` midpoints in the plane-wave limit.
pub fn plane_wave_mean_deviation(
    theta: (f64, f64),
    n: usize,
    drive: Drive,
) -> Result<f64, TransportError> {
    let ks = midpoints(n);
    let span = drive.span();
    let devs: Vec<Result<f64, TransportError>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let k_c = (ks[idx / n], ks[idx % n]);
            let lam = plane_wave_lambda(theta, k_c, drive);
            let oracle = curvature_path_integral(theta.0, theta.1, k_c, span, ORACLE_SAMPLES)? / span;
            Ok((lam / span - oracle).abs())
        })
        .collect();
    let devs = devs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(devs.iter().sum::<f64>() / devs.len() as f64)
}

/// Whether a parameter pair has an open gap on the sampled zone.
pub fn is_gapped(theta: (f64, f64)) -> bool {
    sampled_gaps(theta.0, theta.1, GAP_GRID).min() >= GAP_CLOSED_TOL
}
