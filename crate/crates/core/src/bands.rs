//! Momentum-space step operator, quasienergy bands, Berry curvature and
//! Chern numbers.
//!
//! Each axis is translated twice per step, so `U(k)` has period π in both
//! components and the Brillouin zone is `[−π/2, π/2)²` with area π².

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::spinor::{inner, su2_eigen, Mat2, Spinor, C64};
use crate::walk::spin_rotation;

/// Gaps below this are treated as closed.
pub const GAP_CLOSED_TOL: f64 = 1e-6;
/// Side of the small plaquette used for curvature at an arbitrary momentum.
pub const LOCAL_PLAQUETTE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("BZ grid {nx}x{ny} too coarse (need at least 8x8)")]
    GridTooSmall { nx: usize, ny: usize },
    #[error("band gap closed (gap {gap:.3e}); single-band curvature undefined")]
    GapClosed { gap: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    Lower,
    Upper,
}

/// `diag(e^{+ik}, e^{−ik})`.
pub fn translation_phase(k: f64) -> Mat2 {
    Mat2::diag(C64::from_polar(1.0, k), C64::from_polar(1.0, -k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochOperator {
    pub k: (f64, f64),
    pub matrix: Mat2,
}

/// `T_x R(θ₂) T_y R(θ₁) T_x T_y R(θ₁)` at momentum `k`.
pub fn bloch_operator(theta1: f64, theta2: f64, k: (f64, f64)) -> BlochOperator {
    BlochOperator {
        k,
        matrix: bloch_matrix(theta1, theta2, k.0, k.1),
    }
}

#[inline]
pub fn bloch_matrix(theta1: f64, theta2: f64, kx: f64, ky: f64) -> Mat2 {
    let r1 = spin_rotation(theta1);
    let r2 = spin_rotation(theta2);
    let tx = translation_phase(kx);
    let ty = translation_phase(ky);
    tx * r2 * ty * r1 * tx * ty * r1
}

/// Lower or upper eigenspinor and quasienergy at `k`.
pub fn band_state(theta1: f64, theta2: f64, kx: f64, ky: f64, band: Band) -> (f64, Spinor) {
    let e = su2_eigen(&bloch_matrix(theta1, theta2, kx, ky));
    match band {
        Band::Lower => (e.eps_lower, e.u_lower),
        Band::Upper => (e.eps_upper, e.u_upper),
    }
}

/// Lower-band quasienergy in `[−π, 0]`.
pub fn lower_quasienergy(theta1: f64, theta2: f64, kx: f64, ky: f64) -> f64 {
    su2_eigen(&bloch_matrix(theta1, theta2, kx, ky)).eps_lower
}

/// Regular grid over the reduced BZ with points `−π/2 + i·π/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BzGrid {
    pub nx: usize,
    pub ny: usize,
}

impl BzGrid {
    pub fn new(nx: usize, ny: usize) -> Result<Self, BandError> {
        if nx < 8 || ny < 8 {
            return Err(BandError::GridTooSmall { nx, ny });
        }
        Ok(BzGrid { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self, BandError> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kx(&self, i: usize) -> f64 {
        -PI / 2.0 + i as f64 * PI / self.nx as f64
    }

    pub fn ky(&self, j: usize) -> f64 {
        -PI / 2.0 + j as f64 * PI / self.ny as f64
    }

    /// Row-major by `kx`: `index = i * ny + j`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    pub fn cell_area(&self) -> f64 {
        PI * PI / self.len() as f64
    }
}

/// Gap sizes of a spectrum, respecting the Floquet-zone wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaps {
    /// `2 min |ε|`, the gap around quasienergy 0.
    pub zero: f64,
    /// `2 min (π − |ε|)`, the gap around quasienergy π.
    pub pi: f64,
}

impl Gaps {
    pub fn min(&self) -> f64 {
        self.zero.min(self.pi)
    }

    pub fn closed(&self) -> bool {
        self.min() < GAP_CLOSED_TOL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BandSolution {
    pub theta: (f64, f64),
    pub grid: BzGrid,
    pub eps_lower: Vec<f64>,
    pub eps_upper: Vec<f64>,
    pub u_lower: Vec<Spinor>,
    pub u_upper: Vec<Spinor>,
    /// Gap around quasienergy 0.
    pub gap: f64,
    /// Gap around quasienergy π.
    pub gap_pi: f64,
    pub gap_closed: bool,
}

impl BandSolution {
    pub fn gaps(&self) -> Gaps {
        Gaps {
            zero: self.gap,
            pi: self.gap_pi,
        }
    }

    pub fn states(&self, band: Band) -> &[Spinor] {
        match band {
            Band::Lower => &self.u_lower,
            Band::Upper => &self.u_upper,
        }
    }
}

/// Diagonalizes `U(k)` on every grid point.
pub fn band_solve(theta1: f64, theta2: f64, grid: BzGrid) -> Result<BandSolution, BandError> {
    BzGrid::new(grid.nx, grid.ny)?;
    let rows: Vec<Vec<(f64, f64, Spinor, Spinor)>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            (0..grid.ny)
                .map(|j| {
                    let e = su2_eigen(&bloch_matrix(theta1, theta2, grid.kx(i), grid.ky(j)));
                    (e.eps_lower, e.eps_upper, e.u_lower, e.u_upper)
                })
                .collect()
        })
        .collect();
    let n = grid.len();
    let mut sol = BandSolution {
        theta: (theta1, theta2),
        grid,
        eps_lower: Vec::with_capacity(n),
        eps_upper: Vec::with_capacity(n),
        u_lower: Vec::with_capacity(n),
        u_upper: Vec::with_capacity(n),
        gap: 0.0,
        gap_pi: 0.0,
        gap_closed: false,
    };
    for (el, eu, ul, uu) in rows.into_iter().flatten() {
        sol.eps_lower.push(el);
        sol.eps_upper.push(eu);
        sol.u_lower.push(ul);
        sol.u_upper.push(uu);
    }
    let gaps = gaps_of(&sol.eps_upper);
    sol.gap = gaps.zero;
    sol.gap_pi = gaps.pi;
    sol.gap_closed = gaps.closed();
    if sol.gap_closed {
        log::warn!(
            "gap closed at theta = ({:.4}, {:.4}): zero gap {:.3e}, pi gap {:.3e}",
            theta1,
            theta2,
            gaps.zero,
            gaps.pi
        );
    }
    Ok(sol)
}

/// Gaps from the nonnegative branch `ε ∈ [0, π]`.
pub fn gaps_of(eps_upper: &[f64]) -> Gaps {
    let min_e = eps_upper.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_e = eps_upper.iter().cloned().fold(0.0, f64::max);
    Gaps {
        zero: 2.0 * min_e,
        pi: 2.0 * (PI - max_e),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureMap {
    pub grid: BzGrid,
    pub band: Band,
    /// Curvature per plaquette, indexed by its lower-left corner.
    pub omega: Vec<f64>,
    pub chern: f64,
}

impl CurvatureMap {
    /// Chern number rounded to the nearest integer.
    pub fn chern_integer(&self) -> i64 {
        self.chern.round() as i64
    }
}

/// `−arg(⟨a|b⟩⟨b|c⟩⟨c|d⟩⟨d|a⟩)` for the loop a→b→c→d.
#[inline]
pub fn plaquette_phase(a: &Spinor, b: &Spinor, c: &Spinor, d: &Spinor) -> f64 {
    -(inner(a, b) * inner(b, c) * inner(c, d) * inner(d, a)).arg()
}

/// Lower-band curvature from link overlaps around each grid plaquette.
pub fn curvature_plaquette(bands: &BandSolution) -> Result<CurvatureMap, BandError> {
    curvature_plaquette_band(bands, Band::Lower)
}

pub fn curvature_plaquette_band(
    bands: &BandSolution,
    band: Band,
) -> Result<CurvatureMap, BandError> {
    if bands.gap_closed {
        return Err(BandError::GapClosed {
            gap: bands.gaps().min(),
        });
    }
    Ok(curvature_from_states(bands.grid, bands.states(band), band))
}

/// Plaquette curvature for an arbitrary periodic field of states.
pub fn curvature_from_states(grid: BzGrid, states: &[Spinor], band: Band) -> CurvatureMap {
    let (nx, ny) = (grid.nx, grid.ny);
    let area = grid.cell_area();
    let phases: Vec<f64> = (0..nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let i1 = (i + 1) % nx;
            (0..ny).map(move |j| {
                let j1 = (j + 1) % ny;
                plaquette_phase(
                    &states[grid.index(i, j)],
                    &states[grid.index(i1, j)],
                    &states[grid.index(i1, j1)],
                    &states[grid.index(i, j1)],
                )
            })
        })
        .collect();
    let chern = phases.iter().sum::<f64>() / (2.0 * PI);
    CurvatureMap {
        grid,
        band,
        omega: phases.into_iter().map(|p| p / area).collect(),
        chern,
    }
}

/// Curvature at an arbitrary momentum from a small plaquette centred on it.
pub fn curvature_at(theta1: f64, theta2: f64, kx: f64, ky: f64, band: Band) -> f64 {
    let h = LOCAL_PLAQUETTE;
    let s = |dx: f64, dy: f64| band_state(theta1, theta2, kx + dx, ky + dy, band).1;
    let a = s(-h / 2.0, -h / 2.0);
    let b = s(h / 2.0, -h / 2.0);
    let c = s(h / 2.0, h / 2.0);
    let d = s(-h / 2.0, h / 2.0);
    plaquette_phase(&a, &b, &c, &d) / (h * h)
}

/// Gap of the spectrum sampled on a square grid of `n × n` points.
pub fn sampled_gaps(theta1: f64, theta2: f64, n: usize) -> Gaps {
    let eps: Vec<f64> = (0..n * n)
        .map(|idx| {
            let kx = -PI / 2.0 + (idx / n) as f64 * PI / n as f64;
            let ky = -PI / 2.0 + (idx % n) as f64 * PI / n as f64;
            su2_eigen(&bloch_matrix(theta1, theta2, kx, ky)).eps_upper
        })
        .collect();
    gaps_of(&eps)
}

/// `∫ Ω_lower(k_xc, k_y) dk_y` over `[k_yc, k_yc + span]` by the trapezoid
/// rule on `samples` points.
pub fn curvature_path_integral(
    theta1: f64,
    theta2: f64,
    k_c: (f64, f64),
    span: f64,
    samples: usize,
) -> Result<f64, BandError> {
    if !(span > 0.0) || samples < 2 {
        return Err(BandError::Invalid(format!(
            "span {span} must be positive and samples {samples} at least 2"
        )));
    }
    let dk = span / (samples - 1) as f64;
    let mut total = 0.0;
    let mut min_gap = f64::INFINITY;
    for s in 0..samples {
        let ky = k_c.1 + s as f64 * dk;
        let e = su2_eigen(&bloch_matrix(theta1, theta2, k_c.0, ky)).eps_upper;
        min_gap = min_gap.min(2.0 * e).min(2.0 * (PI - e));
        let w = if s == 0 || s == samples - 1 { 0.5 } else { 1.0 };
        total += w * curvature_at(theta1, theta2, k_c.0, ky, Band::Lower);
    }
    if min_gap < GAP_CLOSED_TOL {
        return Err(BandError::GapClosed { gap: min_gap });
    }
    Ok(total * dk)
}

/// Path integral divided by its span: the mean curvature along the segment.
pub fn curvature_path_average(
    theta1: f64,
    theta2: f64,
    k_c: (f64, f64),
    span: f64,
    samples: usize,
) -> Result<f64, BandError> {
    Ok(curvature_path_integral(theta1, theta2, k_c, span, samples)? / span)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseCell {
    Chern(i64),
    /// Gap closed at the sample point.
    Boundary,
}

/// Lower-band Chern number over a grid of `(θ₁, θ₂)` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDiagram {
    /// Sample angle of each cell (its upper edge), for θ₁ and θ₂ alike.
    pub samples: Vec<f64>,
    /// Row-major by θ₁.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Cell `(a, b]` holding `theta`, after folding to `(−π, π]`.
    pub fn cell_index(&self, theta: f64) -> usize {
        cell_index(self.n(), theta)
    }

    pub fn at(&self, theta1: f64, theta2: f64) -> PhaseCell {
        let (i, j) = (self.cell_index(theta1), self.cell_index(theta2));
        self.cells[i * self.n() + j]
    }
}

/// Upper edges `−π + (i+1)·2π/n` of `n` cells tiling `(−π, π]`.
pub fn theta_samples(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -PI + (i + 1) as f64 * 2.0 * PI / n as f64)
        .collect()
}

fn cell_index(n: usize, theta: f64) -> usize {
    let t = crate::spinor::fold_angle(theta);
    let w = 2.0 * PI / n as f64;
    // Cells are (−π + i w, −π + (i+1) w]; nudge so exact edges land in the lower cell.
    let x = (t + PI) / w - 1e-9;
    (x.ceil() as i64 - 1).clamp(0, n as i64 - 1) as usize
}

/// Chern number of each `(θ₁, θ₂)` cell evaluated at its sample point on a
/// `chern_grid × chern_grid` BZ grid.
pub fn phase_diagram(n_theta: usize, chern_grid: usize) -> Result<PhaseDiagram, BandError> {
    if n_theta == 0 {
        return Err(BandError::Invalid("phase diagram needs at least one cell".into()));
    }
    let grid = BzGrid::square(chern_grid)?;
    let samples = theta_samples(n_theta);
    let cells: Vec<PhaseCell> = (0..n_theta * n_theta)
        .into_par_iter()
        .map(|idx| {
            let (t1, t2) = (samples[idx / n_theta], samples[idx % n_theta]);
            let e = band_states_quiet(t1, t2, grid);
            if e.1.closed() {
                PhaseCell::Boundary
            } else {
                let c = curvature_from_states(grid, &e.0, Band::Lower).chern;
                PhaseCell::Chern(c.round() as i64)
            }
        })
        .collect();
    Ok(PhaseDiagram { samples, cells })
}

/// Lower-band states and gaps without the gap-closed warning.
fn band_states_quiet(theta1: f64, theta2: f64, grid: BzGrid) -> (Vec<Spinor>, Gaps) {
    let mut states = Vec::with_capacity(grid.len());
    let mut eps = Vec::with_capacity(grid.len());
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let e = su2_eigen(&bloch_matrix(theta1, theta2, grid.kx(i), grid.ky(j)));
            states.push(e.u_lower);
            eps.push(e.eps_upper);
        }
    }
    (states, gaps_of(&eps))
}

/// Spectral Chern number of the lower band on an `n × n` grid.
pub fn spectral_chern(theta1: f64, theta2: f64, n: usize) -> Result<f64, BandError> {
    let bands = band_solve(theta1, theta2, BzGrid::square(n)?)?;
    Ok(curvature_plaquette(&bands)?.chern)
}
