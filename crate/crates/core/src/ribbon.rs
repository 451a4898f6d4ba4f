//! Strip spectra: the walk on a chain of `2W` columns, periodic along y and
//! Fourier transformed there, with θ₂ varying across columns.
//!
//! Each step moves x by −2, 0 or +2, so even and odd columns never mix. Only
//! the even-column sector is diagonalized; the odd sector is its copy.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::bands::{sampled_gaps, BandError};
use crate::lattice::signed_coordinate;
use crate::spinor::{wrap_phase, C64};
use crate::walk::AngleField;

/// Columns on either side of an interface counted as "at" the interface.
pub const LOCALIZATION_RADIUS: f64 = 8.0;
/// Weight within the radius required to call a state interface-localized.
pub const LOCALIZATION_WEIGHT: f64 = 0.9;
/// Widths below this are flagged as unreliable.
pub const MIN_RELIABLE_WIDTH: usize = 16;
const BULK_GAP_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RibbonState {
    pub eps: f64,
    /// Interface index this state is localized at, if any.
    pub interface: Option<usize>,
    /// Largest weight found within the radius of any interface.
    pub interface_weight: f64,
}

/// Spectral flow of interface-localized states through one gap.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceCount {
    /// Position between columns in signed coordinates, e.g. −0.5.
    pub position: f64,
    /// Signed crossings of the reference energy in the gap at 0, as k_y increases.
    pub flow_zero: i64,
    /// Same for the gap at π.
    pub flow_pi: i64,
}

impl InterfaceCount {
    /// Net number of chiral modes, `flow_zero − flow_pi`.
    pub fn net(&self) -> i64 {
        self.flow_zero - self.flow_pi
    }

    /// Sign of the group velocity `v_y = −dε/dk_y` carried by the net flow.
    pub fn velocity_sign(&self) -> i64 {
        -self.net().signum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RibbonSpectrum {
    pub width: usize,
    pub ky: Vec<f64>,
    /// States per k_y sample, sorted by quasienergy.
    pub states: Vec<Vec<RibbonState>>,
    pub counts: Vec<InterfaceCount>,
    /// Reference quasienergies used for counting in the 0 and π gaps.
    pub reference: (f64, f64),
    /// Bulk gaps (around 0 and π) shared by all domains.
    pub bulk_gaps: (f64, f64),
    pub unreliable: bool,
}

impl RibbonSpectrum {
    /// Count at the interface nearest `position`.
    pub fn count_near(&self, position: f64) -> Option<&InterfaceCount> {
        let n = 2 * self.width;
        self.counts.iter().min_by(|a, b| {
            periodic_distance(a.position, position, n)
                .total_cmp(&periodic_distance(b.position, position, n))
        })
    }
}

fn periodic_distance(a: f64, b: f64, n: usize) -> f64 {
    let n = n as f64;
    let d = (a - b).rem_euclid(n);
    d.min(n - d)
}

/// Column pattern with θ₂ = `left` for signed x < 0 and `right` for x ≥ 0 on
/// a chain of `2·width` columns.
pub fn split_chain(width: usize, theta1: f64, left: f64, right: f64) -> AngleField {
    let n = 2 * width;
    AngleField {
        theta1: crate::spinor::fold_angle(theta1),
        theta2_of_x: (0..n)
            .map(|i| {
                if signed_coordinate(i, n) < 0 {
                    crate::spinor::fold_angle(left)
                } else {
                    crate::spinor::fold_angle(right)
                }
            })
            .collect(),
    }
}

/// One step of the walk at fixed k_y on a chain vector laid out as
/// `[up(0), down(0), up(1), down(1), …]` over grid columns.
fn chain_step(v: &mut [C64], scratch: &mut [C64], c1: (f64, f64), c2: &[(f64, f64)], ty: (C64, C64)) {
    let n = c2.len();
    let rot = |v: &mut [C64], i: usize, (c, s): (f64, f64)| {
        let (a, b) = (v[2 * i], v[2 * i + 1]);
        v[2 * i] = a * c - b * s;
        v[2 * i + 1] = a * s + b * c;
    };
    let phase = |v: &mut [C64]| {
        for i in 0..n {
            v[2 * i] *= ty.0;
            v[2 * i + 1] *= ty.1;
        }
    };
    let shift = |v: &mut [C64], scratch: &mut [C64]| {
        for i in 0..n {
            scratch[2 * ((i + 1) % n)] = v[2 * i];
            scratch[2 * ((i + n - 1) % n) + 1] = v[2 * i + 1];
        }
        v.copy_from_slice(scratch);
    };
    for i in 0..n {
        rot(v, i, c1);
    }
    phase(v);
    shift(v, scratch);
    for i in 0..n {
        rot(v, i, c1);
    }
    phase(v);
    for (i, &c) in c2.iter().enumerate() {
        rot(v, i, c);
    }
    shift(v, scratch);
}

/// Step operator restricted to columns of the given parity.
fn sector_matrix(angles: &AngleField, ky: f64, parity: usize) -> DMatrix<C64> {
    let n = angles.theta2_of_x.len();
    let half = |t: f64| {
        let (s, c) = (t / 2.0).sin_cos();
        (c, s)
    };
    let c1 = half(angles.theta1);
    let c2: Vec<(f64, f64)> = angles.theta2_of_x.iter().map(|&t| half(t)).collect();
    let ty = (C64::from_polar(1.0, ky), C64::from_polar(1.0, -ky));
    let cols: Vec<usize> = (0..n).filter(|i| i % 2 == parity).collect();
    let dim = 2 * cols.len();
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    let mut v = vec![C64::new(0.0, 0.0); 2 * n];
    let mut scratch = v.clone();
    for (a, &ca) in cols.iter().enumerate() {
        for s in 0..2 {
            v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            v[2 * ca + s] = C64::new(1.0, 0.0);
            chain_step(&mut v, &mut scratch, c1, &c2, ty);
            for (b, &cb) in cols.iter().enumerate() {
                m[(2 * b, 2 * a + s)] = v[2 * cb];
                m[(2 * b + 1, 2 * a + s)] = v[2 * cb + 1];
            }
        }
    }
    m
}

/// Quasienergies `−arg λ` and orthonormal eigenvectors (columns) of a
/// unitary matrix via complex Schur decomposition.
fn unitary_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let (q, t) = nalgebra::linalg::Schur::new(m).unpack();
    let eps = (0..t.nrows()).map(|i| -t[(i, i)].arg()).collect();
    (eps, q)
}

struct Sample {
    eps: Vec<f64>,
    vecs: DMatrix<C64>,
    label: Vec<Option<usize>>,
    weight: Vec<f64>,
}

fn diagonalize(
    angles: &AngleField,
    ky: f64,
    parity: usize,
    interfaces: &[f64],
) -> Sample {
    let n = angles.theta2_of_x.len();
    let (eps, vecs) = unitary_eigen(sector_matrix(angles, ky, parity));
    let xs: Vec<f64> = (0..n)
        .filter(|i| i % 2 == parity)
        .map(|i| signed_coordinate(i, n) as f64)
        .collect();
    let mut label = Vec::with_capacity(eps.len());
    let mut weight = Vec::with_capacity(eps.len());
    for j in 0..eps.len() {
        let col = vecs.column(j);
        let probs: Vec<f64> = (0..xs.len())
            .map(|a| col[2 * a].norm_sqr() + col[2 * a + 1].norm_sqr())
            .collect();
        let total: f64 = probs.iter().sum();
        let mut best: (Option<usize>, f64) = (None, 0.0);
        for (p, &pos) in interfaces.iter().enumerate() {
            let w: f64 = xs
                .iter()
                .zip(&probs)
                .filter(|(x, _)| periodic_distance(**x, pos, n) < LOCALIZATION_RADIUS)
                .map(|(_, pr)| pr)
                .sum::<f64>()
                / total;
            if w > best.1 {
                best = (Some(p), w);
            }
        }
        label.push(if best.1 >= LOCALIZATION_WEIGHT { best.0 } else { None });
        weight.push(best.1);
    }
    Sample {
        eps,
        vecs,
        label,
        weight,
    }
}

/// Positions (signed, half-integer) where θ₂ changes between neighbouring columns.
pub fn interfaces_of(angles: &AngleField) -> Vec<f64> {
    let n = angles.theta2_of_x.len();
    let mut out: Vec<f64> = (0..n)
        .filter(|&i| angles.theta2_of_x[i] != angles.theta2_of_x[(i + 1) % n])
        .map(|i| signed_coordinate(i, n) as f64 + 0.5)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Spectral flow through `reference` along the closed k_y loop.
fn spectral_flow(samples: &[Sample], reference: f64, window: f64, n_interfaces: usize) -> Vec<i64> {
    let mut flow = vec![0i64; n_interfaces];
    let m = samples.len();
    for s in 0..m {
        let prev = &samples[s];
        let cur = &samples[(s + 1) % m];
        let overlaps = cur.vecs.adjoint() * &prev.vecs;
        for j in 0..prev.eps.len() {
            let pd = wrap_phase(prev.eps[j] - reference);
            let Some(p) = prev.label[j] else { continue };
            if pd.abs() >= window {
                continue;
            }
            let (best, _) = (0..cur.eps.len()).fold((0, -1.0), |acc, i| {
                let o = overlaps[(i, j)].norm();
                if o > acc.1 {
                    (i, o)
                } else {
                    acc
                }
            });
            let d = wrap_phase(cur.eps[best] - reference);
            if (pd < 0.0) != (d < 0.0) && (d - pd).abs() < window {
                flow[p] += if d > pd { 1 } else { -1 };
            }
        }
    }
    flow
}

/// Diagonalizes the strip at `ky_samples` momenta over one period and counts
/// chiral interface modes in both Floquet gaps.
pub fn ribbon_spectrum(
    angles: &AngleField,
    width: usize,
    ky_samples: usize,
) -> Result<RibbonSpectrum, BandError> {
    ribbon_spectrum_sector(angles, width, ky_samples, 0)
}

/// As [`ribbon_spectrum`] for the odd-column sector (`parity = 1`).
pub fn ribbon_spectrum_sector(
    angles: &AngleField,
    width: usize,
    ky_samples: usize,
    parity: usize,
) -> Result<RibbonSpectrum, BandError> {
    if width < 2 || angles.theta2_of_x.len() != 2 * width {
        return Err(BandError::Invalid(format!(
            "ribbon of half-width {width} needs {} columns of angles, got {}",
            2 * width,
            angles.theta2_of_x.len()
        )));
    }
    if ky_samples < 8 {
        return Err(BandError::Invalid(format!(
            "ky_samples {ky_samples} too small (need at least 8)"
        )));
    }
    let unreliable = width < MIN_RELIABLE_WIDTH;
    if unreliable {
        log::warn!("ribbon width {width} < {MIN_RELIABLE_WIDTH}: interface modes may hybridize");
    }

    let mut domains: Vec<f64> = angles.theta2_of_x.clone();
    domains.sort_by(f64::total_cmp);
    domains.dedup();
    let (mut g0, mut gpi) = (f64::INFINITY, f64::INFINITY);
    for &t2 in &domains {
        let g = sampled_gaps(angles.theta1, t2, BULK_GAP_GRID);
        if g.closed() {
            return Err(BandError::GapClosed { gap: g.min() });
        }
        g0 = g0.min(g.zero);
        gpi = gpi.min(g.pi);
    }
    let (h0, hpi) = (g0 / 2.0, gpi / 2.0);
    // Offset from the gap centre: interface modes from opposite edges meet
    // at the centre itself, where they hybridize on a finite strip.
    let reference = (h0 / 3.0, wrap_phase(PI + hpi / 3.0));

    let interfaces = interfaces_of(angles);
    let ky: Vec<f64> = (0..ky_samples)
        .map(|i| -PI / 2.0 + PI * i as f64 / ky_samples as f64)
        .collect();
    use rayon::prelude::*;
    let samples: Vec<Sample> = ky
        .par_iter()
        .map(|&k| diagonalize(angles, k, parity, &interfaces))
        .collect();

    let flow0 = spectral_flow(&samples, reference.0, h0 / 2.0, interfaces.len());
    let flowpi = spectral_flow(&samples, reference.1, hpi / 2.0, interfaces.len());
    let counts = interfaces
        .iter()
        .enumerate()
        .map(|(p, &position)| InterfaceCount {
            position,
            flow_zero: flow0[p],
            flow_pi: flowpi[p],
        })
        .collect();

    let states = samples
        .iter()
        .map(|s| {
            let mut v: Vec<RibbonState> = (0..s.eps.len())
                .map(|j| RibbonState {
                    eps: s.eps[j],
                    interface: s.label[j],
                    interface_weight: s.weight[j],
                })
                .collect();
            v.sort_by(|a, b| a.eps.total_cmp(&b.eps));
            v
        })
        .collect();

    Ok(RibbonSpectrum {
        width,
        ky,
        states,
        counts,
        reference,
        bulk_gaps: (g0, gpi),
        unreliable,
    })
}
