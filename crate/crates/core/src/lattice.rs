//! Spinor wavefunctions on a periodic square lattice.
//!
//! Sites are stored row-major by `y` (`index = iy * size_x + ix`). Signed
//! coordinates run over `[-size/2, size/2)`; index `i` maps to `i` below
//! `size/2` and to `i - size` above it.
//!
//! The momentum representation uses `ψ(k) = N^{-1/2} Σ_x e^{+ik·x} ψ(x)`, with
//! the grid `k = 2πn/size` folded to `(-π, π]`.

use std::f64::consts::PI;

use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::spinor::{norm_sqr, Spinor, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice size {size_x}x{size_y} invalid: each side must be even and at least 4")]
    InvalidSize { size_x: usize, size_y: usize },
    #[error("operation requires the {expected:?} representation")]
    WrongRepresentation { expected: Representation },
    #[error("fields live on different lattices")]
    GeometryMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeGeometry {
    size_x: usize,
    size_y: usize,
}

impl LatticeGeometry {
    pub fn new(size_x: usize, size_y: usize) -> Result<Self, LatticeError> {
        let ok = |n: usize| n >= 4 && n.is_multiple_of(2);
        if !ok(size_x) || !ok(size_y) {
            return Err(LatticeError::InvalidSize { size_x, size_y });
        }
        Ok(LatticeGeometry { size_x, size_y })
    }

    pub fn square(size: usize) -> Result<Self, LatticeError> {
        Self::new(size, size)
    }

    pub fn size_x(&self) -> usize {
        self.size_x
    }

    pub fn size_y(&self) -> usize {
        self.size_y
    }

    pub fn len(&self) -> usize {
        self.size_x * self.size_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.size_x + ix
    }

    #[inline]
    pub fn wrap_x(&self, x: i64) -> usize {
        x.rem_euclid(self.size_x as i64) as usize
    }

    #[inline]
    pub fn wrap_y(&self, y: i64) -> usize {
        y.rem_euclid(self.size_y as i64) as usize
    }

    #[inline]
    pub fn signed_x(&self, ix: usize) -> i64 {
        signed_coordinate(ix, self.size_x)
    }

    #[inline]
    pub fn signed_y(&self, iy: usize) -> i64 {
        signed_coordinate(iy, self.size_y)
    }

    pub fn momentum_x(&self, ix: usize) -> f64 {
        grid_momentum(ix, self.size_x)
    }

    pub fn momentum_y(&self, iy: usize) -> f64 {
        grid_momentum(iy, self.size_y)
    }
}

pub(crate) fn signed_coordinate(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// `2πn/size` folded to `(-π, π]`.
pub(crate) fn grid_momentum(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        2.0 * PI * i as f64 / n as f64
    } else {
        2.0 * PI * (i as f64 - n as f64) / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

/// Two-component amplitude field on a periodic lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorField {
    geometry: LatticeGeometry,
    up: Vec<C64>,
    down: Vec<C64>,
    representation: Representation,
}

/// Center of mass in signed lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CenterOfMass {
    pub x: f64,
    pub y: f64,
    /// More than 1% of the probability sits within 2 sites of the periodic
    /// seam opposite the peak, so the unwrapped mean is unreliable.
    pub straddles_seam: bool,
}

impl SpinorField {
    pub fn zeros(geometry: LatticeGeometry, representation: Representation) -> Self {
        let n = geometry.len();
        SpinorField {
            geometry,
            up: vec![C64::new(0.0, 0.0); n],
            down: vec![C64::new(0.0, 0.0); n],
            representation,
        }
    }

    /// A single occupied site in position space.
    pub fn delta(geometry: LatticeGeometry, site: (i64, i64), spin: Spinor) -> Self {
        let mut f = Self::zeros(geometry, Representation::Position);
        f.set(geometry.wrap_x(site.0), geometry.wrap_y(site.1), spin);
        f
    }

    /// Builds a field from a function of the grid indices `(ix, iy)`.
    pub fn from_fn(
        geometry: LatticeGeometry,
        representation: Representation,
        mut f: impl FnMut(usize, usize) -> Spinor,
    ) -> Self {
        let mut out = Self::zeros(geometry, representation);
        for iy in 0..geometry.size_y() {
            for ix in 0..geometry.size_x() {
                let s = f(ix, iy);
                let i = geometry.index(ix, iy);
                out.up[i] = s[0];
                out.down[i] = s[1];
            }
        }
        out
    }

    pub(crate) fn from_parts(
        geometry: LatticeGeometry,
        up: Vec<C64>,
        down: Vec<C64>,
        representation: Representation,
    ) -> Self {
        debug_assert_eq!(up.len(), geometry.len());
        debug_assert_eq!(down.len(), geometry.len());
        SpinorField {
            geometry,
            up,
            down,
            representation,
        }
    }

    pub fn geometry(&self) -> LatticeGeometry {
        self.geometry
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn up(&self) -> &[C64] {
        &self.up
    }

    pub fn down(&self) -> &[C64] {
        &self.down
    }

    pub(crate) fn components_mut(&mut self) -> (&mut [C64], &mut [C64]) {
        (&mut self.up, &mut self.down)
    }

    pub fn get(&self, ix: usize, iy: usize) -> Spinor {
        let i = self.geometry.index(ix, iy);
        [self.up[i], self.down[i]]
    }

    pub fn set(&mut self, ix: usize, iy: usize, s: Spinor) {
        let i = self.geometry.index(ix, iy);
        self.up[i] = s[0];
        self.down[i] = s[1];
    }

    /// Amplitude at signed coordinates (wrapped periodically).
    pub fn at(&self, x: i64, y: i64) -> Spinor {
        self.get(self.geometry.wrap_x(x), self.geometry.wrap_y(y))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for v in self.up.iter_mut().chain(self.down.iter_mut()) {
                *v /= n;
            }
        }
    }

    pub fn scale(&mut self, s: C64) {
        for v in self.up.iter_mut().chain(self.down.iter_mut()) {
            *v *= s;
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SpinorField) -> Result<C64, LatticeError> {
        if self.geometry != other.geometry {
            return Err(LatticeError::GeometryMismatch);
        }
        Ok(self
            .up
            .iter()
            .zip(&other.up)
            .chain(self.down.iter().zip(&other.down))
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest entry-wise amplitude difference.
    pub fn max_abs_diff(&self, other: &SpinorField) -> f64 {
        self.up
            .iter()
            .zip(&other.up)
            .chain(self.down.iter().zip(&other.down))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn require(&self, expected: Representation) -> Result<(), LatticeError> {
        if self.representation != expected {
            return Err(LatticeError::WrongRepresentation { expected });
        }
        Ok(())
    }

    /// Site probabilities `|ψ↑|² + |ψ↓|²` in storage order.
    pub fn probability(&self) -> Vec<f64> {
        self.up
            .iter()
            .zip(&self.down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .collect()
    }

    /// `P(x) = Σ_y P(x, y)`, indexed by the x grid index.
    pub fn marginal_x(&self) -> Result<Vec<f64>, LatticeError> {
        self.require(Representation::Position)?;
        Ok(self.marginal_x_unchecked())
    }

    /// `P(y) = Σ_x P(x, y)`, indexed by the y grid index.
    pub fn marginal_y(&self) -> Result<Vec<f64>, LatticeError> {
        self.require(Representation::Position)?;
        Ok(self.marginal_y_unchecked())
    }

    pub(crate) fn marginal_x_unchecked(&self) -> Vec<f64> {
        let g = self.geometry;
        let mut out = vec![0.0; g.size_x()];
        for iy in 0..g.size_y() {
            for (ix, o) in out.iter_mut().enumerate() {
                let i = g.index(ix, iy);
                *o += self.up[i].norm_sqr() + self.down[i].norm_sqr();
            }
        }
        out
    }

    pub(crate) fn marginal_y_unchecked(&self) -> Vec<f64> {
        let g = self.geometry;
        let mut out = vec![0.0; g.size_y()];
        for (iy, o) in out.iter_mut().enumerate() {
            for ix in 0..g.size_x() {
                let i = g.index(ix, iy);
                *o += self.up[i].norm_sqr() + self.down[i].norm_sqr();
            }
        }
        out
    }

    /// Moment center of mass with coordinates unwrapped around the peak of
    /// each marginal, so the periodic seam does not bias the mean.
    pub fn center_of_mass(&self) -> Result<CenterOfMass, LatticeError> {
        self.require(Representation::Position)?;
        let (x, seam_x) = unwrapped_mean(&self.marginal_x_unchecked());
        let (y, seam_y) = unwrapped_mean(&self.marginal_y_unchecked());
        let straddles_seam = seam_x > 0.01 || seam_y > 0.01;
        if straddles_seam {
            log::warn!(
                "distribution straddles the periodic seam (edge mass x: {seam_x:.3}, y: {seam_y:.3})"
            );
        }
        Ok(CenterOfMass {
            x,
            y,
            straddles_seam,
        })
    }

    /// 2D discrete Fourier transform of each spin component.
    pub fn to_momentum(&self) -> Result<SpinorField, LatticeError> {
        self.require(Representation::Position)?;
        Ok(self.transformed(FftDirection::Inverse, Representation::Momentum))
    }

    /// Inverse of [`SpinorField::to_momentum`].
    pub fn to_position(&self) -> Result<SpinorField, LatticeError> {
        self.require(Representation::Momentum)?;
        Ok(self.transformed(FftDirection::Forward, Representation::Position))
    }

    fn transformed(&self, direction: FftDirection, repr: Representation) -> SpinorField {
        let g = self.geometry;
        let mut planner = FftPlanner::<f64>::new();
        let fx = planner.plan_fft(g.size_x(), direction);
        let fy = planner.plan_fft(g.size_y(), direction);
        let scale = 1.0 / (g.len() as f64).sqrt();
        let mut column = vec![C64::new(0.0, 0.0); g.size_y()];
        let mut transform = |data: &[C64]| -> Vec<C64> {
            let mut out = data.to_vec();
            for row in out.chunks_exact_mut(g.size_x()) {
                fx.process(row);
            }
            for ix in 0..g.size_x() {
                for (iy, c) in column.iter_mut().enumerate() {
                    *c = out[g.index(ix, iy)];
                }
                fy.process(&mut column);
                for (iy, c) in column.iter().enumerate() {
                    out[g.index(ix, iy)] = *c * scale;
                }
            }
            out
        };
        let up = transform(&self.up);
        let down = transform(&self.down);
        SpinorField::from_parts(g, up, down, repr)
    }
}

/// Mean of a periodic histogram in signed coordinates, unwrapped around its
/// peak, plus the mass within 2 sites of the cut opposite the peak.
pub(crate) fn unwrapped_mean(hist: &[f64]) -> (f64, f64) {
    let n = hist.len();
    let half = (n / 2) as i64;
    let peak = hist
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &p)| {
            if p > acc.1 {
                (i, p)
            } else {
                acc
            }
        })
        .0;
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut seam = 0.0;
    for (i, &p) in hist.iter().enumerate() {
        let rel = (i as i64 - peak as i64 + half).rem_euclid(n as i64) - half;
        mass += p;
        first += rel as f64 * p;
        if rel < -half + 2 || rel >= half - 2 {
            seam += p;
        }
    }
    let center = signed_coordinate(peak, n) as f64 + first / mass;
    (center, seam / mass)
}

/// Histogram re-indexed by signed coordinate relative to its peak:
/// returns `(coordinates, values)` sorted by coordinate.
pub(crate) fn unwrapped_histogram(hist: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = hist.len();
    let half = (n / 2) as i64;
    let peak = hist
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (i, &p)| {
            if p > acc.1 {
                (i, p)
            } else {
                acc
            }
        })
        .0;
    let base = signed_coordinate(peak, n);
    let mut pairs: Vec<(i64, f64)> = hist
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let rel = (i as i64 - peak as i64 + half).rem_euclid(n as i64) - half;
            (base + rel, p)
        })
        .collect();
    pairs.sort_by_key(|p| p.0);
    pairs.into_iter().map(|(x, p)| (x as f64, p)).unzip()
}

/// Total spinor norm at a site pair, used by tests and diagnostics.
pub fn site_probability(s: &Spinor) -> f64 {
    norm_sqr(s)
}
