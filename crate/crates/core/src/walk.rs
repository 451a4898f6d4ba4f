//! The split-step walk `T_x R(θ₂) T_y R(θ₁) T_xy R(θ₁)` in position space,
//! with an optional synthetic force along y and column-dependent θ₂.

use std::ops::Range;

use thiserror::Error;

use crate::lattice::{LatticeError, LatticeGeometry, Representation, SpinorField};
use crate::spinor::{fold_angle, Mat2, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("angle field has {got} columns but the lattice has {expected}")]
    AngleFieldMismatch { expected: usize, got: usize },
    #[error("force window {start}..{end} exceeds {steps} steps")]
    ForceWindow {
        start: usize,
        end: usize,
        steps: usize,
    },
}

/// `exp(−i θ σ_y / 2)`.
pub fn spin_rotation(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    Mat2([
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    /// `T_x` directly after `T_y`.
    XY,
}

/// Moves spin-up by +1 and spin-down by −1 along `axis`, periodically.
pub fn translate(state: &SpinorField, axis: Axis) -> Result<SpinorField, WalkError> {
    if state.representation() != Representation::Position {
        return Err(LatticeError::WrongRepresentation {
            expected: Representation::Position,
        }
        .into());
    }
    let mut out = state.clone();
    let nx = out.geometry().size_x();
    let (up, down) = out.components_mut();
    match axis {
        Axis::X => shift_x(up, down, nx),
        Axis::Y => shift_y(up, down, nx),
        Axis::XY => {
            shift_y(up, down, nx);
            shift_x(up, down, nx);
        }
    }
    Ok(out)
}

#[inline]
fn shift_x(up: &mut [C64], down: &mut [C64], nx: usize) {
    for row in up.chunks_exact_mut(nx) {
        row.rotate_right(1);
    }
    for row in down.chunks_exact_mut(nx) {
        row.rotate_left(1);
    }
}

#[inline]
fn shift_y(up: &mut [C64], down: &mut [C64], nx: usize) {
    up.rotate_right(nx);
    down.rotate_left(nx);
}

/// Parameters of a homogeneous walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkParams {
    theta1: f64,
    theta2: f64,
    /// Momentum kick along +y applied after each force-active step.
    pub force: f64,
    pub steps: usize,
    force_window: Range<usize>,
}

impl WalkParams {
    /// Force active on every step.
    pub fn new(theta1: f64, theta2: f64, force: f64, steps: usize) -> Self {
        WalkParams {
            theta1: fold_angle(theta1),
            theta2: fold_angle(theta2),
            force,
            steps,
            force_window: 0..steps,
        }
    }

    /// Restricts the force to steps `start..end` (0-based).
    pub fn with_force_window(mut self, window: Range<usize>) -> Result<Self, WalkError> {
        if window.start > window.end || window.end > self.steps {
            return Err(WalkError::ForceWindow {
                start: window.start,
                end: window.end,
                steps: self.steps,
            });
        }
        self.force_window = window;
        Ok(self)
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn force_window(&self) -> Range<usize> {
        self.force_window.clone()
    }

    /// Force applied after step `t`.
    pub fn force_at(&self, t: usize) -> f64 {
        if self.force_window.contains(&t) {
            self.force
        } else {
            0.0
        }
    }

    /// Number of force-active steps.
    pub fn force_steps(&self) -> usize {
        self.force_window.len()
    }
}

/// Uniform θ₁ with a θ₂ value per x column (indexed by grid index).
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField {
    pub theta1: f64,
    pub theta2_of_x: Vec<f64>,
}

impl AngleField {
    pub fn uniform(geometry: LatticeGeometry, theta1: f64, theta2: f64) -> Self {
        AngleField {
            theta1: fold_angle(theta1),
            theta2_of_x: vec![fold_angle(theta2); geometry.size_x()],
        }
    }

    /// `left` on columns with signed `x < 0`, `right` on `x ≥ 0`.
    pub fn split(geometry: LatticeGeometry, theta1: f64, left: f64, right: f64) -> Self {
        let (l, r) = (fold_angle(left), fold_angle(right));
        AngleField {
            theta1: fold_angle(theta1),
            theta2_of_x: (0..geometry.size_x())
                .map(|ix| if geometry.signed_x(ix) < 0 { l } else { r })
                .collect(),
        }
    }
}

/// Cosine/sine of half-angles, per column for θ₂.
struct StepCoeffs {
    r1: (f64, f64),
    r2: Vec<(f64, f64)>,
}

impl StepCoeffs {
    fn new(theta1: f64, theta2_of_x: impl Iterator<Item = f64>) -> Self {
        let half = |t: f64| {
            let (s, c) = (t / 2.0).sin_cos();
            (c, s)
        };
        StepCoeffs {
            r1: half(theta1),
            r2: theta2_of_x.map(half).collect(),
        }
    }
}

#[inline]
fn rotate_uniform(up: &mut [C64], down: &mut [C64], (c, s): (f64, f64)) {
    for (u, d) in up.iter_mut().zip(down.iter_mut()) {
        let (a, b) = (*u, *d);
        *u = a * c - b * s;
        *d = a * s + b * c;
    }
}

#[inline]
fn rotate_columns(up: &mut [C64], down: &mut [C64], cols: &[(f64, f64)]) {
    let nx = cols.len();
    for (ur, dr) in up.chunks_exact_mut(nx).zip(down.chunks_exact_mut(nx)) {
        for ((u, d), &(c, s)) in ur.iter_mut().zip(dr.iter_mut()).zip(cols) {
            let (a, b) = (*u, *d);
            *u = a * c - b * s;
            *d = a * s + b * c;
        }
    }
}

/// Multiplies every site by `exp(−i F y)` with signed y, which raises k_y by F.
fn apply_force(up: &mut [C64], down: &mut [C64], geometry: LatticeGeometry, force: f64) {
    let nx = geometry.size_x();
    for (iy, (ur, dr)) in up
        .chunks_exact_mut(nx)
        .zip(down.chunks_exact_mut(nx))
        .enumerate()
    {
        let ph = C64::from_polar(1.0, -force * geometry.signed_y(iy) as f64);
        for v in ur.iter_mut().chain(dr.iter_mut()) {
            *v *= ph;
        }
    }
}

fn step_in_place(field: &mut SpinorField, coeffs: &StepCoeffs, force: f64) {
    let g = field.geometry();
    let nx = g.size_x();
    let (up, down) = field.components_mut();
    rotate_uniform(up, down, coeffs.r1);
    shift_y(up, down, nx);
    shift_x(up, down, nx);
    rotate_uniform(up, down, coeffs.r1);
    shift_y(up, down, nx);
    rotate_columns(up, down, &coeffs.r2);
    shift_x(up, down, nx);
    if force != 0.0 {
        apply_force(up, down, g, force);
    }
}

fn require_position(state: &SpinorField) -> Result<(), WalkError> {
    if state.representation() != Representation::Position {
        return Err(LatticeError::WrongRepresentation {
            expected: Representation::Position,
        }
        .into());
    }
    Ok(())
}

/// One step at time index `t` (which selects whether the force is active).
pub fn walk_step(
    state: &SpinorField,
    params: &WalkParams,
    t: usize,
) -> Result<SpinorField, WalkError> {
    require_position(state)?;
    let nx = state.geometry().size_x();
    let coeffs = StepCoeffs::new(params.theta1, std::iter::repeat_n(params.theta2, nx));
    let mut out = state.clone();
    step_in_place(&mut out, &coeffs, params.force_at(t));
    Ok(out)
}

/// Applies `params.steps` steps.
pub fn evolve(state: &SpinorField, params: &WalkParams) -> Result<SpinorField, WalkError> {
    evolve_observed(state, params, |_, _| {})
}

/// Like [`evolve`], calling `observe(t, state)` after each step `t`.
pub fn evolve_observed(
    state: &SpinorField,
    params: &WalkParams,
    mut observe: impl FnMut(usize, &SpinorField),
) -> Result<SpinorField, WalkError> {
    require_position(state)?;
    let nx = state.geometry().size_x();
    let coeffs = StepCoeffs::new(params.theta1, std::iter::repeat_n(params.theta2, nx));
    let mut out = state.clone();
    for t in 0..params.steps {
        step_in_place(&mut out, &coeffs, params.force_at(t));
        observe(t, &out);
    }
    Ok(out)
}

/// Force-free evolution with θ₂ taken from the column where it acts.
pub fn evolve_inhomogeneous(
    state: &SpinorField,
    angles: &AngleField,
    steps: usize,
) -> Result<SpinorField, WalkError> {
    require_position(state)?;
    let nx = state.geometry().size_x();
    if angles.theta2_of_x.len() != nx {
        return Err(WalkError::AngleFieldMismatch {
            expected: nx,
            got: angles.theta2_of_x.len(),
        });
    }
    let coeffs = StepCoeffs::new(angles.theta1, angles.theta2_of_x.iter().copied());
    let mut out = state.clone();
    for _ in 0..steps {
        step_in_place(&mut out, &coeffs, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::{SPIN_DOWN, SPIN_UP};
    use std::f64::consts::PI;

    fn g(n: usize) -> LatticeGeometry {
        LatticeGeometry::square(n).unwrap()
    }

    #[test]
    fn rotation_closed_forms() {
        assert!(spin_rotation(0.0).max_abs_diff(&Mat2::identity()) < 1e-15);
        let q = spin_rotation(PI);
        let want = Mat2([
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ]);
        assert!(q.max_abs_diff(&want) < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = Mat2([
            [C64::new(h, 0.0), C64::new(-h, 0.0)],
            [C64::new(h, 0.0), C64::new(h, 0.0)],
        ]);
        let r = spin_rotation(PI / 2.0);
        assert!(r.max_abs_diff(&want) < 1e-15);
        assert!((r.det() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(r.unitarity_defect() < 1e-15);
    }

    #[test]
    fn translations_move_spins_oppositely() {
        let geo = g(8);
        let s = translate(&SpinorField::delta(geo, (0, 0), SPIN_UP), Axis::X).unwrap();
        assert_eq!(s, SpinorField::delta(geo, (1, 0), SPIN_UP));
        let s = translate(&SpinorField::delta(geo, (0, 0), SPIN_DOWN), Axis::XY).unwrap();
        assert_eq!(s, SpinorField::delta(geo, (-1, -1), SPIN_DOWN));

        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let s = translate(&SpinorField::delta(geo, (0, 0), [h, h]), Axis::Y).unwrap();
        assert_eq!(s.at(0, 1), [h, C64::new(0.0, 0.0)]);
        assert_eq!(s.at(0, -1), [C64::new(0.0, 0.0), h]);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn translation_rejects_momentum_input() {
        let f = SpinorField::zeros(g(8), Representation::Momentum);
        assert!(translate(&f, Axis::X).is_err());
    }

    #[test]
    fn trivial_angles_move_two_sites() {
        let geo = g(8);
        let p = WalkParams::new(0.0, 0.0, 0.0, 1);
        let s = walk_step(&SpinorField::delta(geo, (0, 0), SPIN_UP), &p, 0).unwrap();
        assert_eq!(s, SpinorField::delta(geo, (2, 2), SPIN_UP));
        let s = walk_step(&SpinorField::delta(geo, (0, 0), SPIN_DOWN), &p, 0).unwrap();
        assert_eq!(s, SpinorField::delta(geo, (-2, -2), SPIN_DOWN));
    }

    #[test]
    fn zero_steps_is_identity() {
        let geo = g(8);
        let f = SpinorField::delta(geo, (1, 3), SPIN_UP);
        assert_eq!(evolve(&f, &WalkParams::new(0.3, 1.2, 0.5, 0)).unwrap(), f);
        let a = AngleField::split(geo, -PI / 4.0, PI, PI / 5.0);
        assert_eq!(evolve_inhomogeneous(&f, &a, 0).unwrap(), f);
    }

    #[test]
    fn uniform_angle_field_matches_homogeneous_bitwise() {
        let geo = g(16);
        let f = SpinorField::delta(geo, (0, 0), SPIN_UP);
        let a = evolve(&f, &WalkParams::new(-0.7, 2.1, 0.0, 7)).unwrap();
        let b = evolve_inhomogeneous(&f, &AngleField::uniform(geo, -0.7, 2.1), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_field_assigns_domains_by_sign() {
        let geo = g(8);
        let a = AngleField::split(geo, 0.0, 1.0, 2.0);
        for ix in 0..8 {
            let want = if geo.signed_x(ix) < 0 { 1.0 } else { 2.0 };
            assert_eq!(a.theta2_of_x[ix], want);
        }
        let bad = AngleField {
            theta1: 0.0,
            theta2_of_x: vec![0.0; 3],
        };
        let f = SpinorField::delta(geo, (0, 0), SPIN_UP);
        assert!(matches!(
            evolve_inhomogeneous(&f, &bad, 1),
            Err(WalkError::AngleFieldMismatch { .. })
        ));
    }

    #[test]
    fn angles_are_folded() {
        let p = WalkParams::new(3.0 * PI, -PI / 2.0, 0.0, 1);
        assert!((p.theta1() - PI).abs() < 1e-12);
        assert!((p.theta2() + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn force_window_selects_steps() {
        let p = WalkParams::new(0.0, 0.0, 0.2, 10)
            .with_force_window(0..9)
            .unwrap();
        assert_eq!(p.force_at(8), 0.2);
        assert_eq!(p.force_at(9), 0.0);
        assert_eq!(p.force_steps(), 9);
        assert!(WalkParams::new(0.0, 0.0, 0.2, 10)
            .with_force_window(0..11)
            .is_err());
    }

    #[test]
    fn force_phase_uses_signed_y() {
        let geo = g(8);
        let p = WalkParams::new(0.0, 0.0, 0.3, 1);
        // Start at (-2,-4) so the walker lands on y = -2.
        let s = walk_step(&SpinorField::delta(geo, (-2, -4), SPIN_UP), &p, 0).unwrap();
        let v = s.at(0, -2)[0];
        assert!((v - C64::from_polar(1.0, 0.6)).norm() < 1e-15);
    }
}
