//! Two-component spinors and 2×2 complex matrices.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;

pub type C64 = Complex64;

/// Spin amplitudes `[up, down]`.
pub type Spinor = [C64; 2];

pub const SPIN_UP: Spinor = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
pub const SPIN_DOWN: Spinor = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];

/// Folds an angle into `(-π, π]`.
pub fn fold_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Signed periodic difference folded into `(-π, π]`.
pub fn wrap_phase(d: f64) -> f64 {
    fold_angle(d)
}

pub fn inner(a: &Spinor, b: &Spinor) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn norm_sqr(a: &Spinor) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr()
}

pub fn normalized(a: Spinor) -> Spinor {
    let n = norm_sqr(&a).sqrt();
    [a[0] / n, a[1] / n]
}

pub fn scale(a: &Spinor, s: C64) -> Spinor {
    [a[0] * s, a[1] * s]
}

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2([[o, z], [z, o]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        Mat2([[a, z], [z, d]])
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn apply(&self, v: &Spinor) -> Spinor {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// Largest entry-wise deviation from another matrix.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        d
    }

    /// Deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Mat2::identity())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

/// Eigen-decomposition of an SU(2) matrix `U = exp(-iH)`.
///
/// Quasienergies come in a `±ε` pair with `ε ∈ [0, π]`; the lower branch is
/// `-ε ∈ [-π, 0]` (reported in `(-π, 0]` except at the exact degeneracy `ε = π`).
#[derive(Clone, Copy, Debug)]
pub struct Su2Eigen {
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub u_lower: Spinor,
    pub u_upper: Spinor,
}

/// Diagonalizes a unitary 2×2 matrix with unit determinant.
///
/// Writing `U = cos ε · 1 − i sin ε (n·σ)`, the lower band is the `n·σ = −1`
/// eigenvector. At `sin ε = 0` the matrix is `±1` and any basis is an
/// eigenbasis; spin up/down is returned there.
pub fn su2_eigen(u: &Mat2) -> Su2Eigen {
    let m = &u.0;
    let half_tr = (m[0][0] + m[1][1]).re * 0.5;
    let eps = half_tr.clamp(-1.0, 1.0).acos();
    // i(U - U†)/2 = sin ε (n·σ) stays accurate where (U - cos ε)/sin ε does not.
    let a = m[0][0];
    let b = m[0][1];
    let c = m[1][0];
    let i = C64::new(0.0, 1.0);
    // Components of s·n with s = sin ε.
    let s_nz = (i * (a - a.conj()) * 0.5).re;
    let s_nx_minus_i_ny = i * (b - c.conj()) * 0.5; // entry (0,1) of sin ε (n·σ)
    let s_n = (s_nz * s_nz + s_nx_minus_i_ny.norm_sqr()).sqrt();
    if s_n < 1e-300 {
        return Su2Eigen {
            eps_lower: -eps,
            eps_upper: eps,
            u_lower: SPIN_DOWN,
            u_upper: SPIN_UP,
        };
    }
    let nz = s_nz / s_n;
    let nxy = s_nx_minus_i_ny / s_n; // n_x - i n_y
    // Eigenvectors of n·σ = [[nz, nxy],[nxy*, -nz]].
    let (u_up, u_low) = if nz >= 0.0 {
        // +1: (1 + nz, nxy*) ; -1: (-nxy, 1 + nz)
        let up = normalized([C64::new(1.0 + nz, 0.0), nxy.conj()]);
        let low = normalized([-nxy, C64::new(1.0 + nz, 0.0)]);
        (up, low)
    } else {
        // +1: (nxy, 1 - nz) ; -1: (1 - nz, -nxy*)
        let up = normalized([nxy, C64::new(1.0 - nz, 0.0)]);
        let low = normalized([C64::new(1.0 - nz, 0.0), -nxy.conj()]);
        (up, low)
    };
    Su2Eigen {
        eps_lower: -eps,
        eps_upper: eps,
        u_lower: u_low,
        u_upper: u_up,
    }
}

/// Projector onto the lower band, `(1 − n·σ)/2`, which is gauge invariant.
pub fn lower_band_projector(u: &Mat2) -> Mat2 {
    let e = su2_eigen(u);
    let v = e.u_lower;
    Mat2([
        [v[0] * v[0].conj(), v[0] * v[1].conj()],
        [v[1] * v[0].conj(), v[1] * v[1].conj()],
    ])
}
