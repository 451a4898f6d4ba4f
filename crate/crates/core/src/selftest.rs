//! Quick randomized invariant checks, reproducible from a seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bands::{band_solve, curvature_from_states, curvature_plaquette, Band, BzGrid};
use crate::lattice::{LatticeGeometry, Representation, SpinorField};
use crate::spinor::{scale, C64};
use crate::transport::is_gapped;
use crate::walk::{evolve, WalkParams};

#[derive(Clone, Debug, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    /// Worst deviation over all trials.
    pub worst: f64,
    pub tolerance: f64,
}

impl SelfCheck {
    pub fn pass(&self) -> bool {
        self.worst.is_finite() && self.worst <= self.tolerance
    }
}

fn random_state(rng: &mut ChaCha8Rng, g: LatticeGeometry) -> SpinorField {
    let mut f = SpinorField::from_fn(g, Representation::Position, |_, _| {
        [
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        ]
    });
    f.normalize();
    f
}

fn random_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-PI..PI)
}

/// Runs `trials` randomized trials of each invariant.
pub fn run_selftest(seed: u64, trials: usize) -> Vec<SelfCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = LatticeGeometry::square(16).expect("valid lattice");
    let mut norm = 0.0f64;
    let mut fourier = 0.0f64;
    for _ in 0..trials {
        let s = random_state(&mut rng, g);
        let params = WalkParams::new(
            random_angle(&mut rng),
            random_angle(&mut rng),
            rng.random_range(-0.5..0.5),
            5,
        );
        let e = evolve(&s, &params).expect("matching geometry");
        norm = norm.max((e.norm_sqr() - 1.0).abs());
        let back = s
            .to_momentum()
            .and_then(|m| m.to_position())
            .expect("position field");
        fourier = fourier.max(back.max_abs_diff(&s));
    }

    let grid = BzGrid::square(16).expect("valid grid");
    let mut integrality = 0.0f64;
    let mut gauge = 0.0f64;
    let mut done = 0;
    while done < trials {
        let (t1, t2) = (random_angle(&mut rng), random_angle(&mut rng));
        if !is_gapped((t1, t2)) {
            continue;
        }
        done += 1;
        let Ok(sol) = band_solve(t1, t2, grid) else {
            continue;
        };
        let Ok(map) = curvature_plaquette(&sol) else {
            continue;
        };
        integrality = integrality.max((map.chern - map.chern.round()).abs());
        let rephased: Vec<_> = sol
            .u_lower
            .iter()
            .map(|u| scale(u, C64::from_polar(1.0, random_angle(&mut rng))))
            .collect();
        let other = curvature_from_states(grid, &rephased, Band::Lower);
        let d = map
            .omega
            .iter()
            .zip(&other.omega)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        gauge = gauge.max(d * grid.cell_area());
    }

    vec![
        SelfCheck {
            name: "walk preserves norm",
            worst: norm,
            tolerance: 1e-12,
        },
        SelfCheck {
            name: "fourier round trip",
            worst: fourier,
            tolerance: 1e-12,
        },
        SelfCheck {
            name: "chern integrality",
            worst: integrality,
            tolerance: 1e-6,
        },
        SelfCheck {
            name: "curvature gauge invariance",
            worst: gauge,
            tolerance: 1e-10,
        },
    ]
}
