use std::f64::consts::PI;

use proptest::prelude::*;
use qwalk::bands::{
    band_solve, curvature_from_states, curvature_plaquette, curvature_plaquette_band, Band, BzGrid,
};
use qwalk::lattice::{LatticeGeometry, Representation, SpinorField};
use qwalk::spinor::{scale, C64, SPIN_UP};
use qwalk::transport::{
    hall_drift, is_gapped, BandTable, Drive, Readout, WavePacketSpec,
};
use qwalk::walk::{evolve, evolve_inhomogeneous, translate, AngleField, Axis, WalkParams};

const SIDE: usize = 12;

fn geometry() -> LatticeGeometry {
    LatticeGeometry::square(SIDE).unwrap()
}

fn state_from(values: &[f64]) -> SpinorField {
    let g = geometry();
    let mut s = SpinorField::from_fn(g, Representation::Position, |ix, iy| {
        let i = 4 * g.index(ix, iy);
        [
            C64::new(values[i], values[i + 1]),
            C64::new(values[i + 2], values[i + 3]),
        ]
    });
    s.normalize();
    s
}

fn random_state() -> impl Strategy<Value = SpinorField> {
    prop::collection::vec(-1.0f64..1.0, 4 * SIDE * SIDE)
        .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|v| state_from(&v))
}

fn angle() -> impl Strategy<Value = f64> {
    -PI..PI
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ten_steps_preserve_norm(s in random_state(), t1 in angle(), t2 in angle(), f in -1.0f64..1.0) {
        let out = evolve(&s, &WalkParams::new(t1, t2, f, 10)).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inhomogeneous_walk_preserves_norm(s in random_state(), t1 in angle(), l in angle(), r in angle()) {
        let angles = AngleField::split(geometry(), t1, l, r);
        let out = evolve_inhomogeneous(&s, &angles, 10).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fourier_round_trip(s in random_state()) {
        let k = s.to_momentum().unwrap();
        prop_assert!((k.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(k.to_position().unwrap().max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn translations_commute(s in random_state()) {
        let a = translate(&translate(&s, Axis::Y).unwrap(), Axis::X).unwrap();
        let b = translate(&s, Axis::XY).unwrap();
        prop_assert_eq!(a.max_abs_diff(&b), 0.0);
        let c = translate(&translate(&s, Axis::X).unwrap(), Axis::Y).unwrap();
        prop_assert_eq!(c.max_abs_diff(&b), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn support_keeps_sublattice_parity(
        x0 in 0i64..SIDE as i64,
        y0 in 0i64..SIDE as i64,
        t1 in angle(),
        t2 in angle(),
        steps in 0usize..6,
    ) {
        let g = geometry();
        let start = SpinorField::delta(g, (x0, y0), SPIN_UP);
        let out = evolve(&start, &WalkParams::new(t1, t2, 0.3, steps)).unwrap();
        let p = out.probability();
        for iy in 0..SIDE {
            for ix in 0..SIDE {
                let odd = (ix as i64 - x0).rem_euclid(2) != 0 || (iy as i64 - y0).rem_euclid(2) != 0;
                if odd {
                    prop_assert_eq!(p[g.index(ix, iy)], 0.0);
                }
            }
        }
    }

    #[test]
    fn centre_of_mass_is_translation_covariant(
        a in -20i64..20,
        b in -20i64..20,
        w in prop::collection::vec(0.0f64..1.0, 9),
    ) {
        let g = LatticeGeometry::square(32).unwrap();
        // A 3x3 blob around the origin.
        let blob = |x: i64, y: i64| {
            if x.abs() <= 1 && y.abs() <= 1 {
                let v = w[((y + 1) * 3 + x + 1) as usize] + 0.05;
                [C64::new(v.sqrt(), 0.0), C64::new(0.0, 0.0)]
            } else {
                [C64::new(0.0, 0.0); 2]
            }
        };
        let base = SpinorField::from_fn(g, Representation::Position, |ix, iy| {
            blob(g.signed_x(ix), g.signed_y(iy))
        });
        let moved = SpinorField::from_fn(g, Representation::Position, |ix, iy| {
            let x = g.signed_x(g.wrap_x(g.signed_x(ix) - a));
            let y = g.signed_y(g.wrap_y(g.signed_y(iy) - b));
            blob(x, y)
        });
        let (c0, c1) = (base.center_of_mass().unwrap(), moved.center_of_mass().unwrap());
        let wrap = |d: f64| d - 32.0 * (d / 32.0).round();
        prop_assert!(wrap(c1.x - c0.x - a as f64).abs() < 1e-9);
        prop_assert!(wrap(c1.y - c0.y - b as f64).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn chern_is_integral_and_grid_independent(t1 in angle(), t2 in angle()) {
        prop_assume!(is_gapped((t1, t2)));
        let coarse = curvature_plaquette(&band_solve(t1, t2, BzGrid::square(16).unwrap()).unwrap()).unwrap();
        let fine = curvature_plaquette(&band_solve(t1, t2, BzGrid::square(64).unwrap()).unwrap()).unwrap();
        prop_assert!((coarse.chern - coarse.chern.round()).abs() < 1e-12);
        prop_assert!((fine.chern - fine.chern.round()).abs() < 1e-12);
        prop_assert_eq!(coarse.chern_integer(), fine.chern_integer());
    }

    #[test]
    fn curvature_is_gauge_invariant(
        t1 in angle(),
        t2 in angle(),
        phases in prop::collection::vec(-PI..PI, 16 * 16),
    ) {
        prop_assume!(is_gapped((t1, t2)));
        let grid = BzGrid::square(16).unwrap();
        let sol = band_solve(t1, t2, grid).unwrap();
        let map = curvature_plaquette(&sol).unwrap();
        let dressed: Vec<_> = sol
            .u_lower
            .iter()
            .zip(&phases)
            .map(|(u, p)| scale(u, C64::from_polar(1.0, *p)))
            .collect();
        let other = curvature_from_states(grid, &dressed, Band::Lower);
        for (a, b) in map.omega.iter().zip(&other.omega) {
            // Plaquette phases compared directly; omega carries a 1/area factor.
            prop_assert!((a - b).abs() * grid.cell_area() < 1e-10);
        }
    }

    #[test]
    fn bands_and_curvature_are_antisymmetric(t1 in angle(), t2 in angle()) {
        prop_assume!(is_gapped((t1, t2)));
        let sol = band_solve(t1, t2, BzGrid::square(16).unwrap()).unwrap();
        for (l, u) in sol.eps_lower.iter().zip(&sol.eps_upper) {
            prop_assert!((l + u).abs() < 1e-12);
        }
        let lower = curvature_plaquette_band(&sol, Band::Lower).unwrap();
        let upper = curvature_plaquette_band(&sol, Band::Upper).unwrap();
        for (l, u) in lower.omega.iter().zip(&upper.omega) {
            prop_assert!((l + u).abs() < 1e-8);
        }
    }
}

/// Reversing the force and starting from the other packet swaps the two runs.
#[test]
fn reversed_force_swaps_runs() {
    let theta = (-PI / 2.0, PI / 2.0);
    let g = LatticeGeometry::square(64).unwrap();
    let table = BandTable::new(theta, g);
    let drive = Drive {
        force: PI / 45.0,
        steps: 10,
        force_steps: 9,
    };
    let k_c = (0.3 * PI, -0.2 * PI);
    let spec = WavePacketSpec::lower(k_c, 0.04 * PI);
    let a = hall_drift(theta, &spec, drive, &table, Readout::ProjectedMoment).unwrap();
    let reversed = Drive {
        force: -drive.force,
        ..drive
    };
    let spec_b = WavePacketSpec::lower((k_c.0, k_c.1 + drive.span()), 0.04 * PI);
    let b = hall_drift(theta, &spec_b, reversed, &table, Readout::ProjectedMoment).unwrap();
    assert!((a.x_plus - b.x_minus).abs() < 1e-9, "{} {}", a.x_plus, b.x_minus);
    assert!((a.x_minus - b.x_plus).abs() < 1e-9, "{} {}", a.x_minus, b.x_plus);
    assert!((a.lambda + b.lambda).abs() < 1e-9);
}
