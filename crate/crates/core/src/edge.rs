//! Walks across a θ₂ domain wall: edge confinement, chirality, and the
//! bulk-boundary count from strip spectra.

use thiserror::Error;

use crate::bands::{spectral_chern, BandError};
use crate::lattice::{LatticeError, LatticeGeometry, SpinorField};
use crate::ribbon::{ribbon_spectrum, split_chain, InterfaceCount};
use crate::spinor::{Spinor, SPIN_UP};
use crate::walk::{evolve_inhomogeneous, AngleField, WalkError};

/// |y drift| needed to assign a chirality, in sites.
pub const CHIRALITY_THRESHOLD: f64 = 0.5;
const CHERN_GRID: usize = 32;

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error("lattice too narrow: size_x {size_x} < 4 x {steps} steps")]
    TooNarrow { size_x: usize, steps: usize },
    #[error("edge width must be positive")]
    EdgeWidth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConfig {
    pub theta1: f64,
    /// θ₂ on columns x < 0.
    pub theta2_left: f64,
    /// θ₂ on columns x ≥ 0.
    pub theta2_right: f64,
    pub steps: usize,
    pub start_site: (i64, i64),
    pub start_spin: Spinor,
    /// Columns counted as on the edge, centred on the x = 0 interface.
    pub edge_width: usize,
}

impl EdgeConfig {
    pub fn new(theta1: f64, theta2_left: f64, theta2_right: f64, steps: usize) -> Self {
        EdgeConfig {
            theta1,
            theta2_left,
            theta2_right,
            steps,
            start_site: (0, 0),
            start_spin: SPIN_UP,
            edge_width: 4,
        }
    }

    /// Both sides set to `theta2`.
    pub fn homogeneous(&self, theta2: f64) -> Self {
        EdgeConfig {
            theta2_left: theta2,
            theta2_right: theta2,
            ..self.clone()
        }
    }

    /// The exchanged-topology counterpart: θ₁ → −θ₁ and the two θ₂ swapped.
    pub fn swapped(&self) -> Self {
        EdgeConfig {
            theta1: -self.theta1,
            theta2_left: self.theta2_right,
            theta2_right: self.theta2_left,
            ..self.clone()
        }
    }

    /// Lower-band Chern numbers of the left and right bulks.
    pub fn chern_numbers(&self) -> Result<(i64, i64), EdgeError> {
        let l = spectral_chern(self.theta1, self.theta2_left, CHERN_GRID)?;
        let r = spectral_chern(self.theta1, self.theta2_right, CHERN_GRID)?;
        Ok((l.round() as i64, r.round() as i64))
    }

    /// Whether the spectral precondition for a chiral run holds.
    pub fn is_chiral(&self) -> Result<bool, EdgeError> {
        let (l, r) = self.chern_numbers()?;
        Ok(l != r)
    }

    /// Signed columns `[−⌊w/2⌋, −⌊w/2⌋ + w)` forming the edge band.
    pub fn edge_columns(&self) -> std::ops::Range<i64> {
        let lo = -((self.edge_width / 2) as i64);
        lo..lo + self.edge_width as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chirality {
    Positive,
    Negative,
    /// |y drift| at or below the threshold.
    Undefined,
}

impl Chirality {
    pub fn from_drift(drift: f64) -> Self {
        if drift > CHIRALITY_THRESHOLD {
            Chirality::Positive
        } else if drift < -CHIRALITY_THRESHOLD {
            Chirality::Negative
        } else {
            Chirality::Undefined
        }
    }

    pub fn sign(&self) -> i64 {
        match self {
            Chirality::Positive => 1,
            Chirality::Negative => -1,
            Chirality::Undefined => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Chirality::Positive => "positive",
            Chirality::Negative => "negative",
            Chirality::Undefined => "undefined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeMetrics {
    /// Probability within the edge columns.
    pub p_edge: f64,
    /// y centre of mass of the edge-band probability, relative to the start.
    pub y_drift_edge: f64,
    pub chirality: Chirality,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRun {
    pub geometry: LatticeGeometry,
    /// `P(x, y)` in lattice storage order.
    pub probability: Vec<f64>,
    pub metrics: EdgeMetrics,
}

fn check_geometry(config: &EdgeConfig, geometry: LatticeGeometry) -> Result<(), EdgeError> {
    if geometry.size_x() < 4 * config.steps {
        return Err(EdgeError::TooNarrow {
            size_x: geometry.size_x(),
            steps: config.steps,
        });
    }
    if config.edge_width == 0 {
        return Err(EdgeError::EdgeWidth);
    }
    Ok(())
}

/// Evolves the start state across the domain wall and measures the edge band.
pub fn run_edge(config: &EdgeConfig, geometry: LatticeGeometry) -> Result<EdgeRun, EdgeError> {
    check_geometry(config, geometry)?;
    let angles = AngleField::split(
        geometry,
        config.theta1,
        config.theta2_left,
        config.theta2_right,
    );
    let start = SpinorField::delta(geometry, config.start_site, crate::spinor::normalized(config.start_spin));
    let end = evolve_inhomogeneous(&start, &angles, config.steps)?;
    let probability = end.probability();
    let metrics = edge_metrics(&probability, geometry, config, config.edge_width);
    Ok(EdgeRun {
        geometry,
        probability,
        metrics,
    })
}

/// Metrics of a probability map for a given edge width.
pub fn edge_metrics(
    probability: &[f64],
    geometry: LatticeGeometry,
    config: &EdgeConfig,
    edge_width: usize,
) -> EdgeMetrics {
    let lo = -((edge_width / 2) as i64);
    let cols = lo..lo + edge_width as i64;
    let ny = geometry.size_y() as i64;
    let (mut p_edge, mut first) = (0.0, 0.0);
    for iy in 0..geometry.size_y() {
        // y relative to the start, folded to [−ny/2, ny/2).
        let y = (geometry.signed_y(iy) - config.start_site.1 + ny / 2).rem_euclid(ny) - ny / 2;
        for x in cols.clone() {
            let p = probability[geometry.index(geometry.wrap_x(x), iy)];
            p_edge += p;
            first += p * y as f64;
        }
    }
    let y_drift_edge = if p_edge > 0.0 { first / p_edge } else { 0.0 };
    EdgeMetrics {
        p_edge,
        y_drift_edge,
        chirality: Chirality::from_drift(y_drift_edge),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapOutcome {
    /// The two runs drift in opposite directions.
    Reversed,
    /// Both runs drift the same way.
    NotReversed,
    /// Equal Chern numbers on the two sides, or an undefined chirality.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapReport {
    pub original: EdgeMetrics,
    pub swapped_config: EdgeConfig,
    pub swapped: EdgeMetrics,
    pub chern: (i64, i64),
    pub swapped_chern: (i64, i64),
    pub outcome: SwapOutcome,
}

/// Runs a configuration and its exchanged-topology counterpart.
pub fn chirality_swap_test(
    config: &EdgeConfig,
    geometry: LatticeGeometry,
) -> Result<SwapReport, EdgeError> {
    let swapped_config = config.swapped();
    let a = run_edge(config, geometry)?;
    let b = run_edge(&swapped_config, geometry)?;
    let chern = config.chern_numbers()?;
    let swapped_chern = swapped_config.chern_numbers()?;
    let undefined = a.metrics.chirality == Chirality::Undefined
        || b.metrics.chirality == Chirality::Undefined;
    let outcome = if chern.0 == chern.1 || undefined {
        SwapOutcome::Inconclusive
    } else if a.metrics.chirality.sign() == -b.metrics.chirality.sign() {
        SwapOutcome::Reversed
    } else {
        SwapOutcome::NotReversed
    };
    Ok(SwapReport {
        original: a.metrics,
        swapped_config,
        swapped: b.metrics,
        chern,
        swapped_chern,
        outcome,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BulkBoundaryReport {
    pub chern_left: i64,
    pub chern_right: i64,
    /// Net chiral modes at the x = 0 interface.
    pub centre: InterfaceCount,
    /// Net chiral modes at the periodic-wrap interface.
    pub wrap: Option<InterfaceCount>,
    /// `|chern_left − chern_right| == |net modes|` at both interfaces.
    pub counts_match: bool,
    /// Group-velocity sign of the x = 0 interface modes (0 if none).
    pub velocity_sign: i64,
    pub ribbon_unreliable: bool,
}

/// Compares the bulk Chern difference with the strip's interface-mode count.
pub fn bulk_boundary_check(
    config: &EdgeConfig,
    ribbon_width: usize,
    ky_samples: usize,
) -> Result<BulkBoundaryReport, EdgeError> {
    let (chern_left, chern_right) = config.chern_numbers()?;
    let angles = split_chain(
        ribbon_width,
        config.theta1,
        config.theta2_left,
        config.theta2_right,
    );
    let r = ribbon_spectrum(&angles, ribbon_width, ky_samples)?;
    let empty = |position| InterfaceCount {
        position,
        flow_zero: 0,
        flow_pi: 0,
    };
    let centre = r.count_near(-0.5).filter(|c| c.position == -0.5).cloned().unwrap_or(empty(-0.5));
    let wrap_pos = ribbon_width as f64 - 0.5;
    let wrap = r.count_near(wrap_pos).filter(|c| c.position == wrap_pos).cloned();
    let diff = (chern_left - chern_right).abs();
    let counts_match = centre.net().abs() == diff
        && wrap.as_ref().map_or(diff == 0, |w| w.net().abs() == diff);
    Ok(BulkBoundaryReport {
        chern_left,
        chern_right,
        velocity_sign: if centre.net() == 0 { 0 } else { centre.velocity_sign() },
        centre,
        wrap,
        counts_match,
        ribbon_unreliable: r.unreliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn domain_wall() -> EdgeConfig {
        EdgeConfig::new(-PI / 4.0, PI, PI / 5.0, 12)
    }

    #[test]
    fn zero_steps_stays_on_edge() {
        let g = LatticeGeometry::square(64).unwrap();
        let mut c = domain_wall();
        c.steps = 0;
        let r = run_edge(&c, g).unwrap();
        assert!((r.metrics.p_edge - 1.0).abs() < 1e-15);
        assert_eq!(r.metrics.y_drift_edge, 0.0);
        assert_eq!(r.metrics.chirality, Chirality::Undefined);
    }

    #[test]
    fn narrow_lattice_rejected() {
        let g = LatticeGeometry::square(40).unwrap();
        assert!(matches!(run_edge(&domain_wall(), g), Err(EdgeError::TooNarrow { .. })));
    }

    #[test]
    fn edge_columns_are_centred() {
        assert_eq!(domain_wall().edge_columns(), -2..2);
        let mut c = domain_wall();
        c.edge_width = 3;
        assert_eq!(c.edge_columns(), -1..2);
    }

    #[test]
    fn swap_matches_second_configuration() {
        let s = domain_wall().swapped();
        assert!((s.theta1 - PI / 4.0).abs() < 1e-15);
        assert_eq!(s.theta2_left, PI / 5.0);
        assert_eq!(s.theta2_right, PI);
    }

    #[test]
    fn chern_precondition() {
        assert_eq!(domain_wall().chern_numbers().unwrap(), (0, -1));
        assert!(domain_wall().is_chiral().unwrap());
        assert!(!domain_wall().homogeneous(PI / 5.0).is_chiral().unwrap());
    }

    #[test]
    fn identical_sides_are_inconclusive() {
        let g = LatticeGeometry::square(64).unwrap();
        let c = domain_wall().homogeneous(PI / 5.0);
        let r = chirality_swap_test(&c, g).unwrap();
        assert_eq!(r.outcome, SwapOutcome::Inconclusive);
    }

    #[test]
    fn chirality_threshold() {
        assert_eq!(Chirality::from_drift(0.5), Chirality::Undefined);
        assert_eq!(Chirality::from_drift(0.51), Chirality::Positive);
        assert_eq!(Chirality::from_drift(-0.7), Chirality::Negative);
    }
}
