//! Simulation of a two-dimensional split-step quantum walk with Floquet
//! Chern bands: band theory, wave-packet Hall transport under synthetic
//! forces, and chiral edge states at domain walls.

pub mod bands;
pub mod config;
pub mod edge;
pub mod fit;
pub mod lattice;
pub mod protocol;
pub mod ribbon;
pub mod selftest;
pub mod spinor;
pub mod svg;
pub mod transport;
pub mod walk;
