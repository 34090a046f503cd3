// Copyright 2026 The ewald-md developers
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Shared-memory molecular dynamics with particle and pair loops driven by
//! access descriptors, and a Particle-Ewald treatment of periodic
//! electrostatics.
//!
//! Units are Gaussian with a Coulomb constant of one: lengths in Å, charges
//! in elementary charges, energies in q²/Å and forces in q²/Å².

// Axis loops index several arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod engine;
pub mod error;
pub mod ewald;
pub mod model;
pub mod oracle;
pub mod potentials;
pub mod sim;

pub use error::{Error, Result};

/// Multiply an energy in q²/Å by this to obtain eV.
pub const EV_PER_GAUSSIAN_ENERGY: f64 = 14.399_645_478_425_668;

/// Maximum |Σq| accepted for a system to count as charge neutral.
pub const NEUTRALITY_TOLERANCE: f64 = 1e-12;
