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
//! Rock-salt benchmark systems and initial velocities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{ParticleSet, SimulationBox};
use crate::{Error, Result};

/// Lattice spacing giving one ion per (2.5 Å)³.
pub const DEFAULT_SPACING: f64 = 2.5;

/// Alternating ±1 charges on a simple cubic lattice of `2 * cells_per_dim`
/// sites per edge. Unit masses, zero velocities.
pub fn init_rocksalt(cells_per_dim: usize, spacing: f64) -> Result<ParticleSet> {
    if cells_per_dim == 0 {
        return Err(Error::InvalidLattice(
            "cells_per_dim must be at least 1".into(),
        ));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidLattice(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let sites = 2 * cells_per_dim;
    let n = sites * sites * sites;
    let sim_box = SimulationBox::cubic(sites as f64 * spacing)?;
    let mut ps = ParticleSet::new(n, sim_box)?;
    let mut idx = 0;
    for i in 0..sites {
        for j in 0..sites {
            for k in 0..sites {
                ps.positions[idx] = [i as f64 * spacing, j as f64 * spacing, k as f64 * spacing];
                ps.charges[idx] = if (i + j + k) % 2 == 0 { 1.0 } else { -1.0 };
                ps.masses[idx] = 1.0;
                idx += 1;
            }
        }
    }
    Ok(ps)
}

/// Cells per dimension for a rock-salt system of `n` ions.
pub fn rocksalt_cells_for(n: usize) -> Result<usize> {
    let sites = (n as f64).cbrt().round() as usize;
    if sites == 0 || sites * sites * sites != n || !sites.is_multiple_of(2) {
        return Err(Error::InvalidLattice(format!(
            "{n} ions do not form a rock-salt lattice; N must be (2c)³"
        )));
    }
    Ok(sites / 2)
}

/// Rock-salt system of `n` ions filling a cube of edge `edge`.
pub fn rocksalt_in_box(n: usize, edge: f64) -> Result<ParticleSet> {
    let c = rocksalt_cells_for(n)?;
    init_rocksalt(c, edge / (2 * c) as f64)
}

/// Maxwell-Boltzmann velocities at temperature `kt` (energy units) with the
/// centre-of-mass momentum removed. `kt = 0` zeroes all velocities.
pub fn assign_velocities(ps: &mut ParticleSet, kt: f64, seed: u64) -> Result<()> {
    if !(kt.is_finite() && kt >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be non-negative, got {kt}"
        )));
    }
    if ps.masses.iter().any(|&m| m.is_nan() || m <= 0.0) {
        return Err(Error::InvalidArgument(
            "velocities need positive masses".into(),
        ));
    }
    if kt == 0.0 {
        ps.velocities.fill([0.0; 3]);
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut momentum = [0.0; 3];
    let mut mass = 0.0;
    for (v, &m) in ps.velocities.iter_mut().zip(&ps.masses) {
        let s = (kt / m).sqrt();
        for a in 0..3 {
            v[a] = s * unit.sample(&mut rng);
            momentum[a] += m * v[a];
        }
        mass += m;
    }
    for v in &mut ps.velocities {
        for a in 0..3 {
            v[a] -= momentum[a] / mass;
        }
    }
    Ok(())
}

pub fn kinetic_energy(ps: &ParticleSet) -> f64 {
    ps.velocities
        .iter()
        .zip(&ps.masses)
        .map(|(v, m)| 0.5 * m * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
        .sum()
}
