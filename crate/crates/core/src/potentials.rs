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
//! Truncated, energy-shifted 12-6 Lennard-Jones pair interaction.

use crate::engine::{
    CellList, CenterView, GlobalViews, LoopEngine, NeighborView, PairKernel, PairSeparation,
};
use crate::model::{Access, AccessDescriptor, GlobalAccumulator, ParticleSet, Property};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LJParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub cutoff: f64,
}

impl Default for LJParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            sigma: 2.5,
            cutoff: 6.25,
        }
    }
}

impl LJParams {
    pub fn new(epsilon: f64, sigma: f64, cutoff: f64) -> Result<Self> {
        for (name, v) in [("epsilon", epsilon), ("sigma", sigma), ("cutoff", cutoff)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "LJ {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            epsilon,
            sigma,
            cutoff,
        })
    }

    /// Unshifted 4ε[(σ/r)¹² - (σ/r)⁶].
    pub fn bare_energy(&self, r: f64) -> f64 {
        let s6 = (self.sigma / r).powi(6);
        4.0 * self.epsilon * (s6 * s6 - s6)
    }

    /// Pair energy shifted to vanish at the cutoff; zero beyond it.
    pub fn energy(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            0.0
        } else {
            self.bare_energy(r) - self.bare_energy(self.cutoff)
        }
    }

    /// -dU/dr; positive is repulsive.
    pub fn radial_force(&self, r: f64) -> f64 {
        let s6 = (self.sigma / r).powi(6);
        24.0 * self.epsilon * (2.0 * s6 * s6 - s6) / r
    }
}

pub struct LjKernel {
    params: LJParams,
    shift: f64,
    sigma2: f64,
}

impl LjKernel {
    pub fn new(params: LJParams) -> Self {
        Self {
            params,
            shift: params.bare_energy(params.cutoff),
            sigma2: params.sigma * params.sigma,
        }
    }
}

const LJ_ACCESS: [AccessDescriptor; 3] = [
    AccessDescriptor::read(Property::Position),
    AccessDescriptor::inc(Property::Force),
    AccessDescriptor::global(0, Access::IncZero),
];

impl PairKernel for LjKernel {
    fn descriptors(&self) -> &[AccessDescriptor] {
        &LJ_ACCESS
    }

    #[inline]
    fn apply(
        &self,
        pair: &PairSeparation,
        center: &mut CenterView<'_>,
        neighbor: &NeighborView<'_>,
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        if pair.r2 == 0.0 {
            return Err(Error::CoincidentParticles(center.index(), neighbor.index()));
        }
        let inv2 = 1.0 / pair.r2;
        let s2 = self.sigma2 * inv2;
        let s6 = s2 * s2 * s2;
        let eps = self.params.epsilon;
        // (-dU/dr) / r
        let scale = 24.0 * eps * (2.0 * s6 * s6 - s6) * inv2;
        let dr = pair.dr;
        center.add_force([scale * dr[0], scale * dr[1], scale * dr[2]])?;
        globals.inc(0)?[0] += 0.5 * (4.0 * eps * (s6 * s6 - s6) - self.shift);
        Ok(())
    }
}

/// Add LJ forces for all pairs within the cell list cutoff and return the
/// energy. The cell list cutoff must equal `params.cutoff`.
pub fn lennard_jones(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    cells: &CellList,
    params: &LJParams,
) -> Result<f64> {
    if (cells.cutoff() - params.cutoff).abs() > 1e-12 * params.cutoff {
        return Err(Error::InvalidArgument(format!(
            "cell list cutoff {} differs from LJ cutoff {}",
            cells.cutoff(),
            params.cutoff
        )));
    }
    let mut energy = GlobalAccumulator::scalar();
    engine.pair_loop(&LjKernel::new(*params), ps, cells, &mut [&mut energy])?;
    Ok(energy.value())
}
