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
//! Particle storage, the periodic box and global accumulators.

mod access;

pub use access::{Access, AccessDescriptor, Property, Target};

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cubic periodic domain `[0, L)³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationBox {
    edge: f64,
}

impl SimulationBox {
    pub fn cubic(edge: f64) -> Result<Self> {
        if !(edge.is_finite() && edge > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box edge must be positive and finite, got {edge}"
            )));
        }
        Ok(Self { edge })
    }

    #[inline]
    pub fn edge(&self) -> f64 {
        self.edge
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.edge * self.edge * self.edge
    }

    /// Map a position into `[0, L)` per component.
    #[inline]
    pub fn wrap(&self, r: Vec3) -> Vec3 {
        r.map(|x| self.wrap_component(x))
    }

    #[inline]
    fn wrap_component(&self, x: f64) -> f64 {
        let l = self.edge;
        let mut w = x - l * (x / l).floor();
        // x slightly below zero rounds up to exactly L
        if w >= l {
            w -= l;
        }
        if w < 0.0 {
            w = 0.0;
        }
        w
    }

    /// Nearest periodic image of a separation, each component in `[-L/2, L/2)`.
    #[inline]
    pub fn minimum_image(&self, dr: Vec3) -> Vec3 {
        dr.map(|d| self.minimum_image_component(d))
    }

    #[inline]
    fn minimum_image_component(&self, d: f64) -> f64 {
        let l = self.edge;
        let half = 0.5 * l;
        let mut m = d - l * (d / l + 0.5).floor();
        if m >= half {
            m -= l;
        } else if m < -half {
            m += l;
        }
        m
    }
}

/// Structure-of-arrays particle storage. Every property array has length
/// [`ParticleSet::len`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub(crate) positions: Vec<Vec3>,
    pub(crate) charges: Vec<f64>,
    pub(crate) forces: Vec<Vec3>,
    pub(crate) velocities: Vec<Vec3>,
    pub(crate) masses: Vec<f64>,
    sim_box: SimulationBox,
}

impl ParticleSet {
    /// Allocate `n` zero-initialised particles.
    pub fn new(n: usize, sim_box: SimulationBox) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "a particle set needs at least one particle".into(),
            ));
        }
        Ok(Self {
            positions: vec![[0.0; 3]; n],
            charges: vec![0.0; n],
            forces: vec![[0.0; 3]; n],
            velocities: vec![[0.0; 3]; n],
            masses: vec![0.0; n],
            sim_box,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn sim_box(&self) -> SimulationBox {
        self.sim_box
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }
    pub fn positions_mut(&mut self) -> &mut [Vec3] {
        &mut self.positions
    }
    pub fn charges(&self) -> &[f64] {
        &self.charges
    }
    pub fn charges_mut(&mut self) -> &mut [f64] {
        &mut self.charges
    }
    pub fn forces(&self) -> &[Vec3] {
        &self.forces
    }
    pub fn forces_mut(&mut self) -> &mut [Vec3] {
        &mut self.forces
    }
    pub fn velocities(&self) -> &[Vec3] {
        &self.velocities
    }
    pub fn velocities_mut(&mut self) -> &mut [Vec3] {
        &mut self.velocities
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn masses_mut(&mut self) -> &mut [f64] {
        &mut self.masses
    }

    pub fn total_charge(&self) -> f64 {
        self.charges.iter().sum()
    }

    /// Fails with [`Error::NeutralityViolation`] unless |Σq| ≤ [`crate::NEUTRALITY_TOLERANCE`].
    pub fn ensure_neutral(&self) -> Result<()> {
        let q = self.total_charge();
        if q.abs() > crate::NEUTRALITY_TOLERANCE {
            return Err(Error::NeutralityViolation(q));
        }
        Ok(())
    }

    pub fn wrap_positions(&mut self) {
        let b = self.sim_box;
        for r in &mut self.positions {
            *r = b.wrap(*r);
        }
    }

    pub fn zero_forces(&mut self) {
        self.forces.fill([0.0; 3]);
    }

    /// Check that all property arrays still share one length.
    pub fn audit(&self) -> Result<()> {
        let n = self.positions.len();
        let lens = [
            self.charges.len(),
            self.forces.len(),
            self.velocities.len(),
            self.masses.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::ContractViolation(format!(
                "property array lengths diverged: positions {n}, others {lens:?}"
            )));
        }
        Ok(())
    }
}

/// Fixed-length real vector reduced across workers by the loop engine.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GlobalAccumulator {
    values: Vec<f64>,
}

impl GlobalAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn scalar() -> Self {
        Self::new(1)
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// First element; the value of a scalar accumulator.
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    pub fn zero(&mut self) {
        self.values.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(l: f64) -> SimulationBox {
        SimulationBox::cubic(l).unwrap()
    }

    #[test]
    fn create_particle_set() {
        let ps = ParticleSet::new(1, b(10.0)).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps.positions()[0], [0.0; 3]);
        assert_eq!(ps.charges()[0], 0.0);

        let ps = ParticleSet::new(1728, b(30.0)).unwrap();
        assert_eq!(ps.len(), 1728);
        assert_eq!(ps.masses().len(), 1728);
        assert_eq!(ps.velocities().len(), 1728);
        ps.audit().unwrap();

        assert!(matches!(
            ParticleSet::new(0, b(10.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn box_volume_and_validation() {
        assert_eq!(b(3.0).volume(), 27.0);
        assert!(SimulationBox::cubic(0.0).is_err());
        assert!(SimulationBox::cubic(-1.0).is_err());
        assert!(SimulationBox::cubic(f64::NAN).is_err());
    }

    #[test]
    fn wrap_examples() {
        let bx = b(10.0);
        let w = bx.wrap([10.5, 0.0, 0.0]);
        assert!((w[0] - 0.5).abs() < 1e-12 && w[1] == 0.0 && w[2] == 0.0);
        let w = bx.wrap([-0.1, 5.0, 5.0]);
        assert!((w[0] - 9.9).abs() < 1e-12);
        assert_eq!(bx.wrap([3.0, 3.0, 3.0]), [3.0, 3.0, 3.0]);
        // tiny negative values must not wrap onto L itself
        let w = bx.wrap([-1e-18, 0.0, 0.0]);
        assert!(w[0] >= 0.0 && w[0] < 10.0);
    }

    #[test]
    fn minimum_image_examples() {
        let bx = b(10.0);
        assert_eq!(bx.minimum_image([9.0, 0.0, 0.0]), [-1.0, 0.0, 0.0]);
        assert_eq!(bx.minimum_image([-6.0, 0.0, 0.0]), [4.0, 0.0, 0.0]);
        assert_eq!(bx.minimum_image([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]);
        assert_eq!(bx.minimum_image([5.0, -5.0, 0.0]), [-5.0, -5.0, 0.0]);
    }

    #[test]
    fn total_charge_examples() {
        let mut ps = ParticleSet::new(2, b(10.0)).unwrap();
        ps.charges_mut().copy_from_slice(&[1.0, -1.0]);
        assert_eq!(ps.total_charge(), 0.0);
        ps.ensure_neutral().unwrap();
        ps.charges_mut().copy_from_slice(&[1.0, 1.0]);
        assert_eq!(ps.total_charge(), 2.0);
        assert!(matches!(
            ps.ensure_neutral(),
            Err(Error::NeutralityViolation(q)) if q == 2.0
        ));
    }

    fn integer_multiple(diff: f64, l: f64) -> bool {
        let k = diff / l;
        (k - k.round()).abs() < 1e-9
    }

    proptest! {
        #[test]
        fn wrap_shifts_by_whole_periods(
            l in 0.5f64..100.0,
            r in proptest::array::uniform3(-1000.0f64..1000.0),
        ) {
            let bx = b(l);
            let w = bx.wrap(r);
            for a in 0..3 {
                prop_assert!(w[a] >= 0.0 && w[a] < l);
                prop_assert!(integer_multiple(w[a] - r[a], l));
            }
        }

        #[test]
        fn minimum_image_shifts_by_whole_periods(
            l in 0.5f64..100.0,
            d in proptest::array::uniform3(-1000.0f64..1000.0),
        ) {
            let bx = b(l);
            let m = bx.minimum_image(d);
            for a in 0..3 {
                prop_assert!(m[a] >= -0.5 * l && m[a] < 0.5 * l);
                prop_assert!(integer_multiple(m[a] - d[a], l));
            }
        }
    }
}
