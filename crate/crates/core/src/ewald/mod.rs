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
//! Ewald decomposition of the periodic Coulomb energy into a screened
//! short-range pair sum, a smooth reciprocal-space sum and a self term.

mod kspace;
mod params;
mod real_space;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

pub use kspace::{
    coefficient, compute_rho_hat, enumerate_kvectors, long_range_energy_forces, KTable, KVector,
    LongRangeEnergy, LongRangeKernel, ReciprocalSpace, StructureFactorKernel,
};
pub use params::{choose_parameters, EwaldParams, ParamOverrides, DEFAULT_COST_RATIO};
pub use real_space::{short_range, ShortRangeKernel};

use crate::engine::{CellList, LoopEngine};
use crate::model::ParticleSet;
use crate::Result;

/// -√(α/π) Σ q_i².
pub fn self_energy(ps: &ParticleSet, params: &EwaldParams) -> f64 {
    -(params.alpha / PI).sqrt() * ps.charges().iter().map(|q| q * q).sum::<f64>()
}

/// Components of the Ewald energy, in q²/Å.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoulombEnergy {
    pub short_range: f64,
    pub long_range: f64,
    pub self_energy: f64,
    pub long_range_imag: f64,
}

impl CoulombEnergy {
    pub fn total(&self) -> f64 {
        self.short_range + self.long_range + self.self_energy
    }
}

/// Wall time spent in each loop of the last evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CoulombTimings {
    pub short_range: Duration,
    pub structure_factor: Duration,
    pub long_range: Duration,
}

impl CoulombTimings {
    pub fn total(&self) -> Duration {
        self.short_range + self.structure_factor + self.long_range
    }
}

/// Assemble U = u^(sr) + u^(lr) + U_self and accumulate forces into `ps`.
pub fn total_coulomb(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    params: &EwaldParams,
    rs: &mut ReciprocalSpace,
    cells: &CellList,
) -> Result<CoulombEnergy> {
    ps.ensure_neutral()?;
    let sr = short_range(engine, ps, cells, params)?;
    compute_rho_hat(engine, ps, rs)?;
    let lr = long_range_energy_forces(engine, ps, rs)?;
    Ok(CoulombEnergy {
        short_range: sr,
        long_range: lr.energy,
        self_energy: self_energy(ps, params),
        long_range_imag: lr.imag_residue,
    })
}

/// Owns the parameters and k-space tables for repeated evaluations on one
/// system; the self energy is computed once.
#[derive(Clone, Debug)]
pub struct CoulombSolver {
    params: EwaldParams,
    rs: ReciprocalSpace,
    subdivision: usize,
    self_energy: Option<f64>,
    timings: CoulombTimings,
}

impl CoulombSolver {
    pub fn new(ps: &ParticleSet, params: EwaldParams) -> Result<Self> {
        Self::with_subdivision(ps, params, 1)
    }

    /// `subdivision` sets the cell list granularity (cell edge ≥ r_c / subdivision).
    pub fn with_subdivision(
        ps: &ParticleSet,
        params: EwaldParams,
        subdivision: usize,
    ) -> Result<Self> {
        let rs = enumerate_kvectors(ps.sim_box(), &params)?;
        Ok(Self {
            params,
            rs,
            subdivision: subdivision.max(1),
            self_energy: None,
            timings: CoulombTimings::default(),
        })
    }

    pub fn params(&self) -> &EwaldParams {
        &self.params
    }

    pub fn reciprocal(&self) -> &ReciprocalSpace {
        &self.rs
    }

    pub fn timings(&self) -> CoulombTimings {
        self.timings
    }

    pub fn subdivision(&self) -> usize {
        self.subdivision
    }

    #[doc(hidden)]
    pub fn set_self_energy(&mut self, value: f64) {
        self.self_energy = Some(value);
    }

    pub fn cell_list(&self, ps: &ParticleSet) -> Result<CellList> {
        CellList::build_with_subdivision(ps, self.params.r_cutoff, self.subdivision)
    }

    /// Evaluate energy and accumulate forces. Positions must lie in the box.
    pub fn compute(&mut self, engine: &LoopEngine, ps: &mut ParticleSet) -> Result<CoulombEnergy> {
        ps.ensure_neutral()?;
        let self_energy = *self
            .self_energy
            .get_or_insert_with(|| self_energy(ps, &self.params));

        let t0 = Instant::now();
        let cells = self.cell_list(ps)?;
        let sr = short_range(engine, ps, &cells, &self.params)?;
        let t1 = Instant::now();
        compute_rho_hat(engine, ps, &mut self.rs)?;
        let t2 = Instant::now();
        let lr = long_range_energy_forces(engine, ps, &mut self.rs)?;
        let t3 = Instant::now();

        self.timings = CoulombTimings {
            short_range: t1 - t0,
            structure_factor: t2 - t1,
            long_range: t3 - t2,
        };
        Ok(CoulombEnergy {
            short_range: sr,
            long_range: lr.energy,
            self_energy,
            long_range_imag: lr.imag_residue,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimulationBox;
    use crate::Error;

    fn charges(qs: &[f64]) -> ParticleSet {
        let mut ps = ParticleSet::new(qs.len(), SimulationBox::cubic(10.0).unwrap()).unwrap();
        ps.charges_mut().copy_from_slice(qs);
        for (i, r) in ps.positions_mut().iter_mut().enumerate() {
            *r = [i as f64, 0.5, 0.5];
        }
        ps
    }

    fn alpha_pi() -> EwaldParams {
        EwaldParams {
            alpha: PI,
            r_cutoff: 2.0,
            k_cutoff: 20.0,
            tolerance: 1e-6,
        }
    }

    #[test]
    fn self_energy_examples() {
        assert!((self_energy(&charges(&[1.0]), &alpha_pi()) + 1.0).abs() < 1e-15);
        assert!((self_energy(&charges(&[1.0, -1.0]), &alpha_pi()) + 2.0).abs() < 1e-15);
        assert_eq!(self_energy(&charges(&[0.0, 0.0]), &alpha_pi()), 0.0);
    }

    #[test]
    fn net_charge_is_rejected() {
        let mut ps = charges(&[1.0, 1.0]);
        let params = choose_parameters(2, ps.sim_box(), 1e-6, ParamOverrides::default()).unwrap();
        let mut solver = CoulombSolver::new(&ps, params).unwrap();
        assert!(matches!(
            solver.compute(&LoopEngine::new(1), &mut ps),
            Err(Error::NeutralityViolation(_))
        ));
        let mut rs = enumerate_kvectors(ps.sim_box(), &params).unwrap();
        let cells = CellList::build(&ps, params.r_cutoff).unwrap();
        assert!(matches!(
            total_coulomb(&LoopEngine::new(1), &mut ps, &params, &mut rs, &cells),
            Err(Error::NeutralityViolation(_))
        ));
    }

    #[test]
    fn solver_matches_free_function() {
        let mut ps = charges(&[1.0, -1.0, 0.5, -0.5]);
        let params = choose_parameters(4, ps.sim_box(), 1e-8, ParamOverrides::default()).unwrap();
        let engine = LoopEngine::new(2);
        let mut solver = CoulombSolver::with_subdivision(&ps, params, 2).unwrap();
        let a = solver.compute(&engine, &mut ps).unwrap();
        let fa = ps.forces().to_vec();
        ps.zero_forces();
        let mut rs = enumerate_kvectors(ps.sim_box(), &params).unwrap();
        let cells = CellList::build(&ps, params.r_cutoff).unwrap();
        let b = total_coulomb(&engine, &mut ps, &params, &mut rs, &cells).unwrap();
        assert!((a.total() - b.total()).abs() < 1e-13 * a.total().abs());
        for (f, g) in fa.iter().zip(ps.forces()) {
            for k in 0..3 {
                assert!((f[k] - g[k]).abs() < 1e-12);
            }
        }
        assert!(solver.timings().total() > Duration::ZERO);
    }

    #[test]
    fn self_energy_hook_is_used() {
        let mut ps = charges(&[1.0, -1.0]);
        let params = choose_parameters(2, ps.sim_box(), 1e-6, ParamOverrides::default()).unwrap();
        let mut solver = CoulombSolver::new(&ps, params).unwrap();
        solver.set_self_energy(3.0);
        let e = solver.compute(&LoopEngine::new(1), &mut ps).unwrap();
        assert_eq!(e.self_energy, 3.0);
    }
}
