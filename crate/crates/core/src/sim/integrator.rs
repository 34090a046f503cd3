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
//! Force assembly and velocity-Verlet time stepping.

use std::time::{Duration, Instant};

use crate::engine::{CellList, FnParticleKernel, LoopEngine};
use crate::ewald::{CoulombEnergy, CoulombSolver, CoulombTimings};
use crate::model::{AccessDescriptor, ParticleSet, Property};
use crate::potentials::{lennard_jones, LJParams};
use crate::{Error, Result};

/// Refreshes the force property for the current positions and returns the
/// potential energy. Implementations zero forces themselves.
pub trait ForceAssembler {
    fn assemble(&mut self, engine: &LoopEngine, ps: &mut ParticleSet) -> Result<f64>;
}

impl<F> ForceAssembler for F
where
    F: FnMut(&LoopEngine, &mut ParticleSet) -> Result<f64>,
{
    fn assemble(&mut self, engine: &LoopEngine, ps: &mut ParticleSet) -> Result<f64> {
        self(engine, ps)
    }
}

/// Wall time of the last assembly, per component.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForceTimings {
    pub coulomb: CoulombTimings,
    pub lj: Duration,
    pub zero: Duration,
}

/// Energy terms of the last assembly.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PotentialEnergy {
    pub coulomb: Option<CoulombEnergy>,
    pub lj: f64,
}

impl PotentialEnergy {
    pub fn coulomb_total(&self) -> f64 {
        self.coulomb.map_or(0.0, |c| c.total())
    }

    pub fn total(&self) -> f64 {
        self.coulomb_total() + self.lj
    }
}

/// Zero forces, then Coulomb, then Lennard-Jones.
#[derive(Clone, Debug)]
pub struct ForceField {
    coulomb: Option<CoulombSolver>,
    lj: Option<LJParams>,
    lj_subdivision: usize,
    last: PotentialEnergy,
    timings: ForceTimings,
}

impl ForceField {
    pub fn new(coulomb: Option<CoulombSolver>, lj: Option<LJParams>) -> Self {
        let lj_subdivision = coulomb.as_ref().map_or(1, |c| c.subdivision());
        Self {
            coulomb,
            lj,
            lj_subdivision,
            last: PotentialEnergy::default(),
            timings: ForceTimings::default(),
        }
    }

    pub fn coulomb(&self) -> Option<&CoulombSolver> {
        self.coulomb.as_ref()
    }

    pub fn coulomb_mut(&mut self) -> Option<&mut CoulombSolver> {
        self.coulomb.as_mut()
    }

    pub fn lj(&self) -> Option<&LJParams> {
        self.lj.as_ref()
    }

    pub fn last_energy(&self) -> PotentialEnergy {
        self.last
    }

    pub fn timings(&self) -> ForceTimings {
        self.timings
    }

    pub fn compute(
        &mut self,
        engine: &LoopEngine,
        ps: &mut ParticleSet,
    ) -> Result<PotentialEnergy> {
        let t0 = Instant::now();
        ps.zero_forces();
        let zero = t0.elapsed();

        let coulomb = match &mut self.coulomb {
            Some(solver) => Some(solver.compute(engine, ps)?),
            None => None,
        };
        let coulomb_timings = self
            .coulomb
            .as_ref()
            .map(|s| s.timings())
            .unwrap_or_default();

        let t1 = Instant::now();
        let lj = match &self.lj {
            Some(p) => {
                let cells = CellList::build_with_subdivision(ps, p.cutoff, self.lj_subdivision)?;
                lennard_jones(engine, ps, &cells, p)?
            }
            None => 0.0,
        };
        self.timings = ForceTimings {
            coulomb: coulomb_timings,
            lj: t1.elapsed(),
            zero,
        };
        self.last = PotentialEnergy { coulomb, lj };
        Ok(self.last)
    }
}

impl ForceAssembler for ForceField {
    fn assemble(&mut self, engine: &LoopEngine, ps: &mut ParticleSet) -> Result<f64> {
        Ok(self.compute(engine, ps)?.total())
    }
}

/// Result of one integration step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub potential: f64,
    /// Largest |Δr| of any particle over the step.
    pub max_displacement: f64,
    /// Time spent in the kicks, drift and wrap.
    pub integration: Duration,
    /// Time spent inside the force assembler.
    pub forces: Duration,
}

fn kick(engine: &LoopEngine, ps: &mut ParticleSet, half_dt: f64) -> Result<()> {
    let kernel = FnParticleKernel::new(
        vec![
            AccessDescriptor::read(Property::Force),
            AccessDescriptor::read(Property::Mass),
            AccessDescriptor::inc(Property::Velocity),
        ],
        |p, _| {
            let m = p.mass();
            if m.is_nan() || m <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "particle {} has non-positive mass {m}",
                    p.index()
                )));
            }
            let f = p.force();
            let s = half_dt / m;
            p.add_velocity([s * f[0], s * f[1], s * f[2]])
        },
    );
    engine.particle_loop(&kernel, ps, &mut [])
}

fn drift(engine: &LoopEngine, ps: &mut ParticleSet, dt: f64) -> Result<f64> {
    let kernel = FnParticleKernel::new(
        vec![
            AccessDescriptor::read(Property::Velocity),
            AccessDescriptor::inc(Property::Position),
        ],
        |p, _| {
            let v = p.velocity();
            p.add_position([dt * v[0], dt * v[1], dt * v[2]])
        },
    );
    engine.particle_loop(&kernel, ps, &mut [])?;
    let vmax2 = ps
        .velocities()
        .iter()
        .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        .fold(0.0, f64::max);
    Ok(vmax2.sqrt() * dt)
}

/// One velocity-Verlet step. Forces must be current on entry and are current
/// on exit; positions are wrapped into the box.
pub fn velocity_verlet_step<A: ForceAssembler + ?Sized>(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    dt: f64,
    assembler: &mut A,
) -> Result<StepReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let t0 = Instant::now();
    kick(engine, ps, 0.5 * dt)?;
    let max_displacement = drift(engine, ps, dt)?;
    ps.wrap_positions();
    let t1 = Instant::now();
    let potential = assembler.assemble(engine, ps)?;
    let t2 = Instant::now();
    kick(engine, ps, 0.5 * dt)?;
    let t3 = Instant::now();
    Ok(StepReport {
        potential,
        max_displacement,
        integration: (t1 - t0) + (t3 - t2),
        forces: t2 - t1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimulationBox;
    use crate::sim::kinetic_energy;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn particles(n: usize) -> ParticleSet {
        let mut ps = ParticleSet::new(n, SimulationBox::cubic(20.0).unwrap()).unwrap();
        ps.masses_mut().fill(2.0);
        ps
    }

    #[test]
    fn zero_forces_is_a_fixed_point() {
        let mut ps = particles(3);
        ps.positions_mut()[1] = [1.0, 2.0, 3.0];
        let before = ps.positions().to_vec();
        let mut none = |_: &LoopEngine, p: &mut ParticleSet| {
            p.zero_forces();
            Ok(0.0)
        };
        for _ in 0..5 {
            velocity_verlet_step(&LoopEngine::new(2), &mut ps, 0.1, &mut none).unwrap();
        }
        assert_eq!(ps.positions(), &before[..]);
    }

    #[test]
    fn constant_force_kinematics() {
        let f = [0.3, -0.6, 1.2];
        let mut ps = particles(1);
        ps.positions_mut()[0] = [5.0, 5.0, 5.0];
        let mut constant = move |_: &LoopEngine, p: &mut ParticleSet| {
            p.forces_mut()[0] = f;
            Ok(0.0)
        };
        constant(&LoopEngine::new(1), &mut ps).unwrap();
        let dt = 0.05;
        velocity_verlet_step(&LoopEngine::new(1), &mut ps, dt, &mut constant).unwrap();
        for a in 0..3 {
            let expected = 5.0 + f[a] / 2.0 * dt * dt / 2.0;
            assert_relative_eq!(ps.positions()[0][a], expected, max_relative = 1e-15);
            assert_relative_eq!(ps.velocities()[0][a], f[a] / 2.0 * dt, max_relative = 1e-14);
        }
    }

    #[test]
    fn positions_are_wrapped() {
        let mut ps = particles(1);
        ps.positions_mut()[0] = [19.9, 0.05, 10.0];
        ps.velocities_mut()[0] = [1.0, -1.0, 0.0];
        let mut none = |_: &LoopEngine, _: &mut ParticleSet| Ok(0.0);
        let r = velocity_verlet_step(&LoopEngine::new(1), &mut ps, 0.2, &mut none).unwrap();
        let p = ps.positions()[0];
        assert!((p[0] - 0.1).abs() < 1e-12 && (p[1] - 19.85).abs() < 1e-12);
        assert_relative_eq!(r.max_displacement, 0.2 * 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut ps = particles(1);
        let mut none = |_: &LoopEngine, _: &mut ParticleSet| Ok(0.0);
        assert!(velocity_verlet_step(&LoopEngine::new(1), &mut ps, 0.0, &mut none).is_err());
        ps.masses_mut()[0] = 0.0;
        assert!(velocity_verlet_step(&LoopEngine::new(1), &mut ps, 0.1, &mut none).is_err());
    }

    /// Two unit masses joined by a spring of stiffness k.
    fn spring(k: f64, rest: f64) -> impl FnMut(&LoopEngine, &mut ParticleSet) -> Result<f64> {
        move |_, p| {
            let d = p
                .sim_box()
                .minimum_image(crate::model::sub(p.positions()[1], p.positions()[0]));
            let r = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = k * (r - rest) / r;
            p.forces_mut()[0] = d.map(|x| s * x);
            p.forces_mut()[1] = d.map(|x| -s * x);
            Ok(0.5 * k * (r - rest) * (r - rest))
        }
    }

    #[test]
    fn harmonic_oscillator_energy_drift() {
        let (k, rest) = (4.0, 3.0);
        let mut ps = particles(2);
        ps.masses_mut().fill(1.0);
        ps.positions_mut()[0] = [8.0, 10.0, 10.0];
        ps.positions_mut()[1] = [11.5, 10.0, 10.0];
        let engine = LoopEngine::new(1);
        let mut force = spring(k, rest);
        let mut u = force(&engine, &mut ps).unwrap();
        // reduced mass ½
        let period = 2.0 * PI / (2.0 * k).sqrt();
        let dt = period / 100.0;
        let mut trace = vec![u + kinetic_energy(&ps)];
        for _ in 0..1000 {
            u = velocity_verlet_step(&engine, &mut ps, dt, &mut force)
                .unwrap()
                .potential;
            trace.push(u + kinetic_energy(&ps));
        }
        let e0 = trace[0];
        let first: f64 = trace[..100].iter().sum::<f64>() / 100.0;
        let last: f64 = trace[trace.len() - 100..].iter().sum::<f64>() / 100.0;
        assert!(((last - first) / e0).abs() < 1e-6, "{first} {last}");
        // pointwise fluctuation stays at the (ω dt)² level
        let worst = trace
            .iter()
            .map(|e| ((e - e0) / e0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }
}
