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
//! Benchmark systems, time stepping and run orchestration.

mod integrator;
mod lattice;

use std::time::{Duration, Instant};

pub use integrator::{
    velocity_verlet_step, ForceAssembler, ForceField, ForceTimings, PotentialEnergy, StepReport,
};
pub use lattice::{
    assign_velocities, init_rocksalt, kinetic_energy, rocksalt_cells_for, rocksalt_in_box,
    DEFAULT_SPACING,
};

use crate::engine::LoopEngine;
use crate::ewald::{choose_parameters, CoulombSolver, EwaldParams, ParamOverrides};
use crate::model::ParticleSet;
use crate::potentials::LJParams;
use crate::{Error, Result};

/// Cell list subdivision used for all pair loops unless configured.
pub const DEFAULT_SUBDIVISION: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_particles: usize,
    /// Box edge in Å.
    pub box_edge: f64,
    pub tolerance: f64,
    pub overrides: ParamOverrides,
    pub lj: LJParams,
    pub coulomb_enabled: bool,
    pub lj_enabled: bool,
    pub dt: f64,
    pub n_steps: usize,
    /// kT for the initial velocity draw; 0 starts at rest.
    pub temperature: f64,
    pub seed: u64,
    /// Worker count; 0 picks the available parallelism.
    pub threads: usize,
    pub subdivision: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_particles: 1728,
            box_edge: 30.0,
            tolerance: 1e-6,
            overrides: ParamOverrides::default(),
            lj: LJParams::default(),
            coulomb_enabled: true,
            lj_enabled: true,
            dt: 0.005,
            n_steps: 10,
            temperature: 0.0,
            seed: 0,
            threads: 0,
            subdivision: DEFAULT_SUBDIVISION,
        }
    }
}

impl SimConfig {
    /// Rock-salt system at the benchmark density 1/(2.5 Å)³.
    pub fn rocksalt(n: usize) -> Result<Self> {
        let c = rocksalt_cells_for(n)?;
        Ok(Self {
            n_particles: n,
            box_edge: 2.0 * c as f64 * DEFAULT_SPACING,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.box_edge.is_finite() && self.box_edge > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box edge must be positive, got {}",
                self.box_edge
            )));
        }
        if self.subdivision == 0 {
            return Err(Error::InvalidArgument(
                "subdivision must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The rock-salt particle set described by this config.
    pub fn build_system(&self) -> Result<ParticleSet> {
        self.validate()?;
        rocksalt_in_box(self.n_particles, self.box_edge)
    }

    pub fn ewald_params(&self, ps: &ParticleSet) -> Result<EwaldParams> {
        choose_parameters(ps.len(), ps.sim_box(), self.tolerance, self.overrides)
    }

    /// Force field for `ps` with the enabled kernels.
    pub fn force_field(&self, ps: &ParticleSet) -> Result<ForceField> {
        let coulomb = if self.coulomb_enabled {
            let params = self.ewald_params(ps)?;
            Some(CoulombSolver::with_subdivision(
                ps,
                params,
                self.subdivision,
            )?)
        } else {
            None
        };
        let lj = self.lj_enabled.then_some(self.lj);
        Ok(ForceField::new(coulomb, lj))
    }
}

/// Per-step wall time by component.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepTimings {
    pub short_range: Duration,
    pub structure_factor: Duration,
    pub long_range: Duration,
    pub lj: Duration,
    pub integration: Duration,
    pub wall: Duration,
}

impl StepTimings {
    pub fn components(&self) -> Duration {
        self.short_range + self.structure_factor + self.long_range + self.lj + self.integration
    }

    fn from_parts(forces: ForceTimings, integration: Duration, wall: Duration) -> Self {
        Self {
            short_range: forces.coulomb.short_range,
            structure_factor: forces.coulomb.structure_factor,
            long_range: forces.coulomb.long_range,
            lj: forces.lj,
            integration: integration + forces.zero,
            wall,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergySample {
    pub step: usize,
    pub coulomb: f64,
    pub lj: f64,
    pub kinetic: f64,
    /// Imaginary residue of the long-range sum.
    pub long_range_imag: f64,
}

impl EnergySample {
    pub fn potential(&self) -> f64 {
        self.coulomb + self.lj
    }

    pub fn total(&self) -> f64 {
        self.coulomb + self.lj + self.kinetic
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub n_particles: usize,
    pub box_edge: f64,
    pub workers: usize,
    pub params: Option<EwaldParams>,
    /// Retained k-vectors, counting k and -k.
    pub n_kvectors: usize,
    /// Parameter choice, table setup and the initial force evaluation.
    pub setup: Duration,
    pub setup_timings: StepTimings,
    pub steps: Vec<StepTimings>,
    pub energies: Vec<EnergySample>,
    pub max_displacement: f64,
}

impl RunMetrics {
    /// max_t |E(t) - E(0)| / |E(0)|.
    pub fn max_relative_deviation(&self) -> f64 {
        let Some(first) = self.energies.first() else {
            return 0.0;
        };
        let e0 = first.total();
        self.energies
            .iter()
            .map(|e| ((e.total() - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    /// Relative change of the mean total energy between the first and last
    /// `window` samples.
    pub fn windowed_drift(&self, window: usize) -> f64 {
        let n = self.energies.len();
        if n == 0 || window == 0 {
            return 0.0;
        }
        let w = window.min(n);
        let mean = |s: &[EnergySample]| s.iter().map(|e| e.total()).sum::<f64>() / s.len() as f64;
        let first = mean(&self.energies[..w]);
        let last = mean(&self.energies[n - w..]);
        ((last - first) / first).abs()
    }

    /// Median per-step timings over the steps after `warmup`.
    pub fn median_step(&self, warmup: usize) -> Option<StepTimings> {
        let steps = self.steps.get(warmup..).filter(|s| !s.is_empty())?;
        let median = |f: fn(&StepTimings) -> Duration| {
            let mut v: Vec<Duration> = steps.iter().map(f).collect();
            v.sort();
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                (v[m - 1] + v[m]) / 2
            }
        };
        Some(StepTimings {
            short_range: median(|s| s.short_range),
            structure_factor: median(|s| s.structure_factor),
            long_range: median(|s| s.long_range),
            lj: median(|s| s.lj),
            integration: median(|s| s.integration),
            wall: median(|s| s.wall),
        })
    }
}

/// Build the configured rock-salt system and run it.
pub fn run(config: &SimConfig) -> Result<RunMetrics> {
    let mut ps = config.build_system()?;
    run_system(config, &mut ps)
}

/// Run `config` on an existing particle set; `n_particles` and `box_edge`
/// in the config are ignored.
pub fn run_system(config: &SimConfig, ps: &mut ParticleSet) -> Result<RunMetrics> {
    let engine = LoopEngine::from_env_or(config.threads)?;
    run_with_engine(config, &engine, ps)
}

/// As [`run_system`] with an explicit engine; `config.threads` and the
/// environment override are ignored.
pub fn run_with_engine(
    config: &SimConfig,
    engine: &LoopEngine,
    ps: &mut ParticleSet,
) -> Result<RunMetrics> {
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {}",
            config.dt
        )));
    }
    let t0 = Instant::now();
    ps.wrap_positions();
    if config.temperature > 0.0 {
        assign_velocities(ps, config.temperature, config.seed)?;
    }
    let mut field = config.force_field(ps)?;
    let potential = field.compute(engine, ps)?;
    let setup = t0.elapsed();

    let mut metrics = RunMetrics {
        n_particles: ps.len(),
        box_edge: ps.sim_box().edge(),
        workers: engine.workers(),
        params: field.coulomb().map(|c| *c.params()),
        n_kvectors: field.coulomb().map_or(0, |c| c.reciprocal().full_len()),
        setup,
        setup_timings: StepTimings::from_parts(field.timings(), Duration::ZERO, setup),
        steps: Vec::with_capacity(config.n_steps),
        energies: Vec::with_capacity(config.n_steps + 1),
        max_displacement: 0.0,
    };
    metrics.energies.push(sample(0, potential, ps));

    for step in 1..=config.n_steps {
        let t = Instant::now();
        let report = velocity_verlet_step(engine, ps, config.dt, &mut field)?;
        let wall = t.elapsed();
        metrics.steps.push(StepTimings::from_parts(
            field.timings(),
            report.integration,
            wall,
        ));
        metrics.max_displacement = metrics.max_displacement.max(report.max_displacement);
        metrics.energies.push(sample(step, field.last_energy(), ps));
        log::debug!("step {step}: E = {:.12e}", metrics.energies[step].total());
    }
    Ok(metrics)
}

fn sample(step: usize, p: PotentialEnergy, ps: &ParticleSet) -> EnergySample {
    EnergySample {
        step,
        coulomb: p.coulomb_total(),
        lj: p.lj,
        kinetic: kinetic_energy(ps),
        long_range_imag: p.coulomb.map_or(0.0, |c| c.long_range_imag),
    }
}
