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
//! Particle and pair loops over a [`ParticleSet`].
//!
//! Kernels declare an [`AccessDescriptor`] for every property and global
//! accumulator they touch. The engine zeroes `IncZero` targets, hands each
//! worker exclusive write access to a contiguous block of particle indices,
//! gives every worker private partial buffers for incremented globals and
//! sums those partials in worker-index order once all workers finish.
//!
//! Pair loops visit every ordered pair `(i, j)`, `i != j`, whose
//! minimum-image separation is below the cell list cutoff. Only the centre
//! particle `i` may be written, so kernels computing pair energies must
//! apply a factor one half themselves.

mod cell_list;

pub use cell_list::CellList;

use crate::model::{
    dot, Access, AccessDescriptor, GlobalAccumulator, ParticleSet, Property, Target, Vec3,
};
use crate::{Error, Result};

/// Environment variable overriding the configured worker count.
pub const THREADS_ENV: &str = "EWALD_MD_THREADS";

/// Minimum-image separation `r_i - r_j` handed to pair kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSeparation {
    pub dr: Vec3,
    pub r2: f64,
}

pub trait PairKernel: Sync {
    fn descriptors(&self) -> &[AccessDescriptor];

    fn apply(
        &self,
        pair: &PairSeparation,
        center: &mut CenterView<'_>,
        neighbor: &NeighborView<'_>,
        globals: &mut GlobalViews<'_>,
    ) -> Result<()>;
}

pub trait ParticleKernel: Sync {
    fn descriptors(&self) -> &[AccessDescriptor];

    fn apply(&self, particle: &mut ParticleView<'_>, globals: &mut GlobalViews<'_>) -> Result<()>;

    /// Process up to [`PARTICLE_BLOCK`] consecutive particles of one worker.
    /// Kernels override this to share data loads across particles; the
    /// default applies the kernel to each particle in order.
    fn apply_block(
        &self,
        block: &mut [ParticleView<'_>],
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        for p in block {
            self.apply(p, globals)?;
        }
        Ok(())
    }
}

/// Number of particles handed to [`ParticleKernel::apply_block`] at once.
pub const PARTICLE_BLOCK: usize = 8;

/// Pair kernel from a closure.
pub struct FnPairKernel<F> {
    descriptors: Vec<AccessDescriptor>,
    body: F,
}

impl<F> FnPairKernel<F>
where
    F: Fn(
            &PairSeparation,
            &mut CenterView<'_>,
            &NeighborView<'_>,
            &mut GlobalViews<'_>,
        ) -> Result<()>
        + Sync,
{
    pub fn new(descriptors: Vec<AccessDescriptor>, body: F) -> Self {
        Self { descriptors, body }
    }
}

impl<F> PairKernel for FnPairKernel<F>
where
    F: Fn(
            &PairSeparation,
            &mut CenterView<'_>,
            &NeighborView<'_>,
            &mut GlobalViews<'_>,
        ) -> Result<()>
        + Sync,
{
    fn descriptors(&self) -> &[AccessDescriptor] {
        &self.descriptors
    }

    fn apply(
        &self,
        pair: &PairSeparation,
        center: &mut CenterView<'_>,
        neighbor: &NeighborView<'_>,
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        (self.body)(pair, center, neighbor, globals)
    }
}

/// Particle kernel from a closure.
pub struct FnParticleKernel<F> {
    descriptors: Vec<AccessDescriptor>,
    body: F,
}

impl<F> FnParticleKernel<F>
where
    F: Fn(&mut ParticleView<'_>, &mut GlobalViews<'_>) -> Result<()> + Sync,
{
    pub fn new(descriptors: Vec<AccessDescriptor>, body: F) -> Self {
        Self { descriptors, body }
    }
}

impl<F> ParticleKernel for FnParticleKernel<F>
where
    F: Fn(&mut ParticleView<'_>, &mut GlobalViews<'_>) -> Result<()> + Sync,
{
    fn descriptors(&self) -> &[AccessDescriptor] {
        &self.descriptors
    }

    fn apply(&self, particle: &mut ParticleView<'_>, globals: &mut GlobalViews<'_>) -> Result<()> {
        (self.body)(particle, globals)
    }
}

fn violation(what: &str, index: usize) -> Error {
    Error::ContractViolation(format!(
        "kernel wrote {what} of particle {index} without an INC or INC_ZERO descriptor"
    ))
}

/// One worker's slice of the particle arrays, with its first index.
type Chunk<'a> = (
    usize,
    &'a mut [Vec3],
    &'a mut [f64],
    &'a mut [Vec3],
    &'a mut [Vec3],
    &'a mut [f64],
);

/// Read-only properties shared by all workers of a pair loop.
struct Shared<'a> {
    positions: &'a [Vec3],
    charges: &'a [f64],
    velocities: &'a [Vec3],
    masses: &'a [f64],
}

/// The particle a pair kernel may write to.
pub struct CenterView<'a> {
    index: usize,
    shared: &'a Shared<'a>,
    force: &'a mut Vec3,
    force_writable: bool,
}

impl CenterView<'_> {
    #[inline]
    pub fn index(&self) -> usize {
        self.index
    }
    #[inline]
    pub fn position(&self) -> Vec3 {
        self.shared.positions[self.index]
    }
    #[inline]
    pub fn charge(&self) -> f64 {
        self.shared.charges[self.index]
    }
    #[inline]
    pub fn mass(&self) -> f64 {
        self.shared.masses[self.index]
    }
    #[inline]
    pub fn velocity(&self) -> Vec3 {
        self.shared.velocities[self.index]
    }
    #[inline]
    pub fn force(&self) -> Vec3 {
        *self.force
    }

    #[inline]
    pub fn add_force(&mut self, f: Vec3) -> Result<()> {
        if !self.force_writable {
            return Err(violation("force", self.index));
        }
        self.force[0] += f[0];
        self.force[1] += f[1];
        self.force[2] += f[2];
        Ok(())
    }
}

/// Read-only view of the partner particle in a pair loop.
pub struct NeighborView<'a> {
    index: usize,
    shared: &'a Shared<'a>,
}

impl NeighborView<'_> {
    #[inline]
    pub fn index(&self) -> usize {
        self.index
    }
    #[inline]
    pub fn position(&self) -> Vec3 {
        self.shared.positions[self.index]
    }
    #[inline]
    pub fn charge(&self) -> f64 {
        self.shared.charges[self.index]
    }
    #[inline]
    pub fn mass(&self) -> f64 {
        self.shared.masses[self.index]
    }
    #[inline]
    pub fn velocity(&self) -> Vec3 {
        self.shared.velocities[self.index]
    }
}

/// One particle in a particle loop.
pub struct ParticleView<'a> {
    index: usize,
    position: &'a mut Vec3,
    charge: &'a mut f64,
    force: &'a mut Vec3,
    velocity: &'a mut Vec3,
    mass: &'a mut f64,
    writable: u8,
}

#[inline]
fn add3(target: &mut Vec3, d: Vec3) {
    target[0] += d[0];
    target[1] += d[1];
    target[2] += d[2];
}

impl ParticleView<'_> {
    #[inline]
    fn check(&self, p: Property, what: &str) -> Result<()> {
        if self.writable & p.bit() == 0 {
            return Err(violation(what, self.index));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self) -> usize {
        self.index
    }
    #[inline]
    pub fn position(&self) -> Vec3 {
        *self.position
    }
    #[inline]
    pub fn charge(&self) -> f64 {
        *self.charge
    }
    #[inline]
    pub fn force(&self) -> Vec3 {
        *self.force
    }
    #[inline]
    pub fn velocity(&self) -> Vec3 {
        *self.velocity
    }
    #[inline]
    pub fn mass(&self) -> f64 {
        *self.mass
    }

    pub fn add_position(&mut self, d: Vec3) -> Result<()> {
        self.check(Property::Position, "position")?;
        add3(self.position, d);
        Ok(())
    }
    pub fn add_force(&mut self, d: Vec3) -> Result<()> {
        self.check(Property::Force, "force")?;
        add3(self.force, d);
        Ok(())
    }
    pub fn add_velocity(&mut self, d: Vec3) -> Result<()> {
        self.check(Property::Velocity, "velocity")?;
        add3(self.velocity, d);
        Ok(())
    }
    pub fn add_charge(&mut self, d: f64) -> Result<()> {
        self.check(Property::Charge, "charge")?;
        *self.charge += d;
        Ok(())
    }
    pub fn add_mass(&mut self, d: f64) -> Result<()> {
        self.check(Property::Mass, "mass")?;
        *self.mass += d;
        Ok(())
    }
}

enum GlobalSlot<'a> {
    Undeclared,
    Read(&'a [f64]),
    Inc(&'a mut [f64]),
}

/// A worker's view of the loop's global accumulators. Incremented slots
/// point at worker-private partial buffers.
pub struct GlobalViews<'a> {
    slots: Vec<GlobalSlot<'a>>,
}

impl GlobalViews<'_> {
    pub fn read(&self, slot: usize) -> Result<&[f64]> {
        match self.slots.get(slot) {
            Some(GlobalSlot::Read(v)) => Ok(v),
            _ => Err(Error::ContractViolation(format!(
                "global {slot} read without a READ descriptor"
            ))),
        }
    }

    pub fn inc(&mut self, slot: usize) -> Result<&mut [f64]> {
        match self.slots.get_mut(slot) {
            Some(GlobalSlot::Inc(v)) => Ok(v),
            _ => Err(Error::ContractViolation(format!(
                "global {slot} incremented without an INC or INC_ZERO descriptor"
            ))),
        }
    }
}

/// Element-wise sum of per-worker partials, added in worker-index order.
pub fn reduce_global(partials: &[Vec<f64>]) -> GlobalAccumulator {
    let len = partials.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; len];
    for p in partials {
        debug_assert_eq!(p.len(), len);
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
    }
    GlobalAccumulator::from_values(acc)
}

struct Plan {
    writable: u8,
    zero: u8,
    globals: Vec<Option<Access>>,
}

impl Plan {
    fn new(descriptors: &[AccessDescriptor], n_globals: usize, pair_loop: bool) -> Result<Self> {
        let mut writable = 0u8;
        let mut zero = 0u8;
        let mut declared = 0u8;
        let mut globals = vec![None; n_globals];
        for d in descriptors {
            match d.target {
                Target::Particle(p) => {
                    if declared & p.bit() != 0 {
                        return Err(Error::ContractViolation(format!(
                            "{p:?} has more than one descriptor"
                        )));
                    }
                    declared |= p.bit();
                    if d.mode.writes() {
                        if pair_loop && p != Property::Force {
                            return Err(Error::ContractViolation(format!(
                                "pair loops may only increment Force, not {p:?}"
                            )));
                        }
                        writable |= p.bit();
                    }
                    if d.mode == Access::IncZero {
                        zero |= p.bit();
                    }
                }
                Target::Global(slot) => {
                    let entry = globals.get_mut(slot).ok_or_else(|| {
                        Error::ContractViolation(format!(
                            "descriptor names global {slot} but only {n_globals} were supplied"
                        ))
                    })?;
                    if entry.is_some() {
                        return Err(Error::ContractViolation(format!(
                            "global {slot} has more than one descriptor"
                        )));
                    }
                    *entry = Some(d.mode);
                }
            }
        }
        Ok(Self {
            writable,
            zero,
            globals,
        })
    }

    fn zero_particle_targets(&self, ps: &mut ParticleSet) {
        if self.zero & Property::Position.bit() != 0 {
            ps.positions.fill([0.0; 3]);
        }
        if self.zero & Property::Charge.bit() != 0 {
            ps.charges.fill(0.0);
        }
        if self.zero & Property::Force.bit() != 0 {
            ps.forces.fill([0.0; 3]);
        }
        if self.zero & Property::Velocity.bit() != 0 {
            ps.velocities.fill([0.0; 3]);
        }
        if self.zero & Property::Mass.bit() != 0 {
            ps.masses.fill(0.0);
        }
    }

    fn views<'a>(&self, reads: &[&'a [f64]], partials: &'a mut [Vec<f64>]) -> GlobalViews<'a> {
        let slots = self
            .globals
            .iter()
            .zip(reads)
            .zip(partials.iter_mut())
            .map(|((mode, r), p)| match mode {
                None => GlobalSlot::Undeclared,
                Some(Access::Read) => GlobalSlot::Read(r),
                Some(_) => GlobalSlot::Inc(p.as_mut_slice()),
            })
            .collect();
        GlobalViews { slots }
    }

    fn finish(&self, globals: &mut [&mut GlobalAccumulator], per_worker: Vec<Vec<Vec<f64>>>) {
        for (slot, mode) in self.globals.iter().enumerate() {
            let mode = match mode {
                Some(m @ (Access::Inc | Access::IncZero)) => *m,
                _ => continue,
            };
            let parts: Vec<Vec<f64>> = per_worker.iter().map(|w| w[slot].clone()).collect();
            let reduced = reduce_global(&parts);
            let target = globals[slot].values_mut();
            if mode == Access::IncZero {
                target.copy_from_slice(reduced.values());
            } else {
                for (t, r) in target.iter_mut().zip(reduced.values()) {
                    *t += r;
                }
            }
        }
    }
}

/// Executes kernels over particles or particle pairs with a fixed number of
/// workers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopEngine {
    workers: usize,
}

impl Default for LoopEngine {
    fn default() -> Self {
        Self::new(0)
    }
}

impl LoopEngine {
    /// `workers == 0` selects the available hardware parallelism.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            workers
        };
        Self { workers }
    }

    /// Worker count from [`THREADS_ENV`] when set, otherwise `configured`.
    pub fn from_env_or(configured: usize) -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n = v.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a thread count"))
                })?;
                Ok(Self::new(n))
            }
            Err(_) => Ok(Self::new(configured)),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn blocks(&self, n: usize) -> usize {
        let w = self.workers.clamp(1, n.max(1));
        n.div_ceil(w).max(1)
    }

    fn check_globals(
        descriptors: &[AccessDescriptor],
        globals: &[&mut GlobalAccumulator],
    ) -> Result<()> {
        // every supplied accumulator must be described
        for slot in 0..globals.len() {
            if !descriptors.iter().any(|d| d.target == Target::Global(slot)) {
                return Err(Error::ContractViolation(format!(
                    "global {slot} supplied without a descriptor"
                )));
            }
        }
        Ok(())
    }

    /// Run `kernel` once for every particle.
    pub fn particle_loop<K: ParticleKernel + ?Sized>(
        &self,
        kernel: &K,
        ps: &mut ParticleSet,
        globals: &mut [&mut GlobalAccumulator],
    ) -> Result<()> {
        let descriptors = kernel.descriptors();
        Self::check_globals(descriptors, globals)?;
        let plan = Plan::new(descriptors, globals.len(), false)?;
        plan.zero_particle_targets(ps);

        let n = ps.len();
        let block = self.blocks(n);
        let per_worker = {
            let reads: Vec<&[f64]> = globals.iter().map(|g| g.values()).collect();
            let plan = &plan;
            let reads = &reads;
            let chunks = ps
                .positions
                .chunks_mut(block)
                .zip(ps.charges.chunks_mut(block))
                .zip(ps.forces.chunks_mut(block))
                .zip(ps.velocities.chunks_mut(block))
                .zip(ps.masses.chunks_mut(block))
                .enumerate()
                .map(|(w, ((((p, q), f), v), m))| (w * block, p, q, f, v, m));

            let run = move |(start, p, q, f, v, m): Chunk<'_>| -> Result<Vec<Vec<f64>>> {
                let mut partials = plan.partials_for(reads);
                {
                    let mut views = plan.views(reads, &mut partials);
                    let mut block = Vec::with_capacity(PARTICLE_BLOCK);
                    for (k, ((((p, q), f), v), m)) in p
                        .iter_mut()
                        .zip(q.iter_mut())
                        .zip(f.iter_mut())
                        .zip(v.iter_mut())
                        .zip(m.iter_mut())
                        .enumerate()
                    {
                        block.push(ParticleView {
                            index: start + k,
                            position: p,
                            charge: q,
                            force: f,
                            velocity: v,
                            mass: m,
                            writable: plan.writable,
                        });
                        if block.len() == PARTICLE_BLOCK {
                            kernel.apply_block(&mut block, &mut views)?;
                            block.clear();
                        }
                    }
                    if !block.is_empty() {
                        kernel.apply_block(&mut block, &mut views)?;
                    }
                }
                Ok(partials)
            };

            if chunks.len() <= 1 {
                chunks.map(run).collect::<Result<Vec<_>>>()?
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = chunks.map(|c| s.spawn(move || run(c))).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("particle loop worker panicked"))
                        .collect::<Result<Vec<_>>>()
                })?
            }
        };
        plan.finish(globals, per_worker);
        Ok(())
    }

    /// Run `kernel` for every ordered pair closer than the cell list cutoff.
    pub fn pair_loop<K: PairKernel + ?Sized>(
        &self,
        kernel: &K,
        ps: &mut ParticleSet,
        cells: &CellList,
        globals: &mut [&mut GlobalAccumulator],
    ) -> Result<()> {
        if cells.n_particles() != ps.len() || cells.box_edge() != ps.sim_box().edge() {
            return Err(Error::InvalidArgument(
                "cell list was built for a different particle set".into(),
            ));
        }
        let descriptors = kernel.descriptors();
        Self::check_globals(descriptors, globals)?;
        let plan = Plan::new(descriptors, globals.len(), true)?;
        plan.zero_particle_targets(ps);

        let n = ps.len();
        let block = self.blocks(n);
        let sim_box = ps.sim_box();
        let wrapped: Vec<Vec3> = ps.positions.iter().map(|&r| sim_box.wrap(r)).collect();
        let wrapped = &wrapped;
        let cutoff2 = cells.cutoff() * cells.cutoff();
        let force_writable = plan.writable & Property::Force.bit() != 0;

        let per_worker = {
            let reads: Vec<&[f64]> = globals.iter().map(|g| g.values()).collect();
            let shared = Shared {
                positions: &ps.positions,
                charges: &ps.charges,
                velocities: &ps.velocities,
                masses: &ps.masses,
            };
            let (plan, reads, shared) = (&plan, &reads, &shared);
            let chunks = ps.forces.chunks_mut(block).enumerate();

            let run = move |(w, forces): (usize, &mut [Vec3])| -> Result<Vec<Vec<f64>>> {
                let mut partials = plan.partials_for(reads);
                {
                    let mut views = plan.views(reads, &mut partials);
                    let start = w * block;
                    for (k, force) in forces.iter_mut().enumerate() {
                        let i = start + k;
                        let mut center = CenterView {
                            index: i,
                            shared,
                            force,
                            force_writable,
                        };
                        visit_neighbors(kernel, &mut center, cells, wrapped, cutoff2, &mut views)?;
                    }
                }
                Ok(partials)
            };

            if chunks.len() <= 1 {
                chunks.map(run).collect::<Result<Vec<_>>>()?
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = chunks.map(|c| s.spawn(move || run(c))).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("pair loop worker panicked"))
                        .collect::<Result<Vec<_>>>()
                })?
            }
        };
        plan.finish(globals, per_worker);
        Ok(())
    }
}

#[inline]
fn visit_neighbors<K: PairKernel + ?Sized>(
    kernel: &K,
    center: &mut CenterView<'_>,
    cells: &CellList,
    wrapped: &[Vec3],
    cutoff2: f64,
    views: &mut GlobalViews<'_>,
) -> Result<()> {
    let i = center.index;
    let shared = center.shared;
    let ri = wrapped[i];
    let cell = cells.cell_of(i);
    let neighbors = cells.neighbor_cells(cell);
    match cells.image_shifts(cell) {
        Some(shifts) => {
            for (&nc, s) in neighbors.iter().zip(shifts) {
                let base = [ri[0] - s[0], ri[1] - s[1], ri[2] - s[2]];
                for &j in cells.contents(nc) {
                    let rj = wrapped[j];
                    let dr = [base[0] - rj[0], base[1] - rj[1], base[2] - rj[2]];
                    let r2 = dot(dr, dr);
                    if r2 < cutoff2 && j != i {
                        let neighbor = NeighborView { index: j, shared };
                        kernel.apply(&PairSeparation { dr, r2 }, center, &neighbor, views)?;
                    }
                }
            }
        }
        None => {
            let l = cells.box_edge();
            let half = 0.5 * l;
            let image = |d: f64| {
                if d >= half {
                    d - l
                } else if d < -half {
                    d + l
                } else {
                    d
                }
            };
            for &nc in neighbors {
                for &j in cells.contents(nc) {
                    if j == i {
                        continue;
                    }
                    let rj = wrapped[j];
                    let dr = [
                        image(ri[0] - rj[0]),
                        image(ri[1] - rj[1]),
                        image(ri[2] - rj[2]),
                    ];
                    let r2 = dot(dr, dr);
                    if r2 < cutoff2 {
                        let neighbor = NeighborView { index: j, shared };
                        kernel.apply(&PairSeparation { dr, r2 }, center, &neighbor, views)?;
                    }
                }
            }
        }
    }
    Ok(())
}

impl Plan {
    fn partials_for(&self, reads: &[&[f64]]) -> Vec<Vec<f64>> {
        self.globals
            .iter()
            .zip(reads)
            .map(|(mode, r)| match mode {
                Some(Access::Inc | Access::IncZero) => vec![0.0; r.len()],
                _ => Vec::new(),
            })
            .collect()
    }
}
