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
/// How a kernel touches one data object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Access {
    /// Read only; never mutated by the loop.
    Read,
    /// Incremented on top of the current value.
    Inc,
    /// Zeroed by the engine before the loop body runs, then incremented.
    IncZero,
}

impl Access {
    pub fn writes(self) -> bool {
        !matches!(self, Access::Read)
    }
}

/// Per-particle properties held by [`super::ParticleSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    Position,
    Charge,
    Force,
    Velocity,
    Mass,
}

impl Property {
    pub(crate) const fn bit(self) -> u8 {
        match self {
            Property::Position => 1,
            Property::Charge => 2,
            Property::Force => 4,
            Property::Velocity => 8,
            Property::Mass => 16,
        }
    }
}

/// What a descriptor binds to: a particle property or the global
/// accumulator at the given position in the loop's accumulator list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Particle(Property),
    Global(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AccessDescriptor {
    pub mode: Access,
    pub target: Target,
}

impl AccessDescriptor {
    pub const fn new(mode: Access, target: Target) -> Self {
        Self { mode, target }
    }

    pub const fn read(p: Property) -> Self {
        Self::new(Access::Read, Target::Particle(p))
    }

    pub const fn inc(p: Property) -> Self {
        Self::new(Access::Inc, Target::Particle(p))
    }

    pub const fn inc_zero(p: Property) -> Self {
        Self::new(Access::IncZero, Target::Particle(p))
    }

    pub const fn global(slot: usize, mode: Access) -> Self {
        Self::new(mode, Target::Global(slot))
    }
}
