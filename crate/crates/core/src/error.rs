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

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cutoff {cutoff} exceeds half the box edge ({half_edge})")]
    CutoffTooLarge { cutoff: f64, half_edge: f64 },
    #[error("access descriptor contract violated: {0}")]
    ContractViolation(String),
    #[error("particles {0} and {1} are coincident")]
    CoincidentParticles(usize, usize),
    #[error("box too small: {0}")]
    BoxTooSmall(String),
    #[error("no reciprocal vectors with 0 < |k| < {k_cutoff} for box edge {edge}")]
    KspaceEmpty { k_cutoff: f64, edge: f64 },
    #[error("system is not charge neutral: total charge {0:e}")]
    NeutralityViolation(f64),
    #[error("{n} particles is too many for the reference oracle (limit {limit})")]
    TooLargeForOracle { n: usize, limit: usize },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
}
