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
use crate::model::{ParticleSet, Vec3};
use crate::{Error, Result};

/// Spatial binning of particles into cubic cells of edge at least
/// `cutoff / subdivision`, with a precomputed periodic stencil of cells that
/// can hold partners closer than the cutoff.
#[derive(Clone, Debug)]
pub struct CellList {
    cutoff: f64,
    cell_edge: f64,
    cells_per_dim: usize,
    subdivision: usize,
    box_edge: f64,
    cell_of: Vec<usize>,
    cell_start: Vec<usize>,
    indices: Vec<usize>,
    stencil_start: Vec<usize>,
    stencil: Vec<usize>,
    shifts: Option<Vec<Vec3>>,
}

impl CellList {
    /// Cells of edge ≥ `cutoff` and the 27-cell periodic stencil.
    pub fn build(ps: &ParticleSet, cutoff: f64) -> Result<Self> {
        Self::build_with_subdivision(ps, cutoff, 1)
    }

    /// Cells of edge ≥ `cutoff / subdivision`. The stencil reaches
    /// `subdivision` cells in each direction and drops cells whose closest
    /// point lies at or beyond the cutoff.
    pub fn build_with_subdivision(
        ps: &ParticleSet,
        cutoff: f64,
        subdivision: usize,
    ) -> Result<Self> {
        let sim_box = ps.sim_box();
        let l = sim_box.edge();
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        if cutoff > 0.5 * l {
            return Err(Error::CutoffTooLarge {
                cutoff,
                half_edge: 0.5 * l,
            });
        }
        if subdivision == 0 {
            return Err(Error::InvalidArgument("subdivision must be ≥ 1".into()));
        }
        let sub = subdivision as f64;
        let cells_per_dim = ((sub * l / cutoff).floor() as usize).max(1);
        let cell_edge = l / cells_per_dim as f64;
        let n_cells = cells_per_dim * cells_per_dim * cells_per_dim;

        let cell_of: Vec<usize> = ps
            .positions()
            .iter()
            .map(|&r| {
                let w = sim_box.wrap(r);
                let c = w.map(|x| ((x / cell_edge) as usize).min(cells_per_dim - 1));
                (c[2] * cells_per_dim + c[1]) * cells_per_dim + c[0]
            })
            .collect();

        let mut cell_start = vec![0usize; n_cells + 1];
        for &c in &cell_of {
            cell_start[c + 1] += 1;
        }
        for c in 0..n_cells {
            cell_start[c + 1] += cell_start[c];
        }
        let mut fill = cell_start.clone();
        let mut indices = vec![0usize; cell_of.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            indices[fill[c]] = i;
            fill[c] += 1;
        }

        let reach = subdivision as isize;
        let n = cells_per_dim as isize;
        let cutoff2 = cutoff * cutoff;
        let mut stencil_start = Vec::with_capacity(n_cells + 1);
        let mut stencil = Vec::new();
        // each stencil offset reaches a distinct cell, so the periodic image
        // of every stencil entry is fixed
        let unique = 2 * reach < n;
        let mut shifts = Vec::new();
        let mut scratch: Vec<(usize, [isize; 3])> = Vec::new();
        for cz in 0..n {
            for cy in 0..n {
                for cx in 0..n {
                    stencil_start.push(stencil.len());
                    scratch.clear();
                    for dz in -reach..=reach {
                        for dy in -reach..=reach {
                            for dx in -reach..=reach {
                                let gap = |d: isize| ((d.abs() - 1).max(0) as f64) * cell_edge;
                                let g2 = gap(dx).powi(2) + gap(dy).powi(2) + gap(dz).powi(2);
                                if g2 >= cutoff2 {
                                    continue;
                                }
                                let x = (cx + dx).rem_euclid(n);
                                let y = (cy + dy).rem_euclid(n);
                                let z = (cz + dz).rem_euclid(n);
                                let image = [
                                    (cx + dx).div_euclid(n),
                                    (cy + dy).div_euclid(n),
                                    (cz + dz).div_euclid(n),
                                ];
                                scratch.push((((z * n + y) * n + x) as usize, image));
                            }
                        }
                    }
                    scratch.sort_unstable();
                    if unique {
                        shifts.extend(scratch.iter().map(|(_, m)| m.map(|k| k as f64 * l)));
                    } else {
                        scratch.dedup_by_key(|e| e.0);
                    }
                    stencil.extend(scratch.iter().map(|e| e.0));
                }
            }
        }
        stencil_start.push(stencil.len());

        Ok(Self {
            cutoff,
            cell_edge,
            cells_per_dim,
            subdivision,
            box_edge: l,
            cell_of,
            cell_start,
            indices,
            stencil_start,
            stencil,
            shifts: unique.then_some(shifts),
        })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn subdivision(&self) -> usize {
        self.subdivision
    }

    pub fn box_edge(&self) -> f64 {
        self.box_edge
    }

    pub fn n_cells(&self) -> usize {
        self.cell_start.len() - 1
    }

    /// Number of particles binned.
    pub fn n_particles(&self) -> usize {
        self.cell_of.len()
    }

    #[inline]
    pub fn cell_of(&self, particle: usize) -> usize {
        self.cell_of[particle]
    }

    #[inline]
    pub fn contents(&self, cell: usize) -> &[usize] {
        &self.indices[self.cell_start[cell]..self.cell_start[cell + 1]]
    }

    /// Distinct cells, the cell itself included, that may hold partners of
    /// particles in `cell`.
    #[inline]
    pub fn neighbor_cells(&self, cell: usize) -> &[usize] {
        &self.stencil[self.stencil_start[cell]..self.stencil_start[cell + 1]]
    }

    /// Image shift added to wrapped partner positions for each entry of
    /// [`Self::neighbor_cells`], when every entry has a single image.
    #[inline]
    pub fn image_shifts(&self, cell: usize) -> Option<&[Vec3]> {
        self.shifts
            .as_ref()
            .map(|s| &s[self.stencil_start[cell]..self.stencil_start[cell + 1]])
    }
}
