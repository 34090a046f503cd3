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
//! Slow reference evaluations used to validate the Ewald pipeline.
//!
//! Nothing here shares code with [`crate::ewald`] beyond the particle model:
//! sums run over explicit periodic images and the full k-sphere with direct
//! trigonometry, single-threaded.

use std::f64::consts::PI;

use crate::model::{dot, ParticleSet, SimulationBox, Vec3};
use crate::{Error, Result};

/// Particle limit for [`direct_ewald_reference`].
pub const ORACLE_MAX_PARTICLES: usize = 200;

/// Tolerance the reference k-sphere is sized from before doubling.
const REFERENCE_TOLERANCE: f64 = 1e-6;

/// Image sum over a cube of whole cells |n|∞ ≤ n_shells, boundary cells
/// weighted ½ per outermost coordinate (faces ½, edges ¼, corners ⅛).
///
/// A cube of replicated cells surrounded by vacuum carries a surface term
/// 2π|M|²/(3V) for cell dipole M = Σ q_i r_i. The returned value has it
/// removed so it is directly comparable with Ewald sums, which assume a
/// conducting boundary. [`direct_lattice_sum_vacuum`] keeps it.
pub fn direct_lattice_sum(ps: &ParticleSet, n_shells: usize) -> Result<f64> {
    Ok(direct_lattice_sum_vacuum(ps, n_shells)? - surface_dipole_energy(ps))
}

/// Raw weighted image sum, including the vacuum surface term.
pub fn direct_lattice_sum_vacuum(ps: &ParticleSet, n_shells: usize) -> Result<f64> {
    if n_shells == 0 {
        return Err(Error::InvalidArgument("n_shells must be at least 1".into()));
    }
    ps.ensure_neutral()?;
    let l = ps.sim_box().edge();
    let ns = n_shells as i64;
    let pos = ps.positions();
    let q = ps.charges();

    let mut total = 0.0;
    for nx in -ns..=ns {
        for ny in -ns..=ns {
            for nz in -ns..=ns {
                let outer = [nx, ny, nz].iter().filter(|c| c.abs() == ns).count();
                let weight = 0.5f64.powi(outer as i32);
                let shift = [nx as f64 * l, ny as f64 * l, nz as f64 * l];
                let origin = nx == 0 && ny == 0 && nz == 0;
                let mut cell = 0.0;
                for i in 0..pos.len() {
                    if q[i] == 0.0 {
                        continue;
                    }
                    let mut row = 0.0;
                    for j in 0..pos.len() {
                        if origin && i == j {
                            continue;
                        }
                        let d = [
                            pos[i][0] - pos[j][0] + shift[0],
                            pos[i][1] - pos[j][1] + shift[1],
                            pos[i][2] - pos[j][2] + shift[2],
                        ];
                        let r2 = dot(d, d);
                        if r2 == 0.0 {
                            if q[j] != 0.0 {
                                return Err(Error::CoincidentParticles(i, j));
                            }
                            continue;
                        }
                        row += q[j] / r2.sqrt();
                    }
                    cell += q[i] * row;
                }
                total += weight * cell;
            }
        }
    }
    Ok(0.5 * total)
}

/// 2π|M|²/(3V), M = Σ q_i r_i with positions as stored.
pub fn surface_dipole_energy(ps: &ParticleSet) -> f64 {
    let mut m = [0.0; 3];
    for (r, q) in ps.positions().iter().zip(ps.charges()) {
        for a in 0..3 {
            m[a] += q * r[a];
        }
    }
    2.0 * PI * dot(m, m) / (3.0 * ps.sim_box().volume())
}

/// Ewald energy and forces evaluated without truncation shortcuts: every
/// pair over the minimum image and its surrounding image shells, and the
/// full k-sphere at twice the usual reciprocal cutoff.
pub fn direct_ewald_reference(ps: &ParticleSet, alpha: f64) -> Result<(f64, Vec<Vec3>)> {
    let n = ps.len();
    if n > ORACLE_MAX_PARTICLES {
        return Err(Error::TooLargeForOracle {
            n,
            limit: ORACLE_MAX_PARTICLES,
        });
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    ps.ensure_neutral()?;
    let sim_box = ps.sim_box();
    let (u_real, f_real) = reference_real(ps, sim_box, alpha)?;
    let (u_recip, f_recip) = reference_reciprocal(ps, sim_box, alpha);
    let u_self = -(alpha / PI).sqrt() * ps.charges().iter().map(|q| q * q).sum::<f64>();
    let forces = f_real
        .iter()
        .zip(&f_recip)
        .map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
        .collect();
    Ok((u_real + u_recip + u_self, forces))
}

fn reference_real(
    ps: &ParticleSet,
    sim_box: SimulationBox,
    alpha: f64,
) -> Result<(f64, Vec<Vec3>)> {
    let l = sim_box.edge();
    let sa = alpha.sqrt();
    // images with |d| beyond r_far contribute below 1e-17 relative to 1/r
    let r_far = 9.0 / sa;
    let shells = ((r_far / l) + 0.5).ceil().max(1.0) as i64;
    let gauss = 2.0 * (alpha / PI).sqrt();
    let pos = ps.positions();
    let q = ps.charges();

    let mut energy = 0.0;
    let mut forces = vec![[0.0; 3]; pos.len()];
    for i in 0..pos.len() {
        for j in 0..pos.len() {
            let qq = q[i] * q[j];
            if qq == 0.0 {
                continue;
            }
            let base = sim_box.minimum_image([
                pos[i][0] - pos[j][0],
                pos[i][1] - pos[j][1],
                pos[i][2] - pos[j][2],
            ]);
            for nx in -shells..=shells {
                for ny in -shells..=shells {
                    for nz in -shells..=shells {
                        let d = [
                            base[0] + nx as f64 * l,
                            base[1] + ny as f64 * l,
                            base[2] + nz as f64 * l,
                        ];
                        let r2 = dot(d, d);
                        if r2 == 0.0 {
                            if i == j {
                                continue;
                            }
                            return Err(Error::CoincidentParticles(i, j));
                        }
                        let r = r2.sqrt();
                        let e = libm::erfc(sa * r) / r;
                        energy += 0.5 * qq * e;
                        let s = qq * (e + gauss * (-alpha * r2).exp()) / r2;
                        for a in 0..3 {
                            forces[i][a] += s * d[a];
                        }
                    }
                }
            }
        }
    }
    Ok((energy, forces))
}

fn reference_reciprocal(ps: &ParticleSet, sim_box: SimulationBox, alpha: f64) -> (f64, Vec<Vec3>) {
    let l = sim_box.edge();
    let volume = sim_box.volume();
    let s = (-REFERENCE_TOLERANCE.ln()).sqrt();
    let kc = 2.0 * (2.0 * s * alpha.sqrt());
    let unit = 2.0 * PI / l;
    let m_max = (kc / unit).ceil() as i64;
    let pos = ps.positions();
    let q = ps.charges();

    let mut energy = 0.0;
    let mut forces = vec![[0.0; 3]; pos.len()];
    let mut phase = vec![0.0; pos.len()];
    for mx in -m_max..=m_max {
        for my in -m_max..=m_max {
            for mz in -m_max..=m_max {
                let k = [unit * mx as f64, unit * my as f64, unit * mz as f64];
                let k2 = dot(k, k);
                if k2 == 0.0 || k2 >= kc * kc {
                    continue;
                }
                let c = 4.0 * PI / (volume * k2) * (-k2 / (4.0 * alpha)).exp();
                let (mut re, mut im) = (0.0, 0.0);
                for (p, r) in phase.iter_mut().zip(pos) {
                    *p = dot(k, *r);
                }
                for (p, qj) in phase.iter().zip(q) {
                    re += qj * p.cos();
                    im -= qj * p.sin();
                }
                energy += 0.5 * c * (re * re + im * im);
                for (i, p) in phase.iter().enumerate() {
                    // Im[e^{ik·r_i} ρ̂_k]
                    let t = p.cos() * im + p.sin() * re;
                    for a in 0..3 {
                        forces[i][a] += k[a] * c * q[i] * t;
                    }
                }
            }
        }
    }
    (energy, forces)
}

/// Central-difference forces -[U(r + h e) - U(r - h e)] / 2h for every
/// particle and axis. `energy` receives a displaced copy of `ps`.
pub fn finite_difference_forces<F>(mut energy: F, ps: &ParticleSet, h: f64) -> Result<Vec<Vec3>>
where
    F: FnMut(&ParticleSet) -> Result<f64>,
{
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {h} outside [1e-6, 1e-2]"
        )));
    }
    let mut work = ps.clone();
    let mut out = vec![[0.0; 3]; ps.len()];
    for i in 0..ps.len() {
        for a in 0..3 {
            let x = ps.positions()[i][a];
            work.positions_mut()[i][a] = x + h;
            let up = energy(&work)?;
            work.positions_mut()[i][a] = x - h;
            let down = energy(&work)?;
            work.positions_mut()[i][a] = x;
            out[i][a] = -(up - down) / (2.0 * h);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rocksalt_cell() -> ParticleSet {
        let a = 5.64;
        let mut ps = ParticleSet::new(8, SimulationBox::cubic(a).unwrap()).unwrap();
        let na = [
            [0.0, 0.0, 0.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        for (k, f) in na.iter().enumerate() {
            ps.positions_mut()[k] = f.map(|x| x * a);
            ps.charges_mut()[k] = 1.0;
            let cl = [(f[0] + 0.5) % 1.0, f[1], f[2]];
            ps.positions_mut()[k + 4] = cl.map(|x| x * a);
            ps.charges_mut()[k + 4] = -1.0;
        }
        ps
    }

    fn pair(l: f64, d: f64) -> ParticleSet {
        let mut ps = ParticleSet::new(2, SimulationBox::cubic(l).unwrap()).unwrap();
        ps.positions_mut()[0] = [1.0, 1.0, 1.0];
        ps.positions_mut()[1] = [1.0 + d, 1.0, 1.0];
        ps.charges_mut().copy_from_slice(&[1.0, -1.0]);
        ps
    }

    #[test]
    fn rocksalt_madelung_constant() {
        let ps = rocksalt_cell();
        let u8 = direct_lattice_sum(&ps, 8).unwrap();
        let u12 = direct_lattice_sum(&ps, 12).unwrap();
        assert_relative_eq!(u8, u12, max_relative = 1e-5);
        // 4 ion pairs; nearest-neighbour distance a/2
        let madelung = -u12 / 4.0 * (5.64 / 2.0);
        assert_relative_eq!(madelung, 1.747_564_594_633_182, max_relative = 1e-6);
    }

    #[test]
    fn shell_deltas_shrink_beyond_four() {
        let ps = rocksalt_cell();
        let values: Vec<f64> = (4..=9)
            .map(|n| direct_lattice_sum(&ps, n).unwrap())
            .collect();
        let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(deltas.windows(2).all(|d| d[1] < d[0]), "{deltas:?}");
    }

    #[test]
    fn dipolar_pair_converges_to_conducting_boundary() {
        let ps = pair(10.0, 2.5);
        let reference = direct_ewald_reference(&ps, 0.3).unwrap().0;
        assert_relative_eq!(reference, -0.414_323_204_998_754_9, max_relative = 1e-9);
        let lattice = direct_lattice_sum(&ps, 12).unwrap();
        assert_relative_eq!(lattice, reference, max_relative = 1e-5);
        let vacuum = direct_lattice_sum_vacuum(&ps, 12).unwrap();
        assert!((vacuum - reference).abs() > 1e-2);
    }

    #[test]
    fn zero_charges() {
        let mut ps = pair(10.0, 2.0);
        ps.charges_mut().fill(0.0);
        assert_eq!(direct_lattice_sum(&ps, 2).unwrap(), 0.0);
        let (u, f) = direct_ewald_reference(&ps, 0.5).unwrap();
        assert_eq!(u, 0.0);
        assert!(f.iter().all(|x| *x == [0.0; 3]));
    }

    #[test]
    fn errors() {
        let mut ps = pair(10.0, 2.0);
        assert!(direct_lattice_sum(&ps, 0).is_err());
        ps.charges_mut()[1] = 1.0;
        assert!(matches!(
            direct_lattice_sum(&ps, 2),
            Err(Error::NeutralityViolation(_))
        ));
        assert!(matches!(
            direct_ewald_reference(&ps, 0.5),
            Err(Error::NeutralityViolation(_))
        ));
        let big = ParticleSet::new(201, SimulationBox::cubic(30.0).unwrap()).unwrap();
        assert!(matches!(
            direct_ewald_reference(&big, 0.5),
            Err(Error::TooLargeForOracle { n: 201, limit: 200 })
        ));
        let quad = |p: &ParticleSet| Ok(p.positions()[0][0]);
        assert!(finite_difference_forces(quad, &ps, 1e-7).is_err());
        assert!(finite_difference_forces(quad, &ps, 0.1).is_err());
    }

    #[test]
    fn reference_is_independent_of_alpha() {
        let ps = pair(10.0, 2.5);
        let (u1, f1) = direct_ewald_reference(&ps, 0.2).unwrap();
        let (u2, f2) = direct_ewald_reference(&ps, 0.6).unwrap();
        assert_relative_eq!(u1, u2, max_relative = 1e-9);
        assert_relative_eq!(f1[0][0], f2[0][0], max_relative = 1e-8);
        assert_relative_eq!(f1[0][0], -f1[1][0], max_relative = 1e-12);
    }

    #[test]
    fn quadratic_energy_gradient() {
        let mut ps = ParticleSet::new(3, SimulationBox::cubic(10.0).unwrap()).unwrap();
        ps.positions_mut()
            .copy_from_slice(&[[1.0, 2.0, 3.0], [0.5, 0.25, 4.0], [9.0, 7.0, 0.1]]);
        let energy = |p: &ParticleSet| Ok(p.positions().iter().map(|r| dot(*r, *r)).sum());
        for h in [1e-6, 1e-4, 1e-2] {
            let f = finite_difference_forces(energy, &ps, h).unwrap();
            for (fi, r) in f.iter().zip(ps.positions()) {
                for a in 0..3 {
                    assert!((fi[a] + 2.0 * r[a]).abs() < 1e-6, "{fi:?}");
                }
            }
        }
    }

    #[test]
    fn step_refinement_scales_quadratically() {
        let ps = pair(10.0, 2.5);
        let energy = |p: &ParticleSet| direct_ewald_reference(p, 0.3).map(|r| r.0);
        let exact = direct_ewald_reference(&ps, 0.3).unwrap().1[0][0];
        let coarse = finite_difference_forces(energy, &ps, 1e-2).unwrap()[0][0] - exact;
        let fine = finite_difference_forces(energy, &ps, 5e-3).unwrap()[0][0] - exact;
        // halving h divides the truncation error by four
        assert_relative_eq!(coarse / fine, 4.0, max_relative = 0.05);
        let tiny = finite_difference_forces(energy, &ps, 1e-6).unwrap()[0][0];
        assert_relative_eq!(tiny, exact, max_relative = 1e-6);
    }
}
