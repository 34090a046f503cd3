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
//! Reciprocal-space part: k-vector enumeration, the charge structure factor
//! ρ̂_k = Σ_j q_j exp(-i k·r_j) and the long-range energy and forces.
//!
//! Only the half space of lexicographically positive integer vectors m is
//! stored; the partner -k contributes the complex conjugate, so energies are
//! taken once and forces twice. Per particle, the phases exp(i (2π/L) m x) are
//! built by complex recurrence along each axis and k-vectors are grouped in
//! rows of consecutive m_z so the innermost loop is a streaming
//! multiply-add over contiguous arrays.

use std::f64::consts::PI;

use super::EwaldParams;
use crate::engine::{GlobalViews, LoopEngine, ParticleKernel, ParticleView};
use crate::model::{
    Access, AccessDescriptor, GlobalAccumulator, ParticleSet, Property, SimulationBox, Vec3,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Row {
    mx: i32,
    my: i32,
    mz0: i32,
    start: usize,
    len: usize,
}

/// Static k-vector data shared read-only by both reciprocal loops.
#[derive(Clone, Debug)]
pub struct KTable {
    unit: f64,
    m_max: usize,
    k_cutoff: f64,
    alpha: f64,
    rows: Vec<Row>,
    coeff: Vec<f64>,
    coeff_kz: Vec<f64>,
}

/// A stored half-space reciprocal vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KVector {
    pub m: [i32; 3],
    pub k: Vec3,
    /// C_k = 4π / (V k²) · exp(-k² / 4α).
    pub coeff: f64,
}

/// Retained reciprocal vectors with their coefficients and the structure
/// factor accumulator, stored as a real plane followed by an imaginary plane.
#[derive(Clone, Debug)]
pub struct ReciprocalSpace {
    table: KTable,
    rho_hat: GlobalAccumulator,
}

/// k-space truncation coefficient.
pub fn coefficient(k2: f64, alpha: f64, volume: f64) -> f64 {
    4.0 * PI / (volume * k2) * (-k2 / (4.0 * alpha)).exp()
}

/// Every k = (2π/L) m with 0 < |k| < k_c, half space stored.
pub fn enumerate_kvectors(sim_box: SimulationBox, params: &EwaldParams) -> Result<ReciprocalSpace> {
    let l = sim_box.edge();
    let volume = sim_box.volume();
    let unit = 2.0 * PI / l;
    let kc = params.k_cutoff;
    let m_max = (kc / unit).floor() as i32;
    let kc2 = kc * kc;
    let inside = |mx: i32, my: i32, mz: i32| {
        let m2 = (mx * mx + my * my + mz * mz) as f64;
        m2 > 0.0 && unit * unit * m2 < kc2
    };

    let mut rows = Vec::new();
    let mut coeff = Vec::new();
    let mut coeff_kz = Vec::new();
    for mx in 0..=m_max {
        let my_lo = if mx == 0 { 0 } else { -m_max };
        for my in my_lo..=m_max {
            let mz_lo = if mx == 0 && my == 0 { 1 } else { -m_max };
            let zs: Vec<i32> = (mz_lo..=m_max).filter(|&mz| inside(mx, my, mz)).collect();
            let Some(&mz0) = zs.first() else { continue };
            // the retained m_z of a row are contiguous by convexity of the ball
            debug_assert!(zs.windows(2).all(|w| w[1] == w[0] + 1));
            rows.push(Row {
                mx,
                my,
                mz0,
                start: coeff.len(),
                len: zs.len(),
            });
            for mz in zs {
                let m2 = (mx * mx + my * my + mz * mz) as f64;
                let c = coefficient(unit * unit * m2, params.alpha, volume);
                coeff.push(c);
                coeff_kz.push(c * unit * mz as f64);
            }
        }
    }

    if coeff.is_empty() {
        return Err(Error::KspaceEmpty {
            k_cutoff: kc,
            edge: l,
        });
    }
    let n = coeff.len();
    Ok(ReciprocalSpace {
        table: KTable {
            unit,
            m_max: m_max as usize,
            k_cutoff: kc,
            alpha: params.alpha,
            rows,
            coeff,
            coeff_kz,
        },
        rho_hat: GlobalAccumulator::new(2 * n),
    })
}

impl ReciprocalSpace {
    /// Number of stored (half-space) vectors.
    pub fn len(&self) -> usize {
        self.table.coeff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.coeff.is_empty()
    }

    /// N_k: number of retained vectors counting both k and -k.
    pub fn full_len(&self) -> usize {
        2 * self.len()
    }

    pub fn m_max(&self) -> usize {
        self.table.m_max
    }

    pub fn k_cutoff(&self) -> f64 {
        self.table.k_cutoff
    }

    pub fn alpha(&self) -> f64 {
        self.table.alpha
    }

    pub fn table(&self) -> &KTable {
        &self.table
    }

    /// Stored vectors in storage order.
    pub fn iter(&self) -> impl Iterator<Item = KVector> + '_ {
        let unit = self.table.unit;
        self.table.rows.iter().flat_map(move |row| {
            (0..row.len).map(move |t| {
                let m = [row.mx, row.my, row.mz0 + t as i32];
                KVector {
                    m,
                    k: m.map(|x| unit * x as f64),
                    coeff: self.table.coeff[row.start + t],
                }
            })
        })
    }

    pub fn rho_hat_re(&self) -> &[f64] {
        &self.rho_hat.values()[..self.len()]
    }

    pub fn rho_hat_im(&self) -> &[f64] {
        &self.rho_hat.values()[self.len()..]
    }

    pub fn rho_hat(&self) -> &GlobalAccumulator {
        &self.rho_hat
    }

    pub fn zero_rho_hat(&mut self) {
        self.rho_hat.zero();
    }
}

/// exp(i (2π/L) m r_a) for m in -m_max..=m_max on each axis, for a block of
/// particles.
struct Phases {
    m_max: usize,
    stride: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Phases {
    fn new(m_max: usize, particles: usize) -> Self {
        let stride = 2 * m_max + 1;
        Self {
            m_max,
            stride,
            re: vec![0.0; 3 * stride * particles],
            im: vec![0.0; 3 * stride * particles],
        }
    }

    fn fill(&mut self, b: usize, r: Vec3, unit: f64) {
        let m_max = self.m_max;
        for a in 0..3 {
            let base = (3 * b + a) * self.stride + m_max;
            let (s, c) = (unit * r[a]).sin_cos();
            let (mut pr, mut pi) = (1.0, 0.0);
            self.re[base] = 1.0;
            self.im[base] = 0.0;
            for m in 1..=m_max {
                (pr, pi) = (pr * c - pi * s, pr * s + pi * c);
                self.re[base + m] = pr;
                self.im[base + m] = pi;
                self.re[base - m] = pr;
                self.im[base - m] = -pi;
            }
        }
    }

    #[inline]
    fn axis(&self, b: usize, a: usize, m: i32) -> usize {
        (3 * b + a) * self.stride + (self.m_max as i32 + m) as usize
    }

    #[inline]
    fn xy(&self, b: usize, mx: i32, my: i32) -> (f64, f64) {
        let (ix, iy) = (self.axis(b, 0, mx), self.axis(b, 1, my));
        let (xr, xi) = (self.re[ix], self.im[ix]);
        let (yr, yi) = (self.re[iy], self.im[iy]);
        (xr * yr - xi * yi, xr * yi + xi * yr)
    }

    #[inline]
    fn z(&self, b: usize, mz0: i32, len: usize) -> (&[f64], &[f64]) {
        let i = self.axis(b, 2, mz0);
        (&self.re[i..i + len], &self.im[i..i + len])
    }
}

fn block_phases(table: &KTable, block: &[ParticleView<'_>]) -> (Phases, Vec<f64>) {
    let mut ph = Phases::new(table.m_max, block.len());
    let mut q = Vec::with_capacity(block.len());
    for (b, p) in block.iter().enumerate() {
        q.push(p.charge());
        if p.charge() != 0.0 {
            ph.fill(b, p.position(), table.unit);
        }
    }
    (ph, q)
}

/// Accumulates q_j exp(-i k·r_j) into ρ̂ for every stored k.
pub struct StructureFactorKernel<'a> {
    table: &'a KTable,
}

const STRUCTURE_FACTOR_ACCESS: [AccessDescriptor; 3] = [
    AccessDescriptor::read(Property::Position),
    AccessDescriptor::read(Property::Charge),
    AccessDescriptor::global(0, Access::IncZero),
];

impl ParticleKernel for StructureFactorKernel<'_> {
    fn descriptors(&self) -> &[AccessDescriptor] {
        &STRUCTURE_FACTOR_ACCESS
    }

    fn apply(&self, p: &mut ParticleView<'_>, globals: &mut GlobalViews<'_>) -> Result<()> {
        self.apply_block(std::slice::from_mut(p), globals)
    }

    fn apply_block(
        &self,
        block: &mut [ParticleView<'_>],
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        let t = self.table;
        let (ph, q) = block_phases(t, block);
        let rho = globals.inc(0)?;
        let (rho_re, rho_im) = rho.split_at_mut(t.coeff.len());
        for row in &t.rows {
            let out_re = &mut rho_re[row.start..row.start + row.len];
            let out_im = &mut rho_im[row.start..row.start + row.len];
            for (b, &qb) in q.iter().enumerate() {
                if qb == 0.0 {
                    continue;
                }
                let (xr, xi) = ph.xy(b, row.mx, row.my);
                let (cr, ci) = (qb * xr, qb * xi);
                let (zr, zi) = ph.z(b, row.mz0, row.len);
                for ((ore, oim), (&a, &c)) in out_re
                    .iter_mut()
                    .zip(out_im.iter_mut())
                    .zip(zr.iter().zip(zi))
                {
                    *ore += cr * a - ci * c;
                    *oim -= cr * c + ci * a;
                }
            }
        }
        Ok(())
    }
}

/// Long-range energy and forces from a filled ρ̂.
pub struct LongRangeKernel<'a> {
    table: &'a KTable,
}

const LONG_RANGE_ACCESS: [AccessDescriptor; 5] = [
    AccessDescriptor::read(Property::Position),
    AccessDescriptor::read(Property::Charge),
    AccessDescriptor::global(0, Access::Read),
    AccessDescriptor::inc(Property::Force),
    AccessDescriptor::global(1, Access::IncZero),
];

impl ParticleKernel for LongRangeKernel<'_> {
    fn descriptors(&self) -> &[AccessDescriptor] {
        &LONG_RANGE_ACCESS
    }

    fn apply(&self, p: &mut ParticleView<'_>, globals: &mut GlobalViews<'_>) -> Result<()> {
        self.apply_block(std::slice::from_mut(p), globals)
    }

    fn apply_block(
        &self,
        block: &mut [ParticleView<'_>],
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        let t = self.table;
        let (ph, q) = block_phases(t, block);
        let nb = block.len();
        // per particle: u, residue, f_x, f_y, f_z before the 2 q_j factor
        let mut acc = vec![[0.0f64; 5]; nb];
        {
            let rho = globals.read(0)?;
            let (rho_re, rho_im) = rho.split_at(t.coeff.len());
            for row in &t.rows {
                let range = row.start..row.start + row.len;
                let c = &t.coeff[range.clone()];
                let ckz = &t.coeff_kz[range.clone()];
                let pr = &rho_re[range.clone()];
                let pi = &rho_im[range];
                let (kx, ky) = (t.unit * row.mx as f64, t.unit * row.my as f64);
                for (b, a) in acc.iter_mut().enumerate() {
                    if q[b] == 0.0 {
                        continue;
                    }
                    let (xr, xi) = ph.xy(b, row.mx, row.my);
                    let (zr, zi) = ph.z(b, row.mz0, row.len);
                    let (u_row, s_row, sz_row) = row_sums((xr, xi), zr, zi, c, ckz, pr, pi);
                    a[0] += u_row;
                    a[1] += s_row;
                    a[2] += kx * s_row;
                    a[3] += ky * s_row;
                    a[4] += sz_row;
                }
            }
        }
        let (mut u, mut residue) = (0.0, 0.0);
        for ((p, a), &qb) in block.iter_mut().zip(&acc).zip(&q) {
            if qb == 0.0 {
                continue;
            }
            p.add_force([2.0 * qb * a[2], 2.0 * qb * a[3], 2.0 * qb * a[4]])?;
            u += qb * a[0];
            residue += qb * a[1];
        }
        let out = globals.inc(1)?;
        out[0] += u;
        out[1] += residue;
        Ok(())
    }
}

const LANES: usize = 4;

/// Σ C Re[A ρ̂], Σ C Im[A ρ̂] and Σ C k_z Im[A ρ̂] over one row, A = xy · z.
#[inline]
#[allow(clippy::too_many_arguments)]
fn row_sums(
    xy: (f64, f64),
    zr: &[f64],
    zi: &[f64],
    c: &[f64],
    ckz: &[f64],
    pr: &[f64],
    pi: &[f64],
) -> (f64, f64, f64) {
    let (xr, xi) = xy;
    let n = zr.len();
    let (zi, c, ckz, pr, pi) = (&zi[..n], &c[..n], &ckz[..n], &pr[..n], &pi[..n]);
    let mut u = [0.0; LANES];
    let mut s = [0.0; LANES];
    let mut sz = [0.0; LANES];
    let full = n - n % LANES;
    for base in (0..full).step_by(LANES) {
        for l in 0..LANES {
            let i = base + l;
            let are = xr * zr[i] - xi * zi[i];
            let aim = xr * zi[i] + xi * zr[i];
            let t_re = are * pr[i] - aim * pi[i];
            let t_im = are * pi[i] + aim * pr[i];
            u[l] += c[i] * t_re;
            s[l] += c[i] * t_im;
            sz[l] += ckz[i] * t_im;
        }
    }
    for i in full..n {
        let are = xr * zr[i] - xi * zi[i];
        let aim = xr * zi[i] + xi * zr[i];
        let t_re = are * pr[i] - aim * pi[i];
        let t_im = are * pi[i] + aim * pr[i];
        u[0] += c[i] * t_re;
        s[0] += c[i] * t_im;
        sz[0] += ckz[i] * t_im;
    }
    let sum = |a: [f64; LANES]| (a[0] + a[1]) + (a[2] + a[3]);
    (sum(u), sum(s), sum(sz))
}

/// Output of the long-range loop.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LongRangeEnergy {
    /// u^(lr) = ½ Σ_j Σ_k C_k Re[A_jk q_j ρ̂_k] over the full k set.
    pub energy: f64,
    /// Σ_j q_j Σ_k C_k Im[A_jk ρ̂_k]; zero up to rounding.
    pub imag_residue: f64,
}

/// Fill ρ̂ for the current positions.
pub fn compute_rho_hat(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    rs: &mut ReciprocalSpace,
) -> Result<()> {
    let ReciprocalSpace { table, rho_hat } = rs;
    let kernel = StructureFactorKernel { table };
    engine.particle_loop(&kernel, ps, &mut [rho_hat])
}

/// Add long-range forces into the force property and return u^(lr).
/// ρ̂ must be current.
pub fn long_range_energy_forces(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    rs: &mut ReciprocalSpace,
) -> Result<LongRangeEnergy> {
    let ReciprocalSpace { table, rho_hat } = rs;
    let kernel = LongRangeKernel { table };
    let mut out = GlobalAccumulator::new(2);
    engine.particle_loop(&kernel, ps, &mut [rho_hat, &mut out])?;
    Ok(LongRangeEnergy {
        energy: out.values()[0],
        imag_residue: out.values()[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, k_cutoff: f64) -> EwaldParams {
        EwaldParams {
            alpha,
            r_cutoff: 1.0,
            k_cutoff,
            tolerance: 1e-6,
        }
    }

    /// Direct enumeration of the full k set.
    fn full_set(l: f64, kc: f64) -> Vec<[i32; 3]> {
        let unit = 2.0 * PI / l;
        let m = (kc / unit).ceil() as i32 + 1;
        let mut out = Vec::new();
        for x in -m..=m {
            for y in -m..=m {
                for z in -m..=m {
                    let m2 = (x * x + y * y + z * z) as f64;
                    if m2 > 0.0 && unit * m2.sqrt() < kc {
                        out.push([x, y, z]);
                    }
                }
            }
        }
        out
    }

    fn random_system(n: usize, l: f64, seed: u64) -> ParticleSet {
        let mut ps = ParticleSet::new(n, SimulationBox::cubic(l).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n {
            ps.positions_mut()[i] = [
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
            ];
            ps.charges_mut()[i] = if i % 2 == 0 { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.5);
        }
        let mean = ps.total_charge() / n as f64;
        for q in ps.charges_mut() {
            *q -= mean;
        }
        ps
    }

    #[test]
    fn enumeration_matches_integer_triples() {
        let bx = SimulationBox::cubic(2.0 * PI).unwrap();
        // |m| = 1 (6 vectors) and |m| = √2 (12 vectors) lie below 1.5
        let rs = enumerate_kvectors(bx, &params(1.0, 1.5)).unwrap();
        assert_eq!(rs.full_len(), 18);
        assert_eq!(full_set(2.0 * PI, 1.5).len(), 18);
        let rs = enumerate_kvectors(bx, &params(1.0, 1.2)).unwrap();
        assert_eq!(rs.full_len(), 6);
        let mut axes: Vec<[i32; 3]> = rs.iter().map(|k| k.m).collect();
        axes.sort();
        assert_eq!(axes, vec![[0, 0, 1], [0, 1, 0], [1, 0, 0]]);

        for (l, kc) in [(10.0, 3.3), (7.3, 5.0), (30.0, 1.84)] {
            let bx = SimulationBox::cubic(l).unwrap();
            let rs = enumerate_kvectors(bx, &params(0.5, kc)).unwrap();
            let mut expected = full_set(l, kc);
            let mut got: Vec<[i32; 3]> = rs.iter().flat_map(|k| [k.m, k.m.map(|x| -x)]).collect();
            expected.sort();
            got.sort();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn coefficients() {
        let bx = SimulationBox::cubic(2.0 * PI).unwrap();
        let rs = enumerate_kvectors(bx, &params(1e12, 1.2)).unwrap();
        for k in rs.iter() {
            assert_relative_eq!(k.coeff, 0.050_660_591_821_168_89, max_relative = 1e-10);
        }
        let bx = SimulationBox::cubic(9.0).unwrap();
        let rs = enumerate_kvectors(bx, &params(0.4, 4.0)).unwrap();
        for k in rs.iter() {
            let k2: f64 = k.k.iter().map(|x| x * x).sum();
            assert!(k.coeff > 0.0);
            assert_relative_eq!(
                k.coeff,
                4.0 * PI / (729.0 * k2) * (-k2 / 1.6).exp(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn empty_kspace_is_an_error() {
        let bx = SimulationBox::cubic(10.0).unwrap();
        assert!(matches!(
            enumerate_kvectors(bx, &params(1.0, 0.5)),
            Err(Error::KspaceEmpty { .. })
        ));
    }

    fn direct_rho(ps: &ParticleSet, k: Vec3) -> (f64, f64) {
        ps.positions()
            .iter()
            .zip(ps.charges())
            .fold((0.0, 0.0), |(re, im), (r, q)| {
                let phase = k[0] * r[0] + k[1] * r[1] + k[2] * r[2];
                (re + q * phase.cos(), im - q * phase.sin())
            })
    }

    #[test]
    fn rho_hat_simple_cases() {
        let bx = SimulationBox::cubic(10.0).unwrap();
        let mut ps = ParticleSet::new(1, bx).unwrap();
        ps.charges_mut()[0] = 1.0;
        let mut rs = enumerate_kvectors(bx, &params(1.0, 3.0)).unwrap();
        compute_rho_hat(&LoopEngine::new(1), &mut ps, &mut rs).unwrap();
        assert!(rs.rho_hat_re().iter().all(|&x| x == 1.0));
        assert!(rs.rho_hat_im().iter().all(|&x| x == 0.0));

        let mut ps = ParticleSet::new(2, bx).unwrap();
        ps.charges_mut().copy_from_slice(&[1.0, -1.0]);
        ps.positions_mut().fill([1.3, 4.4, 9.1]);
        compute_rho_hat(&LoopEngine::new(2), &mut ps, &mut rs).unwrap();
        assert!(rs.rho_hat().values().iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn rho_hat_matches_direct_sum() {
        let l = 11.0;
        let mut ps = random_system(32, l, 4);
        let mut rs = enumerate_kvectors(ps.sim_box(), &params(0.7, 4.5)).unwrap();
        for workers in [1, 3] {
            compute_rho_hat(&LoopEngine::new(workers), &mut ps, &mut rs).unwrap();
            let scale = ps.charges().iter().map(|q| q.abs()).sum::<f64>();
            for (idx, k) in rs.iter().enumerate() {
                let (re, im) = direct_rho(&ps, k.k);
                assert!(
                    (rs.rho_hat_re()[idx] - re).abs() <= 1e-12 * scale,
                    "{:?}",
                    k.m
                );
                assert!(
                    (rs.rho_hat_im()[idx] - im).abs() <= 1e-12 * scale,
                    "{:?}",
                    k.m
                );
            }
        }
    }

    /// Naive (j, k) double loop over the full k set with direct trigonometry.
    fn naive_long_range(ps: &ParticleSet, rs: &ReciprocalSpace) -> (f64, Vec<Vec3>) {
        let full: Vec<KVector> = rs
            .iter()
            .flat_map(|k| {
                [
                    k,
                    KVector {
                        m: k.m.map(|x| -x),
                        k: k.k.map(|x| -x),
                        coeff: k.coeff,
                    },
                ]
            })
            .collect();
        let rhos: Vec<(f64, f64)> = full.iter().map(|k| direct_rho(ps, k.k)).collect();
        let mut u = 0.0;
        let mut forces = vec![[0.0; 3]; ps.len()];
        for j in 0..ps.len() {
            let (r, q) = (ps.positions()[j], ps.charges()[j]);
            for (k, &(pr, pi)) in full.iter().zip(&rhos) {
                let phase = k.k[0] * r[0] + k.k[1] * r[1] + k.k[2] * r[2];
                let (ar, ai) = (phase.cos(), phase.sin());
                let (tr, ti) = (ar * pr - ai * pi, ar * pi + ai * pr);
                u += 0.5 * k.coeff * q * tr;
                for a in 0..3 {
                    forces[j][a] += k.k[a] * k.coeff * q * ti;
                }
            }
        }
        (u, forces)
    }

    #[test]
    fn single_charge_energy_is_half_the_coefficient_sum() {
        let bx = SimulationBox::cubic(8.0).unwrap();
        let mut ps = ParticleSet::new(1, bx).unwrap();
        ps.charges_mut()[0] = 1.0;
        ps.positions_mut()[0] = [2.0, 7.5, 0.3];
        let mut rs = enumerate_kvectors(bx, &params(0.9, 5.0)).unwrap();
        let engine = LoopEngine::new(1);
        compute_rho_hat(&engine, &mut ps, &mut rs).unwrap();
        let lr = long_range_energy_forces(&engine, &mut ps, &mut rs).unwrap();
        // ½ Σ over the full set = Σ over the stored half
        let expected: f64 = rs.iter().map(|k| k.coeff).sum();
        assert_relative_eq!(lr.energy, expected, max_relative = 1e-12);
        let f = ps.forces()[0];
        assert!(f.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn zero_charges_give_nothing() {
        let mut ps = random_system(10, 9.0, 1);
        ps.charges_mut().fill(0.0);
        let mut rs = enumerate_kvectors(ps.sim_box(), &params(0.9, 5.0)).unwrap();
        let engine = LoopEngine::new(2);
        compute_rho_hat(&engine, &mut ps, &mut rs).unwrap();
        let lr = long_range_energy_forces(&engine, &mut ps, &mut rs).unwrap();
        assert_eq!(lr.energy, 0.0);
        assert!(ps.forces().iter().all(|f| *f == [0.0; 3]));
    }

    #[test]
    fn long_range_matches_naive_double_loop() {
        let mut ps = random_system(32, 10.0, 8);
        let mut rs = enumerate_kvectors(ps.sim_box(), &params(0.55, 4.2)).unwrap();
        let (u_ref, f_ref) = naive_long_range(&ps, &rs);
        let fmax = f_ref.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for workers in [1, 4] {
            ps.zero_forces();
            let engine = LoopEngine::new(workers);
            compute_rho_hat(&engine, &mut ps, &mut rs).unwrap();
            let lr = long_range_energy_forces(&engine, &mut ps, &mut rs).unwrap();
            assert_relative_eq!(lr.energy, u_ref, max_relative = 1e-12);
            assert!(lr.imag_residue.abs() <= 1e-12 * lr.energy.abs());
            for (f, g) in ps.forces().iter().zip(&f_ref) {
                for a in 0..3 {
                    assert!((f[a] - g[a]).abs() <= 1e-12 * fmax, "{f:?} vs {g:?}");
                }
            }
        }
    }

    #[test]
    fn long_range_forces_accumulate() {
        let mut ps = random_system(8, 10.0, 2);
        ps.forces_mut().fill([1.0, 2.0, 3.0]);
        let mut rs = enumerate_kvectors(ps.sim_box(), &params(0.55, 3.0)).unwrap();
        let (_, f_ref) = naive_long_range(&ps, &rs);
        let engine = LoopEngine::new(1);
        compute_rho_hat(&engine, &mut ps, &mut rs).unwrap();
        long_range_energy_forces(&engine, &mut ps, &mut rs).unwrap();
        for (f, g) in ps.forces().iter().zip(&f_ref) {
            assert!((f[0] - 1.0 - g[0]).abs() < 1e-12);
            assert!((f[2] - 3.0 - g[2]).abs() < 1e-12);
        }
    }
}
