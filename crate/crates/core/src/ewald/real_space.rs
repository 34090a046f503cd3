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
//! Short-range pair sum: erfc-screened Coulomb over ordered pairs within r_c.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::EwaldParams;
use crate::engine::{
    CellList, CenterView, GlobalViews, LoopEngine, NeighborView, PairKernel, PairSeparation,
};
use crate::model::{Access, AccessDescriptor, GlobalAccumulator, ParticleSet, Property};
use crate::{Error, Result};

/// Scaled complementary error function erfcx(x) = exp(x²) erfc(x) on
/// [0, X_MAX], cubic Hermite interpolation with exact derivatives.
struct Erfcx {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const ERFCX_STEP: f64 = 1.0 / 1024.0;
const ERFCX_MAX: f64 = 6.0;
const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

impl Erfcx {
    fn table() -> &'static Erfcx {
        static TABLE: OnceLock<Erfcx> = OnceLock::new();
        TABLE.get_or_init(|| {
            let n = (ERFCX_MAX / ERFCX_STEP) as usize + 2;
            let values: Vec<f64> = (0..n)
                .map(|i| {
                    let x = i as f64 * ERFCX_STEP;
                    libm::erfc(x) * (x * x).exp()
                })
                .collect();
            let slopes = values
                .iter()
                .enumerate()
                .map(|(i, f)| 2.0 * (i as f64 * ERFCX_STEP) * f - FRAC_2_SQRT_PI)
                .collect();
            Erfcx { values, slopes }
        })
    }

    /// erfc(x) given exp(-x²).
    #[inline]
    fn erfc(&self, x: f64, gauss: f64) -> f64 {
        if x >= ERFCX_MAX {
            return libm::erfc(x);
        }
        let u = x * (1.0 / ERFCX_STEP);
        let i = u as usize;
        let t = u - i as f64;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * ERFCX_STEP, self.slopes[i + 1] * ERFCX_STEP);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        gauss * (h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1)
    }
}

pub struct ShortRangeKernel {
    sqrt_alpha: f64,
    gauss: f64,
    alpha: f64,
    erfcx: &'static Erfcx,
}

impl ShortRangeKernel {
    pub fn new(alpha: f64) -> Self {
        Self {
            sqrt_alpha: alpha.sqrt(),
            gauss: 2.0 * (alpha / PI).sqrt(),
            alpha,
            erfcx: Erfcx::table(),
        }
    }
}

const SHORT_RANGE_ACCESS: [AccessDescriptor; 4] = [
    AccessDescriptor::read(Property::Position),
    AccessDescriptor::read(Property::Charge),
    AccessDescriptor::inc(Property::Force),
    AccessDescriptor::global(0, Access::IncZero),
];

impl PairKernel for ShortRangeKernel {
    fn descriptors(&self) -> &[AccessDescriptor] {
        &SHORT_RANGE_ACCESS
    }

    #[inline]
    fn apply(
        &self,
        pair: &PairSeparation,
        center: &mut CenterView<'_>,
        neighbor: &NeighborView<'_>,
        globals: &mut GlobalViews<'_>,
    ) -> Result<()> {
        let qq = center.charge() * neighbor.charge();
        if qq == 0.0 {
            return Ok(());
        }
        if pair.r2 == 0.0 {
            return Err(Error::CoincidentParticles(center.index(), neighbor.index()));
        }
        let r = pair.r2.sqrt();
        let inv_r = 1.0 / r;
        let g = (-self.alpha * pair.r2).exp();
        let screened = self.erfcx.erfc(self.sqrt_alpha * r, g) * inv_r;
        let scale = qq * (screened + self.gauss * g) * inv_r * inv_r;
        let dr = pair.dr;
        center.add_force([scale * dr[0], scale * dr[1], scale * dr[2]])?;
        globals.inc(0)?[0] += 0.5 * qq * screened;
        Ok(())
    }
}

/// Add short-range forces and return u^(sr). The cell list cutoff must equal
/// the real-space cutoff in `params`.
pub fn short_range(
    engine: &LoopEngine,
    ps: &mut ParticleSet,
    cells: &CellList,
    params: &EwaldParams,
) -> Result<f64> {
    if (cells.cutoff() - params.r_cutoff).abs() > 1e-12 * params.r_cutoff {
        return Err(Error::InvalidArgument(format!(
            "cell list cutoff {} differs from r_c {}",
            cells.cutoff(),
            params.r_cutoff
        )));
    }
    let mut energy = GlobalAccumulator::scalar();
    engine.pair_loop(
        &ShortRangeKernel::new(params.alpha),
        ps,
        cells,
        &mut [&mut energy],
    )?;
    Ok(energy.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimulationBox;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, rc: f64) -> EwaldParams {
        EwaldParams {
            alpha,
            r_cutoff: rc,
            k_cutoff: 1.0,
            tolerance: 1e-6,
        }
    }

    fn pair(d: f64, l: f64) -> ParticleSet {
        let mut ps = ParticleSet::new(2, SimulationBox::cubic(l).unwrap()).unwrap();
        ps.positions_mut()[0] = [1.0, 1.0, 1.0];
        ps.positions_mut()[1] = [1.0 + d, 1.0, 1.0];
        ps.charges_mut().copy_from_slice(&[1.0, -1.0]);
        ps
    }

    #[test]
    fn tabulated_erfc_is_accurate() {
        let table = Erfcx::table();
        let mut worst = 0.0f64;
        for i in 0..60_000 {
            let x = i as f64 * 1e-4 + 0.37e-5;
            let exact = libm::erfc(x);
            let approx = table.erfc(x, (-x * x).exp());
            worst = worst.max(((approx - exact) / exact).abs());
        }
        assert!(worst < 1e-12, "{worst}");
        assert_eq!(table.erfc(7.0, (-49.0f64).exp()), libm::erfc(7.0));
    }

    #[test]
    fn unit_pair_energy() {
        let mut ps = pair(1.0, 10.0);
        let p = params(0.1, 4.0);
        let cells = CellList::build(&ps, p.r_cutoff).unwrap();
        let u = short_range(&LoopEngine::new(1), &mut ps, &cells, &p).unwrap();
        assert_relative_eq!(u, -0.654_720_846_018_576_9, max_relative = 1e-12);
    }

    #[test]
    fn pair_force_matches_analytic_derivative() {
        let (alpha, d) = (0.3, 1.7);
        let mut ps = pair(d, 12.0);
        let p = params(alpha, 5.0);
        let cells = CellList::build(&ps, p.r_cutoff).unwrap();
        short_range(&LoopEngine::new(1), &mut ps, &cells, &p).unwrap();
        let du = |r: f64| -libm::erfc(alpha.sqrt() * r) / r;
        let h = 1e-5;
        // F_0 = -dU/dx_0 = +dU/dr along the x axis
        let expected = (du(d + h) - du(d - h)) / (2.0 * h);
        assert_relative_eq!(ps.forces()[0][0], expected, max_relative = 1e-8);
        assert!(ps.forces()[0][0] > 0.0);
    }

    #[test]
    fn newton_third_law() {
        let l = 14.0;
        let mut ps = ParticleSet::new(60, SimulationBox::cubic(l).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..60 {
            ps.positions_mut()[i] = [
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
                rng.gen::<f64>() * l,
            ];
            ps.charges_mut()[i] = rng.gen_range(-1.0..1.0);
        }
        let p = params(0.2, 6.0);
        let cells = CellList::build(&ps, p.r_cutoff).unwrap();
        short_range(&LoopEngine::new(3), &mut ps, &cells, &p).unwrap();
        let scale = ps
            .forces()
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        for a in 0..3 {
            let total: f64 = ps.forces().iter().map(|f| f[a]).sum();
            assert!(total.abs() < 1e-12 * scale * 60.0);
        }
    }

    #[test]
    fn pairs_beyond_cutoff_do_nothing() {
        let mut ps = pair(4.5, 10.0);
        let p = params(0.1, 4.0);
        let cells = CellList::build(&ps, p.r_cutoff).unwrap();
        let u = short_range(&LoopEngine::new(1), &mut ps, &cells, &p).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(ps.forces()[0], [0.0; 3]);
    }

    #[test]
    fn coincident_charges_are_rejected() {
        let mut ps = pair(0.0, 10.0);
        let p = params(0.1, 4.0);
        let cells = CellList::build(&ps, p.r_cutoff).unwrap();
        assert!(matches!(
            short_range(&LoopEngine::new(1), &mut ps, &cells, &p),
            Err(Error::CoincidentParticles(_, _))
        ));
        ps.charges_mut()[1] = 0.0;
        assert_eq!(
            short_range(&LoopEngine::new(1), &mut ps, &cells, &p).unwrap(),
            0.0
        );
    }

    #[test]
    fn mismatched_cutoff_is_rejected() {
        let mut ps = pair(1.0, 10.0);
        let cells = CellList::build(&ps, 3.0).unwrap();
        assert!(short_range(&LoopEngine::new(1), &mut ps, &cells, &params(0.1, 4.0)).is_err());
    }
}
