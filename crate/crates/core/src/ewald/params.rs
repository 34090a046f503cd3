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
use std::f64::consts::PI;

use crate::model::SimulationBox;
use crate::{Error, Result};

/// Splitting parameter and cutoffs of an Ewald evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EwaldParams {
    /// Gaussian splitting parameter α in Å⁻²; the screen is erfc(√α r).
    pub alpha: f64,
    /// Real-space cutoff in Å.
    pub r_cutoff: f64,
    /// Reciprocal-space cutoff in Å⁻¹.
    pub k_cutoff: f64,
    /// Target truncation tolerance ε.
    pub tolerance: f64,
}

/// Optional overrides for [`choose_parameters`]. At most one of `alpha` and
/// `r_cutoff` may be set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamOverrides {
    pub alpha: Option<f64>,
    pub r_cutoff: Option<f64>,
    /// Cost weight w = 2 c_pair / c_k, where c_pair is the time per ordered
    /// real-space pair and c_k the time per (particle, stored k-vector) in
    /// the two reciprocal loops. The automatic α is `π (w N / V²)^(1/3)`;
    /// w = 1 weighs both kinds of work equally.
    pub cost_ratio: f64,
}

impl Default for ParamOverrides {
    fn default() -> Self {
        Self {
            alpha: None,
            r_cutoff: None,
            cost_ratio: DEFAULT_COST_RATIO,
        }
    }
}

impl ParamOverrides {
    pub fn alpha(alpha: f64) -> Self {
        Self {
            alpha: Some(alpha),
            ..Self::default()
        }
    }

    pub fn r_cutoff(r_cutoff: f64) -> Self {
        Self {
            r_cutoff: Some(r_cutoff),
            ..Self::default()
        }
    }
}

/// Default for [`ParamOverrides::cost_ratio`]. Timings of the kernels in
/// this crate put the runtime minimum in a flat band around w ≈ 10..50.
pub const DEFAULT_COST_RATIO: f64 = 32.0;

impl EwaldParams {
    /// `erfc(√α r_c) / r_c`, the magnitude of the largest discarded
    /// real-space pair term per unit charge product.
    pub fn real_space_bound(&self) -> f64 {
        libm::erfc(self.alpha.sqrt() * self.r_cutoff) / self.r_cutoff
    }

    /// `exp(-k_c² / 4α)`, the screening factor of the first discarded mode.
    pub fn reciprocal_bound(&self) -> f64 {
        (-self.k_cutoff * self.k_cutoff / (4.0 * self.alpha)).exp()
    }

    /// Both truncation bounds are within the tolerance.
    pub fn satisfies_tolerance(&self) -> bool {
        let slack = 1.0 + 1e-9;
        self.real_space_bound() <= self.tolerance * slack
            && self.reciprocal_bound() <= self.tolerance * slack
    }

    /// Parameters for a given α: cutoffs where both screening tails fall to ε.
    pub fn from_alpha(alpha: f64, tolerance: f64) -> Result<Self> {
        check_tolerance(tolerance)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let s = tail_width(tolerance);
        Ok(Self {
            alpha,
            r_cutoff: s / alpha.sqrt(),
            k_cutoff: 2.0 * s * alpha.sqrt(),
            tolerance,
        })
    }

    /// Parameters for a given real-space cutoff.
    pub fn from_r_cutoff(r_cutoff: f64, tolerance: f64) -> Result<Self> {
        check_tolerance(tolerance)?;
        if !(r_cutoff.is_finite() && r_cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "r_cutoff must be positive, got {r_cutoff}"
            )));
        }
        let s = tail_width(tolerance);
        Self::from_alpha((s / r_cutoff).powi(2), tolerance)
    }
}

/// s = √(-ln ε): erfc(s) and exp(-s²) are both ≤ ε.
fn tail_width(tolerance: f64) -> f64 {
    (-tolerance.ln()).sqrt()
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if !(tolerance > 1e-12 && tolerance < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must lie in (1e-12, 1), got {tolerance}"
        )));
    }
    Ok(())
}

/// Pick α, r_c and k_c for `n` particles in `sim_box` at tolerance
/// `epsilon`.
///
/// Without overrides α = π (w n / V²)^(1/3), which balances the O(N² α^-3/2 / V)
/// real-space work against the O(N V α^3/2) reciprocal work. The real-space
/// cutoff never exceeds L/2: when it would, it is clamped and α raised to
/// keep both tails at ε. A fixed α whose cutoff does not fit the box is
/// rejected with [`Error::BoxTooSmall`].
pub fn choose_parameters(
    n: usize,
    sim_box: SimulationBox,
    epsilon: f64,
    overrides: ParamOverrides,
) -> Result<EwaldParams> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two particles, got {n}"
        )));
    }
    check_tolerance(epsilon)?;
    let half = 0.5 * sim_box.edge();

    let params = match (overrides.alpha, overrides.r_cutoff) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument(
                "alpha and r_cutoff overrides are mutually exclusive".into(),
            ))
        }
        (Some(alpha), None) => {
            let p = EwaldParams::from_alpha(alpha, epsilon)?;
            if p.r_cutoff > half {
                return Err(Error::BoxTooSmall(format!(
                    "alpha = {alpha} needs r_c = {:.4} Å at tolerance {epsilon:e}, \
                     but the minimum-image limit is L/2 = {half} Å",
                    p.r_cutoff
                )));
            }
            p
        }
        (None, Some(rc)) => {
            if rc > half {
                log::warn!("r_cutoff {rc} clamped to L/2 = {half}");
            }
            EwaldParams::from_r_cutoff(rc.min(half), epsilon)?
        }
        (None, None) => {
            let w = overrides.cost_ratio;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "cost ratio must be positive, got {w}"
                )));
            }
            let v = sim_box.volume();
            let alpha = PI * (w * n as f64 / (v * v)).cbrt();
            let p = EwaldParams::from_alpha(alpha, epsilon)?;
            if p.r_cutoff > half {
                EwaldParams::from_r_cutoff(half, epsilon)?
            } else {
                p
            }
        }
    };

    if !params.satisfies_tolerance() {
        return Err(Error::BoxTooSmall(format!(
            "no parameters within tolerance {epsilon:e}: real-space bound {:e}, \
             reciprocal bound {:e}",
            params.real_space_bound(),
            params.reciprocal_bound()
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bx(l: f64) -> SimulationBox {
        SimulationBox::cubic(l).unwrap()
    }

    fn pure_formula() -> ParamOverrides {
        ParamOverrides {
            cost_ratio: 1.0,
            ..ParamOverrides::default()
        }
    }

    #[test]
    fn closed_form_without_clamping() {
        // r_c = 25.3 < L/2
        let p = choose_parameters(20_000, bx(60.0), 1e-6, pure_formula()).unwrap();
        let s = (-(1e-6f64).ln()).sqrt();
        let alpha = PI * (20_000.0 / 60f64.powi(6)).cbrt();
        assert_relative_eq!(p.alpha, alpha, max_relative = 1e-14);
        assert_relative_eq!(p.r_cutoff, s / alpha.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.k_cutoff, 2.0 * s * alpha.sqrt(), max_relative = 1e-14);
        assert!(p.satisfies_tolerance());
    }

    #[test]
    fn benchmark_density_1728() {
        let p = choose_parameters(1728, bx(30.0), 1e-6, pure_formula()).unwrap();
        // π (n/V²)^(1/3) = 0.04189 would need r_c = 18.16 > 15, so r_c is clamped
        assert_relative_eq!(p.r_cutoff, 15.0);
        assert!(p.satisfies_tolerance());
        // same order of magnitude as the tuned (0.062, 13.5 Å) reference point
        assert!(p.alpha > 0.0062 && p.alpha < 0.62);
        assert!(p.r_cutoff > 1.35 && p.r_cutoff < 135.0);

        let tuned = choose_parameters(1728, bx(30.0), 1e-6, ParamOverrides::default()).unwrap();
        assert!(tuned.satisfies_tolerance() && tuned.r_cutoff <= 15.0);
    }

    #[test]
    fn r_cutoff_override() {
        let p = choose_parameters(32768, bx(80.0), 1e-6, ParamOverrides::r_cutoff(19.0)).unwrap();
        assert_relative_eq!(p.alpha, 0.038_270_112_348_931_5, max_relative = 1e-12);
        assert_relative_eq!(p.r_cutoff, 19.0);
        assert!(p.satisfies_tolerance());

        let clamped = choose_parameters(64, bx(10.0), 1e-6, ParamOverrides::r_cutoff(7.0)).unwrap();
        assert_relative_eq!(clamped.r_cutoff, 5.0);
        assert!(clamped.satisfies_tolerance());
    }

    #[test]
    fn loose_tolerance_is_feasible() {
        let p = choose_parameters(2, bx(10.0), 0.5, pure_formula()).unwrap();
        assert!(p.satisfies_tolerance());
        assert!(p.r_cutoff <= 5.0);
    }

    #[test]
    fn alpha_override_must_fit_the_box() {
        let ok = choose_parameters(1728, bx(30.0), 1e-6, ParamOverrides::alpha(0.2)).unwrap();
        assert_eq!(ok.alpha, 0.2);
        assert!(matches!(
            choose_parameters(1728, bx(30.0), 1e-6, ParamOverrides::alpha(0.03)),
            Err(Error::BoxTooSmall(_))
        ));
    }

    #[test]
    fn argument_errors() {
        assert!(choose_parameters(1, bx(10.0), 1e-6, pure_formula()).is_err());
        assert!(choose_parameters(8, bx(10.0), 0.0, pure_formula()).is_err());
        assert!(choose_parameters(8, bx(10.0), 1.0, pure_formula()).is_err());
        let both = ParamOverrides {
            alpha: Some(1.0),
            r_cutoff: Some(2.0),
            cost_ratio: 1.0,
        };
        assert!(choose_parameters(8, bx(10.0), 1e-6, both).is_err());
    }

    #[test]
    fn cutoffs_grow_as_tolerance_tightens() {
        let mut last = 0.0;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
            let p = EwaldParams::from_alpha(0.3, eps).unwrap();
            assert!(p.satisfies_tolerance());
            assert!(p.r_cutoff > last);
            last = p.r_cutoff;
            assert_relative_eq!(p.reciprocal_bound(), eps, max_relative = 1e-9);
        }
    }
}
