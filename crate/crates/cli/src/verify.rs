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
//! End-to-end correctness checks of the Coulomb solver against the
//! reference oracles.

use std::io::Write;

use ewald_md::engine::LoopEngine;
use ewald_md::ewald::{
    choose_parameters, self_energy, CoulombEnergy, CoulombSolver, EwaldParams, ParamOverrides,
};
use ewald_md::model::ParticleSet;
use ewald_md::oracle::{
    direct_ewald_reference, direct_lattice_sum, finite_difference_forces, ORACLE_MAX_PARTICLES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Tolerance used for the finite-difference check; tight enough that
/// truncation jumps stay far below the 1e-4 comparison.
pub const FD_EPSILON: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-4;
pub const LATTICE_SHELLS: usize = 10;
/// Random displacement applied before the gradient and invariance checks.
pub const PERTURBATION: f64 = 0.1;
const SHIFT: [f64; 3] = [3.7, -11.1, 25.3];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the self-energy in the oracle comparison.
    SelfEnergySign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub status: Status,
    /// Worst observed error, in the units of `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn judged(check: &'static str, value: f64, tolerance: f64, detail: String) -> Self {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            check,
            status,
            value,
            tolerance,
            detail,
        }
    }

    fn skipped(check: &'static str, detail: String) -> Self {
        Self {
            check,
            status: Status::Skip,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| c.check)
            .collect()
    }

    pub fn write_human<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            if c.status == Status::Skip {
                writeln!(out, "{tag} {:<20} {}", c.check, c.detail)?;
            } else {
                writeln!(
                    out,
                    "{tag} {:<20} {:.3e} (limit {:.1e})  {}",
                    c.check, c.value, c.tolerance, c.detail
                )?;
            }
        }
        let verdict = if self.passed() {
            "all checks passed"
        } else {
            "FAILED"
        };
        writeln!(out, "{verdict}")
    }

    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for c in &self.checks {
            serde_json::to_writer(&mut *out, c)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// What to verify and how.
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub tolerance: f64,
    pub overrides: ParamOverrides,
    pub subdivision: usize,
    pub seed: u64,
    /// The system is a perfect crystal, so the lattice sum applies.
    pub crystal: bool,
    pub fault: Option<Fault>,
}

struct Evaluator<'a> {
    engine: &'a LoopEngine,
    subdivision: usize,
}

impl Evaluator<'_> {
    fn energy(&self, ps: &mut ParticleSet, params: EwaldParams) -> ewald_md::Result<CoulombEnergy> {
        ps.zero_forces();
        CoulombSolver::with_subdivision(ps, params, self.subdivision)?.compute(self.engine, ps)
    }
}

fn max_abs(v: &[[f64; 3]]) -> f64 {
    v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn perturbed(ps: &ParticleSet, seed: u64) -> ParticleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ps.clone();
    for r in out.positions_mut() {
        for x in r.iter_mut() {
            *x += rng.gen_range(-PERTURBATION..PERTURBATION);
        }
    }
    out.wrap_positions();
    out
}

/// Run every check on `system`. Returns an error only when the checks
/// cannot be set up at all.
pub fn verify(
    system: &ParticleSet,
    options: &VerifyOptions,
    engine: &LoopEngine,
) -> ewald_md::Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let ev = Evaluator {
        engine,
        subdivision: options.subdivision,
    };
    let n = system.len();

    let q = system.total_charge();
    let scale = system
        .charges()
        .iter()
        .map(|c| c.abs())
        .sum::<f64>()
        .max(1.0);
    let neutral = CheckResult::judged(
        "neutrality",
        q.abs() / scale,
        ewald_md::NEUTRALITY_TOLERANCE,
        format!("total charge {q:e}"),
    );
    let is_neutral = neutral.status == Status::Pass;
    report.checks.push(neutral);
    if !is_neutral {
        for name in [
            "oracle",
            "oracle-forces",
            "lattice-sum",
            "finite-difference",
            "alpha-invariance",
            "translation",
            "momentum",
            "realness",
        ] {
            report.checks.push(CheckResult::skipped(
                name,
                "system is not charge neutral".into(),
            ));
        }
        return Ok(report);
    }

    let mut ps = system.clone();
    ps.wrap_positions();
    let params = choose_parameters(n, ps.sim_box(), options.tolerance, options.overrides)?;
    let small = n <= ORACLE_MAX_PARTICLES;

    // Oracle equivalence, optionally with the self-energy sabotaged.
    let mut solver = CoulombSolver::with_subdivision(&ps, params, options.subdivision)?;
    if options.fault == Some(Fault::SelfEnergySign) {
        solver.set_self_energy(-self_energy(&ps, &params));
    }
    ps.zero_forces();
    let e = solver.compute(engine, &mut ps)?;
    let u = e.total();
    if small {
        let (u_ref, f_ref) = direct_ewald_reference(&ps, params.alpha)?;
        let du = ((u - u_ref) / u_ref).abs();
        let fmax = max_abs(&f_ref);
        let df = ps
            .forces()
            .iter()
            .flatten()
            .zip(f_ref.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let df_rel = if fmax > 1e-6 { df / fmax } else { df };
        report.checks.push(CheckResult::judged(
            "oracle",
            du,
            1e-5,
            format!("U = {u:.12e}, reference {u_ref:.12e}"),
        ));
        report.checks.push(CheckResult::judged(
            "oracle-forces",
            df_rel,
            1e-4,
            format!("max |dF| = {df:.3e}, max |F| = {fmax:.3e}"),
        ));
        if options.crystal {
            let u_lat = direct_lattice_sum(&ps, LATTICE_SHELLS)?;
            let d = ((u - u_lat) / u_lat).abs();
            report.checks.push(CheckResult::judged(
                "lattice-sum",
                d,
                1e-5,
                format!("lattice sum over {LATTICE_SHELLS} shells {u_lat:.12e}"),
            ));
        } else {
            report.checks.push(CheckResult::skipped(
                "lattice-sum",
                "system is not a perfect crystal".into(),
            ));
        }
    } else {
        let why = format!("N = {n} exceeds the oracle limit {ORACLE_MAX_PARTICLES}");
        report
            .checks
            .push(CheckResult::skipped("oracle", why.clone()));
        report
            .checks
            .push(CheckResult::skipped("oracle-forces", why.clone()));
        report.checks.push(CheckResult::skipped("lattice-sum", why));
    }

    let mut moved = perturbed(&ps, options.seed);

    if small {
        let tight = choose_parameters(n, moved.sim_box(), FD_EPSILON, options.overrides)?;
        ev.energy(&mut moved, tight)?;
        let analytic = moved.forces().to_vec();
        let fd = finite_difference_forces(
            |p| Ok(ev.energy(&mut p.clone(), tight)?.total()),
            &moved,
            FD_STEP,
        )?;
        let mut worst = 0.0f64;
        let mut worst_abs = 0.0f64;
        for (f, g) in analytic.iter().flatten().zip(fd.iter().flatten()) {
            let d = (f - g).abs();
            worst_abs = worst_abs.max(d);
            // Absolute floor applies where the component is tiny.
            let rel = if d <= 1e-8 { 0.0 } else { d / g.abs() };
            worst = worst.max(rel);
        }
        report.checks.push(CheckResult::judged(
            "finite-difference",
            worst,
            1e-4,
            format!("max |dF| = {worst_abs:.3e}, h = {FD_STEP:e}, tolerance {FD_EPSILON:e}"),
        ));
    } else {
        report.checks.push(CheckResult::skipped(
            "finite-difference",
            format!("N = {n} exceeds the oracle limit {ORACLE_MAX_PARTICLES}"),
        ));
    }

    // α-invariance around a feasible base value.
    let s2 = -options.tolerance.ln();
    let half = 0.5 * moved.sim_box().edge();
    let alpha_min = s2 / (half * half) * (1.0 + 1e-9);
    let base = params.alpha.max(2.0 * alpha_min);
    let mut energies = Vec::new();
    for a in [0.5 * base, base, 2.0 * base] {
        let p = choose_parameters(
            n,
            moved.sim_box(),
            options.tolerance,
            ParamOverrides::alpha(a),
        )?;
        energies.push((a, ev.energy(&mut moved, p)?.total()));
    }
    let u_mid = energies[1].1;
    let spread = energies
        .iter()
        .map(|(_, v)| ((v - u_mid) / u_mid).abs())
        .fold(0.0f64, f64::max);
    report.checks.push(CheckResult::judged(
        "alpha-invariance",
        spread,
        5e-6,
        format!(
            "alpha {:.4e}/{:.4e}/{:.4e}",
            energies[0].0, energies[1].0, energies[2].0
        ),
    ));

    // Translation, momentum and realness on the perturbed system.
    let e0 = ev.energy(&mut moved, params)?;
    let forces = moved.forces().to_vec();
    let mut shifted = moved.clone();
    for r in shifted.positions_mut() {
        *r = [r[0] + SHIFT[0], r[1] + SHIFT[1], r[2] + SHIFT[2]];
    }
    shifted.wrap_positions();
    let e1 = ev.energy(&mut shifted, params)?;
    report.checks.push(CheckResult::judged(
        "translation",
        ((e1.total() - e0.total()) / e0.total()).abs(),
        1e-10,
        format!("shift {SHIFT:?}"),
    ));

    let fscale = max_abs(&forces) * n as f64;
    let net = (0..3)
        .map(|a| forces.iter().map(|f| f[a]).sum::<f64>().abs())
        .fold(0.0f64, f64::max);
    report.checks.push(CheckResult::judged(
        "momentum",
        if fscale > 0.0 { net / fscale } else { net },
        1e-8,
        format!("max |sum F| = {net:.3e}"),
    ));

    let lr_scale = e0.long_range.abs().max(f64::MIN_POSITIVE);
    report.checks.push(CheckResult::judged(
        "realness",
        (e0.long_range_imag / lr_scale).abs(),
        1e-12,
        format!("imaginary residue {:.3e}", e0.long_range_imag),
    ));

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ewald_md::sim::init_rocksalt;

    fn options(crystal: bool) -> VerifyOptions {
        VerifyOptions {
            tolerance: 1e-6,
            overrides: ParamOverrides::default(),
            subdivision: 2,
            seed: 0,
            crystal,
            fault: None,
        }
    }

    #[test]
    fn rocksalt_64_passes() {
        let ps = init_rocksalt(2, 2.5).unwrap();
        let r = verify(&ps, &options(true), &LoopEngine::new(2)).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        assert_eq!(r.checks.len(), 9);
        assert!(r.checks.iter().all(|c| c.status == Status::Pass));
    }

    #[test]
    fn self_energy_fault_is_caught() {
        let ps = init_rocksalt(2, 2.5).unwrap();
        let opts = VerifyOptions {
            fault: Some(Fault::SelfEnergySign),
            ..options(true)
        };
        let r = verify(&ps, &opts, &LoopEngine::new(1)).unwrap();
        assert!(!r.passed());
        assert!(r.failed().contains(&"oracle"));
    }

    #[test]
    fn charged_system_fails_neutrality() {
        let mut ps = init_rocksalt(1, 2.5).unwrap();
        ps.charges_mut()[0] = 2.0;
        let r = verify(&ps, &options(false), &LoopEngine::new(1)).unwrap();
        assert_eq!(r.failed(), vec!["neutrality"]);
        assert!(r.checks[0].detail.contains("total charge"));
    }

    #[test]
    fn jsonl_has_one_object_per_check() {
        let mut ps = init_rocksalt(1, 2.5).unwrap();
        ps.charges_mut()[0] = 2.0;
        let r = verify(&ps, &options(false), &LoopEngine::new(1)).unwrap();
        let mut buf = Vec::new();
        r.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.checks.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["check"], "neutrality");
        assert_eq!(first["status"], "fail");
    }
}
