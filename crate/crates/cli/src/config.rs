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
//! TOML run configuration.
//!
//! ```toml
//! [system]
//! n = 1728
//! box = 30.0          # or: density = 0.064 (ions per Å³)
//!
//! [ewald]
//! tolerance = 1e-6
//! # alpha = 0.12      # or r_cutoff = 12.0
//!
//! [lj]
//! sigma = 2.5
//! epsilon = 1.0
//! cutoff = 6.25
//!
//! [run]
//! dt = 0.005
//! steps = 100
//! threads = 4
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use ewald_md::ewald::{ParamOverrides, DEFAULT_COST_RATIO};
use ewald_md::potentials::LJParams;
use ewald_md::sim::{SimConfig, DEFAULT_SPACING, DEFAULT_SUBDIVISION};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// One ion per (2.5 Å)³.
pub const DEFAULT_DENSITY: f64 = 1.0 / (DEFAULT_SPACING * DEFAULT_SPACING * DEFAULT_SPACING);
pub const DEFAULT_N: usize = 1728;
pub const DEFAULT_SCALING_N: usize = 32768;
pub const DEFAULT_COMPLEXITY_SWEEP: [usize; 4] = [1728, 4096, 8000, 17576];
pub const DEFAULT_THREAD_SWEEP: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    ewald: RawEwald,
    #[serde(default)]
    lj: RawLj,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    bench: RawBench,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: Option<usize>,
    #[serde(rename = "box")]
    box_edge: Option<f64>,
    density: Option<f64>,
    input: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEwald {
    enabled: Option<bool>,
    tolerance: Option<f64>,
    alpha: Option<f64>,
    r_cutoff: Option<f64>,
    cost_ratio: Option<f64>,
    subdivision: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLj {
    enabled: Option<bool>,
    sigma: Option<f64>,
    epsilon: Option<f64>,
    cutoff: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    dt: Option<f64>,
    steps: Option<usize>,
    threads: Option<usize>,
    seed: Option<u64>,
    temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    n_list: Option<Vec<usize>>,
    thread_list: Option<Vec<usize>>,
    scaling_n: Option<usize>,
    warmup: Option<usize>,
    iterations: Option<usize>,
}

/// Benchmark protocol settings.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSettings {
    pub n_list: Vec<usize>,
    pub thread_list: Option<Vec<usize>>,
    pub scaling_n: usize,
    pub warmup: usize,
    pub iterations: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            n_list: DEFAULT_COMPLEXITY_SWEEP.to_vec(),
            thread_list: None,
            scaling_n: DEFAULT_SCALING_N,
            warmup: 2,
            iterations: 5,
        }
    }
}

/// Parsed configuration with defaults applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Particle count as written in the file, if any.
    pub n: Option<usize>,
    pub box_edge: Option<f64>,
    pub density: f64,
    pub input: Option<PathBuf>,
    pub tolerance: f64,
    pub overrides: ParamOverrides,
    pub subdivision: usize,
    pub coulomb_enabled: bool,
    pub lj: LJParams,
    pub lj_enabled: bool,
    pub dt: f64,
    pub steps: usize,
    /// Worker count from `[run] threads`, if given.
    pub threads: Option<usize>,
    pub seed: u64,
    pub temperature: f64,
    pub bench: BenchSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self::from_raw(RawConfig::default(), "", "<defaults>").expect("defaults are valid")
    }
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

/// Parse configuration text; `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> CliResult<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config {
        path: origin.to_string(),
        message: describe_toml_error(text, &e),
    })?;
    Config::from_raw(raw, text, origin)
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let message = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {message}")
        }
        None => message,
    }
}

/// 1-based line of `key` inside `[section]`, for semantic errors.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            let k = t.split('=').next().unwrap_or("").trim();
            if k == key {
                return Some(i + 1);
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
    origin: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, message: String) -> CliError {
        let at = line_of(self.text, section, key).map_or(String::new(), |l| format!("line {l}: "));
        CliError::Config {
            path: self.origin.to_string(),
            message: format!("{at}{section}.{key}: {message}"),
        }
    }

    fn positive(&self, section: &str, key: &str, v: Option<f64>) -> CliResult<()> {
        match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                Err(self.fail(section, key, format!("must be positive, got {x}")))
            }
            _ => Ok(()),
        }
    }
}

impl Config {
    fn from_raw(raw: RawConfig, text: &str, origin: &str) -> CliResult<Self> {
        let c = Checker { text, origin };
        let RawConfig {
            system,
            ewald,
            lj,
            run,
            bench,
        } = raw;

        c.positive("system", "box", system.box_edge)?;
        c.positive("system", "density", system.density)?;
        if system.box_edge.is_some() && system.density.is_some() {
            return Err(c.fail(
                "system",
                "density",
                "give either box or density, not both".into(),
            ));
        }
        if system.n == Some(0) {
            return Err(c.fail("system", "n", "must be at least 1".into()));
        }

        let tolerance = ewald.tolerance.unwrap_or(1e-6);
        if !(tolerance > 1e-12 && tolerance < 1.0) {
            return Err(c.fail(
                "ewald",
                "tolerance",
                format!("must lie in (1e-12, 1), got {tolerance}"),
            ));
        }
        c.positive("ewald", "alpha", ewald.alpha)?;
        c.positive("ewald", "r_cutoff", ewald.r_cutoff)?;
        c.positive("ewald", "cost_ratio", ewald.cost_ratio)?;
        if ewald.alpha.is_some() && ewald.r_cutoff.is_some() {
            return Err(c.fail(
                "ewald",
                "r_cutoff",
                "alpha and r_cutoff are mutually exclusive".into(),
            ));
        }
        let subdivision = ewald.subdivision.unwrap_or(DEFAULT_SUBDIVISION);
        if subdivision == 0 {
            return Err(c.fail("ewald", "subdivision", "must be at least 1".into()));
        }

        c.positive("lj", "sigma", lj.sigma)?;
        c.positive("lj", "epsilon", lj.epsilon)?;
        c.positive("lj", "cutoff", lj.cutoff)?;
        let defaults = LJParams::default();
        let sigma = lj.sigma.unwrap_or(defaults.sigma);
        let lj_params = LJParams {
            sigma,
            epsilon: lj.epsilon.unwrap_or(defaults.epsilon),
            cutoff: lj.cutoff.unwrap_or(2.5 * sigma),
        };

        c.positive("run", "dt", run.dt)?;
        if let Some(t) = run.temperature {
            if !(t.is_finite() && t >= 0.0) {
                return Err(c.fail(
                    "run",
                    "temperature",
                    format!("must be non-negative, got {t}"),
                ));
            }
        }

        let mut settings = BenchSettings::default();
        if let Some(list) = bench.n_list {
            if list.is_empty() || list.contains(&0) {
                return Err(c.fail("bench", "n_list", "needs positive particle counts".into()));
            }
            settings.n_list = list;
        }
        if let Some(list) = bench.thread_list {
            if list.is_empty() || list.contains(&0) {
                return Err(c.fail(
                    "bench",
                    "thread_list",
                    "needs positive thread counts".into(),
                ));
            }
            settings.thread_list = Some(list);
        }
        if let Some(n) = bench.scaling_n {
            settings.scaling_n = n;
        }
        if let Some(w) = bench.warmup {
            settings.warmup = w;
        }
        if let Some(i) = bench.iterations {
            if i == 0 {
                return Err(c.fail("bench", "iterations", "must be at least 1".into()));
            }
            settings.iterations = i;
        }

        Ok(Self {
            n: system.n,
            box_edge: system.box_edge,
            density: system.density.unwrap_or(DEFAULT_DENSITY),
            input: system.input,
            tolerance,
            overrides: ParamOverrides {
                alpha: ewald.alpha,
                r_cutoff: ewald.r_cutoff,
                cost_ratio: ewald.cost_ratio.unwrap_or(DEFAULT_COST_RATIO),
            },
            subdivision,
            coulomb_enabled: ewald.enabled.unwrap_or(true),
            lj: lj_params,
            lj_enabled: lj.enabled.unwrap_or(true),
            dt: run.dt.unwrap_or(0.005),
            steps: run.steps.unwrap_or(10),
            threads: run.threads,
            seed: run.seed.unwrap_or(0),
            temperature: run.temperature.unwrap_or(0.0),
            bench: settings,
        })
    }

    /// Box edge for `n` ions: the configured edge, else from the density.
    pub fn edge_for(&self, n: usize) -> f64 {
        self.box_edge
            .unwrap_or_else(|| (n as f64 / self.density).cbrt())
    }

    /// Simulation settings for `n` ions (rock-salt unless an input file is used).
    pub fn sim_config_for(&self, n: usize) -> SimConfig {
        SimConfig {
            n_particles: n,
            box_edge: self.edge_for(n),
            tolerance: self.tolerance,
            overrides: self.overrides,
            lj: self.lj,
            coulomb_enabled: self.coulomb_enabled,
            lj_enabled: self.lj_enabled,
            dt: self.dt,
            n_steps: self.steps,
            temperature: self.temperature,
            seed: self.seed,
            threads: self.threads.unwrap_or(0),
            subdivision: self.subdivision,
        }
    }

    /// Settings for one point of a size sweep: the box always follows the
    /// density so that every size shares it.
    pub fn sweep_config(&self, n: usize) -> SimConfig {
        SimConfig {
            box_edge: (n as f64 / self.density).cbrt(),
            ..self.sim_config_for(n)
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim_config_for(self.n.unwrap_or(DEFAULT_N))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_defaults() {
        let c = parse_config_str("[system]\nn = 1728\nbox = 30\n", "t").unwrap();
        let s = c.sim_config();
        assert_eq!(s.n_particles, 1728);
        assert_eq!(s.box_edge, 30.0);
        assert_eq!(s.tolerance, 1e-6);
        assert_eq!(s.lj, LJParams::default());
        assert!(s.coulomb_enabled && s.lj_enabled);
        assert_eq!(c.threads, None);
    }

    #[test]
    fn density_sets_the_box() {
        let c = parse_config_str("[system]\nn = 4096\n", "t").unwrap();
        assert!((c.sim_config().box_edge - 40.0).abs() < 1e-12);
        let c = parse_config_str("[system]\nn = 64\ndensity = 0.001\n", "t").unwrap();
        assert!((c.sim_config().box_edge - 40.0).abs() < 1e-12);
        let c = parse_config_str("[system]\nbox = 30\n", "t").unwrap();
        assert!((c.sweep_config(32768).box_edge - 80.0).abs() < 1e-9);
    }

    #[test]
    fn tolerance_parses() {
        let c = parse_config_str("[ewald]\ntolerance = 1e-6\n", "t").unwrap();
        assert_eq!(c.tolerance, 1e-6);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let err = parse_config_str("[system]\nn = 8\nfoo = 1\n", "cfg.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("foo"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("cfg.toml"), "{msg}");
    }

    #[test]
    fn type_mismatch_and_malformed_lines() {
        let msg = parse_config_str("[run]\n\ndt = \"fast\"\n", "t")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let msg = parse_config_str("[run]\ndt 0.1\n", "t")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let msg = parse_config_str("[lj]\nsigma = 2.0\nepsilon = -1\n", "t")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 3") && msg.contains("epsilon"), "{msg}");
    }

    #[test]
    fn lj_cutoff_follows_sigma() {
        let c = parse_config_str("[lj]\nsigma = 2.0\n", "t").unwrap();
        assert_eq!(c.lj.cutoff, 5.0);
        let c = parse_config_str("[lj]\nenabled = false\ncutoff = 3.0\n", "t").unwrap();
        assert_eq!(c.lj.cutoff, 3.0);
        assert!(!c.lj_enabled);
    }

    #[test]
    fn conflicting_keys() {
        assert!(parse_config_str("[system]\nbox = 30\ndensity = 0.1\n", "t").is_err());
        assert!(parse_config_str("[ewald]\nalpha = 0.1\nr_cutoff = 9\n", "t").is_err());
        assert!(parse_config_str("[ewald]\ntolerance = 2\n", "t").is_err());
    }

    #[test]
    fn missing_file() {
        let err = parse_config(Path::new("/nonexistent/ewald.toml")).unwrap_err();
        assert!(matches!(err, CliError::Io { .. }));
    }
}
