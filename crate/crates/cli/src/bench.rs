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
//! Complexity and strong-scaling benchmarks with CSV output.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use ewald_md::engine::LoopEngine;
use ewald_md::sim::{run_with_engine, SimConfig, StepTimings};

use crate::error::{CliError, CliResult};

pub const COMPLEXITY_HEADER: &str = "N,t_total_per_iter,t_sr,t_alg1,t_alg2,alpha,r_c,N_k";
pub const THREADS_HEADER: &str = "threads,t_per_iter,speedup,efficiency";

/// Median per-iteration timings for one particle count, in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityRow {
    pub n: usize,
    pub t_total: f64,
    pub t_sr: f64,
    pub t_alg1: f64,
    pub t_alg2: f64,
    pub alpha: f64,
    pub r_cutoff: f64,
    pub n_kvectors: usize,
}

impl ComplexityRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
            self.n,
            self.t_total,
            self.t_sr,
            self.t_alg1,
            self.t_alg2,
            self.alpha,
            self.r_cutoff,
            self.n_kvectors
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityReport {
    pub rows: Vec<ComplexityRow>,
    /// Least-squares slope of ln t against ln N; absent for fewer than two sizes.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThreadRow {
    pub threads: usize,
    pub t_per_iter: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

impl ThreadRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.9e},{:.6},{:.6}",
            self.threads, self.t_per_iter, self.speedup, self.efficiency
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThreadReport {
    pub rows: Vec<ThreadRow>,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn run_steps(
    config: &SimConfig,
    engine: &LoopEngine,
    warmup: usize,
    iterations: usize,
) -> CliResult<(StepTimings, ewald_md::sim::RunMetrics)> {
    let cfg = SimConfig {
        n_steps: warmup + iterations,
        ..config.clone()
    };
    let mut ps = cfg.build_system()?;
    let metrics = run_with_engine(&cfg, engine, &mut ps)?;
    let median = metrics
        .median_step(warmup)
        .ok_or_else(|| CliError::Usage("benchmark needs at least one timed iteration".into()))?;
    Ok((median, metrics))
}

/// Time `warmup + iterations` steps of `config` and report medians.
pub fn measure_complexity_point(
    config: &SimConfig,
    engine: &LoopEngine,
    warmup: usize,
    iterations: usize,
) -> CliResult<ComplexityRow> {
    let (med, metrics) = run_steps(config, engine, warmup, iterations)?;
    let (alpha, r_cutoff) = metrics
        .params
        .map_or((f64::NAN, f64::NAN), |p| (p.alpha, p.r_cutoff));
    Ok(ComplexityRow {
        n: metrics.n_particles,
        t_total: med.wall.as_secs_f64(),
        t_sr: med.short_range.as_secs_f64(),
        t_alg1: med.structure_factor.as_secs_f64(),
        t_alg2: med.long_range.as_secs_f64(),
        alpha,
        r_cutoff,
        n_kvectors: metrics.n_kvectors,
    })
}

/// Run `measure` for each size and fit the scaling exponent of `t_total`.
pub fn bench_complexity<F>(n_list: &[usize], mut measure: F) -> CliResult<ComplexityReport>
where
    F: FnMut(usize) -> CliResult<ComplexityRow>,
{
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let row = measure(n)?;
        log::info!("N = {n}: {:.4e} s per iteration", row.t_total);
        rows.push(row);
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.t_total)).collect();
    let slope = loglog_slope(&points);
    Ok(ComplexityReport { rows, slope })
}

/// Timing model `t = c·N^p` used to check the fit without running anything.
pub fn synthetic_row(n: usize, exponent: f64, prefactor: f64) -> ComplexityRow {
    let t = prefactor * (n as f64).powf(exponent);
    ComplexityRow {
        n,
        t_total: t,
        t_sr: 0.5 * t,
        t_alg1: 0.2 * t,
        t_alg2: 0.3 * t,
        alpha: f64::NAN,
        r_cutoff: f64::NAN,
        n_kvectors: 0,
    }
}

/// Median per-iteration wall time of `config` on `threads` workers.
pub fn measure_thread_point(
    config: &SimConfig,
    threads: usize,
    warmup: usize,
    iterations: usize,
) -> CliResult<Duration> {
    let (med, _) = run_steps(config, &LoopEngine::new(threads), warmup, iterations)?;
    Ok(med.wall)
}

/// Strong-scaling sweep. Speedups are relative to the smallest worker
/// count, scaled so that a single worker is the unit.
pub fn bench_threads<F>(
    thread_list: &[usize],
    configured_threads: Option<usize>,
    mut measure: F,
) -> CliResult<ThreadReport>
where
    F: FnMut(usize) -> CliResult<Duration>,
{
    if thread_list.is_empty() || thread_list.contains(&0) {
        return Err(CliError::Usage(
            "thread list needs positive worker counts".into(),
        ));
    }
    let mut warnings = Vec::new();
    if let Some(t) = configured_threads {
        let msg =
            format!("ignoring threads = {t}; the sweep list {thread_list:?} takes precedence");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let times: Vec<(usize, f64)> = thread_list
        .iter()
        .map(|&t| measure(t).map(|d| (t, d.as_secs_f64())))
        .collect::<CliResult<_>>()?;
    let &(t_base, time_base) = times.iter().min_by_key(|p| p.0).expect("non-empty");
    let rows = times
        .iter()
        .map(|&(threads, t)| {
            let speedup = t_base as f64 * time_base / t;
            ThreadRow {
                threads,
                t_per_iter: t,
                speedup,
                efficiency: speedup / threads as f64,
            }
        })
        .collect();
    Ok(ThreadReport { rows, warnings })
}

/// Append rows to a CSV file, writing `header` only when the file is new
/// or empty. An existing file with a different header is an error.
pub fn append_csv(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    let existing = match std::fs::File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f)
                .read_line(&mut first)
                .map_err(|e| CliError::io(path, e))?;
            Some(first.trim_end().to_string())
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(CliError::io(path, e)),
    };
    let needs_header = match existing.as_deref() {
        None | Some("") => true,
        Some(h) if h == header => false,
        Some(h) => {
            return Err(CliError::Usage(format!(
                "{}: existing header {h:?} does not match {header:?}",
                path.display()
            )))
        }
    };
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut text = String::new();
    if needs_header {
        text.push_str(header);
        text.push('\n');
    }
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
