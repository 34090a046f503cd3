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
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ewald_md::engine::LoopEngine;
use ewald_md::model::ParticleSet;
use ewald_md::sim::{rocksalt_in_box, run_with_engine};
use ewald_md::EV_PER_GAUSSIAN_ENERGY;
use ewald_md_cli::bench::{
    append_csv, bench_complexity, bench_threads, measure_complexity_point, measure_thread_point,
    synthetic_row, COMPLEXITY_HEADER, THREADS_HEADER,
};
use ewald_md_cli::config::{parse_config, Config, DEFAULT_THREAD_SWEEP};
use ewald_md_cli::verify::{verify, Fault, VerifyOptions};
use ewald_md_cli::xyz::{read_xyz_file, write_xyz_file};
use ewald_md_cli::{CliError, CliResult};

/// Molecular dynamics of point charges with Ewald electrostatics.
#[derive(Debug, Parser)]
#[command(name = "ewald-md", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an NVE trajectory.
    Run {
        /// Start from an extended-XYZ file instead of a rock-salt lattice.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Append per-step energies to this CSV file.
        #[arg(long)]
        energies: Option<PathBuf>,
        /// Write the final configuration as extended XYZ.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time one iteration across particle counts and fit the scaling exponent.
    BenchComplexity {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Replace measurements by t = N^p (checks the fit).
        #[arg(long, hide = true)]
        synthetic_exponent: Option<f64>,
    },
    /// Strong-scaling sweep over worker counts at fixed N.
    BenchThreads {
        #[arg(long, value_delimiter = ',')]
        threads: Option<Vec<usize>>,
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check the solver against reference calculations.
    Verify {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write one JSON object per check to this file.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    SelfEnergySign,
}

const VERIFY_DEFAULT_N: usize = 64;

fn engine_for(flag: Option<usize>, config: &Config) -> CliResult<LoopEngine> {
    Ok(match flag {
        Some(t) => LoopEngine::new(t),
        None => LoopEngine::from_env_or(config.threads.unwrap_or(0))?,
    })
}

/// The starting system and whether it is a perfect rock-salt crystal.
fn initial_system(
    config: &Config,
    input: Option<PathBuf>,
    n: usize,
) -> CliResult<(ParticleSet, bool)> {
    match input.or_else(|| config.input.clone()) {
        Some(path) => Ok((read_xyz_file(&path)?, false)),
        None => Ok((rocksalt_in_box(n, config.edge_for(n))?, true)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<ExitCode> {
    let config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => Config::default(),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e| CliError::io("<stdout>", e);

    match cli.command {
        Command::Run {
            input,
            n,
            steps,
            threads,
            energies,
            output,
        } => {
            let n = n.or(config.n).unwrap_or(ewald_md_cli::config::DEFAULT_N);
            let (mut ps, _) = initial_system(&config, input, n)?;
            let mut sim = config.sim_config_for(ps.len());
            if let Some(s) = steps {
                sim.n_steps = s;
            }
            let engine = engine_for(threads, &config)?;
            let m = run_with_engine(&sim, &engine, &mut ps)?;

            writeln!(
                out,
                "N = {}, L = {} Å, workers = {}",
                m.n_particles, m.box_edge, m.workers
            )
            .map_err(io)?;
            if let Some(p) = m.params {
                writeln!(
                    out,
                    "alpha = {:.6e} Å^-2, r_c = {:.4} Å, k_c = {:.4} Å^-1, {} k-vectors",
                    p.alpha, p.r_cutoff, p.k_cutoff, m.n_kvectors
                )
                .map_err(io)?;
            }
            let first = m.energies.first().expect("initial sample");
            let last = m.energies.last().expect("initial sample");
            writeln!(
                out,
                "E(0) = {:.10e} q²/Å ({:.6e} eV), E({}) = {:.10e}",
                first.total(),
                first.total() * EV_PER_GAUSSIAN_ENERGY,
                last.step,
                last.total()
            )
            .map_err(io)?;
            writeln!(
                out,
                "max relative energy deviation {:.3e}, max displacement per step {:.4} Å",
                m.max_relative_deviation(),
                m.max_displacement
            )
            .map_err(io)?;
            if let Some(t) = m.median_step(0) {
                writeln!(
                    out,
                    "median step {:.4e} s (short-range {:.4e}, structure factor {:.4e}, long-range {:.4e}, LJ {:.4e})",
                    t.wall.as_secs_f64(),
                    t.short_range.as_secs_f64(),
                    t.structure_factor.as_secs_f64(),
                    t.long_range.as_secs_f64(),
                    t.lj.as_secs_f64()
                )
                .map_err(io)?;
            }
            if let Some(path) = energies {
                let rows: Vec<String> = m
                    .energies
                    .iter()
                    .map(|e| {
                        format!(
                            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                            e.step,
                            e.coulomb,
                            e.lj,
                            e.kinetic,
                            e.total()
                        )
                    })
                    .collect();
                append_csv(&path, "step,coulomb,lj,kinetic,total", &rows)?;
            }
            if let Some(path) = output {
                write_xyz_file(&path, &ps)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::BenchComplexity {
            n_list,
            threads,
            output,
            synthetic_exponent,
        } => {
            let list = n_list.unwrap_or_else(|| config.bench.n_list.clone());
            let engine = engine_for(threads, &config)?;
            let (warmup, iterations) = (config.bench.warmup, config.bench.iterations);
            let report = match synthetic_exponent {
                Some(p) => bench_complexity(&list, |n| Ok(synthetic_row(n, p, 1e-9)))?,
                None => bench_complexity(&list, |n| {
                    measure_complexity_point(&config.sweep_config(n), &engine, warmup, iterations)
                })?,
            };
            let rows: Vec<String> = report.rows.iter().map(|r| r.csv()).collect();
            writeln!(out, "{COMPLEXITY_HEADER}").map_err(io)?;
            for r in &rows {
                writeln!(out, "{r}").map_err(io)?;
            }
            match report.slope {
                Some(s) => writeln!(out, "log-log slope: {s:.4}").map_err(io)?,
                None => {
                    writeln!(out, "log-log slope: n/a (need at least two sizes)").map_err(io)?
                }
            }
            if let Some(path) = output {
                append_csv(&path, COMPLEXITY_HEADER, &rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::BenchThreads { threads, n, output } => {
            let list = threads
                .or_else(|| config.bench.thread_list.clone())
                .unwrap_or_else(|| DEFAULT_THREAD_SWEEP.to_vec());
            let n = n.unwrap_or(config.bench.scaling_n);
            let sim = config.sweep_config(n);
            let (warmup, iterations) = (config.bench.warmup, config.bench.iterations);
            let report = bench_threads(&list, config.threads, |t| {
                measure_thread_point(&sim, t, warmup, iterations)
            })?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let rows: Vec<String> = report.rows.iter().map(|r| r.csv()).collect();
            writeln!(out, "{THREADS_HEADER}").map_err(io)?;
            for r in &rows {
                writeln!(out, "{r}").map_err(io)?;
            }
            if let Some(path) = output {
                append_csv(&path, THREADS_HEADER, &rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify {
            input,
            n,
            threads,
            jsonl,
            inject_fault,
        } => {
            let n = n.or(config.n).unwrap_or(VERIFY_DEFAULT_N);
            let (ps, crystal) = initial_system(&config, input, n)?;
            let options = VerifyOptions {
                tolerance: config.tolerance,
                overrides: config.overrides,
                subdivision: config.subdivision,
                seed: config.seed,
                crystal,
                fault: inject_fault.map(|f| match f {
                    FaultArg::SelfEnergySign => Fault::SelfEnergySign,
                }),
            };
            let engine = engine_for(threads, &config)?;
            let report = verify(&ps, &options, &engine)?;
            report.write_human(&mut out).map_err(io)?;
            if let Some(path) = jsonl {
                let mut f = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
                report
                    .write_jsonl(&mut f)
                    .map_err(|e| CliError::io(&path, e))?;
            }
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {}", report.failed().join(", "));
                Ok(ExitCode::from(1))
            }
        }
    }
}
