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
//! Extended-XYZ reading and writing.
//!
//! Line 1 holds the particle count, line 2 carries the cubic cell as
//! `Lattice="L 0 0 0 L 0 0 0 L"`, and each record is `symbol x y z q`
//! with an optional trailing mass (default 1).

use std::io::Write;
use std::path::Path;

use ewald_md::model::{ParticleSet, SimulationBox};

use crate::error::{CliError, CliResult};

fn symbol_for(q: f64) -> &'static str {
    if q > 0.0 {
        "Na"
    } else if q < 0.0 {
        "Cl"
    } else {
        "X"
    }
}

/// Serialise a particle set; positions and charges round-trip exactly.
pub fn write_xyz<W: Write>(out: &mut W, ps: &ParticleSet) -> std::io::Result<()> {
    let l = ps.sim_box().edge();
    writeln!(out, "{}", ps.len())?;
    writeln!(
        out,
        "Lattice=\"{l:.16e} 0 0 0 {l:.16e} 0 0 0 {l:.16e}\" Properties=species:S:1:pos:R:3:charge:R:1"
    )?;
    for ((r, &q), &m) in ps.positions().iter().zip(ps.charges()).zip(ps.masses()) {
        write!(
            out,
            "{} {:.16e} {:.16e} {:.16e} {:.16e}",
            symbol_for(q),
            r[0],
            r[1],
            r[2],
            q
        )?;
        if m != 1.0 {
            write!(out, " {m:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_xyz_file(path: &Path, ps: &ParticleSet) -> CliResult<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_xyz(&mut w, ps)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read_xyz_file(path: &Path) -> CliResult<ParticleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_xyz(&text, &path.display().to_string())
}

fn parse_lattice(comment: &str) -> Option<f64> {
    let start = comment.find("Lattice=\"")? + "Lattice=\"".len();
    let end = start + comment[start..].find('"')?;
    let v: Vec<f64> = comment[start..end]
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .ok()?;
    if v.len() != 9 {
        return None;
    }
    let l = v[0];
    let diagonal = v[4] == l && v[8] == l;
    let off = [1, 2, 3, 5, 6, 7].iter().all(|&i| v[i] == 0.0);
    (diagonal && off).then_some(l)
}

/// Parse XYZ text; `origin` names the source in error messages.
pub fn parse_xyz(text: &str, origin: &str) -> CliResult<ParticleSet> {
    let err = |line: usize, message: String| CliError::Xyz {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let n: usize = first.trim().parse().map_err(|_| {
        err(
            1,
            format!("expected a particle count, found {:?}", first.trim()),
        )
    })?;
    let comment = lines
        .next()
        .ok_or_else(|| err(2, "missing comment line".into()))?;
    let edge = parse_lattice(comment).ok_or_else(|| {
        err(
            2,
            "expected a cubic Lattice=\"L 0 0 0 L 0 0 0 L\" entry".into(),
        )
    })?;
    let sim_box = SimulationBox::cubic(edge).map_err(|e| err(2, e.to_string()))?;

    let records: Vec<(usize, &str)> = lines
        .enumerate()
        .map(|(i, l)| (i + 3, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if records.len() != n {
        let line = records.last().map_or(2, |r| r.0);
        return Err(err(
            line,
            format!(
                "header declares {n} particles but {} records follow",
                records.len()
            ),
        ));
    }

    let mut ps = ParticleSet::new(n, sim_box)?;
    for (idx, (line, rec)) in records.into_iter().enumerate() {
        let fields: Vec<&str> = rec.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(err(
                line,
                format!(
                    "expected `symbol x y z q`, found {} fields (missing charge q?)",
                    fields.len()
                ),
            ));
        }
        if fields.len() > 6 {
            return Err(err(line, format!("too many fields ({})", fields.len())));
        }
        let num = |k: usize, what: &str| -> CliResult<f64> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    err(
                        line,
                        format!("{what} field {:?} is not a finite number", fields[k]),
                    )
                })
        };
        let r = [num(1, "x")?, num(2, "y")?, num(3, "z")?];
        let q = num(4, "charge q")?;
        let m = if fields.len() == 6 {
            num(5, "mass")?
        } else {
            1.0
        };
        if m <= 0.0 {
            return Err(err(line, format!("mass must be positive, got {m}")));
        }
        ps.positions_mut()[idx] = r;
        ps.charges_mut()[idx] = q;
        ps.masses_mut()[idx] = m;
    }
    Ok(ps)
}
