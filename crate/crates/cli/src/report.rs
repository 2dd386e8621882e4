//! Output sinks, run manifests and shared argument parsing.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lowdeg::measures::{Alternate, Degree, Null, Prior};
use lowdeg::problem_file::Loaded;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Common, Failure};

/// Standard output, or the `--out` file.
pub fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

pub fn csv_sink(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
    Ok(csv::Writer::from_writer(sink(out)?))
}

/// Shortest round-trip text of a float; empty for `None`.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_spec(common: &Common) -> Result<(PathBuf, Vec<u8>), Failure> {
    let path = common
        .spec
        .clone()
        .ok_or_else(|| Failure::usage("this command needs --spec <file>"))?;
    let bytes = std::fs::read(&path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok((path, bytes))
}

pub fn parse_degree(text: &str) -> Result<Degree, Failure> {
    match text.trim() {
        "inf" | "infinity" | "unbounded" => Ok(Degree::Unbounded),
        t => t
            .parse::<u32>()
            .map(Degree::Finite)
            .map_err(|_| Failure::usage(format!("degree {t:?} is neither a nonnegative integer nor `inf`"))),
    }
}

/// Refuses problems whose evaluation would expand a product null with more
/// than `cap` states into dense tables.
pub fn check_state_cap(loaded: &Loaded, cap: u64) -> lowdeg::Result<()> {
    let Loaded::Explicit(p) = loaded else {
        return Ok(());
    };
    let Null::Product(null) = &p.null else {
        return Ok(());
    };
    let dense = match &p.prior {
        Prior::Explicit(list) => list.iter().any(|w| matches!(w.alternate, Alternate::Table(_))),
        Prior::Sampler(_) => true,
    };
    let states = null.state_count();
    if dense && states > cap as u128 {
        return Err(lowdeg::Error::StateCap {
            states,
            cap: cap as u128,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskStatus {
    pub name: String,
    pub status: String,
    pub seconds: f64,
    pub detail: String,
}

/// Provenance of one run: identical inputs reproduce identical CSV bytes.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub spec_sha256: String,
    pub wall_clock_seconds: f64,
    pub tasks: Vec<TaskStatus>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, spec: &[u8], started: Instant, tasks: Vec<TaskStatus>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed,
            spec_sha256: sha256_hex(spec),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            tasks,
        }
    }

    /// Writes `<out>.manifest.json` beside an output file; no-op for stdout.
    pub fn write_beside(&self, out: Option<&Path>) -> Result<(), Failure> {
        let Some(out) = out else {
            return Ok(());
        };
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::usage(e.to_string()))?;
        std::fs::write(PathBuf::from(name), text + "\n")?;
        Ok(())
    }
}
