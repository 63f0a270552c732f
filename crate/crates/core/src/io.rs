//! File formats: instance JSON Lines, coupled-pair records and junta specs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NppError, Result};
use crate::instances::{CouplingMode, PairSample};
use crate::lowdeg::{JuntaAlgorithm, JuntaSpec};
use crate::model::{CoordinateSet, Dist, Instance};
use crate::wide;

/// One line of an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub n: usize,
    pub scale_bits: u32,
    pub dist: Dist,
    pub seed: u64,
    pub values: Vec<String>,
}

impl InstanceRecord {
    pub fn from_instance(g: &Instance) -> Self {
        InstanceRecord {
            n: g.n(),
            scale_bits: g.scale_bits(),
            dist: g.dist(),
            seed: g.seed(),
            values: g.values().iter().map(|&v| wide::to_hex(v)).collect(),
        }
    }

    pub fn to_instance(&self) -> Result<Instance> {
        if self.values.len() != self.n {
            return Err(NppError::DimensionMismatch {
                expected: self.n,
                got: self.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .map(|h| wide::from_hex(h))
            .collect::<Result<Vec<_>>>()?;
        Instance::new(self.scale_bits, values, self.dist, self.seed)
    }
}

pub fn instance_to_line(g: &Instance) -> String {
    serde_json::to_string(&InstanceRecord::from_instance(g)).expect("instance records serialize")
}

pub fn parse_instance_line(line: &str) -> Result<Instance> {
    let rec: InstanceRecord =
        serde_json::from_str(line).map_err(|e| NppError::Parse(format!("instance record: {e}")))?;
    rec.to_instance()
}

pub fn write_instances(mut w: impl Write, instances: &[Instance]) -> Result<()> {
    for g in instances {
        writeln!(w, "{}", instance_to_line(g))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every non-blank line; errors carry the 1-based line number.
pub fn read_instances(r: impl BufRead) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_instance_line(&line).map_err(|e| NppError::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_instance_file(path: &Path, instances: &[Instance]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| NppError::Io(format!("{}: {e}", path.display())))?;
    write_instances(std::io::BufWriter::new(f), instances)
}

/// Missing or unreadable files are parse failures for the caller.
pub fn read_instance_file(path: &Path) -> Result<Vec<Instance>> {
    let f = fs::File::open(path).map_err(|e| NppError::Parse(format!("{}: {e}", path.display())))?;
    read_instances(BufReader::new(f))
}

/// Header line preceding the two instances of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairHeader {
    pub mode: CouplingMode,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept: Option<String>,
    pub seed: u64,
}

pub fn write_pair(mut w: impl Write, pair: &PairSample) -> Result<()> {
    let header = PairHeader {
        mode: pair.mode,
        epsilon: pair.epsilon,
        kept: pair.kept.as_ref().map(CoordinateSet::to_hex),
        seed: pair.seed,
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("headers serialize"))?;
    writeln!(w, "{}", instance_to_line(&pair.g))?;
    writeln!(w, "{}", instance_to_line(&pair.g_prime))?;
    w.flush()?;
    Ok(())
}

pub fn read_pair(r: impl BufRead) -> Result<PairSample> {
    let lines: Vec<String> = r
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.len() != 3 {
        return Err(NppError::Parse(format!("a pair has 3 records, found {}", lines.len())));
    }
    let header: PairHeader =
        serde_json::from_str(&lines[0]).map_err(|e| NppError::Parse(format!("pair header: {e}")))?;
    let g = parse_instance_line(&lines[1])?;
    let g_prime = parse_instance_line(&lines[2])?;
    let kept = header
        .kept
        .as_deref()
        .map(|h| CoordinateSet::from_hex(g.n(), h))
        .transpose()?;
    Ok(PairSample {
        g,
        g_prime,
        mode: header.mode,
        epsilon: header.epsilon,
        kept,
        seed: header.seed,
    })
}

pub fn read_junta(path: &Path) -> Result<JuntaAlgorithm> {
    let text = fs::read_to_string(path).map_err(|e| NppError::Parse(format!("{}: {e}", path.display())))?;
    let spec: JuntaSpec =
        serde_json::from_str(&text).map_err(|e| NppError::Parse(format!("junta spec: {e}")))?;
    JuntaAlgorithm::from_spec(&spec)
}

pub fn write_junta(path: &Path, a: &JuntaAlgorithm) -> Result<()> {
    let text = serde_json::to_string_pretty(&a.to_spec()).expect("junta specs serialize");
    fs::write(path, text + "\n").map_err(|e| NppError::Io(format!("{}: {e}", path.display())))
}
