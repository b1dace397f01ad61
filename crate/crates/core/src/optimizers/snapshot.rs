//! Optimizer state snapshots in the matrix text format.
//!
//! Each block is a line with its name followed by the matrix; the step count
//! follows a `step_index` line.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::adam::AdamState;
use super::sgd::SgdState;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const STEP_KEY: &str = "step_index";

fn write_blocks(blocks: &[(&str, &Matrix)], step: u64) -> String {
    let mut s = String::new();
    for (name, m) in blocks {
        writeln!(s, "{name}").unwrap();
        s.push_str(&m.to_text());
    }
    writeln!(s, "{STEP_KEY}\n{step}").unwrap();
    s
}

fn read_blocks(text: &str) -> Result<(BTreeMap<String, Matrix>, u64)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    let mut blocks = BTreeMap::new();
    let mut step = None;
    while let Some(name) = lines.next() {
        if name == STEP_KEY {
            let v = lines.next().ok_or_else(|| Error::Parse("missing step_index value".into()))?;
            step = Some(v.parse().map_err(|e| Error::Parse(format!("bad step_index `{v}`: {e}")))?);
            continue;
        }
        let (m, _) = Matrix::parse_lines(&mut lines)?;
        if blocks.insert(name.to_string(), m).is_some() {
            return Err(Error::Parse(format!("duplicate block `{name}`")));
        }
    }
    let step = step.ok_or_else(|| Error::Parse("missing step_index".into()))?;
    Ok((blocks, step))
}

fn take(blocks: &mut BTreeMap<String, Matrix>, name: &str) -> Result<Matrix> {
    blocks.remove(name).ok_or_else(|| Error::Parse(format!("missing block `{name}`")))
}

fn finish(blocks: BTreeMap<String, Matrix>) -> Result<()> {
    match blocks.keys().next() {
        Some(k) => Err(Error::Parse(format!("unexpected block `{k}`"))),
        None => Ok(()),
    }
}

impl SgdState {
    pub fn to_snapshot(&self) -> String {
        write_blocks(&[("X", &self.x), ("Z", &self.z), ("U", &self.u)], self.step)
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let (mut b, step) = read_blocks(text)?;
        let mut s = SgdState::from_parts(take(&mut b, "X")?, take(&mut b, "Z")?, take(&mut b, "U")?)?;
        finish(b)?;
        s.step = step;
        Ok(s)
    }
}

impl AdamState {
    pub fn to_snapshot(&self) -> String {
        write_blocks(
            &[("X", &self.x), ("Z", &self.z), ("U", &self.u), ("p", &self.p), ("q", &self.q)],
            self.step,
        )
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let (mut b, step) = read_blocks(text)?;
        let base = SgdState::from_parts(take(&mut b, "X")?, take(&mut b, "Z")?, take(&mut b, "U")?)?;
        let p = take(&mut b, "p")?;
        let q = take(&mut b, "q")?;
        finish(b)?;
        if p.shape() != base.z.shape() || q.shape() != base.u.shape() {
            return Err(Error::DimensionMismatch("moment blocks do not match the state".into()));
        }
        Ok(AdamState { x: base.x, z: base.z, u: base.u, p, q, step })
    }
}
