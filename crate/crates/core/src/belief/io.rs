//! Flat binary stack files.
//!
//! ```text
//! {"kind":"belief","width":50,"height":50,"n":9}\n
//! <n * height * width little-endian f32>            belief
//! <n * 2 * height * width little-endian f32>        affinity (x grid, then y grid)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AffinityFieldStack, BeliefMapStack};
use crate::error::{Error, Result};

/// Headers longer than this are rejected before parsing.
const MAX_HEADER_BYTES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackKind {
    Belief,
    Affinity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackHeader {
    pub kind: StackKind,
    pub width: usize,
    pub height: usize,
    pub n: usize,
}

impl StackHeader {
    fn payload_floats(&self) -> Option<usize> {
        let per = match self.kind {
            StackKind::Belief => 1,
            StackKind::Affinity => 2,
        };
        self.width
            .checked_mul(self.height)?
            .checked_mul(self.n)?
            .checked_mul(per)
    }
}

fn split_header(bytes: &[u8]) -> Result<(StackHeader, &[u8])> {
    let limit = bytes.len().min(MAX_HEADER_BYTES);
    let nl = bytes[..limit]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse("missing stack header line"))?;
    let header: StackHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::parse(format!("bad stack header: {e}")))?;
    Ok((header, &bytes[nl + 1..]))
}

fn decode_floats(header: &StackHeader, payload: &[u8]) -> Result<Vec<f32>> {
    let floats = header
        .payload_floats()
        .ok_or_else(|| Error::parse("stack dimensions overflow"))?;
    let expected = floats
        .checked_mul(4)
        .ok_or_else(|| Error::parse("stack dimensions overflow"))?;
    if payload.len() != expected {
        return Err(Error::parse(format!(
            "stack payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn encode(header: &StackHeader, values: &[f32]) -> Vec<u8> {
    let mut out = serde_json::to_vec(header).expect("header serializes");
    out.push(b'\n');
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_belief_stack(bytes: &[u8]) -> Result<BeliefMapStack> {
    let (header, payload) = split_header(bytes)?;
    if header.kind != StackKind::Belief {
        return Err(Error::parse("expected a belief stack"));
    }
    let values = decode_floats(&header, payload)?;
    BeliefMapStack::from_values(header.width, header.height, header.n, values)
}

pub fn read_affinity_stack(bytes: &[u8]) -> Result<AffinityFieldStack> {
    let (header, payload) = split_header(bytes)?;
    if header.kind != StackKind::Affinity {
        return Err(Error::parse("expected an affinity stack"));
    }
    let values = decode_floats(&header, payload)?;
    AffinityFieldStack::from_values(header.width, header.height, header.n, values)
}

pub fn write_belief_stack(stack: &BeliefMapStack, mut w: impl Write) -> Result<()> {
    let header = StackHeader {
        kind: StackKind::Belief,
        width: stack.width(),
        height: stack.height(),
        n: stack.len(),
    };
    w.write_all(&encode(&header, stack.values()))?;
    Ok(())
}

pub fn write_affinity_stack(stack: &AffinityFieldStack, mut w: impl Write) -> Result<()> {
    let header = StackHeader {
        kind: StackKind::Affinity,
        width: stack.width(),
        height: stack.height(),
        n: stack.len(),
    };
    w.write_all(&encode(&header, stack.values()))?;
    Ok(())
}

impl BeliefMapStack {
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        read_belief_stack(&buf)
    }
}

impl AffinityFieldStack {
    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        read_affinity_stack(&buf)
    }
}
