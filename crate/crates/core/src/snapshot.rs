//! Binary state snapshots: a magic line, a little-endian `u64` header length,
//! a JSON header and the raw `f64` payload in little-endian order.
//!
//! Payload order is `A`, `E` (gauge index, then component, then grid point),
//! followed by `φ` and `π` as interleaved real/imaginary pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;
use crate::state::FieldState;
use crate::C64;

pub const MAGIC: &[u8] = b"SUSYSNAP1\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub n: usize,
    pub box_length: f64,
    pub n_v: usize,
    pub n_c: usize,
    pub time: f64,
    pub step: usize,
    /// Free-form label, usually the model name from the run configuration.
    #[serde(default)]
    pub label: String,
    pub fields: Vec<FieldLayout>,
}

/// One array of the payload, in storage order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldLayout {
    pub name: String,
    pub shape: Vec<usize>,
    pub complex: bool,
}

fn layouts(n: usize, n_v: usize, n_c: usize) -> Vec<FieldLayout> {
    let real = |name: &str| FieldLayout { name: name.into(), shape: vec![n_v, 3, n, n, n], complex: false };
    let cplx = |name: &str| FieldLayout { name: name.into(), shape: vec![n_c, n, n, n], complex: true };
    vec![real("A"), real("E"), cplx("phi"), cplx("pi")]
}

impl SnapshotHeader {
    pub fn for_state(state: &FieldState, grid: &SpectralGrid, step: usize, label: &str) -> Self {
        SnapshotHeader {
            n: grid.n(),
            box_length: grid.box_length(),
            n_v: state.n_v(),
            n_c: state.n_c(),
            time: state.time,
            step,
            label: label.to_string(),
            fields: layouts(grid.n(), state.n_v(), state.n_c()),
        }
    }

    fn payload_len(&self) -> usize {
        let len = self.n.pow(3);
        2 * self.n_v * 3 * len + 2 * 2 * self.n_c * len
    }
}

pub fn write_snapshot<W: Write>(out: &mut W, header: &SnapshotHeader, state: &FieldState) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Snapshot(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for group in [&state.a, &state.e] {
        for v in group.iter() {
            for comp in v.iter() {
                for x in comp {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    for group in [&state.phi, &state.pi] {
        for f in group.iter() {
            for z in f {
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<(SnapshotHeader, FieldState)> {
    let mut magic = vec![0u8; MAGIC.len()];
    input.read_exact(&mut magic).map_err(|_| Error::Snapshot("file too short".into()))?;
    if magic != MAGIC {
        return Err(Error::Snapshot("bad magic bytes".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let hlen = u64::from_le_bytes(len) as usize;
    if hlen > 1 << 20 {
        return Err(Error::Snapshot(format!("header length {hlen} is implausible")));
    }
    let mut json = vec![0u8; hlen];
    input.read_exact(&mut json)?;
    let header: SnapshotHeader = serde_json::from_slice(&json).map_err(|e| Error::Snapshot(e.to_string()))?;
    if header.fields != layouts(header.n, header.n_v, header.n_c) {
        return Err(Error::Snapshot("field layout does not match the header dimensions".into()));
    }
    let mut raw = Vec::with_capacity(header.payload_len() * 8);
    input.read_to_end(&mut raw)?;
    if raw.len() != header.payload_len() * 8 {
        return Err(Error::Snapshot(format!("payload has {} bytes, expected {}", raw.len(), header.payload_len() * 8)));
    }
    let mut vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let len = header.n.pow(3);
    let mut state = FieldState::zeros(header.n_v, header.n_c, len);
    state.time = header.time;
    for group in [&mut state.a, &mut state.e] {
        for v in group.iter_mut() {
            for comp in v.iter_mut() {
                for x in comp.iter_mut() {
                    *x = vals.next().unwrap();
                }
            }
        }
    }
    for group in [&mut state.phi, &mut state.pi] {
        for f in group.iter_mut() {
            for z in f.iter_mut() {
                let re = vals.next().unwrap();
                *z = C64::new(re, vals.next().unwrap());
            }
        }
    }
    Ok((header, state))
}

pub fn save(path: &Path, header: &SnapshotHeader, state: &FieldState) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, header, state)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(SnapshotHeader, FieldState)> {
    read_snapshot(&mut BufReader::new(File::open(path)?))
}
