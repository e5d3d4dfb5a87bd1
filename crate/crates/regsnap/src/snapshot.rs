//! What the attacker actually sees: each cycle's register bits as an
//! unordered vector under a hidden placement permutation that is fixed for
//! the whole attack instance, optionally corrupted by extraction noise.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::sim::RegisterFile;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("placement covers {placement} bits but the register file has {bits}")]
    SizeMismatch { placement: usize, bits: usize },
    #[error("flip probability {0} outside [0,1]")]
    FlipProb(f64),
    #[error("bad snapshot CSV line {0}")]
    BadCsv(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Bijection from logical bit positions to physical observation indices.
/// One map per attack instance; every cycle's snapshot goes through the same
/// map, which is exactly what makes the coefficient variables of the SAT
/// encoding cycle-invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementMap {
    perm: Vec<u32>,
}

impl PlacementMap {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n as u32).collect(),
        }
    }

    /// Uniformly random placement of `n` bits.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        assert!(n >= 1, "a placement needs at least one bit");
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.shuffle(rng);
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Physical observation index of a logical bit.
    pub fn apply(&self, logical: usize) -> usize {
        self.perm[logical] as usize
    }

    /// The inverse map: observation index -> logical bit.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0usize; self.perm.len()];
        for (logical, &phys) in self.perm.iter().enumerate() {
            inv[phys as usize] = logical;
        }
        inv
    }

    /// Ground-truth dump, `logical_index,obs_index`. Written next to
    /// snapshot sets as a test oracle only; the attack path never reads it.
    pub fn to_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "logical_index,obs_index")?;
        for (l, &p) in self.perm.iter().enumerate() {
            writeln!(w, "{l},{p}")?;
        }
        Ok(())
    }
}

/// One snapshot: the register bits of one cycle in physical observation
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationVector {
    pub cycle: usize,
    pub bits: Vec<bool>,
}

impl ObservationVector {
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Scatters a register file's bits through the placement.
pub fn place(rf: &RegisterFile, pm: &PlacementMap) -> Result<ObservationVector, SnapshotError> {
    let logical = rf.flat_bits();
    if logical.len() != pm.len() {
        return Err(SnapshotError::SizeMismatch {
            placement: pm.len(),
            bits: logical.len(),
        });
    }
    let mut bits = vec![false; logical.len()];
    for (l, &bit) in logical.iter().enumerate() {
        bits[pm.apply(l)] = bit;
    }
    Ok(ObservationVector {
        cycle: rf.cycle,
        bits,
    })
}

/// Flips each bit independently with probability `flip_prob`; models
/// extraction errors (the real extraction pipeline read every bit
/// correctly, so the default everywhere is 0).
pub fn corrupt(
    obs: &ObservationVector,
    flip_prob: f64,
    rng: &mut impl Rng,
) -> Result<ObservationVector, SnapshotError> {
    if !(0.0..=1.0).contains(&flip_prob) {
        return Err(SnapshotError::FlipProb(flip_prob));
    }
    let bits = obs
        .bits
        .iter()
        .map(|&b| if rng.gen_bool(flip_prob) { !b } else { b })
        .collect();
    Ok(ObservationVector {
        cycle: obs.cycle,
        bits,
    })
}

/// Snapshot-set CSV: `cycle,obs_index,bit`.
pub fn write_snapshots_csv(
    snaps: &[ObservationVector],
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "cycle,obs_index,bit")?;
    for s in snaps {
        for (i, &b) in s.bits.iter().enumerate() {
            writeln!(w, "{},{},{}", s.cycle, i, u8::from(b))?;
        }
    }
    Ok(())
}

pub fn read_snapshots_csv(reader: impl BufRead) -> Result<Vec<ObservationVector>, SnapshotError> {
    let mut out: Vec<ObservationVector> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = || parts.next().ok_or(SnapshotError::BadCsv(lineno + 1));
        let cycle: usize = field()?.trim().parse().map_err(|_| SnapshotError::BadCsv(lineno + 1))?;
        let idx: usize = field()?.trim().parse().map_err(|_| SnapshotError::BadCsv(lineno + 1))?;
        let bit: u8 = field()?.trim().parse().map_err(|_| SnapshotError::BadCsv(lineno + 1))?;
        if out.last().map(|s| s.cycle) != Some(cycle) {
            out.push(ObservationVector {
                cycle,
                bits: Vec::new(),
            });
        }
        let snap = out.last_mut().unwrap();
        if snap.bits.len() != idx || bit > 1 {
            return Err(SnapshotError::BadCsv(lineno + 1));
        }
        snap.bits.push(bit == 1);
    }
    Ok(out)
}
