//! Ground-truth simulator: concrete masked register contents for every cell
//! of the schedule at every clock cycle, for a given key, plaintext and
//! masking order. This is what the attacker's snapshots observe (after the
//! placement permutation hides which bit is which).

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{self, GfByte};
use crate::masking::{self, MaskedByte};
use crate::schedule::{CellSymbol, ScheduleTable, CYCLE_COUNT};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cycle range [{first},{last}] invalid (cycles run 1..=36)")]
    CycleRange { first: usize, last: usize },
    #[error("no ground-truth value for an empty cell")]
    EmptyCell,
}

/// How state/key register masks behave over time.
///
/// The design refreshes its Sbox masks every cycle; whether the plain
/// shift-register stages are also remasked on every shift is not observable
/// from the outside, so both variants are provided. Fresh masks give the
/// adversary strictly less information and are the default.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReshareMode {
    #[default]
    FreshEveryCycle,
    /// A symbol keeps the share split it was produced with while it shifts
    /// through a register bank.
    StableOnShift,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceConfig {
    pub key: [u8; 16],
    pub plaintext: [u8; 16],
    pub d: usize,
    /// Distractor control-logic bits per snapshot; `None` picks the default
    /// for the table's row count (208 for the full 32 rows, so that a d=1
    /// snapshot holds 512 + 208 = 720 bits).
    pub fsm_bits: Option<usize>,
    pub seed: u64,
    pub reshare_mode: ReshareMode,
}

impl TraceConfig {
    pub fn new(key: [u8; 16], plaintext: [u8; 16], d: usize, seed: u64) -> Self {
        Self {
            key,
            plaintext,
            d,
            fsm_bits: None,
            seed,
            reshare_mode: ReshareMode::default(),
        }
    }

    pub fn fsm_bit_count(&self, rows: usize) -> usize {
        self.fsm_bits.unwrap_or_else(|| default_fsm_bits(rows))
    }
}

/// Distractor-bit budget proportional to the register-file size: 6.5 bits
/// per byte row, i.e. 208 for the full 32 rows and 52 for an 8-row reduced
/// schedule.
pub fn default_fsm_bits(rows: usize) -> usize {
    rows * 13 / 2
}

pub fn data_bit_count(rows: usize, d: usize) -> usize {
    rows * 8 * (d + 1)
}

/// All register bits of one clock cycle: the masked data cells in schedule
/// row order plus the distractor bits.
#[derive(Clone, Debug)]
pub struct RegisterFile {
    pub cycle: usize,
    pub cells: Vec<MaskedByte>,
    pub fsm: Vec<bool>,
}

impl RegisterFile {
    pub fn d(&self) -> usize {
        self.cells[0].order()
    }

    pub fn total_bits(&self) -> usize {
        data_bit_count(self.cells.len(), self.d()) + self.fsm.len()
    }

    /// Flattens to the canonical logical bit order: rows outer, then share
    /// index, then bit 7 down to bit 0; distractor bits follow the data bits.
    pub fn flat_bits(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.total_bits());
        for cell in &self.cells {
            for share in cell.shares() {
                for b in (0..8).rev() {
                    out.push(share.bit(b));
                }
            }
        }
        out.extend_from_slice(&self.fsm);
        out
    }
}

/// The logical bit index of (row, share, bit-offset) under the canonical
/// order. `bit_offset` counts from the most significant bit, matching
/// [`RegisterFile::flat_bits`].
pub fn logical_bit_index(d: usize, row: usize, share: usize, bit_offset: usize) -> usize {
    (row * (d + 1) + share) * 8 + bit_offset
}

/// The concrete value a schedule symbol takes for a given key and plaintext.
///
/// Bridge MixColumns bytes (those never stored in a register) are computed
/// all the same; only register contents are restricted to stored symbols.
pub fn ground_truth_value(
    sym: CellSymbol,
    key: &[u8; 16],
    plaintext: &[u8; 16],
) -> Result<GfByte, SimError> {
    let k = |i: u8| GfByte(key[i as usize]);
    let p = |i: u8| GfByte(plaintext[i as usize]);
    match sym {
        CellSymbol::Empty => Err(SimError::EmptyCell),
        CellSymbol::K(i) => Ok(k(i)),
        CellSymbol::S(j) => Ok(cipher::sbox(p(j) ^ k(j))),
        CellSymbol::M(j) => {
            let mut s = [GfByte(0); 16];
            for (i, slot) in s.iter_mut().enumerate() {
                *slot = cipher::sbox(p(i as u8) ^ k(i as u8));
            }
            let mixed = cipher::mix_columns(&cipher::shift_rows(&s));
            Ok(mixed[j as usize])
        }
        CellSymbol::K2(i) => {
            let mut rk = [GfByte(0); 16];
            for (x, slot) in rk.iter_mut().enumerate() {
                *slot = GfByte(key[x]);
            }
            let rk2 = cipher::key_schedule_round(&rk, 1).expect("round 1 in range");
            Ok(rk2[i as usize])
        }
        CellSymbol::S2(j) => {
            let m = ground_truth_value(CellSymbol::M(j), key, plaintext)?;
            let k2 = ground_truth_value(CellSymbol::K2(j), key, plaintext)?;
            Ok(cipher::sbox(m ^ k2))
        }
    }
}

// Fibonacci LFSR over 16 bits, taps 16/15/13/4. Drives the distractor bits.
fn lfsr16_step(s: u16) -> u16 {
    let bit = (s ^ (s >> 1) ^ (s >> 3) ^ (s >> 12)) & 1;
    (s >> 1) | (bit << 15)
}

/// Distractor bit `k` at a given cycle: the low bits expose a cycle counter,
/// the rest follow a fixed LFSR stream. Pure in (cycle, k).
pub fn fsm_bit(cycle: usize, k: usize) -> bool {
    if k < 8 {
        (cycle >> k) & 1 == 1
    } else {
        let mut s = 0xACE1u16;
        for _ in 0..(cycle + k) {
            s = lfsr16_step(s);
        }
        s & 1 == 1
    }
}

fn shares_for_cell(
    cfg: &TraceConfig,
    row: usize,
    cycle: usize,
    sym: CellSymbol,
    value: GfByte,
) -> MaskedByte {
    let seed = match cfg.reshare_mode {
        ReshareMode::FreshEveryCycle => {
            masking::sub_seed(cfg.seed, &[0, row as u64, cycle as u64])
        }
        ReshareMode::StableOnShift => {
            // Keyed per (bank, symbol): the same symbol keeps its shares as
            // it moves through a bank, while the state and key banks stay
            // independently masked.
            let bank = if row < crate::schedule::STATE_ROWS { 0 } else { 1 };
            let tag = match sym {
                CellSymbol::Empty => unreachable!("empty cells are not shared"),
                CellSymbol::K(i) => 0x100 + i as u64,
                CellSymbol::S(i) => 0x200 + i as u64,
                CellSymbol::M(i) => 0x300 + i as u64,
                CellSymbol::K2(i) => 0x400 + i as u64,
                CellSymbol::S2(i) => 0x500 + i as u64,
            };
            masking::sub_seed(cfg.seed, &[1, bank, tag])
        }
    };
    masking::share(value, cfg.d, &mut masking::rng_from_seed(seed))
}

/// Simulates cycles `first_cycle..=last_cycle` of the given schedule.
///
/// Each cell holds the ground-truth value of its symbol split into d+1
/// shares; empty cells hold all-zero shares. Pure in (config, table, range):
/// the same arguments always produce bit-identical register files.
pub fn simulate(
    cfg: &TraceConfig,
    table: &ScheduleTable,
    first_cycle: usize,
    last_cycle: usize,
) -> Result<Vec<RegisterFile>, SimError> {
    if first_cycle < 1 || first_cycle > last_cycle || last_cycle > CYCLE_COUNT {
        return Err(SimError::CycleRange {
            first: first_cycle,
            last: last_cycle,
        });
    }
    let fsm_bits = cfg.fsm_bit_count(table.row_count());
    let mut out = Vec::with_capacity(last_cycle - first_cycle + 1);
    for cycle in first_cycle..=last_cycle {
        let mut cells = Vec::with_capacity(table.row_count());
        for row in 0..table.row_count() {
            let sym = table.cell(row, cycle);
            if sym.is_empty() {
                cells.push(MaskedByte::zero(cfg.d));
            } else {
                let value = ground_truth_value(sym, &cfg.key, &cfg.plaintext)?;
                cells.push(shares_for_cell(cfg, row, cycle, sym, value));
            }
        }
        let fsm = (0..fsm_bits).map(|k| fsm_bit(cycle, k)).collect();
        out.push(RegisterFile { cycle, cells, fsm });
    }
    Ok(out)
}

/// Writes the trace dump format: data cells as
/// `cycle,row,share_index,value_hex`.
pub fn write_trace_csv(files: &[RegisterFile], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "cycle,row,share_index,value_hex")?;
    for rf in files {
        for (row, cell) in rf.cells.iter().enumerate() {
            for (s, share) in cell.shares().iter().enumerate() {
                writeln!(w, "{},{},{},{:02x}", rf.cycle, row, s, share.0)?;
            }
        }
    }
    Ok(())
}

/// Writes the distractor-bit dump: `cycle,fsm_index,bit`.
pub fn write_fsm_csv(files: &[RegisterFile], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "cycle,fsm_index,bit")?;
    for rf in files {
        for (k, &bit) in rf.fsm.iter().enumerate() {
            writeln!(w, "{},{},{}", rf.cycle, k, u8::from(bit))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::unshare;
    use crate::schedule::{load_schedule, relations_for_window, FIRST_FULL_CYCLE};
    use rand::Rng;

    fn demo_cfg(d: usize, seed: u64) -> TraceConfig {
        TraceConfig::new(
            *b"\x2b\x7e\x15\x16\x28\xae\xd2\xa6\xab\xf7\x15\x88\x09\xcf\x4f\x3c",
            *b"\x32\x43\xf6\xa8\x88\x5a\x30\x8d\x31\x31\x98\xa2\xe0\x37\x07\x34",
            d,
            seed,
        )
    }

    #[test]
    fn symbol_values_match_a_straight_line_round() {
        // Straight-line oracle for AES round 1 and the round-2 key, coded
        // independently of ground_truth_value's per-symbol dispatch.
        let mut rng = masking::rng_from_seed(21);
        for _ in 0..20 {
            let key: [u8; 16] = rng.gen();
            let pt: [u8; 16] = rng.gen();
            let gk: Vec<GfByte> = key.iter().map(|&b| GfByte(b)).collect();
            let mut s = [GfByte(0); 16];
            for i in 0..16 {
                s[i] = cipher::sbox(GfByte(pt[i]) ^ gk[i]);
            }
            let m = cipher::mix_columns(&cipher::shift_rows(&s));
            let mut rk = [GfByte(0); 16];
            rk.copy_from_slice(&gk);
            let k2 = cipher::key_schedule_round(&rk, 1).unwrap();
            for j in 0..16u8 {
                assert_eq!(ground_truth_value(CellSymbol::K(j), &key, &pt).unwrap(), gk[j as usize]);
                assert_eq!(ground_truth_value(CellSymbol::S(j), &key, &pt).unwrap(), s[j as usize]);
                assert_eq!(ground_truth_value(CellSymbol::M(j), &key, &pt).unwrap(), m[j as usize]);
                assert_eq!(ground_truth_value(CellSymbol::K2(j), &key, &pt).unwrap(), k2[j as usize]);
                assert_eq!(
                    ground_truth_value(CellSymbol::S2(j), &key, &pt).unwrap(),
                    cipher::sbox(m[j as usize] ^ k2[j as usize])
                );
            }
        }
    }

    #[test]
    fn sbox_self_cancellation() {
        let key = [0x42u8; 16];
        let pt = [0x42u8; 16];
        for j in 0..16u8 {
            assert_eq!(
                ground_truth_value(CellSymbol::S(j), &key, &pt).unwrap(),
                GfByte(0x63)
            );
        }
    }

    #[test]
    fn round2_key_of_zero_key() {
        let zero = [0u8; 16];
        for (i, want) in [0x62u8, 0x63, 0x63, 0x63].iter().enumerate() {
            assert_eq!(
                ground_truth_value(CellSymbol::K2(i as u8), &zero, &zero).unwrap(),
                GfByte(*want)
            );
        }
    }

    #[test]
    fn empty_cell_has_no_value() {
        assert!(ground_truth_value(CellSymbol::Empty, &[0; 16], &[0; 16]).is_err());
    }

    #[test]
    fn unmasked_cycle_16_exposes_key() {
        let table = load_schedule();
        let cfg = demo_cfg(0, 5);
        let rfs = simulate(&cfg, &table, 16, 16).unwrap();
        for i in 0..16 {
            assert_eq!(rfs[0].cells[16 + i].shares(), &[GfByte(cfg.key[i])]);
        }
    }

    #[test]
    fn masking_invariant_holds_everywhere() {
        let table = load_schedule();
        for d in [1, 2] {
            let cfg = demo_cfg(d, 6);
            for rf in simulate(&cfg, &table, 1, 36).unwrap() {
                for (row, cell) in rf.cells.iter().enumerate() {
                    let sym = table.cell(row, rf.cycle);
                    assert_eq!(cell.shares().len(), d + 1);
                    if sym.is_empty() {
                        assert_eq!(unshare(cell), GfByte(0));
                    } else {
                        assert_eq!(
                            unshare(cell),
                            ground_truth_value(sym, &cfg.key, &cfg.plaintext).unwrap(),
                            "row {row} cycle {} symbol {sym}",
                            rf.cycle
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn fresh_masks_change_between_cycles() {
        let table = load_schedule();
        let cfg = demo_cfg(1, 7);
        let rfs = simulate(&cfg, &table, 16, 27).unwrap();
        // Share 0 of the K0 key cell: trace it along its row as it rotates.
        // Row 16 holds K0 at cycles 16 and 20; with fresh masks the share
        // split should differ almost surely across the 12 cycles.
        let mut distinct = std::collections::BTreeSet::new();
        for rf in &rfs {
            distinct.insert(rf.cells[16].shares()[0].0);
        }
        assert!(distinct.len() > 6, "shares barely changed: {distinct:?}");
    }

    #[test]
    fn stable_mode_keeps_symbol_shares() {
        let table = load_schedule();
        let mut cfg = demo_cfg(2, 8);
        cfg.reshare_mode = ReshareMode::StableOnShift;
        let rfs = simulate(&cfg, &table, 16, 36).unwrap();
        // K0 sits in the key bank at (row 16, cycle 16) and again at
        // (row 16, cycle 20) after a full rotation: same shares.
        let a = rfs[0].cells[16].clone();
        let b = rfs[4].cells[16].clone();
        assert_eq!(a, b);
        // State-bank K0 at (row 0, cycle 16) is masked independently.
        let c = rfs[0].cells[0].clone();
        assert_eq!(unshare(&a), unshare(&c));
        assert_ne!(a, c);
    }

    #[test]
    fn simulation_is_deterministic() {
        let table = load_schedule();
        let cfg = demo_cfg(1, 9);
        let a = simulate(&cfg, &table, 10, 20).unwrap();
        let b = simulate(&cfg, &table, 10, 20).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.cells, y.cells);
            assert_eq!(x.fsm, y.fsm);
        }
        // And independent of the requested range.
        let c = simulate(&cfg, &table, 15, 15).unwrap();
        assert_eq!(a[5].cells, c[0].cells);
    }

    #[test]
    fn emitted_relations_hold_on_simulated_values() {
        let table = load_schedule();
        let mut rng = masking::rng_from_seed(22);
        for _ in 0..20 {
            let key: [u8; 16] = rng.gen();
            let pt: [u8; 16] = rng.gen();
            let rels = relations_for_window(&table, FIRST_FULL_CYCLE, 21).unwrap();
            let value_of = |sym: CellSymbol| ground_truth_value(sym, &key, &pt).unwrap();
            for rel in &rels.relations {
                assert!(rel.holds(&value_of, &pt), "{rel:?} violated");
            }
        }
    }

    #[test]
    fn bad_cycle_ranges_rejected() {
        let table = load_schedule();
        let cfg = demo_cfg(0, 1);
        assert!(simulate(&cfg, &table, 0, 5).is_err());
        assert!(simulate(&cfg, &table, 20, 10).is_err());
        assert!(simulate(&cfg, &table, 30, 37).is_err());
    }

    #[test]
    fn default_bit_budget_matches_the_design() {
        // 32 rows, d=1: 512 data bits + 208 distractors = 720 per snapshot.
        assert_eq!(default_fsm_bits(32), 208);
        assert_eq!(data_bit_count(32, 1) + default_fsm_bits(32), 720);
        assert_eq!(default_fsm_bits(8), 52);
    }

    #[test]
    fn flat_bits_order() {
        let table = load_schedule();
        let cfg = demo_cfg(1, 10);
        let rf = &simulate(&cfg, &table, 16, 16).unwrap()[0];
        let bits = rf.flat_bits();
        assert_eq!(bits.len(), 720);
        // Spot-check: bit 0 is the MSB of share 0 of row 0.
        assert_eq!(bits[0], rf.cells[0].shares()[0].bit(7));
        let idx = logical_bit_index(1, 3, 1, 2);
        assert_eq!(bits[idx], rf.cells[3].shares()[1].bit(5));
    }
}
