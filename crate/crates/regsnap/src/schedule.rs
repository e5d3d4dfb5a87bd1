//! The register schedule of the serialized AES-DOM design: which symbolic
//! byte each of the 32 byte-registers (16 state + 16 key) holds at every
//! clock cycle from 1 to 36, plus the algebraic relations that link those
//! symbols across cycles.
//!
//! The schedule is data, not code: the simulator and the SAT encoder both
//! consume the same embedded table, so the attacker's "architecture
//! knowledge" is a single shared artifact. An alternative architecture can
//! be plugged in from CSV.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

use crate::cipher::{self, GfByte};

pub const CYCLE_COUNT: usize = 36;
pub const STATE_ROWS: usize = 16;
pub const TOTAL_ROWS: usize = 32;
/// First cycle at which every register holds meaningful data.
pub const FIRST_FULL_CYCLE: usize = 16;

/// Symbolic content of one register byte at one cycle.
///
/// `K`/`S`/`M` are the first-round key bytes, SubBytes outputs and
/// MixColumns outputs; `K2`/`S2` are their second-round counterparts
/// (written `K'`/`S'` in the schedule format).
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum CellSymbol {
    Empty,
    K(u8),
    S(u8),
    M(u8),
    K2(u8),
    S2(u8),
}

impl CellSymbol {
    pub fn index(self) -> Option<u8> {
        match self {
            CellSymbol::Empty => None,
            CellSymbol::K(i)
            | CellSymbol::S(i)
            | CellSymbol::M(i)
            | CellSymbol::K2(i)
            | CellSymbol::S2(i) => Some(i),
        }
    }

    pub fn is_empty(self) -> bool {
        self == CellSymbol::Empty
    }
}

impl fmt::Display for CellSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellSymbol::Empty => write!(f, "-"),
            CellSymbol::K(i) => write!(f, "K{i}"),
            CellSymbol::S(i) => write!(f, "S{i}"),
            CellSymbol::M(i) => write!(f, "M{i}"),
            CellSymbol::K2(i) => write!(f, "K'{i}"),
            CellSymbol::S2(i) => write!(f, "S'{i}"),
        }
    }
}

impl FromStr for CellSymbol {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, ScheduleError> {
        let bad = || ScheduleError::BadSymbol(s.to_string());
        if s == "-" {
            return Ok(CellSymbol::Empty);
        }
        let (ctor, rest): (fn(u8) -> CellSymbol, &str) = if let Some(r) = s.strip_prefix("K'") {
            (CellSymbol::K2, r)
        } else if let Some(r) = s.strip_prefix("S'") {
            (CellSymbol::S2, r)
        } else if let Some(r) = s.strip_prefix('K') {
            (CellSymbol::K, r)
        } else if let Some(r) = s.strip_prefix('S') {
            (CellSymbol::S, r)
        } else if let Some(r) = s.strip_prefix('M') {
            (CellSymbol::M, r)
        } else {
            return Err(bad());
        };
        let idx: u8 = rest.parse().map_err(|_| bad())?;
        if idx > 15 {
            return Err(bad());
        }
        Ok(ctor(idx))
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("unrecognized schedule symbol {0:?}")]
    BadSymbol(String),
    #[error("schedule row {row} has {got} cycles, expected {expected}")]
    RowLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("bad schedule CSV header")]
    BadHeader,
    #[error("row index {0} out of range for this table")]
    RowIndex(usize),
    #[error("window [{start},{end}] outside the informative range [16,36]")]
    Window { start: usize, end: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One register byte across all 36 cycles. `source_row` is the row index in
/// the full 32-row table, which a reduced table keeps for reporting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleRow {
    pub source_row: usize,
    pub cells: Vec<CellSymbol>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleTable {
    rows: Vec<ScheduleRow>,
}

/// Register contents of the AES-DOM design for clock cycles 1..=36.
/// Rows 0..16 are the state registers, rows 16..32 the key registers.
const SCHEDULE_TEXT: &str = "\
- - - - - - - - - - - - - - - K0 K1 K2 K3 S0 M1 M2 M3 S4 M5 M6 M7 S8 M9 M10 M11 S12 M13 M14 M15 K'0
- - - - - - - - - - - - - - K0 K1 K2 K3 S0 S5 M2 M3 S4 S9 M6 M7 S8 S13 M10 M11 S12 S1 M14 M15 K'0 K'1
- - - - - - - - - - - - - K0 K1 K2 K3 S0 S1 S10 M3 S4 S9 S14 M7 S8 S13 S2 M11 S12 S1 S6 M15 K'0 K'1 K'2
- - - - - - - - - - - - K0 K1 K2 K3 S0 S1 S2 S15 S4 S9 S14 S3 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3
- - - - - - - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S9 S14 S3 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0
- - - - - - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S9 S14 S3 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1
- - - - - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S14 S3 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2
- - - - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S3 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3
- - - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4
- - - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S13 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5
- - - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S2 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6
- - - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S10 S7 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6 S'7
- - - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S10 S11 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6 S'7 S'8
- - K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S10 S11 S12 S1 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6 S'7 S'8 S'9
- K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S10 S11 S12 S13 S6 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6 S'7 S'8 S'9 S'10
K0 K1 K2 K3 S0 S1 S2 S3 S4 S5 S6 S7 S8 S9 S10 S11 S12 S13 S14 S11 K'0 K'1 K'2 K'3 S'0 S'1 S'2 S'3 S'4 S'5 S'6 S'7 S'8 S'9 S'10 S'11
- - - - - - - - - - - - - - - K0 K1 K2 K3 K0 K1 K2 K3 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'0
- - - - - - - - - - - - - - K0 K1 K2 K3 K0 K1 K2 K3 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'0 K'1
- - - - - - - - - - - - - K0 K1 K2 K3 K0 K1 K2 K3 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'0 K'1 K'2
- - - - - - - - - - - - K0 K1 K2 K3 K0 K1 K2 K3 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'0 K'1 K'2 K'3
- - - - - - - - - - - K4 K5 K6 K7 K4 K5 K6 K7 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'4
- - - - - - - - - - K4 K5 K6 K7 K4 K5 K6 K7 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'4 K'5
- - - - - - - - - K4 K5 K6 K7 K4 K5 K6 K7 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'4 K'5 K'6
- - - - - - - - K4 K5 K6 K7 K4 K5 K6 K7 K4 K5 K6 K7 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'4 K'5 K'6 K'7
- - - - - - - K4 K5 K6 K7 K8 K9 K10 K11 K8 K9 K10 K11 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'8
- - - - - - K4 K5 K6 K7 K8 K9 K10 K11 K8 K9 K10 K11 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'8 K'9
- - - - - K4 K5 K6 K7 K8 K9 K10 K11 K8 K9 K10 K11 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'8 K'9 K'10
- - - - K4 K5 K6 K7 K8 K9 K10 K11 K8 K9 K10 K11 K8 K9 K10 K11 K12 K13 K14 K15 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'8 K'9 K'10 K'11
- - - - - - - - - - - - - - - K12 K13 K14 K15 K12 K13 K14 K15 K'0 K'1 K'2 K'3 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'12
- - - - - - - - - - - - - - K12 K13 K14 K15 K12 K13 K14 K15 K'0 K'1 K'2 K'3 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'12 K'13
- - - - - - - - - - - - - K12 K13 K14 K15 K12 K13 K14 K15 K'0 K'1 K'2 K'3 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'12 K'13 K'14
- - - - - - - - - - - - K12 K13 K14 K15 K12 K13 K14 K15 K'0 K'1 K'2 K'3 K'4 K'5 K'6 K'7 K'8 K'9 K'10 K'11 K'12 K'13 K'14 K'15";

/// Loads the embedded 32-row schedule.
pub fn load_schedule() -> ScheduleTable {
    static TABLE: OnceLock<ScheduleTable> = OnceLock::new();
    TABLE
        .get_or_init(|| {
            ScheduleTable::parse_rows(SCHEDULE_TEXT.lines().map(|l| l.split_whitespace()))
                .expect("embedded schedule parses")
        })
        .clone()
}

impl ScheduleTable {
    fn parse_rows<'a, I, J>(lines: I) -> Result<Self, ScheduleError>
    where
        I: Iterator<Item = J>,
        J: Iterator<Item = &'a str>,
    {
        let mut rows = Vec::new();
        for (row, toks) in lines.enumerate() {
            let cells: Vec<CellSymbol> = toks
                .map(|t| t.trim().parse())
                .collect::<Result<_, _>>()?;
            if cells.len() != CYCLE_COUNT {
                return Err(ScheduleError::RowLength {
                    row,
                    got: cells.len(),
                    expected: CYCLE_COUNT,
                });
            }
            rows.push(ScheduleRow {
                source_row: row,
                cells,
            });
        }
        Ok(ScheduleTable { rows })
    }

    /// Reads the CSV schedule format: header `cycle_1,...,cycle_36`, one row
    /// per register byte, cells as `K0`, `S15`, `M7`, `K'3`, `S'11`, `-`.
    pub fn from_csv(reader: impl BufRead) -> Result<Self, ScheduleError> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(ScheduleError::BadHeader)??;
        let expect: Vec<String> = (1..=CYCLE_COUNT).map(|c| format!("cycle_{c}")).collect();
        if header.split(',').map(str::trim).ne(expect.iter().map(String::as_str)) {
            return Err(ScheduleError::BadHeader);
        }
        let mut body = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            body.push(line);
        }
        Self::parse_rows(body.iter().map(|l| l.split(',')))
    }

    pub fn to_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (1..=CYCLE_COUNT).map(|c| format!("cycle_{c}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.cells.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// A table restricted to the given rows of this one (used for desk-scale
    /// experiments). Row indices refer to this table's rows.
    pub fn reduced(&self, rows: &[usize]) -> Result<ScheduleTable, ScheduleError> {
        let mut out = Vec::with_capacity(rows.len());
        for &r in rows {
            let row = self.rows.get(r).ok_or(ScheduleError::RowIndex(r))?;
            out.push(row.clone());
        }
        Ok(ScheduleTable { rows: out })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[ScheduleRow] {
        &self.rows
    }

    /// Cell at (row, cycle); cycles are 1-based as in the schedule format.
    pub fn cell(&self, row: usize, cycle: usize) -> CellSymbol {
        self.rows[row].cells[cycle - 1]
    }

    /// Every non-empty symbol appearing in the given cycle window.
    pub fn window_symbols(&self, start_cycle: usize, length: usize) -> BTreeSet<CellSymbol> {
        let mut set = BTreeSet::new();
        for row in &self.rows {
            for cycle in start_cycle..start_cycle + length {
                let sym = row.cells[cycle - 1];
                if !sym.is_empty() {
                    set.insert(sym);
                }
            }
        }
        set
    }

    /// All non-empty symbols anywhere in the table.
    pub fn all_symbols(&self) -> BTreeSet<CellSymbol> {
        self.window_symbols(1, CYCLE_COUNT)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Table does not have the 32-row, 36-cycle shape.
    Shape,
    /// A register is still empty at cycle 16.
    Completeness,
    /// Key rows at cycle 16 are not K0..K15 in row order.
    KeyOrder,
    /// A cell contradicts the byte-serial shift structure.
    Shift,
    /// A cell contradicts the fixed injection sequence of its row.
    Injection,
    /// A relation operand never occurs anywhere in the table.
    MissingRelationOperand,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub cycle: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Expected injection at a key-row cell, if that cell is an injection point.
fn key_injection(row: usize, cycle: usize) -> Option<CellSymbol> {
    match (row, cycle) {
        (27, 5..=12) => Some(CellSymbol::K(cycle as u8 - 1)),
        (19, 13..=16) => Some(CellSymbol::K(cycle as u8 - 13)),
        (31, 13..=16) => Some(CellSymbol::K(cycle as u8 - 1)),
        (31, 21..=36) => Some(CellSymbol::K2(cycle as u8 - 21)),
        (27, 25..=32) => Some(CellSymbol::K2(cycle as u8 - 21)),
        (19, 33..=36) => Some(CellSymbol::K2(cycle as u8 - 33)),
        _ => None,
    }
}

/// What state row 15 (the serial input end) receives at each cycle.
fn state_input(cycle: usize) -> CellSymbol {
    match cycle {
        1..=4 => CellSymbol::K(cycle as u8 - 1),
        5..=19 => CellSymbol::S(cycle as u8 - 5),
        20 => CellSymbol::S(11), // covered by the ShiftRows reshuffle
        21..=24 => CellSymbol::K2(cycle as u8 - 21),
        _ => CellSymbol::S2(cycle as u8 - 25),
    }
}

/// Checks the table against the design's shift structure. Meaningful for
/// full 32-row tables; reduced tables report a shape violation.
///
/// State rows shift up one position per cycle (row r takes row r+1's byte),
/// with three exceptions: the ShiftRows reshuffle going into cycle 20, the
/// MixColumns outputs entering rows 0..3 going into cycles 21/25/29/33, and
/// the serial input at row 15. Key rows either shift up or rotate within
/// their 4-row word group, with the key-schedule outputs injected at fixed
/// cells.
pub fn validate_schedule(table: &ScheduleTable) -> ValidationReport {
    let mut report = ValidationReport::default();
    if table.row_count() != TOTAL_ROWS
        || table.rows.iter().any(|r| r.cells.len() != CYCLE_COUNT)
    {
        report.violations.push(Violation {
            row: 0,
            cycle: 0,
            kind: ViolationKind::Shape,
        });
        return report;
    }
    let mut push = |row, cycle, kind| report.violations.push(Violation { row, cycle, kind });

    // Completeness at cycle 16 and key ordering.
    for r in 0..TOTAL_ROWS {
        if table.cell(r, FIRST_FULL_CYCLE).is_empty() {
            push(r, FIRST_FULL_CYCLE, ViolationKind::Completeness);
        }
    }
    for i in 0..16usize {
        if table.cell(STATE_ROWS + i, FIRST_FULL_CYCLE) != CellSymbol::K(i as u8) {
            push(STATE_ROWS + i, FIRST_FULL_CYCLE, ViolationKind::KeyOrder);
        }
    }

    // State rows.
    for r in 0..STATE_ROWS - 1 {
        if !table.cell(r, 1).is_empty() {
            push(r, 1, ViolationKind::Shift);
        }
    }
    for cycle in 2..=CYCLE_COUNT {
        for r in 0..STATE_ROWS - 1 {
            let expected = if cycle == 20 {
                CellSymbol::S(cipher::shift_rows_src(r) as u8)
            } else if matches!(cycle, 21 | 25 | 29 | 33) && r <= 2 {
                let col = (cycle - 21) / 4;
                CellSymbol::M((4 * col + 1 + r) as u8)
            } else {
                table.cell(r + 1, cycle - 1)
            };
            if table.cell(r, cycle) != expected {
                push(r, cycle, ViolationKind::Shift);
            }
        }
    }
    for cycle in 1..=CYCLE_COUNT {
        let expected = if cycle == 20 {
            CellSymbol::S(cipher::shift_rows_src(STATE_ROWS - 1) as u8)
        } else {
            state_input(cycle)
        };
        if table.cell(STATE_ROWS - 1, cycle) != expected {
            push(STATE_ROWS - 1, cycle, ViolationKind::Injection);
        }
    }

    // Key rows: shift, word-group rotation, or a known injection point.
    for r in STATE_ROWS..TOTAL_ROWS {
        if !table.cell(r, 1).is_empty() {
            push(r, 1, ViolationKind::Shift);
        }
    }
    for cycle in 2..=CYCLE_COUNT {
        for r in STATE_ROWS..TOTAL_ROWS {
            let got = table.cell(r, cycle);
            let shift_ok = r + 1 < TOTAL_ROWS && got == table.cell(r + 1, cycle - 1);
            let group = STATE_ROWS + ((r - STATE_ROWS) / 4) * 4;
            let rot_src = group + (r - group + 1) % 4;
            let rot_ok = got == table.cell(rot_src, cycle - 1);
            let inj_ok = key_injection(r, cycle) == Some(got);
            if !(shift_ok || rot_ok || inj_ok) {
                push(r, cycle, ViolationKind::Shift);
            }
        }
    }

    // Every storable operand of every candidate relation must occur.
    let present = table.all_symbols();
    for rel in relation_candidates(table) {
        for sym in rel.storable_operands(table) {
            if !present.contains(&sym) {
                push(0, 0, ViolationKind::MissingRelationOperand);
            }
        }
    }

    report
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

/// An algebraic link between schedule symbols, imposed by the round function
/// and key schedule of AES-128.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkRelation {
    /// `S_j = Sbox(P_j ^ K_j)` with the plaintext byte `P_j` known.
    SboxAdd { byte: u8 },
    /// MixColumns over column `col` of the ShiftRows-mapped SubBytes
    /// outputs. Output `M_{4*col}` may be a bridge value that never rests in
    /// a register (it feeds the second-round Sbox directly).
    MixCol { col: u8 },
    /// Key-schedule word `word` of round 1: word 0 folds the rotated,
    /// substituted last word plus the round constant; words 1..3 chain by
    /// XOR.
    KeySched { word: u8 },
    /// `S'_j = Sbox(M_j ^ K'_j)`.
    SboxRound2 { byte: u8 },
}

/// MixColumns input source: for output byte `4*col + i`, the SubBytes symbol
/// index feeding it after ShiftRows.
pub fn mixcol_input(col: u8, i: u8) -> u8 {
    cipher::shift_rows_src(4 * col as usize + i as usize) as u8
}

impl LinkRelation {
    /// Operand symbols that must be observable for the relation to be
    /// emitted: every operand except bridge MixColumns bytes, which never
    /// occur in any register.
    pub fn storable_operands(self, table: &ScheduleTable) -> Vec<CellSymbol> {
        let storable_m = |j: u8| table.all_symbols().contains(&CellSymbol::M(j));
        match self {
            LinkRelation::SboxAdd { byte } => {
                vec![CellSymbol::K(byte), CellSymbol::S(byte)]
            }
            LinkRelation::MixCol { col } => {
                let mut ops: Vec<CellSymbol> =
                    (0..4).map(|i| CellSymbol::S(mixcol_input(col, i))).collect();
                for i in 0..4u8 {
                    let m = 4 * col + i;
                    if storable_m(m) {
                        ops.push(CellSymbol::M(m));
                    }
                }
                ops
            }
            LinkRelation::KeySched { word } => {
                let mut ops = Vec::new();
                if word == 0 {
                    ops.extend((0..4).map(CellSymbol::K));
                    ops.extend((12..16).map(CellSymbol::K));
                } else {
                    ops.extend((4 * word - 4..4 * word).map(CellSymbol::K2));
                    ops.extend((4 * word..4 * word + 4).map(CellSymbol::K));
                }
                ops.extend((4 * word..4 * word + 4).map(CellSymbol::K2));
                ops
            }
            LinkRelation::SboxRound2 { byte } => {
                let mut ops = vec![CellSymbol::K2(byte), CellSymbol::S2(byte)];
                if storable_m(byte) {
                    ops.push(CellSymbol::M(byte));
                }
                ops
            }
        }
    }

    /// The MixColumns relation this one needs for a bridge input, if any.
    pub fn bridge_dependency(self, table: &ScheduleTable) -> Option<LinkRelation> {
        if let LinkRelation::SboxRound2 { byte } = self {
            if !table.all_symbols().contains(&CellSymbol::M(byte)) {
                return Some(LinkRelation::MixCol { col: byte / 4 });
            }
        }
        None
    }

    /// Evaluates the relation on concrete symbol values; the ground-truth
    /// consistency checks run every emitted relation through this.
    pub fn holds(
        self,
        value_of: &impl Fn(CellSymbol) -> GfByte,
        plaintext: &[u8; 16],
    ) -> bool {
        match self {
            LinkRelation::SboxAdd { byte } => {
                let j = byte as usize;
                value_of(CellSymbol::S(byte))
                    == cipher::sbox(GfByte(plaintext[j]) ^ value_of(CellSymbol::K(byte)))
            }
            LinkRelation::MixCol { col } => {
                let inputs = [
                    value_of(CellSymbol::S(mixcol_input(col, 0))),
                    value_of(CellSymbol::S(mixcol_input(col, 1))),
                    value_of(CellSymbol::S(mixcol_input(col, 2))),
                    value_of(CellSymbol::S(mixcol_input(col, 3))),
                ];
                let out = cipher::mix_column(inputs);
                (0..4).all(|i| value_of(CellSymbol::M(4 * col + i as u8)) == out[i])
            }
            LinkRelation::KeySched { word } => {
                if word == 0 {
                    (0..4u8).all(|i| {
                        let rot = value_of(CellSymbol::K(12 + (i + 1) % 4));
                        let rcon = if i == 0 { cipher::RCON[1] } else { 0 };
                        value_of(CellSymbol::K2(i))
                            == value_of(CellSymbol::K(i)) ^ cipher::sbox(rot) ^ GfByte(rcon)
                    })
                } else {
                    (0..4u8).all(|i| {
                        value_of(CellSymbol::K2(4 * word + i))
                            == value_of(CellSymbol::K2(4 * word - 4 + i))
                                ^ value_of(CellSymbol::K(4 * word + i))
                    })
                }
            }
            LinkRelation::SboxRound2 { byte } => {
                value_of(CellSymbol::S2(byte))
                    == cipher::sbox(value_of(CellSymbol::M(byte)) ^ value_of(CellSymbol::K2(byte)))
            }
        }
    }
}

/// Known constants a window's relations fold in.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ConstBinding {
    /// Plaintext byte `byte` feeds the first-round Sbox input.
    Plaintext { byte: u8 },
    /// Round constant folded into key-schedule word 0.
    Rcon { value: u8 },
}

#[derive(Clone, Debug, Default)]
pub struct WindowRelations {
    pub relations: Vec<LinkRelation>,
    pub constants: Vec<ConstBinding>,
}

/// Candidate relations for a table: one per output symbol family that occurs
/// anywhere in it, in a fixed canonical order.
fn relation_candidates(table: &ScheduleTable) -> Vec<LinkRelation> {
    let present = table.all_symbols();
    let mut out = Vec::new();
    for byte in 0..16u8 {
        if present.contains(&CellSymbol::S(byte)) {
            out.push(LinkRelation::SboxAdd { byte });
        }
    }
    for col in 0..4u8 {
        if (0..4).any(|i| present.contains(&CellSymbol::M(4 * col + i))) {
            out.push(LinkRelation::MixCol { col });
        }
    }
    for word in 0..4u8 {
        if (0..4).any(|i| present.contains(&CellSymbol::K2(4 * word + i))) {
            out.push(LinkRelation::KeySched { word });
        }
    }
    for byte in 0..16u8 {
        if present.contains(&CellSymbol::S2(byte)) {
            out.push(LinkRelation::SboxRound2 { byte });
        }
    }
    out
}

/// Emits the relations whose every storable operand occurs inside the cycle
/// window `[start_cycle, start_cycle + length)`, together with the constants
/// they bind. Bridge MixColumns bytes are exempt from the occurrence rule
/// but require their defining MixColumns relation to be emitted too.
pub fn relations_for_window(
    table: &ScheduleTable,
    start_cycle: usize,
    length: usize,
) -> Result<WindowRelations, ScheduleError> {
    let end = start_cycle + length.max(1) - 1;
    if start_cycle < FIRST_FULL_CYCLE || end > CYCLE_COUNT {
        return Err(ScheduleError::Window {
            start: start_cycle,
            end,
        });
    }
    let mut out = WindowRelations::default();
    if length == 0 {
        return Ok(out);
    }
    let in_window = table.window_symbols(start_cycle, length);
    let mut emitted = BTreeSet::new();
    for rel in relation_candidates(table) {
        let ops_ok = rel
            .storable_operands(table)
            .iter()
            .all(|sym| in_window.contains(sym));
        let bridge_ok = match rel.bridge_dependency(table) {
            Some(dep) => emitted.contains(&dep),
            None => true,
        };
        if ops_ok && bridge_ok {
            emitted.insert(rel);
            out.relations.push(rel);
            match rel {
                LinkRelation::SboxAdd { byte } => {
                    out.constants.push(ConstBinding::Plaintext { byte })
                }
                LinkRelation::KeySched { word: 0 } => out.constants.push(ConstBinding::Rcon {
                    value: cipher::RCON[1],
                }),
                _ => {}
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_table_shape_and_anchors() {
        let t = load_schedule();
        assert_eq!(t.row_count(), TOTAL_ROWS);
        // Row 0, cycles 12..=16: empty until K0..K3 march in, then K0 at 16.
        assert_eq!(t.cell(0, 12), CellSymbol::Empty);
        assert_eq!(t.cell(0, 13), CellSymbol::Empty);
        assert_eq!(t.cell(0, 16), CellSymbol::K(0));
        assert_eq!(t.cell(1, 16), CellSymbol::K(1));
        assert_eq!(t.cell(3, 16), CellSymbol::K(3));
        assert_eq!(t.cell(4, 16), CellSymbol::S(0));
        // Key half at cycle 16 in order.
        for i in 0..16u8 {
            assert_eq!(t.cell(STATE_ROWS + i as usize, 16), CellSymbol::K(i));
        }
        // Row 0 ends the 36-cycle span holding the first second-round key byte.
        assert_eq!(t.cell(0, 36), CellSymbol::K2(0));
    }

    #[test]
    fn embedded_table_validates_cleanly() {
        let report = validate_schedule(&load_schedule());
        assert!(report.is_ok(), "violations: {:?}", report.violations);
    }

    #[test]
    fn single_cell_fault_reported_exactly() {
        let mut t = load_schedule();
        // Corrupt a last-cycle cell: nothing downstream depends on it, so the
        // report names exactly the corrupted coordinate.
        t.rows[4].cells[35] = CellSymbol::S2(5);
        let report = validate_schedule(&t);
        assert_eq!(
            report.violations,
            vec![Violation {
                row: 4,
                cycle: 36,
                kind: ViolationKind::Shift
            }]
        );
    }

    #[test]
    fn all_empty_table_fails_completeness() {
        let mut t = load_schedule();
        for row in &mut t.rows {
            row.cells = vec![CellSymbol::Empty; CYCLE_COUNT];
        }
        let report = validate_schedule(&t);
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Completeness && v.cycle == 16));
    }

    #[test]
    fn any_fault_is_detected() {
        let t = load_schedule();
        let mut rng = crate::masking::rng_from_seed(11);
        use rand::Rng;
        for _ in 0..200 {
            let mut bad = t.clone();
            let r = rng.gen_range(0..TOTAL_ROWS);
            let c = rng.gen_range(0..CYCLE_COUNT);
            let orig = bad.rows[r].cells[c];
            let replacement = [
                CellSymbol::K(5),
                CellSymbol::S(9),
                CellSymbol::K2(2),
                CellSymbol::S2(3),
                CellSymbol::M(2),
                CellSymbol::Empty,
                CellSymbol::K(14),
            ]
            .into_iter()
            .find(|&s| s != orig)
            .unwrap();
            bad.rows[r].cells[c] = replacement;
            assert!(
                !validate_schedule(&bad).is_ok(),
                "undetected fault at ({r},{}): {orig} -> {replacement}",
                c + 1
            );
        }
    }

    #[test]
    fn symbol_parse_round_trip() {
        for s in ["-", "K0", "S15", "M7", "K'3", "S'11"] {
            let sym: CellSymbol = s.parse().unwrap();
            assert_eq!(sym.to_string(), s);
        }
        assert!("K16".parse::<CellSymbol>().is_err());
        assert!("Q3".parse::<CellSymbol>().is_err());
        assert!("K".parse::<CellSymbol>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = load_schedule();
        let mut buf = Vec::new();
        t.to_csv(&mut buf).unwrap();
        let back = ScheduleTable::from_csv(&buf[..]).unwrap();
        assert_eq!(t, back);
        assert!(ScheduleTable::from_csv(&b"bogus\n"[..]).is_err());
    }

    #[test]
    fn window_16_emits_only_covered_sbox_relations() {
        let t = load_schedule();
        let rels = relations_for_window(&t, 16, 1).unwrap();
        // Brute-force oracle: scan the window's symbols and apply the rule.
        let syms = t.window_symbols(16, 1);
        let expect: Vec<LinkRelation> = (0..16u8)
            .filter(|&j| syms.contains(&CellSymbol::S(j)) && syms.contains(&CellSymbol::K(j)))
            .map(|byte| LinkRelation::SboxAdd { byte })
            .collect();
        assert_eq!(rels.relations, expect);
        assert_eq!(rels.relations.len(), 12); // S12..S15 are not there yet
    }

    #[test]
    fn full_window_emits_everything() {
        let t = load_schedule();
        let rels = relations_for_window(&t, 16, 21).unwrap();
        for word in 0..4u8 {
            assert!(rels.relations.contains(&LinkRelation::KeySched { word }));
        }
        for byte in 0..12u8 {
            assert!(rels.relations.contains(&LinkRelation::SboxRound2 { byte }));
        }
        for byte in 12..16u8 {
            assert!(!rels.relations.contains(&LinkRelation::SboxRound2 { byte }));
        }
        for byte in 0..16u8 {
            assert!(rels.relations.contains(&LinkRelation::SboxAdd { byte }));
        }
        for col in 0..4u8 {
            assert!(rels.relations.contains(&LinkRelation::MixCol { col }));
        }
    }

    #[test]
    fn zero_length_window_is_empty() {
        let t = load_schedule();
        let rels = relations_for_window(&t, 16, 0).unwrap();
        assert!(rels.relations.is_empty() && rels.constants.is_empty());
    }

    #[test]
    fn window_bounds_checked() {
        let t = load_schedule();
        assert!(relations_for_window(&t, 15, 2).is_err());
        assert!(relations_for_window(&t, 16, 22).is_err());
        assert!(relations_for_window(&t, 36, 1).is_ok());
    }

    #[test]
    fn relation_set_grows_monotonically() {
        let t = load_schedule();
        for start in FIRST_FULL_CYCLE..=CYCLE_COUNT {
            let mut prev: BTreeSet<LinkRelation> = BTreeSet::new();
            for len in 0..=(CYCLE_COUNT - start + 1) {
                let rels = relations_for_window(&t, start, len).unwrap();
                let cur: BTreeSet<LinkRelation> = rels.relations.iter().copied().collect();
                assert!(prev.is_subset(&cur), "window [{start},{len}] shrank");
                prev = cur;
            }
        }
    }

    #[test]
    fn window_operands_occur_in_window() {
        let t = load_schedule();
        for start in FIRST_FULL_CYCLE..=CYCLE_COUNT {
            for len in 1..=(CYCLE_COUNT - start + 1) {
                let syms = t.window_symbols(start, len);
                for rel in relations_for_window(&t, start, len).unwrap().relations {
                    for op in rel.storable_operands(&t) {
                        assert!(syms.contains(&op), "{rel:?} operand {op} not in window");
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_table_keeps_source_rows() {
        let t = load_schedule();
        let r = t.reduced(&[0, 1, 2, 3, 16, 17, 18, 19]).unwrap();
        assert_eq!(r.row_count(), 8);
        assert_eq!(r.rows()[4].source_row, 16);
        assert!(t.reduced(&[99]).is_err());
    }
}
