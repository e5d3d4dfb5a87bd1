//! Compiles snapshots, the schedule window and the masking order into a
//! CNF+XOR problem whose models reveal the key.
//!
//! Variable families, in allocation order:
//!
//! 1. Coefficients `c[i][j]`: cell `i` is observed at physical index `j`.
//!    Allocated once per instance; the placement is cycle-invariant.
//! 2. Carry chains of the exactly-one constraints over each `c[i]`.
//! 3. Per-cycle cell values `v[t][i]`: the bit cell `i` holds at cycle `t`,
//!    tied to the observations through the coefficients.
//! 4. Symbol bits: one 8-bit variable vector per schedule symbol in scope.
//!    These play the role of the virtual (unshared) variables: the XOR of a
//!    cell's share bits equals the symbol bit of whatever the schedule says
//!    the cell holds, which links cells across rows and cycles for free.
//! 5. Auxiliary bits of the function links (Sbox circuit nodes, XOR-combined
//!    Sbox inputs).

use std::collections::BTreeSet;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::cipher;
use crate::sat::problem::{Assignment, CnfProblem, Lit, VarId};
use crate::sat::sbox_cnf::SboxCircuit;
use crate::schedule::{
    self, CellSymbol, LinkRelation, ScheduleTable, WindowRelations, CYCLE_COUNT, FIRST_FULL_CYCLE,
};
use crate::sim::{self, RegisterFile};
use crate::snapshot::{ObservationVector, PlacementMap};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("window [{start},+{len}] must lie within [{FIRST_FULL_CYCLE},{CYCLE_COUNT}] and cover at least one cycle")]
    Window { start: usize, len: usize },
    #[error("expected {expected} observation vectors for the window, got {got}")]
    ObservationCount { expected: usize, got: usize },
    #[error("observation for cycle {cycle} has {got} bits, expected n = {expected}")]
    ObservationLength {
        cycle: usize,
        got: usize,
        expected: usize,
    },
    #[error("observation cycles must be consecutive from the window start; got {got}, expected {expected}")]
    ObservationCycle { got: usize, expected: usize },
    #[error("n = {n} observations cannot cover m = {m} targeted register bits")]
    TooFewObservations { n: usize, m: usize },
    #[error(transparent)]
    Schedule(#[from] schedule::ScheduleError),
}

/// Exactly-one encoding choice. The sequential adder is the reference
/// scheme; the pairwise encoding exists to cross-check it.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum OnehotMode {
    #[default]
    SequentialAdder,
    Pairwise,
}

#[derive(Copy, Clone, Debug, Default)]
pub struct EncodeOptions {
    pub onehot: OnehotMode,
}

/// One attack's inputs: consecutive snapshots under one placement, the
/// schedule window they cover, and the masking order.
#[derive(Clone, Debug)]
pub struct AttackInstance {
    pub observations: Vec<ObservationVector>,
    pub window_start: usize,
    pub window_len: usize,
    pub d: usize,
    pub plaintext: [u8; 16],
    /// Total observed bits per snapshot.
    pub n: usize,
    /// Fold the plaintext into the first-round Sbox inputs as constants.
    /// Off means the plaintext bytes become free variables.
    pub known_plaintext: bool,
}

impl AttackInstance {
    pub fn new(
        observations: Vec<ObservationVector>,
        window_start: usize,
        d: usize,
        plaintext: [u8; 16],
    ) -> Self {
        let n = observations.first().map_or(0, |o| o.bits.len());
        Self {
            observations,
            window_start,
            window_len: 0,
            d,
            plaintext,
            n,
            known_plaintext: true,
        }
        .with_len_from_observations()
    }

    fn with_len_from_observations(mut self) -> Self {
        self.window_len = self.observations.len();
        self
    }
}

/// Non-schedule variables the encoder introduces symbol vectors for.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum SymVar {
    Cell(CellSymbol),
    /// Sbox of key byte `j`, as used by key-schedule word 0.
    SubWord(u8),
    /// Plaintext byte `j`, only when the plaintext is treated as unknown.
    Plain(u8),
}

#[derive(Clone, Debug)]
pub struct SboxApp {
    pub inputs: [Lit; 8],
    pub node_vars: Vec<VarId>,
}

#[derive(Clone, Debug)]
struct XorAux {
    out: VarId,
    ins: [Lit; 2],
}

/// Where everything lives in the variable space: enough to decode keys from
/// models and to reconstruct the ground-truth assignment for testing.
#[derive(Clone, Debug)]
pub struct DecodeMap {
    pub rows: usize,
    pub d: usize,
    pub n: usize,
    /// Targeted register bits per cycle.
    pub m: usize,
    pub window_start: usize,
    pub window_len: usize,
    /// `coeff[i][j]` = variable of coefficient c^i_j.
    pub coeff: Vec<Vec<VarId>>,
    carries: Vec<Vec<VarId>>,
    /// `cell_values[t][i]` = value variable of cell i at window offset t.
    pub cell_values: Vec<Vec<VarId>>,
    sym_vars: BTreeMap<SymVar, [VarId; 8]>,
    xor_aux: Vec<XorAux>,
    sbox_apps: Vec<SboxApp>,
    /// Symbol-bit variables of the sixteen key bytes (bit 0 = lsb).
    pub key_bits: [[VarId; 8]; 16],
    onehot: OnehotMode,
}

impl DecodeMap {
    /// Cell index of (row, share, bit offset from msb), mirroring the
    /// logical bit order of the snapshots.
    pub fn cell_index(&self, row: usize, share: usize, bit_offset: usize) -> usize {
        sim::logical_bit_index(self.d, row, share, bit_offset)
    }

    /// The value variables of every (cycle, cell) pair, i.e. the share-level
    /// part of a model.
    pub fn share_value_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.cell_values.iter().flatten().copied()
    }
}

/// Appends the exactly-one constraint over `coeffs`.
///
/// The sequential mode is the bit-serial adder: intermediates `t` accumulate
/// the running sum, every partial carry is forced to zero, and the final sum
/// is forced to one. Returns the carry-chain variables (empty for the
/// pairwise mode and for trivial sizes).
pub fn encode_onehot(p: &mut CnfProblem, coeffs: &[VarId], mode: OnehotMode) -> Vec<VarId> {
    assert!(!coeffs.is_empty(), "exactly-one needs at least one variable");
    match mode {
        OnehotMode::Pairwise => {
            let all: Vec<Lit> = coeffs.iter().map(|&c| Lit::pos(c)).collect();
            p.add_or(&all);
            for i in 0..coeffs.len() {
                for j in 0..i {
                    p.add_or(&[Lit::neg(coeffs[i]), Lit::neg(coeffs[j])]);
                }
            }
            Vec::new()
        }
        OnehotMode::SequentialAdder => {
            let n = coeffs.len();
            if n == 1 {
                p.add_or(&[Lit::pos(coeffs[0])]);
                return Vec::new();
            }
            let mut carries = Vec::with_capacity(n - 1);
            let t2 = p.new_var();
            carries.push(t2);
            p.add_xor_vars(&[t2, coeffs[0], coeffs[1]], false);
            p.add_or(&[Lit::neg(coeffs[0]), Lit::neg(coeffs[1])]);
            for j in 2..=n.saturating_sub(2) {
                let prev = *carries.last().unwrap();
                let next = p.new_var();
                carries.push(next);
                p.add_xor_vars(&[next, coeffs[j], prev], false);
                p.add_or(&[Lit::neg(coeffs[j]), Lit::neg(prev)]);
            }
            let last = *carries.last().unwrap();
            if n == 2 {
                // The running sum itself is the total; force it to one.
                p.add_xor_vars(&[last], true);
            } else {
                p.add_xor_vars(&[last, coeffs[n - 1]], true);
            }
            carries
        }
    }
}

/// Ties a cell-value variable to one cycle's observations: `v` must equal
/// the observation bit its coefficient selects. Observations that read 0
/// cancel their coefficients, leaving `(~v | OR of c over one-bits)` plus a
/// binary clause per one-bit.
pub fn encode_observation_link(
    p: &mut CnfProblem,
    v: VarId,
    coeffs: &[VarId],
    obs: &ObservationVector,
) {
    let ones: Vec<usize> = obs
        .bits
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| b.then_some(j))
        .collect();
    if ones.is_empty() {
        p.add_or(&[Lit::neg(v)]);
        return;
    }
    let mut big = Vec::with_capacity(ones.len() + 1);
    big.push(Lit::neg(v));
    big.extend(ones.iter().map(|&j| Lit::pos(coeffs[j])));
    p.add_or(&big);
    for &j in &ones {
        p.add_or(&[Lit::pos(v), Lit::neg(coeffs[j])]);
    }
}

/// The virtual-variable constraint: `nu` equals the XOR of the share bits.
pub fn encode_share_combine(p: &mut CnfProblem, nu: VarId, shares: &[VarId]) {
    let mut vars = Vec::with_capacity(shares.len() + 1);
    vars.push(nu);
    vars.extend_from_slice(shares);
    p.add_xor_vars(&vars, false);
}

// Bit-level xtime: each output bit as the XOR set of input bit variables.
fn sym_xtime(x: &[VarId; 8]) -> [Vec<VarId>; 8] {
    let mut out: [Vec<VarId>; 8] = Default::default();
    for i in 0..8 {
        if i > 0 {
            out[i].push(x[i - 1]);
        }
        if (0x1b >> i) & 1 == 1 {
            out[i].push(x[7]);
        }
    }
    out
}

fn toggle(set: &mut BTreeSet<VarId>, v: VarId) {
    if !set.remove(&v) {
        set.insert(v);
    }
}

struct FunctionLinker<'a> {
    sym_vars: &'a BTreeMap<SymVar, [VarId; 8]>,
    plaintext: [u8; 16],
    known_plaintext: bool,
    sbox_apps: Vec<SboxApp>,
    xor_aux: Vec<XorAux>,
}

impl FunctionLinker<'_> {
    fn sym(&self, s: SymVar) -> &[VarId; 8] {
        self.sym_vars
            .get(&s)
            .unwrap_or_else(|| panic!("symbol variables missing for {s:?}"))
    }

    fn cell(&self, s: CellSymbol) -> &[VarId; 8] {
        self.sym(SymVar::Cell(s))
    }

    /// Emits one Sbox circuit instance and pins its outputs to `out` vars.
    fn sbox_link(&mut self, p: &mut CnfProblem, inputs: [Lit; 8], out: &[VarId; 8]) {
        let (out_lits, node_vars) = SboxCircuit::forward().instantiate(p, inputs);
        for (bit, lit) in out_lits.iter().enumerate() {
            p.add_xor_lits(&[*lit, Lit::pos(out[bit])], false);
        }
        self.sbox_apps.push(SboxApp { inputs, node_vars });
    }

    /// Fresh variables for the bitwise XOR of two symbol vectors.
    fn xor_input(&mut self, p: &mut CnfProblem, a: &[VarId; 8], b: &[VarId; 8]) -> [Lit; 8] {
        let mut lits = [Lit::pos(1); 8];
        for bit in 0..8 {
            let out = p.new_var();
            p.add_xor_vars(&[out, a[bit], b[bit]], false);
            self.xor_aux.push(XorAux {
                out,
                ins: [Lit::pos(a[bit]), Lit::pos(b[bit])],
            });
            lits[bit] = Lit::pos(out);
        }
        lits
    }

    fn emit(&mut self, p: &mut CnfProblem, rel: LinkRelation) {
        match rel {
            LinkRelation::SboxAdd { byte } => {
                let k = *self.cell(CellSymbol::K(byte));
                let inputs: [Lit; 8] = if self.known_plaintext {
                    let pt = self.plaintext[byte as usize];
                    std::array::from_fn(|bit| Lit::with_sign(k[bit], (pt >> bit) & 1 == 1))
                } else {
                    let plain = *self.sym(SymVar::Plain(byte));
                    self.xor_input(p, &k, &plain)
                };
                let s = *self.cell(CellSymbol::S(byte));
                self.sbox_link(p, inputs, &s);
            }
            LinkRelation::MixCol { col } => {
                let ins: Vec<[VarId; 8]> = (0..4)
                    .map(|i| *self.cell(CellSymbol::S(schedule::mixcol_input(col, i))))
                    .collect();
                // Coefficient rows of the MixColumns matrix.
                const COEF: [[u8; 4]; 4] =
                    [[2, 3, 1, 1], [1, 2, 3, 1], [1, 1, 2, 3], [3, 1, 1, 2]];
                for (row, coefs) in COEF.iter().enumerate() {
                    let out = *self.cell(CellSymbol::M(4 * col + row as u8));
                    for bit in 0..8 {
                        let mut terms = BTreeSet::new();
                        toggle(&mut terms, out[bit]);
                        for (input, &coef) in ins.iter().zip(coefs) {
                            let xt = sym_xtime(input);
                            if coef & 1 == 1 {
                                toggle(&mut terms, input[bit]);
                            }
                            if coef & 2 == 2 {
                                for &v in &xt[bit] {
                                    toggle(&mut terms, v);
                                }
                            }
                        }
                        let vars: Vec<VarId> = terms.into_iter().collect();
                        p.add_xor_vars(&vars, false);
                    }
                }
            }
            LinkRelation::KeySched { word } => {
                if word == 0 {
                    // SubWord on the rotated last word, then the XOR chain.
                    for j in 12..16u8 {
                        let k = *self.cell(CellSymbol::K(j));
                        let sw = *self.sym(SymVar::SubWord(j));
                        let inputs: [Lit; 8] = std::array::from_fn(|bit| Lit::pos(k[bit]));
                        self.sbox_link(p, inputs, &sw);
                    }
                    for i in 0..4u8 {
                        let k2 = *self.cell(CellSymbol::K2(i));
                        let k = *self.cell(CellSymbol::K(i));
                        let sw = *self.sym(SymVar::SubWord(12 + (i + 1) % 4));
                        for bit in 0..8 {
                            let rcon_bit = i == 0 && (cipher::RCON[1] >> bit) & 1 == 1;
                            p.add_xor_vars(&[k2[bit], k[bit], sw[bit]], rcon_bit);
                        }
                    }
                } else {
                    for i in 0..4u8 {
                        let out = *self.cell(CellSymbol::K2(4 * word + i));
                        let prev = *self.cell(CellSymbol::K2(4 * word - 4 + i));
                        let k = *self.cell(CellSymbol::K(4 * word + i));
                        for bit in 0..8 {
                            p.add_xor_vars(&[out[bit], prev[bit], k[bit]], false);
                        }
                    }
                }
            }
            LinkRelation::SboxRound2 { byte } => {
                let m = *self.cell(CellSymbol::M(byte));
                let k2 = *self.cell(CellSymbol::K2(byte));
                let inputs = self.xor_input(p, &m, &k2);
                let s2 = *self.cell(CellSymbol::S2(byte));
                self.sbox_link(p, inputs, &s2);
            }
        }
    }
}

/// Symbols that need variable vectors for a window: everything stored in
/// the window, every key byte (for decoding), and the auxiliary symbols the
/// emitted relations introduce.
fn symbol_scope(
    table: &ScheduleTable,
    inst: &AttackInstance,
    rels: &WindowRelations,
) -> BTreeSet<SymVar> {
    let mut scope: BTreeSet<SymVar> = table
        .window_symbols(inst.window_start, inst.window_len)
        .into_iter()
        .map(SymVar::Cell)
        .collect();
    for i in 0..16 {
        scope.insert(SymVar::Cell(CellSymbol::K(i)));
    }
    for rel in &rels.relations {
        match rel {
            LinkRelation::MixCol { col } => {
                for i in 0..4 {
                    scope.insert(SymVar::Cell(CellSymbol::M(4 * col + i)));
                }
            }
            LinkRelation::KeySched { word: 0 } => {
                for j in 12..16 {
                    scope.insert(SymVar::SubWord(j));
                }
            }
            LinkRelation::SboxAdd { byte } if !inst.known_plaintext => {
                scope.insert(SymVar::Plain(*byte));
            }
            _ => {}
        }
    }
    scope
}

/// Builds the full problem for an attack instance.
pub fn encode_instance(
    inst: &AttackInstance,
    table: &ScheduleTable,
    opts: &EncodeOptions,
) -> Result<(CnfProblem, DecodeMap), EncodeError> {
    let start = inst.window_start;
    let len = inst.window_len;
    if len == 0 || start < FIRST_FULL_CYCLE || start + len - 1 > CYCLE_COUNT {
        return Err(EncodeError::Window { start, len });
    }
    if inst.observations.len() != len {
        return Err(EncodeError::ObservationCount {
            expected: len,
            got: inst.observations.len(),
        });
    }
    let rows = table.row_count();
    let m = sim::data_bit_count(rows, inst.d);
    if inst.n < m {
        return Err(EncodeError::TooFewObservations { n: inst.n, m });
    }
    for (t, obs) in inst.observations.iter().enumerate() {
        if obs.cycle != start + t {
            return Err(EncodeError::ObservationCycle {
                got: obs.cycle,
                expected: start + t,
            });
        }
        if obs.bits.len() != inst.n {
            return Err(EncodeError::ObservationLength {
                cycle: obs.cycle,
                got: obs.bits.len(),
                expected: inst.n,
            });
        }
    }

    let mut p = CnfProblem::new();

    // Coefficients and their exactly-one constraints, shared by all cycles.
    let coeff: Vec<Vec<VarId>> = (0..m).map(|_| p.new_vars(inst.n)).collect();
    let carries: Vec<Vec<VarId>> = coeff
        .iter()
        .map(|c| encode_onehot(&mut p, c, opts.onehot))
        .collect();

    // Per-cycle cell values linked to the observations.
    let mut cell_values = Vec::with_capacity(len);
    for obs in &inst.observations {
        let vs = p.new_vars(m);
        for (i, &v) in vs.iter().enumerate() {
            encode_observation_link(&mut p, v, &coeff[i], obs);
        }
        cell_values.push(vs);
    }

    // Symbol variables.
    let rels = schedule::relations_for_window(table, start, len)?;
    let scope = symbol_scope(table, inst, &rels);
    let mut sym_vars = BTreeMap::new();
    for sym in scope {
        let vars: [VarId; 8] = std::array::from_fn(|_| p.new_var());
        sym_vars.insert(sym, vars);
    }

    // Virtual variables: each cell's shares XOR to its symbol's bits.
    let d1 = inst.d + 1;
    for (t, vs) in cell_values.iter().enumerate() {
        let cycle = start + t;
        for row in 0..rows {
            let sym = table.cell(row, cycle);
            let nu = sym_vars[&SymVar::Cell(sym)];
            for bit_offset in 0..8 {
                let bit = 7 - bit_offset; // canonical order runs msb first
                let shares: Vec<VarId> = (0..d1)
                    .map(|s| vs[sim::logical_bit_index(inst.d, row, s, bit_offset)])
                    .collect();
                encode_share_combine(&mut p, nu[bit], &shares);
            }
        }
    }

    // Function links across symbols.
    let mut linker = FunctionLinker {
        sym_vars: &sym_vars,
        plaintext: inst.plaintext,
        known_plaintext: inst.known_plaintext,
        sbox_apps: Vec::new(),
        xor_aux: Vec::new(),
    };
    for rel in &rels.relations {
        linker.emit(&mut p, *rel);
    }
    let FunctionLinker {
        sbox_apps, xor_aux, ..
    } = linker;

    let key_bits = std::array::from_fn(|i| sym_vars[&SymVar::Cell(CellSymbol::K(i as u8))]);
    let dm = DecodeMap {
        rows,
        d: inst.d,
        n: inst.n,
        m,
        window_start: start,
        window_len: len,
        coeff,
        carries,
        cell_values,
        sym_vars,
        xor_aux,
        sbox_apps,
        key_bits,
        onehot: opts.onehot,
    };
    Ok((p, dm))
}

/// Reads the key out of a model: each key byte from its symbol bits, which
/// equal the XOR of the d+1 share variables wherever the byte is stored.
pub fn decode_key(a: &Assignment, dm: &DecodeMap) -> [u8; 16] {
    let mut key = [0u8; 16];
    for (i, bits) in dm.key_bits.iter().enumerate() {
        for (bit, &v) in bits.iter().enumerate() {
            key[i] |= u8::from(a.value(v)) << bit;
        }
    }
    key
}

/// A clause forbidding a specific key's bit values (not any share split).
pub fn key_block_clause(key: &[u8; 16], dm: &DecodeMap) -> Vec<Lit> {
    let mut clause = Vec::with_capacity(128);
    for (i, bits) in dm.key_bits.iter().enumerate() {
        for (bit, &v) in bits.iter().enumerate() {
            clause.push(Lit::with_sign(v, (key[i] >> bit) & 1 == 1));
        }
    }
    clause
}

/// A clause forbidding the model's full share-level assignment: every
/// per-cycle cell-value variable pinned to its current value.
pub fn share_block_clause(a: &Assignment, dm: &DecodeMap) -> Vec<Lit> {
    dm.share_value_vars()
        .map(|v| Lit::with_sign(v, a.value(v)))
        .collect()
}

/// The assignment induced by the true placement, shares and key. Satisfies
/// every emitted clause; checked directly (without a solver) by the test
/// suites as the encoder's master correctness property.
pub fn ground_truth_assignment(
    dm: &DecodeMap,
    inst: &AttackInstance,
    sim_files: &[RegisterFile],
    pm: &PlacementMap,
    key: &[u8; 16],
    var_count: u32,
) -> Assignment {
    assert_eq!(sim_files.len(), dm.window_len, "one register file per cycle");
    let mut a = Assignment::new(var_count);

    // Coefficients: c^i_j = 1 iff the placement maps cell i to observation j.
    for (i, row) in dm.coeff.iter().enumerate() {
        let phys = pm.apply(i);
        for (j, &v) in row.iter().enumerate() {
            a.set(v, j == phys);
        }
    }
    // Carry chains are the running XOR prefix of the coefficients.
    if dm.onehot == OnehotMode::SequentialAdder {
        for (i, chain) in dm.carries.iter().enumerate() {
            let phys = pm.apply(i);
            for (k, &t) in chain.iter().enumerate() {
                // t_{k+2} = c_0 ^ ... ^ c_{k+1}; exactly-one makes this a
                // threshold on the hot position.
                a.set(t, phys <= k + 1);
            }
        }
    }
    // Cell values straight from the simulation.
    for (t, vs) in dm.cell_values.iter().enumerate() {
        let bits = sim_files[t].flat_bits();
        for (i, &v) in vs.iter().enumerate() {
            a.set(v, bits[i]);
        }
    }
    // Symbol bits from the ground-truth cipher values.
    for (sym, vars) in &dm.sym_vars {
        let value = match sym {
            SymVar::Cell(CellSymbol::Empty) => unreachable!("empty cells never get symbols"),
            SymVar::Cell(c) => sim::ground_truth_value(*c, key, &inst.plaintext)
                .expect("symbol in scope has a value"),
            SymVar::SubWord(j) => cipher::sbox(crate::cipher::GfByte(key[*j as usize])),
            SymVar::Plain(j) => crate::cipher::GfByte(inst.plaintext[*j as usize]),
        };
        for (bit, &v) in vars.iter().enumerate() {
            a.set(v, value.bit(bit));
        }
    }
    // Function-link auxiliaries, in emission order.
    for aux in &dm.xor_aux {
        let val = aux.ins[0].eval(&a) ^ aux.ins[1].eval(&a);
        a.set(aux.out, val);
    }
    for app in &dm.sbox_apps {
        let input_values: [bool; 8] = std::array::from_fn(|bit| app.inputs[bit].eval(&a));
        for (v, val) in app
            .node_vars
            .iter()
            .zip(SboxCircuit::forward().eval_nodes(input_values))
        {
            a.set(*v, val);
        }
    }
    a
}
