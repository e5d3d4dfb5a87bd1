//! End-to-end attack orchestration: the direct read-out with known register
//! locations, the SAT route for unknown locations, and the benchmark sweep
//! over masking orders and window sizes.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher;
use crate::masking::sub_seed;
use crate::sat::{
    decode_key, encode_instance, key_block_clause, AttackInstance, CnfProblem, DecodeMap,
    EncodeError, EncodeOptions, SatBackend, SatError, SolveOutcome,
};
use crate::schedule::{self, ScheduleTable};
use crate::sim::{self, RegisterFile, ReshareMode, TraceConfig};
use crate::snapshot::{self, ObservationVector, PlacementMap, SnapshotError};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Schedule(#[from] schedule::ScheduleError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("the problem is unsatisfiable; observations and architecture model disagree")]
    UnexpectedUnsat,
    #[error("key locations cover only {got} of the {expected} key register bits")]
    IncompleteLocations { got: usize, expected: usize },
}

/// Full AES-128 encryption check of a candidate key against one known
/// plaintext/ciphertext pair.
pub fn verify_key(key: &[u8; 16], plaintext: &[u8; 16], ciphertext: &[u8; 16]) -> bool {
    cipher::encrypt_block(key, plaintext) == *ciphertext
}

/// Undoes the first round: given the SubBytes outputs of round 1 and the
/// plaintext, every key byte falls out directly.
pub fn recover_key_from_round1_state(s: &[u8; 16], plaintext: &[u8; 16]) -> [u8; 16] {
    let mut key = [0u8; 16];
    for i in 0..16 {
        key[i] = cipher::inv_sbox(cipher::GfByte(s[i])).0 ^ plaintext[i];
    }
    key
}

// ---------------------------------------------------------------------------
// Scenario 1: known register locations
// ---------------------------------------------------------------------------

/// Observation indices of every key-register bit at the full-register cycle:
/// `bits[byte][share][bit_offset]` (offset from the msb), extracted from the
/// placement ground truth the way a reverse-engineered layout would provide
/// it.
#[derive(Clone, Debug)]
pub struct KeyLocations {
    pub d: usize,
    bits: Vec<Vec<[usize; 8]>>,
}

impl KeyLocations {
    /// Restricts a placement to the key-register bits. The key registers are
    /// the second half of the full 32-row schedule; at cycle 16 key byte `i`
    /// sits in row 16 + i.
    pub fn from_placement(pm: &PlacementMap, d: usize) -> Result<Self, AttackError> {
        let needed = sim::logical_bit_index(d, schedule::TOTAL_ROWS - 1, d, 7) + 1;
        if pm.len() < needed {
            return Err(AttackError::IncompleteLocations {
                got: pm.len(),
                expected: needed,
            });
        }
        let mut bits = Vec::with_capacity(16);
        for byte in 0..16 {
            let row = schedule::STATE_ROWS + byte;
            let mut shares = Vec::with_capacity(d + 1);
            for share in 0..=d {
                let mut obs = [0usize; 8];
                for (bit_offset, slot) in obs.iter_mut().enumerate() {
                    *slot = pm.apply(sim::logical_bit_index(d, row, share, bit_offset));
                }
                shares.push(obs);
            }
            bits.push(shares);
        }
        Ok(Self { d, bits })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario1Result {
    /// One candidate when cell labels are known; two when only the 0/1
    /// grouping is known (the complement reading). With an even share count
    /// the complements cancel and the candidates coincide.
    pub candidates: Vec<[u8; 16]>,
    /// Register bits read: exactly 128 * (d+1).
    pub bits_read: usize,
    /// Index of the candidate that passed verification, if a pair was given.
    pub verified: Option<usize>,
}

/// Reads the key share bits straight out of one snapshot of the cycle where
/// all key registers are filled, and XORs the shares per byte.
pub fn scenario1_direct(
    obs: &ObservationVector,
    locations: &KeyLocations,
    labels_known: bool,
    check: Option<(&[u8; 16], &[u8; 16])>,
) -> Result<Scenario1Result, AttackError> {
    let d = locations.d;
    let mut key = [0u8; 16];
    for (byte, shares) in locations.bits.iter().enumerate() {
        let mut acc = 0u8;
        for share_map in shares {
            let mut share = 0u8;
            for (bit_offset, &obs_idx) in share_map.iter().enumerate() {
                let bit = *obs
                    .bits
                    .get(obs_idx)
                    .ok_or(AttackError::IncompleteLocations {
                        got: obs.bits.len(),
                        expected: obs_idx + 1,
                    })?;
                if bit {
                    share |= 1 << (7 - bit_offset);
                }
            }
            acc ^= share;
        }
        key[byte] = acc;
    }

    let mut candidates = vec![key];
    if !labels_known && (d + 1) % 2 == 1 {
        // Complement reading: every extracted bit inverted. With an odd
        // share count one complement survives the XOR per byte.
        candidates.push(key.map(|b| b ^ 0xff));
    }
    let verified =
        check.and_then(|(pt, ct)| candidates.iter().position(|k| verify_key(k, pt, ct)));
    Ok(Scenario1Result {
        candidates,
        bits_read: 128 * (d + 1),
        verified,
    })
}

// ---------------------------------------------------------------------------
// Scenario 2: unknown register locations, SAT
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    #[default]
    Recovered,
    Ambiguous,
    Timeout,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Outcome::Recovered => "RECOVERED",
            Outcome::Ambiguous => "AMBIGUOUS",
            Outcome::Timeout => "TIMEOUT",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackResult {
    pub outcome: Outcome,
    /// The unique key for RECOVERED; the distinct keys found for AMBIGUOUS.
    pub keys: Vec<[u8; 16]>,
    pub stats: AttackStats,
}

#[derive(Copy, Clone, Debug, Default, Serialize, Deserialize)]
pub struct AttackStats {
    pub n_vars: usize,
    pub n_or: usize,
    pub n_xor: usize,
    pub encode_ms: u64,
    pub solve_ms: u64,
}

#[derive(Clone, Debug)]
pub struct Scenario2Config {
    pub window_start: usize,
    pub d: usize,
    pub plaintext: [u8; 16],
    pub known_plaintext: bool,
    pub budget: Option<Duration>,
    /// Re-solve with the decoded key blocked to establish uniqueness.
    pub check_unique: bool,
    pub options: EncodeOptions,
}

impl Scenario2Config {
    pub fn new(window_start: usize, d: usize, plaintext: [u8; 16]) -> Self {
        Self {
            window_start,
            d,
            plaintext,
            known_plaintext: true,
            budget: None,
            check_unique: true,
            options: EncodeOptions::default(),
        }
    }
}

pub enum UniqueCheck {
    Unique,
    Alternate([u8; 16]),
    Timeout,
}

/// Blocks the decoded key's bit values and re-solves. UNSAT means the key is
/// unique even though share-level solutions abound.
pub fn check_key_unique(
    problem: &mut CnfProblem,
    dm: &DecodeMap,
    first_key: &[u8; 16],
    backend: &dyn SatBackend,
    budget: Option<Duration>,
) -> Result<UniqueCheck, AttackError> {
    problem.add_or(&key_block_clause(first_key, dm));
    let res = backend.solve(problem, budget);
    problem.or_clauses.pop();
    match res? {
        SolveOutcome::Unsat => Ok(UniqueCheck::Unique),
        SolveOutcome::Sat(a) => Ok(UniqueCheck::Alternate(decode_key(&a, dm))),
        SolveOutcome::Timeout => Ok(UniqueCheck::Timeout),
    }
}

/// The full unknown-locations attack: encode, solve, decode, and confirm
/// uniqueness. RECOVERED is only reported when the blocked re-solve comes
/// back UNSAT.
pub fn scenario2_sat(
    snapshots: &[ObservationVector],
    table: &ScheduleTable,
    cfg: &Scenario2Config,
    backend: &dyn SatBackend,
) -> Result<AttackResult, AttackError> {
    let mut inst = AttackInstance::new(
        snapshots.to_vec(),
        cfg.window_start,
        cfg.d,
        cfg.plaintext,
    );
    inst.known_plaintext = cfg.known_plaintext;

    let t0 = Instant::now();
    let (mut problem, dm) = encode_instance(&inst, table, &cfg.options)?;
    let encode_ms = t0.elapsed().as_millis() as u64;
    let s = problem.stats();
    let mut stats = AttackStats {
        n_vars: s.n_vars,
        n_or: s.n_or,
        n_xor: s.n_xor,
        encode_ms,
        solve_ms: 0,
    };

    let t1 = Instant::now();
    let first = backend.solve(&problem, cfg.budget)?;
    stats.solve_ms = t1.elapsed().as_millis() as u64;
    let assignment = match first {
        SolveOutcome::Timeout => {
            return Ok(AttackResult {
                outcome: Outcome::Timeout,
                keys: Vec::new(),
                stats,
            })
        }
        SolveOutcome::Unsat => return Err(AttackError::UnexpectedUnsat),
        SolveOutcome::Sat(a) => a,
    };
    let key = decode_key(&assignment, &dm);
    if !cfg.check_unique {
        return Ok(AttackResult {
            outcome: Outcome::Recovered,
            keys: vec![key],
            stats,
        });
    }
    let t2 = Instant::now();
    let unique = check_key_unique(&mut problem, &dm, &key, backend, cfg.budget)?;
    stats.solve_ms += t2.elapsed().as_millis() as u64;
    Ok(match unique {
        UniqueCheck::Unique => AttackResult {
            outcome: Outcome::Recovered,
            keys: vec![key],
            stats,
        },
        UniqueCheck::Alternate(other) => AttackResult {
            outcome: Outcome::Ambiguous,
            keys: vec![key, other],
            stats,
        },
        UniqueCheck::Timeout => AttackResult {
            outcome: Outcome::Timeout,
            keys: vec![key],
            stats,
        },
    })
}

// ---------------------------------------------------------------------------
// Planted instances and the reduced schedule
// ---------------------------------------------------------------------------

/// Row subset for desk-scale SAT experiments. The default keeps one AES
/// column of the state (rows 0..4) and the first key word (rows 16..20),
/// whose cells cycle through every key byte across the 36 cycles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedScheduleSpec {
    pub rows: Vec<usize>,
}

impl Default for ReducedScheduleSpec {
    fn default() -> Self {
        Self {
            rows: vec![0, 1, 2, 3, 16, 17, 18, 19],
        }
    }
}

impl ReducedScheduleSpec {
    pub fn table(&self) -> Result<ScheduleTable, AttackError> {
        Ok(schedule::load_schedule().reduced(&self.rows)?)
    }
}

/// A synthetic attack instance with known ground truth: random (or given)
/// key and plaintext, simulated registers, one hidden placement, snapshots
/// over a window.
#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub key: [u8; 16],
    pub plaintext: [u8; 16],
    pub snapshots: Vec<ObservationVector>,
    pub placement: PlacementMap,
    pub files: Vec<RegisterFile>,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct PlantConfig {
    pub seed: u64,
    pub d: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub key: Option<[u8; 16]>,
    pub plaintext: Option<[u8; 16]>,
    pub reshare_mode: ReshareMode,
    pub fsm_bits: Option<usize>,
    pub flip_prob: f64,
}

impl PlantConfig {
    pub fn new(seed: u64, d: usize, window_start: usize, window_len: usize) -> Self {
        Self {
            seed,
            d,
            window_start,
            window_len,
            key: None,
            plaintext: None,
            reshare_mode: ReshareMode::default(),
            fsm_bits: None,
            flip_prob: 0.0,
        }
    }
}

pub fn plant_instance(
    cfg: &PlantConfig,
    table: &ScheduleTable,
) -> Result<PlantedInstance, AttackError> {
    use rand::Rng;
    let mut rng = crate::masking::rng_from_seed(sub_seed(cfg.seed, &[0]));
    let key = cfg.key.unwrap_or_else(|| rng.gen());
    let plaintext = cfg.plaintext.unwrap_or_else(|| rng.gen());

    let mut trace = TraceConfig::new(key, plaintext, cfg.d, sub_seed(cfg.seed, &[1]));
    trace.reshare_mode = cfg.reshare_mode;
    trace.fsm_bits = cfg.fsm_bits;
    let last = cfg.window_start + cfg.window_len - 1;
    let files = sim::simulate(&trace, table, cfg.window_start, last)?;

    let n = files[0].total_bits();
    let mut place_rng = crate::masking::rng_from_seed(sub_seed(cfg.seed, &[2]));
    let placement = PlacementMap::random(n, &mut place_rng);
    let mut corrupt_rng = crate::masking::rng_from_seed(sub_seed(cfg.seed, &[3]));
    let mut snapshots = Vec::with_capacity(files.len());
    for rf in &files {
        let mut obs = snapshot::place(rf, &placement)?;
        if cfg.flip_prob > 0.0 {
            obs = snapshot::corrupt(&obs, cfg.flip_prob, &mut corrupt_rng)?;
        }
        snapshots.push(obs);
    }
    Ok(PlantedInstance {
        key,
        plaintext,
        snapshots,
        placement,
        files,
        n,
    })
}

// ---------------------------------------------------------------------------
// Benchmark sweep
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub cycles: usize,
    pub trial: usize,
    pub outcome: Outcome,
    pub encode_ms: u64,
    pub solve_ms: u64,
    pub n_vars: usize,
    pub n_clauses: usize,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub seed: u64,
    pub d_list: Vec<usize>,
    pub cycle_counts: Vec<usize>,
    pub trials: usize,
    pub reduced: Option<ReducedScheduleSpec>,
    pub budget: Option<Duration>,
    /// Report zeroed timings so two runs with the same seed produce
    /// byte-identical CSV (wall-clock times are inherently unstable).
    pub zero_times: bool,
    pub jobs: Option<usize>,
}

impl BenchConfig {
    pub fn new(seed: u64, d_list: Vec<usize>, cycle_counts: Vec<usize>, trials: usize) -> Self {
        Self {
            seed,
            d_list,
            cycle_counts,
            trials,
            reduced: Some(ReducedScheduleSpec::default()),
            budget: None,
            zero_times: false,
            jobs: None,
        }
    }
}

/// Runs the full (d, window, trial) grid. Every trial draws a fresh key,
/// plaintext, masks and placement from its own sub-seed; results come back
/// in deterministic (d, cycles, trial) order regardless of the worker pool.
/// Every RECOVERED key is verified against an encryption of the planted
/// plaintext before it is reported.
pub fn bench_table(
    cfg: &BenchConfig,
    backend: &dyn SatBackend,
) -> Result<Vec<BenchRow>, AttackError> {
    let table = match &cfg.reduced {
        Some(spec) => spec.table()?,
        None => schedule::load_schedule(),
    };
    let mut grid = Vec::new();
    for &d in &cfg.d_list {
        for &cycles in &cfg.cycle_counts {
            for trial in 0..cfg.trials {
                grid.push((d, cycles, trial));
            }
        }
    }
    let run_one = |&(d, cycles, trial): &(usize, usize, usize)| -> Result<BenchRow, AttackError> {
        let seed = sub_seed(cfg.seed, &[d as u64, cycles as u64, trial as u64]);
        let plant = plant_instance(
            &PlantConfig::new(seed, d, schedule::FIRST_FULL_CYCLE, cycles),
            &table,
        )?;
        let mut scfg = Scenario2Config::new(schedule::FIRST_FULL_CYCLE, d, plant.plaintext);
        scfg.budget = cfg.budget;
        let result = scenario2_sat(&plant.snapshots, &table, &scfg, backend)?;
        if result.outcome == Outcome::Recovered {
            let ct = cipher::encrypt_block(&plant.key, &plant.plaintext);
            assert!(
                verify_key(&result.keys[0], &plant.plaintext, &ct),
                "recovered key failed verification (d={d} cycles={cycles} trial={trial})"
            );
        }
        Ok(BenchRow {
            d,
            cycles,
            trial,
            outcome: result.outcome,
            encode_ms: if cfg.zero_times { 0 } else { result.stats.encode_ms },
            solve_ms: if cfg.zero_times { 0 } else { result.stats.solve_ms },
            n_vars: result.stats.n_vars,
            n_clauses: result.stats.n_or + result.stats.n_xor,
        })
    };

    let results: Vec<Result<BenchRow, AttackError>> = match cfg.jobs {
        Some(1) => grid.iter().map(run_one).collect(),
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .expect("worker pool");
            pool.install(|| grid.par_iter().map(run_one).collect())
        }
        None => grid.par_iter().map(run_one).collect(),
    };
    results.into_iter().collect()
}

/// Bench CSV: `d,cycles,trial,outcome,encode_ms,solve_ms,n_vars,n_clauses`.
pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "d,cycles,trial,outcome,encode_ms,solve_ms,n_vars,n_clauses")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.d, r.cycles, r.trial, r.outcome, r.encode_ms, r.solve_ms, r.n_vars, r.n_clauses
        )?;
    }
    Ok(())
}

/// Per-(d, cycles) means and outcome counts.
pub fn bench_summary(rows: &[BenchRow]) -> serde_json::Value {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(usize, usize), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        cells.entry((r.d, r.cycles)).or_default().push(r);
    }
    let summary: Vec<serde_json::Value> = cells
        .into_iter()
        .map(|((d, cycles), rs)| {
            let trials = rs.len() as u64;
            let mean = |f: &dyn Fn(&BenchRow) -> u64| -> f64 {
                rs.iter().map(|r| f(r)).sum::<u64>() as f64 / trials as f64
            };
            let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
            serde_json::json!({
                "d": d,
                "cycles": cycles,
                "trials": trials,
                "recovered": count(Outcome::Recovered),
                "ambiguous": count(Outcome::Ambiguous),
                "timeout": count(Outcome::Timeout),
                "mean_encode_ms": mean(&|r| r.encode_ms),
                "mean_solve_ms": mean(&|r| r.solve_ms),
                "n_vars": rs[0].n_vars,
                "n_clauses": rs[0].n_clauses,
            })
        })
        .collect();
    serde_json::Value::Array(summary)
}
