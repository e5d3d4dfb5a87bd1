//! SAT-based key recovery from unordered snapshots: problem construction,
//! serialization, and solver interfaces.

mod dimacs;
mod encode;
mod problem;
mod sbox_cnf;
mod solver;

pub use dimacs::{parse_solver_output, write_dimacs, SolverOutput};
pub use encode::{
    decode_key, encode_instance, encode_observation_link, encode_onehot, encode_share_combine,
    ground_truth_assignment, key_block_clause, share_block_clause, AttackInstance, DecodeMap,
    EncodeError, EncodeOptions, OnehotMode,
};
pub use problem::{Assignment, CnfProblem, Lit, ProblemStats, VarId, XorClause};
pub use sbox_cnf::{byte_bits_lsb, SboxCircuit};
pub use solver::{
    default_backend, EmbeddedBackend, ExternalBackend, SatBackend, SatError, SolveOutcome,
    SOLVER_ENV,
};
