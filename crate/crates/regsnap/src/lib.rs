//! regsnap: a register-snapshot attack toolkit for a serialized,
//! Boolean-masked AES-128 hardware design.
//!
//! The toolkit simulates the design's register file cycle by cycle
//! ([`sim`]), hides the bits behind a placement permutation the way a
//! physical snapshot would ([`snapshot`]), optionally renders and re-extracts
//! them as synthetic logic-state images ([`image`]), and recovers the key
//! either by reading known register locations directly or by compiling the
//! snapshots into a CNF+XOR satisfiability problem ([`sat`], [`attack`]).
//!
//! Start with the runnable examples in `examples/`; the `regsnap` binary
//! exposes the same flows as batch subcommands.

pub mod attack;
pub mod cipher;
pub mod image;
pub mod masking;
pub mod sat;
pub mod schedule;
pub mod sim;
pub mod snapshot;

pub use cipher::GfByte;
pub use masking::{reshare, share, unshare, MaskedByte, ShareConfig};
pub use schedule::{load_schedule, CellSymbol, LinkRelation, ScheduleTable};
pub use sim::{ground_truth_value, simulate, RegisterFile, TraceConfig};
pub use snapshot::{corrupt, place, ObservationVector, PlacementMap};
