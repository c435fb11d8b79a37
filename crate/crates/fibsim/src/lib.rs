//! Exact simulation of Fibonacci-anyon quantum computation.
//!
//! The crate models chains of Fibonacci anyons in the fusion-path basis and
//! provides the full toolkit needed to braid them, measure collective
//! charges, fuse and create pairs, encode qubits in 4-anyon blocks, and run
//! the measurement-assisted protocol stack that realizes the entangling
//! controlled rotation `CR(2π/5) = Diag(1, 1, 1, e^{2πi/5})` on two encoded
//! qubits — exactly, without leaving the code space, for every random
//! measurement history.
//!
//! Module map:
//!
//! - [`fusion_basis`]: path bases, dimensions, sparse state vectors.
//! - [`operators`]: braid generators, charge projectors and measurements,
//!   pair creation/fusion, forced measurement, sparse linear maps.
//! - [`skein_dsl`]: a tiny planar-diagram language evaluated through the
//!   skein relations; serves as an independent oracle for `operators`.
//! - [`qubit_codec`]: encoding/decoding of logical qubits, leakage,
//!   projective gate extraction.
//! - [`protocols`]: ancilla preparation, fusion with recovery, the random
//!   entangling-gate lottery, the ten-state random walk, and the end-to-end
//!   controlled rotation, with full event traces.
//! - [`verify`]: the runnable acceptance checks behind `fibsim verify`.
//! - [`cli`]: the command-line interface.

pub mod cli;
pub mod fusion_basis;
pub mod operators;
pub mod protocols;
pub mod qubit_codec;
pub mod skein_dsl;
pub mod verify;

pub use fusion_basis::{dim, enumerate_basis, AnyonState, BasisError, Charge, FusionPath};
pub use operators::{
    apply_braid, braid_generator, create_pair, force_fuse_vacuum, fuse_adjacent, measure_charge,
    phi, project_charge, BraidWord, ForcedMode, LinearOp, OpError, Orientation, RandomSource,
};
pub use qubit_codec::{decode, encode, extract_gate, CodecError, ProjectiveGate, QubitRegister};
