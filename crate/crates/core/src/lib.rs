//! Multi-stage watermarking for quantum circuits.
//!
//! The pipeline embeds an owner signature in three independent places while
//! compiling a circuit for a NISQ device:
//!
//! 1. **Decomposition** ([`synth`]): per partition block, the leading decimal
//!    digit of the Hilbert-Schmidt distance `Δ_i` is steered to odd (`a`) or
//!    even (`b`).
//! 2. **Mapping** ([`mapper`]): connected placements are ranked by infidelity
//!    and addressed by binary-tree codes over `{c, d}`.
//! 3. **Scheduling** ([`route`]): each `e` symbol is an X pair wrapped around
//!    a SWAP that lies off every critical path.
//!
//! [`verify`] replays the owner's pipeline to check a suspect circuit and
//! [`metrics`] scores the result with the probabilistic proof of authorship.

pub mod benchmarks;
pub mod circuit;
pub mod device;
pub mod linalg;
pub mod mapper;
pub mod metrics;
pub mod noise;
pub mod partition;
pub mod pipeline;
pub mod route;
pub mod signature;
pub mod synth;
pub mod verify;

pub use circuit::{emit_qasm, parse_qasm, Circuit, CircuitDag, CountKind, Gate, GateKind, GateTag};
pub use device::DeviceModel;
pub use linalg::{circuit_unitary, hs_distance, UnitaryMatrix};
pub use metrics::{ppa, WatermarkReport};
pub use pipeline::{Pipeline, PipelineConfig};
pub use signature::{SignatureMessage, Stage1Symbol};
pub use synth::SynthesisConfig;
pub use verify::{verify, Secret, SecretBundle, Verdict, VerificationOutcome};

