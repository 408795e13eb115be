//! State-vector simulation of single-qubit teleportation over three-qubit
//! GHZ and W channels, including the W-channel POVM scheme.

pub mod bench;
pub mod error;
pub mod measurement;
pub mod protocols;
pub mod qmath;
pub mod states;
pub mod wpovm;

pub use error::{Error, Result};
pub use protocols::{PreparedProtocol, Protocol, ProtocolOutcome};
pub use qmath::{Complex, DensityMatrix, Operator, StateVector};
pub use states::BlochAngles;
pub use wpovm::WPovmParams;
