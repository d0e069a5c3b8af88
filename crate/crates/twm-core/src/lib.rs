//! Simulation and constrained-search toolkit for the two-time weak
//! measurement (TWM) protocol on open quantum batteries.
//!
//! A charged battery left in contact with a thermal reservoir discharges
//! irreversibly. The protocol implemented here brackets the dissipation
//! window with a selective weak measurement and its reversal, tuned so that
//! the pair injects no net energy or ergotropy, and quantifies how much
//! extractable work that saves relative to free decay:
//!
//! * [`qubit`] / [`operator`] — battery states, reservoir parameters, dense
//!   operators and the coupled-cell Hamiltonian;
//! * [`dynamics`] — closed-form single-qubit thermalization;
//! * [`measure`] — weak/reversal measurements and post-selection
//!   probabilities;
//! * [`ergotropy`] — total, incoherent, and coherent extractable work;
//! * [`shifts`] — measurement-induced energy/ergotropy balance, the
//!   null-shift reversal strength, and operational-point searches;
//! * [`protocol`] — single-qubit runs, stepwise series, and gains;
//! * [`collective`] / [`xstate`] — N-cell batteries under collective
//!   dissipation, the correlated X-state family, and concurrence.

pub mod collective;
pub mod dynamics;
pub mod ergotropy;
pub mod error;
pub mod measure;
pub mod ode;
pub mod operator;
pub mod protocol;
pub mod qubit;
pub mod shifts;
pub mod xstate;

pub use collective::CollectiveModel;
pub use ergotropy::ErgotropyBreakdown;
pub use error::{Error, Result};
pub use operator::{DensityMatrix, HamiltonianSpec};
pub use protocol::{ProtocolOutcome, StepStates};
pub use qubit::{BathParams, ProtocolParams, QubitState};
pub use shifts::{OperationalPoint, ShiftReport, WTilde};
pub use xstate::XState;
