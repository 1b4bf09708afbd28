//! Minimal quantum-optics engine: pure polarization-qubit states,
//! weak-coherent-pulse photon statistics, and behavioral optics models.

pub mod optics;
pub mod pulse;
pub mod state;

pub use optics::{bs_route, detect, BsModel, DetectorMode, DetectorModel, IncidentLight, Port};
pub use pulse::{sample_photon_number, thin_photons, DecoyClass, OpticalPulse, PulsePayload};
pub use state::{ghz_state, wrap_angle, FlipOp, MeasBasis, Outcome, PureState, NORM_TOL};
