//! Faked-state pulses against blinded detectors.
//!
//! A faked pulse is tailored so the detector behind the basis Eve used
//! receives the full pulse energy, while a measurement in the conjugate
//! basis splits the energy in half per detector. With the click threshold
//! between half and full energy, a click fires exactly when the receiver's
//! basis matches Eve's, and the clicking detector reports Eve's outcome.

use rand::Rng;

use crate::photonic::{detect, DetectorModel, IncidentLight, Outcome};

/// An energy-tailored resend pulse carrying Eve's measurement result.
#[derive(Debug, Clone, Copy)]
pub struct FakedState {
    /// Eve's basis, encoded as the protocol's basis index.
    pub basis: u8,
    pub outcome: Outcome,
    pub energy_j: f64,
}

/// Deliver a faked pulse into one measurement arm. `basis_matches` says
/// whether the arm measures in Eve's basis. Returns the outcome registered
/// by the arm, if any detector clicked.
pub fn faked_arm_click<R: Rng + ?Sized>(
    faked: &FakedState,
    basis_matches: bool,
    detector: &mut DetectorModel,
    rng: &mut R,
) -> Option<Outcome> {
    if basis_matches {
        // Full energy lands on the detector for Eve's outcome; the
        // orthogonal detector sees nothing.
        let hit = detect(
            detector,
            &IncidentLight::pulse_energy(faked.energy_j),
            rng,
        );
        hit.then_some(faked.outcome)
    } else {
        // Conjugate basis: the pulse splits evenly between both detectors.
        let half = IncidentLight::pulse_energy(faked.energy_j / 2.0);
        let d1 = detect(detector, &half, rng);
        let d2 = detect(detector, &half, rng);
        match (d1, d2) {
            (false, false) => None,
            (true, false) => Some(Outcome::Plus),
            (false, true) => Some(Outcome::Minus),
            // Unreachable while e_click > energy/2; resolve deterministically.
            (true, true) => Some(Outcome::Plus),
        }
    }
}
