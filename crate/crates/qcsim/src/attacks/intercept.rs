//! Intercept-resend: Eve measures each flying qubit and resends the measured
//! eigenstate.

use rand::Rng;

use crate::photonic::{MeasBasis, Outcome, PureState};

/// Measure `state` in a strategy-chosen basis and return (basis, outcome,
/// resent eigenstate). With `oracle_basis` set, Eve is granted the sender's
/// basis, which removes all disturbance; otherwise she picks uniformly
/// between the two given bases.
pub fn intercept_resend<R: Rng + ?Sized>(
    state: &PureState,
    bases: (MeasBasis, MeasBasis),
    oracle_basis: Option<MeasBasis>,
    rng: &mut R,
) -> (MeasBasis, Outcome, PureState) {
    let basis = match oracle_basis {
        Some(b) => b,
        None => {
            if rng.random::<bool>() {
                bases.0
            } else {
                bases.1
            }
        }
    };
    let (outcome, _) = state.measure(0, basis, rng);
    let resent = eigenstate(basis, outcome);
    (basis, outcome, resent)
}

/// The eigenstate a measurement outcome projects onto.
pub fn eigenstate(basis: MeasBasis, outcome: Outcome) -> PureState {
    let (plus, minus) = basis.vectors();
    match outcome {
        Outcome::Plus => plus,
        Outcome::Minus => minus,
    }
}
