//! Shared BB84-state plumbing used by the prepare-and-measure protocols.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{DetectorConfig, ScenarioConfig, SourceConfig};
use crate::harness::RandomStream;
use crate::photonic::{
    DecoyClass, DetectorModel, FlipOp, MeasBasis, OpticalPulse, Outcome, PureState,
};

/// The two BB84 preparation/measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Bb84Basis {
    Z,
    X,
}

impl Bb84Basis {
    pub fn meas(self) -> MeasBasis {
        match self {
            Bb84Basis::Z => MeasBasis::Z,
            Bb84Basis::X => MeasBasis::X,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Bb84Basis::Z => Bb84Basis::X,
            Bb84Basis::X => Bb84Basis::Z,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            Bb84Basis::Z
        } else {
            Bb84Basis::X
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Bb84Basis::Z => 0,
            Bb84Basis::X => 1,
        }
    }
}

/// One of the four BB84 polarization states |H>, |V>, |+>, |->.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub struct Bb84Symbol {
    pub basis: Bb84Basis,
    pub bit: u8,
}

impl Bb84Symbol {
    pub fn new(basis: Bb84Basis, bit: u8) -> Self {
        debug_assert!(bit <= 1);
        Self { basis, bit }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(Bb84Basis::random(rng), rng.random::<bool>() as u8)
    }

    pub fn state(&self) -> PureState {
        match (self.basis, self.bit) {
            (Bb84Basis::Z, 0) => PureState::horizontal(),
            (Bb84Basis::Z, _) => PureState::vertical(),
            (Bb84Basis::X, 0) => PureState::plus(),
            (Bb84Basis::X, _) => PureState::minus(),
        }
    }

    pub fn from_outcome(basis: Bb84Basis, outcome: Outcome) -> Self {
        Self::new(basis, outcome.bit())
    }

    /// Stable index over the four states: H, V, +, -.
    pub fn index(&self) -> u8 {
        self.basis.index() * 2 + self.bit
    }

    pub fn from_index(i: u8) -> Self {
        Self::new(
            if i < 2 { Bb84Basis::Z } else { Bb84Basis::X },
            i % 2,
        )
    }

    pub fn orthogonal(&self) -> Self {
        Self::new(self.basis, 1 - self.bit)
    }

    /// Orthogonality is exact only for same-basis partners.
    pub fn is_orthogonal_to(&self, other: &Bb84Symbol) -> bool {
        self.basis == other.basis && self.bit != other.bit
    }
}

/// Sample a decoy class and its mean photon number.
pub fn sample_decoy_class<R: Rng + ?Sized>(src: &SourceConfig, rng: &mut R) -> (DecoyClass, f64) {
    let u: f64 = rng.random();
    let p = &src.class_probs;
    if u < p.signal {
        (DecoyClass::Signal, src.mu_signal)
    } else if u < p.signal + p.decoy {
        (DecoyClass::Decoy, src.mu_decoy)
    } else {
        (DecoyClass::Vacuum, 0.0)
    }
}

/// Channel bit-flip noise: with probability `flip_prob` the encoded qubit is
/// flipped to its orthogonal partner (the `U` operator flips every BB84
/// state).
pub fn apply_flip_noise<R: Rng + ?Sized>(
    mut pulse: OpticalPulse,
    flip_prob: f64,
    rng: &mut R,
) -> OpticalPulse {
    if flip_prob > 0.0 && rng.random::<f64>() < flip_prob {
        if let crate::photonic::PulsePayload::Qubit(s) = &pulse.payload {
            pulse.payload = crate::photonic::PulsePayload::Qubit(s.apply_flip(FlipOp::U));
        }
    }
    pulse
}

/// Detector bank for one measurement arm, built from scenario config.
pub fn detector_from_config(cfg: &DetectorConfig, faked_energy_j: f64) -> DetectorModel {
    DetectorModel::new(
        cfg.eta,
        cfg.dark_prob,
        cfg.p_blind_w,
        cfg.e_click_ratio * faked_energy_j,
    )
}

/// Squashed-qubit detection of a polarization pulse: realize the photon
/// number, thin by detector efficiency, and on at least one survivor perform
/// one Born measurement of the encoded qubit in `basis`. Dark counts yield a
/// uniform outcome.
pub fn measure_pulse(
    pulse: &mut OpticalPulse,
    basis: MeasBasis,
    eta: f64,
    dark_prob: f64,
    rng: &mut RandomStream,
) -> Option<Outcome> {
    let n = pulse.realize(rng);
    let survivors = crate::photonic::thin_photons(n, eta, rng);
    if survivors >= 1 {
        let state = pulse.qubit_state().expect("polarization pulse");
        let (outcome, _) = state.measure(0, basis, rng);
        Some(outcome)
    } else if dark_prob > 0.0 && rng.random::<f64>() < dark_prob {
        Some(if rng.random::<bool>() {
            Outcome::Plus
        } else {
            Outcome::Minus
        })
    } else {
        None
    }
}

/// Faked-pulse energy configured for the scenario, used to fix blinded-mode
/// click thresholds even in honest runs (the threshold is a detector
/// property).
pub fn faked_energy(cfg: &ScenarioConfig) -> f64 {
    match &cfg.attack {
        Some(crate::attacks::AttackSpec::BlindControl { faked_energy_j, .. }) => *faked_energy_j,
        _ => 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::derive_stream;

    #[test]
    fn symbol_state_mapping_is_bijective() {
        for i in 0..4 {
            let sym = Bb84Symbol::from_index(i);
            assert_eq!(sym.index(), i);
            // Round-trip through a noiseless matched-basis measurement.
            let mut rng = derive_stream(1, "sym");
            let (outcome, _) = sym.state().measure(0, sym.basis.meas(), &mut rng);
            assert_eq!(outcome.bit(), sym.bit);
        }
    }

    #[test]
    fn decoy_class_frequencies_match_config() {
        let src = SourceConfig::default();
        let mut rng = derive_stream(2, "decoy");
        let n = 100_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            match sample_decoy_class(&src, &mut rng).0 {
                DecoyClass::Signal => counts[0] += 1,
                DecoyClass::Decoy => counts[1] += 1,
                DecoyClass::Vacuum => counts[2] += 1,
            }
        }
        let expected = [
            src.class_probs.signal,
            src.class_probs.decoy,
            src.class_probs.vacuum,
        ];
        for (c, e) in counts.iter().zip(expected) {
            let f = *c as f64 / n as f64;
            assert!((f - e).abs() < 0.01, "class freq {f} vs {e}");
        }
    }

    #[test]
    fn vacuum_class_has_zero_mean() {
        let src = SourceConfig::default();
        let mut rng = derive_stream(3, "vacuum");
        for _ in 0..10_000 {
            let (class, mu) = sample_decoy_class(&src, &mut rng);
            if class == DecoyClass::Vacuum {
                assert_eq!(mu, 0.0);
            }
        }
    }
}
