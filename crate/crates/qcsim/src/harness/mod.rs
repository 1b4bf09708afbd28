//! Multi-party execution fabric: seeded label-separated randomness, lossy
//! quantum channels with an adversary hook, a public authenticated classical
//! channel, and reproducible transcripts.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::photonic::{thin_photons, OpticalPulse};

/// The deterministic random stream used everywhere in the simulator.
pub type RandomStream = ChaCha12Rng;

/// Derive a label-separated random stream from a 64-bit master seed. The
/// same (seed, label) pair always yields the same stream; distinct labels
/// yield independent streams.
pub fn derive_stream(master_seed: u64, label: &str) -> RandomStream {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(label.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&hasher.finalize());
    ChaCha12Rng::from_seed(seed)
}

/// A protocol participant: identity, role and a private random stream.
/// `store` holds per-party outputs recorded into the transcript; nothing in
/// it is visible to the adversary except through explicit attack operations.
pub struct Party {
    pub id: String,
    pub role: String,
    pub rng: RandomStream,
    store: BTreeMap<String, Value>,
}

impl Party {
    pub fn new(seed: u64, id: &str, role: &str) -> Self {
        Self {
            id: id.to_string(),
            role: role.to_string(),
            rng: derive_stream(seed, id),
            store: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        self.store
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
    }

    pub fn store(&self) -> &BTreeMap<String, Value> {
        &self.store
    }
}

/// Adversary hook invoked on every quantum transmission. The interposer may
/// absorb the pulse (return `None`), replace it, or pass it through. It runs
/// before channel loss is applied.
pub trait Interposer {
    fn on_pulse(&mut self, pulse: OpticalPulse, rng: &mut RandomStream) -> Option<OpticalPulse>;
}

/// Interposer that absorbs every pulse.
pub struct AbsorbAll;

impl Interposer for AbsorbAll {
    fn on_pulse(&mut self, _pulse: OpticalPulse, _rng: &mut RandomStream) -> Option<OpticalPulse> {
        None
    }
}

/// Lossy quantum channel with an optional adversary in the line.
pub struct QuantumChannel {
    pub loss_db: f64,
    pub interposer: Option<Box<dyn Interposer>>,
}

impl QuantumChannel {
    pub fn new(loss_db: f64) -> Self {
        assert!(loss_db >= 0.0, "attenuation must be nonnegative");
        Self {
            loss_db,
            interposer: None,
        }
    }

    /// Per-photon survival probability, 10^(-loss_db/10).
    pub fn survival(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Send a pulse through the channel. The interposer (if any) acts first;
    /// surviving photons are then thinned by the channel loss. Empty pulses
    /// are delivered as vacuum rather than dropped.
    pub fn transmit(
        &mut self,
        pulse: OpticalPulse,
        rng: &mut RandomStream,
    ) -> Option<OpticalPulse> {
        let pulse = match self.interposer.as_mut() {
            Some(eve) => eve.on_pulse(pulse, rng)?,
            None => pulse,
        };
        Some(apply_loss(pulse, self.survival(), rng))
    }
}

/// Thin a pulse by a survival probability: scales the mean if the photon
/// number is unrealized, otherwise thins the realized count binomially.
pub fn apply_loss(mut pulse: OpticalPulse, survival: f64, rng: &mut RandomStream) -> OpticalPulse {
    match pulse.photons {
        None => pulse.mu *= survival,
        Some(n) => pulse.photons = Some(thin_photons(n, survival, rng)),
    }
    pulse
}

/// One public classical announcement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Broadcast {
    pub from: String,
    pub label: String,
    pub payload: Value,
}

/// Authenticated-but-public classical channel: every append is readable by
/// all parties and by the adversary, and never mutated afterwards.
#[derive(Debug, Default)]
pub struct ClassicalChannel {
    entries: Vec<Broadcast>,
}

impl ClassicalChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn broadcast(&mut self, from: &str, label: &str, payload: impl Serialize) {
        self.entries.push(Broadcast {
            from: from.to_string(),
            label: label.to_string(),
            payload: serde_json::to_value(payload).unwrap(),
        });
    }

    /// Full transcript view; this is exactly what the adversary can read.
    pub fn entries(&self) -> &[Broadcast] {
        &self.entries
    }

    pub fn find(&self, label: &str) -> Option<&Broadcast> {
        self.entries.iter().find(|b| b.label == label)
    }
}

/// One recorded transcript event. Quantum traffic is aggregated per phase;
/// announcements and decisions are recorded individually.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    QuantumPhase {
        from: String,
        to: String,
        rounds: u64,
        delivered: u64,
    },
    Interception {
        attack: String,
        rounds: u64,
    },
    Announcement {
        from: String,
        label: String,
        payload: Value,
    },
    Decision {
        party: String,
        label: String,
        value: Value,
    },
    Alarm {
        party: String,
        detail: String,
    },
}

/// Ordered record of one protocol run. Replaying the same scenario and seed
/// reproduces the transcript bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProtocolTranscript {
    pub protocol: String,
    pub seed: u64,
    pub events: Vec<TranscriptEvent>,
    /// Per-party outputs and run tallies, keyed by party id or section name.
    pub outputs: BTreeMap<String, Value>,
}

impl ProtocolTranscript {
    pub fn new(protocol: &str, seed: u64) -> Self {
        Self {
            protocol: protocol.to_string(),
            seed,
            events: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    pub fn record_broadcasts(&mut self, channel: &ClassicalChannel) {
        for b in channel.entries() {
            self.events.push(TranscriptEvent::Announcement {
                from: b.from.clone(),
                label: b.label.clone(),
                payload: b.payload.clone(),
            });
        }
    }

    pub fn set_output(&mut self, key: &str, value: impl Serialize) {
        self.outputs
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
    }

    pub fn alarm_count(&self) -> u64 {
        self.events
            .iter()
            .filter(|e| matches!(e, TranscriptEvent::Alarm { .. }))
            .count() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonic::PureState;
    use rand::Rng;

    #[test]
    fn derive_stream_is_deterministic_and_label_separated() {
        let draws = |seed, label: &str| {
            let mut rng = derive_stream(seed, label);
            (0..100).map(|_| rng.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draws(1, "alice"), draws(1, "alice"));
        assert_ne!(draws(1, "alice"), draws(1, "bob"));
        assert_ne!(draws(1, "alice"), draws(2, "alice"));
    }

    #[test]
    fn lossless_channel_delivers_unchanged() {
        let mut ch = QuantumChannel::new(0.0);
        let mut rng = derive_stream(1, "ch");
        let mut pulse = OpticalPulse::qubit(PureState::plus(), 1.0, 1550.0);
        pulse.photons = Some(3);
        let out = ch.transmit(pulse, &mut rng).unwrap();
        assert_eq!(out.photons, Some(3));
        assert_eq!(out.mu, 1.0);
    }

    #[test]
    fn three_db_loss_halves_the_delivered_mean() {
        let mut ch = QuantumChannel::new(3.0);
        let mut rng = derive_stream(2, "ch3db");
        let expected = 10f64.powf(-0.3); // ~0.501
        let n = 100_000u64;
        let mut total = 0u64;
        for _ in 0..n {
            let mut pulse = OpticalPulse::qubit(PureState::plus(), 1.0, 1550.0);
            pulse.realize(&mut rng);
            let out = ch.transmit(pulse, &mut rng).unwrap();
            total += out.photons.unwrap();
        }
        let mean = total as f64 / n as f64;
        assert!((mean - expected).abs() < 0.01, "mean {mean} vs {expected}");
    }

    #[test]
    fn loss_composes_in_series() {
        let mut rng = derive_stream(3, "compose");
        let n = 100_000u64;
        let run = |losses: &[f64], rng: &mut RandomStream| {
            let mut chans: Vec<_> = losses.iter().map(|&l| QuantumChannel::new(l)).collect();
            let mut total = 0u64;
            for _ in 0..n {
                let mut pulse = OpticalPulse::qubit(PureState::plus(), 1.0, 1550.0);
                pulse.realize(rng);
                let mut p = Some(pulse);
                for ch in &mut chans {
                    p = ch.transmit(p.unwrap(), rng);
                }
                total += p.unwrap().photons.unwrap();
            }
            total as f64 / n as f64
        };
        let series = run(&[2.0, 4.0], &mut rng);
        let single = run(&[6.0], &mut rng);
        assert!(
            (series - single).abs() / single < 0.02,
            "series {series} vs single {single}"
        );
    }

    #[test]
    fn absorbing_interposer_delivers_nothing() {
        let mut ch = QuantumChannel::new(0.0);
        ch.interposer = Some(Box::new(AbsorbAll));
        let mut rng = derive_stream(4, "absorb");
        let pulse = OpticalPulse::qubit(PureState::plus(), 1.0, 1550.0);
        assert!(ch.transmit(pulse, &mut rng).is_none());
    }

    #[test]
    fn broadcasts_keep_order_and_bytes() {
        let mut ch = ClassicalChannel::new();
        ch.broadcast("alice", "bases", vec![0u8, 1, 1, 0]);
        ch.broadcast("bob", "slots", vec![7u64, 9]);
        assert_eq!(ch.entries().len(), 2);
        assert_eq!(ch.entries()[0].label, "bases");
        assert_eq!(ch.entries()[1].label, "slots");
        // The adversary's view contains exactly what was announced.
        let eve_view: Vec<u8> =
            serde_json::from_value(ch.find("bases").unwrap().payload.clone()).unwrap();
        assert_eq!(eve_view, vec![0, 1, 1, 0]);
    }
}
