//! Entanglement-based three-party quantum secret sharing on GHZ triplets.
//!
//! Each round distributes one GHZ triplet; every party measures in a random
//! X or Y basis. Basis announcements keep the four correlated combinations,
//! on which the outcome product is fixed, so any two parties predict the
//! third outcome with certainty. Charlie's sifted outcomes form the key that
//! Alice and Bob reconstruct together.

use rand::Rng;

use crate::attacks::{AttackSpec, FakedState};
use crate::countermeasures::calibrate;
use crate::error::SimError;
use crate::harness::{ClassicalChannel, ProtocolTranscript, TranscriptEvent};
use crate::metrics::{Rate, Tallies};
use crate::photonic::{ghz_state, MeasBasis, Outcome};
use crate::protocols::common::detector_from_config;
use crate::protocols::RunCtx;

/// One of the eight basis combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisTriple(pub [GhzBasis; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GhzBasis {
    X,
    Y,
}

impl GhzBasis {
    pub fn meas(self) -> MeasBasis {
        match self {
            GhzBasis::X => MeasBasis::X,
            GhzBasis::Y => MeasBasis::Y,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            GhzBasis::X
        } else {
            GhzBasis::Y
        }
    }

    pub fn label(self) -> char {
        match self {
            GhzBasis::X => 'x',
            GhzBasis::Y => 'y',
        }
    }
}

impl BasisTriple {
    pub fn key(&self) -> String {
        self.0.iter().map(|b| b.label()).collect()
    }

    /// Number of Y measurements in the triple.
    fn y_count(&self) -> usize {
        self.0.iter().filter(|b| **b == GhzBasis::Y).count()
    }

    /// Whether this combination carries deterministic correlations.
    pub fn is_correlated(&self) -> bool {
        matches!(self.y_count(), 0 | 2)
    }

    /// Fixed outcome-product sign of a correlated combination. XXX gives +1;
    /// the three two-Y combinations give -1 (derived from the GHZ state's
    /// stabilizer expansion and checked against the measurement engine in
    /// tests).
    pub fn product_sign(&self) -> Result<i32, SimError> {
        match self.y_count() {
            0 => Ok(1),
            2 => Ok(-1),
            _ => Err(SimError::Domain(format!(
                "basis combination {} is uncorrelated",
                self.key()
            ))),
        }
    }
}

/// Predict the third outcome of a correlated round from the other two.
pub fn ghz_reconstruct(a: Outcome, b: Outcome, triple: BasisTriple) -> Result<Outcome, SimError> {
    let sign = triple.product_sign()?;
    Ok(Outcome::from_sign(sign * a.sign() * b.sign()))
}

pub fn run(ctx: &RunCtx) -> Result<ProtocolTranscript, SimError> {
    let cfg = ctx.cfg;
    let mut transcript = ProtocolTranscript::new("qss_ghz", ctx.seed);
    let mut classical = ClassicalChannel::new();
    let mut tallies = Tallies::new();
    let n = cfg.n_rounds;
    let survival = ctx.survival();
    let det_prob = (survival * cfg.detectors.eta).min(1.0);

    let mut party_rngs = [ctx.rng("alice"), ctx.rng("bob"), ctx.rng("charlie")];
    let mut eve_rng = ctx.rng("eve");
    let attack = cfg.attack.clone();

    // Per-triple product statistics over complete rounds.
    use std::collections::BTreeMap;
    let mut product_sum: BTreeMap<String, i64> = BTreeMap::new();
    let mut product_count: BTreeMap<String, u64> = BTreeMap::new();

    let mut kept_rounds = 0u64; // all three detected
    let mut sifted = 0u64;
    let mut parity_violations = 0u64;
    let mut key_errors = Rate::default(); // Alice+Bob reconstruction vs Charlie
    let mut eve_correct = Rate::default();
    let mut disclosed_errors = 0u64;
    let mut disclosed_total = 0u64;
    let mut disclose_rng = ctx.rng("disclose");

    for _ in 0..n {
        let mut state = ghz_state();
        let mut bases = [GhzBasis::X; 3];
        let mut outcomes = [Outcome::Plus; 3];
        let mut detected = [false; 3];
        let mut eve_prediction: Option<Outcome> = None;

        match &attack {
            Some(AttackSpec::BlindControl { faked_energy_j, .. }) => {
                // Eve measures the Alice and Bob photons of the genuine GHZ
                // state herself, then forces the blinded receivers to repeat
                // her results; Charlie keeps his photon untouched.
                for idx in [0usize, 1] {
                    let basis = GhzBasis::random(&mut eve_rng);
                    let (outcome, collapsed) = state.measure(idx, basis.meas(), &mut eve_rng);
                    state = collapsed;
                    bases[idx] = basis;
                    outcomes[idx] = outcome;
                    // Faked pulse into a passive receiver: forced click in
                    // Eve's basis arm with her outcome.
                    let mut det = detector_from_config(&cfg.detectors, *faked_energy_j);
                    det.mode = crate::photonic::DetectorMode::Blinded;
                    let faked = FakedState {
                        basis: 0,
                        outcome,
                        energy_j: *faked_energy_j,
                    };
                    detected[idx] = crate::attacks::faked_arm_click(
                        &faked,
                        true,
                        &mut det,
                        &mut party_rngs[idx],
                    )
                    .is_some();
                }
                let basis = GhzBasis::random(&mut party_rngs[2]);
                let (outcome, _) = state.measure(2, basis.meas(), &mut party_rngs[2]);
                bases[2] = basis;
                outcomes[2] = outcome;
                detected[2] = party_rngs[2].random::<f64>() < det_prob;
                let triple = BasisTriple(bases);
                if triple.is_correlated() {
                    eve_prediction = Some(ghz_reconstruct(outcomes[0], outcomes[1], triple)?);
                }
            }
            Some(AttackSpec::InterceptResend { .. }) => {
                // Eve measures the Alice and Bob photons in random bases and
                // resends the eigenstates; all parties then measure honestly.
                for idx in [0usize, 1] {
                    let basis = GhzBasis::random(&mut eve_rng);
                    let (_, collapsed) = state.measure(idx, basis.meas(), &mut eve_rng);
                    state = collapsed;
                }
                for idx in 0..3 {
                    let basis = GhzBasis::random(&mut party_rngs[idx]);
                    let (outcome, collapsed) = state.measure(idx, basis.meas(), &mut party_rngs[idx]);
                    state = collapsed;
                    bases[idx] = basis;
                    outcomes[idx] = outcome;
                    detected[idx] = party_rngs[idx].random::<f64>() < det_prob;
                }
            }
            None => {
                for idx in 0..3 {
                    let basis = GhzBasis::random(&mut party_rngs[idx]);
                    let (outcome, collapsed) = state.measure(idx, basis.meas(), &mut party_rngs[idx]);
                    state = collapsed;
                    bases[idx] = basis;
                    outcomes[idx] = outcome;
                    detected[idx] = party_rngs[idx].random::<f64>() < det_prob;
                }
            }
            Some(other) => {
                return Err(SimError::Runtime(format!(
                    "attack `{}` is not implemented for qss_ghz",
                    other.kind_name()
                )))
            }
        }

        if !detected.iter().all(|&d| d) {
            continue;
        }
        kept_rounds += 1;
        let triple = BasisTriple(bases);
        let product = outcomes.iter().map(|o| o.sign() as i64).product::<i64>();
        *product_sum.entry(triple.key()).or_default() += product;
        *product_count.entry(triple.key()).or_default() += 1;

        if !triple.is_correlated() {
            continue;
        }
        sifted += 1;
        let expected_sign = triple.product_sign()?;
        if product as i32 != expected_sign {
            parity_violations += 1;
        }

        // Alice and Bob pool their outcomes to reconstruct Charlie's bit.
        let predicted = ghz_reconstruct(outcomes[0], outcomes[1], triple)?;
        key_errors.add(predicted != outcomes[2]);
        if let Some(eve) = eve_prediction {
            eve_correct.add(eve == outcomes[2]);
        }
        if disclose_rng.random::<f64>() < cfg.qss.disclose_fraction {
            disclosed_total += 1;
            disclosed_errors += (predicted != outcomes[2]) as u64;
        }
    }

    transcript.push(TranscriptEvent::QuantumPhase {
        from: "source".into(),
        to: "alice,bob,charlie".into(),
        rounds: n,
        delivered: kept_rounds,
    });
    classical.broadcast("alice", "alice/bases", "announced per round");
    classical.broadcast("bob", "bob/bases", "announced per round");
    classical.broadcast("charlie", "charlie/bases", "announced per round");
    if let Some(attack) = &attack {
        transcript.push(TranscriptEvent::Interception {
            attack: attack.kind_name().into(),
            rounds: n,
        });
    }

    // Detector calibration at the blinded receivers.
    if let Some(cal) = &cfg.countermeasures.calibration {
        for name in ["alice", "bob"] {
            let mut det = detector_from_config(
                &cfg.detectors,
                crate::protocols::common::faked_energy(cfg),
            );
            if matches!(attack, Some(AttackSpec::BlindControl { .. })) {
                det.mode = crate::photonic::DetectorMode::Blinded;
            }
            let mut cal_rng = ctx.rng(&format!("calibration/{name}"));
            if calibrate(&mut det, cal, &mut cal_rng) {
                transcript.push(TranscriptEvent::Alarm {
                    party: name.into(),
                    detail: "calibration found a blinded detector".into(),
                });
                tallies.alarm = true;
            }
        }
        if tallies.alarm {
            tallies.abort("calibration alarm");
            transcript.record_broadcasts(&classical);
            transcript.set_output("tallies", &tallies);
            return Ok(transcript);
        }
    }

    for (key, sum) in &product_sum {
        let count = product_count[key];
        tallies.set_value(
            &format!("product_mean/{key}"),
            *sum as f64 / count as f64,
        );
        tallies.set_count(&format!("product_count/{key}"), count);
    }
    tallies.set_count("kept_rounds", kept_rounds);
    tallies.set_count("sifted_rounds", sifted);
    tallies.set_count("parity_violations", parity_violations);
    tallies.set_rate("keep_rate", sifted, kept_rounds);
    tallies.rates.insert("qber".into(), key_errors);

    let disclosed_rate = if disclosed_total > 0 {
        disclosed_errors as f64 / disclosed_total as f64
    } else {
        0.0
    };
    tallies.set_value("e_est", disclosed_rate);
    if disclosed_rate > cfg.qss.max_error_rate {
        tallies.abort("disclosed error rate above cap");
    }
    if attack.is_some() {
        tallies.eve_knowledge = Some(eve_correct);
    }
    transcript.push(TranscriptEvent::Decision {
        party: "charlie".into(),
        label: "key_established".into(),
        value: serde_json::json!(!tallies.aborted),
    });

    transcript.record_broadcasts(&classical);
    transcript.set_output("tallies", &tallies);
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProtocolId, ScenarioConfig};
    use crate::harness::derive_stream;
    use crate::metrics::compute_metrics;
    use num_complex::Complex64;

    /// Exact oracle: expectation of a Pauli-product observable on the GHZ
    /// state, computed by direct 8x8 linear algebra.
    fn pauli_product_expectation(bases: [GhzBasis; 3]) -> f64 {
        let x = [
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ];
        let y = [
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
        ];
        let op = |b: GhzBasis| match b {
            GhzBasis::X => x,
            GhzBasis::Y => y,
        };
        let ghz = ghz_state();
        let amps = ghz.amplitudes();
        let mut expectation = Complex64::new(0.0, 0.0);
        for i in 0..8usize {
            for j in 0..8usize {
                let mut element = Complex64::new(1.0, 0.0);
                for q in 0..3 {
                    let (bi, bj) = ((i >> (2 - q)) & 1, (j >> (2 - q)) & 1);
                    element *= op(bases[q])[bi][bj];
                }
                expectation += amps[i].conj() * element * amps[j];
            }
        }
        expectation.re
    }

    #[test]
    fn correlation_signs_match_the_exact_oracle() {
        use GhzBasis::*;
        for (bases, sign) in [
            ([X, X, X], 1.0),
            ([X, Y, Y], -1.0),
            ([Y, X, Y], -1.0),
            ([Y, Y, X], -1.0),
        ] {
            let oracle = pauli_product_expectation(bases);
            assert!((oracle - sign).abs() < 1e-12, "{bases:?}: {oracle}");
            assert_eq!(BasisTriple(bases).product_sign().unwrap(), sign as i32);
        }
        for bases in [[X, X, Y], [X, Y, X], [Y, X, X], [Y, Y, Y]] {
            assert!(pauli_product_expectation(bases).abs() < 1e-12);
            assert!(BasisTriple(bases).product_sign().is_err());
        }
    }

    #[test]
    fn engine_reproduces_the_fixed_products() {
        let mut rng = derive_stream(1, "ghz-products");
        use GhzBasis::*;
        for (bases, sign) in [([X, X, X], 1), ([X, Y, Y], -1), ([Y, X, Y], -1), ([Y, Y, X], -1)]
        {
            for _ in 0..2_000 {
                let mut state = ghz_state();
                let mut product = 1i32;
                for (idx, b) in bases.iter().enumerate() {
                    let (o, collapsed) = state.measure(idx, b.meas(), &mut rng);
                    state = collapsed;
                    product *= o.sign();
                }
                assert_eq!(product, sign, "bases {bases:?}");
            }
        }
    }

    #[test]
    fn reconstruct_examples() {
        use GhzBasis::*;
        let xxx = BasisTriple([X, X, X]);
        assert_eq!(
            ghz_reconstruct(Outcome::Plus, Outcome::Plus, xxx).unwrap(),
            Outcome::Plus
        );
        assert_eq!(
            ghz_reconstruct(Outcome::Plus, Outcome::Minus, xxx).unwrap(),
            Outcome::Minus
        );
        assert!(ghz_reconstruct(Outcome::Plus, Outcome::Plus, BasisTriple([Y, Y, Y])).is_err());
    }

    #[test]
    fn honest_run_has_half_keep_rate_and_zero_qber() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QssGhz);
        cfg.n_rounds = 50_000;
        let ctx = RunCtx::new(&cfg, 5);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.counts["parity_violations"], 0);
        assert_eq!(m.rates["qber"].num, 0);
        let keep = m.rates["keep_rate"].rate();
        assert!((keep - 0.5).abs() < 0.01, "keep rate {keep}");
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn blinding_learns_charlies_key_without_errors() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QssGhz);
        cfg.n_rounds = 30_000;
        cfg.attack = Some(AttackSpec::blind_control_full_strength());
        let ctx = RunCtx::new(&cfg, 6);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.rates["qber"].num, 0, "attack must add no errors");
        assert_eq!(m.counts["parity_violations"], 0);
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn intercept_resend_breaks_correlations_and_aborts() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QssGhz);
        cfg.n_rounds = 30_000;
        cfg.attack = Some(AttackSpec::intercept_resend_default());
        let ctx = RunCtx::new(&cfg, 7);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        let qber = m.rates["qber"].rate();
        assert!(qber > 0.2, "intercept-resend must disturb, qber {qber}");
        assert_eq!(m.acceptance.rate(), 0.0);
    }
}
