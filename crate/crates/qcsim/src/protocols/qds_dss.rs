//! Different-state-sharing quantum digital signatures over a DPS key
//! generating protocol.
//!
//! Bob and Charlie each run a KGP with Alice: bits ride on {0, pi} phase
//! differences between adjacent weak coherent pulses, read out by Alice's
//! interferometer. No error correction or privacy amplification is applied.
//! Bob and Charlie then forward a random half of their keys to each other
//! over a private link, so from Alice's view every key position is equally
//! likely to sit with either recipient. A signature is the pair of Alice-side
//! strings; verification is a positionwise Hamming mismatch against the
//! locally held halves.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::attacks::{AttackSpec, TrojanProbe};
use crate::config::{IsolationConfig, ScenarioConfig};
use crate::countermeasures::{calibrate, isolation_budget, watchdog_check};
use crate::error::SimError;
use crate::harness::{ClassicalChannel, ProtocolTranscript, RandomStream, TranscriptEvent};
use crate::metrics::{Rate, Tallies};
use crate::photonic::{sample_photon_number, IncidentLight};
use crate::protocols::qds_iss::derived_threshold;
use crate::protocols::RunCtx;

/// Outcome of one KGP session between a sender and Alice.
pub struct KgpOutcome {
    /// Sender-side bits at Alice's detected slots.
    pub sender_key: BTreeMap<u64, u8>,
    /// Alice-side bits at the same slots.
    pub alice_key: BTreeMap<u64, u8>,
    /// Disclosed-sample error estimate.
    pub qber: f64,
    pub disclosed: u64,
}

/// Run a DPS key generating protocol: per slot, detection is Bernoulli in
/// the link transmission and the interferometer routes deterministically by
/// phase difference. Returns the correlated (sender, Alice) strings after
/// removing the disclosed sample.
pub fn dss_kgp(
    bits: &[u8],
    detect_prob: f64,
    flip_prob: f64,
    disclose_fraction: f64,
    rng: &mut RandomStream,
) -> Result<KgpOutcome, SimError> {
    let mut sender_key = BTreeMap::new();
    let mut alice_key = BTreeMap::new();
    let mut errors = 0u64;
    let mut disclosed = 0u64;
    let mut sender_full = BTreeMap::new();
    for (slot, &bit) in bits.iter().enumerate() {
        let slot = slot as u64;
        if rng.random::<f64>() >= detect_prob {
            continue;
        }
        let received = if flip_prob > 0.0 && rng.random::<f64>() < flip_prob {
            1 - bit
        } else {
            bit
        };
        if rng.random::<f64>() < disclose_fraction {
            disclosed += 1;
            errors += (received != bit) as u64;
        } else {
            sender_full.insert(slot, bit);
            sender_key.insert(slot, bit);
            alice_key.insert(slot, received);
        }
    }
    if alice_key.is_empty() {
        return Err(SimError::Abort("KGP produced zero detections".into()));
    }
    let qber = if disclosed > 0 {
        errors as f64 / disclosed as f64
    } else {
        0.0
    };
    Ok(KgpOutcome {
        sender_key,
        alice_key,
        qber,
        disclosed,
    })
}

/// Forward a uniformly random half of each key to the other recipient over
/// the private link. Returns (kept positions, forwarded positions).
pub fn dss_exchange_halves(
    positions: &BTreeSet<u64>,
    rng: &mut RandomStream,
) -> (BTreeSet<u64>, BTreeSet<u64>) {
    let mut kept = BTreeSet::new();
    let mut forwarded = BTreeSet::new();
    for &slot in positions {
        if rng.random::<bool>() {
            forwarded.insert(slot);
        } else {
            kept.insert(slot);
        }
    }
    (kept, forwarded)
}

/// Positionwise Hamming mismatch of a claimed signature against the locally
/// held symmetric key; accept below the threshold.
pub fn dss_verify(
    claimed: &BTreeMap<u64, u8>,
    local: &BTreeMap<u64, u8>,
    threshold: f64,
) -> Result<(bool, Rate), SimError> {
    if local.is_empty() {
        return Err(SimError::Domain("empty symmetric key".into()));
    }
    let mut mismatch = Rate::default();
    for (slot, &bit) in local {
        match claimed.get(slot) {
            Some(&c) => mismatch.add(c != bit),
            None => {
                return Err(SimError::Domain(format!(
                    "claimed signature is missing position {slot}"
                )))
            }
        }
    }
    Ok((mismatch.rate() < threshold, mismatch))
}

struct Link {
    sender: &'static str,
    bits: Vec<u8>,
    outcome: Option<KgpOutcome>,
    /// Eve's per-slot knowledge of the sender bits.
    eve_claims: BTreeMap<u64, u8>,
}

fn trojan_read_prob_source(cfg: &ScenarioConfig) -> &IsolationConfig {
    // Senders may or may not have declared an isolation chain; absent one,
    // the probe sees no attenuation at all.
    static DEFAULT: std::sync::OnceLock<IsolationConfig> = std::sync::OnceLock::new();
    cfg.countermeasures
        .isolation
        .as_ref()
        .unwrap_or_else(|| DEFAULT.get_or_init(IsolationConfig::default))
}

pub fn run(ctx: &RunCtx) -> Result<ProtocolTranscript, SimError> {
    let cfg = ctx.cfg;
    let mut transcript = ProtocolTranscript::new("qds_dss", ctx.seed);
    let mut classical = ClassicalChannel::new();
    let mut tallies = Tallies::new();
    let n = cfg.n_rounds;
    let survival = ctx.survival();
    let mut eve_rng = ctx.rng("eve");

    let attack = cfg.attack.clone();
    let detect_prob = (cfg.source.mu_signal * cfg.detectors.eta * survival).min(1.0);

    let mut links = ["bob", "charlie"].map(|sender| {
        let mut rng = ctx.rng(&format!("{sender}/bits"));
        Link {
            sender: if sender == "bob" { "bob" } else { "charlie" },
            bits: (0..n).map(|_| rng.random::<bool>() as u8).collect(),
            outcome: None,
            eve_claims: BTreeMap::new(),
        }
    });

    // Trojan-horse probing of the sender phase modulators happens during
    // the quantum stage and leaves the quantum traffic untouched.
    if let Some(AttackSpec::Trojan {
        injected_power_w,
        rep_rate_hz,
        readout_threshold,
    }) = &attack
    {
        let chain = trojan_read_prob_source(cfg);
        let budget = isolation_budget(
            *injected_power_w,
            chain,
            cfg.source.wavelength_nm,
            *rep_rate_hz,
        )?;
        tallies.set_value("trojan_n_bar", budget.mean_photons_per_window);
        let probe = TrojanProbe::new(budget.mean_photons_per_window, *readout_threshold);

        if cfg.countermeasures.watchdog {
            // Watchdogs on both PM ports observe the inbound probe light.
            let tap_mean = budget.photons_per_second / rep_rate_hz
                * 10f64.powf(-cfg.countermeasures.watchdog_tap_db / 10.0)
                * 10f64.powf(budget.total_isolation_db / 10.0);
            // The tap sits at the port, before the isolation chain.
            let mut alarm = false;
            for link in &links {
                let mut tap = crate::protocols::common::detector_from_config(
                    &cfg.detectors,
                    crate::protocols::common::faked_energy(cfg),
                );
                let mut wd_rng = ctx.rng(&format!("watchdog/{}", link.sender));
                let photons = if tap_mean > 1e6 {
                    1_000_000
                } else {
                    sample_photon_number(tap_mean, &mut wd_rng)
                };
                if watchdog_check(&mut tap, &IncidentLight::photons(photons), &mut wd_rng) {
                    transcript.push(TranscriptEvent::Alarm {
                        party: link.sender.into(),
                        detail: "watchdog saw Trojan probe light".into(),
                    });
                    alarm = true;
                }
            }
            if alarm {
                tallies.alarm = true;
                tallies.abort("watchdog alarm");
                tallies.forge_accept = Some(false);
                transcript.set_output("tallies", &tallies);
                return Ok(transcript);
            }
        }

        for link in &mut links {
            let mut probe_rng = ctx.rng(&format!("trojan/{}", link.sender));
            for (slot, &bit) in link.bits.iter().enumerate() {
                if probe.read(&mut probe_rng) {
                    link.eve_claims.insert(slot as u64, bit);
                }
            }
            transcript.push(TranscriptEvent::Interception {
                attack: "trojan".into(),
                rounds: link.eve_claims.len() as u64,
            });
        }
    }

    // Quantum stage per sender.
    for link in &mut links {
        let mut kgp_rng = ctx.rng(&format!("kgp/{}", link.sender));
        let outcome = match &attack {
            Some(AttackSpec::BlindControl { .. }) => {
                // Eve blinds Alice's detectors, measures the DPS train at the
                // sender's doorstep, and forces Alice's clicks to mirror her
                // own detections exactly.
                let mut sender_key = BTreeMap::new();
                let mut alice_key = BTreeMap::new();
                let eve_detect = cfg.source.mu_signal.min(1.0);
                for (slot, &bit) in link.bits.iter().enumerate() {
                    if eve_rng.random::<f64>() < eve_detect {
                        let slot = slot as u64;
                        link.eve_claims.insert(slot, bit);
                        sender_key.insert(slot, bit);
                        alice_key.insert(slot, bit);
                    }
                }
                // Disclosure on Eve-controlled rounds shows zero error.
                let mut disclosed = 0u64;
                let keep: Vec<u64> = sender_key.keys().copied().collect();
                for slot in keep {
                    if kgp_rng.random::<f64>() < cfg.qds.disclose_fraction {
                        sender_key.remove(&slot);
                        alice_key.remove(&slot);
                        link.eve_claims.remove(&slot);
                        disclosed += 1;
                    }
                }
                if alice_key.is_empty() {
                    return Err(SimError::Abort("KGP produced zero detections".into()));
                }
                KgpOutcome {
                    sender_key,
                    alice_key,
                    qber: 0.0,
                    disclosed,
                }
            }
            Some(AttackSpec::InterceptResend { .. }) => {
                // Naive intercept-resend of DPS traffic randomizes the slots
                // where Eve's interferometer phase mismatched, a 25% bit
                // error on Alice's side.
                let o = dss_kgp(
                    &link.bits,
                    detect_prob,
                    0.25,
                    cfg.qds.disclose_fraction,
                    &mut kgp_rng,
                )?;
                for (&slot, &bit) in &o.alice_key {
                    // Eve holds what she resent, which is what Alice detects.
                    link.eve_claims.insert(slot, bit);
                }
                o
            }
            _ => dss_kgp(
                &link.bits,
                detect_prob,
                cfg.channel.flip_prob,
                cfg.qds.disclose_fraction,
                &mut kgp_rng,
            )?,
        };
        classical.broadcast(
            "alice",
            &format!("alice/detections/{}", link.sender),
            outcome.alice_key.keys().collect::<Vec<_>>(),
        );
        transcript.push(TranscriptEvent::QuantumPhase {
            from: link.sender.into(),
            to: "alice".into(),
            rounds: n,
            delivered: outcome.alice_key.len() as u64,
        });
        link.outcome = Some(outcome);
    }

    // Detector calibration countermeasure at Alice.
    if let Some(cal) = &cfg.countermeasures.calibration {
        let mut det = crate::protocols::common::detector_from_config(
            &cfg.detectors,
            crate::protocols::common::faked_energy(cfg),
        );
        if matches!(attack, Some(AttackSpec::BlindControl { .. })) {
            det.mode = crate::photonic::DetectorMode::Blinded;
        }
        let mut cal_rng = ctx.rng("calibration/alice");
        if calibrate(&mut det, cal, &mut cal_rng) {
            transcript.push(TranscriptEvent::Alarm {
                party: "alice".into(),
                detail: "calibration found a blinded detector".into(),
            });
            tallies.alarm = true;
            tallies.abort("calibration alarm");
            tallies.forge_accept = Some(false);
            transcript.record_broadcasts(&classical);
            transcript.set_output("tallies", &tallies);
            return Ok(transcript);
        }
    }

    let [bob, charlie] = links;
    let bob_out = bob.outcome.as_ref().unwrap();
    let charlie_out = charlie.outcome.as_ref().unwrap();

    let qber = bob_out.qber.max(charlie_out.qber);
    tallies.set_value("kgp_qber", qber);
    tallies.set_value(
        "kgp_detection_rate",
        (bob_out.alice_key.len() + bob_out.disclosed as usize) as f64 / n as f64,
    );
    let s_a = cfg.qds.s_a.unwrap_or_else(|| {
        derived_threshold(
            (bob_out.qber * bob_out.disclosed as f64).round() as u64,
            bob_out.disclosed,
            3.0,
        )
    });
    let s_v = cfg.qds.s_v.unwrap_or_else(|| {
        derived_threshold(
            (charlie_out.qber * charlie_out.disclosed as f64).round() as u64,
            charlie_out.disclosed,
            6.0,
        )
    });
    tallies.set_value("s_a", s_a);
    tallies.set_value("s_v", s_v);

    if qber > cfg.qds.max_error_rate {
        tallies.abort("KGP error rate above cap");
        tallies.forge_accept = attack.as_ref().map(|_| false);
        transcript.record_broadcasts(&classical);
        transcript.set_output("tallies", &tallies);
        return Ok(transcript);
    }

    // Half-key exchange over the private recipient link.
    let mut bob_mask_rng = ctx.rng("bob/mask");
    let mut charlie_mask_rng = ctx.rng("charlie/mask");
    let bob_positions: BTreeSet<u64> = bob_out.sender_key.keys().copied().collect();
    let charlie_positions: BTreeSet<u64> = charlie_out.sender_key.keys().copied().collect();
    let (bob_kept, bob_forwarded) = dss_exchange_halves(&bob_positions, &mut bob_mask_rng);
    let (charlie_kept, charlie_forwarded) =
        dss_exchange_halves(&charlie_positions, &mut charlie_mask_rng);

    // Symmetric keys: kept half of one's own key plus the received half of
    // the other's. Positions are namespaced by originating sender.
    let symmetric = |own: &BTreeMap<u64, u8>,
                     own_kept: &BTreeSet<u64>,
                     other: &BTreeMap<u64, u8>,
                     other_forwarded: &BTreeSet<u64>,
                     own_tag: u64,
                     other_tag: u64| {
        let mut key: BTreeMap<(u64, u64), u8> = BTreeMap::new();
        for &slot in own_kept {
            key.insert((own_tag, slot), own[&slot]);
        }
        for &slot in other_forwarded {
            key.insert((other_tag, slot), other[&slot]);
        }
        key
    };
    let s_bob = symmetric(
        &bob_out.sender_key,
        &bob_kept,
        &charlie_out.sender_key,
        &charlie_forwarded,
        0,
        1,
    );
    let s_charlie = symmetric(
        &charlie_out.sender_key,
        &charlie_kept,
        &bob_out.sender_key,
        &bob_forwarded,
        1,
        0,
    );

    // Signature: Alice's correlated strings, namespaced the same way.
    let sig: BTreeMap<(u64, u64), u8> = bob_out
        .alice_key
        .iter()
        .map(|(&s, &b)| ((0u64, s), b))
        .chain(charlie_out.alice_key.iter().map(|(&s, &b)| ((1u64, s), b)))
        .collect();

    let verify_tagged = |claimed: &BTreeMap<(u64, u64), u8>,
                         local: &BTreeMap<(u64, u64), u8>,
                         threshold: f64|
     -> (bool, Rate) {
        let flat_claim: BTreeMap<u64, u8> =
            claimed.iter().map(|(&(t, s), &b)| (t * n + s, b)).collect();
        let flat_local: BTreeMap<u64, u8> =
            local.iter().map(|(&(t, s), &b)| (t * n + s, b)).collect();
        match dss_verify(&flat_claim, &flat_local, threshold) {
            Ok((ok, r)) => (ok, r),
            Err(_) => (false, Rate::default()),
        }
    };

    let (bob_accept, bob_mismatch) = verify_tagged(&sig, &s_bob, s_a);
    let (charlie_accept, charlie_mismatch) = verify_tagged(&sig, &s_charlie, s_v);
    tallies.rates.insert("sig_mismatch_bob".into(), bob_mismatch);
    tallies
        .rates
        .insert("sig_mismatch_charlie".into(), charlie_mismatch);
    tallies.legit_accept = bob_accept && charlie_accept;
    transcript.push(TranscriptEvent::Decision {
        party: "bob".into(),
        label: "accept_signature".into(),
        value: serde_json::json!(bob_accept),
    });
    transcript.push(TranscriptEvent::Decision {
        party: "charlie".into(),
        label: "accept_forwarded".into(),
        value: serde_json::json!(charlie_accept),
    });

    if let Some(attack) = &attack {
        // Eve forges a signature from her per-slot knowledge, guessing the
        // positions she missed.
        let mut forged: BTreeMap<(u64, u64), u8> = BTreeMap::new();
        let mut knowledge = Rate::default();
        for (tag, link, out) in [(0u64, &bob, bob_out), (1u64, &charlie, charlie_out)] {
            for &slot in out.alice_key.keys() {
                let genuine = link.eve_claims.get(&slot).copied();
                forged.insert(
                    (tag, slot),
                    genuine.unwrap_or_else(|| eve_rng.random::<bool>() as u8),
                );
            }
        }
        for (&(tag, slot), &bit) in &s_bob {
            let link = if tag == 0 { &bob } else { &charlie };
            knowledge.add(link.eve_claims.get(&slot) == Some(&bit));
        }
        tallies.eve_knowledge = Some(knowledge);
        let (forge_ok, forge_mismatch) = verify_tagged(&forged, &s_bob, s_a);
        tallies.rates.insert("forge_mismatch".into(), forge_mismatch);
        tallies.forge_accept = Some(forge_ok);
        transcript.push(TranscriptEvent::Interception {
            attack: attack.kind_name().into(),
            rounds: bob.eve_claims.len() as u64 + charlie.eve_claims.len() as u64,
        });
    }

    transcript.record_broadcasts(&classical);
    transcript.set_output("tallies", &tallies);
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProtocolId;
    use crate::harness::derive_stream;
    use crate::metrics::compute_metrics;

    #[test]
    fn kgp_detection_count_tracks_the_thinning_model() {
        let mut rng = derive_stream(1, "kgp");
        let bits: Vec<u8> = (0..100_000u64).map(|i| (i % 2) as u8).collect();
        // mu 0.5, eta 0.8, 3 dB loss.
        let p = 0.5 * 0.8 * 10f64.powf(-0.3);
        let out = dss_kgp(&bits, p, 0.0, 0.0, &mut rng).unwrap();
        let got = out.alice_key.len() as f64;
        let expected = 100_000.0 * p;
        assert!(
            (got - expected).abs() / expected < 0.05,
            "detections {got} vs {expected}"
        );
        assert_eq!(out.qber, 0.0);
        assert_eq!(out.sender_key, out.alice_key);
    }

    #[test]
    fn kgp_flip_noise_shows_up_in_the_estimate() {
        let mut rng = derive_stream(2, "kgp-noise");
        let bits: Vec<u8> = (0..200_000u64).map(|i| ((i * 7) % 2) as u8).collect();
        let out = dss_kgp(&bits, 0.9, 0.02, 0.2, &mut rng).unwrap();
        assert!((out.qber - 0.02).abs() < 0.005, "qber {}", out.qber);
    }

    #[test]
    fn kgp_zero_detections_abort() {
        let mut rng = derive_stream(3, "kgp-zero");
        let bits = vec![0u8; 100];
        assert!(matches!(
            dss_kgp(&bits, 0.0, 0.0, 0.0, &mut rng),
            Err(SimError::Abort(_))
        ));
    }

    #[test]
    fn exchange_halves_partitions_positions() {
        let mut rng = derive_stream(4, "mask");
        let positions: BTreeSet<u64> = (0..10_000u64).collect();
        let (kept, forwarded) = dss_exchange_halves(&positions, &mut rng);
        assert_eq!(kept.len() + forwarded.len(), positions.len());
        assert!(kept.is_disjoint(&forwarded));
        let frac = forwarded.len() as f64 / positions.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "forward fraction {frac}");
    }

    #[test]
    fn uniform_random_forgery_is_rejected() {
        let mut rng = derive_stream(5, "forge");
        let local: BTreeMap<u64, u8> = (0..10_000u64)
            .map(|i| (i, rng.random::<bool>() as u8))
            .collect();
        let forged: BTreeMap<u64, u8> = local
            .keys()
            .map(|&k| (k, rng.random::<bool>() as u8))
            .collect();
        let (ok, rate) = dss_verify(&forged, &local, 0.05).unwrap();
        assert!(!ok);
        assert!((rate.rate() - 0.5).abs() < 0.02, "mismatch {}", rate.rate());
    }

    #[test]
    fn honest_run_accepts_with_zero_mismatch() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsDss);
        cfg.n_rounds = 20_000;
        let ctx = RunCtx::new(&cfg, 9);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.acceptance.rate(), 1.0);
        assert_eq!(m.rates["sig_mismatch_bob"].num, 0);
        assert_eq!(m.rates["sig_mismatch_charlie"].num, 0);
    }

    #[test]
    fn blinding_equalizes_eve_and_alice() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsDss);
        cfg.n_rounds = 20_000;
        cfg.attack = Some(AttackSpec::blind_control_full_strength());
        let ctx = RunCtx::new(&cfg, 10);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.acceptance.rate(), 1.0);
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.forge_success.unwrap().rate(), 1.0);
        assert_eq!(m.rates["forge_mismatch"].num, 0);
    }

    #[test]
    fn full_strength_trojan_forges_exactly() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsDss);
        cfg.n_rounds = 20_000;
        cfg.attack = Some(AttackSpec::trojan_full_strength());
        let ctx = RunCtx::new(&cfg, 11);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.acceptance.rate(), 1.0);
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.forge_success.unwrap().rate(), 1.0);
        // Eve's mismatch equals honest Alice's (both zero, noiseless).
        assert_eq!(m.rates["forge_mismatch"].num, m.rates["sig_mismatch_bob"].num);
    }

    #[test]
    fn isolation_chain_defeats_the_trojan_probe() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsDss);
        cfg.n_rounds = 10_000;
        cfg.attack = Some(AttackSpec::trojan_full_strength());
        cfg.countermeasures.isolation = Some(IsolationConfig {
            components: vec![
                crate::config::IsolationComponentConfig {
                    name: "attenuator".into(),
                    attenuation_db: 30.0,
                    direction: crate::countermeasures::ComponentDirection::Bidirectional,
                },
                crate::config::IsolationComponentConfig {
                    name: "isolator".into(),
                    attenuation_db: 80.0,
                    direction: crate::countermeasures::ComponentDirection::ReturnPathOnly,
                },
            ],
            modulator_reflectivity_db: 30.0,
            max_injected_power_w: 12.8,
        });
        let ctx = RunCtx::new(&cfg, 12);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        // n_bar = 1e-6: the probe essentially never reads.
        assert!(m.eve_knowledge.unwrap().rate() < 1e-3);
        assert_eq!(m.forge_success.unwrap().rate(), 0.0);
    }

    #[test]
    fn watchdog_aborts_the_trojan_run() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsDss);
        cfg.n_rounds = 5_000;
        cfg.attack = Some(AttackSpec::trojan_full_strength());
        cfg.countermeasures.watchdog = true;
        cfg.countermeasures.watchdog_tap_db = 10.0;
        let ctx = RunCtx::new(&cfg, 13);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert!(m.alarms > 0);
        assert_eq!(m.acceptance.rate(), 0.0);
    }
}
