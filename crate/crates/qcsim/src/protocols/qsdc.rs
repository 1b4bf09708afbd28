//! DL04 quantum secure direct communication with single-photon frequency
//! encoding.
//!
//! Alice sends BB84 states to Bob. A tapped portion feeds Bob's control
//! module for the forward channel check; the rest returns through Bob's
//! encoder, which applies U (flip) or I per slot. Alice measures in her
//! preparation basis, so U/I decodes deterministically. Check rounds verify
//! the backward channel; message rounds carry bits on the spectrum of the
//! U/I sequence: bit b modulates a square wave at f_b cycles per block, and
//! the decoder picks the stronger of the two discrete Fourier magnitudes,
//! with lost slots contributing zero.

use rand::Rng;

use crate::attacks::{AttackSpec, TrojanProbe};
use crate::countermeasures::{calibrate, isolation_budget};
use crate::error::SimError;
use crate::harness::{ClassicalChannel, ProtocolTranscript, TranscriptEvent};
use crate::metrics::{Rate, Tallies};
use crate::photonic::{FlipOp, OpticalPulse, Outcome};
use crate::protocols::common::{
    apply_flip_noise, detector_from_config, faked_energy, measure_pulse, Bb84Basis, Bb84Symbol,
};
use crate::protocols::RunCtx;

/// Infer Bob's operation from a preparation-basis measurement: the prepared
/// state means I, the orthogonal state means U.
pub fn dl04_decode(prepared: Bb84Symbol, measured: Outcome) -> FlipOp {
    if measured.bit() == prepared.bit {
        FlipOp::I
    } else {
        FlipOp::U
    }
}

/// Square-wave flip schedule for one message bit: `true` entries mean U.
/// Bit b runs at `freq` cycles per block of `block_len` slots.
pub fn freq_encode(bit: u8, f0: u32, f1: u32, block_len: u32) -> Vec<FlipOp> {
    let freq = if bit == 0 { f0 } else { f1 };
    (0..block_len)
        .map(|s| {
            let phase = (s * freq) % block_len;
            if phase * 2 < block_len {
                FlipOp::U
            } else {
                FlipOp::I
            }
        })
        .collect()
}

/// Decode one block from the +-1 sequence (0 at lost slots): compare the
/// discrete Fourier magnitudes at the two signal frequencies. An exact tie
/// is flagged as a decode error.
pub fn freq_decode(samples: &[f64], f0: u32, f1: u32) -> Result<u8, SimError> {
    let magnitude = |freq: u32| -> f64 {
        let n = samples.len() as f64;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (s, &x) in samples.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let angle = -2.0 * std::f64::consts::PI * freq as f64 * s as f64 / n;
            re += x * angle.cos();
            im += x * angle.sin();
        }
        (re * re + im * im).sqrt()
    };
    let (m0, m1) = (magnitude(f0), magnitude(f1));
    if m0 == m1 {
        return Err(SimError::Domain(
            "spectral magnitudes tie; block undecodable".into(),
        ));
    }
    Ok((m1 > m0) as u8)
}

/// Round roles assigned by Bob after reception.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RoundUse {
    BackwardCheck,
    Message(u64),
}

pub fn run(ctx: &RunCtx) -> Result<ProtocolTranscript, SimError> {
    let cfg = ctx.cfg;
    let mut transcript = ProtocolTranscript::new("qsdc_dl04", ctx.seed);
    let mut classical = ClassicalChannel::new();
    let mut tallies = Tallies::new();
    let survival = ctx.survival();
    let q = &cfg.qsdc;
    let block = q.block_len as usize;
    let message_slots = q.message_bits as u64 * q.block_len as u64;

    let mut alice_rng = ctx.rng("alice");
    let mut bob_rng = ctx.rng("bob");
    let mut chan_rng = ctx.rng("channel");
    let mut eve_rng = ctx.rng("eve");
    let attack = cfg.attack.clone();

    // Bob's message: seeded bits.
    let mut msg_rng = ctx.rng("message");
    let message: Vec<u8> = (0..q.message_bits)
        .map(|_| msg_rng.random::<bool>() as u8)
        .collect();
    let schedules: Vec<Vec<FlipOp>> = message
        .iter()
        .map(|&b| freq_encode(b, q.f0, q.f1, q.block_len))
        .collect();

    // Enough rounds to fill the message after tap and check sampling, plus
    // the configured budget.
    let n = cfg
        .n_rounds
        .max((message_slots as f64 / (1.0 - q.forward_check_fraction) * 1.3) as u64 + 64);

    let mut fwd_check = Rate::default(); // control-module matched-basis errors
    let mut bwd_check = Rate::default(); // backward check errors
    let mut eve_ops_known = 0u64;
    let mut bob_ops_total = 0u64;

    // Alice's decoded +-1 samples per message slot index (0 = lost).
    let mut samples = vec![0.0f64; message_slots as usize];
    // Eve's own decoded samples when she proxies the line.
    let mut eve_samples = vec![0.0f64; message_slots as usize];

    let trojan_probe = match &attack {
        Some(AttackSpec::Trojan {
            injected_power_w,
            rep_rate_hz,
            readout_threshold,
        }) => {
            let default_chain = crate::config::IsolationConfig::default();
            let chain = cfg
                .countermeasures
                .isolation
                .as_ref()
                .unwrap_or(&default_chain);
            let budget = isolation_budget(
                *injected_power_w,
                chain,
                cfg.source.wavelength_nm,
                *rep_rate_hz,
            )?;
            tallies.set_value("trojan_n_bar", budget.mean_photons_per_window);
            Some(TrojanProbe::new(
                budget.mean_photons_per_window,
                *readout_threshold,
            ))
        }
        _ => None,
    };

    let blinding = matches!(attack, Some(AttackSpec::BlindControl { .. }));
    let intercept = matches!(attack, Some(AttackSpec::InterceptResend { .. }));

    let mut next_message_slot = 0u64;

    for _round in 0..n {
        let prepared = Bb84Symbol::random(&mut alice_rng);

        // Forward channel. Under blinding Eve intercept-resends with faked
        // states; under intercept-resend she measures and resends quantum
        // states; otherwise the pulse flies untouched.
        let mut eve_fwd: Option<(Bb84Basis, Outcome)> = None;
        let arrived: Option<Bb84Symbol> = if blinding || intercept {
            let mut pulse =
                OpticalPulse::qubit(prepared.state(), cfg.source.mu_signal, cfg.source.wavelength_nm);
            if pulse.realize(&mut eve_rng) >= 1 {
                let basis = Bb84Basis::random(&mut eve_rng);
                let (outcome, _) = prepared.state().measure(0, basis.meas(), &mut eve_rng);
                eve_fwd = Some((basis, outcome));
                Some(Bb84Symbol::from_outcome(basis, outcome))
            } else {
                None
            }
        } else {
            let pulse =
                OpticalPulse::qubit(prepared.state(), cfg.source.mu_signal, cfg.source.wavelength_nm);
            let pulse = apply_flip_noise(pulse, cfg.channel.flip_prob, &mut chan_rng);
            let mut pulse = crate::harness::apply_loss(pulse, survival, &mut chan_rng);
            (pulse.realize(&mut chan_rng) >= 1).then(|| {
                // Bob holds the photon undetected; represent its (possibly
                // noise-flipped) state by the symbol it encodes.
                match &pulse.payload {
                    crate::photonic::PulsePayload::Qubit(s) => (0..4)
                        .map(Bb84Symbol::from_index)
                        .find(|sym| s.approx_eq(&sym.state().canonical(), 1e-9))
                        .unwrap_or(prepared),
                    _ => prepared,
                }
            })
        };

        let Some(at_bob) = arrived else { continue };

        // Bob's tap: a fraction goes to the control module (forward check).
        if bob_rng.random::<f64>() < q.forward_check_fraction {
            if blinding {
                // The control module is a passive BB84 station: under faked
                // states it clicks in Eve's basis with her outcome, which
                // reproduces her measurement of the true state.
                let (cm_basis, cm_outcome) = eve_fwd.unwrap();
                if cm_basis == prepared.basis {
                    fwd_check.add(cm_outcome.bit() != prepared.bit);
                }
            } else {
                let cm_basis = Bb84Basis::random(&mut bob_rng);
                let detected =
                    crate::photonic::thin_photons(1, cfg.detectors.eta, &mut bob_rng) >= 1;
                if detected {
                    let (o, _) = at_bob.state().measure(0, cm_basis.meas(), &mut bob_rng);
                    if cm_basis == prepared.basis {
                        fwd_check.add(o.bit() != prepared.bit);
                    }
                }
            }
            continue;
        }

        // Encoding: backward-check rounds get a random op, message rounds
        // follow the schedule.
        let (round_use, op) = if bob_rng.random::<f64>() < q.backward_check_fraction
            || next_message_slot >= message_slots
        {
            let op = if bob_rng.random::<bool>() { FlipOp::U } else { FlipOp::I };
            (RoundUse::BackwardCheck, op)
        } else {
            let idx = next_message_slot as usize;
            next_message_slot += 1;
            let op = schedules[idx / block][idx % block];
            (RoundUse::Message(idx as u64), op)
        };
        bob_ops_total += 1;

        // Trojan probe on Bob's encoding modulator.
        let mut eve_op: Option<FlipOp> = None;
        if let Some(probe) = &trojan_probe {
            if probe.read(&mut eve_rng) {
                eve_op = Some(op);
            }
        }
        if blinding {
            // Eve measures her own bright pulse after Bob's modulator in the
            // basis she prepared it, reading the op with certainty.
            eve_op = Some(op);
        }

        // Backward channel to Alice.
        let alice_result: Option<Outcome> = if blinding {
            // Faked states toward Alice's actively chosen (preparation)
            // basis: click only when Eve's basis matches.
            let (eve_basis, eve_outcome) = eve_fwd.unwrap();
            if eve_basis == prepared.basis {
                let encoded = if op == FlipOp::U {
                    eve_outcome.flipped()
                } else {
                    eve_outcome
                };
                Some(encoded)
            } else {
                None
            }
        } else {
            let encoded_state = at_bob.state().apply_flip(op);
            let mut pulse =
                OpticalPulse::qubit(encoded_state, cfg.source.mu_signal, cfg.source.wavelength_nm);
            pulse.photons = Some(1);
            let pulse = apply_flip_noise(pulse, cfg.channel.flip_prob, &mut chan_rng);
            let mut pulse = crate::harness::apply_loss(pulse, survival, &mut chan_rng);
            measure_pulse(
                &mut pulse,
                prepared.basis.meas(),
                cfg.detectors.eta,
                cfg.detectors.dark_prob,
                &mut alice_rng,
            )
        };

        match round_use {
            RoundUse::BackwardCheck => {
                // Bob announces the op on check rounds; Alice compares.
                if let Some(result) = alice_result {
                    let decoded = dl04_decode(prepared, result);
                    bwd_check.add(decoded != op);
                }
            }
            RoundUse::Message(idx) => {
                if let Some(result) = alice_result {
                    let decoded = dl04_decode(prepared, result);
                    samples[idx as usize] = if decoded == FlipOp::U { 1.0 } else { -1.0 };
                }
                if let Some(known) = eve_op {
                    eve_ops_known += 1;
                    eve_samples[idx as usize] = if known == FlipOp::U { 1.0 } else { -1.0 };
                }
            }
        }
    }

    transcript.push(TranscriptEvent::QuantumPhase {
        from: "alice".into(),
        to: "bob".into(),
        rounds: n,
        delivered: bob_ops_total,
    });
    if let Some(attack) = &attack {
        transcript.push(TranscriptEvent::Interception {
            attack: attack.kind_name().into(),
            rounds: n,
        });
    }
    classical.broadcast("bob", "bob/forward_check", "announced outcomes");
    classical.broadcast("bob", "bob/backward_check_ops", "announced ops");

    // Calibration countermeasure at the control module and Alice.
    if let Some(cal) = &cfg.countermeasures.calibration {
        let mut det = detector_from_config(&cfg.detectors, faked_energy(cfg));
        if blinding {
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
            transcript.record_broadcasts(&classical);
            transcript.set_output("tallies", &tallies);
            return Ok(transcript);
        }
    }

    tallies.rates.insert("forward_error".into(), fwd_check);
    tallies.rates.insert("backward_error".into(), bwd_check);
    let forward_pass = fwd_check.rate() <= q.error_threshold;
    let backward_pass = bwd_check.rate() <= q.error_threshold;
    transcript.push(TranscriptEvent::Decision {
        party: "alice".into(),
        label: "forward_check".into(),
        value: serde_json::json!(forward_pass),
    });
    transcript.push(TranscriptEvent::Decision {
        party: "alice".into(),
        label: "backward_check".into(),
        value: serde_json::json!(backward_pass),
    });
    if !(forward_pass && backward_pass) {
        tallies.abort("channel check failed");
    }

    // Message decoding.
    let filled_blocks = (next_message_slot as usize) / block;
    let mut alice_bit_errors = Rate::default();
    let mut eve_bit_errors = Rate::default();
    for b in 0..filled_blocks {
        let window = &samples[b * block..(b + 1) * block];
        match freq_decode(window, q.f0, q.f1) {
            Ok(bit) => alice_bit_errors.add(bit != message[b]),
            Err(_) => alice_bit_errors.add(true),
        }
        if attack.is_some() {
            let window = &eve_samples[b * block..(b + 1) * block];
            match freq_decode(window, q.f0, q.f1) {
                Ok(bit) => eve_bit_errors.add(bit != message[b]),
                Err(_) => eve_bit_errors.add(true),
            }
        }
    }
    tallies.set_count("message_blocks", filled_blocks as u64);
    tallies.rates.insert("message_bit_errors".into(), alice_bit_errors);
    if attack.is_some() {
        // Eve's knowledge: message bits she decodes correctly.
        tallies.eve_knowledge = Some(Rate::new(
            eve_bit_errors.den - eve_bit_errors.num,
            eve_bit_errors.den.max(1),
        ));
        tallies.set_rate("eve_ops_known", eve_ops_known, bob_ops_total.max(1));
    }

    transcript.record_broadcasts(&classical);
    transcript.set_output("message_bits", message.len());
    transcript.set_output("tallies", &tallies);
    Ok(transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProtocolId, ScenarioConfig};
    use crate::harness::derive_stream;
    use crate::metrics::compute_metrics;

    #[test]
    fn decode_rule() {
        let h = Bb84Symbol::new(Bb84Basis::Z, 0);
        assert_eq!(dl04_decode(h, Outcome::Plus), FlipOp::I);
        assert_eq!(dl04_decode(h, Outcome::Minus), FlipOp::U);
        // Oracle: apply_flip on |+> gives |->, so a U round measured in X
        // lands on the orthogonal outcome.
        let plus = Bb84Symbol::new(Bb84Basis::X, 0);
        let flipped = plus.state().apply_flip(FlipOp::U);
        let mut rng = derive_stream(1, "dl04");
        let (o, _) = flipped.measure(0, MeasBasis::X, &mut rng);
        assert_eq!(o, Outcome::Minus);
        assert_eq!(dl04_decode(plus, o), FlipOp::U);
    }

    #[test]
    fn clean_blocks_decode_exactly() {
        for bit in [0u8, 1] {
            let schedule = freq_encode(bit, 4, 9, 256);
            let samples: Vec<f64> = schedule
                .iter()
                .map(|op| if *op == FlipOp::U { 1.0 } else { -1.0 })
                .collect();
            assert_eq!(freq_decode(&samples, 4, 9).unwrap(), bit);
        }
    }

    #[test]
    fn all_slots_lost_is_a_decode_error() {
        let samples = vec![0.0; 256];
        assert!(freq_decode(&samples, 4, 9).is_err());
    }

    #[test]
    fn half_loss_still_decodes_error_free() {
        let mut rng = derive_stream(2, "dl04-loss");
        let mut failures = 0;
        for trial in 0..100 {
            let mut errors = 0;
            for bit_idx in 0..64 {
                let bit = ((trial + bit_idx) % 2) as u8;
                let schedule = freq_encode(bit, 4, 9, 256);
                let samples: Vec<f64> = schedule
                    .iter()
                    .map(|op| {
                        if rng.random::<f64>() < 0.5 {
                            0.0
                        } else if *op == FlipOp::U {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect();
                if freq_decode(&samples, 4, 9).unwrap_or(2) != bit {
                    errors += 1;
                }
            }
            if errors > 0 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures}/100 trials had message errors");
    }

    fn honest_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(ProtocolId::QsdcDl04);
        cfg.n_rounds = 25_000;
        cfg
    }

    #[test]
    fn honest_run_transfers_the_message_exactly() {
        let cfg = honest_cfg();
        let ctx = RunCtx::new(&cfg, 3);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.rates["forward_error"].num, 0);
        assert_eq!(m.rates["backward_error"].num, 0);
        assert_eq!(m.rates["message_bit_errors"].num, 0);
        assert_eq!(m.counts["message_blocks"], 64);
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn intercept_resend_trips_the_forward_check() {
        let mut cfg = honest_cfg();
        cfg.attack = Some(AttackSpec::intercept_resend_default());
        let ctx = RunCtx::new(&cfg, 4);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        let fwd = m.rates["forward_error"].rate();
        assert!((fwd - 0.25).abs() < 0.01, "forward error {fwd}");
        assert_eq!(m.acceptance.rate(), 0.0, "check must fail at 0.1");
    }

    #[test]
    fn loose_threshold_lets_intercept_resend_slip_through() {
        let mut cfg = honest_cfg();
        cfg.attack = Some(AttackSpec::intercept_resend_default());
        cfg.qsdc.error_threshold = 0.3;
        let ctx = RunCtx::new(&cfg, 5);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.acceptance.rate(), 1.0, "0.25 passes a 0.3 threshold");
    }

    #[test]
    fn blinding_reads_the_message_without_errors() {
        let mut cfg = honest_cfg();
        cfg.attack = Some(AttackSpec::blind_control_full_strength());
        let ctx = RunCtx::new(&cfg, 6);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.rates["forward_error"].num, 0, "no added errors");
        assert_eq!(m.rates["backward_error"].num, 0);
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.rates["message_bit_errors"].num, 0);
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn trojan_on_the_encoder_reads_every_op() {
        let mut cfg = honest_cfg();
        cfg.attack = Some(AttackSpec::trojan_full_strength());
        let ctx = RunCtx::new(&cfg, 7);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.rates["eve_ops_known"].rate(), 1.0);
        assert_eq!(m.rates["message_bit_errors"].num, 0);
        assert_eq!(m.acceptance.rate(), 1.0);
    }
}
