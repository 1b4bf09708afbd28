//! Source-independent quantum random number generation.
//!
//! An untrusted source feeds |+> pulses into a trusted measurement station:
//! a 2:98 beam splitter passively picks the X (error estimation) or Z (bit
//! generation) basis, and a single time-multiplexed detector assigns one of
//! four slots: 1 = X,|+>; 2 = X,|-> (errors); 3 = Z,|H> (bit 0);
//! 4 = Z,|V> (bit 1). The slot-2 fraction of X detections estimates e_bx,
//! and the Z bits are compressed to n_z * (1 - h2(e_bx + eps)) bits by
//! seeded universal hashing.

use rand::Rng;

use crate::attacks::AttackSpec;
use crate::countermeasures::calibrate;
use crate::error::SimError;
use crate::harness::{derive_stream, ProtocolTranscript, RandomStream, TranscriptEvent};
use crate::metrics::{Rate, Tallies};
use crate::photonic::{
    detect, IncidentLight, MeasBasis, OpticalPulse, Outcome, PureState,
};
use crate::protocols::common::{detector_from_config, measure_pulse};
use crate::protocols::RunCtx;

/// Detection slot of the time-multiplexed station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    XPlus,
    XMinus,
    ZH,
    ZV,
}

impl Slot {
    pub fn index(self) -> usize {
        match self {
            Slot::XPlus => 0,
            Slot::XMinus => 1,
            Slot::ZH => 2,
            Slot::ZV => 3,
        }
    }
}

/// Station tallies across a run.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct QrngTally {
    pub slots: [u64; 4],
    /// Raw bits in detection order: slot 3 yields 0, slot 4 yields 1.
    pub raw_bits: Vec<u8>,
    pub multi_slot_flags: u64,
}

impl QrngTally {
    pub fn n_x(&self) -> u64 {
        self.slots[0] + self.slots[1]
    }

    pub fn n_z(&self) -> u64 {
        self.slots[2] + self.slots[3]
    }

    pub fn e_bx(&self) -> Option<f64> {
        let n_x = self.n_x();
        (n_x > 0).then(|| self.slots[1] as f64 / n_x as f64)
    }
}

/// One honest station round: route the squashed qubit at BS1, then project
/// in the chosen arm.
pub fn qrng_round(
    pulse: &mut OpticalPulse,
    x_fraction: f64,
    eta: f64,
    dark_prob: f64,
    rng: &mut RandomStream,
) -> Option<Slot> {
    let to_x = rng.random::<f64>() < x_fraction;
    let basis = if to_x { MeasBasis::X } else { MeasBasis::Z };
    let outcome = measure_pulse(pulse, basis, eta, dark_prob, rng)?;
    Some(match (to_x, outcome) {
        (true, Outcome::Plus) => Slot::XPlus,
        (true, Outcome::Minus) => Slot::XMinus,
        (false, Outcome::Plus) => Slot::ZH,
        (false, Outcome::Minus) => Slot::ZV,
    })
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Extraction output.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QrngOutput {
    pub raw_len: u64,
    pub e_bx: f64,
    pub min_entropy_estimate: f64,
    pub extracted: Vec<u8>,
}

/// Finalize a run: estimate e_bx, bound the extractable entropy by
/// n_z * (1 - h2(e_bx + eps_stat)), and extract with seeded universal
/// hashing. Aborts when no X-basis estimate exists or e_bx reaches 1/2.
pub fn qrng_finalize(
    tally: &QrngTally,
    epsilon_stat: Option<f64>,
    extract: bool,
    seed: u64,
) -> Result<QrngOutput, SimError> {
    let n_x = tally.n_x();
    if n_x == 0 {
        return Err(SimError::Abort(
            "no X-basis detections; e_bx cannot be estimated".into(),
        ));
    }
    let e_bx = tally.e_bx().unwrap();
    if e_bx >= 0.5 {
        return Err(SimError::Abort(format!(
            "estimated error rate {e_bx} leaves no extractable randomness"
        )));
    }
    let eps = epsilon_stat.unwrap_or_else(|| 3.0 * (e_bx * (1.0 - e_bx) / n_x as f64).sqrt());
    let bound = (e_bx + eps).min(0.5);
    let min_entropy = tally.n_z() as f64 * (1.0 - binary_entropy(bound));
    let extracted = if extract {
        toeplitz_extract(&tally.raw_bits, min_entropy, seed)
    } else {
        Vec::new()
    };
    Ok(QrngOutput {
        raw_len: tally.raw_bits.len() as u64,
        e_bx,
        min_entropy_estimate: min_entropy,
        extracted,
    })
}

/// Block-wise Toeplitz hashing over GF(2) with a seeded random strip. Each
/// input block of `BLOCK` bits compresses to floor(BLOCK * ratio) bits.
fn toeplitz_extract(raw: &[u8], min_entropy: f64, seed: u64) -> Vec<u8> {
    const BLOCK: usize = 512;
    if raw.is_empty() || min_entropy <= 0.0 {
        return Vec::new();
    }
    let ratio = (min_entropy / raw.len() as f64).min(1.0);
    let mut rng = derive_stream(seed, "qrng/toeplitz");
    // One shared strip long enough for the widest block.
    let strip: Vec<u8> = (0..2 * BLOCK).map(|_| rng.random::<bool>() as u8).collect();
    let mut out = Vec::with_capacity((raw.len() as f64 * ratio) as usize);
    for chunk in raw.chunks(BLOCK) {
        let out_len = (chunk.len() as f64 * ratio).floor() as usize;
        for row in 0..out_len {
            let mut parity = 0u8;
            for (col, &bit) in chunk.iter().enumerate() {
                // Toeplitz: entry (row, col) depends only on row - col.
                parity ^= strip[BLOCK + row - col] & bit;
            }
            out.push(parity);
        }
    }
    out
}

pub fn run(ctx: &RunCtx) -> Result<ProtocolTranscript, SimError> {
    let cfg = ctx.cfg;
    let mut transcript = ProtocolTranscript::new("si_qrng", ctx.seed);
    let mut tallies = Tallies::new();
    let n = cfg.n_rounds;
    let x_fraction = cfg.qrng.x_fraction;

    let mut station_rng = ctx.rng("station");
    let mut eve_rng = ctx.rng("eve");
    let attack = cfg.attack.clone();

    let fake_e = crate::protocols::common::faked_energy(cfg);
    let mut detector = detector_from_config(&cfg.detectors, fake_e);
    if !cfg.detectors.blindable {
        detector.p_blind_w = f64::INFINITY;
    }

    let mut tally = QrngTally::default();
    // Which raw bits Eve dictated and knows.
    let mut eve_known = Rate::default();

    match &attack {
        None => {
            for _ in 0..n {
                let mut pulse =
                    OpticalPulse::qubit(PureState::plus(), cfg.source.mu_signal, cfg.source.wavelength_nm);
                if let Some(slot) = qrng_round(
                    &mut pulse,
                    x_fraction,
                    detector.eta,
                    detector.dark_prob,
                    &mut station_rng,
                ) {
                    tally.slots[slot.index()] += 1;
                    match slot {
                        Slot::ZH => tally.raw_bits.push(0),
                        Slot::ZV => tally.raw_bits.push(1),
                        _ => {}
                    }
                }
            }
        }
        Some(AttackSpec::BlindControl { cw_power_w, faked_energy_j }) => {
            // CW illumination first; every later click is a deterministic
            // energy comparison at the slot Eve times her pulse into.
            detect(&mut detector, &IncidentLight::cw(*cw_power_w), &mut station_rng);
            for _ in 0..n {
                // Eve mimics the honest X fraction so the estimator stays
                // populated while every Z bit is hers.
                if eve_rng.random::<f64>() < x_fraction {
                    // Bright pulse timed into slot 1 (correct X detection).
                    let hit = detect(
                        &mut detector,
                        &IncidentLight::pulse_energy(*faked_energy_j),
                        &mut station_rng,
                    );
                    if hit {
                        tally.slots[Slot::XPlus.index()] += 1;
                    }
                } else {
                    let bit = eve_rng.random::<bool>() as u8;
                    let hit = detect(
                        &mut detector,
                        &IncidentLight::pulse_energy(*faked_energy_j),
                        &mut station_rng,
                    );
                    if hit {
                        let slot = if bit == 0 { Slot::ZH } else { Slot::ZV };
                        tally.slots[slot.index()] += 1;
                        tally.raw_bits.push(bit);
                        eve_known.add(true);
                    }
                }
            }
        }
        Some(AttackSpec::Wavelength { honest_fraction, lambda_z_nm, .. }) => {
            // Eve is the source: she sends single-photon-level pulses at a
            // wavelength where BS1 routes everything into the Z arm, with
            // the polarization carrying her chosen bit, and keeps a trickle
            // of honest pulses so e_bx still reads zero.
            for _ in 0..n {
                if eve_rng.random::<f64>() < *honest_fraction {
                    let mut pulse = OpticalPulse::qubit(
                        PureState::plus(),
                        cfg.source.mu_signal,
                        cfg.source.wavelength_nm,
                    );
                    if let Some(slot) = qrng_round(
                        &mut pulse,
                        x_fraction,
                        detector.eta,
                        detector.dark_prob,
                        &mut station_rng,
                    ) {
                        tally.slots[slot.index()] += 1;
                        match slot {
                            Slot::ZH => {
                                tally.raw_bits.push(0);
                                eve_known.add(false);
                            }
                            Slot::ZV => {
                                tally.raw_bits.push(1);
                                eve_known.add(false);
                            }
                            _ => {}
                        }
                    }
                } else {
                    let bit = eve_rng.random::<bool>() as u8;
                    let state = if bit == 0 {
                        PureState::horizontal()
                    } else {
                        PureState::vertical()
                    };
                    let mut pulse =
                        OpticalPulse::qubit(state, cfg.source.mu_signal, *lambda_z_nm);
                    // At the attack wavelength BS1 sends everything to Z.
                    if let Some(outcome) = measure_pulse(
                        &mut pulse,
                        MeasBasis::Z,
                        detector.eta,
                        detector.dark_prob,
                        &mut station_rng,
                    ) {
                        let slot = if outcome == Outcome::Plus { Slot::ZH } else { Slot::ZV };
                        tally.slots[slot.index()] += 1;
                        tally.raw_bits.push(outcome.bit());
                        eve_known.add(outcome.bit() == bit);
                    }
                }
            }
        }
        Some(other) => {
            return Err(SimError::Runtime(format!(
                "attack `{}` is not implemented for si_qrng",
                other.kind_name()
            )))
        }
    }

    transcript.push(TranscriptEvent::QuantumPhase {
        from: "source".into(),
        to: "station".into(),
        rounds: n,
        delivered: tally.slots.iter().sum(),
    });
    if let Some(attack) = &attack {
        transcript.push(TranscriptEvent::Interception {
            attack: attack.kind_name().into(),
            rounds: n,
        });
    }

    // Real-time calibration catches the blinded detector.
    if let Some(cal) = &cfg.countermeasures.calibration {
        let mut cal_rng = ctx.rng("calibration/station");
        if calibrate(&mut detector, cal, &mut cal_rng) {
            transcript.push(TranscriptEvent::Alarm {
                party: "station".into(),
                detail: "calibration found a blinded detector".into(),
            });
            tallies.alarm = true;
            tallies.abort("calibration alarm");
            transcript.set_output("tallies", &tallies);
            return Ok(transcript);
        }
    }

    for (i, s) in tally.slots.iter().enumerate() {
        tallies.set_count(&format!("slot{}", i + 1), *s);
    }
    tallies.set_count("multi_slot_flags", tally.multi_slot_flags);
    tallies.set_rate("x_fraction", tally.n_x(), tally.n_x() + tally.n_z());
    tallies.set_rate("e_bx", tally.slots[1], tally.n_x().max(1));

    match qrng_finalize(&tally, cfg.qrng.epsilon_stat, cfg.qrng.extract, ctx.seed) {
        Ok(output) => {
            tallies.set_value("min_entropy", output.min_entropy_estimate);
            tallies.set_count("raw_bits", output.raw_len);
            tallies.set_count("extracted_bits", output.extracted.len() as u64);
            if !output.extracted.is_empty() {
                let ones: u64 = output.extracted.iter().map(|&b| b as u64).sum();
                tallies.set_rate("output_ones", ones, output.extracted.len() as u64);
            }
            transcript.set_output("extracted_bits_prefix", hex_prefix(&output.extracted, 64));
        }
        Err(SimError::Abort(reason)) => {
            transcript.push(TranscriptEvent::Decision {
                party: "station".into(),
                label: "abort".into(),
                value: serde_json::json!(reason),
            });
            tallies.abort(&reason);
        }
        Err(e) => return Err(e),
    }

    if attack.is_some() {
        tallies.eve_knowledge = Some(eve_known);
    }
    transcript.set_output("tallies", &tallies);
    Ok(transcript)
}

fn hex_prefix(bits: &[u8], n: usize) -> String {
    bits.iter()
        .take(n)
        .map(|b| char::from_digit(*b as u32, 10).unwrap())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProtocolId, ScenarioConfig};
    use crate::metrics::compute_metrics;

    #[test]
    fn entropy_bound_edges() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-12);
        let tally = QrngTally {
            slots: [10, 0, 500, 500],
            raw_bits: vec![0; 1000],
            multi_slot_flags: 0,
        };
        // e_bx = 0 with eps_stat = 0 gives the full n_z.
        let out = qrng_finalize(&tally, Some(0.0), false, 1).unwrap();
        assert_eq!(out.min_entropy_estimate, 1000.0);
    }

    #[test]
    fn half_error_rate_aborts() {
        let tally = QrngTally {
            slots: [5, 5, 100, 100],
            raw_bits: vec![0; 200],
            multi_slot_flags: 0,
        };
        assert!(matches!(
            qrng_finalize(&tally, Some(0.0), false, 1),
            Err(SimError::Abort(_))
        ));
    }

    #[test]
    fn no_x_detections_abort() {
        let tally = QrngTally {
            slots: [0, 0, 100, 100],
            raw_bits: vec![0; 200],
            multi_slot_flags: 0,
        };
        assert!(matches!(
            qrng_finalize(&tally, Some(0.0), false, 1),
            Err(SimError::Abort(_))
        ));
    }

    fn honest_cfg(n: u64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(ProtocolId::SiQrng);
        cfg.n_rounds = n;
        cfg.source.mu_signal = 0.5;
        cfg
    }

    #[test]
    fn honest_run_statistics() {
        let cfg = honest_cfg(300_000);
        let ctx = RunCtx::new(&cfg, 3);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        // Honest |+> never lands in slot 2.
        assert_eq!(m.counts["slot2"], 0);
        assert_eq!(m.rates["e_bx"].num, 0);
        // X branch fraction tracks the 2:98 splitter.
        let xf = m.rates["x_fraction"].rate();
        assert!((xf - 0.02).abs() < 0.003, "x fraction {xf}");
        // Z outcomes are uniform.
        let (h, v) = (m.counts["slot3"] as f64, m.counts["slot4"] as f64);
        let bias = h / (h + v) - 0.5;
        assert!(bias.abs() < 0.01, "H/V bias {bias}");
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn honest_output_passes_monobit_and_runs_tests() {
        let cfg = honest_cfg(220_000);
        let ctx = RunCtx::new(&cfg, 4);
        let t = run(&ctx).unwrap();
        let bits_str: String =
            serde_json::from_value(t.outputs["extracted_bits_prefix"].clone()).unwrap();
        assert!(!bits_str.is_empty());
        // Statistical tests run on the full output inside the acceptance
        // suite; here we only sanity-check the prefix encoding.
        assert!(bits_str.chars().all(|c| c == '0' || c == '1'));
        let m = compute_metrics(&t);
        let ones = m.rates["output_ones"].rate();
        assert!((ones - 0.5).abs() < 0.01, "output bias {ones}");
    }

    #[test]
    fn blinding_dictates_every_bit_with_clean_estimator() {
        let mut cfg = honest_cfg(100_000);
        cfg.attack = Some(AttackSpec::blind_control_full_strength());
        let ctx = RunCtx::new(&cfg, 5);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.rates["e_bx"].num, 0, "e_bx must stay zero");
        assert_eq!(m.eve_knowledge.unwrap().rate(), 1.0);
        assert_eq!(m.acceptance.rate(), 1.0);
        assert_eq!(m.counts["slot2"], 0);
    }

    #[test]
    fn wavelength_steering_controls_the_bits() {
        let mut cfg = honest_cfg(100_000);
        cfg.attack = Some(AttackSpec::wavelength_full_strength());
        let ctx = RunCtx::new(&cfg, 6);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert_eq!(m.rates["e_bx"].num, 0);
        let knowledge = m.eve_knowledge.unwrap().rate();
        assert!(knowledge >= 0.95, "knowledge {knowledge}");
        assert_eq!(m.acceptance.rate(), 1.0);
    }

    #[test]
    fn calibration_flags_the_blinded_station() {
        let mut cfg = honest_cfg(20_000);
        cfg.detectors.eta = 0.5;
        cfg.attack = Some(AttackSpec::blind_control_full_strength());
        cfg.countermeasures.calibration = Some(crate::config::CalibrationConfig::default());
        let ctx = RunCtx::new(&cfg, 7);
        let t = run(&ctx).unwrap();
        let m = compute_metrics(&t);
        assert!(m.alarms > 0);
        assert_eq!(m.acceptance.rate(), 0.0);
    }
}
