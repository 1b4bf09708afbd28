//! Scenario configuration: schema, defaults, and field-level validation.
//!
//! Scenario files are JSON with nested sections. Unknown fields are
//! rejected, and every run embeds the fully defaulted (resolved) config so
//! reports are reproducible from their own bytes.

use serde::{Deserialize, Serialize};

use crate::attacks::AttackSpec;
use crate::error::{FieldIssue, SimError};
use crate::verdict;

/// The seven protocol variants across the five surveyed primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolId {
    QdsIss,
    QdsDss,
    QssGhz,
    QssSingle,
    SiQrng,
    QsdcDl04,
    Bqc,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 7] = [
        ProtocolId::QdsIss,
        ProtocolId::QdsDss,
        ProtocolId::QssGhz,
        ProtocolId::QssSingle,
        ProtocolId::SiQrng,
        ProtocolId::QsdcDl04,
        ProtocolId::Bqc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolId::QdsIss => "qds_iss",
            ProtocolId::QdsDss => "qds_dss",
            ProtocolId::QssGhz => "qss_ghz",
            ProtocolId::QssSingle => "qss_single",
            ProtocolId::SiQrng => "si_qrng",
            ProtocolId::QsdcDl04 => "qsdc_dl04",
            ProtocolId::Bqc => "bqc",
        }
    }

    /// The primitive this variant belongs to.
    pub fn primitive(self) -> &'static str {
        match self {
            ProtocolId::QdsIss | ProtocolId::QdsDss => "QDS",
            ProtocolId::QssGhz | ProtocolId::QssSingle => "QSS",
            ProtocolId::SiQrng => "SI QRNG",
            ProtocolId::QsdcDl04 => "QSDC",
            ProtocolId::Bqc => "BQC",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ProtocolId::QdsIss => "quantum digital signatures, identical-state-sharing",
            ProtocolId::QdsDss => "quantum digital signatures, different-state-sharing (DPS KGP)",
            ProtocolId::QssGhz => "quantum secret sharing, GHZ entanglement-based",
            ProtocolId::QssSingle => "quantum secret sharing, single-qubit N-party",
            ProtocolId::SiQrng => "source-independent quantum random number generation",
            ProtocolId::QsdcDl04 => "DL04 quantum secure direct communication",
            ProtocolId::Bqc => "blind quantum computing, client-side preparation",
        }
    }
}

impl std::fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantum channel parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Attenuation in dB.
    pub loss_db: f64,
    /// Probability that the encoded qubit (or DPS bit) is flipped in flight.
    pub flip_prob: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            loss_db: 0.0,
            flip_prob: 0.0,
        }
    }
}

/// Decoy class probabilities; must sum to 1.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClassProbs {
    pub signal: f64,
    pub decoy: f64,
    pub vacuum: f64,
}

impl Default for ClassProbs {
    fn default() -> Self {
        Self {
            signal: 0.8,
            decoy: 0.15,
            vacuum: 0.05,
        }
    }
}

/// Source parameters for weak-coherent-pulse transmitters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub class_probs: ClassProbs,
    pub wavelength_nm: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mu_signal: 0.5,
            mu_decoy: 0.1,
            class_probs: ClassProbs::default(),
            wavelength_nm: 1550.0,
        }
    }
}

/// Receiver detector parameters. `e_click_ratio` sets the blinded-mode click
/// threshold as a fraction of the adversary's faked-pulse energy.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub eta: f64,
    pub dark_prob: f64,
    pub p_blind_w: f64,
    pub e_click_ratio: f64,
    pub blindable: bool,
    /// Receiver beam splitter wavelength response as (nm, transmittance
    /// toward the Z arm) points; `None` means flat 50:50.
    pub bs_table: Option<Vec<(f64, f64)>>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            dark_prob: 0.0,
            p_blind_w: 1e-6,
            e_click_ratio: 0.75,
            blindable: true,
            bs_table: None,
        }
    }
}

/// One element of a Trojan-horse isolation chain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IsolationComponentConfig {
    pub name: String,
    pub attenuation_db: f64,
    #[serde(default)]
    pub direction: crate::countermeasures::ComponentDirection,
}

/// Isolation chain between a modulator and the channel port.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IsolationConfig {
    pub components: Vec<IsolationComponentConfig>,
    pub modulator_reflectivity_db: f64,
    pub max_injected_power_w: f64,
}

impl Default for IsolationConfig {
    fn default() -> Self {
        Self {
            components: Vec::new(),
            modulator_reflectivity_db: 0.0,
            max_injected_power_w: 12.8,
        }
    }
}

/// Wavelength filter at a receiver input.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub passband_nm: (f64, f64),
    pub stopband_extinction_db: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            passband_nm: (1549.0, 1551.0),
            stopband_extinction_db: 60.0,
        }
    }
}

/// Real-time detector calibration with a local test source.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Fraction of slots used for local test pulses.
    pub test_rate: f64,
    pub batch_size: u32,
    /// Minimum clicks per batch below which blinding is declared.
    pub min_clicks: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            test_rate: 0.05,
            batch_size: 20,
            min_clicks: 1,
        }
    }
}

/// Countermeasure toggles.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CountermeasuresConfig {
    pub isolation: Option<IsolationConfig>,
    pub filter: Option<FilterConfig>,
    pub watchdog: bool,
    /// Watchdog tap attenuation in dB relative to the inbound probe.
    pub watchdog_tap_db: f64,
    pub calibration: Option<CalibrationConfig>,
    /// Replace passive beam splitter basis choice with an active, privately
    /// seeded basis switch.
    pub active_basis: bool,
}

/// Thresholds used to turn metrics into a security verdict.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictConfig {
    /// Eve knowledge/control fraction at or above which a property counts
    /// as broken.
    pub success_bar: f64,
    /// Legitimate acceptance rate required for a "break without abort".
    pub accept_bar: f64,
    /// Guess-probability excess over the ideal 1/8 that breaks blindness.
    pub blindness_margin: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            success_bar: 0.95,
            accept_bar: 0.95,
            blindness_margin: 0.05,
        }
    }
}

/// QDS parameters shared by both variants.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QdsParams {
    /// Fraction of sifted bits disclosed to estimate the error rate.
    pub disclose_fraction: f64,
    /// Authentication / verification thresholds; `None` derives them from
    /// the disclosed sample as e + 3 sigma (T_a, s_a) and e + 6 sigma
    /// (T_v, s_v).
    pub t_a: Option<f64>,
    pub t_v: Option<f64>,
    pub s_a: Option<f64>,
    pub s_v: Option<f64>,
    /// Disclosed error rate above which the key material is rejected.
    pub max_error_rate: f64,
    /// The 1-bit message being signed.
    pub message_bit: u8,
}

impl Default for QdsParams {
    fn default() -> Self {
        Self {
            disclose_fraction: 0.1,
            t_a: None,
            t_v: None,
            s_a: None,
            s_v: None,
            max_error_rate: 0.12,
            message_bit: 0,
        }
    }
}

/// QSS parameters for both variants.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QssParams {
    /// Party count for the single-qubit protocol (3..=16).
    pub n_parties: u32,
    pub disclose_fraction: f64,
    pub max_error_rate: f64,
}

impl Default for QssParams {
    fn default() -> Self {
        Self {
            n_parties: 5,
            disclose_fraction: 0.1,
            max_error_rate: 0.11,
        }
    }
}

/// SI QRNG parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QrngParams {
    /// BS1 fraction routed to the X (error estimation) arm.
    pub x_fraction: f64,
    /// Statistical slack added to e_bx in the min-entropy bound; `None`
    /// uses 3 binomial standard errors of the estimate.
    pub epsilon_stat: Option<f64>,
    /// Run the universal-hashing extractor over the raw bits.
    pub extract: bool,
}

impl Default for QrngParams {
    fn default() -> Self {
        Self {
            x_fraction: 0.02,
            epsilon_stat: None,
            extract: true,
        }
    }
}

/// DL04 QSDC parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QsdcParams {
    pub forward_check_fraction: f64,
    pub backward_check_fraction: f64,
    pub error_threshold: f64,
    /// Frequency-encoding block length in slots.
    pub block_len: u32,
    /// Cycles per block for message bit 0 and bit 1.
    pub f0: u32,
    pub f1: u32,
    /// Message length in bits; the message itself is drawn from the seed.
    pub message_bits: u32,
}

impl Default for QsdcParams {
    fn default() -> Self {
        Self {
            forward_check_fraction: 0.1,
            backward_check_fraction: 0.1,
            error_threshold: 0.1,
            block_len: 256,
            f0: 4,
            f1: 9,
            message_bits: 64,
        }
    }
}

/// A full scenario description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: ProtocolId,
    #[serde(default = "default_rounds")]
    pub n_rounds: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    /// Run even if the (protocol, attack) pair is not applicable.
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    #[serde(default)]
    pub countermeasures: CountermeasuresConfig,
    #[serde(default)]
    pub verdict: VerdictConfig,
    #[serde(default)]
    pub qds: QdsParams,
    #[serde(default)]
    pub qss: QssParams,
    #[serde(default)]
    pub qrng: QrngParams,
    #[serde(default)]
    pub qsdc: QsdcParams,
}

fn default_rounds() -> u64 {
    20_000
}
fn default_seed() -> u64 {
    1
}
fn default_trials() -> u32 {
    1
}

impl ScenarioConfig {
    pub fn new(protocol: ProtocolId) -> Self {
        Self {
            protocol,
            n_rounds: default_rounds(),
            seed: default_seed(),
            trials: default_trials(),
            force: false,
            channel: ChannelConfig::default(),
            source: SourceConfig::default(),
            detectors: DetectorConfig::default(),
            attack: None,
            countermeasures: CountermeasuresConfig::default(),
            verdict: VerdictConfig::default(),
            qds: QdsParams::default(),
            qss: QssParams::default(),
            qrng: QrngParams::default(),
            qsdc: QsdcParams::default(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, SimError> {
        serde_json::from_str(s)
            .map_err(|e| SimError::Config(vec![FieldIssue::new("<config>", e.to_string())]))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Config(vec![FieldIssue::new(
                "<config>",
                format!("cannot read {}: {e}", path.display()),
            )])
        })?;
        Self::from_json_str(&text)
    }

    /// Validate field ranges and attack applicability. Applicability follows
    /// the published attack matrix unless `force` is set.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, msg: String| issues.push(FieldIssue::new(field, msg));

        if self.n_rounds == 0 {
            bad("n_rounds", "must be positive".into());
        }
        if self.trials == 0 {
            bad("trials", "must be positive".into());
        }
        if self.channel.loss_db < 0.0 {
            bad(
                "channel.loss_db",
                format!("attenuation must be >= 0 dB, got {}", self.channel.loss_db),
            );
        }
        if !(0.0..=1.0).contains(&self.channel.flip_prob) {
            bad("channel.flip_prob", "must lie in [0, 1]".into());
        }
        if self.source.mu_signal < 0.0 {
            bad("source.mu_signal", "mean photon number must be >= 0".into());
        }
        if self.source.mu_decoy < 0.0 {
            bad("source.mu_decoy", "mean photon number must be >= 0".into());
        }
        if self.source.mu_signal <= self.source.mu_decoy {
            bad(
                "source.mu_signal",
                format!(
                    "signal mean {} must exceed decoy mean {}",
                    self.source.mu_signal, self.source.mu_decoy
                ),
            );
        }
        if self.source.wavelength_nm <= 0.0 {
            bad("source.wavelength_nm", "wavelength must be positive".into());
        }
        let probs = &self.source.class_probs;
        let sum = probs.signal + probs.decoy + probs.vacuum;
        if (sum - 1.0).abs() > 1e-9 {
            bad(
                "source.class_probs",
                format!("class probabilities must sum to 1, got {sum}"),
            );
        }
        for (name, p) in [
            ("source.class_probs.signal", probs.signal),
            ("source.class_probs.decoy", probs.decoy),
            ("source.class_probs.vacuum", probs.vacuum),
            ("detectors.eta", self.detectors.eta),
            ("detectors.dark_prob", self.detectors.dark_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                bad(name, format!("must lie in [0, 1], got {p}"));
            }
        }
        if self.detectors.p_blind_w <= 0.0 {
            bad("detectors.p_blind_w", "must be positive".into());
        }
        if !(0.0..1.0).contains(&self.detectors.e_click_ratio)
            || self.detectors.e_click_ratio <= 0.0
        {
            bad("detectors.e_click_ratio", "must lie in (0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.qds.disclose_fraction) || self.qds.disclose_fraction == 0.0 {
            bad("qds.disclose_fraction", "must lie in (0, 1)".into());
        }
        if let (Some(ta), Some(tv)) = (self.qds.t_a, self.qds.t_v) {
            if ta >= tv {
                bad("qds.t_a", format!("T_a ({ta}) must be below T_v ({tv})"));
            }
        }
        if let (Some(sa), Some(sv)) = (self.qds.s_a, self.qds.s_v) {
            if sa >= sv {
                bad("qds.s_a", format!("s_a ({sa}) must be below s_v ({sv})"));
            }
        }
        if !(3..=16).contains(&self.qss.n_parties) {
            bad(
                "qss.n_parties",
                format!("party count must lie in 3..=16, got {}", self.qss.n_parties),
            );
        }
        if !(0.0..0.5).contains(&self.qrng.x_fraction) || self.qrng.x_fraction == 0.0 {
            bad("qrng.x_fraction", "must lie in (0, 0.5)".into());
        }
        let q = &self.qsdc;
        if !(0.0..1.0).contains(&q.forward_check_fraction) {
            bad("qsdc.forward_check_fraction", "must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&q.backward_check_fraction) {
            bad("qsdc.backward_check_fraction", "must lie in [0, 1)".into());
        }
        if q.block_len < 2 {
            bad("qsdc.block_len", "must be at least 2".into());
        }
        if q.f0 == q.f1 {
            bad("qsdc.f1", "message frequencies must differ".into());
        }
        for (name, f) in [("qsdc.f0", q.f0), ("qsdc.f1", q.f1)] {
            if f == 0 || f > q.block_len / 2 {
                bad(
                    name,
                    format!("frequency must lie in 1..=block_len/2, got {f}"),
                );
            }
        }
        if q.message_bits == 0 {
            bad("qsdc.message_bits", "must be positive".into());
        }

        if let Some(cal) = &self.countermeasures.calibration {
            if cal.batch_size == 0 {
                bad("countermeasures.calibration.batch_size", "must be positive".into());
            }
            if !(0.0..=1.0).contains(&cal.test_rate) {
                bad("countermeasures.calibration.test_rate", "must lie in [0, 1]".into());
            }
        }
        drop(bad);
        if let Some(attack) = &self.attack {
            attack.validate(&mut issues);
        }
        if !issues.is_empty() {
            return Err(SimError::Config(issues));
        }

        if let Some(attack) = &self.attack {
            if attack.is_reserved() {
                return Err(SimError::Config(vec![FieldIssue::new(
                    "attack.kind",
                    format!(
                        "`{}` is a reserved attack kind and is not implemented",
                        attack.kind_name()
                    ),
                )]));
            }
            if !self.force && !verdict::kind_applicable(self.protocol, attack.kind_name()) {
                return Err(SimError::NotApplicable {
                    protocol: self.protocol.name().to_string(),
                    attack: attack.kind_name().to_string(),
                });
            }
        }
        Ok(())
    }

    /// The fully defaulted config as a JSON value.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig::new(ProtocolId::QssGhz);
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = ScenarioConfig::from_json_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ScenarioConfig::from_json_str(r#"{"protocol":"bqc","bogus":1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn negative_loss_names_the_field() {
        let mut cfg = ScenarioConfig::new(ProtocolId::QdsIss);
        cfg.channel.loss_db = -3.0;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("channel.loss_db"), "{err}");
    }

    #[test]
    fn inapplicable_attack_is_rejected_without_force() {
        let mut cfg = ScenarioConfig::new(ProtocolId::SiQrng);
        cfg.attack = Some(AttackSpec::trojan_full_strength());
        assert!(matches!(
            cfg.validate(),
            Err(SimError::NotApplicable { .. })
        ));
        cfg.force = true;
        cfg.validate().unwrap();
    }

    #[test]
    fn reserved_attack_kind_is_rejected() {
        let cfg_json = r#"{"protocol":"qds_iss","attack":{"kind":"after_gate"}}"#;
        let cfg = ScenarioConfig::from_json_str(cfg_json).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("reserved"), "{err}");
    }
}
