//! Adversary models: intercept-resend, detector blinding with faked states,
//! wavelength-dependent routing, Trojan-horse modulator readout, photon
//! number / multi-pair splitting, and source side-channel classification.

pub mod blinding;
pub mod intercept;
pub mod pns;
pub mod source;
pub mod trojan;
pub mod wavelength;

use serde::{Deserialize, Serialize};

use crate::error::FieldIssue;

pub use blinding::{faked_arm_click, FakedState};
pub use intercept::intercept_resend;
pub use pns::pns_split;
pub use source::SourceClassifier;
pub use trojan::TrojanProbe;
pub use wavelength::WavelengthResender;

/// Attack selection and parameters, as written in scenario files.
///
/// The last four kinds are reserved names for detector-control variants that
/// apply to gated avalanche receivers; configuring them is rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackSpec {
    InterceptResend {
        /// Testing mode: Eve measures in the sender's basis instead of
        /// guessing, which removes the disturbance.
        #[serde(default)]
        oracle_basis: bool,
        /// Insertion point for the single-qubit QSS ring (Eve taps the fiber
        /// after this many encoding parties).
        #[serde(default = "default_after_party")]
        after_party: u32,
    },
    BlindControl {
        #[serde(default = "default_cw_power")]
        cw_power_w: f64,
        #[serde(default = "default_faked_energy")]
        faked_energy_j: f64,
    },
    Wavelength {
        /// Beam splitter transmittance reached at the attack wavelengths.
        #[serde(default = "default_t_attack")]
        t_attack: f64,
        #[serde(default = "default_lambda_z")]
        lambda_z_nm: f64,
        #[serde(default = "default_lambda_x")]
        lambda_x_nm: f64,
        /// Fraction of rounds on which the source-side adversary feeds the
        /// estimator honestly (SI QRNG only).
        #[serde(default = "default_honest_fraction")]
        honest_fraction: f64,
    },
    Trojan {
        #[serde(default = "default_injected_power")]
        injected_power_w: f64,
        #[serde(default = "default_rep_rate")]
        rep_rate_hz: f64,
        /// Reflected photons per modulation window needed to read a setting.
        #[serde(default = "default_readout_threshold")]
        readout_threshold: u64,
    },
    Pns {
        /// Probability that a given BQC qubit has a splittable extra pair.
        #[serde(default = "default_copy_fraction")]
        copy_fraction: f64,
    },
    SourceDistinguish {
        /// Forward a round only when the classifier posterior reaches this.
        #[serde(default = "default_confidence")]
        confidence_threshold: f64,
        /// Per-laser emission-time offsets (ps), one per BB84 state.
        #[serde(default = "default_time_offsets")]
        time_offsets_ps: Vec<f64>,
        #[serde(default = "default_time_jitter")]
        time_jitter_ps: f64,
    },
    EfficiencyMismatch {},
    AfterGate {},
    Superlinearity {},
    DeadTime {},
}

fn default_after_party() -> u32 {
    1
}
fn default_cw_power() -> f64 {
    1e-3
}
fn default_faked_energy() -> f64 {
    1e-12
}
fn default_t_attack() -> f64 {
    0.99
}
fn default_lambda_z() -> f64 {
    1540.0
}
fn default_lambda_x() -> f64 {
    1560.0
}
fn default_honest_fraction() -> f64 {
    0.02
}
fn default_injected_power() -> f64 {
    12.8
}
fn default_rep_rate() -> f64 {
    1e9
}
fn default_readout_threshold() -> u64 {
    4
}
fn default_copy_fraction() -> f64 {
    1.0
}
fn default_confidence() -> f64 {
    0.99
}
fn default_time_offsets() -> Vec<f64> {
    // 6 sigma pairwise separation at the default 10 ps jitter.
    vec![0.0, 60.0, 120.0, 180.0]
}
fn default_time_jitter() -> f64 {
    10.0
}

impl AttackSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AttackSpec::InterceptResend { .. } => "intercept_resend",
            AttackSpec::BlindControl { .. } => "blind_control",
            AttackSpec::Wavelength { .. } => "wavelength",
            AttackSpec::Trojan { .. } => "trojan",
            AttackSpec::Pns { .. } => "pns",
            AttackSpec::SourceDistinguish { .. } => "source_distinguish",
            AttackSpec::EfficiencyMismatch {} => "efficiency_mismatch",
            AttackSpec::AfterGate {} => "after_gate",
            AttackSpec::Superlinearity {} => "superlinearity",
            AttackSpec::DeadTime {} => "dead_time",
        }
    }

    pub fn is_reserved(&self) -> bool {
        matches!(
            self,
            AttackSpec::EfficiencyMismatch {}
                | AttackSpec::AfterGate {}
                | AttackSpec::Superlinearity {}
                | AttackSpec::DeadTime {}
        )
    }

    /// All configurable kinds, implemented and reserved.
    pub const KIND_NAMES: [&'static str; 6] = [
        "intercept_resend",
        "blind_control",
        "wavelength",
        "trojan",
        "pns",
        "source_distinguish",
    ];

    pub const RESERVED_KIND_NAMES: [&'static str; 4] = [
        "efficiency_mismatch",
        "after_gate",
        "superlinearity",
        "dead_time",
    ];

    pub fn blind_control_full_strength() -> Self {
        AttackSpec::BlindControl {
            cw_power_w: default_cw_power(),
            faked_energy_j: default_faked_energy(),
        }
    }

    pub fn wavelength_full_strength() -> Self {
        AttackSpec::Wavelength {
            t_attack: default_t_attack(),
            lambda_z_nm: default_lambda_z(),
            lambda_x_nm: default_lambda_x(),
            honest_fraction: default_honest_fraction(),
        }
    }

    /// Trojan probe with no isolation configured anywhere: the readout
    /// succeeds on every window.
    pub fn trojan_full_strength() -> Self {
        AttackSpec::Trojan {
            injected_power_w: default_injected_power(),
            rep_rate_hz: default_rep_rate(),
            readout_threshold: default_readout_threshold(),
        }
    }

    pub fn pns_full_strength() -> Self {
        AttackSpec::Pns {
            copy_fraction: default_copy_fraction(),
        }
    }

    pub fn source_distinguish_full_strength() -> Self {
        AttackSpec::SourceDistinguish {
            confidence_threshold: default_confidence(),
            time_offsets_ps: default_time_offsets(),
            time_jitter_ps: default_time_jitter(),
        }
    }

    pub fn intercept_resend_default() -> Self {
        AttackSpec::InterceptResend {
            oracle_basis: false,
            after_party: default_after_party(),
        }
    }

    pub(crate) fn validate(&self, issues: &mut Vec<FieldIssue>) {
        let mut bad = |field: &str, msg: String| issues.push(FieldIssue::new(field, msg));
        match self {
            AttackSpec::BlindControl {
                cw_power_w,
                faked_energy_j,
            } => {
                if *cw_power_w <= 0.0 {
                    bad("attack.cw_power_w", "must be positive".into());
                }
                if *faked_energy_j <= 0.0 {
                    bad("attack.faked_energy_j", "must be positive".into());
                }
            }
            AttackSpec::Wavelength {
                t_attack,
                lambda_z_nm,
                lambda_x_nm,
                honest_fraction,
            } => {
                if !(0.5..1.0).contains(t_attack) {
                    bad("attack.t_attack", "must lie in [0.5, 1)".into());
                }
                if lambda_z_nm == lambda_x_nm {
                    bad("attack.lambda_x_nm", "attack wavelengths must differ".into());
                }
                if !(0.0..1.0).contains(honest_fraction) {
                    bad("attack.honest_fraction", "must lie in [0, 1)".into());
                }
            }
            AttackSpec::Trojan {
                injected_power_w,
                rep_rate_hz,
                readout_threshold,
            } => {
                if *injected_power_w <= 0.0 {
                    bad("attack.injected_power_w", "must be positive".into());
                }
                if *rep_rate_hz <= 0.0 {
                    bad("attack.rep_rate_hz", "must be positive".into());
                }
                if *readout_threshold == 0 {
                    bad("attack.readout_threshold", "must be at least 1".into());
                }
            }
            AttackSpec::Pns { copy_fraction } => {
                if !(0.0..=1.0).contains(copy_fraction) {
                    bad("attack.copy_fraction", "must lie in [0, 1]".into());
                }
            }
            AttackSpec::SourceDistinguish {
                confidence_threshold,
                time_offsets_ps,
                time_jitter_ps,
            } => {
                if !(0.0..1.0).contains(confidence_threshold) {
                    bad("attack.confidence_threshold", "must lie in [0, 1)".into());
                }
                if time_offsets_ps.len() != 4 {
                    bad(
                        "attack.time_offsets_ps",
                        format!("need one offset per laser (4), got {}", time_offsets_ps.len()),
                    );
                }
                if *time_jitter_ps <= 0.0 {
                    bad("attack.time_jitter_ps", "must be positive".into());
                }
            }
            _ => {}
        }
    }
}

/// Per-round adversary knowledge, appended by attack operations and consumed
/// only by the metrics layer.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EveRecord {
    pub slot: u64,
    /// Measurement basis index or phase-set label, attack-specific.
    pub basis: Option<u8>,
    /// Measured or injected value.
    pub value: Option<u8>,
    pub confidence: f64,
    pub forwarded: bool,
}
