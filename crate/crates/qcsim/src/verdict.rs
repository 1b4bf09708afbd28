//! The published attack matrix over the seven protocol variants, kind-level
//! applicability, and verdict evaluation.

use serde::{Deserialize, Serialize};

use crate::config::{ProtocolId, VerdictConfig};
use crate::metrics::Metrics;

/// Security property a protocol claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Unforgeability,
    Confidentiality,
    Randomness,
}

impl std::fmt::Display for Property {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Property::Unforgeability => "unforgeability",
            Property::Confidentiality => "confidentiality",
            Property::Randomness => "randomness",
        })
    }
}

/// Outcome of a (protocol, attack) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Intact,
    Broken,
    AttackDetected,
    NotApplicable,
}

impl std::fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictStatus::Intact => "intact",
            VerdictStatus::Broken => "broken",
            VerdictStatus::AttackDetected => "attack-detected",
            VerdictStatus::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityVerdict {
    pub property: Property,
    pub status: VerdictStatus,
}

/// The four attack families of the published summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackColumn {
    SourceSideChannel,
    Wavelength,
    DetectorControl,
    TrojanHorse,
}

impl AttackColumn {
    pub const ALL: [AttackColumn; 4] = [
        AttackColumn::SourceSideChannel,
        AttackColumn::Wavelength,
        AttackColumn::DetectorControl,
        AttackColumn::TrojanHorse,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AttackColumn::SourceSideChannel => "source side channel",
            AttackColumn::Wavelength => "wavelength-dependent",
            AttackColumn::DetectorControl => "detector control",
            AttackColumn::TrojanHorse => "trojan-horse",
        }
    }
}

/// The broken-property matrix: which property each attack family breaks for
/// each protocol variant, `None` marking the "--" cells.
pub fn table_cell(protocol: ProtocolId, column: AttackColumn) -> Option<Property> {
    use AttackColumn::*;
    use Property::*;
    use ProtocolId::*;
    match (protocol, column) {
        (QdsIss, SourceSideChannel) => Some(Unforgeability),
        (QdsIss, Wavelength) => Some(Unforgeability),
        (QdsIss, DetectorControl) => Some(Unforgeability),
        (QdsIss, TrojanHorse) => None,
        (QdsDss, DetectorControl) => Some(Unforgeability),
        (QdsDss, TrojanHorse) => Some(Unforgeability),
        (QdsDss, _) => None,
        (QssGhz, DetectorControl) => Some(Confidentiality),
        (QssGhz, _) => None,
        (QssSingle, TrojanHorse) => Some(Confidentiality),
        (QssSingle, _) => None,
        (SiQrng, Wavelength) => Some(Randomness),
        (SiQrng, DetectorControl) => Some(Randomness),
        (SiQrng, _) => None,
        (QsdcDl04, DetectorControl) => Some(Confidentiality),
        (QsdcDl04, TrojanHorse) => Some(Confidentiality),
        (QsdcDl04, _) => None,
        (Bqc, SourceSideChannel) => Some(Confidentiality),
        (Bqc, TrojanHorse) => Some(Confidentiality),
        (Bqc, _) => None,
    }
}

/// Which table column an attack kind lands in for a given protocol. The
/// multi-pair splitting variant of `pns` is the BQC source side channel;
/// `intercept_resend` (and `pns` against decoy-protected QDS) are baseline
/// attacks outside the table.
pub fn column_for_kind(protocol: ProtocolId, kind: &str) -> Option<AttackColumn> {
    match kind {
        "blind_control" => Some(AttackColumn::DetectorControl),
        "wavelength" => Some(AttackColumn::Wavelength),
        "trojan" => Some(AttackColumn::TrojanHorse),
        "source_distinguish" => Some(AttackColumn::SourceSideChannel),
        "pns" if protocol == ProtocolId::Bqc => Some(AttackColumn::SourceSideChannel),
        _ => None,
    }
}

/// Kind-level applicability. Table-column kinds follow the matrix; the
/// baseline kinds are allowed where the physical layer supports them.
pub fn kind_applicable(protocol: ProtocolId, kind: &str) -> bool {
    use ProtocolId::*;
    match kind {
        "intercept_resend" => matches!(protocol, QdsIss | QdsDss | QssGhz | QssSingle | QsdcDl04),
        "pns" => matches!(protocol, QdsIss | Bqc),
        _ => match column_for_kind(protocol, kind) {
            Some(col) => table_cell(protocol, col).is_some(),
            None => false,
        },
    }
}

/// The property an attack targets: the matrix cell when there is one,
/// otherwise the protocol's primary property.
pub fn target_property(protocol: ProtocolId, kind: &str) -> Property {
    column_for_kind(protocol, kind)
        .and_then(|col| table_cell(protocol, col))
        .unwrap_or_else(|| primary_property(protocol))
}

pub fn primary_property(protocol: ProtocolId) -> Property {
    use ProtocolId::*;
    match protocol {
        QdsIss | QdsDss => Property::Unforgeability,
        QssGhz | QssSingle | QsdcDl04 | Bqc => Property::Confidentiality,
        SiQrng => Property::Randomness,
    }
}

/// All non-dash (variant, column) cells with the attack kind that realizes
/// each, in table order.
pub fn applicable_cells() -> Vec<(ProtocolId, &'static str, Property)> {
    let mut cells = Vec::new();
    for protocol in ProtocolId::ALL {
        for column in AttackColumn::ALL {
            if let Some(property) = table_cell(protocol, column) {
                let kind = match column {
                    AttackColumn::SourceSideChannel if protocol == ProtocolId::Bqc => "pns",
                    AttackColumn::SourceSideChannel => "source_distinguish",
                    AttackColumn::Wavelength => "wavelength",
                    AttackColumn::DetectorControl => "blind_control",
                    AttackColumn::TrojanHorse => "trojan",
                };
                cells.push((protocol, kind, property));
            }
        }
    }
    cells
}

/// All dash (variant, column) cells.
pub fn dash_cells() -> Vec<(ProtocolId, AttackColumn)> {
    let mut cells = Vec::new();
    for protocol in ProtocolId::ALL {
        for column in AttackColumn::ALL {
            if table_cell(protocol, column).is_none() {
                cells.push((protocol, column));
            }
        }
    }
    cells
}

/// Counts at primitive granularity (five primitives by four attack
/// families): a primitive-level cell is applicable when any of its variants
/// is. This is the 12-applicable / 8-dash view of the summary table.
pub fn primitive_cell_counts() -> (usize, usize) {
    let primitives: [&[ProtocolId]; 5] = [
        &[ProtocolId::QdsIss, ProtocolId::QdsDss],
        &[ProtocolId::QssGhz, ProtocolId::QssSingle],
        &[ProtocolId::SiQrng],
        &[ProtocolId::QsdcDl04],
        &[ProtocolId::Bqc],
    ];
    let mut applicable = 0;
    let mut dashes = 0;
    for group in primitives {
        for column in AttackColumn::ALL {
            if group.iter().any(|&p| table_cell(p, column).is_some()) {
                applicable += 1;
            } else {
                dashes += 1;
            }
        }
    }
    (applicable, dashes)
}

/// Turn aggregate metrics into a verdict.
///
/// A property is broken when the attack's success measure clears the success
/// bar while legitimate acceptance holds; countermeasure alarms or failed
/// acceptance mean the attack was detected. For QDS the success measure is
/// forgery acceptance; for BQC blindness it is a guess-probability excess
/// over the ideal 1/8; everywhere else it is Eve's knowledge fraction.
pub fn evaluate(
    metrics: &Metrics,
    protocol: ProtocolId,
    attack_kind: Option<&str>,
    cfg: &VerdictConfig,
) -> SecurityVerdict {
    let Some(kind) = attack_kind else {
        return SecurityVerdict {
            property: primary_property(protocol),
            status: VerdictStatus::Intact,
        };
    };
    let property = target_property(protocol, kind);
    if metrics.alarms > 0 || metrics.acceptance.rate() < cfg.accept_bar {
        return SecurityVerdict {
            property,
            status: VerdictStatus::AttackDetected,
        };
    }
    let succeeded = match protocol {
        ProtocolId::QdsIss | ProtocolId::QdsDss => metrics
            .forge_success
            .or(metrics.eve_knowledge)
            .map(|r| r.rate() >= cfg.success_bar)
            .unwrap_or(false),
        ProtocolId::Bqc => metrics
            .eve_knowledge
            .map(|r| r.rate() >= 0.125 + cfg.blindness_margin)
            .unwrap_or(false),
        _ => metrics
            .eve_knowledge
            .map(|r| r.rate() >= cfg.success_bar)
            .unwrap_or(false),
    };
    SecurityVerdict {
        property,
        status: if succeeded {
            VerdictStatus::Broken
        } else {
            VerdictStatus::Intact
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_matrix_has_thirteen_applicable_and_fifteen_dashes() {
        assert_eq!(applicable_cells().len(), 13);
        assert_eq!(dash_cells().len(), 15);
    }

    #[test]
    fn primitive_view_has_twelve_applicable_and_eight_dashes() {
        assert_eq!(primitive_cell_counts(), (12, 8));
    }

    #[test]
    fn spot_check_cells() {
        assert_eq!(
            table_cell(ProtocolId::QssGhz, AttackColumn::DetectorControl),
            Some(Property::Confidentiality)
        );
        assert_eq!(
            table_cell(ProtocolId::QdsDss, AttackColumn::TrojanHorse),
            Some(Property::Unforgeability)
        );
        assert_eq!(table_cell(ProtocolId::SiQrng, AttackColumn::TrojanHorse), None);
        assert!(!kind_applicable(ProtocolId::SiQrng, "trojan"));
        assert!(kind_applicable(ProtocolId::SiQrng, "blind_control"));
        assert!(kind_applicable(ProtocolId::Bqc, "pns"));
        assert!(!kind_applicable(ProtocolId::Bqc, "blind_control"));
        assert!(kind_applicable(ProtocolId::QssSingle, "intercept_resend"));
        assert!(!kind_applicable(ProtocolId::SiQrng, "intercept_resend"));
    }

    #[test]
    fn baseline_attacks_map_to_primary_property() {
        assert_eq!(
            target_property(ProtocolId::QsdcDl04, "intercept_resend"),
            Property::Confidentiality
        );
        assert_eq!(
            target_property(ProtocolId::QdsIss, "pns"),
            Property::Unforgeability
        );
        assert_eq!(
            target_property(ProtocolId::Bqc, "pns"),
            Property::Confidentiality
        );
    }
}
