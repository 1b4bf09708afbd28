//! Countermeasures: Trojan-horse isolation budgeting, wavelength filtering,
//! watchdog detectors, and real-time detector calibration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CalibrationConfig, IsolationConfig};
use crate::error::SimError;
use crate::photonic::{detect, DetectorModel, IncidentLight, OpticalPulse};

/// Physical constants used by every energy figure in the crate.
pub const PLANCK_J_S: f64 = 6.62607e-34;
pub const LIGHT_SPEED_M_S: f64 = 2.99792e8;

/// Photon energy hc/lambda in joules.
pub fn photon_energy_j(wavelength_nm: f64) -> f64 {
    PLANCK_J_S * LIGHT_SPEED_M_S / (wavelength_nm * 1e-9)
}

/// How an isolation component attenuates the Trojan probe. Bidirectional
/// attenuators act on both the inbound probe and the outbound reflection, so
/// they count twice in the return-path budget; isolators and the modulator
/// reflectivity count once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ComponentDirection {
    #[default]
    Bidirectional,
    ReturnPathOnly,
}

/// Result of an isolation budget evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct IsolationBudget {
    pub total_isolation_db: f64,
    /// Back-reflected photon flux reaching Eve.
    pub photons_per_second: f64,
    /// Mean reflected photons per modulation window.
    pub mean_photons_per_window: f64,
}

/// Total return-path isolation of a chain in dB.
pub fn total_isolation_db(chain: &IsolationConfig) -> f64 {
    let components: f64 = chain
        .components
        .iter()
        .map(|c| match c.direction {
            ComponentDirection::Bidirectional => 2.0 * c.attenuation_db,
            ComponentDirection::ReturnPathOnly => c.attenuation_db,
        })
        .sum();
    components + chain.modulator_reflectivity_db
}

/// Compute the mean back-reflected photon number per modulation window for a
/// probe of `p_in_w` at `wavelength_nm` against the given chain. Rejects
/// probes above the fiber damage limit.
pub fn isolation_budget(
    p_in_w: f64,
    chain: &IsolationConfig,
    wavelength_nm: f64,
    rep_rate_hz: f64,
) -> Result<IsolationBudget, SimError> {
    if p_in_w <= 0.0 || wavelength_nm <= 0.0 || rep_rate_hz <= 0.0 {
        return Err(SimError::Domain(
            "power, wavelength and repetition rate must be positive".into(),
        ));
    }
    if p_in_w > chain.max_injected_power_w {
        return Err(SimError::Domain(format!(
            "injected power {p_in_w} W exceeds the {} W fiber damage limit",
            chain.max_injected_power_w
        )));
    }
    let iso_db = total_isolation_db(chain);
    let photons_per_second =
        p_in_w * 10f64.powf(-iso_db / 10.0) / photon_energy_j(wavelength_nm);
    Ok(IsolationBudget {
        total_isolation_db: iso_db,
        photons_per_second,
        mean_photons_per_window: photons_per_second / rep_rate_hz,
    })
}

/// Isolation in dB needed to hold the per-window reflected mean at
/// `target_n_bar`.
pub fn required_isolation_db(
    p_in_w: f64,
    wavelength_nm: f64,
    rep_rate_hz: f64,
    target_n_bar: f64,
) -> f64 {
    let raw_per_window = p_in_w / photon_energy_j(wavelength_nm) / rep_rate_hz;
    10.0 * (raw_per_window / target_n_bar).log10()
}

/// Wavelength filter with finite stopband extinction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FilterSpec {
    pub passband_nm: (f64, f64),
    pub stopband_extinction_db: f64,
}

impl FilterSpec {
    pub fn in_band(&self, wavelength_nm: f64) -> bool {
        wavelength_nm >= self.passband_nm.0 && wavelength_nm <= self.passband_nm.1
    }
}

/// Apply a filter to a pulse: in-band light passes unchanged, out-of-band
/// light is attenuated by the finite extinction. Bright out-of-band inputs
/// can still exceed detector and blinding thresholds.
pub fn filter_apply<R: Rng + ?Sized>(
    mut pulse: OpticalPulse,
    filter: &FilterSpec,
    rng: &mut R,
) -> OpticalPulse {
    if filter.in_band(pulse.wavelength_nm) {
        return pulse;
    }
    let factor = 10f64.powf(-filter.stopband_extinction_db / 10.0);
    match pulse.photons {
        None => pulse.mu *= factor,
        Some(n) => pulse.photons = Some(crate::photonic::thin_photons(n, factor, rng)),
    }
    pulse
}

/// One watchdog gate: alarm when the tap detector clicks on inbound light.
/// The watchdog shares the detector model, so it can itself be blinded.
pub fn watchdog_check<R: Rng + ?Sized>(
    tap: &mut DetectorModel,
    incident: &IncidentLight,
    rng: &mut R,
) -> bool {
    detect(tap, incident, rng)
}

/// Run one calibration batch: fire single-photon test pulses from the local
/// source and flag blinding when the click count falls below the minimum.
/// Test slots are chosen by receiver-private randomness, so the adversary
/// cannot anticipate them.
pub fn calibrate<R: Rng + ?Sized>(
    detector: &mut DetectorModel,
    cfg: &CalibrationConfig,
    rng: &mut R,
) -> bool {
    if cfg.test_rate <= 0.0 || cfg.batch_size == 0 {
        return false;
    }
    let mut clicks = 0u32;
    for _ in 0..cfg.batch_size {
        if detect(detector, &IncidentLight::photons(1), rng) {
            clicks += 1;
        }
    }
    clicks < cfg.min_clicks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::IsolationComponentConfig;
    use crate::harness::derive_stream;
    use crate::photonic::{DetectorMode, PureState};

    fn chain_170db() -> IsolationConfig {
        IsolationConfig {
            components: vec![
                IsolationComponentConfig {
                    name: "attenuator".into(),
                    attenuation_db: 30.0,
                    direction: ComponentDirection::Bidirectional,
                },
                IsolationComponentConfig {
                    name: "isolator".into(),
                    attenuation_db: 80.0,
                    direction: ComponentDirection::ReturnPathOnly,
                },
            ],
            modulator_reflectivity_db: 30.0,
            max_injected_power_w: 12.8,
        }
    }

    #[test]
    fn photon_rate_at_full_injected_power() {
        // 12.8 W at 1550 nm is 1.0e20 photons per second within 1%.
        let chain = IsolationConfig::default();
        let budget = isolation_budget(12.8, &chain, 1550.0, 1e9).unwrap();
        assert!(
            (budget.photons_per_second - 1.0e20).abs() / 1.0e20 < 0.01,
            "rate {}",
            budget.photons_per_second
        );
    }

    #[test]
    fn full_chain_gives_one_microphoton_per_window() {
        let chain = chain_170db();
        assert_eq!(total_isolation_db(&chain), 170.0);
        let budget = isolation_budget(12.8, &chain, 1550.0, 1e9).unwrap();
        assert!(
            (budget.mean_photons_per_window - 1.0e-6).abs() / 1.0e-6 < 0.01,
            "n_bar {}",
            budget.mean_photons_per_window
        );
    }

    #[test]
    fn required_isolation_for_four_photons() {
        // Inverting the budget formula at 12.8 W, 1550 nm, 1 GHz for a
        // target of 4 photons/window gives 103.97 dB.
        let db = required_isolation_db(12.8, 1550.0, 1e9, 4.0);
        assert!((db - 103.97).abs() < 0.05, "got {db}");
    }

    #[test]
    fn over_power_probe_is_rejected() {
        let chain = IsolationConfig::default();
        assert!(isolation_budget(20.0, &chain, 1550.0, 1e9).is_err());
    }

    #[test]
    fn isolation_budget_is_monotone_in_added_components() {
        let mut chain = IsolationConfig::default();
        let mut last = isolation_budget(1.0, &chain, 1550.0, 1e9)
            .unwrap()
            .mean_photons_per_window;
        for i in 0..5 {
            chain.components.push(IsolationComponentConfig {
                name: format!("att{i}"),
                attenuation_db: 7.5 * (i + 1) as f64,
                direction: ComponentDirection::Bidirectional,
            });
            let now = isolation_budget(1.0, &chain, 1550.0, 1e9)
                .unwrap()
                .mean_photons_per_window;
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn filter_passes_in_band_and_attenuates_out_of_band() {
        let filter = FilterSpec {
            passband_nm: (1549.0, 1551.0),
            stopband_extinction_db: 60.0,
        };
        let mut rng = derive_stream(81, "filter");
        let in_band = filter_apply(
            OpticalPulse::qubit(PureState::plus(), 0.5, 1550.0),
            &filter,
            &mut rng,
        );
        assert_eq!(in_band.mu, 0.5);
        // Bright out-of-band light still gets through: 1e8 photons at 60 dB
        // leaves a mean of 100, plenty to blind or click.
        let bright = filter_apply(
            OpticalPulse::qubit(PureState::plus(), 1e8, 1540.0),
            &filter,
            &mut rng,
        );
        assert!((bright.mu - 100.0).abs() < 1e-6);
        // Single-photon-level out-of-band light is gone.
        let faint = filter_apply(
            OpticalPulse::qubit(PureState::plus(), 1.0, 1540.0),
            &filter,
            &mut rng,
        );
        assert!((faint.mu - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn watchdog_alarms_on_probe_light() {
        // n_bar 10 at the tap with eta 0.5: alarm probability 1 - e^{-5}.
        let mut rng = derive_stream(82, "watchdog");
        let n = 50_000;
        let mut alarms = 0u64;
        for _ in 0..n {
            let mut tap = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
            let photons = crate::photonic::sample_photon_number(10.0, &mut rng);
            if watchdog_check(&mut tap, &IncidentLight::photons(photons), &mut rng) {
                alarms += 1;
            }
        }
        let rate = alarms as f64 / n as f64;
        let expected = 1.0 - (-5.0f64).exp();
        assert!(rate >= 0.99, "alarm rate {rate} (expected {expected})");
    }

    #[test]
    fn watchdog_false_alarms_stay_below_budget() {
        let mut rng = derive_stream(83, "watchdog-quiet");
        let batches = 100_000;
        let mut alarms = 0u64;
        for _ in 0..batches {
            let mut tap = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
            for _ in 0..10 {
                if watchdog_check(&mut tap, &IncidentLight::default(), &mut rng) {
                    alarms += 1;
                    break;
                }
            }
        }
        // Union bound: 10 slots at 1e-6 dark each stays below 1e-5 per batch.
        assert!(alarms as f64 / batches as f64 <= 1e-4, "alarms {alarms}");
    }

    #[test]
    fn blinded_watchdog_stays_silent() {
        let mut rng = derive_stream(84, "watchdog-blind");
        let mut tap = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
        // Eve blinds the watchdog itself before probing.
        watchdog_check(&mut tap, &IncidentLight::cw(1e-3), &mut rng);
        assert_eq!(tap.mode, DetectorMode::Blinded);
        for _ in 0..1000 {
            assert!(!watchdog_check(
                &mut tap,
                &IncidentLight::photons(100),
                &mut rng
            ));
        }
    }

    #[test]
    fn calibration_catches_a_blinded_detector() {
        let cfg = CalibrationConfig::default();
        let mut rng = derive_stream(85, "cal");
        for _ in 0..1000 {
            let mut d = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
            d.mode = DetectorMode::Blinded;
            assert!(calibrate(&mut d, &cfg, &mut rng));
        }
    }

    #[test]
    fn calibration_rarely_flags_an_honest_detector() {
        // Miss bound: a batch of 20 at eta 0.5 sees zero clicks with
        // probability 0.5^20, below 1e-6.
        let cfg = CalibrationConfig::default();
        let mut rng = derive_stream(86, "cal-honest");
        let batches = 100_000;
        let flagged = (0..batches)
            .filter(|_| {
                let mut d = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
                calibrate(&mut d, &cfg, &mut rng)
            })
            .count();
        assert!(
            (flagged as f64 / batches as f64) <= 1e-3,
            "false positives {flagged}"
        );
    }

    #[test]
    fn zero_test_rate_disables_calibration() {
        let cfg = CalibrationConfig {
            test_rate: 0.0,
            ..CalibrationConfig::default()
        };
        let mut rng = derive_stream(87, "cal-off");
        let mut d = DetectorModel::new(0.5, 1e-6, 1e-6, 1e-12);
        d.mode = DetectorMode::Blinded;
        assert!(!calibrate(&mut d, &cfg, &mut rng));
    }
}
