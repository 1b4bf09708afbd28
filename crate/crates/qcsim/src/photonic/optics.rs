//! Behavioral models of beam splitters and blindable single-photon detectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Beam splitter output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    A,
    B,
}

/// Wavelength-dependent beam splitter. The transmittance toward port A is
/// interpolated piecewise-linearly over a sorted wavelength table; querying
/// outside the declared support is a configuration error.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BsModel {
    /// (wavelength_nm, transmittance) points, sorted by wavelength.
    pub table: Vec<(f64, f64)>,
}

impl BsModel {
    /// Flat 50:50 splitter over 1500-1600 nm.
    pub fn balanced() -> Self {
        Self {
            table: vec![(1500.0, 0.5), (1600.0, 0.5)],
        }
    }

    pub fn with_table(mut table: Vec<(f64, f64)>) -> Result<Self, SimError> {
        if table.len() < 2 {
            return Err(SimError::Domain(
                "beam splitter table needs at least two points".into(),
            ));
        }
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(wl, t) in &table {
            if !(0.0..=1.0).contains(&t) || wl <= 0.0 {
                return Err(SimError::Domain(format!(
                    "beam splitter point ({wl} nm, {t}) out of range"
                )));
            }
        }
        Ok(Self { table })
    }

    /// Transmittance toward port A at the given wavelength.
    pub fn transmittance(&self, wavelength_nm: f64) -> Result<f64, SimError> {
        let first = self.table.first().unwrap();
        let last = self.table.last().unwrap();
        if wavelength_nm < first.0 || wavelength_nm > last.0 {
            return Err(SimError::Domain(format!(
                "wavelength {wavelength_nm} nm outside beam splitter support [{}, {}]",
                first.0, last.0
            )));
        }
        let mut prev = *first;
        for &(wl, t) in &self.table[1..] {
            if wavelength_nm <= wl {
                let span = wl - prev.0;
                if span <= 0.0 {
                    return Ok(t);
                }
                let frac = (wavelength_nm - prev.0) / span;
                return Ok(prev.1 + frac * (t - prev.1));
            }
            prev = (wl, t);
        }
        Ok(last.1)
    }
}

/// Route one photon through a beam splitter: port A with probability
/// t(wavelength).
pub fn bs_route<R: Rng + ?Sized>(
    bs: &BsModel,
    wavelength_nm: f64,
    rng: &mut R,
) -> Result<Port, SimError> {
    let t = bs.transmittance(wavelength_nm)?;
    Ok(if rng.random::<f64>() < t { Port::A } else { Port::B })
}

/// Operating regime of a single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorMode {
    Geiger,
    Blinded,
}

/// Behavioral single-photon detector with a blindable linear mode.
///
/// In geiger mode a click fires when at least one incident photon survives
/// Bernoulli(eta) thinning, or a dark count fires. Continuous illumination at
/// or above `p_blind_w` switches the detector to blinded mode, where the
/// click decision is a deterministic comparison of pulse energy against
/// `e_click_j`; single photons never click there and dark counts are
/// suppressed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DetectorModel {
    pub eta: f64,
    pub dark_prob: f64,
    pub mode: DetectorMode,
    /// CW power threshold (W) at which the detector becomes blinded.
    pub p_blind_w: f64,
    /// Pulse-energy click threshold (J) in blinded mode.
    pub e_click_j: f64,
}

impl DetectorModel {
    pub fn new(eta: f64, dark_prob: f64, p_blind_w: f64, e_click_j: f64) -> Self {
        Self {
            eta,
            dark_prob,
            mode: DetectorMode::Geiger,
            p_blind_w,
            e_click_j,
        }
    }

    pub fn is_blinded(&self) -> bool {
        self.mode == DetectorMode::Blinded
    }
}

/// Light arriving at a detector within one gate.
#[derive(Debug, Clone, Copy, Default)]
pub struct IncidentLight {
    pub photons: u64,
    pub pulse_energy_j: f64,
    pub cw_power_w: f64,
}

impl IncidentLight {
    pub fn photons(n: u64) -> Self {
        Self {
            photons: n,
            ..Default::default()
        }
    }

    pub fn pulse_energy(e: f64) -> Self {
        Self {
            pulse_energy_j: e,
            ..Default::default()
        }
    }

    pub fn cw(power_w: f64) -> Self {
        Self {
            cw_power_w: power_w,
            ..Default::default()
        }
    }
}

/// Detect one gate of incident light, possibly switching the detector mode.
/// The mode transition applies before the click decision.
pub fn detect<R: Rng + ?Sized>(
    d: &mut DetectorModel,
    incident: &IncidentLight,
    rng: &mut R,
) -> bool {
    assert!(incident.pulse_energy_j >= 0.0 && incident.cw_power_w >= 0.0);
    if incident.cw_power_w >= d.p_blind_w {
        d.mode = DetectorMode::Blinded;
    }
    match d.mode {
        DetectorMode::Geiger => {
            let survivor = (0..incident.photons).any(|_| rng.random::<f64>() < d.eta);
            survivor || (d.dark_prob > 0.0 && rng.random::<f64>() < d.dark_prob)
        }
        DetectorMode::Blinded => incident.pulse_energy_j >= d.e_click_j,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::derive_stream;

    fn detector() -> DetectorModel {
        DetectorModel::new(1.0, 0.0, 1e-6, 0.75e-12)
    }

    #[test]
    fn geiger_single_photon_clicks_at_unit_efficiency() {
        let mut d = detector();
        let mut rng = derive_stream(1, "det");
        assert!(detect(&mut d, &IncidentLight::photons(1), &mut rng));
        assert_eq!(d.mode, DetectorMode::Geiger);
    }

    #[test]
    fn cw_power_blinds_and_single_photons_stop_clicking() {
        let mut d = detector();
        let mut rng = derive_stream(2, "det");
        detect(&mut d, &IncidentLight::cw(1e-3), &mut rng);
        assert_eq!(d.mode, DetectorMode::Blinded);
        for _ in 0..100 {
            assert!(!detect(&mut d, &IncidentLight::photons(1), &mut rng));
        }
    }

    #[test]
    fn blinded_click_is_a_deterministic_energy_comparator() {
        let mut d = detector();
        let mut rng = derive_stream(3, "det");
        detect(&mut d, &IncidentLight::cw(1e-3), &mut rng);
        let e = d.e_click_j;
        for _ in 0..50 {
            assert!(detect(&mut d, &IncidentLight::pulse_energy(e), &mut rng));
            assert!(!detect(&mut d, &IncidentLight::pulse_energy(e / 2.0), &mut rng));
        }
    }

    #[test]
    fn blinded_mode_suppresses_dark_counts() {
        let mut d = DetectorModel::new(1.0, 0.5, 1e-6, 0.75e-12);
        let mut rng = derive_stream(4, "det");
        detect(&mut d, &IncidentLight::cw(1e-3), &mut rng);
        for _ in 0..200 {
            assert!(!detect(&mut d, &IncidentLight::default(), &mut rng));
        }
    }

    #[test]
    fn balanced_split_frequency() {
        let bs = BsModel::balanced();
        let mut rng = derive_stream(5, "bs");
        let n = 100_000;
        let a = (0..n)
            .filter(|_| bs_route(&bs, 1550.0, &mut rng).unwrap() == Port::A)
            .count();
        let f = a as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "got {f}");
    }

    #[test]
    fn attack_wavelength_unbalances_routing() {
        let bs = BsModel::with_table(vec![(1540.0, 0.99), (1550.0, 0.5), (1560.0, 0.01)]).unwrap();
        let mut rng = derive_stream(6, "bs-attack");
        let n = 100_000;
        let a = (0..n)
            .filter(|_| bs_route(&bs, 1540.0, &mut rng).unwrap() == Port::A)
            .count();
        let f = a as f64 / n as f64;
        assert!((f - 0.99).abs() < 0.005, "got {f}");
    }

    #[test]
    fn full_transmission_always_routes_to_a() {
        let bs = BsModel::with_table(vec![(1500.0, 1.0), (1600.0, 1.0)]).unwrap();
        let mut rng = derive_stream(7, "bs-full");
        for _ in 0..1000 {
            assert_eq!(bs_route(&bs, 1550.0, &mut rng).unwrap(), Port::A);
        }
    }

    #[test]
    fn out_of_support_wavelength_is_rejected() {
        let bs = BsModel::balanced();
        assert!(bs.transmittance(1400.0).is_err());
    }
}
