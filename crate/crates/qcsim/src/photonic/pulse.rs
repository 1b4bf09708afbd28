//! Weak coherent pulses and photon-number statistics.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::state::PureState;

/// Intensity class of a decoy-modulated pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyClass {
    Signal,
    Decoy,
    Vacuum,
}

/// What a pulse encodes: a polarization qubit, or a phase reference for
/// differential-phase-shift traffic.
#[derive(Debug, Clone)]
pub enum PulsePayload {
    Qubit(PureState),
    Phase(f64),
}

/// A weak coherent pulse in flight.
///
/// `photons` is `None` until the Poissonian photon number has been realized;
/// channel loss acts on the mean before realization and thins the count
/// binomially after it, which is statistically equivalent.
#[derive(Debug, Clone)]
pub struct OpticalPulse {
    /// Mean photon number (>= 0).
    pub mu: f64,
    /// Realized photon count, once sampled.
    pub photons: Option<u64>,
    pub wavelength_nm: f64,
    /// Emission-time offset in picoseconds (source side-channel metadata).
    pub emit_time_ps: f64,
    pub payload: PulsePayload,
    pub decoy_class: DecoyClass,
    /// Label of the emitting laser.
    pub source_id: u32,
}

impl OpticalPulse {
    pub fn qubit(state: PureState, mu: f64, wavelength_nm: f64) -> Self {
        debug_assert!(mu >= 0.0 && wavelength_nm > 0.0);
        Self {
            mu,
            photons: None,
            wavelength_nm,
            emit_time_ps: 0.0,
            payload: PulsePayload::Qubit(state),
            decoy_class: DecoyClass::Signal,
            source_id: 0,
        }
    }

    pub fn phase(phase: f64, mu: f64, wavelength_nm: f64) -> Self {
        Self {
            mu,
            photons: None,
            wavelength_nm,
            emit_time_ps: 0.0,
            payload: PulsePayload::Phase(phase),
            decoy_class: DecoyClass::Signal,
            source_id: 0,
        }
    }

    pub fn vacuum(wavelength_nm: f64) -> Self {
        let mut p = Self::qubit(PureState::horizontal(), 0.0, wavelength_nm);
        p.decoy_class = DecoyClass::Vacuum;
        p.photons = Some(0);
        p
    }

    /// Sample the photon number if not yet realized.
    pub fn realize<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        match self.photons {
            Some(n) => n,
            None => {
                let n = sample_photon_number(self.mu, rng);
                self.photons = Some(n);
                n
            }
        }
    }

    pub fn qubit_state(&self) -> Option<&PureState> {
        match &self.payload {
            PulsePayload::Qubit(s) => Some(s),
            PulsePayload::Phase(_) => None,
        }
    }
}

/// Poisson photon-number sample for a weak coherent pulse of mean `mu`.
pub fn sample_photon_number<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    assert!(mu >= 0.0, "mean photon number must be nonnegative");
    if mu == 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mu).expect("positive finite mean");
    let n: f64 = poisson.sample(rng);
    n as u64
}

/// Thin a photon count: each photon independently survives with
/// probability `p`.
pub fn thin_photons<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p >= 1.0 {
        return n;
    }
    if p <= 0.0 {
        return 0;
    }
    let mut kept = 0;
    for _ in 0..n {
        if rng.random::<f64>() < p {
            kept += 1;
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::derive_stream;

    #[test]
    fn zero_mean_is_always_zero() {
        let mut rng = derive_stream(1, "poisson0");
        for _ in 0..1000 {
            assert_eq!(sample_photon_number(0.0, &mut rng), 0);
        }
    }

    #[test]
    fn poisson_tail_probabilities_at_half() {
        // Closed form: P(0) = e^{-0.5}, P(>=2) = 1 - e^{-0.5}(1 + 0.5).
        let p0 = (-0.5f64).exp();
        let p2 = 1.0 - (-0.5f64).exp() * 1.5;
        let mut rng = derive_stream(2, "poisson-tail");
        let n = 100_000u64;
        let (mut zeros, mut multi) = (0u64, 0u64);
        for _ in 0..n {
            match sample_photon_number(0.5, &mut rng) {
                0 => zeros += 1,
                k if k >= 2 => multi += 1,
                _ => {}
            }
        }
        let f0 = zeros as f64 / n as f64;
        let f2 = multi as f64 / n as f64;
        assert!((f0 - p0).abs() < 0.005, "P(0) {f0} vs {p0}");
        assert!((f2 - p2).abs() < 0.003, "P(>=2) {f2} vs {p2}");
    }

    #[test]
    fn poisson_moments_within_two_percent() {
        let mut rng = derive_stream(3, "poisson-moments");
        for &mu in &[0.1f64, 0.5, 1.0] {
            let n = 1_000_000u64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let x = sample_photon_number(mu, &mut rng) as f64;
                sum += x;
                sum_sq += x * x;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            assert!((mean - mu).abs() / mu < 0.02, "mean {mean} vs {mu}");
            assert!((var - mu).abs() / mu < 0.02, "var {var} vs {mu}");
        }
    }

    #[test]
    fn thinning_keeps_binomial_mean() {
        let mut rng = derive_stream(4, "thin");
        let mut kept = 0u64;
        let trials = 200_000u64;
        for _ in 0..trials {
            kept += thin_photons(2, 0.3, &mut rng);
        }
        let mean = kept as f64 / trials as f64;
        assert!((mean - 0.6).abs() < 0.01, "got {mean}");
    }
}
