//! Trojan-horse readout of modulator settings from back-reflected probe
//! light.

use rand::Rng;

use crate::photonic::sample_photon_number;

/// Per-window Trojan-horse probe. A readout succeeds when the Poissonian
/// reflected photon count reaches the threshold (four photons read out most
/// of the modulation information); on success Eve learns the exact setting.
#[derive(Debug, Clone, Copy)]
pub struct TrojanProbe {
    pub mean_reflected_photons: f64,
    pub readout_threshold: u64,
}

impl TrojanProbe {
    pub fn new(mean_reflected_photons: f64, readout_threshold: u64) -> Self {
        assert!(mean_reflected_photons >= 0.0 && readout_threshold >= 1);
        Self {
            mean_reflected_photons,
            readout_threshold,
        }
    }

    /// Sample one probe window.
    pub fn read<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        if self.mean_reflected_photons == 0.0 {
            return false;
        }
        // Far above threshold the failure probability is below anything a
        // simulation can resolve; skip the sample.
        if self.mean_reflected_photons >= 1e6 * self.readout_threshold as f64 {
            return true;
        }
        sample_photon_number(self.mean_reflected_photons, rng) >= self.readout_threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::derive_stream;

    /// Oracle: read probability is the upper Poisson tail
    /// 1 - CDF(threshold - 1; mean).
    fn poisson_tail_at_or_above(k: u64, mean: f64) -> f64 {
        let mut cdf = 0.0;
        let mut term = (-mean).exp();
        for i in 0..k {
            if i > 0 {
                term *= mean / i as f64;
            }
            cdf += term;
        }
        1.0 - cdf
    }

    #[test]
    fn read_probability_matches_poisson_tail() {
        for (i, &mean) in [1.0f64, 4.0, 10.0].iter().enumerate() {
            let probe = TrojanProbe::new(mean, 4);
            let expected = poisson_tail_at_or_above(4, mean);
            let mut rng = derive_stream(41, &format!("trojan{i}"));
            let n = 100_000;
            let reads = (0..n).filter(|_| probe.read(&mut rng)).count();
            let f = reads as f64 / n as f64;
            assert!(
                (f - expected).abs() < 0.005,
                "mean {mean}: read rate {f} vs {expected}"
            );
        }
    }

    #[test]
    fn ten_photon_mean_reads_almost_always() {
        // 1 - PoissonCDF(3; 10) = 0.98966...
        let expected = poisson_tail_at_or_above(4, 10.0);
        assert!((expected - 0.9897).abs() < 0.003);
    }

    #[test]
    fn zero_mean_never_reads() {
        let probe = TrojanProbe::new(0.0, 4);
        let mut rng = derive_stream(42, "trojan-zero");
        assert!((0..10_000).all(|_| !probe.read(&mut rng)));
    }

    #[test]
    fn tiny_mean_read_probability_is_negligible() {
        let probe = TrojanProbe::new(1e-6, 4);
        let mut rng = derive_stream(43, "trojan-tiny");
        let reads = (0..100_000).filter(|_| probe.read(&mut rng)).count();
        assert_eq!(reads, 0);
        assert!(poisson_tail_at_or_above(4, 1e-6) < 1e-3);
    }
}
