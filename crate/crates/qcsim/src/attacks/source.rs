//! Maximum-likelihood classification of which laser fired, from Gaussian-
//! jittered emission-time metadata.

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Classifier over four source lasers. Each laser has a nominal emission-
/// time offset; per pulse the observable is offset + N(0, jitter).
#[derive(Debug, Clone)]
pub struct SourceClassifier {
    pub time_offsets_ps: [f64; 4],
    pub time_jitter_ps: f64,
    pub confidence_threshold: f64,
}

impl SourceClassifier {
    pub fn new(offsets: &[f64], jitter_ps: f64, confidence_threshold: f64) -> Self {
        let mut time_offsets_ps = [0.0; 4];
        time_offsets_ps.copy_from_slice(&offsets[..4]);
        Self {
            time_offsets_ps,
            time_jitter_ps: jitter_ps,
            confidence_threshold,
        }
    }

    /// Sample the emission-time observable for the laser that actually fired.
    pub fn observe<R: Rng + ?Sized>(&self, true_laser: usize, rng: &mut R) -> f64 {
        let noise = Normal::new(0.0, self.time_jitter_ps).unwrap();
        self.time_offsets_ps[true_laser] + noise.sample(rng)
    }

    /// Posterior over the four lasers given an observed emission time, with
    /// a uniform prior.
    pub fn posterior(&self, observed_ps: f64) -> [f64; 4] {
        let mut weights = [0.0f64; 4];
        let inv_two_var = 1.0 / (2.0 * self.time_jitter_ps * self.time_jitter_ps);
        // Subtract the best exponent so the largest weight is exactly 1.
        let exps: Vec<f64> = self
            .time_offsets_ps
            .iter()
            .map(|&o| -(observed_ps - o) * (observed_ps - o) * inv_two_var)
            .collect();
        let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (w, &e) in weights.iter_mut().zip(&exps) {
            *w = (e - max).exp();
            total += *w;
        }
        for w in &mut weights {
            *w /= total;
        }
        weights
    }

    /// Classify one pulse: (guessed laser, posterior confidence, forwarded).
    /// Rounds below the confidence threshold are discarded, appearing as
    /// channel loss to the legitimate parties.
    pub fn classify<R: Rng + ?Sized>(
        &self,
        true_laser: usize,
        rng: &mut R,
    ) -> (usize, f64, bool) {
        let observed = self.observe(true_laser, rng);
        let posterior = self.posterior(observed);
        let (guess, confidence) = posterior
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, &p)| (i, p))
            .unwrap();
        (guess, confidence, confidence >= self.confidence_threshold)
    }
}
