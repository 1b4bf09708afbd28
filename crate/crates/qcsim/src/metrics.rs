//! Run tallies and aggregated metrics with attached counts for standard
//! errors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::harness::ProtocolTranscript;

/// A ratio with its counts kept, so standard errors stay computable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Self {
        debug_assert!(num <= den);
        Self { num, den }
    }

    pub fn from_bool(b: bool) -> Self {
        Self {
            num: b as u64,
            den: 1,
        }
    }

    pub fn rate(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Binomial standard error of the rate.
    pub fn std_err(&self) -> f64 {
        if self.den == 0 {
            return 0.0;
        }
        let p = self.rate();
        (p * (1.0 - p) / self.den as f64).sqrt()
    }

    pub fn add(&mut self, hit: bool) {
        self.den += 1;
        self.num += hit as u64;
    }

    pub fn merge(&mut self, other: Rate) {
        self.num += other.num;
        self.den += other.den;
    }
}

/// Per-trial tallies produced by a protocol runner and stored in the
/// transcript outputs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tallies {
    pub rates: BTreeMap<String, Rate>,
    pub counts: BTreeMap<String, u64>,
    pub values: BTreeMap<String, f64>,
    /// Fraction of the protected secret units the adversary knows.
    pub eve_knowledge: Option<Rate>,
    /// Whether the forged signature/message was accepted this trial.
    pub forge_accept: Option<bool>,
    /// Whether the legitimate parties accepted (no abort, checks passed).
    pub legit_accept: bool,
    pub aborted: bool,
    pub alarm: bool,
}

impl Default for Tallies {
    fn default() -> Self {
        Self {
            rates: BTreeMap::new(),
            counts: BTreeMap::new(),
            values: BTreeMap::new(),
            eve_knowledge: None,
            forge_accept: None,
            legit_accept: true,
            aborted: false,
            alarm: false,
        }
    }
}

impl Tallies {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rate_mut(&mut self, key: &str) -> &mut Rate {
        self.rates.entry(key.to_string()).or_default()
    }

    pub fn set_rate(&mut self, key: &str, num: u64, den: u64) {
        self.rates.insert(key.to_string(), Rate::new(num, den));
    }

    pub fn incr(&mut self, key: &str, by: u64) {
        *self.counts.entry(key.to_string()).or_default() += by;
    }

    pub fn set_count(&mut self, key: &str, v: u64) {
        self.counts.insert(key.to_string(), v);
    }

    pub fn set_value(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn abort(&mut self, _reason: &str) {
        self.aborted = true;
        self.legit_accept = false;
    }
}

/// Metrics aggregated over one or more trials.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Metrics {
    pub rates: BTreeMap<String, Rate>,
    pub counts: BTreeMap<String, u64>,
    /// Trial means of scalar values.
    pub values: BTreeMap<String, f64>,
    pub eve_knowledge: Option<Rate>,
    /// Forgery acceptance over trials.
    pub forge_success: Option<Rate>,
    /// Legitimate acceptance over trials.
    pub acceptance: Rate,
    pub aborts: u64,
    pub alarms: u64,
}

/// Deterministic aggregation of one transcript into per-trial metrics.
pub fn compute_metrics(transcript: &ProtocolTranscript) -> Metrics {
    let tallies: Tallies = transcript
        .outputs
        .get("tallies")
        .map(|v| serde_json::from_value(v.clone()).expect("tallies output is well formed"))
        .unwrap_or_default();
    let mut m = Metrics {
        rates: tallies.rates,
        counts: tallies.counts,
        values: tallies.values,
        eve_knowledge: tallies.eve_knowledge,
        forge_success: tallies.forge_accept.map(Rate::from_bool),
        acceptance: Rate::from_bool(tallies.legit_accept),
        aborts: tallies.aborted as u64,
        alarms: tallies.alarm as u64,
    };
    m.counts
        .insert("transcript_events".into(), transcript.events.len() as u64);
    m
}

/// Merge per-trial metrics into one aggregate. Rates and counts sum; values
/// average over trials.
pub fn merge_metrics<'a>(per_trial: impl IntoIterator<Item = &'a Metrics>) -> Metrics {
    let mut out = Metrics::default();
    let mut trials = 0u64;
    for m in per_trial {
        trials += 1;
        for (k, r) in &m.rates {
            out.rates.entry(k.clone()).or_default().merge(*r);
        }
        for (k, c) in &m.counts {
            *out.counts.entry(k.clone()).or_default() += c;
        }
        for (k, v) in &m.values {
            *out.values.entry(k.clone()).or_default() += v;
        }
        if let Some(r) = m.eve_knowledge {
            out.eve_knowledge.get_or_insert_with(Rate::default).merge(r);
        }
        if let Some(r) = m.forge_success {
            out.forge_success.get_or_insert_with(Rate::default).merge(r);
        }
        out.acceptance.merge(m.acceptance);
        out.aborts += m.aborts;
        out.alarms += m.alarms;
    }
    if trials > 0 {
        for v in out.values.values_mut() {
            *v /= trials as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_arithmetic() {
        let mut r = Rate::new(1, 4);
        assert_eq!(r.rate(), 0.25);
        r.merge(Rate::new(3, 4));
        assert_eq!(r.rate(), 0.5);
        assert!(r.std_err() > 0.0);
        assert_eq!(Rate::default().rate(), 0.0);
    }

    #[test]
    fn merge_averages_values_and_sums_rates() {
        let mut a = Metrics::default();
        a.values.insert("x".into(), 1.0);
        a.rates.insert("r".into(), Rate::new(1, 2));
        a.acceptance = Rate::from_bool(true);
        let mut b = Metrics::default();
        b.values.insert("x".into(), 3.0);
        b.rates.insert("r".into(), Rate::new(1, 2));
        b.acceptance = Rate::from_bool(false);
        let merged = merge_metrics([&a, &b]);
        assert_eq!(merged.values["x"], 2.0);
        assert_eq!(merged.rates["r"], Rate::new(2, 4));
        assert_eq!(merged.acceptance, Rate::new(1, 2));
    }
}
