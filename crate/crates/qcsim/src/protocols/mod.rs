//! Protocol runners for the seven surveyed variants.

pub mod bqc;
pub mod common;
pub mod qds_dss;
pub mod qds_iss;
pub mod qrng;
pub mod qsdc;
pub mod qss_ghz;
pub mod qss_single;

use crate::config::ScenarioConfig;
use crate::error::SimError;
use crate::harness::{derive_stream, ProtocolTranscript, RandomStream};

/// Context for one trial of one scenario.
pub struct RunCtx<'a> {
    pub cfg: &'a ScenarioConfig,
    /// Effective seed for this trial (already trial-derived).
    pub seed: u64,
}

impl<'a> RunCtx<'a> {
    pub fn new(cfg: &'a ScenarioConfig, seed: u64) -> Self {
        Self { cfg, seed }
    }

    /// Label-separated stream namespaced under this trial's seed.
    pub fn rng(&self, label: &str) -> RandomStream {
        derive_stream(self.seed, label)
    }

    pub fn survival(&self) -> f64 {
        10f64.powf(-self.cfg.channel.loss_db / 10.0)
    }
}

/// Run one trial of the configured protocol.
pub fn run_trial(ctx: &RunCtx) -> Result<ProtocolTranscript, SimError> {
    use crate::config::ProtocolId::*;
    match ctx.cfg.protocol {
        QdsIss => qds_iss::run(ctx),
        QdsDss => qds_dss::run(ctx),
        QssGhz => qss_ghz::run(ctx),
        QssSingle => qss_single::run(ctx),
        SiQrng => qrng::run(ctx),
        QsdcDl04 => qsdc::run(ctx),
        Bqc => bqc::run(ctx),
    }
}
