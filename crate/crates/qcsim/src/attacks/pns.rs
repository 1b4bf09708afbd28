//! Photon-number splitting on multi-photon weak coherent pulses.

/// Split a realized pulse: Eve stores one photon and forwards the rest.
/// Returns the forwarded photon count, or `None` when the round is not
/// exploitable (fewer than two photons).
pub fn pns_split(photon_count: u64) -> Option<u64> {
    (photon_count >= 2).then(|| photon_count - 1)
}
