//! Wavelength-dependent beam splitter steering: Eve resends her measured
//! state at a wavelength that routes it into her own basis arm with high
//! probability.

use crate::photonic::BsModel;
use crate::protocols::common::Bb84Basis;

/// Wavelength choices per resend basis.
#[derive(Debug, Clone, Copy)]
pub struct WavelengthResender {
    pub lambda_z_nm: f64,
    pub lambda_x_nm: f64,
}

impl WavelengthResender {
    pub fn wavelength_for(&self, basis: Bb84Basis) -> f64 {
        match basis {
            Bb84Basis::Z => self.lambda_z_nm,
            Bb84Basis::X => self.lambda_x_nm,
        }
    }

    /// The receiver beam splitter response this attack exploits: the nominal
    /// wavelength stays 50:50 while the two attack points steer toward the
    /// Z arm with transmittance `t_attack` and `1 - t_attack`.
    pub fn receiver_bs_table(&self, nominal_nm: f64, t_attack: f64) -> Vec<(f64, f64)> {
        let mut table = vec![
            (self.lambda_z_nm, t_attack),
            (nominal_nm, 0.5),
            (self.lambda_x_nm, 1.0 - t_attack),
        ];
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Extend flat support a little beyond the attack points.
        let lo = table.first().unwrap().0 - 10.0;
        let hi = table.last().unwrap().0 + 10.0;
        let (t_lo, t_hi) = (table.first().unwrap().1, table.last().unwrap().1);
        table.insert(0, (lo, t_lo));
        table.push((hi, t_hi));
        table
    }

    pub fn receiver_bs(&self, nominal_nm: f64, t_attack: f64) -> BsModel {
        BsModel::with_table(self.receiver_bs_table(nominal_nm, t_attack)).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::derive_stream;
    use crate::photonic::{bs_route, Port};

    #[test]
    fn attack_wavelengths_steer_into_the_intended_arm() {
        let r = WavelengthResender {
            lambda_z_nm: 1540.0,
            lambda_x_nm: 1560.0,
        };
        let bs = r.receiver_bs(1550.0, 0.99);
        let mut rng = derive_stream(71, "wl");
        let n = 100_000;
        let z_hits = (0..n)
            .filter(|_| bs_route(&bs, r.wavelength_for(Bb84Basis::Z), &mut rng).unwrap() == Port::A)
            .count();
        let x_hits = (0..n)
            .filter(|_| bs_route(&bs, r.wavelength_for(Bb84Basis::X), &mut rng).unwrap() == Port::B)
            .count();
        let fz = z_hits as f64 / n as f64;
        let fx = x_hits as f64 / n as f64;
        assert!((fz - 0.99).abs() < 0.005, "z steering {fz}");
        assert!((fx - 0.99).abs() < 0.005, "x steering {fx}");
    }

    #[test]
    fn nominal_wavelength_stays_balanced() {
        let r = WavelengthResender {
            lambda_z_nm: 1540.0,
            lambda_x_nm: 1560.0,
        };
        let bs = r.receiver_bs(1550.0, 0.99);
        let mut rng = derive_stream(72, "wl-nominal");
        let n = 100_000;
        let a = (0..n)
            .filter(|_| bs_route(&bs, 1550.0, &mut rng).unwrap() == Port::A)
            .count();
        let f = a as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.01, "got {f}");
    }
}
