//! Pure states of 1-3 polarization qubits and Born-rule measurement.
//!
//! Amplitude indexing uses the convention H = 0, V = 1 per subsystem, with
//! subsystem 0 as the most significant bit. For three qubits, index 0 is
//! |HHH> and index 7 is |VVV>.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

/// Tolerance on the squared norm of any state-producing operation.
pub const NORM_TOL: f64 = 1e-9;

/// A normalized state vector over 1, 2 or 3 qubits.
#[derive(Debug, Clone)]
pub struct PureState {
    amps: Vec<Complex64>,
}

/// Measurement basis for a single polarization qubit.
///
/// `Phase(delta)` is the basis {(|0> + e^{i delta}|1>)/sqrt(2),
/// (|0> - e^{i delta}|1>)/sqrt(2)}; `X` and `Y` are its delta = 0 and
/// delta = pi/2 special cases kept as named variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasBasis {
    Z,
    X,
    Y,
    Phase(f64),
}

/// Two-valued measurement outcome; `Plus` labels the first basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

/// Bob's flip-or-not encoding operators: `U` maps |0> to -|1> and |1> to |0>,
/// `I` is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FlipOp {
    I,
    U,
}

impl Outcome {
    pub fn sign(self) -> i32 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    /// Bit convention: `Plus` is 0, `Minus` is 1.
    pub fn bit(self) -> u8 {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_sign(sign: i32) -> Self {
        if sign >= 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl MeasBasis {
    /// Orthonormal basis pair; the first element carries outcome label +1.
    pub fn vectors(self) -> (PureState, PureState) {
        let r = FRAC_1_SQRT_2;
        match self {
            MeasBasis::Z => (
                PureState::qubit(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
                PureState::qubit(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            ),
            MeasBasis::X => (
                PureState::qubit(Complex64::new(r, 0.0), Complex64::new(r, 0.0)),
                PureState::qubit(Complex64::new(r, 0.0), Complex64::new(-r, 0.0)),
            ),
            MeasBasis::Y => (
                PureState::qubit(Complex64::new(r, 0.0), Complex64::new(0.0, r)),
                PureState::qubit(Complex64::new(r, 0.0), Complex64::new(0.0, -r)),
            ),
            MeasBasis::Phase(delta) => {
                let e = Complex64::from_polar(r, delta);
                (
                    PureState::qubit(Complex64::new(r, 0.0), e),
                    PureState::qubit(Complex64::new(r, 0.0), -e),
                )
            }
        }
    }

    /// Phase angle of the basis on the equator of the Bloch sphere.
    pub fn delta(self) -> f64 {
        match self {
            MeasBasis::Z => panic!("Z basis has no equatorial phase"),
            MeasBasis::X => 0.0,
            MeasBasis::Y => PI / 2.0,
            MeasBasis::Phase(d) => d,
        }
    }
}

impl PureState {
    /// Build a state from raw amplitudes; the length must be 2, 4 or 8 and
    /// the squared norm must already be 1 within [`NORM_TOL`].
    pub fn new(amps: Vec<Complex64>) -> Result<Self, crate::error::SimError> {
        if !matches!(amps.len(), 2 | 4 | 8) {
            return Err(crate::error::SimError::Domain(format!(
                "state dimension {} is not 2^k for k in 1..=3",
                amps.len()
            )));
        }
        let s = Self { amps };
        if (s.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(crate::error::SimError::Domain(format!(
                "state squared norm {} deviates from 1 beyond {NORM_TOL}",
                s.norm_sqr()
            )));
        }
        Ok(s)
    }

    /// Single-qubit state from two amplitudes, normalized.
    pub fn qubit(a0: Complex64, a1: Complex64) -> Self {
        let n = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        assert!(n > 0.0, "zero vector is not a state");
        Self {
            amps: vec![a0 / n, a1 / n],
        }
    }

    /// |H> = |0>.
    pub fn horizontal() -> Self {
        Self::qubit(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// |V> = |1>.
    pub fn vertical() -> Self {
        Self::qubit(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// |+> = (|0> + |1>)/sqrt(2).
    pub fn plus() -> Self {
        Self::qubit(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    /// |-> = (|0> - |1>)/sqrt(2).
    pub fn minus() -> Self {
        Self::qubit(Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0))
    }

    /// (|0> + e^{i theta}|1>)/sqrt(2).
    pub fn equatorial(theta: f64) -> Self {
        Self::qubit(Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, theta))
    }

    pub fn num_qubits(&self) -> usize {
        match self.amps.len() {
            2 => 1,
            4 => 2,
            8 => 3,
            _ => unreachable!(),
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that measuring `subsystem` in `basis` yields `Plus`.
    pub fn prob_plus(&self, subsystem: usize, basis: MeasBasis) -> f64 {
        let (v_plus, _) = basis.vectors();
        self.branch_prob(subsystem, &v_plus)
    }

    fn branch_prob(&self, subsystem: usize, v: &PureState) -> f64 {
        let k = self.num_qubits();
        assert!(subsystem < k, "subsystem {subsystem} out of range for {k} qubits");
        let bit = 1usize << (k - 1 - subsystem);
        let (v0, v1) = (v.amps[0].conj(), v.amps[1].conj());
        let mut p = 0.0;
        for i0 in 0..self.amps.len() {
            if i0 & bit != 0 {
                continue;
            }
            let c = v0 * self.amps[i0] + v1 * self.amps[i0 | bit];
            p += c.norm_sqr();
        }
        p
    }

    fn collapse(&self, subsystem: usize, v: &PureState, prob: f64) -> PureState {
        assert!(prob > 1e-12, "degenerate measurement branch sampled");
        let k = self.num_qubits();
        let bit = 1usize << (k - 1 - subsystem);
        let (c0, c1) = (v.amps[0].conj(), v.amps[1].conj());
        let scale = 1.0 / prob.sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for i0 in 0..self.amps.len() {
            if i0 & bit != 0 {
                continue;
            }
            let c = (c0 * self.amps[i0] + c1 * self.amps[i0 | bit]) * scale;
            out[i0] = v.amps[0] * c;
            out[i0 | bit] = v.amps[1] * c;
        }
        PureState { amps: out }
    }

    /// Born-rule measurement of one subsystem. Returns the sampled outcome
    /// and the renormalized collapsed state; re-measuring the collapsed
    /// subsystem in the same basis reproduces the outcome.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        subsystem: usize,
        basis: MeasBasis,
        rng: &mut R,
    ) -> (Outcome, PureState) {
        let (v_plus, v_minus) = basis.vectors();
        let p_plus = self.branch_prob(subsystem, &v_plus);
        let u: f64 = rng.random();
        if u < p_plus {
            (Outcome::Plus, self.collapse(subsystem, &v_plus, p_plus))
        } else {
            (
                Outcome::Minus,
                self.collapse(subsystem, &v_minus, 1.0 - p_plus),
            )
        }
    }

    /// Multiply the |1> amplitude by e^{i phi}. Single-qubit states only.
    pub fn apply_phase(&self, phi: f64) -> PureState {
        assert_eq!(self.num_qubits(), 1, "apply_phase acts on single qubits");
        let mut amps = self.amps.clone();
        amps[1] *= Complex64::from_polar(1.0, phi);
        (PureState { amps }).canonical()
    }

    /// Apply `U` or `I`; the global phase is normalized away afterwards.
    pub fn apply_flip(&self, op: FlipOp) -> PureState {
        assert_eq!(self.num_qubits(), 1, "apply_flip acts on single qubits");
        let amps = match op {
            FlipOp::I => self.amps.clone(),
            // U = |0><1| - |1><0|
            FlipOp::U => vec![self.amps[1], -self.amps[0]],
        };
        (PureState { amps }).canonical()
    }

    /// Fix the first nonzero amplitude to be real nonnegative, so states that
    /// differ only by a global phase compare equal.
    pub fn canonical(mut self) -> PureState {
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-12) {
            let phase = a / a.norm();
            for amp in &mut self.amps {
                *amp /= phase;
            }
        }
        self
    }

    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.amps.len() == other.amps.len()
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= tol)
    }
}

/// The three-photon Greenberger-Horne-Zeilinger triplet
/// (|HHH> + |VVV>)/sqrt(2).
pub fn ghz_state() -> PureState {
    let mut amps = vec![Complex64::new(0.0, 0.0); 8];
    amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[7] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    PureState { amps }
}

/// Reduce an angle to [0, 2*pi).
pub fn wrap_angle(phi: f64) -> f64 {
    let mut a = phi % TAU;
    if a < 0.0 {
        a += TAU;
    }
    a
}
