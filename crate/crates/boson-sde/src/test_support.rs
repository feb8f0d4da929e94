//! Deterministic random generators for unit tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::linalg::{HermitianMatrix, ModeVector, RealState, SymmetricRealMatrix};

/// Splitmix64; small, seedable, good enough for test data.
pub struct Splitmix(u64);

impl Splitmix {
    pub fn new(seed: u64) -> Self {
        Splitmix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [-1, 1).
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.uniform() - 1.0
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn rand_complex_vector(rng: &mut Splitmix, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.symmetric(), rng.symmetric()))
}

pub fn rand_unit_mode(rng: &mut Splitmix, n: usize) -> ModeVector {
    loop {
        let v = rand_complex_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-3 {
            return ModeVector::new(v / C64::new(norm, 0.0)).unwrap();
        }
    }
}

pub fn rand_unit_real(rng: &mut Splitmix, modes: usize) -> RealState {
    loop {
        let v = DVector::from_fn(2 * modes, |_, _| rng.symmetric());
        let norm = v.norm();
        if norm > 1e-3 {
            return RealState::new(v / norm).unwrap();
        }
    }
}

pub fn rand_symmetric(rng: &mut Splitmix, n: usize) -> SymmetricRealMatrix {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = rng.symmetric();
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    SymmetricRealMatrix::new(m).unwrap()
}

pub fn rand_hermitian(rng: &mut Splitmix, n: usize) -> HermitianMatrix {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(rng.symmetric(), 0.0);
        for k in (j + 1)..n {
            let v = C64::new(rng.symmetric(), rng.symmetric());
            m[(j, k)] = v;
            m[(k, j)] = v.conj();
        }
    }
    HermitianMatrix::new(m).unwrap()
}

/// Random unit `w` with `Re(z†w) = 0`, the admissible direction set for the
/// cancellation construction.
pub fn rand_admissible_w(rng: &mut Splitmix, z: &ModeVector) -> DVector<C64> {
    loop {
        let raw = rand_complex_vector(rng, z.dim());
        let overlap = z.amplitudes.dotc(&raw); // z†·raw
        let w = raw - z.amplitudes.clone() * C64::new(overlap.re, 0.0);
        let norm = w.norm();
        if norm > 1e-3 {
            return w / C64::new(norm, 0.0);
        }
    }
}
