//! The stochastic discrete nonlinear Schrödinger system: a Kronecker-delta
//! two-body tensor `H_{jklm} = δ_jk δ_kl δ_lm`, per-mode number couplings
//! `X_m = √c e_m e_mᵀ`, closed-form 2×2 diffusion blocks with eigenvalues
//! `λ± = (|z_j|²/4n)(2c ± √(1+4c²))`, and the accuracy dial `c = 3t/(8ε)`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::dynamics::{SystemSpec, TwoBodyTensor};
use crate::linalg::HermitianMatrix;
use crate::{Error, Result};

/// Parameters of the stochastic DNSE system.
#[derive(Debug, Clone)]
pub struct DnseParams {
    pub modes: usize,
    pub bosons: usize,
    /// Measurement strength c ≥ 0 (dimensionless).
    pub coupling: f64,
    /// One-body hopping Hamiltonian; defaults to the nearest-neighbor ring.
    pub hopping: HermitianMatrix,
}

impl DnseParams {
    pub fn new(modes: usize, bosons: usize, coupling: f64) -> Result<Self> {
        if modes == 0 || bosons == 0 {
            return Err(Error::InvalidParameter {
                context: "DnseParams::new",
                detail: "modes and bosons must be ≥ 1".into(),
            });
        }
        if !(coupling >= 0.0) {
            return Err(Error::InvalidParameter {
                context: "DnseParams::new",
                detail: format!("coupling must be ≥ 0, got {coupling}"),
            });
        }
        Ok(Self {
            modes,
            bosons,
            coupling,
            hopping: ring_hopping(modes),
        })
    }

    pub fn with_hopping(mut self, hopping: HermitianMatrix) -> Result<Self> {
        if hopping.dim() != self.modes {
            return Err(Error::Dimension {
                context: "DnseParams::with_hopping",
                expected: self.modes,
                got: hopping.dim(),
            });
        }
        self.hopping = hopping;
        Ok(self)
    }
}

/// Nearest-neighbor ring hopping: 1 on the two off-diagonals with periodic
/// wrap (a single 1 between the two sites when N = 2, zero matrix when N = 1).
pub fn ring_hopping(modes: usize) -> HermitianMatrix {
    let m = DMatrix::from_fn(modes, modes, |j, k| {
        let diff = (j as i64 - k as i64).rem_euclid(modes as i64);
        if j != k && (diff == 1 || diff == modes as i64 - 1) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    HermitianMatrix::new(m).expect("ring hopping is real symmetric")
}

/// `H_{jklm} = δ_jk δ_kl δ_lm`.
pub fn dnse_tensor(modes: usize) -> TwoBodyTensor {
    TwoBodyTensor::from_fn(modes, |j, k, l, m| {
        if j == k && k == l && l == m {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
    .expect("Kronecker tensor lifts to a Hermitian operator")
}

/// The N diagonal coupling matrices `√c · e_m e_mᵀ`.
pub fn dnse_xs(modes: usize, coupling: f64) -> Vec<HermitianMatrix> {
    (0..modes)
        .map(|m| {
            let mut x = DMatrix::zeros(modes, modes);
            x[(m, m)] = C64::new(coupling.sqrt(), 0.0);
            HermitianMatrix::new(x).expect("diagonal real matrix")
        })
        .collect()
}

/// Assembles the full open system for the given parameters.
pub fn build_dnse_spec(p: &DnseParams) -> Result<SystemSpec> {
    SystemSpec::new(
        p.hopping.clone(),
        dnse_tensor(p.modes),
        dnse_xs(p.modes, p.coupling),
        p.bosons,
    )
}

/// The 2×2 diffusion block of a single mode amplitude `z_j`.
pub fn dnse_block(z_j: C64, coupling: f64, bosons: usize) -> Matrix2<f64> {
    let inv_n = 1.0 / bosons as f64;
    let z_sq = z_j * z_j;
    let a = 0.25 * z_sq.im + coupling * z_j.im * z_j.im;
    let b = -0.25 * z_sq.re - 0.5 * coupling * z_sq.im;
    let d = -0.25 * z_sq.im + coupling * z_j.re * z_j.re;
    Matrix2::new(a, b, b, d) * inv_n
}

/// Closed-form eigenvalues `λ± = (|z_j|²/4n)(2c ± √(1+4c²))` of
/// [`dnse_block`]; `λ₊ ≥ 0 ≥ λ₋` for all `c ≥ 0`.
pub fn lambda_pm(z_j: C64, coupling: f64, bosons: usize) -> (f64, f64) {
    let scale = z_j.norm_sqr() / (4.0 * bosons as f64);
    let root = (1.0 + 4.0 * coupling * coupling).sqrt();
    (scale * (2.0 * coupling + root), scale * (2.0 * coupling - root))
}

/// Accuracy dial `c = 3t/(8ε)`: running with this coupling keeps the
/// trace-norm error of the clipped-diffusion evolution at most ε by time t.
pub fn c_for_error(t: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            context: "c_for_error",
            detail: format!("epsilon must be > 0, got {epsilon}"),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            context: "c_for_error",
            detail: format!("t must be ≥ 0, got {t}"),
        });
    }
    Ok(3.0 * t / (8.0 * epsilon))
}

/// `α(z) ≤ 1/(16 n c)`: uniform bound on the negative-eigenvalue mass of the
/// DNSE diffusion matrix over the unit sphere.
pub fn alpha_upper_bound(coupling: f64, bosons: usize) -> Result<f64> {
    if !(coupling > 0.0) {
        return Err(Error::InvalidParameter {
            context: "alpha_upper_bound",
            detail: "the bound diverges at c = 0".into(),
        });
    }
    if bosons == 0 {
        return Err(Error::InvalidParameter {
            context: "alpha_upper_bound",
            detail: "bosons must be ≥ 1".into(),
        });
    }
    Ok(1.0 / (16.0 * bosons as f64 * coupling))
}

/// Trace-norm error bound `(3/8)(t/c)` of the clipped-diffusion evolution.
pub fn trace_error_bound(t: f64, coupling: f64) -> f64 {
    0.375 * t / coupling
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{compute_d, neg_mass};
    use crate::dynamics::{compute_drift, dnse_rhs};
    use crate::linalg::{sym_eig, SymmetricRealMatrix};
    use crate::test_support::{rand_unit_mode, Splitmix};

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tensor_support_is_the_diagonal() {
        let t = dnse_tensor(2);
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    for m in 0..2 {
                        let expect = if j == k && k == l && l == m { 1.0 } else { 0.0 };
                        assert_eq!(t.get(j, k, l, m), c64(expect, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn xs_are_sqrt_c_on_the_diagonal() {
        let xs = dnse_xs(2, 4.0);
        assert_eq!(xs.len(), 2);
        assert_eq!(xs[0].matrix()[(0, 0)], c64(2.0, 0.0));
        assert_eq!(xs[0].matrix()[(1, 1)], c64(0.0, 0.0));
        assert_eq!(xs[1].matrix()[(0, 0)], c64(0.0, 0.0));
        assert_eq!(xs[1].matrix()[(1, 1)], c64(2.0, 0.0));
    }

    #[test]
    fn ring_hopping_shapes() {
        let h2 = ring_hopping(2);
        assert_eq!(h2.matrix()[(0, 1)], c64(1.0, 0.0));
        assert_eq!(h2.matrix()[(0, 0)], c64(0.0, 0.0));
        let h4 = ring_hopping(4);
        assert_eq!(h4.matrix()[(0, 1)], c64(1.0, 0.0));
        assert_eq!(h4.matrix()[(0, 3)], c64(1.0, 0.0));
        assert_eq!(h4.matrix()[(0, 2)], c64(0.0, 0.0));
        assert_eq!(ring_hopping(1).matrix()[(0, 0)], c64(0.0, 0.0));
    }

    #[test]
    fn drift_reduces_to_dnse_rhs_when_coupling_term_removed() {
        let mut rng = Splitmix::new(3);
        let p = DnseParams::new(2, 4, 1.3).unwrap();
        let spec = build_dnse_spec(&p).unwrap();
        for _ in 0..20 {
            let z = rand_unit_mode(&mut rng, 2);
            let mut f = compute_drift(&z, &spec).unwrap();
            // Σ X_m² = c·I for the DNSE couplings; add the 1/n term back.
            f += &z.amplitudes * c64(p.coupling / p.bosons as f64, 0.0);
            let reference = dnse_rhs(&z, &p.hopping).unwrap();
            let dev = (f - reference).iter().map(|e| e.norm()).fold(0.0, f64::max);
            assert!(dev <= 1e-12, "dev {dev}");
        }
    }

    #[test]
    fn block_examples() {
        assert_eq!(dnse_block(c64(0.0, 0.0), 2.0, 3), Matrix2::zeros());
        let b = dnse_block(c64(1.0, 0.0), 1.5, 2);
        let expect = Matrix2::new(0.0, -0.25, -0.25, 1.5) / 2.0;
        assert!((b - expect).amax() < 1e-15);
    }

    #[test]
    fn blocks_tile_the_full_diffusion_matrix() {
        let mut rng = Splitmix::new(5);
        let p = DnseParams::new(3, 2, 0.8).unwrap();
        let spec = build_dnse_spec(&p).unwrap();
        for _ in 0..10 {
            let z = rand_unit_mode(&mut rng, 3);
            let d = compute_d(&z, &spec).unwrap();
            let n = 3;
            for j in 0..n {
                let block = dnse_block(z.amplitudes[j], p.coupling, p.bosons);
                assert!((d.matrix()[(j, j)] - block[(0, 0)]).abs() <= 1e-12);
                assert!((d.matrix()[(j, n + j)] - block[(0, 1)]).abs() <= 1e-12);
                assert!((d.matrix()[(n + j, j)] - block[(1, 0)]).abs() <= 1e-12);
                assert!((d.matrix()[(n + j, n + j)] - block[(1, 1)]).abs() <= 1e-12);
            }
            // Off-block entries vanish: modes never couple in D.
            for j in 0..n {
                for k in 0..n {
                    if j == k {
                        continue;
                    }
                    assert!(d.matrix()[(j, k)].abs() <= 1e-14);
                    assert!(d.matrix()[(j, n + k)].abs() <= 1e-14);
                    assert!(d.matrix()[(n + j, n + k)].abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn lambda_closed_form_examples() {
        let (lp, lm) = lambda_pm(c64(1.0, 0.0), 0.0, 1);
        assert!((lp - 0.25).abs() < 1e-15);
        assert!((lm + 0.25).abs() < 1e-15);

        let (lp, lm) = lambda_pm(c64(1.0, 0.0), 1.0, 2);
        let root5 = 5.0_f64.sqrt();
        assert!((lp - (2.0 + root5) / 8.0).abs() < 1e-15);
        assert!((lm - (2.0 - root5) / 8.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_matches_block_eigensolve() {
        let mut rng = Splitmix::new(7);
        for _ in 0..100 {
            let z = c64(rng.symmetric(), rng.symmetric());
            let coupling = 10.0 * rng.uniform();
            let bosons = 1 + (rng.next_u64() % 8) as usize;
            let block = dnse_block(z, coupling, bosons);
            let s = SymmetricRealMatrix::new(DMatrix::from_row_slice(
                2,
                2,
                &[block[(0, 0)], block[(0, 1)], block[(1, 0)], block[(1, 1)]],
            ))
            .unwrap();
            let eig = sym_eig(&s);
            let (lp, lm) = lambda_pm(z, coupling, bosons);
            assert!((eig.values[0] - lp).abs() <= 1e-12, "{} vs {lp}", eig.values[0]);
            assert!((eig.values[1] - lm).abs() <= 1e-12, "{} vs {lm}", eig.values[1]);
        }
    }

    #[test]
    fn lambda_signs_and_negative_bound() {
        let mut rng = Splitmix::new(11);
        for _ in 0..100 {
            let z = c64(rng.symmetric(), rng.symmetric());
            if z.norm_sqr() < 1e-12 {
                continue;
            }
            let coupling = 10.0 * rng.uniform() + 1e-3;
            let bosons = 1 + (rng.next_u64() % 8) as usize;
            let (lp, lm) = lambda_pm(z, coupling, bosons);
            assert!(lp > 0.0 && lm < 0.0);
            let bound = z.norm_sqr() / (16.0 * bosons as f64 * coupling);
            assert!(lm.abs() <= bound + 1e-15, "{} vs {bound}", lm.abs());
        }
    }

    #[test]
    fn block_negative_masses_add_up() {
        let mut rng = Splitmix::new(13);
        let p = DnseParams::new(3, 4, 0.6).unwrap();
        let spec = build_dnse_spec(&p).unwrap();
        for _ in 0..10 {
            let z = rand_unit_mode(&mut rng, 3);
            let d = compute_d(&z, &spec).unwrap();
            let total = neg_mass(&d);
            let from_blocks: f64 = (0..3)
                .map(|j| {
                    let (_, lm) = lambda_pm(z.amplitudes[j], p.coupling, p.bosons);
                    -lm
                })
                .sum();
            assert!((total - from_blocks).abs() <= 1e-12);
        }
    }

    #[test]
    fn accuracy_dial() {
        assert!((c_for_error(1.0, 0.1).unwrap() - 3.75).abs() < 1e-15);
        assert_eq!(c_for_error(0.0, 0.5).unwrap(), 0.0);
        assert!(c_for_error(1.0, 0.0).is_err());
        // Plugging c back recovers ε exactly.
        let t = 2.0;
        let eps = 0.05;
        let coupling = c_for_error(t, eps).unwrap();
        assert_eq!(trace_error_bound(t, coupling), eps);
    }

    #[test]
    fn alpha_bound_arithmetic() {
        assert!((alpha_upper_bound(3.75, 2).unwrap() - 1.0 / 120.0).abs() < 1e-18);
        let b1 = alpha_upper_bound(1.0, 2).unwrap();
        let b2 = alpha_upper_bound(2.0, 2).unwrap();
        assert!((b1 - 2.0 * b2).abs() < 1e-15);
        assert!(alpha_upper_bound(0.0, 2).is_err());
    }

    #[test]
    fn alpha_bound_dominates_measured_negative_mass() {
        let mut rng = Splitmix::new(17);
        let p = DnseParams::new(2, 2, 3.75).unwrap();
        let spec = build_dnse_spec(&p).unwrap();
        let bound = alpha_upper_bound(p.coupling, p.bosons).unwrap();
        for _ in 0..100 {
            let z = rand_unit_mode(&mut rng, 2);
            let d = compute_d(&z, &spec).unwrap();
            assert!(neg_mass(&d) <= bound + 1e-12);
        }
    }
}
