//! Observable evaluation on both sides of the correspondence. A one-body
//! observable `Ô = (1/n) O_jk â†_j â_k` has the z-side estimator
//! `y(z) = z†Oz` on unit states; general Hermitian Fock-space matrices
//! evaluate on the density-matrix side only.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::linalg::{spectral_norm_hermitian, HermitianMatrix, RealState};
use crate::oracle::{lift_one_body, DensityMatrix, FockBasis};
use crate::tol;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum Observable {
    /// `O_jk â†_j â_k`, divided by the boson count when `scaled` is set
    /// (the scaled form keeps expectation values n-independent on coherent
    /// product states).
    OneBody {
        matrix: HermitianMatrix,
        scaled: bool,
    },
    /// A Hermitian matrix given directly on the occupation basis.
    FockMatrix { matrix: HermitianMatrix },
}

impl Observable {
    /// Scaled one-body observable, the common case.
    pub fn one_body(matrix: HermitianMatrix) -> Self {
        Observable::OneBody {
            matrix,
            scaled: true,
        }
    }

    /// Projector onto mode `j` as a scaled one-body observable:
    /// `y(z) = |z_j|²` on unit states.
    pub fn mode_occupation(modes: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(modes, modes);
        m[(j, j)] = C64::new(1.0, 0.0);
        Self::one_body(HermitianMatrix::new(m).expect("diagonal projector"))
    }

    /// The observable as a matrix over the occupation basis.
    pub fn lift(&self, basis: &FockBasis) -> Result<DMatrix<C64>> {
        match self {
            Observable::OneBody { matrix, scaled } => {
                let mut lifted = lift_one_body(matrix.matrix(), basis)?;
                if *scaled {
                    lifted /= C64::new(basis.bosons() as f64, 0.0);
                }
                Ok(lifted)
            }
            Observable::FockMatrix { matrix } => {
                if matrix.dim() != basis.dim() {
                    return Err(Error::Dimension {
                        context: "Observable::lift (Fock matrix)",
                        expected: basis.dim(),
                        got: matrix.dim(),
                    });
                }
                Ok(matrix.matrix().clone())
            }
        }
    }
}

/// `Tr[Ô ρ]`; the imaginary residue must stay below [`tol::REAL_EXPECTATION`].
pub fn expect_rho(obs: &Observable, rho: &DensityMatrix) -> Result<f64> {
    let lifted = obs.lift(&rho.basis)?;
    let dim = rho.entries.nrows();
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..dim {
        for k in 0..dim {
            tr += lifted[(j, k)] * rho.entries[(k, j)];
        }
    }
    if tr.im.abs() > tol::REAL_EXPECTATION {
        return Err(Error::Precondition {
            context: "expect_rho",
            detail: format!("imaginary residue {:.3e} in Tr[Ôρ]", tr.im),
        });
    }
    Ok(tr.re)
}

/// Per-sample value of a one-body observable on the z side:
/// `y(z) = |z|^{2(n-1)} z†Oz` (times n for unscaled observables), which is
/// `z†Oz` on unit states and matches [`expect_rho`] ∘ `ensemble_to_rho`
/// exactly on any finite ensemble.
pub fn one_body_sample(obs: &Observable, r: &RealState, bosons: usize) -> Result<f64> {
    let (matrix, scaled) = match obs {
        Observable::OneBody { matrix, scaled } => (matrix, *scaled),
        Observable::FockMatrix { .. } => {
            return Err(Error::Precondition {
                context: "one_body_sample",
                detail: "z-side evaluation needs a one-body observable".into(),
            })
        }
    };
    let z = crate::linalg::to_complex(r);
    if z.dim() != matrix.dim() {
        return Err(Error::Dimension {
            context: "one_body_sample",
            expected: matrix.dim(),
            got: z.dim(),
        });
    }
    let oz = matrix.matrix() * &z.amplitudes;
    let quad: C64 = z.amplitudes.dotc(&oz);
    let norm_sq = z.norm_squared();
    let weight = norm_sq.powi(bosons as i32 - 1);
    let scale = if scaled { 1.0 } else { bosons as f64 };
    Ok(quad.re * weight * scale)
}

/// Sample mean and standard error of `y(z)` over an ensemble snapshot.
pub fn expect_sde(
    obs: &Observable,
    states: &[RealState],
    bosons: usize,
) -> Result<(f64, f64)> {
    if states.is_empty() {
        return Err(Error::EmptyEnsemble {
            context: "expect_sde",
        });
    }
    let mut ys = Vec::with_capacity(states.len());
    for r in states {
        ys.push(one_body_sample(obs, r, bosons)?);
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let std_error = if ys.len() > 1 {
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, std_error))
}

/// Hölder bound `|Õ(t) - O(t)| ≤ ‖Ô‖ ‖ρ̃ - ρ‖_*`.
pub fn output_error_bound(
    obs: &Observable,
    trace_dist: f64,
    basis: &FockBasis,
) -> Result<f64> {
    if trace_dist < 0.0 {
        return Err(Error::InvalidParameter {
            context: "output_error_bound",
            detail: format!("trace distance must be ≥ 0, got {trace_dist}"),
        });
    }
    let lifted = obs.lift(basis)?;
    Ok(spectral_norm_hermitian(&lifted)? * trace_dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{to_real, ModeVector};
    use crate::oracle::{coherent_product_state, ensemble_to_rho};
    use crate::test_support::{rand_hermitian, rand_unit_mode, Splitmix};
    use nalgebra::DVector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn number_fraction_is_one_on_any_state() {
        let mut rng = Splitmix::new(3);
        let basis = crate::oracle::FockBasis::shared(3, 2).unwrap();
        let z = rand_unit_mode(&mut rng, 2);
        let rho = DensityMatrix::from_pure(&coherent_product_state(&z, &basis).unwrap());
        let obs = Observable::one_body(HermitianMatrix::identity(2));
        let val = expect_rho(&obs, &rho).unwrap();
        assert!((val - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mode_occupation_on_coherent_state() {
        let mut rng = Splitmix::new(5);
        for bosons in [1usize, 2, 4] {
            let basis = crate::oracle::FockBasis::shared(bosons, 2).unwrap();
            let z = rand_unit_mode(&mut rng, 2);
            let rho = DensityMatrix::from_pure(&coherent_product_state(&z, &basis).unwrap());
            let obs = Observable::mode_occupation(2, 0);
            let val = expect_rho(&obs, &rho).unwrap();
            let expect = z.amplitudes[0].norm_sqr();
            assert!((val - expect).abs() <= 1e-12, "n = {bosons}");
        }
    }

    #[test]
    fn expect_rho_is_linear() {
        let mut rng = Splitmix::new(7);
        let basis = crate::oracle::FockBasis::shared(2, 2).unwrap();
        let z = rand_unit_mode(&mut rng, 2);
        let rho = DensityMatrix::from_pure(&coherent_product_state(&z, &basis).unwrap());
        let o1 = rand_hermitian(&mut rng, 2);
        let o2 = rand_hermitian(&mut rng, 2);
        let (a, b) = (0.7, -1.3);
        let combined = HermitianMatrix::new(o1.matrix() * c(a, 0.0) + o2.matrix() * c(b, 0.0))
            .unwrap();
        let lhs = expect_rho(&Observable::one_body(combined), &rho).unwrap();
        let rhs = a * expect_rho(&Observable::one_body(o1), &rho).unwrap()
            + b * expect_rho(&Observable::one_body(o2), &rho).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn delta_ensemble_matches_pointwise_value() {
        let mut rng = Splitmix::new(11);
        let z = rand_unit_mode(&mut rng, 2);
        let r = to_real(&z);
        let obs = Observable::mode_occupation(2, 0);
        let (mean, stderr) = expect_sde(&obs, &[r], 3).unwrap();
        assert_eq!(stderr, 0.0);
        assert!((mean - z.amplitudes[0].norm_sqr()).abs() <= 1e-14);
    }

    #[test]
    fn estimators_agree_exactly_on_finite_ensembles() {
        let mut rng = Splitmix::new(13);
        for bosons in [1usize, 2, 3] {
            let basis = crate::oracle::FockBasis::shared(bosons, 2).unwrap();
            // Deliberately non-unit states: the identity is algebraic.
            let states: Vec<RealState> = (0..40)
                .map(|_| {
                    let z = rand_unit_mode(&mut rng, 2);
                    let stretch = 0.9 + 0.2 * rng.uniform();
                    RealState {
                        coords: to_real(&z).coords * stretch,
                    }
                })
                .collect();
            let o = rand_hermitian(&mut rng, 2);
            let obs = Observable::one_body(o);
            let (mean, _) = expect_sde(&obs, &states, bosons).unwrap();
            let rho = ensemble_to_rho(&states, &basis).unwrap();
            let via_rho = expect_rho(&obs, &rho).unwrap();
            assert!(
                (mean - via_rho).abs() <= 1e-10,
                "n = {bosons}: {mean} vs {via_rho}"
            );
        }
    }

    #[test]
    fn identity_mean_is_one_on_renormalized_states() {
        let mut rng = Splitmix::new(17);
        let states: Vec<RealState> = (0..20).map(|_| {
            let z = rand_unit_mode(&mut rng, 2);
            to_real(&z)
        }).collect();
        let obs = Observable::one_body(HermitianMatrix::identity(2));
        let (mean, _) = expect_sde(&obs, &states, 4).unwrap();
        assert!((mean - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fock_matrix_observable_evaluates() {
        let basis = crate::oracle::FockBasis::shared(2, 2).unwrap();
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = DensityMatrix::from_pure(&coherent_product_state(&z, &basis).unwrap());
        // Projector onto the (2,0) occupation state.
        let mut proj = DMatrix::zeros(3, 3);
        proj[(0, 0)] = c(1.0, 0.0);
        let obs = Observable::FockMatrix {
            matrix: HermitianMatrix::new(proj).unwrap(),
        };
        let val = expect_rho(&obs, &rho).unwrap();
        assert!((val - 1.0).abs() <= 1e-14);
        // z-side evaluation refuses non-one-body observables.
        let r = to_real(&z);
        assert!(one_body_sample(&obs, &r, 2).is_err());
    }

    #[test]
    fn holder_bound_examples() {
        let basis = crate::oracle::FockBasis::shared(2, 2).unwrap();
        let obs = Observable::mode_occupation(2, 0);
        assert_eq!(output_error_bound(&obs, 0.0, &basis).unwrap(), 0.0);
        // ‖(1/n) lift(|0⟩⟨0|)‖ = 1 (all bosons in mode 0).
        let bound = output_error_bound(&obs, 0.25, &basis).unwrap();
        assert!((bound - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn scaled_one_body_norm_equals_mode_matrix_norm() {
        let mut rng = Splitmix::new(19);
        let basis = crate::oracle::FockBasis::shared(3, 2).unwrap();
        let o = rand_hermitian(&mut rng, 2);
        let direct = spectral_norm_hermitian(o.matrix()).unwrap();
        let obs = Observable::one_body(o);
        let via_lift = output_error_bound(&obs, 1.0, &basis).unwrap();
        assert!((via_lift - direct).abs() <= 1e-10, "{via_lift} vs {direct}");
    }

    #[test]
    fn unscaled_one_body_scales_with_boson_count() {
        let basis = crate::oracle::FockBasis::shared(3, 2).unwrap();
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = DensityMatrix::from_pure(&coherent_product_state(&z, &basis).unwrap());
        let m = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let raw = Observable::OneBody {
            matrix: m,
            scaled: false,
        };
        // Unscaled number operator on mode 0 counts all n bosons.
        let val = expect_rho(&raw, &rho).unwrap();
        assert!((val - 3.0).abs() <= 1e-12);
        let y = one_body_sample(&raw, &to_real(&z), 3).unwrap();
        assert!((y - 3.0).abs() <= 1e-14);
        let _ = DVector::<f64>::zeros(1);
    }
}
