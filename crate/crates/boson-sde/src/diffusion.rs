//! Diffusion geometry: assembly of the 2N×2N diffusion matrix `D(z)`, its
//! projection onto the unit hypersphere, the positive semi-definite part,
//! the negative-eigenvalue mass, the cancellation construction for adding
//! diffusion along a chosen tangent direction, and the N=2 Pauli
//! demonstration where the geometry closes in closed form.
//!
//! Coordinate layout everywhere: `r = (x₀..x_{N-1}, y₀..y_{N-1})`, so the
//! 2×2 subspace of mode `j` sits at indices `{j, N+j}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::dynamics::SystemSpec;
use crate::linalg::{sym_eig, HermitianMatrix, ModeVector, RealState, SymmetricRealMatrix};
use crate::mix;
use crate::tol;
use crate::{Error, Result};

/// Diffusion direction `u(z) = (Im(Xz), -Re(Xz))` generated by a Hermitian
/// coupling matrix; always orthogonal to `r`.
pub fn diffusion_direction(x: &HermitianMatrix, z: &ModeVector) -> Result<DVector<f64>> {
    let n = z.dim();
    if x.dim() != n {
        return Err(Error::Dimension {
            context: "diffusion_direction",
            expected: n,
            got: x.dim(),
        });
    }
    let xz = x.matrix() * &z.amplitudes;
    let mut u = DVector::zeros(2 * n);
    for j in 0..n {
        u[j] = xz[j].im;
        u[n + j] = -xz[j].re;
    }
    Ok(u)
}

/// `D(z) = (1/n)[ (1/4)(Re B  Im B; Im B  -Re B) + Σ_m u_m u_mᵀ ]`.
pub fn compute_d(z: &ModeVector, spec: &SystemSpec) -> Result<SymmetricRealMatrix> {
    if spec.modes() != z.dim() {
        return Err(Error::Dimension {
            context: "compute_d",
            expected: spec.modes(),
            got: z.dim(),
        });
    }
    if z.norm_squared() == 0.0 {
        return Err(Error::ZeroState { context: "compute_d" });
    }
    Ok(SymmetricRealMatrix::new_unchecked(compute_d_raw(
        &z.amplitudes,
        spec,
    )))
}

pub(crate) fn compute_d_raw(z: &DVector<C64>, spec: &SystemSpec) -> DMatrix<f64> {
    let n = z.len();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    let b = (!spec.tensor().is_zero()).then(|| crate::dynamics::compute_b_raw(z, spec.tensor()));
    let mut xz = DVector::zeros(n);
    assemble_d(z, spec, b.as_ref(), &mut xz, &mut d);
    d
}

/// Shared D(z) assembly; `b` is the precomputed interaction matrix when the
/// tensor is nonzero, `xz` a length-N scratch buffer, `out` preallocated 2N×2N.
pub(crate) fn assemble_d(
    z: &DVector<C64>,
    spec: &SystemSpec,
    b: Option<&DMatrix<C64>>,
    xz: &mut DVector<C64>,
    out: &mut DMatrix<f64>,
) {
    let n = z.len();
    out.fill(0.0);
    if let Some(b) = b {
        for j in 0..n {
            for k in 0..n {
                let re = 0.25 * b[(j, k)].re;
                let im = 0.25 * b[(j, k)].im;
                out[(j, k)] += re;
                out[(j, n + k)] += im;
                out[(n + j, k)] += im;
                out[(n + j, n + k)] -= re;
            }
        }
    }
    for x in spec.xs() {
        x.matrix().mul_to(z, xz);
        // u u^T with u = (Im(Xz), -Re(Xz)).
        for j in 0..n {
            let (uj_top, uj_bot) = (xz[j].im, -xz[j].re);
            for k in 0..n {
                let (uk_top, uk_bot) = (xz[k].im, -xz[k].re);
                out[(j, k)] += uj_top * uk_top;
                out[(j, n + k)] += uj_top * uk_bot;
                out[(n + j, k)] += uj_bot * uk_top;
                out[(n + j, n + k)] += uj_bot * uk_bot;
            }
        }
    }
    *out /= spec.bosons() as f64;
    // The assembly is symmetric up to the floating addition order; make it
    // exact so downstream kernels can rely on it.
    symmetrize(out);
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for k in (j + 1)..n {
            let avg = 0.5 * (m[(j, k)] + m[(k, j)]);
            m[(j, k)] = avg;
            m[(k, j)] = avg;
        }
    }
}

/// Projector sandwich `P D P` with `P = I - r rᵀ`; the result annihilates
/// the radial direction, `D_⊥ r = 0`.
pub fn project_dperp(d: &SymmetricRealMatrix, r: &RealState) -> Result<SymmetricRealMatrix> {
    if d.dim() != r.coords.len() {
        return Err(Error::Dimension {
            context: "project_dperp",
            expected: d.dim(),
            got: r.coords.len(),
        });
    }
    let norm = r.norm();
    if (norm - 1.0).abs() > tol::UNIT_NORM {
        return Err(Error::NotUnitNorm {
            context: "project_dperp",
            norm,
            tolerance: tol::UNIT_NORM,
        });
    }
    let mut out = d.matrix().clone();
    let mut dr = DVector::zeros(out.nrows());
    project_dperp_inplace(&mut out, &r.coords, &mut dr);
    Ok(SymmetricRealMatrix::new_unchecked(out))
}

/// In-place `P D P` expansion `D - (Dr)rᵀ - r(Dr)ᵀ + (rᵀDr) r rᵀ` for unit r;
/// `dr` is a length-2N scratch buffer.
pub(crate) fn project_dperp_inplace(d: &mut DMatrix<f64>, r: &DVector<f64>, dr: &mut DVector<f64>) {
    d.mul_to(r, dr);
    let q = r.dot(dr);
    let n = d.nrows();
    for j in 0..n {
        for k in 0..n {
            d[(j, k)] += q * r[j] * r[k] - dr[j] * r[k] - r[j] * dr[k];
        }
    }
    symmetrize(d);
}

/// Spectral clip to the positive cone: negative eigenvalues of `S` are
/// zeroed, so the result is `(1/2)(S + √(S²))`.
pub fn psd_part(s: &SymmetricRealMatrix) -> SymmetricRealMatrix {
    let eig = sym_eig(s);
    let n = s.dim();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.vectors.column(k);
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += lambda * v[i] * v[j];
            }
        }
    }
    symmetrize(&mut out);
    SymmetricRealMatrix::new_unchecked(out)
}

/// Absolute sum of negative eigenvalues, `‖S‖_* - Tr(S)` (the α of a
/// diffusion matrix).
pub fn neg_mass(s: &SymmetricRealMatrix) -> f64 {
    sym_eig(s).values.iter().map(|l| (-l).max(0.0)).sum()
}

/// Relative floor under which an eigenvalue is numerically zero; square
/// roots would otherwise amplify roundoff-level values to √ε size.
pub(crate) fn eigenvalue_floor(values: &DVector<f64>) -> f64 {
    let max_abs = values.iter().map(|l| l.abs()).fold(0.0, f64::max);
    f64::EPSILON * max_abs * values.len() as f64
}

/// Symmetric square root `G` with `G Gᵀ = 2·D` for positive semi-definite D.
/// Eigenvalues in `[-PSD_CLIP, 0)` are treated as roundoff; anything lower
/// is an error.
pub fn sqrt_2d(dplus: &SymmetricRealMatrix) -> Result<DMatrix<f64>> {
    let eig = sym_eig(dplus);
    if let Some(&lambda) = eig
        .values
        .iter()
        .find(|&&l| l < -tol::PSD_CLIP)
    {
        return Err(Error::NotPositiveSemidefinite {
            context: "sqrt_2d",
            eigenvalue: lambda,
        });
    }
    let floor = eigenvalue_floor(&eig.values);
    let n = dplus.dim();
    let mut g = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= floor {
            continue;
        }
        let root = (2.0 * lambda).sqrt();
        let v = eig.vectors.column(k);
        for j in 0..n {
            for i in 0..n {
                g[(i, j)] += root * v[i] * v[j];
            }
        }
    }
    symmetrize(&mut g);
    Ok(g)
}

/// Diffusion matrix with its spectral data and negative-eigenvalue mass.
#[derive(Debug, Clone)]
pub struct DiffusionDecomposition {
    pub d: SymmetricRealMatrix,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub neg_mass: f64,
}

impl DiffusionDecomposition {
    pub fn new(d: SymmetricRealMatrix) -> Self {
        let eig = sym_eig(&d);
        let neg_mass = eig.values.iter().map(|l| (-l).max(0.0)).sum();
        Self {
            d,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
            neg_mass,
        }
    }
}

/// `X = i w z† - i z w† + i (w*·z) z z†`, the Hermitian coupling whose
/// diffusion direction is exactly `w`: `-i X z = w` for unit `z`.
///
/// Requires `Re(z†w) = 0`; a residual inside the tolerance shows up as an
/// equal-size deviation in `-iXz = w`.
pub fn build_cancellation_x(z: &ModeVector, w: &DVector<C64>) -> Result<HermitianMatrix> {
    let n = z.dim();
    if w.len() != n {
        return Err(Error::Dimension {
            context: "build_cancellation_x",
            expected: n,
            got: w.len(),
        });
    }
    crate::dynamics::require_unit(z, "build_cancellation_x")?;
    let overlap = z.amplitudes.dotc(w); // z†·w
    if overlap.re.abs() > tol::UNIT_NORM * w.norm().max(1.0) {
        return Err(Error::Precondition {
            context: "build_cancellation_x",
            detail: format!("Re(z†w) = {:.3e} must vanish", overlap.re),
        });
    }
    let i = C64::new(0.0, 1.0);
    let zv = &z.amplitudes;
    // (w*·z) = conj(z†w)
    let wz = overlap.conj();
    let mut x = w * zv.adjoint() * i - zv * w.adjoint() * i + zv * zv.adjoint() * (i * wz);
    // Remove the roundoff-size skew allowed by the precondition tolerance.
    let xad = x.adjoint();
    x = (x + xad) * C64::new(0.5, 0.0);
    HermitianMatrix::with_context(x, "build_cancellation_x")
}

/// The N=2 demonstration: couplings given by the three Pauli matrices, for
/// which `D(r) = D_⊥(r) = (1/n)(I - rrᵀ)` exactly.
#[derive(Debug, Clone)]
pub struct PauliDemo {
    bosons: usize,
}

impl PauliDemo {
    pub fn new(bosons: usize) -> Self {
        Self { bosons }
    }

    /// The three Pauli coupling matrices.
    pub fn xs() -> [HermitianMatrix; 3] {
        let c = |re: f64, im: f64| C64::new(re, im);
        [
            HermitianMatrix::new(DMatrix::from_row_slice(
                2,
                2,
                &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            ))
            .unwrap(),
            HermitianMatrix::new(DMatrix::from_row_slice(
                2,
                2,
                &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
            ))
            .unwrap(),
            HermitianMatrix::new(DMatrix::from_row_slice(
                2,
                2,
                &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            ))
            .unwrap(),
        ]
    }

    /// Real 4×4 embeddings `A_m = (Im X_m  Re X_m; -Re X_m  Im X_m)` so that
    /// `u_m(r) = A_m r`; antisymmetric and pairwise anticommuting.
    pub fn a_matrices() -> [DMatrix<f64>; 3] {
        Self::xs().map(|x| {
            let m = x.matrix();
            let mut a = DMatrix::zeros(4, 4);
            for j in 0..2 {
                for k in 0..2 {
                    a[(j, k)] = m[(j, k)].im;
                    a[(j, 2 + k)] = m[(j, k)].re;
                    a[(2 + j, k)] = -m[(j, k)].re;
                    a[(2 + j, 2 + k)] = m[(j, k)].im;
                }
            }
            a
        })
    }

    /// System with no Hamiltonian and the Pauli couplings.
    pub fn spec(&self) -> SystemSpec {
        SystemSpec::new(
            HermitianMatrix::zeros(2),
            crate::dynamics::TwoBodyTensor::zeros(2),
            Self::xs().to_vec(),
            self.bosons,
        )
        .expect("Pauli demo system is always valid")
    }

    /// Asserts the closed-form structure on `count` random unit r:
    /// `{A_j, A_k} = -2δ_jk`, orthonormal `u_m(r)`, `D(r) = (1/n)(I - rrᵀ)`,
    /// and `D_⊥ = D`.
    pub fn verify(&self, count: usize, seed: u64) -> Result<()> {
        let a = Self::a_matrices();
        for j in 0..3 {
            for k in 0..3 {
                let anti = &a[j] * &a[k] + &a[k] * &a[j];
                let expect = if j == k {
                    DMatrix::identity(4, 4) * -2.0
                } else {
                    DMatrix::zeros(4, 4)
                };
                if (anti - expect).amax() > 1e-14 {
                    return Err(Error::Precondition {
                        context: "PauliDemo::verify",
                        detail: format!("{{A_{j}, A_{k}}} deviates from -2δ"),
                    });
                }
            }
        }
        let spec = self.spec();
        let inv_n = 1.0 / self.bosons as f64;
        for draw in 0..count {
            let r = random_unit_r(seed, draw as u64, 2);
            let z = crate::linalg::to_complex(&r);
            for j in 0..3 {
                let uj = &a[j] * &r.coords;
                for k in 0..3 {
                    let uk = &a[k] * &r.coords;
                    let dot = uj.dot(&uk);
                    let expect = if j == k { 1.0 } else { 0.0 };
                    if (dot - expect).abs() > 1e-12 {
                        return Err(Error::Precondition {
                            context: "PauliDemo::verify",
                            detail: format!("u_{j}·u_{k} = {dot} at draw {draw}"),
                        });
                    }
                }
            }
            let d = compute_d(&z, &spec)?;
            let target = (DMatrix::identity(4, 4) - &r.coords * r.coords.transpose()) * inv_n;
            if (d.matrix() - &target).amax() > 1e-12 {
                return Err(Error::Precondition {
                    context: "PauliDemo::verify",
                    detail: format!("D(r) deviates from (1/n)(I - rrᵀ) at draw {draw}"),
                });
            }
            let dperp = project_dperp(&d, &r)?;
            if (dperp.matrix() - d.matrix()).amax() > 1e-12 {
                return Err(Error::Precondition {
                    context: "PauliDemo::verify",
                    detail: format!("D_⊥ ≠ D at draw {draw}"),
                });
            }
        }
        Ok(())
    }
}

/// Deterministic random unit vector in R^{2N} keyed by (seed, draw).
pub(crate) fn random_unit_r(seed: u64, draw: u64, modes: usize) -> RealState {
    for attempt in 0..64 {
        let mut v = DVector::zeros(2 * modes);
        for j in 0..modes {
            let w1 = mix::mix_tuple(seed, draw, attempt, j as u64, 0xa1);
            let w2 = mix::mix_tuple(seed, draw, attempt, j as u64, 0xa2);
            let (g1, g2) = mix::to_normal_pair(w1, w2);
            v[j] = g1;
            v[modes + j] = g2;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            return RealState::new(v / norm).expect("even length by construction");
        }
    }
    unreachable!("gaussian draws cannot all be degenerate");
}

/// Deterministic random unit mode vector keyed by (seed, draw).
pub(crate) fn random_unit_z(seed: u64, draw: u64, modes: usize) -> ModeVector {
    crate::linalg::to_complex(&random_unit_r(seed, draw, modes))
}
