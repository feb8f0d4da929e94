//! Shared numeric types: complex/real state conversion, Hermiticity and
//! symmetry validation, cyclic-Jacobi eigendecompositions and trace norms.
//!
//! Complex amplitude vectors `z` of length N and real coordinate vectors
//! `r = (Re z, Im z)` of length 2N hold the same information and convert
//! exactly in both directions. All matrix validation is by rejection: inputs
//! outside tolerance are errors, never silently symmetrized.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::tol;
use crate::{Error, Result};

pub type C64 = Complex64;

/// Single-particle amplitude vector `z` of length N.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    pub amplitudes: DVector<C64>,
}

impl ModeVector {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension {
                context: "ModeVector::new",
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Constructs a vector that is required to be unit norm within
    /// [`tol::UNIT_NORM`].
    pub fn unit(amplitudes: DVector<C64>) -> Result<Self> {
        let v = Self::new(amplitudes)?;
        let n2 = v.norm_squared();
        if (n2 - 1.0).abs() > tol::UNIT_NORM {
            return Err(Error::NotUnitNorm {
                context: "ModeVector::unit",
                norm: n2.sqrt(),
                tolerance: tol::UNIT_NORM,
            });
        }
        Ok(v)
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amplitudes))
    }

    /// The basis state `e_j` as an amplitude vector.
    pub fn basis_state(dim: usize, j: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[j] = C64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroState {
                context: "ModeVector::normalized",
            });
        }
        Ok(Self {
            amplitudes: self.amplitudes.map(|a| a / n),
        })
    }
}

/// Real coordinate vector `r = (x, y)` with `x = Re(z)`, `y = Im(z)`;
/// always of even length 2N.
#[derive(Debug, Clone, PartialEq)]
pub struct RealState {
    pub coords: DVector<f64>,
}

impl RealState {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::Dimension {
                context: "RealState::new (length must be even and nonzero)",
                expected: 2 * (coords.len() / 2).max(1),
                got: coords.len(),
            });
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    /// Number of complex modes N (half the coordinate count).
    pub fn modes(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// `r_j = Re(z_j)`, `r_{N+j} = Im(z_j)`; preserves the 2-norm exactly.
pub fn to_real(z: &ModeVector) -> RealState {
    let n = z.dim();
    let mut coords = DVector::zeros(2 * n);
    for j in 0..n {
        coords[j] = z.amplitudes[j].re;
        coords[n + j] = z.amplitudes[j].im;
    }
    RealState { coords }
}

/// Inverse of [`to_real`]; round-trips exactly.
pub fn to_complex(r: &RealState) -> ModeVector {
    let n = r.modes();
    let mut amplitudes = DVector::zeros(n);
    for j in 0..n {
        amplitudes[j] = C64::new(r.coords[j], r.coords[n + j]);
    }
    ModeVector { amplitudes }
}

fn max_abs_complex(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|e| e.abs()).fold(0.0, f64::max)
}

/// Complex N×N matrix validated Hermitian within [`tol::HERMITICITY_REL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    matrix: DMatrix<C64>,
}

impl HermitianMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_context(matrix, "HermitianMatrix::new")
    }

    pub fn with_context(matrix: DMatrix<C64>, context: &'static str) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension {
                context,
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = f64::max(1.0, max_abs_complex(&matrix));
        let mut dev: f64 = 0.0;
        for j in 0..matrix.nrows() {
            for k in j..matrix.ncols() {
                dev = dev.max((matrix[(j, k)] - matrix[(k, j)].conj()).norm());
            }
        }
        if dev > tol::HERMITICITY_REL * scale {
            return Err(Error::NotHermitian {
                context,
                deviation: dev,
                tolerance: tol::HERMITICITY_REL * scale,
            });
        }
        Ok(Self { matrix })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Real 2N×2N matrix validated symmetric within [`tol::HERMITICITY_REL`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricRealMatrix {
    matrix: DMatrix<f64>,
}

impl SymmetricRealMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_context(matrix, "SymmetricRealMatrix::new")
    }

    pub fn with_context(matrix: DMatrix<f64>, context: &'static str) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Dimension {
                context,
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = f64::max(1.0, max_abs_real(&matrix));
        let mut dev: f64 = 0.0;
        for j in 0..matrix.nrows() {
            for k in (j + 1)..matrix.ncols() {
                dev = dev.max((matrix[(j, k)] - matrix[(k, j)]).abs());
            }
        }
        if dev > tol::HERMITICITY_REL * scale {
            return Err(Error::NotSymmetric {
                context,
                deviation: dev,
                tolerance: tol::HERMITICITY_REL * scale,
            });
        }
        Ok(Self { matrix })
    }

    /// For matrices that are symmetric by construction.
    pub(crate) fn new_unchecked(matrix: DMatrix<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Eigendecomposition `S = V Λ Vᵀ` of a real symmetric matrix with
/// eigenvalues sorted descending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

const MAX_JACOBI_SWEEPS: usize = 60;

fn off_diag_sq(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += 2.0 * a[(p, q)] * a[(p, q)];
        }
    }
    s
}

/// Cyclic Jacobi sweeps on `a` (destroyed, becomes diagonal); `v` receives
/// the accumulated rotations so that on entry `a₀ = v a vᵀ`.
pub(crate) fn jacobi_sym_inplace(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    v.fill_with_identity();
    if n <= 1 {
        return Ok(0);
    }
    let frob = a.norm();
    if frob == 0.0 {
        return Ok(0);
    }
    let target = tol::JACOBI_OFF_REL * frob;
    let target_sq = target * target;
    for sweep in 0..MAX_JACOBI_SWEEPS {
        if off_diag_sq(a) <= target_sq {
            return Ok(sweep);
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Elements already negligible at machine precision relative
                // to their diagonal are zeroed without a rotation.
                if apq.abs() <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()).max(frob * 1e-30) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    a[(k, p)] = np;
                    a[(p, k)] = np;
                    a[(k, q)] = nq;
                    a[(q, k)] = nq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if off_diag_sq(a) <= target_sq {
        Ok(MAX_JACOBI_SWEEPS)
    } else {
        Err(Error::EigConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
        })
    }
}

fn sort_descending_real(values: &mut DVector<f64>, vectors: &mut DMatrix<f64>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let old_vals = values.clone();
    let old_vecs = vectors.clone();
    for (new, &old) in order.iter().enumerate() {
        values[new] = old_vals[old];
        vectors.set_column(new, &old_vecs.column(old));
    }
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eig(s: &SymmetricRealMatrix) -> SymEig {
    let mut a = s.matrix.clone();
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    // Convergence is guaranteed for symmetric inputs, which the type enforces.
    jacobi_sym_inplace(&mut a, &mut v).expect("Jacobi on validated symmetric input converges");
    let mut values = DVector::from_fn(n, |k, _| a[(k, k)]);
    sort_descending_real(&mut values, &mut v);
    SymEig { values, vectors: v }
}

/// Eigendecomposition `H = V Λ V†` of a complex Hermitian matrix,
/// eigenvalues real and descending, eigenvector columns orthonormal.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermEig {
    /// `V diag(exp(factor·λ_k)) V†`; with `factor = -i·t` this is the
    /// unitary generated by the decomposed Hermitian matrix.
    pub fn exp_scaled(&self, factor: C64) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let phase = (factor * self.values[k]).exp();
            for j in 0..n {
                scaled[(j, k)] *= phase;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

fn off_diag_sq_c(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += 2.0 * a[(p, q)].norm_sqr();
        }
    }
    s
}

/// Cyclic Jacobi for complex Hermitian matrices, using phased rotations.
pub fn herm_eig(h: &DMatrix<C64>) -> Result<HermEig> {
    let checked = HermitianMatrix::with_context(h.clone(), "herm_eig")?;
    let mut a = checked.matrix;
    let n = a.nrows();
    let mut v: DMatrix<C64> = DMatrix::identity(n, n);
    let frob = a.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
    if frob > 0.0 && n > 1 {
        let target_sq = {
            let t = tol::JACOBI_OFF_REL * frob;
            t * t
        };
        let mut converged = false;
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            if off_diag_sq_c(&a) <= target_sq {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let beta = a[(p, q)];
                    let babs = beta.norm();
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    if babs <= f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()).max(frob * 1e-30) {
                        a[(p, q)] = C64::new(0.0, 0.0);
                        a[(q, p)] = C64::new(0.0, 0.0);
                        continue;
                    }
                    let phase = beta / babs;
                    let tau = (aqq - app) / (2.0 * babs);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        1.0 / (tau - (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let sp = s * phase; // s·e^{iφ}
                    let spc = s * phase.conj(); // s·e^{-iφ}
                    // A ← A·U (columns p, q)
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - spc * akq;
                        a[(k, q)] = sp * akp + c * akq;
                    }
                    // A ← U†·A (rows p, q)
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sp * aqk;
                        a[(q, k)] = spc * apk + c * aqk;
                    }
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                    // V ← V·U
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - spc * vkq;
                        v[(k, q)] = sp * vkp + c * vkq;
                    }
                }
            }
        }
        if !converged && off_diag_sq_c(&a) > target_sq {
            return Err(Error::EigConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
            });
        }
    }
    let mut values = DVector::from_fn(n, |k, _| a[(k, k)].re);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    let old_vals = values.clone();
    let old_vecs = v.clone();
    for (new, &old) in order.iter().enumerate() {
        values[new] = old_vals[old];
        v.set_column(new, &old_vecs.column(old));
    }
    Ok(HermEig { values, vectors: v })
}

/// Real-symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a complex
/// Hermitian matrix; its spectrum is that of `H` with every eigenvalue doubled.
pub(crate) fn embed_hermitian(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let e = m[(j, k)];
            out[(j, k)] = e.re;
            out[(j, n + k)] = -e.im;
            out[(n + j, k)] = e.im;
            out[(n + j, n + k)] = e.re;
        }
    }
    out
}

fn is_hermitian_within(m: &DMatrix<C64>, rel: f64) -> bool {
    let scale = f64::max(1.0, max_abs_complex(m));
    for j in 0..m.nrows() {
        for k in j..m.ncols() {
            if (m[(j, k)] - m[(k, j)].conj()).norm() > rel * scale {
                return false;
            }
        }
    }
    true
}

/// Sum of singular values. Hermitian inputs take the fast path through the
/// real symmetric embedding; general matrices go through `M†M`.
pub fn trace_norm(m: &DMatrix<C64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            context: "trace_norm",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    if is_hermitian_within(m, tol::HERMITICITY_REL) {
        let mut a = embed_hermitian(m);
        // Symmetrize the roundoff-level skew left by near-Hermitian input.
        for j in 0..a.nrows() {
            for k in (j + 1)..a.ncols() {
                let avg = 0.5 * (a[(j, k)] + a[(k, j)]);
                a[(j, k)] = avg;
                a[(k, j)] = avg;
            }
        }
        let n = a.nrows();
        let mut v = DMatrix::identity(n, n);
        jacobi_sym_inplace(&mut a, &mut v)?;
        // Embedded spectrum doubles every eigenvalue of M.
        Ok((0..n).map(|k| a[(k, k)].abs()).sum::<f64>() / 2.0)
    } else {
        // Gram route: σ = √λ(M†M). Eigenvalues at roundoff level must be
        // floored before the square root, which otherwise amplifies them to
        // √ε; accuracy of this path is ~√ε·σ_max for near-singular input.
        let gram = m.adjoint() * m;
        let mut a = embed_hermitian(&gram);
        let n = a.nrows();
        let mut v = DMatrix::identity(n, n);
        jacobi_sym_inplace(&mut a, &mut v)?;
        let max_abs = (0..n).map(|k| a[(k, k)].abs()).fold(0.0, f64::max);
        let floor = f64::EPSILON * max_abs * n as f64;
        Ok((0..n)
            .map(|k| {
                let lambda = a[(k, k)];
                if lambda <= floor {
                    0.0
                } else {
                    lambda.sqrt()
                }
            })
            .sum::<f64>()
            / 2.0)
    }
}

/// Trace norm `Σ|λ|` of a real symmetric matrix.
pub fn trace_norm_sym(s: &SymmetricRealMatrix) -> f64 {
    sym_eig(s).values.iter().map(|l| l.abs()).sum()
}

/// `‖a - b‖_*`, the trace norm of the difference (no ½ factor).
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            context: "trace_distance",
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    trace_norm(&(a - b))
}

/// Spectral norm (largest |eigenvalue|) of a Hermitian matrix.
pub fn spectral_norm_hermitian(m: &DMatrix<C64>) -> Result<f64> {
    let eig = herm_eig(m)?;
    Ok(eig.values.iter().map(|l| l.abs()).fold(0.0, f64::max))
}
