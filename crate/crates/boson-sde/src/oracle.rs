//! Exact quantum reference on the symmetric n-boson Fock subspace: operator
//! lifting through creation/annihilation rules, Lindblad integration of
//! `ρ̇ = -i[Ĥ, ρ] - Σ_m [X̂_m, [X̂_m, ρ]]`, the ±√dt random-walk unraveling of
//! the same evolution, density-matrix reconstruction from SDE ensembles, and
//! the trace-norm error-bound machinery that ties the two sides together.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::diffusion::{compute_d, neg_mass, project_dperp};
use crate::dynamics::{require_unit, SystemSpec, TwoBodyTensor};
use crate::linalg::{herm_eig, to_real, trace_distance, HermEig, ModeVector, RealState};
use crate::mix;
use crate::sde::{run_ensemble, SdeConfig};
use crate::tol;
use crate::{Error, Result};

/// Occupation-number basis of the symmetric subspace of `n` bosons in `N`
/// modes; dimension `C(n+N-1, n)`. Ordering is lexicographic descending in
/// the first mode and is stable across runs.
#[derive(Debug)]
pub struct FockBasis {
    bosons: usize,
    modes: usize,
    occupations: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

/// `C(n+N-1, n)` with early bailout; errors above `cap`.
fn symmetric_dim(bosons: usize, modes: usize, cap: usize) -> Result<usize> {
    let mut dim: u128 = 1;
    for i in 1..modes {
        dim = dim * (bosons + i) as u128 / i as u128;
        if dim > cap as u128 {
            return Err(Error::ResourceLimit {
                bosons,
                modes,
                dim: usize::MAX,
                cap,
            });
        }
    }
    let dim = dim as usize;
    if dim > cap {
        return Err(Error::ResourceLimit {
            bosons,
            modes,
            dim,
            cap,
        });
    }
    Ok(dim)
}

impl FockBasis {
    pub fn new(bosons: usize, modes: usize) -> Result<Self> {
        Self::with_cap(bosons, modes, tol::FOCK_DIM_CAP)
    }

    /// Convenience constructor returning the shared handle used by states.
    pub fn shared(bosons: usize, modes: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::new(bosons, modes)?))
    }

    pub fn with_cap(bosons: usize, modes: usize, cap: usize) -> Result<Self> {
        if bosons == 0 || modes == 0 {
            return Err(Error::InvalidParameter {
                context: "FockBasis::new",
                detail: "need n ≥ 1 bosons and N ≥ 1 modes".into(),
            });
        }
        let dim = symmetric_dim(bosons, modes, cap)?;
        let mut occupations = Vec::with_capacity(dim);
        let mut current = vec![0u32; modes];
        fill_occupations(&mut occupations, &mut current, 0, bosons as u32, modes);
        debug_assert_eq!(occupations.len(), dim);
        let index = occupations
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.clone(), i))
            .collect();
        Ok(Self {
            bosons,
            modes,
            occupations,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn bosons(&self) -> usize {
        self.bosons
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn occupation(&self, idx: usize) -> &[u32] {
        &self.occupations[idx]
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill_occupations(
    out: &mut Vec<Vec<u32>>,
    current: &mut Vec<u32>,
    mode: usize,
    remaining: u32,
    modes: usize,
) {
    if mode == modes - 1 {
        current[mode] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[mode] = k;
        fill_occupations(out, current, mode + 1, remaining - k, modes);
    }
}

/// Matrix of `Σ_jk X_jk â†_j â_k` in the occupation basis. `x` need not be
/// Hermitian (the β witness lifts a non-Hermitian rank-1 matrix).
pub fn lift_one_body(x: &DMatrix<C64>, basis: &FockBasis) -> Result<DMatrix<C64>> {
    let n_modes = basis.modes();
    if x.nrows() != n_modes || x.ncols() != n_modes {
        return Err(Error::Dimension {
            context: "lift_one_body",
            expected: n_modes,
            got: x.nrows().max(x.ncols()),
        });
    }
    let dim = basis.dim();
    let mut out = DMatrix::zeros(dim, dim);
    let mut target = vec![0u32; n_modes];
    for col in 0..dim {
        let occ = basis.occupation(col);
        for k in 0..n_modes {
            if occ[k] == 0 {
                continue;
            }
            for j in 0..n_modes {
                let coeff = x[(j, k)];
                if coeff == C64::new(0.0, 0.0) {
                    continue;
                }
                if j == k {
                    out[(col, col)] += coeff * occ[k] as f64;
                } else {
                    target.copy_from_slice(occ);
                    target[k] -= 1;
                    target[j] += 1;
                    let row = basis
                        .index_of(&target)
                        .expect("particle-conserving move stays in the basis");
                    let amp = (occ[k] as f64).sqrt() * ((occ[j] + 1) as f64).sqrt();
                    out[(row, col)] += coeff * amp;
                }
            }
        }
    }
    Ok(out)
}

/// Matrix of `(1/2n) H_{jklm} â†_j â†_k â_l â_m` in the occupation basis;
/// includes the `1/(2n)` prefactor.
pub fn lift_two_body(
    tensor: &TwoBodyTensor,
    bosons: usize,
    basis: &FockBasis,
) -> Result<DMatrix<C64>> {
    let n_modes = basis.modes();
    if tensor.modes() != n_modes {
        return Err(Error::Dimension {
            context: "lift_two_body",
            expected: n_modes,
            got: tensor.modes(),
        });
    }
    let dim = basis.dim();
    let mut out = DMatrix::zeros(dim, dim);
    if tensor.is_zero() {
        return Ok(out);
    }
    let prefactor = 1.0 / (2.0 * bosons as f64);
    let mut target = vec![0i64; n_modes];
    let mut key = vec![0u32; n_modes];
    for col in 0..dim {
        let occ = basis.occupation(col);
        for m in 0..n_modes {
            if occ[m] == 0 {
                continue;
            }
            let f_m = (occ[m] as f64).sqrt();
            for l in 0..n_modes {
                let after_m = occ[l] as i64 - i64::from(l == m);
                if after_m <= 0 {
                    continue;
                }
                let f_l = (after_m as f64).sqrt();
                for k in 0..n_modes {
                    let after_lk = occ[k] as i64 - i64::from(k == m) - i64::from(k == l);
                    let f_k = ((after_lk + 1) as f64).sqrt();
                    for j in 0..n_modes {
                        let h = tensor.get(j, k, l, m);
                        if h == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let after_j = occ[j] as i64 - i64::from(j == m) - i64::from(j == l)
                            + i64::from(j == k);
                        let f_j = ((after_j + 1) as f64).sqrt();
                        for t in 0..n_modes {
                            target[t] = occ[t] as i64 - i64::from(t == m) - i64::from(t == l)
                                + i64::from(t == k)
                                + i64::from(t == j);
                        }
                        for t in 0..n_modes {
                            key[t] = target[t] as u32;
                        }
                        let row = basis
                            .index_of(&key)
                            .expect("particle-conserving move stays in the basis");
                        out[(row, col)] += h * (prefactor * f_m * f_l * f_k * f_j);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Normalized pure state on the symmetric subspace.
#[derive(Debug, Clone)]
pub struct PureState {
    pub basis: Arc<FockBasis>,
    pub amplitudes: DVector<C64>,
}

impl PureState {
    pub fn new(basis: Arc<FockBasis>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Dimension {
                context: "PureState::new",
                expected: basis.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::UNIT_NORM {
            return Err(Error::NotUnitNorm {
                context: "PureState::new",
                norm,
                tolerance: tol::UNIT_NORM,
            });
        }
        Ok(Self { basis, amplitudes })
    }

    pub fn projector(&self) -> DMatrix<C64> {
        let conj = self.amplitudes.map(|a| a.conj()).transpose();
        &self.amplitudes * conj
    }
}

/// Hermitian matrix over the occupation basis, intended to be a state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub basis: Arc<FockBasis>,
    pub entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            basis: psi.basis.clone(),
            entries: psi.projector(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = herm_eig(&self.entries)?;
        Ok(eig.values[eig.values.len() - 1])
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum()
    }

    /// Hermiticity within 1e-10, unit trace within 1e-9, smallest eigenvalue
    /// above -1e-8; the contract integrated states must satisfy.
    pub fn validate(&self) -> Result<()> {
        let mut herm_dev: f64 = 0.0;
        let d = self.entries.nrows();
        for j in 0..d {
            for k in j..d {
                herm_dev =
                    herm_dev.max((self.entries[(j, k)] - self.entries[(k, j)].conj()).norm());
            }
        }
        if herm_dev > tol::DENSITY_HERMITICITY {
            return Err(Error::NotHermitian {
                context: "DensityMatrix::validate",
                deviation: herm_dev,
                tolerance: tol::DENSITY_HERMITICITY,
            });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol::DENSITY_TRACE || tr.im.abs() > tol::DENSITY_TRACE {
            return Err(Error::IntegrationAccuracy {
                context: "DensityMatrix::validate",
                detail: format!("trace drifted to {tr}"),
            });
        }
        let min_eig = self.min_eigenvalue()?;
        if min_eig < tol::DENSITY_POSITIVITY {
            return Err(Error::IntegrationAccuracy {
                context: "DensityMatrix::validate",
                detail: format!("minimum eigenvalue {min_eig:.3e} below {:.0e}", tol::DENSITY_POSITIVITY),
            });
        }
        Ok(())
    }
}

/// `|z⟩^{⊗n}` in the occupation basis: amplitude on ν is
/// `sqrt(n!/Π ν_j!) Π z_j^{ν_j}`; unit norm by the multinomial theorem.
pub fn coherent_product_state(z: &ModeVector, basis: &Arc<FockBasis>) -> Result<PureState> {
    require_unit(z, "coherent_product_state")?;
    if z.dim() != basis.modes() {
        return Err(Error::Dimension {
            context: "coherent_product_state",
            expected: basis.modes(),
            got: z.dim(),
        });
    }
    let amplitudes = coherent_amplitudes(&z.amplitudes, basis);
    PureState::new(basis.clone(), amplitudes)
}

fn coherent_amplitudes(z: &DVector<C64>, basis: &FockBasis) -> DVector<C64> {
    let n = basis.bosons();
    let ln_fact: Vec<f64> = {
        let mut t = vec![0.0; n + 1];
        for i in 1..=n {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    };
    DVector::from_fn(basis.dim(), |row, _| {
        let occ = basis.occupation(row);
        let mut ln_coeff = ln_fact[n];
        let mut amp = C64::new(1.0, 0.0);
        for (j, &nu) in occ.iter().enumerate() {
            ln_coeff -= ln_fact[nu as usize];
            amp *= z[j].powi(nu as i32);
        }
        amp * (0.5 * ln_coeff).exp()
    })
}

/// The operators of a [`SystemSpec`] lifted to the occupation basis:
/// `Ĥ = Ĥ⁰ + (1/2n)Ĥ₂` and `X̂_m = (1/√n) X_m`-lifts.
#[derive(Debug, Clone)]
pub struct LiftedSystem {
    basis: Arc<FockBasis>,
    hamiltonian: DMatrix<C64>,
    xs: Vec<DMatrix<C64>>,
    xs_sq: Vec<DMatrix<C64>>,
}

impl LiftedSystem {
    pub fn new(spec: &SystemSpec, basis: &Arc<FockBasis>) -> Result<Self> {
        if spec.modes() != basis.modes() {
            return Err(Error::Dimension {
                context: "LiftedSystem::new (modes)",
                expected: basis.modes(),
                got: spec.modes(),
            });
        }
        if spec.bosons() != basis.bosons() {
            return Err(Error::Dimension {
                context: "LiftedSystem::new (bosons)",
                expected: basis.bosons(),
                got: spec.bosons(),
            });
        }
        let mut hamiltonian = lift_one_body(spec.h0().matrix(), basis)?
            + lift_two_body(spec.tensor(), spec.bosons(), basis)?;
        hermitize(&mut hamiltonian);
        let scale = C64::new(1.0 / (spec.bosons() as f64).sqrt(), 0.0);
        let xs: Vec<DMatrix<C64>> = spec
            .xs()
            .iter()
            .map(|x| {
                lift_one_body(x.matrix(), basis).map(|mut lifted| {
                    lifted *= scale;
                    hermitize(&mut lifted);
                    lifted
                })
            })
            .collect::<Result<_>>()?;
        let xs_sq = xs.iter().map(|x| x * x).collect();
        Ok(Self {
            basis: basis.clone(),
            hamiltonian,
            xs,
            xs_sq,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.hamiltonian
    }

    /// Lifted coupling operators including the `1/√n` prefactor.
    pub fn xs(&self) -> &[DMatrix<C64>] {
        &self.xs
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// Clears the roundoff-level skew of a by-construction Hermitian matrix.
fn hermitize(m: &mut DMatrix<C64>) {
    let d = m.nrows();
    for j in 0..d {
        m[(j, j)] = C64::new(m[(j, j)].re, 0.0);
        for k in (j + 1)..d {
            let avg = 0.5 * (m[(j, k)] + m[(k, j)].conj());
            m[(j, k)] = avg;
            m[(k, j)] = avg.conj();
        }
    }
}

/// `ρ̇ = -i[Ĥ, ρ] - Σ_m [X̂_m, [X̂_m, ρ]]`, the double-commutator form.
pub fn lindblad_rhs(rho: &DMatrix<C64>, lifted: &LiftedSystem) -> Result<DMatrix<C64>> {
    let d = lifted.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::Dimension {
            context: "lindblad_rhs",
            expected: d,
            got: rho.nrows().max(rho.ncols()),
        });
    }
    let h = &lifted.hamiltonian;
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h) * minus_i;
    for (x, x_sq) in lifted.xs.iter().zip(&lifted.xs_sq) {
        // -[X,[X,ρ]] = 2XρX - X²ρ - ρX²
        out += x * rho * x * C64::new(2.0, 0.0);
        out -= x_sq * rho;
        out -= rho * x_sq;
    }
    Ok(out)
}

fn snapshot_indices(boundaries: &[f64], requests: &[f64], t_scale: f64) -> Vec<usize> {
    let tiny = 1e-9 * t_scale.max(1.0);
    requests
        .iter()
        .map(|&q| {
            boundaries
                .partition_point(|&b| b < q - tiny)
                .min(boundaries.len() - 1)
        })
        .collect()
}

fn step_boundaries(dt: f64, t_final: f64) -> Vec<f64> {
    let tiny = 1e-12 * t_final.max(1.0);
    let mut ts = vec![0.0];
    let mut t = 0.0;
    while t < t_final - tiny {
        t = (t + dt).min(t_final);
        ts.push(t);
    }
    ts
}

/// RK4 integration of the Lindblad equation; every returned snapshot is
/// validated for Hermiticity, unit trace, and positivity.
pub fn integrate_lindblad(
    rho0: &DensityMatrix,
    lifted: &LiftedSystem,
    t_final: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<(f64, DensityMatrix)>> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter {
            context: "integrate_lindblad",
            detail: format!("need dt > 0 and t_final ≥ 0, got dt = {dt}, t_final = {t_final}"),
        });
    }
    let boundaries = step_boundaries(dt, t_final);
    let wanted = snapshot_indices(&boundaries, snapshot_times, t_final);
    let mut rho = rho0.entries.clone();
    let mut out = Vec::with_capacity(wanted.len());
    let record = |boundary: usize, rho: &DMatrix<C64>, out: &mut Vec<(f64, DensityMatrix)>| -> Result<()> {
        for &idx in &wanted {
            if idx == boundary {
                let snap = DensityMatrix {
                    basis: rho0.basis.clone(),
                    entries: rho.clone(),
                };
                snap.validate()?;
                out.push((boundaries[idx], snap));
            }
        }
        Ok(())
    };
    record(0, &rho, &mut out)?;
    for step in 0..boundaries.len() - 1 {
        let h = boundaries[step + 1] - boundaries[step];
        let k1 = lindblad_rhs(&rho, lifted)?;
        let k2 = lindblad_rhs(&(&rho + &k1 * C64::new(h / 2.0, 0.0)), lifted)?;
        let k3 = lindblad_rhs(&(&rho + &k2 * C64::new(h / 2.0, 0.0)), lifted)?;
        let k4 = lindblad_rhs(&(&rho + &k3 * C64::new(h, 0.0)), lifted)?;
        rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
            * C64::new(h / 6.0, 0.0);
        record(step + 1, &rho, &mut out)?;
    }
    Ok(out)
}

/// Precomputed step unitaries for the random-walk unraveling: per step the
/// state receives `exp(-i Ĥ dt)` followed by per-m kicks
/// `exp(-i √(2 dt) Q_m X̂_m)` with `Q_m = ±1`.
pub struct RandomWalkStepper {
    eig_h: HermEig,
    eig_xs: Vec<HermEig>,
    dt: f64,
    u_h: DMatrix<C64>,
    kicks_plus: Vec<DMatrix<C64>>,
    kicks_minus: Vec<DMatrix<C64>>,
}

impl RandomWalkStepper {
    pub fn new(lifted: &LiftedSystem, dt: f64) -> Result<Self> {
        let eig_h = herm_eig(&lifted.hamiltonian)?;
        let eig_xs: Vec<HermEig> = lifted
            .xs
            .iter()
            .map(herm_eig)
            .collect::<Result<_>>()?;
        let mut stepper = Self {
            eig_h,
            eig_xs,
            dt: f64::NAN,
            u_h: DMatrix::zeros(0, 0),
            kicks_plus: Vec::new(),
            kicks_minus: Vec::new(),
        };
        stepper.prepare(dt);
        Ok(stepper)
    }

    /// Rebuilds the cached unitaries for a new step size.
    pub fn prepare(&mut self, dt: f64) {
        if self.dt == dt {
            return;
        }
        let minus_i = C64::new(0.0, -1.0);
        self.u_h = self.eig_h.exp_scaled(minus_i * dt);
        let kick = (2.0 * dt).sqrt();
        self.kicks_plus = self
            .eig_xs
            .iter()
            .map(|e| e.exp_scaled(minus_i * kick))
            .collect();
        self.kicks_minus = self
            .eig_xs
            .iter()
            .map(|e| e.exp_scaled(minus_i * -kick))
            .collect();
        self.dt = dt;
    }

    pub fn couplings(&self) -> usize {
        self.eig_xs.len()
    }

    /// Applies one step to `psi` with the given ±1 signs (canonical order:
    /// Hamiltonian first, then kicks m = 0, 1, …).
    pub fn step(&self, psi: &DVector<C64>, signs: &[f64]) -> DVector<C64> {
        let mut out = &self.u_h * psi;
        for (m, &sign) in signs.iter().enumerate() {
            let kick = if sign >= 0.0 {
                &self.kicks_plus[m]
            } else {
                &self.kicks_minus[m]
            };
            out = kick * out;
        }
        out
    }

    /// Full step unitary for a fixed sign pattern, with the kicks applied in
    /// the given order after the Hamiltonian factor.
    pub fn unitary_for_signs(&self, signs: &[f64], order: &[usize]) -> DMatrix<C64> {
        let mut u = self.u_h.clone();
        for &m in order {
            let kick = if signs[m] >= 0.0 {
                &self.kicks_plus[m]
            } else {
                &self.kicks_minus[m]
            };
            u = kick * u;
        }
        u
    }
}

/// One stochastic trajectory of the random-walk unraveling; `signs(step, m)`
/// supplies the ±1 draws. Norm is preserved by the exact step unitaries.
pub fn random_walk_trajectory<F>(
    psi0: &PureState,
    lifted: &LiftedSystem,
    dt: f64,
    t_final: f64,
    mut signs: F,
    snapshot_times: &[f64],
) -> Result<Vec<(f64, PureState)>>
where
    F: FnMut(usize, usize) -> f64,
{
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter {
            context: "random_walk_trajectory",
            detail: format!("need dt > 0 and t_final ≥ 0, got dt = {dt}, t_final = {t_final}"),
        });
    }
    let boundaries = step_boundaries(dt, t_final);
    let wanted = snapshot_indices(&boundaries, snapshot_times, t_final);
    let mut stepper = RandomWalkStepper::new(lifted, dt)?;
    let m_count = stepper.couplings();
    let mut psi = psi0.amplitudes.clone();
    let mut out = Vec::with_capacity(wanted.len());
    let mut sign_buf = vec![0.0; m_count];
    let record = |boundary: usize,
                  psi: &DVector<C64>,
                  out: &mut Vec<(f64, PureState)>,
                  wanted: &[usize],
                  boundaries: &[f64],
                  basis: &Arc<FockBasis>|
     -> Result<()> {
        for &idx in wanted {
            if idx == boundary {
                out.push((
                    boundaries[idx],
                    PureState::new(basis.clone(), psi.clone())?,
                ));
            }
        }
        Ok(())
    };
    record(0, &psi, &mut out, &wanted, &boundaries, &psi0.basis)?;
    for step in 0..boundaries.len() - 1 {
        let h = boundaries[step + 1] - boundaries[step];
        stepper.prepare(h);
        for (m, slot) in sign_buf.iter_mut().enumerate() {
            *slot = signs(step, m);
        }
        psi = stepper.step(&psi, &sign_buf);
        record(step + 1, &psi, &mut out, &wanted, &boundaries, &psi0.basis)?;
    }
    Ok(out)
}

/// Exhaustive average over all `2^M` sign patterns of one step,
/// `(1/2^M) Σ_s U_s ρ U_s†`; equals `ρ + dt·L[ρ] + O(dt²)`.
pub fn branch_average_step(
    rho: &DMatrix<C64>,
    lifted: &LiftedSystem,
    dt: f64,
    order: &[usize],
) -> Result<DMatrix<C64>> {
    let stepper = RandomWalkStepper::new(lifted, dt)?;
    Ok(branch_average_with(&stepper, rho, order))
}

fn branch_average_with(
    stepper: &RandomWalkStepper,
    rho: &DMatrix<C64>,
    order: &[usize],
) -> DMatrix<C64> {
    let m_count = stepper.couplings();
    let patterns = 1usize << m_count;
    let mut signs = vec![1.0; m_count];
    let mut acc = DMatrix::zeros(rho.nrows(), rho.ncols());
    for bits in 0..patterns {
        for (m, slot) in signs.iter_mut().enumerate() {
            *slot = if bits >> m & 1 == 1 { 1.0 } else { -1.0 };
        }
        let u = stepper.unitary_for_signs(&signs, order);
        acc += &u * rho * u.adjoint();
    }
    acc / C64::new(patterns as f64, 0.0)
}

/// Composition of [`branch_average_step`] over `t_final/dt` steps: the exact
/// expectation of the random-walk ensemble density matrix, free of Monte
/// Carlo noise.
pub fn branch_average_evolve(
    rho0: &DensityMatrix,
    lifted: &LiftedSystem,
    dt: f64,
    t_final: f64,
) -> Result<DensityMatrix> {
    let boundaries = step_boundaries(dt, t_final);
    let mut stepper = RandomWalkStepper::new(lifted, dt)?;
    let order: Vec<usize> = (0..stepper.couplings()).collect();
    let mut rho = rho0.entries.clone();
    for step in 0..boundaries.len() - 1 {
        let h = boundaries[step + 1] - boundaries[step];
        stepper.prepare(h);
        rho = branch_average_with(&stepper, &rho, &order);
    }
    Ok(DensityMatrix {
        basis: rho0.basis.clone(),
        entries: rho,
    })
}

/// Monte Carlo random-walk ensemble: averages `samples` trajectory
/// projectors at each snapshot. Trajectory `k` draws its sign for step `s`,
/// coupling `m` from the counter hash of `(seed, k, s, m)`.
pub fn random_walk_ensemble(
    psi0: &PureState,
    lifted: &LiftedSystem,
    cfg: &SdeConfig,
) -> Result<Vec<(f64, DensityMatrix)>> {
    cfg.validate()?;
    let per_run: Result<Vec<Vec<(f64, PureState)>>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|run| {
            random_walk_trajectory(
                psi0,
                lifted,
                cfg.dt,
                cfg.t_final,
                |step, m| crate::sde::indexed_prng(cfg.seed, run, step as u64, m as u64).sign,
                &cfg.snapshot_times,
            )
        })
        .collect();
    let per_run = per_run?;
    let first = &per_run[0];
    let dim = lifted.dim();
    let mut out = Vec::with_capacity(first.len());
    for (i, &(t, _)) in first.iter().enumerate() {
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        // Fixed accumulation order keeps the result worker-count independent.
        for path in &per_run {
            acc += path[i].1.projector();
        }
        acc /= C64::new(cfg.samples as f64, 0.0);
        out.push((
            t,
            DensityMatrix {
                basis: psi0.basis.clone(),
                entries: acc,
            },
        ));
    }
    Ok(out)
}

/// Per-sample coherent contribution `(|z|^{2n}, ψ(z/|z|))` of an SDE state.
fn coherent_contributions(
    states: &[RealState],
    basis: &Arc<FockBasis>,
) -> Result<Vec<(f64, DVector<C64>)>> {
    let n = basis.bosons() as i32;
    states
        .iter()
        .map(|r| {
            let z = crate::linalg::to_complex(r);
            let norm = z.norm();
            if norm == 0.0 {
                return Err(Error::ZeroState {
                    context: "ensemble_to_rho",
                });
            }
            let weight = norm.powi(2 * n);
            let unit = z.amplitudes / C64::new(norm, 0.0);
            Ok((weight, coherent_amplitudes(&unit, basis)))
        })
        .collect()
}

/// Density-matrix reconstruction
/// `ρ = mean over samples of |z|^{2n} (|z/|z|⟩⟨z/|z||)^{⊗n}`;
/// trace equals the sample mean of `|z|^{2n}`.
pub fn ensemble_to_rho(
    states: &[RealState],
    basis: &Arc<FockBasis>,
) -> Result<DensityMatrix> {
    if states.is_empty() {
        return Err(Error::EmptyEnsemble {
            context: "ensemble_to_rho",
        });
    }
    let contributions = coherent_contributions(states, basis)?;
    Ok(rho_from_contributions(&contributions, basis))
}

fn rho_from_contributions(
    contributions: &[(f64, DVector<C64>)],
    basis: &Arc<FockBasis>,
) -> DensityMatrix {
    let dim = basis.dim();
    let mut acc = DMatrix::<C64>::zeros(dim, dim);
    for (weight, psi) in contributions {
        let w = C64::new(*weight, 0.0);
        for col in 0..dim {
            let factor = w * psi[col].conj();
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for row in 0..dim {
                acc[(row, col)] += psi[row] * factor;
            }
        }
    }
    acc /= C64::new(contributions.len() as f64, 0.0);
    DensityMatrix {
        basis: basis.clone(),
        entries: acc,
    }
}

/// Trace-norm of the exact change in `ρ̇` caused by adding unit diffusion
/// along the tangent direction `w` at `z`, evaluated on `(|z⟩⟨z|)^{⊗n}`.
/// Bounded by `6n` for every admissible `(z, w)`.
pub fn beta_witness(z: &ModeVector, w: &DVector<C64>, basis: &Arc<FockBasis>) -> Result<f64> {
    require_unit(z, "beta_witness")?;
    if w.len() != z.dim() || z.dim() != basis.modes() {
        return Err(Error::Dimension {
            context: "beta_witness",
            expected: basis.modes(),
            got: w.len(),
        });
    }
    let w_norm = w.norm();
    if (w_norm - 1.0).abs() > tol::UNIT_NORM {
        return Err(Error::NotUnitNorm {
            context: "beta_witness (w)",
            norm: w_norm,
            tolerance: tol::UNIT_NORM,
        });
    }
    // s = z†w must be purely imaginary for an admissible direction.
    let s = z.amplitudes.dotc(w);
    if s.re.abs() > tol::UNIT_NORM {
        return Err(Error::Precondition {
            context: "beta_witness",
            detail: format!("Re(z†w) = {:.3e} must vanish", s.re),
        });
    }
    // M̂ lifts M = i (w - s z) z†, a rank-1 one-body matrix.
    let b = w - &z.amplitudes * s;
    let m_small = DMatrix::from_fn(z.dim(), z.dim(), |j, k| {
        C64::new(0.0, 1.0) * b[j] * z.amplitudes[k].conj()
    });
    let m_hat = lift_one_body(&m_small, basis)?;
    let psi = coherent_product_state(z, basis)?.amplitudes;
    let u = &m_hat * &psi;
    let v = &m_hat * &u;
    let n = basis.bosons() as f64;
    let dim = basis.dim();
    let psi_row = psi.map(|a| a.conj()).transpose();
    let u_row = u.map(|a| a.conj()).transpose();
    let two_i_s = C64::new(0.0, 2.0) * s;
    let half = &v * &psi_row - &u * &psi_row * two_i_s - &u * &u_row
        + &psi * &psi_row * (s * s * n);
    let total = &half + half.adjoint();
    debug_assert_eq!(total.nrows(), dim);
    crate::linalg::trace_norm(&total)
}

/// Largest negative-eigenvalue mass of the projected diffusion matrix over a
/// grid of unit states: the `max α_⊥(z)` entering the trace-norm bound.
pub fn alpha_perp_max(spec: &SystemSpec, grid: &[ModeVector]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyEnsemble {
            context: "alpha_perp_max",
        });
    }
    let mut max = 0.0f64;
    for z in grid {
        let d = compute_d(z, spec)?;
        let r = to_real(z);
        let dperp = project_dperp(&d, &r)?;
        max = max.max(neg_mass(&dperp));
    }
    Ok(max)
}

/// Deterministic grid of random unit states for the α_⊥ maximization.
pub fn unit_state_grid(modes: usize, count: usize, seed: u64) -> Vec<ModeVector> {
    (0..count as u64)
        .map(|draw| crate::diffusion::random_unit_z(seed, draw, modes))
        .collect()
}

/// Deterministic admissible pair for the β witness: unit `z` and unit `w`
/// with `Re(z†w) = 0`, keyed by `(seed, draw)`.
pub fn random_admissible_pair(seed: u64, draw: u64, modes: usize) -> (ModeVector, DVector<C64>) {
    let z = crate::diffusion::random_unit_z(seed, 2 * draw, modes);
    for attempt in 0..64u64 {
        let raw = crate::diffusion::random_unit_z(
            seed ^ 0x7700_0000_0000_0077,
            2 * draw + 1 + attempt.wrapping_mul(1_000_003),
            modes,
        );
        let overlap = z.amplitudes.dotc(&raw.amplitudes);
        let w = &raw.amplitudes - &z.amplitudes * C64::new(overlap.re, 0.0);
        let norm = w.norm();
        if norm > 1e-6 {
            return (z, w / C64::new(norm, 0.0));
        }
    }
    unreachable!("an admissible direction exists for every unit z");
}

/// One row of a correspondence check: the reconstructed-vs-exact trace-norm
/// distance against the `6 n t max α_⊥` budget.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub time: f64,
    pub trace_distance: f64,
    pub bound: f64,
    pub sigma_stat: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub alpha_perp_max: f64,
    pub rows: Vec<VerifyRow>,
}

/// End-to-end correspondence check: integrates the SDE ensemble and the
/// Lindblad oracle from the same initial state, reconstructs `ρ⁺(t)` via
/// [`ensemble_to_rho`], and compares `‖ρ⁺(t) - ρ(t)‖_*` against
/// `6 n t max_grid α_⊥ + 3σ` with `σ` estimated by bootstrap resampling.
pub fn error_bound_check(
    spec: &SystemSpec,
    z0: &ModeVector,
    cfg: &SdeConfig,
    grid: &[ModeVector],
    bootstrap: usize,
) -> Result<VerifyReport> {
    let alpha = alpha_perp_max(spec, grid)?;
    let basis = FockBasis::shared(spec.bosons(), spec.modes())?;
    let lifted = LiftedSystem::new(spec, &basis)?;
    let rho0 = DensityMatrix::from_pure(&coherent_product_state(z0, &basis)?);
    let exact = integrate_lindblad(&rho0, &lifted, cfg.t_final, cfg.dt, &cfg.snapshot_times)?;
    let ensemble = run_ensemble(z0, spec, cfg)?;
    let mut rows = Vec::with_capacity(ensemble.times.len());
    for (i, &t) in ensemble.times.iter().enumerate() {
        let contributions = coherent_contributions(&ensemble.snapshots[i], &basis)?;
        let rho_plus = rho_from_contributions(&contributions, &basis);
        let distance = trace_distance(&rho_plus.entries, &exact[i].1.entries)?;
        let sigma = bootstrap_sigma(&contributions, &exact[i].1, &basis, bootstrap, cfg.seed)?;
        let bound = 6.0 * spec.bosons() as f64 * t * alpha;
        rows.push(VerifyRow {
            time: t,
            trace_distance: distance,
            bound,
            sigma_stat: sigma,
            pass: distance <= bound + 3.0 * sigma,
        });
    }
    Ok(VerifyReport {
        alpha_perp_max: alpha,
        rows,
    })
}

/// Bootstrap standard deviation of the trace distance under resampling of
/// the ensemble members (counter-seeded, deterministic).
fn bootstrap_sigma(
    contributions: &[(f64, DVector<C64>)],
    exact: &DensityMatrix,
    basis: &Arc<FockBasis>,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps < 2 {
        return Ok(0.0);
    }
    let samples = contributions.len();
    let mut distances = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let mut resampled = Vec::with_capacity(samples);
        for i in 0..samples as u64 {
            let idx = (mix::mix_tuple(seed, rep, i, 0, 0xb0) % samples as u64) as usize;
            resampled.push(contributions[idx].clone());
        }
        let rho = rho_from_contributions(&resampled, basis);
        distances.push(trace_distance(&rho.entries, &exact.entries)?);
    }
    let mean = distances.iter().sum::<f64>() / reps as f64;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (reps as f64 - 1.0);
    Ok(var.sqrt())
}
