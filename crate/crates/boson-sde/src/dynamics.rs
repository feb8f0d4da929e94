//! Deterministic dynamics: the interaction matrix `B(z)`, the full drift
//! `F(z) = -i H⁰ z + B(z) z*/|z|² - (1/n) Σ_m X_m² z`, the mean-field ODE and
//! its discrete-nonlinear-Schrödinger special case, with a fixed-step RK4
//! integrator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::linalg::{HermitianMatrix, ModeVector};
use crate::tol;
use crate::{Error, Result};

/// Dense two-body coupling tensor `H_{jklm}` (N⁴ complex entries).
///
/// Only the part symmetric under `j↔k` and `l↔m` enters the lifted operator
/// `H_{jklm} â†_j â†_k â_l â_m`; construction rejects tensors whose
/// symmetrized part would lift to a non-Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyTensor {
    modes: usize,
    entries: Vec<C64>,
}

impl TwoBodyTensor {
    pub fn zeros(modes: usize) -> Self {
        Self {
            modes,
            entries: vec![C64::new(0.0, 0.0); modes.pow(4)],
        }
    }

    pub fn from_fn(modes: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Result<Self> {
        let mut t = Self::zeros(modes);
        for j in 0..modes {
            for k in 0..modes {
                for l in 0..modes {
                    for m in 0..modes {
                        let v = f(j, k, l, m);
                        let idx = t.index(j, k, l, m);
                        t.entries[idx] = v;
                    }
                }
            }
        }
        t.validate()?;
        Ok(t)
    }

    #[inline]
    fn index(&self, j: usize, k: usize, l: usize, m: usize) -> usize {
        ((j * self.modes + k) * self.modes + l) * self.modes + m
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize, m: usize) -> C64 {
        self.entries[self.index(j, k, l, m)]
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.norm_sqr() == 0.0)
    }

    /// Symmetrized entry `(1/4)(H_jklm + H_kjlm + H_jkml + H_kjml)`.
    fn symmetrized(&self, j: usize, k: usize, l: usize, m: usize) -> C64 {
        0.25 * (self.get(j, k, l, m) + self.get(k, j, l, m) + self.get(j, k, m, l)
            + self.get(k, j, m, l))
    }

    /// The lift is Hermitian iff `S_jklm = conj(S_lmjk)` for the symmetrized
    /// tensor `S`; equivalent to checking Hermiticity of the lifted operator.
    fn validate(&self) -> Result<()> {
        let n = self.modes;
        let mut scale: f64 = 1.0;
        for e in &self.entries {
            scale = scale.max(e.norm());
        }
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let s = self.symmetrized(j, k, l, m);
                        let s_conj = self.symmetrized(l, m, j, k).conj();
                        if (s - s_conj).norm() > 1e-10 * scale {
                            return Err(Error::NotHermitian {
                                context: "TwoBodyTensor (lifted two-body operator)",
                                deviation: (s - s_conj).norm(),
                                tolerance: 1e-10 * scale,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The full open system: one-body Hamiltonian, two-body tensor, Hermitian
/// coupling matrices `X_m`, and the boson count `n`.
///
/// The tensor and the `X_m` store the unscaled couplings; the `1/(2n)` and
/// `1/√n` prefactors are applied inside operations.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    h0: HermitianMatrix,
    tensor: TwoBodyTensor,
    xs: Vec<HermitianMatrix>,
    bosons: usize,
    /// Σ_m X_m², reused by the drift at every step.
    x_sq_sum: DMatrix<C64>,
}

impl SystemSpec {
    pub fn new(
        h0: HermitianMatrix,
        tensor: TwoBodyTensor,
        xs: Vec<HermitianMatrix>,
        bosons: usize,
    ) -> Result<Self> {
        let n = h0.dim();
        if tensor.modes() != n {
            return Err(Error::Dimension {
                context: "SystemSpec::new (tensor modes)",
                expected: n,
                got: tensor.modes(),
            });
        }
        for x in &xs {
            if x.dim() != n {
                return Err(Error::Dimension {
                    context: "SystemSpec::new (X_m dimension)",
                    expected: n,
                    got: x.dim(),
                });
            }
        }
        if bosons == 0 {
            return Err(Error::InvalidParameter {
                context: "SystemSpec::new",
                detail: "boson count n must be ≥ 1".into(),
            });
        }
        tensor.validate()?;
        let mut x_sq_sum = DMatrix::zeros(n, n);
        for x in &xs {
            x_sq_sum += x.matrix() * x.matrix();
        }
        Ok(Self {
            h0,
            tensor,
            xs,
            bosons,
            x_sq_sum,
        })
    }

    pub fn modes(&self) -> usize {
        self.h0.dim()
    }

    pub fn bosons(&self) -> usize {
        self.bosons
    }

    pub fn h0(&self) -> &HermitianMatrix {
        &self.h0
    }

    pub fn tensor(&self) -> &TwoBodyTensor {
        &self.tensor
    }

    pub fn xs(&self) -> &[HermitianMatrix] {
        &self.xs
    }

    pub(crate) fn x_sq_sum(&self) -> &DMatrix<C64> {
        &self.x_sq_sum
    }

    /// Same system with a different boson count.
    pub fn with_bosons(&self, bosons: usize) -> Result<Self> {
        Self::new(
            self.h0.clone(),
            self.tensor.clone(),
            self.xs.clone(),
            bosons,
        )
    }
}

/// `B_jk(z) = -(i/2)(H_jklm + H_kjlm) z_l z_m`, summed over l, m.
pub fn compute_b(z: &ModeVector, tensor: &TwoBodyTensor) -> Result<DMatrix<C64>> {
    let n = z.dim();
    if tensor.modes() != n {
        return Err(Error::Dimension {
            context: "compute_b",
            expected: n,
            got: tensor.modes(),
        });
    }
    Ok(compute_b_raw(&z.amplitudes, tensor))
}

pub(crate) fn compute_b_raw(z: &DVector<C64>, tensor: &TwoBodyTensor) -> DMatrix<C64> {
    let mut b = DMatrix::zeros(z.len(), z.len());
    compute_b_into(z, tensor, &mut b);
    b
}

pub(crate) fn compute_b_into(z: &DVector<C64>, tensor: &TwoBodyTensor, out: &mut DMatrix<C64>) {
    let n = z.len();
    let half_i = C64::new(0.0, -0.5);
    for j in 0..n {
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..n {
                for m in 0..n {
                    acc += (tensor.get(j, k, l, m) + tensor.get(k, j, l, m)) * z[l] * z[m];
                }
            }
            out[(j, k)] = half_i * acc;
        }
    }
}

/// The full drift `F(z) = -i H⁰ z + B(z) z*/|z|² - (1/n) Σ_m X_m² z`.
///
/// The `|z|⁻²` factor is evaluated at the current norm, so the drift stays
/// correct for states slightly off the unit sphere.
pub fn compute_drift(z: &ModeVector, spec: &SystemSpec) -> Result<DVector<C64>> {
    compute_drift_raw(&z.amplitudes, spec)
}

pub(crate) fn compute_drift_raw(z: &DVector<C64>, spec: &SystemSpec) -> Result<DVector<C64>> {
    let n = z.len();
    if spec.modes() != n {
        return Err(Error::Dimension {
            context: "compute_drift",
            expected: spec.modes(),
            got: n,
        });
    }
    let norm_sq: f64 = z.iter().map(|a| a.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroState {
            context: "compute_drift",
        });
    }
    let minus_i = C64::new(0.0, -1.0);
    let mut f = spec.h0.matrix() * z;
    f *= minus_i;
    if !spec.tensor.is_zero() {
        let b = compute_b_raw(z, &spec.tensor);
        let zconj = z.map(|a| a.conj());
        f += b * zconj / C64::new(norm_sq, 0.0);
    }
    if !spec.xs.is_empty() {
        let scale = C64::new(-1.0 / spec.bosons as f64, 0.0);
        f += spec.x_sq_sum() * z * scale;
    }
    Ok(f)
}

/// `ż_j = -i H⁰_jk z_k - i |z_j|² z_j / |z|²`, the discrete nonlinear
/// Schrödinger right-hand side.
pub fn dnse_rhs(z: &ModeVector, h0: &HermitianMatrix) -> Result<DVector<C64>> {
    dnse_rhs_raw(&z.amplitudes, h0)
}

pub(crate) fn dnse_rhs_raw(z: &DVector<C64>, h0: &HermitianMatrix) -> Result<DVector<C64>> {
    let n = z.len();
    if h0.dim() != n {
        return Err(Error::Dimension {
            context: "dnse_rhs",
            expected: h0.dim(),
            got: n,
        });
    }
    let norm_sq: f64 = z.iter().map(|a| a.norm_sqr()).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroState { context: "dnse_rhs" });
    }
    let minus_i = C64::new(0.0, -1.0);
    let mut f = h0.matrix() * z;
    f *= minus_i;
    for j in 0..n {
        f[j] += minus_i * z[j].norm_sqr() / norm_sq * z[j];
    }
    Ok(f)
}

/// Trajectory of a deterministic integration, one snapshot per step.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<ModeVector>,
}

impl OdeSolution {
    pub fn final_state(&self) -> &ModeVector {
        self.states.last().expect("solution holds at least t = 0")
    }
}

/// Classic fixed-step RK4. The final time is hit exactly (last step
/// shortened); snapshots at every step boundary including t = 0.
pub fn integrate_meanfield<F>(
    z0: &ModeVector,
    rhs: F,
    t_final: f64,
    dt: f64,
) -> Result<OdeSolution>
where
    F: Fn(&DVector<C64>) -> Result<DVector<C64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            context: "integrate_meanfield",
            detail: format!("dt must be > 0, got {dt}"),
        });
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter {
            context: "integrate_meanfield",
            detail: format!("t_final must be ≥ 0, got {t_final}"),
        });
    }
    let mut z = z0.amplitudes.clone();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![z0.clone()];
    while t < t_final - 1e-12 * t_final.max(1.0) {
        let step = dt.min(t_final - t);
        let k1 = rhs(&z)?;
        let k2 = rhs(&(&z + &k1 * C64::new(step / 2.0, 0.0)))?;
        let k3 = rhs(&(&z + &k2 * C64::new(step / 2.0, 0.0)))?;
        let k4 = rhs(&(&z + &k3 * C64::new(step, 0.0)))?;
        z += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
            * C64::new(step / 6.0, 0.0);
        t += step;
        times.push(t);
        states.push(ModeVector {
            amplitudes: z.clone(),
        });
    }
    Ok(OdeSolution { times, states })
}

/// Checks `|z|² = 1` within [`tol::UNIT_NORM`] and reports a named error.
pub fn require_unit(z: &ModeVector, context: &'static str) -> Result<()> {
    let n2 = z.norm_squared();
    if (n2 - 1.0).abs() > tol::UNIT_NORM {
        return Err(Error::NotUnitNorm {
            context,
            norm: n2.sqrt(),
            tolerance: tol::UNIT_NORM,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_real;
    use crate::test_support::{rand_unit_mode, Splitmix};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Kronecker-delta tensor of the discrete nonlinear Schrödinger system.
    pub(crate) fn dnse_tensor(modes: usize) -> TwoBodyTensor {
        TwoBodyTensor::from_fn(modes, |j, k, l, m| {
            if j == k && k == l && l == m {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap()
    }

    fn diag_x(modes: usize, m: usize, value: f64) -> HermitianMatrix {
        let mut x = DMatrix::zeros(modes, modes);
        x[(m, m)] = c(value, 0.0);
        HermitianMatrix::new(x).unwrap()
    }

    /// Brute-force reference for B(z), straight off the defining formula.
    fn b_reference(z: &DVector<C64>, tensor: &TwoBodyTensor) -> DMatrix<C64> {
        let n = z.len();
        let mut b = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        b[(j, k)] += c(0.0, -0.5)
                            * (tensor.get(j, k, l, m) + tensor.get(k, j, l, m))
                            * z[l]
                            * z[m];
                    }
                }
            }
        }
        b
    }

    fn rand_hermitian_tensor(rng: &mut Splitmix, n: usize) -> TwoBodyTensor {
        // Random Hermitian-lifting tensor: draw T freely, then use
        // T + conj(T with (jk)↔(lm) swapped), which satisfies the condition.
        let mut raw = TwoBodyTensor::zeros(n);
        for e in raw.entries.iter_mut() {
            *e = c(rng.symmetric(), rng.symmetric());
        }
        TwoBodyTensor::from_fn(n, |j, k, l, m| {
            raw.get(j, k, l, m) + raw.get(l, m, j, k).conj()
        })
        .unwrap()
    }

    #[test]
    fn b_zero_tensor() {
        let z = ModeVector::from_slice(&[c(0.3, 0.1), c(0.2, -0.4)]).unwrap();
        let b = compute_b(&z, &TwoBodyTensor::zeros(2)).unwrap();
        assert_eq!(b, DMatrix::zeros(2, 2));
    }

    #[test]
    fn b_dnse_basis_state() {
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let b = compute_b(&z, &dnse_tensor(2)).unwrap();
        // Only j=k=l=m=0 survives; the j↔k symmetrization doubles the ½.
        let expect = DMatrix::from_row_slice(2, 2, &[c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((b - expect).iter().all(|e| e.norm() < 1e-15));
    }

    #[test]
    fn b_matches_loop_oracle() {
        let mut rng = Splitmix::new(41);
        for _ in 0..10 {
            let tensor = rand_hermitian_tensor(&mut rng, 3);
            let z = rand_unit_mode(&mut rng, 3);
            let b = compute_b(&z, &tensor).unwrap();
            let reference = b_reference(&z.amplitudes, &tensor);
            let dev = (b - reference).iter().map(|e| e.norm()).fold(0.0, f64::max);
            assert!(dev <= 1e-12, "dev {dev}");
        }
    }

    #[test]
    fn drift_trivial_system_is_zero() {
        let spec = SystemSpec::new(
            HermitianMatrix::zeros(2),
            TwoBodyTensor::zeros(2),
            vec![],
            2,
        )
        .unwrap();
        let z = ModeVector::from_slice(&[c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let f = compute_drift(&z, &spec).unwrap();
        assert!(f.iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn drift_linear_case() {
        let h0 = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ))
        .unwrap();
        let spec = SystemSpec::new(h0, TwoBodyTensor::zeros(2), vec![], 2).unwrap();
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f = compute_drift(&z, &spec).unwrap();
        assert!((f[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!(f[1].norm() < 1e-15);
    }

    #[test]
    fn drift_exactly_linear_when_tensor_and_xs_absent() {
        let mut rng = Splitmix::new(43);
        let h0 = crate::test_support::rand_hermitian(&mut rng, 3);
        let spec = SystemSpec::new(h0.clone(), TwoBodyTensor::zeros(3), vec![], 4).unwrap();
        for _ in 0..20 {
            let z = rand_unit_mode(&mut rng, 3);
            let f = compute_drift(&z, &spec).unwrap();
            let expect = h0.matrix() * &z.amplitudes * c(0.0, -1.0);
            assert_eq!(f, expect, "no tensor, no Xs: F = -i H⁰ z bit-exactly");
        }
    }

    #[test]
    fn drift_dnse_with_measurement_term() {
        let n_bosons = 3;
        let cc: f64 = 2.5;
        let xs = vec![diag_x(2, 0, cc.sqrt()), diag_x(2, 1, cc.sqrt())];
        let spec =
            SystemSpec::new(HermitianMatrix::zeros(2), dnse_tensor(2), xs, n_bosons).unwrap();
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f = compute_drift(&z, &spec).unwrap();
        // B z* = (-i, 0); Σ X_m² z = c z, so F = (-i - c/n, 0).
        let expect0 = c(-cc / n_bosons as f64, -1.0);
        assert!((f[0] - expect0).norm() < 1e-14, "got {}", f[0]);
        assert!(f[1].norm() < 1e-14);
    }

    #[test]
    fn drift_norm_preserving_without_xs() {
        let mut rng = Splitmix::new(47);
        for _ in 0..20 {
            let tensor = rand_hermitian_tensor(&mut rng, 3);
            let spec = SystemSpec::new(HermitianMatrix::zeros(3), tensor, vec![], 2).unwrap();
            let z = rand_unit_mode(&mut rng, 3);
            let f = compute_drift(&z, &spec).unwrap();
            let radial: C64 = z.amplitudes.dotc(&f);
            assert!(radial.re.abs() <= 1e-12, "Re(z†F) = {}", radial.re);
        }
    }

    #[test]
    fn dnse_rhs_examples() {
        let h0 = HermitianMatrix::zeros(2);
        let z = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let f = dnse_rhs(&z, &h0).unwrap();
        assert!((f[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert!(f[1].norm() < 1e-15);

        let inv = 1.0 / 2.0_f64.sqrt();
        let z = ModeVector::from_slice(&[c(inv, 0.0), c(inv, 0.0)]).unwrap();
        let f = dnse_rhs(&z, &h0).unwrap();
        let expect = c(0.0, -inv / 2.0);
        assert!((f[0] - expect).norm() < 1e-15);
        assert!((f[1] - expect).norm() < 1e-15);
    }

    #[test]
    fn dnse_rhs_agrees_with_general_drift() {
        let mut rng = Splitmix::new(53);
        let h0 = crate::test_support::rand_hermitian(&mut rng, 2);
        let spec = SystemSpec::new(h0.clone(), dnse_tensor(2), vec![], 5).unwrap();
        for _ in 0..20 {
            let z = rand_unit_mode(&mut rng, 2);
            let general = compute_drift(&z, &spec).unwrap();
            let special = dnse_rhs(&z, &h0).unwrap();
            let dev = (general - special).iter().map(|e| e.norm()).fold(0.0, f64::max);
            assert!(dev <= 1e-12, "dev {dev}");
        }
    }

    #[test]
    fn zero_state_rejected() {
        let spec = SystemSpec::new(
            HermitianMatrix::zeros(2),
            TwoBodyTensor::zeros(2),
            vec![],
            1,
        )
        .unwrap();
        let z = ModeVector::from_slice(&[c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(
            compute_drift(&z, &spec),
            Err(Error::ZeroState { .. })
        ));
        assert!(matches!(
            dnse_rhs(&z, &HermitianMatrix::zeros(2)),
            Err(Error::ZeroState { .. })
        ));
    }

    #[test]
    fn rk4_linear_closed_form() {
        let h0 = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ))
        .unwrap();
        let z0 = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let rhs = |z: &DVector<C64>| -> Result<DVector<C64>> {
            Ok(h0.matrix() * z * c(0.0, -1.0))
        };
        let sol = integrate_meanfield(&z0, rhs, std::f64::consts::PI, 1e-3).unwrap();
        let zf = sol.final_state();
        assert!((zf.amplitudes[0] - c(-1.0, 0.0)).norm() < 1e-8);
        assert!(zf.amplitudes[1].norm() < 1e-8);
        assert!((sol.times.last().unwrap() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rk4_dnse_phase_rotation() {
        let h0 = HermitianMatrix::zeros(2);
        let z0 = ModeVector::from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let sol = integrate_meanfield(&z0, |z| dnse_rhs_raw(z, &h0), 1.0, 1e-3).unwrap();
        let zf = sol.final_state();
        let expect = c(1.0_f64.cos(), -(1.0_f64.sin()));
        assert!((zf.amplitudes[0] - expect).norm() < 1e-8);
        assert!(zf.amplitudes[1].norm() < 1e-8);
    }

    #[test]
    fn rk4_conserves_dnse_norm_over_long_runs() {
        let mut rng = Splitmix::new(59);
        let h0 = crate::test_support::rand_hermitian(&mut rng, 4);
        for _ in 0..3 {
            let z0 = rand_unit_mode(&mut rng, 4);
            let sol = integrate_meanfield(&z0, |z| dnse_rhs_raw(z, &h0), 10.0, 1e-3).unwrap();
            for state in &sol.states {
                assert!((state.norm() - 1.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let h0 = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.3, 0.1), c(0.3, -0.1), c(-1.0, 0.0)],
        ))
        .unwrap();
        let z0 = ModeVector::from_slice(&[c(0.8, 0.0), c(0.0, 0.6)]).unwrap();
        let rhs = |z: &DVector<C64>| -> Result<DVector<C64>> {
            Ok(h0.matrix() * z * c(0.0, -1.0))
        };
        // Reference at a much finer step.
        let reference = integrate_meanfield(&z0, rhs, 1.0, 1e-5)
            .unwrap()
            .final_state()
            .clone();
        let err = |dt: f64| {
            let zf = integrate_meanfield(&z0, rhs, 1.0, dt)
                .unwrap()
                .final_state()
                .clone();
            (zf.amplitudes - &reference.amplitudes).norm()
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        assert!(e1 / e2 >= 12.0, "O(dt⁴): ratio {} too small", e1 / e2);
    }

    #[test]
    fn real_embedded_linear_generator_is_antisymmetric() {
        let mut rng = Splitmix::new(61);
        let h0 = crate::test_support::rand_hermitian(&mut rng, 3);
        let spec = SystemSpec::new(h0, TwoBodyTensor::zeros(3), vec![], 1).unwrap();
        // Column k of the real generator is the drift at the k-th real basis vector.
        let dim = 6;
        let mut a = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut r = DVector::zeros(dim);
            r[k] = 1.0;
            let z = crate::linalg::to_complex(&crate::linalg::RealState::new(r).unwrap());
            let f = compute_drift(&z, &spec).unwrap();
            let fr = to_real(&ModeVector { amplitudes: f });
            a.set_column(k, &fr.coords);
        }
        let skew = (&a + a.transpose()).amax();
        assert!(skew <= 1e-12, "A + Aᵀ = {skew}");
    }

    #[test]
    fn non_hermitian_tensor_rejected() {
        let bad = TwoBodyTensor::from_fn(2, |j, k, l, m| {
            if j == 0 && k == 0 && l == 1 && m == 1 {
                c(0.0, 1.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(matches!(bad, Err(Error::NotHermitian { .. })));
    }
}
