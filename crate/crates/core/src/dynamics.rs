//! Piecewise-constant Schrödinger dynamics `iħ dU/dt = (H₀ − μE(t))U`, the
//! control-to-propagator map and its first derivative.

use nalgebra::{Complex, DVector};

use crate::atlas::{Inertia, TAU_CRIT};
use crate::error::{Error, Result};
use crate::landscapes::{self, symmetric_eigenvalues, LandscapeSpec, HESSIAN_STEP};
use crate::matgeom::{hermitian_eigen, skew_basis, TangentVector, UnitaryMatrix, EPS_UNITARY};
use crate::scalar::{check_tol, 
    cis, cplx, hermitian_residual, hs_inner, hs_norm, lit, re, skew_residual, spectral_norm, to_f64, trace,
    CMatrix, RMatrix, Real,
};

/// Hermiticity tolerance for `H₀` and `μ`.
pub const EPS_HERMITIAN: f64 = 1e-12;
/// Relative singular-value cutoff for the rank of `dV_T`.
pub const TAU_RANK: f64 = 1e-8;
/// Largest Dyson order accepted by [`dyson_oracle`].
pub const MAX_DYSON_ORDER: usize = 12;

#[derive(Clone, Debug)]
pub struct ControlProblem<T: Real> {
    h0: CMatrix<T>,
    mu: CMatrix<T>,
    hbar: T,
    horizon: T,
    slices: usize,
}

impl<T: Real> ControlProblem<T> {
    pub fn new(h0: CMatrix<T>, mu: CMatrix<T>, hbar: T, horizon: T, slices: usize) -> Result<Self> {
        for m in [&h0, &mu] {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare(m.nrows(), m.ncols()));
            }
            let r = hermitian_residual(m);
            if r > check_tol::<T>(EPS_HERMITIAN) * T::one().max(hs_norm(m)) {
                return Err(Error::NotHermitian(to_f64(r)));
            }
        }
        if h0.nrows() != mu.nrows() {
            return Err(Error::DimensionMismatch { expected: h0.nrows(), found: mu.nrows() });
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", to_f64(horizon))));
        }
        if !(hbar > T::zero()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {}", to_f64(hbar))));
        }
        if slices == 0 {
            return Err(Error::InvalidArgument("slice count must be at least 1".into()));
        }
        Ok(Self { h0, mu, hbar, horizon, slices })
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn h0(&self) -> &CMatrix<T> {
        &self.h0
    }

    pub fn mu(&self) -> &CMatrix<T> {
        &self.mu
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn dt(&self) -> T {
        self.horizon / lit::<T>(self.slices as f64)
    }

    pub fn with_slices(&self, slices: usize) -> Result<Self> {
        Self::new(self.h0.clone(), self.mu.clone(), self.hbar, self.horizon, slices)
    }

    /// `H₀ − E·μ`.
    pub fn hamiltonian(&self, e: T) -> CMatrix<T> {
        &self.h0 - &self.mu * re(e)
    }

    /// Uniform samples in `[−amplitude, amplitude]` from a seeded ChaCha8 stream.
    pub fn seeded_field(&self, amplitude: f64, seed: u64) -> ControlField<T> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..self.slices).map(|_| lit(rng.random_range(-1.0..=1.0) * amplitude)).collect();
        ControlField { samples, horizon: self.horizon }
    }

    /// Field samples at slice midpoints of a continuous `E(t)`.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ControlField<T> {
        let dt = to_f64(self.dt());
        let samples = (0..self.slices).map(|j| lit(f((j as f64 + 0.5) * dt))).collect();
        ControlField { samples, horizon: self.horizon }
    }
}

/// Piecewise-constant field on `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField<T: Real> {
    samples: Vec<T>,
    horizon: T,
}

impl<T: Real> ControlField<T> {
    pub fn new(samples: Vec<T>, horizon: T) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("field needs at least one sample".into()));
        }
        if let Some(j) = samples.iter().position(|s| !to_f64(*s).is_finite()) {
            return Err(Error::InvalidArgument(format!("field sample {j} is not finite")));
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self { samples, horizon })
    }

    pub fn zeros(cp: &ControlProblem<T>) -> Self {
        Self { samples: vec![T::zero(); cp.slices], horizon: cp.horizon }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> T {
        self.horizon / lit::<T>(self.samples.len() as f64)
    }

    /// `Σ aⱼbⱼ·Δt`.
    pub fn inner(&self, other: &Self) -> T {
        self.samples.iter().zip(&other.samples).fold(T::zero(), |acc, (a, b)| acc + *a * *b) * self.dt()
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| *a + s * *b).collect();
        Self { samples, horizon: self.horizon }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { samples: self.samples.iter().map(|a| *a * s).collect(), horizon: self.horizon }
    }

    fn check(&self, cp: &ControlProblem<T>) -> Result<()> {
        if self.samples.len() != cp.slices {
            return Err(Error::DimensionMismatch { expected: cp.slices, found: self.samples.len() });
        }
        Ok(())
    }
}

/// Eigendecomposition of one slice Hamiltonian with its full and half steps.
#[derive(Clone, Debug)]
struct Slice<T: Real> {
    energies: Vec<T>,
    vectors: CMatrix<T>,
    half: CMatrix<T>,
}

/// Slice-boundary propagators `V_0 = 𝕀, …, V_m = V_T`.
#[derive(Clone, Debug)]
pub struct PropagatorTrajectory<T: Real> {
    problem: ControlProblem<T>,
    field: ControlField<T>,
    boundaries: Vec<CMatrix<T>>,
    slices: Vec<Slice<T>>,
}

impl<T: Real> PropagatorTrajectory<T> {
    pub fn problem(&self) -> &ControlProblem<T> {
        &self.problem
    }

    pub fn field(&self) -> &ControlField<T> {
        &self.field
    }

    pub fn boundaries(&self) -> &[CMatrix<T>] {
        &self.boundaries
    }

    pub fn final_propagator(&self) -> UnitaryMatrix<T> {
        UnitaryMatrix::new_unchecked(self.boundaries[self.boundaries.len() - 1].clone())
    }

    /// `V` at the midpoint of slice `j` (zero-based).
    pub fn midpoint(&self, j: usize) -> CMatrix<T> {
        &self.slices[j].half * &self.boundaries[j]
    }

    /// `V_mid,j† μ V_mid,j` for every slice.
    fn dressed_dipoles(&self) -> Vec<CMatrix<T>> {
        (0..self.slices.len())
            .map(|j| {
                let v = self.midpoint(j);
                v.adjoint() * self.problem.mu() * v
            })
            .collect()
    }
}

fn phase_diag<T: Real>(vecs: &CMatrix<T>, energies: &[T], t: T) -> CMatrix<T> {
    let mut phased = vecs.clone();
    for (j, e) in energies.iter().enumerate() {
        let f = cis(-(*e * t));
        let mut col = phased.column_mut(j);
        col *= f;
    }
    phased * vecs.adjoint()
}

/// Exact slice exponentials `V_j = exp(−iΔt(H₀ − E_jμ)/ħ)V_{j−1}`.
pub fn propagate<T: Real>(cp: &ControlProblem<T>, field: &ControlField<T>) -> Result<PropagatorTrajectory<T>> {
    field.check(cp)?;
    let n = cp.dim();
    let tau = cp.dt() / cp.hbar;
    let mut boundaries = Vec::with_capacity(cp.slices + 1);
    let mut slices = Vec::with_capacity(cp.slices);
    let mut v = CMatrix::<T>::identity(n, n);
    boundaries.push(v.clone());
    for e in &field.samples {
        let (energies, vectors) = hermitian_eigen(&cp.hamiltonian(*e))?;
        let step = phase_diag(&vectors, &energies, tau);
        let half = phase_diag(&vectors, &energies, tau * lit(0.5));
        v = &step * v;
        boundaries.push(v.clone());
        slices.push(Slice { energies, vectors, half });
    }
    Ok(PropagatorTrajectory { problem: cp.clone(), field: field.clone(), boundaries, slices })
}

/// Partial Dyson sum `𝕀 + Σ_{n≤order} (−i/ħ)ⁿ ∫…∫ H(t₁)…H(tₙ)`, evaluated exactly
/// for a piecewise-constant Hamiltonian: the order-`n` term is the degree-`n`
/// part of `∏ⱼ Σₖ (−iΔtHⱼ/ħ)ᵏ/k!`, accumulated slice by slice.
pub fn dyson_oracle<T: Real>(cp: &ControlProblem<T>, field: &ControlField<T>, order: usize) -> Result<CMatrix<T>> {
    if order > MAX_DYSON_ORDER {
        return Err(Error::OrderGuard(order));
    }
    field.check(cp)?;
    let n = cp.dim();
    let factor = cplx(T::zero(), -(cp.dt() / cp.hbar));
    // terms[d] = degree-d part of the product so far.
    let mut terms: Vec<CMatrix<T>> = (0..=order).map(|d| if d == 0 { CMatrix::identity(n, n) } else { CMatrix::zeros(n, n) }).collect();
    for e in &field.samples {
        let g = cp.hamiltonian(*e) * factor;
        let mut powers = Vec::with_capacity(order + 1);
        powers.push(CMatrix::<T>::identity(n, n));
        for k in 1..=order {
            let next = &powers[k - 1] * &g * re(lit::<T>(1.0 / k as f64));
            powers.push(next);
        }
        let mut updated: Vec<CMatrix<T>> = vec![CMatrix::zeros(n, n); order + 1];
        for (d, out) in updated.iter_mut().enumerate() {
            for k in 0..=d {
                *out += &powers[k] * &terms[d - k];
            }
        }
        terms = updated;
    }
    Ok(terms.into_iter().fold(CMatrix::zeros(n, n), |acc, t| acc + t))
}

/// Tail bound `Σ_{n>order} xⁿ/n!` with `x = ∫‖H(t)‖dt/ħ`.
pub fn dyson_tail_bound<T: Real>(cp: &ControlProblem<T>, field: &ControlField<T>, order: usize) -> T {
    let x = field
        .samples
        .iter()
        .fold(T::zero(), |acc, e| acc + spectral_norm(&cp.hamiltonian(*e)))
        * cp.dt()
        / cp.hbar;
    let mut term = T::one();
    let mut head = T::one();
    for k in 1..=order {
        term *= x / lit(k as f64);
        head += term;
    }
    (x.exp() - head).max(T::zero())
}

/// `dV_T(δE) = (i/ħ)V_T Σⱼ V_mid,j† μ V_mid,j δEⱼ Δt` (midpoint quadrature).
pub fn frechet_dv<T: Real>(traj: &PropagatorTrajectory<T>, delta: &ControlField<T>) -> Result<TangentVector<T>> {
    delta.check(&traj.problem)?;
    let n = traj.problem.dim();
    let mut acc = CMatrix::<T>::zeros(n, n);
    for (j, d) in delta.samples.iter().enumerate() {
        if *d == T::zero() {
            continue;
        }
        let v = traj.midpoint(j);
        acc += v.adjoint() * traj.problem.mu() * v * re(*d);
    }
    let vt = traj.final_propagator();
    let scale = cplx(T::zero(), traj.problem.dt() / traj.problem.hbar);
    let entries = vt.matrix() * acc * scale;
    Ok(TangentVector::new_unchecked(vt, entries))
}

/// `(e^{z} − 1)/z` for purely imaginary `z = iθ`.
fn phi_imag<T: Real>(theta: T) -> Complex<T> {
    if theta.abs() < lit(1e-3) {
        let z = cplx(T::zero(), theta);
        let z2 = z * z;
        Complex::new(T::one(), T::zero())
            + z * lit::<T>(0.5)
            + z2 * lit::<T>(1.0 / 6.0)
            + z2 * z * lit::<T>(1.0 / 24.0)
            + z2 * z2 * lit::<T>(1.0 / 120.0)
    } else {
        let half = theta * lit(0.5);
        let s = half.sin();
        cplx(-(s * s) * lit(2.0), theta.sin()) / cplx(T::zero(), theta)
    }
}

/// Exact directional derivative of the discrete map `E ↦ V_m`, using divided
/// differences of `λ ↦ e^{−iΔtλ/ħ}` in each slice eigenbasis. Agrees with
/// [`frechet_dv`] to `O(Δt²)`.
pub fn frechet_dv_exact<T: Real>(traj: &PropagatorTrajectory<T>, delta: &ControlField<T>) -> Result<TangentVector<T>> {
    delta.check(&traj.problem)?;
    let n = traj.problem.dim();
    let a = traj.problem.dt() / traj.problem.hbar;
    let vt = traj.final_propagator();
    let mut acc = CMatrix::<T>::zeros(n, n);
    for (j, d) in delta.samples.iter().enumerate() {
        if *d == T::zero() {
            continue;
        }
        let s = &traj.slices[j];
        // K = −μ·δ in the slice eigenbasis.
        let k = s.vectors.adjoint() * traj.problem.mu() * &s.vectors * re(-*d);
        let dd = CMatrix::from_fn(n, n, |p, q| {
            let (lp, lq) = (s.energies[p], s.energies[q]);
            // f[λp, λq] = e^{−iaλq}·(−ia)·φ(−ia(λp − λq)).
            cis(-(a * lq)) * cplx(T::zero(), -a) * phi_imag(-(a * (lp - lq)))
        });
        let inner = k.component_mul(&dd);
        let dstep = &s.vectors * inner * s.vectors.adjoint();
        let after = vt.matrix() * traj.boundaries[j + 1].adjoint();
        acc += after * dstep * &traj.boundaries[j];
    }
    Ok(TangentVector::new_unchecked(vt, acc))
}

/// `g_j = −(1/ħ) Im Tr(A† V_T V_mid,j† μ V_mid,j)`; the adjoint of
/// [`frechet_dv`] for the `L²` product `Σ gⱼδⱼΔt`.
pub fn adjoint_dv<T: Real>(traj: &PropagatorTrajectory<T>, a: &TangentVector<T>) -> Result<ControlField<T>> {
    let vt = traj.final_propagator();
    let n = vt.dim();
    if a.matrix().nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.matrix().nrows() });
    }
    let body = vt.matrix().adjoint() * a.matrix();
    let r = skew_residual(&body);
    if r > check_tol::<T>(EPS_UNITARY) * T::one().max(hs_norm(&body)) {
        return Err(Error::NotTangent(to_f64(r)));
    }
    let lhs = a.matrix().adjoint() * vt.matrix();
    let hbar = traj.problem.hbar;
    let samples = traj
        .dressed_dipoles()
        .iter()
        .map(|m| -(trace(&(&lhs * m)).im) / hbar)
        .collect();
    Ok(ControlField { samples, horizon: traj.problem.horizon })
}

pub fn dynamical_value<T: Real>(traj: &PropagatorTrajectory<T>, spec: &LandscapeSpec<T>) -> Result<T> {
    landscapes::value(spec, &traj.final_propagator())
}

/// `(dV_T)*(grad J(V_T))`.
pub fn dynamical_gradient<T: Real>(traj: &PropagatorTrajectory<T>, spec: &LandscapeSpec<T>) -> Result<ControlField<T>> {
    let g = landscapes::gradient(spec, &traj.final_propagator())?;
    adjoint_dv(traj, &g)
}

/// Matrix of `dV_T` from `L²`-normalized slice indicators to coordinates in the
/// orthonormal basis `{V_T·Ω_a}`; shape `N² × m`.
pub fn derivative_matrix<T: Real>(traj: &PropagatorTrajectory<T>) -> RMatrix<T> {
    let n = traj.problem.dim();
    let basis = skew_basis::<T>(n);
    let dt = traj.problem.dt();
    let scale = cplx(T::zero(), dt.sqrt() / traj.problem.hbar);
    let dressed = traj.dressed_dipoles();
    let mut out = RMatrix::<T>::zeros(basis.len(), dressed.len());
    for (j, m) in dressed.iter().enumerate() {
        let body = m * scale;
        for (a, omega) in basis.iter().enumerate() {
            out[(a, j)] = hs_inner(omega, &body);
        }
    }
    out
}

/// Numerical rank of `dV_T` with cutoff `τ_rank·σ_max`.
pub fn derivative_rank<T: Real>(d: &RMatrix<T>, tau_rank: f64) -> usize {
    let sv = d.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    let cut = smax * lit(tau_rank);
    sv.iter().filter(|s| **s > cut).count()
}

#[derive(Clone, Debug)]
pub struct DynamicalInertia<T: Real> {
    /// Counts of the `m × m` dynamical Hessian: `zero` is the finite null count.
    pub dynamical: Inertia,
    /// Counts of the `N² × N²` kinematic Hessian at `V_T`.
    pub kinematic: Inertia,
    pub rank: usize,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> DynamicalInertia<T> {
    /// Nonzero counts agree with the kinematic inertia.
    pub fn transfer_holds(&self) -> bool {
        self.dynamical.negative == self.kinematic.negative && self.dynamical.positive == self.kinematic.positive
    }
}

/// Inertia of `(dV_T)* ∘ Hess J ∘ dV_T` at a regular critical point of
/// `J ∘ V_T`. Refuses non-critical points and rank-deficient `dV_T`.
pub fn dynamical_hessian_inertia<T: Real>(
    traj: &PropagatorTrajectory<T>,
    spec: &LandscapeSpec<T>,
    tau: T,
) -> Result<DynamicalInertia<T>> {
    let n = traj.problem.dim();
    let m = traj.problem.slices;
    if m < n * n {
        return Err(Error::RankDeficient { rank: m, required: n * n });
    }
    let vt = traj.final_propagator();
    let gnorm = landscapes::gradient(spec, &vt)?.norm();
    if gnorm > lit::<T>(TAU_CRIT) * spec.scale() {
        return Err(Error::NotCritical(to_f64(gnorm)));
    }
    let d = derivative_matrix(traj);
    let rank = derivative_rank(&d, TAU_RANK);
    if rank < n * n {
        return Err(Error::RankDeficient { rank, required: n * n });
    }
    let hk = if spec.kind().is_weighted() {
        landscapes::hessian_operator_matrix(spec, &vt)?
    } else {
        landscapes::hessian_matrix(spec, &vt, HESSIAN_STEP)?
    };
    let hk = (&hk + hk.transpose()) * lit::<T>(0.5);
    let hd = d.transpose() * &hk * &d;
    let eigenvalues = symmetric_eigenvalues(&hd);
    let kinematic = Inertia::count(&symmetric_eigenvalues(&hk), tau);
    Ok(DynamicalInertia { dynamical: Inertia::count(&eigenvalues, tau), kinematic, rank, eigenvalues })
}

/// Least-squares field update `δ` with `dV_T(δ) ≈ V_T·Y`, through the
/// pseudoinverse of [`derivative_matrix`].
pub fn steer_field<T: Real>(traj: &PropagatorTrajectory<T>, y: &CMatrix<T>) -> Result<ControlField<T>> {
    let n = traj.problem.dim();
    let basis = skew_basis::<T>(n);
    let rhs = DVector::from_iterator(basis.len(), basis.iter().map(|omega| hs_inner(omega, y)));
    let d = derivative_matrix(traj);
    let svd = d.svd(true, true);
    let smax = svd.singular_values.iter().fold(T::zero(), |a, b| a.max(*b));
    let coeffs = svd
        .solve(&rhs, smax * lit(TAU_RANK))
        .map_err(|e| Error::Numerical(e.to_string()))?;
    // Coefficients refer to L²-normalized indicators; rescale to samples.
    let scale = T::one() / traj.problem.dt().sqrt();
    let samples = coeffs.iter().map(|c| *c * scale).collect();
    Ok(ControlField { samples, horizon: traj.problem.horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{pauli_x, pauli_z};
    use crate::landscapes::LandscapeKind;
    use crate::matgeom::{analyze_weight, complex_gaussian, exp_minus_i_hermitian, random_tangent, TAU_CLUSTER};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
        let g = complex_gaussian::<f64, _>(n, n, rng);
        (&g + g.adjoint()) * re(0.5)
    }

    fn random_field(cp: &ControlProblem<f64>, amp: f64, rng: &mut ChaCha8Rng) -> ControlField<f64> {
        ControlField::new((0..cp.slices()).map(|_| rng.random_range(-amp..amp)).collect(), cp.horizon()).unwrap()
    }

    fn qubit(t: f64, m: usize) -> ControlProblem<f64> {
        ControlProblem::new(pauli_z(), pauli_x(), 1.0, t, m).unwrap()
    }

    #[test]
    fn free_evolution() {
        let cp = qubit(1.3, 7);
        let traj = propagate(&cp, &ControlField::zeros(&cp)).unwrap();
        let exact = exp_minus_i_hermitian(&pauli_z::<f64>(), 1.3).unwrap();
        assert!(hs_norm(&(traj.final_propagator().matrix() - exact)) < 1e-13);
    }

    #[test]
    fn commuting_pulse_area() {
        let cp = ControlProblem::new(CMatrix::zeros(2, 2), pauli_x(), 1.0, 2.0, 10).unwrap();
        let field = ControlField::new(vec![PI / 4.0; 10], 2.0).unwrap();
        let vt = propagate(&cp, &field).unwrap().final_propagator();
        let expected = pauli_x::<f64>() * cplx(0.0, 1.0);
        assert!(hs_norm(&(vt.matrix() - expected)) < 1e-13);
    }

    #[test]
    fn propagators_stay_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cp = ControlProblem::new(random_hermitian(3, &mut rng), random_hermitian(3, &mut rng), 1.0, 5.0, 2000).unwrap();
        let traj = propagate(&cp, &random_field(&cp, 3.0, &mut rng)).unwrap();
        for v in traj.boundaries() {
            let r = hs_norm(&(v.adjoint() * v - CMatrix::identity(3, 3)));
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn composition_over_split_horizon() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (h0, mu) = (random_hermitian(2, &mut rng), random_hermitian(2, &mut rng));
        let cp = ControlProblem::new(h0.clone(), mu.clone(), 1.0, 2.0, 40).unwrap();
        let field = random_field(&cp, 1.0, &mut rng);
        let full = propagate(&cp, &field).unwrap().final_propagator();
        let half = ControlProblem::new(h0, mu, 1.0, 1.0, 20).unwrap();
        let first = ControlField::new(field.samples()[..20].to_vec(), 1.0).unwrap();
        let second = ControlField::new(field.samples()[20..].to_vec(), 1.0).unwrap();
        let a = propagate(&half, &first).unwrap().final_propagator();
        let b = propagate(&half, &second).unwrap().final_propagator();
        assert!(hs_norm(&(b.matrix() * a.matrix() - full.matrix())) < 1e-13);
    }

    #[test]
    fn refinement_converges_at_second_order() {
        let cp = qubit(1.0, 50);
        let f = |t: f64| (3.0 * t).sin();
        let reference = propagate(&cp.with_slices(6400).unwrap(), &cp.with_slices(6400).unwrap().sample(f))
            .unwrap()
            .final_propagator();
        let err = |m: usize| {
            let c = cp.with_slices(m).unwrap();
            let v = propagate(&c, &c.sample(f)).unwrap().final_propagator();
            hs_norm(&(v.matrix() - reference.matrix()))
        };
        let ratio = err(50) / err(100);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn dyson_examples() {
        let cp = qubit(0.7, 5);
        let zero = ControlField::zeros(&cp);
        assert_eq!(dyson_oracle(&cp, &zero, 0).unwrap(), CMatrix::identity(2, 2));
        let first = dyson_oracle(&cp, &zero, 1).unwrap();
        let expected = CMatrix::identity(2, 2) - pauli_z::<f64>() * cplx(0.0, 0.7);
        assert!(hs_norm(&(first - expected)) < 1e-14);
        assert!(matches!(dyson_oracle(&cp, &zero, 13), Err(Error::OrderGuard(13))));
    }

    #[test]
    fn dyson_matches_propagation_and_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = ControlProblem::new(random_hermitian(3, &mut rng), random_hermitian(3, &mut rng), 1.0, 1.0, 30).unwrap();
        let field = random_field(&base, 1.0, &mut rng);
        let peak = field.samples().iter().map(|e| spectral_norm(&base.hamiltonian(*e))).fold(0.0, f64::max);
        for (x, tol) in [(1.0, 1e-5), (0.5, 1e-8)] {
            // Rescale so that max ‖H(t)‖·T = x.
            let s = x / peak;
            let cp = ControlProblem::new(base.h0() * re(s), base.mu() * re(s), 1.0, 1.0, 30).unwrap();
            let exact = propagate(&cp, &field).unwrap().final_propagator();
            let mut last = f64::INFINITY;
            for k in 1..=10 {
                let err = hs_norm(&(dyson_oracle(&cp, &field, k).unwrap() - exact.matrix()));
                assert!(err < last, "order {k}");
                assert!(err <= dyson_tail_bound(&cp, &field, k) * 3f64.sqrt() + 1e-14);
                last = err;
            }
            assert!(hs_norm(&(dyson_oracle(&cp, &field, 8).unwrap() - exact.matrix())) < tol, "x = {x}");
        }
    }

    #[test]
    fn commuting_derivative() {
        let cp = ControlProblem::new(CMatrix::zeros(2, 2), pauli_x(), 1.0, 2.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = random_field(&cp, 1.0, &mut rng);
        let delta = random_field(&cp, 1.0, &mut rng);
        let traj = propagate(&cp, &field).unwrap();
        let dv = frechet_dv(&traj, &delta).unwrap();
        let area: f64 = delta.samples().iter().sum::<f64>() * cp.dt();
        let expected = traj.final_propagator().matrix() * pauli_x::<f64>() * cplx(0.0, area);
        assert!(hs_norm(&(dv.matrix() - expected)) < 1e-13);
    }

    #[test]
    fn derivative_is_linear_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cp = ControlProblem::new(random_hermitian(3, &mut rng), random_hermitian(3, &mut rng), 1.0, 1.0, 20).unwrap();
        let traj = propagate(&cp, &random_field(&cp, 1.0, &mut rng)).unwrap();
        let (d1, d2) = (random_field(&cp, 1.0, &mut rng), random_field(&cp, 1.0, &mut rng));
        let combo = d1.scaled(2.0).axpy(-0.5, &d2);
        let lhs = frechet_dv(&traj, &combo).unwrap();
        let rhs = frechet_dv(&traj, &d1).unwrap().matrix() * re(2.0) - frechet_dv(&traj, &d2).unwrap().matrix() * re(0.5);
        assert!(hs_norm(&(lhs.matrix() - rhs)) < 1e-13);
        assert!(skew_residual(&lhs.body()) < 1e-12);
    }

    #[test]
    fn exact_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cp = ControlProblem::new(random_hermitian(2, &mut rng), random_hermitian(2, &mut rng), 1.0, 1.0, 10).unwrap();
        let field = random_field(&cp, 1.0, &mut rng);
        let delta = random_field(&cp, 1.0, &mut rng);
        let traj = propagate(&cp, &field).unwrap();
        let h = 1e-6;
        let plus = propagate(&cp, &field.axpy(h, &delta)).unwrap().final_propagator();
        let minus = propagate(&cp, &field.axpy(-h, &delta)).unwrap().final_propagator();
        let fd = (plus.matrix() - minus.matrix()) / re(2.0 * h);
        let exact = frechet_dv_exact(&traj, &delta).unwrap();
        assert!(hs_norm(&(fd - exact.matrix())) < 1e-8);
    }

    #[test]
    fn taylor_remainder_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cp = ControlProblem::new(random_hermitian(2, &mut rng), random_hermitian(2, &mut rng), 1.0, 1.0, 200).unwrap();
        let field = random_field(&cp, 1.0, &mut rng);
        let traj = propagate(&cp, &field).unwrap();
        let v0 = traj.final_propagator();
        for _ in 0..20 {
            let delta = random_field(&cp, 1.0, &mut rng);
            let rem = |s: f64| {
                let v = propagate(&cp, &field.axpy(s, &delta)).unwrap().final_propagator();
                let lin = frechet_dv(&traj, &delta.scaled(s)).unwrap();
                hs_norm(&(v.matrix() - v0.matrix() - lin.matrix()))
            };
            let ratio = rem(0.1) / rem(0.05);
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        }
    }

    #[test]
    fn adjoint_identity_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cp = ControlProblem::new(random_hermitian(3, &mut rng), random_hermitian(3, &mut rng), 1.0, 2.0, 200).unwrap();
        let traj = propagate(&cp, &random_field(&cp, 1.0, &mut rng)).unwrap();
        let vt = traj.final_propagator();
        let mu_norm = spectral_norm(cp.mu());
        for _ in 0..10 {
            let a = random_tangent(&vt, &mut rng);
            let delta = random_field(&cp, 1.0, &mut rng);
            let lhs = a.inner(&frechet_dv(&traj, &delta).unwrap());
            let g = adjoint_dv(&traj, &a).unwrap();
            let rhs = g.inner(&delta);
            assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1.0));
            assert!(g.norm() <= cp.horizon().sqrt() * mu_norm * a.norm() * (1.0 + 1e-12));
        }
        let zero = TangentVector::zero(vt);
        assert!(adjoint_dv(&traj, &zero).unwrap().samples().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn adjoint_identity_against_exact_derivative_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cp = ControlProblem::new(random_hermitian(2, &mut rng), random_hermitian(2, &mut rng), 1.0, 1.0, 50).unwrap();
        let residual = |m: usize| {
            let c = cp.with_slices(m).unwrap();
            let traj = propagate(&c, &c.sample(|t| (2.0 * t).cos())).unwrap();
            let vt = traj.final_propagator();
            let a = TangentVector::new_unchecked(vt.clone(), vt.matrix() * pauli_x::<f64>() * cplx(0.0, 1.0));
            let delta = c.sample(|t| 1.0 + t * t);
            let exact = a.inner(&frechet_dv_exact(&traj, &delta).unwrap());
            (exact - adjoint_dv(&traj, &a).unwrap().inner(&delta)).abs()
        };
        let ratio = residual(50) / residual(100);
        assert!(ratio >= 3.5, "ratio {ratio}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cp = ControlProblem::new(random_hermitian(2, &mut rng), random_hermitian(2, &mut rng), 1.0, 1.0, 60).unwrap();
        let w = UnitaryMatrix::haar_random(2, &mut rng);
        for kind in LandscapeKind::ALL {
            let weight = kind
                .is_weighted()
                .then(|| analyze_weight(&complex_gaussian::<f64, _>(2, 2, &mut rng), TAU_CLUSTER).unwrap());
            let spec = LandscapeSpec::new(kind, w.clone(), weight).unwrap();
            let field = random_field(&cp, 1.0, &mut rng);
            let delta = random_field(&cp, 1.0, &mut rng);
            let traj = propagate(&cp, &field).unwrap();
            let g = dynamical_gradient(&traj, &spec).unwrap();
            let h = 1e-5;
            let jp = dynamical_value(&propagate(&cp, &field.axpy(h, &delta)).unwrap(), &spec).unwrap();
            let jm = dynamical_value(&propagate(&cp, &field.axpy(-h, &delta)).unwrap(), &spec).unwrap();
            let fd = (jp - jm) / (2.0 * h);
            // Midpoint quadrature contributes O(Δt²) on top of the FD error.
            assert!((fd - g.inner(&delta)).abs() <= 1e-3 * fd.abs().max(1.0), "{kind}");
            let exact = landscapes::gradient(&spec, &traj.final_propagator()).unwrap().inner(&frechet_dv_exact(&traj, &delta).unwrap());
            assert!((fd - exact).abs() <= 1e-5 * fd.abs().max(1.0), "{kind}");
        }
    }

    #[test]
    fn gradient_vanishes_when_target_is_reached() {
        let cp = qubit(1.0, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let field = random_field(&cp, 1.0, &mut rng);
        let traj = propagate(&cp, &field).unwrap();
        for kind in [LandscapeKind::F, LandscapeKind::G] {
            let weight = kind.is_weighted().then(|| analyze_weight(&CMatrix::identity(2, 2), TAU_CLUSTER).unwrap());
            let spec = LandscapeSpec::new(kind, traj.final_propagator(), weight).unwrap();
            let g = dynamical_gradient(&traj, &spec).unwrap();
            assert!(g.norm() < 1e-12);
        }
    }

    #[test]
    fn too_few_slices_are_rank_deficient() {
        let cp = qubit(1.0, 3);
        let traj = propagate(&cp, &ControlField::zeros(&cp)).unwrap();
        let spec = LandscapeSpec::new(LandscapeKind::G, traj.final_propagator(), None).unwrap();
        assert!(matches!(
            dynamical_hessian_inertia(&traj, &spec, 1e-8),
            Err(Error::RankDeficient { rank: 3, required: 4 })
        ));
    }

    #[test]
    fn traceless_dipole_cannot_reach_global_phase() {
        let cp = qubit(3.0, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let traj = propagate(&cp, &random_field(&cp, 1.0, &mut rng)).unwrap();
        assert_eq!(derivative_rank(&derivative_matrix(&traj), TAU_RANK), 3);
        let cp = ControlProblem::new(pauli_z(), pauli_x::<f64>() + CMatrix::identity(2, 2) * re(0.5), 1.0, 3.0, 50).unwrap();
        let traj = propagate(&cp, &random_field(&cp, 1.0, &mut rng)).unwrap();
        assert_eq!(derivative_rank(&derivative_matrix(&traj), TAU_RANK), 4);
    }

    #[test]
    fn minimum_transfers_to_control_space() {
        let cp = ControlProblem::new(pauli_z(), pauli_x::<f64>() + CMatrix::identity(2, 2) * re(0.5), 1.0, 3.0, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let traj = propagate(&cp, &random_field(&cp, 1.0, &mut rng)).unwrap();
        let weight = analyze_weight(&CMatrix::identity(2, 2), TAU_CLUSTER).unwrap();
        let spec = LandscapeSpec::new(LandscapeKind::F, traj.final_propagator(), Some(weight)).unwrap();
        let r = dynamical_hessian_inertia(&traj, &spec, 1e-8).unwrap();
        assert_eq!(r.dynamical, Inertia::new(0, 36, 4));
        assert!(r.transfer_holds());
    }

    #[test]
    fn steering_reaches_nearby_targets() {
        let cp = ControlProblem::new(pauli_z(), pauli_x::<f64>() + CMatrix::identity(2, 2) * re(0.5), 1.0, 3.0, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let field = random_field(&cp, 1.0, &mut rng);
        let traj = propagate(&cp, &field).unwrap();
        let y = crate::matgeom::random_skew::<f64, _>(2, &mut rng) * re(1e-4);
        let delta = steer_field(&traj, &y).unwrap();
        let dv = frechet_dv(&traj, &delta).unwrap();
        assert!(hs_norm(&(dv.body() - &y)) < 1e-12);
    }
}
