//! Geometry of the unitary group U(N).
//!
//! Tangent vectors at `U` are matrices `δU` with `U†δU` skew-Hermitian. The
//! metric is the real Hilbert-Schmidt inner product `⟨X, Y⟩ = Re Tr(X†Y)`,
//! which is bi-invariant, so geodesics through `U` are `s ↦ U·exp(sY)`.

mod spectrum;

pub use spectrum::{analyze_weight, analyze_weight_default, WeightSpectrum};

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{check_tol, 
    cabs, cimag, cis, cplx, hermitian_part, hs_inner, hs_norm, lit, re, skew_residual, to_f64,
    CMatrix, Real,
};

/// Default unitarity / tangency tolerance.
pub const EPS_UNITARY: f64 = 1e-10;
/// Default accuracy target of `exp(log V) = V`.
pub const EPS_LOG: f64 = 1e-10;
/// Distance of an eigenvalue from `−1` below which the cut-locus flag is raised.
pub const TAU_CUT: f64 = 1e-8;
/// Default relative gap used to cluster eigenvalues of `AA†`.
pub const TAU_CLUSTER: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// A point of U(N).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix<T: Real> {
    entries: CMatrix<T>,
}

impl<T: Real> UnitaryMatrix<T> {
    /// Validates `‖U†U − 𝕀‖ ≤ 1e-10`.
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        Self::with_tolerance(entries, EPS_UNITARY)
    }

    pub fn with_tolerance(entries: CMatrix<T>, tol: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare(entries.nrows(), entries.ncols()));
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let residual = unitarity_residual(&entries);
        if !(residual <= check_tol(tol)) {
            return Err(Error::NotUnitary(to_f64(residual)));
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix the caller knows to be unitary (e.g. a product of
    /// validated factors).
    pub fn new_unchecked(entries: CMatrix<T>) -> Self {
        Self { entries }
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: CMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint() }
    }

    /// Group product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { entries: &self.entries * &other.entries }
    }

    /// `e^{iφ} U`.
    pub fn with_phase(&self, phi: T) -> Self {
        Self { entries: &self.entries * cis(phi) }
    }

    pub fn unitarity_residual(&self) -> T {
        unitarity_residual(&self.entries)
    }

    /// Polar projection back onto U(N): `U ← U(U†U)^{−1/2}`, computed from the SVD
    /// `U = PΣQ†` as `PQ†`.
    pub fn reunitarize(&self) -> Self {
        Self { entries: polar_unitary(&self.entries) }
    }

    /// Re-projects only when the residual exceeds `tol`.
    pub fn reunitarize_if_needed(self, tol: f64) -> Self {
        if self.unitarity_residual() > lit(tol) {
            self.reunitarize()
        } else {
            self
        }
    }

    /// Haar-distributed unitary from a QR of a complex Gaussian matrix.
    pub fn haar_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { entries: haar_unitary(n, rng) }
    }
}

fn unitarity_residual<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.nrows();
    hs_norm(&(m.adjoint() * m - CMatrix::<T>::identity(n, n)))
}

/// Unitary polar factor of a square matrix.
pub fn polar_unitary<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    u * v_t
}

/// Standard complex Gaussian matrix (real and imaginary parts of variance 1/2).
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        cplx(lit(a * scale), lit(b * scale))
    })
}

/// Square complex Gaussian matrix drawn from a ChaCha8 stream seeded with `seed`.
pub fn seeded_complex_gaussian<T: Real>(n: usize, seed: u64) -> CMatrix<T> {
    use rand::SeedableRng;
    complex_gaussian(n, n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}

/// Haar unitary of size `n` (empty matrix for `n = 0`).
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let g = complex_gaussian::<T, R>(n, n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix the phases of R's diagonal so the distribution is Haar.
    for j in 0..n {
        let d = r[(j, j)];
        let mag = cabs(d);
        if mag > T::zero() {
            let phase = d / re(mag);
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

/// A tangent vector `δU ∈ T_U U(N)`.
#[derive(Clone, Debug)]
pub struct TangentVector<T: Real> {
    base: UnitaryMatrix<T>,
    entries: CMatrix<T>,
}

impl<T: Real> TangentVector<T> {
    /// Validates that `U†δU` is skew-Hermitian within `1e-10·max(1, ‖δU‖)`.
    pub fn new(base: UnitaryMatrix<T>, entries: CMatrix<T>) -> Result<Self> {
        check_dims(base.dim(), &entries)?;
        let residual = tangency_residual(&base, &entries);
        let scale = T::one().max(hs_norm(&entries));
        if !(residual <= check_tol::<T>(EPS_UNITARY) * scale) {
            return Err(Error::NotTangent(to_f64(residual)));
        }
        Ok(Self { base, entries })
    }

    pub fn new_unchecked(base: UnitaryMatrix<T>, entries: CMatrix<T>) -> Self {
        Self { base, entries }
    }

    pub fn zero(base: UnitaryMatrix<T>) -> Self {
        let n = base.dim();
        Self { base, entries: CMatrix::zeros(n, n) }
    }

    /// `δU = U·Y` for skew-Hermitian `Y`.
    pub fn from_body(base: UnitaryMatrix<T>, body: &CMatrix<T>) -> Result<Self> {
        check_dims(base.dim(), body)?;
        let entries = base.matrix() * body;
        Self::new(base, entries)
    }

    pub fn base(&self) -> &UnitaryMatrix<T> {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.entries
    }

    /// Left-trivialized coordinate `U†δU ∈ u(N)`.
    pub fn body(&self) -> CMatrix<T> {
        self.base.matrix().adjoint() * &self.entries
    }

    pub fn norm(&self) -> T {
        hs_norm(&self.entries)
    }

    pub fn inner(&self, other: &Self) -> T {
        hs_inner(&self.entries, &other.entries)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { base: self.base.clone(), entries: &self.entries * re(s) }
    }
}

fn check_dims<T: Real>(n: usize, m: &CMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
    }
    Ok(())
}

fn tangency_residual<T: Real>(base: &UnitaryMatrix<T>, m: &CMatrix<T>) -> T {
    skew_residual(&(base.matrix().adjoint() * m))
}

/// Orthogonal projection onto `T_U U(N)`: `(M − U M† U)/2`.
pub fn project_to_tangent<T: Real>(u: &UnitaryMatrix<T>, m: &CMatrix<T>) -> Result<TangentVector<T>> {
    check_dims(u.dim(), m)?;
    let um = u.matrix();
    let p = (m - um * m.adjoint() * um) * re(lit::<T>(0.5));
    Ok(TangentVector { base: u.clone(), entries: p })
}

/// Result of [`principal_log`].
#[derive(Clone, Debug)]
pub struct PrincipalLog<T: Real> {
    /// Skew-Hermitian logarithm with spectrum in `(−iπ, iπ]`.
    pub log: CMatrix<T>,
    /// Eigenphases `θ_k ∈ (−π, π]` of the input.
    pub phases: Vec<T>,
    /// Set when some eigenvalue lies within `τ_cut` of `−1`.
    pub near_cut: bool,
    /// Unitary eigenbasis, columns in the order of `phases`.
    pub vectors: CMatrix<T>,
}

/// Principal logarithm of a unitary matrix via its unitary eigendecomposition.
/// An eigenvalue within [`TAU_CUT`] of `−1` is assigned the phase `+π` and
/// raises `near_cut`.
pub fn principal_log<T: Real>(v: &UnitaryMatrix<T>) -> Result<PrincipalLog<T>> {
    principal_log_with_cut(v, TAU_CUT)
}

pub fn principal_log_with_cut<T: Real>(v: &UnitaryMatrix<T>, tau_cut: f64) -> Result<PrincipalLog<T>> {
    let n = v.dim();
    let (values, q) = unitary_eigen(v)?;
    let mut phases = Vec::with_capacity(n);
    let mut near_cut = false;
    let mut diag = CMatrix::<T>::zeros(n, n);
    for (k, z) in values.iter().enumerate() {
        let theta = if cabs(*z + Complex::new(T::one(), T::zero())) < lit(tau_cut) {
            near_cut = true;
            T::pi()
        } else {
            z.im.atan2(z.re)
        };
        phases.push(theta);
        diag[(k, k)] = cplx(T::zero(), theta);
    }
    let log = &q * diag * q.adjoint();
    let log = (&log - log.adjoint()) * re(lit::<T>(0.5));
    Ok(PrincipalLog { log, phases, near_cut, vectors: q })
}

/// Eigenvalues and a unitary eigenbasis of a unitary matrix.
///
/// Uses the complex Schur form; when that iteration stalls (it can on
/// matrices numerically equal to a multiple of the identity) the basis is taken
/// from the Hermitian pencil `Re V + α·Im V` for a few fixed `α`, accepted
/// once `Q†VQ` is diagonal to working accuracy.
pub fn unitary_eigen<T: Real>(v: &UnitaryMatrix<T>) -> Result<(Vec<Complex<T>>, CMatrix<T>)> {
    let n = v.dim();
    if let Some(schur) = Schur::try_new(v.matrix().clone(), T::default_epsilon(), SCHUR_MAX_ITER) {
        let (q, t) = schur.unpack();
        let values = (0..n).map(|k| t[(k, k)]).collect();
        return Ok((values, q));
    }
    let m = v.matrix();
    let real_part = hermitian_part(m);
    let imag_part = hermitian_part(&((m - m.adjoint()) * cplx(T::zero(), lit::<T>(-0.5))));
    let tol = lit::<T>(1e-12) * lit::<T>(n as f64);
    for alpha in [0.0, 0.414_213_562, -1.732_050_808, 2.236_067_977, -0.577_215_665] {
        let pencil = &real_part + &imag_part * re(lit::<T>(alpha));
        let (_, q) = hermitian_eigen(&pencil)?;
        let d = q.adjoint() * m * &q;
        let mut off = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += d[(i, j)].norm_sqr();
                }
            }
        }
        if off.sqrt() <= tol {
            let values = (0..n)
                .map(|k| {
                    let z = d[(k, k)];
                    z / re(cabs(z))
                })
                .collect();
            return Ok((values, q));
        }
    }
    Err(Error::EigenFailure("unitary eigendecomposition did not converge".into()))
}

/// Eigenphases of a unitary matrix in `(−π, π]` (no cut handling).
pub fn eigenphases<T: Real>(v: &UnitaryMatrix<T>) -> Result<Vec<T>> {
    Ok(principal_log_with_cut(v, 0.0)?.phases)
}

/// Matrix exponential of a skew-Hermitian matrix, computed from the
/// eigendecomposition of the Hermitian matrix `iY`.
pub fn exp_skew<T: Real>(y: &CMatrix<T>) -> Result<UnitaryMatrix<T>> {
    if y.nrows() != y.ncols() {
        return Err(Error::NotSquare(y.nrows(), y.ncols()));
    }
    let residual = skew_residual(y);
    if !(residual <= check_tol::<T>(EPS_UNITARY) * T::one().max(hs_norm(y))) {
        return Err(Error::NotSkewHermitian(to_f64(residual)));
    }
    let h = hermitian_part(&(y * cimag::<T>()));
    Ok(UnitaryMatrix { entries: exp_minus_i_hermitian(&h, T::one())? })
}

/// `exp(−i·t·H)` for Hermitian `H`.
pub fn exp_minus_i_hermitian<T: Real>(h: &CMatrix<T>, t: T) -> Result<CMatrix<T>> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut phased = vecs.clone();
    for j in 0..n {
        let f = cis(-(vals[j] * t));
        let mut col = phased.column_mut(j);
        col *= f;
    }
    Ok(phased * vecs.adjoint())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// nonincreasing order (columns of the returned matrix follow that order).
pub fn hermitian_eigen<T: Real>(h: &CMatrix<T>) -> Result<(Vec<T>, CMatrix<T>)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let sym = hermitian_part(h);
    let eig = SymmetricEigen::try_new(sym, T::default_epsilon(), 0)
        .ok_or_else(|| Error::EigenFailure("Hermitian eigen-solver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

/// Geodesic retraction `U·exp(s·U†δU)`.
pub fn retract<T: Real>(u: &UnitaryMatrix<T>, du: &TangentVector<T>, s: T) -> Result<UnitaryMatrix<T>> {
    check_dims(u.dim(), du.matrix())?;
    let body = u.matrix().adjoint() * du.matrix();
    let residual = skew_residual(&body);
    if !(residual <= check_tol::<T>(EPS_UNITARY) * T::one().max(hs_norm(&body))) {
        return Err(Error::NotTangent(to_f64(residual)));
    }
    if s == T::zero() {
        return Ok(u.clone());
    }
    let step = exp_skew(&crate::scalar::skew_part(&(body * re(s))))?;
    Ok(u.compose(&step))
}

/// Orthonormal basis of `u(N)` under the real Hilbert-Schmidt product:
/// `i|p⟩⟨p|`, then for each `p < q` the pair `(i/√2)(|p⟩⟨q| + |q⟩⟨p|)` and
/// `(1/√2)(|p⟩⟨q| − |q⟩⟨p|)`.
pub fn skew_basis<T: Real>(n: usize) -> Vec<CMatrix<T>> {
    let mut basis = Vec::with_capacity(n * n);
    let h = lit::<T>(std::f64::consts::FRAC_1_SQRT_2);
    for p in 0..n {
        let mut e = CMatrix::zeros(n, n);
        e[(p, p)] = cimag();
        basis.push(e);
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let mut sym = CMatrix::zeros(n, n);
            sym[(p, q)] = cplx(T::zero(), h);
            sym[(q, p)] = cplx(T::zero(), h);
            basis.push(sym);
            let mut anti = CMatrix::zeros(n, n);
            anti[(p, q)] = cplx(h, T::zero());
            anti[(q, p)] = cplx(-h, T::zero());
            basis.push(anti);
        }
    }
    basis
}

/// Coordinates of a skew-Hermitian matrix in [`skew_basis`].
pub fn skew_coordinates<T: Real>(y: &CMatrix<T>, basis: &[CMatrix<T>]) -> Vec<T> {
    basis.iter().map(|b| hs_inner(b, y)).collect()
}

/// Random skew-Hermitian matrix with unit Hilbert-Schmidt norm.
pub fn random_skew<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    let g = complex_gaussian::<T, R>(n, n, rng);
    let y = crate::scalar::skew_part(&g);
    let norm = hs_norm(&y);
    if norm > T::zero() {
        y * re(T::one() / norm)
    } else {
        y
    }
}

/// Random unit tangent vector at `u`.
pub fn random_tangent<T: Real, R: Rng + ?Sized>(u: &UnitaryMatrix<T>, rng: &mut R) -> TangentVector<T> {
    let y = random_skew::<T, R>(u.dim(), rng);
    TangentVector::new_unchecked(u.clone(), u.matrix() * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn diag(entries: &[Complex<f64>]) -> CMatrix<f64> {
        CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
    }

    #[test]
    fn projector_is_idempotent_on_tangents() {
        let mut r = rng();
        let u = UnitaryMatrix::<f64>::haar_random(4, &mut r);
        let t = random_tangent(&u, &mut r);
        let p = project_to_tangent(&u, t.matrix()).unwrap();
        assert!(hs_norm(&(p.matrix() - t.matrix())) < 1e-12);
    }

    #[test]
    fn hermitian_matrix_projects_to_zero_at_identity() {
        let mut r = rng();
        let g = complex_gaussian::<f64, _>(3, 3, &mut r);
        let h = hermitian_part(&g);
        let p = project_to_tangent(&UnitaryMatrix::identity(3), &h).unwrap();
        assert!(p.norm() < 1e-14);
    }

    #[test]
    fn projection_residual_is_orthogonal_to_tangent_space() {
        let mut r = rng();
        let u = UnitaryMatrix::<f64>::haar_random(3, &mut r);
        let m = complex_gaussian::<f64, _>(3, 3, &mut r);
        let p = project_to_tangent(&u, &m).unwrap();
        let normal = &m - p.matrix();
        for _ in 0..20 {
            let t = random_tangent(&u, &mut r);
            assert!(hs_inner(&normal, t.matrix()).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_rejects_dimension_mismatch() {
        let u = UnitaryMatrix::<f64>::identity(2);
        let m = CMatrix::<f64>::zeros(3, 3);
        assert!(matches!(project_to_tangent(&u, &m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = principal_log(&UnitaryMatrix::<f64>::identity(3)).unwrap();
        assert!(hs_norm(&l.log) < 1e-14);
        assert!(!l.near_cut);
    }

    #[test]
    fn log_of_diagonal_phases() {
        let v = diag(&[cis(PI / 2.0), cis(-PI / 3.0)]);
        let l = principal_log(&UnitaryMatrix::new(v).unwrap()).unwrap();
        let expected = diag(&[cplx(0.0, PI / 2.0), cplx(0.0, -PI / 3.0)]);
        assert!(hs_norm(&(l.log - expected)) < 1e-12);
    }

    #[test]
    fn log_at_minus_one_takes_plus_i_pi() {
        // −1 with a tiny negative imaginary part would otherwise map to −iπ.
        let v = diag(&[cplx(-1.0, -1e-12), cplx(1.0, 0.0)]);
        let l = principal_log(&UnitaryMatrix::with_tolerance(v, 1e-9).unwrap()).unwrap();
        assert!(l.near_cut);
        assert!((l.log[(0, 0)].im - PI).abs() < 1e-12);
    }

    #[test]
    fn exp_of_zero_and_scalar() {
        let e = exp_skew(&CMatrix::<f64>::zeros(3, 3)).unwrap();
        assert!(hs_norm(&(e.matrix() - CMatrix::identity(3, 3))) < 1e-15);
        let theta = 0.7;
        let e = exp_skew(&diag(&[cplx(0.0, theta)])).unwrap();
        assert!((e.matrix()[(0, 0)] - cis(theta)).norm() < 1e-15);
    }

    #[test]
    fn exp_is_unitary_and_inverts_log() {
        let mut r = rng();
        for _ in 0..10 {
            let y = random_skew::<f64, _>(4, &mut r) * re(3.0);
            let e = exp_skew(&y).unwrap();
            assert!(e.unitarity_residual() < 1e-12);
            let v = UnitaryMatrix::<f64>::haar_random(4, &mut r);
            let back = exp_skew(&principal_log(&v).unwrap().log).unwrap();
            assert!(hs_norm(&(back.matrix() - v.matrix())) < 1e-10);
        }
    }

    #[test]
    fn exp_rejects_non_skew_input() {
        let m = CMatrix::<f64>::identity(2, 2);
        assert!(matches!(exp_skew(&m), Err(Error::NotSkewHermitian(_))));
    }

    #[test]
    fn log_norm_matches_eigenphases() {
        let mut r = rng();
        let v = UnitaryMatrix::<f64>::haar_random(5, &mut r);
        let l = principal_log(&v).unwrap();
        let from_phases: f64 = l.phases.iter().map(|t| t * t).sum();
        assert!((crate::scalar::hs_norm_sq(&l.log) - from_phases).abs() < 1e-12);
    }

    #[test]
    fn retract_zero_step_and_scalar_half_turn() {
        let mut r = rng();
        let u = UnitaryMatrix::<f64>::haar_random(3, &mut r);
        let t = random_tangent(&u, &mut r);
        assert_eq!(retract(&u, &t, 0.0).unwrap(), u);

        let one = UnitaryMatrix::<f64>::identity(1);
        let t = TangentVector::new(one.clone(), diag(&[cplx(0.0, PI)])).unwrap();
        let v = retract(&one, &t, 1.0).unwrap();
        assert!((v.matrix()[(0, 0)] - cplx(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn retract_derivative_matches_tangent() {
        let mut r = rng();
        let u = UnitaryMatrix::<f64>::haar_random(3, &mut r);
        let t = random_tangent(&u, &mut r);
        let fd = |h: f64| {
            let p = retract(&u, &t, h).unwrap();
            let m = retract(&u, &t, -h).unwrap();
            hs_norm(&((p.matrix() - m.matrix()) * re(1.0 / (2.0 * h)) - t.matrix()))
        };
        let e1 = fd(1e-2);
        let e2 = fd(5e-3);
        assert!(e1 < 1e-4);
        // Central differences are second order.
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn retract_rejects_non_tangent_direction() {
        let u = UnitaryMatrix::<f64>::identity(2);
        let bad = TangentVector::new_unchecked(u.clone(), CMatrix::identity(2, 2));
        assert!(matches!(retract(&u, &bad, 1.0), Err(Error::NotTangent(_))));
    }

    #[test]
    fn reunitarize_restores_unitarity() {
        let mut r = rng();
        let u = UnitaryMatrix::<f64>::haar_random(3, &mut r);
        let noise = complex_gaussian::<f64, _>(3, 3, &mut r) * re(1e-6);
        let drifted = UnitaryMatrix::new_unchecked(u.matrix() + noise);
        assert!(drifted.unitarity_residual() > 1e-8);
        let fixed = drifted.reunitarize_if_needed(EPS_UNITARY);
        assert!(fixed.unitarity_residual() < 1e-13);
        assert!(hs_norm(&(fixed.matrix() - u.matrix())) < 1e-5);
    }

    #[test]
    fn skew_basis_is_orthonormal() {
        let b = skew_basis::<f64>(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            assert!(skew_residual(x) < 1e-15);
            for (j, y) in b.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((hs_inner(x, y) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unitary_constructor_rejects_non_unitary() {
        let m = CMatrix::<f64>::identity(2, 2) * re(2.0);
        assert!(matches!(UnitaryMatrix::new(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn works_in_single_precision() {
        let mut r = rng();
        let y = random_skew::<f32, _>(3, &mut r);
        let e = exp_skew(&y).unwrap();
        assert!(e.unitarity_residual() < 1e-5);
    }

    #[test]
    fn eigenbasis_of_near_scalar_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for phase in [0.0, 1.0, -2.5] {
            let noise = random_skew::<f64, _>(3, &mut rng) * re(1e-15);
            let v = exp_skew(&noise).unwrap().with_phase(phase);
            let (values, q) = unitary_eigen(&v).unwrap();
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(values));
            assert!(hs_norm(&(&q * d * q.adjoint() - v.matrix())) < 1e-12);
        }
    }
}
