//! Kinematic landscapes on U(N) and their derivatives.
//!
//! | kind | value |
//! |------|-------|
//! | `F`  | `‖(U − W)A‖² = 2‖A‖² − 2 Re Tr(AA†W†U)` |
//! | `P`  | `‖A‖⁴ − |Tr(AA†W†U)|²` |
//! | `G`  | `½‖log(U†W)‖²` (principal branch) |
//! | `GP` | `min_k ½‖log(e^{2πik/N} det(U†W)^{−1/N} U†W)‖²` |
//!
//! `F` and `P` take an arbitrary weight `A`; the geodesic kinds carry no weight.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::matgeom::{
    exp_skew, principal_log, project_to_tangent, skew_basis, TangentVector, UnitaryMatrix,
    WeightSpectrum, TAU_CUT,
};
use crate::scalar::{
    cabs, cplx, hs_inner, hs_norm, hs_norm_sq, lit, re, to_f64, trace, CMatrix, RMatrix, Real,
};

/// Default step for second-order central differences.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Default step for first-order central differences.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Bound on the trace removed from the `GP` gradient at the minimizing branch.
pub const GP_TRACE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LandscapeKind {
    /// Weighted Frobenius distance.
    F,
    /// Phase-invariant weighted overlap.
    P,
    /// Squared geodesic distance on U(N).
    G,
    /// Squared geodesic distance on PU(N).
    GP,
}

impl LandscapeKind {
    pub const ALL: [LandscapeKind; 4] = [Self::F, Self::P, Self::G, Self::GP];

    pub fn is_weighted(self) -> bool {
        matches!(self, Self::F | Self::P)
    }

    pub fn is_phase_invariant(self) -> bool {
        matches!(self, Self::P | Self::GP)
    }
}

impl fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::F => "F",
            Self::P => "P",
            Self::G => "G",
            Self::GP => "GP",
        };
        f.write_str(s)
    }
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F" => Ok(Self::F),
            "P" => Ok(Self::P),
            "G" => Ok(Self::G),
            "GP" => Ok(Self::GP),
            other => Err(Error::InvalidArgument(format!("unknown landscape kind `{other}`"))),
        }
    }
}

/// Landscape kind, target gate and (for `F`/`P`) weight spectrum.
#[derive(Clone, Debug)]
pub struct LandscapeSpec<T: Real> {
    kind: LandscapeKind,
    target: UnitaryMatrix<T>,
    weight: Option<WeightSpectrum<T>>,
    a: CMatrix<T>,
    gram: CMatrix<T>,
}

impl<T: Real> LandscapeSpec<T> {
    pub fn new(kind: LandscapeKind, target: UnitaryMatrix<T>, weight: Option<WeightSpectrum<T>>) -> Result<Self> {
        let n = target.dim();
        let gram = match (&weight, kind.is_weighted()) {
            (Some(ws), _) if ws.dim() != n => {
                return Err(Error::DimensionMismatch { expected: n, found: ws.dim() })
            }
            (Some(ws), true) => ws.weight_gram(),
            (None, true) => {
                return Err(Error::InvalidLandscape(format!("kind {kind} requires a weight matrix")))
            }
            (Some(ws), false) => {
                let gram = ws.weight_gram();
                let dev = hs_norm(&(&gram - CMatrix::<T>::identity(n, n)));
                if dev > lit(1e-10) {
                    return Err(Error::InvalidLandscape(format!(
                        "kind {kind} is defined without a weight; got AA† ≠ 𝕀 (deviation {:e})",
                        to_f64(dev)
                    )));
                }
                CMatrix::identity(n, n)
            }
            (None, false) => CMatrix::identity(n, n),
        };
        let a = match (&weight, kind.is_weighted()) {
            (Some(ws), true) => ws.a.clone(),
            _ => CMatrix::identity(n, n),
        };
        Ok(Self { kind, target, weight, a, gram })
    }

    pub fn kind(&self) -> LandscapeKind {
        self.kind
    }

    pub fn target(&self) -> &UnitaryMatrix<T> {
        &self.target
    }

    pub fn weight(&self) -> Option<&WeightSpectrum<T>> {
        self.weight.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// `AA†` (identity for the geodesic kinds).
    pub fn gram(&self) -> &CMatrix<T> {
        &self.gram
    }

    /// `A` (identity for the geodesic kinds).
    pub fn weight_matrix(&self) -> &CMatrix<T> {
        &self.a
    }

    /// `‖A‖² = Tr(AA†)`.
    pub fn weight_norm_sq(&self) -> T {
        trace(&self.gram).re
    }

    /// Natural magnitude of values and curvatures: `‖A‖²` for `F`, `‖A‖⁴`
    /// for `P`, `1` for the geodesic kinds.
    pub fn scale(&self) -> T {
        let w = self.weight_norm_sq().max(T::one());
        match self.kind {
            LandscapeKind::F => w,
            LandscapeKind::P => w * w,
            _ => T::one(),
        }
    }

    /// Same landscape with a different kind (weight kept only where allowed).
    pub fn with_kind(&self, kind: LandscapeKind) -> Result<Self> {
        let weight = if kind.is_weighted() { self.weight.clone() } else { None };
        Self::new(kind, self.target.clone(), weight)
    }

    fn check(&self, u: &UnitaryMatrix<T>) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.dim() });
        }
        Ok(())
    }

    /// `Tr(AA†W†U)`.
    fn overlap(&self, u: &UnitaryMatrix<T>) -> Complex<T> {
        trace(&(&self.gram * self.target.matrix().adjoint() * u.matrix()))
    }
}

/// Minimizing branch of the `GP` landscape.
#[derive(Clone, Debug)]
pub struct PhaseBranch<T: Real> {
    pub k: usize,
    /// Principal log of `e^{2πik/N} det(U†W)^{−1/N} U†W`.
    pub log: CMatrix<T>,
    pub value: T,
    pub near_cut: bool,
}

/// Evaluates all `N` branches and keeps the smallest value (ties to the
/// smallest `k`). `det^{−1/N}` uses the principal scalar log; another root
/// choice only relabels `k`.
pub fn phase_branch<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>) -> Result<PhaseBranch<T>> {
    spec.check(u)?;
    let n = spec.dim();
    let rel = UnitaryMatrix::new_unchecked(u.matrix().adjoint() * spec.target.matrix());
    // Shared eigenvectors: every branch is a phase multiple of U†W.
    let base = crate::matgeom::principal_log_with_cut(&rel, 0.0)?;
    let vecs = base.vectors.clone();
    let det_arg = base.phases.iter().fold(T::zero(), |acc, p| acc + *p);
    let det_arg = wrap_phase(det_arg);
    let nf = lit::<T>(n as f64);
    let two_pi = lit::<T>(2.0 * PI);
    let cut = lit::<T>(TAU_CUT);

    let mut best: Option<(usize, Vec<T>, T, bool)> = None;
    for k in 0..n {
        let shift = two_pi * lit::<T>(k as f64) / nf - det_arg / nf;
        let mut near_cut = false;
        let phases: Vec<T> = base
            .phases
            .iter()
            .map(|p| {
                let psi = wrap_phase(*p + shift);
                // |e^{iψ} + 1| ≈ π − |ψ| near the cut.
                if T::pi() - psi.abs() < cut {
                    near_cut = true;
                    T::pi()
                } else {
                    psi
                }
            })
            .collect();
        let value = phases.iter().fold(T::zero(), |acc, p| acc + *p * *p) * lit(0.5);
        if best.as_ref().is_none_or(|b| value < b.2) {
            best = Some((k, phases, value, near_cut));
        }
    }
    let (k, phases, value, near_cut) = best.expect("n >= 1 branches");
    let diag = CMatrix::<T>::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        phases.iter().map(|p| cplx(T::zero(), *p)),
    ));
    let log = &vecs * diag * vecs.adjoint();
    let log = crate::scalar::skew_part(&log);
    Ok(PhaseBranch { k, log, value, near_cut })
}

/// Reduces a phase to `(−π, π]`.
fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::two_pi();
    let mut y = x - two_pi * ((x + T::pi()) / two_pi).floor();
    // y ∈ [−π, π); move −π to +π.
    if y <= -T::pi() {
        y += two_pi;
    }
    y
}

/// Landscape value at `U`.
pub fn value<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>) -> Result<T> {
    spec.check(u)?;
    Ok(match spec.kind {
        // Both weighted kinds are evaluated as norms of residuals so that
        // small values keep full relative accuracy.
        LandscapeKind::F => hs_norm_sq(&((u.matrix() - spec.target.matrix()) * spec.weight_matrix())),
        LandscapeKind::P => {
            let w = spec.weight_norm_sq();
            let t = spec.overlap(u);
            let modulus = cabs(t);
            if modulus == T::zero() {
                w * w
            } else {
                let aligned = spec.target.matrix() * (t / re(modulus));
                let gap = hs_norm_sq(&((u.matrix() - aligned) * spec.weight_matrix())) * lit(0.5);
                gap * (w + modulus)
            }
        }
        LandscapeKind::G => {
            let rel = UnitaryMatrix::new_unchecked(u.matrix().adjoint() * spec.target.matrix());
            hs_norm_sq(&principal_log(&rel)?.log) * lit(0.5)
        }
        LandscapeKind::GP => phase_branch(spec, u)?.value,
    })
}

/// Whether `U†W` has an eigenvalue within `τ_cut` of `−1` (geodesic kinds
/// only; for `GP` this refers to the minimizing branch).
pub fn near_cut_locus<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>) -> Result<bool> {
    spec.check(u)?;
    match spec.kind {
        LandscapeKind::G => {
            let rel = UnitaryMatrix::new_unchecked(u.matrix().adjoint() * spec.target.matrix());
            Ok(principal_log(&rel)?.near_cut)
        }
        LandscapeKind::GP => Ok(phase_branch(spec, u)?.near_cut),
        _ => Ok(false),
    }
}

/// Riemannian gradient at `U`.
pub fn gradient<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>) -> Result<TangentVector<T>> {
    spec.check(u)?;
    let um = u.matrix();
    let w = spec.target.matrix();
    let g = &spec.gram;
    let entries = match spec.kind {
        LandscapeKind::F => um * g * w.adjoint() * um - w * g,
        LandscapeKind::P => {
            let t = spec.overlap(u);
            (um * g * w.adjoint() * um) * t.conj() - (w * g) * t
        }
        LandscapeKind::G => {
            let rel = UnitaryMatrix::new_unchecked(um.adjoint() * w);
            -(um * principal_log(&rel)?.log)
        }
        LandscapeKind::GP => {
            let branch = phase_branch(spec, u)?;
            let n = spec.dim();
            let shift = trace(&branch.log) / re(lit::<T>(n as f64));
            let removed = cabs(shift) * lit::<T>(n as f64).sqrt();
            if removed > lit(GP_TRACE_TOL) && !branch.near_cut {
                return Err(Error::Numerical(format!(
                    "GP branch {} has non-vanishing trace (norm {:e})",
                    branch.k,
                    to_f64(removed)
                )));
            }
            let traceless = branch.log - CMatrix::<T>::identity(n, n) * shift;
            -(um * traceless)
        }
    };
    Ok(TangentVector::new_unchecked(u.clone(), entries))
}

/// Covariant Hessian `∇_{δU} grad J` for kinds `F` and `P`, obtained by
/// projecting the Euclidean derivative of the gradient field (extended to all
/// of `C^{N×N}`) onto the tangent space. Valid at any `U`.
pub fn hessian_apply<T: Real>(
    spec: &LandscapeSpec<T>,
    u: &UnitaryMatrix<T>,
    du: &TangentVector<T>,
) -> Result<TangentVector<T>> {
    spec.check(u)?;
    if du.matrix().nrows() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: du.matrix().nrows() });
    }
    let body = u.matrix().adjoint() * du.matrix();
    let residual = crate::scalar::skew_residual(&body);
    if residual > crate::scalar::check_tol::<T>(crate::matgeom::EPS_UNITARY) * T::one().max(hs_norm(&body)) {
        return Err(Error::NotTangent(to_f64(residual)));
    }
    let um = u.matrix();
    let w = spec.target.matrix();
    let g = &spec.gram;
    let d = du.matrix();
    let euclidean = match spec.kind {
        LandscapeKind::F => d * g * w.adjoint() * um + um * g * w.adjoint() * d,
        LandscapeKind::P => {
            let t = spec.overlap(u);
            let dt = trace(&(g * w.adjoint() * d));
            let m = g * w.adjoint();
            (um * &m * um) * dt.conj() + (d * &m * um + um * &m * d) * t.conj() - (w * g) * dt
        }
        kind => {
            return Err(Error::Unsupported(format!(
                "no closed-form Hessian for kind {kind}; use hessian_matrix"
            )))
        }
    };
    project_to_tangent(u, &euclidean)
}

/// Matrix of [`hessian_apply`] in the orthonormal tangent basis `{U·Ω_a}`.
pub fn hessian_operator_matrix<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>) -> Result<RMatrix<T>> {
    let n = spec.dim();
    let basis: Vec<TangentVector<T>> = skew_basis::<T>(n)
        .iter()
        .map(|y| TangentVector::new_unchecked(u.clone(), u.matrix() * y))
        .collect();
    let dim = basis.len();
    let mut out = RMatrix::<T>::zeros(dim, dim);
    for (b, tb) in basis.iter().enumerate() {
        let h = hessian_apply(spec, u, tb)?;
        for (a, ta) in basis.iter().enumerate() {
            out[(a, b)] = ta.inner(&h);
        }
    }
    Ok(out)
}

/// Numerical Hessian quadratic form in the basis `{U·Ω_a}` from second central
/// differences of `s ↦ J(U·exp(sY))`, with polarization for off-diagonal
/// entries.
pub fn hessian_matrix<T: Real>(spec: &LandscapeSpec<T>, u: &UnitaryMatrix<T>, h: f64) -> Result<RMatrix<T>> {
    if !(1e-7..=1e-2).contains(&h) {
        return Err(Error::StepSize(h));
    }
    spec.check(u)?;
    let n = spec.dim();
    let basis = skew_basis::<T>(n);
    let dim = basis.len();
    let hs = lit::<T>(h);
    let along = |y: &CMatrix<T>| -> Result<T> {
        let step = exp_skew(&(y * re(hs)))?;
        value(spec, &u.compose(&step))
    };
    let center = value(spec, u)?;
    let h2 = hs * hs;
    let mut out = RMatrix::<T>::zeros(dim, dim);
    for a in 0..dim {
        let plus = along(&basis[a])?;
        let minus = along(&(-&basis[a]))?;
        out[(a, a)] = (plus + minus - center * lit(2.0)) / h2;
        for b in (a + 1)..dim {
            let sum = &basis[a] + &basis[b];
            let diff = &basis[a] - &basis[b];
            let q = along(&sum)? + along(&(-&sum))? - along(&diff)? - along(&(-&diff))?;
            let entry = q / (h2 * lit(4.0));
            out[(a, b)] = entry;
            out[(b, a)] = entry;
        }
    }
    Ok(out)
}

/// Eigenvalues (ascending) of a real symmetric matrix.
pub fn symmetric_eigenvalues<T: Real>(m: &RMatrix<T>) -> Vec<T> {
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let mut vals: Vec<T> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    vals
}

/// `‖(Ad(U) − Ad(W))∘B‖²_HS` with `B(Ω) = AΩA†`, summed explicitly over the
/// orthonormal basis of `u(N)`. Equals `2·J_P(U)`.
pub fn adjoint_rep_value<T: Real>(a: &CMatrix<T>, w: &UnitaryMatrix<T>, u: &UnitaryMatrix<T>) -> Result<T> {
    let n = w.dim();
    if u.dim() != n || a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.dim().max(a.nrows()) });
    }
    let rel = w.matrix().adjoint() * u.matrix();
    let mut self_term = T::zero();
    let mut cross = T::zero();
    for omega in skew_basis::<T>(n) {
        let b = a * omega * a.adjoint();
        let ad = &rel * &b * rel.adjoint();
        self_term += hs_inner(&b, &b);
        cross += hs_inner(&b, &ad);
    }
    Ok((self_term - cross) * lit(2.0))
}
