//! Critical strata of `J_F` and `J_P`: enumeration, closed-form inertia and
//! Hessian spectra, sample points and Morse-Bott verification.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::landscapes::{self, symmetric_eigenvalues, LandscapeKind, LandscapeSpec, HESSIAN_STEP};
use crate::matgeom::{haar_unitary, UnitaryMatrix, WeightSpectrum};
use crate::scalar::{cis, cplx, lit, to_f64, CMatrix, Real};

/// Gradient-norm bound for sample points (relative to [`LandscapeSpec::scale`]).
pub const TAU_CRIT: f64 = 1e-9;
/// Orthogonality tolerance for `Ω²` against a signature matrix.
pub const TAU_ORTH: f64 = 1e-10;
/// Null-eigenvalue threshold (relative to [`LandscapeSpec::scale`]).
pub const TAU_NULL_REL: f64 = 1e-6;
/// Relative distance kept from the poles when bracketing secular roots.
pub const SECULAR_MARGIN: f64 = 1e-12;
/// Required separation between `τ_null` and the smallest nonzero curvature.
pub const NULL_SEPARATION: f64 = 100.0;

/// Number of `−1` entries of `Λ` in each nonzero weight cluster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StratumSignature {
    nu: Vec<usize>,
}

impl StratumSignature {
    pub fn new<T: Real>(nu: Vec<usize>, ws: &WeightSpectrum<T>) -> Result<Self> {
        if nu.len() != ws.kappa {
            return Err(Error::InvalidSignature(format!(
                "expected {} entries, got {}",
                ws.kappa,
                nu.len()
            )));
        }
        if let Some((i, (&v, &n))) = nu.iter().zip(&ws.mult).enumerate().find(|(_, (v, n))| v > n) {
            return Err(Error::InvalidSignature(format!("nu[{i}] = {v} exceeds multiplicity {n}")));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> &[usize] {
        &self.nu
    }

    /// All `∏(nᵢ+1)` signatures, first cluster varying slowest.
    pub fn all<T: Real>(ws: &WeightSpectrum<T>) -> Vec<Self> {
        let mut out = vec![Vec::with_capacity(ws.kappa)];
        for &m in &ws.mult {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=m).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|nu| Self { nu }).collect()
    }
}

impl fmt::Display for StratumSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('(')?;
        for (i, v) in self.nu.iter().enumerate() {
            if i > 0 {
                f.write_char(',')?;
            }
            write!(f, "{v}")?;
        }
        f.write_char(')')
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StratumClass {
    GlobalMin,
    GlobalMax,
    Saddle,
    LocalMax,
}

impl fmt::Display for StratumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GlobalMin => "globalMin",
            Self::GlobalMax => "globalMax",
            Self::Saddle => "saddle",
            Self::LocalMax => "localMax",
        })
    }
}

/// `(N₋, N₀, N₊)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Inertia {
    pub fn new(negative: usize, zero: usize, positive: usize) -> Self {
        Self { negative, zero, positive }
    }

    pub fn total(&self) -> usize {
        self.negative + self.zero + self.positive
    }

    /// Counts eigenvalues below `−tol`, within `±tol` and above `tol`.
    pub fn count<T: Real>(values: &[T], tol: T) -> Self {
        let negative = values.iter().filter(|v| **v < -tol).count();
        let positive = values.iter().filter(|v| **v > tol).count();
        Self { negative, zero: values.len() - negative - positive, positive }
    }
}

impl fmt::Display for Inertia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.negative, self.zero, self.positive)
    }
}

#[derive(Clone, Debug)]
pub struct CriticalStratum<T: Real> {
    pub signature: StratumSignature,
    pub kind: LandscapeKind,
    pub critical_value: T,
    pub dimension: usize,
    pub inertia: Inertia,
    pub class: StratumClass,
    /// `‖A‖²` of the weight the stratum belongs to.
    pub weight_norm_sq: T,
}

/// Level set `{Tr(AA†W†U) = 0}` where `J_P` attains `‖A‖⁴`.
#[derive(Clone, Debug)]
pub struct GlobalMaxDescriptor<T: Real> {
    pub value: T,
    pub codimension: usize,
    pub nondegenerate: bool,
    pub class: StratumClass,
}

#[derive(Clone, Debug)]
pub struct StrataCensus<T: Real> {
    pub kind: LandscapeKind,
    pub dim: usize,
    pub strata: Vec<CriticalStratum<T>>,
    pub global_max: Option<GlobalMaxDescriptor<T>>,
}

fn require_weighted(kind: LandscapeKind) -> Result<()> {
    if kind.is_weighted() {
        Ok(())
    } else {
        Err(Error::InvalidLandscape(format!("critical strata are tabulated for F and P only, not {kind}")))
    }
}

/// `Σνᵢω̃ᵢ²` and `Σ(nᵢ−νᵢ)ω̃ᵢ²`.
fn split_weights<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> (T, T) {
    let mut flipped = T::zero();
    let mut kept = T::zero();
    for ((&v, &n), &w) in sig.nu.iter().zip(&ws.mult).zip(&ws.distinct) {
        flipped += lit::<T>(v as f64) * w;
        kept += lit::<T>((n - v) as f64) * w;
    }
    (flipped, kept)
}

/// `Tr(Ω²Λ̂) = Σ(nᵢ−2νᵢ)ω̃ᵢ²`.
pub fn signature_trace<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> T {
    let (flipped, kept) = split_weights(ws, sig);
    kept - flipped
}

fn orth_tolerance<T: Real>(ws: &WeightSpectrum<T>) -> T {
    lit::<T>(TAU_ORTH) * ws.norm_sq().max(T::one())
}

fn admissible_for_phase<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> bool {
    signature_trace(ws, sig) > orth_tolerance(ws)
}

fn internal_dimension<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> usize {
    let mixed: usize = sig.nu.iter().zip(&ws.mult).map(|(&v, &n)| v * (n - v)).sum();
    ws.null_mult * ws.null_mult + 2 * mixed
}

pub fn critical_value<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature, kind: LandscapeKind) -> Result<T> {
    require_weighted(kind)?;
    let (flipped, kept) = split_weights(ws, sig);
    Ok(match kind {
        LandscapeKind::F => flipped * lit(4.0),
        _ => flipped * kept * lit(4.0),
    })
}

pub fn stratum_dimension<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature, kind: LandscapeKind) -> Result<usize> {
    require_weighted(kind)?;
    let base = internal_dimension(ws, sig);
    Ok(if kind == LandscapeKind::P { base + 1 } else { base })
}

/// Closed-form Hessian inertia at a stratum.
///
/// Clusters are ordered by decreasing weight. A flipped direction in a heavier
/// cluster paired with an unflipped one in a lighter cluster curves downward;
/// the opposite pairing curves upward.
pub fn stratum_inertia<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature, kind: LandscapeKind) -> Result<Inertia> {
    require_weighted(kind)?;
    if kind == LandscapeKind::P && !admissible_for_phase(ws, sig) {
        return Err(Error::InvalidSignature(format!(
            "signature {sig} violates Tr(Ω²Λ) > 0 (trace {:e})",
            to_f64(signature_trace(ws, sig))
        )));
    }
    let n = ws.dim();
    let n0 = ws.null_mult;
    let nu = &sig.nu;
    let mult = &ws.mult;
    let s: usize = nu.iter().sum();
    let rest = n - n0 - s;
    let mut cross_neg = 0;
    let mut cross_pos = 0;
    for k in 0..nu.len() {
        for l in (k + 1)..nu.len() {
            cross_neg += nu[k] * (mult[l] - nu[l]);
            cross_pos += (mult[k] - nu[k]) * nu[l];
        }
    }
    let negative = s * s + 2 * cross_neg + 2 * n0 * s;
    let positive = rest * rest + 2 * n0 * rest + 2 * cross_pos;
    Ok(match kind {
        LandscapeKind::F => Inertia::new(negative, n * n - negative - positive, positive),
        _ => {
            let positive = positive - 1;
            Inertia::new(negative, n * n - negative - positive, positive)
        }
    })
}

/// Class from inertia, kind, signature and value. For kind `F`, `N₊ = 0`
/// holds exactly when every nonzero cluster is fully flipped.
pub fn classify<T: Real>(stratum: &CriticalStratum<T>) -> StratumClass {
    let i = stratum.inertia;
    let trivial = stratum.signature.nu.iter().all(|v| *v == 0);
    if i.negative == 0 && (i.positive > 0 || trivial) {
        return StratumClass::GlobalMin;
    }
    if i.positive == 0 {
        match stratum.kind {
            LandscapeKind::F => return StratumClass::GlobalMax,
            LandscapeKind::P => {
                let ceiling = stratum.weight_norm_sq * stratum.weight_norm_sq;
                if stratum.critical_value < ceiling {
                    return StratumClass::LocalMax;
                }
            }
            _ => {}
        }
    }
    StratumClass::Saddle
}

fn build_stratum<T: Real>(ws: &WeightSpectrum<T>, sig: StratumSignature, kind: LandscapeKind) -> Result<CriticalStratum<T>> {
    let mut stratum = CriticalStratum {
        critical_value: critical_value(ws, &sig, kind)?,
        dimension: stratum_dimension(ws, &sig, kind)?,
        inertia: stratum_inertia(ws, &sig, kind)?,
        signature: sig,
        kind,
        class: StratumClass::Saddle,
        weight_norm_sq: ws.norm_sq(),
    };
    stratum.class = classify(&stratum);
    Ok(stratum)
}

pub fn stratum<T: Real>(ws: &WeightSpectrum<T>, nu: Vec<usize>, kind: LandscapeKind) -> Result<CriticalStratum<T>> {
    let sig = StratumSignature::new(nu, ws)?;
    build_stratum(ws, sig, kind)
}

/// All critical strata of `J_F` or `J_P`. For `P` only signatures with
/// `Tr(Ω²Λ) > 0` appear; the level set `J_P = ‖A‖⁴` is reported separately.
pub fn enumerate_strata<T: Real>(ws: &WeightSpectrum<T>, kind: LandscapeKind) -> Result<StrataCensus<T>> {
    require_weighted(kind)?;
    let mut strata = Vec::new();
    for sig in StratumSignature::all(ws) {
        if kind == LandscapeKind::P && !admissible_for_phase(ws, &sig) {
            continue;
        }
        strata.push(build_stratum(ws, sig, kind)?);
    }
    // For N ≥ 2 a cyclic permutation in the eigenbasis of AA† has zero
    // diagonal, so the overlap can always vanish.
    let global_max = (kind == LandscapeKind::P && ws.dim() >= 2 && ws.kappa > 0).then(|| {
        let w = ws.norm_sq();
        GlobalMaxDescriptor {
            value: w * w,
            codimension: 2,
            nondegenerate: jp_globalmax_nondegenerate(ws),
            class: StratumClass::GlobalMax,
        }
    });
    Ok(StrataCensus { kind, dim: ws.dim(), strata, global_max })
}

/// True iff no signature makes `Ω²` orthogonal to `Λ̂`, i.e. the maximum set of
/// `J_P` is a nondegenerate codimension-2 submanifold.
pub fn jp_globalmax_nondegenerate<T: Real>(ws: &WeightSpectrum<T>) -> bool {
    let tol = orth_tolerance(ws);
    StratumSignature::all(ws).iter().all(|sig| signature_trace(ws, sig).abs() > tol)
}

/// Eigenvalue multiset with multiplicities, sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianSpectrum<T: Real> {
    pub entries: Vec<(T, usize)>,
}

impl<T: Real> HessianSpectrum<T> {
    fn from_values(mut values: Vec<T>, merge_tol: T) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let mut entries: Vec<(T, usize)> = Vec::new();
        for v in values {
            match entries.last_mut() {
                Some((last, count)) if (v - *last).abs() <= merge_tol => *count += 1,
                _ => entries.push((v, 1)),
            }
        }
        Self { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Values repeated by multiplicity, ascending.
    pub fn values(&self) -> Vec<T> {
        self.entries.iter().flat_map(|(v, m)| std::iter::repeat_n(*v, *m)).collect()
    }

    pub fn inertia(&self, tol: T) -> Inertia {
        Inertia::count(&self.values(), tol)
    }

    /// Smallest `|γ|` above `tol`.
    pub fn smallest_nonzero(&self, tol: T) -> Option<T> {
        self.entries.iter().map(|e| e.0.abs()).filter(|v| *v > tol).reduce(|a, b| a.min(b))
    }
}

/// `ω̃ᵢ²λ̂ᵢ` along the diagonal: flipped entries first within each cluster,
/// zeros on the null block.
fn signed_weights<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> Vec<T> {
    let mut c = Vec::with_capacity(ws.dim());
    for ((&v, &n), &w) in sig.nu.iter().zip(&ws.mult).zip(&ws.distinct) {
        c.extend(std::iter::repeat_n(-w, v));
        c.extend(std::iter::repeat_n(w, n - v));
    }
    c.extend(std::iter::repeat_n(T::zero(), ws.null_mult));
    c
}

fn merge_tolerance<T: Real>(ws: &WeightSpectrum<T>) -> T {
    lit::<T>(1e-9) * ws.norm_sq().max(T::one())
}

/// Hessian spectrum of `J_F` at a stratum: `γ = cᵢ + cⱼ` over ordered pairs.
pub fn jf_hessian_spectrum<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> HessianSpectrum<T> {
    let c = signed_weights(ws, sig);
    let values = c.iter().flat_map(|ci| c.iter().map(move |cj| *ci + *cj)).collect();
    HessianSpectrum::from_values(values, merge_tolerance(ws))
}

/// Hessian spectrum of `J_P` at a stratum with `τ = Tr(Ω²Λ̂) > 0`.
///
/// Off-diagonal pairs give `τ(cᵢ + cⱼ)`. On the diagonal each group of `m`
/// equal nonzero `c` contributes `m − 1` copies of `η = 2τc`, the null block
/// contributes zeros, and the remaining eigenvalues solve
/// `Σ 2cᵢ²/(2τcᵢ − γ) = 1`, one root per interval between consecutive poles
/// plus one below the smallest. The root `γ = 0` is the global-phase direction.
pub fn jp_hessian_spectrum<T: Real>(ws: &WeightSpectrum<T>, sig: &StratumSignature) -> Result<HessianSpectrum<T>> {
    if !admissible_for_phase(ws, sig) {
        return Err(Error::InvalidSignature(format!("signature {sig} violates Tr(Ω²Λ) > 0")));
    }
    let tau = signature_trace(ws, sig);
    let c = signed_weights(ws, sig);
    let n = c.len();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values.push(tau * (c[i] + c[j]));
            }
        }
    }
    values.extend(std::iter::repeat_n(T::zero(), ws.null_mult));

    // Poles with their weights m·2c².
    let mut poles: Vec<(T, T)> = Vec::new();
    for ((&v, &m), &w) in sig.nu.iter().zip(&ws.mult).zip(&ws.distinct) {
        for (count, ci) in [(v, -w), (m - v, w)] {
            if count == 0 {
                continue;
            }
            let eta = tau * ci * lit(2.0);
            values.extend(std::iter::repeat_n(eta, count - 1));
            poles.push((eta, lit::<T>(count as f64) * ci * ci * lit(2.0)));
        }
    }
    poles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut roots = secular_roots(&poles)?;

    let tau_null = lit::<T>(TAU_NULL_REL) * ws.norm_sq().max(T::one()).powi(2);
    let (zero_idx, zero_root) = roots
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.abs()))
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
        .ok_or_else(|| Error::Bracket("no secular roots".into()))?;
    if zero_root > tau_null {
        return Err(Error::Bracket(format!("no secular root at zero (closest {:e})", to_f64(zero_root))));
    }
    roots[zero_idx] = T::zero();
    values.extend(roots);
    let scale = ws.norm_sq().max(T::one());
    Ok(HessianSpectrum::from_values(values, merge_tolerance(ws) * scale))
}

/// Roots of `Σ w/(η − γ) = 1` for ascending poles `(η, w)` with `w > 0`.
fn secular_roots<T: Real>(poles: &[(T, T)]) -> Result<Vec<T>> {
    let f = |g: T| poles.iter().fold(T::zero(), |acc, (eta, w)| acc + *w / (*eta - g)) - T::one();
    let total_weight = poles.iter().fold(T::zero(), |acc, p| acc + p.1);
    let margin = |eta: T| lit::<T>(SECULAR_MARGIN) * eta.abs().max(T::one());
    let mut roots = Vec::with_capacity(poles.len());
    for k in 0..poles.len() {
        let hi = poles[k].0 - margin(poles[k].0);
        let lo = if k == 0 {
            poles[0].0 - total_weight - T::one()
        } else {
            poles[k - 1].0 + margin(poles[k - 1].0)
        };
        roots.push(bisect(&f, lo, hi)?);
    }
    Ok(roots)
}

fn bisect<T: Real>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T) -> Result<T> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < T::zero() && fhi > T::zero()) {
        return Err(Error::Bracket(format!(
            "no sign change on [{:e}, {:e}] (f = {:e}, {:e})",
            to_f64(lo),
            to_f64(hi),
            to_f64(flo),
            to_f64(fhi)
        )));
    }
    for _ in 0..300 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * lit(0.5))
}

/// Analytic spectrum for either kind.
pub fn hessian_spectrum<T: Real>(ws: &WeightSpectrum<T>, stratum: &CriticalStratum<T>) -> Result<HessianSpectrum<T>> {
    match stratum.kind {
        LandscapeKind::F => Ok(jf_hessian_spectrum(ws, &stratum.signature)),
        LandscapeKind::P => jp_hessian_spectrum(ws, &stratum.signature),
        kind => Err(Error::InvalidLandscape(format!("no stratum spectrum for kind {kind}"))),
    }
}

/// Representative critical point `U = e^{iθ} W D (Γ̂ΛΓ̂† ⊕ X̃₀) D†`.
#[derive(Clone, Debug)]
pub struct CriticalPointSample<T: Real> {
    pub stratum: CriticalStratum<T>,
    pub landscape: LandscapeSpec<T>,
    pub gamma_hat: CMatrix<T>,
    pub null_block: CMatrix<T>,
    pub theta: T,
    pub point: UnitaryMatrix<T>,
    pub gradient_norm: T,
}

/// Explicit assembly with given blocks; `gamma_hat` and `null_block` must be
/// unitary and block-compatible with the weight clusters.
pub fn assemble_point<T: Real>(
    ws: &WeightSpectrum<T>,
    sig: &StratumSignature,
    target: &UnitaryMatrix<T>,
    gamma_hat: &CMatrix<T>,
    null_block: &CMatrix<T>,
    theta: T,
) -> Result<UnitaryMatrix<T>> {
    let n = ws.dim();
    let active = n - ws.null_mult;
    if gamma_hat.nrows() != active || null_block.nrows() != ws.null_mult {
        return Err(Error::DimensionMismatch { expected: active, found: gamma_hat.nrows() });
    }
    let lambda = CMatrix::<T>::from_diagonal(&nalgebra::DVector::from_iterator(
        active,
        signed_weights(ws, sig).iter().take(active).map(|c| cplx(c.signum(), T::zero())),
    ));
    let mut inner = CMatrix::<T>::zeros(n, n);
    inner
        .view_mut((0, 0), (active, active))
        .copy_from(&(gamma_hat * lambda * gamma_hat.adjoint()));
    inner.view_mut((active, active), (ws.null_mult, ws.null_mult)).copy_from(null_block);
    let d = ws.d.matrix();
    let u = target.matrix() * d * inner * d.adjoint() * cis(theta);
    UnitaryMatrix::new(u)
}

/// Draws a point on the stratum: Haar blocks for `Γ̂` (one per cluster) and
/// `X̃₀`, and uniform `θ` for kind `P`. Verifies criticality and the value.
pub fn sample_point<T: Real>(
    ws: &WeightSpectrum<T>,
    sig: &StratumSignature,
    kind: LandscapeKind,
    target: &UnitaryMatrix<T>,
    seed: u64,
) -> Result<CriticalPointSample<T>> {
    let stratum = build_stratum(ws, sig.clone(), kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active = ws.dim() - ws.null_mult;
    let mut gamma_hat = CMatrix::<T>::zeros(active, active);
    for range in ws.cluster_ranges() {
        let block = haar_unitary::<T, _>(range.len(), &mut rng);
        gamma_hat.view_mut((range.start, range.start), (range.len(), range.len())).copy_from(&block);
    }
    let null_block = haar_unitary::<T, _>(ws.null_mult, &mut rng);
    let theta = if kind == LandscapeKind::P {
        lit::<T>(rng.random_range(0.0..std::f64::consts::TAU))
    } else {
        T::zero()
    };
    let point = assemble_point(ws, sig, target, &gamma_hat, &null_block, theta)?;
    let landscape = LandscapeSpec::new(kind, target.clone(), Some(ws.clone()))?;
    let sample = verify_sample(stratum, landscape, gamma_hat, null_block, theta, point)?;
    Ok(sample)
}

fn verify_sample<T: Real>(
    stratum: CriticalStratum<T>,
    landscape: LandscapeSpec<T>,
    gamma_hat: CMatrix<T>,
    null_block: CMatrix<T>,
    theta: T,
    point: UnitaryMatrix<T>,
) -> Result<CriticalPointSample<T>> {
    let scale = landscape.scale();
    let gradient_norm = landscapes::gradient(&landscape, &point)?.norm();
    if gradient_norm > lit::<T>(TAU_CRIT) * scale {
        return Err(Error::CriticalCheck(format!(
            "gradient norm {:e} at stratum {}",
            to_f64(gradient_norm),
            stratum.signature
        )));
    }
    let value = landscapes::value(&landscape, &point)?;
    if (value - stratum.critical_value).abs() > lit::<T>(1e-9) * scale {
        return Err(Error::CriticalCheck(format!(
            "value {} differs from critical value {} at stratum {}",
            to_f64(value),
            to_f64(stratum.critical_value),
            stratum.signature
        )));
    }
    Ok(CriticalPointSample { stratum, landscape, gamma_hat, null_block, theta, point, gradient_norm })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MorseBottVerdict {
    Pass,
    Fail,
    /// `τ_null` is not separated from the smallest nonzero curvature.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct MorseBottReport<T: Real> {
    pub nullity: usize,
    pub dim_formula: usize,
    pub verdict: MorseBottVerdict,
    pub tau_null: T,
    pub smallest_nonzero: Option<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Real> MorseBottReport<T> {
    pub fn pass(&self) -> bool {
        self.verdict == MorseBottVerdict::Pass
    }
}

/// Default `τ_null = 10⁻⁶·scale`.
pub fn default_tau_null<T: Real>(spec: &LandscapeSpec<T>) -> T {
    lit::<T>(TAU_NULL_REL) * spec.scale()
}

/// Counts near-zero eigenvalues of the numerical Hessian at the sample and
/// compares with the stratum dimension.
pub fn morse_bott_check<T: Real>(sample: &CriticalPointSample<T>, tau_null: T) -> Result<MorseBottReport<T>> {
    let hess = landscapes::hessian_matrix(&sample.landscape, &sample.point, HESSIAN_STEP)?;
    let eigenvalues = symmetric_eigenvalues(&hess);
    let nullity = eigenvalues.iter().filter(|v| v.abs() < tau_null).count();
    let ws = sample
        .landscape
        .weight()
        .ok_or_else(|| Error::InvalidLandscape("sample without weight".into()))?;
    let smallest_nonzero = hessian_spectrum(ws, &sample.stratum)?.smallest_nonzero(tau_null);
    let separated = smallest_nonzero.is_none_or(|s| s >= tau_null * lit(NULL_SEPARATION));
    let dim_formula = sample.stratum.dimension;
    let verdict = if !separated {
        MorseBottVerdict::Inconclusive
    } else if nullity == dim_formula {
        MorseBottVerdict::Pass
    } else {
        MorseBottVerdict::Fail
    };
    Ok(MorseBottReport { nullity, dim_formula, verdict, tau_null, smallest_nonzero, eigenvalues })
}

/// Weight `A = V·diag(√ω²)·X` with Haar `V`, `X`; gives exact control over
/// degeneracies of `AA†`.
pub fn weight_with_spectrum<T: Real, R: Rng + ?Sized>(omega_sq: &[f64], rng: &mut R) -> CMatrix<T> {
    let n = omega_sq.len();
    let v = haar_unitary::<T, _>(n, rng);
    let x = haar_unitary::<T, _>(n, rng);
    let diag = CMatrix::<T>::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        omega_sq.iter().map(|w| cplx(lit::<T>(w.sqrt()), T::zero())),
    ));
    v * diag * x
}

/// Line-delimited stratum report with a `#` header.
pub fn format_report<T: Real>(census: &StrataCensus<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# kind {} N {}", census.kind, census.dim);
    let _ = writeln!(out, "# signature value dimension n_minus n_zero n_plus class");
    for s in &census.strata {
        let _ = writeln!(
            out,
            "{} {:.12e} {} {} {} {} {}",
            s.signature,
            to_f64(s.critical_value),
            s.dimension,
            s.inertia.negative,
            s.inertia.zero,
            s.inertia.positive,
            s.class
        );
    }
    if let Some(m) = &census.global_max {
        let _ = writeln!(
            out,
            "max {:.12e} codim={} - - - {} nondegenerate={}",
            to_f64(m.value),
            m.codimension,
            m.class,
            m.nondegenerate
        );
    }
    out
}
