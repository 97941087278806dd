//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All matrix code is written against [`Real`], so the same routines run in
//! `f32` or `f64`. Tolerances are stored as `f64` and converted on use; the
//! defaults are tuned for double precision.

use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the library is generic over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Dense complex matrix over `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Dense real matrix over `T`.
pub type RMatrix<T> = DMatrix<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Validation tolerance in `T`, floored at a small multiple of its epsilon so
/// that single precision is not held to double-precision residuals.
#[inline]
pub fn check_tol<T: Real>(tol: f64) -> T {
    lit::<T>(tol).max(T::default_epsilon() * lit(100.0))
}

/// Converts `T` back to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

/// `i`.
#[inline]
pub fn cimag<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::one())
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Real Hilbert-Schmidt inner product `Re Tr(X†Y)`.
pub fn hs_inner<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> T {
    x.iter()
        .zip(y.iter())
        .fold(T::zero(), |acc, (a, b)| acc + a.re * b.re + a.im * b.im)
}

/// Squared Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm_sq<T: Real>(x: &CMatrix<T>) -> T {
    x.iter().fold(T::zero(), |acc, a| acc + a.re * a.re + a.im * a.im)
}

pub fn hs_norm<T: Real>(x: &CMatrix<T>) -> T {
    hs_norm_sq(x).sqrt()
}

pub fn trace<T: Real>(x: &CMatrix<T>) -> Complex<T> {
    x.diagonal().iter().fold(czero(), |acc, z| acc + *z)
}

/// Spectral norm of a complex matrix (largest singular value).
pub fn spectral_norm<T: Real>(x: &CMatrix<T>) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, s| if *s > acc { *s } else { acc })
}

/// `‖X + X†‖`, zero exactly when `X` is skew-Hermitian.
pub fn skew_residual<T: Real>(x: &CMatrix<T>) -> T {
    hs_norm(&(x + x.adjoint()))
}

/// `‖X − X†‖`, zero exactly when `X` is Hermitian.
pub fn hermitian_residual<T: Real>(x: &CMatrix<T>) -> T {
    hs_norm(&(x - x.adjoint()))
}

/// Skew-Hermitian part `(X − X†)/2`.
pub fn skew_part<T: Real>(x: &CMatrix<T>) -> CMatrix<T> {
    (x - x.adjoint()) * cplx(lit::<T>(0.5), T::zero())
}

/// Hermitian part `(X + X†)/2`.
pub fn hermitian_part<T: Real>(x: &CMatrix<T>) -> CMatrix<T> {
    (x + x.adjoint()) * cplx(lit::<T>(0.5), T::zero())
}

/// Modulus `|z|`.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Real scalar as a complex number.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_product_is_real_trace() {
        let x = CMatrix::<f64>::from_row_slice(2, 2, &[cplx(1.0, 2.0), cplx(0.0, 1.0), cplx(3.0, 0.0), cplx(-1.0, 0.5)]);
        let y = CMatrix::<f64>::from_row_slice(2, 2, &[cplx(0.5, -1.0), cplx(2.0, 2.0), cplx(1.0, 1.0), cplx(0.0, 3.0)]);
        let direct = trace(&(x.adjoint() * &y)).re;
        assert!((hs_inner(&x, &y) - direct).abs() < 1e-14);
    }

    #[test]
    fn literals_round_trip_in_f32() {
        let x: f32 = lit(0.25);
        assert_eq!(to_f64(x), 0.25);
    }
}
