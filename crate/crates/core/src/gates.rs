//! Standard gates and Pauli matrices.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matgeom::UnitaryMatrix;
use crate::scalar::{cis, cplx, lit, CMatrix, Real};

fn from_rows<T: Real>(n: usize, entries: &[(f64, f64)]) -> CMatrix<T> {
    CMatrix::from_fn(n, n, |i, j| {
        let (re, im) = entries[i * n + j];
        cplx(lit(re), lit(im))
    })
}

pub fn pauli_x<T: Real>() -> CMatrix<T> {
    from_rows(2, &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)])
}

pub fn pauli_y<T: Real>() -> CMatrix<T> {
    from_rows(2, &[(0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)])
}

pub fn pauli_z<T: Real>() -> CMatrix<T> {
    from_rows(2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1.0, 0.0)])
}

pub fn hadamard<T: Real>() -> UnitaryMatrix<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    UnitaryMatrix::new_unchecked(from_rows(2, &[(s, 0.0), (s, 0.0), (s, 0.0), (-s, 0.0)]))
}

pub fn cnot<T: Real>() -> UnitaryMatrix<T> {
    let mut m = CMatrix::<T>::identity(4, 4);
    m.swap_rows(2, 3);
    UnitaryMatrix::new_unchecked(m)
}

/// Quantum Fourier transform on `n` levels.
pub fn qft<T: Real>(n: usize) -> UnitaryMatrix<T> {
    let norm = lit::<T>(1.0 / (n as f64).sqrt());
    let m = CMatrix::from_fn(n, n, |j, k| cis(lit::<T>(2.0 * PI * ((j * k) % n) as f64 / n as f64)) * norm);
    UnitaryMatrix::new_unchecked(m)
}

/// Looks up `hadamard`, `cnot`, `qft`, `identity` or `random:<seed>` and checks
/// the dimension.
pub fn named<T: Real>(name: &str, n: usize) -> Result<UnitaryMatrix<T>> {
    let gate = match name.to_ascii_lowercase().as_str() {
        "identity" => UnitaryMatrix::identity(n),
        "hadamard" => hadamard(),
        "cnot" => cnot(),
        "qft" => qft(n),
        other => match other.strip_prefix("random:").or_else(|| other.strip_prefix("random ")) {
            Some(seed) => {
                let seed: u64 = seed
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad random seed `{seed}`")))?;
                UnitaryMatrix::haar_random(n, &mut ChaCha8Rng::seed_from_u64(seed))
            }
            None => return Err(Error::InvalidArgument(format!("unknown gate `{name}`"))),
        },
    };
    if gate.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: gate.dim() });
    }
    Ok(gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::hs_norm;

    #[test]
    fn gates_are_unitary() {
        for g in [hadamard::<f64>(), cnot(), qft(3), qft(4), named("random:5", 3).unwrap()] {
            assert!(g.unitarity_residual() < 1e-14);
        }
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x::<f64>(), pauli_y::<f64>(), pauli_z::<f64>());
        assert!(hs_norm(&(&x * &y - &z * cplx(0.0, 1.0))) < 1e-15);
        let h = hadamard::<f64>();
        assert!(hs_norm(&(h.matrix() * &x * h.matrix() - z)) < 1e-15);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(named::<f64>("cnot", 2).is_err());
        assert!(named::<f64>("teleport", 2).is_err());
        assert!(hs_norm(&(named::<f64>("qft", 2).unwrap().matrix() - hadamard::<f64>().matrix())) < 1e-15);
    }
}
