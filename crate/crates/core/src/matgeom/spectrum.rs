use std::ops::Range;

use super::{hermitian_eigen, UnitaryMatrix, TAU_CLUSTER};
use crate::error::{Error, Result};
use crate::scalar::{hs_norm_sq, lit, CMatrix, Real};

/// Spectral data of `AA†` for a weight matrix `A`.
///
/// `d` diagonalizes `AA†` with nonincreasing diagonal `omega_sq`. The nonzero
/// eigenvalues are grouped into `kappa` clusters with representatives
/// `distinct[i]` and multiplicities `mult[i]`; the last `null_mult` diagonal
/// entries form the null cluster.
#[derive(Clone, Debug)]
pub struct WeightSpectrum<T: Real> {
    pub a: CMatrix<T>,
    pub d: UnitaryMatrix<T>,
    pub omega_sq: Vec<T>,
    pub distinct: Vec<T>,
    pub mult: Vec<usize>,
    pub null_mult: usize,
    pub kappa: usize,
    pub tau_cluster: f64,
}

impl<T: Real> WeightSpectrum<T> {
    pub fn dim(&self) -> usize {
        self.omega_sq.len()
    }

    /// `‖A‖² = Tr(AA†)`.
    pub fn norm_sq(&self) -> T {
        self.omega_sq.iter().fold(T::zero(), |acc, w| acc + *w)
    }

    /// `AA†`.
    pub fn weight_gram(&self) -> CMatrix<T> {
        &self.a * self.a.adjoint()
    }

    /// Index ranges of the nonzero clusters along the diagonal of `Ω²`.
    pub fn cluster_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.mult
            .iter()
            .map(|&m| {
                let r = start..start + m;
                start += m;
                r
            })
            .collect()
    }

    pub fn null_range(&self) -> Range<usize> {
        let n = self.dim();
        n - self.null_mult..n
    }

    /// Diagonal of `Ω²` with every entry replaced by its cluster representative
    /// (zero on the null cluster).
    pub fn clustered_omega_sq(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim());
        for (value, &m) in self.distinct.iter().zip(&self.mult) {
            out.extend(std::iter::repeat_n(*value, m));
        }
        out.extend(std::iter::repeat_n(T::zero(), self.null_mult));
        out
    }
}

/// Eigen-analysis of `AA†` with greedy gap clustering.
///
/// Sorted eigenvalues below `τ_cluster·max(1, ‖A‖²)` form the null cluster. A
/// new cluster starts whenever an eigenvalue falls more than
/// `τ_cluster·max(1, first)` below the first (largest) member of the current
/// cluster; cluster representatives are member means.
pub fn analyze_weight<T: Real>(a: &CMatrix<T>, tau_cluster: f64) -> Result<WeightSpectrum<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(tau_cluster > 0.0) {
        return Err(Error::InvalidArgument(format!("tau_cluster must be positive, got {tau_cluster}")));
    }
    let gram = a * a.adjoint();
    let (vals, vecs) = hermitian_eigen(&gram)?;
    let omega_sq: Vec<T> = vals.into_iter().map(|v| v.max(T::zero())).collect();
    let tau = lit::<T>(tau_cluster);
    let null_threshold = tau * T::one().max(hs_norm_sq(a));

    let mut distinct = Vec::new();
    let mut mult = Vec::new();
    let mut cluster: Vec<T> = Vec::new();
    let mut null_mult = 0;
    let flush = |cluster: &mut Vec<T>, distinct: &mut Vec<T>, mult: &mut Vec<usize>| {
        if !cluster.is_empty() {
            let sum = cluster.iter().fold(T::zero(), |acc, v| acc + *v);
            distinct.push(sum / lit::<T>(cluster.len() as f64));
            mult.push(cluster.len());
            cluster.clear();
        }
    };
    for &w in &omega_sq {
        if w < null_threshold {
            null_mult += 1;
            continue;
        }
        if let Some(&first) = cluster.first() {
            if first - w > tau * T::one().max(first) {
                flush(&mut cluster, &mut distinct, &mut mult);
            }
        }
        cluster.push(w);
    }
    flush(&mut cluster, &mut distinct, &mut mult);

    let kappa = distinct.len();
    Ok(WeightSpectrum {
        a: a.clone(),
        d: UnitaryMatrix::new_unchecked(vecs),
        omega_sq,
        distinct,
        mult,
        null_mult,
        kappa,
        tau_cluster,
    })
}

/// [`analyze_weight`] with the default clustering tolerance.
pub fn analyze_weight_default<T: Real>(a: &CMatrix<T>) -> Result<WeightSpectrum<T>> {
    analyze_weight(a, TAU_CLUSTER)
}
