use nalgebra::{DMatrix, DVector};

use super::LaplaceOperator;
use crate::error::{Error, Result};

/// The `J` lowest eigenpairs of `C φ = λ M φ`, mass-orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// Ascending, nonnegative.
    pub eigenvalues: DVector<f64>,
    /// `N × J`, column `j` is `φ_j`.
    pub eigenvectors: DMatrix<f64>,
    pub mass: Vec<f64>,
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Keeps the first `count` eigenpairs.
    pub fn truncated(&self, count: usize) -> Result<SpectralBasis> {
        if count == 0 || count > self.len() {
            return Err(Error::TooManyEigenpairs {
                requested: count,
                available: self.len(),
            });
        }
        Ok(SpectralBasis {
            eigenvalues: self.eigenvalues.rows(0, count).into_owned(),
            eigenvectors: self.eigenvectors.columns(0, count).into_owned(),
            mass: self.mass.clone(),
        })
    }

    /// `ΦᵀMΦ`; identity up to round-off.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut weighted = self.eigenvectors.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= self.mass[i];
        }
        self.eigenvectors.transpose() * weighted
    }
}

/// Solves the generalized eigenproblem through the symmetric matrix
/// `M^{-1/2} C M^{-1/2}` and keeps the `count` smallest eigenpairs.
pub fn spectral_basis(lap: &LaplaceOperator, count: usize) -> Result<SpectralBasis> {
    let n = lap.dim();
    if count == 0 || count > n {
        return Err(Error::TooManyEigenpairs {
            requested: count,
            available: n,
        });
    }
    for (index, &value) in lap.mass.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveMass { index, value });
        }
    }
    let inv_sqrt: Vec<f64> = lap.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = lap.stiffness.to_dense();
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // enforce exact symmetry before the dense solve
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = -1e-8 * lambda_max.max(1.0);

    let mut eigenvalues = DVector::zeros(count);
    let mut eigenvectors = DMatrix::zeros(n, count);
    for (k, &idx) in order.iter().take(count).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda < floor {
            return Err(Error::Numerical(format!(
                "negative eigenvalue {lambda:e} from a positive semidefinite operator"
            )));
        }
        eigenvalues[k] = lambda.max(0.0);
        let mut phi: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        for i in 0..n {
            phi[i] *= inv_sqrt[i];
        }
        let pivot = phi
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            phi.neg_mut();
        }
        eigenvectors.set_column(k, &phi);
    }

    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        mass: lap.mass.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cotan_laplacian, shapes};

    #[test]
    fn tetra_constant_mode() {
        let lap = cotan_laplacian(&shapes::tetrahedron()).unwrap();
        let basis = spectral_basis(&lap, 4).unwrap();
        assert_eq!(basis.len(), 4);
        assert!(basis.eigenvalues[0] <= 1e-8 * basis.eigenvalues[3]);
        let phi0 = basis.eigenvectors.column(0);
        let mean = phi0.mean();
        assert!(phi0.iter().all(|x| (x - mean).abs() < 1e-10));
        assert!(mean > 0.0);
    }

    #[test]
    fn rejects_bad_counts() {
        let lap = cotan_laplacian(&shapes::tetrahedron()).unwrap();
        assert!(matches!(
            spectral_basis(&lap, 5),
            Err(Error::TooManyEigenpairs {
                requested: 5,
                available: 4
            })
        ));
        assert!(spectral_basis(&lap, 0).is_err());
    }

    #[test]
    fn rejects_non_positive_mass() {
        let mut lap = cotan_laplacian(&shapes::tetrahedron()).unwrap();
        lap.mass[2] = 0.0;
        assert!(matches!(
            spectral_basis(&lap, 2),
            Err(Error::NonPositiveMass { index: 2, .. })
        ));
    }

    #[test]
    fn mass_orthonormal_and_sorted() {
        let lap = cotan_laplacian(&shapes::horseshoe(2)).unwrap();
        let basis = spectral_basis(&lap, 40).unwrap();
        let g = basis.gram();
        let err = (g - DMatrix::<f64>::identity(40, 40)).abs().max();
        assert!(err < 1e-8, "{err}");
        assert!(basis.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        assert!(basis.eigenvalues[0] <= 1e-8 * basis.eigenvalues[39]);
    }

    #[test]
    fn eigenvector_sign_convention() {
        let lap = cotan_laplacian(&shapes::icosphere(2)).unwrap();
        let basis = spectral_basis(&lap, 10).unwrap();
        for col in basis.eigenvectors.column_iter() {
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn generalized_residual_small() {
        let lap = cotan_laplacian(&shapes::icosphere(2)).unwrap();
        let basis = spectral_basis(&lap, 12).unwrap();
        let c = lap.stiffness.to_dense();
        for j in 0..12 {
            let phi = basis.eigenvectors.column(j);
            let lhs = &c * phi;
            let rhs = DVector::from_iterator(
                phi.len(),
                phi.iter().zip(&lap.mass).map(|(p, m)| basis.eigenvalues[j] * m * p),
            );
            assert!((lhs - rhs).abs().max() < 1e-8);
        }
    }

    #[test]
    fn truncation_keeps_prefix() {
        let lap = cotan_laplacian(&shapes::icosphere(1)).unwrap();
        let basis = spectral_basis(&lap, 20).unwrap();
        let t = basis.truncated(7).unwrap();
        assert_eq!(t.len(), 7);
        assert_eq!(t.eigenvectors.column(6), basis.eigenvectors.column(6));
        assert!(basis.truncated(21).is_err());
    }
}
