//! Covariance functions: the Laplacian-eigenbasis spatial kernel, its
//! Euclidean Matérn baseline, and the temporal Matérn kernel.
//!
//! All three use Matérn smoothness `ν = 3/2`. The spatial kernel evaluates the
//! Matérn spectral density (spectral dimension 2) at the square roots of the
//! mesh Laplacian eigenvalues and sums the weighted eigenfunction products.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::mesh::{distance, Point3, SpectralBasis};

/// Matérn smoothness used by every kernel in the crate.
pub const NU: f64 = 1.5;
/// Spectral dimension of a surface.
pub const SPECTRAL_DIM: f64 = 2.0;

/// Dense kernel matrix; rows index the first argument set, columns the second.
pub type KernelMatrix = DMatrix<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Spatial length-scale `l_s`.
    pub length_space: f64,
    /// Spatial scale `σ_m`.
    pub sigma_m: f64,
    /// Spatial nugget `σ_{ε,s}`, added to the spatial diagonal.
    pub nugget_space: f64,
    /// Temporal length-scale `l_t`.
    pub length_time: f64,
    /// Temporal scale `σ_a`.
    pub sigma_a: f64,
    /// Temporal nugget `σ_{ε,t}`, added to the temporal diagonal.
    pub nugget_time: f64,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length_space", self.length_space),
            ("sigma_m", self.sigma_m),
            ("length_time", self.length_time),
            ("sigma_a", self.sigma_a),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("nugget_space", self.nugget_space), ("nugget_time", self.nugget_time)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Equivalent parameters with `σ_m = 1`. The Kronecker covariance
    /// `(σ_m K̃_s + σ_{ε,s} I) ⊗ (σ_a K̃_t + σ_{ε,t} I)` is unchanged.
    pub fn with_unit_sigma_m(&self) -> HyperParams {
        let c = self.sigma_m;
        HyperParams {
            sigma_m: 1.0,
            nugget_space: self.nugget_space / c,
            sigma_a: self.sigma_a * c,
            nugget_time: self.nugget_time * c,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Laplacian-eigenbasis kernel (G-ST-GP).
    Laplacian,
    /// Matérn on straight-line distances (E-ST-GP).
    Euclidean,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Laplacian => "laplacian",
            KernelKind::Euclidean => "euclidean",
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laplacian" | "g-st-gp" => Ok(KernelKind::Laplacian),
            "euclidean" | "e-st-gp" => Ok(KernelKind::Euclidean),
            other => Err(Error::InvalidArgument(format!("unknown kernel kind {other:?}"))),
        }
    }
}

/// Matérn spectral density evaluated at `√λ`:
///
/// `S(√λ) = 2^d π^{d/2} Γ(ν+d/2) (2ν)^ν / (Γ(ν) l^{2ν}) · (2ν/l² + 4π²λ)^{-(ν+d/2)}`
pub fn matern_spectral_density(lambda: f64, length: f64, nu: f64, dim: f64) -> Result<f64> {
    if !lambda.is_finite() || !length.is_finite() || !nu.is_finite() || !dim.is_finite() {
        return Err(Error::InvalidArgument("non-finite spectral density input".into()));
    }
    if lambda < 0.0 || length <= 0.0 || nu <= 0.0 || dim <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "spectral density needs lambda >= 0 and positive length, nu, dim (got {lambda}, {length}, {nu}, {dim})"
        )));
    }
    Ok(spectral_density_unchecked(lambda, length, nu, dim))
}

fn spectral_density_unchecked(lambda: f64, length: f64, nu: f64, dim: f64) -> f64 {
    let half_d = dim / 2.0;
    let log_const = dim * 2f64.ln() + half_d * PI.ln() + ln_gamma(nu + half_d) + nu * (2.0 * nu).ln()
        - ln_gamma(nu)
        - 2.0 * nu * length.ln();
    let base = 2.0 * nu / (length * length) + 4.0 * PI * PI * lambda;
    (log_const - (nu + half_d) * base.ln()).exp()
}

/// Per-eigenpair weights `σ_m S(√λ_j)`.
pub fn spectral_weights(eigenvalues: &[f64], theta: &HyperParams) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&l| theta.sigma_m * spectral_density_unchecked(l.max(0.0), theta.length_space, NU, SPECTRAL_DIM))
        .collect()
}

/// Laplacian-eigenbasis spatial kernel `Φ_rows diag(σ_m S(√λ)) Φ_colsᵀ`.
pub fn spatial_kernel(
    basis: &SpectralBasis,
    theta: &HyperParams,
    rows: &[usize],
    cols: &[usize],
) -> Result<KernelMatrix> {
    let n = basis.num_vertices();
    check_indices(rows, n)?;
    check_indices(cols, n)?;
    let weights = spectral_weights(basis.eigenvalues.as_slice(), theta);
    let phi_rows = select_rows(&basis.eigenvectors, rows);
    let phi_cols = select_rows(&basis.eigenvectors, cols);
    Ok(weighted_gram(&phi_rows, &weights, &phi_cols))
}

/// `A diag(w) Bᵀ`.
pub(crate) fn weighted_gram(a: &DMatrix<f64>, weights: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    scaled * b.transpose()
}

pub(crate) fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

pub(crate) fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= n) {
        Some(&index) => Err(Error::VertexOutOfRange { index, count: n }),
        None => Ok(()),
    }
}

/// Matérn-3/2 correlation at distance `r`, scaled by `scale`.
#[inline]
pub fn matern32(r: f64, length: f64, scale: f64) -> f64 {
    let z = 3f64.sqrt() * r.abs() / length;
    scale * (1.0 + z) * (-z).exp()
}

/// `σ_a (1 + √3|t−t′|/l_t) exp(−√3|t−t′|/l_t)`.
pub fn temporal_kernel(times_a: &[f64], times_b: &[f64], theta: &HyperParams) -> KernelMatrix {
    DMatrix::from_fn(times_a.len(), times_b.len(), |i, j| {
        matern32(times_a[i] - times_b[j], theta.length_time, theta.sigma_a)
    })
}

/// Matérn-3/2 of straight-line distance with scale `σ_m` and length `l_s`.
pub fn euclidean_spatial_kernel(
    points: &[Point3],
    theta: &HyperParams,
    rows: &[usize],
    cols: &[usize],
) -> Result<KernelMatrix> {
    check_indices(rows, points.len())?;
    check_indices(cols, points.len())?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let r = distance(&points[rows[i]], &points[cols[j]]);
        matern32(r, theta.length_space, theta.sigma_m)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cotan_laplacian, shapes, spectral_basis};
    use proptest::prelude::*;

    fn theta() -> HyperParams {
        HyperParams {
            length_space: 0.7,
            sigma_m: 1.3,
            nugget_space: 0.01,
            length_time: 2.0,
            sigma_a: 0.8,
            nugget_time: 0.02,
        }
    }

    #[test]
    fn density_at_zero_is_two_pi() {
        let s = matern_spectral_density(0.0, 1.0, NU, SPECTRAL_DIM).unwrap();
        assert!((s - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn density_matches_high_precision() {
        // mpmath, 40 digits
        let s = matern_spectral_density(1.0, 1.0, NU, SPECTRAL_DIM).unwrap();
        assert!((s - 0.008328411588841416231).abs() < 1e-15 * 10.0);
        let s = matern_spectral_density(0.37, 2.5, NU, SPECTRAL_DIM).unwrap();
        assert!((s - 0.007090138336219218537).abs() / s < 1e-12);
    }

    #[test]
    fn density_rejects_bad_input() {
        assert!(matern_spectral_density(f64::NAN, 1.0, NU, SPECTRAL_DIM).is_err());
        assert!(matern_spectral_density(1.0, f64::INFINITY, NU, SPECTRAL_DIM).is_err());
        assert!(matern_spectral_density(-1.0, 1.0, NU, SPECTRAL_DIM).is_err());
        assert!(matern_spectral_density(1.0, 0.0, NU, SPECTRAL_DIM).is_err());
    }

    proptest! {
        #[test]
        fn density_non_increasing(l1 in 0.0f64..100.0, dl in 0.0f64..100.0, len in 0.01f64..10.0) {
            let a = matern_spectral_density(l1, len, NU, SPECTRAL_DIM).unwrap();
            let b = matern_spectral_density(l1 + dl, len, NU, SPECTRAL_DIM).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn temporal_stationary(t in -50.0f64..50.0, s in -50.0f64..50.0, c in -100.0f64..100.0) {
            let th = theta();
            let a = temporal_kernel(&[t], &[s], &th)[(0, 0)];
            let b = temporal_kernel(&[t + c], &[s + c], &th)[(0, 0)];
            // exact when the shifted lag is representable; otherwise one ulp of the lag
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn temporal_values() {
        let th = HyperParams {
            sigma_a: 1.0,
            length_time: 1.7,
            ..theta()
        };
        let k = temporal_kernel(&[0.0], &[0.0], &th);
        assert_eq!(k[(0, 0)], 1.0);
        let k = temporal_kernel(&[0.0], &[1.7], &th);
        // (1+√3)e^{-√3}, mpmath
        assert!((k[(0, 0)] - 0.4833577245965076506).abs() < 1e-15);
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let k = temporal_kernel(&[0.0], &times, &th);
        assert!(k.row(0).iter().zip(k.row(0).iter().skip(1)).all(|(a, b)| b < a));
    }

    #[test]
    fn temporal_shift_exact_on_grid() {
        let th = theta();
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let shifted: Vec<f64> = t.iter().map(|x| x + 16.0).collect();
        assert_eq!(temporal_kernel(&t, &t, &th), temporal_kernel(&shifted, &shifted, &th));
    }

    fn small_basis() -> (crate::mesh::TriMesh, SpectralBasis) {
        // 10-vertex strip: two rows of five, second row lifted off the plane
        let mut v = Vec::new();
        for row in 0..2 {
            for i in 0..5 {
                let x = i as f64;
                v.push([x, row as f64, 0.3 * row as f64 * x * x * 0.2]);
            }
        }
        let mut f = Vec::new();
        for i in 0..4 {
            f.push([i, i + 1, i + 6]);
            f.push([i, i + 6, i + 5]);
        }
        let mesh = crate::mesh::TriMesh::new(v, f).unwrap();
        let lap = cotan_laplacian(&mesh).unwrap();
        let basis = spectral_basis(&lap, 5).unwrap();
        (mesh, basis)
    }

    #[test]
    fn spatial_kernel_matches_naive_sum() {
        let (_, basis) = small_basis();
        let th = theta();
        let rows: Vec<usize> = (0..10).collect();
        let k = spatial_kernel(&basis, &th, &rows, &rows).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for p in 0..basis.len() {
                    let lam = basis.eigenvalues[p];
                    let d = matern_spectral_density(lam, th.length_space, NU, SPECTRAL_DIM).unwrap();
                    s += th.sigma_m * d * basis.eigenvectors[(i, p)] * basis.eigenvectors[(j, p)];
                }
                assert!((k[(i, j)] - s).abs() <= 1e-12 * s.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn spatial_kernel_linear_in_sigma_m() {
        let (_, basis) = small_basis();
        let th = theta();
        let idx = [0, 3, 7, 9];
        let k1 = spatial_kernel(&basis, &th, &idx, &idx).unwrap();
        let k2 = spatial_kernel(
            &basis,
            &HyperParams {
                sigma_m: 2.0 * th.sigma_m,
                ..th
            },
            &idx,
            &idx,
        )
        .unwrap();
        assert!((k2 - k1 * 2.0).abs().max() < 1e-14);
        assert!(spatial_kernel(&basis, &th, &[10], &[0]).is_err());
    }

    #[test]
    fn spatial_kernel_psd_low_rank() {
        let mesh = shapes::horseshoe(1);
        let lap = cotan_laplacian(&mesh).unwrap();
        let basis = spectral_basis(&lap, 8).unwrap();
        let all: Vec<usize> = (0..mesh.num_vertices()).collect();
        let k = spatial_kernel(&basis, &theta(), &all, &all).unwrap();
        assert!((&k - k.transpose()).abs().max() < 1e-14);
        let eig = k.symmetric_eigenvalues();
        let max = eig.max();
        assert!(eig.min() >= -1e-8 * max);
        let rank = eig.iter().filter(|&&e| e > 1e-10 * max).count();
        assert!(rank <= 8);
    }

    #[test]
    fn spatial_kernel_converges_with_more_eigenpairs() {
        let mesh = shapes::icosphere(3);
        let lap = cotan_laplacian(&mesh).unwrap();
        let full = spectral_basis(&lap, 128).unwrap();
        let idx: Vec<usize> = (0..mesh.num_vertices()).step_by(7).collect();
        let th = HyperParams {
            length_space: 0.5,
            ..theta()
        };
        let k = |j: usize| spatial_kernel(&full.truncated(j).unwrap(), &th, &idx, &idx).unwrap();
        let (k8, k32, k128) = (k(8), k(32), k(128));
        let d1 = (&k32 - &k8).abs().max();
        let d2 = (&k128 - &k32).abs().max();
        assert!(d2 <= d1, "{d2} > {d1}");
    }

    #[test]
    fn euclidean_kernel_values() {
        let pts: Vec<Point3> = vec![
            [0.1, 0.2, 0.3],
            [1.0, -0.4, 0.2],
            [0.5, 0.5, 0.5],
            [-0.3, 0.9, 1.1],
            [0.0, 0.0, -1.0],
            [2.0, 1.0, 0.0],
        ];
        let th = theta();
        let idx: Vec<usize> = (0..6).collect();
        let k = euclidean_spatial_kernel(&pts, &th, &idx, &idx).unwrap();
        for i in 0..6 {
            assert_eq!(k[(i, i)], th.sigma_m);
            for j in 0..6 {
                let dx: f64 = (0..3).map(|c| (pts[i][c] - pts[j][c]).powi(2)).sum::<f64>().sqrt();
                let z = 3f64.sqrt() * dx / th.length_space;
                let naive = th.sigma_m * (1.0 + z) * (-z).exp();
                assert!((k[(i, j)] - naive).abs() < 1e-15);
            }
        }
        let eig = k.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-8 * eig.max());
    }

    #[test]
    fn unit_sigma_m_rescaling() {
        let th = theta();
        let u = th.with_unit_sigma_m();
        assert_eq!(u.sigma_m, 1.0);
        assert!((u.nugget_space * th.sigma_m - th.nugget_space).abs() < 1e-15);
        assert!((u.sigma_a - th.sigma_a * th.sigma_m).abs() < 1e-15);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("Laplacian".parse::<KernelKind>().unwrap(), KernelKind::Laplacian);
        assert_eq!("e-st-gp".parse::<KernelKind>().unwrap(), KernelKind::Euclidean);
        assert!("rbf".parse::<KernelKind>().is_err());
    }
}
