use nalgebra::DMatrix;

use super::{cross, dot, norm, sub, TriMesh};
use crate::error::{Error, Result};

/// Compressed sparse row storage for the symmetric stiffness matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Cotangent stiffness `C` (positive semidefinite) and lumped mass `M`.
/// The surface Laplacian acts as `Δu = -M⁻¹ C u`.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
}

impl LaplaceOperator {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Applies the discrete Laplace–Beltrami operator `-M⁻¹ C u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut cu = self.stiffness.mul_vec(u);
        for (x, m) in cu.iter_mut().zip(&self.mass) {
            *x = -*x / m;
        }
        cu
    }

    /// Gershgorin bound on the largest eigenvalue of `M⁻¹ C`.
    pub fn max_eigenvalue_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.stiffness.row(i).map(|(_, v)| v.abs()).sum::<f64>() / self.mass[i])
            .fold(0.0, f64::max)
    }
}

pub fn cotan_laplacian(mesh: &TriMesh) -> Result<LaplaceOperator> {
    let n = mesh.num_vertices();
    let verts = mesh.vertices();
    let mut off_diag: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.num_faces() * 6);
    let mut mass = vec![0.0; n];

    for (f, tri) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(f);
        if !(area > 0.0) {
            return Err(Error::DegenerateFace { face: f, area });
        }
        for k in 0..3 {
            let o = tri[k];
            let i = tri[(k + 1) % 3];
            let j = tri[(k + 2) % 3];
            let e1 = sub(&verts[i], &verts[o]);
            let e2 = sub(&verts[j], &verts[o]);
            let cot = dot(&e1, &e2) / norm(&cross(&e1, &e2));
            let w = 0.5 * cot;
            off_diag.push((i, j, -w));
            off_diag.push((j, i, -w));
        }
        for &v in tri {
            mass[v] += area / 3.0;
        }
    }

    // Diagonal is minus the assembled off-diagonal row sum so rows vanish.
    let off = CsrMatrix::from_triplets(n, off_diag);
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(off.nnz() + n);
    for i in 0..n {
        let mut s = 0.0;
        for (j, v) in off.row(i) {
            triplets.push((i, j, v));
            s += v;
        }
        triplets.push((i, i, -s));
    }
    Ok(LaplaceOperator {
        stiffness: CsrMatrix::from_triplets(n, triplets),
        mass,
    })
}
