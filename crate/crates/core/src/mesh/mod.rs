//! Triangle meshes and the geometry operators built on them.
//!
//! A [`TriMesh`] is validated on construction: every face must reference
//! existing vertices, no face may be degenerate, and the edge graph must be
//! connected. Everything downstream (Laplacian, eigenbasis, geodesics) relies
//! on those guarantees.

mod geodesic;
mod laplacian;
mod off;
pub mod shapes;
mod spectral;

pub use geodesic::{geodesic_distances, min_geodesic_distances, GeodesicField};
pub use laplacian::{cotan_laplacian, CsrMatrix, LaplaceOperator};
pub use off::{load_mesh, parse_off, write_off};
pub use spectral::{spectral_basis, SpectralBasis};

use crate::error::{Error, Result};

/// Faces with area below this fraction of the squared bounding-box diagonal
/// are rejected.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

pub type Point3 = [f64; 3];

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    /// Sorted adjacency with Euclidean edge lengths.
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(Error::InvalidArgument("mesh has no vertices".into()));
        }
        for (v, p) in vertices.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("vertex {v} has non-finite coordinates")));
            }
        }
        let diag2 = bbox_diagonal_sq(&vertices);
        let min_area = DEGENERATE_AREA_RATIO * diag2;
        for (f, tri) in faces.iter().enumerate() {
            for &idx in tri {
                if idx >= n {
                    return Err(Error::FaceIndexOutOfRange {
                        face: f,
                        index: idx,
                        count: n,
                    });
                }
            }
            let [a, b, c] = *tri;
            if a == b || b == c || a == c {
                return Err(Error::DegenerateFace { face: f, area: 0.0 });
            }
            let area = triangle_area(&vertices[a], &vertices[b], &vertices[c]);
            if !(area > min_area) {
                return Err(Error::DegenerateFace { face: f, area });
            }
        }

        let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for tri in &faces {
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let len = distance(&vertices[i], &vertices[j]);
                neighbors[i].push((j, len));
                neighbors[j].push((i, len));
            }
        }
        for adj in &mut neighbors {
            adj.sort_by_key(|&(j, _)| j);
            adj.dedup_by_key(|&mut (j, _)| j);
        }

        let mesh = TriMesh {
            vertices,
            faces,
            neighbors,
        };
        mesh.check_connected()?;
        Ok(mesh)
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(vertex) => Err(Error::Disconnected {
                source_vertex: 0,
                vertex,
            }),
            None => Ok(()),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.neighbors[v]
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertices.len() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                index: v,
                count: self.vertices.len(),
            })
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Mean edge length over unique edges.
    pub fn mean_edge_length(&self) -> f64 {
        let (sum, count) = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&(j, _)| j > i))
            .fold((0.0, 0usize), |(s, c), &(_, len)| (s + len, c + 1));
        sum / count.max(1) as f64
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal_sq(&self.vertices).sqrt()
    }
}

pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

fn bbox_diagonal_sq(vertices: &[Point3]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum()
}
