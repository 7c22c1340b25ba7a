//! Procedural meshes used by tests and the desk-scale benchmark.

use std::collections::HashMap;

use super::{Point3, TriMesh};

pub fn tetrahedron() -> TriMesh {
    let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let f = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriMesh::new(v, f).expect("tetrahedron is valid")
}

/// Regular grid on `[0,1]^2` (z = 0) with `cells` squares per side, each
/// split along the same diagonal.
pub fn unit_square_grid(cells: usize) -> TriMesh {
    assert!(cells >= 1);
    let n = cells + 1;
    let h = 1.0 / cells as f64;
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            v.push([i as f64 * h, j as f64 * h, 0.0]);
        }
    }
    let mut f = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            let b = a + 1;
            let c = a + n;
            let d = c + 1;
            f.push([a, b, d]);
            f.push([a, d, c]);
        }
    }
    TriMesh::new(v, f).expect("grid is valid")
}

/// Unit icosphere: icosahedron refined `subdivisions` times with vertices
/// projected onto the sphere. Vertex count is `10 * 4^s + 2`.
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Point3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for p in &mut v {
        normalize(p);
    }
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<Point3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let mut p = [
                    0.5 * (v[a][0] + v[b][0]),
                    0.5 * (v[a][1] + v[b][1]),
                    0.5 * (v[a][2] + v[b][2]),
                ];
                normalize(&mut p);
                v.push(p);
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(f.len() * 4);
        for &[a, b, c] in &f {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        f = next;
    }
    TriMesh::new(v, f).expect("icosphere is valid")
}

/// Closed, elongated and bent surface: an icosphere stretched into a
/// capsule and wrapped around an arc so that its two ends come close in
/// space while staying far apart along the surface. Used as a desk-scale
/// stand-in for a ventricular geometry.
pub fn horseshoe(subdivisions: usize) -> TriMesh {
    let sphere = icosphere(subdivisions);
    let half_length = 2.5;
    let tube = 0.45;
    let bend_radius = 1.0;
    let v = sphere
        .vertices()
        .iter()
        .map(|&[x, y, z]| {
            let s = half_length * x;
            let angle = s / bend_radius;
            let r = bend_radius + tube * y;
            [r * angle.sin(), -r * angle.cos(), tube * z]
        })
        .collect();
    TriMesh::new(v, sphere.faces().to_vec()).expect("horseshoe is valid")
}

/// Open cylindrical band of radius 1 and height `height`, spanning the arc
/// `[gap/2, 2π − gap/2]`, so its two edges face each other across a gap of
/// chord length `2 sin(gap/2)` while being `2π − gap` apart along the
/// surface. Built from a structured grid of right triangles (no obtuse
/// angles), so the cotangent weights are nonnegative.
pub fn slit_band(cells_around: usize, cells_height: usize, height: f64, gap: f64) -> TriMesh {
    assert!(cells_around >= 1 && cells_height >= 1);
    assert!(height > 0.0 && gap > 0.0 && gap < 2.0 * std::f64::consts::PI);
    let (na, nh) = (cells_around + 1, cells_height + 1);
    let span = 2.0 * std::f64::consts::PI - gap;
    let mut v = Vec::with_capacity(na * nh);
    for j in 0..nh {
        let z = height * j as f64 / cells_height as f64;
        for i in 0..na {
            let phi = gap / 2.0 + span * i as f64 / cells_around as f64;
            v.push([phi.cos(), phi.sin(), z]);
        }
    }
    let mut f = Vec::with_capacity(2 * cells_around * cells_height);
    for j in 0..cells_height {
        for i in 0..cells_around {
            let a = j * na + i;
            let (b, c) = (a + 1, a + na);
            let d = c + 1;
            // alternate the diagonal so the band has no preferred direction
            if (i + j) % 2 == 0 {
                f.push([a, b, d]);
                f.push([a, d, c]);
            } else {
                f.push([a, b, c]);
                f.push([b, d, c]);
            }
        }
    }
    TriMesh::new(v, f).expect("band is valid")
}

/// The default desk-scale benchmark geometry: a 56 × 15 cell slit band
/// (912 vertices) of height 1.5 with a 0.7 rad gap.
pub fn desk_band() -> TriMesh {
    slit_band(56, 15, 1.5, 0.7)
}

fn normalize(p: &mut Point3) {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    for c in p.iter_mut() {
        *c /= n;
    }
}
