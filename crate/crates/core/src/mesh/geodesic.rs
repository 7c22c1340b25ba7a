use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::TriMesh;
use crate::error::{Error, Result};

/// Shortest-path distances from one vertex along mesh edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    pub distances: Vec<f64>,
}

impl GeodesicField {
    /// `vertex_id,distance` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex_id,distance\n");
        for (i, d) in self.distances.iter().enumerate() {
            out.push_str(&format!("{i},{d:?}\n"));
        }
        out
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(mesh: &TriMesh, sources: &[usize]) -> Vec<f64> {
    let n = mesh.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry { dist: 0.0, vertex: s });
    }
    while let Some(Entry { dist: d, vertex: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in mesh.neighbors(v) {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry { dist: nd, vertex: w });
            }
        }
    }
    dist
}

pub fn geodesic_distances(mesh: &TriMesh, source: usize) -> Result<GeodesicField> {
    mesh.check_vertex(source)?;
    let distances = dijkstra(mesh, &[source]);
    if let Some(vertex) = distances.iter().position(|d| !d.is_finite()) {
        return Err(Error::Disconnected {
            source_vertex: source,
            vertex,
        });
    }
    Ok(GeodesicField { source, distances })
}

/// Distance from every vertex to the nearest of `sources` (multi-source
/// Dijkstra). Equals the elementwise minimum of the per-source fields.
pub fn min_geodesic_distances(mesh: &TriMesh, sources: &[usize]) -> Result<Vec<f64>> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no source vertices".into()));
    }
    for &s in sources {
        mesh.check_vertex(s)?;
    }
    let distances = dijkstra(mesh, sources);
    if let Some(vertex) = distances.iter().position(|d| !d.is_finite()) {
        return Err(Error::Disconnected {
            source_vertex: sources[0],
            vertex,
        });
    }
    Ok(distances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{distance, shapes};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force Bellman–Ford over the undirected edge list.
    fn bellman_ford(mesh: &TriMesh, source: usize) -> Vec<f64> {
        let n = mesh.num_vertices();
        let mut edges = Vec::new();
        for f in mesh.faces() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let len = distance(&mesh.vertices()[a], &mesh.vertices()[b]);
                edges.push((a, b, len));
                edges.push((b, a, len));
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for &(a, b, w) in &edges {
                if dist[a] + w < dist[b] {
                    dist[b] = dist[a] + w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    fn random_mesh(seed: u64) -> TriMesh {
        // 50 vertices: perturbed 5x10 grid lifted onto a random height field
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nx, ny) = (10usize, 5usize);
        let mut v = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                v.push([
                    i as f64 + rng.gen_range(-0.3..0.3),
                    j as f64 + rng.gen_range(-0.3..0.3),
                    rng.gen_range(-1.0..1.0),
                ]);
            }
        }
        let mut f = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let (b, c, d) = (a + 1, a + nx, a + nx + 1);
                if rng.gen_bool(0.5) {
                    f.push([a, b, d]);
                    f.push([a, d, c]);
                } else {
                    f.push([a, b, c]);
                    f.push([b, d, c]);
                }
            }
        }
        TriMesh::new(v, f).unwrap()
    }

    #[test]
    fn source_is_zero() {
        let mesh = shapes::icosphere(2);
        let g = geodesic_distances(&mesh, 17).unwrap();
        assert_eq!(g.distances[17], 0.0);
        assert!(g.distances.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn single_edge_distance() {
        let mesh = shapes::tetrahedron();
        let g = geodesic_distances(&mesh, 0).unwrap();
        assert_eq!(g.distances[1], 1.0);
        assert_eq!(g.distances[3], 1.0);
        assert!(geodesic_distances(&mesh, 4).is_err());
    }

    #[test]
    fn matches_bellman_ford_on_random_meshes() {
        for seed in 0..5 {
            let mesh = random_mesh(seed);
            assert_eq!(mesh.num_vertices(), 50);
            for source in [0, 13, 49] {
                let g = geodesic_distances(&mesh, source).unwrap();
                assert_eq!(g.distances, bellman_ford(&mesh, source));
            }
        }
    }

    #[test]
    fn multi_source_is_elementwise_min() {
        let mesh = shapes::horseshoe(2);
        let sources = [3, 77, 120];
        let multi = min_geodesic_distances(&mesh, &sources).unwrap();
        let fields: Vec<_> = sources
            .iter()
            .map(|&s| geodesic_distances(&mesh, s).unwrap().distances)
            .collect();
        for i in 0..mesh.num_vertices() {
            let m = fields.iter().map(|f| f[i]).fold(f64::INFINITY, f64::min);
            assert_eq!(multi[i], m);
        }
    }

    #[test]
    fn csv_export() {
        let g = geodesic_distances(&shapes::tetrahedron(), 0).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("vertex_id,distance\n0,0.0\n1,1.0\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn metric_properties(a in 0usize..162, b in 0usize..162, c in 0usize..162) {
            let mesh = shapes::horseshoe(2);
            let da = geodesic_distances(&mesh, a).unwrap().distances;
            let db = geodesic_distances(&mesh, b).unwrap().distances;
            prop_assert!((da[b] - db[a]).abs() <= 1e-12 * da[b].max(1.0));
            prop_assert!(da[c] <= da[b] + db[c] + 1e-12);
            let eu = distance(&mesh.vertices()[a], &mesh.vertices()[b]);
            prop_assert!(eu <= da[b] + 1e-12);
        }
    }
}
