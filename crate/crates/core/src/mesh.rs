//! Closed, oriented, manifold triangle meshes with fixed edge sidedness.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sphere::Vec3;

/// An undirected edge together with its two incident triangles.
///
/// `plus` is always the lower triangle index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: usize,
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh and its edge adjacency.
    ///
    /// Edges are sorted by their (ascending) endpoint pair. Every edge must be
    /// shared by exactly two triangles that traverse it in opposite directions.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidInput(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle { index: t, area: 0.0 });
            }
        }

        // (lo, hi) -> [(triangle, traversed lo->hi)]
        let mut incidence: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                incidence.entry(key).or_default().push((t, a < b));
            }
        }

        let mut edges = Vec::with_capacity(incidence.len());
        let mut slots = vec![0usize; triangles.len()];
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for ((a, b), incident) in incidence {
            match incident.len() {
                1 => return Err(Error::BoundaryEdge { a, b }),
                2 => {}
                count => return Err(Error::NonManifoldEdge { a, b, count }),
            }
            let (t0, d0) = incident[0];
            let (t1, d1) = incident[1];
            if d0 == d1 {
                return Err(Error::InconsistentOrientation { first: t0, second: t1 });
            }
            if t0 == t1 {
                return Err(Error::NonManifoldEdge { a, b, count: 2 });
            }
            let e = edges.len();
            edges.push(Edge { vertices: [a, b], plus: t0.min(t1), minus: t0.max(t1) });
            for t in [t0, t1] {
                triangle_edges[t][slots[t]] = e;
                slots[t] += 1;
            }
        }

        Ok(Self { vertices, triangles, edges, triangle_edges })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// The three edges of each triangle, in ascending edge order.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len());
        Self { vertices, ..self.clone() }
    }

    /// Mean length of the edges incident to each vertex.
    pub fn mean_incident_edge_length(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.vertices.len()];
        let mut count = vec![0usize; self.vertices.len()];
        for e in &self.edges {
            let [a, b] = e.vertices;
            let len = (self.vertices[a] - self.vertices[b]).norm();
            for v in [a, b] {
                sum[v] += len;
                count[v] += 1;
            }
        }
        sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
    }

    fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }
}

/// Per-triangle areas and unit normals, per-edge lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub areas: Vec<f64>,
    pub edge_lengths: Vec<f64>,
    pub normals: Vec<Vec3>,
}

impl Geometry {
    pub fn compute(mesh: &TriangleMesh) -> Result<Self> {
        let scale = mesh.bounding_box_diagonal();
        let min_area = 1e-14 * scale * scale;
        let mut areas = Vec::with_capacity(mesh.num_triangles());
        let mut normals = Vec::with_capacity(mesh.num_triangles());
        for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
            let p = &mesh.vertices;
            let cross = (p[b] - p[a]).cross(&(p[c] - p[a]));
            let norm = cross.norm();
            let area = 0.5 * norm;
            if !(area >= min_area) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
            areas.push(area);
            normals.push(cross / norm);
        }
        let edge_lengths = mesh
            .edges
            .iter()
            .map(|e| (mesh.vertices[e.vertices[0]] - mesh.vertices[e.vertices[1]]).norm())
            .collect();
        Ok(Self { areas, edge_lengths, normals })
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
}

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
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

/// Icosahedron refined `subdivisions` times by 1-to-4 midpoint splits, with
/// every vertex projected to the sphere of the given radius.
pub fn icosphere(subdivisions: u32, radius: f64) -> Result<TriangleMesh> {
    if subdivisions > 8 {
        return Err(Error::InvalidInput("at most 8 subdivisions are supported".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
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
    ]
    .iter()
    .map(|&[x, y, z]| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces = ICOSAHEDRON_FACES.to_vec();

    for _ in 0..subdivisions {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriangleMesh::new(vertices, faces)
}

/// Perturbs every vertex coordinate by an independent Gaussian sample with
/// variance `variance_factor · e²`, where `e` is the mean length of the edges
/// incident to that vertex. Connectivity is unchanged.
pub fn add_vertex_noise(mesh: &TriangleMesh, variance_factor: f64, seed: u64) -> TriangleMesh {
    assert!(variance_factor >= 0.0, "variance factor must be nonnegative");
    if variance_factor == 0.0 {
        return mesh.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = mesh.mean_incident_edge_length();
    let vertices = mesh
        .vertices
        .iter()
        .zip(&scale)
        .map(|(v, e)| {
            let sigma = variance_factor.sqrt() * e;
            let mut d = Vec3::zeros();
            for k in 0..3 {
                let z: f64 = StandardNormal.sample(&mut rng);
                d[k] = sigma * z;
            }
            v + d
        })
        .collect();
    mesh.with_vertices(vertices)
}
