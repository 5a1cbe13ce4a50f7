//! Small synthetic meshes used by tests, the acceptance suite and the demo.

use std::f64::consts::PI;

use crate::labels::LabelSet;
use crate::mesh::TriangleMesh;
use crate::sphere::Vec3;

/// Closed triangular prism capped by pyramids, with both ring loops of
/// perimeter `perimeter`.
///
/// Returns the mesh and a band index per triangle: 0 for the top cap,
/// 1 for the side band and 2 for the bottom cap. The two interfaces between
/// consecutive bands are the ring loops.
pub fn banded_prism(perimeter: f64) -> (TriangleMesh, Vec<usize>) {
    let side = perimeter / 3.0;
    let radius = side / 3f64.sqrt();
    let ring = |z: f64| -> Vec<Vec3> {
        (0..3)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 3.0;
                Vec3::new(radius * a.cos(), radius * a.sin(), z)
            })
            .collect()
    };
    let mut vertices = ring(0.5);
    vertices.extend(ring(-0.5));
    vertices.push(Vec3::new(0.0, 0.0, 1.0));
    vertices.push(Vec3::new(0.0, 0.0, -1.0));
    let (top, bottom) = (6, 7);

    let mut triangles = Vec::new();
    let mut bands = Vec::new();
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        triangles.push([top, a, b]);
        bands.push(0);
    }
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        let (c, d) = (a + 3, b + 3);
        triangles.push([a, c, d]);
        triangles.push([a, d, b]);
        bands.extend([1, 1]);
    }
    for k in 0..3 {
        let (a, b) = (k + 3, (k + 1) % 3 + 3);
        triangles.push([bottom, b, a]);
        bands.push(2);
    }
    let mesh = TriangleMesh::new(vertices, triangles).expect("prism is a closed manifold");
    (mesh, bands)
}

/// Two orthogonal labels and the direction halfway between them.
pub fn example_labels() -> LabelSet {
    LabelSet::new(vec![Vec3::x(), Vec3::y(), (Vec3::x() + Vec3::y()) / 2f64.sqrt()])
        .expect("nonzero labels")
}
