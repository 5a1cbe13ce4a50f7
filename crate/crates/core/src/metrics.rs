//! Regularizer values, model objectives, hard labelings and the
//! area-weighted correctness score.

use crate::error::{Error, Result};
use crate::field::{argmax, AssignmentField};
use crate::labels::{LabelSet, SimilarityField};
use crate::mesh::{Geometry, TriangleMesh};
use crate::sphere::{self, Vec3};

/// Residual tolerance used when evaluating per-triangle centers of mass.
pub const CENTER_TOL: f64 = 1e-10;

/// `Σ_e |e| · |φ_{e+} - φ_{e-}|₁`.
pub fn tv_assignment(phi: &AssignmentField, mesh: &TriangleMesh, geom: &Geometry) -> f64 {
    mesh.edges()
        .iter()
        .zip(&geom.edge_lengths)
        .map(|(e, len)| {
            let a = phi.row(e.plus);
            let b = phi.row(e.minus);
            len * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
        })
        .sum()
}

/// Weighted center of mass of the labels on every triangle, each started
/// from the label carrying the largest weight.
pub fn centers_of_mass(phi: &AssignmentField, labels: &LabelSet) -> Result<Vec<Vec3>> {
    phi.iter_rows()
        .map(|w| {
            let init = labels.label(argmax(w));
            sphere::karcher_mean(w, labels.labels(), init, CENTER_TOL)
        })
        .collect()
}

/// `Σ_e |e| · d(m_{e+}, m_{e-})` for a field of centers.
pub fn tv_centers(centers: &[Vec3], mesh: &TriangleMesh, geom: &Geometry) -> f64 {
    mesh.edges()
        .iter()
        .zip(&geom.edge_lengths)
        .map(|(e, len)| len * sphere::distance(&centers[e.plus], &centers[e.minus]))
        .sum()
}

/// Label-space total variation: geodesic jumps of the per-triangle centers of mass.
pub fn tv_label(
    phi: &AssignmentField,
    labels: &LabelSet,
    mesh: &TriangleMesh,
    geom: &Geometry,
) -> Result<f64> {
    let centers = centers_of_mass(phi, labels)?;
    Ok(tv_centers(&centers, mesh, geom))
}

/// `Σ_T |T| φ_Tᵀ s_T`.
pub fn fidelity(phi: &AssignmentField, similarity: &SimilarityField, geom: &Geometry) -> f64 {
    phi.weighted_dot(similarity, &geom.areas)
}

pub fn objective_atv(
    phi: &AssignmentField,
    similarity: &SimilarityField,
    beta: f64,
    mesh: &TriangleMesh,
    geom: &Geometry,
) -> f64 {
    fidelity(phi, similarity, geom) + beta * tv_assignment(phi, mesh, geom)
}

pub fn objective_ltv(
    phi: &AssignmentField,
    similarity: &SimilarityField,
    beta: f64,
    labels: &LabelSet,
    mesh: &TriangleMesh,
    geom: &Geometry,
) -> Result<f64> {
    Ok(fidelity(phi, similarity, geom) + beta * tv_label(phi, labels, mesh, geom)?)
}

/// Per-triangle label index (0-based) of the largest assignment value.
pub fn hard_labels_atv(phi: &AssignmentField) -> Vec<usize> {
    phi.argmax_rows()
}

/// Per-triangle index of the label closest to the center `m_T`.
pub fn hard_labels_ltv(centers: &[Vec3], labels: &LabelSet) -> Vec<usize> {
    centers.iter().map(|m| labels.nearest(m)).collect()
}

/// Fraction of the total area on which `pred` and `reference` agree.
pub fn correctness(pred: &[usize], reference: &[usize], areas: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() || pred.len() != areas.len() {
        return Err(Error::InvalidInput(format!(
            "labeling lengths differ: {} / {} / {}",
            pred.len(),
            reference.len(),
            areas.len()
        )));
    }
    let total: f64 = areas.iter().sum();
    let agree: f64 =
        pred.iter().zip(reference).zip(areas).filter(|((a, b), _)| a == b).map(|(_, w)| w).sum();
    Ok(agree / total)
}

/// Number of distinct labels assigned to at least one triangle.
pub fn labels_used(hard: &[usize], n_labels: usize) -> usize {
    let mut seen = vec![false; n_labels];
    for &l in hard {
        seen[l] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

/// Number of labels covering at least `fraction` of the total area.
pub fn labels_used_by_area(hard: &[usize], areas: &[f64], n_labels: usize, fraction: f64) -> usize {
    let mut cover = vec![0.0; n_labels];
    for (&l, a) in hard.iter().zip(areas) {
        cover[l] += a;
    }
    let total: f64 = areas.iter().sum();
    cover.iter().filter(|&&c| c > 0.0 && c >= fraction * total).count()
}
