//! Row-major storage for one fixed-width vector per mesh entity.

/// `rows × width` scalars stored contiguously, one row per triangle or edge.
///
/// Used for assignment fields (one simplex point per triangle), similarity
/// fields and the Chambolle–Pock dual variable (one vector per edge).
#[derive(Clone, Debug, PartialEq)]
pub struct LabelField {
    width: usize,
    data: Vec<f64>,
}

pub type AssignmentField = LabelField;
pub type DualEdgeField = LabelField;

impl LabelField {
    pub fn zeros(rows: usize, width: usize) -> Self {
        Self { width, data: vec![0.0; rows * width] }
    }

    pub fn from_vec(width: usize, data: Vec<f64>) -> Self {
        assert!(width > 0 && data.len() % width == 0, "data length must be a multiple of width");
        Self { width, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let width = rows.first().map_or(1, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            assert_eq!(r.as_ref().len(), width);
            data.extend_from_slice(r.as_ref());
        }
        Self { width, data }
    }

    /// One-hot rows at the given indices.
    pub fn one_hot(indices: &[usize], width: usize) -> Self {
        let mut f = Self::zeros(indices.len(), width);
        for (r, &i) in indices.iter().enumerate() {
            f.row_mut(r)[i] = 1.0;
        }
        f
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.width
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.width..(r + 1) * self.width]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.width)
    }

    pub fn iter_rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the largest entry in each row, lowest index on ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.iter_rows().map(|r| argmax(r)).collect()
    }

    /// Index of the smallest entry in each row, lowest index on ties.
    pub fn argmin_rows(&self) -> Vec<usize> {
        self.iter_rows().map(|r| argmin(r)).collect()
    }

    /// Weighted inner product `Σ_r w_r ⟨u_r, v_r⟩`.
    pub fn weighted_dot(&self, other: &Self, weights: &[f64]) -> f64 {
        assert_eq!(self.width, other.width);
        self.iter_rows()
            .zip(other.iter_rows())
            .zip(weights)
            .map(|((a, b), w)| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn weighted_norm(&self, weights: &[f64]) -> f64 {
        self.weighted_dot(self, weights).sqrt()
    }
}

pub(crate) fn argmax(r: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in r.iter().enumerate() {
        if v > r[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmin(r: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in r.iter().enumerate() {
        if v < r[best] {
            best = i;
        }
    }
    best
}
