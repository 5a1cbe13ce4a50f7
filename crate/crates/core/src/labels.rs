//! Label sets on S² and the per-triangle fidelity (geodesic distance) field.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::LabelField;
use crate::sphere::{self, Vec3};

/// Prescribed unit label directions with their pairwise geodesic distances.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    labels: Vec<Vec3>,
    distances: Vec<f64>,
}

impl LabelSet {
    /// Normalizes every direction; fails on an empty set or a zero vector.
    pub fn new(directions: Vec<Vec3>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidInput("label set is empty".into()));
        }
        let labels = directions
            .into_iter()
            .map(|v| {
                sphere::normalize(v).ok_or_else(|| Error::InvalidInput("zero label vector".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = labels.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = sphere::distance(&labels[i], &labels[j]);
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Ok(Self { labels, distances })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Vec3] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &Vec3 {
        &self.labels[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.labels.len() + j]
    }

    /// Index of the label closest to `v`, lowest index on ties.
    pub fn nearest(&self, v: &Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, g) in self.labels.iter().enumerate() {
            let d = sphere::distance(v, g);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Parses `x,y,z` rows. Rows are renormalized; a row whose norm deviates
    /// from one by more than 1e-3 is rejected. A non-numeric first row is
    /// treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
            let v = match parsed {
                Some(v) if v.len() == 3 => Vec3::new(v[0], v[1], v[2]),
                None if out.is_empty() && i == 0 => continue,
                _ => {
                    return Err(Error::Parse { line: i + 1, msg: "expected three numbers x,y,z".into() })
                }
            };
            if (v.norm() - 1.0).abs() > 1e-3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("label norm {} is not 1", v.norm()),
                });
            }
            out.push(v);
        }
        Self::new(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,z\n");
        for g in &self.labels {
            writeln!(s, "{:?},{:?},{:?}", g.x, g.y, g.z).unwrap();
        }
        s
    }
}

/// `n_equator` labels equally spaced on the equator at
/// `(sin(2πℓ/n), cos(2πℓ/n), 0)` for `ℓ = 1..=n`, followed by the north and
/// south poles.
pub fn equator_pole_labels(n_equator: usize) -> Result<LabelSet> {
    if n_equator < 2 {
        return Err(Error::InvalidInput("need at least two equatorial labels".into()));
    }
    let mut v: Vec<Vec3> = (1..=n_equator)
        .map(|l| {
            let a = l as f64 * 2.0 * PI / n_equator as f64;
            Vec3::new(a.sin(), a.cos(), 0.0)
        })
        .collect();
    v.push(Vec3::z());
    v.push(-Vec3::z());
    LabelSet::new(v)
}

/// Spherical Fibonacci lattice with the half-offset heights
/// `z_i = 1 - (2i + 1)/L` and golden-angle azimuth steps.
pub fn fibonacci_labels(count: usize) -> Result<LabelSet> {
    if count == 0 {
        return Err(Error::InvalidInput("need at least one label".into()));
    }
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let v = (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = 2.0 * PI * i as f64 / (golden * golden);
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect();
    LabelSet::new(v)
}

/// Per-triangle geodesic distances `s[T][ℓ] = d(n_T, g_ℓ)`.
pub type SimilarityField = LabelField;

pub fn similarity_field(normals: &[Vec3], labels: &LabelSet) -> SimilarityField {
    let l = labels.len();
    let mut f = LabelField::zeros(normals.len(), l);
    for (row, n) in f.iter_rows_mut().zip(normals) {
        for (s, g) in row.iter_mut().zip(labels.labels()) {
            *s = sphere::distance(n, g);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::tests_support::random_unit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equator_pole_layout() {
        let l = equator_pole_labels(20).unwrap();
        assert_eq!(l.len(), 22);
        assert_eq!(*l.label(20), Vec3::z());
        assert_eq!(*l.label(21), -Vec3::z());
        for i in 0..20 {
            assert!((l.distance(i, 20) - PI / 2.0).abs() < 1e-15);
            assert!((l.distance(i, 21) - PI / 2.0).abs() < 1e-15);
        }
        let four = equator_pole_labels(4).unwrap();
        for i in 0..4 {
            assert!((four.distance(i, (i + 1) % 4) - PI / 2.0).abs() < 1e-15);
        }
        assert!(equator_pole_labels(1).is_err());
    }

    #[test]
    fn distance_table_is_a_metric_table() {
        let l = fibonacci_labels(17).unwrap();
        for i in 0..17 {
            assert_eq!(l.distance(i, i), 0.0);
            for j in 0..17 {
                assert_eq!(l.distance(i, j), l.distance(j, i));
            }
        }
    }

    #[test]
    fn fibonacci_properties() {
        let one = fibonacci_labels(1).unwrap();
        assert_eq!(one.label(0).z, 0.0);
        let l = fibonacci_labels(50).unwrap();
        assert!(l.labels().iter().all(|g| (g.norm() - 1.0).abs() < 1e-12));
        let mut min_d = f64::INFINITY;
        for i in 0..50 {
            for j in i + 1..50 {
                min_d = min_d.min(l.distance(i, j));
            }
        }
        assert!(min_d >= 0.8 * (4.0 * PI / 50.0).sqrt(), "min distance {min_d}");
        assert_eq!(fibonacci_labels(50).unwrap(), l);
    }

    #[test]
    fn similarity_examples() {
        let labels = equator_pole_labels(4).unwrap();
        let normals = vec![*labels.label(2), -*labels.label(4)];
        let s = similarity_field(&normals, &labels);
        assert_eq!(s.row(0)[2], 0.0);
        assert!(s.row(0).iter().enumerate().all(|(i, v)| i == 2 || *v > 0.0));
        assert!((s.row(1)[4] - PI).abs() < 1e-15);
    }

    #[test]
    fn similarity_argmin_matches_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let labels = fibonacci_labels(30).unwrap();
        let normals: Vec<Vec3> = (0..500).map(|_| random_unit(&mut rng)).collect();
        let s = similarity_field(&normals, &labels);
        for (n, best) in normals.iter().zip(s.argmin_rows()) {
            let oracle = (0..30)
                .max_by(|&a, &b| n.dot(labels.label(a)).total_cmp(&n.dot(labels.label(b))))
                .unwrap();
            assert_eq!(best, oracle);
        }
    }

    #[test]
    fn similarity_permutes_with_labels() {
        let labels = fibonacci_labels(6).unwrap();
        let perm = [3, 0, 5, 1, 4, 2];
        let permuted = LabelSet::new(perm.iter().map(|&i| *labels.label(i)).collect()).unwrap();
        let normals = vec![Vec3::new(0.3, 0.4, 0.5).normalize(), Vec3::new(-1.0, 0.2, 0.0).normalize()];
        let a = similarity_field(&normals, &labels);
        let b = similarity_field(&normals, &permuted);
        for t in 0..2 {
            for (k, &i) in perm.iter().enumerate() {
                assert_eq!(b.row(t)[k], a.row(t)[i]);
            }
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let l = fibonacci_labels(7).unwrap();
        assert_eq!(LabelSet::from_csv(&l.to_csv()).unwrap(), l);
        assert!(LabelSet::from_csv("1,0,0\n0,2,0\n").is_err());
        let nearly = LabelSet::from_csv("1.0005,0,0\n").unwrap();
        assert_eq!(*nearly.label(0), Vec3::x());
    }
}
