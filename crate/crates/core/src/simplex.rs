//! Fisher–Rao geometry on the open probability simplex and Euclidean
//! projections onto the closed simplex and boxes.

use crate::error::{Error, Result};

/// Coordinates below this are treated as lying on the simplex boundary.
pub const BOUNDARY_THRESHOLD: f64 = 1e-12;

/// Fisher–Rao exponential map at the interior point `phi` applied to the
/// tangent vector `x` (coordinates summing to zero).
///
/// With `x_phi = x / √phi` elementwise,
/// `exp_phi(x) = ½(phi + x_phi²/|x_phi|²) + ½(phi - x_phi²/|x_phi|²) cos|x_phi|
///               + sin|x_phi|/|x_phi| · x_phi ⊙ √phi`.
pub fn exp(phi: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != x.len() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if phi.iter().any(|&p| p <= BOUNDARY_THRESHOLD) {
        return Err(Error::InvalidInput("simplex point on the boundary".into()));
    }
    let mut out = vec![0.0; phi.len()];
    exp_into(phi, x, &mut out);
    Ok(out)
}

/// [`exp`] without validation, writing into `out`.
pub(crate) fn exp_into(phi: &[f64], x: &[f64], out: &mut [f64]) {
    let norm2: f64 = phi.iter().zip(x).map(|(p, v)| v * v / p).sum();
    if norm2 == 0.0 {
        out.copy_from_slice(phi);
        return;
    }
    let norm = norm2.sqrt();
    let (sin, cos) = norm.sin_cos();
    let mut total = 0.0;
    for ((o, &p), &v) in out.iter_mut().zip(phi).zip(x) {
        let sq = p.sqrt();
        let xp = v / sq;
        let ratio = xp * xp / norm2;
        *o = 0.5 * (p + ratio) + 0.5 * (p - ratio) * cos + sin / norm * xp * sq;
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Riemannian gradient `g ⊙ phi - (phiᵀ g) phi` from the Euclidean gradient `g`.
pub fn riemannian_gradient(phi: &[f64], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; phi.len()];
    riemannian_gradient_into(phi, g, &mut out);
    out
}

pub(crate) fn riemannian_gradient_into(phi: &[f64], g: &[f64], out: &mut [f64]) {
    let mean: f64 = phi.iter().zip(g).map(|(p, gi)| p * gi).sum();
    for ((o, &p), &gi) in out.iter_mut().zip(phi).zip(g) {
        *o = p * (gi - mean);
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
pub fn project(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out);
    out
}

/// In-place version of [`project`].
pub fn project_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (1.0 - cumsum) / (k + 1) as f64;
        if uk + t > 0.0 {
            shift = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x + shift).max(0.0);
    }
}

/// Componentwise clamp to `[lo, hi]`.
pub fn clip_box(v: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    debug_assert!(lo <= hi);
    v.iter().map(|x| x.clamp(lo, hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Maps the simplex to the radius-2 sphere octant via `p ↦ 2√p`, follows
    /// the great circle there and maps back by squaring.
    fn exp_via_sphere(phi: &[f64], x: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = phi.iter().map(|p| 2.0 * p.sqrt()).collect();
        let v: Vec<f64> = phi.iter().zip(x).map(|(p, xi)| xi / p.sqrt()).collect();
        let speed = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let angle = speed / 2.0;
        q.iter()
            .zip(&v)
            .map(|(qi, vi)| {
                let r = qi * angle.cos() + 2.0 * vi / speed * angle.sin();
                r * r / 4.0
            })
            .collect()
    }

    fn random_interior(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }

    fn random_tangent(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        x
    }

    #[test]
    fn exp_zero_and_direction() {
        let phi = [0.2, 0.3, 0.5];
        assert_eq!(exp(&phi, &[0.0; 3]).unwrap(), phi.to_vec());
        let out = exp(&[0.5, 0.5], &[0.01, -0.01]).unwrap();
        assert!(out[0] > 0.5);
        assert!(exp(&[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn exp_matches_sphere_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.random_range(2..7);
            let phi = random_interior(&mut rng, n);
            let x = random_tangent(&mut rng, n, 0.1);
            let a = exp(&phi, &x).unwrap();
            let b = exp_via_sphere(&phi, &x);
            for (ai, bi) in a.iter().zip(&b) {
                assert!((ai - bi).abs() < 1e-10);
            }
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn exp_has_tangent_as_initial_velocity() {
        let phi = [0.1, 0.6, 0.3];
        let x = [0.2, -0.5, 0.3];
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().map(|v| v * h).collect();
        let xm: Vec<f64> = x.iter().map(|v| -v * h).collect();
        let a = exp(&phi, &xp).unwrap();
        let b = exp(&phi, &xm).unwrap();
        for i in 0..3 {
            assert!(((a[i] - b[i]) / (2.0 * h) - x[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn gradient_examples() {
        let g = riemannian_gradient(&[0.2, 0.3, 0.5], &[4.0, 4.0, 4.0]);
        assert!(g.iter().all(|v| v.abs() < 1e-15));
        let g = riemannian_gradient(&[0.5, 0.5], &[1.0, 0.0]);
        assert_eq!(g, vec![0.25, -0.25]);
    }

    #[test]
    fn gradient_step_decreases_linear_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(2..7);
            let phi = random_interior(&mut rng, n);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let grad = riemannian_gradient(&phi, &c);
            let step: Vec<f64> = grad.iter().map(|g| -1e-3 * g).collect();
            let next = exp(&phi, &step).unwrap();
            assert!(f(&next) < f(&phi));
            assert!(grad.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project(&[0.5, 1.5]), vec![0.0, 1.0]);
        assert_eq!(clip_box(&[2.0, -3.0], -1.0, 1.0), vec![1.0, -1.0]);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            u in prop::collection::vec(-3.0f64..3.0, 1..8),
            shift in prop::collection::vec(-3.0f64..3.0, 8),
        ) {
            let v: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let pu = project(&u);
            let pv = project(&v);
            prop_assert!((pu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(pu.iter().all(|x| *x >= 0.0));
            let ppu = project(&pu);
            for (a, b) in ppu.iter().zip(&pu) {
                prop_assert!((a - b).abs() < 1e-14);
            }
            let d_in: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            let d_out: f64 = pu.iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn clip_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 0..10)) {
            let c = clip_box(&v, -1.0, 1.0);
            prop_assert_eq!(clip_box(&c, -1.0, 1.0), c);
        }
    }
}
