//! Small dense-vector helpers on slices.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    scale(a, 1.0 / norm(a))
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Unit basis vector `e_k` in `R^n`.
pub fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Angular momentum of `(r, p)`: the signed scalar `r x p` in the plane,
/// the norm of the bivector `r ^ p` in higher dimensions.
pub fn angular_momentum(r: &[f64], p: &[f64]) -> f64 {
    if r.len() == 2 {
        r[0] * p[1] - r[1] * p[0]
    } else {
        // Sum over components rather than |r|²|p|² - <r, p>², which cancels
        // catastrophically for nearly parallel r and p.
        let mut sum = 0.0;
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                let w = r[i] * p[j] - r[j] * p[i];
                sum += w * w;
            }
        }
        sum.sqrt()
    }
}

/// Component of the bivector `r ^ p` on the oriented plane spanned by the
/// orthonormal pair `(a, b)`.
pub fn planar_angular_momentum(r: &[f64], p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    dot(r, a) * dot(p, b) - dot(r, b) * dot(p, a)
}

/// Smallest eigenvalue of the Gram matrix of `vectors`.
pub fn gram_min_eigenvalue(vectors: &[Vec<f64>]) -> f64 {
    let k = vectors.len();
    let g = DMatrix::from_fn(k, k, |i, j| dot(&vectors[i], &vectors[j]));
    SymmetricEigen::new(g).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Deterministic quasi-uniform points on the unit 2-sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            vec![rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Deterministic sample of `count` unit vectors in dimension `dim`: an
/// equally spaced circle for `dim = 2`, a Fibonacci lattice for `dim = 3`,
/// seeded uniform draws otherwise.
pub fn sphere_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => fibonacci_sphere(count),
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(dim as u64);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm(&v);
                if n > 1e-3 && n <= 1.0 {
                    out.push(scale(&v, 1.0 / n));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_of_orthonormal_pair() {
        let m = gram_min_eigenvalue(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert!((m - 1.0).abs() < 1e-14);
        let degenerate = gram_min_eigenvalue(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(degenerate.abs() < 1e-12);
    }

    #[test]
    fn fibonacci_points_are_unit() {
        for p in fibonacci_sphere(962) {
            assert!((norm(&p) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn angular_momentum_conventions() {
        assert_eq!(angular_momentum(&[1.0, 0.0], &[0.0, 2.0]), 2.0);
        assert_eq!(angular_momentum(&[1.0, 0.0, 0.0], &[0.0, 0.0, -3.0]), 3.0);
        let l = planar_angular_momentum(&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(l, 2.0);
    }
}
