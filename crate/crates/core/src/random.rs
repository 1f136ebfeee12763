//! Seeded random helpers; every randomized routine takes an explicit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::decomp::svd;
use crate::linalg::{Matrix, SymMatrix};

pub type FexRng = ChaCha8Rng;

pub fn rng(seed: u64) -> FexRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for the `k`-th sub-task of a seeded run (splitmix64).
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut FexRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut FexRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn unit_vector(rng: &mut FexRng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let nv = crate::linalg::norm(&v);
        if nv > 1e-8 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

pub fn gaussian_matrix(rng: &mut FexRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, gaussian_vec(rng, rows * cols)).expect("sized")
}

/// Symmetric matrix with independent N(0, 1) entries on and below the diagonal.
pub fn sym_gaussian(rng: &mut FexRng, n: usize) -> SymMatrix {
    SymMatrix::from_lower(gaussian_matrix(rng, n, n)).expect("square")
}

/// Orthogonal matrix from the SVD of a Gaussian matrix.
pub fn orthogonal(rng: &mut FexRng, n: usize) -> Matrix {
    let g = gaussian_matrix(rng, n, n);
    let s = svd(&g).expect("Jacobi SVD converges on Gaussian input");
    let u = s.range_vectors(0.0);
    u.matmul(&s.right.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut r = rng(3);
        let q = orthogonal(&mut r, 5);
        let e = &q.tr_matmul(&q) - &Matrix::identity(5);
        assert!(e.max_abs() < 1e-12);
    }

    #[test]
    fn seeds_reproduce() {
        assert_eq!(gaussian_vec(&mut rng(9), 4), gaussian_vec(&mut rng(9), 4));
    }
}
