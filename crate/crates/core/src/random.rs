//! Seeded random operators.
//!
//! All randomness comes from ChaCha8 streams keyed by `(seed, stream)`, so a
//! trial is reproducible from its own pair regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{c, DensityMatrix, HermitianOperator, Matrix, Vector, C64};

/// Independent generator for `stream` under `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| C64::new(gaussian(rng), gaussian(rng)) * c(std::f64::consts::FRAC_1_SQRT_2))
}

/// GUE-distributed Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    let g = complex_gaussian_matrix(dim, dim, rng);
    HermitianOperator::from_matrix_unchecked((&g + g.adjoint()) * c(0.5))
}

/// Wishart-type positive semidefinite matrix with unit-scale entries.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    let g = complex_gaussian_matrix(dim, dim, rng);
    HermitianOperator::from_matrix_unchecked(&g * g.adjoint() * c(1.0 / dim as f64))
}

/// Random state of the given rank (`G G^H / Tr`).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = complex_gaussian_matrix(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    DensityMatrix::from_matrix_unchecked(m * c(1.0 / tr))
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    random_density(dim, 1, rng)
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R` removed.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    random_isometry(dim, dim, rng)
}

/// Haar-random isometry `cols -> rows` (`rows >= cols`).
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = complex_gaussian_matrix(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / c(d.norm()) } else { c(1.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Operator `0 ≤ P ≤ I` with uniformly drawn spectrum in `[0, 1]`.
pub fn random_contraction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    let u = random_unitary(dim, rng);
    let spectrum: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    HermitianOperator::from_real_diagonal(&spectrum).conjugate_by(&u)
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    let g = complex_gaussian_matrix(dim, 1, rng);
    let n = g.norm();
    g.column(0).into_owned() / c(n)
}

/// Probability vector drawn uniformly from the simplex.
pub fn random_distribution<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Gram-Schmidt on the columns; `None` if they are numerically dependent.
pub fn orthonormalize_columns(m: &Matrix) -> Option<Matrix> {
    let mut out = m.clone();
    for j in 0..out.ncols() {
        for _ in 0..2 {
            for k in 0..j {
                let proj = out.column(k).dotc(&out.column(j));
                let prev = out.column(k).into_owned();
                let mut col = out.column_mut(j);
                col -= prev * proj;
            }
        }
        let n = out.column(j).norm();
        if n < 1e-12 {
            return None;
        }
        let mut col = out.column_mut(j);
        col /= c(n);
    }
    Some(out)
}
