//! Dense and iterative linear algebra used by the numerics.
//!
//! Below `DENSE_LIMIT` everything goes through nalgebra factorizations; above
//! it, solves use BiCGSTAB, the ground energy uses Lanczos and norms use power
//! iteration from a fixed seed.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{Csr, SparseOperator};
use crate::error::{Error, Result};

pub const DENSE_LIMIT: usize = 2000;

const POWER_SEED: u64 = 0x5eed;

/// Largest singular value.
pub fn op_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues through a complex Schur decomposition, no symmetry assumed.
pub fn general_eigenvalues(m: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    Schur::new(m.clone()).eigenvalues().map(|v| v.iter().copied().collect())
}

pub fn inverse(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("LU factorization found a zero pivot".into()))
}

/// `(H - shift - z)^{-1}` for a dense matrix.
pub fn dense_resolvent(h: &DMatrix<Complex64>, shift: f64, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    let mut m = h.clone();
    for i in 0..n {
        m[(i, i)] -= Complex64::new(shift, 0.0) + z;
    }
    inverse(&m)
}

fn random_unit(dim: usize, seed: u64) -> DVector<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Lowest eigenvalue of a Hermitian sparse matrix by Lanczos with full
/// reorthogonalization.
pub fn lanczos_min_eigenvalue(a: &Csr, max_iter: usize, tol: f64) -> f64 {
    let n = a.dim;
    let m = max_iter.min(n);
    let mut basis: Vec<DVector<Complex64>> = vec![random_unit(n, POWER_SEED)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::INFINITY;
    for j in 0..m {
        let mut w = a.matvec(&basis[j]);
        let aj = basis[j].dotc(&w).re;
        alpha.push(aj);
        for v in &basis {
            let c = v.dotc(&w);
            w -= v * c;
        }
        let bj = w.norm();
        let t = DMatrix::from_fn(alpha.len(), alpha.len(), |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let lowest = SymmetricEigen::new(t)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if (lowest - last).abs() < tol || bj < 1e-14 {
            return lowest;
        }
        last = lowest;
        beta.push(bj);
        basis.push(w / Complex64::new(bj, 0.0));
    }
    last
}

/// Solves `A x = b` with BiCGSTAB, `A` given by its action.
pub fn bicgstab(
    apply: &dyn Fn(&DVector<Complex64>) -> DVector<Complex64>,
    b: &DVector<Complex64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<Complex64>> {
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(DVector::zeros(b.len()));
    }
    let mut x = DVector::zeros(b.len());
    let mut r = b - apply(&x);
    let r_hat = r.clone();
    let mut rho = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    let mut v = DVector::zeros(b.len());
    let mut p = DVector::zeros(b.len());
    for _ in 0..max_iter {
        let rho_new = r_hat.dotc(&r);
        if rho_new.norm() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        p = &r + (&p - &v * omega) * beta;
        v = apply(&p);
        alpha = rho_new / r_hat.dotc(&v);
        let s = &r - &v * alpha;
        if s.norm() <= tol * bnorm {
            x += &p * alpha;
            return Ok(x);
        }
        let t = apply(&s);
        omega = t.dotc(&s) / t.dotc(&t);
        x += &p * alpha + &s * omega;
        r = &s - &t * omega;
        rho = rho_new;
        if r.norm() <= tol * bnorm {
            return Ok(x);
        }
    }
    Err(Error::Singular("BiCGSTAB did not reach the tolerance".into()))
}

/// `‖A‖` from power iteration on `A†A`.
pub fn power_norm(
    apply: &dyn Fn(&DVector<Complex64>) -> Result<DVector<Complex64>>,
    apply_adjoint: &dyn Fn(&DVector<Complex64>) -> Result<DVector<Complex64>>,
    dim: usize,
    iterations: usize,
) -> Result<f64> {
    let mut v = random_unit(dim, POWER_SEED);
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let w = apply_adjoint(&apply(&v)?)?;
        let n = w.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        estimate = n.sqrt();
        v = w / Complex64::new(n, 0.0);
    }
    Ok(estimate)
}

/// Lowest eigenvalue of a Hermitian operator, dense or Lanczos by size.
pub fn ground_energy(h: &SparseOperator) -> f64 {
    if h.dim() < DENSE_LIMIT {
        hermitian_eigenvalues(&h.to_dense())[0]
    } else {
        lanczos_min_eigenvalue(&h.to_csr(), 300, 1e-12)
    }
}

/// `‖(H1 - s1 - z)^{-1} - (H2 - s2 - z)^{-1}‖` for Hermitian `H1`, `H2`.
pub fn resolvent_difference_norm(
    h1: &SparseOperator,
    s1: f64,
    h2: &SparseOperator,
    s2: f64,
    z: Complex64,
) -> Result<f64> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch {
            expected: h1.dim(),
            got: h2.dim(),
        });
    }
    if h1.dim() < DENSE_LIMIT {
        let r1 = dense_resolvent(&h1.to_dense(), s1, z)?;
        let r2 = dense_resolvent(&h2.to_dense(), s2, z)?;
        return Ok(op_norm(&(r1 - r2)));
    }
    let (c1, c2) = (h1.to_csr(), h2.to_csr());
    let solve = |c: &Csr, shift: Complex64, b: &DVector<Complex64>| {
        let op = |x: &DVector<Complex64>| c.matvec(x) - x * shift;
        bicgstab(&op, b, 1e-12, 5000)
    };
    let zc = z.conj();
    let apply = |x: &DVector<Complex64>| -> Result<DVector<Complex64>> {
        Ok(solve(&c1, Complex64::new(s1, 0.0) + z, x)? - solve(&c2, Complex64::new(s2, 0.0) + z, x)?)
    };
    let apply_adj = |x: &DVector<Complex64>| -> Result<DVector<Complex64>> {
        Ok(solve(&c1, Complex64::new(s1, 0.0) + zc, x)? - solve(&c2, Complex64::new(s2, 0.0) + zc, x)?)
    };
    power_norm(&apply, &apply_adj, h1.dim(), 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn symmetric_and_general_solvers_agree() {
        let m = herm(12, 3);
        let sym = hermitian_eigenvalues(&m);
        let mut gen: Vec<f64> = general_eigenvalues(&m).unwrap().iter().map(|c| c.re).collect();
        gen.sort_by(f64::total_cmp);
        for (a, b) in sym.iter().zip(&gen) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let m = herm(40, 9);
        let sparse = SparseOperator::from_dense(&m, 0.0);
        let lz = lanczos_min_eigenvalue(&sparse.to_csr(), 40, 1e-13);
        assert!((lz - hermitian_eigenvalues(&m)[0]).abs() < 1e-9);
    }

    #[test]
    fn bicgstab_solves_shifted_system() {
        let m = herm(30, 4);
        let csr = SparseOperator::from_dense(&m, 0.0).to_csr();
        let shift = Complex64::new(-8.0, 0.5);
        let b = random_unit(30, 1);
        let op = |x: &DVector<Complex64>| csr.matvec(x) - x * shift;
        let x = bicgstab(&op, &b, 1e-13, 500).unwrap();
        assert!((op(&x) - &b).norm() < 1e-11);
    }

    #[test]
    fn power_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(10, 10, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
        let adj = a.adjoint();
        let est = power_norm(&|x| Ok(&a * x), &|x| Ok(&adj * x), 10, 500).unwrap();
        assert!((est - op_norm(&a)).abs() < 1e-6);
    }
}
