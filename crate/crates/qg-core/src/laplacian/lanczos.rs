//! Shift-invert Lanczos for the smallest eigenpairs of large sparse
//! symmetric matrices.
//!
//! The smallest eigenvalues of subdivided-graph Laplacians cluster near
//! zero at scale h^2, far below the rest of the spectrum. Inverting
//! `M + s*I` with `s` near that cluster spreads them out at the top of the
//! transformed spectrum, where Lanczos with full reorthogonalization
//! resolves them in a modest basis.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::{CondensedLdl, SparseSym};
use super::LinalgError;

const SEED: u64 = 0x9e3779b97f4a7c15;

/// Smallest `q` eigenpairs of `m`, values ascending, vectors orthonormal.
///
/// `shift_hint` should be on the order of the q-th smallest eigenvalue; it
/// only affects convergence speed, not correctness. True residuals
/// `||M x - mu x||` are checked against `tol * max(1, ||M||)`.
pub fn lanczos_smallest(
    m: &SparseSym,
    q: usize,
    tol: f64,
    shift_hint: f64,
) -> Result<(Vec<f64>, Vec<DVector<f64>>), LinalgError> {
    let n = m.order();
    if q == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if q > n {
        return Err(LinalgError::TooManyEigenpairs { q, order: n });
    }
    let norm = m.norm_inf().max(1.0);
    let s = shift_hint.abs().max(1e-14 * norm);
    let op = CondensedLdl::factor(m, -s, 1e-14 * norm).map_err(|_| LinalgError::SingularShift)?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let m_max = (8 * (q + 8) + 40).min(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m_max);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut v = random_unit(n, &mut rng);
    basis.push(v.clone());
    let mut stage = (2 * (q + 6) + 20).min(m_max);
    let mut exhausted = false;
    loop {
        while !exhausted && basis.len() <= stage && basis.len() <= m_max {
            let mut w = v.clone();
            op.solve_in_place(&mut w);
            let alpha = v.dot(&w);
            alphas.push(alpha);
            // full reorthogonalization, two passes
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let beta = w.norm();
            if basis.len() == m_max {
                betas.push(beta);
                break;
            }
            if beta < 1e-13 {
                // invariant subspace found; continue with a fresh direction
                let mut fresh = random_unit(n, &mut rng);
                for _ in 0..2 {
                    for b in &basis {
                        let c = b.dot(&fresh);
                        fresh.axpy(-c, b, 1.0);
                    }
                }
                let fn_norm = fresh.norm();
                if fn_norm < 1e-13 {
                    exhausted = true;
                    break;
                }
                betas.push(0.0);
                v = fresh / fn_norm;
            } else {
                betas.push(beta);
                v = w / beta;
            }
            basis.push(v.clone());
        }

        let k = alphas.len();
        if k >= q {
            if let Some(result) = extract(m, s, q, tol, norm, &basis, &alphas, &betas) {
                return Ok(result);
            }
        }
        if exhausted || k >= m_max || k >= n {
            return Err(LinalgError::ConvergenceFailure(format!(
                "lanczos basis exhausted at {k} vectors for {q} eigenpairs"
            )));
        }
        stage = ((stage * 3) / 2 + 8).min(m_max);
    }
}

/// Ritz extraction; returns `None` when the target pairs have not yet
/// converged to the requested residual.
#[allow(clippy::too_many_arguments)]
fn extract(
    m: &SparseSym,
    s: f64,
    q: usize,
    tol: f64,
    norm: f64,
    basis: &[DVector<f64>],
    alphas: &[f64],
    betas: &[f64],
) -> Option<(Vec<f64>, Vec<DVector<f64>>)> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    // largest theta of the inverted operator = smallest mu of M
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let beta_last = betas.get(k - 1).copied().unwrap_or(0.0);
    let mut values = Vec::with_capacity(q);
    let mut vectors = Vec::with_capacity(q);
    for &idx in order.iter().take(q) {
        let theta = eig.eigenvalues[idx];
        if theta <= 0.0 {
            return None; // not resolved yet: inverted operator is positive
        }
        // cheap bound first, then the true residual
        let est = beta_last * eig.eigenvectors[(k - 1, idx)].abs();
        if est > tol * norm * theta {
            return None;
        }
        let mut x = DVector::zeros(basis[0].len());
        for (j, b) in basis.iter().take(k).enumerate() {
            x.axpy(eig.eigenvectors[(j, idx)], b, 1.0);
        }
        let xn = x.norm();
        if xn < 1e-13 {
            return None;
        }
        x /= xn;
        let mu = 1.0 / theta - s;
        let resid = (m.matvec(&x) - &x * mu).norm();
        if resid > tol * norm {
            return None;
        }
        values.push(mu);
        vectors.push(x);
    }
    // ascending in mu
    let mut idx: Vec<usize> = (0..q).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let values: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let vectors: Vec<DVector<f64>> = idx.into_iter().map(|i| vectors[i].clone()).collect();
    Some((values, vectors))
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let norm = v.norm();
    v / norm
}
