//! Graph Laplacian assembly and symmetric eigenvalue solvers: a dense
//! decomposition for moderate orders, shifted inverse iteration with
//! deflation, shift-invert Lanczos for large subdivided graphs, and the
//! nested refinement driver that carries eigenpairs from one subdivision
//! level to the next.

mod lanczos;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{CombinatorialGraph, ExtendedGraph};
pub use sparse::SparseSym;
use sparse::{inertia_below, CondensedLdl, FactorIssue};

/// Orders up to this bound use the dense eigendecomposition; larger ones
/// go through shift-invert Lanczos.
pub const DENSE_EIG_LIMIT: usize = 2000;
/// Orders above this bound are stored sparse.
const SPARSE_STORAGE_LIMIT: usize = 500;
/// Relative pivot floor: a factorization pivot below this times the matrix
/// norm counts as near-singular.
const PIVOT_RTOL: f64 = 1e-14;
/// Additive shift nudge applied once when a factorization is near-singular.
const SHIFT_NUDGE: f64 = 1e-10;
/// Default residual tolerance for iterative eigensolvers.
pub const ITER_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error("shifted matrix is singular even after regularization")]
    SingularShift,
    #[error("requested {q} eigenpairs from an order-{order} matrix")]
    TooManyEigenpairs { q: usize, order: usize },
    #[error("order {order} is too large for a dense eigendecomposition")]
    TooLargeForDense { order: usize },
    #[error("levels do not refine a single metric graph")]
    LevelMismatch,
    #[error("numerical breakdown: {0}")]
    Breakdown(String),
}

/// Symmetric real matrix, dense or sparse depending on order.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    storage: Storage,
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<f64>),
    Sparse(SparseSym),
}

impl SymmetricMatrix {
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self {
            storage: Storage::Dense(m),
        }
    }

    pub fn from_sparse(s: SparseSym) -> Self {
        Self {
            storage: Storage::Sparse(s),
        }
    }

    pub fn order(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Sparse(s) => s.order(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(s) => s.matvec(x),
        }
    }

    pub fn norm_inf(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => (0..m.nrows())
                .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Storage::Sparse(s) => s.norm_inf(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    fn to_sparse(&self) -> SparseSym {
        match &self.storage {
            Storage::Dense(m) => SparseSym::from_dense(m),
            Storage::Sparse(s) => s.clone(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(s) => {
                if i == j {
                    s.diag[i]
                } else {
                    s.rows[i]
                        .iter()
                        .find(|&&(k, _)| k == j)
                        .map(|&(_, v)| v)
                        .unwrap_or(0.0)
                }
            }
        }
    }
}

/// Eigenvalues ascending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
}

/// Normalized graph Laplacian: identity on the diagonal,
/// `-1/sqrt(deg(i) deg(j))` on edges.
pub fn normalized_laplacian(g: &CombinatorialGraph) -> SymmetricMatrix {
    let n = g.vertex_count();
    if n <= SPARSE_STORAGE_LIMIT {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        for &(a, b) in g.edges() {
            let v = -1.0 / ((g.degree(a) * g.degree(b)) as f64).sqrt();
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        SymmetricMatrix::from_dense(m)
    } else {
        let mut s = SparseSym::zeros(n);
        for i in 0..n {
            s.set_diag(i, 1.0);
        }
        for &(a, b) in g.edges() {
            s.push_offdiag(a, b, -1.0 / ((g.degree(a) * g.degree(b)) as f64).sqrt());
        }
        SymmetricMatrix::from_sparse(s)
    }
}

/// The harmonic Laplacian `D^{-1} L` shares its eigenvalues with the
/// normalized Laplacian; eigenvectors transform by `D^{-1/2}`. This pair
/// carries the normalized matrix plus the similarity data.
pub struct HarmonicLaplacian {
    pub normalized: SymmetricMatrix,
    pub inv_sqrt_degree: Vec<f64>,
}

pub fn harmonic_laplacian(g: &CombinatorialGraph) -> HarmonicLaplacian {
    let inv_sqrt_degree = (0..g.vertex_count())
        .map(|v| 1.0 / (g.degree(v) as f64).sqrt())
        .collect();
    HarmonicLaplacian {
        normalized: normalized_laplacian(g),
        inv_sqrt_degree,
    }
}

impl HarmonicLaplacian {
    /// Maps an eigenvector of the normalized Laplacian to the matching
    /// eigenvector of the harmonic Laplacian.
    pub fn to_harmonic_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| x[i] * self.inv_sqrt_degree[i])
    }
}

/// Smallest `q` eigenpairs by full dense decomposition.
pub fn eigs_dense(m: &SymmetricMatrix, q: usize) -> Result<EigenPairs, LinalgError> {
    let n = m.order();
    if q > n {
        return Err(LinalgError::TooManyEigenpairs { q, order: n });
    }
    if n > 12_000 {
        return Err(LinalgError::TooLargeForDense { order: n });
    }
    let dense = m.to_dense();
    let mut fm = faer::Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            fm[(i, j)] = dense[(i, j)];
        }
    }
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| LinalgError::ConvergenceFailure(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order.iter().take(q).map(|&i| s[i]).collect();
    let vectors = order
        .iter()
        .take(q)
        .map(|&c| DVector::from_fn(n, |r, _| u[(r, c)]))
        .collect();
    Ok(EigenPairs { values, vectors })
}

enum ShiftedSolver {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Sparse(CondensedLdl),
}

impl ShiftedSolver {
    fn solve_in_place(&self, b: &mut DVector<f64>) -> bool {
        match self {
            ShiftedSolver::Dense(lu) => lu.solve_mut(b),
            ShiftedSolver::Sparse(f) => {
                f.solve_in_place(b);
                true
            }
        }
    }
}

/// Factors `M - shift*I`, retrying once with a nudged shift when a pivot is
/// near-singular.
fn factor_shifted(m: &SymmetricMatrix, shift: f64) -> Result<ShiftedSolver, LinalgError> {
    let floor = PIVOT_RTOL * (m.norm_inf() + shift.abs()).max(1.0);
    let attempt = |sigma: f64| -> Result<ShiftedSolver, FactorIssue> {
        match &m.storage {
            Storage::Dense(d) => {
                let n = d.nrows();
                let mut shifted = d.clone();
                for i in 0..n {
                    shifted[(i, i)] -= sigma;
                }
                let lu = shifted.lu();
                let min_u = (0..n)
                    .map(|i| lu.u()[(i, i)].abs())
                    .fold(f64::INFINITY, f64::min);
                if min_u < floor {
                    Err(FactorIssue::TinyPivot {
                        vertex: 0,
                        pivot: min_u,
                    })
                } else {
                    Ok(ShiftedSolver::Dense(lu))
                }
            }
            Storage::Sparse(s) => CondensedLdl::factor(s, sigma, floor).map(ShiftedSolver::Sparse),
        }
    };
    attempt(shift)
        .or_else(|_| attempt(shift + SHIFT_NUDGE))
        .map_err(|_| LinalgError::SingularShift)
}

fn project_out(x: &mut DVector<f64>, deflate: &[DVector<f64>]) {
    for _ in 0..2 {
        for d in deflate {
            let c = d.dot(x);
            x.axpy(-c, d, 1.0);
        }
    }
}

/// Inverse iteration with a fixed shift: converges to the eigenpair of `m`
/// nearest `shift` after projecting out the `deflate` directions. Returns
/// when the absolute residual `||M x - mu x||` drops below `tol`.
///
/// A shift that lands near the midpoint of two eigenvalues contracts
/// arbitrarily slowly; after a stretch of iterations without convergence
/// the shift is moved to the current Rayleigh quotient, which restores
/// locally cubic convergence toward whichever eigenpair dominates the
/// iterate.
pub fn inverse_iteration(
    m: &SymmetricMatrix,
    shift: f64,
    start: &DVector<f64>,
    tol: f64,
    maxit: usize,
    deflate: &[DVector<f64>],
) -> Result<(f64, DVector<f64>), LinalgError> {
    const REFACTOR_AFTER: usize = 20;
    const MAX_REFACTORS: usize = 4;
    let mut solver = factor_shifted(m, shift)?;
    let mut x = start.clone();
    project_out(&mut x, deflate);
    let norm = x.norm();
    if norm < 1e-300 {
        return Err(LinalgError::Breakdown(
            "start vector lies in the deflated subspace".into(),
        ));
    }
    x /= norm;
    let mut mu = shift;
    let mut since_refactor = 0usize;
    let mut refactors = 0usize;
    for _ in 0..maxit {
        let mut y = x.clone();
        if !solver.solve_in_place(&mut y) {
            return Err(LinalgError::SingularShift);
        }
        project_out(&mut y, deflate);
        let ny = y.norm();
        if !ny.is_finite() || ny == 0.0 {
            // the solve exploded: x is numerically the eigenvector already
            let mx = m.matvec(&x);
            mu = x.dot(&mx);
            if (mx - &x * mu).norm() <= tol {
                return Ok((mu, x));
            }
            return Err(LinalgError::Breakdown("inverse iteration overflow".into()));
        }
        x = y / ny;
        let mx = m.matvec(&x);
        mu = x.dot(&mx);
        if (mx - &x * mu).norm() <= tol {
            return Ok((mu, x));
        }
        since_refactor += 1;
        if since_refactor >= REFACTOR_AFTER && refactors < MAX_REFACTORS {
            solver = factor_shifted(m, mu)?;
            since_refactor = 0;
            refactors += 1;
        }
    }
    let _ = mu;
    Err(LinalgError::MaxIterations(maxit))
}

/// Smallest `q` eigenpairs, dispatching between the dense decomposition and
/// shift-invert Lanczos with an inertia cross-check.
///
/// `shift_hint` estimates the magnitude of the q-th eigenvalue for the
/// sparse path; pass 0.0 when unknown.
pub fn smallest_eigs(
    m: &SymmetricMatrix,
    q: usize,
    tol: f64,
    shift_hint: f64,
) -> Result<EigenPairs, LinalgError> {
    let n = m.order();
    if q > n {
        return Err(LinalgError::TooManyEigenpairs { q, order: n });
    }
    if n <= DENSE_EIG_LIMIT {
        return eigs_dense(m, q);
    }
    let sparse = m.to_sparse();
    let buffer = (q + 4).min(n);
    let hint = if shift_hint > 0.0 { shift_hint } else { 1e-6 };
    let (mut values, mut vectors) = lanczos::lanczos_smallest(&sparse, buffer, tol, hint)?;

    let cut = if buffer > q && values[q] - values[q - 1] > 1e-12 {
        0.5 * (values[q - 1] + values[q])
    } else {
        values[q - 1] * (1.0 + 1e-9) + 1e-13
    };
    complete_below(m, &sparse, &mut values, &mut vectors, cut, tol)?;
    values.truncate(q);
    vectors.truncate(q);
    Ok(EigenPairs { values, vectors })
}

/// Deflated inverse iteration stalls near the residual level of the
/// vectors it deflates against; retry with a relaxed tolerance before
/// giving up. Rayleigh-Ritz refinement afterwards restores full accuracy.
fn inverse_iteration_relaxed(
    m: &SymmetricMatrix,
    shift: f64,
    start: &DVector<f64>,
    tol: f64,
    maxit: usize,
    deflate: &[DVector<f64>],
) -> Result<(f64, DVector<f64>), LinalgError> {
    let mut t = tol;
    for _ in 0..3 {
        match inverse_iteration(m, shift, start, t, maxit, deflate) {
            Ok(pair) => return Ok(pair),
            Err(LinalgError::MaxIterations(_)) => t *= 100.0,
            Err(e) => return Err(e),
        }
    }
    Err(LinalgError::MaxIterations(maxit))
}

/// Rediagonalizes `m` in the span of the given vectors, replacing them by
/// Ritz pairs (values ascending, vectors orthonormal). This removes the
/// cross-contamination that deflated solves leave between nearby
/// eigendirections.
fn rayleigh_ritz_refine(m: &SymmetricMatrix, vectors: &mut Vec<DVector<f64>>) -> Vec<f64> {
    let q = vectors.len();
    // Gram-Schmidt, two passes
    for i in 0..q {
        for _ in 0..2 {
            for j in 0..i {
                let c = vectors[j].dot(&vectors[i]);
                let vj = vectors[j].clone();
                vectors[i].axpy(-c, &vj, 1.0);
            }
        }
        let n = vectors[i].norm();
        vectors[i] /= n;
    }
    let images: Vec<DVector<f64>> = vectors.iter().map(|v| m.matvec(v)).collect();
    let mut b = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in i..q {
            let v = vectors[i].dot(&images[j]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let rotated: Vec<DVector<f64>> = order
        .iter()
        .map(|&col| {
            let mut x = DVector::zeros(vectors[0].len());
            for (row, v) in vectors.iter().enumerate() {
                x.axpy(eig.eigenvectors[(row, col)], v, 1.0);
            }
            let n = x.norm();
            x / n
        })
        .collect();
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    *vectors = rotated;
    values
}

/// Sylvester completeness check with recovery. The count of eigenvalues
/// below `cut` must match the resolved values below `cut`; any deficit is
/// located by inertia bisection and extracted by deflated inverse
/// iteration. `values` must be sorted ascending and is kept that way.
fn complete_below(
    m: &SymmetricMatrix,
    sparse: &SparseSym,
    values: &mut Vec<f64>,
    vectors: &mut Vec<DVector<f64>>,
    cut: f64,
    tol: f64,
) -> Result<(), LinalgError> {
    let inertia = |tau: f64| -> Result<usize, LinalgError> {
        inertia_below(sparse, tau)
            .map_err(|_| LinalgError::Breakdown("inertia count failed".into()))
    };
    let mut count = inertia(cut)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut attempts = 0usize;
    let max_attempts = count.saturating_sub(values.len()) + 6;
    let mut recovered_any = false;
    // lower bound on the spectrum from Gershgorin disks
    let gersh = (0..sparse.order())
        .map(|i| sparse.diag[i] - sparse.rows[i].iter().map(|&(_, v)| v.abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    while count > values.iter().filter(|&&v| v < cut).count() {
        if attempts >= max_attempts {
            return Err(LinalgError::ConvergenceFailure(format!(
                "{count} eigenvalues below {cut:.3e} but only {} resolved",
                values.iter().filter(|&&v| v < cut).count()
            )));
        }
        attempts += 1;
        // bisect to a small bracket holding a missing eigenvalue
        let mut lo = gersh - 1e-12;
        let mut hi = cut;
        for _ in 0..48 {
            if hi - lo <= 1e-12 * hi.abs().max(1e-6) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let deficit = inertia(mid)? > values.iter().filter(|&&v| v < mid).count();
            if deficit {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let shift = 0.5 * (lo + hi);
        let start = DVector::from_fn(m.order(), |_, _| rng.random::<f64>() - 0.5);
        match inverse_iteration_relaxed(m, shift, &start, tol, 100, vectors) {
            Ok((mu, vec)) => {
                let pos = values.partition_point(|&v| v <= mu);
                values.insert(pos, mu);
                vectors.insert(pos, vec);
                recovered_any = true;
            }
            Err(e) => {
                return Err(LinalgError::ConvergenceFailure(format!(
                    "failed to recover an eigenvalue near {shift:.6e}: {e}"
                )));
            }
        }
        count = inertia(cut)?;
    }
    if recovered_any {
        *values = rayleigh_ritz_refine(m, vectors);
    }
    Ok(())
}

/// Maps an eigenvector from a coarse subdivision of a metric graph to a
/// finer one: original vertices carry over, artificial vertices take
/// linearly interpolated function values along their edge. Works on
/// normalized-Laplacian vectors, so values are converted through the
/// degree weights on both sides.
pub fn prolong(coarse: &ExtendedGraph, fine: &ExtendedGraph, x: &DVector<f64>) -> DVector<f64> {
    let cg = coarse.metric().graph();
    let fg = fine.metric().graph();
    let n_orig = coarse.original_vertex_count();
    let mut phi_f = DVector::zeros(fg.vertex_count());
    for v in 0..n_orig {
        phi_f[v] = x[v] / (cg.degree(v) as f64).sqrt();
    }
    for e in 0..coarse.original_edges().len() {
        let cchain = coarse.chain(e);
        let fchain = fine.chain(e);
        let nc = cchain.len() - 1;
        let nf = fchain.len() - 1;
        for (j, &fv) in fchain.iter().enumerate().take(nf).skip(1) {
            let t = j as f64 / nf as f64 * nc as f64;
            let i = (t.floor() as usize).min(nc - 1);
            let theta = t - i as f64;
            let lo = x[cchain[i]] / (cg.degree(cchain[i]) as f64).sqrt();
            let hi = x[cchain[i + 1]] / (cg.degree(cchain[i + 1]) as f64).sqrt();
            phi_f[fv] = (1.0 - theta) * lo + theta * hi;
        }
    }
    let mut out = DVector::zeros(fg.vertex_count());
    for v in 0..fg.vertex_count() {
        out[v] = phi_f[v] * (fg.degree(v) as f64).sqrt();
    }
    let norm = out.norm();
    if norm > 0.0 {
        out /= norm;
    }
    out
}

/// Eigenvalue transfer between subdivision levels: the quantum eigenvalue
/// recovered from a level with step `h` predicts the Laplacian eigenvalue
/// (and inverse-iteration shift) `1 - cos(sqrt(lambda) * h_next)` on the
/// next level.
fn level_shift(mu_coarse: f64, h_coarse: f64, h_fine: f64) -> f64 {
    let mu = mu_coarse.clamp(0.0, 2.0);
    let lambda_sqrt = (1.0 - mu).acos() / h_coarse;
    1.0 - (lambda_sqrt * h_fine).cos()
}

/// Nested solve across a refinement sequence of subdivisions of one metric
/// graph: the first level is solved directly, every later level by inverse
/// iteration with shifts and start vectors carried over from the previous
/// level. Returns the eigenpairs of every level.
pub fn nested_eigs(
    levels: &[ExtendedGraph],
    q: usize,
    tol: f64,
) -> Result<Vec<EigenPairs>, LinalgError> {
    if levels.is_empty() {
        return Ok(Vec::new());
    }
    for lv in levels {
        if lv.original_edges() != levels[0].original_edges()
            || lv.original_vertex_count() != levels[0].original_vertex_count()
            || !lv.is_equilateral()
        {
            return Err(LinalgError::LevelMismatch);
        }
    }
    let steps: Vec<f64> = levels.iter().map(|lv| lv.metric().lengths()[0]).collect();
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LinalgError::LevelMismatch);
    }

    let mut out = Vec::with_capacity(levels.len());
    let base_matrix = normalized_laplacian(levels[0].metric().graph());
    let base_guess = {
        let n_sub = levels[0].metric().graph().edge_count() as f64;
        1.0 - (std::f64::consts::PI * (q as f64 + 4.0) / n_sub)
            .min(std::f64::consts::PI)
            .cos()
    };
    out.push(smallest_eigs(&base_matrix, q, tol, base_guess)?);

    for (idx, fine) in levels.iter().enumerate().skip(1) {
        let coarse = &levels[idx - 1];
        let h_c = steps[idx - 1];
        let h_f = steps[idx];
        let lap = normalized_laplacian(fine.metric().graph());
        let n_f = fine.metric().graph().vertex_count();
        let prev = &out[idx - 1];

        let mut values = Vec::with_capacity(q);
        let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(q);
        for k in 0..q.min(prev.values.len()) {
            let sigma = level_shift(prev.values[k], h_c, h_f);
            if sigma.abs() < 1e-14 {
                // ground state of a connected graph, known in closed form
                let mut x =
                    DVector::from_fn(n_f, |v, _| (fine.metric().graph().degree(v) as f64).sqrt());
                x /= x.norm();
                values.push(0.0);
                vectors.push(x);
                continue;
            }
            let start = prolong(coarse, fine, &prev.vectors[k]);
            let (mu, x) = inverse_iteration_relaxed(&lap, sigma, &start, tol, 400, &vectors)?;
            values.push(mu);
            vectors.push(x);
        }
        let mut vectors: Vec<DVector<f64>> = {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            order.into_iter().map(|i| vectors[i].clone()).collect()
        };
        let mut values = rayleigh_ritz_refine(&lap, &mut vectors);
        // coarse shifts can land nearer a neighboring fine eigenvalue and
        // skip the intended one; verify the count and recover any gap
        if let Some(&top) = values.last() {
            let cut = top * (1.0 + 1e-9) + 1e-13;
            let sparse = lap.to_sparse();
            complete_below(&lap, &sparse, &mut values, &mut vectors, cut, tol)?;
            values.truncate(q);
            vectors.truncate(q);
        }
        out.push(EigenPairs { values, vectors });
    }
    Ok(out)
}
