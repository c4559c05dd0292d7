//! The vertex nonlinear eigenvalue problem and its Newton-trace solver.
//!
//! For `z` away from the grid values `(k pi / l_e)^2`, a metric graph has
//! eigenvalue `z` exactly when the n-by-n matrix `H(z)` is singular, where
//! `H` couples adjacent vertices through `1/sin(sqrt(z) l_e)` and carries
//! `-sum cot(sqrt(z) l_e)` on the diagonal. Roots of `det H` are found by
//! the Newton-trace iteration `z <- z - 1/trace(H^{-1} H')`, started from
//! equilateral floor/ceil estimates and stopped when the reciprocal
//! condition number of `H` collapses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilateral::{self, BracketQuality, EquilateralError, InitialGuess};
use crate::graph::{GraphError, MetricGraph};

/// Evaluations require `|sin(sqrt(z) l_e)|` above this guard on every edge.
pub const SIN_GUARD: f64 = 1e-8;
/// Stopping threshold on the reciprocal condition number of `H`.
pub const RCOND_TOL: f64 = 1e-10;
/// Iteration cap for the Newton-trace loop.
pub const NEWTON_MAXIT: usize = 1000;
/// A Newton step crossing into a pole guard band is halved toward the
/// previous iterate at most this many times.
const MAX_HALVINGS: usize = 30;
/// Converged roots closer than this relative spread are one eigenvalue.
pub const DEDUP_REL: f64 = 1e-8;
/// Exact 2-norm condition number below this order, 1-norm estimate above.
const RCOND_SVD_LIMIT: usize = 200;

#[derive(Debug, Error)]
pub enum NepError {
    #[error("z = {z} lies inside the pole guard of edge {edge}")]
    NearSingularEdge { edge: usize, z: f64 },
    #[error("H factorization failed at z = {0}")]
    SingularIterate(f64),
    #[error("H({lambda}) is not numerically singular (rcond {rcond:.3e})")]
    NotSingular { lambda: f64, rcond: f64 },
    #[error("iterate must be positive, got {0}")]
    NonPositiveIterate(f64),
    #[error(transparent)]
    Equilateral(#[from] EquilateralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Returns the first edge whose sine term falls inside the pole guard.
pub fn pole_violation(g: &MetricGraph, z: f64) -> Option<usize> {
    let s = z.sqrt();
    g.lengths()
        .iter()
        .position(|&l| (s * l).sin().abs() <= SIN_GUARD)
}

/// Assembles `H(z)`; fails inside a pole guard band, where the matrix
/// entries blow up and `z` sits on a non-vertex candidate.
pub fn assemble_h(g: &MetricGraph, z: f64) -> Result<DMatrix<f64>, NepError> {
    if !z.is_finite() || z <= 0.0 {
        return Err(NepError::NonPositiveIterate(z));
    }
    if let Some(edge) = pole_violation(g, z) {
        return Err(NepError::NearSingularEdge { edge, z });
    }
    let n = g.graph().vertex_count();
    let s = z.sqrt();
    let mut h = DMatrix::zeros(n, n);
    for (e, &(a, b)) in g.graph().edges().iter().enumerate() {
        let arg = s * g.length(e);
        let sin = arg.sin();
        let cot = arg.cos() / sin;
        h[(a, b)] = 1.0 / sin;
        h[(b, a)] = 1.0 / sin;
        h[(a, a)] -= cot;
        h[(b, b)] -= cot;
    }
    Ok(h)
}

/// Analytic derivative `dH/dz`, sharing the sparsity pattern of `H`.
pub fn assemble_h_prime(g: &MetricGraph, z: f64) -> Result<DMatrix<f64>, NepError> {
    if !z.is_finite() || z <= 0.0 {
        return Err(NepError::NonPositiveIterate(z));
    }
    if let Some(edge) = pole_violation(g, z) {
        return Err(NepError::NearSingularEdge { edge, z });
    }
    let n = g.graph().vertex_count();
    let s = z.sqrt();
    let mut hp = DMatrix::zeros(n, n);
    for (e, &(a, b)) in g.graph().edges().iter().enumerate() {
        let l = g.length(e);
        let arg = s * l;
        let sin2 = arg.sin() * arg.sin();
        let diag = l / (2.0 * s * sin2);
        let off = -l * arg.cos() / (2.0 * s * sin2);
        hp[(a, b)] = off;
        hp[(b, a)] = off;
        hp[(a, a)] += diag;
        hp[(b, b)] += diag;
    }
    Ok(hp)
}

/// Reciprocal condition number `1/(||H|| ||H^{-1}||)`: exact in the 2-norm
/// via singular values for small orders, 1-norm estimate through an LU
/// factorization above. Exactly singular matrices give 0.
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n <= RCOND_SVD_LIMIT {
        let svd = m.clone().svd(false, false);
        let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let min = svd
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if max <= 0.0 || !min.is_finite() {
            return 0.0;
        }
        min / max
    } else {
        let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let scaled = m / scale;
        let lu = scaled.clone().lu();
        rcond_from_lu(&scaled, &lu)
    }
}

/// 1-norm reciprocal condition number from an existing factorization of a
/// pre-scaled matrix (scaling cancels in the product).
fn rcond_from_lu(m: &DMatrix<f64>, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    // Hager's estimator for ||M^{-1}||_1; M is symmetric so transpose
    // solves reuse the same factorization.
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0f64;
    for _ in 0..5 {
        let y = match lu.solve(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        if y.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = match lu.solve(&xi) {
            Some(z) => z,
            None => return 0.0,
        };
        let zmax = z.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
        if zmax <= z.dot(&x) {
            break;
        }
        let j = (0..n)
            .max_by(|&a, &b| z[a].abs().total_cmp(&z[b].abs()))
            .unwrap();
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    if est == 0.0 || norm1 == 0.0 {
        0.0
    } else {
        1.0 / (norm1 * est)
    }
}

/// One Newton-trace update: `z - 1/trace(H^{-1}(z) H'(z))`, with the trace
/// accumulated from one factorization of `H` and a solve per column of
/// `H'`.
pub fn newton_trace_step(g: &MetricGraph, z: f64) -> Result<f64, NepError> {
    let h = assemble_h(g, z)?;
    let hp = assemble_h_prime(g, z)?;
    let lu = h.lu();
    let n = hp.nrows();
    let mut trace = 0.0;
    for i in 0..n {
        let col = DVector::from_column_slice(hp.column(i).as_slice());
        let x = lu.solve(&col).ok_or(NepError::SingularIterate(z))?;
        if !x[i].is_finite() {
            return Err(NepError::SingularIterate(z));
        }
        trace += x[i];
    }
    Ok(z - 1.0 / trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    MaxIterations,
    SingularityEncountered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonResult {
    pub lambda: f64,
    pub iterations: usize,
    pub trace_history: Vec<f64>,
    pub final_rcond: f64,
    pub status: NewtonStatus,
    /// Set when the iterate left the caller's spectral window; reported,
    /// not an error.
    pub window_escape: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub rcond_tol: f64,
    pub maxit: usize,
    /// Iterates above this value count as basin escapes and stop the
    /// iteration early.
    pub escape_above: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            rcond_tol: RCOND_TOL,
            maxit: NEWTON_MAXIT,
            escape_above: None,
        }
    }
}

/// Newton-trace iteration from `z_init`, stopping when the reciprocal
/// condition number of `H(z)` falls below the tolerance or the iteration
/// cap is reached. Steps landing inside a pole guard band (or below zero)
/// are halved toward the previous iterate.
pub fn solve_newton_trace(
    g: &MetricGraph,
    z_init: f64,
    opts: &NewtonOptions,
) -> Result<NewtonResult, NepError> {
    if !z_init.is_finite() || z_init <= 0.0 {
        return Err(NepError::NonPositiveIterate(z_init));
    }
    let mut history = vec![z_init];
    let mut z = z_init;
    if pole_violation(g, z).is_some() {
        return Ok(NewtonResult {
            lambda: z,
            iterations: 0,
            trace_history: history,
            final_rcond: 0.0,
            status: NewtonStatus::SingularityEncountered,
            window_escape: None,
        });
    }
    let n = g.graph().vertex_count();
    let mut rc = f64::INFINITY;
    for iter in 0..opts.maxit {
        let h = assemble_h(g, z)?;
        let mut lu_cache = None;
        rc = if n <= RCOND_SVD_LIMIT {
            rcond(&h)
        } else {
            let scale = h.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let scaled = &h / scale;
            let lu = scaled.clone().lu();
            let r = rcond_from_lu(&scaled, &lu);
            lu_cache = Some((lu, scale));
            r
        };
        if rc < opts.rcond_tol {
            return Ok(NewtonResult {
                lambda: z,
                iterations: iter,
                trace_history: history,
                final_rcond: rc,
                status: NewtonStatus::Converged,
                window_escape: None,
            });
        }
        let hp = assemble_h_prime(g, z)?;
        let trace = {
            let solve = |col: DVector<f64>| -> Option<DVector<f64>> {
                match &lu_cache {
                    Some((lu, scale)) => lu.solve(&(col / *scale)),
                    None => h.clone().lu().solve(&col),
                }
            };
            let mut acc = 0.0;
            let mut singular = false;
            for i in 0..n {
                let col = DVector::from_column_slice(hp.column(i).as_slice());
                match solve(col) {
                    Some(x) if x[i].is_finite() => acc += x[i],
                    _ => {
                        singular = true;
                        break;
                    }
                }
            }
            if singular {
                // the factorization broke down: z is numerically a root
                return Ok(NewtonResult {
                    lambda: z,
                    iterations: iter,
                    trace_history: history,
                    final_rcond: 0.0,
                    status: NewtonStatus::Converged,
                    window_escape: None,
                });
            }
            acc
        };
        let mut z_next = z - 1.0 / trace;
        let mut halvings = 0;
        while halvings < MAX_HALVINGS
            && (!z_next.is_finite() || z_next <= 0.0 || pole_violation(g, z_next).is_some())
        {
            z_next = if z_next.is_finite() {
                0.5 * (z + z_next)
            } else {
                // enormous step from a vanishing trace: pull far in, then halve
                z * 2.0 + 1.0
            };
            halvings += 1;
        }
        if !z_next.is_finite() || z_next <= 0.0 || pole_violation(g, z_next).is_some() {
            // damping exhausted: stay put and let the cap end the run
            z_next = z;
        }
        if let Some(escape) = opts.escape_above {
            if z_next > escape {
                history.push(z_next);
                return Ok(NewtonResult {
                    lambda: z_next,
                    iterations: iter + 1,
                    trace_history: history,
                    final_rcond: rc,
                    status: NewtonStatus::MaxIterations,
                    window_escape: Some(z_next),
                });
            }
        }
        z = z_next;
        history.push(z);
    }
    Ok(NewtonResult {
        lambda: z,
        iterations: opts.maxit,
        trace_history: history,
        final_rcond: rc,
        status: NewtonStatus::MaxIterations,
        window_escape: None,
    })
}

/// Orthonormal basis of the numerical null space of `H(lambda)`. The
/// matrix must already be numerically singular (`sigma_min <= 1e-8 *
/// sigma_max`); the basis collects singular directions below
/// `max(n eps ||H|| 1e3, 30 sigma_min)`, the second term absorbing the
/// residual error of a Newton-converged root.
pub fn nullvector(g: &MetricGraph, lambda: f64) -> Result<Vec<DVector<f64>>, NepError> {
    let h = assemble_h(g, lambda)?;
    let n = h.nrows();
    let svd = h.clone().svd(true, true);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sigma_max = svd.singular_values[*order.last().unwrap()];
    let sigma_min = svd.singular_values[order[0]];
    if sigma_max <= 0.0 || sigma_min > 1e-8 * sigma_max {
        return Err(NepError::NotSingular {
            lambda,
            rcond: if sigma_max > 0.0 {
                sigma_min / sigma_max
            } else {
                0.0
            },
        });
    }
    let threshold = (n as f64 * f64::EPSILON * sigma_max * 1e3)
        .max(30.0 * sigma_min)
        .min(1e-8 * sigma_max);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut basis = Vec::new();
    for &i in &order {
        if svd.singular_values[i] <= threshold {
            basis.push(DVector::from_fn(n, |j, _| v_t[(i, j)]));
        }
    }
    Ok(basis)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: f64,
    pub initial_guess: f64,
    pub iterations: usize,
    /// `None` for the zero eigenvalue, which is emitted without touching
    /// `H`.
    pub rcond: Option<f64>,
    pub status: NewtonStatus,
    pub multiplicity: usize,
    pub bracket_floor: f64,
    pub bracket_ceil: f64,
    pub bracket_quality: BracketQuality,
    /// 1-based guess indices that converged to this eigenvalue.
    pub source_indices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MissedGuess {
    pub index: usize,
    pub initial_guess: f64,
    pub iterations: usize,
    pub status: NewtonStatus,
    pub last_iterate: f64,
    pub window_escape: Option<f64>,
}

/// A grid value `(k pi / l_e)^2`. These are excluded from the vertex
/// problem; whether they are eigenvalues is not decided here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonVertexCandidate {
    pub lambda: f64,
    pub edge: usize,
    pub k: usize,
    /// Guess index that landed inside this candidate's guard band.
    pub diverted_guess: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub h: f64,
    pub requested: usize,
    pub entries: Vec<SpectrumEntry>,
    pub missed: Vec<MissedGuess>,
    pub candidates: Vec<NonVertexCandidate>,
}

impl SpectrumResult {
    /// Eigenvalues ascending, each repeated by its multiplicity.
    pub fn eigenvalues_with_multiplicity(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.entries {
            for _ in 0..e.multiplicity.max(1) {
                out.push(e.lambda);
            }
        }
        out
    }
}

/// Newton refinements stop once the reciprocal condition number passes the
/// tolerance; a few extra steps sharpen the root so that null-space
/// dimensions are measured at full precision.
fn polish(g: &MetricGraph, z: f64, rc: f64) -> (f64, f64) {
    let mut best = (z, rc);
    let mut cur = z;
    for _ in 0..3 {
        match newton_trace_step(g, cur) {
            Ok(next) if next > 0.0 && pole_violation(g, next).is_none() => {
                let Ok(h) = assemble_h(g, next) else { break };
                let r = rcond(&h);
                if r < best.1 {
                    best = (next, r);
                    cur = next;
                } else {
                    break;
                }
            }
            _ => break,
        }
    }
    best
}

/// End-to-end spectrum pipeline: equilateral initial guesses at step `h`,
/// one Newton-trace run per guess, deduplication of repeated roots,
/// multiplicity from the null space, and full per-guess reporting. Guesses
/// diverted by pole guards or failing to converge are recorded, never
/// fatal; extra guesses are consumed until `q` eigenvalues (counted with
/// multiplicity) are in hand or the guess budget is exhausted.
pub fn compute_spectrum(g: &MetricGraph, q: usize, h: f64) -> Result<SpectrumResult, NepError> {
    let m = g.graph().edge_count() as f64;
    let extended_order_estimate = g.total_length() / h + m;
    let head_room = if extended_order_estimate <= 2000.0 {
        q.max(8)
    } else {
        8
    };
    let guesses: Vec<InitialGuess> = equilateral::initial_guesses(g, h, q + head_room)?;

    let mut entries: Vec<SpectrumEntry> = Vec::new();
    let mut missed: Vec<MissedGuess> = Vec::new();
    let mut diverted: Vec<(usize, f64, usize)> = Vec::new(); // (guess idx, lambda, edge)

    let max_guess = guesses.iter().map(|gs| gs.value).fold(0.0, f64::max);
    let window = 1.25 * max_guess + 1.0;
    let opts = NewtonOptions {
        escape_above: Some(4.0 * window),
        ..Default::default()
    };

    let mut accepted = 0usize;
    for gs in &guesses {
        if accepted >= q {
            break;
        }
        if gs.value.abs() <= 1e-12 {
            if !entries.iter().any(|e| e.lambda == 0.0) {
                entries.push(SpectrumEntry {
                    lambda: 0.0,
                    initial_guess: gs.value,
                    iterations: 0,
                    rcond: None,
                    status: NewtonStatus::Converged,
                    multiplicity: 1,
                    bracket_floor: gs.floor_lambda,
                    bracket_ceil: gs.ceil_lambda,
                    bracket_quality: gs.quality,
                    source_indices: vec![gs.index],
                });
                accepted += 1;
            }
            continue;
        }
        if let Some(edge) = pole_violation(g, gs.value) {
            diverted.push((gs.index, gs.value, edge));
            continue;
        }
        let result = solve_newton_trace(g, gs.value, &opts)?;
        if result.status == NewtonStatus::Converged {
            let lambda = result.lambda;
            if let Some(existing) = entries
                .iter_mut()
                .find(|e| (e.lambda - lambda).abs() <= DEDUP_REL * e.lambda.max(1e-300))
            {
                existing.source_indices.push(gs.index);
                continue;
            }
            let (lambda, rc) = polish(g, lambda, result.final_rcond);
            let multiplicity = nullvector(g, lambda).map(|b| b.len()).unwrap_or(1);
            entries.push(SpectrumEntry {
                lambda,
                initial_guess: gs.value,
                iterations: result.iterations,
                rcond: Some(rc),
                status: NewtonStatus::Converged,
                multiplicity,
                bracket_floor: gs.floor_lambda,
                bracket_ceil: gs.ceil_lambda,
                bracket_quality: gs.quality,
                source_indices: vec![gs.index],
            });
            accepted += multiplicity;
        } else {
            missed.push(MissedGuess {
                index: gs.index,
                initial_guess: gs.value,
                iterations: result.iterations,
                status: result.status,
                last_iterate: result.lambda,
                window_escape: result.window_escape,
            });
        }
    }
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

    // non-vertex candidates up to the window, with any diverted guesses
    // attached to the band they hit
    let mut candidates = Vec::new();
    for (e, &l) in g.lengths().iter().enumerate() {
        let mut k = 1usize;
        loop {
            let lam = (k as f64 * std::f64::consts::PI / l).powi(2);
            if lam > window {
                break;
            }
            let diverted_guess = diverted
                .iter()
                .find(|&&(_, z, edge)| {
                    edge == e && ((z.sqrt() * l / std::f64::consts::PI).round() as usize) == k
                })
                .map(|&(idx, _, _)| idx);
            candidates.push(NonVertexCandidate {
                lambda: lam,
                edge: e,
                k,
                diverted_guess,
            });
            k += 1;
        }
    }
    candidates.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

    Ok(SpectrumResult {
        h,
        requested: q,
        entries,
        missed,
        candidates,
    })
}
