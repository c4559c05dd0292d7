//! Equilateral approximations of metric graphs and the transfer of
//! combinatorial Laplacian eigenvalues to quantum-graph eigenvalues.
//!
//! An equilateral graph with edge length `l` has vertex eigenvalues
//! determined by `mu = 1 - cos(sqrt(lambda) * l)` where `mu` runs over the
//! harmonic Laplacian spectrum. Snapping every edge length down (floor) or
//! up (ceil) to a multiple of a step `h` yields equilateral extended graphs
//! whose mapped spectra bracket the true eigenvalues and provide Newton
//! starting values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{extend, gcd_representation, ExtendedGraph, GraphError, MetricGraph};
use crate::laplacian::{self, LinalgError};

/// Tolerance for treating an eigenvalue as the boundary value 0 or 2,
/// where the arccos slope blows up and non-vertex candidates live.
pub const BOUNDARY_MU_TOL: f64 = 1e-9;
/// Absolute slack when snapping `l/h` to the integer grid, so lengths that
/// are exact multiples of `h` up to floating noise stay exact.
const GRID_NUDGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EquilateralError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mu = {0} lies outside [0, 2]")]
    MuOutOfRange(f64),
    #[error("spectrum window exhausted: {found} vertex eigenvalues below the branch cutoff, {requested} requested")]
    WindowExhausted { found: usize, requested: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximationMode {
    Floor,
    Ceil,
    Exact,
}

/// An equilateral extended graph with step `h` approximating a metric
/// graph, together with the per-edge subdivision counts and the snapped
/// (cleaned) edge lengths `h * N_e`.
#[derive(Debug, Clone)]
pub struct EquilateralApproximation {
    pub extended: ExtendedGraph,
    pub h: f64,
    pub subdivisions: Vec<usize>,
    pub cleaned_lengths: Vec<f64>,
    pub mode: ApproximationMode,
}

fn snapped(g: &MetricGraph, h: f64, round_up: bool) -> Result<Vec<usize>, GraphError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(GraphError::InvalidParams("step must be positive".into()));
    }
    let mut out = Vec::with_capacity(g.lengths().len());
    for (e, &l) in g.lengths().iter().enumerate() {
        let ratio = l / h;
        let n = if round_up {
            (ratio - GRID_NUDGE).ceil() as i64
        } else {
            (ratio + GRID_NUDGE).floor() as i64
        };
        if n < 1 {
            return Err(GraphError::StepTooLarge { edge: e, h });
        }
        out.push(n as usize);
    }
    Ok(out)
}

fn build(
    g: &MetricGraph,
    h: f64,
    subdivisions: Vec<usize>,
    mode: ApproximationMode,
) -> Result<EquilateralApproximation, GraphError> {
    let cleaned_lengths: Vec<f64> = subdivisions.iter().map(|&n| h * n as f64).collect();
    let snapped_graph = MetricGraph::new(g.graph().clone(), cleaned_lengths.clone())?;
    let extended = extend(&snapped_graph, &subdivisions)?;
    let exact = cleaned_lengths
        .iter()
        .zip(g.lengths())
        .all(|(a, b)| (a - b).abs() <= 1e-12 * b);
    Ok(EquilateralApproximation {
        extended,
        h,
        subdivisions,
        cleaned_lengths,
        mode: if exact {
            ApproximationMode::Exact
        } else {
            mode
        },
    })
}

/// Equilateral floor approximation: `N_e = floor(l_e / h)`, every snapped
/// length at most the true one. Requires `h <= min l_e`.
pub fn floor_approximation(
    g: &MetricGraph,
    h: f64,
) -> Result<EquilateralApproximation, GraphError> {
    let n = snapped(g, h, false)?;
    build(g, h, n, ApproximationMode::Floor)
}

/// Equilateral ceil approximation: `N_e = ceil(l_e / h)`, every snapped
/// length at least the true one.
pub fn ceil_approximation(g: &MetricGraph, h: f64) -> Result<EquilateralApproximation, GraphError> {
    let n = snapped(g, h, true)?;
    build(g, h, n, ApproximationMode::Ceil)
}

/// Exact equilateral representation of a graph with `digits`-decimal
/// lengths, via the gcd of the scaled integer lengths.
pub fn exact_representation(
    g: &MetricGraph,
    digits: u32,
) -> Result<EquilateralApproximation, GraphError> {
    let extended = gcd_representation(g, digits)?;
    let subdivisions = extended.subdivisions().to_vec();
    let h = extended.metric().lengths()[0];
    let cleaned_lengths = extended.chain_lengths();
    Ok(EquilateralApproximation {
        extended,
        h,
        subdivisions,
        cleaned_lengths,
        mode: ApproximationMode::Exact,
    })
}

/// Euclidean distance between the edge-length vectors of a graph and an
/// approximation derived from it.
pub fn distance(g: &MetricGraph, a: &EquilateralApproximation) -> Result<f64, GraphError> {
    if a.extended.original_edges() != g.graph().edges()
        || a.extended.original_vertex_count() != g.graph().vertex_count()
    {
        return Err(GraphError::TopologyMismatch);
    }
    Ok(g.lengths()
        .iter()
        .zip(&a.cleaned_lengths)
        .map(|(l, s)| (l - s) * (l - s))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFlag {
    /// Determined by vertex values; a genuine eigenvalue estimate.
    Vertex,
    /// Boundary image (`mu` at 0 or 2 with `lambda > 0`); these coincide
    /// with `(k pi / l)^2` grid points excluded from the vertex problem.
    ExcludedBoundary,
}

/// One Laplacian eigenvalue pushed through a branch of the inverse cosine
/// rule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MappedEigenvalue {
    pub lambda: f64,
    pub source_mu: f64,
    pub branch: usize,
    pub flag: SpectrumFlag,
}

/// Mapped spectrum of an equilateral graph, ascending in
/// `(lambda, source_mu, branch)`.
#[derive(Debug, Clone, Default)]
pub struct MappedSpectrum {
    pub entries: Vec<MappedEigenvalue>,
}

impl MappedSpectrum {
    pub fn vertex_lambdas(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.flag == SpectrumFlag::Vertex)
            .map(|e| e.lambda)
            .collect()
    }
}

/// Branch `k` of the vertex-eigenvalue rule: the solutions of
/// `cos(sqrt(lambda) * l) = 1 - mu` are `sqrt(lambda) * l = +-arccos(1-mu)
/// + 2 pi j`, enumerated as even/odd branches.
pub fn mu_to_lambda(mu: f64, ell: f64, k: usize) -> Result<MappedEigenvalue, EquilateralError> {
    if !(-BOUNDARY_MU_TOL..=2.0 + BOUNDARY_MU_TOL).contains(&mu) {
        return Err(EquilateralError::MuOutOfRange(mu));
    }
    let clamped = mu.clamp(0.0, 2.0);
    let pi = std::f64::consts::PI;
    let boundary = clamped <= BOUNDARY_MU_TOL || clamped >= 2.0 - BOUNDARY_MU_TOL;
    // the arccos slope diverges at the boundary, so eigensolver noise in
    // mu would smear the grid values; snap to the exact angle instead
    let a = if boundary {
        if clamped <= BOUNDARY_MU_TOL {
            0.0
        } else {
            pi
        }
    } else {
        (1.0 - clamped).acos()
    };
    let root = if k.is_multiple_of(2) {
        (a + k as f64 * pi) / ell
    } else {
        (a - (k + 1) as f64 * pi) / ell
    };
    let lambda = root * root;
    let flag = if boundary && lambda > BOUNDARY_MU_TOL {
        SpectrumFlag::ExcludedBoundary
    } else {
        SpectrumFlag::Vertex
    };
    Ok(MappedEigenvalue {
        lambda,
        source_mu: clamped,
        branch: k,
        flag,
    })
}

/// Maps the Laplacian spectrum of the extended graph through ascending
/// branches until at least `q` vertex eigenvalues are guaranteed complete,
/// i.e. lie below the cutoff `((k_max + 1) pi / h)^2` that bounds every
/// unexpanded branch from below.
pub fn equilateral_spectrum(
    a: &EquilateralApproximation,
    q: usize,
) -> Result<MappedSpectrum, EquilateralError> {
    let graph = a.extended.metric().graph();
    let order = graph.vertex_count();
    let lap = laplacian::normalized_laplacian(graph);
    let pi = std::f64::consts::PI;

    let mus: Vec<f64> = if order <= laplacian::DENSE_EIG_LIMIT {
        laplacian::eigs_dense(&lap, order)?.values
    } else {
        let n_sub = graph.edge_count() as f64;
        let hint = 1.0 - ((q as f64 + 5.0) * pi / n_sub).min(pi).cos();
        let want = (q + 4).min(order);
        laplacian::smallest_eigs(&lap, want, laplacian::ITER_TOL, hint)?.values
    };
    let complete = mus.len() == order;

    let mut entries: Vec<MappedEigenvalue> = Vec::new();
    let mut k_max = 0usize;
    loop {
        for &mu in &mus {
            entries.push(mu_to_lambda(mu, a.h, k_max)?);
        }
        let cutoff = ((k_max + 1) as f64 * pi / a.h).powi(2);
        let vertex_below = entries
            .iter()
            .filter(|e| e.flag == SpectrumFlag::Vertex && e.lambda < cutoff)
            .count();
        if vertex_below >= q {
            break;
        }
        if !complete {
            // the partial eigenvalue list only supports the principal
            // branch; with subdivided graphs its cutoff is enormous
            return Err(EquilateralError::WindowExhausted {
                found: vertex_below,
                requested: q,
            });
        }
        k_max += 1;
        if (k_max as f64 * pi / a.h).powi(2) > 1e18 {
            return Err(EquilateralError::WindowExhausted {
                found: vertex_below,
                requested: q,
            });
        }
    }
    entries.sort_by(|x, y| {
        (x.lambda, x.source_mu, x.branch)
            .partial_cmp(&(y.lambda, y.source_mu, y.branch))
            .expect("mapped eigenvalues are finite")
    });
    Ok(MappedSpectrum { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketQuality {
    /// `lambda(floor) > lambda(ceil)`: the approximation resolves this
    /// eigenvalue.
    Proper,
    /// Floor and ceil coincide (grid-exact lengths or the zero eigenvalue).
    Equal,
    /// `lambda(floor) < lambda(ceil)`: the step is too coarse here.
    Inverted,
}

/// Newton starting value for one eigenvalue index: the mean of the floor
/// and ceil estimates, with the bracket kept for quality reporting.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InitialGuess {
    /// 1-based eigenvalue index.
    pub index: usize,
    pub value: f64,
    pub floor_lambda: f64,
    pub ceil_lambda: f64,
    pub quality: BracketQuality,
}

/// Initial guesses for the first `q` eigenvalues from the floor/ceil pair
/// at step `h`, paired by sorted index.
pub fn initial_guesses(
    g: &MetricGraph,
    h: f64,
    q: usize,
) -> Result<Vec<InitialGuess>, EquilateralError> {
    let floor = floor_approximation(g, h)?;
    let ceil = ceil_approximation(g, h)?;
    let floor_spec = equilateral_spectrum(&floor, q)?;
    let ceil_spec = equilateral_spectrum(&ceil, q)?;
    let fl = floor_spec.vertex_lambdas();
    let ce = ceil_spec.vertex_lambdas();
    let mut out = Vec::with_capacity(q);
    for i in 0..q.min(fl.len()).min(ce.len()) {
        let (f, c) = (fl[i], ce[i]);
        let quality = if (f - c).abs() <= 1e-12 * f.max(1.0) {
            BracketQuality::Equal
        } else if f > c {
            BracketQuality::Proper
        } else {
            BracketQuality::Inverted
        };
        out.push(InitialGuess {
            index: i + 1,
            value: 0.5 * (f + c),
            floor_lambda: f,
            ceil_lambda: c,
            quality,
        });
    }
    Ok(out)
}
