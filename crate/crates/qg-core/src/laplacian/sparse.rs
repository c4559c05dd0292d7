//! Sparse symmetric storage and a condensation factorization for shifted
//! solves.
//!
//! Matrices of subdivided graphs are mostly chains of degree-two vertices.
//! Gaussian elimination of a degree-two vertex adds at most one fill edge
//! (between its two neighbors), so eliminating every vertex of current
//! degree <= 2 first reduces the matrix to a small dense core on the
//! remaining vertices. The factorization records the elimination steps and
//! LU-factors the core, giving O(order) solves plus a dense solve of core
//! size. Pivot signs expose the inertia (eigenvalue counts) of the shifted
//! matrix.

use nalgebra::{DMatrix, DVector};

/// Symmetric sparse matrix stored as diagonal plus adjacency lists.
/// `rows[i]` holds `(j, value)` for every nonzero off-diagonal, mirrored in
/// `rows[j]`.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub(crate) diag: Vec<f64>,
    pub(crate) rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn zeros(order: usize) -> Self {
        Self {
            diag: vec![0.0; order],
            rows: vec![Vec::new(); order],
        }
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn set_diag(&mut self, i: usize, v: f64) {
        self.diag[i] = v;
    }

    /// Inserts the symmetric pair of off-diagonal entries. The pattern must
    /// not already contain `(i, j)`.
    pub fn push_offdiag(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i != j);
        debug_assert!(self.rows[i].iter().all(|&(k, _)| k != j));
        self.rows[i].push((j, v));
        self.rows[j].push((i, v));
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.order());
        for i in 0..self.order() {
            let mut acc = self.diag[i] * x[i];
            for &(j, v) in &self.rows[i] {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.order())
            .map(|i| self.diag[i].abs() + self.rows[i].iter().map(|&(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for &(j, v) in &self.rows[i] {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.diag[i] = m[(i, i)];
            for j in i + 1..n {
                if m[(i, j)] != 0.0 {
                    s.push_offdiag(i, j, m[(i, j)]);
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorIssue {
    /// A pivot fell below the caller's floor; retry with a nudged shift.
    TinyPivot { vertex: usize, pivot: f64 },
}

struct ElimStep {
    vertex: usize,
    pivot: f64,
    coupled: Vec<(usize, f64)>,
}

/// LDL-style factorization of `M - shift*I` by low-degree condensation.
pub struct CondensedLdl {
    steps: Vec<ElimStep>,
    core: Vec<usize>,
    core_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    order: usize,
}

struct Elimination {
    steps: Vec<ElimStep>,
    core: Vec<usize>,
    core_matrix: DMatrix<f64>,
    negative_pivots: usize,
}

/// Runs the condensation; shared by the solver and the inertia count.
fn eliminate(m: &SparseSym, shift: f64, pivot_floor: f64) -> Result<Elimination, FactorIssue> {
    let n = m.order();
    let mut diag: Vec<f64> = m.diag.iter().map(|&d| d - shift).collect();
    let mut adj: Vec<Vec<(usize, f64)>> = m.rows.clone();
    let mut active = vec![true; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| adj[v].len() <= 2).collect();
    let mut steps = Vec::new();
    let mut negative_pivots = 0usize;

    while let Some(u) = stack.pop() {
        if !active[u] || adj[u].len() > 2 {
            continue;
        }
        let d = diag[u];
        if d.abs() < pivot_floor {
            return Err(FactorIssue::TinyPivot {
                vertex: u,
                pivot: d,
            });
        }
        if d < 0.0 {
            negative_pivots += 1;
        }
        let coupled = std::mem::take(&mut adj[u]);
        // Schur update: diag and, for a degree-two vertex, the fill edge
        // between its two neighbors.
        for &(v, a) in &coupled {
            diag[v] -= a * a / d;
        }
        if let [(v, a), (w, b)] = coupled[..] {
            let delta = -a * b / d;
            if let Some(entry) = adj[v].iter_mut().find(|(k, _)| *k == w) {
                entry.1 += delta;
                let back = adj[w]
                    .iter_mut()
                    .find(|(k, _)| *k == v)
                    .expect("symmetric pattern");
                back.1 += delta;
            } else {
                adj[v].push((w, delta));
                adj[w].push((v, delta));
            }
        }
        for &(v, _) in &coupled {
            let pos = adj[v]
                .iter()
                .position(|&(k, _)| k == u)
                .expect("symmetric pattern");
            adj[v].swap_remove(pos);
            if adj[v].len() <= 2 && active[v] {
                stack.push(v);
            }
        }
        active[u] = false;
        steps.push(ElimStep {
            vertex: u,
            pivot: d,
            coupled,
        });
    }

    let core: Vec<usize> = (0..n).filter(|&v| active[v]).collect();
    let mut core_pos = vec![usize::MAX; n];
    for (p, &v) in core.iter().enumerate() {
        core_pos[v] = p;
    }
    let k = core.len();
    let mut core_matrix = DMatrix::zeros(k, k);
    for (p, &v) in core.iter().enumerate() {
        core_matrix[(p, p)] = diag[v];
        for &(w, val) in &adj[v] {
            core_matrix[(p, core_pos[w])] = val;
        }
    }
    Ok(Elimination {
        steps,
        core,
        core_matrix,
        negative_pivots,
    })
}

impl CondensedLdl {
    /// Factors `M - shift*I`. Pivots smaller in magnitude than
    /// `pivot_floor` are reported instead of divided by.
    pub fn factor(m: &SparseSym, shift: f64, pivot_floor: f64) -> Result<Self, FactorIssue> {
        let elim = eliminate(m, shift, pivot_floor)?;
        let core_lu = if elim.core.is_empty() {
            None
        } else {
            let lu = elim.core_matrix.clone().lu();
            let k = elim.core.len();
            let min_u = (0..k)
                .map(|i| lu.u()[(i, i)].abs())
                .fold(f64::INFINITY, f64::min);
            if min_u < pivot_floor {
                return Err(FactorIssue::TinyPivot {
                    vertex: elim.core[0],
                    pivot: min_u,
                });
            }
            Some(lu)
        };
        Ok(Self {
            steps: elim.steps,
            core: elim.core,
            core_lu,
            order: m.order(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Solves `(M - shift*I) x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        for step in &self.steps {
            let bu = b[step.vertex];
            for &(v, a) in &step.coupled {
                b[v] -= a / step.pivot * bu;
            }
        }
        if let Some(lu) = &self.core_lu {
            let mut rhs = DVector::zeros(self.core.len());
            for (p, &v) in self.core.iter().enumerate() {
                rhs[p] = b[v];
            }
            let sol = lu.solve(&rhs).expect("square LU with nonzero pivots");
            for (p, &v) in self.core.iter().enumerate() {
                b[v] = sol[p];
            }
        }
        for step in self.steps.iter().rev() {
            let mut acc = b[step.vertex];
            for &(v, a) in &step.coupled {
                acc -= a * b[v];
            }
            b[step.vertex] = acc / step.pivot;
        }
    }
}

/// Number of eigenvalues of `M` strictly below `tau`, by Sylvester's law:
/// negative pivots of the condensation plus negative eigenvalues of the
/// dense core of `M - tau*I`. Retries with a nudged `tau` when a pivot
/// lands on zero.
pub fn inertia_below(m: &SparseSym, tau: f64) -> Result<usize, FactorIssue> {
    let scale = m.norm_inf().max(1.0);
    let mut t = tau;
    let mut last = None;
    for attempt in 0..6 {
        match eliminate(m, t, 1e-300) {
            Ok(elim) => {
                let mut count = elim.negative_pivots;
                if !elim.core.is_empty() {
                    // the core is small; an exact symmetric decomposition is
                    // the simplest trustworthy sign count
                    let eig = elim.core_matrix.symmetric_eigenvalues();
                    count += eig.iter().filter(|&&x| x < 0.0).count();
                }
                return Ok(count);
            }
            Err(issue) => {
                last = Some(issue);
                t = tau + scale * 1e-13 * 10f64.powi(attempt);
            }
        }
    }
    Err(last.unwrap())
}
