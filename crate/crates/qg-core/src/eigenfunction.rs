//! Eigenfunction reconstruction from vertex values.
//!
//! A vertex eigenfunction restricted to edge `(u, v)` is
//! `phi(x) = [Phi(u) sin(s (l - x)) + Phi(v) sin(s x)] / sin(s l)` with
//! `s = sqrt(lambda)`, i.e. a trigonometric arc pinned to the vertex
//! values. Everything here works on the expanded coefficients
//! `A cos(s x) + B sin(s x)` per edge, normalized in L2 through exact
//! antiderivatives rather than quadrature.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::MetricGraph;
use crate::nep::{assemble_h, SIN_GUARD};

#[derive(Debug, Error)]
pub enum EigenfunctionError {
    #[error("sin(sqrt(lambda) l) vanishes on edge {edge}; lambda is a non-vertex candidate")]
    NonVertexLambda { edge: usize },
    #[error("vector is not a null vector of H(lambda): relative residual {residual:.3e}")]
    NotNullvector { residual: f64 },
    #[error("x = {x} outside [0, {len}] on edge {edge}")]
    OutOfRange { edge: usize, x: f64, len: f64 },
    #[error("lambda must be positive here; lambda = 0 has the constant eigenfunction")]
    NonPositiveLambda(f64),
    #[error("expected {expected} vertex values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// One eigenfunction: the eigenvalue, the vertex values, and per-edge
/// coefficients of `A cos(s x) + B sin(s x)` with `x` running from the
/// lower-indexed endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenfunction {
    pub lambda: f64,
    pub vertex_values: Vec<f64>,
    pub coefficients: Vec<(f64, f64)>,
    edge_lengths: Vec<f64>,
}

/// Closed-form L2 inner product of two coefficient pairs on one edge.
fn edge_inner(s: f64, len: f64, (a1, b1): (f64, f64), (a2, b2): (f64, f64)) -> f64 {
    if s == 0.0 {
        return a1 * a2 * len;
    }
    let two_sl = 2.0 * s * len;
    let icc = 0.5 * len + two_sl.sin() / (4.0 * s);
    let iss = 0.5 * len - two_sl.sin() / (4.0 * s);
    let isc = (s * len).sin().powi(2) / (2.0 * s);
    a1 * a2 * icc + b1 * b2 * iss + (a1 * b2 + a2 * b1) * isc
}

impl Eigenfunction {
    /// L2 inner product over the whole graph.
    pub fn inner(&self, other: &Eigenfunction) -> f64 {
        let s = self.lambda.sqrt();
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .zip(&self.edge_lengths)
            .map(|((&c1, &c2), &len)| edge_inner(s, len, c1, c2))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.vertex_values {
            *v *= factor;
        }
        for c in &mut self.coefficients {
            c.0 *= factor;
            c.1 *= factor;
        }
    }

    fn axpy(&mut self, coeff: f64, other: &Eigenfunction) {
        for (v, o) in self.vertex_values.iter_mut().zip(&other.vertex_values) {
            *v += coeff * o;
        }
        for (c, o) in self.coefficients.iter_mut().zip(&other.coefficients) {
            c.0 += coeff * o.0;
            c.1 += coeff * o.1;
        }
    }

    /// Value at arc position `x` from the lower-indexed endpoint of the
    /// edge.
    pub fn evaluate(&self, edge: usize, x: f64) -> Result<f64, EigenfunctionError> {
        let len = self.edge_lengths[edge];
        if !(0.0..=len * (1.0 + 1e-12)).contains(&x) {
            return Err(EigenfunctionError::OutOfRange { edge, x, len });
        }
        let (a, b) = self.coefficients[edge];
        if self.lambda == 0.0 {
            return Ok(a);
        }
        let s = self.lambda.sqrt();
        Ok(a * (s * x).cos() + b * (s * x).sin())
    }

    /// Outward derivative at the endpoint of `edge` touching `vertex`.
    fn outward_derivative(&self, edge: usize, at_lower: bool) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let s = self.lambda.sqrt();
        let (a, b) = self.coefficients[edge];
        let len = self.edge_lengths[edge];
        if at_lower {
            s * b
        } else {
            s * (a * (s * len).sin() - b * (s * len).cos())
        }
    }
}

/// The normalized constant eigenfunction for `lambda = 0`.
pub fn constant(g: &MetricGraph) -> Eigenfunction {
    let value = 1.0 / g.total_length().sqrt();
    Eigenfunction {
        lambda: 0.0,
        vertex_values: vec![value; g.graph().vertex_count()],
        coefficients: vec![(value, 0.0); g.graph().edge_count()],
        edge_lengths: g.lengths().to_vec(),
    }
}

/// Builds the unit-L2 eigenfunction for a positive vertex eigenvalue from
/// its vertex-value null vector.
///
/// The null-vector gate is deliberately loose: detailed defect measurement
/// belongs to [`residuals`], which must stay applicable to perturbed
/// inputs.
pub fn reconstruct(
    g: &MetricGraph,
    lambda: f64,
    phi: &DVector<f64>,
) -> Result<Eigenfunction, EigenfunctionError> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(EigenfunctionError::NonPositiveLambda(lambda));
    }
    let n = g.graph().vertex_count();
    if phi.len() != n {
        return Err(EigenfunctionError::DimensionMismatch {
            expected: n,
            got: phi.len(),
        });
    }
    let s = lambda.sqrt();
    if let Some(edge) = g
        .lengths()
        .iter()
        .position(|&l| (s * l).sin().abs() <= SIN_GUARD)
    {
        return Err(EigenfunctionError::NonVertexLambda { edge });
    }
    let phi_norm = phi.amax();
    if phi_norm == 0.0 {
        return Err(EigenfunctionError::NotNullvector {
            residual: f64::INFINITY,
        });
    }
    let h = assemble_h(g, lambda).map_err(|_| EigenfunctionError::NonVertexLambda { edge: 0 })?;
    let residual = (&h * phi).amax() / (h.amax() * phi_norm);
    if residual > 1e-2 {
        return Err(EigenfunctionError::NotNullvector { residual });
    }

    let mut coefficients = Vec::with_capacity(g.graph().edge_count());
    for (e, &(u, v)) in g.graph().edges().iter().enumerate() {
        let len = g.length(e);
        let sin = (s * len).sin();
        let cos = (s * len).cos();
        let a = phi[u];
        let b = (phi[v] - phi[u] * cos) / sin;
        coefficients.push((a, b));
    }
    let mut f = Eigenfunction {
        lambda,
        vertex_values: phi.iter().cloned().collect(),
        coefficients,
        edge_lengths: g.lengths().to_vec(),
    };
    let norm = f.l2_norm();
    f.scale(1.0 / norm);
    Ok(f)
}

/// Reconstructs a family for a multiple eigenvalue and orthonormalizes it
/// in L2 by Gram-Schmidt.
pub fn reconstruct_family(
    g: &MetricGraph,
    lambda: f64,
    basis: &[DVector<f64>],
) -> Result<Vec<Eigenfunction>, EigenfunctionError> {
    let mut out: Vec<Eigenfunction> = Vec::with_capacity(basis.len());
    for phi in basis {
        let mut f = reconstruct(g, lambda, phi)?;
        for prev in &out {
            let c = f.inner(prev);
            f.axpy(-c, prev);
        }
        let norm = f.l2_norm();
        if norm > 1e-8 {
            f.scale(1.0 / norm);
            out.push(f);
        }
    }
    Ok(out)
}

/// Defect measures of a candidate eigenfunction: vertex continuity gap,
/// largest Kirchhoff sum of outward derivatives, and the pointwise ODE
/// residual `phi'' + lambda phi` sampled along edges.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Residuals {
    pub continuity_gap: f64,
    pub kirchhoff_max: f64,
    pub ode_residual: f64,
}

pub fn residuals(f: &Eigenfunction, g: &MetricGraph) -> Residuals {
    let mut continuity: f64 = 0.0;
    let mut kirchhoff = vec![0.0f64; g.graph().vertex_count()];
    let mut ode: f64 = 0.0;
    let s2 = f.lambda.sqrt() * f.lambda.sqrt();
    for (e, &(u, v)) in g.graph().edges().iter().enumerate() {
        let len = g.length(e);
        let at_u = f.evaluate(e, 0.0).expect("endpoint in range");
        let at_v = f.evaluate(e, len).expect("endpoint in range");
        continuity = continuity
            .max((at_u - f.vertex_values[u]).abs())
            .max((at_v - f.vertex_values[v]).abs());
        kirchhoff[u] += f.outward_derivative(e, true);
        kirchhoff[v] += f.outward_derivative(e, false);
        for i in 1..=5 {
            let x = len * i as f64 / 6.0;
            let value = f.evaluate(e, x).expect("sample in range");
            let second = -s2 * value;
            ode = ode.max((second + f.lambda * value).abs());
        }
    }
    Residuals {
        continuity_gap: continuity,
        kirchhoff_max: kirchhoff.iter().fold(0.0f64, |a, &k| a.max(k.abs())),
        ode_residual: ode,
    }
}
