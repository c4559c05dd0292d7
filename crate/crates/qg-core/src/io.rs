//! File formats: the graph JSON schema and flat CSV exports for spectra,
//! scans, sweeps and sampled eigenfunctions.
//!
//! Vertex indices are 0-based everywhere. Floating-point values are
//! written with shortest round-trip formatting, so reruns of identical
//! computations produce byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CombinatorialGraph, GraphError, MetricGraph};
use crate::nep::SpectrumResult;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// On-disk graph: `{ "n": int, "edges": [[i, j], ...], "lengths": [...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub lengths: Vec<f64>,
}

impl GraphFile {
    pub fn from_metric(g: &MetricGraph) -> Self {
        Self {
            n: g.graph().vertex_count(),
            edges: g.graph().edges().iter().map(|&(a, b)| [a, b]).collect(),
            lengths: g.lengths().to_vec(),
        }
    }

    pub fn to_metric(&self) -> Result<MetricGraph, GraphError> {
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = CombinatorialGraph::new(self.n, &edges)?;
        MetricGraph::new(graph, self.lengths.clone())
    }
}

pub fn read_graph(path: &Path) -> Result<MetricGraph, IoError> {
    let text = std::fs::read_to_string(path)?;
    let file: GraphFile = serde_json::from_str(&text)?;
    Ok(file.to_metric()?)
}

pub fn write_graph(path: &Path, g: &MetricGraph) -> Result<(), IoError> {
    let file = GraphFile::from_metric(g);
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_spectrum_json(path: &Path, result: &SpectrumResult) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(result)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// One row per eigenvalue entry; columns documented in the README and kept
/// stable.
pub fn write_spectrum_csv(path: &Path, result: &SpectrumResult) -> Result<(), IoError> {
    let mut out = Vec::new();
    writeln!(
        out,
        "lambda,initial_guess,iterations,rcond,status,multiplicity,bracket_floor,bracket_ceil,bracket_quality"
    )?;
    for e in &result.entries {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            e.lambda,
            e.initial_guess,
            e.iterations,
            e.rcond.map(|r| r.to_string()).unwrap_or_default(),
            label(&e.status),
            e.multiplicity,
            e.bracket_floor,
            e.bracket_ceil,
            quality_label(&e.bracket_quality),
        )?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn label(status: &crate::nep::NewtonStatus) -> &'static str {
    match status {
        crate::nep::NewtonStatus::Converged => "converged",
        crate::nep::NewtonStatus::MaxIterations => "max_iterations",
        crate::nep::NewtonStatus::SingularityEncountered => "singularity_encountered",
    }
}

fn quality_label(q: &crate::equilateral::BracketQuality) -> &'static str {
    match q {
        crate::equilateral::BracketQuality::Proper => "proper",
        crate::equilateral::BracketQuality::Equal => "equal",
        crate::equilateral::BracketQuality::Inverted => "inverted",
    }
}
