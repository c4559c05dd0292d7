//! Combinatorial and metric graphs, plus the transformations on which the
//! equilateral machinery rests: cleaning degree-two vertices, subdividing
//! edges into extended graphs, and exact gcd representations of graphs with
//! decimal edge lengths.

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("vertex index {vertex} out of range for {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph must have at least one edge")]
    NoEdges,
    #[error("edge {index} has non-positive length {length}")]
    NonPositiveLength { index: usize, length: f64 },
    #[error("expected {expected} edge lengths, got {got}")]
    LengthCountMismatch { expected: usize, got: usize },
    #[error("every vertex has degree two; a pure cycle cannot be cleaned")]
    AllDegreeTwo,
    #[error("step {h} is larger than edge {edge}; no subdivision fits")]
    StepTooLarge { edge: usize, h: f64 },
    #[error("length {length} of edge {edge} is not exact at {digits} decimal digits")]
    NotRepresentable {
        edge: usize,
        length: f64,
        digits: u32,
    },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("approximation was not derived from this graph")]
    TopologyMismatch,
    #[error("subdivision count for edge {edge} must be at least 1")]
    ZeroSubdivision { edge: usize },
}

/// Undirected simple connected graph with vertices `0..n`.
///
/// Edges are stored normalized as `(min, max)` pairs in construction order;
/// all per-edge data elsewhere in the crate is indexed identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinatorialGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    // adjacency[v] = (neighbor, edge index) pairs in edge insertion order
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl CombinatorialGraph {
    /// Validates and builds a graph: simple (no self-loops or duplicate
    /// edges), connected, every vertex of degree at least one.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n {
                return Err(GraphError::InvalidVertex { vertex: a, n });
            }
            if b >= n {
                return Err(GraphError::InvalidVertex { vertex: b, n });
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (idx, &(a, b)) in normalized.iter().enumerate() {
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
        }
        let graph = Self {
            n,
            edges: normalized,
            adjacency,
        };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Neighbors of `v` as `(neighbor, edge index)` pairs.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n];
        let mut stack = vec![0usize];
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// BFS two-coloring; used as an independent check against the spectral
    /// characterization of bipartiteness.
    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![u8::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        color[0] = 0;
        queue.push_back(0usize);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.adjacency[v] {
                if color[w] == u8::MAX {
                    color[w] = 1 - color[v];
                    queue.push_back(w);
                } else if color[w] == color[v] {
                    return false;
                }
            }
        }
        true
    }
}

/// A combinatorial graph whose edges carry positive lengths; edges are
/// identified with intervals `[0, l_e]` oriented from the lower-indexed
/// vertex to the higher-indexed one.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    graph: CombinatorialGraph,
    lengths: Vec<f64>,
}

impl MetricGraph {
    pub fn new(graph: CombinatorialGraph, lengths: Vec<f64>) -> Result<Self, GraphError> {
        if lengths.len() != graph.edge_count() {
            return Err(GraphError::LengthCountMismatch {
                expected: graph.edge_count(),
                got: lengths.len(),
            });
        }
        for (i, &l) in lengths.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(GraphError::NonPositiveLength {
                    index: i,
                    length: l,
                });
            }
        }
        Ok(Self { graph, lengths })
    }

    pub fn graph(&self) -> &CombinatorialGraph {
        &self.graph
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, edge: usize) -> f64 {
        self.lengths[edge]
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn min_length(&self) -> f64 {
        self.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Removes every degree-two vertex by merging its two incident edges into
/// one of summed length. Spectrum-preserving under Neumann-Kirchhoff
/// conditions.
///
/// Fails with `AllDegreeTwo` when the graph is a pure cycle (no anchor
/// vertex remains), and with `SelfLoop`/`DuplicateEdge` when merging chains
/// would leave the simple-graph data model.
pub fn clean(g: &MetricGraph) -> Result<MetricGraph, GraphError> {
    let graph = g.graph();
    let n = graph.vertex_count();
    let anchors: Vec<usize> = (0..n).filter(|&v| graph.degree(v) != 2).collect();
    if anchors.is_empty() {
        return Err(GraphError::AllDegreeTwo);
    }
    let mut anchor_id = vec![usize::MAX; n];
    for (new, &old) in anchors.iter().enumerate() {
        anchor_id[old] = new;
    }

    let mut edge_visited = vec![false; graph.edge_count()];
    let mut new_edges = Vec::new();
    let mut new_lengths = Vec::new();
    for &a in &anchors {
        for &(first, first_edge) in graph.neighbors(a) {
            if edge_visited[first_edge] {
                continue;
            }
            // walk the chain of degree-two vertices starting along this edge
            let mut cur = first;
            let mut cur_edge = first_edge;
            let mut total = g.length(first_edge);
            edge_visited[first_edge] = true;
            while graph.degree(cur) == 2 {
                let &(next, next_edge) = graph
                    .neighbors(cur)
                    .iter()
                    .find(|&&(_, e)| e != cur_edge)
                    .expect("degree-two vertex has a second incident edge");
                edge_visited[next_edge] = true;
                total += g.length(next_edge);
                cur = next;
                cur_edge = next_edge;
            }
            if cur == a {
                return Err(GraphError::SelfLoop(a));
            }
            new_edges.push((anchor_id[a], anchor_id[cur]));
            new_lengths.push(total);
        }
    }
    // CombinatorialGraph::new re-validates; a theta-like chain pair between
    // the same anchors surfaces here as DuplicateEdge.
    let cleaned = CombinatorialGraph::new(anchors.len(), &new_edges)?;
    MetricGraph::new(cleaned, new_lengths)
}

/// A metric graph obtained from an original one by inserting artificial
/// degree-two vertices along edges, with provenance back to the original.
///
/// Original vertices keep their indices `0..n`; artificial vertices are
/// appended per edge in subdivision order.
#[derive(Debug, Clone)]
pub struct ExtendedGraph {
    metric: MetricGraph,
    /// original edge index for each sub-edge
    origin_edge: Vec<usize>,
    /// `Some(original index)` for original vertices, `None` for artificial
    original_vertex: Vec<Option<usize>>,
    original_n: usize,
    original_edges: Vec<(usize, usize)>,
    subdivisions: Vec<usize>,
    /// first artificial vertex index for each original edge (undefined
    /// when the edge is not subdivided)
    chain_start: Vec<usize>,
}

impl ExtendedGraph {
    pub fn metric(&self) -> &MetricGraph {
        &self.metric
    }

    pub fn origin_edge(&self) -> &[usize] {
        &self.origin_edge
    }

    pub fn original_vertex(&self) -> &[Option<usize>] {
        &self.original_vertex
    }

    pub fn original_vertex_count(&self) -> usize {
        self.original_n
    }

    pub fn original_edges(&self) -> &[(usize, usize)] {
        &self.original_edges
    }

    pub fn subdivisions(&self) -> &[usize] {
        &self.subdivisions
    }

    /// Vertex indices along original edge `e`, endpoints included, ordered
    /// from the lower-indexed original endpoint to the higher-indexed one.
    pub fn chain(&self, e: usize) -> Vec<usize> {
        let (u, v) = self.original_edges[e];
        let mut chain = Vec::with_capacity(self.subdivisions[e] + 1);
        chain.push(u);
        for i in 0..self.subdivisions[e] - 1 {
            chain.push(self.chain_start[e] + i);
        }
        chain.push(v);
        chain
    }

    /// Summed sub-edge lengths per original edge.
    pub fn chain_lengths(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.original_edges.len()];
        for (sub, &orig) in self.origin_edge.iter().enumerate() {
            out[orig] += self.metric.length(sub);
        }
        out
    }

    /// Collapses each chain back to a single edge using the stored
    /// provenance. Unlike [`clean`], this also recovers cycles, whose
    /// original vertices have degree two themselves.
    pub fn to_original(&self) -> MetricGraph {
        let graph = CombinatorialGraph::new(self.original_n, &self.original_edges)
            .expect("provenance topology is valid by construction");
        MetricGraph::new(graph, self.chain_lengths())
            .expect("chain lengths are positive by construction")
    }

    /// `true` when all sub-edges share one length up to relative 1e-9.
    pub fn is_equilateral(&self) -> bool {
        let lengths = self.metric.lengths();
        let lo = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lengths.iter().cloned().fold(0.0f64, f64::max);
        hi - lo <= 1e-9 * hi
    }
}

/// Replaces each edge `e` by `subdivisions[e]` sub-edges of equal length
/// joined at artificial vertices.
pub fn extend(g: &MetricGraph, subdivisions: &[usize]) -> Result<ExtendedGraph, GraphError> {
    let graph = g.graph();
    if subdivisions.len() != graph.edge_count() {
        return Err(GraphError::LengthCountMismatch {
            expected: graph.edge_count(),
            got: subdivisions.len(),
        });
    }
    if let Some(edge) = subdivisions.iter().position(|&k| k == 0) {
        return Err(GraphError::ZeroSubdivision { edge });
    }
    let n = graph.vertex_count();
    let total_new: usize = subdivisions.iter().map(|&k| k - 1).sum();
    let mut edges = Vec::with_capacity(subdivisions.iter().sum());
    let mut lengths = Vec::with_capacity(edges.capacity());
    let mut origin_edge = Vec::with_capacity(edges.capacity());
    let mut original_vertex: Vec<Option<usize>> = (0..n).map(Some).collect();
    original_vertex.extend(std::iter::repeat_n(None, total_new));
    let mut chain_start = vec![usize::MAX; graph.edge_count()];

    let mut next = n;
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        let k = subdivisions[e];
        let sub_len = g.length(e) / k as f64;
        chain_start[e] = next;
        let mut prev = u;
        for i in 0..k {
            let to = if i + 1 == k { v } else { next + i };
            edges.push((prev, to));
            lengths.push(sub_len);
            origin_edge.push(e);
            prev = to;
        }
        next += k - 1;
    }

    let extended_graph = CombinatorialGraph::new(n + total_new, &edges)
        .expect("subdividing a valid graph preserves validity");
    let metric = MetricGraph::new(extended_graph, lengths)?;
    Ok(ExtendedGraph {
        metric,
        origin_edge,
        original_vertex,
        original_n: n,
        original_edges: graph.edges().to_vec(),
        subdivisions: subdivisions.to_vec(),
        chain_start,
    })
}

/// Exact equilateral representation of a graph whose lengths sit on the
/// `10^-digits` decimal grid: the sub-edge length is the greatest common
/// divisor of the scaled integer lengths.
///
/// Integer arithmetic after scaling avoids gcd failures from floating
/// noise.
pub fn gcd_representation(g: &MetricGraph, digits: u32) -> Result<ExtendedGraph, GraphError> {
    if digits > 12 {
        return Err(GraphError::InvalidParams(
            "at most 12 decimal digits supported".into(),
        ));
    }
    let scale = 10u64.pow(digits) as f64;
    let mut scaled = Vec::with_capacity(g.lengths().len());
    for (e, &l) in g.lengths().iter().enumerate() {
        let s = l * scale;
        let r = s.round();
        if (s - r).abs() > 1e-6 || r < 1.0 {
            return Err(GraphError::NotRepresentable {
                edge: e,
                length: l,
                digits,
            });
        }
        scaled.push(r as u64);
    }
    let g_int = scaled.iter().fold(0u64, |acc, &x| gcd_u64(acc, x));
    let subdivisions: Vec<usize> = scaled.iter().map(|&x| (x / g_int) as usize).collect();
    extend(g, &subdivisions)
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd_u64(b, a % b)
    }
}
