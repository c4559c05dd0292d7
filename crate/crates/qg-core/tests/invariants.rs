//! Cross-module consistency checks: transformations that must leave the
//! spectrum alone, and dual routes that must agree.

use qg_core::equilateral::{equilateral_spectrum, exact_representation};
use qg_core::generate::{generate, random_lengths, GraphKind};
use qg_core::graph::{extend, MetricGraph};
use qg_core::nep::{assemble_h, compute_spectrum, pole_violation};
use qg_core::CombinatorialGraph;

fn path12() -> MetricGraph {
    let g = CombinatorialGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
    MetricGraph::new(g, vec![1.0, 2.0]).unwrap()
}

/// Inserting artificial vertices must not change the spectrum (the
/// eigenvalue problem is posed on the metric structure, not the vertex
/// set). The comparison window stays below the first grid value pi^2 of
/// the original graph, where the vertex formulations coincide.
#[test]
fn spectrum_invariant_under_subdivision() {
    let g = path12();
    let ext = extend(&g, &[2, 3]).unwrap();
    let sub = ext.metric().clone();
    let a = compute_spectrum(&g, 3, 0.125)
        .unwrap()
        .eigenvalues_with_multiplicity();
    let b = compute_spectrum(&sub, 3, 0.125)
        .unwrap()
        .eigenvalues_with_multiplicity();
    assert!(a.len() >= 3 && b.len() >= 3);
    for (x, y) in a.iter().zip(&b).take(3) {
        assert!(
            (x - y).abs() <= 1e-8 * x.max(1.0),
            "subdivided spectrum differs: {x} vs {y}"
        );
    }
}

/// On the subdivided path the grid of edge lengths moves, so the interval
/// eigenvalue pi^2 (a flagged candidate for lengths 1 and 2) becomes an
/// ordinary vertex eigenvalue determined by the artificial vertices.
#[test]
fn subdivision_recovers_grid_candidates() {
    use std::f64::consts::PI;
    let g = path12();
    let original = compute_spectrum(&g, 6, 0.125).unwrap();
    assert!(original
        .candidates
        .iter()
        .any(|c| (c.lambda - PI * PI).abs() < 1e-9));
    assert!(original
        .entries
        .iter()
        .all(|e| (e.lambda - PI * PI).abs() > 1e-3));

    let sub = extend(&g, &[2, 3]).unwrap().metric().clone();
    let refined = compute_spectrum(&sub, 4, 0.125).unwrap();
    assert!(
        refined
            .entries
            .iter()
            .any(|e| (e.lambda - PI * PI).abs() <= 1e-8 * PI * PI),
        "pi^2 not recovered on the subdivided graph"
    );
}

/// Newton-accepted eigenvalues of a grid-exact graph must appear in the
/// reference spectrum computed through the gcd representation.
#[test]
fn accepted_roots_appear_in_reference() {
    let graph = generate(GraphKind::Star { n: 5 }, 0).unwrap();
    let lengths = random_lengths(4, 1.0, 2.0, 3, 23).unwrap();
    let g = MetricGraph::new(graph, lengths).unwrap();
    let q = 8;
    let newton = compute_spectrum(&g, q, 2f64.powi(-5)).unwrap();
    let reference = equilateral_spectrum(&exact_representation(&g, 3).unwrap(), q + 4)
        .unwrap()
        .vertex_lambdas();
    for e in &newton.entries {
        if e.lambda == 0.0 {
            continue;
        }
        let nearest = reference
            .iter()
            .map(|r| (r - e.lambda).abs() / e.lambda)
            .fold(f64::INFINITY, f64::min);
        assert!(
            nearest <= 1e-6,
            "accepted root {} not in reference (nearest rel {nearest:.2e})",
            e.lambda
        );
    }
    // and the two routes agree value by value on the first q
    let newton_eigs = newton.eigenvalues_with_multiplicity();
    for (i, (a, b)) in newton_eigs.iter().zip(&reference).take(q).enumerate() {
        assert!(
            (a - b).abs() <= 1e-6 * b.max(1e-9),
            "index {i}: newton {a} vs reference {b}"
        );
    }
}

/// H stays symmetric with the adjacency sparsity pattern at every
/// admissible evaluation point.
#[test]
fn h_symmetry_and_pattern() {
    let graph = generate(GraphKind::BarabasiAlbert { n: 14, k: 2 }, 5).unwrap();
    let lengths = random_lengths(24, 1.0, 2.0, 3, 5).unwrap();
    let g = MetricGraph::new(graph, lengths).unwrap();
    let mut z = 0.11;
    let mut sampled = 0;
    while sampled < 25 {
        z += 0.83;
        if pole_violation(&g, z).is_some() {
            continue;
        }
        sampled += 1;
        let h = assemble_h(&g, z).unwrap();
        let n = h.nrows();
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(h[(i, j)], h[(j, i)]);
                let adjacent = g.graph().neighbors(i).iter().any(|&(w, _)| w == j);
                assert_eq!(
                    h[(i, j)] != 0.0,
                    adjacent,
                    "pattern breach at ({i},{j}), z={z}"
                );
            }
        }
    }
}
