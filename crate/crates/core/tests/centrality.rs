use nalgebra::DMatrix;
use netshock::graph::{
    betweenness_centrality, brandes_betweenness, degree_centrality, eigenvector_centrality, DegreeVariant,
    TradeGraph,
};
use num_rational::Rational64;
use proptest::prelude::*;

fn edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0..n, 0..n), 0..n * 3)
}

/// Betweenness by listing every shortest path between every unordered pair.
fn enumerate_betweenness(adj: &[Vec<usize>]) -> Vec<Rational64> {
    let n = adj.len();
    let mut out = vec![Rational64::from_integer(0); n];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut frontier = vec![vec![s]];
            while paths.is_empty() && !frontier.is_empty() {
                let mut next = Vec::new();
                for path in &frontier {
                    for &w in &adj[*path.last().unwrap()] {
                        if path.contains(&w) {
                            continue;
                        }
                        let mut p = path.clone();
                        p.push(w);
                        if w == t {
                            paths.push(p);
                        } else {
                            next.push(p);
                        }
                    }
                }
                frontier = next;
            }
            let total = paths.len() as i64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    out[v] += Rational64::new(1, total);
                }
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn brandes_is_exact(n in 1usize..9, e in edges(8)) {
        let e: Vec<(usize, usize)> = e.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = TradeGraph::from_indexed(n, &e);
        let exact = brandes_betweenness::<Rational64>(g.adjacency(), g.present_mask());
        prop_assert_eq!(&exact, &enumerate_betweenness(g.adjacency()));
        let float = betweenness_centrality(&g).to_dense();
        for (f, r) in float.iter().zip(&exact) {
            prop_assert!((f - *r.numer() as f64 / *r.denom() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn relabelling_permutes_scores(n in 2usize..30, e in edges(30), shift in 1usize..29) {
        let e: Vec<(usize, usize)> = e.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let perm = |i: usize| (i + shift) % n;
        let g = TradeGraph::from_indexed(n, &e);
        let h = TradeGraph::from_indexed(n, &e.iter().map(|&(a, b)| (perm(a), perm(b))).collect::<Vec<_>>());
        let (bg, bh) = (betweenness_centrality(&g).to_dense(), betweenness_centrality(&h).to_dense());
        let (dg, dh) = (degree_centrality(&g, DegreeVariant::Total).to_dense(), degree_centrality(&h, DegreeVariant::Total).to_dense());
        for i in 0..n {
            prop_assert!((bg[i] - bh[perm(i)]).abs() < 1e-9);
            prop_assert_eq!(dg[i], dh[perm(i)]);
        }
    }

    #[test]
    fn degrees_count_links(n in 2usize..30, e in edges(30)) {
        let e: Vec<(usize, usize)> = e.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = TradeGraph::from_indexed(n, &e);
        let total: f64 = degree_centrality(&g, DegreeVariant::Total).to_dense().iter().sum();
        let out: f64 = degree_centrality(&g, DegreeVariant::Out).to_dense().iter().sum();
        let inn: f64 = degree_centrality(&g, DegreeVariant::In).to_dense().iter().sum();
        prop_assert_eq!(out, inn);
        prop_assert_eq!(out as usize, g.directed_edges().len());
        prop_assert_eq!(total as usize, 2 * g.n_links());
    }
}

fn connected_graph(n: usize, extra: &[(usize, usize)]) -> TradeGraph {
    let mut e: Vec<(usize, usize)> = (1..n).map(|i| ((i * 7919 + 13) % i, i)).collect();
    e.extend(extra.iter().filter(|&&(a, b)| a < n && b < n));
    TradeGraph::from_indexed(n, &e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn eigenvector_matches_dense_solver(n in 2usize..50, extra in edges(50)) {
        let g = connected_graph(n, &extra);
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, nb) in g.adjacency().iter().enumerate() {
            for &j in nb {
                a[(i, j)] = 1.0;
            }
        }
        let eig = a.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let ours = eigenvector_centrality(&g, 1e-13, 1_000_000).unwrap();
        prop_assert!((ours.eigenvalue - eig.eigenvalues[top]).abs() < 1e-8);
        for (x, y) in ours.centrality.to_dense().iter().zip(&v) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}
