use std::collections::HashSet;
use std::sync::Arc;

use num_rational::Ratio;
use proptest::prelude::*;

use carpet::energy::{
    cell_average, energy_d, energy_frak_d, graph_energy, mean_operator, series_e, sup_form, CellFunction,
    VertexFunction,
};
use carpet::geometry::{cell_graph, cell_origin, cell_origins, vertex_graph, CellOrigin, Mode, Symmetry, Word};
use carpet::resistance::corner_point;
use carpet::solver::{effective_resistance, effective_resistance_solve, solve_dirichlet, BoundarySpec, SolverOptions};
use carpet::special::{f_triadic, good_energy, TriadicRational};

type Q = Ratio<i128>;

fn rational_values(len: usize) -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec((-20i128..=20, 1i128..=4), len).prop_map(|v| v.into_iter().map(|(a, b)| Q::new(a, b)).collect())
}

#[test]
fn cell_origins_are_exactly_the_valid_cells() {
    for n in 1..=4 {
        let origins = cell_origins(n, Mode::Carpet);
        assert_eq!(origins.len(), 8usize.pow(n));
        let set: HashSet<CellOrigin> = origins.iter().copied().collect();
        assert_eq!(set.len(), origins.len());
        let side = 3u64.pow(n);
        let valid = (0..side)
            .flat_map(|c| (0..side).map(move |r| CellOrigin { column: c, row: r, level: n }))
            .filter(|o| o.is_valid())
            .count();
        assert_eq!(valid, origins.len());
        for (i, o) in origins.iter().enumerate() {
            assert_eq!(cell_origin(&Word::from_index(Mode::Carpet, n, i).unwrap()), *o);
        }
    }
}

#[test]
fn graph_counts_connectivity_and_edge_lengths() {
    for n in 1..=5 {
        let g = vertex_graph(n, Mode::Carpet).unwrap();
        assert_eq!(g.edge_incidences(), 8u64.pow(n + 1));
        assert!(g.is_connected());
        let pts = g.points().unwrap();
        for e in &g.edges {
            let (p, q) = (pts[e.a as usize], pts[e.b as usize]);
            let d = p.x.abs_diff(q.x) + p.y.abs_diff(q.y);
            assert_eq!(d, 1, "edges join lattice neighbours at distance 3^-n / 2");
            assert!(p.x == q.x || p.y == q.y);
        }
    }
    for n in 1..=6 {
        let w = cell_graph(n, Mode::Carpet).unwrap();
        assert_eq!(w.node_count(), 8usize.pow(n));
        assert!(w.is_connected());
    }
}

#[test]
fn symmetries_are_automorphisms() {
    for n in 1..=3 {
        for g in [vertex_graph(n, Mode::Carpet).unwrap(), cell_graph(n, Mode::Carpet).unwrap()] {
            let edges: HashSet<(usize, usize, u32)> = g
                .edges
                .iter()
                .map(|e| ((e.a as usize).min(e.b as usize), (e.a as usize).max(e.b as usize), e.multiplicity))
                .collect();
            for s in Symmetry::ALL {
                let perm = s.permutation(&g).unwrap();
                for e in &g.edges {
                    let (a, b) = (perm[e.a as usize], perm[e.b as usize]);
                    assert!(edges.contains(&(a.min(b), a.max(b), e.multiplicity)));
                }
            }
        }
    }
}

#[test]
fn good_function_properties() {
    for n in 1..=5 {
        let top = 3u64.pow(n);
        let values: Vec<TriadicRational> = (0..=top).map(|i| f_triadic(i, n).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]), "strictly increasing");
        for i in 0..=top {
            let one = TriadicRational::integer(1).ratio();
            assert_eq!(values[(top - i) as usize].ratio(), one - values[i as usize].ratio());
            assert_eq!(f_triadic(3 * i, n + 1).unwrap(), values[i as usize]);
        }
    }
    for n in 1..8 {
        let r = good_energy(n + 1).unwrap().ratio() / good_energy(n).unwrap().ratio();
        assert_eq!(r, Q::new(6, 7));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energies_are_quadratic_and_symmetric(vals in rational_values(264), lam in (-5i128..=5, 1i128..=3)) {
        let g = Arc::new(vertex_graph(2, Mode::Carpet).unwrap());
        prop_assume!(vals.len() == g.node_count());
        let u = VertexFunction::new(g.clone(), vals.clone()).unwrap();
        let e = energy_d(&u);
        prop_assert!(e >= Q::from_integer(0));
        let lam = Q::new(lam.0, lam.1);
        let scaled = VertexFunction::new(g.clone(), vals.iter().map(|v| v * lam).collect()).unwrap();
        prop_assert_eq!(energy_d(&scaled), e * lam * lam);
        let shifted: Vec<Q> = vals.iter().map(|v| v + Q::new(3, 2)).collect();
        prop_assert_eq!(graph_energy(&g, &shifted).unwrap(), e);
        for s in Symmetry::ALL {
            let perm = s.permutation(&g).unwrap();
            prop_assert_eq!(energy_d(&u.permuted(&perm).unwrap()), e);
        }
    }

    #[test]
    fn self_similar_decomposition(vals in rational_values(264)) {
        let fine = Arc::new(vertex_graph(2, Mode::Carpet).unwrap());
        let coarse = Arc::new(vertex_graph(1, Mode::Carpet).unwrap());
        prop_assume!(vals.len() == fine.node_count());
        let u = VertexFunction::new(fine, vals).unwrap();
        let mut sum = Q::from_integer(0);
        for d in 0..8u8 {
            sum += energy_d(&u.compose_map(d, coarse.clone()).unwrap());
        }
        prop_assert_eq!(energy_d(&u), sum);
    }

    #[test]
    fn averaging_commutes_with_mean_operator(vals in rational_values(264)) {
        let g = Arc::new(vertex_graph(2, Mode::Carpet).unwrap());
        prop_assume!(vals.len() == g.node_count());
        let u = VertexFunction::new(g, vals).unwrap();
        let fine = cell_average(&u, 2, 0, Mode::Carpet).unwrap();
        let coarse = cell_average(&u, 1, 1, Mode::Carpet).unwrap();
        prop_assert_eq!(mean_operator(&fine, 1).unwrap().values, coarse.values);
    }

    #[test]
    fn cell_energy_vanishes_on_constants(c in -10i128..10) {
        let w = cell_graph(2, Mode::Carpet).unwrap();
        let f = CellFunction::constant(Mode::Carpet, 2, Q::from_integer(c));
        prop_assert_eq!(energy_frak_d(&w, &f).unwrap(), Q::from_integer(0));
    }

    #[test]
    fn partial_sums_nondecreasing(profile in prop::collection::vec(0.0f64..2.0, 1..12), beta in 1.9f64..2.3) {
        let s = series_e(&profile, beta);
        prop_assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        for k in 1..profile.len() {
            prop_assert!(sup_form(&profile[..k], beta) <= sup_form(&profile[..=k], beta));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn resistance_is_a_metric(a in 0usize..1000, b in 0usize..1000, c in 0usize..1000) {
        let g = vertex_graph(2, Mode::Carpet).unwrap();
        let n = g.node_count();
        let (a, b, c) = (a % n, b % n, c % n);
        prop_assume!(a != b && b != c && a != c);
        let opts = SolverOptions::with_tol(1e-12);
        let r = |x: usize, y: usize| effective_resistance(&g, &[x], &[y], &opts).unwrap();
        let (ab, ba, bc, ac) = (r(a, b), r(b, a), r(b, c), r(a, c));
        prop_assert!(ab > 0.0);
        prop_assert!((ab - ba).abs() <= 1e-9 * ab);
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn dirichlet_solutions_obey_maximum_principle(vals in prop::collection::vec(-3.0f64..3.0, 8)) {
        let g = vertex_graph(3, Mode::Carpet).unwrap();
        let pinned: Vec<(usize, f64)> = (0..8)
            .map(|i| (g.index_of(&corner_point(i, 3)).unwrap(), vals[i]))
            .collect();
        let r = solve_dirichlet(&g, &BoundarySpec::new(pinned), &SolverOptions::with_tol(1e-12)).unwrap();
        let (lo, hi) = vals.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!(r.solution.iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
        prop_assert!(r.max_principle);
        prop_assert!(r.max_harmonic_defect <= 1e-8);
    }
}

#[test]
fn energy_identity_of_resistance() {
    let g = vertex_graph(3, Mode::Carpet).unwrap();
    let a = g.index_of(&corner_point(0, 3)).unwrap();
    let b = g.index_of(&corner_point(4, 3)).unwrap();
    let opts = SolverOptions::with_tol(1e-12);
    let s = effective_resistance_solve(&g, &[a], &[b], None, &opts).unwrap();
    assert!((s.report.energy * s.resistance - 1.0).abs() < 1e-9);
}
