use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use serde_json::json;

use iglab::forms::{cutoff_eta, energy, random_identity_suite};
use iglab::gallery::RunRecord;
use iglab::io::{parse_graph, write_graph};
use iglab::metric::{le_tol, strongly_intrinsic_check, EdgeLengths, PathMetric, SigmaChoice};
use iglab::potential::equilibrium;
use iglab::random::{random_graph, trial_rng};
use iglab::series::assess;
use iglab::{Budget, Execution, GraphFamily, VertexModel, VertexSet, WeightedGraph};

fn graph(seed: u64, n: usize) -> WeightedGraph {
    random_graph(&mut trial_rng(seed, 0), n)
}

fn subset(mask: u32, n: usize) -> Vec<usize> {
    let ids: Vec<usize> = (0..n).filter(|&x| mask & (1 << x) != 0).collect();
    if ids.is_empty() {
        vec![0]
    } else {
        ids
    }
}

fn dense_cap_sq(g: &WeightedGraph, u: &[usize]) -> f64 {
    let n = g.len();
    let a = DMatrix::<f64>::from_fn(n, n, |x, y| {
        if x == y {
            g.measure(x) + g.neighbors(x).map(|(_, w)| w).sum::<f64>()
        } else {
            -g.weight(x, y)
        }
    });
    let free: Vec<usize> = (0..n).filter(|x| !u.contains(x)).collect();
    let mut e = DVector::<f64>::from_element(n, 1.0);
    if !free.is_empty() {
        let aff = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
        let b = DVector::from_fn(free.len(), |i, _| {
            -u.iter().map(|&y| a[(free[i], y)]).sum::<f64>()
        });
        let ef = aff.lu().solve(&b).expect("nonsingular");
        for (i, &x) in free.iter().enumerate() {
            e[x] = ef[i];
        }
    }
    (e.transpose() * &a * &e)[(0, 0)]
}

fn ray(a: f64, b: f64, mu0: f64, q: f64) -> GraphFamily {
    GraphFamily::new(
        "ray",
        VertexModel::Ray,
        move |x, y| {
            if (x - y).abs() == 1 {
                a * b.powi(x.min(y) as i32)
            } else {
                0.0
            }
        },
        move |x| mu0 * q.powi(x as i32),
    )
}

proptest! {
    #[test]
    fn weights_symmetric_and_row_sums_cached(seed in any::<u64>(), n in 1usize..=12) {
        let g = graph(seed, n);
        for x in 0..n {
            for y in 0..n {
                prop_assert_eq!(g.weight(x, y).to_bits(), g.weight(y, x).to_bits());
            }
            let fresh = g.recompute_row_sum(x);
            prop_assert!((g.row_sum(x) - fresh).abs() <= 1e-14 * fresh.max(1.0));
        }
    }

    #[test]
    fn neighborhood_contains_the_set(seed in any::<u64>(), n in 1usize..=12, mask in any::<u32>()) {
        let g = graph(seed, n);
        let k = VertexSet::new(subset(mask, n), n).unwrap();
        let nk = g.combinatorial_neighborhood(&k).unwrap();
        prop_assert!(nk.is_superset(&k));
        for &x in k.iter() {
            for (y, _) in g.neighbors(x) {
                prop_assert!(nk.contains(y));
            }
        }
    }

    #[test]
    fn truncations_are_nested(a in 0.1f64..4.0, b in 0.5f64..2.0, mu0 in 0.1f64..2.0, q in 0.3f64..1.5, n in 2usize..30, extra in 1usize..30) {
        let fam = ray(a, b, mu0, q);
        let small = fam.truncate(n).unwrap();
        let big = fam.truncate(n + extra).unwrap();
        for x in 0..n {
            prop_assert_eq!(small.measure(x), big.measure(x));
            for y in 0..n {
                prop_assert_eq!(small.weight(x, y), big.weight(x, y));
            }
        }
        prop_assert_eq!(small.leak(n - 1), big.weight(n - 1, n));
        prop_assert!(small.is_frontier(n - 1));
    }

    #[test]
    fn graph_text_round_trip(seed in any::<u64>(), n in 1usize..=12) {
        let g = graph(seed, n);
        prop_assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn standard_lengths_are_strongly_intrinsic(seed in any::<u64>(), n in 1usize..=12) {
        let g = graph(seed, n);
        for s in [EdgeLengths::sigma0(&g).unwrap(), EdgeLengths::sigma1(&g).unwrap()] {
            prop_assert!(strongly_intrinsic_check(&g, &s).passed());
        }
    }

    #[test]
    fn path_metric_is_a_metric(seed in any::<u64>(), n in 1usize..=10) {
        let g = graph(seed, n);
        let m = PathMetric::new(&g, EdgeLengths::sigma1(&g).unwrap());
        for x in 0..n {
            prop_assert_eq!(m.distance(x, x).unwrap(), 0.0);
            for y in 0..n {
                let dxy = m.distance(x, y).unwrap();
                prop_assert!((dxy - m.distance(y, x).unwrap()).abs() <= 1e-12 * dxy.max(1.0));
                for z in 0..n {
                    prop_assert!(le_tol(m.distance(x, z).unwrap(), dxy + m.distance(y, z).unwrap()));
                }
            }
        }
    }

    #[test]
    fn cutoffs_interpolate_between_balls(seed in any::<u64>(), n in 2usize..=10, r in 0.0f64..3.0, gap in 0.01f64..3.0) {
        let g = graph(seed, n);
        let m = PathMetric::new(&g, EdgeLengths::sigma0(&g).unwrap());
        let big_r = r + gap;
        let eta = cutoff_eta(&m, 0, r, big_r).unwrap();
        let d = m.distances_from(0).unwrap();
        for x in 0..n {
            let v = eta.get(x);
            prop_assert!((0.0..=1.0).contains(&v));
            if d[x] <= r {
                prop_assert_eq!(v, 1.0);
            }
            if d[x] >= big_r {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn equilibrium_matches_dense_minimization(seed in any::<u64>(), n in 1usize..=6, mask in any::<u32>()) {
        let g = graph(seed, n);
        let u = subset(mask, n);
        let eq = equilibrium(&g, &VertexSet::new(u.clone(), n).unwrap()).unwrap();
        let dense = dense_cap_sq(&g, &u);
        prop_assert!((eq.cap * eq.cap - dense).abs() <= 1e-9 * dense);
        prop_assert!(eq.bounds_hold());
        prop_assert!(eq.first_order_holds());
    }

    #[test]
    fn capacity_is_monotone_in_the_set(seed in any::<u64>(), n in 1usize..=12, mask in any::<u32>(), more in any::<u32>()) {
        let g = graph(seed, n);
        let small = subset(mask, n);
        let large = subset(mask | more, n);
        let a = equilibrium(&g, &VertexSet::new(small, n).unwrap()).unwrap();
        let b = equilibrium(&g, &VertexSet::new(large, n).unwrap()).unwrap();
        prop_assert!(a.cap <= b.cap * (1.0 + 1e-12));
    }

    #[test]
    fn equilibrium_minimizes_over_perturbations(seed in any::<u64>(), n in 2usize..=8, mask in any::<u32>(), bump in -1.0f64..1.0) {
        let g = graph(seed, n);
        let u = subset(mask, n);
        let eq = equilibrium(&g, &VertexSet::new(u.clone(), n).unwrap()).unwrap();
        if let Some(x) = (0..n).find(|x| !u.contains(x)) {
            let mut v = eq.potential.values().to_vec();
            v[x] += bump;
            let f = iglab::forms::VertexFunction::new(&g, v).unwrap();
            let q = energy(&g, &f) + iglab::forms::norm_sq(&g, &f);
            prop_assert!(q >= eq.cap * eq.cap * (1.0 - 1e-12));
        }
    }

    #[test]
    fn geometric_tails_are_bounded(first in 1e-3f64..10.0, q in 0.05f64..0.9, len in 8usize..80) {
        let terms: Vec<f64> = (0..len).map(|k| first * q.powi(k as i32)).collect();
        let ev = assess(&terms);
        prop_assert!(ev.converges());
        let remainder = first * q.powi(len as i32) / (1.0 - q);
        prop_assert!(ev.tail_estimate.unwrap() >= remainder * (1.0 - 1e-9));
    }

    #[test]
    fn run_records_round_trip_bit_for_bit(values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20)) {
        let fam = ray(1.0, 1.0, 1.0, 1.0);
        let rec = RunRecord::new("test", &fam, SigmaChoice::Sigma0, Budget::Quick, json!({ "values": values }));
        let back = RunRecord::from_json(&rec.to_json().unwrap()).unwrap();
        let got: Vec<u64> = back.result["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap().to_bits()).collect();
        let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(back, rec);
    }
}

#[test]
fn parallel_and_sequential_suites_agree() {
    let a = random_identity_suite(11, 200, 10, Execution::Parallel);
    let b = random_identity_suite(11, 200, 10, Execution::Sequential);
    assert_eq!(a, b);
}
