mod common;

use common::rel_spread;
use hrpareto::classify::{classify, is_mp_density, ClassTag, Tolerances};
use hrpareto::graph::{check_pi2, extremal_graph, ExtremalGraph};
use hrpareto::hr::{self, GhrParams, PrecisionMatrix, VariogramMatrix};
use hrpareto::linalg::{SymMatrix, DEFAULT_TOL};
use hrpareto::probe::{cross_difference, PairwiseFamilySpec, Statistic};
use proptest::prelude::*;

/// Connected weighted Laplacian: the path always has weight, other edges may be zero.
fn laplacian() -> impl Strategy<Value = SymMatrix> {
    (3usize..=6).prop_flat_map(|d| {
        let pairs = d * (d - 1) / 2;
        (Just(d), prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..3.0], pairs), prop::collection::vec(0.1f64..3.0, d - 1))
            .prop_map(|(d, extra, chain)| {
                let mut w = vec![vec![0.0; d]; d];
                let mut idx = 0;
                for i in 0..d {
                    for j in (i + 1)..d {
                        let v = if j == i + 1 { chain[i] } else { extra[idx] };
                        idx += 1;
                        w[i][j] = v;
                        w[j][i] = v;
                    }
                }
                SymMatrix::from_fn(d, |i, j| if i == j { w[i].iter().sum() } else { -w[i][j] })
            })
    })
}

fn graph() -> impl Strategy<Value = ExtremalGraph> {
    (1usize..=6).prop_flat_map(|d| {
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
        let n = pairs.len();
        prop::collection::vec(any::<bool>(), n).prop_map(move |keep| {
            let edges = pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| *e);
            ExtremalGraph::new(d, edges).unwrap()
        })
    })
}

fn brute_connected(g: &ExtremalGraph) -> bool {
    let d = g.dim();
    let mut reach = vec![vec![false; d]; d];
    for i in 0..d {
        reach[i][i] = true;
    }
    for &(a, b) in g.edges() {
        reach[a][b] = true;
        reach[b][a] = true;
    }
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    reach.iter().all(|r| r.iter().all(|&x| x))
}

/// Is there a simple path from `u` to `target` of even length avoiding the edge `(u, target)`?
fn even_detour(g: &ExtremalGraph, u: usize, target: usize, visited: &mut Vec<bool>, len: usize, first: bool) -> bool {
    if u == target {
        return len % 2 == 0;
    }
    for v in 0..g.dim() {
        if visited[v] || !g.has_edge(u, v) || (first && v == target) {
            continue;
        }
        visited[v] = true;
        if even_detour(g, v, target, visited, len + 1, false) {
            return true;
        }
        visited[v] = false;
    }
    false
}

fn brute_odd_cycles(g: &ExtremalGraph) -> bool {
    !g.edges().is_empty()
        && g.edges().iter().all(|&(a, b)| {
            let mut visited = vec![false; g.dim()];
            visited[a] = true;
            even_detour(g, a, b, &mut visited, 0, true)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_recovers_theta(m in laplacian()) {
        let theta = PrecisionMatrix::new(m).unwrap();
        let gamma = hr::theta_to_gamma(&theta).unwrap();
        let back = hr::gamma_to_theta(&gamma, DEFAULT_TOL).unwrap();
        prop_assert!(back.matrix().max_abs_diff(theta.matrix()) < 1e-8 * theta.matrix().max_abs().max(1.0));
    }

    #[test]
    fn variogram_is_valid(m in laplacian()) {
        let gamma = hr::theta_to_gamma(&PrecisionMatrix::new(m).unwrap()).unwrap();
        prop_assert!(VariogramMatrix::check(gamma.matrix(), DEFAULT_TOL).unwrap().is_valid());
    }

    #[test]
    fn mu_hr_has_degree_d_plus_one_and_equal_masses(m in laplacian()) {
        let theta = PrecisionMatrix::new(m).unwrap();
        let d = theta.dim();
        let mu = hr::mu_hr(&theta).unwrap();
        prop_assert!((mu.iter().sum::<f64>() - (d as f64 + 1.0)).abs() < 1e-10);
        let p = GhrParams::new(mu, theta).unwrap();
        let ik: Vec<f64> = (0..d).map(|k| hr::marginal_integral_k(&p, k).unwrap()).collect();
        prop_assert!(rel_spread(&ik) < 1e-9);
    }

    #[test]
    fn mu_hr_and_graph_are_scale_invariant(m in laplacian(), c in 0.01f64..100.0) {
        let a = PrecisionMatrix::new(m.clone()).unwrap();
        let b = PrecisionMatrix::new(m.scaled(c)).unwrap();
        let (ma, mb) = (hr::mu_hr(&a).unwrap(), hr::mu_hr(&b).unwrap());
        for (x, y) in ma.iter().zip(&mb) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert_eq!(extremal_graph(&a, DEFAULT_TOL), extremal_graph(&b, DEFAULT_TOL));
    }

    #[test]
    fn det_theta_k_is_index_free(m in laplacian()) {
        let theta = PrecisionMatrix::new(m).unwrap();
        let dets: Vec<f64> = (0..theta.dim()).map(|k| hr::det_theta_k(&theta, k).unwrap()).collect();
        prop_assert!(rel_spread(&dets) < 1e-9);
    }

    #[test]
    fn exceedance_ratios_are_reciprocal(m in laplacian(), bump in 0.1f64..2.0, j in 0usize..6) {
        let theta = PrecisionMatrix::new(m).unwrap();
        let d = theta.dim();
        let mut mu = hr::mu_hr(&theta).unwrap();
        mu[j % d] += bump;
        let p = GhrParams::new(mu, theta).unwrap();
        for k in 0..d {
            for l in 0..d {
                let prod = hr::exceedance_ratio(&p, k, l).unwrap() * hr::exceedance_ratio(&p, l, k).unwrap();
                prop_assert!((prod - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn classify_agrees_with_mp_axioms(m in laplacian(), shift in -1.5f64..1.5, bump in -0.5f64..0.5, neg in any::<bool>()) {
        let theta = PrecisionMatrix::new(if neg { m.scaled(-1.0) } else { m.clone() }).unwrap();
        let base = PrecisionMatrix::new(m).unwrap();
        let d = base.dim();
        let mut mu = hr::mu_hr(&base).unwrap();
        for v in mu.iter_mut() {
            *v += shift / d as f64;
        }
        mu[0] += bump;
        mu[1] -= bump;
        let p = GhrParams::new(mu, theta).unwrap();
        let tol = Tolerances::default();
        let is_hr = classify(&p, &tol).unwrap().tag == ClassTag::HrDensity;
        prop_assert_eq!(is_hr, is_mp_density(&p, &tol).unwrap());
    }

    #[test]
    fn cross_difference_flips_sign_when_levels_swap(
        m in laplacian(), a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0, e in 0.1f64..5.0, alpha in 0.2f64..2.0
    ) {
        let d = m.dim();
        let f = PairwiseFamilySpec::uniform(Statistic::Power(alpha), vec![1.0; d], m.clone()).unwrap();
        let base = vec![1.5; d];
        let x = cross_difference(&f, 0, 1, (a, b), (c, e), &base).unwrap();
        let y = cross_difference(&f, 0, 1, (b, a), (c, e), &base).unwrap();
        prop_assert!((x + y).abs() <= 1e-9 * (1.0 + x.abs()));
        let s = Statistic::Power(alpha);
        let expect = -2.0 * m.get(0, 1) * (s.eval(a) - s.eval(b)) * (s.eval(c) - s.eval(e));
        prop_assert!((x - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
    }

    #[test]
    fn pi2_flags_match_brute_force(g in graph()) {
        let flags = check_pi2(&g);
        prop_assert_eq!(flags.connected, brute_connected(&g));
        prop_assert_eq!(flags.every_edge_on_odd_cycle, brute_odd_cycles(&g));
    }
}
