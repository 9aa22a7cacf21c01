mod common;

use common::*;
use fpp_core::graph::explore;
use fpp_core::path_search::*;
use fpp_core::renewal::Window;
use fpp_core::{ModelConstants, SimRng, WeightDistribution};
use rand::{Rng, SeedableRng};

fn consts() -> ModelConstants {
    ModelConstants::derive(&WeightDistribution::gaussian(2.0, 1.0).unwrap(), 2.0).unwrap()
}

fn random_window(rng: &mut SimRng) -> Window {
    let x_hi = rng.random_range(-6.0..12.0);
    let x_lo = if rng.random_bool(0.3) {
        x_hi - rng.random_range(0.5..6.0)
    } else {
        f64::NEG_INFINITY
    };
    let (h_lo, h_hi) = match rng.random_range(0..3) {
        0 => (f64::NEG_INFINITY, f64::INFINITY),
        1 => (f64::NEG_INFINITY, rng.random_range(-1.0..3.0)),
        _ => {
            let lo = rng.random_range(-3.0..1.0);
            (lo, lo + rng.random_range(0.5..4.0))
        }
    };
    Window::new(x_lo, x_hi, h_lo, h_hi).unwrap()
}

fn weight_law(kind: u64) -> impl FnMut(&mut SimRng) -> f64 {
    move |rng: &mut SimRng| match kind {
        0 => 2.0 + rng.sample::<f64, _>(rand_distr::StandardNormal),
        1 => rng.random_range(-2.0..4.0),
        // small integer weights: many exact ties
        _ => rng.random_range(-1..4) as f64,
    }
}

#[test]
fn enumeration_matches_all_simple_paths() {
    let c = consts();
    let mut rng = SimRng::seed_from_u64(20);
    let mut total_points = 0;
    for i in 0..500u64 {
        let n = rng.random_range(2..=12);
        let g = random_graph(n, 3.0, 1000 + i, weight_law(i % 3));
        let window = random_window(&mut rng);
        let ln_n = (n as f64).ln();
        let got = enumerate_extremal(&g, &c, &window, n.max(2)).unwrap();
        let mut want: Vec<(f64, usize)> = all_endpoint_paths(&g)
            .into_iter()
            .filter(|&(w, k)| {
                let (x, h) = c.rescale(w, k, ln_n);
                window.contains(x, h)
            })
            .collect();
        sort_pairs(&mut want);
        assert_eq!(got.points, want, "graph {i}, n = {n}, window {window:?}");
        total_points += want.len();
    }
    assert!(total_points > 500, "{total_points}");
}

#[test]
fn minimum_matches_brute_force() {
    let mut rng = SimRng::seed_from_u64(21);
    for i in 0..300u64 {
        let n = rng.random_range(2..=11);
        let g = random_graph(n, 3.0, 2000 + i, weight_law(i % 3));
        let mut all = all_endpoint_paths(&g);
        sort_pairs(&mut all);
        let cap = rng.random_range(1..=n);
        let want = all.iter().copied().find(|p| p.1 <= cap);
        let got = min_weight_path(&g, cap, &SearchOptions::default(), None, None).unwrap();
        assert_eq!(got.best, want, "graph {i}, cap {cap}");
    }
}

#[test]
fn good_event_verdicts_agree_with_brute_force() {
    let c = consts();
    let shift = 0.5 * c.s_star;
    let mut rng = SimRng::seed_from_u64(22);
    let (mut g2_violated, mut g3_violated) = (0, 0);
    for i in 0..300u64 {
        let n = rng.random_range(3..=10);
        let g = random_graph(n, 3.0, 3000 + i, weight_law(1 + i % 2));
        let radius = rng.random_range(1..=3);
        let forest = explore(&g, radius, &c).unwrap();
        let rep = check_good_events(&g, &c, &forest, n);

        let from_ends: Vec<Path> = [0, n - 1].iter().flat_map(|&s| simple_paths_from(&g, s)).collect();
        let g2_bad = from_ends.iter().any(|p| p.2 >= radius && p.1 - shift * (p.2 as f64) < 0.0);
        let threshold = -(n as f64).ln() / c.alpha_prime;
        let g3_bad = (0..n).flat_map(|s| simple_paths_from(&g, s)).any(|p| p.1 <= threshold);

        match rep.g2 {
            Verdict::Holds => assert!(!g2_bad, "graph {i}: g2 certified but violated"),
            Verdict::Violated => {
                g2_violated += 1;
                let p = rep.details.g2_witness.as_ref().unwrap();
                let w = path_weight(&g, p).unwrap();
                assert!(p[0] == 0 || p[0] == n - 1);
                assert!(p.len() > radius && w - shift * ((p.len() - 1) as f64) < 0.0);
            }
            Verdict::Unverified => {}
        }
        match rep.g3 {
            Verdict::Holds => assert!(!g3_bad, "graph {i}: g3 certified but violated"),
            Verdict::Violated => {
                g3_violated += 1;
                let p = rep.details.g3_witness.as_ref().unwrap();
                assert!(p.len() >= 2 && path_weight(&g, p).unwrap() <= threshold);
            }
            Verdict::Unverified => {}
        }
        // on graphs this small every violation should be found
        assert_eq!(rep.g2 == Verdict::Violated, g2_bad, "graph {i}");
        assert_eq!(rep.g3 == Verdict::Violated, g3_bad, "graph {i}");
    }
    assert!(g2_violated > 10 && g3_violated > 10, "{g2_violated} {g3_violated}");
}

#[test]
fn tail_certificate_is_sound() {
    let mut rng = SimRng::seed_from_u64(23);
    let mut certified = 0;
    for i in 0..400u64 {
        let n = rng.random_range(3..=11);
        let g = random_graph(n, 3.5, 4000 + i, weight_law(i % 3));
        let cap = rng.random_range(1..n);
        let threshold = rng.random_range(-4.0..10.0);
        let cert = tail_certificate(&g, cap, threshold);
        let long_min = all_endpoint_paths(&g)
            .into_iter()
            .filter(|p| p.1 > cap)
            .map(|p| p.0)
            .fold(f64::INFINITY, f64::min);
        assert!(long_min >= cert.lower_bound - 1e-9, "graph {i}: {long_min} < {cert:?}");
        if cert.certified {
            certified += 1;
            assert!(long_min > threshold - 1e-9, "graph {i}: {long_min} vs {threshold}");
        }
    }
    assert!(certified > 100, "{certified}");
}
