//! Poisson branching random walk, its additive martingale, extinction, and
//! the limiting Cox process of rescaled (weight, hopcount) points.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::distributions::WeightLaw;
use crate::error::{FppError, Result};
use crate::renewal::{IntensityMeasure, Window};
use crate::special::{normal_cdf, normal_quantile};
use crate::SimRng;

/// Largest generation size grown explicitly.
pub const POPULATION_CAP: usize = 10_000_000;
/// Default depth standing in for the martingale limit.
pub const DEFAULT_W_DEPTH: usize = 16;

/// Additive martingale `W_depth = sum_{|u| = depth} exp(-alpha V(u))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WSample {
    pub depth: usize,
    pub value: f64,
    pub extinct: bool,
    pub population: u64,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    let k: f64 = d.sample(rng);
    k as u64
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(FppError::InvalidParameter(format!(
            "offspring mean must be positive, got {lambda}"
        )))
    }
}

/// Grows the tree generation by generation and reports `W` at every depth
/// `0..=depth`.
pub fn simulate_w_path<L, R>(
    lambda: f64,
    law: &L,
    alpha: f64,
    depth: usize,
    rng: &mut R,
) -> Result<Vec<WSample>>
where
    L: WeightLaw + ?Sized,
    R: Rng + ?Sized,
{
    check_lambda(lambda)?;
    let offspring = Poisson::new(lambda).map_err(|e| FppError::InvalidParameter(e.to_string()))?;
    let mut positions = vec![0.0f64];
    let mut out = Vec::with_capacity(depth + 1);
    out.push(WSample {
        depth: 0,
        value: 1.0,
        extinct: false,
        population: 1,
    });
    for d in 1..=depth {
        let mut next = Vec::with_capacity(positions.len() * 2 + 4);
        for &v in &positions {
            let k: f64 = offspring.sample(rng);
            for _ in 0..k as usize {
                next.push(v + law.sample(rng));
            }
            if next.len() > POPULATION_CAP {
                return Err(FppError::Resource(format!(
                    "population exceeds {POPULATION_CAP} at depth {d}; lower the depth"
                )));
            }
        }
        positions = next;
        let value = positions.iter().fold(0.0, |acc, &v| acc + (-alpha * v).exp());
        out.push(WSample {
            depth: d,
            value,
            extinct: positions.is_empty(),
            population: positions.len() as u64,
        });
    }
    Ok(out)
}

/// `W_depth` of one Poisson(`lambda`) branching random walk.
pub fn simulate_w<L, R>(lambda: f64, law: &L, alpha: f64, depth: usize, rng: &mut R) -> Result<WSample>
where
    L: WeightLaw + ?Sized,
    R: Rng + ?Sized,
{
    Ok(*simulate_w_path(lambda, law, alpha, depth, rng)?
        .last()
        .expect("depth 0 always present"))
}

/// Population of the Galton–Watson tree at `depth`, from the size chain
/// `Z_{k+1} ~ Poisson(lambda Z_k)`. No positions are kept, so any depth works.
pub fn population_at_depth<R: Rng + ?Sized>(lambda: f64, depth: usize, rng: &mut R) -> Result<u64> {
    check_lambda(lambda)?;
    let mut z = 1u64;
    for _ in 0..depth {
        if z == 0 {
            break;
        }
        z = poisson_count(lambda * z as f64, rng);
    }
    Ok(z)
}

/// Smallest root of `q = exp(lambda (q - 1))`: fixed-point iteration from 0
/// followed by a Newton polish.
pub fn extinction_probability(lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(FppError::InvalidParameter(format!(
            "extinction is certain unless lambda > 1, got {lambda}"
        )));
    }
    let f = |q: f64| (lambda * (q - 1.0)).exp();
    let mut q = 0.0;
    for _ in 0..10_000_000 {
        let next = f(q);
        if (next - q).abs() < 1e-15 {
            q = next;
            break;
        }
        q = next;
    }
    for _ in 0..3 {
        let g = f(q) - q;
        let dg = lambda * f(q) - 1.0;
        if dg.abs() < 1e-300 {
            break;
        }
        let next = q - g / dg;
        if next > 0.0 && next < 1.0 && (f(next) - next).abs() <= g.abs() {
            q = next;
        }
    }
    Ok(q)
}

/// Independent `(W, W~)` pairs at `depth`, one seeded stream per pair
/// derived from `seed`, so the output does not depend on thread count.
pub fn sample_w_pairs<L>(
    lambda: f64,
    law: &L,
    alpha: f64,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>>
where
    L: WeightLaw + Sync + ?Sized,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = SimRng::seed_from_u64(crate::harness::mix_seed(seed, i as u64));
            let a = simulate_w(lambda, law, alpha, depth, &mut rng)?.value;
            let b = simulate_w(lambda, law, alpha, depth, &mut rng)?.value;
            Ok((a, b))
        })
        .collect()
}

/// A realization of the Cox process restricted to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxSample {
    pub w_pair: (f64, f64),
    pub window: Window,
    pub count: usize,
    pub points: Vec<(f64, f64)>,
    /// Point with the smallest `x`.
    pub min_pair: Option<(f64, f64)>,
}

fn finite_mass(im: &IntensityMeasure, window: &Window) -> Result<f64> {
    window.validate()?;
    let mass = im.mass(window);
    if !mass.is_finite() {
        return Err(FppError::InvalidWindow(format!(
            "infinite intensity mass on {window:?}"
        )));
    }
    Ok(mass)
}

/// Inverse transform for the density proportional to `e^{alpha x}` on
/// `(x_lo, x_hi]`.
fn sample_x<R: Rng + ?Sized>(alpha: f64, x_lo: f64, x_hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let r = (alpha * (x_lo - x_hi)).exp();
    x_hi + (r + u * (1.0 - r)).ln() / alpha
}

/// Inverse transform for the standard Gaussian restricted to `(h_lo, h_hi]`.
fn sample_h<R: Rng + ?Sized>(h_lo: f64, h_hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let (a, b) = (normal_cdf(h_lo), normal_cdf(h_hi));
    normal_quantile(a + u * (b - a)).clamp(h_lo, h_hi)
}

pub fn sample_cox<R: Rng + ?Sized>(
    im: &IntensityMeasure,
    w_pair: (f64, f64),
    window: &Window,
    rng: &mut R,
) -> Result<CoxSample> {
    let mass = finite_mass(im, window)?;
    let mean = w_pair.0 * w_pair.1 * mass;
    if !(mean >= 0.0) {
        return Err(FppError::InvalidParameter(format!(
            "negative or undefined intensity {mean}"
        )));
    }
    let count = poisson_count(mean, rng) as usize;
    let alpha = im.constants.alpha;
    let points: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            let x = sample_x(alpha, window.x_lo, window.x_hi, rng);
            let h = sample_h(window.h_lo, window.h_hi, rng);
            (x, h)
        })
        .collect();
    let min_pair = points
        .iter()
        .copied()
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CoxSample {
        w_pair,
        window: *window,
        count,
        points,
        min_pair,
    })
}

/// Draws of the location of the leftmost atom of the limit process.
#[derive(Debug, Clone, PartialEq)]
pub struct MinLawSamples {
    pub samples: Vec<(f64, f64)>,
    /// Set when no pair had `w w~ > 0`.
    pub all_zero: bool,
}

/// For each pair with `p = w w~ > 0`, samples `X*` with
/// `P(X* > x) = exp(-p gamma e^{alpha x})` and an independent standard
/// Gaussian `H*`.
pub fn limit_min_law<R: Rng + ?Sized>(
    im: &IntensityMeasure,
    w_samples: &[(f64, f64)],
    rng: &mut R,
) -> MinLawSamples {
    let (alpha, gamma) = (im.constants.alpha, im.constants.gamma);
    let samples: Vec<(f64, f64)> = w_samples
        .iter()
        .filter(|(a, b)| a * b > 0.0)
        .map(|(a, b)| {
            let e: f64 = Exp1.sample(rng);
            let x = (e / (a * b * gamma)).ln() / alpha;
            let h: f64 = StandardNormal.sample(rng);
            (x, h)
        })
        .collect();
    MinLawSamples {
        all_zero: samples.is_empty(),
        samples,
    }
}

/// `E[pi_{W W~ Lambda(window)}(k)]` averaged over the supplied pairs.
pub fn mixed_poisson_pmf(
    im: &IntensityMeasure,
    window: &Window,
    w_samples: &[(f64, f64)],
    k: i64,
) -> Result<f64> {
    if k < 0 {
        return Err(FppError::InvalidParameter(format!("negative count {k}")));
    }
    if w_samples.is_empty() {
        return Err(FppError::InvalidParameter("no W samples".into()));
    }
    let mass = finite_mass(im, window)?;
    let sum: f64 = w_samples
        .iter()
        .map(|(a, b)| crate::chen_stein::poisson_pmf(a * b * mass, k as u64))
        .sum();
    Ok(sum / w_samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ModelConstants;
    use crate::distributions::WeightDistribution;

    fn gauss() -> (WeightDistribution, ModelConstants) {
        let d = WeightDistribution::gaussian(2.0, 1.0).unwrap();
        (d, ModelConstants::derive(&d, 2.0).unwrap())
    }

    fn exp_im() -> IntensityMeasure {
        let d = WeightDistribution::exponential(1.0).unwrap();
        IntensityMeasure::new(ModelConstants::derive(&d, 2.0).unwrap())
    }

    fn mean_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn depth_zero_is_one() {
        let (d, c) = gauss();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..10 {
            let s = simulate_w(2.0, &d, c.alpha, 0, &mut rng).unwrap();
            assert_eq!((s.value, s.extinct, s.population), (1.0, false, 1));
        }
    }

    #[test]
    fn martingale_mean_at_depth_ten() {
        let (d, c) = gauss();
        let mut rng = SimRng::seed_from_u64(2);
        let vals: Vec<f64> = (0..10_000)
            .map(|_| simulate_w(2.0, &d, c.alpha, 10, &mut rng).unwrap().value)
            .collect();
        let (m, se) = mean_se(&vals);
        assert!((m - 1.0).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn one_step_extension_has_zero_mean_increment() {
        let (d, c) = gauss();
        let mut rng = SimRng::seed_from_u64(3);
        let diffs: Vec<f64> = (0..5_000)
            .map(|_| {
                let p = simulate_w_path(2.0, &d, c.alpha, 9, &mut rng).unwrap();
                p[9].value - p[8].value
            })
            .collect();
        let (m, se) = mean_se(&diffs);
        assert!(m.abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn extinction_matches_w_zero() {
        let (d, c) = gauss();
        let mut rng = SimRng::seed_from_u64(4);
        for _ in 0..500 {
            let s = simulate_w(2.0, &d, c.alpha, 8, &mut rng).unwrap();
            assert_eq!(s.extinct, s.value == 0.0);
            assert_eq!(s.extinct, s.population == 0);
        }
    }

    #[test]
    fn population_cap_is_enforced() {
        let (d, c) = gauss();
        let mut rng = SimRng::seed_from_u64(5);
        let err = simulate_w(40.0, &d, c.alpha, 6, &mut rng);
        assert!(matches!(err, Err(FppError::Resource(_))));
    }

    #[test]
    fn extinction_probability_against_bisection() {
        let bisect = |lambda: f64| {
            let g = |q: f64| (lambda * (q - 1.0)).exp() - q;
            // g > 0 on [0, q*) and g < 0 between the roots
            let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        for lambda in [1.01, 1.5, 2.0, 3.0, 10.0] {
            let q = extinction_probability(lambda).unwrap();
            assert!((q - bisect(lambda)).abs() < 1e-12, "lambda {lambda}");
        }
        assert!((extinction_probability(2.0).unwrap() - 0.203188).abs() < 1e-6);
        assert!(extinction_probability(1.01).unwrap() >= 0.97);
        assert!(extinction_probability(10.0).unwrap() <= (-9f64).exp() + 1e-4);
        assert!(extinction_probability(1.0).is_err());
    }

    #[test]
    fn chain_extinction_frequency() {
        let mut rng = SimRng::seed_from_u64(6);
        let reps = 10_000;
        let dead = (0..reps)
            .filter(|_| population_at_depth(2.0, 30, &mut rng).unwrap() == 0)
            .count();
        let f = dead as f64 / reps as f64;
        assert!((f - 0.203188).abs() < 0.013, "{f}");
    }

    #[test]
    fn cox_counts_and_marginals() {
        let im = exp_im();
        let w = Window::new(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, 0.0).unwrap();
        let mut rng = SimRng::seed_from_u64(7);
        let zero = sample_cox(&im, (0.0, 3.0), &w, &mut rng).unwrap();
        assert_eq!(zero.count, 0);
        assert!(zero.min_pair.is_none());
        let n = 100_000;
        let total: usize = (0..n)
            .map(|_| sample_cox(&im, (1.0, 1.0), &w, &mut rng).unwrap().count)
            .sum();
        assert!((total as f64 / n as f64 - 1.0).abs() < 0.01);

        let big = sample_cox(&im, (5000.0, 4.0), &Window::x_slice(0.0), &mut rng).unwrap();
        assert_eq!(big.count, big.points.len());
        assert!(big.points.iter().all(|&(x, h)| big.window.contains(x, h)));
        // a 5% level test per seed, so judge the pass rate over seeds
        let mut passes = 0;
        for s in 0..40 {
            let mut rng = SimRng::seed_from_u64(1000 + s);
            let c = sample_cox(&im, (5000.0, 4.0), &Window::x_slice(0.0), &mut rng).unwrap();
            let xs: Vec<f64> = c.points.iter().take(10_000).map(|p| p.0).collect();
            let ks = crate::harness::ks_one_sample(&xs, |x| (im.constants.alpha * x).exp().min(1.0)).unwrap();
            if ks < 1.36 / (xs.len() as f64).sqrt() {
                passes += 1;
            }
        }
        assert!(passes >= 34, "{passes} of 40");
        let bad = Window::new(0.0, f64::INFINITY, 0.0, 1.0).unwrap();
        assert!(matches!(
            sample_cox(&im, (1.0, 1.0), &bad, &mut rng),
            Err(FppError::InvalidWindow(_))
        ));
    }

    #[test]
    fn min_law_median_and_h_marginal() {
        let im = exp_im();
        let mut rng = SimRng::seed_from_u64(8);
        let pairs = vec![(1.0, 1.0); 100_000];
        let s = limit_min_law(&im, &pairs, &mut rng);
        assert!(!s.all_zero);
        let mut xs: Vec<f64> = s.samples.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!((median - (2f64.ln() / 2.0).ln()).abs() < 0.02, "{median}");
        let hs: Vec<f64> = s.samples.iter().map(|p| p.1).collect();
        let (m, _) = mean_se(&hs);
        let var = hs.iter().map(|h| (h - m).powi(2)).sum::<f64>() / hs.len() as f64;
        assert!(m.abs() < 0.01 && (var - 1.0).abs() < 0.02, "{m} {var}");
        let none = limit_min_law(&im, &[(0.0, 1.0), (2.0, 0.0)], &mut rng);
        assert!(none.all_zero && none.samples.is_empty());
    }

    #[test]
    fn min_law_agrees_with_full_window_argmin() {
        // leftmost atom of Cox samples on a wide window versus the direct law
        let im = exp_im();
        let mut rng = SimRng::seed_from_u64(9);
        let window = Window::new(-12.0, 4.0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let mut direct = Vec::new();
        let mut via_cox = Vec::new();
        let mut via_cox_h = Vec::new();
        for _ in 0..5_000 {
            let c = sample_cox(&im, (1.0, 1.0), &window, &mut rng).unwrap();
            if let Some((x, h)) = c.min_pair {
                via_cox.push(x);
                via_cox_h.push(h);
            }
            direct.push(limit_min_law(&im, &[(1.0, 1.0)], &mut rng).samples[0].0);
        }
        // P(no atom in the window) = exp(-2 e^4) is negligible
        assert_eq!(via_cox.len(), 5_000);
        let ks = crate::harness::ks_two_sample(&via_cox, &direct).unwrap();
        assert!(ks < crate::harness::ks_critical_value(0.01, 5_000, 5_000), "{ks}");
        let (m, se) = mean_se(&via_cox_h);
        assert!(m.abs() < 3.5 * se);
    }

    #[test]
    fn min_law_scaling_shift() {
        let im = exp_im();
        let mut rng = SimRng::seed_from_u64(10);
        let e = std::f64::consts::E;
        let a = limit_min_law(&im, &vec![(1.0, 1.0); 5_000], &mut rng).samples;
        let b = limit_min_law(&im, &vec![(e, 1.0); 5_000], &mut rng).samples;
        let xa: Vec<f64> = a.iter().map(|p| p.0).collect();
        let xb: Vec<f64> = b.iter().map(|p| p.0 + e.ln() / im.constants.alpha).collect();
        let ks = crate::harness::ks_two_sample(&xa, &xb).unwrap();
        assert!(ks < crate::harness::ks_critical_value(0.01, 5_000, 5_000), "{ks}");
    }

    #[test]
    fn void_probability_matches_expectation() {
        let (_, c) = gauss();
        let im = IntensityMeasure::new(c);
        let window = Window::new(-1.0, 0.5, -0.5, f64::INFINITY).unwrap();
        let mut rng = SimRng::seed_from_u64(11);
        let pairs: Vec<(f64, f64)> = (0..40_000)
            .map(|i| (0.2 + (i % 7) as f64 * 0.3, 0.5 + (i % 5) as f64 * 0.25))
            .collect();
        let mass = im.mass(&window);
        let mut zeros = 0usize;
        for &p in &pairs {
            if sample_cox(&im, p, &window, &mut rng).unwrap().count == 0 {
                zeros += 1;
            }
        }
        let want = pairs.iter().map(|(a, b)| (-a * b * mass).exp()).sum::<f64>() / pairs.len() as f64;
        let f = zeros as f64 / pairs.len() as f64;
        let se = (want * (1.0 - want) / pairs.len() as f64).sqrt();
        assert!((f - want).abs() < 3.0 * se, "{f} vs {want}");
        let p0 = mixed_poisson_pmf(&im, &window, &pairs, 0).unwrap();
        assert!((p0 - want).abs() < 1e-12);
    }

    #[test]
    fn mixed_pmf_examples() {
        let im = exp_im();
        let unit = Window::new(f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, 0.0).unwrap();
        assert_eq!(mixed_poisson_pmf(&im, &unit, &[(0.0, 0.0)], 0).unwrap(), 1.0);
        let p = mixed_poisson_pmf(&im, &unit, &[(1.0, 1.0)], 1).unwrap();
        assert!((p - (-1f64).exp()).abs() < 1e-15);
        let pairs = [(1.0, 2.0), (0.5, 0.5), (3.0, 1.0), (0.0, 4.0)];
        let w = Window::x_slice(1.0);
        assert!(im.mass(&w) * 3.0 <= 50.0);
        let total: f64 = (0..=50).map(|k| mixed_poisson_pmf(&im, &Window::x_slice(0.5), &pairs, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        assert!(mixed_poisson_pmf(&im, &unit, &pairs, -1).is_err());
    }
}
