use crate::brw_cox::mixed_poisson_pmf;
use crate::error::{FppError, Result};
use crate::renewal::{IntensityMeasure, Window};

use super::TrialRecord;

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(FppError::InvalidParameter("empty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(FppError::InvalidParameter("NaN in sample".into()));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `sup_x |F_n(x) - F(x)|` for a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    let v = sorted(sample)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup_x |F_a(x) - F_b(x)|` between two empirical cdfs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample critical value `c(alpha) sqrt((n + m) / (n m))`,
/// `c(alpha) = sqrt(-ln(alpha / 2) / 2)`. With `m = usize::MAX` it is the
/// one-sample value `c(alpha) / sqrt(n)`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    if m == usize::MAX {
        return c / (n as f64).sqrt();
    }
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Empirical frequencies of `0..=max(counts)`.
pub fn empirical_pmf(counts: &[u64]) -> Vec<f64> {
    let k_max = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut f = vec![0.0; k_max + 1];
    for &c in counts {
        f[c as usize] += 1.0;
    }
    let n = counts.len().max(1) as f64;
    f.iter_mut().for_each(|x| *x /= n);
    f
}

/// `(1/2) sum_{k <= K} |emp(k) - pmf(k)|` with `K = max(counts) + 5`.
pub fn tv_to_pmf<F: Fn(u64) -> Result<f64>>(counts: &[u64], pmf: F) -> Result<f64> {
    let emp = empirical_pmf(counts);
    let k_top = emp.len() as u64 - 1 + 5;
    let mut s = 0.0;
    for k in 0..=k_top {
        let e = emp.get(k as usize).copied().unwrap_or(0.0);
        s += (e - pmf(k)?).abs();
    }
    Ok(0.5 * s)
}

/// Total-variation distances between trial counts and the mixed-Poisson
/// reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CountComparison {
    /// Counts gated by `g_all`; budget-exceeded trials dropped.
    pub tv: f64,
    /// Sensitivity: unverified verdicts counted as holds.
    pub tv_unverified_as_holds: f64,
    /// Sensitivity: trials with an unverified verdict dropped.
    pub tv_unverified_dropped: f64,
    pub records_used: usize,
    pub budget_exceeded: usize,
    pub unverified: usize,
    pub k_max: u64,
}

/// Compares `1{g_all} * count_in_window` against
/// `E[pi_{W W~ Lambda(window)}]` over `w_samples`.
pub fn compare_counts(
    records: &[TrialRecord],
    im: &IntensityMeasure,
    window: &Window,
    w_samples: &[(f64, f64)],
) -> Result<CountComparison> {
    if records.len() < 100 {
        return Err(FppError::InvalidParameter(format!(
            "need at least 100 records, got {}",
            records.len()
        )));
    }
    let pmf = |k: u64| mixed_poisson_pmf(im, window, w_samples, k as i64);
    let usable: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.status == super::TrialStatus::Ok)
        .collect();
    if usable.is_empty() {
        return Err(FppError::InvalidParameter("every trial exceeded its budget".into()));
    }
    let gated: Vec<u64> = usable.iter().map(|r| r.gated_count()).collect();
    let loose: Vec<u64> = usable
        .iter()
        .map(|r| if r.none_violated() { r.count_in_window } else { 0 })
        .collect();
    let strict: Vec<u64> = usable
        .iter()
        .filter(|r| !r.any_unverified())
        .map(|r| r.gated_count())
        .collect();
    let tv = tv_to_pmf(&gated, pmf)?;
    let tv_unverified_as_holds = tv_to_pmf(&loose, pmf)?;
    let tv_unverified_dropped = if strict.is_empty() {
        f64::NAN
    } else {
        tv_to_pmf(&strict, pmf)?
    };
    Ok(CountComparison {
        tv,
        tv_unverified_as_holds,
        tv_unverified_dropped,
        records_used: usable.len(),
        budget_exceeded: records.len() - usable.len(),
        unverified: usable.iter().filter(|r| r.any_unverified()).count(),
        k_max: gated.iter().copied().max().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brw_cox::sample_cox;
    use crate::constants::ModelConstants;
    use crate::distributions::WeightDistribution;
    use crate::harness::TrialStatus;
    use crate::path_search::Verdict;
    use crate::SimRng;
    use rand::{Rng, SeedableRng};

    fn record(count: u64) -> TrialRecord {
        TrialRecord {
            trial_index: 0,
            seed: 0,
            status: TrialStatus::Ok,
            g1: Verdict::Holds,
            g2: Verdict::Holds,
            g3: Verdict::Holds,
            g_all: true,
            w_r: 1.0,
            wt_r: 1.0,
            count_in_window: count,
            x_star: None,
            h_star: None,
            conditional_intensity_approx: 0.0,
            nodes_expanded: 0,
            unverified_tail: false,
            runtime_ms: 0,
        }
    }

    fn im() -> IntensityMeasure {
        let d = WeightDistribution::gaussian(2.0, 1.0).unwrap();
        IntensityMeasure::new(ModelConstants::derive(&d, 2.0).unwrap())
    }

    #[test]
    fn ks_self_and_uniform() {
        let mut rng = SimRng::seed_from_u64(1);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        assert_eq!(ks_two_sample(&u, &u).unwrap(), 0.0);
        let mut v = u.clone();
        v.sort_by(f64::total_cmp);
        let own = |x: f64| v.partition_point(|&y| y <= x) as f64 / v.len() as f64;
        assert!(ks_one_sample(&u, own).unwrap() <= 1.0 / u.len() as f64 + 1e-15);
        let mut passes = 0;
        for s in 0..50 {
            let mut rng = SimRng::seed_from_u64(100 + s);
            let u: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
            if ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).unwrap() < 1.63 / 100.0 {
                passes += 1;
            }
        }
        assert!(passes >= 47, "{passes}");
        assert!(ks_one_sample(&[], |x| x).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
    }

    #[test]
    fn ks_two_sample_known_value() {
        // F_a jumps at 1,2,3; F_b at 2.5, 3.5: sup at x in [2, 2.5) is 2/3
        let d = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5]).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
        // ties across samples
        let d = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!((d - (2.0 / 3.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn critical_values() {
        assert!((ks_critical_value(0.01, 10_000, usize::MAX) - 0.016276).abs() < 1e-5);
        assert!((ks_critical_value(0.05, 100, 100) - 1.3581 * (0.02f64).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn all_zero_counts_against_zero_pairs() {
        let recs = vec![record(0); 100];
        let c = compare_counts(&recs, &im(), &Window::x_slice(0.5), &[(0.0, 0.0)]).unwrap();
        assert_eq!(c.tv, 0.0);
        assert_eq!(c.k_max, 0);
        assert!(compare_counts(&recs[..50], &im(), &Window::x_slice(0.5), &[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn self_consistency_with_cox_draws() {
        let im = im();
        let window = Window::x_slice(0.5);
        let mut rng = SimRng::seed_from_u64(2);
        let pairs: Vec<(f64, f64)> = (0..400)
            .map(|i| (0.3 + (i % 9) as f64 * 0.2, 0.4 + (i % 4) as f64 * 0.3))
            .collect();
        let recs: Vec<TrialRecord> = (0..10_000)
            .map(|i| {
                let p = pairs[i % pairs.len()];
                record(sample_cox(&im, p, &window, &mut rng).unwrap().count as u64)
            })
            .collect();
        let c = compare_counts(&recs, &im, &window, &pairs).unwrap();
        assert!(c.tv <= 0.02, "{c:?}");
        assert_eq!(c.tv, c.tv_unverified_as_holds);
    }

    #[test]
    fn gating_and_sensitivity() {
        let mut recs = vec![record(1); 100];
        for r in recs.iter_mut().take(10) {
            r.g2 = Verdict::Unverified;
            r.g_all = false;
        }
        recs[99].status = TrialStatus::BudgetExceeded;
        let c = compare_counts(&recs, &im(), &Window::x_slice(0.5), &[(1.0, 1.0)]).unwrap();
        assert_eq!(c.budget_exceeded, 1);
        assert_eq!(c.unverified, 10);
        assert_eq!(c.records_used, 99);
        assert!(c.tv != c.tv_unverified_as_holds);
        assert_eq!(c.tv_unverified_as_holds, c.tv_unverified_dropped);
    }
}
