//! Renewal function of the tilted walk, the limiting intensity over
//! rectangles and the hop cutoff `k_n(h)`.
//!
//! With `lambda * exp(psi(alpha)) = 1`, the change of measure to the tilted
//! step law gives `lambda^k P(S_k <= y) = E[exp(alpha S^_k) 1{S^_k <= y}]`,
//! so every sum over `k` is estimated along tilted trajectories only.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::constants::ModelConstants;
use crate::distributions::WeightLaw;
use crate::error::{FppError, Result};
use crate::special::normal_cdf;
use crate::SimRng;

/// Replications per independently seeded chunk.
const CHUNK: usize = 4096;

/// Half-open rectangle `(x_lo, x_hi] x (h_lo, h_hi]` in rescaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl Window {
    pub fn new(x_lo: f64, x_hi: f64, h_lo: f64, h_hi: f64) -> Result<Self> {
        let w = Window {
            x_lo,
            x_hi,
            h_lo,
            h_hi,
        };
        w.validate()?;
        Ok(w)
    }

    /// `(-inf, x_hi] x (-inf, inf]`.
    pub fn x_slice(x_hi: f64) -> Self {
        Window {
            x_lo: f64::NEG_INFINITY,
            x_hi,
            h_lo: f64::NEG_INFINITY,
            h_hi: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = [self.x_lo, self.x_hi, self.h_lo, self.h_hi]
            .iter()
            .any(|v| v.is_nan());
        if bad || self.x_lo == f64::INFINITY || self.x_hi == f64::NEG_INFINITY {
            return Err(FppError::InvalidWindow(format!("{self:?}")));
        }
        if self.x_lo > self.x_hi || self.h_lo > self.h_hi {
            return Err(FppError::InvalidWindow(format!(
                "endpoints out of order: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, h: f64) -> bool {
        x > self.x_lo && x <= self.x_hi && h > self.h_lo && h <= self.h_hi
    }

    /// True when `other` is contained in `self`.
    pub fn covers(&self, other: &Window) -> bool {
        self.x_lo <= other.x_lo
            && self.x_hi >= other.x_hi
            && self.h_lo <= other.h_lo
            && self.h_hi >= other.h_hi
    }
}

/// Monte Carlo estimate of the renewal function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalEstimate {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub truncation_flag: bool,
    pub paths_used: usize,
}

/// Ratio of the hop-truncated renewal sum to its limiting intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub stderr: f64,
    pub truncation_flag: bool,
}

/// The limiting intensity `gamma * alpha e^{alpha x} dx * Phi(dh)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityMeasure {
    pub constants: ModelConstants,
}

impl IntensityMeasure {
    pub fn new(constants: ModelConstants) -> Self {
        IntensityMeasure { constants }
    }

    pub fn mass(&self, w: &Window) -> f64 {
        let a = self.constants.alpha;
        let ex = |x: f64| if x == f64::NEG_INFINITY { 0.0 } else { (a * x).exp() };
        let x_part = ex(w.x_hi) - ex(w.x_lo);
        let h_part = normal_cdf(w.h_hi) - normal_cdf(w.h_lo);
        if x_part == 0.0 || h_part == 0.0 {
            return 0.0;
        }
        self.constants.gamma * x_part * h_part
    }
}

pub fn intensity_mass(im: &IntensityMeasure, w: &Window) -> f64 {
    im.mass(w)
}

/// `floor(gamma ln n + h sqrt(beta ln n))` clamped at 0. `h = +inf` maps to
/// the hop cap `ceil(2 gamma ln n)` and `h = -inf` to 0.
pub fn k_n(consts: &ModelConstants, ln_n: f64, h: f64) -> usize {
    if h == f64::INFINITY {
        return consts.hop_cap(ln_n);
    }
    if h == f64::NEG_INFINITY {
        return 0;
    }
    let v = (consts.gamma * ln_n + h * (consts.beta * ln_n).sqrt()).floor();
    if v > 0.0 {
        v as usize
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    count: usize,
    truncated: bool,
}

impl Moments {
    fn push(&mut self, v: f64, truncated: bool) {
        self.sum += v;
        self.sum_sq += v * v;
        self.count += 1;
        self.truncated |= truncated;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            count: self.count + o.count,
            truncated: self.truncated || o.truncated,
        }
    }

    fn mean_se(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = self.sum / n;
        if self.count < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Averages `sum_{1 <= k <= k_cap} exp(alpha (S^_k - level)) 1{S^_k <= level}`
/// over tilted trajectories. A trajectory stops once it overshoots the level
/// by `20 / alpha`, or at `K_max` steps, which raises the truncation flag.
fn tilted_sums<L, R>(
    consts: &ModelConstants,
    law: &L,
    level: f64,
    k_cap: Option<usize>,
    replications: usize,
    rng: &mut R,
) -> Result<Moments>
where
    L: WeightLaw + Sync + ?Sized,
    R: Rng + ?Sized,
{
    if replications == 0 {
        return Err(FppError::InvalidParameter(
            "replications must be positive".into(),
        ));
    }
    let alpha = consts.alpha;
    let tilt = law.tilted(alpha)?;
    let drift = -law
        .psi(alpha)
        .triple()
        .map(|(_, d1, _)| d1)
        .ok_or_else(|| FppError::InvalidParameter("alpha outside domain".into()))?;
    let overshoot = 20.0 / alpha;
    let k_max = (10.0 * ((level.max(0.0) + overshoot) / drift).ceil()).max(10.0) as usize;
    let k_limit = k_cap.map_or(k_max, |c| c.min(k_max));
    let capped_below_max = k_cap.is_some_and(|c| c <= k_max);

    let n_chunks = replications.div_ceil(CHUNK);
    let seeds: Vec<u64> = (0..n_chunks).map(|_| rng.random()).collect();
    let parts: Vec<Moments> = seeds
        .par_iter()
        .enumerate()
        .map(|(c, &seed)| {
            let mut rng = SimRng::seed_from_u64(seed);
            let reps = CHUNK.min(replications - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..reps {
                let mut s = 0.0;
                let mut acc = 0.0;
                let mut stopped = false;
                for _ in 0..k_limit {
                    s += tilt.sample(&mut rng);
                    let gap = s - level;
                    if gap <= 0.0 {
                        acc += (alpha * gap).exp();
                    } else if gap > overshoot {
                        stopped = true;
                        break;
                    }
                }
                m.push(acc, !stopped && !capped_below_max);
            }
            m
        })
        .collect();
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge))
}

/// Renewal function `V(x) = sum_{k >= 1} lambda^k P(S_k <= x)`, estimated as
/// `e^{alpha x}` times the tilted trajectory average.
pub fn estimate_v<L, R>(
    consts: &ModelConstants,
    law: &L,
    x: f64,
    replications: usize,
    rng: &mut R,
) -> Result<RenewalEstimate>
where
    L: WeightLaw + Sync + ?Sized,
    R: Rng + ?Sized,
{
    estimate_v_capped(consts, law, x, None, replications, rng)
}

/// As [`estimate_v`], restricted to `k <= k_cap` when a cap is given.
pub fn estimate_v_capped<L, R>(
    consts: &ModelConstants,
    law: &L,
    x: f64,
    k_cap: Option<usize>,
    replications: usize,
    rng: &mut R,
) -> Result<RenewalEstimate>
where
    L: WeightLaw + Sync + ?Sized,
    R: Rng + ?Sized,
{
    if x == f64::NEG_INFINITY {
        if replications == 0 {
            return Err(FppError::InvalidParameter(
                "replications must be positive".into(),
            ));
        }
        return Ok(RenewalEstimate {
            x,
            value: 0.0,
            stderr: 0.0,
            truncation_flag: false,
            paths_used: replications,
        });
    }
    let m = tilted_sums(consts, law, x, k_cap, replications, rng)?;
    let (mean, se) = m.mean_se();
    let scale = (consts.alpha * x).exp();
    Ok(RenewalEstimate {
        x,
        value: scale * mean,
        stderr: scale * se,
        truncation_flag: m.truncated,
        paths_used: m.count,
    })
}

/// `[sum_{k=1}^{k_n(h)} lambda^k P(S_k <= ln n / alpha + x)] / [n Lambda((-inf, x] x (-inf, h])]`.
/// Takes `ln n` directly so that very large effective sizes stay exact.
pub fn ratio_check<L, R>(
    consts: &ModelConstants,
    law: &L,
    ln_n: f64,
    x: f64,
    h: f64,
    replications: usize,
    rng: &mut R,
) -> Result<RatioEstimate>
where
    L: WeightLaw + Sync + ?Sized,
    R: Rng + ?Sized,
{
    if !(ln_n >= 1.0) {
        return Err(FppError::InvalidParameter(format!(
            "effective size must be at least e, got ln n = {ln_n}"
        )));
    }
    // n Lambda = n gamma e^{alpha x} Phi(h); the e^{alpha x} and n factors
    // cancel against the tilted representation of the numerator.
    let denom = consts.gamma * normal_cdf(h);
    if !(denom > 0.0) || !x.is_finite() {
        return Err(FppError::InvalidWindow(format!(
            "zero intensity mass for x = {x}, h = {h}"
        )));
    }
    let level = consts.weight_center(ln_n) + x;
    let m = tilted_sums(consts, law, level, Some(k_n(consts, ln_n, h)), replications, rng)?;
    let (mean, se) = m.mean_se();
    Ok(RatioEstimate {
        ratio: mean / denom,
        stderr: se / denom,
        truncation_flag: m.truncated,
    })
}
