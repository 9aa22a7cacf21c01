use rand::Rng;

use crate::constants::ModelConstants;
use crate::distributions::WeightLaw;
use crate::error::{FppError, Result};
use crate::graph::NeighborhoodForest;
use crate::renewal::{k_n, IntensityMeasure, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityMode {
    /// `W_r W~_r Lambda(window)`.
    Approx,
    /// Boundary-pair sum of walk probabilities, by tilted importance sampling.
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityValue {
    pub value: f64,
    /// Set when the forest failed the tree condition; `value` is then 0.
    pub g1_failed: bool,
}

/// Conditional mean number of window paths given the explored forest.
///
/// In `Mc` mode this is
/// `(1/n) sum_{(u,v)} sum_l lambda^l P(S_l <= ln n / alpha + x - X_u - X_v)`
/// over boundary pairs, with `l` ranging over `max(2, k_n(h_lo) + 1)..=k_n(h_hi)`
/// and the `x`-range handled by differencing. Under the tilt
/// `lambda^l P(S_l <= s) = E^[e^{alpha S^_l} 1{S^_l <= s}]`, and one set of
/// `mc_reps` tilted walks serves every pair.
#[allow(clippy::too_many_arguments)]
pub fn conditional_intensity<L, R>(
    forest: &NeighborhoodForest,
    consts: &ModelConstants,
    law: &L,
    n: usize,
    window: &Window,
    mode: IntensityMode,
    mc_reps: usize,
    rng: &mut R,
) -> Result<IntensityValue>
where
    L: WeightLaw + ?Sized,
    R: Rng + ?Sized,
{
    window.validate()?;
    if !window.x_hi.is_finite() {
        return Err(FppError::InvalidWindow("x_hi must be finite".into()));
    }
    if !forest.g1_holds {
        return Ok(IntensityValue {
            value: 0.0,
            g1_failed: true,
        });
    }
    let value = match mode {
        IntensityMode::Approx => forest.w_r * forest.wt_r * IntensityMeasure::new(*consts).mass(window),
        IntensityMode::Mc => mc_value(forest, consts, law, n, window, mc_reps, rng)?,
    };
    Ok(IntensityValue {
        value,
        g1_failed: false,
    })
}

fn mc_value<L, R>(
    forest: &NeighborhoodForest,
    consts: &ModelConstants,
    law: &L,
    n: usize,
    window: &Window,
    mc_reps: usize,
    rng: &mut R,
) -> Result<f64>
where
    L: WeightLaw + ?Sized,
    R: Rng + ?Sized,
{
    if forest.boundary_1.is_empty() || forest.boundary_n.is_empty() {
        return Ok(0.0);
    }
    if mc_reps == 0 {
        return Err(FppError::InvalidParameter("mc_reps must be positive".into()));
    }
    let ln_n = (n as f64).ln();
    let alpha = consts.alpha;
    let l_hi = k_n(consts, ln_n, window.h_hi);
    let l_lo = if window.h_lo == f64::NEG_INFINITY {
        2
    } else {
        (k_n(consts, ln_n, window.h_lo) + 1).max(2)
    };
    if l_lo > l_hi {
        return Ok(0.0);
    }
    let t_hi = consts.weight_center(ln_n) + window.x_hi;
    let t_lo = consts.weight_center(ln_n) + window.x_lo;

    let tilt = law.tilted(alpha)?;
    // positions[rep][l - l_lo] = S^_l
    let width = l_hi - l_lo + 1;
    let mut positions = Vec::with_capacity(mc_reps * width);
    for _ in 0..mc_reps {
        let mut s = 0.0;
        for l in 1..=l_hi {
            s += tilt.sample(rng);
            if l >= l_lo {
                positions.push(s);
            }
        }
    }
    let weights: Vec<f64> = positions.iter().map(|&s| (alpha * s).exp()).collect();

    let mut total = 0.0;
    for &(_, a) in &forest.boundary_1 {
        for &(_, b) in &forest.boundary_n {
            let y = a + b;
            let (hi, lo) = (t_hi - y, t_lo - y);
            let mut acc = 0.0;
            for (&s, &w) in positions.iter().zip(&weights) {
                if s <= hi && s > lo {
                    acc += w;
                }
            }
            total += acc / mc_reps as f64;
        }
    }
    Ok(total / n as f64)
}
