//! Tilt parameter and scaling constants of the model.
//!
//! Given a weight law and the mean degree `lambda > 1`, `alpha` is the root of
//! `lambda * exp(psi(alpha)) = 1` on the decreasing branch of `psi`. All other
//! constants follow from `alpha` and the closed-form derivatives of `psi`.

use crate::distributions::WeightLaw;
use crate::error::{FppError, Result};

/// Left end of the bisection bracket for `alpha`.
const ALPHA_FLOOR: f64 = 1e-8;
const ALPHA_TOL: f64 = 1e-12;
const S_STAR_GRID: usize = 2048;
const S_STAR_TOL: f64 = 1e-10;
const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Scaling constants derived from one weight law and one mean degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConstants {
    pub lambda: f64,
    pub alpha: f64,
    /// Hopcount drift per unit of `ln n`.
    pub gamma: f64,
    /// Hopcount variance per unit of `ln n`.
    pub beta: f64,
    /// Linear growth rate floor of long path weights.
    pub s_star: f64,
    pub alpha_prime: f64,
}

impl ModelConstants {
    pub fn derive<L: WeightLaw + ?Sized>(law: &L, lambda: f64) -> Result<Self> {
        let alpha = solve_alpha(law, lambda)?;
        let (gamma, beta) = derive_gamma_beta(law, alpha)?;
        let s_star = compute_s_star(law, lambda, alpha)?;
        let alpha_prime = choose_alpha_prime(law, alpha)?;
        Ok(ModelConstants {
            lambda,
            alpha,
            gamma,
            beta,
            s_star,
            alpha_prime,
        })
    }

    /// Weight centering `(1/alpha) ln n`.
    pub fn weight_center(&self, ln_n: f64) -> f64 {
        ln_n / self.alpha
    }

    /// Maps a raw (weight, hopcount) pair to the rescaled coordinates
    /// `(X - ln n / alpha, (H - gamma ln n) / sqrt(beta ln n))`.
    pub fn rescale(&self, weight: f64, hops: usize, ln_n: f64) -> (f64, f64) {
        let x = weight - self.weight_center(ln_n);
        let h = (hops as f64 - self.gamma * ln_n) / (self.beta * ln_n).sqrt();
        (x, h)
    }

    /// Inverse of [`ModelConstants::rescale`].
    pub fn unscale(&self, x: f64, h: f64, ln_n: f64) -> (f64, f64) {
        (
            x + self.weight_center(ln_n),
            self.gamma * ln_n + h * (self.beta * ln_n).sqrt(),
        )
    }

    /// Default hop cap `ceil(2 gamma ln n)`.
    pub fn hop_cap(&self, ln_n: f64) -> usize {
        (2.0 * self.gamma * ln_n).ceil().max(1.0) as usize
    }
}

fn psi_parts<L: WeightLaw + ?Sized>(law: &L, t: f64) -> Option<(f64, f64, f64)> {
    law.psi(t).triple()
}

/// Points marching from the interior toward `sup D`, used to bracket roots.
fn outward_points<L: WeightLaw + ?Sized>(law: &L) -> impl Iterator<Item = f64> {
    let hi = law.domain().hi;
    (0..64).map(move |j| {
        if hi.is_infinite() {
            2f64.powi(j - 20)
        } else {
            let start = hi.clamp(ALPHA_FLOOR, 1.0);
            hi - (hi - start) * 0.5f64.powi(j)
        }
    })
}

/// Interior minimizer of `psi` on `(0, sup D)`, if `psi'` changes sign there.
fn psi_minimizer<L: WeightLaw + ?Sized>(law: &L) -> Option<f64> {
    let mut lo = ALPHA_FLOOR;
    let (_, d_lo, _) = psi_parts(law, lo)?;
    if d_lo >= 0.0 {
        return Some(lo);
    }
    let mut hi = None;
    for t in outward_points(law) {
        match psi_parts(law, t) {
            Some((_, d, _)) if d > 0.0 => {
                hi = Some(t);
                break;
            }
            Some(_) => lo = lo.max(t),
            None => break,
        }
    }
    let mut hi = hi?;
    while hi - lo > ALPHA_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let (_, d, _) = psi_parts(law, mid)?;
        if d > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Solves `lambda * exp(psi(alpha)) = 1` on the decreasing branch of `psi`.
pub fn solve_alpha<L: WeightLaw + ?Sized>(law: &L, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 1.0) {
        return Err(FppError::InvalidParameter(format!(
            "mean degree must exceed 1, got {lambda}"
        )));
    }
    let ln_lambda = lambda.ln();
    let f = |t: f64| law.psi(t).value() + ln_lambda;

    let upper = match psi_minimizer(law) {
        Some(t_min) => {
            let v = f(t_min);
            if v >= 0.0 {
                return Err(FppError::NoSolution {
                    reason: "psi(t) + ln(lambda) stays nonnegative on (0, sup D)".into(),
                    min_value: v,
                });
            }
            t_min
        }
        None => {
            let mut best = f64::INFINITY;
            let mut found = None;
            for t in outward_points(law) {
                let v = f(t);
                if !v.is_finite() {
                    break;
                }
                best = best.min(v);
                if v < 0.0 {
                    found = Some(t);
                    break;
                }
            }
            found.ok_or_else(|| FppError::NoSolution {
                reason: "no sign change of psi(t) + ln(lambda) inside the domain".into(),
                min_value: best,
            })?
        }
    };

    let (mut lo, mut hi) = (ALPHA_FLOOR, upper);
    if f(lo) <= 0.0 {
        return Err(FppError::NoSolution {
            reason: "root lies below the bracket floor".into(),
            min_value: f(lo),
        });
    }
    while hi - lo > ALPHA_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish with the closed-form derivative, kept inside the bracket.
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..4 {
        let Some((v, d, _)) = psi_parts(law, alpha) else { break };
        let next = alpha - (v + ln_lambda) / d;
        if !(next > lo - ALPHA_TOL && next < hi + ALPHA_TOL) || (f(next)).abs() > (v + ln_lambda).abs() {
            break;
        }
        alpha = next;
    }

    let (v, d, _) = psi_parts(law, alpha).ok_or_else(|| FppError::NoSolution {
        reason: "root on the domain boundary".into(),
        min_value: f64::NAN,
    })?;
    if (v + ln_lambda).abs() > 1e-10 || d >= 0.0 {
        return Err(FppError::NoSolution {
            reason: format!("root {alpha} fails the tolerance or slope check (psi' = {d})"),
            min_value: v + ln_lambda,
        });
    }
    Ok(alpha)
}

/// `(gamma, beta) = (1 / (alpha |psi'|), psi'' / (alpha |psi'|^3))` at `alpha`.
pub fn derive_gamma_beta<L: WeightLaw + ?Sized>(law: &L, alpha: f64) -> Result<(f64, f64)> {
    let (_, d1, d2) = psi_parts(law, alpha)
        .ok_or_else(|| FppError::InvalidParameter(format!("alpha {alpha} outside domain")))?;
    if !(alpha > 0.0) || d1 >= 0.0 {
        return Err(FppError::InvalidParameter(format!(
            "need alpha > 0 and psi'(alpha) < 0, got alpha = {alpha}, psi' = {d1}"
        )));
    }
    let slope = d1.abs();
    Ok((1.0 / (alpha * slope), d2 / (alpha * slope.powi(3))))
}

/// `s* = -inf_{t > alpha} (psi(t) + ln lambda) / t`, returned with its minimizer.
pub fn s_star_with_argmin<L: WeightLaw + ?Sized>(
    law: &L,
    lambda: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let ln_lambda = lambda.ln();
    let objective = |t: f64| (law.psi(t).value() + ln_lambda) / t;
    let hi = law.domain().hi;
    let scale = alpha.max(1.0);
    let (d_min, d_max) = if hi.is_finite() {
        let span = hi - alpha;
        (span * 1e-12, span * (1.0 - 1e-9))
    } else {
        (scale * 1e-9, scale * 1e6)
    };
    let ratio = (d_max / d_min).ln() / (S_STAR_GRID - 1) as f64;
    let grid: Vec<f64> = (0..S_STAR_GRID)
        .map(|i| alpha + d_min * (ratio * i as f64).exp())
        .collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, objective(t)))
        .filter(|(_, v)| v.is_finite())
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });

    let mut a = if best == 0 { alpha } else { grid[best - 1] };
    let mut b = grid[(best + 1).min(S_STAR_GRID - 1)];
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > S_STAR_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = objective(d);
        }
    }
    let t_star = 0.5 * (a + b);
    let s_star = -objective(t_star).min(objective(grid[best]));
    if !(s_star > 0.0) {
        return Err(FppError::InvalidModel(format!(
            "nonpositive s* = {s_star}: the model violates the tilt assumption"
        )));
    }
    Ok((s_star, t_star))
}

pub fn compute_s_star<L: WeightLaw + ?Sized>(law: &L, lambda: f64, alpha: f64) -> Result<f64> {
    s_star_with_argmin(law, lambda, alpha).map(|(s, _)| s)
}

/// Picks `alpha' > alpha` with `psi(alpha') < psi(alpha)` and `psi'(alpha') < 0`:
/// the midpoint to the minimizer of `psi` when one exists, else `alpha + 1`
/// clamped inside the domain.
pub fn choose_alpha_prime<L: WeightLaw + ?Sized>(law: &L, alpha: f64) -> Result<f64> {
    let hi = law.domain().hi;
    let candidate = match psi_minimizer(law) {
        Some(t_min) if t_min > alpha => 0.5 * (alpha + t_min),
        _ if alpha + 1.0 < hi => alpha + 1.0,
        _ => 0.5 * (alpha + hi),
    };
    let (psi_a, _, _) = psi_parts(law, alpha)
        .ok_or_else(|| FppError::InvalidModel(format!("alpha {alpha} outside domain")))?;
    match psi_parts(law, candidate) {
        Some((v, d, _)) if v < psi_a && d < 0.0 => Ok(candidate),
        _ => Err(FppError::InvalidModel(format!(
            "no alpha' > {alpha} with psi(alpha') < psi(alpha) and psi'(alpha') < 0"
        ))),
    }
}
