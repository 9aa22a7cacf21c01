//! Signed edge-weight laws.
//!
//! Every law carries a closed-form log-Laplace transform
//! `psi(t) = ln E[exp(-t X)]` together with its first two derivatives, an
//! exact sampler, and a sampler for the exponentially tilted law with density
//! proportional to `exp(-alpha x)` times the density of `X`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{FppError, Result};

/// Open interval `(lo, hi)` on which `psi` is finite. Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub const REAL_LINE: Domain = Domain {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }
}

/// Value of the log-Laplace transform at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi {
    Finite { value: f64, d1: f64, d2: f64 },
    /// `t` lies outside the open domain (the transform is `+inf` there, or
    /// the point is a boundary where derivatives are undefined).
    Infinite,
}

impl Psi {
    pub fn value(&self) -> f64 {
        match *self {
            Psi::Finite { value, .. } => value,
            Psi::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Psi::Finite { .. })
    }

    /// `(psi, psi', psi'')`, or `None` outside the domain.
    pub fn triple(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Psi::Finite { value, d1, d2 } => Some((value, d1, d2)),
            Psi::Infinite => None,
        }
    }
}

/// A weight law usable by the constant solvers and the samplers.
///
/// Implementors must provide `psi` in closed form. The default
/// [`WeightLaw::tilted`] falls back to rejection sampling from the untilted
/// law, which needs a support bounded on the side where `exp(-alpha x)` grows.
pub trait WeightLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;

    fn psi(&self, t: f64) -> Psi;

    fn domain(&self) -> Domain;

    /// Closed support `[lo, hi]`; endpoints may be infinite.
    fn support(&self) -> (f64, f64);

    /// Lattice span `d` when the law is concentrated on `d * Z`.
    fn arithmetic_span(&self) -> Option<f64> {
        None
    }

    fn tilted(&self, alpha: f64) -> Result<TiltedSampler<'_, Self>> {
        TiltedSampler::rejection(self, alpha)
    }
}

/// Built-in weight laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightDistribution {
    Exponential { rate: f64 },
    Gaussian { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
    ShiftedExponential { rate: f64, shift: f64 },
}

impl WeightDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::Gaussian { mean, variance }.validated()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::Uniform { lo, hi }.validated()
    }

    pub fn shifted_exponential(rate: f64, shift: f64) -> Result<Self> {
        Self::ShiftedExponential { rate, shift }.validated()
    }

    fn validated(self) -> Result<Self> {
        let ok = match self {
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Gaussian { mean, variance } => {
                mean.is_finite() && variance.is_finite() && variance > 0.0
            }
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::ShiftedExponential { rate, shift } => {
                rate.is_finite() && rate > 0.0 && shift.is_finite()
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(FppError::InvalidParameter(format!(
                "bad parameters for {self}"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gaussian { mean, .. } => mean,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::ShiftedExponential { rate, shift } => shift + 1.0 / rate,
        }
    }
}

impl WeightLaw for WeightDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Self::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::ShiftedExponential { rate, shift } => {
                let e: f64 = Exp1.sample(rng);
                shift + e / rate
            }
        }
    }

    fn psi(&self, t: f64) -> Psi {
        if !self.domain().contains(t) {
            return Psi::Infinite;
        }
        match *self {
            Self::Exponential { rate } => exponential_psi(rate, 0.0, t),
            Self::ShiftedExponential { rate, shift } => exponential_psi(rate, shift, t),
            Self::Gaussian { mean, variance } => Psi::Finite {
                value: -mean * t + 0.5 * variance * t * t,
                d1: -mean + variance * t,
                d2: variance,
            },
            Self::Uniform { lo, hi } => {
                let len = hi - lo;
                let u = t * len;
                Psi::Finite {
                    value: -t * lo + uniform_log_mgf(u),
                    d1: -lo + len * uniform_log_mgf_d1(u),
                    d2: len * len * uniform_log_mgf_d2(u),
                }
            }
        }
    }

    fn domain(&self) -> Domain {
        match *self {
            Self::Exponential { rate } | Self::ShiftedExponential { rate, .. } => Domain {
                lo: -rate,
                hi: f64::INFINITY,
            },
            Self::Gaussian { .. } | Self::Uniform { .. } => Domain::REAL_LINE,
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } => (0.0, f64::INFINITY),
            Self::ShiftedExponential { shift, .. } => (shift, f64::INFINITY),
            Self::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn tilted(&self, alpha: f64) -> Result<TiltedSampler<'_, Self>> {
        check_tilt(self, alpha)?;
        let exact = match *self {
            Self::Exponential { rate } => ExactTilt::Exponential {
                rate: rate + alpha,
                shift: 0.0,
            },
            Self::ShiftedExponential { rate, shift } => ExactTilt::Exponential {
                rate: rate + alpha,
                shift,
            },
            Self::Gaussian { mean, variance } => ExactTilt::Gaussian {
                mean: mean - alpha * variance,
                sd: variance.sqrt(),
            },
            Self::Uniform { lo, hi } => {
                if alpha == 0.0 {
                    ExactTilt::Uniform { lo, hi }
                } else {
                    ExactTilt::TruncatedExponential { lo, hi, alpha }
                }
            }
        };
        Ok(TiltedSampler::Exact(exact))
    }
}

fn exponential_psi(rate: f64, shift: f64, t: f64) -> Psi {
    let s = rate + t;
    Psi::Finite {
        value: -t * shift + (rate / s).ln(),
        d1: -shift - 1.0 / s,
        d2: 1.0 / (s * s),
    }
}

// ln((1 - e^{-u}) / u), the log-Laplace transform of U(0,1) at u.
fn uniform_log_mgf(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        -u / 2.0 + u2 / 24.0 - u2 * u2 / 2880.0
    } else if u > 0.0 {
        (-(-u).exp()).ln_1p() - u.ln()
    } else {
        -u + (-(u.exp())).ln_1p() - (-u).ln()
    }
}

fn uniform_log_mgf_d1(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        -0.5 + u / 12.0 - u * u2 / 720.0
    } else {
        1.0 / u.exp_m1() - 1.0 / u
    }
}

fn uniform_log_mgf_d2(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        1.0 / 12.0 - u2 / 240.0 + u2 * u2 / 6048.0
    } else {
        let s = (0.5 * u).sinh();
        1.0 / (u * u) - 1.0 / (4.0 * s * s)
    }
}

fn check_tilt<L: WeightLaw + ?Sized>(law: &L, alpha: f64) -> Result<()> {
    if alpha.is_finite() && law.domain().contains(alpha) {
        Ok(())
    } else {
        Err(FppError::InvalidParameter(format!(
            "tilt parameter {alpha} outside the interior of the domain"
        )))
    }
}

/// Closed-form tilted laws for the built-in kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactTilt {
    Exponential { rate: f64, shift: f64 },
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Density proportional to `exp(-alpha x)` on `[lo, hi]`.
    TruncatedExponential { lo: f64, hi: f64, alpha: f64 },
}

impl ExactTilt {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ExactTilt::Exponential { rate, shift } => {
                let e: f64 = Exp1.sample(rng);
                shift + e / rate
            }
            ExactTilt::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            ExactTilt::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ExactTilt::TruncatedExponential { lo, hi, alpha } => {
                let u: f64 = rng.random();
                // inverse of F(x) = (1 - e^{-alpha (x - lo)}) / (1 - e^{-alpha (hi - lo)})
                let mass = -(-alpha * (hi - lo)).exp_m1();
                let x = lo - (-u * mass).ln_1p() / alpha;
                x.clamp(lo, hi)
            }
        }
    }
}

/// Sampler for the law with density proportional to `exp(-alpha x) f(x)`.
pub enum TiltedSampler<'a, L: ?Sized> {
    Exact(ExactTilt),
    /// Propose from the untilted law and accept with probability
    /// `exp(-alpha x - log_envelope)`.
    Rejection {
        law: &'a L,
        alpha: f64,
        log_envelope: f64,
        envelope_factor: f64,
    },
}

impl<'a, L: WeightLaw + ?Sized> TiltedSampler<'a, L> {
    /// Rejection fallback for custom laws.
    pub fn rejection(law: &'a L, alpha: f64) -> Result<Self> {
        check_tilt(law, alpha)?;
        let (lo, hi) = law.support();
        let log_envelope = if alpha > 0.0 {
            -alpha * lo
        } else if alpha < 0.0 {
            -alpha * hi
        } else {
            0.0
        };
        if !log_envelope.is_finite() {
            return Err(FppError::InvalidParameter(format!(
                "rejection tilt needs a support bounded on the growing side of exp(-{alpha} x)"
            )));
        }
        let envelope_factor = (log_envelope - law.psi(alpha).value()).exp();
        Ok(TiltedSampler::Rejection {
            law,
            alpha,
            log_envelope,
            envelope_factor,
        })
    }

    /// Expected number of proposals per accepted draw (1 for exact tilts).
    pub fn envelope_factor(&self) -> f64 {
        match self {
            TiltedSampler::Exact(_) => 1.0,
            TiltedSampler::Rejection {
                envelope_factor, ..
            } => *envelope_factor,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            TiltedSampler::Exact(t) => t.sample(rng),
            TiltedSampler::Rejection {
                law,
                alpha,
                log_envelope,
                ..
            } => loop {
                let x = law.sample(rng);
                let u: f64 = rng.random();
                if u.ln() <= -alpha * x - log_envelope {
                    return x;
                }
            },
        }
    }
}

/// Monte Carlo cross-check of `exp(psi(t))`: returns the sample mean of
/// `exp(-t X)` and its standard error. Never used for constant solving.
pub fn validate_psi_mc<L, R>(law: &L, t: f64, samples: usize, rng: &mut R) -> (f64, f64)
where
    L: WeightLaw + ?Sized,
    R: Rng + ?Sized,
{
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let v = (-t * law.sample(rng)).exp();
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { rate } => write!(f, "exponential({rate})"),
            Self::Gaussian { mean, variance } => write!(f, "gaussian({mean},{variance})"),
            Self::Uniform { lo, hi } => write!(f, "uniform({lo},{hi})"),
            Self::ShiftedExponential { rate, shift } => {
                write!(f, "shifted_exponential({rate},{shift})")
            }
        }
    }
}

fn parse_decimal(s: &str) -> Result<f64> {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let mut parts = body.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let valid = digits(int)
        && frac.is_none_or(digits)
        && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    if !valid {
        return Err(FppError::Parse(format!("not a decimal number: {s:?}")));
    }
    s.parse::<f64>()
        .map_err(|e| FppError::Parse(format!("{s:?}: {e}")))
}

impl FromStr for WeightDistribution {
    type Err = FppError;

    /// Parses `kind(p1,p2)`, case-insensitively, e.g. `gaussian(2.0,1.0)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| FppError::Parse(format!("expected kind(params): {s:?}")))?;
        let inner = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| FppError::Parse(format!("missing closing parenthesis: {s:?}")))?;
        let kind = s[..open].trim().to_ascii_lowercase();
        let params = inner
            .split(',')
            .map(|p| parse_decimal(p.trim()))
            .collect::<Result<Vec<_>>>()?;
        let arity = |want: usize| {
            if params.len() == want {
                Ok(())
            } else {
                Err(FppError::Parse(format!(
                    "{kind} takes {want} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match kind.as_str() {
            "exponential" => {
                arity(1)?;
                Self::exponential(params[0])
            }
            "gaussian" => {
                arity(2)?;
                Self::gaussian(params[0], params[1])
            }
            "uniform" => {
                arity(2)?;
                Self::uniform(params[0], params[1])
            }
            "shifted_exponential" => {
                arity(2)?;
                Self::shifted_exponential(params[0], params[1])
            }
            other => Err(FppError::Parse(format!("unknown distribution kind {other:?}"))),
        }
    }
}
