//! Poisson approximation with a global indicator `chi`: the Stein bound as a
//! calculator, and exhaustive total-variation oracles for small families.

use rand::Rng;

use crate::error::{FppError, Result};
use crate::special::ln_factorial;

/// Largest family handled by [`exact_tv_small`].
pub const MAX_EXACT_SIZE: usize = 12;
const PMF_TOL: f64 = 1e-12;

/// `pi_lambda(k)`, evaluated in log space.
pub fn poisson_pmf(lambda_cs: f64, k: u64) -> f64 {
    if lambda_cs <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * lambda_cs.ln() - lambda_cs - ln_factorial(k)).exp()
}

/// Bernoulli indicators with dependency neighborhoods and the moments the
/// bound needs. `pair_terms[i][t]` is `E[X_i X_j chi]` for
/// `j = neighborhoods[i][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyFamily {
    pub size: usize,
    pub p: Vec<f64>,
    pub neighborhoods: Vec<Vec<usize>>,
    pub pair_terms: Vec<Vec<f64>>,
    pub chi_zero_prob: f64,
}

impl DependencyFamily {
    pub fn new(
        p: Vec<f64>,
        neighborhoods: Vec<Vec<usize>>,
        pair_terms: Vec<Vec<f64>>,
        chi_zero_prob: f64,
    ) -> Result<Self> {
        let fam = DependencyFamily {
            size: p.len(),
            p,
            neighborhoods,
            pair_terms,
            chi_zero_prob,
        };
        fam.validate()?;
        Ok(fam)
    }

    /// No neighborhoods and `chi = 1`.
    pub fn independent(p: Vec<f64>) -> Result<Self> {
        let m = p.len();
        Self::new(p, vec![Vec::new(); m], vec![Vec::new(); m], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FppError::InvalidFamily(msg));
        let m = self.size;
        if self.p.len() != m || self.neighborhoods.len() != m || self.pair_terms.len() != m {
            return bad(format!("family of size {m} has mismatched table lengths"));
        }
        if !(0.0..=1.0).contains(&self.chi_zero_prob) {
            return bad(format!("P(chi = 0) = {} outside [0,1]", self.chi_zero_prob));
        }
        for (i, &pi) in self.p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pi) {
                return bad(format!("p[{i}] = {pi} outside [0,1]"));
            }
        }
        for i in 0..m {
            let nb = &self.neighborhoods[i];
            if self.pair_terms[i].len() != nb.len() {
                return bad(format!(
                    "index {i}: {} neighbors but {} pair terms",
                    nb.len(),
                    self.pair_terms[i].len()
                ));
            }
            for (&j, &e) in nb.iter().zip(&self.pair_terms[i]) {
                if j >= m {
                    return bad(format!("index {i}: neighbor {j} out of range"));
                }
                if j == i {
                    return bad(format!("index {i} lists itself as a neighbor"));
                }
                let cap = self.p[i].min(self.p[j]);
                if !(e >= -PMF_TOL && e <= cap + PMF_TOL) {
                    return bad(format!("pair term ({i},{j}) = {e} outside [0, {cap}]"));
                }
            }
            let mut sorted = nb.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != nb.len() {
                return bad(format!("index {i}: repeated neighbor"));
            }
        }
        Ok(())
    }

    pub fn lambda_cs(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// `2 P(chi=0) + sum_i sum_{j in N_i + i} p_i p_j + sum_i sum_{j in N_i} E[X_i X_j chi]`.
pub fn stein_bound(fam: &DependencyFamily) -> Result<f64> {
    fam.validate()?;
    let mut b = 2.0 * fam.chi_zero_prob;
    for i in 0..fam.size {
        let pi = fam.p[i];
        b += pi * pi;
        for (&j, &e) in fam.neighborhoods[i].iter().zip(&fam.pair_terms[i]) {
            b += pi * fam.p[j] + e;
        }
    }
    Ok(b)
}

/// Explicit joint pmf of `(X_1..X_m, chi)`. Outcome index bit `i < m` is
/// `X_{i+1}`, bit `m` is `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub m: usize,
    pub probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(m: usize, probs: Vec<f64>) -> Result<Self> {
        if m > MAX_EXACT_SIZE {
            return Err(FppError::Size(format!(
                "exhaustive enumeration supports m <= {MAX_EXACT_SIZE}, got {m}"
            )));
        }
        if probs.len() != 1usize << (m + 1) {
            return Err(FppError::InvalidFamily(format!(
                "joint pmf over m = {m} needs {} entries, got {}",
                1usize << (m + 1),
                probs.len()
            )));
        }
        if probs.iter().any(|&q| !(q >= 0.0)) {
            return Err(FppError::InvalidFamily("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(FppError::InvalidFamily(format!(
                "joint pmf sums to {total}"
            )));
        }
        Ok(JointPmf { m, probs })
    }

    /// Product of independent Bernoulli(`p_i`) with `chi` independent
    /// Bernoulli(`1 - chi_zero`).
    pub fn independent(p: &[f64], chi_zero: f64) -> Result<Self> {
        let m = p.len();
        let probs = (0..1usize << (m + 1))
            .map(|w| {
                let mut q = if w >> m & 1 == 1 { 1.0 - chi_zero } else { chi_zero };
                for (i, &pi) in p.iter().enumerate() {
                    q *= if w >> i & 1 == 1 { pi } else { 1.0 - pi };
                }
                q
            })
            .collect();
        Self::new(m, probs)
    }

    /// The family of moments derived from this pmf under the given
    /// neighborhoods.
    pub fn family(&self, neighborhoods: &[Vec<usize>]) -> Result<DependencyFamily> {
        let m = self.m;
        if neighborhoods.len() != m {
            return Err(FppError::InvalidFamily(format!(
                "{} neighborhoods for {m} indicators",
                neighborhoods.len()
            )));
        }
        let chi_bit = 1usize << m;
        let mut p = vec![0.0; m];
        let mut chi_zero = 0.0;
        for (w, &q) in self.probs.iter().enumerate() {
            if w & chi_bit == 0 {
                chi_zero += q;
            }
            for (i, pi) in p.iter_mut().enumerate() {
                if w >> i & 1 == 1 {
                    *pi += q;
                }
            }
        }
        let pair_terms = neighborhoods
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                nb.iter()
                    .map(|&j| {
                        if j >= m {
                            return 0.0;
                        }
                        let mask = chi_bit | 1 << i | 1 << j;
                        self.probs
                            .iter()
                            .enumerate()
                            .filter(|(w, _)| w & mask == mask)
                            .map(|(_, &q)| q)
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        DependencyFamily::new(
            p.into_iter().map(clamp).collect(),
            neighborhoods.to_vec(),
            pair_terms,
            clamp(chi_zero),
        )
    }

    /// Law of `chi * sum X_i` on `0..=m`.
    pub fn product_law(&self) -> Vec<f64> {
        let m = self.m;
        let mut law = vec![0.0; m + 1];
        for (w, &q) in self.probs.iter().enumerate() {
            let k = if w >> m & 1 == 1 {
                (w & ((1 << m) - 1)).count_ones() as usize
            } else {
                0
            };
            law[k] += q;
        }
        law
    }
}

/// Exact `d_TV(chi * sum X_i, Poisson(sum p_i))` by enumeration, paired with
/// the Stein bound of the derived family.
pub fn exact_tv_small(joint: &JointPmf, neighborhoods: &[Vec<usize>]) -> Result<(f64, f64)> {
    if joint.m > MAX_EXACT_SIZE {
        return Err(FppError::Size(format!(
            "exhaustive enumeration supports m <= {MAX_EXACT_SIZE}, got {}",
            joint.m
        )));
    }
    let fam = joint.family(neighborhoods)?;
    let lambda = fam.lambda_cs();
    let law = joint.product_law();
    let mut l1 = 0.0;
    let mut covered = 0.0;
    for (k, &q) in law.iter().enumerate() {
        let pk = poisson_pmf(lambda, k as u64);
        covered += pk;
        l1 += (q - pk).abs();
    }
    // Poisson mass beyond m, where the sum has none
    l1 += (1.0 - covered).max(0.0);
    Ok((0.5 * l1, stein_bound(&fam)?))
}

/// A random small family whose neighborhoods are dissociating by
/// construction: independent latent bits, each shared by a few indicators,
/// and every indicator a random boolean function of its own latents.
/// `chi` is drawn conditionally on the indicator configuration.
pub fn random_latent_family<R: Rng + ?Sized>(
    max_m: usize,
    rng: &mut R,
) -> Result<(JointPmf, Vec<Vec<usize>>)> {
    let m = rng.random_range(0..=max_m.min(MAX_EXACT_SIZE));
    let n_latent = if m == 0 { 0 } else { rng.random_range(m..=(m + 4).min(14)) };
    let mut owners: Vec<Vec<usize>> = Vec::with_capacity(n_latent);
    let mut inputs: Vec<Vec<usize>> = vec![Vec::new(); m];
    for l in 0..n_latent {
        let mut own = Vec::new();
        if l < m {
            own.push(l);
        } else {
            let k = rng.random_range(m.min(2)..=m.min(3));
            while own.len() < k {
                let v = rng.random_range(0..m);
                if !own.contains(&v) {
                    own.push(v);
                }
            }
        }
        for &v in &own {
            if inputs[v].len() < 6 {
                inputs[v].push(l);
            }
        }
        owners.push(own);
    }
    let latent_p: Vec<f64> = (0..n_latent).map(|_| rng.random_range(0.05..0.95)).collect();
    let sparsity: f64 = rng.random_range(0.02..0.5);
    let tables: Vec<Vec<bool>> = inputs
        .iter()
        .map(|ins| (0..1usize << ins.len()).map(|_| rng.random_bool(sparsity)).collect())
        .collect();
    let chi_mode = rng.random_range(0..3u8);
    let chi_table: Vec<f64> = (0..1usize << m)
        .map(|x| match chi_mode {
            0 => 1.0,
            1 => {
                if rng.random_bool(0.7) {
                    1.0
                } else {
                    rng.random::<f64>()
                }
            }
            // kill configurations with several ones, mimicking a good-event cut
            _ => {
                if (x as u32).count_ones() >= 2 && rng.random_bool(0.8) {
                    0.0
                } else {
                    1.0 - 0.05 * rng.random::<f64>()
                }
            }
        })
        .collect();

    let mut probs = vec![0.0; 1usize << (m + 1)];
    for z in 0..1usize << n_latent {
        let mut pz = 1.0;
        for (l, &q) in latent_p.iter().enumerate() {
            pz *= if z >> l & 1 == 1 { q } else { 1.0 - q };
        }
        let mut x = 0usize;
        for i in 0..m {
            let mut idx = 0usize;
            for (b, &l) in inputs[i].iter().enumerate() {
                idx |= (z >> l & 1) << b;
            }
            if tables[i][idx] {
                x |= 1 << i;
            }
        }
        let c = chi_table[x];
        probs[x | 1 << m] += pz * c;
        probs[x] += pz * (1.0 - c);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|q| *q /= total);

    let neighborhoods: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let mut nb: Vec<usize> = inputs[i]
                .iter()
                .flat_map(|&l| owners[l].iter().copied())
                .filter(|&j| j != i && inputs[j].iter().any(|l| inputs[i].contains(l)))
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();
    Ok((JointPmf::new(m, probs)?, neighborhoods))
}

/// Outcome of a soundness sweep over random latent families.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub families: usize,
    pub violations: usize,
    /// Smallest `bound - tv` seen.
    pub worst_slack: f64,
    pub worst_tv: f64,
    pub worst_bound: f64,
}

pub fn soundness_sweep<R: Rng + ?Sized>(families: usize, max_m: usize, rng: &mut R) -> Result<SweepSummary> {
    let mut s = SweepSummary {
        families,
        violations: 0,
        worst_slack: f64::INFINITY,
        worst_tv: 0.0,
        worst_bound: 0.0,
    };
    for _ in 0..families {
        let (joint, nb) = random_latent_family(max_m, rng)?;
        let (tv, bound) = exact_tv_small(&joint, &nb)?;
        if tv > bound + 1e-12 {
            s.violations += 1;
        }
        if bound - tv < s.worst_slack {
            s.worst_slack = bound - tv;
            s.worst_tv = tv;
            s.worst_bound = bound;
        }
    }
    Ok(s)
}
