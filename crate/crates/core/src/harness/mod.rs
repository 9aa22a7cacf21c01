//! Seeded Monte Carlo experiments on random graphs: configuration, per-trial
//! pipeline, record persistence, and comparison statistics.

mod config;
mod intensity;
mod io;
mod stats;

pub use config::{ExperimentConfig, OutputFormat, ReferenceSource};
pub use intensity::{conditional_intensity, IntensityMode, IntensityValue};
pub use io::{
    emit_outputs, parse_records, parse_records_csv, parse_records_jsonl, plot_spec_json,
    read_w_pairs, write_records, write_w_pairs, CSV_HEADER,
};
pub use stats::{
    compare_counts, empirical_pmf, ks_critical_value, ks_one_sample, ks_two_sample, tv_to_pmf,
    CountComparison,
};

use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::constants::ModelConstants;
use crate::error::{FppError, Result};
use crate::graph::{default_radius, explore, generate};
use crate::path_search::{
    check_good_events, enumerate_extremal_with, min_weight_path, tail_certificate,
    walk_lower_bounds, SearchOptions, Verdict, HOP_HARD_CAP,
};
use crate::renewal::IntensityMeasure;

/// splitmix64 finalizer applied to `master + (index + 1) * golden`.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fresh generator for trial `index`.
pub fn trial_rng(master: u64, index: u64) -> crate::SimRng {
    crate::SimRng::seed_from_u64(mix_seed(master, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    BudgetExceeded,
}

impl TrialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::BudgetExceeded => "budget_exceeded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(TrialStatus::Ok),
            "budget_exceeded" => Some(TrialStatus::BudgetExceeded),
            _ => None,
        }
    }
}

/// Outcome of one trial. `x_star`/`h_star` locate the minimum-weight path
/// over all hopcounts up to the hop cap, so they are present exactly when
/// the endpoints are joined by such a path.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub status: TrialStatus,
    pub g1: Verdict,
    pub g2: Verdict,
    pub g3: Verdict,
    pub g_all: bool,
    pub w_r: f64,
    pub wt_r: f64,
    pub count_in_window: u64,
    pub x_star: Option<f64>,
    pub h_star: Option<f64>,
    pub conditional_intensity_approx: f64,
    pub nodes_expanded: u64,
    /// Paths longer than the hop cap could not be excluded from the window
    /// or from undercutting the minimum.
    pub unverified_tail: bool,
    pub runtime_ms: u64,
}

impl TrialRecord {
    /// `1{g_all} * count_in_window`.
    pub fn gated_count(&self) -> u64 {
        if self.g_all {
            self.count_in_window
        } else {
            0
        }
    }

    pub fn any_unverified(&self) -> bool {
        [self.g1, self.g2, self.g3].contains(&Verdict::Unverified)
    }

    pub fn none_violated(&self) -> bool {
        ![self.g1, self.g2, self.g3].contains(&Verdict::Violated)
    }
}

/// Radius and hop cap used for a configuration.
pub fn trial_parameters(cfg: &ExperimentConfig, consts: &ModelConstants) -> (usize, usize) {
    let ln_n = (cfg.n as f64).ln();
    let radius = cfg.radius_override.unwrap_or_else(|| default_radius(cfg.n));
    let hop_cap = cfg
        .hop_cap_override
        .unwrap_or_else(|| consts.hop_cap(ln_n))
        .clamp(1, HOP_HARD_CAP);
    (radius, hop_cap)
}

/// Generates, explores, enumerates and checks one graph.
pub fn run_trial(cfg: &ExperimentConfig, consts: &ModelConstants, index: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = mix_seed(cfg.master_seed, index);
    let n = cfg.n;
    let ln_n = (n as f64).ln();
    let (radius, hop_cap) = trial_parameters(cfg, consts);
    let g = generate(n, cfg.lambda, &cfg.dist, seed)?;
    let forest = explore(&g, radius, consts)?;
    let events = check_good_events(&g, consts, &forest, hop_cap);
    let im = IntensityMeasure::new(*consts);

    let mut rec = TrialRecord {
        trial_index: index,
        seed,
        status: TrialStatus::Ok,
        g1: events.g1,
        g2: events.g2,
        g3: events.g3,
        g_all: events.g_all,
        w_r: forest.w_r,
        wt_r: forest.wt_r,
        count_in_window: 0,
        x_star: None,
        h_star: None,
        conditional_intensity_approx: forest.w_r * forest.wt_r * im.mass(&cfg.window),
        nodes_expanded: 0,
        unverified_tail: false,
        runtime_ms: 0,
    };

    let opts = SearchOptions {
        node_budget: cfg.node_budget,
    };
    let bounds = walk_lower_bounds(&g, n - 1, hop_cap);
    let searched = enumerate_extremal_with(&g, consts, &cfg.window, hop_cap, &opts, Some(&bounds))
        .and_then(|ep| {
            let rest = SearchOptions {
                node_budget: opts.node_budget.saturating_sub(ep.nodes_expanded),
            };
            let mp = min_weight_path(&g, hop_cap, &rest, Some(&bounds), ep.min_raw)?;
            Ok((ep, mp))
        });
    match searched {
        Ok((ep, mp)) => {
            rec.count_in_window = ep.points.len() as u64;
            rec.nodes_expanded = ep.nodes_expanded + mp.nodes_expanded;
            if let Some((w, k)) = mp.best {
                let (x, h) = consts.rescale(w, k, ln_n);
                rec.x_star = Some(x);
                rec.h_star = Some(h);
            }
            // longer paths matter when the window is open in h, or when they
            // could undercut the minimum found
            let window_thr = (ep.hop_cap == hop_cap)
                .then(|| consts.weight_center(ln_n) + cfg.window.x_hi);
            let threshold = match (window_thr, mp.best) {
                (Some(a), Some((b, _))) => Some(a.max(b)),
                (a, b) => a.or(b.map(|p| p.0)),
            };
            if let Some(t) = threshold {
                rec.unverified_tail = !tail_certificate(&g, hop_cap, t).certified;
            }
        }
        Err(FppError::BudgetExceeded { .. }) => {
            rec.status = TrialStatus::BudgetExceeded;
            rec.nodes_expanded = cfg.node_budget;
        }
        Err(e) => return Err(e),
    }
    if cfg.record_timing {
        rec.runtime_ms = start.elapsed().as_millis() as u64;
    }
    Ok(rec)
}

/// Runs every trial of `cfg`. Records come back in trial order and do not
/// depend on the worker count.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let consts = ModelConstants::derive(&cfg.dist, cfg.lambda)?;
    let work = || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| run_trial(cfg, &consts, i))
            .collect::<Result<Vec<_>>>()
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| FppError::Resource(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Fraction of records whose search ran out of budget.
pub fn budget_exceeded_fraction(records: &[TrialRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let k = records
        .iter()
        .filter(|r| r.status == TrialStatus::BudgetExceeded)
        .count();
    k as f64 / records.len() as f64
}
