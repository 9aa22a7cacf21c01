use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use fpp_core::brw_cox::{population_at_depth, sample_cox, sample_w_pairs, simulate_w, DEFAULT_W_DEPTH};
use fpp_core::chen_stein::soundness_sweep;
use fpp_core::harness::{
    budget_exceeded_fraction, compare_counts, emit_outputs, mix_seed, parse_records, read_w_pairs,
    run_trials, write_records, write_w_pairs, ExperimentConfig, ReferenceSource,
};
use fpp_core::renewal::{estimate_v, ratio_check, IntensityMeasure, Window};
use fpp_core::{FppError, ModelConstants, SimRng, WeightDistribution};

#[derive(Parser)]
#[command(name = "fpp", version, about = "First-passage percolation on sparse random graphs with signed weights")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Model {
    /// Weight law, e.g. gaussian(2,1), exponential(1), uniform(0,3)
    #[arg(long, default_value = "gaussian(2,1)")]
    dist: WeightDistribution,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
}

#[derive(Args, Clone)]
struct WindowArgs {
    #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
    x_lo: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    x_hi: f64,
    #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
    h_lo: f64,
    #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
    h_hi: f64,
}

impl WindowArgs {
    fn window(&self) -> fpp_core::Result<Window> {
        Window::new(self.x_lo, self.x_hi, self.h_lo, self.h_hi)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a batch of graph trials from a config file
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides master_seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides records_out; without either, records go to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the scaling constants of a model
    Constants {
        #[command(flatten)]
        model: Model,
    },
    /// Renewal function estimates and the capped ratio check
    Renewal {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_delimiter = ',', default_values_t = [8.0, 10.0, 12.0], allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 25.0)]
        ln_n: f64,
        #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
        h: f64,
    },
    /// Branching random walk martingale samples
    Brw {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = DEFAULT_W_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write `reps` independent (W, W~) pairs to this file
        #[arg(long)]
        pairs_out: Option<PathBuf>,
        /// Report extinction from the population chain at this depth instead
        #[arg(long)]
        extinction_depth: Option<usize>,
    },
    /// Cox process draws, one per (W, W~) pair
    Cox {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        wpairs: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sweep random small families and compare exact TV with the Stein bound
    SteinDemo {
        #[arg(long, default_value_t = 1000)]
        families: usize,
        #[arg(long, default_value_t = 10)]
        max_m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Total variation between trial counts and the mixed-Poisson reference
    Compare {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        wpairs: PathBuf,
        /// Take model and window from this config instead of the flags
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        window: WindowArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                FppError::InvalidConfig(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cmd: Cmd) -> fpp_core::Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io_err = |e: std::io::Error| FppError::io("<stdout>", e);
    match cmd {
        Cmd::Simulate {
            config,
            seed,
            workers,
            out: out_path,
        } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                FppError::Io { .. } | FppError::InvalidConfig(_) => e,
                other => FppError::InvalidConfig(other.to_string()),
            })?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            if out_path.is_some() {
                cfg.records_out = out_path;
            }
            cfg.validate()?;
            let consts = ModelConstants::derive(&cfg.dist, cfg.lambda)
                .map_err(|e| FppError::InvalidConfig(e.to_string()))?;
            let records = run_trials(&cfg)?;
            let im = IntensityMeasure::new(consts);
            match &cfg.records_out {
                Some(path) => {
                    let pairs = if cfg.plot_spec {
                        Some(match cfg.reference {
                            ReferenceSource::Brw => sample_w_pairs(
                                cfg.lambda,
                                &cfg.dist,
                                consts.alpha,
                                cfg.w_depth,
                                cfg.w_pairs,
                                mix_seed(cfg.master_seed, u64::MAX),
                            )?,
                            ReferenceSource::Graph => records.iter().map(|r| (r.w_r, r.wt_r)).collect(),
                        })
                    } else {
                        None
                    };
                    emit_outputs(&records, path, cfg.format, pairs.as_deref().map(|p| (&im, p)))?;
                }
                None => write_records(&mut out, &records, cfg.format).map_err(io_err)?,
            }
            let frac = budget_exceeded_fraction(&records);
            let holds = |f: &dyn Fn(&fpp_core::harness::TrialRecord) -> bool| {
                records.iter().filter(|r| f(r)).count() as f64 / records.len() as f64
            };
            let mean_count = records.iter().map(|r| r.count_in_window as f64).sum::<f64>() / records.len() as f64;
            eprintln!(
                "trials={} mean_count={:.4} lambda(window)={:.4} g_all={:.4} budget_exceeded={:.4}",
                records.len(),
                mean_count,
                im.mass(&cfg.window),
                holds(&|r| r.g_all),
                frac
            );
            if frac > 0.01 {
                eprintln!("more than 1% of trials exceeded the node budget");
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::Constants { model } => {
            let c = ModelConstants::derive(&model.dist, model.lambda)?;
            writeln!(out, "dist = {}", model.dist).map_err(io_err)?;
            for (k, v) in [
                ("lambda", c.lambda),
                ("alpha", c.alpha),
                ("gamma", c.gamma),
                ("beta", c.beta),
                ("s_star", c.s_star),
                ("alpha_prime", c.alpha_prime),
            ] {
                writeln!(out, "{k} = {v:.16e}").map_err(io_err)?;
            }
        }
        Cmd::Renewal {
            model,
            x,
            reps,
            seed,
            ln_n,
            h,
        } => {
            let c = ModelConstants::derive(&model.dist, model.lambda)?;
            let mut rng = SimRng::seed_from_u64(seed);
            writeln!(out, "x,v,stderr,v_exp_neg_alpha_x,truncated").map_err(io_err)?;
            for xi in x {
                let e = estimate_v(&c, &model.dist, xi, reps, &mut rng)?;
                writeln!(
                    out,
                    "{xi},{:.10e},{:.3e},{:.10},{}",
                    e.value,
                    e.stderr,
                    e.value * (-c.alpha * xi).exp(),
                    e.truncation_flag
                )
                .map_err(io_err)?;
            }
            let r = ratio_check(&c, &model.dist, ln_n, 0.0, h, reps, &mut rng)?;
            writeln!(out, "# gamma = {:.10}", c.gamma).map_err(io_err)?;
            writeln!(out, "# ratio(ln n = {ln_n}, h = {h}) = {:.6} +- {:.6}", r.ratio, r.stderr).map_err(io_err)?;
        }
        Cmd::Brw {
            model,
            depth,
            reps,
            seed,
            pairs_out,
            extinction_depth,
        } => {
            let c = ModelConstants::derive(&model.dist, model.lambda)?;
            let mut values = Vec::with_capacity(reps);
            for i in 0..reps as u64 {
                let mut rng = SimRng::seed_from_u64(mix_seed(seed, i));
                match extinction_depth {
                    Some(d) => {
                        let z = population_at_depth(model.lambda, d, &mut rng)?;
                        values.push(if z == 0 { 1.0 } else { 0.0 });
                        writeln!(out, "{{\"depth\":{d},\"extinct\":{},\"population\":{z}}}", z == 0)
                    }
                    None => {
                        let s = simulate_w(model.lambda, &model.dist, c.alpha, depth, &mut rng)?;
                        values.push(s.value);
                        writeln!(
                            out,
                            "{{\"value\":{:.16e},\"extinct\":{},\"population\":{}}}",
                            s.value, s.extinct, s.population
                        )
                    }
                }
                .map_err(io_err)?;
            }
            if reps > 0 {
                let k = values.len() as f64;
                let mean = values.iter().sum::<f64>() / k;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
                let what = if extinction_depth.is_some() { "extinct_fraction" } else { "mean_w" };
                eprintln!("reps={reps} {what}={mean:.6} stderr={:.6}", (var / k).sqrt());
            }
            if let Some(p) = pairs_out {
                let pairs = sample_w_pairs(model.lambda, &model.dist, c.alpha, depth, reps, mix_seed(seed, u64::MAX))?;
                write_w_pairs(&p, &pairs)?;
            }
        }
        Cmd::Cox {
            model,
            window,
            wpairs,
            seed,
        } => {
            let c = ModelConstants::derive(&model.dist, model.lambda)?;
            let im = IntensityMeasure::new(c);
            let w = window.window()?;
            let pairs = read_w_pairs(&wpairs)?;
            let mut rng = SimRng::seed_from_u64(seed);
            writeln!(out, "w,wt,count,x_min,h_min").map_err(io_err)?;
            for p in pairs {
                let s = sample_cox(&im, p, &w, &mut rng)?;
                let (xm, hm) = s
                    .min_pair
                    .map(|(x, h)| (format!("{x:.16e}"), format!("{h:.16e}")))
                    .unwrap_or_default();
                writeln!(out, "{:.16e},{:.16e},{},{xm},{hm}", p.0, p.1, s.count).map_err(io_err)?;
            }
        }
        Cmd::SteinDemo {
            families,
            max_m,
            seed,
        } => {
            let mut rng = SimRng::seed_from_u64(seed);
            let s = soundness_sweep(families, max_m, &mut rng)?;
            writeln!(
                out,
                "families={} violations={} worst_slack={:.6e} (tv={:.6e}, bound={:.6e})",
                s.families, s.violations, s.worst_slack, s.worst_tv, s.worst_bound
            )
            .map_err(io_err)?;
        }
        Cmd::Compare {
            records,
            wpairs,
            config,
            model,
            window,
        } => {
            let (dist, lambda, w) = match config {
                Some(p) => {
                    let cfg = ExperimentConfig::load(&p)?;
                    (cfg.dist, cfg.lambda, cfg.window)
                }
                None => (model.dist, model.lambda, window.window()?),
            };
            let c = ModelConstants::derive(&dist, lambda)?;
            let im = IntensityMeasure::new(c);
            let recs = parse_records(&records)?;
            let pairs = read_w_pairs(&wpairs)?;
            let cmp = compare_counts(&recs, &im, &w, &pairs)?;
            writeln!(out, "tv = {:.6}", cmp.tv).map_err(io_err)?;
            writeln!(out, "tv_unverified_as_holds = {:.6}", cmp.tv_unverified_as_holds).map_err(io_err)?;
            writeln!(out, "tv_unverified_dropped = {:.6}", cmp.tv_unverified_dropped).map_err(io_err)?;
            writeln!(
                out,
                "records_used = {}\nbudget_exceeded = {}\nunverified = {}",
                cmp.records_used, cmp.budget_exceeded, cmp.unverified
            )
            .map_err(io_err)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
