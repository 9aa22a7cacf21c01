//! C ABI over `fpp-core`.
//!
//! Every entry point returns an [`FppStatus`]; on failure the message is
//! kept per thread and read back with [`fpp_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_generate`/`*_parse` functions and
//! released by the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fpp_core::brw_cox::{extinction_probability, simulate_w};
use fpp_core::chen_stein::{stein_bound, DependencyFamily};
use fpp_core::graph::{generate, WeightedGraph};
use fpp_core::harness::{run_trials, write_records, ExperimentConfig, OutputFormat, TrialRecord, TrialStatus};
use fpp_core::path_search::{enumerate_extremal, ExtremalPointProcess, Verdict};
use fpp_core::renewal::{estimate_v, IntensityMeasure, Window};
use fpp_core::{FppError, ModelConstants, SimRng, WeightDistribution};
use rand::SeedableRng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoSolution = 3,
    BudgetExceeded = 4,
    Resource = 5,
    Io = 6,
    InvalidConfig = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// A weight law.
pub struct FppDistribution(WeightDistribution);

/// A weighted graph on vertices `0..n`.
pub struct FppGraph(WeightedGraph);

/// Points of the extremal process inside a window.
pub struct FppPointSet(ExtremalPointProcess);

/// A configured batch of trials and, once run, its records.
pub struct FppExperiment {
    config: ExperimentConfig,
    records: Vec<TrialRecord>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FppConstants {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub s_star: f64,
    pub alpha_prime: f64,
}

/// One point: raw weight and hopcount, rescaled `(x, h)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FppPoint {
    pub weight: f64,
    pub hops: u64,
    pub x: f64,
    pub h: f64,
}

/// Numeric view of a trial record. Verdicts: 0 holds, 1 violated,
/// 2 unverified. `has_star` is 0 when `x_star`/`h_star` are absent (NaN).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FppTrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub budget_exceeded: u8,
    pub g1: u8,
    pub g2: u8,
    pub g3: u8,
    pub g_all: u8,
    pub unverified_tail: u8,
    pub has_star: u8,
    pub w_r: f64,
    pub wt_r: f64,
    pub count_in_window: u64,
    pub x_star: f64,
    pub h_star: f64,
    pub conditional_intensity_approx: f64,
    pub nodes_expanded: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(FppStatus, String);

impl From<FppError> for Failure {
    fn from(e: FppError) -> Self {
        let status = match &e {
            FppError::NoSolution { .. } => FppStatus::NoSolution,
            FppError::BudgetExceeded { .. } => FppStatus::BudgetExceeded,
            FppError::Resource(_) | FppError::Size(_) => FppStatus::Resource,
            FppError::Io { .. } => FppStatus::Io,
            FppError::InvalidConfig(_) => FppStatus::InvalidConfig,
            _ => FppStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FppStatus::NullPointer, format!("{what} is null"))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> FppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FppStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            FppStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FppStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => 0,
        Verdict::Violated => 1,
        Verdict::Unverified => 2,
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fpp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses `exponential(r)`, `gaussian(m,v)`, `uniform(a,b)` or
/// `shifted_exponential(r,s)`.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_distribution_parse(spec: *const c_char, out: *mut *mut FppDistribution) -> FppStatus {
    guard(|| {
        let spec = str_arg(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d: WeightDistribution = spec.parse()?;
        put(out, Box::into_raw(Box::new(FppDistribution(d))), "out")
    })
}

/// # Safety
/// `dist` must come from [`fpp_distribution_parse`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fpp_distribution_free(dist: *mut FppDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// # Safety
/// `dist` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_constants_derive(
    dist: *const FppDistribution,
    lambda: f64,
    out: *mut FppConstants,
) -> FppStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        let c = ModelConstants::derive(&d.0, lambda)?;
        put(
            out,
            FppConstants {
                lambda: c.lambda,
                alpha: c.alpha,
                gamma: c.gamma,
                beta: c.beta,
                s_star: c.s_star,
                alpha_prime: c.alpha_prime,
            },
            "out",
        )
    })
}

fn core_constants(c: &FppConstants) -> ModelConstants {
    ModelConstants {
        lambda: c.lambda,
        alpha: c.alpha,
        gamma: c.gamma,
        beta: c.beta,
        s_star: c.s_star,
        alpha_prime: c.alpha_prime,
    }
}

/// `Lambda(window) = gamma (e^{alpha x_hi} - e^{alpha x_lo}) (Phi(h_hi) - Phi(h_lo))`.
/// Infinite bounds are passed as `+-INFINITY`.
///
/// # Safety
/// `consts` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_intensity_mass(
    consts: *const FppConstants,
    x_lo: f64,
    x_hi: f64,
    h_lo: f64,
    h_hi: f64,
    out: *mut f64,
) -> FppStatus {
    guard(|| {
        let c = handle(consts, "consts")?;
        let w = Window::new(x_lo, x_hi, h_lo, h_hi)?;
        put(out, IntensityMeasure::new(core_constants(c)).mass(&w), "out")
    })
}

/// Monte Carlo renewal function `V(x)` with its standard error.
///
/// # Safety
/// Handles must be live; `value` and `stderr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_renewal_estimate(
    dist: *const FppDistribution,
    consts: *const FppConstants,
    x: f64,
    replications: usize,
    seed: u64,
    value: *mut f64,
    stderr: *mut f64,
) -> FppStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        let c = core_constants(handle(consts, "consts")?);
        if value.is_null() || stderr.is_null() {
            return Err(null("output"));
        }
        let mut rng = SimRng::seed_from_u64(seed);
        let est = estimate_v(&c, &d.0, x, replications, &mut rng)?;
        put(value, est.value, "value")?;
        put(stderr, est.stderr, "stderr")
    })
}

/// Samples `G(n, lambda/n)` with i.i.d. weights.
///
/// # Safety
/// `dist` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_graph_generate(
    n: usize,
    lambda: f64,
    dist: *const FppDistribution,
    seed: u64,
    out: *mut *mut FppGraph,
) -> FppStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = generate(n, lambda, &d.0, seed)?;
        put(out, Box::into_raw(Box::new(FppGraph(g))), "out")
    })
}

/// Builds a graph from `m` undirected edges `(us[i], vs[i], ws[i])`.
///
/// # Safety
/// The three arrays must hold `m` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_graph_from_edges(
    n: usize,
    us: *const usize,
    vs: *const usize,
    ws: *const f64,
    m: usize,
    out: *mut *mut FppGraph,
) -> FppStatus {
    guard(|| {
        let us = slice(us, m, "us")?;
        let vs = slice(vs, m, "vs")?;
        let ws = slice(ws, m, "ws")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let edges: Vec<(usize, usize, f64)> = (0..m).map(|i| (us[i], vs[i], ws[i])).collect();
        let g = WeightedGraph::from_edges(n, &edges, 0)?;
        put(out, Box::into_raw(Box::new(FppGraph(g))), "out")
    })
}

/// # Safety
/// `graph` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fpp_graph_free(graph: *mut FppGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_graph_size(graph: *const FppGraph, vertices: *mut usize, edges: *mut usize) -> FppStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        put(vertices, g.0.n(), "vertices")?;
        put(edges, g.0.edge_count(), "edges")
    })
}

/// Enumerates every simple `0 -> n-1` path whose rescaled point falls in the
/// window, with at most `hop_cap` hops.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fpp_enumerate_extremal(
    graph: *const FppGraph,
    consts: *const FppConstants,
    x_lo: f64,
    x_hi: f64,
    h_lo: f64,
    h_hi: f64,
    hop_cap: usize,
    out: *mut *mut FppPointSet,
) -> FppStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let c = core_constants(handle(consts, "consts")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let w = Window::new(x_lo, x_hi, h_lo, h_hi)?;
        let ep = enumerate_extremal(&g.0, &c, &w, hop_cap)?;
        put(out, Box::into_raw(Box::new(FppPointSet(ep))), "out")
    })
}

/// # Safety
/// `points` must be live; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_points_len(points: *const FppPointSet, len: *mut usize) -> FppStatus {
    guard(|| put(len, handle(points, "points")?.0.points.len(), "len"))
}

/// # Safety
/// `points` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_points_get(points: *const FppPointSet, index: usize, out: *mut FppPoint) -> FppStatus {
    guard(|| {
        let ep = &handle(points, "points")?.0;
        let (&(weight, hops), &(x, h)) = ep
            .points
            .get(index)
            .zip(ep.rescaled.get(index))
            .ok_or_else(|| Failure(FppStatus::OutOfRange, format!("index {index} out of range")))?;
        put(
            out,
            FppPoint {
                weight,
                hops: hops as u64,
                x,
                h,
            },
            "out",
        )
    })
}

/// # Safety
/// `points` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fpp_points_free(points: *mut FppPointSet) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

/// Chen-Stein bound for `m` indicators with success probabilities `p`.
/// Neighborhoods are given in compressed rows: the neighbors of `i` are
/// `indices[offsets[i]..offsets[i+1]]`, with `E[X_i X_j chi]` in the same
/// slots of `pair_terms`. `offsets` holds `m + 1` entries.
///
/// # Safety
/// Arrays must hold the stated number of elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_stein_bound(
    m: usize,
    p: *const f64,
    offsets: *const usize,
    indices: *const usize,
    pair_terms: *const f64,
    chi_zero_prob: f64,
    out: *mut f64,
) -> FppStatus {
    guard(|| {
        let p = slice(p, m, "p")?;
        let offsets = slice(offsets, m + 1, "offsets")?;
        let nnz = offsets[m];
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Failure(FppStatus::InvalidArgument, "offsets must be nondecreasing from 0".into()));
        }
        let indices = slice(indices, nnz, "indices")?;
        let terms = slice(pair_terms, nnz, "pair_terms")?;
        let rows = |v: &[usize]| -> Vec<Vec<usize>> { (0..m).map(|i| v[offsets[i]..offsets[i + 1]].to_vec()).collect() };
        let nb = rows(indices);
        let pt: Vec<Vec<f64>> = (0..m).map(|i| terms[offsets[i]..offsets[i + 1]].to_vec()).collect();
        let fam = DependencyFamily::new(p.to_vec(), nb, pt, chi_zero_prob)?;
        put(out, stein_bound(&fam)?, "out")
    })
}

/// One draw of the additive martingale `W_depth` of the branching random walk.
///
/// # Safety
/// `dist` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_simulate_w(
    dist: *const FppDistribution,
    lambda: f64,
    depth: usize,
    seed: u64,
    out: *mut f64,
) -> FppStatus {
    guard(|| {
        let d = handle(dist, "dist")?;
        let c = ModelConstants::derive(&d.0, lambda)?;
        let mut rng = SimRng::seed_from_u64(seed);
        put(out, simulate_w(lambda, &d.0, c.alpha, depth, &mut rng)?.value, "out")
    })
}

/// Extinction probability of a Galton-Watson tree with Poisson(`lambda`)
/// offspring, `lambda > 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_extinction_probability(lambda: f64, out: *mut f64) -> FppStatus {
    guard(|| put(out, extinction_probability(lambda)?, "out"))
}

/// Creates an experiment from config text (`key = value` lines).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_new(text: *const c_char, out: *mut *mut FppExperiment) -> FppStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config: ExperimentConfig = text.parse().map_err(|e: FppError| match e {
            FppError::InvalidConfig(_) => e,
            other => FppError::InvalidConfig(other.to_string()),
        })?;
        config.validate()?;
        put(
            out,
            Box::into_raw(Box::new(FppExperiment {
                config,
                records: Vec::new(),
            })),
            "out",
        )
    })
}

/// Creates an experiment from a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_load(path: *const c_char, out: *mut *mut FppExperiment) -> FppStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ExperimentConfig::load(Path::new(path))?;
        config.validate()?;
        put(
            out,
            Box::into_raw(Box::new(FppExperiment {
                config,
                records: Vec::new(),
            })),
            "out",
        )
    })
}

/// Sets the worker count (0 restores the default pool).
///
/// # Safety
/// `exp` must be live.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_set_workers(exp: *mut FppExperiment, workers: usize) -> FppStatus {
    guard(|| {
        handle_mut(exp, "exp")?.config.workers = (workers > 0).then_some(workers);
        Ok(())
    })
}

/// Runs every trial, replacing earlier records.
///
/// # Safety
/// `exp` must be live and not shared across threads during the call.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_run(exp: *mut FppExperiment) -> FppStatus {
    guard(|| {
        let e = handle_mut(exp, "exp")?;
        e.records = run_trials(&e.config)?;
        Ok(())
    })
}

/// # Safety
/// `exp` must be live; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_record_count(exp: *const FppExperiment, len: *mut usize) -> FppStatus {
    guard(|| put(len, handle(exp, "exp")?.records.len(), "len"))
}

/// # Safety
/// `exp` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_record(
    exp: *const FppExperiment,
    index: usize,
    out: *mut FppTrialRecord,
) -> FppStatus {
    guard(|| {
        let r = handle(exp, "exp")?
            .records
            .get(index)
            .ok_or_else(|| Failure(FppStatus::OutOfRange, format!("index {index} out of range")))?;
        put(
            out,
            FppTrialRecord {
                trial_index: r.trial_index,
                seed: r.seed,
                budget_exceeded: (r.status == TrialStatus::BudgetExceeded) as u8,
                g1: verdict_code(r.g1),
                g2: verdict_code(r.g2),
                g3: verdict_code(r.g3),
                g_all: r.g_all as u8,
                unverified_tail: r.unverified_tail as u8,
                has_star: r.x_star.is_some() as u8,
                w_r: r.w_r,
                wt_r: r.wt_r,
                count_in_window: r.count_in_window,
                x_star: r.x_star.unwrap_or(f64::NAN),
                h_star: r.h_star.unwrap_or(f64::NAN),
                conditional_intensity_approx: r.conditional_intensity_approx,
                nodes_expanded: r.nodes_expanded,
            },
            "out",
        )
    })
}

/// Writes the records as CSV (`jsonl == 0`) or JSON lines.
///
/// # Safety
/// `exp` must be live; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_write(exp: *const FppExperiment, path: *const c_char, jsonl: u8) -> FppStatus {
    guard(|| {
        let e = handle(exp, "exp")?;
        let path = str_arg(path, "path")?;
        let format = if jsonl != 0 { OutputFormat::Jsonl } else { OutputFormat::Csv };
        let io = |err| FppError::io(path, err);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        write_records(&mut f, &e.records, format).map_err(io)?;
        std::io::Write::flush(&mut f).map_err(io)?;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fpp_experiment_free(exp: *mut FppExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fpp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
