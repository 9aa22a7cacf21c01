use std::ffi::{c_char, CStr, CString};
use std::ptr;

use fpp_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fpp_last_error_message()) }.to_str().unwrap().to_string()
}

fn dist(spec: &str) -> *mut FppDistribution {
    let s = CString::new(spec).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { fpp_distribution_parse(s.as_ptr(), &mut d) }, FppStatus::Ok);
    d
}

fn constants(d: *const FppDistribution) -> FppConstants {
    let mut c = FppConstants::default();
    assert_eq!(unsafe { fpp_constants_derive(d, 2.0, &mut c) }, FppStatus::Ok);
    c
}

#[test]
fn constants_and_errors() {
    let d = dist("gaussian(2,1)");
    let c = constants(d);
    assert!((c.alpha - (2.0 - (4.0 - 2.0 * 2f64.ln()).sqrt())).abs() < 1e-9);
    assert!(last_error().is_empty());

    let mut bad = FppConstants::default();
    assert_eq!(unsafe { fpp_constants_derive(d, 0.5, &mut bad) }, FppStatus::InvalidArgument);
    let flat = dist("gaussian(0.1,1)");
    assert_eq!(unsafe { fpp_constants_derive(flat, 2.0, &mut bad) }, FppStatus::NoSolution);
    assert!(last_error().contains("no admissible alpha"));
    unsafe { fpp_distribution_free(flat) };
    assert_eq!(unsafe { fpp_constants_derive(ptr::null(), 2.0, &mut bad) }, FppStatus::NullPointer);
    assert_eq!(unsafe { fpp_constants_derive(d, 2.0, ptr::null_mut()) }, FppStatus::NullPointer);

    let spec = CString::new("gaussian(1,-1)").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fpp_distribution_parse(spec.as_ptr(), &mut out) }, FppStatus::InvalidArgument);
    assert!(out.is_null());
    let not_utf8 = [0xffu8, 0];
    assert_eq!(
        unsafe { fpp_distribution_parse(not_utf8.as_ptr() as *const c_char, &mut out) },
        FppStatus::InvalidArgument
    );
    unsafe { fpp_distribution_free(d) };
    unsafe { fpp_distribution_free(ptr::null_mut()) };
    assert!(!unsafe { CStr::from_ptr(fpp_version()) }.to_bytes().is_empty());
}

#[test]
fn intensity_and_renewal() {
    let d = dist("exponential(1)");
    let c = constants(d);
    let mut mass = 0.0;
    let status = unsafe { fpp_intensity_mass(&c, f64::NEG_INFINITY, 0.5, f64::NEG_INFINITY, f64::INFINITY, &mut mass) };
    assert_eq!(status, FppStatus::Ok);
    assert!((mass - 2.0 * 0.5f64.exp()).abs() < 1e-12);
    assert_eq!(
        unsafe { fpp_intensity_mass(&c, 1.0, 0.0, 0.0, 1.0, &mut mass) },
        FppStatus::InvalidArgument
    );
    let (mut v, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { fpp_renewal_estimate(d, &c, 8.0, 20_000, 1, &mut v, &mut se) }, FppStatus::Ok);
    let r = v * (-8.0f64).exp() / c.gamma;
    assert!((r - 1.0).abs() < 0.05, "{r}");
    unsafe { fpp_distribution_free(d) };
}

#[test]
fn graph_and_enumeration() {
    // 0-1-3 of weight 2 and 0-2-3 of weight 5
    let us = [0usize, 1, 0, 2];
    let vs = [1usize, 3, 2, 3];
    let ws = [1.0, 1.0, 2.0, 3.0];
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { fpp_graph_from_edges(4, us.as_ptr(), vs.as_ptr(), ws.as_ptr(), 4, &mut g) },
        FppStatus::Ok
    );
    let (mut nv, mut ne) = (0, 0);
    assert_eq!(unsafe { fpp_graph_size(g, &mut nv, &mut ne) }, FppStatus::Ok);
    assert_eq!((nv, ne), (4, 4));

    let d = dist("gaussian(2,1)");
    let c = constants(d);
    let ln4 = 4f64.ln();
    let inf = f64::INFINITY;
    let mut pts = ptr::null_mut();
    // x_hi chosen so that only the weight-2 path is inside
    let x_hi = 3.0 - ln4 / c.alpha;
    assert_eq!(
        unsafe { fpp_enumerate_extremal(g, &c, -inf, x_hi, -inf, inf, 3, &mut pts) },
        FppStatus::Ok
    );
    let mut len = 0;
    assert_eq!(unsafe { fpp_points_len(pts, &mut len) }, FppStatus::Ok);
    assert_eq!(len, 1);
    let mut p = FppPoint::default();
    assert_eq!(unsafe { fpp_points_get(pts, 0, &mut p) }, FppStatus::Ok);
    assert_eq!((p.weight, p.hops), (2.0, 2));
    assert!((p.x - (2.0 - ln4 / c.alpha)).abs() < 1e-12);
    assert_eq!(unsafe { fpp_points_get(pts, 1, &mut p) }, FppStatus::OutOfRange);
    unsafe { fpp_points_free(pts) };

    assert_eq!(
        unsafe { fpp_enumerate_extremal(g, &c, -inf, x_hi, -inf, inf, 0, &mut pts) },
        FppStatus::InvalidArgument
    );
    let bad_u = [0usize];
    let bad_v = [9usize];
    let mut g2 = ptr::null_mut();
    assert_eq!(
        unsafe { fpp_graph_from_edges(4, bad_u.as_ptr(), bad_v.as_ptr(), ws.as_ptr(), 1, &mut g2) },
        FppStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { fpp_graph_from_edges(4, ptr::null(), vs.as_ptr(), ws.as_ptr(), 4, &mut g2) },
        FppStatus::NullPointer
    );

    let mut big = ptr::null_mut();
    assert_eq!(unsafe { fpp_graph_generate(2000, 2.0, d, 3, &mut big) }, FppStatus::Ok);
    assert_eq!(unsafe { fpp_graph_size(big, &mut nv, &mut ne) }, FppStatus::Ok);
    assert!(nv == 2000 && (1700..2300).contains(&ne), "{ne}");
    unsafe {
        fpp_graph_free(big);
        fpp_graph_free(g);
        fpp_distribution_free(d);
    }
}

#[test]
fn stein_bound_and_brw() {
    // two independent indicators: bound = sum p_i^2
    let p = [0.1, 0.2];
    let offsets = [0usize, 0, 0];
    let mut b = 0.0;
    let status = unsafe { fpp_stein_bound(2, p.as_ptr(), offsets.as_ptr(), ptr::null(), ptr::null(), 0.0, &mut b) };
    assert_eq!(status, FppStatus::Ok);
    assert!((b - 0.05).abs() < 1e-15);
    // each a neighbor of the other with E[X1 X2] = 0.05
    let offsets = [0usize, 1, 2];
    let idx = [1usize, 0];
    let terms = [0.05, 0.05];
    let status = unsafe { fpp_stein_bound(2, p.as_ptr(), offsets.as_ptr(), idx.as_ptr(), terms.as_ptr(), 0.0, &mut b) };
    assert_eq!(status, FppStatus::Ok);
    assert!((b - (0.01 + 0.04 + 0.04 + 0.1)).abs() < 1e-15, "{b}");
    let bad = [1usize, 0, 0];
    let status = unsafe { fpp_stein_bound(2, p.as_ptr(), bad.as_ptr(), ptr::null(), ptr::null(), 0.0, &mut b) };
    assert_eq!(status, FppStatus::InvalidArgument);

    let mut q = 0.0;
    assert_eq!(unsafe { fpp_extinction_probability(2.0, &mut q) }, FppStatus::Ok);
    assert!((q - 0.203188).abs() < 1e-6);
    assert_eq!(unsafe { fpp_extinction_probability(0.9, &mut q) }, FppStatus::InvalidArgument);

    let d = dist("gaussian(2,1)");
    let mut w = -1.0;
    assert_eq!(unsafe { fpp_simulate_w(d, 2.0, 6, 1, &mut w) }, FppStatus::Ok);
    assert!(w >= 0.0);
    unsafe { fpp_distribution_free(d) };
}

#[test]
fn experiment_lifecycle() {
    let text = CString::new("n = 500\nlambda = 2\ndist = gaussian(2,1)\nx_hi = 0.5\ntrials = 6\nmaster_seed = 3\n").unwrap();
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { fpp_experiment_new(text.as_ptr(), &mut e) }, FppStatus::Ok);
    assert_eq!(unsafe { fpp_experiment_set_workers(e, 2) }, FppStatus::Ok);
    assert_eq!(unsafe { fpp_experiment_run(e) }, FppStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { fpp_experiment_record_count(e, &mut len) }, FppStatus::Ok);
    assert_eq!(len, 6);
    let mut r = FppTrialRecord::default();
    for i in 0..len {
        assert_eq!(unsafe { fpp_experiment_record(e, i, &mut r) }, FppStatus::Ok);
        assert_eq!(r.trial_index, i as u64);
        assert!(r.g1 <= 2 && r.g2 <= 2 && r.g3 <= 2);
        assert_eq!(r.has_star == 0, r.x_star.is_nan());
    }
    assert_eq!(unsafe { fpp_experiment_record(e, 6, &mut r) }, FppStatus::OutOfRange);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("r.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { fpp_experiment_write(e, path.as_ptr(), 0) }, FppStatus::Ok);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let missing = CString::new(dir.path().join("no/such/dir.csv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { fpp_experiment_write(e, missing.as_ptr(), 1) }, FppStatus::Io);
    unsafe { fpp_experiment_free(e) };

    let bad = CString::new("n = 500\ncolour = red\n").unwrap();
    let mut e2 = ptr::null_mut();
    assert_eq!(unsafe { fpp_experiment_new(bad.as_ptr(), &mut e2) }, FppStatus::InvalidConfig);
    assert!(e2.is_null());
    let nowhere = CString::new("/nonexistent/fpp.cfg").unwrap();
    assert_eq!(unsafe { fpp_experiment_load(nowhere.as_ptr(), &mut e2) }, FppStatus::Io);
    assert_eq!(unsafe { fpp_experiment_run(ptr::null_mut()) }, FppStatus::NullPointer);
}

#[test]
fn errors_are_per_thread() {
    let mut q = 0.0;
    assert_eq!(unsafe { fpp_extinction_probability(0.5, &mut q) }, FppStatus::InvalidArgument);
    let here = last_error();
    std::thread::spawn(|| assert!(last_error().is_empty())).join().unwrap();
    assert_eq!(last_error(), here);
}
