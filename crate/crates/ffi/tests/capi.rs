use std::f64::consts::PI;
use std::ffi::CStr;
use std::ptr;

use kbl_ffi::*;

const N: usize = 401;

fn nodes() -> Vec<f64> {
    (0..N).map(|i| i as f64 / (N - 1) as f64).collect()
}

fn basis(v: impl Fn(f64) -> f64, modes: usize) -> *mut KblBasis {
    let pot: Vec<f64> = nodes().into_iter().map(v).collect();
    let mut b = ptr::null_mut();
    let st = unsafe { kbl_basis_new(pot.as_ptr(), N, modes, &mut b) };
    assert_eq!(st, KblStatus::Ok);
    assert!(!b.is_null());
    b
}

fn last_error() -> String {
    let p = kbl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn constant_potential_spectrum() {
    let b = basis(|_| 2.0, 8);
    unsafe {
        assert_eq!(kbl_basis_n_points(b), N);
        assert_eq!(kbl_basis_count(b), 8);
        let mut mu = [0.0; 8];
        assert_eq!(kbl_basis_eigenvalues(b, mu.as_mut_ptr(), mu.len()), KblStatus::Ok);
        for (n, m) in mu.iter().enumerate() {
            let exact = 2.0 + (n as f64 * PI).powi(2);
            assert!((m - exact).abs() / exact < 1e-3, "mu_{n} = {m}, expected {exact}");
        }
        let mut gap = 0.0;
        assert_eq!(kbl_basis_gap(b, &mut gap), KblStatus::Ok);
        assert!((gap - PI * PI).abs() < 1e-2);

        let mut e0 = vec![0.0; N];
        assert_eq!(kbl_basis_mode(b, 0, e0.as_mut_ptr()), KblStatus::Ok);
        assert!(e0.iter().all(|v| (v.abs() - 1.0).abs() < 1e-8));
        kbl_basis_free(b);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let pot = vec![1.0; 400];
        let mut b = ptr::null_mut();
        assert_eq!(kbl_basis_new(pot.as_ptr(), 400, 4, &mut b), KblStatus::Config);
        assert!(b.is_null());
        assert!(last_error().contains("odd"), "{}", last_error());

        let mut pot = vec![1.0; N];
        pot[10] = -1.0;
        assert_eq!(kbl_basis_new(pot.as_ptr(), N, 4, &mut b), KblStatus::Domain);
        assert!(b.is_null());

        assert_eq!(kbl_basis_new(ptr::null(), N, 4, &mut b), KblStatus::NullPointer);
        assert!(last_error().contains("potential"));

        let b = basis(|_| 1.0, 4);
        let mut short = [0.0; 2];
        assert_eq!(kbl_basis_eigenvalues(b, short.as_mut_ptr(), 2), KblStatus::BufferTooSmall);
        let mut e = vec![0.0; N];
        assert_eq!(kbl_basis_mode(b, 4, e.as_mut_ptr()), KblStatus::Domain);
        assert_eq!(kbl_basis_mode(b, 3, e.as_mut_ptr()), KblStatus::Ok);
        assert!(kbl_last_error().is_null());

        let v = vec![-1.0; N];
        assert_eq!(kbl_cole(N, v.as_ptr(), e.as_mut_ptr()), KblStatus::Domain);
        kbl_basis_free(b);
        kbl_basis_free(ptr::null_mut());
        assert_eq!(kbl_basis_count(ptr::null()), 0);
    }
}

#[test]
fn hopf_cole_roundtrip() {
    let x = nodes();
    let u: Vec<f64> = x.iter().map(|x| 0.3 * (PI * x).sin()).collect();
    let mut v = vec![0.0; N];
    let mut back = vec![0.0; N];
    unsafe {
        assert_eq!(kbl_hopf(N, u.as_ptr(), v.as_mut_ptr()), KblStatus::Ok);
        assert!(v.iter().all(|&v| v > 0.0));
        assert_eq!(kbl_cole(N, v.as_ptr(), back.as_mut_ptr()), KblStatus::Ok);
    }
    assert!(sup_diff(&u, &back) < 1e-3);

    let big = vec![2000.0; N];
    let st = unsafe { kbl_hopf(N, big.as_ptr(), v.as_mut_ptr()) };
    assert_eq!(st, KblStatus::Range);
}

#[test]
fn burgers_series_matches_flow() {
    let b = basis(|x| 10.0 + 5.0 * x, 60);
    let x = nodes();
    let mut s0 = vec![0.0; N];
    let mut e0 = vec![0.0; N];
    unsafe {
        assert_eq!(kbl_basis_mode(b, 0, e0.as_mut_ptr()), KblStatus::Ok);
        assert_eq!(kbl_cole(N, e0.as_ptr(), s0.as_mut_ptr()), KblStatus::Ok);
    }
    let u0: Vec<f64> = s0.iter().zip(&x).map(|(s, x)| s + 0.05 * (PI * x).sin()).collect();
    let t = 0.5;
    let mut flow = vec![0.0; N];
    let mut series = vec![0.0; N];
    let mut cert = KblCertificate::default();
    unsafe {
        assert_eq!(kbl_burgers_flow(b, u0.as_ptr(), t, flow.as_mut_ptr()), KblStatus::Ok);
        let st = kbl_burgers_series(b, u0.as_ptr(), t, 6, 2, false, series.as_mut_ptr(), &mut cert);
        assert_eq!(st, KblStatus::Ok, "{}", last_error());
    }
    assert!(cert.valid && cert.absolutely_convergent && !cert.unsafe_override);
    assert_eq!(cert.t, t);
    assert!(sup_diff(&flow, &series) <= cert.tail_bound + 1e-10);
    assert!(sup_diff(&flow, &series) < 1e-2);
    unsafe { kbl_basis_free(b) };
}

#[test]
fn uncertified_time_is_refused() {
    let b = basis(|x| 10.0 + 5.0 * x, 40);
    let x = nodes();
    let u0: Vec<f64> = x.iter().map(|x| 30.0 * (PI * x).sin()).collect();
    let mut out = vec![0.0; N];
    let mut cert = KblCertificate::default();
    unsafe {
        let st = kbl_burgers_series(b, u0.as_ptr(), 1e-3, 4, 1, false, out.as_mut_ptr(), &mut cert);
        assert_eq!(st, KblStatus::CertFail);
        assert!(last_error().contains("certificate"));
        let st = kbl_burgers_series(b, u0.as_ptr(), 1e-3, 4, 1, true, out.as_mut_ptr(), &mut cert);
        assert_eq!(st, KblStatus::Ok);
        assert!(!cert.valid && cert.unsafe_override);
        kbl_basis_free(b);
    }
}

#[test]
fn heat_flows_and_blowup() {
    let b = basis(|_| 1.0, 20);
    let one = vec![1.0; N];
    let two = vec![2.0; N];
    let mut out = vec![0.0; N];
    unsafe {
        // e^{-t} decay of the constant state under V = 1
        assert_eq!(kbl_heat_flow(b, one.as_ptr(), 1.0, out.as_mut_ptr()), KblStatus::Ok);
        assert!(out.iter().all(|v| (v - (-1.0f64).exp()).abs() < 1e-10));
        assert_eq!(kbl_nonlinear_heat_flow(b, one.as_ptr(), 0.7, out.as_mut_ptr()), KblStatus::Ok);
        assert!(sup_diff(&out, &one) < 1e-10);
        // unit mass is required by the nonlinear flow and its decomposition
        assert_eq!(kbl_nonlinear_heat_flow(b, two.as_ptr(), 0.7, out.as_mut_ptr()), KblStatus::Domain);

        let (mut t_star, mut blew_up) = (0.0, false);
        assert_eq!(kbl_blowup_time(b, two.as_ptr(), 5.0, &mut t_star, &mut blew_up), KblStatus::Ok);
        assert!(blew_up);
        assert!((t_star - 2f64.ln()).abs() < 1e-4, "t* = {t_star}");

        let mut cert = KblCertificate::default();
        let st = kbl_heat_series(b, one.as_ptr(), 0.5, 4, 2, false, out.as_mut_ptr(), &mut cert);
        assert_eq!(st, KblStatus::Ok, "{}", last_error());
        assert!(cert.always_valid && cert.threshold == f64::NEG_INFINITY);
        assert!(sup_diff(&out, &one) < 1e-10);
        kbl_basis_free(b);
    }
}

#[test]
fn handle_is_shareable_across_threads() {
    struct Shared(*mut KblBasis);
    unsafe impl Sync for Shared {}
    impl Shared {
        fn get(&self) -> *mut KblBasis {
            self.0
        }
    }
    let b = Shared(basis(|x| 1.0 + x * x, 60));
    let x = nodes();
    let u0: Vec<f64> = x.iter().map(|x| 0.2 * (PI * x).sin()).collect();
    let results: Vec<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| {
                s.spawn(|| {
                    let mut out = vec![0.0; N];
                    let st = unsafe { kbl_burgers_flow(b.get(), u0.as_ptr(), 0.3, out.as_mut_ptr()) };
                    assert_eq!(st, KblStatus::Ok, "{}", last_error());
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    unsafe { kbl_basis_free(b.0) };
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(kbl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
