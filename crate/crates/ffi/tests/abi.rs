use std::ffi::{CStr, CString};
use std::ptr;

use cellfree_ris_ffi::*;

fn last_error() -> String {
    let p = cfr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_scenario(users: usize) -> *mut CfrScenario {
    let toml = if users == 1 {
        "elements = 4\n".to_string()
    } else {
        format!("elements = 4\n[users]\nrule = \"circle\"\ncount = {users}\ncenter = [40.0, 0.0, 1.65]\nradius = 1.0\n")
    };
    let text = CString::new(toml).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { cfr_scenario_from_toml(text.as_ptr(), &mut s) }, CfrStatus::Ok);
    s
}

#[test]
fn single_user_round_trip() {
    unsafe {
        let s = small_scenario(1);
        let mut p = 0.0;
        assert_eq!(cfr_scenario_snr(s, &mut p), CfrStatus::Ok);
        assert!((p - 1e8).abs() < 1e-3);
        let mut r = ptr::null_mut();
        assert_eq!(cfr_realization_generate(s, 11, &mut r), CfrStatus::Ok);
        let (mut m, mut k, mut i) = (0, 0, 0);
        assert_eq!(cfr_realization_dims(r, &mut m, &mut k, &mut i), CfrStatus::Ok);
        assert_eq!((m, k, i), (8, 1, 16));

        let mut f1 = 0;
        let mut f2 = 0;
        let mut r2 = ptr::null_mut();
        assert_eq!(cfr_realization_generate(s, 11, &mut r2), CfrStatus::Ok);
        cfr_realization_fingerprint(r, &mut f1);
        cfr_realization_fingerprint(r2, &mut f2);
        assert_eq!(f1, f2);
        cfr_realization_free(r2);

        let alg = CString::new("alg1").unwrap();
        let mut res = ptr::null_mut();
        assert_eq!(cfr_optimize(r, alg.as_ptr(), p, 3, &mut res), CfrStatus::Ok);
        let mut rate = 0.0;
        assert_eq!(cfr_result_min_rate(res, &mut rate), CfrStatus::Ok);
        assert!(rate > 0.0);

        let mut len = 0;
        assert_eq!(cfr_result_phases(res, ptr::null_mut(), 0, &mut len), CfrStatus::Ok);
        assert_eq!(len, 16);
        let mut small = [0.0; 4];
        assert_eq!(
            cfr_result_phases(res, small.as_mut_ptr(), small.len(), &mut len),
            CfrStatus::InvalidArgument
        );
        let mut buf = vec![-1.0; len];
        assert_eq!(cfr_result_phases(res, buf.as_mut_ptr(), buf.len(), &mut len), CfrStatus::Ok);
        assert!(buf.iter().all(|&t| (0.0..std::f64::consts::TAU).contains(&t)));
        let mut rates = [0.0; 1];
        assert_eq!(cfr_result_user_rates(res, rates.as_mut_ptr(), 1, &mut len), CfrStatus::Ok);
        assert_eq!(rates[0], rate);

        cfr_result_free(res);
        cfr_realization_free(r);
        cfr_scenario_free(s);
    }
}

#[test]
fn error_codes() {
    unsafe {
        assert_eq!(cfr_scenario_default(ptr::null_mut()), CfrStatus::NullPointer);
        assert!(last_error().contains("NULL"));

        let bad = CString::new("elements = \"many\"").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(cfr_scenario_from_toml(bad.as_ptr(), &mut s), CfrStatus::Config);
        assert!(s.is_null());

        let s = small_scenario(3);
        let mut r = ptr::null_mut();
        assert_eq!(cfr_realization_generate(s, 5, &mut r), CfrStatus::Ok);
        let mut res = ptr::null_mut();
        let alg1 = CString::new("alg1").unwrap();
        assert_eq!(cfr_optimize(r, alg1.as_ptr(), 1e8, 0, &mut res), CfrStatus::InvalidArgument);
        let unknown = CString::new("alg9").unwrap();
        assert_eq!(cfr_optimize(r, unknown.as_ptr(), 1e8, 0, &mut res), CfrStatus::Config);
        assert!(last_error().contains("alg9"));
        let alg6 = CString::new("alg6:1").unwrap();
        assert_eq!(cfr_optimize(r, alg6.as_ptr(), 1e8, 0, &mut res), CfrStatus::Ok);
        let mut len = 0;
        cfr_result_user_rates(res, ptr::null_mut(), 0, &mut len);
        assert_eq!(len, 3);
        cfr_result_free(res);
        cfr_realization_free(r);
        cfr_scenario_free(s);

        assert_eq!(cfr_scenario_set_elements(ptr::null_mut(), 4), CfrStatus::NullPointer);
        cfr_scenario_free(ptr::null_mut());
        cfr_result_free(ptr::null_mut());
    }
}

#[test]
fn percentile_and_version() {
    unsafe {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut q = 0.0;
        assert_eq!(cfr_percentile(v.as_ptr(), v.len(), 0.5, &mut q), CfrStatus::Ok);
        assert_eq!(q, 3.0);
        assert_eq!(cfr_percentile(ptr::null(), 0, 0.5, &mut q), CfrStatus::InvalidArgument);
        let ver = CStr::from_ptr(cfr_version()).to_str().unwrap();
        assert_eq!(ver, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn experiment_through_abi() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        "experiment = \"cdf\"\ntrials = 2\nalgorithms = [\"alg1\", \"no_ris\"]\n[scenario]\nelements = 4\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cfr_run_experiment(cfg.as_ptr(), 1, out.as_ptr()) }, CfrStatus::Ok);
    let cdf = std::fs::read_to_string(dir.path().join("cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 5);
    let bad = CString::new("trials = 0").unwrap();
    assert_eq!(unsafe { cfr_run_experiment(bad.as_ptr(), 1, out.as_ptr()) }, CfrStatus::Config);
}
