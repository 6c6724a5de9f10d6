use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pbqn_ffi::*;

fn last_error() -> String {
    let p = pbqn_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synthetic(spec: &str, seed: u64) -> *mut PbqnProblem {
    let spec = CString::new(spec).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { pbqn_problem_synthetic(spec.as_ptr(), seed, &mut p) },
        PbqnStatus::Ok
    );
    p
}

#[test]
fn quadratic_run_through_handles() {
    let p = synthetic("quad:4:0.5:1:40", 3);
    let (mut n, mut d) = (0usize, 0usize);
    assert_eq!(unsafe { pbqn_problem_shape(p, &mut n, &mut d) }, PbqnStatus::Ok);
    assert_eq!((n, d), (40, 4));

    let mut opts = pbqn_options_default();
    opts.initial_batch = 8;
    opts.max_fge = 30.0;
    opts.seed = 5;
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { pbqn_run(p, &opts, ptr::null(), 0, &mut r) }, PbqnStatus::Ok);
    let len = unsafe { pbqn_result_len(r) };
    assert!(len > 1);

    let mut first = PbqnRecord::default();
    let mut last = PbqnRecord::default();
    unsafe {
        assert_eq!(pbqn_result_record(r, 0, &mut first), PbqnStatus::Ok);
        assert_eq!(pbqn_result_record(r, len - 1, &mut last), PbqnStatus::Ok);
        assert_eq!(pbqn_result_record(r, len, &mut last), PbqnStatus::InvalidArgument);
    }
    assert_eq!(first.k, 0);
    assert!(last.train_loss < first.train_loss);
    assert!(last.fge >= 30.0);

    let mut x = [0.0; 4];
    let mut fx = 0.0;
    let mut g = [0.0; 4];
    let mut rstar = 0.0;
    let mut reason = PbqnStopReason::Converged;
    unsafe {
        assert_eq!(pbqn_result_solution(r, x.as_mut_ptr(), 4), PbqnStatus::Ok);
        assert_eq!(pbqn_result_solution(r, x.as_mut_ptr(), 3), PbqnStatus::InvalidArgument);
        assert_eq!(
            pbqn_problem_evaluate(p, x.as_ptr(), 4, &mut fx, g.as_mut_ptr()),
            PbqnStatus::Ok
        );
        assert_eq!(pbqn_problem_rstar(p, &mut rstar), PbqnStatus::Ok);
        assert_eq!(pbqn_result_stop_reason(r, &mut reason), PbqnStatus::Ok);
        pbqn_result_free(r);
        pbqn_problem_free(p);
    }
    assert_eq!(fx, last.train_loss);
    assert!(fx - rstar < 1e-3, "gap {}", fx - rstar);
    assert_eq!(reason, PbqnStopReason::Budget);
}

#[test]
fn dense_logistic_matches_hand_value() {
    let features = [1.0, 0.0, 0.0, 2.0];
    let labels = [1.0, -1.0];
    let mut p = ptr::null_mut();
    let status = unsafe { pbqn_problem_logistic_dense(features.as_ptr(), labels.as_ptr(), 2, 2, 0.0, &mut p) };
    assert_eq!(status, PbqnStatus::Ok);
    let mut v = 0.0;
    let x = [0.5, 0.25];
    assert_eq!(
        unsafe { pbqn_problem_evaluate(p, x.as_ptr(), 2, &mut v, ptr::null_mut()) },
        PbqnStatus::Ok
    );
    // margins z·aᵀx: +0.5 and −0.5
    let expect = 0.5 * ((1.0f64 + (-0.5f64).exp()).ln() + (1.0f64 + 0.5f64.exp()).ln());
    assert!((v - expect).abs() < 1e-15);
    unsafe { pbqn_problem_free(p) };

    let bad = [1.0, 0.0];
    let status = unsafe { pbqn_problem_logistic_dense(features.as_ptr(), bad.as_ptr(), 2, 2, 0.0, &mut p) };
    assert_eq!(status, PbqnStatus::InvalidArgument);
    assert!(last_error().contains("label 1"));
}

#[test]
fn errors_are_reported_with_codes() {
    let mut p = ptr::null_mut();
    let spec = CString::new("cubic:3").unwrap();
    assert_eq!(
        unsafe { pbqn_problem_synthetic(spec.as_ptr(), 0, &mut p) },
        PbqnStatus::InvalidArgument
    );
    assert!(last_error().contains("synthetic spec"));
    assert_eq!(
        unsafe { pbqn_problem_synthetic(ptr::null(), 0, &mut p) },
        PbqnStatus::NullPointer
    );

    let missing = CString::new("/nonexistent/file.svm").unwrap();
    assert_eq!(
        unsafe { pbqn_problem_from_libsvm(missing.as_ptr(), &mut p) },
        PbqnStatus::Io
    );

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.svm");
    std::fs::write(&file, "+1 1:0.5\n-1 0:1\n").unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { pbqn_problem_from_libsvm(path.as_ptr(), &mut p) },
        PbqnStatus::Parse
    );
    assert!(last_error().contains("bad.svm:2:"), "{}", last_error());

    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { pbqn_run(ptr::null(), ptr::null(), ptr::null(), 0, &mut r) },
        PbqnStatus::NullPointer
    );
    assert_eq!(unsafe { pbqn_result_len(ptr::null()) }, 0);
    unsafe {
        pbqn_problem_free(ptr::null_mut());
        pbqn_result_free(ptr::null_mut());
    }
}

#[test]
fn performance_model_threshold() {
    let mut t = 0.0;
    assert_eq!(
        unsafe { pbqn_perf_model_threshold(4.0, 3.0, 1.0, 4.0, 0.2, &mut t) },
        PbqnStatus::Ok
    );
    assert_eq!(t, 0.9375);
    assert_eq!(
        unsafe { pbqn_perf_model_threshold(4.0, 3.0, 1.0, 4.0, 0.0, &mut t) },
        PbqnStatus::InvalidArgument
    );
    let v = unsafe { CStr::from_ptr(pbqn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/pbqn.h");
    assert!(header.exists(), "build script writes the header");
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"pbqn.h\"\nint main(void) { PbqnOptions o = pbqn_options_default(); \
         PbqnProblem *p = 0; PbqnStatus s = pbqn_problem_synthetic(\"quad:2:0.5:1:4\", 1, &p); \
         pbqn_problem_free(p); return (int)s + (int)o.mode; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
