use std::ffi::{CStr, CString};
use std::ptr;

use kaemsim_ffi::*;

const DECAY: &str = "species a @ 1, b @ 0\na -> b {1}\nreport a\nreport b\nequilibrate 5\n";

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_message() -> String {
    let p = ks_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_exposes_means_and_names() {
    let src = cstr(DECAY);
    let mut opts = ks_options_default();
    opts.points = 51;
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(ks_run_source(src.as_ptr(), &opts, &mut run), KsStatus::Ok);
        assert_eq!(ks_run_species_count(run), 2);
        assert_eq!(ks_run_reaction_count(run), 1);
        assert_eq!(ks_run_timecourse_count(run), 1);
        let name = CStr::from_ptr(ks_run_species_name(run, 1)).to_str().unwrap();
        assert_eq!(name, "b");
        assert!(ks_run_species_name(run, 2).is_null());

        let n = ks_run_point_count(run, 0);
        assert_eq!(n, 51);
        let mut t = vec![0.0; n];
        let mut a = vec![0.0; n];
        assert_eq!(ks_run_copy_times(run, 0, t.as_mut_ptr(), n), KsStatus::Ok);
        assert_eq!(ks_run_copy_means(run, 0, 0, a.as_mut_ptr(), n), KsStatus::Ok);
        for (ti, ai) in t.iter().zip(&a) {
            assert!((ai - (-ti).exp()).abs() < 1e-5, "a({ti}) = {ai}");
        }
        assert_eq!(ks_run_copy_means(run, 0, 0, a.as_mut_ptr(), n - 1), KsStatus::BufferTooSmall);
        assert_eq!(ks_run_copy_means(run, 3, 0, a.as_mut_ptr(), n), KsStatus::OutOfRange);
        assert_eq!(ks_run_device_frame_count(run), 0);

        let names: Vec<String> = (0..ks_run_artifact_count(run))
            .map(|i| CStr::from_ptr(ks_run_artifact_name(run, i)).to_string_lossy().into_owned())
            .collect();
        assert!(names.iter().any(|n| n == "score.svg"), "{names:?}");
        assert!(names.iter().any(|n| n.ends_with(".csv")), "{names:?}");
        ks_run_free(run);
    }
}

#[test]
fn syntax_error_carries_position() {
    let src = cstr("species a @ 1\na -> {1}\n");
    let mut run = ptr::null_mut();
    let status = unsafe { ks_run_source(src.as_ptr(), ptr::null(), &mut run) };
    assert_ne!(status, KsStatus::Ok);
    assert!(run.is_null());
    assert_eq!(ks_last_error_line(), 2);
    assert!(ks_last_error_column() > 0);
    assert!(!last_message().is_empty());
}

#[test]
fn null_and_bad_utf8_are_rejected() {
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(ks_run_source(ptr::null(), ptr::null(), &mut run), KsStatus::NullArgument);
        let src = cstr(DECAY);
        assert_eq!(ks_run_source(src.as_ptr(), ptr::null(), ptr::null_mut()), KsStatus::NullArgument);
        let bad = [0x73u8, 0xff, 0x00];
        assert_eq!(ks_check_source(bad.as_ptr().cast(), ptr::null_mut(), ptr::null_mut()), KsStatus::InvalidUtf8);
        assert!(last_message().contains("UTF-8"));
        ks_run_free(ptr::null_mut());
        assert_eq!(ks_run_species_count(ptr::null()), 0);
    }
}

#[test]
fn protocol_error_is_classified() {
    let src = cstr("sample s { volume 1 uL; temperature 20 celsius }\nspecies a @ 1 in s\ndispose s\ndispose s\n");
    let mut run = ptr::null_mut();
    let status = unsafe { ks_run_source(src.as_ptr(), ptr::null(), &mut run) };
    assert!(matches!(status, KsStatus::ProtocolError | KsStatus::RuntimeError), "{status:?}");
    assert!(!last_message().is_empty());
}

#[test]
fn check_counts_and_device_frames() {
    let src = cstr(include_str!("../../core/examples/incubation.kae"));
    let (mut s, mut r) = (0usize, 0usize);
    unsafe {
        assert_eq!(ks_check_source(src.as_ptr(), &mut s, &mut r), KsStatus::Ok);
        assert_eq!((s, r), (3, 2));
        let mut opts = ks_options_default();
        opts.device = true;
        let mut run = ptr::null_mut();
        assert_eq!(ks_run_source(src.as_ptr(), &opts, &mut run), KsStatus::Ok, "{}", last_message());
        assert!(ks_run_device_frame_count(run) > 0);
        ks_run_free(run);
    }
}

#[test]
fn invalid_options_are_rejected() {
    let src = cstr(DECAY);
    let mut opts = ks_options_default();
    opts.rtol = 0.0;
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ks_run_source(src.as_ptr(), &opts, &mut run) }, KsStatus::InvalidConfig);
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(ks_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
