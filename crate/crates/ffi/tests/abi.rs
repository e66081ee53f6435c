use std::ffi::{CStr, CString};
use std::ptr;

use mixlink_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mix_last_error()) }.to_string_lossy().into_owned()
}

fn new_loss(name: &str, n: usize) -> *mut MixLoss {
    let mut out = ptr::null_mut();
    let s = unsafe { mix_loss_new(cstr(name).as_ptr(), n, &mut out) };
    assert_eq!(s, MixStatus::Ok, "{}", last_error());
    out
}

#[test]
fn log_loss_partials_and_risk() {
    let loss = new_loss("log", 2);
    let q = [0.25, 0.75];
    let mut l = [0.0; 2];
    assert_eq!(unsafe { mix_loss_partial(loss, q.as_ptr(), 2, l.as_mut_ptr()) }, MixStatus::Ok);
    assert!((l[0] - 4f64.ln()).abs() < 1e-12);
    assert!((l[1] - (4.0f64 / 3.0).ln()).abs() < 1e-12);

    let mut risk = 0.0;
    let s = unsafe { mix_loss_conditional_risk(loss, q.as_ptr(), q.as_ptr(), 2, &mut risk) };
    assert_eq!(s, MixStatus::Ok);
    assert!((risk - (0.25 * l[0] + 0.75 * l[1])).abs() < 1e-12);

    let mut beta = 0.0;
    assert_eq!(unsafe { mix_loss_mixability(loss, &mut beta) }, MixStatus::Ok);
    assert!((beta - 1.0).abs() < 1e-12);
    unsafe { mix_loss_free(loss) };
}

#[test]
fn unknown_loss_is_invalid_with_message() {
    let mut out = ptr::null_mut();
    let s = unsafe { mix_loss_new(cstr("hinge").as_ptr(), 2, &mut out) };
    assert_eq!(s, MixStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_pointers_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mix_loss_new(ptr::null(), 2, &mut out) }, MixStatus::NullPointer);
    assert_eq!(unsafe { mix_loss_mixability(ptr::null(), ptr::null_mut()) }, MixStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { mix_link_forward(ptr::null(), 0.5, &mut v) }, MixStatus::NullPointer);
    unsafe {
        mix_loss_free(ptr::null_mut());
        mix_link_free(ptr::null_mut());
    }
}

#[test]
fn invalid_probability_is_rejected() {
    let loss = new_loss("square_vector", 2);
    let q = [0.7, 0.7];
    let mut l = [0.0; 2];
    let s = unsafe { mix_loss_partial(loss, q.as_ptr(), 2, l.as_mut_ptr()) };
    assert_eq!(s, MixStatus::InvalidArgument);
    unsafe { mix_loss_free(loss) };
}

#[test]
fn link_round_trip_and_checks() {
    let loss = new_loss("square_vector", 2);
    let mut link = ptr::null_mut();
    let s = unsafe { mix_link_new(loss, cstr("canonical").as_ptr(), f64::NAN, &mut link) };
    assert_eq!(s, MixStatus::Ok, "{}", last_error());
    for &p in &[0.1, 0.5, 0.9] {
        let (mut v, mut back) = (0.0, 0.0);
        assert_eq!(unsafe { mix_link_forward(link, p, &mut v) }, MixStatus::Ok);
        assert_eq!(unsafe { mix_link_invert(link, v, &mut back) }, MixStatus::Ok);
        assert!((back - p).abs() < 1e-8);
    }
    let mut v = 0.0;
    assert_eq!(unsafe { mix_link_forward(link, 1.5, &mut v) }, MixStatus::InvalidArgument);
    unsafe { mix_link_free(link) };

    let mut ident = ptr::null_mut();
    assert_eq!(unsafe { mix_link_new(loss, cstr("identity").as_ptr(), f64::NAN, &mut ident) }, MixStatus::Ok);
    let (mut verdict, mut slack) = (-1, 0.0);
    assert_eq!(unsafe { mix_check_exp_concavity(ident, 0.2, &mut verdict, &mut slack) }, MixStatus::Ok);
    assert_eq!(verdict, 1);
    assert_eq!(unsafe { mix_check_prop5(ident, 0.2, &mut verdict, &mut slack) }, MixStatus::Ok);
    assert_eq!(verdict, 1);
    assert_eq!(unsafe { mix_check_exp_concavity(ident, 4.0, &mut verdict, &mut slack) }, MixStatus::Ok);
    assert_eq!(verdict, 0);
    assert!(slack < 0.0);
    unsafe {
        mix_link_free(ident);
        mix_loss_free(loss);
    }
}

#[test]
fn kl_and_regret_bound() {
    let y = [0.5, 0.5];
    let mut d = 1.0;
    assert_eq!(unsafe { mix_kl_loss(y.as_ptr(), y.as_ptr(), 2, &mut d) }, MixStatus::Ok);
    assert!(d.abs() < 1e-12);
    let mut b = 0.0;
    assert_eq!(unsafe { mix_regret_bound(4, 0.5, &mut b) }, MixStatus::Ok);
    assert!((b - 4f64.ln() / 0.5).abs() < 1e-12);
    assert_eq!(unsafe { mix_regret_bound(4, -1.0, &mut b) }, MixStatus::InvalidArgument);
}

#[test]
fn game_regret_within_bound() {
    let loss = new_loss("square_scalar", 2);
    let experts = [0.1, 0.4, 0.8];
    let outcomes: Vec<u8> = (0..200).map(|t| u8::from(t % 3 != 0)).collect();
    let (mut regret, mut bound) = (0.0, 0.0);
    let s = unsafe {
        mix_run_game(
            loss,
            cstr("aa").as_ptr(),
            cstr("inverse_loss").as_ptr(),
            1.0,
            experts.as_ptr(),
            experts.len(),
            outcomes.as_ptr(),
            outcomes.len(),
            &mut regret,
            &mut bound,
        )
    };
    assert_eq!(s, MixStatus::Ok, "{}", last_error());
    assert!(regret <= bound + 1e-9, "{regret} > {bound}");
    unsafe { mix_loss_free(loss) };
}

#[test]
fn header_declares_every_symbol() {
    let header = include_str!("../include/mixlink.h");
    for sym in [
        "mix_last_error",
        "mix_loss_new",
        "mix_loss_free",
        "mix_loss_partial",
        "mix_loss_conditional_risk",
        "mix_loss_weight",
        "mix_loss_mixability",
        "mix_link_new",
        "mix_link_free",
        "mix_link_forward",
        "mix_link_invert",
        "mix_check_exp_concavity",
        "mix_check_prop5",
        "mix_kl_loss",
        "mix_regret_bound",
        "mix_run_game",
        "MIX_STATUS_PANIC",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
