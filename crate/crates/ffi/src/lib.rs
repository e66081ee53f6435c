//! C ABI for `mixlink`: opaque loss and link handles, integer status codes and
//! a per-thread last-error message.
//!
//! Every function returns a [`MixStatus`]; results are written through out
//! pointers. Handles created by `*_new` must be released with the matching
//! `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use mixlink::analysis::{check_prop5, numeric_exp_concavity, ANALYTIC_TOL, GRID_STEP};
use mixlink::bregman::kl_loss;
use mixlink::engine::{regret_bound, run_game, Algorithm, ConstantExperts, GameConfig, GameLoss, Substitution};
use mixlink::links::{link_by_name, CompositeLoss, LinkFunction};
use mixlink::losses::{catalog_loss, mixability_constant, ProperLossSpec};
use mixlink::simplex::ProbVector;
use mixlink::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Runtime = 3,
    Panic = 4,
}

/// A catalog proper loss.
pub struct MixLoss(ProperLossSpec);

/// A link function bound to the loss it was built for.
pub struct MixLink {
    loss: ProperLossSpec,
    link: LinkFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(MixStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = if e.is_validation() {
            MixStatus::InvalidArgument
        } else {
            MixStatus::Runtime
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MixStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MixStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MixStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MixStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn loss_ref<'a>(p: *const MixLoss) -> Result<&'a ProperLossSpec, Fail> {
    p.as_ref().map(|l| &l.0).ok_or_else(|| null("loss"))
}

unsafe fn link_ref<'a>(p: *const MixLink) -> Result<&'a MixLink, Fail> {
    p.as_ref().ok_or_else(|| null("link"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a catalog loss (`log`, `square_vector`, `square_scalar`,
/// `boosting`, `absolute`, `zero_one`) over `n` classes.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_new(name: *const c_char, n: usize, out: *mut *mut MixLoss) -> MixStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = catalog_loss(str_arg(name, "name")?, n)?;
        *out = Box::into_raw(Box::new(MixLoss(spec)));
        Ok(())
    })
}

/// # Safety
/// `loss` must come from `mix_loss_new` and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_free(loss: *mut MixLoss) {
    if !loss.is_null() {
        drop(Box::from_raw(loss));
    }
}

/// Writes the `n` partial losses at prediction `q` into `out`.
///
/// # Safety
/// `q` and `out` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_partial(loss: *const MixLoss, q: *const f64, n: usize, out: *mut f64) -> MixStatus {
    guard(|| {
        let spec = loss_ref(loss)?;
        let q = ProbVector::new(slice_arg(q, n, "q")?.to_vec())?;
        let l = spec.partial_loss(&q)?;
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, n).copy_from_slice(&l);
        Ok(())
    })
}

/// `p'ℓ(q)`.
///
/// # Safety
/// `p` and `q` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_conditional_risk(
    loss: *const MixLoss,
    p: *const f64,
    q: *const f64,
    n: usize,
    out: *mut f64,
) -> MixStatus {
    guard(|| {
        let spec = loss_ref(loss)?;
        let p = ProbVector::new(slice_arg(p, n, "p")?.to_vec())?;
        let q = ProbVector::new(slice_arg(q, n, "q")?.to_vec())?;
        *out_arg(out, "out")? = spec.conditional_risk(&p, &q)?;
        Ok(())
    })
}

/// Weight function `w(p̃)` of a binary loss.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_weight(loss: *const MixLoss, p: f64, out: *mut f64) -> MixStatus {
    guard(|| {
        *out_arg(out, "out")? = loss_ref(loss)?.weight(p)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_loss_mixability(loss: *const MixLoss, out: *mut f64) -> MixStatus {
    guard(|| {
        *out_arg(out, "out")? = mixability_constant(loss_ref(loss)?)?;
        Ok(())
    })
}

/// Creates a link (`identity`, `canonical`, `psi_star`, `geometric`) for a
/// binary loss. `beta` is used by the geometric link only; pass NaN for the
/// loss's mixability constant.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_link_new(
    loss: *const MixLoss,
    name: *const c_char,
    beta: f64,
    out: *mut *mut MixLink,
) -> MixStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = loss_ref(loss)?.clone();
        let beta = (!beta.is_nan()).then_some(beta);
        let link = link_by_name(str_arg(name, "name")?, &spec, beta)?;
        *out = Box::into_raw(Box::new(MixLink { loss: spec, link }));
        Ok(())
    })
}

/// # Safety
/// `link` must come from `mix_link_new` and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mix_link_free(link: *mut MixLink) {
    if !link.is_null() {
        drop(Box::from_raw(link));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_link_forward(link: *const MixLink, p: f64, out: *mut f64) -> MixStatus {
    guard(|| {
        let l = link_ref(link)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProb(format!("p = {p} outside [0, 1]")).into());
        }
        *out_arg(out, "out")? = l.link.forward(p);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_link_invert(link: *const MixLink, v: f64, out: *mut f64) -> MixStatus {
    guard(|| {
        *out_arg(out, "out")? = link_ref(link)?.link.invert(v)?;
        Ok(())
    })
}

/// Midpoint grid test of `α`-exp-concavity for the composite loss.
/// `verdict` receives 1 or 0.
///
/// # Safety
/// `verdict` and `min_slack` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_check_exp_concavity(
    link: *const MixLink,
    alpha: f64,
    verdict: *mut i32,
    min_slack: *mut f64,
) -> MixStatus {
    guard(|| {
        let l = link_ref(link)?;
        let c = CompositeLoss::new(l.loss.clone(), l.link.clone())?;
        let r = numeric_exp_concavity(&c, alpha, GRID_STEP)?;
        *out_arg(verdict, "verdict")? = i32::from(r.verdict);
        *out_arg(min_slack, "min_slack")? = r.min_slack();
        Ok(())
    })
}

/// Analytic curvature test of `α`-exp-concavity for the composite loss.
///
/// # Safety
/// `verdict` and `min_slack` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_check_prop5(
    link: *const MixLink,
    alpha: f64,
    verdict: *mut i32,
    min_slack: *mut f64,
) -> MixStatus {
    guard(|| {
        let l = link_ref(link)?;
        let r = check_prop5(&l.loss, &l.link, alpha, ANALYTIC_TOL)?;
        *out_arg(verdict, "verdict")? = i32::from(r.verdict);
        *out_arg(min_slack, "min_slack")? = r.min_slack();
        Ok(())
    })
}

/// # Safety
/// `y` and `v` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_kl_loss(y: *const f64, v: *const f64, n: usize, out: *mut f64) -> MixStatus {
    guard(|| {
        let y = ProbVector::new(slice_arg(y, n, "y")?.to_vec())?;
        let v = ProbVector::new(slice_arg(v, n, "v")?.to_vec())?;
        *out_arg(out, "out")? = kl_loss(&y, &v)?;
        Ok(())
    })
}

/// `ln N / η`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_regret_bound(n: usize, eta: f64, out: *mut f64) -> MixStatus {
    guard(|| {
        *out_arg(out, "out")? = regret_bound(n, eta)?;
        Ok(())
    })
}

/// Plays a binary game against constant experts. `algorithm` is `aa` or
/// `waa`; `substitution` names the substitution function. Outcomes are 0 or 1.
///
/// # Safety
/// `experts` must point to `n_experts` doubles and `outcomes` to `t`
/// bytes; `regret` and `bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mix_run_game(
    loss: *const MixLoss,
    algorithm: *const c_char,
    substitution: *const c_char,
    eta: f64,
    experts: *const f64,
    n_experts: usize,
    outcomes: *const u8,
    t: usize,
    regret: *mut f64,
    bound: *mut f64,
) -> MixStatus {
    guard(|| {
        let spec = loss_ref(loss)?.clone();
        let algo: Algorithm = str_arg(algorithm, "algorithm")?.parse()?;
        let subst: Substitution = str_arg(substitution, "substitution")?.parse()?;
        let preds = slice_arg(experts, n_experts, "experts")?.to_vec();
        let ys: Vec<usize> = slice_arg(outcomes, t, "outcomes")?.iter().map(|y| *y as usize).collect();
        let config = GameConfig::new(GameLoss::Proper(spec), algo, subst, eta);
        let trace = run_game(&config, &ConstantExperts(preds), &ys)?;
        *out_arg(regret, "regret")? = trace.final_regret();
        *out_arg(bound, "bound")? = trace.bound;
        Ok(())
    })
}
