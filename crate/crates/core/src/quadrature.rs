//! One-dimensional adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 40;

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    exhausted: &mut bool,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        *exhausted = true;
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(
        f,
        a,
        fa,
        lm,
        flm,
        m,
        fm,
        left,
        0.5 * tol,
        depth - 1,
        exhausted,
    ) + simpson_step(
        f,
        m,
        fm,
        rm,
        frm,
        b,
        fb,
        right,
        0.5 * tol,
        depth - 1,
        exhausted,
    )
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first cut into `panels` equal pieces so that narrow peaks
/// are not missed by the coarsest Simpson estimate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Quadrature(format!("bad interval [{a}, {b}]")));
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut exhausted = false;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let hi = if k + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_step(
            &f,
            lo,
            flo,
            mid,
            fmid,
            hi,
            fhi,
            whole,
            tol / panels as f64,
            MAX_DEPTH,
            &mut exhausted,
        );
    }
    if !total.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    if exhausted {
        log::debug!("adaptive Simpson hit its depth cap on [{a}, {b}]");
    }
    Ok(total)
}

/// Integrate at `tol` and again at `tol / 10`; error out when the two disagree
/// by more than `rel` relative to the refined value.
pub fn integrate_checked<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
    rel: f64,
) -> Result<f64> {
    let coarse = adaptive_simpson(&f, a, b, panels, tol)?;
    let fine = adaptive_simpson(&f, a, b, panels * 2, tol / 10.0)?;
    let scale = fine.abs().max(f64::MIN_POSITIVE);
    if (coarse - fine).abs() / scale > rel {
        return Err(Error::Quadrature(format!(
            "relative change {:.3e} after refinement on [{a}, {b}] (coarse {coarse}, fine {fine})",
            (coarse - fine).abs() / scale
        )));
    }
    Ok(fine)
}
