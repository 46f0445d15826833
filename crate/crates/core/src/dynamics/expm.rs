//! `exp(-i H h)` applied to a block of column vectors by a shifted Taylor
//! series whose truncation error is bounded a priori.
//!
//! With `c` the centre and `r` the half-width of an interval enclosing the
//! spectrum, `||H - c|| <= r`, so after `K` terms the remainder of the series for
//! `x = r h <= 1` is at most `x^(K+1)/(K+1)! / (1 - x/(K+2))`. Steps with
//! larger `x` are split into equal substeps first.

use ndarray::Array2;
use num_complex::Complex64;

use crate::operator::HermitianOperator;

const MAX_SUBSTEP_NORM: f64 = 1.0;

/// Smallest order whose remainder bound is at most `tol`.
pub(crate) fn taylor_order(x: f64, tol: f64) -> usize {
    let mut term = 1.0;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= x / k as f64;
        let next = term * x / (k + 1) as f64;
        let bound = next / (1.0 - x / (k + 2) as f64);
        if bound <= tol || k >= 60 {
            return k;
        }
    }
}

/// Scratch blocks reused across steps.
pub(crate) struct Workspace {
    term: Array2<Complex64>,
    next: Array2<Complex64>,
    acc: Array2<Complex64>,
}

impl Workspace {
    pub(crate) fn new(dim: usize, ncols: usize) -> Self {
        Workspace {
            term: Array2::zeros((dim, ncols)),
            next: Array2::zeros((dim, ncols)),
            acc: Array2::zeros((dim, ncols)),
        }
    }
}

/// Replaces `block` by `exp(-i h dt) block` with operator-norm error at most
/// `tol`. The series is always carried to roundoff level so that the step
/// stays unitary to machine precision.
pub(crate) fn apply_exp(
    h: &HermitianOperator,
    (lo, hi): (f64, f64),
    dt: f64,
    tol: f64,
    block: &mut Array2<Complex64>,
    ws: &mut Workspace,
) {
    let centre = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    let substeps = ((radius * dt.abs()) / MAX_SUBSTEP_NORM).ceil().max(1.0) as usize;
    let hs = dt / substeps as f64;
    let order = taylor_order(radius * hs.abs(), tol.min(f64::EPSILON) / substeps as f64);
    let phase = Complex64::from_polar(1.0, -centre * hs);

    for _ in 0..substeps {
        ws.acc.assign(block);
        ws.term.assign(block);
        for k in 1..=order {
            h.apply_block_shifted(centre, ws.term.view(), ws.next.view_mut());
            let factor = Complex64::new(0.0, -hs / k as f64);
            ws.next.mapv_inplace(|v| v * factor);
            std::mem::swap(&mut ws.term, &mut ws.next);
            ws.acc += &ws.term;
        }
        block.zip_mut_with(&ws.acc, |b, a| *b = a * phase);
    }
}
