//! Embedded Dormand–Prince 5(4) integrator with a per-step hook.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error coefficients (5th minus 4th order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Absolute and relative local error tolerance.
    pub tol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl StepControl {
    pub fn new(tol: f64, h_max: f64) -> Self {
        Self {
            tol,
            h_max,
            h_min: 1e-14,
        }
    }
}

/// What the step hook wants the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = rhs(s, y)` from `s0` to `s_end` (`s_end > s0`).
///
/// After every accepted step `hook(s, &mut y)` is called; it may modify the
/// state (projection onto an invariant) or stop the integration. Returns the
/// final parameter reached.
pub fn integrate<const N: usize, F, H>(
    rhs: F,
    s0: f64,
    y0: [f64; N],
    s_end: f64,
    ctl: StepControl,
    mut hook: H,
) -> Result<(f64, Stats)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    H: FnMut(f64, &mut [f64; N]) -> Flow,
{
    let mut stats = Stats::default();
    let mut s = s0;
    let mut y = y0;
    if s_end <= s0 {
        return Ok((s, stats));
    }
    let mut k1 = rhs(s, &y);
    let mut h = (0.01 * ctl.h_max).min(s_end - s0).max(ctl.h_min);
    let mut fac_prev: f64 = 1e-4;

    while s < s_end {
        let last = s + h >= s_end;
        if last {
            h = s_end - s;
        }
        let k2 = rhs(s + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(s + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(s + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(
            s + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = rhs(
            s + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let y_new = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = rhs(s + h, &y_new);

        let mut err: f64 = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((e / sc).abs());
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }

        if finite && err <= 1.0 {
            stats.accepted += 1;
            s = if last { s_end } else { s + h };
            y = y_new;
            let flow = hook(s, &mut y);
            k1 = rhs(s, &y);
            if flow == Flow::Stop {
                break;
            }
            // PI step-size controller
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.7 / 5.0) * fac_prev.powf(0.4 / 5.0)).clamp(0.2, 5.0)
            };
            fac_prev = err.max(1e-4);
            h = (h * fac).min(ctl.h_max);
        } else {
            stats.rejected += 1;
            let fac = if finite {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h *= fac;
            if h < ctl.h_min {
                return Err(Error::NumericalBlowup {
                    s,
                    reason: format!("step size underflow (h = {h:e}, err = {err:e})"),
                });
            }
        }
    }
    Ok((s, stats))
}
