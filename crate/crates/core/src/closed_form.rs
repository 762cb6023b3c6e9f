//! Closed-form results: Lambert-W solution of the buffer decay constant,
//! piecewise limiting buffer PDFs, charge probabilities, outage probability,
//! throughput and per-packet timeslot cost.

use crate::chain::{ScalarSet, TcDist};
use crate::scenario::DerivedRates;

use libm::{exp, fabs, log, sqrt};

const E_INV: f64 = 0.36787944117144233; // 1/e

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormError {
    /// Argument below -1/e, outside the real domain of the principal branch.
    LambertDomain(f64),
    /// Halley iteration failed to reach the residual target.
    LambertNoConvergence(f64),
    /// Limiting-PDF query on a law without a stationary distribution.
    NonStationaryLaw,
    /// Timeslot cost diverges at outage probability 1.
    DivergentCost,
}

impl core::fmt::Display for ClosedFormError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ClosedFormError::LambertDomain(x) => write!(f, "lambert_w0: {x} < -1/e"),
            ClosedFormError::LambertNoConvergence(x) => {
                write!(f, "lambert_w0 failed to converge at {x}")
            }
            ClosedFormError::NonStationaryLaw => {
                write!(f, "buffer law has no stationary distribution (psi <= 1)")
            }
            ClosedFormError::DivergentCost => write!(f, "timeslot cost diverges at OP = 1"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ClosedFormError {}

/// Principal branch of the Lambert W function: the `w >= -1` solving
/// `w * e^w = x`, for `x >= -1/e`.
///
/// Halley iteration from a piecewise initial guess; converges to a residual
/// of `1e-12 * max(1, |x|)` in well under 50 steps.
pub fn lambert_w0(x: f64) -> Result<f64, ClosedFormError> {
    if x < -E_INV {
        // tolerate rounding right at the branch point
        if x > -E_INV - 1e-15 {
            return Ok(-1.0);
        }
        return Err(ClosedFormError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    // initial guess
    let mut w = if x < -0.25 {
        // series around the branch point x = -1/e; the discriminant can
        // round slightly negative right at the branch point
        let disc = 2.0 * (core::f64::consts::E * x + 1.0);
        let p = sqrt(if disc > 0.0 { disc } else { 0.0 });
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else if x < 3.0 {
        // Pade-flavored rational guess, adequate near 0
        x * (1.0 + 1.4 * x) / (1.0 + x * (2.4 + 1.2 * x))
    } else {
        let l1 = log(x);
        let l2 = log(l1);
        l1 - l2 + l2 / l1
    };

    let target = 1e-12 * if fabs(x) > 1.0 { fabs(x) } else { 1.0 };
    for _ in 0..50 {
        let ew = exp(w);
        let f = w * ew - x;
        // Halley step; iterate to fixed point (a few ulps of w) rather than
        // stopping at the residual target — near the branch point the
        // residual understates the error in w
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            // derivative vanished: w sits at the branch point
            return Ok(w);
        }
        w -= step;
        if w < -1.0 {
            w = -1.0 + 1e-16;
        }
        if fabs(step) <= 1e-16 * fabs(w) {
            return Ok(w);
        }
    }
    let residual = w * exp(w) - x;
    if fabs(residual) <= target * 10.0 {
        Ok(w)
    } else {
        Err(ClosedFormError::LambertNoConvergence(x))
    }
}

/// Stationary-regime parameters of one relay's buffer process.
///
/// `psi = b * lambda * m` decides existence: for `psi > 1` the buffer has a
/// limiting PDF shaped by the decay constant `q < 0` (the negative root of
/// `b lambda e^(q m) = b lambda + q`) and tail coefficient
/// `k = -q / (m (b lambda + q))`; for `psi <= 1` the buffer drifts upward
/// and stays charged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferLaw {
    /// Per-slot spend probability factor (conditional on a charged buffer).
    pub b: f64,
    /// Harvest rate, 1/mJ.
    pub lambda: f64,
    /// Per-transmission cost, mJ.
    pub m: f64,
    /// Convergence parameter `lambda * m * b`.
    pub psi: f64,
    /// Decay constant `q < 0` and tail coefficient `k`; `None` when the
    /// process has no stationary PDF (`psi <= 1`).
    pub decay: Option<Decay>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub q: f64,
    pub k: f64,
    /// `ln k`, kept separately: `k = q / W0(-psi e^-psi)` overflows for very
    /// large `psi` while `q x + ln k` stays representable.
    ln_k: f64,
}

impl Decay {
    /// Tail density `k e^(q x)`, evaluated in log space so the huge-`k`,
    /// tiny-`e^(q x)` product never degenerates to `inf * 0`.
    pub fn tail_density(&self, x: f64) -> f64 {
        exp(self.q * x + self.ln_k)
    }
}

impl BufferLaw {
    pub fn is_stationary(&self) -> bool {
        self.decay.is_some()
    }
}

/// Solve the buffer decay equation for given spend factor, harvest rate and
/// transmission cost.
///
/// Non-stationarity (`psi <= 1`) is a result, not an error: the returned law
/// carries no decay constant.
pub fn solve_decay(b: f64, lambda: f64, m: f64) -> Result<BufferLaw, ClosedFormError> {
    debug_assert!(b > 0.0 && b <= 1.0 && lambda > 0.0 && m > 0.0);
    let psi = b * lambda * m;
    if psi <= 1.0 {
        return Ok(BufferLaw {
            b,
            lambda,
            m,
            psi,
            decay: None,
        });
    }
    let bl = b * lambda;
    let w = lambert_w0(-psi * exp(-psi))?;
    let q = -w / m - bl;
    // m (bl + q) = -w exactly, so k = q / w; the naive form loses bl + q to
    // cancellation once psi is large (q rounds to -bl)
    let ln_k = log(-q) - log(-w);
    let k = q / w;
    Ok(BufferLaw {
        b,
        lambda,
        m,
        psi,
        decay: Some(Decay { q, k, ln_k }),
    })
}

/// Limiting PDF of the buffer level at `x` mJ (density, 1/mJ).
pub fn limiting_pdf(law: &BufferLaw, x: f64) -> Result<f64, ClosedFormError> {
    let decay = law.decay.ok_or(ClosedFormError::NonStationaryLaw)?;
    debug_assert!(x >= 0.0);
    let q = decay.q;
    if x < law.m {
        Ok((1.0 - exp(q * x)) / law.m)
    } else {
        Ok(decay.tail_density(x))
    }
}

/// CDF of the limiting buffer law, `Pr{B <= x}`.
pub fn limiting_cdf(law: &BufferLaw, x: f64) -> Result<f64, ClosedFormError> {
    let decay = law.decay.ok_or(ClosedFormError::NonStationaryLaw)?;
    let q = decay.q;
    let m = law.m;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let below = |t: f64| (t - (exp(q * t) - 1.0) / q) / m;
    if x < m {
        Ok(below(x))
    } else {
        // integral of the tail density from m to x
        let tail = (decay.tail_density(x) - decay.tail_density(m)) / q;
        Ok(below(m) + tail)
    }
}

/// Stationary probability that the buffer holds at least the transmission
/// cost: `1/psi` in the stationary regime, 1 when the buffer drifts upward
/// and stays charged.
pub fn prob_at_least_m(law: &BufferLaw) -> f64 {
    if law.is_stationary() {
        1.0 / law.psi
    } else {
        1.0
    }
}

/// Per-slot system outage probability from the stationary TC distribution,
/// the convolution scalars and the charge probabilities.
pub fn outage_probability(
    tc: &TcDist,
    scalars: &ScalarSet,
    pu1: f64,
    pu2: f64,
    rates: &DerivedRates,
) -> f64 {
    let direct_fail = 1.0 - exp(-rates.w_sd * rates.gamma_th);
    let s = scalars;
    tc.p_s * direct_fail
        + tc.p_sr1 * s.c * (s.d * pu1 + 1.0 - pu1)
        + tc.p_sr2 * s.m * (s.n * pu2 + 1.0 - pu2)
        + (tc.p1 + tc.p2 + tc.p3)
            * s.o
            * (s.f * pu2 + 1.0 - pu2)
            * (s.g * pu1 + 1.0 - pu1)
}

/// System throughput `(1 - OP) * r0` in bit/s/Hz.
pub fn throughput(op: f64, r0: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&op) && r0 > 0.0);
    (1.0 - op) * r0
}

/// Expected timeslots per delivered packet, `1 / (1 - OP)`.
pub fn timeslot_cost(op: f64) -> Result<f64, ClosedFormError> {
    debug_assert!((0.0..=1.0).contains(&op));
    if op >= 1.0 {
        return Err(ClosedFormError::DivergentCost);
    }
    Ok(1.0 / (1.0 - op))
}
