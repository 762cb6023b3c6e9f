//! Discretized Markov-chain analytics.
//!
//! Builds the N-bin chains over the destination's accumulated SNR for each
//! transmitter-candidate group, the 6x6 TC chain, the convolution scalars
//! that couple them, and runs the nested fixed point (including the damped
//! outer update of the buffer charge probabilities) that makes the whole
//! analytic pipeline self-consistent.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::closed_form::{self};
use crate::fading::{below_prob, exceed_prob, link_bin_pdf, BinPdf};
use crate::scenario::{DerivedRates, EnergyParams};

/// Tolerance of every power iteration (update-error L2 norm).
pub const POWER_ITERATION_TOL: f64 = 1e-7;
/// Iteration cap of the bin-chain and TC power iterations.
pub const POWER_ITERATION_CAP: usize = 100_000;
/// Pass cap of the outermost charge-probability fixed point.
pub const OUTER_PASS_CAP: usize = 500;
/// Damping factor of the outer charge-probability update.
const OUTER_DAMPING: f64 = 0.5;
/// Allowed pre-normalization row-sum deviation; larger values indicate a
/// transcription error in the element formulas.
const ROW_SUM_SLACK: f64 = 1e-2;

/// Row-stochastic square transition matrix (row-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct Stm {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainError {
    /// A transition-matrix entry was negative before renormalization.
    NegativeEntry { row: usize, col: usize, value: f64 },
    /// A row sum strayed too far from 1 before renormalization.
    RowSumDeviation { row: usize, sum: f64 },
    /// Bin counts of the operands disagree.
    DimensionMismatch { left: usize, right: usize },
    /// Power iteration exhausted its cap.
    NoConvergence { loop_name: &'static str, residual: f64 },
}

impl core::fmt::Display for ChainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChainError::NegativeEntry { row, col, value } => {
                write!(f, "negative STM entry {value} at ({row},{col})")
            }
            ChainError::RowSumDeviation { row, sum } => {
                write!(f, "row {row} sums to {sum} before renormalization")
            }
            ChainError::DimensionMismatch { left, right } => {
                write!(f, "bin-count mismatch: {left} vs {right}")
            }
            ChainError::NoConvergence { loop_name, residual } => {
                write!(f, "{loop_name} loop failed to converge (residual {residual})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ChainError {}

impl Stm {
    /// Build from raw row-major entries, rejecting negative entries and
    /// renormalizing each row to sum exactly 1.
    pub fn from_rows(n: usize, mut entries: Vec<f64>) -> Result<Stm, ChainError> {
        debug_assert_eq!(entries.len(), n * n);
        for row in 0..n {
            let mut sum = 0.0;
            for col in 0..n {
                let v = entries[row * n + col];
                if v < 0.0 {
                    return Err(ChainError::NegativeEntry { row, col, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_SLACK {
                return Err(ChainError::RowSumDeviation { row, sum });
            }
            for col in 0..n {
                entries[row * n + col] /= sum;
            }
        }
        Ok(Stm { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    /// One step of the row-vector iteration `p <- p T`.
    pub fn step(&self, p: &[f64], out: &mut [f64]) {
        debug_assert_eq!(p.len(), self.n);
        out.fill(0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            for (o, &t) in out.iter_mut().zip(row) {
                *o += pi * t;
            }
        }
    }

    /// L2 norm of `p T - p`.
    pub fn residual(&self, p: &[f64]) -> f64 {
        let mut next = vec![0.0; self.n];
        self.step(p, &mut next);
        let mut acc = 0.0;
        for (a, b) in next.iter().zip(p) {
            acc += (a - b) * (a - b);
        }
        libm::sqrt(acc)
    }
}

/// Power iteration `p <- p T` until the L2 update error drops below `tol`.
///
/// A negative iterate entry aborts with the last valid iterate (it can only
/// arise from a malformed matrix); exceeding the iteration cap is an error.
pub fn stationary(stm: &Stm, init: &[f64], tol: f64) -> Result<Vec<f64>, ChainError> {
    debug_assert_eq!(init.len(), stm.size());
    let mut p = init.to_vec();
    let mut next = vec![0.0; stm.size()];
    for _ in 0..POWER_ITERATION_CAP {
        stm.step(&p, &mut next);
        if next.iter().any(|&v| v < 0.0) {
            return Ok(p);
        }
        let mut err = 0.0;
        for (a, b) in next.iter().zip(&p) {
            err += (a - b) * (a - b);
        }
        core::mem::swap(&mut p, &mut next);
        if libm::sqrt(err) < tol {
            return Ok(p);
        }
    }
    Err(ChainError::NoConvergence {
        loop_name: "power-iteration",
        residual: stm.residual(&p),
    })
}

/// Stationary occurrence probabilities of the six TC states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcDist {
    pub p_s: f64,
    pub p_sr1: f64,
    pub p_sr2: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl TcDist {
    pub fn uniform() -> Self {
        TcDist {
            p_s: 1.0 / 6.0,
            p_sr1: 1.0 / 6.0,
            p_sr2: 1.0 / 6.0,
            p1: 1.0 / 6.0,
            p2: 1.0 / 6.0,
            p3: 1.0 / 6.0,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.p_s, self.p_sr1, self.p_sr2, self.p1, self.p2, self.p3]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        TcDist {
            p_s: p[0],
            p_sr1: p[1],
            p_sr2: p[2],
            p1: p[3],
            p2: p[4],
            p3: p[5],
        }
    }

    /// Combined probability of the three `{S,R1,R2}` variants.
    pub fn p_full(&self) -> f64 {
        self.p1 + self.p2 + self.p3
    }
}

/// The seven convolution scalars: probabilities that an accumulated SNR plus
/// one more link draw still misses the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSet {
    /// overall1 + S->D below threshold.
    pub c: f64,
    /// overall1 + R1->D below threshold.
    pub d: f64,
    /// overall3 + R2->D below threshold.
    pub f: f64,
    /// overall3 + R1->D below threshold.
    pub g: f64,
    /// overall2 + S->D below threshold.
    pub m: f64,
    /// overall2 + R2->D below threshold.
    pub n: f64,
    /// overall3 + S->D below threshold.
    pub o: f64,
}

/// Which accumulated-SNR chain to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverallVariant {
    /// TCs = {S,R1}.
    Sr1,
    /// TCs = {S,R2}.
    Sr2,
    /// TCs = {S,R1,R2} (all three variants pooled).
    Sr1r2,
}

/// Mixture inputs for the pooled `{S,R1,R2}` chain: the variant weights and
/// the stationary accumulated-SNR distribution of the `{S,R1}` state they
/// are entered from.
pub struct FullSetMix<'a> {
    /// Weights of entry through S->R2, R1->R2 and S->R1,R2 respectively
    /// (the stationary p1, p2, p3; normalized internally).
    pub weights: (f64, f64, f64),
    pub overall1: &'a BinPdf,
}

/// Build the N x N accumulated-SNR chain for one TC group.
///
/// The "stay" mass on the diagonal is the per-slot silence probability given
/// the bin's residual threshold; leaving the bin re-enters with the fresh
/// entry distribution of the group. Rows are renormalized after a
/// pre-normalization deviation check.
pub fn build_overall_chain(
    variant: OverallVariant,
    rates: &DerivedRates,
    n_bins: usize,
    pu1: f64,
    pu2: f64,
    mix: Option<&FullSetMix<'_>>,
) -> Result<Stm, ChainError> {
    debug_assert!(n_bins > 0);
    let th = rates.gamma_th;
    let p_sd = link_bin_pdf(rates.w_sd, n_bins, th);
    let f_sd_th = below_prob(rates.w_sd, th);
    let f_sr2_th = below_prob(rates.w_sr2, th);
    let f_r1r2_th = below_prob(rates.w_r1r2, th);

    // entry distribution into the group, per bin (normalized)
    let entry: Vec<f64> = match variant {
        OverallVariant::Sr1 | OverallVariant::Sr2 => {
            p_sd.bins().iter().map(|&p| p / f_sd_th).collect()
        }
        OverallVariant::Sr1r2 => {
            let mix = mix.expect("the pooled chain needs mixture inputs");
            let (w1, w2, w3) = mix.weights;
            let total = w1 + w2 + w3;
            let (w1, w2, w3) = if total > 0.0 {
                (w1 / total, w2 / total, w3 / total)
            } else {
                (0.0, 0.0, 1.0)
            };
            let o1 = mix.overall1.normalized();
            // entry into variant 1 accumulates the S->D draw, entry into
            // variant 2 the R1->D draw, entry into variant 3 is a fresh S->D
            // draw below the threshold
            let p_r1d = link_bin_pdf(rates.w_r1d, n_bins, th);
            let via_s_r2 = o1.conv_truncated(&p_sd);
            let via_r1_r2 = o1.conv_truncated(&p_r1d);
            let norm = |pdf: &BinPdf| -> Vec<f64> {
                let total = pdf.mass();
                if total > 0.0 {
                    pdf.bins().iter().map(|&p| p / total).collect()
                } else {
                    vec![0.0; n_bins]
                }
            };
            let e1 = norm(&via_s_r2);
            let e2 = norm(&via_r1_r2);
            let e3: Vec<f64> = p_sd.bins().iter().map(|&p| p / f_sd_th).collect();
            (0..n_bins)
                .map(|j| w1 * e1[j] + w2 * e2[j] + w3 * e3[j])
                .collect()
        }
    };

    let mut entries = vec![0.0; n_bins * n_bins];
    for i in 0..n_bins {
        // lower edge of the residual interval for bin i+1 (1-based)
        let residual = (n_bins - (i + 1)) as f64 / n_bins as f64 * th;
        let stay = match variant {
            OverallVariant::Sr1 => {
                below_prob(rates.w_sd, residual)
                    * (pu1 * below_prob(rates.w_r1d, residual) * f_sr2_th * f_r1r2_th
                        + (1.0 - pu1) * f_sr2_th)
            }
            OverallVariant::Sr2 => {
                below_prob(rates.w_sd, residual)
                    * (pu2 * below_prob(rates.w_r2d, residual) + (1.0 - pu2))
            }
            OverallVariant::Sr1r2 => {
                below_prob(rates.w_sd, residual)
                    * (pu2 * below_prob(rates.w_r2d, residual) + (1.0 - pu2))
                    * (pu1 * below_prob(rates.w_r1d, residual) + (1.0 - pu1))
            }
        };
        for j in 0..n_bins {
            let mut v = (1.0 - stay) * entry[j];
            if i == j {
                v += stay;
            }
            entries[i * n_bins + j] = v;
        }
    }
    Stm::from_rows(n_bins, entries)
}

/// The exact per-bin link PDFs the scalar derivation convolves against.
pub struct LinkBinPdfs {
    pub sd: BinPdf,
    pub r1d: BinPdf,
    pub r2d: BinPdf,
}

impl LinkBinPdfs {
    pub fn new(rates: &DerivedRates, n_bins: usize) -> Self {
        LinkBinPdfs {
            sd: link_bin_pdf(rates.w_sd, n_bins, rates.gamma_th),
            r1d: link_bin_pdf(rates.w_r1d, n_bins, rates.gamma_th),
            r2d: link_bin_pdf(rates.w_r2d, n_bins, rates.gamma_th),
        }
    }
}

/// Derive the seven scalars as the total mass of truncated convolutions
/// staying below the threshold.
pub fn derive_scalars(
    overall1: &BinPdf,
    overall2: &BinPdf,
    overall3: &BinPdf,
    links: &LinkBinPdfs,
) -> Result<ScalarSet, ChainError> {
    for pdf in [overall1, overall2, overall3] {
        if pdf.len() != links.sd.len() {
            return Err(ChainError::DimensionMismatch {
                left: pdf.len(),
                right: links.sd.len(),
            });
        }
    }
    let mass = |a: &BinPdf, b: &BinPdf| a.conv_truncated(b).mass();
    Ok(ScalarSet {
        c: mass(overall1, &links.sd),
        d: mass(overall1, &links.r1d),
        m: mass(overall2, &links.sd),
        n: mass(overall2, &links.r2d),
        f: mass(overall3, &links.r2d),
        g: mass(overall3, &links.r1d),
        o: mass(overall3, &links.sd),
    })
}

/// Build the 6x6 transmitter-candidate transition matrix.
///
/// Unlisted transitions are structurally zero; rows sum to 1 by construction
/// and are renormalized to absorb rounding.
pub fn build_tc_stm(
    rates: &DerivedRates,
    scalars: &ScalarSet,
    pu1: f64,
    pu2: f64,
) -> Result<Stm, ChainError> {
    let th = rates.gamma_th;
    let sd_fail = below_prob(rates.w_sd, th);
    let sr1_ok = exceed_prob(rates.w_sr1, th);
    let sr2_ok = exceed_prob(rates.w_sr2, th);
    let r1r2_ok = exceed_prob(rates.w_r1r2, th);
    let s = scalars;

    let mut t = vec![0.0; 36];
    let mut set = |row: usize, col: usize, v: f64| t[row * 6 + col] = v;

    // row S
    let p_s_s = sd_fail * (1.0 - sr2_ok) * (1.0 - sr1_ok) + (1.0 - sd_fail);
    let p_s_sr1 = sd_fail * (1.0 - sr2_ok) * sr1_ok;
    let p_s_sr2 = sd_fail * (1.0 - sr1_ok) * sr2_ok;
    let p_s_v3 = sd_fail * sr1_ok * sr2_ok;
    set(0, 0, p_s_s);
    set(0, 1, p_s_sr1);
    set(0, 2, p_s_sr2);
    set(0, 5, p_s_v3);

    // row SR1
    let p_sr1_s = (1.0 - s.c) + s.c * pu1 * (1.0 - s.d);
    let p_sr1_v1 = s.c * sr2_ok * (pu1 * s.d + (1.0 - pu1));
    let p_sr1_v2 = s.c * pu1 * s.d * (1.0 - sr2_ok) * r1r2_ok;
    set(1, 0, p_sr1_s);
    set(1, 3, p_sr1_v1);
    set(1, 4, p_sr1_v2);
    set(1, 1, 1.0 - p_sr1_s - p_sr1_v1 - p_sr1_v2);

    // row SR2
    let p_sr2_s = (1.0 - s.m) + pu2 * s.m * (1.0 - s.n);
    set(2, 0, p_sr2_s);
    set(2, 2, 1.0 - p_sr2_s);

    // rows (S,R1,R2)_1..3: identical delivery structure
    let p_full_s = (1.0 - s.o)
        + s.o * (pu2 * (1.0 - s.f) + (pu2 * s.f + (1.0 - pu2)) * pu1 * (1.0 - s.g));
    for row in 3..6 {
        set(row, 0, p_full_s);
        set(row, row, 1.0 - p_full_s);
    }

    Stm::from_rows(6, t)
}

/// Per-slot relay spend probabilities conditional on a charged buffer.
fn spend_factors(
    rates: &DerivedRates,
    tc: &TcDist,
    s: &ScalarSet,
    pu2: f64,
) -> (f64, f64) {
    let th = rates.gamma_th;
    let sr2_fail = below_prob(rates.w_sr2, th);
    let r1r2_ok = exceed_prob(rates.w_r1r2, th);
    // R1 spends on R1->D delivery or an R1->R2 handover from {S,R1}, and on
    // a saving delivery from the full set when R2 could not serve.
    let b1 = tc.p_sr1 * s.c * ((1.0 - s.d) + s.d * sr2_fail * r1r2_ok)
        + tc.p_full() * s.o * (pu2 * s.f + (1.0 - pu2)) * (1.0 - s.g);
    // R2 spends on R2->D delivery from {S,R2} or the full set.
    let b2 = tc.p_sr2 * s.m * (1.0 - s.n) + tc.p_full() * s.o * (1.0 - s.f);
    (b1, b2)
}

/// Everything the nested fixed point converges to.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub tc: TcDist,
    pub overall1: BinPdf,
    pub overall2: BinPdf,
    pub overall3: BinPdf,
    pub scalars: ScalarSet,
    pub pu1: f64,
    pub pu2: f64,
    pub b1: f64,
    pub b2: f64,
    /// Outer charge-probability passes used.
    pub iterations: usize,
}

impl FixedPointResult {
    /// Diagnostic string for non-convergence reports.
    pub fn describe(&self) -> String {
        format!(
            "pu1={} pu2={} b1={} b2={} after {} passes",
            self.pu1, self.pu2, self.b1, self.b2, self.iterations
        )
    }
}

fn charge_prob(b: f64, lambda: f64, m: f64) -> f64 {
    let psi = b * lambda * m;
    if psi <= 1.0 {
        1.0
    } else {
        1.0 / psi
    }
}

/// Run the nested fixed point:
///
/// * inner power iterations for the three accumulated-SNR chains,
/// * scalar derivation and the 6x6 TC chain stationary solve,
/// * an outermost damped update of the charge probabilities
///   `pu <- min(1, 1/(b lambda m))`, initialized at 1/2, until the update
///   drops below the power-iteration tolerance.
///
/// Deterministic: identical inputs give bit-identical outputs.
pub fn solve_fixed_point(
    rates: &DerivedRates,
    energy: &EnergyParams,
    n_bins: usize,
) -> Result<FixedPointResult, ChainError> {
    let links = LinkBinPdfs::new(rates, n_bins);
    let lambda1 = energy.lambda1();
    let lambda2 = energy.lambda2();

    let mut pu1 = 0.5;
    let mut pu2 = 0.5;
    let mut last: Option<FixedPointResult> = None;

    for pass in 1..=OUTER_PASS_CAP {
        let t1 = build_overall_chain(OverallVariant::Sr1, rates, n_bins, pu1, pu2, None)?;
        let t2 = build_overall_chain(OverallVariant::Sr2, rates, n_bins, pu1, pu2, None)?;
        let uniform_bins = vec![1.0 / n_bins as f64; n_bins];
        let o1 = stationary(&t1, &uniform_bins, POWER_ITERATION_TOL)?;
        let o2 = stationary(&t2, &uniform_bins, POWER_ITERATION_TOL)?;
        let overall1 = BinPdf::new(o1, rates.gamma_th / n_bins as f64);
        let overall2 = BinPdf::new(o2, rates.gamma_th / n_bins as f64);

        // TC distribution and the pooled chain depend on each other through
        // the variant weights; iterate them jointly to a fixed point.
        let mut tc = last.as_ref().map(|r| r.tc).unwrap_or_else(TcDist::uniform);
        let mut overall3;
        let mut scalars;
        loop {
            let mix = FullSetMix {
                weights: (tc.p1, tc.p2, tc.p3),
                overall1: &overall1,
            };
            let t3 =
                build_overall_chain(OverallVariant::Sr1r2, rates, n_bins, pu1, pu2, Some(&mix))?;
            let o3 = stationary(&t3, &uniform_bins, POWER_ITERATION_TOL)?;
            overall3 = BinPdf::new(o3, rates.gamma_th / n_bins as f64);
            scalars = derive_scalars(&overall1, &overall2, &overall3, &links)?;
            let t = build_tc_stm(rates, &scalars, pu1, pu2)?;
            let next = stationary(&t, &tc.as_array(), POWER_ITERATION_TOL)?;
            let next = TcDist::from_slice(&next);
            let delta = (next.as_array().iter())
                .zip(tc.as_array())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            tc = next;
            if libm::sqrt(delta) < POWER_ITERATION_TOL {
                break;
            }
        }

        let (b1, b2) = spend_factors(rates, &tc, &scalars, pu2);
        let pu1_target = if b1 > 0.0 { charge_prob(b1, lambda1, energy.m_r1) } else { 1.0 };
        let pu2_target = if b2 > 0.0 { charge_prob(b2, lambda2, energy.m_r2) } else { 1.0 };
        let next_pu1 = pu1 + OUTER_DAMPING * (pu1_target - pu1);
        let next_pu2 = pu2 + OUTER_DAMPING * (pu2_target - pu2);
        let delta = libm::fabs(next_pu1 - pu1) + libm::fabs(next_pu2 - pu2);
        pu1 = next_pu1;
        pu2 = next_pu2;

        let result = FixedPointResult {
            tc,
            overall1,
            overall2,
            overall3,
            scalars,
            pu1,
            pu2,
            b1,
            b2,
            iterations: pass,
        };
        if delta < POWER_ITERATION_TOL {
            return Ok(result);
        }
        last = Some(result);
    }

    Err(ChainError::NoConvergence {
        loop_name: "charge-probability",
        residual: last.map(|r| libm::fabs(r.pu1 - pu1)).unwrap_or(f64::NAN),
    })
}

/// Analytic outage probability for a converged fixed point.
pub fn outage_from_fixed_point(rates: &DerivedRates, fp: &FixedPointResult) -> f64 {
    closed_form::outage_probability(&fp.tc, &fp.scalars, fp.pu1, fp.pu2, rates)
}
