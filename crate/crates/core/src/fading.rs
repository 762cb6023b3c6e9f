//! Exponential link-SNR model: sampling, tail probabilities and binned PDFs
//! over `[0, gamma_th)`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

/// Probability mass over equal-width SNR bins on `[0, gamma_th)`.
///
/// Bin `j` (1-based) covers the half-open interval `[(j-1)w, jw)` with
/// `w = gamma_th / n_bins`. Mass at or above `gamma_th` is "success" mass
/// handled by callers and never stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPdf {
    bins: Vec<f64>,
    bin_width: f64,
}

impl BinPdf {
    /// Wrap raw per-bin masses. Entries must be nonnegative.
    pub fn new(bins: Vec<f64>, bin_width: f64) -> Self {
        debug_assert!(bins.iter().all(|&p| p >= 0.0));
        debug_assert!(bin_width > 0.0);
        BinPdf { bins, bin_width }
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Total mass below `gamma_th`.
    pub fn mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Scale so the total mass is exactly 1. No-op on zero mass.
    pub fn normalized(&self) -> BinPdf {
        let total = self.mass();
        if total <= 0.0 {
            return self.clone();
        }
        BinPdf {
            bins: self.bins.iter().map(|p| p / total).collect(),
            bin_width: self.bin_width,
        }
    }

    /// Discrete convolution truncated to the first `n` bins.
    ///
    /// With 1-based bins, the sum of a value in bin `i` and a value in bin `j`
    /// lands in bin `i + j - 1`; anything rolling past bin `n` stays below
    /// `gamma_th` with probability ~0 and is dropped (it is success mass).
    pub fn conv_truncated(&self, other: &BinPdf) -> BinPdf {
        debug_assert_eq!(self.len(), other.len());
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, &a) in self.bins.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.bins.iter().enumerate().take(n - i) {
                out[i + j] += a * b;
            }
        }
        BinPdf::new(out, self.bin_width)
    }
}

/// Inverse-CDF exponential sample: `-ln(draw) / rate`.
pub fn sample_link_snr(rate: f64, draw: f64) -> f64 {
    debug_assert!(rate > 0.0);
    debug_assert!(draw > 0.0 && draw <= 1.0);
    -log(draw) / rate
}

/// Tail probability `Pr{X >= x} = e^(-rate * x)` of an exponential variable.
pub fn exceed_prob(rate: f64, x: f64) -> f64 {
    debug_assert!(rate > 0.0 && x >= 0.0);
    exp(-rate * x)
}

/// CDF `Pr{X < x} = 1 - e^(-rate * x)`.
pub fn below_prob(rate: f64, x: f64) -> f64 {
    1.0 - exceed_prob(rate, x)
}

/// Exact per-bin masses of an exponential SNR over `[0, gamma_th)`:
/// bin `j` holds `e^(-rate (j-1) w) - e^(-rate j w)` with `w = gamma_th / n`.
pub fn link_bin_pdf(rate: f64, n_bins: usize, gamma_th: f64) -> BinPdf {
    debug_assert!(rate > 0.0 && n_bins > 0 && gamma_th > 0.0);
    let width = gamma_th / n_bins as f64;
    let bins = (0..n_bins)
        .map(|j| {
            let lo = j as f64 * width;
            let hi = (j + 1) as f64 * width;
            exp(-rate * lo) - exp(-rate * hi)
        })
        .collect();
    BinPdf::new(bins, width)
}
