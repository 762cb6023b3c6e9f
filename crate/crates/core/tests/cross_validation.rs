//! Analytic quantities vs their sampled counterparts.

use ehor_core::chain::{derive_scalars, solve_fixed_point, LinkBinPdfs};
use ehor_core::fading::{exceed_prob, link_bin_pdf, sample_link_snr, BinPdf};
use ehor_core::montecarlo::{
    run_simulation, total_variation, SimConfig, SimMode, Xoshiro256PlusPlus,
};
use ehor_core::scenario::{DerivedRates, EnergyParams};

fn rates() -> DerivedRates {
    DerivedRates {
        w_sd: 0.6309573444801934,
        w_sr1: 0.029581959585538745,
        w_sr2: 0.1802913442634389,
        w_r1r2: 0.0718021898897085,
        w_r1d: 0.3219905520229016,
        w_r2d: 0.08944271909999159,
        gamma_th: 3.0,
    }
}

fn energy() -> EnergyParams {
    EnergyParams {
        m_r1: 12.0,
        m_r2: 10.0,
        lambda1_db: -11.0,
        lambda2_db: -12.0,
    }
}

/// Inverse-CDF sampling reproduces the binned exponential law.
#[test]
fn sampled_snr_matches_link_bin_pdf() {
    let mut rng = Xoshiro256PlusPlus::from_seed(2024);
    let rate = 0.63;
    let gamma_th = 3.0;
    let n = 50;
    let width = gamma_th / n as f64;
    let mut hist = vec![0u64; n];
    let mut below = 0u64;
    let draws = 1_000_000;
    for _ in 0..draws {
        let x = sample_link_snr(rate, rng.uniform_open01());
        if x < gamma_th {
            below += 1;
            hist[(x / width) as usize] += 1;
        }
    }
    let analytic = link_bin_pdf(rate, n, gamma_th);
    let expect_below = 1.0 - exceed_prob(rate, gamma_th);
    assert!((below as f64 / draws as f64 - expect_below).abs() < 0.01);
    let emp: Vec<f64> = hist.iter().map(|&c| c as f64 / below as f64).collect();
    let tv = total_variation(&emp, analytic.normalized().bins());
    assert!(tv <= 0.01, "tv = {tv}");
}

/// The convolution scalar equals the sampled frequency of "accumulated SNR
/// plus one more draw still misses the threshold".
#[test]
fn scalar_c_matches_sampled_frequency() {
    let r = rates();
    let n = 100;
    let links = LinkBinPdfs::new(&r, n);
    // accumulated-SNR law: one S->D draw conditioned below the threshold
    let overall = link_bin_pdf(r.w_sd, n, r.gamma_th).normalized();
    let s = derive_scalars(&overall, &overall, &overall, &links).unwrap();

    let mut rng = Xoshiro256PlusPlus::from_seed(99);
    let mut hits = 0u64;
    let mut events = 0u64;
    while events < 1_000_000 {
        let first = sample_link_snr(r.w_sd, rng.uniform_open01());
        let second = sample_link_snr(r.w_sd, rng.uniform_open01());
        if first >= r.gamma_th {
            continue; // condition on the accumulated part staying below
        }
        events += 1;
        if first + second < r.gamma_th {
            hits += 1;
        }
    }
    let freq = hits as f64 / events as f64;
    assert!((freq - s.c).abs() <= 0.01, "freq {freq} vs scalar {}", s.c);
}

/// Analytic TC occupancy, outage, and charge probabilities against a long
/// simulated run of the benchmark configuration.
#[test]
fn fixed_point_matches_simulation() {
    let r = rates();
    let e = energy();
    let fp = solve_fixed_point(&r, &e, 100).unwrap();
    let cfg = SimConfig {
        slots: 1_000_000,
        warmup: 10_000,
        seed: 7,
        mode: SimMode::Mrc,
        snr_bins: 100,
    };
    let stats = run_simulation(&r, &e, &cfg);

    let occ = stats.occupancy_dist();
    let analytic = fp.tc.as_array();
    let tv = total_variation(&occ, &analytic);
    assert!(tv <= 0.05, "TC occupancy tv = {tv}");

    let op = ehor_core::closed_form::outage_probability(&fp.tc, &fp.scalars, fp.pu1, fp.pu2, &r);
    let rel = (stats.outage_probability() - op).abs() / op;
    assert!(rel <= 0.05, "outage rel err = {rel}");

    // accumulated-SNR group histograms vs stationary chain vectors
    for (group, pdf) in [(1, &fp.overall1), (2, &fp.overall2), (3, &fp.overall3)] {
        let emp = stats.overall_pdf(group, r.gamma_th);
        let tv = total_variation(emp.bins(), pdf.normalized().bins());
        assert!(tv <= 0.05, "group {group} tv = {tv}");
    }
}

/// Truncated convolution total mass equals direct double-sum probability.
#[test]
fn conv_mass_equals_double_sum() {
    let a = link_bin_pdf(0.4, 30, 3.0);
    let b = link_bin_pdf(1.1, 30, 3.0);
    let conv = a.conv_truncated(&b);
    let mut direct = 0.0;
    for (i, &pa) in a.bins().iter().enumerate() {
        for (j, &pb) in b.bins().iter().enumerate() {
            if i + j < 30 {
                direct += pa * pb;
            }
        }
    }
    assert!((conv.mass() - direct).abs() < 1e-12);
    // and normalization is idempotent on the result
    let norm = BinPdf::normalized(&conv);
    assert!((norm.mass() - 1.0).abs() < 1e-12);
}
