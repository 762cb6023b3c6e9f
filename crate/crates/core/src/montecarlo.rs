//! Seeded slot-level simulator.
//!
//! Executes the routing protocol and buffer dynamics literally, one slot at a
//! time, and tallies the empirical counterparts of every analytic quantity:
//! TC occupancy, outage probability, accumulated-SNR histograms per TC group,
//! buffer-level histograms and the delivery-gap moments.
//!
//! Determinism: a run is a pure function of the scenario and [`SimConfig`].
//! Eight uniforms are drawn every slot in a fixed order (S->D, S->R1, S->R2,
//! R1->R2, R1->D, R2->D, harvest 1, harvest 2) whether or not the slot uses
//! them, so the random stream never depends on the protocol path taken.

use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{sample_harvest, RelayBuffer};
use crate::fading::{sample_link_snr, BinPdf};
use crate::protocol::{decide_slot, SlotDraws, TcState, Transmitter};
use crate::scenario::{DerivedRates, EnergyParams};

/// Buffer histogram resolution: bins per transmission cost `M`.
pub const BUFFER_BINS_PER_M: usize = 50;
/// Buffer histogram span in units of `M`; levels past it land in `overflow`.
pub const BUFFER_SPAN_M: usize = 5;

/// splitmix64 step; used only to expand the seed.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256++ generator, seeded by expanding a single `u64` with splitmix64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
}

impl Xoshiro256PlusPlus {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Xoshiro256PlusPlus { s }
    }

    /// Raw state constructor (reference test vectors use it).
    pub fn from_state(s: [u64; 4]) -> Self {
        debug_assert!(s.iter().any(|&w| w != 0));
        Xoshiro256PlusPlus { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in the half-open interval `(0, 1]`: the top 53 bits plus
    /// one, scaled by 2^-53. Never 0, so `-ln(u)` is always finite.
    pub fn uniform_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Whether the destination combines broadcasts across slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Maximal-ratio combining: accumulated SNR carries across slots.
    Mrc,
    /// Baseline: every delivery attempt needs the full threshold in one slot.
    NonMrc,
}

/// Simulation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Measured slots (after warmup).
    pub slots: u64,
    /// Discarded initial slots.
    pub warmup: u64,
    pub seed: u64,
    pub mode: SimMode,
    /// Bin count of the accumulated-SNR histograms over `[0, gamma_th)`.
    pub snr_bins: usize,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        SimConfig {
            slots: 1_000_000,
            warmup: 10_000,
            seed,
            mode: SimMode::Mrc,
            snr_bins: 100,
        }
    }
}

/// Everything tallied over the measured slots (plus whole-run energy totals).
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub slots: u64,
    /// Slots spent in each TC state at slot start, indexed by [`TcState::index`].
    pub occupancy: [u64; 6],
    /// Slots that ended without a delivery.
    pub outage_slots: u64,
    pub deliveries: u64,
    /// Slots in which each node transmitted (S, R1, R2, silent).
    pub transmissions: [u64; 4],
    /// Accumulated-SNR histogram at slot start while in `{S,R1}`.
    pub overall1_hist: Vec<u64>,
    /// Same while in `{S,R2}`.
    pub overall2_hist: Vec<u64>,
    /// Same while in any `{S,R1,R2}` variant.
    pub overall3_hist: Vec<u64>,
    /// R1 buffer level at slot start, bin width `m_r1 / 50` over `[0, 5 m_r1)`.
    pub buffer1_hist: Vec<u64>,
    pub buffer1_overflow: u64,
    /// R2 buffer level at slot start, bin width `m_r2 / 50` over `[0, 5 m_r2)`.
    pub buffer2_hist: Vec<u64>,
    pub buffer2_overflow: u64,
    /// Slots at whose start the buffer held at least one transmission cost.
    pub charged_slots_r1: u64,
    pub charged_slots_r2: u64,
    /// Transmissions paid by each relay during measurement.
    pub spends_r1: u64,
    pub spends_r2: u64,
    /// Sum and sum of squares of the slot gaps between deliveries.
    pub gap_sum: f64,
    pub gap_sq_sum: f64,
    pub gap_count: u64,
    /// Whole-run (warmup included) energy totals, mJ; buffers start empty so
    /// `final = harvested - spent` exactly.
    pub harvested_r1: f64,
    pub harvested_r2: f64,
    pub spent_r1: f64,
    pub spent_r2: f64,
    pub final_buffer_r1: f64,
    pub final_buffer_r2: f64,
}

impl SimStats {
    fn new(snr_bins: usize) -> Self {
        let buffer_bins = BUFFER_BINS_PER_M * BUFFER_SPAN_M;
        SimStats {
            slots: 0,
            occupancy: [0; 6],
            outage_slots: 0,
            deliveries: 0,
            transmissions: [0; 4],
            overall1_hist: vec![0; snr_bins],
            overall2_hist: vec![0; snr_bins],
            overall3_hist: vec![0; snr_bins],
            buffer1_hist: vec![0; buffer_bins],
            buffer1_overflow: 0,
            buffer2_hist: vec![0; buffer_bins],
            buffer2_overflow: 0,
            charged_slots_r1: 0,
            charged_slots_r2: 0,
            spends_r1: 0,
            spends_r2: 0,
            gap_sum: 0.0,
            gap_sq_sum: 0.0,
            gap_count: 0,
            harvested_r1: 0.0,
            harvested_r2: 0.0,
            spent_r1: 0.0,
            spent_r2: 0.0,
            final_buffer_r1: 0.0,
            final_buffer_r2: 0.0,
        }
    }

    /// Empirical TC occurrence distribution.
    pub fn occupancy_dist(&self) -> [f64; 6] {
        let total = self.slots as f64;
        self.occupancy.map(|c| c as f64 / total)
    }

    /// Fraction of measured slots that ended without a delivery.
    pub fn outage_probability(&self) -> f64 {
        self.outage_slots as f64 / self.slots as f64
    }

    /// Deliveries per slot times the spectral efficiency.
    pub fn throughput(&self, r0: f64) -> f64 {
        (1.0 - self.outage_probability()) * r0
    }

    /// Mean slots per delivered packet.
    pub fn timeslot_cost(&self) -> f64 {
        self.slots as f64 / self.deliveries as f64
    }

    pub fn gap_mean(&self) -> f64 {
        self.gap_sum / self.gap_count as f64
    }

    pub fn gap_variance(&self) -> f64 {
        let mean = self.gap_mean();
        self.gap_sq_sum / self.gap_count as f64 - mean * mean
    }

    /// Empirical charge probability: fraction of slots the buffer could pay
    /// for a transmission.
    pub fn charge_prob_r1(&self) -> f64 {
        self.charged_slots_r1 as f64 / self.slots as f64
    }

    pub fn charge_prob_r2(&self) -> f64 {
        self.charged_slots_r2 as f64 / self.slots as f64
    }

    /// Empirical accumulated-SNR distribution of one TC group (1 = `{S,R1}`,
    /// 2 = `{S,R2}`, 3 = pooled `{S,R1,R2}`), normalized over its own slots.
    pub fn overall_pdf(&self, group: usize, gamma_th: f64) -> BinPdf {
        let hist = match group {
            1 => &self.overall1_hist,
            2 => &self.overall2_hist,
            3 => &self.overall3_hist,
            _ => panic!("group must be 1, 2 or 3"),
        };
        normalized_hist(hist, gamma_th / hist.len() as f64)
    }

    /// Empirical buffer-level distribution (overflow mass excluded from the
    /// bins but included in the normalization).
    pub fn buffer_pdf(&self, relay: usize, m: f64) -> (BinPdf, f64) {
        let (hist, overflow) = match relay {
            1 => (&self.buffer1_hist, self.buffer1_overflow),
            2 => (&self.buffer2_hist, self.buffer2_overflow),
            _ => panic!("relay must be 1 or 2"),
        };
        let total = (hist.iter().sum::<u64>() + overflow) as f64;
        let width = m / BUFFER_BINS_PER_M as f64;
        let bins = hist.iter().map(|&c| c as f64 / total).collect();
        (BinPdf::new(bins, width), overflow as f64 / total)
    }
}

fn normalized_hist(hist: &[u64], width: f64) -> BinPdf {
    let total: u64 = hist.iter().sum();
    let bins = if total == 0 {
        vec![0.0; hist.len()]
    } else {
        hist.iter().map(|&c| c as f64 / total as f64).collect()
    };
    BinPdf::new(bins, width)
}

/// Total variation distance `1/2 sum |p_i - q_i|` between two mass vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>()
}

fn bin_index(value: f64, width: f64, n: usize) -> Option<usize> {
    let idx = (value / width) as usize;
    if value >= 0.0 && idx < n {
        Some(idx)
    } else {
        None
    }
}

/// Run the simulator.
///
/// The network starts in state `S` with empty buffers and zero accumulated
/// SNR, burns `warmup` slots, then measures `slots` slots.
pub fn run_simulation(rates: &DerivedRates, energy: &EnergyParams, cfg: &SimConfig) -> SimStats {
    let mut rng = Xoshiro256PlusPlus::from_seed(cfg.seed);
    let mut stats = SimStats::new(cfg.snr_bins);
    let lambda1 = energy.lambda1();
    let lambda2 = energy.lambda2();
    let snr_width = rates.gamma_th / cfg.snr_bins as f64;
    let b1_width = energy.m_r1 / BUFFER_BINS_PER_M as f64;
    let b2_width = energy.m_r2 / BUFFER_BINS_PER_M as f64;
    let buffer_bins = BUFFER_BINS_PER_M * BUFFER_SPAN_M;

    let mut state = TcState::S;
    let mut gamma_overall = 0.0f64;
    let mut buf1 = RelayBuffer::empty();
    let mut buf2 = RelayBuffer::empty();
    let mut slots_since_delivery: u64 = 0;

    for slot in 0..cfg.warmup + cfg.slots {
        let measured = slot >= cfg.warmup;

        if measured {
            stats.slots += 1;
            stats.occupancy[state.index()] += 1;
            let snr_bin = bin_index(gamma_overall, snr_width, cfg.snr_bins);
            match state {
                TcState::Sr1 => {
                    if let Some(i) = snr_bin {
                        stats.overall1_hist[i] += 1;
                    }
                }
                TcState::Sr2 => {
                    if let Some(i) = snr_bin {
                        stats.overall2_hist[i] += 1;
                    }
                }
                s if s.is_full_set() => {
                    if let Some(i) = snr_bin {
                        stats.overall3_hist[i] += 1;
                    }
                }
                _ => {}
            }
            match bin_index(buf1.level(), b1_width, buffer_bins) {
                Some(i) => stats.buffer1_hist[i] += 1,
                None => stats.buffer1_overflow += 1,
            }
            match bin_index(buf2.level(), b2_width, buffer_bins) {
                Some(i) => stats.buffer2_hist[i] += 1,
                None => stats.buffer2_overflow += 1,
            }
            if buf1.level() >= energy.m_r1 {
                stats.charged_slots_r1 += 1;
            }
            if buf2.level() >= energy.m_r2 {
                stats.charged_slots_r2 += 1;
            }
        }

        // fixed draw order, all eight every slot
        let draws = SlotDraws {
            gamma_sd: sample_link_snr(rates.w_sd, rng.uniform_open01()),
            gamma_sr1: sample_link_snr(rates.w_sr1, rng.uniform_open01()),
            gamma_sr2: sample_link_snr(rates.w_sr2, rng.uniform_open01()),
            gamma_r1r2: sample_link_snr(rates.w_r1r2, rng.uniform_open01()),
            gamma_r1d: sample_link_snr(rates.w_r1d, rng.uniform_open01()),
            gamma_r2d: sample_link_snr(rates.w_r2d, rng.uniform_open01()),
        };
        let harvest1 = sample_harvest(lambda1, rng.uniform_open01());
        let harvest2 = sample_harvest(lambda2, rng.uniform_open01());

        let out = decide_slot(
            state,
            gamma_overall,
            &draws,
            buf1.level(),
            buf2.level(),
            rates,
            energy,
        );

        buf1 = buf1
            .commit_slot(out.spend_r1, harvest1)
            .expect("protocol never spends below balance");
        buf2 = buf2
            .commit_slot(out.spend_r2, harvest2)
            .expect("protocol never spends below balance");
        stats.harvested_r1 += harvest1;
        stats.harvested_r2 += harvest2;
        stats.spent_r1 += out.spend_r1;
        stats.spent_r2 += out.spend_r2;

        state = out.next;
        gamma_overall = match cfg.mode {
            SimMode::Mrc => out.next_gamma_overall,
            // baseline destination discards partial SNR
            SimMode::NonMrc => 0.0,
        };

        if measured {
            let tx_idx = match out.transmitter {
                Transmitter::Source => 0,
                Transmitter::Relay1 => 1,
                Transmitter::Relay2 => 2,
                Transmitter::Silent => 3,
            };
            stats.transmissions[tx_idx] += 1;
            if out.spend_r1 > 0.0 {
                stats.spends_r1 += 1;
            }
            if out.spend_r2 > 0.0 {
                stats.spends_r2 += 1;
            }
            slots_since_delivery += 1;
            if out.delivered {
                stats.deliveries += 1;
                stats.gap_sum += slots_since_delivery as f64;
                stats.gap_sq_sum += (slots_since_delivery as f64) * (slots_since_delivery as f64);
                stats.gap_count += 1;
                slots_since_delivery = 0;
            } else {
                stats.outage_slots += 1;
            }
        } else if out.delivered {
            slots_since_delivery = 0;
        } else {
            slots_since_delivery = 0; // gaps only counted within measurement
        }
    }

    stats.final_buffer_r1 = buf1.level();
    stats.final_buffer_r2 = buf2.level();
    stats
}
