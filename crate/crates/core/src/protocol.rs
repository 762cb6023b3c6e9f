//! Executable encoding of the opportunistic-routing slot decision.
//!
//! Given the transmitter-candidate (TC) state, this slot's channel draws, the
//! accumulated destination SNR and the relay buffer levels, [`decide_slot`]
//! picks the transmitter, the effective transmission, the energy spend and
//! the next TC state.
//!
//! Node priority when several could serve the destination is S, then R2,
//! then R1; a relay can transmit only if its primary buffer holds at least
//! its per-transmission cost. The destination combines every broadcast it
//! overhears into `gamma_overall` (MRC), so delivery needs only the residual
//! `gamma_th - gamma_overall` from a single slot.

use crate::scenario::{DerivedRates, EnergyParams};

/// The six transmitter-candidate states.
///
/// `Sr1r2V1` is reached by S handing the packet to R2 while R1 already holds
/// it (destination additionally accumulated that slot's S->D SNR); `Sr1r2V2`
/// by R1 handing it to R2 (destination accumulated R1->D); `Sr1r2V3` by S
/// reaching both relays in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TcState {
    S,
    Sr1,
    Sr2,
    Sr1r2V1,
    Sr1r2V2,
    Sr1r2V3,
}

impl TcState {
    pub const ALL: [TcState; 6] = [
        TcState::S,
        TcState::Sr1,
        TcState::Sr2,
        TcState::Sr1r2V1,
        TcState::Sr1r2V2,
        TcState::Sr1r2V3,
    ];

    /// Position in [`TcState::ALL`]; also the row/column index in the 6x6 STM.
    pub fn index(self) -> usize {
        match self {
            TcState::S => 0,
            TcState::Sr1 => 1,
            TcState::Sr2 => 2,
            TcState::Sr1r2V1 => 3,
            TcState::Sr1r2V2 => 4,
            TcState::Sr1r2V3 => 5,
        }
    }

    /// True for the three `{S,R1,R2}` variants.
    pub fn is_full_set(self) -> bool {
        matches!(self, TcState::Sr1r2V1 | TcState::Sr1r2V2 | TcState::Sr1r2V3)
    }
}

/// Which node broadcasts this slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmitter {
    Source,
    Relay1,
    Relay2,
    Silent,
}

/// This slot's six link SNR realizations (linear).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDraws {
    pub gamma_sd: f64,
    pub gamma_sr1: f64,
    pub gamma_sr2: f64,
    pub gamma_r1r2: f64,
    pub gamma_r1d: f64,
    pub gamma_r2d: f64,
}

/// Result of one slot decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub transmitter: Transmitter,
    /// True when the destination's combined SNR reached the threshold.
    pub delivered: bool,
    /// Energy drawn from R1's buffer this slot (0 or `m_r1`).
    pub spend_r1: f64,
    /// Energy drawn from R2's buffer this slot (0 or `m_r2`).
    pub spend_r2: f64,
    pub next: TcState,
    /// Accumulated destination SNR carried into the next slot (0 on delivery).
    pub next_gamma_overall: f64,
    /// Combined SNR at the destination for a delivered packet.
    pub delivered_snr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolError {
    /// `gamma_overall >= gamma_th`: such a state must already have been
    /// declared delivered.
    AlreadyDeliverable,
}

impl core::fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProtocolError::AlreadyDeliverable => {
                write!(f, "gamma_overall already at or above the threshold")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProtocolError {}

/// Residual SNR a transmission must contribute for delivery:
/// `gamma_th - gamma_overall`.
pub fn residual_threshold(gamma_th: f64, gamma_overall: f64) -> Result<f64, ProtocolError> {
    if gamma_overall >= gamma_th {
        return Err(ProtocolError::AlreadyDeliverable);
    }
    Ok(gamma_th - gamma_overall)
}

fn delivered(tx: Transmitter, snr: f64, spend_r1: f64, spend_r2: f64) -> SlotOutcome {
    SlotOutcome {
        transmitter: tx,
        delivered: true,
        spend_r1,
        spend_r2,
        next: TcState::S,
        next_gamma_overall: 0.0,
        delivered_snr: Some(snr),
    }
}

fn silent(state: TcState, gamma_overall: f64) -> SlotOutcome {
    SlotOutcome {
        transmitter: Transmitter::Silent,
        delivered: false,
        spend_r1: 0.0,
        spend_r2: 0.0,
        next: state,
        next_gamma_overall: gamma_overall,
        delivered_snr: None,
    }
}

/// Decide one slot of the OR protocol.
///
/// Preconditions: `gamma_overall == 0` when `state == S`, and
/// `gamma_overall < gamma_th` otherwise. Total over that domain: exactly one
/// protocol row fires for every input.
pub fn decide_slot(
    state: TcState,
    gamma_overall: f64,
    draws: &SlotDraws,
    b1: f64,
    b2: f64,
    rates: &DerivedRates,
    energy: &EnergyParams,
) -> SlotOutcome {
    let gamma_th = rates.gamma_th;
    debug_assert!(state != TcState::S || gamma_overall == 0.0);
    let residual = residual_threshold(gamma_th, gamma_overall)
        .expect("decide_slot precondition: gamma_overall < gamma_th");
    let r1_ready = b1 >= energy.m_r1;
    let r2_ready = b2 >= energy.m_r2;

    match state {
        TcState::S => {
            if draws.gamma_sd >= gamma_th {
                delivered(Transmitter::Source, draws.gamma_sd, 0.0, 0.0)
            } else if draws.gamma_sr1 >= gamma_th && draws.gamma_sr2 >= gamma_th {
                SlotOutcome {
                    transmitter: Transmitter::Source,
                    delivered: false,
                    spend_r1: 0.0,
                    spend_r2: 0.0,
                    next: TcState::Sr1r2V3,
                    next_gamma_overall: draws.gamma_sd,
                    delivered_snr: None,
                }
            } else if draws.gamma_sr2 >= gamma_th {
                SlotOutcome {
                    transmitter: Transmitter::Source,
                    delivered: false,
                    spend_r1: 0.0,
                    spend_r2: 0.0,
                    next: TcState::Sr2,
                    next_gamma_overall: draws.gamma_sd,
                    delivered_snr: None,
                }
            } else if draws.gamma_sr1 >= gamma_th {
                SlotOutcome {
                    transmitter: Transmitter::Source,
                    delivered: false,
                    spend_r1: 0.0,
                    spend_r2: 0.0,
                    next: TcState::Sr1,
                    next_gamma_overall: draws.gamma_sd,
                    delivered_snr: None,
                }
            } else {
                silent(state, 0.0)
            }
        }
        TcState::Sr1 => {
            if draws.gamma_sd >= residual {
                delivered(Transmitter::Source, gamma_overall + draws.gamma_sd, 0.0, 0.0)
            } else if r1_ready && draws.gamma_r1d >= residual {
                delivered(
                    Transmitter::Relay1,
                    gamma_overall + draws.gamma_r1d,
                    energy.m_r1,
                    0.0,
                )
            } else if draws.gamma_sr2 >= gamma_th {
                // S hands the packet to R2 (whether or not R1 could have
                // transmitted); D overhears the S broadcast.
                SlotOutcome {
                    transmitter: Transmitter::Source,
                    delivered: false,
                    spend_r1: 0.0,
                    spend_r2: 0.0,
                    next: TcState::Sr1r2V1,
                    next_gamma_overall: gamma_overall + draws.gamma_sd,
                    delivered_snr: None,
                }
            } else if r1_ready && draws.gamma_r1r2 >= gamma_th {
                SlotOutcome {
                    transmitter: Transmitter::Relay1,
                    delivered: false,
                    spend_r1: energy.m_r1,
                    spend_r2: 0.0,
                    next: TcState::Sr1r2V2,
                    next_gamma_overall: gamma_overall + draws.gamma_r1d,
                    delivered_snr: None,
                }
            } else {
                silent(state, gamma_overall)
            }
        }
        TcState::Sr2 => {
            if draws.gamma_sd >= residual {
                delivered(Transmitter::Source, gamma_overall + draws.gamma_sd, 0.0, 0.0)
            } else if r2_ready && draws.gamma_r2d >= residual {
                delivered(
                    Transmitter::Relay2,
                    gamma_overall + draws.gamma_r2d,
                    0.0,
                    energy.m_r2,
                )
            } else {
                silent(state, gamma_overall)
            }
        }
        TcState::Sr1r2V1 | TcState::Sr1r2V2 | TcState::Sr1r2V3 => {
            if draws.gamma_sd >= residual {
                delivered(Transmitter::Source, gamma_overall + draws.gamma_sd, 0.0, 0.0)
            } else if r2_ready && draws.gamma_r2d >= residual {
                delivered(
                    Transmitter::Relay2,
                    gamma_overall + draws.gamma_r2d,
                    0.0,
                    energy.m_r2,
                )
            } else if r1_ready && draws.gamma_r1d >= residual {
                // R1 serves when R2 cannot, whether R2 lacks channel or energy.
                delivered(
                    Transmitter::Relay1,
                    gamma_overall + draws.gamma_r1d,
                    energy.m_r1,
                    0.0,
                )
            } else {
                silent(state, gamma_overall)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(gamma_th: f64) -> DerivedRates {
        DerivedRates {
            w_sd: 1.0,
            w_sr1: 1.0,
            w_sr2: 1.0,
            w_r1r2: 1.0,
            w_r1d: 1.0,
            w_r2d: 1.0,
            gamma_th,
        }
    }

    fn energy() -> EnergyParams {
        EnergyParams {
            m_r1: 10.0,
            m_r2: 8.0,
            lambda1_db: -15.0,
            lambda2_db: -12.0,
        }
    }

    fn draws(sd: f64, sr1: f64, sr2: f64, r1r2: f64, r1d: f64, r2d: f64) -> SlotDraws {
        SlotDraws {
            gamma_sd: sd,
            gamma_sr1: sr1,
            gamma_sr2: sr2,
            gamma_r1r2: r1r2,
            gamma_r1d: r1d,
            gamma_r2d: r2d,
        }
    }

    #[test]
    fn residual_threshold_examples() {
        assert_eq!(residual_threshold(3.0, 0.0), Ok(3.0));
        assert_eq!(residual_threshold(3.0, 1.2), Ok(1.8));
        assert_eq!(residual_threshold(3.0, 3.0), Err(ProtocolError::AlreadyDeliverable));
    }

    #[test]
    fn source_direct_delivery() {
        let out = decide_slot(
            TcState::S,
            0.0,
            &draws(5.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            0.0,
            0.0,
            &rates(3.0),
            &energy(),
        );
        assert!(out.delivered);
        assert_eq!(out.transmitter, Transmitter::Source);
        assert_eq!(out.next, TcState::S);
        assert_eq!(out.next_gamma_overall, 0.0);
    }

    #[test]
    fn source_reaches_both_relays() {
        let out = decide_slot(
            TcState::S,
            0.0,
            &draws(1.0, 4.0, 4.0, 0.0, 0.0, 0.0),
            0.0,
            0.0,
            &rates(3.0),
            &energy(),
        );
        assert!(!out.delivered);
        assert_eq!(out.next, TcState::Sr1r2V3);
        assert_eq!(out.next_gamma_overall, 1.0);
    }

    #[test]
    fn relay1_delivers_with_mrc_and_energy() {
        let mut e = energy();
        e.m_r1 = 10.0;
        let out = decide_slot(
            TcState::Sr1,
            1.0,
            &draws(0.5, 0.0, 0.0, 0.0, 2.5, 0.0),
            12.0,
            0.0,
            &rates(3.0),
            &e,
        );
        assert!(out.delivered);
        assert_eq!(out.transmitter, Transmitter::Relay1);
        assert_eq!(out.spend_r1, 10.0);
        assert_eq!(out.next, TcState::S);
    }

    #[test]
    fn sr2_stays_silent_without_energy_or_channel() {
        let out = decide_slot(
            TcState::Sr2,
            2.0,
            &draws(0.1, 0.0, 0.0, 0.0, 0.0, 0.2),
            0.0,
            1.0, // below m_r2
            &rates(3.0),
            &energy(),
        );
        assert_eq!(out.transmitter, Transmitter::Silent);
        assert_eq!(out.next, TcState::Sr2);
        assert_eq!(out.next_gamma_overall, 2.0);
        assert_eq!(out.spend_r2, 0.0);
    }

    #[test]
    fn source_hands_to_r2_when_r1_link_fails() {
        let out = decide_slot(
            TcState::Sr1,
            1.0,
            &draws(0.5, 0.0, 3.2, 0.0, 0.3, 0.0),
            12.0,
            0.0,
            &rates(3.0),
            &energy(),
        );
        assert!(!out.delivered);
        assert_eq!(out.transmitter, Transmitter::Source);
        assert_eq!(out.next, TcState::Sr1r2V1);
        assert!((out.next_gamma_overall - 1.5).abs() < 1e-15);
    }

    #[test]
    fn r1_forwards_to_r2() {
        let out = decide_slot(
            TcState::Sr1,
            1.0,
            &draws(0.5, 0.0, 0.4, 3.5, 0.3, 0.0),
            12.0,
            0.0,
            &rates(3.0),
            &energy(),
        );
        assert!(!out.delivered);
        assert_eq!(out.transmitter, Transmitter::Relay1);
        assert_eq!(out.spend_r1, 10.0);
        assert_eq!(out.next, TcState::Sr1r2V2);
        assert!((out.next_gamma_overall - 1.3).abs() < 1e-15);
    }

    #[test]
    fn r1_saves_delivery_when_r2_has_no_energy() {
        let out = decide_slot(
            TcState::Sr1r2V3,
            1.0,
            &draws(0.5, 0.0, 0.0, 0.0, 2.5, 2.5),
            12.0,
            1.0, // R2 cannot afford a transmission
            &rates(3.0),
            &energy(),
        );
        assert!(out.delivered);
        assert_eq!(out.transmitter, Transmitter::Relay1);
        assert_eq!(out.spend_r1, 10.0);
        assert_eq!(out.spend_r2, 0.0);
    }

    #[test]
    fn r2_has_priority_over_r1() {
        let out = decide_slot(
            TcState::Sr1r2V2,
            1.0,
            &draws(0.5, 0.0, 0.0, 0.0, 2.5, 2.5),
            12.0,
            9.0,
            &rates(3.0),
            &energy(),
        );
        assert!(out.delivered);
        assert_eq!(out.transmitter, Transmitter::Relay2);
        assert_eq!(out.spend_r2, 8.0);
        assert_eq!(out.spend_r1, 0.0);
    }

    /// Grid test: every (state, link quadrant, buffer quadrant) combination
    /// fires exactly one protocol row, never spends below balance, and resets
    /// gamma_overall exactly on delivery.
    #[test]
    fn exhaustive_quadrant_grid() {
        let rates = rates(3.0);
        let e = energy();
        let lo = 0.4; // below every residual used here
        let hi = 10.0; // above the full threshold
        let gammas = [0.0, 1.7]; // zero only valid for state S
        for state in TcState::ALL {
            for &g in &gammas {
                if state == TcState::S && g != 0.0 {
                    continue;
                }
                for mask in 0..64u32 {
                    let pick = |bit: u32| if mask & (1 << bit) != 0 { hi } else { lo };
                    let d = draws(pick(0), pick(1), pick(2), pick(3), pick(4), pick(5));
                    for bmask in 0..4u32 {
                        let b1 = if bmask & 1 != 0 { e.m_r1 + 1.0 } else { e.m_r1 - 1.0 };
                        let b2 = if bmask & 2 != 0 { e.m_r2 + 1.0 } else { e.m_r2 - 1.0 };
                        let out = decide_slot(state, g, &d, b1, b2, &rates, &e);
                        // no spend below balance
                        assert!(out.spend_r1 == 0.0 || b1 >= e.m_r1);
                        assert!(out.spend_r2 == 0.0 || b2 >= e.m_r2);
                        assert!(out.spend_r1 == 0.0 || out.spend_r1 == e.m_r1);
                        assert!(out.spend_r2 == 0.0 || out.spend_r2 == e.m_r2);
                        // delivery resets, silence preserves
                        if out.delivered {
                            assert_eq!(out.next, TcState::S);
                            assert_eq!(out.next_gamma_overall, 0.0);
                            assert!(out.delivered_snr.unwrap() >= rates.gamma_th);
                        } else {
                            assert!(out.next_gamma_overall >= g);
                            assert!(out.delivered_snr.is_none());
                        }
                        if out.transmitter == Transmitter::Silent {
                            assert_eq!(out.next, state);
                            assert_eq!(out.next_gamma_overall, g);
                            assert_eq!((out.spend_r1, out.spend_r2), (0.0, 0.0));
                        }
                        // exactly one row fires: cross-check against an
                        // independent predicate enumeration
                        let row = classify(state, g, &d, b1, b2, &rates, &e);
                        assert_eq!(row, (out.transmitter, out.delivered, out.next));
                    }
                }
            }
        }
    }

    /// Independent re-statement of the protocol rows as disjoint predicates;
    /// panics unless exactly one matches.
    fn classify(
        state: TcState,
        g: f64,
        d: &SlotDraws,
        b1: f64,
        b2: f64,
        rates: &DerivedRates,
        e: &EnergyParams,
    ) -> (Transmitter, bool, TcState) {
        let th = rates.gamma_th;
        let res = th - g;
        let r1 = b1 >= e.m_r1;
        let r2 = b2 >= e.m_r2;
        let mut hits: alloc::vec::Vec<(Transmitter, bool, TcState)> = alloc::vec::Vec::new();
        match state {
            TcState::S => {
                if d.gamma_sd >= th {
                    hits.push((Transmitter::Source, true, TcState::S));
                }
                if d.gamma_sd < th && d.gamma_sr1 >= th && d.gamma_sr2 >= th {
                    hits.push((Transmitter::Source, false, TcState::Sr1r2V3));
                }
                if d.gamma_sd < th && d.gamma_sr1 < th && d.gamma_sr2 >= th {
                    hits.push((Transmitter::Source, false, TcState::Sr2));
                }
                if d.gamma_sd < th && d.gamma_sr1 >= th && d.gamma_sr2 < th {
                    hits.push((Transmitter::Source, false, TcState::Sr1));
                }
                if d.gamma_sd < th && d.gamma_sr1 < th && d.gamma_sr2 < th {
                    hits.push((Transmitter::Silent, false, TcState::S));
                }
            }
            TcState::Sr1 => {
                let sd_ok = d.gamma_sd >= res;
                let r1d_ok = r1 && d.gamma_r1d >= res;
                let sr2_ok = d.gamma_sr2 >= th;
                let r1r2_ok = r1 && d.gamma_r1r2 >= th;
                if sd_ok {
                    hits.push((Transmitter::Source, true, TcState::S));
                }
                if !sd_ok && r1d_ok {
                    hits.push((Transmitter::Relay1, true, TcState::S));
                }
                if !sd_ok && !r1d_ok && sr2_ok {
                    hits.push((Transmitter::Source, false, TcState::Sr1r2V1));
                }
                if !sd_ok && !r1d_ok && !sr2_ok && r1r2_ok {
                    hits.push((Transmitter::Relay1, false, TcState::Sr1r2V2));
                }
                if !sd_ok && !r1d_ok && !sr2_ok && !r1r2_ok {
                    hits.push((Transmitter::Silent, false, TcState::Sr1));
                }
            }
            TcState::Sr2 => {
                let sd_ok = d.gamma_sd >= res;
                let r2d_ok = r2 && d.gamma_r2d >= res;
                if sd_ok {
                    hits.push((Transmitter::Source, true, TcState::S));
                }
                if !sd_ok && r2d_ok {
                    hits.push((Transmitter::Relay2, true, TcState::S));
                }
                if !sd_ok && !r2d_ok {
                    hits.push((Transmitter::Silent, false, TcState::Sr2));
                }
            }
            _ => {
                let sd_ok = d.gamma_sd >= res;
                let r2d_ok = r2 && d.gamma_r2d >= res;
                let r1d_ok = r1 && d.gamma_r1d >= res;
                if sd_ok {
                    hits.push((Transmitter::Source, true, TcState::S));
                }
                if !sd_ok && r2d_ok {
                    hits.push((Transmitter::Relay2, true, TcState::S));
                }
                if !sd_ok && !r2d_ok && r1d_ok {
                    hits.push((Transmitter::Relay1, true, TcState::S));
                }
                if !sd_ok && !r2d_ok && !r1d_ok {
                    hits.push((Transmitter::Silent, false, state));
                }
            }
        }
        assert_eq!(hits.len(), 1, "exactly one row must fire");
        hits[0]
    }
}
