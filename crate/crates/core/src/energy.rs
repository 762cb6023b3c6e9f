//! Harvest-store-use buffer dynamics for one relay.
//!
//! Harvested energy lands in a secondary buffer (SEB) during the slot and is
//! transferred to the primary buffer (PEB) at slot end, so a slot's harvest
//! can never fund that same slot's transmission. The SEB is therefore always
//! empty between slots and only the PEB level is persisted.

use libm::log;

/// Primary energy buffer level of a relay, millijoules. Unbounded above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayBuffer {
    peb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyError {
    /// The protocol requested a spend larger than the stored energy.
    Overdraw { peb: f64, spend: f64 },
}

impl core::fmt::Display for EnergyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EnergyError::Overdraw { peb, spend } => {
                write!(f, "spend {spend} mJ exceeds stored {peb} mJ")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EnergyError {}

impl RelayBuffer {
    /// Empty buffer (slot 0 initial condition).
    pub fn empty() -> Self {
        RelayBuffer { peb: 0.0 }
    }

    pub fn with_level(peb: f64) -> Self {
        debug_assert!(peb >= 0.0);
        RelayBuffer { peb }
    }

    /// Stored energy available for the coming slot, mJ.
    pub fn level(&self) -> f64 {
        self.peb
    }

    /// Apply one slot: spend from the PEB, then transfer this slot's harvest
    /// from the SEB. Energy is conserved exactly: `peb' - peb = harvest - spend`.
    pub fn commit_slot(self, spend: f64, harvest: f64) -> Result<RelayBuffer, EnergyError> {
        debug_assert!(harvest >= 0.0 && spend >= 0.0);
        if spend > self.peb {
            return Err(EnergyError::Overdraw { peb: self.peb, spend });
        }
        Ok(RelayBuffer {
            peb: self.peb - spend + harvest,
        })
    }
}

/// Inverse-CDF exponential harvest sample: `-ln(draw) / lambda` mJ.
pub fn sample_harvest(lambda: f64, draw: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    debug_assert!(draw > 0.0 && draw <= 1.0);
    -log(draw) / lambda
}
