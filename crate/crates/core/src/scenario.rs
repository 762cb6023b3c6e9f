//! Scenario description and derived per-link SNR rate parameters.
//!
//! A scenario is the single source of truth for a run: node geometry, radio
//! and energy parameters and the discretization size. The file format is
//! line-oriented `key = value` text; see [`load_scenario`].

use alloc::format;
use alloc::string::{String, ToString};

use libm::{exp2, pow, sqrt};

/// Planar coordinate in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        sqrt((self.x - other.x) * (self.x - other.x) + (self.y - other.y) * (self.y - other.y))
    }
}

/// Positions of the four nodes: source, both relays, destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLayout {
    pub s: Point,
    pub r1: Point,
    pub r2: Point,
    pub d: Point,
}

impl NodeLayout {
    pub fn d_sd(&self) -> f64 {
        self.s.distance(&self.d)
    }
    pub fn d_sr1(&self) -> f64 {
        self.s.distance(&self.r1)
    }
    pub fn d_sr2(&self) -> f64 {
        self.s.distance(&self.r2)
    }
    pub fn d_r1r2(&self) -> f64 {
        self.r1.distance(&self.r2)
    }
    pub fn d_r1d(&self) -> f64 {
        self.r1.distance(&self.d)
    }
    pub fn d_r2d(&self) -> f64 {
        self.r2.distance(&self.d)
    }
}

/// Source power, noise power, path-loss exponent and target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Source transmit power in dBm.
    pub p_s_dbm: f64,
    /// Noise power in dBm.
    pub n0_dbm: f64,
    /// Path-loss exponent; negative so that SNR decreases with distance.
    pub alpha: f64,
    /// Target rate in bit/s/Hz.
    pub r0: f64,
}

/// Per-relay transmission cost and harvest-rate parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Energy cost of one R1 transmission, millijoules.
    pub m_r1: f64,
    /// Energy cost of one R2 transmission, millijoules.
    pub m_r2: f64,
    /// R1 harvest-rate parameter, dB.
    pub lambda1_db: f64,
    /// R2 harvest-rate parameter, dB.
    pub lambda2_db: f64,
}

impl EnergyParams {
    /// Linear harvest rate of R1 in 1/mJ; mean harvest per slot is `1/lambda1`.
    pub fn lambda1(&self) -> f64 {
        pow(10.0, -self.lambda1_db / 10.0)
    }

    /// Linear harvest rate of R2 in 1/mJ.
    pub fn lambda2(&self) -> f64 {
        pow(10.0, -self.lambda2_db / 10.0)
    }
}

/// A validated scenario. Immutable after construction; safe to share
/// read-only across concurrent workers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub layout: NodeLayout,
    pub radio: RadioParams,
    pub energy: EnergyParams,
    /// Number of SNR bins over [0, gamma_th) used by the chain analytics.
    pub bins: usize,
}

/// Exponential rate parameters of the six link SNRs plus the SNR threshold.
///
/// Each `w_ab` is the reciprocal of the mean link SNR `P_tx * d_ab^alpha / N0`
/// under `h ~ CN(0, d^alpha)`. Relay transmit powers equal the per-slot
/// energy costs `m_r1`, `m_r2` (unit-duration slots).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub w_sd: f64,
    pub w_sr1: f64,
    pub w_sr2: f64,
    pub w_r1r2: f64,
    pub w_r1d: f64,
    pub w_r2d: f64,
    /// Linear SNR threshold, `2^r0 - 1`.
    pub gamma_th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// Malformed line, unknown key or unparsable value.
    Parse { line: usize, reason: String },
    /// A required key was never given.
    MissingKey(&'static str),
    /// An invariant check failed after parsing.
    Validation(String),
}

impl core::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScenarioError::Parse { line, reason } => {
                write!(f, "parse error on line {line}: {reason}")
            }
            ScenarioError::MissingKey(key) => write!(f, "missing key `{key}`"),
            ScenarioError::Validation(reason) => write!(f, "invalid scenario: {reason}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScenarioError {}

/// Convert a dBm power to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    pow(10.0, dbm / 10.0)
}

fn parse_f64(line: usize, value: &str) -> Result<f64, ScenarioError> {
    value.trim().parse::<f64>().map_err(|_| ScenarioError::Parse {
        line,
        reason: format!("expected a number, got `{}`", value.trim()),
    })
}

fn parse_point(line: usize, value: &str) -> Result<Point, ScenarioError> {
    let mut parts = value.splitn(2, ',');
    let x = parts.next().ok_or_else(|| ScenarioError::Parse {
        line,
        reason: "expected `x,y`".to_string(),
    })?;
    let y = parts.next().ok_or_else(|| ScenarioError::Parse {
        line,
        reason: "expected `x,y`".to_string(),
    })?;
    Ok(Point {
        x: parse_f64(line, x)?,
        y: parse_f64(line, y)?,
    })
}

/// Parse, validate and normalize a scenario description.
///
/// Recognized keys: `s`, `r1`, `r2`, `d` (comma-separated coordinate pairs),
/// `alpha`, `p_s_dbm`, `n0_dbm`, `r0`, `m_r1_mj`, `m_r2_mj`, `lambda1_db`,
/// `lambda2_db`, `bins`. `#` starts a comment; blank lines are ignored;
/// unknown keys are an error.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut s = None;
    let mut r1 = None;
    let mut r2 = None;
    let mut d = None;
    let mut alpha = None;
    let mut p_s_dbm = None;
    let mut n0_dbm = None;
    let mut r0 = None;
    let mut m_r1 = None;
    let mut m_r2 = None;
    let mut lambda1_db = None;
    let mut lambda2_db = None;
    let mut bins = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ScenarioError::Parse {
            line,
            reason: "expected `key = value`".to_string(),
        })?;
        let key = key.trim();
        match key {
            "s" => s = Some(parse_point(line, value)?),
            "r1" => r1 = Some(parse_point(line, value)?),
            "r2" => r2 = Some(parse_point(line, value)?),
            "d" => d = Some(parse_point(line, value)?),
            "alpha" => alpha = Some(parse_f64(line, value)?),
            "p_s_dbm" => p_s_dbm = Some(parse_f64(line, value)?),
            "n0_dbm" => n0_dbm = Some(parse_f64(line, value)?),
            "r0" => r0 = Some(parse_f64(line, value)?),
            "m_r1_mj" => m_r1 = Some(parse_f64(line, value)?),
            "m_r2_mj" => m_r2 = Some(parse_f64(line, value)?),
            "lambda1_db" => lambda1_db = Some(parse_f64(line, value)?),
            "lambda2_db" => lambda2_db = Some(parse_f64(line, value)?),
            "bins" => {
                let v: usize = value.trim().parse().map_err(|_| ScenarioError::Parse {
                    line,
                    reason: "`bins` must be a positive integer".to_string(),
                })?;
                if v == 0 {
                    return Err(ScenarioError::Parse {
                        line,
                        reason: "`bins` must be a positive integer".to_string(),
                    });
                }
                bins = Some(v);
            }
            other => {
                return Err(ScenarioError::Parse {
                    line,
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let scenario = Scenario {
        layout: NodeLayout {
            s: s.ok_or(ScenarioError::MissingKey("s"))?,
            r1: r1.ok_or(ScenarioError::MissingKey("r1"))?,
            r2: r2.ok_or(ScenarioError::MissingKey("r2"))?,
            d: d.ok_or(ScenarioError::MissingKey("d"))?,
        },
        radio: RadioParams {
            p_s_dbm: p_s_dbm.ok_or(ScenarioError::MissingKey("p_s_dbm"))?,
            n0_dbm: n0_dbm.ok_or(ScenarioError::MissingKey("n0_dbm"))?,
            alpha: alpha.ok_or(ScenarioError::MissingKey("alpha"))?,
            r0: r0.ok_or(ScenarioError::MissingKey("r0"))?,
        },
        energy: EnergyParams {
            m_r1: m_r1.ok_or(ScenarioError::MissingKey("m_r1_mj"))?,
            m_r2: m_r2.ok_or(ScenarioError::MissingKey("m_r2_mj"))?,
            lambda1_db: lambda1_db.ok_or(ScenarioError::MissingKey("lambda1_db"))?,
            lambda2_db: lambda2_db.ok_or(ScenarioError::MissingKey("lambda2_db"))?,
        },
        bins: bins.unwrap_or(100),
    };
    validate(&scenario)?;
    Ok(scenario)
}

fn validate(sc: &Scenario) -> Result<(), ScenarioError> {
    let l = &sc.layout;
    let pairs = [
        ("s-r1", l.d_sr1()),
        ("s-r2", l.d_sr2()),
        ("s-d", l.d_sd()),
        ("r1-r2", l.d_r1r2()),
        ("r1-d", l.d_r1d()),
        ("r2-d", l.d_r2d()),
    ];
    for (name, dist) in pairs {
        if !(dist > 0.0) {
            return Err(ScenarioError::Validation(format!(
                "distance {name} must be positive (coincident nodes?)"
            )));
        }
    }
    if !(sc.radio.r0 > 0.0) {
        return Err(ScenarioError::Validation("r0 must be positive".to_string()));
    }
    if !(sc.energy.m_r1 > 0.0) || !(sc.energy.m_r2 > 0.0) {
        return Err(ScenarioError::Validation(
            "per-transmission energy costs must be positive".to_string(),
        ));
    }
    if !(sc.energy.lambda1().is_finite() && sc.energy.lambda1() > 0.0)
        || !(sc.energy.lambda2().is_finite() && sc.energy.lambda2() > 0.0)
    {
        return Err(ScenarioError::Validation(
            "harvest rates must be positive and finite".to_string(),
        ));
    }
    if sc.bins == 0 {
        return Err(ScenarioError::Validation("bins must be positive".to_string()));
    }
    Ok(())
}

/// Derive the six exponential link-SNR rates and the SNR threshold.
///
/// Pure function: identical scenarios yield bit-identical results.
pub fn derive_rates(sc: &Scenario) -> DerivedRates {
    let n0 = dbm_to_mw(sc.radio.n0_dbm);
    let p_s = dbm_to_mw(sc.radio.p_s_dbm);
    let alpha = sc.radio.alpha;
    let rate = |p_tx: f64, d: f64| n0 / (p_tx * pow(d, alpha));
    let l = &sc.layout;
    DerivedRates {
        w_sd: rate(p_s, l.d_sd()),
        w_sr1: rate(p_s, l.d_sr1()),
        w_sr2: rate(p_s, l.d_sr2()),
        w_r1r2: rate(sc.energy.m_r1, l.d_r1r2()),
        w_r1d: rate(sc.energy.m_r1, l.d_r1d()),
        w_r2d: rate(sc.energy.m_r2, l.d_r2d()),
        gamma_th: exp2(sc.radio.r0) - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) const SECTION_V: &str = "\
# two-relay benchmark geometry
s = 0,0
r1 = 30,20
r2 = 60,-20
d = 100,0
alpha = -3
p_s_dbm = 12
n0_dbm = -50
r0 = 2
m_r1_mj = 12
m_r2_mj = 10
lambda1_db = -11
lambda2_db = -12
bins = 100
";

    #[test]
    fn parses_benchmark_scenario() {
        let sc = load_scenario(SECTION_V).unwrap();
        assert_eq!(sc.layout.r1, Point { x: 30.0, y: 20.0 });
        assert_eq!(sc.bins, 100);
        assert_eq!(sc.radio.alpha, -3.0);
    }

    #[test]
    fn rejects_coincident_nodes() {
        let text = SECTION_V.replace("d = 100,0", "d = 0,0");
        match load_scenario(&text) {
            Err(ScenarioError::Validation(msg)) => assert!(msg.contains("s-d")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_rate() {
        let text = SECTION_V.replace("r0 = 2", "r0 = 0");
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn rejects_unknown_key() {
        let text = SECTION_V.to_string() + "frobnicate = 1\n";
        assert!(matches!(load_scenario(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn threshold_for_r0_2_is_exactly_3() {
        let sc = load_scenario(SECTION_V).unwrap();
        assert_eq!(derive_rates(&sc).gamma_th, 3.0);
    }

    #[test]
    fn sr1_distance_is_sqrt_1300() {
        let sc = load_scenario(SECTION_V).unwrap();
        assert!((sc.layout.d_sr1() - 1300f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn direct_link_rate_matches_hand_computation() {
        // P = 12 dBm = 15.849 mW, N0 = -50 dBm = 1e-5 mW, d_SD = 100, alpha = -3:
        // mean SNR = 1.5849, W_SD = 10^-0.2.
        let sc = load_scenario(SECTION_V).unwrap();
        let rates = derive_rates(&sc);
        assert!((rates.w_sd - 0.6309573444801934).abs() < 1e-15);
    }

    #[test]
    fn doubling_coordinates_scales_rates_by_eight() {
        let sc = load_scenario(SECTION_V).unwrap();
        let mut doubled = sc;
        for p in [
            &mut doubled.layout.s,
            &mut doubled.layout.r1,
            &mut doubled.layout.r2,
            &mut doubled.layout.d,
        ] {
            p.x *= 2.0;
            p.y *= 2.0;
        }
        let a = derive_rates(&sc);
        let b = derive_rates(&doubled);
        for (x, y) in [
            (a.w_sd, b.w_sd),
            (a.w_sr1, b.w_sr1),
            (a.w_sr2, b.w_sr2),
            (a.w_r1r2, b.w_r1r2),
            (a.w_r1d, b.w_r1d),
            (a.w_r2d, b.w_r2d),
        ] {
            assert!((y / x - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_th_increases_in_r0() {
        let sc = load_scenario(SECTION_V).unwrap();
        let mut prev = 0.0;
        for r0 in [0.5, 1.0, 2.0, 3.0, 4.5] {
            let mut sc2 = sc;
            sc2.radio.r0 = r0;
            let g = derive_rates(&sc2).gamma_th;
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn derive_rates_is_deterministic() {
        let sc = load_scenario(SECTION_V).unwrap();
        assert_eq!(derive_rates(&sc), derive_rates(&sc));
    }
}
