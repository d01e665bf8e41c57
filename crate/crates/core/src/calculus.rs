//! Semi-quantitative risk calculus.
//!
//! Harm severity levels (HSL 1-6) and likelihood levels (LL 0-8) combine
//! through a fixed matrix into risk levels (RL 0-9). Likelihood levels are
//! order-of-magnitude odds bands; per-step probabilities along a pathway are
//! carried as closed intervals and multiplied.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CalculusError {
    #[error("harm severity level {0} outside 1..=6")]
    InvalidHsl(i64),
    #[error("likelihood level {0} outside 0..=8")]
    InvalidLl(i64),
    #[error("risk level {0} outside 0..=9")]
    InvalidRl(i64),
    #[error("probability {0} outside (0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("invalid probability interval [{lo}, {hi}]: need 0 <= lo <= hi <= 1")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("interval upper bound is zero; no likelihood level applies")]
    ZeroUpperBound,
    #[error("threshold index {0} outside 1..=5")]
    ThresholdIndex(u32),
    #[error("{0} has no numeric thresholds")]
    NonNumericDimension(HarmDimension),
    #[error("magnitude {0} must be finite and non-negative")]
    InvalidMagnitude(f64),
}

macro_rules! level_newtype {
    ($name:ident, $min:expr, $max:expr, $err:ident, $prefix:expr) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(try_from = "i64", into = "u8")]
        pub struct $name(u8);

        impl $name {
            pub const MIN: u8 = $min;
            pub const MAX: u8 = $max;

            pub fn value(self) -> u8 {
                self.0
            }
        }

        impl TryFrom<i64> for $name {
            type Error = CalculusError;

            fn try_from(v: i64) -> Result<Self, CalculusError> {
                if (($min as i64)..=($max as i64)).contains(&v) {
                    Ok(Self(v as u8))
                } else {
                    Err(CalculusError::$err(v))
                }
            }
        }

        impl From<$name> for u8 {
            fn from(level: $name) -> u8 {
                level.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "-{}"), self.0)
            }
        }
    };
}

level_newtype!(HarmSeverityLevel, 1, 6, InvalidHsl, "HSL");
level_newtype!(LikelihoodLevel, 0, 8, InvalidLl, "LL");
level_newtype!(RiskLevel, 0, 9, InvalidRl, "RL");

impl HarmSeverityLevel {
    pub fn new(value: u8) -> Result<Self, CalculusError> {
        Self::try_from(value as i64)
    }

    pub fn all() -> impl DoubleEndedIterator<Item = Self> + Clone {
        (Self::MIN..=Self::MAX).map(Self)
    }

    pub fn label(self) -> &'static str {
        HSL_LABELS[(self.0 - 1) as usize]
    }
}

impl LikelihoodLevel {
    pub fn new(value: u8) -> Result<Self, CalculusError> {
        Self::try_from(value as i64)
    }

    pub fn all() -> impl DoubleEndedIterator<Item = Self> + Clone {
        (Self::MIN..=Self::MAX).map(Self)
    }
}

impl RiskLevel {
    /// Exposed for parsing rendered reports; estimates obtain risk levels
    /// through [`risk_level`] only.
    pub fn parse(value: u8) -> Result<Self, CalculusError> {
        Self::try_from(value as i64)
    }
}

const HSL_LABELS: [&str; 6] = [
    "Marginal but non-trivial",
    "Tragic",
    "Severe",
    "Devastating",
    "Extreme",
    "Globally catastrophic",
];

/// Risk levels indexed `[ll][hsl - 1]`.
const RISK_MATRIX: [[u8; 6]; 9] = [
    [0, 0, 0, 0, 0, 0], // LL-0
    [0, 0, 1, 3, 4, 6], // LL-1
    [0, 0, 1, 3, 5, 6], // LL-2
    [0, 1, 2, 4, 5, 7], // LL-3
    [1, 2, 3, 4, 6, 7], // LL-4
    [2, 3, 4, 5, 6, 8], // LL-5
    [3, 4, 5, 6, 7, 8], // LL-6
    [4, 5, 6, 7, 8, 9], // LL-7
    [4, 5, 7, 8, 9, 9], // LL-8
];

pub fn risk_level(hsl: HarmSeverityLevel, ll: LikelihoodLevel) -> RiskLevel {
    RiskLevel(RISK_MATRIX[ll.0 as usize][(hsl.0 - 1) as usize])
}

/// The full matrix as `[ll][hsl - 1]`, for reference export.
pub fn risk_matrix() -> [[u8; 6]; 9] {
    RISK_MATRIX
}

// Band lower limits for LL-1..=LL-8, then the LL-8 upper limit.
const BAND_EDGES: [f64; 9] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
const LL0_UPPER: f64 = 1e-12;

const ODDS_DENOMINATORS: [&str; 9] = [
    "1 in 100,000,000",
    "1 in 10,000,000",
    "1 in 1,000,000",
    "1 in 100,000",
    "1 in 10,000",
    "1 in 1,000",
    "1 in 100",
    "1 in 10",
    "1 in 1",
];

/// Odds range of one likelihood level.
///
/// LL-1..=LL-8 are lower-inclusive and upper-exclusive except that LL-8 is
/// closed at 1. LL-0 is `(0, 1e-12]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsBand {
    pub lower: f64,
    pub upper: f64,
}

impl OddsBand {
    pub fn contains(&self, p: f64) -> bool {
        if self.lower == 0.0 {
            p > 0.0 && p <= self.upper
        } else if self.upper == 1.0 {
            p >= self.lower && p <= 1.0
        } else {
            p >= self.lower && p < self.upper
        }
    }
}

pub fn ll_band(ll: LikelihoodLevel) -> OddsBand {
    match ll.0 {
        0 => OddsBand {
            lower: 0.0,
            upper: LL0_UPPER,
        },
        n => OddsBand {
            lower: BAND_EDGES[(n - 1) as usize],
            upper: BAND_EDGES[n as usize],
        },
    }
}

/// Human readable odds for the band limits, e.g. `("1 in 10", "1 in 1")`.
pub fn ll_odds_labels(ll: LikelihoodLevel) -> (&'static str, &'static str) {
    match ll.0 {
        0 => ("1 in infinity", "1 in 1,000,000,000,000"),
        n => (
            ODDS_DENOMINATORS[(n - 1) as usize],
            ODDS_DENOMINATORS[n as usize],
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandAnnotation {
    /// The probability lies between LL-0 and LL-1 and was resolved upward.
    BelowBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Banding {
    pub level: LikelihoodLevel,
    pub annotation: Option<BandAnnotation>,
}

/// Maps a probability to the likelihood level whose band contains it.
pub fn ll_from_probability(p: f64) -> Result<Banding, CalculusError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(CalculusError::ProbabilityOutOfRange(p));
    }
    if p <= LL0_UPPER {
        return Ok(Banding {
            level: LikelihoodLevel(0),
            annotation: None,
        });
    }
    if p < BAND_EDGES[0] {
        return Ok(Banding {
            level: LikelihoodLevel(1),
            annotation: Some(BandAnnotation::BelowBand),
        });
    }
    let level = (1..=8u8)
        .rev()
        .find(|&n| p >= BAND_EDGES[(n - 1) as usize])
        .expect("p >= 1e-8 falls in some band");
    Ok(Banding {
        level: LikelihoodLevel(level),
        annotation: None,
    })
}

/// Closed probability interval `[lo, hi]` with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct ProbabilityInterval {
    lo: f64,
    hi: f64,
}

#[derive(Deserialize)]
struct RawInterval {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawInterval> for ProbabilityInterval {
    type Error = CalculusError;

    fn try_from(raw: RawInterval) -> Result<Self, CalculusError> {
        Self::new(raw.lo, raw.hi)
    }
}

impl ProbabilityInterval {
    pub const CERTAIN: ProbabilityInterval = ProbabilityInterval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, CalculusError> {
        if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0 {
            Ok(Self { lo, hi })
        } else {
            Err(CalculusError::InvalidInterval { lo, hi })
        }
    }

    pub fn point(p: f64) -> Result<Self, CalculusError> {
        Self::new(p, p)
    }

    /// The closed hull of a likelihood band.
    pub fn from_level(ll: LikelihoodLevel) -> Self {
        let band = ll_band(ll);
        Self {
            lo: band.lower,
            hi: band.upper,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, other: &ProbabilityInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for ProbabilityInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

/// Probability that every step of a chain occurs, each step conditional on
/// its predecessors: the bound-wise product. The empty chain is certain.
pub fn compose_sequential(steps: &[ProbabilityInterval]) -> ProbabilityInterval {
    steps
        .iter()
        .fold(ProbabilityInterval::CERTAIN, |acc, step| {
            ProbabilityInterval {
                lo: acc.lo * step.lo,
                hi: acc.hi * step.hi,
            }
        })
}

// Products of band edges are powers of ten that binary floating point can
// land a few ulps under; such results are snapped to the edge.
const EDGE_SNAP: f64 = 1e-12;

/// Likelihood level of the band containing the interval's upper bound.
pub fn ll_conservative(interval: ProbabilityInterval) -> Result<LikelihoodLevel, CalculusError> {
    if interval.hi <= 0.0 {
        return Err(CalculusError::ZeroUpperBound);
    }
    let hi = BAND_EDGES
        .iter()
        .copied()
        .find(|&edge| interval.hi < edge && (edge - interval.hi) <= edge * EDGE_SNAP)
        .unwrap_or(interval.hi);
    Ok(ll_from_probability(hi)?.level)
}

/// `Fib(1) = Fib(2) = 1`.
pub fn fibonacci(k: u32) -> u128 {
    let (mut a, mut b) = (0u128, 1u128);
    for _ in 0..k {
        let next = a + b;
        a = b;
        b = next;
    }
    a
}

/// Unrounded product `Fib(8) * ... * Fib(n + 7)`.
pub fn hsl_raw_product(n: u32) -> Result<u128, CalculusError> {
    if !(1..=5).contains(&n) {
        return Err(CalculusError::ThresholdIndex(n));
    }
    Ok((8..=n + 7).map(fibonacci).product())
}

/// Rounds the leading digits to the nearest half unit of the leading
/// decimal place (21 -> 20, 714 -> 700, 3_495_030 -> 3_500_000).
fn round_to_half_mantissa(raw: u128) -> u128 {
    let mut scale = 1u128;
    while raw / scale >= 10 {
        scale *= 10;
    }
    let half = (scale / 2).max(1);
    (raw + half / 2) / half * half
}

/// Upper end of HSL-n in deaths (and lower bound of HSL-(n+1)).
pub fn hsl_upper_threshold(n: u32) -> Result<u128, CalculusError> {
    hsl_raw_product(n).map(round_to_half_mantissa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmDimension {
    Deaths,
    DollarDamage,
    GeopoliticalEffects,
    EconomicDamage,
    JobDisplacement,
    EnvironmentalDamage,
    SocialDisruption,
    OtherExamples,
}

impl HarmDimension {
    pub const ALL: [HarmDimension; 8] = [
        Self::Deaths,
        Self::DollarDamage,
        Self::GeopoliticalEffects,
        Self::EconomicDamage,
        Self::JobDisplacement,
        Self::EnvironmentalDamage,
        Self::SocialDisruption,
        Self::OtherExamples,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Deaths => "Human deaths",
            Self::DollarDamage => "Dollar-equivalent damages",
            Self::GeopoliticalEffects => "Geopolitical effects",
            Self::EconomicDamage => "Economic damage",
            Self::JobDisplacement => "Job displacement",
            Self::EnvironmentalDamage => "Environmental damage",
            Self::SocialDisruption => "Social disruption",
            Self::OtherExamples => "Other examples",
        }
    }
}

impl fmt::Display for HarmDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Numeric lower bounds of HSL-1..=HSL-6 for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HslThresholdTable {
    pub dimension: HarmDimension,
    pub unit: &'static str,
    pub thresholds: [f64; 6],
}

pub const DEATHS_TABLE: HslThresholdTable = HslThresholdTable {
    dimension: HarmDimension::Deaths,
    unit: "deaths",
    thresholds: [1.0, 20.0, 700.0, 40_000.0, 3_500_000.0, 500_000_000.0],
};

pub const DOLLAR_TABLE: HslThresholdTable = HslThresholdTable {
    dimension: HarmDimension::DollarDamage,
    unit: "USD",
    thresholds: [1e7, 2e8, 7e9, 4e10, 3.5e13, 4e14],
};

impl HslThresholdTable {
    pub fn for_dimension(dimension: HarmDimension) -> Result<&'static Self, CalculusError> {
        match dimension {
            HarmDimension::Deaths => Ok(&DEATHS_TABLE),
            HarmDimension::DollarDamage => Ok(&DOLLAR_TABLE),
            other => Err(CalculusError::NonNumericDimension(other)),
        }
    }

    /// Highest level whose lower threshold does not exceed `magnitude`.
    pub fn classify(&self, magnitude: f64) -> Result<Option<HarmSeverityLevel>, CalculusError> {
        if !magnitude.is_finite() || magnitude < 0.0 {
            return Err(CalculusError::InvalidMagnitude(magnitude));
        }
        Ok(self
            .thresholds
            .iter()
            .rposition(|&t| t <= magnitude)
            .map(|i| HarmSeverityLevel(i as u8 + 1)))
    }
}

pub fn hsl_for_metric(
    dimension: HarmDimension,
    magnitude: f64,
) -> Result<Option<HarmSeverityLevel>, CalculusError> {
    HslThresholdTable::for_dimension(dimension)?.classify(magnitude)
}

/// One display row of the severity definition table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HslReferenceRow {
    pub dimension: HarmDimension,
    pub label: &'static str,
    pub levels: [&'static str; 6],
    pub numeric: bool,
    pub anomaly: Option<&'static str>,
}

pub fn hsl_reference_rows() -> Vec<HslReferenceRow> {
    let row = |dimension: HarmDimension, levels: [&'static str; 6]| HslReferenceRow {
        dimension,
        label: dimension.label(),
        levels,
        numeric: HslThresholdTable::for_dimension(dimension).is_ok(),
        anomaly: None,
    };
    vec![
        row(
            HarmDimension::Deaths,
            ["1+ deaths", "20+ deaths", "700+ deaths", "40k+ deaths", "3.5M+ deaths", "500M+ deaths"],
        ),
        row(
            HarmDimension::DollarDamage,
            [
                "$10M+ in damage",
                "$200M+ in damage",
                "$7B+ in damage",
                "$40B+ in damage",
                "$35T+ in damage",
                "$400T+ in damage",
            ],
        ),
        row(
            HarmDimension::GeopoliticalEffects,
            [
                "Diplomatic disagreement leading to small trade sanctions",
                "Increased tensions between neighboring countries | Border skirmishes",
                "Regional conflict escalating to limited warfare",
                "Major power conflict in strategic region",
                "Large-scale invasion or conventional war; Loss of war in a major power",
                "Nuclear war between major nuclear powers",
            ],
        ),
        row(
            HarmDimension::EconomicDamage,
            [
                "Temporary industry disruption",
                "Major product recall with a major company crisis",
                "Significant global market correction",
                "Vast reduction in global trade and cooperation",
                "Bankrupting several sizable countries | Collapse of global financial system and trade networks",
                "Collapse of the global economy or near-total value capture by AI",
            ],
        ),
        HslReferenceRow {
            anomaly: Some("HSL-5 reads 15k+, below the HSL-4 value of 12M+; stored verbatim, not usable for numeric classification"),
            ..row(
                HarmDimension::JobDisplacement,
                [
                    "300+ unemployed for a year or more",
                    "6k+ unemployed for a year or more",
                    "200k+ unemployed for a year or more",
                    "12M+ unemployed for a year or more",
                    "15k+ unemployed for a year or more",
                    "Most humans cannot make enough to live",
                ],
            )
        },
        row(
            HarmDimension::EnvironmentalDamage,
            [
                "Localized chemical spill affecting a water supply | Destruction of 1000 acres of old-growth forest",
                "Major oil spill in sensitive marine environment",
                "Major industrial accident with widespread environmental impact",
                "Rapid ice sheet collapse accelerating sea level rise",
                "Runaway climate change tipping point reached",
                "Global ecosystem collapse",
            ],
        ),
        row(
            HarmDimension::SocialDisruption,
            [
                "Large-scale protests with significant economic disruption",
                "Significant riots and violence in several cities",
                "Widespread rioting and violence | Martial law",
                "Single large state or severe destabilization of several",
                "Severe global breakdown of social order and governance structures in dozens of countries",
                "Widespread civilizational collapse",
            ],
        ),
        row(
            HarmDimension::OtherExamples,
            [
                "A bad multi-car crash | A $20MM theft",
                "A plane crash | A $500MM scam",
                "The 9/11 Terrorist Attack | Hurricane Katrina",
                "The Iraq War | Brexit | A Smoot-Hawley Tariff Act equivalent",
                "Pandemic on a scale worse than Covid-19 | WW2",
                "A long-incubation Ebola Pandemic | WW3",
            ],
        ),
    ]
}

pub fn ll_reference_examples(ll: LikelihoodLevel) -> [&'static str; 2] {
    match ll.0 {
        8 => [
            "Rolling a 6 on a six-sided die",
            "A major league baseball player hitting a home run in a given at-bat",
        ],
        7 => [
            "Flipping a coin and getting heads 7 times in a row",
            "A professional basketball player making 14 free throws in a row",
        ],
        6 => [
            "Rolling two 6s on two six-sided dice three times in a row",
            "A mediocre bowler bowls a perfect game in a single game",
        ],
        5 => [
            "A natural pregnancy resulting in triplets",
            "Being dealt a straight flush in poker on the initial deal",
        ],
        4 => [
            "A random human is albino",
            "Being dealt four of a kind in poker",
        ],
        3 => [
            "Being dealt a royal flush in poker on the initial deal",
            "Making a hole-in-one while golfing as an amateur in a single game",
        ],
        2 => [
            "A random human is struck by lightning in a given year",
            "Flipping a coin and getting heads 20 times in a row",
        ],
        1 => [
            "Earth being hit by a dinosaur-killing asteroid in a given year",
            "Winning a major lottery jackpot on a single ticket",
        ],
        _ => ["Provably impossible", "Creating a perpetual motion machine"],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hsl(v: u8) -> HarmSeverityLevel {
        HarmSeverityLevel::new(v).unwrap()
    }
    fn ll(v: u8) -> LikelihoodLevel {
        LikelihoodLevel::new(v).unwrap()
    }

    #[test]
    fn matrix_examples() {
        assert_eq!(risk_level(hsl(3), ll(7)).value(), 6);
        assert_eq!(risk_level(hsl(6), ll(0)).value(), 0);
        assert_eq!(risk_level(hsl(1), ll(8)).value(), 4);
    }

    #[test]
    fn matrix_is_monotone_and_ll0_is_zero() {
        for l in LikelihoodLevel::all() {
            for h in HarmSeverityLevel::all() {
                let rl = risk_level(h, l);
                if l.value() == 0 {
                    assert_eq!(rl.value(), 0);
                }
                if h.value() < 6 {
                    assert!(risk_level(hsl(h.value() + 1), l) >= rl);
                }
                if l.value() < 8 {
                    assert!(risk_level(h, ll(l.value() + 1)) >= rl);
                }
            }
        }
    }

    #[test]
    fn level_ranges_are_enforced() {
        assert!(HarmSeverityLevel::new(0).is_err());
        assert!(HarmSeverityLevel::new(7).is_err());
        assert!(LikelihoodLevel::new(9).is_err());
        assert!(serde_json::from_str::<LikelihoodLevel>("-1").is_err());
        assert_eq!(serde_json::to_string(&hsl(4)).unwrap(), "4");
    }

    #[test]
    fn band_examples() {
        assert_eq!(
            ll_band(ll(8)),
            OddsBand {
                lower: 0.1,
                upper: 1.0
            }
        );
        assert_eq!(
            ll_band(ll(4)),
            OddsBand {
                lower: 1e-5,
                upper: 1e-4
            }
        );
        assert_eq!(ll_band(ll(0)).upper, 1e-12);
        assert_eq!(
            ll_band(ll(1)),
            OddsBand {
                lower: 1e-8,
                upper: 1e-7
            }
        );
    }

    #[test]
    fn banding_examples() {
        assert_eq!(
            ll_from_probability(0.5).unwrap(),
            Banding {
                level: ll(8),
                annotation: None
            }
        );
        // Band edges belong to the band they open.
        assert_eq!(ll_from_probability(1e-4).unwrap().level, ll(5));
        assert_eq!(
            ll_from_probability(1e-4f64.next_down()).unwrap().level,
            ll(4)
        );
        assert_eq!(
            ll_from_probability(1e-8).unwrap(),
            Banding {
                level: ll(1),
                annotation: None
            }
        );
        assert_eq!(ll_from_probability(1.0).unwrap().level, ll(8));
        assert_eq!(
            ll_from_probability(1e-10).unwrap(),
            Banding {
                level: ll(1),
                annotation: Some(BandAnnotation::BelowBand)
            }
        );
        assert_eq!(ll_from_probability(1e-12).unwrap().level, ll(0));
        assert!(ll_from_probability(0.0).is_err());
        assert!(ll_from_probability(1.5).is_err());
        assert!(ll_from_probability(f64::NAN).is_err());
    }

    #[test]
    fn composition_examples() {
        assert_eq!(compose_sequential(&[]), ProbabilityInterval::CERTAIN);
        let p = compose_sequential(&[
            ProbabilityInterval::CERTAIN,
            ProbabilityInterval::new(0.1, 1.0).unwrap(),
        ]);
        assert_eq!((p.lo(), p.hi()), (0.1, 1.0));
        let seven = ProbabilityInterval::from_level(ll(7));
        let p = compose_sequential(&[seven, seven]);
        assert!((p.lo() - 1e-4).abs() <= 1e-4 * 1e-12);
        assert!((p.hi() - 1e-2).abs() <= 1e-2 * 1e-12);
    }

    #[test]
    fn conservative_examples() {
        let iv = |lo, hi| ProbabilityInterval::new(lo, hi).unwrap();
        // 1e-2 is the lower limit of LL-7 under lower-inclusive bands.
        assert_eq!(ll_conservative(iv(1e-4, 1e-2)).unwrap(), ll(7));
        assert_eq!(ll_conservative(iv(1e-6, 1e-3)).unwrap(), ll(6));
        assert_eq!(ll_conservative(iv(0.2, 0.9)).unwrap(), ll(8));
        assert_eq!(ll_conservative(iv(1e-13, 1e-13)).unwrap(), ll(0));
        assert_eq!(
            ll_conservative(iv(0.0, 0.0)),
            Err(CalculusError::ZeroUpperBound)
        );
        // An upper bound one ulp under a band edge snaps onto the edge.
        let below = 1e-6f64.next_down();
        assert_eq!(ll_conservative(iv(below, below)).unwrap(), ll(3));
        assert_eq!(ll_from_probability(below).unwrap().level, ll(2));
    }

    #[test]
    fn threshold_formula() {
        let raw: Vec<_> = (1..=5).map(|n| hsl_raw_product(n).unwrap()).collect();
        assert_eq!(raw, [21, 714, 39_270, 3_495_030, 503_284_320]);
        let rounded: Vec<_> = (1..=5).map(|n| hsl_upper_threshold(n).unwrap()).collect();
        assert_eq!(rounded, [20, 700, 40_000, 3_500_000, 500_000_000]);
        assert_eq!(
            hsl_upper_threshold(0),
            Err(CalculusError::ThresholdIndex(0))
        );
        assert_eq!(
            hsl_upper_threshold(6),
            Err(CalculusError::ThresholdIndex(6))
        );
        // Deaths row lower bounds of HSL-2..=6 are the formula's upper ends.
        for n in 1..=5u32 {
            assert_eq!(
                DEATHS_TABLE.thresholds[n as usize],
                hsl_upper_threshold(n).unwrap() as f64
            );
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(
            hsl_for_metric(HarmDimension::Deaths, 25.0).unwrap(),
            Some(hsl(2))
        );
        assert_eq!(
            hsl_for_metric(HarmDimension::DollarDamage, 1e7).unwrap(),
            Some(hsl(1))
        );
        assert_eq!(hsl_for_metric(HarmDimension::Deaths, 0.0).unwrap(), None);
        assert_eq!(
            hsl_for_metric(HarmDimension::Deaths, 6e8).unwrap(),
            Some(hsl(6))
        );
        assert_eq!(
            hsl_for_metric(HarmDimension::JobDisplacement, 10.0),
            Err(CalculusError::NonNumericDimension(
                HarmDimension::JobDisplacement
            ))
        );
        assert!(hsl_for_metric(HarmDimension::Deaths, -1.0).is_err());
    }

    #[test]
    fn threshold_tables_strictly_increase() {
        for table in [DEATHS_TABLE, DOLLAR_TABLE] {
            assert!(table.thresholds.windows(2).all(|w| w[0] < w[1]));
        }
        let rows = hsl_reference_rows();
        assert_eq!(rows.len(), HarmDimension::ALL.len());
        assert!(rows
            .iter()
            .find(|r| r.dimension == HarmDimension::JobDisplacement)
            .unwrap()
            .anomaly
            .is_some());
    }
}
