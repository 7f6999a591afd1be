use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Closed interval `[lo, hi]`, written as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct FloatRange {
    pub lo: f64,
    pub hi: f64,
}

impl FloatRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(Error::Config(format!("{name}: empty range [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl From<[f64; 2]> for FloatRange {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<FloatRange> for [f64; 2] {
    fn from(r: FloatRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Closed integer interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub const fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.lo > self.hi {
            return Err(Error::Config(format!("{name}: empty range [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(self.lo..=self.hi)
    }
}

impl From<[usize; 2]> for IntRange {
    fn from([lo, hi]: [usize; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<IntRange> for [usize; 2] {
    fn from(r: IntRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Relative frequency of each PRI mode; need not sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriModeWeights {
    pub constant: f64,
    pub jittered: f64,
    pub staggered: f64,
    pub sliding: f64,
}

impl PriModeWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.constant, self.jittered, self.staggered, self.sliding]
    }
}

impl Default for PriModeWeights {
    fn default() -> Self {
        Self {
            constant: 1.0,
            jittered: 1.0,
            staggered: 1.0,
            sliding: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub n_pulses_per_train: usize,
    pub emitter_count_range: IntRange,
    pub rng_seed: u64,
    pub n_trains: usize,
    /// Permits one-emitter trains, which are only useful for inference.
    #[serde(default)]
    pub allow_single_emitter: bool,

    pub pri_mode_weights: PriModeWeights,
    pub pri_base: FloatRange,
    pub pri_jitter_frac: FloatRange,
    /// Number of distinct intervals in a stagger pattern.
    pub stagger_levels: IntRange,
    /// Stagger intervals are `pri_base * (1 + u)`, `u` uniform in this range.
    pub stagger_spread: FloatRange,
    /// Sliding PRI ramps from `pri_base` to `pri_base * (1 + slide_frac)`.
    pub slide_frac: FloatRange,
    pub slide_steps: IntRange,

    pub freq_hop_prob: f64,
    pub freq_center: FloatRange,
    pub freq_hop_count: IntRange,
    /// Hop frequencies are `freq_center * (1 + u)`, `u` uniform in this range.
    pub freq_hop_spread: FloatRange,
    pub freq_jitter_frac: FloatRange,

    pub pw: FloatRange,
    pub pw_jitter_frac: FloatRange,
    pub aoa_mean: FloatRange,
    pub aoa_std: FloatRange,
    pub amplitude_mean: FloatRange,
    pub amplitude_std: FloatRange,
    pub drop_prob: FloatRange,
}

fn schema_version() -> u32 {
    SCENARIO_SCHEMA_VERSION
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.emitter_count_range.validate("emitter_count_range")?;
        let min_emitters = if self.allow_single_emitter { 1 } else { 2 };
        if self.emitter_count_range.lo < min_emitters {
            return Err(Error::Config(format!(
                "emitter_count_range must start at {min_emitters} or more, got {}",
                self.emitter_count_range.lo
            )));
        }
        if self.n_pulses_per_train < self.emitter_count_range.hi {
            return Err(Error::Config(format!(
                "n_pulses_per_train {} is below the maximum emitter count {}",
                self.n_pulses_per_train, self.emitter_count_range.hi
            )));
        }
        let w = self.pri_mode_weights.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "pri_mode_weights must be non-negative with a positive sum".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.freq_hop_prob) {
            return Err(Error::Config("freq_hop_prob must lie in [0, 1]".into()));
        }
        for (name, r) in [
            ("pri_base", self.pri_base),
            ("pri_jitter_frac", self.pri_jitter_frac),
            ("stagger_spread", self.stagger_spread),
            ("slide_frac", self.slide_frac),
            ("freq_center", self.freq_center),
            ("freq_hop_spread", self.freq_hop_spread),
            ("freq_jitter_frac", self.freq_jitter_frac),
            ("pw", self.pw),
            ("pw_jitter_frac", self.pw_jitter_frac),
            ("aoa_mean", self.aoa_mean),
            ("aoa_std", self.aoa_std),
            ("amplitude_mean", self.amplitude_mean),
            ("amplitude_std", self.amplitude_std),
            ("drop_prob", self.drop_prob),
        ] {
            r.validate(name)?;
        }
        for (name, r) in [
            ("stagger_levels", self.stagger_levels),
            ("slide_steps", self.slide_steps),
            ("freq_hop_count", self.freq_hop_count),
        ] {
            r.validate(name)?;
        }
        let positive = |name: &str, r: FloatRange| {
            if r.lo <= 0.0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("pri_base", self.pri_base)?;
        positive("freq_center", self.freq_center)?;
        positive("pw", self.pw)?;
        let unit = |name: &str, r: FloatRange, hi_open: bool| {
            let hi_ok = if hi_open { r.hi < 1.0 } else { r.hi <= 1.0 };
            if r.lo < 0.0 || !hi_ok {
                Err(Error::Config(format!("{name} out of bounds")))
            } else {
                Ok(())
            }
        };
        unit("drop_prob", self.drop_prob, true)?;
        unit("pri_jitter_frac", self.pri_jitter_frac, true)?;
        unit("pw_jitter_frac", self.pw_jitter_frac, true)?;
        if self.stagger_spread.lo <= -1.0 || self.freq_hop_spread.lo <= -1.0 {
            return Err(Error::Config("spreads must stay above -1".into()));
        }
        if self.slide_frac.lo < 0.0
            || self.aoa_std.lo < 0.0
            || self.amplitude_std.lo < 0.0
            || self.freq_jitter_frac.lo < 0.0
        {
            return Err(Error::Config("spreads and deviations must be non-negative".into()));
        }
        if self.aoa_mean.lo < 0.0 || self.aoa_mean.hi >= 360.0 {
            return Err(Error::Config("aoa_mean must lie in [0, 360)".into()));
        }
        if self.stagger_levels.lo < 1 || self.slide_steps.lo < 1 || self.freq_hop_count.lo < 1 {
            return Err(Error::Config(
                "stagger_levels, slide_steps and freq_hop_count start at 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always serialisable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Small trains with between 2 and 6 emitters. Carrier, pulse width and
    /// amplitude ranges overlap heavily; AoA and PRI carry most of the
    /// separating information.
    pub fn desk() -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION,
            n_pulses_per_train: 100,
            emitter_count_range: IntRange::new(2, 6),
            rng_seed: 1,
            n_trains: 2000,
            allow_single_emitter: false,
            pri_mode_weights: PriModeWeights::default(),
            pri_base: FloatRange::new(2e-4, 1e-3),
            pri_jitter_frac: FloatRange::new(0.05, 0.3),
            stagger_levels: IntRange::new(2, 4),
            stagger_spread: FloatRange::new(-0.5, 0.5),
            slide_frac: FloatRange::new(0.2, 1.0),
            slide_steps: IntRange::new(4, 16),
            freq_hop_prob: 0.3,
            freq_center: FloatRange::new(9.0e9, 10.0e9),
            freq_hop_count: IntRange::new(2, 5),
            freq_hop_spread: FloatRange::new(-0.05, 0.05),
            freq_jitter_frac: FloatRange::new(0.0, 0.002),
            pw: FloatRange::new(1e-6, 4e-6),
            pw_jitter_frac: FloatRange::new(0.0, 0.1),
            aoa_mean: FloatRange::new(0.0, 359.0),
            aoa_std: FloatRange::new(0.5, 3.0),
            amplitude_mean: FloatRange::new(-60.0, -45.0),
            amplitude_std: FloatRange::new(0.5, 2.0),
            drop_prob: FloatRange::new(0.0, 0.1),
        }
    }

    /// The full-size regime: 1000 pulses and between 2 and 20 emitters.
    pub fn paper() -> Self {
        Self {
            n_pulses_per_train: 1000,
            emitter_count_range: IntRange::new(2, 20),
            n_trains: 10_000,
            pri_base: FloatRange::new(1e-4, 1e-3),
            ..Self::desk()
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::desk()
    }
}
