use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::pdw::PulseDescriptorWord;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriMode {
    Constant,
    Jittered,
    Staggered,
    Sliding,
}

impl PriMode {
    pub const ALL: [PriMode; 4] = [
        PriMode::Constant,
        PriMode::Jittered,
        PriMode::Staggered,
        PriMode::Sliding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriMode::Constant => "constant",
            PriMode::Jittered => "jittered",
            PriMode::Staggered => "staggered",
            PriMode::Sliding => "sliding",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqMode {
    Fixed,
    Hopping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub pri_mode: PriMode,
    /// Seconds.
    pub pri_base: f64,
    /// Jittered PRIs are `pri_base * (1 + u)`, `u` uniform in `±pri_jitter_frac`.
    pub pri_jitter_frac: f64,
    /// Seconds, cycled in order.
    pub stagger_pattern: Vec<f64>,
    pub slide_frac: f64,
    pub slide_steps: usize,
    pub freq_mode: FreqMode,
    /// Hertz.
    pub freq_center: f64,
    /// Hertz; each pulse picks one uniformly.
    pub freq_hop_set: Vec<f64>,
    /// Relative Gaussian measurement noise on the carrier.
    pub freq_jitter_frac: f64,
    /// Seconds.
    pub pw: f64,
    pub pw_jitter_frac: f64,
    /// Degrees.
    pub aoa_mean: f64,
    pub aoa_std: f64,
    /// dB.
    pub amplitude_mean: f64,
    pub amplitude_std: f64,
    pub drop_prob: f64,
    /// Time of the first pulse, seconds.
    pub toa_offset: f64,
}

impl EmitterSpec {
    /// A constant-PRI, fixed-carrier emitter with noiseless features.
    pub fn constant(pri: f64, freq: f64, pw: f64, aoa: f64, amplitude: f64) -> Self {
        Self {
            pri_mode: PriMode::Constant,
            pri_base: pri,
            pri_jitter_frac: 0.0,
            stagger_pattern: Vec::new(),
            slide_frac: 0.0,
            slide_steps: 1,
            freq_mode: FreqMode::Fixed,
            freq_center: freq,
            freq_hop_set: Vec::new(),
            freq_jitter_frac: 0.0,
            pw,
            pw_jitter_frac: 0.0,
            aoa_mean: aoa,
            aoa_std: 0.0,
            amplitude_mean: amplitude,
            amplitude_std: 0.0,
            drop_prob: 0.0,
            toa_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("emitter: {m}")));
        if !(self.pri_base > 0.0 && self.pri_base.is_finite()) {
            return bad("pri_base must be positive");
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return bad("drop_prob must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.pri_jitter_frac) || !(0.0..1.0).contains(&self.pw_jitter_frac) {
            return bad("jitter fractions must lie in [0, 1)");
        }
        match self.pri_mode {
            PriMode::Staggered if self.stagger_pattern.is_empty() => return bad("stagger_pattern is empty"),
            PriMode::Staggered if self.stagger_pattern.iter().any(|p| !(*p > 0.0)) => {
                return bad("stagger intervals must be positive")
            }
            PriMode::Sliding if self.slide_steps == 0 || self.slide_frac < 0.0 => return bad("invalid slide"),
            _ => {}
        }
        if self.freq_mode == FreqMode::Hopping
            && (self.freq_hop_set.is_empty() || self.freq_hop_set.iter().any(|f| !(*f > 0.0)))
        {
            return bad("hop set must be non-empty and positive");
        }
        if !(self.freq_center > 0.0) || !(self.pw > 0.0) || self.toa_offset < 0.0 {
            return bad("freq_center and pw must be positive and toa_offset non-negative");
        }
        if self.aoa_std < 0.0 || self.amplitude_std < 0.0 || self.freq_jitter_frac < 0.0 {
            return bad("deviations must be non-negative");
        }
        Ok(())
    }

    /// Long-run average PRI in seconds.
    pub fn mean_pri(&self) -> f64 {
        match self.pri_mode {
            PriMode::Constant | PriMode::Jittered => self.pri_base,
            PriMode::Staggered => self.stagger_pattern.iter().sum::<f64>() / self.stagger_pattern.len() as f64,
            PriMode::Sliding => {
                let s = self.slide_steps as f64;
                self.pri_base * (1.0 + self.slide_frac * (s - 1.0) / (2.0 * s))
            }
        }
    }

    /// Expected retained pulses per second.
    pub fn pulse_rate(&self) -> f64 {
        (1.0 - self.drop_prob) / self.mean_pri()
    }

    fn interval<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        match self.pri_mode {
            PriMode::Constant => self.pri_base,
            PriMode::Jittered => {
                let j = self.pri_jitter_frac;
                let u = if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
                self.pri_base * (1.0 + u)
            }
            PriMode::Staggered => self.stagger_pattern[k % self.stagger_pattern.len()],
            PriMode::Sliding => {
                let s = self.slide_steps;
                self.pri_base * (1.0 + self.slide_frac * (k % s) as f64 / s as f64)
            }
        }
    }
}

fn pick_mode<R: Rng + ?Sized>(weights: [f64; 4], rng: &mut R) -> PriMode {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (mode, w) in PriMode::ALL.into_iter().zip(weights) {
        if u < w {
            return mode;
        }
        u -= w;
    }
    PriMode::ALL
        .into_iter()
        .zip(weights)
        .rev()
        .find(|(_, w)| *w > 0.0)
        .map(|(m, _)| m)
        .unwrap_or(PriMode::Constant)
}

/// Draws one emitter from the configured ranges. Every field is sampled in a
/// fixed order regardless of mode, so the RNG advances identically.
pub fn sample_emitter<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<EmitterSpec> {
    config.validate()?;
    let pri_mode = pick_mode(config.pri_mode_weights.as_array(), rng);
    let pri_base = config.pri_base.sample(rng);
    let pri_jitter_frac = config.pri_jitter_frac.sample(rng);
    let levels = config.stagger_levels.sample(rng);
    let stagger: Vec<f64> = (0..levels)
        .map(|_| pri_base * (1.0 + config.stagger_spread.sample(rng)))
        .collect();
    let slide_frac = config.slide_frac.sample(rng);
    let slide_steps = config.slide_steps.sample(rng);
    let hopping = rng.gen::<f64>() < config.freq_hop_prob;
    let freq_center = config.freq_center.sample(rng);
    let hops = config.freq_hop_count.sample(rng);
    let hop_set: Vec<f64> = (0..hops)
        .map(|_| freq_center * (1.0 + config.freq_hop_spread.sample(rng)))
        .collect();
    let spec = EmitterSpec {
        pri_mode,
        pri_base,
        pri_jitter_frac: if pri_mode == PriMode::Jittered {
            pri_jitter_frac
        } else {
            0.0
        },
        stagger_pattern: if pri_mode == PriMode::Staggered {
            stagger
        } else {
            Vec::new()
        },
        slide_frac,
        slide_steps,
        freq_mode: if hopping { FreqMode::Hopping } else { FreqMode::Fixed },
        freq_center,
        freq_hop_set: if hopping { hop_set } else { Vec::new() },
        freq_jitter_frac: config.freq_jitter_frac.sample(rng),
        pw: config.pw.sample(rng),
        pw_jitter_frac: config.pw_jitter_frac.sample(rng),
        aoa_mean: config.aoa_mean.sample(rng),
        aoa_std: config.aoa_std.sample(rng),
        amplitude_mean: config.amplitude_mean.sample(rng),
        amplitude_std: config.amplitude_std.sample(rng),
        drop_prob: config.drop_prob.sample(rng),
        toa_offset: rng.gen::<f64>() * pri_base,
    };
    spec.validate()?;
    Ok(spec)
}

fn gaussian<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    if std > 0.0 {
        Normal::new(mean, std).expect("finite positive std").sample(rng)
    } else {
        mean
    }
}

/// All pulses with ToA in `[toa_offset, t_end)`. Dropped pulses still consume
/// their PRI slot.
pub fn generate_emitter_pulses<R: Rng + ?Sized>(
    spec: &EmitterSpec,
    t_end: f64,
    rng: &mut R,
) -> Vec<PulseDescriptorWord> {
    let mut out = Vec::with_capacity(((t_end / spec.mean_pri()).max(0.0) as usize).saturating_add(1));
    let mut toa = spec.toa_offset;
    let mut k = 0usize;
    while toa < t_end {
        if spec.drop_prob == 0.0 || rng.gen::<f64>() >= spec.drop_prob {
            let carrier = match spec.freq_mode {
                FreqMode::Fixed => spec.freq_center,
                FreqMode::Hopping => spec.freq_hop_set[rng.gen_range(0..spec.freq_hop_set.len())],
            };
            let frequency = gaussian(carrier, carrier * spec.freq_jitter_frac, rng)
                .abs()
                .max(f64::MIN_POSITIVE);
            let j = spec.pw_jitter_frac;
            let pw = spec.pw * (1.0 + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 });
            let aoa = gaussian(spec.aoa_mean, spec.aoa_std, rng).rem_euclid(360.0);
            // rem_euclid can round up to exactly 360.
            let aoa = if aoa >= 360.0 { 0.0 } else { aoa };
            let amplitude = gaussian(spec.amplitude_mean, spec.amplitude_std, rng);
            out.push(PulseDescriptorWord {
                toa,
                frequency,
                pulse_width: pw,
                aoa,
                amplitude,
            });
        }
        toa += spec.interval(k, rng);
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::FloatRange;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_pri_spacing() {
        let spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 10.0, -50.0);
        let pulses = generate_emitter_pulses(&spec, 10e-3, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(pulses.len(), 10);
        for w in pulses.windows(2) {
            assert!((w[1].toa - w[0].toa - 1e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn stagger_alternates() {
        let mut spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 10.0, -50.0);
        spec.pri_mode = PriMode::Staggered;
        spec.stagger_pattern = vec![1e-3, 2e-3];
        let pulses = generate_emitter_pulses(&spec, 30e-3, &mut ChaCha8Rng::seed_from_u64(0));
        let d: Vec<f64> = pulses.windows(2).map(|w| w[1].toa - w[0].toa).collect();
        for (i, di) in d.iter().enumerate() {
            let want = if i % 2 == 0 { 1e-3 } else { 2e-3 };
            assert!((di - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sliding_is_a_sawtooth() {
        let mut spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 10.0, -50.0);
        spec.pri_mode = PriMode::Sliding;
        spec.slide_frac = 1.0;
        spec.slide_steps = 4;
        let pulses = generate_emitter_pulses(&spec, 20e-3, &mut ChaCha8Rng::seed_from_u64(0));
        let d: Vec<f64> = pulses.windows(2).map(|w| w[1].toa - w[0].toa).collect();
        for (k, dk) in d.iter().enumerate() {
            assert!((dk - 1e-3 * (1.0 + (k % 4) as f64 / 4.0)).abs() < 1e-12);
        }
        assert!((spec.mean_pri() - 1e-3 * 1.375).abs() < 1e-15);
    }

    #[test]
    fn drop_probability_matches_retained_fraction() {
        let mut spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 10.0, -50.0);
        spec.drop_prob = 0.2;
        let pulses = generate_emitter_pulses(&spec, 100.0, &mut ChaCha8Rng::seed_from_u64(3));
        let frac = pulses.len() as f64 / 1e5;
        assert!((frac - 0.8).abs() < 0.01, "{frac}");
    }

    #[test]
    fn hopping_uses_only_the_hop_set() {
        let mut spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 10.0, -50.0);
        spec.freq_mode = FreqMode::Hopping;
        spec.freq_hop_set = vec![8e9, 9e9, 10e9];
        let pulses = generate_emitter_pulses(&spec, 0.1, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(pulses.iter().all(|p| spec.freq_hop_set.contains(&p.frequency)));
        for f in &spec.freq_hop_set {
            assert!(pulses.iter().any(|p| p.frequency == *f));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let cfg = ScenarioConfig::desk();
        let a = sample_emitter(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_emitter(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let mut cfg = ScenarioConfig::desk();
        cfg.pri_base = FloatRange::new(1e-4, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let s = sample_emitter(&cfg, &mut rng).unwrap();
            assert!(cfg.pri_base.contains(s.pri_base));
        }
    }

    #[test]
    fn collapsed_ranges_give_the_point() {
        let mut cfg = ScenarioConfig::desk();
        cfg.pri_base = FloatRange::point(5e-4);
        cfg.aoa_mean = FloatRange::point(42.0);
        cfg.pw = FloatRange::point(2e-6);
        let s = sample_emitter(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!((s.pri_base, s.aoa_mean, s.pw), (5e-4, 42.0, 2e-6));
    }

    #[test]
    fn features_are_valid_pdws() {
        let cfg = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut s = sample_emitter(&cfg, &mut rng).unwrap();
            s.aoa_mean = 359.9;
            s.aoa_std = 5.0;
            for p in generate_emitter_pulses(&s, 0.02, &mut rng) {
                p.validate().unwrap();
            }
        }
    }
}
