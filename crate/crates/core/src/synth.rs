//! Seeded generator of labeled accelerometer streams with puffs and distractors.
//!
//! Units are normalized g. At rest the wrist reads roughly `(0, 0, 1)`; at the
//! lips the gravity component has rotated onto the x/y plane.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::{MiniGesture, Sample, SampleStream, WindowSpec, DEFAULT_SAMPLE_RATE_HZ, NUM_CLASSES};
use crate::grammar::PuffEvent;
use crate::numerics::{derive_seed, rng_from_seed, SeededRng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub puffs: usize,
    pub distractors: usize,
    /// Per-axis Gaussian noise standard deviation.
    pub noise_sigma: f64,
    /// Hand-on-lip duration range in seconds, drawn uniformly.
    pub hol_range_s: (f64, f64),
    /// Duration of the raise and the descent.
    pub ramp_s: f64,
    /// Rest gap before, between and after activities.
    pub rest_range_s: (f64, f64),
    pub distractor_range_s: (f64, f64),
    /// Amplitude of the slow sinusoidal drift at rest.
    pub rest_drift: f64,
    /// Peak amplitude of distractor motion.
    pub distractor_amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            puffs: 12,
            distractors: 4,
            noise_sigma: 0.05,
            hol_range_s: (0.5, 3.0),
            ramp_s: 0.8,
            rest_range_s: (4.0, 8.0),
            distractor_range_s: (2.0, 5.0),
            rest_drift: 0.05,
            distractor_amplitude: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.sample_rate_hz) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        for (name, (lo, hi)) in [
            ("hol range", self.hol_range_s),
            ("rest range", self.rest_range_s),
            ("distractor range", self.distractor_range_s),
        ] {
            if !(pos(lo) && pos(hi) && lo <= hi) {
                return bad(format!("{name} must satisfy 0 < lo <= hi, got ({lo}, {hi})"));
            }
        }
        let (lo, hi) = self.hol_range_s;
        if (lo * self.sample_rate_hz).ceil() > (hi * self.sample_rate_hz).floor() {
            return bad(format!("hol range ({lo}, {hi}) contains no whole sample count"));
        }
        if !pos(self.ramp_s) || self.ramp_len() == 0 {
            return bad(format!("ramp duration must cover at least one sample, got {}", self.ramp_s));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(self.rest_drift.is_finite() && self.distractor_amplitude.is_finite()) {
            return bad("amplitudes must be finite".into());
        }
        Ok(())
    }

    pub fn ramp_len(&self) -> usize {
        (self.ramp_s * self.sample_rate_hz).round() as usize
    }

    fn samples(&self, seconds: f64) -> usize {
        ((seconds * self.sample_rate_hz).round() as usize).max(1)
    }

    fn hol_sample_range(&self) -> (usize, usize) {
        let (lo, hi) = self.hol_range_s;
        let r = self.sample_rate_hz;
        ((lo * r).ceil() as usize, (hi * r).floor() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Rest,
    Distractor,
    HandToLip,
    HandOnLip,
    HandOffLip,
}

impl SegmentKind {
    pub fn label(self) -> MiniGesture {
        match self {
            SegmentKind::Rest | SegmentKind::Distractor => MiniGesture::NonSmoking,
            SegmentKind::HandToLip => MiniGesture::HandToLip,
            SegmentKind::HandOnLip => MiniGesture::HandOnLip,
            SegmentKind::HandOffLip => MiniGesture::HandOffLip,
        }
    }
}

/// A contiguous run of samples `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub len: usize,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub stream: SampleStream,
    pub plan: Vec<Segment>,
    pub truth: Vec<PuffEvent>,
}

/// Segment layout: rest, then puffs and distractors in shuffled order, each
/// followed by rest.
pub fn plan(config: &SynthConfig) -> Result<Vec<Segment>, SynthError> {
    config.validate()?;
    let mut rng = rng_from_seed(derive_seed(config.seed, "plan"));
    let mut activities = vec![true; config.puffs];
    activities.extend(std::iter::repeat_n(false, config.distractors));
    activities.shuffle(&mut rng);

    let ramp = config.ramp_len();
    let (hol_lo, hol_hi) = config.hol_sample_range();
    let mut segments = Vec::new();
    let mut cursor = 0;
    let mut push = |kind, len: usize, segments: &mut Vec<Segment>| {
        segments.push(Segment { kind, start: cursor, len });
        cursor += len;
    };
    let rest_len = |rng: &mut SeededRng| {
        let (lo, hi) = config.rest_range_s;
        config.samples(rng.random_range(lo..=hi))
    };

    push(SegmentKind::Rest, rest_len(&mut rng), &mut segments);
    for is_puff in activities {
        if is_puff {
            let (lo, hi) = config.hol_range_s;
            let hol = config.samples(rng.random_range(lo..=hi)).clamp(hol_lo, hol_hi);
            push(SegmentKind::HandToLip, ramp, &mut segments);
            push(SegmentKind::HandOnLip, hol, &mut segments);
            push(SegmentKind::HandOffLip, ramp, &mut segments);
        } else {
            let (lo, hi) = config.distractor_range_s;
            push(SegmentKind::Distractor, config.samples(rng.random_range(lo..=hi)), &mut segments);
        }
        push(SegmentKind::Rest, rest_len(&mut rng), &mut segments);
    }
    Ok(segments)
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

struct Wave {
    freq_hz: f64,
    phase: f64,
    amp: f64,
}

impl Wave {
    fn at(&self, t: f64) -> f64 {
        self.amp * (TAU * self.freq_hz * t + self.phase).sin()
    }
}

fn random_wave(rng: &mut SeededRng, freq: (f64, f64), amp: f64) -> Wave {
    Wave {
        freq_hz: rng.random_range(freq.0..=freq.1),
        phase: rng.random_range(0.0..TAU),
        amp: rng.random_range(0.0..=amp.abs()),
    }
}

/// Rest pose with slow drift.
fn rest_pose(drift: &[Wave; 3], t: f64) -> [f64; 3] {
    [drift[0].at(t), drift[1].at(t), 1.0 + drift[2].at(t)]
}

/// Pose at the lips, rotated in the x/y plane by `theta`.
fn lip_pose(theta: f64) -> [f64; 3] {
    [0.9 * theta.cos(), 0.9 * theta.sin(), 0.1]
}

fn blend(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s, a[2] + (b[2] - a[2]) * s]
}

/// Noise-free signal for one segment, appended to `out`.
fn render_segment(
    seg: &Segment,
    config: &SynthConfig,
    drift: &[Wave; 3],
    theta: f64,
    rng: &mut SeededRng,
    out: &mut Vec<[f64; 3]>,
) {
    let rate = config.sample_rate_hz;
    let t = |i: usize| (seg.start + i) as f64 / rate;
    match seg.kind {
        SegmentKind::Rest => out.extend((0..seg.len).map(|i| rest_pose(drift, t(i)))),
        SegmentKind::Distractor => {
            let amp = config.distractor_amplitude;
            let waves: Vec<[Wave; 3]> = (0..3)
                .map(|_| std::array::from_fn(|_| random_wave(rng, (0.5, 2.0), amp / 3.0)))
                .collect();
            let slope: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.2..=0.2));
            out.extend((0..seg.len).map(|i| {
                let base = rest_pose(drift, t(i));
                let frac = i as f64 / seg.len as f64;
                std::array::from_fn(|a| {
                    let band: f64 = waves.iter().map(|w| w[a].at(t(i))).sum();
                    base[a] + band + slope[a] * frac
                })
            }));
        }
        SegmentKind::HandToLip | SegmentKind::HandOffLip => {
            let rising = seg.kind == SegmentKind::HandToLip;
            out.extend((0..seg.len).map(|i| {
                let k = if rising { i } else { seg.len - 1 - i };
                let s = smoothstep((k as f64 + 0.5) / seg.len as f64);
                blend(rest_pose(drift, t(i)), lip_pose(theta), s)
            }));
        }
        SegmentKind::HandOnLip => {
            let jitter: [Wave; 3] = std::array::from_fn(|_| random_wave(rng, (2.0, 4.0), 0.03));
            let lip = lip_pose(theta);
            out.extend((0..seg.len).map(|i| std::array::from_fn(|a| lip[a] + jitter[a].at(t(i)))));
        }
    }
}

/// Ground-truth puffs in the per-sample token convention: each puff spans
/// from its first raise sample to the first descent sample.
pub fn truth_events(plan: &[Segment], sample_rate_hz: f64) -> Vec<PuffEvent> {
    plan.windows(3)
        .filter(|w| {
            w[0].kind == SegmentKind::HandToLip
                && w[1].kind == SegmentKind::HandOnLip
                && w[2].kind == SegmentKind::HandOffLip
        })
        .map(|w| PuffEvent {
            start_sample: w[0].start,
            end_sample: w[2].start,
            hol_duration_s: w[1].len as f64 / sample_rate_hz,
            token_span: (w[0].start, w[2].start),
        })
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<SynthOutput, SynthError> {
    let plan = plan(config)?;
    let mut shape_rng = rng_from_seed(derive_seed(config.seed, "shape"));
    let drift: [Wave; 3] = std::array::from_fn(|_| random_wave(&mut shape_rng, (0.02, 0.1), config.rest_drift));

    let total = plan.last().map_or(0, Segment::end);
    let mut clean = Vec::with_capacity(total);
    let mut theta = 0.0;
    for seg in &plan {
        if seg.kind == SegmentKind::HandToLip {
            theta = shape_rng.random_range(-0.4..=0.4);
        }
        render_segment(seg, config, &drift, theta, &mut shape_rng, &mut clean);
    }

    let mut noise_rng = rng_from_seed(derive_seed(config.seed, "noise"));
    let normal = Normal::new(0.0, config.noise_sigma).map_err(|e| SynthError::Config(e.to_string()))?;
    let mut samples = Vec::with_capacity(total);
    for seg in &plan {
        for i in seg.start..seg.end() {
            let [x, y, z] = clean[i];
            let mut n = || if config.noise_sigma > 0.0 { normal.sample(&mut noise_rng) } else { 0.0 };
            samples.push(Sample {
                t: i as f64 / config.sample_rate_hz,
                ax: x + n(),
                ay: y + n(),
                az: z + n(),
                label: Some(seg.kind.label()),
            });
        }
    }
    Ok(SynthOutput {
        stream: SampleStream::new(format!("synth-{}", config.seed), samples),
        truth: truth_events(&plan, config.sample_rate_hz),
        plan,
    })
}

/// Per-class window counts predicted from segment geometry alone.
///
/// Each window takes the class with the most overlapping samples; ties go to
/// the smoking class with the lowest id, or to non-smoking if none is tied.
pub fn expected_window_counts(plan: &[Segment], spec: &WindowSpec) -> [usize; NUM_CLASSES] {
    let total = plan.last().map_or(0, Segment::end);
    let mut counts = [0usize; NUM_CLASSES];
    if total < spec.window || spec.stride == 0 {
        return counts;
    }
    let mut first_seg = 0;
    let mut start = 0;
    while start + spec.window <= total {
        let end = start + spec.window;
        while plan[first_seg].end() <= start {
            first_seg += 1;
        }
        let mut overlap = [0usize; NUM_CLASSES];
        for seg in plan[first_seg..].iter().take_while(|s| s.start < end) {
            overlap[seg.kind.label().index()] += seg.end().min(end) - seg.start.max(start);
        }
        let best = *overlap.iter().max().expect("non-empty");
        let winner = (1..NUM_CLASSES).find(|&c| overlap[c] == best).unwrap_or(0);
        counts[winner] += 1;
        start += spec.stride;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_puff(noise: f64) -> SynthConfig {
        SynthConfig {
            seed: 3,
            puffs: 1,
            distractors: 0,
            noise_sigma: noise,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn zero_noise_single_puff_follows_plan() {
        let out = generate(&one_puff(0.0)).unwrap();
        assert_eq!(out.plan.len(), 5);
        for seg in &out.plan {
            for s in &out.stream.samples[seg.start..seg.end()] {
                assert_eq!(s.label, Some(seg.kind.label()));
            }
        }
        assert_eq!(out.stream.len(), out.plan[4].end());
        assert_eq!(generate(&one_puff(0.0)).unwrap(), out);
        let lip = out.stream.samples[out.plan[2].start];
        assert!(lip.az < 0.2, "{lip:?}");
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg };
        assert_ne!(generate(&other).unwrap().stream, generate(&SynthConfig::default()).unwrap().stream);
    }

    #[test]
    fn ten_puffs_within_range() {
        let cfg = SynthConfig {
            puffs: 10,
            hol_range_s: (1.0, 2.0),
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.truth.len(), 10);
        assert!(out.truth.iter().all(|e| (1.0..=2.0).contains(&e.hol_duration_s)));
    }

    #[test]
    fn ramps_last_point_eight_seconds() {
        let out = generate(&SynthConfig::default()).unwrap();
        for seg in out.plan.iter().filter(|s| matches!(s.kind, SegmentKind::HandToLip | SegmentKind::HandOffLip)) {
            assert_eq!(seg.len, 20);
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = [
            SynthConfig { noise_sigma: -1.0, ..SynthConfig::default() },
            SynthConfig { hol_range_s: (2.0, 1.0), ..SynthConfig::default() },
            SynthConfig { hol_range_s: (0.0, 1.0), ..SynthConfig::default() },
            SynthConfig { hol_range_s: (0.5, 0.51), ..SynthConfig::default() },
            SynthConfig { sample_rate_hz: 0.0, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn expected_counts_hand_case() {
        // 30 rest, 20 raise, 15 hold, 20 descent, 30 rest; window 20, stride 1.
        let kinds = [
            (SegmentKind::Rest, 30),
            (SegmentKind::HandToLip, 20),
            (SegmentKind::HandOnLip, 15),
            (SegmentKind::HandOffLip, 20),
            (SegmentKind::Rest, 30),
        ];
        let mut start = 0;
        let plan: Vec<Segment> = kinds
            .iter()
            .map(|&(kind, len)| {
                let s = Segment { kind, start, len };
                start += len;
                s
            })
            .collect();
        let counts = expected_window_counts(&plan, &WindowSpec::default());
        assert_eq!(counts.iter().sum::<usize>(), 115 - 19);
        // Rest wins windows starting 0..=19 and 76..=95; ties at 20 and 75 go to the gesture.
        assert_eq!(counts[0], 20 + 20);
        assert!(counts[2] > 0);
    }
}
