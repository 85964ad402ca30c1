//! Deterministic synthetic multi-user data with a known generative
//! model: attention series plus per-category frame features whose
//! coupling to attention is controlled, so downstream accuracy can be
//! checked against closed-form values.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    write_attention, write_frame_features, AttentionSeries, FrameFeatureRecord, FrameFeatureStream,
};
use crate::types::Category;
use crate::util::{derive_seed, seeded_rng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("generated stream failed validation: {0}")]
    Validation(#[from] crate::ingest::IngestError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// How the per-second attention ground truth evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttentionModel {
    /// Bounded Gaussian random walk clipped to [0, 100]; excursions past
    /// the pooled percentiles form contiguous high/low episodes.
    RandomWalk { step_std: f64 },
    /// Piecewise-constant episodes at three fixed levels with exact
    /// state proportions. Keeps the label thresholds pinned inside the
    /// low/high tie blocks, which makes category accuracies analytic.
    Regimes {
        episode_seconds: usize,
        low_frac: f64,
        high_frac: f64,
        low_value: f64,
        mid_value: f64,
        high_value: f64,
        /// Episode state ordering; the cycle layout never puts two
        /// labeled episodes back to back, so no labeled window mixes
        /// two episode-noise draws.
        #[serde(default)]
        order: RegimeOrder,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeOrder {
    /// Seeded shuffle hitting the requested fractions.
    #[default]
    Shuffled,
    /// Fixed Low, Mid, High, Mid cycle (25% low, 25% high); the
    /// fraction fields are ignored.
    Cycle,
}

/// Attention coupling of one category. The signal lives in channel 0;
/// remaining channels are unit Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// High-minus-low class separation of the channel-0 mean (regimes),
    /// or slope against normalized attention (random walk).
    pub gain: f64,
    /// Noise redrawn once per episode (regimes only).
    pub episode_noise_std: f64,
    /// Per-second noise.
    pub second_noise_std: f64,
    /// Attention modulation of the per-second noise scale. A mean shift
    /// is invisible to the dynamics-based global descriptors; this makes
    /// the channel's variability itself carry the signal.
    #[serde(default)]
    pub dynamics_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_users: usize,
    pub session_seconds_min: usize,
    pub session_seconds_max: usize,
    pub frame_rate: f64,
    pub attention: AttentionModel,
    pub signals: BTreeMap<Category, SignalModel>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        // couplings ordered like the e-learning findings: eye state and
        // expression strongest, head geometry weak, heart rate weakest
        let gains = [
            (Category::Eb, 0.8),
            (Category::Ear, 0.7),
            (Category::Hs, 0.3),
            (Category::Ns, 0.3),
            (Category::Hp, 0.4),
            (Category::Exp, 0.9),
            (Category::H, 0.1),
        ];
        let signals = gains
            .into_iter()
            .map(|(c, gain)| {
                (
                    c,
                    SignalModel {
                        gain,
                        episode_noise_std: 0.0,
                        second_noise_std: 1.0,
                        dynamics_gain: 0.0,
                    },
                )
            })
            .collect();
        SynthSpec {
            n_users: 8,
            session_seconds_min: 900,
            session_seconds_max: 1800,
            frame_rate: 5.0,
            attention: AttentionModel::RandomWalk { step_std: 4.0 },
            signals,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(SynthError::InvalidSpec("n_users must be positive".into()));
        }
        if self.session_seconds_min == 0 || self.session_seconds_min > self.session_seconds_max {
            return Err(SynthError::InvalidSpec(
                "session seconds range must be positive and ordered".into(),
            ));
        }
        if !self.frame_rate.is_finite() || self.frame_rate <= 0.0 {
            return Err(SynthError::InvalidSpec("frame_rate must be positive".into()));
        }
        if self.signals.is_empty() {
            return Err(SynthError::InvalidSpec("at least one category signal".into()));
        }
        for s in self.signals.values() {
            if !(s.gain.is_finite() && s.episode_noise_std >= 0.0 && s.second_noise_std >= 0.0) {
                return Err(SynthError::InvalidSpec("bad signal model".into()));
            }
            if !(0.0..1.0).contains(&s.dynamics_gain) {
                return Err(SynthError::InvalidSpec("dynamics_gain must lie in [0, 1)".into()));
            }
        }
        if let AttentionModel::Regimes {
            episode_seconds,
            low_frac,
            high_frac,
            low_value,
            mid_value,
            high_value,
            ..
        } = &self.attention
        {
            if *episode_seconds == 0 {
                return Err(SynthError::InvalidSpec("episode_seconds must be positive".into()));
            }
            if !(*low_frac > 0.0 && *high_frac > 0.0 && low_frac + high_frac < 1.0) {
                return Err(SynthError::InvalidSpec("regime fractions must fit in (0, 1)".into()));
            }
            if !(low_value < mid_value && mid_value < high_value) {
                return Err(SynthError::InvalidSpec("regime values must be ordered".into()));
            }
            for v in [low_value, mid_value, high_value] {
                if !(0.0..=100.0).contains(v) {
                    return Err(SynthError::InvalidSpec("regime values must lie in [0, 100]".into()));
                }
            }
        } else if let AttentionModel::RandomWalk { step_std } = &self.attention {
            if !step_std.is_finite() || *step_std <= 0.0 {
                return Err(SynthError::InvalidSpec("step_std must be positive".into()));
            }
        }
        Ok(())
    }

    /// Convenience: the regime model used by the oracle-driven tests.
    pub fn regimes(episode_seconds: usize) -> AttentionModel {
        AttentionModel::Regimes {
            episode_seconds,
            low_frac: 0.25,
            high_frac: 0.25,
            low_value: 5.0,
            mid_value: 50.0,
            high_value: 95.0,
            order: RegimeOrder::Shuffled,
        }
    }

    /// Regime model with the non-adjacent cycle layout.
    pub fn regimes_cycle(episode_seconds: usize) -> AttentionModel {
        match Self::regimes(episode_seconds) {
            AttentionModel::Regimes {
                episode_seconds,
                low_frac,
                high_frac,
                low_value,
                mid_value,
                high_value,
                ..
            } => AttentionModel::Regimes {
                episode_seconds,
                low_frac,
                high_frac,
                low_value,
                mid_value,
                high_value,
                order: RegimeOrder::Cycle,
            },
            other => other,
        }
    }
}

/// What the generator knows about its own data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub spec: SynthSpec,
    /// Closed-form accuracy of the best single-category classifier at
    /// window level, where the configuration admits one.
    pub bayes_accuracy: BTreeMap<Category, Option<f64>>,
    pub session_seconds: BTreeMap<String, usize>,
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7, ample for oracle targets).
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z.abs());
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    let signed = if z < 0.0 { -erf } else { erf };
    0.5 * (1.0 + signed)
}

fn bayes_for(model: &AttentionModel, signal: &SignalModel) -> Option<f64> {
    if signal.gain == 0.0 && signal.dynamics_gain == 0.0 {
        return Some(0.5);
    }
    if signal.dynamics_gain != 0.0 {
        return None; // variance-coded channels have no closed form here
    }
    match model {
        AttentionModel::RandomWalk { .. } => {
            if signal.episode_noise_std == 0.0 && signal.second_noise_std == 0.0 {
                Some(1.0)
            } else {
                None // no closed form for walk-coupled noisy channels
            }
        }
        AttentionModel::Regimes { .. } => {
            if signal.second_noise_std != 0.0 {
                None
            } else if signal.episode_noise_std == 0.0 {
                Some(1.0)
            } else {
                Some(normal_cdf(signal.gain / (2.0 * signal.episode_noise_std)))
            }
        }
    }
}

struct UserStreams {
    attention: AttentionSeries,
    records: Vec<FrameFeatureRecord>,
}

fn generate_user(spec: &SynthSpec, master: u64, user_id: &str) -> UserStreams {
    let mut session_rng = seeded_rng(derive_seed(master, &format!("user:{user_id}:session")));
    let seconds = session_rng.random_range(spec.session_seconds_min..=spec.session_seconds_max);

    // attention series and the per-second episode index
    let mut att_rng = seeded_rng(derive_seed(master, &format!("user:{user_id}:attention")));
    let (attention_values, episode_of): (Vec<f64>, Vec<usize>) = match &spec.attention {
        AttentionModel::RandomWalk { step_std } => {
            let step = Normal::new(0.0, *step_std).expect("validated std");
            let mut v = Vec::with_capacity(seconds);
            let mut a: f64 = 50.0;
            for _ in 0..seconds {
                a = (a + step.sample(&mut att_rng)).clamp(0.0, 100.0);
                v.push(a);
            }
            let episodes = (0..seconds).collect();
            (v, episodes)
        }
        AttentionModel::Regimes {
            episode_seconds,
            low_frac,
            high_frac,
            low_value,
            mid_value,
            high_value,
            order,
        } => {
            let n_ep = seconds.div_ceil(*episode_seconds);
            let states: Vec<i8> = match order {
                RegimeOrder::Shuffled => {
                    let n_low = ((n_ep as f64) * low_frac).round() as usize;
                    let n_high = ((n_ep as f64) * high_frac).round() as usize;
                    let mut states: Vec<i8> = Vec::with_capacity(n_ep);
                    states.extend(std::iter::repeat_n(-1i8, n_low));
                    states.extend(std::iter::repeat_n(1i8, n_high));
                    states.extend(std::iter::repeat_n(0i8, n_ep.saturating_sub(n_low + n_high)));
                    for i in (1..states.len()).rev() {
                        let j = att_rng.random_range(0..=i);
                        states.swap(i, j);
                    }
                    states
                }
                RegimeOrder::Cycle => (0..n_ep)
                    .map(|ep| match ep % 4 {
                        0 => -1i8,
                        2 => 1i8,
                        _ => 0i8,
                    })
                    .collect(),
            };
            let mut v = Vec::with_capacity(seconds);
            let mut episodes = Vec::with_capacity(seconds);
            for t in 0..seconds {
                let ep = t / episode_seconds;
                episodes.push(ep);
                v.push(match states[ep] {
                    -1 => *low_value,
                    1 => *high_value,
                    _ => *mid_value,
                });
            }
            (v, episodes)
        }
    };

    // per-second state offsets for the signal channel
    let offsets: Vec<f64> = match &spec.attention {
        AttentionModel::RandomWalk { .. } => {
            attention_values.iter().map(|a| (a - 50.0) / 50.0).collect()
        }
        AttentionModel::Regimes {
            low_value,
            high_value,
            ..
        } => attention_values
            .iter()
            .map(|a| {
                if a == low_value {
                    -0.5
                } else if a == high_value {
                    0.5
                } else {
                    0.0
                }
            })
            .collect(),
    };

    let n_frames = (seconds as f64 * spec.frame_rate).floor() as usize;
    let mut records = Vec::new();
    for (cat, signal) in &spec.signals {
        let mut rng = seeded_rng(derive_seed(master, &format!("user:{user_id}:cat:{cat}")));
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        // per-second values, channel-major
        let dim = cat.dim();
        let mut per_second = vec![vec![0.0f64; seconds]; dim];
        let mut episode_noise = 0.0;
        let mut current_episode = usize::MAX;
        for t in 0..seconds {
            if spec_uses_episode_noise(signal) && episode_of[t] != current_episode {
                current_episode = episode_of[t];
                episode_noise = unit.sample(&mut rng) * signal.episode_noise_std;
            }
            let mut raw = signal.gain * offsets[t] + episode_noise;
            if signal.second_noise_std > 0.0 {
                let scale = 1.0 + signal.dynamics_gain * 2.0 * offsets[t];
                raw += unit.sample(&mut rng) * signal.second_noise_std * scale;
            }
            per_second[0][t] = post_map(*cat, raw);
            for channel in per_second.iter_mut().skip(1) {
                channel[t] = unit.sample(&mut rng);
            }
        }
        for k in 0..n_frames {
            let timestamp = k as f64 / spec.frame_rate;
            let t = (timestamp.floor() as usize).min(seconds - 1);
            records.push(FrameFeatureRecord {
                user_id: user_id.to_string(),
                session_id: "s01".to_string(),
                timestamp,
                category: *cat,
                values: (0..dim).map(|d| per_second[d][t]).collect(),
            });
        }
    }
    UserStreams {
        attention: AttentionSeries {
            user_id: user_id.to_string(),
            values: attention_values,
        },
        records,
    }
}

fn spec_uses_episode_noise(signal: &SignalModel) -> bool {
    signal.episode_noise_std > 0.0
}

/// Keep category ranges valid: eyeblink confidences must stay in (0, 1),
/// heart rate gets a plausible bpm scale. A strictly monotone map leaves
/// the optimal single-channel classifier's accuracy unchanged.
fn post_map(cat: Category, raw: f64) -> f64 {
    match cat {
        Category::Eb => 1.0 / (1.0 + (-raw).exp()),
        Category::H => 70.0 + 10.0 * raw,
        _ => raw,
    }
}

/// Generate everything in memory: the validated frame-feature stream,
/// one attention series per user, and the generator's ground truth.
pub fn generate_streams(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(FrameFeatureStream, Vec<AttentionSeries>, SynthTruth)> {
    spec.validate()?;
    let mut stream = FrameFeatureStream::new();
    let mut attention = Vec::new();
    let mut session_seconds = BTreeMap::new();
    for u in 0..spec.n_users {
        let user_id = format!("u{:03}", u + 1);
        let user = generate_user(spec, seed, &user_id);
        session_seconds.insert(user_id.clone(), user.attention.values.len());
        for rec in user.records {
            stream.insert(rec, 0)?;
        }
        attention.push(user.attention);
    }
    let bayes_accuracy = spec
        .signals
        .iter()
        .map(|(c, s)| (*c, bayes_for(&spec.attention, s)))
        .collect();
    Ok((
        stream,
        attention,
        SynthTruth {
            seed,
            spec: spec.clone(),
            bayes_accuracy,
            session_seconds,
        },
    ))
}

/// Generate and write the on-disk layout consumed by the pipeline:
/// `features.csv`, `attention/<user>.txt`, and `truth.json`.
pub fn generate(spec: &SynthSpec, seed: u64, out_dir: &Path) -> Result<SynthTruth> {
    let (stream, attention, truth) = generate_streams(spec, seed)?;
    fs::create_dir_all(out_dir.join("attention"))?;
    let mut features = BufWriter::new(File::create(out_dir.join("features.csv"))?);
    write_frame_features(&stream, &mut features)?;
    features.flush()?;
    for series in &attention {
        let path = out_dir.join("attention").join(format!("{}.txt", series.user_id));
        let mut w = BufWriter::new(File::create(path)?);
        write_attention(series, &mut w)?;
        w.flush()?;
    }
    let mut truth_file = BufWriter::new(File::create(out_dir.join("truth.json"))?);
    serde_json::to_writer_pretty(&mut truth_file, &truth)?;
    truth_file.flush()?;
    Ok(truth)
}
