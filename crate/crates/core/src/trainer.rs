//! Autoencoder training of many-to-one constellations.
//!
//! The encoder maps each `m`-bit label (presented as ±1 inputs) to an I/Q
//! pair; the decoder maps a noisy received sample back to `m` bit logits.
//! Every step:
//!
//! 1. draws a batch of uniform labels,
//! 2. evaluates the encoder on all `2^m` labels and scales the result to unit
//!    average power (gradients flow through the scaling),
//! 3. adds Gaussian noise whose variance follows from the channel and the
//!    current constellation moments (treated as a constant),
//! 4. scores the decoder posteriors with the masked cross-entropy over the
//!    leading `m − ⌊n_d⌉` positions,
//! 5. backpropagates through decoder, noise, scaling and encoder and applies
//!    one Adam update to each network.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_lin, ChannelParams};
use crate::constellation::Constellation;
use crate::error::{invalid, Error, Result};
use crate::metrics::{bit_cross_entropy, fmt_f, gmi_estimate};
use crate::neuralnet::{sigmoid, Activation, MlpNetwork, OptimizerState};

pub const TRAIN_FORMAT: &str = "mtom-train-v1";

/// Where the training noise comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainChannel {
    /// Fixed SNR, independent of the constellation.
    Awgn { snr_db: f64 },
    /// Effective-SNR fiber channel; the launch power is the optimum for the
    /// current constellation, refreshed at every evaluation.
    Nlin(ChannelParams),
}

impl TrainChannel {
    fn validate(&self) -> Result<()> {
        match self {
            TrainChannel::Awgn { snr_db } if !snr_db.is_finite() => {
                Err(invalid!("training SNR must be finite"))
            }
            TrainChannel::Awgn { .. } => Ok(()),
            TrainChannel::Nlin(p) => p.validate(),
        }
    }
}

fn default_hidden() -> Vec<usize> {
    vec![256, 256]
}
fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    1024
}
fn default_steps() -> usize {
    20_000
}
fn default_eval_every() -> usize {
    500
}
fn default_eval_symbols() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub m: usize,
    pub n_d: f64,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Monte Carlo symbols behind each GMI entry of the trace.
    #[serde(default = "default_eval_symbols")]
    pub eval_symbols: usize,
    pub channel: TrainChannel,
}

#[derive(Serialize, Deserialize)]
struct TrainFile {
    format: String,
    #[serde(flatten)]
    config: TrainConfig,
}

impl TrainConfig {
    /// Defaults for everything except the label geometry and channel.
    pub fn new(m: usize, n_d: f64, channel: TrainChannel) -> Self {
        Self {
            m,
            n_d,
            hidden: default_hidden(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            steps: default_steps(),
            seed: 0,
            eval_every: default_eval_every(),
            eval_symbols: default_eval_symbols(),
            channel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > 10 {
            return Err(invalid!("m = {} outside 1..=10", self.m));
        }
        if !self.n_d.is_finite() || self.n_d < 0.0 || self.n_d > (self.m - 1) as f64 {
            return Err(invalid!("n_d = {} outside [0, {}]", self.n_d, self.m - 1));
        }
        crate::data_bits(self.m, self.n_d)?;
        if self.hidden.contains(&0) {
            return Err(invalid!("zero-width hidden layer"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid!("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(invalid!("batch size and evaluation cadence must be positive"));
        }
        if self.batch_size < 1 << self.m {
            log::warn!(
                "batch of {} is smaller than the {} labels",
                self.batch_size,
                1usize << self.m
            );
        }
        self.channel.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TrainFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if file.format != TRAIN_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag {:?}, expected {TRAIN_FORMAT:?}",
                file.format
            )));
        }
        file.config.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(file.config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&TrainFile {
            format: TRAIN_FORMAT.into(),
            config: self.clone(),
        })
        .expect("train config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.in_file(path))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub cost: f64,
    /// Data-bit GMI of the current constellation at the training noise level.
    pub gmi: f64,
    pub mu4: f64,
    pub intra_max_ed: f64,
    pub inter_min_ed: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Batch cost of every step.
    pub costs: Vec<f64>,
}

impl TrainTrace {
    /// Mean of the `window` costs ending at `step` (fewer at the start).
    pub fn smoothed_cost(&self, step: usize, window: usize) -> f64 {
        let end = (step + 1).min(self.costs.len());
        let start = end.saturating_sub(window.max(1));
        self.costs[start..end].iter().sum::<f64>() / (end - start) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,cost,gmi,mu4,intra_max_ed,inter_min_ed\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step,
                fmt_f(r.cost),
                fmt_f(r.gmi),
                fmt_f(r.mu4),
                fmt_f(r.intra_max_ed),
                fmt_f(r.inter_min_ed)
            ));
        }
        out
    }
}

pub struct TrainOutcome {
    pub constellation: Constellation,
    pub trace: TrainTrace,
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    /// Noise variance (unit-power constellation) at the final operating point.
    pub sigma2: f64,
}

/// ±1 encoding of every `m`-bit label, one row per label.
fn label_inputs(m: usize) -> Array2<f64> {
    Array2::from_shape_fn((1 << m, m), |(label, i)| {
        if Constellation::label_bit(m, label, i) == 1 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Evaluates the encoder on all labels and normalizes to unit power.
pub fn export_lut(encoder: &MlpNetwork, m: usize) -> Result<Constellation> {
    if encoder.input_dim() != m || encoder.output_dim() != 2 {
        return Err(invalid!(
            "encoder maps {} → {}, expected {m} → 2",
            encoder.input_dim(),
            encoder.output_dim()
        ));
    }
    let out = encoder.predict(label_inputs(m).view())?;
    let points = out
        .outer_iter()
        .map(|r| Complex64::new(r[0], r[1]))
        .collect();
    Constellation::normalized(m, points)
}

/// Noise variance seen by a unit-power constellation with moments `mom` at
/// launch power `power`.
fn normalized_sigma2(channel: &TrainChannel, power: f64, mom: &crate::constellation::MomentSet) -> Result<f64> {
    match channel {
        TrainChannel::Awgn { snr_db } => Ok(1.0 / db_to_lin(*snr_db)),
        TrainChannel::Nlin(p) => Ok(p.noise_variance(power, mom)?.value / power),
    }
}

fn launch_power(channel: &TrainChannel, c: &Constellation) -> Result<f64> {
    match channel {
        TrainChannel::Awgn { .. } => Ok(1.0),
        TrainChannel::Nlin(p) => Ok(p.operating_point(&c.moments())?.launch_power),
    }
}

/// Runs the autoencoder optimization. Deterministic given `cfg.seed`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m = cfg.m;
    let n_points = 1usize << m;
    let data = crate::data_bits(m, cfg.n_d)?;
    let batch = cfg.batch_size;

    let enc_dims: Vec<usize> = std::iter::once(m)
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(2))
        .collect();
    let dec_dims: Vec<usize> = std::iter::once(2)
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(m))
        .collect();
    let mut encoder = MlpNetwork::init(
        &enc_dims,
        Activation::Relu,
        Activation::Linear,
        crate::rng::derive(cfg.seed, 1),
    )?;
    let mut decoder = MlpNetwork::init(
        &dec_dims,
        Activation::Relu,
        Activation::Linear,
        crate::rng::derive(cfg.seed, 2),
    )?;
    let mut enc_opt = OptimizerState::new(&encoder, cfg.learning_rate);
    let mut dec_opt = OptimizerState::new(&decoder, cfg.learning_rate);
    let mut rng = crate::rng::stream(crate::rng::derive(cfg.seed, 3), 0);

    let inputs = label_inputs(m);
    let grad_scale = 1.0 / (std::f64::consts::LN_2 * data as f64);
    let mut trace = TrainTrace::default();
    let mut power = launch_power(&cfg.channel, &export_lut(&encoder, m)?)?;
    let mut sigma2 = 1.0;

    for step in 0..=cfg.steps {
        // Encoder over all labels, then unit-power scaling.
        let enc_cache = encoder.forward(inputs.view())?;
        let raw = enc_cache.output();
        let rms = (raw.iter().map(|v| v * v).sum::<f64>() / n_points as f64).sqrt();
        if !(rms > 0.0) || !rms.is_finite() {
            return Err(diverged(step, &trace, "encoder output collapsed"));
        }
        let x = raw / rms;
        let points: Vec<Complex64> = x.outer_iter().map(|r| Complex64::new(r[0], r[1])).collect();
        let current = Constellation::new(m, points)?;
        let mom = current.moments();

        if step % cfg.eval_every == 0 || step == cfg.steps {
            power = launch_power(&cfg.channel, &current)?;
        }
        sigma2 = normalized_sigma2(&cfg.channel, power, &mom)?;

        if step == cfg.steps {
            let cost = trace.costs.last().copied().unwrap_or(f64::NAN);
            trace.records.push(evaluate(cfg, step, cost, &current, sigma2)?);
            break;
        }

        // Channel.
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_points)).collect();
        let std = (sigma2 / 2.0).sqrt();
        let mut received = Array2::zeros((batch, 2));
        for (k, &label) in labels.iter().enumerate() {
            let ni: f64 = rng.sample(StandardNormal);
            let nq: f64 = rng.sample(StandardNormal);
            received[[k, 0]] = x[[label, 0]] + std * ni;
            received[[k, 1]] = x[[label, 1]] + std * nq;
        }

        // Decoder, masked cost and its gradient w.r.t. the logits.
        let dec_cache = decoder.forward(received.view())?;
        let logits = dec_cache.output();
        let mut cost = 0.0;
        let mut grad_logits = Array2::zeros((batch, m));
        for (k, &label) in labels.iter().enumerate() {
            for i in 0..data {
                let bit = Constellation::label_bit(m, label, i);
                let logit = logits[[k, i]];
                cost += bit_cross_entropy(-logit, bit);
                grad_logits[[k, i]] = (sigmoid(logit) - bit as f64) * grad_scale;
            }
        }
        cost /= (batch * data) as f64;
        if !cost.is_finite() {
            return Err(diverged(step, &trace, "non-finite cost"));
        }
        trace.costs.push(cost);
        if step % cfg.eval_every == 0 {
            trace.records.push(evaluate(cfg, step, cost, &current, sigma2)?);
        }

        let (dec_grads, grad_received) = decoder.backward(&dec_cache, grad_logits.view())?;

        // Noise addition passes the gradient unchanged; collect it per label.
        let mut grad_x = Array2::<f64>::zeros((n_points, 2));
        for (k, &label) in labels.iter().enumerate() {
            grad_x[[label, 0]] += grad_received[[k, 0]] / batch as f64;
            grad_x[[label, 1]] += grad_received[[k, 1]] / batch as f64;
        }
        // Through x = z / rms(z).
        let proj = (&grad_x * &x).sum() / n_points as f64;
        let grad_raw = (&grad_x - &(&x * proj)) / rms;
        // backward() averages over its batch of 2^m labels; undo that.
        let (enc_grads, _) = encoder.backward(&enc_cache, (grad_raw * n_points as f64).view())?;

        if !enc_grads.is_finite() || !dec_grads.is_finite() {
            return Err(diverged(step, &trace, "non-finite gradient"));
        }
        enc_opt.step(&mut encoder, &enc_grads)?;
        dec_opt.step(&mut decoder, &dec_grads)?;
    }

    let constellation = export_lut(&encoder, m)?;
    Ok(TrainOutcome {
        constellation,
        trace,
        encoder,
        decoder,
        sigma2,
    })
}

fn evaluate(
    cfg: &TrainConfig,
    step: usize,
    cost: f64,
    c: &Constellation,
    sigma2: f64,
) -> Result<TraceRecord> {
    let seed = crate::rng::derive(cfg.seed, 4);
    let report = gmi_estimate(c, sigma2, cfg.eval_symbols.max(1), seed, cfg.n_d)?;
    let groups = c.group_structure(cfg.n_d)?;
    Ok(TraceRecord {
        step,
        cost,
        gmi: report.total_gmi,
        mu4: c.moments().mu4,
        intra_max_ed: groups.max_intra_ed(),
        inter_min_ed: groups.inter_min_ed,
        snr_db: crate::channel::lin_to_db(1.0 / sigma2),
    })
}

fn diverged(step: usize, trace: &TrainTrace, why: &str) -> Error {
    log::error!("training diverged at step {step}: {why}\n{}", trace.to_csv());
    Error::Numeric(format!("training diverged at step {step}: {why}"))
}

/// Largest displacement caused by flipping a single dummy bit of any label.
pub fn max_dummy_flip_distance(c: &Constellation, dummy_bits: usize) -> f64 {
    let mut worst = 0.0f64;
    for label in 0..c.len() {
        for b in 0..dummy_bits {
            let flipped = label ^ (1 << b);
            worst = worst.max((c.point(label) - c.point(flipped)).norm());
        }
    }
    worst
}
