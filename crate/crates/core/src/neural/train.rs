//! Maximum-likelihood pretraining, REINFORCE fine-tuning and the training log.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::model::{encode_targets, rollout, sequence_log_prob, DecodeMode, Episode, ModelConfig, ModelParams};
use super::NeuralError;
use crate::seqcodec::{AdjacencyMatrix, TrainingPair};

/// Negative mean log-likelihood of the target colorings and its gradient.
pub fn supervised_loss(
    batch: &[TrainingPair],
    params: &ModelParams,
    mask: bool,
) -> Result<(f64, ModelParams), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::InvalidBatch);
    }
    let coeff = -1.0 / batch.len() as f64;
    let parts = batch
        .par_iter()
        .map(|pair| {
            let targets = encode_targets(&pair.colors)?;
            let mut g = params.zeros_like();
            let lp = sequence_log_prob(params, &pair.edges, &targets, mask, Some((coeff, &mut g)))?;
            Ok((lp, g))
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;
    Ok(reduce(params, parts, coeff))
}

/// Objective `(1/B) Σ (R_k - baseline) log p(C_k | E_k)` and its gradient.
pub fn reinforce_gradient(
    batch: &[Episode],
    params: &ModelParams,
    baseline: f64,
) -> Result<(f64, ModelParams), NeuralError> {
    if batch.is_empty() {
        return Err(NeuralError::InvalidBatch);
    }
    let n = batch.len() as f64;
    let parts = batch
        .par_iter()
        .map(|ep| {
            let coeff = (ep.reward - baseline) / n;
            let mut g = params.zeros_like();
            let lp = sequence_log_prob(params, &ep.edges, &ep.choices, ep.mask, Some((coeff, &mut g)))?;
            Ok((coeff * lp, g))
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;
    Ok(reduce(params, parts, 1.0))
}

/// Sums per-sample results in order so the outcome does not depend on
/// thread scheduling.
fn reduce(params: &ModelParams, parts: Vec<(f64, ModelParams)>, value_scale: f64) -> (f64, ModelParams) {
    let mut total = params.zeros_like();
    let mut value = 0.0;
    for (v, g) in parts {
        value += v;
        total.add_scaled(&g, 1.0);
    }
    (value * value_scale, total)
}

/// Rescales `grad` to norm `max_norm` when it is longer.
pub fn clip_gradient(grad: &mut ModelParams, max_norm: f64) {
    let norm = grad.norm();
    if norm > max_norm {
        grad.scale(max_norm / norm);
    }
}

/// One gradient-ascent step on the REINFORCE objective, clipped at norm 5.
pub fn reinforce_update(batch: &[Episode], params: &ModelParams, learning_rate: f64) -> Result<ModelParams, NeuralError> {
    let (_, mut grad) = reinforce_gradient(batch, params, 0.0)?;
    clip_gradient(&mut grad, TrainConfig::default().clip_norm);
    let mut next = params.clone();
    next.add_scaled(&grad, learning_rate);
    Ok(next)
}

/// Share of instances the model colors into a valid PDA by greedy decoding.
pub fn valid_rate(params: &ModelParams, instances: &[AdjacencyMatrix], mask: bool) -> Result<f64, NeuralError> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let valid = instances
        .par_iter()
        .map(|a| rollout(a, params, DecodeMode::Greedy, mask, 0).map(|ep| ep.is_valid() as usize))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(valid.iter().sum::<usize>() as f64 / instances.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Init,
    Supervised,
    Reinforce,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Supervised => "supervised",
            Phase::Reinforce => "reinforce",
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub phase: Phase,
    /// Mean NLL when supervised; negated objective when reinforcing.
    pub loss: f64,
    /// Mean sampled reward when reinforcing, otherwise `2 * valid_rate - 1`.
    pub mean_reward: f64,
    /// Greedy, unmasked valid-PDA rate on the evaluation set.
    pub valid_rate: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub supervised_epochs: usize,
    pub reinforce_epochs: usize,
    pub batch_size: usize,
    pub lr_supervised: f64,
    pub lr_reinforce: f64,
    pub clip_norm: f64,
    /// Apply the C2 feasibility mask while training.
    pub train_mask: bool,
    /// Subtract a moving-average reward baseline (ablation).
    pub baseline: bool,
    /// Record elapsed milliseconds; when off the column is 0 and the log is
    /// reproducible byte for byte.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            supervised_epochs: 60,
            reinforce_epochs: 40,
            batch_size: 16,
            lr_supervised: 0.5,
            lr_reinforce: 0.1,
            clip_norm: 5.0,
            train_mask: false,
            baseline: false,
            wall_clock: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("training diverged in epoch {epoch}")]
    Divergence { epoch: usize, last_good: Box<ModelParams>, log: Vec<LogRow> },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
}

/// SplitMix64 finalizer, used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(seed) ^ a) ^ b)
}

/// Pretrains on `corpus` by maximum likelihood, then fine-tunes with
/// REINFORCE on the same instances. `eval` (or the corpus when empty) is
/// decoded greedily without the mask after every epoch.
pub fn train(corpus: &[TrainingPair], eval: &[TrainingPair], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let started = Instant::now();
    let wall = || if config.wall_clock { started.elapsed().as_millis() as u64 } else { 0 };
    let seed = config.model.seed;
    let adjacency = |pairs: &[TrainingPair]| {
        pairs
            .iter()
            .map(TrainingPair::adjacency)
            .collect::<Result<Vec<_>, _>>()
            .map_err(NeuralError::from)
    };
    let train_inst = adjacency(corpus)?;
    let eval_inst = if eval.is_empty() { train_inst.clone() } else { adjacency(eval)? };

    let mut params = ModelParams::new(config.model);
    let mut log = Vec::new();
    let (init_loss, _) = supervised_loss(corpus, &params, config.train_mask)?;
    let rate = valid_rate(&params, &eval_inst, false)?;
    log.push(LogRow {
        epoch: 0,
        phase: Phase::Init,
        loss: init_loss,
        mean_reward: 2.0 * rate - 1.0,
        valid_rate: rate,
        wall_ms: wall(),
    });

    let batch = config.batch_size.max(1);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut baseline = 0.0;
    let total = config.supervised_epochs + config.reinforce_epochs;
    for epoch in 1..=total {
        let phase = if epoch <= config.supervised_epochs { Phase::Supervised } else { Phase::Reinforce };
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, epoch as u64)));
        let last_good = params.clone();
        let mut loss_sum = 0.0;
        let mut reward_sum = 0.0;

        for (b, chunk) in order.chunks(batch).enumerate() {
            match phase {
                Phase::Supervised => {
                    let pairs: Vec<TrainingPair> = chunk.iter().map(|&i| corpus[i].clone()).collect();
                    let (loss, mut grad) = supervised_loss(&pairs, &params, config.train_mask)?;
                    clip_gradient(&mut grad, config.clip_norm);
                    params.add_scaled(&grad, -config.lr_supervised);
                    loss_sum += loss * chunk.len() as f64;
                }
                Phase::Reinforce | Phase::Init => {
                    let episodes = chunk
                        .par_iter()
                        .enumerate()
                        .map(|(n, &i)| {
                            let s = derive_seed(seed, 2 + epoch as u64, (b * batch + n) as u64);
                            rollout(&train_inst[i], &params, DecodeMode::Sample, config.train_mask, s)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let mean = episodes.iter().map(|e| e.reward).sum::<f64>() / episodes.len() as f64;
                    let b_used = if config.baseline { baseline } else { 0.0 };
                    let (objective, mut grad) = reinforce_gradient(&episodes, &params, b_used)?;
                    clip_gradient(&mut grad, config.clip_norm);
                    params.add_scaled(&grad, config.lr_reinforce);
                    baseline = 0.9 * baseline + 0.1 * mean;
                    loss_sum -= objective * chunk.len() as f64;
                    reward_sum += mean * chunk.len() as f64;
                }
            }
            if !params.is_finite() || !loss_sum.is_finite() {
                return Err(TrainError::Divergence { epoch, last_good: Box::new(last_good), log });
            }
        }

        let rate = valid_rate(&params, &eval_inst, false)?;
        let n = corpus.len() as f64;
        log.push(LogRow {
            epoch,
            phase,
            loss: loss_sum / n,
            mean_reward: match phase {
                Phase::Reinforce => reward_sum / n,
                _ => 2.0 * rate - 1.0,
            },
            valid_rate: rate,
            wall_ms: wall(),
        });
    }
    Ok(TrainOutcome { params, log })
}

/// CSV with columns `epoch,phase,loss,mean_reward,valid_rate,wall_ms`,
/// preceded by an optional `#` comment line.
pub fn write_log_csv<W: Write>(mut out: W, comment: Option<&str>, rows: &[LogRow]) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "epoch,phase,loss,mean_reward,valid_rate,wall_ms")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.9},{:.6},{:.6},{}",
            r.epoch,
            r.phase.as_str(),
            r.loss,
            r.mean_reward,
            r.valid_rate,
            r.wall_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pda::{construct_mn_pda, Pda};

    fn config(seed: u64) -> ModelConfig {
        ModelConfig { hidden: 6, embed: 6, f_max: 4, k_max: 4, window: None, seed }
    }

    fn pair(text: &str) -> TrainingPair {
        TrainingPair::from_pda(&Pda::new(text.parse().unwrap()).unwrap())
    }

    #[test]
    fn uniform_model_pays_log_two_on_two_edges() {
        let mut p = ModelParams::new(config(0));
        p.beta.iter_mut().for_each(|b| *b = 0.0);
        let batch = [pair("* 1; 1 *"), pair("* 1; 2 *")];
        let (loss, _) = supervised_loss(&batch, &p, false).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_edge_costs_nothing() {
        let p = ModelParams::new(config(1));
        let (loss, grad) = supervised_loss(&[pair("1; *")], &p, false).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.norm(), 0.0);
    }

    #[test]
    fn empty_batches_and_bad_targets_are_rejected() {
        let p = ModelParams::new(config(2));
        assert!(matches!(supervised_loss(&[], &p, false), Err(NeuralError::InvalidBatch)));
        assert!(matches!(reinforce_gradient(&[], &p, 0.0), Err(NeuralError::InvalidBatch)));
        assert!(matches!(reinforce_update(&[], &p, 0.1), Err(NeuralError::InvalidBatch)));
        let mut bad = pair("* 1; 2 *");
        bad.colors.0 = vec![2, 1];
        assert!(matches!(supervised_loss(&[bad], &p, false), Err(NeuralError::BadTarget(_))));
    }

    fn episodes(p: &ModelParams) -> Vec<Episode> {
        let a = pair("* 1 2; 1 * 3; 2 3 *").adjacency().unwrap();
        (0..4).map(|s| rollout(&a, p, DecodeMode::Sample, false, s).unwrap()).collect()
    }

    #[test]
    fn opposite_rewards_cancel() {
        let p = ModelParams::new(config(3));
        let ep = episodes(&p).remove(0);
        let mut neg = ep.clone();
        neg.reward = -ep.reward;
        let (_, g) = reinforce_gradient(&[ep, neg], &p, 0.0).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn unit_rewards_follow_the_supervised_direction() {
        let p = ModelParams::new(config(4));
        let mut eps = episodes(&p);
        eps.iter_mut().for_each(|e| e.reward = 1.0);
        let (_, rg) = reinforce_gradient(&eps, &p, 0.0).unwrap();
        let targets: Vec<TrainingPair> = eps
            .iter()
            .map(|e| TrainingPair { k: 3, f: 3, z: 1, edges: e.edges.clone(), colors: e.colors.clone() })
            .collect();
        let (_, sg) = supervised_loss(&targets, &p, false).unwrap();
        let mut sum = rg.clone();
        sum.add_scaled(&sg, 1.0);
        assert!(sum.norm() < 1e-12 * rg.norm().max(1.0));
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = ModelParams::new(config(5));
        g.scale(1e4);
        clip_gradient(&mut g, 5.0);
        assert!((g.norm() - 5.0).abs() < 1e-9);
        let before = g.clone();
        clip_gradient(&mut g, 10.0);
        assert_eq!(g, before);
    }

    #[test]
    fn one_sample_is_memorized() {
        let corpus = [pair("* 1; 1 *")];
        let cfg = TrainConfig {
            model: config(6),
            supervised_epochs: 50,
            reinforce_epochs: 0,
            batch_size: 1,
            wall_clock: false,
            ..TrainConfig::default()
        };
        let out = train(&corpus, &[], &cfg).unwrap();
        assert_eq!(out.log.len(), 51);
        assert!(out.log.last().unwrap().loss < out.log[0].loss);
    }

    #[test]
    fn training_log_is_reproducible() {
        let corpus: Vec<TrainingPair> = [construct_mn_pda(3, 1).unwrap(), construct_mn_pda(4, 3).unwrap()]
            .iter()
            .map(TrainingPair::from_pda)
            .collect();
        let cfg = TrainConfig {
            model: config(7),
            supervised_epochs: 3,
            reinforce_epochs: 3,
            batch_size: 1,
            wall_clock: false,
            ..TrainConfig::default()
        };
        let a = train(&corpus, &[], &cfg).unwrap();
        let b = train(&corpus, &[], &cfg).unwrap();
        let csv = |log: &[LogRow]| {
            let mut v = Vec::new();
            write_log_csv(&mut v, Some("seed=7"), log).unwrap();
            v
        };
        assert_eq!(csv(&a.log), csv(&b.log));
        assert_eq!(a.params, b.params);
        assert!(String::from_utf8(csv(&a.log)).unwrap().starts_with("# seed=7\nepoch,phase,"));
    }

    #[test]
    fn nan_parameters_abort_training() {
        let corpus = [pair("* 1; 1 *")];
        let cfg = TrainConfig {
            model: config(8),
            supervised_epochs: 2,
            lr_supervised: f64::NAN,
            wall_clock: false,
            ..TrainConfig::default()
        };
        match train(&corpus, &[], &cfg) {
            Err(TrainError::Divergence { epoch, last_good, log }) => {
                assert_eq!(epoch, 1);
                assert!(last_good.is_finite());
                assert_eq!(log.len(), 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(matches!(train(&[], &[], &cfg), Err(TrainError::EmptyCorpus)));
    }
}
