//! Seeded training loop: shuffled mini-batches, per-sample gradients fanned
//! out across workers and reduced in index order, adaptive-moment updates.
//! Two runs with the same seed produce bit-identical learning curves.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::layer::Mode;
use super::network::{cross_entropy, evaluate, Gradients, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Adaptive moment estimation over the per-layer parameter vectors.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(net: &Network, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net
            .layers
            .iter()
            .map(|l| vec![0.0; l.params().len()])
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((layer, m), (v, g)) in net
            .layers
            .iter_mut()
            .zip(&mut self.m)
            .zip(self.v.iter_mut().zip(&grads.0))
        {
            let params = layer.params_mut();
            for i in 0..params.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Write learning curves as CSV.
pub fn write_curves_csv(records: &[EpochRecord], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,train_loss,train_acc,val_loss,val_acc")?;
    for r in records {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        )?;
    }
    Ok(())
}

/// Train in place; train metrics are running averages over the training
/// forwards (dropout active), validation metrics come from a clean
/// evaluation pass per epoch.
pub fn train<S: Sync>(
    net: &mut Network,
    train_set: &[S],
    val_set: &[S],
    encode: impl Fn(&S) -> Tensor + Sync,
    label: impl Fn(&S) -> usize + Sync,
    epochs: usize,
) -> Result<Vec<EpochRecord>> {
    assert!(!train_set.is_empty(), "training set is empty");
    let batch_size = net.config.batch_size.max(1);
    let mut optimizer = Adam::new(net, net.config.lr);
    let mut shuffle_rng = rng::stream(net.config.seed, &[domain::NET_TRAIN]);
    let dropout_sizes = net.dropout_sizes();

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;

        for (batch_idx, batch) in order.chunks(batch_size).enumerate() {
            // masks are drawn sequentially so worker scheduling cannot
            // perturb the stream
            let masks: Vec<Vec<Vec<f64>>> = batch
                .iter()
                .map(|_| {
                    dropout_sizes
                        .iter()
                        .map(|&(len, rate)| {
                            (0..len)
                                .map(|_| {
                                    if shuffle_rng.gen::<f64>() < rate {
                                        0.0
                                    } else {
                                        1.0 / (1.0 - rate)
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();

            let per_sample: Vec<Result<(Gradients, f64, bool)>> = batch
                .par_iter()
                .zip(masks.par_iter())
                .map(|(&idx, sample_masks)| {
                    let sample = &train_set[idx];
                    let x = encode(sample);
                    let y = label(sample);
                    let mode = Mode::Train {
                        masks: sample_masks,
                    };
                    let acts = net.run(&x, mode)?;
                    let (loss, dlogits, probs) = cross_entropy(net.logits(&acts), y);
                    let predicted = probs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    let mut grads = Gradients::zeros_like(net);
                    net.backward(&acts, &dlogits, mode, &mut grads);
                    Ok((grads, loss, predicted == y))
                })
                .collect();

            let mut batch_grads = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for result in per_sample {
                let (grads, loss, correct) = result?;
                batch_grads.accumulate(&grads);
                batch_loss += loss;
                if correct {
                    epoch_correct += 1;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            epoch_loss += batch_loss;
            optimizer.step(net, &batch_grads);
        }

        let (val_acc, val_loss) = if val_set.is_empty() {
            (0.0, 0.0)
        } else {
            let (acc, _) = evaluate(net, val_set, &encode, &label)?;
            let losses: Vec<f64> = val_set
                .par_iter()
                .map(|s| {
                    let probs = net.forward(&encode(s))?;
                    Ok(-probs[label(s)].max(1e-300).ln())
                })
                .collect::<Result<Vec<f64>>>()?;
            (acc, losses.iter().sum::<f64>() / losses.len() as f64)
        };

        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            train_acc: epoch_correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        };
        if std::env::var_os("QTOPO_PROGRESS").is_some() {
            eprintln!(
                "epoch {:>3}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                record.epoch, record.train_loss, record.train_acc, record.val_loss, record.val_acc
            );
        }
        records.push(record);
    }
    Ok(records)
}
