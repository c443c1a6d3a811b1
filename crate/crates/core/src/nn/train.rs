//! Seeded mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Model, Normalizer, Sample};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::spec::{InputShape, ModelSpec};
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 600,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.epochs == 0 {
            return Err(NnError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.adam.learning_rate > 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Hook called after each epoch with `(epoch, mean_loss)`, 1-based.
pub type EpochCallback<'a> = &'a mut dyn FnMut(usize, f64);

pub fn train(dataset: &[Sample], spec: ModelSpec, config: &TrainConfig) -> Result<TrainOutcome, NnError> {
    train_with_progress(dataset, spec, config, &mut |_, _| {})
}

/// Trains from a Glorot initialization. Inputs are standardized with
/// statistics fitted on `dataset` and stored in the model. Everything random
/// is drawn from one ChaCha8 stream seeded with `config.seed`.
pub fn train_with_progress(
    dataset: &[Sample],
    spec: ModelSpec,
    config: &TrainConfig,
    on_epoch: EpochCallback<'_>,
) -> Result<TrainOutcome, NnError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(spec, &mut rng)?;
    for (i, s) in dataset.iter().enumerate() {
        model
            .check_input(&s.input)
            .map_err(|e| NnError::ShapeMismatch(format!("sample {i}: {e}")))?;
    }
    let width = match model.spec().input {
        InputShape::Vector(w) | InputShape::Sequence(w) => w,
    };
    let normalizer = Normalizer::fit(width, dataset.iter().flat_map(|s| s.input.data().chunks_exact(width)));
    model.set_normalizer(normalizer)?;

    let mut state = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let (loss, grads) = model.gradients(&batch)?;
            epoch_loss += loss * chunk.len() as f64;
            adam_step(model.params_mut(), &grads, &mut state, &config.adam);
        }
        let mean = epoch_loss / dataset.len() as f64;
        if !mean.is_finite() {
            return Err(NnError::NonFinite(format!("loss diverged at epoch {epoch}")));
        }
        loss_history.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome { model, loss_history })
}

/// `epoch,loss` CSV, epochs numbered from 1.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, loss) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, loss));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::EmotionLabel;
    use crate::nn::spec::Arch;
    use crate::nn::tensor::Tensor;

    fn toy_set() -> Vec<Sample> {
        (0..20)
            .map(|i| {
                let t = i as f64 / 19.0;
                let (x, label) = if i % 2 == 0 {
                    (vec![1.0 + t, 0.5 - t], EmotionLabel::Neutral)
                } else {
                    (vec![-1.0 - t, -0.5 + t], EmotionLabel::Calm)
                };
                Sample {
                    input: Tensor::vector(x),
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn empty_dataset_rejected() {
        let r = train(&[], ModelSpec::default_dnn(2), &TrainConfig::default());
        assert_eq!(r.unwrap_err(), NnError::EmptyDataset);
    }

    #[test]
    fn mismatched_sample_rejected() {
        let data = vec![Sample {
            input: Tensor::vector(vec![1.0; 3]),
            label: EmotionLabel::Sad,
        }];
        let r = train(
            &data,
            ModelSpec::default_dnn(2),
            &TrainConfig {
                epochs: 1,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(NnError::ShapeMismatch(_))));
    }

    #[test]
    fn config_validation() {
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_model() {
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 4,
            seed: 3,
            ..Default::default()
        };
        let spec = ModelSpec::mlp(Arch::Dnn, 2, &[6]);
        let a = train(&toy_set(), spec.clone(), &cfg).unwrap();
        let b = train(&toy_set(), spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_history.iter().all(|l| l.is_finite()));
        assert_eq!(a.loss_history.len(), 20);
    }

    #[test]
    fn csv_format() {
        assert_eq!(loss_history_csv(&[0.5, 0.25]), "epoch,loss\n1,0.5\n2,0.25\n");
    }
}
