//! Learning-rate and batch-size schedules, and the initialization scale.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingRecipe {
    pub lr_peak: f64,
    pub warmup_tokens: f64,
    /// Length of the cosine decay, counted from the end of warmup.
    pub decay_tokens: f64,
    pub decay_floor_fraction: f64,
    pub batch_start: u64,
    pub batch_step: u64,
    pub batch_final: u64,
    pub ramp_tokens: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: f64,
    pub weight_decay: f64,
}

impl Default for TrainingRecipe {
    fn default() -> Self {
        Self {
            lr_peak: 5.0e-5,
            warmup_tokens: 1e9,
            decay_tokens: 3.4e11,
            decay_floor_fraction: 0.1,
            batch_start: 32,
            batch_step: 32,
            batch_final: 1920,
            ramp_tokens: 1.2e10,
            adam_beta1: 0.9,
            adam_beta2: 0.95,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            weight_decay: 0.1,
        }
    }
}

impl TrainingRecipe {
    /// Distinct batch sizes on the ramp, endpoints included.
    pub fn batch_levels(&self) -> u64 {
        (self.batch_final - self.batch_start) / self.batch_step + 1
    }
}

/// Linear warmup from 0, then cosine decay to `decay_floor_fraction × lr_peak`,
/// held at the floor afterwards.
pub fn lr_at(tokens_seen: f64, recipe: &TrainingRecipe) -> f64 {
    let t = tokens_seen.max(0.0);
    if t < recipe.warmup_tokens {
        return recipe.lr_peak * t / recipe.warmup_tokens;
    }
    let floor = recipe.lr_peak * recipe.decay_floor_fraction;
    let progress = ((t - recipe.warmup_tokens) / recipe.decay_tokens).min(1.0);
    floor + (recipe.lr_peak - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Batch size after `tokens_seen` tokens. The ramp is split into one equal
/// token interval per level, so the final size is reached for the last
/// `ramp_tokens / levels` tokens of the ramp and held afterwards.
pub fn batch_size_at(tokens_seen: f64, recipe: &TrainingRecipe) -> u64 {
    let levels = recipe.batch_levels();
    let t = tokens_seen.max(0.0);
    if t >= recipe.ramp_tokens {
        return recipe.batch_final;
    }
    let level = ((levels as f64 * t / recipe.ramp_tokens).floor() as u64).min(levels - 1);
    recipe.batch_start + recipe.batch_step * level
}

/// `sqrt(1 / (3 h))`.
pub fn weight_init_std(hidden: f64) -> f64 {
    (1.0 / (3.0 * hidden)).sqrt()
}
