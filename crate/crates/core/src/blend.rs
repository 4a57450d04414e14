//! Batch composition that tracks the target mixing weights.
//!
//! Each dataset carries a credit: the number of samples it should have
//! received so far (`weight × total drawn`) minus what it actually received.
//! A batch is apportioned by largest remainder over `credit + weight × batch`,
//! so every dataset gets the floor or the ceiling of its target and the
//! credits stay strictly inside (-1, 1).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BlendError {
    #[error("mixing weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("dataset {name:?} has weight {weight} outside (0, 1]")]
    Weight { name: String, weight: f64 },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("no datasets to blend")]
    NoDatasets,
    #[error("state tracks {state} datasets but {specs} specs were given")]
    StateMismatch { state: usize, specs: usize },
    #[error("apportionment infeasible: targets {0:?}")]
    Infeasible(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    /// Fraction of samples, in (0, 1].
    pub weight: f64,
    pub tokens_available: u64,
    pub epochs: f64,
}

impl DatasetSpec {
    pub fn new(name: impl Into<String>, weight: f64) -> Self {
        Self { name: name.into(), weight, tokens_available: 0, epochs: 0.0 }
    }
}

/// A fifteen-dataset reference mix: token counts
/// (billions), weights (percent) and epochs.
pub const REFERENCE_MIX: [(&str, f64, f64, f64); 15] = [
    ("Books3", 25.7, 14.3, 1.5),
    ("OpenWebText2", 14.8, 19.3, 3.6),
    ("Stack Exchange", 11.6, 5.7, 1.4),
    ("PubMed Abstracts", 4.4, 2.9, 1.8),
    ("Wikipedia", 4.2, 4.8, 3.2),
    ("Gutenberg (PG-19)", 2.7, 0.9, 0.9),
    ("BookCorpus2", 1.5, 1.0, 1.8),
    ("NIH ExPorter", 0.3, 0.2, 1.8),
    ("ArXiv", 20.8, 1.4, 0.2),
    ("GitHub", 24.3, 1.6, 0.2),
    ("Pile-CC", 49.8, 9.4, 0.5),
    ("CC-2020-50", 68.7, 13.0, 0.5),
    ("CC-2021-04", 82.6, 15.7, 0.5),
    ("Realnews", 21.9, 9.0, 1.1),
    ("CC-Stories", 5.3, 0.9, 0.5),
];

/// Specs built from [`REFERENCE_MIX`]. The percentages add up to 100.1,
/// so weights are divided by their sum.
pub fn reference_mix_specs() -> Vec<DatasetSpec> {
    let total: f64 = REFERENCE_MIX.iter().map(|r| r.2).sum();
    REFERENCE_MIX
        .iter()
        .map(|&(name, tokens_b, pct, epochs)| DatasetSpec {
            name: name.to_string(),
            weight: pct / total,
            tokens_available: (tokens_b * 1e9).round() as u64,
            epochs,
        })
        .collect()
}

/// Rescale weights to sum to one.
pub fn normalize_weights(specs: &mut [DatasetSpec]) -> Result<(), BlendError> {
    let total: f64 = specs.iter().map(|s| s.weight).sum();
    if specs.is_empty() {
        return Err(BlendError::NoDatasets);
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(BlendError::WeightSum(total));
    }
    for s in specs.iter_mut() {
        s.weight /= total;
    }
    Ok(())
}

pub fn validate_specs(specs: &[DatasetSpec]) -> Result<(), BlendError> {
    if specs.is_empty() {
        return Err(BlendError::NoDatasets);
    }
    for s in specs {
        if !(s.weight > 0.0 && s.weight <= 1.0) {
            return Err(BlendError::Weight { name: s.name.clone(), weight: s.weight });
        }
    }
    let total: f64 = specs.iter().map(|s| s.weight).sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(BlendError::WeightSum(total));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlendState {
    /// Samples drawn so far from each dataset, in `specs` order.
    pub drawn: Vec<u64>,
    /// `weight × Σ drawn − drawn`, refreshed after each batch.
    pub credit: Vec<f64>,
    pub step: u64,
}

impl BlendState {
    pub fn new(num_datasets: usize) -> Self {
        Self { drawn: vec![0; num_datasets], credit: vec![0.0; num_datasets], step: 0 }
    }

    pub fn total_drawn(&self) -> u64 {
        self.drawn.iter().sum()
    }

    /// `drawn_i − weight_i × total`, i.e. the negated credit.
    pub fn deviation(&self, specs: &[DatasetSpec]) -> Vec<f64> {
        let total = self.total_drawn() as f64;
        self.drawn.iter().zip(specs).map(|(&d, s)| d as f64 - s.weight * total).collect()
    }

    /// Passes over each dataset implied by the draws, given `tokens_per_sample`.
    pub fn epochs(&self, specs: &[DatasetSpec], tokens_per_sample: f64) -> Vec<f64> {
        self.drawn
            .iter()
            .zip(specs)
            .map(
                |(&d, s)| {
                    if s.tokens_available == 0 {
                        0.0
                    } else {
                        d as f64 * tokens_per_sample / s.tokens_available as f64
                    }
                },
            )
            .collect()
    }
}

fn credits(drawn: &[u64], specs: &[DatasetSpec]) -> Vec<f64> {
    let total: u64 = drawn.iter().sum();
    drawn.iter().zip(specs).map(|(&d, s)| s.weight * total as f64 - d as f64).collect()
}

/// Counts for the next batch and the advanced state.
pub fn next_batch_composition(
    state: &BlendState,
    specs: &[DatasetSpec],
    batch_size: u64,
) -> Result<(Vec<u64>, BlendState), BlendError> {
    validate_specs(specs)?;
    if batch_size == 0 {
        return Err(BlendError::EmptyBatch);
    }
    if state.drawn.len() != specs.len() {
        return Err(BlendError::StateMismatch { state: state.drawn.len(), specs: specs.len() });
    }

    // Credits are recomputed from integer counts so rounding never accumulates.
    let credit = credits(&state.drawn, specs);
    let targets: Vec<f64> = credit.iter().zip(specs).map(|(c, s)| c + s.weight * batch_size as f64).collect();

    let mut counts: Vec<u64> = targets.iter().map(|&t| if t > 0.0 { t.floor() as u64 } else { 0 }).collect();
    let assigned: u64 = counts.iter().sum();
    if assigned > batch_size {
        return Err(BlendError::Infeasible(targets));
    }
    let mut remaining = batch_size - assigned;
    if remaining > 0 {
        let mut order: Vec<usize> = (0..specs.len()).filter(|&i| targets[i] > counts[i] as f64).collect();
        // Largest fractional part first; stable sort keeps `specs` order on ties.
        order.sort_by(|&a, &b| {
            let ra = targets[a] - counts[a] as f64;
            let rb = targets[b] - counts[b] as f64;
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
        });
        if (order.len() as u64) < remaining {
            return Err(BlendError::Infeasible(targets));
        }
        for &i in order.iter().take(remaining as usize) {
            counts[i] += 1;
        }
        remaining = 0;
    }
    debug_assert_eq!(remaining, 0);

    let drawn: Vec<u64> = state.drawn.iter().zip(&counts).map(|(d, c)| d + c).collect();
    let next = BlendState { credit: credits(&drawn, specs), drawn, step: state.step + 1 };
    Ok((counts, next))
}

/// Run `steps` batches from a fresh state; returns the per-step counts.
pub fn blend_schedule(
    specs: &[DatasetSpec],
    batch_size: u64,
    steps: u64,
) -> Result<(Vec<Vec<u64>>, BlendState), BlendError> {
    let mut state = BlendState::new(specs.len());
    let mut out = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let (counts, next) = next_batch_composition(&state, specs, batch_size)?;
        out.push(counts);
        state = next;
    }
    Ok((out, state))
}

/// Cycles through a dataset's documents in order, wrapping at the end.
#[derive(Debug, Clone, Default)]
pub struct SequentialCursor {
    position: usize,
    pub epochs_completed: u64,
}

impl SequentialCursor {
    pub fn take<'a, T>(&mut self, items: &'a [T], count: u64) -> Vec<&'a T> {
        if items.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| {
                let item = &items[self.position];
                self.position += 1;
                if self.position == items.len() {
                    self.position = 0;
                    self.epochs_completed += 1;
                }
                item
            })
            .collect()
    }
}
