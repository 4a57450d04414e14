use curator_core::blend::{next_batch_composition, BlendState, DatasetSpec};

/// Steps the scheduler and checks conservation and the deviation bound
/// after every batch. Returns the final state.
pub fn check_bounded(specs: &[DatasetSpec], batch: u64, steps: u64) -> BlendState {
    let mut state = BlendState::new(specs.len());
    for step in 0..steps {
        let (counts, next) = next_batch_composition(&state, specs, batch).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), batch, "step {step}");
        let total = next.total_drawn() as f64;
        assert_eq!(next.total_drawn(), (step + 1) * batch);
        for (i, s) in specs.iter().enumerate() {
            // Deviation recomputed from the integer counts, not from the state's credits.
            let dev = next.drawn[i] as f64 - s.weight * total;
            assert!(dev.abs() < 1.0, "step {step}, {}: {dev}", s.name);
            assert!((next.credit[i] + dev).abs() < 1e-6);
        }
        state = next;
    }
    state
}
