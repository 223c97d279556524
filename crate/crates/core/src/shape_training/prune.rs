use super::ShapeTrainingError;

/// Length of a full-scale training run, used as the default end of the pruning window.
pub const DEFAULT_END_ITER: u64 = 30_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub iteration: u64,
    pub live_mask: Vec<bool>,
    pub learning_rate: f64,
    pub warmup_iters: u64,
    pub end_iter: u64,
    pub target_total: usize,
}

/// Live-count budget at `state.iteration`.
///
/// Flat at `initial_count` through warmup, linear down to `target_total` at `end_iter`, flat
/// afterwards. Inside the window the budget is the floor of the interpolated value.
pub fn prune_schedule(
    state: &TrainState,
    initial_count: usize,
) -> Result<usize, ShapeTrainingError> {
    if state.target_total > initial_count {
        return Err(ShapeTrainingError::BadSchedule(format!(
            "target {} exceeds initial count {initial_count}",
            state.target_total
        )));
    }
    if state.end_iter < state.warmup_iters {
        return Err(ShapeTrainingError::BadSchedule(format!(
            "end iteration {} precedes warmup {}",
            state.end_iter, state.warmup_iters
        )));
    }
    let it = state.iteration;
    if it <= state.warmup_iters {
        return Ok(initial_count);
    }
    if it >= state.end_iter {
        return Ok(state.target_total);
    }
    let drop = (initial_count - state.target_total) as u128;
    let done = u128::from(it - state.warmup_iters);
    let span = u128::from(state.end_iter - state.warmup_iters);
    let removed = (drop * done).div_ceil(span);
    Ok(initial_count - removed as usize)
}

/// Kills the lowest-opacity live splats until `target` remain. Ties go by index, so the
/// result is a pure function of the inputs. A target at or above the live count is a no-op.
pub fn prune(opacities: &[f64], live_mask: &[bool], target: usize) -> Vec<bool> {
    let mut live: Vec<usize> = (0..live_mask.len()).filter(|&i| live_mask[i]).collect();
    let mut mask = live_mask.to_vec();
    if target >= live.len() {
        return mask;
    }
    let kill = live.len() - target;
    let key = |&a: &usize, &b: &usize| opacities[a].total_cmp(&opacities[b]).then(a.cmp(&b));
    live.select_nth_unstable_by(kill - 1, key);
    for &i in &live[..kill] {
        mask[i] = false;
    }
    mask
}
