/// Polynomial decay: `base · (1 − step/total)^power`, reaching zero at
/// `step = total`. Steps past the end are clamped.
pub fn lr_at_step(step: usize, total_steps: usize, base: f64, power: f64) -> f64 {
    if total_steps == 0 {
        return base;
    }
    let remaining = 1.0 - step.min(total_steps) as f64 / total_steps as f64;
    base * remaining.powf(power)
}
