//! Boltzmann-type binary interactions between active and passive spheres,
//! their quasi-invariant mean-field limit, and the distance between the two.
//!
//! Randomness is counter based: every draw is keyed by `(seed, step,
//! particle)`, so results do not depend on how rayon schedules work.

mod distance;
mod ensemble;
mod meanfield;
mod nanbu;
mod sweep;

pub use distance::{empirical_distance, slice_directions, wasserstein1_1d, SLICE_DIRECTIONS};
pub use ensemble::{gaussian_cloud, Ensemble};
pub use meanfield::{
    meanfield_kernel, meanfield_run, meanfield_step, meanfield_velocity, MeanFieldRun, WeightedCloud,
};
pub use nanbu::{
    binary_interact, control_at, draw_pairs, nanbu_step, run_nanbu, step_count, KineticParams, KineticRun,
    LabelMode, PairDraw, StepStats,
};
pub use sweep::{quasi_invariant_sweep, SweepConfig, SweepReport, SweepRow};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for draws made once at initialization.
pub(crate) const INIT_STREAM: u64 = u64::MAX;

/// Generator for one particle at one step. Each particle owns 8 words
/// (four `u64` draws) of the stream.
pub(crate) fn particle_rng(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * 8);
    rng
}
