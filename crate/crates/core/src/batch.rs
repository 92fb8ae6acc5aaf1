//! Independent seeded trials, run on the rayon pool or sequentially.
//!
//! Every trial draws from its own ChaCha8 stream, so results do not depend on
//! scheduling and both paths produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `f(0), …, f(count - 1)` in trial order.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_trials_sequential(count, f)
}

pub fn map_trials_sequential<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
