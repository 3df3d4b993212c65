use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator behind every trial.
pub type TrialRng = Xoshiro256PlusPlus;

// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed material for one trial: a hash of `(master, trial_index)`.
///
/// Streams depend only on this pair, never on which worker runs the trial
/// or in what order.
pub fn seed_material(master: u64, trial_index: u64) -> u64 {
    let a = mix64(master ^ 0x6b74_6f6e_5f73_6565);
    mix64(a ^ mix64(trial_index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn trial_rng(master: u64, trial_index: u64) -> TrialRng {
    TrialRng::seed_from_u64(seed_material(master, trial_index))
}
