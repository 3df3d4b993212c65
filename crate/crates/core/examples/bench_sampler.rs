use std::time::Instant;

use kton::sampler::{batch_until_complete, CollectorConfig, Engine};

fn main() {
    for &(n, trials) in &[(1_000u64, 2_000u64), (100_000, 20)] {
        for engine in [Engine::Direct, Engine::Poissonized] {
            let cfg = CollectorConfig::new(n, 1, 1, trials).unwrap().with_engine(engine);
            let t0 = Instant::now();
            let recs = batch_until_complete(&cfg, 1).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            let draws: u64 = recs.iter().map(|r| r.total_draws).sum();
            println!(
                "{engine:?} n={n} trials={trials}: {dt:.3}s, {:.2} ns/draw, mean T {:.1}",
                dt * 1e9 / draws as f64,
                draws as f64 / trials as f64
            );
        }
    }
}
