//! Parallel driver for the Monte Carlo simulation.

use disac::montecarlo::{simulate_chunk, SimAccumulator, SimConfig, SimResult};
use disac::plan_schedule;
use rayon::prelude::*;

/// Runs the chunks of `config` on the current rayon pool and merges them in
/// chunk order, giving the same bits as
/// [`disac::montecarlo::simulate_schedule`].
pub fn simulate_parallel(config: &SimConfig) -> disac::Result<SimResult> {
    let plan = plan_schedule(&config.model, &config.schedule)?;
    let ranges: Vec<_> = config.chunks().collect();
    let parts = ranges
        .into_par_iter()
        .map(|r| simulate_chunk(config, &plan, r))
        .collect::<disac::Result<Vec<_>>>()?;
    let mut acc = SimAccumulator::default();
    for p in &parts {
        acc.merge(p);
    }
    Ok(SimResult::from_accumulator(config, &plan, &acc))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool when
/// `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
