use rayon::prelude::*;

use super::EnsembleStats;
use crate::grid::GridSpec;
use crate::measurement::DiscreteSimulator;
use crate::rng::{stream, SimRng};
use crate::sse::{SseConfig, SseIntegrator, TrajectoryResult, WienerPath};
use crate::wavefunction::WaveFunction;
use crate::{Error, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "QTRAJ_THREADS";

/// Size the global rayon pool from [`THREADS_ENV`] if it is set. Call once,
/// before any ensemble work.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::config(format!("cannot configure thread pool: {e}")))
}

/// Run `f(worker, i, rng_i)` for `i < m` in parallel, where `rng_i` is
/// stream `i` of `master_seed` and each rayon job owns a `worker` built by
/// `init`. Results come back in index order; any failure fails the batch
/// with every failing index listed.
pub fn par_map_indexed<W, T, I, F>(m: usize, master_seed: u64, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> W + Sync + Send,
    F: Fn(&mut W, usize, &mut SimRng) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..m)
        .into_par_iter()
        .map_init(&init, |w, i| f(w, i, &mut stream(master_seed, i as u64)))
        .collect();
    let mut ok = Vec::with_capacity(m);
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failed.push((i, e)),
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(Error::Ensemble(failed))
    }
}

/// The dynamics each ensemble member follows.
#[derive(Clone)]
pub enum Simulation {
    Discrete { sim: DiscreteSimulator, n_steps: usize },
    Sse { grid: GridSpec, cfg: SseConfig },
}

#[derive(Clone)]
pub struct EnsembleSpec {
    pub psi0: WaveFunction,
    pub sim: Simulation,
}

enum Worker {
    Discrete(DiscreteSimulator, usize),
    Sse(SseIntegrator),
}

/// All `m` trajectories, member `i` driven by stream `i` of `master_seed`.
pub fn ensemble_trajectories(spec: &EnsembleSpec, m: usize, master_seed: u64) -> Result<Vec<TrajectoryResult>> {
    if m == 0 {
        return Err(Error::config("ensemble size must be >= 1"));
    }
    // Build once up front so configuration errors surface unwrapped.
    let proto = match &spec.sim {
        Simulation::Discrete { sim, n_steps } => Worker::Discrete(sim.clone(), *n_steps),
        Simulation::Sse { grid, cfg } => Worker::Sse(SseIntegrator::new(grid, cfg)?),
    };
    let init = || match &proto {
        Worker::Discrete(s, n) => Worker::Discrete(s.clone(), *n),
        Worker::Sse(i) => Worker::Sse(i.clone()),
    };
    par_map_indexed(m, master_seed, init, |w, i, rng| match w {
        Worker::Discrete(sim, n) => Ok(sim.run(&spec.psi0, *n, rng)?.0),
        Worker::Sse(integ) => {
            let cfg = integ.config();
            let path = WienerPath::generate(cfg.n_steps, cfg.dt, i as u64, rng);
            Ok(integ.run(&spec.psi0, &path)?.0)
        }
    })
}

/// Aggregate `m` trajectories into checkpoint statistics. Deterministic
/// given `master_seed` and `m`, whatever the thread count.
pub fn ensemble_run(spec: &EnsembleSpec, m: usize, master_seed: u64) -> Result<EnsembleStats> {
    EnsembleStats::from_trajectories(&ensemble_trajectories(spec, m, master_seed)?)
}
