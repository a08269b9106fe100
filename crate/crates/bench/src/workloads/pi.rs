//! Monte-Carlo estimate of pi. The unit square is cut into fixed vertical
//! strips, each sampled by its own seeded generator, so the count of points
//! inside the quarter circle does not depend on which thread took a strip.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stwgc::Runtime;

use crate::{run_workers, splitmix64, verify, BenchError, RunConfig, RunReport};

pub const STRIPS: usize = 256;
const YIELD_EVERY: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Uniform seeded points inside each strip.
    Random,
    /// Centres of a regular k x k grid, k = ceil(sqrt(points)), truncated
    /// to `points`.
    Grid,
}

fn strip_points(points: usize, s: usize) -> usize {
    points / STRIPS + usize::from(s < points % STRIPS)
}

/// Points of strip `s` that fall inside the quarter circle.
fn count_strip(points: usize, s: usize, seed: u64, sampling: Sampling, mut tick: impl FnMut()) -> u64 {
    let mut inside = 0;
    let mut hit = |x: f64, y: f64| {
        if x * x + y * y <= 1.0 {
            inside += 1;
        }
    };
    match sampling {
        Sampling::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ s as u64));
            let x0 = s as f64 / STRIPS as f64;
            for i in 0..strip_points(points, s) {
                let x = x0 + rng.gen::<f64>() / STRIPS as f64;
                let y = rng.gen::<f64>();
                hit(x, y);
                if i % YIELD_EVERY == YIELD_EVERY - 1 {
                    tick();
                }
            }
        }
        Sampling::Grid => {
            // Grid points are dealt to strips round-robin by index.
            let k = (points as f64).sqrt().ceil() as usize;
            for (n, i) in (s..points).step_by(STRIPS).enumerate() {
                let x = ((i % k) as f64 + 0.5) / k as f64;
                let y = ((i / k) as f64 + 0.5) / k as f64;
                hit(x, y);
                if n % YIELD_EVERY == YIELD_EVERY - 1 {
                    tick();
                }
            }
        }
    }
    inside
}

/// Native count over every strip.
pub fn reference_inside(points: usize, seed: u64, sampling: Sampling) -> u64 {
    (0..STRIPS).map(|s| count_strip(points, s, seed, sampling, || ())).sum()
}

pub fn run_pi_sampled(cfg: &RunConfig, points: usize, sampling: Sampling) -> Result<RunReport, BenchError> {
    cfg.check_threads()?;
    if points == 0 {
        return Err(BenchError::InvalidArgs("point count must be at least 1".into()));
    }
    let rt = Runtime::new(cfg.runtime.clone())?;
    let threads = cfg.threads;
    let seed = cfg.seed;
    let start = Instant::now();
    let partial = run_workers(&rt, None, threads, |t, m| {
        let mut inside = 0;
        for s in (t..STRIPS).step_by(threads) {
            let n = count_strip(points, s, seed, sampling, || m.yield_point());
            // Each strip result is boxed, as a float-returning function would.
            let boxed = m.alloc_boxed_float(n as f64)?;
            inside += m.float_field(boxed, 0)? as u64;
        }
        Ok(inside)
    })?;
    let inside: u64 = partial.iter().sum();
    let wall_time = start.elapsed();
    verify(cfg, "pi", inside, || reference_inside(points, seed, sampling))?;
    let estimate = 4.0 * inside as f64 / points as f64;
    Ok(RunReport {
        workload: "pi",
        threads,
        wall_time,
        checksum: inside,
        gc: rt.stats(),
        detail: vec![("points", points.to_string()), ("estimate", format!("{estimate:.6}"))],
    })
}

pub fn run_pi(cfg: &RunConfig, points: usize) -> Result<RunReport, BenchError> {
    run_pi_sampled(cfg, points, Sampling::Random)
}
