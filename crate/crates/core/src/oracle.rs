//! Simulation and series oracles, independent of the linear solves they are
//! used to check.
//!
//! Every episode draws from its own ChaCha stream keyed by `(seed, episode)`,
//! so results do not depend on how episodes are scheduled across threads.
//! Reductions are over integer counts and therefore exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::mdp::{induced_transition, initial_pair_distribution, MdpSpec, TransitionMatrix};
use crate::restart::RestartChain;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("all {0} episodes hit the step cap before reaching the target")]
    AllCensored(u64),
    #[error("hitting time from a pair to itself is zero by definition")]
    DiagonalNotEstimated,
    #[error("pair index {index} out of range for {len} pairs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub episodes: u64,
    /// Per-episode step cap.
    pub max_steps: u64,
    /// Truncation horizon for series oracles.
    pub horizon: usize,
}

impl SimConfig {
    pub fn new(seed: u64, episodes: u64, max_steps: u64) -> Self {
        Self {
            seed,
            episodes,
            max_steps,
            horizon: 0,
        }
    }

    /// `min(10⁶ / (1−γ), 10⁷)`.
    pub fn default_max_steps(gamma: f64) -> u64 {
        (1e6 / (1.0 - gamma)).min(1e7) as u64
    }

    fn check(&self) -> Result<(), OracleError> {
        if self.episodes == 0 {
            return Err(OracleError::InvalidConfig("episodes must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(OracleError::InvalidConfig("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of a mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// Episodes run, censored ones included.
    pub samples: u64,
    /// Episodes that hit the step cap.
    pub censored: u64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors of the mean. A zero
    /// standard error requires exact agreement up to `1e-12`.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error + 1e-12 * value.abs().max(1.0)
    }
}

/// Inverse-CDF sampling of each column of a column-stochastic matrix.
#[derive(Debug, Clone)]
pub struct ColumnSampler {
    cdf: Vec<Vec<f64>>,
    last_positive: Vec<usize>,
}

impl ColumnSampler {
    pub fn new<T: Scalar>(p: &TransitionMatrix<T>) -> Self {
        let n = p.len();
        let mut cdf = Vec::with_capacity(n);
        let mut last_positive = Vec::with_capacity(n);
        for cur in 0..n {
            let mut acc = 0.0;
            let mut last = 0;
            let col: Vec<f64> = (0..n)
                .map(|next| {
                    let w = p.prob(next, cur).as_f64();
                    if w > 0.0 {
                        last = next;
                    }
                    acc += w;
                    acc
                })
                .collect();
            cdf.push(col);
            last_positive.push(last);
        }
        Self { cdf, last_positive }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Next pair from `cur` given a uniform draw `u ∈ [0, 1)`.
    #[inline]
    pub fn next(&self, cur: usize, u: f64) -> usize {
        let col = &self.cdf[cur];
        let k = col.partition_point(|&c| c <= u);
        if k >= col.len() {
            self.last_positive[cur]
        } else {
            k
        }
    }
}

/// Random stream for one episode.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Truncated occupancy series with its tail bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOccupancy<T> {
    pub values: Vec<T>,
    /// `γ^{H+1} / (1−γ)`, an entrywise bound on the omitted tail.
    pub error_bound: T,
}

/// `Σ_{t=0}^{H} γ^t P_π^t ρ₀` by repeated matrix-vector products.
pub fn occupancy_truncated<T: Scalar>(mdp: &MdpSpec<T>, horizon: usize) -> TruncatedOccupancy<T> {
    let p = induced_transition(mdp);
    let gamma = mdp.gamma();
    let mut term = initial_pair_distribution(mdp);
    let mut values = term.clone();
    for _ in 0..horizon {
        term = p.step(&term).into_iter().map(|v| gamma * v).collect();
        for (acc, &t) in values.iter_mut().zip(&term) {
            *acc = *acc + t;
        }
    }
    let error_bound = gamma.powi(horizon as i32 + 1) / (T::one() - gamma);
    TruncatedOccupancy { values, error_bound }
}

/// Pairs visited by one episode of a chain: `start` followed by `steps`
/// sampled transitions.
pub fn trajectory<T: Scalar>(
    p: &TransitionMatrix<T>,
    start: usize,
    steps: u64,
    seed: u64,
    episode: u64,
) -> Result<Vec<usize>, OracleError> {
    check_index(start, p.len())?;
    let sampler = ColumnSampler::new(p);
    let mut rng = episode_rng(seed, episode);
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut x = start;
    out.push(x);
    for _ in 0..steps {
        x = sampler.next(x, rng.random::<f64>());
        out.push(x);
    }
    Ok(out)
}

/// Episode 0 of the restart chain from `start`, `config.max_steps` steps long.
pub fn simulate_restart<T: Scalar>(
    chain: &RestartChain<T>,
    start: usize,
    config: &SimConfig,
) -> Result<Vec<usize>, OracleError> {
    config.check()?;
    trajectory(chain.matrix(), start, config.max_steps, config.seed, 0)
}

fn check_index(index: usize, len: usize) -> Result<(), OracleError> {
    if index >= len {
        Err(OracleError::IndexOutOfRange { index, len })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    hits: u64,
    sum: u128,
    sum_sq: u128,
    censored: u64,
}

impl Moments {
    fn merge(self, o: Self) -> Self {
        Self {
            hits: self.hits + o.hits,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            censored: self.censored + o.censored,
        }
    }
}

/// Monte Carlo estimate of the expected first-hitting time of `target` from
/// `start` on any column-stochastic chain (pass `chain.matrix()` for the
/// restart chain).
///
/// Episodes that reach `max_steps` without hitting are censored: excluded
/// from the mean and counted in [`Estimate::censored`].
pub fn estimate_hitting<T: Scalar>(
    p: &TransitionMatrix<T>,
    target: usize,
    start: usize,
    config: &SimConfig,
) -> Result<Estimate, OracleError> {
    config.check()?;
    check_index(target, p.len())?;
    check_index(start, p.len())?;
    if target == start {
        return Err(OracleError::DiagonalNotEstimated);
    }
    let sampler = ColumnSampler::new(p);
    let m = (0..config.episodes)
        .into_par_iter()
        .map(|episode| {
            let mut rng = episode_rng(config.seed, episode);
            let mut x = start;
            for step in 1..=config.max_steps {
                x = sampler.next(x, rng.random::<f64>());
                if x == target {
                    let t = step as u128;
                    return Moments {
                        hits: 1,
                        sum: t,
                        sum_sq: t * t,
                        censored: 0,
                    };
                }
            }
            Moments {
                censored: 1,
                ..Moments::default()
            }
        })
        .reduce(Moments::default, Moments::merge);

    if m.hits == 0 {
        return Err(OracleError::AllCensored(m.censored));
    }
    let n = m.hits as u128;
    let mean = m.sum as f64 / n as f64;
    let std_error = if n > 1 {
        // Exact integer numerator: n Σt² − (Σt)².
        let num = n * m.sum_sq - m.sum * m.sum;
        let var = num as f64 / (n * (n - 1)) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std_error,
        samples: config.episodes,
        censored: m.censored,
    })
}

/// Burn-in used by [`estimate_stationary`]: `max(100, ⌈10/(1−γ)⌉)` steps.
pub fn burn_in(gamma: f64) -> u64 {
    (10.0 / (1.0 - gamma)).ceil().max(100.0) as u64
}

/// Empirical visit frequencies of the restart chain.
///
/// Each episode starts at a uniformly drawn pair, discards a burn-in and
/// then counts `max_steps` visits.
pub fn estimate_stationary<T: Scalar>(chain: &RestartChain<T>, config: &SimConfig) -> Result<Vec<f64>, OracleError> {
    config.check()?;
    let n = chain.len();
    let sampler = ColumnSampler::new(chain.matrix());
    let burn = burn_in(chain.gamma().as_f64());
    let counts = (0..config.episodes)
        .into_par_iter()
        .map(|episode| {
            let mut rng = episode_rng(config.seed, episode);
            let mut counts = vec![0u64; n];
            let mut x = rng.random_range(0..n);
            for _ in 0..burn {
                x = sampler.next(x, rng.random::<f64>());
            }
            for _ in 0..config.max_steps {
                x = sampler.next(x, rng.random::<f64>());
                counts[x] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let total = (config.episodes * config.max_steps) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}
