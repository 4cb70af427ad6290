use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::exhaustive::{face_minimizer, Face};
use super::transport::{round_to_marginals, sinkhorn_log, transport_lp};
use super::{ensure_same_mass, gw_objective, Coupling, GwError, GwResult, GwStatus, MetricMeasureTriple, Quadratic};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Configuration for [`gw_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct GwParams {
    /// Entropic temperatures, as multiples of the median squared
    /// hitting-time difference.
    pub epsilon_schedule: Vec<f64>,
    pub restarts: usize,
    pub seed: u64,
    /// Scaling sweeps per entropic solve.
    pub max_iters: usize,
    /// Marginal gap at which scaling stops, relative to total mass.
    pub tol: f64,
}

impl Default for GwParams {
    fn default() -> Self {
        Self {
            epsilon_schedule: (0..8).map(|k| 10f64.powf(-3.0 * k as f64 / 7.0)).collect(),
            restarts: 16,
            seed: 0,
            max_iters: 1_000,
            tol: 1e-10,
        }
    }
}

const LINEARIZATIONS: usize = 10;
const POLISH_ROUNDS: usize = 3;
const FW_ITERS: usize = 200;
const SWAP_SWEEPS: usize = 50;
const FACE_THRESHOLDS: [f64; 4] = [1e-12, 1e-9, 1e-6, 1e-4];
const FACE_MAX_CELLS: usize = 96;

/// Multi-restart entropic GW heuristic.
///
/// Each restart runs entropic transport on the linearized objective along a
/// decreasing temperature schedule, rounds onto the exact marginals, then
/// polishes with Frank–Wolfe steps and face-restricted Newton solves. The
/// reported value is the objective at the returned coupling, so it bounds
/// the true minimum from above.
pub fn gw_solve<T: Scalar>(
    tx: &MetricMeasureTriple<T>,
    ty: &MetricMeasureTriple<T>,
    params: &GwParams,
) -> Result<GwResult<T>, GwError> {
    ensure_same_mass(tx, ty)?;
    if params.restarts == 0 {
        return Err(GwError::Shape("at least one restart is required".into()));
    }
    let ctx = Context::new(tx, ty, params);
    let runs: Vec<Result<(T, Matrix<T>), GwError>> = (0..params.restarts).into_par_iter().map(|r| ctx.run(r)).collect();
    let mut best: Option<(usize, T, Matrix<T>)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let (value, plan) = run?;
        let better = match &best {
            None => true,
            Some((_, v, _)) => value < *v - T::of(1e-12),
        };
        if better {
            best = Some((r, value, plan));
        }
    }
    let (_, _, plan) = best.expect("at least one restart");
    let coupling = Coupling::new(plan);
    let value = gw_objective(tx, ty, &coupling)?;
    Ok(GwResult {
        value,
        coupling,
        status: GwStatus::UpperBound,
        restarts_used: params.restarts,
    })
}

struct Context<'a, T: Scalar> {
    quad: Quadratic<'a, T>,
    a: &'a Matrix<T>,
    b: &'a Matrix<T>,
    p: &'a [T],
    q: &'a [T],
    mass: T,
    scale: T,
    params: &'a GwParams,
}

impl<'a, T: Scalar> Context<'a, T> {
    fn new(tx: &'a MetricMeasureTriple<T>, ty: &'a MetricMeasureTriple<T>, params: &'a GwParams) -> Self {
        let (a, b) = (tx.hitting(), ty.hitting());
        Self {
            quad: Quadratic::new(a, b),
            a,
            b,
            p: tx.measure(),
            q: ty.measure(),
            mass: tx.total_mass(),
            scale: difference_scale(a, b),
            params,
        }
    }

    fn value(&self, mu: &Matrix<T>) -> T {
        super::objective_unchecked(self.a, self.b, mu)
    }

    fn initial(&self, restart: usize) -> Matrix<T> {
        let (m, n) = (self.p.len(), self.q.len());
        if restart == 0 {
            return Coupling::product(self.p, self.q).matrix;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(restart as u64);
        if restart % 2 == 1 {
            // A random vertex of the polytope.
            let cost = Matrix::from_fn(m, n, |_, _| T::of(rng.random::<f64>()));
            transport_lp(&cost, self.p, self.q)
        } else {
            let raw = Matrix::from_fn(m, n, |_, _| T::of(-(1.0 - rng.random::<f64>()).ln()));
            round_to_marginals(&raw, self.p, self.q)
        }
    }

    fn run(&self, restart: usize) -> Result<(T, Matrix<T>), GwError> {
        let start = self.initial(restart);
        let annealed = self.polish(self.anneal(restart, start.clone())?);
        let annealed_value = self.value(&annealed);
        if restart == 0 {
            return Ok((annealed_value, annealed));
        }
        // Annealing from a high temperature forgets the starting point, so
        // the start is also polished on its own to keep restarts diverse.
        let direct = self.polish(start);
        let direct_value = self.value(&direct);
        Ok(if direct_value < annealed_value {
            (direct_value, direct)
        } else {
            (annealed_value, annealed)
        })
    }

    fn anneal(&self, restart: usize, mut mu: Matrix<T>) -> Result<Matrix<T>, GwError> {
        let (m, n) = (self.p.len(), self.q.len());
        let mut f = vec![T::zero(); m];
        let mut g = vec![T::zero(); n];
        let tol = T::of(self.params.tol) * self.mass;
        for &e in &self.params.epsilon_schedule {
            let eps = T::of(e) * self.scale;
            for _ in 0..LINEARIZATIONS {
                let cost = self.quad.gradient(&mu);
                let s = sinkhorn_log(&cost, self.p, self.q, eps, tol, self.params.max_iters, Some((&f, &g)));
                // A finite gap left at the sweep cap is repaired by rounding;
                // only a numerical breakdown is fatal.
                if !s.gap.is_finite() || s.plan.as_slice().iter().any(|v| !v.is_finite()) {
                    return Err(GwError::NoConvergence(format!(
                        "restart {restart}, epsilon {:e}: marginal gap {:e} after {} sweeps",
                        eps.as_f64(),
                        s.gap.as_f64(),
                        s.iterations
                    )));
                }
                let change = s.plan.max_abs_diff(&mu);
                mu = if s.gap <= tol {
                    s.plan
                } else {
                    round_to_marginals(&s.plan, self.p, self.q)
                };
                f = s.f;
                g = s.g;
                if change <= tol {
                    break;
                }
            }
        }
        Ok(round_to_marginals(&mu, self.p, self.q))
    }

    fn polish(&self, mut mu: Matrix<T>) -> Matrix<T> {
        for _ in 0..POLISH_ROUNDS {
            mu = self.frank_wolfe(mu);
            mu = self.swap_search(mu);
            mu = self.refine_faces(mu);
        }
        mu
    }

    /// First-improvement search over 4-cycle moves: shift mass `t` from
    /// `(x1,y2),(x2,y1)` to `(x1,y1),(x2,y2)` (or back) with exact line search.
    fn swap_search(&self, mut mu: Matrix<T>) -> Matrix<T> {
        let (m, n) = (mu.rows(), mu.cols());
        let floor = T::tol(1e-13) * self.scale.max(T::one()) * self.mass * self.mass;
        let mut grad = self.quad.gradient(&mu);
        for _ in 0..SWAP_SWEEPS {
            let mut moved = false;
            for x1 in 0..m {
                for x2 in x1 + 1..m {
                    for y1 in 0..n {
                        for y2 in y1 + 1..n {
                            let cells = [(x1, y1), (x2, y2), (x1, y2), (x2, y1)];
                            let sign = [T::one(), T::one(), -T::one(), -T::one()];
                            let slope = (0..4).fold(T::zero(), |s, k| s + sign[k] * grad[cells[k]]);
                            let mut curve = T::zero();
                            for k in 0..4 {
                                for l in 0..4 {
                                    curve = curve + sign[k] * sign[l] * self.quad.q_entry(cells[k], cells[l]);
                                }
                            }
                            let up = mu[cells[2]].min(mu[cells[3]]);
                            let down = mu[cells[0]].min(mu[cells[1]]);
                            let gain = |t: T| t * slope + t * t * curve;
                            let mut best = (T::zero(), T::zero());
                            let mut consider = |t: T| {
                                let g = gain(t);
                                if g < best.1 {
                                    best = (t, g);
                                }
                            };
                            consider(up);
                            consider(-down);
                            if curve > T::zero() {
                                consider((-slope / (T::of(2.0) * curve)).max(-down).min(up));
                            }
                            if best.1 < -floor {
                                let t = best.0;
                                for k in 0..4 {
                                    mu[cells[k]] = (mu[cells[k]] + sign[k] * t).max(T::zero());
                                }
                                grad = self.quad.gradient(&mu);
                                moved = true;
                            }
                        }
                    }
                }
            }
            if !moved {
                break;
            }
        }
        round_to_marginals(&mu, self.p, self.q)
    }

    fn frank_wolfe(&self, mut mu: Matrix<T>) -> Matrix<T> {
        let floor = T::tol(1e-14) * self.scale.max(T::one()) * self.mass * self.mass;
        for _ in 0..FW_ITERS {
            let grad = self.quad.gradient(&mu);
            let vertex = transport_lp(&grad, self.p, self.q);
            let d = Matrix::from_fn(mu.rows(), mu.cols(), |i, j| vertex[(i, j)] - mu[(i, j)]);
            let slope = inner(&grad, &d);
            if !(slope < -floor) {
                break;
            }
            let curve = self.quad.value(&d);
            let t = if curve > T::zero() {
                (-slope / (T::of(2.0) * curve)).min(T::one())
            } else {
                T::one()
            };
            let next = Matrix::from_fn(mu.rows(), mu.cols(), |i, j| (mu[(i, j)] + t * d[(i, j)]).max(T::zero()));
            mu = round_to_marginals(&next, self.p, self.q);
        }
        mu
    }

    fn refine_faces(&self, mut mu: Matrix<T>) -> Matrix<T> {
        let mut best = self.value(&mu);
        for &thr in &FACE_THRESHOLDS {
            let cut = T::of(thr) * self.mass;
            let cells: Vec<(usize, usize)> = (0..mu.rows())
                .flat_map(|i| (0..mu.cols()).map(move |j| (i, j)))
                .filter(|&(i, j)| mu[(i, j)] > cut)
                .collect();
            if cells.len() > FACE_MAX_CELLS {
                continue;
            }
            if let Face::Minimizer(candidate) = face_minimizer(&self.quad, self.p, self.q, &cells) {
                let candidate = round_to_marginals(&candidate, self.p, self.q);
                let v = self.value(&candidate);
                if v < best {
                    best = v;
                    mu = candidate;
                }
            }
        }
        mu
    }
}

fn inner<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Median of `(A[x][x′] − B[y][y′])²` over all index quadruples, falling back
/// to the mean and then to one when that is zero.
fn difference_scale<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    let mut diffs: Vec<T> = Vec::with_capacity(a.as_slice().len() * b.as_slice().len());
    for &u in a.as_slice() {
        for &v in b.as_slice() {
            diffs.push((u - v) * (u - v));
        }
    }
    let mid = diffs.len() / 2;
    let (_, median, _) = diffs.select_nth_unstable_by(mid, |x, y| x.partial_cmp(y).unwrap());
    if *median > T::zero() {
        return *median;
    }
    let mean = diffs.iter().copied().sum::<T>() / T::of(diffs.len() as f64);
    if mean > T::zero() {
        mean
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gw::{build_triple, gw_exhaustive};
    use crate::random::{random_mdp, RandomMdpConfig};

    #[test]
    fn worked_instances() {
        let chain = build_triple(&fixtures::two_state_chain::<f64>()).unwrap();
        let single = build_triple(&fixtures::single_self_loop::<f64>(0.5)).unwrap();
        let params = GwParams::default();
        let r = gw_solve(&chain, &chain, &params).unwrap();
        assert!(r.value <= 1e-6);
        assert_eq!(r.status, GwStatus::UpperBound);
        assert_eq!(r.restarts_used, 16);
        let r = gw_solve(&chain, &single, &params).unwrap();
        assert!((r.value - 0.5 * 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn default_schedule_spans_three_decades() {
        let s = GwParams::default().epsilon_schedule;
        assert_eq!(s.len(), 8);
        assert_eq!(s[0], 1.0);
        assert!((s[7] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_bounded_by_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = RandomMdpConfig {
            n_states: 2,
            n_actions: 2,
            gamma: 0.6,
            sparsity: 0.0,
        };
        let x = build_triple(&random_mdp::<f64, _>(&mut rng, cfg)).unwrap();
        let y = build_triple(&random_mdp::<f64, _>(&mut rng, cfg)).unwrap();
        let params = GwParams {
            seed: 5,
            ..GwParams::default()
        };
        let r1 = gw_solve(&x, &y, &params).unwrap();
        let r2 = gw_solve(&x, &y, &params).unwrap();
        assert_eq!(r1, r2);
        let exact = gw_exhaustive(&x, &y).unwrap();
        assert!(r1.value >= exact.value - 1e-9);
        assert!(r1.value <= exact.value + 1e-4, "{} vs {}", r1.value, exact.value);
    }

    #[test]
    fn scale_falls_back_when_median_vanishes() {
        let z = Matrix::<f64>::zeros(2, 2);
        assert_eq!(difference_scale(&z, &z), 1.0);
        let a = Matrix::from_rows(vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
        assert_eq!(difference_scale(&a, &z), 4.0);
    }
}
