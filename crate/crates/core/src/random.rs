//! Seeded random MDPs for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::mdp::{validate, MdpSpec, RawMdp};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomMdpConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Probability that an individual row entry is zeroed. Every row keeps at
    /// least one positive entry.
    pub sparsity: f64,
}

/// Random probability vector of length `n`: normalized `Exp(1)` weights
/// with each entry dropped with probability `sparsity`.
pub fn probability_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<f64> {
    let keep_one = rng.random_range(0..n);
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            if i != keep_one && rng.random::<f64>() < sparsity {
                0.0
            } else {
                -(1.0 - rng.random::<f64>()).ln() + 1e-3
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

pub fn random_mdp<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: RandomMdpConfig) -> MdpSpec<T> {
    let (ns, na) = (cfg.n_states, cfg.n_actions);
    let cast = |v: Vec<f64>| v.into_iter().map(T::of).collect::<Vec<T>>();
    let transition = (0..ns)
        .map(|_| {
            (0..na)
                .map(|_| cast(probability_vector(rng, ns, cfg.sparsity)))
                .collect()
        })
        .collect();
    let policy = (0..ns)
        .map(|_| cast(probability_vector(rng, na, cfg.sparsity)))
        .collect();
    let initial = cast(probability_vector(rng, ns, cfg.sparsity));
    let reward = (0..ns)
        .map(|_| (0..na).map(|_| T::of(rng.random::<f64>())).collect())
        .collect();
    let raw = RawMdp {
        name: "random".into(),
        states: (0..ns).map(|i| format!("s{i}")).collect(),
        actions: (0..na).map(|i| format!("a{i}")).collect(),
        transition,
        reward,
        gamma: T::of(cfg.gamma),
        initial,
        policy,
    };
    validate(raw).expect("generated rows are stochastic")
}

/// Reorders states and actions: new state `i` is old state `state_perm[i]`,
/// likewise for actions. Labels travel with their states and actions.
pub fn permuted<T: Scalar>(mdp: &MdpSpec<T>, state_perm: &[usize], action_perm: &[usize]) -> MdpSpec<T> {
    let ns = mdp.states().len();
    let na = mdp.actions().len();
    assert_eq!(state_perm.len(), ns);
    assert_eq!(action_perm.len(), na);
    let raw = RawMdp {
        name: mdp.name().to_string(),
        states: state_perm.iter().map(|&s| mdp.states()[s].clone()).collect(),
        actions: action_perm.iter().map(|&a| mdp.actions()[a].clone()).collect(),
        transition: state_perm
            .iter()
            .map(|&s| {
                action_perm
                    .iter()
                    .map(|&a| state_perm.iter().map(|&s2| mdp.transition(s, a, s2)).collect())
                    .collect()
            })
            .collect(),
        reward: state_perm
            .iter()
            .map(|&s| action_perm.iter().map(|&a| mdp.reward(s, a)).collect())
            .collect(),
        gamma: mdp.gamma(),
        initial: state_perm.iter().map(|&s| mdp.initial()[s]).collect(),
        policy: state_perm
            .iter()
            .map(|&s| action_perm.iter().map(|&a| mdp.policy(s, a)).collect())
            .collect(),
    };
    validate(raw).expect("permutation preserves validity")
}

/// Random reordering of states and actions, returning the permutations used.
pub fn shuffled<T: Scalar, R: Rng + ?Sized>(rng: &mut R, mdp: &MdpSpec<T>) -> (MdpSpec<T>, Vec<usize>, Vec<usize>) {
    let mut sp: Vec<usize> = (0..mdp.states().len()).collect();
    let mut ap: Vec<usize> = (0..mdp.actions().len()).collect();
    sp.shuffle(rng);
    ap.shuffle(rng);
    (permuted(mdp, &sp, &ap), sp, ap)
}

/// Renames states and actions (`"s" → prefix + "s"`), keeping all tables.
pub fn renamed<T: Scalar>(mdp: &MdpSpec<T>, prefix: &str) -> MdpSpec<T> {
    let mut raw = mdp.to_raw();
    for l in raw.states.iter_mut().chain(raw.actions.iter_mut()) {
        *l = format!("{prefix}{l}");
    }
    validate(raw).expect("renaming preserves validity")
}
