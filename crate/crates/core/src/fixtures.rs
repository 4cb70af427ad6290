//! Small hand-checkable MDPs.

use crate::mdp::{validate, MdpSpec, RawMdp};
use crate::scalar::Scalar;

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn build<T: Scalar>(raw: RawMdp<f64>) -> MdpSpec<T> {
    let cast = |v: &Vec<f64>| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
    let raw = RawMdp {
        name: raw.name,
        states: raw.states,
        actions: raw.actions,
        transition: raw
            .transition
            .iter()
            .map(|rows| rows.iter().map(cast).collect())
            .collect(),
        reward: raw.reward.iter().map(cast).collect(),
        gamma: T::of(raw.gamma),
        initial: cast(&raw.initial),
        policy: raw.policy.iter().map(cast).collect(),
    };
    validate(raw).expect("fixture is valid")
}

/// One state, one action, a self-loop.
pub fn single_self_loop<T: Scalar>(gamma: f64) -> MdpSpec<T> {
    build(RawMdp {
        name: "single-self-loop".into(),
        states: vec!["s".into()],
        actions: vec!["a".into()],
        transition: vec![vec![vec![1.0]]],
        reward: vec![vec![0.0]],
        gamma,
        initial: vec![1.0],
        policy: vec![vec![1.0]],
    })
}

/// States `s0, s1`, one action `a`; both states move to `s1`. Starts in
/// `s0`, discount `0.5`.
pub fn two_state_chain<T: Scalar>() -> MdpSpec<T> {
    two_state_with_exit(1.0)
}

/// Like [`two_state_chain`] but `s0` moves to `s1` only with probability
/// `2/3`. Its restart hitting matrix is `[[0, 2], [3, 0]]`.
pub fn two_state_chain_perturbed<T: Scalar>() -> MdpSpec<T> {
    two_state_with_exit(2.0 / 3.0)
}

fn two_state_with_exit<T: Scalar>(p_exit: f64) -> MdpSpec<T> {
    build(RawMdp {
        name: "two-state-chain".into(),
        states: labels("s", 2),
        actions: vec!["a".into()],
        transition: vec![vec![vec![1.0 - p_exit, p_exit]], vec![vec![0.0, 1.0]]],
        reward: vec![vec![0.0], vec![1.0]],
        gamma: 0.5,
        initial: vec![1.0, 0.0],
        policy: vec![vec![1.0], vec![1.0]],
    })
}

/// A circular three-cell road. `straight` advances one cell; `left` and
/// `right` leave the road and the car is put back at the first cell. The
/// policy always drives straight, so steering pairs are never occupied.
pub fn car_on_road<T: Scalar>(gamma: f64) -> MdpSpec<T> {
    let n = 3;
    let transition = (0..n)
        .map(|s| {
            let mut straight = vec![0.0; n];
            straight[(s + 1) % n] = 1.0;
            let mut crash = vec![0.0; n];
            crash[0] = 1.0;
            vec![straight, crash.clone(), crash]
        })
        .collect();
    build(RawMdp {
        name: "car-on-road".into(),
        states: labels("road", n),
        actions: vec!["straight".into(), "left".into(), "right".into()],
        transition,
        reward: vec![vec![1.0, -10.0, -10.0]; n],
        gamma,
        initial: vec![1.0, 0.0, 0.0],
        policy: vec![vec![1.0, 0.0, 0.0]; n],
    })
}
