//! Quantum-trajectory unraveling: measure the position after every step.
//!
//! From `ρ ⊗ |j⟩⟨j|` the chain jumps to `B^i_j ρ B^i_j* / p(i) ⊗ |i⟩⟨i|` with
//! probability `p(i) = Tr(B^i_j ρ B^i_j*)`; pure states `φ` jump to
//! `B^i_j φ / √p(i)` with `p(i) = ‖B^i_j φ‖²`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{OqrwError, Result};
use crate::matrix::CMatrix;
use crate::scalar::{Real, C};
use crate::walk::{TransitionOperators, Vertex, WalkDistribution, STATE_TOL};

/// Branches at or below this probability are never sampled.
pub const BRANCH_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub enum LocalState<R: Real> {
    Mixed(CMatrix<R>),
    Pure(Vec<C<R>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState<R: Real> {
    pub vertex: Vertex,
    pub local: LocalState<R>,
}

fn norm_sqr<R: Real>(v: &[C<R>]) -> R {
    v.iter().map(|z| z.norm_sqr()).sum()
}

impl<R: Real> TrajectoryState<R> {
    pub fn mixed(vertex: Vertex, rho: CMatrix<R>) -> Result<Self> {
        let s = Self {
            vertex,
            local: LocalState::Mixed(rho),
        };
        s.check()?;
        Ok(s)
    }

    pub fn pure(vertex: Vertex, phi: Vec<C<R>>) -> Result<Self> {
        let s = Self {
            vertex,
            local: LocalState::Pure(phi),
        };
        s.check()?;
        Ok(s)
    }

    /// Unit trace and positivity for mixed locals, unit norm for pure ones.
    pub fn check(&self) -> Result<()> {
        let tol = R::lit(STATE_TOL);
        match &self.local {
            LocalState::Mixed(rho) => {
                let t = rho.trace()?;
                if (t.re - R::one()).abs() > tol || !rho.is_positive_semidefinite(tol)? {
                    return Err(OqrwError::CorruptedState("mixed local state must be a density matrix".into()));
                }
            }
            LocalState::Pure(phi) => {
                if (norm_sqr(phi) - R::one()).abs() > tol {
                    return Err(OqrwError::CorruptedState("pure local state must have unit norm".into()));
                }
            }
        }
        Ok(())
    }

    pub fn chirality_dim(&self) -> usize {
        match &self.local {
            LocalState::Mixed(rho) => rho.rows(),
            LocalState::Pure(phi) => phi.len(),
        }
    }

    /// Density matrix of the local state.
    pub fn density(&self) -> CMatrix<R> {
        match &self.local {
            LocalState::Mixed(rho) => rho.clone(),
            LocalState::Pure(phi) => CMatrix::outer(phi),
        }
    }
}

/// Counter-style stream: one ChaCha stream per `(seed, stream_index)`, one draw per step.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// One outcome of a position measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch<R: Real> {
    pub target: Vertex,
    /// Unnormalized probability as computed.
    pub probability: R,
    /// Normalized post-measurement local state.
    pub local: LocalState<R>,
}

/// Every branch above the cutoff, in ascending target order.
pub fn branches<R: Real>(ts: &TrajectoryState<R>, ops: &TransitionOperators<R>) -> Result<Vec<Branch<R>>> {
    if ts.chirality_dim() != ops.chirality_dim() {
        return Err(OqrwError::Dimension(format!(
            "local state dimension {} vs walk chirality {}",
            ts.chirality_dim(),
            ops.chirality_dim()
        )));
    }
    let cutoff = R::lit(BRANCH_CUTOFF);
    let mut out = Vec::new();
    for (target, b) in ops.outgoing(ts.vertex) {
        match &ts.local {
            LocalState::Mixed(rho) => {
                let m = b.conjugate(rho);
                let p = m.trace_re();
                if p > cutoff {
                    let local = m.scale_real(R::one() / p).hermitize();
                    out.push(Branch {
                        target,
                        probability: p,
                        local: LocalState::Mixed(local),
                    });
                }
            }
            LocalState::Pure(phi) => {
                let v = b.mul_vec(phi);
                let p = norm_sqr(&v);
                if p > cutoff {
                    let s = R::one() / p.sqrt();
                    out.push(Branch {
                        target,
                        probability: p,
                        local: LocalState::Pure(v.into_iter().map(|z| z * s).collect()),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Samples one jump of the trajectory chain.
pub fn trajectory_step<R: Real>(
    ts: &TrajectoryState<R>,
    ops: &TransitionOperators<R>,
    rng: &mut RngStream,
) -> Result<TrajectoryState<R>> {
    let mut bs = branches(ts, ops)?;
    if bs.is_empty() {
        return Err(OqrwError::DeadEnd { vertex: ts.vertex });
    }
    let total: f64 = bs.iter().map(|b| b.probability.as_f64()).sum();
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut pick = bs.len() - 1;
    for (k, b) in bs.iter().enumerate() {
        acc += b.probability.as_f64();
        if u < acc {
            pick = k;
            break;
        }
    }
    let b = bs.swap_remove(pick);
    Ok(TrajectoryState {
        vertex: b.target,
        local: b.local,
    })
}

fn run_one<R: Real>(
    initial: &TrajectoryState<R>,
    ops: &TransitionOperators<R>,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> Result<Vertex> {
    let mut rng = RngStream::new(seed, stream);
    let mut ts = initial.clone();
    for _ in 0..n_steps {
        ts = trajectory_step(&ts, ops, &mut rng)?;
    }
    Ok(ts.vertex)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub empirical: WalkDistribution,
    /// Final vertex of sample `k`, in sample order.
    pub finals: Vec<Vertex>,
}

/// `n_samples` independent trajectories; sample `k` uses stream `k`.
pub fn sample_trajectories<R: Real>(
    initial: &TrajectoryState<R>,
    ops: &TransitionOperators<R>,
    n_steps: usize,
    n_samples: usize,
    seed: u64,
) -> Result<TrajectorySample> {
    if n_samples == 0 {
        return Err(OqrwError::Parameter("at least one sample is required".into()));
    }
    initial.check()?;
    let finals = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| run_one(initial, ops, n_steps, seed, k))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<Vertex, usize> = BTreeMap::new();
    for v in &finals {
        *counts.entry(*v).or_default() += 1;
    }
    let probs = counts
        .into_iter()
        .map(|(v, c)| (v, c as f64 / n_samples as f64))
        .collect();
    Ok(TrajectorySample {
        empirical: WalkDistribution::from_map_unchecked(probs),
        finals,
    })
}

/// Runs a pure trajectory and reports whether every local state kept unit norm.
pub fn pure_stays_pure_check<R: Real>(
    initial: &TrajectoryState<R>,
    ops: &TransitionOperators<R>,
    n_steps: usize,
    rng: &mut RngStream,
) -> Result<bool> {
    let LocalState::Pure(_) = initial.local else {
        return Err(OqrwError::Unsupported("pure-state check needs a pure initial state".into()));
    };
    let tol = R::lit(STATE_TOL);
    let mut ts = initial.clone();
    for _ in 0..n_steps {
        ts = trajectory_step(&ts, ops, rng)?;
        match &ts.local {
            LocalState::Pure(phi) if (norm_sqr(phi) - R::one()).abs() <= tol => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// `Σ_i p(i) · local_i ⊗ |i⟩⟨i|` as a block map: the one-step mean of the chain.
pub fn branch_mean<R: Real>(ts: &TrajectoryState<R>, ops: &TransitionOperators<R>) -> Result<BTreeMap<Vertex, CMatrix<R>>> {
    let mut out = BTreeMap::new();
    for b in branches(ts, ops)? {
        let local = match b.local {
            LocalState::Mixed(m) => m,
            LocalState::Pure(v) => CMatrix::outer(&v),
        };
        out.insert(b.target, local.scale_real(b.probability));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructors::{sqrt3_pair, stationary_z};
    use crate::scalar::c;
    use crate::walk::{step, BlockState, VertexSpace};

    type M = CMatrix<f64>;

    fn shift() -> TransitionOperators<f64> {
        stationary_z(M::zeros(2, 2), M::identity(2)).unwrap()
    }

    fn sqrt3() -> TransitionOperators<f64> {
        let (b, cc) = sqrt3_pair();
        stationary_z(b, cc).unwrap()
    }

    #[test]
    fn deterministic_walk_always_shifts() {
        let phi = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let ts = TrajectoryState::pure(4, phi.clone()).unwrap();
        let mut rng = RngStream::new(9, 0);
        let next = trajectory_step(&ts, &shift(), &mut rng).unwrap();
        assert_eq!(next.vertex, 5);
        assert_eq!(next.local, LocalState::Pure(phi));
    }

    #[test]
    fn sqrt3_branch_probabilities() {
        let ts = TrajectoryState::mixed(0, M::ket_bra(2, 0, 0)).unwrap();
        let bs = branches(&ts, &sqrt3()).unwrap();
        assert_eq!(bs.len(), 2);
        assert_eq!(bs[0].target, -1);
        assert!((bs[0].probability - 1.0 / 3.0).abs() < 1e-15);
        assert!((bs[1].probability - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn branch_mean_equals_step() {
        let ops = sqrt3();
        let rho = M::from_rows(vec![vec![c(0.7, 0.0), c(0.1, 0.2)], vec![c(0.1, -0.2), c(0.3, 0.0)]]).unwrap();
        let ts = TrajectoryState::mixed(2, rho.clone()).unwrap();
        let mean = branch_mean(&ts, &ops).unwrap();
        let exact = step(&BlockState::single(VertexSpace::lattice(2, 2).unwrap(), 2, rho).unwrap(), &ops).unwrap();
        for (v, b) in exact.blocks() {
            assert!(mean[v].max_abs_diff(b) < 1e-15);
        }
        assert_eq!(mean.len(), exact.blocks().len());
    }

    #[test]
    fn zero_steps_is_point_mass() {
        let ts = TrajectoryState::mixed(3, M::ket_bra(2, 0, 0)).unwrap();
        let s = sample_trajectories(&ts, &sqrt3(), 0, 10, 1).unwrap();
        assert_eq!(s.empirical, WalkDistribution::point_mass(3));
    }

    #[test]
    fn pure_start_on_deterministic_walk_is_identical_across_samples() {
        let ts = TrajectoryState::pure(0, vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let s = sample_trajectories(&ts, &shift(), 7, 50, 3).unwrap();
        assert!(s.finals.iter().all(|&v| v == 7));
    }

    #[test]
    fn pure_states_stay_pure() {
        let ts = TrajectoryState::pure(0, vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let mut rng = RngStream::new(42, 0);
        assert!(pure_stays_pure_check(&ts, &sqrt3(), 50, &mut rng).unwrap());
        let mut rng = RngStream::new(42, 1);
        assert!(pure_stays_pure_check(&ts, &shift(), 100, &mut rng).unwrap());
        let mixed = TrajectoryState::mixed(0, M::ket_bra(2, 0, 0)).unwrap();
        assert!(pure_stays_pure_check(&mixed, &shift(), 1, &mut rng).is_err());
    }

    #[test]
    fn dead_end_is_reported() {
        // Vertex 2 has no outgoing operators.
        let ops = TransitionOperators::finite_graph(2, 1, [((2, 1), M::identity(1))]).unwrap();
        let ts = TrajectoryState::mixed(2, M::identity(1)).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert_eq!(trajectory_step(&ts, &ops, &mut rng).unwrap_err(), OqrwError::DeadEnd { vertex: 2 });
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(1, 2);
            move |_| r.uniform()
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(1, 2);
            move |_| r.uniform()
        }).collect();
        let other: Vec<f64> = (0..5).map({
            let mut r = RngStream::new(1, 3);
            move |_| r.uniform()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn invalid_locals_rejected() {
        assert!(TrajectoryState::pure(0, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(TrajectoryState::mixed(0, M::identity(2)).is_err());
    }
}
