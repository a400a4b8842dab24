//! Walk definitions, block-diagonal states and their exact evolution.
//!
//! A state `ρ = Σ_i ρ_i ⊗ |i⟩⟨i|` is stored as a sparse map from vertex to its
//! chirality block `ρ_i`; one step of the walk is
//! `ρ'_i = Σ_j B^i_j ρ_j B^i_j*`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OqrwError, Result};
use crate::matrix::CMatrix;
use crate::scalar::Real;

/// Vertex label. Graph vertices are `1..=count`; lattice sites are signed.
pub type Vertex = i64;

/// Default tolerance for the Kraus normalization check.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-10;
/// Blocks whose trace falls below this are dropped after a step.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;
/// Default hard cap on the number of lattice sites a state may span.
pub const DEFAULT_WINDOW_CAP: usize = 100_000;
/// Tolerance used when checking state invariants (trace, positivity).
pub const STATE_TOL: f64 = 1e-9;

/// States with at least this many blocks are stepped in parallel.
const PARALLEL_BLOCKS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VertexSpace {
    FiniteGraph { count: usize },
    /// Finite window `[lo, hi]` of the integer lattice.
    LatticeZ { lo: Vertex, hi: Vertex },
}

impl VertexSpace {
    pub fn finite(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(OqrwError::Definition("a graph needs at least one vertex".into()));
        }
        Ok(Self::FiniteGraph { count })
    }

    pub fn lattice(lo: Vertex, hi: Vertex) -> Result<Self> {
        if lo > hi {
            return Err(OqrwError::Definition(format!("empty lattice window [{lo}, {hi}]")));
        }
        Ok(Self::LatticeZ { lo, hi })
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, Self::LatticeZ { .. })
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match *self {
            Self::FiniteGraph { count } => v >= 1 && v <= count as Vertex,
            Self::LatticeZ { lo, hi } => v >= lo && v <= hi,
        }
    }

    /// Every vertex of a finite graph, or every site of the lattice window.
    pub fn vertices(&self) -> Vec<Vertex> {
        match *self {
            Self::FiniteGraph { count } => (1..=count as Vertex).collect(),
            Self::LatticeZ { lo, hi } => (lo..=hi).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Self::FiniteGraph { count } => count,
            Self::LatticeZ { lo, hi } => (hi - lo + 1) as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same_kind(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::FiniteGraph { count: a }, Self::FiniteGraph { count: b }) => a == b,
            (Self::LatticeZ { .. }, Self::LatticeZ { .. }) => true,
            _ => false,
        }
    }
}

/// The family `{B^i_j}` defining a walk.
#[derive(Clone, Debug)]
pub struct TransitionOperators<R: Real> {
    space: VertexSpace,
    dim: usize,
    /// source -> [(target, B^target_source)] sorted by target.
    edges: BTreeMap<Vertex, Vec<(Vertex, CMatrix<R>)>>,
    /// Translation-invariant `(left, right)` pair on the lattice.
    stationary: Option<(CMatrix<R>, CMatrix<R>)>,
    window_cap: usize,
    prune_threshold: R,
}

impl<R: Real> TransitionOperators<R> {
    fn raw(space: VertexSpace, dim: usize) -> Self {
        Self {
            space,
            dim,
            edges: BTreeMap::new(),
            stationary: None,
            window_cap: DEFAULT_WINDOW_CAP,
            prune_threshold: R::lit(DEFAULT_PRUNE_THRESHOLD),
        }
    }

    fn check_block(dim: usize, m: &CMatrix<R>, what: impl FnOnce() -> String) -> Result<()> {
        if m.rows() != dim || m.cols() != dim {
            return Err(OqrwError::Definition(format!(
                "{} is {}x{}, chirality dimension is {dim}",
                what(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }

    fn with_edges(
        space: VertexSpace,
        dim: usize,
        edges: impl IntoIterator<Item = ((Vertex, Vertex), CMatrix<R>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(OqrwError::Definition("chirality dimension must be positive".into()));
        }
        let mut ops = Self::raw(space, dim);
        for ((target, source), m) in edges {
            for v in [target, source] {
                if !space.contains(v) {
                    return Err(OqrwError::Definition(format!("vertex {v} outside {space:?}")));
                }
            }
            Self::check_block(dim, &m, || format!("B^{target}_{source}"))?;
            let out = ops.edges.entry(source).or_default();
            if out.iter().any(|(t, _)| *t == target) {
                return Err(OqrwError::Definition(format!("duplicate edge {source} -> {target}")));
            }
            out.push((target, m));
        }
        for out in ops.edges.values_mut() {
            out.sort_by_key(|(t, _)| *t);
        }
        Ok(ops)
    }

    /// Walk on vertices `1..=count`; edges are keyed `(target, source)`.
    pub fn finite_graph(
        count: usize,
        dim: usize,
        edges: impl IntoIterator<Item = ((Vertex, Vertex), CMatrix<R>)>,
    ) -> Result<Self> {
        Self::with_edges(VertexSpace::finite(count)?, dim, edges)
    }

    /// Lattice walk with explicitly listed edges inside `[lo, hi]`.
    pub fn lattice_edges(
        lo: Vertex,
        hi: Vertex,
        dim: usize,
        edges: impl IntoIterator<Item = ((Vertex, Vertex), CMatrix<R>)>,
    ) -> Result<Self> {
        Self::with_edges(VertexSpace::lattice(lo, hi)?, dim, edges)
    }

    /// Translation-invariant lattice walk: `left` moves `i -> i-1`, `right` moves `i -> i+1`.
    pub fn stationary_lattice(left: CMatrix<R>, right: CMatrix<R>) -> Result<Self> {
        let dim = left.rows();
        if dim == 0 {
            return Err(OqrwError::Definition("chirality dimension must be positive".into()));
        }
        Self::check_block(dim, &left, || "left operator".into())?;
        Self::check_block(dim, &right, || "right operator".into())?;
        let mut ops = Self::raw(VertexSpace::LatticeZ { lo: 0, hi: 0 }, dim);
        ops.stationary = Some((left, right));
        Ok(ops)
    }

    pub fn with_window_cap(mut self, cap: usize) -> Self {
        self.window_cap = cap.max(1);
        self
    }

    pub fn with_prune_threshold(mut self, threshold: R) -> Self {
        self.prune_threshold = threshold;
        self
    }

    pub fn space(&self) -> VertexSpace {
        self.space
    }

    pub fn chirality_dim(&self) -> usize {
        self.dim
    }

    pub fn window_cap(&self) -> usize {
        self.window_cap
    }

    pub fn prune_threshold(&self) -> R {
        self.prune_threshold
    }

    pub fn stationary_pair(&self) -> Option<(&CMatrix<R>, &CMatrix<R>)> {
        self.stationary.as_ref().map(|(b, c)| (b, c))
    }

    /// Operators leaving `source`, in ascending target order.
    pub fn outgoing(&self, source: Vertex) -> Vec<(Vertex, &CMatrix<R>)> {
        match &self.stationary {
            Some((b, c)) => vec![(source - 1, b), (source + 1, c)],
            None => self
                .edges
                .get(&source)
                .map(|out| out.iter().map(|(t, m)| (*t, m)).collect())
                .unwrap_or_default(),
        }
    }

    /// `B^target_source`, if present.
    pub fn operator(&self, target: Vertex, source: Vertex) -> Option<&CMatrix<R>> {
        self.outgoing(source).into_iter().find(|(t, _)| *t == target).map(|(_, m)| m)
    }

    /// Sources the normalization is checked on: every graph vertex, every lattice
    /// source with an edge, or the window sites of a stationary walk.
    pub fn sources(&self) -> Vec<Vertex> {
        match (&self.stationary, self.space) {
            (Some(_), space) => space.vertices(),
            (None, VertexSpace::FiniteGraph { .. }) => self.space.vertices(),
            (None, VertexSpace::LatticeZ { .. }) => self.edges.keys().copied().collect(),
        }
    }

    /// All explicit edges as `((target, source), operator)`.
    pub fn edges(&self) -> impl Iterator<Item = ((Vertex, Vertex), &CMatrix<R>)> {
        self.edges
            .iter()
            .flat_map(|(s, out)| out.iter().map(move |(t, m)| ((*t, *s), m)))
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary.is_some()
    }

    /// `Σ_i B^i_j* B^i_j` for one source.
    pub fn kraus_sum(&self, source: Vertex) -> CMatrix<R> {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for (_, b) in self.outgoing(source) {
            acc += &(&b.adjoint() * b);
        }
        acc
    }

    /// Entrywise maximum difference between two walks on the same vertex space.
    pub fn max_operator_diff(&self, other: &Self) -> R {
        if self.space != other.space || self.dim != other.dim {
            return R::infinity();
        }
        match (&self.stationary, &other.stationary) {
            (Some((b1, c1)), Some((b2, c2))) => b1.max_abs_diff(b2).max(c1.max_abs_diff(c2)),
            (None, None) => {
                let a: Vec<_> = self.edges().collect();
                let b: Vec<_> = other.edges().collect();
                if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.0 != y.0) {
                    return R::infinity();
                }
                a.iter().zip(&b).map(|(x, y)| x.1.max_abs_diff(y.1)).fold(R::zero(), R::max)
            }
            _ => R::infinity(),
        }
    }
}

/// Per-source deviation from the Kraus normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub deviations: Vec<(Vertex, f64)>,
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (v, d) in &self.deviations {
            writeln!(f, "source {v}: deviation {d:e}")?;
        }
        write!(
            f,
            "max deviation {:e} (tol {:e}): {}",
            self.max_deviation,
            self.tol,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks `Σ_i B^i_j* B^i_j = I` at every source.
pub fn validate_transitions<R: Real>(ops: &TransitionOperators<R>, tol: R) -> Result<ValidationReport> {
    let dim = ops.chirality_dim();
    let id = CMatrix::<R>::identity(dim);
    let mut deviations = Vec::new();
    for j in ops.sources() {
        for (i, b) in ops.outgoing(j) {
            if b.rows() != dim || b.cols() != dim {
                return Err(OqrwError::Definition(format!("B^{i}_{j} has the wrong shape")));
            }
        }
        deviations.push((j, ops.kraus_sum(j).max_abs_diff(&id).as_f64()));
    }
    let max_deviation = deviations.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(ValidationReport {
        deviations,
        max_deviation,
        tol: tol.as_f64(),
        pass: max_deviation <= tol.as_f64(),
    })
}

/// Block-diagonal walk state `{ρ_i}`; absent vertices carry the zero block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState<R: Real> {
    space: VertexSpace,
    dim: usize,
    blocks: BTreeMap<Vertex, CMatrix<R>>,
    pruned_mass: R,
}

impl<R: Real> BlockState<R> {
    /// Validated state: square PSD blocks of size `dim`, total trace one.
    pub fn new(space: VertexSpace, dim: usize, blocks: BTreeMap<Vertex, CMatrix<R>>) -> Result<Self> {
        let state = Self::new_unchecked(space, dim, blocks)?;
        let tol = R::lit(STATE_TOL);
        for (v, b) in &state.blocks {
            if !b.is_positive_semidefinite(tol)? {
                return Err(OqrwError::CorruptedState(format!("block at {v} is not positive")));
            }
        }
        let total = state.total_trace();
        if (total - R::one()).abs() > tol {
            return Err(OqrwError::CorruptedState(format!("total trace {total} differs from 1")));
        }
        Ok(state)
    }

    /// Shape checks only; used for intermediate or sub-normalized states.
    pub fn new_unchecked(space: VertexSpace, dim: usize, blocks: BTreeMap<Vertex, CMatrix<R>>) -> Result<Self> {
        for (v, b) in &blocks {
            if !space.contains(*v) {
                return Err(OqrwError::Definition(format!("vertex {v} outside {space:?}")));
            }
            if b.rows() != dim || b.cols() != dim {
                return Err(OqrwError::Dimension(format!(
                    "block at {v} is {}x{}, expected {dim}x{dim}",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        Ok(Self {
            space,
            dim,
            blocks,
            pruned_mass: R::zero(),
        })
    }

    /// `rho ⊗ |vertex⟩⟨vertex|`. Lattice windows are fitted around the vertex.
    pub fn single(space: VertexSpace, vertex: Vertex, rho: CMatrix<R>) -> Result<Self> {
        let space = match space {
            VertexSpace::LatticeZ { lo, hi } => VertexSpace::LatticeZ {
                lo: lo.min(vertex - 1),
                hi: hi.max(vertex + 1),
            },
            s => s,
        };
        let dim = rho.rows();
        Self::new(space, dim, BTreeMap::from([(vertex, rho)]))
    }

    /// Lattice state whose window is fitted to the given blocks with one cell of slack.
    pub fn on_lattice(dim: usize, blocks: BTreeMap<Vertex, CMatrix<R>>) -> Result<Self> {
        let lo = blocks.keys().next().copied().unwrap_or(0) - 1;
        let hi = blocks.keys().next_back().copied().unwrap_or(0) + 1;
        Self::new(VertexSpace::lattice(lo, hi)?, dim, blocks)
    }

    pub fn space(&self) -> VertexSpace {
        self.space
    }

    pub fn chirality_dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &BTreeMap<Vertex, CMatrix<R>> {
        &self.blocks
    }

    pub fn block(&self, v: Vertex) -> Option<&CMatrix<R>> {
        self.blocks.get(&v)
    }

    /// Total trace discarded by pruning since this state's lineage began.
    pub fn pruned_mass(&self) -> R {
        self.pruned_mass
    }

    pub fn total_trace(&self) -> R {
        self.blocks.values().map(CMatrix::trace_re).sum()
    }

    /// Shifts every lattice block by `k` sites.
    pub fn translate(&self, k: Vertex) -> Result<Self> {
        let VertexSpace::LatticeZ { lo, hi } = self.space else {
            return Err(OqrwError::Unsupported("translation needs a lattice state".into()));
        };
        Ok(Self {
            space: VertexSpace::LatticeZ { lo: lo + k, hi: hi + k },
            dim: self.dim,
            blocks: self.blocks.iter().map(|(v, b)| (v + k, b.clone())).collect(),
            pruned_mass: self.pruned_mass,
        })
    }

    /// Maximum entrywise block difference over the union of supports.
    pub fn max_block_diff(&self, other: &Self) -> R {
        if self.dim != other.dim {
            return R::infinity();
        }
        let zero = CMatrix::zeros(self.dim, self.dim);
        self.blocks
            .keys()
            .chain(other.blocks.keys())
            .map(|v| {
                let a = self.blocks.get(v).unwrap_or(&zero);
                let b = other.blocks.get(v).unwrap_or(&zero);
                a.max_abs_diff(b)
            })
            .fold(R::zero(), R::max)
    }

    /// Full `Σ_i ρ_i ⊗ |i⟩⟨i|` on `H ⊗ K` (index `h * V + k`), finite graphs only.
    pub fn to_full(&self) -> Result<CMatrix<R>> {
        let VertexSpace::FiniteGraph { count } = self.space else {
            return Err(OqrwError::Unsupported("full matrices need a finite graph".into()));
        };
        let mut out = CMatrix::zeros(self.dim * count, self.dim * count);
        for (v, b) in &self.blocks {
            out += &b.kron(&CMatrix::ket_bra(count, (v - 1) as usize, (v - 1) as usize));
        }
        Ok(out)
    }

    /// Extracts the vertex-diagonal blocks of a full `H ⊗ K` matrix.
    pub fn from_full_diagonal(count: usize, dim: usize, rho: &CMatrix<R>) -> Result<Self> {
        let n = dim * count;
        if rho.rows() != n || rho.cols() != n {
            return Err(OqrwError::Dimension(format!("expected {n}x{n} matrix")));
        }
        let blocks = (0..count)
            .map(|k| {
                let b = CMatrix::from_fn(dim, dim, |a, c| rho[(a * count + k, c * count + k)]);
                ((k + 1) as Vertex, b)
            })
            .filter(|(_, b)| !b.is_zero_within(R::zero()))
            .collect();
        Self::new_unchecked(VertexSpace::finite(count)?, dim, blocks)
    }
}

/// Per-vertex probabilities `p_i = Tr(ρ_i)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WalkDistribution {
    probs: BTreeMap<Vertex, f64>,
}

impl WalkDistribution {
    /// Validated distribution: entries in `[0, 1]`, total within 1e-9 of one.
    pub fn from_probs(probs: BTreeMap<Vertex, f64>) -> Result<Self> {
        if let Some((v, p)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(OqrwError::CorruptedState(format!("probability {p} at vertex {v}")));
        }
        let d = Self { probs };
        if (d.total() - 1.0).abs() > STATE_TOL {
            return Err(OqrwError::CorruptedState(format!("probabilities sum to {}", d.total())));
        }
        Ok(d)
    }

    pub(crate) fn from_map_unchecked(probs: BTreeMap<Vertex, f64>) -> Self {
        Self { probs }
    }

    pub fn point_mass(v: Vertex) -> Self {
        Self {
            probs: BTreeMap::from([(v, 1.0)]),
        }
    }

    /// Probability at `v`; zero off the support.
    pub fn get(&self, v: Vertex) -> f64 {
        self.probs.get(&v).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vertex, f64)> + '_ {
        self.probs.iter().map(|(v, p)| (*v, *p))
    }

    pub fn probs(&self) -> &BTreeMap<Vertex, f64> {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn translate(&self, k: Vertex) -> Self {
        Self {
            probs: self.probs.iter().map(|(v, p)| (v + k, *p)).collect(),
        }
    }

    /// Largest absolute difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .keys()
            .chain(other.probs.keys())
            .map(|&v| (self.get(v) - other.get(v)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_compatible<R: Real>(state: &BlockState<R>, ops: &TransitionOperators<R>) -> Result<()> {
    if state.dim != ops.dim {
        return Err(OqrwError::Dimension(format!(
            "state chirality {} vs walk chirality {}",
            state.dim, ops.dim
        )));
    }
    if !state.space.same_kind(&ops.space) {
        return Err(OqrwError::Definition(format!(
            "state space {:?} does not match walk space {:?}",
            state.space, ops.space
        )));
    }
    Ok(())
}

/// One application of the walk map.
pub fn step<R: Real>(state: &BlockState<R>, ops: &TransitionOperators<R>) -> Result<BlockState<R>> {
    check_compatible(state, ops)?;

    let contributions = |(j, rho): (&Vertex, &CMatrix<R>)| -> Vec<(Vertex, CMatrix<R>)> {
        ops.outgoing(*j).into_iter().map(|(i, b)| (i, b.conjugate(rho))).collect()
    };
    let per_source: Vec<Vec<(Vertex, CMatrix<R>)>> = if state.blocks.len() >= PARALLEL_BLOCKS {
        state.blocks.par_iter().map(contributions).collect()
    } else {
        state.blocks.iter().map(contributions).collect()
    };

    // Sources are merged in ascending order so the summation order never depends on threading.
    let mut next: BTreeMap<Vertex, CMatrix<R>> = BTreeMap::new();
    for (i, m) in per_source.into_iter().flatten() {
        match next.get_mut(&i) {
            Some(acc) => *acc += &m,
            None => {
                next.insert(i, m);
            }
        }
    }

    let mut pruned = state.pruned_mass;
    next.retain(|_, b| {
        let t = b.trace_re();
        if t < ops.prune_threshold {
            pruned += t.max(R::zero());
            false
        } else {
            true
        }
    });

    let space = match state.space {
        VertexSpace::FiniteGraph { count } => VertexSpace::FiniteGraph { count },
        VertexSpace::LatticeZ { lo, hi } => {
            let (lo, hi) = match (next.keys().next(), next.keys().next_back()) {
                (Some(&a), Some(&b)) => (a - 1, b + 1),
                _ => (lo, hi),
            };
            let needed = (hi - lo + 1) as usize;
            if needed > ops.window_cap {
                return Err(OqrwError::WindowOverflow {
                    needed,
                    cap: ops.window_cap,
                });
            }
            VertexSpace::LatticeZ { lo, hi }
        }
    };
    if let Some(v) = next.keys().find(|v| !space.contains(**v)) {
        return Err(OqrwError::Definition(format!("walk sends mass to vertex {v} outside the space")));
    }

    Ok(BlockState {
        space,
        dim: state.dim,
        blocks: next,
        pruned_mass: pruned,
    })
}

/// `n` successive steps.
pub fn evolve<R: Real>(state: &BlockState<R>, ops: &TransitionOperators<R>, n: usize) -> Result<BlockState<R>> {
    check_compatible(state, ops)?;
    let mut cur = state.clone();
    for _ in 0..n {
        cur = step(&cur, ops)?;
    }
    Ok(cur)
}

/// Position law `p_i = Tr(ρ_i)`.
pub fn distribution<R: Real>(state: &BlockState<R>) -> Result<WalkDistribution> {
    let mut probs = BTreeMap::new();
    for (v, b) in &state.blocks {
        let t = b.trace()?;
        let (re, im) = (t.re.as_f64(), t.im.as_f64());
        if im.abs() > STATE_TOL {
            return Err(OqrwError::CorruptedState(format!("trace at {v} has imaginary part {im:e}")));
        }
        if re < -1e-12 {
            return Err(OqrwError::CorruptedState(format!("negative probability {re:e} at {v}")));
        }
        probs.insert(*v, re.max(0.0));
    }
    Ok(WalkDistribution::from_map_unchecked(probs))
}

/// Trace bookkeeping for long runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceReport {
    pub total_trace: f64,
    pub pruned_mass: f64,
    /// `total_trace + pruned_mass - 1`.
    pub drift: f64,
}

pub fn trace_report<R: Real>(state: &BlockState<R>) -> TraceReport {
    let total_trace = state.total_trace().as_f64();
    let pruned_mass = state.pruned_mass.as_f64();
    TraceReport {
        total_trace,
        pruned_mass,
        drift: total_trace + pruned_mass - 1.0,
    }
}

/// The full map `Σ_{i,j} M^i_j ρ M^i_j*` with `M^i_j = B^i_j ⊗ |i⟩⟨j|` on `H ⊗ K`.
///
/// Materializes every `M^i_j`, so it is only meant for small graphs.
pub fn apply_full_map<R: Real>(rho: &CMatrix<R>, ops: &TransitionOperators<R>) -> Result<CMatrix<R>> {
    let VertexSpace::FiniteGraph { count } = ops.space else {
        return Err(OqrwError::Unsupported("the full map is only built for finite graphs".into()));
    };
    let n = ops.dim * count;
    if rho.rows() != n || rho.cols() != n {
        return Err(OqrwError::Definition(format!(
            "state is {}x{}, walk acts on dimension {n}",
            rho.rows(),
            rho.cols()
        )));
    }
    let mut out = CMatrix::zeros(n, n);
    for ((i, j), b) in ops.edges() {
        let m = b.kron(&CMatrix::ket_bra(count, (i - 1) as usize, (j - 1) as usize));
        out += &m.conjugate(rho);
    }
    Ok(out)
}
