//! Physical realization of a walk on `H ⊗ K1 ⊗ K2`.
//!
//! Each source `j` gets a unitary dilation `U(j)` on `H ⊗ K1` whose first block
//! column stacks the `B^i_j`. One cycle applies `U = Σ_j U(j) ⊗ |j⟩⟨j|`,
//! pinches `K1` in the vertex basis, swaps `K1` and `K2`, and re-prepares `K1`
//! in its reference state. Reading `H ⊗ K2` after the cycle gives one walk step.
//!
//! Tripartite matrices use the index `(k2 * V + k1) * d + h`: `K2` slowest and
//! `H` fastest, so block matrices read with `K2` blocks outermost and the
//! dilations keep their usual `K1` block-row layout.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{OqrwError, Result};
use crate::matrix::CMatrix;
use crate::scalar::{Real, C};
use crate::walk::{BlockState, TransitionOperators, Vertex, VertexSpace, WalkDistribution, DEFAULT_VALIDATION_TOL, STATE_TOL};

/// Largest tripartite density dimension `d·V²` this module will materialize.
pub const MAX_DENSITY_DIM: usize = 2048;

/// A unitary whose first block column is `[B^{t_0}_j; B^{t_1}_j; ...]` for `target_order = [t_0, t_1, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DilationUnitary<R: Real> {
    source: Vertex,
    matrix: CMatrix<R>,
    target_order: Vec<Vertex>,
}

impl<R: Real> DilationUnitary<R> {
    /// Wraps an externally supplied dilation after checking it against `ops`.
    pub fn from_matrix(
        ops: &TransitionOperators<R>,
        source: Vertex,
        matrix: CMatrix<R>,
        target_order: Vec<Vertex>,
        tol: R,
    ) -> Result<Self> {
        let d = ops.chirality_dim();
        let n = d * target_order.len();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(OqrwError::Dimension(format!(
                "dilation over {} targets must be {n}x{n}",
                target_order.len()
            )));
        }
        let u = Self {
            source,
            matrix,
            target_order,
        };
        if !u.matrix.is_unitary(tol)? {
            return Err(OqrwError::Definition("dilation is not unitary".into()));
        }
        let dev = u.first_column_deviation(ops);
        if dev > tol {
            return Err(OqrwError::Definition(format!(
                "dilation first block column misses the transition operators by {dev:e}"
            )));
        }
        Ok(u)
    }

    pub fn source(&self) -> Vertex {
        self.source
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.matrix
    }

    pub fn target_order(&self) -> &[Vertex] {
        &self.target_order
    }

    /// Block `(row, col)` of size `d`.
    pub fn block(&self, row: usize, col: usize) -> CMatrix<R> {
        let d = self.matrix.rows() / self.target_order.len();
        self.matrix.submatrix(row * d, col * d, d, d)
    }

    /// Max entrywise gap between the first block column and the stacked operators.
    /// Every outgoing target must appear in `target_order`.
    pub fn first_column_deviation(&self, ops: &TransitionOperators<R>) -> R {
        let d = ops.chirality_dim();
        let zero = CMatrix::zeros(d, d);
        let mut dev = R::zero();
        for (r, t) in self.target_order.iter().enumerate() {
            let b = ops.operator(*t, self.source).unwrap_or(&zero);
            dev = dev.max(self.block(r, 0).max_abs_diff(b));
        }
        if ops.outgoing(self.source).iter().any(|(t, _)| !self.target_order.contains(t)) {
            return R::infinity();
        }
        dev
    }
}

fn dot<R: Real>(a: &[C<R>], b: &[C<R>]) -> C<R> {
    a.iter().zip(b).fold(C::zero(), |acc, (x, y)| acc + x.conj() * y)
}

/// Completes orthonormal `columns` to a basis of `C^n` by Gram–Schmidt over the
/// standard basis vectors taken in index order.
fn complete_basis<R: Real>(mut columns: Vec<Vec<C<R>>>, n: usize) -> Vec<Vec<C<R>>> {
    let mut threshold = R::lit(0.5) / R::lit(n as f64).sqrt();
    while columns.len() < n {
        for k in 0..n {
            if columns.len() == n {
                break;
            }
            let mut v = vec![C::zero(); n];
            v[k] = C::new(R::one(), R::zero());
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for q in &columns {
                    let proj = dot(q, &v);
                    for (x, y) in v.iter_mut().zip(q) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&v, &v).re.sqrt();
            if norm > threshold {
                let inv = R::one() / norm;
                columns.push(v.into_iter().map(|z| z * inv).collect());
            }
        }
        threshold *= R::lit(0.1);
    }
    columns
}

/// Deterministic unitary dilation of the operators leaving `source`.
pub fn dilate<R: Real>(ops: &TransitionOperators<R>, source: Vertex) -> Result<DilationUnitary<R>> {
    let d = ops.chirality_dim();
    let outgoing = ops.outgoing(source);
    let deviation = ops.kraus_sum(source).max_abs_diff(&CMatrix::identity(d)).as_f64();
    if outgoing.is_empty() || deviation > DEFAULT_VALIDATION_TOL {
        return Err(OqrwError::CannotDilate {
            source_vertex: source,
            deviation: if outgoing.is_empty() { 1.0 } else { deviation },
        });
    }
    let m = outgoing.len();
    let n = d * m;
    let first: Vec<Vec<C<R>>> = (0..d)
        .map(|col| {
            let mut v = Vec::with_capacity(n);
            for (_, b) in &outgoing {
                v.extend((0..d).map(|row| b[(row, col)]));
            }
            v
        })
        .collect();
    let cols = complete_basis(first, n);
    let mut matrix = CMatrix::from_fn(n, n, |i, j| cols[j][i]);
    // keep the first block column bit-identical to the operators
    for (r, (_, b)) in outgoing.iter().enumerate() {
        matrix.set_submatrix(r * d, 0, b);
    }
    Ok(DilationUnitary {
        source,
        matrix,
        target_order: outgoing.into_iter().map(|(t, _)| t).collect(),
    })
}

/// Finite ring on `[lo, hi]` obtained by wrapping a lattice walk; vertex `k`
/// of the ring is site `lo + k - 1`.
pub fn cyclic_truncation<R: Real>(ops: &TransitionOperators<R>, lo: Vertex, hi: Vertex) -> Result<TransitionOperators<R>> {
    if !ops.space().is_lattice() {
        return Err(OqrwError::Unsupported("cyclic truncation needs a lattice walk".into()));
    }
    let width = hi - lo + 1;
    if width < 3 {
        return Err(OqrwError::Parameter(format!("cyclic window [{lo}, {hi}] needs at least 3 sites")));
    }
    let mut edges: BTreeMap<(Vertex, Vertex), CMatrix<R>> = BTreeMap::new();
    for j in lo..=hi {
        for (t, b) in ops.outgoing(j) {
            let wrapped = lo + (t - lo).rem_euclid(width);
            let key = (wrapped - lo + 1, j - lo + 1);
            match edges.get_mut(&key) {
                Some(acc) => *acc += b,
                None => {
                    edges.insert(key, b.clone());
                }
            }
        }
    }
    TransitionOperators::finite_graph(width as usize, ops.chirality_dim(), edges)
}

/// Density matrix on `H ⊗ K1 ⊗ K2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TripartiteState<R: Real> {
    dim: usize,
    v: usize,
    matrix: CMatrix<R>,
}

impl<R: Real> TripartiteState<R> {
    /// Checks shape, hermiticity and unit trace; positivity too when the matrix is small.
    pub fn new(dim: usize, v: usize, matrix: CMatrix<R>) -> Result<Self> {
        let n = dim * v * v;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(OqrwError::Dimension(format!("tripartite state must be {n}x{n}")));
        }
        let tol = R::lit(STATE_TOL);
        if !matrix.is_hermitian(tol)? {
            return Err(OqrwError::CorruptedState("tripartite state is not Hermitian".into()));
        }
        if (matrix.trace_re() - R::one()).abs() > tol {
            return Err(OqrwError::CorruptedState("tripartite state trace differs from 1".into()));
        }
        if n <= 128 && !matrix.is_positive_semidefinite(tol)? {
            return Err(OqrwError::CorruptedState("tripartite state is not positive".into()));
        }
        Ok(Self { dim, v, matrix })
    }

    pub fn matrix(&self) -> &CMatrix<R> {
        &self.matrix
    }

    pub fn chirality_dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.v
    }

    #[inline]
    fn idx(&self, k2: usize, k1: usize, h: usize) -> usize {
        (k2 * self.v + k1) * self.dim + h
    }

    /// Partial trace over `K1`, as a `(K2 ⊗ H)` matrix with `K2` outer.
    pub fn marginal_hk2(&self) -> CMatrix<R> {
        let (d, v) = (self.dim, self.v);
        CMatrix::from_fn(d * v, d * v, |r, c| {
            let (k2, h) = (r / d, r % d);
            let (k2p, hp) = (c / d, c % d);
            (0..v).fold(C::zero(), |acc, k1| acc + self.matrix[(self.idx(k2, k1, h), self.idx(k2p, k1, hp))])
        })
    }

    /// `K1` marginal (partial trace over `H ⊗ K2`).
    pub fn marginal_k1(&self) -> CMatrix<R> {
        let (d, v) = (self.dim, self.v);
        CMatrix::from_fn(v, v, |a, b| {
            let mut acc = C::zero();
            for k2 in 0..v {
                for h in 0..d {
                    acc += self.matrix[(self.idx(k2, a, h), self.idx(k2, b, h))];
                }
            }
            acc
        })
    }

    /// Largest entry violating the form `Σ_k ρ_k ⊗ |ref⟩⟨ref| ⊗ |k⟩⟨k|`.
    pub fn canonical_violation(&self) -> R {
        let (d, v) = (self.dim, self.v);
        let mut worst = R::zero();
        for r in 0..self.matrix.rows() {
            for c in 0..self.matrix.cols() {
                let (k2, k1) = (r / d / v, (r / d) % v);
                let (k2p, k1p) = (c / d / v, (c / d) % v);
                if k1 != 0 || k1p != 0 || k2 != k2p {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }
}

/// Pinches `subsystem` of a density matrix laid out as `dims[0] ⊗ dims[1] ⊗ ...`
/// (first factor slowest): entries whose subsystem indices differ are zeroed.
pub fn decohere<R: Real>(rho: &CMatrix<R>, subsystem: usize, dims: &[usize]) -> Result<CMatrix<R>> {
    let n: usize = dims.iter().product();
    if subsystem >= dims.len() || rho.rows() != n || rho.cols() != n {
        return Err(OqrwError::Dimension(format!(
            "cannot pinch subsystem {subsystem} of {dims:?} on a {}x{} matrix",
            rho.rows(),
            rho.cols()
        )));
    }
    let inner: usize = dims[subsystem + 1..].iter().product();
    let size = dims[subsystem];
    let digit = |i: usize| (i / inner) % size;
    let mut out = rho.clone();
    for r in 0..n {
        for c in 0..n {
            if digit(r) != digit(c) {
                out[(r, c)] = C::zero();
            }
        }
    }
    Ok(out)
}

/// Conjugation by `I ⊗ S` exchanging `K1` and `K2`.
pub fn swap_k1_k2<R: Real>(state: &TripartiteState<R>) -> TripartiteState<R> {
    let (d, v) = (state.dim, state.v);
    let perm = |i: usize| {
        let (k2, k1, h) = (i / d / v, (i / d) % v, i % d);
        (k1 * v + k2) * d + h
    };
    let n = state.matrix.rows();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(perm(r), perm(c))] = state.matrix[(r, c)];
        }
    }
    TripartiteState { dim: d, v, matrix: out }
}

/// Traces out `K1` and re-prepares it in the reference state `|ref⟩⟨ref|`.
pub fn refresh_k1<R: Real>(state: &TripartiteState<R>) -> TripartiteState<R> {
    let (d, v) = (state.dim, state.v);
    let marginal = state.marginal_hk2();
    let n = state.matrix.rows();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..d * v {
        for c in 0..d * v {
            let (k2, h) = (r / d, r % d);
            let (k2p, hp) = (c / d, c % d);
            out[(state.idx(k2, 0, h), state.idx(k2p, 0, hp))] = marginal[(r, c)];
        }
    }
    TripartiteState { dim: d, v, matrix: out }
}

/// The realization apparatus for one walk: vertex labelling and embedded dilations.
#[derive(Clone, Debug)]
pub struct Realizer<R: Real> {
    dim: usize,
    labels: Vec<Vertex>,
    index: BTreeMap<Vertex, usize>,
    /// Per-source unitary on `K1 ⊗ H` (K1 outer), indexed by K2 position.
    units: Vec<CMatrix<R>>,
    lattice: bool,
}

impl<R: Real> Realizer<R> {
    /// Realizer for a finite-graph walk with deterministic dilations.
    pub fn new(ops: &TransitionOperators<R>) -> Result<Self> {
        let VertexSpace::FiniteGraph { count } = ops.space() else {
            return Err(OqrwError::Unsupported(
                "lattice walks are realized on a cyclic window, see Realizer::cyclic".into(),
            ));
        };
        let dilations = (1..=count as Vertex).map(|j| dilate(ops, j)).collect::<Result<Vec<_>>>()?;
        Self::from_dilations(ops, dilations)
    }

    /// Realizer for a lattice walk wrapped onto the ring `[lo, hi]`.
    pub fn cyclic(ops: &TransitionOperators<R>, lo: Vertex, hi: Vertex) -> Result<Self> {
        let ring = cyclic_truncation(ops, lo, hi)?;
        let mut r = Self::new(&ring)?;
        r.labels = (lo..=hi).collect();
        r.index = r.labels.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        r.lattice = true;
        Ok(r)
    }

    /// Realizer from caller-chosen dilations, one per vertex of a finite graph.
    pub fn from_dilations(ops: &TransitionOperators<R>, dilations: Vec<DilationUnitary<R>>) -> Result<Self> {
        let VertexSpace::FiniteGraph { count } = ops.space() else {
            return Err(OqrwError::Unsupported("dilations are assembled on finite graphs".into()));
        };
        let d = ops.chirality_dim();
        let labels: Vec<Vertex> = (1..=count as Vertex).collect();
        let index: BTreeMap<Vertex, usize> = labels.iter().enumerate().map(|(k, v)| (*v, k)).collect();
        let mut by_source: BTreeMap<Vertex, DilationUnitary<R>> = BTreeMap::new();
        for u in dilations {
            let dev = u.first_column_deviation(ops);
            if dev > R::lit(DEFAULT_VALIDATION_TOL) {
                return Err(OqrwError::Definition(format!(
                    "dilation for source {} misses its operators by {dev:e}",
                    u.source
                )));
            }
            by_source.insert(u.source, u);
        }
        let mut units = Vec::with_capacity(count);
        for j in &labels {
            let u = by_source
                .get(j)
                .ok_or_else(|| OqrwError::Definition(format!("no dilation for source {j}")))?;
            units.push(embed_dilation(u, &index, count, d)?);
        }
        Ok(Self {
            dim: d,
            labels,
            index,
            units,
            lattice: false,
        })
    }

    pub fn labels(&self) -> &[Vertex] {
        &self.labels
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn chirality_dim(&self) -> usize {
        self.dim
    }

    /// Embedded `U(j)` on `K1 ⊗ H`.
    pub fn unit(&self, j: Vertex) -> Option<&CMatrix<R>> {
        self.index.get(&j).map(|&k| &self.units[k])
    }

    fn total_dim(&self) -> usize {
        self.dim * self.labels.len() * self.labels.len()
    }

    fn check_density_size(&self) -> Result<()> {
        if self.total_dim() > MAX_DENSITY_DIM {
            return Err(OqrwError::Unsupported(format!(
                "tripartite dimension {} exceeds {MAX_DENSITY_DIM}",
                self.total_dim()
            )));
        }
        Ok(())
    }

    /// `U = Σ_j U(j) ⊗ |j⟩⟨j|`, block diagonal in `K2`.
    pub fn global_unitary(&self) -> Result<CMatrix<R>> {
        self.check_density_size()?;
        let n = self.total_dim();
        let b = self.dim * self.labels.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, u) in self.units.iter().enumerate() {
            out.set_submatrix(k * b, k * b, u);
        }
        Ok(out)
    }

    /// Canonical embedding `Σ_k ρ_k ⊗ |ref⟩⟨ref| ⊗ |k⟩⟨k|`.
    pub fn embed(&self, state: &BlockState<R>) -> Result<TripartiteState<R>> {
        self.check_density_size()?;
        if state.chirality_dim() != self.dim {
            return Err(OqrwError::Dimension("state chirality differs from the walk".into()));
        }
        let v = self.labels.len();
        let n = self.total_dim();
        let mut m = CMatrix::zeros(n, n);
        for (vertex, rho) in state.blocks() {
            let k = self.position(*vertex)?;
            let base = k * v * self.dim;
            m.set_submatrix(base, base, rho);
        }
        TripartiteState::new(self.dim, v, m)
    }

    fn position(&self, vertex: Vertex) -> Result<usize> {
        self.index
            .get(&vertex)
            .copied()
            .ok_or_else(|| OqrwError::Definition(format!("vertex {vertex} is outside the realization window")))
    }

    /// `U ρ U*` using the block structure of `U`.
    pub fn apply_unitary(&self, state: &TripartiteState<R>) -> TripartiteState<R> {
        let b = self.dim * self.labels.len();
        let v = self.labels.len();
        let mut out = CMatrix::zeros(state.matrix.rows(), state.matrix.cols());
        for k in 0..v {
            for kp in 0..v {
                let block = state.matrix.submatrix(k * b, kp * b, b, b);
                if block.is_zero_within(R::zero()) {
                    continue;
                }
                let res = &(&self.units[k] * &block) * &self.units[kp].adjoint();
                out.set_submatrix(k * b, kp * b, &res);
            }
        }
        TripartiteState {
            dim: state.dim,
            v: state.v,
            matrix: out,
        }
    }

    /// One full cycle: unitary, decoherence of `K1`, swap, refresh.
    pub fn physical_step(&self, state: &TripartiteState<R>) -> Result<TripartiteState<R>> {
        self.check_shape(state)?;
        let viol = state.canonical_violation();
        if viol > R::lit(STATE_TOL) {
            return Err(OqrwError::NotCanonical(format!("off-form entry of size {viol:e}")));
        }
        let after_u = self.apply_unitary(state);
        let dims = [state.v, state.v, state.dim];
        let pinched = TripartiteState {
            matrix: decohere(&after_u.matrix, 1, &dims)?,
            ..after_u
        };
        Ok(refresh_k1(&swap_k1_k2(&pinched)))
    }

    fn check_shape(&self, state: &TripartiteState<R>) -> Result<()> {
        if state.dim != self.dim || state.v != self.labels.len() {
            return Err(OqrwError::Dimension("tripartite state does not match the realizer".into()));
        }
        Ok(())
    }

    /// Diagonal `H ⊗ K2` blocks after tracing out `K1`, labelled by vertex.
    pub fn read_blocks(&self, state: &TripartiteState<R>) -> Result<BlockState<R>> {
        self.check_shape(state)?;
        let marginal = state.marginal_hk2();
        let d = self.dim;
        let blocks = self
            .labels
            .iter()
            .enumerate()
            .map(|(k, v)| (*v, marginal.submatrix(k * d, k * d, d, d)))
            .filter(|(_, b)| !b.is_zero_within(R::zero()))
            .collect();
        BlockState::new_unchecked(self.space()?, d, blocks)
    }

    fn space(&self) -> Result<VertexSpace> {
        if self.lattice {
            VertexSpace::lattice(self.labels[0], *self.labels.last().expect("non-empty labels"))
        } else {
            VertexSpace::finite(self.labels.len())
        }
    }

    /// Mass sitting on the two outermost sites of a cyclic window.
    pub fn seam_mass(&self, dist: &WalkDistribution) -> f64 {
        if !self.lattice {
            return 0.0;
        }
        dist.get(self.labels[0]) + dist.get(*self.labels.last().expect("non-empty labels"))
    }

    /// Pure canonical vector `Σ_k φ_k ⊗ |ref⟩ ⊗ |k⟩`.
    pub fn embed_amplitudes(&self, psi: &AmplitudeState<R>) -> Result<Vec<C<R>>> {
        let v = self.labels.len();
        let mut out = vec![C::zero(); self.total_dim()];
        for (vertex, phi) in &psi.amps {
            if phi.len() != self.dim {
                return Err(OqrwError::Dimension("amplitude length differs from chirality".into()));
            }
            let base = self.position(*vertex)? * v * self.dim;
            out[base..base + self.dim].copy_from_slice(phi);
        }
        Ok(out)
    }

    /// Reads `φ_k` from the `K1 = ref` slice of a tripartite vector.
    pub fn read_amplitudes(&self, vec: &[C<R>]) -> AmplitudeState<R> {
        let v = self.labels.len();
        let d = self.dim;
        let amps = self
            .labels
            .iter()
            .enumerate()
            .map(|(k, vertex)| (*vertex, vec[k * v * d..k * v * d + d].to_vec()))
            .filter(|(_, phi)| phi.iter().any(|z| !z.is_zero()))
            .collect();
        AmplitudeState { amps }
    }

    /// Cycle without decoherence on a pure state: `U`, swap, then the `K1`
    /// reset `|k⟩ ↦ |ref⟩` applied to the ket.
    pub fn coherent_cycle(&self, vec: &[C<R>]) -> Result<Vec<C<R>>> {
        let v = self.labels.len();
        let d = self.dim;
        let b = d * v;
        if vec.len() != self.total_dim() {
            return Err(OqrwError::Dimension("tripartite vector has the wrong length".into()));
        }
        let mut after_u = vec![C::zero(); vec.len()];
        for k in 0..v {
            let slice = &vec[k * b..(k + 1) * b];
            if slice.iter().all(|z| z.is_zero()) {
                continue;
            }
            after_u[k * b..(k + 1) * b].copy_from_slice(&self.units[k].mul_vec(slice));
        }
        // swap then reset: amplitude at (k2, k1, h) moves to (k1, ref, h)
        let mut out = vec![C::zero(); vec.len()];
        for k2 in 0..v {
            for k1 in 0..v {
                for h in 0..d {
                    out[k1 * b + h] += after_u[(k2 * v + k1) * d + h];
                }
            }
        }
        Ok(out)
    }
}

/// Embeds a local dilation into `K1 ⊗ H`: input `K1` index `c < m` feeds block
/// column `c`, block row `r` lands on `K1 = target_order[r]`, and the remaining
/// inputs map onto the remaining outputs in order.
fn embed_dilation<R: Real>(
    u: &DilationUnitary<R>,
    index: &BTreeMap<Vertex, usize>,
    v: usize,
    d: usize,
) -> Result<CMatrix<R>> {
    let m = u.target_order.len();
    let rows: Vec<usize> = u
        .target_order
        .iter()
        .map(|t| {
            index
                .get(t)
                .copied()
                .ok_or_else(|| OqrwError::Definition(format!("target {t} outside the vertex set")))
        })
        .collect::<Result<_>>()?;
    let free: Vec<usize> = (0..v).filter(|k| !rows.contains(k)).collect();
    let mut w = CMatrix::zeros(d * v, d * v);
    for (r, &kr) in rows.iter().enumerate() {
        for c in 0..m {
            w.set_submatrix(kr * d, c * d, &u.block(r, c));
        }
    }
    for (offset, &kr) in free.iter().enumerate() {
        let c = m + offset;
        w.set_submatrix(kr * d, c * d, &CMatrix::identity(d));
    }
    Ok(w)
}

/// `build_global_unitary` for a finite-graph walk.
pub fn build_global_unitary<R: Real>(ops: &TransitionOperators<R>) -> Result<CMatrix<R>> {
    Realizer::new(ops)?.global_unitary()
}

/// One realization cycle for a finite-graph walk.
pub fn physical_step<R: Real>(state: &TripartiteState<R>, ops: &TransitionOperators<R>) -> Result<TripartiteState<R>> {
    Realizer::new(ops)?.physical_step(state)
}

/// Worst deviation of `Σ_i B^i_j* B^i_{j'}` from `δ_{jj'} I`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryConditionReport {
    pub max_deviation: f64,
    pub worst_pair: Option<(Vertex, Vertex)>,
    pub tol: f64,
    pub pass: bool,
}

pub fn check_unitary_walk_condition<R: Real>(ops: &TransitionOperators<R>, tol: R) -> UnitaryConditionReport {
    let d = ops.chirality_dim();
    let id = CMatrix::identity(d);
    let pairs: Vec<(Vertex, Vertex)> = if ops.is_stationary() {
        (-2..=2).map(|jp| (0, jp)).collect()
    } else {
        let s = ops.sources();
        s.iter().flat_map(|&j| s.iter().map(move |&jp| (j, jp))).collect()
    };
    let mut max_deviation = 0.0;
    let mut worst_pair = None;
    for (j, jp) in pairs {
        let mut acc = CMatrix::zeros(d, d);
        let right = ops.outgoing(jp);
        for (i, b) in ops.outgoing(j) {
            if let Some((_, bp)) = right.iter().find(|(t, _)| *t == i) {
                acc += &(&b.adjoint() * bp);
            }
        }
        let target = if j == jp { id.clone() } else { CMatrix::zeros(d, d) };
        let dev = acc.max_abs_diff(&target).as_f64();
        if dev > max_deviation || worst_pair.is_none() {
            max_deviation = dev;
            worst_pair = Some((j, jp));
        }
    }
    UnitaryConditionReport {
        max_deviation,
        worst_pair,
        tol: tol.as_f64(),
        pass: max_deviation <= tol.as_f64(),
    }
}

/// Pure walk state `Σ_i φ_i ⊗ |i⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeState<R: Real> {
    amps: BTreeMap<Vertex, Vec<C<R>>>,
}

impl<R: Real> AmplitudeState<R> {
    pub fn new(amps: BTreeMap<Vertex, Vec<C<R>>>) -> Self {
        Self { amps }
    }

    pub fn single(vertex: Vertex, phi: Vec<C<R>>) -> Self {
        Self::new(BTreeMap::from([(vertex, phi)]))
    }

    pub fn amplitudes(&self) -> &BTreeMap<Vertex, Vec<C<R>>> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> R {
        self.amps.values().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// `P(i) = ‖φ_i‖²`.
    pub fn distribution(&self) -> WalkDistribution {
        let probs = self
            .amps
            .iter()
            .map(|(v, phi)| (*v, phi.iter().map(|z| z.norm_sqr()).sum::<R>().as_f64()))
            .collect();
        WalkDistribution::from_map_unchecked(probs)
    }

    /// Largest amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        let zero: Vec<C<R>> = Vec::new();
        self.amps
            .keys()
            .chain(other.amps.keys())
            .map(|v| {
                let a = self.amps.get(v).unwrap_or(&zero);
                let b = other.amps.get(v).unwrap_or(&zero);
                (0..a.len().max(b.len()))
                    .map(|k| {
                        let x = a.get(k).copied().unwrap_or_else(C::zero);
                        let y = b.get(k).copied().unwrap_or_else(C::zero);
                        (x - y).norm()
                    })
                    .fold(R::zero(), R::max)
            })
            .fold(R::zero(), R::max)
    }
}

/// `φ'_i = Σ_j B^i_j φ_j`, refused unless the unitary walk condition holds.
pub fn unitary_walk_step<R: Real>(psi: &AmplitudeState<R>, ops: &TransitionOperators<R>) -> Result<AmplitudeState<R>> {
    let report = check_unitary_walk_condition(ops, R::lit(DEFAULT_VALIDATION_TOL));
    if !report.pass {
        return Err(OqrwError::UnitaryConditionViolated {
            deviation: report.max_deviation,
        });
    }
    let norm = psi.norm_sqr();
    if (norm - R::one()).abs() > R::lit(STATE_TOL) {
        return Err(OqrwError::CorruptedState(format!("amplitude state has squared norm {norm}")));
    }
    let mut next: BTreeMap<Vertex, Vec<C<R>>> = BTreeMap::new();
    for (j, phi) in &psi.amps {
        if phi.len() != ops.chirality_dim() {
            return Err(OqrwError::Dimension("amplitude length differs from chirality".into()));
        }
        for (i, b) in ops.outgoing(*j) {
            let contrib = b.mul_vec(phi);
            let slot = next.entry(i).or_insert_with(|| vec![C::zero(); phi.len()]);
            for (s, x) in slot.iter_mut().zip(contrib) {
                *s += x;
            }
        }
    }
    next.retain(|_, phi| phi.iter().any(|z| !z.is_zero()));
    Ok(AmplitudeState { amps: next })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructors::{hadamard_pair, sqrt3_pair, stationary_z, Preset};
    use crate::scalar::c;
    use crate::walk::{distribution, step};

    type M = CMatrix<f64>;

    fn two_vertex() -> (TransitionOperators<f64>, BlockState<f64>) {
        Preset::TwoVertex { p: 0.3, a: 0.6, alpha: 0.8 }.build().unwrap()
    }

    /// Closed-form 4x4 dilation for the absorbing pair.
    fn closed_form_u(p: f64) -> M {
        let (s, q) = ((1.0 - p).sqrt(), p.sqrt());
        M::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, s, -q, 0.0],
            &[0.0, q, s, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    #[test]
    fn closed_form_dilation_is_admissible() {
        let (ops, _) = two_vertex();
        // Its first block column is [C; B]: C stays on vertex 2, B moves to vertex 1.
        let u = DilationUnitary::from_matrix(&ops, 2, closed_form_u(0.3), vec![2, 1], 1e-12).unwrap();
        assert!(u.first_column_deviation(&ops) < 1e-15);
        assert!(DilationUnitary::from_matrix(&ops, 2, closed_form_u(0.3), vec![1, 2], 1e-12).is_err());
    }

    #[test]
    fn closed_form_dilations_drive_the_walk() {
        let (ops, init) = two_vertex();
        let (a, alpha) = (0.6f64, 0.8f64);
        let (b, beta) = ((1.0 - a * a).sqrt(), (1.0 - alpha * alpha).sqrt());
        let v1 = M::from_real_rows(&[
            &[a, 0.0, -b, 0.0],
            &[0.0, alpha, 0.0, -beta],
            &[b, 0.0, a, 0.0],
            &[0.0, beta, 0.0, alpha],
        ]);
        let u1 = DilationUnitary::from_matrix(&ops, 1, v1, vec![1, 2], 1e-12).unwrap();
        let u2 = DilationUnitary::from_matrix(&ops, 2, closed_form_u(0.3), vec![2, 1], 1e-12).unwrap();
        let r = Realizer::from_dilations(&ops, vec![u1, u2]).unwrap();
        let mut t = r.embed(&init).unwrap();
        let mut s = init;
        for _ in 0..10 {
            t = r.physical_step(&t).unwrap();
            s = step(&s, &ops).unwrap();
            assert!(r.read_blocks(&t).unwrap().max_block_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn dilate_two_vertex_source() {
        let (ops, _) = two_vertex();
        for j in [1, 2] {
            let u = dilate(&ops, j).unwrap();
            assert!(u.matrix().is_unitary(1e-12).unwrap());
            assert_eq!(u.first_column_deviation(&ops), 0.0);
            assert_eq!(u.target_order(), &[1, 2]);
        }
    }

    #[test]
    fn single_unitary_target_needs_no_padding() {
        let h = 1.0 / 2f64.sqrt();
        let had = M::from_real_rows(&[&[h, h], &[h, -h]]);
        let ops = TransitionOperators::finite_graph(1, 2, [((1, 1), had.clone())]).unwrap();
        assert_eq!(dilate(&ops, 1).unwrap().matrix(), &had);
    }

    #[test]
    fn dilate_sqrt3_pair() {
        let (b, cc) = sqrt3_pair();
        let ops = stationary_z(b.clone(), cc.clone()).unwrap();
        let u = dilate(&ops, 0).unwrap();
        assert!(u.matrix().is_unitary(1e-12).unwrap());
        assert_eq!(u.block(0, 0), b);
        assert_eq!(u.block(1, 0), cc);
    }

    #[test]
    fn cannot_dilate_unnormalized_source() {
        let ops = TransitionOperators::stationary_lattice(M::identity(2), M::identity(2)).unwrap();
        assert!(matches!(dilate(&ops, 0), Err(OqrwError::CannotDilate { .. })));
    }

    #[test]
    fn global_unitary_is_block_diagonal() {
        let (ops, _) = two_vertex();
        let u = build_global_unitary(&ops).unwrap();
        assert_eq!(u.rows(), 8);
        assert!(u.is_unitary(1e-12).unwrap());
        assert!(u.submatrix(0, 4, 4, 4).is_zero_within(0.0));
        assert!(u.submatrix(4, 0, 4, 4).is_zero_within(0.0));
        assert_eq!(u.submatrix(0, 0, 4, 4), *dilate(&ops, 1).unwrap().matrix());

        let trivial = TransitionOperators::finite_graph(1, 2, [((1, 1), M::identity(2))]).unwrap();
        assert_eq!(build_global_unitary(&trivial).unwrap(), M::identity(2));
    }

    #[test]
    fn decohere_examples() {
        let h = 1.0 / 2f64.sqrt();
        let plus = M::outer(&[c(h, 0.0), c(h, 0.0)]);
        let out = decohere(&plus, 0, &[2]).unwrap();
        assert!(out.max_abs_diff(&M::identity(2).scale_real(0.5)) < 1e-15);
        assert_eq!(decohere(&out, 0, &[2]).unwrap(), out);
        let diag = M::diag(&[c(0.25, 0.0), c(0.75, 0.0)]);
        assert_eq!(decohere(&diag, 0, &[2]).unwrap(), diag);
        assert!(decohere(&diag, 1, &[2]).is_err());
        assert!(decohere(&diag, 0, &[3]).is_err());
    }

    fn tri(d: usize, v: usize, m: M) -> TripartiteState<f64> {
        TripartiteState::new(d, v, m).unwrap()
    }

    #[test]
    fn swap_examples() {
        // ρ ⊗ |ref⟩⟨ref| ⊗ |k⟩⟨k|  ->  ρ ⊗ |k⟩⟨k| ⊗ |ref⟩⟨ref|, with d = 1, V = 2, k = 1 (second vertex)
        let before = tri(1, 2, M::ket_bra(4, 2, 2)); // (k2=1, k1=0)
        let after = swap_k1_k2(&before);
        assert_eq!(after.matrix(), &M::ket_bra(4, 1, 1)); // (k2=0, k1=1)
        assert_eq!(swap_k1_k2(&after), before);
        let sym = tri(1, 2, M::identity(4).scale_real(0.25));
        assert_eq!(swap_k1_k2(&sym), sym);
    }

    #[test]
    fn refresh_examples() {
        let (ops, init) = two_vertex();
        let r = Realizer::new(&ops).unwrap();
        let s = r.embed(&init).unwrap();
        assert_eq!(refresh_k1(&s), s);

        // K1 maximally mixed, H ⊗ K2 in some state
        let hk2 = M::diag(&[c(0.1, 0.0), c(0.2, 0.0), c(0.3, 0.0), c(0.4, 0.0)]);
        let mut m = M::zeros(8, 8);
        for k2 in 0..2 {
            for k1 in 0..2 {
                for h in 0..2 {
                    let i = (k2 * 2 + k1) * 2 + h;
                    m[(i, i)] = hk2[(k2 * 2 + h, k2 * 2 + h)] * 0.5;
                }
            }
        }
        let st = tri(2, 2, m);
        let refreshed = refresh_k1(&st);
        assert!(refreshed.marginal_k1().max_abs_diff(&M::ket_bra(2, 0, 0)) < 1e-15);
        assert!(refreshed.marginal_hk2().max_abs_diff(&st.marginal_hk2()) < 1e-15);
        assert_eq!(refresh_k1(&refreshed), refreshed);
    }

    #[test]
    fn refresh_after_swap_reads_one_walk_step() {
        // Pure φ at vertex k: after U, decoherence and swap the refresh leaves
        // Σ_j B^j_k |φ⟩⟨φ| B^j_k* ⊗ |ref⟩⟨ref| ⊗ |j⟩⟨j|.
        let (ops, _) = two_vertex();
        let r = Realizer::new(&ops).unwrap();
        let phi = [c(0.6, 0.0), c(0.0, 0.8)];
        let s = BlockState::single(ops.space(), 2, M::outer(&phi)).unwrap();
        let t = r.embed(&s).unwrap();
        let after = r.apply_unitary(&t);
        let pinched = TripartiteState {
            matrix: decohere(after.matrix(), 1, &[2, 2, 2]).unwrap(),
            ..after
        };
        let out = refresh_k1(&swap_k1_k2(&pinched));
        let mut expect = BTreeMap::new();
        for (j, b) in ops.outgoing(2) {
            expect.insert(j, b.conjugate(&M::outer(&phi)));
        }
        let expect = BlockState::new(ops.space(), 2, expect).unwrap();
        assert!(out.matrix().max_abs_diff(r.embed(&expect).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn physical_step_matches_walk_step() {
        let (ops, init) = two_vertex();
        let r = Realizer::new(&ops).unwrap();
        let mut t = r.embed(&init).unwrap();
        let mut s = init;
        for _ in 0..10 {
            t = r.physical_step(&t).unwrap();
            s = step(&s, &ops).unwrap();
            assert!(r.read_blocks(&t).unwrap().max_block_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn physical_step_deterministic_two_cycle() {
        let ops = TransitionOperators::finite_graph(2, 2, [((2, 1), M::identity(2)), ((1, 2), M::identity(2))]).unwrap();
        let s = BlockState::single(ops.space(), 1, M::ket_bra(2, 1, 1)).unwrap();
        let t = physical_step(&Realizer::new(&ops).unwrap().embed(&s).unwrap(), &ops).unwrap();
        let read = Realizer::new(&ops).unwrap().read_blocks(&t).unwrap();
        assert_eq!(distribution(&read).unwrap(), WalkDistribution::point_mass(2));
    }

    #[test]
    fn physical_step_rejects_off_form_input() {
        let (ops, _) = two_vertex();
        let st = tri(2, 2, M::identity(8).scale_real(0.125));
        assert!(matches!(physical_step(&st, &ops), Err(OqrwError::NotCanonical(_))));
    }

    #[test]
    fn unitary_condition_examples() {
        let (b, cc) = hadamard_pair();
        assert!(check_unitary_walk_condition(&stationary_z(b, cc).unwrap(), 1e-10).pass);
        let (b, cc) = sqrt3_pair();
        let r = check_unitary_walk_condition(&stationary_z(b.clone(), cc.clone()).unwrap(), 1e-10);
        assert!(!r.pass);
        // C*B = I/3
        assert!((r.max_deviation - 1.0 / 3.0).abs() < 1e-15, "{r:?}");
        assert!((&cc.adjoint() * &b).max_abs_diff(&M::identity(2).scale_real(1.0 / 3.0)) < 1e-15);
        let h = 1.0 / 2f64.sqrt();
        let u = M::from_real_rows(&[&[h, h], &[h, -h]]);
        assert!(check_unitary_walk_condition(&stationary_z(M::zeros(2, 2), u).unwrap(), 1e-10).pass);
    }

    #[test]
    fn unitary_walk_examples() {
        let (b, cc) = hadamard_pair();
        let ops = stationary_z(b, cc).unwrap();
        let psi = AmplitudeState::single(0, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let one = unitary_walk_step(&psi, &ops).unwrap();
        let d = one.distribution();
        assert!((d.get(-1) - 0.5).abs() < 1e-15 && (d.get(1) - 0.5).abs() < 1e-15);

        let mut cur = psi.clone();
        for _ in 0..100 {
            cur = unitary_walk_step(&cur, &ops).unwrap();
        }
        assert!((cur.norm_sqr() - 1.0f64).abs() < 1e-10);

        let shift = stationary_z(M::zeros(2, 2), M::identity(2)).unwrap();
        let moved = unitary_walk_step(&psi, &shift).unwrap();
        assert_eq!(moved, AmplitudeState::single(1, vec![c(1.0, 0.0), c(0.0, 0.0)]));

        let (b, cc) = sqrt3_pair();
        let bad = stationary_z(b, cc).unwrap();
        assert!(matches!(unitary_walk_step(&psi, &bad), Err(OqrwError::UnitaryConditionViolated { .. })));
    }

    #[test]
    fn coherent_cycle_matches_unitary_walk_on_superpositions() {
        let (b, cc) = hadamard_pair();
        let ops = stationary_z(b, cc).unwrap();
        let r = Realizer::cyclic(&ops, -6, 6).unwrap();
        let psi = AmplitudeState::new(BTreeMap::from([
            (-1, vec![c(0.5, 0.0), c(0.0, 0.5)]),
            (2, vec![c(0.0, -0.5), c(0.5, 0.0)]),
        ]));
        let out = r.read_amplitudes(&r.coherent_cycle(&r.embed_amplitudes(&psi).unwrap()).unwrap());
        assert!(out.max_abs_diff(&unitary_walk_step(&psi, &ops).unwrap()) < 1e-12);
    }

    #[test]
    fn partial_trace_refresh_loses_interference() {
        // Discarding K1 after the swap keeps which-source information out of the
        // reach of later steps, so the density-level cycle without pinching
        // departs from the amplitude walk once two sources feed one site.
        let (b, cc) = hadamard_pair();
        let ops = stationary_z(b, cc).unwrap();
        let r = Realizer::cyclic(&ops, -3, 3).unwrap();
        let psi0 = AmplitudeState::single(0, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let mut rho = tri(2, 7, M::outer(&r.embed_amplitudes(&psi0).unwrap()));
        let mut psi = psi0;
        for _ in 0..3 {
            rho = refresh_k1(&swap_k1_k2(&r.apply_unitary(&rho)));
            psi = unitary_walk_step(&psi, &ops).unwrap();
        }
        let blocks = r.read_blocks(&rho).unwrap();
        let lossy = distribution(&blocks).unwrap();
        let gap = lossy.max_abs_diff(&psi.distribution());
        assert!(gap > 0.1, "{gap}");
    }

    #[test]
    fn cyclic_truncation_wraps_edges() {
        let (b, cc) = sqrt3_pair::<f64>();
        let ops = stationary_z(b.clone(), cc).unwrap();
        let ring = cyclic_truncation(&ops, -2, 2).unwrap();
        // site -2 is ring vertex 1; its left neighbour wraps to site 2 (vertex 5)
        assert_eq!(ring.operator(5, 1), Some(&b));
        assert!(cyclic_truncation(&ops, 0, 1).is_err());
    }
}
