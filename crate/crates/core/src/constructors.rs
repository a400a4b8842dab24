//! Walk builders: classical chain embeddings, stationary lattice walks,
//! operator-matrix graphs and the named presets.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{OqrwError, Result};
use crate::matrix::CMatrix;
use crate::scalar::{re, Real};
use crate::walk::{validate_transitions, BlockState, TransitionOperators, Vertex, VertexSpace, DEFAULT_VALIDATION_TOL};

/// Row-stochastic matrix; `entry(j, i)` is the probability of moving from
/// vertex `j + 1` to vertex `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 || rows.iter().any(|r| r.len() != size) {
            return Err(OqrwError::Definition("stochastic matrix must be square and non-empty".into()));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(OqrwError::Definition(format!("row {} has a negative entry", j + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(OqrwError::Definition(format!("row {} sums to {sum}", j + 1)));
            }
        }
        Ok(Self {
            size,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `P(j, i)` with zero-based indices.
    pub fn entry(&self, j: usize, i: usize) -> f64 {
        self.entries[j * self.size + i]
    }

    /// Law after `n` steps from an initial law (indexed by vertex `1..=V`).
    pub fn propagate(&self, initial: &[f64], n: usize) -> Vec<f64> {
        let mut cur = initial.to_vec();
        for _ in 0..n {
            let mut next = vec![0.0; self.size];
            for (j, &pj) in cur.iter().enumerate() {
                for (i, slot) in next.iter_mut().enumerate() {
                    *slot += pj * self.entry(j, i);
                }
            }
            cur = next;
        }
        cur
    }
}

/// `B^i_j = √P(j,i) U^i_j`. `unitaries[j][i]` replaces the identity when given.
pub fn from_classical<R: Real>(
    p: &StochasticMatrix,
    unitaries: Option<&[Vec<CMatrix<R>>]>,
    chirality_dim: usize,
) -> Result<TransitionOperators<R>> {
    let v = p.size();
    if let Some(grid) = unitaries {
        if grid.len() != v || grid.iter().any(|row| row.len() != v) {
            return Err(OqrwError::Definition(format!("unitary grid must be {v}x{v}")));
        }
    }
    let tol = R::lit(DEFAULT_VALIDATION_TOL);
    let mut edges = Vec::new();
    for j in 0..v {
        for i in 0..v {
            let pji = p.entry(j, i);
            if pji == 0.0 {
                continue;
            }
            let u = match unitaries {
                Some(grid) => {
                    let u = &grid[j][i];
                    if !u.is_square() || u.rows() != chirality_dim || !u.is_unitary(tol)? {
                        return Err(OqrwError::Definition(format!(
                            "U^{}_{} is not a {chirality_dim}-dimensional unitary",
                            i + 1,
                            j + 1
                        )));
                    }
                    u.clone()
                }
                None => CMatrix::identity(chirality_dim),
            };
            edges.push((((i + 1) as Vertex, (j + 1) as Vertex), u.scale_real(R::lit(pji.sqrt()))));
        }
    }
    TransitionOperators::finite_graph(v, chirality_dim, edges)
}

/// Stationary lattice walk, left jumps by `b` and right jumps by `c`.
pub fn stationary_z<R: Real>(b: CMatrix<R>, c: CMatrix<R>) -> Result<TransitionOperators<R>> {
    let ops = TransitionOperators::stationary_lattice(b, c)?;
    let report = validate_transitions(&ops, R::lit(DEFAULT_VALIDATION_TOL))?;
    if !report.pass {
        return Err(OqrwError::Definition(format!(
            "B*B + C*C deviates from identity by {:e}",
            report.max_deviation
        )));
    }
    Ok(ops)
}

/// `V×V` grid of operators; row `j` lists the operators leaving vertex `j + 1`.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<R: Real> {
    size: usize,
    entries: Vec<Vec<Option<CMatrix<R>>>>,
}

impl<R: Real> OperatorMatrix<R> {
    pub fn new(entries: Vec<Vec<Option<CMatrix<R>>>>) -> Result<Self> {
        let size = entries.len();
        if size == 0 || entries.iter().any(|r| r.len() != size) {
            return Err(OqrwError::Definition("operator matrix must be square and non-empty".into()));
        }
        Ok(Self { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `B^{target}_{source}` with one-based vertices.
    pub fn get(&self, source: Vertex, target: Vertex) -> Option<&CMatrix<R>> {
        self.entries[(source - 1) as usize][(target - 1) as usize].as_ref()
    }
}

pub fn from_operator_matrix<R: Real>(om: OperatorMatrix<R>) -> Result<TransitionOperators<R>> {
    let dim = om
        .entries
        .iter()
        .flatten()
        .flatten()
        .map(CMatrix::rows)
        .next()
        .ok_or_else(|| OqrwError::Definition("operator matrix has no operators".into()))?;
    let size = om.size;
    let edges = om.entries.into_iter().enumerate().flat_map(|(j, row)| {
        row.into_iter()
            .enumerate()
            .filter_map(move |(i, m)| m.map(|m| (((i + 1) as Vertex, (j + 1) as Vertex), m)))
    });
    let ops = TransitionOperators::finite_graph(size, dim, edges)?;
    let report = validate_transitions(&ops, R::lit(DEFAULT_VALIDATION_TOL))?;
    if let Some((row, dev)) = report.deviations.iter().find(|(_, d)| *d > report.tol) {
        return Err(OqrwError::Definition(format!(
            "row {row} violates the normalization by {dev:e}"
        )));
    }
    Ok(ops)
}

/// Named walks with fixed matrices.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    /// Lattice walk with the `1/√3` pair.
    ZSqrt3,
    /// Five-dimensional lattice walk with angle `t`.
    ZDim5 { t: f64 },
    /// Two-vertex graph `[[D1, D2], [B, C]]`, `D1 = diag(a, alpha)`.
    TwoVertex { p: f64, a: f64, alpha: f64 },
    /// `n`-site transport chain; row `k` sends `cos θ_k` left and `sin θ_k` right.
    Chain { n: usize, p: f64, angles: Option<Vec<f64>> },
    /// Lattice walk built from the Hadamard coin.
    HadamardUnitary,
}

impl Preset {
    pub const NAMES: [&'static str; 5] = ["z_sqrt3", "z_dim5", "two_vertex", "chain", "hadamard_unitary"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ZSqrt3 => "z_sqrt3",
            Self::ZDim5 { .. } => "z_dim5",
            Self::TwoVertex { .. } => "two_vertex",
            Self::Chain { .. } => "chain",
            Self::HadamardUnitary => "hadamard_unitary",
        }
    }

    /// Builds a preset from its identifier and named real parameters.
    /// Missing parameters fall back to defaults (`t = π/40`, `p = 1/2`,
    /// `a = alpha = 1/√2`, `n = 5`).
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let known: &[&str] = match name {
            "z_sqrt3" | "hadamard_unitary" => &[],
            "z_dim5" => &["t"],
            "two_vertex" => &["p", "a", "alpha", "lambda", "mu"],
            "chain" => &["n", "p", "theta"],
            other => return Err(OqrwError::UnknownPreset(other.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str()) && !k.starts_with("theta")) {
            return Err(OqrwError::Parameter(format!("preset {name} has no parameter `{k}`")));
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        Ok(match name {
            "z_sqrt3" => Self::ZSqrt3,
            "hadamard_unitary" => Self::HadamardUnitary,
            "z_dim5" => Self::ZDim5 {
                t: get("t", std::f64::consts::PI / 40.0),
            },
            "two_vertex" => Self::TwoVertex {
                p: get("p", 0.5),
                a: params.get("lambda").map_or(get("a", FRAC_1_SQRT_2), |l| l.cos()),
                alpha: params.get("mu").map_or(get("alpha", FRAC_1_SQRT_2), |m| m.cos()),
            },
            "chain" => {
                let n = get("n", 5.0);
                if n.fract() != 0.0 || n < 2.0 {
                    return Err(OqrwError::Parameter(format!("chain length {n} must be an integer >= 2")));
                }
                let n = n as usize;
                let angles = if let Some(&theta) = params.get("theta") {
                    Some(vec![theta; n - 1])
                } else {
                    let per_row: Vec<f64> = (1..n).filter_map(|k| params.get(&format!("theta{k}")).copied()).collect();
                    match per_row.len() {
                        0 => None,
                        len if len == n - 1 => Some(per_row),
                        _ => {
                            return Err(OqrwError::Parameter(format!(
                                "chain needs theta1..theta{} or a single theta",
                                n - 1
                            )))
                        }
                    }
                };
                Self::Chain {
                    n,
                    p: get("p", 0.5),
                    angles,
                }
            }
            _ => unreachable!(),
        })
    }

    /// Parameters as a name/value map, inverse of [`Preset::from_params`].
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            Self::ZSqrt3 | Self::HadamardUnitary => {}
            Self::ZDim5 { t } => {
                m.insert("t".into(), *t);
            }
            Self::TwoVertex { p, a, alpha } => {
                m.insert("p".into(), *p);
                m.insert("a".into(), *a);
                m.insert("alpha".into(), *alpha);
            }
            Self::Chain { n, p, angles } => {
                m.insert("n".into(), *n as f64);
                m.insert("p".into(), *p);
                if let Some(angles) = angles {
                    for (k, th) in angles.iter().enumerate() {
                        m.insert(format!("theta{}", k + 1), *th);
                    }
                }
            }
        }
        m
    }

    /// The walk and its recommended starting state.
    pub fn build<R: Real>(&self) -> Result<(TransitionOperators<R>, BlockState<R>)> {
        match self {
            Self::ZSqrt3 => {
                let (b, c) = sqrt3_pair();
                let ops = stationary_z(b, c)?;
                Ok((ops, lattice_start(CMatrix::ket_bra(2, 0, 0))?))
            }
            Self::ZDim5 { t } => {
                let (b, c) = dim5_pair(*t);
                let ops = stationary_z(b, c)?;
                Ok((ops, lattice_start(CMatrix::identity(5).scale_real(R::lit(0.2)))?))
            }
            Self::HadamardUnitary => {
                let (b, c) = hadamard_pair();
                let ops = stationary_z(b, c)?;
                Ok((ops, lattice_start(CMatrix::ket_bra(2, 0, 0))?))
            }
            Self::TwoVertex { p, a, alpha } => {
                check_open_unit("p", *p)?;
                check_closed_unit("a", *a)?;
                check_closed_unit("alpha", *alpha)?;
                let (d1, d2) = diagonal_pair(*a, *alpha);
                let (b, c) = absorbing_pair(*p);
                let om = OperatorMatrix::new(vec![vec![Some(d1), Some(d2)], vec![Some(b), Some(c)]])?;
                let ops = from_operator_matrix(om)?;
                Ok((ops, graph_start(2)?))
            }
            Self::Chain { n, p, angles } => {
                check_open_unit("p", *p)?;
                if *n < 2 {
                    return Err(OqrwError::Parameter(format!("chain length {n} must be at least 2")));
                }
                let angles = match angles {
                    Some(a) if a.len() != n - 1 => {
                        return Err(OqrwError::Parameter(format!(
                            "chain of {n} sites needs {} angles, got {}",
                            n - 1,
                            a.len()
                        )))
                    }
                    Some(a) => a.clone(),
                    None => vec![std::f64::consts::FRAC_PI_4; n - 1],
                };
                let mut rows: Vec<Vec<Option<CMatrix<R>>>> = vec![vec![None; *n]; *n];
                for (k, theta) in angles.iter().enumerate() {
                    // Row k+1: D_{2k+1} towards the previous site (or itself on row 1), D_{2k+2} forward.
                    let left = CMatrix::identity(2).scale_real(R::lit(theta.cos()));
                    let right = CMatrix::identity(2).scale_real(R::lit(theta.sin()));
                    let back = if k == 0 { 0 } else { k - 1 };
                    rows[k][back] = Some(left);
                    rows[k][k + 1] = Some(right);
                }
                let (b, c) = absorbing_pair(*p);
                rows[n - 1][n - 2] = Some(b);
                rows[n - 1][n - 1] = Some(c);
                let ops = from_operator_matrix(OperatorMatrix::new(rows)?)?;
                Ok((ops, graph_start(*n)?))
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        let params = self.params();
        if !params.is_empty() {
            let parts: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

impl FromStr for Preset {
    type Err = OqrwError;

    /// Preset name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        Self::from_params(s, &BTreeMap::new())
    }
}

/// Convenience wrapper over [`Preset::from_params`] and [`Preset::build`].
pub fn preset<R: Real>(name: &str, params: &BTreeMap<String, f64>) -> Result<(TransitionOperators<R>, BlockState<R>)> {
    Preset::from_params(name, params)?.build()
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(OqrwError::Parameter(format!("{name} = {x} must lie in (0, 1)")))
    }
}

fn check_closed_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(OqrwError::Parameter(format!("{name} = {x} must lie in [0, 1]")))
    }
}

fn lattice_start<R: Real>(rho: CMatrix<R>) -> Result<BlockState<R>> {
    BlockState::single(VertexSpace::lattice(0, 0)?, 0, rho)
}

fn graph_start<R: Real>(count: usize) -> Result<BlockState<R>> {
    BlockState::single(VertexSpace::finite(count)?, 1, CMatrix::identity(2).scale_real(R::lit(0.5)))
}

fn real<R: Real>(rows: &[&[f64]]) -> CMatrix<R> {
    CMatrix::from_real_rows(rows)
}

/// `B = (1/√3)[[1,1],[0,1]]`, `C = (1/√3)[[1,0],[-1,1]]`.
pub fn sqrt3_pair<R: Real>() -> (CMatrix<R>, CMatrix<R>) {
    let s = 1.0 / 3f64.sqrt();
    (real(&[&[s, s], &[0.0, s]]), real(&[&[s, 0.0], &[-s, s]]))
}

/// `B = [[a,b],[0,0]]`, `C = [[0,0],[c,d]]` from the Hadamard coin.
pub fn hadamard_pair<R: Real>() -> (CMatrix<R>, CMatrix<R>) {
    let h = FRAC_1_SQRT_2;
    (real(&[&[h, h], &[0.0, 0.0]]), real(&[&[0.0, 0.0], &[h, -h]]))
}

/// The five-dimensional pair; `B` carries prefactor 1/4 and `C` prefactor 1/8.
pub fn dim5_pair<R: Real>(t: f64) -> (CMatrix<R>, CMatrix<R>) {
    let (c2, c4, s2, s4) = ((2.0 * t).cos(), (4.0 * t).cos(), (2.0 * t).sin(), (4.0 * t).sin());
    let m = -2.0 * s2 - s4;
    let q = 2.0 * s2 - s4;
    let r = -2.0 * (1.5f64).sqrt() * s4;
    let b = [
        [0.0, m, 0.0, q, 0.0],
        [m, 0.0, r, 0.0, q],
        [0.0, r, 0.0, r, 0.0],
        [q, 0.0, r, 0.0, m],
        [0.0, q, 0.0, m, 0.0],
    ];
    let l = 3.0 + 4.0 * c2 + c4;
    let lp = 3.0 - 4.0 * c2 + c4;
    let cc = -(6f64).sqrt() * (1.0 - c4);
    let u = 4.0 * (c2 + c4);
    let w = 4.0 * (-c2 + c4);
    let c = [
        [l, 0.0, cc, 0.0, lp],
        [0.0, u, 0.0, w, 0.0],
        [cc, 0.0, 2.0 * (1.0 + 3.0 * c4), 0.0, cc],
        [0.0, w, 0.0, u, 0.0],
        [lp, 0.0, cc, 0.0, l],
    ];
    (
        CMatrix::from_fn(5, 5, |i, j| re(R::lit(b[i][j] / 4.0))),
        CMatrix::from_fn(5, 5, |i, j| re(R::lit(c[i][j] / 8.0))),
    )
}

/// `D1 = diag(a, α)`, `D2 = diag(√(1−a²), √(1−α²))`.
pub fn diagonal_pair<R: Real>(a: f64, alpha: f64) -> (CMatrix<R>, CMatrix<R>) {
    let b = (1.0 - a * a).max(0.0).sqrt();
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    (real(&[&[a, 0.0], &[0.0, alpha]]), real(&[&[b, 0.0], &[0.0, beta]]))
}

/// `B = [[0, √p], [0, 0]]`, `C = [[1, 0], [0, √(1−p)]]`.
pub fn absorbing_pair<R: Real>(p: f64) -> (CMatrix<R>, CMatrix<R>) {
    (real(&[&[0.0, p.sqrt()], &[0.0, 0.0]]), real(&[&[1.0, 0.0], &[0.0, (1.0 - p).sqrt()]]))
}
