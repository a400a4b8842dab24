//! JSON walk configuration.
//!
//! ```json
//! { "walk": { "preset": "two_vertex", "params": { "p": 0.5 } },
//!   "initial": { "vertex": 1, "block": [[[1,0],[0,0]],[[0,0],[0,0]]] },
//!   "run": { "mode": "evolve", "steps": 10 } }
//! ```
//!
//! Explicit walks use `{"kind": "lattice_z", "chirality_dim": d, "operators": {"B": .., "C": ..}}`
//! or `{"kind": "graph", "chirality_dim": d, "vertices": V, "operators": [{"source", "target", "matrix"}]}`.

use std::collections::BTreeMap;

use oqrw::{preset, BlockState, ComplexMatrix, OqrwError, State, TransitionOperators, Vertex, VertexSpace, Walk};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walk: WalkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WalkSpec {
    Preset {
        preset: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Explicit(ExplicitWalk),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplicitWalk {
    LatticeZ {
        chirality_dim: usize,
        operators: LatticeOperators,
    },
    Graph {
        chirality_dim: usize,
        vertices: usize,
        operators: Vec<EdgeSpec>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeOperators {
    /// Jump to the left neighbour.
    #[serde(rename = "B")]
    pub b: ComplexMatrix,
    /// Jump to the right neighbour.
    #[serde(rename = "C")]
    pub c: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub source: Vertex,
    pub target: Vertex,
    pub matrix: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Single { vertex: Vertex, block: ComplexMatrix },
    Blocks { blocks: Vec<BlockSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub vertex: Vertex,
    pub block: ComplexMatrix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Block state file written by `evolve --format json`; readable back as an [`InitialSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub step: usize,
    pub chirality_dim: usize,
    pub space: VertexSpace,
    pub pruned_mass: f64,
    pub blocks: Vec<BlockSpec>,
}

impl StateFile {
    pub fn new(step: usize, state: &State) -> Self {
        Self {
            step,
            chirality_dim: state.chirality_dim(),
            space: state.space(),
            pruned_mass: state.pruned_mass(),
            blocks: state
                .blocks()
                .iter()
                .map(|(v, b)| BlockSpec {
                    vertex: *v,
                    block: b.clone(),
                })
                .collect(),
        }
    }
}

impl WalkSpec {
    /// The walk, unvalidated, plus the preset's starting state when there is one.
    pub fn build(&self) -> Result<(Walk, Option<State>), OqrwError> {
        match self {
            Self::Preset { preset: name, params } => {
                let (walk, start) = preset::<f64>(name, params)?;
                Ok((walk, Some(start)))
            }
            Self::Explicit(ExplicitWalk::LatticeZ { chirality_dim, operators }) => {
                check_dim(*chirality_dim, &operators.b)?;
                check_dim(*chirality_dim, &operators.c)?;
                let walk = TransitionOperators::stationary_lattice(operators.b.clone(), operators.c.clone())?;
                Ok((walk, None))
            }
            Self::Explicit(ExplicitWalk::Graph {
                chirality_dim,
                vertices,
                operators,
            }) => {
                let edges = operators.iter().map(|e| ((e.target, e.source), e.matrix.clone()));
                Ok((TransitionOperators::finite_graph(*vertices, *chirality_dim, edges)?, None))
            }
        }
    }
}

fn check_dim(dim: usize, m: &ComplexMatrix) -> Result<(), OqrwError> {
    if m.rows() != dim || m.cols() != dim {
        return Err(OqrwError::Dimension(format!(
            "operator is {}x{}, chirality_dim is {dim}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

impl InitialSpec {
    pub fn build(&self, walk: &Walk) -> Result<State, OqrwError> {
        let blocks: BTreeMap<Vertex, ComplexMatrix> = match self {
            Self::Single { vertex, block } => BTreeMap::from([(*vertex, block.clone())]),
            Self::Blocks { blocks } => blocks.iter().map(|b| (b.vertex, b.block.clone())).collect(),
        };
        if walk.space().is_lattice() {
            BlockState::on_lattice(walk.chirality_dim(), blocks)
        } else {
            BlockState::new(walk.space(), walk.chirality_dim(), blocks)
        }
    }
}
