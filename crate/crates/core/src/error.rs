use alloc::string::String;
use alloc::vec::Vec;

use crate::crossbar::{LineId, TopologyKind};
use crate::write::PolicyKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time step must be positive, got {dt} s")]
    NonPositiveStep { dt: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("ideal memristance undefined at zero charge")]
    ZeroCharge,

    #[error("charge must be strictly positive, got {q} C")]
    NonPositiveCharge { q: f64 },

    #[error("no reference potential: every line is floating")]
    NoReferencePotential,

    #[error("line {0:?} does not exist in this topology")]
    UnknownLine(LineId),

    #[error("line {0:?} constrained more than once")]
    DuplicateLine(LineId),

    #[error("node {node} out of range for a network with {count} nodes")]
    UnknownNode { node: usize, count: usize },

    #[error("branch conductance must be finite and non-negative, got {conductance} S")]
    InvalidConductance { conductance: f64 },

    #[error("floating island: component {component} ({} free nodes) has no driven node", nodes.len())]
    FloatingIsland { component: usize, nodes: Vec<usize> },

    #[error("conductance matrix not positive definite at pivot {row}")]
    NotPositiveDefinite { row: usize },

    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("array shapes or parameters differ")]
    ShapeMismatch,

    #[error("array dimensions must be at least 1x1, got {rows}x{cols}")]
    EmptyArray { rows: usize, cols: usize },

    #[error("target conductance unreachable for cells {cells:?}")]
    UnreachableTarget { cells: Vec<(usize, usize)> },

    #[error("programming polarity cannot move charge from {from} C to {to} C")]
    WrongPolarity { from: f64, to: f64 },

    #[error("target charge {q} C outside [0, {q_max}] C")]
    TargetOutOfRange { q: f64, q_max: f64 },

    #[error("policy {policy:?} is not valid on topology {topology:?}")]
    PolicyTopologyMismatch { policy: PolicyKind, topology: TopologyKind },

    #[error("plan does not match the array: {0}")]
    PlanMismatch(String),

    #[error("pulse amplitude {amplitude} V does not exceed write threshold {threshold} V")]
    PulseBelowThreshold { amplitude: f64, threshold: f64 },

    #[error("fit needs at least 3 usable samples, found {found}")]
    InsufficientSamples { found: usize },

    #[error("trace is missing column `{0}`")]
    MissingColumn(String),

    #[error("sweep requires at least one size")]
    EmptySweep,

    #[error("array size {size} outside supported range {min}..={max}")]
    SizeOutOfRange { size: usize, min: usize, max: usize },
}
