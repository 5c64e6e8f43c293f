//! Crossbar topologies and their nodal systems.
//!
//! Both topologies share the read fabric: row rails driven from the left,
//! column rails sensed at the bottom, one readout conductance `G(q)` per
//! crossing. They differ in where programming current flows:
//!
//! * [`TopologyKind::ConventionalSharedRail`] programs through the same rails,
//!   so every cell that carries current moves charge.
//! * [`TopologyKind::ProposedIsolatedLoop`] gives each cell its own control
//!   loop (`CL+`/`CL-`) stamped with the ionic conductance of the programming
//!   path. An open loop has no branch at all.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use libm::fabs;
use serde::{Deserialize, Serialize};

use crate::circuit::{NodalSystem, Netlist, SolveResult};
use crate::device::{self, DeviceParams, DeviceState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    ConventionalSharedRail,
    ProposedIsolatedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub kind: TopologyKind,
    pub rows: usize,
    pub cols: usize,
}

impl Topology {
    pub fn new(kind: TopologyKind, rows: usize, cols: usize) -> Result<Self> {
        let t = Self { kind, rows, cols };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyArray {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Whether `line` exists in this topology.
    pub fn has_line(&self, line: LineId) -> bool {
        match line {
            LineId::Row(i) => i < self.rows,
            LineId::Col(j) => j < self.cols,
            LineId::ControlPlus(i, j) | LineId::ControlMinus(i, j) => {
                self.kind == TopologyKind::ProposedIsolatedLoop && i < self.rows && j < self.cols
            }
        }
    }
}

/// A drivable line of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LineId {
    Row(usize),
    Col(usize),
    /// Positive control terminal of cell `(row, col)`.
    ControlPlus(usize, usize),
    /// Negative control terminal of cell `(row, col)`.
    ControlMinus(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LineState {
    Driven(f64),
    Floating,
}

/// Line constraints of one bias configuration. Lines not mentioned float.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiasConfig {
    lines: BTreeMap<LineId, LineState>,
}

impl BiasConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, line: LineId, state: LineState) -> Result<()> {
        if self.lines.insert(line, state).is_some() {
            return Err(Error::DuplicateLine(line));
        }
        Ok(())
    }

    pub fn drive(&mut self, line: LineId, volts: f64) -> Result<()> {
        self.set(line, LineState::Driven(volts))
    }

    pub fn float(&mut self, line: LineId) -> Result<()> {
        self.set(line, LineState::Floating)
    }

    pub fn state(&self, line: LineId) -> LineState {
        self.lines.get(&line).copied().unwrap_or(LineState::Floating)
    }

    pub fn driven(&self, line: LineId) -> Option<f64> {
        match self.state(line) {
            LineState::Driven(v) => Some(v),
            LineState::Floating => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (LineId, LineState)> + '_ {
        self.lines.iter().map(|(l, s)| (*l, *s))
    }
}

/// An `M x N` grid of devices sharing one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossbarArray {
    pub topology: Topology,
    pub params: DeviceParams,
    /// Row-major cell states.
    pub cells: Vec<DeviceState>,
    /// Resistance of each rail segment between adjacent crossings, ohm.
    #[serde(default)]
    pub wire_resistance: f64,
}

impl CrossbarArray {
    /// Array of pristine (HRS) devices.
    pub fn new(topology: Topology, params: DeviceParams) -> Result<Self> {
        topology.validate()?;
        params.validate()?;
        Ok(Self {
            topology,
            params,
            cells: vec![DeviceState::pristine(); topology.cell_count()],
            wire_resistance: 0.0,
        })
    }

    pub fn with_wire_resistance(mut self, ohm_per_segment: f64) -> Result<Self> {
        if !(ohm_per_segment.is_finite() && ohm_per_segment >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "wire_resistance",
                reason: "must be finite and >= 0",
            });
        }
        self.wire_resistance = ohm_per_segment;
        Ok(self)
    }

    /// Checks grid dimensions and every cell's charge bounds.
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.params.validate()?;
        if self.cells.len() != self.topology.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: self.topology.cell_count(),
                found: self.cells.len(),
            });
        }
        let q_max = self.params.q_max();
        if self.cells.iter().any(|c| !(c.q >= 0.0 && c.q <= q_max) || !c.t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cells.q",
                reason: "charge outside [0, q_max]",
            });
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.topology.rows
    }

    pub fn cols(&self) -> usize {
        self.topology.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.topology.cols + col
    }

    pub fn cell(&self, row: usize, col: usize) -> &DeviceState {
        &self.cells[self.index(row, col)]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut DeviceState {
        let k = self.index(row, col);
        &mut self.cells[k]
    }

    pub fn conductance_at(&self, row: usize, col: usize) -> f64 {
        device::conductance(self.cell(row, col), &self.params)
    }

    /// Row-major readout conductances, siemens.
    pub fn conductances(&self) -> Vec<f64> {
        self.cells.iter().map(|c| device::conductance(c, &self.params)).collect()
    }

    pub fn charges(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.q).collect()
    }

    /// Same shape, parameters and wiring.
    pub fn is_congruent(&self, other: &Self) -> bool {
        self.topology == other.topology
            && self.params == other.params
            && self.wire_resistance == other.wire_resistance
            && self.cells.len() == other.cells.len()
    }
}

/// What a circuit node physically is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeTag {
    pub line: LineId,
    /// 0 is the driver/sense terminal; `k > 0` is the `k`-th crossing along a
    /// resistive rail.
    pub position: usize,
}

impl NodeTag {
    /// The single cell a node belongs to, `None` for shared rails.
    pub fn owner(&self) -> Option<(usize, usize)> {
        match self.line {
            LineId::ControlPlus(i, j) | LineId::ControlMinus(i, j) => Some((i, j)),
            LineId::Row(_) | LineId::Col(_) => None,
        }
    }
}

/// Nodal system of an array under one bias, with the map back to cells.
#[derive(Debug, Clone)]
pub struct CrossbarSystem {
    nodal: NodalSystem,
    tags: Vec<NodeTag>,
    rows: usize,
    cols: usize,
    /// Branch of each cell's readout conductance, if the read fabric is live.
    read_branch: Vec<Option<usize>>,
    /// Branch of each cell's programming path, if present.
    program_branch: Vec<Option<usize>>,
    row_terminal: Vec<Option<usize>>,
    col_terminal: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarSolution {
    pub node_voltages: Vec<f64>,
    /// Current through each cell's programming path, ampere; zero where the
    /// path is absent.
    pub cell_currents: Vec<f64>,
    /// Voltage across each cell's programming path, volt.
    pub cell_voltages: Vec<f64>,
    /// Current through each cell's readout conductance, ampere.
    pub read_currents: Vec<f64>,
    /// Current sunk by each column terminal, ampere; zero for floating or
    /// absent columns.
    pub column_currents: Vec<f64>,
    pub residual: f64,
    /// Worst relative Kirchhoff imbalance over free nodes.
    pub kcl_violation: f64,
}

impl CrossbarSystem {
    pub fn nodal(&self) -> &NodalSystem {
        &self.nodal
    }

    pub fn tag(&self, node: usize) -> NodeTag {
        self.tags[node]
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn program_branch(&self, row: usize, col: usize) -> Option<usize> {
        self.program_branch[row * self.cols + col]
    }

    pub fn read_branch(&self, row: usize, col: usize) -> Option<usize> {
        self.read_branch[row * self.cols + col]
    }

    /// Off-diagonal entries of the full (pre-elimination) conductance matrix
    /// that couple nodes of different cells or touch a shared rail.
    pub fn cross_cell_couplings(&self) -> usize {
        self.nodal
            .full_matrix()
            .triplets()
            .filter(|&(i, j, _)| i != j)
            .filter(|&(i, j, _)| {
                let (a, b) = (self.tags[i].owner(), self.tags[j].owner());
                a.is_none() || b.is_none() || a != b
            })
            .count()
    }

    /// Structural block-diagonality: every coupling stays within one cell.
    pub fn is_block_diagonal_by_cell(&self) -> bool {
        self.cross_cell_couplings() == 0
    }

    pub fn solve(&self) -> Result<CrossbarSolution> {
        let sol: SolveResult = self.nodal.solve()?;
        let n_cells = self.rows * self.cols;
        let branches = self.nodal.branches();
        let mut cell_currents = vec![0.0; n_cells];
        let mut cell_voltages = vec![0.0; n_cells];
        let mut read_currents = vec![0.0; n_cells];
        for k in 0..n_cells {
            if let Some(b) = self.program_branch[k] {
                let br = branches[b];
                cell_currents[k] = sol.branch_currents[b];
                cell_voltages[k] = sol.node_voltages[br.a] - sol.node_voltages[br.b];
            }
            if let Some(b) = self.read_branch[k] {
                read_currents[k] = sol.branch_currents[b];
            }
        }
        let column_currents = self
            .col_terminal
            .iter()
            .map(|t| match t {
                Some(node) if self.nodal.fixed_voltage(*node).is_some() => -sol.net_outflow(&self.nodal, *node),
                _ => 0.0,
            })
            .collect();
        let kcl_violation = sol.kcl_violation(&self.nodal);
        Ok(CrossbarSolution {
            node_voltages: sol.node_voltages,
            cell_currents,
            cell_voltages,
            read_currents,
            column_currents,
            residual: sol.residual,
            kcl_violation,
        })
    }

    /// Terminal node of row `i`, if the read fabric is stamped.
    pub fn row_terminal(&self, i: usize) -> Option<usize> {
        self.row_terminal[i]
    }

    pub fn col_terminal(&self, j: usize) -> Option<usize> {
        self.col_terminal[j]
    }
}

/// Stamps the array under `bias`.
///
/// Rails are stamped when at least one row or column is driven. A proposed
/// cell's control loop is stamped when either of its terminals is driven;
/// otherwise the loop is open and contributes no branch. Floating lines stay
/// free unknowns.
pub fn build_nodal_system(array: &CrossbarArray, bias: &BiasConfig) -> Result<CrossbarSystem> {
    array.validate()?;
    let topo = array.topology;
    let (m, n) = (topo.rows, topo.cols);

    let mut any_driven = false;
    let mut rails_driven = false;
    for (line, state) in bias.iter() {
        if !topo.has_line(line) {
            return Err(Error::UnknownLine(line));
        }
        if let LineState::Driven(v) = state {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "bias",
                    reason: "driven voltage must be finite",
                });
            }
            any_driven = true;
            rails_driven |= matches!(line, LineId::Row(_) | LineId::Col(_));
        }
    }
    if !any_driven {
        return Err(Error::NoReferencePotential);
    }

    let mut net = Netlist::new();
    let mut tags = Vec::new();
    let mut node = |net: &mut Netlist, line: LineId, position: usize| {
        tags.push(NodeTag { line, position });
        net.add_node()
    };

    let mut read_branch = vec![None; m * n];
    let mut program_branch = vec![None; m * n];
    let mut row_terminal = vec![None; m];
    let mut col_terminal = vec![None; n];

    if rails_driven {
        let segment_g = if array.wire_resistance > 0.0 {
            Some(1.0 / array.wire_resistance)
        } else {
            None
        };
        // row_junction[i][j], col_junction[j][i]
        let mut row_junction = vec![vec![0usize; n]; m];
        let mut col_junction = vec![vec![0usize; m]; n];
        for i in 0..m {
            let line = LineId::Row(i);
            let terminal = node(&mut net, line, 0);
            row_terminal[i] = Some(terminal);
            let mut prev = terminal;
            for j in 0..n {
                row_junction[i][j] = match segment_g {
                    Some(g) => {
                        let jn = node(&mut net, line, j + 1);
                        net.add_branch(prev, jn, g)?;
                        prev = jn;
                        jn
                    }
                    None => terminal,
                };
            }
            if let Some(v) = bias.driven(line) {
                net.fix(terminal, v)?;
            }
        }
        for j in 0..n {
            let line = LineId::Col(j);
            let terminal = node(&mut net, line, 0);
            col_terminal[j] = Some(terminal);
            // sense end sits past the last row
            let mut prev = terminal;
            for i in (0..m).rev() {
                col_junction[j][i] = match segment_g {
                    Some(g) => {
                        let jn = node(&mut net, line, m - i);
                        net.add_branch(prev, jn, g)?;
                        prev = jn;
                        jn
                    }
                    None => terminal,
                };
            }
            if let Some(v) = bias.driven(line) {
                net.fix(terminal, v)?;
            }
        }
        for i in 0..m {
            for j in 0..n {
                let k = array.index(i, j);
                let g = array.conductance_at(i, j);
                let b = net.add_branch(row_junction[i][j], col_junction[j][i], g)?;
                read_branch[k] = Some(b);
                if topo.kind == TopologyKind::ConventionalSharedRail {
                    program_branch[k] = Some(b);
                }
            }
        }
    }

    if topo.kind == TopologyKind::ProposedIsolatedLoop {
        let g_ion = array.params.ionic_conductance();
        for i in 0..m {
            for j in 0..n {
                let (plus, minus) = (LineId::ControlPlus(i, j), LineId::ControlMinus(i, j));
                let (vp, vm) = (bias.driven(plus), bias.driven(minus));
                if vp.is_none() && vm.is_none() {
                    continue;
                }
                let a = node(&mut net, plus, 0);
                let b = node(&mut net, minus, 0);
                if let Some(v) = vp {
                    net.fix(a, v)?;
                }
                if let Some(v) = vm {
                    net.fix(b, v)?;
                }
                program_branch[array.index(i, j)] = Some(net.add_branch(a, b, g_ion)?);
            }
        }
    }

    Ok(CrossbarSystem {
        nodal: net.build()?,
        tags,
        rows: m,
        cols: n,
        read_branch,
        program_branch,
        row_terminal,
        col_terminal,
    })
}

/// Builds and solves in one step.
pub fn solve(array: &CrossbarArray, bias: &BiasConfig) -> Result<CrossbarSolution> {
    build_nodal_system(array, bias)?.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadMode {
    /// Columns at virtual ground, rails ideal: `I = G^T V`.
    Ideal,
    /// Full network solve including rail resistance.
    FullNodal,
}

/// Analog multiply-accumulate: drives row `i` at `inputs[i]`, holds columns
/// at 0 V, leaves control loops floating and returns column currents.
/// Takes the array by shared reference; reads never move charge.
pub fn read_mac(array: &CrossbarArray, inputs: &[f64], mode: ReadMode) -> Result<Vec<f64>> {
    if inputs.len() != array.rows() {
        return Err(Error::DimensionMismatch {
            expected: array.rows(),
            found: inputs.len(),
        });
    }
    match mode {
        ReadMode::Ideal => {
            let mut out = vec![0.0; array.cols()];
            for (i, &v) in inputs.iter().enumerate() {
                for (j, acc) in out.iter_mut().enumerate() {
                    *acc += array.conductance_at(i, j) * v;
                }
            }
            Ok(out)
        }
        ReadMode::FullNodal => Ok(solve(array, &read_bias(array, inputs)?)?.column_currents),
    }
}

/// Rows at `inputs`, columns at 0 V, every control line floating.
pub fn read_bias(array: &CrossbarArray, inputs: &[f64]) -> Result<BiasConfig> {
    let mut bias = BiasConfig::new();
    for (i, &v) in inputs.iter().enumerate() {
        bias.drive(LineId::Row(i), v)?;
    }
    for j in 0..array.cols() {
        bias.drive(LineId::Col(j), 0.0)?;
    }
    Ok(bias)
}

/// Charge change of every non-target cell between two snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `q_after - q_before`; `None` for targets.
    pub dq: Vec<Option<f64>>,
}

impl DisturbanceMap {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.dq[row * self.cols + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.dq.iter().flatten().map(|d| fabs(*d)).fold(0.0, f64::max)
    }

    pub fn l1(&self) -> f64 {
        self.dq.iter().flatten().map(|d| fabs(*d)).sum()
    }

    /// True when every non-target cell is bit-identical.
    pub fn is_zero(&self) -> bool {
        self.dq.iter().flatten().all(|d| *d == 0.0)
    }

    /// `(row, col, dq)` of non-target cells.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.dq
            .iter()
            .enumerate()
            .filter_map(move |(k, d)| d.map(|d| (k / self.cols, k % self.cols, d)))
    }
}

pub fn write_disturbance(
    before: &CrossbarArray,
    after: &CrossbarArray,
    targets: &[(usize, usize)],
) -> Result<DisturbanceMap> {
    if !before.is_congruent(after) {
        return Err(Error::ShapeMismatch);
    }
    let (m, n) = (before.rows(), before.cols());
    let mut dq: Vec<Option<f64>> = before
        .cells
        .iter()
        .zip(&after.cells)
        .map(|(b, a)| Some(a.q - b.q))
        .collect();
    for &(i, j) in targets {
        if i >= m || j >= n {
            return Err(Error::ShapeMismatch);
        }
        dq[i * n + j] = None;
    }
    Ok(DisturbanceMap { rows: m, cols: n, dq })
}
