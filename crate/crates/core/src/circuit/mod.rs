//! Nodal analysis of linear resistive networks.
//!
//! A [`Netlist`] collects conductance branches and Dirichlet (driven)
//! nodes. [`Netlist::build`] stamps the full node Laplacian, eliminates the
//! driven nodes into the right-hand side and keeps floating nodes as
//! ordinary unknowns. [`NodalSystem::solve`] factors the reduced matrix and
//! refines the solution until the backward error is within
//! [`RESIDUAL_BOUND`].

mod sparse;

use alloc::vec;
use alloc::vec::Vec;

use libm::fabs;

pub use self::sparse::{reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};
use crate::error::{Error, Result};

/// Contract on the normwise relative residual of every solve.
pub const RESIDUAL_BOUND: f64 = 1e-9;

const REFINEMENT_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
    /// Siemens. Zero means an open branch: kept for bookkeeping, never stamped.
    pub conductance: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Netlist {
    node_count: usize,
    branches: Vec<Branch>,
    fixed: Vec<Option<f64>>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self) -> usize {
        self.node_count += 1;
        self.fixed.push(None);
        self.node_count - 1
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                node,
                count: self.node_count,
            })
        }
    }

    /// Adds a conductance between two nodes and returns the branch index.
    pub fn add_branch(&mut self, a: usize, b: usize, conductance: f64) -> Result<usize> {
        self.check_node(a)?;
        self.check_node(b)?;
        if !(conductance.is_finite() && conductance >= 0.0) {
            return Err(Error::InvalidConductance { conductance });
        }
        self.branches.push(Branch { a, b, conductance });
        Ok(self.branches.len() - 1)
    }

    /// Drives `node` at `voltage`.
    pub fn fix(&mut self, node: usize, voltage: f64) -> Result<()> {
        self.check_node(node)?;
        self.fixed[node] = Some(voltage);
        Ok(())
    }

    pub fn build(self) -> Result<NodalSystem> {
        if self.fixed.iter().all(Option::is_none) {
            return Err(Error::NoReferencePotential);
        }
        let n = self.node_count;
        let mut free_index = vec![None; n];
        let mut free_nodes = Vec::new();
        for node in 0..n {
            if self.fixed[node].is_none() {
                free_index[node] = Some(free_nodes.len());
                free_nodes.push(node);
            }
        }

        let mut triplets = Vec::new();
        let mut rhs = vec![0.0; free_nodes.len()];
        for br in self.branches.iter().filter(|b| b.conductance > 0.0 && b.a != b.b) {
            let g = br.conductance;
            match (free_index[br.a], free_index[br.b]) {
                (Some(i), Some(j)) => {
                    triplets.push((i, i, g));
                    triplets.push((j, j, g));
                    triplets.push((i, j, -g));
                    triplets.push((j, i, -g));
                }
                (Some(i), None) => {
                    triplets.push((i, i, g));
                    rhs[i] += g * self.fixed[br.b].unwrap();
                }
                (None, Some(j)) => {
                    triplets.push((j, j, g));
                    rhs[j] += g * self.fixed[br.a].unwrap();
                }
                (None, None) => {}
            }
        }
        let matrix = CsrMatrix::from_triplets(free_nodes.len(), triplets);

        Ok(NodalSystem {
            node_count: n,
            branches: self.branches,
            fixed: self.fixed,
            free_index,
            free_nodes,
            matrix,
            rhs,
        })
    }
}

/// Conductance system of one bias configuration, reduced to its free nodes.
#[derive(Debug, Clone)]
pub struct NodalSystem {
    node_count: usize,
    branches: Vec<Branch>,
    fixed: Vec<Option<f64>>,
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    matrix: CsrMatrix,
    rhs: Vec<f64>,
}

impl NodalSystem {
    /// Number of free (non-driven) nodes.
    pub fn dimension(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Reduced conductance matrix over free nodes.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Injected currents from driven neighbours, ampere.
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Matrix row of a circuit node, `None` for driven nodes.
    pub fn row_of(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Circuit node of each matrix row.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn fixed_voltage(&self, node: usize) -> Option<f64> {
        self.fixed[node]
    }

    /// Node Laplacian over every node, before driven nodes are eliminated.
    pub fn full_matrix(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(4 * self.branches.len());
        for br in self.branches.iter().filter(|b| b.conductance > 0.0 && b.a != b.b) {
            let g = br.conductance;
            triplets.push((br.a, br.a, g));
            triplets.push((br.b, br.b, g));
            triplets.push((br.a, br.b, -g));
            triplets.push((br.b, br.a, -g));
        }
        CsrMatrix::from_triplets(self.node_count, triplets)
    }

    /// Connected components of the free-node graph that touch no driven node.
    pub fn floating_islands(&self) -> Vec<Vec<usize>> {
        let n = self.node_count;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut anchored = vec![false; n];
        for br in self.branches.iter().filter(|b| b.conductance > 0.0) {
            match (self.fixed[br.a].is_some(), self.fixed[br.b].is_some()) {
                (false, false) => {
                    let (ra, rb) = (find(&mut parent, br.a), find(&mut parent, br.b));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                }
                (false, true) => anchored[br.a] = true,
                (true, false) => anchored[br.b] = true,
                (true, true) => {}
            }
        }
        let mut root_anchored = vec![false; n];
        for &node in &self.free_nodes {
            if anchored[node] {
                let r = find(&mut parent, node);
                root_anchored[r] = true;
            }
        }
        let mut islands: Vec<(usize, Vec<usize>)> = Vec::new();
        for &node in &self.free_nodes {
            let r = find(&mut parent, node);
            if root_anchored[r] {
                continue;
            }
            match islands.iter_mut().find(|(root, _)| *root == r) {
                Some((_, nodes)) => nodes.push(node),
                None => islands.push((r, vec![node])),
            }
        }
        islands.into_iter().map(|(_, nodes)| nodes).collect()
    }

    pub fn solve(&self) -> Result<SolveResult> {
        if let Some(nodes) = self.floating_islands().into_iter().next() {
            return Err(Error::FloatingIsland { component: nodes[0], nodes });
        }

        let mut x = vec![0.0; self.dimension()];
        let mut residual = 0.0;
        if self.dimension() > 0 {
            let factor = EnvelopeCholesky::factor(&self.matrix)?;
            x = factor.solve(&self.rhs);
            residual = self.relative_residual(&x);
            for _ in 0..REFINEMENT_STEPS {
                if residual <= 1e-15 {
                    break;
                }
                let ax = self.matrix.mul_vec(&x);
                let r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                let dx = factor.solve(&r);
                let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
                let cand_res = self.relative_residual(&candidate);
                if cand_res >= residual {
                    break;
                }
                x = candidate;
                residual = cand_res;
            }
            if residual > RESIDUAL_BOUND {
                return Err(Error::ResidualTooLarge {
                    residual,
                    bound: RESIDUAL_BOUND,
                });
            }
        }

        let node_voltages: Vec<f64> = (0..self.node_count)
            .map(|node| match self.fixed[node] {
                Some(v) => v,
                None => x[self.free_index[node].unwrap()],
            })
            .collect();
        let branch_currents = self
            .branches
            .iter()
            .map(|br| br.conductance * (node_voltages[br.a] - node_voltages[br.b]))
            .collect();

        Ok(SolveResult {
            node_voltages,
            branch_currents,
            residual,
        })
    }

    /// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r = self
            .rhs
            .iter()
            .zip(&ax)
            .map(|(b, a)| fabs(b - a))
            .fold(0.0, f64::max);
        let xn = x.iter().map(|v| fabs(*v)).fold(0.0, f64::max);
        let bn = self.rhs.iter().map(|v| fabs(*v)).fold(0.0, f64::max);
        let scale = self.matrix.inf_norm() * xn + bn;
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Volt, indexed by circuit node.
    pub node_voltages: Vec<f64>,
    /// Ampere from `a` to `b`, indexed by branch.
    pub branch_currents: Vec<f64>,
    /// Normwise relative residual of the linear solve.
    pub residual: f64,
}

impl SolveResult {
    /// Net current leaving `node` through its branches.
    pub fn net_outflow(&self, system: &NodalSystem, node: usize) -> f64 {
        system
            .branches
            .iter()
            .zip(&self.branch_currents)
            .map(|(br, &i)| {
                if br.a == node && br.b != node {
                    i
                } else if br.b == node && br.a != node {
                    -i
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Worst Kirchhoff imbalance over free nodes, relative to the largest
    /// branch current. Zero when no current flows.
    pub fn kcl_violation(&self, system: &NodalSystem) -> f64 {
        let imax = self.branch_currents.iter().map(|i| fabs(*i)).fold(0.0, f64::max);
        if imax == 0.0 {
            return 0.0;
        }
        let mut outflow = vec![0.0; system.node_count];
        for (br, &i) in system.branches.iter().zip(&self.branch_currents) {
            outflow[br.a] += i;
            outflow[br.b] -= i;
        }
        system
            .free_nodes
            .iter()
            .map(|&node| fabs(outflow[node]))
            .fold(0.0, f64::max)
            / imax
    }
}
