//! Crossbar solves checked against hand-derived circuits and a dense solver
//! written independently of the library's sparse path.

#![allow(clippy::needless_range_loop)]

use quadmem_core::crossbar::{
    self, BiasConfig, CrossbarArray, LineId, ReadMode, Topology, TopologyKind,
};
use quadmem_core::device::{DeviceParams, DeviceState};
use quadmem_core::write::{execute_plan, plan_writes, PolicyKind, Targets, WritePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params() -> DeviceParams {
    DeviceParams::paper_calibrated()
}

fn g_of(p: &DeviceParams, q: f64) -> f64 {
    p.material.g0 + p.material.mu_e * q / (p.geometry.l_x * p.geometry.l_y)
}

fn random_array(kind: TopologyKind, m: usize, n: usize, rng: &mut ChaCha8Rng) -> CrossbarArray {
    let p = params();
    let mut a = CrossbarArray::new(Topology::new(kind, m, n).unwrap(), p).unwrap();
    for c in &mut a.cells {
        *c = DeviceState::with_charge(rng.gen_range(0.0..p.q_max()));
    }
    a
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Column currents of a resistive-rail read: row `i` driven at its left end,
/// column `j` held at 0 V below the last row, segment conductance `gw`.
fn dense_read(g: &[Vec<f64>], inputs: &[f64], gw: f64) -> Vec<f64> {
    let (m, n) = (g.len(), g[0].len());
    let r = |i: usize, j: usize| i * n + j;
    let c = |i: usize, j: usize| m * n + j * m + i;
    let dim = 2 * m * n;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    let stamp = |a: &mut Vec<Vec<f64>>, x: usize, y: usize, g: f64| {
        a[x][x] += g;
        a[y][y] += g;
        a[x][y] -= g;
        a[y][x] -= g;
    };
    for i in 0..m {
        // driver to first crossing
        a[r(i, 0)][r(i, 0)] += gw;
        b[r(i, 0)] += gw * inputs[i];
        for j in 1..n {
            stamp(&mut a, r(i, j - 1), r(i, j), gw);
        }
    }
    for j in 0..n {
        // last row's crossing to the grounded sense end
        a[c(m - 1, j)][c(m - 1, j)] += gw;
        for i in 1..m {
            stamp(&mut a, c(i - 1, j), c(i, j), gw);
        }
    }
    for i in 0..m {
        for j in 0..n {
            stamp(&mut a, r(i, j), c(i, j), g[i][j]);
        }
    }
    let x = dense_solve(a, b);
    (0..n).map(|j| gw * x[c(m - 1, j)]).collect()
}

#[test]
fn two_by_two_sneak_matches_series_path() {
    let p = params();
    let mut a = CrossbarArray::new(Topology::new(TopologyKind::ConventionalSharedRail, 2, 2).unwrap(), p).unwrap();
    let qm = p.q_max();
    *a.cell_mut(0, 1) = DeviceState::with_charge(0.2 * qm);
    *a.cell_mut(1, 1) = DeviceState::with_charge(0.7 * qm);
    *a.cell_mut(1, 0) = DeviceState::with_charge(0.4 * qm);
    let r = |i, j| 1.0 / g_of(&p, a.cell(i, j).q);
    let v = 3.6;
    let expected = v / (r(0, 1) + r(1, 1) + r(1, 0));

    let mut bias = BiasConfig::new();
    bias.drive(LineId::Row(0), 0.0).unwrap();
    bias.drive(LineId::Col(0), -v).unwrap();
    let sol = crossbar::solve(&a, &bias).unwrap();
    for (i, j) in [(0, 1), (1, 1), (1, 0)] {
        let got = sol.cell_currents[a.index(i, j)].abs();
        assert!((got - expected).abs() <= 1e-9 * expected, "({i},{j}) {got} vs {expected}");
    }
    // the selected cell sees the full drive
    assert!((sol.cell_voltages[0] - v).abs() < 1e-12);

    let before = a.clone();
    let policy = WritePolicy::new(PolicyKind::SequentialCellwise);
    let targets = Targets::partial(2, 2, vec![Some(g_of(&p, 0.5 * qm)), None, None, None]).unwrap();
    let plan = plan_writes(&targets, &p, &policy).unwrap();
    let report = execute_plan(&mut a, &plan, &policy).unwrap();
    assert!((report.max_sneak_current - expected).abs() <= 1e-9 * expected);
    let dist = crossbar::write_disturbance(&before, &a, &[(0, 0)]).unwrap();
    // forward-biased sneak cells gain charge
    assert!(dist.get(0, 1).unwrap() > 0.0);
    assert!(dist.get(1, 0).unwrap() > 0.0);
    assert!(dist.l1() > 0.0);
}

#[test]
fn ideal_read_is_dense_matvec() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACE);
    for _ in 0..20 {
        let a = random_array(TopologyKind::ProposedIsolatedLoop, 8, 8, &mut rng);
        let v: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let got = crossbar::read_mac(&a, &v, ReadMode::Ideal).unwrap();
        let nodal = crossbar::read_mac(&a, &v, ReadMode::FullNodal).unwrap();
        for j in 0..8 {
            let expected: f64 = (0..8).map(|i| g_of(&p, a.cell(i, j).q) * v[i]).sum();
            let scale: f64 = (0..8).map(|i| (g_of(&p, a.cell(i, j).q) * v[i]).abs()).sum();
            assert!((got[j] - expected).abs() <= 1e-12 * scale);
            assert!((nodal[j] - expected).abs() <= 1e-9 * scale);
        }
    }
}

#[test]
fn resistive_rails_match_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(m, n) in &[(1, 1), (2, 3), (4, 4), (5, 2)] {
        let a = random_array(TopologyKind::ConventionalSharedRail, m, n, &mut rng)
            .with_wire_resistance(2.5e3)
            .unwrap();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..0.2)).collect();
        let g: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| a.conductance_at(i, j)).collect()).collect();
        let expected = dense_read(&g, &v, 1.0 / 2.5e3);
        let got = crossbar::read_mac(&a, &v, ReadMode::FullNodal).unwrap();
        for j in 0..n {
            assert!((got[j] - expected[j]).abs() <= 1e-9 * expected[j].abs().max(1e-15), "{m}x{n} col {j}");
        }
    }
}

#[test]
fn kcl_holds_at_every_free_node() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_array(TopologyKind::ConventionalSharedRail, 4, 4, &mut rng)
        .with_wire_resistance(1e3)
        .unwrap();
    let mut bias = BiasConfig::new();
    bias.drive(LineId::Row(1), 0.0).unwrap();
    bias.drive(LineId::Col(2), -3.6).unwrap();
    let sys = crossbar::build_nodal_system(&a, &bias).unwrap();
    let sol = sys.solve().unwrap();
    let nodal = sys.nodal();
    let mut net = vec![0.0; nodal.node_count()];
    let mut through = vec![0.0f64; nodal.node_count()];
    for br in nodal.branches() {
        let i = br.conductance * (sol.node_voltages[br.a] - sol.node_voltages[br.b]);
        net[br.a] += i;
        net[br.b] -= i;
        through[br.a] += i.abs();
        through[br.b] += i.abs();
    }
    // dangling rail ends carry no current; judge them against the drive
    let floor = 1e-12 * through.iter().cloned().fold(0.0, f64::max);
    for &k in nodal.free_nodes() {
        assert!(net[k].abs() <= 1e-9 * through[k] + floor, "node {k}: {}", net[k]);
    }
}

#[test]
fn full_parallel_write_leaves_neighbours_untouched() {
    let p = params();
    for m in [1, 2, 4, 8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let mut a = random_array(TopologyKind::ProposedIsolatedLoop, m, m, &mut rng);
        // program a checkerboard, leave the rest
        let g: Vec<Option<f64>> = (0..m * m)
            .map(|k| ((k / m + k % m) % 2 == 0).then(|| g_of(&p, rng.gen_range(0.05..0.95) * p.q_max())))
            .collect();
        let targets = Targets::partial(m, m, g.clone()).unwrap();
        let policy = WritePolicy::new(PolicyKind::FullParallel);
        let before = a.clone();
        let plan = plan_writes(&targets, &p, &policy).unwrap();
        let report = execute_plan(&mut a, &plan, &policy).unwrap();
        assert_eq!(report.phase_count, 1);
        for k in 0..m * m {
            if g[k].is_none() {
                assert_eq!(a.cells[k].q.to_bits(), before.cells[k].q.to_bits());
            }
        }
        assert_eq!(report.disturbance_l1, 0.0);
        assert_eq!(report.max_sneak_current, 0.0);
    }
}

#[test]
fn write_mode_system_is_block_diagonal() {
    let p = params();
    for m in [1, 2, 4, 8, 16] {
        let a = CrossbarArray::new(Topology::new(TopologyKind::ProposedIsolatedLoop, m, m).unwrap(), p).unwrap();
        let mut bias = BiasConfig::new();
        for i in 0..m {
            for j in 0..m {
                bias.drive(LineId::ControlPlus(i, j), 3.6).unwrap();
                bias.drive(LineId::ControlMinus(i, j), 0.0).unwrap();
            }
        }
        let sys = crossbar::build_nodal_system(&a, &bias).unwrap();
        assert!(sys.is_block_diagonal_by_cell());
        assert_eq!(sys.cross_cell_couplings(), 0);
        // every branch joins two nodes of the same cell
        for br in sys.nodal().branches() {
            let (x, y) = (sys.tag(br.a).owner(), sys.tag(br.b).owner());
            assert!(x.is_some() && x == y);
        }
    }
}

#[test]
fn rail_resistance_error_grows_with_size() {
    let mut errs = Vec::new();
    for m in [2, 4, 8] {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_array(TopologyKind::ConventionalSharedRail, m, m, &mut rng)
            .with_wire_resistance(1e3)
            .unwrap();
        let v = vec![0.2; m];
        let ideal = crossbar::read_mac(&a, &v, ReadMode::Ideal).unwrap();
        let nodal = crossbar::read_mac(&a, &v, ReadMode::FullNodal).unwrap();
        let num: f64 = ideal.iter().zip(&nodal).map(|(x, y)| (x - y).abs()).sum();
        let den: f64 = ideal.iter().map(|x| x.abs()).sum();
        errs.push(num / den);
    }
    assert!(errs[0] > 0.0);
    assert!(errs.windows(2).all(|w| w[1] >= w[0]), "{errs:?}");
}
