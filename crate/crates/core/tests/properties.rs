use proptest::prelude::*;
use quadmem_core::crossbar::{self, BiasConfig, CrossbarArray, LineId, ReadMode, Topology, TopologyKind};
use quadmem_core::device::{self, DerivedModel, DeviceParams, DeviceState};
use quadmem_core::write::{execute_plan, plan_writes, pulse_width_for_target, PolicyKind, Targets, WritePolicy};

fn params() -> DeviceParams {
    DeviceParams::paper_calibrated()
}

proptest! {
    #[test]
    fn charge_stays_in_range(frac in 0.0f64..=1.0, v in -10.0f64..10.0, dt in 1e-3f64..1e4) {
        let p = params();
        let s = device::program_step(DeviceState::with_charge(frac * p.q_max()), &p, v, dt).unwrap();
        prop_assert!(s.q >= 0.0 && s.q <= p.q_max());
    }

    #[test]
    fn forward_is_monotone_in_time(frac in 0.0f64..0.99, dt in 0.1f64..100.0) {
        let p = params();
        let s0 = DeviceState::with_charge(frac * p.q_max());
        let a = device::program_step(s0, &p, 3.6, dt).unwrap();
        let b = device::program_step(a, &p, 3.6, dt).unwrap();
        prop_assert!(a.q >= s0.q && b.q >= a.q);
        let r = device::program_step(s0, &p, -3.6, dt).unwrap();
        prop_assert!(r.q <= s0.q);
    }

    #[test]
    fn flux_is_additive(e1 in -9.0f64..-4.0, e2 in -9.0f64..-4.0, e3 in -9.0f64..-4.0) {
        let m = DerivedModel::new(&params(), 3.6, 1e-7).unwrap();
        let (q1, q2, q3) = (10f64.powf(e1), 10f64.powf(e2), 10f64.powf(e3));
        let sum = device::flux(q1, q2, &m).unwrap() + device::flux(q2, q3, &m).unwrap();
        let direct = device::flux(q1, q3, &m).unwrap();
        prop_assert!((sum - direct).abs() <= 1e-9 * m.k.max(direct.abs()));
    }

    #[test]
    fn pulse_inversion_round_trip(a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let p = params();
        let (q0, q1) = (a * p.q_max(), b * p.q_max());
        let v = if q1 >= q0 { 3.6 } else { -3.6 };
        let w = pulse_width_for_target(q0, q1, &p, v).unwrap();
        let q = if w > 0.0 {
            device::program_step(DeviceState::with_charge(q0), &p, v, w).unwrap().q
        } else {
            q0
        };
        prop_assert!((q - q1).abs() <= 1e-3 * p.q_max());
    }

    #[test]
    fn read_never_moves_charge(
        m in 1usize..5,
        n in 1usize..5,
        seed in any::<u64>(),
        wire in prop_oneof![Just(0.0), 1.0f64..1e4],
    ) {
        let p = params();
        let mut a = CrossbarArray::new(Topology::new(TopologyKind::ProposedIsolatedLoop, m, n).unwrap(), p)
            .unwrap()
            .with_wire_resistance(wire)
            .unwrap();
        for (k, c) in a.cells.iter_mut().enumerate() {
            let f = ((seed.wrapping_mul(k as u64 + 1) % 1000) as f64) / 1000.0;
            *c = DeviceState::with_charge(f * p.q_max());
        }
        let before = a.clone();
        let out = crossbar::read_mac(&a, &vec![0.2; m], ReadMode::FullNodal).unwrap();
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(a, before);
    }

    #[test]
    fn nodal_solution_satisfies_kcl(
        m in 1usize..6,
        n in 1usize..6,
        sel in any::<(usize, usize)>(),
        wire in prop_oneof![Just(0.0), 10.0f64..1e4],
    ) {
        let p = params();
        let a = CrossbarArray::new(Topology::new(TopologyKind::ConventionalSharedRail, m, n).unwrap(), p)
            .unwrap()
            .with_wire_resistance(wire)
            .unwrap();
        let mut bias = BiasConfig::new();
        bias.drive(LineId::Row(sel.0 % m), 0.0).unwrap();
        bias.drive(LineId::Col(sel.1 % n), -3.6).unwrap();
        let sol = crossbar::solve(&a, &bias).unwrap();
        prop_assert!(sol.kcl_violation < 1e-9);
        prop_assert!(sol.residual < 1e-9);
    }

    #[test]
    fn full_parallel_hits_targets(m in 1usize..5, seed in any::<u64>()) {
        let p = params();
        let g: Vec<f64> = (0..m * m)
            .map(|k| {
                let f = 0.05 + 0.9 * ((seed.rotate_left(k as u32) % 997) as f64 / 997.0);
                p.material.g0 + p.conductance_per_charge() * f * p.q_max()
            })
            .collect();
        let targets = Targets::full(m, m, g).unwrap();
        let policy = WritePolicy::new(PolicyKind::FullParallel);
        let mut a = CrossbarArray::new(Topology::new(TopologyKind::ProposedIsolatedLoop, m, m).unwrap(), p).unwrap();
        let plan = plan_writes(&targets, &p, &policy).unwrap();
        let report = execute_plan(&mut a, &plan, &policy).unwrap();
        prop_assert_eq!(report.phase_count, 1);
        prop_assert!(report.target_error < 1e-3);
    }
}
