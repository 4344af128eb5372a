use proptest::prelude::*;

use tiwork::netlist::{
    distribute_delays, period_grid, random_vector_pairs, select_path, simulate_waveforms,
    sweep_clock, synthesize_shared_g, timing_simulate, verify_witness, Delays, GaConfig,
    GateKind, Netlist, NetlistBuilder, NodeKind, TrojanSpec, DEFAULT_SETUP_MARGIN,
    SHARED_G_TARGETS,
};
use tiwork::Exec;

const KINDS: [GateKind; 9] = [
    GateKind::And,
    GateKind::Or,
    GateKind::Xor,
    GateKind::Xnor,
    GateKind::Nand,
    GateKind::Nor,
    GateKind::Not,
    GateKind::Buf,
    GateKind::Delay,
];

/// Random DAG: 4 inputs, gates reading only earlier nets, every gate registered.
fn random_netlist() -> impl Strategy<Value = Netlist> {
    proptest::collection::vec((0usize..9, any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0.1f64..3.0), 1..24)
        .prop_map(|gates| {
            let mut b = NetlistBuilder::new();
            let mut nets: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
            for n in &nets {
                b.input(n);
            }
            for (k, (kind, x, y, d)) in gates.into_iter().enumerate() {
                let kind = KINDS[kind];
                let name = format!("g{k}");
                let a = nets[x.index(nets.len())].clone();
                let c = nets[y.index(nets.len())].clone();
                let fanin: Vec<&str> = if kind.arity() == 1 { vec![&a] } else { vec![&a, &c] };
                b.gate(&name, kind, &fanin, d);
                b.register(&format!("q{k}"), &name);
                nets.push(name);
            }
            b.build().unwrap()
        })
}

/// Longest path through each node, computed independently of the crate.
fn slack_oracle(n: &Netlist, t_ref: f64) -> Vec<f64> {
    let d = n.nominal_delays();
    let mut arrive = vec![0.0f64; n.nodes().len()];
    for &i in n.topo_order() {
        if let NodeKind::Gate { fanin, .. } = &n.node(i).kind {
            arrive[i] = fanin.iter().map(|&f| arrive[f]).fold(0.0, f64::max) + d.get(i);
        }
    }
    let mut tail = vec![0.0f64; n.nodes().len()];
    for &i in n.topo_order().iter().rev() {
        if let NodeKind::Gate { fanin, .. } = &n.node(i).kind {
            for &f in fanin {
                tail[f] = tail[f].max(tail[i] + d.get(i));
            }
        }
    }
    (0..arrive.len()).map(|i| t_ref - (arrive[i] + tail[i])).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn infinite_period_equals_functional(n in random_netlist(), seed in any::<u64>()) {
        let vectors = random_vector_pairs(4, 32, seed);
        let res = timing_simulate(&n, &n.nominal_delays(), f64::INFINITY, 0.0, &vectors).unwrap();
        for (r, &(_, after)) in res.iter().zip(&vectors) {
            let f = n.eval_registers(after);
            let got = r.registers.iter().enumerate().fold(0u64, |a, (i, &b)| a | (b as u64) << i);
            prop_assert_eq!(got, f);
            prop_assert!(r.violations.is_empty());
        }
    }

    #[test]
    fn waveforms_settle_to_functional_values(delays in proptest::collection::vec(0.05f64..4.0, 256), seed in any::<u64>()) {
        let n = synthesize_shared_g();
        let mut d = n.nominal_delays();
        for (i, node) in n.nodes().iter().enumerate() {
            if matches!(node.kind, NodeKind::Gate { .. }) {
                d.set(i, delays[i % delays.len()]);
            }
        }
        for (before, after) in random_vector_pairs(12, 8, seed) {
            let waves = simulate_waveforms(&n, &d, before, after, &[]);
            let start = n.eval_vector(before);
            let end = n.eval_vector(after);
            for (i, w) in waves.iter().enumerate() {
                prop_assert_eq!(w.initial, start[i]);
                prop_assert_eq!(w.final_value(), end[i]);
            }
        }
    }

    #[test]
    fn witnesses_reverify(n in random_netlist(), pick in any::<prop::sample::Index>()) {
        let gates: Vec<String> = n.nodes().iter().filter(|x| matches!(x.kind, NodeKind::Gate { .. })).map(|x| x.name.clone()).collect();
        let target = &gates[pick.index(gates.len())];
        if let Ok(p) = select_path(&n, target) {
            prop_assert!(verify_witness(&n, &p));
            let names = p.names(&n);
            prop_assert!(names.contains(target));
            // consecutive nodes are fanin-connected
            let nodes = p.nodes();
            for w in nodes.windows(2) {
                match &n.node(w[1]).kind {
                    NodeKind::Gate { fanin, .. } => prop_assert!(fanin.contains(&w[0])),
                    _ => prop_assert!(false, "non-gate on path"),
                }
            }
        }
    }
}

fn shared_g_ga(seed: u64, target: f64, vectors: usize) -> (Netlist, TrojanSpec, GaConfig, Vec<(u64, u64)>) {
    let n = synthesize_shared_g();
    let spec = TrojanSpec::shared_g(&n).unwrap();
    let cfg = GaConfig {
        population: 8,
        generations: 3,
        target_delay: target,
        c: 1.5,
        seed,
        ..GaConfig::default()
    };
    let v = random_vector_pairs(12, vectors, seed);
    (n, spec, cfg, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn assignments_satisfy_sum_and_windows(seed in any::<u64>(), target in 7.5f64..9.5) {
        let (n, spec, cfg, v) = shared_g_ga(seed, target, 200);
        let paths: Vec<_> = SHARED_G_TARGETS.iter().map(|t| select_path(&n, t).unwrap()).collect();
        let out = distribute_delays(&n, &paths, &spec, &cfg, &v, Exec::Parallel).unwrap();
        let a = &out.assignment;
        let slack = slack_oracle(&n, a.t_ref);
        for (p, gates) in a.paths.iter().enumerate() {
            let sum: f64 = a.assigned[p].iter().sum();
            prop_assert!((sum - target).abs() < 1e-9, "sum {} vs {}", sum, target);
            for (k, &g) in gates.iter().enumerate() {
                let d0 = n.nominal_delays().get(g);
                let lo = (d0 + slack[g] - cfg.c).max(0.0);
                let hi = d0 + slack[g] + cfg.c;
                let d = a.assigned[p][k];
                prop_assert!(d > 0.0 && d >= lo - 1e-9 && d <= hi + 1e-9, "gate {} delay {} not in [{}, {}]", g, d, lo, hi);
            }
        }
        prop_assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ga_is_deterministic(seed in any::<u64>()) {
        let (n, spec, cfg, v) = shared_g_ga(seed, 8.75, 150);
        let paths: Vec<_> = SHARED_G_TARGETS.iter().map(|t| select_path(&n, t).unwrap()).collect();
        let a = distribute_delays(&n, &paths, &spec, &cfg, &v, Exec::Parallel).unwrap();
        let b = distribute_delays(&n, &paths, &spec, &cfg, &v, Exec::Sequential).unwrap();
        prop_assert_eq!(a.assignment, b.assignment);
        prop_assert_eq!(a.history, b.history);
    }

    #[test]
    fn sweep_bands_are_contiguous_and_ordered(seed in any::<u64>(), target in 8.0f64..9.5) {
        let (n, spec, cfg, v) = shared_g_ga(seed, target, 400);
        let paths: Vec<_> = SHARED_G_TARGETS.iter().map(|t| select_path(&n, t).unwrap()).collect();
        let out = distribute_delays(&n, &paths, &spec, &cfg, &v, Exec::Parallel).unwrap();
        let delays: Delays = out.assignment.delays(&n);
        let grid = period_grid(1.5 * target, 3.5, 81);
        let s = sweep_clock(&n, &delays, &spec, &grid, &v, DEFAULT_SETUP_MARGIN, Exec::Parallel).unwrap();
        prop_assert!(s.is_ordered(), "{:?}", s.bands());
        let bands = s.bands();
        for w in bands.windows(2) {
            prop_assert!(w[0].low > w[1].high);
        }
        prop_assert_eq!(bands.first().unwrap().high, grid[0]);
        prop_assert_eq!(bands.last().unwrap().low, *grid.last().unwrap());
    }
}
