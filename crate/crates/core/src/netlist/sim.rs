//! Event-driven timing simulation with inertial gate delays.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Delays, Netlist, NodeKind, Output};
use crate::error::Result;

/// Value history of one node after the input transition at time 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub initial: bool,
    pub transitions: Vec<(f64, bool)>,
}

impl Waveform {
    /// Value held at time `t`; a transition exactly at `t` is included.
    pub fn value_at(&self, t: f64) -> bool {
        self.transitions
            .iter()
            .take_while(|(tt, _)| *tt <= t)
            .last()
            .map_or(self.initial, |&(_, v)| v)
    }

    pub fn final_value(&self) -> bool {
        self.transitions.last().map_or(self.initial, |&(_, v)| v)
    }

    pub fn last_transition(&self) -> Option<f64> {
        self.transitions.last().map(|&(t, _)| t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Final transition in `(T - margin, T]`.
    Metastable,
    /// Final transition after `T`.
    Missed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorResult {
    /// Captured register values.
    pub registers: Vec<bool>,
    /// Declared outputs: registers as captured, nets as held at `T`.
    pub outputs: Vec<bool>,
    /// Time of the final transition per node, `None` when it never switched.
    pub arrival: Vec<Option<f64>>,
    pub violations: Vec<Violation>,
}

impl VectorResult {
    pub fn violation(&self, node: usize) -> Option<ViolationKind> {
        self.violations.iter().find(|v| v.node == node).map(|v| v.kind)
    }
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    node: usize,
    value: bool,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time.total_cmp(&o.time).then(self.seq.cmp(&o.seq))
    }
}

/// Waveforms of every node for the transition `before -> after` at time 0.
/// Nodes in `frozen` keep their `before` value throughout.
pub fn simulate_waveforms(
    n: &Netlist,
    delays: &Delays,
    before: u64,
    after: u64,
    frozen: &[usize],
) -> Vec<Waveform> {
    let init = n.eval_vector(before);
    let mut cur = init.clone();
    let mut waves: Vec<Waveform> = init
        .iter()
        .map(|&v| Waveform {
            initial: v,
            transitions: Vec::new(),
        })
        .collect();
    let mut is_frozen = vec![false; cur.len()];
    for &f in frozen {
        is_frozen[f] = true;
    }
    let mut pending: Vec<Option<u64>> = vec![None; cur.len()];
    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    let mut seq = 0u64;

    let mut changed = Vec::new();
    for (k, &i) in n.inputs().iter().enumerate() {
        let v = (after >> k) & 1 == 1;
        if v != cur[i] && !is_frozen[i] {
            cur[i] = v;
            waves[i].transitions.push((0.0, v));
            changed.push(i);
        }
    }

    let mut reevaluate = |g: usize,
                          t: f64,
                          cur: &[bool],
                          pending: &mut Vec<Option<u64>>,
                          heap: &mut BinaryHeap<Reverse<Event>>| {
        if is_frozen[g] {
            return;
        }
        let NodeKind::Gate { kind, fanin, .. } = &n.node(g).kind else {
            return;
        };
        let a = cur[fanin[0]] as u64;
        let b = fanin.get(1).map_or(0, |&f| cur[f] as u64);
        let v = kind.eval(a, b) & 1 == 1;
        if v == cur[g] {
            pending[g] = None;
        } else if pending[g].is_none() {
            seq += 1;
            pending[g] = Some(seq);
            heap.push(Reverse(Event {
                time: t + delays.get(g),
                seq,
                node: g,
                value: v,
            }));
        }
    };

    for &i in &changed {
        for &g in n.fanout(i) {
            reevaluate(g, 0.0, &cur, &mut pending, &mut heap);
        }
    }
    while let Some(Reverse(ev)) = heap.pop() {
        if pending[ev.node] != Some(ev.seq) {
            continue;
        }
        pending[ev.node] = None;
        cur[ev.node] = ev.value;
        waves[ev.node].transitions.push((ev.time, ev.value));
        for &g in n.fanout(ev.node) {
            reevaluate(g, ev.time, &cur, &mut pending, &mut heap);
        }
    }
    waves
}

fn violation_kind(last: Option<f64>, period: f64, margin: f64) -> Option<ViolationKind> {
    let t = last?;
    if !period.is_finite() {
        None
    } else if t > period {
        Some(ViolationKind::Missed)
    } else if t > period - margin {
        Some(ViolationKind::Metastable)
    } else {
        None
    }
}

pub(crate) fn classify_arrival(last: Option<f64>, period: f64, margin: f64) -> Option<ViolationKind> {
    violation_kind(last, period, margin)
}

/// Simulates each `(v_before, v_after)` pair and samples registers at `period`.
/// `setup_margin` is absolute; pass `0.02 * period` for the default window.
pub fn timing_simulate(
    n: &Netlist,
    delays: &Delays,
    period: f64,
    setup_margin: f64,
    vectors: &[(u64, u64)],
) -> Result<Vec<VectorResult>> {
    delays.validate(n)?;
    Ok(vectors
        .iter()
        .map(|&(before, after)| {
            let waves = simulate_waveforms(n, delays, before, after, &[]);
            let registers: Vec<bool> = n
                .registers()
                .iter()
                .map(|r| waves[r.d].value_at(period))
                .collect();
            let outputs = n
                .outputs()
                .iter()
                .map(|o| match o {
                    Output::Register(r) => registers[*r],
                    Output::Node(x) => waves[*x].value_at(period),
                })
                .collect();
            let arrival: Vec<Option<f64>> = waves.iter().map(|w| w.last_transition()).collect();
            let violations = arrival
                .iter()
                .enumerate()
                .filter_map(|(node, &a)| {
                    violation_kind(a, period, setup_margin).map(|kind| Violation { node, kind })
                })
                .collect();
            VectorResult {
                registers,
                outputs,
                arrival,
                violations,
            }
        })
        .collect())
}

/// Uniform random `(v_before, v_after)` pairs over `n_inputs` bits.
pub fn random_vector_pairs(n_inputs: usize, count: usize, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = if n_inputs >= 64 {
        u64::MAX
    } else {
        (1u64 << n_inputs) - 1
    };
    (0..count)
        .map(|_| (rng.random::<u64>() & mask, rng.random::<u64>() & mask))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn chain() -> Netlist {
        parse_netlist(
            "input a\ngate b1 BUF a delay=1\ngate b2 BUF b1 delay=1\ngate b3 BUF b2 delay=1\nreg q b3\noutput q\n",
        )
        .unwrap()
    }

    #[test]
    fn chain_misses_at_short_period() {
        let n = chain();
        let d = n.nominal_delays();
        let r = &timing_simulate(&n, &d, 2.5, 0.05, &[(0, 1)]).unwrap()[0];
        assert_eq!(r.registers, vec![false]);
        assert_eq!(r.outputs, vec![false]);
        let b3 = n.node_id("b3").unwrap();
        assert_eq!(r.arrival[b3], Some(3.0));
        assert_eq!(r.violation(b3), Some(ViolationKind::Missed));
    }

    #[test]
    fn chain_captures_at_long_period() {
        let n = chain();
        let d = n.nominal_delays();
        let r = &timing_simulate(&n, &d, 3.5, 0.07, &[(0, 1)]).unwrap()[0];
        assert_eq!(r.registers, vec![true]);
        assert!(r.violations.is_empty());
    }

    #[test]
    fn metastable_window() {
        let n = chain();
        let d = n.nominal_delays();
        let r = &timing_simulate(&n, &d, 3.05, 0.061, &[(0, 1)]).unwrap()[0];
        assert_eq!(r.violation(n.node_id("b3").unwrap()), Some(ViolationKind::Metastable));
        assert_eq!(r.registers, vec![true]);
    }

    #[test]
    fn inertial_filter_drops_short_pulse() {
        // a and NOT(a) through unequal paths: a 0.5-wide glitch at the AND
        let n = parse_netlist(
            "input a\ngate na NOT a delay=0.5\ngate g AND a na delay=1\ngate h AND a na delay=0.4\n",
        )
        .unwrap();
        let w = simulate_waveforms(&n, &n.nominal_delays(), 0, 1, &[]);
        assert!(w[n.node_id("g").unwrap()].transitions.is_empty());
        assert_eq!(w[n.node_id("h").unwrap()].transitions, vec![(0.4, true), (0.9, false)]);
    }

    #[test]
    fn frozen_nodes_hold() {
        let n = chain();
        let w = simulate_waveforms(&n, &n.nominal_delays(), 0, 1, &[n.node_id("b2").unwrap()]);
        assert!(w[n.node_id("b3").unwrap()].transitions.is_empty());
        assert_eq!(w[n.node_id("b1").unwrap()].transitions, vec![(1.0, true)]);
    }

    #[test]
    fn rejects_nonpositive_delay() {
        let n = chain();
        let mut d = n.nominal_delays();
        d.set(n.node_id("b1").unwrap(), 0.0);
        assert!(timing_simulate(&n, &d, 1.0, 0.0, &[(0, 1)]).is_err());
    }
}
