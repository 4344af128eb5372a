//! SCOAP testability scores and sensitizable-path selection through a target gate.

use std::collections::HashMap;

use super::sim::simulate_waveforms;
use super::{GateKind, Netlist, NodeKind};
use crate::error::{Error, Result};

/// Largest input count the exhaustive oracle accepts.
pub const MAX_ORACLE_INPUTS: usize = 20;

const INF: u32 = u32::MAX / 4;

/// Combinational controllability (`cc0`, `cc1`) and observability (`co`).
#[derive(Clone, Debug, PartialEq)]
pub struct Scoap {
    pub cc0: Vec<u32>,
    pub cc1: Vec<u32>,
    pub co: Vec<u32>,
}

impl Scoap {
    /// Effort to drive a node both ways.
    pub fn justification(&self, node: usize) -> u32 {
        self.cc0[node].saturating_add(self.cc1[node])
    }
}

fn add(xs: &[u32]) -> u32 {
    xs.iter().fold(0u32, |a, &x| a.saturating_add(x)).min(INF)
}

pub fn scoap(n: &Netlist) -> Scoap {
    let len = n.nodes().len();
    let mut cc0 = vec![INF; len];
    let mut cc1 = vec![INF; len];
    for &i in n.topo_order() {
        let (z, o) = match &n.node(i).kind {
            NodeKind::Input => (1, 1),
            NodeKind::Const(false) => (0, INF),
            NodeKind::Const(true) => (INF, 0),
            NodeKind::Gate { kind, fanin, .. } => {
                let a = fanin[0];
                let b = fanin.get(1).copied().unwrap_or(a);
                let (a0, a1, b0, b1) = (cc0[a], cc1[a], cc0[b], cc1[b]);
                let and = (a0.min(b0), add(&[a1, b1]));
                let or = (add(&[a0, b0]), a1.min(b1));
                let xor = (add(&[a0, b0]).min(add(&[a1, b1])), add(&[a0, b1]).min(add(&[a1, b0])));
                let (z, o) = match kind {
                    GateKind::And => and,
                    GateKind::Nand => (and.1, and.0),
                    GateKind::Or => or,
                    GateKind::Nor => (or.1, or.0),
                    GateKind::Xor => xor,
                    GateKind::Xnor => (xor.1, xor.0),
                    GateKind::Not => (a1, a0),
                    GateKind::Buf | GateKind::Delay => (a0, a1),
                };
                (add(&[z, 1]), add(&[o, 1]))
            }
        };
        cc0[i] = z;
        cc1[i] = o;
    }
    let mut co = vec![INF; len];
    for e in n.endpoints() {
        co[e] = 0;
    }
    for &g in n.topo_order().iter().rev() {
        let NodeKind::Gate { kind, fanin, .. } = &n.node(g).kind else {
            continue;
        };
        if co[g] >= INF {
            continue;
        }
        for (pos, &f) in fanin.iter().enumerate() {
            let other = (fanin.len() == 2).then(|| fanin[1 - pos]);
            let side = match (kind, other) {
                (GateKind::And | GateKind::Nand, Some(o)) => cc1[o],
                (GateKind::Or | GateKind::Nor, Some(o)) => cc0[o],
                (GateKind::Xor | GateKind::Xnor, Some(o)) => cc0[o].min(cc1[o]),
                _ => 0,
            };
            co[f] = co[f].min(add(&[co[g], side, 1]));
        }
    }
    Scoap { cc0, cc1, co }
}

/// A path from a primary input through gates to an endpoint, with a witness pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitizedPath {
    pub source: usize,
    pub gates: Vec<usize>,
    pub witness: (u64, u64),
}

impl SensitizedPath {
    /// Source followed by the gates.
    pub fn nodes(&self) -> Vec<usize> {
        std::iter::once(self.source).chain(self.gates.iter().copied()).collect()
    }

    pub fn names(&self, n: &Netlist) -> Vec<String> {
        self.nodes().into_iter().map(|i| n.node(i).name.clone()).collect()
    }

    pub fn endpoint(&self) -> usize {
        *self.gates.last().unwrap_or(&self.source)
    }
}

/// Every node value for every input vector, 64 vectors per word.
struct Oracle {
    n_vectors: u64,
    values: Vec<Vec<u64>>,
}

impl Oracle {
    fn new(n: &Netlist) -> Self {
        let k = n.inputs().len();
        let n_vectors = 1u64 << k;
        let words = n_vectors.div_ceil(64) as usize;
        let mut values = vec![vec![0u64; words]; n.nodes().len()];
        for w in 0..words {
            let base = w as u64 * 64;
            let inputs: Vec<u64> = (0..k)
                .map(|bit| {
                    (0..64u64)
                        .filter(|l| base + l < n_vectors)
                        .fold(0u64, |acc, l| acc | (((base + l) >> bit) & 1) << l)
                })
                .collect();
            for (node, v) in n.eval_words(&inputs).into_iter().enumerate() {
                values[node][w] = v;
            }
        }
        Self { n_vectors, values }
    }

    fn bit(&self, node: usize, v: u64) -> u64 {
        (self.values[node][(v / 64) as usize] >> (v % 64)) & 1
    }

    /// First pair `(v1, v2)` in enumeration order under which every node toggles.
    fn toggle_pair(&self, nodes: &[usize]) -> Option<(u64, u64)> {
        assert!(nodes.len() <= 64, "path longer than 64 nodes");
        let mask = if nodes.len() == 64 {
            u64::MAX
        } else {
            (1u64 << nodes.len()) - 1
        };
        let mut seen: HashMap<u64, u64> = HashMap::new();
        for v in 0..self.n_vectors {
            let p = nodes
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &node)| acc | self.bit(node, v) << i);
            if let Some(&u) = seen.get(&(!p & mask)) {
                return Some((u, v));
            }
            seen.entry(p).or_insert(v);
        }
        None
    }
}

struct Search<'a> {
    n: &'a Netlist,
    scores: Scoap,
    oracle: Oracle,
}

impl Search<'_> {
    fn backward(&self, path: Vec<usize>) -> Option<SensitizedPath> {
        let head = path[0];
        if matches!(self.n.node(head).kind, NodeKind::Input) {
            return self.forward(path);
        }
        let mut cands: Vec<usize> = self.n.node(head).fanin().to_vec();
        cands.dedup();
        cands.sort_by_key(|&c| (std::cmp::Reverse(self.scores.justification(c)), c));
        for c in cands {
            let mut next = vec![c];
            next.extend(&path);
            if self.oracle.toggle_pair(&next).is_some() {
                if let Some(p) = self.backward(next) {
                    return Some(p);
                }
            }
        }
        None
    }

    fn forward(&self, path: Vec<usize>) -> Option<SensitizedPath> {
        let tail = *path.last().unwrap();
        if self.n.is_endpoint(tail) && path.len() > 1 {
            let witness = self.oracle.toggle_pair(&path)?;
            return Some(SensitizedPath {
                source: path[0],
                gates: path[1..].to_vec(),
                witness,
            });
        }
        let mut cands: Vec<usize> = self.n.fanout(tail).to_vec();
        cands.dedup();
        cands.sort_by_key(|&c| (std::cmp::Reverse(self.scores.co[c]), c));
        for c in cands {
            let mut next = path.clone();
            next.push(c);
            if self.oracle.toggle_pair(&next).is_some() {
                if let Some(p) = self.forward(next) {
                    return Some(p);
                }
            }
        }
        None
    }
}

/// Hard-to-trigger sensitizable path through `target`, from a primary input to an endpoint.
pub fn select_path(n: &Netlist, target: &str) -> Result<SensitizedPath> {
    let t = n.node_id(target)?;
    if !n.node(t).is_gate() {
        return Err(Error::InvalidParameter(format!("`{target}` is not a gate")));
    }
    if n.inputs().len() > MAX_ORACLE_INPUTS {
        return Err(Error::TooManyInputs(n.inputs().len()));
    }
    let search = Search {
        n,
        scores: scoap(n),
        oracle: Oracle::new(n),
    };
    if search.oracle.toggle_pair(&[t]).is_none() {
        return Err(Error::NoSensitizablePath(target.to_string()));
    }
    search
        .backward(vec![t])
        .ok_or_else(|| Error::NoSensitizablePath(target.to_string()))
}

/// True when the witness makes every path node switch under timing simulation.
pub fn verify_witness(n: &Netlist, path: &SensitizedPath) -> bool {
    let (before, after) = path.witness;
    let waves = simulate_waveforms(n, &n.nominal_delays(), before, after, &[]);
    path.nodes()
        .into_iter()
        .all(|i| waves[i].final_value() != waves[i].initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, synthesize_shared_g};

    #[test]
    fn single_xor() {
        let n = parse_netlist("input a\ninput b\ngate x XOR a b delay=1\noutput x\n").unwrap();
        let p = select_path(&n, "x").unwrap();
        assert_eq!(p.gates.len(), 1);
        assert!(verify_witness(&n, &p));
    }

    #[test]
    fn constant_blocks() {
        let n = parse_netlist("input a\ngate x AND a const0 delay=1\noutput x\n").unwrap();
        assert_eq!(select_path(&n, "x"), Err(Error::NoSensitizablePath("x".into())));
    }

    #[test]
    fn too_many_inputs() {
        let mut text = String::new();
        for i in 0..21 {
            text += &format!("input i{i}\n");
        }
        text += "gate x XOR i0 i1 delay=1\noutput x\n";
        let n = parse_netlist(&text).unwrap();
        assert_eq!(select_path(&n, "x"), Err(Error::TooManyInputs(21)));
    }

    #[test]
    fn blocked_downstream_is_skipped() {
        // y is masked by const0, z propagates
        let n = parse_netlist(
            "input a\ninput b\ngate t AND a b delay=1\ngate y AND t const0 delay=1\ngate z BUF t delay=1\nreg qy y\nreg qz z\n",
        )
        .unwrap();
        let p = select_path(&n, "t").unwrap();
        assert_eq!(p.endpoint(), n.node_id("z").unwrap());
    }

    #[test]
    fn scoap_basics() {
        let n = parse_netlist("input a\ninput b\ngate x AND a b delay=1\ngate y NOT x delay=1\noutput y\n").unwrap();
        let s = scoap(&n);
        let x = n.node_id("x").unwrap();
        let y = n.node_id("y").unwrap();
        assert_eq!((s.cc0[x], s.cc1[x]), (2, 3));
        assert_eq!((s.cc0[y], s.cc1[y]), (4, 3));
        assert_eq!(s.co[y], 0);
        assert_eq!(s.co[x], 1);
        assert_eq!(s.co[n.node_id("a").unwrap()], 1 + 1 + 1);
    }

    #[test]
    fn shared_g_correction_instance() {
        let n = synthesize_shared_g();
        let p = select_path(&n, "cb2_g1").unwrap();
        let names = p.names(&n);
        assert!(names[0] == "c2" || names[0] == "b2", "{names:?}");
        assert_eq!(names[1..], ["cb2_g1", "corr1", "y1_1"]);
        assert!(verify_witness(&n, &p));
        let (v1, v2) = p.witness;
        let cb = |v: u64| ((v >> 6) & 1) & ((v >> 5) & 1);
        assert_ne!(cb(v1), cb(v2));
    }
}
