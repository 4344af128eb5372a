//! Gate-level netlists: IR, text format, functional and timing simulation,
//! sensitizable-path selection, delay distribution and clock sweeps.

mod ga;
mod path;
mod sharedg;
mod sim;
mod sweep;

pub use ga::{
    distribute_delays, evaluate_fitness, path_windows, repair, DelayAssignment, FitnessReport,
    GaConfig, GaOutcome,
};
pub use path::{scoap, select_path, verify_witness, Scoap, SensitizedPath, MAX_ORACLE_INPUTS};
pub use sharedg::{
    encode_shared_input, shared_g_output_groups, synthesize_shared_g, SHARED_G_TARGETS,
};
pub use sim::{
    random_vector_pairs, timing_simulate, simulate_waveforms, VectorResult, Violation,
    ViolationKind, Waveform,
};
pub use sweep::{
    classify_period, period_grid, prepare_sweep, sweep_clock, Band, DesignState, StateClassification,
    SweepPoint, SweepPrep, TrojanSpec,
};

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Xor,
    Xnor,
    Nand,
    Nor,
    Not,
    Buf,
    Delay,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
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

    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buf | GateKind::Delay => 1,
            _ => 2,
        }
    }

    /// Default delay in abstract delay units.
    pub fn nominal_delay(self) -> f64 {
        match self {
            GateKind::And | GateKind::Or => 1.0,
            GateKind::Nand | GateKind::Nor => 0.8,
            GateKind::Xor | GateKind::Xnor => 1.5,
            GateKind::Not => 0.5,
            GateKind::Buf => 0.3,
            GateKind::Delay => 1.0,
        }
    }

    /// Bitwise evaluation on 64 vectors at once; `b` is ignored for unary kinds.
    #[inline]
    pub fn eval(self, a: u64, b: u64) -> u64 {
        match self {
            GateKind::And => a & b,
            GateKind::Or => a | b,
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
            GateKind::Nand => !(a & b),
            GateKind::Nor => !(a | b),
            GateKind::Not => !a,
            GateKind::Buf | GateKind::Delay => a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
            GateKind::Delay => "DELAY",
        }
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidNetlist(format!("unknown gate kind `{s}`")))
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Input,
    Const(bool),
    Gate {
        kind: GateKind,
        fanin: Vec<usize>,
        delay: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_gate(&self) -> bool {
        matches!(self.kind, NodeKind::Gate { .. })
    }

    pub fn fanin(&self) -> &[usize] {
        match &self.kind {
            NodeKind::Gate { fanin, .. } => fanin,
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    pub name: String,
    pub d: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    Node(usize),
    Register(usize),
}

/// Default setup window as a fraction of the clock period.
pub const DEFAULT_SETUP_MARGIN: f64 = 0.02;

/// Reserved net names that need no declaration.
pub const CONST0: &str = "const0";
pub const CONST1: &str = "const1";

#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    registers: Vec<Register>,
    outputs: Vec<Output>,
    index: HashMap<String, usize>,
    reg_index: HashMap<String, usize>,
    topo: Vec<usize>,
    fanout: Vec<Vec<usize>>,
}

/// Per-node gate delays, indexed like [`Netlist::nodes`]; zero for non-gates.
#[derive(Clone, Debug, PartialEq)]
pub struct Delays(pub Vec<f64>);

impl Delays {
    pub fn get(&self, node: usize) -> f64 {
        self.0[node]
    }

    pub fn set(&mut self, node: usize, d: f64) {
        self.0[node] = d;
    }

    pub fn validate(&self, n: &Netlist) -> Result<()> {
        if self.0.len() != n.nodes.len() {
            return Err(Error::InvalidParameter("delay map does not match the netlist".into()));
        }
        for (i, node) in n.nodes.iter().enumerate() {
            if node.is_gate() && !(self.0[i] > 0.0 && self.0[i].is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "gate `{}` needs a positive delay, got {}",
                    node.name, self.0[i]
                )));
            }
        }
        Ok(())
    }

    /// `gate_id,delay` rows for every gate.
    pub fn write_csv<W: Write>(&self, n: &Netlist, mut out: W) -> Result<()> {
        writeln!(out, "gate_id,delay")?;
        for (i, node) in n.nodes.iter().enumerate() {
            if node.is_gate() {
                writeln!(out, "{},{}", node.name, self.0[i])?;
            }
        }
        Ok(())
    }

    /// Applies `gate_id,delay` rows on top of the netlist's nominal delays.
    pub fn read_csv(n: &Netlist, text: &str) -> Result<Delays> {
        let mut d = n.nominal_delays();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "gate_id,delay" {
                continue;
            }
            let bad = || Error::Parse {
                line: ln + 1,
                msg: format!("expected `gate_id,delay`, got `{line}`"),
            };
            let (id, v) = line.split_once(',').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            let node = n.node_id(id.trim())?;
            if !n.nodes[node].is_gate() {
                return Err(Error::InvalidNetlist(format!("`{id}` is not a gate")));
            }
            d.set(node, v);
        }
        d.validate(n)?;
        Ok(d)
    }
}

impl Netlist {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn fanout(&self, node: usize) -> &[usize] {
        &self.fanout[node]
    }

    pub fn gate_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_gate()).count()
    }

    pub fn node_id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidNetlist(format!("unknown net `{name}`")))
    }

    pub fn register_id(&self, name: &str) -> Result<usize> {
        self.reg_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidNetlist(format!("unknown register `{name}`")))
    }

    /// Position of a primary input node in the input vector encoding.
    pub fn input_position(&self, node: usize) -> Option<usize> {
        self.inputs.iter().position(|&i| i == node)
    }

    /// Nodes observed at a primary output: register data inputs and output nets.
    pub fn endpoints(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.registers.iter().map(|r| r.d).collect();
        for o in &self.outputs {
            if let Output::Node(n) = o {
                v.push(*n);
            }
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn is_endpoint(&self, node: usize) -> bool {
        self.registers.iter().any(|r| r.d == node)
            || self.outputs.iter().any(|o| *o == Output::Node(node))
    }

    pub fn nominal_delays(&self) -> Delays {
        Delays(
            self.nodes
                .iter()
                .map(|n| match &n.kind {
                    NodeKind::Gate { delay, .. } => *delay,
                    _ => 0.0,
                })
                .collect(),
        )
    }

    /// Zero-delay evaluation of 64 vectors; `inputs[i]` carries input `i`.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        self.eval_words_forced(inputs, &[])
    }

    /// As [`Self::eval_words`], with some nodes held at given words.
    pub fn eval_words_forced(&self, inputs: &[u64], forced: &[(usize, u64)]) -> Vec<u64> {
        let mut v = vec![0u64; self.nodes.len()];
        for (k, &i) in self.inputs.iter().enumerate() {
            v[i] = inputs.get(k).copied().unwrap_or(0);
        }
        for &i in &self.topo {
            v[i] = match &self.nodes[i].kind {
                NodeKind::Input => v[i],
                NodeKind::Const(c) => {
                    if *c {
                        u64::MAX
                    } else {
                        0
                    }
                }
                NodeKind::Gate { kind, fanin, .. } => {
                    let a = v[fanin[0]];
                    let b = fanin.get(1).map_or(0, |&f| v[f]);
                    kind.eval(a, b)
                }
            };
            if let Some(&(_, w)) = forced.iter().find(|(n, _)| *n == i) {
                v[i] = w;
            }
        }
        v
    }

    /// Node values for one input vector (bit `k` = input `k`).
    pub fn eval_vector(&self, vector: u64) -> Vec<bool> {
        let words: Vec<u64> = (0..self.inputs.len())
            .map(|k| if (vector >> k) & 1 == 1 { u64::MAX } else { 0 })
            .collect();
        self.eval_words(&words).into_iter().map(|w| w & 1 == 1).collect()
    }

    /// Register data values for one vector, bit `r` = register `r`.
    pub fn eval_registers(&self, vector: u64) -> u64 {
        let v = self.eval_vector(vector);
        self.registers
            .iter()
            .enumerate()
            .fold(0, |acc, (r, reg)| acc | (v[reg.d] as u64) << r)
    }

    /// Longest-path arrival time at every node.
    pub fn arrival_times(&self, delays: &Delays) -> Vec<f64> {
        let mut at = vec![0.0f64; self.nodes.len()];
        for &i in &self.topo {
            if let NodeKind::Gate { fanin, .. } = &self.nodes[i].kind {
                at[i] = fanin.iter().map(|&f| at[f]).fold(0.0, f64::max) + delays.get(i);
            }
        }
        at
    }

    /// Longest remaining delay from every node to an endpoint, excluding the node itself.
    pub fn required_tails(&self, delays: &Delays) -> Vec<f64> {
        let mut tail = vec![f64::NEG_INFINITY; self.nodes.len()];
        for e in self.endpoints() {
            tail[e] = 0.0;
        }
        for &i in self.topo.iter().rev() {
            for &f in self.nodes[i].fanin() {
                if tail[i] > f64::NEG_INFINITY {
                    tail[f] = tail[f].max(tail[i] + delays.get(i));
                }
            }
        }
        tail
    }

    /// Longest path from any source to any endpoint.
    pub fn critical_path(&self, delays: &Delays) -> f64 {
        let at = self.arrival_times(delays);
        self.endpoints().into_iter().map(|e| at[e]).fold(0.0, f64::max)
    }

    /// Longest path among those avoiding every node in `excluded`.
    pub fn critical_path_excluding(&self, delays: &Delays, excluded: &[usize]) -> f64 {
        let mut at = vec![0.0f64; self.nodes.len()];
        let mut alive = vec![true; self.nodes.len()];
        for &x in excluded {
            alive[x] = false;
        }
        for &i in &self.topo {
            if !alive[i] {
                continue;
            }
            if let NodeKind::Gate { fanin, .. } = &self.nodes[i].kind {
                let live: Vec<f64> = fanin.iter().filter(|&&f| alive[f]).map(|&f| at[f]).collect();
                if live.is_empty() && fanin.iter().any(|&f| !alive[f]) {
                    alive[i] = false;
                    continue;
                }
                at[i] = live.into_iter().fold(0.0, f64::max) + delays.get(i);
            }
        }
        self.endpoints()
            .into_iter()
            .filter(|&e| alive[e])
            .map(|e| at[e])
            .fold(0.0, f64::max)
    }

    /// Static slack of every gate: `t_ref` minus the longest path through it.
    pub fn slacks(&self, delays: &Delays, t_ref: f64) -> Vec<f64> {
        let at = self.arrival_times(delays);
        let tail = self.required_tails(delays);
        (0..self.nodes.len())
            .map(|i| {
                if tail[i] == f64::NEG_INFINITY {
                    f64::INFINITY
                } else {
                    t_ref - (at[i] + tail[i])
                }
            })
            .collect()
    }

    /// Nodes in the transitive fanout of `node`, including it.
    pub fn fanout_cone(&self, node: usize) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if !mark[n] {
                mark[n] = true;
                stack.extend(self.fanout[n].iter().copied());
            }
        }
        mark
    }

    /// Registers whose data input depends on `node`.
    pub fn registers_driven_by(&self, node: usize) -> Vec<usize> {
        let cone = self.fanout_cone(node);
        (0..self.registers.len())
            .filter(|&r| cone[self.registers[r].d])
            .collect()
    }

    /// Primary inputs in the transitive fanin of `node`.
    pub fn input_support(&self, node: usize) -> Vec<usize> {
        let mut mark = vec![false; self.nodes.len()];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if !mark[n] {
                mark[n] = true;
                stack.extend(self.nodes[n].fanin().iter().copied());
            }
        }
        self.inputs.iter().copied().filter(|&i| mark[i]).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for &i in &self.inputs {
            s += &format!("input {}\n", self.nodes[i].name);
        }
        for &i in &self.topo {
            if let NodeKind::Gate { kind, fanin, delay } = &self.nodes[i].kind {
                let ins: Vec<&str> = fanin.iter().map(|&f| self.nodes[f].name.as_str()).collect();
                s += &format!("gate {} {} {} delay={}\n", self.nodes[i].name, kind, ins.join(" "), delay);
            }
        }
        for r in &self.registers {
            s += &format!("reg {} {}\n", r.name, self.nodes[r.d].name);
        }
        for o in &self.outputs {
            let name = match o {
                Output::Node(n) => &self.nodes[*n].name,
                Output::Register(r) => &self.registers[*r].name,
            };
            s += &format!("output {name}\n");
        }
        s
    }

    /// Copy with gate delays replaced.
    pub fn with_delays(&self, delays: &Delays) -> Netlist {
        let mut n = self.clone();
        for (i, node) in n.nodes.iter_mut().enumerate() {
            if let NodeKind::Gate { delay, .. } = &mut node.kind {
                *delay = delays.get(i);
            }
        }
        n
    }
}

impl FromStr for Netlist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_netlist(s)
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Declarative netlist construction with forward references.
#[derive(Default)]
pub struct NetlistBuilder {
    inputs: Vec<String>,
    gates: Vec<(String, GateKind, Vec<String>, f64)>,
    registers: Vec<(String, String)>,
    outputs: Vec<String>,
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, name: &str) -> &mut Self {
        self.inputs.push(name.to_string());
        self
    }

    pub fn gate(&mut self, name: &str, kind: GateKind, fanin: &[&str], delay: f64) -> &mut Self {
        self.gates.push((
            name.to_string(),
            kind,
            fanin.iter().map(|s| s.to_string()).collect(),
            delay,
        ));
        self
    }

    /// Gate with its kind's nominal delay.
    pub fn gate_nominal(&mut self, name: &str, kind: GateKind, fanin: &[&str]) -> &mut Self {
        self.gate(name, kind, fanin, kind.nominal_delay())
    }

    pub fn register(&mut self, name: &str, d: &str) -> &mut Self {
        self.registers.push((name.to_string(), d.to_string()));
        self
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn build(&self) -> Result<Netlist> {
        let mut nodes: Vec<Node> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut declare = |name: &str, kind: NodeKind, nodes: &mut Vec<Node>| -> Result<usize> {
            if !valid_id(name) {
                return Err(Error::InvalidNetlist(format!("invalid identifier `{name}`")));
            }
            if index.contains_key(name) {
                return Err(Error::InvalidNetlist(format!("`{name}` declared twice")));
            }
            nodes.push(Node {
                name: name.to_string(),
                kind,
            });
            index.insert(name.to_string(), nodes.len() - 1);
            Ok(nodes.len() - 1)
        };
        let mut inputs = Vec::new();
        for name in &self.inputs {
            if name == CONST0 || name == CONST1 {
                return Err(Error::InvalidNetlist(format!("`{name}` is reserved")));
            }
            inputs.push(declare(name, NodeKind::Input, &mut nodes)?);
        }
        let uses_const = |c: &str| self.gates.iter().any(|g| g.2.iter().any(|f| f == c));
        for (c, v) in [(CONST0, false), (CONST1, true)] {
            if uses_const(c) {
                declare(c, NodeKind::Const(v), &mut nodes)?;
            }
        }
        let first_gate = nodes.len();
        for (name, kind, fanin, delay) in &self.gates {
            if fanin.len() != kind.arity() {
                return Err(Error::InvalidNetlist(format!(
                    "gate `{name}`: {kind} takes {} input(s), got {}",
                    kind.arity(),
                    fanin.len()
                )));
            }
            if !(*delay > 0.0 && delay.is_finite()) {
                return Err(Error::InvalidNetlist(format!(
                    "gate `{name}`: delay must be positive, got {delay}"
                )));
            }
            declare(
                name,
                NodeKind::Gate {
                    kind: *kind,
                    fanin: Vec::new(),
                    delay: *delay,
                },
                &mut nodes,
            )?;
        }
        for (k, (name, _, fanin, _)) in self.gates.iter().enumerate() {
            let ids = fanin
                .iter()
                .map(|f| {
                    index
                        .get(f)
                        .copied()
                        .ok_or_else(|| Error::InvalidNetlist(format!("gate `{name}` reads undefined net `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if let NodeKind::Gate { fanin, .. } = &mut nodes[first_gate + k].kind {
                *fanin = ids;
            }
        }
        let mut registers = Vec::new();
        let mut reg_index = HashMap::new();
        for (name, d) in &self.registers {
            if !valid_id(name) || index.contains_key(name) || reg_index.contains_key(name) {
                return Err(Error::InvalidNetlist(format!("register `{name}` clashes or is invalid")));
            }
            let d = *index
                .get(d)
                .ok_or_else(|| Error::InvalidNetlist(format!("register `{name}` reads undefined net `{d}`")))?;
            reg_index.insert(name.clone(), registers.len());
            registers.push(Register {
                name: name.clone(),
                d,
            });
        }
        let mut outputs = Vec::new();
        for name in &self.outputs {
            if let Some(&r) = reg_index.get(name) {
                outputs.push(Output::Register(r));
            } else if let Some(&n) = index.get(name) {
                outputs.push(Output::Node(n));
            } else {
                return Err(Error::InvalidNetlist(format!("output `{name}` is undefined")));
            }
        }
        let mut fanout = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for &f in n.fanin() {
                fanout[f].push(i);
            }
        }
        let topo = topological_order(&nodes)?;
        Ok(Netlist {
            nodes,
            inputs,
            registers,
            outputs,
            index,
            reg_index,
            topo,
            fanout,
        })
    }
}

fn topological_order(nodes: &[Node]) -> Result<Vec<usize>> {
    // iterative DFS with colors to name a node on any cycle
    let mut state = vec![0u8; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    for root in 0..nodes.len() {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (n, ref mut k)) = stack.last_mut() {
            let fanin = nodes[n].fanin();
            if *k < fanin.len() {
                let f = fanin[*k];
                *k += 1;
                match state[f] {
                    0 => {
                        state[f] = 1;
                        stack.push((f, 0));
                    }
                    1 => return Err(Error::CombinationalLoop(nodes[f].name.clone())),
                    _ => {}
                }
            } else {
                state[n] = 2;
                order.push(n);
                stack.pop();
            }
        }
    }
    Ok(order)
}

/// Parses the line-oriented netlist format.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut b = NetlistBuilder::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: ln + 1, msg };
        let f: Vec<&str> = line.split_whitespace().collect();
        match f[0] {
            "input" if f.len() == 2 => {
                b.input(f[1]);
            }
            "output" if f.len() == 2 => {
                b.output(f[1]);
            }
            "reg" if f.len() == 3 => {
                b.register(f[1], f[2]);
            }
            "gate" if f.len() >= 5 => {
                let kind: GateKind = f[2].parse().map_err(|e: Error| err(e.to_string()))?;
                let last = f[f.len() - 1];
                let delay = last
                    .strip_prefix("delay=")
                    .ok_or_else(|| err(format!("missing `delay=` in `{line}`")))?;
                let delay: f64 = delay
                    .parse()
                    .map_err(|_| err(format!("bad delay `{delay}`")))?;
                b.gate(f[1], kind, &f[3..f.len() - 1], delay);
            }
            _ => return Err(err(format!("unrecognized statement `{line}`"))),
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = "\
# three buffers
input a
gate b1 BUF a delay=1
gate b2 BUF b1 delay=1
gate b3 BUF b2 delay=1
reg q b3
output q
";

    #[test]
    fn parse_and_round_trip() {
        let n: Netlist = CHAIN.parse().unwrap();
        assert_eq!(n.gate_count(), 3);
        assert_eq!(n.critical_path(&n.nominal_delays()), 3.0);
        let again: Netlist = n.to_text().parse().unwrap();
        assert_eq!(again.to_text(), n.to_text());
    }

    #[test]
    fn forward_references_and_constants() {
        let n = parse_netlist(
            "input a\ngate y AND x const1 delay=1\ngate x NOT a delay=0.5\noutput y\n",
        )
        .unwrap();
        assert_eq!(n.eval_vector(0)[n.node_id("y").unwrap()], true);
        assert_eq!(n.eval_vector(1)[n.node_id("y").unwrap()], false);
    }

    #[test]
    fn rejects_bad_netlists() {
        let cases = [
            "input a\ngate y AND a delay=1\n",
            "input a\ngate y NOT a a delay=1\n",
            "input a\ngate y BUF z delay=1\n",
            "input a\ninput a\n",
            "input a\ngate y BUF a delay=0\n",
            "input a\ngate y BUF a\n",
            "input a\ngate y FOO a delay=1\n",
            "input a-b\n",
            "wire a\n",
            "input const0\n",
        ];
        for c in cases {
            assert!(parse_netlist(c).is_err(), "{c}");
        }
        assert!(matches!(
            parse_netlist("input a\ngate x XOR a y delay=1\ngate y BUF x delay=1\n"),
            Err(Error::CombinationalLoop(_))
        ));
    }

    #[test]
    fn slack_and_tails() {
        let n = parse_netlist(
            "input a\ninput b\ngate s AND a b delay=1\ngate l1 BUF a delay=2\ngate l2 BUF l1 delay=2\ngate y XOR s l2 delay=1\nreg q y\n",
        )
        .unwrap();
        let d = n.nominal_delays();
        assert_eq!(n.critical_path(&d), 5.0);
        let s = n.slacks(&d, 5.0);
        assert_eq!(s[n.node_id("s").unwrap()], 3.0);
        assert_eq!(s[n.node_id("l1").unwrap()], 0.0);
        assert_eq!(s[n.node_id("y").unwrap()], 0.0);
        assert_eq!(n.critical_path_excluding(&d, &[n.node_id("l1").unwrap()]), 2.0);
    }

    #[test]
    fn delay_csv_round_trip() {
        let n: Netlist = CHAIN.parse().unwrap();
        let mut d = n.nominal_delays();
        d.set(n.node_id("b2").unwrap(), 2.5);
        let mut out = Vec::new();
        d.write_csv(&n, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("gate_id,delay\nb1,1\nb2,2.5\n"));
        assert_eq!(Delays::read_csv(&n, &text).unwrap(), d);
        assert!(Delays::read_csv(&n, "a,1\n").is_err());
        assert!(Delays::read_csv(&n, "b1,-1\n").is_err());
    }
}
