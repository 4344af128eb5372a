//! Structural netlist of the shared `G` stage with its correction stage.

use std::collections::HashMap;

use super::{GateKind, Netlist, NetlistBuilder};
use crate::present_ti::shared_g_uncorrected;

/// The two `c²b²` instances the Trojan elongates, in `G¹` and `G³`.
pub const SHARED_G_TARGETS: [&str; 2] = ["cb2_g1", "cb2_g3"];

const VARS: [char; 4] = ['a', 'b', 'c', 'd'];

fn var_name(v: usize) -> String {
    format!("{}{}", VARS[v % 4], v / 4 + 1)
}

/// Primary-input vector for one nibble sharing: bit `4(i-1)+j` is bit `j` of `x^i`.
pub fn encode_shared_input(x1: u8, x2: u8, x3: u8) -> u64 {
    (x1 & 0xF) as u64 | ((x2 & 0xF) as u64) << 4 | ((x3 & 0xF) as u64) << 8
}

/// Balanced XOR tree over `terms`; the root becomes XNOR (or NOT) when `constant` is set.
fn xor_tree(b: &mut NetlistBuilder, prefix: &str, root: &str, terms: Vec<String>, constant: bool) {
    assert!(!terms.is_empty());
    if terms.len() == 1 {
        let kind = if constant { GateKind::Not } else { GateKind::Buf };
        b.gate_nominal(root, kind, &[&terms[0]]);
        return;
    }
    let mut level = terms;
    let mut n = 0;
    while level.len() > 1 {
        let last_level = level.len() == 2;
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if pair.len() == 1 {
                next.push(pair[0].clone());
                continue;
            }
            let (name, kind) = if last_level {
                (root.to_string(), if constant { GateKind::Xnor } else { GateKind::Xor })
            } else {
                n += 1;
                (format!("{prefix}_{n}"), GateKind::Xor)
            };
            b.gate_nominal(&name, kind, &[&pair[0], &pair[1]]);
            next.push(name);
        }
        level = next;
    }
}

/// Two-input-gate netlist of the corrected shared `G` with output registers `q<k>_<j>`.
pub fn synthesize_shared_g() -> Netlist {
    let g = shared_g_uncorrected();
    let mut b = NetlistBuilder::new();
    for v in 0..12 {
        b.input(&var_name(v));
    }
    for k in 0..3 {
        let comp = g.component(k);
        let mut ands: HashMap<u32, String> = HashMap::new();
        for j in 0..4 {
            let mut constant = false;
            let mut linear = Vec::new();
            let mut quad = Vec::new();
            for &m in comp.terms(j) {
                match m.count_ones() {
                    0 => constant = !constant,
                    1 => linear.push(var_name(m.trailing_zeros() as usize)),
                    _ => {
                        let name = ands.entry(m).or_insert_with(|| {
                            let hi = 31 - m.leading_zeros() as usize;
                            let lo = m.trailing_zeros() as usize;
                            let name = format!("m{}_{}{}", k + 1, var_name(hi), var_name(lo));
                            b.gate_nominal(&name, GateKind::And, &[&var_name(hi), &var_name(lo)]);
                            name
                        });
                        quad.push(name.clone());
                    }
                }
            }
            linear.extend(quad);
            let out = format!("y{}_{}", k + 1, j);
            if j == 1 {
                let root = format!("u{}_1", k + 1);
                xor_tree(&mut b, &format!("t{}_{}", k + 1, j), &root, linear, constant);
                // the two correction shares are the ones this component reads
                let shares: Vec<usize> = (0..3).filter(|&s| s != k).collect();
                let inst: Vec<String> = shares
                    .iter()
                    .map(|&s| {
                        let name = format!("cb{}_g{}", s + 1, k + 1);
                        b.gate_nominal(&name, GateKind::And, &[&format!("c{}", s + 1), &format!("b{}", s + 1)]);
                        name
                    })
                    .collect();
                let corr = format!("corr{}", k + 1);
                b.gate_nominal(&corr, GateKind::Xor, &[&inst[0], &inst[1]]);
                b.gate_nominal(&out, GateKind::Xor, &[&root, &corr]);
            } else {
                xor_tree(&mut b, &format!("t{}_{}", k + 1, j), &out, linear, constant);
            }
            let q = format!("q{}_{}", k + 1, j);
            b.register(&q, &out);
            b.output(&q);
        }
    }
    b.build().expect("shared G netlist is well formed")
}

/// Register indices `[q1_j, q2_j, q3_j]` for each output bit `j`.
pub fn shared_g_output_groups(n: &Netlist) -> Vec<Vec<usize>> {
    (0..4)
        .map(|j| {
            (1..=3)
                .filter_map(|k| n.register_id(&format!("q{k}_{j}")).ok())
                .collect()
        })
        .collect()
}
