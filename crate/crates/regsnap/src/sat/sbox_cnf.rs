//! A fixed combinational circuit for the AES Sbox and its Tseitin CNF.
//!
//! The circuit is a reduced ordered decision diagram built once from the
//! Sbox table, splitting on input bit 7 first. Each internal node becomes
//! one fresh variable with the usual if-then-else clauses, so instantiating
//! the circuit costs a few hundred variables and clauses. Shared subtrees
//! are shared across all eight output bits.
//!
//! Inputs are passed as literals, which lets callers fold a known XOR
//! constant into the Sbox input for free (flip the literal where the
//! constant bit is set).

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::cipher::SBOX;
use crate::sat::problem::{CnfProblem, Lit, VarId};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Const(bool),
    Node(usize),
}

#[derive(Copy, Clone, Debug)]
pub struct Node {
    /// Input level: the node tests input bit `7 - level`.
    pub level: usize,
    pub lo: Edge,
    pub hi: Edge,
}

pub struct SboxCircuit {
    pub nodes: Vec<Node>,
    pub roots: [Edge; 8],
}

impl SboxCircuit {
    /// The shared forward-Sbox circuit.
    pub fn forward() -> &'static SboxCircuit {
        static CIRCUIT: OnceLock<SboxCircuit> = OnceLock::new();
        CIRCUIT.get_or_init(|| SboxCircuit::build(&SBOX))
    }

    /// Builds the decision diagram for each output bit of an 8-to-8 table.
    pub fn build(table: &[u8; 256]) -> SboxCircuit {
        let mut nodes = Vec::new();
        let mut memo: HashMap<(usize, Vec<bool>), Edge> = HashMap::new();
        let mut roots = [Edge::Const(false); 8];
        for (bit, root) in roots.iter_mut().enumerate() {
            let f: Vec<bool> = (0..256).map(|x| (table[x] >> bit) & 1 == 1).collect();
            *root = build_edge(0, f, &mut nodes, &mut memo);
        }
        SboxCircuit { nodes, roots }
    }

    /// Emits the circuit into `p` over the given input literals; returns the
    /// output literals (bit 0 first) and the per-instance node variables,
    /// which the ground-truth assignment builder needs.
    pub fn instantiate(&self, p: &mut CnfProblem, inputs: [Lit; 8]) -> ([Lit; 8], Vec<VarId>) {
        let node_vars: Vec<VarId> = self.nodes.iter().map(|_| p.new_var()).collect();
        let edge_lit = |e: Edge, p: &mut CnfProblem| -> Lit {
            match e {
                Edge::Node(i) => Lit::pos(node_vars[i]),
                Edge::Const(b) => {
                    // Constants only appear as outputs of degenerate tables;
                    // pin a fresh variable with a unit clause.
                    let v = p.new_var();
                    p.add_or(&[Lit::with_sign(v, !b)]);
                    Lit::pos(v)
                }
            }
        };
        for (i, node) in self.nodes.iter().enumerate() {
            let out = Lit::pos(node_vars[i]);
            let sel = inputs[7 - node.level];
            // out <-> (sel ? hi : lo), constants folded.
            match node.hi {
                Edge::Const(true) => p.add_or(&[!sel, out]),
                Edge::Const(false) => p.add_or(&[!sel, !out]),
                Edge::Node(h) => {
                    let hl = Lit::pos(node_vars[h]);
                    p.add_or(&[!sel, !hl, out]);
                    p.add_or(&[!sel, hl, !out]);
                }
            }
            match node.lo {
                Edge::Const(true) => p.add_or(&[sel, out]),
                Edge::Const(false) => p.add_or(&[sel, !out]),
                Edge::Node(l) => {
                    let ll = Lit::pos(node_vars[l]);
                    p.add_or(&[sel, !ll, out]);
                    p.add_or(&[sel, ll, !out]);
                }
            }
        }
        let mut outs = [inputs[0]; 8];
        for (bit, root) in self.roots.iter().enumerate() {
            outs[bit] = edge_lit(*root, p);
        }
        (outs, node_vars)
    }

    /// Concrete node values for given input-literal values, in node order.
    /// Used to complete ground-truth assignments over Tseitin variables.
    pub fn eval_nodes(&self, input_values: [bool; 8]) -> Vec<bool> {
        let mut vals = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let sel = input_values[7 - node.level];
            let pick = if sel { node.hi } else { node.lo };
            let v = match pick {
                Edge::Const(b) => b,
                Edge::Node(i) => vals[i],
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval_output(&self, input_values: [bool; 8]) -> u8 {
        let vals = self.eval_nodes(input_values);
        let mut out = 0u8;
        for (bit, root) in self.roots.iter().enumerate() {
            let b = match *root {
                Edge::Const(c) => c,
                Edge::Node(i) => vals[i],
            };
            out |= u8::from(b) << bit;
        }
        out
    }
}

fn build_edge(
    level: usize,
    f: Vec<bool>,
    nodes: &mut Vec<Node>,
    memo: &mut HashMap<(usize, Vec<bool>), Edge>,
) -> Edge {
    if f.iter().all(|&b| b) {
        return Edge::Const(true);
    }
    if f.iter().all(|&b| !b) {
        return Edge::Const(false);
    }
    if let Some(&e) = memo.get(&(level, f.clone())) {
        return e;
    }
    // Split on input bit 7-level: the function chunk is indexed by the low
    // 8-level bits, so the tested bit is the chunk's top half.
    let half = f.len() / 2;
    let lo = build_edge(level + 1, f[..half].to_vec(), nodes, memo);
    let hi = build_edge(level + 1, f[half..].to_vec(), nodes, memo);
    let edge = if lo == hi {
        lo
    } else {
        nodes.push(Node { level, lo, hi });
        Edge::Node(nodes.len() - 1)
    };
    memo.insert((level, f), edge);
    edge
}

pub fn byte_bits_lsb(x: u8) -> [bool; 8] {
    let mut out = [false; 8];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (x >> i) & 1 == 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circuit_evaluates_to_the_table() {
        let c = SboxCircuit::forward();
        for x in 0..=255u8 {
            assert_eq!(c.eval_output(byte_bits_lsb(x)), SBOX[x as usize]);
        }
    }

    #[test]
    fn circuit_is_compact() {
        let c = SboxCircuit::forward();
        assert!(
            c.nodes.len() < 600,
            "unexpected blowup: {} nodes",
            c.nodes.len()
        );
    }

    #[test]
    fn tseitin_instance_consistent_with_eval() {
        // Unit-assert the inputs and check that the ground-truth node values
        // plus table outputs satisfy every emitted clause.
        use crate::sat::problem::Assignment;
        let c = SboxCircuit::forward();
        for &x in &[0u8, 1, 0x53, 0x80, 0xff] {
            let mut p = CnfProblem::new();
            let in_vars = p.new_vars(8);
            let inputs: [Lit; 8] = std::array::from_fn(|i| Lit::pos(in_vars[i]));
            let (outs, node_vars) = c.instantiate(&mut p, inputs);
            let bits = byte_bits_lsb(x);
            let mut a = Assignment::new(p.var_count());
            for (i, &v) in in_vars.iter().enumerate() {
                a.set(v, bits[i]);
            }
            for (v, val) in node_vars.iter().zip(c.eval_nodes(bits)) {
                a.set(*v, val);
            }
            assert!(p.is_model(&a), "clauses violated for input {x:#04x}");
            let y = SBOX[x as usize];
            for (bit, out) in outs.iter().enumerate() {
                assert_eq!(out.eval(&a), (y >> bit) & 1 == 1);
            }
        }
    }

    #[test]
    fn folded_input_literals_shift_the_table() {
        // Feeding literals for x ^ 0x37 computes sbox(x ^ 0x37).
        let c = SboxCircuit::forward();
        let k = 0x37u8;
        for x in [0u8, 9, 200] {
            let folded = byte_bits_lsb(x ^ k);
            assert_eq!(c.eval_output(folded), SBOX[(x ^ k) as usize]);
        }
    }
}
