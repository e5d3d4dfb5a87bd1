//! CNF+XOR problem container with DIMACS-compatible literals.

use serde::{Deserialize, Serialize};

/// 1-based variable identifier, densely allocated.
pub type VarId = u32;

/// A signed literal, DIMACS style: `+v` or `-v`, never 0.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn pos(v: VarId) -> Lit {
        debug_assert!(v > 0);
        Lit(v as i32)
    }

    pub fn neg(v: VarId) -> Lit {
        debug_assert!(v > 0);
        Lit(-(v as i32))
    }

    pub fn with_sign(v: VarId, negated: bool) -> Lit {
        if negated {
            Lit::neg(v)
        } else {
            Lit::pos(v)
        }
    }

    pub fn var(self) -> VarId {
        self.0.unsigned_abs()
    }

    pub fn is_neg(self) -> bool {
        self.0 < 0
    }

    pub fn dimacs(self) -> i32 {
        self.0
    }

    /// Truth value under an assignment.
    pub fn eval(self, a: &Assignment) -> bool {
        a.value(self.var()) ^ self.is_neg()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl std::fmt::Debug for Lit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A parity constraint: the XOR of the stored literals must be true.
/// Canonical form keeps variables positive except possibly the first, whose
/// negation flips the parity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XorClause {
    pub lits: Vec<Lit>,
}

impl XorClause {
    pub fn eval(&self, a: &Assignment) -> bool {
        self.lits.iter().fold(false, |acc, l| acc ^ l.eval(a))
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub n_vars: usize,
    pub n_or: usize,
    pub n_xor: usize,
}

/// The satisfiability problem under construction: plain OR clauses plus
/// native XOR clauses. Backends without parity support get a pure-CNF
/// translation via [`CnfProblem::to_pure_cnf`].
#[derive(Clone, Debug, Default)]
pub struct CnfProblem {
    var_count: u32,
    pub or_clauses: Vec<Vec<Lit>>,
    pub xor_clauses: Vec<XorClause>,
}

impl CnfProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_var(&mut self) -> VarId {
        self.var_count += 1;
        self.var_count
    }

    pub fn new_vars(&mut self, count: usize) -> Vec<VarId> {
        (0..count).map(|_| self.new_var()).collect()
    }

    pub fn var_count(&self) -> u32 {
        self.var_count
    }

    pub fn add_or(&mut self, lits: &[Lit]) {
        assert!(!lits.is_empty(), "refusing to add an empty clause");
        debug_assert!(lits.iter().all(|l| l.var() <= self.var_count));
        self.or_clauses.push(lits.to_vec());
    }

    /// Adds `XOR(vars) = parity`. Stored canonically with the first literal
    /// negated iff `parity` is false.
    pub fn add_xor_vars(&mut self, vars: &[VarId], parity: bool) {
        assert!(!vars.is_empty(), "refusing to add an empty xor clause");
        debug_assert!(vars.iter().all(|&v| v <= self.var_count));
        let mut lits: Vec<Lit> = vars.iter().map(|&v| Lit::pos(v)).collect();
        if !parity {
            lits[0] = !lits[0];
        }
        self.xor_clauses.push(XorClause { lits });
    }

    /// Adds `XOR(lits) = parity`, folding literal signs into the parity.
    pub fn add_xor_lits(&mut self, lits: &[Lit], parity: bool) {
        let neg = lits.iter().filter(|l| l.is_neg()).count() % 2 == 1;
        let vars: Vec<VarId> = lits.iter().map(|l| l.var()).collect();
        self.add_xor_vars(&vars, parity ^ neg);
    }

    pub fn stats(&self) -> ProblemStats {
        ProblemStats {
            n_vars: self.var_count as usize,
            n_or: self.or_clauses.len(),
            n_xor: self.xor_clauses.len(),
        }
    }

    /// Indices of violated clauses under a total assignment: OR clauses
    /// first, then XOR clauses offset by the OR count. Empty means the
    /// assignment is a model.
    pub fn violated_clauses(&self, a: &Assignment) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, c) in self.or_clauses.iter().enumerate() {
            if !c.iter().any(|l| l.eval(a)) {
                out.push(i);
            }
        }
        for (i, x) in self.xor_clauses.iter().enumerate() {
            if !x.eval(a) {
                out.push(self.or_clauses.len() + i);
            }
        }
        out
    }

    pub fn is_model(&self, a: &Assignment) -> bool {
        self.violated_clauses(a).is_empty()
    }

    /// Translates every XOR clause to plain CNF. Parity constraints wider
    /// than three literals are cut into width-3 chunks over fresh variables;
    /// each chunk expands into its four (or fewer) forbidden-combination
    /// clauses.
    pub fn to_pure_cnf(&self) -> CnfProblem {
        let mut out = CnfProblem {
            var_count: self.var_count,
            or_clauses: self.or_clauses.clone(),
            xor_clauses: Vec::new(),
        };
        for x in &self.xor_clauses {
            let mut lits = x.lits.clone();
            // a ^ b = aux, then continue with [aux, rest...].
            while lits.len() > 3 {
                let a = lits[0];
                let b = lits[1];
                let aux = Lit::pos(out.new_var());
                emit_xor_cnf(&mut out, &[a, b, aux], false);
                lits.splice(0..2, [aux]);
            }
            emit_xor_cnf(&mut out, &lits, true);
        }
        out
    }
}

/// Expands `XOR(lits) = parity` (width <= 3) into CNF clauses that forbid
/// every variable combination with the wrong parity.
fn emit_xor_cnf(p: &mut CnfProblem, lits: &[Lit], parity: bool) {
    let n = lits.len();
    debug_assert!((1..=3).contains(&n));
    for bits in 0..(1u8 << n) {
        let mut xor = false;
        for (i, lit) in lits.iter().enumerate() {
            let assigned = (bits >> i) & 1 == 1;
            xor ^= assigned ^ lit.is_neg();
        }
        if xor != parity {
            let clause: Vec<Lit> = lits
                .iter()
                .enumerate()
                .map(|(i, lit)| Lit::with_sign(lit.var(), (bits >> i) & 1 == 1))
                .collect();
            p.add_or(&clause);
        }
    }
}

/// A total assignment over variables `1..=len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(var_count: u32) -> Self {
        Self {
            values: vec![false; var_count as usize],
        }
    }

    pub fn from_values(values: Vec<bool>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> bool {
        self.values[(var - 1) as usize]
    }

    pub fn set(&mut self, var: VarId, value: bool) {
        self.values[(var - 1) as usize] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_assignments(n: u32) -> impl Iterator<Item = Assignment> {
        (0..(1u32 << n)).map(move |bits| {
            Assignment::from_values((0..n).map(|i| (bits >> i) & 1 == 1).collect())
        })
    }

    #[test]
    fn xor_translation_preserves_models() {
        // Every XOR width from 1 to 8, random literal signs.
        use rand::Rng;
        let mut rng = crate::masking::rng_from_seed(13);
        for width in 1..=8u32 {
            for _ in 0..20 {
                let mut p = CnfProblem::new();
                let vars = p.new_vars(width as usize);
                let lits: Vec<Lit> = vars
                    .iter()
                    .map(|&v| Lit::with_sign(v, rng.gen::<bool>()))
                    .collect();
                let parity = rng.gen::<bool>();
                p.add_xor_lits(&lits, parity);
                let pure = p.to_pure_cnf();
                assert!(pure.xor_clauses.is_empty());
                for a in all_assignments(width) {
                    let want = p.xor_clauses[0].eval(&a);
                    // The translation has aux vars; a model of the original
                    // must extend to the pure problem, and vice versa the
                    // pure problem restricted to original vars must match.
                    let extends = all_assignments(pure.var_count() - width).any(|ext| {
                        let mut full = a.values.clone();
                        full.extend(ext.values);
                        pure.is_model(&Assignment::from_values(full))
                    });
                    assert_eq!(extends, want, "width {width} parity {parity}");
                }
            }
        }
    }

    #[test]
    fn violated_clause_indices() {
        let mut p = CnfProblem::new();
        let v = p.new_vars(2);
        p.add_or(&[Lit::pos(v[0])]);
        p.add_or(&[Lit::neg(v[1])]);
        p.add_xor_vars(&v, true);
        let mut a = Assignment::new(2);
        a.set(v[0], true);
        a.set(v[1], true);
        assert_eq!(p.violated_clauses(&a), vec![1, 2]);
        a.set(v[1], false);
        assert!(p.is_model(&a));
    }

    #[test]
    fn canonical_xor_form() {
        let mut p = CnfProblem::new();
        let v = p.new_vars(2);
        p.add_xor_vars(&v, false); // v1 ^ v2 = 0, stored as -1 2
        assert_eq!(p.xor_clauses[0].lits, vec![Lit::neg(v[0]), Lit::pos(v[1])]);
        p.add_xor_lits(&[Lit::neg(v[0]), Lit::pos(v[1])], true); // same constraint
        assert_eq!(p.xor_clauses[1], p.xor_clauses[0]);
    }
}
