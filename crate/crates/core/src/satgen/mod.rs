//! 3-SAT instances as Ising models: a penalty encoding of each clause with
//! one auxiliary variable, an equality gadget, and a brute-force checker
//! for "do all satisfying assignments agree on x_i = x_j".

mod dimacs;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use dimacs::{parse_dimacs, to_dimacs};

use crate::error::{Error, Result};
use crate::graph::{HamiltonianGraph, NodeId};

/// Largest variable count accepted by [`check_all_sat_equal`].
pub const MAX_BRUTE_FORCE_VARS: u32 = 20;

/// A literal: `+v` is `x_v`, `-v` is its negation.
pub type Literal = i32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Vec<Literal>>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        for (k, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidParameter(format!("clause {} is empty", k + 1)));
            }
            if c.len() > 3 {
                return Err(Error::InvalidParameter(format!(
                    "clause {} has {} literals; only 3-SAT is supported",
                    k + 1,
                    c.len()
                )));
            }
            for &l in c {
                if l == 0 || l.unsigned_abs() > num_vars {
                    return Err(Error::InvalidParameter(format!(
                        "clause {} has literal {l} outside 1..={num_vars}",
                        k + 1
                    )));
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    /// `x[v - 1]` is the value of `x_v`.
    pub fn satisfied_by(&self, x: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| lit_value(l, x)))
    }
}

fn lit_value(l: Literal, x: &[bool]) -> bool {
    x[l.unsigned_abs() as usize - 1] == (l > 0)
}

/// Pads a clause to exactly three literals by repeating its last one.
fn pad(clause: &[Literal]) -> [Literal; 3] {
    let last = *clause.last().expect("clauses are non-empty");
    [
        clause[0],
        *clause.get(1).unwrap_or(&last),
        *clause.get(2).unwrap_or(&last),
    ]
}

/// Multilinear polynomial over {0,1} variables. Monomials are sorted,
/// duplicate-free variable lists, so `x * x = x` holds by construction.
#[derive(Clone, Debug, Default, PartialEq)]
struct Poly(BTreeMap<Vec<u32>, f64>);

impl Poly {
    fn constant(c: f64) -> Self {
        Poly([(Vec::new(), c)].into_iter().collect())
    }

    fn var(v: u32) -> Self {
        Poly([(vec![v], 1.0)].into_iter().collect())
    }

    fn literal(l: Literal) -> Self {
        let v = Poly::var(l.unsigned_abs());
        if l > 0 {
            v
        } else {
            Poly::constant(1.0).add(&v.scale(-1.0))
        }
    }

    fn add(mut self, other: &Poly) -> Self {
        for (m, c) in &other.0 {
            *self.0.entry(m.clone()).or_insert(0.0) += c;
        }
        self.0.retain(|_, c| *c != 0.0);
        self
    }

    fn scale(mut self, k: f64) -> Self {
        self.0.values_mut().for_each(|c| *c *= k);
        self.0.retain(|_, c| *c != 0.0);
        self
    }

    fn mul(&self, other: &Poly) -> Self {
        let mut out = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let mut m: Vec<u32> = ma.iter().chain(mb).copied().collect();
                m.sort_unstable();
                m.dedup();
                out = out.add(&Poly([(m, ca * cb)].into_iter().collect()));
            }
        }
        out
    }
}

/// Quadratic pseudo-Boolean objective
/// `Σ_{i<j} Q_ij x_i x_j + Σ c_i x_i + constant` over variables `1..=num_vars`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuboProblem {
    pub num_vars: u32,
    pub linear: BTreeMap<u32, f64>,
    /// Keyed by `(i, j)` with `i < j`.
    pub quadratic: BTreeMap<(u32, u32), f64>,
    pub constant: f64,
}

impl QuboProblem {
    fn from_poly(num_vars: u32, p: &Poly) -> Self {
        let mut q = QuboProblem {
            num_vars,
            ..QuboProblem::default()
        };
        for (m, &c) in &p.0 {
            match m.as_slice() {
                [] => q.constant += c,
                [i] => *q.linear.entry(*i).or_insert(0.0) += c,
                [i, j] => *q.quadratic.entry((*i, *j)).or_insert(0.0) += c,
                _ => unreachable!("clause penalties are quadratic"),
            }
        }
        q
    }

    /// Symmetric view of the quadratic coefficients.
    pub fn q(&self, i: u32, j: u32) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    /// `x[v - 1]` is the value of variable `v`.
    pub fn evaluate(&self, x: &[bool]) -> f64 {
        let b = |v: u32| if x[v as usize - 1] { 1.0 } else { 0.0 };
        let mut e = self.constant;
        for (&i, &c) in &self.linear {
            e += c * b(i);
        }
        for (&(i, j), &c) in &self.quadratic {
            e += c * b(i) * b(j);
        }
        e
    }

    /// Ising model with the same objective under `x = (1 + s) / 2`.
    pub fn to_ising(&self) -> Result<HamiltonianGraph> {
        let n = self.num_vars as usize;
        let mut h = vec![0.0; n];
        let mut offset = self.constant;
        let mut couplings = Vec::with_capacity(self.quadratic.len());
        for (&i, &c) in &self.linear {
            h[i as usize - 1] -= c / 2.0;
            offset += c / 2.0;
        }
        for (&(i, j), &q) in &self.quadratic {
            if q == 0.0 {
                continue;
            }
            couplings.push((i as NodeId, j as NodeId, -q / 4.0));
            h[i as usize - 1] -= q / 4.0;
            h[j as usize - 1] -= q / 4.0;
            offset += q / 4.0;
        }
        HamiltonianGraph::build(&h, &couplings)?.with_offset(offset)
    }
}

/// Penalty for one clause with auxiliary variable `aux`:
/// `x_c(2 - (l1 + l2 + l3)) + (l1 l2 + l2 l3 + l3 l1) - (l1 + l2 + l3) + 1`,
/// where each `l` is `x` or `1 - x` according to the literal's sign.
/// Its minimum over `x_c` is 0 when the clause is satisfied and 1 otherwise.
pub fn clause_qubo(clause: &[Literal], aux: u32, num_vars: u32) -> Result<QuboProblem> {
    if clause.is_empty() || clause.len() > 3 {
        return Err(Error::InvalidParameter(format!(
            "clause must have 1 to 3 literals, got {}",
            clause.len()
        )));
    }
    if aux == 0 || aux > num_vars || clause.iter().any(|&l| l == 0 || l.unsigned_abs() > num_vars) {
        return Err(Error::InvalidParameter(
            "clause variable outside the variable range".into(),
        ));
    }
    Ok(QuboProblem::from_poly(num_vars, &clause_poly(clause, aux)))
}

fn clause_poly(clause: &[Literal], aux: u32) -> Poly {
    let [a, b, c] = pad(clause).map(Poly::literal);
    let sum = a.clone().add(&b).add(&c);
    let xc = Poly::var(aux);
    xc.mul(&Poly::constant(2.0).add(&sum.clone().scale(-1.0)))
        .add(&a.mul(&b))
        .add(&b.mul(&c))
        .add(&c.mul(&a))
        .add(&sum.scale(-1.0))
        .add(&Poly::constant(1.0))
}

/// Sum of clause penalties. Variables `1..=n` are the formula's, and clause
/// `k` (0-based) gets auxiliary variable `n + k + 1`.
pub fn cnf_to_qubo(f: &CnfFormula) -> QuboProblem {
    let total = f.num_vars + f.clauses.len() as u32;
    let mut p = Poly::default();
    for (k, clause) in f.clauses.iter().enumerate() {
        p = p.add(&clause_poly(clause, f.num_vars + k as u32 + 1));
    }
    QuboProblem::from_poly(total, &p)
}

/// Ising model whose ground energy is 0 exactly when `f` is satisfiable;
/// otherwise it is the least number of violated clauses.
pub fn cnf_to_ising(f: &CnfFormula) -> Result<HamiltonianGraph> {
    cnf_to_qubo(f).to_ising()
}

/// Adds `(x_i ∨ ¬x_j) ∧ (¬x_i ∨ x_j)`, each padded to three literals.
pub fn equality_gadget(f: &CnfFormula, i: u32, j: u32) -> Result<CnfFormula> {
    if i == j {
        return Err(Error::InvalidParameter(format!(
            "equality gadget needs two distinct variables, got {i} twice"
        )));
    }
    if i == 0 || j == 0 || i > f.num_vars || j > f.num_vars {
        return Err(Error::InvalidParameter(format!(
            "variables {i}, {j} outside 1..={}",
            f.num_vars
        )));
    }
    let (a, b) = (i as Literal, j as Literal);
    let mut clauses = f.clauses.clone();
    clauses.push(pad(&[a, -b]).to_vec());
    clauses.push(pad(&[-a, b]).to_vec());
    CnfFormula::new(f.num_vars, clauses)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllSatEqual {
    Yes,
    No,
    /// No satisfying assignment exists.
    Unsat,
}

impl AllSatEqual {
    pub fn as_str(self) -> &'static str {
        match self {
            AllSatEqual::Yes => "yes",
            AllSatEqual::No => "no",
            AllSatEqual::Unsat => "unsat",
        }
    }
}

/// Whether every satisfying assignment of `f` has `x_i = x_j`.
pub fn check_all_sat_equal(f: &CnfFormula, i: u32, j: u32) -> Result<AllSatEqual> {
    if f.num_vars > MAX_BRUTE_FORCE_VARS {
        return Err(Error::InvalidParameter(format!(
            "{} variables exceeds the brute-force limit of {MAX_BRUTE_FORCE_VARS}",
            f.num_vars
        )));
    }
    if i == 0 || j == 0 || i > f.num_vars || j > f.num_vars {
        return Err(Error::InvalidParameter(format!(
            "variables {i}, {j} outside 1..={}",
            f.num_vars
        )));
    }
    let n = f.num_vars as usize;
    let mut any = false;
    let mut x = vec![false; n];
    for mask in 0u32..(1 << n) {
        for (v, slot) in x.iter_mut().enumerate() {
            *slot = mask >> v & 1 == 1;
        }
        if f.satisfied_by(&x) {
            any = true;
            if x[i as usize - 1] != x[j as usize - 1] {
                return Ok(AllSatEqual::No);
            }
        }
    }
    Ok(if any { AllSatEqual::Yes } else { AllSatEqual::Unsat })
}
