//! Exact Fourier–Motzkin elimination over rate inequalities whose right-hand
//! sides are linear in named information constants, and numeric implication
//! checks between two such systems at sampled valuations.

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{AuxiliaryInput, BroadcastChannel};
use crate::info::{conditional_entropy, entropy, mutual_information};

pub type Q = BigRational;

/// Default tolerance for vertex feasibility and implication checks.
pub const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("systems have different variables after projection")]
    VariableMismatch,
    #[error("row has {got} coefficients, expected {expected}")]
    RowShape { expected: usize, got: usize },
    #[error("valuation misses constant `{0}`")]
    MissingConstant(String),
    #[error("constant `{name}` = {value} violates its declared range")]
    BadConstant { name: String, value: f64 },
    #[error("empty valuation list")]
    NoValuations,
    #[error("variable coefficients have rank below the dimension; vertex enumeration needs a pointed polyhedron")]
    NotPointed,
    #[error("bad rational `{0}`")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PolyError>;

fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `vars · x ≤ consts · K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row {
    pub vars: Vec<Q>,
    pub consts: Vec<Q>,
}

impl Row {
    pub fn new(vars: Vec<Q>, consts: Vec<Q>) -> Self {
        Self { vars, consts }
    }

    pub fn from_ints(vars: &[i64], consts: &[i64]) -> Self {
        Self::new(vars.iter().map(|&v| q(v)).collect(), consts.iter().map(|&v| q(v)).collect())
    }

    pub fn is_constant_only(&self) -> bool {
        self.vars.iter().all(Zero::is_zero)
    }

    fn is_trivial(&self) -> bool {
        self.is_constant_only() && self.consts.iter().all(Zero::is_zero)
    }

    /// Scales by the magnitude of the first nonzero coefficient so that
    /// positive multiples compare equal.
    fn normalized(&self) -> Row {
        let lead = self.vars.iter().chain(&self.consts).find(|c| !c.is_zero());
        match lead {
            None => self.clone(),
            Some(l) => {
                let s = l.abs();
                Row {
                    vars: self.vars.iter().map(|c| c / &s).collect(),
                    consts: self.consts.iter().map(|c| c / &s).collect(),
                }
            }
        }
    }

    fn scaled_sum(a: &Row, ka: &Q, b: &Row, kb: &Q) -> Row {
        Row {
            vars: a.vars.iter().zip(&b.vars).map(|(x, y)| x * ka + y * kb).collect(),
            consts: a.consts.iter().zip(&b.consts).map(|(x, y)| x * ka + y * kb).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicIneqSystem {
    pub variables: Vec<String>,
    pub constants: Vec<String>,
    /// Constants declared nonnegative.
    pub nonnegative: Vec<String>,
    pub rows: Vec<Row>,
}

/// Row counts of one elimination step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub variable: String,
    pub positive: usize,
    pub negative: usize,
    pub untouched: usize,
    pub before_dedup: usize,
    pub after_dedup: usize,
}

impl SymbolicIneqSystem {
    pub fn new(variables: &[&str], constants: &[&str]) -> Self {
        Self {
            variables: variables.iter().map(|s| s.to_string()).collect(),
            constants: constants.iter().map(|s| s.to_string()).collect(),
            nonnegative: constants.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Row) -> Result<()> {
        if row.vars.len() != self.variables.len() {
            return Err(PolyError::RowShape { expected: self.variables.len(), got: row.vars.len() });
        }
        if row.consts.len() != self.constants.len() {
            return Err(PolyError::RowShape { expected: self.constants.len(), got: row.consts.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Adds `-x ≤ 0` for each named variable.
    pub fn add_nonnegativity(&mut self, names: &[&str]) -> Result<()> {
        for name in names {
            let j = self.var_index(name)?;
            let mut vars = vec![q(0); self.variables.len()];
            vars[j] = q(-1);
            self.push(Row::new(vars, vec![q(0); self.constants.len()]))?;
        }
        Ok(())
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.variables.iter().position(|v| v == name).ok_or_else(|| PolyError::UnknownVariable(name.to_string()))
    }

    /// Drops all-zero rows and exact duplicates up to positive scaling,
    /// keeping first occurrences.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.rows = std::mem::take(&mut self.rows)
            .into_iter()
            .filter(|r| !r.is_trivial())
            .map(|r| r.normalized())
            .filter(|r| seen.insert(r.clone()))
            .collect();
    }

    pub fn eliminate(&self, var: &str) -> Result<SymbolicIneqSystem> {
        self.eliminate_with_stats(var).map(|(s, _)| s)
    }

    pub fn eliminate_with_stats(&self, var: &str) -> Result<(SymbolicIneqSystem, EliminationStep)> {
        let j = self.var_index(var)?;
        let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
        for r in &self.rows {
            if r.vars[j].is_positive() {
                pos.push(r);
            } else if r.vars[j].is_negative() {
                neg.push(r);
            } else {
                zero.push(r);
            }
        }
        let mut rows: Vec<Row> = zero.iter().map(|r| (*r).clone()).collect();
        for p in &pos {
            for n in &neg {
                // p·(−n_j) + n·p_j cancels the variable
                rows.push(Row::scaled_sum(p, &-n.vars[j].clone(), n, &p.vars[j]));
            }
        }
        for r in &mut rows {
            r.vars.remove(j);
        }
        let before_dedup = rows.len();
        let mut out = SymbolicIneqSystem {
            variables: self.variables.iter().filter(|v| *v != var).cloned().collect(),
            constants: self.constants.clone(),
            nonnegative: self.nonnegative.clone(),
            rows,
        };
        out.dedup();
        let step = EliminationStep {
            variable: var.to_string(),
            positive: pos.len(),
            negative: neg.len(),
            untouched: zero.len(),
            before_dedup,
            after_dedup: out.rows.len(),
        };
        Ok((out, step))
    }

    /// Constant-only rows whose right side can only be nonpositive under the
    /// declared nonnegativity, which would force constants to zero.
    pub fn has_degenerate_rows(&self) -> bool {
        self.rows.iter().any(|r| {
            r.is_constant_only()
                && r.consts.iter().any(|c| c.is_negative())
                && r.consts
                    .iter()
                    .zip(&self.constants)
                    .all(|(c, name)| !c.is_positive() && (c.is_zero() || self.nonnegative.contains(name)))
        })
    }

    fn numeric(&self, val: &ConstantValuation) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let k: Vec<f64> = self.constants.iter().map(|c| val.get(c)).collect::<Result<_>>()?;
        let a = self.rows.iter().map(|r| r.vars.iter().map(q_to_f64).collect()).collect();
        let b = self.rows.iter().map(|r| r.consts.iter().zip(&k).map(|(c, v)| q_to_f64(c) * v).sum()).collect();
        Ok((a, b))
    }

    /// Reorders variables to match `order`.
    fn permuted(&self, order: &[String]) -> Result<SymbolicIneqSystem> {
        let idx: Vec<usize> = order.iter().map(|n| self.var_index(n)).collect::<Result<_>>()?;
        Ok(SymbolicIneqSystem {
            variables: order.to_vec(),
            constants: self.constants.clone(),
            nonnegative: self.nonnegative.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| Row::new(idx.iter().map(|&i| r.vars[i].clone()).collect(), r.consts.clone()))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstantValuation {
    pub values: BTreeMap<String, f64>,
}

impl ConstantValuation {
    pub fn new(pairs: &[(&str, f64)]) -> Self {
        Self { values: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.values.get(name).copied().ok_or_else(|| PolyError::MissingConstant(name.to_string()))
    }

    /// Checks finiteness and declared nonnegativity for the system's constants.
    pub fn validate(&self, sys: &SymbolicIneqSystem) -> Result<()> {
        for name in &sys.constants {
            let v = self.get(name)?;
            if !v.is_finite() || (sys.nonnegative.contains(name) && v < 0.0) {
                return Err(PolyError::BadConstant { name: name.clone(), value: v });
            }
        }
        Ok(())
    }
}

fn combinations(m: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(start: usize, m: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < d - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, d, cur, out);
            cur.pop();
        }
    }
    rec(0, m, d, &mut cur, &mut out);
    out
}

/// Inverse of a small dense matrix, or `None` when near singular.
fn invert(mut m: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let d = m.len();
    let mut inv: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col];
        for k in 0..d {
            m[col][k] /= p;
            inv[col][k] /= p;
        }
        for i in 0..d {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for k in 0..d {
                        m[i][k] -= f * m[col][k];
                        inv[i][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn rank(rows: &[Vec<f64>], d: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut r = 0;
    for col in 0..d {
        let Some(piv) = (r..m.len()).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())) else { break };
        if m[piv][col].abs() < 1e-10 {
            continue;
        }
        m.swap(r, piv);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][col] / m[r][col];
                for k in 0..d {
                    m[i][k] -= f * m[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

/// Basis inverses for every nonsingular choice of `d` rows; depends only on
/// the variable coefficients, so it is shared across valuations.
struct VertexPlan {
    d: usize,
    bases: Vec<(Vec<usize>, Vec<Vec<f64>>)>,
}

impl VertexPlan {
    fn new(a: &[Vec<f64>], d: usize) -> Self {
        let bases = combinations(a.len(), d)
            .into_iter()
            .filter_map(|rows| {
                let m = rows.iter().map(|&i| a[i].clone()).collect();
                invert(m).map(|inv| (rows, inv))
            })
            .collect();
        Self { d, bases }
    }

    fn vertices(&self, a: &[Vec<f64>], b: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for (rows, inv) in &self.bases {
            let x: Vec<f64> =
                (0..self.d).map(|i| rows.iter().enumerate().map(|(k, &r)| inv[i][k] * b[r]).sum()).collect();
            let feasible = a.iter().zip(b).all(|(ai, bi)| dot(ai, &x) <= bi + tol);
            if feasible {
                out.push(x);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numeric checker for `A ⊆ B` reused across valuations.
struct Inclusion {
    sys_a: SymbolicIneqSystem,
    sys_b: SymbolicIneqSystem,
    plan: VertexPlan,
    rays: Vec<Vec<f64>>,
}

impl Inclusion {
    fn new(sys_a: &SymbolicIneqSystem, sys_b: &SymbolicIneqSystem) -> Result<Self> {
        let mut va = sys_a.variables.clone();
        let mut vb = sys_b.variables.clone();
        va.sort();
        vb.sort();
        if va != vb {
            return Err(PolyError::VariableMismatch);
        }
        let sys_b = sys_b.permuted(&sys_a.variables)?;
        let d = sys_a.variables.len();
        let a: Vec<Vec<f64>> = sys_a.rows.iter().map(|r| r.vars.iter().map(q_to_f64).collect()).collect();
        if rank(&a, d) < d {
            return Err(PolyError::NotPointed);
        }
        // recession cone {A r ≤ 0} cut by the unit box; its vertices span the cone
        let mut cone = a.clone();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            cone.push(e.clone());
            e[i] = -1.0;
            cone.push(e);
        }
        let mut cb = vec![0.0; a.len()];
        cb.extend(std::iter::repeat(1.0).take(2 * d));
        let rays = VertexPlan::new(&cone, d)
            .vertices(&cone, &cb, 1e-12)
            .into_iter()
            .filter(|r| r.iter().any(|x| x.abs() > 1e-9))
            .collect();
        let plan = VertexPlan::new(&a, d);
        Ok(Self { sys_a: sys_a.clone(), sys_b, plan, rays })
    }

    fn holds(&self, val: &ConstantValuation, tol: f64) -> Result<bool> {
        let (a, b) = self.sys_a.numeric(val)?;
        let (ba, bb) = self.sys_b.numeric(val)?;
        let verts = self.plan.vertices(&a, &b, VERTEX_TOL);
        if verts.is_empty() {
            // pointed and vertex-free means empty
            return Ok(true);
        }
        let at_vertices = verts.iter().all(|x| ba.iter().zip(&bb).all(|(r, rhs)| dot(r, x) <= rhs + tol));
        let along_rays = self.rays.iter().all(|ray| ba.iter().all(|r| dot(r, ray) <= tol));
        Ok(at_vertices && along_rays)
    }
}

/// True when, at every valuation, the polyhedron of `sys_a` lies inside that of
/// `sys_b` within `tol`.
pub fn implies(
    sys_a: &SymbolicIneqSystem,
    sys_b: &SymbolicIneqSystem,
    valuations: &[ConstantValuation],
    tol: f64,
) -> Result<bool> {
    Ok(first_violation(sys_a, sys_b, valuations, tol)?.is_none())
}

/// Index of the first valuation at which `sys_a ⊆ sys_b` fails.
pub fn first_violation(
    sys_a: &SymbolicIneqSystem,
    sys_b: &SymbolicIneqSystem,
    valuations: &[ConstantValuation],
    tol: f64,
) -> Result<Option<usize>> {
    if valuations.is_empty() {
        return Err(PolyError::NoValuations);
    }
    for v in valuations {
        v.validate(sys_a)?;
        v.validate(sys_b)?;
    }
    let inc = Inclusion::new(sys_a, sys_b)?;
    let flags: Vec<bool> = valuations.par_iter().map(|v| inc.holds(v, tol)).collect::<Result<_>>()?;
    Ok(flags.iter().position(|ok| !ok))
}

pub const RATE_VARS: [&str; 5] = ["R", "R_Y^p", "R_Y^c", "R_Z^p", "R_Z^c"];
pub const AUX_VARS: [&str; 3] = ["Rt^c", "Rt_Y", "Rt_Z"];
pub const INFO_CONSTS: [&str; 6] = ["H(Y)", "H(Y|V)", "I(U;Z)", "I(U;Z|V)", "I(Y;U|V)", "I(V;Y)"];

/// Code-construction conditions of the binned cloud-center Marton code, with
/// strict inequalities closed. Variables: rates then auxiliary codebook rates.
pub fn marton_code_system() -> SymbolicIneqSystem {
    let vars: Vec<&str> = RATE_VARS.iter().chain(&AUX_VARS).copied().collect();
    let mut s = SymbolicIneqSystem::new(&vars, &INFO_CONSTS);
    //            R  Yp Yc Zp Zc  c  Y  Z      H(Y) H(Y|V) I(U;Z) I(U;Z|V) I(Y;U|V) I(V;Y)
    let rows: [([i64; 8], [i64; 6]); 10] = [
        ([0, 0, 0, 0, 0, -1, 0, 0], [0, 0, 0, 0, 0, 0]),
        ([0, 1, 0, 0, 0, 0, -1, 0], [0, 0, 0, 0, 0, 0]),
        ([0, 0, 0, 1, 0, 0, 0, -1], [0, 0, 0, 0, 0, 0]),
        ([0, 1, 0, 1, 0, 1, -1, -1], [0, 0, 0, 0, -1, 0]),
        ([0, 0, 0, 0, 0, 1, -1, 0], [0, 0, 0, 0, 0, 0]),
        ([0, 0, 0, 0, 0, -1, 1, 0], [0, 1, 0, 0, 0, 0]),
        ([1, 0, 1, 0, 0, 0, 1, 0], [1, 0, 0, 0, 0, 0]),
        ([0, 0, 0, 0, 0, 1, 0, -1], [0, 0, 0, 0, 0, 0]),
        ([0, 0, 0, 0, 0, -1, 0, 1], [0, 0, 0, 1, 0, 0]),
        ([1, 0, 0, 0, 1, 0, 0, 1], [0, 0, 1, 0, 0, 0]),
    ];
    for (v, k) in rows {
        s.push(Row::from_ints(&v, &k)).expect("fixed shape");
    }
    s
}

/// The five-row achievable region written over the same constants, using
/// `H(Y|U) = H(Y|V) − I(Y;U|V)`.
pub fn theorem1_system() -> SymbolicIneqSystem {
    let mut s = SymbolicIneqSystem::new(&RATE_VARS, &INFO_CONSTS);
    let rows: [([i64; 5], [i64; 6]); 5] = [
        ([1, 1, 1, 0, 0], [1, 0, 0, 0, 0, 0]),
        ([1, 0, 0, 1, 1], [0, 0, 1, 0, 0, 0]),
        ([1, 1, 1, 1, 0], [0, 1, 0, 1, -1, 1]),
        ([1, 1, 0, 1, 1], [0, 1, 1, 0, -1, 0]),
        ([2, 1, 1, 1, 1], [0, 1, 1, 0, -1, 1]),
    ];
    for (v, k) in rows {
        s.push(Row::from_ints(&v, &k)).expect("fixed shape");
    }
    s
}

/// Evaluates the named constants at a channel and auxiliary input.
/// Rounding below zero is clamped.
pub fn valuation_at(c: &BroadcastChannel, a: &AuxiliaryInput) -> ConstantValuation {
    let j = c.induced_joint(a).expect("input matches channel");
    let h_y = entropy(&j, &["Y"]).expect("axis").max(0.0);
    let h_y_v = conditional_entropy(&j, &["Y"], &["V"]).expect("axis").max(0.0);
    ConstantValuation::new(&[
        ("H(Y)", h_y),
        ("H(Y|V)", h_y_v),
        ("I(U;Z)", mutual_information(&j, &["U"], &["Z"], &[]).expect("axis").max(0.0)),
        ("I(U;Z|V)", mutual_information(&j, &["U"], &["Z"], &["V"]).expect("axis").max(0.0)),
        ("I(Y;U|V)", mutual_information(&j, &["Y"], &["U"], &["V"]).expect("axis").max(0.0)),
        ("I(V;Y)", mutual_information(&j, &["V"], &["Y"], &[]).expect("axis").max(0.0)),
    ])
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

/// Random semideterministic channel (alphabets ≤ 3) and auxiliary input;
/// a quarter of the draws use constant `V`, another quarter `V = U`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (BroadcastChannel, AuxiliaryInput) {
    let xs = rng.random_range(1..=3);
    let ys = rng.random_range(1..=3);
    let zs = rng.random_range(1..=3);
    let f: Vec<usize> = (0..xs).map(|_| rng.random_range(0..ys)).collect();
    let wz: Vec<Vec<f64>> = (0..xs).map(|_| dirichlet(rng, zs)).collect();
    let c = BroadcastChannel::semideterministic(f, ys, wz).expect("valid channel");
    let us = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> = (0..us).map(|_| dirichlet(rng, xs)).collect();
    let a = match rng.random_range(0..4) {
        0 => AuxiliaryInput::with_constant_v(&dirichlet(rng, us), rows),
        1 => AuxiliaryInput::with_v_equal_u(&dirichlet(rng, us), rows),
        _ => {
            let vs = rng.random_range(1..=3);
            AuxiliaryInput::new(vs, us, dirichlet(rng, vs * us), rows)
        }
    }
    .expect("valid input");
    (c, a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationReport {
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub initial_rows: usize,
    pub steps: Vec<EliminationStep>,
    pub final_rows: usize,
    /// Nonnegativity rows added for rate variables the construction leaves implicit.
    pub added_nonnegativity: Vec<String>,
    pub degenerate_rows: bool,
    pub eliminated_implies_target: bool,
    pub target_implies_eliminated: bool,
    pub mutual: bool,
    pub first_failure: Option<usize>,
}

/// Eliminates the auxiliary codebook rates from [`marton_code_system`] and
/// checks mutual implication with [`theorem1_system`] at the given valuations.
pub fn derivation_check_with(valuations: &[ConstantValuation], seed: u64) -> Result<DerivationReport> {
    let mut sys = marton_code_system();
    sys.add_nonnegativity(&RATE_VARS)?;
    let initial_rows = sys.rows.len();
    let mut steps = Vec::new();
    for v in AUX_VARS {
        let (next, step) = sys.eliminate_with_stats(v)?;
        sys = next;
        steps.push(step);
    }
    let mut target = theorem1_system();
    target.add_nonnegativity(&RATE_VARS)?;
    let fwd = first_violation(&sys, &target, valuations, VERTEX_TOL)?;
    let bwd = first_violation(&target, &sys, valuations, VERTEX_TOL)?;
    Ok(DerivationReport {
        samples: valuations.len(),
        seed,
        tolerance: VERTEX_TOL,
        initial_rows,
        steps,
        final_rows: sys.rows.len(),
        added_nonnegativity: RATE_VARS.iter().map(|s| s.to_string()).collect(),
        degenerate_rows: sys.has_degenerate_rows(),
        eliminated_implies_target: fwd.is_none(),
        target_implies_eliminated: bwd.is_none(),
        mutual: fwd.is_none() && bwd.is_none(),
        first_failure: match (fwd, bwd) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
    })
}

pub fn theorem1_derivation_check(samples: usize, seed: u64) -> Result<DerivationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<ConstantValuation> = (0..samples)
        .map(|_| {
            let (c, a) = random_instance(&mut rng);
            valuation_at(&c, &a)
        })
        .collect();
    derivation_check_with(&vals, seed)
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    vars: Vec<String>,
    consts: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawSystem {
    variables: Vec<String>,
    constants: Vec<String>,
    #[serde(default)]
    nonnegative: Option<Vec<String>>,
    rows: Vec<RawRow>,
}

pub fn parse_rational(s: &str) -> Result<Q> {
    Q::from_str(s.trim()).map_err(|_| PolyError::Parse(s.to_string()))
}

impl Serialize for SymbolicIneqSystem {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let show = |v: &[Q]| v.iter().map(|x| x.to_string()).collect();
        RawSystem {
            variables: self.variables.clone(),
            constants: self.constants.clone(),
            nonnegative: Some(self.nonnegative.clone()),
            rows: self.rows.iter().map(|r| RawRow { vars: show(&r.vars), consts: show(&r.consts) }).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SymbolicIneqSystem {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawSystem::deserialize(de)?;
        let parse = |v: &[String]| v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<Q>>>();
        let mut sys = SymbolicIneqSystem {
            nonnegative: raw.nonnegative.unwrap_or_else(|| raw.constants.clone()),
            variables: raw.variables,
            constants: raw.constants,
            rows: Vec::new(),
        };
        for r in &raw.rows {
            let row = Row::new(parse(&r.vars).map_err(D::Error::custom)?, parse(&r.consts).map_err(D::Error::custom)?);
            sys.push(row).map_err(D::Error::custom)?;
        }
        if let Some(bad) = sys.nonnegative.iter().find(|n| !sys.constants.contains(n)) {
            return Err(D::Error::custom(PolyError::UnknownConstant(bad.clone())));
        }
        Ok(sys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound_pair() {
        let mut s = SymbolicIneqSystem::new(&["x"], &["K1"]);
        s.push(Row::from_ints(&[1], &[1])).unwrap();
        s.push(Row::from_ints(&[-1], &[0])).unwrap();
        let e = s.eliminate("x").unwrap();
        assert!(e.variables.is_empty());
        assert_eq!(e.rows, vec![Row::from_ints(&[], &[1])]);
    }

    #[test]
    fn substitution_pair() {
        let mut s = SymbolicIneqSystem::new(&["x", "y"], &["K", "c"]);
        s.push(Row::from_ints(&[1, 1], &[1, 0])).unwrap();
        s.push(Row::from_ints(&[-1, 0], &[0, -1])).unwrap();
        let e = s.eliminate("x").unwrap();
        assert_eq!(e.rows, vec![Row::from_ints(&[1], &[1, -1])]);
        assert_eq!(s.eliminate("w").unwrap_err(), PolyError::UnknownVariable("w".into()));
    }

    #[test]
    fn dedup_removes_scalar_multiples() {
        let mut s = SymbolicIneqSystem::new(&["x", "y"], &["K"]);
        s.push(Row::from_ints(&[1, 2], &[3])).unwrap();
        s.push(Row::from_ints(&[2, 4], &[6])).unwrap();
        s.push(Row::from_ints(&[-1, -2], &[-3])).unwrap();
        s.push(Row::from_ints(&[0, 0], &[0])).unwrap();
        s.dedup();
        assert_eq!(s.rows.len(), 2);
    }

    #[test]
    fn degenerate_rows_detected() {
        let mut s = SymbolicIneqSystem::new(&["x"], &["A", "B"]);
        s.push(Row::from_ints(&[0], &[1, -1])).unwrap();
        assert!(!s.has_degenerate_rows());
        s.push(Row::from_ints(&[0], &[0, -1])).unwrap();
        assert!(s.has_degenerate_rows());
    }

    #[test]
    fn implies_self_and_redundant_row() {
        let mut t = theorem1_system();
        t.add_nonnegativity(&RATE_VARS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<_> = (0..10)
            .map(|_| {
                let (c, a) = random_instance(&mut rng);
                valuation_at(&c, &a)
            })
            .collect();
        assert!(implies(&t, &t, &vals, VERTEX_TOL).unwrap());
        let mut doubled = t.clone();
        doubled.push(Row::from_ints(&[2, 2, 2, 0, 0], &[2, 0, 0, 0, 0, 0])).unwrap();
        assert!(implies(&t, &doubled, &vals, VERTEX_TOL).unwrap());
        assert!(implies(&doubled, &t, &vals, VERTEX_TOL).unwrap());
        assert_eq!(implies(&t, &t, &[], VERTEX_TOL).unwrap_err(), PolyError::NoValuations);
    }

    #[test]
    fn strict_subset_fails() {
        let mut t = theorem1_system();
        t.add_nonnegativity(&RATE_VARS).unwrap();
        let mut tighter = t.clone();
        tighter.push(Row::from_ints(&[0, 1, 0, 0, 0], &[0, 0, 0, 0, 0, 0])).unwrap();
        let val = ConstantValuation::new(&[
            ("H(Y)", 1.0),
            ("H(Y|V)", 1.0),
            ("I(U;Z)", 0.5),
            ("I(U;Z|V)", 0.5),
            ("I(Y;U|V)", 0.0),
            ("I(V;Y)", 0.0),
        ]);
        assert!(implies(&tighter, &t, &[val.clone()], VERTEX_TOL).unwrap());
        assert!(!implies(&t, &tighter, &[val], VERTEX_TOL).unwrap());
    }

    #[test]
    fn unbounded_direction_is_caught() {
        let mut a = SymbolicIneqSystem::new(&["x", "y"], &["K"]);
        a.add_nonnegativity(&["x", "y"]).unwrap();
        a.push(Row::from_ints(&[1, 0], &[1])).unwrap();
        let mut b = a.clone();
        b.push(Row::from_ints(&[0, 1], &[1])).unwrap();
        let val = [ConstantValuation::new(&[("K", 1.0)])];
        assert!(!implies(&a, &b, &val, VERTEX_TOL).unwrap());
        assert!(implies(&b, &a, &val, VERTEX_TOL).unwrap());
    }

    #[test]
    fn negative_constant_rejected() {
        let val = ConstantValuation::new(&[
            ("H(Y)", 1.0),
            ("H(Y|V)", 1.0),
            ("I(U;Z)", 0.5),
            ("I(U;Z|V)", 0.5),
            ("I(Y;U|V)", -0.1),
            ("I(V;Y)", 0.0),
        ]);
        let err = derivation_check_with(&[val], 0).unwrap_err();
        assert!(matches!(err, PolyError::BadConstant { ref name, .. } if name == "I(Y;U|V)"));
    }

    #[test]
    fn json_round_trip() {
        let mut s = SymbolicIneqSystem::new(&["x"], &["K"]);
        s.push(Row::new(vec![parse_rational("3/2").unwrap()], vec![parse_rational("-1").unwrap()])).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"3/2\""));
        let back: SymbolicIneqSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SymbolicIneqSystem>(r#"{"variables":["x"],"constants":["K"],"rows":[{"vars":["a"],"consts":["1"]}]}"#).is_err());
    }
}
