//! Finite-support distributions and information measures.
//!
//! All logarithms are base 2. Masses below [`ZERO_MASS`] are treated as exact
//! zeros inside log terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Masses below this are treated as zero in `p log p` terms.
pub const ZERO_MASS: f64 = 1e-15;
/// Tolerance on total mass.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("duplicate axis `{0}`")]
    DuplicateAxis(String),
    #[error("axis sets overlap on `{0}`")]
    Overlap(String),
    #[error("mass table has {got} entries but the axes need {expected}")]
    Shape { expected: usize, got: usize },
    #[error("axis `{0}` has zero size")]
    EmptyAxis(String),
    #[error("negative or non-finite mass {0}")]
    BadMass(f64),
    #[error("total mass {0} is not 1")]
    NotNormalized(f64),
    #[error("argument {0} outside the domain")]
    Domain(f64),
    #[error("axis naming mismatch: {0}")]
    Naming(String),
}

pub type Result<T> = std::result::Result<T, InfoError>;

/// `-p log2 p` with the zero convention.
#[inline]
pub fn neg_plogp(p: f64) -> f64 {
    if p < ZERO_MASS || p >= 1.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Entropy of an unnormalized-safe mass vector (assumed to sum to 1).
pub fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter().map(|&p| neg_plogp(p)).sum()
}

fn check_masses(mass: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for &m in mass {
        if !m.is_finite() || m < 0.0 {
            return Err(InfoError::BadMass(m));
        }
        total += m;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(InfoError::NotNormalized(total));
    }
    Ok(())
}

/// A distribution over `0..support_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(InfoError::Shape { expected: 1, got: 0 });
        }
        check_masses(&mass)?;
        Ok(Self { mass })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0);
        Self { mass: vec![1.0 / size as f64; size] }
    }

    pub fn point(size: usize, at: usize) -> Self {
        let mut mass = vec![0.0; size];
        mass[at] = 1.0;
        Self { mass }
    }

    pub fn support_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.mass)
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = InfoError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.mass
    }
}

/// A named finite axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self { name: name.into(), size }
    }
}

fn check_axes(axes: &[Axis]) -> Result<usize> {
    let mut total = 1usize;
    for (i, a) in axes.iter().enumerate() {
        if a.size == 0 {
            return Err(InfoError::EmptyAxis(a.name.clone()));
        }
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(InfoError::DuplicateAxis(a.name.clone()));
        }
        total *= a.size;
    }
    Ok(total)
}

#[derive(Serialize, Deserialize)]
struct RawJoint {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

/// Dense joint distribution over named axes, row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint", into = "RawJoint")]
pub struct JointPmf {
    axes: Vec<Axis>,
    mass: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = InfoError;
    fn try_from(r: RawJoint) -> Result<Self> {
        JointPmf::new(r.axes, r.mass)
    }
}

impl From<JointPmf> for RawJoint {
    fn from(j: JointPmf) -> Self {
        RawJoint { axes: j.axes, mass: j.mass }
    }
}

impl JointPmf {
    pub fn new(axes: Vec<Axis>, mass: Vec<f64>) -> Result<Self> {
        let expected = check_axes(&axes)?;
        if mass.len() != expected {
            return Err(InfoError::Shape { expected, got: mass.len() });
        }
        check_masses(&mass)?;
        Ok(Self { axes, mass })
    }

    /// Builds a joint from `(name, size)` pairs.
    pub fn from_sizes(axes: &[(&str, usize)], mass: Vec<f64>) -> Result<Self> {
        Self::new(axes.iter().map(|&(n, s)| Axis::new(n, s)).collect(), mass)
    }

    /// Product of independent marginals, one axis per factor.
    pub fn product(factors: &[(&str, &Pmf)]) -> Result<Self> {
        let axes: Vec<Axis> = factors.iter().map(|(n, p)| Axis::new(*n, p.support_size())).collect();
        let mut mass = vec![1.0];
        for (_, p) in factors {
            mass = mass
                .iter()
                .flat_map(|&a| p.mass().iter().map(move |&b| a * b))
                .collect();
        }
        Self::new(axes, mass)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn axis_size(&self, name: &str) -> Result<usize> {
        Ok(self.axes[self.position(name)?].size)
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| InfoError::UnknownAxis(name.to_string()))
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(InfoError::DuplicateAxis(n.to_string()));
            }
            out.push(self.position(n)?);
        }
        Ok(out)
    }

    fn marginal_mass(&self, pos: &[usize]) -> Vec<f64> {
        let sizes: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        // stride of each source axis inside the target table
        let mut tstride = vec![0usize; sizes.len()];
        let mut s = 1;
        for &p in pos.iter().rev() {
            tstride[p] = s;
            s *= sizes[p];
        }
        let mut out = vec![0.0; s];
        let mut idx = vec![0usize; sizes.len()];
        let mut t = 0usize;
        for &m in &self.mass {
            out[t] += m;
            // odometer increment, last axis fastest
            for k in (0..sizes.len()).rev() {
                idx[k] += 1;
                t += tstride[k];
                if idx[k] < sizes[k] {
                    break;
                }
                t -= tstride[k] * sizes[k];
                idx[k] = 0;
            }
        }
        out
    }

    /// Marginal on `names`, in the given order.
    pub fn marginal(&self, names: &[&str]) -> Result<JointPmf> {
        let pos = self.positions(names)?;
        let axes = pos.iter().map(|&p| self.axes[p].clone()).collect();
        Ok(JointPmf { axes, mass: self.marginal_mass(&pos) })
    }

    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        let pos = self.positions(names)?;
        Ok(entropy_of(&self.marginal_mass(&pos)))
    }

    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        disjoint(&[target, given])?;
        let both: Vec<&str> = target.iter().chain(given).copied().collect();
        Ok(self.entropy(&both)? - self.entropy(given)?)
    }

    pub fn mutual_information(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        disjoint(&[a, b, given])?;
        if a.is_empty() || b.is_empty() {
            // still validate names
            self.positions(a)?;
            self.positions(b)?;
            self.positions(given)?;
            return Ok(0.0);
        }
        let bg: Vec<&str> = b.iter().chain(given).copied().collect();
        Ok(self.conditional_entropy(a, given)? - self.conditional_entropy(a, &bg)?)
    }
}

fn disjoint(sets: &[&[&str]]) -> Result<()> {
    for (i, s) in sets.iter().enumerate() {
        for t in &sets[i + 1..] {
            if let Some(n) = s.iter().find(|n| t.contains(n)) {
                return Err(InfoError::Overlap(n.to_string()));
            }
        }
    }
    Ok(())
}

pub fn entropy(j: &JointPmf, axes: &[&str]) -> Result<f64> {
    j.entropy(axes)
}

pub fn conditional_entropy(j: &JointPmf, target: &[&str], given: &[&str]) -> Result<f64> {
    j.conditional_entropy(target, given)
}

pub fn mutual_information(j: &JointPmf, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
    j.mutual_information(a, b, given)
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    from: Vec<Axis>,
    to: Vec<Axis>,
    rows: Vec<Vec<f64>>,
}

/// Conditional distribution: one row per cell of `from`, each a pmf over the cells of `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct ConditionalKernel {
    from: Vec<Axis>,
    to: Vec<Axis>,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawKernel> for ConditionalKernel {
    type Error = InfoError;
    fn try_from(r: RawKernel) -> Result<Self> {
        ConditionalKernel::new(r.from, r.to, r.rows)
    }
}

impl From<ConditionalKernel> for RawKernel {
    fn from(k: ConditionalKernel) -> Self {
        RawKernel { from: k.from, to: k.to, rows: k.rows }
    }
}

impl ConditionalKernel {
    pub fn new(from: Vec<Axis>, to: Vec<Axis>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_from = check_axes(&from)?;
        let n_to = check_axes(&to)?;
        if let Some(a) = from.iter().find(|a| to.iter().any(|b| b.name == a.name)) {
            return Err(InfoError::Overlap(a.name.clone()));
        }
        if rows.len() != n_from {
            return Err(InfoError::Shape { expected: n_from, got: rows.len() });
        }
        for r in &rows {
            if r.len() != n_to {
                return Err(InfoError::Shape { expected: n_to, got: r.len() });
            }
            check_masses(r)?;
        }
        Ok(Self { from, to, rows })
    }

    pub fn from_axes(&self) -> &[Axis] {
        &self.from
    }

    pub fn to_axes(&self) -> &[Axis] {
        &self.to
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Joint of `input` (over `from`) and this kernel, axes `from ++ to`.
    pub fn compose(&self, input: &Pmf) -> Result<JointPmf> {
        if input.support_size() != self.rows.len() {
            return Err(InfoError::Shape { expected: self.rows.len(), got: input.support_size() });
        }
        let mass = input
            .mass()
            .iter()
            .zip(&self.rows)
            .flat_map(|(&p, r)| r.iter().map(move |&w| p * w))
            .collect();
        let axes = self.from.iter().chain(&self.to).cloned().collect();
        JointPmf::new(axes, mass)
    }
}

/// `h_b(p)` in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(InfoError::Domain(p));
    }
    Ok(hb(p))
}

/// Unchecked binary entropy; arguments are clamped to `[0,1]`.
pub fn hb(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    neg_plogp(p) + neg_plogp(1.0 - p)
}

/// Inverse of `h_b` on `[0, 1/2]`, by bisection.
pub fn binary_entropy_inv(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(InfoError::Domain(y));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hb(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if y == 0.0 { 0.0 } else { 0.5 * (lo + hi) })
}

/// Residual of the Csiszár sum identity on a joint with axes `A1..An`, `B1..Bn`
/// and optionally `T`. Zero up to rounding for every input.
pub fn csiszar_residual(j: &JointPmf) -> Result<f64> {
    let names: Vec<&str> = j.axes().iter().map(|a| a.name.as_str()).collect();
    let has_t = names.contains(&"T");
    let pairs = names.len() - usize::from(has_t);
    if pairs == 0 || pairs % 2 != 0 {
        return Err(InfoError::Naming(format!("expected A1..An, B1..Bn[, T], got {names:?}")));
    }
    let n = pairs / 2;
    let a: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    let b: Vec<String> = (1..=n).map(|i| format!("B{i}")).collect();
    for name in a.iter().chain(&b) {
        if !names.contains(&name.as_str()) {
            return Err(InfoError::Naming(format!("missing axis {name}")));
        }
    }
    let t: Vec<&str> = if has_t { vec!["T"] } else { vec![] };
    let mut total = 0.0;
    for i in 0..n {
        let a_after: Vec<&str> = a[i + 1..].iter().map(String::as_str).collect();
        let b_before: Vec<&str> = b[..i].iter().map(String::as_str).collect();
        let mut g1 = b_before.clone();
        g1.extend(&t);
        let mut g2 = a_after.clone();
        g2.extend(&t);
        total += j.mutual_information(&a_after, &[b[i].as_str()], &g1)?;
        total -= j.mutual_information(&b_before, &[a[i].as_str()], &g2)?;
    }
    Ok(total)
}

/// `Z = g(X, S)` with `S` independent of `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRepresentation {
    pub s_pmf: Pmf,
    /// `g_table[x][s]` is the z symbol.
    pub g_table: Vec<Vec<usize>>,
}

impl FunctionalRepresentation {
    /// Pushes `p_x × p_s` through `g`, giving the flat `(x, z)` table.
    pub fn reconstruct(&self, p_x: &[f64], z_size: usize) -> Vec<f64> {
        let mut out = vec![0.0; p_x.len() * z_size];
        for (x, &px) in p_x.iter().enumerate() {
            for (s, &ps) in self.s_pmf.mass().iter().enumerate() {
                out[x * z_size + self.g_table[x][s]] += px * ps;
            }
        }
        out
    }
}

/// Inverse-CDF stacking: `S` indexes the cells of the common refinement of
/// every per-x CDF of `Z`, so `|S| ≤ |X|·|Z|`.
///
/// The first axis of `p_xz` is taken as `X`, the second as `Z`.
pub fn functional_representation(p_xz: &JointPmf) -> Result<FunctionalRepresentation> {
    if p_xz.axes().len() != 2 {
        return Err(InfoError::Naming("expected exactly two axes (X, Z)".into()));
    }
    let xs = p_xz.axes()[0].size;
    let zs = p_xz.axes()[1].size;
    let m = p_xz.mass();
    // per-x conditional CDFs; rows of zero mass get a point mass on z = 0
    let cdfs: Vec<Vec<f64>> = (0..xs)
        .map(|x| {
            let row = &m[x * zs..(x + 1) * zs];
            let px: f64 = row.iter().sum();
            let mut acc = 0.0;
            let mut c: Vec<f64> = if px > 0.0 {
                row.iter().map(|&w| {
                    acc += w / px;
                    acc
                })
                .collect()
            } else {
                vec![1.0; zs]
            };
            *c.last_mut().unwrap() = 1.0;
            c
        })
        .collect();
    let mut cuts: Vec<f64> = cdfs.iter().flatten().copied().filter(|&c| c > 0.0 && c < 1.0).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let widths: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    let g_table = cdfs
        .iter()
        .map(|c| {
            cuts.windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    c.iter().position(|&v| mid < v).unwrap_or(zs - 1)
                })
                .collect()
        })
        .collect();
    let total: f64 = widths.iter().sum();
    let s_pmf = Pmf::new(widths.iter().map(|w| w / total).collect())?;
    Ok(FunctionalRepresentation { s_pmf, g_table })
}
