//! Rate regions at a fixed auxiliary PMF, membership and support queries.
//!
//! Coordinates of a [`RateTuple`] are `(R, R_Y^p, R_Y^c, R_Z^p, R_Z^c)`: the
//! common rate, then each receiver's private rate split into the part unknown
//! and the part known to the other receiver. Kinds that describe a fixed
//! side-information setting state their rows on the sums `R_Y`, `R_Z` where the
//! split does not matter; kinds without a common message pin `R = 0`.

mod lp;
pub mod terms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{AuxiliaryInput, BroadcastChannel, ChannelError};
pub use lp::{solve_packing, LpOutcome};
pub use terms::InfoTerms;

/// Membership slack.
pub const SLACK_TOL: f64 = 1e-9;

pub const R: usize = 0;
pub const RYP: usize = 1;
pub const RYC: usize = 2;
pub const RZP: usize = 3;
pub const RZC: usize = 4;
pub const COORD_NAMES: [&str; 5] = ["R", "R_Y^p", "R_Y^c", "R_Z^p", "R_Z^c"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{kind:?} needs {what}")]
    MissingAxis { kind: RegionKind, what: String },
    #[error("the closed-form region needs a channel built by make_function_erasure")]
    NotFunctionErasure,
    #[error("X is not a function of (Y,U) at this input")]
    NotFunctional,
    #[error("R_Z = {r_z} is infeasible at this input (violation {violation})")]
    Infeasible { r_z: f64, violation: f64 },
}

pub type Result<T> = std::result::Result<T, RegionError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateTuple {
    pub r_common: f64,
    pub r_y_p: f64,
    pub r_y_c: f64,
    pub r_z_p: f64,
    pub r_z_c: f64,
}

impl RateTuple {
    pub fn new(r_common: f64, r_y_p: f64, r_y_c: f64, r_z_p: f64, r_z_c: f64) -> Self {
        Self { r_common, r_y_p, r_y_c, r_z_p, r_z_c }
    }
    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
    pub fn to_array(self) -> [f64; 5] {
        [self.r_common, self.r_y_p, self.r_y_c, self.r_z_p, self.r_z_c]
    }
    pub fn r_y(&self) -> f64 {
        self.r_y_p + self.r_y_c
    }
    pub fn r_z(&self) -> f64 {
        self.r_z_p + self.r_z_c
    }
    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&r| r >= 0.0)
    }
    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, other: &RateTuple, lambda: f64) -> RateTuple {
        let (a, b) = (self.to_array(), other.to_array());
        RateTuple::from_array(std::array::from_fn(|i| lambda * a[i] + (1.0 - lambda) * b[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Theorem1,
    Theorem1NoBinning,
    #[serde(rename = "Cor1_NoMsiAtZ")]
    Cor1NoMsiAtZ,
    #[serde(rename = "Cor2_FmsiAtY")]
    Cor2FmsiAtY,
    #[serde(rename = "Cor3_FmsiAtZ")]
    Cor3FmsiAtZ,
    #[serde(rename = "Cor4_FmsiBoth")]
    Cor4FmsiBoth,
    #[serde(rename = "Prop1_Enhanced")]
    Prop1Enhanced,
    #[serde(rename = "Cor5_EnhancedNoMsi")]
    Cor5EnhancedNoMsi,
    #[serde(rename = "AppI_ClosedForm")]
    AppIClosedForm,
}

/// Auxiliary variables a kind depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    VAndU,
    UOnly,
    XOnly,
}

impl RegionKind {
    pub const ALL: [RegionKind; 9] = [
        RegionKind::Theorem1,
        RegionKind::Theorem1NoBinning,
        RegionKind::Cor1NoMsiAtZ,
        RegionKind::Cor2FmsiAtY,
        RegionKind::Cor3FmsiAtZ,
        RegionKind::Cor4FmsiBoth,
        RegionKind::Prop1Enhanced,
        RegionKind::Cor5EnhancedNoMsi,
        RegionKind::AppIClosedForm,
    ];

    pub fn needs(self) -> Needs {
        use RegionKind::*;
        match self {
            Theorem1 | Theorem1NoBinning => Needs::VAndU,
            Cor1NoMsiAtZ | Cor2FmsiAtY | Prop1Enhanced | Cor5EnhancedNoMsi | AppIClosedForm => Needs::UOnly,
            Cor3FmsiAtZ | Cor4FmsiBoth => Needs::XOnly,
        }
    }

    /// Kinds describing a setting without a common message.
    pub fn pins_common(self) -> bool {
        use RegionKind::*;
        matches!(self, Cor1NoMsiAtZ | Prop1Enhanced | Cor5EnhancedNoMsi | AppIClosedForm)
    }

    /// Coordinates that carry `R_Y` and `R_Z` when a single rate per receiver is given.
    pub fn private_slots(self) -> (usize, usize) {
        use RegionKind::*;
        let y = if matches!(self, Cor3FmsiAtZ | Cor4FmsiBoth) { RYC } else { RYP };
        let z = if matches!(self, Cor2FmsiAtY | Cor4FmsiBoth) { RZC } else { RZP };
        (y, z)
    }

    pub fn parse(s: &str) -> Option<RegionKind> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        RegionKind::ALL.into_iter().find(|k| {
            let name = format!("{k:?}").to_lowercase();
            name == norm || name.starts_with(&norm) && norm.len() >= 4
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: [u8; 5],
    pub rhs: f64,
    pub label: String,
}

impl Constraint {
    pub fn new(coeffs: [u8; 5], rhs: f64, label: &str) -> Self {
        Self { coeffs, rhs, label: label.to_string() }
    }
    pub fn lhs(&self, t: &RateTuple) -> f64 {
        self.coeffs.iter().zip(t.to_array()).map(|(&c, r)| c as f64 * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAtPmf {
    pub kind: RegionKind,
    pub constraints: Vec<Constraint>,
    /// Coordinates fixed to zero by the kind.
    pub pinned_zero: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    /// `rhs − lhs` per constraint.
    pub slack: Vec<f64>,
    /// Largest value on a pinned coordinate.
    pub pinned_excess: f64,
}

/// Result of maximizing a weighted sum over a region.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Optimal { value: f64, point: RateTuple },
    /// Lower bounds cannot be met; carries the total shortfall.
    Infeasible { shortfall: f64 },
    Unbounded,
}

impl RegionAtPmf {
    pub fn contains(&self, t: &RateTuple) -> Membership {
        contains(self, t)
    }

    /// `max w·t` over the region with `t ≥ lower` coordinatewise.
    pub fn support(&self, weights: &[f64; 5], lower: &[f64; 5]) -> Support {
        let free: Vec<usize> = (0..5).filter(|i| !self.pinned_zero.contains(i)).collect();
        let mut shortfall = 0.0;
        for &p in &self.pinned_zero {
            shortfall += lower[p].max(0.0);
        }
        let lo = RateTuple::from_array(std::array::from_fn(|i| lower[i].max(0.0)));
        let mut b = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let room = c.rhs.max(0.0) - c.lhs(&lo);
            if room < -1e-12 {
                shortfall -= room;
            }
            b.push(room);
        }
        if shortfall > 0.0 {
            return Support::Infeasible { shortfall };
        }
        let a: Vec<Vec<f64>> =
            self.constraints.iter().map(|c| free.iter().map(|&i| c.coeffs[i] as f64).collect()).collect();
        let w: Vec<f64> = free.iter().map(|&i| weights[i]).collect();
        match solve_packing(&w, &a, &b) {
            LpOutcome::Unbounded => Support::Unbounded,
            LpOutcome::Optimal { point, .. } => {
                let mut full = lo.to_array();
                for (k, &i) in free.iter().enumerate() {
                    full[i] += point[k];
                }
                for &p in &self.pinned_zero {
                    full[p] = 0.0;
                }
                let value = full.iter().zip(weights).map(|(a, b)| a * b).sum();
                Support::Optimal { value, point: RateTuple::from_array(full) }
            }
        }
    }
}

/// Builds the region of `kind` from precomputed terms.
pub fn region_from_terms(kind: RegionKind, t: &InfoTerms) -> Result<RegionAtPmf> {
    use RegionKind::*;
    let c = Constraint::new;
    let thm1 = || {
        vec![
            c([1, 1, 1, 0, 0], t.h_y, "R+R_Y <= H(Y)"),
            c([1, 0, 0, 1, 1], t.i_u_z, "R+R_Z <= I(U;Z)"),
            c([1, 1, 1, 1, 0], t.i_v_y + t.h_y_given_u + t.i_u_z_given_v, "R+R_Y+R_Z^p <= I(V;Y)+H(Y|U)+I(U;Z|V)"),
            c([1, 1, 0, 1, 1], t.h_y_given_u + t.i_u_z, "R+R_Y^p+R_Z <= H(Y|U)+I(U;Z)"),
            c([2, 1, 1, 1, 1], t.i_v_y + t.h_y_given_u + t.i_u_z, "2R+R_Y+R_Z <= I(V;Y)+H(Y|U)+I(U;Z)"),
        ]
    };
    let constraints = match kind {
        Theorem1 => thm1(),
        Theorem1NoBinning => {
            let mut v = thm1();
            v.push(c([0, 1, 0, 0, 0], t.h_y_given_v, "R_Y^p <= H(Y|V)"));
            v.push(c([0, 0, 0, 1, 0], t.i_u_z_given_v, "R_Z^p <= I(U;Z|V)"));
            v.push(c([0, 1, 0, 1, 0], t.h_y_given_u + t.i_u_z_given_v, "R_Y^p+R_Z^p <= H(Y|U)+I(U;Z|V)"));
            v
        }
        Cor1NoMsiAtZ => vec![
            c([0, 1, 1, 0, 0], t.h_y, "R_Y <= H(Y)"),
            c([0, 0, 0, 1, 1], t.i_u_z, "R_Z <= I(U;Z)"),
            c([0, 1, 1, 1, 1], t.h_y_given_u + t.i_u_z, "R_Y+R_Z <= H(Y|U)+I(U;Z)"),
        ],
        Cor2FmsiAtY => vec![
            c([1, 1, 1, 0, 0], t.h_y, "R+R_Y <= H(Y)"),
            c([1, 0, 0, 1, 1], t.i_u_z, "R+R_Z <= I(U;Z)"),
            c([1, 1, 0, 1, 1], t.h_y_given_u + t.i_u_z, "R+R_Y^p+R_Z <= H(Y|U)+I(U;Z)"),
        ],
        Cor3FmsiAtZ => vec![
            c([1, 1, 1, 0, 0], t.h_y, "R+R_Y <= H(Y)"),
            c([1, 0, 0, 1, 1], t.i_x_z, "R+R_Z <= I(X;Z)"),
            c([1, 1, 1, 1, 0], t.i_x_yz, "R+R_Y+R_Z^p <= I(X;Y,Z)"),
        ],
        Cor4FmsiBoth => vec![
            c([1, 1, 1, 0, 0], t.h_y, "R+R_Y <= H(Y)"),
            c([1, 0, 0, 1, 1], t.i_x_z, "R+R_Z <= I(X;Z)"),
        ],
        Prop1Enhanced => vec![
            c([0, 0, 0, 1, 1], t.i_u_z, "R_Z <= I(U;Z)"),
            c([0, 1, 1, 1, 0], t.i_x_yz, "R_Y+R_Z^p <= I(X;Y,Z)"),
            c([0, 1, 0, 1, 1], t.i_x_yz_given_u + t.i_u_z, "R_Y^p+R_Z <= I(X;Y,Z|U)+I(U;Z)"),
        ],
        Cor5EnhancedNoMsi => vec![
            c([0, 1, 1, 0, 0], t.i_x_yz_given_u, "R_Y <= I(X;Y,Z|U)"),
            c([0, 0, 0, 1, 1], t.i_u_z, "R_Z <= I(U;Z)"),
        ],
        AppIClosedForm => {
            let (Some(p), Some(s)) = (t.erasure_p, t.avg_log_class) else {
                return Err(RegionError::NotFunctionErasure);
            };
            let q = 1.0 - p;
            vec![
                c([0, 1, 1, 0, 0], t.h_y, "R_Y <= H(Y)"),
                c([0, 0, 0, 1, 1], q * t.i_u_y + q * s, "R_Z <= (1-p)I(U;Y)+(1-p)E[log|X_Y|]"),
                c([0, 1, 1, 1, 1], t.h_y - p * t.i_u_y + q * s, "R_Y+R_Z <= H(Y)-pI(U;Y)+(1-p)E[log|X_Y|]"),
            ]
        }
    };
    let pinned_zero = if kind.pins_common() { vec![R] } else { vec![] };
    Ok(RegionAtPmf { kind, constraints, pinned_zero })
}

fn check_dims(kind: RegionKind, c: &BroadcastChannel, a: &AuxiliaryInput) -> Result<()> {
    if a.x_size() != c.x_size() {
        return Err(RegionError::MissingAxis {
            kind,
            what: format!("an input over |X| = {} (got {})", c.x_size(), a.x_size()),
        });
    }
    Ok(())
}

pub fn evaluate(kind: RegionKind, c: &BroadcastChannel, a: &AuxiliaryInput) -> Result<RegionAtPmf> {
    if kind == RegionKind::AppIClosedForm {
        return function_erasure_region(c, a);
    }
    check_dims(kind, c, a)?;
    region_from_terms(kind, &InfoTerms::compute(c, a))
}

/// The closed-form region of a function-erasure channel; requires X to be a
/// function of (Y,U) at `a`.
pub fn function_erasure_region(c: &BroadcastChannel, a: &AuxiliaryInput) -> Result<RegionAtPmf> {
    check_dims(RegionKind::AppIClosedForm, c, a)?;
    let Some(crate::channels::NamedChannel::FunctionErasure { f, .. }) = c.origin() else {
        return Err(RegionError::NotFunctionErasure);
    };
    if !a.x_is_function_of_yu(f, 1e-12) {
        return Err(RegionError::NotFunctional);
    }
    region_from_terms(RegionKind::AppIClosedForm, &InfoTerms::compute(c, a))
}

pub fn contains(r: &RegionAtPmf, t: &RateTuple) -> Membership {
    let slack: Vec<f64> = r.constraints.iter().map(|c| c.rhs - c.lhs(t)).collect();
    let arr = t.to_array();
    let pinned_excess = r.pinned_zero.iter().map(|&i| arr[i]).fold(0.0, f64::max);
    let inside = slack.iter().all(|&s| s >= -SLACK_TOL)
        && pinned_excess <= SLACK_TOL
        && arr.iter().all(|&x| x >= -SLACK_TOL);
    Membership { inside, slack, pinned_excess }
}

/// Largest `R_Y` with `R = 0` and `R_Z = r_z`, each placed in the kind's
/// private slot (see [`RegionKind::private_slots`]).
pub fn max_rate_y_given_z(kind: RegionKind, c: &BroadcastChannel, a: &AuxiliaryInput, r_z: f64) -> Result<f64> {
    max_rate_y_given_z_at(&evaluate(kind, c, a)?, r_z)
}

pub fn max_rate_y_given_z_at(region: &RegionAtPmf, r_z: f64) -> Result<f64> {
    let (ys, zs) = region.kind.private_slots();
    let mut best = f64::INFINITY;
    let mut worst_violation: f64 = 0.0;
    for con in &region.constraints {
        let room = con.rhs - con.coeffs[zs] as f64 * r_z;
        let cy = con.coeffs[ys] as f64;
        if cy > 0.0 {
            best = best.min(room / cy);
        } else if room < -SLACK_TOL {
            worst_violation = worst_violation.max(-room);
        }
    }
    if r_z < 0.0 || worst_violation > 0.0 || best < -SLACK_TOL {
        return Err(RegionError::Infeasible { r_z, violation: worst_violation.max(-best).max(-r_z) });
    }
    Ok(best.max(0.0))
}
