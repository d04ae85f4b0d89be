//! Two-phase feedback scheme: achievable points, sufficient-condition
//! checkers, gain certificates for the adder-erasure channel and harnesses
//! comparing no-feedback regions with feedback outer bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{make_adder_erasure, make_function_erasure, AuxiliaryInput, BroadcastChannel, ChannelError};
use crate::info::{binary_entropy_inv, entropy, hb, mutual_information, JointPmf, ZERO_MASS};
use crate::optimizer::{
    boundary_r_y, find_certificate, maximize, perturbed_adder_input, search_score, symmetric_adder_search, warm_starts,
    Objective, OptError, RegionFamily, SearchConfig, CERT_TOL,
};
use crate::regions::{
    contains, evaluate, Constraint, InfoTerms, Needs, RateTuple, RegionAtPmf, RegionError, RegionKind, R, SLACK_TOL,
};

/// Margin required by the strict conditions of the sufficient-condition checks.
pub const STRICT_MARGIN: f64 = 1e-6;
/// A point is on the boundary when the boundary search lands within this.
pub const BOUNDARY_TOL: f64 = 1e-4;
/// Pushing a boundary point out by this must leave the region.
pub const BOUNDARY_PUSH: f64 = 1e-3;
/// Required interior margin in the enhanced region.
pub const ENHANCED_MARGIN: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("alpha-bound: alpha = {alpha} exceeds {bound}")]
    AlphaBound { alpha: f64, bound: f64 },
    #[error("hatRYc-bound: {hat} exceeds {bound}")]
    HatBound { hat: f64, bound: f64 },
    #[error("Prop1-membership: phase-1 tuple misses the enhanced region by {violation}")]
    Prop1Membership { violation: f64 },
    #[error("Theorem1-membership: phase-2 tuple misses the region by {violation}")]
    Theorem1Membership { violation: f64 },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("no certificate found within the search budget")]
    NotFound,
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub type Result<T> = std::result::Result<T, FeedbackError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Feedback-link rate limit in bits per channel use.
    pub r_fb: f64,
    /// Fraction of channel uses in the first phase.
    pub alpha: f64,
}

impl FeedbackConfig {
    /// Feedback at rate `log|Z|`, as good as perfect feedback.
    pub fn perfect(c: &BroadcastChannel, alpha: f64) -> Self {
        Self { r_fb: (c.z_size() as f64).log2(), alpha }
    }
}

/// Largest admissible phase-1 fraction.
pub fn alpha_bound(r_y_c: f64, h_z_given_y: f64, r_fb: f64) -> f64 {
    if h_z_given_y <= ZERO_MASS {
        return 1.0;
    }
    (r_y_c / (r_y_c + h_z_given_y)).min(r_fb / h_z_given_y)
}

/// Largest fresh rate left in the `R_Y^c` slot after sending the compression index.
pub fn hat_bound(r_y_c: f64, alpha: f64, h_z_given_y: f64) -> f64 {
    if h_z_given_y <= ZERO_MASS {
        r_y_c
    } else {
        r_y_c - alpha / (1.0 - alpha) * h_z_given_y
    }
}

fn worst_violation(r: &RegionAtPmf, t: &RateTuple) -> Option<f64> {
    let m = contains(r, t);
    if m.inside {
        None
    } else {
        let neg = t.to_array().iter().fold(0.0f64, |w, &x| w.max(-x));
        Some(m.slack.iter().fold(m.pinned_excess.max(neg), |w, &s| w.max(-s)))
    }
}

/// Rate tuple of the two-phase scheme: `α·tilde + (1−α)·fresh'`, where
/// `fresh'` is `fresh` with its `R_Y^c` replaced by `hat_r_y_c`.
///
/// `phase1` is the input of the first phase (only its `U` part matters) and
/// `fresh_input` certifies `fresh` in the Theorem-1 region.
pub fn prop2_point(
    c: &BroadcastChannel,
    phase1: &AuxiliaryInput,
    tilde: &RateTuple,
    fresh: &RateTuple,
    fresh_input: &AuxiliaryInput,
    fb: &FeedbackConfig,
    hat_r_y_c: f64,
) -> Result<RateTuple> {
    let t1 = InfoTerms::compute(c, phase1);
    let enh = evaluate(RegionKind::Prop1Enhanced, c, phase1)?;
    if let Some(v) = worst_violation(&enh, tilde) {
        return Err(FeedbackError::Prop1Membership { violation: v });
    }
    let thm = evaluate(RegionKind::Theorem1, c, fresh_input)?;
    if let Some(v) = worst_violation(&thm, fresh) {
        return Err(FeedbackError::Theorem1Membership { violation: v });
    }
    let h = t1.h_z_given_y;
    let bound = alpha_bound(fresh.r_y_c, h, fb.r_fb);
    if !(fb.alpha >= 0.0) || fb.alpha > bound + 1e-12 || (fb.alpha >= 1.0 && h > ZERO_MASS) {
        return Err(FeedbackError::AlphaBound { alpha: fb.alpha, bound });
    }
    let hb_max = if fb.alpha >= 1.0 { fresh.r_y_c } else { hat_bound(fresh.r_y_c, fb.alpha, h) };
    if !(hat_r_y_c >= 0.0) || hat_r_y_c > hb_max + 1e-12 {
        return Err(FeedbackError::HatBound { hat: hat_r_y_c, bound: hb_max });
    }
    let mut second = *fresh;
    second.r_y_c = hat_r_y_c;
    Ok(tilde.mix(&second, fb.alpha))
}

/// Result of the erased-`V` construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Point {
    pub r_y_c: f64,
    pub epsilon: f64,
    pub input: AuxiliaryInput,
}

/// Largest `R_Y^c` allowed at `a` for the rates `(R_Y^p, ·, R_Z^p, R_Z^c)`
/// (common rate zero): the minimum of the three Theorem-1 rows that involve it.
pub fn r_y_c_room(t: &InfoTerms, rates: &RateTuple) -> f64 {
    let b1 = t.h_y - rates.r_y_p;
    let b2 = t.h_y_given_u + t.i_u_z + t.i_v_y - t.i_v_z - rates.r_y_p - rates.r_z_p;
    let b3 = t.h_y_given_u + t.i_u_z + t.i_v_y - rates.r_y_p - rates.r_z_p - rates.r_z_c;
    b1.min(b2).min(b3)
}

/// `V` equal to `U` with probability `epsilon` and an erasure symbol otherwise.
pub fn erased_copy(a: &AuxiliaryInput, epsilon: f64) -> AuxiliaryInput {
    let us = a.u_size();
    let pu = a.p_u();
    let mut vu = vec![0.0; (us + 1) * us];
    for u in 0..us {
        vu[u * us + u] = epsilon * pu[u];
        vu[us * us + u] = (1.0 - epsilon) * pu[u];
    }
    AuxiliaryInput::new(us + 1, us, vu, a.p_x_given_u().rows().to_vec()).expect("valid mixture")
}

/// Builds the erased-`V` input from `a` and returns the largest positive
/// `R_Y^c` for which `(0, R_Y^p, R_Y^c, R_Z^p, R_Z^c)` is in the Theorem-1
/// region, provided the base conditions hold at `a`.
pub fn lemma2_construct(c: &BroadcastChannel, a: &AuxiliaryInput, rates: &RateTuple, epsilon: f64) -> Option<Lemma2Point> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return None;
    }
    let base = InfoTerms::compute(c, a);
    let base_ok = rates.r_y_p < base.h_y
        && rates.r_z() <= base.i_u_z + SLACK_TOL
        && rates.r_y_p + rates.r_z() <= base.h_y_given_u + base.i_u_z + SLACK_TOL
        && base.i_u_y > 0.0;
    if !base_ok {
        return None;
    }
    let input = erased_copy(a, epsilon);
    let t = InfoTerms::compute(c, &input);
    let r_y_c = r_y_c_room(&t, rates);
    if !(r_y_c > 0.0) {
        return None;
    }
    let point = RateTuple::new(0.0, rates.r_y_p, r_y_c, rates.r_z_p, rates.r_z_c);
    let region = evaluate(RegionKind::Theorem1, c, &input).ok()?;
    contains(&region, &point).inside.then_some(Lemma2Point { r_y_c, epsilon, input })
}

// ---- adder-erasure closed forms ----

/// Cross-output probability that maximizes the sum rate.
pub fn adder_p2_star(p: f64) -> f64 {
    1.0 / (1.0 + 2f64.powf(1.0 / p))
}

/// `R_Z` at the sum-rate-optimal boundary point.
pub fn adder_rz_star(p: f64) -> f64 {
    (1.0 - p) * (1.0 - hb(adder_p2_star(p)))
}

pub fn adder_sum_rate_capacity(p: f64) -> f64 {
    let p2 = adder_p2_star(p);
    2.0 - p - p2 + p * hb(p2)
}

/// Largest `R_Y` without feedback at `r_z ∈ [R_Z*, 1−p]`.
pub fn adder_boundary(p: f64, r_z: f64) -> f64 {
    let q = 1.0 - p;
    let s = (1.0 - r_z / q).clamp(0.0, 1.0);
    2.0 - r_z / q - binary_entropy_inv(s).unwrap_or(0.5)
}

/// `I(U;Y) − I(U;Z)` at the symmetric construction.
pub fn adder_gap(p: f64, p2: f64) -> f64 {
    hb((1.0 - p2) / 2.0) - hb(p2) + (3.0 * p2 - 1.0) / 2.0 - (1.0 - p) * (1.0 - hb(p2))
}

fn plogp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// `I(X;Y,Z|U)` at [`perturbed_adder_input`]`(p2, eps)`.
pub fn adder_enhanced_rate(p: f64, eps: f64, p2: f64) -> f64 {
    let a = (1.0 - p2) / 2.0;
    let b = (1.0 - (1.0 - 2.0 * eps) * p2) / 2.0;
    let cc = (1.0 - eps) * p2;
    (1.0 - p) * (hb(p2) + 1.0 - p2 + p2 * hb(eps)) - p * (plogp(a) + plogp(b) + plogp(cc))
}

// ---- gain certificates ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GainMode {
    /// No side information at either receiver.
    #[serde(rename = "no_msi")]
    NoMsi,
    /// Partial side information at the deterministic receiver (sum rate).
    #[serde(rename = "pmsi_y")]
    PmsiAtY,
}

impl GainMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "no_msi" => Some(GainMode::NoMsi),
            "pmsi_y" => Some(GainMode::PmsiAtY),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GainMode::NoMsi => "no_msi",
            GainMode::PmsiAtY => "pmsi_y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBudget {
    /// Grid points for the cross-output probability.
    pub p2_grid: usize,
    /// Logarithmic grid points for the perturbation.
    pub eps_grid: usize,
    pub golden_iters: usize,
    /// Grid points for the erasure probability of the erased `V`.
    pub erasure_grid: usize,
}

impl Default for GainBudget {
    fn default() -> Self {
        Self { p2_grid: 64, eps_grid: 40, golden_iters: 60, erasure_grid: 200 }
    }
}

impl GainBudget {
    /// Scales every grid with a single size knob.
    pub fn scaled(n: usize) -> Self {
        let n = n.max(4);
        Self { p2_grid: n, eps_grid: (n / 2).max(8), golden_iters: 60, erasure_grid: 3 * n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    pub p: f64,
    pub mode: GainMode,
    pub p2: f64,
    pub epsilon: f64,
    /// `(R_Y, R_Z)` on the no-feedback boundary.
    pub base_point: (f64, f64),
    pub phase1_input: AuxiliaryInput,
    pub fresh_input: AuxiliaryInput,
    pub tilde: RateTuple,
    pub fresh: RateTuple,
    pub r_fb: f64,
    pub alpha: f64,
    pub hat_r_y_c: f64,
    pub h_z_given_y: f64,
    pub achieved: RateTuple,
    /// How far the achieved tuple lies beyond the no-feedback boundary.
    pub margin: f64,
}

/// No-feedback reference for the mode: the boundary `R_Y` at the achieved
/// `R_Z`, or the sum-rate capacity.
fn gain_margin(p: f64, mode: GainMode, achieved: &RateTuple) -> f64 {
    match mode {
        GainMode::NoMsi => achieved.r_y() - adder_boundary(p, achieved.r_z()),
        GainMode::PmsiAtY => achieved.r_y() + achieved.r_z() - adder_sum_rate_capacity(p),
    }
}

struct Phase2 {
    p2: f64,
    fresh: RateTuple,
    fresh_input: AuxiliaryInput,
}

fn assemble(c: &BroadcastChannel, p: f64, mode: GainMode, fresh: &Phase2, eps: f64, r_fb: f64) -> Option<GainCertificate> {
    let phase1_input = perturbed_adder_input(fresh.p2, eps).ok()?;
    let t1 = InfoTerms::compute(c, &phase1_input);
    let tilde = match mode {
        GainMode::NoMsi => RateTuple::new(0.0, t1.i_x_yz_given_u, 0.0, t1.i_u_z, 0.0),
        GainMode::PmsiAtY => RateTuple::new(0.0, t1.i_x_yz_given_u, 0.0, 0.0, t1.i_u_z),
    };
    let alpha = alpha_bound(fresh.fresh.r_y_c, t1.h_z_given_y, r_fb).min(1.0 - 1e-12);
    let fb = FeedbackConfig { r_fb, alpha };
    // the deterministic receiver's fresh message is unknown at Z, so the
    // known-to-Z slot carries only the compression index
    let hat = 0.0;
    let achieved = prop2_point(c, &phase1_input, &tilde, &fresh.fresh, &fresh.fresh_input, &fb, hat).ok()?;
    let margin = gain_margin(p, mode, &achieved);
    let base = InfoTerms::compute(c, &fresh.fresh_input);
    Some(GainCertificate {
        p,
        mode,
        p2: fresh.p2,
        epsilon: eps,
        base_point: (base.h_y_given_u, base.i_u_z),
        phase1_input,
        fresh_input: fresh.fresh_input.clone(),
        tilde,
        fresh: fresh.fresh,
        r_fb,
        alpha,
        hat_r_y_c: hat,
        h_z_given_y: t1.h_z_given_y,
        achieved,
        margin,
    })
}

/// Best perturbation for a fixed phase-2 choice: log grid, then golden
/// section around the best grid point.
fn best_epsilon(
    c: &BroadcastChannel,
    p: f64,
    mode: GainMode,
    fresh: &Phase2,
    r_fb: f64,
    budget: &GainBudget,
) -> Option<GainCertificate> {
    let score = |eps: f64| assemble(c, p, mode, fresh, eps, r_fb).map(|g| g.margin).unwrap_or(f64::NEG_INFINITY);
    let n = budget.eps_grid.max(2);
    let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
    let grid: Vec<f64> = (0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()).collect();
    let vals: Vec<f64> = grid.iter().map(|&e| score(e)).collect();
    let k = (0..n).max_by(|&i, &j| vals[i].total_cmp(&vals[j]))?;
    if !(vals[k] > 0.0) {
        return None;
    }
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut best = (vals[k], grid[k]);
    for _ in 0..budget.golden_iters {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        let (f1, f2) = (score(x1), score(x2));
        for (f, x) in [(f1, x1), (f2, x2)] {
            if f > best.0 {
                best = (f, x);
            }
        }
        if f1 >= f2 {
            b = x2;
        } else {
            a = x1;
        }
    }
    assemble(c, p, mode, fresh, best.1, r_fb)
}

fn better(a: Option<GainCertificate>, b: Option<GainCertificate>) -> Option<GainCertificate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.margin > x.margin { y } else { x }),
        (x, y) => x.or(y),
    }
}

/// Gain search without side information through the `V = U` route, without
/// the `p > 1/2` precondition.
pub fn no_msi_route(p: f64, r_fb: f64, budget: &GainBudget) -> Result<Option<GainCertificate>> {
    let c = make_adder_erasure(p)?;
    let ps = adder_p2_star(p);
    let n = budget.p2_grid.max(1);
    let mut best = None;
    for k in 1..=n {
        let p2 = ps * k as f64 / n as f64;
        let fresh_input = symmetric_adder_search(p, p2)?;
        let t = InfoTerms::compute(&c, &fresh_input);
        let rates = RateTuple::new(0.0, t.h_y_given_u, 0.0, t.i_u_z, 0.0);
        let room = r_y_c_room(&t, &rates);
        if !(room > 1e-9) {
            continue;
        }
        let fresh = Phase2 { p2, fresh: RateTuple { r_y_c: room, ..rates }, fresh_input };
        best = better(best, best_epsilon(&c, p, GainMode::NoMsi, &fresh, r_fb, budget));
    }
    Ok(best)
}

/// Gain search with partial side information at the deterministic receiver:
/// the sum-rate-optimal point plus an erased-`V` phase-2 code.
pub fn pmsi_route(p: f64, r_fb: f64, budget: &GainBudget) -> Result<Option<GainCertificate>> {
    let c = make_adder_erasure(p)?;
    let p2 = adder_p2_star(p);
    let base = symmetric_adder_search(p, p2)?;
    let t = InfoTerms::compute(&c, &base);
    let rates = RateTuple::new(0.0, t.h_y_given_u, 0.0, 0.0, t.i_u_z);
    let n = budget.erasure_grid.max(1);
    let lemma = (1..=n)
        .filter_map(|k| lemma2_construct(&c, &base, &rates, 0.999 * k as f64 / n as f64))
        .fold(None::<Lemma2Point>, |best, l| match best {
            Some(b) if b.r_y_c >= l.r_y_c => Some(b),
            _ => Some(l),
        });
    let Some(l) = lemma else { return Ok(None) };
    let fresh = Phase2 { p2, fresh: RateTuple { r_y_c: l.r_y_c, ..rates }, fresh_input: l.input };
    Ok(best_epsilon(&c, p, GainMode::PmsiAtY, &fresh, r_fb, budget))
}

/// Searches for a feedback-gain certificate on the adder-erasure channel.
pub fn certify_adder_gain(p: f64, mode: GainMode, r_fb: f64, budget: &GainBudget) -> Result<GainCertificate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FeedbackError::Precondition(format!("erasure probability must lie in (0,1), got {p}")));
    }
    if !(r_fb > 0.0) {
        return Err(FeedbackError::Precondition(format!("feedback rate must be positive, got {r_fb}")));
    }
    let found = match mode {
        GainMode::NoMsi => {
            if p <= 0.5 {
                return Err(FeedbackError::Precondition(format!(
                    "without side information the gain needs p > 1/2, got {p}"
                )));
            }
            no_msi_route(p, r_fb, budget)?
        }
        GainMode::PmsiAtY => pmsi_route(p, r_fb, budget)?,
    };
    found.filter(|g| g.margin > 0.0).ok_or(FeedbackError::NotFound)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub achieved: Option<RateTuple>,
    pub margin: Option<f64>,
    pub checks: Vec<CertificateCheck>,
}

/// Re-validates a certificate from scratch.
pub fn verify_certificate(cert: &GainCertificate) -> VerifyReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        checks.push(CertificateCheck { name: name.to_string(), pass, detail });
    };
    let c = match make_adder_erasure(cert.p) {
        Ok(c) => c,
        Err(e) => {
            push("channel", false, e.to_string());
            return VerifyReport { pass: false, achieved: None, margin: None, checks };
        }
    };
    let fb = FeedbackConfig { r_fb: cert.r_fb, alpha: cert.alpha };
    let achieved =
        match prop2_point(&c, &cert.phase1_input, &cert.tilde, &cert.fresh, &cert.fresh_input, &fb, cert.hat_r_y_c) {
            Ok(t) => {
                push("prop2", true, "phase-1, phase-2, alpha and hat bounds hold".into());
                Some(t)
            }
            Err(e) => {
                push("prop2", false, e.to_string());
                None
            }
        };
    let h = InfoTerms::compute(&c, &cert.phase1_input).h_z_given_y;
    push("h_z_given_y", (h - cert.h_z_given_y).abs() <= 1e-9, format!("recomputed {h}"));
    let mut margin = None;
    if let Some(t) = achieved {
        let diff = t.to_array().iter().zip(cert.achieved.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        push("achieved", diff <= 1e-9, format!("max coordinate difference {diff:e}"));
        let side_info_ok = t.r_y_c.abs() <= 1e-12 && (cert.mode == GainMode::PmsiAtY || t.r_z_c.abs() <= 1e-12);
        push("side_information", side_info_ok, format!("R_Y^c = {}, R_Z^c = {}", t.r_y_c, t.r_z_c));
        let m = gain_margin(cert.p, cert.mode, &t);
        push("margin", m > 0.0 && (m - cert.margin).abs() <= 1e-9, format!("recomputed {m}"));
        margin = Some(m);
    }
    let pass = checks.iter().all(|k| k.pass);
    VerifyReport { pass, achieved, margin, checks }
}

// ---- sufficient-condition checks ----

/// Numeric evidence that `(R_Y, R_Z)` is on the no-feedback boundary and in
/// the interior of the enhanced region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEvidence {
    pub r_y_max: f64,
    pub on_boundary: bool,
    pub push_y_certified: bool,
    pub push_z_certified: bool,
    pub enhanced_interior: bool,
}

impl BoundaryEvidence {
    pub fn holds(&self) -> bool {
        self.on_boundary && !self.push_y_certified && !self.push_z_certified && self.enhanced_interior
    }
}

pub fn boundary_evidence(c: &BroadcastChannel, r_y: f64, r_z: f64, cfg: &SearchConfig) -> Result<BoundaryEvidence> {
    let kind = RegionKind::Cor1NoMsiAtZ;
    let r_y_max = boundary_r_y(kind, c, r_z, cfg)?.value;
    let pt = |y: f64, z: f64| RateTuple::new(0.0, y, 0.0, z, 0.0);
    let enhanced =
        find_certificate(RegionKind::Cor5EnhancedNoMsi, c, &pt(r_y + ENHANCED_MARGIN, r_z + ENHANCED_MARGIN), cfg);
    Ok(BoundaryEvidence {
        r_y_max,
        on_boundary: (r_y_max - r_y).abs() <= BOUNDARY_TOL,
        push_y_certified: find_certificate(kind, c, &pt(r_y + BOUNDARY_PUSH, r_z), cfg).is_some(),
        push_z_certified: find_certificate(kind, c, &pt(r_y, r_z + BOUNDARY_PUSH), cfg).is_some(),
        enhanced_interior: enhanced.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientWitness {
    pub input: AuxiliaryInput,
    /// `H(Y) − R_Y`.
    pub entropy_margin: f64,
    /// `I(U;Y)` for the P-MSI check, `I(V;Y) − I(V;Z)` without MSI.
    pub leakage_margin: f64,
    pub evidence: BoundaryEvidence,
}

fn witness_search(
    c: &BroadcastChannel,
    needs: Needs,
    rates: RateTuple,
    leakage: fn(&InfoTerms) -> f64,
    cfg: &SearchConfig,
) -> Result<Option<SufficientWitness>> {
    let r_y = rates.r_y_p;
    let score = |_: &AuxiliaryInput, t: &InfoTerms| {
        let Ok(region) = crate::regions::region_from_terms(RegionKind::Cor1NoMsiAtZ, t) else {
            return f64::NEG_INFINITY;
        };
        let m = contains(&region, &rates);
        let slack = m.slack.iter().copied().fold(f64::INFINITY, f64::min);
        slack.min(t.h_y - r_y - STRICT_MARGIN).min(leakage(t) - STRICT_MARGIN)
    };
    let warm = warm_starts(c, &rates.to_array());
    let res = search_score(c, needs, &score, Some(-CERT_TOL), &warm, cfg)?;
    if res.value < -CERT_TOL {
        return Ok(None);
    }
    let t = InfoTerms::compute(c, &res.argument);
    let region = evaluate(RegionKind::Cor1NoMsiAtZ, c, &res.argument)?;
    if !contains(&region, &rates).inside {
        return Ok(None);
    }
    let evidence = boundary_evidence(c, r_y, rates.r_z(), cfg)?;
    Ok(Some(SufficientWitness {
        input: res.argument,
        entropy_margin: t.h_y - r_y,
        leakage_margin: leakage(&t),
        evidence,
    })
    .filter(|w| w.evidence.holds()))
}

/// Sufficient conditions with partial side information at the deterministic
/// receiver, for the triple `(R_Y^p, R_Z^p, R_Z^c)`.
pub fn check_prop3(c: &BroadcastChannel, t: (f64, f64, f64), cfg: &SearchConfig) -> Result<Option<SufficientWitness>> {
    let rates = RateTuple::new(0.0, t.0, 0.0, t.1, t.2);
    if !rates.is_nonnegative() || t.0 > (c.y_size() as f64).log2() {
        return Ok(None);
    }
    witness_search(c, Needs::UOnly, rates, |t| t.i_u_y, cfg)
}

/// Sufficient conditions without side information, for `(R_Y, R_Z)`.
pub fn check_prop4(c: &BroadcastChannel, pair: (f64, f64), cfg: &SearchConfig) -> Result<Option<SufficientWitness>> {
    let rates = RateTuple::new(0.0, pair.0, 0.0, pair.1, 0.0);
    if !rates.is_nonnegative() || pair.0 > (c.y_size() as f64).log2() {
        return Ok(None);
    }
    witness_search(c, Needs::VAndU, rates, |t| t.i_v_y - t.i_v_z, cfg)
}

// ---- uselessness harnesses ----

fn joint_terms(c: &BroadcastChannel, a: &AuxiliaryInput) -> std::result::Result<JointPmf, RegionError> {
    Ok(c.induced_joint(a)?)
}

fn mi(j: &JointPmf, a: &[&str], b: &[&str], given: &[&str]) -> f64 {
    mutual_information(j, a, b, given).expect("axes of the induced joint")
}

/// Outer bound with perfect feedback and full side information at the
/// stochastic receiver, evaluated through the full joint distribution.
pub struct FeedbackOuterFullSiZ;

impl RegionFamily for FeedbackOuterFullSiZ {
    fn needs(&self) -> Needs {
        Needs::XOnly
    }
    fn region(&self, c: &BroadcastChannel, a: &AuxiliaryInput, _t: &InfoTerms) -> std::result::Result<RegionAtPmf, RegionError> {
        let j = joint_terms(c, a)?;
        let h_y = entropy(&j, &["Y"]).expect("axis");
        Ok(RegionAtPmf {
            kind: RegionKind::Cor3FmsiAtZ,
            constraints: vec![
                Constraint::new([1, 1, 1, 0, 0], h_y, "R+R_Y <= H(Y)"),
                Constraint::new([1, 0, 0, 1, 1], mi(&j, &["X"], &["Z"], &[]), "R+R_Z <= I(X;Z)"),
                Constraint::new([1, 1, 1, 1, 0], mi(&j, &["X"], &["Y", "Z"], &[]), "R+R_Y+R_Z^p <= I(X;Y,Z)"),
            ],
            pinned_zero: vec![],
        })
    }
}

/// Outer bound with perfect feedback and no side information at the
/// stochastic receiver, evaluated through the full joint distribution.
pub struct FeedbackOuterNoSiZ;

impl RegionFamily for FeedbackOuterNoSiZ {
    fn needs(&self) -> Needs {
        Needs::UOnly
    }
    fn region(&self, c: &BroadcastChannel, a: &AuxiliaryInput, _t: &InfoTerms) -> std::result::Result<RegionAtPmf, RegionError> {
        let j = joint_terms(c, a)?;
        let h_y = entropy(&j, &["Y"]).expect("axis");
        let i_u_z = mi(&j, &["U"], &["Z"], &[]);
        let i_x_yz_u = mi(&j, &["X"], &["Y", "Z"], &["U"]);
        Ok(RegionAtPmf {
            kind: RegionKind::Cor1NoMsiAtZ,
            constraints: vec![
                Constraint::new([0, 1, 1, 0, 0], h_y, "R_Y <= H(Y)"),
                Constraint::new([0, 0, 0, 1, 1], i_u_z, "R_Z <= I(U;Z)"),
                Constraint::new([0, 1, 1, 1, 1], i_x_yz_u + i_u_z, "R_Y+R_Z <= I(X;Y,Z|U)+I(U;Z)"),
            ],
            pinned_zero: vec![R],
        })
    }
}

/// Deterministic nonnegative weight vectors over `slots`: unit vectors, the
/// all-ones vector, then Dirichlet draws.
pub fn weight_vectors(n: usize, slots: &[usize], seed: u64) -> Vec<[f64; 5]> {
    let mut out = Vec::new();
    for &s in slots {
        let mut w = [0.0; 5];
        w[s] = 1.0;
        out.push(w);
    }
    let mut ones = [0.0; 5];
    slots.iter().for_each(|&s| ones[s] = 1.0);
    out.push(ones);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < n {
        let mut w = [0.0; 5];
        for &s in slots {
            w[s] = Exp1.sample(&mut rng);
        }
        out.push(w);
    }
    out.truncate(n);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCheck {
    pub weights: [f64; 5],
    /// One value per compared region, in the report's label order.
    pub values: Vec<f64>,
    pub spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UselessnessReport {
    pub labels: Vec<String>,
    pub tolerance: f64,
    pub checks: Vec<WeightCheck>,
    pub pass: bool,
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// Compares the no-feedback region with full side information at the
/// stochastic receiver against the perfect-feedback outer bound.
pub fn theorem3_uselessness_check(
    c: &BroadcastChannel,
    weights: &[[f64; 5]],
    cfg: &SearchConfig,
) -> Result<UselessnessReport> {
    if c.f_map().is_none() {
        return Err(FeedbackError::Precondition("the channel must be semideterministic".into()));
    }
    let tol = 1e-6;
    let mut checks = Vec::new();
    for &w in weights {
        let obj = Objective::weighted(w);
        let plain = maximize(&RegionKind::Cor3FmsiAtZ, c, &obj, cfg)?;
        let outer = maximize(&FeedbackOuterFullSiZ, c, &obj, cfg)?;
        // each maximizer evaluated in the other region as well
        let cross_outer = obj.score(&FeedbackOuterFullSiZ.region(c, &plain.argument, &InfoTerms::compute(c, &plain.argument))?);
        let cross_plain = obj.score(&evaluate(RegionKind::Cor3FmsiAtZ, c, &outer.argument)?);
        let values = vec![plain.value.max(cross_plain), outer.value.max(cross_outer)];
        let s = spread(&values);
        checks.push(WeightCheck { weights: w, values, spread: s, pass: s <= tol });
    }
    let pass = checks.iter().all(|k| k.pass);
    Ok(UselessnessReport {
        labels: vec!["no_feedback".into(), "feedback_outer".into()],
        tolerance: tol,
        checks,
        pass,
    })
}

/// Three-way comparison on a function-erasure channel: the no-MSI region,
/// its closed form, and the perfect-feedback outer bound.
pub fn example4_uselessness_check(
    f: &[usize],
    p: f64,
    weights: &[[f64; 5]],
    cfg: &SearchConfig,
) -> Result<UselessnessReport> {
    let c = make_function_erasure(f, p)?;
    let tol = 2e-3;
    let mut checks = Vec::new();
    for &w in weights {
        let obj = Objective::weighted(w);
        let plain = maximize(&RegionKind::Cor1NoMsiAtZ, &c, &obj, cfg)?.value;
        let closed = maximize(&RegionKind::AppIClosedForm, &c, &obj, cfg)?.value;
        let outer = maximize(&FeedbackOuterNoSiZ, &c, &obj, cfg)?.value;
        let values = vec![plain, closed, outer];
        let s = spread(&values);
        checks.push(WeightCheck { weights: w, values, spread: s, pass: s <= tol });
    }
    let pass = checks.iter().all(|k| k.pass);
    Ok(UselessnessReport {
        labels: vec!["no_feedback".into(), "closed_form".into(), "feedback_outer".into()],
        tolerance: tol,
        checks,
        pass,
    })
}
