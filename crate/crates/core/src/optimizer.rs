//! Search over auxiliary inputs for weighted-rate maxima and membership
//! certificates.
//!
//! Each restart starts from a Dirichlet(1) draw (restart 0 from the best
//! structured point registered for a named channel) and runs block-coordinate
//! ascent on softmax logits: one block for `p(v,u)`, one per row of `p(x|u)`.
//! Gradients are central differences; a step on the logits is the
//! exponentiated-gradient update on the simplex. With `enforce_x_functional`
//! the rows are `p(y|u)` plus a table `x = g(y,u)` that is improved by single
//! entry swaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{AuxiliaryInput, BroadcastChannel, ChannelError, NamedChannel};
use crate::info::{binary_entropy_inv, Pmf};
use crate::regions::{
    contains, evaluate, region_from_terms, InfoTerms, Needs, RateTuple, RegionAtPmf, RegionError, RegionKind,
    Support, RZC, RZP,
};

/// Central-difference step on the logits.
pub const FD_STEP: f64 = 1e-5;
/// Restarts within this of the best value count as ties.
pub const TIE_TOL: f64 = 1e-9;
/// Certificate searches stop once every slack is above `-CERT_TOL`.
pub const CERT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("weights must be nonnegative and not all zero")]
    BadWeights,
    #[error("objective is unbounded along {0}")]
    Unbounded(&'static str),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("X-functional search needs a semideterministic channel")]
    NotSemideterministic,
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub type Result<T> = std::result::Result<T, OptError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub v_card: usize,
    pub u_card: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub step_init: f64,
    pub step_decay: f64,
    pub enforce_x_functional: bool,
}

impl SearchConfig {
    /// Defaults with `|V| = |U| = |X| + 4`.
    pub fn for_channel(c: &BroadcastChannel) -> Self {
        Self {
            v_card: c.x_size() + 4,
            u_card: c.x_size() + 4,
            restarts: 8,
            iterations: 150,
            seed: 0,
            step_init: 1.0,
            step_decay: 0.5,
            enforce_x_functional: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_card == 0 || self.u_card == 0 {
            return Err(OptError::Config("cardinalities must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(OptError::Config("at least one restart is needed".into()));
        }
        if !(self.step_init > 0.0) || !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(OptError::Config("step_init > 0 and step_decay in (0,1) required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub value: f64,
    pub argument: AuxiliaryInput,
    /// Maximizing rate tuple at `argument`, for region objectives.
    pub point: Option<RateTuple>,
    /// Best value reached by each restart.
    pub trace: Vec<f64>,
    pub best_restart: usize,
    /// The winning restart hit the iteration cap while still improving.
    pub budget_exhausted: bool,
}

/// A family of regions whose rows are functions of [`InfoTerms`].
pub trait RegionFamily: Sync {
    fn needs(&self) -> Needs;
    /// Region at one input; `t` holds the precomputed terms for `(c, a)`.
    fn region(
        &self,
        c: &BroadcastChannel,
        a: &AuxiliaryInput,
        t: &InfoTerms,
    ) -> std::result::Result<RegionAtPmf, RegionError>;
    /// Whether the formulas are only valid when X is a function of (Y,U).
    fn needs_functional(&self) -> bool {
        false
    }
}

impl RegionFamily for RegionKind {
    fn needs(&self) -> Needs {
        RegionKind::needs(*self)
    }
    fn region(
        &self,
        _c: &BroadcastChannel,
        _a: &AuxiliaryInput,
        t: &InfoTerms,
    ) -> std::result::Result<RegionAtPmf, RegionError> {
        region_from_terms(*self, t)
    }
    fn needs_functional(&self) -> bool {
        *self == RegionKind::AppIClosedForm
    }
}

/// `max w·t` over the region, subject to `t ≥ lower`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub weights: [f64; 5],
    pub lower: [f64; 5],
}

impl Objective {
    pub fn weighted(weights: [f64; 5]) -> Self {
        Self { weights, lower: [0.0; 5] }
    }

    /// Region value; infeasible points score below every feasible one.
    pub fn score(&self, region: &RegionAtPmf) -> f64 {
        match region.support(&self.weights, &self.lower) {
            Support::Optimal { value, .. } => value,
            Support::Infeasible { shortfall } => -1.0 - shortfall,
            Support::Unbounded => f64::INFINITY,
        }
    }
}

/// Structured points registered for the named channels; `lower` steers the
/// choice of boundary points.
pub fn warm_starts(c: &BroadcastChannel, lower: &[f64; 5]) -> Vec<AuxiliaryInput> {
    let mut out = Vec::new();
    let xs = c.x_size();
    let ident: Vec<Vec<f64>> = (0..xs).map(|u| Pmf::point(xs, u).mass().to_vec()).collect();
    let uniform = Pmf::uniform(xs);
    out.push(AuxiliaryInput::from_input(&uniform));
    out.push(AuxiliaryInput::with_v_equal_u(uniform.mass(), ident).expect("valid"));
    out.push(AuxiliaryInput::with_constant_v(&[1.0], vec![uniform.mass().to_vec()]).expect("valid"));
    match c.origin() {
        Some(NamedChannel::AdderErasure { p }) => {
            let p = *p;
            let mut p2s: Vec<f64> = (0..=50).map(|k| k as f64 / 100.0).collect();
            if p > 0.0 {
                p2s.push(1.0 / (1.0 + 2f64.powf(1.0 / p)));
            }
            let r_z = lower[RZP] + lower[RZC];
            if r_z > 0.0 && p < 1.0 {
                if let Ok(p2) = binary_entropy_inv((1.0 - r_z / (1.0 - p)).clamp(0.0, 1.0)) {
                    p2s.push(p2);
                }
            }
            for p2 in p2s {
                for eps in [0.0, 0.01, 0.05, 0.1, 0.2] {
                    out.extend(perturbed_adder_input(p2, eps).ok());
                }
            }
        }
        Some(NamedChannel::FunctionErasure { f, .. }) => {
            // U = position of x inside its class f^{-1}(f(x)), X uniform
            let mut pos = vec![0usize; xs];
            let mut seen = vec![0usize; f.iter().max().map_or(0, |m| m + 1)];
            for (x, &y) in f.iter().enumerate() {
                pos[x] = seen[y];
                seen[y] += 1;
            }
            let us = seen.iter().copied().max().unwrap_or(1);
            let mut pu = vec![0.0; us];
            let mut rows = vec![vec![0.0; xs]; us];
            for x in 0..xs {
                pu[pos[x]] += 1.0 / xs as f64;
                rows[pos[x]][x] = 1.0;
            }
            for (u, r) in rows.iter_mut().enumerate() {
                let t: f64 = r.iter().sum::<f64>();
                if t > 0.0 {
                    r.iter_mut().for_each(|w| *w /= t);
                } else {
                    r[0] = 1.0;
                    pu[u] = 0.0;
                }
            }
            if let Ok(a) = AuxiliaryInput::with_constant_v(&pu, rows) {
                out.push(a);
            }
        }
        _ => {}
    }
    out
}

/// Two-point `U` construction for the adder-erasure channel: `U` uniform,
/// `V = U`; given `u = 0` the pair `(X2, Y)` is `(0,0)`, `(0,1)` with
/// probability `(1−p2)/2` each and `(1,2)` with probability `p2`; `u = 1` is
/// the mirror image.
pub fn symmetric_adder_search(p: f64, p2: f64) -> Result<AuxiliaryInput> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OptError::Config(format!("need p in [0,1], got {p}")));
    }
    perturbed_adder_input(p2, 0.0)
}

/// [`symmetric_adder_search`] with mass `eps·p2` of the `Y = 2` (resp.
/// `Y = 0`) outcome moved to the other input with `Y = 1`, which keeps
/// `p(x2|u)` fixed.
pub fn perturbed_adder_input(p2: f64, eps: f64) -> Result<AuxiliaryInput> {
    if !(0.0..=0.5).contains(&p2) || !(0.0..=1.0).contains(&eps) {
        return Err(OptError::Config(format!("need p2 in [0,1/2] and eps in [0,1], got {p2}, {eps}")));
    }
    let h = (1.0 - p2) / 2.0;
    // x = 2·x1 + x2
    let u0 = vec![h, eps * p2, h, (1.0 - eps) * p2];
    let u1 = vec![(1.0 - eps) * p2, h, eps * p2, h];
    Ok(AuxiliaryInput::with_v_equal_u(&[0.5, 0.5], vec![u0, u1])?)
}

#[derive(Clone)]
struct Point {
    vu: Vec<f64>,
    rows: Vec<Vec<f64>>,
    table: Vec<Vec<usize>>,
}

struct Space<'a> {
    c: &'a BroadcastChannel,
    vs: usize,
    us: usize,
    /// Per nonempty Y-class, the inputs mapping to it (functional mode only).
    classes: Option<Vec<Vec<usize>>>,
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|&t| (t - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn logits(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| x.max(1e-30).ln()).collect()
}

impl<'a> Space<'a> {
    fn new(c: &'a BroadcastChannel, needs: Needs, cfg: &SearchConfig) -> Result<Self> {
        let (vs, us) = match needs {
            Needs::VAndU => (cfg.v_card, cfg.u_card),
            Needs::UOnly => (1, cfg.u_card),
            Needs::XOnly => (1, 1),
        };
        let classes = if cfg.enforce_x_functional {
            let f = c.f_map().ok_or(OptError::NotSemideterministic)?;
            let mut cl = vec![Vec::new(); c.y_size()];
            for (x, &y) in f.iter().enumerate() {
                cl[y].push(x);
            }
            cl.retain(|v| !v.is_empty());
            Some(cl)
        } else {
            None
        };
        Ok(Self { c, vs, us, classes })
    }

    fn row_len(&self) -> usize {
        self.classes.as_ref().map_or(self.c.x_size(), Vec::len)
    }

    fn aux(&self, p: &Point) -> AuxiliaryInput {
        let vu = softmax(&p.vu);
        let xs = self.c.x_size();
        let rows = p
            .rows
            .iter()
            .enumerate()
            .map(|(u, r)| {
                let q = softmax(r);
                match &self.classes {
                    None => q,
                    Some(cl) => {
                        let mut px = vec![0.0; xs];
                        for (k, members) in cl.iter().enumerate() {
                            px[members[p.table[u][k]]] += q[k];
                        }
                        px
                    }
                }
            })
            .collect();
        AuxiliaryInput::new(self.vs, self.us, vu, rows).expect("softmax output is a valid pmf")
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Point {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300).ln()).collect()
        };
        let vu = draw(self.vs * self.us);
        let rows = (0..self.us).map(|_| draw(self.row_len())).collect();
        let table = match &self.classes {
            None => vec![],
            Some(cl) => (0..self.us).map(|_| cl.iter().map(|m| rng.random_range(0..m.len())).collect()).collect(),
        };
        Point { vu, rows, table }
    }

    /// Embeds a structured input, padding unused symbols with zero mass.
    fn embed(&self, a: &AuxiliaryInput) -> Option<Point> {
        if a.x_size() != self.c.x_size() {
            return None;
        }
        let (mut src_v, mut src_u) = (a.v_size(), a.u_size());
        let mut vu_src: Vec<f64> = a.p_vu().mass().to_vec();
        let mut rows_src: Vec<Vec<f64>> = a.p_x_given_u().rows().to_vec();
        if self.vs == 1 && src_v > 1 {
            vu_src = a.p_u();
            src_v = 1;
        }
        if self.us == 1 && src_u > 1 {
            vu_src = vec![1.0];
            rows_src = vec![a.p_x()];
            src_u = 1;
        }
        if src_v > self.vs || src_u > self.us {
            return None;
        }
        let mut vu = vec![0.0; self.vs * self.us];
        for v in 0..src_v {
            for u in 0..src_u {
                vu[v * self.us + u] = vu_src[v * src_u + u];
            }
        }
        let xs = self.c.x_size();
        let mut rows = rows_src;
        rows.resize(self.us, Pmf::uniform(xs).mass().to_vec());
        let (rows, table) = match &self.classes {
            None => (rows.iter().map(|r| logits(r)).collect(), vec![]),
            Some(cl) => {
                let mut lr = Vec::new();
                let mut tb = Vec::new();
                for r in &rows {
                    let mut py = Vec::new();
                    let mut pick = Vec::new();
                    for members in cl {
                        py.push(members.iter().map(|&x| r[x]).sum::<f64>());
                        let best = (0..members.len()).max_by(|&i, &j| r[members[i]].total_cmp(&r[members[j]]));
                        pick.push(best.unwrap_or(0));
                    }
                    lr.push(logits(&py));
                    tb.push(pick);
                }
                (lr, tb)
            }
        };
        Some(Point { vu: logits(&vu), rows, table })
    }
}

struct Climb {
    point: Point,
    value: f64,
    exhausted: bool,
}

fn block_mut<'p>(p: &'p mut Point, b: usize) -> &'p mut Vec<f64> {
    if b == 0 {
        &mut p.vu
    } else {
        &mut p.rows[b - 1]
    }
}

fn climb(
    space: &Space,
    start: Point,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    cfg: &SearchConfig,
    target: Option<f64>,
) -> Climb {
    let mut point = start;
    let mut value = f(&point);
    let n_blocks = 1 + point.rows.len();
    let mut steps = vec![cfg.step_init; n_blocks];
    let mut stall = 0;
    let reached = |v: f64| target.is_some_and(|t| v >= t);
    for _ in 0..cfg.iterations {
        if reached(value) {
            return Climb { point, value, exhausted: false };
        }
        let before = value;
        for b in 0..n_blocks {
            let len = block_mut(&mut point, b).len();
            if len < 2 {
                continue;
            }
            let theta = block_mut(&mut point, b).clone();
            let mut g = vec![0.0; len];
            for i in 0..len {
                block_mut(&mut point, b)[i] = theta[i] + FD_STEP;
                let up = f(&point);
                block_mut(&mut point, b)[i] = theta[i] - FD_STEP;
                let down = f(&point);
                block_mut(&mut point, b)[i] = theta[i];
                g[i] = (up - down) / (2.0 * FD_STEP);
            }
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !(gmax > 1e-12) || !gmax.is_finite() {
                continue;
            }
            let mut eta = steps[b];
            let mut moved = false;
            for _ in 0..12 {
                let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + eta * gi / gmax).collect();
                *block_mut(&mut point, b) = cand;
                let v = f(&point);
                if v > value {
                    value = v;
                    steps[b] = (eta * 2.0).min(16.0);
                    moved = true;
                    break;
                }
                eta *= cfg.step_decay;
            }
            if moved {
                continue;
            }
            *block_mut(&mut point, b) = theta.clone();
            steps[b] = cfg.step_init;
            // coordinate fallback along the steepest partials
            let mut order: Vec<usize> = (0..len).collect();
            order.sort_by(|&i, &j| g[j].abs().total_cmp(&g[i].abs()));
            'coords: for &i in order.iter().take(3) {
                for s in [1.0, 0.1, 0.01] {
                    block_mut(&mut point, b)[i] = theta[i] + s * g[i].signum();
                    let v = f(&point);
                    if v > value {
                        value = v;
                        break 'coords;
                    }
                    block_mut(&mut point, b)[i] = theta[i];
                }
            }
        }
        if let Some(cl) = &space.classes {
            for u in 0..point.table.len() {
                for (k, members) in cl.iter().enumerate() {
                    let cur = point.table[u][k];
                    for alt in 0..members.len() {
                        if alt == cur {
                            continue;
                        }
                        point.table[u][k] = alt;
                        let v = f(&point);
                        if v > value {
                            value = v;
                            break;
                        }
                        point.table[u][k] = cur;
                    }
                }
            }
        }
        if value - before < 1e-12 {
            stall += 1;
            if stall >= 2 {
                return Climb { point, value, exhausted: false };
            }
        } else {
            stall = 0;
        }
    }
    Climb { point, value, exhausted: stall == 0 }
}

/// Generic engine: maximizes `score(terms)` over inputs shaped by `needs`.
/// Stops early once `target` is reached.
pub fn search_score(
    c: &BroadcastChannel,
    needs: Needs,
    score: &(dyn Fn(&AuxiliaryInput, &InfoTerms) -> f64 + Sync),
    target: Option<f64>,
    warm: &[AuxiliaryInput],
    cfg: &SearchConfig,
) -> Result<OptResult> {
    cfg.validate()?;
    let space = Space::new(c, needs, cfg)?;
    let f = |p: &Point| {
        let a = space.aux(p);
        let v = score(&a, &InfoTerms::compute(c, &a));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let warm_point = warm
        .iter()
        .filter_map(|a| space.embed(a))
        .map(|p| (f(&p), p))
        .fold(None::<(f64, Point)>, |best, (v, p)| match best {
            Some((bv, _)) if bv >= v => best,
            _ => Some((v, p)),
        })
        .map(|(_, p)| p);

    let run = |r: usize| {
        let start = match (&warm_point, r) {
            (Some(p), 0) => p.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                space.random(&mut rng)
            }
        };
        climb(&space, start, &f, cfg, target)
    };
    let climbs: Vec<Climb> = match target {
        // stop at the first restart (in index order) that reaches the target
        Some(t) => {
            let mut out = Vec::new();
            let chunk = rayon::current_num_threads().max(1);
            let mut r0 = 0;
            while r0 < cfg.restarts {
                let r1 = (r0 + chunk).min(cfg.restarts);
                let batch: Vec<Climb> = (r0..r1).into_par_iter().map(run).collect();
                let hit = batch.iter().any(|cl| cl.value >= t);
                out.extend(batch);
                if hit {
                    break;
                }
                r0 = r1;
            }
            out
        }
        None => (0..cfg.restarts).into_par_iter().map(run).collect(),
    };
    let best = climbs.iter().map(|cl| cl.value).fold(f64::NEG_INFINITY, f64::max);
    let idx = climbs.iter().position(|cl| cl.value >= best - TIE_TOL).unwrap_or(0);
    let argument = space.aux(&climbs[idx].point);
    let value = score(&argument, &InfoTerms::compute(c, &argument));
    Ok(OptResult {
        value,
        argument,
        point: None,
        trace: climbs.iter().map(|cl| cl.value).collect(),
        best_restart: idx,
        budget_exhausted: climbs[idx].exhausted,
    })
}

fn check_bounded(family: &dyn RegionFamily, c: &BroadcastChannel, obj: &Objective) -> Result<()> {
    let probe = AuxiliaryInput::from_input(&Pmf::uniform(c.x_size()));
    let region = family.region(c, &probe, &InfoTerms::compute(c, &probe))?;
    for i in 0..5 {
        if obj.weights[i] > 0.0
            && !region.pinned_zero.contains(&i)
            && !region.constraints.iter().any(|k| k.coeffs[i] > 0)
        {
            return Err(OptError::Unbounded(crate::regions::COORD_NAMES[i]));
        }
    }
    Ok(())
}

/// Maximizes `objective` over the union of `family`'s regions.
pub fn maximize(
    family: &dyn RegionFamily,
    c: &BroadcastChannel,
    objective: &Objective,
    cfg: &SearchConfig,
) -> Result<OptResult> {
    if objective.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) || objective.weights.iter().all(|&w| w == 0.0) {
        return Err(OptError::BadWeights);
    }
    check_bounded(family, c, objective)?;
    let mut cfg = cfg.clone();
    if family.needs_functional() {
        cfg.enforce_x_functional = true;
    }
    let score =
        |a: &AuxiliaryInput, t: &InfoTerms| family.region(c, a, t).map_or(f64::NEG_INFINITY, |r| objective.score(&r));
    let warm = warm_starts(c, &objective.lower);
    let mut res = search_score(c, family.needs(), &score, None, &warm, &cfg)?;
    let region = family.region(c, &res.argument, &InfoTerms::compute(c, &res.argument))?;
    if let Support::Optimal { point, .. } = region.support(&objective.weights, &objective.lower) {
        res.point = Some(point);
    }
    Ok(res)
}

pub fn maximize_weighted(
    kind: RegionKind,
    c: &BroadcastChannel,
    weights: [f64; 5],
    cfg: &SearchConfig,
) -> Result<OptResult> {
    maximize(&kind, c, &Objective::weighted(weights), cfg)
}

/// Largest `R_Y` over inputs with `R_Z ≥ r_z`, both in the kind's private slots.
pub fn boundary_r_y(kind: RegionKind, c: &BroadcastChannel, r_z: f64, cfg: &SearchConfig) -> Result<OptResult> {
    let (ys, zs) = kind.private_slots();
    let mut obj = Objective::weighted([0.0; 5]);
    obj.weights[ys] = 1.0;
    obj.lower[zs] = r_z.max(0.0);
    maximize(&kind, c, &obj, cfg)
}

/// Searches for an input whose region contains `t`.
pub fn find_certificate(
    kind: RegionKind,
    c: &BroadcastChannel,
    t: &RateTuple,
    cfg: &SearchConfig,
) -> Option<AuxiliaryInput> {
    let margin = |r: &RegionAtPmf| {
        let m = contains(r, t);
        m.slack.iter().copied().fold(-m.pinned_excess, f64::min)
    };
    let score = |_: &AuxiliaryInput, terms: &InfoTerms| region_from_terms(kind, terms).map_or(f64::NEG_INFINITY, |r| margin(&r));
    let mut cfg = cfg.clone();
    if kind.needs_functional() {
        cfg.enforce_x_functional = true;
    }
    let res =
        search_score(c, kind.needs(), &score, Some(-CERT_TOL), &warm_starts(c, &t.to_array()), &cfg).ok()?;
    let region = evaluate(kind, c, &res.argument).ok()?;
    contains(&region, t).inside.then_some(res.argument)
}
