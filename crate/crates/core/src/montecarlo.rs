//! Desk-scale simulation of the Marton code with a binned cloud center.
//!
//! Random draws happen in a fixed order so that a codebook is a pure function
//! of its seed: for every cell `(m, m_Y^c, m_Z^c)` in lexicographic order and
//! every cloud index `k`, the cloud word, then its `L` satellite y-words, then
//! its `J` satellite u-words; afterwards the y-bin labels of every cell in
//! `(k, ℓ)` order, then the u-bin labels in `(k, j)` order. Each symbol is one
//! inverse-CDF lookup of a uniform `f64`. Codebooks use stream 0 of a
//! `ChaCha8Rng` seeded with `seed`; trial `t` uses stream `t + 1`.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::{AuxiliaryInput, BroadcastChannel, ChannelError};
use crate::info::{InfoError, JointPmf, ZERO_MASS};
use crate::regions::RateTuple;

pub const MAX_BLOCKLENGTH: usize = 16;
pub const MAX_DIMENSION: usize = 1 << 14;
pub const MAX_ALPHABET: usize = 4;
pub const MAX_MESSAGES: usize = 1 << 20;
/// Default cap on stored codeword symbols.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("blocklength {0} outside 1..={MAX_BLOCKLENGTH}")]
    BlockLength(usize),
    #[error("alphabet {name} has {size} symbols, more than {MAX_ALPHABET}")]
    Alphabet { name: String, size: usize },
    #[error("invalid rates: {0}")]
    Rates(String),
    #[error("typicality slacks must satisfy 0 < epsilon < epsilon_tilde, got {epsilon} and {epsilon_tilde}")]
    Epsilon { epsilon: f64, epsilon_tilde: f64 },
    #[error("{name} has {size} entries, more than {limit}")]
    Dimension { name: String, size: usize, limit: usize },
    #[error("codebook needs {required} symbols but the cap is {allowed}")]
    MemoryCap { required: usize, allowed: usize },
    #[error("message index out of range: {0}")]
    Message(String),
    #[error("at least one trial is required")]
    ZeroTrials,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Info(#[from] InfoError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Rates of the auxiliary codebooks: cloud words per cell and satellites per receiver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AuxRates {
    pub r_c: f64,
    pub r_y: f64,
    pub r_z: f64,
}

fn default_epsilon() -> f64 {
    0.2
}
fn default_epsilon_tilde() -> f64 {
    0.3
}
fn default_memory_cap() -> usize {
    DEFAULT_MEMORY_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub rates: RateTuple,
    pub aux: AuxRates,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon_tilde")]
    pub epsilon_tilde: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_memory_cap")]
    pub memory_cap: usize,
}

impl CodeParams {
    pub fn new(n: usize, rates: RateTuple, aux: AuxRates, seed: u64) -> Self {
        Self {
            n,
            rates,
            aux,
            epsilon: default_epsilon(),
            epsilon_tilde: default_epsilon_tilde(),
            seed,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn sizes(&self) -> Result<CodeSizes> {
        if self.n == 0 || self.n > MAX_BLOCKLENGTH {
            return Err(SimError::BlockLength(self.n));
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.epsilon_tilde && self.epsilon_tilde.is_finite()) {
            return Err(SimError::Epsilon { epsilon: self.epsilon, epsilon_tilde: self.epsilon_tilde });
        }
        let AuxRates { r_c, r_y, r_z } = self.aux;
        let all = self.rates.to_array().into_iter().chain([r_c, r_y, r_z]);
        if all.clone().any(|r| !(r >= 0.0) || !r.is_finite()) {
            return Err(SimError::Rates("rates must be finite and nonnegative".into()));
        }
        if r_c > r_y.min(r_z) + 1e-12 {
            return Err(SimError::Rates(format!("cloud rate {r_c} exceeds min({r_y}, {r_z})")));
        }
        let n = self.n as f64;
        let count = |name: &str, r: f64, limit: usize| -> Result<usize> {
            let e = n * r;
            if e > 62.0 {
                return Err(SimError::Dimension { name: name.into(), size: usize::MAX, limit });
            }
            let size = ((2f64.powf(e) + 1e-9).floor() as usize).max(1);
            if size > limit {
                return Err(SimError::Dimension { name: name.into(), size, limit });
            }
            Ok(size)
        };
        let s = CodeSizes {
            m: count("common messages", self.rates.r_common, MAX_MESSAGES)?,
            m_y_c: count("Y known-at-Z messages", self.rates.r_y_c, MAX_MESSAGES)?,
            m_y_p: count("Y private messages", self.rates.r_y_p, MAX_MESSAGES)?,
            m_z_c: count("Z known-at-Y messages", self.rates.r_z_c, MAX_MESSAGES)?,
            m_z_p: count("Z private messages", self.rates.r_z_p, MAX_MESSAGES)?,
            clouds: count("cloud words per cell", r_c, MAX_DIMENSION)?,
            y_per_cloud: count("y-words per cloud word", r_y - r_c.min(r_y), MAX_DIMENSION)?,
            u_per_cloud: count("u-words per cloud word", r_z - r_c.min(r_z), MAX_DIMENSION)?,
        };
        for (name, size) in [("y-words per cell", s.clouds * s.y_per_cloud), ("u-words per cell", s.clouds * s.u_per_cloud)]
        {
            if size > MAX_DIMENSION {
                return Err(SimError::Dimension { name: name.into(), size, limit: MAX_DIMENSION });
            }
        }
        let cells = s.cells();
        if cells > MAX_DIMENSION {
            return Err(SimError::Dimension { name: "cells".into(), size: cells, limit: MAX_DIMENSION });
        }
        let required = cells * s.clouds * (1 + s.y_per_cloud + s.u_per_cloud) * self.n;
        if required > self.memory_cap {
            return Err(SimError::MemoryCap { required, allowed: self.memory_cap });
        }
        Ok(s)
    }
}

/// Message-set and codebook sizes, each `⌊2^{nR}⌋` (at least 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSizes {
    pub m: usize,
    pub m_y_c: usize,
    pub m_y_p: usize,
    pub m_z_c: usize,
    pub m_z_p: usize,
    pub clouds: usize,
    pub y_per_cloud: usize,
    pub u_per_cloud: usize,
}

impl CodeSizes {
    pub fn cells(&self) -> usize {
        self.m * self.m_y_c * self.m_z_c
    }
    pub fn cell(&self, m: usize, m_y_c: usize, m_z_c: usize) -> usize {
        (m * self.m_y_c + m_y_c) * self.m_z_c + m_z_c
    }
    fn split_cell(&self, cell: usize) -> (usize, usize, usize) {
        (cell / (self.m_y_c * self.m_z_c), (cell / self.m_z_c) % self.m_y_c, cell % self.m_z_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Messages {
    pub m: usize,
    pub m_y_c: usize,
    pub m_y_p: usize,
    pub m_z_c: usize,
    pub m_z_p: usize,
}

impl Messages {
    pub fn random<R: Rng>(s: &CodeSizes, rng: &mut R) -> Self {
        Self {
            m: rng.random_range(0..s.m),
            m_y_c: rng.random_range(0..s.m_y_c),
            m_y_p: rng.random_range(0..s.m_y_p),
            m_z_c: rng.random_range(0..s.m_z_c),
            m_z_p: rng.random_range(0..s.m_z_p),
        }
    }

    fn check(&self, s: &CodeSizes) -> Result<()> {
        let ok = self.m < s.m && self.m_y_c < s.m_y_c && self.m_y_p < s.m_y_p && self.m_z_c < s.m_z_c && self.m_z_p < s.m_z_p;
        if ok {
            Ok(())
        } else {
            Err(SimError::Message(format!("{self:?} not within {s:?}")))
        }
    }
}

/// Relative-slack typical set of a joint law over a few components:
/// `|π(a) − p(a)| ≤ ε·p(a)` for every symbol tuple `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalSet {
    sizes: Vec<usize>,
    pmf: Vec<f64>,
    epsilon: f64,
}

impl TypicalSet {
    pub fn new(j: &JointPmf, epsilon: f64) -> Self {
        Self { sizes: j.axes().iter().map(|a| a.size).collect(), pmf: j.mass().to_vec(), epsilon }
    }

    /// `words[c][i]` is symbol `i` of component `c`.
    pub fn contains(&self, words: &[&[u8]]) -> bool {
        debug_assert_eq!(words.len(), self.sizes.len());
        let n = words[0].len();
        let mut counts = [0u32; 64];
        for i in 0..n {
            let mut idx = 0usize;
            for (w, &s) in words.iter().zip(&self.sizes) {
                idx = idx * s + w[i] as usize;
            }
            counts[idx] += 1;
        }
        let nf = n as f64;
        self.pmf.iter().zip(&counts).all(|(&p, &c)| (c as f64 - nf * p).abs() <= self.epsilon * nf * p + 1e-12)
    }
}

fn cdf(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = row
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

/// First symbol whose cumulative mass exceeds `u`, skipping zero-mass symbols.
fn draw(cdf: &[f64], u: f64) -> u8 {
    let mut prev = 0.0;
    for (i, &c) in cdf.iter().enumerate() {
        if u < c && c > prev {
            return i as u8;
        }
        prev = c;
    }
    (cdf.len() - 1) as u8
}

fn conditional_cdfs(j: &JointPmf, given: usize, target: usize) -> Vec<Vec<f64>> {
    j.mass()
        .chunks(target)
        .take(given)
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > ZERO_MASS {
                cdf(&row.iter().map(|p| p / s).collect::<Vec<_>>())
            } else {
                cdf(&vec![1.0 / target as f64; target])
            }
        })
        .collect()
}

fn pack(word: &[u8]) -> u64 {
    word.iter().fold(0u64, |k, &s| (k << 2) | s as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeFailure;

impl std::fmt::Display for EncodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "no jointly typical triple in the selected bins")
    }
}

impl std::error::Error for EncodeFailure {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum DecodeError {
    #[error("no candidate message")]
    NotFound,
    #[error("more than one candidate message")]
    Ambiguous,
}

/// Indices of the selected cloud word and satellites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub k: usize,
    pub l: usize,
    pub j: usize,
}

#[derive(Debug, Clone)]
pub struct MartonCodebook {
    pub params: CodeParams,
    pub sizes: CodeSizes,
    v_words: Vec<u8>,
    y_words: Vec<u8>,
    u_words: Vec<u8>,
    y_bins: Vec<u32>,
    u_bins: Vec<u32>,
    y_lookup: HashMap<u64, Vec<u32>>,
    vyu: TypicalSet,
    y_typ: TypicalSet,
    uz_typ: TypicalSet,
    x_given_yu: Vec<Vec<f64>>,
    yz_given_x: Vec<Vec<f64>>,
    u_size: usize,
    z_size: usize,
}

fn check_alphabet(name: &str, size: usize) -> Result<()> {
    if size > MAX_ALPHABET {
        Err(SimError::Alphabet { name: name.into(), size })
    } else {
        Ok(())
    }
}

pub fn build_codebook(c: &BroadcastChannel, a: &AuxiliaryInput, p: &CodeParams) -> Result<MartonCodebook> {
    let sizes = p.sizes()?;
    for (name, size) in
        [("V", a.v_size()), ("U", a.u_size()), ("X", c.x_size()), ("Y", c.y_size()), ("Z", c.z_size())]
    {
        check_alphabet(name, size)?;
    }
    let joint = c.induced_joint(a)?;
    let (vs, us, xs, ys, zs) = (a.v_size(), a.u_size(), c.x_size(), c.y_size(), c.z_size());
    let pv = cdf(joint.marginal(&["V"])?.mass());
    let y_given_v = conditional_cdfs(&joint.marginal(&["V", "Y"])?, vs, ys);
    let u_given_v = conditional_cdfs(&joint.marginal(&["V", "U"])?, vs, us);
    let x_given_yu = conditional_cdfs(&joint.marginal(&["Y", "U", "X"])?, ys * us, xs);
    let yz_given_x = (0..xs).map(|x| cdf(c.row(x))).collect();

    let n = p.n;
    let (cells, k_n, l_n, j_n) = (sizes.cells(), sizes.clouds, sizes.y_per_cloud, sizes.u_per_cloud);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut v_words = Vec::with_capacity(cells * k_n * n);
    let mut y_words = Vec::with_capacity(cells * k_n * l_n * n);
    let mut u_words = Vec::with_capacity(cells * k_n * j_n * n);
    for _ in 0..cells {
        for _ in 0..k_n {
            let start = v_words.len();
            for _ in 0..n {
                v_words.push(draw(&pv, rng.random()));
            }
            let v: Vec<u8> = v_words[start..].to_vec();
            for _ in 0..l_n {
                y_words.extend(v.iter().map(|&s| draw(&y_given_v[s as usize], rng.random())));
            }
            for _ in 0..j_n {
                u_words.extend(v.iter().map(|&s| draw(&u_given_v[s as usize], rng.random())));
            }
        }
    }
    let y_bins: Vec<u32> = (0..cells * k_n * l_n).map(|_| rng.random_range(0..sizes.m_y_p) as u32).collect();
    let u_bins: Vec<u32> = (0..cells * k_n * j_n).map(|_| rng.random_range(0..sizes.m_z_p) as u32).collect();
    let mut y_lookup: HashMap<u64, Vec<u32>> = HashMap::new();
    for (i, w) in y_words.chunks(n).enumerate() {
        y_lookup.entry(pack(w)).or_default().push(i as u32);
    }

    Ok(MartonCodebook {
        params: p.clone(),
        sizes,
        v_words,
        y_words,
        u_words,
        y_bins,
        u_bins,
        y_lookup,
        vyu: TypicalSet::new(&joint.marginal(&["V", "Y", "U"])?, p.epsilon),
        y_typ: TypicalSet::new(&joint.marginal(&["Y"])?, p.epsilon_tilde),
        uz_typ: TypicalSet::new(&joint.marginal(&["U", "Z"])?, p.epsilon_tilde),
        x_given_yu,
        yz_given_x,
        u_size: us,
        z_size: zs,
    })
}

impl MartonCodebook {
    fn n(&self) -> usize {
        self.params.n
    }

    pub fn v_word(&self, cell: usize, k: usize) -> &[u8] {
        let n = self.n();
        let i = cell * self.sizes.clouds + k;
        &self.v_words[i * n..(i + 1) * n]
    }

    fn y_index(&self, cell: usize, k: usize, l: usize) -> usize {
        (cell * self.sizes.clouds + k) * self.sizes.y_per_cloud + l
    }

    fn u_index(&self, cell: usize, k: usize, j: usize) -> usize {
        (cell * self.sizes.clouds + k) * self.sizes.u_per_cloud + j
    }

    pub fn y_word(&self, cell: usize, k: usize, l: usize) -> &[u8] {
        let (n, i) = (self.n(), self.y_index(cell, k, l));
        &self.y_words[i * n..(i + 1) * n]
    }

    pub fn u_word(&self, cell: usize, k: usize, j: usize) -> &[u8] {
        let (n, i) = (self.n(), self.u_index(cell, k, j));
        &self.u_words[i * n..(i + 1) * n]
    }

    pub fn y_bin(&self, cell: usize, k: usize, l: usize) -> usize {
        self.y_bins[self.y_index(cell, k, l)] as usize
    }

    pub fn u_bin(&self, cell: usize, k: usize, j: usize) -> usize {
        self.u_bins[self.u_index(cell, k, j)] as usize
    }

    /// First `(k, ℓ, j)` in lexicographic order with the satellites in the
    /// message bins and the triple ε-typical.
    pub fn select(&self, msgs: &Messages) -> Result<Option<Selection>> {
        msgs.check(&self.sizes)?;
        let s = &self.sizes;
        let cell = s.cell(msgs.m, msgs.m_y_c, msgs.m_z_c);
        for k in 0..s.clouds {
            let ls: Vec<usize> = (0..s.y_per_cloud).filter(|&l| self.y_bin(cell, k, l) == msgs.m_y_p).collect();
            if ls.is_empty() {
                continue;
            }
            let js: Vec<usize> = (0..s.u_per_cloud).filter(|&j| self.u_bin(cell, k, j) == msgs.m_z_p).collect();
            let v = self.v_word(cell, k);
            for &l in &ls {
                let y = self.y_word(cell, k, l);
                for &j in &js {
                    if self.vyu.contains(&[v, y, self.u_word(cell, k, j)]) {
                        return Ok(Some(Selection { k, l, j }));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Selected triple, then `X^n` drawn symbolwise from `p(x|y,u)`.
    pub fn encode<R: Rng>(&self, msgs: &Messages, rng: &mut R) -> Result<std::result::Result<Vec<u8>, EncodeFailure>> {
        let Some(sel) = self.select(msgs)? else { return Ok(Err(EncodeFailure)) };
        let cell = self.sizes.cell(msgs.m, msgs.m_y_c, msgs.m_z_c);
        let y = self.y_word(cell, sel.k, sel.l);
        let u = self.u_word(cell, sel.k, sel.j);
        Ok(Ok(y
            .iter()
            .zip(u)
            .map(|(&ys, &us)| draw(&self.x_given_yu[ys as usize * self.u_size + us as usize], rng.random()))
            .collect()))
    }

    /// Passes `x` through the channel, returning `(y, z)`.
    pub fn transmit<R: Rng>(&self, x: &[u8], rng: &mut R) -> (Vec<u8>, Vec<u8>) {
        x.iter()
            .map(|&s| {
                let yz = draw(&self.yz_given_x[s as usize], rng.random()) as usize;
                ((yz / self.z_size) as u8, (yz % self.z_size) as u8)
            })
            .unzip()
    }

    /// Unique `(m, m_Y^c, m_Y^p)` whose bin (with the known `m_Z^c`) holds `y`,
    /// provided `y` is ε̃-typical.
    pub fn decode_y(&self, y: &[u8], m_z_c: usize) -> Result<std::result::Result<(usize, usize, usize), DecodeError>> {
        if m_z_c >= self.sizes.m_z_c || y.len() != self.n() {
            return Err(SimError::Message(format!("side information {m_z_c} or word length {}", y.len())));
        }
        if !self.y_typ.contains(&[y]) {
            return Ok(Err(DecodeError::NotFound));
        }
        let per_cell = self.sizes.clouds * self.sizes.y_per_cloud;
        let mut found = BTreeSet::new();
        for &i in self.y_lookup.get(&pack(y)).map(Vec::as_slice).unwrap_or(&[]) {
            let cell = i as usize / per_cell;
            let (m, myc, mzc) = self.sizes.split_cell(cell);
            if mzc == m_z_c {
                found.insert((m, myc, self.y_bins[i as usize] as usize));
            }
        }
        Ok(unique(found))
    }

    /// Unique `(m, m_Z^c, m_Z^p)` whose bin (with the known `m_Y^c`) holds a
    /// u-word jointly ε̃-typical with `z`.
    pub fn decode_z(&self, z: &[u8], m_y_c: usize) -> Result<std::result::Result<(usize, usize, usize), DecodeError>> {
        if m_y_c >= self.sizes.m_y_c || z.len() != self.n() {
            return Err(SimError::Message(format!("side information {m_y_c} or word length {}", z.len())));
        }
        let s = &self.sizes;
        let mut found = BTreeSet::new();
        for m in 0..s.m {
            for mzc in 0..s.m_z_c {
                let cell = s.cell(m, m_y_c, mzc);
                for k in 0..s.clouds {
                    for j in 0..s.u_per_cloud {
                        let key = (m, mzc, self.u_bin(cell, k, j));
                        if !found.contains(&key) && self.uz_typ.contains(&[self.u_word(cell, k, j), z]) {
                            found.insert(key);
                            if found.len() > 1 {
                                return Ok(Err(DecodeError::Ambiguous));
                            }
                        }
                    }
                }
            }
        }
        Ok(unique(found))
    }

    /// One transmission with fresh messages; the RNG drives messages,
    /// the input draw and the channel.
    pub fn trial<R: Rng>(&self, rng: &mut R) -> Result<TrialOutcome> {
        let msgs = Messages::random(&self.sizes, rng);
        let x = match self.encode(&msgs, rng)? {
            Ok(x) => x,
            Err(EncodeFailure) => return Ok(TrialOutcome { encoded: false, y: None, z: None }),
        };
        let (y, z) = self.transmit(&x, rng);
        let y_out = self.decode_y(&y, msgs.m_z_c)?;
        let z_out = self.decode_z(&z, msgs.m_y_c)?;
        let judge = |out: std::result::Result<(usize, usize, usize), DecodeError>, want: (usize, usize, usize)| match out {
            Ok(got) if got == want => None,
            Ok(_) => Some(DecodeOutcome::Wrong),
            Err(DecodeError::NotFound) => Some(DecodeOutcome::NotFound),
            Err(DecodeError::Ambiguous) => Some(DecodeOutcome::Ambiguous),
        };
        Ok(TrialOutcome {
            encoded: true,
            y: judge(y_out, (msgs.m, msgs.m_y_c, msgs.m_y_p)),
            z: judge(z_out, (msgs.m, msgs.m_z_c, msgs.m_z_p)),
        })
    }
}

fn unique(found: BTreeSet<(usize, usize, usize)>) -> std::result::Result<(usize, usize, usize), DecodeError> {
    let mut it = found.into_iter();
    match (it.next(), it.next()) {
        (Some(x), None) => Ok(x),
        (None, _) => Err(DecodeError::NotFound),
        _ => Err(DecodeError::Ambiguous),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeOutcome {
    NotFound,
    Ambiguous,
    Wrong,
}

/// Per-trial result; `None` in a receiver slot means correct decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub encoded: bool,
    pub y: Option<DecodeOutcome>,
    pub z: Option<DecodeOutcome>,
}

/// Error counts. A failed encoding counts as an error at both receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub encode_failures: u64,
    pub y_errors: u64,
    pub z_errors: u64,
    /// Trials with any error.
    pub errors: u64,
    pub y_not_found: u64,
    pub y_ambiguous: u64,
    pub z_not_found: u64,
    pub z_ambiguous: u64,
}

impl TrialStats {
    fn record(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        if !o.encoded {
            self.encode_failures += 1;
            self.y_errors += 1;
            self.z_errors += 1;
            self.errors += 1;
            return;
        }
        let tally = |out: Option<DecodeOutcome>, errors: &mut u64, nf: &mut u64, amb: &mut u64| {
            if let Some(e) = out {
                *errors += 1;
                match e {
                    DecodeOutcome::NotFound => *nf += 1,
                    DecodeOutcome::Ambiguous => *amb += 1,
                    DecodeOutcome::Wrong => {}
                }
            }
        };
        tally(o.y, &mut self.y_errors, &mut self.y_not_found, &mut self.y_ambiguous);
        tally(o.z, &mut self.z_errors, &mut self.z_not_found, &mut self.z_ambiguous);
        if o.y.is_some() || o.z.is_some() {
            self.errors += 1;
        }
    }

    fn merge(mut self, o: TrialStats) -> TrialStats {
        self.trials += o.trials;
        self.encode_failures += o.encode_failures;
        self.y_errors += o.y_errors;
        self.z_errors += o.z_errors;
        self.errors += o.errors;
        self.y_not_found += o.y_not_found;
        self.y_ambiguous += o.y_ambiguous;
        self.z_not_found += o.z_not_found;
        self.z_ambiguous += o.z_ambiguous;
        self
    }

    fn rate(&self, k: u64) -> f64 {
        k as f64 / self.trials.max(1) as f64
    }
    pub fn error_rate(&self) -> f64 {
        self.rate(self.errors)
    }
    pub fn y_error_rate(&self) -> f64 {
        self.rate(self.y_errors)
    }
    pub fn z_error_rate(&self) -> f64 {
        self.rate(self.z_errors)
    }
    pub fn encode_failure_rate(&self) -> f64 {
        self.rate(self.encode_failures)
    }
}

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial + 1);
    rng
}

pub fn run_codebook(cb: &MartonCodebook, trials: u64) -> Result<TrialStats> {
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let seed = cb.params.seed;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut s = TrialStats::default();
            s.record(&cb.trial(&mut trial_rng(seed, t))?);
            Ok(s)
        })
        .try_reduce(TrialStats::default, |a, b| Ok(a.merge(b)))
}

pub fn run_trials(c: &BroadcastChannel, a: &AuxiliaryInput, p: &CodeParams, trials: u64) -> Result<TrialStats> {
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    run_codebook(&build_codebook(c, a, p)?, trials)
}

/// One row of a trend report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub label: String,
    pub n: usize,
    pub sizes: CodeSizes,
    pub stats: TrialStats,
    pub error_rate: f64,
    pub y_error_rate: f64,
    pub z_error_rate: f64,
}

/// Runs `p` at every blocklength in `ns`.
pub fn trend(
    label: &str,
    c: &BroadcastChannel,
    a: &AuxiliaryInput,
    p: &CodeParams,
    ns: &[usize],
    trials: u64,
) -> Result<Vec<TrendRow>> {
    ns.iter()
        .map(|&n| {
            let q = CodeParams { n, ..p.clone() };
            let stats = run_trials(c, a, &q, trials)?;
            Ok(TrendRow {
                label: label.to_string(),
                n,
                sizes: q.sizes()?,
                stats,
                error_rate: stats.error_rate(),
                y_error_rate: stats.y_error_rate(),
                z_error_rate: stats.z_error_rate(),
            })
        })
        .collect()
}
