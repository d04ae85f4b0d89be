//! Reference values for the four worked channels, each checked against a
//! closed form or a cross-evaluation.

use anyhow::Result;
use serde::Serialize;

use sdbc::channels::{make_adder_erasure, make_bsc_pair, AuxiliaryInput, BroadcastChannel};
use sdbc::feedback::{
    adder_p2_star, certify_adder_gain, example4_uselessness_check, theorem3_uselessness_check, verify_certificate,
    weight_vectors, GainBudget, GainMode,
};
use sdbc::info::{binary_entropy_inv, hb, Pmf};
use sdbc::optimizer::{boundary_r_y, maximize_weighted, symmetric_adder_search, Objective, SearchConfig};
use sdbc::regions::{evaluate, RegionKind};

pub const ALL: [&str; 4] = ["example1", "example2", "example3", "example4"];

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    /// `"abs"`: `|value − target| ≤ tolerance`; `"above"`: `value > target`.
    pub rule: &'static str,
    pub pass: bool,
}

impl Check {
    fn close(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance;
        Check { name: name.into(), value, target, tolerance, rule: "abs", pass }
    }
    fn above(name: impl Into<String>, value: f64, target: f64) -> Self {
        Check { name: name.into(), value, target, tolerance: 0.0, rule: "above", pass: value > target }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub name: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Settings {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub weight_vectors: usize,
}

impl Settings {
    fn search(&self, c: &BroadcastChannel) -> SearchConfig {
        SearchConfig { restarts: self.restarts, iterations: self.iterations, seed: self.seed, ..SearchConfig::for_channel(c) }
    }
}

const SUM_RATE: [f64; 5] = [0.0, 1.0, 0.0, 1.0, 1.0];

pub fn adder_sum_rate(p: f64) -> f64 {
    let k = 2f64.powf(1.0 / p);
    1.0 - p + p * hb(1.0 / (1.0 + k)) + k / (1.0 + k)
}

fn example1(s: &Settings) -> Result<Vec<Check>> {
    let p = 0.25;
    let c = make_bsc_pair(p)?;
    let a = AuxiliaryInput::from_input(&Pmf::uniform(2));
    let r = evaluate(RegionKind::Cor3FmsiAtZ, &c, &a)?;
    let want = [1.0, 1.0 - hb(p), 1.0];
    let mut out: Vec<Check> = r
        .constraints
        .iter()
        .zip(want)
        .map(|(k, w)| Check::close(format!("cor3 {}", k.label), k.rhs, w, 1e-9))
        .collect();
    let res = maximize_weighted(RegionKind::Cor4FmsiBoth, &c, [0.0, 0.0, 1.0, 0.0, 1.0], &s.search(&c))?;
    out.push(Check::close("cor4 sum-rate", res.value, 2.0 - hb(p), 1e-3));
    Ok(out)
}

fn example2(s: &Settings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for p in [0.3, 0.5, 0.8, 1.0] {
        let c = make_adder_erasure(p)?;
        let res = maximize_weighted(RegionKind::Cor2FmsiAtY, &c, SUM_RATE, &s.search(&c))?;
        out.push(Check::close(format!("cor2 sum-rate p={p}"), res.value, adder_sum_rate(p), 1e-3));
    }
    let c = make_adder_erasure(1.0)?;
    let a = symmetric_adder_search(1.0, 1.0 / 3.0)?;
    let v = Objective::weighted(SUM_RATE).score(&evaluate(RegionKind::Cor2FmsiAtY, &c, &a)?);
    out.push(Check::close("cor2 sum-rate p=1 structured", v, 3f64.log2(), 1e-6));
    Ok(out)
}

fn example3(s: &Settings) -> Result<Vec<Check>> {
    let p = 0.6;
    let q = 1.0 - p;
    let c = make_adder_erasure(p)?;
    let rz_star = q * (1.0 - hb(adder_p2_star(p)));
    let mut out = Vec::new();
    for k in 0..10 {
        let r_z = rz_star + (q - rz_star) * k as f64 / 9.0;
        let res = boundary_r_y(RegionKind::Cor1NoMsiAtZ, &c, r_z, &s.search(&c))?;
        let closed = 2.0 - r_z / q - binary_entropy_inv(1.0 - r_z / q)?;
        out.push(Check::close(format!("boundary r_z={r_z:.6}"), res.value, closed, 1e-3));
    }
    for mode in [GainMode::NoMsi, GainMode::PmsiAtY] {
        let cert = certify_adder_gain(p, mode, 2.0, &GainBudget::default())?;
        let report = verify_certificate(&cert);
        let mut k = Check::above(format!("{} feedback margin", mode.name()), cert.margin, 0.0);
        k.pass &= report.pass;
        out.push(k);
    }
    Ok(out)
}

fn example4(s: &Settings) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let c = make_bsc_pair(0.25)?;
    let ws = weight_vectors(s.weight_vectors, &[2, 3, 4], s.seed);
    let r = theorem3_uselessness_check(&c, &ws, &s.search(&c))?;
    let worst = r.checks.iter().map(|k| k.spread).fold(0.0, f64::max);
    out.push(Check::close("full side information at Z: max spread", worst, 0.0, r.tolerance));
    let f = [0, 1, 0, 1];
    for p in [0.3, 0.5] {
        let c = sdbc::channels::make_function_erasure(&f, p)?;
        let ws = weight_vectors(s.weight_vectors, &[1, 3], s.seed);
        let r = example4_uselessness_check(&f, p, &ws, &s.search(&c))?;
        let worst = r.checks.iter().map(|k| k.spread).fold(0.0, f64::max);
        out.push(Check::close(format!("x mod 2 erasure p={p}: max spread"), worst, 0.0, r.tolerance));
    }
    Ok(out)
}

pub fn run(name: &'static str, s: &Settings) -> Result<ExampleReport> {
    let checks = match name {
        "example1" => example1(s)?,
        "example2" => example2(s)?,
        "example3" => example3(s)?,
        "example4" => example4(s)?,
        _ => unreachable!("names come from ALL"),
    };
    Ok(ExampleReport { name, pass: checks.iter().all(|k| k.pass), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_at_one_is_log3() {
        assert!((adder_sum_rate(1.0) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn example1_passes_quickly() {
        let s = Settings { restarts: 2, iterations: 60, seed: 0, weight_vectors: 2 };
        let r = run("example1", &s).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert_eq!(r.checks.len(), 4);
    }
}
