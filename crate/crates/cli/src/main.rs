//! `sdbc`: batch front-end for rate-region evaluation, optimization, exact
//! elimination checks, feedback-gain certificates and code simulation.
//!
//! Exit codes: 0 success, 1 a check failed, 2 input or precondition error,
//! 3 infeasible request.

mod channel_file;
mod examples;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sdbc::channels::{AuxiliaryInput, NamedChannel};
use sdbc::feedback::{certify_adder_gain, verify_certificate, FeedbackError, GainBudget, GainCertificate, GainMode};
use sdbc::montecarlo::{trend, CodeParams};
use sdbc::optimizer::{boundary_r_y, maximize, Objective, OptError, OptResult, SearchConfig};
use sdbc::polyhedra::theorem1_derivation_check;
use sdbc::regions::{contains, evaluate, RateTuple, RegionError, RegionKind};

use channel_file::{load_channel, ChannelFile};
use output::{emit, json_text, round_sig};

enum Failure {
    Input(anyhow::Error),
    Infeasible(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

/// `Ok(true)` when every check passed.
type CmdResult = Result<bool, Failure>;

#[derive(Parser)]
#[command(name = "sdbc", version, about = "Rate regions of semideterministic broadcast channels")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Seed for every randomized step (each command has its own default).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Search effort: optimizer restarts, or grid resolution for feedback certificates.
    #[arg(long, global = true)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Region boundaries and evaluation at a fixed input.
    #[command(subcommand)]
    Region(RegionCmd),
    /// Maximize a weighted rate sum over a region.
    Optimize(OptimizeArgs),
    /// Exact elimination checks.
    #[command(subcommand)]
    Fme(FmeCmd),
    /// Feedback-gain certificates on the adder-erasure channel.
    #[command(subcommand)]
    Feedback(FeedbackCmd),
    /// Monte-Carlo error-rate trend of the Marton code.
    Simulate {
        params: PathBuf,
    },
    /// Reference values of the worked examples.
    #[command(subcommand)]
    Examples(ExamplesCmd),
    /// Channel files for the named families.
    #[command(subcommand)]
    Channel(ChannelCmd),
}

#[derive(Subcommand)]
enum RegionCmd {
    /// CSV of the largest R_Y over a grid of R_Z values.
    Boundary {
        channel: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: RegionKind,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Upper end of the R_Z grid (exclusive); the region's largest R_Z when absent.
        #[arg(long)]
        r_z_max: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Region constraints at a given auxiliary input, optionally testing a rate tuple.
    Eval {
        channel: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: RegionKind,
        #[arg(long)]
        input: PathBuf,
        /// `R,R_Y^p,R_Y^c,R_Z^p,R_Z^c`.
        #[arg(long, value_parser = parse_five)]
        rates: Option<[f64; 5]>,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    channel: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: RegionKind,
    /// Weights on `R,R_Y^p,R_Y^c,R_Z^p,R_Z^c`.
    #[arg(long, value_parser = parse_five)]
    weights: [f64; 5],
    /// Coordinatewise lower bounds on the maximizing tuple.
    #[arg(long, value_parser = parse_five)]
    lower: Option<[f64; 5]>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    x_functional: bool,
}

#[derive(Subcommand)]
enum FmeCmd {
    /// Eliminate the codebook rates and compare with the five-row region.
    Verify {
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "no_msi")]
    NoMsi,
    #[value(name = "pmsi_y")]
    PmsiY,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<GainMode> {
        match self {
            ModeArg::NoMsi => vec![GainMode::NoMsi],
            ModeArg::PmsiY => vec![GainMode::PmsiAtY],
            ModeArg::Both => vec![GainMode::NoMsi, GainMode::PmsiAtY],
        }
    }
}

#[derive(Subcommand)]
enum FeedbackCmd {
    Certify {
        /// Erasure probability of the adder-erasure channel.
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Feedback link rate.
        #[arg(long, default_value_t = 2.0)]
        r_fb: f64,
        /// Required certified margin.
        #[arg(long, default_value_t = 0.0)]
        min_margin: f64,
    },
    /// Re-check certificates written by `feedback certify`.
    Verify {
        file: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    Check {
        #[arg(default_value = "all")]
        which: String,
        #[arg(long, default_value_t = 80)]
        iterations: usize,
        #[arg(long, default_value_t = 20)]
        weights: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Family {
    BscPair,
    AdderErasure,
    FunctionErasure,
}

#[derive(Subcommand)]
enum ChannelCmd {
    Make {
        #[arg(value_enum)]
        family: Family,
        #[arg(long)]
        p: f64,
        /// Comma-separated map `f(x)` for function-erasure channels.
        #[arg(long, value_delimiter = ',')]
        f: Vec<usize>,
    },
}

fn parse_kind(s: &str) -> Result<RegionKind, String> {
    RegionKind::parse(s).ok_or_else(|| {
        let names: Vec<String> = RegionKind::ALL.iter().map(|k| format!("{k:?}")).collect();
        format!("unknown region kind {s:?}; one of {}", names.join(", "))
    })
}

fn parse_five(s: &str) -> Result<[f64; 5], String> {
    let v: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 5 comma-separated values, got {}", v.len()))
}

struct Globals {
    seed: Option<u64>,
    out: Option<PathBuf>,
    budget: Option<usize>,
}

impl Globals {
    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

fn search_cfg(c: &sdbc::channels::BroadcastChannel, g: &Globals, iterations: Option<usize>) -> SearchConfig {
    let base = SearchConfig::for_channel(c);
    SearchConfig {
        restarts: g.budget.unwrap_or(base.restarts),
        iterations: iterations.unwrap_or(base.iterations),
        seed: g.seed.unwrap_or(0),
        ..base
    }
}

fn slug(kind: RegionKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_lowercase)).unwrap_or_default()
}

/// `None` when no input met the lower bounds (the search then has no maximizing tuple).
fn search_outcome(r: Result<OptResult, OptError>) -> Result<Option<OptResult>, Failure> {
    match r {
        Ok(res) if res.point.is_some() && res.value.is_finite() => Ok(Some(res)),
        Ok(_) | Err(OptError::Region(RegionError::Infeasible { .. })) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn region_boundary(
    g: &Globals,
    path: &Path,
    kind: RegionKind,
    grid: usize,
    r_z_max: Option<f64>,
    iterations: Option<usize>,
) -> CmdResult {
    if grid == 0 {
        return Err(anyhow!("--grid must be at least 1").into());
    }
    let c = load_channel(path)?;
    let cfg = search_cfg(&c, g, iterations);
    let (ys, zs) = kind.private_slots();
    let top = match r_z_max {
        Some(v) if v.is_finite() && v >= 0.0 => v,
        Some(v) => return Err(anyhow!("--r-z-max must be a nonnegative number, got {v}").into()),
        None => {
            let mut w = [0.0; 5];
            w[zs] = 1.0;
            maximize(&kind, &c, &Objective::weighted(w), &cfg)?.value
        }
    };
    let r_z: Vec<f64> = (0..grid).map(|i| top * i as f64 / grid as f64).collect();
    let found = r_z
        .iter()
        .map(|&rz| search_outcome(boundary_r_y(kind, &c, rz, &cfg)))
        .collect::<Result<Vec<_>, _>>()?;

    // A certificate for R_Z ≥ r' also serves every r ≤ r'.
    let mut used: Vec<Option<usize>> = vec![None; grid];
    let mut best: Option<usize> = None;
    for i in (0..grid).rev() {
        if let Some(res) = &found[i] {
            if best.is_none_or(|b| res.value > found[b].as_ref().unwrap().value) {
                best = Some(i);
            }
        }
        used[i] = best;
    }
    if let Some(i) = used.iter().position(Option::is_none) {
        return Err(Failure::Infeasible(anyhow!("no input reaches R_Z = {} for {kind:?}", r_z[i])));
    }

    let id = |j: usize| format!("{}-{j:03}", slug(kind));
    let mut csv = String::from("r_z,r_y_max,certificate_id\n");
    for (i, u) in used.iter().enumerate() {
        let j = u.unwrap();
        let v = found[j].as_ref().unwrap().value;
        csv.push_str(&format!("{},{},{}\n", round_sig(r_z[i]), round_sig(v), id(j)));
    }
    emit(g.out(), &csv)?;

    if let Some(out) = g.out() {
        let certs: Vec<Value> = found
            .iter()
            .enumerate()
            .filter_map(|(j, r)| r.as_ref().map(|r| (j, r)))
            .map(|(j, r)| {
                let point = r.point.map(|t| t.to_array());
                json!({ "id": id(j), "r_z": r_z[j], "r_y": point.map(|p| p[ys]), "value": r.value, "point": point, "input": r.argument })
            })
            .collect();
        let side = json!({
            "config": { "command": "region boundary", "channel": path, "kind": kind, "grid": grid,
                        "r_z_max": top, "search": cfg },
            "certificates": certs,
        });
        let mut p = out.as_os_str().to_owned();
        p.push(".certificates.json");
        std::fs::write(&p, json_text(side)).with_context(|| format!("writing {}", Path::new(&p).display()))?;
    }
    Ok(true)
}

fn region_eval(g: &Globals, path: &Path, kind: RegionKind, input: &Path, rates: Option<[f64; 5]>) -> CmdResult {
    let c = load_channel(path)?;
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let a: AuxiliaryInput = serde_json::from_str(&text).with_context(|| format!("parsing {}", input.display()))?;
    let region = evaluate(kind, &c, &a)?;
    let membership = rates.map(|r| contains(&region, &RateTuple::from_array(r)));
    let pass = membership.as_ref().is_none_or(|m| m.inside);
    let out = json!({
        "config": { "command": "region eval", "channel": path, "kind": kind, "input_file": input, "rates": rates },
        "constraints": region.constraints,
        "pinned_zero": region.pinned_zero,
        "membership": membership,
    });
    emit(g.out(), &json_text(out))?;
    Ok(pass)
}

fn optimize(g: &Globals, a: &OptimizeArgs) -> CmdResult {
    let c = load_channel(&a.channel)?;
    let mut cfg = search_cfg(&c, g, a.iterations);
    cfg.enforce_x_functional |= a.x_functional;
    let mut obj = Objective::weighted(a.weights);
    if let Some(l) = a.lower {
        obj.lower = l;
    }
    let Some(res) = search_outcome(maximize(&a.kind, &c, &obj, &cfg))? else {
        return Err(Failure::Infeasible(anyhow!("no input meets the lower bounds")));
    };
    let out = json!({
        "config": { "command": "optimize", "channel": a.channel, "kind": a.kind, "weights": a.weights,
                    "lower": obj.lower, "search": cfg },
        "value": res.value,
        "point": res.point.map(|t| t.to_array()),
        "trace": res.trace,
        "best_restart": res.best_restart,
        "budget_exhausted": res.budget_exhausted,
        "argument": res.argument,
    });
    emit(g.out(), &json_text(out))?;
    Ok(true)
}

fn fme_verify(g: &Globals, samples: usize) -> CmdResult {
    let seed = g.seed.unwrap_or(7);
    let report = theorem1_derivation_check(samples, seed)?;
    let pass = report.mutual;
    let out = json!({ "config": { "command": "fme verify", "samples": samples, "seed": seed }, "pass": pass, "report": report });
    emit(g.out(), &json_text(out))?;
    Ok(pass)
}

fn feedback_failure(e: FeedbackError) -> Failure {
    match e {
        FeedbackError::NotFound => Failure::Infeasible(e.into()),
        e => Failure::Input(e.into()),
    }
}

fn feedback_certify(g: &Globals, p: f64, mode: ModeArg, r_fb: f64, min_margin: f64) -> CmdResult {
    let budget = g.budget.map_or_else(GainBudget::default, GainBudget::scaled);
    let mut entries = Vec::new();
    let mut pass = true;
    for m in mode.modes() {
        let cert = certify_adder_gain(p, m, r_fb, &budget).map_err(feedback_failure)?;
        let report = verify_certificate(&cert);
        let ok = report.pass && cert.margin > min_margin;
        pass &= ok;
        entries.push(json!({ "mode": m, "margin": cert.margin, "pass": ok, "verification": report, "certificate": cert }));
    }
    let out = json!({
        "config": { "command": "feedback certify", "p": p, "r_fb": r_fb, "min_margin": min_margin, "budget": budget },
        "pass": pass,
        "certificates": entries,
    });
    emit(g.out(), &json_text(out))?;
    Ok(pass)
}

fn certificates_in(v: Value) -> anyhow::Result<Vec<GainCertificate>> {
    let raw: Vec<Value> = match v {
        Value::Object(mut m) if m.contains_key("certificates") => match m.remove("certificates") {
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|mut it| it.get_mut("certificate").map(Value::take).unwrap_or(it))
                .collect(),
            _ => bail!("\"certificates\" must be an array"),
        },
        Value::Object(mut m) if m.contains_key("certificate") => vec![m.remove("certificate").unwrap()],
        Value::Array(items) => items,
        other => vec![other],
    };
    raw.into_iter().map(|c| Ok(serde_json::from_value(c)?)).collect()
}

fn feedback_verify(g: &Globals, file: &Path) -> CmdResult {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    let certs = certificates_in(v).with_context(|| format!("no certificate in {}", file.display()))?;
    if certs.is_empty() {
        return Err(anyhow!("no certificate in {}", file.display()).into());
    }
    let reports: Vec<_> = certs.iter().map(verify_certificate).collect();
    let pass = reports.iter().all(|r| r.pass);
    let out = json!({ "config": { "command": "feedback verify", "file": file }, "pass": pass, "reports": reports });
    emit(g.out(), &json_text(out))?;
    Ok(pass)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    channel: ChannelFile,
    input: AuxiliaryInput,
    /// The block length `n` here is ignored; `ns` lists the lengths to run.
    code: CodeParams,
    ns: Vec<usize>,
    trials: u64,
    #[serde(default)]
    label: Option<String>,
}

fn simulate(g: &Globals, path: &Path) -> CmdResult {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut params: SimulateFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = g.seed {
        params.code.seed = s;
    }
    if params.ns.is_empty() {
        return Err(anyhow!("ns must list at least one block length").into());
    }
    let c = params.channel.clone().into_channel()?;
    let label = params.label.clone().unwrap_or_else(|| "trend".into());
    let rows = trend(&label, &c, &params.input, &params.code, &params.ns, params.trials)?;
    let out = json!({ "config": params, "rows": rows });
    emit(g.out(), &json_text(out))?;
    Ok(true)
}

fn examples_check(g: &Globals, which: &str, iterations: usize, weights: usize) -> CmdResult {
    let names: Vec<&'static str> = match which {
        "all" => examples::ALL.to_vec(),
        w => match examples::ALL.iter().find(|&&n| n == w) {
            Some(&n) => vec![n],
            None => return Err(anyhow!("unknown example {w:?}; one of all, {}", examples::ALL.join(", ")).into()),
        },
    };
    let settings = examples::Settings { restarts: g.budget.unwrap_or(4), iterations, seed: g.seed.unwrap_or(0), weight_vectors: weights };
    let reports = names.into_iter().map(|n| examples::run(n, &settings)).collect::<anyhow::Result<Vec<_>>>()?;
    let pass = reports.iter().all(|r| r.pass);
    let out = json!({ "config": { "command": "examples check", "which": which, "settings": settings }, "pass": pass, "examples": reports });
    emit(g.out(), &json_text(out))?;
    Ok(pass)
}

fn channel_make(g: &Globals, family: Family, p: f64, f: Vec<usize>) -> CmdResult {
    let origin = match family {
        Family::BscPair => NamedChannel::BscPair { p },
        Family::AdderErasure => NamedChannel::AdderErasure { p },
        Family::FunctionErasure if f.is_empty() => return Err(anyhow!("function_erasure needs --f").into()),
        Family::FunctionErasure => NamedChannel::FunctionErasure { f, p },
    };
    let file = ChannelFile::named(&origin)?;
    emit(g.out(), &(serde_json::to_string_pretty(&file)? + "\n"))?;
    Ok(true)
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SDBC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("SDBC_THREADS={v:?} is not a thread count"))?;
    if n == 0 {
        bail!("SDBC_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    let g = Globals { seed: cli.seed, out: cli.out, budget: cli.budget };
    match cli.cmd {
        Cmd::Region(RegionCmd::Boundary { channel, kind, grid, r_z_max, iterations }) => {
            region_boundary(&g, &channel, kind, grid, r_z_max, iterations)
        }
        Cmd::Region(RegionCmd::Eval { channel, kind, input, rates }) => region_eval(&g, &channel, kind, &input, rates),
        Cmd::Optimize(a) => optimize(&g, &a),
        Cmd::Fme(FmeCmd::Verify { samples }) => fme_verify(&g, samples),
        Cmd::Feedback(FeedbackCmd::Certify { p, mode, r_fb, min_margin }) => {
            feedback_certify(&g, p, mode, r_fb, min_margin)
        }
        Cmd::Feedback(FeedbackCmd::Verify { file }) => feedback_verify(&g, &file),
        Cmd::Simulate { params } => simulate(&g, &params),
        Cmd::Examples(ExamplesCmd::Check { which, iterations, weights }) => {
            examples_check(&g, &which, iterations, weights)
        }
        Cmd::Channel(ChannelCmd::Make { family, p, f }) => channel_make(&g, family, p, f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(3)
        }
    }
}
