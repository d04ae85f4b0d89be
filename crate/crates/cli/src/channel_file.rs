//! Channel JSON ingestion.
//!
//! Kernel entries are decimal strings (`"0.25"`, `"1e-3"`, `"1/3"`) parsed to
//! exact rationals. Each row is normalized by its exact sum after checking the
//! sum is within [`ROW_TOL`] of one, then converted to `f64` once.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use sdbc::channels::{
    make_adder_erasure, make_bsc_pair, make_function_erasure, BroadcastChannel, NamedChannel,
};

pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub x_size: usize,
    pub y_size: usize,
    pub z_size: usize,
    /// `kernel[x][y * z_size + z]`.
    pub kernel: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<usize>>,
    /// Named family the kernel was generated from. When present the kernel
    /// must match the family's kernel and the named channel is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<NamedChannel>,
}

pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| anyhow!("bad numerator in {s:?}"))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| anyhow!("bad denominator in {s:?}"))?;
        if d.is_zero() {
            bail!("zero denominator in {s:?}");
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| anyhow!("bad exponent in {s:?}"))?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        bail!("not a decimal number: {s:?}");
    }
    let digits = BigInt::from_str(&format!("0{int}{frac}")).expect("digits only");
    let shift = exp - frac.len() as i32;
    let ten = BigInt::from(10u8);
    let scale = BigRational::from_integer(num_traits::pow(ten, shift.unsigned_abs() as usize));
    let mut q = BigRational::from_integer(digits);
    q = if shift >= 0 { q * scale } else { q / scale };
    Ok(if neg { -q } else { q })
}

fn exact_rows(file: &ChannelFile) -> Result<Vec<Vec<f64>>> {
    if file.x_size == 0 || file.y_size == 0 || file.z_size == 0 {
        bail!("alphabet sizes must be positive");
    }
    if file.kernel.len() != file.x_size {
        bail!("kernel has {} rows, expected x_size = {}", file.kernel.len(), file.x_size);
    }
    let width = file.y_size * file.z_size;
    let tol = BigRational::from_float(ROW_TOL).expect("finite");
    file.kernel
        .iter()
        .enumerate()
        .map(|(x, row)| {
            if row.len() != width {
                bail!("kernel row {x} has {} entries, expected y_size * z_size = {width}", row.len());
            }
            let vals = row.iter().map(|s| parse_decimal(s)).collect::<Result<Vec<_>>>()?;
            if let Some(i) = vals.iter().position(|v| v.is_negative()) {
                bail!("kernel row {x} entry {i} is negative");
            }
            let sum: BigRational = vals.iter().sum();
            if (&sum - BigRational::one()).abs() > tol {
                bail!("kernel row {x} sums to {} (tolerance {ROW_TOL})", sum.to_f64().unwrap_or(f64::NAN));
            }
            Ok(vals.iter().map(|v| (v / &sum).to_f64().expect("bounded")).collect())
        })
        .collect()
}

fn named(origin: &NamedChannel) -> Result<BroadcastChannel> {
    Ok(match origin {
        NamedChannel::BscPair { p } => make_bsc_pair(*p)?,
        NamedChannel::AdderErasure { p } => make_adder_erasure(*p)?,
        NamedChannel::FunctionErasure { f, p } => make_function_erasure(f, *p)?,
    })
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<BroadcastChannel> {
        let rows = exact_rows(&self)?;
        let c = BroadcastChannel::new(self.x_size, self.y_size, self.z_size, rows, self.f.clone())?;
        let Some(origin) = &self.origin else {
            return Ok(c);
        };
        let n = named(origin)?;
        let same_shape = (n.x_size(), n.y_size(), n.z_size()) == (c.x_size(), c.y_size(), c.z_size());
        let same = same_shape
            && (0..c.x_size()).all(|x| n.row(x).iter().zip(c.row(x)).all(|(a, b)| (a - b).abs() <= ROW_TOL));
        if !same {
            bail!("kernel does not match the declared {origin:?} family");
        }
        Ok(n)
    }

    pub fn from_channel(c: &BroadcastChannel) -> Self {
        ChannelFile {
            x_size: c.x_size(),
            y_size: c.y_size(),
            z_size: c.z_size(),
            kernel: (0..c.x_size()).map(|x| c.row(x).iter().map(|v| v.to_string()).collect()).collect(),
            f: c.deterministic_map().map(<[usize]>::to_vec),
            origin: c.origin().cloned(),
        }
    }

    pub fn named(origin: &NamedChannel) -> Result<Self> {
        Ok(Self::from_channel(&named(origin)?))
    }
}

pub fn load_channel(path: &Path) -> Result<BroadcastChannel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ChannelFile =
        serde_json::from_str(&text).with_context(|| format!("parsing channel file {}", path.display()))?;
    file.into_channel().with_context(|| format!("invalid channel in {}", path.display()))
}
