//! Broadcast channels `W(y,z|x)`, auxiliary inputs, and the named example channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::{Axis, ConditionalKernel, InfoError, JointPmf, Pmf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("parameter {0} outside [0,1]")]
    Parameter(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("deterministic map violated at x={x}: mass {mass} off y=f(x)")]
    NotDeterministic { x: usize, mass: f64 },
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// Provenance of a channel built by one of the named constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NamedChannel {
    BscPair { p: f64 },
    AdderErasure { p: f64 },
    FunctionErasure { f: Vec<usize>, p: f64 },
}

/// Finite-alphabet kernel `W(y,z|x)`; kernel columns are `(y,z)` with z fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastChannel {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    kernel: ConditionalKernel,
    deterministic_map: Option<Vec<usize>>,
    origin: Option<NamedChannel>,
}

impl BroadcastChannel {
    /// `rows[x][y * z_size + z] = W(y,z|x)`.
    pub fn new(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        rows: Vec<Vec<f64>>,
        deterministic_map: Option<Vec<usize>>,
    ) -> Result<Self> {
        let kernel = ConditionalKernel::new(
            vec![Axis::new("X", x_size)],
            vec![Axis::new("Y", y_size), Axis::new("Z", z_size)],
            rows,
        )?;
        if let Some(f) = &deterministic_map {
            if f.len() != x_size || f.iter().any(|&y| y >= y_size) {
                return Err(ChannelError::Dimension(format!(
                    "f must map {x_size} inputs into 0..{y_size}"
                )));
            }
            for (x, &fx) in f.iter().enumerate() {
                let row = kernel.row(x);
                let off: f64 = (0..y_size)
                    .filter(|&y| y != fx)
                    .flat_map(|y| row[y * z_size..(y + 1) * z_size].iter())
                    .sum();
                if off > 1e-12 {
                    return Err(ChannelError::NotDeterministic { x, mass: off });
                }
            }
        }
        Ok(Self { x_size, y_size, z_size, kernel, deterministic_map, origin: None })
    }

    /// Semideterministic channel from `f: X→Y` and `W(z|x)`.
    pub fn semideterministic(f: Vec<usize>, y_size: usize, w_z: Vec<Vec<f64>>) -> Result<Self> {
        let x_size = f.len();
        if w_z.len() != x_size {
            return Err(ChannelError::Dimension("one W(z|x) row per input".into()));
        }
        let z_size = w_z.first().map_or(0, Vec::len);
        let rows = f
            .iter()
            .zip(&w_z)
            .map(|(&fx, wz)| {
                let mut r = vec![0.0; y_size * z_size];
                if fx < y_size {
                    r[fx * z_size..(fx + 1) * z_size].copy_from_slice(wz);
                }
                r
            })
            .collect();
        Self::new(x_size, y_size, z_size, rows, Some(f))
    }

    fn with_origin(mut self, origin: NamedChannel) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }
    pub fn y_size(&self) -> usize {
        self.y_size
    }
    pub fn z_size(&self) -> usize {
        self.z_size
    }
    pub fn kernel(&self) -> &ConditionalKernel {
        &self.kernel
    }
    /// Row `x` of the kernel, indexed by `y * z_size + z`.
    pub fn row(&self, x: usize) -> &[f64] {
        self.kernel.row(x)
    }
    pub fn deterministic_map(&self) -> Option<&[usize]> {
        self.deterministic_map.as_deref()
    }
    pub fn origin(&self) -> Option<&NamedChannel> {
        self.origin.as_ref()
    }

    /// The map `f` with `Σ_z W(f(x),z|x) ≥ 1 − tol` for every x, if one exists.
    pub fn is_semideterministic(&self, tol: f64) -> Option<Vec<usize>> {
        (0..self.x_size)
            .map(|x| {
                let row = self.row(x);
                (0..self.y_size).find(|&y| {
                    row[y * self.z_size..(y + 1) * self.z_size].iter().sum::<f64>() >= 1.0 - tol
                })
            })
            .collect()
    }

    /// Map `f`, either declared or detected with tolerance 1e-12.
    pub fn f_map(&self) -> Option<Vec<usize>> {
        self.deterministic_map.clone().or_else(|| self.is_semideterministic(1e-12))
    }

    /// Channel whose Y-output is the pair `(y, z)` (index `y * z_size + z`).
    pub fn enhance(&self) -> BroadcastChannel {
        let (ys, zs) = (self.y_size * self.z_size, self.z_size);
        let rows: Vec<Vec<f64>> = (0..self.x_size)
            .map(|x| {
                let mut r = vec![0.0; ys * zs];
                for (yz, &w) in self.row(x).iter().enumerate() {
                    r[yz * zs + yz % zs] = w;
                }
                r
            })
            .collect();
        let mut out = BroadcastChannel::new(self.x_size, ys, zs, rows, None)
            .expect("enhanced kernel inherits validity");
        out.deterministic_map = out.is_semideterministic(1e-12);
        out
    }

    /// `W(z|x)` marginal rows.
    pub fn z_rows(&self) -> Vec<Vec<f64>> {
        (0..self.x_size)
            .map(|x| {
                let row = self.row(x);
                (0..self.z_size)
                    .map(|z| (0..self.y_size).map(|y| row[y * self.z_size + z]).sum())
                    .collect()
            })
            .collect()
    }

    /// Joint over `(V,U,X,Y,Z)` as `p(v,u) p(x|u) W(y,z|x)`.
    pub fn induced_joint(&self, a: &AuxiliaryInput) -> Result<JointPmf> {
        if a.x_size() != self.x_size {
            return Err(ChannelError::Dimension(format!(
                "auxiliary input has |X|={} but channel has |X|={}",
                a.x_size(),
                self.x_size
            )));
        }
        let yz = self.y_size * self.z_size;
        let mut mass = Vec::with_capacity(a.v_size() * a.u_size() * self.x_size * yz);
        for v in 0..a.v_size() {
            for u in 0..a.u_size() {
                let pvu = a.p_vu_at(v, u);
                for x in 0..self.x_size {
                    let pvux = pvu * a.p_x_given_u_at(u, x);
                    mass.extend(self.row(x).iter().map(|&w| pvux * w));
                }
            }
        }
        Ok(JointPmf::from_sizes(
            &[
                ("V", a.v_size()),
                ("U", a.u_size()),
                ("X", self.x_size),
                ("Y", self.y_size),
                ("Z", self.z_size),
            ],
            mass,
        )?)
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ChannelError::Parameter(p))
    }
}

/// `Y = X`, `Z = X ⊕ S` with `S ~ Ber(p)`.
pub fn make_bsc_pair(p: f64) -> Result<BroadcastChannel> {
    check_p(p)?;
    let w = vec![vec![1.0 - p, p], vec![p, 1.0 - p]];
    Ok(BroadcastChannel::semideterministic(vec![0, 1], 2, w)?.with_origin(NamedChannel::BscPair { p }))
}

/// `X = (X1, X2)` flattened as `2·x1 + x2`; `Y = X1 + X2`; `Z = X2` or erasure
/// (index 2) with probability `p`.
pub fn make_adder_erasure(p: f64) -> Result<BroadcastChannel> {
    check_p(p)?;
    let f = (0..4).map(|x| x / 2 + x % 2).collect();
    let w = (0..4)
        .map(|x| {
            let mut r = vec![0.0; 3];
            r[x % 2] = 1.0 - p;
            r[2] += p;
            r
        })
        .collect();
    Ok(BroadcastChannel::semideterministic(f, 3, w)?.with_origin(NamedChannel::AdderErasure { p }))
}

/// `Y = f(X)`; `Z = X` or erasure (index `|X|`) with probability `p`.
pub fn make_function_erasure(f: &[usize], p: f64) -> Result<BroadcastChannel> {
    check_p(p)?;
    if f.is_empty() {
        return Err(ChannelError::Dimension("empty f-table".into()));
    }
    let xs = f.len();
    let ys = f.iter().max().unwrap() + 1;
    let w = (0..xs)
        .map(|x| {
            let mut r = vec![0.0; xs + 1];
            r[x] = 1.0 - p;
            r[xs] += p;
            r
        })
        .collect();
    Ok(BroadcastChannel::semideterministic(f.to_vec(), ys, w)?
        .with_origin(NamedChannel::FunctionErasure { f: f.to_vec(), p }))
}

#[derive(Serialize, Deserialize)]
struct RawAux {
    v_size: usize,
    u_size: usize,
    x_size: usize,
    p_vu: Vec<Vec<f64>>,
    p_x_given_u: Vec<Vec<f64>>,
}

/// `p(v,u) p(x|u)`: the auxiliary part of the input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAux", into = "RawAux")]
pub struct AuxiliaryInput {
    p_vu: JointPmf,
    p_x_given_u: ConditionalKernel,
}

impl TryFrom<RawAux> for AuxiliaryInput {
    type Error = ChannelError;
    fn try_from(r: RawAux) -> Result<Self> {
        if r.p_vu.len() != r.v_size || r.p_vu.iter().any(|row| row.len() != r.u_size) {
            return Err(ChannelError::Dimension("p_vu must be v_size × u_size".into()));
        }
        if r.p_x_given_u.iter().any(|row| row.len() != r.x_size) {
            return Err(ChannelError::Dimension("p_x_given_u rows must have x_size entries".into()));
        }
        AuxiliaryInput::new(r.v_size, r.u_size, r.p_vu.concat(), r.p_x_given_u)
    }
}

impl From<AuxiliaryInput> for RawAux {
    fn from(a: AuxiliaryInput) -> Self {
        let us = a.u_size();
        RawAux {
            v_size: a.v_size(),
            u_size: us,
            x_size: a.x_size(),
            p_vu: a.p_vu.mass().chunks(us).map(<[f64]>::to_vec).collect(),
            p_x_given_u: a.p_x_given_u.rows().to_vec(),
        }
    }
}

impl AuxiliaryInput {
    /// `p_vu[v * u_size + u]`, `p_x_given_u[u][x]`.
    pub fn new(v_size: usize, u_size: usize, p_vu: Vec<f64>, p_x_given_u: Vec<Vec<f64>>) -> Result<Self> {
        let p_vu = JointPmf::from_sizes(&[("V", v_size), ("U", u_size)], p_vu)?;
        let x_size = p_x_given_u.first().map_or(0, Vec::len);
        let p_x_given_u =
            ConditionalKernel::new(vec![Axis::new("U", u_size)], vec![Axis::new("X", x_size)], p_x_given_u)?;
        Ok(Self { p_vu, p_x_given_u })
    }

    /// Constant `V`, given `p(u)` and `p(x|u)`.
    pub fn with_constant_v(p_u: &[f64], p_x_given_u: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(1, p_u.len(), p_u.to_vec(), p_x_given_u)
    }

    /// `V = U`, given `p(u)` and `p(x|u)`.
    pub fn with_v_equal_u(p_u: &[f64], p_x_given_u: Vec<Vec<f64>>) -> Result<Self> {
        let n = p_u.len();
        let mut vu = vec![0.0; n * n];
        for (u, &p) in p_u.iter().enumerate() {
            vu[u * n + u] = p;
        }
        Self::new(n, n, vu, p_x_given_u)
    }

    /// `V` constant and `U = X ~ p_x`.
    pub fn from_input(p_x: &Pmf) -> Self {
        let n = p_x.support_size();
        let rows = (0..n).map(|u| Pmf::point(n, u).mass().to_vec()).collect();
        Self::with_constant_v(p_x.mass(), rows).expect("point-mass rows are valid")
    }

    pub fn v_size(&self) -> usize {
        self.p_vu.axes()[0].size
    }
    pub fn u_size(&self) -> usize {
        self.p_vu.axes()[1].size
    }
    pub fn x_size(&self) -> usize {
        self.p_x_given_u.to_axes()[0].size
    }
    pub fn p_vu(&self) -> &JointPmf {
        &self.p_vu
    }
    pub fn p_x_given_u(&self) -> &ConditionalKernel {
        &self.p_x_given_u
    }
    #[inline]
    pub fn p_vu_at(&self, v: usize, u: usize) -> f64 {
        self.p_vu.mass()[v * self.u_size() + u]
    }
    #[inline]
    pub fn p_x_given_u_at(&self, u: usize, x: usize) -> f64 {
        self.p_x_given_u.row(u)[x]
    }

    pub fn p_u(&self) -> Vec<f64> {
        let us = self.u_size();
        let mut out = vec![0.0; us];
        for (i, &m) in self.p_vu.mass().iter().enumerate() {
            out[i % us] += m;
        }
        out
    }

    pub fn p_x(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x_size()];
        for (u, pu) in self.p_u().into_iter().enumerate() {
            for (x, o) in out.iter_mut().enumerate() {
                *o += pu * self.p_x_given_u_at(u, x);
            }
        }
        out
    }

    /// Whether `p(x|y,u) ∈ {0,1}` within `tol` on every cell of positive mass.
    pub fn x_is_function_of_yu(&self, f: &[usize], tol: f64) -> bool {
        let pu = self.p_u();
        (0..self.u_size()).all(|u| {
            if pu[u] <= 0.0 {
                return true;
            }
            let row = self.p_x_given_u.row(u);
            let ys = f.iter().max().map_or(0, |m| m + 1);
            (0..ys).all(|y| {
                let cell: Vec<f64> = (0..row.len()).filter(|&x| f[x] == y).map(|x| row[x]).collect();
                let tot: f64 = cell.iter().sum();
                tot * pu[u] <= tol || cell.iter().all(|&w| w / tot <= tol || w / tot >= 1.0 - tol)
            })
        })
    }
}
