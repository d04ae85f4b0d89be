//! Every information quantity the region formulas use, computed in one pass
//! from `p(v,u) p(x|u) W(y,z|x)` without building the five-axis joint.

use serde::{Deserialize, Serialize};

use crate::channels::{AuxiliaryInput, BroadcastChannel, NamedChannel};
use crate::info::entropy_of;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoTerms {
    pub h_y: f64,
    pub h_y_given_u: f64,
    pub h_y_given_v: f64,
    pub i_u_z: f64,
    pub i_u_z_given_v: f64,
    pub i_v_y: f64,
    pub i_v_z: f64,
    pub i_u_y: f64,
    pub i_y_u_given_v: f64,
    pub i_x_z: f64,
    pub i_x_yz: f64,
    pub i_x_yz_given_u: f64,
    pub h_z_given_y: f64,
    /// `Σ_y p(y) log|X_y|` when the channel has a deterministic component.
    pub avg_log_class: Option<f64>,
    /// Erasure probability of a function-erasure channel.
    pub erasure_p: Option<f64>,
}

impl InfoTerms {
    pub fn compute(c: &BroadcastChannel, a: &AuxiliaryInput) -> InfoTerms {
        let (xs, ys, zs) = (c.x_size(), c.y_size(), c.z_size());
        let yzs = ys * zs;
        let (vs, us) = (a.v_size(), a.u_size());
        let pu = a.p_u();

        // q[u][yz] = p(y,z|u)
        let mut q = vec![0.0; us * yzs];
        let mut px = vec![0.0; xs];
        for u in 0..us {
            let qu = &mut q[u * yzs..(u + 1) * yzs];
            for x in 0..xs {
                let pxu = a.p_x_given_u_at(u, x);
                if pxu == 0.0 {
                    continue;
                }
                px[x] += pu[u] * pxu;
                for (o, &w) in qu.iter_mut().zip(c.row(x)) {
                    *o += pxu * w;
                }
            }
        }

        let mut p_uyz = vec![0.0; us * yzs];
        let mut p_yz = vec![0.0; yzs];
        for u in 0..us {
            for k in 0..yzs {
                let m = pu[u] * q[u * yzs + k];
                p_uyz[u * yzs + k] = m;
                p_yz[k] += m;
            }
        }
        let mut p_vyz = vec![0.0; vs * yzs];
        for v in 0..vs {
            for u in 0..us {
                let w = a.p_vu_at(v, u);
                if w == 0.0 {
                    continue;
                }
                let dst = &mut p_vyz[v * yzs..(v + 1) * yzs];
                for (o, &m) in dst.iter_mut().zip(&q[u * yzs..(u + 1) * yzs]) {
                    *o += w * m;
                }
            }
        }
        let p_v: Vec<f64> = (0..vs).map(|v| (0..us).map(|u| a.p_vu_at(v, u)).sum()).collect();

        // marginals of a (w × y × z) table onto (w,y) and (w,z)
        let split = |t: &[f64], w: usize| {
            let mut wy = vec![0.0; w * ys];
            let mut wz = vec![0.0; w * zs];
            for i in 0..w {
                for y in 0..ys {
                    for z in 0..zs {
                        let m = t[i * yzs + y * zs + z];
                        wy[i * ys + y] += m;
                        wz[i * zs + z] += m;
                    }
                }
            }
            (wy, wz)
        };
        let (p_y, p_z) = split(&p_yz, 1);
        let (p_uy, p_uz) = split(&p_uyz, us);
        let (p_vy, p_vz) = split(&p_vyz, vs);

        let h_y = entropy_of(&p_y);
        let h_z = entropy_of(&p_z);
        let h_yz = entropy_of(&p_yz);
        let h_u = entropy_of(&pu);
        let h_v = entropy_of(&p_v);
        let h_uy = entropy_of(&p_uy);
        let h_uz = entropy_of(&p_uz);
        let h_uyz = entropy_of(&p_uyz);
        let h_vy = entropy_of(&p_vy);
        let h_vz = entropy_of(&p_vz);

        let z_rows = c.z_rows();
        let mut h_z_given_x = 0.0;
        let mut h_yz_given_x = 0.0;
        for x in 0..xs {
            if px[x] > 0.0 {
                h_z_given_x += px[x] * entropy_of(&z_rows[x]);
                h_yz_given_x += px[x] * entropy_of(c.row(x));
            }
        }

        let h_y_given_u = h_uy - h_u;
        let h_y_given_v = h_vy - h_v;
        let i_u_z = h_u + h_z - h_uz;
        let i_v_z = h_v + h_z - h_vz;

        let avg_log_class = c.f_map().map(|f| {
            let mut sizes = vec![0usize; ys];
            for &y in &f {
                sizes[y] += 1;
            }
            p_y.iter().zip(&sizes).filter(|(_, &s)| s > 0).map(|(&p, &s)| p * (s as f64).log2()).sum()
        });
        let erasure_p = match c.origin() {
            Some(NamedChannel::FunctionErasure { p, .. }) => Some(*p),
            _ => None,
        };

        InfoTerms {
            h_y,
            h_y_given_u,
            h_y_given_v,
            i_u_z,
            // V - U - Z is Markov
            i_u_z_given_v: i_u_z - i_v_z,
            i_v_y: h_v + h_y - h_vy,
            i_v_z,
            i_u_y: h_u + h_y - h_uy,
            // V - U - Y is Markov
            i_y_u_given_v: h_y_given_v - h_y_given_u,
            i_x_z: h_z - h_z_given_x,
            i_x_yz: h_yz - h_yz_given_x,
            i_x_yz_given_u: h_uyz - h_u - h_yz_given_x,
            h_z_given_y: h_yz - h_y,
            avg_log_class,
            erasure_p,
        }
    }
}
