//! Tiny dense simplex for packing LPs: `max c·s` subject to `A s ≤ b`, `s ≥ 0`,
//! with `A ≥ 0` and `b ≥ 0`, so the origin is a feasible starting basis.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Unbounded,
}

/// Solves the packing LP. Negative entries of `b` are clamped to zero.
pub fn solve_packing(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    let w = n + m + 1;
    // rows 0..m constraints, row m objective (reduced costs, negated)
    let mut t = vec![0.0; (m + 1) * w];
    for i in 0..m {
        t[i * w..i * w + n].copy_from_slice(&a[i]);
        t[i * w + n + i] = 1.0;
        t[i * w + w - 1] = b[i].max(0.0);
    }
    for j in 0..n {
        t[m * w + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for iter in 0..500 {
        // Dantzig pricing, switching to Bland after many iterations
        let obj = &t[m * w..m * w + n + m];
        let enter = if iter < 50 {
            obj.iter()
                .enumerate()
                .filter(|(_, &r)| r < -EPS)
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map(|(j, _)| j)
        } else {
            obj.iter().position(|&r| r < -EPS)
        };
        let Some(e) = enter else { break };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aie = t[i * w + e];
            if aie > EPS {
                let ratio = t[i * w + w - 1] / aie;
                let better = match leave {
                    None => true,
                    Some((l, r)) => ratio < r - EPS || (ratio <= r + EPS && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((l, _)) = leave else { return LpOutcome::Unbounded };
        let piv = t[l * w + e];
        for k in 0..w {
            t[l * w + k] /= piv;
        }
        for i in 0..=m {
            if i == l {
                continue;
            }
            let f = t[i * w + e];
            if f != 0.0 {
                for k in 0..w {
                    t[i * w + k] -= f * t[l * w + k];
                }
            }
        }
        basis[l] = e;
    }
    let mut point = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            point[bv] = t[i * w + w - 1].max(0.0);
        }
    }
    let value = c.iter().zip(&point).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { value, point }
}
