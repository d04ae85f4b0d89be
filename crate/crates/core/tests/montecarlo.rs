use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdbc::channels::{make_bsc_pair, AuxiliaryInput, BroadcastChannel};
use sdbc::info::JointPmf;
use sdbc::montecarlo::*;
use sdbc::regions::{evaluate, contains, RateTuple, RegionKind};

const THIRD: f64 = 1.0 / 3.0;

fn superposition_input() -> AuxiliaryInput {
    AuxiliaryInput::with_v_equal_u(&[0.5, 0.5], vec![vec![1.0 - THIRD, THIRD], vec![THIRD, 1.0 - THIRD]]).unwrap()
}

fn interior(seed: u64) -> CodeParams {
    let mut p = CodeParams::new(
        6,
        RateTuple::new(0.0, 0.2, 0.0, 0.01, 0.0),
        AuxRates { r_c: 0.5, r_y: 0.7, r_z: 0.5 },
        seed,
    );
    p.epsilon = 0.4;
    p.epsilon_tilde = 0.5;
    p
}

fn exterior(seed: u64) -> CodeParams {
    CodeParams {
        rates: RateTuple::new(0.0, 1.2, 0.0, 0.01, 0.0),
        aux: AuxRates { r_c: 0.2, r_y: 1.15, r_z: 0.2 },
        ..interior(seed)
    }
}

#[test]
fn interior_point_is_inside_cor1() {
    let c = make_bsc_pair(0.25).unwrap();
    let r = evaluate(RegionKind::Cor1NoMsiAtZ, &c, &superposition_input()).unwrap();
    let m = contains(&r, &interior(0).rates);
    assert!(m.inside && m.slack.iter().all(|&s| s > 0.005), "{:?}", m.slack);
    assert!(!contains(&r, &exterior(0).rates).inside);
}

#[test]
fn error_rate_falls_with_blocklength() {
    let c = make_bsc_pair(0.25).unwrap();
    let rows = trend("interior", &c, &superposition_input(), &interior(1), &[6, 9, 12], 2000).unwrap();
    let e: Vec<f64> = rows.iter().map(|r| r.error_rate).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    // encoding with slack: failures never grow with n
    let f: Vec<f64> = rows.iter().map(|r| r.stats.encode_failure_rate()).collect();
    assert!(f[1] <= f[0] && f[2] <= f[1] && f[2] < f[0], "{f:?}");
}

#[test]
fn exterior_point_fails_at_the_deterministic_receiver() {
    let c = make_bsc_pair(0.25).unwrap();
    let a = superposition_input();
    let out = run_trials(&c, &a, &CodeParams { n: 12, ..exterior(1) }, 2000).unwrap();
    assert!(out.y_error_rate() >= 0.5, "{out:?}");
    let inside = run_trials(&c, &a, &CodeParams { n: 12, ..interior(1) }, 2000).unwrap();
    assert!(out.z_error_rate() - inside.z_error_rate() >= 0.3);
}

#[test]
fn covering_violation_breaks_encoding() {
    // U = X = Y with no spare codewords: a y-word must coincide with a u-word
    let c = make_bsc_pair(0.25).unwrap();
    let a = AuxiliaryInput::with_constant_v(&[0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let p = CodeParams::new(12, RateTuple::new(0.0, 0.25, 0.0, 0.25, 0.0), AuxRates { r_c: 0.0, r_y: 0.25, r_z: 0.25 }, 4);
    let s = run_trials(&c, &a, &p, 500).unwrap();
    assert!(s.encode_failure_rate() >= 0.5, "{s:?}");
}

#[test]
fn identical_seeds_identical_stats() {
    let c = make_bsc_pair(0.25).unwrap();
    let a = superposition_input();
    let p = CodeParams { n: 9, ..interior(8) };
    assert_eq!(run_trials(&c, &a, &p, 300).unwrap(), run_trials(&c, &a, &p, 300).unwrap());
}

#[test]
fn larger_decoding_slack_never_adds_missing_candidates() {
    let c = make_bsc_pair(0.25).unwrap();
    let a = superposition_input();
    let mut last: Option<TrialStats> = None;
    for et in [0.45, 0.5, 0.6, 0.8, 1.0] {
        let p = CodeParams { n: 9, epsilon_tilde: et, ..interior(2) };
        let s = run_trials(&c, &a, &p, 1000).unwrap();
        if let Some(prev) = last {
            assert_eq!(s.encode_failures, prev.encode_failures);
            assert!(s.y_not_found <= prev.y_not_found);
            assert!(s.z_not_found <= prev.z_not_found);
        }
        last = Some(s);
    }
}

// ---- independent reference for the unbinned cloud (one cloud word per cell) ----

fn pick(probs: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 && (u < acc || i == last) {
            return i as u8;
        }
    }
    unreachable!()
}

/// Empirical-frequency typicality straight from the definition.
fn typical(words: &[&[u8]], law: &dyn Fn(&[u8]) -> f64, sizes: &[usize], eps: f64) -> bool {
    let n = words[0].len();
    let mut symbol = vec![0u8; sizes.len()];
    let total: usize = sizes.iter().product();
    for flat in 0..total {
        let mut r = flat;
        for d in (0..sizes.len()).rev() {
            symbol[d] = (r % sizes[d]) as u8;
            r /= sizes[d];
        }
        let count = (0..n).filter(|&i| words.iter().zip(&symbol).all(|(w, &s)| w[i] == s)).count();
        let p = law(&symbol);
        if (count as f64 / n as f64 - p).abs() > eps * p + 1e-12 {
            return false;
        }
    }
    true
}

struct Reference {
    n: usize,
    cells: usize,
    m_y_p: usize,
    m_z_p: usize,
    v: Vec<Vec<u8>>,
    y: Vec<Vec<Vec<u8>>>,
    u: Vec<Vec<Vec<u8>>>,
    y_bin: Vec<Vec<usize>>,
    u_bin: Vec<Vec<usize>>,
    p_vu: Vec<Vec<f64>>,
    p_y_given_u: Vec<Vec<f64>>,
    w_z: Vec<Vec<f64>>,
}

impl Reference {
    fn build(c: &BroadcastChannel, a: &AuxiliaryInput, p: &CodeParams) -> Self {
        let s = p.sizes().unwrap();
        assert_eq!(s.clouds, 1);
        let (vs, us, xs) = (a.v_size(), a.u_size(), c.x_size());
        let f = c.f_map().unwrap();
        let p_vu: Vec<Vec<f64>> = (0..vs).map(|v| (0..us).map(|u| a.p_vu_at(v, u)).collect()).collect();
        let p_v: Vec<f64> = p_vu.iter().map(|r| r.iter().sum()).collect();
        let p_y_given_u: Vec<Vec<f64>> = (0..us)
            .map(|u| {
                let mut r = vec![0.0; c.y_size()];
                (0..xs).for_each(|x| r[f[x]] += a.p_x_given_u_at(u, x));
                r
            })
            .collect();
        let p_y_given_v: Vec<Vec<f64>> = (0..vs)
            .map(|v| {
                (0..c.y_size())
                    .map(|y| (0..us).map(|u| p_vu[v][u] * p_y_given_u[u][y]).sum::<f64>() / p_v[v])
                    .collect()
            })
            .collect();
        let p_u_given_v: Vec<Vec<f64>> = (0..vs).map(|v| p_vu[v].iter().map(|q| q / p_v[v]).collect()).collect();
        let w_z = c.z_rows();

        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let cells = s.cells();
        let (mut vw, mut yw, mut uw) = (vec![], vec![], vec![]);
        for _ in 0..cells {
            let v: Vec<u8> = (0..p.n).map(|_| pick(&p_v, rng.random())).collect();
            let ys: Vec<Vec<u8>> = (0..s.y_per_cloud)
                .map(|_| v.iter().map(|&t| pick(&p_y_given_v[t as usize], rng.random())).collect())
                .collect();
            let uss: Vec<Vec<u8>> = (0..s.u_per_cloud)
                .map(|_| v.iter().map(|&t| pick(&p_u_given_v[t as usize], rng.random())).collect())
                .collect();
            vw.push(v);
            yw.push(ys);
            uw.push(uss);
        }
        let y_bin = (0..cells).map(|_| (0..s.y_per_cloud).map(|_| rng.random_range(0..s.m_y_p)).collect()).collect();
        let u_bin = (0..cells).map(|_| (0..s.u_per_cloud).map(|_| rng.random_range(0..s.m_z_p)).collect()).collect();
        Reference { n: p.n, cells, m_y_p: s.m_y_p, m_z_p: s.m_z_p, v: vw, y: yw, u: uw, y_bin, u_bin, p_vu, p_y_given_u, w_z }
    }

    fn vyu(&self, s: &[u8]) -> f64 {
        let (v, y, u) = (s[0] as usize, s[1] as usize, s[2] as usize);
        self.p_vu[v][u] * self.p_y_given_u[u][y]
    }

    fn select(&self, cell: usize, myp: usize, mzp: usize, eps: f64) -> Option<(usize, usize)> {
        let sizes = [self.p_vu.len(), self.p_y_given_u[0].len(), self.p_vu[0].len()];
        for l in 0..self.y[cell].len() {
            for j in 0..self.u[cell].len() {
                if self.y_bin[cell][l] == myp
                    && self.u_bin[cell][j] == mzp
                    && typical(&[&self.v[cell], &self.y[cell][l], &self.u[cell][j]], &|s| self.vyu(s), &sizes, eps)
                {
                    return Some((l, j));
                }
            }
        }
        None
    }

    fn p_y(&self, y: usize) -> f64 {
        (0..self.p_vu[0].len()).map(|u| self.p_vu.iter().map(|r| r[u]).sum::<f64>() * self.p_y_given_u[u][y]).sum()
    }

    fn p_uz(&self, u: usize, z: usize) -> f64 {
        let pu: f64 = self.p_vu.iter().map(|r| r[u]).sum();
        // Z depends on U only through X; here f is the identity so p(z|u) = Σ_y p(y|u) W(z|y)
        pu * (0..self.p_y_given_u[u].len()).map(|x| self.p_y_given_u[u][x] * self.w_z[x][z]).sum::<f64>()
    }

    /// All `(cell, bin)` whose y-words equal `y`, if `y` is typical.
    fn decode_y(&self, y: &[u8], eps: f64) -> Vec<(usize, usize)> {
        let ys = self.p_y_given_u[0].len();
        if !typical(&[y], &|s| self.p_y(s[0] as usize), &[ys], eps) {
            return vec![];
        }
        let mut out = vec![];
        for cell in 0..self.cells {
            for (l, w) in self.y[cell].iter().enumerate() {
                if w.as_slice() == y && !out.contains(&(cell, self.y_bin[cell][l])) {
                    out.push((cell, self.y_bin[cell][l]));
                }
            }
        }
        out
    }

    fn decode_z(&self, z: &[u8], eps: f64) -> Vec<(usize, usize)> {
        let sizes = [self.p_vu[0].len(), self.w_z[0].len()];
        let mut out = vec![];
        for cell in 0..self.cells {
            for (j, w) in self.u[cell].iter().enumerate() {
                let key = (cell, self.u_bin[cell][j]);
                if !out.contains(&key) && typical(&[w, z], &|s| self.p_uz(s[0] as usize, s[1] as usize), &sizes, eps) {
                    out.push(key);
                }
            }
        }
        out
    }
}

#[test]
fn matches_reference_marton_code_without_cloud_binning() {
    let c = make_bsc_pair(0.25).unwrap();
    let a = AuxiliaryInput::with_constant_v(&[0.5, 0.5], vec![vec![1.0 - THIRD, THIRD], vec![THIRD, 1.0 - THIRD]]).unwrap();
    for seed in [1, 2, 3] {
        let mut p = CodeParams::new(
            6,
            RateTuple::new(0.2, 0.2, 0.0, 0.2, 0.0),
            AuxRates { r_c: 0.0, r_y: 0.6, r_z: 0.6 },
            seed,
        );
        p.epsilon = 0.4;
        p.epsilon_tilde = 0.5;
        let cb = build_codebook(&c, &a, &p).unwrap();
        let r = Reference::build(&c, &a, &p);
        let s = cb.sizes;
        assert_eq!((r.m_y_p, r.m_z_p), (s.m_y_p, s.m_z_p));

        for cell in 0..s.cells() {
            assert_eq!(cb.v_word(cell, 0), r.v[cell].as_slice());
            for l in 0..s.y_per_cloud {
                assert_eq!(cb.y_word(cell, 0, l), r.y[cell][l].as_slice());
                assert_eq!(cb.y_bin(cell, 0, l), r.y_bin[cell][l]);
            }
            for j in 0..s.u_per_cloud {
                assert_eq!(cb.u_word(cell, 0, j), r.u[cell][j].as_slice());
            }
            for myp in 0..s.m_y_p {
                for mzp in 0..s.m_z_p {
                    let msgs = Messages { m: cell, m_y_c: 0, m_y_p: myp, m_z_c: 0, m_z_p: mzp };
                    let got = cb.select(&msgs).unwrap().map(|x| (x.l, x.j));
                    assert_eq!(got, r.select(cell, myp, mzp, p.epsilon));
                }
            }
        }
        let n = r.n;
        for w in 0..(1u32 << n) {
            let word: Vec<u8> = (0..n).map(|i| ((w >> (n - 1 - i)) & 1) as u8).collect();
            let want = r.decode_y(&word, p.epsilon_tilde);
            let got = cb.decode_y(&word, 0).unwrap();
            match want.as_slice() {
                [(cell, bin)] => assert_eq!(got, Ok((*cell, 0, *bin))),
                [] => assert_eq!(got, Err(DecodeError::NotFound)),
                _ => assert_eq!(got, Err(DecodeError::Ambiguous)),
            }
            let want = r.decode_z(&word, p.epsilon_tilde);
            let got = cb.decode_z(&word, 0).unwrap();
            match want.as_slice() {
                [(cell, bin)] => assert_eq!(got, Ok((*cell, 0, *bin))),
                [] => assert_eq!(got, Err(DecodeError::NotFound)),
                _ => assert_eq!(got, Err(DecodeError::Ambiguous)),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(300) })]

    #[test]
    fn typical_set_matches_frequency_count(
        (sizes, mass, words) in (1usize..=4, 1usize..=4, 1usize..=16).prop_flat_map(|(a, b, n)| (
            Just(vec![a, b]),
            prop::collection::vec(0u32..20, a * b),
            (prop::collection::vec(0..a as u8, n), prop::collection::vec(0..b as u8, n)),
        )),
        eps in 0.0f64..1.5,
    ) {
        let total: u32 = mass.iter().sum();
        prop_assume!(total > 0);
        let mass: Vec<f64> = mass.iter().map(|&w| w as f64 / total as f64).collect();
        let j = JointPmf::from_sizes(&[("A", sizes[0]), ("B", sizes[1])], mass.clone()).unwrap();
        let law = |s: &[u8]| mass[s[0] as usize * sizes[1] + s[1] as usize];
        let want = typical(&[&words.0, &words.1], &law, &sizes, eps);
        prop_assert_eq!(TypicalSet::new(&j, eps).contains(&[&words.0, &words.1]), want);
    }
}
