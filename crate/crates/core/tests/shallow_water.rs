use std::io::BufReader;

use fortstream::sw::*;

/// Double-precision transcription of the scheme, kept independent of the
/// single-precision reference so that it can judge its rounding.
mod wide {
    pub struct State {
        pub n: (usize, usize),
        pub eta: Vec<f64>,
        pub u: Vec<f64>,
        pub v: Vec<f64>,
        pub h: Vec<f64>,
        pub wet: Vec<i32>,
    }

    pub struct Params {
        pub dt: f64,
        pub g: f64,
        pub dx: f64,
        pub eps: f64,
    }

    fn at(n: (usize, usize), j: usize, k: usize) -> usize {
        j * (n.0 + 2) + k
    }

    /// Returns (un, vn, etan).
    pub fn dynamics(s: &State, p: &Params) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let len = s.eta.len();
        let (mut un, mut vn, mut etan) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let both = |a: usize, b: usize| s.wet[a] != 0 && s.wet[b] != 0;
        let vel = |v0: f64, hi: f64, lo: f64, open: bool| if open { v0 - p.dt * p.g * (hi - lo) / p.dx } else { 0.0 };
        let flux = |q: f64, up: f64, down: f64| q * if q > 0.0 { up } else { down };
        for j in 1..=s.n.1 {
            for k in 1..=s.n.0 {
                let c = at(s.n, j, k);
                let (e, w, no, so) = (at(s.n, j, k + 1), at(s.n, j, k - 1), at(s.n, j + 1, k), at(s.n, j - 1, k));
                let ue = vel(s.u[c], s.eta[e], s.eta[c], both(c, e));
                let uw = vel(s.u[w], s.eta[c], s.eta[w], both(w, c));
                let vnn = vel(s.v[c], s.eta[no], s.eta[c], both(c, no));
                let vs = vel(s.v[so], s.eta[c], s.eta[so], both(so, c));
                let div = flux(ue, s.h[c], s.h[e]) - flux(uw, s.h[w], s.h[c]) + flux(vnn, s.h[c], s.h[no])
                    - flux(vs, s.h[so], s.h[c]);
                un[c] = ue;
                vn[c] = vnn;
                etan[c] = s.eta[c] - p.dt * div / p.dx;
            }
        }
        (un, vn, etan)
    }

    pub fn shapiro(s: &State, etan: &[f64], eps: f64) -> Vec<f64> {
        let mut out = etan.to_vec();
        for j in 1..=s.n.1 {
            for k in 1..=s.n.0 {
                let c = at(s.n, j, k);
                if s.wet[c] != 1 {
                    continue;
                }
                let nb = [at(s.n, j, k + 1), at(s.n, j, k - 1), at(s.n, j + 1, k), at(s.n, j - 1, k)];
                let sum: f64 = nb.iter().map(|&i| if s.wet[i] == 1 { etan[i] } else { etan[c] }).sum();
                out[c] = (1.0 - eps) * etan[c] + eps * sum / 4.0;
            }
        }
        out
    }
}

fn widen(s: &ShallowWaterState) -> wide::State {
    let f = |x: &Vec<f32>| x.iter().map(|&v| v as f64).collect();
    wide::State {
        n: (s.grid.nx, s.grid.ny),
        eta: f(&s.eta),
        u: f(&s.u),
        v: f(&s.v),
        h: f(&s.h),
        wet: s.wet.clone(),
    }
}

fn params(nx: usize, ny: usize, init: InitialCondition) -> ModelParams {
    ExperimentConfig { init, ..ExperimentConfig::new(nx, ny, 1) }.params().unwrap()
}

fn interior_sum(g: Grid, f: &[f32]) -> f64 {
    let mut s = 0.0;
    for j in 1..=g.ny {
        for k in 1..=g.nx {
            s += f[g.idx(j, k)] as f64;
        }
    }
    s
}

/// max |a - b| / max |b|
fn rel_err(a: &[f32], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(&x, y)| (x as f64 - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn still_water_is_a_fixed_point() {
    let p = params(6, 6, InitialCondition::Rest);
    let s = ShallowWaterState::initial(&p);
    let d = dynamics_step(&s, &p).unwrap();
    assert!(d.un.iter().chain(&d.vn).chain(&d.etan).all(|&x| x == 0.0));
}

#[test]
fn single_precision_step_tracks_the_wide_oracle() {
    let p = params(8, 8, InitialCondition::Random { seed: 11 });
    let s = ShallowWaterState::initial(&p);
    let d = dynamics_step(&s, &p).unwrap();
    let w = widen(&s);
    let wp = wide::Params { dt: p.dt as f64, g: p.g as f64, dx: p.dx as f64, eps: p.eps as f64 };
    let (un, vn, etan) = wide::dynamics(&w, &wp);
    assert!(rel_err(&d.un, &un) < 1e-6);
    assert!(rel_err(&d.vn, &vn) < 1e-6);
    assert!(rel_err(&d.etan, &etan) < 1e-6);
    let f = shapiro_step(s.grid, &d.etan, &s.wet, p.eps);
    assert!(rel_err(&f, &wide::shapiro(&w, &etan, wp.eps)) < 1e-6);
}

#[test]
fn centred_hump_stays_mirror_symmetric() {
    let n = 9;
    let p = params(n, n, InitialCondition::Hump { height: 0.5 });
    let mut s = ShallowWaterState::initial(&p);
    for _ in 0..30 {
        s = reference_step(&s, &p).unwrap();
        let g = s.grid;
        for j in 1..=n {
            for k in 1..=n {
                let e = s.eta[g.idx(j, k)];
                assert_eq!(e, s.eta[g.idx(n + 1 - j, k)]);
                assert_eq!(e, s.eta[g.idx(j, n + 1 - k)]);
                assert_eq!(e, s.eta[g.idx(k, j)]);
            }
        }
    }
}

#[test]
fn filter_with_zero_weight_is_the_identity() {
    let p = params(7, 5, InitialCondition::Random { seed: 2 });
    let s = ShallowWaterState::initial(&p);
    assert_eq!(shapiro_step(s.grid, &s.eta, &s.wet, 0.0), s.eta);
}

#[test]
fn filter_keeps_a_uniform_field() {
    let g = Grid::new(6, 6);
    let s = ShallowWaterState::at_rest(g, 10.0);
    let field = vec![0.75f32; g.size()];
    assert_eq!(shapiro_step(g, &field, &s.wet, 0.05), field);
}

#[test]
fn filter_damps_a_checkerboard() {
    let g = Grid::new(8, 8);
    let s = ShallowWaterState::at_rest(g, 10.0);
    let mut field = vec![0.0f32; g.size()];
    for j in 1..=8 {
        for k in 1..=8 {
            field[g.idx(j, k)] = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    let out = shapiro_step(g, &field, &s.wet, 0.05);
    for j in 2..=7 {
        for k in 2..=7 {
            let want = 0.9 * field[g.idx(j, k)];
            assert!((out[g.idx(j, k)] - want).abs() < 1e-6);
        }
    }
}

#[test]
fn filter_is_a_convex_combination() {
    let p = params(9, 7, InitialCondition::Random { seed: 5 });
    let mut s = ShallowWaterState::initial(&p);
    // Dry a few cells so the centre substitution kicks in.
    for (j, k) in [(2, 2), (4, 5), (7, 1)] {
        let i = s.grid.idx(j, k);
        s.wet[i] = 0;
    }
    let g = s.grid;
    let out = shapiro_step(g, &s.eta, &s.wet, 0.3);
    for j in 1..=g.ny {
        for k in 1..=g.nx {
            let c = g.idx(j, k);
            let mut part = vec![s.eta[c]];
            for i in [c + 1, c - 1, c + g.row_stride(), c - g.row_stride()] {
                if s.wet[i] == 1 {
                    part.push(s.eta[i]);
                }
            }
            let lo = part.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = part.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            assert!(lo - 1e-6 <= out[c] && out[c] <= hi + 1e-6);
        }
    }
}

#[test]
fn update_sets_depth_and_dries_shallow_cells() {
    let g = Grid::new(3, 3);
    let mut s = ShallowWaterState::at_rest(g, 10.0);
    let d = Dynamics { un: vec![0.2; g.size()], vn: vec![0.3; g.size()], etan: vec![0.0; g.size()] };
    let mut eta_f = vec![0.5f32; g.size()];
    let dry = g.idx(2, 2);
    eta_f[dry] = -10.05;
    update_step(&mut s, &eta_f, &d, 0.1);
    assert_eq!(s.h[g.idx(1, 1)], 10.5);
    assert_eq!((s.wet[g.idx(1, 1)], s.u[g.idx(1, 1)], s.v[g.idx(1, 1)]), (1, 0.2, 0.3));
    assert!(s.h[dry] < 0.1);
    assert_eq!((s.wet[dry], s.u[dry], s.v[dry]), (0, 0.0, 0.0));
}

#[test]
fn dynamics_conserves_mass_on_a_closed_wet_domain() {
    let p = params(16, 12, InitialCondition::Pulse);
    let mut s = ShallowWaterState::initial(&p);
    let wp = wide::Params { dt: p.dt as f64, g: p.g as f64, dx: p.dx as f64, eps: p.eps as f64 };
    for _ in 0..5 {
        let before = interior_sum(s.grid, &s.eta);
        let d = dynamics_step(&s, &p).unwrap();
        assert!((interior_sum(s.grid, &d.etan) - before).abs() <= 1e-6 * before.abs());
        let w = widen(&s);
        let (_, _, etan) = wide::dynamics(&w, &wp);
        let wide_before: f64 = w.eta.iter().sum();
        assert!((etan.iter().sum::<f64>() - wide_before).abs() <= 1e-12 * wide_before.abs());
        s = reference_step(&s, &p).unwrap();
    }
}

#[test]
fn lake_at_rest_stays_at_rest() {
    let p = params(8, 8, InitialCondition::Rest);
    let s0 = ShallowWaterState::initial(&p);
    let s = reference_run(&s0, &p, 10_000).unwrap();
    assert_eq!(s, s0);
}

#[test]
fn long_run_stays_finite_and_keeps_its_volume() {
    let p = ExperimentConfig::new(64, 64, 1000).params().unwrap();
    let s0 = ShallowWaterState::initial(&p);
    let m0 = s0.total_elevation();
    let mut s = s0;
    for _ in 0..1000 {
        s = reference_step(&s, &p).unwrap();
    }
    assert!(s.all_finite());
    assert!((s.total_elevation() - m0).abs() <= 1e-4 * m0.abs());
}

#[test]
fn ten_thousand_steps_stay_finite() {
    let p = ExperimentConfig::new(64, 64, 10_000).params().unwrap();
    let s = reference_run(&ShallowWaterState::initial(&p), &p, 10_000).unwrap();
    assert!(s.all_finite());
}

#[test]
fn cfl_violation_is_reported() {
    let cfg = ExperimentConfig { dt: 0.5, ..ExperimentConfig::new(8, 8, 1) };
    assert!(matches!(cfg.params(), Err(SwError::CflViolation { .. })));
    let cfg = ExperimentConfig { eps: 1.5, ..ExperimentConfig::new(8, 8, 1) };
    assert!(matches!(cfg.params(), Err(SwError::InvalidParameter(_))));
}

const GOLDEN: &str = "tests/golden/sw2d_32x32_nt100.bin";

fn golden_fields(s: &ShallowWaterState) -> Vec<FieldDump> {
    let (rows, cols) = (s.grid.rows(), s.grid.row_stride());
    let f = |name: &str, data: &Vec<f32>| FieldDump::F32 { name: name.into(), rows, cols, data: data.clone() };
    vec![
        f("eta", &s.eta),
        f("u", &s.u),
        f("v", &s.v),
        f("h", &s.h),
        FieldDump::I32 { name: "wet".into(), rows, cols, data: s.wet.clone() },
    ]
}

#[test]
fn thirty_two_grid_after_a_hundred_steps_matches_golden() {
    let p = ExperimentConfig::new(32, 32, 100).params().unwrap();
    let s = reference_run(&ShallowWaterState::initial(&p), &p, 100).unwrap();
    let fields = golden_fields(&s);
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let mut out = Vec::new();
        for f in &fields {
            write_field(&mut out, f).unwrap();
        }
        std::fs::write(&path, out).unwrap();
    }
    let bytes = std::fs::read(&path).expect("golden file; rerun with UPDATE_GOLDEN=1");
    let mut r = BufReader::new(bytes.as_slice());
    for want in &fields {
        assert_eq!(&read_field(&mut r).unwrap(), want);
    }
}
