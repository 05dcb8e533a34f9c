use fortstream::eval::{run_program, EvalConfig, Value};
use fortstream::sw::{corpus, reference_run, ExperimentConfig, ShallowWaterState};

fn run_corpus(nx: i32, ny: i32, nt: i32) -> fortstream::eval::ProgramOutput {
    let prog = corpus::program();
    run_program(&prog, &EvalConfig::with_params(&[("nx", nx), ("ny", ny), ("nt", nt)])).unwrap()
}

#[test]
fn corpus_matches_rust_oracle_bit_exactly() {
    let (nx, ny, nt) = (16, 12, 20);
    let out = run_corpus(nx, ny, nt);
    let p = ExperimentConfig::new(nx as usize, ny as usize, nt as usize).params().unwrap();
    let s0 = ShallowWaterState::initial(&p);
    let s = reference_run(&s0, &p, nt as usize).unwrap();
    assert_eq!(out.field_f32("eta").unwrap(), s.eta);
    assert_eq!(out.field_f32("u").unwrap(), s.u);
    assert_eq!(out.field_f32("v").unwrap(), s.v);
    assert_eq!(out.field_f32("h").unwrap(), s.h);
    assert_eq!(out.field_i32("wet").unwrap(), s.wet);
    let mut etasum = 0.0f32;
    for j in 1..=ny as usize {
        for k in 1..=nx as usize {
            etasum += s.eta[s.grid.idx(j, k)];
        }
    }
    assert_eq!(out.scalar("etasum"), Some(Value::Real(etasum)));
}

#[test]
fn zero_time_steps_leave_the_initial_state() {
    let out = run_corpus(8, 8, 0);
    let p = ExperimentConfig::new(8, 8, 0).params().unwrap();
    let s0 = ShallowWaterState::initial(&p);
    assert_eq!(out.field_f32("eta").unwrap(), s0.eta);
    assert_eq!(out.field_f32("h").unwrap(), s0.h);
}

#[test]
fn step_limit_is_enforced() {
    let prog = corpus::program();
    let cfg = EvalConfig { max_steps: 1000, ..EvalConfig::with_params(&[("nx", 8), ("ny", 8), ("nt", 5)]) };
    assert!(matches!(run_program(&prog, &cfg), Err(fortstream::eval::EvalError::StepLimit(1000))));
}
