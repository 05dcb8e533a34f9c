use std::collections::BTreeMap;

use fortstream::analysis::{build_ir, FunctionalIr};
use fortstream::eval::{EvalConfig, Value};
use fortstream::frontend::ProgramAst;
use fortstream::pipeline::*;
use fortstream::sim::*;
use fortstream::sw::{corpus, reference_run, ExperimentConfig, ShallowWaterState};
use proptest::prelude::*;

fn corpus_ir() -> (ProgramAst, FunctionalIr) {
    let prog = fortstream::refactor::refactor(&corpus::program()).unwrap().0;
    let ir = build_ir(&prog).unwrap();
    (prog, ir)
}

struct Run {
    graph: PipelineGraph,
    result: SimResult,
}

fn run(v: Variant, nx: i32, ny: i32, nt: i32, capacity: usize, schedule: Schedule) -> Run {
    let (prog, ir) = corpus_ir();
    let params = [("nx", nx), ("ny", ny), ("nt", nt)];
    let lo = LowerOptions { capacity, ..LowerOptions::with_params(&params) };
    let graph = lower(&ir, v, &lo).unwrap();
    let opts = SimOptions { schedule, eval: EvalConfig::with_params(&params), ..SimOptions::default() };
    let result = simulate(&prog, &ir, &graph, &opts).unwrap();
    Run { graph, result }
}

fn oracle(nx: usize, ny: usize, nt: usize) -> ShallowWaterState {
    let p = ExperimentConfig::new(nx, ny, nt).params().unwrap();
    reference_run(&ShallowWaterState::initial(&p), &p, nt).unwrap()
}

#[test]
fn every_variant_matches_the_oracle_on_8x8() {
    let want = oracle(8, 8, 5);
    for v in Variant::ALL {
        let r = run(v, 8, 8, 5, 64, Schedule::RoundRobin).result;
        assert_eq!(r.host.field_f32("eta").unwrap(), want.eta, "{v}");
        // The rest of the state lives on the device.
        let dev = |a: &str| r.device[a].iter().map(|x| x.as_f32()).collect::<Vec<_>>();
        assert_eq!(dev("u"), want.u, "{v}");
        assert_eq!(dev("v"), want.v, "{v}");
        assert_eq!(dev("h"), want.h, "{v}");
        assert_eq!(r.device["wet"].iter().map(|x| x.as_i32()).collect::<Vec<_>>(), want.wet, "{v}");
    }
}

#[test]
fn zero_steps_touch_nothing_but_the_transfers() {
    let p = ExperimentConfig::new(6, 6, 0).params().unwrap();
    let s0 = ShallowWaterState::initial(&p);
    for v in Variant::ALL {
        let r = run(v, 6, 6, 0, 64, Schedule::RoundRobin).result;
        assert_eq!(r.host.field_f32("eta").unwrap(), s0.eta);
        assert_eq!(r.report.totals, Counters::default());
        assert_eq!(r.report.time_steps, 0);
        assert!(r.report.host_transfers.to_device_bytes > 0);
        assert!(r.report.host_transfers.to_host_bytes > 0);
    }
}

#[test]
fn measured_accesses_equal_the_closed_form() {
    for v in Variant::ALL {
        let Run { graph, result } = run(v, 9, 7, 3, 64, Schedule::RoundRobin);
        let want = count_accesses(&graph, 3);
        assert_eq!(result.report.totals.global_reads, want.reads, "{v}");
        assert_eq!(result.report.totals.global_writes, want.writes, "{v}");
        for (k, (r, w)) in predicted_accesses(&graph) {
            let got = &result.report.per_kernel[&k].counters;
            assert_eq!((got.global_reads, got.global_writes), (3 * r, 3 * w), "{v} {k}");
        }
    }
}

#[test]
fn corpus_access_formulas() {
    // Interior D and full size S of a 10x10 grid.
    let (d, s) = (100u64, 144u64);
    let count = |v| count_accesses(&run(v, 10, 10, 1, 64, Schedule::RoundRobin).graph, 1).total();
    // dyn reads 19 slots and writes 3, shapiro reads 10 and writes 1,
    // update reads 4 and writes 4.
    assert_eq!(count(Variant::Baseline), (19 + 3 + 10 + 1 + 4 + 4) * d);
    // un and vn travel by channel; so does the centre of etan, and eta.
    assert_eq!(count(Variant::Channelized), (19 + 1 + 9 + 1 + 1 + 4) * d);
    // Six head arrays are streamed once; five tail arrays stored.
    assert_eq!(count(Variant::SmartCache), 6 * s + 5 * d);
}

#[test]
fn smartcache_interior_kernels_do_no_global_access() {
    let Run { graph, result } = run(Variant::SmartCache, 8, 8, 2, 64, Schedule::RoundRobin);
    let size = graph.layout.size as u64;
    for k in &graph.kernels {
        let c = &result.report.per_kernel[&k.name].counters;
        match &k.kind {
            KernelKind::MemRead { streams } => assert_eq!(c.global_reads, 2 * size * streams.len() as u64),
            KernelKind::MemWrite { .. } => assert_eq!(c.global_reads, 0),
            _ => assert_eq!(c.global_reads + c.global_writes, 0, "{}", k.name),
        }
    }
}

#[test]
fn every_pushed_element_is_popped() {
    for v in Variant::ALL {
        let t = run(v, 7, 5, 2, 1, Schedule::Random(9)).result.report.totals;
        assert_eq!(t.channel_pushes, t.channel_pops, "{v}");
    }
}

#[test]
fn report_totals_are_sums_of_kernels() {
    let r = run(Variant::Channelized, 6, 6, 2, 64, Schedule::RoundRobin).result.report;
    let mut sum = Counters::default();
    r.per_kernel.values().for_each(|k| sum.add(&k.counters));
    assert_eq!(sum, r.totals);
    let j = serde_json::to_value(&r).unwrap();
    assert!(j["perKernel"]["dyn"]["globalReads"].as_u64().unwrap() > 0);
    assert!(j["hostTransfers"]["toDeviceBytes"].is_u64());
}

fn without_stalls(r: &SimReport) -> BTreeMap<String, Counters> {
    r.per_kernel
        .iter()
        .map(|(k, c)| (k.clone(), Counters { stall_cycles: 0, ..c.counters }))
        .collect()
}

#[test]
fn schedules_and_capacities_do_not_change_results() {
    for v in [Variant::Channelized, Variant::SmartCache] {
        let base = run(v, 6, 5, 3, 64, Schedule::RoundRobin).result;
        for cap in [1, 2, 64] {
            for seed in 0..3 {
                let r = run(v, 6, 5, 3, cap, Schedule::Random(seed)).result;
                assert_eq!(r.device, base.device, "{v} cap {cap} seed {seed}");
                assert_eq!(without_stalls(&r.report), without_stalls(&base.report));
            }
        }
    }
}

#[test]
fn initial_arrays_replace_the_prologue_values() {
    let (prog, ir) = corpus_ir();
    let params = [("nx", 4), ("ny", 4), ("nt", 0)];
    let graph = lower(&ir, Variant::Baseline, &LowerOptions::with_params(&params)).unwrap();
    let eta: Vec<Value> = (0..36).map(|i| Value::Real(i as f32)).collect();
    let mut opts = SimOptions { eval: EvalConfig::with_params(&params), ..SimOptions::default() };
    opts.initial.insert("eta".into(), eta.clone());
    let r = simulate(&prog, &ir, &graph, &opts).unwrap();
    assert_eq!(r.host.array("eta").unwrap().row_major(), eta);

    opts.initial.insert("eta".into(), eta[..35].to_vec());
    let err = simulate(&prog, &ir, &graph, &opts).unwrap_err();
    assert_eq!(err, SimError::ShapeMismatch { array: "eta".into(), expected: 36, found: 35 });
}

#[test]
fn step_budget_stops_the_run() {
    let (prog, ir) = corpus_ir();
    let params = [("nx", 4), ("ny", 4), ("nt", 2)];
    let graph = lower(&ir, Variant::SmartCache, &LowerOptions::with_params(&params)).unwrap();
    let opts = SimOptions { max_steps: 50, eval: EvalConfig::with_params(&params), ..SimOptions::default() };
    assert_eq!(simulate(&prog, &ir, &graph, &opts).unwrap_err(), SimError::StepLimit(50));
}

#[test]
fn idle_consumer_leaves_the_producer_deadlocked() {
    let mut chans = vec![Channel::new("c", 1)];
    let mut mem = Memory::default();
    let mut progress = BTreeMap::new();
    let mut ctx = Ctx { channels: &mut chans, mem: &mut mem, progress: &mut progress };
    let values = (0..3).map(Value::Int).collect();
    let mut procs: Vec<Box<dyn Process>> =
        vec![Box::new(Feeder::new("producer", values, 0)), Box::new(Drain::new("consumer", 0, Some(0)))];
    let err = Scheduler::new(Schedule::Random(1), 1000).run(&mut procs, &mut ctx).unwrap_err();
    assert_eq!(err, SimError::Deadlock { blocked: vec!["producer".into()] });
}

/// Tuple p holds x[clamp(p + d)] for every offset d.
fn brute_force(input: &[Value], offsets: &[i64], policy: BoundaryPolicy) -> Vec<Vec<Value>> {
    let n = input.len() as i64;
    (0..n)
        .map(|p| {
            offsets
                .iter()
                .map(|d| {
                    let q = p + d;
                    match policy {
                        _ if (0..n).contains(&q) => input[q as usize],
                        BoundaryPolicy::Clamp => input[q.clamp(0, n - 1) as usize],
                        BoundaryPolicy::Zero => Value::Int(0),
                    }
                })
                .collect()
        })
        .collect()
}

fn spec_strategy() -> impl Strategy<Value = (usize, Vec<i64>)> {
    (1usize..400).prop_flat_map(|size| (Just(size), prop::collection::btree_set(-60i64..60, 1..=9)))
        .prop_map(|(size, offs)| (size, offs.into_iter().collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smart_cache_matches_brute_force((size, offsets) in spec_strategy(), zero in any::<bool>()) {
        let policy = if zero { BoundaryPolicy::Zero } else { BoundaryPolicy::Clamp };
        let spec = SmartCacheSpec::new("x", size, &offsets, policy);
        let input: Vec<Value> = (0..size as i32).map(|i| Value::Int(i * 7 + 1)).collect();
        let got = smart_cache_run(&spec, &input);
        prop_assert_eq!(got.len(), size);
        prop_assert_eq!(got, brute_force(&input, &spec.offsets, policy));
    }

    #[test]
    fn feeder_to_drain_is_fifo_for_any_capacity(cap in 1usize..5, n in 0usize..40, seed in any::<u64>()) {
        let mut chans = vec![Channel::new("c", cap)];
        let mut mem = Memory::default();
        let mut progress = BTreeMap::new();
        let mut ctx = Ctx { channels: &mut chans, mem: &mut mem, progress: &mut progress };
        let values: Vec<Value> = (0..n as i32).map(Value::Int).collect();
        let mut procs: Vec<Box<dyn Process>> = vec![
            Box::new(Feeder::new("f", values.clone(), 0)),
            Box::new(Drain::new("d", 0, None)),
        ];
        Scheduler::new(Schedule::Random(seed), 100_000).run(&mut procs, &mut ctx).unwrap();
        prop_assert_eq!(procs[1].counters().channel_pops as usize, n);
        prop_assert_eq!(ctx.channels[0].len(), 0);
    }
}

#[test]
fn overrides_carry_any_experiment_into_the_pipeline() {
    let cfg = ExperimentConfig {
        dt: 0.02,
        eps: 0.1,
        init: fortstream::sw::InitialCondition::Hump { height: 0.3 },
        ..ExperimentConfig::new(9, 7, 6)
    };
    let p = cfg.params().unwrap();
    let s0 = ShallowWaterState::initial(&p);
    let want = reference_run(&s0, &p, 6).unwrap();
    let (prog, ir) = corpus_ir();
    let params = [("nx", 9), ("ny", 7), ("nt", 6)];
    let (initial, scalars) = corpus::overrides(&s0, &p);
    let opts = SimOptions { eval: EvalConfig::with_params(&params), initial, scalars, ..SimOptions::default() };
    for v in Variant::ALL {
        let g = lower(&ir, v, &LowerOptions::with_params(&params)).unwrap();
        let r = simulate(&prog, &ir, &g, &opts).unwrap();
        assert_eq!(r.host.field_f32("eta").unwrap(), want.eta, "{v}");
    }
}

#[test]
fn unknown_scalar_override_is_reported() {
    let (prog, ir) = corpus_ir();
    let params = [("nx", 4), ("ny", 4), ("nt", 1)];
    let g = lower(&ir, Variant::Baseline, &LowerOptions::with_params(&params)).unwrap();
    let opts = SimOptions {
        eval: EvalConfig::with_params(&params),
        scalars: [("nope".to_string(), Value::Real(1.0))].into(),
        ..SimOptions::default()
    };
    assert_eq!(simulate(&prog, &ir, &g, &opts).unwrap_err(), SimError::Missing("nope".into()));
}
