use std::collections::BTreeSet;

use fortstream::analysis::{build_ir, FunctionalIr};
use fortstream::eval::{EvalConfig, VarValue};
use fortstream::frontend::{link, parse_free_source, ProgramAst};
use fortstream::pipeline::*;
use fortstream::sim::{simulate, SimOptions};
use fortstream::sw::corpus;

fn corpus_ir() -> (ProgramAst, FunctionalIr) {
    let prog = fortstream::refactor::refactor(&corpus::program()).unwrap().0;
    let ir = build_ir(&prog).unwrap();
    (prog, ir)
}

fn lowered(v: Variant, n: i32) -> PipelineGraph {
    let (_, ir) = corpus_ir();
    lower(&ir, v, &LowerOptions::with_params(&[("nx", n), ("ny", n)])).unwrap()
}

fn free(src: &str) -> ProgramAst {
    link(parse_free_source(src, "t.f95").unwrap()).unwrap()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn compute_kernels(g: &PipelineGraph) -> Vec<&Kernel> {
    g.kernels.iter().filter(|k| k.as_compute().is_some()).collect()
}

#[test]
fn baseline_launches_three_memory_kernels_in_sequence() {
    let g = lowered(Variant::Baseline, 8);
    assert_eq!(g.kernels.iter().map(|k| k.name.as_str()).collect::<Vec<_>>(), ["dyn", "shapiro", "update"]);
    assert!(g.channels.is_empty());
    let launches: Vec<Vec<String>> = g
        .step
        .iter()
        .map(|op| match op {
            HostOp::Launch(ks) => ks.clone(),
            HostOp::Host { node, .. } => panic!("unexpected host op {node}"),
        })
        .collect();
    assert_eq!(launches, [vec!["dyn".to_string()], vec!["shapiro".into()], vec!["update".into()]]);
    for k in &g.kernels {
        let c = k.as_compute().unwrap();
        assert!(c.sources.iter().all(|s| matches!(s, Source::Mem { .. })));
        assert!(c.sinks.iter().flatten().all(|s| matches!(s, Sink::Mem { .. })));
    }
}

#[test]
fn channelized_launches_one_group_and_keeps_stencil_reads_in_memory() {
    let g = lowered(Variant::Channelized, 8);
    assert_eq!(g.step.len(), 1);
    let pairs: BTreeSet<(String, String)> = g.channels.iter().map(|c| (c.producer.clone(), c.consumer.clone())).collect();
    assert!(pairs.contains(&("dyn".into(), "shapiro".into())));
    assert!(pairs.contains(&("shapiro".into(), "update".into())));
    let sh = g.kernel("shapiro").unwrap();
    let etan_ports: Vec<_> = sh.mem_ports().into_iter().filter(|(a, _)| a == "etan").collect();
    assert_eq!(etan_ports, [("etan".to_string(), MemDir::Read)]);
    // Off-centre reads wait for the producer; the centre arrives by channel.
    let c = sh.as_compute().unwrap();
    for ((a, off), s) in c.elem.slots.iter().zip(&c.sources) {
        if a == "etan" {
            match s {
                Source::Channel { .. } => assert_eq!(off, &vec![0, 0]),
                Source::Mem { after, .. } => assert_eq!(after.as_deref(), Some("dyn")),
            }
        }
    }
}

#[test]
fn smartcache_confines_memory_to_head_and_tail_kernels() {
    let g = lowered(Variant::SmartCache, 8);
    let heads: Vec<_> = g.kernels.iter().filter(|k| matches!(k.kind, KernelKind::MemRead { .. })).collect();
    let tails: Vec<_> = g.kernels.iter().filter(|k| matches!(k.kind, KernelKind::MemWrite { .. })).collect();
    assert_eq!((heads.len(), tails.len()), (1, 1));
    for k in &g.kernels {
        if !matches!(k.kind, KernelKind::MemRead { .. } | KernelKind::MemWrite { .. }) {
            assert!(k.mem_ports().is_empty(), "{} touches memory", k.name);
        }
    }
    let KernelKind::MemRead { streams } = &heads[0].kind else { unreachable!() };
    let KernelKind::MemWrite { streams: stores } = &tails[0].kind else { unreachable!() };
    assert_eq!(g.mem_ports().len(), streams.len() + stores.len());
    let read: BTreeSet<String> = streams.iter().map(|s| s.0.clone()).collect();
    let written: BTreeSet<String> = stores.iter().map(|s| s.0.clone()).collect();
    assert_eq!(read, set(&["eta", "h", "h0", "u", "v", "wet"]));
    assert_eq!(written, set(&["eta", "h", "u", "v", "wet"]));
}

/// Row-major position of (j, k) on a (0:n+1)^2 grid, written out by hand.
fn pos(n: i64, j: i64, k: i64) -> i64 {
    j * (n + 2) + k
}

#[test]
fn five_point_specs_match_hand_linearization() {
    for n in [4i64, 8, 13] {
        let g = lowered(Variant::SmartCache, n as i32);
        let centre = (n / 2, n / 2);
        let mut want: Vec<i64> = [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]
            .iter()
            .map(|(dj, dk)| pos(n, centre.0 + dj, centre.1 + dk) - pos(n, centre.0, centre.1))
            .collect();
        want.sort();
        let spec = g.smart_caches().into_iter().find(|s| s.stream_id == "etan").unwrap();
        assert_eq!(spec.offsets, want);
        assert_eq!(spec.mp_off, n + 2);
        assert_eq!(spec.mn_off, n + 2);
        assert_eq!(spec.buffer_len as i64, 2 * (n + 2) + 1);
        assert_eq!(spec.size as i64, (n + 2) * (n + 2));
    }
}

#[test]
fn buffer_len_formula_holds_for_every_spec() {
    for g in Variant::ALL.map(|v| lowered(v, 6)) {
        for s in g.smart_caches() {
            let lo = s.offsets.iter().copied().chain([0]).min().unwrap();
            let hi = s.offsets.iter().copied().chain([0]).max().unwrap();
            assert_eq!(s.buffer_len as i64, hi - lo + 1);
            assert!(s.sync_only || s.offsets.contains(&0));
        }
    }
}

const SHIFTED: &str = "program p
  implicit none
  integer, parameter :: n = 6
  real :: a(0:n+1, 0:n+1), b(0:n+1, 0:n+1), c(0:n+1, 0:n+1)
  integer :: t
  do t = 1, 2
    call step(a, b, c)
  end do
end program p

subroutine step(a, b, c)
  implicit none
  integer, parameter :: n = 6
  real, intent(in) :: a(0:n+1, 0:n+1), b(0:n+1, 0:n+1)
  real, intent(inout) :: c(0:n+1, 0:n+1)
  integer :: j, k
  do j = 1, n
    do k = 1, n
      c(j, k) = a(j, k + 1) + b(j, k)
    end do
  end do
end subroutine step
";

#[test]
fn unshifted_stream_of_a_stenciled_kernel_gets_a_delay_line() {
    let ir = build_ir(&free(SHIFTED)).unwrap();
    let g = lower(&ir, Variant::SmartCache, &LowerOptions::default()).unwrap();
    let b = g.smart_caches().into_iter().find(|s| s.stream_id == "b").unwrap();
    assert!(b.sync_only);
    assert_eq!(b.mp_off, 1);
    assert_eq!(b.offsets, [0]);
}

#[test]
fn oversized_window_is_rejected() {
    let (_, ir) = corpus_ir();
    let opts = LowerOptions { buffer_budget: 10, ..LowerOptions::with_params(&[("nx", 8), ("ny", 8)]) };
    assert_eq!(lower(&ir, Variant::SmartCache, &opts).unwrap_err(), LowerError::BudgetExceeded { buffer_len: 21, budget: 10 });
    // The memory variants build no windows.
    assert!(lower(&ir, Variant::Baseline, &opts).is_ok());
}

#[test]
fn offset_wider_than_a_row_is_not_linearizable() {
    let src = SHIFTED.replace("a(j, k + 1)", "a(j, k + 8)");
    let ir = build_ir(&free(&src)).unwrap();
    let err = lower(&ir, Variant::SmartCache, &LowerOptions::default()).unwrap_err();
    assert!(matches!(err, LowerError::NonLinearizableStencil { ref array, .. } if array == "a"), "{err:?}");
}

#[test]
fn reads_past_the_array_are_rejected() {
    let src = SHIFTED.replace("a(j, k + 1)", "a(j + 2, k)");
    let ir = build_ir(&free(&src)).unwrap();
    let err = lower(&ir, Variant::Baseline, &LowerOptions::default()).unwrap_err();
    assert_eq!(err, LowerError::OutOfBounds { node: "step".into(), array: "a".into() });
}

#[test]
fn arrays_of_different_shapes_are_rejected() {
    let src = SHIFTED.replace("c(0:n+1, 0:n+1)", "c(0:n+2, 0:n+1)");
    let ir = build_ir(&free(&src)).unwrap();
    let err = lower(&ir, Variant::Baseline, &LowerOptions::default()).unwrap_err();
    assert!(matches!(err, LowerError::ShapeMismatch { .. }), "{err:?}");
}

#[test]
fn corpus_transfers_are_made_once() {
    let g = lowered(Variant::Baseline, 8);
    let t = &g.transfers;
    assert_eq!(t.once_to_device, set(&["eta", "h", "h0", "u", "v", "wet"]));
    assert_eq!(t.once_to_host, set(&["eta"]));
    assert!(t.per_step_to_device.is_empty() && t.per_step_to_host.is_empty());
    // Scratch arrays regenerated every step move nowhere.
    for a in ["etan", "un", "vn"] {
        assert!(g.arrays.contains_key(a));
        assert!(!t.once_to_device.contains(a) && !t.once_to_host.contains(a));
    }
    assert_eq!(g.recirculation.get("eta").map(String::as_str), Some("global"));
}

#[test]
fn each_array_moves_at_most_once_per_direction() {
    for v in Variant::ALL {
        let t = lowered(v, 5).transfers;
        assert!(t.once_to_device.is_disjoint(&t.per_step_to_device), "{v}");
        assert!(t.once_to_host.is_disjoint(&t.per_step_to_host), "{v}");
    }
}

fn host_arrays(out: &fortstream::eval::ProgramOutput) -> Vec<(String, VarValue)> {
    out.vars.iter().filter(|(_, v)| matches!(v, VarValue::Array(_))).map(|(k, v)| (k.clone(), v.clone())).collect()
}

#[test]
fn minimized_transfers_replay_like_copying_everything() {
    let (prog, ir) = corpus_ir();
    let params = [("nx", 7), ("ny", 6), ("nt", 4)];
    let opts = SimOptions { eval: EvalConfig::with_params(&params), ..SimOptions::default() };
    for v in Variant::ALL {
        let g = lower(&ir, v, &LowerOptions::with_params(&params)).unwrap();
        let mut all = g.clone();
        all.transfers = TransferSchedule::everything(&g.arrays.keys().cloned().collect());
        let a = simulate(&prog, &ir, &g, &opts).unwrap();
        let b = simulate(&prog, &ir, &all, &opts).unwrap();
        let (ha, hb) = (host_arrays(&a.host), host_arrays(&b.host));
        // Only what the host reads after the loop has to agree.
        for name in ir.host.reads_after.iter() {
            let x = ha.iter().find(|(n, _)| n == name);
            let y = hb.iter().find(|(n, _)| n == name);
            assert_eq!(x, y, "{v}: {name}");
        }
        assert_eq!(a.host.scalar("etasum"), b.host.scalar("etasum"));
        assert!(a.report.host_transfers.to_device_bytes < b.report.host_transfers.to_device_bytes);
        assert!(a.report.host_transfers.to_host_bytes < b.report.host_transfers.to_host_bytes);
    }
}

#[test]
fn kernel_files_are_named_and_deterministic() {
    for v in Variant::ALL {
        let g = lowered(v, 8);
        let files = emit_kernels(&g);
        assert_eq!(files.len(), g.kernels.len());
        for ((f, _), k) in files.iter().zip(&g.kernels) {
            assert_eq!(f, &format!("{}_{}.clk", k.name, v.name()));
        }
        assert_eq!(files, emit_kernels(&lowered(v, 8)));
    }
}

fn text_of(g: &PipelineGraph, kernel: &str) -> KernelText {
    let (_, t) = emit_kernels(g).into_iter().find(|(f, _)| f.starts_with(&format!("{kernel}_"))).unwrap();
    parse_kernel_text(&t).unwrap()
}

#[test]
fn baseline_dynamics_text_has_no_channel_calls() {
    let t = text_of(&lowered(Variant::Baseline, 8), "dyn");
    assert_eq!(t.name, "dyn");
    assert!(t.reads_channels.is_empty() && t.writes_channels.is_empty() && t.channels_declared.is_empty());
    assert!(t.global_refs.contains("eta"));
}

#[test]
fn smartcache_shapiro_text_touches_no_global_array() {
    let t = text_of(&lowered(Variant::SmartCache, 8), "shapiro");
    assert!(t.global_refs.is_empty());
    assert!(t.params.iter().all(|p| !p.global));
    assert!(!t.reads_channels.is_empty());
}

#[test]
fn channelized_update_takes_fewer_arguments() {
    let base = text_of(&lowered(Variant::Baseline, 8), "update");
    let chan = text_of(&lowered(Variant::Channelized, 8), "update");
    assert!(chan.params.len() < base.params.len(), "{} vs {}", chan.params.len(), base.params.len());
}

#[test]
fn kernel_texts_agree_with_the_graph() {
    for v in Variant::ALL {
        let g = lowered(v, 6);
        for (k, (_, text)) in g.kernels.iter().zip(emit_kernels(&g)) {
            let t = parse_kernel_text(&text).unwrap();
            let names = |cs: Vec<usize>| -> BTreeSet<String> { cs.into_iter().map(|c| g.channels[c].name.clone()).collect() };
            assert_eq!(t.reads_channels, names(k.channels_in()), "{v} {}", k.name);
            assert_eq!(t.writes_channels, names(k.channels_out()), "{v} {}", k.name);
            assert!(t.reads_channels.is_subset(&t.channels_declared));
            let ports: BTreeSet<String> = k.mem_ports().into_iter().map(|(a, _)| a).collect();
            let globals: BTreeSet<String> = t.params.iter().filter(|p| p.global).map(|p| p.name.clone()).collect();
            assert_eq!(globals, ports, "{v} {}", k.name);
        }
    }
}

#[test]
fn graph_dump_lists_the_host_plan() {
    let g = lowered(Variant::Baseline, 8);
    let j = graph_to_json(&g);
    assert_eq!(j["variant"], "baseline");
    let plan = j["hostPlan"].as_array().unwrap();
    assert_eq!(plan[0]["op"], "transferToDevice");
    assert_eq!(plan[1]["op"], "timeLoop");
    assert_eq!(plan[1]["body"].as_array().unwrap().len(), 3);
    assert_eq!(plan[2]["op"], "transferToHost");
    assert_eq!(j["recirculation"]["eta"], "global");
    assert_eq!(compute_kernels(&g).len(), 3);
}
