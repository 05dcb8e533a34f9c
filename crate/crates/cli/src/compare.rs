use std::fs;

use fortstream::analysis::{build_ir, FunctionalIr};
use fortstream::eval::EvalConfig;
use fortstream::frontend::ProgramAst;
use fortstream::pipeline::{lower, HostOp, LowerOptions, PipelineGraph, Variant};
use fortstream::sim::{count_accesses, simulate, SimOptions};
use fortstream::sw::{corpus, reference_run, ExperimentConfig, ModelParams, ShallowWaterState};
use serde::Serialize;
use serde_json::json;

use crate::commands::{sim_failure, to_json, write_out};
use crate::{Experiment, Failure, RunFlags};

/// Distance in representable f32 values; NaN is infinitely far.
pub fn ulp_distance(a: f32, b: f32) -> u64 {
    if a.is_nan() || b.is_nan() {
        return if a.to_bits() == b.to_bits() { 0 } else { u64::MAX };
    }
    let key = |x: f32| {
        let i = x.to_bits() as i32 as i64;
        if i < 0 {
            i64::from(i32::MIN) - i
        } else {
            i
        }
    };
    key(a).abs_diff(key(b))
}

/// Left-aligned first column, right-aligned numbers.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

struct Setup {
    cfg: ExperimentConfig,
    params: ModelParams,
    prog: ProgramAst,
    ir: FunctionalIr,
}

impl Setup {
    fn load(exp: &Experiment) -> Result<Setup, Failure> {
        let name = exp.experiment.display();
        let text = fs::read_to_string(&exp.experiment).map_err(|e| Failure::Usage(format!("{name}: {e}")))?;
        let cfg = ExperimentConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{name}: {e}")))?;
        let params = cfg.params().map_err(|e| Failure::Usage(format!("{name}: {e}")))?;
        let prog = fortstream::refactor::refactor(&corpus::program()).map_err(|e| Failure::Internal(e.to_string()))?.0;
        let ir = build_ir(&prog).map_err(|e| Failure::Internal(e.to_string()))?;
        Ok(Setup { cfg, params, prog, ir })
    }

    fn grid(&self) -> [(&'static str, i32); 3] {
        [("nx", self.cfg.nx as i32), ("ny", self.cfg.ny as i32), ("nt", self.cfg.nt as i32)]
    }

    fn lower(&self, v: Variant, capacity: usize) -> Result<PipelineGraph, Failure> {
        let opts = LowerOptions { capacity, ..LowerOptions::with_params(&self.grid()) };
        lower(&self.ir, v, &opts).map_err(|e| Failure::Verify(format!("cannot lower to {v}: {e}")))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Row {
    variant: Variant,
    max_abs: f64,
    max_ulp: u64,
    global_reads: u64,
    global_writes: u64,
    predicted: u64,
    vs_baseline: f64,
    pass: bool,
}

pub fn compare(
    exp: &Experiment,
    variants: &[Variant],
    run: &RunFlags,
    capacity: usize,
    ulp_tolerance: u32,
) -> Result<(), Failure> {
    let s = Setup::load(exp)?;
    let nt = s.cfg.nt as u64;
    let s0 = ShallowWaterState::initial(&s.params);
    let want = reference_run(&s0, &s.params, s.cfg.nt).map_err(|e| Failure::Verify(e.to_string()))?;
    let (initial, scalars) = corpus::overrides(&s0, &s.params);
    let opts = SimOptions {
        schedule: run.schedule(),
        max_steps: run.max_steps,
        eval: EvalConfig::with_params(&s.grid()),
        initial,
        scalars,
    };
    let baseline = count_accesses(&s.lower(Variant::Baseline, capacity)?, nt).total() as f64;
    let mut rows = Vec::new();
    for &v in variants {
        let g = s.lower(v, capacity)?;
        let r = simulate(&s.prog, &s.ir, &g, &opts).map_err(sim_failure)?;
        let eta = r.host.field_f32("eta").ok_or_else(|| Failure::Internal("host lost eta".into()))?;
        let dev = |a: &str| -> Vec<f32> { r.device.get(a).map(|x| x.iter().map(|v| v.as_f32()).collect()).unwrap_or_default() };
        let wet: Vec<f32> = want.wet.iter().map(|&w| w as f32).collect();
        let pairs = [(eta, &want.eta), (dev("u"), &want.u), (dev("v"), &want.v), (dev("h"), &want.h), (dev("wet"), &wet)];
        let (mut max_abs, mut max_ulp, mut shape_ok) = (0.0f64, 0u64, true);
        for (got, want) in &pairs {
            shape_ok &= got.len() == want.len();
            for (a, b) in got.iter().zip(want.iter()) {
                max_abs = max_abs.max((*a as f64 - *b as f64).abs());
                max_ulp = max_ulp.max(ulp_distance(*a, *b));
            }
        }
        let predicted = count_accesses(&g, nt);
        let t = &r.report.totals;
        let counts_ok = (t.global_reads, t.global_writes) == (predicted.reads, predicted.writes);
        rows.push(Row {
            variant: v,
            max_abs,
            max_ulp,
            global_reads: t.global_reads,
            global_writes: t.global_writes,
            predicted: predicted.total(),
            vs_baseline: r.report.global_accesses() as f64 / baseline,
            pass: shape_ok && counts_ok && max_ulp <= u64::from(ulp_tolerance),
        });
    }
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.variant.to_string(),
                format!("{:.3e}", r.max_abs),
                r.max_ulp.to_string(),
                r.global_reads.to_string(),
                r.global_writes.to_string(),
                r.predicted.to_string(),
                format!("{:.4}", r.vs_baseline),
                if r.pass { "PASS" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let header = ["variant", "max abs", "max ulp", "reads", "writes", "predicted", "vs baseline", "verdict"];
    print!("{}", table(&header, &text_rows));
    let pass = rows.iter().all(|r| r.pass);
    let doc = json!({
        "experiment": s.cfg,
        "schedule": run.schedule().to_string(),
        "ulpTolerance": ulp_tolerance,
        "rows": rows,
        "pass": pass,
    });
    write_out(&exp.out, "compare.json", &to_json(&doc))?;
    println!("{}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Verify("some variants disagree with the reference".into()))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Metrics {
    variant: Variant,
    kernels: usize,
    channels: usize,
    launches_per_step: usize,
    smart_cache_elements: usize,
    reads_per_step: u64,
    writes_per_step: u64,
    total_accesses: u64,
    vs_baseline: f64,
    to_device_bytes: u64,
    to_host_bytes: u64,
}

pub fn metrics(exp: &Experiment, json: bool) -> Result<(), Failure> {
    let s = Setup::load(exp)?;
    let nt = s.cfg.nt as u64;
    let mut rows = Vec::new();
    for v in Variant::ALL {
        let g = s.lower(v, 64)?;
        let step = count_accesses(&g, 1);
        let bytes = |once: usize, per_step: usize| 4 * g.layout.size as u64 * (once as u64 + nt * per_step as u64);
        let t = &g.transfers;
        rows.push(Metrics {
            variant: v,
            kernels: g.kernels.len(),
            channels: g.channels.len(),
            launches_per_step: g.step.iter().filter(|op| matches!(op, HostOp::Launch(_))).count(),
            smart_cache_elements: g.smart_caches().iter().map(|c| c.buffer_len).sum(),
            reads_per_step: step.reads,
            writes_per_step: step.writes,
            total_accesses: count_accesses(&g, nt).total(),
            vs_baseline: 0.0,
            to_device_bytes: bytes(t.once_to_device.len(), t.per_step_to_device.len()),
            to_host_bytes: bytes(t.once_to_host.len(), t.per_step_to_host.len()),
        });
    }
    let base = rows[0].total_accesses as f64;
    for r in &mut rows {
        r.vs_baseline = r.total_accesses as f64 / base;
    }
    let doc = to_json(&json!({ "experiment": s.cfg, "variants": rows }));
    write_out(&exp.out, "metrics.json", &doc)?;
    if json {
        print!("{doc}");
        return Ok(());
    }
    let header = [
        "variant", "kernels", "channels", "launches", "cache elems", "reads/step", "writes/step", "total", "vs baseline",
    ];
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.variant.to_string(),
                r.kernels.to_string(),
                r.channels.to_string(),
                r.launches_per_step.to_string(),
                r.smart_cache_elements.to_string(),
                r.reads_per_step.to_string(),
                r.writes_per_step.to_string(),
                r.total_accesses.to_string(),
                format!("{:.4}", r.vs_baseline),
            ]
        })
        .collect();
    print!("{}", table(&header, &text_rows));
    Ok(())
}
