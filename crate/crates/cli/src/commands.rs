use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fortstream::analysis::{build_ir, ir_to_json, FunctionalIr};
use fortstream::eval::{EvalConfig, Value, VarValue};
use fortstream::frontend::{form_for_path, link, parse_with, ProgramAst};
use fortstream::pipeline::{emit_kernels, graph_to_json, lower, LowerOptions, PipelineGraph};
use fortstream::sim::{SimError, SimOptions, SimResult};

use crate::{Failure, Lowering, RunFlags, Sources};

pub fn write_out(out: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))?;
    let path = out.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn to_json(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load(src: &Sources) -> Result<ProgramAst, Failure> {
    if src.inputs.is_empty() {
        return Err(Failure::Usage("no input files".into()));
    }
    let mut units = Vec::new();
    for path in &src.inputs {
        let name = path.to_string_lossy();
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{name}: {e}")))?;
        let parsed = parse_with(&text, &name, form_for_path(&name)).map_err(|e| Failure::Verify(e.diagnostic(&name)))?;
        units.extend(parsed);
    }
    link(units).map_err(|e| Failure::Verify(e.to_string()))
}

fn refactored(src: &Sources) -> Result<(ProgramAst, fortstream::refactor::RefactorReport), Failure> {
    let prog = load(src)?;
    fortstream::refactor::refactor(&prog).map_err(|e| Failure::Verify(e.to_string()))
}

fn analyzed(src: &Sources) -> Result<(ProgramAst, FunctionalIr), Failure> {
    let (prog, _) = refactored(src)?;
    let ir = build_ir(&prog).map_err(|e| Failure::Verify(e.to_string()))?;
    Ok((prog, ir))
}

fn lowered(src: &Sources, ir: &FunctionalIr, l: &Lowering) -> Result<PipelineGraph, Failure> {
    let opts = LowerOptions { capacity: l.capacity, params: src.params.iter().cloned().collect(), ..LowerOptions::default() };
    lower(ir, l.variant, &opts).map_err(|e| Failure::Verify(format!("cannot lower to {}: {e}", l.variant)))
}

pub fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Deadlock { blocked } => Failure::Internal(format!("deadlock; blocked kernels: {}", blocked.join(", "))),
        e => Failure::Internal(e.to_string()),
    }
}

pub fn refactor(src: &Sources, emit_report: bool) -> Result<(), Failure> {
    let (prog, report) = refactored(src)?;
    let inputs: Vec<PathBuf> = src.inputs.iter().filter_map(|p| p.canonicalize().ok()).collect();
    let mut written = BTreeMap::new();
    for (path, text) in fortstream::refactor::emit_f95(&prog) {
        let name = Path::new(&path).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or(path.clone());
        if let Some(other) = written.insert(name.clone(), path.clone()) {
            return Err(Failure::Usage(format!("{other} and {path} would both be written to {name}")));
        }
        let target = src.out.join(&name);
        if target.canonicalize().is_ok_and(|t| inputs.contains(&t)) {
            return Err(Failure::Usage(format!("refusing to overwrite input {}", target.display())));
        }
        write_out(&src.out, &name, &text)?;
        println!("wrote {}", target.display());
    }
    if emit_report {
        let p = write_out(&src.out, "refactor_report.json", &to_json(&report))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn analyze(src: &Sources, dump_ir: bool) -> Result<(), Failure> {
    let (_, ir) = analyzed(src)?;
    for n in &ir.nodes {
        let reads: Vec<String> = n.inputs().iter().map(|s| format!("{}{:?}", s.array, s.offsets)).collect();
        println!("{:<12} {:<6} {}", n.name, n.kind_name(), reads.join(" "));
    }
    if dump_ir {
        let p = write_out(&src.out, "ir.json", &to_json(&ir_to_json(&ir)))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn compile(src: &Sources, l: &Lowering) -> Result<(), Failure> {
    let (_, ir) = analyzed(src)?;
    let g = lowered(src, &ir, l)?;
    for (name, text) in emit_kernels(&g) {
        let p = write_out(&src.out, &name, &text)?;
        println!("wrote {}", p.display());
    }
    let p = write_out(&src.out, &format!("graph_{}.json", l.variant), &to_json(&graph_to_json(&g)))?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn simulate(src: &Sources, l: &Lowering, run: &RunFlags, dump_report: Option<&Path>) -> Result<(), Failure> {
    if let Some(p) = dump_report {
        if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Failure::Usage(format!("--dump-report {} must be a path inside --out", p.display())));
        }
    }
    let (prog, ir) = analyzed(src)?;
    let g = lowered(src, &ir, l)?;
    let eval = EvalConfig { param_overrides: src.params.iter().cloned().collect(), ..EvalConfig::default() };
    let opts = SimOptions { schedule: run.schedule(), max_steps: run.max_steps, eval, ..SimOptions::default() };
    let r = fortstream::sim::simulate(&prog, &ir, &g, &opts).map_err(sim_failure)?;
    print_summary(&r);
    let scalars: BTreeMap<&String, serde_json::Value> = r
        .host
        .vars
        .iter()
        .filter_map(|(name, v)| match v {
            VarValue::Scalar(Value::Int(i)) => Some((name, (*i).into())),
            VarValue::Scalar(Value::Real(x)) => Some((name, (*x).into())),
            VarValue::Scalar(Value::Logical(b)) => Some((name, (*b).into())),
            VarValue::Array(_) => None,
        })
        .collect();
    let p = write_out(&src.out, &format!("scalars_{}.json", l.variant), &to_json(&scalars))?;
    println!("wrote {}", p.display());
    if let Some(p) = dump_report {
        let path = src.out.join(p);
        let dir = path.parent().unwrap_or(&src.out).to_path_buf();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let p = write_out(&dir, &name, &to_json(&r.report))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(r: &SimResult) {
    let rep = &r.report;
    println!("variant        {}", rep.variant);
    println!("schedule       {}", rep.schedule);
    println!("time steps     {}", rep.time_steps);
    println!("global reads   {}", rep.totals.global_reads);
    println!("global writes  {}", rep.totals.global_writes);
    println!("channel pushes {}", rep.totals.channel_pushes);
    println!("host bytes     {} in, {} out", rep.host_transfers.to_device_bytes, rep.host_transfers.to_host_bytes);
}
