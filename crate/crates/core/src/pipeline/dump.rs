//! Structured dump of a pipeline graph.

use serde_json::{json, Value};

use super::graph::*;

fn kernel_json(g: &PipelineGraph, k: &Kernel) -> Value {
    let names = |cs: Vec<usize>| -> Vec<&str> { cs.into_iter().map(|c| g.channels[c].name.as_str()).collect() };
    let ports: Vec<Value> = k.mem_ports().into_iter().map(|(a, d)| json!({"array": a, "dir": d})).collect();
    let mut v = json!({
        "name": k.name,
        "kind": k.kind_name(),
        "domain": k.domain.bounds,
        "params": k.params,
        "memPorts": ports,
        "channelsIn": names(k.channels_in()),
        "channelsOut": names(k.channels_out()),
    });
    match &k.kind {
        KernelKind::SmartCache { spec, .. } => v["smartCache"] = json!(spec),
        KernelKind::Compute(c) => {
            v["fullStream"] = json!(c.full_stream);
            if let Some((acc, op)) = &c.fold {
                v["fold"] = json!({"acc": acc, "op": op});
            }
        }
        _ => {}
    }
    v
}

pub fn graph_to_json(g: &PipelineGraph) -> Value {
    let step: Vec<Value> = g
        .step
        .iter()
        .map(|op| match op {
            HostOp::Host { node, .. } => json!({"op": "host", "node": node}),
            HostOp::Launch(ks) => json!({"op": "launch", "kernels": ks}),
        })
        .collect();
    let mut plan = vec![json!({"op": "transferToDevice", "arrays": g.transfers.once_to_device})];
    match &g.time_loop {
        Some(t) => plan.push(json!({
            "op": "timeLoop",
            "var": t.var,
            "start": t.start.to_string(),
            "end": t.end.to_string(),
            "perStepToDevice": g.transfers.per_step_to_device,
            "body": step,
            "perStepToHost": g.transfers.per_step_to_host,
        })),
        None => plan.extend(step),
    }
    plan.push(json!({"op": "transferToHost", "arrays": g.transfers.once_to_host}));
    json!({
        "variant": g.variant,
        "layout": g.layout,
        "arrays": g.arrays,
        "kernels": g.kernels.iter().map(|k| kernel_json(g, k)).collect::<Vec<_>>(),
        "channels": g.channels,
        "hostPlan": plan,
        "transfers": g.transfers,
        "recirculation": g.recirculation,
    })
}
