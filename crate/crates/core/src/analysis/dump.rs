//! JSON view of the IR, stable enough for golden files.

use serde_json::{json, Value};

use super::classify::format_offsets;
use super::ir::{FunctionalIr, Nest, NodeKind, StreamIn};
use crate::frontend::expr_to_string;

fn nest_json(n: &Nest) -> Value {
    let bounds: Vec<String> =
        n.bounds.iter().map(|(lo, hi)| format!("{}:{}", expr_to_string(lo), expr_to_string(hi))).collect();
    json!({ "vars": n.vars, "bounds": bounds })
}

fn inputs_json(ins: &[StreamIn]) -> Value {
    ins.iter()
        .map(|s| {
            let offs: Vec<String> = s.offsets.iter().map(|o| format_offsets(o)).collect();
            json!({ "array": s.array, "offsets": offs, "stenciled": s.is_stenciled() })
        })
        .collect()
}

pub fn ir_to_json(ir: &FunctionalIr) -> Value {
    let nodes: Vec<Value> = ir
        .nodes
        .iter()
        .map(|n| match &n.kind {
            NodeKind::Map(m) => json!({
                "name": n.name, "kind": "map", "nest": nest_json(&m.nest),
                "inputs": inputs_json(&m.inputs), "outputs": m.outputs, "params": m.params,
            }),
            NodeKind::Fold(f) => json!({
                "name": n.name, "kind": "fold", "nest": nest_json(&f.nest),
                "inputs": inputs_json(&f.inputs), "acc": f.acc, "op": f.op, "params": f.params,
            }),
            NodeKind::Seq(s) => json!({
                "name": n.name, "kind": "seq", "reason": s.reason, "reads": s.reads, "writes": s.writes,
            }),
        })
        .collect();
    let edges: Vec<Value> = ir
        .edges
        .iter()
        .map(|e| json!({ "from": ir.nodes[e.from].name, "to": ir.nodes[e.to].name, "array": e.array }))
        .collect();
    let time_loop = ir.time_loop.as_ref().map(|t| {
        json!({ "var": t.var, "start": expr_to_string(&t.start), "end": expr_to_string(&t.end) })
    });
    json!({
        "program": ir.program,
        "timeLoop": time_loop,
        "nodes": nodes,
        "edges": edges,
        "host": ir.host,
    })
}
