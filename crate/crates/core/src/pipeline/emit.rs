//! Kernel source text in a small C dialect with blocking channel
//! intrinsics, plus a loader that recovers the structure of that text.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::graph::*;
use crate::analysis::classify::subscript_offset;
use crate::frontend::{BaseType, BinOp, Expr, Intrinsic, Stmt, StmtKind, UnOp};

fn c_type(t: BaseType) -> &'static str {
    match t {
        BaseType::Real => "float",
        BaseType::Integer => "int",
        BaseType::Logical => "bool",
    }
}

fn label(o: i32) -> String {
    match o {
        0 => "0".into(),
        o if o > 0 => format!("p{o}"),
        o => format!("m{}", -o),
    }
}

fn slot_local(array: &str, offs: &[i32]) -> String {
    let parts: Vec<String> = offs.iter().map(|&o| label(o)).collect();
    format!("{array}_{}", parts.join("_"))
}

fn out_local(array: &str) -> String {
    format!("{array}_out")
}

struct Body<'a> {
    c: &'a ComputeKernel,
    outputs: BTreeSet<&'a str>,
}

impl Body<'_> {
    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Int(i) => i.to_string(),
            Expr::Real(r) => {
                let s = format!("{r:?}");
                format!("{s}f")
            }
            Expr::Logical(b) => b.to_string(),
            Expr::Var(v) => v.clone(),
            Expr::ArrayRef(a, subs) => {
                if self.outputs.contains(a.as_str()) {
                    return out_local(a);
                }
                let offs: Option<Vec<i32>> =
                    subs.iter().zip(&self.c.nest_vars).map(|(s, v)| subscript_offset(s, v)).collect();
                match offs {
                    Some(o) => slot_local(a, &o),
                    None => format!("{a}[/* {} */]", subs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")),
                }
            }
            Expr::Intrinsic(f, args) => {
                let args: Vec<String> = args.iter().map(|a| self.expr(a)).collect();
                let name = match f {
                    Intrinsic::Abs => "abs",
                    Intrinsic::Min => "min",
                    Intrinsic::Max => "max",
                    Intrinsic::Sqrt => "sqrt",
                    Intrinsic::Mod => "mod",
                };
                format!("{name}({})", args.join(", "))
            }
            Expr::Call(f, args) => format!("{f}({})", args.iter().map(|a| self.expr(a)).collect::<Vec<_>>().join(", ")),
            Expr::Unary(UnOp::Neg, x) => format!("-({})", self.expr(x)),
            Expr::Unary(UnOp::Not, x) => format!("!({})", self.expr(x)),
            Expr::Binary(BinOp::Pow, a, b) => format!("pow({}, {})", self.expr(a), self.expr(b)),
            Expr::Binary(op, a, b) => {
                let o = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    BinOp::Ge => ">=",
                    BinOp::Eq => "==",
                    BinOp::Ne => "!=",
                    BinOp::And => "&&",
                    BinOp::Or => "||",
                    BinOp::Pow => unreachable!(),
                };
                format!("({} {o} {})", self.expr(a), self.expr(b))
            }
        }
    }

    fn stmts(&self, out: &mut String, stmts: &[Stmt], ind: usize) {
        let pad = "    ".repeat(ind);
        for s in stmts {
            match &s.kind {
                StmtKind::Assign { target, value } => {
                    let t = if target.indices.is_empty() { target.name.clone() } else { out_local(&target.name) };
                    let _ = writeln!(out, "{pad}{t} = {};", self.expr(value));
                }
                StmtKind::If { arms, otherwise } => {
                    for (i, (cond, body)) in arms.iter().enumerate() {
                        let kw = if i == 0 { "if" } else { "} else if" };
                        let _ = writeln!(out, "{pad}{kw} ({}) {{", self.expr(cond));
                        self.stmts(out, body, ind + 1);
                    }
                    if let Some(body) = otherwise {
                        let _ = writeln!(out, "{pad}}} else {{");
                        self.stmts(out, body, ind + 1);
                    }
                    let _ = writeln!(out, "{pad}}}");
                }
                StmtKind::Do(d) => {
                    let step = d.step.as_ref().map(|e| self.expr(e)).unwrap_or_else(|| "1".into());
                    let v = &d.var;
                    let _ = writeln!(
                        out,
                        "{pad}for ({v} = {}; {v} <= {}; {v} += {step}) {{",
                        self.expr(&d.start),
                        self.expr(&d.end)
                    );
                    self.stmts(out, &d.body, ind + 1);
                    let _ = writeln!(out, "{pad}}}");
                }
                StmtKind::Continue | StmtKind::Return | StmtKind::Call { .. } => {}
            }
        }
    }
}

struct Emitter<'g> {
    g: &'g PipelineGraph,
    out: String,
}

impl Emitter<'_> {
    fn channel_decls(&mut self, k: &Kernel) {
        let mut chans: Vec<usize> = k.channels_in();
        chans.extend(k.channels_out());
        chans.sort_unstable();
        chans.dedup();
        for c in chans {
            let ch = &self.g.channels[c];
            let _ = writeln!(self.out, "channel {} {} __attribute__((depth({})));", c_type(ch.elem_type), ch.name, ch.capacity);
        }
        if !k.channels_in().is_empty() || !k.channels_out().is_empty() {
            self.out.push('\n');
        }
    }

    fn signature(&mut self, k: &Kernel, extra: &[(String, BaseType)]) {
        let ports = k.mem_ports();
        let mut args = Vec::new();
        let arrays: BTreeSet<&String> = ports.iter().map(|(a, _)| a).collect();
        for a in arrays {
            let ty = self.g.arrays.get(a).copied().or_else(|| extra.iter().find(|(n, _)| n == a).map(|x| x.1));
            let ty = c_type(ty.unwrap_or(BaseType::Real));
            if ports.contains(&(a.clone(), MemDir::Write)) {
                args.push(format!("__global {ty} *restrict {a}"));
            } else {
                args.push(format!("__global const {ty} *restrict {a}"));
            }
        }
        if let KernelKind::Compute(c) = &k.kind {
            for (p, t) in c.elem.params.iter().zip(&c.elem.param_types) {
                args.push(format!("const {} {p}", c_type(*t)));
            }
        }
        let args = if args.is_empty() { "void".to_string() } else { args.join(", ") };
        let _ = writeln!(self.out, "__kernel void {}({args}) {{", k.name);
    }

    /// `const int v = ...;` lines recovering indices from position `p`.
    fn unflatten(&mut self, names: &[String], pad: &str) {
        let l = &self.g.layout;
        for (d, v) in names.iter().enumerate() {
            let (lo, hi) = l.bounds[d];
            let ext = hi - lo + 1;
            let s = l.strides[d];
            let term = match (d, s) {
                (0, 1) => "p".to_string(),
                (0, _) => format!("p / {s}"),
                (_, 1) => format!("p % {ext}"),
                _ => format!("p / {s} % {ext}"),
            };
            let _ = match lo {
                0 => writeln!(self.out, "{pad}const int {v} = {term};"),
                _ => writeln!(self.out, "{pad}const int {v} = {term} + {lo};"),
            };
        }
    }

    fn inside(names: &[String], d: &Domain) -> String {
        let parts: Vec<String> =
            names.iter().zip(&d.bounds).map(|(v, (lo, hi))| format!("{v} >= {lo} && {v} <= {hi}")).collect();
        if parts.is_empty() {
            "true".into()
        } else {
            parts.join(" && ")
        }
    }

    fn compute(&mut self, k: &Kernel, c: &ComputeKernel) {
        self.channel_decls(k);
        let acc_ty = c.fold.as_ref().map(|(a, _)| (a.clone(), self.g.scalars.get(a).copied().unwrap_or(BaseType::Real)));
        let extra: Vec<(String, BaseType)> = acc_ty.iter().cloned().collect();
        self.signature(k, &extra);
        let body = Body { c, outputs: c.elem.outputs.iter().map(|(a, _)| a.as_str()).collect() };
        let rs = &self.g.layout;
        let mut pad = "    ".to_string();
        if let Some((a, t)) = &acc_ty {
            let _ = writeln!(self.out, "{pad}{} {a} = *{a};", c_type(*t));
        }
        if c.full_stream {
            let _ = writeln!(self.out, "{pad}for (int p = 0; p < {}; p++) {{", rs.size);
            pad.push_str("    ");
            self.unflatten(&c.nest_vars, &pad);
        } else {
            for (v, (lo, hi)) in c.nest_vars.iter().zip(&k.domain.bounds) {
                let _ = writeln!(self.out, "{pad}for (int {v} = {lo}; {v} <= {hi}; {v}++) {{");
                pad.push_str("    ");
            }
            let terms: Vec<String> = c
                .nest_vars
                .iter()
                .zip(&rs.bounds)
                .zip(&rs.strides)
                .map(|((v, (lo, _)), s)| {
                    let d = if *lo == 0 { v.clone() } else { format!("({v} - {lo})") };
                    if *s == 1 {
                        d
                    } else {
                        format!("{d} * {s}")
                    }
                })
                .collect();
            let _ = writeln!(self.out, "{pad}const int p = {};", terms.join(" + "));
        }
        for ((a, offs), src) in c.elem.slots.iter().zip(&c.sources) {
            let ty = c_type(self.g.arrays.get(a).copied().unwrap_or(BaseType::Real));
            let v = slot_local(a, offs);
            let rhs = match src {
                Source::Mem { array, offset, .. } => match offset {
                    0 => format!("{array}[p]"),
                    o if *o > 0 => format!("{array}[p + {o}]"),
                    o => format!("{array}[p - {}]", -o),
                },
                Source::Channel { channel } => format!("read_channel({})", self.g.channels[*channel].name),
            };
            let _ = writeln!(self.out, "{pad}const {ty} {v} = {rhs};");
        }
        for (i, (a, t)) in c.elem.outputs.iter().enumerate() {
            let init = match c.elem.out_init(i) {
                Some(s) => slot_local(&c.elem.slots[s].0, &c.elem.slots[s].1),
                None => zero(*t).to_string(),
            };
            let _ = writeln!(self.out, "{pad}{} {} = {init};", c_type(*t), out_local(a));
        }
        let inner = if c.full_stream {
            let _ = writeln!(self.out, "{pad}if ({}) {{", Self::inside(&c.nest_vars, &k.domain));
            format!("{pad}    ")
        } else {
            pad.clone()
        };
        for (n, t) in &c.elem.locals {
            if acc_ty.as_ref().is_some_and(|(a, _)| a == n) {
                continue;
            }
            let _ = writeln!(self.out, "{inner}{} {n};", c_type(*t));
        }
        body.stmts(&mut self.out, &c.body, inner.len() / 4);
        if c.full_stream {
            let _ = writeln!(self.out, "{pad}}} else {{");
            for (a, t) in &c.elem.outputs {
                let _ = writeln!(self.out, "{inner}{} = {};", out_local(a), zero(*t));
            }
            let _ = writeln!(self.out, "{pad}}}");
        }
        for ((a, _), sinks) in c.elem.outputs.iter().zip(&c.sinks) {
            for s in sinks {
                match s {
                    Sink::Mem { array } => {
                        let _ = writeln!(self.out, "{pad}{array}[p] = {};", out_local(a));
                    }
                    Sink::Channel { channel } => {
                        let _ = writeln!(self.out, "{pad}write_channel({}, {});", self.g.channels[*channel].name, out_local(a));
                    }
                }
            }
        }
        self.close_loops(&mut pad, if c.full_stream { 1 } else { c.nest_vars.len() });
        if let Some((a, _)) = &acc_ty {
            let _ = writeln!(self.out, "    *{a} = {a};");
        }
        self.out.push_str("}\n");
    }

    fn close_loops(&mut self, pad: &mut String, n: usize) {
        for _ in 0..n {
            pad.truncate(pad.len() - 4);
            let _ = writeln!(self.out, "{pad}}}");
        }
    }

    fn mem_read(&mut self, k: &Kernel, streams: &[(String, Vec<usize>)]) {
        self.channel_decls(k);
        self.signature(k, &[]);
        let _ = writeln!(self.out, "    for (int p = 0; p < {}; p++) {{", self.g.layout.size);
        for (a, outs) in streams {
            let ty = c_type(self.g.arrays[a]);
            let _ = writeln!(self.out, "        const {ty} {a}_v = {a}[p];");
            for &c in outs {
                let _ = writeln!(self.out, "        write_channel({}, {a}_v);", self.g.channels[c].name);
            }
        }
        self.out.push_str("    }\n}\n");
    }

    fn mem_write(&mut self, k: &Kernel, streams: &[(String, usize, Domain)]) {
        self.channel_decls(k);
        self.signature(k, &[]);
        let names: Vec<String> = (0..self.g.layout.bounds.len()).map(|d| format!("i{d}")).collect();
        let _ = writeln!(self.out, "    for (int p = 0; p < {}; p++) {{", self.g.layout.size);
        self.unflatten(&names, "        ");
        for (a, c, d) in streams {
            let ty = c_type(self.g.arrays[a]);
            let _ = writeln!(self.out, "        const {ty} {a}_v = read_channel({});", self.g.channels[*c].name);
            let _ = writeln!(self.out, "        if ({}) {a}[p] = {a}_v;", Self::inside(&names, d));
        }
        self.out.push_str("    }\n}\n");
    }

    fn smart_cache(&mut self, k: &Kernel, spec: &SmartCacheSpec, input: usize, outputs: &[usize]) {
        self.channel_decls(k);
        self.signature(k, &[]);
        let ty = c_type(self.g.channels[input].elem_type);
        let (bl, mp, size) = (spec.buffer_len, spec.mp_off, spec.size);
        let o = &mut self.out;
        let _ = writeln!(o, "    {ty} win[{bl}];");
        let _ = writeln!(o, "    for (int t = 0; t < {}; t++) {{", size as i64 + mp);
        if bl > 1 {
            let _ = writeln!(o, "        for (int i = 0; i < {}; i++) win[i] = win[i + 1];", bl - 1);
        }
        let _ = writeln!(o, "        if (t < {size}) win[{}] = read_channel({});", bl - 1, self.g.channels[input].name);
        let _ = writeln!(o, "        const int p = t - {mp};");
        let _ = writeln!(o, "        if (p >= 0) {{");
        for (&d, &c) in spec.offsets.iter().zip(outputs) {
            let q = match d {
                0 => "p".to_string(),
                d if d > 0 => format!("p + {d}"),
                d => format!("p - {}", -d),
            };
            let at = format!("win[{} - (t - clamp({q}, 0, {}))]", bl - 1, size - 1);
            let v = match spec.policy {
                BoundaryPolicy::Clamp => at,
                BoundaryPolicy::Zero if d == 0 => at,
                BoundaryPolicy::Zero => format!("({q} < 0 || {q} >= {size}) ? 0 : {at}"),
            };
            let _ = writeln!(o, "            write_channel({}, {v});", self.g.channels[c].name);
        }
        o.push_str("        }\n    }\n}\n");
    }
}

fn zero(t: BaseType) -> &'static str {
    match t {
        BaseType::Real => "0.0f",
        BaseType::Integer => "0",
        BaseType::Logical => "false",
    }
}

/// One `<kernel>_<variant>.clk` file per kernel, in graph order.
pub fn emit_kernels(graph: &PipelineGraph) -> Vec<(String, String)> {
    graph
        .kernels
        .iter()
        .map(|k| {
            let mut e = Emitter { g: graph, out: String::new() };
            let _ = writeln!(e.out, "// {} kernel {} ({})\n", k.kind_name(), k.name, graph.variant);
            match &k.kind {
                KernelKind::Compute(c) => e.compute(k, c),
                KernelKind::MemRead { streams } => e.mem_read(k, streams),
                KernelKind::MemWrite { streams } => e.mem_write(k, streams),
                KernelKind::SmartCache { spec, input, outputs } => e.smart_cache(k, spec, *input, outputs),
            }
            (format!("{}_{}.clk", k.name, graph.variant), e.out)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelParam {
    pub name: String,
    pub ty: String,
    pub global: bool,
    pub writable: bool,
}

/// What the loader recovers from emitted kernel text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelText {
    pub name: String,
    pub params: Vec<KernelParam>,
    pub channels_declared: BTreeSet<String>,
    pub reads_channels: BTreeSet<String>,
    pub writes_channels: BTreeSet<String>,
    /// Global array parameters indexed in the body.
    pub global_refs: BTreeSet<String>,
}

fn ident_at(s: &str) -> String {
    s.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect()
}

fn calls(body: &str, f: &str) -> BTreeSet<String> {
    let pat = format!("{f}(");
    body.match_indices(&pat)
        .filter(|(i, _)| !body[..*i].ends_with(|c: char| c.is_ascii_alphanumeric() || c == '_'))
        .map(|(i, _)| ident_at(body[i + pat.len()..].trim_start()))
        .collect()
}

pub fn parse_kernel_text(text: &str) -> Result<KernelText, String> {
    let start = text.find("__kernel void ").ok_or("no __kernel declaration")?;
    let rest = &text[start + "__kernel void ".len()..];
    let open = rest.find('(').ok_or("missing parameter list")?;
    let name = rest[..open].trim().to_string();
    let close = rest.find(')').ok_or("unterminated parameter list")?;
    let mut params = Vec::new();
    for raw in rest[open + 1..close].split(',').map(str::trim).filter(|p| !p.is_empty() && *p != "void") {
        let words: Vec<&str> = raw.split_whitespace().collect();
        let pname = words.last().ok_or("empty parameter")?.trim_start_matches('*').to_string();
        let global = words.contains(&"__global");
        let ty = words
            .iter()
            .find(|w| matches!(**w, "float" | "int" | "bool"))
            .ok_or_else(|| format!("parameter without a type: {raw}"))?
            .to_string();
        params.push(KernelParam { name: pname, ty, global, writable: global && !words.contains(&"const") });
    }
    let body = &rest[close..];
    let mut channels_declared = BTreeSet::new();
    for line in text[..start].lines() {
        if let Some(decl) = line.trim().strip_prefix("channel ") {
            let mut w = decl.split_whitespace();
            w.next();
            if let Some(n) = w.next() {
                channels_declared.insert(n.to_string());
            }
        }
    }
    let global_refs = params
        .iter()
        .filter(|p| p.global)
        .filter(|p| {
            let pat = format!("{}[", p.name);
            body.match_indices(&pat)
                .any(|(i, _)| !body[..i].ends_with(|c: char| c.is_ascii_alphanumeric() || c == '_'))
        })
        .map(|p| p.name.clone())
        .collect();
    Ok(KernelText {
        name,
        params,
        channels_declared,
        reads_channels: calls(body, "read_channel"),
        writes_channels: calls(body, "write_channel"),
        global_refs,
    })
}
