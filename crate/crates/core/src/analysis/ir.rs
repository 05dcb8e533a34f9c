//! Functional dataflow IR: maps and folds over array streams.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::elemental::ElemFn;
use crate::frontend::{BaseType, Expr, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Read,
    Write,
}

/// One array access with constant offsets relative to the nest variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccessPattern {
    pub array: String,
    pub mode: Mode,
    pub offsets: Vec<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldOp {
    Add,
    Mul,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoopClass {
    Map,
    Fold { acc: String, op: FoldOp },
    Sequential(String),
}

/// A perfectly nested loop nest with unit steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Nest {
    pub vars: Vec<String>,
    pub bounds: Vec<(Expr, Expr)>,
    pub body: Vec<Stmt>,
}

/// An input array and the offsets at which one element reads it, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamIn {
    pub array: String,
    pub offsets: Vec<Vec<i32>>,
}

impl StreamIn {
    pub fn is_stenciled(&self) -> bool {
        self.offsets.iter().any(|o| o.iter().any(|&x| x != 0))
    }
}

#[derive(Debug, Clone)]
pub struct MapNode {
    pub nest: Nest,
    pub inputs: Vec<StreamIn>,
    pub outputs: Vec<String>,
    /// Loop-invariant scalars read by the body.
    pub params: Vec<String>,
    pub elem: ElemFn,
}

#[derive(Debug, Clone)]
pub struct FoldNode {
    pub nest: Nest,
    pub inputs: Vec<StreamIn>,
    pub acc: String,
    pub op: FoldOp,
    pub params: Vec<String>,
    /// Produces the per-element contribution as its only output.
    pub elem: ElemFn,
}

#[derive(Debug, Clone)]
pub struct SeqNode {
    pub stmts: Vec<Stmt>,
    pub reason: String,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Map(MapNode),
    Fold(FoldNode),
    Seq(SeqNode),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NodeKind::Map(_) => "map",
            NodeKind::Fold(_) => "fold",
            NodeKind::Seq(_) => "seq",
        }
    }

    pub fn inputs(&self) -> &[StreamIn] {
        match &self.kind {
            NodeKind::Map(m) => &m.inputs,
            NodeKind::Fold(f) => &f.inputs,
            NodeKind::Seq(_) => &[],
        }
    }

    /// Names (arrays and scalars) this node reads.
    pub fn reads(&self) -> BTreeSet<String> {
        match &self.kind {
            NodeKind::Map(m) => m.inputs.iter().map(|s| s.array.clone()).chain(m.params.iter().cloned()).collect(),
            NodeKind::Fold(f) => f
                .inputs
                .iter()
                .map(|s| s.array.clone())
                .chain(f.params.iter().cloned())
                .chain(std::iter::once(f.acc.clone()))
                .collect(),
            NodeKind::Seq(s) => s.reads.clone(),
        }
    }

    /// Names this node writes.
    pub fn writes(&self) -> BTreeSet<String> {
        match &self.kind {
            NodeKind::Map(m) => m.outputs.iter().cloned().collect(),
            NodeKind::Fold(f) => std::iter::once(f.acc.clone()).collect(),
            NodeKind::Seq(s) => s.writes.clone(),
        }
    }

    pub fn nest(&self) -> Option<&Nest> {
        match &self.kind {
            NodeKind::Map(m) => Some(&m.nest),
            NodeKind::Fold(f) => Some(&f.nest),
            NodeKind::Seq(_) => None,
        }
    }

    pub fn as_map(&self) -> Option<&MapNode> {
        match &self.kind {
            NodeKind::Map(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub array: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayInfo {
    pub ty: BaseType,
    /// (lower, upper) per dimension.
    pub bounds: Vec<(Expr, Expr)>,
}

/// Which arrays the host program reads and writes around the time loop.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HostUse {
    pub writes_before: BTreeSet<String>,
    pub reads_before: BTreeSet<String>,
    pub writes_inside: BTreeSet<String>,
    pub reads_inside: BTreeSet<String>,
    pub writes_after: BTreeSet<String>,
    pub reads_after: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeLoop {
    pub var: String,
    pub start: Expr,
    pub end: Expr,
}

#[derive(Debug, Clone)]
pub struct FunctionalIr {
    pub program: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub arrays: BTreeMap<String, ArrayInfo>,
    /// Types of every scalar visible in the step body.
    pub scalars: BTreeMap<String, BaseType>,
    /// PARAMETER constants of the program unit.
    pub constants: Vec<(String, Expr)>,
    pub time_loop: Option<TimeLoop>,
    pub host: HostUse,
    /// Statements of the program that run before the time loop.
    pub prologue: Vec<Stmt>,
    /// Statements of the program that run after the time loop.
    pub epilogue: Vec<Stmt>,
}

impl FunctionalIr {
    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn producers_of(&self, to: usize) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.to == to).collect()
    }

    pub fn consumers_of(&self, from: usize) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.from == from).collect()
    }
}
