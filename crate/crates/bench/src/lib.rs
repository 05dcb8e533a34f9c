//! Shared fixtures for the benchmarks.

use fortstream::analysis::{build_ir, FunctionalIr};
use fortstream::eval::EvalConfig;
use fortstream::frontend::ProgramAst;
use fortstream::pipeline::{lower, LowerOptions, PipelineGraph, Variant};
use fortstream::sim::SimOptions;

pub struct Corpus {
    pub prog: ProgramAst,
    pub ir: FunctionalIr,
}

impl Corpus {
    pub fn load() -> Corpus {
        let prog = fortstream::refactor::refactor(&fortstream::sw::corpus::program()).expect("corpus refactors").0;
        let ir = build_ir(&prog).expect("corpus analyses");
        Corpus { prog, ir }
    }

    /// Graph and matching simulator options for an n x n grid run of `nt` steps.
    pub fn lowered(&self, v: Variant, n: i32, nt: i32) -> (PipelineGraph, SimOptions) {
        let params = [("nx", n), ("ny", n), ("nt", nt)];
        let g = lower(&self.ir, v, &LowerOptions::with_params(&params)).expect("corpus lowers");
        (g, SimOptions { eval: EvalConfig::with_params(&params), ..SimOptions::default() })
    }
}
