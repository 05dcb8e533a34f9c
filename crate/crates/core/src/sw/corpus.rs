//! The shallow-water FORTRAN 77 corpus, embedded at build time.

use std::collections::BTreeMap;

use crate::eval::Value;

pub const MAIN: &str = include_str!("../../../../corpus/sw2d/main.f");
pub const DYN: &str = include_str!("../../../../corpus/sw2d/dyn.f");
pub const SHAPIRO: &str = include_str!("../../../../corpus/sw2d/shapiro.f");
pub const UPDATE: &str = include_str!("../../../../corpus/sw2d/update.f");

/// `(path, source)` pairs in link order.
pub fn files() -> [(&'static str, &'static str); 4] {
    [
        ("corpus/sw2d/main.f", MAIN),
        ("corpus/sw2d/dyn.f", DYN),
        ("corpus/sw2d/shapiro.f", SHAPIRO),
        ("corpus/sw2d/update.f", UPDATE),
    ]
}

/// Names of the device-resident arrays and scalars the corpus uses.
pub const STATE_ARRAYS: [&str; 5] = ["eta", "u", "v", "h", "wet"];
pub const SCALARS: [&str; 5] = ["dt", "dx", "g", "eps", "hmin"];

/// Parses and links the shallow-water sources.
pub fn program() -> crate::frontend::ProgramAst {
    let mut units = Vec::new();
    for (path, src) in files() {
        units.extend(crate::frontend::parse_source(src, path).expect("corpus parses"));
    }
    crate::frontend::link(units).expect("corpus links")
}

/// Host overrides that start the corpus from `s` with the physics of `p`,
/// as row-major arrays and scalars to apply after its prologue.
pub fn overrides(
    s: &super::ShallowWaterState,
    p: &super::ModelParams,
) -> (BTreeMap<String, Vec<Value>>, BTreeMap<String, Value>) {
    let real = |f: &[f32]| f.iter().map(|&x| Value::Real(x)).collect();
    let mut arrays: BTreeMap<String, Vec<Value>> = [("eta", &s.eta), ("u", &s.u), ("v", &s.v), ("h", &s.h), ("h0", &s.h0)]
        .into_iter()
        .map(|(n, f)| (n.to_string(), real(f)))
        .collect();
    arrays.insert("wet".into(), s.wet.iter().map(|&w| Value::Int(w)).collect());
    let scalars = [("dt", p.dt), ("dx", p.dx), ("g", p.g), ("eps", p.eps), ("hmin", p.hmin)]
        .into_iter()
        .map(|(n, x)| (n.to_string(), Value::Real(x)))
        .collect();
    (arrays, scalars)
}
