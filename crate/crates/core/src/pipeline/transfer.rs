//! Host-device transfer schedule.

use std::collections::{BTreeMap, BTreeSet};

use super::graph::TransferSchedule;
use crate::analysis::{FunctionalIr, NodeKind};
use crate::frontend::BaseType;

/// Device arrays some kernel reads before anything in the step wrote them.
pub fn device_exposed_reads(ir: &FunctionalIr) -> BTreeSet<String> {
    let mut written = BTreeSet::new();
    let mut exposed = BTreeSet::new();
    for n in &ir.nodes {
        if let NodeKind::Seq(_) = n.kind {
            written.extend(n.writes());
            continue;
        }
        for s in n.inputs() {
            if !written.contains(&s.array) {
                exposed.insert(s.array.clone());
            }
        }
        written.extend(n.writes());
    }
    exposed
}

pub fn minimize_transfers(ir: &FunctionalIr, device: &BTreeMap<String, BaseType>) -> TransferSchedule {
    let exposed = device_exposed_reads(ir);
    let device_written: BTreeSet<String> = ir
        .nodes
        .iter()
        .filter(|n| !matches!(n.kind, NodeKind::Seq(_)))
        .flat_map(|n| n.writes())
        .collect();
    let mut t = TransferSchedule::default();
    for a in device.keys() {
        if ir.host.writes_inside.contains(a) {
            t.per_step_to_device.insert(a.clone());
        } else if exposed.contains(a) {
            t.once_to_device.insert(a.clone());
        }
        if device_written.contains(a) {
            if ir.host.reads_inside.contains(a) {
                t.per_step_to_host.insert(a.clone());
            } else if ir.host.reads_after.contains(a) {
                t.once_to_host.insert(a.clone());
            }
        }
    }
    t
}
