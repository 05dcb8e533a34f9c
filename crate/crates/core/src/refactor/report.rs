use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::intent::IntentMap;
use crate::frontend::BaseType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplicitDecl {
    pub unit: String,
    pub name: String,
    #[serde(rename = "type")]
    pub ty: BaseType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedVar {
    pub unit: String,
    pub block: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenamedVar {
    pub unit: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefactorReport {
    pub implicit_decls_added: usize,
    pub implicit_decls: Vec<ImplicitDecl>,
    /// unit -> argument -> intent
    pub intents_inferred: IntentMap,
    /// block -> unit -> promoted arguments, in argument order
    pub common_vars_promoted: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub common_vars_dropped: Vec<DroppedVar>,
    pub renamed: Vec<RenamedVar>,
    pub loops_normalized: usize,
    pub modules: Vec<String>,
}

impl RefactorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
