//! Browser bindings. Each export takes the text of a process file and
//! returns JSON; errors come back as `{"error": "..."}`.

use serde_json::{json, Value};
use tcbisim::{
    bisim, distinguishing_tree, parse, prebisim, Process, ProcessState, RelationKind, Semantics, TransitionKind,
};
use wasm_bindgen::prelude::*;

fn semantics(name: &str) -> Result<Semantics, String> {
    match name {
        "es" | "" => Ok(Semantics::EventStructure),
        "tree-native" => Ok(Semantics::TreeNative),
        other => Err(format!("unknown semantics `{other}`")),
    }
}

fn pair(text: &str, left: &str, right: &str, sem: Semantics) -> Result<(Process, Process), String> {
    let defs = parse(text).map_err(|e| e.to_string())?;
    let get = |name: &str| {
        let t = defs.get(name).ok_or_else(|| format!("no process named `{name}`"))?;
        Process::from_tree(t, sem).map_err(|e| e.to_string())
    };
    Ok((get(left)?, get(right)?))
}

fn witness(w: Option<tcbisim::Witness>) -> Value {
    w.map_or(Value::Null, |w| json!({"kind": w.kind(), "value": w.to_string()}))
}

/// Decide bisimilarity or, with `pre`, the preorder `left <= right`.
pub fn check_json(text: &str, left: &str, right: &str, rel: &str, pre: bool, sem: &str) -> Result<Value, String> {
    let kind: RelationKind = rel.parse()?;
    let sem = semantics(sem)?;
    let (p, q) = pair(text, left, right, sem)?;
    let v = if pre { prebisim(&p, &q, kind) } else { bisim(&p, &q, kind) };
    Ok(json!({
        "left": left,
        "right": right,
        "relation": kind.name(),
        "preorder": pre,
        "related": v.related,
        "witness": witness(v.witness),
        "semantics": sem.name(),
    }))
}

/// A tree below `left` but not below `right`, or null.
pub fn explain_json(text: &str, left: &str, right: &str, rel: &str) -> Result<Value, String> {
    let kind: RelationKind = rel.parse()?;
    let (p, q) = pair(text, left, right, Semantics::EventStructure)?;
    let tree = distinguishing_tree(&p, &q, kind).map_err(|e| e.to_string())?;
    Ok(json!({"tree": tree.map(|t| t.to_string())}))
}

/// Initial transitions of a process with their residual trees.
pub fn transitions_json(text: &str, name: &str, kind: &str) -> Result<Value, String> {
    let kind = match kind {
        "pomset" => TransitionKind::Pomset,
        "step" => TransitionKind::Step,
        "action" => TransitionKind::Action,
        other => return Err(format!("unknown transition kind `{other}`")),
    };
    let defs = parse(text).map_err(|e| e.to_string())?;
    let t = defs.get(name).ok_or_else(|| format!("no process named `{name}`"))?;
    let p = ProcessState::from_tree(t).map_err(|e| e.to_string())?;
    let moves: Vec<Value> = p
        .transitions(kind)
        .into_iter()
        .map(|(u, next)| {
            json!({
                "pomset": u.to_string(),
                "target": next.residual_tree().map(|r| r.to_string()),
            })
        })
        .collect();
    Ok(json!({
        "process": name,
        "events": p.structure().len(),
        "configurations": p.structure().configurations().len(),
        "divergent": p.divergent(),
        "transitions": moves,
    }))
}

fn render(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({"error": e})).to_string()
}

#[wasm_bindgen]
pub fn check(text: &str, left: &str, right: &str, rel: &str, pre: bool, sem: &str) -> String {
    render(check_json(text, left, right, rel, pre, sem))
}

#[wasm_bindgen]
pub fn explain(text: &str, left: &str, right: &str, rel: &str) -> String {
    render(explain_json(text, left, right, rel))
}

#[wasm_bindgen]
pub fn transitions(text: &str, name: &str, kind: &str) -> String {
    render(transitions_json(text, name, kind))
}
