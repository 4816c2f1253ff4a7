use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{
    beats_serde, canonical_order, deduce_relations, validate, Beats, EdgeAttrs, EdgeKind, EdgeRecord, GraphMetadata,
    MetricalAttrs, NodeAttrs, NodeId, NodeKind, NodeRecord, ParseGraph, RadicalAttrs, StructAttrs,
};

pub const DOCUMENT_FORMAT: &str = "musicaog-parse-graph";
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    root: NodeId,
    #[serde(default)]
    metadata: GraphMetadata,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: NodeId,
    kind: NodeKind,
    #[serde(with = "beats_serde")]
    t_on: Beats,
    #[serde(with = "beats_serde")]
    t_off: Beats,
    attrs: Value,
    #[serde(default)]
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    kind: EdgeKind,
    src: NodeId,
    dst: NodeId,
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    }
}

fn attrs_from(kind: NodeKind, id: NodeId, v: Value) -> Result<NodeAttrs> {
    let wrap = |e: serde_json::Error| Error::parse(format!("attributes of {id}: {e}"));
    Ok(match kind {
        NodeKind::Radical => NodeAttrs::Radical(serde_json::from_value::<RadicalAttrs>(v).map_err(wrap)?),
        NodeKind::Metrical => NodeAttrs::Metrical(serde_json::from_value::<MetricalAttrs>(v).map_err(wrap)?),
        _ => NodeAttrs::Struct(serde_json::from_value::<StructAttrs>(v).map_err(wrap)?),
    })
}

fn attrs_to(a: &NodeAttrs) -> Value {
    match a {
        NodeAttrs::Struct(s) => serde_json::to_value(s),
        NodeAttrs::Radical(r) => serde_json::to_value(r),
        NodeAttrs::Metrical(m) => serde_json::to_value(m),
    }
    .expect("attributes serialize")
}

impl From<&NodeRecord> for NodeDoc {
    fn from(n: &NodeRecord) -> Self {
        NodeDoc {
            id: n.id,
            kind: n.kind,
            t_on: n.t_on,
            t_off: n.t_off,
            attrs: attrs_to(&n.attrs),
            temperature: n.temperature,
        }
    }
}

/// One node as it appears in the `nodes` array of a document.
pub fn node_value(n: &NodeRecord) -> Value {
    serde_json::to_value(NodeDoc::from(n)).expect("node serializes")
}

/// Parse a document, check it, and rebuild its derived relations. Derived
/// edges present in the file are ignored.
pub fn load_pg(text: &str) -> Result<ParseGraph> {
    let raw: Value = serde_json::from_str(text).map_err(json_error)?;
    let format = raw.get("format").and_then(Value::as_str);
    if format != Some(DOCUMENT_FORMAT) {
        return Err(Error::parse(format!("not a parse-graph document (format {format:?})")));
    }
    let version = raw.get("version").and_then(Value::as_u64);
    if version != Some(u64::from(DOCUMENT_VERSION)) {
        return Err(Error::SchemaVersion {
            found: version.map_or(0, |v| v.min(u64::from(u32::MAX)) as u32),
            expected: DOCUMENT_VERSION,
        });
    }
    // second pass over the text so errors carry positions
    let doc: Document = serde_json::from_str(text).map_err(json_error)?;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        let attrs = attrs_from(n.kind, n.id, n.attrs)?;
        nodes.push(NodeRecord {
            id: n.id,
            kind: n.kind,
            t_on: n.t_on,
            t_off: n.t_off,
            attrs,
            temperature: n.temperature,
        });
    }
    let edges = doc
        .edges
        .into_iter()
        .filter(|e| !e.kind.is_deduced())
        .map(|e| EdgeRecord {
            kind: e.kind,
            src: e.src,
            dst: e.dst,
            attrs: EdgeAttrs::None,
        })
        .collect();
    let mut pg = ParseGraph::from_parts(doc.root, nodes, edges).map_err(|e| Error::parse(e.to_string()))?;
    pg.metadata = doc.metadata;
    let report = validate(&pg);
    if !report.is_empty() {
        return Err(Error::Validation(report));
    }
    let pg = deduce_relations(&pg)?;
    let report = validate(&pg);
    if !report.is_empty() {
        return Err(Error::Validation(report));
    }
    Ok(pg)
}

/// Canonical text of a graph: nodes in content order (independent of ids),
/// rationals reduced, only production and variation edges, sorted by the
/// canonical positions of their endpoints.
pub fn save_pg(pg: &ParseGraph) -> String {
    let order = canonical_order(pg);
    let rank: HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut edges: Vec<&EdgeRecord> = pg.edges().iter().filter(|e| !e.kind.is_deduced()).collect();
    let kind_rank = |e: &EdgeRecord| usize::from(e.kind != EdgeKind::Production);
    edges.sort_by_key(|e| (kind_rank(e), rank.get(&e.src).copied(), rank.get(&e.dst).copied()));
    let doc = Document {
        format: DOCUMENT_FORMAT.into(),
        version: DOCUMENT_VERSION,
        root: pg.root(),
        metadata: pg.metadata.clone(),
        nodes: order
            .iter()
            .map(|id| NodeDoc::from(pg.node(*id).expect("ordered id exists")))
            .collect(),
        edges: edges
            .into_iter()
            .map(|e| EdgeDoc {
                kind: e.kind,
                src: e.src,
                dst: e.dst,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}
