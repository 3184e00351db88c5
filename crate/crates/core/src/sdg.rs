//! Statistical dependency graph.
//!
//! Attribute nodes stand for columns that appear as a determinant or
//! dependent of some rule. A rule with more than one determinant (counting
//! condition literals) gets a logic node that joins its parents; all of its
//! dependents hang off that node. Determinant and condition edges into a logic
//! node have weight 1; the rule's confidence sits on the edge into each
//! dependent attribute.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::rules::{Condition, RuleSet};

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Attribute,
    Logic,
    Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdgNode {
    pub kind: NodeKind,
    /// Attribute name, rule id, or `Attr=Literal`.
    pub label: String,
    #[serde(skip)]
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdgEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: f64,
    /// Rule that contributed the edge.
    pub rule: String,
}

#[derive(Debug, Clone, Default)]
pub struct Sdg {
    nodes: Vec<SdgNode>,
    edges: Vec<SdgEdge>,
    index: HashMap<(NodeKind, String), NodeId>,
    incoming: Vec<Vec<EdgeId>>,
}

impl Sdg {
    fn node(&mut self, kind: NodeKind, label: String, condition: Option<Condition>) -> NodeId {
        if let Some(&id) = self.index.get(&(kind, label.clone())) {
            return id;
        }
        let id = self.nodes.len();
        self.index.insert((kind, label.clone()), id);
        self.nodes.push(SdgNode {
            kind,
            label,
            condition,
        });
        self.incoming.push(Vec::new());
        id
    }

    fn edge(&mut self, from: NodeId, to: NodeId, weight: f64, rule: &str) {
        let id = self.edges.len();
        self.edges.push(SdgEdge {
            from,
            to,
            weight,
            rule: rule.to_string(),
        });
        self.incoming[to].push(id);
    }

    pub fn nodes(&self) -> &[SdgNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SdgEdge] {
        &self.edges
    }

    pub fn node_at(&self, id: NodeId) -> &SdgNode {
        &self.nodes[id]
    }

    pub fn edge_at(&self, id: EdgeId) -> &SdgEdge {
        &self.edges[id]
    }

    pub fn incoming(&self, id: NodeId) -> &[EdgeId] {
        &self.incoming[id]
    }

    pub fn attribute(&self, name: &str) -> Option<NodeId> {
        self.index
            .get(&(NodeKind::Attribute, name.to_string()))
            .copied()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn to_dot(&self) -> String {
        export_dot(self)
    }
}

pub fn build_sdg(ruleset: &RuleSet) -> Sdg {
    let mut g = Sdg::default();
    for rule in &ruleset.rules {
        let lhs: Vec<NodeId> = rule
            .lhs
            .iter()
            .map(|a| g.node(NodeKind::Attribute, a.clone(), None))
            .collect();
        let rhs: Vec<NodeId> = rule
            .rhs
            .iter()
            .map(|a| g.node(NodeKind::Attribute, a.clone(), None))
            .collect();
        let conds: Vec<NodeId> = rule
            .condition
            .iter()
            .map(|c| g.node(NodeKind::Condition, c.label(), Some(c.clone())))
            .collect();

        if lhs.len() + conds.len() >= 2 {
            let logic = g.node(NodeKind::Logic, rule.id.clone(), None);
            for &p in conds.iter().chain(&lhs) {
                g.edge(p, logic, 1.0, &rule.id);
            }
            for (&d, attr) in rhs.iter().zip(&rule.rhs) {
                g.edge(logic, d, ruleset.confidence(&rule.id, attr), &rule.id);
            }
        } else if let Some(&src) = lhs.first() {
            for (&d, attr) in rhs.iter().zip(&rule.rhs) {
                g.edge(src, d, ruleset.confidence(&rule.id, attr), &rule.id);
            }
        }
    }
    g
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(sdg: &Sdg) -> String {
    let mut out = String::from("digraph sdg {\n");
    for (i, n) in sdg.nodes.iter().enumerate() {
        let shape = match n.kind {
            NodeKind::Attribute => "ellipse",
            NodeKind::Logic => "box",
            NodeKind::Condition => "diamond",
        };
        let _ = writeln!(out, "  n{i} [label=\"{}\", shape={shape}];", escape(&n.label));
    }
    for e in &sdg.edges {
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\", rule=\"{}\"];",
            e.from,
            e.to,
            format_weight(e.weight),
            escape(&e.rule)
        );
    }
    out.push_str("}\n");
    out
}

fn format_weight(w: f64) -> String {
    let s = format!("{w:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}
