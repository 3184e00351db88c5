//! Maximum-confidence single-sink graphs and keyword groups.
//!
//! Starting from a missing cell, every dependency into its attribute is
//! followed backwards. Determinants with a present value become sources;
//! missing determinants are expanded recursively through their own best
//! dependency. A logic node needs all of its parents, and a condition node is
//! satisfied only when the tuple carries the literal. The weight of a graph is
//! the product of the confidences of the dependencies it uses.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::rc::Rc;

use serde::Serialize;

use crate::sdg::{EdgeId, NodeId, NodeKind, Sdg};
use crate::tabular::Table;

#[derive(Debug, Clone)]
pub enum Determinant {
    Source {
        node: NodeId,
        attr: String,
        value: String,
    },
    Derived(Rc<Hop>),
}

/// One dependency used to derive `attr`, with its determinants resolved.
#[derive(Debug, Clone)]
pub struct Hop {
    pub attr: String,
    pub node: NodeId,
    pub rule: String,
    /// Edge into `node` carrying the confidence.
    pub edge: EdgeId,
    pub logic: Option<NodeId>,
    /// Structural edges into the logic node.
    pub logic_edges: Vec<EdgeId>,
    /// Satisfied condition nodes with their literal.
    pub conditions: Vec<(NodeId, String)>,
    pub determinants: Vec<Determinant>,
    pub weight: f64,
    /// Tree size counting repeated nodes, used to break ties.
    size: usize,
}

#[derive(Debug, Clone)]
pub struct SingleSinkGraph {
    pub sink: String,
    pub root: Rc<Hop>,
    pub weight: f64,
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<EdgeId>,
}

impl SingleSinkGraph {
    fn from_root(sink: &str, root: Rc<Hop>) -> Self {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        let mut stack = vec![root.clone()];
        while let Some(hop) = stack.pop() {
            nodes.insert(hop.node);
            edges.insert(hop.edge);
            if let Some(l) = hop.logic {
                nodes.insert(l);
            }
            edges.extend(hop.logic_edges.iter().copied());
            nodes.extend(hop.conditions.iter().map(|(n, _)| *n));
            for d in &hop.determinants {
                match d {
                    Determinant::Source { node, .. } => {
                        nodes.insert(*node);
                    }
                    Determinant::Derived(h) => stack.push(h.clone()),
                }
            }
        }
        SingleSinkGraph {
            sink: sink.to_string(),
            weight: root.weight,
            root,
            nodes,
            edges,
        }
    }

    /// Hops in breadth-first order from the sink.
    fn bfs(&self) -> Vec<Rc<Hop>> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([self.root.clone()]);
        while let Some(hop) = queue.pop_front() {
            for d in &hop.determinants {
                if let Determinant::Derived(h) = d {
                    queue.push_back(h.clone());
                }
            }
            out.push(hop);
        }
        out
    }

    /// Source `(attr, value)` pairs in breadth-first discovery order, deduplicated.
    pub fn sources(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for hop in self.bfs() {
            for d in &hop.determinants {
                if let Determinant::Source { attr, value, .. } = d {
                    if !out.iter().any(|(a, _)| a == attr) {
                        out.push((attr.clone(), value.clone()));
                    }
                }
            }
        }
        out
    }

    pub fn condition_literals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for hop in self.bfs() {
            for (_, lit) in &hop.conditions {
                if !out.contains(lit) {
                    out.push(lit.clone());
                }
            }
        }
        out
    }

    /// Sorted attribute names of the graph's attribute nodes.
    pub fn attribute_names(&self, sdg: &Sdg) -> Vec<String> {
        let mut names: Vec<String> = self
            .nodes
            .iter()
            .map(|&n| sdg.node_at(n))
            .filter(|n| n.kind == NodeKind::Attribute)
            .map(|n| n.label.clone())
            .collect();
        names.sort();
        names
    }

    /// Rules used, in breadth-first order.
    pub fn rules(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for hop in self.bfs() {
            if !out.contains(&hop.rule) {
                out.push(hop.rule.clone());
            }
        }
        out
    }

    /// Human-readable edges, e.g. `Arena -> Capacity`.
    pub fn describe(&self, sdg: &Sdg) -> Vec<String> {
        self.edges
            .iter()
            .map(|&e| {
                let e = sdg.edge_at(e);
                format!("{} -> {}", sdg.node_at(e.from).label, sdg.node_at(e.to).label)
            })
            .collect()
    }
}

/// Source values, then condition literals, then the sink attribute name.
pub fn render_keywords(graph: &SingleSinkGraph) -> Vec<String> {
    let mut kw: Vec<String> = graph.sources().into_iter().map(|(_, v)| v).collect();
    for lit in graph.condition_literals() {
        if !kw.contains(&lit) {
            kw.push(lit);
        }
    }
    kw.push(graph.sink.clone());
    kw
}

#[derive(Debug, Clone, Serialize)]
pub struct KeywordGroup {
    pub sink: String,
    pub weight: f64,
    pub keywords: Vec<String>,
    pub rules: Vec<String>,
    pub edges: Vec<String>,
    #[serde(skip)]
    pub graph: SingleSinkGraph,
}

impl KeywordGroup {
    pub fn new(sdg: &Sdg, graph: SingleSinkGraph) -> Self {
        KeywordGroup {
            sink: graph.sink.clone(),
            weight: graph.weight,
            keywords: render_keywords(&graph),
            rules: graph.rules(),
            edges: graph.describe(sdg),
            graph,
        }
    }

    /// Keywords used as distance anchors: everything except the sink name.
    pub fn anchors(&self) -> &[String] {
        &self.keywords[..self.keywords.len() - 1]
    }

    pub fn sources(&self) -> Vec<(String, String)> {
        self.graph.sources()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Visited(Vec<u64>);

impl Visited {
    fn new(n: usize) -> Self {
        Visited(vec![0; n.div_ceil(64).max(1)])
    }
    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
}

struct Search<'a> {
    sdg: &'a Sdg,
    table: &'a Table,
    row: usize,
    visited: Visited,
    memo: HashMap<(NodeId, Visited), Option<Rc<Hop>>>,
}

fn better(a: &Hop, b: &Hop) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then(a.size.cmp(&b.size))
        .then_with(|| a.rule.cmp(&b.rule))
}

impl<'a> Search<'a> {
    fn value(&self, node: NodeId) -> Option<&'a str> {
        self.table.value(self.row, &self.sdg.node_at(node).label)
    }

    /// Best derivation of the missing attribute `node`.
    fn best(&mut self, node: NodeId) -> Option<Rc<Hop>> {
        if self.visited.contains(node) {
            return None;
        }
        let key = (node, self.visited.clone());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        self.visited.insert(node);
        let mut best: Option<Hop> = None;
        for &e in self.sdg.incoming(node) {
            if let Some(hop) = self.expand(node, e) {
                if best.as_ref().is_none_or(|b| better(&hop, b) == Ordering::Less) {
                    best = Some(hop);
                }
            }
        }
        self.visited.remove(node);
        let best = best.map(Rc::new);
        self.memo.insert(key, best.clone());
        best
    }

    /// Resolves a determinant node, recursing when its value is missing.
    fn determinant(&mut self, node: NodeId) -> Option<Determinant> {
        match self.value(node) {
            Some(v) => Some(Determinant::Source {
                node,
                attr: self.sdg.node_at(node).label.clone(),
                value: v.to_string(),
            }),
            None => self.best(node).map(Determinant::Derived),
        }
    }

    /// Follows dependency edge `e` into `node`; the caller has marked `node` visited.
    fn expand(&mut self, node: NodeId, e: EdgeId) -> Option<Hop> {
        let edge = self.sdg.edge_at(e);
        if edge.weight <= 0.0 {
            return None;
        }
        let from = self.sdg.node_at(edge.from);
        let mut hop = Hop {
            attr: self.sdg.node_at(node).label.clone(),
            node,
            rule: edge.rule.clone(),
            edge: e,
            logic: None,
            logic_edges: Vec::new(),
            conditions: Vec::new(),
            determinants: Vec::new(),
            weight: edge.weight,
            size: 1,
        };
        match from.kind {
            NodeKind::Attribute => {
                let d = self.determinant(edge.from)?;
                hop.push(d);
            }
            NodeKind::Logic => {
                hop.logic = Some(edge.from);
                hop.size += 1;
                let parents: Vec<EdgeId> = self.sdg.incoming(edge.from).to_vec();
                for pe in parents {
                    let p = self.sdg.edge_at(pe).from;
                    let pnode = self.sdg.node_at(p);
                    hop.logic_edges.push(pe);
                    match pnode.kind {
                        NodeKind::Condition => {
                            let cond = pnode.condition.as_ref().expect("condition node");
                            let holds = cond.holds(self.table.value(self.row, &cond.attr));
                            if !holds {
                                return None;
                            }
                            hop.conditions.push((p, cond.literal.clone()));
                            hop.size += 1;
                        }
                        _ => {
                            let d = self.determinant(p)?;
                            hop.push(d);
                        }
                    }
                }
            }
            NodeKind::Condition => return None,
        }
        Some(hop)
    }
}

impl Hop {
    fn push(&mut self, d: Determinant) {
        match &d {
            Determinant::Source { .. } => self.size += 1,
            Determinant::Derived(h) => {
                self.weight *= h.weight;
                self.size += h.size;
            }
        }
        self.determinants.push(d);
    }
}

/// One graph per feasible dependency into `sink`, each using the best
/// expansion of its missing determinants.
pub fn enumerate_single_sink_graphs(
    sdg: &Sdg,
    table: &Table,
    row: usize,
    sink: &str,
) -> Vec<SingleSinkGraph> {
    let Some(sink_node) = sdg.attribute(sink) else {
        return Vec::new();
    };
    let mut search = Search {
        sdg,
        table,
        row,
        visited: Visited::new(sdg.nodes().len()),
        memo: HashMap::new(),
    };
    search.visited.insert(sink_node);
    let mut out = Vec::new();
    for &e in sdg.incoming(sink_node) {
        if let Some(hop) = search.expand(sink_node, e) {
            out.push(SingleSinkGraph::from_root(sink, Rc::new(hop)));
        }
    }
    out
}

/// The maximum-weight graph as a keyword group, or `None` when it falls below `threshold`.
///
/// Ties prefer fewer nodes, then the lexicographically smaller sorted
/// attribute-name sequence.
pub fn select_optimal(sdg: &Sdg, graphs: &[SingleSinkGraph], threshold: f64) -> Option<KeywordGroup> {
    let best = graphs.iter().min_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.nodes.len().cmp(&b.nodes.len()))
            .then_with(|| a.attribute_names(sdg).cmp(&b.attribute_names(sdg)))
    })?;
    (best.weight >= threshold).then(|| KeywordGroup::new(sdg, best.clone()))
}
