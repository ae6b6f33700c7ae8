//! Weighted undirected network graphs with leaf clients.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub client: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub dim: usize,
    pub label: String,
}

impl Edge {
    pub fn touches(&self, node: &str) -> bool {
        self.a == node || self.b == node
    }

    /// The endpoint opposite `node`.
    pub fn other(&self, node: &str) -> Option<&str> {
        if self.a == node {
            Some(&self.b)
        } else if self.b == node {
            Some(&self.a)
        } else {
            None
        }
    }
}

/// Network graph. Parallel edges are allowed as long as labels differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ClientNotLeaf { node: String, degree: usize },
    LeafNotClient { node: String },
    SelfLoop { label: String },
    DuplicateEdgeLabel { label: String },
    DuplicateNode { node: String },
    UnknownEndpoint { label: String, node: String },
    EdgeDimTooSmall { label: String, dim: usize },
    NoClients,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ClientNotLeaf { node, degree } => {
                write!(f, "client not a leaf: `{node}` has degree {degree}")
            }
            Violation::LeafNotClient { node } => write!(f, "leaf not a client: `{node}`"),
            Violation::SelfLoop { label } => write!(f, "self-loop on edge `{label}`"),
            Violation::DuplicateEdgeLabel { label } => write!(f, "duplicate edge label `{label}`"),
            Violation::DuplicateNode { node } => write!(f, "duplicate node id `{node}`"),
            Violation::UnknownEndpoint { label, node } => {
                write!(f, "edge `{label}` references unknown node `{node}`")
            }
            Violation::EdgeDimTooSmall { label, dim } => {
                write!(f, "edge `{label}` has dimension {dim} < 2")
            }
            Violation::NoClients => f.write_str("network has no clients"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Network {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Self {
        Network { nodes, edges }
    }

    /// Checks the structural invariants; violations are returned, not raised.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                report.violations.push(Violation::DuplicateNode { node: n.id.clone() });
            }
        }
        let mut labels = HashSet::new();
        for e in &self.edges {
            if !labels.insert(e.label.as_str()) {
                report
                    .violations
                    .push(Violation::DuplicateEdgeLabel { label: e.label.clone() });
            }
            if e.a == e.b {
                report.violations.push(Violation::SelfLoop { label: e.label.clone() });
            }
            for end in [&e.a, &e.b] {
                if !ids.contains(end.as_str()) {
                    report.violations.push(Violation::UnknownEndpoint {
                        label: e.label.clone(),
                        node: end.clone(),
                    });
                }
            }
            if e.dim < 2 {
                report.violations.push(Violation::EdgeDimTooSmall {
                    label: e.label.clone(),
                    dim: e.dim,
                });
            }
        }
        for n in &self.nodes {
            let degree = self.degree(&n.id);
            if n.client && degree != 1 {
                report.violations.push(Violation::ClientNotLeaf {
                    node: n.id.clone(),
                    degree,
                });
            }
            if !n.client && degree == 1 {
                report.violations.push(Violation::LeafNotClient { node: n.id.clone() });
            }
        }
        if !self.nodes.iter().any(|n| n.client) {
            report.violations.push(Violation::NoClients);
        }
        let components = self.components(None);
        if components.len() > 1 {
            report
                .warnings
                .push(format!("network is disconnected ({} components)", components.len()));
        }
        report
    }

    /// Validation as a hard error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
            Err(Error::InvalidNetwork(msgs.join("; ")))
        }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edge(&self, label: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.label == label)
    }

    pub fn degree(&self, id: &str) -> usize {
        self.edges.iter().filter(|e| e.touches(id)).count()
    }

    pub fn clients(&self) -> Vec<&str> {
        self.nodes.iter().filter(|n| n.client).map(|n| n.id.as_str()).collect()
    }

    pub fn internal_nodes(&self) -> Vec<&str> {
        self.nodes.iter().filter(|n| !n.client).map(|n| n.id.as_str()).collect()
    }

    pub fn is_client(&self, id: &str) -> bool {
        self.node(id).is_some_and(|n| n.client)
    }

    pub fn incident_edges(&self, id: &str) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.touches(id)).collect()
    }

    /// The unique edge of a client leaf.
    pub fn client_edge(&self, client: &str) -> Result<&Edge> {
        let edges = self.incident_edges(client);
        match (self.is_client(client), edges.as_slice()) {
            (true, [e]) => Ok(e),
            _ => Err(Error::InvalidNetwork(format!("`{client}` is not a leaf client"))),
        }
    }

    /// Connected components (as sorted node-id sets), optionally ignoring one edge.
    pub fn components(&self, without_edge: Option<&str>) -> Vec<BTreeSet<String>> {
        let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
        for n in &self.nodes {
            adjacency.entry(&n.id).or_default();
        }
        for e in &self.edges {
            if Some(e.label.as_str()) == without_edge {
                continue;
            }
            adjacency.entry(&e.a).or_default().push(&e.b);
            adjacency.entry(&e.b).or_default().push(&e.a);
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for n in &self.nodes {
            if seen.contains(n.id.as_str()) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([n.id.as_str()]);
            seen.insert(n.id.as_str());
            while let Some(v) = queue.pop_front() {
                comp.insert(v.to_string());
                for w in adjacency.get(v).into_iter().flatten() {
                    if seen.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn connected_without(&self, edge_label: &str, u: &str, v: &str) -> bool {
        self.components(Some(edge_label))
            .iter()
            .any(|c| c.contains(u) && c.contains(v))
    }

    /// Disjoint union; fails if node ids or edge labels collide.
    pub fn disjoint_union(&self, other: &Network) -> Result<Network> {
        let ids: HashSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        if let Some(n) = other.nodes.iter().find(|n| ids.contains(n.id.as_str())) {
            return Err(Error::InvalidNetwork(format!("node `{}` in both networks", n.id)));
        }
        let labels: HashSet<&str> = self.edges.iter().map(|e| e.label.as_str()).collect();
        if let Some(e) = other.edges.iter().find(|e| labels.contains(e.label.as_str())) {
            return Err(Error::InvalidNetwork(format!("edge `{}` in both networks", e.label)));
        }
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.iter().cloned());
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().cloned());
        Ok(Network { nodes, edges })
    }

    /// Client id → client-edge dimension.
    pub fn client_dims(&self) -> Result<BTreeMap<String, usize>> {
        self.clients()
            .into_iter()
            .map(|c| Ok((c.to_string(), self.client_edge(c)?.dim)))
            .collect()
    }
}

/// The named instances used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalInstance {
    /// Clients `u`, `v` joined by a single edge.
    SingleEdge { dim: usize },
    /// A single `inner`-dimensional channel between internal nodes `U`, `V`,
    /// each carrying a formal client leaf (`u`, `v`) of the given dims.
    Channel { left: usize, inner: usize, right: usize },
    Butterfly,
    Square { internal: usize, client: usize },
    TernarySquare,
    Star { n: usize, dim: usize },
}

fn node(id: &str, client: bool) -> Node {
    Node {
        id: id.to_string(),
        client,
    }
}

fn edge(a: &str, b: &str, dim: usize) -> Edge {
    Edge {
        a: a.to_string(),
        b: b.to_string(),
        dim,
        label: format!("{a}-{b}"),
    }
}

fn check_dim(name: &str, d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidParameter(format!("{name} must be at least 2, got {d}")))
    } else {
        Ok(())
    }
}

pub fn canonical_instance(which: CanonicalInstance) -> Result<Network> {
    use CanonicalInstance::*;
    let net = match which {
        SingleEdge { dim } => {
            check_dim("dim", dim)?;
            Network::new(vec![node("u", true), node("v", true)], vec![edge("u", "v", dim)])
        }
        Channel { left, inner, right } => {
            check_dim("left", left)?;
            check_dim("right", right)?;
            if inner == 0 {
                return Err(Error::InvalidParameter("inner dimension must be positive".into()));
            }
            Network::new(
                vec![node("u", true), node("U", false), node("V", false), node("v", true)],
                vec![edge("u", "U", left), edge("U", "V", inner), edge("V", "v", right)],
            )
        }
        Butterfly => Network::new(
            vec![
                node("S1", true),
                node("S2", true),
                node("A1", false),
                node("A2", false),
                node("B", false),
                node("C", false),
                node("D1", false),
                node("D2", false),
                node("T1", true),
                node("T2", true),
            ],
            vec![
                edge("S1", "A1", 2),
                edge("S2", "A2", 2),
                edge("A1", "B", 2),
                edge("A2", "B", 2),
                edge("B", "C", 2),
                edge("C", "D1", 2),
                edge("C", "D2", 2),
                edge("A1", "D2", 2),
                edge("A2", "D1", 2),
                edge("D1", "T1", 2),
                edge("D2", "T2", 2),
            ],
        ),
        Square { internal, client } => {
            check_dim("internal dimension", internal)?;
            check_dim("client dimension", client)?;
            square_like(
                &[("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")],
                internal,
                client,
            )
        }
        TernarySquare => square_like(&[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")], 3, 2),
        Star { n, dim } => {
            if n < 2 {
                return Err(Error::InvalidParameter(format!("star needs n >= 2, got {n}")));
            }
            check_dim("dim", dim)?;
            let mut nodes = vec![node("O", false)];
            let mut edges = Vec::new();
            for k in 0..n {
                let c = format!("c{k}");
                nodes.push(node(&c, true));
                edges.push(edge("O", &c, dim));
            }
            Network::new(nodes, edges)
        }
    };
    debug_assert!(net.validate().is_ok());
    Ok(net)
}

fn square_like(internal_edges: &[(&str, &str)], internal: usize, client: usize) -> Network {
    let corners = ["A", "B", "C", "D"];
    let mut nodes: Vec<Node> = corners.iter().map(|c| node(c, false)).collect();
    let mut edges: Vec<Edge> = internal_edges.iter().map(|(a, b)| edge(a, b, internal)).collect();
    for c in corners {
        let leaf = c.to_lowercase();
        nodes.push(node(&leaf, true));
        edges.push(edge(&leaf, c, client));
    }
    Network::new(nodes, edges)
}

impl fmt::Display for CanonicalInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CanonicalInstance::*;
        match self {
            SingleEdge { dim } => write!(f, "single-edge:{dim}"),
            Channel { left, inner, right } => write!(f, "channel:{left},{inner},{right}"),
            Butterfly => f.write_str("butterfly"),
            Square { internal, client } => write!(f, "square:{internal},{client}"),
            TernarySquare => f.write_str("ternary-square"),
            Star { n, dim } => write!(f, "star:{n},{dim}"),
        }
    }
}

fn parse_params(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParameter(format!("bad integer `{p}`")))
        })
        .collect()
}

impl FromStr for CanonicalInstance {
    type Err = Error;

    /// Parses names like `butterfly`, `square:2,2`, `star:3,2`, `channel:4,3,4`.
    fn from_str(s: &str) -> Result<Self> {
        use CanonicalInstance::*;
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, parse_params(p)?),
            None => (s, Vec::new()),
        };
        match (name, params.as_slice()) {
            ("single-edge", [d]) => Ok(SingleEdge { dim: *d }),
            ("channel", [l, i, r]) => Ok(Channel {
                left: *l,
                inner: *i,
                right: *r,
            }),
            ("butterfly", []) => Ok(Butterfly),
            ("square", [i, c]) => Ok(Square {
                internal: *i,
                client: *c,
            }),
            ("ternary-square", []) => Ok(TernarySquare),
            ("star", [n, d]) => Ok(Star { n: *n, dim: *d }),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}
