//! Node assignments and the factorization check.
//!
//! An assignment gives every internal node a tensor with one axis per incident
//! edge. Contracting all node tensors along internal edges leaves one free axis
//! per client; the assignment realizes a task when that tensor is an admissible
//! multiple of the task tensor.

use crate::error::{Error, Result};
use crate::network::{canonical_instance, CanonicalInstance, Network};
use crate::task::DistributionTask;
use crate::tensor::{contract, fit_scale, Axis, ContractionPlan, DenseTensor, Domain, Scalar};
use std::collections::{BTreeMap, HashSet};

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAssignment {
    tensors: BTreeMap<String, DenseTensor>,
    domain: Domain,
}

/// Axes of a node tensor: one per incident edge, in network edge order.
pub fn node_axes(network: &Network, node: &str) -> Vec<Axis> {
    network
        .incident_edges(node)
        .into_iter()
        .map(|e| Axis::new(e.label.clone(), e.dim))
        .collect()
}

impl NodeAssignment {
    /// Tags every tensor with `domain`; fails on entries outside it.
    pub fn new(tensors: BTreeMap<String, DenseTensor>, domain: Domain) -> Result<Self> {
        let tensors = tensors
            .into_iter()
            .map(|(k, t)| Ok((k, t.with_domain(domain)?)))
            .collect::<Result<_>>()?;
        Ok(NodeAssignment { tensors, domain })
    }

    /// Assignment filled node by node from `f(node, multi-index)`.
    pub fn from_fn<F>(network: &Network, domain: Domain, mut f: F) -> Result<Self>
    where
        F: FnMut(&str, &[usize]) -> Scalar,
    {
        let mut tensors = BTreeMap::new();
        for v in network.internal_nodes() {
            let t = DenseTensor::from_fn(node_axes(network, v), domain, |idx| f(v, idx))?;
            tensors.insert(v.to_string(), t);
        }
        Self::new(tensors, domain)
    }

    pub fn zeros(network: &Network, domain: Domain) -> Result<Self> {
        Self::from_fn(network, domain, |_, _| Scalar::new(0.0, 0.0))
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn get(&self, node: &str) -> Option<&DenseTensor> {
        self.tensors.get(node)
    }

    pub fn tensors(&self) -> &BTreeMap<String, DenseTensor> {
        &self.tensors
    }

    pub fn into_tensors(self) -> BTreeMap<String, DenseTensor> {
        self.tensors
    }

    /// Checks that each internal node has exactly one tensor whose axes are
    /// its incident edges, and clients have none.
    pub fn check_against(&self, network: &Network) -> Result<()> {
        let internal: HashSet<&str> = network.internal_nodes().into_iter().collect();
        for node in self.tensors.keys() {
            if !internal.contains(node.as_str()) {
                return Err(Error::StructureMismatch(format!(
                    "`{node}` is not an internal node of the network"
                )));
            }
        }
        for v in &internal {
            let t = self
                .tensors
                .get(*v)
                .ok_or_else(|| Error::StructureMismatch(format!("no tensor for node `{v}`")))?;
            let expected = node_axes(network, v);
            if t.rank() != expected.len() {
                return Err(Error::StructureMismatch(format!(
                    "node `{v}` tensor has {} axes, node has {} incident edges",
                    t.rank(),
                    expected.len()
                )));
            }
            for axis in &expected {
                match t.dim_of(&axis.label) {
                    Some(d) if d == axis.dim => {}
                    Some(d) => {
                        return Err(Error::StructureMismatch(format!(
                            "node `{v}` axis `{}` has dim {d}, edge has dim {}",
                            axis.label, axis.dim
                        )))
                    }
                    None => {
                        return Err(Error::StructureMismatch(format!(
                            "node `{v}` tensor lacks axis for edge `{}`",
                            axis.label
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Assignment on a disjoint union of networks.
    pub fn union(&self, other: &NodeAssignment) -> Result<NodeAssignment> {
        let mut tensors = self.tensors.clone();
        for (k, t) in &other.tensors {
            if tensors.insert(k.clone(), t.clone()).is_some() {
                return Err(Error::StructureMismatch(format!("node `{k}` in both assignments")));
            }
        }
        Self::new(tensors, self.domain.join(other.domain))
    }
}

fn edge_tag(label: &str) -> String {
    format!("e:{label}")
}

fn client_tag(id: &str) -> String {
    format!("c:{id}")
}

/// Contracts the assignment along internal edges. The result has one axis per
/// client, labeled by client id, in network client order.
///
/// Edges joining two clients directly contribute a Kronecker delta.
pub fn realized_tensor(network: &Network, assignment: &NodeAssignment) -> Result<DenseTensor> {
    assignment.check_against(network)?;
    let mut parts = Vec::new();
    for (node, t) in assignment.tensors() {
        let mut tagged = t.clone();
        for e in network.incident_edges(node) {
            let other = e.other(node).expect("incident");
            let tag = if network.is_client(other) {
                client_tag(other)
            } else {
                edge_tag(&e.label)
            };
            tagged = tagged.relabel(&e.label, &tag)?;
        }
        parts.push(tagged);
    }
    for e in &network.edges {
        if network.is_client(&e.a) && network.is_client(&e.b) {
            let (ta, tb) = (client_tag(&e.a), client_tag(&e.b));
            parts.push(DenseTensor::delta(&[&ta, &tb], e.dim)?);
        }
    }
    let clients = network.clients();
    let free: Vec<String> = clients.iter().map(|c| client_tag(c)).collect();
    let free_refs: Vec<&str> = free.iter().map(String::as_str).collect();
    let plan = ContractionPlan::new(parts.iter().collect(), &free_refs)?;
    let mut out = contract(&plan)?;
    for c in clients {
        out = out.relabel(&client_tag(c), c)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub matched: bool,
    pub scale: Scalar,
    pub residual: f64,
    pub domain_violations: Vec<String>,
    pub realized: DenseTensor,
}

/// Decides whether `assignment` realizes `task` on `network` up to an
/// admissible scale, within relative residual `tol`.
pub fn verify_assignment(
    network: &Network,
    task: &DistributionTask,
    assignment: &NodeAssignment,
    tol: f64,
) -> Result<VerifyReport> {
    network.ensure_valid()?;
    task.check_against(network)?;
    let realized = realized_tensor(network, assignment)?;
    let fit = fit_scale(&realized, task.tensor(), task.domain())?;
    let mut domain_violations = Vec::new();
    if task.domain() == Domain::NonNegative {
        for (node, t) in assignment.tensors() {
            for (idx, z) in t.nonnegativity_violations() {
                domain_violations.push(format!("node {node} entry {idx:?} = {z}"));
            }
        }
    }
    Ok(VerifyReport {
        matched: fit.matched(tol) && domain_violations.is_empty(),
        scale: fit.scale,
        residual: fit.residual,
        domain_violations,
        realized,
    })
}

/// Re-tags a non-negative assignment as complex: every factorization over the
/// non-negative reals is also one over the complex numbers.
pub fn lift_classical_assignment(assignment: &NodeAssignment) -> Result<NodeAssignment> {
    if assignment.domain() != Domain::NonNegative {
        return Err(Error::StructureMismatch(
            "only non-negative assignments can be lifted".into(),
        ));
    }
    NodeAssignment::new(assignment.tensors.clone(), Domain::Complex)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundledAssignment {
    /// Copy at A1, A2, C; parity at B, D1, D2.
    ButterflyXor,
    /// Generalized delta at the center of `star(n, d)`.
    StarGhz { n: usize, d: usize },
    /// Node tensors of the ternary-square protocol for measurement outcome `x`.
    TernarySquareCross { x: u8 },
}

impl BundledAssignment {
    pub fn network(self) -> Result<Network> {
        match self {
            BundledAssignment::ButterflyXor => canonical_instance(CanonicalInstance::Butterfly),
            BundledAssignment::StarGhz { n, d } => canonical_instance(CanonicalInstance::Star { n, dim: d }),
            BundledAssignment::TernarySquareCross { .. } => {
                canonical_instance(CanonicalInstance::TernarySquare)
            }
        }
    }
}

fn indicator(hit: bool) -> Scalar {
    Scalar::new(if hit { 1.0 } else { 0.0 }, 0.0)
}

fn sparse_tensor(axes: Vec<Axis>, entries: &[(&[usize], f64)], domain: Domain) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(axes, domain)?;
    for (idx, v) in entries {
        t.set(idx, Scalar::new(*v, 0.0))?;
    }
    Ok(t)
}

pub fn bundled_assignment(which: BundledAssignment) -> Result<NodeAssignment> {
    let network = which.network()?;
    match which {
        BundledAssignment::ButterflyXor => NodeAssignment::from_fn(&network, Domain::NonNegative, |node, idx| {
            match node {
                "A1" | "A2" | "C" => indicator(idx.windows(2).all(|w| w[0] == w[1])),
                _ => indicator(idx.iter().sum::<usize>() % 2 == 0),
            }
        }),
        BundledAssignment::StarGhz { .. } => NodeAssignment::from_fn(&network, Domain::NonNegative, |_, idx| {
            indicator(idx.windows(2).all(|w| w[0] == w[1]))
        }),
        BundledAssignment::TernarySquareCross { x } => {
            if x > 1 {
                return Err(Error::InvalidParameter(format!("outcome bit must be 0 or 1, got {x}")));
            }
            let sign = if x == 0 { 1.0 } else { -1.0 };
            let ax = |c: &str, l1: &str, l2: &str| {
                vec![Axis::new(c, 2), Axis::new(l1, 3), Axis::new(l2, 3)]
            };
            let d = Domain::Complex;
            let mut tensors = BTreeMap::new();
            tensors.insert(
                "A".to_string(),
                sparse_tensor(
                    ax("a-A", "A-B", "A-C"),
                    &[(&[0, 0, 2], 1.0), (&[0, 2, 0], 1.0), (&[1, 1, 2], 1.0), (&[1, 2, 1], 1.0)],
                    d,
                )?,
            );
            tensors.insert(
                "B".to_string(),
                sparse_tensor(
                    ax("b-B", "A-B", "B-D"),
                    &[(&[0, 0, 0], 1.0), (&[0, 1, 1], 1.0), (&[1, 2, 2], 1.0)],
                    d,
                )?,
            );
            tensors.insert(
                "C".to_string(),
                sparse_tensor(
                    ax("c-C", "A-C", "C-D"),
                    &[(&[1, 0, 0], 1.0), (&[1, 1, 1], 1.0), (&[0, 2, 2], 1.0)],
                    d,
                )?,
            );
            tensors.insert(
                "D".to_string(),
                sparse_tensor(
                    ax("d-D", "B-D", "C-D"),
                    &[(&[0, 0, 2], 1.0), (&[1, 1, 2], 1.0), (&[0, 2, 0], sign), (&[1, 2, 1], sign)],
                    d,
                )?,
            );
            NodeAssignment::new(tensors, d)
        }
    }
}
