//! Distribution tasks: one tensor axis per client, labeled by client id.
//!
//! Tasks are kept unnormalized. Achievability is always judged up to a
//! nonzero complex scale (quantum) or a strictly positive scale (classical).

use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::{Axis, DenseTensor, Domain, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTask {
    clients: Vec<ClientSpec>,
    tensor: DenseTensor,
    domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetKind {
    /// All-equal strings over `n` clients of dimension `d`.
    Ghz { n: usize, d: usize },
    /// Hamming-weight-one binary strings over `n` clients.
    W { n: usize },
    Custom {
        clients: Vec<ClientSpec>,
        support: Vec<Vec<usize>>,
    },
}

impl DistributionTask {
    /// Wraps a tensor whose axis labels are the client ids.
    pub fn new(tensor: DenseTensor, domain: Domain) -> Result<Self> {
        let tensor = tensor.with_domain(domain)?;
        if tensor.is_zero() {
            return Err(Error::InvalidTask("task tensor is identically zero".into()));
        }
        if tensor.rank() == 0 {
            return Err(Error::InvalidTask("task needs at least one client".into()));
        }
        let clients = tensor
            .axes()
            .iter()
            .map(|a| ClientSpec {
                id: a.label.clone(),
                dim: a.dim,
            })
            .collect();
        Ok(DistributionTask {
            clients,
            tensor,
            domain,
        })
    }

    pub fn clients(&self) -> &[ClientSpec] {
        &self.clients
    }

    pub fn client_ids(&self) -> Vec<&str> {
        self.clients.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Same task with axes reordered to `order`.
    pub fn reordered(&self, order: &[&str]) -> Result<Self> {
        Self::new(self.tensor.permuted(order)?, self.domain)
    }

    /// Checks that the clients are exactly the network's clients with matching
    /// client-edge dimensions.
    pub fn check_against(&self, network: &Network) -> Result<()> {
        let dims = network.client_dims()?;
        let ours: HashSet<&str> = self.client_ids().into_iter().collect();
        let theirs: HashSet<&str> = dims.keys().map(String::as_str).collect();
        if ours != theirs {
            let mut a: Vec<_> = ours.into_iter().collect();
            let mut b: Vec<_> = theirs.into_iter().collect();
            a.sort_unstable();
            b.sort_unstable();
            return Err(Error::InvalidTask(format!(
                "task clients {a:?} differ from network clients {b:?}"
            )));
        }
        for c in &self.clients {
            if dims[&c.id] != c.dim {
                return Err(Error::InvalidTask(format!(
                    "client `{}` has task dim {} but client-edge dim {}",
                    c.id, c.dim, dims[&c.id]
                )));
            }
        }
        Ok(())
    }

    /// Product task over the union of two disjoint client sets.
    pub fn product(&self, other: &DistributionTask) -> Result<Self> {
        Self::new(self.tensor.outer(&other.tensor)?, self.domain.join(other.domain))
    }
}

/// Product of Kronecker deltas, one per client pair.
///
/// Axes are ordered pair by pair. Quantum reading: simultaneous maximally
/// entangled pairs. Classical reading: parallel identity channels.
pub fn cross_pairs_task(pairs: &[(&str, &str)], dims: &[usize], domain: Domain) -> Result<DistributionTask> {
    if pairs.len() != dims.len() {
        return Err(Error::InvalidTask(format!(
            "{} pairs but {} dimensions",
            pairs.len(),
            dims.len()
        )));
    }
    let mut seen = HashSet::new();
    let mut axes = Vec::new();
    for ((a, b), &d) in pairs.iter().zip(dims) {
        for c in [a, b] {
            if !seen.insert(*c) {
                return Err(Error::InvalidTask(format!("client `{c}` is in two pairs")));
            }
        }
        if d == 0 {
            return Err(Error::InvalidTask("pair dimension must be positive".into()));
        }
        axes.push(Axis::new(*a, d));
        axes.push(Axis::new(*b, d));
    }
    let tensor = DenseTensor::from_fn(axes, domain, |idx| {
        let hit = idx.chunks(2).all(|p| p[0] == p[1]);
        Scalar::new(if hit { 1.0 } else { 0.0 }, 0.0)
    })?;
    DistributionTask::new(tensor, domain)
}

/// Cross-pair task whose pairs have different per-client dims; used to report
/// the dim-mismatch error of the builder contract.
pub fn cross_pairs_task_with_client_dims(
    pairs: &[((&str, usize), (&str, usize))],
    domain: Domain,
) -> Result<DistributionTask> {
    let mut names = Vec::new();
    let mut dims = Vec::new();
    for ((a, da), (b, db)) in pairs {
        if da != db {
            return Err(Error::InvalidTask(format!(
                "paired clients `{a}` (dim {da}) and `{b}` (dim {db}) differ in dimension"
            )));
        }
        names.push((*a, *b));
        dims.push(*da);
    }
    cross_pairs_task(&names, &dims, domain)
}

/// 0/1 tensor supported on a set of client strings.
pub fn subset_state_task(kind: &SubsetKind, domain: Domain) -> Result<DistributionTask> {
    let (clients, support): (Vec<ClientSpec>, Vec<Vec<usize>>) = match kind {
        SubsetKind::Ghz { n, d } => {
            if *n < 2 || *d < 2 {
                return Err(Error::InvalidParameter(format!("GHZ needs n, d >= 2, got ({n}, {d})")));
            }
            (default_clients(*n, *d), (0..*d).map(|v| vec![v; *n]).collect())
        }
        SubsetKind::W { n } => {
            if *n < 2 {
                return Err(Error::InvalidParameter(format!("W needs n >= 2, got {n}")));
            }
            let support = (0..*n)
                .map(|k| (0..*n).map(|j| usize::from(j == k)).collect())
                .collect();
            (default_clients(*n, 2), support)
        }
        SubsetKind::Custom { clients, support } => (clients.clone(), support.clone()),
    };
    if support.is_empty() {
        return Err(Error::InvalidTask("empty support".into()));
    }
    let axes: Vec<Axis> = clients.iter().map(|c| Axis::new(c.id.clone(), c.dim)).collect();
    let mut tensor = DenseTensor::zeros(axes, domain)?;
    for s in &support {
        tensor.set(s, Scalar::new(1.0, 0.0))?;
    }
    DistributionTask::new(tensor, domain)
}

/// Client ids `c0, c1, …`, matching the star instance.
fn default_clients(n: usize, d: usize) -> Vec<ClientSpec> {
    (0..n)
        .map(|k| ClientSpec {
            id: format!("c{k}"),
            dim: d,
        })
        .collect()
}

/// The 4-letter noisy-typewriter matrix, unnormalized, on clients `u` (rows)
/// and `v` (columns).
pub fn typewriter_matrix() -> DenseTensor {
    DenseTensor::matrix(
        "u",
        "v",
        &[
            vec![1., 1., 0., 0.],
            vec![0., 1., 1., 0.],
            vec![0., 0., 1., 1.],
            vec![1., 0., 0., 1.],
        ],
        Domain::NonNegative,
    )
    .expect("constant matrix is well formed")
}

pub fn typewriter_task() -> DistributionTask {
    DistributionTask::new(typewriter_matrix(), Domain::NonNegative).expect("typewriter is nonzero")
}

/// Two-client task from a matrix; axis labels become client ids.
pub fn task_from_matrix(m: &DenseTensor, domain: Domain) -> Result<DistributionTask> {
    if m.rank() != 2 {
        return Err(Error::InvalidTask(format!("expected a matrix, got rank {}", m.rank())));
    }
    DistributionTask::new(m.clone(), domain)
}
