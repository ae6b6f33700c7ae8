//! JSON documents for networks, tasks, assignments and protocol scripts.
//!
//! Tensors are stored sparsely: entries not listed are zero. Writers emit
//! entries in row-major order and maps in key order, so equal values always
//! serialize to equal bytes.

use crate::error::{Error, Result};
use crate::network::Network;
use crate::sim::ProtocolStep;
use crate::task::{ClientSpec, DistributionTask};
use crate::tensor::{next_index, Axis, DenseTensor, Domain, Scalar};
use crate::verify::NodeAssignment;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub index: Vec<usize>,
    pub re: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub im: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn sparse_entries(t: &DenseTensor) -> Vec<Entry> {
    let dims = t.dims();
    let mut idx = vec![0; dims.len()];
    let mut out = Vec::new();
    for z in t.data() {
        if *z != Scalar::new(0.0, 0.0) {
            out.push(Entry {
                index: idx.clone(),
                re: z.re,
                im: z.im,
            });
        }
        next_index(&mut idx, &dims);
    }
    out
}

fn dense_from_entries(axes: Vec<Axis>, entries: &[Entry], domain: Domain) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(axes, Domain::Complex)?;
    for e in entries {
        if t.get(&e.index)? != Scalar::new(0.0, 0.0) {
            return Err(Error::ShapeMismatch(format!("entry {:?} listed twice", e.index)));
        }
        t.set(&e.index, Scalar::new(e.re, e.im))?;
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("tensor entries".into()));
    }
    t.with_domain(domain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDoc {
    pub clients: Vec<ClientSpec>,
    pub domain: Domain,
    pub entries: Vec<Entry>,
}

impl TaskDoc {
    pub fn from_task(task: &DistributionTask) -> Self {
        TaskDoc {
            clients: task.clients().to_vec(),
            domain: task.domain(),
            entries: sparse_entries(task.tensor()),
        }
    }

    pub fn into_task(self) -> Result<DistributionTask> {
        let axes = self.clients.iter().map(|c| Axis::new(c.id.clone(), c.dim)).collect();
        DistributionTask::new(dense_from_entries(axes, &self.entries, self.domain)?, self.domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTensorDoc {
    pub axes: Vec<Axis>,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub domain: Domain,
    pub nodes: BTreeMap<String, NodeTensorDoc>,
}

impl AssignmentDoc {
    pub fn from_assignment(assignment: &NodeAssignment) -> Self {
        AssignmentDoc {
            domain: assignment.domain(),
            nodes: assignment
                .tensors()
                .iter()
                .map(|(k, t)| {
                    (
                        k.clone(),
                        NodeTensorDoc {
                            axes: t.axes().to_vec(),
                            entries: sparse_entries(t),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn into_assignment(self) -> Result<NodeAssignment> {
        let tensors = self
            .nodes
            .into_iter()
            .map(|(k, doc)| Ok((k, dense_from_entries(doc.axes, &doc.entries, self.domain)?)))
            .collect::<Result<_>>()?;
        NodeAssignment::new(tensors, self.domain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDoc {
    pub steps: Vec<ProtocolStep>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn parse_network(json: &str) -> Result<Network> {
    Ok(serde_json::from_str(json)?)
}

pub fn parse_task(json: &str) -> Result<DistributionTask> {
    serde_json::from_str::<TaskDoc>(json)?.into_task()
}

pub fn parse_assignment(json: &str) -> Result<NodeAssignment> {
    serde_json::from_str::<AssignmentDoc>(json)?.into_assignment()
}

pub fn parse_protocol(json: &str) -> Result<Vec<ProtocolStep>> {
    Ok(serde_json::from_str::<ProtocolDoc>(json)?.steps)
}

pub fn read_network(path: &Path) -> Result<Network> {
    read_doc(path)
}

pub fn read_task(path: &Path) -> Result<DistributionTask> {
    read_doc::<TaskDoc>(path)?.into_task()
}

pub fn read_assignment(path: &Path) -> Result<NodeAssignment> {
    read_doc::<AssignmentDoc>(path)?.into_assignment()
}

pub fn read_protocol(path: &Path) -> Result<Vec<ProtocolStep>> {
    Ok(read_doc::<ProtocolDoc>(path)?.steps)
}

pub fn network_json(network: &Network) -> Result<String> {
    to_json(network)
}

pub fn task_json(task: &DistributionTask) -> Result<String> {
    to_json(&TaskDoc::from_task(task))
}

pub fn assignment_json(assignment: &NodeAssignment) -> Result<String> {
    to_json(&AssignmentDoc::from_assignment(assignment))
}

pub fn protocol_json(steps: &[ProtocolStep]) -> Result<String> {
    to_json(&ProtocolDoc { steps: steps.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{canonical_instance, CanonicalInstance};
    use crate::sim::ternary_cross_protocol;
    use crate::task::typewriter_task;
    use crate::verify::{bundled_assignment, BundledAssignment};

    #[test]
    fn round_trips() {
        let net = canonical_instance(CanonicalInstance::Butterfly).unwrap();
        assert_eq!(parse_network(&network_json(&net).unwrap()).unwrap(), net);

        let task = typewriter_task();
        let text = task_json(&task).unwrap();
        assert_eq!(parse_task(&text).unwrap(), task);
        assert_eq!(task_json(&parse_task(&text).unwrap()).unwrap(), text);

        let a = bundled_assignment(BundledAssignment::TernarySquareCross { x: 1 }).unwrap();
        assert_eq!(parse_assignment(&assignment_json(&a).unwrap()).unwrap(), a);

        let steps = ternary_cross_protocol();
        assert_eq!(parse_protocol(&protocol_json(&steps).unwrap()).unwrap(), steps);
    }

    #[test]
    fn rejects_bad_documents() {
        let neg = r#"{"clients":[{"id":"u","dim":2}],"domain":"nonneg","entries":[{"index":[0],"re":-1.0}]}"#;
        assert!(matches!(parse_task(neg), Err(Error::DomainViolation { .. })));
        let out_of_range = r#"{"clients":[{"id":"u","dim":2}],"domain":"complex","entries":[{"index":[2],"re":1.0}]}"#;
        assert!(parse_task(out_of_range).is_err());
        let dup = r#"{"clients":[{"id":"u","dim":2}],"domain":"complex","entries":[{"index":[0],"re":1.0},{"index":[0],"re":2.0}]}"#;
        assert!(parse_task(dup).is_err());
        assert!(matches!(parse_network("{"), Err(Error::Parse(_))));
    }
}
