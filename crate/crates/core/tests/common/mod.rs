#![allow(dead_code)]

use netfactor::network::{Edge, Node};
use netfactor::tensor::{Axis, DenseTensor, Domain, Scalar};
use netfactor::verify::{node_axes, NodeAssignment};
use netfactor::Network;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected network: a random tree on 1–`max_internal` internal
/// nodes, optionally one extra edge closing a cycle, and clients attached so
/// that every internal node has degree at least 2, sometimes plus a separate
/// client pair joined by one edge. Edge dims are 2 or 3.
pub fn random_network(rng: &mut ChaCha8Rng, max_internal: usize, allow_cycle: bool) -> Network {
    let k = rng.random_range(1..=max_internal);
    let mut nodes: Vec<Node> = (0..k)
        .map(|i| Node {
            id: format!("n{i}"),
            client: false,
        })
        .collect();
    let mut edges = Vec::new();
    let mut degree = vec![0usize; k];
    let add = |edges: &mut Vec<Edge>, a: String, b: String, dim: usize| {
        let label = format!("e{}", edges.len());
        edges.push(Edge { a, b, dim, label });
    };
    for i in 1..k {
        let j = rng.random_range(0..i);
        add(&mut edges, format!("n{j}"), format!("n{i}"), rng.random_range(2..=3));
        degree[i] += 1;
        degree[j] += 1;
    }
    if allow_cycle && k >= 3 && rng.random_bool(0.5) {
        let a = rng.random_range(0..k);
        let b = (a + 1 + rng.random_range(0..k - 1)) % k;
        add(&mut edges, format!("n{a}"), format!("n{b}"), 2);
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut clients = 0;
    for i in 0..k {
        let extra = rng.random_range(0..=1);
        let mut want = 2usize.saturating_sub(degree[i]).max(extra);
        if i + 1 == k && clients == 0 {
            want = want.max(1);
        }
        for _ in 0..want {
            let id = format!("c{clients}");
            clients += 1;
            nodes.push(Node {
                id: id.clone(),
                client: true,
            });
            add(&mut edges, format!("n{i}"), id, rng.random_range(2..=3));
        }
    }
    // a separate pair of clients joined directly
    if rng.random_bool(0.2) {
        let (x, y) = (format!("c{clients}"), format!("c{}", clients + 1));
        for id in [&x, &y] {
            nodes.push(Node {
                id: id.clone(),
                client: true,
            });
        }
        add(&mut edges, x, y, rng.random_range(2..=3));
    }
    let net = Network::new(nodes, edges);
    net.ensure_valid().expect("generator builds valid networks");
    net
}

pub fn random_scalar(rng: &mut ChaCha8Rng, domain: Domain) -> Scalar {
    match domain {
        Domain::Complex => Scalar::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        Domain::NonNegative => Scalar::new(rng.random_range(0.0..1.0), 0.0),
    }
}

pub fn random_assignment(rng: &mut ChaCha8Rng, network: &Network, domain: Domain) -> NodeAssignment {
    NodeAssignment::from_fn(network, domain, |_, _| random_scalar(rng, domain)).unwrap()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, axes: Vec<Axis>, domain: Domain) -> DenseTensor {
    DenseTensor::from_fn(axes, domain, |_| random_scalar(rng, domain)).unwrap()
}

/// Brute-force contraction: enumerates every joint value of all labels and
/// sums the products of entries, keeping `free` as output axes in that order.
pub fn naive_contract(tensors: &[&DenseTensor], free: &[&str]) -> DenseTensor {
    let mut dims: BTreeMap<String, usize> = BTreeMap::new();
    for t in tensors {
        for a in t.axes() {
            dims.insert(a.label.clone(), a.dim);
        }
    }
    let labels: Vec<String> = dims.keys().cloned().collect();
    let sizes: Vec<usize> = labels.iter().map(|l| dims[l]).collect();
    let out_axes: Vec<Axis> = free.iter().map(|l| Axis::new(*l, dims[*l])).collect();
    let mut out = DenseTensor::zeros(out_axes, Domain::Complex).unwrap();
    let total: usize = sizes.iter().product();
    let mut value = vec![0usize; labels.len()];
    for _ in 0..total {
        let lookup = |l: &str| value[labels.iter().position(|x| x == l).unwrap()];
        let mut prod = Scalar::new(1.0, 0.0);
        for t in tensors {
            let idx: Vec<usize> = t.labels().iter().map(|l| lookup(l)).collect();
            prod *= t.get(&idx).unwrap();
        }
        let out_idx: Vec<usize> = free.iter().map(|l| lookup(l)).collect();
        let cur = out.get(&out_idx).unwrap();
        out.set(&out_idx, cur + prod).unwrap();
        for k in (0..value.len()).rev() {
            value[k] += 1;
            if value[k] < sizes[k] {
                break;
            }
            value[k] = 0;
        }
    }
    out
}

/// Realized client tensor of an assignment through the brute-force oracle.
/// Internal edges keep their label; each client edge is renamed to the
/// client id, and client–client edges become deltas.
pub fn naive_realized(network: &Network, assignment: &NodeAssignment) -> DenseTensor {
    let mut parts = Vec::new();
    for v in network.internal_nodes() {
        let axes = node_axes(network, v);
        let labels: Vec<&str> = axes.iter().map(|a| a.label.as_str()).collect();
        let mut t = assignment.get(v).unwrap().permuted(&labels).unwrap();
        for e in network.incident_edges(v) {
            let other = e.other(v).unwrap();
            if network.is_client(other) {
                t = t.relabel(&e.label, other).unwrap();
            }
        }
        parts.push(t);
    }
    for e in &network.edges {
        if network.is_client(&e.a) && network.is_client(&e.b) {
            let ta = DenseTensor::delta(&[&e.a, &format!("{}~", e.label)], e.dim).unwrap();
            let tb = DenseTensor::delta(&[&format!("{}~", e.label), &e.b], e.dim).unwrap();
            parts.push(ta);
            parts.push(tb);
        }
    }
    let refs: Vec<&DenseTensor> = parts.iter().collect();
    naive_contract(&refs, &network.clients())
}

pub fn max_abs_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let b = b.permuted(&a.labels()).unwrap();
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
