//! State-vector simulation of network protocols.
//!
//! States stay unnormalized throughout. Each subsystem has an owner node and a
//! local step may only touch subsystems its node holds. Sending a subsystem
//! over an edge consumes that edge's entangled pair; it is modeled as a change
//! of owner.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_max_eigenvalue, CMatrix};
use crate::network::Network;
use crate::tensor::{contract_pair, next_index, strides, Axis, DenseTensor, Domain, Scalar};
use crate::verify::{node_axes, realized_tensor, NodeAssignment};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

const ZERO: Scalar = Scalar::new(0.0, 0.0);
const ONE: Scalar = Scalar::new(1.0, 0.0);

/// Branches whose probability falls below this are discarded.
pub const BRANCH_DROP: f64 = 1e-14;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const COMPLETENESS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub label: String,
    pub dim: usize,
}

impl SubsystemSpec {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        SubsystemSpec {
            label: label.into(),
            dim,
        }
    }
}

/// Label of the half of edge `edge`'s entangled pair held by `node`.
pub fn edge_half(node: &str, edge: &str) -> String {
    format!("{node}@{edge}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DenseTensor,
    owners: Vec<String>,
}

impl PureState {
    /// The state with no subsystems and amplitude 1.
    pub fn empty() -> Self {
        PureState {
            amplitudes: DenseTensor::scalar(ONE, Domain::Complex).expect("scalar"),
            owners: Vec::new(),
        }
    }

    pub fn new(subsystems: Vec<Subsystem>, amplitudes: Vec<Scalar>) -> Result<Self> {
        let axes = subsystems.iter().map(|s| Axis::new(s.label.clone(), s.dim)).collect();
        let owners = subsystems.into_iter().map(|s| s.owner).collect();
        Ok(PureState {
            amplitudes: DenseTensor::new(axes, amplitudes, Domain::Complex)?,
            owners,
        })
    }

    /// Every axis of `tensor` becomes a subsystem held by `owner`.
    pub fn from_tensor(tensor: &DenseTensor, owner: &str) -> Result<Self> {
        Ok(PureState {
            owners: vec![owner.to_string(); tensor.rank()],
            amplitudes: tensor.with_domain(Domain::Complex)?,
        })
    }

    pub fn subsystems(&self) -> Vec<Subsystem> {
        self.amplitudes
            .axes()
            .iter()
            .zip(&self.owners)
            .map(|(a, o)| Subsystem {
                label: a.label.clone(),
                dim: a.dim,
                owner: o.clone(),
            })
            .collect()
    }

    pub fn amplitudes(&self) -> &DenseTensor {
        &self.amplitudes
    }

    pub fn labels(&self) -> Vec<&str> {
        self.amplitudes.labels()
    }

    pub fn owner_of(&self, label: &str) -> Option<&str> {
        self.amplitudes.axis_position(label).map(|p| self.owners[p].as_str())
    }

    /// Labels of the subsystems `owner` holds, in state order.
    pub fn held_by(&self, owner: &str) -> Vec<&str> {
        self.amplitudes
            .axes()
            .iter()
            .zip(&self.owners)
            .filter(|(_, o)| *o == owner)
            .map(|(a, _)| a.label.as_str())
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.data().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr().sqrt() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Result<PureState> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroTarget);
        }
        Ok(self.scaled(Scalar::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, s: Scalar) -> PureState {
        PureState {
            amplitudes: self.amplitudes.scaled(s),
            owners: self.owners.clone(),
        }
    }

    /// Tensor product; labels must be disjoint.
    pub fn product(&self, other: &PureState) -> Result<PureState> {
        let mut owners = self.owners.clone();
        owners.extend(other.owners.iter().cloned());
        Ok(PureState {
            amplitudes: self.amplitudes.outer(&other.amplitudes)?,
            owners,
        })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<PureState> {
        Ok(PureState {
            amplitudes: self.amplitudes.relabel(from, to)?,
            owners: self.owners.clone(),
        })
    }

    pub fn with_owner(&self, label: &str, owner: &str) -> Result<PureState> {
        let p = self
            .amplitudes
            .axis_position(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        let mut out = self.clone();
        out.owners[p] = owner.to_string();
        Ok(out)
    }

    pub fn permuted(&self, order: &[&str]) -> Result<PureState> {
        let amplitudes = self.amplitudes.permuted(order)?;
        let owners = order
            .iter()
            .map(|l| self.owner_of(l).expect("permuted checked labels").to_string())
            .collect();
        Ok(PureState { amplitudes, owners })
    }

    /// Applies the linear map `matrix` from `inputs` to `outputs`. Rows index
    /// the outputs and columns the inputs, both row-major. The outputs are
    /// appended after the untouched subsystems and are held by `owner`.
    pub fn apply(
        &self,
        inputs: &[&str],
        outputs: &[SubsystemSpec],
        owner: &str,
        matrix: &[Vec<Scalar>],
    ) -> Result<PureState> {
        let mut in_axes = Vec::with_capacity(inputs.len());
        for l in inputs {
            let dim = self
                .amplitudes
                .dim_of(l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            in_axes.push(Axis::new(*l, dim));
        }
        for o in outputs {
            if !inputs.contains(&o.label.as_str()) && self.amplitudes.axis_position(&o.label).is_some() {
                return Err(Error::DuplicateLabel(o.label.clone()));
            }
        }
        let cols: usize = in_axes.iter().map(|a| a.dim).product();
        let rows: usize = outputs.iter().map(|o| o.dim).product();
        if matrix.len() != rows || matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch(format!("operator must be {rows}x{cols}")));
        }
        let pending = |l: &str| format!("{l}'");
        let mut op_axes: Vec<Axis> = outputs.iter().map(|o| Axis::new(pending(&o.label), o.dim)).collect();
        op_axes.extend(in_axes);
        let op = DenseTensor::new(op_axes, matrix.iter().flatten().copied().collect(), Domain::Complex)?;
        let mut amplitudes = contract_pair(&self.amplitudes, &op)?;
        for o in outputs {
            amplitudes = amplitudes.relabel(&pending(&o.label), &o.label)?;
        }
        let mut owners: Vec<String> = self
            .amplitudes
            .axes()
            .iter()
            .zip(&self.owners)
            .filter(|(a, _)| !inputs.contains(&a.label.as_str()))
            .map(|(_, o)| o.clone())
            .collect();
        owners.extend(std::iter::repeat_n(owner.to_string(), outputs.len()));
        Ok(PureState { amplitudes, owners })
    }

    /// Applies the unconjugated bra `Σ bra[i] ⟨i|` on `labels`, removing them.
    pub fn project_bra(&self, labels: &[&str], bra: &[Scalar]) -> Result<PureState> {
        let axes = self.amplitudes.axes();
        let full_strides = strides(&self.amplitudes.dims());
        let mut hit = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self
                .amplitudes
                .axis_position(l)
                .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            hit.push(p);
        }
        let bra_dims: Vec<usize> = hit.iter().map(|&p| axes[p].dim).collect();
        if bra.len() != bra_dims.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!("bra over {labels:?} has {} entries", bra.len())));
        }
        let keep: Vec<usize> = (0..axes.len()).filter(|p| !hit.contains(p)).collect();
        let keep_dims: Vec<usize> = keep.iter().map(|&p| axes[p].dim).collect();
        let n_keep: usize = keep_dims.iter().product();
        let data = self.amplitudes.data();
        let mut out = Vec::with_capacity(n_keep);
        let mut rest = vec![0; keep.len()];
        for _ in 0..n_keep {
            let base: usize = rest.iter().zip(&keep).map(|(i, &p)| i * full_strides[p]).sum();
            let mut acc = ZERO;
            let mut b = vec![0; hit.len()];
            for coeff in bra {
                let off: usize = b.iter().zip(&hit).map(|(i, &p)| i * full_strides[p]).sum();
                acc += coeff * data[base + off];
                next_index(&mut b, &bra_dims);
            }
            out.push(acc);
            next_index(&mut rest, &keep_dims);
        }
        let subsystems = keep
            .iter()
            .map(|&p| Subsystem {
                label: axes[p].label.clone(),
                dim: axes[p].dim,
                owner: self.owners[p].clone(),
            })
            .collect();
        PureState::new(subsystems, out)
    }
}

fn edge_pair(e: &crate::network::Edge) -> Result<PureState> {
    let (ha, hb) = (edge_half(&e.a, &e.label), edge_half(&e.b, &e.label));
    Ok(PureState {
        amplitudes: DenseTensor::delta(&[&ha, &hb], e.dim)?.with_domain(Domain::Complex)?,
        owners: vec![e.a.clone(), e.b.clone()],
    })
}

/// The unnormalized product of one pair `Σ_i |ii⟩` per edge, in edge order.
pub fn build_network_state(network: &Network) -> Result<PureState> {
    network.ensure_valid()?;
    let mut state = PureState::empty();
    for e in &network.edges {
        state = state.product(&edge_pair(e)?)?;
    }
    Ok(state)
}

/// Projects the network state onto each internal node's bra `Σ V_i ⟨i|` and
/// returns the remaining client state, labeled by client id in network
/// client order. Pairs are created only when a node first needs them.
pub fn project_assignment(network: &Network, assignment: &NodeAssignment) -> Result<PureState> {
    network.ensure_valid()?;
    assignment.check_against(network)?;
    let mut state = PureState::empty();
    let mut created = BTreeSet::new();
    for v in network.internal_nodes() {
        for e in network.incident_edges(v) {
            if created.insert(e.label.clone()) {
                state = state.product(&edge_pair(e)?)?;
            }
        }
        let axes = node_axes(network, v);
        let edge_labels: Vec<&str> = axes.iter().map(|a| a.label.as_str()).collect();
        let tensor = assignment.get(v).expect("checked").permuted(&edge_labels)?;
        let halves: Vec<String> = edge_labels.iter().map(|e| edge_half(v, e)).collect();
        let half_refs: Vec<&str> = halves.iter().map(String::as_str).collect();
        state = state.project_bra(&half_refs, tensor.data())?;
    }
    for e in &network.edges {
        if created.insert(e.label.clone()) {
            state = state.product(&edge_pair(e)?)?;
        }
    }
    let clients = network.clients();
    for c in &clients {
        let e = network.client_edge(c)?;
        state = state.relabel(&edge_half(c, &e.label), c)?;
    }
    state.permuted(&clients)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub key: String,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub outcome: String,
    pub matrix: Vec<Vec<Scalar>>,
}

/// How a measurement family is scaled before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Used as written; must satisfy `Σ M†M ≤ I`.
    AsGiven,
    /// Scaled by `1/√λ` with λ the largest eigenvalue of `Σ M†M`.
    #[default]
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ProtocolStep {
    Prepare {
        node: String,
        subsystems: Vec<SubsystemSpec>,
        amplitudes: Vec<Scalar>,
    },
    Isometry {
        node: String,
        inputs: Vec<String>,
        outputs: Vec<SubsystemSpec>,
        matrix: Vec<Vec<Scalar>>,
        /// Checks that the columns are orthonormal.
        #[serde(default)]
        unitary: bool,
    },
    Measure {
        node: String,
        key: String,
        inputs: Vec<String>,
        outputs: Vec<SubsystemSpec>,
        operators: Vec<MeasurementOutcome>,
        #[serde(default)]
        normalization: Normalization,
    },
    Send {
        subsystem: String,
        from: String,
        to: String,
    },
    PhaseFix {
        node: String,
        subsystem: String,
        phases: Vec<Scalar>,
        #[serde(default)]
        when: Option<Condition>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// (measurement key, outcome) in execution order.
    pub outcomes: Vec<(String, String)>,
    pub state: PureState,
    pub probability: f64,
}

impl Branch {
    pub fn outcome(&self, key: &str) -> Option<&str> {
        self.outcomes.iter().find(|(k, _)| k == key).map(|(_, o)| o.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BranchPolicy {
    All,
    /// Keeps only branches agreeing with every listed outcome.
    Select(Vec<Condition>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub branches: Vec<Branch>,
    /// Factor applied to each measurement family, by key.
    pub normalizations: Vec<(String, f64)>,
}

impl ProtocolRun {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

fn protocol_err(step: usize, msg: impl std::fmt::Display) -> Error {
    Error::Protocol(format!("step {step}: {msg}"))
}

fn check_node(network: &Network, step: usize, node: &str) -> Result<()> {
    match network.node(node) {
        Some(_) => Ok(()),
        None => Err(protocol_err(step, format!("unknown node `{node}`"))),
    }
}

fn check_held(state: &PureState, step: usize, node: &str, labels: &[&str]) -> Result<()> {
    for l in labels {
        match state.owner_of(l) {
            Some(o) if o == node => {}
            Some(o) => return Err(protocol_err(step, format!("`{l}` is held by `{o}`, not `{node}`"))),
            None => return Err(protocol_err(step, format!("no subsystem `{l}`"))),
        }
    }
    Ok(())
}

fn to_matrix(rows: &[Vec<Scalar>]) -> CMatrix {
    let n_cols = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(rows.len(), n_cols, |r, c| rows[r][c])
}

fn family_scale(step: usize, operators: &[MeasurementOutcome], normalization: Normalization) -> Result<f64> {
    let mut completeness: Option<CMatrix> = None;
    for op in operators {
        let m = to_matrix(&op.matrix);
        let term = m.adjoint() * &m;
        completeness = Some(match completeness {
            None => term,
            Some(acc) if acc.shape() == term.shape() => acc + term,
            Some(_) => return Err(protocol_err(step, "operators differ in shape")),
        });
    }
    let completeness = completeness.ok_or_else(|| protocol_err(step, "empty operator family"))?;
    let top = hermitian_max_eigenvalue(&completeness);
    match normalization {
        Normalization::AsGiven if top > 1.0 + COMPLETENESS_TOL => Err(protocol_err(
            step,
            format!("operator family exceeds completeness (largest eigenvalue {top:.6})"),
        )),
        Normalization::AsGiven => Ok(1.0),
        Normalization::Global if top <= 0.0 => Err(protocol_err(step, "operator family is zero")),
        Normalization::Global => Ok(1.0 / top.sqrt()),
    }
}

fn check_isometry(step: usize, matrix: &[Vec<Scalar>]) -> Result<()> {
    let m = to_matrix(matrix);
    let gram = m.adjoint() * &m;
    let defect = (gram - CMatrix::identity(m.ncols(), m.ncols())).norm();
    if defect > ISOMETRY_TOL {
        return Err(protocol_err(step, format!("columns not orthonormal (defect {defect:.3e})")));
    }
    Ok(())
}

fn selected(policy: &BranchPolicy, key: &str, outcome: &str) -> bool {
    match policy {
        BranchPolicy::All => true,
        BranchPolicy::Select(conds) => conds.iter().all(|c| c.key != key || c.outcome == outcome),
    }
}

/// Runs `steps` starting from no subsystems.
pub fn run_protocol(network: &Network, steps: &[ProtocolStep], policy: &BranchPolicy) -> Result<ProtocolRun> {
    run_protocol_from(network, PureState::empty(), steps, policy)
}

/// Runs `steps` from `initial`. Branch probabilities are squared norms
/// relative to the initial state times every prepared local state.
pub fn run_protocol_from(
    network: &Network,
    initial: PureState,
    steps: &[ProtocolStep],
    policy: &BranchPolicy,
) -> Result<ProtocolRun> {
    let mut reference = initial.norm_sqr();
    if reference == 0.0 {
        return Err(Error::Protocol("initial state is zero".into()));
    }
    let mut branches = vec![(Vec::<(String, String)>::new(), initial)];
    let mut normalizations = Vec::new();
    let mut consumed = BTreeSet::new();
    for (k, step) in steps.iter().enumerate() {
        match step {
            ProtocolStep::Prepare {
                node,
                subsystems,
                amplitudes,
            } => {
                check_node(network, k, node)?;
                let local = PureState::new(
                    subsystems
                        .iter()
                        .map(|s| Subsystem {
                            label: s.label.clone(),
                            dim: s.dim,
                            owner: node.clone(),
                        })
                        .collect(),
                    amplitudes.clone(),
                )?;
                let n2 = local.norm_sqr();
                if n2 == 0.0 {
                    return Err(protocol_err(k, "prepared state is zero"));
                }
                reference *= n2;
                for (_, s) in &mut branches {
                    *s = s.product(&local)?;
                }
            }
            ProtocolStep::Isometry {
                node,
                inputs,
                outputs,
                matrix,
                unitary,
            } => {
                check_node(network, k, node)?;
                if *unitary {
                    check_isometry(k, matrix)?;
                }
                let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
                for (_, s) in &mut branches {
                    check_held(s, k, node, &inputs)?;
                    *s = s.apply(&inputs, outputs, node, matrix)?;
                }
            }
            ProtocolStep::Measure {
                node,
                key,
                inputs,
                outputs,
                operators,
                normalization,
            } => {
                check_node(network, k, node)?;
                let mut seen = BTreeSet::new();
                if let Some(dup) = operators.iter().find(|o| !seen.insert(o.outcome.as_str())) {
                    return Err(protocol_err(k, format!("outcome `{}` listed twice", dup.outcome)));
                }
                let factor = family_scale(k, operators, *normalization)?;
                normalizations.push((key.clone(), factor));
                let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
                let mut next = Vec::new();
                for (record, s) in &branches {
                    check_held(s, k, node, &inputs)?;
                    for op in operators {
                        if !selected(policy, key, &op.outcome) {
                            continue;
                        }
                        let child = s.apply(&inputs, outputs, node, &op.matrix)?.scaled(Scalar::new(factor, 0.0));
                        if child.norm_sqr() / reference < BRANCH_DROP {
                            continue;
                        }
                        let mut record = record.clone();
                        record.push((key.clone(), op.outcome.clone()));
                        next.push((record, child));
                    }
                }
                branches = next;
            }
            ProtocolStep::Send { subsystem, from, to } => {
                let edge = network
                    .edges
                    .iter()
                    .find(|e| e.touches(from) && e.other(from) == Some(to.as_str()) && !consumed.contains(&e.label))
                    .ok_or_else(|| protocol_err(k, format!("no unused edge between `{from}` and `{to}`")))?;
                consumed.insert(edge.label.clone());
                for (_, s) in &mut branches {
                    check_held(s, k, from, &[subsystem])?;
                    let dim = s.amplitudes.dim_of(subsystem).expect("held");
                    if dim > edge.dim {
                        return Err(protocol_err(
                            k,
                            format!("`{subsystem}` has dimension {dim} but edge `{}` carries {}", edge.label, edge.dim),
                        ));
                    }
                    *s = s.with_owner(subsystem, to)?;
                }
            }
            ProtocolStep::PhaseFix {
                node,
                subsystem,
                phases,
                when,
            } => {
                check_node(network, k, node)?;
                if let Some(bad) = phases.iter().find(|p| (p.norm() - 1.0).abs() > ISOMETRY_TOL) {
                    return Err(protocol_err(k, format!("phase {bad} is not unimodular")));
                }
                let diag: Vec<Vec<Scalar>> = (0..phases.len())
                    .map(|r| (0..phases.len()).map(|c| if r == c { phases[r] } else { ZERO }).collect())
                    .collect();
                let spec = [SubsystemSpec::new(subsystem.clone(), phases.len())];
                for (record, s) in &mut branches {
                    let fires = match when {
                        None => true,
                        Some(c) => record.iter().any(|(key, o)| *key == c.key && *o == c.outcome),
                    };
                    if fires {
                        check_held(s, k, node, &[subsystem])?;
                        *s = s.apply(&[subsystem], &spec, node, &diag)?;
                    }
                }
            }
        }
    }
    let branches = branches
        .into_iter()
        .map(|(outcomes, state)| Branch {
            probability: state.norm_sqr() / reference,
            outcomes,
            state,
        })
        .collect();
    Ok(ProtocolRun {
        branches,
        normalizations,
    })
}

/// The state of `clients`, each of which must hold exactly one subsystem and
/// no other holder may remain, relabeled by client id in the given order.
pub fn client_state(state: &PureState, clients: &[&str]) -> Result<DenseTensor> {
    for s in state.subsystems() {
        if !clients.contains(&s.owner.as_str()) {
            return Err(Error::Protocol(format!("`{}` is still held by `{}`", s.label, s.owner)));
        }
    }
    let mut out = state.clone();
    for c in clients {
        match out.held_by(c).as_slice() {
            [one] => {
                let one = one.to_string();
                out = out.relabel(&one, c)?;
            }
            held => return Err(Error::Protocol(format!("client `{c}` holds {} subsystems", held.len()))),
        }
    }
    Ok(out.permuted(clients)?.amplitudes)
}

/// `|⟨target|ψ⟩|² / (‖target‖² ‖ψ‖²)`, with axes matched by label.
pub fn fidelity(state: &DenseTensor, target: &DenseTensor) -> Result<f64> {
    let labels = state.labels();
    let aligned = target.permuted(&labels)?;
    if aligned.dims() != state.dims() {
        return Err(Error::ShapeMismatch("state and target dimensions differ".into()));
    }
    let (ns, nt) = (state.norm(), aligned.norm());
    if ns == 0.0 || nt == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let overlap: Scalar = aligned.data().iter().zip(state.data()).map(|(t, s)| t.conj() * s).sum();
    Ok(overlap.norm_sqr() / (ns * ns * nt * nt))
}

fn basis_column_map(rows: usize, cols: usize, image: impl Fn(usize) -> Option<(usize, Scalar)>) -> Vec<Vec<Scalar>> {
    let mut m = vec![vec![ZERO; cols]; rows];
    for c in 0..cols {
        if let Some((r, z)) = image(c) {
            m[r][c] = z;
        }
    }
    m
}

/// Key of the measurement in [`ternary_cross_protocol`].
pub const TERNARY_CROSS_KEY: &str = "x";

/// Steps distributing two crossing Bell pairs, (a,d) and (b,c), over the
/// ternary square: A prepares a three-qudit state and sends its shares, B and
/// C re-encode theirs into a qubit for their client and a qutrit for D, and D
/// measures and keeps a qubit for its client after a phase correction on b.
pub fn ternary_cross_protocol() -> Vec<ProtocolStep> {
    let send = |s: &str, from: &str, to: &str| ProtocolStep::Send {
        subsystem: s.into(),
        from: from.into(),
        to: to.into(),
    };
    let mut prepared = vec![ZERO; 18];
    for (a, b, c) in [(0, 0, 2), (0, 2, 0), (1, 1, 2), (1, 2, 1)] {
        prepared[a * 9 + b * 3 + c] = ONE;
    }
    // input j ↦ (qutrit, qubit) row index qutrit*2 + qubit
    let b_map = basis_column_map(6, 3, |j| Some(([0, 2, 5][j], ONE)));
    let c_map = basis_column_map(6, 3, |j| Some(([1, 3, 4][j], ONE)));
    let family = |sign: f64| -> Vec<Vec<Scalar>> {
        let mut m = vec![vec![ZERO; 9]; 2];
        m[0][2] = ONE;
        m[1][5] = ONE;
        m[0][6] = Scalar::new(sign, 0.0);
        m[1][7] = Scalar::new(sign, 0.0);
        m
    };
    vec![
        ProtocolStep::Prepare {
            node: "A".into(),
            subsystems: vec![
                SubsystemSpec::new("A_a", 2),
                SubsystemSpec::new("A_B", 3),
                SubsystemSpec::new("A_C", 3),
            ],
            amplitudes: prepared,
        },
        send("A_a", "A", "a"),
        send("A_B", "A", "B"),
        send("A_C", "A", "C"),
        ProtocolStep::Isometry {
            node: "B".into(),
            inputs: vec!["A_B".into()],
            outputs: vec![SubsystemSpec::new("D_B", 3), SubsystemSpec::new("B_b", 2)],
            matrix: b_map,
            unitary: true,
        },
        send("B_b", "B", "b"),
        send("D_B", "B", "D"),
        ProtocolStep::Isometry {
            node: "C".into(),
            inputs: vec!["A_C".into()],
            outputs: vec![SubsystemSpec::new("D_C", 3), SubsystemSpec::new("C_c", 2)],
            matrix: c_map,
            unitary: true,
        },
        send("C_c", "C", "c"),
        send("D_C", "C", "D"),
        ProtocolStep::Measure {
            node: "D".into(),
            key: TERNARY_CROSS_KEY.into(),
            inputs: vec!["D_B".into(), "D_C".into()],
            outputs: vec![SubsystemSpec::new("D_d", 2)],
            operators: vec![
                MeasurementOutcome {
                    outcome: "0".into(),
                    matrix: family(1.0),
                },
                MeasurementOutcome {
                    outcome: "1".into(),
                    matrix: family(-1.0),
                },
            ],
            normalization: Normalization::Global,
        },
        ProtocolStep::PhaseFix {
            node: "b".into(),
            subsystem: "B_b".into(),
            phases: vec![ONE, -ONE],
            when: Some(Condition {
                key: TERNARY_CROSS_KEY.into(),
                outcome: "1".into(),
            }),
        },
        send("D_d", "D", "d"),
    ]
}

/// Success probabilities of a deterministic classical protocol computed
/// three ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedProbability {
    /// Direct simulation of the classical protocol.
    pub classical: f64,
    /// From the contracted probability tensor.
    pub contraction: f64,
    /// From the state-vector simulation of the quantum protocol.
    pub quantum: f64,
}

impl LiftedProbability {
    pub fn agree(&self, tol: f64) -> bool {
        (self.classical - self.quantum).abs() <= tol && (self.classical - self.contraction).abs() <= tol
    }
}

/// Each edge sent from its first listed endpoint.
pub fn forward_flow(network: &Network) -> BTreeMap<String, String> {
    network.edges.iter().map(|e| (e.label.clone(), e.a.clone())).collect()
}

struct NodeTable {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    /// Accepted input tuple (row-major) ↦ output tuple.
    map: BTreeMap<Vec<usize>, Vec<usize>>,
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

fn flatten(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i)
}

/// Success probability of the deterministic classical protocol given by a 0/1
/// `assignment`, with each edge carrying its value from `flow[edge]` to the
/// other endpoint, and the probability that the quantum protocol obtained by
/// replacing each node's function with the filter
/// `|in⟩ ↦ |in⟩|f(in)⟩` (zero on rejected inputs) succeeds.
///
/// Sources are the clients that send on their edge; `input_distribution` is
/// row-major over their values, in network client order.
pub fn lifted_success_probability(
    network: &Network,
    assignment: &NodeAssignment,
    flow: &BTreeMap<String, String>,
    input_distribution: &[f64],
) -> Result<LiftedProbability> {
    network.ensure_valid()?;
    assignment.check_against(network)?;
    for (node, t) in assignment.tensors() {
        if t.data().iter().any(|z| z.im != 0.0 || (z.re != 0.0 && z.re != 1.0)) {
            return Err(Error::InvalidParameter(format!("node `{node}` has entries other than 0 and 1")));
        }
    }
    let mut sender = BTreeMap::new();
    for e in &network.edges {
        let s = flow
            .get(&e.label)
            .ok_or_else(|| Error::InvalidParameter(format!("edge `{}` has no direction", e.label)))?;
        if !e.touches(s) {
            return Err(Error::InvalidParameter(format!("`{s}` is not an endpoint of `{}`", e.label)));
        }
        sender.insert(e.label.as_str(), s.as_str());
    }
    let sources: Vec<&str> = network
        .clients()
        .into_iter()
        .filter(|c| network.client_edge(c).map(|e| sender[e.label.as_str()] == *c).unwrap_or(false))
        .collect();
    let source_edges: Vec<&crate::network::Edge> =
        sources.iter().map(|c| network.client_edge(c)).collect::<Result<_>>()?;
    let source_dims: Vec<usize> = source_edges.iter().map(|e| e.dim).collect();
    if input_distribution.len() != source_dims.iter().product::<usize>() {
        return Err(Error::ShapeMismatch(format!(
            "input distribution needs {} entries",
            source_dims.iter().product::<usize>()
        )));
    }
    if input_distribution.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(Error::InvalidParameter("input probabilities must be non-negative".into()));
    }
    if (input_distribution.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter("input probabilities must sum to 1".into()));
    }

    // node order in which every input arrives before use
    let internal = network.internal_nodes();
    let mut order = Vec::new();
    let mut done: BTreeSet<&str> = network.clients().into_iter().collect();
    while order.len() < internal.len() {
        let ready = internal.iter().find(|v| {
            !done.contains(**v)
                && network
                    .incident_edges(v)
                    .iter()
                    .all(|e| sender[e.label.as_str()] == **v || done.contains(sender[e.label.as_str()]))
        });
        match ready {
            Some(v) => {
                done.insert(v);
                order.push(*v);
            }
            None => return Err(Error::InvalidParameter("edge directions contain a cycle".into())),
        }
    }

    let mut tables = BTreeMap::new();
    for v in &order {
        let axes = node_axes(network, v);
        let labels: Vec<&str> = axes.iter().map(|a| a.label.as_str()).collect();
        let t = assignment.get(v).expect("checked").permuted(&labels)?;
        let dims = t.dims();
        let (inputs, outputs): (Vec<usize>, Vec<usize>) = (0..axes.len()).partition(|&k| sender[labels[k]] != *v);
        let mut map = BTreeMap::new();
        let mut idx = vec![0; dims.len()];
        for z in t.data() {
            if z.re == 1.0 {
                let key: Vec<usize> = inputs.iter().map(|&k| idx[k]).collect();
                let val: Vec<usize> = outputs.iter().map(|&k| idx[k]).collect();
                if map.insert(key, val).is_some() {
                    return Err(Error::InvalidParameter(format!("node `{v}` is not deterministic")));
                }
            }
            next_index(&mut idx, &dims);
        }
        tables.insert(*v, NodeTable { inputs, outputs, map });
    }

    // classical
    let mut classical = 0.0;
    for (flat, &q) in input_distribution.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let s = unflatten(flat, &source_dims);
        let mut values: BTreeMap<&str, usize> = source_edges.iter().zip(&s).map(|(e, &x)| (e.label.as_str(), x)).collect();
        let mut accepted = true;
        for v in &order {
            let axes = node_axes(network, v);
            let table = &tables[v];
            let key: Vec<usize> = table.inputs.iter().map(|&k| values[axes[k].label.as_str()]).collect();
            match table.map.get(&key) {
                Some(out) => {
                    for (&k, &x) in table.outputs.iter().zip(out) {
                        values.insert(network.edge(&axes[k].label).expect("incident").label.as_str(), x);
                    }
                }
                None => {
                    accepted = false;
                    break;
                }
            }
        }
        if accepted {
            classical += q;
        }
    }

    // contraction
    let realized = realized_tensor(network, assignment)?;
    let client_pos: Vec<usize> = sources
        .iter()
        .map(|c| realized.axis_position(c).expect("client axis"))
        .collect();
    let rdims = realized.dims();
    let mut idx = vec![0; rdims.len()];
    let mut contraction = 0.0;
    for z in realized.data() {
        let s: Vec<usize> = client_pos.iter().map(|&p| idx[p]).collect();
        contraction += z.re * input_distribution[flatten(&s, &source_dims)];
        next_index(&mut idx, &rdims);
    }

    // quantum
    let msg = |e: &str| format!("msg:{e}");
    let mut subsystems = Vec::new();
    for (c, e) in sources.iter().zip(&source_edges) {
        subsystems.push(Subsystem {
            label: format!("in:{c}"),
            dim: e.dim,
            owner: c.to_string(),
        });
    }
    for (c, e) in sources.iter().zip(&source_edges) {
        subsystems.push(Subsystem {
            label: msg(&e.label),
            dim: e.dim,
            owner: c.to_string(),
        });
    }
    let n = sources.len();
    let init_axes: Vec<Axis> = subsystems.iter().map(|s| Axis::new(s.label.clone(), s.dim)).collect();
    let initial_tensor = DenseTensor::from_fn(init_axes, Domain::Complex, |idx| {
        if idx[..n] == idx[n..] {
            Scalar::new(input_distribution[flatten(&idx[..n], &source_dims)].sqrt(), 0.0)
        } else {
            ZERO
        }
    })?;
    let initial = PureState::new(subsystems, initial_tensor.into_data())?;
    let mut steps = Vec::new();
    let send_from = |v: &str, e: &crate::network::Edge| ProtocolStep::Send {
        subsystem: msg(&e.label),
        from: v.to_string(),
        to: e.other(v).expect("endpoint").to_string(),
    };
    for (c, e) in sources.iter().zip(&source_edges) {
        steps.push(send_from(c, e));
    }
    for v in &order {
        let axes = node_axes(network, v);
        let table = &tables[v];
        let in_dims: Vec<usize> = table.inputs.iter().map(|&k| axes[k].dim).collect();
        let out_dims: Vec<usize> = table.outputs.iter().map(|&k| axes[k].dim).collect();
        let cols: usize = in_dims.iter().product();
        let out_rows: usize = out_dims.iter().product();
        let filter = basis_column_map(cols * out_rows, cols, |c| {
            let key = unflatten(c, &in_dims);
            table.map.get(&key).map(|out| (c * out_rows + flatten(out, &out_dims), ONE))
        });
        let mut outputs: Vec<SubsystemSpec> = table
            .inputs
            .iter()
            .map(|&k| SubsystemSpec::new(format!("keep:{}", edge_half(v, &axes[k].label)), axes[k].dim))
            .collect();
        outputs.extend(table.outputs.iter().map(|&k| SubsystemSpec::new(msg(&axes[k].label), axes[k].dim)));
        steps.push(ProtocolStep::Measure {
            node: v.to_string(),
            key: format!("accept:{v}"),
            inputs: table.inputs.iter().map(|&k| msg(&axes[k].label)).collect(),
            outputs,
            operators: vec![MeasurementOutcome {
                outcome: "accepted".into(),
                matrix: filter,
            }],
            normalization: Normalization::AsGiven,
        });
        for &k in &table.outputs {
            steps.push(send_from(v, network.edge(&axes[k].label).expect("incident")));
        }
    }
    let quantum = run_protocol_from(network, initial, &steps, &BranchPolicy::All)?.total_probability();
    Ok(LiftedProbability {
        classical,
        contraction,
        quantum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{canonical_instance, CanonicalInstance};
    use crate::task::{cross_pairs_task, subset_state_task, SubsetKind};
    use crate::tensor::frobenius_distance;
    use crate::verify::{bundled_assignment, lift_classical_assignment, BundledAssignment};

    fn net(which: CanonicalInstance) -> Network {
        canonical_instance(which).unwrap()
    }

    #[test]
    fn network_state_shapes() {
        let s = build_network_state(&net(CanonicalInstance::SingleEdge { dim: 2 })).unwrap();
        let amps: Vec<f64> = s.amplitudes().data().iter().map(|z| z.re).collect();
        assert_eq!(amps, vec![1., 0., 0., 1.]);
        let sq = build_network_state(&net(CanonicalInstance::Square { internal: 2, client: 2 })).unwrap();
        assert_eq!(sq.subsystems().len(), 16);
        assert!((sq.norm_sqr() - 256.0).abs() < 1e-9);
        let ts = build_network_state(&net(CanonicalInstance::TernarySquare)).unwrap();
        assert_eq!(ts.amplitudes().dim_of("A@A-B"), Some(3));
        assert_eq!(ts.amplitudes().dim_of("a@a-A"), Some(2));
        assert_eq!(ts.owner_of("B@A-B"), Some("B"));
    }

    #[test]
    fn projection_matches_contraction() {
        let bf = net(CanonicalInstance::Butterfly);
        let lifted = lift_classical_assignment(&bundled_assignment(BundledAssignment::ButterflyXor).unwrap()).unwrap();
        let projected = project_assignment(&bf, &lifted).unwrap();
        let realized = realized_tensor(&bf, &lifted).unwrap();
        assert!(frobenius_distance(projected.amplitudes(), &realized).unwrap() < 1e-10);
        let target = cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[2, 2], Domain::Complex).unwrap();
        assert!(fidelity(projected.amplitudes(), target.tensor()).unwrap() > 1.0 - 1e-12);

        let star = net(CanonicalInstance::Star { n: 3, dim: 2 });
        let ghz = bundled_assignment(BundledAssignment::StarGhz { n: 3, d: 2 }).unwrap();
        let state = project_assignment(&star, &ghz).unwrap();
        let target = subset_state_task(&SubsetKind::Ghz { n: 3, d: 2 }, Domain::Complex).unwrap();
        assert!(fidelity(state.amplitudes(), target.tensor()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn full_state_projection_agrees_with_incremental() {
        let sq = net(CanonicalInstance::Square { internal: 2, client: 2 });
        let assignment = NodeAssignment::from_fn(&sq, Domain::Complex, |v, idx| {
            let h = v.bytes().map(f64::from).sum::<f64>();
            Scalar::new((h + idx.iter().sum::<usize>() as f64).sin(), (h * idx[0] as f64).cos())
        })
        .unwrap();
        let mut full = build_network_state(&sq).unwrap();
        for v in sq.internal_nodes() {
            let axes = node_axes(&sq, v);
            let labels: Vec<&str> = axes.iter().map(|a| a.label.as_str()).collect();
            let t = assignment.get(v).unwrap().permuted(&labels).unwrap();
            let halves: Vec<String> = labels.iter().map(|e| edge_half(v, e)).collect();
            let refs: Vec<&str> = halves.iter().map(String::as_str).collect();
            full = full.project_bra(&refs, t.data()).unwrap();
        }
        for c in sq.clients() {
            let e = sq.client_edge(c).unwrap();
            full = full.relabel(&edge_half(c, &e.label), c).unwrap();
        }
        let incremental = project_assignment(&sq, &assignment).unwrap();
        assert!(frobenius_distance(full.amplitudes(), incremental.amplitudes()).unwrap() < 1e-12);
    }

    fn epr_measure_steps() -> Vec<ProtocolStep> {
        let proj = |k: usize| {
            let mut m = vec![vec![ZERO; 2]; 2];
            m[k][k] = ONE;
            m
        };
        vec![ProtocolStep::Measure {
            node: "u".into(),
            key: "z".into(),
            inputs: vec!["u@u-v".into()],
            outputs: vec![SubsystemSpec::new("u@u-v", 2)],
            operators: vec![
                MeasurementOutcome {
                    outcome: "0".into(),
                    matrix: proj(0),
                },
                MeasurementOutcome {
                    outcome: "1".into(),
                    matrix: proj(1),
                },
            ],
            normalization: Normalization::AsGiven,
        }]
    }

    #[test]
    fn born_rule_on_a_pair() {
        let edge = net(CanonicalInstance::SingleEdge { dim: 2 });
        let initial = build_network_state(&edge).unwrap();
        let run = run_protocol_from(&edge, initial.clone(), &epr_measure_steps(), &BranchPolicy::All).unwrap();
        assert_eq!(run.branches.len(), 2);
        for b in &run.branches {
            assert!((b.probability - 0.5).abs() < 1e-12);
        }
        assert_eq!(run.normalizations, vec![("z".to_string(), 1.0)]);

        let select = BranchPolicy::Select(vec![Condition {
            key: "z".into(),
            outcome: "1".into(),
        }]);
        let run = run_protocol_from(&edge, initial.clone(), &epr_measure_steps(), &select).unwrap();
        assert_eq!(run.branches.len(), 1);
        assert_eq!(run.branches[0].outcome("z"), Some("1"));

        // keep only one projector: half the mass aborts
        let mut steps = epr_measure_steps();
        if let ProtocolStep::Measure { operators, .. } = &mut steps[0] {
            operators.pop();
        }
        let run = run_protocol_from(&edge, initial, &steps, &BranchPolicy::All).unwrap();
        assert!((run.total_probability() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn malformed_steps_rejected() {
        let edge = net(CanonicalInstance::SingleEdge { dim: 2 });
        let initial = build_network_state(&edge).unwrap();
        let mut steps = epr_measure_steps();
        if let ProtocolStep::Measure { operators, .. } = &mut steps[0] {
            operators[0].matrix[0][0] = Scalar::new(2.0, 0.0);
        }
        assert!(matches!(
            run_protocol_from(&edge, initial.clone(), &steps, &BranchPolicy::All),
            Err(Error::Protocol(_))
        ));
        let wrong_owner = vec![ProtocolStep::Send {
            subsystem: "u@u-v".into(),
            from: "v".into(),
            to: "u".into(),
        }];
        assert!(run_protocol_from(&edge, initial.clone(), &wrong_owner, &BranchPolicy::All).is_err());
        let not_unitary = vec![ProtocolStep::Isometry {
            node: "u".into(),
            inputs: vec!["u@u-v".into()],
            outputs: vec![SubsystemSpec::new("u@u-v", 2)],
            matrix: vec![vec![ONE, ONE], vec![ZERO, ONE]],
            unitary: true,
        }];
        assert!(run_protocol_from(&edge, initial.clone(), &not_unitary, &BranchPolicy::All).is_err());
        let twice = vec![
            ProtocolStep::Send {
                subsystem: "u@u-v".into(),
                from: "u".into(),
                to: "v".into(),
            },
            ProtocolStep::Send {
                subsystem: "u@u-v".into(),
                from: "v".into(),
                to: "u".into(),
            },
        ];
        assert!(run_protocol_from(&edge, initial, &twice, &BranchPolicy::All).is_err());
    }

    #[test]
    fn unitary_preserves_norm() {
        let edge = net(CanonicalInstance::SingleEdge { dim: 2 });
        let initial = build_network_state(&edge).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let steps = vec![ProtocolStep::Isometry {
            node: "v".into(),
            inputs: vec!["v@u-v".into()],
            outputs: vec![SubsystemSpec::new("v@u-v", 2)],
            matrix: vec![vec![Scalar::new(h, 0.0), Scalar::new(h, 0.0)], vec![Scalar::new(h, 0.0), Scalar::new(-h, 0.0)]],
            unitary: true,
        }];
        let run = run_protocol_from(&edge, initial, &steps, &BranchPolicy::All).unwrap();
        assert!((run.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ternary_protocol_distributes_crossing_pairs() {
        let ts = net(CanonicalInstance::TernarySquare);
        let steps = ternary_cross_protocol();
        let measure_at = steps
            .iter()
            .position(|s| matches!(s, ProtocolStep::Measure { .. }))
            .unwrap();
        let before = run_protocol(&ts, &steps[..measure_at], &BranchPolicy::All).unwrap();
        let mid = before.branches[0].state.permuted(&["A_a", "B_b", "C_c", "D_B", "D_C"]).unwrap();
        let dims = mid.amplitudes().dims();
        let mut support = Vec::new();
        let mut idx = vec![0; dims.len()];
        for z in mid.amplitudes().data() {
            if z.norm() > 1e-12 {
                support.push(idx.clone());
            }
            next_index(&mut idx, &dims);
        }
        assert_eq!(
            support,
            vec![vec![0, 0, 0, 0, 2], vec![0, 1, 1, 2, 0], vec![1, 0, 0, 1, 2], vec![1, 1, 1, 2, 1]]
        );

        let run = run_protocol(&ts, &steps, &BranchPolicy::All).unwrap();
        assert_eq!(run.branches.len(), 2);
        assert!((run.total_probability() - 1.0).abs() < 1e-10);
        assert!((run.normalizations[0].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let target = cross_pairs_task(&[("a", "d"), ("b", "c")], &[2, 2], Domain::Complex).unwrap();
        for b in &run.branches {
            let st = client_state(&b.state, &["a", "b", "c", "d"]).unwrap();
            assert!(fidelity(&st, target.tensor()).unwrap() >= 1.0 - 1e-12);
            assert!((b.probability - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn lifted_probabilities() {
        let bf = net(CanonicalInstance::Butterfly);
        let xor = bundled_assignment(BundledAssignment::ButterflyXor).unwrap();
        let p = lifted_success_probability(&bf, &xor, &forward_flow(&bf), &[0.25; 4]).unwrap();
        assert!((p.classical - 1.0).abs() < 1e-12);
        assert!(p.agree(1e-10), "{p:?}");

        let ch = net(CanonicalInstance::Channel {
            left: 2,
            inner: 2,
            right: 2,
        });
        let only_zero = NodeAssignment::from_fn(&ch, Domain::NonNegative, |v, idx| {
            let pass = idx[0] == idx[1] && (v != "U" || idx[0] == 0);
            Scalar::new(if pass { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let p = lifted_success_probability(&ch, &only_zero, &forward_flow(&ch), &[0.5, 0.5]).unwrap();
        assert!((p.classical - 0.5).abs() < 1e-12);
        assert!(p.agree(1e-10), "{p:?}");

        let fuzzy = NodeAssignment::from_fn(&ch, Domain::NonNegative, |_, _| Scalar::new(0.5, 0.0)).unwrap();
        assert!(lifted_success_probability(&ch, &fuzzy, &forward_flow(&ch), &[0.5, 0.5]).is_err());
        let spread = NodeAssignment::from_fn(&ch, Domain::NonNegative, |_, _| ONE).unwrap();
        assert!(lifted_success_probability(&ch, &spread, &forward_flow(&ch), &[0.5, 0.5]).is_err());
    }
}
