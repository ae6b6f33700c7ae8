//! Numerical search for node-tensor factorizations.
//!
//! [`als_search`] runs block coordinate descent over nodes: with every other
//! node fixed, the realized tensor is linear in one node's tensor, so each
//! update is an exact least-squares solve (non-negative least squares in the
//! classical domain). Restarts are independent and seeded per index.
//!
//! A search that finds nothing is evidence, not proof, that no factorization
//! exists.

use crate::error::{Error, Result};
use crate::linalg::{lstsq_complex, nnls, singular_values, CMatrix};
use crate::network::{canonical_instance, CanonicalInstance, Network};
use crate::task::{cross_pairs_task, DistributionTask};
use crate::tensor::{contract, strides, Axis, ContractionPlan, DenseTensor, Domain, Scalar};
use crate::verify::{node_axes, realized_tensor, NodeAssignment};
use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::collections::BTreeMap;

pub const NO_HIT_BANNER: &str = "no factorization found (evidence, not proof)";

const NNLS_KKT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Stop a restart when a sweep improves the residual by less than this fraction.
    pub conv_tol: f64,
    /// Relative residual at or below which a restart counts as a hit.
    pub success_tol: f64,
    pub init_scale: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 100,
            max_sweeps: 2000,
            seed: 0,
            conv_tol: 1e-10,
            success_tol: 1e-6,
            init_scale: 1.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if !(self.conv_tol > 0.0 && self.success_tol > 0.0 && self.init_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances and init_scale must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub index: usize,
    pub assignment: NodeAssignment,
    pub residual: f64,
    pub sweeps: usize,
    /// Why the restart was abandoned, if it was.
    pub aborted: Option<String>,
    /// Relative residual after each node update.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_assignment: NodeAssignment,
    pub best_restart: usize,
    pub best_residual: f64,
    pub residual_per_restart: Vec<f64>,
    pub sweeps_used: Vec<usize>,
    pub aborted: Vec<Option<String>>,
    pub hit: bool,
}

impl SearchResult {
    fn from_outcomes(outcomes: Vec<RestartOutcome>, success_tol: f64) -> Self {
        let mut best = 0;
        for (k, o) in outcomes.iter().enumerate() {
            if o.residual < outcomes[best].residual {
                best = k;
            }
        }
        let best_residual = outcomes[best].residual;
        SearchResult {
            best_assignment: outcomes[best].assignment.clone(),
            best_restart: best,
            best_residual,
            residual_per_restart: outcomes.iter().map(|o| o.residual).collect(),
            sweeps_used: outcomes.iter().map(|o| o.sweeps).collect(),
            aborted: outcomes.iter().map(|o| o.aborted.clone()).collect(),
            hit: best_residual <= success_tol,
        }
    }

    /// Tab-separated per-restart table with header `restart residual sweeps`.
    pub fn table(&self) -> String {
        let mut out = String::from("restart\tresidual\tsweeps\n");
        for (k, (r, s)) in self.residual_per_restart.iter().zip(&self.sweeps_used).enumerate() {
            out.push_str(&format!("{k}\t{r:.6e}\t{s}\n"));
        }
        out
    }
}

/// Per-restart RNG stream: the same (seed, index) always yields the same draws,
/// whatever the thread count.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn random_entry(rng: &mut ChaCha8Rng, domain: Domain, scale: f64) -> Scalar {
    match domain {
        Domain::Complex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Scalar::new(re, im) * (scale * std::f64::consts::FRAC_1_SQRT_2)
        }
        Domain::NonNegative => Scalar::new(rng.random::<f64>() * scale, 0.0),
    }
}

/// Fixed data of one ALS problem.
struct AlsProblem<'a> {
    network: &'a Network,
    domain: Domain,
    nodes: Vec<String>,
    /// Task entries in task axis order, with client tags.
    target: DenseTensor,
    target_norm: f64,
    client_order: Vec<String>,
    deltas: Vec<DenseTensor>,
}

fn edge_tag(label: &str) -> String {
    format!("e:{label}")
}

fn client_tag(id: &str) -> String {
    format!("c:{id}")
}

impl<'a> AlsProblem<'a> {
    fn new(network: &'a Network, task: &DistributionTask, domain: Domain) -> Result<Self> {
        network.ensure_valid()?;
        task.check_against(network)?;
        if !domain.contains(task.domain()) {
            return Err(Error::InvalidTask(format!(
                "a {} task cannot be searched in the {} domain",
                task.domain(),
                domain
            )));
        }
        let mut target = task.tensor().clone();
        for c in task.client_ids() {
            target = target.relabel(c, &client_tag(c))?;
        }
        let mut deltas = Vec::new();
        for e in &network.edges {
            if network.is_client(&e.a) && network.is_client(&e.b) {
                deltas.push(DenseTensor::delta(&[&client_tag(&e.a), &client_tag(&e.b)], e.dim)?);
            }
        }
        Ok(AlsProblem {
            network,
            domain,
            nodes: network.internal_nodes().iter().map(|s| s.to_string()).collect(),
            target_norm: target.norm(),
            target,
            client_order: task.client_ids().iter().map(|s| s.to_string()).collect(),
            deltas,
        })
    }

    /// Node tensor relabeled with internal-edge and client tags.
    fn tagged(&self, node: &str, t: &DenseTensor) -> Result<DenseTensor> {
        let mut out = t.clone();
        for e in self.network.incident_edges(node) {
            let other = e.other(node).expect("incident");
            let tag = if self.network.is_client(other) {
                client_tag(other)
            } else {
                edge_tag(&e.label)
            };
            out = out.relabel(&e.label, &tag)?;
        }
        Ok(out)
    }

    fn residual(&self, tensors: &BTreeMap<String, DenseTensor>) -> Result<f64> {
        let assignment = NodeAssignment::new(tensors.clone(), Domain::Complex)?;
        let realized = realized_tensor(self.network, &assignment)?;
        let mut diff = 0.0;
        let order: Vec<&str> = self.client_order.iter().map(String::as_str).collect();
        let realized = realized.permuted(&order)?;
        for (x, y) in realized.data().iter().zip(self.target.data()) {
            diff += (x - y).norm_sqr();
        }
        Ok(diff.sqrt() / self.target_norm)
    }

    /// Linear map from node `v`'s entries to the task entries, all else fixed.
    fn design(&self, v: &str, tensors: &BTreeMap<String, DenseTensor>) -> Result<CMatrix> {
        let v_tensor = self.tagged(v, &tensors[v])?;
        let v_labels: Vec<String> = v_tensor.labels().iter().map(|s| s.to_string()).collect();
        let v_dims = v_tensor.dims();

        let mut parts = Vec::new();
        for (node, t) in tensors {
            if node != v {
                parts.push(self.tagged(node, t)?);
            }
        }
        parts.extend(self.deltas.iter().cloned());

        // free labels of the environment: v's internal tags, then clients not at v
        let v_internal: Vec<&str> = v_labels.iter().filter(|l| l.starts_with("e:")).map(String::as_str).collect();
        let target_labels: Vec<String> = self.target.labels().iter().map(|s| s.to_string()).collect();
        let other_clients: Vec<&str> = target_labels
            .iter()
            .filter(|l| !v_labels.contains(l))
            .map(String::as_str)
            .collect();
        let mut env_free: Vec<&str> = v_internal.clone();
        env_free.extend(other_clients.iter().copied());

        let env = if parts.is_empty() {
            DenseTensor::scalar(Scalar::new(1.0, 0.0), Domain::NonNegative)?
        } else {
            contract(&ContractionPlan::new(parts.iter().collect(), &env_free)?)?
        };
        let env_dims = env.dims();
        let env_strides = strides(&env_dims);

        let row_dims = self.target.dims();
        let n_rows: usize = row_dims.iter().product();
        let n_cols: usize = v_dims.iter().product();

        // position of each v axis in the target (client axes) or env (internal)
        enum Slot {
            Client(usize),
            Env(usize),
        }
        let v_slots: Vec<Slot> = v_labels
            .iter()
            .map(|l| {
                if l.starts_with("c:") {
                    Slot::Client(target_labels.iter().position(|t| t == l).expect("client in task"))
                } else {
                    Slot::Env(env_free.iter().position(|t| t == l).expect("tag in env"))
                }
            })
            .collect();
        let other_slots: Vec<(usize, usize)> = other_clients
            .iter()
            .map(|l| {
                (
                    target_labels.iter().position(|t| t == l).unwrap(),
                    env_free.iter().position(|t| t == l).unwrap(),
                )
            })
            .collect();

        let mut a = CMatrix::zeros(n_rows, n_cols);
        let mut row_idx = vec![0; row_dims.len()];
        for r in 0..n_rows {
            let mut env_base = 0;
            for (tpos, epos) in &other_slots {
                env_base += row_idx[*tpos] * env_strides[*epos];
            }
            let mut col_idx = vec![0; v_dims.len()];
            for c in 0..n_cols {
                let mut ok = true;
                let mut off = env_base;
                for (k, slot) in v_slots.iter().enumerate() {
                    match slot {
                        Slot::Client(tpos) => {
                            if row_idx[*tpos] != col_idx[k] {
                                ok = false;
                                break;
                            }
                        }
                        Slot::Env(epos) => off += col_idx[k] * env_strides[*epos],
                    }
                }
                if ok {
                    a[(r, c)] = env.data()[off];
                }
                crate::tensor::next_index(&mut col_idx, &v_dims);
            }
            crate::tensor::next_index(&mut row_idx, &row_dims);
        }
        Ok(a)
    }

    fn update_node(&self, v: &str, tensors: &mut BTreeMap<String, DenseTensor>) -> Result<f64> {
        let a = self.design(v, tensors)?;
        let b = DVector::from_column_slice(self.target.data());
        let x: DVector<Scalar> = match self.domain {
            Domain::Complex => lstsq_complex(&a, &b)?,
            Domain::NonNegative => {
                let ar: DMatrix<f64> = a.map(|z| z.re);
                let br: DVector<f64> = b.map(|z| z.re);
                nnls(&ar, &br, NNLS_KKT_TOL)?.map(|v| Scalar::new(v, 0.0))
            }
        };
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("update of node `{v}`")));
        }
        let residual = (&a * &x - &b).norm() / self.target_norm;
        let old = &tensors[v];
        let updated = DenseTensor::new(old.axes().to_vec(), x.iter().copied().collect(), self.domain)?;
        tensors.insert(v.to_string(), updated);
        Ok(residual)
    }

    /// Equalizes node norms without changing the realized tensor.
    fn rebalance(&self, tensors: &mut BTreeMap<String, DenseTensor>) {
        let norms: Vec<f64> = tensors.values().map(DenseTensor::norm).collect();
        if norms.is_empty() || norms.iter().any(|n| *n == 0.0 || !n.is_finite()) {
            return;
        }
        let log_mean = norms.iter().map(|n| n.ln()).sum::<f64>() / norms.len() as f64;
        let target = log_mean.exp();
        for (t, n) in tensors.values_mut().zip(norms) {
            *t = t.scaled(Scalar::new(target / n, 0.0));
        }
    }

    fn run_restart(&self, index: usize, config: &SearchConfig) -> Result<RestartOutcome> {
        let mut rng = restart_rng(config.seed, index);
        let mut tensors = BTreeMap::new();
        for v in &self.nodes {
            let axes = node_axes(self.network, v);
            let t = DenseTensor::from_fn(axes, self.domain, |_| random_entry(&mut rng, self.domain, config.init_scale))?;
            tensors.insert(v.clone(), t);
        }
        let mut prev = self.residual(&tensors)?;
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut aborted = None;
        if !self.nodes.is_empty() {
            while sweeps < config.max_sweeps {
                sweeps += 1;
                let mut current = prev;
                for v in &self.nodes {
                    match self.update_node(v, &mut tensors) {
                        Ok(r) => {
                            current = r;
                            trace.push(r);
                        }
                        Err(e @ (Error::NonFinite(_) | Error::Solve(_))) => {
                            aborted = Some(e.to_string());
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if aborted.is_some() {
                    break;
                }
                self.rebalance(&mut tensors);
                let done = current < 1e-14 || prev - current <= config.conv_tol * prev;
                prev = current;
                if done {
                    break;
                }
            }
        }
        let residual = if aborted.is_some() { f64::INFINITY } else { self.residual(&tensors)? };
        Ok(RestartOutcome {
            index,
            assignment: NodeAssignment::new(tensors, self.domain)?,
            residual,
            sweeps,
            aborted,
            trace,
        })
    }
}

/// Runs a single ALS restart; exposed for inspection of its residual trace.
pub fn als_restart(
    network: &Network,
    task: &DistributionTask,
    domain: Domain,
    config: &SearchConfig,
    index: usize,
) -> Result<RestartOutcome> {
    config.validate()?;
    AlsProblem::new(network, task, domain)?.run_restart(index, config)
}

/// Multi-start alternating least squares for a factorization of `task` over
/// `network` in `domain`.
pub fn als_search(network: &Network, task: &DistributionTask, domain: Domain, config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let problem = AlsProblem::new(network, task, domain)?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|k| problem.run_restart(k, config))
        .collect::<Result<_>>()?;
    Ok(SearchResult::from_outcomes(outcomes, config.success_tol))
}

// ---------------------------------------------------------------------------
// Square network: symmetry-reduced family.

type M2 = Matrix2<Scalar>;

fn c(re: f64) -> Scalar {
    Scalar::new(re, 0.0)
}

/// The reduced family of corner matrices for the cross task on the 2×2 square:
/// `A⁰ = B⁰ = D⁰ = I`, `B¹ = Z`, `A¹` with top-left entry 1, and `C⁰`, `C¹`,
/// `D¹` free. Fifteen complex parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSquare {
    pub a1: M2,
    pub c0: M2,
    pub c1: M2,
    pub d1: M2,
}

pub const REDUCED_PARAMETERS: usize = 15;

impl ReducedSquare {
    pub fn identity() -> Self {
        ReducedSquare {
            a1: M2::identity(),
            c0: M2::identity(),
            c1: M2::identity(),
            d1: M2::identity(),
        }
    }

    pub fn from_params(p: &[Scalar; REDUCED_PARAMETERS]) -> Self {
        ReducedSquare {
            a1: M2::new(c(1.0), p[0], p[1], p[2]),
            c0: M2::new(p[3], p[4], p[5], p[6]),
            c1: M2::new(p[7], p[8], p[9], p[10]),
            d1: M2::new(p[11], p[12], p[13], p[14]),
        }
    }

    pub fn params(&self) -> [Scalar; REDUCED_PARAMETERS] {
        let a = &self.a1;
        [
            a[(0, 1)], a[(1, 0)], a[(1, 1)],
            self.c0[(0, 0)], self.c0[(0, 1)], self.c0[(1, 0)], self.c0[(1, 1)],
            self.c1[(0, 0)], self.c1[(0, 1)], self.c1[(1, 0)], self.c1[(1, 1)],
            self.d1[(0, 0)], self.d1[(0, 1)], self.d1[(1, 0)], self.d1[(1, 1)],
        ]
    }

    /// Corner matrices indexed `[corner][client bit]`, corners in A, B, C, D order.
    pub fn corners(&self) -> [[M2; 2]; 4] {
        let z = M2::new(c(1.0), c(0.0), c(0.0), c(-1.0));
        [
            [M2::identity(), self.a1],
            [M2::identity(), z],
            [self.c0, self.c1],
            [M2::identity(), self.d1],
        ]
    }

    /// Σ |Tr(Aⁱ Bʲ Cᵏ Dˡ) − δ(i,k)δ(j,l)|² over all 16 client strings.
    pub fn objective(&self) -> f64 {
        let [a, b, cc, d] = self.corners();
        let mut f = 0.0;
        for ia in 0..2 {
            for ib in 0..2 {
                for ic in 0..2 {
                    for id in 0..2 {
                        let t = if ia == ic && ib == id { 1.0 } else { 0.0 };
                        let tr = (a[ia] * b[ib] * cc[ic] * d[id]).trace();
                        f += (tr - c(t)).norm_sqr();
                    }
                }
            }
        }
        f
    }

    /// Gradient with respect to the conjugated parameters (∂f/∂p̄), so that
    /// `df = 2 Re Σ conj(g)·dp`.
    pub fn gradient(&self) -> [Scalar; REDUCED_PARAMETERS] {
        let [a, b, cc, d] = self.corners();
        let mut ga1 = M2::zeros();
        let mut gc = [M2::zeros(), M2::zeros()];
        let mut gd1 = M2::zeros();
        for ia in 0..2 {
            for ib in 0..2 {
                for ic in 0..2 {
                    for id in 0..2 {
                        let t = if ia == ic && ib == id { 1.0 } else { 0.0 };
                        let r = (a[ia] * b[ib] * cc[ic] * d[id]).trace() - c(t);
                        // Tr(X M) = Σ X_jk M_kj, so ∂/∂X̄ of |r|² is r·M^H
                        gc[ic] += (d[id] * a[ia] * b[ib]).adjoint() * r;
                        if ia == 1 {
                            ga1 += (b[ib] * cc[ic] * d[id]).adjoint() * r;
                        }
                        if id == 1 {
                            gd1 += (a[ia] * b[ib] * cc[ic]).adjoint() * r;
                        }
                    }
                }
            }
        }
        ReducedSquare {
            a1: ga1,
            c0: gc[0],
            c1: gc[1],
            d1: gd1,
        }
        .params()
    }

    /// Relative residual `‖realized − T‖ / ‖T‖` with `‖T‖ = 2`.
    pub fn residual(&self) -> f64 {
        self.objective().sqrt() / 2.0
    }

    /// Node tensors on `square(2, 2)`. Each corner's matrix rows follow the
    /// incoming cycle edge and columns the outgoing one, so the realized
    /// tensor is the trace of the product.
    pub fn to_assignment(&self) -> Result<NodeAssignment> {
        square_corner_assignment(&self.corners())
    }
}

/// Assignment on `square(2, 2)` from corner matrices `[corner][client bit]`
/// (corners A, B, C, D).
pub fn square_corner_assignment(corners: &[[M2; 2]; 4]) -> Result<NodeAssignment> {
    let mut tensors = BTreeMap::new();
    for (k, (node, client_edge, row_edge, col_edge)) in square_layout().iter().enumerate() {
        let axes = vec![Axis::new(*client_edge, 2), Axis::new(*row_edge, 2), Axis::new(*col_edge, 2)];
        let t = DenseTensor::from_fn(axes, Domain::Complex, |idx| corners[k][idx[0]][(idx[1], idx[2])])?;
        tensors.insert(node.to_string(), t);
    }
    NodeAssignment::new(tensors, Domain::Complex)
}

/// (node, client edge, incoming cycle edge, outgoing cycle edge) per corner.
fn square_layout() -> [(&'static str, &'static str, &'static str, &'static str); 4] {
    [
        ("A", "a-A", "D-A", "A-B"),
        ("B", "b-B", "A-B", "B-C"),
        ("C", "c-C", "B-C", "C-D"),
        ("D", "d-D", "C-D", "D-A"),
    ]
}

pub fn square_network() -> Network {
    canonical_instance(CanonicalInstance::Square { internal: 2, client: 2 }).expect("fixed instance")
}

/// `δ(a,c)·δ(b,d)` over the four corner clients.
pub fn square_cross_task() -> DistributionTask {
    cross_pairs_task(&[("a", "c"), ("b", "d")], &[2, 2], Domain::Complex).expect("fixed task")
}

/// Σ |realized − T|² computed by contracting the reduced family's node tensors.
pub fn reduced_objective_by_contraction(params: &ReducedSquare) -> Result<f64> {
    let net = square_network();
    let realized = realized_tensor(&net, &params.to_assignment()?)?;
    let task = square_cross_task();
    let order = realized.labels();
    let target = task.tensor().permuted(&order)?;
    Ok(realized
        .data()
        .iter()
        .zip(target.data())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}

fn descend(start: ReducedSquare, config: &SearchConfig) -> (ReducedSquare, usize) {
    let mut x = start.params();
    let mut f = ReducedSquare::from_params(&x).objective();
    let mut step = 0.1;
    let mut iters = 0;
    while iters < config.max_sweeps {
        iters += 1;
        let g = ReducedSquare::from_params(&x).gradient();
        let g2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        if g2 == 0.0 || f < 1e-30 {
            break;
        }
        // Armijo backtracking along −g; the directional derivative is −2‖g‖²
        let mut accepted = None;
        let mut t = step * 2.0;
        for _ in 0..60 {
            let mut trial = x;
            for (p, gp) in trial.iter_mut().zip(&g) {
                *p -= gp * t;
            }
            let ft = ReducedSquare::from_params(&trial).objective();
            if ft.is_finite() && ft <= f - 1e-4 * t * 2.0 * g2 {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft)) = accepted else { break };
        step = t;
        let improvement = f - ft;
        x = trial;
        f = ft;
        if improvement <= config.conv_tol * (f + improvement) {
            break;
        }
    }
    (ReducedSquare::from_params(&x), iters)
}

/// Gradient descent over the fifteen-parameter reduced family, multi-start.
pub fn square_cross_reduced_search(config: &SearchConfig) -> Result<SearchResult> {
    config.validate()?;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = restart_rng(config.seed, k);
            let mut p = [Scalar::new(0.0, 0.0); REDUCED_PARAMETERS];
            for z in &mut p {
                *z = random_entry(&mut rng, Domain::Complex, config.init_scale);
            }
            let (best, iters) = descend(ReducedSquare::from_params(&p), config);
            let residual = best.residual();
            let aborted = (!residual.is_finite()).then(|| "non-finite objective".to_string());
            Ok(RestartOutcome {
                index: k,
                assignment: best.to_assignment()?,
                residual: if residual.is_finite() { residual } else { f64::INFINITY },
                sweeps: iters,
                aborted,
                trace: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SearchResult::from_outcomes(outcomes, config.success_tol))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    /// (corner, client bit, numerical rank) for every corner matrix below rank 2.
    pub rank_failures: Vec<(String, usize, usize)>,
    /// Adjacent corner pairs whose four products do not span the 2×2 matrices.
    pub span_failures: Vec<(String, String)>,
}

impl ConditionReport {
    pub fn passes(&self) -> bool {
        self.rank_failures.is_empty() && self.span_failures.is_empty()
    }
}

const CONDITION_RANK_TOL: f64 = 1e-9;

fn numerical_rank_of(m: &CMatrix) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > CONDITION_RANK_TOL * top).count()
}

/// Corner matrices of an assignment on `square(2, 2)`, `[corner][client bit]`.
pub fn square_corner_matrices(assignment: &NodeAssignment) -> Result<[[M2; 2]; 4]> {
    let net = square_network();
    assignment
        .check_against(&net)
        .map_err(|e| Error::ShapeMismatch(format!("not an assignment on square(2,2): {e}")))?;
    let mut out = [[M2::zeros(); 2]; 4];
    for (k, (node, client_edge, row_edge, col_edge)) in square_layout().iter().enumerate() {
        let t = assignment.get(node).expect("checked").permuted(&[client_edge, row_edge, col_edge])?;
        for bit in 0..2 {
            for r in 0..2 {
                for c in 0..2 {
                    out[k][bit][(r, c)] = t.get(&[bit, r, c])?;
                }
            }
        }
    }
    Ok(out)
}

/// Necessary conditions for a square cross-task solution: every corner matrix
/// has rank 2, and for each adjacent pair (X, Y) the products `Xⁱ Yʲ` span the
/// 2×2 matrices. Failing either certifies a non-solution without contraction.
pub fn square_necessary_conditions(assignment: &NodeAssignment) -> Result<ConditionReport> {
    let corners = square_corner_matrices(assignment)?;
    let names = ["A", "B", "C", "D"];
    let mut report = ConditionReport::default();
    for (k, pair) in corners.iter().enumerate() {
        for (bit, m) in pair.iter().enumerate() {
            let dm = CMatrix::from_iterator(2, 2, m.iter().copied());
            let rank = numerical_rank_of(&dm);
            if rank < 2 {
                report.rank_failures.push((names[k].to_string(), bit, rank));
            }
        }
    }
    for k in 0..4 {
        let next = (k + 1) % 4;
        let mut stacked = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let p = corners[k][i] * corners[next][j];
                for (e, z) in p.iter().enumerate() {
                    stacked[(2 * i + j, e)] = *z;
                }
            }
        }
        if numerical_rank_of(&stacked) < 4 {
            report.span_failures.push((names[k].to_string(), names[next].to_string()));
        }
    }
    Ok(report)
}
