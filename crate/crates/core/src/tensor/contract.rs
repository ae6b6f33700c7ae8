//! Labeled-axis contraction with a greedy pairwise schedule.

use super::{Axis, DenseTensor, Domain, Scalar};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, HashSet};

/// Tensors to contract, the labels summed over, and the output label order.
///
/// Every bond label occurs in exactly two tensors with equal dims; every free
/// label occurs in exactly one.
#[derive(Debug, Clone)]
pub struct ContractionPlan<'a> {
    tensors: Vec<&'a DenseTensor>,
    bonds: Vec<String>,
    free: Vec<String>,
}

impl<'a> ContractionPlan<'a> {
    /// Builds a plan, inferring bonds as the labels shared by two tensors.
    /// `free` must list exactly the remaining labels, in the desired output order.
    pub fn new(tensors: Vec<&'a DenseTensor>, free: &[&str]) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::EmptyPlan);
        }
        let mut occurrences: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for t in &tensors {
            for axis in t.axes() {
                occurrences.entry(axis.label.as_str()).or_default().push(axis.dim);
            }
        }
        let mut seen_free = HashSet::new();
        for label in free {
            if !seen_free.insert(*label) {
                return Err(Error::DuplicateFree(label.to_string()));
            }
            match occurrences.get(label).map(Vec::len) {
                Some(1) => {}
                Some(count) => {
                    return Err(Error::LabelMultiplicity {
                        label: label.to_string(),
                        count,
                    })
                }
                None => return Err(Error::UnknownLabel(label.to_string())),
            }
        }
        let mut bonds = Vec::new();
        for (label, dims) in &occurrences {
            match dims.len() {
                1 if seen_free.contains(label) => {}
                1 => {
                    return Err(Error::ShapeMismatch(format!(
                        "label `{label}` is neither bonded nor listed as free"
                    )))
                }
                2 if dims[0] != dims[1] => {
                    return Err(Error::BondDimMismatch {
                        label: label.to_string(),
                        left: dims[0],
                        right: dims[1],
                    })
                }
                2 => bonds.push(label.to_string()),
                count => {
                    return Err(Error::LabelMultiplicity {
                        label: label.to_string(),
                        count,
                    })
                }
            }
        }
        Ok(ContractionPlan {
            tensors,
            bonds,
            free: free.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Plan whose free labels are every unpaired label, in first-seen order.
    pub fn open(tensors: Vec<&'a DenseTensor>) -> Result<Self> {
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        let mut order = Vec::new();
        for t in &tensors {
            for l in t.labels() {
                let c = count.entry(l).or_insert(0);
                if *c == 0 {
                    order.push(l);
                }
                *c += 1;
            }
        }
        let free: Vec<&str> = order.into_iter().filter(|l| count[l] == 1).collect();
        Self::new(tensors, &free)
    }

    pub fn tensors(&self) -> &[&'a DenseTensor] {
        &self.tensors
    }

    pub fn bonds(&self) -> &[String] {
        &self.bonds
    }

    pub fn free(&self) -> &[String] {
        &self.free
    }
}

/// Contracts two tensors over all labels they share.
///
/// Output axes are the unshared axes of `a` followed by those of `b`.
pub fn contract_pair(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let b_labels: HashSet<&str> = b.labels().into_iter().collect();
    let shared: Vec<&str> = a.labels().into_iter().filter(|l| b_labels.contains(l)).collect();
    for l in &shared {
        let (da, db) = (a.dim_of(l).unwrap(), b.dim_of(l).unwrap());
        if da != db {
            return Err(Error::BondDimMismatch {
                label: l.to_string(),
                left: da,
                right: db,
            });
        }
    }
    let shared_set: HashSet<&str> = shared.iter().copied().collect();
    let a_free: Vec<&Axis> = a.axes().iter().filter(|x| !shared_set.contains(x.label.as_str())).collect();
    let b_free: Vec<&Axis> = b.axes().iter().filter(|x| !shared_set.contains(x.label.as_str())).collect();

    let a_order: Vec<&str> = a_free.iter().map(|x| x.label.as_str()).chain(shared.iter().copied()).collect();
    let b_order: Vec<&str> = shared.iter().copied().chain(b_free.iter().map(|x| x.label.as_str())).collect();
    let ap = a.permuted(&a_order)?;
    let bp = b.permuted(&b_order)?;

    let m: usize = a_free.iter().map(|x| x.dim).product();
    let k: usize = shared.iter().map(|l| a.dim_of(l).unwrap()).product();
    let n: usize = b_free.iter().map(|x| x.dim).product();

    let (ad, bd) = (ap.data(), bp.data());
    let mut out = vec![Scalar::new(0.0, 0.0); m * n];
    for i in 0..m {
        let row = &ad[i * k..(i + 1) * k];
        let dst = &mut out[i * n..(i + 1) * n];
        for (p, x) in row.iter().enumerate() {
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (d, y) in dst.iter_mut().zip(brow) {
                *d += x * y;
            }
        }
    }

    let axes: Vec<Axis> = a_free.into_iter().chain(b_free).cloned().collect();
    let domain = a.domain().join(b.domain());
    if domain == Domain::NonNegative {
        for z in &mut out {
            z.im = 0.0;
        }
    }
    let mut labels = HashSet::new();
    for axis in &axes {
        if !labels.insert(axis.label.as_str()) {
            return Err(Error::DuplicateLabel(axis.label.clone()));
        }
    }
    Ok(DenseTensor::from_parts_unchecked(axes, out, domain))
}

fn pair_output_size(a: &DenseTensor, b: &DenseTensor) -> usize {
    let la: HashSet<&str> = a.labels().into_iter().collect();
    let lb: HashSet<&str> = b.labels().into_iter().collect();
    a.axes()
        .iter()
        .filter(|x| !lb.contains(x.label.as_str()))
        .chain(b.axes().iter().filter(|x| !la.contains(x.label.as_str())))
        .map(|x| x.dim)
        .product()
}

/// Contracts every bond of the plan, returning a tensor over the free labels
/// in plan order.
///
/// Pairs are merged greedily, smallest intermediate first; ties go to the
/// lowest pair of positions.
pub fn contract(plan: &ContractionPlan<'_>) -> Result<DenseTensor> {
    let mut work: Vec<DenseTensor> = plan.tensors.iter().map(|t| (*t).clone()).collect();
    while work.len() > 1 {
        let mut best = (usize::MAX, 0, 1);
        for i in 0..work.len() {
            for j in i + 1..work.len() {
                let size = pair_output_size(&work[i], &work[j]);
                if size < best.0 {
                    best = (size, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let b = work.remove(j);
        let a = work.remove(i);
        work.push(contract_pair(&a, &b)?);
    }
    let result = work.pop().expect("plan is non-empty");
    let free: Vec<&str> = plan.free.iter().map(String::as_str).collect();
    result.permuted(&free)
}
