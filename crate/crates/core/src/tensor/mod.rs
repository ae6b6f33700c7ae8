//! Dense tensors with labeled axes over two scalar domains.
//!
//! Storage is a flat row-major array over the axes in their stored order.
//! Comparisons between tensors go through label lookup, never through
//! positional axis order.

mod contract;

pub use contract::{contract, contract_pair, ContractionPlan};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

pub type Scalar = Complex64;

/// Scalar domain of a tensor: the field of complex numbers or the semiring of
/// non-negative reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "complex")]
    Complex,
    #[serde(rename = "nonneg")]
    NonNegative,
}

impl Domain {
    pub fn admits(self, z: Scalar) -> bool {
        match self {
            Domain::Complex => true,
            Domain::NonNegative => z.im == 0.0 && z.re >= 0.0,
        }
    }

    /// The smallest domain containing both.
    pub fn join(self, other: Domain) -> Domain {
        if self == Domain::NonNegative && other == Domain::NonNegative {
            Domain::NonNegative
        } else {
            Domain::Complex
        }
    }

    /// True when every value of `other` is a value of `self`.
    pub fn contains(self, other: Domain) -> bool {
        self == Domain::Complex || other == Domain::NonNegative
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Complex => f.write_str("complex"),
            Domain::NonNegative => f.write_str("nonneg"),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Domain::Complex),
            "nonneg" => Ok(Domain::NonNegative),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub dim: usize,
}

impl Axis {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Axis {
            label: label.into(),
            dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    axes: Vec<Axis>,
    data: Vec<Scalar>,
    domain: Domain,
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Advances a row-major multi-index; returns false after the last index.
pub(crate) fn next_index(index: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..index.len()).rev() {
        index[k] += 1;
        if index[k] < dims[k] {
            return true;
        }
        index[k] = 0;
    }
    false
}

impl DenseTensor {
    pub fn new(axes: Vec<Axis>, data: Vec<Scalar>, domain: Domain) -> Result<Self> {
        check_axes(&axes)?;
        let expected: usize = axes.iter().map(|a| a.dim).product();
        if data.len() != expected {
            return Err(Error::DataLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|z| !domain.admits(**z)) {
            return Err(Error::DomainViolation {
                value: bad.to_string(),
            });
        }
        Ok(DenseTensor { axes, data, domain })
    }

    pub(crate) fn from_parts_unchecked(axes: Vec<Axis>, data: Vec<Scalar>, domain: Domain) -> Self {
        debug_assert_eq!(data.len(), axes.iter().map(|a| a.dim).product::<usize>());
        DenseTensor { axes, data, domain }
    }

    pub fn zeros(axes: Vec<Axis>, domain: Domain) -> Result<Self> {
        let n = axes.iter().map(|a| a.dim).product();
        Self::new(axes, vec![Scalar::new(0.0, 0.0); n], domain)
    }

    /// Zero-axis tensor holding a single value.
    pub fn scalar(value: Scalar, domain: Domain) -> Result<Self> {
        Self::new(Vec::new(), vec![value], domain)
    }

    pub fn from_fn<F>(axes: Vec<Axis>, domain: Domain, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Scalar,
    {
        check_axes(&axes)?;
        let dims: Vec<usize> = axes.iter().map(|a| a.dim).collect();
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut index = vec![0; dims.len()];
        for _ in 0..n {
            data.push(f(&index));
            next_index(&mut index, &dims);
        }
        Self::new(axes, data, domain)
    }

    pub fn from_real(axes: Vec<Axis>, values: &[f64], domain: Domain) -> Result<Self> {
        let data = values.iter().map(|&v| Scalar::new(v, 0.0)).collect();
        Self::new(axes, data, domain)
    }

    /// Real matrix with rows along `row_label` and columns along `col_label`.
    pub fn matrix(row_label: &str, col_label: &str, rows: &[Vec<f64>], domain: Domain) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_real(
            vec![Axis::new(row_label, rows.len()), Axis::new(col_label, n_cols)],
            &flat,
            domain,
        )
    }

    /// Generalized Kronecker delta: 1 iff all indices agree.
    pub fn delta(labels: &[&str], dim: usize) -> Result<Self> {
        let axes = labels.iter().map(|l| Axis::new(*l, dim)).collect();
        Self::from_fn(axes, Domain::NonNegative, |idx| {
            let hit = idx.windows(2).all(|w| w[0] == w[1]);
            Scalar::new(if hit { 1.0 } else { 0.0 }, 0.0)
        })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.label.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.dim).collect()
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Scalar> {
        self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn axis_position(&self, label: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.axes.iter().find(|a| a.label == label).map(|a| a.dim)
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.axes.len() {
            return Err(Error::ShapeMismatch(format!(
                "index of length {} for a rank-{} tensor",
                index.len(),
                self.axes.len()
            )));
        }
        let mut off = 0;
        for (i, axis) in index.iter().zip(&self.axes) {
            if *i >= axis.dim {
                return Err(Error::ShapeMismatch(format!(
                    "index {i} out of range for axis `{}` of dim {}",
                    axis.label, axis.dim
                )));
            }
            off = off * axis.dim + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<Scalar> {
        Ok(self.data[self.offset(index)?])
    }

    /// Entry lookup by label; `assignment` pairs labels with index values.
    pub fn get_labeled(&self, assignment: &[(&str, usize)]) -> Result<Scalar> {
        let mut index = vec![0; self.axes.len()];
        let mut seen = 0;
        for (label, value) in assignment {
            if let Some(p) = self.axis_position(label) {
                index[p] = *value;
                seen += 1;
            }
        }
        if seen != self.axes.len() {
            return Err(Error::ShapeMismatch("labeled lookup does not cover every axis".into()));
        }
        self.get(&index)
    }

    pub fn set(&mut self, index: &[usize], value: Scalar) -> Result<()> {
        if !self.domain.admits(value) {
            return Err(Error::DomainViolation {
                value: value.to_string(),
            });
        }
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiplies every entry by `s`; the result is complex unless `s` is a
    /// non-negative real and the tensor already is.
    pub fn scaled(&self, s: Scalar) -> DenseTensor {
        let domain = if Domain::NonNegative.admits(s) {
            self.domain
        } else {
            Domain::Complex
        };
        DenseTensor {
            axes: self.axes.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
            domain,
        }
    }

    /// Same entries tagged with another domain; fails if an entry is not admitted.
    pub fn with_domain(&self, domain: Domain) -> Result<DenseTensor> {
        Self::new(self.axes.clone(), self.data.clone(), domain)
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<DenseTensor> {
        let mut axes = self.axes.clone();
        let pos = self
            .axis_position(from)
            .ok_or_else(|| Error::UnknownLabel(from.to_string()))?;
        axes[pos].label = to.to_string();
        check_axes(&axes)?;
        Ok(DenseTensor {
            axes,
            data: self.data.clone(),
            domain: self.domain,
        })
    }

    /// Reorders the axes to the given label order.
    pub fn permuted(&self, order: &[&str]) -> Result<DenseTensor> {
        if order.len() != self.axes.len() {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for a rank-{} tensor",
                order.len(),
                self.axes.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.axis_position(l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
            .collect::<Result<_>>()?;
        let mut seen = HashSet::new();
        if !perm.iter().all(|p| seen.insert(*p)) {
            return Err(Error::ShapeMismatch("permutation repeats a label".into()));
        }
        if perm.iter().enumerate().all(|(k, p)| k == *p) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.dims());
        let new_axes: Vec<Axis> = perm.iter().map(|&p| self.axes[p].clone()).collect();
        let new_dims: Vec<usize> = new_axes.iter().map(|a| a.dim).collect();
        let step: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut index = vec![0; new_dims.len()];
        for _ in 0..self.data.len() {
            let off: usize = index.iter().zip(&step).map(|(i, s)| i * s).sum();
            data.push(self.data[off]);
            next_index(&mut index, &new_dims);
        }
        Ok(DenseTensor {
            axes: new_axes,
            data,
            domain: self.domain,
        })
    }

    /// Axes sorted by label.
    pub fn canonical(&self) -> DenseTensor {
        let mut order = self.labels();
        order.sort_unstable();
        self.permuted(&order).expect("labels are distinct")
    }

    /// Entrywise negativity violations, as (multi-index, value) pairs.
    pub fn nonnegativity_violations(&self) -> Vec<(Vec<usize>, Scalar)> {
        let dims = self.dims();
        let mut out = Vec::new();
        let mut index = vec![0; dims.len()];
        for z in &self.data {
            if !Domain::NonNegative.admits(*z) {
                out.push((index.clone(), *z));
            }
            next_index(&mut index, &dims);
        }
        out
    }

    /// Outer product; labels must be disjoint.
    pub fn outer(&self, other: &DenseTensor) -> Result<DenseTensor> {
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        check_axes(&axes)?;
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Ok(DenseTensor {
            axes,
            data,
            domain: self.domain.join(other.domain),
        })
    }
}

fn check_axes(axes: &[Axis]) -> Result<()> {
    let mut seen = HashSet::new();
    for axis in axes {
        if axis.dim == 0 {
            return Err(Error::ZeroDim {
                label: axis.label.clone(),
            });
        }
        if !seen.insert(axis.label.as_str()) {
            return Err(Error::DuplicateLabel(axis.label.clone()));
        }
    }
    Ok(())
}

fn aligned<'a>(a: &DenseTensor, b: &'a DenseTensor) -> Result<std::borrow::Cow<'a, DenseTensor>> {
    let mut la = a.labels();
    let mut lb = b.labels();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return Err(Error::ShapeMismatch(format!("labels {la:?} vs {lb:?}")));
    }
    for axis in a.axes() {
        if b.dim_of(&axis.label) != Some(axis.dim) {
            return Err(Error::ShapeMismatch(format!("axis `{}` dims differ", axis.label)));
        }
    }
    if a.labels() == b.labels() {
        Ok(std::borrow::Cow::Borrowed(b))
    } else {
        Ok(std::borrow::Cow::Owned(b.permuted(&a.labels())?))
    }
}

/// Frobenius distance between two tensors with the same labels and dims.
pub fn frobenius_distance(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    let b = aligned(a, b)?;
    Ok(a.data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Least-squares scale fit of `candidate ≈ scale · target`.
///
/// `residual` is `‖candidate − scale·target‖ / ‖candidate‖`, the sine of the
/// angle between the two tensors, so it does not depend on either tensor's
/// normalization. A zero candidate gets residual 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFit {
    pub scale: Scalar,
    pub residual: f64,
    pub admissible: bool,
}

impl ScaleFit {
    pub fn matched(&self, tol: f64) -> bool {
        self.admissible && self.residual <= tol
    }
}

pub fn fit_scale(candidate: &DenseTensor, target: &DenseTensor, domain: Domain) -> Result<ScaleFit> {
    let target_aligned = aligned(candidate, target)?;
    let t_norm_sqr: f64 = target_aligned.data.iter().map(|z| z.norm_sqr()).sum();
    if t_norm_sqr == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let inner: Scalar = target_aligned
        .data
        .iter()
        .zip(&candidate.data)
        .map(|(t, c)| t.conj() * c)
        .sum();
    let scale = inner / t_norm_sqr;
    let diff: f64 = candidate
        .data
        .iter()
        .zip(target_aligned.data.iter())
        .map(|(c, t)| (c - scale * t).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let c_norm = candidate.norm();
    let residual = if c_norm == 0.0 { 1.0 } else { diff / c_norm };
    let admissible = match domain {
        Domain::Complex => scale.norm() > 0.0,
        // imaginary part of the fit is rounding noise when both tensors are real
        Domain::NonNegative => scale.re > 0.0 && scale.im.abs() <= 1e-12 * scale.re,
    };
    Ok(ScaleFit {
        scale,
        residual,
        admissible,
    })
}

/// Returns the fit when `candidate` equals an admissible multiple of `target`
/// within relative residual `tol`.
pub fn match_up_to_scale(
    candidate: &DenseTensor,
    target: &DenseTensor,
    domain: Domain,
    tol: f64,
) -> Result<Option<ScaleFit>> {
    let fit = fit_scale(candidate, target, domain)?;
    Ok(fit.matched(tol).then_some(fit))
}
