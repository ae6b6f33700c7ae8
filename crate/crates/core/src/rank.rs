//! Matrix rank over the complex field versus the non-negative reals.
//!
//! Ordinary rank comes from singular values. Non-negative rank is bracketed:
//! below by the larger of rank and a maximum fooling set, above by the
//! smallest inner dimension at which non-negative ALS reproduces the matrix
//! (falling back to the trivial factorization through the identity).

use crate::error::{Error, Result};
use crate::linalg::{lstsq_real, singular_values, to_cmatrix, to_rmatrix};
use crate::network::{canonical_instance, CanonicalInstance};
use crate::search::{als_search, SearchConfig};
use crate::task::task_from_matrix;
use crate::tensor::{contract_pair, fit_scale, DenseTensor, Domain};
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Exhaustive fooling-set search is limited to this many positive entries.
pub const FOOLING_SET_MAX_POSITIVE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub tol_used: f64,
}

/// Counts singular values above `tol` times the largest one.
pub fn numerical_rank(m: &DenseTensor, tol: f64) -> Result<RankReport> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    let cm = to_cmatrix(m)?;
    let sv = singular_values(&cm);
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = if top == 0.0 { 0 } else { sv.iter().filter(|s| **s > tol * top).count() };
    Ok(RankReport {
        rank,
        singular_values: sv,
        tol_used: tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForcedCombination {
    /// `row₄ = λ·row₁ + μ·row₂ + ν·row₃`.
    Coefficients {
        lambda: f64,
        mu: f64,
        nu: f64,
        residual: f64,
        /// A negative coefficient: the last row is not a conic combination of
        /// the first three.
        negative: bool,
    },
    RowsDependent,
}

/// Solves for the coefficients expressing the fourth row through the first
/// three. When the first three rows are independent the coefficients are the
/// same for every rank-3 factorization, so their signs constrain any
/// non-negative one.
pub fn forced_row_combination(m: &DenseTensor, tol: f64) -> Result<ForcedCombination> {
    let rm = to_rmatrix(m)?;
    if rm.nrows() != 4 {
        return Err(Error::ShapeMismatch(format!("expected 4 rows, got {}", rm.nrows())));
    }
    let head = rm.rows(0, 3).into_owned();
    let head_sv = head.singular_values();
    let head_rank = head_sv.iter().filter(|v| **v > tol * head_sv.max()).count();
    if head_rank < 3 {
        return Ok(ForcedCombination::RowsDependent);
    }
    let basis = head.transpose(); // n × 3
    let last: DVector<f64> = rm.row(3).transpose();
    let coeffs = lstsq_real(&basis, &last)?;
    let residual = (&basis * &coeffs - &last).norm() / last.norm().max(f64::MIN_POSITIVE);
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    let (lambda, mu, nu) = (coeffs[0], coeffs[1], coeffs[2]);
    Ok(ForcedCombination::Coefficients {
        lambda,
        mu,
        nu,
        residual,
        negative: [lambda, mu, nu].iter().any(|c| *c < -tol),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoolingSet {
    pub size: usize,
    /// (row, column) positions.
    pub witness: Vec<(usize, usize)>,
}

fn check_nonnegative(m: &DenseTensor) -> Result<DMatrix<f64>> {
    let rm = to_rmatrix(m)?;
    for r in 0..rm.nrows() {
        for c in 0..rm.ncols() {
            if rm[(r, c)] < 0.0 || !rm[(r, c)].is_finite() {
                return Err(Error::NegativeEntry(vec![r, c]));
            }
        }
    }
    Ok(rm)
}

/// True when every position is positive and every pair (i,j), (k,l) has
/// `m[i,l]·m[k,j] = 0`.
pub fn is_fooling_set(m: &DenseTensor, witness: &[(usize, usize)]) -> Result<bool> {
    let rm = to_rmatrix(m)?;
    for (p, &(i, j)) in witness.iter().enumerate() {
        if i >= rm.nrows() || j >= rm.ncols() || rm[(i, j)] <= 0.0 {
            return Ok(false);
        }
        for &(k, l) in &witness[p + 1..] {
            if rm[(i, l)] * rm[(k, j)] != 0.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest fooling set of size at most `max_size`, by exhaustive search.
/// Among maximum sets, returns the first in row-major order.
pub fn fooling_set_lower_bound(m: &DenseTensor, max_size: usize) -> Result<FoolingSet> {
    let rm = check_nonnegative(m)?;
    let positions: Vec<(usize, usize)> = (0..rm.nrows())
        .flat_map(|r| (0..rm.ncols()).map(move |c| (r, c)))
        .filter(|&(r, c)| rm[(r, c)] > 0.0)
        .collect();
    if positions.len() > FOOLING_SET_MAX_POSITIVE {
        return Err(Error::InvalidParameter(format!(
            "{} positive entries exceed the exhaustive-search cap of {FOOLING_SET_MAX_POSITIVE}",
            positions.len()
        )));
    }
    let n = positions.len();
    let mut compatible = vec![0u64; n];
    for a in 0..n {
        for b in 0..n {
            let ((i, j), (k, l)) = (positions[a], positions[b]);
            if a != b && rm[(i, l)] * rm[(k, j)] == 0.0 {
                compatible[a] |= 1 << b;
            }
        }
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = Vec::new();
    let mut current = Vec::new();
    extend_clique(&compatible, all, &mut current, &mut best, max_size);
    let witness: Vec<(usize, usize)> = best.iter().map(|&k| positions[k]).collect();
    Ok(FoolingSet {
        size: witness.len(),
        witness,
    })
}

fn extend_clique(adj: &[u64], candidates: u64, current: &mut Vec<usize>, best: &mut Vec<usize>, cap: usize) {
    if current.len() > best.len() {
        *best = current.clone();
    }
    if best.len() >= cap {
        return;
    }
    let mut rest = candidates;
    while rest != 0 {
        if current.len() + rest.count_ones() as usize <= best.len() {
            return;
        }
        let v = rest.trailing_zeros() as usize;
        rest &= !(1 << v);
        current.push(v);
        extend_clique(adj, rest & adj[v], current, best, cap);
        current.pop();
        if best.len() >= cap {
            return;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LowerWitness {
    Rank(RankReport),
    FoolingSet(FoolingSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NNRankBounds {
    pub lower: usize,
    pub lower_witness: LowerWitness,
    pub upper: usize,
    /// Non-negative factors `(W, H)` with `W·H` equal to the matrix up to a
    /// positive scale; W has axes (row label, `k`), H has (`k`, column label).
    pub upper_witness: (DenseTensor, DenseTensor),
    /// Lower and upper bounds differ and the searches in between failed; a
    /// failed search is not a proof.
    pub inconclusive_gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsConfig {
    pub search: SearchConfig,
    pub rank_tol: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            search: SearchConfig::default(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

const INNER: &str = "k";

fn factor_pair(m: &DenseTensor, w: DMatrix<f64>, h: DMatrix<f64>) -> Result<(DenseTensor, DenseTensor)> {
    let labels = m.labels();
    let rows: Vec<Vec<f64>> = (0..w.nrows()).map(|r| w.row(r).iter().copied().collect()).collect();
    let cols: Vec<Vec<f64>> = (0..h.nrows()).map(|r| h.row(r).iter().copied().collect()).collect();
    Ok((
        DenseTensor::matrix(labels[0], INNER, &rows, Domain::NonNegative)?,
        DenseTensor::matrix(INNER, labels[1], &cols, Domain::NonNegative)?,
    ))
}

/// Relative residual of `W·H` against `m` up to a positive scale.
pub fn factor_pair_residual(m: &DenseTensor, pair: &(DenseTensor, DenseTensor)) -> Result<f64> {
    let product = contract_pair(&pair.0, &pair.1)?;
    let fit = fit_scale(&product, m, Domain::NonNegative)?;
    Ok(if fit.admissible { fit.residual } else { f64::INFINITY })
}

fn rank_one_attempt(rm: &DMatrix<f64>, success_tol: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    // the leading singular pair of a non-negative matrix can be taken non-negative
    let svd = rm.clone().svd(true, true);
    let k = (0..svd.singular_values.len()).max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))?;
    let s = svd.singular_values[k];
    let u = svd.u.as_ref()?.column(k).map(f64::abs);
    let v = svd.v_t.as_ref()?.row(k).map(f64::abs);
    let w = DMatrix::from_column_slice(rm.nrows(), 1, (u * s).as_slice());
    let h = DMatrix::from_row_slice(1, rm.ncols(), v.transpose().as_slice());
    let err = (&w * &h - rm).norm() / rm.norm();
    (err <= success_tol).then_some((w, h))
}

/// Brackets the non-negative rank of `m`.
pub fn nonneg_rank_bounds(m: &DenseTensor, config: &BoundsConfig) -> Result<NNRankBounds> {
    let rm = check_nonnegative(m)?;
    let (rows, cols) = (rm.nrows(), rm.ncols());
    let trivial = rows.min(cols);
    let rank = numerical_rank(m, config.rank_tol)?;
    let fooling = fooling_set_lower_bound(m, trivial)?;
    let (lower, lower_witness) = if fooling.size > rank.rank {
        (fooling.size, LowerWitness::FoolingSet(fooling))
    } else {
        (rank.rank, LowerWitness::Rank(rank))
    };
    if lower == 0 {
        return Ok(NNRankBounds {
            lower: 0,
            lower_witness,
            upper: 0,
            upper_witness: factor_pair(m, DMatrix::zeros(rows, 0), DMatrix::zeros(0, cols))?,
            inconclusive_gap: false,
        });
    }

    let mut searched_and_failed = false;
    for r in lower..trivial {
        let found = if r == 1 {
            rank_one_attempt(&rm, config.search.success_tol)
        } else {
            nmf_via_channel(m, &rm, r, &config.search)?
        };
        if let Some((w, h)) = found {
            return Ok(NNRankBounds {
                lower,
                lower_witness,
                upper: r,
                upper_witness: factor_pair(m, w, h)?,
                inconclusive_gap: searched_and_failed,
            });
        }
        searched_and_failed = true;
    }
    let (w, h) = if rows <= cols {
        (DMatrix::identity(rows, rows), rm.clone())
    } else {
        (rm.clone(), DMatrix::identity(cols, cols))
    };
    Ok(NNRankBounds {
        lower,
        lower_witness,
        upper: trivial,
        upper_witness: factor_pair(m, w, h)?,
        inconclusive_gap: lower < trivial,
    })
}

/// Non-negative ALS on the two-party channel of inner dimension `r`.
fn nmf_via_channel(
    m: &DenseTensor,
    rm: &DMatrix<f64>,
    r: usize,
    search: &SearchConfig,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
    let (rows, cols) = (rm.nrows(), rm.ncols());
    let net = canonical_instance(CanonicalInstance::Channel { left: rows, inner: r, right: cols })?;
    let labels = m.labels();
    let as_task = m.relabel(labels[0], "#row")?.relabel(labels[1], "#col")?;
    let as_task = as_task.relabel("#row", "u")?.relabel("#col", "v")?;
    let task = task_from_matrix(&as_task, Domain::NonNegative)?;
    let result = als_search(&net, &task, Domain::NonNegative, search)?;
    if !result.hit {
        return Ok(None);
    }
    let u = result.best_assignment.get("U").expect("channel node").permuted(&["u-U", "U-V"])?;
    let v = result.best_assignment.get("V").expect("channel node").permuted(&["U-V", "V-v"])?;
    let w = DMatrix::from_row_slice(rows, r, &u.data().iter().map(|z| z.re).collect::<Vec<_>>());
    let h = DMatrix::from_row_slice(r, cols, &v.data().iter().map(|z| z.re).collect::<Vec<_>>());
    Ok(Some((w, h)))
}

/// A complex (indeed real, with one negative entry) rank-3 factorization
/// `C·F` of the unnormalized typewriter matrix. C has axes (`u`, `k`), F has
/// (`k`, `v`).
pub fn complex_compression_pair() -> (DenseTensor, DenseTensor) {
    let c = DenseTensor::matrix(
        "u",
        INNER,
        &[vec![1., 1., 0.], vec![0., 1., 1.], vec![0., 0., 1.], vec![1., 0., 0.]],
        Domain::Complex,
    )
    .expect("constant");
    let f = DenseTensor::matrix(
        INNER,
        "v",
        &[vec![1., 0., 0., 1.], vec![0., 1., 0., -1.], vec![0., 0., 1., 1.]],
        Domain::Complex,
    )
    .expect("constant");
    (c, f)
}
