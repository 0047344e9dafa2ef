//! Renormalized handed blocks, self-energy counter-terms and the reordered
//! resolvent series, all as dense matrices on the truncated Fock space.
//!
//! `R_0(z)` is the diagonal `1/(e_i - z)`; at `z = 0` the vacuum entry is set
//! to zero. Handedness guarantees that this entry is always multiplied by a
//! vanishing factor, so the choice is a convention, not an approximation.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::linalg::{dense_resolvent, ground_energy, op_norm};
use crate::fock::{Model, SparseOperator};
use crate::signature::{adjoint, classify, enumerate_strings, split_points, totals, Handedness, SignatureString};
use crate::tuple::{canonical_tuple, enumerate_psets, subordinates, PSet, Tuple};

type Mat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest string length for which blocks are assembled.
pub const MAX_BLOCK_LENGTH: usize = 8;

/// Largest order of the resolvent series.
pub const MAX_SERIES_ORDER: usize = 8;

#[derive(Debug, Clone)]
pub struct BlockHandle {
    pub s: SignatureString,
    pub z: Complex64,
    pub operator: Mat,
    /// Ambidextrous blocks only: the product before the vacuum subtraction.
    pub bare_operator: Option<Mat>,
    /// Ambidextrous blocks only: `E_s = -⟨Ω|bare(0)|Ω⟩`.
    pub counterterm: Option<Complex64>,
}

impl BlockHandle {
    pub fn to_sparse(&self) -> SparseOperator {
        SparseOperator::from_dense(&self.operator, 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub s: SignatureString,
    pub splits: Vec<usize>,
    /// `None` when `Split(s)` is a singleton.
    pub max_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntertwineReport {
    pub s: SignatureString,
    /// `‖N_b T - T (N_b - n_a)‖`.
    pub boson: f64,
    /// `‖N_f T - T (N_f - n_b)‖`.
    pub fermion: f64,
    /// `‖T Ω‖` (right-handed), `‖T* Ω‖` (left-handed) or `|⟨Ω|T|Ω⟩|` (ambidextrous).
    pub vacuum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesRow {
    pub k: usize,
    pub term_norm: f64,
    pub cumulative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub order: usize,
    pub k_max: usize,
    pub z: [f64; 2],
    pub rows: Vec<SeriesRow>,
    /// `‖term_{k+1}‖ / ‖term_k‖` for consecutive orders.
    pub ratios: Vec<f64>,
    /// `exp` of the least-squares slope of `ln ‖term_k‖` over `k ≥ 1`.
    pub geometric_rate: Option<f64>,
    /// Set when some ratio is `≥ 1`.
    pub non_convergent: bool,
}

/// Signature text and the bit patterns of `z`.
type BlockKey = (String, (u64, u64));

fn z_key(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

fn check_z(z: Complex64) -> Result<()> {
    if z.re > 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain(format!("spectral parameter needs Re z <= 0, got {z}")));
    }
    Ok(())
}

/// `A · diag(d)`.
fn scale_columns(a: &Mat, d: &[Complex64]) -> Mat {
    let mut out = a.clone();
    for (c, &v) in d.iter().enumerate() {
        out.column_mut(c).iter_mut().for_each(|x| *x *= v);
    }
    out
}

/// `diag(d) · A`.
fn scale_rows(a: &Mat, d: &[Complex64]) -> Mat {
    let mut out = a.clone();
    for (r, &v) in d.iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|x| *x *= v);
    }
    out
}

fn add_identity(a: &Mat, e: Complex64) -> Mat {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += e;
    }
    out
}

fn geometric_rate(norms: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

fn ratios(norms: &[f64]) -> Vec<f64> {
    norms
        .windows(2)
        .map(|w| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] })
        .collect()
}

/// Builds and caches blocks over one model. Cached entries are immutable;
/// concurrent readers share them and a racing second insertion is harmless.
pub struct BlockEngine {
    model: Model,
    terms: [Mat; 4],
    hi: Mat,
    blocks: RwLock<HashMap<BlockKey, Arc<BlockHandle>>>,
    counterterms: RwLock<HashMap<String, Complex64>>,
}

impl BlockEngine {
    pub fn new(model: Model) -> Self {
        let terms = model.terms.clone().map(|t| t.to_dense());
        let hi = model.hi.to_dense();
        Self {
            model,
            terms,
            hi,
            blocks: RwLock::new(HashMap::new()),
            counterterms: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Diagonal of `R_0(z)`; the vacuum entry is zero at `z = 0`.
    pub fn r0_diag(&self, z: Complex64) -> Result<Vec<Complex64>> {
        check_z(z)?;
        Ok(self
            .model
            .h0_diag
            .iter()
            .map(|&e| {
                let d = Complex64::new(e, 0.0) - z;
                if d == ZERO {
                    ZERO
                } else {
                    d.inv()
                }
            })
            .collect())
    }

    pub fn r0(&self, z: Complex64) -> Result<Mat> {
        Ok(Mat::from_diagonal(&DVector::from_vec(self.r0_diag(z)?)))
    }

    fn check_handed(s: &SignatureString) -> Result<Handedness> {
        if s.len() > MAX_BLOCK_LENGTH {
            return Err(Error::BudgetExceeded {
                what: "block length",
                limit: MAX_BLOCK_LENGTH,
                requested: s.len(),
            });
        }
        let class = classify(s);
        if !class.is_handed() {
            return Err(Error::domain(format!("{s} is not handed")));
        }
        Ok(class)
    }

    /// `T_s(z)`, split at the first admissible position.
    pub fn block(&self, s: &SignatureString, z: Complex64) -> Result<Arc<BlockHandle>> {
        check_z(z)?;
        let key = (s.to_string(), z_key(z));
        if let Some(b) = self.blocks.read().expect("block cache").get(&key) {
            return Ok(b.clone());
        }
        let split = if s.len() == 1 { 0 } else { split_points(s)?[0] };
        let built = Arc::new(self.build(s, z, split)?);
        self.blocks.write().expect("block cache").insert(key, built.clone());
        Ok(built)
    }

    /// `T_s(z)` with the outermost split at `j`; inner blocks use the default.
    pub fn block_with_split(&self, s: &SignatureString, z: Complex64, j: usize) -> Result<BlockHandle> {
        check_z(z)?;
        if !split_points(s)?.contains(&j) {
            return Err(Error::domain(format!("{j} is not a split point of {s}")));
        }
        self.build(s, z, j)
    }

    fn bare(&self, s: &SignatureString, z: Complex64, split: usize) -> Result<Mat> {
        if s.len() == 1 {
            return Ok(-self.terms[s.at(1).ordinal()].clone());
        }
        let left = self.block(&s.slice(1, split)?, z)?;
        let right = self.block(&s.slice(split + 1, s.len())?, z)?;
        Ok(scale_columns(&left.operator, &self.r0_diag(z)?) * &right.operator)
    }

    fn build(&self, s: &SignatureString, z: Complex64, split: usize) -> Result<BlockHandle> {
        let class = Self::check_handed(s)?;
        let bare = self.bare(s, z, split)?;
        if class != Handedness::Ambidextrous {
            return Ok(BlockHandle {
                s: s.clone(),
                z,
                operator: bare,
                bare_operator: None,
                counterterm: None,
            });
        }
        let e = if split == self.default_split(s)? {
            self.counterterm_from(s, if z == ZERO { Some(&bare) } else { None })?
        } else {
            let at_zero = if z == ZERO { bare.clone() } else { self.bare(s, ZERO, split)? };
            let v = self.model.basis.vacuum();
            -at_zero[(v, v)]
        };
        Ok(BlockHandle {
            s: s.clone(),
            z,
            operator: add_identity(&bare, e),
            bare_operator: Some(bare),
            counterterm: Some(e),
        })
    }

    fn default_split(&self, s: &SignatureString) -> Result<usize> {
        Ok(if s.len() == 1 { 0 } else { split_points(s)?[0] })
    }

    fn counterterm_from(&self, s: &SignatureString, bare_at_zero: Option<&Mat>) -> Result<Complex64> {
        let key = s.to_string();
        if let Some(e) = self.counterterms.read().expect("counter-term cache").get(&key) {
            return Ok(*e);
        }
        let v = self.model.basis.vacuum();
        let vev = match bare_at_zero {
            Some(b) => b[(v, v)],
            None => self.bare(s, ZERO, self.default_split(s)?)?[(v, v)],
        };
        let e = -vev;
        self.counterterms.write().expect("counter-term cache").insert(key, e);
        Ok(e)
    }

    /// `E_s = -⟨Ω|T_s,bare(0)|Ω⟩` for an ambidextrous `s`.
    pub fn self_energy(&self, s: &SignatureString) -> Result<Complex64> {
        if Self::check_handed(s)? != Handedness::Ambidextrous {
            return Err(Error::domain(format!("{s} is not ambidextrous")));
        }
        self.counterterm_from(s, None)
    }

    /// `E^(2ℓ) = Σ_{s ambidextrous, |s| = 2ℓ} E_s`, indexed by `2ℓ`; entries
    /// at odd indices are zero.
    pub fn self_energy_by_order(&self, order: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; order + 1];
        for len in (2..=order).step_by(2) {
            for s in enumerate_strings(len, Some(Handedness::Ambidextrous))? {
                out[len] += self.self_energy(&s)?;
            }
        }
        Ok(out)
    }

    /// `E^(N) = Σ_{2ℓ ≤ N} E^(2ℓ)`.
    pub fn total_self_energy(&self, order: usize) -> Result<Complex64> {
        Ok(self.self_energy_by_order(order)?.iter().sum())
    }

    pub fn verify_split_independence(&self, s: &SignatureString, z: Complex64) -> Result<SplitReport> {
        let splits = split_points(s)?;
        if splits.len() < 2 {
            return Ok(SplitReport {
                s: s.clone(),
                splits,
                max_discrepancy: None,
            });
        }
        let ops: Vec<Mat> = splits
            .iter()
            .map(|&j| self.block_with_split(s, z, j).map(|b| b.operator))
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for a in 0..ops.len() {
            for b in a + 1..ops.len() {
                worst = worst.max(op_norm(&(&ops[a] - &ops[b])));
            }
        }
        Ok(SplitReport {
            s: s.clone(),
            splits,
            max_discrepancy: Some(worst),
        })
    }

    /// `‖T_s(z)* - T_{s*}(z̄)‖`.
    pub fn adjoint_defect(&self, s: &SignatureString, z: Complex64) -> Result<f64> {
        let t = self.block(s, z)?;
        let ts = self.block(&adjoint(s), z.conj())?;
        Ok(op_norm(&(t.operator.adjoint() - &ts.operator)))
    }

    /// Number-operator intertwining and vacuum annihilation for `T_s(z)`.
    /// Every factor shifts the occupation numbers by a fixed amount, so no
    /// truncation correction is needed.
    pub fn intertwine_check(&self, s: &SignatureString, z: Complex64) -> Result<IntertwineReport> {
        let t = self.block(s, z)?;
        let (na, nb) = totals(s);
        let basis = &self.model.basis;
        let nbos: Vec<Complex64> = (0..basis.dim())
            .map(|i| Complex64::new(basis.boson_number(i) as f64, 0.0))
            .collect();
        let nfer: Vec<Complex64> = (0..basis.dim())
            .map(|i| Complex64::new(basis.fermion_number(i) as f64, 0.0))
            .collect();
        let shifted = |d: &[Complex64], by: i32| -> Vec<Complex64> {
            d.iter().map(|v| v - Complex64::new(f64::from(by), 0.0)).collect()
        };
        let op = &t.operator;
        let boson = op_norm(&(scale_rows(op, &nbos) - scale_columns(op, &shifted(&nbos, na))));
        let fermion = op_norm(&(scale_rows(op, &nfer) - scale_columns(op, &shifted(&nfer, nb))));
        let v = basis.vacuum();
        let vacuum = match classify(s) {
            Handedness::RightHanded => op.column(v).norm(),
            Handedness::LeftHanded => op.row(v).norm(),
            _ => {
                let at_zero = self.block(s, ZERO)?;
                at_zero.operator[(v, v)].norm()
            }
        };
        Ok(IntertwineReport {
            s: s.clone(),
            boson,
            fermion,
            vacuum,
        })
    }

    /// `S_t(z) = R_0(z) ∏ [T_{s_i}(z) R_0(z)]`.
    pub fn summand(&self, t: &Tuple, z: Complex64) -> Result<Mat> {
        check_z(z)?;
        let r0 = self.r0_diag(z)?;
        let mut acc = self.r0(z)?;
        for s in t.blocks() {
            acc = scale_columns(&(acc * &self.block(s, z)?.operator), &r0);
        }
        Ok(acc)
    }

    /// `(∏_{U} E) ∏_i S_{t_i}` with `t_i` the canonical level-`u.n` tuple of
    /// each complementary piece and `R_0` for an empty piece.
    pub fn pset_summand(&self, u: &PSet, z: Complex64) -> Result<Mat> {
        let mut coeff = Complex64::new(1.0, 0.0);
        for &(j, jp) in &u.intervals {
            coeff *= self.self_energy(&u.base.slice(j, jp)?)?;
        }
        let mut acc: Option<Mat> = None;
        for piece in u.complement() {
            let factor = if piece.is_empty() {
                self.r0(z)?
            } else {
                let sub = u.base.slice(piece.l, piece.lp)?;
                self.summand(&canonical_tuple(&sub, u.n)?, z)?
            };
            acc = Some(match acc {
                None => factor,
                Some(a) => a * factor,
            });
        }
        Ok(acc.expect("complement is never empty") * coeff)
    }

    /// `‖S^(n+1)_{s,U0} - Σ_{U ⪯ U0} S^(n)_{s,U}‖`.
    pub fn verify_resummation_step(&self, u0: &PSet, z: Complex64) -> Result<f64> {
        if u0.n == 0 {
            return Err(Error::domain("resummation step needs U0 at level >= 1"));
        }
        let lhs = self.pset_summand(u0, z)?;
        let mut rhs = Mat::zeros(self.dim(), self.dim());
        for u in subordinates(u0, u0.n - 1)? {
            rhs += self.pset_summand(&u, z)?;
        }
        Ok(op_norm(&(lhs - rhs)))
    }

    /// `Σ_{U ∈ P^(1,N,k)_s} S^(1)_{s,U}`: the raw Neumann words with string `s`,
    /// counter-terms included.
    pub fn raw_string_term(&self, s: &SignatureString, order: usize, z: Complex64) -> Result<Mat> {
        let mut acc = Mat::zeros(self.dim(), self.dim());
        for u in enumerate_psets(s, 1, order)? {
            acc += self.pset_summand(&u, z)?;
        }
        Ok(acc)
    }

    /// `(H_Λ - E^(N) - z)^{-1}` by LU.
    pub fn direct_resolvent(&self, order: usize, z: Complex64) -> Result<Mat> {
        let e = self.total_self_energy(order)?;
        let mut h = self.hi.clone();
        for (i, &d) in self.model.h0_diag.iter().enumerate() {
            h[(i, i)] += Complex64::new(d, 0.0) - e;
        }
        dense_resolvent(&h, 0.0, z)
    }

    /// Raw Neumann series of `(H_Λ - E^(N) - z)^{-1}` grouped by the number of
    /// kernels: `term_k = R_0 X_k` with `X_0 = 1` and
    /// `X_k = X_{k-1}(-H_I R_0) + Σ_ℓ E^(2ℓ) X_{k-2ℓ} R_0`.
    pub fn raw_neumann_terms(&self, order: usize, z: Complex64, k_max: usize) -> Result<Vec<Mat>> {
        check_z(z)?;
        let energies = self.self_energy_by_order(order)?;
        let r0 = self.r0_diag(z)?;
        let step = -scale_columns(&self.hi, &r0);
        let mut xs: Vec<Mat> = vec![Mat::identity(self.dim(), self.dim())];
        for k in 1..=k_max {
            let mut x = &xs[k - 1] * &step;
            for len in (2..=order.min(k)).step_by(2) {
                if energies[len] != ZERO {
                    x += scale_columns(&xs[k - len], &r0) * energies[len];
                }
            }
            xs.push(x);
        }
        Ok(xs.iter().map(|x| scale_rows(x, &r0)).collect())
    }

    /// Order-`k` part of the reordered series: one canonical summand per
    /// string of length `k`.
    pub fn reordered_term(&self, order: usize, z: Complex64, k: usize) -> Result<Mat> {
        if k == 0 {
            return self.r0(z);
        }
        if k > MAX_SERIES_ORDER {
            return Err(Error::BudgetExceeded {
                what: "series order",
                limit: MAX_SERIES_ORDER,
                requested: k,
            });
        }
        let strings = enumerate_strings(k, None)?;
        let parts: Vec<Mat> = strings
            .par_iter()
            .map(|s| self.summand(&canonical_tuple(s, order)?, z))
            .collect::<Result<_>>()?;
        let mut acc = Mat::zeros(self.dim(), self.dim());
        for p in parts {
            acc += p;
        }
        Ok(acc)
    }

    pub fn reordered_terms(&self, order: usize, z: Complex64, k_max: usize) -> Result<Vec<Mat>> {
        check_z(z)?;
        (0..=k_max).map(|k| self.reordered_term(order, z, k)).collect()
    }

    /// Partial sum up to `k_max` with per-order norms and residuals against
    /// the direct resolvent.
    pub fn reordered_resolvent(&self, order: usize, z: Complex64, k_max: usize) -> Result<(Mat, SeriesReport)> {
        if z.re >= 0.0 {
            return Err(Error::domain("the series needs Re z < 0"));
        }
        let terms = self.reordered_terms(order, z, k_max)?;
        let direct = self.direct_resolvent(order, z)?;
        let mut partial = Mat::zeros(self.dim(), self.dim());
        let mut rows = Vec::with_capacity(terms.len());
        for (k, t) in terms.iter().enumerate() {
            partial += t;
            rows.push(SeriesRow {
                k,
                term_norm: op_norm(t),
                cumulative_residual: op_norm(&(&partial - &direct)),
            });
        }
        let norms: Vec<f64> = rows.iter().map(|r| r.term_norm).collect();
        let ratios = ratios(&norms);
        let report = SeriesReport {
            order,
            k_max,
            z: [z.re, z.im],
            non_convergent: ratios.iter().any(|&r| r >= 1.0),
            geometric_rate: geometric_rate(&norms),
            ratios,
            rows,
        };
        Ok((partial, report))
    }

    /// Worst ratio `‖term_{k+1}‖/‖term_k‖` over `k = 0, 1, 2` at `z = -zeta`.
    fn leading_ratio(&self, order: usize, zeta: f64) -> Result<f64> {
        let terms = self.raw_neumann_terms(order, Complex64::new(-zeta, 0.0), 3)?;
        let norms: Vec<f64> = terms.iter().map(op_norm).collect();
        Ok(ratios(&norms).into_iter().fold(0.0, f64::max))
    }

    /// Smallest `Z` (to relative precision `1e-6`) with all of the first three
    /// term ratios below `1/2` at `z = -Z`.
    pub fn adaptive_z(&self, order: usize) -> Result<f64> {
        const FLOOR: f64 = 1e-3;
        let mut hi = 1.0;
        while self.leading_ratio(order, hi)? >= 0.5 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NonConvergent("term ratios stay above 1/2".into()));
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { FLOOR };
        if self.leading_ratio(order, lo)? < 0.5 {
            return Ok(lo);
        }
        while (hi - lo) > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if self.leading_ratio(order, mid)? < 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// A real `z ≤ -adaptive_z` at which the tail beyond `k_max`, estimated as
    /// `‖term_{k_max}‖ r/(1-r)` from the largest observed ratio `r`, is below
    /// `tol`. Uses the raw series only, never the direct resolvent.
    pub fn evaluation_point(&self, order: usize, k_max: usize, tol: f64) -> Result<Complex64> {
        let mut zeta = self.adaptive_z(order)?;
        for _ in 0..200 {
            let z = Complex64::new(-zeta, 0.0);
            let norms: Vec<f64> = self.raw_neumann_terms(order, z, k_max)?.iter().map(op_norm).collect();
            let r = ratios(&norms).into_iter().fold(0.0, f64::max);
            if r < 1.0 {
                let tail = norms[k_max] * r / (1.0 - r);
                if tail < tol {
                    return Ok(z);
                }
            }
            zeta *= 1.25;
        }
        Err(Error::NonConvergent("no evaluation point met the tail estimate".into()))
    }

    pub fn ground_energy(&self) -> f64 {
        ground_energy(&self.model.h_lambda())
    }
}
