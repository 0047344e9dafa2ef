use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::basis::FockBasis;
use super::config::ModelConfig;
use super::grid::MomentumGrid;
use super::kernel::{build_kernels, dispersion_a, dispersion_b, KernelSet};
use super::sparse::SparseOperator;
use crate::error::{Error, Result};
use crate::signature::Signature;

/// Jordan–Wigner parity of the occupied modes below `mode`.
fn jw_sign(mask: u32, mode: usize) -> f64 {
    if (mask & ((1u32 << mode) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Boson annihilation (`create = false`) or creation on `mode`. Creation
/// beyond the cap is dropped.
fn apply_boson(basis: &FockBasis, bosons: &mut [u8], mode: usize, create: bool) -> Option<f64> {
    let n = bosons[mode] as usize;
    if create {
        let total: usize = bosons.iter().map(|&x| x as usize).sum();
        if total >= basis.boson_cap() {
            return None;
        }
        bosons[mode] += 1;
        Some(((n + 1) as f64).sqrt())
    } else {
        if n == 0 {
            return None;
        }
        bosons[mode] -= 1;
        Some((n as f64).sqrt())
    }
}

fn apply_fermion(mask: u32, mode: usize, create: bool) -> Option<(u32, f64)> {
    let bit = 1u32 << mode;
    let occupied = mask & bit != 0;
    if occupied == create {
        return None;
    }
    Some((mask ^ bit, jw_sign(mask, mode)))
}

/// Ladder operators and number operators over a basis.
#[derive(Debug, Clone)]
pub struct LadderFamily {
    pub a: Vec<SparseOperator>,
    pub a_dag: Vec<SparseOperator>,
    pub b: Vec<SparseOperator>,
    pub b_dag: Vec<SparseOperator>,
    pub n_b: SparseOperator,
    pub n_f: SparseOperator,
}

fn boson_op(basis: &FockBasis, mode: usize, create: bool) -> SparseOperator {
    let mut t = Vec::new();
    for col in 0..basis.dim() {
        let (bos, mask) = basis.state(col);
        let mut bos = bos.to_vec();
        if let Some(amp) = apply_boson(basis, &mut bos, mode, create) {
            let row = basis.index(&bos, mask).expect("capped configuration exists");
            t.push((row, col, Complex64::new(amp, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.dim(), t)
}

fn fermion_op(basis: &FockBasis, mode: usize, create: bool) -> SparseOperator {
    let mut t = Vec::new();
    for col in 0..basis.dim() {
        let (bos, mask) = basis.state(col);
        if let Some((m2, sign)) = apply_fermion(mask, mode, create) {
            let row = basis.index(bos, m2).expect("fermion configuration exists");
            t.push((row, col, Complex64::new(sign, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.dim(), t)
}

pub fn build_operators(basis: &FockBasis) -> LadderFamily {
    let modes = 0..basis.modes();
    LadderFamily {
        a: modes.clone().map(|i| boson_op(basis, i, false)).collect(),
        a_dag: modes.clone().map(|i| boson_op(basis, i, true)).collect(),
        b: modes.clone().map(|i| fermion_op(basis, i, false)).collect(),
        b_dag: modes.map(|i| fermion_op(basis, i, true)).collect(),
        n_b: SparseOperator::diagonal(
            &(0..basis.dim())
                .map(|i| basis.boson_number(i) as f64)
                .collect::<Vec<_>>(),
        ),
        n_f: SparseOperator::diagonal(
            &(0..basis.dim())
                .map(|i| basis.fermion_number(i) as f64)
                .collect::<Vec<_>>(),
        ),
    }
}

/// Diagonal of `H0 = Σ ω_a(q) a*a + Σ ω_b(k) b*b`.
pub fn h0_diagonal(basis: &FockBasis, omega_a: &[f64], omega_b: &[f64]) -> Vec<f64> {
    (0..basis.dim())
        .map(|idx| {
            let (bos, mask) = basis.state(idx);
            let eb: f64 = bos.iter().zip(omega_a).map(|(&n, w)| n as f64 * w).sum();
            let ef: f64 = (0..basis.modes())
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| omega_b[i])
                .sum();
            eb + ef
        })
        .collect()
}

pub fn build_h0(basis: &FockBasis, omega_a: &[f64], omega_b: &[f64]) -> SparseOperator {
    SparseOperator::diagonal(&h0_diagonal(basis, omega_a, omega_b))
}

/// `H^s(F) = Σ_{k,q} F[k,q] · (fermion op at k) · (boson op at q)`.
/// Columns are assembled independently and concatenated in order.
pub fn interaction_term(basis: &FockBasis, s: Signature, f: &DMatrix<Complex64>) -> Result<SparseOperator> {
    let m = basis.modes();
    if f.nrows() != m || f.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: f.nrows(),
        });
    }
    let boson_create = !s.boson_annihilates();
    let fermion_create = !s.fermion_annihilates();
    let per_col: Vec<Vec<(usize, usize, Complex64)>> = (0..basis.dim())
        .into_par_iter()
        .map(|col| {
            let (bos0, mask) = basis.state(col);
            let mut out = Vec::new();
            for iq in 0..m {
                let mut bos = bos0.to_vec();
                let Some(amp_b) = apply_boson(basis, &mut bos, iq, boson_create) else {
                    continue;
                };
                for ik in 0..m {
                    let v = f[(ik, iq)];
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    if let Some((m2, sign)) = apply_fermion(mask, ik, fermion_create) {
                        let row = basis.index(&bos, m2).expect("target state exists");
                        out.push((row, col, v * amp_b * sign));
                    }
                }
            }
            out
        })
        .collect();
    Ok(SparseOperator::from_triplets(
        basis.dim(),
        per_col.into_iter().flatten().collect(),
    ))
}

/// The four interaction terms, indexed by `Signature::ordinal`.
pub fn interaction_terms(basis: &FockBasis, kernels: &KernelSet) -> Result<[SparseOperator; 4]> {
    if kernels.modes() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            got: kernels.modes(),
        });
    }
    let mut out = Vec::with_capacity(4);
    for s in Signature::ALL {
        out.push(interaction_term(basis, s, &kernels.for_signature(s))?);
    }
    Ok(out.try_into().expect("four signatures"))
}

pub fn build_hi(basis: &FockBasis, kernels: &KernelSet) -> Result<SparseOperator> {
    let terms = interaction_terms(basis, kernels)?;
    Ok(SparseOperator::sum(basis.dim(), terms.iter())?.flag_hermitian())
}

/// `1 + Σ (1 + 1/ω_a(q)) (|G1|^2 + |G2|^2) h^{2d}`; kernel entries already carry `h^d`.
pub fn c_lambda_bound(kernels: &KernelSet, omega_a: &[f64]) -> f64 {
    let m = kernels.modes();
    let mut acc = 0.0;
    for ik in 0..m {
        for iq in 0..m {
            let w = 1.0 + 1.0 / omega_a[iq];
            acc += w * (kernels.g1.values[(ik, iq)].norm_sqr() + kernels.g2.values[(ik, iq)].norm_sqr());
        }
    }
    1.0 + acc
}

/// Everything derived from one configuration: grid, basis, kernels and the
/// assembled operators.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub grid: MomentumGrid,
    pub basis: FockBasis,
    pub kernels: KernelSet,
    pub omega_a: Vec<f64>,
    pub omega_b: Vec<f64>,
    pub h0_diag: Vec<f64>,
    /// `H^s(G_s)` indexed by `Signature::ordinal`.
    pub terms: [SparseOperator; 4],
    pub hi: SparseOperator,
}

impl Model {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = MomentumGrid::from_config(cfg)?;
        let (g1, g2) = build_kernels(cfg, &grid)?;
        Self::with_kernels(cfg, grid, KernelSet::new(g1, g2))
    }

    /// Same grid and basis as `cfg`, arbitrary kernels.
    pub fn with_kernels(cfg: &ModelConfig, grid: MomentumGrid, kernels: KernelSet) -> Result<Self> {
        let basis = FockBasis::new(grid.len(), cfg.boson_cap())?;
        let omega_a: Vec<f64> = grid.points.iter().map(|q| dispersion_a(q, cfg.m_b)).collect();
        let omega_b: Vec<f64> = grid.points.iter().map(|k| dispersion_b(k, cfg.m_f)).collect();
        let h0_diag = h0_diagonal(&basis, &omega_a, &omega_b);
        let terms = interaction_terms(&basis, &kernels)?;
        let hi = SparseOperator::sum(basis.dim(), terms.iter())?.flag_hermitian();
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            basis,
            kernels,
            omega_a,
            omega_b,
            h0_diag,
            terms,
            hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn h0(&self) -> SparseOperator {
        SparseOperator::diagonal(&self.h0_diag)
    }

    /// `H_Λ = H0 + H_I`.
    pub fn h_lambda(&self) -> SparseOperator {
        self.h0()
            .add(&self.hi)
            .expect("same basis")
            .flag_hermitian()
    }

    pub fn c_lambda(&self) -> f64 {
        c_lambda_bound(&self.kernels, &self.omega_a)
    }

    pub fn term(&self, s: Signature) -> &SparseOperator {
        &self.terms[s.ordinal()]
    }
}

pub fn build_h_lambda(cfg: &ModelConfig) -> Result<SparseOperator> {
    Ok(Model::new(cfg)?.h_lambda())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::kernel::{Kernel, KernelSpecies};
    use crate::fock::linalg::op_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            boson_max: Some(2),
            ..ModelConfig::default()
        }
    }

    fn dense(op: &SparseOperator) -> DMatrix<Complex64> {
        op.to_dense()
    }

    #[test]
    fn car_and_ccr() {
        let basis = FockBasis::new(2, 2).unwrap();
        let ops = build_operators(&basis);
        let id = DMatrix::<Complex64>::identity(basis.dim(), basis.dim());
        for i in 0..2 {
            for j in 0..2 {
                let anti = dense(&ops.b[i]) * dense(&ops.b_dag[j]) + dense(&ops.b_dag[j]) * dense(&ops.b[i]);
                let expect = if i == j { id.clone() } else { id.scale(0.0) };
                assert!((anti - expect).norm() < 1e-14);
                let bb = dense(&ops.b[i]) * dense(&ops.b[j]) + dense(&ops.b[j]) * dense(&ops.b[i]);
                assert!(bb.norm() < 1e-14);
            }
        }
        // [a_i, a*_j] = δ_ij, tested on columns below the cap where truncation is invisible.
        for i in 0..2 {
            for j in 0..2 {
                let comm = dense(&ops.a[i]) * dense(&ops.a_dag[j]) - dense(&ops.a_dag[j]) * dense(&ops.a[i]);
                for col in 0..basis.dim() {
                    if basis.boson_number(col) >= basis.boson_cap() {
                        continue;
                    }
                    for row in 0..basis.dim() {
                        let expect = if i == j && row == col { 1.0 } else { 0.0 };
                        assert!((comm[(row, col)] - Complex64::new(expect, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
        let vac = basis.vacuum();
        for i in 0..2 {
            assert!(ops.a[i].entries().iter().all(|e| e.1 != vac));
            assert!(ops.b[i].entries().iter().all(|e| e.1 != vac));
        }
    }

    #[test]
    fn number_intertwining_below_cap() {
        let basis = FockBasis::new(2, 3).unwrap();
        let ops = build_operators(&basis);
        let nb = dense(&ops.n_b);
        let id = DMatrix::<Complex64>::identity(basis.dim(), basis.dim());
        for i in 0..2 {
            let ad = dense(&ops.a_dag[i]);
            let r = &nb * &ad - &ad * (&nb + &id);
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn fermion_field_norm_bound() {
        let basis = FockBasis::new(3, 1).unwrap();
        let ops = build_operators(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut bf = DMatrix::<Complex64>::zeros(basis.dim(), basis.dim());
            for (i, fi) in f.iter().enumerate() {
                bf += dense(&ops.b[i]) * fi.conj();
            }
            let fnorm = f.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(op_norm(&bf) <= fnorm * (1.0 + 1e-12));
        }
    }

    #[test]
    fn h0_eigenvalues() {
        let model = Model::new(&small_cfg()).unwrap();
        let b = &model.basis;
        assert_eq!(model.h0_diag[b.vacuum()], 0.0);
        let one_boson = b.index(&[1, 0], 0).unwrap();
        assert!((model.h0_diag[one_boson] - model.omega_a[0]).abs() < 1e-15);
        let mixed = b.index(&[0, 1], 0b01).unwrap();
        assert!((model.h0_diag[mixed] - model.omega_a[1] - model.omega_b[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_kernels_give_zero_interaction() {
        let cfg = ModelConfig {
            h1: 0.0,
            h2: 0.0,
            ..small_cfg()
        };
        let model = Model::new(&cfg).unwrap();
        assert_eq!(model.hi.nnz(), 0);
        assert_eq!(model.c_lambda(), 1.0);
    }

    #[test]
    fn interaction_is_hermitian_for_random_kernels() {
        let cfg = small_cfg();
        let grid = MomentumGrid::from_config(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut draw = |sp| {
                Kernel::from_fn(sp, 2, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            };
            let ks = KernelSet::new(draw(KernelSpecies::G1), draw(KernelSpecies::G2));
            let model = Model::with_kernels(&cfg, grid.clone(), ks).unwrap();
            assert!(model.hi.max_hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn number_changes_follow_signatures() {
        let model = Model::new(&small_cfg()).unwrap();
        let b = &model.basis;
        for s in Signature::ALL {
            for &(r, c, _) in model.term(s).entries() {
                let db = b.boson_number(r) as i32 - b.boson_number(c) as i32;
                let df = b.fermion_number(r) as i32 - b.fermion_number(c) as i32;
                assert_eq!(db, -s.n_a());
                assert_eq!(df, -s.n_b());
            }
        }
    }

    #[test]
    fn single_mode_vacuum_pairing() {
        // One mode, cap 1: <Ω| H^{ab}(conj G2) H0^{-1} H^{a*b*}(G2) |Ω> = |G2|^2 / (ω_b + ω_a).
        let cfg = ModelConfig {
            grid_spacing: 0.7,
            grid_halfwidth: 0.3,
            grid_staggered: false,
            boson_max: Some(1),
            ..ModelConfig::default()
        };
        let model = Model::new(&cfg).unwrap();
        let g = model.kernels.g2.values[(0, 0)];
        let create = model.term(Signature::AstarBstar).to_dense();
        let annihilate = model.term(Signature::AB).to_dense();
        let excited = model.basis.index(&[1], 1).unwrap();
        let e = model.h0_diag[excited];
        let value = annihilate[(0, excited)] * create[(excited, 0)] / e;
        let expect = g.norm_sqr() / (model.omega_b[0] + model.omega_a[0]);
        assert!((value.re - expect).abs() < 1e-14 && value.im.abs() < 1e-14);
    }
}
