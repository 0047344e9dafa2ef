//! Batch experiments over one configuration: enumeration reports, the
//! invariant suite, counter-term comparisons, series comparisons and cutoff
//! sweeps. The CLI is a thin layer over these functions.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::linalg::{op_norm, DENSE_LIMIT};
use crate::fock::{ChiProfile, Model, ModelConfig};
use crate::renorm::{BlockEngine, SeriesReport, MAX_SERIES_ORDER};
use crate::signature::{classify, enumerate_strings, split_points, Handedness, SignatureString};
use crate::tuple::{canonical_tuple, enumerate_psets, enumerate_tuples, equivalent, markers, tuple_to_string, PSet};
use crate::wick::{e2_quadrature, DiagramOracle, Dispersions, E2Denominator};

/// Grid used by the cutoff sweeps. It replaces the grid of the base model so
/// that the verification grid can stay tiny while sweeps cover every `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub grid_spacing: f64,
    pub grid_halfwidth: f64,
    pub boson_max: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            grid_spacing: 1.0,
            grid_halfwidth: 2.0,
            boson_max: 2,
        }
    }
}

/// Everything a CLI run needs. Field names double as JSON keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Counter-term order `N`.
    pub order: usize,
    /// Highest kernel order kept in the series.
    pub k_max: usize,
    pub lambdas: Vec<f64>,
    pub p_values: Vec<f64>,
    /// The first two entries are compared by `chi_independence`.
    pub chi_variants: Vec<ChiProfile>,
    pub sweep_grid: SweepGrid,
    /// Target for the tail estimate when choosing the series evaluation point.
    pub series_tol: f64,
    /// Seeds the random strings of the resummation checks.
    pub seed: u64,
    pub e2_denominator: E2Denominator,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            order: 2,
            k_max: 6,
            lambdas: vec![0.5, 1.0, 1.5, 2.0],
            p_values: vec![0.6],
            chi_variants: vec![ChiProfile::Indicator, ChiProfile::CosineBump],
            sweep_grid: SweepGrid::default(),
            series_tol: 1e-7,
            seed: 0,
            e2_denominator: E2Denominator::BosonFermion,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.order == 0 || self.order > MAX_SERIES_ORDER {
            return Err(Error::config("order", format!("must lie in [1, {MAX_SERIES_ORDER}]")));
        }
        if self.k_max == 0 || self.k_max > MAX_SERIES_ORDER {
            return Err(Error::config("k_max", format!("must lie in [1, {MAX_SERIES_ORDER}]")));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::config("lambdas", "need a non-empty list of positive cutoffs"));
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("p_values", "need a non-empty list of finite exponents"));
        }
        if self.chi_variants.is_empty() {
            return Err(Error::config("chi_variants", "need at least one profile"));
        }
        let g = &self.sweep_grid;
        if !(g.grid_spacing > 0.0 && g.grid_halfwidth > 0.0 && g.boson_max > 0) {
            return Err(Error::config("sweep_grid", "spacing, halfwidth and boson_max must be > 0"));
        }
        if !(self.series_tol > 0.0) {
            return Err(Error::config("series_tol", "must be > 0"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            field: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The verification model: the base model with an open boson cap set to `2N`.
    pub fn resolved_model(&self) -> ModelConfig {
        self.model.with_order_default(self.order)
    }
}

fn rel_diff(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

// ---------------------------------------------------------------- enumerate

#[derive(Debug, Clone, Serialize)]
pub struct EnumerateReport {
    pub k: usize,
    pub n: usize,
    pub strings: usize,
    pub handed: usize,
    pub right: usize,
    pub left: usize,
    pub ambidextrous: usize,
    pub tuples: usize,
    pub tuple_classes: usize,
    /// Every string is hit by exactly one class.
    pub bijection: bool,
    /// `B`, `E` and `A` agree across each class.
    pub markers_invariant: bool,
    /// `canonical_tuple` lands in the class of its string.
    pub canonical_consistent: bool,
}

impl EnumerateReport {
    pub fn passed(&self) -> bool {
        self.bijection && self.markers_invariant && self.canonical_consistent
    }
}

impl fmt::Display for EnumerateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |b: bool| if b { "ok" } else { "FAILED" };
        writeln!(f, "k = {}, n = {}", self.k, self.n)?;
        writeln!(f, "  strings        {:>8}", self.strings)?;
        writeln!(f, "  handed         {:>8}", self.handed)?;
        writeln!(f, "    right        {:>8}", self.right)?;
        writeln!(f, "    left         {:>8}", self.left)?;
        writeln!(f, "    ambidextrous {:>8}", self.ambidextrous)?;
        writeln!(f, "  tuples         {:>8}", self.tuples)?;
        writeln!(f, "  tuple classes  {:>8}", self.tuple_classes)?;
        writeln!(f, "  bijection      {:>8}", verdict(self.bijection))?;
        writeln!(f, "  markers        {:>8}", verdict(self.markers_invariant))?;
        write!(f, "  canonical      {:>8}", verdict(self.canonical_consistent))
    }
}

pub fn enumerate_report(k: usize, n: usize) -> Result<EnumerateReport> {
    let strings = enumerate_strings(k, None)?;
    let mut counts: BTreeMap<Handedness, usize> = BTreeMap::new();
    for s in &strings {
        *counts.entry(classify(s)).or_default() += 1;
    }
    let tuples = enumerate_tuples(n, k)?;
    let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, t) in tuples.iter().enumerate() {
        classes.entry(tuple_to_string(t).rank()).or_default().push(i);
    }
    let bijection = classes.len() == strings.len() && strings.iter().all(|s| classes.contains_key(&s.rank()));
    let markers_invariant = classes.values().all(|members| {
        let m0 = markers(&tuples[members[0]]);
        members.iter().skip(1).all(|&i| {
            let m = markers(&tuples[i]);
            m.b == m0.b && m.e == m0.e && m.a == m0.a
        })
    });
    let canonical_consistent = strings.iter().all(|s| match canonical_tuple(s, n) {
        Ok(t) => classes
            .get(&s.rank())
            .is_some_and(|members| equivalent(&t, &tuples[members[0]])),
        Err(_) => false,
    });
    let get = |h| counts.get(&h).copied().unwrap_or(0);
    Ok(EnumerateReport {
        k,
        n,
        strings: strings.len(),
        handed: strings.len() - get(Handedness::NotHanded),
        right: get(Handedness::RightHanded),
        left: get(Handedness::LeftHanded),
        ambidextrous: get(Handedness::Ambidextrous),
        tuples: tuples.len(),
        tuple_classes: classes.len(),
        bijection,
        markers_invariant,
        canonical_consistent,
    })
}

// ------------------------------------------------------------------ verify

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn handed_upto(k: usize) -> Result<Vec<SignatureString>> {
    let mut out = Vec::new();
    for len in 1..=k {
        out.extend(enumerate_strings(len, None)?.into_iter().filter(|s| classify(s).is_handed()));
    }
    Ok(out)
}

fn max_of(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    values.into_iter().try_fold(0.0, |acc, v| Ok(f64::max(acc, v?)))
}

/// Resummation residuals at every `U0 ∈ P^(n+1,N)_s` for `n + 1 ≤ N`.
fn resummation_residual(engine: &BlockEngine, s: &SignatureString, big_n: usize, z: Complex64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for level in 2..=big_n {
        for u0 in enumerate_psets(s, level, big_n)? {
            worst = worst.max(engine.verify_resummation_step(&u0, z)?);
        }
    }
    Ok(worst)
}

/// The invariant suite on the verification model. Each check records its
/// value and tolerance; the report fails when any check does.
pub fn verify_suite(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let model = Model::new(&cfg.resolved_model())?;
    if model.dim() > DENSE_LIMIT {
        return Err(Error::BudgetExceeded {
            what: "dense verification dimension",
            limit: DENSE_LIMIT,
            requested: model.dim(),
        });
    }
    let z = cfg.model.z;
    let h = model.h_lambda();
    let c_lambda = model.c_lambda();
    let engine = BlockEngine::new(model);
    let zero = Complex64::new(0.0, 0.0);
    let mut checks = Vec::new();

    checks.push(Check::at_most("hermitian_defect", h.max_hermitian_defect(), 1e-12));
    let e0 = engine.ground_energy();
    checks.push(Check::at_most("lower_bound_violation", (-(e0 + c_lambda)).max(0.0), 0.0));

    let small = handed_upto(3)?;
    let intertwine = max_of(small.iter().map(|s| {
        let r = engine.intertwine_check(s, z)?;
        Ok(r.boson.max(r.fermion).max(r.vacuum))
    }))?;
    checks.push(Check::at_most("intertwining_k_le_3", intertwine, 1e-12));
    let adjoint = max_of(small.iter().map(|s| engine.adjoint_defect(s, z)))?;
    checks.push(Check::at_most("adjoint_relation_k_le_3", adjoint, 1e-12));

    let ambi_len = cfg.order.clamp(2, 4);
    let mut vacuum: f64 = 0.0;
    for len in (2..=ambi_len).step_by(2) {
        for s in enumerate_strings(len, Some(Handedness::Ambidextrous))? {
            let t = engine.block(&s, zero)?;
            let v = engine.model().basis.vacuum();
            vacuum = vacuum.max(t.operator[(v, v)].norm());
        }
    }
    checks.push(Check::at_most("vacuum_subtraction", vacuum, 1e-12));

    let mut split: f64 = 0.0;
    for s in enumerate_strings(4, None)? {
        if classify(&s).is_handed() && split_points(&s)?.len() >= 2 {
            let r = engine.verify_split_independence(&s, z)?;
            split = split.max(r.max_discrepancy.unwrap_or(0.0));
        }
    }
    checks.push(Check::at_most("split_independence_k_4", split, 1e-12));

    let ct = counterterms_report(cfg, &engine)?;
    let order2 = ct.rows.iter().filter(|r| r.length == 2).map(|r| r.rel_diff).fold(0.0, f64::max);
    checks.push(Check::at_most("counterterm_order_2", order2, 1e-10));
    checks.push(Check::at_most("e2_quadrature", ct.quadrature_rel_diff, 1e-10));
    if cfg.order >= 4 {
        let order4 = ct.rows.iter().filter(|r| r.length == 4).map(|r| r.rel_diff).fold(0.0, f64::max);
        checks.push(Check::at_most("counterterm_order_4", order4, 1e-8));
    }

    let listed: SignatureString = "ab,a*b*,ab,a*b*".parse()?;
    let u0 = PSet {
        base: listed,
        n: 2,
        big_n: 2,
        intervals: Vec::new(),
    };
    checks.push(Check::at_most("resummation_listed", engine.verify_resummation_step(&u0, z)?, 1e-10));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let handed4: Vec<SignatureString> = handed_upto(4)?.into_iter().filter(|s| s.len() >= 2).collect();
    let mut resum: f64 = 0.0;
    for _ in 0..8 {
        let s = &handed4[rng.gen_range(0..handed4.len())];
        resum = resum.max(resummation_residual(&engine, s, 4, z)?);
    }
    checks.push(Check::at_most("resummation_random_k_le_4", resum, 1e-10));

    let k_check = cfg.k_max.min(4);
    let raw = engine.raw_neumann_terms(1, z, k_check)?;
    let reordered = engine.reordered_terms(1, z, k_check)?;
    let termwise = raw
        .iter()
        .zip(&reordered)
        .map(|(a, b)| op_norm(&(a - b)))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("series_n1_termwise", termwise, 1e-12));

    let failures = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    Ok(VerifyReport {
        dim: engine.dim(),
        checks,
        failures,
    })
}

// ------------------------------------------------------------ counterterms

#[derive(Debug, Clone, Serialize)]
pub struct CountertermRow {
    pub s: String,
    pub length: usize,
    pub matrix: [f64; 2],
    pub oracle: [f64; 2],
    pub rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountertermReport {
    pub rows: Vec<CountertermRow>,
    /// Quadrature with the configured denominator reading.
    pub quadrature: f64,
    pub quadrature_boson_fermion: f64,
    pub quadrature_fermion_pair: f64,
    /// `|E^(2) + quadrature| / |E^(2)|` for the configured reading.
    pub quadrature_rel_diff: f64,
    /// `E^(2ℓ)` indexed by `2ℓ`.
    pub by_order: Vec<[f64; 2]>,
}

/// Matrix counter-terms against the diagram oracle for every ambidextrous
/// string of length `≤ N`, plus the closed-form order-2 quadrature.
pub fn counterterms_report(cfg: &ExperimentConfig, engine: &BlockEngine) -> Result<CountertermReport> {
    let model = engine.model();
    let disp = Dispersions {
        omega_a: &model.omega_a,
        omega_b: &model.omega_b,
    };
    let mut oracle = DiagramOracle::new(&model.kernels, disp);
    let mut rows = Vec::new();
    for len in (2..=cfg.order.max(2)).step_by(2) {
        for s in enumerate_strings(len, Some(Handedness::Ambidextrous))? {
            let m = engine.self_energy(&s)?;
            let o = oracle.counterterm(&s)?;
            rows.push(CountertermRow {
                s: s.to_string(),
                length: len,
                matrix: [m.re, m.im],
                oracle: [o.re, o.im],
                rel_diff: rel_diff(m, o),
            });
        }
    }
    let by_order = engine.self_energy_by_order(cfg.order.max(2))?;
    let quadrature = e2_quadrature(&model.kernels, disp, cfg.e2_denominator);
    Ok(CountertermReport {
        rows,
        quadrature,
        quadrature_boson_fermion: e2_quadrature(&model.kernels, disp, E2Denominator::BosonFermion),
        quadrature_fermion_pair: e2_quadrature(&model.kernels, disp, E2Denominator::FermionPair),
        quadrature_rel_diff: rel_diff(by_order[2], Complex64::new(-quadrature, 0.0)),
        by_order: by_order.iter().map(|e| [e.re, e.im]).collect(),
    })
}

// ------------------------------------------------------------------ series

#[derive(Debug, Clone, Serialize)]
pub struct ResolventComparison {
    /// Smallest `|Re z|` with leading term ratios below `1/2`.
    pub adaptive_z: f64,
    pub report: SeriesReport,
}

/// Reordered partial sum against the direct resolvent at the evaluation
/// point chosen from the raw series.
pub fn resolvent_compare(cfg: &ExperimentConfig) -> Result<ResolventComparison> {
    cfg.validate()?;
    let engine = BlockEngine::new(Model::new(&cfg.resolved_model())?);
    let adaptive_z = engine.adaptive_z(cfg.order)?;
    let z = engine.evaluation_point(cfg.order, cfg.k_max, cfg.series_tol)?;
    let (_, report) = engine.reordered_resolvent(cfg.order, z, cfg.k_max)?;
    Ok(ResolventComparison { adaptive_z, report })
}

// ------------------------------------------------------------------ sweeps

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub lambda: f64,
    /// `inf σ(H_Λ)`.
    pub e_lambda: f64,
    /// `E^(N)_Λ`.
    pub e_counter: f64,
    /// `‖R_Λ(z) - R_Λ'(z)‖` against the next cutoff of the list, if any.
    pub residual_next: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trend {
    pub monotone: bool,
    /// Human-readable notes on every step that breaks the expected trend.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub z: [f64; 2],
    pub rows: Vec<SweepRow>,
    pub trend: Vec<Trend>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiRow {
    pub lambda: f64,
    pub chi1: ChiProfile,
    pub chi2: ChiProfile,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiReport {
    pub z: [f64; 2],
    pub rows: Vec<ChiRow>,
    pub trend: Trend,
}

fn sweep_model(cfg: &ExperimentConfig, p: f64, lambda: f64, chi: ChiProfile) -> ModelConfig {
    ModelConfig {
        p,
        lambda,
        chi_choice: chi,
        grid_spacing: cfg.sweep_grid.grid_spacing,
        grid_halfwidth: cfg.sweep_grid.grid_halfwidth,
        boson_max: Some(cfg.sweep_grid.boson_max),
        ..cfg.model.clone()
    }
}

fn check_sweep(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let max_lambda = cfg.lambdas.iter().copied().fold(0.0, f64::max);
    if cfg.sweep_grid.grid_halfwidth < max_lambda {
        return Err(Error::config(
            "sweep_grid",
            format!(
                "grid halfwidth {} is below the largest cutoff {max_lambda}; the cutoff would not act on the grid",
                cfg.sweep_grid.grid_halfwidth
            ),
        ));
    }
    Ok(())
}

struct Point {
    e_lambda: f64,
    e_counter: f64,
    resolvent: nalgebra::DMatrix<Complex64>,
}

/// `(H_Λ - E^(N)_Λ - z)^{-1}` with the checks that keep `z` off the spectrum.
fn sweep_point(cfg: &ExperimentConfig, mc: ModelConfig) -> Result<Point> {
    let model = Model::new(&mc)?;
    if model.dim() > DENSE_LIMIT {
        return Err(Error::BudgetExceeded {
            what: "dense sweep dimension",
            limit: DENSE_LIMIT,
            requested: model.dim(),
        });
    }
    let engine = BlockEngine::new(model);
    let e_lambda = engine.ground_energy();
    let e_counter = engine.total_self_energy(cfg.order)?.re;
    let z = cfg.model.z;
    if z.im == 0.0 && z.re >= e_lambda - e_counter {
        return Err(Error::domain(format!(
            "z = {} is not below the spectrum of H_Λ - E^(N) (bottom {})",
            z.re,
            e_lambda - e_counter
        )));
    }
    let resolvent = engine.direct_resolvent(cfg.order, z)?;
    Ok(Point {
        e_lambda,
        e_counter,
        resolvent,
    })
}

fn trend(values: &[f64], label: &str) -> Trend {
    const SLACK: f64 = 1e-12;
    let flags: Vec<String> = values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + SLACK)
        .map(|(i, w)| format!("{label}: step {i} increases from {:.6e} to {:.6e}", w[0], w[1]))
        .collect();
    Trend {
        monotone: flags.is_empty(),
        flags,
    }
}

/// Consecutive-cutoff resolvent residuals for every `p`, with the ground and
/// counter-term energies at each point. Points run in parallel; rows come
/// out in configuration order.
pub fn sweep_lambda(cfg: &ExperimentConfig) -> Result<SweepReport> {
    check_sweep(cfg)?;
    let chi = cfg.model.chi_choice;
    let jobs: Vec<(f64, f64)> = cfg
        .p_values
        .iter()
        .flat_map(|&p| cfg.lambdas.iter().map(move |&l| (p, l)))
        .collect();
    let points: Vec<Point> = jobs
        .par_iter()
        .map(|&(p, l)| sweep_point(cfg, sweep_model(cfg, p, l, chi)))
        .collect::<Result<_>>()?;
    let per_p = cfg.lambdas.len();
    let mut rows = Vec::with_capacity(jobs.len());
    let mut trends = Vec::new();
    for (pi, &p) in cfg.p_values.iter().enumerate() {
        let block = &points[pi * per_p..(pi + 1) * per_p];
        let residuals: Vec<f64> = block
            .windows(2)
            .map(|w| op_norm(&(&w[0].resolvent - &w[1].resolvent)))
            .collect();
        for (li, pt) in block.iter().enumerate() {
            rows.push(SweepRow {
                p,
                lambda: cfg.lambdas[li],
                e_lambda: pt.e_lambda,
                e_counter: pt.e_counter,
                residual_next: residuals.get(li).copied(),
            });
        }
        trends.push(trend(&residuals, &format!("p = {p}")));
    }
    Ok(SweepReport {
        z: [cfg.model.z.re, cfg.model.z.im],
        rows,
        trend: trends,
    })
}

/// `‖R_{χ1,Λ}(z) - R_{χ2,Λ}(z)‖` per cutoff for the first two profiles.
pub fn chi_independence(cfg: &ExperimentConfig) -> Result<ChiReport> {
    check_sweep(cfg)?;
    let (chi1, chi2) = match cfg.chi_variants.as_slice() {
        [a] => (*a, *a),
        [a, b, ..] => (*a, *b),
        [] => return Err(Error::config("chi_variants", "need at least one profile")),
    };
    for chi in [chi1, chi2] {
        if !chi.is_admissible() {
            return Err(Error::config(
                "chi_variants",
                format!("profile `{}` is not an admissible cutoff (no compact support)", chi.name()),
            ));
        }
    }
    let p = cfg.model.p;
    let rows: Vec<ChiRow> = cfg
        .lambdas
        .par_iter()
        .map(|&l| {
            let a = sweep_point(cfg, sweep_model(cfg, p, l, chi1))?;
            let b = sweep_point(cfg, sweep_model(cfg, p, l, chi2))?;
            Ok(ChiRow {
                lambda: l,
                chi1,
                chi2,
                residual: op_norm(&(a.resolvent - b.resolvent)),
            })
        })
        .collect::<Result<_>>()?;
    let residuals: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    Ok(ChiReport {
        z: [cfg.model.z.re, cfg.model.z.im],
        trend: trend(&residuals, "chi residual"),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_length_two() {
        let r = enumerate_report(2, 2).unwrap();
        assert_eq!((r.handed, r.right, r.left, r.ambidextrous), (4, 1, 1, 2));
        assert_eq!(r.tuple_classes, 16);
        assert!(r.passed());
    }

    #[test]
    fn enumerate_n1_and_odd_length() {
        let r = enumerate_report(4, 1).unwrap();
        assert_eq!(r.tuple_classes, 256);
        assert_eq!(r.tuples, 256);
        assert_eq!(enumerate_report(3, 2).unwrap().ambidextrous, 0);
    }

    #[test]
    fn config_json_round_trip_and_rejections() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        assert!(ExperimentConfig::from_json(r#"{"model": {"z": [0.5, 0.0]}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"model": {"m_b": 0.0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"lambdas": []}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn default_suite_passes() {
        let r = verify_suite(&ExperimentConfig::default()).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
    }

    #[test]
    fn constant_lambda_list_gives_zero_residuals() {
        let cfg = ExperimentConfig {
            lambdas: vec![1.0, 1.0, 1.0],
            ..ExperimentConfig::default()
        };
        let r = sweep_lambda(&cfg).unwrap();
        assert!(r.rows.iter().filter_map(|row| row.residual_next).all(|v| v == 0.0));
    }

    #[test]
    fn zero_coupling_sweep_is_flat() {
        let mut cfg = ExperimentConfig::default();
        cfg.model.h1 = 0.0;
        cfg.model.h2 = 0.0;
        let r = sweep_lambda(&cfg).unwrap();
        assert!(r.rows.iter().filter_map(|row| row.residual_next).all(|v| v == 0.0));
        assert!(r.rows.iter().all(|row| row.e_counter == 0.0));
    }

    #[test]
    fn chi_checks() {
        let same = ExperimentConfig {
            chi_variants: vec![ChiProfile::CosineBump, ChiProfile::CosineBump],
            ..ExperimentConfig::default()
        };
        assert!(chi_independence(&same).unwrap().rows.iter().all(|r| r.residual == 0.0));
        let gauss = ExperimentConfig {
            chi_variants: vec![ChiProfile::Indicator, ChiProfile::Gaussian],
            ..ExperimentConfig::default()
        };
        assert!(matches!(chi_independence(&gauss), Err(Error::Config { .. })));
    }

    #[test]
    fn sweep_rejects_saturating_grid() {
        let cfg = ExperimentConfig {
            lambdas: vec![1.0, 5.0],
            ..ExperimentConfig::default()
        };
        assert!(matches!(sweep_lambda(&cfg), Err(Error::Config { .. })));
    }
}
