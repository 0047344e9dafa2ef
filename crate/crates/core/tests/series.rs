use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renorm_core::fock::linalg::op_norm;
use renorm_core::fock::KernelSpecies;
use renorm_core::renorm::BlockEngine;
use renorm_core::signature::Signature;
use renorm_core::tuple::{enumerate_tuples, tuple_to_string};
use renorm_core::{Model, ModelConfig};

fn small(cfg: ModelConfig) -> BlockEngine {
    BlockEngine::new(
        Model::new(&ModelConfig {
            boson_max: Some(2),
            ..cfg
        })
        .unwrap(),
    )
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn equivalent_tuples_give_equal_summands() {
    let engine = small(ModelConfig::default());
    let z = c(-2.0, 0.3);
    let mut pairs = 0;
    // For n <= 2 every class is a singleton; n = 3 supplies the real pairs.
    for n in 1..=3 {
        for k in 1..=5 {
            let tuples = enumerate_tuples(n, k).unwrap();
            for (i, t) in tuples.iter().enumerate() {
                for u in &tuples[i + 1..] {
                    if tuple_to_string(t) == tuple_to_string(u) {
                        pairs += 1;
                        let d = op_norm(&(engine.summand(t, z).unwrap() - engine.summand(u, z).unwrap()));
                        assert!(d < 1e-11, "{t} vs {u}: {d}");
                    }
                }
            }
        }
    }
    assert!(pairs > 0);
}

/// `‖S_t‖ |Re z|^{1+ℓ/2} / ∏‖F_i‖` stays below `C^ℓ` for one `C` across random
/// masses, couplings, exponents and spectral parameters.
#[test]
fn summand_bound_holds_with_a_uniform_constant() {
    const C: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let cfg = ModelConfig {
            m_b: rng.gen_range(0.5..2.0),
            m_f: rng.gen_range(0.5..2.0),
            p: rng.gen_range(0.2..1.0),
            h1: rng.gen_range(-2.0..2.0),
            h2: rng.gen_range(-2.0..2.0),
            ..ModelConfig::default()
        };
        let z = c(-rng.gen_range(0.5..20.0), rng.gen_range(-2.0..2.0));
        let engine = small(cfg);
        let kernels = &engine.model().kernels;
        let norm_of = |s: Signature| match s {
            Signature::ABstar | Signature::AstarB => kernels.g1.l2_norm(),
            Signature::AB | Signature::AstarBstar => kernels.g2.l2_norm(),
        };
        assert_eq!(kernels.g1.species, KernelSpecies::G1);
        for k in 1..=3 {
            for t in enumerate_tuples(2, k).unwrap() {
                let prod: f64 = tuple_to_string(&t).entries().iter().map(|&s| norm_of(s)).product();
                if prod == 0.0 {
                    continue;
                }
                let l = t.blocks().len() as f64;
                let scaled = op_norm(&engine.summand(&t, z).unwrap()) * z.re.abs().powf(1.0 + l / 2.0) / prod;
                worst = worst.max(scaled.powf(1.0 / l));
            }
        }
    }
    assert!(worst <= C, "observed constant {worst}");
}

#[test]
fn zero_coupling_series_is_the_free_resolvent() {
    let engine = small(ModelConfig {
        h1: 0.0,
        h2: 0.0,
        ..ModelConfig::default()
    });
    let z = c(-1.5, 0.2);
    let r0 = engine.r0(z).unwrap();
    let direct = engine.direct_resolvent(2, z).unwrap();
    assert!((&direct - &r0).iter().all(|v| v.norm() < 1e-13));
    let terms = engine.reordered_terms(2, z, 4).unwrap();
    assert!(op_norm(&(&terms[0] - &r0)) < 1e-15);
    assert!(terms[1..].iter().all(|t| op_norm(t) == 0.0));
}

#[test]
fn direct_resolvent_identities() {
    let engine = small(ModelConfig::default());
    let (z1, z2) = (c(-3.0, 0.5), c(-4.5, -1.0));
    let r1 = engine.direct_resolvent(2, z1).unwrap();
    let r2 = engine.direct_resolvent(2, z2).unwrap();
    let identity = &r1 - &r2 - (&r1 * &r2) * (z1 - z2);
    assert!(op_norm(&identity) < 1e-10);
    let r1c = engine.direct_resolvent(2, z1.conj()).unwrap();
    assert!(op_norm(&(r1.adjoint() - r1c)) < 1e-12);
}

#[test]
fn counterterms_are_real_for_real_kernels() {
    let engine = small(ModelConfig::default());
    for e in engine.self_energy_by_order(4).unwrap() {
        assert!(e.im.abs() < 1e-15);
    }
}
