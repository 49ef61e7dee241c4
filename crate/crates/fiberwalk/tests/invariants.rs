//! Property tests over randomized models: generator validity, cutoff
//! admissibility, estimator merge laws, and phase-average cancellation.

use nalgebra::DMatrix;
use proptest::prelude::*;

use fiberwalk::lattice::LatticeSpec;
use fiberwalk::model::{
    choose_k0, derive_dt, split_vector_potential, FieldConfig, ModelSpec, PhysicalConstants,
};
use fiberwalk::montecarlo::{accumulate_lifted_kernel, JumpProcess};
use fiberwalk::operators::{build_conjugate_generator, build_lifted_generator};
use fiberwalk::semigroup::uniformize;

fn admissible_model(
    sites: usize,
    potentials: Vec<f64>,
    vectors: Vec<f64>,
    k0_frac: f64,
) -> Option<ModelSpec> {
    let lattice = LatticeSpec::new(1, sites, 1.0).ok()?;
    let fields = FieldConfig::new(&lattice, vectors, potentials).ok()?;
    let constants = PhysicalConstants::natural();
    // reject infeasible potentials, then slide K0 within the admissible
    // interval [sup|V|/2, hbar^2/(a^2 m)] (the upper limit is 1 here)
    choose_k0(&fields, &constants, &lattice).ok()?;
    let sup_v = (0..sites)
        .map(|s| fiberwalk::model::effective_potential(&fields, &constants, &lattice, s).abs())
        .fold(0.0f64, f64::max);
    let lo = sup_v / 2.0;
    let k0 = lo + k0_frac * (1.0 - lo);
    ModelSpec::new(lattice, constants, fields, Some(k0)).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_split_reconstructs(v in -1e6f64..1e6f64) {
        let (plus, minus) = split_vector_potential(v);
        prop_assert!(plus >= 0.0 && minus >= 0.0);
        prop_assert_eq!(plus - minus, v);
        prop_assert!(plus == 0.0 || minus == 0.0);
    }

    #[test]
    fn dt_scales_quadratically(a in 1e-3f64..1e2f64, m in 1e-2f64..1e2f64) {
        let constants = PhysicalConstants::new(m, 1.0, 1.0, 1.0).unwrap();
        let small = derive_dt(&LatticeSpec::new(1, 4, a).unwrap(), &constants);
        let large = derive_dt(&LatticeSpec::new(1, 4, 2.0 * a).unwrap(), &constants);
        prop_assert!((large / small - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn model_construction_enforces_rate_bound(
        potentials in proptest::collection::vec(-3.0f64..3.0, 6),
        k0 in 0.0f64..1.5f64,
    ) {
        let lattice = LatticeSpec::new(1, 6, 1.0).unwrap();
        let fields = FieldConfig::new(&lattice, vec![0.0; 6], potentials.clone()).unwrap();
        let sup_v = potentials.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let admissible = sup_v / 2.0 <= k0 && k0 <= 1.0;
        let result = ModelSpec::new(lattice, PhysicalConstants::natural(), fields, Some(k0));
        // allow boundary cases to go either way within floating tolerance
        let near_boundary = (sup_v / 2.0 - k0).abs() <= 1e-12 || (k0 - 1.0).abs() <= 1e-12;
        if !near_boundary {
            prop_assert_eq!(result.is_ok(), admissible);
        }
        if let Ok(model) = result {
            // every admissible model yields valid Markov generators
            build_lifted_generator(&model).unwrap().matrix.validate_markov().unwrap();
            build_conjugate_generator(&model).unwrap().matrix.validate_markov().unwrap();
        }
    }

    #[test]
    fn random_admissible_models_have_markov_lifts(
        sites in 3usize..7,
        seedlings in proptest::collection::vec((-0.9f64..0.9, -0.5f64..0.5), 6),
        k0_frac in 0.51f64..0.99,
    ) {
        let potentials: Vec<f64> = seedlings.iter().take(sites).map(|(p, _)| *p).collect();
        let vectors: Vec<f64> = seedlings.iter().take(sites).map(|(_, a)| *a).collect();
        if let Some(model) = admissible_model(sites, potentials, vectors, k0_frac) {
            let lifted = build_lifted_generator(&model).unwrap();
            lifted.matrix.validate_markov().unwrap();
            // uniformization keeps positivity and row mass
            let kernel = uniformize(&lifted, 0.4, 1e-10).unwrap();
            prop_assert!(kernel.min_entry() >= -1e-12);
            prop_assert!(kernel.stochastic_defect() <= 1e-10);
        }
    }

    #[test]
    fn kernel_estimates_merge_associatively(
        split_a in 1u64..400,
        split_b in 400u64..900,
        seed in proptest::num::u64::ANY,
    ) {
        let model = fiberwalk::model::presets::free();
        let process = JumpProcess::new(&model).unwrap();
        let n = 1000;
        let full = accumulate_lifted_kernel(&process, 0, 0.4, seed, 0..n);
        let one = accumulate_lifted_kernel(&process, 0, 0.4, seed, 0..split_a);
        let two = accumulate_lifted_kernel(&process, 0, 0.4, seed, split_a..split_b);
        let three = accumulate_lifted_kernel(&process, 0, 0.4, seed, split_b..n);
        // both association orders reproduce the single pass exactly
        let left = one.clone().merge(&two).unwrap().merge(&three).unwrap();
        let right = one.merge(&two.clone().merge(&three).unwrap()).unwrap();
        prop_assert_eq!(&left, &full);
        prop_assert_eq!(&right, &full);
    }

    #[test]
    fn phase_average_kills_fiber_independent_mass(
        weights in proptest::collection::vec(0.0f64..1.0, 16),
    ) {
        // a density that depends only on (xi, x) phase-averages to zero
        let model = fiberwalk::model::presets::free();
        let sites = 8;
        let mut values = DMatrix::<f64>::zeros(32, 32);
        for xi in 0..sites {
            for x in 0..sites {
                let w = weights[(xi * 2 + x) % weights.len()];
                for nu in 0..4 {
                    for n in 0..4 {
                        values[(xi * 4 + nu, x * 4 + n)] = w;
                    }
                }
            }
        }
        let total = values.sum();
        prop_assume!(total > 0.0);
        values /= total;
        let rc = fiberwalk::density::JointDensity { values, time: 0.0 };
        let out = fiberwalk::density::phase_average(&rc, &model).unwrap();
        prop_assert!(out.camax() <= 1e-14);
    }
}
