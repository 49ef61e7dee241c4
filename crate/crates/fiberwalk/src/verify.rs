//! Model-scoped verification: runs every structural identity the
//! representation promises on a given model and reports residuals against
//! fixed thresholds. Backs the CLI `verify` subcommand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::converge::gaussian_wavepacket;
use crate::density::{
    classical_expectation, commute_check, condition, evolve_joint_density, lift_observable,
    phase_average, prepare_joint_density, quantum_evolution_residual, quantum_expectation,
    random_hermitian, DensityMatrix, Observable,
};
use crate::equivalence::{
    antiparticle_with_constant, propagator, reconstruct_with_constant, sector_constant_unchecked,
    sector_identity_residual_against, ResidualRecord,
};
use crate::error::Result;
use crate::model::ModelSpec;
use crate::montecarlo::{estimate_lifted_kernel, winding_drift_statistic};
use crate::operators::{
    build_conjugate_generator, build_hamiltonian, build_lifted_generator, build_sector_generator,
    exact_winding_drift, fiber_fourier_matrix, fiber_index, FIBER,
};
use crate::semigroup::{dense_kernel, uniformize_tagged, KernelSource};

/// One named check with its measured value and threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    /// "<=" for residual bounds, ">=" for negative controls.
    pub direction: String,
    pub note: String,
}

impl CheckResult {
    fn below(name: &str, measured: f64, threshold: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
            direction: "<=".into(),
            note: note.into(),
        }
    }

    fn above(name: &str, measured: f64, threshold: f64, note: &str) -> Self {
        Self {
            name: name.into(),
            passed: measured >= threshold,
            measured,
            threshold,
            direction: ">=".into(),
            note: note.into(),
        }
    }
}

/// Full verification report for one model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub model_hash: String,
    pub dt: f64,
    pub k0: f64,
    pub sector_constant: ResidualRecord,
    pub parallelism: String,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

fn zero_vector_potential(model: &ModelSpec) -> bool {
    model
        .fields()
        .vector_table()
        .iter()
        .all(|&v| v == 0.0)
}

/// Run the verification checks on a model. `times` parameterizes the kernel
/// comparisons; `seed` fixes the Monte Carlo smoke test and the random
/// observables.
pub fn verify_model(model: &ModelSpec, times: &[f64], seed: u64) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let sites = model.lattice().site_count();
    let hbar = model.constants().hbar;
    let c0 = sector_constant_unchecked(model)?;

    // Markov validity of both fiber generators
    let lifted = build_lifted_generator(model)?;
    let conjugate = build_conjugate_generator(model)?;
    for (tag, gen) in [("lifted", &lifted), ("conjugate", &conjugate)] {
        checks.push(CheckResult::below(
            &format!("markov/{tag}/row_sums"),
            gen.matrix.max_row_sum(),
            1e-12,
            "generator rows sum to zero",
        ));
        checks.push(CheckResult::below(
            &format!("markov/{tag}/off_diagonal"),
            -gen.matrix.min_off_diagonal(),
            1e-12,
            "jump rates are nonnegative",
        ));
    }
    for &t in &[0.1, 1.0] {
        let kernel = uniformize_tagged(&lifted, t, 1e-10, KernelSource::Lifted)?;
        checks.push(CheckResult::below(
            &format!("markov/kernel_positivity/t={t}"),
            -kernel.min_entry(),
            1e-12,
            "uniformization preserves positivity",
        ));
        checks.push(CheckResult::below(
            &format!("markov/kernel_stochastic/t={t}"),
            kernel.stochastic_defect(),
            1e-10,
            "kernel rows sum to one",
        ));
    }

    // block diagonalization by the fiber Fourier matrix (desk scale only)
    if model.fiber_state_count() <= 256 {
        let f = fiber_fourier_matrix(sites);
        let dense = lifted.matrix.to_dense().map(|x| Complex64::new(x, 0.0));
        let blocks = f.adjoint() * dense * &f;
        let mut off_block = 0.0f64;
        let mut in_block = 0.0f64;
        for k in 0..FIBER {
            let sector = build_sector_generator(model, k as f64 * std::f64::consts::FRAC_PI_2)?
                .matrix
                .to_dense();
            for x in 0..sites {
                for xp in 0..sites {
                    let b = blocks[(fiber_index(x, k), fiber_index(xp, k))];
                    in_block = in_block.max((b - sector[(x, xp)]).norm());
                }
            }
        }
        for r in 0..blocks.nrows() {
            for c in 0..blocks.ncols() {
                if r % FIBER != c % FIBER {
                    off_block = off_block.max(blocks[(r, c)].norm());
                }
            }
        }
        checks.push(CheckResult::below(
            "sectors/off_block",
            off_block,
            1e-12,
            "fiber momentum is block-conserved",
        ));
        checks.push(CheckResult::below(
            "sectors/in_block",
            in_block,
            1e-12,
            "blocks match the sector generators",
        ));
    }

    // sector identity and the structural form of the constant
    checks.push(CheckResult::below(
        "sector_identity/residual",
        c0.residual,
        1e-12,
        "quarter-turn sector equals -(i/hbar) H - c0",
    ));
    let d = model.lattice().dimension() as f64;
    let a = model.lattice().spacing();
    let m = model.constants().mass;
    let expected_re = d * hbar / (m * a * a) + 2.0 * model.k0() / hbar;
    let expected_im = -d * hbar / (m * a * a);
    checks.push(CheckResult::below(
        "sector_identity/c0_structure",
        (c0.re - expected_re).abs().max((c0.im - expected_im).abs()),
        1e-12,
        "c0 = (1 - i) d hbar/(m a^2) + 2 K0/hbar",
    ));

    // reconstruction against the dense propagator, and its unitarity
    for &t in times {
        let kernel = dense_kernel(&lifted, t, KernelSource::Lifted)?;
        let rec = reconstruct_with_constant(&kernel, model, c0.value())?;
        let u = propagator(model, t)?;
        checks.push(CheckResult::below(
            &format!("reconstruction/residual/t={t}"),
            (rec.clone() - &u).camax(),
            1e-10,
            "corrected fiber sum equals the propagator",
        ));
        checks.push(CheckResult::below(
            &format!("reconstruction/unitarity/t={t}"),
            (&rec * rec.adjoint() - DMatrix::<Complex64>::identity(sites, sites)).camax(),
            1e-9,
            "reconstructed propagator is unitary",
        ));
        let anti = antiparticle_with_constant(&kernel, model, c0.value())?;
        checks.push(CheckResult::below(
            &format!("antiparticle/conjugacy/t={t}"),
            (anti - rec.map(|z| z.conj())).camax(),
            1e-10,
            "reversed-fiber reconstruction is the conjugate",
        ));
    }

    // semigroup law of the classical kernel
    {
        let (t1, t2) = (0.3, 0.5);
        let k1 = uniformize_tagged(&lifted, t1, 1e-12, KernelSource::Lifted)?;
        let k2 = uniformize_tagged(&lifted, t2, 1e-12, KernelSource::Lifted)?;
        let k12 = uniformize_tagged(&lifted, t1 + t2, 1e-12, KernelSource::Lifted)?;
        checks.push(CheckResult::below(
            "semigroup/composition",
            (&k1.matrix * &k2.matrix - k12.matrix).abs().max(),
            1e-9,
            "kernel(t1) kernel(t2) = kernel(t1 + t2)",
        ));
    }

    // density-matrix evolution and observable lifting (desk scale only)
    if sites <= 16 && zero_vector_potential(model) {
        let psi = gaussian_wavepacket(
            sites,
            model.lattice().spacing(),
            model.lattice().spacing() * sites as f64 / 2.0,
            model.lattice().spacing() * sites as f64 / 6.0,
            0.5,
        );
        let rho0 = DensityMatrix::from_wavefunction(&psi, 0.0);
        let t = times.last().copied().unwrap_or(0.2);
        checks.push(CheckResult::below(
            "density/evolution_residual",
            quantum_evolution_residual(&rho0.matrix, model, t)?,
            1e-8,
            "phase-averaged joint density follows the unitary conjugation",
        ));

        let (rc0, scale) = prepare_joint_density(&rho0.matrix)?;
        let rc_t = evolve_joint_density(&rc0, model, t)?;
        let rho_t = phase_average(&rc_t, model)?.map(|z| z * scale);
        let mut lift_dev = 0.0f64;
        for k in 0..10 {
            let obs = random_hermitian(sites, seed.wrapping_add(k));
            let classical = classical_expectation(&rc_t, &lift_observable(&obs), scale, model)?;
            let quantum = quantum_expectation(&rho_t, &obs);
            lift_dev = lift_dev.max((classical - quantum).norm());
        }
        checks.push(CheckResult::below(
            "density/observable_lifting",
            lift_dev,
            1e-8,
            "classical expectations of lifted observables match traces",
        ));

        // conditioning: diagonal Bayes case and idempotence
        let diag_probs: Vec<f64> = (0..sites).map(|i| (i + 1) as f64).collect();
        let total: f64 = diag_probs.iter().sum();
        let rho_diag = DensityMatrix {
            matrix: DMatrix::from_fn(sites, sites, |i, j| {
                if i == j {
                    Complex64::new(diag_probs[i] / total, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            time: 0.0,
        };
        let g_obs = Observable::new(DMatrix::from_fn(sites, sites, |i, j| {
            if i == j {
                Complex64::new(if i < sites / 2 { 1.0 } else { 2.0 }, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))?;
        let conditioned = condition(&rho_diag, &g_obs, 2.0, 1e-10)?;
        let bayes_mass: f64 = (sites / 2..sites).map(|i| diag_probs[i] / total).sum();
        let mut bayes_dev = 0.0f64;
        for i in 0..sites {
            let expected = if i >= sites / 2 {
                diag_probs[i] / total / bayes_mass
            } else {
                0.0
            };
            bayes_dev = bayes_dev.max((conditioned.matrix[(i, i)].re - expected).abs());
        }
        checks.push(CheckResult::below(
            "conditioning/bayes",
            bayes_dev,
            1e-12,
            "diagonal conditioning reduces to Bayes restriction",
        ));
        let twice = condition(&conditioned, &g_obs, 2.0, 1e-10)?;
        checks.push(CheckResult::below(
            "conditioning/idempotent",
            (conditioned.matrix.clone() - twice.matrix).camax(),
            1e-10,
            "conditioning twice on the same value is idempotent",
        ));
        let h_obs = Observable::new(build_hamiltonian(model)?.matrix.to_dense())?;
        let proj = Observable::position_projector(sites, sites / 2)?;
        let classified_ok = commute_check(&g_obs, &rho_sites_diag_observable(sites)?, 1e-10)?
            && !commute_check(&h_obs, &proj, 1e-10)?;
        checks.push(CheckResult::below(
            "conditioning/commute_classification",
            if classified_ok { 0.0 } else { 1.0 },
            0.5,
            "commuting and non-commuting pairs classified correctly",
        ));
    }

    // winding drift: the generator-exact rate matches the closed form at
    // every site; the Monte Carlo comparison needs a site-uniform potential
    // (otherwise the walker averages the rate over the sites it visits)
    {
        let mut closed_form_dev = 0.0f64;
        for x in 0..sites {
            let exact = exact_winding_drift(model, x)?;
            let closed = d * hbar / (m * a * a) - model.potential(x) / hbar;
            closed_form_dev = closed_form_dev.max((exact - closed).abs());
        }
        checks.push(CheckResult::below(
            "winding_drift/closed_form",
            closed_form_dev,
            1e-12,
            "generator rate equals d hbar/(m a^2) - V/hbar at every site",
        ));
        let uniform_v = (0..sites)
            .all(|x| (model.potential(x) - model.potential(0)).abs() <= 1e-15);
        if uniform_v {
            let exact = exact_winding_drift(model, 0)?;
            let stat = winding_drift_statistic(model, 0, 1.0, 50_000, seed)?;
            checks.push(CheckResult::below(
                "winding_drift/mc_vs_exact",
                (stat.mean - exact).abs(),
                3.0 * stat.std_error,
                "sampled drift within three standard errors of the generator rate",
            ));
        }
    }

    // Monte Carlo kernel smoke test against uniformization; the z-scores
    // use the reference probabilities, whose standard errors are exact
    {
        let t = times.first().copied().unwrap_or(0.1).max(0.1);
        let n = 100_000u64;
        let est = estimate_lifted_kernel(model, 0, t, n, seed)?;
        let kernel = uniformize_tagged(&lifted, t, 1e-12, KernelSource::Lifted)?;
        let reference: Vec<f64> = (0..model.fiber_state_count())
            .map(|j| kernel.matrix[(fiber_index(0, 0), j)])
            .collect();
        let max_dev_sigma = (0..reference.len())
            .map(|s| {
                let p = reference[s];
                let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
                (est.probability(s) - p).abs() / sigma
            })
            .fold(0.0, f64::max);
        checks.push(CheckResult::below(
            "montecarlo/kernel_4sigma",
            max_dev_sigma,
            4.0,
            "sampled kernel within four standard errors per cell",
        ));
    }

    // negative control: a deliberately flipped winding orientation (the
    // three-quarter-turn sector in place of the quarter-turn one) must be
    // rejected loudly by the sector residual
    {
        let h = build_hamiltonian(model)?.matrix.to_dense();
        let sector = build_sector_generator(model, 3.0 * std::f64::consts::FRAC_PI_2)?
            .matrix
            .to_dense();
        let ih = h.map(|z| z * Complex64::new(0.0, 1.0 / hbar));
        let diff = -(ih + sector);
        let mean = diff.diagonal().sum() / Complex64::new(sites as f64, 0.0);
        let control =
            (diff - DMatrix::from_diagonal_element(sites, sites, mean)).camax();
        checks.push(CheckResult::above(
            "negative_control/flipped_orientation",
            control,
            1e-3,
            "mismatched winding orientation produces a loud residual",
        ));
        if !zero_vector_potential(model) {
            let mut one_sided = h.clone();
            let lat = model.lattice();
            for x in 0..sites {
                for axis in 0..lat.dimension() {
                    let g = model.constants().charge * hbar
                        / (model.constants().light_speed * m)
                        * model.vector_potential(x, axis)
                        / lat.spacing();
                    one_sided[(x, lat.neighbor(x, axis, 1))] += Complex64::new(0.0, g / 2.0);
                    one_sided[(x, x)] -= Complex64::new(0.0, g / 2.0);
                    one_sided[(x, lat.neighbor(x, axis, -1))] -= Complex64::new(0.0, -g / 2.0);
                    one_sided[(x, x)] -= Complex64::new(0.0, g / 2.0);
                }
            }
            checks.push(CheckResult::above(
                "negative_control/one_sided_gradient",
                sector_identity_residual_against(model, &one_sided)?,
                1e-3,
                "one-sided gradient convention produces a loud residual",
            ));
        }
    }

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerificationReport {
        model_hash: model.digest(),
        dt: model.dt(),
        k0: model.k0(),
        sector_constant: ResidualRecord {
            model_hash: model.digest(),
            t: times.last().copied().unwrap_or(0.0),
            residual: c0.residual,
            c0_re: c0.re,
            c0_im: c0.im,
        },
        parallelism: crate::parallelism().to_string(),
        checks,
        all_passed,
    })
}

// diagonal observable helper for the commute classification
fn rho_sites_diag_observable(sites: usize) -> Result<Observable> {
    Observable::new(DMatrix::from_fn(sites, sites, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}
