//! Command-line front end: model ingestion, operator export, verification,
//! convergence sweeps, Monte Carlo runs, and density-matrix pipelines.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use fiberwalk::converge::{free_packet_convergence, gaussian_wavepacket, PacketStudy};
use fiberwalk::density::{
    condition, evolve_joint_density, outcome_probability, phase_average, prepare_joint_density,
    pure_state_check, quantum_evolution_residual, DensityMatrix, Observable,
};
use fiberwalk::equivalence::sector_constant_unchecked;
use fiberwalk::model::{presets, ModelSpec};
use fiberwalk::montecarlo::{
    action_statistic, estimate_lifted_kernel, variance_report, winding_drift_statistic,
    QuantumKernelEstimate,
};
use fiberwalk::operators::{
    build_base_generator, build_conjugate_generator, build_hamiltonian, build_lifted_generator,
    build_sector_generator, exact_winding_drift,
};
use fiberwalk::verify::verify_model;
use fiberwalk::{io, Error};

#[derive(Parser)]
#[command(
    name = "fiberwalk",
    version,
    about = "Lattice quantum dynamics as a phase-fiber classical jump process"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ModelArgs {
    /// Model config file (TOML) or a preset name: free, harmonic, constant-a
    #[arg(long)]
    model: String,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Export the model's operators in triplet form plus a JSON summary
    Build {
        #[command(flatten)]
        common: ModelArgs,
    },
    /// Run the verification checks and write a JSON report
    Verify {
        #[command(flatten)]
        common: ModelArgs,
        /// Kernel comparison times, comma separated
        #[arg(long, default_value = "0.05,0.2", value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Free-particle wavepacket convergence sweep over halved spacings
    Converge {
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Evolution time
        #[arg(long, default_value_t = 2.0)]
        t: f64,
        /// Number of refinement levels
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Monte Carlo kernel estimation and path statistics
    Mc {
        #[command(flatten)]
        common: ModelArgs,
        /// Evolution time
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// Number of sampled paths
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Starting site (flat index)
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
    /// Density-matrix pipeline: prepare, evolve, phase-average, condition
    Density {
        #[command(flatten)]
        common: ModelArgs,
        /// Evolution time
        #[arg(long, default_value_t = 0.2)]
        t: f64,
        /// Condition the evolved state on finding the particle at this site
        #[arg(long)]
        condition_site: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn load_model(spec: &str) -> Result<ModelSpec, Error> {
    if Path::new(spec).exists() {
        return fiberwalk::config::load_model(spec);
    }
    presets::by_name(spec).ok_or_else(|| {
        Error::Config(format!(
            "'{spec}' is neither a readable file nor a preset (available: {})",
            presets::NAMES.join(", ")
        ))
    })
}

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn cmd_build(common: &ModelArgs) -> Result<ExitCode, Error> {
    let model = load_model(&common.model)?;
    ensure_dir(&common.out)?;
    let hash = model.digest();
    let out = &common.out;

    io::write_generator_triplets(
        out.join("base.triplets"),
        &build_base_generator(&model)?,
        "base",
        &hash,
    )?;
    io::write_generator_triplets(
        out.join("lifted.triplets"),
        &build_lifted_generator(&model)?,
        "lifted",
        &hash,
    )?;
    io::write_generator_triplets(
        out.join("conjugate.triplets"),
        &build_conjugate_generator(&model)?,
        "conjugate",
        &hash,
    )?;
    io::write_operator_triplets(
        out.join("sector_quarter.triplets"),
        &build_sector_generator(&model, std::f64::consts::FRAC_PI_2)?,
        "sector-p=pi/2",
        &hash,
    )?;
    io::write_operator_triplets(
        out.join("hamiltonian.triplets"),
        &build_hamiltonian(&model)?,
        "hamiltonian",
        &hash,
    )?;

    let c0 = sector_constant_unchecked(&model)?;
    let summary = serde_json::json!({
        "dt": model.dt(),
        "k0": model.k0(),
        "c0_re": c0.re,
        "c0_im": c0.im,
        "sector_identity_residual": c0.residual,
        "sites": model.lattice().site_count(),
        "dimension": model.lattice().dimension(),
        "spacing": model.lattice().spacing(),
        "fiber_states": model.fiber_state_count(),
    });
    io::write_json_report(out.join("model_summary.json"), &summary, &hash)?;
    println!(
        "wrote 5 operator files and model_summary.json to {}",
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(common: &ModelArgs, times: &[f64], seed: u64) -> Result<ExitCode, Error> {
    let model = load_model(&common.model)?;
    ensure_dir(&common.out)?;
    let report = verify_model(&model, times, seed)?;
    io::write_json_report(
        common.out.join("verification.json"),
        &report,
        &report.model_hash,
    )?;
    for check in &report.checks {
        println!(
            "{} {}: {:.3e} {} {:.1e}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.measured,
            check.direction,
            check.threshold
        );
    }
    if report.all_passed {
        println!("verification passed ({} checks)", report.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!("verification FAILED ({failed} checks)");
        Ok(ExitCode::from(1))
    }
}

fn cmd_converge(out: &Path, t: f64, levels: usize, format: Format) -> Result<ExitCode, Error> {
    ensure_dir(out)?;
    let study = PacketStudy {
        t,
        levels,
        ..PacketStudy::default()
    };
    let table = free_packet_convergence(&study)?;
    match format {
        Format::Json => {
            io::write_json_report(out.join("convergence.json"), &table, "free-packet")?;
        }
        Format::Csv => {
            use std::io::Write;
            let mut file = std::fs::File::create(out.join("convergence.csv"))?;
            writeln!(
                file,
                "# {} study=free-packet t={t}",
                fiberwalk::tool_version()
            )?;
            writeln!(file, "spacing,sites,l2_error,ratio")?;
            for row in &table.rows {
                writeln!(
                    file,
                    "{},{},{:.17e},{}",
                    row.spacing,
                    row.sites,
                    row.l2_error,
                    row.ratio.map_or(String::new(), |r| format!("{r:.6}")),
                )?;
            }
        }
    }
    for row in &table.rows {
        println!(
            "a = {:<8} sites = {:<5} L2 error = {:.6e}{}",
            row.spacing,
            row.sites,
            row.l2_error,
            row.ratio
                .map_or(String::new(), |r| format!("  (ratio {r:.2})"))
        );
    }
    println!("observed order: {:.3}", table.observed_order);
    Ok(ExitCode::SUCCESS)
}

fn cmd_mc(
    common: &ModelArgs,
    t: f64,
    paths: u64,
    seed: u64,
    start: usize,
) -> Result<ExitCode, Error> {
    let model = load_model(&common.model)?;
    ensure_dir(&common.out)?;
    let hash = model.digest();
    let out = &common.out;

    let estimate = estimate_lifted_kernel(&model, start, t, paths, seed)?;
    io::write_kernel_estimate_csv(out.join("kernel_estimate.csv"), &estimate, &hash)?;

    // phase-weighted quantum row; skipped for models whose sector constant
    // is not derivable at finite spacing
    let quantum = match sector_constant_unchecked(&model) {
        Ok(c0) if c0.residual <= 1e-9 => {
            let q = QuantumKernelEstimate::from_kernel_estimate(&estimate, c0.value())?;
            io::write_complex_matrix_csv(
                out.join("quantum_row.csv"),
                &nalgebra::DMatrix::from_fn(1, q.entries.len(), |_, c| q.entries[c]),
                &hash,
            )?;
            Some(q)
        }
        _ => None,
    };

    let drift = winding_drift_statistic(
        &model,
        start,
        t.max(model.dt()),
        paths.min(200_000).max(2),
        seed,
    )?;
    let exact_drift = exact_winding_drift(&model, start)?;
    let steps = (t / model.dt()).round();
    let action = if steps >= 1.0
        && (t / model.dt() - steps).abs() <= 1e-9 * steps.max(1.0)
        && paths >= 2
    {
        Some(action_statistic(
            &model,
            start,
            t,
            paths.min(100_000),
            seed,
        )?)
    } else {
        None
    };
    let summary = serde_json::json!({
        "t": t,
        "paths": paths,
        "seed": seed,
        "start": start,
        "winding_drift": drift,
        "winding_drift_exact_at_start": exact_drift,
        "action": action,
        "variance": quantum.as_ref().map(variance_report),
        "parallelism": fiberwalk::parallelism(),
    });
    io::write_json_report(out.join("mc_summary.json"), &summary, &hash)?;
    println!(
        "sampled {paths} paths (t = {t}, seed = {seed}); drift = {:.4} +- {:.4}",
        drift.mean, drift.std_error
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_density(
    common: &ModelArgs,
    t: f64,
    condition_site: Option<usize>,
    format: Format,
) -> Result<ExitCode, Error> {
    let model = load_model(&common.model)?;
    ensure_dir(&common.out)?;
    let hash = model.digest();
    let out = &common.out;
    let sites = model.lattice().site_count();
    let spacing = model.lattice().spacing();

    // pure wavepacket initial state centered in the box
    let psi = gaussian_wavepacket(
        sites,
        spacing,
        spacing * sites as f64 / 2.0,
        spacing * sites as f64 / 6.0,
        0.5,
    );
    let rho0 = DensityMatrix::from_wavefunction(&psi, 0.0);
    let (rc0, scale) = prepare_joint_density(&rho0.matrix)?;
    let rc_t = evolve_joint_density(&rc0, &model, t)?;
    let rho_t_matrix = phase_average(&rc_t, &model)?.map(|z| z * scale);
    let rho_t = DensityMatrix {
        matrix: rho_t_matrix,
        time: t,
    };

    match format {
        Format::Csv => {
            io::write_complex_matrix_csv(out.join("rho_initial.csv"), &rho0.matrix, &hash)?;
            io::write_complex_matrix_csv(out.join("rho_evolved.csv"), &rho_t.matrix, &hash)?;
        }
        Format::Json => {
            let to_json = |m: &nalgebra::DMatrix<Complex64>| -> Vec<Vec<[f64; 2]>> {
                (0..m.nrows())
                    .map(|r| {
                        (0..m.ncols())
                            .map(|c| [m[(r, c)].re, m[(r, c)].im])
                            .collect()
                    })
                    .collect()
            };
            io::write_json_report(
                out.join("rho_matrices.json"),
                &serde_json::json!({
                    "initial": to_json(&rho0.matrix),
                    "evolved": to_json(&rho_t.matrix),
                    "t": t,
                }),
                &hash,
            )?;
        }
    }
    io::write_joint_density_csv(out.join("joint_density.csv"), &rc_t, &hash)?;

    let residual = quantum_evolution_residual(&rho0.matrix, &model, t)?;
    let (is_pure, _) = pure_state_check(&rho_t, 1e-6);
    let mut payload = serde_json::json!({
        "t": t,
        "trace_re": rho_t.trace().re,
        "purity": rho_t.purity(),
        "is_pure": is_pure,
        "evolution_residual": residual,
        "offdiagonal_mass": rho_t.offdiagonal_mass(),
    });

    if let Some(site) = condition_site {
        let projector = Observable::position_projector(sites, site)?;
        let probability = outcome_probability(&rho_t, &projector, 1.0, 1e-10)?;
        let conditioned = condition(&rho_t, &projector, 1.0, 1e-10)?;
        io::write_complex_matrix_csv(out.join("rho_conditioned.csv"), &conditioned.matrix, &hash)?;
        payload["conditioning"] = serde_json::json!({
            "g": 1.0,
            "site": site,
            "probability": probability,
            "purity": conditioned.purity(),
        });
    }
    io::write_json_report(out.join("density_summary.json"), &payload, &hash)?;
    println!(
        "evolved density matrix to t = {t}: trace = {:.6}, purity = {:.6}, residual = {:.2e}",
        rho_t.trace().re,
        rho_t.purity(),
        residual
    );
    Ok(ExitCode::SUCCESS)
}

fn run() -> Result<ExitCode, Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Build { common } => cmd_build(common),
        Command::Verify { common, t, seed } => cmd_verify(common, t, *seed),
        Command::Converge {
            out,
            t,
            levels,
            format,
        } => cmd_converge(out, *t, *levels, *format),
        Command::Mc {
            common,
            t,
            paths,
            seed,
            start,
        } => cmd_mc(common, *t, *paths, *seed, *start),
        Command::Density {
            common,
            t,
            condition_site,
            format,
        } => cmd_density(common, *t, *condition_site, *format),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
