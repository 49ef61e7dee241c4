//! File export helpers: triplet operator dumps, CSV matrices and kernel
//! estimates, and JSON reports. Every file starts with a provenance header
//! carrying the tool version and the model hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::montecarlo::KernelEstimate;
use crate::operators::{fiber_state, ComplexOperator, SparseGenerator};

/// `tool modelhash` provenance string stamped into file headers.
pub fn provenance(model_hash: &str) -> String {
    format!("{} model={}", crate::tool_version(), model_hash)
}

/// Write a real generator in plain-text triplet form (`row col value`).
pub fn write_generator_triplets(
    path: impl AsRef<Path>,
    gen: &SparseGenerator,
    tag: &str,
    model_hash: &str,
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    gen.matrix.write_triplets(file, tag, &provenance(model_hash))
}

/// Write a complex operator in triplet form (`row col re im`).
pub fn write_operator_triplets(
    path: impl AsRef<Path>,
    op: &ComplexOperator,
    tag: &str,
    model_hash: &str,
) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    op.matrix.write_triplets(file, tag, &provenance(model_hash))
}

/// Dense complex matrix as CSV, row-major, `re,im` pairs per entry.
pub fn write_complex_matrix_csv(
    path: impl AsRef<Path>,
    matrix: &DMatrix<Complex64>,
    model_hash: &str,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# {}", provenance(model_hash))?;
    writeln!(file, "# rows={} cols={} format=re,im", matrix.nrows(), matrix.ncols())?;
    for r in 0..matrix.nrows() {
        let mut line = String::new();
        for c in 0..matrix.ncols() {
            if c > 0 {
                line.push(',');
            }
            let z = matrix[(r, c)];
            line.push_str(&format!("{:.17e},{:.17e}", z.re, z.im));
        }
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Dense real matrix as CSV, row-major.
pub fn write_real_matrix_csv(
    path: impl AsRef<Path>,
    matrix: &DMatrix<f64>,
    model_hash: &str,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# {}", provenance(model_hash))?;
    writeln!(file, "# rows={} cols={}", matrix.nrows(), matrix.ncols())?;
    for r in 0..matrix.nrows() {
        let mut line = String::new();
        for c in 0..matrix.ncols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.17e}", matrix[(r, c)]));
        }
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Kernel estimate as CSV: one `site,winding,count,prob,stderr` row per
/// fiber cell.
pub fn write_kernel_estimate_csv(
    path: impl AsRef<Path>,
    estimate: &KernelEstimate,
    model_hash: &str,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# {}", provenance(model_hash))?;
    writeln!(
        file,
        "# start={} t={} paths={} seed={}",
        estimate.start_site, estimate.t, estimate.n_paths, estimate.seed
    )?;
    writeln!(file, "site,winding,count,prob,stderr")?;
    for (state, &count) in estimate.counts.iter().enumerate() {
        let (site, winding) = fiber_state(state);
        writeln!(
            file,
            "{site},{winding},{count},{:.17e},{:.17e}",
            estimate.probability(state),
            estimate.std_error(state)
        )?;
    }
    Ok(())
}

/// Sparse joint-density export: `xi,nu,x,n,value` rows for nonzero entries.
pub fn write_joint_density_csv(
    path: impl AsRef<Path>,
    density: &crate::density::JointDensity,
    model_hash: &str,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# {}", provenance(model_hash))?;
    writeln!(file, "# time={} sites={}", density.time, density.sites())?;
    writeln!(file, "xi,nu,x,n,value")?;
    for r in 0..density.values.nrows() {
        let (xi, nu) = fiber_state(r);
        for c in 0..density.values.ncols() {
            let v = density.values[(r, c)];
            if v != 0.0 {
                let (x, n) = fiber_state(c);
                writeln!(file, "{xi},{nu},{x},{n},{v:.17e}")?;
            }
        }
    }
    Ok(())
}

/// Serialize a report as pretty JSON with a provenance wrapper.
pub fn write_json_report<T: Serialize>(
    path: impl AsRef<Path>,
    payload: &T,
    model_hash: &str,
) -> Result<()> {
    let wrapped = serde_json::json!({
        "tool": crate::tool_version(),
        "model_hash": model_hash,
        "report": payload,
    });
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, &wrapped)
        .map_err(|e| crate::Error::Config(format!("json serialization failed: {e}")))?;
    writeln!(file)?;
    Ok(())
}
