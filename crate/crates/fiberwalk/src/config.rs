//! Model configuration files.
//!
//! Models are described by a TOML document with flat physical keys and two
//! optional field sections:
//!
//! ```toml
//! dimension = 1
//! sites_per_axis = 8
//! spacing = 1.0
//! mass = 1.0
//! charge = 1.0
//! light_speed = 1.0
//! hbar = 1.0
//! # k0 = 0.5            # optional; defaults to the midpoint rule
//!
//! [potential]
//! kind = "harmonic"     # zero | harmonic | custom-table
//! k = 0.1               # harmonic only
//! # center = [3.5]      # harmonic only, defaults to the box midpoint
//! # values = [...]      # custom-table only, one entry per site
//!
//! [vector_potential]
//! kind = "constant"     # zero | constant | custom-table
//! value = [0.1]         # constant only, one entry per axis
//! # values = [...]      # custom-table only, site-major, sites x axes entries
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::model::{FieldConfig, ModelSpec, PhysicalConstants};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dimension: usize,
    sites_per_axis: usize,
    spacing: f64,
    mass: f64,
    charge: f64,
    light_speed: f64,
    hbar: f64,
    k0: Option<f64>,
    #[serde(default)]
    potential: PotentialSection,
    #[serde(default)]
    vector_potential: VectorSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialSection {
    #[serde(default)]
    kind: PotentialKind,
    k: Option<f64>,
    center: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum PotentialKind {
    #[default]
    Zero,
    Harmonic,
    CustomTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorSection {
    #[serde(default)]
    kind: VectorKind,
    value: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum VectorKind {
    #[default]
    Zero,
    Constant,
    CustomTable,
}

/// Parse a model from TOML text.
pub fn model_from_toml(text: &str) -> Result<ModelSpec> {
    let cfg: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("failed to parse model: {e}")))?;
    let lattice = LatticeSpec::new(cfg.dimension, cfg.sites_per_axis, cfg.spacing)?;
    let constants = PhysicalConstants::new(cfg.mass, cfg.charge, cfg.light_speed, cfg.hbar)?;
    let sites = lattice.site_count();
    let d = lattice.dimension();

    let scalar = match cfg.potential.kind {
        PotentialKind::Zero => vec![0.0; sites],
        PotentialKind::Harmonic => {
            let k = cfg.potential.k.ok_or_else(|| {
                Error::Config("potential.kind = \"harmonic\" requires potential.k".into())
            })?;
            FieldConfig::harmonic(&lattice, k, cfg.potential.center.clone())?
                .scalar_table()
                .to_vec()
        }
        PotentialKind::CustomTable => cfg.potential.values.clone().ok_or_else(|| {
            Error::Config("potential.kind = \"custom-table\" requires potential.values".into())
        })?,
    };

    let vector = match cfg.vector_potential.kind {
        VectorKind::Zero => vec![0.0; sites * d],
        VectorKind::Constant => {
            let v = cfg.vector_potential.value.clone().ok_or_else(|| {
                Error::Config("vector_potential.kind = \"constant\" requires vector_potential.value".into())
            })?;
            expand_constant_vector(&lattice, &v)?
        }
        VectorKind::CustomTable => cfg.vector_potential.values.clone().ok_or_else(|| {
            Error::Config(
                "vector_potential.kind = \"custom-table\" requires vector_potential.values".into(),
            )
        })?,
    };

    let fields = FieldConfig::new(&lattice, vector, scalar)?;
    ModelSpec::new(lattice, constants, fields, cfg.k0)
}

fn expand_constant_vector(lattice: &LatticeSpec, value: &[f64]) -> Result<Vec<f64>> {
    if value.len() != lattice.dimension() {
        return Err(Error::Config(format!(
            "vector_potential.value has {} components, lattice dimension is {}",
            value.len(),
            lattice.dimension()
        )));
    }
    let mut vp = Vec::with_capacity(lattice.site_count() * value.len());
    for _ in 0..lattice.site_count() {
        vp.extend_from_slice(value);
    }
    Ok(vp)
}

/// Load a model from a TOML file on disk.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    model_from_toml(&text)
}
