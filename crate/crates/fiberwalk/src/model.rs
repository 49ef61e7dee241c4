//! Physical model definition: constants, external fields, and the derived
//! regularization scales that keep every jump rate nonnegative.
//!
//! The time step is tied to the lattice spacing by `dt = m a^2 / hbar`, and the
//! winding-diffusion cutoff `K0` must satisfy
//!
//! ```text
//! sup|V| / 2  <=  K0  <=  hbar^2 / (a^2 m)
//! ```
//!
//! where `V(x) = e^2/(2 c^2 m) |A(x)|^2 + e phi(x)` is the effective potential.
//! Models violating the bound are rejected at construction.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub mass: f64,
    pub charge: f64,
    pub light_speed: f64,
    pub hbar: f64,
}

impl PhysicalConstants {
    pub fn new(mass: f64, charge: f64, light_speed: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("light_speed", light_speed), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstants(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !charge.is_finite() {
            return Err(Error::InvalidConstants("charge must be finite".into()));
        }
        Ok(Self {
            mass,
            charge,
            light_speed,
            hbar,
        })
    }

    /// Natural units: `m = c = hbar = 1`, unit charge.
    pub fn natural() -> Self {
        Self {
            mass: 1.0,
            charge: 1.0,
            light_speed: 1.0,
            hbar: 1.0,
        }
    }
}

/// External electromagnetic potential sampled at lattice sites.
///
/// The vector potential is stored site-major (`site * d + axis`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    vector_potential: Vec<f64>,
    scalar_potential: Vec<f64>,
}

impl FieldConfig {
    pub fn new(
        lattice: &LatticeSpec,
        vector_potential: Vec<f64>,
        scalar_potential: Vec<f64>,
    ) -> Result<Self> {
        let sites = lattice.site_count();
        let d = lattice.dimension();
        if vector_potential.len() != sites * d {
            return Err(Error::InvalidField(format!(
                "vector potential table has {} entries, expected {} (sites) x {} (axes)",
                vector_potential.len(),
                sites,
                d
            )));
        }
        if scalar_potential.len() != sites {
            return Err(Error::InvalidField(format!(
                "scalar potential table has {} entries, expected {}",
                scalar_potential.len(),
                sites
            )));
        }
        if vector_potential.iter().any(|v| !v.is_finite())
            || scalar_potential.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidField("field values must be finite".into()));
        }
        Ok(Self {
            vector_potential,
            scalar_potential,
        })
    }

    pub fn zero(lattice: &LatticeSpec) -> Self {
        Self {
            vector_potential: vec![0.0; lattice.site_count() * lattice.dimension()],
            scalar_potential: vec![0.0; lattice.site_count()],
        }
    }

    /// Uniform vector potential, zero scalar potential.
    pub fn constant_vector(lattice: &LatticeSpec, a: &[f64]) -> Result<Self> {
        if a.len() != lattice.dimension() {
            return Err(Error::DimensionMismatch {
                expected: lattice.dimension(),
                found: a.len(),
            });
        }
        let sites = lattice.site_count();
        let mut vp = Vec::with_capacity(sites * a.len());
        for _ in 0..sites {
            vp.extend_from_slice(a);
        }
        Self::new(lattice, vp, vec![0.0; sites])
    }

    /// Harmonic scalar potential `phi(x) = k/2 * |x - x_c|^2`, zero vector
    /// potential. The center defaults to the box midpoint `(L-1) a / 2` on
    /// every axis.
    pub fn harmonic(lattice: &LatticeSpec, spring: f64, center: Option<Vec<f64>>) -> Result<Self> {
        let d = lattice.dimension();
        let default_c = (lattice.sites_per_axis() as f64 - 1.0) / 2.0 * lattice.spacing();
        let center = center.unwrap_or_else(|| vec![default_c; d]);
        if center.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: center.len(),
            });
        }
        let sites = lattice.site_count();
        let mut phi = Vec::with_capacity(sites);
        for s in 0..sites {
            let pos = lattice.position(s);
            let r2: f64 = pos
                .iter()
                .zip(&center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum();
            phi.push(0.5 * spring * r2);
        }
        Self::new(lattice, vec![0.0; sites * d], phi)
    }

    /// Component `axis` of the vector potential at `site`.
    pub fn vector(&self, site: usize, axis: usize, dimension: usize) -> f64 {
        self.vector_potential[site * dimension + axis]
    }

    pub fn scalar(&self, site: usize) -> f64 {
        self.scalar_potential[site]
    }

    pub fn vector_table(&self) -> &[f64] {
        &self.vector_potential
    }

    pub fn scalar_table(&self) -> &[f64] {
        &self.scalar_potential
    }
}

/// Time discretization scale `dt = m a^2 / hbar`.
pub fn derive_dt(lattice: &LatticeSpec, constants: &PhysicalConstants) -> f64 {
    constants.mass * lattice.spacing() * lattice.spacing() / constants.hbar
}

/// Effective potential `V(x) = e^2/(2 c^2 m) |A(x)|^2 + e phi(x)`.
pub fn effective_potential(
    fields: &FieldConfig,
    constants: &PhysicalConstants,
    lattice: &LatticeSpec,
    site: usize,
) -> f64 {
    let d = lattice.dimension();
    let a2: f64 = (0..d).map(|i| fields.vector(site, i, d).powi(2)).sum();
    let e = constants.charge;
    e * e / (2.0 * constants.light_speed * constants.light_speed * constants.mass) * a2
        + e * fields.scalar(site)
}

/// Split a signed value into its positive and negative parts
/// `(max(v, 0), max(-v, 0))`; the difference of the parts reconstructs `v`
/// and at most one part is nonzero.
pub fn split_vector_potential(value: f64) -> (f64, f64) {
    (value.max(0.0), (-value).max(0.0))
}

/// Admissible interval for the energy cutoff `K0` given the fields.
fn cutoff_interval(
    fields: &FieldConfig,
    constants: &PhysicalConstants,
    lattice: &LatticeSpec,
) -> Result<(f64, f64)> {
    let sites = lattice.site_count();
    let sup_v = (0..sites)
        .map(|s| effective_potential(fields, constants, lattice, s).abs())
        .fold(0.0f64, f64::max);
    let a = lattice.spacing();
    let limit = constants.hbar * constants.hbar / (a * a * constants.mass);
    if sup_v / 2.0 > limit {
        return Err(Error::InfeasibleCutoff {
            sup_v,
            limit: 2.0 * limit,
        });
    }
    Ok((sup_v / 2.0, limit))
}

/// Default energy cutoff: the midpoint of the admissible interval
/// `[sup|V|/2, hbar^2/(a^2 m)]`. Errors when the interval is empty, which
/// signals the lattice is too coarse for the given potential.
pub fn choose_k0(
    fields: &FieldConfig,
    constants: &PhysicalConstants,
    lattice: &LatticeSpec,
) -> Result<f64> {
    let (lo, hi) = cutoff_interval(fields, constants, lattice)?;
    Ok(0.5 * (lo + hi))
}

/// Complete model: lattice, constants, fields, cutoff and derived scales.
///
/// Immutable after construction; cheap to share read-only across workers.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSpec {
    lattice: LatticeSpec,
    constants: PhysicalConstants,
    fields: FieldConfig,
    k0: f64,
    dt: f64,
    #[serde(skip)]
    potential: Vec<f64>,
}

impl ModelSpec {
    /// Build a model, validating the rate bounds. With `k0 = None` the
    /// midpoint rule of [`choose_k0`] is applied.
    pub fn new(
        lattice: LatticeSpec,
        constants: PhysicalConstants,
        fields: FieldConfig,
        k0: Option<f64>,
    ) -> Result<Self> {
        // field tables must match the lattice
        let _ = FieldConfig::new(
            &lattice,
            fields.vector_table().to_vec(),
            fields.scalar_table().to_vec(),
        )?;
        let (lo, hi) = cutoff_interval(&fields, &constants, &lattice)?;
        let k0 = match k0 {
            Some(k) => {
                // tolerate exact boundary values
                if k < lo - 1e-15 || k > hi + 1e-15 {
                    return Err(Error::CutoffOutOfRange { k0: k, lo, hi });
                }
                k
            }
            None => 0.5 * (lo + hi),
        };
        let dt = derive_dt(&lattice, &constants);
        let potential = (0..lattice.site_count())
            .map(|s| effective_potential(&fields, &constants, &lattice, s))
            .collect();
        Ok(Self {
            lattice,
            constants,
            fields,
            k0,
            dt,
            potential,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn fields(&self) -> &FieldConfig {
        &self.fields
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// `dt = m a^2 / hbar`, fixed by construction.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Effective potential at `site` (precomputed).
    pub fn potential(&self, site: usize) -> f64 {
        self.potential[site]
    }

    /// Kinetic hop rate `hbar / (2 m a^2)` per direction.
    pub fn hop_rate(&self) -> f64 {
        let a = self.lattice.spacing();
        self.constants.hbar / (2.0 * self.constants.mass * a * a)
    }

    /// Dimensionless gauge coupling `2 a e / (c hbar)` multiplying `A` in the
    /// hop rates.
    pub fn gauge_coupling(&self) -> f64 {
        2.0 * self.lattice.spacing() * self.constants.charge
            / (self.constants.light_speed * self.constants.hbar)
    }

    /// Number of states of the fiber-extended process, `4 L^d`.
    pub fn fiber_state_count(&self) -> usize {
        4 * self.lattice.site_count()
    }

    /// Vector potential component at a site.
    pub fn vector_potential(&self, site: usize, axis: usize) -> f64 {
        self.fields.vector(site, axis, self.lattice.dimension())
    }

    /// Model with the vector potential negated and everything else unchanged.
    pub fn flip_vector_potential(&self) -> Result<Self> {
        let flipped: Vec<f64> = self.fields.vector_table().iter().map(|v| -v).collect();
        let fields = FieldConfig::new(&self.lattice, flipped, self.fields.scalar_table().to_vec())?;
        Self::new(
            self.lattice.clone(),
            self.constants.clone(),
            fields,
            Some(self.k0),
        )
    }

    /// Stable hex digest of the model parameters, for output provenance.
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!({
            "lattice": &self.lattice,
            "constants": &self.constants,
            "vector_potential": self.fields.vector_table(),
            "scalar_potential": self.fields.scalar_table(),
            "k0": self.k0,
        });
        let bytes = serde_json::to_vec(&canonical).expect("serializable");
        let hash = Sha256::digest(&bytes);
        let mut out = String::new();
        for b in &hash[..6] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// Named desk-scale models used by the CLI and the test suites.
pub mod presets {
    use super::*;

    pub const NAMES: &[&str] = &["free", "harmonic", "constant-a"];

    /// Free particle: d=1, L=8, a=1, natural units, no fields.
    pub fn free() -> ModelSpec {
        let lattice = LatticeSpec::new(1, 8, 1.0).unwrap();
        let constants = PhysicalConstants::natural();
        let fields = FieldConfig::zero(&lattice);
        ModelSpec::new(lattice, constants, fields, None).unwrap()
    }

    /// Harmonic trap: d=1, L=8, a=1, `phi = k/2 (x - x_c)^2` with `k = 0.1`.
    pub fn harmonic() -> ModelSpec {
        let lattice = LatticeSpec::new(1, 8, 1.0).unwrap();
        let constants = PhysicalConstants::natural();
        let fields = FieldConfig::harmonic(&lattice, 0.1, None).unwrap();
        ModelSpec::new(lattice, constants, fields, None).unwrap()
    }

    /// Uniform vector potential A = 0.1 along x: d=1, L=8, a=1.
    pub fn constant_a() -> ModelSpec {
        let lattice = LatticeSpec::new(1, 8, 1.0).unwrap();
        let constants = PhysicalConstants::natural();
        let fields = FieldConfig::constant_vector(&lattice, &[0.1]).unwrap();
        ModelSpec::new(lattice, constants, fields, None).unwrap()
    }

    pub fn by_name(name: &str) -> Option<ModelSpec> {
        match name {
            "free" => Some(free()),
            "harmonic" => Some(harmonic()),
            "constant-a" => Some(constant_a()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lat1(l: usize, a: f64) -> LatticeSpec {
        LatticeSpec::new(1, l, a).unwrap()
    }

    #[test]
    fn dt_formula() {
        let c = PhysicalConstants::new(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(derive_dt(&lat1(4, 0.5), &c), 0.5);
        let n = PhysicalConstants::natural();
        assert_relative_eq!(derive_dt(&lat1(4, 1.0), &n), 1.0);
        assert_relative_eq!(derive_dt(&lat1(4, 0.1), &n), 0.01);
    }

    #[test]
    fn dt_scales_quadratically_in_spacing() {
        let c = PhysicalConstants::natural();
        for k in 1..10 {
            let a = 0.1 * k as f64;
            let ratio = derive_dt(&lat1(4, 2.0 * a), &c) / derive_dt(&lat1(4, a), &c);
            assert_relative_eq!(ratio, 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn effective_potential_values() {
        let lat = LatticeSpec::new(3, 2, 1.0).unwrap();
        let n = PhysicalConstants::natural();
        // A = 0, phi = 2 everywhere -> V = 2
        let f = FieldConfig::new(&lat, vec![0.0; 8 * 3], vec![2.0; 8]).unwrap();
        assert_relative_eq!(effective_potential(&f, &n, &lat, 0), 2.0);
        // zero fields -> 0
        let z = FieldConfig::zero(&lat);
        assert_relative_eq!(effective_potential(&z, &n, &lat, 3), 0.0);
        // A = (3,0,0), phi = 0 -> e^2/(2c^2 m) * 9 = 4.5
        let f = FieldConfig::constant_vector(&lat, &[3.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(effective_potential(&f, &n, &lat, 5), 4.5);
    }

    #[test]
    fn potential_split() {
        assert_eq!(split_vector_potential(-0.3), (0.0, 0.3));
        assert_eq!(split_vector_potential(0.0), (0.0, 0.0));
        assert_eq!(split_vector_potential(1.7), (1.7, 0.0));
    }

    #[test]
    fn cutoff_midpoint_rule() {
        // sup|V| = 1, hbar^2/(a^2 m) = 2 -> midpoint of [0.5, 2] = 1.25
        let lat = lat1(4, 1.0);
        let c = PhysicalConstants::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let f = FieldConfig::new(&lat, vec![0.0; 4], vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        assert_relative_eq!(choose_k0(&f, &c, &lat).unwrap(), 1.25);
        // V = 0, limit 1 -> 0.5
        let n = PhysicalConstants::natural();
        let z = FieldConfig::zero(&lat);
        assert_relative_eq!(choose_k0(&z, &n, &lat).unwrap(), 0.5);
    }

    #[test]
    fn cutoff_infeasible() {
        // sup|V| = 5 with limit 2: no admissible K0
        let lat = lat1(4, 1.0);
        let c = PhysicalConstants::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let f = FieldConfig::new(&lat, vec![0.0; 4], vec![5.0, 0.0, 0.0, 0.0]).unwrap();
        match choose_k0(&f, &c, &lat) {
            Err(Error::InfeasibleCutoff { .. }) => {}
            other => panic!("expected infeasible cutoff, got {other:?}"),
        }
    }

    #[test]
    fn model_rejects_out_of_range_k0() {
        let lat = lat1(8, 1.0);
        let n = PhysicalConstants::natural();
        let z = FieldConfig::zero(&lat);
        assert!(ModelSpec::new(lat.clone(), n.clone(), z.clone(), Some(1.5)).is_err());
        assert!(ModelSpec::new(lat.clone(), n.clone(), z.clone(), Some(-0.1)).is_err());
        let m = ModelSpec::new(lat, n, z, Some(1.0)).unwrap();
        assert_relative_eq!(m.k0(), 1.0);
    }

    #[test]
    fn preset_parameters() {
        let free = presets::free();
        assert_relative_eq!(free.k0(), 0.5);
        assert_relative_eq!(free.dt(), 1.0);
        assert_relative_eq!(free.hop_rate(), 0.5);
        let h = presets::harmonic();
        assert!(h.k0() > 0.5 && h.k0() < 1.0);
        let ca = presets::constant_a();
        assert_relative_eq!(ca.potential(0), 0.005);
        assert_relative_eq!(ca.gauge_coupling() * ca.vector_potential(0, 0), 0.2);
    }

    #[test]
    fn digest_is_stable_and_distinguishes_models() {
        let a = presets::free().digest();
        let b = presets::free().digest();
        let c = presets::harmonic().digest();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 12);
    }
}
