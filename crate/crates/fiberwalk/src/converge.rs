//! Continuum convergence study: evolve a Gaussian wavepacket with the
//! lattice propagator at successively halved spacings and measure the L2
//! error against the analytic continuum solution. The discrete Laplacian's
//! dispersion error is `O(a^2)`, so the error shrinks by about 4 per level.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::LatticeSpec;
use crate::model::{FieldConfig, ModelSpec, PhysicalConstants};
use crate::semigroup::expm_complex;

/// Parameters of the free Gaussian wavepacket study. The defaults keep the
/// packet far from the periodic boundary over the whole run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PacketStudy {
    /// Physical box length; the site count per level is `box_length / a`.
    pub box_length: f64,
    /// Initial packet width.
    pub sigma: f64,
    /// Initial packet momentum.
    pub momentum: f64,
    /// Packet center.
    pub center: f64,
    /// Evolution time.
    pub t: f64,
    /// Coarsest spacing; level `k` uses `a0 / 2^k`.
    pub coarsest_spacing: f64,
    pub levels: usize,
}

impl Default for PacketStudy {
    fn default() -> Self {
        Self {
            box_length: 32.0,
            sigma: 2.0,
            momentum: 0.5,
            center: 16.0,
            t: 2.0,
            coarsest_spacing: 1.0,
            levels: 3,
        }
    }
}

/// Sample a normalized Gaussian wavepacket
/// `psi(x) ~ exp(-(x-x0)^2 / (4 sigma^2) + i k0 (x - x0))` on `sites` points
/// with spacing `a`.
pub fn gaussian_wavepacket(
    sites: usize,
    spacing: f64,
    center: f64,
    sigma: f64,
    momentum: f64,
) -> DVector<Complex64> {
    let mut psi = DVector::<Complex64>::zeros(sites);
    for j in 0..sites {
        let x = j as f64 * spacing;
        let d = x - center;
        psi[j] = Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), momentum * d);
    }
    let norm = psi.norm();
    psi / Complex64::new(norm, 0.0)
}

/// Analytic free-particle evolution of the Gaussian wavepacket on the
/// infinite line: each momentum mode disperses by `e^{-i hbar k^2 t / 2m}`,
/// which integrates in closed form to
/// `(2 pi sigma^2)^{-1/4} (sigma / sqrt(beta)) e^{i k0 (x-x0) - i hbar k0^2 t / 2m - (x - x0 - hbar k0 t/m)^2 / (4 beta)}`
/// with `beta = sigma^2 + i hbar t / 2m`.
pub fn free_packet_reference(
    x: f64,
    t: f64,
    center: f64,
    sigma: f64,
    momentum: f64,
    mass: f64,
    hbar: f64,
) -> Complex64 {
    let beta = Complex64::new(sigma * sigma, 0.5 * hbar * t / mass);
    let d = x - center;
    let norm = Complex64::new(
        (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25),
        0.0,
    ) * (Complex64::new(sigma, 0.0) / beta.sqrt());
    let phase = Complex64::i() * (momentum * d - 0.5 * hbar * momentum * momentum * t / mass);
    let drift = d - hbar * momentum * t / mass;
    norm * (phase - Complex64::new(drift * drift, 0.0) / (4.0 * beta)).exp()
}

/// One refinement level of the convergence table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub spacing: f64,
    pub sites: usize,
    pub l2_error: f64,
    /// Error ratio to the previous (coarser) level; `None` on the first row.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub study: PacketStudy,
    pub rows: Vec<ConvergenceRow>,
    /// Observed order `log2(ratio)` averaged over levels.
    pub observed_order: f64,
}

/// Run the free-particle convergence study: for each level, build the
/// lattice Hamiltonian, apply `e^{-itH/hbar}` to the sampled packet, and
/// take the discrete L2 distance to the sampled continuum solution.
pub fn free_packet_convergence(study: &PacketStudy) -> Result<ConvergenceTable> {
    let constants = PhysicalConstants::natural();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(study.levels);
    for level in 0..study.levels {
        let a = study.coarsest_spacing / 2f64.powi(level as i32);
        let sites = (study.box_length / a).round() as usize;
        let lattice = LatticeSpec::new(1, sites, a)?;
        let fields = FieldConfig::zero(&lattice);
        let model = ModelSpec::new(lattice, constants.clone(), fields, None)?;
        let h = crate::operators::build_hamiltonian(&model)?.matrix.to_dense();
        let u = expm_complex(&h.map(|z| z * Complex64::new(0.0, -1.0)), study.t)?;
        let psi0 = gaussian_wavepacket(sites, a, study.center, study.sigma, study.momentum);
        let evolved = &u * &psi0;
        let mut reference = DVector::<Complex64>::zeros(sites);
        for j in 0..sites {
            reference[j] = free_packet_reference(
                j as f64 * a,
                study.t,
                study.center,
                study.sigma,
                study.momentum,
                1.0,
                1.0,
            ) * Complex64::new(a.sqrt(), 0.0);
        }
        let error = (evolved - reference).norm();
        let ratio = rows.last().map(|prev: &ConvergenceRow| prev.l2_error / error);
        rows.push(ConvergenceRow {
            spacing: a,
            sites,
            l2_error: error,
            ratio,
        });
    }
    let orders: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.ratio.map(|q| q.log2()))
        .collect();
    let observed_order = if orders.is_empty() {
        0.0
    } else {
        orders.iter().sum::<f64>() / orders.len() as f64
    };
    Ok(ConvergenceTable {
        study: *study,
        rows,
        observed_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_reduces_to_packet_at_zero_time() {
        let sites = 64;
        let a = 0.5;
        let psi0 = gaussian_wavepacket(sites, a, 16.0, 2.0, 0.5);
        for j in 0..sites {
            let r = free_packet_reference(j as f64 * a, 0.0, 16.0, 2.0, 0.5, 1.0, 1.0)
                * Complex64::new(a.sqrt(), 0.0);
            assert!((psi0[j] - r).norm() <= 1e-12, "site {j}");
        }
    }

    #[test]
    fn reference_preserves_norm() {
        let sites = 128;
        let a = 0.25;
        for t in [0.5, 2.0] {
            let mut norm2 = 0.0;
            for j in 0..sites {
                norm2 += free_packet_reference(j as f64 * a, t, 16.0, 2.0, 0.5, 1.0, 1.0)
                    .norm_sqr()
                    * a;
            }
            assert_relative_eq!(norm2, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_time_study_has_zero_error() {
        let study = PacketStudy {
            t: 0.0,
            levels: 2,
            ..PacketStudy::default()
        };
        let table = free_packet_convergence(&study).unwrap();
        for row in &table.rows {
            assert!(
                row.l2_error <= 1e-10,
                "a = {}: {:e}",
                row.spacing,
                row.l2_error
            );
        }
    }

    #[test]
    fn error_grows_monotonically_in_time() {
        let mut last = 0.0;
        for t in [0.5, 1.0, 2.0] {
            let study = PacketStudy {
                t,
                levels: 1,
                ..PacketStudy::default()
            };
            let err = free_packet_convergence(&study).unwrap().rows[0].l2_error;
            assert!(err > last, "t = {t}: {err} vs {last}");
            last = err;
        }
    }

    #[test]
    fn second_order_convergence() {
        let table = free_packet_convergence(&PacketStudy::default()).unwrap();
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows[1..] {
            let ratio = row.ratio.unwrap();
            assert!(
                (2.8..=5.2).contains(&ratio),
                "ratio {ratio} outside 4 +- 30%"
            );
        }
        assert!((table.observed_order - 2.0).abs() < 0.5);
    }
}
