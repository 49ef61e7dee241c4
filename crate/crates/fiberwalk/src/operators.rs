//! Sparse operators of the model: the base diffusion generator on the
//! lattice, its lift to the lattice x Z4 winding fiber, the conjugate lift,
//! the fiber-momentum sector generators, and the discrete Hamiltonian.
//!
//! Conventions, fixed once and validated numerically by the sector identity:
//!
//! * Generator entry `(s, s')` is the jump rate `s -> s'`; rows sum to zero.
//! * Kinetic hops `x -> x +- a e_i` increment the winding, `n -> n + 1`, at
//!   rate `r = hbar / (2 m a^2)` each.
//! * Gauge-weighted hops leave the winding fixed: the forward hop carries
//!   `A_i^- = max(-A_i, 0)` and the backward hop carries `A_i^+ = max(A_i, 0)`,
//!   each with rate `r * (2 a e / c hbar) * A_i^{-+}`, so the lattice marginal
//!   drifts at `-e A / (c m)`.
//! * Winding-only jumps occur at rates `(K0 - V/2)/hbar` upward and
//!   `(K0 + V/2)/hbar` downward, giving the exact winding drift
//!   `d hbar/(m a^2) - V(x)/hbar`.
//! * The sector generator at fiber momentum `p` collects winding shifts with
//!   weight `e^{i p dn}`, so the `p = pi/2` sector is the `i^n`-weighted fiber
//!   sum. It satisfies `Lhat(pi/2) = -(i/hbar) H - c0 I` with a constant `c0`
//!   derived in the `equivalence` module.
//!
//! The conjugate generator mirrors every winding shift (`dn -> -dn`); its
//! sector generators are the entrywise complex conjugates of the lifted ones.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{split_vector_potential, ModelSpec};
use crate::sparse::{CooBuilder, CsrMatrix};

/// Order of the winding fiber.
pub const FIBER: usize = 4;

/// Flat state index of `(site, winding mod 4)` on the extended space.
pub fn fiber_index(site: usize, winding: usize) -> usize {
    site * FIBER + (winding % FIBER)
}

/// Inverse of [`fiber_index`].
pub fn fiber_state(index: usize) -> (usize, usize) {
    (index / FIBER, index % FIBER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateSpace {
    /// Bare lattice, `L^d` states.
    Lattice,
    /// Lattice x winding fiber, `4 L^d` states.
    LatticeFiber,
}

/// Real sparse Markov generator together with its state-space tag.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub matrix: CsrMatrix<f64>,
    pub space: StateSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// Fiber-momentum sector generator at angle `p`.
    Sector { p: f64 },
    Hamiltonian,
}

/// Complex sparse operator on the bare lattice.
#[derive(Debug, Clone)]
pub struct ComplexOperator {
    pub matrix: CsrMatrix<Complex64>,
    pub kind: OperatorKind,
}

/// Winding orientation of a fiber lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Orientation {
    /// Kinetic hops increment the winding.
    Lifted,
    /// Mirror image: kinetic hops decrement the winding.
    Conjugate,
}

impl Orientation {
    fn sign(self) -> i64 {
        match self {
            Orientation::Lifted => 1,
            Orientation::Conjugate => -1,
        }
    }
}

/// Base diffusion generator on the bare lattice.
///
/// Hop rates are `r (1 + (2ae/c hbar) A_i^-)` forward and
/// `r (1 + (2ae/c hbar) A_i^+)` backward per axis, with the diagonal
/// balancing each row to zero.
pub fn build_base_generator(model: &ModelSpec) -> Result<SparseGenerator> {
    let lat = model.lattice();
    let sites = lat.site_count();
    let r = model.hop_rate();
    let alpha = model.gauge_coupling();
    let mut coo = CooBuilder::new(sites);
    for x in 0..sites {
        let mut exit = 0.0;
        for axis in 0..lat.dimension() {
            let (a_plus, a_minus) = split_vector_potential(model.vector_potential(x, axis));
            let fwd = r * (1.0 + alpha * a_minus);
            let bwd = r * (1.0 + alpha * a_plus);
            for (rate, state) in [(fwd, x), (bwd, x)] {
                if rate < 0.0 {
                    return Err(Error::NegativeRate { state, rate });
                }
            }
            coo.add(x, lat.neighbor(x, axis, 1), fwd);
            coo.add(x, lat.neighbor(x, axis, -1), bwd);
            exit += fwd + bwd;
        }
        coo.add(x, x, -exit);
    }
    Ok(SparseGenerator {
        matrix: coo.finalize(),
        space: StateSpace::Lattice,
    })
}

/// One elementary jump of the fiber-extended process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberJump {
    /// Destination site (equals the source site for winding-only jumps).
    pub target_site: usize,
    /// Winding increment, one of -1, 0, +1.
    pub winding_shift: i64,
    pub rate: f64,
    pub kind: JumpKind,
}

/// Classification of a fiber jump, used by the path sampler to track
/// physical displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    /// Lattice hop one step along `axis` in direction `dir`.
    Hop { axis: u8, dir: i8 },
    /// Winding-only jump.
    Winding,
}

/// Jump table of one site of the lifted process. Rates do not depend on the
/// winding coordinate, so one table per site describes all four fiber copies.
pub fn site_jumps(model: &ModelSpec, site: usize) -> Result<Vec<FiberJump>> {
    site_jumps_oriented(model, site, Orientation::Lifted)
}

fn site_jumps_oriented(
    model: &ModelSpec,
    site: usize,
    orientation: Orientation,
) -> Result<Vec<FiberJump>> {
    let lat = model.lattice();
    let r = model.hop_rate();
    let alpha = model.gauge_coupling();
    let hbar = model.constants().hbar;
    let sgn = orientation.sign();
    let mut jumps = Vec::with_capacity(4 * lat.dimension() + 2);
    for axis in 0..lat.dimension() {
        let (a_plus, a_minus) = split_vector_potential(model.vector_potential(site, axis));
        let up = lat.neighbor(site, axis, 1);
        let down = lat.neighbor(site, axis, -1);
        // kinetic hops advance the winding
        jumps.push(FiberJump {
            target_site: up,
            winding_shift: sgn,
            rate: r,
            kind: JumpKind::Hop {
                axis: axis as u8,
                dir: 1,
            },
        });
        jumps.push(FiberJump {
            target_site: down,
            winding_shift: sgn,
            rate: r,
            kind: JumpKind::Hop {
                axis: axis as u8,
                dir: -1,
            },
        });
        // gauge-weighted hops leave the winding fixed
        if a_minus > 0.0 {
            jumps.push(FiberJump {
                target_site: up,
                winding_shift: 0,
                rate: r * alpha * a_minus,
                kind: JumpKind::Hop {
                    axis: axis as u8,
                    dir: 1,
                },
            });
        }
        if a_plus > 0.0 {
            jumps.push(FiberJump {
                target_site: down,
                winding_shift: 0,
                rate: r * alpha * a_plus,
                kind: JumpKind::Hop {
                    axis: axis as u8,
                    dir: -1,
                },
            });
        }
    }
    let v = model.potential(site);
    let up_rate = (model.k0() - 0.5 * v) / hbar;
    let down_rate = (model.k0() + 0.5 * v) / hbar;
    for (shift, rate) in [(sgn, up_rate), (-sgn, down_rate)] {
        if rate < -1e-15 {
            return Err(Error::NegativeRate {
                state: fiber_index(site, 0),
                rate,
            });
        }
        if rate > 0.0 {
            jumps.push(FiberJump {
                target_site: site,
                winding_shift: shift,
                rate,
                kind: JumpKind::Winding,
            });
        }
    }
    Ok(jumps)
}

fn build_fiber_generator(model: &ModelSpec, orientation: Orientation) -> Result<SparseGenerator> {
    let sites = model.lattice().site_count();
    let dim = FIBER * sites;
    let mut coo = CooBuilder::new(dim);
    for x in 0..sites {
        let jumps = site_jumps_oriented(model, x, orientation)?;
        let exit: f64 = jumps.iter().map(|j| j.rate).sum();
        for n in 0..FIBER {
            let from = fiber_index(x, n);
            for j in &jumps {
                let to_winding = (n as i64 + j.winding_shift).rem_euclid(FIBER as i64) as usize;
                coo.add(from, fiber_index(j.target_site, to_winding), j.rate);
            }
            coo.add(from, from, -exit);
        }
    }
    Ok(SparseGenerator {
        matrix: coo.finalize(),
        space: StateSpace::LatticeFiber,
    })
}

/// Generator of the fiber-extended process on lattice x Z4.
pub fn build_lifted_generator(model: &ModelSpec) -> Result<SparseGenerator> {
    build_fiber_generator(model, Orientation::Lifted)
}

/// Winding-mirrored lift: same lattice dynamics, every winding shift negated.
/// Its fiber Fourier transform is the entrywise complex conjugate of the
/// lifted generator's.
pub fn build_conjugate_generator(model: &ModelSpec) -> Result<SparseGenerator> {
    build_fiber_generator(model, Orientation::Conjugate)
}

/// Sector generator at fiber momentum `p`: winding shifts `dn` enter with
/// weight `e^{i p dn}`, so `p = 0` reproduces the fiber-summed real generator
/// and `p = pi/2` weights each shift by `i^{dn}`.
pub fn build_sector_generator(model: &ModelSpec, p: f64) -> Result<ComplexOperator> {
    let sites = model.lattice().site_count();
    let mut coo = CooBuilder::new(sites);
    for x in 0..sites {
        let jumps = site_jumps_oriented(model, x, Orientation::Lifted)?;
        let exit: f64 = jumps.iter().map(|j| j.rate).sum();
        for j in &jumps {
            let phase = Complex64::from_polar(1.0, p * j.winding_shift as f64);
            coo.add(x, j.target_site, phase * j.rate);
        }
        coo.add(x, x, Complex64::new(-exit, 0.0));
    }
    Ok(ComplexOperator {
        matrix: coo.finalize(),
        kind: OperatorKind::Sector { p },
    })
}

/// Discrete Hamiltonian
/// `H = -(hbar^2 / 2m) Lap_a + (i e hbar / c m) A . grad_a + V`
/// with `grad_a` the symmetric central difference. Hermitian for
/// site-constant `A`; validated by [`hermitian_defect`].
pub fn build_hamiltonian(model: &ModelSpec) -> Result<ComplexOperator> {
    let lat = model.lattice();
    let sites = lat.site_count();
    let a = lat.spacing();
    let hbar = model.constants().hbar;
    let m = model.constants().mass;
    let e = model.constants().charge;
    let c = model.constants().light_speed;
    let kin = hbar * hbar / (2.0 * m * a * a);
    let mut coo = CooBuilder::new(sites);
    for x in 0..sites {
        for axis in 0..lat.dimension() {
            let grad = e * hbar / (c * m) * model.vector_potential(x, axis) / (2.0 * a);
            coo.add(
                x,
                lat.neighbor(x, axis, 1),
                Complex64::new(-kin, grad),
            );
            coo.add(
                x,
                lat.neighbor(x, axis, -1),
                Complex64::new(-kin, -grad),
            );
        }
        let diag = 2.0 * lat.dimension() as f64 * kin + model.potential(x);
        coo.add(x, x, Complex64::new(diag, 0.0));
    }
    Ok(ComplexOperator {
        matrix: coo.finalize(),
        kind: OperatorKind::Hamiltonian,
    })
}

/// Largest deviation of a complex matrix from Hermitian symmetry.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

/// Unitary fiber Fourier matrix `F[(x,n),(x',k)] = delta_{xx'} i^{nk} / 2`.
/// Conjugating the lifted generator as `F^dagger G F` block-diagonalizes it
/// into the four sector generators.
pub fn fiber_fourier_matrix(sites: usize) -> DMatrix<Complex64> {
    let dim = FIBER * sites;
    let mut f = DMatrix::<Complex64>::zeros(dim, dim);
    let half = Complex64::new(0.5, 0.0);
    for x in 0..sites {
        for n in 0..FIBER {
            for k in 0..FIBER {
                f[(fiber_index(x, n), fiber_index(x, k))] =
                    half * Complex64::i().powu((n * k) as u32);
            }
        }
    }
    f
}

/// Fiber transform of a kernel on lattice x Z4: the winding-difference
/// resolved blocks are collected with weight `e^{i p dn}`. On the Z4 fiber
/// only multiples of `pi/2` diagonalize exactly; other angles are rejected.
pub fn fiber_transform(kernel: &DMatrix<f64>, sites: usize, p: f64) -> Result<DMatrix<Complex64>> {
    if kernel.nrows() != FIBER * sites || kernel.ncols() != FIBER * sites {
        return Err(Error::DimensionMismatch {
            expected: FIBER * sites,
            found: kernel.nrows(),
        });
    }
    let steps = p / std::f64::consts::FRAC_PI_2;
    if (steps - steps.round()).abs() > 1e-12 {
        return Err(Error::InvalidFiberAngle { p });
    }
    let k = (steps.round() as i64).rem_euclid(FIBER as i64) as u32;
    let mut out = DMatrix::<Complex64>::zeros(sites, sites);
    for x in 0..sites {
        for xp in 0..sites {
            let mut acc = Complex64::new(0.0, 0.0);
            for dn in 0..FIBER {
                acc += Complex64::i().powu(k * dn as u32) * kernel[(fiber_index(x, 0), fiber_index(xp, dn))];
            }
            out[(x, xp)] = acc;
        }
    }
    Ok(out)
}

/// Exact expected winding rate `E[dn/dt]` at a site, computed by summing the
/// generator's jump rates against their winding increments. Equals
/// `d hbar/(m a^2) - V(x)/hbar` under the fixed orientation.
pub fn exact_winding_drift(model: &ModelSpec, site: usize) -> Result<f64> {
    let jumps = site_jumps_oriented(model, site, Orientation::Lifted)?;
    Ok(jumps
        .iter()
        .map(|j| j.rate * j.winding_shift as f64)
        .sum())
}
