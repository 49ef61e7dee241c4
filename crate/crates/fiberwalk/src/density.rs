//! Two-particle joint densities and their phase average into quantum density
//! matrices, observable lifting, purity detection, and projective
//! conditioning.
//!
//! A quantum state is carried classically by a pair of independent walkers:
//! the ket leg `(x, n)` evolves under the lifted generator, the bra leg
//! `(xi, nu)` under the winding-mirrored conjugate generator. Collapsing both
//! fibers with the phase weight `i^{n + nu}` (the mirrored leg stores its
//! winding with reversed orientation, so this is the ket phase times the
//! conjugate bra phase) and amplifying by `e^{2 Re(c0) t}` yields a matrix
//! that evolves exactly as `rho(t) = U(t) rho(0) U(t)^dagger` with
//! `U(t) = e^{-i t H / hbar}`.
//!
//! Density matrices are stored in the standard orientation `rho[x, xi]`, so
//! a pure state is `rho = psi psi^dagger`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equivalence::{derive_sector_constant, EXPONENT_CAP};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operators::{build_conjugate_generator, build_lifted_generator, fiber_index, FIBER};
use crate::semigroup::expm;

/// Nonnegative joint probability density over `(xi, nu, x, n)`, stored as a
/// matrix with row index `(xi, nu)` and column index `(x, n)`.
#[derive(Debug, Clone)]
pub struct JointDensity {
    pub values: DMatrix<f64>,
    pub time: f64,
}

impl JointDensity {
    pub fn sites(&self) -> usize {
        self.values.nrows() / FIBER
    }

    pub fn total_mass(&self) -> f64 {
        self.values.sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Check nonnegativity and unit mass.
    pub fn validate(&self) -> Result<()> {
        if self.min_entry() < -1e-12 {
            return Err(Error::InvalidField(format!(
                "joint density has negative entry {:e}",
                self.min_entry()
            )));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidField(format!(
                "joint density mass {mass} deviates from 1"
            )));
        }
        Ok(())
    }
}

/// Complex density matrix in the standard orientation `rho[x, xi]`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub matrix: DMatrix<Complex64>,
    pub time: f64,
}

impl DensityMatrix {
    /// Wrap a matrix, validating Hermiticity and positivity.
    pub fn new(matrix: DMatrix<Complex64>, time: f64) -> Result<Self> {
        let defect = crate::operators::hermitian_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::NotHermitian { defect });
        }
        let dm = Self { matrix, time };
        let min = dm.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidField(format!(
                "density matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(dm)
    }

    pub fn from_wavefunction(psi: &DVector<Complex64>, time: f64) -> Self {
        let normalized = psi / Complex64::new(psi.norm(), 0.0);
        Self {
            matrix: &normalized * normalized.adjoint(),
            time,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().sum()
    }

    /// Rescale to unit trace. Fails when the trace is numerically zero.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr.norm() < 1e-14 {
            return Err(Error::ZeroProbabilityEvent { trace: tr.norm() });
        }
        Ok(Self {
            matrix: self.matrix.map(|z| z / tr),
            time: self.time,
        })
    }

    /// `Tr(rho^2)`, 1 for pure states.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).diagonal().sum().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Total mass off the diagonal, `sum_{x != xi} |rho[x, xi]|`; shrinks
    /// toward the classical limit.
    pub fn offdiagonal_mass(&self) -> f64 {
        let mut mass = 0.0;
        for x in 0..self.dim() {
            for xi in 0..self.dim() {
                if x != xi {
                    mass += self.matrix[(x, xi)].norm();
                }
            }
        }
        mass
    }
}

/// Hermitian observable on the lattice, standard orientation `F[a, b]`.
#[derive(Debug, Clone)]
pub struct Observable {
    pub matrix: DMatrix<Complex64>,
}

impl Observable {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let defect = crate::operators::hermitian_defect(&matrix);
        if defect > 1e-12 {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self { matrix })
    }

    /// Projector onto the position eigenstate at `site`.
    pub fn position_projector(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::SiteOutOfRange {
                index: site,
                count: dim,
            });
        }
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        m[(site, site)] = Complex64::new(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Seeded random Hermitian observable, for verification sweeps.
pub fn random_hermitian(dim: usize, seed: u64) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
        for j in (i + 1)..dim {
            let z = Complex64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    Observable { matrix: m }
}

/// Decompose a target density matrix into a nonnegative joint density
/// supported on `nu = 0` with the four fiber phase offsets on `n`: each
/// complex entry splits into at most four nonnegative components weighted
/// `i^n`. Returns the density (unit mass) and the scale by which phase
/// averages must be multiplied to recover the target normalization.
pub fn prepare_joint_density(rho0: &DMatrix<Complex64>) -> Result<(JointDensity, f64)> {
    let sites = rho0.nrows();
    if rho0.ncols() != sites {
        return Err(Error::DimensionMismatch {
            expected: sites,
            found: rho0.ncols(),
        });
    }
    let dim = FIBER * sites;
    let mut values = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..sites {
        for xi in 0..sites {
            let z = rho0[(x, xi)];
            let components = [
                z.re.max(0.0),
                z.im.max(0.0),
                (-z.re).max(0.0),
                (-z.im).max(0.0),
            ];
            for (n, &mass) in components.iter().enumerate() {
                if mass > 0.0 {
                    values[(fiber_index(xi, 0), fiber_index(x, n))] = mass;
                }
            }
        }
    }
    let total = values.sum();
    if total <= 0.0 {
        return Err(Error::InvalidField(
            "cannot prepare a joint density from the zero matrix".into(),
        ));
    }
    values /= total;
    Ok((JointDensity { values, time: 0.0 }, total))
}

/// Evolve a joint density for time `t`: the bra leg under the conjugate
/// generator and the ket leg under the lifted generator, independently.
pub fn evolve_joint_density(rc: &JointDensity, model: &ModelSpec, t: f64) -> Result<JointDensity> {
    let dim = FIBER * model.lattice().site_count();
    if rc.values.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rc.values.nrows(),
        });
    }
    let lifted = build_lifted_generator(model)?;
    let conjugate = build_conjugate_generator(model)?;
    let ket_kernel = expm(&lifted.matrix.to_dense(), t)?;
    let bra_kernel = expm(&conjugate.matrix.to_dense(), t)?;
    // density convention on both legs: rows are initial states
    let values = bra_kernel.transpose() * &rc.values * ket_kernel;
    Ok(JointDensity {
        values,
        time: rc.time + t,
    })
}

const FIBER_PHASES: [Complex64; FIBER] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Collapse the two fibers with phase weight `i^{n + nu}` and amplify by
/// `e^{2 Re(c0) t}`, producing the (unnormalized) quantum density matrix in
/// standard orientation. Multiply by the scale from
/// [`prepare_joint_density`] to recover the target normalization.
pub fn phase_average(rc: &JointDensity, model: &ModelSpec) -> Result<DMatrix<Complex64>> {
    let sites = model.lattice().site_count();
    if rc.values.nrows() != FIBER * sites {
        return Err(Error::DimensionMismatch {
            expected: FIBER * sites,
            found: rc.values.nrows(),
        });
    }
    let c0 = derive_sector_constant(model)?.value();
    let exponent = 2.0 * c0.re * rc.time;
    if exponent > EXPONENT_CAP {
        return Err(Error::ExponentCap {
            exponent,
            cap: EXPONENT_CAP,
        });
    }
    let amp = exponent.exp();
    let mut out = DMatrix::<Complex64>::zeros(sites, sites);
    for x in 0..sites {
        for xi in 0..sites {
            let mut acc = Complex64::new(0.0, 0.0);
            for nu in 0..FIBER {
                for n in 0..FIBER {
                    let w = rc.values[(fiber_index(xi, nu), fiber_index(x, n))];
                    if w != 0.0 {
                        acc += FIBER_PHASES[(n + nu) % FIBER] * w;
                    }
                }
            }
            out[(x, xi)] = acc * amp;
        }
    }
    Ok(out)
}

/// Max entrywise deviation of the phase-averaged evolved joint density from
/// the unitary conjugation `U(t) rho0 U(t)^dagger`, `U(t) = e^{-itH/hbar}`.
pub fn quantum_evolution_residual(
    rho0: &DMatrix<Complex64>,
    model: &ModelSpec,
    t: f64,
) -> Result<f64> {
    let (rc0, scale) = prepare_joint_density(rho0)?;
    let rc_t = evolve_joint_density(&rc0, model, t)?;
    rc_t.validate()?;
    let evolved = phase_average(&rc_t, model)?.map(|z| z * scale);
    let u = crate::equivalence::propagator(model, t)?;
    let oracle = &u * rho0 * u.adjoint();
    Ok((evolved - oracle).camax())
}

/// Classical random variable over `(xi, nu, x, n)` lifted from a quantum
/// observable: `F_c = i^{n + nu} F[xi, x]`.
#[derive(Debug, Clone)]
pub struct LiftedObservable {
    pub values: DMatrix<Complex64>,
}

pub fn lift_observable(observable: &Observable) -> LiftedObservable {
    let sites = observable.dim();
    let dim = FIBER * sites;
    let mut values = DMatrix::<Complex64>::zeros(dim, dim);
    for xi in 0..sites {
        for x in 0..sites {
            let f = observable.matrix[(xi, x)];
            for nu in 0..FIBER {
                for n in 0..FIBER {
                    values[(fiber_index(xi, nu), fiber_index(x, n))] =
                        FIBER_PHASES[(n + nu) % FIBER] * f;
                }
            }
        }
    }
    LiftedObservable { values }
}

/// Classical expectation of a lifted observable under a joint density,
/// including the amplification and preparation scale. Coincides with the
/// quantum expectation `Tr(rho F)` of the phase-averaged state.
pub fn classical_expectation(
    rc: &JointDensity,
    lifted: &LiftedObservable,
    scale: f64,
    model: &ModelSpec,
) -> Result<Complex64> {
    if rc.values.nrows() != lifted.values.nrows() {
        return Err(Error::DimensionMismatch {
            expected: lifted.values.nrows(),
            found: rc.values.nrows(),
        });
    }
    let c0 = derive_sector_constant(model)?.value();
    let amp = (2.0 * c0.re * rc.time).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..rc.values.nrows() {
        for c in 0..rc.values.ncols() {
            let w = rc.values[(r, c)];
            if w != 0.0 {
                acc += lifted.values[(r, c)] * w;
            }
        }
    }
    Ok(acc * amp * scale)
}

/// Quantum expectation `Tr(rho F)`.
pub fn quantum_expectation(rho: &DMatrix<Complex64>, observable: &Observable) -> Complex64 {
    (rho * &observable.matrix).diagonal().sum()
}

/// Decide whether a density matrix is (numerically) a pure state; returns
/// the recovered wavefunction when it is.
pub fn pure_state_check(rho: &DensityMatrix, tol: f64) -> (bool, Option<DVector<Complex64>>) {
    let eig = rho.matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let top = order[0];
    let second = order.get(1).map_or(0.0, |&i| eig.eigenvalues[i].abs());
    if second >= tol {
        return (false, None);
    }
    let lambda = eig.eigenvalues[top].max(0.0);
    let psi: DVector<Complex64> =
        eig.eigenvectors.column(top).into_owned() * Complex64::new(lambda.sqrt(), 0.0);
    let residual = (&rho.matrix - &psi * psi.adjoint()).camax();
    if residual >= tol {
        return (false, None);
    }
    (true, Some(psi))
}

/// Relative gap below which eigenvalues of an observable are clustered into
/// one degenerate eigenspace.
const CLUSTER_RELATIVE_GAP: f64 = 1e-8;

fn clustered_members(eigenvalues: &[f64], g: f64, tol: f64) -> (Vec<usize>, f64) {
    let scale = eigenvalues.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let cluster = (CLUSTER_RELATIVE_GAP * scale).max(tol);
    let members: Vec<usize> = (0..eigenvalues.len())
        .filter(|&i| (eigenvalues[i] - g).abs() <= cluster)
        .collect();
    let gap = eigenvalues
        .iter()
        .map(|x| (x - g).abs())
        .fold(f64::INFINITY, f64::min);
    (members, gap)
}

/// Condition a state on the measured value `g` of an observable:
/// `rho -> P_g rho P_g / Tr(P_g rho P_g)` with `P_g` the spectral projector
/// onto the eigenspace of `g` (eigenvalues clustered within a relative gap).
pub fn condition(
    rho: &DensityMatrix,
    observable: &Observable,
    g: f64,
    tol: f64,
) -> Result<DensityMatrix> {
    if observable.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: observable.dim(),
        });
    }
    let eig = observable.matrix.clone().symmetric_eigen();
    let (members, gap) = clustered_members(eig.eigenvalues.as_slice(), g, tol);
    if members.is_empty() {
        return Err(Error::EigenvalueNotFound { value: g, gap });
    }
    let dim = rho.dim();
    let mut projector = DMatrix::<Complex64>::zeros(dim, dim);
    for &i in &members {
        let v = eig.eigenvectors.column(i);
        projector += v * v.adjoint();
    }
    let numerator = &projector * &rho.matrix * &projector;
    let trace = numerator.diagonal().sum().re;
    if trace <= tol {
        return Err(Error::ZeroProbabilityEvent { trace });
    }
    Ok(DensityMatrix {
        matrix: numerator.map(|z| z / Complex64::new(trace, 0.0)),
        time: rho.time,
    })
}

/// Probability of measuring `g` in the given state, `Tr(P_g rho P_g)`.
pub fn outcome_probability(
    rho: &DensityMatrix,
    observable: &Observable,
    g: f64,
    tol: f64,
) -> Result<f64> {
    let eig = observable.matrix.clone().symmetric_eigen();
    let (members, gap) = clustered_members(eig.eigenvalues.as_slice(), g, tol);
    if members.is_empty() {
        return Err(Error::EigenvalueNotFound { value: g, gap });
    }
    let mut p = 0.0;
    for &i in &members {
        let v = eig.eigenvectors.column(i);
        p += (v.adjoint() * &rho.matrix * v)[(0, 0)].re;
    }
    Ok(p)
}

/// True when `max |FG - GF| <= tol`.
pub fn commute_check(f: &Observable, g: &Observable, tol: f64) -> Result<bool> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    let commutator = &f.matrix * &g.matrix - &g.matrix * &f.matrix;
    Ok(commutator.camax() <= tol)
}
