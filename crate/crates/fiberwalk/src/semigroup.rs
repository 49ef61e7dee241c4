//! Time-`t` kernels `e^{tG}` for the model's generators: dense
//! scaling-and-squaring for small problems, uniformization for
//! probability-conserving Markov kernels, and a matrix-free action for
//! vectors.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::SparseGenerator;
use crate::sparse::CsrMatrix;

/// Largest dimension accepted by the dense routines.
pub const DENSE_CAP: usize = 4096;

/// Default tolerance for kernel computations.
pub const KERNEL_TOL: f64 = 1e-10;

/// Default tolerance for the matrix-free action.
pub const ACTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSource {
    Base,
    Lifted,
    Conjugate,
    Generic,
}

/// Time-`t` transition kernel of a real Markov generator.
#[derive(Debug, Clone)]
pub struct FiberKernel {
    pub time: f64,
    pub matrix: DMatrix<f64>,
    pub source: KernelSource,
}

impl FiberKernel {
    /// Largest row-sum deviation from 1.
    pub fn stochastic_defect(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|r| (self.matrix.row(r).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Most negative entry (0 when all entries are nonnegative).
    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(0.0f64, f64::min).min(0.0)
    }
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > DENSE_CAP {
        return Err(Error::DenseCapExceeded {
            dim,
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Max column sum of entry magnitudes (the induced 1-norm).
fn one_norm<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|x| x.clone().modulus()).sum();
        best = best.max(s);
    }
    best
}

// Degree-13 Pade coefficients for the scaling-and-squaring matrix exponential.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371920351148152;

fn expm_scaled<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scale = T::from_real(0.5f64.powi(squarings as i32));
    let a = m.map(|x| x * scale.clone());
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| T::from_real(PADE13[k]);
    let u_inner = &a6 * (a6.map(|x| x * b(13)) + a4.map(|x| x * b(11)) + a2.map(|x| x * b(9)))
        + a6.map(|x| x * b(7))
        + a4.map(|x| x * b(5))
        + a2.map(|x| x * b(3))
        + id.map(|x| x * b(1));
    let u = &a * u_inner;
    let v = &a6 * (a6.map(|x| x * b(12)) + a4.map(|x| x * b(10)) + a2.map(|x| x * b(8)))
        + a6.map(|x| x * b(6))
        + a4.map(|x| x * b(4))
        + a2.map(|x| x * b(2))
        + id.map(|x| x * b(0));
    let denom = &v - &u;
    let numer = &v + &u;
    let lu = denom.lu();
    let mut r = lu.solve(&numer).ok_or(Error::NoConvergence {
        achieved: f64::INFINITY,
        requested: 0.0,
    })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Dense matrix exponential `e^{t M}` of a real matrix.
pub fn expm(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_cap(m.nrows())?;
    expm_scaled(&m.map(|x| x * t))
}

/// Dense matrix exponential `e^{t M}` of a complex matrix.
pub fn expm_complex(m: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    check_cap(m.nrows())?;
    expm_scaled(&m.map(|x| x * t))
}

/// Dense kernel `e^{tG}` of a sparse generator, tagged with its source.
pub fn dense_kernel(gen: &SparseGenerator, t: f64, source: KernelSource) -> Result<FiberKernel> {
    let matrix = expm(&gen.matrix.to_dense(), t)?;
    Ok(FiberKernel {
        time: t,
        matrix,
        source,
    })
}

/// Uniformization rate margin above the largest exit rate.
const UNIFORMIZATION_MARGIN: f64 = 1.05;

/// `e^{tG}` for a Markov generator via uniformization: with
/// `lambda >= max |diag|` and `P = I + G / lambda`, the kernel is the Poisson
/// mixture `e^{-lambda t} sum_k (lambda t)^k / k! P^k`, truncated once the
/// Poisson tail drops below `tol`. Every term is entrywise nonnegative, so
/// positivity is preserved exactly.
pub fn uniformize(gen: &SparseGenerator, t: f64, tol: f64) -> Result<FiberKernel> {
    uniformize_tagged(gen, t, tol, KernelSource::Lifted)
}

pub fn uniformize_tagged(
    gen: &SparseGenerator,
    t: f64,
    tol: f64,
    source: KernelSource,
) -> Result<FiberKernel> {
    assert!(tol > 0.0, "tolerance must be positive");
    assert!(t >= 0.0, "time must be nonnegative");
    gen.matrix.validate_markov()?;
    let n = gen.matrix.dim();
    check_cap(n)?;
    let lambda = UNIFORMIZATION_MARGIN * gen.matrix.max_abs_diagonal();
    if lambda * t == 0.0 {
        return Ok(FiberKernel {
            time: t,
            matrix: DMatrix::identity(n, n),
            source,
        });
    }
    if lambda * t > 500.0 {
        return Err(Error::NoConvergence {
            achieved: lambda * t,
            requested: 500.0,
        });
    }
    // substochastic jump matrix P = I + G / lambda in sparse form
    let p = {
        let mut coo = crate::sparse::CooBuilder::<f64>::new(n);
        for r in 0..n {
            let mut has_diag = false;
            for (c, v) in gen.matrix.row(r) {
                if c == r {
                    coo.add(r, c, 1.0 + v / lambda);
                    has_diag = true;
                } else {
                    coo.add(r, c, v / lambda);
                }
            }
            if !has_diag {
                coo.add(r, r, 1.0);
            }
        }
        coo.finalize()
    };
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut weight = 1.0f64; // (lambda t)^k / k!, unnormalized
    let mut total = 1.0f64;
    let mut k = 0usize;
    let kmax = (lambda * t + 40.0 * (lambda * t).sqrt() + 100.0) as usize;
    loop {
        let tail_small = weight / total < tol && (k as f64) >= lambda * t;
        if tail_small {
            break;
        }
        if k > kmax {
            return Err(Error::NoConvergence {
                achieved: weight / total,
                requested: tol,
            });
        }
        k += 1;
        power = right_mul_sparse(&power, &p);
        weight *= lambda * t / k as f64;
        sum += power.map(|x| x * weight);
        total += weight;
    }
    // normalizing by the accumulated weight instead of e^{-lambda t} folds
    // the truncated Poisson tail into the normalization, keeping rows
    // stochastic to rounding
    let kernel = sum.map(|x| x / total);
    let out = FiberKernel {
        time: t,
        matrix: kernel,
        source,
    };
    let defect = out.stochastic_defect();
    if defect > tol.max(1e-12) * 10.0 {
        return Err(Error::NoConvergence {
            achieved: defect,
            requested: tol,
        });
    }
    Ok(out)
}

/// Dense-times-sparse product `D * S` with row-level parallelism.
fn right_mul_sparse(dense: &DMatrix<f64>, sparse: &CsrMatrix<f64>) -> DMatrix<f64> {
    let n = dense.nrows();
    let m = sparse.dim();
    let compute_row = |i: usize| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for k in 0..m {
            let v = dense[(i, k)];
            if v != 0.0 {
                for (j, w) in sparse.row(k) {
                    out[j] += v * w;
                }
            }
        }
        out
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(compute_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = (0..n).map(compute_row).collect();
    let mut out = DMatrix::<f64>::zeros(n, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Approximates `e^{tM} v` by a scaled truncated Taylor series without
/// forming `e^{tM}`. Returns the result with an error estimate; errors out
/// when the series fails to converge.
pub fn expm_action(
    m: &DMatrix<Complex64>,
    v: &DVector<Complex64>,
    t: f64,
    tol: f64,
) -> Result<(DVector<Complex64>, f64)> {
    if m.nrows() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: v.len(),
        });
    }
    let norm = one_norm(m) * t.abs();
    let steps = norm.ceil().max(1.0) as usize;
    let dt = Complex64::new(t / steps as f64, 0.0);
    let mut w = v.clone();
    let mut err_estimate = 0.0f64;
    const KMAX: usize = 300;
    for _ in 0..steps {
        let mut term = w.clone();
        let mut acc = w.clone();
        let mut converged = false;
        for k in 1..=KMAX {
            term = (m * &term) * (dt / Complex64::new(k as f64, 0.0));
            acc += &term;
            let rel = term.norm() / acc.norm().max(f64::MIN_POSITIVE);
            if rel < tol / steps as f64 {
                err_estimate += rel * acc.norm();
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                achieved: term.norm() / acc.norm().max(f64::MIN_POSITIVE),
                requested: tol,
            });
        }
        w = acc;
    }
    Ok((w, err_estimate))
}
