//! Gram matrices of quadratic exponential vectors, PSD and Hadamard-power
//! machinery, and the linear-independence verdict.
//!
//! For a family `f_1..f_N` the Gram matrix has entries
//! `b_ij = <Psi(f_i), Psi(f_j)> = exp(a_ij)` with the kernel
//! `a_ij = -(c/2) integral ln(1 - 4 conj(f_i) f_j)`. The kernel is PSD
//! (expand the logarithm: each order contributes a Gram of moment vectors
//! with positive weight `4^n/n`), entrywise powers of PSD matrices stay PSD,
//! and exponential vectors of functions differing on positive measure are
//! linearly independent, which the eigenvalue margin of `b` witnesses.

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::fock::{exists_exponential, exp_inner_closed};
use crate::num::{C64, RealScalar, Scalar};
use crate::stepfn::MeasuredCellFunction;
use crate::{Error, Result};

/// Default relative eigenvalue tolerance for PSD/independence verdicts.
pub const DEFAULT_GRAM_TOL: f64 = 1e-10;

/// Eigen-analysis of one family of exponential vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GramReport {
    /// `b_ij = <Psi(f_i), Psi(f_j)>`, Hermitian with diagonal >= 1.
    pub matrix: DMatrix<C64>,
    /// `a_ij = -(c/2) integral ln(1 - 4 conj(f_i) f_j)`, so `b = exp(a)`
    /// entrywise.
    pub kernel_matrix: DMatrix<C64>,
    pub min_eigenvalue: f64,
    /// Largest absolute eigenvalue of `matrix`.
    pub spectral_norm: f64,
    pub psd: bool,
    pub independent: bool,
    /// `[i][j]` is true iff `f_i` and `f_j` differ on positive measure.
    pub pairwise_distinct: Vec<Vec<bool>>,
    /// Relative tolerance the verdicts used.
    pub tol: f64,
}

fn require_hermitian(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotHermitian(format!(
            "matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    for i in 0..m.nrows() {
        for j in 0..=i {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > 1e-12 * scale {
                return Err(Error::NotHermitian(format!(
                    "entries ({i},{j}) and ({j},{i}) differ by {d}"
                )));
            }
        }
    }
    Ok(())
}

/// (smallest eigenvalue, largest |eigenvalue|) of a Hermitian matrix.
fn eigen_extrema(m: &DMatrix<C64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eigenvalues = m.clone().symmetric_eigen().eigenvalues;
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let spec = eigenvalues.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    (min, spec)
}

/// `true` iff the smallest eigenvalue is at least `-tol` times the
/// spectral norm. The matrix must be Hermitian.
pub fn is_psd(m: &DMatrix<C64>, tol: f64) -> Result<bool> {
    require_hermitian(m)?;
    let (min, spec) = eigen_extrema(m);
    Ok(min >= -tol * spec.max(1.0))
}

/// Entrywise `n`-th power. `n = 0` gives the all-ones matrix.
pub fn hadamard_power(m: &DMatrix<C64>, n: u32) -> DMatrix<C64> {
    m.map(|z| z.powu(n))
}

/// Checks that every Hadamard power `1..=n_max` of a PSD Hermitian matrix,
/// and its entrywise exponential, are PSD (relative tolerance
/// [`DEFAULT_GRAM_TOL`] applied per power).
pub fn verify_schur_powers(m: &DMatrix<C64>, n_max: u32) -> Result<bool> {
    require_hermitian(m)?;
    for n in 1..=n_max {
        if !is_psd(&hadamard_power(m, n), DEFAULT_GRAM_TOL)? {
            return Ok(false);
        }
    }
    is_psd(&m.map(|z| z.exp()), DEFAULT_GRAM_TOL)
}

fn gram_entry<K: Scalar>(
    refined: &[MeasuredCellFunction<K>],
    c: &K::Real,
    i: usize,
    j: usize,
) -> Result<(C64, C64)> {
    let a = refined[i].log_integral(&refined[j])? * (-c.to_f64() / 2.0);
    let b = exp_inner_closed(&refined[i], &refined[j], c)?;
    Ok((a, b))
}

fn gram_core<K>(
    fs: &[MeasuredCellFunction<K>],
    c: &K::Real,
    tol: f64,
    jobs: usize,
) -> Result<GramReport>
where
    K: Scalar + Send + Sync,
    K::Real: Send + Sync,
{
    for (i, f) in fs.iter().enumerate() {
        let verdict = exists_exponential(f);
        if !verdict.exists {
            return Err(Error::DomainViolation(format!(
                "exponential vector {i} does not exist: sup norm {} >= 1/2",
                verdict.sup_norm
            )));
        }
    }
    let refs: Vec<&MeasuredCellFunction<K>> = fs.iter().collect();
    let refined = MeasuredCellFunction::common_refinement_many(&refs)?;
    let n = refined.len();

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let mut slots: Vec<Option<Result<(C64, C64)>>> = Vec::new();
    slots.resize_with(pairs.len(), || None);
    let workers = jobs.max(1).min(pairs.len().max(1));
    if workers <= 1 {
        for (slot, &(i, j)) in slots.iter_mut().zip(&pairs) {
            *slot = Some(gram_entry(&refined, c, i, j));
        }
    } else {
        let chunk = pairs.len().div_ceil(workers);
        let refined = &refined;
        std::thread::scope(|scope| {
            for (pair_chunk, slot_chunk) in pairs.chunks(chunk).zip(slots.chunks_mut(chunk)) {
                scope.spawn(move || {
                    for (slot, &(i, j)) in slot_chunk.iter_mut().zip(pair_chunk) {
                        *slot = Some(gram_entry(refined, c, i, j));
                    }
                });
            }
        });
    }

    let mut matrix = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    let mut kernel = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (&(i, j), slot) in pairs.iter().zip(slots) {
        let (a, b) = slot.expect("every entry evaluated")?;
        kernel[(i, j)] = a;
        matrix[(i, j)] = b;
    }

    let (min_eigenvalue, spectral_norm) = eigen_extrema(&matrix);
    let psd = min_eigenvalue >= -tol * spectral_norm.max(1.0);
    let independent = n == 0 || min_eigenvalue > tol * spectral_norm.max(1.0);

    let mut pairwise_distinct = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = refined[i].measure_where_different(&refined[j])?;
                pairwise_distinct[i][j] = d > <K::Real>::zero();
            }
        }
    }

    Ok(GramReport {
        matrix,
        kernel_matrix: kernel,
        min_eigenvalue,
        spectral_norm,
        psd,
        independent,
        pairwise_distinct,
        tol,
    })
}

/// Gram matrix, kernel, and verdicts for a family of exponential vectors,
/// using the default tolerance. Every `f_i` must pass the existence test.
pub fn gram_matrix<K>(fs: &[MeasuredCellFunction<K>], c: &K::Real) -> Result<GramReport>
where
    K: Scalar + Send + Sync,
    K::Real: Send + Sync,
{
    gram_core(fs, c, DEFAULT_GRAM_TOL, 1)
}

/// [`gram_matrix`] with an explicit tolerance and entry evaluation spread
/// over `jobs` threads.
pub fn gram_matrix_jobs<K>(
    fs: &[MeasuredCellFunction<K>],
    c: &K::Real,
    tol: f64,
    jobs: usize,
) -> Result<GramReport>
where
    K: Scalar + Send + Sync,
    K::Real: Send + Sync,
{
    gram_core(fs, c, tol, jobs)
}

/// Independence verdict with an explicit eigenvalue margin: independent iff
/// the smallest Gram eigenvalue exceeds `tol` times the spectral norm.
pub fn linear_independence<K>(
    fs: &[MeasuredCellFunction<K>],
    c: &K::Real,
    tol: f64,
) -> Result<GramReport>
where
    K: Scalar + Send + Sync,
    K::Real: Send + Sync,
{
    gram_core(fs, c, tol, 1)
}
