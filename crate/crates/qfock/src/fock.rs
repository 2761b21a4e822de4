//! The n-particle inner-product recursion, the existence criterion for
//! quadratic exponential vectors, series summation with a rigorous
//! truncation bound, the closed-form scalar product, and the derivative
//! identity connecting the two.
//!
//! Throughout, `I_n = <B?^n_f Phi, B?^n_g Phi>` and `J_n = I_n / (n!)^2` is
//! the n-th term of `<Psi(f), Psi(g)> = sum_n J_n` for exponential vectors
//! `Psi(f) = sum_n B?^n_f Phi / n!`.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::num::{C64, RealScalar, Scalar};
use crate::stepfn::MeasuredCellFunction;
use crate::{Error, Result};

/// Default cap on series orders.
pub const DEFAULT_N_MAX: u32 = 400;
/// Default series tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

fn factorials(n: u32) -> Vec<BigInt> {
    let mut f = Vec::with_capacity(n as usize + 1);
    f.push(BigInt::one());
    for k in 1..=n as u64 {
        let next = f.last().expect("nonempty") * BigInt::from(k);
        f.push(next);
    }
    f
}

/// `2^(2k+1) n! (n-1)! / ((n-k-1)!)^2` as an exact integer, `0 <= k < n`.
fn recursion_weight(fact: &[BigInt], n: u32, k: u32) -> BigInt {
    let num = &fact[n as usize] * &fact[(n - 1) as usize];
    let den = &fact[(n - k - 1) as usize] * &fact[(n - k - 1) as usize];
    (num / den) << (2 * k + 1)
}

/// Moments `M_k = integral conj(f)^k g^k` for `k = 1..=n`, computed with
/// per-cell running powers.
fn moment_ladder<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    n: u32,
) -> Vec<K> {
    let mut cells: Vec<(K::Real, K, K)> = f
        .support()
        .filter_map(|(cell, v)| {
            g.value(&cell.id)
                .map(|w| (cell.measure.clone(), v.conj() * w.clone(), K::one()))
        })
        .collect();
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut m = K::zero();
        for (measure, w, t) in &mut cells {
            *t = t.clone() * w.clone();
            m = m + t.mul_real(measure);
        }
        out.push(m);
    }
    out
}

/// The dynamic-programming table of inner products `I_0..I_N` for one pair
/// of test functions, exact when the inputs are exact.
///
/// `I_n = c sum_{k=0}^{n-1} 2^(2k+1) n!(n-1)!/((n-k-1)!)^2 M_{k+1} I_{n-k-1}`
/// with `M_j = integral conj(f)^j g^j`, seeded by `I_0 = 1`.
#[derive(Debug, Clone)]
pub struct InnerProductTable<K: Scalar> {
    f: MeasuredCellFunction<K>,
    g: MeasuredCellFunction<K>,
    c: K::Real,
    values: Vec<K>,
}

impl<K: Scalar> InnerProductTable<K> {
    /// Builds `I_0..I_n`. The two functions are refined onto a shared
    /// partition first; `c` must be positive.
    pub fn build(
        f: &MeasuredCellFunction<K>,
        g: &MeasuredCellFunction<K>,
        n: u32,
        c: &K::Real,
    ) -> Result<Self> {
        assert!(*c > <K::Real>::zero(), "the RSWN constant c must be positive");
        let (f, g) = MeasuredCellFunction::common_refinement(f, g)?;
        let moments = moment_ladder(&f, &g, n);
        let fact = factorials(n);
        let mut values: Vec<K> = Vec::with_capacity(n as usize + 1);
        values.push(K::one());
        for m in 1..=n {
            let mut sum = K::zero();
            for k in 0..m {
                let w = recursion_weight(&fact, m, k);
                let term = moments[k as usize].clone()
                    * values[(m - k - 1) as usize].clone()
                    * K::from_bigint(&w);
                sum = sum + term;
            }
            values.push(sum.mul_real(c));
        }
        Ok(InnerProductTable { f, g, c: c.clone(), values })
    }

    pub fn f(&self) -> &MeasuredCellFunction<K> {
        &self.f
    }

    pub fn g(&self) -> &MeasuredCellFunction<K> {
        &self.g
    }

    pub fn c(&self) -> &K::Real {
        &self.c
    }

    /// `I_0..I_N` in order.
    pub fn values(&self) -> &[K] {
        &self.values
    }

    pub fn nth(&self, n: u32) -> Option<&K> {
        self.values.get(n as usize)
    }
}

/// `I_n = <B?^n_f Phi, B?^n_g Phi>` by dynamic programming.
pub fn nth_inner<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    n: u32,
    c: &K::Real,
) -> Result<K> {
    let table = InnerProductTable::build(f, g, n, c)?;
    Ok(table.values[n as usize].clone())
}

/// `<B?^(n-1)_f Phi, B_h B?^n_g Phi>` for `n >= 1`:
/// `c sum_{k=0}^{n-1} 2^(2k+1) n!(n-1)!/((n-k-1)!)^2
///  (integral conj(h f^k) g^(k+1)) I_{n-k-1}(f, g)`.
///
/// Taking `h = f` recovers `nth_inner(f, g, n, c)`.
pub fn annihilator_matrix_element<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    h: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    n: u32,
    c: &K::Real,
) -> Result<K> {
    assert!(n >= 1, "matrix element needs at least one creator");
    let refined = MeasuredCellFunction::common_refinement_many(&[f, h, g])?;
    let (f, h, g) = (&refined[0], &refined[1], &refined[2]);
    let table = InnerProductTable::build(f, g, n - 1, c)?;

    // Mixed moments integral conj(h) conj(f)^k g^(k+1) via running powers.
    let mut cells: Vec<(K::Real, K, K, K)> = h
        .support()
        .filter_map(|(cell, hv)| {
            g.value(&cell.id).map(|gv| {
                let fbar = f
                    .value(&cell.id)
                    .map(Scalar::conj)
                    .unwrap_or_else(K::zero);
                // (measure, conj(h) g, conj(f) g, running (conj(f) g)^k)
                (
                    cell.measure.clone(),
                    hv.conj() * gv.clone(),
                    fbar * gv.clone(),
                    K::one(),
                )
            })
        })
        .collect();

    let fact = factorials(n);
    let mut sum = K::zero();
    for k in 0..n {
        let mut mixed = K::zero();
        for (measure, hg, _, t) in &cells {
            mixed = mixed + (hg.clone() * t.clone()).mul_real(measure);
        }
        for (_, _, fg, t) in &mut cells {
            *t = t.clone() * fg.clone();
        }
        let w = recursion_weight(&fact, n, k);
        sum = sum + mixed * table.values[(n - k - 1) as usize].clone() * K::from_bigint(&w);
    }
    Ok(sum.mul_real(c))
}

/// Whether the quadratic exponential vector `Psi(f)` exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceVerdict {
    /// `true` iff `||f||_inf < 1/2`, decided exactly for exact inputs.
    pub exists: bool,
    /// `||f||_inf` as a double.
    pub sup_norm: f64,
    /// `1/2 - ||f||_inf` as a double.
    pub margin: f64,
}

/// `Psi(f) = sum_n B?^n_f Phi / n!` converges iff `||f||_inf < 1/2`. The
/// comparison runs on `|f|^2 < 1/4` in the input's own arithmetic, so exact
/// inputs get an exact decision; the reported norm and margin are doubles
/// (clamped to keep `exists <=> margin > 0` if the square root collapses
/// onto the boundary).
pub fn exists_exponential<K: Scalar>(f: &MeasuredCellFunction<K>) -> ExistenceVerdict {
    let sup_sq = f.sup_norm_sq();
    let exists = <K::Real>::from_u64(4) * sup_sq.clone() < <K::Real>::one();
    let sup_norm = sup_sq.to_f64().sqrt();
    let mut margin = 0.5 - sup_norm;
    if exists && !(margin > 0.0) {
        margin = f64::MIN_POSITIVE;
    }
    if !exists && margin > 0.0 {
        margin = 0.0;
    }
    ExistenceVerdict { exists, sup_norm, margin }
}

/// `4n(n-1)||f||_inf^2 + 2nc||f||_2^2`, the one-step growth factor:
/// `I_n(f,f) <= norm_growth_bound(f,n,c) * I_{n-1}(f,f)`.
pub fn norm_growth_bound<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    n: u32,
    c: &K::Real,
) -> K::Real {
    let n_r = <K::Real>::from_u64(n as u64);
    let nm1 = <K::Real>::from_u64(n.saturating_sub(1) as u64);
    let four = <K::Real>::from_u64(4);
    let two = <K::Real>::from_u64(2);
    four * n_r.clone() * nm1 * f.sup_norm_sq() + two * n_r * c.clone() * f.l2_norm_sq()
}

/// Truncation diagnostics for one series evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDiagnostics {
    /// Last order included in the partial sum.
    pub truncation_order: u32,
    pub partial_sum: C64,
    /// Rigorous bound on `|sum - partial_sum|`; infinite when no geometric
    /// bound holds yet.
    pub tail_bound: f64,
    /// Geometric ratio the tail bound uses.
    pub ratio_estimate: f64,
    pub converged: bool,
}

/// One order of a series evaluation, for boundary diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub n: u32,
    /// `J_n = I_n / (n!)^2`.
    pub term: C64,
    /// `sum_{m<=n} J_m`.
    pub partial_sum: C64,
    pub tail_bound: f64,
    pub ratio_estimate: f64,
}

/// Factorial-scaled series engine: computes `J_n = I_n/(n!)^2` directly via
/// `J_n = (c/n) sum_{k=0}^{n-1} P_k J_{n-k-1}`, `P_k = 2 4^k M_{k+1}`,
/// with per-cell running powers so no factorial or `4^k` is ever formed.
struct ScaledSeries {
    c: f64,
    /// (measure, conj(f) g, running `(4 conj(f) g)^k`).
    cells: Vec<(f64, C64, C64)>,
    p: Vec<C64>,
    j: Vec<C64>,
}

impl ScaledSeries {
    fn new(f: &MeasuredCellFunction<C64>, g: &MeasuredCellFunction<C64>, c: f64) -> Self {
        let cells = f
            .support()
            .filter_map(|(cell, v)| {
                g.value(&cell.id)
                    .map(|w| (cell.measure, Scalar::conj(v) * *w, C64::new(1.0, 0.0)))
            })
            .collect();
        ScaledSeries { c, cells, p: Vec::new(), j: vec![C64::new(1.0, 0.0)] }
    }

    fn extend_to(&mut self, n: u32) {
        while self.j.len() <= n as usize {
            let m = self.j.len();
            while self.p.len() < m {
                let mut pk = C64::new(0.0, 0.0);
                for (measure, w, t) in &mut self.cells {
                    pk += *w * *t * 2.0 * *measure;
                    *t *= 4.0 * *w;
                }
                self.p.push(pk);
            }
            let mut s = C64::new(0.0, 0.0);
            for k in 0..m {
                s += self.p[k] * self.j[m - 1 - k];
            }
            self.j.push(s * (self.c / m as f64));
        }
    }

    fn term(&mut self, n: u32) -> C64 {
        self.extend_to(n);
        self.j[n as usize]
    }
}

/// Geometric ratio bounding `J_{n+1}(f,f)/J_n(f,f)` for all orders past `n`:
/// the per-step factor `norm_growth_bound(f, m, c)/m^2` is monotone toward
/// `4 ||f||_inf^2`, so its supremum over `m > n` is reached either at
/// `m = n+1` or in the limit.
fn tail_ratio(f: &MeasuredCellFunction<C64>, n: u32, c: f64) -> f64 {
    let m = (n + 1) as f64;
    let step = norm_growth_bound(f, n + 1, &c) / (m * m);
    step.max(4.0 * f.sup_norm_sq())
}

fn series_core(
    f: &MeasuredCellFunction<C64>,
    g: &MeasuredCellFunction<C64>,
    c: f64,
    tol: Option<f64>,
    n_max: u32,
    mut visit: impl FnMut(TrajectoryPoint),
) -> Result<SeriesDiagnostics> {
    let (f, g) = MeasuredCellFunction::common_refinement(f, g)?;
    let mut fg = ScaledSeries::new(&f, &g, c);
    let mut ff = ScaledSeries::new(&f, &f, c);
    let mut gg = ScaledSeries::new(&g, &g, c);
    let mut partial = C64::new(0.0, 0.0);
    let mut last = SeriesDiagnostics {
        truncation_order: 0,
        partial_sum: partial,
        tail_bound: f64::INFINITY,
        ratio_estimate: f64::INFINITY,
        converged: false,
    };
    for n in 0..=n_max {
        let term = fg.term(n);
        partial += term;
        // |J_m(f,g)| <= sqrt(J_m(f,f) J_m(g,g)) <= sqrt(J_n(f,f) J_n(g,g)) rho^(m-n)
        // for m > n, so the tail past n is a geometric series when rho < 1.
        let rho = (tail_ratio(&f, n, c) * tail_ratio(&g, n, c)).sqrt();
        let head = (ff.term(n).re.max(0.0) * gg.term(n).re.max(0.0)).sqrt();
        let tail = if rho < 1.0 { head * rho / (1.0 - rho) } else { f64::INFINITY };
        last = SeriesDiagnostics {
            truncation_order: n,
            partial_sum: partial,
            tail_bound: tail,
            ratio_estimate: rho,
            converged: tol.is_some_and(|tol| rho < 1.0 && tail <= tol),
        };
        visit(TrajectoryPoint {
            n,
            term,
            partial_sum: partial,
            tail_bound: tail,
            ratio_estimate: rho,
        });
        if last.converged {
            break;
        }
    }
    Ok(last)
}

/// `<Psi(f), Psi(g)> = sum_n I_n/(n!)^2` summed until the geometric tail
/// bound drops to `tol`. Both exponential vectors must exist.
pub fn exp_inner_series(
    f: &MeasuredCellFunction<C64>,
    g: &MeasuredCellFunction<C64>,
    c: f64,
    tol: f64,
    n_max: u32,
) -> Result<(C64, SeriesDiagnostics)> {
    for (name, h) in [("f", f), ("g", g)] {
        let verdict = exists_exponential(h);
        if !verdict.exists {
            return Err(Error::DomainViolation(format!(
                "exponential vector for {name} does not exist: sup norm {} >= 1/2",
                verdict.sup_norm
            )));
        }
    }
    let diag = series_core(f, g, c, Some(tol), n_max, |_| ())?;
    if diag.converged {
        Ok((diag.partial_sum, diag))
    } else {
        Err(Error::NoConvergenceWithinBudget(format!(
            "tail bound {} above tolerance {tol} after {n_max} orders",
            diag.tail_bound
        )))
    }
}

/// Per-order terms, partial sums, and tail bounds of the exponential
/// series, with no existence gate: this is the diagnostic view used to
/// watch the series diverge at and beyond the boundary.
pub fn series_trajectory(
    f: &MeasuredCellFunction<C64>,
    g: &MeasuredCellFunction<C64>,
    c: f64,
    n_max: u32,
) -> Result<Vec<TrajectoryPoint>> {
    let mut points = Vec::with_capacity(n_max as usize + 1);
    series_core(f, g, c, None, n_max, |p| points.push(p))?;
    Ok(points)
}

/// `<Psi(f), Psi(g)> = exp(-(c/2) integral ln(1 - 4 conj(f) g))` in closed
/// form. Requires only `4 ||f||_inf ||g||_inf < 1`, which is weaker than
/// the series precondition `||f||_inf, ||g||_inf < 1/2`.
pub fn exp_inner_closed<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    c: &K::Real,
) -> Result<C64> {
    let (f, g) = MeasuredCellFunction::common_refinement(f, g)?;
    let log_int = f.log_integral(&g)?;
    Ok((log_int * (-c.to_f64() / 2.0)).exp())
}

/// Compares `n!` times the `t^n` coefficient of `t -> <Psi(g), Psi(t f)>`
/// (extracted by exact power-series composition of exp with the cellwise
/// logarithm expansion) against `I_n(g, f)/n!`, returning the relative
/// discrepancy. Both routes compute `J_n(g, f)` and must agree.
pub fn derivative_coefficient_check<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    n: u32,
    c: &K::Real,
) -> Result<f64> {
    for (name, h) in [("f", f), ("g", g)] {
        if !exists_exponential(h).exists {
            return Err(Error::DomainViolation(format!(
                "exponential vector for {name} does not exist"
            )));
        }
    }
    let (gf, ff) = MeasuredCellFunction::common_refinement(&g.to_float(), &f.to_float())?;
    let c = c.to_f64();

    // log <Psi(g), Psi(t f)> = sum_{k>=1} a_k t^k with
    // a_k = (c/2) (4^k/k) integral conj(g)^k f^k.
    let moments = moment_ladder(&gf, &ff, n);
    let mut a = Vec::with_capacity(n as usize + 1);
    a.push(C64::new(0.0, 0.0));
    let mut four_k = 1.0f64;
    for k in 1..=n as usize {
        four_k *= 4.0;
        a.push(moments[k - 1] * (0.5 * c * four_k / k as f64));
    }

    // exp composition: b_0 = 1, b_m = (1/m) sum_{k=1}^m k a_k b_{m-k}.
    let mut b = vec![C64::new(1.0, 0.0)];
    for m in 1..=n as usize {
        let mut s = C64::new(0.0, 0.0);
        for k in 1..=m {
            s += a[k] * b[m - k] * k as f64;
        }
        b.push(s / m as f64);
    }

    let direct = ScaledSeries::new(&gf, &ff, c).term(n);
    let delta = (b[n as usize] - direct).norm();
    let scale = direct.norm();
    Ok(if scale > 0.0 { delta / scale } else { delta })
}
