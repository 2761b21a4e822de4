//! Tensor factorization over disjoint regions, checked as scalar identities.
//!
//! For a decomposition of the underlying space into disjoint parts,
//! exponential vectors factorize: `<Psi(f), Psi(g)>` equals the product of
//! the part-wise scalar products, and at fixed particle number
//! `I_n(f, g) = sum_k C(n,k)^2 I_k(f_1, g_1) I_{n-k}(f_2, g_2)` for a
//! two-part split. The operators mediating the factorization are never
//! materialized; only these computable identities are verified.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::One;

use crate::fock::{exp_inner_closed, exp_inner_series, nth_inner, DEFAULT_N_MAX};
use crate::num::{C64, RealScalar, Scalar};
use crate::stepfn::{CellId, MeasuredCellFunction, Partition};
use crate::{Error, Result};

/// A decomposition of a partition's cells into pairwise-disjoint groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionSplit {
    parts: Vec<BTreeSet<CellId>>,
}

impl RegionSplit {
    /// Builds a split from id groups, rejecting overlapping parts.
    pub fn new(parts: Vec<BTreeSet<CellId>>) -> Result<Self> {
        let mut seen: BTreeSet<&CellId> = BTreeSet::new();
        for part in &parts {
            for id in part {
                if !seen.insert(id) {
                    return Err(Error::InvalidSplit(format!(
                        "cell {id} appears in more than one part"
                    )));
                }
            }
        }
        Ok(RegionSplit { parts })
    }

    pub fn parts(&self) -> &[BTreeSet<CellId>] {
        &self.parts
    }

    /// Every part id must name a cell and every cell must be claimed.
    pub fn validate_covers<R: RealScalar>(&self, partition: &Partition<R>) -> Result<()> {
        let mut claimed: BTreeSet<&CellId> = BTreeSet::new();
        for part in &self.parts {
            for id in part {
                partition.measure_of(id)?;
                claimed.insert(id);
            }
        }
        for cell in partition.cells() {
            if !claimed.contains(&cell.id) {
                return Err(Error::InvalidSplit(format!(
                    "cell {} is not covered by any part",
                    cell.id
                )));
            }
        }
        Ok(())
    }
}

/// `f` times the indicator of the selected cells, on the same partition.
pub fn restrict<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    part: &BTreeSet<CellId>,
) -> Result<MeasuredCellFunction<K>> {
    f.restrict_to(part)
}

/// Outcome of checking `<Psi(f), Psi(g)> = prod_parts <Psi(f_i), Psi(g_i)>`
/// along both evaluation routes.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub parts: usize,
    pub whole_closed: C64,
    pub product_closed: C64,
    pub closed_rel_error: f64,
    pub whole_series: C64,
    pub product_series: C64,
    pub series_rel_error: f64,
    pub tol: f64,
    pub ok: bool,
}

fn rel_error(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm()).max(1.0);
    (a - b).norm() / scale
}

/// Verifies the exponential factorization over a split, via the closed form
/// (log-integral additivity) and via series summation (within `tol`). Both
/// exponential vectors must exist; test functions are refined onto one
/// shared partition, which the split must cover.
pub fn check_exponential_factorization<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    split: &RegionSplit,
    c: &K::Real,
    tol: f64,
) -> Result<FactorizationReport> {
    let (f, g) = MeasuredCellFunction::common_refinement(f, g)?;
    split.validate_covers(f.partition())?;

    let cf = c.to_f64();
    let series_tol = (tol * 1e-2).max(1e-14);
    let (ff, gf) = (f.to_float(), g.to_float());

    let whole_closed = exp_inner_closed(&f, &g, c)?;
    let (whole_series, _) = exp_inner_series(&ff, &gf, cf, series_tol, DEFAULT_N_MAX)?;

    let mut product_closed = C64::new(1.0, 0.0);
    let mut product_series = C64::new(1.0, 0.0);
    for part in split.parts() {
        let fp = f.restrict_to(part)?;
        let gp = g.restrict_to(part)?;
        product_closed *= exp_inner_closed(&fp, &gp, c)?;
        let (s, _) = exp_inner_series(&fp.to_float(), &gp.to_float(), cf, series_tol, DEFAULT_N_MAX)?;
        product_series *= s;
    }

    let closed_rel_error = rel_error(whole_closed, product_closed);
    let series_rel_error = rel_error(whole_series, product_series);
    Ok(FactorizationReport {
        parts: split.parts().len(),
        whole_closed,
        product_closed,
        closed_rel_error,
        whole_series,
        product_series,
        series_rel_error,
        tol,
        ok: closed_rel_error <= tol && series_rel_error <= tol,
    })
}

/// Both sides of the order-n factorization over a two-part split.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFactorization<K: Scalar> {
    pub n: u32,
    /// `I_n(f, g)` computed directly.
    pub whole: K,
    /// `sum_k C(n,k)^2 I_k(f_1, g_1) I_{n-k}(f_2, g_2)`.
    pub factored: K,
}

impl<K: Scalar> OrderFactorization<K> {
    pub fn discrepancy(&self) -> K {
        self.whole.clone() - self.factored.clone()
    }
}

/// Checks `I_n(f,g) = sum_{k=0}^n C(n,k)^2 I_k(f_1,g_1) I_{n-k}(f_2,g_2)`
/// for a two-part split; exact when the inputs are exact. Cross terms
/// between parts vanish because the restricted supports are disjoint.
pub fn check_order_n_factorization<K: Scalar>(
    f: &MeasuredCellFunction<K>,
    g: &MeasuredCellFunction<K>,
    split: &RegionSplit,
    n: u32,
    c: &K::Real,
) -> Result<OrderFactorization<K>> {
    if split.parts().len() != 2 {
        return Err(Error::InvalidSplit(format!(
            "order-n factorization needs exactly 2 parts, got {}",
            split.parts().len()
        )));
    }
    let (f, g) = MeasuredCellFunction::common_refinement(f, g)?;
    split.validate_covers(f.partition())?;

    let whole = nth_inner(&f, &g, n, c)?;

    let (f1, g1) = (f.restrict_to(&split.parts()[0])?, g.restrict_to(&split.parts()[0])?);
    let (f2, g2) = (f.restrict_to(&split.parts()[1])?, g.restrict_to(&split.parts()[1])?);
    let t1 = crate::fock::InnerProductTable::build(&f1, &g1, n, c)?;
    let t2 = crate::fock::InnerProductTable::build(&f2, &g2, n, c)?;

    let mut factored = K::zero();
    let mut binom = BigInt::one();
    for k in 0..=n {
        if k > 0 {
            // C(n,k) = C(n,k-1) (n-k+1)/k, exact at every step.
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        let weight = &binom * &binom;
        factored = factored
            + t1.values()[k as usize].clone()
                * t2.values()[(n - k) as usize].clone()
                * K::from_bigint(&weight);
    }
    Ok(OrderFactorization { n, whole, factored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{cr, rat, CRat};
    use crate::stepfn::IntervalSpec;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn four_cells(vals: [(&str, &str); 4]) -> MeasuredCellFunction<CRat> {
        let mut spec = IntervalSpec::new();
        for (i, (re, im)) in vals.iter().enumerate() {
            spec = spec.push(rat(i as i64, 1), rat(i as i64 + 1, 1), cr(re, im));
        }
        MeasuredCellFunction::from_intervals(&spec).unwrap()
    }

    fn ids_of(f: &MeasuredCellFunction<CRat>, range: std::ops::Range<usize>) -> BTreeSet<CellId> {
        f.partition().cells()[range].iter().map(|c| c.id.clone()).collect()
    }

    #[test]
    fn restrict_identity_empty_and_sum() {
        let f = four_cells([("1/4", "0"), ("1/5", "1/7"), ("-1/6", "0"), ("0", "1/8")]);
        let all = ids_of(&f, 0..4);
        assert_eq!(restrict(&f, &all).unwrap(), f);
        assert!(restrict(&f, &BTreeSet::new()).unwrap().is_zero_fn());

        let left = ids_of(&f, 0..2);
        let right = ids_of(&f, 2..4);
        let sum = restrict(&f, &left)
            .unwrap()
            .pointwise_add(&restrict(&f, &right).unwrap())
            .unwrap();
        assert_eq!(sum, f);

        let unknown: BTreeSet<CellId> = [CellId::from("nope")].into_iter().collect();
        assert!(matches!(restrict(&f, &unknown), Err(Error::UnknownCellId(_))));
    }

    #[test]
    fn split_validation() {
        let f = four_cells([("1/4", "0"), ("1/5", "0"), ("1/6", "0"), ("1/7", "0")]);
        let a = ids_of(&f, 0..2);
        let b = ids_of(&f, 1..4);
        assert!(matches!(
            RegionSplit::new(vec![a.clone(), b]),
            Err(Error::InvalidSplit(_))
        ));
        let partial = RegionSplit::new(vec![a]).unwrap();
        assert!(matches!(
            partial.validate_covers(f.partition()),
            Err(Error::InvalidSplit(_))
        ));
        let full = RegionSplit::new(vec![ids_of(&f, 0..2), ids_of(&f, 2..4)]).unwrap();
        assert!(full.validate_covers(f.partition()).is_ok());
    }

    #[test]
    fn exponential_factorization_golden() {
        // f = g = (1/4) chi_[0,2) split at 1: each half gives (3/4)^(-1/2),
        // the whole gives (3/4)^(-1) = 4/3.
        let spec = IntervalSpec::new().push(rat(0, 1), rat(2, 1), cr("1/4", "0"));
        let f = MeasuredCellFunction::from_intervals(&spec).unwrap();
        // Force the split point into the grid by refining against a marker.
        let marker = IntervalSpec::new()
            .push(rat(0, 1), rat(1, 1), cr("1", "0"))
            .push(rat(1, 1), rat(2, 1), cr("2", "0"));
        let m = MeasuredCellFunction::from_intervals(&marker).unwrap();
        let (f, _) = MeasuredCellFunction::common_refinement(&f, &m).unwrap();
        let split = RegionSplit::new(vec![ids_of(&f, 0..1), ids_of(&f, 1..2)]).unwrap();
        let report =
            check_exponential_factorization(&f, &f, &split, &rat(1, 1), 1e-10).unwrap();
        assert!(report.ok, "{report:?}");
        assert!((report.whole_closed.re - 4.0 / 3.0).abs() < 1e-12);
        assert!((report.product_closed.re - 4.0 / 3.0).abs() < 1e-12);
        assert!((report.whole_series.re - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_part_split_is_trivial() {
        let f = four_cells([("1/4", "1/8"), ("1/5", "0"), ("-1/6", "1/9"), ("1/7", "0")]);
        let g = four_cells([("1/3", "0"), ("-1/5", "1/8"), ("1/9", "0"), ("0", "1/6")]);
        let split = RegionSplit::new(vec![ids_of(&f, 0..4)]).unwrap();
        let report = check_exponential_factorization(&f, &g, &split, &rat(1, 1), 1e-12).unwrap();
        assert!(report.ok);
        assert_eq!(report.whole_closed, report.product_closed);
    }

    #[test]
    fn order_n_small_cases() {
        let f = four_cells([("1/4", "0"), ("1/5", "1/7"), ("-1/6", "0"), ("1/8", "1/9")]);
        let g = four_cells([("1/3", "-1/8"), ("1/6", "0"), ("1/7", "1/5"), ("-1/9", "0")]);
        let split = RegionSplit::new(vec![ids_of(&f, 0..2), ids_of(&f, 2..4)]).unwrap();
        let c = rat(5, 4);
        let r0 = check_order_n_factorization(&f, &g, &split, 0, &c).unwrap();
        assert_eq!(r0.whole, cr("1", "0"));
        assert!(r0.discrepancy().is_zero());
        let r1 = check_order_n_factorization(&f, &g, &split, 1, &c).unwrap();
        assert_eq!(r1.whole, f.inner(&g).unwrap().mul_real(&rat(5, 2)));
        assert!(r1.discrepancy().is_zero());
    }

    #[test]
    fn order_n_requires_two_parts() {
        let f = four_cells([("1/4", "0"), ("1/5", "0"), ("1/6", "0"), ("1/7", "0")]);
        let split = RegionSplit::new(vec![ids_of(&f, 0..4)]).unwrap();
        assert!(matches!(
            check_order_n_factorization(&f, &f, &split, 2, &rat(1, 1)),
            Err(Error::InvalidSplit(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Exact order-n factorization on random rational 4-cell functions.
        #[test]
        fn order_n_exact(vals in proptest::collection::vec(
            ((-5i64..=5, -5i64..=5), (-5i64..=5, -5i64..=5)), 4), n in 0u32..=5) {
            let fv: Vec<(String, String)> = vals.iter()
                .map(|((a, b), _)| (format!("{a}/12"), format!("{b}/12"))).collect();
            let gv: Vec<(String, String)> = vals.iter()
                .map(|(_, (a, b))| (format!("{a}/12"), format!("{b}/12"))).collect();
            let f = four_cells([
                (&fv[0].0, &fv[0].1), (&fv[1].0, &fv[1].1),
                (&fv[2].0, &fv[2].1), (&fv[3].0, &fv[3].1),
            ]);
            let g = four_cells([
                (&gv[0].0, &gv[0].1), (&gv[1].0, &gv[1].1),
                (&gv[2].0, &gv[2].1), (&gv[3].0, &gv[3].1),
            ]);
            prop_assume!(f.support_size() == 4 && g.support_size() == 4);
            let split = RegionSplit::new(vec![ids_of(&f, 0..2), ids_of(&f, 2..4)]).unwrap();
            let r = check_order_n_factorization(&f, &g, &split, n, &rat(3, 2)).unwrap();
            prop_assert!(r.discrepancy().is_zero(), "n = {}: {:?}", n, r);
        }
    }
}
