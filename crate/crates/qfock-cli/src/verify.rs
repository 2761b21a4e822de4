//! The `verify` suite: seeded randomized checks of the library's core
//! identities. Every property draws from its own RNG stream, so results
//! are reproducible for a given seed and independent of `--jobs`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_traits::Zero;
use qfock::factorization::{
    check_exponential_factorization, check_order_n_factorization, RegionSplit,
};
use qfock::fock::{
    derivative_coefficient_check, exp_inner_closed, exp_inner_series, norm_growth_bound,
    InnerProductTable, DEFAULT_N_MAX,
};
use qfock::gram::{gram_matrix, is_psd, verify_schur_powers};
use qfock::normal_order::{
    oracle_mixed_inner, oracle_nth_inner, Generator, OperatorWord, TermSum,
    verify_operator_identity,
};
use qfock::num::{rat, rat_is_nonnegative, C64, CRat, Rat, RealScalar, Scalar};
use qfock::stepfn::{Cell, CellId, IntervalSpec, MeasuredCellFunction};
use qfock::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type ExactFn = MeasuredCellFunction<CRat>;
type PropFn = fn(&mut ChaCha8Rng, &Rat) -> Result<(bool, String)>;

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn nonzero(rng: &mut ChaCha8Rng, bound: i64) -> i64 {
    loop {
        let v = rng.gen_range(-bound..=bound);
        if v != 0 {
            return v;
        }
    }
}

/// Random exact function on the named cells, values `k/10` with
/// `1 <= |k| <= 3`, so every sup norm stays below 1/2.
fn random_exact(rng: &mut ChaCha8Rng, cells: &[(&str, Rat)]) -> ExactFn {
    let pairs: Vec<(Cell<Rat>, CRat)> = cells
        .iter()
        .map(|(id, measure)| {
            let v = CRat::new(rat(nonzero(rng, 3), 10), rat(rng.gen_range(-3..=3), 10));
            (Cell::abstract_cell(*id, measure.clone()), v)
        })
        .collect();
    MeasuredCellFunction::from_cells(pairs).expect("positive measures, nonzero values")
}

fn two_cells() -> Vec<(&'static str, Rat)> {
    vec![("u", rat(1, 2)), ("v", rat(3, 2))]
}

fn four_cells() -> Vec<(&'static str, Rat)> {
    vec![("a", rat(1, 2)), ("b", rat(1, 1)), ("c", rat(3, 2)), ("d", rat(2, 1))]
}

/// Random float function with sup norm at most ~0.4.
fn random_float(rng: &mut ChaCha8Rng) -> MeasuredCellFunction<C64> {
    let spec = IntervalSpec::new()
        .push(0.0, 1.0, C64::new(rng.gen_range(-0.28..0.28), rng.gen_range(-0.28..0.28)))
        .push(1.0, 2.5, C64::new(rng.gen_range(-0.28..0.28), rng.gen_range(-0.28..0.28)));
    MeasuredCellFunction::from_intervals(&spec).expect("well-formed intervals")
}

fn real_nonneg(z: &CRat) -> bool {
    z.im.is_zero() && rat_is_nonnegative(&z.re)
}

fn oracle_equivalence(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..6 {
        let f = random_exact(rng, &two_cells());
        let g = random_exact(rng, &two_cells());
        let table = InnerProductTable::build(&f, &g, 3, c)?;
        for n in 0..=3 {
            if oracle_nth_inner(&f, &g, n, c)? != table.values()[n as usize] {
                return Ok((false, format!("case {case} diverged from oracle at order {n}")));
            }
        }
    }
    Ok((true, "6 random pairs on 2 cells, orders 0..=3, exact".into()))
}

fn commutation_relation(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..4 {
        let f = random_exact(rng, &two_cells());
        let g = random_exact(rng, &two_cells());
        let fg = OperatorWord::new(vec![
            Generator::Annihilate(f.clone()),
            Generator::Create(g.clone()),
        ]);
        let gf = OperatorWord::new(vec![
            Generator::Create(g.clone()),
            Generator::Annihilate(f.clone()),
        ]);
        let lhs = TermSum::from_word(fg).minus(&TermSum::from_word(gf));
        let scalar = f.inner(&g)?.mul_real(c).mul_real(&rat(2, 1));
        let number = TermSum::from_word(OperatorWord::new(vec![Generator::Number(
            f.conj().pointwise_mul(&g)?,
        )]))
        .scale(&CRat::from_real(rat(4, 1)));
        let rhs = TermSum::scalar(scalar).add(&number);
        if !verify_operator_identity(&lhs, &rhs, c)? {
            return Ok((false, format!("commutator mismatch in case {case}")));
        }
    }
    Ok((true, "4 random pairs, exact operator identity".into()))
}

fn vacuum_orthogonality(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..2 {
        let f = random_exact(rng, &two_cells());
        let g = random_exact(rng, &two_cells());
        for m in 0..=3u32 {
            for n in 0..=3u32 {
                if m != n && !oracle_mixed_inner(&f, &g, m, n, c)?.is_zero() {
                    return Ok((false, format!("case {case}: orders ({m},{n}) not orthogonal")));
                }
            }
        }
    }
    Ok((true, "mixed orders m != n <= 3 vanish exactly".into()))
}

fn order_factorization(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    let split = RegionSplit::new(vec![
        BTreeSet::from([CellId("a".into()), CellId("b".into())]),
        BTreeSet::from([CellId("c".into()), CellId("d".into())]),
    ])?;
    for case in 0..3 {
        let f = random_exact(rng, &four_cells());
        let g = random_exact(rng, &four_cells());
        for n in 1..=4 {
            let check = check_order_n_factorization(&f, &g, &split, n, c)?;
            if !check.discrepancy().is_zero() {
                return Ok((false, format!("case {case}, order {n}: binomial sum differs")));
            }
        }
    }
    Ok((true, "3 random pairs, 2-part splits, orders 1..=4, exact".into()))
}

fn exponential_factorization(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    let c = c.to_f64();
    for case in 0..3 {
        let f = random_float(rng);
        let g = random_float(rng);
        let ids: Vec<CellId> = f.support().map(|(cell, _)| cell.id.clone()).collect();
        let (left, right) = ids.split_at(ids.len() / 2);
        let split = RegionSplit::new(vec![
            left.iter().cloned().collect(),
            right.iter().cloned().collect(),
        ])?;
        let report = check_exponential_factorization(&f, &g, &split, &c, 1e-10)?;
        if !report.ok {
            return Ok((
                false,
                format!(
                    "case {case}: closed rel {} series rel {}",
                    report.closed_rel_error, report.series_rel_error
                ),
            ));
        }
    }
    Ok((true, "3 random pairs, products match within 1e-10".into()))
}

fn schur_powers(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..2 {
        let a = DMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &a * a.adjoint();
        if !verify_schur_powers(&m, 5)? {
            return Ok((false, format!("case {case}: a Hadamard power left the PSD cone")));
        }
    }
    for case in 0..2 {
        let fs = [
            random_exact(rng, &two_cells()),
            random_exact(rng, &two_cells()),
            random_exact(rng, &two_cells()),
        ];
        let report = gram_matrix(&fs, c)?;
        if !report.psd || !is_psd(&report.kernel_matrix, 1e-10)? {
            return Ok((false, format!("family {case}: Gram or kernel not PSD")));
        }
    }
    Ok((true, "random PSD 4x4 powers <= 5 and exp; random Gram kernels PSD".into()))
}

fn derivative_consistency(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    let cell = [("s", rat(1, 1))];
    for case in 0..4 {
        let f = random_exact(rng, &cell);
        let g = random_exact(rng, &cell);
        for n in 1..=5 {
            let rel = derivative_coefficient_check(&f, &g, n, c)?;
            if rel > 1e-10 {
                return Ok((false, format!("case {case}, order {n}: relative error {rel}")));
            }
        }
    }
    Ok((true, "4 random single-cell pairs, orders 1..=5, error <= 1e-10".into()))
}

fn series_vs_closed(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    let c = c.to_f64();
    for case in 0..12 {
        let f = random_float(rng);
        let g = random_float(rng);
        let (series, _) = exp_inner_series(&f, &g, c, 1e-10, DEFAULT_N_MAX)?;
        let closed = exp_inner_closed(&f, &g, &c)?;
        let rel = (series - closed).norm() / closed.norm().max(1.0);
        if rel > 1e-8 {
            return Ok((false, format!("case {case}: relative gap {rel}")));
        }
    }
    Ok((true, "12 random pairs, series within 1e-8 of closed form".into()))
}

fn monotonicity(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..4 {
        let g = random_exact(rng, &two_cells());
        let grow = rat(rng.gen_range(10..=15), 10);
        let h = g.scale(&CRat::from_real(grow));
        let hh = InnerProductTable::build(&h, &h, 8, c)?;
        let gg = InnerProductTable::build(&g, &g, 8, c)?;
        for n in 0..=8 {
            let d = hh.values()[n].clone() - gg.values()[n].clone();
            if !real_nonneg(&d) {
                return Ok((false, format!("case {case}, order {n}: larger |f| gave smaller I_n")));
            }
        }
    }
    Ok((true, "4 scaled pairs, I_n nondecreasing in |f|, orders <= 8, exact".into()))
}

fn growth_bound(rng: &mut ChaCha8Rng, c: &Rat) -> Result<(bool, String)> {
    for case in 0..4 {
        let f = random_exact(rng, &two_cells());
        let table = InnerProductTable::build(&f, &f, 8, c)?;
        for n in 1..=8u32 {
            let bound = norm_growth_bound(&f, n, c);
            let d = table.values()[n as usize - 1].mul_real(&bound)
                - table.values()[n as usize].clone();
            if !real_nonneg(&d) {
                return Ok((false, format!("case {case}, order {n}: bound violated")));
            }
        }
    }
    Ok((true, "4 random functions, I_n <= bound * I_(n-1), orders <= 8, exact".into()))
}

const SUITE: &[(&str, PropFn)] = &[
    ("oracle_equivalence", oracle_equivalence),
    ("commutation_relation", commutation_relation),
    ("vacuum_orthogonality", vacuum_orthogonality),
    ("order_factorization", order_factorization),
    ("exponential_factorization", exponential_factorization),
    ("schur_powers", schur_powers),
    ("derivative_consistency", derivative_consistency),
    ("series_vs_closed", series_vs_closed),
    ("monotonicity", monotonicity),
    ("growth_bound", growth_bound),
];

fn run_property(index: usize, seed: u64, c: &Rat) -> PropertyResult {
    let (name, prop) = SUITE[index];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    match prop(&mut rng, c) {
        Ok((pass, detail)) => PropertyResult { name, pass, detail },
        Err(e) => PropertyResult { name, pass: false, detail: format!("error: {e}") },
    }
}

/// Runs every property; `jobs > 1` spreads them over threads without
/// changing results or their order.
pub fn run_suite(c: &Rat, seed: u64, jobs: usize) -> Vec<PropertyResult> {
    let mut slots: Vec<Option<PropertyResult>> = Vec::new();
    slots.resize_with(SUITE.len(), || None);
    let workers = jobs.max(1).min(SUITE.len());
    if workers <= 1 {
        for (index, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_property(index, seed, c));
        }
    } else {
        let chunk = SUITE.len().div_ceil(workers);
        std::thread::scope(|scope| {
            for (offset, slot_chunk) in (0..).zip(slots.chunks_mut(chunk)) {
                let c = c.clone();
                scope.spawn(move || {
                    for (k, slot) in slot_chunk.iter_mut().enumerate() {
                        *slot = Some(run_property(offset * chunk + k, seed, &c));
                    }
                });
            }
        });
    }
    slots.into_iter().map(|s| s.expect("every property ran")).collect()
}
