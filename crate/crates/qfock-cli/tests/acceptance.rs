//! Acceptance gate: ten criteria, each one test printing a single
//! pass/fail line (run with `--nocapture` to see the lines for passing
//! criteria). Tolerances are pinned here, not read from anywhere else.

use std::collections::BTreeSet;
use std::process::Command;

use nalgebra::DMatrix;
use num_traits::Zero;
use qfock::factorization::{
    check_exponential_factorization, check_order_n_factorization, RegionSplit,
};
use qfock::fock::{
    derivative_coefficient_check, exists_exponential, exp_inner_closed, exp_inner_series,
    series_trajectory, InnerProductTable,
};
use qfock::gram::{gram_matrix, hadamard_power, is_psd};
use qfock::normal_order::{
    oracle_mixed_inner, oracle_nth_inner, vacuum_expectation, verify_operator_identity, Generator,
    OperatorWord, TermSum,
};
use qfock::num::{rat, C64, CRat, Rat, Scalar};
use qfock::stepfn::{Cell, CellId, IntervalSpec, MeasuredCellFunction};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relative gap allowed between the truncated series and the closed form.
const SERIES_VS_CLOSED_REL: f64 = 1e-8;
/// Tail-bound tolerance the series is summed to.
const SERIES_TOL: f64 = 1e-10;
/// Relative error allowed in exponential-level factorization.
const FACTORIZATION_TOL: f64 = 1e-10;
/// Eigenvalue floor for Hadamard powers, relative to the spectral norm.
const SCHUR_PSD_TOL: f64 = 1e-12;
/// A duplicated family member must push the least eigenvalue below this
/// times the spectral norm.
const DUPLICATE_EIG_TOL: f64 = 1e-10;
/// Relative error allowed in the derivative coefficient check.
const DERIVATIVE_REL_TOL: f64 = 1e-10;

type ExactFn = MeasuredCellFunction<CRat>;

const CELL_POOL: [(&str, i64, i64); 3] = [("u", 1, 2), ("v", 3, 2), ("w", 2, 1)];

fn nonzero(rng: &mut ChaCha8Rng, bound: i64) -> i64 {
    loop {
        let v = rng.gen_range(-bound..=bound);
        if v != 0 {
            return v;
        }
    }
}

fn random_value(rng: &mut ChaCha8Rng) -> CRat {
    CRat::new(rat(nonzero(rng, 3), 10), rat(rng.gen_range(-3..=3), 10))
}

/// Random exact function on the first `cells` pool entries.
fn random_exact(rng: &mut ChaCha8Rng, cells: usize) -> ExactFn {
    let pairs: Vec<(Cell<Rat>, CRat)> = CELL_POOL[..cells]
        .iter()
        .map(|(id, num, den)| (Cell::abstract_cell(*id, rat(*num, *den)), random_value(rng)))
        .collect();
    MeasuredCellFunction::from_cells(pairs).expect("nonzero values on positive cells")
}

fn random_float_fn(rng: &mut ChaCha8Rng, cells: usize) -> MeasuredCellFunction<C64> {
    let mut spec = IntervalSpec::new();
    for k in 0..cells {
        spec = spec.push(
            k as f64,
            k as f64 + 1.0,
            C64::new(rng.gen_range(-0.28..0.28), rng.gen_range(-0.28..0.28)),
        );
    }
    MeasuredCellFunction::from_intervals(&spec).expect("well-formed intervals")
}

fn creators(f: &ExactFn, k: u32) -> Vec<Generator> {
    vec![Generator::Create(f.clone()); k as usize]
}

fn real_nonneg(z: &CRat) -> bool {
    z.im.is_zero() && qfock::num::rat_is_nonnegative(&z.re)
}

#[test]
fn criterion_01_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = rat(1, 1);
    for _ in 0..50 {
        let cells = rng.gen_range(1..=3usize);
        let f = random_exact(&mut rng, cells);
        let g = random_exact(&mut rng, cells);
        let table = InnerProductTable::build(&f, &g, 4, &c).unwrap();
        for n in 0..=4u32 {
            let oracle = oracle_nth_inner(&f, &g, n, &c).unwrap();
            assert_eq!(
                oracle,
                table.values()[n as usize],
                "criterion 01 FAIL: recursion diverged from the oracle at order {n}"
            );
        }
    }
    for _ in 0..5 {
        let f = random_exact(&mut rng, 2);
        let g = random_exact(&mut rng, 2);
        let oracle = oracle_nth_inner(&f, &g, 5, &c).unwrap();
        let direct = qfock::fock::nth_inner(&f, &g, 5, &c).unwrap();
        assert_eq!(oracle, direct, "criterion 01 FAIL: order-5 mismatch");
    }
    println!("criterion 01 PASS: recursion equals the normal-ordering oracle exactly on 50 pairs (orders 0..=4) and 5 pairs at order 5");
}

#[test]
fn criterion_02_series_vs_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100 {
        let cells = rng.gen_range(1..=3usize);
        let f = random_float_fn(&mut rng, cells);
        let g = random_float_fn(&mut rng, cells);
        let c = rng.gen_range(0.5..2.0);
        let (series, _) = exp_inner_series(&f, &g, c, SERIES_TOL, 400).unwrap();
        let closed = exp_inner_closed(&f, &g, &c).unwrap();
        let rel = (series - closed).norm() / closed.norm();
        assert!(
            rel <= SERIES_VS_CLOSED_REL,
            "criterion 02 FAIL: case {case} relative gap {rel}"
        );
    }
    println!("criterion 02 PASS: series agrees with the closed form within {SERIES_VS_CLOSED_REL} on 100 random complex pairs");
}

#[test]
fn criterion_03_existence_boundary() {
    let build = |num: i64, den: i64| {
        let spec = IntervalSpec::new().push(rat(0, 1), rat(1, 1), CRat::new(rat(num, den), rat(0, 1)));
        MeasuredCellFunction::from_intervals(&spec).unwrap()
    };
    for (num, den, n_max) in [(49, 100, 2_000u32), (499, 1000, 12_000)] {
        let f = build(num, den);
        assert!(
            exists_exponential(&f).exists,
            "criterion 03 FAIL: {num}/{den} flagged as nonexistent"
        );
        let ff = f.to_float();
        let (_, diag) = exp_inner_series(&ff, &ff, 1.0, SERIES_TOL, n_max).unwrap();
        assert!(
            diag.converged && diag.tail_bound <= SERIES_TOL,
            "criterion 03 FAIL: series did not converge at {num}/{den}"
        );
    }
    let half = build(1, 2);
    let verdict = exists_exponential(&half);
    assert!(
        !verdict.exists && verdict.margin == 0.0,
        "criterion 03 FAIL: boundary function not flagged"
    );
    let hf = half.to_float();
    let points = series_trajectory(&hf, &hf, 1.0, 50).unwrap();
    let harmonic_quarter: f64 = (1..=50).map(|n| 1.0 / n as f64).sum::<f64>() / 4.0;
    let last = points.last().unwrap();
    assert!(
        last.partial_sum.re > harmonic_quarter,
        "criterion 03 FAIL: partial sums stayed below the divergence witness"
    );
    println!("criterion 03 PASS: convergence at rho 0.49 and 0.499, divergence witness at rho 0.5 (partial sum {:.3} > {harmonic_quarter:.4})", last.partial_sum.re);
}

#[test]
fn criterion_04_single_cell_ratio_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10 {
        let rho = random_value(&mut rng);
        let sigma = random_value(&mut rng);
        let len = rat(rng.gen_range(1..=5), 2);
        let c = rat(rng.gen_range(1..=5), rng.gen_range(1..=3));
        let cell = |v: &CRat| {
            MeasuredCellFunction::from_cells([(Cell::abstract_cell("s", len.clone()), v.clone())])
                .unwrap()
        };
        let table = InnerProductTable::build(&cell(&rho), &cell(&sigma), 20, &c).unwrap();
        for n in 1..=20u32 {
            let nr = rat(n as i64, 1);
            let bracket =
                c.clone() * len.clone() / (rat(2, 1) * nr.clone()) + rat(n as i64 - 1, 1) / nr;
            let step = rho.conj() * sigma.clone() * CRat::from_real(rat(4, 1) * bracket);
            let expected =
                table.values()[n as usize - 1].clone() * step * CRat::from_real(rat((n as i64) * (n as i64), 1));
            assert_eq!(
                table.values()[n as usize],
                expected,
                "criterion 04 FAIL: case {case} broke the ratio law at order {n}"
            );
        }
    }
    println!("criterion 04 PASS: exact single-cell ratio law for orders 1..=20 on 10 random rational inputs");
}

#[test]
fn criterion_05_operator_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = rat(3, 2);

    // Creator-word commutators against their closed forms, as operator
    // identities.
    for _ in 0..3 {
        let f = random_exact(&mut rng, 2);
        let h = random_exact(&mut rng, 2);
        let a = random_exact(&mut rng, 2);
        let hf = h.conj().pointwise_mul(&f).unwrap();
        let hff = hf.pointwise_mul(&f).unwrap();
        let af = a.pointwise_mul(&f).unwrap();
        for n in 1..=4u32 {
            let mut word = vec![Generator::Annihilate(h.clone())];
            word.extend(creators(&f, n));
            let mut rev = creators(&f, n);
            rev.push(Generator::Annihilate(h.clone()));
            let lhs = TermSum::from_word(OperatorWord::new(word))
                .minus(&TermSum::from_word(OperatorWord::new(rev)));

            let scalar = h
                .inner(&f)
                .unwrap()
                .mul_real(&c)
                .mul_real(&rat(2 * n as i64, 1));
            let mut rhs = TermSum::from_word(OperatorWord::new(creators(&f, n - 1))).scale(&scalar);
            let mut number_word = creators(&f, n - 1);
            number_word.push(Generator::Number(hf.clone()));
            rhs = rhs.add(
                &TermSum::from_word(OperatorWord::new(number_word))
                    .scale(&CRat::from_real(rat(4 * n as i64, 1))),
            );
            if n >= 2 {
                let mut tail = creators(&f, n - 2);
                tail.push(Generator::Create(hff.clone()));
                rhs = rhs.add(&TermSum::from_word(OperatorWord::new(tail)).scale(
                    &CRat::from_real(rat(4 * (n as i64) * (n as i64 - 1), 1)),
                ));
            }
            assert!(
                verify_operator_identity(&lhs, &rhs, &c).unwrap(),
                "criterion 05 FAIL: annihilator commutator differs at order {n}"
            );

            let mut word = vec![Generator::Number(a.clone())];
            word.extend(creators(&f, n));
            let mut rev = creators(&f, n);
            rev.push(Generator::Number(a.clone()));
            let lhs = TermSum::from_word(OperatorWord::new(word))
                .minus(&TermSum::from_word(OperatorWord::new(rev)));
            let mut tail = creators(&f, n - 1);
            tail.push(Generator::Create(af.clone()));
            let rhs = TermSum::from_word(OperatorWord::new(tail))
                .scale(&CRat::from_real(rat(2 * n as i64, 1)));
            assert!(
                verify_operator_identity(&lhs, &rhs, &c).unwrap(),
                "criterion 05 FAIL: number commutator differs at order {n}"
            );
        }
    }

    // Words with more annihilators than creators have vanishing vacuum
    // expectation, for every shape up to length 3.
    let f = random_exact(&mut rng, 2);
    let h = random_exact(&mut rng, 2);
    let a = random_exact(&mut rng, 2);
    let letters = [
        Generator::Create(f.clone()),
        Generator::Number(a.clone()),
        Generator::Annihilate(h.clone()),
    ];
    let mut shapes = 0;
    for len in 1..=3u32 {
        for mut code in 0..3u32.pow(len) {
            let mut word = Vec::new();
            let (mut creates, mut annihilates) = (0, 0);
            for _ in 0..len {
                let letter = &letters[(code % 3) as usize];
                match letter {
                    Generator::Create(_) => creates += 1,
                    Generator::Annihilate(_) => annihilates += 1,
                    Generator::Number(_) => {}
                }
                word.push(letter.clone());
                code /= 3;
            }
            if annihilates > creates {
                shapes += 1;
                let ev = vacuum_expectation(&TermSum::from_word(OperatorWord::new(word)), &c)
                    .unwrap();
                assert!(
                    ev.is_zero(),
                    "criterion 05 FAIL: a word with excess annihilators survived the vacuum"
                );
            }
        }
    }

    // Different particle numbers are orthogonal.
    let g = random_exact(&mut rng, 2);
    for m in 0..=4u32 {
        for n in 0..=4u32 {
            if m != n {
                assert!(
                    oracle_mixed_inner(&f, &g, m, n, &c).unwrap().is_zero(),
                    "criterion 05 FAIL: orders ({m},{n}) not orthogonal"
                );
            }
        }
    }
    println!("criterion 05 PASS: commutator identities exact for orders 1..=4, {shapes} excess-annihilator shapes vanish, mixed orders m != n <= 4 orthogonal");
}

#[test]
fn criterion_06_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = rat(1, 1);

    let four_cells = |rng: &mut ChaCha8Rng| {
        let ids = ["a", "b", "c", "d"];
        let pairs: Vec<(Cell<Rat>, CRat)> = ids
            .iter()
            .enumerate()
            .map(|(k, id)| (Cell::abstract_cell(*id, rat(k as i64 + 1, 2)), random_value(rng)))
            .collect();
        MeasuredCellFunction::from_cells(pairs).unwrap()
    };
    let random_split = |rng: &mut ChaCha8Rng| {
        let mut ids: Vec<&str> = vec!["a", "b", "c", "d"];
        for i in (1..ids.len()).rev() {
            ids.swap(i, rng.gen_range(0..=i));
        }
        let cut = rng.gen_range(1..=3usize);
        let part = |slice: &[&str]| -> BTreeSet<CellId> {
            slice.iter().map(|s| CellId(s.to_string())).collect()
        };
        RegionSplit::new(vec![part(&ids[..cut]), part(&ids[cut..])]).unwrap()
    };

    for case in 0..10 {
        let f = four_cells(&mut rng);
        let g = four_cells(&mut rng);
        let split = random_split(&mut rng);
        for n in 1..=6u32 {
            let check = check_order_n_factorization(&f, &g, &split, n, &c).unwrap();
            assert!(
                check.discrepancy().is_zero(),
                "criterion 06 FAIL: case {case} order {n} binomial sum differs"
            );
        }
        let report = check_exponential_factorization(
            &f.to_float(),
            &g.to_float(),
            &split,
            &1.0,
            FACTORIZATION_TOL,
        )
        .unwrap();
        assert!(
            report.ok,
            "criterion 06 FAIL: case {case} exponential level off (closed rel {}, series rel {})",
            report.closed_rel_error, report.series_rel_error
        );
    }
    println!("criterion 06 PASS: order-n factorization exact for n <= 6 and exponential-level products within {FACTORIZATION_TOL} on 10 random splits");
}

#[test]
fn criterion_07_gram_and_schur() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..5 {
        let a = DMatrix::from_fn(5, 5, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = &a * a.adjoint();
        for n in 1..=6 {
            assert!(
                is_psd(&hadamard_power(&m, n), SCHUR_PSD_TOL).unwrap(),
                "criterion 07 FAIL: case {case} Hadamard power {n} not PSD"
            );
        }
        assert!(
            is_psd(&m.map(|z| z.exp()), SCHUR_PSD_TOL).unwrap(),
            "criterion 07 FAIL: case {case} entrywise exp not PSD"
        );
    }

    let const_fn = |num: i64| {
        let spec = IntervalSpec::new()
            .push(rat(0, 1), rat(1, 1), CRat::new(rat(num, 10), rat(0, 1)));
        MeasuredCellFunction::from_intervals(&spec).unwrap()
    };
    let family = [const_fn(1), const_fn(2), const_fn(3)];
    let report = gram_matrix(&family, &rat(1, 1)).unwrap();
    assert!(
        report.independent && report.min_eigenvalue > 0.0,
        "criterion 07 FAIL: distinct constants not independent"
    );

    let duplicated = [const_fn(1), const_fn(2), const_fn(3), const_fn(2)];
    let report = gram_matrix(&duplicated, &rat(1, 1)).unwrap();
    assert!(
        report.min_eigenvalue < DUPLICATE_EIG_TOL * report.spectral_norm,
        "criterion 07 FAIL: duplicate did not collapse the least eigenvalue"
    );
    println!("criterion 07 PASS: Hadamard powers <= 6 and exp stay PSD within {SCHUR_PSD_TOL} * norm; independence margin positive for distinct constants, collapsed by a duplicate");
}

#[test]
fn criterion_08_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = rat(1, 1);
    for case in 0..50 {
        let cells = rng.gen_range(1..=3usize);
        let base: Vec<(Cell<Rat>, CRat)> = CELL_POOL[..cells]
            .iter()
            .map(|(id, num, den)| (Cell::abstract_cell(*id, rat(*num, *den)), random_value(&mut rng)))
            .collect();
        let grown: Vec<(Cell<Rat>, CRat)> = base
            .iter()
            .map(|(cell, v)| {
                let factor = rat(rng.gen_range(10..=18), 10);
                (cell.clone(), v.clone() * CRat::from_real(factor))
            })
            .collect();
        let g = MeasuredCellFunction::from_cells(base).unwrap();
        let h = MeasuredCellFunction::from_cells(grown).unwrap();
        let gg = InnerProductTable::build(&g, &g, 10, &c).unwrap();
        let hh = InnerProductTable::build(&h, &h, 10, &c).unwrap();
        for n in 0..=10usize {
            let d = hh.values()[n].clone() - gg.values()[n].clone();
            assert!(
                real_nonneg(&d),
                "criterion 08 FAIL: case {case} order {n} shrank under cellwise growth"
            );
        }
    }
    println!("criterion 08 PASS: I_n nondecreasing under cellwise modulus growth on 50 pairs, orders <= 10, exact");
}

#[test]
fn criterion_09_derivative_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = rat(1, 1);
    for case in 0..10 {
        let cell = [(Cell::abstract_cell("s", rat(rng.gen_range(1..=4), 2)), random_value(&mut rng))];
        let f = MeasuredCellFunction::from_cells(cell).unwrap();
        let g = MeasuredCellFunction::from_cells([(
            Cell::abstract_cell("s", f.partition().cells()[0].measure.clone()),
            random_value(&mut rng),
        )])
        .unwrap();
        for n in 1..=6u32 {
            let rel = derivative_coefficient_check(&f, &g, n, &c).unwrap();
            assert!(
                rel <= DERIVATIVE_REL_TOL,
                "criterion 09 FAIL: case {case} order {n} relative error {rel}"
            );
        }
    }
    println!("criterion 09 PASS: series coefficients of the closed form match I_n/n! within {DERIVATIVE_REL_TOL} for orders <= 6 on 10 single-cell pairs");
}

#[test]
fn criterion_10_cli_determinism() {
    let spec = format!("{}/examples/verify.json", env!("CARGO_MANIFEST_DIR"));
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qfock"))
            .args(["verify", "--spec", &spec])
            .output()
            .expect("binary runs")
    };
    let first = run();
    let second = run();
    assert_eq!(
        first.status.code(),
        Some(0),
        "criterion 10 FAIL: verify exited nonzero: {}",
        String::from_utf8_lossy(&first.stdout)
    );
    assert_eq!(
        first.stdout, second.stdout,
        "criterion 10 FAIL: verify output not byte-identical across runs"
    );
    println!("criterion 10 PASS: bundled verify spec exits 0 with byte-identical output across runs");
}
