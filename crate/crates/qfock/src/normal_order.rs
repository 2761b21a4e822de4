//! Symbolic normal ordering of words in the RSWN generators, over exact
//! complex rationals.
//!
//! A word is a finite product of generators `B?_f` (creator), `N_a`
//! (number), `B_h` (annihilator); a term is a word with a complex rational
//! coefficient. The rewrite rules are the commutation relations
//!
//! ```text
//! B_f B?_g  = B?_g B_f + 2c<f,g> + 4 N_{conj(f) g}
//! N_a B?_f  = B?_f N_a + 2 B?_{a f}
//! B_f N_a   = N_a B_f + 2 B_{conj(a) f}
//! ```
//!
//! oriented left to right, plus linearity in the test function (a generator
//! with zero argument annihilates its term). A word is normal when creators
//! precede number operators precede annihilators; the rewrite system is
//! confluent, so the normal form is independent of which violating pair is
//! rewritten first. This module is the trusted oracle: it computes inner
//! products of n-particle vectors by brute-force rewriting, with no shared
//! code or formulas with the recursive engine it is used to check.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::num::{CRat, Rat, Scalar};
use crate::stepfn::MeasuredCellFunction;
use crate::{Error, Result};

/// Exact step function, the argument type of every generator.
pub type ExactFn = MeasuredCellFunction<CRat>;

/// One RSWN generator. Variant order encodes the normal order: creators
/// first, then number operators, then annihilators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Generator {
    /// `B?_f`
    Create(ExactFn),
    /// `N_a`
    Number(ExactFn),
    /// `B_h`
    Annihilate(ExactFn),
}

impl Generator {
    pub fn argument(&self) -> &ExactFn {
        match self {
            Generator::Create(f) | Generator::Number(f) | Generator::Annihilate(f) => f,
        }
    }

    fn with_argument(&self, f: ExactFn) -> Self {
        match self {
            Generator::Create(_) => Generator::Create(f),
            Generator::Number(_) => Generator::Number(f),
            Generator::Annihilate(_) => Generator::Annihilate(f),
        }
    }

    /// `B?_f* = B_f`, `N_a* = N_{conj(a)}`, `B_h* = B?_h`.
    pub fn adjoint(&self) -> Self {
        match self {
            Generator::Create(f) => Generator::Annihilate(f.clone()),
            Generator::Number(a) => Generator::Number(a.conj()),
            Generator::Annihilate(h) => Generator::Create(h.clone()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Generator::Create(_) => 0,
            Generator::Number(_) => 1,
            Generator::Annihilate(_) => 2,
        }
    }
}

/// A product of generators, leftmost factor applied last.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct OperatorWord(pub Vec<Generator>);

impl OperatorWord {
    pub fn new(gens: impl Into<Vec<Generator>>) -> Self {
        OperatorWord(gens.into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Creators, then numbers, then annihilators.
    pub fn is_normal(&self) -> bool {
        self.0.windows(2).all(|w| w[0].rank() <= w[1].rank())
    }

    /// Reverses the word and takes generator adjoints.
    pub fn adjoint(&self) -> Self {
        OperatorWord(self.0.iter().rev().map(Generator::adjoint).collect())
    }
}

/// A word with a complex rational coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub coeff: CRat,
    pub word: OperatorWord,
}

impl Term {
    pub fn new(coeff: CRat, word: OperatorWord) -> Self {
        Term { coeff, word }
    }

    /// `true` when the coefficient vanishes or any generator has a zero
    /// argument (generators are linear in the test function).
    fn is_trivially_zero(&self) -> bool {
        self.coeff.is_zero() || self.word.0.iter().any(|g| g.argument().is_zero_fn())
    }
}

/// A finite linear combination of words, merged and zero-pruned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermSum {
    terms: BTreeMap<OperatorWord, CRat>,
}

impl TermSum {
    pub fn zero() -> Self {
        TermSum::default()
    }

    pub fn scalar(c: CRat) -> Self {
        let mut s = TermSum::zero();
        s.add_term(Term::new(c, OperatorWord::default()));
        s
    }

    pub fn from_term(t: Term) -> Self {
        let mut s = TermSum::zero();
        s.add_term(t);
        s
    }

    pub fn from_word(w: OperatorWord) -> Self {
        Self::from_term(Term::new(CRat::one(), w))
    }

    pub fn add_term(&mut self, t: Term) {
        if t.is_trivially_zero() {
            return;
        }
        match self.terms.entry(t.word) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(t.coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().clone() + t.coeff;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(Term::new(c.clone(), w.clone()));
        }
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(Term::new(-c.clone(), w.clone()));
        }
        out
    }

    pub fn scale(&self, by: &CRat) -> Self {
        let mut out = TermSum::zero();
        for (w, c) in &self.terms {
            out.add_term(Term::new(by.clone() * c.clone(), w.clone()));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of the empty word.
    pub fn scalar_part(&self) -> CRat {
        self.terms
            .get(&OperatorWord::default())
            .cloned()
            .unwrap_or_else(CRat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OperatorWord, &CRat)> {
        self.terms.iter()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = TermSum::zero();
        for (w, c) in &self.terms {
            out.add_term(Term::new(Scalar::conj(c), w.adjoint()));
        }
        out
    }
}

impl FromIterator<Term> for TermSum {
    fn from_iter<I: IntoIterator<Item = Term>>(iter: I) -> Self {
        let mut s = TermSum::zero();
        for t in iter {
            s.add_term(t);
        }
        s
    }
}

/// Which violating adjacent pair is rewritten at each step. All strategies
/// reach the same normal form; exposing the choice lets tests check that.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteStrategy {
    Leftmost,
    Rightmost,
    /// Pseudorandom choice, deterministic in the seed.
    Seeded(u64),
}

/// Which side(s) of a word act on the vacuum during rewriting.
///
/// `B_h Phi = N_a Phi = 0` makes words ending in an annihilator or number
/// vanish; dually `<Phi| B?_f = 0` kills words starting with a creator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VacuumSide {
    None,
    Right,
    Both,
}

/// Hard cap on rewrite steps for one normal-ordering request.
pub const DEFAULT_ORACLE_BUDGET: u64 = 20_000_000;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rewrites every argument function in the sum onto one shared partition,
/// so that inner products and pointwise products inside the rules are
/// always defined.
fn on_common_partition(sums: &mut [&mut TermSum]) -> Result<()> {
    let mut args: Vec<ExactFn> = Vec::new();
    for s in sums.iter() {
        for (w, _) in s.terms.iter() {
            for g in &w.0 {
                args.push(g.argument().clone());
            }
        }
    }
    if args.is_empty() {
        return Ok(());
    }
    let refs: Vec<&ExactFn> = args.iter().collect();
    let mut refined = MeasuredCellFunction::common_refinement_many(&refs)?.into_iter();
    for s in sums.iter_mut() {
        let old = std::mem::take(&mut s.terms);
        for (w, c) in old {
            let gens = w
                .0
                .iter()
                .map(|g| g.with_argument(refined.next().expect("refined arg")))
                .collect::<Vec<_>>();
            s.add_term(Term::new(c, OperatorWord(gens)));
        }
    }
    Ok(())
}

struct Rewriter<'a> {
    c: &'a Rat,
    strategy: RewriteStrategy,
    vacuum: VacuumSide,
    budget: u64,
    rng_state: u64,
    out: TermSum,
}

impl Rewriter<'_> {
    fn run(&mut self, start: Vec<Term>) -> Result<()> {
        let mut work = start;
        while let Some(t) = work.pop() {
            if self.budget == 0 {
                return Err(Error::OracleBudgetExceeded(format!(
                    "rewrite budget exhausted with {} terms pending",
                    work.len() + 1
                )));
            }
            self.budget -= 1;
            if t.is_trivially_zero() || self.killed_by_vacuum(&t.word) {
                continue;
            }
            let violations: Vec<usize> = t
                .word
                .0
                .windows(2)
                .enumerate()
                .filter(|(_, w)| w[0].rank() > w[1].rank())
                .map(|(i, _)| i)
                .collect();
            if violations.is_empty() {
                let mut word = t.word;
                word.0.sort();
                self.out.add_term(Term::new(t.coeff, word));
                continue;
            }
            let i = match self.strategy {
                RewriteStrategy::Leftmost => violations[0],
                RewriteStrategy::Rightmost => *violations.last().expect("nonempty"),
                RewriteStrategy::Seeded(_) => {
                    let r = splitmix64(&mut self.rng_state);
                    violations[(r % violations.len() as u64) as usize]
                }
            };
            self.apply_rule(&t, i, &mut work)?;
        }
        Ok(())
    }

    fn killed_by_vacuum(&self, w: &OperatorWord) -> bool {
        if w.is_empty() {
            return false;
        }
        let right_kills = matches!(
            w.0.last(),
            Some(Generator::Annihilate(_)) | Some(Generator::Number(_))
        );
        let left_kills = matches!(w.0.first(), Some(Generator::Create(_)));
        match self.vacuum {
            VacuumSide::None => false,
            VacuumSide::Right => right_kills,
            VacuumSide::Both => right_kills || left_kills,
        }
    }

    fn apply_rule(&mut self, t: &Term, i: usize, work: &mut Vec<Term>) -> Result<()> {
        let swapped = |a: Generator, b: Generator| {
            let mut w = t.word.0.clone();
            w[i] = a;
            w[i + 1] = b;
            Term::new(t.coeff.clone(), OperatorWord(w))
        };
        let contracted = |coeff: CRat, g: Option<Generator>| {
            let mut w = t.word.0.clone();
            match g {
                Some(g) => {
                    w.remove(i + 1);
                    w[i] = g;
                }
                None => {
                    w.remove(i + 1);
                    w.remove(i);
                }
            }
            Term::new(t.coeff.clone() * coeff, OperatorWord(w))
        };

        match (&t.word.0[i], &t.word.0[i + 1]) {
            (Generator::Annihilate(f), Generator::Create(g)) => {
                let pairing = f.inner(g)?;
                let two_c = CRat::from_real(self.c.clone() + self.c.clone());
                work.push(swapped(Generator::Create(g.clone()), Generator::Annihilate(f.clone())));
                work.push(contracted(two_c * pairing, None));
                work.push(contracted(
                    CRat::from_real(Rat::from_integer(4.into())),
                    Some(Generator::Number(f.conj().pointwise_mul(g)?)),
                ));
            }
            (Generator::Number(a), Generator::Create(f)) => {
                work.push(swapped(Generator::Create(f.clone()), Generator::Number(a.clone())));
                work.push(contracted(
                    CRat::from_real(Rat::from_integer(2.into())),
                    Some(Generator::Create(a.pointwise_mul(f)?)),
                ));
            }
            (Generator::Annihilate(f), Generator::Number(a)) => {
                work.push(swapped(Generator::Number(a.clone()), Generator::Annihilate(f.clone())));
                work.push(contracted(
                    CRat::from_real(Rat::from_integer(2.into())),
                    Some(Generator::Annihilate(a.conj().pointwise_mul(f)?)),
                ));
            }
            other => unreachable!("pair {other:?} is already normal"),
        }
        Ok(())
    }
}

fn rewrite(sum: &TermSum, c: &Rat, strategy: RewriteStrategy, vacuum: VacuumSide) -> Result<TermSum> {
    let mut sum = sum.clone();
    on_common_partition(&mut [&mut sum])?;
    let seed = match strategy {
        RewriteStrategy::Seeded(s) => s,
        _ => 0,
    };
    let mut rw = Rewriter {
        c,
        strategy,
        vacuum,
        budget: DEFAULT_ORACLE_BUDGET,
        rng_state: seed,
        out: TermSum::zero(),
    };
    rw.run(sum.iter().map(|(w, co)| Term::new(co.clone(), w.clone())).collect())?;
    Ok(rw.out)
}

/// Full normal form of a sum of words: creators, then number operators,
/// then annihilators, with commuting runs sorted canonically.
pub fn normal_order(sum: &TermSum, c: &Rat, strategy: RewriteStrategy) -> Result<TermSum> {
    rewrite(sum, c, strategy, VacuumSide::None)
}

/// `<Phi, X Phi>` for a sum of words `X`.
pub fn vacuum_expectation(sum: &TermSum, c: &Rat) -> Result<CRat> {
    let nf = rewrite(sum, c, RewriteStrategy::Leftmost, VacuumSide::Both)?;
    Ok(nf.scalar_part())
}

/// `<B?^m_f Phi, B?^n_g Phi>` by brute-force rewriting of `B_f^m B?_g^n`.
pub fn oracle_mixed_inner(f: &ExactFn, g: &ExactFn, m: u32, n: u32, c: &Rat) -> Result<CRat> {
    let mut gens = Vec::with_capacity((m + n) as usize);
    for _ in 0..m {
        gens.push(Generator::Annihilate(f.clone()));
    }
    for _ in 0..n {
        gens.push(Generator::Create(g.clone()));
    }
    if gens.is_empty() {
        return Ok(CRat::one());
    }
    vacuum_expectation(&TermSum::from_word(OperatorWord(gens)), c)
}

/// `I_n = <B?^n_f Phi, B?^n_g Phi>`, the oracle for the recursive engine.
pub fn oracle_nth_inner(f: &ExactFn, g: &ExactFn, n: u32, c: &Rat) -> Result<CRat> {
    oracle_mixed_inner(f, g, n, n, c)
}

/// Checks `lhs = rhs` as operators, by comparing normal forms. Arguments
/// from both sides are refined onto one shared partition first, so the
/// comparison is grid-independent for interval-backed functions.
pub fn verify_operator_identity(lhs: &TermSum, rhs: &TermSum, c: &Rat) -> Result<bool> {
    let mut l = lhs.clone();
    let mut r = rhs.clone();
    on_common_partition(&mut [&mut l, &mut r])?;
    let ln = rewrite(&l, c, RewriteStrategy::Leftmost, VacuumSide::None)?;
    let rn = rewrite(&r, c, RewriteStrategy::Leftmost, VacuumSide::None)?;
    Ok(ln == rn)
}

/// Checks `lhs Phi = rhs Phi` as vectors: normal forms are compared after
/// discarding words that annihilate the vacuum on the right.
pub fn verify_identity_on_vacuum(lhs: &TermSum, rhs: &TermSum, c: &Rat) -> Result<bool> {
    let mut l = lhs.clone();
    let mut r = rhs.clone();
    on_common_partition(&mut [&mut l, &mut r])?;
    let ln = rewrite(&l, c, RewriteStrategy::Leftmost, VacuumSide::Right)?;
    let rn = rewrite(&r, c, RewriteStrategy::Leftmost, VacuumSide::Right)?;
    Ok(ln == rn)
}
