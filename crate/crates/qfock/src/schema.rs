//! JSON encoding of step functions and scalars for spec files.
//!
//! Numbers come in two flavors: strings hold exact rationals (`"3/4"`,
//! `"-2"`), JSON numbers hold doubles, with integer literals kept exact.
//! A function built entirely from exact numbers stays on the exact tower;
//! one float anywhere demotes the whole function to doubles.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::num::{parse_rational, C64, CRat, Rat, RealScalar};
use crate::stepfn::{Cell, IntervalSpec, MeasuredCellFunction};
use crate::{Error, Result};

/// One scalar from a spec file, exactness preserved.
#[derive(Debug, Clone, PartialEq)]
pub enum NumberLit {
    Exact(Rat),
    Float(f64),
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum RawNumber {
    Text(String),
    Value(serde_json::Number),
}

impl Serialize for NumberLit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NumberLit::Exact(r) => crate::num::rational_string(r).serialize(s),
            NumberLit::Float(x) => x.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for NumberLit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNumber::deserialize(d)?;
        match raw {
            RawNumber::Text(s) => parse_rational(&s)
                .map(NumberLit::Exact)
                .ok_or_else(|| serde::de::Error::custom(format!("not a rational: {s:?}"))),
            RawNumber::Value(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(NumberLit::Exact(Rat::ratio(i, 1)))
                } else {
                    n.as_f64()
                        .filter(|x| x.is_finite())
                        .map(NumberLit::Float)
                        .ok_or_else(|| serde::de::Error::custom(format!("not finite: {n}")))
                }
            }
        }
    }
}

impl NumberLit {
    pub fn is_exact(&self) -> bool {
        matches!(self, NumberLit::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            NumberLit::Exact(r) => r.to_f64(),
            NumberLit::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rat> {
        match self {
            NumberLit::Exact(r) => Some(r),
            NumberLit::Float(_) => None,
        }
    }

    fn zero() -> Self {
        NumberLit::Exact(Rat::ratio(0, 1))
    }
}

/// One constant-value interval `[a, b)`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalEntry {
    pub a: NumberLit,
    pub b: NumberLit,
    pub re: NumberLit,
    #[serde(default = "NumberLit::zero")]
    pub im: NumberLit,
}

/// One abstract measured cell; `id` defaults to the list position.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    #[serde(default)]
    pub id: Option<String>,
    pub measure: NumberLit,
    pub re: NumberLit,
    #[serde(default = "NumberLit::zero")]
    pub im: NumberLit,
}

/// A step function given either as intervals on the line or as abstract
/// cells. Exactly one of the two lists must be present.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<IntervalEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellEntry>>,
}

/// A parsed function on whichever scalar tower the literals allow.
#[derive(Debug, Clone)]
pub enum AnyFunction {
    Exact(MeasuredCellFunction<CRat>),
    Float(MeasuredCellFunction<C64>),
}

impl AnyFunction {
    pub fn is_exact(&self) -> bool {
        matches!(self, AnyFunction::Exact(_))
    }

    pub fn to_float(&self) -> MeasuredCellFunction<C64> {
        match self {
            AnyFunction::Exact(f) => f.to_float(),
            AnyFunction::Float(f) => f.clone(),
        }
    }

    pub fn as_exact(&self) -> Option<&MeasuredCellFunction<CRat>> {
        match self {
            AnyFunction::Exact(f) => Some(f),
            AnyFunction::Float(_) => None,
        }
    }

    pub fn cell_ids(&self) -> BTreeSet<String> {
        match self {
            AnyFunction::Exact(f) => f.support().map(|(cell, _)| cell.id.0.clone()).collect(),
            AnyFunction::Float(f) => f.support().map(|(cell, _)| cell.id.0.clone()).collect(),
        }
    }
}

impl FunctionSpec {
    fn literals(&self) -> Vec<&NumberLit> {
        let mut out = Vec::new();
        if let Some(intervals) = &self.intervals {
            for e in intervals {
                out.extend([&e.a, &e.b, &e.re, &e.im]);
            }
        }
        if let Some(cells) = &self.cells {
            for e in cells {
                out.extend([&e.measure, &e.re, &e.im]);
            }
        }
        out
    }

    /// Builds the function, exact iff every literal is exact.
    pub fn build(&self, name: &str) -> Result<AnyFunction> {
        match (&self.intervals, &self.cells) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::ParseError(format!(
                    "function {name:?} must have exactly one of \"intervals\" or \"cells\""
                )))
            }
            _ => {}
        }
        let exact = self.literals().iter().all(|l| l.is_exact());
        if exact {
            self.build_exact(name).map(AnyFunction::Exact)
        } else {
            self.build_float(name).map(AnyFunction::Float)
        }
    }

    fn build_exact(&self, name: &str) -> Result<MeasuredCellFunction<CRat>> {
        let lit = |l: &NumberLit| l.as_exact().cloned().expect("checked exact");
        if let Some(intervals) = &self.intervals {
            let mut spec = IntervalSpec::new();
            for e in intervals {
                spec = spec.push(lit(&e.a), lit(&e.b), CRat::new(lit(&e.re), lit(&e.im)));
            }
            MeasuredCellFunction::from_intervals(&spec)
        } else {
            let cells = self.cells.as_ref().expect("checked above");
            let pairs = cells.iter().enumerate().map(|(i, e)| {
                (
                    Cell::abstract_cell(cell_id(name, i, &e.id), lit(&e.measure)),
                    CRat::new(lit(&e.re), lit(&e.im)),
                )
            });
            MeasuredCellFunction::from_cells(pairs)
        }
    }

    fn build_float(&self, name: &str) -> Result<MeasuredCellFunction<C64>> {
        if let Some(intervals) = &self.intervals {
            let mut spec = IntervalSpec::new();
            for e in intervals {
                spec = spec.push(
                    e.a.to_f64(),
                    e.b.to_f64(),
                    C64::new(e.re.to_f64(), e.im.to_f64()),
                );
            }
            MeasuredCellFunction::from_intervals(&spec)
        } else {
            let cells = self.cells.as_ref().expect("checked above");
            let pairs = cells.iter().enumerate().map(|(i, e)| {
                (
                    Cell::abstract_cell(cell_id(name, i, &e.id), e.measure.to_f64()),
                    C64::new(e.re.to_f64(), e.im.to_f64()),
                )
            });
            MeasuredCellFunction::from_cells(pairs)
        }
    }
}

fn cell_id(name: &str, index: usize, explicit: &Option<String>) -> String {
    match explicit {
        Some(id) => id.clone(),
        None => format!("{name}.{index}"),
    }
}
