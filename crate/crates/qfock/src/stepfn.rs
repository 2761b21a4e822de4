//! Step functions on a measured cell space.
//!
//! A test function is a finitely supported assignment of complex values to
//! disjoint cells of positive measure. Cells are either purely abstract
//! (an id plus a measure) or backed by a half-open interval `[a, b)`, in
//! which case two functions living on different partitions can still be
//! combined by passing to the common refinement of their interval grids.
//!
//! Invariants maintained by every constructor:
//! - cell ids within a partition are unique, cells are sorted by id;
//! - every cell has strictly positive, finite measure;
//! - the value map only holds nonzero values (zero cells may remain in the
//!   partition as context, e.g. after refinement against a wider function).

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::num::{C64, CRat, RealScalar, Scalar};
use crate::{Error, Result};

/// Identifier of a cell, unique within a partition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub String);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_owned())
    }
}

/// One cell of a partition: an id, a positive measure, and optionally the
/// half-open interval `[a, b)` it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell<R> {
    pub id: CellId,
    pub measure: R,
    pub span: Option<(R, R)>,
}

impl<R: RealScalar> Cell<R> {
    pub fn abstract_cell(id: impl Into<String>, measure: R) -> Self {
        Cell { id: CellId(id.into()), measure, span: None }
    }

    pub fn interval(a: R, b: R) -> Self {
        let measure = b.clone() - a.clone();
        Cell { id: CellId(format!("[{a},{b})")), measure, span: Some((a, b)) }
    }
}

/// A finite family of disjoint cells, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<R> {
    cells: Vec<Cell<R>>,
}

impl<R: RealScalar> Partition<R> {
    fn new(mut cells: Vec<Cell<R>>) -> Result<Self> {
        cells.sort_by(|x, y| x.id.cmp(&y.id));
        for w in cells.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidCell(format!("duplicate cell id {}", w[0].id)));
            }
        }
        for c in &cells {
            if !(c.measure > R::zero()) || !c.measure.is_finite() {
                return Err(Error::InvalidCell(format!(
                    "cell {} has nonpositive or infinite measure {}",
                    c.id, c.measure
                )));
            }
        }
        Ok(Partition { cells })
    }

    pub fn cells(&self) -> &[Cell<R>] {
        &self.cells
    }

    pub fn measure_of(&self, id: &CellId) -> Result<&R> {
        self.cells
            .binary_search_by(|c| c.id.cmp(id))
            .map(|i| &self.cells[i].measure)
            .map_err(|_| Error::UnknownCellId(id.to_string()))
    }

    /// Two partitions are compatible when they list the same ids with the
    /// same measures. Spans are geometry hints and do not participate.
    fn same_cells(&self, other: &Self) -> bool {
        self.cells.len() == other.cells.len()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.id == b.id && a.measure == b.measure)
    }

    fn fully_interval_backed(&self) -> bool {
        self.cells.iter().all(|c| c.span.is_some())
    }
}

/// One interval of an [`IntervalSpec`]: the constant value `value` on `[a, b)`.
#[derive(Debug, Clone)]
pub struct IntervalValue<K: Scalar> {
    pub a: K::Real,
    pub b: K::Real,
    pub value: K,
}

/// A step function described by finitely many disjoint half-open intervals.
#[derive(Debug, Clone, Default)]
pub struct IntervalSpec<K: Scalar> {
    pub intervals: Vec<IntervalValue<K>>,
}

impl<K: Scalar> IntervalSpec<K> {
    pub fn new() -> Self {
        IntervalSpec { intervals: Vec::new() }
    }

    pub fn push(mut self, a: K::Real, b: K::Real, value: K) -> Self {
        self.intervals.push(IntervalValue { a, b, value });
        self
    }
}

/// A step function: a partition plus nonzero values on some of its cells.
#[derive(Debug, Clone)]
pub struct MeasuredCellFunction<K: Scalar> {
    partition: Partition<K::Real>,
    values: BTreeMap<CellId, K>,
}

/// Equality is support equality: same (id, measure, value) triples. The
/// ambient partition (zero-valued context cells) is irrelevant.
///
/// [`MeasuredCellFunction::from_intervals`] canonicalizes to the coarsest
/// grid, so two interval-built functions compare equal exactly when they are
/// equal as functions. Derived grids (refinements, pointwise products) keep
/// their cells as-is; use [`MeasuredCellFunction::measure_where_different`]
/// for grid-independent comparison.
impl<K: Scalar> PartialEq for MeasuredCellFunction<K> {
    fn eq(&self, other: &Self) -> bool {
        if self.values.len() != other.values.len() {
            return false;
        }
        self.support().zip(other.support()).all(|((ca, va), (cb, vb))| {
            ca.id == cb.id && ca.measure == cb.measure && va == vb
        })
    }
}

impl Eq for MeasuredCellFunction<CRat> {}

/// Total order on exact functions, lexicographic over the sorted support
/// triples. Used to canonicalize operator words.
impl Ord for MeasuredCellFunction<CRat> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |f: &Self| {
            f.support()
                .map(|(c, v)| (c.id.clone(), c.measure.clone(), v.re.clone(), v.im.clone()))
                .collect::<Vec<_>>()
        };
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for MeasuredCellFunction<CRat> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Scalar> MeasuredCellFunction<K> {
    fn assemble(partition: Partition<K::Real>, mut values: BTreeMap<CellId, K>) -> Self {
        values.retain(|_, v| !v.is_zero());
        debug_assert!(values.keys().all(|id| partition.measure_of(id).is_ok()));
        MeasuredCellFunction { partition, values }
    }

    /// The zero function on an empty partition.
    pub fn zero() -> Self {
        MeasuredCellFunction {
            partition: Partition { cells: Vec::new() },
            values: BTreeMap::new(),
        }
    }

    /// Builds a function from explicit cells. Zero-valued cells are dropped
    /// entirely; duplicate ids and nonpositive measures are rejected.
    pub fn from_cells(cells: impl IntoIterator<Item = (Cell<K::Real>, K)>) -> Result<Self> {
        let mut kept = Vec::new();
        let mut values = BTreeMap::new();
        for (cell, value) in cells {
            if value.is_zero() {
                continue;
            }
            values.insert(cell.id.clone(), value);
            kept.push(cell);
        }
        Ok(Self::assemble(Partition::new(kept)?, values))
    }

    /// Builds a function from disjoint half-open intervals.
    ///
    /// Rejects intervals with `a >= b` or non-finite endpoints
    /// ([`Error::EmptyInterval`]) and overlapping pairs
    /// ([`Error::OverlappingIntervals`]). Zero-valued intervals are dropped,
    /// and touching intervals with equal values are merged, so the stored
    /// grid is the coarsest one representing the function.
    pub fn from_intervals(spec: &IntervalSpec<K>) -> Result<Self> {
        for iv in &spec.intervals {
            if !iv.a.is_finite() || !iv.b.is_finite() || !(iv.a < iv.b) {
                return Err(Error::EmptyInterval(format!("[{},{})", iv.a, iv.b)));
            }
        }
        let mut sorted: Vec<&IntervalValue<K>> = spec.intervals.iter().collect();
        sorted.sort_by(|x, y| x.a.partial_cmp(&y.a).expect("finite endpoints"));
        for w in sorted.windows(2) {
            if w[1].a < w[0].b {
                return Err(Error::OverlappingIntervals(format!(
                    "[{},{}) and [{},{})",
                    w[0].a, w[0].b, w[1].a, w[1].b
                )));
            }
        }
        let mut merged: Vec<(K::Real, K::Real, K)> = Vec::new();
        for iv in sorted.into_iter().filter(|iv| !iv.value.is_zero()) {
            if let Some(last) = merged.last_mut() {
                if last.1 == iv.a && last.2 == iv.value {
                    last.1 = iv.b.clone();
                    continue;
                }
            }
            merged.push((iv.a.clone(), iv.b.clone(), iv.value.clone()));
        }
        Self::from_cells(
            merged
                .into_iter()
                .map(|(a, b, v)| (Cell::interval(a, b), v)),
        )
    }

    pub fn partition(&self) -> &Partition<K::Real> {
        &self.partition
    }

    pub fn value(&self, id: &CellId) -> Option<&K> {
        self.values.get(id)
    }

    pub fn is_zero_fn(&self) -> bool {
        self.values.is_empty()
    }

    /// Cells carrying a nonzero value, in id order, with their values.
    pub fn support(&self) -> impl Iterator<Item = (&Cell<K::Real>, &K)> {
        self.partition.cells.iter().filter_map(|c| self.values.get(&c.id).map(|v| (c, v)))
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// Total measure of the support.
    pub fn support_measure(&self) -> K::Real {
        self.support()
            .fold(<K::Real>::zero(), |acc, (c, _)| acc + c.measure.clone())
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        let values = self.values.iter().map(|(id, v)| (id.clone(), v.conj())).collect();
        Self::assemble(self.partition.clone(), values)
    }

    /// Pointwise scaling by a complex scalar.
    pub fn scale(&self, lambda: &K) -> Self {
        let values = self
            .values
            .iter()
            .map(|(id, v)| (id.clone(), lambda.clone() * v.clone()))
            .collect();
        Self::assemble(self.partition.clone(), values)
    }

    fn require_same_partition(&self, other: &Self, op: &str) -> Result<()> {
        if self.partition.same_cells(&other.partition) {
            Ok(())
        } else {
            Err(Error::IncompatiblePartitions(format!(
                "{op} requires both functions on one partition; refine first"
            )))
        }
    }

    /// Pointwise product `conj-free`: `(f * g)(x) = f(x) g(x)`. Both functions
    /// must already live on the same partition.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.require_same_partition(other, "pointwise_mul")?;
        let values = self
            .values
            .iter()
            .filter_map(|(id, v)| {
                other.values.get(id).map(|w| (id.clone(), v.clone() * w.clone()))
            })
            .collect();
        Ok(Self::assemble(self.partition.clone(), values))
    }

    /// Pointwise sum. Both functions must already live on the same partition.
    pub fn pointwise_add(&self, other: &Self) -> Result<Self> {
        self.require_same_partition(other, "pointwise_add")?;
        let mut values = self.values.clone();
        for (id, w) in &other.values {
            match values.entry(id.clone()) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(w.clone());
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let s = e.get().clone() + w.clone();
                    if s.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = s;
                    }
                }
            }
        }
        Ok(Self::assemble(self.partition.clone(), values))
    }

    /// Squared sup norm, `max |f(x)|^2`, exact in the exact tower.
    pub fn sup_norm_sq(&self) -> K::Real {
        self.values
            .values()
            .map(Scalar::abs_sq)
            .fold(<K::Real>::zero(), |acc, m| if m > acc { m } else { acc })
    }

    /// Sup norm as a double, `sqrt` of [`Self::sup_norm_sq`].
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_sq().to_f64().sqrt()
    }

    /// Squared L2 norm, `sum measure(c) |f(c)|^2`.
    pub fn l2_norm_sq(&self) -> K::Real {
        self.support().fold(<K::Real>::zero(), |acc, (c, v)| {
            acc + c.measure.clone() * v.abs_sq()
        })
    }

    /// `integral conj(f)^k g^k`, the k-th moment pairing. Requires `k >= 1`
    /// and a shared partition.
    pub fn moment(&self, other: &Self, k: u32) -> Result<K> {
        if k == 0 {
            return Err(Error::NonpositivePower);
        }
        self.require_same_partition(other, "moment")?;
        let mut acc = K::zero();
        for (cell, v) in self.support() {
            if let Some(w) = other.values.get(&cell.id) {
                let term = v.conj().powu(k) * w.clone().powu(k);
                acc = acc + term.mul_real(&cell.measure);
            }
        }
        Ok(acc)
    }

    /// `integral conj(f) g`, the L2 inner product (first moment).
    pub fn inner(&self, other: &Self) -> Result<K> {
        self.moment(other, 1)
    }

    /// `integral ln(1 - 4 conj(f) g)`, evaluated in doubles with the
    /// principal branch. Requires `4 ||f||_inf ||g||_inf < 1`, checked
    /// exactly as `16 sup|f|^2 sup|g|^2 < 1`.
    pub fn log_integral(&self, other: &Self) -> Result<C64> {
        self.require_same_partition(other, "log_integral")?;
        let bound = <K::Real>::from_u64(16) * self.sup_norm_sq() * other.sup_norm_sq();
        if !(bound < <K::Real>::one()) {
            return Err(Error::DomainViolation(
                "log integrand requires 4 sup|f| sup|g| < 1".into(),
            ));
        }
        let mut acc = C64::new(0.0, 0.0);
        for (cell, v) in self.support() {
            if let Some(w) = other.values.get(&cell.id) {
                let z = v.conj().to_c64() * w.to_c64();
                let arg = C64::new(1.0, 0.0) - C64::new(4.0, 0.0) * z;
                acc += arg.ln() * cell.measure.to_f64();
            }
        }
        Ok(acc)
    }

    /// The function multiplied by the indicator of the selected cells:
    /// values kept on `ids`, zero elsewhere, partition unchanged. Every id
    /// must name a cell of the partition.
    pub fn restrict_to(&self, ids: &std::collections::BTreeSet<CellId>) -> Result<Self> {
        for id in ids {
            self.partition.measure_of(id)?;
        }
        let values = self
            .values
            .iter()
            .filter(|(id, _)| ids.contains(*id))
            .map(|(id, v)| (id.clone(), v.clone()))
            .collect();
        Ok(Self::assemble(self.partition.clone(), values))
    }

    /// Total measure of the set where the two functions differ.
    pub fn measure_where_different(&self, other: &Self) -> Result<K::Real> {
        let (a, b) = Self::common_refinement(self, other)?;
        let mut total = <K::Real>::zero();
        for cell in a.partition.cells() {
            if a.values.get(&cell.id) != b.values.get(&cell.id) {
                total = total + cell.measure.clone();
            }
        }
        Ok(total)
    }

    /// Rewrites both functions onto one shared partition.
    ///
    /// If the partitions already agree cell-for-cell this is a no-op up to
    /// dropping cells where both vanish. Otherwise both functions must be
    /// fully interval-backed, and the shared grid is the coarsest interval
    /// grid refining both supports.
    pub fn common_refinement(f: &Self, g: &Self) -> Result<(Self, Self)> {
        let mut refined = Self::common_refinement_many(&[f, g])?;
        let b = refined.pop().expect("two results");
        let a = refined.pop().expect("two results");
        Ok((a, b))
    }

    /// N-way [`Self::common_refinement`].
    pub fn common_refinement_many(fns: &[&Self]) -> Result<Vec<Self>> {
        if fns.is_empty() {
            return Ok(Vec::new());
        }
        if fns.iter().all(|f| f.partition.same_cells(&fns[0].partition)) {
            let keep: Vec<Cell<K::Real>> = fns[0]
                .partition
                .cells
                .iter()
                .filter(|c| fns.iter().any(|f| f.values.contains_key(&c.id)))
                .cloned()
                .collect();
            let partition = Partition { cells: keep };
            return Ok(fns
                .iter()
                .map(|f| Self::assemble(partition.clone(), f.values.clone()))
                .collect());
        }
        if !fns.iter().all(|f| f.partition.fully_interval_backed()) {
            return Err(Error::IncompatiblePartitions(
                "cannot refine distinct partitions with abstract cells".into(),
            ));
        }

        let mut points: Vec<K::Real> = Vec::new();
        for f in fns {
            for (cell, _) in f.support() {
                let (a, b) = cell.span.clone().expect("interval-backed");
                points.push(a);
                points.push(b);
            }
        }
        points.sort_by(|x, y| x.partial_cmp(y).expect("finite endpoints"));
        points.dedup();

        let value_on = |f: &Self, x: &K::Real| -> Option<K> {
            f.support().find_map(|(cell, v)| {
                let (a, b) = cell.span.as_ref().expect("interval-backed");
                if a <= x && x < b { Some(v.clone()) } else { None }
            })
        };

        let mut cells = Vec::new();
        let mut value_maps: Vec<BTreeMap<CellId, K>> = vec![BTreeMap::new(); fns.len()];
        for w in points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let sampled: Vec<Option<K>> = fns.iter().map(|f| value_on(f, a)).collect();
            if sampled.iter().all(Option::is_none) {
                continue;
            }
            let cell = Cell::interval(a.clone(), b.clone());
            for (map, v) in value_maps.iter_mut().zip(sampled) {
                if let Some(v) = v {
                    map.insert(cell.id.clone(), v);
                }
            }
            cells.push(cell);
        }
        let partition = Partition::new(cells)?;
        Ok(value_maps
            .into_iter()
            .map(|values| Self::assemble(partition.clone(), values))
            .collect())
    }
}

impl<K: Scalar> MeasuredCellFunction<K> {
    /// Conversion into the float tower (identity for float functions).
    pub fn to_float(&self) -> MeasuredCellFunction<C64> {
        let cells = self
            .partition
            .cells
            .iter()
            .map(|c| Cell {
                id: c.id.clone(),
                measure: c.measure.to_f64(),
                span: c.span.as_ref().map(|(a, b)| (a.to_f64(), b.to_f64())),
            })
            .collect();
        let values = self
            .values
            .iter()
            .map(|(id, v)| (id.clone(), v.to_c64()))
            .collect();
        MeasuredCellFunction {
            partition: Partition { cells },
            values,
        }
    }
}
