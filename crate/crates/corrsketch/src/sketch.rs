//! Fixed-size correlation sketches and the sketch join.
//!
//! A sketch over a (key, value) column pair keeps the entries whose keys have
//! the `capacity` smallest unit hashes among all distinct keys, aggregating
//! repeated keys in a streaming pass. Two sketches built with the same hash
//! constants join on common key hashes, recovering an aligned value sample of
//! the post-join columns.

use std::collections::hash_map::Entry as MapEntry;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::hashing::{
    self, hash_key, selection_rank, unit_hash, KeyHash, UnitValue, HASH_ALGO_MURMUR3_X64_128_LO,
    UNIT_MULTIPLIER,
};
use crate::wire::{Reader, Writer};

const MAGIC: &[u8; 4] = b"CSKB";
/// Serialized sketch format version.
pub const FORMAT_VERSION: u16 = 1;

/// Per-key reduction applied to repeated keys during sketch construction.
///
/// `First` and `Last` depend on stream order; all others are
/// order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    First,
    Last,
    Sum,
    Max,
    Min,
    Mean,
    Count,
}

impl Aggregate {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Aggregate::First => 0,
            Aggregate::Last => 1,
            Aggregate::Sum => 2,
            Aggregate::Max => 3,
            Aggregate::Min => 4,
            Aggregate::Mean => 5,
            Aggregate::Count => 6,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Aggregate::First,
            1 => Aggregate::Last,
            2 => Aggregate::Sum,
            3 => Aggregate::Max,
            4 => Aggregate::Min,
            5 => Aggregate::Mean,
            6 => Aggregate::Count,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::First => "first",
            Aggregate::Last => "last",
            Aggregate::Sum => "sum",
            Aggregate::Max => "max",
            Aggregate::Min => "min",
            Aggregate::Mean => "mean",
            Aggregate::Count => "count",
        }
    }
}

impl std::str::FromStr for Aggregate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "first" => Aggregate::First,
            "last" => Aggregate::Last,
            "sum" => Aggregate::Sum,
            "max" => Aggregate::Max,
            "min" => Aggregate::Min,
            "mean" => Aggregate::Mean,
            "count" => Aggregate::Count,
            _ => return Err(format!("unknown aggregate function `{s}`")),
        })
    }
}

/// Minimum and maximum over every value streamed into the sketch, including
/// values whose keys were never retained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueRange {
    pub low: f64,
    pub high: f64,
}

impl ValueRange {
    /// Smallest range covering both operands.
    pub fn union(self, other: ValueRange) -> ValueRange {
        ValueRange {
            low: self.low.min(other.low),
            high: self.high.max(other.high),
        }
    }

    pub fn width(self) -> f64 {
        self.high - self.low
    }
}

/// One retained (key hash, aggregated value) tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SketchEntry {
    pub key_hash: KeyHash,
    /// Aggregated value for this key.
    pub value: f64,
    /// Number of input rows folded into `value`.
    pub count: u64,
}

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("sketch capacity must be at least 1")]
    ZeroCapacity,
    #[error("sketch is empty")]
    EmptySketch,
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("hash constant mismatch: algo {algo}, unit multiplier {multiplier:#x}")]
    HashConstants { algo: u8, multiplier: u64 },
    #[error("truncated input, {needed} more byte(s) required")]
    Truncated { needed: usize },
    #[error("trailing bytes after payload")]
    TrailingBytes,
    #[error("invalid field: {0}")]
    Invalid(&'static str),
}

/// An immutable fixed-size synopsis of one (key column, numeric column) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSketch {
    capacity: usize,
    aggregate: Aggregate,
    /// Sorted by ascending (unit hash, key hash).
    entries: Vec<SketchEntry>,
    value_range: Option<ValueRange>,
    distinct_seen: u64,
}

impl CorrelationSketch {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn aggregate(&self) -> Aggregate {
        self.aggregate
    }

    /// Entries in ascending unit-hash order (key hash breaks ties).
    pub fn entries(&self) -> &[SketchEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Range of every value streamed in, `None` for an empty sketch.
    pub fn value_range(&self) -> Option<ValueRange> {
        self.value_range
    }

    /// Number of distinct keys observed in the input stream.
    pub fn distinct_seen(&self) -> u64 {
        self.distinct_seen
    }

    /// True when every distinct input key is retained, i.e. the sketch is an
    /// exact representation and estimators can report exact statistics.
    pub fn is_exact(&self) -> bool {
        self.distinct_seen == self.entries.len() as u64
    }

    /// Largest retained unit hash, the `U(k)` of cardinality estimation.
    pub fn kth_unit(&self) -> Option<UnitValue> {
        self.entries.last().map(|e| unit_hash(e.key_hash))
    }

    /// Serializes to the versioned little-endian binary format.
    ///
    /// Layout: magic `CSKB`, version u16, hash algo u8, reserved u8, unit
    /// multiplier u64, capacity u64, aggregate tag u8, range flag u8,
    /// range low f64, range high f64, distinct_seen u64, entry count u64,
    /// then (key_hash u64, value f64, count u64) triples sorted by key hash.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u16(FORMAT_VERSION);
        w.u8(HASH_ALGO_MURMUR3_X64_128_LO);
        w.u8(0);
        w.u64(UNIT_MULTIPLIER);
        w.u64(self.capacity as u64);
        w.u8(self.aggregate.tag());
        w.u8(self.value_range.is_some() as u8);
        w.f64(self.value_range.map_or(0.0, |r| r.low));
        w.f64(self.value_range.map_or(0.0, |r| r.high));
        w.u64(self.distinct_seen);
        w.u64(self.entries.len() as u64);
        let mut by_key = self.entries.clone();
        by_key.sort_unstable_by_key(|e| e.key_hash);
        for e in &by_key {
            w.u64(e.key_hash.raw());
            w.f64(e.value);
            w.u64(e.count);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let sketch = Self::read(&mut r)?;
        r.finish()?;
        Ok(sketch)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        if r.bytes(4)? != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(DecodeError::UnsupportedVersion(version));
        }
        let algo = r.u8()?;
        r.u8()?;
        let multiplier = r.u64()?;
        if algo != HASH_ALGO_MURMUR3_X64_128_LO || multiplier != UNIT_MULTIPLIER {
            return Err(DecodeError::HashConstants { algo, multiplier });
        }
        let capacity = r.u64()?;
        if capacity == 0 {
            return Err(DecodeError::Invalid("capacity is zero"));
        }
        let aggregate = Aggregate::from_tag(r.u8()?)
            .ok_or(DecodeError::Invalid("unknown aggregate tag"))?;
        let has_range = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(DecodeError::Invalid("range flag")),
        };
        let low = r.f64()?;
        let high = r.f64()?;
        let value_range = if has_range {
            if !low.is_finite() || !high.is_finite() || low > high {
                return Err(DecodeError::Invalid("value range"));
            }
            Some(ValueRange { low, high })
        } else {
            None
        };
        let distinct_seen = r.u64()?;
        let entry_count = r.u64()?;
        if entry_count > capacity {
            return Err(DecodeError::Invalid("entry count exceeds capacity"));
        }
        if entry_count > distinct_seen {
            return Err(DecodeError::Invalid("entry count exceeds distinct_seen"));
        }
        if (entry_count > 0) != has_range {
            return Err(DecodeError::Invalid("range flag inconsistent with entries"));
        }
        let mut entries = Vec::with_capacity(entry_count as usize);
        let mut prev: Option<u64> = None;
        for _ in 0..entry_count {
            let kh = r.u64()?;
            if let Some(p) = prev {
                if kh <= p {
                    return Err(DecodeError::Invalid("entries not strictly sorted by key hash"));
                }
            }
            prev = Some(kh);
            let value = r.f64()?;
            let count = r.u64()?;
            if !value.is_finite() {
                return Err(DecodeError::Invalid("non-finite entry value"));
            }
            if count == 0 {
                return Err(DecodeError::Invalid("zero entry count"));
            }
            entries.push(SketchEntry {
                key_hash: KeyHash(kh),
                value,
                count,
            });
        }
        entries.sort_unstable_by_key(|e| selection_rank(e.key_hash));
        Ok(CorrelationSketch {
            capacity: capacity as usize,
            aggregate,
            entries,
            value_range,
            distinct_seen,
        })
    }

    /// JSON mirror of the binary format plus derived fields, for debugging.
    pub fn to_debug_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct DumpEntry {
            key_hash: u64,
            unit: f64,
            value: f64,
            count: u64,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            format_version: u16,
            hash_algo: u8,
            unit_multiplier: u64,
            capacity: usize,
            aggregate: &'a str,
            value_range: Option<ValueRange>,
            distinct_seen: u64,
            exact: bool,
            kth_unit: Option<f64>,
            entries: Vec<DumpEntry>,
        }
        let dump = Dump {
            format_version: FORMAT_VERSION,
            hash_algo: HASH_ALGO_MURMUR3_X64_128_LO,
            unit_multiplier: UNIT_MULTIPLIER,
            capacity: self.capacity,
            aggregate: self.aggregate.name(),
            value_range: self.value_range,
            distinct_seen: self.distinct_seen,
            exact: self.is_exact(),
            kth_unit: self.kth_unit().map(|u| u.value()),
            entries: self
                .entries
                .iter()
                .map(|e| DumpEntry {
                    key_hash: e.key_hash.raw(),
                    unit: unit_hash(e.key_hash).value(),
                    value: e.value,
                    count: e.count,
                })
                .collect(),
        };
        serde_json::to_value(dump).expect("sketch dump serializes")
    }
}

struct Accumulator {
    value: f64,
    count: u64,
}

/// Streaming single-pass sketch builder.
///
/// Maintains the retained set under a max-heap of selection ranks with an
/// auxiliary key map, O(log capacity) per distinct-key update.
pub struct SketchBuilder {
    capacity: usize,
    aggregate: Aggregate,
    retained: HashMap<KeyHash, Accumulator>,
    heap: BinaryHeap<(UnitValue, KeyHash)>,
    seen: std::collections::HashSet<KeyHash>,
    range: Option<ValueRange>,
    rows: u64,
}

impl SketchBuilder {
    pub fn new(capacity: usize, aggregate: Aggregate) -> Result<Self, SketchError> {
        if capacity == 0 {
            return Err(SketchError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            aggregate,
            retained: HashMap::with_capacity(capacity + 1),
            heap: BinaryHeap::with_capacity(capacity + 1),
            seen: std::collections::HashSet::new(),
            range: None,
            rows: 0,
        })
    }

    /// Feeds one row. `value` must be finite; filter and count non-finite
    /// rows upstream.
    pub fn push(&mut self, key: &[u8], value: f64) {
        debug_assert!(value.is_finite());
        self.push_hashed(hash_key(key), value);
    }

    /// Feeds one row whose key is already hashed.
    pub fn push_hashed(&mut self, kh: KeyHash, value: f64) {
        self.rows += 1;
        self.range = Some(match self.range {
            None => ValueRange { low: value, high: value },
            Some(r) => ValueRange {
                low: r.low.min(value),
                high: r.high.max(value),
            },
        });
        self.seen.insert(kh);

        match self.retained.entry(kh) {
            MapEntry::Occupied(mut slot) => {
                let acc = slot.get_mut();
                acc.count += 1;
                acc.value = match self.aggregate {
                    Aggregate::First => acc.value,
                    Aggregate::Last => value,
                    // Mean keeps a running sum, resolved in finish().
                    Aggregate::Sum | Aggregate::Mean => acc.value + value,
                    Aggregate::Max => acc.value.max(value),
                    Aggregate::Min => acc.value.min(value),
                    Aggregate::Count => acc.value,
                };
            }
            MapEntry::Vacant(slot) => {
                let rank = selection_rank(kh);
                if self.heap.len() < self.capacity {
                    slot.insert(Accumulator { value, count: 1 });
                    self.heap.push(rank);
                } else if rank < *self.heap.peek().expect("heap non-empty at capacity") {
                    slot.insert(Accumulator { value, count: 1 });
                    self.heap.push(rank);
                    let (_, evicted) = self.heap.pop().expect("heap non-empty");
                    self.retained.remove(&evicted);
                }
                // Once evicted or rejected, a key hash can never re-enter:
                // the heap maximum only decreases.
            }
        }
    }

    /// Total rows streamed in.
    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn finish(mut self) -> CorrelationSketch {
        let mut entries: Vec<SketchEntry> = self
            .retained
            .drain()
            .map(|(kh, acc)| {
                let value = match self.aggregate {
                    Aggregate::Mean => acc.value / acc.count as f64,
                    Aggregate::Count => acc.count as f64,
                    _ => acc.value,
                };
                SketchEntry {
                    key_hash: kh,
                    value,
                    count: acc.count,
                }
            })
            .collect();
        entries.sort_unstable_by_key(|e| selection_rank(e.key_hash));
        CorrelationSketch {
            capacity: self.capacity,
            aggregate: self.aggregate,
            entries,
            value_range: self.range,
            distinct_seen: self.seen.len() as u64,
        }
    }
}

/// Builds a sketch from a row stream in one pass.
pub fn build_sketch<K, I>(
    rows: I,
    capacity: usize,
    aggregate: Aggregate,
) -> Result<CorrelationSketch, SketchError>
where
    K: AsRef<[u8]>,
    I: IntoIterator<Item = (K, f64)>,
{
    let mut builder = SketchBuilder::new(capacity, aggregate)?;
    for (key, value) in rows {
        builder.push(key.as_ref(), value);
    }
    Ok(builder.finish())
}

/// Aligned numeric pairs recovered by joining two sketches on key hashes.
///
/// Pairs are ordered by ascending unit hash of their key, so the sample is
/// deterministic for fixed inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pairs: Vec<(f64, f64)>,
    keys: Vec<KeyHash>,
}

impl PairedSample {
    pub fn new(pairs: Vec<(f64, f64)>, keys: Vec<KeyHash>) -> Self {
        assert_eq!(pairs.len(), keys.len());
        Self { pairs, keys }
    }

    /// Builds a sample from bare pairs, for estimator use on non-sketch data.
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Self {
        let keys = (0..pairs.len() as u64).map(KeyHash).collect();
        Self { pairs, keys }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn keys(&self) -> &[KeyHash] {
        &self.keys
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.1)
    }
}

/// Joins two sketches on common key hashes.
///
/// Both entry lists are sorted by selection rank, so this is a linear merge;
/// the output inherits the ascending unit-hash order.
pub fn sketch_join(a: &CorrelationSketch, b: &CorrelationSketch) -> PairedSample {
    let (mut i, mut j) = (0, 0);
    let (ea, eb) = (a.entries(), b.entries());
    let mut pairs = Vec::new();
    let mut keys = Vec::new();
    while i < ea.len() && j < eb.len() {
        let ra = selection_rank(ea[i].key_hash);
        let rb = selection_rank(eb[j].key_hash);
        match ra.cmp(&rb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                pairs.push((ea[i].value, eb[j].value));
                keys.push(ea[i].key_hash);
                i += 1;
                j += 1;
            }
        }
    }
    PairedSample { pairs, keys }
}

/// Unit hash of a raw key, the composed selection function over key bytes.
pub fn key_unit(key: &[u8]) -> UnitValue {
    hashing::unit_hash(hash_key(key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const TABLE_X: &[(&str, f64)] = &[
        ("2021-01", 6.0),
        ("2021-02", 4.0),
        ("2021-03", 2.0),
        ("2021-04", 3.0),
        ("2021-05", 0.5),
        ("2021-06", 4.0),
        ("2021-07", 2.0),
    ];

    pub(crate) const TABLE_Y: &[(&str, f64)] = &[
        ("2021-01", 5.5),
        ("2021-01", 4.5),
        ("2021-02", 3.9),
        ("2021-02", 2.0),
        ("2021-03", 4.0),
        ("2021-03", 1.0),
        ("2021-04", 4.0),
    ];

    fn sketch_of(rows: &[(&str, f64)], capacity: usize, aggregate: Aggregate) -> CorrelationSketch {
        build_sketch(rows.iter().map(|&(k, v)| (k, v)), capacity, aggregate).unwrap()
    }

    fn entry_value(s: &CorrelationSketch, key: &str) -> Option<f64> {
        let kh = hash_key(key.as_bytes());
        s.entries().iter().find(|e| e.key_hash == kh).map(|e| e.value)
    }

    #[test]
    fn zero_capacity_rejected() {
        assert!(matches!(
            SketchBuilder::new(0, Aggregate::Mean),
            Err(SketchError::ZeroCapacity)
        ));
    }

    #[test]
    fn mean_aggregation_of_repeated_keys() {
        let s = sketch_of(TABLE_Y, 8, Aggregate::Mean);
        assert_eq!(s.len(), 4);
        assert_eq!(entry_value(&s, "2021-03"), Some(2.5));
        assert_eq!(entry_value(&s, "2021-01"), Some(5.0));
        assert_eq!(entry_value(&s, "2021-02"), Some(2.95));
        assert_eq!(entry_value(&s, "2021-04"), Some(4.0));
    }

    #[test]
    fn all_aggregates() {
        let rows = [("k", 3.0), ("k", 1.0), ("k", 2.0)];
        let cases = [
            (Aggregate::First, 3.0),
            (Aggregate::Last, 2.0),
            (Aggregate::Sum, 6.0),
            (Aggregate::Max, 3.0),
            (Aggregate::Min, 1.0),
            (Aggregate::Mean, 2.0),
            (Aggregate::Count, 3.0),
        ];
        for (agg, expected) in cases {
            let s = sketch_of(&rows, 4, agg);
            assert_eq!(entry_value(&s, "k"), Some(expected), "{agg:?}");
            assert_eq!(s.entries()[0].count, 3);
        }
    }

    #[test]
    fn exact_retention_below_capacity() {
        let s = sketch_of(TABLE_X, 16, Aggregate::Mean);
        assert_eq!(s.len(), 7);
        assert_eq!(s.distinct_seen(), 7);
        assert!(s.is_exact());
    }

    #[test]
    fn retains_smallest_unit_hashes() {
        // Brute-force oracle: rank all 7 distinct keys by (unit, key hash)
        // and keep the smallest 3.
        let mut ranked: Vec<(&str, (UnitValue, KeyHash))> = TABLE_X
            .iter()
            .map(|&(k, _)| (k, selection_rank(hash_key(k.as_bytes()))))
            .collect();
        ranked.sort_by_key(|&(_, rank)| rank);
        let expected: Vec<KeyHash> = ranked[..3].iter().map(|&(k, _)| hash_key(k.as_bytes())).collect();

        let s = sketch_of(TABLE_X, 3, Aggregate::Mean);
        let got: Vec<KeyHash> = s.entries().iter().map(|e| e.key_hash).collect();
        assert_eq!(got, expected);
        assert!(!s.is_exact());
        assert_eq!(s.distinct_seen(), 7);
        assert_eq!(s.kth_unit(), Some(unit_hash(expected[2])));
    }

    #[test]
    fn value_range_covers_evicted_values() {
        let s = sketch_of(TABLE_X, 2, Aggregate::Mean);
        let r = s.value_range().unwrap();
        assert_eq!(r.low, 0.5);
        assert_eq!(r.high, 6.0);
    }

    #[test]
    fn empty_stream() {
        let s = build_sketch(std::iter::empty::<(&[u8], f64)>(), 4, Aggregate::Mean).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.value_range(), None);
        assert_eq!(s.kth_unit(), None);
        assert!(s.is_exact());
    }

    #[test]
    fn join_matches_figure_worked_example() {
        // With these hash constants, capacity 4 on the seven keys of TABLE_X
        // retains 2021-01/02/03/07; joined with the four distinct keys of
        // TABLE_Y this yields the aggregated pairs for 2021-01/02/03.
        let sx = sketch_of(TABLE_X, 4, Aggregate::Mean);
        let sy = sketch_of(TABLE_Y, 4, Aggregate::Mean);
        let joined = sketch_join(&sx, &sy);
        let mut by_key: Vec<(KeyHash, (f64, f64))> = joined
            .keys()
            .iter()
            .copied()
            .zip(joined.pairs().iter().copied())
            .collect();
        by_key.sort_by_key(|&(kh, _)| kh);
        let mut expected = vec![
            (hash_key(b"2021-01"), (6.0, 5.0)),
            (hash_key(b"2021-02"), (4.0, 2.95)),
            (hash_key(b"2021-03"), (2.0, 2.5)),
        ];
        expected.sort_by_key(|&(kh, _)| kh);
        assert_eq!(by_key, expected);
    }

    #[test]
    fn self_join_is_identity() {
        let s = sketch_of(TABLE_X, 3, Aggregate::Mean);
        let joined = sketch_join(&s, &s);
        assert_eq!(joined.len(), 3);
        assert!(joined.pairs().iter().all(|&(x, y)| x == y));
    }

    #[test]
    fn disjoint_join_is_empty() {
        let a = build_sketch([("a", 1.0), ("b", 2.0)], 4, Aggregate::Mean).unwrap();
        let b = build_sketch([("c", 1.0), ("d", 2.0)], 4, Aggregate::Mean).unwrap();
        assert!(sketch_join(&a, &b).is_empty());
    }

    #[test]
    fn join_order_is_ascending_unit_hash() {
        let sx = sketch_of(TABLE_X, 7, Aggregate::Mean);
        let sy = sketch_of(TABLE_Y, 4, Aggregate::Mean);
        let joined = sketch_join(&sx, &sy);
        assert_eq!(joined.len(), 4);
        let units: Vec<UnitValue> = joined.keys().iter().map(|&k| unit_hash(k)).collect();
        assert!(units.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn round_trip() {
        let s = sketch_of(TABLE_Y, 3, Aggregate::Mean);
        let bytes = s.to_bytes();
        let back = CorrelationSketch::from_bytes(&bytes).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn round_trip_empty() {
        let s = build_sketch(std::iter::empty::<(&[u8], f64)>(), 4, Aggregate::Mean).unwrap();
        let back = CorrelationSketch::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.len(), 0);
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = sketch_of(TABLE_Y, 3, Aggregate::Mean).to_bytes();
        for cut in [bytes.len() - 1, bytes.len() / 2, 3, 0] {
            assert!(
                CorrelationSketch::from_bytes(&bytes[..cut]).is_err(),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn trailing_bytes_are_an_error() {
        let mut bytes = sketch_of(TABLE_Y, 3, Aggregate::Mean).to_bytes();
        bytes.push(0);
        assert!(matches!(
            CorrelationSketch::from_bytes(&bytes),
            Err(DecodeError::TrailingBytes)
        ));
    }

    #[test]
    fn bad_magic_is_an_error() {
        let mut bytes = sketch_of(TABLE_Y, 3, Aggregate::Mean).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            CorrelationSketch::from_bytes(&bytes),
            Err(DecodeError::BadMagic)
        ));
    }

    #[test]
    fn debug_dump_mirrors_fields() {
        let s = sketch_of(TABLE_Y, 3, Aggregate::Mean);
        let dump = s.to_debug_json();
        assert_eq!(dump["capacity"], 3);
        assert_eq!(dump["aggregate"], "mean");
        assert_eq!(dump["distinct_seen"], 4);
        assert_eq!(dump["entries"].as_array().unwrap().len(), 3);
    }

    prop_compose! {
        fn arb_rows()(rows in proptest::collection::vec((0u32..64, -100i32..100), 0..200)) -> Vec<(String, f64)> {
            rows.into_iter().map(|(k, v)| (format!("key-{k}"), v as f64)).collect()
        }
    }

    proptest! {
        /// Permuting input rows changes nothing for order-independent
        /// aggregates (values are integers, so sums are exact).
        #[test]
        fn stream_order_independence(rows in arb_rows(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            for aggregate in [Aggregate::Sum, Aggregate::Max, Aggregate::Min, Aggregate::Mean, Aggregate::Count] {
                let base = build_sketch(rows.iter().map(|(k, v)| (k.as_bytes(), *v)), 16, aggregate).unwrap();
                let mut shuffled = rows.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha12Rng::seed_from_u64(seed));
                let permuted = build_sketch(shuffled.iter().map(|(k, v)| (k.as_bytes(), *v)), 16, aggregate).unwrap();
                prop_assert_eq!(&base, &permuted);
            }
        }

        /// Join keys equal the m smallest composed-hash values of the key
        /// intersection, per the brute-force oracle.
        #[test]
        fn join_keys_are_smallest_common_units(
            xs in proptest::collection::hash_set(0u32..500, 1..120),
            ys in proptest::collection::hash_set(0u32..500, 1..120),
            cap in 1usize..64,
        ) {
            let a = build_sketch(xs.iter().map(|k| (format!("k{k}"), *k as f64)), cap, Aggregate::Mean).unwrap();
            let b = build_sketch(ys.iter().map(|k| (format!("k{k}"), *k as f64)), cap, Aggregate::Mean).unwrap();
            let joined = sketch_join(&a, &b);

            let mut common: Vec<KeyHash> = xs
                .intersection(&ys)
                .map(|k| hash_key(format!("k{k}").as_bytes()))
                .collect();
            common.sort_by_key(|&kh| selection_rank(kh));
            let expected: Vec<KeyHash> = common.into_iter().take(joined.len()).collect();
            prop_assert_eq!(joined.keys().to_vec(), expected);
        }

        /// Round trip is the identity for arbitrary inputs.
        #[test]
        fn round_trip_arbitrary(rows in arb_rows(), cap in 1usize..32) {
            let s = build_sketch(rows.iter().map(|(k, v)| (k.as_bytes(), *v)), cap, Aggregate::Mean).unwrap();
            let back = CorrelationSketch::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(s, back);
        }
    }
}
