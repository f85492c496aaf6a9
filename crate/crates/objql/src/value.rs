//! Universal value domain shared by every operator.
//!
//! A [`Value`] is a schema-free object: a primitive, a list, a set, or a
//! string/int-keyed map. Deep equality, a total order, and a canonical byte
//! encoding are defined here; join, group_by, unique and order_by are all
//! built on top of them.
//!
//! Equality decisions that matter downstream:
//! - numeric equality crosses `Int`/`Float` exactly (`1 == 1.0`),
//! - `NaN == NaN` and `-0.0 == 0.0` (dedup needs a reflexive equality),
//! - sets and maps compare order-insensitively.

use std::cmp::Ordering;
use std::fmt;

/// Key of a map entry. Restricted to text and integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapKey {
    Int(i64),
    Text(String),
}

impl fmt::Display for MapKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKey::Int(i) => write!(f, "{i}"),
            MapKey::Text(s) => write!(f, "{s:?}"),
        }
    }
}

/// A schema-free object.
///
/// `Set` elements are kept sorted by [`Value::compare`] and deduplicated;
/// `Map` entries are kept sorted by key with unique keys. Constructors
/// [`Value::set`] and [`Value::map`] establish those invariants.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<Value>),
    Set(Vec<Value>),
    Map(Vec<(MapKey, Value)>),
}

impl Value {
    /// Builds a set: sorts by `compare` and drops duplicates (first kept).
    pub fn set(mut items: Vec<Value>) -> Value {
        items.sort_by(Value::compare);
        items.dedup_by(|a, b| a.equals(b));
        Value::Set(items)
    }

    /// Builds a map: sorts by key; on duplicate keys the last entry wins.
    pub fn map(entries: Vec<(MapKey, Value)>) -> Value {
        let mut out: Vec<(MapKey, Value)> = Vec::with_capacity(entries.len());
        for (k, v) in entries {
            match out.iter_mut().find(|(ek, _)| *ek == k) {
                Some(slot) => slot.1 = v,
                None => out.push((k, v)),
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Value::Map(out)
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    /// Map field lookup by text key.
    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Map(entries) => entries
                .iter()
                .find(|(k, _)| matches!(k, MapKey::Text(t) if t == name))
                .map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(xs) => Some(xs),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn type_rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Bool(_) => 1,
            Value::Int(_) | Value::Float(_) => 2,
            Value::Text(_) => 3,
            Value::List(_) => 4,
            Value::Set(_) => 5,
            Value::Map(_) => 6,
        }
    }

    /// Deep structural equality. See the module docs for the numeric and
    /// NaN conventions.
    pub fn equals(&self, other: &Value) -> bool {
        self.compare(other) == Ordering::Equal
    }

    /// Total order over all values.
    ///
    /// Type ranks: Null < Bool < Numeric < Text < List < Set < Map.
    /// Within numerics the comparison is exact mathematical order with NaN
    /// greatest. Lists compare lexicographically; sets as sorted element
    /// lists; maps as key-sorted entry lists.
    pub fn compare(&self, other: &Value) -> Ordering {
        let (ra, rb) = (self.type_rank(), other.type_rank());
        if ra != rb {
            return ra.cmp(&rb);
        }
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Int(a), Value::Float(b)) => cmp_int_float(*a, *b),
            (Value::Float(a), Value::Int(b)) => cmp_int_float(*b, *a).reverse(),
            (Value::Float(a), Value::Float(b)) => cmp_float_total(*a, *b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::List(a), Value::List(b))
            | (Value::Set(a), Value::Set(b)) => cmp_slices(a, b),
            (Value::Map(a), Value::Map(b)) => {
                for ((ka, va), (kb, vb)) in a.iter().zip(b.iter()) {
                    match ka.cmp(kb) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                    match va.compare(vb) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => unreachable!("type ranks matched"),
        }
    }

    /// Canonical byte encoding; injective up to [`Value::equals`].
    ///
    /// Floats with an exact 64-bit integer value encode under the Int tag,
    /// all NaNs collapse to one bit pattern, and `-0.0` encodes as `0.0`,
    /// so equal values always produce equal bytes.
    pub fn canonical_encode(&self) -> CanonicalKey {
        let mut bytes = Vec::new();
        self.encode_into(&mut bytes);
        CanonicalKey(bytes)
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Value::Null => out.push(b'N'),
            Value::Bool(b) => {
                out.push(b'B');
                out.push(*b as u8);
            }
            Value::Int(i) => encode_int(*i, out),
            Value::Float(f) => {
                if let Some(i) = float_as_exact_int(*f) {
                    encode_int(i, out);
                } else {
                    out.push(b'F');
                    let canon = if f.is_nan() {
                        f64::from_bits(0x7ff8_0000_0000_0000)
                    } else if *f == 0.0 {
                        0.0
                    } else {
                        *f
                    };
                    out.extend_from_slice(&canon.to_bits().to_be_bytes());
                }
            }
            Value::Text(s) => {
                out.push(b'S');
                out.extend_from_slice(&(s.len() as u64).to_be_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            Value::List(xs) => encode_seq(b'L', xs, out),
            Value::Set(xs) => encode_seq(b'E', xs, out),
            Value::Map(entries) => {
                out.push(b'M');
                out.extend_from_slice(&(entries.len() as u64).to_be_bytes());
                for (k, v) in entries {
                    match k {
                        MapKey::Int(i) => encode_int(*i, out),
                        MapKey::Text(s) => {
                            out.push(b'S');
                            out.extend_from_slice(&(s.len() as u64).to_be_bytes());
                            out.extend_from_slice(s.as_bytes());
                        }
                    }
                    v.encode_into(out);
                }
            }
        }
    }
}

fn encode_int(i: i64, out: &mut Vec<u8>) {
    out.push(b'I');
    out.extend_from_slice(&i.to_be_bytes());
}

fn encode_seq(tag: u8, xs: &[Value], out: &mut Vec<u8>) {
    out.push(tag);
    out.extend_from_slice(&(xs.len() as u64).to_be_bytes());
    for x in xs {
        x.encode_into(out);
    }
}

fn cmp_slices(a: &[Value], b: &[Value]) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.compare(y) {
            Ordering::Equal => {}
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

/// Total order on floats: NaN is greatest (all NaNs equal), -0.0 == 0.0.
fn cmp_float_total(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => a.partial_cmp(&b).unwrap(),
    }
}

const TWO_POW_63: f64 = 9_223_372_036_854_775_808.0;

/// Exact mathematical comparison of an i64 against an f64.
fn cmp_int_float(a: i64, b: f64) -> Ordering {
    if b.is_nan() {
        return Ordering::Less; // NaN greatest among numerics
    }
    if b >= TWO_POW_63 {
        return Ordering::Less;
    }
    if b < -TWO_POW_63 {
        return Ordering::Greater;
    }
    // b is finite and its truncation fits in i64.
    let t = b.trunc() as i64;
    match a.cmp(&t) {
        Ordering::Equal => {
            if b > t as f64 {
                Ordering::Less
            } else if b < t as f64 {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        }
        ord => ord,
    }
}

/// Some(i) iff f is mathematically equal to the 64-bit integer i.
fn float_as_exact_int(f: f64) -> Option<i64> {
    if f.is_finite() && f == f.trunc() && (-TWO_POW_63..TWO_POW_63).contains(&f) {
        Some(f as i64)
    } else {
        None
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.equals(other)
    }
}
impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.compare(other))
    }
}
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        self.compare(other)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if x.is_nan() {
                    write!(f, "nan")
                } else if x.is_infinite() {
                    write!(f, "{}inf", if *x < 0.0 { "-" } else { "+" })
                } else if *x == x.trunc() && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Value::Text(s) => write!(f, "{s:?}"),
            Value::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Value::Set(xs) => {
                write!(f, "{{")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
            Value::Map(entries) => {
                write!(f, "{{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}
impl From<Vec<Value>> for Value {
    fn from(v: Vec<Value>) -> Self {
        Value::List(v)
    }
}

/// Canonical byte encoding of a value, usable as a hash-map key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalKey(pub Vec<u8>);

/// An ordered sequence of values. Row order is significant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub rows: Vec<Value>,
}

impl Table {
    pub fn new(rows: Vec<Value>) -> Table {
        Table { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl FromIterator<Value> for Table {
    fn from_iter<T: IntoIterator<Item = Value>>(iter: T) -> Self {
        Table::new(iter.into_iter().collect())
    }
}

/// Convenience for building map rows in tests and generators.
#[macro_export]
macro_rules! row {
    ($($k:ident : $v:expr),* $(,)?) => {
        $crate::value::Value::map(vec![
            $(($crate::value::MapKey::Text(stringify!($k).to_string()), $crate::value::Value::from($v)),)*
        ])
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(i: i64) -> Value {
        Value::Int(i)
    }

    #[test]
    fn map_entry_order_irrelevant() {
        let a = Value::map(vec![
            (MapKey::Text("a".into()), int(1)),
            (MapKey::Text("b".into()), int(2)),
        ]);
        let b = Value::map(vec![
            (MapKey::Text("b".into()), int(2)),
            (MapKey::Text("a".into()), int(1)),
        ]);
        assert!(a.equals(&b));
    }

    #[test]
    fn cross_numeric_equality() {
        assert!(int(1).equals(&Value::Float(1.0)));
        assert!(!int(1).equals(&Value::Text("1".into())));
    }

    #[test]
    fn nan_and_negative_zero() {
        assert!(Value::Float(f64::NAN).equals(&Value::Float(f64::NAN)));
        assert!(Value::Float(-0.0).equals(&Value::Float(0.0)));
    }

    #[test]
    fn compare_examples() {
        assert_eq!(int(2).compare(&Value::Float(2.5)), Ordering::Less);
        assert_eq!(
            Value::Text("a".into()).compare(&int(100)),
            Ordering::Greater
        );
        let a = Value::List(vec![int(1), int(2)]);
        let b = Value::List(vec![int(1), int(2), int(0)]);
        assert_eq!(a.compare(&b), Ordering::Less);
    }

    #[test]
    fn nan_greatest_among_numerics() {
        assert_eq!(
            Value::Float(f64::NAN).compare(&Value::Float(f64::INFINITY)),
            Ordering::Greater
        );
        assert_eq!(int(i64::MAX).compare(&Value::Float(f64::NAN)), Ordering::Less);
    }

    #[test]
    fn exact_int_float_comparison_near_i64_bounds() {
        // 2^63 as f64 is exactly 9223372036854775808, greater than i64::MAX.
        assert_eq!(int(i64::MAX).compare(&Value::Float(TWO_POW_63)), Ordering::Less);
        assert_eq!(int(i64::MIN).compare(&Value::Float(-TWO_POW_63)), Ordering::Equal);
        assert_eq!(int(-3).compare(&Value::Float(-2.5)), Ordering::Less);
        assert_eq!(int(-2).compare(&Value::Float(-2.5)), Ordering::Greater);
    }

    #[test]
    fn encode_canonicalization() {
        assert_eq!(
            Value::Float(0.0).canonical_encode(),
            Value::Float(-0.0).canonical_encode()
        );
        assert_eq!(
            Value::set(vec![int(1), int(2)]).canonical_encode(),
            Value::set(vec![int(2), int(1)]).canonical_encode()
        );
        assert_eq!(int(1).canonical_encode(), Value::Float(1.0).canonical_encode());
        assert_ne!(
            int(1).canonical_encode(),
            Value::Text("1".into()).canonical_encode()
        );
        assert_eq!(
            Value::Float(f64::NAN).canonical_encode(),
            Value::Float(-f64::NAN).canonical_encode()
        );
    }

    #[test]
    fn set_dedups_cross_numeric() {
        let s = Value::set(vec![int(1), Value::Float(1.0), int(2)]);
        match s {
            Value::Set(xs) => assert_eq!(xs.len(), 2),
            _ => unreachable!(),
        }
    }

    #[test]
    fn map_duplicate_key_last_wins() {
        let m = Value::map(vec![
            (MapKey::Text("a".into()), int(1)),
            (MapKey::Text("a".into()), int(2)),
        ]);
        assert_eq!(m.field("a"), Some(&int(2)));
    }
}
