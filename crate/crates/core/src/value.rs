//! Scalar values and column types.

use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Declared type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueType {
    Int64,
    Text,
    Date,
}

impl ValueType {
    pub fn parse(s: &str) -> Option<ValueType> {
        match s.to_ascii_lowercase().as_str() {
            "int64" => Some(ValueType::Int64),
            "text" => Some(ValueType::Text),
            "date" => Some(ValueType::Date),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Int64 => "int64",
            ValueType::Text => "text",
            ValueType::Date => "date",
        }
    }

    /// Width in bits of a value of this type inside an oblivious tuple.
    /// Text is stored as a fixed 16-byte field.
    pub fn bit_width(self) -> u64 {
        match self {
            ValueType::Int64 => 64,
            ValueType::Text => 128,
            ValueType::Date => 32,
        }
    }

    /// Type-correct placeholder carried by padding slots.
    pub fn placeholder(self) -> Value {
        match self {
            ValueType::Int64 => Value::Int(0),
            ValueType::Text => Value::Text(String::new()),
            ValueType::Date => Value::Date(0),
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A nullable scalar. Dates are days since 1970-01-01.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Null,
    Int(i64),
    Text(String),
    Date(i32),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn value_type(&self) -> Option<ValueType> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(ValueType::Int64),
            Value::Text(_) => Some(ValueType::Text),
            Value::Date(_) => Some(ValueType::Date),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Date(d) => Some(i64::from(*d)),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) => 1,
            Value::Date(_) => 2,
            Value::Text(_) => 3,
        }
    }

    /// Parses a CSV cell for a column of type `ty`. Empty cells are null.
    pub fn parse_typed(cell: &str, ty: ValueType) -> Option<Value> {
        if cell.is_empty() {
            return Some(Value::Null);
        }
        match ty {
            ValueType::Int64 => cell.trim().parse().ok().map(Value::Int),
            ValueType::Text => Some(Value::Text(cell.to_string())),
            ValueType::Date => parse_date(cell.trim()).map(Value::Date),
        }
    }

    /// Rendering used by CSV output; null renders as the empty string.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Date(d) => format_date(*d),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Int(v) => serde_json::Value::from(*v),
            Value::Text(s) => serde_json::Value::from(s.clone()),
            Value::Date(d) => serde_json::Value::from(format_date(*d)),
        }
    }
}

/// Total order used for sorting and grouping: null sorts before everything.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Value::Date(d) => write!(f, "DATE '{}'", format_date(*d)),
        }
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Parses `YYYY-MM-DD` into days since the epoch.
pub fn parse_date(s: &str) -> Option<i32> {
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    i32::try_from((d - epoch()).num_days()).ok()
}

pub fn format_date(days: i32) -> String {
    match epoch().checked_add_signed(chrono::Duration::days(i64::from(days))) {
        Some(d) => d.format("%Y-%m-%d").to_string(),
        None => days.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_round_trip_through_day_numbers() {
        assert_eq!(parse_date("1970-01-01"), Some(0));
        assert_eq!(parse_date("1970-01-16"), Some(15));
        let d = parse_date("2012-02-29").unwrap();
        assert_eq!(format_date(d), "2012-02-29");
        assert_eq!(parse_date("2012-13-01"), None);
    }

    #[test]
    fn null_orders_first() {
        let mut v = vec![Value::Int(3), Value::Null, Value::Int(-1)];
        v.sort();
        assert_eq!(v, vec![Value::Null, Value::Int(-1), Value::Int(3)]);
    }

    #[test]
    fn typed_cell_parsing() {
        assert_eq!(Value::parse_typed("", ValueType::Int64), Some(Value::Null));
        assert_eq!(Value::parse_typed("42", ValueType::Int64), Some(Value::Int(42)));
        assert_eq!(Value::parse_typed("abc", ValueType::Int64), None);
        assert_eq!(Value::parse_typed("abc", ValueType::Text), Some(Value::Text("abc".into())));
    }
}
