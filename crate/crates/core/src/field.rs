//! Program values: elements of the prime field `Z_p` with `p = 2^61 - 1`.
//!
//! Additive and multiplicative operations wrap modulo `p`. Comparisons and
//! division read representatives through the centered (signed) view, where
//! anything above `(p - 1) / 2` is negative.

use std::fmt;

/// The field modulus, the Mersenne prime `2^61 - 1`.
pub const MODULUS: u64 = (1 << 61) - 1;

const HALF: u64 = (MODULUS - 1) / 2;

/// A field element. The representative is always in `[0, MODULUS)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Value(u64);

impl Value {
    pub const ZERO: Value = Value(0);
    pub const ONE: Value = Value(1);

    /// Reduces an arbitrary `u64` into the field.
    pub fn new(raw: u64) -> Self {
        Value(raw % MODULUS)
    }

    pub fn from_i64(v: i64) -> Self {
        Value(i128::from(v).rem_euclid(i128::from(MODULUS)) as u64)
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Value::ONE
        } else {
            Value::ZERO
        }
    }

    pub fn representative(self) -> u64 {
        self.0
    }

    /// Centered interpretation in `[-(p-1)/2, (p-1)/2]`.
    pub fn to_signed(self) -> i64 {
        if self.0 > HALF {
            self.0 as i64 - MODULUS as i64
        } else {
            self.0 as i64
        }
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn signed_cmp(self, rhs: Value) -> std::cmp::Ordering {
        self.to_signed().cmp(&rhs.to_signed())
    }
}

impl std::ops::Add for Value {
    type Output = Value;

    fn add(self, rhs: Value) -> Value {
        let s = self.0 + rhs.0;
        Value(if s >= MODULUS { s - MODULUS } else { s })
    }
}

impl std::ops::Sub for Value {
    type Output = Value;

    fn sub(self, rhs: Value) -> Value {
        if self.0 >= rhs.0 {
            Value(self.0 - rhs.0)
        } else {
            Value(self.0 + MODULUS - rhs.0)
        }
    }
}

impl std::ops::Mul for Value {
    type Output = Value;

    fn mul(self, rhs: Value) -> Value {
        Value(((u128::from(self.0) * u128::from(rhs.0)) % u128::from(MODULUS)) as u64)
    }
}

/// Truncating division on the centered view. Division by zero yields zero.
impl std::ops::Div for Value {
    type Output = Value;

    fn div(self, rhs: Value) -> Value {
        let d = rhs.to_signed();
        if d == 0 {
            return Value::ZERO;
        }
        Value::from_i64(self.to_signed() / d)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Value({})", self.to_signed())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_signed())
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::from_i64(v)
    }
}
