//! Points in evaluation/potency/activity space and the 9-slot event state.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::Scalar;

/// Conventional bound of the EPA rating scale.
pub const EPA_LIMIT: f64 = 4.3;

#[derive(Debug, Error, PartialEq)]
pub enum EpaError {
    #[error("non-finite EPA component {component} = {value}")]
    NonFinite { component: &'static str, value: f64 },
    #[error("state vector must have 9 entries, got {0}")]
    StateLength(usize),
}

/// A point in 3-D affective space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpaVector<T> {
    pub e: T,
    pub p: T,
    pub a: T,
}

impl<T: Scalar> EpaVector<T> {
    pub const fn new(e: T, p: T, a: T) -> Self {
        Self { e, p, a }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(v: [T; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.e, self.p, self.a]
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.e.as_f64(), self.p.as_f64(), self.a.as_f64()]
    }

    /// Converts between scalar types.
    pub fn cast<U: Scalar>(self) -> EpaVector<U> {
        EpaVector::from_f64(self.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.e.is_finite() && self.p.is_finite() && self.a.is_finite()
    }

    pub fn dot(self, other: Self) -> T {
        self.e * other.e + self.p * other.p + self.a * other.a
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Unweighted Euclidean distance.
    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.e * s, self.p * s, self.a * s)
    }
}

impl<T: Scalar> Add for EpaVector<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.e + rhs.e, self.p + rhs.p, self.a + rhs.a)
    }
}

impl<T: Scalar> Sub for EpaVector<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.e - rhs.e, self.p - rhs.p, self.a - rhs.a)
    }
}

impl<T: Scalar> Mul<T> for EpaVector<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Scalar> Index<usize> for EpaVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.e,
            1 => &self.p,
            2 => &self.a,
            _ => panic!("EPA index {i} out of range"),
        }
    }
}

impl<T: Scalar> IndexMut<usize> for EpaVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.e,
            1 => &mut self.p,
            2 => &mut self.a,
            _ => panic!("EPA index {i} out of range"),
        }
    }
}

impl<T: Scalar> fmt::Display for EpaVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.2}, {:.2}, {:.2}]", self.e, self.p, self.a)
    }
}

// EPA values travel as `[e, p, a]` everywhere.
impl<T: Scalar> Serialize for EpaVector<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_f64().serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for EpaVector<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        Ok(Self::from_f64(v))
    }
}

/// Result of [`validate_epa`]: the clamped vector plus whether clamping happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedEpa<T> {
    pub epa: EpaVector<T>,
    pub clamped: bool,
}

/// Checks finiteness and clamps every component into `[-4.3, 4.3]`.
pub fn validate_epa<T: Scalar>(raw: [T; 3]) -> Result<ValidatedEpa<T>, EpaError> {
    const NAMES: [&str; 3] = ["e", "p", "a"];
    let limit = T::lit(EPA_LIMIT);
    let mut out = [T::zero(); 3];
    let mut clamped = false;
    for (i, &v) in raw.iter().enumerate() {
        if !v.is_finite() {
            return Err(EpaError::NonFinite {
                component: NAMES[i],
                value: v.as_f64(),
            });
        }
        let c = v.max(-limit).min(limit);
        clamped |= c != v;
        out[i] = c;
    }
    Ok(ValidatedEpa {
        epa: EpaVector::from_array(out),
        clamped,
    })
}

/// Slot order of an actor-behavior-object state.
pub const SLOT_NAMES: [&str; 9] = ["Ae", "Ap", "Aa", "Be", "Bp", "Ba", "Oe", "Op", "Oa"];
pub const ACTOR_SLOTS: std::ops::Range<usize> = 0..3;
pub const BEHAVIOR_SLOTS: std::ops::Range<usize> = 3..6;
pub const OBJECT_SLOTS: std::ops::Range<usize> = 6..9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Fundamental,
    Transient,
}

/// Concatenated actor, behavior and object EPAs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector9<T> {
    pub values: [T; 9],
    pub role: Role,
}

impl<T: Scalar> StateVector9<T> {
    pub fn new(values: [T; 9], role: Role) -> Self {
        Self { values, role }
    }

    pub fn from_slice(values: &[T], role: Role) -> Result<Self, EpaError> {
        let values: [T; 9] = values
            .try_into()
            .map_err(|_| EpaError::StateLength(values.len()))?;
        Ok(Self { values, role })
    }

    pub fn from_parts(
        actor: EpaVector<T>,
        behavior: EpaVector<T>,
        object: EpaVector<T>,
        role: Role,
    ) -> Self {
        let mut values = [T::zero(); 9];
        values[ACTOR_SLOTS].copy_from_slice(&actor.to_array());
        values[BEHAVIOR_SLOTS].copy_from_slice(&behavior.to_array());
        values[OBJECT_SLOTS].copy_from_slice(&object.to_array());
        Self { values, role }
    }

    fn part(&self, range: std::ops::Range<usize>) -> EpaVector<T> {
        EpaVector::new(
            self.values[range.start],
            self.values[range.start + 1],
            self.values[range.start + 2],
        )
    }

    pub fn actor(&self) -> EpaVector<T> {
        self.part(ACTOR_SLOTS)
    }

    pub fn behavior(&self) -> EpaVector<T> {
        self.part(BEHAVIOR_SLOTS)
    }

    pub fn object(&self) -> EpaVector<T> {
        self.part(OBJECT_SLOTS)
    }

    pub fn with_behavior(mut self, b: EpaVector<T>) -> Self {
        self.values[BEHAVIOR_SLOTS].copy_from_slice(&b.to_array());
        self
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> Index<usize> for StateVector9<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}
