use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ActError;
use crate::epa::{Role, StateVector9, SLOT_NAMES};
use crate::Scalar;

/// One polynomial feature: the product of the listed pre-event state slots.
/// An empty factor list is the intercept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermSpec {
    factors: Vec<usize>,
}

impl TermSpec {
    pub fn new(factors: impl Into<Vec<usize>>) -> Result<Self, ActError> {
        let factors = factors.into();
        for (i, &f) in factors.iter().enumerate() {
            if f >= 9 {
                return Err(ActError::Parse {
                    location: String::new(),
                    message: format!("factor index {f} out of range 0..9"),
                });
            }
            if factors[..i].contains(&f) {
                return Err(ActError::Parse {
                    location: String::new(),
                    message: format!("factor index {f} repeated within a term"),
                });
            }
        }
        Ok(Self { factors })
    }

    pub fn intercept() -> Self {
        Self { factors: vec![] }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn behavior_factors(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.iter().copied().filter(|f| (3..6).contains(f))
    }

    pub fn evaluate<T: Scalar>(&self, state: &[T; 9]) -> T {
        self.factors.iter().fold(T::one(), |acc, &j| acc * state[j])
    }

    pub fn name(&self) -> String {
        if self.factors.is_empty() {
            "1".to_string()
        } else {
            self.factors
                .iter()
                .map(|&j| SLOT_NAMES[j])
                .collect::<Vec<_>>()
                .join("*")
        }
    }
}

/// Impression-formation equations: `tau' = M * g(state)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpressionModel<T> {
    pub name: String,
    pub provenance: String,
    terms: Vec<TermSpec>,
    /// Row-major 9 x T.
    coefficients: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct EquationFile {
    name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    provenance: String,
    slots: Vec<String>,
    terms: Vec<Vec<Value>>,
    coefficients: Vec<Vec<Value>>,
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> ActError {
    ActError::Parse {
        location: location.into(),
        message: message.into(),
    }
}

impl<T: Scalar> ImpressionModel<T> {
    /// Builds a model from terms and 9 coefficient rows of length `terms.len()`.
    pub fn new(
        name: impl Into<String>,
        terms: Vec<TermSpec>,
        rows: Vec<Vec<T>>,
    ) -> Result<Self, ActError> {
        if rows.len() != 9 {
            return Err(parse_err(
                "coefficients",
                format!("expected 9 rows, found {}", rows.len()),
            ));
        }
        let mut coefficients = Vec::with_capacity(9 * terms.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != terms.len() {
                return Err(parse_err(
                    format!("coefficients[{r}]"),
                    format!("expected {} columns, found {}", terms.len(), row.len()),
                ));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(parse_err(
                    format!("coefficients[{r}][{c}]"),
                    "non-finite coefficient",
                ));
            }
            coefficients.extend_from_slice(row);
        }
        Ok(Self {
            name: name.into(),
            provenance: String::new(),
            terms,
            coefficients,
        })
    }

    /// `tau' = pre-event state`: nine linear terms with an identity matrix.
    pub fn identity() -> Self {
        let terms = (0..9).map(|i| TermSpec { factors: vec![i] }).collect();
        let rows = (0..9)
            .map(|r| {
                (0..9)
                    .map(|c| if r == c { T::one() } else { T::zero() })
                    .collect()
            })
            .collect();
        Self::new("identity", terms, rows).expect("identity model is well formed")
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, row: usize, term: usize) -> T {
        self.coefficients[row * self.terms.len() + term]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let t = self.terms.len();
        &self.coefficients[row * t..(row + 1) * t]
    }

    /// Returns a copy with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|&c| c * s).collect(),
            ..self.clone()
        }
    }

    /// True when every term has at most one behavior factor, i.e. the
    /// transient impressions are affine in the behavior EPA.
    pub fn is_affine_in_behavior(&self) -> bool {
        self.terms.iter().all(|t| t.behavior_factors().count() <= 1)
    }

    pub fn feature_vector(&self, state: &StateVector9<T>) -> Vec<T> {
        self.terms
            .iter()
            .map(|t| t.evaluate(&state.values))
            .collect()
    }

    /// Applies the equations to a pre-event state.
    pub fn form_impression(&self, pre_state: &StateVector9<T>) -> StateVector9<T> {
        let g = self.feature_vector(pre_state);
        let mut out = [T::zero(); 9];
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = self
                .row(r)
                .iter()
                .zip(&g)
                .fold(T::zero(), |acc, (&m, &x)| acc + m * x);
        }
        StateVector9::new(out, Role::Transient)
    }

    /// Parses the JSON equation format.
    pub fn parse<R: Read>(source: R) -> Result<Self, ActError> {
        let file: EquationFile = serde_json::from_reader(source)
            .map_err(|e| parse_err(format!("line {}", e.line()), e.to_string()))?;
        if file.slots.len() != 9 || file.slots.iter().zip(SLOT_NAMES).any(|(a, b)| a != b) {
            return Err(parse_err("slots", format!("expected {:?}", SLOT_NAMES)));
        }
        let mut terms = Vec::with_capacity(file.terms.len());
        for (t, raw) in file.terms.iter().enumerate() {
            let mut factors = Vec::with_capacity(raw.len());
            for (k, v) in raw.iter().enumerate() {
                let idx = v.as_u64().ok_or_else(|| {
                    parse_err(
                        format!("terms[{t}][{k}]"),
                        format!("factor {v} is not an index"),
                    )
                })?;
                factors.push(idx as usize);
            }
            terms.push(TermSpec::new(factors).map_err(|e| match e {
                ActError::Parse { message, .. } => parse_err(format!("terms[{t}]"), message),
                other => other,
            })?);
        }
        let mut rows = Vec::with_capacity(file.coefficients.len());
        for (r, raw) in file.coefficients.iter().enumerate() {
            let mut row = Vec::with_capacity(raw.len());
            for (c, v) in raw.iter().enumerate() {
                let x = v.as_f64().ok_or_else(|| {
                    parse_err(
                        format!("coefficients[{r}][{c}]"),
                        format!("non-numeric coefficient {v}"),
                    )
                })?;
                row.push(T::lit(x));
            }
            rows.push(row);
        }
        Ok(Self::new(file.name, terms, rows)?.with_provenance(file.provenance))
    }

    pub fn parse_str(source: &str) -> Result<Self, ActError> {
        Self::parse(source.as_bytes())
    }

    pub fn to_json(&self) -> String {
        let file = EquationFile {
            name: self.name.clone(),
            provenance: self.provenance.clone(),
            slots: SLOT_NAMES.iter().map(|s| s.to_string()).collect(),
            terms: self
                .terms
                .iter()
                .map(|t| t.factors.iter().map(|&f| Value::from(f)).collect())
                .collect(),
            coefficients: (0..9)
                .map(|r| {
                    self.row(r)
                        .iter()
                        .map(|c| Value::from(c.as_f64()))
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("equation file serializes")
    }
}
