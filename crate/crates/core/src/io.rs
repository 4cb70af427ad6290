//! JSON documents for MDPs and labeled matrices.
//!
//! An MDP document keys everything by label:
//!
//! ```json
//! {
//!   "name": "chain",
//!   "states": ["s0", "s1"],
//!   "actions": ["a"],
//!   "gamma": 0.5,
//!   "initial": {"s0": 1.0},
//!   "policy": {"s0": {"a": 1.0}, "s1": {"a": 1.0}},
//!   "transition": {"s0,a": {"s1": 1.0}, "s1,a": {"s1": 1.0}},
//!   "reward": {"s1,a": 1.0}
//! }
//! ```
//!
//! Omitted entries are zero. Maps are ordered, so serialization is
//! canonical.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::mdp::{validate, MdpError, MdpSpec, RawMdp};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("label {0:?} contains a comma")]
    CommaInLabel(String),
    #[error("unknown {kind} label {label:?} in {field}")]
    UnknownLabel {
        kind: &'static str,
        label: String,
        field: String,
    },
    #[error("key {0:?} is not of the form \"state,action\"")]
    BadPairKey(String),
    #[error(transparent)]
    Invalid(#[from] MdpError),
}

impl DocumentError {
    /// Whether the text itself was unreadable, as opposed to describing an
    /// invalid MDP.
    pub fn is_parse(&self) -> bool {
        matches!(self, DocumentError::Parse(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    #[serde(default)]
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub gamma: f64,
    pub initial: BTreeMap<String, f64>,
    pub policy: BTreeMap<String, BTreeMap<String, f64>>,
    pub transition: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reward: BTreeMap<String, f64>,
}

impl MdpDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    /// Sparse document of a validated MDP; zero entries are omitted.
    pub fn from_spec<T: Scalar>(mdp: &MdpSpec<T>) -> Self {
        let states = mdp.states().to_vec();
        let actions = mdp.actions().to_vec();
        let nonzero = |v: T| (v != T::zero()).then(|| v.as_f64());
        let mut initial = BTreeMap::new();
        let mut policy = BTreeMap::new();
        let mut transition = BTreeMap::new();
        let mut reward = BTreeMap::new();
        for (s, sl) in states.iter().enumerate() {
            if let Some(v) = nonzero(mdp.initial()[s]) {
                initial.insert(sl.clone(), v);
            }
            let mut row = BTreeMap::new();
            for (a, al) in actions.iter().enumerate() {
                if let Some(v) = nonzero(mdp.policy(s, a)) {
                    row.insert(al.clone(), v);
                }
                let key = format!("{sl},{al}");
                let next: BTreeMap<String, f64> = states
                    .iter()
                    .enumerate()
                    .filter_map(|(s2, l2)| nonzero(mdp.transition(s, a, s2)).map(|v| (l2.clone(), v)))
                    .collect();
                transition.insert(key.clone(), next);
                if let Some(v) = nonzero(mdp.reward(s, a)) {
                    reward.insert(key, v);
                }
            }
            policy.insert(sl.clone(), row);
        }
        Self {
            name: mdp.name().to_string(),
            states,
            actions,
            gamma: mdp.gamma().as_f64(),
            initial,
            policy,
            transition,
            reward,
        }
    }

    /// Dense tables in label order. Unknown labels are errors; missing
    /// entries are zero.
    pub fn to_raw<T: Scalar>(&self) -> Result<RawMdp<T>, DocumentError> {
        for l in self.states.iter().chain(&self.actions) {
            if l.contains(',') {
                return Err(DocumentError::CommaInLabel(l.clone()));
            }
        }
        let (ns, na) = (self.states.len(), self.actions.len());
        let state = |l: &str, field: &str| {
            self.states
                .iter()
                .position(|s| s == l)
                .ok_or_else(|| DocumentError::UnknownLabel {
                    kind: "state",
                    label: l.to_string(),
                    field: field.to_string(),
                })
        };
        let action = |l: &str, field: &str| {
            self.actions
                .iter()
                .position(|s| s == l)
                .ok_or_else(|| DocumentError::UnknownLabel {
                    kind: "action",
                    label: l.to_string(),
                    field: field.to_string(),
                })
        };
        let pair = |key: &str, field: &str| -> Result<(usize, usize), DocumentError> {
            let (s, a) = key
                .split_once(',')
                .ok_or_else(|| DocumentError::BadPairKey(key.to_string()))?;
            Ok((state(s, field)?, action(a, field)?))
        };

        let mut initial = vec![T::zero(); ns];
        for (l, &v) in &self.initial {
            initial[state(l, "initial")?] = T::of(v);
        }
        let mut policy = vec![vec![T::zero(); na]; ns];
        for (sl, row) in &self.policy {
            let s = state(sl, "policy")?;
            for (al, &v) in row {
                policy[s][action(al, "policy")?] = T::of(v);
            }
        }
        let mut transition = vec![vec![vec![T::zero(); ns]; na]; ns];
        for (key, row) in &self.transition {
            let field = format!("transition[{key}]");
            let (s, a) = pair(key, &field)?;
            for (l2, &v) in row {
                transition[s][a][state(l2, &field)?] = T::of(v);
            }
        }
        let mut reward = vec![vec![T::zero(); na]; ns];
        for (key, &v) in &self.reward {
            let (s, a) = pair(key, "reward")?;
            reward[s][a] = T::of(v);
        }
        Ok(RawMdp {
            name: self.name.clone(),
            states: self.states.clone(),
            actions: self.actions.clone(),
            transition,
            reward,
            gamma: T::of(self.gamma),
            initial,
            policy,
        })
    }

    pub fn to_spec<T: Scalar>(&self) -> Result<MdpSpec<T>, DocumentError> {
        Ok(validate(self.to_raw()?)?)
    }
}

/// Parses and validates an MDP document.
pub fn load_mdp<T: Scalar>(text: &str) -> Result<MdpSpec<T>, DocumentError> {
    MdpDocument::parse(text)?.to_spec()
}

/// A matrix entry, written as a JSON number when finite and as `"inf"`
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry(pub f64);

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v == f64::INFINITY {
            s.serialize_str("inf")
        } else if v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Entry;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Entry, E> {
                Ok(Entry(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Entry, E> {
                Ok(Entry(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Entry, E> {
                Ok(Entry(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Entry, E> {
                match v {
                    "inf" => Ok(Entry(f64::INFINITY)),
                    "-inf" => Ok(Entry(f64::NEG_INFINITY)),
                    "nan" => Ok(Entry(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub entries: Vec<Vec<Entry>>,
    pub metadata: Metadata,
}

impl MatrixDocument {
    pub fn from_matrix<T: Scalar>(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        m: &Matrix<T>,
        metadata: Metadata,
    ) -> Self {
        assert_eq!((m.rows(), m.cols()), (row_labels.len(), col_labels.len()));
        let entries = (0..m.rows())
            .map(|i| m.row(i).iter().map(|v| Entry(v.as_f64())).collect())
            .collect();
        Self {
            row_labels,
            col_labels,
            entries,
            metadata,
        }
    }

    /// One column labeled `column`.
    pub fn from_vector<T: Scalar>(labels: Vec<String>, column: &str, v: &[T], metadata: Metadata) -> Self {
        let m = Matrix::from_fn(v.len(), 1, |i, _| v[i]);
        Self::from_matrix(labels, vec![column.to_string()], &m, metadata)
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        let shape_ok =
            doc.entries.len() == doc.row_labels.len() && doc.entries.iter().all(|r| r.len() == doc.col_labels.len());
        if !shape_ok {
            return Err(DocumentError::Invalid(MdpError::Shape(format!(
                "{} row labels and {} column labels do not match the entries",
                doc.row_labels.len(),
                doc.col_labels.len()
            ))));
        }
        Ok(doc)
    }

    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.row_labels.len(), self.col_labels.len(), |i, j| {
            T::of(self.entries[i][j].0)
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }
}
