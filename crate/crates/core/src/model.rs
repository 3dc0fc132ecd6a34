//! Domain types: manuals, permutations, scrambled instances and reference sets.
//!
//! A [`Permutation`] always uses slot-to-position semantics: `mapping[i] == k` means the item
//! shown at slot `i` belongs at position `k`. Indices are zero-based throughout; one-based
//! numbering only appears in rendered reports.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    /// Validates that `mapping` is a bijection on `0..mapping.len()`.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &k in &mapping {
            if k >= n {
                return Err(Error::InvalidPermutation {
                    reason: format!("value {k} out of range 0..{n}"),
                    mapping,
                });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidPermutation {
                    reason: format!("value {k} repeated"),
                    mapping,
                });
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("identity permutation needs n >= 1".into()));
        }
        Ok(Self {
            mapping: (0..n).collect(),
        })
    }

    /// Builds the permutation whose item order (position to item) is `sequence`.
    ///
    /// `from_sequence(&[1, 2, 0])` lists item 1 first, so `mapping == [2, 0, 1]`.
    pub fn from_sequence(sequence: &[usize]) -> Result<Self> {
        Ok(Self::new(sequence.to_vec())?.inverse())
    }

    /// Item order: entry `k` is the slot whose item belongs at position `k`.
    pub fn to_sequence(&self) -> Vec<usize> {
        self.inverse().mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &k)| i == k)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mapping
    }

    /// Position assigned to the item at `slot`.
    pub fn position(&self, slot: usize) -> usize {
        self.mapping[slot]
    }

    /// True when the item at slot `a` is placed before the item at slot `b`.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.mapping[a] < self.mapping[b]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &k) in self.mapping.iter().enumerate() {
            inv[k] = i;
        }
        Self { mapping: inv }
    }

    /// `(self ∘ other)[i] = self[other[i]]`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        Ok(Self {
            mapping: other.mapping.iter().map(|&k| self.mapping[k]).collect(),
        })
    }

    /// Places each item at its target position: `output[self[i]] = items[i]`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        check_len(self.len(), items.len())?;
        let mut out: Vec<Option<T>> = vec![None; items.len()];
        for (item, &k) in items.iter().zip(&self.mapping) {
            out[k] = Some(item.clone());
        }
        Ok(out
            .into_iter()
            .map(|x| x.expect("bijection fills every slot"))
            .collect())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(mapping: Vec<usize>) -> Result<Self> {
        Self::new(mapping)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.mapping.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub step_id: String,
    #[serde(default)]
    pub sentences: Vec<String>,
    /// Wordpiece-equivalent count supplied by the manifest; never recomputed here.
    #[serde(default)]
    pub token_count: usize,
    #[serde(default)]
    pub image_refs: Vec<String>,
}

impl Step {
    pub fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() && self.image_refs.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "step `{}` has neither text nor images",
                self.step_id
            )));
        }
        if self.sentences.len() > 5 {
            return Err(Error::InvalidParameter(format!(
                "step `{}` has {} sentences (at most 5)",
                self.step_id,
                self.sentences.len()
            )));
        }
        if !self.sentences.is_empty() && self.token_count < self.sentences.len() {
            return Err(Error::InvalidParameter(format!(
                "step `{}` token_count {} is below its sentence count {}",
                self.step_id,
                self.token_count,
                self.sentences.len()
            )));
        }
        Ok(())
    }

    /// Plan generators only consume the first image of a step.
    pub fn primary_image(&self) -> Option<&str> {
        self.image_refs.first().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wikihow,
    Recipeqa,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manual {
    pub manual_id: String,
    pub goal: String,
    pub source: Source,
    /// Root to leaf.
    #[serde(default)]
    pub category_path: Vec<String>,
    pub steps: Vec<Step>,
    /// Member of a manually curated evaluation subset.
    #[serde(default, skip_serializing_if = "is_false")]
    pub golden: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Manual {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.len() < 2 {
            return Err(Error::InvalidSize(format!(
                "manual `{}` has {} step(s); at least 2 are required",
                self.manual_id,
                self.steps.len()
            )));
        }
        let mut ids = HashSet::new();
        for step in &self.steps {
            step.validate()?;
            if !ids.insert(step.step_id.as_str()) {
                return Err(Error::Duplicate(format!("{}/{}", self.manual_id, step.step_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Multimodal,
    TextOnly,
    ImageOnly,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Multimodal => "multimodal",
            Modality::TextOnly => "text_only",
            Modality::ImageOnly => "image_only",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multimodal" => Ok(Modality::Multimodal),
            "text_only" | "text-only" => Ok(Modality::TextOnly),
            "image_only" | "image-only" => Ok(Modality::ImageOnly),
            other => Err(Error::InvalidParameter(format!("unknown modality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrambledInstance {
    pub manual_id: String,
    pub modality: Modality,
    pub scramble: Permutation,
    pub seed: u64,
}

impl ScrambledInstance {
    pub fn instance_id(&self) -> String {
        format!("{}/{}", self.manual_id, self.modality.as_str())
    }

    pub fn len(&self) -> usize {
        self.scramble.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scramble.is_empty()
    }

    /// Steps in the order they are presented: slot `i` shows the step authored at
    /// position `scramble[i]`.
    pub fn shown_steps<'a>(&self, manual: &'a Manual) -> Result<Vec<&'a Step>> {
        if manual.steps.len() < self.len() {
            return Err(Error::shape(self.len(), manual.steps.len()));
        }
        Ok(self.scramble.as_slice().iter().map(|&k| &manual.steps[k]).collect())
    }

    /// The authored order in instance coordinates.
    pub fn references(&self) -> ReferenceSet {
        ReferenceSet {
            original: self.scramble.clone(),
            alternatives: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderPrediction<T> {
    pub instance_id: String,
    pub predicted: Permutation,
    pub objective_value: Option<T>,
    pub per_position_confidence: Option<Vec<T>>,
}

impl<T> OrderPrediction<T> {
    pub fn new(instance_id: impl Into<String>, predicted: Permutation) -> Self {
        Self {
            instance_id: instance_id.into(),
            predicted,
            objective_value: None,
            per_position_confidence: None,
        }
    }
}

/// Original order plus distinct alternative orders, all of equal length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    original: Permutation,
    alternatives: Vec<Permutation>,
}

impl ReferenceSet {
    /// Drops alternatives that repeat the original or each other (first occurrence wins).
    pub fn new(original: Permutation, alternatives: Vec<Permutation>) -> Result<Self> {
        let mut kept: Vec<Permutation> = Vec::with_capacity(alternatives.len());
        for alt in alternatives {
            check_len(original.len(), alt.len())?;
            if alt != original && !kept.contains(&alt) {
                kept.push(alt);
            }
        }
        Ok(Self {
            original,
            alternatives: kept,
        })
    }

    pub fn single(original: Permutation) -> Self {
        Self {
            original,
            alternatives: Vec::new(),
        }
    }

    pub fn original(&self) -> &Permutation {
        &self.original
    }

    pub fn alternatives(&self) -> &[Permutation] {
        &self.alternatives
    }

    pub fn has_alternatives(&self) -> bool {
        !self.alternatives.is_empty()
    }

    pub fn len(&self) -> usize {
        1 + self.alternatives.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Original first, then alternatives in stored order.
    pub fn iter(&self) -> impl Iterator<Item = &Permutation> {
        std::iter::once(&self.original).chain(&self.alternatives)
    }

    pub fn n(&self) -> usize {
        self.original.len()
    }
}
