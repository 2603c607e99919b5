//! The four note-level categories and sets of them.
//!
//! Everything downstream (fold plans, metric vectors, classifier heads)
//! relies on the fixed ordering `SI, SA, ES, NSSI`, so the order of
//! [`Label::ALL`] must never change.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the four note-level categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Suicidal ideation.
    SI,
    /// Suicide attempt.
    SA,
    /// Exposure to suicide.
    ES,
    /// Non-suicidal self-injury.
    NSSI,
}

impl Label {
    /// All labels in canonical order. Index into this array and
    /// [`Label::index`] are inverses.
    pub const ALL: [Label; 4] = [Label::SI, Label::SA, Label::ES, Label::NSSI];

    /// Number of labels.
    pub const COUNT: usize = 4;

    /// Position of this label in the canonical ordering.
    pub fn index(self) -> usize {
        match self {
            Label::SI => 0,
            Label::SA => 1,
            Label::ES => 2,
            Label::NSSI => 3,
        }
    }

    /// Canonical upper-case name, as used in corpus files.
    pub fn name(self) -> &'static str {
        match self {
            Label::SI => "SI",
            Label::SA => "SA",
            Label::ES => "ES",
            Label::NSSI => "NSSI",
        }
    }

    /// Parse a canonical name. Only the exact upper-case forms are accepted.
    pub fn parse(name: &str) -> Option<Label> {
        match name {
            "SI" => Some(Label::SI),
            "SA" => Some(Label::SA),
            "ES" => Some(Label::ES),
            "NSSI" => Some(Label::NSSI),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of the four labels, the multi-label target attached to one note.
///
/// The empty set is a valid target: notes without any relevant mention
/// carry no labels. Internally a 4-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LabelSet {
    bits: u8,
}

impl LabelSet {
    /// The empty set.
    pub const EMPTY: LabelSet = LabelSet { bits: 0 };

    /// Set containing every label.
    pub const FULL: LabelSet = LabelSet { bits: 0b1111 };

    /// Build a set from the given labels.
    pub fn from_labels(labels: &[Label]) -> LabelSet {
        let mut set = LabelSet::EMPTY;
        for &label in labels {
            set.insert(label);
        }
        set
    }

    /// Build a set from per-label membership flags in canonical order.
    pub fn from_flags(flags: [bool; Label::COUNT]) -> LabelSet {
        let mut set = LabelSet::EMPTY;
        for (label, &flag) in Label::ALL.iter().zip(flags.iter()) {
            if flag {
                set.insert(*label);
            }
        }
        set
    }

    pub fn insert(&mut self, label: Label) {
        self.bits |= 1 << label.index();
    }

    pub fn remove(&mut self, label: Label) {
        self.bits &= !(1 << label.index());
    }

    pub fn contains(self, label: Label) -> bool {
        self.bits & (1 << label.index()) != 0
    }

    /// Number of labels in the set (the note's label cardinality).
    pub fn cardinality(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    /// Labels present, in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Label> {
        Label::ALL.into_iter().filter(move |l| self.contains(*l))
    }

    /// Membership flags in canonical order.
    pub fn flags(self) -> [bool; Label::COUNT] {
        [
            self.contains(Label::SI),
            self.contains(Label::SA),
            self.contains(Label::ES),
            self.contains(Label::NSSI),
        ]
    }

    /// Canonical names of the labels present, in canonical order.
    pub fn names(self) -> Vec<&'static str> {
        self.iter().map(Label::name).collect()
    }
}

impl FromIterator<Label> for LabelSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        let mut set = LabelSet::EMPTY;
        for label in iter {
            set.insert(label);
        }
        set
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(","))
    }
}

// Serialized as an array of label names so corpus JSON stays readable.
impl Serialize for LabelSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(Label::name))
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        let mut set = LabelSet::EMPTY;
        for name in &names {
            let label = Label::parse(name)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown label name: {name:?}")))?;
            set.insert(label);
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_is_fixed() {
        assert_eq!(Label::ALL, [Label::SI, Label::SA, Label::ES, Label::NSSI]);
        for (i, label) in Label::ALL.iter().enumerate() {
            assert_eq!(label.index(), i);
        }
    }

    #[test]
    fn names_round_trip() {
        for label in Label::ALL {
            assert_eq!(Label::parse(label.name()), Some(label));
        }
        assert_eq!(Label::parse("si"), None);
        assert_eq!(Label::parse("OTHER"), None);
    }

    #[test]
    fn set_membership_and_cardinality() {
        let set = LabelSet::from_labels(&[Label::SI, Label::SA]);
        assert!(set.contains(Label::SI));
        assert!(set.contains(Label::SA));
        assert!(!set.contains(Label::ES));
        assert_eq!(set.cardinality(), 2);
        assert_eq!(LabelSet::EMPTY.cardinality(), 0);
        assert_eq!(LabelSet::FULL.cardinality(), 4);
    }

    #[test]
    fn set_iterates_in_canonical_order() {
        let set = LabelSet::from_labels(&[Label::NSSI, Label::SI]);
        let labels: Vec<Label> = set.iter().collect();
        assert_eq!(labels, vec![Label::SI, Label::NSSI]);
    }

    #[test]
    fn serde_uses_label_names() {
        let set = LabelSet::from_labels(&[Label::SI, Label::ES]);
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"["SI","ES"]"#);
        let back: LabelSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        assert!(serde_json::from_str::<LabelSet>(r#"["XX"]"#).is_err());
    }
}
