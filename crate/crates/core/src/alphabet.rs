use std::collections::HashMap;

/// Bidirectional string <-> dense id map. Ids are assigned in first-seen
/// order starting at 0. Once frozen, unknown strings are reported as `None`
/// and never added.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
    frozen: bool,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `s`, inserting it when the alphabet is not frozen.
    pub fn intern(&mut self, s: &str) -> Option<u32> {
        if let Some(&id) = self.ids.get(s) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.ids.insert(s.to_owned(), id);
        Some(id)
    }

    pub fn id_of(&self, s: &str) -> Option<u32> {
        self.ids.get(s).copied()
    }

    pub fn string_of(&self, id: u32) -> Option<&str> {
        self.strings.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.strings.iter().map(String::as_str)
    }
}

impl<S: AsRef<str>> FromIterator<S> for Alphabet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut alphabet = Alphabet::new();
        for s in iter {
            alphabet.intern(s.as_ref());
        }
        alphabet
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frozen_lookup_does_not_grow() {
        let mut a: Alphabet = ["x", "y"].into_iter().collect();
        a.freeze();
        assert_eq!(a.intern("z"), None);
        assert_eq!(a.intern("y"), Some(1));
        assert_eq!(a.len(), 2);
    }

    proptest! {
        #[test]
        fn round_trip(words in prop::collection::vec("[a-z]{1,4}", 0..30)) {
            let a: Alphabet = words.iter().collect();
            for id in 0..a.len() as u32 {
                prop_assert_eq!(a.id_of(a.string_of(id).unwrap()), Some(id));
            }
        }
    }
}
