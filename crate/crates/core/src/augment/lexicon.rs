use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::text::nfc;

const THESAURUS_JSON: &str = include_str!("../../resources/thesaurus.json");
const ANTONYMS_JSON: &str = include_str!("../../resources/antonyms.json");

/// Token to replacement-token map used by synonym replacement and, with an
/// involutive mapping, by logical reversal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Thesaurus {
    entries: BTreeMap<String, Vec<String>>,
}

impl Thesaurus {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Result<Self, AugmentError> {
        let mut clean = BTreeMap::new();
        for (token, alternatives) in entries {
            let token = nfc(token.trim());
            if token.is_empty() || token != token.to_lowercase() {
                return Err(AugmentError::InvalidLexicon(format!(
                    "entry `{token}` must be a non-empty lowercase token"
                )));
            }
            let mut alts = Vec::with_capacity(alternatives.len());
            for alt in alternatives {
                let alt = nfc(alt.trim());
                if alt.is_empty() || alt != alt.to_lowercase() {
                    return Err(AugmentError::InvalidLexicon(format!(
                        "`{token}` -> `{alt}`: replacements must be non-empty and lowercase"
                    )));
                }
                if alt == token {
                    return Err(AugmentError::InvalidLexicon(format!(
                        "`{token}` maps to itself"
                    )));
                }
                alts.push(alt);
            }
            if !alts.is_empty() {
                clean.insert(token, alts);
            }
        }
        Ok(Self { entries: clean })
    }

    pub fn from_json(text: &str) -> Result<Self, AugmentError> {
        let entries: BTreeMap<String, Vec<String>> = serde_json::from_str(text)
            .map_err(|e| AugmentError::InvalidLexicon(e.to_string()))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, AugmentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AugmentError::io(path, e))?;
        Self::from_json(&text)
    }

    /// The shipped synonym table.
    pub fn default_synonyms() -> Self {
        Self::from_json(THESAURUS_JSON).expect("bundled thesaurus is valid")
    }

    /// The shipped antonym table.
    pub fn default_antonyms() -> Self {
        let t = Self::from_json(ANTONYMS_JSON).expect("bundled antonyms are valid");
        t.check_involutive().expect("bundled antonyms are involutive");
        t
    }

    pub fn get(&self, token: &str) -> Option<&[String]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// For antonym tables: the first replacement of every entry must map
    /// back to the entry.
    pub fn check_involutive(&self) -> Result<(), AugmentError> {
        for (token, alts) in &self.entries {
            let back = self.get(&alts[0]).and_then(|b| b.first());
            if back != Some(token) {
                return Err(AugmentError::InvalidLexicon(format!(
                    "antonym `{token}` -> `{}` does not map back",
                    alts[0]
                )));
            }
        }
        Ok(())
    }
}
