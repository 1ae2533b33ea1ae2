//! Lookup-table baseline: store each training representation verbatim and
//! denoise a test representation by returning the stored one with the most
//! element-wise agreements.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("no training samples")]
    Empty,
    #[error("representation length {found} does not match stored length {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub label: String,
    pub representation: Vec<u16>,
}

/// Insertion-ordered table; an entry's key is its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeTable {
    entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised<'a> {
    pub index: usize,
    pub label: &'a str,
    pub representation: &'a [u16],
    pub overlap: usize,
}

impl CodeTable {
    pub fn train<I, S>(samples: I) -> Result<Self, TableError>
    where
        I: IntoIterator<Item = (S, Vec<u16>)>,
        S: Into<String>,
    {
        let entries: Vec<TableEntry> = samples
            .into_iter()
            .map(|(label, representation)| TableEntry {
                label: label.into(),
                representation,
            })
            .collect();
        if entries.is_empty() {
            return Err(TableError::Empty);
        }
        if let Some(bad) = entries
            .iter()
            .find(|e| e.representation.len() != entries[0].representation.len())
        {
            return Err(TableError::LengthMismatch {
                expected: entries[0].representation.len(),
                found: bad.representation.len(),
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    /// Element comparisons per `denoise` call.
    pub fn denoise_ops(&self) -> u64 {
        self.entries.iter().map(|e| e.representation.len() as u64).sum()
    }

    /// Best-matching stored entry; the first maximum wins ties.
    pub fn denoise(&self, test: &[u16]) -> Result<Denoised<'_>, TableError> {
        let mut best: Option<(usize, usize)> = None;
        for (i, entry) in self.entries.iter().enumerate() {
            if entry.representation.len() != test.len() {
                return Err(TableError::LengthMismatch {
                    expected: entry.representation.len(),
                    found: test.len(),
                });
            }
            let overlap = entry
                .representation
                .iter()
                .zip(test)
                .filter(|(a, b)| a == b)
                .count();
            if best.is_none_or(|(_, o)| overlap > o) {
                best = Some((i, overlap));
            }
        }
        let (index, overlap) = best.ok_or(TableError::Empty)?;
        let entry = &self.entries[index];
        Ok(Denoised {
            index,
            label: &entry.label,
            representation: &entry.representation,
            overlap,
        })
    }
}
