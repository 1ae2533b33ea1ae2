//! Versioned JSON snapshots of trained denoisers.

use serde::{Deserialize, Serialize};

use crate::attractor::{AttractorMemory, MemoryError, StoredCode, WeightMode};
use crate::coding::EncoderConfig;
use crate::hash_table::CodeTable;

pub const SNAPSHOT_FORMAT: &str = "olfbench-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Attractor {
        num_channels: usize,
        num_bins: usize,
        weight_mode: WeightMode,
        stored_codes: Vec<StoredCode>,
        /// Upper-triangle `(i, j, weight)` triples, `i < j`.
        weights: Vec<(usize, usize, u32)>,
    },
    Hashtable {
        table: CodeTable,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    /// Encoder the stored codes were produced with, when known.
    pub encoder: Option<EncoderConfig>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Snapshot {
    pub fn attractor(memory: &AttractorMemory, encoder: Option<&EncoderConfig>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            encoder: encoder.cloned(),
            payload: Payload::Attractor {
                num_channels: memory.num_channels(),
                num_bins: memory.num_bins(),
                weight_mode: memory.mode(),
                stored_codes: memory.stored().to_vec(),
                weights: memory.weight_triples(),
            },
        }
    }

    pub fn hashtable(table: &CodeTable, encoder: Option<&EncoderConfig>) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            encoder: encoder.cloned(),
            payload: Payload::Hashtable { table: table.clone() },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, MemoryError> {
        let snap: Self = serde_json::from_str(text).map_err(|e| MemoryError::Snapshot(e.to_string()))?;
        if snap.format != SNAPSHOT_FORMAT {
            return Err(MemoryError::Snapshot(format!("unknown format {:?}", snap.format)));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(MemoryError::Snapshot(format!(
                "unsupported version {}",
                snap.version
            )));
        }
        Ok(snap)
    }

    pub fn into_attractor(self) -> Result<AttractorMemory, MemoryError> {
        match self.payload {
            Payload::Attractor {
                num_channels,
                num_bins,
                weight_mode,
                stored_codes,
                weights,
            } => AttractorMemory::from_parts(num_channels, num_bins, weight_mode, stored_codes, &weights),
            Payload::Hashtable { .. } => Err(MemoryError::Snapshot("snapshot holds a hash table".into())),
        }
    }

    pub fn into_table(self) -> Result<CodeTable, MemoryError> {
        match self.payload {
            Payload::Hashtable { table } => Ok(table),
            Payload::Attractor { .. } => {
                Err(MemoryError::Snapshot("snapshot holds an attractor memory".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::OdourCode;

    fn memory() -> AttractorMemory {
        let mut m = AttractorMemory::new(72, 16, WeightMode::Counts);
        m.learn_one_shot(
            "CO",
            &OdourCode::new((0..72).map(|c| (c % 16) as u16).collect(), 16).unwrap(),
        )
        .unwrap();
        m.learn_one_shot("Methane", &OdourCode::new(vec![3; 72], 16).unwrap())
            .unwrap();
        m
    }

    #[test]
    fn attractor_round_trip() {
        let m = memory();
        let json = Snapshot::attractor(&m, None).to_json();
        let back = Snapshot::from_json(&json).unwrap().into_attractor().unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["kind"], "attractor");
        assert_eq!(v["version"], 1);
    }

    #[test]
    fn hashtable_round_trip_and_kind_checks() {
        let t = CodeTable::train([("CO", vec![1u16; 72])]).unwrap();
        let json = Snapshot::hashtable(&t, None).to_json();
        assert_eq!(Snapshot::from_json(&json).unwrap().into_table().unwrap(), t);
        assert!(Snapshot::from_json(&json).unwrap().into_attractor().is_err());
        let bad = json.replace("\"version\":1", "\"version\":9");
        assert!(Snapshot::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_intra_channel_weights() {
        let mut snap = Snapshot::attractor(&memory(), None);
        if let Payload::Attractor { weights, .. } = &mut snap.payload {
            weights.push((0, 1, 1));
        }
        assert!(snap.into_attractor().is_err());
    }
}
