//! One-shot Hebbian attractor over (channel, phase-bin) units.
//!
//! Learning a code increments the weight between every pair of its active
//! units on different channels. Recall runs synchronous gamma cycles: each
//! channel moves its spike to the bin receiving the most weighted input from
//! the other channels' current spikes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{jaccard, CodingError, OdourCode};

pub const DEFAULT_CYCLES: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.75;

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("gas {0:?} already stored")]
    DuplicateLabel(String),
    #[error("memory holds no stored codes")]
    Empty,
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error("invalid snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Co-activation counts.
    #[default]
    Counts,
    /// Binary weights (Willshaw-style clipping at 1).
    Clipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredCode {
    pub label: String,
    pub code: OdourCode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttractorMemory {
    num_channels: usize,
    num_bins: usize,
    mode: WeightMode,
    weights: Vec<u32>,
    stored: Vec<StoredCode>,
}

/// Network state after one gamma cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleState {
    pub code: OdourCode,
    /// Jaccard against each stored code, in storage order.
    pub jaccard: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallTrace {
    pub cycles: Vec<CycleState>,
}

impl RecallTrace {
    pub fn final_state(&self) -> Option<&CycleState> {
        self.cycles.last()
    }

    /// `[cycle][stored code]` Jaccard matrix.
    pub fn jaccard_matrix(&self) -> Vec<Vec<f64>> {
        self.cycles.iter().map(|c| c.jaccard.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub index: usize,
    pub label: String,
    pub score: f64,
    pub recognised: bool,
}

impl AttractorMemory {
    pub fn new(num_channels: usize, num_bins: usize, mode: WeightMode) -> Self {
        let units = num_channels * num_bins;
        Self {
            num_channels,
            num_bins,
            mode,
            weights: vec![0; units * units],
            stored: Vec::new(),
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_units(&self) -> usize {
        self.num_channels * self.num_bins
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn stored(&self) -> &[StoredCode] {
        &self.stored
    }

    pub fn is_empty(&self) -> bool {
        self.stored.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.weights[i * self.num_units() + j]
    }

    /// Non-zero weights `(i, j, w)` with `i < j`.
    pub fn weight_triples(&self) -> Vec<(usize, usize, u32)> {
        let u = self.num_units();
        let mut out = Vec::new();
        for i in 0..u {
            for j in i + 1..u {
                let w = self.weights[i * u + j];
                if w > 0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    fn check(&self, code: &OdourCode) -> Result<(), CodingError> {
        if code.num_channels() != self.num_channels || code.num_bins() != self.num_bins {
            return Err(CodingError::GeometryMismatch {
                left_channels: self.num_channels,
                left_bins: self.num_bins,
                right_channels: code.num_channels(),
                right_bins: code.num_bins(),
            });
        }
        Ok(())
    }

    /// Stores `code` under `label` from a single presentation.
    pub fn learn_one_shot(&mut self, label: &str, code: &OdourCode) -> Result<(), MemoryError> {
        self.check(code)?;
        if self.stored.iter().any(|s| s.label == label) {
            return Err(MemoryError::DuplicateLabel(label.to_string()));
        }
        let u = self.num_units();
        let units: Vec<usize> = (0..self.num_channels).map(|c| code.unit(c)).collect();
        for (ci, &i) in units.iter().enumerate() {
            let row = &mut self.weights[i * u..(i + 1) * u];
            for (cj, &j) in units.iter().enumerate() {
                if ci == cj {
                    continue;
                }
                match self.mode {
                    WeightMode::Counts => row[j] += 1,
                    WeightMode::Clipped => row[j] = 1,
                }
            }
        }
        self.stored.push(StoredCode {
            label: label.to_string(),
            code: code.clone(),
        });
        Ok(())
    }

    /// Weight increments performed by one `learn_one_shot`.
    pub fn learn_ops(&self) -> u64 {
        (self.num_channels * (self.num_channels - 1)) as u64
    }

    /// Weight reads performed by a `recall` of `cycles` gamma cycles.
    pub fn recall_ops(&self, cycles: usize) -> u64 {
        (cycles * self.num_channels * self.num_bins * (self.num_channels - 1)) as u64
    }

    fn step(&self, current: &OdourCode) -> OdourCode {
        let u = self.num_units();
        let units: Vec<usize> = (0..self.num_channels).map(|c| current.unit(c)).collect();
        let mut next = current.clone();
        for c in 0..self.num_channels {
            let here = current.bin(c);
            let mut best_bin = here;
            let mut best = None::<u64>;
            let mut here_support = 0;
            for b in 0..self.num_bins {
                let row = &self.weights[(c * self.num_bins + b) * u..][..u];
                let support: u64 = units
                    .iter()
                    .enumerate()
                    .filter(|&(other, _)| other != c)
                    .map(|(_, &j)| row[j] as u64)
                    .sum();
                if b == here {
                    here_support = support;
                }
                if best.is_none_or(|s| support > s) {
                    best = Some(support);
                    best_bin = b;
                }
            }
            // the current bin wins ties; otherwise the lowest maximal bin
            if best != Some(here_support) {
                next.set_bin(c, best_bin);
            }
        }
        next
    }

    /// Runs `cycles` synchronous gamma cycles from `input`.
    pub fn recall(&self, input: &OdourCode, cycles: usize) -> Result<RecallTrace, MemoryError> {
        if self.stored.is_empty() {
            return Err(MemoryError::Empty);
        }
        self.check(input)?;
        let mut current = input.clone();
        let mut trace = Vec::with_capacity(cycles);
        for _ in 0..cycles {
            current = self.step(&current);
            let jaccard = self
                .stored
                .iter()
                .map(|s| jaccard(&current, &s.code))
                .collect::<Result<Vec<f64>, _>>()?;
            trace.push(CycleState {
                code: current.clone(),
                jaccard,
            });
        }
        Ok(RecallTrace { cycles: trace })
    }

    /// Predicts the stored gas with the highest final-cycle Jaccard (earliest
    /// stored on ties) and thresholds its score.
    pub fn classify(
        &self,
        input: &OdourCode,
        threshold: f64,
        cycles: usize,
    ) -> Result<Classification, MemoryError> {
        let trace = self.recall(input, cycles)?;
        self.classify_trace(&trace, input, threshold)
    }

    pub fn classify_trace(
        &self,
        trace: &RecallTrace,
        input: &OdourCode,
        threshold: f64,
    ) -> Result<Classification, MemoryError> {
        let scores = match trace.final_state() {
            Some(s) => s.jaccard.clone(),
            // zero cycles: score the input itself
            None => self
                .stored
                .iter()
                .map(|s| jaccard(input, &s.code))
                .collect::<Result<Vec<f64>, _>>()?,
        };
        let (index, score) = first_argmax(&scores).ok_or(MemoryError::Empty)?;
        Ok(Classification {
            index,
            label: self.stored[index].label.clone(),
            score,
            recognised: score >= threshold,
        })
    }

    pub(crate) fn from_parts(
        num_channels: usize,
        num_bins: usize,
        mode: WeightMode,
        stored: Vec<StoredCode>,
        triples: &[(usize, usize, u32)],
    ) -> Result<Self, MemoryError> {
        let mut m = Self::new(num_channels, num_bins, mode);
        let u = m.num_units();
        for s in &stored {
            m.check(&s.code)?;
        }
        for &(i, j, w) in triples {
            if i >= u || j >= u || i / num_bins == j / num_bins {
                return Err(MemoryError::Snapshot(format!(
                    "weight ({i}, {j}) outside cross-channel unit pairs"
                )));
            }
            m.weights[i * u + j] = w;
            m.weights[j * u + i] = w;
        }
        let mut labels: Vec<&str> = stored.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(MemoryError::Snapshot("duplicate stored labels".into()));
        }
        m.stored = stored;
        Ok(m)
    }
}

/// Index and value of the first maximum.
pub fn first_argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NUM_CHANNELS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BINS: usize = 16;

    fn random_code(rng: &mut impl Rng) -> OdourCode {
        OdourCode::new(
            (0..NUM_CHANNELS)
                .map(|_| rng.random_range(0..BINS as u16))
                .collect(),
            BINS,
        )
        .unwrap()
    }

    fn randomise(code: &OdourCode, channels: usize, rng: &mut impl Rng) -> OdourCode {
        let mut out = code.clone();
        for c in rand::seq::index::sample(rng, NUM_CHANNELS, channels) {
            out.set_bin(c, rng.random_range(0..BINS));
        }
        out
    }

    fn memory_of(codes: &[OdourCode]) -> AttractorMemory {
        let mut m = AttractorMemory::new(NUM_CHANNELS, BINS, WeightMode::Counts);
        for (i, c) in codes.iter().enumerate() {
            m.learn_one_shot(&format!("gas{i}"), c).unwrap();
        }
        m
    }

    #[test]
    fn single_code_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let code = random_code(&mut rng);
        let m = memory_of(std::slice::from_ref(&code));
        let active: Vec<usize> = (0..NUM_CHANNELS).map(|c| code.unit(c)).collect();
        let mut total = 0;
        for i in 0..m.num_units() {
            for j in 0..m.num_units() {
                let w = m.weight(i, j);
                let expected = active.contains(&i) && active.contains(&j) && i / BINS != j / BINS;
                assert_eq!(w, expected as u32, "({i},{j})");
                total += w;
            }
        }
        assert_eq!(total, 72 * 71);
    }

    #[test]
    fn disjoint_codes_superpose() {
        let a = OdourCode::new(vec![0; NUM_CHANNELS], BINS).unwrap();
        let b = OdourCode::new(vec![5; NUM_CHANNELS], BINS).unwrap();
        let ma = memory_of(std::slice::from_ref(&a));
        let mb = memory_of(std::slice::from_ref(&b));
        let mab = memory_of(&[a, b]);
        for i in 0..mab.num_units() {
            for j in 0..mab.num_units() {
                assert_eq!(mab.weight(i, j), ma.weight(i, j) + mb.weight(i, j));
            }
        }
    }

    #[test]
    fn ten_codes_match_brute_force_pair_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let codes: Vec<OdourCode> = (0..10).map(|_| random_code(&mut rng)).collect();
        let m = memory_of(&codes);
        let mut max = 0;
        for _ in 0..2000 {
            let i = rng.random_range(0..m.num_units());
            let j = rng.random_range(0..m.num_units());
            let (ci, bi, cj, bj) = (i / BINS, i % BINS, j / BINS, j % BINS);
            let count = if ci == cj {
                0
            } else {
                codes
                    .iter()
                    .filter(|c| c.bin(ci) == bi && c.bin(cj) == bj)
                    .count() as u32
            };
            assert_eq!(m.weight(i, j), count);
            assert_eq!(m.weight(i, j), m.weight(j, i));
        }
        for (_, _, w) in m.weight_triples() {
            max = max.max(w);
        }
        assert!(max <= 10);
        // every stored code contributes to its own pairs
        assert!(max >= 1);
    }

    #[test]
    fn duplicate_label_and_empty_memory() {
        let code = OdourCode::new(vec![1; NUM_CHANNELS], BINS).unwrap();
        let mut m = AttractorMemory::new(NUM_CHANNELS, BINS, WeightMode::Counts);
        assert_eq!(m.recall(&code, 5).unwrap_err(), MemoryError::Empty);
        m.learn_one_shot("CO", &code).unwrap();
        assert_eq!(
            m.learn_one_shot("CO", &code).unwrap_err(),
            MemoryError::DuplicateLabel("CO".into())
        );
        let wrong = OdourCode::new(vec![1; NUM_CHANNELS], 8).unwrap();
        assert!(matches!(m.recall(&wrong, 5), Err(MemoryError::Coding(_))));
    }

    #[test]
    fn stored_code_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let code = random_code(&mut rng);
        let m = memory_of(std::slice::from_ref(&code));
        let trace = m.recall(&code, 5).unwrap();
        assert_eq!(trace.cycles.len(), 5);
        for state in &trace.cycles {
            assert_eq!(state.code, code);
            assert_eq!(state.jaccard, vec![1.0]);
        }
    }

    #[test]
    fn single_memory_restores_in_one_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let code = random_code(&mut rng);
        let m = memory_of(std::slice::from_ref(&code));
        for _ in 0..20 {
            let noisy = randomise(&code, 43, &mut rng);
            let trace = m.recall(&noisy, 5).unwrap();
            assert_eq!(trace.cycles[0].code, code);
            let js: Vec<f64> = trace.cycles.iter().map(|c| c.jaccard[0]).collect();
            assert_eq!(js, vec![1.0; 5]);
        }
    }

    #[test]
    fn single_memory_jaccard_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let code = random_code(&mut rng);
            let m = memory_of(std::slice::from_ref(&code));
            let k = rng.random_range(0..=NUM_CHANNELS);
            let noisy = randomise(&code, k, &mut rng);
            let input_j = jaccard(&noisy, &code).unwrap();
            let js: Vec<f64> = m
                .recall(&noisy, 5)
                .unwrap()
                .cycles
                .iter()
                .map(|c| c.jaccard[0])
                .collect();
            assert!(js[0] >= input_j);
            assert!(js.windows(2).all(|w| w[1] >= w[0]), "{js:?}");
        }
    }

    #[test]
    fn occluded_gas_recalls_its_own_code() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let codes: Vec<OdourCode> = (0..10).map(|_| random_code(&mut rng)).collect();
        let m = memory_of(&codes);
        for (g, code) in codes.iter().enumerate() {
            let noisy = randomise(code, 43, &mut rng);
            // exhaustive oracle: most agreements with the input
            let oracle = codes
                .iter()
                .enumerate()
                .max_by_key(|(i, c)| (c.agreements(&noisy).unwrap(), std::cmp::Reverse(*i)))
                .unwrap()
                .0;
            assert_eq!(oracle, g);
            let last = m
                .recall(&noisy, 5)
                .unwrap()
                .final_state()
                .unwrap()
                .jaccard
                .clone();
            for (h, &j) in last.iter().enumerate() {
                if h != g {
                    assert!(last[g] > j, "gas {g}: {last:?}");
                }
            }
        }
    }

    #[test]
    fn classify_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let codes: Vec<OdourCode> = (0..10).map(|_| random_code(&mut rng)).collect();
        let m = memory_of(&codes);
        let c = m.classify(&codes[4], 1.0, 5).unwrap();
        assert_eq!(
            (c.index, c.label.as_str(), c.score, c.recognised),
            (4, "gas4", 1.0, true)
        );
        assert!(!m.classify(&codes[4], 1.01, 5).unwrap().recognised);
    }

    #[test]
    fn recall_is_read_only_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let codes: Vec<OdourCode> = (0..5).map(|_| random_code(&mut rng)).collect();
        let m = memory_of(&codes);
        let before = m.clone();
        let input = randomise(&codes[2], 40, &mut rng);
        let a = m.recall(&input, 5).unwrap();
        let b = m.recall(&input, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(m, before);
    }

    #[test]
    fn clipped_weights_are_binary() {
        let code = OdourCode::new(vec![2; NUM_CHANNELS], BINS).unwrap();
        let other = OdourCode::new(
            (0..NUM_CHANNELS).map(|c| if c < 10 { 2 } else { 3 }).collect(),
            BINS,
        )
        .unwrap();
        let mut m = AttractorMemory::new(NUM_CHANNELS, BINS, WeightMode::Clipped);
        m.learn_one_shot("a", &code).unwrap();
        m.learn_one_shot("b", &other).unwrap();
        assert!(m.weight_triples().iter().all(|&(_, _, w)| w == 1));
        assert_eq!(m.weight(2, BINS + 2), 1);
    }

    #[test]
    fn first_argmax_keeps_earliest() {
        assert_eq!(first_argmax(&[0.2, 0.5, 0.5]), Some((1, 0.5)));
        assert_eq!(first_argmax(&[]), None);
    }
}
