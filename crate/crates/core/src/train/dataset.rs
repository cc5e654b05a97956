use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{filter_frames, read_kpseq, KeypointSequence, Manifest, Split};
use crate::error::{Error, Result};

/// Bijection between class names and output indices `0..K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelMap {
    /// Sorted, de-duplicated labels.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Self::from_ordered(names.into_iter().collect()).expect("a set has no duplicates")
    }

    /// Labels in the given index order.
    pub fn from_ordered(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate label {name:?}")));
            }
        }
        Ok(LabelMap { names, index })
    }

    /// From a `name → index` map; indices must cover `0..K` exactly once.
    pub fn from_index_map(map: &BTreeMap<String, usize>) -> Result<Self> {
        let k = map.len();
        let mut names = vec![None; k];
        for (name, &i) in map {
            match names.get_mut(i) {
                Some(slot @ None) => *slot = Some(name.clone()),
                _ => {
                    return Err(Error::Schema(format!(
                        "label map index {i} for {name:?} is out of range or repeated"
                    )))
                }
            }
        }
        Self::from_ordered(names.into_iter().map(Option::unwrap).collect())
    }

    pub fn to_index_map(&self) -> BTreeMap<String, usize> {
        self.index.iter().map(|(k, &v)| (k.clone(), v)).collect()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Serialize for LabelMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_index_map().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, usize>::deserialize(d)?;
        LabelMap::from_index_map(&map).map_err(serde::de::Error::custom)
    }
}

/// One training example: `frames × 138` coordinates and its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub frames: Array2<f64>,
    pub target: usize,
}

impl Sample {
    pub fn from_sequence(seq: &KeypointSequence, labels: &LabelMap) -> Result<Self> {
        let width = seq.frames.first().map_or(0, |f| f.coords().len());
        let mut frames = Array2::zeros((seq.frames.len(), width));
        for (mut row, frame) in frames.rows_mut().into_iter().zip(&seq.frames) {
            row.iter_mut()
                .zip(frame.coords())
                .for_each(|(dst, &src)| *dst = src as f64);
        }
        Ok(Sample {
            id: seq.sample_id.clone(),
            frames,
            target: labels.index_of(&seq.label)?,
        })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub labels: LabelMap,
}

impl Dataset {
    pub fn from_sequences(seqs: &[KeypointSequence], labels: LabelMap) -> Result<Self> {
        let samples = seqs
            .iter()
            .map(|s| Sample::from_sequence(s, &labels))
            .collect::<Result<_>>()?;
        Ok(Dataset { samples, labels })
    }

    /// Loads the rows of `split`, reading files relative to `base_dir` and
    /// optionally applying the wrist-height filter.
    pub fn from_manifest(
        manifest: &Manifest,
        base_dir: &Path,
        split: Split,
        labels: LabelMap,
        filter_threshold: Option<f64>,
    ) -> Result<Self> {
        let seqs = load_sequences(manifest, base_dir, split, filter_threshold)?;
        Self::from_sequences(&seqs, labels)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Samples per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for s in &self.samples {
            counts[s.target] += 1;
        }
        counts
    }

    /// Every class has the same number of samples.
    pub fn is_balanced(&self) -> bool {
        let counts = self.class_counts();
        counts.windows(2).all(|w| w[0] == w[1])
    }
}

/// Reads every sequence of `split` listed in `manifest`.
pub fn load_sequences(
    manifest: &Manifest,
    base_dir: &Path,
    split: Split,
    filter_threshold: Option<f64>,
) -> Result<Vec<KeypointSequence>> {
    manifest
        .rows_in(split)
        .map(|row| {
            let seq = read_kpseq(base_dir.join(&row.path))?;
            if seq.label != row.label {
                return Err(Error::Schema(format!(
                    "{} is labelled {:?} in the manifest but {:?} in the file",
                    row.path, row.label, seq.label
                )));
            }
            match filter_threshold {
                Some(t) => filter_frames(&seq, t),
                None => Ok(seq),
            }
        })
        .collect()
}

/// Label map of a manifest's training rows; every test label must appear in train.
pub fn label_map_for(manifest: &Manifest) -> Result<LabelMap> {
    let labels = LabelMap::from_labels(manifest.rows_in(Split::Train).map(|r| r.label.clone()));
    if labels.is_empty() {
        return Err(Error::Invalid("manifest has no training rows".into()));
    }
    if let Some(row) = manifest
        .rows_in(Split::Test)
        .find(|r| labels.index_of(&r.label).is_err())
    {
        return Err(Error::UnknownLabel(row.label.clone()));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_map_round_trips_through_json() {
        let labels = LabelMap::from_labels(["b", "a", "c", "a"]);
        assert_eq!(labels.names(), ["a", "b", "c"]);
        let json = serde_json::to_string(&labels).unwrap();
        assert_eq!(json, r#"{"a":0,"b":1,"c":2}"#);
        assert_eq!(serde_json::from_str::<LabelMap>(&json).unwrap(), labels);
        assert!(serde_json::from_str::<LabelMap>(r#"{"a":0,"b":0}"#).is_err());
        assert!(serde_json::from_str::<LabelMap>(r#"{"a":0,"b":2}"#).is_err());
    }

    #[test]
    fn unknown_label() {
        let labels = LabelMap::from_labels(["x"]);
        assert!(matches!(labels.index_of("y"), Err(Error::UnknownLabel(_))));
    }
}
