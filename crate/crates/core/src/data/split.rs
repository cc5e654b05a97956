use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Manifest, Split};
use crate::error::{Error, Result};

/// Stratified random train/test assignment.
///
/// Each class sends `round(n * train_fraction)` rows to train, clamped so that
/// both sides receive at least one row.
pub fn split_manifest(manifest: &Manifest, train_fraction: f64, seed: u64) -> Result<Manifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if let Some(row) = manifest.rows.iter().find(|r| r.split != Split::Unassigned) {
        return Err(Error::Split(format!(
            "row {:?} is already assigned to {}",
            row.path, row.split
        )));
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, row) in manifest.rows.iter().enumerate() {
        by_label.entry(row.label.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = manifest.clone();
    for (label, mut indices) in by_label {
        let n = indices.len();
        if n < 2 {
            return Err(Error::Split(format!(
                "class {label:?} has a single sample and cannot be stratified"
            )));
        }
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        indices.shuffle(&mut rng);
        for (k, &i) in indices.iter().enumerate() {
            out.rows[i].split = if k < n_train { Split::Train } else { Split::Test };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SampleRecord;
    use proptest::prelude::*;

    fn manifest(classes: usize, per_class: usize) -> Manifest {
        let rows = (0..classes)
            .flat_map(|c| {
                (0..per_class).map(move |i| SampleRecord {
                    path: format!("c{c}/s{i}.json"),
                    label: format!("class{c}"),
                    concept: None,
                    split: Split::Unassigned,
                })
            })
            .collect();
        Manifest::new(rows).unwrap()
    }

    fn count(m: &Manifest, label: &str, split: Split) -> usize {
        m.rows
            .iter()
            .filter(|r| r.label == label && r.split == split)
            .count()
    }

    #[test]
    fn eighty_twenty_per_class() {
        let m = split_manifest(&manifest(3, 10), 0.8, 0).unwrap();
        for c in 0..3 {
            assert_eq!(count(&m, &format!("class{c}"), Split::Train), 8);
            assert_eq!(count(&m, &format!("class{c}"), Split::Test), 2);
        }
    }

    #[test]
    fn five_by_twenty_gives_eighty_train_rows() {
        let m = split_manifest(&manifest(5, 20), 0.8, 3).unwrap();
        assert_eq!(m.rows_in(Split::Train).count(), 80);
        assert_eq!(m.rows_in(Split::Test).count(), 20);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = split_manifest(&manifest(4, 7), 0.8, 42).unwrap();
        let b = split_manifest(&manifest(4, 7), 0.8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singleton_class_rejected() {
        let mut m = manifest(2, 3);
        m.rows.truncate(4);
        assert!(matches!(split_manifest(&m, 0.8, 0), Err(Error::Split(_))));
    }

    #[test]
    fn assigned_rows_rejected() {
        let m = split_manifest(&manifest(2, 4), 0.5, 0).unwrap();
        assert!(split_manifest(&m, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn per_class_counts(
            sizes in prop::collection::vec(2usize..30, 1..6),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let rows = sizes.iter().enumerate().flat_map(|(c, &n)| (0..n).map(move |i| SampleRecord {
                path: format!("{c}-{i}"),
                label: format!("L{c}"),
                concept: None,
                split: Split::Unassigned,
            })).collect();
            let m = split_manifest(&Manifest::new(rows).unwrap(), fraction, seed).unwrap();
            for (c, &n) in sizes.iter().enumerate() {
                let label = format!("L{c}");
                let expected = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
                prop_assert_eq!(count(&m, &label, Split::Train), expected);
                prop_assert_eq!(count(&m, &label, Split::Test), n - expected);
            }
        }
    }
}
