//! Hand-activity histograms over the unit square and their correlation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Hand, KeypointSequence, HAND_LANDMARKS};
use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkSelector {
    /// Landmark 0 of each detected hand.
    #[default]
    HandWrists,
    /// All 21 landmarks of each detected hand.
    AllHands,
}

impl fmt::Display for LandmarkSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LandmarkSelector::HandWrists => "wrists",
            LandmarkSelector::AllHands => "hands",
        })
    }
}

impl FromStr for LandmarkSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wrists" | "hand_wrists" => Ok(LandmarkSelector::HandWrists),
            "hands" | "all_hands" => Ok(LandmarkSelector::AllHands),
            other => Err(Error::Invalid(format!("unknown landmark selector {other:?}"))),
        }
    }
}

/// `size × size` cells; row = y bin, column = x bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityGrid {
    size: usize,
    cells: Vec<f64>,
    /// Number of landmark hits accumulated.
    pub count: u64,
    pub concept: Option<String>,
    pub dataset_id: Option<String>,
}

impl ActivityGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Invalid("grid size must be positive".into()));
        }
        Ok(ActivityGrid {
            size,
            cells: vec![0.0; size * size],
            count: 0,
            concept: None,
            dataset_id: None,
        })
    }

    pub fn from_cells(size: usize, cells: Vec<f64>) -> Result<Self> {
        if size == 0 || cells.len() != size * size {
            return Err(Error::Dimension(format!(
                "{} cells for a {size}×{size} grid",
                cells.len()
            )));
        }
        if cells.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Invalid(
                "grid cells must be finite and non-negative".into(),
            ));
        }
        Ok(ActivityGrid {
            size,
            cells,
            count: 0,
            concept: None,
            dataset_id: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.size + col]
    }

    pub fn mass(&self) -> f64 {
        self.cells.iter().sum()
    }

    fn bin(&self, v: f32) -> usize {
        ((v as f64 * self.size as f64).floor().max(0.0) as usize).min(self.size - 1)
    }

    pub fn add_point(&mut self, x: f32, y: f32) {
        let (row, col) = (self.bin(y), self.bin(x));
        self.cells[row * self.size + col] += 1.0;
        self.count += 1;
    }

    pub fn add_sequence(&mut self, seq: &KeypointSequence, selector: LandmarkSelector) {
        let per_hand = match selector {
            LandmarkSelector::HandWrists => 1,
            LandmarkSelector::AllHands => HAND_LANDMARKS,
        };
        for frame in &seq.frames {
            for hand in [Hand::Left, Hand::Right] {
                if !frame.hand_detected(hand) {
                    continue;
                }
                for l in hand.start()..hand.start() + per_hand {
                    let [x, y, _] = frame.landmark(l);
                    self.add_point(x, y);
                }
            }
        }
    }

    /// Cell-wise sum of two grids of the same size.
    pub fn merge(&mut self, other: &ActivityGrid) -> Result<()> {
        if other.size != self.size {
            return Err(Error::Dimension("merging grids of different size".into()));
        }
        self.cells.iter_mut().zip(&other.cells).for_each(|(a, b)| *a += b);
        self.count += other.count;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.cells.chunks(self.size) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Schema(format!("grid cell {v:?}: {e}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::Schema("grid CSV is not square".into()));
        }
        Self::from_cells(size, rows.into_iter().flatten().collect())
    }

    /// Binary 8-bit PGM, scaled so the largest cell is 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let max = self.cells.iter().copied().fold(0.0, f64::max);
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.cells.iter().map(|&c| {
            if max > 0.0 {
                (c / max * 255.0).round() as u8
            } else {
                0
            }
        }));
        out
    }
}

/// Histogram of the selected hand landmarks of `seqs`.
pub fn accumulate(
    seqs: &[KeypointSequence],
    grid_size: usize,
    selector: LandmarkSelector,
) -> Result<ActivityGrid> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::Invalid("no sequences to accumulate".into()))?;
    let mut grid = ActivityGrid::new(grid_size)?;
    grid.concept = first.concept.clone();
    grid.dataset_id = Some(first.dataset_id.clone());
    for seq in seqs {
        grid.add_sequence(seq, selector);
    }
    Ok(grid)
}

/// [`accumulate`] over the sequences tagged with `concept`.
pub fn accumulate_concept(
    seqs: &[KeypointSequence],
    concept: &str,
    grid_size: usize,
    selector: LandmarkSelector,
) -> Result<ActivityGrid> {
    let matching: Vec<KeypointSequence> = seqs
        .iter()
        .filter(|s| s.concept.as_deref() == Some(concept))
        .cloned()
        .collect();
    if matching.is_empty() {
        return Err(Error::Invalid(format!(
            "no sequences tagged with concept {concept:?}"
        )));
    }
    accumulate(&matching, grid_size, selector)
}

/// Scales cells to sum to one.
pub fn normalize(grid: &ActivityGrid) -> Result<ActivityGrid> {
    let mass = grid.mass();
    if mass <= 0.0 {
        return Err(Error::Invalid("cannot normalize an empty grid".into()));
    }
    let mut out = grid.clone();
    out.cells.iter_mut().for_each(|c| *c /= mass);
    Ok(out)
}

/// Pearson correlation of the flattened grids; 0 if either is constant.
pub fn concept_similarity(a: &ActivityGrid, b: &ActivityGrid) -> Result<f64> {
    if a.size != b.size {
        return Err(Error::Dimension(format!(
            "comparing a {0}×{0} grid with a {1}×{1} grid",
            a.size, b.size
        )));
    }
    let n = a.cells.len() as f64;
    let mean_a = a.mass() / n;
    let mean_b = b.mass() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.cells.iter().zip(&b.cells) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.0);
    }
    Ok((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LandmarkFrame, FRAME_WIDTH, LEFT_HAND_START};

    fn seq_with_left_wrist(points: &[(f32, f32)], concept: &str) -> KeypointSequence {
        let frames = points
            .iter()
            .map(|&(x, y)| {
                let mut c = vec![0.0; FRAME_WIDTH];
                c[LEFT_HAND_START * 3] = x;
                c[LEFT_HAND_START * 3 + 1] = y;
                LandmarkFrame::new(c, [true, false]).unwrap()
            })
            .collect();
        KeypointSequence {
            sample_id: "s".into(),
            dataset_id: "d".into(),
            label: "l".into(),
            concept: Some(concept.into()),
            fps: 25.0,
            frames,
        }
    }

    #[test]
    fn single_point_fills_one_cell() {
        let g = accumulate(
            &[seq_with_left_wrist(&[(0.5, 0.5)], "a")],
            2,
            LandmarkSelector::HandWrists,
        )
        .unwrap();
        assert_eq!(g.cells().iter().filter(|&&c| c != 0.0).count(), 1);
        assert_eq!(g.cell(1, 1), 1.0);
        assert_eq!(g.concept.as_deref(), Some("a"));
    }

    #[test]
    fn right_edge_is_clamped() {
        let g = accumulate(
            &[seq_with_left_wrist(&[(1.0, 0.0)], "a")],
            4,
            LandmarkSelector::HandWrists,
        )
        .unwrap();
        assert_eq!(g.cell(0, 3), 1.0);
    }

    #[test]
    fn undetected_hands_are_skipped() {
        let g = accumulate(
            &[seq_with_left_wrist(&[(0.2, 0.2)], "a")],
            4,
            LandmarkSelector::AllHands,
        )
        .unwrap();
        // 21 left-hand landmarks, right hand absent
        assert_eq!(g.count, 21);
    }

    #[test]
    fn accumulation_is_order_independent() {
        let a = seq_with_left_wrist(&[(0.1, 0.9), (0.3, 0.3)], "a");
        let b = seq_with_left_wrist(&[(0.7, 0.2)], "a");
        let g1 = accumulate(&[a.clone(), b.clone()], 8, LandmarkSelector::HandWrists).unwrap();
        let g2 = accumulate(&[b, a], 8, LandmarkSelector::HandWrists).unwrap();
        assert_eq!(g1.cells(), g2.cells());
    }

    #[test]
    fn concept_filter() {
        let seqs = [
            seq_with_left_wrist(&[(0.1, 0.1)], "a"),
            seq_with_left_wrist(&[(0.9, 0.9)], "b"),
        ];
        let g = accumulate_concept(&seqs, "b", 2, LandmarkSelector::HandWrists).unwrap();
        assert_eq!(g.cell(1, 1), 1.0);
        assert!(accumulate_concept(&seqs, "c", 2, LandmarkSelector::HandWrists).is_err());
        assert!(accumulate(&[], 2, LandmarkSelector::HandWrists).is_err());
    }

    #[test]
    fn normalize_cases() {
        let uniform = ActivityGrid::from_cells(2, vec![3.0; 4]).unwrap();
        assert_eq!(normalize(&uniform).unwrap().cells(), &[0.25; 4]);
        let single = ActivityGrid::from_cells(2, vec![0.0, 5.0, 0.0, 0.0]).unwrap();
        assert_eq!(normalize(&single).unwrap().cell(0, 1), 1.0);
        let once = normalize(&ActivityGrid::from_cells(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let twice = normalize(&once).unwrap();
        assert!((once.mass() - 1.0).abs() < 1e-9);
        for (a, b) in once.cells().iter().zip(twice.cells()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(normalize(&ActivityGrid::new(3).unwrap()).is_err());
    }

    #[test]
    fn similarity_cases() {
        let a = ActivityGrid::from_cells(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = ActivityGrid::from_cells(2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((concept_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // means 1/4; cov = -1/4, var = 3/4 each
        assert!((concept_similarity(&a, &b).unwrap() + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            concept_similarity(&a, &b).unwrap(),
            concept_similarity(&b, &a).unwrap()
        );
        let flat = ActivityGrid::from_cells(2, vec![0.25; 4]).unwrap();
        assert_eq!(concept_similarity(&a, &flat).unwrap(), 0.0);
        let big = ActivityGrid::new(3).unwrap();
        assert!(concept_similarity(&a, &big).is_err());
    }

    #[test]
    fn metadata_does_not_affect_similarity() {
        let mut a = ActivityGrid::from_cells(2, vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        let mut b = ActivityGrid::from_cells(2, vec![0.0, 2.0, 1.0, 0.0]).unwrap();
        let before = concept_similarity(&a, &b).unwrap();
        a.concept = Some("x".into());
        b.concept = Some("y".into());
        assert_eq!(concept_similarity(&a, &b).unwrap(), before);
    }

    #[test]
    fn csv_and_pgm_export() {
        let g = ActivityGrid::from_cells(2, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(g.to_csv(), "0,1\n2,4\n");
        assert_eq!(ActivityGrid::from_csv(&g.to_csv()).unwrap().cells(), g.cells());
        let pgm = g.to_pgm();
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 4..], &[0, 64, 128, 255]);
        assert!(ActivityGrid::from_csv("1,2\n3\n").is_err());
    }
}
