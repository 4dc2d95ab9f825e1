//! CSV ingestion, [0,1] normalization, and lagged windowing.

use std::fs;
use std::path::Path;

use crate::error::DataError;
use crate::Tensor;

/// A `T x n` multivariate time series with variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub names: Vec<String>,
    /// Shape `[T, n]`, row-major by time.
    pub values: Tensor,
    /// Per-variable `(min, max)` recorded by [`normalize`].
    pub normalization: Option<Vec<(f64, f64)>>,
    /// Realized noise per cell, recorded by the synthetic generator.
    pub noise: Option<Tensor>,
}

impl TimeSeriesDataset {
    pub fn new(names: Vec<String>, values: Tensor) -> Self {
        TimeSeriesDataset {
            names,
            values,
            normalization: None,
            noise: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.values.shape()[1]
    }
}

/// Lagged samples of shape `[T - l_max, n, l_max + 1]`.
///
/// Column `c` of sample `s` holds the values at absolute time `s + c`, so
/// column `l_max` is the current timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedBatch {
    pub samples: Tensor,
    pub l_max: usize,
    pub names: Vec<String>,
}

impl WindowedBatch {
    pub fn num_samples(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn n(&self) -> usize {
        self.samples.shape()[1]
    }
}

/// Loads a header + numeric rows CSV.
pub fn load_csv(path: &Path) -> Result<TimeSeriesDataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

/// Parses CSV text: first row names, remaining rows numeric cells.
pub fn parse_csv(text: &str) -> Result<TimeSeriesDataset, DataError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DataError::Parse {
        row: 0,
        col: 0,
        message: "empty file".into(),
    })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = names.len();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(DataError::Ragged {
                row: line_no,
                expected: n,
                found: cells.len(),
            });
        }
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                row: line_no,
                col,
                message: format!("not a number: {:?}", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { row: line_no, col });
            }
            data.push(v);
        }
        rows += 1;
    }
    let values = Tensor::from_data(&[rows, n], data)
        .expect("row-count accounting is consistent");
    Ok(TimeSeriesDataset::new(names, values))
}

/// Writes a dataset as CSV with round-trippable float formatting.
pub fn write_csv(dataset: &TimeSeriesDataset, path: &Path) -> Result<(), DataError> {
    let mut out = String::new();
    out.push_str(&dataset.names.join(","));
    out.push('\n');
    let (rows, cols) = (dataset.rows(), dataset.cols());
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", dataset.values.get2(r, c)));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Per-variable min-max scaling to [0,1]; constant columns map to 0.5.
pub fn normalize(dataset: &TimeSeriesDataset) -> Result<TimeSeriesDataset, DataError> {
    let (rows, cols) = (dataset.rows(), dataset.cols());
    if rows < 2 {
        return Err(DataError::InsufficientData {
            required: 1,
            available: rows,
        });
    }
    let mut record = Vec::with_capacity(cols);
    let mut out = dataset.clone();
    for c in 0..cols {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..rows {
            let v = dataset.values.get2(r, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        record.push((lo, hi));
        for r in 0..rows {
            let v = dataset.values.get2(r, c);
            let scaled = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            out.values.set2(r, c, scaled);
        }
    }
    out.normalization = Some(record);
    Ok(out)
}

/// Inverts [`normalize`] using the recorded (min, max) pairs.
pub fn denormalize(dataset: &TimeSeriesDataset) -> Result<TimeSeriesDataset, DataError> {
    let record = dataset
        .normalization
        .as_ref()
        .ok_or_else(|| DataError::Spec("dataset has no normalization record".into()))?;
    let (rows, cols) = (dataset.rows(), dataset.cols());
    let mut out = dataset.clone();
    for (c, &(lo, hi)) in record.iter().enumerate().take(cols) {
        for r in 0..rows {
            let v = dataset.values.get2(r, c);
            let raw = if hi > lo { lo + v * (hi - lo) } else { lo };
            out.values.set2(r, c, raw);
        }
    }
    out.normalization = None;
    Ok(out)
}

/// Builds lagged windows: sample `s` spans rows `s ..= s + l_max`.
pub fn window(dataset: &TimeSeriesDataset, l_max: usize) -> Result<WindowedBatch, DataError> {
    let (rows, cols) = (dataset.rows(), dataset.cols());
    if rows <= l_max {
        return Err(DataError::InsufficientData {
            required: l_max,
            available: rows,
        });
    }
    let num = rows - l_max;
    let width = l_max + 1;
    let mut samples = Tensor::zeros(&[num, cols, width]);
    for s in 0..num {
        for i in 0..cols {
            for c in 0..width {
                samples.set3(s, i, c, dataset.values.get2(s + c, i));
            }
        }
    }
    Ok(WindowedBatch {
        samples,
        l_max,
        names: dataset.names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: &[&str], rows: &[&[f64]]) -> TimeSeriesDataset {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        TimeSeriesDataset::new(
            cols.iter().map(|s| s.to_string()).collect(),
            Tensor::from_data(&[rows.len(), cols.len()], data).unwrap(),
        )
    }

    #[test]
    fn parse_basic_csv() {
        let ds = parse_csv("a,b\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(ds.names, vec!["a", "b"]);
        assert_eq!(ds.rows(), 3);
        assert_eq!(ds.cols(), 2);
        assert_eq!(ds.values.get2(2, 1), 6.0);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv(Path::new("/nonexistent/nope.csv")).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }

    #[test]
    fn parse_reports_bad_cell_position() {
        let err = parse_csv("a,b\n1,2\n3,abc\n").unwrap_err();
        match err {
            DataError::Parse { row, col, .. } => {
                assert_eq!((row, col), (2, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        assert!(matches!(
            parse_csv("a,b\n1,2,3\n"),
            Err(DataError::Ragged { row: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = dataset(
            &["x", "y"],
            &[&[0.1, -2.5e-7], &[13.25, 1.0 / 3.0], &[f64::MIN_POSITIVE, 9.9]],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.values, ds.values);
    }

    #[test]
    fn normalize_scales_to_unit_interval() {
        let ds = dataset(&["x"], &[&[2.0], &[4.0], &[6.0]]);
        let norm = normalize(&ds).unwrap();
        assert_eq!(norm.values.data(), &[0.0, 0.5, 1.0]);
        assert_eq!(norm.normalization.as_ref().unwrap()[0], (2.0, 6.0));
    }

    #[test]
    fn normalize_maps_constant_column_to_half() {
        let ds = dataset(&["x"], &[&[3.0], &[3.0], &[3.0]]);
        let norm = normalize(&ds).unwrap();
        assert_eq!(norm.values.data(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn normalize_keeps_canonical_range_fixed() {
        let ds = dataset(&["x"], &[&[0.0], &[0.25], &[1.0]]);
        let norm = normalize(&ds).unwrap();
        assert_eq!(norm.values.data(), ds.values.data());
    }

    #[test]
    fn denormalize_recovers_originals() {
        let ds = dataset(&["x", "y"], &[&[2.0, -1.0], &[4.0, 0.5], &[6.0, 3.0]]);
        let norm = normalize(&ds).unwrap();
        let back = denormalize(&norm).unwrap();
        for (a, b) in back.values.data().iter().zip(ds.values.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn window_counts_and_indexing_contract() {
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64, 100.0 + t as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let ds = dataset(&["a", "b"], &refs);
        let batch = window(&ds, 4).unwrap();
        assert_eq!(batch.num_samples(), 6);
        assert_eq!(batch.samples.shape(), &[6, 2, 5]);
        // sample 0, column 0 is row 0; column l_max is row l_max
        assert_eq!(batch.samples.get3(0, 0, 0), 0.0);
        assert_eq!(batch.samples.get3(0, 0, 4), 4.0);
        assert_eq!(batch.samples.get3(3, 1, 2), 105.0);
    }

    #[test]
    fn window_with_zero_lag_is_identity_reshape() {
        let ds = dataset(&["a"], &[&[1.0], &[2.0], &[3.0]]);
        let batch = window(&ds, 0).unwrap();
        assert_eq!(batch.num_samples(), 3);
        assert_eq!(batch.samples.shape(), &[3, 1, 1]);
    }

    #[test]
    fn window_requires_more_rows_than_lag() {
        let ds = dataset(&["a"], &[&[1.0], &[2.0]]);
        assert!(matches!(
            window(&ds, 2),
            Err(DataError::InsufficientData { .. })
        ));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// Windowing is a pure reindexing: the original series can be
        /// reconstructed from the windows.
        #[test]
        fn window_reconstructs_the_series(
            rows in 2usize..40,
            cols in 1usize..5,
            l_max in 0usize..6,
            seed in 0u64..1000,
        ) {
            prop_assume!(rows > l_max);
            let mut state = seed;
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let data: Vec<f64> = (0..rows * cols).map(|_| next()).collect();
            let ds = TimeSeriesDataset::new(
                (0..cols).map(|i| format!("v{i}")).collect(),
                Tensor::from_data(&[rows, cols], data).unwrap(),
            );
            let batch = window(&ds, l_max).unwrap();
            // every original cell appears at the documented location
            let samples = batch.num_samples();
            for t in 0..rows {
                for i in 0..cols {
                    let (s, c) = if t < samples { (t, 0) } else { (samples - 1, t - (samples - 1)) };
                    prop_assert_eq!(batch.samples.get3(s, i, c), ds.values.get2(t, i));
                }
            }
            // and every sample cell equals exactly its source cell
            for s in 0..samples {
                for i in 0..cols {
                    for c in 0..=l_max {
                        prop_assert_eq!(batch.samples.get3(s, i, c), ds.values.get2(s + c, i));
                    }
                }
            }
        }

        /// Normalization round-trips through its recorded statistics.
        #[test]
        fn normalize_then_denormalize_recovers(
            rows in 2usize..30,
            cols in 1usize..4,
            seed in 0u64..1000,
        ) {
            let mut state = seed.wrapping_add(17);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 200.0
            };
            let data: Vec<f64> = (0..rows * cols).map(|_| next()).collect();
            let ds = TimeSeriesDataset::new(
                (0..cols).map(|i| format!("v{i}")).collect(),
                Tensor::from_data(&[rows, cols], data).unwrap(),
            );
            let norm = normalize(&ds).unwrap();
            for v in norm.values.data() {
                prop_assert!((0.0..=1.0).contains(v));
            }
            let back = denormalize(&norm).unwrap();
            for (a, b) in back.values.data().iter().zip(ds.values.data()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
