//! Synthetic benchmark datasets with known ground-truth graphs.
//!
//! Four families: two 4-variable nonlinear SEMs (Gaussian and Poisson
//! noise) plus lagged-only versions of each with no contemporaneous edges.
//! Generation records the realized noise so signal-to-noise ratios can be
//! measured afterwards, and a bisection solver retargets the noise scale
//! to a requested average SNR.

use std::str::FromStr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::preprocess::TimeSeriesDataset;
use crate::{TemporalGraph, Tensor};

/// Deepest lag used by any family equation (t-5).
pub const FAMILY_L_MAX: usize = 5;
const NUM_VARS: usize = 4;
const SNR_PROBE_LEN: usize = 2000;
const SNR_TOLERANCE: f64 = 0.10;
const SNR_MAX_BISECTIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Dataset1,
    Dataset2,
    Dataset1LaggedOnly,
    Dataset2LaggedOnly,
}

impl Family {
    pub fn n(&self) -> usize {
        NUM_VARS
    }

    pub fn l_max(&self) -> usize {
        FAMILY_L_MAX
    }

    pub fn names(&self) -> Vec<String> {
        (1..=NUM_VARS).map(|i| format!("S{i}")).collect()
    }

    fn has_contemporaneous(&self) -> bool {
        matches!(self, Family::Dataset1 | Family::Dataset2)
    }

    /// Ground-truth edges as `(from, lag, to)` read off the equations.
    pub fn true_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut edges = vec![
            (0, 2, 0), // S1(t-2) -> S1
            (0, 5, 0), // S1(t-5) -> S1
            (0, 1, 1), // S1(t-1) -> S2
            (0, 1, 2), // S1(t-1) -> S3
            (0, 1, 3), // S1(t-1) -> S4
            (2, 1, 3), // S3(t-1) -> S4
            (3, 1, 3), // S4(t-1) -> S4
        ];
        if self.has_contemporaneous() {
            edges.push((0, 0, 1)); // S1(t) -> S2
            edges.push((2, 0, 3)); // S3(t) -> S4
        }
        edges.sort_unstable();
        edges
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synth1" => Ok(Family::Dataset1),
            "synth2" => Ok(Family::Dataset2),
            "synth1-lagged" => Ok(Family::Dataset1LaggedOnly),
            "synth2-lagged" => Ok(Family::Dataset2LaggedOnly),
            other => Err(format!(
                "unknown family {other:?} (synth1|synth2|synth1-lagged|synth2-lagged)"
            )),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Dataset1 => "synth1",
            Family::Dataset2 => "synth2",
            Family::Dataset1LaggedOnly => "synth1-lagged",
            Family::Dataset2LaggedOnly => "synth2-lagged",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub family: Family,
    /// Rows returned after burn-in discard.
    pub length: usize,
    pub burn_in: usize,
    /// Global multiplier on every noise term. Zero means noiseless.
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(family: Family, length: usize, seed: u64) -> Self {
        SyntheticSpec {
            family,
            length,
            burn_in: 100,
            noise_scale: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.length < FAMILY_L_MAX {
            return Err(DataError::Spec(format!(
                "length {} is below the family l_max {FAMILY_L_MAX}",
                self.length
            )));
        }
        if self.burn_in < FAMILY_L_MAX {
            return Err(DataError::Spec(format!(
                "burn_in {} is below the family l_max {FAMILY_L_MAX}",
                self.burn_in
            )));
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(DataError::Spec(format!(
                "noise_scale {} must be finite and non-negative",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

/// Binary ground-truth graph plus its lag-collapsed summary.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: TemporalGraph,
    /// `summary[i][j]` = any edge i -> j at any lag (0 included).
    pub summary: Vec<Vec<bool>>,
}

pub fn ground_truth(family: Family) -> GroundTruth {
    let mut graph = TemporalGraph::zeros(family.names(), family.l_max());
    let mut summary = vec![vec![false; family.n()]; family.n()];
    for (from, lag, to) in family.true_edges() {
        graph.set_weight(from, lag, to, 1.0);
        summary[from][to] = true;
    }
    GroundTruth { graph, summary }
}

/// Structural equations. The S2 equations use the bounded negative
/// exponent matching the rest of the system; see README on dataset
/// construction.
pub mod equations {
    fn bump(v: f64) -> f64 {
        (-v * v / 2.0).exp()
    }

    pub fn d1_s1(t: f64, s1_lag2: f64, s1_lag5: f64) -> f64 {
        2.0 * ((t / 10.0).cos() + ((s1_lag2 - s1_lag5).abs() + 1.0).ln())
    }

    pub fn d1_s2(s1_lag1: f64, s1_now: f64) -> f64 {
        12.0 * bump(s1_lag1) - 4.0 * bump(s1_now)
    }

    pub fn d1_s2_lagged(s1_lag1: f64) -> f64 {
        12.0 * bump(s1_lag1)
    }

    pub fn d1_s3(s1_lag1: f64) -> f64 {
        -10.5 * bump(s1_lag1)
    }

    pub fn d1_s4(s1_lag1: f64, s3_lag1: f64, s4_lag1: f64, s3_now: f64) -> f64 {
        -11.5 * bump(s1_lag1) + 13.5 * bump(s3_lag1) + 1.2 * bump(s4_lag1) - 5.0 * bump(s3_now)
    }

    pub fn d1_s4_lagged(s1_lag1: f64, s3_lag1: f64, s4_lag1: f64) -> f64 {
        -11.5 * bump(s1_lag1) + 13.5 * bump(s3_lag1) + 1.2 * bump(s4_lag1)
    }

    pub fn d2_s1(s1_lag2: f64, s1_lag5: f64) -> f64 {
        0.7 * (-(s1_lag2 * s1_lag2) * (s1_lag5 * s1_lag5) / 2.0).exp()
    }

    pub fn d2_s2(s1_lag1: f64, s1_now: f64) -> f64 {
        2.0 * bump(s1_lag1) + 0.5 * bump(s1_now)
    }

    pub fn d2_s2_lagged(s1_lag1: f64) -> f64 {
        2.0 * bump(s1_lag1)
    }

    pub fn d2_s3(s1_lag1: f64) -> f64 {
        -5.05 * bump(s1_lag1)
    }

    pub fn d2_s4(s1_lag1: f64, s3_lag1: f64, s4_lag1: f64, s3_now: f64) -> f64 {
        -1.15 * bump(s1_lag1) + 2.35 * bump(s3_lag1) + 1.5 * bump(s4_lag1) + 3.0 * bump(s3_now)
    }

    pub fn d2_s4_lagged(s1_lag1: f64, s3_lag1: f64, s4_lag1: f64) -> f64 {
        -1.15 * bump(s1_lag1) + 2.35 * bump(s3_lag1) + 1.5 * bump(s4_lag1)
    }
}

/// Per-equation multipliers on the raw noise draw.
fn noise_coefficients(family: Family) -> [f64; NUM_VARS] {
    match family {
        Family::Dataset1 | Family::Dataset1LaggedOnly => [0.1, 1.0, 1.0, 1.0],
        Family::Dataset2 | Family::Dataset2LaggedOnly => [1.0, 1.0, 1.0, 1.0],
    }
}

/// Simulates the family, returning the dataset (with noise record) and its
/// ground truth. Deterministic in the spec.
pub fn generate(spec: &SyntheticSpec) -> Result<(TimeSeriesDataset, GroundTruth), DataError> {
    spec.validate()?;
    let total = spec.burn_in + spec.length;
    let mut values = vec![[0.0f64; NUM_VARS]; total];
    let mut noises = vec![[0.0f64; NUM_VARS]; total];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coef = noise_coefficients(spec.family);
    let gaussian = matches!(
        spec.family,
        Family::Dataset1 | Family::Dataset1LaggedOnly
    );
    let poisson = Poisson::new(1.0).expect("rate 1 is valid");

    // Seed rows: i.i.d. standard Gaussian initial conditions.
    for row in values.iter_mut().take(FAMILY_L_MAX) {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    for t in FAMILY_L_MAX..total {
        let mut eps = [0.0f64; NUM_VARS];
        for (j, e) in eps.iter_mut().enumerate() {
            let raw: f64 = if gaussian {
                StandardNormal.sample(&mut rng)
            } else {
                // Centered Poisson(1): integer draws shifted to zero mean.
                let p: f64 = poisson.sample(&mut rng);
                p - 1.0
            };
            *e = spec.noise_scale * coef[j] * raw;
        }
        let lag = |j: usize, ell: usize| values[t - ell][j];
        let signals = match spec.family {
            Family::Dataset1 | Family::Dataset1LaggedOnly => {
                let s1 = equations::d1_s1(t as f64, lag(0, 2), lag(0, 5));
                let s1_now = s1 + eps[0];
                let (s2, s3);
                let s4;
                if spec.family == Family::Dataset1 {
                    s2 = equations::d1_s2(lag(0, 1), s1_now);
                    s3 = equations::d1_s3(lag(0, 1));
                    let s3_now = s3 + eps[2];
                    s4 = equations::d1_s4(lag(0, 1), lag(2, 1), lag(3, 1), s3_now);
                } else {
                    s2 = equations::d1_s2_lagged(lag(0, 1));
                    s3 = equations::d1_s3(lag(0, 1));
                    s4 = equations::d1_s4_lagged(lag(0, 1), lag(2, 1), lag(3, 1));
                }
                [s1, s2, s3, s4]
            }
            Family::Dataset2 | Family::Dataset2LaggedOnly => {
                let s1 = equations::d2_s1(lag(0, 2), lag(0, 5));
                let s1_now = s1 + eps[0];
                let (s2, s3);
                let s4;
                if spec.family == Family::Dataset2 {
                    s2 = equations::d2_s2(lag(0, 1), s1_now);
                    s3 = equations::d2_s3(lag(0, 1));
                    let s3_now = s3 + eps[2];
                    s4 = equations::d2_s4(lag(0, 1), lag(2, 1), lag(3, 1), s3_now);
                } else {
                    s2 = equations::d2_s2_lagged(lag(0, 1));
                    s3 = equations::d2_s3(lag(0, 1));
                    s4 = equations::d2_s4_lagged(lag(0, 1), lag(2, 1), lag(3, 1));
                }
                [s1, s2, s3, s4]
            }
        };
        for j in 0..NUM_VARS {
            values[t][j] = signals[j] + eps[j];
            noises[t][j] = eps[j];
        }
    }

    let mut flat_values = Vec::with_capacity(spec.length * NUM_VARS);
    let mut flat_noise = Vec::with_capacity(spec.length * NUM_VARS);
    for t in spec.burn_in..total {
        for j in 0..NUM_VARS {
            let v = values[t][j];
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: t - spec.burn_in,
                    col: j,
                });
            }
            flat_values.push(v);
            flat_noise.push(noises[t][j]);
        }
    }
    let mut dataset = TimeSeriesDataset::new(
        spec.family.names(),
        Tensor::from_data(&[spec.length, NUM_VARS], flat_values)
            .expect("length accounting is consistent"),
    );
    dataset.noise = Some(
        Tensor::from_data(&[spec.length, NUM_VARS], flat_noise)
            .expect("length accounting is consistent"),
    );
    Ok((dataset, ground_truth(spec.family)))
}

fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut count = 0usize;
    let mut mean = 0.0;
    for v in values.clone() {
        count += 1;
        mean += v;
    }
    if count < 2 {
        return 0.0;
    }
    mean /= count as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    ss / (count - 1) as f64
}

/// Per-variable signal-to-noise ratio using the recorded noise
/// realizations. Noiseless variables report `f64::INFINITY`.
pub fn measure_snr(data: &TimeSeriesDataset) -> Result<Vec<f64>, DataError> {
    let noise = data.noise.as_ref().ok_or(DataError::MissingNoiseRecord)?;
    let (rows, cols) = (data.rows(), data.cols());
    let mut out = Vec::with_capacity(cols);
    for j in 0..cols {
        let signal_var = sample_variance((0..rows).map(|r| data.values.get2(r, j) - noise.get2(r, j)));
        let noise_var = sample_variance((0..rows).map(|r| noise.get2(r, j)));
        out.push(if noise_var == 0.0 {
            f64::INFINITY
        } else {
            signal_var / noise_var
        });
    }
    Ok(out)
}

fn average_snr_at(spec: &SyntheticSpec, noise_scale: f64) -> Result<f64, DataError> {
    let probe = SyntheticSpec {
        noise_scale,
        length: SNR_PROBE_LEN,
        ..*spec
    };
    let (data, _) = generate(&probe)?;
    let snrs = measure_snr(&data)?;
    Ok(snrs.iter().sum::<f64>() / snrs.len() as f64)
}

/// Solves for the noise scale whose generated average SNR is within 10% of
/// `target_avg_snr`, by bisection over a 2000-step probe run.
pub fn snr_variant(
    base: &SyntheticSpec,
    target_avg_snr: f64,
) -> Result<SyntheticSpec, DataError> {
    base.validate()?;
    if target_avg_snr <= 0.0 || !target_avg_snr.is_finite() {
        return Err(DataError::Spec(format!(
            "target average SNR must be positive and finite, got {target_avg_snr}"
        )));
    }
    let within = |snr: f64| (snr - target_avg_snr).abs() <= SNR_TOLERANCE * target_avg_snr;

    // SNR falls as noise grows; bracket the target between lo and hi scales.
    let mut lo = if base.noise_scale > 0.0 {
        base.noise_scale
    } else {
        1.0
    };
    let mut snr_lo = average_snr_at(base, lo)?;
    if within(snr_lo) {
        return Ok(SyntheticSpec {
            noise_scale: lo,
            ..*base
        });
    }
    for _ in 0..60 {
        if snr_lo > target_avg_snr {
            break;
        }
        lo /= 2.0;
        snr_lo = average_snr_at(base, lo)?;
        if within(snr_lo) {
            return Ok(SyntheticSpec {
                noise_scale: lo,
                ..*base
            });
        }
    }
    let mut hi = lo;
    let mut snr_hi = snr_lo;
    for _ in 0..60 {
        if snr_hi < target_avg_snr {
            break;
        }
        hi *= 2.0;
        snr_hi = average_snr_at(base, hi)?;
        if within(snr_hi) {
            return Ok(SyntheticSpec {
                noise_scale: hi,
                ..*base
            });
        }
    }
    if !(snr_lo > target_avg_snr && snr_hi < target_avg_snr) {
        return Err(DataError::SnrConvergence {
            target: target_avg_snr,
            steps: 0,
            best: snr_lo,
        });
    }

    // Bisect toward the exact target, remembering the closest scale; stop
    // once the bracket is tight. Must end inside the 10% band.
    let mut best_scale = None;
    let mut best_snr = snr_lo;
    for _ in 0..SNR_MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let snr_mid = average_snr_at(base, mid)?;
        if (snr_mid - target_avg_snr).abs() < (best_snr - target_avg_snr).abs() {
            best_snr = snr_mid;
            if within(snr_mid) {
                best_scale = Some(mid);
            }
        }
        if snr_mid > target_avg_snr {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-3 * hi {
            break;
        }
    }
    match best_scale {
        Some(noise_scale) => Ok(SyntheticSpec {
            noise_scale,
            ..*base
        }),
        None => Err(DataError::SnrConvergence {
            target: target_avg_snr,
            steps: SNR_MAX_BISECTIONS,
            best: best_snr,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d1_s3_hits_minus_10_5_when_parent_is_zero() {
        assert_eq!(equations::d1_s3(0.0), -10.5);
    }

    #[test]
    fn d2_s1_hits_0_7_when_lag_product_is_zero() {
        assert_eq!(equations::d2_s1(0.0, 3.7), 0.7);
        assert_eq!(equations::d2_s1(2.1, 0.0), 0.7);
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let spec = SyntheticSpec::new(Family::Dataset1, 200, 7);
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.noise, b.noise);
        let other = SyntheticSpec { seed: 8, ..spec };
        let (c, _) = generate(&other).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn generated_data_is_finite_for_all_families() {
        for family in [
            Family::Dataset1,
            Family::Dataset2,
            Family::Dataset1LaggedOnly,
            Family::Dataset2LaggedOnly,
        ] {
            let spec = SyntheticSpec::new(family, 500, 3);
            let (data, _) = generate(&spec).unwrap();
            assert!(data.values.validate_finite().is_ok(), "{family}");
            assert_eq!(data.rows(), 500);
            assert_eq!(data.cols(), 4);
        }
    }

    #[test]
    fn rejects_too_short_series() {
        let spec = SyntheticSpec {
            length: 3,
            ..SyntheticSpec::new(Family::Dataset1, 3, 0)
        };
        assert!(matches!(generate(&spec), Err(DataError::Spec(_))));
    }

    #[test]
    fn ground_truth_has_nine_edges_and_acyclic_lag0_block() {
        let gt = ground_truth(Family::Dataset1);
        assert_eq!(gt.graph.edges().len(), 9);
        assert!(gt.graph.contemporaneous_topological_order().is_some());
        // summary collapses to 6 edges
        let count = gt
            .summary
            .iter()
            .flatten()
            .filter(|&&present| present)
            .count();
        assert_eq!(count, 6);
    }

    #[test]
    fn lagged_families_have_no_contemporaneous_edges() {
        for family in [Family::Dataset1LaggedOnly, Family::Dataset2LaggedOnly] {
            let gt = ground_truth(family);
            assert_eq!(gt.graph.edges().len(), 7);
            let block = gt.graph.contemporaneous_block();
            assert!(block.data().iter().all(|&v| v == 0.0), "{family}");
        }
    }

    #[test]
    fn noiseless_run_reports_infinite_snr() {
        let spec = SyntheticSpec {
            noise_scale: 0.0,
            ..SyntheticSpec::new(Family::Dataset1, 200, 1)
        };
        let (data, _) = generate(&spec).unwrap();
        let snrs = measure_snr(&data).unwrap();
        assert!(snrs.iter().all(|s| s.is_infinite()));
    }

    #[test]
    fn pure_noise_variable_has_snr_near_zero() {
        // Hand-built record: values == noise, so the signal is constant 0.
        let noise: Vec<f64> = (0..400).map(|i| ((i * 37 % 100) as f64) / 50.0 - 1.0).collect();
        let mut data = TimeSeriesDataset::new(
            vec!["v".into()],
            Tensor::from_data(&[400, 1], noise.clone()).unwrap(),
        );
        data.noise = Some(Tensor::from_data(&[400, 1], noise).unwrap());
        let snrs = measure_snr(&data).unwrap();
        assert!(snrs[0].abs() < 1e-12);
    }

    #[test]
    fn default_dataset1_snr_is_finite_positive() {
        let spec = SyntheticSpec::new(Family::Dataset1, 10_000, 5);
        let (data, _) = generate(&spec).unwrap();
        let snrs = measure_snr(&data).unwrap();
        for s in &snrs {
            assert!(s.is_finite() && *s > 0.0, "snrs {snrs:?}");
        }
    }

    #[test]
    fn measure_snr_requires_noise_record() {
        let data = TimeSeriesDataset::new(
            vec!["v".into()],
            Tensor::from_data(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap(),
        );
        assert!(matches!(
            measure_snr(&data),
            Err(DataError::MissingNoiseRecord)
        ));
    }

    #[test]
    fn generated_dataset_survives_csv_round_trip() {
        let spec = SyntheticSpec::new(Family::Dataset1, 150, 9);
        let (data, _) = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        crate::preprocess::write_csv(&data, &path).unwrap();
        let back = crate::preprocess::load_csv(&path).unwrap();
        assert_eq!(back.names, data.names);
        for (a, b) in back.values.data().iter().zip(data.values.data()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn snr_variant_hits_low_target() {
        let base = SyntheticSpec::new(Family::Dataset1, 1000, 7);
        let spec = snr_variant(&base, 0.25).unwrap();
        let achieved = average_snr_at(&spec, spec.noise_scale).unwrap();
        assert!(
            (0.225..=0.275).contains(&achieved),
            "achieved {achieved} at scale {}",
            spec.noise_scale
        );
    }

    #[test]
    fn snr_variant_hits_high_target() {
        let base = SyntheticSpec::new(Family::Dataset1, 1000, 7);
        let spec = snr_variant(&base, 0.62).unwrap();
        let achieved = average_snr_at(&spec, spec.noise_scale).unwrap();
        assert!(
            (0.558..=0.682).contains(&achieved),
            "achieved {achieved} at scale {}",
            spec.noise_scale
        );
    }

    #[test]
    fn snr_variant_fixed_point_keeps_scale_near_one() {
        let base = SyntheticSpec::new(Family::Dataset1, 1000, 7);
        let measured = average_snr_at(&base, 1.0).unwrap();
        let spec = snr_variant(&base, measured).unwrap();
        assert!(
            (spec.noise_scale - 1.0).abs() <= 0.10,
            "scale {}",
            spec.noise_scale
        );
    }
}
