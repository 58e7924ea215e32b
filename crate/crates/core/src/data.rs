//! Tabular data: CSV ingestion, min-max normalization, splits, feature
//! subsets and synthetic data.
//!
//! Files follow the credit-card fraud layout: a `Time` column (ignored as a
//! feature), numeric feature columns, and a `Class` column with 1 for fraud.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};
use crate::rng::{stream, Stream};

pub const TIME_COLUMN: &str = "Time";
pub const CLASS_COLUMN: &str = "Class";

/// One transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Zero-based position in the source file.
    pub id: u64,
    pub time: f64,
    pub features: Vec<f64>,
    /// `true` for the anomalous (fraud) class.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Sample>,
    /// Bounds the features were normalized with, if any.
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Sample>) -> Result<Self> {
        let dim = feature_names.len();
        for r in &rows {
            ensure_arg!(
                r.features.len() == dim,
                "row {} has {} features, expected {dim}",
                r.id,
                r.features.len()
            );
        }
        Ok(Self { feature_names, rows, normalization: None })
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_anomalous(&self) -> usize {
        self.rows.iter().filter(|r| r.label).count()
    }

    pub fn features(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.iter().map(|r| r.features.as_slice())
    }

    fn with_rows(&self, rows: Vec<Sample>) -> Self {
        Self { feature_names: self.feature_names.clone(), rows, normalization: self.normalization.clone() }
    }
}

/// Reads a CSV file with a header row. `Time` is dropped, `Class` becomes
/// the label and every other column is a numeric feature.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let class_col = header.iter().position(|h| h == CLASS_COLUMN).ok_or_else(|| Error::Parse {
        row: 0,
        column: CLASS_COLUMN.into(),
        message: "missing column".into(),
    })?;
    let time_col = header.iter().position(|h| h == TIME_COLUMN);
    let feature_cols: Vec<usize> =
        (0..header.len()).filter(|&c| c != class_col && Some(c) != time_col).collect();
    let feature_names = feature_cols.iter().map(|&c| header[c].to_string()).collect();

    let parse = |record: &csv::StringRecord, row: usize, col: usize| -> Result<f64> {
        let cell = record.get(col).unwrap_or("");
        cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            row,
            column: header[col].to_string(),
            message: format!("not a finite number: {cell:?}"),
        })
    };

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let features = feature_cols.iter().map(|&c| parse(&record, row, c)).collect::<Result<Vec<_>>>()?;
        let time = match time_col {
            Some(c) => parse(&record, row, c)?,
            None => 0.0,
        };
        let class = parse(&record, row, class_col)?;
        if class != 0.0 && class != 1.0 {
            return Err(Error::Parse {
                row,
                column: CLASS_COLUMN.into(),
                message: format!("class must be 0 or 1, got {class}"),
            });
        }
        let label = class == 1.0;
        rows.push(Sample { id: i as u64, time, features, label });
    }
    Dataset::new(feature_names, rows)
}

/// Checks for the 29 credit-card features `V1..V28, Amount`.
pub fn check_creditcard_schema(data: &Dataset) -> Result<()> {
    let present: HashSet<&str> = data.feature_names.iter().map(String::as_str).collect();
    let missing: Vec<String> = (1..=28)
        .map(|i| format!("V{i}"))
        .chain(std::iter::once("Amount".to_string()))
        .filter(|c| !present.contains(c.as_str()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Parse { row: 0, column: missing.join(","), message: "missing credit-card columns".into() })
    }
}

pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![TIME_COLUMN.to_string()];
    header.extend(data.feature_names.iter().cloned());
    header.push(CLASS_COLUMN.into());
    w.write_record(&header)?;
    for r in &data.rows {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(r.time.to_string());
        rec.extend(r.features.iter().map(|v| v.to_string()));
        rec.push(if r.label { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    write_csv(data, File::create(path)?)
}

/// Per-feature min-max bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    pub fn fit(data: &Dataset) -> Result<Self> {
        ensure_arg!(!data.is_empty(), "cannot fit normalization on an empty dataset");
        let mut min = vec![f64::INFINITY; data.dim()];
        let mut max = vec![f64::NEG_INFINITY; data.dim()];
        for f in data.features() {
            for (j, &v) in f.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Maps into `[0, 1]`; values outside the fitted range are clipped and
    /// constant features map to 0.
    pub fn apply_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_arg!(
            x.len() == self.dim(),
            "row has {} features, normalization expects {}",
            x.len(),
            self.dim()
        );
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
            .collect())
    }

    pub fn invert_row(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.min.iter().zip(&self.max)).map(|(&v, (&lo, &hi))| lo + v * (hi - lo)).collect()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let rows = data
            .rows
            .iter()
            .map(|r| Ok(Sample { features: self.apply_row(&r.features)?, ..r.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let mut out = data.with_rows(rows);
        out.normalization = Some(self.clone());
        Ok(out)
    }
}

/// Fits bounds on `data` and applies them to it.
pub fn normalize(data: &Dataset) -> Result<(Dataset, Normalization)> {
    let norm = Normalization::fit(data)?;
    Ok((norm.apply(data)?, norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    /// Share of the non-anomalous rows used for training.
    pub train_fraction: f64,
    /// Share of the anomalous rows used for threshold calibration; the rest
    /// go to the test split.
    pub calibration_fraction: f64,
    /// Anomalous share of the resampled test split.
    pub test_fraud_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.7, calibration_fraction: 0.5, test_fraud_fraction: 0.25, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_fraction", self.train_fraction),
            ("calibration_fraction", self.calibration_fraction),
            ("test_fraud_fraction", self.test_fraud_fraction),
        ] {
            ensure_arg!(v > 0.0 && v < 1.0, "{name} must lie in (0, 1), got {v}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    /// Non-anomalous rows only.
    pub train: Dataset,
    /// Anomalous rows plus an equal number of normal rows.
    pub calibration: Dataset,
    /// Resampled to `test_fraud_fraction` anomalous rows.
    pub test: Dataset,
}

/// Disjoint train / calibration / test splits.
pub fn make_splits(data: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let mut rng = stream(spec.seed, Stream::Split);
    let (mut frauds, mut normals): (Vec<&Sample>, Vec<&Sample>) = data.rows.iter().partition(|r| r.label);
    ensure_arg!(
        frauds.len() >= 2,
        "need at least 2 anomalous rows for calibration and test, got {}",
        frauds.len()
    );
    frauds.shuffle(&mut rng);
    normals.shuffle(&mut rng);

    let n_train = ((spec.train_fraction * normals.len() as f64).round() as usize).max(1);
    ensure_arg!(n_train < normals.len(), "train split leaves no normal rows for evaluation");
    let (train, pool) = normals.split_at(n_train);

    let n_cal_f =
        ((spec.calibration_fraction * frauds.len() as f64).round() as usize).clamp(1, frauds.len() - 1);
    ensure_arg!(
        pool.len() > n_cal_f,
        "only {} held-out normal rows for {n_cal_f} calibration anomalies",
        pool.len()
    );
    let (cal_f, test_f) = frauds.split_at(n_cal_f);
    let (cal_n, pool) = pool.split_at(n_cal_f);

    let f = spec.test_fraud_fraction;
    let normals_needed = |k: usize| ((k as f64) * (1.0 - f) / f).round() as usize;
    let mut n_test_f = test_f.len();
    while n_test_f > 0 && normals_needed(n_test_f) > pool.len() {
        n_test_f -= 1;
    }
    ensure_arg!(n_test_f > 0, "too few held-out normal rows to build the test split");
    let n_test_n = normals_needed(n_test_f);

    let collect = |parts: &[&[&Sample]]| -> Vec<Sample> {
        let mut rows: Vec<Sample> = parts.iter().flat_map(|p| p.iter().map(|s| (*s).clone())).collect();
        rows.sort_by_key(|s| s.id);
        rows
    };
    Ok(Splits {
        train: data.with_rows(collect(&[train])),
        calibration: data.with_rows(collect(&[cal_f, cal_n])),
        test: data.with_rows(collect(&[&test_f[..n_test_f], &pool[..n_test_n]])),
    })
}

/// Projects onto the given feature columns, in the given order.
pub fn select_features(data: &Dataset, indices: &[usize]) -> Result<Dataset> {
    ensure_arg!(!indices.is_empty(), "feature selection is empty");
    let mut seen = HashSet::new();
    for &i in indices {
        ensure_arg!(i < data.dim(), "feature index {i} out of range (dim {})", data.dim());
        ensure_arg!(seen.insert(i), "duplicate feature index {i}");
    }
    let rows = data
        .rows
        .iter()
        .map(|r| Sample { features: indices.iter().map(|&i| r.features[i]).collect(), ..r.clone() })
        .collect();
    let normalization = data.normalization.as_ref().map(|n| Normalization {
        min: indices.iter().map(|&i| n.min[i]).collect(),
        max: indices.iter().map(|&i| n.max[i]).collect(),
    });
    Ok(Dataset {
        feature_names: indices.iter().map(|&i| data.feature_names[i].clone()).collect(),
        rows,
        normalization,
    })
}

/// Parameters of the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_normal: usize,
    pub n_anomalous: usize,
    pub dim: usize,
    pub seed: u64,
    /// Per-feature mean of the normal class; defaults to an even spread over
    /// `[0.25, 0.75]`.
    pub mean: Option<Vec<f64>>,
    pub std: f64,
    /// Weight of the shared factor in every normal feature.
    pub correlation: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n_normal: 2000, n_anomalous: 200, dim: 6, seed: 0, mean: None, std: 0.08, correlation: 0.6 }
    }
}

impl SynthSpec {
    pub fn resolved_mean(&self) -> Vec<f64> {
        self.mean.clone().unwrap_or_else(|| {
            (0..self.dim).map(|j| 0.25 + 0.5 * (j as f64 + 0.5) / self.dim as f64).collect()
        })
    }
}

/// Normal rows from a correlated Gaussian clipped to `[0, 1]`, anomalies
/// uniform on `[0, 1]^dim`. Rows are interleaved in random order.
pub fn synth_dataset(spec: &SynthSpec) -> Result<Dataset> {
    ensure_arg!(spec.dim >= 1, "dimension must be at least 1");
    ensure_arg!(spec.std >= 0.0, "std must be non-negative");
    ensure_arg!((0.0..=1.0).contains(&spec.correlation), "correlation must lie in [0, 1]");
    let mean = spec.resolved_mean();
    ensure_arg!(mean.len() == spec.dim, "mean has {} entries for dim {}", mean.len(), spec.dim);

    let mut rng = stream(spec.seed, Stream::Synth);
    let shared = spec.correlation.sqrt();
    let own = (1.0 - spec.correlation).sqrt();
    let mut rows = Vec::with_capacity(spec.n_normal + spec.n_anomalous);
    for _ in 0..spec.n_normal {
        let s: f64 = rng.sample(StandardNormal);
        let features = mean
            .iter()
            .enumerate()
            .map(|(j, &mu)| {
                let e: f64 = rng.sample(StandardNormal);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                (mu + spec.std * (sign * shared * s + own * e)).clamp(0.0, 1.0)
            })
            .collect();
        rows.push((features, false));
    }
    for _ in 0..spec.n_anomalous {
        rows.push(((0..spec.dim).map(|_| rng.random::<f64>()).collect(), true));
    }
    rows.shuffle(&mut rng);
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, (features, label))| Sample { id: i as u64, time: i as f64, features, label })
        .collect();
    Dataset::new((1..=spec.dim).map(|j| format!("V{j}")).collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(values: &[(f64, bool)]) -> Dataset {
        Dataset::new(
            vec!["a".into()],
            values
                .iter()
                .enumerate()
                .map(|(i, &(v, l))| Sample { id: i as u64, time: 0.0, features: vec![v], label: l })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn csv_drops_time_and_reads_class() {
        let text = "Time,V1,V2,Amount,Class\n0,1.5,-2,10.0,0\n1,0.5,3,2.5,\"1\"\n";
        let d = read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.feature_names, vec!["V1", "V2", "Amount"]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.rows[1].features, vec![0.5, 3.0, 2.5]);
        assert!(d.rows[1].label && !d.rows[0].label);
        assert_eq!(d.rows[1].time, 1.0);
    }

    #[test]
    fn header_only_csv_is_empty() {
        let d = read_csv("Time,V1,Class\n".as_bytes()).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.dim(), 1);
    }

    #[test]
    fn text_cell_names_column() {
        let text = "Time,V1,V2,V3,Class\n0,1,2,3,0\n1,1,2,abc,0\n";
        match read_csv(text.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "V3");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_class_column() {
        assert!(matches!(read_csv("Time,V1\n0,1\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(read_csv("V1,Class\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn creditcard_schema_check() {
        let d = read_csv("Time,V1,Class\n".as_bytes()).unwrap();
        let err = check_creditcard_schema(&d).unwrap_err().to_string();
        assert!(err.contains("V2") && err.contains("Amount"));
    }

    #[test]
    fn min_max_examples() {
        let (n, norm) = normalize(&toy(&[(2.0, false), (4.0, false), (6.0, false)])).unwrap();
        let vals: Vec<f64> = n.features().map(|f| f[0]).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
        assert_eq!(norm.apply_row(&[6.0]).unwrap(), vec![1.0]);

        let (n, _) = normalize(&toy(&[(3.0, false), (3.0, true)])).unwrap();
        assert!(n.features().all(|f| f[0] == 0.0));
    }

    #[test]
    fn select_features_cases() {
        let d =
            synth_dataset(&SynthSpec { n_normal: 5, n_anomalous: 1, dim: 8, ..Default::default() }).unwrap();
        let all: Vec<usize> = (0..8).collect();
        assert_eq!(select_features(&d, &all).unwrap(), d);
        let six = select_features(&d, &[7, 0, 3, 1, 2, 5]).unwrap();
        assert_eq!(six.dim(), 6);
        assert_eq!(six.rows[0].features[0], d.rows[0].features[7]);
        assert!(select_features(&d, &[1, 1]).is_err());
        assert!(select_features(&d, &[8]).is_err());
    }

    fn synth(n: usize, a: usize, seed: u64) -> Dataset {
        synth_dataset(&SynthSpec { n_normal: n, n_anomalous: a, seed, ..Default::default() }).unwrap()
    }

    #[test]
    fn synth_properties() {
        let d = synth(50, 0, 1);
        assert!(d.rows.iter().all(|r| !r.label));
        assert_eq!(synth(30, 5, 9), synth(30, 5, 9));

        let spec = SynthSpec::default();
        let d = synth(4000, 0, 2);
        let mean = spec.resolved_mean();
        let n = d.len() as f64;
        for j in 0..spec.dim {
            let m = d.features().map(|f| f[j]).sum::<f64>() / n;
            assert!((m - mean[j]).abs() < 3.0 * spec.std / n.sqrt(), "feature {j}: {m}");
        }
    }

    #[test]
    fn default_splits() {
        let d = synth(2000, 200, 3);
        let s = make_splits(&d, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.n_anomalous(), 0);
        let frac = s.test.n_anomalous() as f64 / s.test.len() as f64;
        assert!(s.test.len() >= 400);
        assert!((0.24..=0.26).contains(&frac), "{frac}");
        assert_eq!(s.calibration.n_anomalous() * 2, s.calibration.len());

        let again = make_splits(&d, &SplitSpec::default()).unwrap();
        assert_eq!(s, again);

        let mut ids: Vec<u64> =
            [&s.train, &s.calibration, &s.test].iter().flat_map(|p| p.rows.iter().map(|r| r.id)).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn splits_need_anomalies() {
        let d = synth(100, 1, 0);
        assert!(make_splits(&d, &SplitSpec::default()).is_err());
    }

    #[test]
    fn csv_write_read_roundtrip() {
        let d = synth(20, 3, 4);
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let d = toy(&values.iter().map(|&v| (v, false)).collect::<Vec<_>>());
            let (n, norm) = normalize(&d).unwrap();
            for (orig, scaled) in d.features().zip(n.features()) {
                prop_assert!((0.0..=1.0).contains(&scaled[0]));
                let back = norm.invert_row(scaled);
                prop_assert!((back[0] - orig[0]).abs() < 1e-12 * (1.0 + orig[0].abs()));
            }
        }

        #[test]
        fn splits_partition_and_balance(seed in 0u64..50, n_anom in 4usize..60) {
            let d = synth(600, n_anom, seed);
            let spec = SplitSpec { seed, ..Default::default() };
            let s = make_splits(&d, &spec).unwrap();
            let total = s.train.len() + s.calibration.len() + s.test.len();
            let mut ids: HashSet<u64> = HashSet::new();
            for part in [&s.train, &s.calibration, &s.test] {
                for r in &part.rows {
                    prop_assert!(ids.insert(r.id));
                }
            }
            prop_assert_eq!(ids.len(), total);
            let k = s.test.n_anomalous() as f64;
            let expected = spec.test_fraud_fraction * s.test.len() as f64;
            prop_assert!((k - expected).abs() <= 1.0);
        }
    }
}
