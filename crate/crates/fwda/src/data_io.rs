//! CSV files, train/test splits and the synthetic two-Gaussian generator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use fwda_core::rng::{derive_seed, substream};
use fwda_core::{FwdaError, Label, LabeledDataset, SymmetricMatrix};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    /// 0-based.
    Index(usize),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    /// All-digit strings are indices, anything else is a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(n) => f.write_str(n),
            ColumnRef::Index(i) => write!(f, "{i}"),
        }
    }
}

struct Table {
    header: Option<Vec<String>>,
    width: usize,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn resolve(&self, column: &ColumnRef) -> Result<usize> {
        match column {
            ColumnRef::Index(i) if *i < self.width => Ok(*i),
            ColumnRef::Index(i) => Err(Error::ColumnError(format!(
                "column index {i} out of range for {} columns",
                self.width
            ))),
            ColumnRef::Name(name) => match &self.header {
                Some(h) => h.iter().position(|c| c == name).ok_or_else(|| {
                    Error::ColumnError(format!("no column named {name:?} in header"))
                }),
                None => Err(Error::ColumnError(format!(
                    "column {name:?} requested by name but the file has no header"
                ))),
            },
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let (line, column) = match e.kind() {
        csv::ErrorKind::Utf8 { pos, err } => {
            (pos.as_ref().map_or(0, |p| p.line()), err.field() + 1)
        }
        _ => {
            return match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
            }
        }
    };
    Error::CsvValueError {
        line,
        column,
        value: "<invalid UTF-8>".into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut header = None;
    let mut width = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        match width {
            None => {
                width = Some(fields.len());
                if fields.iter().any(|f| f.parse::<f64>().is_err()) {
                    header = Some(fields);
                    continue;
                }
            }
            Some(w) if w != fields.len() => {
                return Err(Error::CsvShapeError {
                    line,
                    expected: w,
                    found: fields.len(),
                })
            }
            Some(_) => {}
        }
        rows.push((line, fields));
    }
    let width = width.ok_or(Error::EmptyInput("CSV file has no rows"))?;
    Ok(Table {
        header,
        width,
        rows,
    })
}

fn parse_value(line: u64, column: usize, cell: &str) -> Result<f64> {
    cell.parse().map_err(|_| Error::CsvValueError {
        line,
        column: column + 1,
        value: cell.to_string(),
    })
}

fn parse_label(line: u64, cell: &str) -> Result<Label> {
    match cell.parse::<f64>() {
        Ok(v) if v == 1.0 => Ok(Label::Positive),
        Ok(v) if v == -1.0 || v == 0.0 => Ok(Label::Negative),
        _ => Err(Error::LabelError {
            line,
            value: cell.to_string(),
        }),
    }
}

/// Reads a labeled dataset. Labels may be `-1/+1` or `0/1`; `0` maps to `-1`.
/// A first row with any non-numeric cell is taken as the header.
pub fn load_csv(path: impl AsRef<Path>, label_column: &ColumnRef) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let label_idx = table.resolve(label_column)?;
    let dim = table.width - 1;
    let mut features = Vec::with_capacity(table.rows.len() * dim);
    let mut labels = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        for (k, cell) in fields.iter().enumerate() {
            if k == label_idx {
                labels.push(parse_label(*line, cell)?);
            } else {
                features.push(parse_value(*line, k, cell)?);
            }
        }
    }
    let data = LabeledDataset::new(dim, features, labels)?;
    match table.header {
        Some(mut names) => {
            names.remove(label_idx);
            Ok(data.with_feature_names(names)?)
        }
        None => Ok(data),
    }
}

/// Unlabeled feature rows, e.g. for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    pub dim: usize,
}

/// Reads feature rows, dropping `drop` if given. Without `drop`, a header
/// column named `label` is dropped.
pub fn load_features(path: impl AsRef<Path>, drop: Option<&ColumnRef>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let skip = match drop {
        Some(c) => Some(table.resolve(c)?),
        None => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == "label")),
    };
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let row = fields
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(k, cell)| parse_value(*line, k, cell))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let names = table.header.map(|mut h| {
        if let Some(s) = skip {
            h.remove(s);
        }
        h
    });
    let dim = table.width - usize::from(skip.is_some());
    Ok(FeatureTable { names, rows, dim })
}

/// Writes `data` with a header row and a trailing `label` column of `-1/1`.
/// Floats use the shortest representation that parses back to the same bits.
pub fn save_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = match data.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..data.dim()).map(|k| format!("f{k}")).collect(),
    };
    header.push("label".into());
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(data.dim() + 1);
    for (row, label) in data.rows().zip(data.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| format!("{v:?}")));
        record.push(label.as_i8().to_string());
        writer
            .write_record(&record)
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Tridiagonal precision with unit diagonal and `rho` next to it.
pub fn banded_precision(dim: usize, rho: f64) -> SymmetricMatrix {
    let mut entries = vec![0.0; dim * dim];
    for j in 0..dim {
        entries[j * dim + j] = 1.0;
        if j + 1 < dim {
            entries[j * dim + j + 1] = rho;
            entries[(j + 1) * dim + j] = rho;
        }
    }
    SymmetricMatrix::from_row_slice(dim, &entries).expect("square by construction")
}

/// Two Gaussian classes sharing the covariance `true_precision⁻¹`, with means
/// `±(mean_separation/2)·e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_per_class: usize,
    /// `None` means [`banded_precision`]`(dim, rho)`.
    pub true_precision: Option<SymmetricMatrix>,
    pub rho: f64,
    pub mean_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 50,
            n_per_class: 40,
            true_precision: None,
            rho: 0.4,
            mean_separation: 3.0,
            seed: 42,
        }
    }
}

/// A generated dataset and the parameters it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub data: LabeledDataset,
    pub true_precision: SymmetricMatrix,
    pub pos_mean: Vec<f64>,
    pub neg_mean: Vec<f64>,
}

impl SyntheticData {
    /// Accuracy of the Bayes rule: `Φ(Δ/2)` with `Δ` the Mahalanobis
    /// distance between the class means.
    pub fn bayes_accuracy(&self) -> f64 {
        let p = self.pos_mean.len();
        let diff: Vec<f64> = self
            .pos_mean
            .iter()
            .zip(&self.neg_mean)
            .map(|(a, b)| a - b)
            .collect();
        let mut q = 0.0;
        for j in 0..p {
            for k in 0..p {
                q += diff[j] * self.true_precision.get(j, k) * diff[k];
            }
        }
        normal_cdf(q.sqrt() / 2.0)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn invalid_spec(msg: String) -> Error {
    FwdaError::InvalidSpec(msg).into()
}

/// Draws `n_per_class` positives then `n_per_class` negatives.
///
/// Row `i` of each class uses its own random stream, so enlarging
/// `n_per_class` keeps the earlier rows.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.dim == 0 {
        return Err(invalid_spec("dimension must be positive".into()));
    }
    if !(spec.mean_separation >= 0.0) || !spec.mean_separation.is_finite() {
        return Err(invalid_spec(format!(
            "mean separation must be finite and non-negative, got {}",
            spec.mean_separation
        )));
    }
    let p = spec.dim;
    let precision = match &spec.true_precision {
        Some(t) => t.clone(),
        None => banded_precision(p, spec.rho),
    };
    if precision.dim() != p {
        return Err(invalid_spec(format!(
            "true precision is {}x{}, dimension is {p}",
            precision.dim(),
            precision.dim()
        )));
    }
    let covariance = precision
        .cholesky()
        .map_err(|_| invalid_spec("true precision is not positive definite".into()))?
        .inverse();
    let factor = covariance
        .cholesky()
        .map_err(|_| invalid_spec("true covariance is not positive definite".into()))?;
    let l = factor.lower();

    let half = spec.mean_separation / 2.0;
    let mut pos_mean = vec![0.0; p];
    let mut neg_mean = vec![0.0; p];
    pos_mean[0] = half;
    neg_mean[0] = -half;

    let n = spec.n_per_class;
    let mut features = Vec::with_capacity(2 * n * p);
    let mut labels = Vec::with_capacity(2 * n);
    let mut z = vec![0.0; p];
    for (label, mean) in [(Label::Positive, &pos_mean), (Label::Negative, &neg_mean)] {
        let stream_seed = derive_seed(spec.seed, &[u64::from(label == Label::Positive)]);
        for i in 0..n {
            let mut rng = substream(stream_seed, i as u64);
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            for j in 0..p {
                let mut x = mean[j];
                for k in 0..=j {
                    x += l[(j, k)] * z[k];
                }
                features.push(x);
            }
            labels.push(label);
        }
    }
    Ok(SyntheticData {
        data: LabeledDataset::new(p, features, labels)?,
        true_precision: precision,
        pos_mean,
        neg_mean,
    })
}

/// Class-balanced disjoint split.
///
/// Each class is shuffled with a seeded stream; the first `n_test_per_class`
/// shuffled members go to the test set and the next `n_train_per_class` to
/// the training set. For a fixed seed the test set therefore does not depend
/// on the training size, and training sets of growing size are nested.
pub fn train_test_split(
    data: &LabeledDataset,
    n_train_per_class: usize,
    n_test_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let need = n_train_per_class + n_test_per_class;
    let mut train = Vec::with_capacity(2 * n_train_per_class);
    let mut test = Vec::with_capacity(2 * n_test_per_class);
    for (stream, class) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        let mut idx = data.indices_of(class);
        if idx.len() < need {
            return Err(Error::InsufficientSamples {
                class,
                have: idx.len(),
                need,
            });
        }
        idx.shuffle(&mut substream(seed, stream as u64));
        let (te, rest) = idx.split_at(n_test_per_class);
        let mut te = te.to_vec();
        let mut tr = rest[..n_train_per_class].to_vec();
        te.sort_unstable();
        tr.sort_unstable();
        test.extend(te);
        train.extend(tr);
    }
    Ok((data.subset(&train), data.subset(&test)))
}
