//! CSV ingestion, feature standardization, target-stratified train/test
//! splitting and cross-validation folds.

use std::fmt;
use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("column {0} not found in header")]
    MissingTarget(String),
    #[error("bad numeric value {value:?} at line {row}, column {column:?}")]
    BadNumeric { row: u64, column: String, value: String },
    #[error("column count mismatch: expected {expected}, found {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

/// A column selected by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    fn resolve(&self, headers: &csv::StringRecord) -> Result<usize, DataError> {
        match self {
            Self::Name(name) => headers
                .iter()
                .position(|h| h.trim() == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < headers.len()))
                .ok_or_else(|| DataError::MissingTarget(name.clone())),
            Self::Index(i) if *i < headers.len() => Ok(*i),
            Self::Index(i) => Err(DataError::MissingTarget(i.to_string())),
        }
    }
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    /// Everything parses as a name; a name that is not a header but is a valid
    /// position falls back to the index at resolution time.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::Name(s.trim().to_string()))
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Name(n) => f.write_str(n),
            Self::Index(i) => write!(f, "#{i}"),
        }
    }
}

/// Which CSV columns play which role. Every other column is a feature.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub target: Option<ColumnRef>,
    pub id_col: Option<ColumnRef>,
}

impl CsvOptions {
    pub fn with_target(target: ColumnRef) -> Self {
        Self {
            target: Some(target),
            id_col: None,
        }
    }
}

/// Descriptor matrix with its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DenseMatrix,
    pub targets: DenseVector,
    pub feature_names: Option<Vec<String>>,
    pub target_name: Option<String>,
}

impl Dataset {
    pub fn new(features: DenseMatrix, targets: DenseVector) -> Result<Self, DataError> {
        if features.rows() != targets.len() {
            return Err(DataError::InvalidArgument(format!(
                "{} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidArgument("non-finite target".into()));
        }
        Ok(Self {
            features,
            targets,
            feature_names: None,
            target_name: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Writes a header row and one line per sample, target last.
    /// Same rows restricted to the given feature columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let data = self
            .features
            .row_iter()
            .flat_map(|row| cols.iter().map(move |&j| row[j]))
            .collect();
        Self {
            features: DenseMatrix::from_row_major(self.len(), cols.len(), data).expect("subset of finite values"),
            targets: self.targets.clone(),
            feature_names: self
                .feature_names
                .as_ref()
                .map(|n| cols.iter().map(|&j| n[j].clone()).collect()),
            target_name: self.target_name.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let csv_err = |source| DataError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header: Vec<String> = match &self.feature_names {
            Some(names) => names.clone(),
            None => (0..self.n_features()).map(|j| format!("x{j}")).collect(),
        };
        header.push(self.target_name.clone().unwrap_or_else(|| "y".into()));
        w.write_record(&header).map_err(csv_err)?;
        for (row, y) in self.features.row_iter().zip(self.targets.iter()) {
            let rec = row.iter().chain(std::iter::once(y)).map(|v| v.to_string());
            w.write_record(rec).map_err(csv_err)?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

struct Table {
    features: DenseMatrix,
    feature_names: Vec<String>,
    targets: Option<DenseVector>,
    target_name: Option<String>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    let file = File::open(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => DataError::FileNotFound(path.to_path_buf()),
        _ => DataError::Io {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn read_table(path: &Path, opts: &CsvOptions) -> Result<Table, DataError> {
    let csv_err = |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let target = opts.target.as_ref().map(|t| t.resolve(&headers)).transpose()?;
    let id = opts.id_col.as_ref().map(|c| c.resolve(&headers)).transpose()?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| Some(j) != target && Some(j) != id)
        .collect();

    let parse = |rec: &csv::StringRecord, j: usize| -> Result<f64, DataError> {
        let raw = rec.get(j).unwrap_or("").trim();
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(DataError::BadNumeric {
                row: rec.position().map_or(0, |p| p.line()),
                column: headers[j].trim().to_string(),
                value: raw.to_string(),
            }),
        }
    };

    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        for &j in &feature_cols {
            data.push(parse(&rec, j)?);
        }
        if let Some(t) = target {
            targets.push(parse(&rec, t)?);
        }
        rows += 1;
    }
    let features =
        DenseMatrix::from_row_major(rows, feature_cols.len(), data).expect("parsed values are finite and rectangular");
    Ok(Table {
        features,
        feature_names: feature_cols.iter().map(|&j| headers[j].trim().to_string()).collect(),
        targets: target.map(|_| targets.into()),
        target_name: target.map(|t| headers[t].trim().to_string()),
    })
}

/// Loads a CSV with a header row. The target column becomes `targets`, every
/// other column a feature in file order.
pub fn load_csv(path: &Path, target: &ColumnRef) -> Result<Dataset, DataError> {
    load_csv_with(path, &CsvOptions::with_target(target.clone()))
}

pub fn load_csv_with(path: &Path, opts: &CsvOptions) -> Result<Dataset, DataError> {
    if opts.target.is_none() {
        return Err(DataError::InvalidArgument("a target column is required".into()));
    }
    let t = read_table(path, opts)?;
    Ok(Dataset {
        features: t.features,
        targets: t.targets.expect("target requested"),
        feature_names: Some(t.feature_names),
        target_name: t.target_name,
    })
}

/// Loads only the feature columns (target and id columns, when named, are
/// skipped).
pub fn load_features(path: &Path, opts: &CsvOptions) -> Result<(DenseMatrix, Vec<String>), DataError> {
    let t = read_table(path, opts)?;
    Ok((t.features, t.feature_names))
}

/// Per-column standardization statistics (population convention).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    pub constant_columns: Vec<usize>,
}

impl ScalingStats {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    fn check(&self, cols: usize) -> Result<(), DataError> {
        if cols != self.n_features() {
            return Err(DataError::ColumnMismatch {
                expected: self.n_features(),
                found: cols,
            });
        }
        Ok(())
    }

    /// `(x - mean) / stddev`; constant columns become zero.
    pub fn scale(&self, x: &DenseMatrix) -> Result<DenseMatrix, DataError> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let sd = self.stddevs[j];
                *v = if sd > 0.0 { (*v - self.means[j]) / sd } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// Inverse of [`scale`](Self::scale); constant columns come back as their
    /// mean.
    pub fn unscale(&self, z: &DenseMatrix) -> Result<DenseMatrix, DataError> {
        self.check(z.cols())?;
        let mut out = z.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.stddevs[j] + self.means[j];
            }
        }
        Ok(out)
    }
}

/// Mean and standard deviation of every feature over `rows` only.
pub fn fit_scaling(d: &Dataset, rows: &[usize]) -> Result<ScalingStats, DataError> {
    if rows.is_empty() {
        return Err(DataError::InvalidArgument("scaling needs at least one row".into()));
    }
    let n = d.n_features();
    let count = rows.len() as f64;
    let mut means = vec![0.0; n];
    for &i in rows {
        for (m, v) in means.iter_mut().zip(d.features.row(i)) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= count);
    let mut vars = vec![0.0; n];
    for &i in rows {
        for ((s, v), m) in vars.iter_mut().zip(d.features.row(i)).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    let mut stddevs: Vec<f64> = vars.iter().map(|s| (s / count).sqrt()).collect();
    let mut constant_columns = Vec::new();
    for (j, sd) in stddevs.iter_mut().enumerate() {
        if *sd <= 1e-12 * means[j].abs().max(1.0) {
            *sd = 0.0;
            constant_columns.push(j);
        }
    }
    Ok(ScalingStats {
        means,
        stddevs,
        constant_columns,
    })
}

/// Standardizes the features; targets pass through unchanged.
pub fn apply_scaling(d: &Dataset, s: &ScalingStats) -> Result<Dataset, DataError> {
    Ok(Dataset {
        features: s.scale(&d.features)?,
        ..d.clone()
    })
}

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn rank_by_target(targets: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));
    order
}

/// Target-stratified split: rows sorted by target are cut into
/// `round(m · test_fraction)` consecutive blocks of near-equal size and one
/// row per block, drawn uniformly with the seeded generator, goes to the test
/// set.
pub fn similarity_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPlan, DataError> {
    let m = d.len();
    if m < 4 {
        return Err(DataError::InvalidArgument(format!(
            "need at least 4 rows to split, have {m}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = ((m as f64 * test_fraction).round() as usize).clamp(1, m - 1);
    let order = rank_by_target(&d.targets);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base = m / n_test;
    let extra = m % n_test;
    let mut is_test = vec![false; m];
    let mut start = 0;
    for block in 0..n_test {
        let len = base + usize::from(block < extra);
        let pick = start + rng.gen_range(0..len);
        is_test[order[pick]] = true;
        start += len;
    }
    let (test_indices, train_indices): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| is_test[i]);
    Ok(SplitPlan {
        train_indices,
        test_indices,
    })
}

/// Cross-validation fold id for every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold_assignments: Vec<usize>,
    pub k: usize,
}

impl FoldPlan {
    /// `(training rows, held-out rows)` for one fold.
    pub fn fold(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_assignments.len()).partition(|&i| self.fold_assignments[i] != f)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Systematic target-sorted assignment: the row of rank `r` joins fold
/// `(r + shift) mod k` for a seeded `shift`. `k = m` gives leave-one-out.
pub fn make_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    let m = d.len();
    if k < 2 || m < k {
        return Err(DataError::InvalidArgument(format!(
            "cannot make {k} folds from {m} rows"
        )));
    }
    let shift = ChaCha8Rng::seed_from_u64(seed).gen_range(0..k);
    let mut fold_assignments = vec![0; m];
    for (rank, &row) in rank_by_target(&d.targets).iter().enumerate() {
        fold_assignments[row] = (rank + shift) % k;
    }
    Ok(FoldPlan { fold_assignments, k })
}

/// Copies the header and the selected data rows of `src`, verbatim, into the
/// train and test files.
pub fn write_split_files(src: &Path, plan: &SplitPlan, train: &Path, test: &Path) -> Result<(), DataError> {
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataError::Csv { path, source }
    };
    let mut reader = open_reader(src)?;
    let headers = reader.headers().map_err(csv_err(src))?.clone();
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().map_err(csv_err(src))?;
    for (path, rows) in [(train, &plan.train_indices), (test, &plan.test_indices)] {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        w.write_record(&headers).map_err(csv_err(path))?;
        for &i in rows {
            let rec = records
                .get(i)
                .ok_or_else(|| DataError::InvalidArgument(format!("split row {i} beyond {} records", records.len())))?;
            w.write_record(rec).map_err(csv_err(path))?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}
