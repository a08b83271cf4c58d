//! Synthetic instances `y = X w* + e` and a delimited-table pipeline.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::theory::GroundTruth;

/// SplitMix64 mix of a base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XScale {
    /// Entries `N(0, 1)`.
    Unit,
    /// Entries `N(0, 1/n)`.
    InvN,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian { sigma: f64 },
    /// Zero-location Laplace with the given scale.
    Laplace { scale: f64 },
    /// `floor(fraction * m)` entries set to `+-magnitude`, the rest zero.
    SparseOutliers { fraction: f64, magnitude: f64 },
}

impl Noise {
    /// Scale parameter recorded in the ground truth.
    pub fn sigma(&self) -> f64 {
        match *self {
            Noise::Gaussian { sigma } => sigma,
            Noise::Laplace { scale } => scale,
            Noise::SparseOutliers { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub m: usize,
    pub n: usize,
    pub x_scale: XScale,
    pub noise: Noise,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParameter("m and n must be positive".into()));
        }
        match self.noise {
            Noise::Gaussian { sigma: s } | Noise::Laplace { scale: s } if !(s >= 0.0 && s.is_finite()) => {
                Err(Error::InvalidParameter(format!("noise scale must be >= 0, got {s}")))
            }
            Noise::SparseOutliers { fraction, .. } if !(0.0..0.5).contains(&fraction) => Err(
                Error::InvalidParameter(format!("outlier fraction must lie in [0, 0.5), got {fraction}")),
            ),
            Noise::SparseOutliers { magnitude, .. } if !(magnitude > 0.0 && magnitude.is_finite()) => Err(
                Error::InvalidParameter(format!("outlier magnitude must be positive, got {magnitude}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub truth: GroundTruth,
}

fn laplace(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let u: f64 = rng.random_range(-0.5..0.5);
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Draws `w*`, then `X` row by row, then the noise, all from `spec.seed`.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let w_star = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let x_std = match spec.x_scale {
        XScale::Unit => 1.0,
        XScale::InvN => 1.0 / (n as f64).sqrt(),
    };
    let mut x = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let g: f64 = rng.sample(StandardNormal);
            x[(i, j)] = x_std * g;
        }
    }

    let mut outlier_mask = None;
    let e = match spec.noise {
        Noise::Gaussian { sigma } => DVector::from_fn(m, |_, _| {
            let g: f64 = rng.sample(StandardNormal);
            sigma * g
        }),
        Noise::Laplace { scale } => DVector::from_fn(m, |_, _| laplace(&mut rng, scale)),
        Noise::SparseOutliers { fraction, magnitude } => {
            let k = (fraction * m as f64).floor() as usize;
            let mut e = DVector::zeros(m);
            let mut mask = vec![false; m];
            for i in index::sample(&mut rng, m, k).into_iter() {
                e[i] = if rng.random_bool(0.5) { magnitude } else { -magnitude };
                mask[i] = true;
            }
            outlier_mask = Some(mask);
            e
        }
    };

    let y = &x * &w_star + &e;
    Ok(Instance {
        x,
        y,
        truth: GroundTruth {
            w_star,
            e,
            sigma: spec.noise.sigma(),
            outlier_mask,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Last,
    Index(usize),
    /// Requires a header row.
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableOptions {
    pub target: TargetColumn,
    pub header: bool,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            target: TargetColumn::Last,
            header: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub feature_names: Option<Vec<String>>,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parse a comma- or whitespace-delimited numeric table. Blank lines and
/// lines starting with `#` are skipped. Row and column numbers in errors are
/// 1-based and refer to the file.
pub fn parse_table(text: &str, opts: &TableOptions) -> Result<Table> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let header: Option<Vec<String>> = if opts.header {
        let (_, l) = lines.next().ok_or_else(|| Error::Parse {
            row: 1,
            column: 1,
            message: "missing header row".into(),
        })?;
        Some(split_fields(l).into_iter().map(String::from).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (lineno, line) in lines {
        let fields = split_fields(line);
        if let Some(w) = width {
            if fields.len() != w {
                return Err(Error::Parse {
                    row: lineno + 1,
                    column: fields.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", fields.len()),
                });
            }
        }
        width = Some(fields.len());
        let mut row = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                row: lineno + 1,
                column: c + 1,
                message: format!("non-numeric cell `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: lineno + 1,
                    column: c + 1,
                    message: format!("non-finite cell `{f}`"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    let width = width.unwrap_or(0);
    if rows.is_empty() || width < 2 {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "table needs at least one row and two columns".into(),
        });
    }
    let target = match &opts.target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(Error::InvalidParameter(format!("target column {i} out of range (width {width})")))
        }
        TargetColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::InvalidParameter(format!("no column named `{name}`")))?,
    };

    let m = rows.len();
    let x = DMatrix::from_fn(m, width - 1, |i, j| rows[i][if j < target { j } else { j + 1 }]);
    let y = DVector::from_fn(m, |i, _| rows[i][target]);
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| *j != target)
            .map(|(_, s)| s)
            .collect()
    });
    Ok(Table { x, y, feature_names })
}

pub fn load_table(path: impl AsRef<Path>, opts: &TableOptions) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text, opts)
}

/// Comma-separated rows `x_1, ..., x_n, y` written with round-trip float formatting.
pub fn write_table(path: impl AsRef<Path>, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "targets",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let mut out = String::new();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let _ = write!(out, "{:?},", x[(i, j)]);
        }
        let _ = writeln!(out, "{:?}", y[i]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnitudeRule {
    /// Multiple of the (post-normalization) train-target standard deviation.
    TargetStdMultiple(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOptions {
    pub train_frac: f64,
    pub outlier_frac: f64,
    pub magnitude: MagnitudeRule,
    /// Standardize features and targets with train statistics (before corruption).
    pub normalize: bool,
    /// Append a constant-1 feature column.
    pub bias: bool,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            train_frac: 0.7,
            outlier_frac: 0.0,
            magnitude: MagnitudeRule::TargetStdMultiple(10.0),
            normalize: false,
            bias: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
    /// Original row index of each train row.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Positions within the train split whose targets were corrupted.
    pub corrupted: Vec<usize>,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

/// Seeded shuffle split; outliers go into train targets only.
pub fn split_and_corrupt(x: &DMatrix<f64>, y: &DVector<f64>, opts: &SplitOptions) -> Result<Splits> {
    let m = x.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            what: "targets",
            expected: m,
            got: y.len(),
        });
    }
    if !(opts.train_frac > 0.0 && opts.train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!("train_frac must lie in (0, 1), got {}", opts.train_frac)));
    }
    if !(0.0..1.0).contains(&opts.outlier_frac) {
        return Err(Error::InvalidParameter(format!(
            "outlier_frac must lie in [0, 1), got {}",
            opts.outlier_frac
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter("need at least two rows to split".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let m_train = ((opts.train_frac * m as f64).round() as usize).clamp(1, m - 1);
    let train_rows = order[..m_train].to_vec();
    let test_rows = order[m_train..].to_vec();

    let take = |rows: &[usize]| {
        (
            DMatrix::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)]),
            DVector::from_fn(rows.len(), |i, _| y[rows[i]]),
        )
    };
    let (mut x_train, mut y_train) = take(&train_rows);
    let (mut x_test, mut y_test) = take(&test_rows);

    if opts.normalize {
        for j in 0..x.ncols() {
            let (mu, sd) = mean_std(x_train.column(j).iter().copied());
            x_train.column_mut(j).apply(|v| *v = (*v - mu) / sd);
            x_test.column_mut(j).apply(|v| *v = (*v - mu) / sd);
        }
        let (mu, sd) = mean_std(y_train.iter().copied());
        y_train.apply(|v| *v = (*v - mu) / sd);
        y_test.apply(|v| *v = (*v - mu) / sd);
    }

    let k = (opts.outlier_frac * m_train as f64).floor() as usize;
    let mut corrupted: Vec<usize> = index::sample(&mut rng, m_train, k).into_vec();
    corrupted.sort_unstable();
    if k > 0 {
        let magnitude = match opts.magnitude {
            MagnitudeRule::TargetStdMultiple(c) => c * mean_std(y_train.iter().copied()).1,
            MagnitudeRule::Absolute(a) => a,
        };
        for &i in &corrupted {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            y_train[i] += sign * magnitude;
        }
    }

    if opts.bias {
        x_train = x_train.insert_column(x.ncols(), 1.0);
        x_test = x_test.insert_column(x.ncols(), 1.0);
    }

    Ok(Splits {
        x_train,
        y_train,
        x_test,
        y_test,
        train_rows,
        test_rows,
        corrupted,
    })
}
