//! Series ingestion, min-max normalization, context segmentation and
//! sliding-window sample construction.

use std::ops::Range;
use std::path::Path;

use crate::error::{CelError, Result};
use crate::nn::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
}

impl Frequency {
    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Weekly => "weekly",
            Frequency::Monthly => "monthly",
        }
    }
}

/// A univariate series in source order. Timestamps are opaque labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub timestamps: Vec<String>,
    pub values: Vec<f64>,
    pub frequency: Option<Frequency>,
}

impl TimeSeries {
    pub fn new(timestamps: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(CelError::LengthMismatch {
                what: "timestamps vs values",
                left: timestamps.len(),
                right: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CelError::InvalidArgument(format!(
                "value at position {i} is not finite"
            )));
        }
        Ok(Self {
            timestamps,
            values,
            frequency: None,
        })
    }

    pub fn with_frequency(mut self, frequency: Frequency) -> Self {
        self.frequency = Some(frequency);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reads a `date,value` CSV. Row numbers in errors count data rows from 1.
pub fn load_csv(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| CelError::io(path, e))?;
    parse_csv(&text, path)
}

pub fn parse_csv(text: &str, path: &Path) -> Result<TimeSeries> {
    let malformed = |row: usize, message: String| CelError::MalformedRow {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_start_matches('\u{feff}');
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != ["date", "value"] {
        return Err(malformed(0, format!("expected header `date,value`, found `{header}`")));
    }

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(date), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed(row, format!("expected 2 fields in `{line}`")));
        };
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| malformed(row, format!("non-numeric value `{}`", value.trim())))?;
        if !value.is_finite() {
            return Err(malformed(row, format!("non-finite value `{value}`")));
        }
        timestamps.push(date.trim().to_string());
        values.push(value);
    }
    if values.len() < 2 {
        return Err(CelError::TooFewRows {
            path: path.to_path_buf(),
            rows: values.len(),
        });
    }
    TimeSeries::new(timestamps, values)
}

/// Min-max scaling bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams {
    pub x_min: f64,
    pub x_max: f64,
}

impl NormalizationParams {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if x_max > x_min && x_min.is_finite() && x_max.is_finite() {
            Ok(Self { x_min, x_max })
        } else {
            Err(CelError::ConstantSeries)
        }
    }

    pub fn fit_values(values: &[f64]) -> Result<Self> {
        let x_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(x_min, x_max)
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.x_min) / (self.x_max - self.x_min)
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * (self.x_max - self.x_min) + self.x_min
    }
}

/// Global min/max of the whole series.
pub fn fit_normalizer(series: &TimeSeries) -> Result<NormalizationParams> {
    NormalizationParams::fit_values(&series.values)
}

pub fn normalize(x: f64, p: &NormalizationParams) -> f64 {
    p.normalize(x)
}

pub fn denormalize(x: f64, p: &NormalizationParams) -> f64 {
    p.denormalize(x)
}

/// Supervised samples cut from one stretch of normalized values.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub samples: Vec<Sample>,
    pub window: usize,
    /// Series index of each sample's target, aligned with `samples`.
    pub target_indices: Vec<usize>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    /// Earliest series index read by sample `k`'s inputs.
    pub fn first_input_index(&self, k: usize) -> usize {
        let seq_len = self.samples[k].inputs.len();
        self.target_indices[k] + 1 - self.window - seq_len
    }
}

/// Number of samples `make_windows` yields for `len` values.
pub fn window_count(len: usize, window: usize, seq_len: usize) -> usize {
    (len + 1).saturating_sub(window + seq_len)
}

/// Sliding lag windows: sample `t` feeds `seq_len` vectors of `window`
/// consecutive values (step `s` starts at `t + s`) and targets the value
/// right after the last vector.
pub fn make_windows(values: &[f64], window: usize, seq_len: usize) -> Result<WindowedDataset> {
    if window == 0 || seq_len == 0 {
        return Err(CelError::InvalidArgument(
            "window and seq_len must be >= 1".into(),
        ));
    }
    if values.len() < window + seq_len {
        return Err(CelError::InvalidArgument(format!(
            "{} values cannot fill a window of {window} with seq_len {seq_len} and a target",
            values.len()
        )));
    }
    let count = window_count(values.len(), window, seq_len);
    let mut samples = Vec::with_capacity(count);
    let mut target_indices = Vec::with_capacity(count);
    for t in 0..count {
        let inputs = (0..seq_len)
            .map(|s| values[t + s..t + s + window].to_vec())
            .collect();
        let target_idx = t + seq_len - 1 + window;
        samples.push(Sample::new(inputs, values[target_idx]));
        target_indices.push(target_idx);
    }
    Ok(WindowedDataset {
        samples,
        window,
        target_indices,
    })
}

/// Mean and sample standard deviation of the raw values in a context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanStats {
    pub mean: f64,
    pub std: f64,
}

impl SpanStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub id: usize,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    pub raw_span: Range<usize>,
    pub stats: SpanStats,
}

/// Split fraction kept as a ratio so the train cut is exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainFraction {
    pub num: u32,
    pub den: u32,
}

impl TrainFraction {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(CelError::Config(format!(
                "train_frac must lie strictly between 0 and 1, got {num}/{den}"
            )));
        }
        Ok(Self { num, den })
    }

    /// `floor(frac · count)`.
    pub fn of(&self, count: usize) -> usize {
        count * self.num as usize / self.den as usize
    }
}

impl Default for TrainFraction {
    fn default() -> Self {
        Self { num: 4, den: 5 }
    }
}

impl std::fmt::Display for TrainFraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for TrainFraction {
    type Err = CelError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CelError::Config(format!("train_frac must look like `4/5`, got `{s}`"));
        let (num, den) = s.split_once('/').ok_or_else(bad)?;
        let num = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim().parse().map_err(|_| bad())?;
        Self::new(num, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segmentation {
    pub n_contexts: usize,
    pub train_frac: TrainFraction,
    pub window: usize,
    pub seq_len: usize,
}

impl Segmentation {
    pub fn span_len(&self, series_len: usize) -> usize {
        series_len / self.n_contexts.max(1)
    }

    fn check(&self, series_len: usize) -> Result<usize> {
        let too_short = || CelError::TooShort {
            len: series_len,
            n_contexts: self.n_contexts,
            window: self.window,
            seq_len: self.seq_len,
        };
        if self.n_contexts == 0 || self.window == 0 || self.seq_len == 0 {
            return Err(CelError::InvalidArgument(
                "n_contexts, window and seq_len must be >= 1".into(),
            ));
        }
        let span = self.span_len(series_len);
        let count = window_count(span, self.window, self.seq_len);
        let n_train = self.train_frac.of(count);
        // R² on the test split needs at least two samples.
        if n_train == 0 || count < n_train + 2 {
            return Err(too_short());
        }
        Ok(span)
    }
}

/// Cuts the series into `n_contexts` equal spans (remainder dropped) and
/// builds train/test windows inside each span from `norm`-scaled values.
pub fn segment_contexts(
    series: &TimeSeries,
    seg: &Segmentation,
    norm: &NormalizationParams,
) -> Result<Vec<Context>> {
    let span_len = seg.check(series.len())?;
    let mut contexts = Vec::with_capacity(seg.n_contexts);
    for id in 0..seg.n_contexts {
        let raw_span = id * span_len..(id + 1) * span_len;
        let raw = &series.values[raw_span.clone()];
        let scaled: Vec<f64> = raw.iter().map(|&v| norm.normalize(v)).collect();
        let mut all = make_windows(&scaled, seg.window, seg.seq_len)?;
        for idx in all.target_indices.iter_mut() {
            *idx += raw_span.start;
        }
        let n_train = seg.train_frac.of(all.len());
        let test = WindowedDataset {
            samples: all.samples.split_off(n_train),
            window: seg.window,
            target_indices: all.target_indices.split_off(n_train),
        };
        contexts.push(Context {
            id,
            train: all,
            test,
            stats: SpanStats::of(raw),
            raw_span,
        });
    }
    Ok(contexts)
}
