//! Offline estimator runs on synthetic or recorded signals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::differentiator::{build_kernel, EstimatorKernel, EstimatorSpec, SampleBuffer};
use crate::error::{Error, Result};
use crate::simloop::CsvTable;

/// A sampled test signal, possibly with known derivatives.
pub trait Signal: fmt::Debug {
    /// Sample values on the grid `t_k = k h`, `k = 0..count`.
    fn samples(&self, count: usize, period: f64) -> Result<Vec<f64>>;

    /// `[x(t), x'(t), ..., x^(order)(t)]` when known analytically.
    fn derivatives(&self, _t: f64, _order: usize) -> Option<Vec<f64>> {
        None
    }
}

/// `sum c_k t^k`, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    /// `d`-th derivative at `t`, by Horner on the differentiated coefficients.
    fn eval_derivative(&self, t: f64, d: usize) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(d)
            .rev()
            .fold(0.0, |acc, (k, &c)| {
                let falling: f64 = ((k - d + 1)..=k).map(|j| j as f64).product();
                acc * t + c * falling
            })
    }
}

impl Signal for Polynomial {
    fn samples(&self, count: usize, period: f64) -> Result<Vec<f64>> {
        Ok((0..count)
            .map(|k| self.eval_derivative(k as f64 * period, 0))
            .collect())
    }

    fn derivatives(&self, t: f64, order: usize) -> Option<Vec<f64>> {
        Some((0..=order).map(|d| self.eval_derivative(t, d)).collect())
    }
}

/// `a sin(2 pi f t + phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sine {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Signal for Sine {
    fn samples(&self, count: usize, period: f64) -> Result<Vec<f64>> {
        Ok((0..count)
            .map(|k| self.derivatives(k as f64 * period, 0).expect("analytic")[0])
            .collect())
    }

    fn derivatives(&self, t: f64, order: usize) -> Option<Vec<f64>> {
        let w = 2.0 * std::f64::consts::PI * self.frequency;
        let arg = w * t + self.phase;
        Some(
            (0..=order)
                .map(|d| {
                    let shifted = arg + d as f64 * std::f64::consts::FRAC_PI_2;
                    self.amplitude * w.powi(d as i32) * shifted.sin()
                })
                .collect(),
        )
    }
}

/// One column of a CSV file, taken as already sampled at the run period.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSignal {
    pub path: PathBuf,
    pub column: Option<String>,
}

impl Signal for CsvSignal {
    fn samples(&self, count: usize, _period: f64) -> Result<Vec<f64>> {
        let table = CsvTable::read_path(&self.path)?;
        let values = match &self.column {
            Some(name) => table.column(name).ok_or_else(|| {
                Error::config(format!("no column `{name}` in {}", self.path.display()))
            })?,
            None => {
                let idx = if table.header.len() > 1 { 1 } else { 0 };
                table.rows.iter().map(|r| r[idx]).collect()
            }
        };
        if values.len() < count {
            return Err(Error::config(format!(
                "{} has {} samples, {count} needed",
                self.path.display(),
                values.len()
            )));
        }
        Ok(values[..count].to_vec())
    }
}

pub type SignalParser = fn(&str) -> Result<Box<dyn Signal>>;

/// Signal kinds by name; a spec string reads `kind:args`.
#[derive(Clone)]
pub struct SignalRegistry {
    parsers: BTreeMap<String, SignalParser>,
}

impl fmt::Debug for SignalRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.parsers.keys()).finish()
    }
}

fn numbers(args: &str) -> Result<Vec<f64>> {
    args.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("bad number `{s}`: {e}")))
        })
        .collect()
}

impl SignalRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self {
            parsers: BTreeMap::new(),
        };
        reg.register("polynomial", |args| {
            let c = numbers(args)?;
            if c.is_empty() {
                return Err(Error::config("polynomial needs at least one coefficient"));
            }
            Ok(Box::new(Polynomial(c)))
        });
        reg.register("sine", |args| match *numbers(args)?.as_slice() {
            [amplitude, frequency] => Ok(Box::new(Sine {
                amplitude,
                frequency,
                phase: 0.0,
            })),
            [amplitude, frequency, phase] => Ok(Box::new(Sine {
                amplitude,
                frequency,
                phase,
            })),
            _ => Err(Error::config("sine takes amplitude,frequency[,phase]")),
        });
        reg.register("csv", |args| {
            if args.is_empty() {
                return Err(Error::config("csv needs a path"));
            }
            let (path, column) = match args.rsplit_once('#') {
                Some((p, c)) => (p, Some(c.to_string())),
                None => (args, None),
            };
            Ok(Box::new(CsvSignal {
                path: PathBuf::from(path),
                column,
            }))
        });
        reg
    }

    pub fn register(&mut self, name: &str, parser: SignalParser) {
        self.parsers.insert(name.to_string(), parser);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parsers.keys().map(String::as_str)
    }

    /// Parses `polynomial:1,0,2`, `sine:1,0.5[,phase]` or `csv:path[#column]`.
    pub fn parse(&self, spec: &str) -> Result<Box<dyn Signal>> {
        let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
        let parser = self.parsers.get(kind).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::config(format!(
                "unknown signal `{kind}` (known: {})",
                known.join(", ")
            ))
        })?;
        parser(args)
    }
}

/// Estimator run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSettings {
    pub spec: EstimatorSpec,
    pub duration: f64,
    pub noise_std: f64,
    pub seed: u64,
}

/// Error statistics for one derivative order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStats {
    pub order: usize,
    pub max_error: f64,
    pub error_variance: f64,
    /// Error variance of the plain backward difference of the same order.
    pub raw_difference_variance: f64,
}

#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    pub kernel: EstimatorKernel,
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    /// `estimates[k][i]`: order-`i` estimate at `times[k]`.
    pub estimates: Vec<Vec<f64>>,
    /// Same layout as `estimates`, when the signal has analytic derivatives.
    pub truth: Option<Vec<Vec<f64>>>,
    pub stats: Vec<OrderStats>,
}

fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Backward difference of order `d` at sample `k` (needs `k >= d`).
fn backward_difference(x: &[f64], k: usize, d: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    let mut binom = 1.0;
    for j in 0..=d {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * x[k - j];
        binom = binom * (d - j) as f64 / (j + 1) as f64;
    }
    acc / h.powi(d as i32)
}

/// Slides the causal estimator over the signal and compares against the
/// analytic derivatives when available.
pub fn run(signal: &dyn Signal, settings: &DiagnosticSettings) -> Result<DiagnosticReport> {
    let spec = settings.spec;
    if !(settings.noise_std.is_finite() && settings.noise_std >= 0.0) {
        return Err(Error::config("noise std must be finite and nonnegative"));
    }
    let kernel = build_kernel(spec)?;
    let h = spec.period;
    let count = (settings.duration / h).round() as usize + 1;
    if count < kernel.sample_count() {
        return Err(Error::config(format!(
            "duration {} s is shorter than the {} s window",
            settings.duration,
            kernel.window()
        )));
    }
    let clean = signal.samples(count, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let measured: Vec<f64> = clean
        .iter()
        .map(|x| {
            let n: f64 = StandardNormal.sample(&mut rng);
            x + settings.noise_std * n
        })
        .collect();

    let n = kernel.order();
    let mut buffer = SampleBuffer::for_kernel(&kernel);
    let mut times = Vec::new();
    let mut estimates = Vec::new();
    let mut truth = Vec::new();
    let mut has_truth = true;
    let mut raw_errors = vec![Vec::new(); n + 1];
    for (k, &x) in measured.iter().enumerate() {
        buffer.push(x);
        let Some(window) = buffer.window() else {
            continue;
        };
        let t = k as f64 * h;
        times.push(t);
        estimates.push(kernel.estimate_at_now(&window)?);
        match signal.derivatives(t, n) {
            Some(d) if has_truth => {
                for (i, errs) in raw_errors.iter_mut().enumerate() {
                    errs.push(backward_difference(&measured, k, i, h) - d[i]);
                }
                truth.push(d);
            }
            _ => has_truth = false,
        }
    }

    let truth = has_truth.then_some(truth);
    let stats = match &truth {
        Some(truth) => (0..=n)
            .map(|i| {
                let errs: Vec<f64> = estimates
                    .iter()
                    .zip(truth)
                    .map(|(e, t)| e[i] - t[i])
                    .collect();
                OrderStats {
                    order: i,
                    max_error: errs.iter().fold(0.0, |m, e| m.max(e.abs())),
                    error_variance: variance(&errs),
                    raw_difference_variance: variance(&raw_errors[i]),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(DiagnosticReport {
        kernel,
        times,
        measured: measured[measured.len() - estimates.len()..].to_vec(),
        estimates,
        truth,
        stats,
    })
}

impl DiagnosticReport {
    pub fn header(&self) -> Vec<String> {
        let n = self.kernel.order();
        let mut h = vec!["t".to_string(), "x_meas".to_string()];
        for i in 0..=n {
            h.push(format!("est_{i}"));
            if self.truth.is_some() {
                h.push(format!("true_{i}"));
            }
        }
        h
    }

    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.header())?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![*t, self.measured[k]];
            for i in 0..=self.kernel.order() {
                row.push(self.estimates[k][i]);
                if let Some(truth) = &self.truth {
                    row.push(truth[k][i]);
                }
            }
            wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes `trace.csv` and `kernel.csv` under `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_trace(std::io::BufWriter::new(std::fs::File::create(
            dir.join("trace.csv"),
        )?))?;
        self.kernel
            .write_csv(std::io::BufWriter::new(std::fs::File::create(
                dir.join("kernel.csv"),
            )?))
    }
}
