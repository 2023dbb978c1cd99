//! Logged closed-loop trajectories and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One controlled output at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub reference: f64,
    pub reference_rate: f64,
    pub y_true: f64,
    pub y_meas: f64,
    pub y_denoised: f64,
    pub dy_est: f64,
    /// Second derivative estimate; logged for second-order channels only.
    pub ddy_est: f64,
    pub f: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub channels: Vec<ChannelSample>,
    pub u: Vec<f64>,
}

/// Column layout: `t`, then per channel `ref, dref, y_true, y_meas,
/// y_denoised, dy_est, F, e` (+ `ddy_est` for second-order channels), then
/// one column per input.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub channel_orders: Vec<usize>,
    pub inputs: usize,
    pub period: f64,
    pub seed: u64,
    /// Time of the first tick at which every estimator was warm.
    pub warmup: f64,
    /// Set to the divergence time when the run was aborted.
    pub diverged_at: Option<f64>,
    pub warnings: Vec<String>,
    pub ticks: Vec<Tick>,
}

impl TimeSeries {
    pub fn new(channel_orders: Vec<usize>, inputs: usize, period: f64, seed: u64) -> Self {
        Self {
            channel_orders,
            inputs,
            period,
            seed,
            warmup: 0.0,
            diverged_at: None,
            warnings: Vec::new(),
            ticks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for (j, &order) in self.channel_orders.iter().enumerate() {
            let j = j + 1;
            for name in [
                "ref",
                "dref",
                "y_true",
                "y_meas",
                "y_denoised",
                "dy_est",
                "F",
                "e",
            ] {
                h.push(format!("{name}_{j}"));
            }
            if order == 2 {
                h.push(format!("ddy_est_{j}"));
            }
        }
        h.extend((1..=self.inputs).map(|i| format!("u_{i}")));
        h
    }

    /// Rows of the table in header order.
    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.ticks.iter().map(move |tick| {
            let mut row = vec![tick.t];
            for (c, &order) in tick.channels.iter().zip(&self.channel_orders) {
                row.extend([
                    c.reference,
                    c.reference_rate,
                    c.y_true,
                    c.y_meas,
                    c.y_denoised,
                    c.dy_est,
                    c.f,
                    c.e,
                ]);
                if order == 2 {
                    row.push(c.ddy_est);
                }
            }
            row.extend(&tick.u);
            row
        })
    }

    /// Root-mean-square of `y_true - ref` per channel over ticks at or after
    /// the warm-up. Infinite for a diverged run.
    pub fn rmse(&self) -> Vec<f64> {
        let n = self.channel_orders.len();
        if self.diverged() {
            return vec![f64::INFINITY; n];
        }
        let mut sums = vec![0.0; n];
        let mut count = 0usize;
        for tick in self.ticks.iter().filter(|t| t.t >= self.warmup - 1e-9) {
            for (s, c) in sums.iter_mut().zip(&tick.channels) {
                *s += (c.y_true - c.reference).powi(2);
            }
            count += 1;
        }
        sums.into_iter()
            .map(|s| {
                if count == 0 {
                    f64::NAN
                } else {
                    (s / count as f64).sqrt()
                }
            })
            .collect()
    }

    /// Largest absolute control per input.
    pub fn max_abs_u(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.inputs];
        for tick in &self.ticks {
            for (m, u) in out.iter_mut().zip(&tick.u) {
                *m = m.max(u.abs());
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.header())?;
        for row in self.rows() {
            wtr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(BufWriter::new(file))
    }
}

/// A parsed numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::config(format!("non-numeric CSV field `{f}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}
