//! Closed-loop orchestration.
//!
//! Each control period `k`:
//!
//! 1. read the plant outputs and add seeded Gaussian measurement noise;
//! 2. push the measurements into the per-channel estimators;
//! 3. take the denoised output and its derivatives at the current sample;
//! 4. estimate `F` from the `n`-th derivative and the control `u(k-1)`;
//! 5. form the error from the denoised output and the reference;
//! 6. compute `u(k)`;
//! 7. hold `u(k)` while the plant is integrated over one period.
//!
//! `u(k)` therefore depends on measurements up to `k` and controls up to `k-1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::{Bounds, ChannelController, PidGains};
use crate::differentiator::EstimatorSpec;
use crate::error::{Error, Result};
use crate::plants::{Plant, PlantRegistry};
use crate::trajectory::{ProfileConfig, ReferenceProfile};
use crate::ultra_local::{SquareSelection, UltraLocalChannel};

mod estimators;
mod series;

pub use estimators::{
    AlgebraicEstimator, EstimatorFactory, EstimatorRegistry, EstimatorSetup, ExactEstimator,
    OutputEstimator,
};
pub use series::{ChannelSample, CsvTable, Tick, TimeSeries};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Intelligent PID with the estimated `F`.
    #[default]
    ModelFree,
    /// Same law with `F` forced to zero.
    ClassicPid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// Registered plant name.
    pub kind: String,
    /// Controlled outputs when the plant has more outputs than inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<usize>>,
    /// Plant-specific parameters, validated by the plant's factory.
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_estimator_kind")]
    pub kind: String,
    /// Window length in seconds.
    pub window: f64,
    /// Taylor order; defaults to `max(n_j, 1)` per channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor_order: Option<usize>,
    /// Integration order; defaults to taylor order + 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_order: Option<usize>,
}

fn default_estimator_kind() -> String {
    "algebraic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Ultra-local derivative order `n_j`.
    pub order: usize,
    /// One gain per plant input.
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: f64,
    pub gains: PidGains,
    #[serde(default)]
    pub bounds: Bounds,
    /// Per-channel estimator window override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taylor_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the additive measurement noise per channel.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Control period `h` in seconds.
    pub period: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// RK4 steps per control period.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Abort once any `|u|` or `|y|` exceeds this.
    #[serde(default = "default_divergence_limit")]
    pub divergence_limit: f64,
}

fn default_substeps() -> usize {
    10
}

fn default_divergence_limit() -> f64 {
    1e6
}

/// Full closed-loop configuration. This is also the config-file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub sim: SimConfig,
    pub noise: NoiseConfig,
    pub estimator: EstimatorConfig,
    pub plant: PlantConfig,
    pub channels: Vec<ChannelConfig>,
    pub references: Vec<ProfileConfig>,
}

fn default_name() -> String {
    "custom".into()
}

impl Scenario {
    /// Estimator spec of channel `j`.
    pub fn estimator_spec(&self, j: usize) -> EstimatorSpec {
        let ch = &self.channels[j];
        let n = ch
            .taylor_order
            .or(self.estimator.taylor_order)
            .unwrap_or(ch.order.max(1));
        let nu = self.estimator.integration_order.unwrap_or(n + 2);
        EstimatorSpec {
            taylor_order: n,
            integration_order: nu,
            window: ch.window.unwrap_or(self.estimator.window),
            period: self.sim.period,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut s = self.clone();
        s.sim.mode = mode;
        s
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.sim.seed = seed;
        s
    }

    /// Structural checks that do not need the plant.
    pub fn validate(&self) -> Result<()> {
        let sim = &self.sim;
        if !(sim.period.is_finite() && sim.period > 0.0) {
            return Err(Error::config("sim.period must be positive"));
        }
        if !(sim.duration.is_finite() && sim.duration > 0.0) {
            return Err(Error::config("sim.duration must be positive"));
        }
        if sim.substeps == 0 {
            return Err(Error::config("sim.substeps must be at least 1"));
        }
        let p = self.channels.len();
        if p == 0 {
            return Err(Error::config("at least one channel is required"));
        }
        if self.references.len() != p {
            return Err(Error::config(format!(
                "{} references for {p} channels",
                self.references.len()
            )));
        }
        if self.noise.std.len() != p {
            return Err(Error::config(format!(
                "{} noise levels for {p} channels",
                self.noise.std.len()
            )));
        }
        if self.noise.std.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::config("noise std must be finite and nonnegative"));
        }
        for (j, ch) in self.channels.iter().enumerate() {
            let spec = self.estimator_spec(j);
            if spec.taylor_order < ch.order {
                return Err(Error::config(format!(
                    "channel {}: estimator order {} below derivative order {}",
                    j + 1,
                    spec.taylor_order,
                    ch.order
                )));
            }
            spec.validate()?;
            if self.references[j].smoothness < ch.order {
                return Err(Error::config(format!(
                    "channel {}: reference smoothness {} below derivative order {}",
                    j + 1,
                    self.references[j].smoothness,
                    ch.order
                )));
            }
        }
        let warmup = self.warmup();
        if sim.duration <= warmup {
            return Err(Error::config(format!(
                "duration {} s does not exceed the estimator warm-up of {warmup} s",
                sim.duration
            )));
        }
        Ok(())
    }

    /// Longest estimator window.
    pub fn warmup(&self) -> f64 {
        if self.estimator.kind == "exact" {
            return 0.0;
        }
        (0..self.channels.len())
            .map(|j| self.estimator_spec(j).effective_window())
            .fold(0.0, f64::max)
    }
}

type Setup = (Box<dyn Plant>, Vec<ChannelRuntime>, Vec<String>);

struct ChannelRuntime {
    output: usize,
    model: UltraLocalChannel,
    controller: ChannelController,
    estimator: Box<dyn OutputEstimator>,
    reference: ReferenceProfile,
    noise_std: f64,
}

/// Runs scenarios against a set of registered plants and estimators.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub plants: PlantRegistry,
    pub estimators: EstimatorRegistry,
}

impl Default for Simulator {
    fn default() -> Self {
        Self {
            plants: PlantRegistry::builtin(),
            estimators: EstimatorRegistry::builtin(),
        }
    }
}

/// Both modes of one scenario under the same seed.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub model_free: TimeSeries,
    pub classic: TimeSeries,
    pub rmse_model_free: Vec<f64>,
    pub rmse_classic: Vec<f64>,
}

impl Simulator {
    fn setup(&self, sc: &Scenario) -> Result<Setup> {
        sc.validate()?;
        let plant = self.plants.create(&sc.plant.kind, &sc.plant.params)?;
        let m = plant.inputs();
        let p = sc.channels.len();
        if p != m {
            return Err(Error::config(format!(
                "square configuration required: {p} channels for {m} plant inputs"
            )));
        }
        let selected = sc
            .plant
            .outputs
            .clone()
            .unwrap_or_else(|| plant.default_selection());
        let selection = SquareSelection::new(selected, plant.outputs(), m)?;
        let metadata = plant.metadata();

        let mut warnings = Vec::new();
        let mut runtimes = Vec::with_capacity(p);
        for (j, ch) in sc.channels.iter().enumerate() {
            if ch.alpha.len() != m {
                return Err(Error::config(format!(
                    "channel {}: alpha has {} entries for {m} inputs",
                    j + 1,
                    ch.alpha.len()
                )));
            }
            let model = UltraLocalChannel::new(ch.order, ch.alpha.clone(), ch.beta, j)?;
            if !model.is_decoupled() {
                return Err(Error::config(format!(
                    "channel {}: only decoupled alpha (zero off its own input) is supported by the control law",
                    j + 1
                )));
            }
            if model.control_gain() == 0.0 {
                return Err(Error::config(format!(
                    "channel {}: alpha on its own input is zero",
                    j + 1
                )));
            }
            let output = selection.outputs()[j];
            for w in model.validate(&metadata[output]) {
                log::warn!("channel {}: {w}", j + 1);
                warnings.push(format!("channel {}: {w}", j + 1));
            }
            let setup = EstimatorSetup {
                spec: sc.estimator_spec(j),
            };
            runtimes.push(ChannelRuntime {
                output,
                model,
                controller: ChannelController::new(ch.gains, ch.bounds)?,
                estimator: self.estimators.create(&sc.estimator.kind, &setup)?,
                reference: ReferenceProfile::from_config(&sc.references[j])?,
                noise_std: sc.noise.std[j],
            });
        }
        Ok((plant, runtimes, warnings))
    }

    pub fn run(&self, sc: &Scenario) -> Result<TimeSeries> {
        let (mut plant, mut channels, warnings) = self.setup(sc)?;
        let h = sc.sim.period;
        let dt = h / sc.sim.substeps as f64;
        let limit = sc.sim.divergence_limit;
        let max_order = channels
            .iter()
            .map(|c| c.estimator.order())
            .max()
            .unwrap_or(1);
        let mut rng = ChaCha8Rng::seed_from_u64(sc.sim.seed);

        let orders = channels.iter().map(|c| c.model.order()).collect();
        let mut series = TimeSeries::new(orders, plant.inputs(), h, sc.sim.seed);
        series.warnings = warnings;
        series.warmup = channels
            .iter()
            .map(|c| c.estimator.warmup())
            .fold(0.0, f64::max);

        let steps = (sc.sim.duration / h).round() as usize;
        let mut u_prev = vec![0.0; plant.inputs()];
        for k in 0..=steps {
            let t = k as f64 * h;
            let y = plant.output();
            let exact = plant.exact_derivatives(max_order);
            let mut u = vec![0.0; plant.inputs()];
            let mut samples = Vec::with_capacity(channels.len());

            for (j, ch) in channels.iter_mut().enumerate() {
                let y_true = y[ch.output];
                let noise: f64 = StandardNormal.sample(&mut rng);
                let y_meas = y_true + ch.noise_std * noise;
                let exact_j = exact.as_ref().map(|d| d[ch.output].as_slice());
                let est = ch.estimator.update(y_meas, exact_j)?;

                let n = ch.model.order();
                let (y_denoised, derivs) = match &est {
                    Some(e) => (e[0], e.clone()),
                    None => (y_meas, vec![0.0; n.max(2) + 1]),
                };
                let f = match (&est, sc.sim.mode) {
                    (Some(_), Mode::ModelFree) => ch.model.estimate_f(derivs[n], &u_prev)?,
                    _ => {
                        ch.model.set_last_f(0.0);
                        0.0
                    }
                };
                let r = ch.reference.eval_to(t, n.max(1));
                let e = r[0] - y_denoised;
                let dy = derivs.get(1).copied().unwrap_or(0.0);
                let e_dot = r[1] - dy;
                u[j] = ch.controller.compute(&ch.model, r[n], f, e, e_dot, h)?;

                samples.push(ChannelSample {
                    reference: r[0],
                    reference_rate: r[1],
                    y_true,
                    y_meas,
                    y_denoised,
                    dy_est: dy,
                    ddy_est: derivs.get(2).copied().unwrap_or(0.0),
                    f,
                    e,
                });
            }

            let bad = |v: &f64| !v.is_finite() || v.abs() > limit;
            let diverged = y.iter().any(bad) || u.iter().any(bad);
            series.ticks.push(Tick {
                t,
                channels: samples,
                u: u.clone(),
            });
            if diverged {
                log::warn!("{}: divergence at t = {t} s", sc.name);
                series.diverged_at = Some(t);
                break;
            }
            if k == steps {
                break;
            }
            for _ in 0..sc.sim.substeps {
                plant.step(&u, dt)?;
            }
            u_prev = u;
        }
        Ok(series)
    }

    pub fn compare(&self, sc: &Scenario) -> Result<Comparison> {
        let model_free = self.run(&sc.with_mode(Mode::ModelFree))?;
        let classic = self.run(&sc.with_mode(Mode::ClassicPid))?;
        Ok(Comparison {
            rmse_model_free: model_free.rmse(),
            rmse_classic: classic.rmse(),
            model_free,
            classic,
        })
    }
}

/// Runs `sc` with the built-in plants and estimators.
pub fn run(sc: &Scenario) -> Result<TimeSeries> {
    Simulator::default().run(sc)
}

pub fn compare(sc: &Scenario) -> Result<Comparison> {
    Simulator::default().compare(sc)
}
