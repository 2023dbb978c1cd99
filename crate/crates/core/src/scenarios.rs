//! Canned scenarios, selectable by name.
//!
//! `linear-2x2` and `three-tank` use the benchmark plant constants, model gains
//! and corrector gains. Sampling periods, windows, references, pump limits and
//! initial conditions are not part of the benchmark definitions and were
//! calibrated here.

use crate::control::{Bounds, PidGains};
use crate::error::{Error, Result};
use crate::plants::{LinearMimoPlant, MatchedPlant, ThreeTankPlant};
use crate::simloop::{
    ChannelConfig, EstimatorConfig, Mode, NoiseConfig, PlantConfig, Scenario, SimConfig,
};
use crate::trajectory::ProfileConfig;

/// Variance 0.01 read as `N(mean, variance)`.
pub const DEFAULT_NOISE_STD: f64 = 0.1;

/// Upper pump flow of the three-tank rig, m^3/s.
pub const PUMP_MAX_FLOW: f64 = 1e-4;

type Builder = fn() -> Scenario;

const CATALOG: &[(&str, Builder)] = &[
    ("first-order", first_order),
    ("linear-2x2", linear_2x2),
    ("three-tank", three_tank),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<Scenario> {
    CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, b)| b())
        .ok_or_else(|| {
            let known: Vec<_> = names().collect();
            Error::config(format!(
                "unknown scenario `{name}` (known: {})",
                known.join(", ")
            ))
        })
}

fn profile(breakpoints: &[(f64, f64)]) -> ProfileConfig {
    ProfileConfig {
        breakpoints: breakpoints.to_vec(),
        smoothness: 2,
    }
}

/// Two-input two-output linear plant with unstable poles, decoupled models
/// `y1' = F1 + 10 u1`, `y2'' = F2 + 10 u2`.
pub fn linear_2x2() -> Scenario {
    Scenario {
        name: "linear-2x2".into(),
        sim: SimConfig {
            period: 0.01,
            duration: 40.0,
            seed: 1,
            mode: Mode::ModelFree,
            substeps: 10,
            divergence_limit: 1e6,
        },
        noise: NoiseConfig {
            std: vec![DEFAULT_NOISE_STD; 2],
        },
        estimator: EstimatorConfig {
            kind: "algebraic".into(),
            window: 0.1,
            taylor_order: None,
            integration_order: None,
        },
        plant: PlantConfig {
            kind: LinearMimoPlant::KIND.into(),
            outputs: None,
            params: toml::Table::new(),
        },
        channels: vec![
            ChannelConfig {
                order: 1,
                alpha: vec![10.0, 0.0],
                beta: 0.0,
                gains: PidGains::new(1.0, 0.0, 0.0),
                bounds: Bounds::default(),
                window: None,
                taylor_order: None,
            },
            ChannelConfig {
                order: 2,
                alpha: vec![0.0, 10.0],
                beta: 0.0,
                gains: PidGains::new(50.0, 50.0, 10.0),
                bounds: Bounds::default(),
                window: None,
                taylor_order: None,
            },
        ],
        references: vec![
            profile(&[
                (0.0, 0.0),
                (5.0, 0.0),
                (10.0, 2.0),
                (22.0, 2.0),
                (27.0, 4.0),
            ]),
            profile(&[
                (0.0, 0.0),
                (8.0, 0.0),
                (13.0, 2.0),
                (25.0, 2.0),
                (30.0, 4.0),
            ]),
        ],
    }
}

/// Three-tank rig, levels 1 and 2 controlled through pumps 1 and 2 with
/// `y_i' = F_i + 200 u_i` and the PI corrector `10 e + 0.02 int e`.
pub fn three_tank() -> Scenario {
    let channel = |i: usize| {
        let mut alpha = vec![0.0; 2];
        alpha[i] = 200.0;
        ChannelConfig {
            order: 1,
            alpha,
            beta: 0.0,
            gains: PidGains::new(10.0, 2e-2, 0.0),
            bounds: Bounds::new(Some(0.0), Some(PUMP_MAX_FLOW)),
            window: None,
            taylor_order: None,
        }
    };
    Scenario {
        name: "three-tank".into(),
        sim: SimConfig {
            period: 0.01,
            duration: 500.0,
            seed: 1,
            mode: Mode::ModelFree,
            substeps: 10,
            divergence_limit: 1e6,
        },
        noise: NoiseConfig {
            std: vec![DEFAULT_NOISE_STD; 2],
        },
        estimator: EstimatorConfig {
            kind: "algebraic".into(),
            window: 5.0,
            taylor_order: None,
            integration_order: None,
        },
        plant: PlantConfig {
            kind: ThreeTankPlant::KIND.into(),
            outputs: Some(vec![0, 1]),
            params: toml::Table::new(),
        },
        channels: vec![channel(0), channel(1)],
        references: vec![
            profile(&[(0.0, 0.1), (50.0, 0.1), (350.0, 0.3)]),
            profile(&[(0.0, 0.1), (50.0, 0.1), (350.0, 0.2)]),
        ],
    }
}

/// Matched plant `y' = c + alpha u` with exact derivatives; the ultra-local
/// model is exact here.
pub fn first_order() -> Scenario {
    let mut params = toml::Table::new();
    params.insert(
        "offset".into(),
        toml::Value::Array(vec![toml::Value::Float(0.3)]),
    );
    params.insert(
        "gain".into(),
        toml::Value::Array(vec![toml::Value::Float(5.0)]),
    );
    params.insert(
        "initial".into(),
        toml::Value::Array(vec![toml::Value::Float(0.0)]),
    );
    Scenario {
        name: "first-order".into(),
        sim: SimConfig {
            period: 0.01,
            duration: 5.0,
            seed: 1,
            mode: Mode::ModelFree,
            substeps: 10,
            divergence_limit: 1e6,
        },
        noise: NoiseConfig { std: vec![0.0] },
        estimator: EstimatorConfig {
            kind: "exact".into(),
            window: 0.1,
            taylor_order: None,
            integration_order: None,
        },
        plant: PlantConfig {
            kind: MatchedPlant::KIND.into(),
            outputs: None,
            params,
        },
        channels: vec![ChannelConfig {
            order: 1,
            alpha: vec![5.0],
            beta: 0.0,
            gains: PidGains::new(2.0, 0.0, 0.0),
            bounds: Bounds::default(),
            window: None,
            taylor_order: None,
        }],
        references: vec![profile(&[(0.0, 1.0)])],
    }
}
