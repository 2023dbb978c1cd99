//! Ground-truth plant simulators used by the closed-loop harness.
//!
//! Every simulator implements [`Plant`] and is registered by name in a
//! [`PlantRegistry`]; scenarios pick one at runtime through `plant.kind`. The
//! controller only ever sees measured outputs.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod linear;
mod matched;
pub mod realization;
mod three_tank;

pub use linear::{LinearMimoPlant, LinearParams, TransferEntry};
pub use matched::{MatchedParams, MatchedPlant};
pub use three_tank::{three_tank_field, ThreeTankParams, ThreeTankPlant};

/// What a plant declares about one of its outputs. Advisory only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputMetadata {
    /// Lowest derivative order of the output in which some input appears.
    pub order: Option<usize>,
    /// Set when the inputs do not enter that derivative linearly.
    pub input_nonlinear: bool,
}

pub trait Plant: fmt::Debug + Send {
    fn kind(&self) -> &'static str;

    fn inputs(&self) -> usize;

    fn outputs(&self) -> usize;

    /// Current noiseless outputs.
    fn output(&self) -> Vec<f64>;

    /// Advances the state by one integration step of length `dt`, holding `u`.
    fn step(&mut self, u: &[f64], dt: f64) -> Result<()>;

    fn metadata(&self) -> Vec<OutputMetadata>;

    /// Outputs selected by default when the plant has more outputs than inputs.
    fn default_selection(&self) -> Vec<usize> {
        (0..self.inputs()).collect()
    }

    /// Exact output derivatives `[y, y', ..., y^(order)]` per output, for plants
    /// that can provide them. Used by the perfect-derivative estimator.
    fn exact_derivatives(&self, _order: usize) -> Option<Vec<Vec<f64>>> {
        None
    }
}

pub(crate) fn check_inputs(u: &[f64], expected: usize) -> Result<()> {
    if u.len() != expected {
        return Err(Error::Dimension {
            expected,
            got: u.len(),
        });
    }
    Ok(())
}

/// Deserializes a plant's parameter table, rejecting unknown keys.
pub(crate) fn parse_params<P: DeserializeOwned>(params: &toml::Table) -> Result<P> {
    toml::Value::Table(params.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(format!("plant parameters: {}", e.message())))
}

pub type PlantFactory = fn(&toml::Table) -> Result<Box<dyn Plant>>;

/// Name-indexed plant constructors.
#[derive(Clone, Default)]
pub struct PlantRegistry {
    factories: BTreeMap<String, PlantFactory>,
}

impl fmt::Debug for PlantRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl PlantRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the linear 2x2 example, the three-tank system and the
    /// matched first-order test plant.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register(LinearMimoPlant::KIND, |p| {
            Ok(Box::new(LinearMimoPlant::from_params(parse_params(p)?)?))
        });
        reg.register(ThreeTankPlant::KIND, |p| {
            Ok(Box::new(ThreeTankPlant::from_params(parse_params(p)?)?))
        });
        reg.register(MatchedPlant::KIND, |p| {
            Ok(Box::new(MatchedPlant::from_params(parse_params(p)?)?))
        });
        reg
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: &str, factory: PlantFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, params: &toml::Table) -> Result<Box<dyn Plant>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::config(format!(
                "unknown plant `{name}` (known: {})",
                known.join(", ")
            ))
        })?;
        factory(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let reg = PlantRegistry::builtin();
        let names: Vec<_> = reg.names().collect();
        assert_eq!(names, vec!["first-order", "linear-2x2", "three-tank"]);
    }

    #[test]
    fn unknown_plant() {
        let err = PlantRegistry::builtin()
            .create("four-tank", &toml::Table::new())
            .unwrap_err();
        assert!(err.to_string().contains("four-tank"));
    }

    #[test]
    fn unknown_param_rejected() {
        let mut t = toml::Table::new();
        t.insert("bogus".into(), toml::Value::Float(1.0));
        assert!(PlantRegistry::builtin().create("three-tank", &t).is_err());
    }

    #[test]
    fn custom_registration() {
        let mut reg = PlantRegistry::new();
        reg.register("lag", |_| {
            Ok(Box::new(MatchedPlant::new(
                vec![0.0],
                vec![1.0],
                vec![1.0],
                vec![0.0],
            )?))
        });
        let plant = reg.create("lag", &toml::Table::new()).unwrap();
        assert_eq!(plant.inputs(), 1);
    }
}
