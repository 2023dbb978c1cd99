//! Output derivative estimators selectable by name.

use std::collections::BTreeMap;
use std::fmt;

use crate::differentiator::{build_kernel, EstimatorKernel, EstimatorSpec, SampleBuffer};
use crate::error::{Error, Result};

/// Everything an estimator needs to know at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSetup {
    pub spec: EstimatorSpec,
}

/// Produces `[y, y', ..., y^(N)]` for one measured output, anchored at the
/// current sample.
pub trait OutputEstimator: fmt::Debug + Send {
    /// Feeds the newest measurement. `exact` carries the plant's true output
    /// derivatives when the plant can provide them. Returns `None` while the
    /// estimator is still warming up.
    fn update(&mut self, measurement: f64, exact: Option<&[f64]>) -> Result<Option<Vec<f64>>>;

    /// Time after the first sample before estimates become available.
    fn warmup(&self) -> f64;

    fn order(&self) -> usize;
}

/// Sliding-window algebraic differentiator.
#[derive(Debug, Clone)]
pub struct AlgebraicEstimator {
    kernel: EstimatorKernel,
    buffer: SampleBuffer,
}

impl AlgebraicEstimator {
    pub fn new(spec: EstimatorSpec) -> Result<Self> {
        let kernel = build_kernel(spec)?;
        let buffer = SampleBuffer::for_kernel(&kernel);
        Ok(Self { kernel, buffer })
    }

    pub fn kernel(&self) -> &EstimatorKernel {
        &self.kernel
    }
}

impl OutputEstimator for AlgebraicEstimator {
    fn update(&mut self, measurement: f64, _exact: Option<&[f64]>) -> Result<Option<Vec<f64>>> {
        self.buffer.push(measurement);
        match self.buffer.window() {
            Some(w) => self.kernel.estimate_at_now(&w).map(Some),
            None => Ok(None),
        }
    }

    fn warmup(&self) -> f64 {
        self.kernel.window()
    }

    fn order(&self) -> usize {
        self.kernel.order()
    }
}

/// Passes the plant's exact derivatives through; ignores the measurement.
#[derive(Debug, Clone)]
pub struct ExactEstimator {
    order: usize,
}

impl ExactEstimator {
    pub fn new(order: usize) -> Self {
        Self { order }
    }
}

impl OutputEstimator for ExactEstimator {
    fn update(&mut self, _measurement: f64, exact: Option<&[f64]>) -> Result<Option<Vec<f64>>> {
        let exact = exact.ok_or_else(|| {
            Error::config("the `exact` estimator needs a plant that exposes its derivatives")
        })?;
        if exact.len() < self.order + 1 {
            return Err(Error::Dimension {
                expected: self.order + 1,
                got: exact.len(),
            });
        }
        Ok(Some(exact[..=self.order].to_vec()))
    }

    fn warmup(&self) -> f64 {
        0.0
    }

    fn order(&self) -> usize {
        self.order
    }
}

pub type EstimatorFactory = fn(&EstimatorSetup) -> Result<Box<dyn OutputEstimator>>;

#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    factories: BTreeMap<String, EstimatorFactory>,
}

impl fmt::Debug for EstimatorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register("algebraic", |s| {
            Ok(Box::new(AlgebraicEstimator::new(s.spec)?))
        });
        reg.register("exact", |s| {
            Ok(Box::new(ExactEstimator::new(s.spec.taylor_order)))
        });
        reg
    }

    pub fn register(&mut self, name: &str, factory: EstimatorFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, setup: &EstimatorSetup) -> Result<Box<dyn OutputEstimator>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::config(format!(
                "unknown estimator `{name}` (known: {})",
                known.join(", ")
            ))
        })?;
        factory(setup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebraic_warms_up() {
        let mut est = AlgebraicEstimator::new(EstimatorSpec::new(1, 0.05, 0.01)).unwrap();
        for k in 0..5 {
            assert!(est.update(k as f64, None).unwrap().is_none());
        }
        let out = est.update(5.0, None).unwrap().unwrap();
        assert!((out[0] - 5.0).abs() < 1e-9);
        assert!((out[1] - 100.0).abs() < 1e-7);
        assert!((est.warmup() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn exact_requires_plant_support() {
        let mut est = ExactEstimator::new(1);
        assert!(est.update(0.0, None).is_err());
        assert_eq!(
            est.update(0.0, Some(&[1.0, 2.0, 3.0])).unwrap(),
            Some(vec![1.0, 2.0])
        );
        assert!(est.update(0.0, Some(&[1.0])).is_err());
    }

    #[test]
    fn registry_lookup() {
        let reg = EstimatorRegistry::builtin();
        let setup = EstimatorSetup {
            spec: EstimatorSpec::new(1, 0.5, 0.01),
        };
        assert!(reg.create("algebraic", &setup).is_ok());
        assert!(reg.create("kalman", &setup).is_err());
    }
}
