use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::realization::{realize_tf, Poly, StateSpace};
use super::{check_inputs, OutputMetadata, Plant};
use crate::error::{Error, Result};

/// One nonzero entry `y_out += num/den u_in` of a transfer matrix.
#[derive(Debug, Clone)]
pub struct TransferEntry {
    pub output: usize,
    pub input: usize,
    pub num: Poly,
    pub den: Poly,
    pub realization: StateSpace,
    pub state: DVector<f64>,
}

impl TransferEntry {
    pub fn relative_degree(&self) -> usize {
        self.den.degree() - self.num.degree()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams {
    /// Realize entry (1,1) with the common factor `s` cancelled (third order).
    #[serde(default)]
    pub cancel_common_factor: bool,
}

/// Multivariable plant given entry-wise by transfer functions, each realized
/// separately in controllable canonical form.
#[derive(Debug, Clone)]
pub struct LinearMimoPlant {
    inputs: usize,
    outputs: usize,
    entries: Vec<TransferEntry>,
    last_u: Vec<f64>,
}

impl LinearMimoPlant {
    pub const KIND: &'static str = "linear-2x2";

    pub fn new(
        inputs: usize,
        outputs: usize,
        entries: Vec<(usize, usize, Poly, Poly)>,
    ) -> Result<Self> {
        let entries = entries
            .into_iter()
            .map(|(output, input, num, den)| {
                if output >= outputs || input >= inputs {
                    return Err(Error::config(format!(
                        "transfer entry ({output}, {input}) out of range"
                    )));
                }
                let realization = realize_tf(&num, &den)?;
                let state = DVector::zeros(realization.order());
                Ok(TransferEntry {
                    output,
                    input,
                    num,
                    den,
                    realization,
                    state,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            inputs,
            outputs,
            entries,
            last_u: vec![0.0; inputs],
        })
    }

    /// The 2x2 example with unstable poles and a wide spectrum:
    ///
    /// ```text
    /// y1 = s^3 / ((s+0.01)(s+0.1)(s-1)s) u1
    /// y2 = (s+1) / ((s+0.003)(s-0.03)(s+0.3)(s+3)) u1 + s^2 / ((s+0.004)(s+0.04)(s-0.4)(s+4)) u2
    /// ```
    pub fn benchmark(cancel_common_factor: bool) -> Self {
        let e11 = if cancel_common_factor {
            (Poly::monomial(2), Poly::from_roots(&[-0.01, -0.1, 1.0]))
        } else {
            (
                Poly::monomial(3),
                Poly::from_roots(&[-0.01, -0.1, 1.0, 0.0]),
            )
        };
        let entries = vec![
            (0, 0, e11.0, e11.1),
            (
                1,
                0,
                Poly(vec![1.0, 1.0]),
                Poly::from_roots(&[-0.003, 0.03, -0.3, -3.0]),
            ),
            (
                1,
                1,
                Poly::monomial(2),
                Poly::from_roots(&[-0.004, -0.04, 0.4, -4.0]),
            ),
        ];
        Self::new(2, 2, entries).expect("benchmark entries are proper")
    }

    pub fn from_params(p: LinearParams) -> Result<Self> {
        Ok(Self::benchmark(p.cancel_common_factor))
    }

    pub fn entries(&self) -> &[TransferEntry] {
        &self.entries
    }

    pub fn entry(&self, output: usize, input: usize) -> Option<&TransferEntry> {
        self.entries
            .iter()
            .find(|e| e.output == output && e.input == input)
    }

    pub fn entry_mut(&mut self, output: usize, input: usize) -> Option<&mut TransferEntry> {
        self.entries
            .iter_mut()
            .find(|e| e.output == output && e.input == input)
    }
}

impl Plant for LinearMimoPlant {
    fn kind(&self) -> &'static str {
        Self::KIND
    }

    fn inputs(&self) -> usize {
        self.inputs
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn output(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.outputs];
        for e in &self.entries {
            y[e.output] += e.realization.output(&e.state, self.last_u[e.input]);
        }
        y
    }

    fn step(&mut self, u: &[f64], dt: f64) -> Result<()> {
        check_inputs(u, self.inputs)?;
        for e in &mut self.entries {
            e.realization.rk4_step(&mut e.state, u[e.input], dt);
        }
        self.last_u.copy_from_slice(u);
        Ok(())
    }

    fn metadata(&self) -> Vec<OutputMetadata> {
        (0..self.outputs)
            .map(|j| OutputMetadata {
                order: self
                    .entries
                    .iter()
                    .filter(|e| e.output == j && !e.num.is_zero())
                    .map(TransferEntry::relative_degree)
                    .min(),
                input_nonlinear: false,
            })
            .collect()
    }
}
