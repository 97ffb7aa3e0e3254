use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::store::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::Result;

/// Fully connected network: ReLU after every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    widths: Vec<usize>,
}

/// Glorot-uniform `fan_in × fan_out` matrix.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let values = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..limit) as f32)
        .collect();
    Tensor::new(vec![fan_in, fan_out], values).expect("shape matches")
}

impl Mlp {
    /// Registers weights `name.{i}.weight` / `name.{i}.bias` for each layer.
    /// `widths` lists input, hidden and output sizes.
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], seed: u64) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let weight = store.add_tensor(format!("{name}.{i}.weight"), xavier_uniform(w[0], w[1], &mut rng));
                let bias = store.add_tensor(format!("{name}.{i}.bias"), Tensor::zeros(vec![w[1]]));
                (weight, bias)
            })
            .collect();
        Self {
            layers,
            widths: widths.to_vec(),
        }
    }

    /// Rebinds an MLP to parameters already registered in `store`.
    pub fn bind(store: &ParamStore, name: &str, widths: &[usize]) -> Result<Self> {
        let layers = (0..widths.len() - 1)
            .map(|i| {
                Ok((
                    store.find_tensor(&format!("{name}.{i}.weight"))?,
                    store.find_tensor(&format!("{name}.{i}.bias"))?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            widths: widths.to_vec(),
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|&(w, b)| [w, b])
    }

    /// Returns `(output, last hidden activation)`. The hidden activation is
    /// taken after its ReLU; for a network without hidden layers it is the input.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: NodeId) -> Result<(NodeId, NodeId)> {
        let mut h = input;
        let mut last_hidden = input;
        let n = self.layers.len();
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wn = tape.param(store, w);
            let bn = tape.param(store, b);
            let z = tape.linear(h, wn, bn)?;
            if i + 1 < n {
                h = tape.relu(z);
                last_hidden = h;
            } else {
                h = z;
            }
        }
        Ok((h, last_hidden))
    }
}
