//! Multi-layer classifier: ReLU hidden layers (dense or CHN) followed by a
//! dense softmax output layer trained with sparse cross-entropy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::activation::{relu, relu_grad, softmax, softmax_ce_backward, sparse_ce_loss, Labels};
use crate::error::{Error, Result};
use crate::layers::{DenseParams, GradMode, InitScheme, Layer, LayerCache, LayerKind};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{self, Purpose};

/// Network shape. Hidden layers share `layer_kind`; input and output layers
/// are always plain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_width: usize,
    pub hidden_widths: Vec<usize>,
    pub output_width: usize,
    #[serde(default)]
    pub layer_kind: LayerKind,
}

impl ArchSpec {
    /// Parses a dash-separated width list such as `"96-96-96-96-10"`; the
    /// last entry is the output width, the rest are hidden widths.
    pub fn parse(s: &str, input_width: usize, layer_kind: LayerKind) -> Result<Self> {
        let err = |reason: String| Error::ArchParse {
            input: s.to_string(),
            reason,
        };
        let widths = s
            .trim()
            .split('-')
            .map(|tok| {
                let tok = tok.trim();
                match tok.parse::<usize>() {
                    Ok(0) => Err(err("widths must be positive".into())),
                    Ok(w) => Ok(w),
                    Err(_) => Err(err(format!("malformed width {tok:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if widths.len() < 2 {
            return Err(err(
                "need at least one hidden width and an output width".into()
            ));
        }
        if input_width == 0 {
            return Err(err("input width must be positive".into()));
        }
        let (output, hidden) = widths.split_last().expect("len >= 2");
        Ok(ArchSpec {
            input_width,
            hidden_widths: hidden.to_vec(),
            output_width: *output,
            layer_kind,
        })
    }

    pub fn with_kind(&self, layer_kind: LayerKind) -> Self {
        ArchSpec {
            layer_kind,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0
            || self.output_width == 0
            || self.hidden_widths.is_empty()
            || self.hidden_widths.contains(&0)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid architecture {self}: widths must be positive and at least one hidden layer is required"
            )));
        }
        Ok(())
    }

    /// Hidden and output widths, dash-joined (the form [`ArchSpec::parse`] reads).
    pub fn label(&self) -> String {
        self.hidden_widths
            .iter()
            .chain(std::iter::once(&self.output_width))
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// All widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_widths.len() + 2);
        w.push(self.input_width);
        w.extend(&self.hidden_widths);
        w.push(self.output_width);
        w
    }

    /// Trainable parameters: `n_l·n_{l-1} + n_l` per non-input layer, plus
    /// `n_l²` for each CHN hidden layer.
    pub fn param_count(&self) -> u64 {
        let widths = self.widths();
        let last = widths.len() - 1;
        widths
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (n_in, n_out) = (pair[0] as u64, pair[1] as u64);
                let lateral = if self.layer_kind == LayerKind::Chn && i + 1 < last {
                    n_out * n_out
                } else {
                    0
                };
                n_out * n_in + n_out + lateral
            })
            .sum()
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.input_width, self.label())
    }
}

/// Trainable parameter count for `arch`.
pub fn param_count(arch: &ArchSpec) -> u64 {
    arch.param_count()
}

/// Activations and caches from one forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardPass<T> {
    pub hidden: Vec<LayerCache<T>>,
    pub output: LayerCache<T>,
    pub probs: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub hidden: Vec<Layer<T>>,
    pub output: DenseParams<T>,
}

impl<T: Scalar> Network<T> {
    /// Initialises every layer from its own seeded stream.
    pub fn build(arch: &ArchSpec, scheme: InitScheme, seed: u64) -> Result<Self> {
        arch.validate()?;
        let widths = arch.widths();
        let mut hidden = Vec::with_capacity(arch.hidden_widths.len());
        for (l, pair) in widths.windows(2).take(arch.hidden_widths.len()).enumerate() {
            let mut rng = seed::stream(seed, Purpose::Init, l as u64);
            hidden.push(Layer::init(
                arch.layer_kind,
                pair[0],
                pair[1],
                scheme,
                &mut rng,
            )?);
        }
        let n = widths.len();
        let mut rng = seed::stream(seed, Purpose::Init, hidden.len() as u64);
        let output = DenseParams::init(widths[n - 2], widths[n - 1], &mut rng)?;
        Ok(Network { hidden, output })
    }

    pub fn input_width(&self) -> usize {
        match self.hidden.first() {
            Some(Layer::Dense(p)) => p.n_in(),
            Some(Layer::Chn(p)) => p.n_in(),
            None => self.output.n_in(),
        }
    }

    pub fn output_width(&self) -> usize {
        self.output.n_out()
    }

    pub fn param_count(&self) -> u64 {
        let hidden: usize = self.hidden.iter().map(Layer::param_count).sum();
        (hidden + self.output.w.len() + self.output.b.len()) as u64
    }

    /// Names of all parameter matrices in slot order, e.g. `hidden.0.w2`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (l, layer) in self.hidden.iter().enumerate() {
            for n in layer.param_names() {
                names.push(format!("hidden.{l}.{n}"));
            }
        }
        names.push("output.w".into());
        names.push("output.b".into());
        names
    }

    pub fn params(&self) -> Vec<&Matrix<T>> {
        let mut out: Vec<&Matrix<T>> = self.hidden.iter().flat_map(Layer::params).collect();
        out.push(&self.output.w);
        out.push(&self.output.b);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> =
            self.hidden.iter_mut().flat_map(Layer::params_mut).collect();
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        out
    }

    /// Slot indices of every CHN `W2` matrix.
    pub fn w2_slots(&self) -> Vec<usize> {
        self.param_names()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.ends_with(".w2"))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<ForwardPass<T>> {
        let mut caches = Vec::with_capacity(self.hidden.len());
        let mut a = x.clone();
        for layer in &self.hidden {
            let (z, cache) = layer.forward(&a)?;
            a = relu(&z);
            caches.push(cache);
        }
        let (z, output) = self.output.forward(&a)?;
        Ok(ForwardPass {
            hidden: caches,
            output,
            probs: softmax(&z),
        })
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward(x)?.probs)
    }

    pub fn loss(&self, x: &Matrix<T>, y: &Labels) -> Result<T> {
        sparse_ce_loss(&self.forward(x)?.probs, y)
    }

    /// Gradients for every parameter matrix, in [`Network::params`] order.
    pub fn backward(
        &self,
        pass: &ForwardPass<T>,
        y: &Labels,
        mode: GradMode,
    ) -> Result<Vec<Matrix<T>>> {
        if pass.hidden.len() != self.hidden.len() {
            return Err(Error::MissingCache(
                "forward pass does not match network depth",
            ));
        }
        let d = softmax_ce_backward(&pass.probs, y)?;
        let out = self.output.backward(&pass.output, &d)?;
        let mut per_layer: Vec<Vec<Matrix<T>>> = Vec::with_capacity(self.hidden.len());
        let mut d_u = out.d_u_prev;
        for (layer, cache) in self.hidden.iter().zip(&pass.hidden).rev() {
            let d = d_u.hadamard(&relu_grad(&cache.z))?;
            let g = layer.backward(cache, &d, mode)?;
            per_layer.push(g.params);
            d_u = g.d_u_prev;
        }
        let mut grads: Vec<Matrix<T>> = per_layer.into_iter().rev().flatten().collect();
        grads.push(out.w);
        grads.push(out.b);
        Ok(grads)
    }

    /// Loss and gradients for one batch.
    pub fn loss_and_grads(
        &self,
        x: &Matrix<T>,
        y: &Labels,
        mode: GradMode,
    ) -> Result<(T, Vec<Matrix<T>>)> {
        let pass = self.forward(x)?;
        let loss = sparse_ce_loss(&pass.probs, y)?;
        let grads = self.backward(&pass, y, mode)?;
        Ok((loss, grads))
    }
}
