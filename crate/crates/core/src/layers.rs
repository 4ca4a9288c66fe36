//! Dense and CHN (connected hidden neurons) layers.
//!
//! A dense layer computes `Z = W·A + B`. A CHN layer adds intra-layer
//! connections through a square matrix `W2` applied to the layer's own
//! linear response:
//!
//! ```text
//! H = W1·A + B
//! Z = W1·A + W2·H + B  =  (I + W2)·H
//! ```
//!
//! Layers only produce pre-activations; the network applies the activation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// How CHN layers back-propagate through `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradMode {
    /// Treats `H` as a constant with respect to `W1` and `B`:
    /// `∇W1 = D·Aᵀ`, `∇B = ΣD`, upstream `W1ᵀ·D`.
    #[default]
    Paper,
    /// True derivative of `Z = (I + W2)(W1·A + B)`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    #[default]
    Dense,
    Chn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Glorot-uniform for every weight matrix, zero bias.
    #[default]
    Glorot,
    /// Glorot-uniform for `W`/`W1`, `W2 = 0`, zero bias.
    W2Zero,
}

/// Pre-activation gradients flowing into a layer are `D`; the layer hands
/// back parameter gradients plus the upstream gradient for the layer below.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    pub a_prev: Matrix<T>,
    pub h: Option<Matrix<T>>,
    pub z: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T> {
    pub w: Matrix<T>,
    pub b: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub w: Matrix<T>,
    pub b: Matrix<T>,
    pub d_u_prev: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChnParams<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b: Matrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChnGrads<T> {
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b: Matrix<T>,
    pub d_u_prev: Matrix<T>,
}

fn glorot<T: Scalar, R: Rng + ?Sized>(rng: &mut R, fan_out: usize, fan_in: usize) -> Matrix<T> {
    let limit = glorot_limit(fan_in, fan_out);
    Matrix::from_fn(fan_out, fan_in, |_, _| {
        T::lit(rng.gen_range(-limit..=limit))
    })
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn check_widths(n_in: usize, n_out: usize) -> Result<()> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "layer widths must be positive, got {n_in} -> {n_out}"
        )));
    }
    Ok(())
}

fn check_backward<T: Scalar>(cache: &LayerCache<T>, d: &Matrix<T>, n_in: usize) -> Result<()> {
    if d.shape() != cache.z.shape() {
        return Err(Error::Shape {
            op: "backward",
            left: cache.z.shape(),
            right: d.shape(),
        });
    }
    if cache.a_prev.rows() != n_in || cache.a_prev.cols() != d.cols() {
        return Err(Error::Shape {
            op: "backward(a_prev)",
            left: (n_in, d.cols()),
            right: cache.a_prev.shape(),
        });
    }
    Ok(())
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(w: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if b.cols() != 1 || b.rows() != w.rows() {
            return Err(Error::Shape {
                op: "DenseParams::new",
                left: w.shape(),
                right: b.shape(),
            });
        }
        Ok(DenseParams { w, b })
    }

    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Result<Self> {
        check_widths(n_in, n_out)?;
        Ok(DenseParams {
            w: glorot(rng, n_out, n_in),
            b: Matrix::zeros(n_out, 1),
        })
    }

    pub fn n_in(&self) -> usize {
        self.w.cols()
    }

    pub fn n_out(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, a_prev: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        let z = self.w.matmul(a_prev)?.add_bias(&self.b)?;
        let cache = LayerCache {
            a_prev: a_prev.clone(),
            h: None,
            z: z.clone(),
        };
        Ok((z, cache))
    }

    pub fn backward(&self, cache: &LayerCache<T>, d: &Matrix<T>) -> Result<DenseGrads<T>> {
        check_backward(cache, d, self.n_in())?;
        Ok(DenseGrads {
            w: d.matmul_t(&cache.a_prev)?,
            b: d.row_sum(),
            d_u_prev: self.w.t_matmul(d)?,
        })
    }
}

impl<T: Scalar> ChnParams<T> {
    pub fn new(w1: Matrix<T>, w2: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        let n = w1.rows();
        if w2.shape() != (n, n) {
            return Err(Error::Shape {
                op: "ChnParams::new(w2)",
                left: (n, n),
                right: w2.shape(),
            });
        }
        if b.shape() != (n, 1) {
            return Err(Error::Shape {
                op: "ChnParams::new(b)",
                left: (n, 1),
                right: b.shape(),
            });
        }
        Ok(ChnParams { w1, w2, b })
    }

    /// Draws `W1` first, then `W2`, from the same stream; a dense layer
    /// initialised from an identically seeded stream gets the same weights.
    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        check_widths(n_in, n_out)?;
        let w1 = glorot(rng, n_out, n_in);
        let w2 = match scheme {
            InitScheme::Glorot => glorot(rng, n_out, n_out),
            InitScheme::W2Zero => Matrix::zeros(n_out, n_out),
        };
        Ok(ChnParams {
            w1,
            w2,
            b: Matrix::zeros(n_out, 1),
        })
    }

    pub fn n_in(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_out(&self) -> usize {
        self.w1.rows()
    }

    pub fn forward(&self, a_prev: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        let h = self.w1.matmul(a_prev)?.add_bias(&self.b)?;
        // W1·A + W2·H + B == H + W2·H
        let z = h.add(&self.w2.matmul(&h)?)?;
        let cache = LayerCache {
            a_prev: a_prev.clone(),
            h: Some(h),
            z: z.clone(),
        };
        Ok((z, cache))
    }

    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        d: &Matrix<T>,
        mode: GradMode,
    ) -> Result<ChnGrads<T>> {
        check_backward(cache, d, self.n_in())?;
        let h = cache
            .h
            .as_ref()
            .ok_or(Error::MissingCache("CHN backward needs H from forward"))?;
        let w2 = d.matmul_t(h)?;
        match mode {
            GradMode::Paper => Ok(ChnGrads {
                w1: d.matmul_t(&cache.a_prev)?,
                w2,
                b: d.row_sum(),
                d_u_prev: self.w1.t_matmul(d)?,
            }),
            GradMode::Exact => {
                // dL/dH = (I + W2)ᵀ·D
                let g = d.add(&self.w2.t_matmul(d)?)?;
                Ok(ChnGrads {
                    w1: g.matmul_t(&cache.a_prev)?,
                    w2,
                    b: g.row_sum(),
                    d_u_prev: self.w1.t_matmul(&g)?,
                })
            }
        }
    }
}

/// A hidden layer of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(DenseParams<T>),
    Chn(ChnParams<T>),
}

/// Gradients of one layer, in the same order as [`Layer::params`].
#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    pub params: Vec<Matrix<T>>,
    pub d_u_prev: Matrix<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn init<R: Rng + ?Sized>(
        kind: LayerKind,
        n_in: usize,
        n_out: usize,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            LayerKind::Dense => Layer::Dense(DenseParams::init(n_in, n_out, rng)?),
            LayerKind::Chn => Layer::Chn(ChnParams::init(n_in, n_out, scheme, rng)?),
        })
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Chn(_) => LayerKind::Chn,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Layer::Dense(p) => p.n_out(),
            Layer::Chn(p) => p.n_out(),
        }
    }

    pub fn forward(&self, a_prev: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        match self {
            Layer::Dense(p) => p.forward(a_prev),
            Layer::Chn(p) => p.forward(a_prev),
        }
    }

    pub fn backward(
        &self,
        cache: &LayerCache<T>,
        d: &Matrix<T>,
        mode: GradMode,
    ) -> Result<LayerGrads<T>> {
        Ok(match self {
            Layer::Dense(p) => {
                let g = p.backward(cache, d)?;
                LayerGrads {
                    params: vec![g.w, g.b],
                    d_u_prev: g.d_u_prev,
                }
            }
            Layer::Chn(p) => {
                let g = p.backward(cache, d, mode)?;
                LayerGrads {
                    params: vec![g.w1, g.w2, g.b],
                    d_u_prev: g.d_u_prev,
                }
            }
        })
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Layer::Dense(_) => &["w", "b"],
            Layer::Chn(_) => &["w1", "w2", "b"],
        }
    }

    pub fn params(&self) -> Vec<&Matrix<T>> {
        match self {
            Layer::Dense(p) => vec![&p.w, &p.b],
            Layer::Chn(p) => vec![&p.w1, &p.w2, &p.b],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        match self {
            Layer::Dense(p) => vec![&mut p.w, &mut p.b],
            Layer::Chn(p) => vec![&mut p.w1, &mut p.w2, &mut p.b],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|m| m.len()).sum()
    }
}
