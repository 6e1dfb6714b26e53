use crate::error::{Error, Result};
use crate::ndcore::activations::{relu, relu_grad};
use crate::ndcore::{debug_assert_finite, glorot_init, Matrix, Rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Used only at the bottleneck and the softmax head's affine map.
    Linear,
}

/// Fully connected layer `y = act(x W + b)` over `T x in` frame sequences.
#[derive(Debug, Clone)]
pub struct DenseLayer<F> {
    pub w: Matrix<F>, // in x out
    pub b: Matrix<F>, // 1 x out
    pub activation: Activation,
}

impl<F: Scalar> DenseLayer<F> {
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(DenseLayer {
            w: glorot_init(in_dim, out_dim, rng)?,
            b: Matrix::zeros(1, out_dim),
            activation,
        })
    }

    pub fn zeros_like(&self) -> Self {
        DenseLayer {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: Matrix::zeros(1, self.b.cols()),
            activation: self.activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        if x.cols() != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op: "dense_forward",
                lrows: x.rows(),
                lcols: x.cols(),
                rrows: self.w.rows(),
                rcols: self.w.cols(),
            });
        }
        let mut y = x.matmul(&self.w)?;
        y.add_row(&self.b)?;
        if self.activation == Activation::Relu {
            y.map_inplace(relu);
        }
        debug_assert_finite(&y, "dense_forward");
        Ok(y)
    }

    /// Exact gradients. `x` and `y` must come from the matching forward call.
    /// Returns `(dx, grads)` where `grads` reuses the layer layout.
    pub fn backward(&self, x: &Matrix<F>, y: &Matrix<F>, dy: &Matrix<F>) -> Result<(Matrix<F>, Self)> {
        if dy.shape() != y.shape() || x.rows() != y.rows() {
            return Err(Error::ShapeMismatch {
                op: "dense_backward",
                lrows: dy.rows(),
                lcols: dy.cols(),
                rrows: y.rows(),
                rcols: y.cols(),
            });
        }
        // relu(pre) > 0 exactly when pre > 0, so the output is enough to gate.
        let dpre = match self.activation {
            Activation::Relu => {
                let mut d = dy.clone();
                for (g, &out) in d.data_mut().iter_mut().zip(y.data()) {
                    *g = *g * relu_grad(out);
                }
                d
            }
            Activation::Linear => dy.clone(),
        };
        let dw = x.matmul_tn(&dpre)?;
        let db = dpre.col_sums();
        let dx = dpre.matmul_nt(&self.w)?;
        debug_assert_finite(&dx, "dense_backward");
        Ok((
            dx,
            DenseLayer {
                w: dw,
                b: db,
                activation: self.activation,
            },
        ))
    }
}

/// Bottleneck encoder: relu hidden layers followed by a linear bottleneck.
#[derive(Debug, Clone)]
pub struct Encoder<F> {
    pub layers: Vec<DenseLayer<F>>,
}

/// Per-layer inputs cached during the forward pass; `xs[i]` feeds layer `i`
/// and `xs.last()` is the bottleneck output.
pub struct EncoderCache<F> {
    pub xs: Vec<Matrix<F>>,
}

impl<F: Scalar> Encoder<F> {
    /// Glorot-initialised encoder with hidden `sizes` and a linear bottleneck.
    pub fn glorot(
        input_dim: usize,
        sizes: &[usize; 3],
        bottleneck: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let dims = [input_dim, sizes[0], sizes[1], sizes[2], bottleneck];
        let mut layers = Vec::with_capacity(4);
        for i in 0..4 {
            let act = if i == 3 {
                Activation::Linear
            } else {
                Activation::Relu
            };
            layers.push(DenseLayer::glorot(dims[i], dims[i + 1], act, rng)?);
        }
        Ok(Encoder { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("empty encoder").out_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Encoder {
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
        }
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<(Matrix<F>, EncoderCache<F>)> {
        let mut xs = Vec::with_capacity(self.layers.len() + 1);
        xs.push(x.clone());
        for layer in &self.layers {
            let y = layer.forward(xs.last().unwrap())?;
            xs.push(y);
        }
        Ok((xs.last().unwrap().clone(), EncoderCache { xs }))
    }

    pub fn backward(&self, cache: &EncoderCache<F>, d_out: &Matrix<F>) -> Result<(Matrix<F>, Self)> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (dx, g) = layer.backward(&cache.xs[i], &cache.xs[i + 1], &d)?;
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        Ok((d, Encoder { layers: grads }))
    }
}
