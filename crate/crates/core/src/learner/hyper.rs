use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::Rng;

use super::{LossKind, Propagator, Trainable};
use crate::dataset::{stream_rng, Sample, Stream};
use crate::error::{Error, Result};

const OUTPUTS: usize = 16;

/// Starting point of the output layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HyperInit {
    /// Output weights and bias zero, so `M(t) = 0` before training.
    Zero,
    /// Output weights zero and bias the flattened identity, so training
    /// starts from `M(t) = 1`.
    #[default]
    Identity,
}

impl fmt::Display for HyperInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HyperInit::Zero => "zero",
            HyperInit::Identity => "identity",
        })
    }
}

impl FromStr for HyperInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(HyperInit::Zero),
            "identity" => Ok(HyperInit::Identity),
            other => Err(Error::InvalidArgument(format!("unknown hypermodel init `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl Layer {
    fn zeros(out: usize, inp: usize) -> Self {
        Self {
            w: DMatrix::zeros(out, inp),
            b: DVector::zeros(out),
        }
    }

    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.w * x;
        for mut col in z.column_iter_mut() {
            col += &self.b;
        }
        z
    }

    fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Time-conditioned propagator: an MLP `1 → h → h → h → 16` with tanh hidden
/// activations maps `t / t_train` to the row-major entries of `M(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperMlp {
    width: usize,
    t_train: f64,
    layers: Vec<Layer>,
}

struct Activations {
    /// Input row followed by the three hidden activations.
    hidden: Vec<DMatrix<f64>>,
    out: DMatrix<f64>,
}

impl HyperMlp {
    /// Randomly initialized network. Weights and biases of the hidden layers
    /// are uniform in `±1/√fan_in`.
    pub fn new(width: usize, t_train: f64, init: HyperInit, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(width, t_train)?;
        let mut rng = stream_rng(seed, Stream::Init, 0);
        for layer in net.layers.iter_mut().take(3) {
            let bound = 1.0 / (layer.w.ncols() as f64).sqrt();
            for x in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *x = rng.random_range(-bound..bound);
            }
        }
        if init == HyperInit::Identity {
            let out = &mut net.layers[3];
            for i in 0..4 {
                out.b[5 * i] = 1.0;
            }
        }
        Ok(net)
    }

    /// Network with every parameter zero.
    pub fn zeros(width: usize, t_train: f64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        if !(t_train > 0.0 && t_train.is_finite()) {
            return Err(Error::InvalidArgument(format!("T_train = {t_train} must be positive")));
        }
        Ok(Self {
            width,
            t_train,
            layers: vec![
                Layer::zeros(width, 1),
                Layer::zeros(width, width),
                Layer::zeros(width, width),
                Layer::zeros(OUTPUTS, width),
            ],
        })
    }

    pub fn from_params(width: usize, t_train: f64, params: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(width, t_train)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn t_train(&self) -> f64 {
        self.t_train
    }

    /// Replaces the output layer by a constant `M`, leaving the hidden layers.
    pub fn set_constant_output(&mut self, m: &Matrix4<f64>) {
        let out = &mut self.layers[3];
        out.w.fill(0.0);
        for i in 0..4 {
            for j in 0..4 {
                out.b[4 * i + j] = m[(i, j)];
            }
        }
    }

    fn forward(&self, times: &[f64]) -> Activations {
        let x = DMatrix::from_iterator(1, times.len(), times.iter().map(|t| t / self.t_train));
        let mut hidden = Vec::with_capacity(4);
        hidden.push(x);
        for layer in &self.layers[..3] {
            let a = layer.affine(hidden.last().unwrap()).map(f64::tanh);
            hidden.push(a);
        }
        let out = self.layers[3].affine(&hidden[3]);
        Activations { hidden, out }
    }

    fn matrix_at(out: &DMatrix<f64>, k: usize) -> Matrix4<f64> {
        Matrix4::from_row_slice(out.column(k).as_slice())
    }

    fn residuals<'a>(
        &self,
        batch: &'a [Sample],
    ) -> Result<(Activations, impl Iterator<Item = (usize, &'a Sample, Vector4<f64>)> + 'a)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let times: Vec<f64> = batch.iter().map(|s| s.t).collect();
        let acts = self.forward(&times);
        let mats: Vec<Matrix4<f64>> = (0..batch.len()).map(|k| Self::matrix_at(&acts.out, k)).collect();
        let iter = batch
            .iter()
            .enumerate()
            .zip(mats)
            .map(|((k, s), m)| (k, s, m * s.input() - s.target()));
        Ok((acts, iter))
    }
}

impl Propagator for HyperMlp {
    fn propagator(&self, t: f64) -> Matrix4<f64> {
        Self::matrix_at(&self.forward(&[t]).out, 0)
    }

    fn propagators(&self, times: &[f64]) -> Vec<Matrix4<f64>> {
        let mut out = Vec::with_capacity(times.len());
        for chunk in times.chunks(1024) {
            let acts = self.forward(chunk);
            out.extend((0..chunk.len()).map(|k| Self::matrix_at(&acts.out, k)));
        }
        out
    }
}

impl Trainable for HyperMlp {
    fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Per layer: weights row-major (output × input), then biases.
    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            for i in 0..layer.w.nrows() {
                out.extend(layer.w.row(i).iter());
            }
            out.extend(layer.b.iter());
        }
        out
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.w.len());
            let (b, tail) = tail.split_at(layer.b.len());
            layer.w = DMatrix::from_row_slice(layer.w.nrows(), layer.w.ncols(), w);
            layer.b = DVector::from_column_slice(b);
            rest = tail;
        }
        Ok(())
    }

    fn loss(&self, batch: &[Sample], kind: LossKind) -> Result<f64> {
        let (_, residuals) = self.residuals(batch)?;
        let total: f64 = residuals.map(|(_, _, r)| kind.eval(&r).0).sum();
        Ok(total / batch.len() as f64)
    }

    fn loss_and_grad(&self, batch: &[Sample], kind: LossKind) -> Result<(f64, Vec<f64>)> {
        let (acts, residuals) = self.residuals(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut delta = DMatrix::zeros(OUTPUTS, batch.len());
        for (k, s, r) in residuals {
            let (l, g) = kind.eval(&r);
            total += l;
            let v = s.input();
            for i in 0..4 {
                for j in 0..4 {
                    delta[(4 * i + j, k)] = g[i] * v[j] * scale;
                }
            }
        }

        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(4);
        for l in (0..4).rev() {
            let input = &acts.hidden[l];
            let dw = &delta * input.transpose();
            let db = delta.column_sum();
            if l > 0 {
                let mut da = self.layers[l].w.transpose() * &delta;
                da.zip_apply(input, |d, a| *d *= 1.0 - a * a);
                delta = da;
            }
            grads.push((dw, db));
        }
        grads.reverse();

        let mut flat = Vec::with_capacity(self.num_params());
        for (dw, db) in &grads {
            for i in 0..dw.nrows() {
                flat.extend(dw.row(i).iter());
            }
            flat.extend(db.iter());
        }
        Ok((total * scale, flat))
    }
}
