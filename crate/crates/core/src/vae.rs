//! Variational autoencoder used as the latent feature engine.
//!
//! One hidden rectifier layer on each side. The encoder emits a mean and a
//! log-variance head; the decoder squashes its output through the logistic
//! function so reconstructions live in `(0, 1)` like the normalized inputs.
//! The loss is squared reconstruction error plus the KL divergence to a
//! standard normal, averaged over the batch, and training is plain
//! mini-batch gradient descent with hand-derived gradients.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkrError};

pub const VAE_MAGIC: &str = "WORKR-VAE-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            input_dim: 1,
            hidden_dim: 64,
            latent_dim: 20,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 64,
            seed: 1,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(WorkrError::InvalidConfig(msg));
        if !(2..=32).contains(&self.latent_dim) {
            return bad(format!(
                "latent_dim must be in [2, 32], got {}",
                self.latent_dim
            ));
        }
        if self.input_dim == 0 || self.hidden_dim == 0 || self.batch_size == 0 {
            return bad("input_dim, hidden_dim and batch_size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

/// Affine map `y = W x + b` with `W` stored as `(out, in)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Dense {
        Dense {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    /// Glorot-uniform weights, zero biases.
    fn glorot(input: usize, output: usize, rng: &mut impl Rng) -> Dense {
        let s = (6.0 / (input + output) as f64).sqrt();
        let w = Array2::from_shape_fn((output, input), |_| rng.random_range(-s..=s));
        Dense {
            w,
            b: Array1::zeros(output),
        }
    }

    fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    #[cfg(test)]
    fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Batch forward: rows of `x` are samples.
    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    fn forward_one(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.w.dot(&x) + &self.b
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(self.b.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaeParams {
    pub config: VaeConfig,
    pub enc_hidden: Dense,
    pub enc_mu: Dense,
    pub enc_logvar: Dense,
    pub dec_hidden: Dense,
    pub dec_out: Dense,
}

pub fn init_vae(cfg: &VaeConfig) -> Result<VaeParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (d, h, l) = (cfg.input_dim, cfg.hidden_dim, cfg.latent_dim);
    Ok(VaeParams {
        config: cfg.clone(),
        enc_hidden: Dense::glorot(d, h, &mut rng),
        enc_mu: Dense::glorot(h, l, &mut rng),
        enc_logvar: Dense::glorot(h, l, &mut rng),
        dec_hidden: Dense::glorot(l, h, &mut rng),
        dec_out: Dense::glorot(h, d, &mut rng),
    })
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(WorkrError::DimensionMismatch { expected, got })
    }
}

pub fn encode(p: &VaeParams, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(p.enc_hidden.input_dim(), x.len())?;
    let h = p.enc_hidden.forward_one(ArrayView1::from(x)).mapv(relu);
    let mu = p.enc_mu.forward_one(h.view());
    let logvar = p.enc_logvar.forward_one(h.view());
    Ok((mu.to_vec(), logvar.to_vec()))
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    check_dim(mu.len(), logvar.len())?;
    check_dim(mu.len(), eps.len())?;
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

pub fn decode(p: &VaeParams, z: &[f64]) -> Result<Vec<f64>> {
    check_dim(p.dec_hidden.input_dim(), z.len())?;
    let h = p.dec_hidden.forward_one(ArrayView1::from(z)).mapv(relu);
    Ok(p.dec_out.forward_one(h.view()).mapv(logistic).to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboTerms {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Squared reconstruction error and KL divergence of `N(mu, exp(logvar))`
/// from the standard normal.
pub fn elbo_loss(x: &[f64], x_hat: &[f64], mu: &[f64], logvar: &[f64]) -> Result<ElboTerms> {
    check_dim(x.len(), x_hat.len())?;
    check_dim(mu.len(), logvar.len())?;
    let recon = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>();
    let kl = kl_divergence(mu, logvar);
    Ok(ElboTerms {
        total: recon + kl,
        recon,
        kl,
    })
}

fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Latent features of one input: the encoder mean.
pub fn latent_features(p: &VaeParams, x: &[f64]) -> Result<Vec<f64>> {
    Ok(encode(p, x)?.0)
}

/// Encoder means for every row of `x`.
pub fn latent_matrix(p: &VaeParams, x: &Array2<f64>) -> Result<Array2<f64>> {
    check_dim(p.enc_hidden.input_dim(), x.ncols())?;
    let h = p.enc_hidden.forward(x.view()).mapv(relu);
    Ok(p.enc_mu.forward(h.view()))
}

/// Gradients of the batch-mean loss, one `Dense` per layer.
#[derive(Clone, Debug)]
pub struct VaeGrads {
    pub enc_hidden: Dense,
    pub enc_mu: Dense,
    pub enc_logvar: Dense,
    pub dec_hidden: Dense,
    pub dec_out: Dense,
}

fn dense_grad(delta: &Array2<f64>, input: &Array2<f64>) -> Dense {
    Dense {
        w: delta.t().dot(input),
        b: delta.sum_axis(Axis(0)),
    }
}

/// Mean total loss over the rows of `x` for the given noise, with its
/// analytic gradient.
pub fn loss_and_grad(p: &VaeParams, x: &Array2<f64>, eps: &Array2<f64>) -> (ElboTerms, VaeGrads) {
    let n = x.nrows() as f64;

    let a1 = p.enc_hidden.forward(x.view());
    let h1 = a1.mapv(relu);
    let mu = p.enc_mu.forward(h1.view());
    let logvar = p.enc_logvar.forward(h1.view());
    let sigma = logvar.mapv(|v| (0.5 * v).exp());
    let z = &mu + &(&sigma * eps);
    let a2 = p.dec_hidden.forward(z.view());
    let h2 = a2.mapv(relu);
    let x_hat = p.dec_out.forward(h2.view()).mapv(logistic);

    let diff = &x_hat - x;
    let recon = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let kl = mu
        .iter()
        .zip(logvar.iter())
        .map(|(m, lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum::<f64>()
        / n;

    // backward
    let d_a4 = (&diff * 2.0 / n) * &x_hat.mapv(|y| y * (1.0 - y));
    let g_out = dense_grad(&d_a4, &h2);
    let d_h2 = d_a4.dot(&p.dec_out.w);
    let d_a2 = &d_h2 * &a2.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let g_dec_hidden = dense_grad(&d_a2, &z);
    let d_z = d_a2.dot(&p.dec_hidden.w);

    let d_mu = &d_z + &(&mu / n);
    let d_logvar = &(&d_z * eps) * &(&sigma * 0.5) + &logvar.mapv(|v| 0.5 * (v.exp() - 1.0) / n);
    let g_mu = dense_grad(&d_mu, &h1);
    let g_logvar = dense_grad(&d_logvar, &h1);
    let d_h1 = d_mu.dot(&p.enc_mu.w) + d_logvar.dot(&p.enc_logvar.w);
    let d_a1 = &d_h1 * &a1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let g_enc_hidden = dense_grad(&d_a1, x);

    (
        ElboTerms {
            total: recon + kl,
            recon,
            kl,
        },
        VaeGrads {
            enc_hidden: g_enc_hidden,
            enc_mu: g_mu,
            enc_logvar: g_logvar,
            dec_hidden: g_dec_hidden,
            dec_out: g_out,
        },
    )
}

impl VaeParams {
    fn layers(&self) -> [&Dense; 5] {
        [
            &self.enc_hidden,
            &self.enc_mu,
            &self.enc_logvar,
            &self.dec_hidden,
            &self.dec_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut Dense; 5] {
        [
            &mut self.enc_hidden,
            &mut self.enc_mu,
            &mut self.enc_logvar,
            &mut self.dec_hidden,
            &mut self.dec_out,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// All parameters in a fixed order: per layer, weights row-major then
    /// biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .flat_map(|l| l.params().copied())
            .collect()
    }

    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| l.params_mut())
            .nth(index)
            .expect("parameter index in range")
    }

    pub fn is_finite(&self) -> bool {
        self.layers()
            .iter()
            .all(|l| l.params().all(|v| v.is_finite()))
    }

    fn apply_step(&mut self, grads: &VaeGrads, lr: f64) {
        let g = [
            &grads.enc_hidden,
            &grads.enc_mu,
            &grads.enc_logvar,
            &grads.dec_hidden,
            &grads.dec_out,
        ];
        for (layer, grad) in self.layers_mut().into_iter().zip(g) {
            layer.w.scaled_add(-lr, &grad.w);
            layer.b.scaled_add(-lr, &grad.b);
        }
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &VaeFile::from(self))?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<VaeParams> {
        let file: VaeFile = serde_json::from_reader(reader)?;
        file.try_into()
    }
}

impl VaeGrads {
    pub fn flatten(&self) -> Vec<f64> {
        [
            &self.enc_hidden,
            &self.enc_mu,
            &self.enc_logvar,
            &self.dec_hidden,
            &self.dec_out,
        ]
        .iter()
        .flat_map(|l| l.params().copied())
        .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedVae {
    pub params: VaeParams,
    /// Mean per-row total loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Trains on the rows of `x` (already normalized, training split only).
pub fn train_vae(x: &Array2<f64>, cfg: &VaeConfig) -> Result<TrainedVae> {
    train_vae_observed(x, cfg, |_, _| {})
}

/// [`train_vae`] calling `observe(epoch, params)` after every epoch.
pub fn train_vae_observed<F>(x: &Array2<f64>, cfg: &VaeConfig, mut observe: F) -> Result<TrainedVae>
where
    F: FnMut(usize, &VaeParams),
{
    if x.nrows() == 0 {
        return Err(WorkrError::EmptyTrainingSet);
    }
    check_dim(cfg.input_dim, x.ncols())?;
    let mut params = init_vae(cfg)?;
    // separate stream from the initializer
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f5a_4d1e);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = x.select(Axis(0), chunk);
            let eps = Array2::from_shape_fn((chunk.len(), cfg.latent_dim), |_| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let (terms, grads) = loss_and_grad(&params, &batch, &eps);
            if !terms.total.is_finite() {
                return Err(WorkrError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += terms.total * chunk.len() as f64;
            params.apply_step(&grads, cfg.learning_rate);
        }
        trace.push(epoch_loss / x.nrows() as f64);
        observe(epoch, &params);
    }
    Ok(TrainedVae {
        params,
        loss_trace: trace,
    })
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    /// `(out, in)` row-major.
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    enc_hidden: LayerFile,
    enc_mu: LayerFile,
    enc_logvar: LayerFile,
    dec_hidden: LayerFile,
    dec_out: LayerFile,
}

#[derive(Serialize, Deserialize)]
struct VaeFile {
    magic: String,
    config: VaeConfig,
    weights: WeightsFile,
}

impl From<&Dense> for LayerFile {
    fn from(d: &Dense) -> Self {
        LayerFile {
            w: d.w.rows().into_iter().map(|r| r.to_vec()).collect(),
            b: d.b.to_vec(),
        }
    }
}

impl LayerFile {
    fn into_dense(self, input: usize, output: usize) -> Result<Dense> {
        let bad = || WorkrError::ModelFormat("layer shape does not match config".into());
        if self.w.len() != output
            || self.b.len() != output
            || self.w.iter().any(|r| r.len() != input)
        {
            return Err(bad());
        }
        let flat: Vec<f64> = self.w.into_iter().flatten().collect();
        Ok(Dense {
            w: Array2::from_shape_vec((output, input), flat).map_err(|_| bad())?,
            b: Array1::from(self.b),
        })
    }
}

impl From<&VaeParams> for VaeFile {
    fn from(p: &VaeParams) -> Self {
        VaeFile {
            magic: VAE_MAGIC.into(),
            config: p.config.clone(),
            weights: WeightsFile {
                enc_hidden: (&p.enc_hidden).into(),
                enc_mu: (&p.enc_mu).into(),
                enc_logvar: (&p.enc_logvar).into(),
                dec_hidden: (&p.dec_hidden).into(),
                dec_out: (&p.dec_out).into(),
            },
        }
    }
}

impl TryFrom<VaeFile> for VaeParams {
    type Error = WorkrError;

    fn try_from(f: VaeFile) -> Result<VaeParams> {
        if f.magic != VAE_MAGIC {
            return Err(WorkrError::ModelFormat(format!("bad magic `{}`", f.magic)));
        }
        f.config.validate()?;
        let (d, h, l) = (f.config.input_dim, f.config.hidden_dim, f.config.latent_dim);
        let w = f.weights;
        let params = VaeParams {
            enc_hidden: w.enc_hidden.into_dense(d, h)?,
            enc_mu: w.enc_mu.into_dense(h, l)?,
            enc_logvar: w.enc_logvar.into_dense(h, l)?,
            dec_hidden: w.dec_hidden.into_dense(l, h)?,
            dec_out: w.dec_out.into_dense(h, d)?,
            config: f.config,
        };
        if !params.is_finite() {
            return Err(WorkrError::ModelFormat("non-finite weight".into()));
        }
        Ok(params)
    }
}
