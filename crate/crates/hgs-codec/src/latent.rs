//! Attribute-channel dimensionality reduction.
//!
//! PCA gives the optimal linear low-rank map and doubles as the warm start
//! for the learnable path: a per-primitive latent code plus a one-hidden-
//! layer decoder, jointly refined by plain full-batch gradient descent on
//! the attribute reconstruction error. Color DC and SH share one latent and
//! one decoder (48 output channels); rotation gets its own (4 channels).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

/// Decoder activation between the two dense layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

/// One-hidden-layer decoder mapping k-dim latents to d_out attribute values:
/// `rows = act(Z * W1 + b1) * W2 + b2`. Weights are stored as `f32`, the
/// precision they occupy in the bitstream.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub k: usize,
    pub hidden: usize,
    pub d_out: usize,
    pub activation: Activation,
    /// `k x hidden`, row-major.
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// `hidden x d_out`, row-major.
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
}

impl LatentModel {
    pub fn weight_count(&self) -> usize {
        self.k * self.hidden + self.hidden + self.hidden * self.d_out + self.d_out
    }
}

/// PCA of a sample matrix: mean row, top-q components, full singular
/// spectrum of the centered data.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub mean: DVector<f64>,
    /// `d x q`, orthonormal columns.
    pub components: DMatrix<f64>,
    /// All `min(n, d)` singular values, non-increasing.
    pub singular_values: DVector<f64>,
}

impl PcaResult {
    /// Projects rows of `x` onto the top-q components.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let centered = center_rows(x, &self.mean);
        centered * &self.components
    }

    /// Reconstructs rows from their projections.
    pub fn reconstruct(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z * self.components.transpose();
        add_row_bias(&mut out, &self.mean, 1.0);
        out
    }
}

fn center_rows(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    add_row_bias(&mut out, mean, -1.0);
    out
}

/// Adds `scale * bias[j]` to every entry of column `j`; column-wise to stay
/// friendly to the column-major storage.
fn add_row_bias(m: &mut DMatrix<f64>, bias: &DVector<f64>, scale: f64) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(scale * bias[j]);
    }
}

/// PCA via the symmetric eigendecomposition of the d x d scatter matrix.
/// Components are the top-q eigenvectors; singular values are the square
/// roots of the eigenvalues of `X0^T X0`.
pub fn pca_fit(x: &DMatrix<f64>, q: usize) -> Result<PcaResult> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    if q == 0 || q > d.min(n) {
        return Err(Error::Config(format!(
            "rank {q} outside [1, min(n, d) = {}]",
            d.min(n)
        )));
    }
    let mean = x.row_mean().transpose();
    let centered = center_rows(x, &mean);
    let scatter = centered.transpose() * &centered;
    let eig = scatter.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let spectrum_len = d.min(n);
    let mut singular_values = DVector::zeros(spectrum_len);
    for (rank, &i) in order.iter().take(spectrum_len).enumerate() {
        singular_values[rank] = eig.eigenvalues[i].max(0.0).sqrt();
    }
    let mut components = DMatrix::zeros(d, q);
    for (rank, &i) in order.iter().take(q).enumerate() {
        components.set_column(rank, &eig.eigenvectors.column(i));
    }
    Ok(PcaResult {
        mean,
        components,
        singular_values,
    })
}

/// Fractions of total variance per principal direction, summing to 1.
pub fn energy_spectrum(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = x.ncols();
    let pca = pca_fit(x, 1.min(d))?;
    let mut energies = vec![0.0f64; d];
    for (i, s) in pca.singular_values.iter().enumerate() {
        energies[i] = s * s;
    }
    let total: f64 = energies.iter().sum();
    if total > 0.0 {
        for e in &mut energies {
            *e /= total;
        }
    } else {
        // zero-variance data: report a degenerate all-in-first spectrum
        energies[0] = 1.0;
    }
    Ok(energies)
}

/// Configuration for the joint latent/decoder fit.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LatentFitConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for LatentFitConfig {
    fn default() -> Self {
        LatentFitConfig {
            hidden: 50,
            activation: Activation::Relu,
            epochs: 2000,
            step_size: 1e-2,
            seed: 0,
        }
    }
}

/// Decoder parameters in full precision, used during fitting and for
/// gradient checks.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub activation: Activation,
}

/// Gradients of the fit loss with respect to every parameter block.
#[derive(Debug, Clone)]
pub struct FitGradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub z: DMatrix<f64>,
}

impl DecoderState {
    pub fn decode(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut hidden = z * &self.w1;
        add_row_bias(&mut hidden, &self.b1, 1.0);
        if self.activation == Activation::Relu {
            hidden.apply(|v| *v = v.max(0.0));
        }
        let mut out = hidden * &self.w2;
        add_row_bias(&mut out, &self.b2, 1.0);
        out
    }

    fn to_model(&self, k: usize) -> LatentModel {
        LatentModel {
            k,
            hidden: self.w1.ncols(),
            d_out: self.w2.ncols(),
            activation: self.activation,
            w1: self.w1.transpose().iter().map(|&v| v as f32).collect(),
            b1: self.b1.iter().map(|&v| v as f32).collect(),
            w2: self.w2.transpose().iter().map(|&v| v as f32).collect(),
            b2: self.b2.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Mean squared reconstruction loss `(1/2n) ||decode(Z) - X||_F^2` and its
/// analytic gradients. Exposed so the fit can be cross-checked against
/// finite differences.
pub fn fit_loss_and_gradients(
    state: &DecoderState,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> (f64, FitGradients) {
    let n = x.nrows() as f64;
    let mut pre = z * &state.w1;
    add_row_bias(&mut pre, &state.b1, 1.0);
    let hidden = match state.activation {
        Activation::Identity => pre.clone(),
        Activation::Relu => pre.map(|v| v.max(0.0)),
    };
    let mut out = &hidden * &state.w2;
    add_row_bias(&mut out, &state.b2, 1.0);
    out -= x; // residual, reusing the output buffer
    let resid = out;
    let loss = resid.norm_squared() / (2.0 * n);

    // d loss / d out = resid / n
    let dout = resid / n;
    let gw2 = hidden.transpose() * &dout;
    let gb2 = dout.row_sum().transpose();
    let mut dhidden = &dout * state.w2.transpose();
    if state.activation == Activation::Relu {
        dhidden.zip_apply(&pre, |g, p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
    }
    let gw1 = z.transpose() * &dhidden;
    let gb1 = dhidden.row_sum().transpose();
    let gz = &dhidden * state.w1.transpose();
    (
        loss,
        FitGradients {
            w1: gw1,
            b1: gb1,
            w2: gw2,
            b2: gb2,
            z: gz,
        },
    )
}

/// Builds the warm start on the scale-normalized problem: latents from the
/// PCA projection and a decoder that reproduces the PCA reconstruction at
/// initialization, plus a trace of seeded noise. With ReLU the identity is
/// embedded through paired units, `relu(t) - relu(-t) = t`, so hidden
/// activations stay on the data scale.
fn initialize(
    x: &DMatrix<f64>,
    k: usize,
    cfg: &LatentFitConfig,
) -> Result<(DMatrix<f64>, DecoderState)> {
    let (n, d) = x.shape();
    let pca = pca_fit(x, k.min(d).min(n))?;
    let q = pca.components.ncols();
    let mut z = DMatrix::zeros(n, k);
    let proj = pca.project(x);
    z.view_mut((0, 0), (n, q)).copy_from(&proj);

    let hidden = cfg.hidden;
    if hidden < k {
        return Err(Error::Config(format!(
            "hidden width {hidden} below latent width {k}"
        )));
    }

    let mut w1 = DMatrix::zeros(k, hidden);
    let mut w2 = DMatrix::zeros(hidden, d);
    match cfg.activation {
        Activation::Identity => {
            // the first k hidden units carry the latent straight through
            for i in 0..k {
                w1[(i, i)] = 1.0;
            }
            w2.view_mut((0, 0), (q, d))
                .copy_from(&pca.components.transpose());
        }
        Activation::Relu => {
            let pairs = q.min(hidden / 2);
            for j in 0..pairs {
                w1[(j, 2 * j)] = 1.0;
                w1[(j, 2 * j + 1)] = -1.0;
                for c in 0..d {
                    w2[(2 * j, c)] = pca.components[(c, j)];
                    w2[(2 * j + 1, c)] = -pca.components[(c, j)];
                }
            }
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jitter = |m: &mut DMatrix<f64>| {
        for v in m.iter_mut() {
            *v += rng.gen_range(-1e-5..1e-5);
        }
    };
    jitter(&mut w1);
    jitter(&mut w2);

    Ok((
        z,
        DecoderState {
            w1,
            b1: DVector::zeros(hidden),
            w2,
            b2: pca.mean.clone(),
            activation: cfg.activation,
        },
    ))
}

/// Jointly fits per-sample latents and the decoder by full-batch gradient
/// descent with a fixed step. The problem is fitted on data divided by its
/// centered RMS and the scale folded back into the output layer, which
/// keeps the default step stable regardless of attribute magnitudes.
/// Deterministic for a given config and seed.
pub fn fit_latent_decoder(
    x: &DMatrix<f64>,
    k: usize,
    cfg: &LatentFitConfig,
) -> Result<(DMatrix<f64>, LatentModel)> {
    let (n, d) = x.shape();
    if k == 0 || n < k {
        return Err(Error::Config(format!(
            "latent width {k} outside [1, n = {n}]"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "latent fit needs at least 2 samples, got {n}"
        )));
    }

    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    add_row_bias(&mut centered, &mean, -1.0);
    let rho = (centered.norm_squared() / (n * d) as f64).sqrt();
    if rho == 0.0 {
        // constant rows: the bias alone reconstructs exactly
        let state = DecoderState {
            w1: DMatrix::zeros(k, cfg.hidden),
            b1: DVector::zeros(cfg.hidden),
            w2: DMatrix::zeros(cfg.hidden, d),
            b2: mean,
            activation: cfg.activation,
        };
        return Ok((DMatrix::zeros(n, k), state.to_model(k)));
    }
    let x_scaled = x / rho;

    let (mut z, mut state) = initialize(&x_scaled, k, cfg)?;
    for epoch in 0..cfg.epochs {
        let (loss, grads) = fit_loss_and_gradients(&state, &z, &x_scaled);
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "loss became non-finite at epoch {epoch}"
            )));
        }
        let lr = cfg.step_size;
        state.w1 -= lr * grads.w1;
        state.b1 -= lr * grads.b1;
        state.w2 -= lr * grads.w2;
        state.b2 -= lr * grads.b2;
        z -= lr * grads.z;
    }
    // fold the data scale back into the output layer
    state.w2 *= rho;
    state.b2 *= rho;
    let model = state.to_model(k);
    Ok((z, model))
}

/// Runs the decoder on latents: `act(Z * W1 + b1) * W2 + b2` per row.
pub fn decode_latent(z: &DMatrix<f64>, model: &LatentModel) -> Result<DMatrix<f64>> {
    if z.ncols() != model.k {
        return Err(Error::Shape(format!(
            "latents have {} columns, model expects {}",
            z.ncols(),
            model.k
        )));
    }
    let expect = model.weight_count();
    let have = model.w1.len() + model.b1.len() + model.w2.len() + model.b2.len();
    if expect != have {
        return Err(Error::Shape(format!(
            "model has {have} weights, dimensions require {expect}"
        )));
    }
    let state = DecoderState {
        w1: DMatrix::from_fn(model.k, model.hidden, |r, c| {
            model.w1[r * model.hidden + c] as f64
        }),
        b1: DVector::from_fn(model.hidden, |i, _| model.b1[i] as f64),
        w2: DMatrix::from_fn(model.hidden, model.d_out, |r, c| {
            model.w2[r * model.d_out + c] as f64
        }),
        b2: DVector::from_fn(model.d_out, |i, _| model.b2[i] as f64),
        activation: model.activation,
    };
    Ok(state.decode(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0))
    }

    fn rank_k_matrix(n: usize, d: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let z = random_matrix(n, k, seed);
        let w = random_matrix(k, d, seed + 1);
        z * w
    }

    #[test]
    fn rank_one_data_reconstructs_exactly() {
        let mut x = rank_k_matrix(40, 6, 1, 2);
        for mut row in x.row_iter_mut() {
            row.add_scalar_mut(3.0);
        }
        let pca = pca_fit(&x, 1).unwrap();
        let err = (&x - pca.reconstruct(&pca.project(&x))).norm_squared();
        assert!(err < 1e-18 * x.norm_squared());
    }

    #[test]
    fn full_rank_pca_is_lossless() {
        let x = random_matrix(30, 5, 3);
        let pca = pca_fit(&x, 5).unwrap();
        let err = (&x - pca.reconstruct(&pca.project(&x))).norm_squared();
        assert!(err < 1e-18 * x.norm_squared());
    }

    #[test]
    fn reconstruction_error_matches_discarded_energy() {
        // independent oracle: nalgebra's SVD of the centered matrix
        let x = random_matrix(100, 4, 5);
        let mean = x.row_mean();
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        let oracle = centered.clone().svd(false, false);
        let mut sv: Vec<f64> = oracle.singular_values.iter().cloned().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let q = 2;
        let pca = pca_fit(&x, q).unwrap();
        let err = (&x - pca.reconstruct(&pca.project(&x))).norm_squared();
        let discarded: f64 = sv[q..].iter().map(|s| s * s).sum();
        assert!(
            (err - discarded).abs() <= 1e-9 * discarded.max(1.0),
            "{err} vs {discarded}"
        );
        // and the spectrum itself agrees with the oracle
        for (a, b) in pca.singular_values.iter().zip(&sv) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn components_are_orthonormal() {
        let x = random_matrix(200, 8, 11);
        let pca = pca_fit(&x, 5).unwrap();
        let gram = pca.components.transpose() * &pca.components;
        for r in 0..5 {
            for c in 0..5 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((gram[(r, c)] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spectrum_of_rank_one_data() {
        let x = rank_k_matrix(50, 4, 1, 9);
        let e = energy_spectrum(&x).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-9);
        assert!(e[1..].iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn spectrum_sums_to_one() {
        for seed in 0..5 {
            let x = random_matrix(64, 7, seed);
            let e = energy_spectrum(&x).unwrap();
            let total: f64 = e.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn white_data_spectrum_is_flat() {
        let x = random_matrix(10_000, 4, 21);
        let e = energy_spectrum(&x).unwrap();
        for &v in &e {
            assert!((v - 0.25).abs() < 0.05, "fraction {v} too far from 1/d");
        }
    }

    #[test]
    fn exact_rank_k_data_fits_to_zero_error() {
        let x = rank_k_matrix(60, 8, 3, 4);
        let cfg = LatentFitConfig {
            activation: Activation::Identity,
            epochs: 200,
            ..Default::default()
        };
        let (z, model) = fit_latent_decoder(&x, 3, &cfg).unwrap();
        let out = decode_latent(&z, &model).unwrap();
        let rel = (&out - &x).norm() / x.norm();
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn full_width_latent_is_identity() {
        let x = random_matrix(50, 4, 6);
        let cfg = LatentFitConfig {
            activation: Activation::Identity,
            ..Default::default()
        };
        let (z, model) = fit_latent_decoder(&x, 4, &cfg).unwrap();
        let out = decode_latent(&z, &model).unwrap();
        let rel = (&out - &x).norm() / x.norm();
        assert!(rel <= 1e-6, "relative error {rel}");
    }

    #[test]
    fn linear_fit_cannot_beat_pca() {
        let x = random_matrix(120, 6, 8);
        let q = 2;
        let pca = pca_fit(&x, q).unwrap();
        let pca_err = (&x - pca.reconstruct(&pca.project(&x))).norm_squared();
        let cfg = LatentFitConfig {
            activation: Activation::Identity,
            epochs: 300,
            ..Default::default()
        };
        let (z, model) = fit_latent_decoder(&x, q, &cfg).unwrap();
        let fit_err = (&decode_latent(&z, &model).unwrap() - &x).norm_squared();
        assert!(fit_err >= pca_err - 1e-6, "{fit_err} vs {pca_err}");
    }

    #[test]
    fn relu_fit_converges_on_rank_k_data() {
        let x = rank_k_matrix(80, 8, 2, 12);
        let cfg = LatentFitConfig {
            epochs: 200,
            ..Default::default()
        };
        let (z, model) = fit_latent_decoder(&x, 2, &cfg).unwrap();
        let out = decode_latent(&z, &model).unwrap();
        let rel = (&out - &x).norm() / x.norm();
        assert!(rel <= 1e-3, "relative error {rel}");
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_matrix(40, 6, 13);
        let cfg = LatentFitConfig {
            epochs: 50,
            ..Default::default()
        };
        let (z1, m1) = fit_latent_decoder(&x, 2, &cfg).unwrap();
        let (z2, m2) = fit_latent_decoder(&x, 2, &cfg).unwrap();
        assert_eq!(z1, z2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn decode_zero_weights_gives_bias_rows() {
        let model = LatentModel {
            k: 2,
            hidden: 3,
            d_out: 4,
            activation: Activation::Relu,
            w1: vec![0.0; 6],
            b1: vec![0.0; 3],
            w2: vec![0.0; 12],
            b2: vec![1.0, -2.0, 0.5, 0.0],
        };
        let z = DMatrix::from_row_slice(5, 2, &[1.0; 10]);
        let out = decode_latent(&z, &model).unwrap();
        for row in out.row_iter() {
            assert_eq!(
                row.iter().cloned().collect::<Vec<_>>(),
                vec![1.0, -2.0, 0.5, 0.0]
            );
        }
    }

    #[test]
    fn decode_matches_hand_rolled_matmul() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let (k, hidden, d_out, n) = (3, 5, 4, 7);
        let model = LatentModel {
            k,
            hidden,
            d_out,
            activation: Activation::Relu,
            w1: (0..k * hidden)
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            w2: (0..hidden * d_out)
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect(),
            b2: (0..d_out).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
        };
        let z = DMatrix::from_fn(n, k, |_, _| rng.gen_range(-1.0..1.0));
        let out = decode_latent(&z, &model).unwrap();
        for i in 0..n {
            let mut hidden_row = vec![0.0f64; hidden];
            for (h, hv) in hidden_row.iter_mut().enumerate() {
                let mut acc = model.b1[h] as f64;
                for j in 0..k {
                    acc += z[(i, j)] * model.w1[j * hidden + h] as f64;
                }
                *hv = acc.max(0.0);
            }
            for o in 0..d_out {
                let mut acc = model.b2[o] as f64;
                for (h, hv) in hidden_row.iter().enumerate() {
                    acc += hv * model.w2[h * d_out + o] as f64;
                }
                assert!((out[(i, o)] - acc).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let model = LatentModel {
            k: 2,
            hidden: 3,
            d_out: 4,
            activation: Activation::Identity,
            w1: vec![0.0; 6],
            b1: vec![0.0; 3],
            w2: vec![0.0; 12],
            b2: vec![0.0; 4],
        };
        let z = DMatrix::zeros(5, 3);
        assert!(matches!(decode_latent(&z, &model), Err(Error::Shape(_))));
    }

    /// Seeded random fit state with non-trivial residuals for the
    /// finite-difference comparison.
    pub(crate) fn gradcheck_state(
        n: usize,
        d: usize,
        k: usize,
        hidden: usize,
        activation: Activation,
        seed: u64,
    ) -> (DMatrix<f64>, DMatrix<f64>, DecoderState) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        fn m(rng: &mut rand_chacha::ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
            DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
        }
        let x = m(&mut rng, n, d);
        let z = m(&mut rng, n, k);
        let w1 = m(&mut rng, k, hidden);
        let b1 = DVector::from_fn(hidden, |_, _| rng.gen_range(-0.5..0.5));
        let w2 = m(&mut rng, hidden, d);
        let b2 = DVector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
        let state = DecoderState {
            w1,
            b1,
            w2,
            b2,
            activation,
        };
        (x, z, state)
    }

    pub(crate) fn max_gradcheck_error(
        x: &DMatrix<f64>,
        z: &DMatrix<f64>,
        state: &DecoderState,
    ) -> f64 {
        let (_, grads) = fit_loss_and_gradients(state, z, x);
        let h = 1e-5;
        let loss_at =
            |state: &DecoderState, z: &DMatrix<f64>| fit_loss_and_gradients(state, z, x).0;
        let rel = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            (analytic - numeric).abs() / denom
        };

        let mut worst = 0.0f64;
        for r in 0..state.w1.nrows() {
            for c in 0..state.w1.ncols() {
                let mut sp = state.clone();
                sp.w1[(r, c)] += h;
                let mut sm = state.clone();
                sm.w1[(r, c)] -= h;
                worst = worst.max(rel(grads.w1[(r, c)], loss_at(&sp, z), loss_at(&sm, z)));
            }
        }
        for r in 0..state.w2.nrows() {
            for c in 0..state.w2.ncols() {
                let mut sp = state.clone();
                sp.w2[(r, c)] += h;
                let mut sm = state.clone();
                sm.w2[(r, c)] -= h;
                worst = worst.max(rel(grads.w2[(r, c)], loss_at(&sp, z), loss_at(&sm, z)));
            }
        }
        for i in 0..state.b1.len() {
            let mut sp = state.clone();
            sp.b1[i] += h;
            let mut sm = state.clone();
            sm.b1[i] -= h;
            worst = worst.max(rel(grads.b1[i], loss_at(&sp, z), loss_at(&sm, z)));
        }
        for i in 0..state.b2.len() {
            let mut sp = state.clone();
            sp.b2[i] += h;
            let mut sm = state.clone();
            sm.b2[i] -= h;
            worst = worst.max(rel(grads.b2[i], loss_at(&sp, z), loss_at(&sm, z)));
        }
        for r in 0..z.nrows() {
            for c in 0..z.ncols() {
                let mut zp = z.clone();
                zp[(r, c)] += h;
                let mut zm = z.clone();
                zm[(r, c)] -= h;
                worst = worst.max(rel(
                    grads.z[(r, c)],
                    loss_at(state, &zp),
                    loss_at(state, &zm),
                ));
            }
        }
        worst
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for (activation, seed) in [(Activation::Identity, 40u64), (Activation::Relu, 41)] {
            let (x, z, state) = gradcheck_state(10, 4, 2, 6, activation, seed);
            let worst = max_gradcheck_error(&x, &z, &state);
            assert!(worst < 1e-4, "{activation:?}: worst relative error {worst}");
        }
    }
}
