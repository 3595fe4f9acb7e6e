//! Scalar quantization of attribute channels.
//!
//! Two quantizers are provided. The uniform quantizer (UQ) is the classic
//! min-max affine map with rounding. The robust quantizer (RQ) runs an
//! affine transform with an injected rounding perturbation and de-quantizes
//! through a closed-form ridge regression, which avoids clipping and lets
//! codes stray slightly outside `[0, 2^N - 1]` when the fit range is
//! overridden; codes are therefore carried as signed integers.

use crate::error::{Error, Result};

/// Default division-by-zero guard for the RQ affine transform.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Which quantizer a channel was coded with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum QuantizerKind {
    Uniform,
    Robust,
}

/// De-quantization metadata for a uniform-quantized channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UqParams {
    pub f_min: f64,
    pub f_max: f64,
    pub bit_depth: u8,
}

/// De-quantization metadata for a robust-quantized channel: `r = a*q + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RqParams {
    pub a: f64,
    pub b: f64,
    pub bit_depth: u8,
    pub epsilon: f64,
}

/// Per-channel params of either kind, as stored in the bitstream metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelParams {
    Uq(UqParams),
    Rq(RqParams),
}

impl ChannelParams {
    pub fn kind(&self) -> QuantizerKind {
        match self {
            ChannelParams::Uq(_) => QuantizerKind::Uniform,
            ChannelParams::Rq(_) => QuantizerKind::Robust,
        }
    }

    /// The two floats serialized into the metadata block.
    pub fn raw(&self) -> (f64, f64) {
        match self {
            ChannelParams::Uq(p) => (p.f_min, p.f_max),
            ChannelParams::Rq(p) => (p.a, p.b),
        }
    }

    pub fn dequantize(&self, codes: &[i64]) -> Result<Vec<f64>> {
        match self {
            ChannelParams::Uq(p) => uq_dequantize(codes, p),
            ChannelParams::Rq(p) => Ok(rq_dequantize(codes, p)),
        }
    }
}

fn check_bit_depth(n: u8) -> Result<()> {
    if n == 0 || n > 32 {
        return Err(Error::Config(format!("bit depth {n} outside [1, 32]")));
    }
    Ok(())
}

/// Number of quantization steps, `2^N - 1`.
fn levels(bit_depth: u8) -> f64 {
    (1u64 << bit_depth) as f64 - 1.0
}

/// Uniform quantization: `q = floor((f - f_min) * (2^N - 1) / (f_max - f_min) + 1/2)`.
///
/// Every value must lie within `[f_min, f_max]`; out-of-range input is an
/// error rather than being clipped.
pub fn uq_quantize(
    channel: &[f64],
    bit_depth: u8,
    f_min: f64,
    f_max: f64,
) -> Result<(Vec<i64>, UqParams)> {
    check_bit_depth(bit_depth)?;
    if f_max <= f_min {
        return Err(Error::DegenerateRange(f_min));
    }
    let scale = levels(bit_depth) / (f_max - f_min);
    let mut codes = Vec::with_capacity(channel.len());
    for (i, &f) in channel.iter().enumerate() {
        if !(f_min..=f_max).contains(&f) {
            return Err(Error::Range {
                value: f,
                min: f_min,
                max: f_max,
                index: i,
            });
        }
        codes.push(((f - f_min) * scale + 0.5).floor() as i64);
    }
    Ok((
        codes,
        UqParams {
            f_min,
            f_max,
            bit_depth,
        },
    ))
}

/// Uniform de-quantization: `r = q * (f_max - f_min) / (2^N - 1) + f_min`.
pub fn uq_dequantize(codes: &[i64], params: &UqParams) -> Result<Vec<f64>> {
    check_bit_depth(params.bit_depth)?;
    let max_code = (1u64 << params.bit_depth) - 1;
    let step = (params.f_max - params.f_min) / levels(params.bit_depth);
    let mut out = Vec::with_capacity(codes.len());
    for (i, &q) in codes.iter().enumerate() {
        if q < 0 || q as u64 > max_code {
            return Err(Error::Code {
                code: q,
                max: max_code,
                index: i,
            });
        }
        out.push(q as f64 * step + params.f_min);
    }
    Ok(out)
}

/// Robust quantization with the channel's observed min/max as the fit range.
pub fn rq_fit_and_quantize(
    channel: &[f64],
    bit_depth: u8,
    lambda: f64,
    epsilon: f64,
) -> Result<(Vec<i64>, RqParams)> {
    let (f_min, f_max) = channel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    rq_fit_and_quantize_with_range(channel, bit_depth, lambda, epsilon, f_min, f_max)
}

/// Robust quantization against an explicit `[f_min, f_max]` fit range.
///
/// The affine transform `A(f) = (f - f_min) / (f_max - f_min + eps) * (2^N - 1)`
/// is rounded to the integer code; the rounding perturbation stays within
/// `[-1/2, 1/2]` and no clipping is applied. De-quantization parameters come
/// from the ridge problem `min (1/2M) ||a*q + b - f||^2 + (lambda/2) a^2`,
/// whose stationary point is `a = Cov_fq / (Var_q + lambda)`, `b = mean(f) -
/// a * mean(q)` with population moments.
pub fn rq_fit_and_quantize_with_range(
    channel: &[f64],
    bit_depth: u8,
    lambda: f64,
    epsilon: f64,
    f_min: f64,
    f_max: f64,
) -> Result<(Vec<i64>, RqParams)> {
    check_bit_depth(bit_depth)?;
    if channel.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "robust fit needs at least 2 values, got {}",
            channel.len()
        )));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon {epsilon} must be > 0")));
    }
    if lambda < 0.0 {
        return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
    }
    if f_max <= f_min {
        return Err(Error::DegenerateRange(f_min));
    }

    let scale = levels(bit_depth) / (f_max - f_min + epsilon);
    let m = channel.len() as f64;
    let codes: Vec<i64> = channel
        .iter()
        .map(|&f| ((f - f_min) * scale).round() as i64)
        .collect();

    let f_mean = channel.iter().sum::<f64>() / m;
    let q_mean = codes.iter().map(|&q| q as f64).sum::<f64>() / m;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&f, &q) in channel.iter().zip(&codes) {
        let dq = q as f64 - q_mean;
        cov += (f - f_mean) * dq;
        var += dq * dq;
    }
    cov /= m;
    var /= m;

    let denom = var + lambda;
    if denom == 0.0 {
        return Err(Error::SingularFit);
    }
    let a = cov / denom;
    let b = f_mean - a * q_mean;
    Ok((
        codes,
        RqParams {
            a,
            b,
            bit_depth,
            epsilon,
        },
    ))
}

/// Robust de-quantization: `r = a*q + b`.
pub fn rq_dequantize(codes: &[i64], params: &RqParams) -> Vec<f64> {
    codes
        .iter()
        .map(|&q| params.a * q as f64 + params.b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn uq_endpoints() {
        let (q, _) = uq_quantize(&[2.0], 5, 2.0, 7.0).unwrap();
        assert_eq!(q, vec![0]);
        let (q, _) = uq_quantize(&[7.0], 8, 2.0, 7.0).unwrap();
        assert_eq!(q, vec![255]);
    }

    #[test]
    fn uq_midpoint_rounds_up() {
        // floor(0.5 * 3 + 0.5) = 2
        let (q, _) = uq_quantize(&[0.5], 2, 0.0, 1.0).unwrap();
        assert_eq!(q, vec![2]);
    }

    #[test]
    fn uq_dequantize_examples() {
        let p = UqParams {
            f_min: 0.0,
            f_max: 1.0,
            bit_depth: 2,
        };
        assert_eq!(uq_dequantize(&[0], &p).unwrap(), vec![0.0]);
        let r = uq_dequantize(&[2], &p).unwrap();
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uq_out_of_range_errors() {
        assert!(matches!(
            uq_quantize(&[1.5], 4, 0.0, 1.0),
            Err(Error::Range { index: 0, .. })
        ));
        assert!(matches!(
            uq_quantize(&[0.0], 4, 1.0, 1.0),
            Err(Error::DegenerateRange(_))
        ));
        let p = UqParams {
            f_min: 0.0,
            f_max: 1.0,
            bit_depth: 2,
        };
        assert!(matches!(
            uq_dequantize(&[4], &p),
            Err(Error::Code { code: 4, .. })
        ));
    }

    #[test]
    fn uq_round_trip_error_bound_n12() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let vals: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        let (codes, p) = uq_quantize(&vals, 12, -5.0, 5.0).unwrap();
        let back = uq_dequantize(&codes, &p).unwrap();
        let bound = 10.0 / (2.0 * 4095.0);
        for (v, r) in vals.iter().zip(&back) {
            assert!((v - r).abs() <= bound + 1e-15);
        }
    }

    #[test]
    fn rq_plain_ramp_is_identity() {
        let f = [0.0, 1.0, 2.0, 3.0];
        let (q, p) = rq_fit_and_quantize(&f, 2, 0.0, DEFAULT_EPSILON).unwrap();
        assert_eq!(q, vec![0, 1, 2, 3]);
        assert!((p.a - 1.0).abs() < 1e-8, "a = {}", p.a);
        assert!(p.b.abs() < 1e-8, "b = {}", p.b);
    }

    #[test]
    fn rq_ridge_shrinks_slope() {
        let f = [0.0, 1.0, 2.0, 3.0];
        let (q, p) = rq_fit_and_quantize(&f, 2, 0.01, DEFAULT_EPSILON).unwrap();
        assert_eq!(q, vec![0, 1, 2, 3]);
        // a = Cov/(Var + lambda) = 1.25/1.26, b = 1.5 - 1.5a
        assert!((p.a - 1.25 / 1.26).abs() < 1e-8);
        assert!((p.b - (1.5 - 1.5 * 1.25 / 1.26)).abs() < 1e-8);
        let r = rq_dequantize(&q, &p);
        let expect = [0.011905, 1.003968, 1.996032, 2.988095];
        for (got, want) in r.iter().zip(expect) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn rq_huge_lambda_collapses_to_mean() {
        let f = [4.0, -1.0, 2.5, 9.0, 0.0];
        let (q, p) = rq_fit_and_quantize(&f, 8, 1e12, DEFAULT_EPSILON).unwrap();
        assert!(p.a.abs() < 1e-6);
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!((p.b - mean).abs() < 1e-4);
        let r = rq_dequantize(&q, &p);
        for v in r {
            assert!((v - mean).abs() < 1e-3);
        }
    }

    #[test]
    fn rq_smooth_only_limit_is_constant() {
        let p = RqParams {
            a: 0.0,
            b: 2.5,
            bit_depth: 8,
            epsilon: DEFAULT_EPSILON,
        };
        assert_eq!(rq_dequantize(&[0, 5, 200], &p), vec![2.5, 2.5, 2.5]);
    }

    #[test]
    fn rq_constant_channel_errors() {
        assert!(matches!(
            rq_fit_and_quantize(&[3.0, 3.0, 3.0], 8, 0.0, DEFAULT_EPSILON),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn rq_lattice_values_reconstruct_exactly() {
        // A(f) lands on integers, so sigma ~ 0 and lambda = 0 recovers f.
        let f: Vec<f64> = (0..16).map(|j| j as f64).collect();
        let (q, p) = rq_fit_and_quantize(&f, 4, 0.0, DEFAULT_EPSILON).unwrap();
        let r = rq_dequantize(&q, &p);
        for (got, want) in r.iter().zip(&f) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    /// Ridge objective the fit is supposed to minimize.
    fn rq_objective(f: &[f64], q: &[i64], a: f64, b: f64, lambda: f64) -> f64 {
        let m = f.len() as f64;
        let sse: f64 = f
            .iter()
            .zip(q)
            .map(|(&fv, &qv)| (a * qv as f64 + b - fv).powi(2))
            .sum();
        sse / (2.0 * m) + lambda / 2.0 * a * a
    }

    #[test]
    fn rq_fit_beats_grid_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let f: Vec<f64> = (0..64).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let lambda = rng.gen_range(0.0..0.1);
            let (q, p) = rq_fit_and_quantize(&f, 6, lambda, DEFAULT_EPSILON).unwrap();
            let best = rq_objective(&f, &q, p.a, p.b, lambda);
            let d = 1e-3;
            for da in [-d, 0.0, d] {
                for db in [-d, 0.0, d] {
                    let j = rq_objective(&f, &q, p.a + da, p.b + db, lambda);
                    assert!(j >= best - 1e-12, "perturbed {j} < fitted {best}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn uq_round_trip_within_half_step(
            seed in 0u64..500,
            bit_depth in 2u8..=16,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lo = rng.gen_range(-100.0..99.0);
            let hi = lo + rng.gen_range(0.5..100.0);
            let vals: Vec<f64> = (0..200).map(|_| rng.gen_range(lo..=hi)).collect();
            let (codes, p) = uq_quantize(&vals, bit_depth, lo, hi).unwrap();
            let max_code = (1i64 << bit_depth) - 1;
            prop_assert!(codes.iter().all(|&q| (0..=max_code).contains(&q)));
            let back = uq_dequantize(&codes, &p).unwrap();
            let step = (hi - lo) / max_code as f64;
            for (v, r) in vals.iter().zip(&back) {
                prop_assert!((v - r).abs() <= step / 2.0 + 1e-12);
            }
        }

        #[test]
        fn rq_perturbation_stays_in_half_unit(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..100).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                return Ok(());
            }
            let (codes, _) = rq_fit_and_quantize(&vals, 10, 0.01, DEFAULT_EPSILON).unwrap();
            let scale = ((1u64 << 10) - 1) as f64 / (hi - lo + DEFAULT_EPSILON);
            for (&f, &q) in vals.iter().zip(&codes) {
                let a = (f - lo) * scale;
                let sigma = q as f64 - a;
                prop_assert!((-0.5..=0.5).contains(&sigma));
            }
        }
    }
}
