//! Circular statistics of phase readouts.
//!
//! Readout j of an R-bit register is the point j/2^R on the unit circle. The
//! first trigonometric moment θ₁ = Σ p_j e^{i2πj/2^R} gives the mean resultant
//! length ρ = |θ₁| and the mean phase direction μ = arg θ₁ / 2π (mod 1).
//!
//! For an eigenstate with phase φ the moment reduces to two terms,
//! θ₁ = [(N−1) e^{i2πφ} + e^{−i2π(N−1)φ}] / N with N = 2^R, which we evaluate as
//! e^{i2πφ}(A + e^{−iy})/N with A = N − 1 and y = 2πNφ. This keeps μ continuous
//! and avoids catastrophic cancellation for large R.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qpe::{analytic_pmf, ParentDistribution, PhaseMass, PhaseSample};
use crate::rng::Streams;

const RHO_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularMoment {
    pub rho: f64,
    /// In [0, 1).
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Majority,
    MeanDirection,
    MeanDirectionInverted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    /// In [0, 1).
    pub value: f64,
    pub method: Estimator,
    /// Circular standard deviation of the sample the estimate came from.
    pub sigma: f64,
    pub r: usize,
}

/// Signed circular difference a − b folded into [−1/2, 1/2).
pub fn circular_diff(a: f64, b: f64) -> f64 {
    (a - b + 0.5).rem_euclid(1.0) - 0.5
}

/// min(|Δ|, 1 − |Δ|).
pub fn circular_distance(a: f64, b: f64) -> f64 {
    circular_diff(a, b).abs()
}

/// First trigonometric moment of a readout histogram or distribution.
pub fn sample_moment(m: &impl PhaseMass) -> Result<CircularMoment> {
    let n = (1usize << m.resolution()) as f64;
    let masses = m.masses();
    let total: f64 = masses.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("empty sample"));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for (j, &w) in masses.iter().enumerate() {
        let (s, c) = (2.0 * PI * j as f64 / n).sin_cos();
        re += w * c;
        im += w * s;
    }
    let (re, im) = (re / total, im / total);
    let rho = re.hypot(im);
    if rho < RHO_MIN {
        return Err(Error::UndefinedDirection(rho));
    }
    Ok(CircularMoment {
        rho,
        mu: (im.atan2(re) / (2.0 * PI)).rem_euclid(1.0),
    })
}

fn two_term(phi: f64, r: usize) -> (f64, f64, f64) {
    let n = f64::powi(2.0, r as i32);
    let a = n - 1.0;
    let y = 2.0 * PI * (n * phi.rem_euclid(1.0)).rem_euclid(1.0);
    (n, a, y)
}

/// Mean phase direction of the eigenstate readout distribution.
pub fn analytic_mu(phi: f64, r: usize) -> f64 {
    let (_, a, y) = two_term(phi, r);
    let shift = (-y.sin()).atan2(a + y.cos()) / (2.0 * PI);
    (phi + shift).rem_euclid(1.0)
}

/// Mean resultant length of the eigenstate readout distribution.
pub fn analytic_rho(phi: f64, r: usize) -> f64 {
    let (n, a, y) = two_term(phi, r);
    (a + y.cos()).hypot(y.sin()) / n
}

pub fn analytic_moment(phi: f64, r: usize) -> CircularMoment {
    CircularMoment {
        rho: analytic_rho(phi, r),
        mu: analytic_mu(phi, r),
    }
}

/// σ = √(−2 ln ρ) / 2π.
pub fn circular_std(rho: f64) -> Result<f64> {
    if !(rho > 0.0) || rho > 1.0 + 1e-12 {
        return Err(invalid(format!("mean resultant length {rho} outside (0, 1]")));
    }
    Ok((-2.0 * rho.min(1.0).ln()).sqrt() / (2.0 * PI))
}

fn sample_sigma(m: &impl PhaseMass) -> f64 {
    match sample_moment(m) {
        Ok(cm) => circular_std(cm.rho).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

/// Most frequent readout; ties go to the smaller string.
pub fn majority_estimate(m: &impl PhaseMass) -> Result<PhaseEstimate> {
    let r = m.resolution();
    let masses = m.masses();
    let (best, _) = masses
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |acc, (j, &w)| if w > acc.1 { (j, w) } else { acc });
    if !(masses.iter().sum::<f64>() > 0.0) {
        return Err(invalid("empty sample"));
    }
    Ok(PhaseEstimate {
        value: best as f64 / f64::powi(2.0, r as i32),
        method: Estimator::Majority,
        sigma: sample_sigma(m),
        r,
    })
}

pub fn estimate(m: &impl PhaseMass, estimator: Estimator) -> Result<PhaseEstimate> {
    if estimator == Estimator::Majority {
        return majority_estimate(m);
    }
    let r = m.resolution();
    let cm = sample_moment(m)?;
    let value = match estimator {
        Estimator::MeanDirectionInverted => invert_mu(cm.mu, r)?,
        _ => cm.mu,
    };
    Ok(PhaseEstimate {
        value,
        method: estimator,
        sigma: circular_std(cm.rho)?,
        r,
    })
}

/// The φ with analytic_mu(φ, R) = μ.
///
/// μ maps each grid cell [φ_j − 1/2N, φ_j + 1/2N] onto itself, so we solve
/// within the cell holding μ. The slope vanishes at the grid point, so Newton
/// steps are safeguarded by bisection.
pub fn invert_mu(mu: f64, r: usize) -> Result<f64> {
    if r < 2 {
        return Err(invalid("inversion of the mean direction needs R >= 2"));
    }
    if !mu.is_finite() {
        return Err(invalid("mean direction must be finite"));
    }
    let mu = mu.rem_euclid(1.0);
    let n = f64::powi(2.0, r as i32);
    let a = n - 1.0;
    let grid = (mu * n).round() / n;
    let target = mu - grid;
    let half = 0.5 / n;
    let g = |e: f64| {
        let y = 2.0 * PI * n * e;
        let w_re = a + y.cos();
        let w_im = -y.sin();
        let val = e + w_im.atan2(w_re) / (2.0 * PI);
        // g'(e) = 1 − N Re(e^{−iy}/w)
        let (c, s) = (y.cos(), -y.sin());
        let den = w_re * w_re + w_im * w_im;
        let slope = 1.0 - n * (c * w_re + s * w_im) / den;
        (val, slope)
    };
    let (mut lo, mut hi) = (-half, half);
    let mut x = target.clamp(lo, hi);
    for _ in 0..200 {
        let (val, slope) = g(x);
        let f = val - target;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - f / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= 1e-17 || hi - lo <= 1e-16 {
            break;
        }
    }
    if (g(x).0 - target).abs() > 1e-13 {
        return Err(Error::NoConvergence(format!("mean-direction inversion at mu = {mu}")));
    }
    Ok((grid + x).rem_euclid(1.0))
}

/// Draws a multinomial histogram with conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let p = p.max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q).expect("probability in [0, 1]").sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Circular mean and circular standard deviation of phase values.
pub fn circular_spread(values: &[f64]) -> Result<CircularMoment> {
    if values.is_empty() {
        return Err(invalid("no values"));
    }
    let (mut re, mut im) = (0.0, 0.0);
    for v in values {
        let (s, c) = (2.0 * PI * v).sin_cos();
        re += c;
        im += s;
    }
    let n = values.len() as f64;
    let rho = (re / n).hypot(im / n);
    if rho < RHO_MIN {
        return Err(Error::UndefinedDirection(rho));
    }
    Ok(CircularMoment {
        rho,
        mu: (im.atan2(re) / (2.0 * PI)).rem_euclid(1.0),
    })
}

fn values_sigma(values: &[f64]) -> Result<f64> {
    circular_std(circular_spread(values)?.rho)
}

/// Bootstrap circular standard deviation of an estimator, from `b`
/// multinomial resamples of the observed frequencies.
pub fn bootstrap_sigma(sample: &PhaseSample, estimator: Estimator, b: usize, seed: u64) -> Result<f64> {
    if sample.total() < 2 {
        return Err(invalid("bootstrap needs at least two observations"));
    }
    if b < 100 {
        return Err(invalid("bootstrap needs at least 100 resamples"));
    }
    if sample.counts().iter().filter(|&&c| c > 0).count() == 1 {
        return Ok(0.0);
    }
    let freqs = sample.frequencies();
    let streams = Streams::new(seed);
    let values = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(&[i as u64]);
            let counts = multinomial(&freqs, sample.total(), &mut rng);
            estimate(&PhaseSample::new(sample.r(), counts)?, estimator).map(|e| e.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    values_sigma(&values)
}

/// Default bootstrap replicate count.
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Estimator values from `reps` independent O-shot samples of `pmf`.
pub fn sampling_distribution(
    pmf: &ParentDistribution,
    shots: u64,
    reps: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<f64>> {
    if shots == 0 || reps == 0 {
        return Err(invalid("shots and repetitions must be positive"));
    }
    let streams = Streams::new(seed);
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(&[i as u64]);
            let counts = multinomial(pmf.probs(), shots, &mut rng);
            estimate(&PhaseSample::new(pmf.r(), counts)?, estimator).map(|e| e.value)
        })
        .collect()
}

/// Circular standard deviation of the sampling distribution at phase `phi`.
pub fn sampling_sigma(phi: f64, r: usize, shots: u64, reps: usize, estimator: Estimator, seed: u64) -> Result<f64> {
    values_sigma(&sampling_distribution(&analytic_pmf(phi, r)?, shots, reps, estimator, seed)?)
}

/// Mean squared circular error split into bias² and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    pub mse: f64,
    pub bias: f64,
    pub variance: f64,
}

pub fn mse(values: &[f64], truth: f64) -> Result<ErrorDecomposition> {
    if values.is_empty() {
        return Err(invalid("no values"));
    }
    let n = values.len() as f64;
    let d: Vec<f64> = values.iter().map(|&v| circular_diff(v, truth)).collect();
    let bias = d.iter().sum::<f64>() / n;
    let mse = d.iter().map(|x| x * x).sum::<f64>() / n;
    Ok(ErrorDecomposition {
        mse,
        bias,
        variance: mse - bias * bias,
    })
}

/// Accuracy error of the noiseless estimator across one grid cell:
/// φ_i = (i + ½)/points · 2^{−R}.
pub fn error_curves(r: usize, estimator: Estimator, points: usize) -> Result<Vec<(f64, f64)>> {
    if points == 0 {
        return Err(invalid("need at least one point"));
    }
    if estimator != Estimator::Majority && r < 2 {
        return Err(invalid("mean-direction curves need R >= 2"));
    }
    let cell = f64::powi(2.0, -(r as i32));
    (0..points)
        .into_par_iter()
        .map(|i| {
            let phi = (i as f64 + 0.5) / points as f64 * cell;
            let est = match estimator {
                Estimator::Majority => majority_estimate(&analytic_pmf(phi, r)?)?.value,
                Estimator::MeanDirection => analytic_mu(phi, r),
                Estimator::MeanDirectionInverted => invert_mu(analytic_mu(phi, r), r)?,
            };
            Ok((phi, circular_distance(est, phi)))
        })
        .collect()
}

/// Largest mean-direction accuracy error at resolution R, asin(1/A)/2π.
pub fn max_mean_direction_error(r: usize) -> f64 {
    (1.0 / (f64::powi(2.0, r as i32) - 1.0)).asin() / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_mass_moment() {
        let p = ParentDistribution::new(3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let m = sample_moment(&p).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-15 && (m.mu - 0.375).abs() < 1e-15);
        let u = ParentDistribution::new(2, vec![0.25; 4]).unwrap();
        assert!(matches!(sample_moment(&u), Err(Error::UndefinedDirection(_))));
    }

    #[test]
    fn moment_of_tenth() {
        // frozen from direct summation over analytic_pmf(0.1, 3)
        let m = sample_moment(&analytic_pmf(0.1, 3).unwrap()).unwrap();
        assert!((m.rho - 0.921_329).abs() < 1e-6, "{}", m.rho);
        assert!((m.mu - 0.120_594).abs() < 1e-6, "{}", m.mu);
        assert!((analytic_mu(0.1, 3) - m.mu).abs() < 1e-12);
        assert!((analytic_rho(0.1, 3) - m.rho).abs() < 1e-12);
        assert!((circular_std(m.rho).unwrap() - 0.0644).abs() < 1e-4);
    }

    #[test]
    fn std_examples() {
        assert_eq!(circular_std(1.0).unwrap(), 0.0);
        assert!((circular_std((-PI * PI / 2.0).exp()).unwrap() - 0.5).abs() < 1e-12);
        assert!((circular_std((-2.0 * PI * PI).exp()).unwrap() - 1.0).abs() < 1e-12);
        assert!(circular_std(0.0).is_err());
    }

    #[test]
    fn grid_and_midpoint_fixed_points() {
        for r in 2..=12usize {
            let n = f64::powi(2.0, r as i32);
            for j in [0.0, 1.0, 3.0] {
                assert!((analytic_mu(j / n, r) - j / n).abs() < 1e-15);
                assert!((analytic_rho(j / n, r) - 1.0).abs() < 1e-15);
            }
            let mid = 0.5 / n;
            assert!((analytic_mu(mid, r) - mid).abs() < 1e-12);
        }
    }

    #[test]
    fn majority_examples() {
        let e = majority_estimate(&analytic_pmf(0.1, 3).unwrap()).unwrap();
        assert_eq!(e.value, 0.125);
        assert!((circular_distance(e.value, 0.1) - 0.025).abs() < 1e-15);
        let tie = PhaseSample::new(2, vec![0, 5, 5, 0]).unwrap();
        assert_eq!(majority_estimate(&tie).unwrap().value, 0.25);
    }

    #[test]
    fn inversion_examples() {
        assert!((invert_mu(0.120_594, 3).unwrap() - 0.1).abs() < 1e-5);
        for j in 0..8 {
            assert!((invert_mu(j as f64 / 8.0, 3).unwrap() - j as f64 / 8.0).abs() < 1e-15);
        }
        assert!(invert_mu(0.3, 1).is_err());
    }

    #[test]
    fn bootstrap_degenerate_and_errors() {
        let s = PhaseSample::new(2, vec![0, 10, 0, 0]).unwrap();
        assert_eq!(bootstrap_sigma(&s, Estimator::MeanDirection, 100, 1).unwrap(), 0.0);
        assert!(bootstrap_sigma(&s, Estimator::MeanDirection, 99, 1).is_err());
        let one = PhaseSample::new(2, vec![0, 1, 0, 0]).unwrap();
        assert!(bootstrap_sigma(&one, Estimator::MeanDirection, 100, 1).is_err());
    }

    #[test]
    fn bootstrap_tracks_sampling_sigma() {
        let r = 3;
        let phi = 0.5 / 8.0;
        let shots = 1000;
        let direct = sampling_sigma(phi, r, shots, 10_000, Estimator::MeanDirection, 11).unwrap();
        let pmf = analytic_pmf(phi, r).unwrap();
        let sample = pmf.sample(shots, &mut Streams::new(12).stream(&[]));
        let boot = bootstrap_sigma(&sample, Estimator::MeanDirection, DEFAULT_BOOTSTRAP, 13).unwrap();
        assert!((boot / direct - 1.0).abs() < 0.15, "boot {boot} direct {direct}");
    }

    #[test]
    fn multinomial_conserves_shots() {
        let mut rng = Streams::new(4).stream(&[]);
        let c = multinomial(&[0.1, 0.0, 0.6, 0.3], 12345, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 12345);
        assert_eq!(c[1], 0);
    }

    #[test]
    fn mse_splits() {
        let d = mse(&[0.99, 0.01, 0.03], 0.0).unwrap();
        assert!((d.bias - 0.01).abs() < 1e-12);
        assert!((d.mse - (1e-4 + 1e-4 + 9e-4) / 3.0).abs() < 1e-12);
        assert!((d.variance - (d.mse - 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn error_curve_peaks() {
        for r in 2..=6 {
            let maj = error_curves(r, Estimator::Majority, 1000).unwrap();
            let md = error_curves(r, Estimator::MeanDirection, 1000).unwrap();
            let mmaj = maj.iter().map(|p| p.1).fold(0.0, f64::max);
            let mmd = md.iter().map(|p| p.1).fold(0.0, f64::max);
            let half = f64::powi(2.0, -(r as i32 + 1));
            assert!(mmaj < half && mmaj > 0.99 * half);
            assert!(mmd < half / 2.0);
            assert!(mmd <= max_mean_direction_error(r) + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn inversion_roundtrip(phi in 0.0f64..1.0, r in 2usize..12) {
            let back = invert_mu(analytic_mu(phi, r), r).unwrap();
            prop_assert!(circular_distance(back, phi) < 1e-10);
        }

        #[test]
        fn rho_bounds(phi in 0.0f64..1.0, r in 1usize..12) {
            let n = f64::powi(2.0, r as i32);
            let rho = analytic_rho(phi, r);
            prop_assert!(rho <= 1.0 + 1e-15 && rho >= (n - 2.0) / n - 1e-15);
        }

        #[test]
        fn analytic_moment_matches_distribution(phi in 0.0f64..1.0, r in 2usize..9) {
            let m = sample_moment(&analytic_pmf(phi, r).unwrap()).unwrap();
            prop_assert!(circular_distance(m.mu, analytic_mu(phi, r)) < 1e-12);
            prop_assert!((m.rho - analytic_rho(phi, r)).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_is_monotone_and_continuous() {
        for r in 2..=8usize {
            let steps = 100_000;
            let h = 1.0 / steps as f64;
            let mut prev = analytic_mu(0.0, r);
            for i in 1..=steps {
                let cur = analytic_mu(i as f64 * h, r);
                let d = circular_diff(cur, prev);
                assert!(d >= -1e-15 && d < 10.0 * h, "R={r} i={i} d={d}");
                prev = cur;
            }
        }
    }
}
