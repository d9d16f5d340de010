//! Analytic frequency marginals g: closed-form densities, Fourier
//! transforms, complex continuation and the derived scalars used by the
//! stability machinery (g(0), critical coupling, weighted norms of g-hat).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{KdError, Result};
use crate::quad;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// One Lorentzian component of a mixture: weight, half-width, center.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CauchyComponent {
    pub weight: f64,
    pub delta: f64,
    pub omega0: f64,
}

/// An analytic, normalized frequency density with closed-form Fourier
/// transform and complex continuation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum FrequencyDistribution {
    /// Lorentzian of half-width `delta` centered at `omega0`.
    Cauchy { delta: f64, omega0: f64 },
    /// Symmetric pair of Lorentzians at +/- omega0, half-width delta.
    BiCauchy { delta: f64, omega0: f64 },
    /// Centered normal density of standard deviation sigma.
    Gaussian { sigma: f64 },
    /// Finite mixture of Lorentzians; weights must sum to 1.
    CauchyMixture(Vec<CauchyComponent>),
}

/// A weighted norm that may legitimately diverge; divergence is a value
/// (the hypothesis of the stability theorem is then simply not met), not
/// an error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum WeightedNorm {
    Finite(f64),
    Infinite,
}

impl WeightedNorm {
    pub fn finite(self) -> Option<f64> {
        match self {
            WeightedNorm::Finite(v) => Some(v),
            WeightedNorm::Infinite => None,
        }
    }
}

fn cauchy_density(delta: f64, omega0: f64, w: f64) -> f64 {
    delta / (PI * ((w - omega0) * (w - omega0) + delta * delta))
}

impl FrequencyDistribution {
    pub fn cauchy(delta: f64) -> Self {
        FrequencyDistribution::Cauchy { delta, omega0: 0.0 }
    }

    pub fn bicauchy(delta: f64, omega0: f64) -> Self {
        FrequencyDistribution::BiCauchy { delta, omega0 }
    }

    pub fn gaussian(sigma: f64) -> Self {
        FrequencyDistribution::Gaussian { sigma }
    }

    /// Validates parameter ranges and mixture weight normalization.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KdError::Config(m));
        match self {
            FrequencyDistribution::Cauchy { delta, .. } if *delta <= 0.0 => {
                bad(format!("cauchy: delta must be positive, got {delta}"))
            }
            FrequencyDistribution::BiCauchy { delta, omega0 } if *delta <= 0.0 || *omega0 < 0.0 => {
                bad(format!("bicauchy: need delta > 0, omega0 >= 0, got ({delta}, {omega0})"))
            }
            FrequencyDistribution::Gaussian { sigma } if *sigma <= 0.0 => {
                bad(format!("gauss: sigma must be positive, got {sigma}"))
            }
            FrequencyDistribution::CauchyMixture(parts) => {
                if parts.is_empty() {
                    return bad("mix: empty mixture".into());
                }
                let wsum: f64 = parts.iter().map(|c| c.weight).sum();
                if (wsum - 1.0).abs() > 1e-10 {
                    return bad(format!("mix: weights sum to {wsum}, expected 1"));
                }
                if parts.iter().any(|c| c.weight < 0.0 || c.delta <= 0.0) {
                    return bad("mix: weights must be >= 0 and widths > 0".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The density g(omega).
    pub fn density(&self, w: f64) -> f64 {
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => cauchy_density(*delta, *omega0, w),
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                0.5 * (cauchy_density(*delta, *omega0, w) + cauchy_density(*delta, -*omega0, w))
            }
            FrequencyDistribution::Gaussian { sigma } => {
                (-0.5 * (w / sigma) * (w / sigma)).exp() / (sigma * SQRT_2PI)
            }
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| c.weight * cauchy_density(c.delta, c.omega0, w))
                .sum(),
        }
    }

    /// g-hat(tau) = int exp(-i tau omega) g(omega) d omega, in closed form.
    pub fn fourier(&self, tau: f64) -> Complex64 {
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => {
                Complex64::new(0.0, -omega0 * tau).exp() * (-delta * tau.abs()).exp()
            }
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                Complex64::new((-delta * tau.abs()).exp() * (omega0 * tau).cos(), 0.0)
            }
            FrequencyDistribution::Gaussian { sigma } => {
                Complex64::new((-0.5 * sigma * sigma * tau * tau).exp(), 0.0)
            }
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| {
                    Complex64::new(0.0, -c.omega0 * tau).exp()
                        * (c.weight * (-c.delta * tau.abs()).exp())
                })
                .sum(),
        }
    }

    /// d/dtau of g-hat, in closed form (a.e.; the |tau| kink at 0 is a
    /// null set for the quadratures that consume this).
    pub fn fourier_deriv(&self, tau: f64) -> Complex64 {
        let sgn = if tau >= 0.0 { 1.0 } else { -1.0 };
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => {
                self.fourier(tau) * Complex64::new(-delta * sgn, -omega0)
            }
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                let e = (-delta * tau.abs()).exp();
                Complex64::new(
                    -delta * sgn * e * (omega0 * tau).cos() - omega0 * e * (omega0 * tau).sin(),
                    0.0,
                )
            }
            FrequencyDistribution::Gaussian { sigma } => {
                self.fourier(tau) * (-sigma * sigma * tau)
            }
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| {
                    Complex64::new(0.0, -c.omega0 * tau).exp()
                        * (c.weight * (-c.delta * tau.abs()).exp())
                        * Complex64::new(-c.delta * sgn, -c.omega0)
                })
                .sum(),
        }
    }

    /// Poles of the continued density (both half-planes). Empty for the
    /// Gaussian, which is entire.
    pub fn poles(&self) -> Vec<Complex64> {
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => vec![
                Complex64::new(*omega0, *delta),
                Complex64::new(*omega0, -*delta),
            ],
            FrequencyDistribution::BiCauchy { delta, omega0 } => vec![
                Complex64::new(*omega0, *delta),
                Complex64::new(*omega0, -*delta),
                Complex64::new(-*omega0, *delta),
                Complex64::new(-*omega0, -*delta),
            ],
            FrequencyDistribution::Gaussian { .. } => vec![],
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .flat_map(|c| {
                    [
                        Complex64::new(c.omega0, c.delta),
                        Complex64::new(c.omega0, -c.delta),
                    ]
                })
                .collect(),
        }
    }

    /// Analytic continuation of the density to complex arguments.
    pub fn eval_complex(&self, z: Complex64) -> Result<Complex64> {
        for p in self.poles() {
            let d = (z - p).norm();
            if d < 1e-9 {
                return Err(KdError::PoleHit { dist: d });
            }
        }
        let lorentzian = |delta: f64, omega0: f64, z: Complex64| -> Complex64 {
            let s = z - omega0;
            Complex64::new(delta / PI, 0.0) / (s * s + delta * delta)
        };
        Ok(match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => lorentzian(*delta, *omega0, z),
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                (lorentzian(*delta, *omega0, z) + lorentzian(*delta, -*omega0, z)) * 0.5
            }
            FrequencyDistribution::Gaussian { sigma } => {
                (-z * z / (2.0 * sigma * sigma)).exp() / (sigma * SQRT_2PI)
            }
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| lorentzian(c.delta, c.omega0, z) * c.weight)
                .sum(),
        })
    }

    /// Critical coupling K_c = 2 / (pi g(0)).
    pub fn critical_coupling(&self) -> Result<f64> {
        let g0 = self.density(0.0);
        if g0 <= 0.0 {
            return Err(KdError::DegenerateDensity);
        }
        Ok(2.0 / (PI * g0))
    }

    /// Distance from the real axis to the nearest singularity of the
    /// continued density; `None` for entire densities.
    pub fn analyticity_half_width(&self) -> Option<f64> {
        let ps = self.poles();
        if ps.is_empty() {
            None
        } else {
            ps.iter()
                .map(|p| p.im.abs())
                .min_by(|x, y| x.partial_cmp(y).unwrap())
        }
    }

    /// Characteristic frequency scale, used to size integration windows
    /// and spectral contours.
    pub fn frequency_scale(&self) -> f64 {
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => delta + omega0.abs(),
            FrequencyDistribution::BiCauchy { delta, omega0 } => delta + omega0.abs(),
            FrequencyDistribution::Gaussian { sigma } => 4.0 * sigma,
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| c.delta + c.omega0.abs())
                .fold(0.0, f64::max),
        }
    }

    /// Whether g(-omega) = g(omega).
    pub fn is_even(&self) -> bool {
        match self {
            FrequencyDistribution::Cauchy { omega0, .. } => *omega0 == 0.0,
            FrequencyDistribution::BiCauchy { .. } => true,
            FrequencyDistribution::Gaussian { .. } => true,
            FrequencyDistribution::CauchyMixture(parts) => parts.iter().all(|c| {
                c.omega0 == 0.0
                    || parts.iter().any(|d| {
                        d.omega0 == -c.omega0
                            && (d.weight - c.weight).abs() < 1e-14
                            && (d.delta - c.delta).abs() < 1e-14
                    })
            }),
        }
    }

    /// The cumulative distribution G(w) = int_{-inf}^{w} g.
    pub fn cdf(&self, w: f64) -> f64 {
        let cauchy_cdf = |delta: f64, omega0: f64| ((w - omega0) / delta).atan() / PI + 0.5;
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => cauchy_cdf(*delta, *omega0),
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                0.5 * (cauchy_cdf(*delta, *omega0) + cauchy_cdf(*delta, -*omega0))
            }
            FrequencyDistribution::Gaussian { sigma } => {
                0.5 * (1.0 + erf(w / (sigma * std::f64::consts::SQRT_2)))
            }
            FrequencyDistribution::CauchyMixture(parts) => parts
                .iter()
                .map(|c| c.weight * cauchy_cdf(c.delta, c.omega0))
                .sum(),
        }
    }

    /// The quantile G^{-1}(p), p in (0, 1): closed form for a single
    /// Lorentzian or Gaussian, bisection on the closed-form CDF
    /// otherwise.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "quantile argument must be in (0,1)");
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } => {
                omega0 + delta * (PI * (p - 0.5)).tan()
            }
            FrequencyDistribution::Gaussian { sigma } => sigma * inv_norm_cdf(p),
            _ => {
                // Bracket by doubling from the frequency scale, then
                // bisect the monotone CDF to machine-level width.
                let mut hi = self.frequency_scale();
                let mut lo = -hi;
                while self.cdf(hi) < p {
                    hi *= 2.0;
                }
                while self.cdf(lo) > p {
                    lo *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// The weighted Sobolev-type norm of g-hat:
    /// sqrt( int exp(2 a tau) (|g-hat|^2 + |g-hat'|^2) d tau ).
    ///
    /// Diverges (returns `Infinite`) when the weight rate reaches the
    /// analyticity half-width of the density.
    pub fn fourier_norm_a(&self, a: f64) -> WeightedNorm {
        assert!(a > 0.0, "weight rate must be positive");
        let decay = match self.analyticity_half_width() {
            Some(width) => {
                if a >= width {
                    return WeightedNorm::Infinite;
                }
                width
            }
            None => f64::INFINITY,
        };

        // Truncation window: integrand ~ exp(2 a tau - 2 decay |tau|)
        // for the Cauchy family, Gaussian handled separately.
        let (lo, hi) = match self {
            FrequencyDistribution::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let hi = (a + (a * a + 45.0 * s2).sqrt()) / s2;
                let lo = (-a + (a * a + 45.0 * s2).sqrt()) / s2;
                (-lo, hi)
            }
            _ => {
                let hi = 22.5 / (decay - a);
                let lo = 22.5 / (decay + a);
                (-lo, hi)
            }
        };

        let integrand = |tau: f64| {
            let w = (2.0 * a * tau).exp();
            let g = self.fourier(tau);
            let gp = self.fourier_deriv(tau);
            Complex64::new(w * (g.norm_sqr() + gp.norm_sqr()), 0.0)
        };
        let v = quad::integrate(&integrand, lo, 0.0, 1e-11)
            + quad::integrate(&integrand, 0.0, hi, 1e-11);
        WeightedNorm::Finite(v.re.max(0.0).sqrt())
    }
}

/// Error function: Maclaurin series on |x| <= 2, complementary-function
/// continued fraction (modified Lentz) beyond.
fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 2.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..=60 {
            term *= -x2 / n as f64;
            sum += term / (2 * n + 1) as f64;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // erfc(ax) = e^{-ax^2}/sqrt(pi) / (ax + (1/2)/(ax + 1/(ax + (3/2)/(ax + ...)))),
        // evaluated bottom-up; 150 levels is ample for ax > 2.
        let mut f = ax;
        for n in (1..=150).rev() {
            f = ax + 0.5 * n as f64 / f;
        }
        let erfc = (-ax * ax).exp() / (PI.sqrt() * f);
        if x > 0.0 {
            1.0 - erfc
        } else {
            erfc - 1.0
        }
    }
}

/// Standard-normal quantile (rational minimax approximation, relative
/// error below 1.2e-9), polished by one Halley step on the CDF.
fn inv_norm_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p > 1.0 - P_LOW {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Halley refinement against Phi(x) - p.
    let e = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

impl fmt::Display for FrequencyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrequencyDistribution::Cauchy { delta, omega0 } if *omega0 == 0.0 => {
                write!(f, "cauchy:delta={delta}")
            }
            FrequencyDistribution::Cauchy { delta, omega0 } => {
                write!(f, "cauchy:delta={delta},omega0={omega0}")
            }
            FrequencyDistribution::BiCauchy { delta, omega0 } => {
                write!(f, "bicauchy:delta={delta},omega0={omega0}")
            }
            FrequencyDistribution::Gaussian { sigma } => write!(f, "gauss:sigma={sigma}"),
            FrequencyDistribution::CauchyMixture(parts) => {
                write!(f, "mix:")?;
                for (i, c) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{},{}", c.weight, c.delta, c.omega0)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses the CLI distribution syntax:
/// `cauchy:delta=1.0`, `bicauchy:delta=1.0,omega0=2.0`, `gauss:sigma=1.0`,
/// `mix:w1,d1,o1;w2,d2,o2`.
impl FromStr for FrequencyDistribution {
    type Err = KdError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| KdError::Config(m);
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("distribution spec '{s}' missing ':'")))?;

        let parse_kv = |rest: &str| -> Result<Vec<(String, f64)>> {
            rest.split(',')
                .map(|pair| {
                    let (k, v) = pair
                        .split_once('=')
                        .ok_or_else(|| bad(format!("expected key=value, got '{pair}'")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| bad(format!("bad number '{v}' in '{pair}'")))?;
                    Ok((k.trim().to_string(), v))
                })
                .collect()
        };
        let get = |kvs: &[(String, f64)], key: &str, default: Option<f64>| -> Result<f64> {
            kvs.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| bad(format!("missing parameter '{key}' in '{s}'")))
        };

        let dist = match kind {
            "cauchy" => {
                let kvs = parse_kv(rest)?;
                FrequencyDistribution::Cauchy {
                    delta: get(&kvs, "delta", None)?,
                    omega0: get(&kvs, "omega0", Some(0.0))?,
                }
            }
            "bicauchy" => {
                let kvs = parse_kv(rest)?;
                FrequencyDistribution::BiCauchy {
                    delta: get(&kvs, "delta", None)?,
                    omega0: get(&kvs, "omega0", None)?,
                }
            }
            "gauss" => {
                let kvs = parse_kv(rest)?;
                FrequencyDistribution::Gaussian { sigma: get(&kvs, "sigma", None)? }
            }
            "mix" => {
                let parts: Result<Vec<CauchyComponent>> = rest
                    .split(';')
                    .map(|triple| {
                        let nums: Vec<f64> = triple
                            .split(',')
                            .map(|t| {
                                t.trim()
                                    .parse::<f64>()
                                    .map_err(|_| bad(format!("bad number '{t}' in mixture")))
                            })
                            .collect::<Result<_>>()?;
                        if nums.len() != 3 {
                            return Err(bad(format!(
                                "mixture component '{triple}' needs w,delta,omega0"
                            )));
                        }
                        Ok(CauchyComponent { weight: nums[0], delta: nums[1], omega0: nums[2] })
                    })
                    .collect();
                FrequencyDistribution::CauchyMixture(parts?)
            }
            other => return Err(bad(format!("unknown distribution kind '{other}'"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<FrequencyDistribution> {
        vec![
            FrequencyDistribution::cauchy(1.0),
            FrequencyDistribution::Cauchy { delta: 0.5, omega0: 1.5 },
            FrequencyDistribution::bicauchy(1.0, 2.0),
            FrequencyDistribution::gaussian(1.0),
            FrequencyDistribution::CauchyMixture(vec![
                CauchyComponent { weight: 0.3, delta: 1.0, omega0: -1.0 },
                CauchyComponent { weight: 0.7, delta: 0.5, omega0: 0.5 },
            ]),
        ]
    }

    #[test]
    fn density_point_values() {
        let c = FrequencyDistribution::cauchy(1.0);
        assert!((c.density(0.0) - 1.0 / PI).abs() < 1e-15);
        let b = FrequencyDistribution::bicauchy(1.0, 2.0);
        assert!((b.density(0.0) - 1.0 / (5.0 * PI)).abs() < 1e-15);
        let g = FrequencyDistribution::gaussian(1.0);
        assert!((g.density(0.0) - 1.0 / SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn density_normalizes_to_one() {
        for d in all_kinds() {
            let scale = d.frequency_scale();
            let mass = quad::integrate_line(
                &|w| Complex64::new(d.density(w), 0.0),
                &[-scale, 0.0, scale],
                1e-10,
            );
            assert!((mass.re - 1.0).abs() < 1e-6, "{d}: mass {}", mass.re);
        }
    }

    #[test]
    fn fourier_matches_quadrature() {
        for d in all_kinds() {
            for &tau in &[0.1, 1.0, 5.0] {
                let direct = quad::integrate_line(
                    &|w| Complex64::new(0.0, -tau * w).exp() * d.density(w),
                    &[0.0],
                    1e-12,
                );
                let closed = d.fourier(tau);
                assert!(
                    (direct - closed).norm() < 5e-7,
                    "{d} tau={tau}: {direct} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn fourier_at_zero_is_one() {
        for d in all_kinds() {
            assert_eq!(d.fourier(0.0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn conjugate_symmetry() {
        for d in all_kinds() {
            for &tau in &[0.3, 1.7, 4.2] {
                let diff = (d.fourier(-tau) - d.fourier(tau).conj()).norm();
                assert!(diff < 1e-12, "{d}: {diff}");
            }
        }
    }

    #[test]
    fn complex_continuation_agrees_on_real_axis() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for d in all_kinds() {
            for _ in 0..100 {
                let w: f64 = rng.gen_range(-10.0..10.0);
                let on_axis = d.eval_complex(Complex64::new(w, 0.0)).unwrap();
                assert!((on_axis.re - d.density(w)).abs() < 1e-12);
                assert!(on_axis.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cauchy_complex_values_and_pole() {
        let c = FrequencyDistribution::cauchy(1.0);
        let v = c.eval_complex(Complex64::new(0.0, -0.5)).unwrap();
        assert!((v.re - 1.0 / (PI * 0.75)).abs() < 1e-12);
        assert!(matches!(
            c.eval_complex(Complex64::new(0.0, -1.0)),
            Err(KdError::PoleHit { .. })
        ));
    }

    #[test]
    fn critical_couplings() {
        assert!((FrequencyDistribution::cauchy(1.0).critical_coupling().unwrap() - 2.0).abs() < 1e-12);
        assert!(
            (FrequencyDistribution::bicauchy(1.0, 2.0).critical_coupling().unwrap() - 10.0).abs()
                < 1e-12
        );
        let g = FrequencyDistribution::gaussian(1.0).critical_coupling().unwrap();
        assert!((g - 2.0 * SQRT_2PI / PI).abs() < 1e-10);
        assert!((g - 1.59577).abs() < 1e-5);
    }

    #[test]
    fn norm_divergence_threshold() {
        let c = FrequencyDistribution::cauchy(1.0);
        assert_eq!(c.fourier_norm_a(1.5), WeightedNorm::Infinite);
        assert_eq!(c.fourier_norm_a(1.0), WeightedNorm::Infinite);
        // |g-hat| = |g-hat'| = exp(-|tau|) a.e., so the squared norm is
        // 2 * int exp(2 a tau - 2|tau|) = 2 (1/(2+2a) + 1/(2-2a)).
        let a = 0.25_f64;
        let exact = (2.0 * (1.0 / (2.0 + 2.0 * a) + 1.0 / (2.0 - 2.0 * a))).sqrt();
        match c.fourier_norm_a(a) {
            WeightedNorm::Finite(v) => {
                assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
                assert!((v - 1.46059).abs() < 1e-5);
            }
            WeightedNorm::Infinite => panic!("expected finite norm"),
        }
        // Gaussian dominates any exponential weight.
        assert!(matches!(
            FrequencyDistribution::gaussian(1.0).fourier_norm_a(10.0),
            WeightedNorm::Finite(_)
        ));
    }

    #[test]
    fn parse_roundtrip() {
        for spec in [
            "cauchy:delta=1.0",
            "bicauchy:delta=1.0,omega0=2.0",
            "gauss:sigma=1.0",
            "mix:0.5,1.0,-1.0;0.5,1.0,1.0",
        ] {
            let d: FrequencyDistribution = spec.parse().unwrap();
            let again: FrequencyDistribution = d.to_string().parse().unwrap();
            assert_eq!(d, again);
        }
        assert!("mix:0.5,1,0".parse::<FrequencyDistribution>().is_err());
        assert!("cauchy:delta=-1".parse::<FrequencyDistribution>().is_err());
    }

    #[test]
    fn evenness_detection() {
        assert!(FrequencyDistribution::cauchy(1.0).is_even());
        assert!(!FrequencyDistribution::Cauchy { delta: 1.0, omega0: 0.3 }.is_even());
        assert!(FrequencyDistribution::bicauchy(1.0, 2.0).is_even());
        let sym = FrequencyDistribution::CauchyMixture(vec![
            CauchyComponent { weight: 0.5, delta: 1.0, omega0: -1.0 },
            CauchyComponent { weight: 0.5, delta: 1.0, omega0: 1.0 },
        ]);
        assert!(sym.is_even());
    }
    #[test]
    fn erf_reference_values() {
        // Oracle: standard tabulated values of the error function.
        assert!((erf(0.0)).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-14);
        assert!((erf(3.0) - 0.999_977_909_503_001_4).abs() < 1e-14);
        assert!((erf(-1.5) + 0.966_105_146_475_310_7).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let dists = [
            FrequencyDistribution::cauchy(0.7),
            FrequencyDistribution::bicauchy(1.0, 2.0),
            FrequencyDistribution::gaussian(1.3),
        ];
        for d in &dists {
            for p in [0.001, 0.1, 0.25, 0.5, 0.77, 0.95, 0.999] {
                let w = d.quantile(p);
                assert!((d.cdf(w) - p).abs() < 1e-9, "{d}: p={p}, w={w}");
            }
        }
    }

    #[test]
    fn quantile_reference_values() {
        // Lorentzian quartiles sit one half-width from the center.
        let c = FrequencyDistribution::cauchy(2.0);
        assert!((c.quantile(0.5)).abs() < 1e-12);
        assert!((c.quantile(0.75) - 2.0).abs() < 1e-12);
        // Standard-normal quantiles (tabulated).
        let g = FrequencyDistribution::gaussian(1.0);
        assert!((g.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((g.quantile(0.5)).abs() < 1e-9);
        assert!((g.quantile(0.841_344_746_068_543) - 1.0).abs() < 1e-9);
        // Symmetric mixture: median at zero, symmetric tails.
        let b = FrequencyDistribution::bicauchy(1.0, 2.0);
        assert!(b.quantile(0.5).abs() < 1e-10);
        assert!((b.quantile(0.9) + b.quantile(0.1)).abs() < 1e-9);
    }
}
