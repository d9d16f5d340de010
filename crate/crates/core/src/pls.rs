//! Partially locked states of the mean-field rotator system.
//!
//! The stationary state with order parameter r > 0 at coupling K has
//! Fourier-in-angle coefficients β^ℓ(ω/(Kr)) g(ω), where
//!
//!   β(ω) = −iω + √(1−ω²)        on |ω| ≤ 1,
//!   β(ω) = −iω + iω√(1−ω⁻²)     on |ω| > 1,
//!
//! extended analytically to the lower half-plane. r solves the
//! self-consistency equation K ∫ g(Krω) β(ω) dω = 1. The module also
//! certifies the geometric decay of the mode family in an exponentially
//! weighted norm via q = sup_ω |β((ω−ia)/(Kr))| < 1.

use num_complex::Complex64;

use crate::dist::FrequencyDistribution;
use crate::error::{KdError, Result};
use crate::quad;

/// β on the closed lower half-plane: the root of β² + 2izβ − 1 = 0 of
/// modulus ≤ 1 that is continuous on ℝ and analytic for Im z < 0.
pub fn beta(z: Complex64) -> Result<Complex64> {
    if z.im > 1e-12 {
        return Err(KdError::UpperHalfPlane { im: z.im });
    }
    if z.im >= 0.0 {
        return Ok(beta_real(z.re));
    }
    // iz√(1−z⁻²) with the principal square root matches the real-axis
    // formula in the limit Im z → 0⁻ on both branches.
    let i = Complex64::new(0.0, 1.0);
    let w = (Complex64::new(1.0, 0.0) - 1.0 / (z * z)).sqrt();
    Ok(-i * z + i * z * w)
}

fn beta_real(w: f64) -> Complex64 {
    if w.abs() <= 1.0 {
        Complex64::new((1.0 - w * w).sqrt(), -w)
    } else {
        Complex64::new(0.0, w * ((1.0 - 1.0 / (w * w)).sqrt() - 1.0))
    }
}

/// The other root of β² + 2iωβ − 1 = 0 on the locked range |ω| ≤ 1.
pub fn beta_minus(w: f64) -> Result<Complex64> {
    if w.abs() > 1.0 {
        return Err(KdError::OutOfRange { value: w, range: "[-1, 1]" });
    }
    Ok(Complex64::new(-(1.0 - w * w).sqrt(), -w))
}

/// K ∫ g(Krω) β(ω) dω − 1. Vanishes exactly at the stationary order
/// parameter; purely real when g is even.
pub fn self_consistency_residual(d: &FrequencyDistribution, k: f64, r: f64) -> Complex64 {
    assert!(k > 0.0 && r > 0.0 && r <= 1.0);
    let c = k * r;
    // β switches formula at ω = ±1; the density scale adds its own splits.
    let s = (d.frequency_scale() / c).max(1.5);
    let mut splits = vec![-s, -1.0, 0.0, 1.0, s];
    splits.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let integrand = |w: f64| beta_real(w) * d.density(c * w);
    quad::integrate_line(&integrand, &splits, 1e-12) * k - Complex64::new(1.0, 0.0)
}

/// A solved partially locked state.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PlsState {
    pub dist: FrequencyDistribution,
    pub k: f64,
    pub r_s: f64,
    /// Self-consistency residual re-evaluated at r_s.
    pub residual: Complex64,
}

const RS_TOL: f64 = 1e-10;

/// All stationary order parameters at coupling K, largest first: a
/// 200-point sign scan of Re(residual) on (0, 1], each bracket refined
/// by bisection. `bracket` restricts the scan.
pub fn solve_rs(
    d: &FrequencyDistribution,
    k: f64,
    bracket: Option<(f64, f64)>,
) -> Result<Vec<PlsState>> {
    if k <= 0.0 {
        return Err(KdError::Config(format!("coupling must be positive, got {k}")));
    }
    let (lo, hi) = bracket.unwrap_or((1e-6, 1.0));
    if !(lo > 0.0 && hi <= 1.0 && lo < hi) {
        return Err(KdError::Config(format!("bad bracket ({lo}, {hi})")));
    }
    let res = |r: f64| self_consistency_residual(d, k, r).re;

    const N: usize = 200;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_r = lo;
    let mut prev_v = res(lo);
    for i in 1..=N {
        let r = lo + (hi - lo) * i as f64 / N as f64;
        let v = res(r);
        if prev_v == 0.0 {
            roots.push(prev_r);
        } else if prev_v * v < 0.0 {
            let (mut a, mut b, mut fa) = (prev_r, r, prev_v);
            while b - a > 1e-14 {
                let m = 0.5 * (a + b);
                let fm = res(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                } else if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_r = r;
        prev_v = v;
    }
    if prev_v == 0.0 {
        roots.push(prev_r);
    }
    if roots.is_empty() {
        return Err(KdError::NoSolution);
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    roots
        .into_iter()
        .map(|r_s| {
            let residual = self_consistency_residual(d, k, r_s);
            if residual.re.abs() > RS_TOL {
                return Err(KdError::NonConvergent { what: "self-consistency bisection" });
            }
            Ok(PlsState { dist: d.clone(), k, r_s, residual })
        })
        .collect()
}

/// The geometric-decay certificate for the mode family of a locked state:
/// a contraction factor q < 1 and the weighted norms it controls.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayCertificate {
    pub a: f64,
    pub q: f64,
    /// Weighted norms ‖f̂_ℓ‖_a for ℓ = 1..=L.
    pub mode_norms: Vec<f64>,
}

impl PlsState {
    /// ℓ-th angular Fourier coefficient in frequency: β^ℓ(ω/(Kr_s)) g(ω).
    pub fn omega_coefficient(&self, l: u32, w: f64) -> Complex64 {
        beta_real(w / (self.k * self.r_s)).powi(l as i32) * self.dist.density(w)
    }

    /// ℓ-th coefficient in Fourier-transformed frequency,
    /// ∫ e^{−iτω} β^ℓ(ω/(Kr_s)) g(ω) dω, by direct quadrature (ℓ ≥ 1).
    pub fn tau_coefficient(&self, l: u32, tau: f64) -> Complex64 {
        assert!(l >= 1);
        let c = self.k * self.r_s;
        let s = d_scale(&self.dist).max(c * 1.5);
        let mut splits = vec![-s, -c, 0.0, c, s];
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let f = |w: f64| {
            Complex64::new(0.0, -tau * w).exp() * self.omega_coefficient(l, w)
        };
        quad::integrate_line(&f, &splits, 1e-10)
    }

    /// Certifies geometric decay of the mode family under the weight
    /// e^{aτ}: computes q = sup_ω |β((ω−ia)/(Kr_s))| and the weighted
    /// norms of the first `l_max` modes.
    pub fn decay_certificate(&self, a: f64, l_max: usize) -> Result<DecayCertificate> {
        if a <= 0.0 {
            return Err(KdError::Config(format!("weight rate must be positive, got {a}")));
        }
        if let Some(width) = self.dist.analyticity_half_width() {
            if a >= width {
                return Err(KdError::WeightTooLarge { a, limit: width });
            }
        }
        let q = self.contraction_factor(a);
        let grid = sample_mode_grid(&self.dist, self.k * self.r_s, l_max, a);
        let mode_norms = grid.weighted_norms(a, l_max);
        Ok(DecayCertificate { a, q, mode_norms })
    }

    /// sup over real ω of |β((ω−ia)/(Kr_s))|: coarse grid plus golden
    /// section refinement around the best point.
    pub fn contraction_factor(&self, a: f64) -> f64 {
        let c = self.k * self.r_s;
        let modulus = |w: f64| {
            beta(Complex64::new(w / c, -a / c)).expect("lower half-plane").norm()
        };
        let hi = 4.0 * c + 10.0 * a + 4.0;
        let n = 20_000;
        let mut best = (0.0_f64, modulus(0.0));
        for i in 0..=n {
            let w = -hi + 2.0 * hi * i as f64 / n as f64;
            let m = modulus(w);
            if m > best.1 {
                best = (w, m);
            }
        }
        let h = 2.0 * hi / n as f64;
        let (mut lo_w, mut hi_w) = (best.0 - h, best.0 + h);
        for _ in 0..80 {
            let m1 = lo_w + 0.381_966 * (hi_w - lo_w);
            let m2 = hi_w - 0.381_966 * (hi_w - lo_w);
            if modulus(m1) < modulus(m2) {
                lo_w = m1;
            } else {
                hi_w = m2;
            }
        }
        modulus(0.5 * (lo_w + hi_w)).max(best.1)
    }
}

fn d_scale(d: &FrequencyDistribution) -> f64 {
    d.frequency_scale().max(1.0)
}

/// Mode values f̂_ℓ(τ_j) on a uniform τ grid, ℓ = 0..=l_top,
/// j = 0..=(n_neg + n_pos) with τ_j = (j − n_neg)·dtau.
#[derive(Debug, Clone)]
pub struct ModeGrid {
    pub dtau: f64,
    pub n_neg: usize,
    pub n_pos: usize,
    pub c: f64,
    /// modes[ℓ][j].
    pub modes: Vec<Vec<Complex64>>,
}

impl ModeGrid {
    pub fn tau(&self, j: usize) -> f64 {
        (j as f64 - self.n_neg as f64) * self.dtau
    }

    pub fn n_points(&self) -> usize {
        self.n_neg + self.n_pos + 1
    }

    /// ∂_τ f̂_ℓ at grid point j from the transport relation
    /// ∂_τ f̂_ℓ = −(c/2)(f̂_{ℓ−1} − f̂_{ℓ+1}); the top mode uses a
    /// one-sided closure (its neighbor above is treated as zero).
    pub fn tau_derivative(&self, d: &FrequencyDistribution, l: usize, j: usize) -> Complex64 {
        if l == 0 {
            return d.fourier_deriv(self.tau(j));
        }
        let above = if l + 1 < self.modes.len() {
            self.modes[l + 1][j]
        } else {
            Complex64::new(0.0, 0.0)
        };
        (above - self.modes[l - 1][j]) * (0.5 * self.c)
    }

    /// ‖f̂_ℓ‖_a = sqrt(∫ e^{2aτ}(|f̂_ℓ|² + |∂_τ f̂_ℓ|²) dτ) for
    /// ℓ = 1..=l_max, by composite Simpson split at the τ = 0 kink.
    pub fn weighted_norms(&self, a: f64, l_max: usize) -> Vec<f64> {
        (1..=l_max)
            .map(|l| {
                let val = |j: usize| {
                    let above = if l + 1 < self.modes.len() {
                        self.modes[l + 1][j]
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    let fp = (above - self.modes[l - 1][j]) * (0.5 * self.c);
                    (2.0 * a * self.tau(j)).exp()
                        * (self.modes[l][j].norm_sqr() + fp.norm_sqr())
                };
                let left = simpson(&val, 0, self.n_neg, self.dtau);
                let right = simpson(&val, self.n_neg, self.n_neg + self.n_pos, self.dtau);
                (left + right).max(0.0).sqrt()
            })
            .collect()
    }
}

fn simpson(f: &dyn Fn(usize) -> f64, j0: usize, j1: usize, h: f64) -> f64 {
    if j1 <= j0 {
        return 0.0;
    }
    let n = j1 - j0;
    if n == 1 {
        return 0.5 * h * (f(j0) + f(j1));
    }
    let even = n % 2 == 0;
    let last = if even { j1 } else { j1 - 1 };
    let mut s = f(j0) + f(last);
    for j in (j0 + 1)..last {
        s += f(j) * if (j - j0) % 2 == 1 { 4.0 } else { 2.0 };
    }
    let mut v = s * h / 3.0;
    if !even {
        v += 0.5 * h * (f(j1 - 1) + f(j1));
    }
    v
}

/// Samples the mode family f̂_ℓ of the state with coefficients
/// β^ℓ(ω/c) g(ω) on a uniform τ grid sized for the weight rate `a`.
///
/// Initial values at τ = 0 come from quadrature; the grid is filled by
/// integrating the transport relation ∂_τ f̂_ℓ = −(c/2)(f̂_{ℓ−1} − f̂_{ℓ+1})
/// in both directions with RK4 (the ℓ = 0 mode is the closed-form ĝ).
/// The ℓ hierarchy is padded well above `l_max` before truncation; the
/// truncated system is norm-preserving, so the closure error stays of the
/// order of the neglected mode.
pub fn sample_mode_grid(
    d: &FrequencyDistribution,
    c: f64,
    l_max: usize,
    a: f64,
) -> ModeGrid {
    let width = d.analyticity_half_width().unwrap_or(a + 1.5).min(a + 1.5);
    let t_pos = 26.0 / (width - a).max(0.05);
    let t_neg = 26.0 / (width + a);
    let dtau = 0.02 / d_scale(d).max(c);
    sample_mode_grid_window(d, c, l_max, dtau, t_neg, t_pos)
}

/// As `sample_mode_grid`, with an explicit grid step and window
/// [−t_neg, t_pos].
pub fn sample_mode_grid_window(
    d: &FrequencyDistribution,
    c: f64,
    l_max: usize,
    dtau: f64,
    t_neg: f64,
    t_pos: f64,
) -> ModeGrid {
    let n_neg = (t_neg / dtau).ceil() as usize;
    let n_pos = (t_pos / dtau).ceil() as usize;

    // Pad the hierarchy until the top initial mode is negligible.
    let init_val = |l: usize| -> Complex64 {
        let s = d_scale(d).max(c * 1.5);
        let mut splits = vec![-s, -c, 0.0, c, s];
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        quad::integrate_line(
            &|w: f64| beta_real(w / c).powi(l as i32) * d.density(w),
            &splits,
            1e-11,
        )
    };
    let mut init = vec![Complex64::new(0.0, 0.0); l_max + 1];
    for (l, v) in init.iter_mut().enumerate() {
        *v = init_val(l);
    }
    let mut l_top = l_max;
    while l_top < l_max + 220 && init[l_top].norm() > 1e-11 {
        l_top += 1;
        init.push(init_val(l_top));
    }

    let n = l_top + 1;
    let mut modes = vec![vec![Complex64::new(0.0, 0.0); n_neg + n_pos + 1]; n];
    for (l, row) in modes.iter_mut().enumerate() {
        row[n_neg] = init[l];
    }

    // RK4 on the ℓ ≥ 1 hierarchy with exogenous ĝ at stage times.
    let substeps = (c * dtau / 0.02).ceil().max(1.0) as usize;
    let h = dtau / substeps as f64;
    let rhs = |tau: f64, y: &[Complex64], out: &mut [Complex64]| {
        let g0 = d.fourier(tau);
        for l in 1..n {
            let below = if l == 1 { g0 } else { y[l - 1] };
            let above = if l + 1 < n { y[l + 1] } else { Complex64::new(0.0, 0.0) };
            out[l] = (above - below) * (0.5 * c);
        }
    };

    let mut y = init.clone();
    let mut k1 = vec![Complex64::new(0.0, 0.0); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut march = |dir: f64, steps: usize, modes: &mut Vec<Vec<Complex64>>, y: &mut Vec<Complex64>| {
        let mut tau = 0.0;
        for s in 0..steps {
            for sub in 0..substeps {
                let t0 = dir * (s * substeps + sub) as f64 * h;
                let hh = dir * h;
                rhs(t0, y, &mut k1);
                for l in 1..n {
                    tmp[l] = y[l] + k1[l] * (0.5 * hh);
                }
                rhs(t0 + 0.5 * hh, &tmp, &mut k2);
                for l in 1..n {
                    tmp[l] = y[l] + k2[l] * (0.5 * hh);
                }
                rhs(t0 + 0.5 * hh, &tmp, &mut k3);
                for l in 1..n {
                    tmp[l] = y[l] + k3[l] * hh;
                }
                rhs(t0 + hh, &tmp, &mut k4);
                for l in 1..n {
                    y[l] += (k1[l] + (k2[l] + k3[l]) * 2.0 + k4[l]) * (hh / 6.0);
                }
                tau = t0 + hh;
            }
            let j = if dir > 0.0 { n_neg + s + 1 } else { n_neg - s - 1 };
            modes[0][j] = d.fourier(tau);
            for l in 1..n {
                modes[l][j] = y[l];
            }
        }
    };
    march(1.0, n_pos, &mut modes, &mut y);
    let mut y = init;
    march(-1.0, n_neg, &mut modes, &mut y);

    ModeGrid { dtau, n_neg, n_pos, c, modes }
}

/// Feasibility residual of the stationarity condition for densities that
/// are not even: ∫₁^∞ √(ω²−1)(g(Krω) − g(−Krω)) dω − ∫ ω g(Krω) dω.
/// Vanishes automatically for even g.
pub fn asymmetry_residual(d: &FrequencyDistribution, k: f64, r: f64) -> f64 {
    let c = k * r;
    let s = (d.frequency_scale() / c).max(2.0);
    let lhs = quad::integrate_line(
        &|w: f64| {
            if w <= 1.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(
                    (w * w - 1.0).sqrt() * (d.density(c * w) - d.density(-c * w)),
                    0.0,
                )
            }
        },
        &[1.0, s],
        1e-10,
    );
    let rhs = quad::integrate_line(
        &|w: f64| Complex64::new(w * d.density(c * w), 0.0),
        &[-s, 0.0, s],
        1e-10,
    );
    lhs.re - rhs.re
}
