//! Linear stability of a partially locked state.
//!
//! The spectrum of the linearized dynamics in the right half-plane is
//! captured by the 2×2 determinant
//!
//!   D(λ) = det( Id − (K/2)·M(λ, r_s) ),
//!   M = [[J₀(λ), J₂(λ)], [conj(J₂(λ̄)), conj(J₀(λ̄))]],
//!   J_k(λ) = ∫ β^k(ω/(Kr_s)) g(ω) / (λ + iω + Kr_s β(ω/(Kr_s))) dω.
//!
//! Zeros of D with Re λ > 0 are eigenvalues (with multiplicity); they are
//! counted by the argument principle on a rectangle [δ, X] × [−Y, Y].
//! λ = 0 is always a zero; stability additionally requires it to be
//! simple, estimated from the limit of D(λ)/λ along real λ ↓ 0.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{KdError, Result};
use crate::pls::{beta, PlsState};
use crate::quad;

/// Tolerance below which the extrapolated |D(λ)/λ| no longer certifies a
/// simple zero at the origin.
pub const SIMPLICITY_TOL: f64 = 1e-4;

const WINDING_FLOOR: f64 = 1e-6;
const MAX_CONTOUR_EVALS: usize = 1 << 20;

/// The determinant evaluation problem for one locked state: axis offset
/// and counting rectangle [δ, X] × [−Y, Y].
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    pub pls: PlsState,
    pub delta: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub winding_floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Outcome of the full spectral criterion.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StabilityReport {
    /// Zeros of D in Re λ ≥ δ, with multiplicity (at the default δ).
    pub zero_count: Option<usize>,
    /// Extrapolated |D(λ)/λ| as real λ ↓ 0.
    pub simplicity: Option<f64>,
    pub verdict: Verdict,
    /// Per-factor zero counts (1−Kh_c, 1−Kh_s) when g is even.
    pub factor_counts: Option<(usize, usize)>,
    /// Zero counts across the axis-offset sweep.
    pub delta_counts: Vec<(f64, usize)>,
    pub reason: Option<String>,
}

impl SpectralProblem {
    pub fn new(pls: PlsState) -> Self {
        let k = pls.k;
        let y = 2.0 * k + 4.0 * pls.dist.frequency_scale();
        SpectralProblem {
            pls,
            delta: 1e-3,
            x_max: 2.0 * k,
            y_max: y,
            winding_floor: WINDING_FLOOR,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    fn c(&self) -> f64 {
        self.pls.k * self.pls.r_s
    }

    /// J_k(λ) on Re λ ≥ δ (with δ/2 slack before erroring).
    pub fn jk(&self, k: u32, lambda: Complex64) -> Result<Complex64> {
        if lambda.re < 0.5 * self.delta {
            return Err(KdError::AxisTooClose { re: lambda.re });
        }
        Ok(self.jk_raw(k, lambda))
    }

    /// Unguarded J_k, valid for any Re λ > 0: the denominator satisfies
    /// |λ + iω + Kr_s β(ω/(Kr_s))| ≥ Re λ on the real line.
    fn jk_raw(&self, k: u32, lambda: Complex64) -> Complex64 {
        let c = self.c();
        let d = &self.pls.dist;
        let s = d.frequency_scale().max(1.5 * c);
        let mut splits = vec![-s, -c, 0.0, c, s];
        // Outside the locked range the denominator is λ + i·sgn(ω)√(ω²−c²);
        // its imaginary part vanishes in a spike of width ~Re λ.
        if lambda.im.abs() > 1e-14 {
            let spike = -lambda.im.signum() * (lambda.im * lambda.im + c * c).sqrt();
            splits.push(spike);
            splits.push(1.05 * spike);
        }
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let f = |w: f64| {
            let b = beta(Complex64::new(w / c, 0.0)).expect("real argument");
            let den = lambda + Complex64::new(0.0, w) + b * c;
            b.powi(k as i32) * d.density(w) / den
        };
        quad::integrate_line(&f, &splits, 1e-10)
    }

    /// M(λ, r_s).
    pub fn m_matrix(&self, lambda: Complex64) -> Result<[[Complex64; 2]; 2]> {
        let j0 = self.jk(0, lambda)?;
        let j2 = self.jk(2, lambda)?;
        let j0c = self.jk(0, lambda.conj())?;
        let j2c = self.jk(2, lambda.conj())?;
        Ok([[j0, j2], [j2c.conj(), j0c.conj()]])
    }

    /// D(λ) = det(Id − (K/2) M(λ, r_s)).
    pub fn determinant(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.re < 0.5 * self.delta {
            return Err(KdError::AxisTooClose { re: lambda.re });
        }
        Ok(self.determinant_raw(lambda))
    }

    fn determinant_raw(&self, lambda: Complex64) -> Complex64 {
        let hk = 0.5 * self.pls.k;
        if self.pls.dist.is_even() {
            // Jk(λ̄) = conj(Jk(λ)) for even g, so D factorizes exactly.
            let (fc, fs) = self.factors_raw(lambda);
            return fc * fs;
        }
        let j0 = self.jk_raw(0, lambda);
        let j2 = self.jk_raw(2, lambda);
        let j0c = self.jk_raw(0, lambda.conj());
        let j2c = self.jk_raw(2, lambda.conj());
        let one = Complex64::new(1.0, 0.0);
        (one - j0 * hk) * (one - j0c.conj() * hk) - j2 * j2c.conj() * hk * hk
    }

    /// The even-g factors (1 − K h_c(λ), 1 − K h_s(λ)) with
    /// h_c = (J₀ − J₂)/2 and h_s = (J₀ + J₂)/2.
    fn factors_raw(&self, lambda: Complex64) -> (Complex64, Complex64) {
        let j0 = self.jk_raw(0, lambda);
        let j2 = self.jk_raw(2, lambda);
        let one = Complex64::new(1.0, 0.0);
        let k = self.pls.k;
        (
            one - (j0 - j2) * (0.5 * k),
            one - (j0 + j2) * (0.5 * k),
        )
    }

    pub fn h_c(&self, lambda: Complex64) -> Result<Complex64> {
        if !self.pls.dist.is_even() {
            return Err(KdError::NotEven);
        }
        Ok((self.jk_raw(0, lambda) - self.jk_raw(2, lambda)) * 0.5)
    }

    pub fn h_s(&self, lambda: Complex64) -> Result<Complex64> {
        if !self.pls.dist.is_even() {
            return Err(KdError::NotEven);
        }
        Ok((self.jk_raw(0, lambda) + self.jk_raw(2, lambda)) * 0.5)
    }

    /// Number of zeros of D in [δ, X] × [−Y, Y], with multiplicity, by
    /// the argument principle with adaptive phase tracking.
    pub fn count_zeros(&self) -> Result<usize> {
        Ok(self.windings()?.0)
    }

    /// Zero counts of (D, optionally the two even-g factors).
    fn windings(&self) -> Result<(usize, Option<(usize, usize)>)> {
        if self.pls.dist.is_even() {
            let w = self.winding_multi(&|l| {
                let (fc, fs) = self.factors_raw(l);
                [fc, fs]
            })?;
            let (nc, ns) = (round_winding(w[0])?, round_winding(w[1])?);
            Ok((nc + ns, Some((nc, ns))))
        } else {
            let w = self.winding_multi(&|l| [self.determinant_raw(l), Complex64::new(1.0, 0.0)])?;
            Ok((round_winding(w[0])?, None))
        }
    }

    /// Winding numbers of two functions around the rectangle, sharing
    /// evaluation points; each phase step is refined below π/4.
    fn winding_multi(&self, f: &dyn Fn(Complex64) -> [Complex64; 2]) -> Result<[f64; 2]> {
        let (d, x, y) = (self.delta, self.x_max, self.y_max);
        let corners = [
            Complex64::new(d, -y),
            Complex64::new(x, -y),
            Complex64::new(x, y),
            Complex64::new(d, y),
            Complex64::new(d, -y),
        ];
        let mut evals = 0usize;
        let mut eval = |l: Complex64| -> Result<[Complex64; 2]> {
            evals += 1;
            if evals > MAX_CONTOUR_EVALS {
                return Err(KdError::NonConvergent { what: "contour refinement" });
            }
            let v = f(l);
            if v[0].norm() < self.winding_floor || v[1].norm() < self.winding_floor {
                return Err(KdError::ContourTooClose {
                    modulus: v[0].norm().min(v[1].norm()),
                });
            }
            Ok(v)
        };

        let mut total = [0.0_f64; 2];
        for e in 0..4 {
            let (z0, z1) = (corners[e], corners[e + 1]);
            let n0 = 32usize;
            let mut stack: Vec<(f64, [Complex64; 2], f64, [Complex64; 2])> = Vec::new();
            let mut pts: Vec<(f64, [Complex64; 2])> = Vec::with_capacity(n0 + 1);
            for i in 0..=n0 {
                let t = i as f64 / n0 as f64;
                pts.push((t, eval(z0 + (z1 - z0) * t)?));
            }
            for w in pts.windows(2) {
                stack.push((w[0].0, w[0].1, w[1].0, w[1].1));
            }
            while let Some((t0, v0, t1, v1)) = stack.pop() {
                let step = [
                    (v1[0] * v0[0].conj()).arg(),
                    (v1[1] * v0[1].conj()).arg(),
                ];
                if (step[0].abs() < PI / 4.0 && step[1].abs() < PI / 4.0) || t1 - t0 < 1e-10 {
                    total[0] += step[0];
                    total[1] += step[1];
                } else {
                    let tm = 0.5 * (t0 + t1);
                    let vm = eval(z0 + (z1 - z0) * tm)?;
                    stack.push((t0, v0, tm, vm.clone()));
                    stack.push((tm, vm, t1, v1));
                }
            }
        }
        Ok([total[0] / (2.0 * PI), total[1] / (2.0 * PI)])
    }

    /// Extrapolated |D(λ)/λ| for real λ ↓ 0 over λ = 10^{−2} … 10^{−4}.
    pub fn simplicity_at_zero(&self) -> Result<f64> {
        let lambdas: Vec<f64> = (0..=10).map(|i| 10f64.powf(-2.0 - 0.2 * i as f64)).collect();
        let vals: Vec<Complex64> = lambdas
            .iter()
            .map(|&l| self.determinant_raw(Complex64::new(l, 0.0)) / l)
            .collect();
        // D(λ)/λ = s + c·λ + O(λ²): eliminate the linear term pairwise.
        let mut extr: Vec<f64> = Vec::new();
        for i in 1..lambdas.len() {
            let (l0, l1) = (lambdas[i - 1], lambdas[i]);
            let e = (vals[i] * l0 - vals[i - 1] * l1) / (l0 - l1);
            extr.push(e.norm());
        }
        let last = *extr.last().unwrap();
        let prev = extr[extr.len() - 2];
        if (last - prev).abs() > 0.1 * last.abs().max(1e-300) {
            return Err(KdError::NonConvergent { what: "simplicity extrapolation" });
        }
        Ok(last)
    }

    /// h_s′(0) for even g:
    /// (2/(Kr_s)) (∫₁^∞ g(Kr_s ξ) dξ/(√(ξ²−1)(ξ+√(ξ²−1))) − ∫₀¹ g(Kr_s ξ) dξ),
    /// with the ξ = cosh(s) substitution absorbing the endpoint
    /// singularity: the first integral becomes ∫₀^∞ g(Kr_s cosh s) e^{−s} ds.
    pub fn hs_prime_zero(&self) -> Result<f64> {
        if !self.pls.dist.is_even() {
            return Err(KdError::NotEven);
        }
        let c = self.c();
        let d = self.pls.dist.clone();
        Ok(hs_prime_zero_with(&|w| d.density(w), c))
    }

    /// Stability criterion: no zero of D in the open right half-plane and
    /// a simple zero at the origin. Counting errors and a δ-sweep
    /// disagreement downgrade the verdict to Inconclusive.
    pub fn stability_verdict(&self) -> StabilityReport {
        let mut report = StabilityReport {
            zero_count: None,
            simplicity: None,
            verdict: Verdict::Inconclusive,
            factor_counts: None,
            delta_counts: Vec::new(),
            reason: None,
        };
        match self.simplicity_at_zero() {
            Ok(s) => report.simplicity = Some(s),
            Err(e) => {
                report.reason = Some(e.to_string());
                return report;
            }
        }
        for delta in [1e-2, self.delta, 1e-4] {
            let p = self.clone().with_delta(delta);
            match p.windings() {
                Ok((n, factors)) => {
                    if delta == self.delta {
                        report.zero_count = Some(n);
                        report.factor_counts = factors;
                    }
                    report.delta_counts.push((delta, n));
                }
                Err(e) => {
                    report.reason = Some(format!("delta = {delta:.0e}: {e}"));
                    return report;
                }
            }
        }
        let n = report.zero_count.unwrap();
        let counts_agree = report.delta_counts.iter().all(|&(_, m)| m == n);
        report.verdict = if n > 0 {
            Verdict::Unstable
        } else if !counts_agree {
            report.reason = Some("zero count depends on the axis offset".into());
            Verdict::Inconclusive
        } else if report.simplicity.unwrap() > SIMPLICITY_TOL {
            Verdict::Stable
        } else {
            report.reason = Some("zero at the origin may not be simple".into());
            Verdict::Inconclusive
        };
        report
    }
}

fn round_winding(w: f64) -> Result<usize> {
    let n = w.round();
    if (w - n).abs() > 0.25 || n < -0.1 {
        return Err(KdError::NonConvergent { what: "winding number not near an integer" });
    }
    Ok(n as usize)
}

/// h_s′(0) for an arbitrary even density profile evaluated at scale c.
pub fn hs_prime_zero_with(g: &dyn Fn(f64) -> f64, c: f64) -> f64 {
    let tail = quad::integrate_real(&|s: f64| g(c * s.cosh()) * (-s).exp(), 0.0, 40.0, 1e-12);
    let locked = quad::integrate_real(&|x: f64| g(c * x), 0.0, 1.0, 1e-12);
    (2.0 / c) * (tail - locked)
}
