//! Locked states of the bimodal two-Lorentzian frequency distribution,
//! in closed form.
//!
//! For g(ω) = (Δ/2π)[((ω−ω₀)²+Δ²)⁻¹ + ((ω+ω₀)²+Δ²)⁻¹] with
//! ω₀ > Δ/√3, existence of a locked state reduces to the scalar
//! equation K = Ψ(ρ²) for the amplitude ρ ∈ (0,1), with the phase ψ
//! fixed by sin ψ = 4ω₀/(K(1+ρ²)) and cos ψ = 4Δ/(K(1−ρ²)) − 1, and
//! order parameter r = ρ|cos ψ|. The convex map Ψ produces a fold:
//! below min Ψ no state exists, between the fold and Ψ(0) = K_c two
//! branches coexist (the larger amplitude stable, the smaller
//! unstable), above K_c only the stable branch continues.
//!
//! Because g has exactly two poles in the lower half-plane, the full
//! order-parameter dynamics restricted to amplitude powers closes into
//! a four-dimensional real system in z₁ = conj(h(−ω₀−iΔ)),
//! z₂ = conj(h(ω₀−iΔ)); the module integrates it and classifies the
//! outcome. The stability integrals J_k also collapse to a two-pole
//! residue formula, cross-checked against the quadrature evaluation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{KdError, Result};
use crate::pls::beta;

const GOLDEN: f64 = 0.381_966_011_250_105;

/// Which root of K = Ψ(ρ²) a branch is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BranchLabel {
    Plus,
    Minus,
}

/// One locked-state branch of the two-Lorentzian family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BiCauchyBranch {
    pub delta: f64,
    pub omega0: f64,
    pub k: f64,
    /// Amplitude ρ ∈ (0, 1).
    pub rho: f64,
    /// Phase ψ between the two pole amplitudes.
    pub psi: f64,
    /// Order parameter r = ρ|cos ψ|.
    pub r: f64,
    pub label: BranchLabel,
    /// Eigenvalue along the antisymmetric direction (1, −1, 0).
    pub eig_transverse: f64,
    /// Coefficients (b, c) of λ² + 2bλ + c = 0 on the symmetric plane.
    pub eig_quadratic: (f64, f64),
}

/// Ψ(x) = 2Δ(1/(1−x) + (ω₀²/Δ²)(1−x)/(1+x)²): coupling at which a
/// state of squared amplitude x exists.
pub fn psi_map(delta: f64, omega0: f64, x: f64) -> f64 {
    let q = omega0 * omega0 / (delta * delta);
    2.0 * delta * (1.0 / (1.0 - x) + q * (1.0 - x) / ((1.0 + x) * (1.0 + x)))
}

/// Ψ′(x), in closed form.
pub fn psi_map_deriv(delta: f64, omega0: f64, x: f64) -> f64 {
    let q = omega0 * omega0 / (delta * delta);
    let p = 1.0 + x;
    2.0 * delta * (1.0 / ((1.0 - x) * (1.0 - x)) + q * (x - 3.0) / (p * p * p))
}

/// Φ(x) = 4Δ(1/(1−x) − (ω₀²/Δ²)(1−x)²/(1+x)³): the stability threshold
/// K < Φ(ρ²), equivalent to Ψ′(ρ²) > 0.
pub fn phi_map(delta: f64, omega0: f64, x: f64) -> f64 {
    let q = omega0 * omega0 / (delta * delta);
    let p = 1.0 + x;
    4.0 * delta * (1.0 / (1.0 - x) - q * (1.0 - x) * (1.0 - x) / (p * p * p))
}

fn check_bimodal(delta: f64, omega0: f64) -> Result<()> {
    if !(delta > 0.0) || !(omega0 > delta / 3.0_f64.sqrt()) {
        return Err(KdError::NotBimodal);
    }
    Ok(())
}

/// The fold of Ψ: (argmin x*, min Ψ) over [0, 1), by golden section.
pub fn fold(delta: f64, omega0: f64) -> Result<(f64, f64)> {
    check_bimodal(delta, omega0)?;
    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-9);
    for _ in 0..120 {
        let m1 = lo + GOLDEN * (hi - lo);
        let m2 = hi - GOLDEN * (hi - lo);
        if psi_map(delta, omega0, m1) < psi_map(delta, omega0, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok((x, psi_map(delta, omega0, x)))
}

/// Bisection for Ψ(x) = k on an interval where Ψ − k changes sign.
fn psi_root(delta: f64, omega0: f64, k: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (psi_map(delta, omega0, mid) - k) * (psi_map(delta, omega0, lo) - k) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn branch_from_x(delta: f64, omega0: f64, k: f64, x: f64, label: BranchLabel) -> BiCauchyBranch {
    let rho = x.sqrt();
    let sin_psi = 4.0 * omega0 / (k * (1.0 + x));
    let cos_psi = 4.0 * delta / (k * (1.0 - x)) - 1.0;
    let psi = sin_psi.atan2(cos_psi);
    // The two conditional-mean poles sit at ρe^{∓iψ/2}, so the order
    // parameter is their average ρ·cos(ψ/2).
    let r = rho * (0.5 * psi).cos();
    let eig_transverse = -delta + 0.25 * k * (1.0 - 3.0 * x - (1.0 + x) * cos_psi);
    let om = 1.0 - x;
    let op = 1.0 + x;
    // b = −tr(J)/2 and c = det(J) of the reduced (ρ, ψ) linearization;
    // both checked against finite-difference Jacobians of the full
    // four-dimensional system.
    let b = delta * (1.0 + 2.0 * x) / om - 0.25 * k * op;
    let c = x * (4.0 * delta * delta * op / (om * om)
        - 4.0 * omega0 * omega0 * om / (op * op)
        - k * delta * op / om);
    BiCauchyBranch {
        delta,
        omega0,
        k,
        rho,
        psi,
        r,
        label,
        eig_transverse,
        eig_quadratic: (b, c),
    }
}

/// All locked-state branches at coupling K, ordered Minus before Plus.
pub fn solve_branches(delta: f64, omega0: f64, k: f64) -> Result<Vec<BiCauchyBranch>> {
    check_bimodal(delta, omega0)?;
    let (x_min, k_fold) = fold(delta, omega0)?;
    if k <= k_fold {
        return Err(KdError::NoBranch);
    }
    let k_c = psi_map(delta, omega0, 0.0);
    let mut out = Vec::new();
    if k < k_c {
        // Left (descending) side of the fold: the small-amplitude root.
        let x = psi_root(delta, omega0, k, 0.0, x_min);
        out.push(branch_from_x(delta, omega0, k, x, BranchLabel::Minus));
    }
    // Right (ascending) side always carries one root for k > k_fold.
    let mut hi = x_min.max(0.5);
    while psi_map(delta, omega0, hi) < k {
        hi = 0.5 * (hi + 1.0);
    }
    let x = psi_root(delta, omega0, k, x_min, hi);
    out.push(branch_from_x(delta, omega0, k, x, BranchLabel::Plus));
    Ok(out)
}

/// Eigenvalues of the linearization at a branch: the antisymmetric
/// eigenvalue and the two roots of λ² + 2bλ + c = 0.
pub fn branch_eigenvalues(b: &BiCauchyBranch) -> (f64, [Complex64; 2]) {
    let (bb, c) = b.eig_quadratic;
    let disc = Complex64::new(bb * bb - c, 0.0).sqrt();
    let pair = [
        Complex64::new(-bb, 0.0) + disc,
        Complex64::new(-bb, 0.0) - disc,
    ];
    (b.eig_transverse, pair)
}

/// Whether every eigenvalue of the branch linearization (other than the
/// rotational zero mode) has negative real part.
pub fn branch_is_stable(b: &BiCauchyBranch) -> bool {
    let (t, pair) = branch_eigenvalues(b);
    t < 0.0 && pair.iter().all(|l| l.re < 0.0)
}

/// J_k(λ) for the two-Lorentzian density by the residue formula
///
///   J_k = ½ [ β^k(z₊)/(λ + iω₀ + Δ + Kr β(z₊))
///           + β^k(z∓)/(λ − iω₀ + Δ + Kr β(z₋)) ],
///   z± = (±ω₀ − iΔ)/(Kr),
///
/// normalized identically to the quadrature evaluation (the K/2 factor
/// lives in the determinant, not here).
pub fn jk_pole(delta: f64, omega0: f64, k: f64, r: f64, order: u32, lambda: Complex64) -> Result<Complex64> {
    let c = k * r;
    let mut sum = Complex64::new(0.0, 0.0);
    for sign in [1.0, -1.0] {
        let pole = Complex64::new(sign * omega0, -delta);
        let b = beta(pole / c)?;
        let den = lambda + Complex64::new(0.0, 1.0) * pole + c * b;
        sum += b.powi(order as i32) / den;
    }
    Ok(0.5 * sum)
}

/// State of the closed four-dimensional order-parameter dynamics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OAState4 {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl OAState4 {
    pub fn norm(&self) -> f64 {
        (self.z1.norm_sqr() + self.z2.norm_sqr()).sqrt()
    }

    /// Distance to the circle {e^{iΘ}·fixed}, minimized over Θ.
    pub fn circle_distance(&self, fixed: &OAState4) -> f64 {
        let overlap = fixed.z1.conj() * self.z1 + fixed.z2.conj() * self.z2;
        let d2 = self.norm() * self.norm() + fixed.norm() * fixed.norm() - 2.0 * overlap.norm();
        d2.max(0.0).sqrt()
    }
}

/// ż₁ = −(Δ+iω₀)z₁ + (K/4)(z₁+z₂ − conj(z₁+z₂)z₁²), and the mirror
/// equation for z₂ with ω₀ negated.
pub fn oa_rhs(s: &OAState4, delta: f64, omega0: f64, k: f64) -> OAState4 {
    let zsum = s.z1 + s.z2;
    let zc = zsum.conj();
    OAState4 {
        z1: -Complex64::new(delta, omega0) * s.z1 + 0.25 * k * (zsum - zc * s.z1 * s.z1),
        z2: -Complex64::new(delta, -omega0) * s.z2 + 0.25 * k * (zsum - zc * s.z2 * s.z2),
    }
}

/// The stationary point of the branch rotated by Θ:
/// z₁ = e^{iΘ}β((ω₀−iΔ)/(Kr)) = e^{iΘ}ρe^{−iψ/2}, and z₂ its mirror
/// with ω₀ negated.
pub fn oa_fixed_point(b: &BiCauchyBranch, theta: f64) -> Result<OAState4> {
    let c = b.k * b.r;
    let ph = Complex64::new(0.0, theta).exp();
    Ok(OAState4 {
        z1: ph * beta(Complex64::new(b.omega0, -b.delta) / c)?,
        z2: ph * beta(Complex64::new(-b.omega0, -b.delta) / c)?,
    })
}

/// Outcome classification of an order-parameter trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OAOutcome {
    ConvergedToPlusCircle,
    DivergedFromMinusCircle,
    ConvergedToIncoherent,
    Undetermined,
}

/// Integrates the four-dimensional system by classical fourth-order
/// Runge–Kutta and classifies the final state against the solved
/// branches (if any). Requires dt ≤ 0.01/max(1, K).
pub fn oa_integrate(
    s0: OAState4,
    delta: f64,
    omega0: f64,
    k: f64,
    t_end: f64,
    dt: f64,
) -> Result<(Vec<(f64, OAState4)>, OAOutcome)> {
    if !(dt > 0.0 && dt <= 0.01 / k.abs().max(1.0)) {
        return Err(KdError::Config(format!(
            "time step {dt} exceeds 0.01/max(1,K) = {}",
            0.01 / k.abs().max(1.0)
        )));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let record_every = (steps / 500).max(1);
    let mut s = s0;
    let mut traj = vec![(0.0, s)];
    let add = |a: &OAState4, b: &OAState4, w: f64| OAState4 {
        z1: a.z1 + w * b.z1,
        z2: a.z2 + w * b.z2,
    };
    for step in 0..steps {
        let k1 = oa_rhs(&s, delta, omega0, k);
        let k2 = oa_rhs(&add(&s, &k1, 0.5 * dt), delta, omega0, k);
        let k3 = oa_rhs(&add(&s, &k2, 0.5 * dt), delta, omega0, k);
        let k4 = oa_rhs(&add(&s, &k3, dt), delta, omega0, k);
        s = OAState4 {
            z1: s.z1 + dt / 6.0 * (k1.z1 + 2.0 * k2.z1 + 2.0 * k3.z1 + k4.z1),
            z2: s.z2 + dt / 6.0 * (k1.z2 + 2.0 * k2.z2 + 2.0 * k3.z2 + k4.z2),
        };
        if (step + 1) % record_every == 0 || step + 1 == steps {
            traj.push(((step + 1) as f64 * dt, s));
        }
    }

    let outcome = match solve_branches(delta, omega0, k) {
        Ok(branches) => {
            let plus = branches.iter().find(|b| b.label == BranchLabel::Plus);
            let minus = branches.iter().find(|b| b.label == BranchLabel::Minus);
            // A run that starts on the unstable circle and leaves a 1e-2
            // neighborhood counts as divergence even if it is later captured
            // by the stable circle.
            let left_minus = minus
                .map(|m| oa_fixed_point(m, 0.0))
                .transpose()?
                .map(|mf| {
                    s0.circle_distance(&mf) < 1e-3
                        && traj.iter().any(|(_, p)| p.circle_distance(&mf) > 1e-2)
                })
                .unwrap_or(false);
            if s.norm() < 1e-3 {
                OAOutcome::ConvergedToIncoherent
            } else if left_minus {
                OAOutcome::DivergedFromMinusCircle
            } else if let Some(b) = plus {
                let fixed = oa_fixed_point(b, 0.0)?;
                if s.circle_distance(&fixed) < 1e-4 {
                    OAOutcome::ConvergedToPlusCircle
                } else {
                    OAOutcome::Undetermined
                }
            } else {
                OAOutcome::Undetermined
            }
        }
        Err(_) => {
            if s.norm() < 1e-3 {
                OAOutcome::ConvergedToIncoherent
            } else {
                OAOutcome::Undetermined
            }
        }
    };
    Ok((traj, outcome))
}

/// Adds an isotropic random perturbation of radius `eps` to a state.
pub fn perturbed(s: &OAState4, eps: f64, seed: u64) -> OAState4 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    OAState4 {
        z1: s.z1 + eps * d(),
        z2: s.z2 + eps * d(),
    }
}

/// One row of the branch sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagramRow {
    pub k: f64,
    pub rho_minus: Option<f64>,
    pub rho_plus: Option<f64>,
    pub r_minus: Option<f64>,
    pub r_plus: Option<f64>,
    pub minus_stable: Option<bool>,
    pub plus_stable: Option<bool>,
}

/// Sweeps the coupling range and tabulates both branches with their
/// eigenvalue verdicts; couplings below the fold yield empty rows.
pub fn bifurcation_diagram(delta: f64, omega0: f64, k_values: &[f64]) -> Result<Vec<DiagramRow>> {
    check_bimodal(delta, omega0)?;
    let mut ks = k_values.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        let mut row = DiagramRow {
            k,
            rho_minus: None,
            rho_plus: None,
            r_minus: None,
            r_plus: None,
            minus_stable: None,
            plus_stable: None,
        };
        if let Ok(branches) = solve_branches(delta, omega0, k) {
            for b in &branches {
                let stable = branch_is_stable(b);
                match b.label {
                    BranchLabel::Minus => {
                        row.rho_minus = Some(b.rho);
                        row.r_minus = Some(b.r);
                        row.minus_stable = Some(stable);
                    }
                    BranchLabel::Plus => {
                        row.rho_plus = Some(b.rho);
                        row.r_plus = Some(b.r);
                        row.plus_stable = Some(stable);
                    }
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FrequencyDistribution;
    use crate::pls::solve_rs;

    const D: f64 = 1.0;
    const W0: f64 = 2.0;

    fn f_rho(delta: f64, k: f64, r1: f64, r2: f64, psi: f64) -> f64 {
        -delta * r1 + 0.25 * k * (1.0 - r1 * r1) * (r1 + r2 * psi.cos())
    }

    fn f_psi(omega0: f64, k: f64, r1: f64, r2: f64, psi: f64) -> f64 {
        2.0 * omega0
            - 0.25 * k * (r1 * r1 + r2 * r2 + 2.0 * r1 * r1 * r2 * r2) / (r1 * r2) * psi.sin()
    }

    #[test]
    fn psi_at_zero_equals_critical_coupling() {
        let kc = FrequencyDistribution::bicauchy(D, W0).critical_coupling().unwrap();
        assert!((psi_map(D, W0, 0.0) - kc).abs() < 1e-12);
        assert!((psi_map(D, W0, 0.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn psi_derivative_sign_at_zero() {
        // Ψ′(0) = 2Δ(1 − 3ω₀²/Δ²) < 0 exactly in the bimodal regime.
        for (delta, omega0) in [(1.0, 2.0), (1.0, 0.6), (0.5, 5.0)] {
            let exact = 2.0 * delta * (1.0 - 3.0 * omega0 * omega0 / (delta * delta));
            assert!((psi_map_deriv(delta, omega0, 0.0) - exact).abs() < 1e-10);
            assert_eq!(exact < 0.0, omega0 > delta / 3.0_f64.sqrt());
        }
        // Finite-difference check of the closed-form derivative.
        for x in [0.1, 0.45, 0.8] {
            let h = 1e-6;
            let fd = (psi_map(D, W0, x + h) - psi_map(D, W0, x - h)) / (2.0 * h);
            assert!((psi_map_deriv(D, W0, x) - fd).abs() < 1e-5);
        }
    }

    #[test]
    fn phi_endpoint_values() {
        assert!((phi_map(D, W0, 0.0) + 12.0).abs() < 1e-12);
        assert!(phi_map(D, W0, 0.999) > 1e3);
    }

    #[test]
    fn fold_location() {
        // Frozen from an independent bounded 1-D minimization oracle.
        let (x, kf) = fold(D, W0).unwrap();
        assert!((x - 0.451_970_102).abs() < 1e-6, "{x}");
        assert!((kf - 5.729_031_538).abs() < 1e-6, "{kf}");
    }

    #[test]
    fn branch_counts_by_coupling() {
        assert_eq!(solve_branches(D, W0, 5.0).unwrap_err(), KdError::NoBranch);
        assert_eq!(solve_branches(D, W0, 8.0).unwrap().len(), 2);
        let above = solve_branches(D, W0, 12.0).unwrap();
        assert_eq!(above.len(), 1);
        assert_eq!(above[0].label, BranchLabel::Plus);
        assert_eq!(solve_branches(1.0, 0.5, 8.0).unwrap_err(), KdError::NotBimodal);
    }

    #[test]
    fn branch_invariants_and_frozen_values() {
        let branches = solve_branches(D, W0, 8.0).unwrap();
        let minus = &branches[0];
        let plus = &branches[1];
        for b in &branches {
            assert!((psi_map(D, W0, b.rho * b.rho) - 8.0).abs() < 1e-10);
            let sin_expect = 4.0 * W0 / (8.0 * (1.0 + b.rho * b.rho));
            assert!((b.psi.sin() - sin_expect).abs() < 1e-10);
            // r = ρ·cos(ψ/2), equivalently ρ·√(2Δ/(K(1−ρ²))).
            let r_expect = b.rho * (2.0 * D / (8.0 * (1.0 - b.rho * b.rho))).sqrt();
            assert!((b.r - r_expect).abs() < 1e-10);
            // Stationarity of the polar flow.
            assert!(f_rho(D, 8.0, b.rho, b.rho, b.psi).abs() < 1e-10);
            assert!(f_psi(W0, 8.0, b.rho, b.rho, b.psi).abs() < 1e-10);
        }
        // Frozen oracle values (root finding + closed-form eigenvalue data).
        assert!((minus.rho - 0.334_380_871_4).abs() < 1e-8);
        assert!((minus.r - 0.177_402_047_8).abs() < 1e-8);
        assert!((plus.rho - 0.851_159_104_3).abs() < 1e-8);
        assert!((plus.r - 0.810_770_133_4).abs() < 1e-8);
        assert!((plus.eig_quadratic.0 - 5.439_234_868).abs() < 1e-5);
        assert!((plus.eig_quadratic.1 - 28.478_736).abs() < 1e-4);
        assert!((plus.eig_transverse + 6.156_673).abs() < 1e-5);
        assert!((minus.eig_quadratic.0 + 0.845_963_296).abs() < 1e-5);
        assert!((minus.eig_quadratic.1 + 1.774_794).abs() < 1e-5);
        assert!((minus.eig_transverse - 1.300_986).abs() < 1e-5);
    }

    #[test]
    fn eigenvalue_sign_pattern() {
        let branches = solve_branches(D, W0, 8.0).unwrap();
        let minus = &branches[0];
        let plus = &branches[1];
        assert!(plus.eig_transverse < 0.0);
        assert!(plus.eig_quadratic.0 > 0.0 && plus.eig_quadratic.1 > 0.0);
        assert!(branch_is_stable(plus));
        assert!(minus.eig_quadratic.1 < 0.0);
        assert!(!branch_is_stable(minus));
        let (_, pair) = branch_eigenvalues(minus);
        assert!(pair.iter().any(|l| l.re > 0.0));
    }

    #[test]
    fn stability_equivalence_on_grid() {
        // c>0 ⟺ K<Φ(ρ²) ⟺ Ψ′(ρ²)>0 across parameters and branches.
        let mut checked = 0;
        for i in 0..20 {
            for j in 0..20 {
                let delta = 0.2 + 0.15 * i as f64;
                let omega0 = delta / 3.0_f64.sqrt() + 0.05 + 0.3 * j as f64;
                let (_, kf) = fold(delta, omega0).unwrap();
                let kc = psi_map(delta, omega0, 0.0);
                for m in 1..=10 {
                    let k = kf + (kc * 1.4 - kf) * m as f64 / 10.0;
                    let Ok(branches) = solve_branches(delta, omega0, k) else { continue };
                    for b in &branches {
                        let x = b.rho * b.rho;
                        let c_pos = b.eig_quadratic.1 > 0.0;
                        assert_eq!(c_pos, k < phi_map(delta, omega0, x), "K={k} x={x}");
                        assert_eq!(c_pos, psi_map_deriv(delta, omega0, x) > 0.0);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 400, "only {checked} branch points sampled");
    }

    #[test]
    fn order_parameter_matches_direct_solve() {
        let d = FrequencyDistribution::bicauchy(D, W0);
        let states = solve_rs(&d, 8.0, None).unwrap();
        let branches = solve_branches(D, W0, 8.0).unwrap();
        // solve_rs sorts descending, branches ascending.
        assert!((states[0].r_s - branches[1].r).abs() < 1e-6);
        assert!((states[1].r_s - branches[0].r).abs() < 1e-6);
    }

    #[test]
    fn pole_formula_matches_quadrature() {
        use crate::spectral::SpectralProblem;
        let d = FrequencyDistribution::bicauchy(D, W0);
        let states = solve_rs(&d, 8.0, None).unwrap();
        for s in &states {
            let prob = SpectralProblem::new(s.clone());
            for lambda in [
                Complex64::new(0.5, 0.3),
                Complex64::new(0.01, -2.0),
                Complex64::new(2.0, 7.0),
            ] {
                for order in [0u32, 2] {
                    let byquad = prob.jk(order, lambda).unwrap();
                    let bypole = jk_pole(D, W0, s.k, s.r_s, order, lambda).unwrap();
                    assert!(
                        (byquad - bypole).norm() < 1e-8,
                        "order {order}, lambda {lambda}: {byquad} vs {bypole}"
                    );
                }
            }
        }
    }

    #[test]
    fn oa_rhs_basics() {
        let zero = OAState4 {
            z1: Complex64::new(0.0, 0.0),
            z2: Complex64::new(0.0, 0.0),
        };
        assert_eq!(oa_rhs(&zero, D, W0, 8.0).norm(), 0.0);

        // Rotation equivariance: rhs(e^{iΘ}z) = e^{iΘ}rhs(z).
        let s = OAState4 {
            z1: Complex64::new(0.4, -0.2),
            z2: Complex64::new(-0.1, 0.5),
        };
        let ph = Complex64::new(0.0, 0.9).exp();
        let rot = OAState4 {
            z1: ph * s.z1,
            z2: ph * s.z2,
        };
        let a = oa_rhs(&rot, D, W0, 8.0);
        let b = oa_rhs(&s, D, W0, 8.0);
        assert!((a.z1 - ph * b.z1).norm() < 1e-12);
        assert!((a.z2 - ph * b.z2).norm() < 1e-12);
    }

    #[test]
    fn fixed_points_are_stationary() {
        for k in [8.0, 12.0] {
            for b in &solve_branches(D, W0, k).unwrap() {
                for theta in [0.0, 0.7, -2.1] {
                    let fp = oa_fixed_point(b, theta).unwrap();
                    let v = oa_rhs(&fp, D, W0, k);
                    assert!(v.norm() < 1e-8, "K={k} {:?} theta={theta}: {}", b.label, v.norm());
                }
            }
        }
    }

    #[test]
    fn plus_circle_attracts() {
        let branches = solve_branches(D, W0, 8.0).unwrap();
        let plus = &branches[1];
        let fp = oa_fixed_point(plus, 0.3).unwrap();
        let start = perturbed(&fp, 1e-3, 11);
        let (traj, outcome) = oa_integrate(start, D, W0, 8.0, 200.0, 0.00125).unwrap();
        assert_eq!(outcome, OAOutcome::ConvergedToPlusCircle);
        let end = traj.last().unwrap().1;
        assert!(end.circle_distance(&fp) < 1e-5, "{}", end.circle_distance(&fp));
    }

    #[test]
    fn minus_circle_repels() {
        let branches = solve_branches(D, W0, 8.0).unwrap();
        let minus = &branches[0];
        let fp = oa_fixed_point(minus, 0.0).unwrap();
        let start = perturbed(&fp, 1e-6, 13);
        let (traj, outcome) = oa_integrate(start, D, W0, 8.0, 200.0, 0.00125).unwrap();
        assert_eq!(outcome, OAOutcome::DivergedFromMinusCircle);
        let escaped = traj.iter().any(|(_, s)| s.circle_distance(&fp) > 1e-2);
        assert!(escaped);
    }

    #[test]
    fn incoherent_state_unstable_above_threshold() {
        let noise = OAState4 {
            z1: Complex64::new(1e-6, -1e-6),
            z2: Complex64::new(-1e-6, 1e-6),
        };
        let (traj, _) = oa_integrate(noise, D, W0, 12.0, 120.0, 0.0008).unwrap();
        assert!(traj.last().unwrap().1.norm() > 1e-2);
    }

    #[test]
    fn bifurcation_diagram_structure() {
        let ks: Vec<f64> = (0..=40).map(|i| 4.0 + 0.25 * i as f64).collect();
        let rows = bifurcation_diagram(D, W0, &ks).unwrap();
        let (x_fold, k_fold) = fold(D, W0).unwrap();
        assert!((k_fold - 5.729_031_538).abs() < 1e-6);
        let _ = x_fold;
        let mut prev_plus: Option<f64> = None;
        for row in &rows {
            if row.k < k_fold {
                assert!(row.rho_plus.is_none() && row.rho_minus.is_none());
            } else if row.k < 10.0 {
                assert!(row.rho_plus.is_some() && row.rho_minus.is_some(), "K={}", row.k);
                assert_eq!(row.plus_stable, Some(true));
                assert_eq!(row.minus_stable, Some(false));
            } else if row.k > 10.0 {
                assert!(row.rho_plus.is_some() && row.rho_minus.is_none(), "K={}", row.k);
                assert_eq!(row.plus_stable, Some(true));
            }
            if let Some(rp) = row.rho_plus {
                if let Some(prev) = prev_plus {
                    assert!(rp > prev, "rho_plus not increasing at K={}", row.k);
                }
                prev_plus = Some(rp);
            }
        }
        // The small branch vanishes at the upper endpoint.
        let near = bifurcation_diagram(D, W0, &[9.99]).unwrap();
        let rm = near[0].rho_minus.unwrap();
        assert!(rm < 0.05, "{rm}");
    }
}
