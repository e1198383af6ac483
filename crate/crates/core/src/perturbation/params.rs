//! Algorithm constants and the parameter constraints they must satisfy.

use serde::{Deserialize, Serialize};

use super::PerturbError;
use crate::patch::{perturbed_net_params, TAU_BALL};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Replacement values for the derived constants. Any override makes a run non-certified.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub gamma0: Option<f64>,
    pub delta0: Option<f64>,
    pub alpha0: Option<f64>,
    pub alpha_tilde0: Option<f64>,
}

impl Overrides {
    /// Desk-scale constants: `Γ0 = ρ0/10`, `δ0 = α0 = Γ0^(m+1)` and
    /// `α̃0 = 2³ m^(3/2) α0`, the ratio the hoop distortion bound has to `α0`.
    pub fn practical(m: usize, rho0: f64) -> Self {
        let gamma0 = 0.1 * rho0;
        let alpha0 = gamma0.powi(m as i32 + 1);
        Self {
            gamma0: Some(gamma0),
            delta0: Some(alpha0),
            alpha0: Some(alpha0),
            alpha_tilde0: Some(8.0 * (m as f64).powf(1.5) * alpha0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.gamma0.is_none() && self.delta0.is_none() && self.alpha0.is_none() && self.alpha_tilde0.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideFlags {
    pub gamma0: bool,
    pub delta0: bool,
    pub alpha0: bool,
    pub alpha_tilde0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub m: usize,
    pub mu0: f64,
    pub rho0: f64,
    pub rho_tilde0: f64,
    pub gamma0: f64,
    pub delta0: f64,
    pub alpha0: f64,
    pub alpha_tilde0: f64,
    pub xi0: f64,
    pub nu0: f64,
    pub c: f64,
    pub log2_c: f64,
    pub max_attempts: usize,
    pub rng_seed: u64,
    pub overridden: OverrideFlags,
    pub certified: bool,
    /// Constraints that fail but were tolerated because the run is not certified.
    pub warnings: Vec<String>,
}

/// `C = m^(3/2) (2/μ0)^(4m² + 5m + 21)`.
pub fn derivation_constant(m: usize, mu0: f64) -> f64 {
    (m as f64).powf(1.5) * (2.0 / mu0).powi((4 * m * m + 5 * m + 21) as i32)
}

fn log2_derivation_constant(m: usize, mu0: f64) -> f64 {
    1.5 * (m as f64).log2() + (4 * m * m + 5 * m + 21) as f64 * (2.0 / mu0).log2()
}

/// Every derived constant, before any feasibility check.
///
/// `Γ0 = ρ0/C`, `δ0 = Γ0^(m+1)`, `α0 = 2^13 Γ0/μ0³` and `α̃0 = 2^16 m^(3/2) Γ0/μ0³`.
pub fn derived_constants(m: usize, mu0: f64, rho0: f64, xi0: f64, nu0: f64) -> AlgorithmParams {
    let c = derivation_constant(m, mu0);
    let log2_c = if c.is_finite() { c.log2() } else { log2_derivation_constant(m, mu0) };
    let gamma0 = rho0 / c;
    let mu3 = mu0 * mu0 * mu0;
    let mut p = AlgorithmParams {
        m,
        mu0,
        rho0,
        rho_tilde0: (1.0 + nu0) * (1.0 + xi0) * rho0,
        gamma0,
        delta0: gamma0.powi(m as i32 + 1),
        alpha0: 8192.0 * gamma0 / mu3,
        alpha_tilde0: 65536.0 * (m as f64).powf(1.5) * gamma0 / mu3,
        xi0,
        nu0,
        c,
        log2_c,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
        rng_seed: 0,
        overridden: OverrideFlags::default(),
        certified: true,
        warnings: Vec::new(),
    };
    p.warnings = p.constraint_failures();
    p
}

/// Fills every derived constant, then applies `overrides`.
///
/// Without overrides the run is certified and every parameter constraint must
/// hold, including that the protection `δ` stays above the empty-ball slack
/// `τ_ball ε` of double-precision predicates. With overrides the failed
/// constraints are recorded as warnings.
pub fn derive_params(
    m: usize,
    mu0: f64,
    rho0: f64,
    xi0: f64,
    nu0: f64,
    overrides: &Overrides,
) -> Result<AlgorithmParams, PerturbError> {
    let infeasible = |msg: String| Err(PerturbError::InfeasibleParams(msg));
    if m == 0 {
        return infeasible("dimension must be positive".into());
    }
    if !(mu0 > 0.0 && mu0 <= 1.0) {
        return infeasible(format!("mu0 = {mu0} outside (0, 1]"));
    }
    if !(rho0 > 0.0) {
        return infeasible(format!("rho0 = {rho0} gives Gamma0 = 0"));
    }
    if !(xi0 >= 0.0 && nu0 >= 0.0) {
        return infeasible(format!("negative distortion bounds xi0 = {xi0}, nu0 = {nu0}"));
    }

    let mut p = derived_constants(m, mu0, rho0, xi0, nu0);
    p.certified = overrides.is_empty();
    if let Some(g) = overrides.gamma0 {
        p.gamma0 = g;
        p.overridden.gamma0 = true;
    }
    if let Some(d) = overrides.delta0 {
        p.delta0 = d;
        p.overridden.delta0 = true;
    }
    if let Some(a) = overrides.alpha0 {
        p.alpha0 = a;
        p.overridden.alpha0 = true;
    }
    if let Some(a) = overrides.alpha_tilde0 {
        p.alpha_tilde0 = a;
        p.overridden.alpha_tilde0 = true;
    }
    if !(p.gamma0 > 0.0 && p.gamma0 <= 1.0) {
        return infeasible(format!("Gamma0 = {} outside (0, 1]", p.gamma0));
    }
    if !(p.delta0 >= 0.0 && p.alpha0 >= 0.0 && p.alpha_tilde0 >= 0.0) {
        return infeasible("negative delta0, alpha0 or alpha_tilde0".into());
    }
    if p.mu_prime() <= 0.0 {
        return infeasible(format!("rho_tilde0 = {} leaves no separation: mu0 - 2 rho_tilde0 <= 0", p.rho_tilde0));
    }

    let failures = p.constraint_failures();
    if p.certified && !failures.is_empty() {
        return infeasible(failures.join("; "));
    }
    p.warnings = failures;
    Ok(p)
}

impl AlgorithmParams {
    /// `μ'` of the perturbed nets; independent of `ε`.
    pub fn mu_prime(&self) -> f64 {
        perturbed_net_params(self.mu0, 1.0, self.rho_tilde0).0
    }

    /// `ε' = (1 + ρ̃0) ε`.
    pub fn eps_prime(&self, eps: f64) -> f64 {
        perturbed_net_params(self.mu0, eps, self.rho_tilde0).1
    }

    /// Protection `δ = δ0 μ' ε'` of a patch with sampling radius `eps`.
    pub fn delta(&self, eps: f64) -> f64 {
        self.delta0 * self.mu_prime() * self.eps_prime(eps)
    }

    /// Radius `(5 + 3μ0/2) ε` of the neighbourhood complex.
    pub fn neighborhood_radius(&self, eps: f64) -> f64 {
        (5.0 + 1.5 * self.mu0) * eps
    }

    /// Diameter bound `(5/2)(1 + δ0 μ0 / 2) ε'` on forbidden configurations.
    pub fn diameter_bound(&self, eps: f64) -> f64 {
        2.5 * (1.0 + 0.5 * self.delta0 * self.mu0) * self.eps_prime(eps)
    }

    /// Messages for every parameter constraint that fails.
    pub fn constraint_failures(&self) -> Vec<String> {
        let m = self.m as f64;
        let mut out = Vec::new();
        if self.rho_tilde0 > self.mu0 / 4.0 {
            out.push(format!("rho_tilde0 = {} exceeds mu0/4 = {}", self.rho_tilde0, self.mu0 / 4.0));
        }
        let nu_max = (1.0 - self.xi0) / (1.0 + self.xi0);
        if self.nu0 > nu_max {
            out.push(format!("nu0 = {} exceeds (1 - xi0)/(1 + xi0) = {nu_max}", self.nu0));
        }
        // ξ0 ≤ (ρ0/C)^(4m+2) / 16, in base-2 logarithms.
        let log2_xi_max = -4.0 + (4.0 * m + 2.0) * (self.rho0.log2() - self.log2_c);
        if self.xi0 > 0.0 && self.xi0.log2() > log2_xi_max {
            let shrink = 0.5 * (log2_xi_max - self.xi0.log2());
            out.push(format!(
                "xi0 = {:e} exceeds 2^{log2_xi_max:.1}; with distortion proportional to eps^2 the sampling \
                 radius must shrink by a factor 2^{shrink:.1}",
                self.xi0
            ));
        }
        if self.gamma0 > 2.0 * self.mu0 * self.mu0 / 75.0 {
            out.push(format!("Gamma0 = {} exceeds 2 mu0^2 / 75", self.gamma0));
        }
        if self.delta0 > self.gamma0.powi(self.m as i32 + 1) * (1.0 + 1e-12) {
            out.push(format!("delta0 = {} exceeds Gamma0^(m+1)", self.delta0));
        }
        // Hoop distortion hypothesis ξ0 ≤ (Γ0^(2m+1)/4)².
        let log2_hoop = 2.0 * ((2.0 * m + 1.0) * self.gamma0.log2() - 2.0);
        if self.xi0 > 0.0 && self.xi0.log2() > log2_hoop {
            out.push(format!("xi0 = {:e} exceeds (Gamma0^(2m+1)/4)^2 = 2^{log2_hoop:.1}", self.xi0));
        }
        let rel_delta = self.delta0 * self.mu_prime() * (1.0 + self.rho_tilde0);
        if !(rel_delta > TAU_BALL) {
            let log2_rel = if rel_delta > 0.0 { rel_delta.log2() } else { f64::NEG_INFINITY };
            out.push(format!(
                "protection delta = 2^{log2_rel:.1} eps lies below the empty-ball slack {TAU_BALL:e} eps \
                 of double-precision predicates, at every sampling radius"
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_for_planar_half_separation() {
        let c = derivation_constant(2, 0.5);
        assert_eq!(c.log2(), 95.5);
    }

    #[test]
    fn zero_rho_is_infeasible() {
        assert!(matches!(
            derive_params(2, 0.5, 0.0, 0.0, 0.0, &Overrides::default()),
            Err(PerturbError::InfeasibleParams(_))
        ));
    }

    #[test]
    fn certified_mode_is_infeasible_at_double_precision() {
        let err = derive_params(2, 0.5, 0.1, 0.0, 0.0, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("empty-ball slack"), "{err}");
    }

    #[test]
    fn overridden_alpha_tilde_by_formula() {
        let g = 0.05;
        let o = Overrides {
            gamma0: Some(g),
            delta0: Some(g * g * g),
            alpha_tilde0: Some(65536.0 * 2f64.powf(1.5) * g / 0.125),
            ..Overrides::default()
        };
        let p = derive_params(2, 0.5, 0.1, 0.0, 0.0, &o).unwrap();
        assert!(!p.certified);
        assert!(p.overridden.gamma0 && !p.overridden.alpha0);
        assert!((p.alpha_tilde0 - 7.4e4).abs() < 0.01 * 7.4e4);
    }

    #[test]
    fn practical_defaults() {
        let p = derive_params(2, 0.5, 0.1, 0.0, 0.0, &Overrides::practical(2, 0.1)).unwrap();
        assert!((p.gamma0 - 0.01).abs() < 1e-15);
        assert!((p.delta0 - 1e-6).abs() < 1e-18);
        // Γ0 = 0.01 is above 2μ0²/75 ≈ 0.0067, which only the certified mode enforces.
        assert!(p.warnings.iter().any(|w| w.starts_with("Gamma0")));
    }

    #[test]
    fn negative_separation_is_rejected() {
        let r = derive_params(2, 0.5, 0.1, 2.0, 0.0, &Overrides::practical(2, 0.1));
        assert!(matches!(r, Err(PerturbError::InfeasibleParams(_))));
    }
}
