//! Pressure-parametrized coordinates on the cone of density vectors.
//!
//! Every interior density vector `ρ` is written uniquely as `ρ = X(s, w)`,
//! where `s = p̂(ρ)` is its pressure and `w` lies on the reference surface
//! `S₀ = {w > 0 : vbar0 · w = 1}` of states at pressure `p0`. Along a curve
//! `s ↦ X(s, w)` the chemical potentials differ from those of `w` only by a
//! multiple of `(1, …, 1)`, so all *differences* of potentials are
//! functions of `w` alone.
//!
//! Exponentials of the form `exp(m_k (g_k(p0) - g_k(s)))` overflow quickly at
//! extreme pressures, so everything is evaluated in log space.
//!
//! ```
//! use msmix::chart::{forward_chart, inverse_chart, NormalizedState};
//! use msmix::thermo::SpeciesSet;
//!
//! let sp = SpeciesSet::log_mixture(&[1.0, 3.0], &[1.0, 0.5], &[0.0, 0.0], 1.0)?;
//! let w = NormalizedState::new(&sp, vec![0.6, 0.8])?;
//! let rho = forward_chart(&sp, 1e-4, &w)?;
//! assert!((sp.pressure(&rho)? / 1e-4 - 1.0).abs() < 1e-12);
//! let back = inverse_chart(&sp, &rho)?;
//! assert!((back.w.as_slice()[1] - 0.8).abs() < 1e-12);
//! # Ok::<(), msmix::Error>(())
//! ```

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result, StateProblem};
use crate::numerics::{bracket_decreasing, logsumexp, solve_bracketed, RootProblem};
use crate::thermo::SpeciesSet;

/// A point of the reference surface `S₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedState(Vec<f64>);

impl NormalizedState {
    /// Accepts `w` if it is positive and `|vbar0 · w - 1| <= 1e-12`.
    pub fn new(sp: &SpeciesSet, w: Vec<f64>) -> Result<Self> {
        sp.check_interior(&w)?;
        let v: f64 = sp.vbar0().iter().zip(&w).map(|(a, b)| a * b).sum();
        if (v - 1.0).abs() > 1e-12 {
            return Err(Error::NotInterior(StateProblem { index: 0, value: v }));
        }
        Ok(NormalizedState(w))
    }

    /// Radial projection `ρ / (vbar0 · ρ)` of a positive vector onto `S₀`.
    pub fn project(sp: &SpeciesSet, rho: &[f64]) -> Result<Self> {
        sp.check_interior(rho)?;
        let v: f64 = sp.vbar0().iter().zip(rho).map(|(a, b)| a * b).sum();
        Ok(NormalizedState(rho.iter().map(|r| r / v).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Pressure coordinate plus the normalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub s: f64,
    pub w: NormalizedState,
}

static CHI_CALLS: AtomicU64 = AtomicU64::new(0);
static CHI_BOUND_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide counters maintained by every χ-root evaluation.
///
/// Each call checks its result against the a-priori bounds
/// `min{1, 1/|a|₁}^{1/min m} <= χ <= max{1, 1/|a|₁}^{1/min m}` and the
/// derived bounds on `χ^{m_i}`; a violation is counted, never silently
/// ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiDiagnostics {
    pub calls: u64,
    pub bound_violations: u64,
}

pub fn chi_diagnostics() -> ChiDiagnostics {
    ChiDiagnostics {
        calls: CHI_CALLS.load(Ordering::Relaxed),
        bound_violations: CHI_BOUND_VIOLATIONS.load(Ordering::Relaxed),
    }
}

/// The positive root `χ` of `Σ a_j χ^{m_j} = 1`.
pub fn chi_root(a: &[f64], m: &[f64]) -> Result<f64> {
    if let Some(index) = a.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NotInterior(StateProblem {
            index,
            value: a[index],
        }));
    }
    let ln_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    Ok(chi_root_log(&ln_a, m)?.exp())
}

/// `ln χ` for coefficients given by their logarithms.
///
/// Entries with `ln a_j = -inf` (zero coefficients) drop out of the
/// equation. At least one coefficient must be positive.
pub fn chi_root_log(ln_a: &[f64], m: &[f64]) -> Result<f64> {
    assert_eq!(ln_a.len(), m.len());
    let support: Vec<(f64, f64)> = ln_a
        .iter()
        .zip(m)
        .filter(|(la, _)| **la > f64::NEG_INFINITY)
        .map(|(&la, &mi)| (la, mi))
        .collect();
    if support.is_empty() {
        return Err(Error::ZeroTotalDensity);
    }
    let m_min = support.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let m_max = support.iter().map(|s| s.1).fold(0.0, f64::max);
    let big_l = logsumexp(support.iter().map(|s| s.0));
    let lo = (-big_l).min(0.0) / m_min;
    let hi = (-big_l).max(0.0) / m_min;
    let eval = |t: f64| -> (f64, f64) {
        let terms = support.iter().map(|(la, mi)| la + mi * t);
        let f = logsumexp(terms.clone());
        let df: f64 = support
            .iter()
            .map(|(la, mi)| (la + mi * t - f).exp() * mi)
            .sum();
        (f, df)
    };
    // Pad the analytic bracket by a few ulps so rounding cannot spoil it.
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    let problem = RootProblem::new(eval, lo - pad, hi + pad).tol(4e-14);
    let t = solve_bracketed(&problem)?;

    CHI_CALLS.fetch_add(1, Ordering::Relaxed);
    let slack = 1e-12 * (1.0 + t.abs() * m_max);
    let ratio = m_max / m_min;
    let in_bracket = t >= lo - slack && t <= hi + slack;
    let powers_ok = support.iter().all(|(_, mi)| {
        let e = mi * t;
        e <= (-big_l * ratio).max(0.0) + slack && e >= (-big_l * ratio).min(0.0) - slack
    });
    if !(in_bracket && powers_ok) {
        CHI_BOUND_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    Ok(t)
}

/// `ln x̂_k(w)`: log number fractions of a positive vector.
fn ln_number_fractions(m: &[f64], rho: &[f64]) -> Vec<f64> {
    let ln_n = logsumexp(rho.iter().zip(m).map(|(r, mi)| r.ln() - mi.ln()));
    rho.iter()
        .zip(m)
        .map(|(r, mi)| r.ln() - mi.ln() - ln_n)
        .collect()
}

/// `ln E_k(s) = m_k (g_k(p0) - g_k(s))`.
pub fn ln_e(sp: &SpeciesSet, s: f64) -> Vec<f64> {
    let p0 = sp.p0();
    sp.laws()
        .iter()
        .zip(sp.masses())
        .map(|(l, m)| m * (l.g(p0) - l.g(s)))
        .collect()
}

/// The chart `X(s, w)`: the density vector with pressure `s` whose
/// potential differences agree with those of `w`.
pub fn forward_chart(sp: &SpeciesSet, s: f64, w: &NormalizedState) -> Result<Vec<f64>> {
    forward_raw(sp, s, w.as_slice())
}

fn forward_raw(sp: &SpeciesSet, s: f64, w: &[f64]) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::NonpositiveDensity(s));
    }
    let m = sp.masses();
    let ln_e = ln_e(sp, s);
    let ln_a: Vec<f64> = ln_number_fractions(m, w)
        .iter()
        .zip(&ln_e)
        .map(|(x, e)| x + e)
        .collect();
    let t = chi_root_log(&ln_a, m)?;
    // ln x̂_k(X) = ln a_k + m_k t
    let lx: Vec<f64> = ln_a.iter().zip(m).map(|(la, mi)| la + mi * t).collect();
    let ln_denominator = logsumexp(
        sp.laws()
            .iter()
            .zip(m)
            .zip(&lx)
            .map(|((l, mi), x)| l.ln_g1(s) + mi.ln() + x),
    );
    Ok(lx
        .iter()
        .zip(m)
        .map(|(x, mi)| (mi.ln() + x - ln_denominator).exp())
        .collect())
}

/// Inverse of [`forward_chart`]: `s = p̂(ρ)` and the normalized state `w`.
pub fn inverse_chart(sp: &SpeciesSet, rho: &[f64]) -> Result<ChartPoint> {
    let s = sp.pressure(rho)?;
    inverse_chart_at(sp, rho, s)
}

/// [`inverse_chart`] with the pressure of `rho` supplied by the caller.
pub fn inverse_chart_at(sp: &SpeciesSet, rho: &[f64], s: f64) -> Result<ChartPoint> {
    sp.check_interior(rho)?;
    let m = sp.masses();
    let ln_b: Vec<f64> = ln_number_fractions(m, rho)
        .iter()
        .zip(ln_e(sp, s))
        .map(|(x, e)| x - e)
        .collect();
    let t = chi_root_log(&ln_b, m)?;
    let lw: Vec<f64> = ln_b.iter().zip(m).map(|(lb, mi)| lb + mi * t).collect();
    let ln_den = logsumexp(
        sp.vbar0()
            .iter()
            .zip(m)
            .zip(&lw)
            .map(|((v, mi), x)| v.ln() + mi.ln() + x),
    );
    let w = lw
        .iter()
        .zip(m)
        .map(|(x, mi)| (mi.ln() + x - ln_den).exp())
        .collect();
    Ok(ChartPoint {
        s,
        w: NormalizedState(w),
    })
}

/// The quotients `F_k = X_k(s, w) / w_k` and their `w`-independent
/// envelopes `F̲_k(s) <= F_k <= F̄_k(s)`, all stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct Quotients {
    pub ln_f: Vec<f64>,
    pub ln_upper: Vec<f64>,
    pub ln_lower: Vec<f64>,
}

impl Quotients {
    pub fn f(&self) -> Vec<f64> {
        self.ln_f.iter().map(|v| v.exp()).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.ln_upper.iter().map(|v| v.exp()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.ln_lower.iter().map(|v| v.exp()).collect()
    }

    /// Largest violation of the envelope, measured in log space
    /// (non-positive when the envelope holds).
    pub fn envelope_excess(&self) -> f64 {
        self.ln_f
            .iter()
            .zip(&self.ln_upper)
            .zip(&self.ln_lower)
            .map(|((f, u), l)| (f - u).max(l - f))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `ln F̄_k(s)` and `ln F̲_k(s)`.
pub fn quotient_envelopes(sp: &SpeciesSet, s: f64) -> (Vec<f64>, Vec<f64>) {
    let (m_min, m_max) = (sp.m_min(), sp.m_max());
    let ratio = m_max / m_min;
    let vmax = sp.vbar0().iter().copied().fold(0.0, f64::max);
    let vmin = sp.vbar0().iter().copied().fold(f64::INFINITY, f64::min);
    let ln_g1: Vec<f64> = sp.laws().iter().map(|l| l.ln_g1(s)).collect();
    let ln_g1_min = ln_g1.iter().copied().fold(f64::INFINITY, f64::min);
    let ln_g1_max = ln_g1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let le = ln_e(sp, s);
    let le_min = le.iter().copied().fold(f64::INFINITY, f64::min);
    let le_sum = logsumexp(le.iter().copied());
    let cu = m_max.ln() + vmax.ln() - m_min.ln() - ln_g1_min + ratio * (-le_min).max(0.0);
    let cl = m_min.ln() + vmin.ln() - m_max.ln() - ln_g1_max + ratio * (-le_sum).min(0.0);
    (
        le.iter().map(|e| cu + e).collect(),
        le.iter().map(|e| cl + e).collect(),
    )
}

pub fn quotients(sp: &SpeciesSet, s: f64, w: &NormalizedState) -> Result<Quotients> {
    let rho = forward_raw(sp, s, w.as_slice())?;
    let ln_f = rho
        .iter()
        .zip(w.as_slice())
        .map(|(x, wk)| x.ln() - wk.ln())
        .collect();
    let (ln_upper, ln_lower) = quotient_envelopes(sp, s);
    Ok(Quotients {
        ln_f,
        ln_upper,
        ln_lower,
    })
}

/// The same quotients written as functions of pressure and composition,
/// `F̂_i(s, x) = A · E_i(s) / (G · χ̂^{m_i})`, where `χ̂` solves
/// `Σ x_j χ^{m_j} / E_j = 1`, `A = Σ vbar0_l m_l x_l χ̂^{m_l} / E_l` and
/// `G = Σ g_l'(s) m_l x_l`. Returns logarithms; zero fractions are allowed.
pub fn ln_quotients_from_composition(sp: &SpeciesSet, s: f64, x: &[f64]) -> Result<Vec<f64>> {
    let m = sp.masses();
    let le = ln_e(sp, s);
    let ln_coef: Vec<f64> = x.iter().zip(&le).map(|(xi, e)| xi.ln() - e).collect();
    let t = chi_root_log(&ln_coef, m)?;
    let ln_a = logsumexp(
        sp.vbar0()
            .iter()
            .zip(m)
            .zip(&ln_coef)
            .map(|((v, mi), c)| v.ln() + mi.ln() + c + mi * t),
    );
    let ln_g = logsumexp(
        sp.laws()
            .iter()
            .zip(m)
            .zip(x)
            .map(|((l, mi), xi)| l.ln_g1(s) + mi.ln() + xi.ln()),
    );
    Ok(le
        .iter()
        .zip(m)
        .map(|(e, mi)| ln_a + e - ln_g - mi * t)
        .collect())
}

/// `μ^w = g(p0) + ln x̂(w) / m`: the chemical potentials of `w` itself.
pub fn reduced_potential(sp: &SpeciesSet, w: &NormalizedState) -> Vec<f64> {
    let m = sp.masses();
    let p0 = sp.p0();
    ln_number_fractions(m, w.as_slice())
        .iter()
        .zip(m)
        .zip(sp.laws())
        .map(|((x, mi), l)| l.g(p0) + x / mi)
        .collect()
}

/// `∂_s X = u(X) / (X · 1)` at a given density vector, with its pressure
/// obtained from the state equation.
pub fn chart_velocity(sp: &SpeciesSet, rho: &[f64]) -> Result<Vec<f64>> {
    let st = sp.state(rho)?;
    let u = st.kernel_direction();
    Ok(u.iter().map(|v| v / st.varrho).collect())
}

/// Upper bound for `|∂_s X(s, w)|` that does not depend on `w`.
pub fn s_derivative_envelope(sp: &SpeciesSet, s: f64) -> f64 {
    let g1 = sp.g1(s);
    let g2 = sp.g2(s);
    let g1_min = g1.iter().copied().fold(f64::INFINITY, f64::min);
    let g1_max = g1.iter().copied().fold(0.0, f64::max);
    let g2_max = g2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (sp.m_max() - sp.m_min()) * (1.0 + g1_max / g1_min) + g2_max / (g1_min * g1_min)
}

/// Spanning set of the tangent space of `S₀`:
/// `τ^i = e^i - ν_i ν` with `ν = vbar0 / |vbar0|`.
pub fn tangent_basis(sp: &SpeciesSet) -> Vec<Vec<f64>> {
    let v = sp.vbar0();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nu: Vec<f64> = v.iter().map(|a| a / norm).collect();
    (0..v.len())
        .map(|i| {
            (0..v.len())
                .map(|j| f64::from(u8::from(i == j)) - nu[i] * nu[j])
                .collect()
        })
        .collect()
}

/// The pressure `𝒫(ϱ, w)` at which the curve `s ↦ X(s, w)` reaches total
/// density `ϱ`. The total density is strictly increasing along the curve.
pub fn pressure_of_density(sp: &SpeciesSet, varrho: f64, w: &NormalizedState) -> Result<f64> {
    if !(varrho > 0.0 && varrho.is_finite()) {
        return Err(Error::NonpositiveDensity(varrho));
    }
    let ln_target = varrho.ln();
    let wsum: f64 = w.as_slice().iter().sum();
    let total = |t: f64| -> Result<(f64, f64)> {
        let s = t.exp();
        let rho = forward_raw(sp, s, w.as_slice())?;
        let tot: f64 = rho.iter().sum();
        let u = sp.state_at(&rho, s).kernel_direction();
        let du: f64 = u.iter().sum::<f64>() / tot;
        Ok((tot.ln() - ln_target, s * du / tot))
    };
    let start = (sp.p0() * varrho / wsum).ln();
    // The bracketing helper expects a decreasing function.
    let (lo, hi) = bracket_decreasing(|t| total(t).map(|v| -v.0).unwrap_or(f64::NAN), start, 1.0)?;
    let f = |t: f64| total(t).unwrap_or((f64::NAN, f64::NAN));
    let t = solve_bracketed(&RootProblem::new(f, lo, hi).tol(1e-13).guess(start))?;
    Ok(t.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_examples() {
        assert!((chi_root(&[1.0], &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((chi_root(&[4.0], &[2.0]).unwrap() - 0.5).abs() < 1e-14);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((chi_root(&[1.0, 1.0], &[1.0, 2.0]).unwrap() - golden).abs() < 1e-13);
        assert!(chi_root(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn chi_handles_extreme_coefficients() {
        for a in [[1e-200f64, 1e-250], [1e200, 1e150], [1e-300, 1e300]] {
            let t = chi_root_log(&[a[0].ln(), a[1].ln()], &[1.0, 3.0]).unwrap();
            let sum: f64 = a[0] * t.exp() + a[1] * (3.0 * t).exp();
            assert!((sum - 1.0).abs() < 1e-13, "{a:?}: {sum}");
        }
    }

    #[test]
    fn reference_surface_is_fixed() {
        let sp =
            SpeciesSet::log_mixture(&[1.0, 2.0, 4.0], &[1.0, 0.5, 2.0], &[0.1, 0.0, -0.2], 1.0)
                .unwrap();
        let w = NormalizedState::project(&sp, &[0.3, 0.7, 0.2]).unwrap();
        let x = forward_chart(&sp, 1.0, &w).unwrap();
        for (a, b) in x.iter().zip(w.as_slice()) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        let back = inverse_chart(&sp, w.as_slice()).unwrap();
        assert!((back.s - 1.0).abs() < 1e-14);
        let q = quotients(&sp, 1.0, &w).unwrap();
        assert!(q.f().iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pressure_of_density_examples() {
        let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[0.5, 0.5], &[0.0, 0.0], 2.0).unwrap();
        let w = NormalizedState::project(&sp, &[1.0, 3.0]).unwrap();
        let total: f64 = w.as_slice().iter().sum();
        assert!((pressure_of_density(&sp, total, &w).unwrap() - 2.0).abs() < 1e-12);
        // equal reference volumes: 𝒫 = p0 v̄ ϱ for every w
        assert!((pressure_of_density(&sp, 7.0, &w).unwrap() - 2.0 * 0.5 * 7.0).abs() < 1e-10);
        assert!(pressure_of_density(&sp, 0.0, &w).is_err());
    }

    #[test]
    fn normalized_state_rejects_off_surface_vectors() {
        let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(NormalizedState::new(&sp, vec![0.5, 0.6]).is_err());
        assert!(NormalizedState::new(&sp, vec![1.5, -0.5]).is_err());
        assert!(NormalizedState::new(&sp, vec![0.5, 0.5]).is_ok());
    }
}
