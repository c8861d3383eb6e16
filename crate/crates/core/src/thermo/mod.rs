//! Equilibrium thermodynamics of an ideal, isothermal mixture.
//!
//! Units are normalized so that `k_B θ = 1`. Each species `i` has an
//! elementary mass `m_i` and a Gibbs law `g_i(p)`. The pressure of a density
//! vector `ρ` is the unique root of `Σ g_i'(p) ρ_i = 1`, the chemical
//! potentials are `μ_i = g_i(p) + ln(x_i) / m_i` and the free energy density
//! is `h = ρ·μ - p`.
//!
//! ```
//! use msmix::thermo::SpeciesSet;
//!
//! let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 1.0], &[0.0, 0.0], 1.0)?;
//! let st = sp.state(&[0.5, 0.5])?;
//! assert!((st.p - 1.0).abs() < 1e-14);
//! let mu = st.chem_potentials();
//! assert!((mu[0] - (2.0f64 / 3.0).ln()).abs() < 1e-14);
//! # Ok::<(), msmix::Error>(())
//! ```

mod law;

pub use law::{BlendedLaw, GibbsLaw, LogLaw, LogRegime};

use crate::error::{Error, Result, StateProblem};
use crate::numerics::{
    bracket_decreasing, logsumexp, norm_inf, solve_bracketed, RootMethod, RootProblem, SmallMatrix,
};

/// Immutable description of the species in a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSet {
    m: Vec<f64>,
    laws: Vec<GibbsLaw>,
    p0: f64,
    vbar0: Vec<f64>,
}

impl SpeciesSet {
    /// # Errors
    ///
    /// Fails if the lists are empty or of different lengths, a mass is not
    /// positive, or the laws disagree on the reference pressure.
    pub fn new(m: Vec<f64>, laws: Vec<GibbsLaw>) -> Result<Self> {
        if m.is_empty() || m.len() != laws.len() {
            return Err(Error::InvalidSpecies(format!(
                "need one law per mass ({} masses, {} laws)",
                m.len(),
                laws.len()
            )));
        }
        if m.len() > crate::numerics::MAX_DIM {
            return Err(Error::InvalidSpecies(format!(
                "at most {} species",
                crate::numerics::MAX_DIM
            )));
        }
        if let Some(bad) = m.iter().find(|&&mi| !(mi > 0.0 && mi.is_finite())) {
            return Err(Error::InvalidSpecies(format!(
                "masses must be positive, got {bad}"
            )));
        }
        let p0 = laws[0].p0();
        if laws.iter().any(|l| (l.p0() - p0).abs() > 1e-15 * p0) {
            return Err(Error::InvalidSpecies(
                "all laws must share one reference pressure".into(),
            ));
        }
        let vbar0 = laws.iter().map(GibbsLaw::vbar0).collect();
        Ok(SpeciesSet { m, laws, p0, vbar0 })
    }

    /// All species logarithmic: `g_i = g0_i + p0 vbar0_i ln(p/p0)`.
    pub fn log_mixture(m: &[f64], vbar0: &[f64], g0: &[f64], p0: f64) -> Result<Self> {
        if vbar0.len() != m.len() || g0.len() != m.len() {
            return Err(Error::InvalidSpecies(
                "masses, vbar0 and g0 differ in length".into(),
            ));
        }
        let laws = vbar0
            .iter()
            .zip(g0)
            .map(|(&v, &g)| GibbsLaw::log(g, v, p0))
            .collect::<Result<_>>()?;
        Self::new(m.to_vec(), laws)
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.m
    }

    pub fn laws(&self) -> &[GibbsLaw] {
        &self.laws
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    /// `g_i'(p0)` for every species: the normal vector of the reference surface.
    pub fn vbar0(&self) -> &[f64] {
        &self.vbar0
    }

    pub fn m_min(&self) -> f64 {
        self.m.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn m_max(&self) -> f64 {
        self.m.iter().copied().fold(0.0, f64::max)
    }

    pub fn g(&self, p: f64) -> Vec<f64> {
        self.laws.iter().map(|l| l.g(p)).collect()
    }

    pub fn g1(&self, p: f64) -> Vec<f64> {
        self.laws.iter().map(|l| l.g1(p)).collect()
    }

    pub fn g2(&self, p: f64) -> Vec<f64> {
        self.laws.iter().map(|l| l.g2(p)).collect()
    }

    /// Exponent in the high-pressure growth of the free energy, `β = min α_i`,
    /// or `None` if some law has no power regime.
    pub fn beta(&self) -> Option<f64> {
        self.laws
            .iter()
            .map(|l| l.power_regime().map(|(_, a)| a))
            .try_fold(f64::INFINITY, |acc, a| a.map(|a| acc.min(a)))
    }

    /// Rejects vectors with a non-finite or non-positive entry.
    pub fn check_interior(&self, rho: &[f64]) -> Result<()> {
        assert_eq!(rho.len(), self.len(), "density vector has the wrong length");
        match rho.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            Some(index) => Err(Error::NotInterior(StateProblem {
                index,
                value: rho[index],
            })),
            None => Ok(()),
        }
    }

    /// Solves `Σ g_i'(p) ρ_i = 1`. The Newton path works on `ln V` as a
    /// function of `ln p`, for which the logarithmic law is linear.
    pub fn pressure_with(&self, rho: &[f64], method: RootMethod) -> Result<f64> {
        self.check_interior(rho)?;
        let phi = |t: f64| -> (f64, f64) {
            let p = t.exp();
            let (mut v, mut vp) = (0.0, 0.0);
            for (law, &r) in self.laws.iter().zip(rho) {
                let (g1, g2) = law.g1_g2(p);
                v += g1 * r;
                vp += g2 * r;
            }
            (v.ln(), p * vp / v)
        };
        // Exact for purely logarithmic mixtures, a decent start otherwise.
        let guess: f64 = self
            .vbar0
            .iter()
            .zip(rho)
            .map(|(v, r)| self.p0 * v * r)
            .sum::<f64>()
            .ln();
        // Residual in ln V; the slope d ln V / d ln p can be as small as
        // 1 - 1/α, so this keeps the relative pressure error near 1e-14.
        let tol = 2e-15;
        if method == RootMethod::Newton {
            // Near the log regime a few Newton corrections converge; fall
            // back to the bracketed solver otherwise.
            let mut t = guess;
            for _ in 0..4 {
                let (f, df) = phi(t);
                if f.abs() <= tol {
                    return Ok(t.exp());
                }
                t -= f / df;
            }
        }
        let (lo, hi) = bracket_decreasing(|t| phi(t).0, guess, 1.0)?;
        let problem = RootProblem::new(phi, lo, hi)
            .tol(tol)
            .method(method)
            .guess(guess);
        Ok(solve_bracketed(&problem)?.exp())
    }

    pub fn pressure(&self, rho: &[f64]) -> Result<f64> {
        self.pressure_with(rho, RootMethod::Newton)
    }

    /// Evaluates everything that depends on the pressure of `rho`.
    pub fn state(&self, rho: &[f64]) -> Result<ThermoState<'_>> {
        let p = self.pressure(rho)?;
        Ok(self.state_at(rho, p))
    }

    /// Like [`state`](Self::state) but with a pressure already known to
    /// solve the state equation for `rho`.
    pub fn state_at(&self, rho: &[f64], p: f64) -> ThermoState<'_> {
        let varrho: f64 = rho.iter().sum();
        let n: f64 = rho.iter().zip(&self.m).map(|(r, m)| r / m).sum();
        let y = rho.iter().map(|r| r / varrho).collect();
        let x = rho.iter().zip(&self.m).map(|(r, m)| r / (m * n)).collect();
        let mut g1 = Vec::with_capacity(self.len());
        let mut g2 = Vec::with_capacity(self.len());
        for law in &self.laws {
            let (a, b) = law.g1_g2(p);
            g1.push(a);
            g2.push(b);
        }
        ThermoState {
            sp: self,
            rho: rho.to_vec(),
            p,
            varrho,
            n,
            y,
            x,
            g1,
            g2,
        }
    }

    /// Inverse of `ρ ↦ ∇h(ρ)`: the density vector whose chemical potentials
    /// are `mu`.
    ///
    /// A scalar equation in the pressure gives a starting point, which a
    /// damped Newton iteration with the closed-form Hessian inverse then
    /// polishes until `‖∇h(ρ) - μ‖∞ <= 1e-9` (scaled by `1 + ‖μ‖∞`).
    pub fn dual_state(&self, mu: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(mu.len(), self.len());
        // Σ_i exp(m_i (μ_i - g_i(p))) = 1 determines p; the summands are the
        // number fractions of the dual state.
        let lse = |t: f64| {
            let p = t.exp();
            logsumexp(
                self.m
                    .iter()
                    .zip(mu)
                    .zip(&self.laws)
                    .map(|((m, mu), l)| m * (mu - l.g(p))),
            )
        };
        let psi = |t: f64| -> (f64, f64) {
            let p = t.exp();
            let e: Vec<f64> = self
                .m
                .iter()
                .zip(mu)
                .zip(&self.laws)
                .map(|((m, mu), l)| m * (mu - l.g(p)))
                .collect();
            let l = logsumexp(e.iter().copied());
            let slope: f64 = e
                .iter()
                .zip(&self.m)
                .zip(&self.laws)
                .map(|((ei, m), law)| -(ei - l).exp() * m * law.g1(p) * p)
                .sum();
            (l, slope)
        };
        let start = self.p0.ln();
        let (lo, hi) = bracket_decreasing(lse, start, 1.0)?;
        let t = solve_bracketed(&RootProblem::new(psi, lo, hi).tol(1e-14))?;
        let p = t.exp();
        let x: Vec<f64> = self
            .m
            .iter()
            .zip(mu)
            .zip(&self.laws)
            .map(|((m, mu), l)| (m * (mu - l.g(p))).exp())
            .collect();
        let denom: f64 = self
            .laws
            .iter()
            .zip(&self.m)
            .zip(&x)
            .map(|((l, m), xi)| l.g1(p) * m * xi)
            .sum();
        let n = 1.0 / denom;
        let mut rho: Vec<f64> = self
            .m
            .iter()
            .zip(&x)
            .map(|(m, xi)| (m * n * xi).max(1e-300))
            .collect();

        let tol = 1e-9 * (1.0 + norm_inf(mu));
        let residual = |rho: &[f64]| -> Result<Vec<f64>> {
            let st = self.state(rho)?;
            Ok(st
                .chem_potentials()
                .iter()
                .zip(mu)
                .map(|(a, b)| a - b)
                .collect())
        };
        let mut r = residual(&rho)?;
        let mut merit: f64 = r.iter().map(|v| v * v).sum();
        for _ in 0..100 {
            if norm_inf(&r) <= tol {
                return Ok(rho);
            }
            let hinv = self.state(&rho)?.hessian_inverse();
            let delta = hinv.matvec(&r);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = rho
                    .iter()
                    .zip(&delta)
                    .map(|(r, d)| (r - lambda * d).max(1e-300))
                    .collect();
                if let Ok(rt) = residual(&trial) {
                    let mt: f64 = rt.iter().map(|v| v * v).sum();
                    if mt < merit {
                        rho = trial;
                        r = rt;
                        merit = mt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm_inf(&r) <= tol {
            Ok(rho)
        } else {
            Err(Error::NoConvergence {
                what: "dual state",
                iterations: 100,
                residual: norm_inf(&r),
            })
        }
    }
}

/// A density vector together with its pressure and the derived quantities
/// every state function needs.
#[derive(Debug, Clone)]
pub struct ThermoState<'a> {
    sp: &'a SpeciesSet,
    pub rho: Vec<f64>,
    /// Pressure `p̂(ρ)`.
    pub p: f64,
    /// Total density `ϱ = Σ ρ_i`.
    pub varrho: f64,
    /// Number density `n = Σ ρ_i / m_i`.
    pub n: f64,
    /// Mass fractions.
    pub y: Vec<f64>,
    /// Number fractions.
    pub x: Vec<f64>,
    /// `g_i'(p)`.
    pub g1: Vec<f64>,
    /// `g_i''(p)`.
    pub g2: Vec<f64>,
}

impl<'a> ThermoState<'a> {
    pub fn species(&self) -> &'a SpeciesSet {
        self.sp
    }

    /// `∂V/∂p = Σ g_k''(p) ρ_k`, always negative.
    pub fn v_p(&self) -> f64 {
        self.g2.iter().zip(&self.rho).map(|(a, b)| a * b).sum()
    }

    pub fn chem_potentials(&self) -> Vec<f64> {
        self.sp
            .laws
            .iter()
            .zip(&self.sp.m)
            .zip(&self.x)
            .map(|((law, m), x)| law.g(self.p) + x.ln() / m)
            .collect()
    }

    pub fn free_energy(&self) -> f64 {
        let mu = self.chem_potentials();
        self.rho.iter().zip(&mu).map(|(r, m)| r * m).sum::<f64>() - self.p
    }

    /// `∂p̂/∂ρ_j = -g_j'(p) / Σ_k g_k''(p) ρ_k`.
    pub fn pressure_gradient(&self) -> Vec<f64> {
        let vp = self.v_p();
        self.g1.iter().map(|g| -g / vp).collect()
    }

    /// Squared sound speed `Σ_i y_i ∂p̂/∂ρ_i`.
    pub fn sound_speed_sq(&self) -> f64 {
        let vp = self.v_p();
        -self.g1.iter().zip(&self.y).map(|(g, y)| g * y).sum::<f64>() / vp
    }

    pub fn hessian(&self) -> SmallMatrix {
        let m = &self.sp.m;
        let vp = self.v_p();
        SmallMatrix::from_fn(self.rho.len(), |i, j| {
            let delta = if i == j { 1.0 / self.x[i] } else { 0.0 };
            (delta - 1.0) / (m[i] * m[j] * self.n) - self.g1[i] * self.g1[j] / vp
        })
    }

    /// Closed-form inverse of [`hessian`](Self::hessian).
    pub fn hessian_inverse(&self) -> SmallMatrix {
        let (m, rho, v) = (&self.sp.m, &self.rho, &self.g1);
        let lambda: f64 = (0..rho.len())
            .map(|k| v[k] * v[k] * rho[k] * m[k])
            .sum::<f64>()
            - self.v_p();
        SmallMatrix::from_fn(rho.len(), |i, j| {
            let diag = if i == j { m[i] * rho[i] } else { 0.0 };
            diag - (m[i] * rho[i] * v[i] * rho[j] + m[j] * rho[j] * v[j] * rho[i])
                + lambda * rho[i] * rho[j]
        })
    }

    /// The solution `u` of `D²h(ρ) u = 1`, i.e. the direction in which all
    /// chemical potentials grow at the same rate.
    pub fn kernel_direction(&self) -> Vec<f64> {
        let (m, rho, v) = (&self.sp.m, &self.rho, &self.g1);
        let vr = self.varrho;
        let a: f64 = (0..rho.len())
            .map(|j| v[j] * (vr * v[j] - 1.0) * rho[j] * m[j])
            .sum::<f64>()
            - vr * self.v_p();
        (0..rho.len())
            .map(|i| rho[i] * (m[i] * (1.0 - vr * v[i]) + a))
            .collect()
    }
}

/// Mass fractions, number fractions, number density and total density.
#[derive(Debug, Clone, PartialEq)]
pub struct Fractions {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub n: f64,
    pub varrho: f64,
}

/// Fractions of a possibly non-interior state (zero entries allowed).
pub fn fractions(sp: &SpeciesSet, rho: &[f64]) -> Result<Fractions> {
    assert_eq!(rho.len(), sp.len());
    let varrho: f64 = rho.iter().sum();
    if !(varrho > 0.0) {
        return Err(Error::ZeroTotalDensity);
    }
    let n: f64 = rho.iter().zip(sp.masses()).map(|(r, m)| r / m).sum();
    Ok(Fractions {
        y: rho.iter().map(|r| r / varrho).collect(),
        x: rho
            .iter()
            .zip(sp.masses())
            .map(|(r, m)| r / (m * n))
            .collect(),
        n,
        varrho,
    })
}

pub fn pressure(sp: &SpeciesSet, rho: &[f64]) -> Result<f64> {
    sp.pressure(rho)
}

pub fn pressure_gradient(sp: &SpeciesSet, rho: &[f64]) -> Result<Vec<f64>> {
    Ok(sp.state(rho)?.pressure_gradient())
}

pub fn chem_potentials(sp: &SpeciesSet, rho: &[f64]) -> Result<Vec<f64>> {
    Ok(sp.state(rho)?.chem_potentials())
}

pub fn free_energy(sp: &SpeciesSet, rho: &[f64]) -> Result<f64> {
    Ok(sp.state(rho)?.free_energy())
}

pub fn hessian(sp: &SpeciesSet, rho: &[f64]) -> Result<SmallMatrix> {
    Ok(sp.state(rho)?.hessian())
}

pub fn hessian_inverse(sp: &SpeciesSet, rho: &[f64]) -> Result<SmallMatrix> {
    Ok(sp.state(rho)?.hessian_inverse())
}

pub fn kernel_direction(sp: &SpeciesSet, rho: &[f64]) -> Result<Vec<f64>> {
    Ok(sp.state(rho)?.kernel_direction())
}

pub fn dual_state(sp: &SpeciesSet, mu: &[f64]) -> Result<Vec<f64>> {
    sp.dual_state(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> SpeciesSet {
        SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn fraction_examples() {
        let sp = SpeciesSet::log_mixture(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        let f = fractions(&sp, &[0.5, 0.5]).unwrap();
        assert_eq!(
            (f.y.clone(), f.x.clone(), f.n),
            (vec![0.5, 0.5], vec![0.5, 0.5], 1.0)
        );
        let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        let f = fractions(&sp, &[0.5, 0.5]).unwrap();
        assert_eq!(f.n, 0.75);
        assert!((f.x[0] - 2.0 / 3.0).abs() < 1e-15 && (f.x[1] - 1.0 / 3.0).abs() < 1e-15);
        let f = fractions(&sp, &[1.0, 0.0]).unwrap();
        assert_eq!((f.y, f.x), (vec![1.0, 0.0], vec![1.0, 0.0]));
        assert_eq!(fractions(&sp, &[0.0, 0.0]), Err(Error::ZeroTotalDensity));
    }

    #[test]
    fn pressure_examples() {
        let sp = binary();
        assert!((sp.pressure(&[0.5, 0.25]).unwrap() - 1.0).abs() < 1e-14);
        assert!((sp.pressure(&[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-14);
        assert!(matches!(
            sp.pressure(&[1.0, -1.0]),
            Err(Error::NotInterior(_))
        ));
    }

    #[test]
    fn pressure_gradient_of_log_mixture_is_constant() {
        let sp = binary();
        for rho in [[0.1, 3.0], [2.0, 0.01]] {
            let g = pressure_gradient(&sp, &rho).unwrap();
            assert!((g[0] - 1.0).abs() < 1e-14 && (g[1] - 2.0).abs() < 1e-14);
        }
        let single = SpeciesSet::log_mixture(&[1.0], &[1.0], &[0.0], 1.0).unwrap();
        assert!((pressure_gradient(&single, &[0.3]).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chemical_potential_examples() {
        let sp = SpeciesSet::log_mixture(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        let mu = chem_potentials(&sp, &[0.5, 0.5]).unwrap();
        assert!(
            (mu[0] + std::f64::consts::LN_2).abs() < 1e-7
                && (mu[1] + std::f64::consts::LN_2).abs() < 1e-7
        );
        let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        let mu = chem_potentials(&sp, &[0.5, 0.5]).unwrap();
        assert!((mu[0] + 0.405_465_1).abs() < 1e-7 && (mu[1] + 0.549_306_1).abs() < 1e-7);
    }

    #[test]
    fn single_species_reductions() {
        let sp = SpeciesSet::log_mixture(&[1.5], &[0.8], &[0.2], 1.0).unwrap();
        let rho = [0.7];
        let st = sp.state(&rho).unwrap();
        let g = sp.laws()[0].g(st.p);
        assert!((st.free_energy() - (0.7 * g - st.p)).abs() < 1e-14);
        let expected = -st.g2[0] * 0.7f64.powi(3);
        assert!((st.kernel_direction()[0] - expected).abs() < 1e-14);
        assert!((st.hessian_inverse()[(0, 0)] - expected).abs() < 1e-14);
        assert!((st.hessian()[(0, 0)] * expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dual_state_of_symmetric_potentials_is_symmetric() {
        let sp = SpeciesSet::log_mixture(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap();
        let rho = sp.dual_state(&[-0.3, -0.3]).unwrap();
        assert!((rho[0] - rho[1]).abs() < 1e-12 * rho[0]);
    }

    #[test]
    fn beta_is_the_smallest_exponent() {
        let laws = vec![
            GibbsLaw::blended(1.3, 10.0, 100.0, 1.0, 1.0).unwrap(),
            GibbsLaw::blended(1.2, 10.0, 100.0, 1.0, 1.0).unwrap(),
        ];
        assert_eq!(
            SpeciesSet::new(vec![1.0, 1.0], laws).unwrap().beta(),
            Some(1.2)
        );
        assert_eq!(binary().beta(), None);
    }
}
