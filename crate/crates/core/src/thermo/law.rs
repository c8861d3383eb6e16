use crate::error::{Error, Result};
use crate::numerics::integrate;

/// Pressure dependence of one constituent's Gibbs energy, `g(p)`.
///
/// Every law satisfies `g' > 0` and `g'' < 0` on `(0, ∞)`, behaves like a
/// logarithm as `p → 0` and is normalized so that `g'(p0) = vbar0`.
#[derive(Debug, Clone, PartialEq)]
pub enum GibbsLaw {
    Log(LogLaw),
    Blended(BlendedLaw),
}

/// `g(p) = g0 + p0 · vbar0 · ln(p / p0)`: the ideal-gas law at all pressures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLaw {
    pub g0: f64,
    pub vbar0: f64,
    pub p0: f64,
}

/// A law that is logarithmic below `m0` and a power `~ p^{1/alpha}` above `m1`.
///
/// The derivative is written `g'(p) = exp(ℓ(ln p))`. The exponent `ℓ` has
/// slope `-1` left of `ln m0`, slope `1/alpha - 1` right of `ln m1`, and is a
/// cubic Hermite interpolant in between. The interpolant's endpoint values
/// are chosen so that its secant slope is the mean of the two end slopes;
/// that keeps it monotone (the cubic coefficient vanishes and `ℓ'`
/// interpolates linearly between the two negative end slopes), hence
/// `g'' < 0` everywhere.
///
/// `g` itself is anchored in the power regime, `g(p) = alpha · p · g'(p)` for
/// `p >= m1`, and continued downwards by integrating `g'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedLaw {
    alpha: f64,
    m0: f64,
    m1: f64,
    p0: f64,
    vbar0: f64,
    // Hermite data for ℓ on [t0, t1].
    t0: f64,
    t1: f64,
    ell0: f64,
    ell1: f64,
    d0: f64,
    d1: f64,
    g_m0: f64,
    g_m1: f64,
}

impl LogLaw {
    pub fn new(g0: f64, vbar0: f64, p0: f64) -> Result<Self> {
        if !(vbar0 > 0.0 && vbar0.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "vbar0 must be positive, got {vbar0}"
            )));
        }
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "p0 must be positive, got {p0}"
            )));
        }
        if !g0.is_finite() {
            return Err(Error::InvalidSpecies(format!(
                "g0 must be finite, got {g0}"
            )));
        }
        Ok(LogLaw { g0, vbar0, p0 })
    }

    /// The constant `c̄ = p · g'(p)`.
    pub fn cbar(&self) -> f64 {
        self.p0 * self.vbar0
    }
}

impl BlendedLaw {
    /// # Errors
    ///
    /// Rejects `alpha <= 1`, non-positive thresholds, `m0 >= m1` and
    /// non-positive `vbar0` or `p0`.
    pub fn new(alpha: f64, m0: f64, m1: f64, vbar0: f64, p0: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "alpha must exceed 1, got {alpha}"
            )));
        }
        if !(m0 > 0.0 && m1 > m0 && m1.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "regime thresholds must satisfy 0 < m0 < m1, got m0 = {m0}, m1 = {m1}"
            )));
        }
        if !(vbar0 > 0.0 && vbar0.is_finite() && p0 > 0.0 && p0.is_finite()) {
            return Err(Error::InvalidSpecies(format!(
                "vbar0 and p0 must be positive, got {vbar0} and {p0}"
            )));
        }
        let (t0, t1) = (m0.ln(), m1.ln());
        let (d0, d1) = (-1.0, 1.0 / alpha - 1.0);
        let mut law = BlendedLaw {
            alpha,
            m0,
            m1,
            p0,
            vbar0,
            t0,
            t1,
            ell0: 0.0,
            ell1: 0.5 * (t1 - t0) * (d0 + d1),
            d0,
            d1,
            g_m0: 0.0,
            g_m1: 0.0,
        };
        let shift = vbar0.ln() - law.ell(p0.ln()).0;
        law.ell0 += shift;
        law.ell1 += shift;
        law.g_m1 = alpha * m1 * law.g1(m1);
        law.g_m0 = law.g_m1 - law.integral_g1(t0);
        Ok(law)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.m0, self.m1)
    }

    /// `ℓ(t)` and `ℓ'(t)`.
    fn ell(&self, t: f64) -> (f64, f64) {
        if t <= self.t0 {
            (self.ell0 + self.d0 * (t - self.t0), self.d0)
        } else if t >= self.t1 {
            (self.ell1 + self.d1 * (t - self.t1), self.d1)
        } else {
            let h = self.t1 - self.t0;
            let s = (t - self.t0) / h;
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let value = h00 * self.ell0 + h10 * h * self.d0 + h01 * self.ell1 + h11 * h * self.d1;
            let dh00 = 6.0 * s2 - 6.0 * s;
            let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
            let dh01 = -6.0 * s2 + 6.0 * s;
            let dh11 = 3.0 * s2 - 2.0 * s;
            let slope = (dh00 * self.ell0 + dh01 * self.ell1) / h + dh10 * self.d0 + dh11 * self.d1;
            (value, slope)
        }
    }

    fn g1(&self, p: f64) -> f64 {
        self.ell(p.ln()).0.exp()
    }

    /// `∫_{t}^{t1} g'(e^τ) e^τ dτ = ∫_{e^t}^{m1} g'(q) dq` for `t` in the blend region.
    fn integral_g1(&self, t: f64) -> f64 {
        integrate(|tau| (self.ell(tau).0 + tau).exp(), t, self.t1, 1e-14)
    }

    fn g(&self, p: f64) -> f64 {
        let t = p.ln();
        if p >= self.m1 {
            self.alpha * p * self.g1(p)
        } else if p > self.m0 {
            self.g_m1 - self.integral_g1(t)
        } else {
            // c̄ ln(p/m0) with c̄ = m0 g'(m0)
            self.g_m0 + (self.ell0 + self.t0).exp() * (t - self.t0)
        }
    }
}

impl GibbsLaw {
    pub fn log(g0: f64, vbar0: f64, p0: f64) -> Result<Self> {
        LogLaw::new(g0, vbar0, p0).map(GibbsLaw::Log)
    }

    pub fn blended(alpha: f64, m0: f64, m1: f64, vbar0: f64, p0: f64) -> Result<Self> {
        BlendedLaw::new(alpha, m0, m1, vbar0, p0).map(GibbsLaw::Blended)
    }

    pub fn p0(&self) -> f64 {
        match self {
            GibbsLaw::Log(l) => l.p0,
            GibbsLaw::Blended(b) => b.p0,
        }
    }

    /// `g'(p0)`, the reference specific volume.
    pub fn vbar0(&self) -> f64 {
        match self {
            GibbsLaw::Log(l) => l.vbar0,
            GibbsLaw::Blended(b) => b.vbar0,
        }
    }

    pub fn g(&self, p: f64) -> f64 {
        match self {
            GibbsLaw::Log(l) => l.g0 + l.cbar() * (p / l.p0).ln(),
            GibbsLaw::Blended(b) => b.g(p),
        }
    }

    pub fn g1(&self, p: f64) -> f64 {
        match self {
            GibbsLaw::Log(l) => l.cbar() / p,
            GibbsLaw::Blended(b) => b.g1(p),
        }
    }

    pub fn g2(&self, p: f64) -> f64 {
        match self {
            GibbsLaw::Log(l) => -l.cbar() / (p * p),
            GibbsLaw::Blended(b) => {
                let (ell, slope) = b.ell(p.ln());
                ell.exp() * slope / p
            }
        }
    }

    /// `(g', g'')` in one evaluation.
    pub fn g1_g2(&self, p: f64) -> (f64, f64) {
        match self {
            GibbsLaw::Log(l) => {
                let c = l.cbar() / p;
                (c, -c / p)
            }
            GibbsLaw::Blended(b) => {
                let (ell, slope) = b.ell(p.ln());
                let g1 = ell.exp();
                (g1, g1 * slope / p)
            }
        }
    }

    /// `ln g'(p)`, finite even where `g'` itself would under- or overflow.
    pub fn ln_g1(&self, p: f64) -> f64 {
        match self {
            GibbsLaw::Log(l) => l.cbar().ln() - p.ln(),
            GibbsLaw::Blended(b) => b.ell(p.ln()).0,
        }
    }

    /// Pressure below which `p g'(p)` is confined to `[c1, c2]`, together
    /// with those constants.
    pub fn log_regime(&self) -> LogRegime {
        match self {
            GibbsLaw::Log(l) => LogRegime {
                upper: f64::INFINITY,
                c1: l.cbar(),
                c2: l.cbar(),
            },
            GibbsLaw::Blended(b) => {
                let c = (b.ell0 + b.t0).exp();
                LogRegime {
                    upper: b.m0,
                    c1: c,
                    c2: c,
                }
            }
        }
    }

    /// Power-regime data `(m1, alpha)` for blended laws.
    pub fn power_regime(&self) -> Option<(f64, f64)> {
        match self {
            GibbsLaw::Log(_) => None,
            GibbsLaw::Blended(b) => Some((b.m1, b.alpha)),
        }
    }
}

/// Constants of the low-pressure logarithmic regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegime {
    pub upper: f64,
    pub c1: f64,
    pub c2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> impl Iterator<Item = f64> {
        (0..=480).map(|k| 10f64.powf(-8.0 + k as f64 / 30.0))
    }

    #[test]
    fn log_law_is_normalized() {
        let law = GibbsLaw::log(0.3, 2.0, 1.5).unwrap();
        assert_eq!(law.g(1.5), 0.3);
        assert!((law.g1(1.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn blended_law_is_normalized_and_monotone() {
        let law = GibbsLaw::blended(1.4, 10.0, 1e3, 0.7, 1.0).unwrap();
        assert!((law.g1(1.0) - 0.7).abs() < 1e-14);
        for p in grid() {
            let (g1, g2) = law.g1_g2(p);
            assert!(g1 > 0.0 && g2 < 0.0, "p = {p}");
        }
    }

    #[test]
    fn blended_law_satisfies_both_regimes() {
        let law = GibbsLaw::blended(1.3, 10.0, 1e3, 0.7, 1.0).unwrap();
        let lr = law.log_regime();
        let (m1, alpha) = law.power_regime().unwrap();
        for p in grid() {
            if p <= lr.upper {
                let pg = p * law.g1(p);
                assert!((pg - lr.c1).abs() <= 1e-12 * lr.c1);
            }
            if p >= m1 {
                let pg = p * law.g1(p);
                assert!((law.g(p) - alpha * pg).abs() <= 1e-12 * law.g(p));
            }
        }
    }

    #[test]
    fn blended_g_is_an_antiderivative() {
        let law = GibbsLaw::blended(1.45, 10.0, 1e3, 0.7, 1.0).unwrap();
        for p in [
            0.5, 9.0, 10.0, 11.0, 50.0, 300.0, 999.0, 1000.0, 1001.0, 5e4,
        ] {
            let h = 1e-5 * p;
            let fd = (law.g(p + h) - law.g(p - h)) / (2.0 * h);
            assert!(
                (fd - law.g1(p)).abs() < 1e-7 * law.g1(p),
                "p = {p}: {fd} vs {}",
                law.g1(p)
            );
            let fd2 = (law.g1(p + h) - law.g1(p - h)) / (2.0 * h);
            // g'' has a kink at the thresholds, so allow the O(h) error there.
            assert!(
                (fd2 - law.g2(p)).abs() < 1e-5 * law.g2(p).abs(),
                "p = {p}: {fd2} vs {}",
                law.g2(p)
            );
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(GibbsLaw::blended(1.0, 10.0, 1e3, 0.7, 1.0).is_err());
        assert!(GibbsLaw::blended(1.4, 1e3, 10.0, 0.7, 1.0).is_err());
        assert!(GibbsLaw::log(0.0, -1.0, 1.0).is_err());
    }
}
