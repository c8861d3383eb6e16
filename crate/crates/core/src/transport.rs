//! Maxwell-Stefan diffusion: friction laws, the singular system matrix and
//! its Drazin inverse, fluxes, the Onsager matrix and certificates for the
//! robust low-pressure bounds.
//!
//! The diffusion fluxes `J` solve `B(ρ) J = -d`, where
//! `b_ik = -f_ik y_i` (`i ≠ k`), `b_ii = Σ_{j≠i} f_ij y_j`, and
//! `d_i = ρ_i Σ_k (δ_ik - y_k)(∇μ_k - b_k)`. `B` has left kernel `1` and right
//! kernel `y`, so the system is solved through the bordered matrix
//! `B_α = B + α y ⊗ 1`, whose inverse is `B^D + α⁻¹ y ⊗ 1`.
//!
//! ```
//! use msmix::numerics::SmallMatrix;
//! use msmix::transport::solve_flux;
//!
//! let b = SmallMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
//! let d = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]];
//! let j = solve_flux(&b, &d, &[0.5, 0.5])?;
//! assert!((j[0][0] + 0.5).abs() < 1e-12 && (j[1][0] - 0.5).abs() < 1e-12);
//! # Ok::<(), msmix::Error>(())
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{
    chi_root_log, inverse_chart_at, ln_e, ln_quotients_from_composition, quotient_envelopes,
};
use crate::error::{Error, Result};
use crate::numerics::{logsumexp, min_symmetric_eigenvalue, Lu, SmallMatrix};
use crate::thermo::{SpeciesSet, ThermoState};

/// Three spatial components per species.
pub type Vec3 = [f64; 3];

/// The singular friction factors `σ_ik(p, x)`.
///
/// With `E_k = exp(m_k (g_k(p0) - g_k(p)))` and `χ̂` the root of
/// `Σ x_j χ^{m_j} / E_j = 1`,
/// `σ_ik = σ₀ E_i E_k / χ̂^{m_i + m_k}` where
/// `σ₀ = (Σ m x / Σ g'(p) m x) · (Σ vbar0 m x χ̂^m / E) / (Σ m x E χ̂^{-m})`.
/// At `p = p0` every entry is 1. Zero fractions are allowed.
pub fn sigma(sp: &SpeciesSet, p: f64, x: &[f64]) -> Result<SmallMatrix> {
    let ln_s = ln_sigma(sp, p, x)?;
    Ok(SmallMatrix::from_fn(sp.len(), |i, k| ln_s[(i, k)].exp()))
}

/// Entry-wise logarithm of [`sigma`].
pub fn ln_sigma(sp: &SpeciesSet, p: f64, x: &[f64]) -> Result<SmallMatrix> {
    assert_eq!(x.len(), sp.len());
    let m = sp.masses();
    let le = ln_e(sp, p);
    let ln_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ln_coef: Vec<f64> = ln_x.iter().zip(&le).map(|(lx, e)| lx - e).collect();
    let t = chi_root_log(&ln_coef, m)?;
    let lmx = |i: usize| m[i].ln() + ln_x[i];
    let n = sp.len();
    let ln_sigma0 = logsumexp((0..n).map(lmx))
        - logsumexp((0..n).map(|i| sp.laws()[i].ln_g1(p) + lmx(i)))
        + logsumexp((0..n).map(|i| sp.vbar0()[i].ln() + lmx(i) + m[i] * t - le[i]))
        - logsumexp((0..n).map(|i| lmx(i) + le[i] - m[i] * t));
    Ok(SmallMatrix::from_fn(n, |i, k| {
        ln_sigma0 + le[i] + le[k] - (m[i] + m[k]) * t
    }))
}

/// The same factors from the chart quotients, `σ_ik = F̂_i F̂_k / (F̂ · y)`.
pub fn sigma_from_quotients(sp: &SpeciesSet, p: f64, x: &[f64]) -> Result<SmallMatrix> {
    let lf = ln_quotients_from_composition(sp, p, x)?;
    let m = sp.masses();
    let ln_mx = logsumexp(x.iter().zip(m).map(|(xi, mi)| xi.ln() + mi.ln()));
    let ln_fy = logsumexp(
        lf.iter()
            .zip(x)
            .zip(m)
            .map(|((f, xi), mi)| f + xi.ln() + mi.ln()),
    ) - ln_mx;
    Ok(SmallMatrix::from_fn(sp.len(), |i, k| {
        (lf[i] + lf[k] - ln_fy).exp()
    }))
}

/// How the friction coefficients depend on pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrictionKind {
    /// `f_c [ψ σ + 1 - ψ]`: singular at low pressure, constant above `p1`.
    #[default]
    Singular,
    /// `f_c` at every pressure. Violates the low-pressure structure on
    /// purpose; used as a falsification control.
    Constant,
}

/// Bounds implied by a friction model.
///
/// For `p < p1`: `f0 σ_ik <= f_ik <= f1 σ_ik`. For `p > p1`:
/// `f2 <= f_ik <= f3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionConstants {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Relative safety margin applied to the sampled `f0` and `f1`.
pub const SAMPLING_MARGIN: f64 = 0.02;

/// Pairwise friction coefficients of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionModel {
    sp: SpeciesSet,
    f_c: f64,
    p1: f64,
    switch_width: f64,
    kind: FrictionKind,
    constants: FrictionConstants,
}

impl FrictionModel {
    /// Builds the model and computes its bound constants.
    ///
    /// `f0` and `f1` are the extremes of `f_ik / σ_ik` over the switching
    /// band `[(1 - switch_width) p1, p1]`, sampled on a log grid in pressure
    /// and over simplex vertices, edges and random interior compositions,
    /// then widened by [`SAMPLING_MARGIN`]. Below the band the ratio is
    /// exactly `f_c`.
    pub fn new(
        sp: &SpeciesSet,
        f_c: f64,
        p1: f64,
        switch_width: f64,
        kind: FrictionKind,
    ) -> Result<Self> {
        if sp.len() < 2 {
            return Err(Error::InvalidFriction(
                "friction needs at least two species".into(),
            ));
        }
        if !(f_c > 0.0 && f_c.is_finite()) {
            return Err(Error::InvalidFriction(format!(
                "f_c must be positive, got {f_c}"
            )));
        }
        if !(p1 > 0.0 && p1.is_finite()) {
            return Err(Error::InvalidFriction(format!(
                "p1 must be positive, got {p1}"
            )));
        }
        if !(switch_width > 0.0 && switch_width < 1.0) {
            return Err(Error::InvalidFriction(format!(
                "switch_width must lie in (0, 1), got {switch_width}"
            )));
        }
        let mut model = FrictionModel {
            sp: sp.clone(),
            f_c,
            p1,
            switch_width,
            kind,
            constants: FrictionConstants {
                f0: f_c,
                f1: f_c,
                f2: f_c,
                f3: f_c,
            },
        };
        if kind == FrictionKind::Singular {
            let (lo, hi) = model.sample_ratio_extremes()?;
            model.constants.f0 = f_c * lo.min(1.0) * (1.0 - SAMPLING_MARGIN);
            model.constants.f1 = f_c * hi.max(1.0) * (1.0 + SAMPLING_MARGIN);
        }
        Ok(model)
    }

    fn sample_ratio_extremes(&self) -> Result<(f64, f64)> {
        let n = self.sp.len();
        let mut comps: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            comps.push((0..n).map(|j| f64::from(u8::from(i == j))).collect());
            for k in i + 1..n {
                for step in 1..8 {
                    let a = step as f64 / 8.0;
                    let mut x = vec![0.0; n];
                    x[i] = a;
                    x[k] = 1.0 - a;
                    comps.push(x);
                }
            }
        }
        comps.push(vec![1.0 / n as f64; n]);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f1c7);
        for _ in 0..64 {
            let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            comps.push(e.iter().map(|v| v / s).collect());
        }
        let p_lo = (1.0 - self.switch_width) * self.p1;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..=48 {
            let p = p_lo * (self.p1 / p_lo).powf(k as f64 / 48.0);
            let psi = self.psi(p);
            for x in &comps {
                let ls = ln_sigma(&self.sp, p, x)?;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let r = psi + (1.0 - psi) * (-ls[(i, j)]).exp();
                            lo = lo.min(r);
                            hi = hi.max(r);
                        }
                    }
                }
            }
        }
        Ok((lo, hi))
    }

    pub fn species(&self) -> &SpeciesSet {
        &self.sp
    }

    pub fn f_c(&self) -> f64 {
        self.f_c
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn switch_width(&self) -> f64 {
        self.switch_width
    }

    pub fn kind(&self) -> FrictionKind {
        self.kind
    }

    pub fn constants(&self) -> FrictionConstants {
        self.constants
    }

    /// The switch `ψ(p)`: 1 up to `(1 - switch_width) p1`, 0 from `p1` on,
    /// a quintic smoothstep (C²) in between.
    pub fn psi(&self, p: f64) -> f64 {
        let a = (1.0 - self.switch_width) * self.p1;
        if p <= a {
            1.0
        } else if p >= self.p1 {
            0.0
        } else {
            let z = (p - a) / (self.p1 - a);
            1.0 - z * z * z * (10.0 - 15.0 * z + 6.0 * z * z)
        }
    }

    /// The friction matrix at pressure `p` and number fractions `x`.
    /// Diagonal entries are unused and set to zero.
    pub fn friction(&self, p: f64, x: &[f64]) -> Result<SmallMatrix> {
        let n = self.sp.len();
        let psi = match self.kind {
            FrictionKind::Singular => self.psi(p),
            FrictionKind::Constant => 0.0,
        };
        let mut f = if psi > 0.0 {
            let s = sigma(&self.sp, p, x)?;
            SmallMatrix::from_fn(n, |i, k| self.f_c * (psi * s[(i, k)] + (1.0 - psi)))
        } else {
            SmallMatrix::from_fn(n, |_, _| self.f_c)
        };
        for i in 0..n {
            f[(i, i)] = 0.0;
        }
        Ok(f)
    }
}

/// Assembles `B` from a friction matrix and mass fractions.
pub fn assemble_b(f: &SmallMatrix, y: &[f64]) -> SmallMatrix {
    let n = y.len();
    let mut b = SmallMatrix::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k != i {
                b[(i, k)] = -f[(i, k)] * y[i];
                diag += f[(i, k)] * y[k];
            }
        }
        b[(i, i)] = diag;
    }
    b
}

pub fn build_b_at(st: &ThermoState<'_>, model: &FrictionModel) -> Result<SmallMatrix> {
    Ok(assemble_b(&model.friction(st.p, &st.x)?, &st.y))
}

pub fn build_b(sp: &SpeciesSet, rho: &[f64], model: &FrictionModel) -> Result<SmallMatrix> {
    build_b_at(&sp.state(rho)?, model)
}

/// `d_i = ρ_i Σ_k (δ_ik - y_k)(∇μ_k - b_k)`.
pub fn driving_forces(rho: &[f64], grad_mu: &[Vec3], b: &[Vec3]) -> Vec<Vec3> {
    let varrho: f64 = rho.iter().sum();
    let mut mean = [0.0; 3];
    for ((r, g), bb) in rho.iter().zip(grad_mu).zip(b) {
        for l in 0..3 {
            mean[l] += r / varrho * (g[l] - bb[l]);
        }
    }
    let mut d: Vec<Vec3> = rho
        .iter()
        .zip(grad_mu)
        .zip(b)
        .map(|((r, g), bb)| std::array::from_fn(|l| r * (g[l] - bb[l] - mean[l])))
        .collect();
    // The terms cancel; with large ρ_i ∇μ_i the rounded column sums can
    // exceed |d| by orders of magnitude. Push the residue back along y.
    for l in 0..3 {
        let sum: f64 = d.iter().map(|v| v[l]).sum();
        for (v, r) in d.iter_mut().zip(rho) {
            v[l] -= sum * r / varrho;
        }
    }
    d
}

/// `B + α y ⊗ 1` with `α = trace(B) / N`.
fn bordered(b: &SmallMatrix, y: &[f64], alpha: f64) -> SmallMatrix {
    SmallMatrix::from_fn(b.dim(), |i, j| b[(i, j)] + alpha * y[i])
}

fn default_alpha(b: &SmallMatrix) -> f64 {
    b.trace() / b.dim() as f64
}

/// Solves `B J = -d` for `J` with zero column sums.
pub fn solve_flux(b: &SmallMatrix, d: &[Vec3], y: &[f64]) -> Result<Vec<Vec3>> {
    solve_flux_with_alpha(b, d, y, default_alpha(b))
}

/// [`solve_flux`] with an explicit bordering parameter `α > 0`.
pub fn solve_flux_with_alpha(
    b: &SmallMatrix,
    d: &[Vec3],
    y: &[f64],
    alpha: f64,
) -> Result<Vec<Vec3>> {
    let n = b.dim();
    let scale = d
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    for l in 0..3 {
        let sum: f64 = d.iter().map(|v| v[l]).sum();
        if sum.abs() > 1e-10 * (1.0 + scale) {
            return Err(Error::UnbalancedForces { column: l, sum });
        }
    }
    let lu = Lu::factor(&bordered(b, y, alpha)).map_err(|_| Error::SingularBeyondKernel)?;
    let mut j = vec![[0.0; 3]; n];
    for l in 0..3 {
        let rhs: Vec<f64> = d.iter().map(|v| -v[l]).collect();
        let col = lu.solve(&rhs);
        // Remove the round-off component along y (B y = 0, so B J is unchanged).
        let total: f64 = col.iter().sum();
        for i in 0..n {
            j[i][l] = col[i] - total * y[i];
        }
    }
    Ok(j)
}

/// The Drazin inverse `B^D = B_α⁻¹ - α⁻¹ y ⊗ 1`.
pub fn drazin_inverse(b: &SmallMatrix, y: &[f64]) -> Result<SmallMatrix> {
    let alpha = default_alpha(b);
    let inv = Lu::factor(&bordered(b, y, alpha))
        .map_err(|_| Error::SingularBeyondKernel)?
        .inverse();
    Ok(SmallMatrix::from_fn(b.dim(), |i, j| {
        inv[(i, j)] - y[i] / alpha
    }))
}

/// `M = B^D R` with `R = diag(ρ)`.
pub fn onsager_at(st: &ThermoState<'_>, model: &FrictionModel) -> Result<SmallMatrix> {
    onsager_from_friction(&model.friction(st.p, &st.x)?, &st.y, st.varrho)
}

/// `B^D R` without forming `B^D`.
///
/// `B Y = L` is the Laplacian of the graph with edge weights
/// `f_ik y_i y_k`, and `B^D R = ϱ A G A` where `A = Y - y ⊗ y` and `G` is
/// any generalized inverse of `L`. `G` is taken as the inverse of `L`
/// grounded at the dominant species, factored by Kron reduction: every
/// step adds positive numbers, so entries many decades below the largest
/// keep their relative accuracy. Subtracting `α⁻¹ y ⊗ 1` from a bordered
/// inverse, by contrast, cancels them away for very dilute species.
pub fn onsager_from_friction(f: &SmallMatrix, y: &[f64], varrho: f64) -> Result<SmallMatrix> {
    let n = y.len();
    let ground = (0..n).fold(0, |g, i| if y[i] > y[g] { i } else { g });
    let nodes: Vec<usize> = (0..n).filter(|&i| i != ground).collect();
    let m = nodes.len();
    // Edge weights among the remaining nodes and towards the ground.
    let mut w = SmallMatrix::from_fn(m, |a, b| {
        if a == b {
            0.0
        } else {
            f[(nodes[a], nodes[b])] * y[nodes[a]] * y[nodes[b]]
        }
    });
    let mut to_ground: Vec<f64> = nodes
        .iter()
        .map(|&i| f[(i, ground)] * y[i] * y[ground])
        .collect();
    // Kron reduction: eliminating node k leaves a Laplacian with weights
    // w_ab + w_ak w_kb / d_k. The factor L D Lᵀ has L_ak = -w_ak / d_k.
    let mut d = vec![0.0; m];
    let mut l = SmallMatrix::zeros(m);
    for k in 0..m {
        d[k] = to_ground[k] + (k + 1..m).map(|a| w[(k, a)]).sum::<f64>();
        if !(d[k] > 0.0) || !d[k].is_finite() {
            return Err(Error::SingularBeyondKernel);
        }
        for a in k + 1..m {
            l[(a, k)] = w[(a, k)] / d[k];
        }
        for a in k + 1..m {
            to_ground[a] += l[(a, k)] * to_ground[k];
            for b in k + 1..m {
                if a != b {
                    w[(a, b)] += l[(a, k)] * w[(k, b)];
                }
            }
        }
    }
    // G = L⁻ᵀ D⁻¹ L⁻¹, column by column; L⁻¹ has nonnegative entries.
    let mut g = SmallMatrix::zeros(n);
    for c in 0..m {
        let mut u = vec![0.0; m];
        u[c] = 1.0;
        for a in 0..m {
            u[a] += (0..a).map(|k| l[(a, k)] * u[k]).sum::<f64>();
        }
        let mut x: Vec<f64> = u.iter().zip(&d).map(|(ui, di)| ui / di).collect();
        for k in (0..m).rev() {
            x[k] += (k + 1..m).map(|a| l[(a, k)] * x[a]).sum::<f64>();
        }
        for a in 0..m {
            g[(nodes[a], nodes[c])] = x[a];
        }
    }
    // A = Y - y ⊗ y, with 1 - y_i summed from the other fractions.
    let a = SmallMatrix::from_fn(n, |i, j| {
        if i == j {
            y[i] * (0..n).filter(|&k| k != i).map(|k| y[k]).sum::<f64>()
        } else {
            -y[i] * y[j]
        }
    });
    let ga = g.matmul(&a);
    Ok(a.matmul(&ga).scaled(varrho).symmetrized())
}

pub fn onsager_matrix(sp: &SpeciesSet, rho: &[f64], model: &FrictionModel) -> Result<SmallMatrix> {
    onsager_at(&sp.state(rho)?, model)
}

/// `M + σ I`.
pub fn regularized_onsager(m: &SmallMatrix, sigma_reg: f64) -> SmallMatrix {
    m.shifted(sigma_reg)
}

/// `Pᵀ W P` with `P = I - 1 ⊗ y`, i.e. the quadratic form
/// `z ↦ Σ_i w_i (z_i - y·z)²`.
pub fn projected_weight(y: &[f64], w: &[f64]) -> SmallMatrix {
    let n = y.len();
    let p = SmallMatrix::from_fn(n, |i, k| f64::from(u8::from(i == k)) - y[k]);
    SmallMatrix::from_fn(n, |k, l| (0..n).map(|i| p[(i, k)] * w[i] * p[(i, l)]).sum())
}

/// Dissipation of one flux evaluation together with every robust-bound
/// certificate that applies to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustCertificate {
    pub pressure: f64,
    /// `ζ = -J : (∇μ - b)`.
    pub zeta: f64,
    /// `|J|²` (Frobenius).
    pub j_norm_sq: f64,
    /// Total density `|ρ|₁`.
    pub varrho: f64,
    /// `λ_min(B^D R - (1/f1) Pᵀ W P)`.
    pub cert_low: f64,
    /// `‖B^D R‖∞`, the scale against which `cert_low` is judged.
    pub onsager_scale: f64,
    /// `(2/f2) |ρ| ζ - |J|²`.
    pub cert_normal: f64,
    /// `(2 N |vbar0|∞ / f0) ζ`.
    pub low_flux_bound: f64,
    /// `(8 |w|₁ / f0) ζ`, the bound that the Hölder step actually yields.
    pub low_flux_bound_w: f64,
    /// `max_i [(J̃^i)² - (2/f0) w_i ζ]`: the dilute-limit inequality.
    pub dilute_excess: f64,
    /// `min_i F̲_i(p)`, the pointwise constant of the normal-pressure bound.
    pub c_normal: f64,
    /// `λ_min(B^D R - (c_normal/f3) Pᵀ W P)`.
    pub cert_normal_matrix: f64,
    /// The normalized state of `ρ`.
    pub w: Vec<f64>,
}

impl RobustCertificate {
    /// The state is certified against the low-pressure bounds
    /// (`p <= p1`, with a `1e-9` relative band around `p1` counted in both).
    pub fn is_low(&self, p1: f64) -> bool {
        self.pressure <= p1 * (1.0 + 1e-9)
    }

    pub fn is_normal(&self, p1: f64) -> bool {
        self.pressure >= p1 * (1.0 - 1e-9)
    }
}

/// Solves for the flux at `rho` and evaluates all robust-bound certificates.
pub fn dissipation_and_bounds(
    sp: &SpeciesSet,
    rho: &[f64],
    model: &FrictionModel,
    grad_mu: &[Vec3],
    b: &[Vec3],
) -> Result<RobustCertificate> {
    let st = sp.state(rho)?;
    let n = sp.len();
    let bmat = build_b_at(&st, model)?;
    let d = driving_forces(rho, grad_mu, b);
    let j = solve_flux(&bmat, &d, &st.y)?;
    let zeta: f64 = -(0..n)
        .map(|i| {
            (0..3)
                .map(|l| j[i][l] * (grad_mu[i][l] - b[i][l]))
                .sum::<f64>()
        })
        .sum::<f64>();
    let j_norm_sq: f64 = j.iter().flat_map(|v| v.iter()).map(|v| v * v).sum();

    let m = onsager_from_friction(&model.friction(st.p, &st.x)?, &st.y, st.varrho)?;
    let w = inverse_chart_at(sp, rho, st.p)?.w.into_inner();
    let pwp = projected_weight(&st.y, &w);
    let c = model.constants();
    let cert_low = min_symmetric_eigenvalue(&m.sub(&pwp.scaled(1.0 / c.f1)))?;

    let (_, ln_lower) = quotient_envelopes(sp, st.p);
    let c_normal = ln_lower.iter().copied().fold(f64::INFINITY, f64::min).exp();
    let cert_normal_matrix = min_symmetric_eigenvalue(&m.sub(&pwp.scaled(c_normal / c.f3)))?;

    // J̃ = J - (J·F / y·F) y with F_i = ρ_i / w_i.
    let f: Vec<f64> = rho.iter().zip(&w).map(|(r, wi)| r / wi).collect();
    let yf: f64 = st.y.iter().zip(&f).map(|(a, b)| a * b).sum();
    let mut jt = j.clone();
    for l in 0..3 {
        let jf: f64 = (0..n).map(|i| j[i][l] * f[i]).sum();
        for i in 0..n {
            jt[i][l] -= jf / yf * st.y[i];
        }
    }
    let dilute_excess = (0..n)
        .map(|i| jt[i].iter().map(|v| v * v).sum::<f64>() - 2.0 / c.f0 * w[i] * zeta)
        .fold(f64::NEG_INFINITY, f64::max);

    let vmax = sp.vbar0().iter().copied().fold(0.0, f64::max);
    let w1: f64 = w.iter().sum();
    Ok(RobustCertificate {
        pressure: st.p,
        zeta,
        j_norm_sq,
        varrho: st.varrho,
        cert_low,
        onsager_scale: m.norm_inf(),
        cert_normal: 2.0 / c.f2 * st.varrho * zeta - j_norm_sq,
        low_flux_bound: 2.0 * n as f64 * vmax / c.f0 * zeta,
        low_flux_bound_w: 8.0 * w1 / c.f0 * zeta,
        dilute_excess,
        c_normal,
        cert_normal_matrix,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn species() -> SpeciesSet {
        SpeciesSet::log_mixture(&[1.0, 2.0, 4.0], &[1.0, 0.5, 0.25], &[0.0, 0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn sigma_is_one_at_reference_pressure() {
        let sp = species();
        for x in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.0, 0.5, 0.5]] {
            let s = sigma(&sp, 1.0, &x).unwrap();
            for i in 0..3 {
                for k in 0..3 {
                    assert!((s[(i, k)] - 1.0).abs() < 1e-12, "{x:?}");
                }
            }
        }
    }

    #[test]
    fn sigma_matches_its_quotient_form() {
        let sp = species();
        for p in [1e-5, 0.03, 1.0, 40.0] {
            let x = [0.1, 0.6, 0.3];
            let a = sigma(&sp, p, &x).unwrap();
            let b = sigma_from_quotients(&sp, p, &x).unwrap();
            for i in 0..3 {
                for k in 0..3 {
                    assert!((a[(i, k)] / b[(i, k)] - 1.0).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn hand_assembled_b() {
        let f = SmallMatrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]);
        let b = assemble_b(&f, &[0.5, 0.5]);
        assert_eq!(
            b,
            SmallMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]])
        );
    }

    #[test]
    fn hand_driving_forces() {
        let d = driving_forces(&[0.5, 0.5], &[[2.0, 0.0, 0.0], [0.0; 3]], &[[0.0; 3]; 2]);
        assert_eq!(d, vec![[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]]);
        let g = [[1.0, -2.0, 0.5], [0.3, 0.0, 4.0]];
        let d = driving_forces(&[0.2, 0.9], &g, &g);
        assert!(d.iter().flat_map(|v| v.iter()).all(|v| *v == 0.0));
    }

    #[test]
    fn zero_forces_give_zero_flux() {
        let b = SmallMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert_eq!(
            solve_flux(&b, &[[0.0; 3]; 2], &[0.5, 0.5]).unwrap(),
            vec![[0.0; 3]; 2]
        );
        assert!(matches!(
            solve_flux(&b, &[[1.0, 0.0, 0.0], [0.0; 3]], &[0.5, 0.5]),
            Err(Error::UnbalancedForces { .. })
        ));
    }

    #[test]
    fn friction_plateau_and_switch() {
        let sp = species();
        let model = FrictionModel::new(&sp, 2.0, 0.1, 0.5, FrictionKind::Singular).unwrap();
        let f = model.friction(0.2, &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(f[(0, 1)], 2.0);
        assert_eq!(model.friction(1.0, &[0.2, 0.3, 0.5]).unwrap()[(2, 1)], 2.0);
        assert_eq!(model.psi(0.05), 1.0);
        assert_eq!(model.psi(0.1), 0.0);
        assert!(model.psi(0.075) > 0.0 && model.psi(0.075) < 1.0);
        let c = model.constants();
        assert!(c.f0 <= 2.0 && c.f1 >= 2.0 && c.f2 == 2.0 && c.f3 == 2.0);
    }

    #[test]
    fn binary_onsager_matrix_matches_hand_formula() {
        let sp = SpeciesSet::log_mixture(&[1.0, 3.0], &[1.0, 0.4], &[0.0, 0.0], 1.0).unwrap();
        let model = FrictionModel::new(&sp, 1.5, 0.1, 0.5, FrictionKind::Singular).unwrap();
        let rho = [0.3, 1.2];
        let m = onsager_matrix(&sp, &rho, &model).unwrap();
        let c = rho[0] * rho[1] / ((rho[0] + rho[1]) * 1.5);
        let expected = SmallMatrix::from_rows(&[vec![c, -c], vec![-c, c]]);
        assert!(m.sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn laplacian_onsager_matches_drazin_route() {
        let f = SmallMatrix::from_rows(&[
            vec![0.0, 2.0, 0.7, 1.1],
            vec![2.0, 0.0, 3.0, 0.4],
            vec![0.7, 3.0, 0.0, 1.9],
            vec![1.1, 0.4, 1.9, 0.0],
        ]);
        let y = [0.1, 0.4, 0.2, 0.3];
        let varrho = 2.5;
        let bd = drazin_inverse(&assemble_b(&f, &y), &y).unwrap();
        let direct = SmallMatrix::from_fn(4, |i, j| bd[(i, j)] * varrho * y[j]);
        let m = onsager_from_friction(&f, &y, varrho).unwrap();
        assert!(m.sub(&direct).max_abs() < 1e-13 * direct.max_abs());
    }

    #[test]
    fn laplacian_onsager_keeps_dilute_entries() {
        // Species 0 at 1e-60: the exact matrix has M_00 = ρ_0 / (ϱ f_02 y_2) to leading order.
        let f = SmallMatrix::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ]);
        let y = [1e-60, 1e-30, 1.0 - 1e-30];
        let m = onsager_from_friction(&f, &y, 1.0).unwrap();
        assert!((m[(0, 0)] / (1e-60 / 2.0) - 1.0).abs() < 1e-12);
        let row: f64 = (0..3).map(|j| m[(0, j)]).sum();
        assert!(row.abs() < 1e-12 * m[(0, 0)]);
    }
}
