//! One-dimensional finite-volume solver for the regularized mixture system
//!
//! ```text
//! ∂t ρ_i + ∂x(ρ_i v + ȷ_i) = 0,           ȷ = -M^σ(ρ)(∂x μ - b)
//! ∂t(ϱv) + ∂x(ϱv² + p - η ∂x v) = Σ ρ_i b_i + ∂x((Σ ȷ_i) v)
//! ```
//!
//! on `(0, L)` with `v = 0` and `ȷ = 0` at both walls.
//!
//! The scheme is explicit Euler in time and conservative in `ρ_i` and `ϱv`.
//! Face states are arithmetic averages, convection is first-order upwind.
//! Every step is audited against the discrete energy balance: with `b = 0`
//! the total energy may not grow by more than `1e-6 E₀ dt / t_end`. With
//! `b ≠ 0` the Grönwall-type form is checked instead, with the work terms
//! estimated by Young's inequality.
//!
//! ```
//! use msmix::sim1d::{run, DensityProfile, Grid1D, InitialData, SimConfig};
//! use msmix::thermo::SpeciesSet;
//! use msmix::transport::{FrictionKind, FrictionModel};
//!
//! let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 0.5], &[2.0, 2.0], 1.0)?;
//! let fr = FrictionModel::new(&sp, 1.0, 0.1, 0.5, FrictionKind::Singular)?;
//! let mut cfg = SimConfig::new(sp, fr, Grid1D::new(1.0, 16)?);
//! cfg.t_end = 1e-3;
//! let init = InitialData::new(DensityProfile::Uniform(vec![0.5, 1.0]));
//! let out = run(&cfg, &init, &mut ())?;
//! assert!(out.stats.max_mass_drift < 1e-12);
//! # Ok::<(), msmix::Error>(())
//! ```

use rayon::prelude::*;

use crate::chart::inverse_chart_at;
use crate::error::{Error, Result};
use crate::numerics::SmallMatrix;
use crate::thermo::SpeciesSet;
use crate::transport::{onsager_at, FrictionModel};

/// Uniform cell-centred grid on `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(length: f64, n_cells: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidSimulation(format!(
                "length must be positive, got {length}"
            )));
        }
        if n_cells < 4 {
            return Err(Error::InvalidSimulation(format!(
                "need at least 4 cells, got {n_cells}"
            )));
        }
        Ok(Grid1D { length, n_cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        (c as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.center(c)).collect()
    }
}

/// Time stepping variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepping {
    /// Update the partial densities directly.
    #[default]
    Primitive,
    /// Update the chemical potentials `μ ← μ + D²h(ρ) Δρ` and recover the
    /// densities with the convex dual. For cross-validation only: mass is
    /// conserved only up to the linearization error.
    Entropic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub species: SpeciesSet,
    pub friction: FrictionModel,
    pub grid: Grid1D,
    pub cfl: f64,
    pub t_end: f64,
    pub sigma_reg: f64,
    pub eta_shear: f64,
    pub eta_bulk: f64,
    /// Constant body force per unit mass, one entry per species.
    pub b: Vec<f64>,
    /// Time between sink frames. Zero or infinite: first and last frame only.
    pub output_every: f64,
    pub floor_density: f64,
    pub stepping: Stepping,
    /// Fail the run when the per-step energy audit fails.
    pub audit: bool,
    /// Accumulate `∫∫ |∂x w|²` (costs one chart inversion per cell and step).
    pub track_chart: bool,
}

impl SimConfig {
    /// A configuration with the default numerical parameters.
    pub fn new(species: SpeciesSet, friction: FrictionModel, grid: Grid1D) -> Self {
        let n = species.len();
        SimConfig {
            species,
            friction,
            grid,
            cfl: 0.4,
            t_end: 0.1,
            sigma_reg: 1e-3,
            eta_shear: 0.05,
            eta_bulk: 0.0,
            b: vec![0.0; n],
            output_every: 0.0,
            floor_density: 1e-12,
            stepping: Stepping::Primitive,
            audit: true,
            track_chart: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSimulation(msg));
        if self.friction.species() != &self.species {
            return bad("friction model was built for a different species set".into());
        }
        if self.b.len() != self.species.len() {
            return bad(format!(
                "b has {} entries, expected {}",
                self.b.len(),
                self.species.len()
            ));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!(
                "t_end must be finite and nonnegative, got {}",
                self.t_end
            ));
        }
        if !(self.sigma_reg >= 0.0 && self.sigma_reg.is_finite()) {
            return bad(format!(
                "sigma_reg must be nonnegative, got {}",
                self.sigma_reg
            ));
        }
        if !(self.eta_shear > 0.0 && self.eta_shear.is_finite()) {
            return bad(format!(
                "eta_shear must be positive, got {}",
                self.eta_shear
            ));
        }
        if !(self.eta_bulk >= 0.0 && self.eta_bulk.is_finite()) {
            return bad(format!(
                "eta_bulk must be nonnegative, got {}",
                self.eta_bulk
            ));
        }
        if !(self.floor_density > 0.0) {
            return bad(format!(
                "floor_density must be positive, got {}",
                self.floor_density
            ));
        }
        if self.output_every.is_nan() || self.output_every < 0.0 {
            return bad(format!(
                "output_every must be nonnegative, got {}",
                self.output_every
            ));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return bad("b must be finite".into());
        }
        Ok(())
    }

    fn eta(&self) -> f64 {
        self.eta_shear + self.eta_bulk
    }

    fn b_max(&self) -> f64 {
        self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Initial partial densities as functions of `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityProfile {
    Uniform(Vec<f64>),
    /// `left + (right - left)(1 + tanh((x - position)/width))/2`; a sharp
    /// step when `width = 0`.
    Step {
        left: Vec<f64>,
        right: Vec<f64>,
        position: f64,
        width: f64,
    },
    /// `base + amplitude · exp(-((x - center)/width)²)`.
    Gaussian {
        base: Vec<f64>,
        amplitude: Vec<f64>,
        center: f64,
        width: f64,
    },
}

impl DensityProfile {
    pub fn len(&self) -> usize {
        match self {
            DensityProfile::Uniform(r) => r.len(),
            DensityProfile::Step { left, .. } => left.len(),
            DensityProfile::Gaussian { base, .. } => base.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, x: f64) -> Vec<f64> {
        match self {
            DensityProfile::Uniform(r) => r.clone(),
            DensityProfile::Step {
                left,
                right,
                position,
                width,
            } => {
                let s = if *width > 0.0 {
                    0.5 * (1.0 + ((x - position) / width).tanh())
                } else if x < *position {
                    0.0
                } else {
                    1.0
                };
                left.iter()
                    .zip(right)
                    .map(|(l, r)| l + (r - l) * s)
                    .collect()
            }
            DensityProfile::Gaussian {
                base,
                amplitude,
                center,
                width,
            } => {
                let e = (-((x - center) / width).powi(2)).exp();
                base.iter().zip(amplitude).map(|(b, a)| b + a * e).collect()
            }
        }
    }
}

/// Initial data: densities plus the velocity `A sin(kπx/L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub density: DensityProfile,
    pub velocity_amplitude: f64,
    pub velocity_mode: u32,
}

impl InitialData {
    pub fn new(density: DensityProfile) -> Self {
        InitialData {
            density,
            velocity_amplitude: 0.0,
            velocity_mode: 1,
        }
    }

    pub fn velocity(&self, x: f64, length: f64) -> f64 {
        self.velocity_amplitude
            * (f64::from(self.velocity_mode) * std::f64::consts::PI * x / length).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// `rho[c][i]`: density of species `i` in cell `c`.
    pub rho: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    /// `Σ_c ρ_i dx` for every species.
    pub fn masses(&self, dx: f64) -> Vec<f64> {
        let n = self.rho.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| self.rho.iter().map(|r| r[i]).sum::<f64>() * dx)
            .collect()
    }
}

/// Energies and cumulative dissipation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub free_energy: f64,
    pub kinetic: f64,
    pub dissipation_diffusive: f64,
    pub dissipation_viscous: f64,
    /// `∫∫ Σ b_i (ρ_i v + ȷ_i)`, the work of the body forces.
    pub work_external: f64,
    /// `∫∫ (|b|²/2 (|M^σ| + |ρ|) + ϱv²/2)`, the right-hand side of the
    /// Grönwall-form energy estimate.
    pub gronwall_rhs: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.free_energy + self.kinetic
    }
}

/// What one explicit step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FieldState,
    pub dt: f64,
    /// `dt ∫ M^σ(∂x μ - b)·(∂x μ - b)`.
    pub dissipation_diffusive: f64,
    /// `dt ∫ η (∂x v)²`.
    pub dissipation_viscous: f64,
    pub work_external: f64,
    pub gronwall_rhs: f64,
    /// `dt ∫ |σ(∂x μ - b)|²`.
    pub jtilde_sq: f64,
    /// `dt ∫ |∂x w|²`; zero unless chart tracking is on.
    pub grad_w_sq: f64,
    pub floor_activations: usize,
}

/// Pointwise data needed by the sink.
pub struct Frame<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub rho: &'a [Vec<f64>],
    pub v: &'a [f64],
    pub p: &'a [f64],
    pub w: &'a [Vec<f64>],
    pub ledger: &'a EnergyLedger,
}

/// Consumer of output frames.
pub trait Sink {
    fn frame(&mut self, frame: &Frame<'_>) -> Result<()>;
}

impl Sink for () {
    fn frame(&mut self, _: &Frame<'_>) -> Result<()> {
        Ok(())
    }
}

/// Collects frames as `(t, ρ, v)` snapshots.
#[derive(Debug, Clone, Default)]
pub struct Snapshots(pub Vec<(f64, Vec<Vec<f64>>, Vec<f64>)>);

impl Sink for Snapshots {
    fn frame(&mut self, f: &Frame<'_>) -> Result<()> {
        self.0.push((f.t, f.rho.to_vec(), f.v.to_vec()));
        Ok(())
    }
}

struct CellThermo {
    p: f64,
    mu: Vec<f64>,
    h: f64,
    cs2: f64,
    hess: SmallMatrix,
}

fn cell_thermo(sp: &SpeciesSet, rho: &[f64]) -> Result<CellThermo> {
    let st = sp.state(rho)?;
    Ok(CellThermo {
        p: st.p,
        mu: st.chem_potentials(),
        h: st.free_energy(),
        cs2: st.sound_speed_sq(),
        hess: st.hessian(),
    })
}

fn all_cell_thermo(sp: &SpeciesSet, rho: &[Vec<f64>]) -> Result<Vec<CellThermo>> {
    rho.par_iter().map(|r| cell_thermo(sp, r)).collect()
}

/// `(Σ h dx, Σ ϱv²/2 dx)`.
pub fn energies(cfg: &SimConfig, state: &FieldState) -> Result<(f64, f64)> {
    let dx = cfg.grid.dx();
    let th = all_cell_thermo(&cfg.species, &state.rho)?;
    let f = th.iter().map(|c| c.h).sum::<f64>() * dx;
    let k = state
        .rho
        .iter()
        .zip(&state.v)
        .map(|(r, v)| 0.5 * r.iter().sum::<f64>() * v * v)
        .sum::<f64>()
        * dx;
    Ok((f, k))
}

/// Cell averages of the initial data by the midpoint rule.
pub fn initialize(cfg: &SimConfig, init: &InitialData) -> Result<FieldState> {
    cfg.validate()?;
    let n = cfg.species.len();
    if init.density.len() != n {
        return Err(Error::InvalidProfile(format!(
            "profile has {} species, configuration has {n}",
            init.density.len()
        )));
    }
    let g = cfg.grid;
    let mut rho = Vec::with_capacity(g.n_cells());
    let mut v = Vec::with_capacity(g.n_cells());
    for c in 0..g.n_cells() {
        let x = g.center(c);
        let r = init.density.at(x);
        if let Some((i, val)) = r
            .iter()
            .enumerate()
            .find(|(_, val)| !(**val > 0.0 && val.is_finite()))
        {
            return Err(Error::InvalidProfile(format!(
                "species {i} has density {val} at x = {x}"
            )));
        }
        rho.push(r);
        let vel = init.velocity(x, g.length());
        if !vel.is_finite() {
            return Err(Error::InvalidProfile(format!("velocity {vel} at x = {x}")));
        }
        v.push(vel);
    }
    Ok(FieldState { rho, v, t: 0.0 })
}

struct FaceData {
    /// Diffusive flux `ȷ`.
    flux: Vec<f64>,
    zeta: f64,
    m_frob: f64,
    d_max: f64,
    jtilde_sq: f64,
    work_diff: f64,
}

fn face_data(
    cfg: &SimConfig,
    rho_l: &[f64],
    rho_r: &[f64],
    tl: &CellThermo,
    tr: &CellThermo,
) -> Result<FaceData> {
    let n = rho_l.len();
    let dx = cfg.grid.dx();
    let rho_f: Vec<f64> = rho_l
        .iter()
        .zip(rho_r)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let st = cfg.species.state(&rho_f)?;
    let m = onsager_at(&st, &cfg.friction)?.shifted(cfg.sigma_reg);
    let force: Vec<f64> = (0..n)
        .map(|i| (tr.mu[i] - tl.mu[i]) / dx - cfg.b[i])
        .collect();
    let mf = m.matvec(&force);
    let flux: Vec<f64> = mf.iter().map(|v| -v).collect();
    let zeta: f64 = force.iter().zip(&mf).map(|(a, b)| a * b).sum();
    let work_diff: f64 = flux.iter().zip(&cfg.b).map(|(j, b)| j * b).sum();
    let d_max = m
        .matmul(&tl.hess)
        .norm_inf()
        .max(m.matmul(&tr.hess).norm_inf());
    let jtilde_sq = cfg.sigma_reg * cfg.sigma_reg * force.iter().map(|f| f * f).sum::<f64>();
    Ok(FaceData {
        flux,
        zeta,
        m_frob: m.norm_frobenius(),
        d_max,
        jtilde_sq,
        work_diff,
    })
}

/// One explicit step with the largest stable `dt`, not exceeding `t_end`.
pub fn step(cfg: &SimConfig, state: &FieldState) -> Result<StepOutcome> {
    step_capped(cfg, state, (cfg.t_end - state.t).max(0.0))
}

fn step_capped(cfg: &SimConfig, state: &FieldState, dt_cap: f64) -> Result<StepOutcome> {
    let sp = &cfg.species;
    let n = sp.len();
    let nc = cfg.grid.n_cells();
    let dx = cfg.grid.dx();
    let eta = cfg.eta();
    let th = all_cell_thermo(sp, &state.rho)?;
    let faces: Vec<FaceData> = (1..nc)
        .into_par_iter()
        .map(|f| face_data(cfg, &state.rho[f - 1], &state.rho[f], &th[f - 1], &th[f]))
        .collect::<Result<_>>()?;

    let varrho: Vec<f64> = state.rho.iter().map(|r| r.iter().sum()).collect();
    let mut wave = 0.0f64;
    for c in 0..nc {
        wave = wave.max(state.v[c].abs() + th[c].cs2.max(0.0).sqrt());
    }
    let d_max = faces.iter().fold(0.0f64, |a, f| a.max(f.d_max));
    let varrho_min = varrho.iter().copied().fold(f64::INFINITY, f64::min);
    let mut dt_stable = dx / wave;
    if d_max > 0.0 {
        dt_stable = dt_stable.min(dx * dx / (2.0 * d_max));
    }
    dt_stable = cfl_min(dt_stable, dx * dx * varrho_min / (2.0 * eta)) * cfg.cfl;
    let t_scale = cfg.t_end.max(state.t).max(f64::MIN_POSITIVE);
    if !(dt_stable > 1e-15 * t_scale) {
        return Err(Error::CflViolation {
            dt: dt_stable,
            t: state.t,
        });
    }
    let dt = dt_stable.min(dt_cap);

    // Fluxes through the faces 0..=nc (0 and nc are walls).
    let mut mass_flux = vec![vec![0.0; n]; nc + 1];
    let mut mom_flux = vec![0.0; nc + 1];
    let mut out = StepOutcome {
        state: state.clone(),
        dt,
        dissipation_diffusive: 0.0,
        dissipation_viscous: 0.0,
        work_external: 0.0,
        gronwall_rhs: 0.0,
        jtilde_sq: 0.0,
        grad_w_sq: 0.0,
        floor_activations: 0,
    };
    let b_max = cfg.b_max();
    for (k, fd) in faces.iter().enumerate() {
        let (l, r) = (k, k + 1);
        let vf = 0.5 * (state.v[l] + state.v[r]);
        let up = if vf >= 0.0 { l } else { r };
        let mut total = 0.0;
        for i in 0..n {
            let flux = state.rho[up][i] * vf + fd.flux[i];
            mass_flux[k + 1][i] = flux;
            total += flux;
        }
        let v_up = if total >= 0.0 { state.v[l] } else { state.v[r] };
        let dv = state.v[r] - state.v[l];
        mom_flux[k + 1] = total * v_up + 0.5 * (th[l].p + th[r].p) - eta * dv / dx;
        out.dissipation_diffusive += dt * dx * fd.zeta;
        out.dissipation_viscous += dt * eta * dv * dv / dx;
        out.work_external += dt * dx * fd.work_diff;
        out.gronwall_rhs += dt * dx * 0.5 * b_max * b_max * fd.m_frob;
        out.jtilde_sq += dt * dx * fd.jtilde_sq;
    }
    let (v0, vn) = (state.v[0], state.v[nc - 1]);
    mom_flux[0] = th[0].p - eta * 2.0 * v0 / dx;
    mom_flux[nc] = th[nc - 1].p + eta * 2.0 * vn / dx;
    out.dissipation_viscous += dt * 2.0 * eta * (v0 * v0 + vn * vn) / dx;
    for c in 0..nc {
        let body: f64 = state.rho[c].iter().zip(&cfg.b).map(|(r, b)| r * b).sum();
        out.work_external += dt * dx * body * state.v[c];
        out.gronwall_rhs +=
            dt * dx * (0.5 * b_max * b_max * varrho[c] + 0.5 * varrho[c] * state.v[c].powi(2));
    }

    if cfg.track_chart {
        let w: Vec<Vec<f64>> = state
            .rho
            .par_iter()
            .zip(&th)
            .map(|(r, t)| inverse_chart_at(sp, r, t.p).map(|cp| cp.w.into_inner()))
            .collect::<Result<_>>()?;
        for c in 1..nc {
            out.grad_w_sq += dt / dx
                * w[c]
                    .iter()
                    .zip(&w[c - 1])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>();
        }
    }

    let new = &mut out.state;
    new.t = if dt == dt_cap {
        state.t + dt_cap
    } else {
        state.t + dt
    };
    let lambda = dt / dx;
    for c in 0..nc {
        let body: f64 = state.rho[c].iter().zip(&cfg.b).map(|(r, b)| r * b).sum();
        let q = varrho[c] * state.v[c] - lambda * (mom_flux[c + 1] - mom_flux[c]) + dt * body;
        for i in 0..n {
            new.rho[c][i] = state.rho[c][i] - lambda * (mass_flux[c + 1][i] - mass_flux[c][i]);
        }
        if cfg.stepping == Stepping::Entropic {
            let delta: Vec<f64> = (0..n).map(|i| new.rho[c][i] - state.rho[c][i]).collect();
            let hd = th[c].hess.matvec(&delta);
            let mu: Vec<f64> = th[c].mu.iter().zip(&hd).map(|(a, b)| a + b).collect();
            new.rho[c] = sp.dual_state(&mu)?;
        }
        for i in 0..n {
            let r = new.rho[c][i];
            if r.is_nan() {
                return Err(Error::StateCorrupted {
                    cell: c,
                    t: state.t,
                });
            }
            if r < cfg.floor_density {
                new.rho[c][i] = cfg.floor_density;
                out.floor_activations += 1;
            }
        }
        let vr: f64 = new.rho[c].iter().sum();
        new.v[c] = q / vr;
        if !new.v[c].is_finite() {
            return Err(Error::StateCorrupted {
                cell: c,
                t: state.t,
            });
        }
    }
    Ok(out)
}

fn cfl_min(a: f64, b: f64) -> f64 {
    if b.is_nan() {
        a
    } else {
        a.min(b)
    }
}

/// Result of auditing one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditResult {
    /// Energy change of the step.
    pub delta_energy: f64,
    /// The audited quantity minus the tolerance; positive means failure.
    pub excess: f64,
    pub tolerance: f64,
}

fn audit_tolerance(cfg: &SimConfig, e0: f64, dt: f64) -> f64 {
    let t_ref = if cfg.t_end > 0.0 { cfg.t_end } else { dt };
    1e-6 * e0.abs() * dt / t_ref
}

fn audit_values(
    cfg: &SimConfig,
    e0: f64,
    before: f64,
    after: f64,
    step: &StepOutcome,
) -> AuditResult {
    let delta = after - before;
    let tolerance = audit_tolerance(cfg, e0, step.dt);
    let audited = if cfg.b.iter().all(|v| *v == 0.0) {
        delta
    } else {
        delta + 0.5 * step.dissipation_diffusive + step.dissipation_viscous - step.gronwall_rhs
    };
    AuditResult {
        delta_energy: delta,
        excess: audited - tolerance,
        tolerance,
    }
}

/// Audits a step taken from `before` (its outcome holds the new state).
pub fn energy_audit(
    cfg: &SimConfig,
    before: &FieldState,
    step: &StepOutcome,
    e0: f64,
) -> Result<AuditResult> {
    let (f0, k0) = energies(cfg, before)?;
    let (f1, k1) = energies(cfg, &step.state)?;
    let a = audit_values(cfg, e0, f0 + k0, f1 + k1, step);
    if a.excess > 0.0 {
        return Err(Error::AuditFailure {
            t: step.state.t,
            increase: a.delta_energy,
            tolerance: a.tolerance,
        });
    }
    Ok(a)
}

/// Run statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub floor_activations: usize,
    pub e0: f64,
    pub initial_masses: Vec<f64>,
    /// Largest relative per-species mass deviation from the initial masses.
    pub max_mass_drift: f64,
    /// `max_t (E(t) + dissipation(t) - E₀) / |E₀|`.
    pub max_energy_excess: f64,
    /// Largest single-step increase of `E`, relative to `|E₀|`.
    pub max_energy_increase: f64,
    /// Largest single-step increase of the free energy, relative to `|E₀|`.
    pub max_free_energy_increase: f64,
    /// `‖σ(∂x μ - b)‖` in `L²` over space and time.
    pub jtilde_l2: f64,
    /// `‖∂x w‖` in `L²` over space and time (zero unless tracked).
    pub grad_w_l2: f64,
    pub min_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: FieldState,
    pub ledger: EnergyLedger,
    pub stats: RunStats,
}

fn emit(
    cfg: &SimConfig,
    state: &FieldState,
    ledger: &EnergyLedger,
    sink: &mut dyn Sink,
) -> Result<()> {
    let sp = &cfg.species;
    let x = cfg.grid.centers();
    let (p, w): (Vec<f64>, Vec<Vec<f64>>) = state
        .rho
        .iter()
        .map(|r| {
            let p = sp.pressure(r)?;
            Ok((p, inverse_chart_at(sp, r, p)?.w.into_inner()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    sink.frame(&Frame {
        t: state.t,
        x: &x,
        rho: &state.rho,
        v: &state.v,
        p: &p,
        w: &w,
        ledger,
    })
}

/// Runs from the initial data to `t_end`, emitting frames at `t = 0`, every
/// `output_every` and at `t_end`.
pub fn run(cfg: &SimConfig, init: &InitialData, sink: &mut dyn Sink) -> Result<RunOutcome> {
    let state = initialize(cfg, init)?;
    run_from(cfg, state, sink)
}

/// [`run`] starting from a given state.
pub fn run_from(cfg: &SimConfig, mut state: FieldState, sink: &mut dyn Sink) -> Result<RunOutcome> {
    cfg.validate()?;
    let dx = cfg.grid.dx();
    let (f, k) = energies(cfg, &state)?;
    let e0 = f + k;
    let mut ledger = EnergyLedger {
        free_energy: f,
        kinetic: k,
        ..Default::default()
    };
    let mut stats = RunStats {
        e0,
        initial_masses: state.masses(dx),
        min_dt: f64::INFINITY,
        ..Default::default()
    };
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    emit(cfg, &state, &ledger, sink)?;
    let every = if cfg.output_every > 0.0 && cfg.output_every.is_finite() {
        cfg.output_every
    } else {
        f64::INFINITY
    };
    let mut next_out = every;
    let (mut jt, mut gw) = (0.0, 0.0);
    while state.t < cfg.t_end {
        let target = next_out.min(cfg.t_end);
        let out = step_capped(cfg, &state, target - state.t)?;
        let (f1, k1) = energies(cfg, &out.state)?;
        let audit = audit_values(cfg, e0, ledger.total(), f1 + k1, &out);
        if cfg.audit && audit.excess > 0.0 {
            return Err(Error::AuditFailure {
                t: out.state.t,
                increase: audit.delta_energy,
                tolerance: audit.tolerance,
            });
        }
        stats.max_energy_increase = stats.max_energy_increase.max(audit.delta_energy / scale);
        stats.max_free_energy_increase = stats
            .max_free_energy_increase
            .max((f1 - ledger.free_energy) / scale);
        ledger.free_energy = f1;
        ledger.kinetic = k1;
        ledger.dissipation_diffusive += out.dissipation_diffusive;
        ledger.dissipation_viscous += out.dissipation_viscous;
        ledger.work_external += out.work_external;
        ledger.gronwall_rhs += out.gronwall_rhs;
        jt += out.jtilde_sq;
        gw += out.grad_w_sq;
        stats.steps += 1;
        stats.floor_activations += out.floor_activations;
        stats.min_dt = stats.min_dt.min(out.dt);
        state = out.state;
        let excess =
            ledger.total() + ledger.dissipation_diffusive + ledger.dissipation_viscous - e0;
        stats.max_energy_excess = stats.max_energy_excess.max(excess / scale);
        for (m, m0) in state.masses(dx).iter().zip(&stats.initial_masses) {
            stats.max_mass_drift = stats.max_mass_drift.max(((m - m0) / m0).abs());
        }
        if state.t >= target {
            if state.t >= next_out {
                next_out += every;
            }
            if state.t < cfg.t_end {
                emit(cfg, &state, &ledger, sink)?;
            }
        }
    }
    if stats.steps > 0 {
        emit(cfg, &state, &ledger, sink)?;
    }
    stats.jtilde_l2 = jt.sqrt();
    stats.grad_w_l2 = gw.sqrt();
    Ok(RunOutcome {
        state,
        ledger,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::FrictionKind;

    fn config(n_cells: usize) -> SimConfig {
        let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 0.5], &[2.0, 2.0], 1.0).unwrap();
        let fr = FrictionModel::new(&sp, 1.0, 0.1, 0.5, FrictionKind::Singular).unwrap();
        let mut cfg = SimConfig::new(sp, fr, Grid1D::new(1.0, n_cells).unwrap());
        cfg.t_end = 0.02;
        cfg
    }

    fn counter_diffusion() -> InitialData {
        // Both sides have p = n = 1.
        InitialData::new(DensityProfile::Step {
            left: vec![0.8, 0.4],
            right: vec![0.2, 1.6],
            position: 0.5,
            width: 0.05,
        })
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let cfg = config(8);
        let s0 = initialize(
            &cfg,
            &InitialData::new(DensityProfile::Uniform(vec![0.3, 0.9])),
        )
        .unwrap();
        let s1 = step(&cfg, &s0).unwrap();
        for (a, b) in s0.rho.iter().zip(&s1.state.rho) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        assert!(s1.state.v.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(s1.dissipation_diffusive, 0.0);
    }

    #[test]
    fn counter_diffusion_conserves_mass_and_dissipates() {
        let mut cfg = config(32);
        // The excess of E + dissipation over E₀ is first order in dt.
        cfg.cfl = 0.1;
        let out = run(&cfg, &counter_diffusion(), &mut ()).unwrap();
        assert!(
            out.stats.max_mass_drift < 1e-12,
            "{}",
            out.stats.max_mass_drift
        );
        assert!(out.ledger.dissipation_diffusive > 0.0);
        assert!(
            out.stats.max_energy_excess < 1e-4,
            "{}",
            out.stats.max_energy_excess
        );
        assert!(out.ledger.total() < out.stats.e0);
        assert_eq!(out.stats.floor_activations, 0);
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let mut cfg = config(8);
        cfg.t_end = 0.0;
        let init = counter_diffusion();
        let out = run(&cfg, &init, &mut ()).unwrap();
        assert_eq!(out.state, initialize(&cfg, &init).unwrap());
        assert_eq!(out.stats.steps, 0);
    }

    #[test]
    fn frames_are_emitted_on_cadence() {
        let mut cfg = config(8);
        cfg.t_end = 0.01;
        cfg.output_every = 0.004;
        let mut snaps = Snapshots::default();
        run(&cfg, &counter_diffusion(), &mut snaps).unwrap();
        let times: Vec<f64> = snaps.0.iter().map(|s| s.0).collect();
        assert_eq!(times.len(), 4, "{times:?}");
        assert!((times[1] - 0.004).abs() < 1e-15 && (times[3] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_profile_is_rejected() {
        let cfg = config(8);
        let init = InitialData::new(DensityProfile::Uniform(vec![0.3, 0.0]));
        assert!(matches!(
            initialize(&cfg, &init),
            Err(Error::InvalidProfile(_))
        ));
    }

    #[test]
    fn initial_energy_matches_free_energy_quadrature() {
        let cfg = config(16);
        let init = counter_diffusion();
        let s = initialize(&cfg, &init).unwrap();
        let (f, k) = energies(&cfg, &s).unwrap();
        let direct: f64 = cfg
            .grid
            .centers()
            .iter()
            .map(|x| crate::thermo::free_energy(&cfg.species, &init.density.at(*x)).unwrap())
            .sum::<f64>()
            * cfg.grid.dx();
        assert!((f - direct).abs() < 1e-13 * direct.abs());
        assert_eq!(k, 0.0);
    }
}
