//! End-to-end behaviour of the finite-volume scheme.

use msmix::sim1d::{run, DensityProfile, Frame, Grid1D, InitialData, SimConfig, Sink, Stepping};
use msmix::thermo::SpeciesSet;
use msmix::transport::{FrictionKind, FrictionModel};

fn config(n_cells: usize, t_end: f64) -> SimConfig {
    let sp = SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 0.5], &[2.0, 2.0], 1.0).unwrap();
    let fr = FrictionModel::new(&sp, 1.0, 0.1, 0.5, FrictionKind::Singular).unwrap();
    let mut cfg = SimConfig::new(sp, fr, Grid1D::new(1.0, n_cells).unwrap());
    cfg.t_end = t_end;
    cfg
}

#[derive(Default)]
struct Ledgers(Vec<(f64, f64, f64, f64)>);

impl Sink for Ledgers {
    fn frame(&mut self, f: &Frame<'_>) -> msmix::Result<()> {
        let l = f.ledger;
        self.0
            .push((f.t, l.free_energy, l.kinetic, l.dissipation_viscous));
        Ok(())
    }
}

/// Uniform densities with a sheared velocity: at first the only energy
/// exchange is viscous, so the kinetic energy lost matches `∫ S:∇v`.
#[test]
fn viscous_decay_matches_viscous_dissipation() {
    let mut cfg = config(128, 2e-3);
    cfg.eta_shear = 0.05;
    let mut init = InitialData::new(DensityProfile::Uniform(vec![0.5, 1.0]));
    init.velocity_amplitude = 1e-2;
    let mut led = Ledgers::default();
    run(&cfg, &init, &mut led).unwrap();
    let (_, _, k0, d0) = led.0[0];
    let (_, _, k1, d1) = *led.0.last().unwrap();
    let lost = k0 - k1;
    let dissipated = d1 - d0;
    assert!(lost > 0.0);
    assert!(
        ((lost - dissipated) / dissipated).abs() <= 0.05,
        "kinetic loss {lost:e} vs dissipation {dissipated:e}"
    );
}

#[test]
fn entropic_and_primitive_stepping_agree() {
    let init = InitialData::new(DensityProfile::Step {
        left: vec![0.8, 0.4],
        right: vec![0.2, 1.6],
        position: 0.5,
        width: 0.1,
    });
    let mut a = config(64, 5e-3);
    a.stepping = Stepping::Primitive;
    let mut b = a.clone();
    b.stepping = Stepping::Entropic;
    let ra = run(&a, &init, &mut ()).unwrap();
    let rb = run(&b, &init, &mut ()).unwrap();
    let gap: f64 = ra
        .state
        .rho
        .iter()
        .zip(&rb.state.rho)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum::<f64>()
        / 64.0;
    let change: f64 = {
        let r0: Vec<Vec<f64>> = (0..64)
            .map(|c| init.density.at((c as f64 + 0.5) / 64.0))
            .collect();
        r0.iter()
            .zip(&ra.state.rho)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
            .sum::<f64>()
            / 64.0
    };
    assert!(
        gap < 0.1 * change,
        "steppings differ by {gap:e}, evolution {change:e}"
    );
}

#[test]
fn gravity_like_forcing_does_work_and_conserves_mass() {
    let mut cfg = config(32, 0.01);
    cfg.b = vec![1.0, -1.0];
    let init = InitialData::new(DensityProfile::Uniform(vec![0.5, 1.0]));
    let out = run(&cfg, &init, &mut ()).unwrap();
    assert!(out.stats.max_mass_drift <= 1e-12);
    assert!(out.ledger.work_external != 0.0);
    // Forcing can raise E; the budget is E - E0 + D_diff/2 + D_visc <= ∫ Gronwall term.
    let l = &out.ledger;
    let budget = l.total() - out.stats.e0 + 0.5 * l.dissipation_diffusive + l.dissipation_viscous
        - l.gronwall_rhs;
    assert!(
        budget <= 1e-6 * out.stats.e0.abs(),
        "budget excess {budget:e}"
    );
}
