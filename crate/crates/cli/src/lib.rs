//! The `msmix` command line: scenario runs, the verification harness and a
//! chart inspector.

pub mod config;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use msmix::chart::{chart_velocity, forward_chart, inverse_chart, quotients, NormalizedState};
use msmix::sim1d::{run as run_sim, Frame, Sink};
use msmix::thermo::SpeciesSet;
use msmix::transport::FrictionKind;
use msmix::verify::{fmt17, run_suite, Suite, VerifyOptions};

use config::{apply_override, parse_raw, ConfigError, ScenarioConfig};

/// Exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A verification check failed, or a run failed for a reason other than
    /// the energy audit (time-step underflow, non-finite state, I/O).
    pub const FAILURE: i32 = 1;
    pub const AUDIT: i32 = 2;
    pub const CONFIG: i32 = 3;
}

fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut raw = parse_raw(&text)?;
    for o in overrides {
        apply_override(&mut raw, o)?;
    }
    ScenarioConfig::from_raw(&raw)
}

/// Writes one CSV row per cell and frame.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    n: usize,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, n_species: usize) -> Self {
        CsvSink {
            writer: csv::Writer::from_writer(out),
            n: n_species,
            header_written: false,
        }
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "x".to_string()];
        h.extend((1..=n).map(|i| format!("rho_{i}")));
        h.extend(["v".to_string(), "p".to_string()]);
        h.extend((1..=n).map(|i| format!("w_{i}")));
        h.extend(["free_energy", "kinetic", "diss_diffusive", "diss_viscous"].map(String::from));
        h
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

impl<W: Write> Sink for CsvSink<W> {
    fn frame(&mut self, f: &Frame<'_>) -> msmix::Result<()> {
        let io_err = |e: csv::Error| msmix::Error::Config(format!("writing CSV: {e}"));
        if !self.header_written {
            self.writer
                .write_record(Self::header(self.n))
                .map_err(io_err)?;
            self.header_written = true;
        }
        let l = f.ledger;
        for c in 0..f.x.len() {
            let mut row = Vec::with_capacity(2 * self.n + 8);
            row.push(f.t);
            row.push(f.x[c]);
            row.extend(&f.rho[c]);
            row.push(f.v[c]);
            row.push(f.p[c]);
            row.extend(&f.w[c]);
            row.extend([
                l.free_energy,
                l.kinetic,
                l.dissipation_diffusive,
                l.dissipation_viscous,
            ]);
            self.writer
                .write_record(row.iter().map(|v| fmt17(*v)))
                .map_err(io_err)?;
        }
        Ok(())
    }
}

/// `msmix run`.
pub fn cmd_run(config: &Path, overrides: &[String]) -> i32 {
    let sim = match load(config, overrides).and_then(|c| c.simulation()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("msmix run: {e}");
            return exit::CONFIG;
        }
    };
    let n = sim.config.species.len();
    let out: Box<dyn Write> = match &sim.csv {
        Some(p) => match File::create(p) {
            Ok(f) => Box::new(io::BufWriter::new(f)),
            Err(e) => {
                eprintln!("msmix run: cannot create {}: {e}", p.display());
                return exit::CONFIG;
            }
        },
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    };
    let mut sink = CsvSink::new(out, n);
    let result = run_sim(&sim.config, &sim.init, &mut sink);
    if let Err(e) = sink.flush() {
        eprintln!("msmix run: {e}");
        return exit::FAILURE;
    }
    match result {
        Ok(o) => {
            let s = &o.stats;
            eprintln!(
                "msmix run: {} steps to t = {}; mass drift {:.3e}, energy excess {:.3e} E0, free-energy rise {:.3e} E0, floor activations {}",
                s.steps, o.state.t, s.max_mass_drift, s.max_energy_excess, s.max_free_energy_increase, s.floor_activations
            );
            exit::OK
        }
        Err(e @ msmix::Error::AuditFailure { .. }) => {
            eprintln!("msmix run: {e}");
            exit::AUDIT
        }
        Err(e @ (msmix::Error::InvalidProfile(_) | msmix::Error::NotInterior(_))) => {
            eprintln!("msmix run: {e}");
            exit::CONFIG
        }
        Err(e) => {
            eprintln!("msmix run: {e}");
            exit::FAILURE
        }
    }
}

/// `msmix verify`.
pub fn cmd_verify(
    suite: Suite,
    seed: u64,
    samples: usize,
    report: &Path,
    friction: FrictionKind,
) -> i32 {
    let mut opts = VerifyOptions::new(seed, samples);
    opts.friction = friction;
    let rep = match run_suite(suite, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("msmix verify: {e}");
            return exit::FAILURE;
        }
    };
    if let Err(e) = std::fs::write(report, rep.to_csv()) {
        eprintln!("msmix verify: cannot write {}: {e}", report.display());
        return exit::FAILURE;
    }
    for c in rep.checks.iter().filter(|c| !c.passed()) {
        let tag = if c.gating { "FAIL" } else { "note" };
        eprintln!(
            "{tag} {}/{}: {} of {} samples beyond {:e} (worst {:e})",
            c.suite, c.name, c.failures, c.count, c.tolerance, c.worst
        );
    }
    for (suite, e) in &rep.errors {
        eprintln!("error {suite}: {e}");
    }
    let ok = rep.passed();
    eprintln!(
        "msmix verify: suite {} {}",
        suite.name(),
        if ok { "passed" } else { "FAILED" }
    );
    if ok {
        exit::OK
    } else {
        exit::FAILURE
    }
}

/// What `msmix chart` was asked to show.
pub enum ChartQuery {
    /// Densities `ρ`: report `(s, w)`.
    State(Vec<f64>),
    /// `(s, w)`: report `X(s, w)`.
    Point(f64, Vec<f64>),
}

fn line(out: &mut String, label: &str, v: &[f64]) {
    let vals: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    out.push_str(&format!("{label:<12}= {}\n", vals.join(", ")));
}

/// Text report for one chart query.
pub fn chart_report(sp: &SpeciesSet, q: &ChartQuery) -> Result<String, ConfigError> {
    let n = sp.len();
    let mut out = String::new();
    let (s, w, x) = match q {
        ChartQuery::State(rho) => {
            if rho.len() != n {
                return Err(ConfigError(format!(
                    "--state has {} entries, the species set has {n}",
                    rho.len()
                )));
            }
            let cp = inverse_chart(sp, rho)?;
            let x = forward_chart(sp, cp.s, &cp.w)?;
            let back = x
                .iter()
                .zip(rho)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max);
            line(&mut out, "rho", rho);
            line(&mut out, "s", &[cp.s]);
            line(&mut out, "w", cp.w.as_slice());
            line(&mut out, "round_trip", &[back]);
            (cp.s, cp.w, x)
        }
        ChartQuery::Point(s, w) => {
            if w.len() != n {
                return Err(ConfigError(format!(
                    "--point has {} weights, the species set has {n}",
                    w.len()
                )));
            }
            if !(*s > 0.0 && s.is_finite()) {
                return Err(ConfigError(format!("s must be positive, got {s}")));
            }
            sp.check_interior(w)?;
            let v: f64 = sp.vbar0().iter().zip(w).map(|(a, b)| a * b).sum();
            if (v - 1.0).abs() > 1e-9 {
                return Err(ConfigError(format!("w is not on S0: vbar0 . w = {v}")));
            }
            let w = NormalizedState::project(sp, w)?;
            let x = forward_chart(sp, *s, &w)?;
            line(&mut out, "s", &[*s]);
            line(&mut out, "w", w.as_slice());
            line(&mut out, "X", &x);
            line(&mut out, "pressure", &[sp.pressure(&x)?]);
            (*s, w, x)
        }
    };
    let q = quotients(sp, s, &w)?;
    line(&mut out, "F", &q.f());
    line(&mut out, "F_lower", &q.lower());
    line(&mut out, "F_upper", &q.upper());
    line(&mut out, "dX/ds", &chart_velocity(sp, &x)?);
    Ok(out)
}

/// `msmix chart`.
pub fn cmd_chart(config: &Path, query: &ChartQuery) -> i32 {
    let result = load(config, &[])
        .and_then(|c| c.species_set())
        .and_then(|sp| chart_report(&sp, query));
    match result {
        Ok(text) => {
            print!("{text}");
            exit::OK
        }
        Err(e) => {
            eprintln!("msmix chart: {e}");
            exit::CONFIG
        }
    }
}
