use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_msmix");

fn msmix(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/counter_diffusion.ini")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    (header, rows)
}

const UNIFORM: &str = "\
[species]
n = 2
law = log, log
masses = 1, 2
vbar0 = 1, 0.5
g0 = 0, 0
p0 = 1

[friction]
f_c = 1
p1 = 0.1

[sim]
L = 1
n_cells = 8
t_end = 0.01
output_every = 0.005

[init]
profile = uniform
rho = 0.3, 0.9
";

#[test]
fn uniform_scenario_gives_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("u.ini");
    let csv = dir.path().join("u.csv");
    std::fs::write(&cfg, UNIFORM).unwrap();
    let out = msmix(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        &format!("output.csv={}", csv.display()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&csv);
    assert_eq!(
        header.join(","),
        "t,x,rho_1,rho_2,v,p,w_1,w_2,free_energy,kinetic,diss_diffusive,diss_viscous"
    );
    assert_eq!(rows.len(), 8 * 3);
    for col in 2..header.len() {
        let first = rows[0][col];
        for r in &rows {
            assert!(
                (r[col] - first).abs() <= 1e-14 * (1.0 + first.abs()),
                "column {} varies",
                header[col]
            );
        }
    }
}

#[test]
fn csv_numbers_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("u.ini");
    std::fs::write(&cfg, UNIFORM).unwrap();
    let out = msmix(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let field = text.lines().nth(1).unwrap().split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn missing_species_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.ini");
    let text = UNIFORM
        .split("[friction]")
        .nth(1)
        .unwrap()
        .replace("[init]\nprofile = uniform\nrho = 0.3, 0.9\n", "");
    std::fs::write(&cfg, format!("[friction]{text}")).unwrap();
    let out = msmix(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[species]"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let out = msmix(&[
        "run",
        "--config",
        demo_config().to_str().unwrap(),
        "--set",
        "sim.tend=1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tend"));
}

#[test]
fn shipped_demo_has_monotone_free_energy() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cd.csv");
    let out = msmix(&[
        "run",
        "--config",
        demo_config().to_str().unwrap(),
        "--set",
        "sim.t_end=0.02",
        "--set",
        "sim.output_every=0.002",
        "--set",
        &format!("output.csv={}", csv.display()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, rows) = read_csv(&csv);
    let fe = header.iter().position(|h| h == "free_energy").unwrap();
    let mut frames: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[fe])).collect();
    frames.dedup();
    assert!(frames.len() >= 10);
    let e0 = frames[0].1;
    for pair in frames.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 1e-6 * e0.abs(),
            "free energy rose: {pair:?}"
        );
    }
    assert!(frames.last().unwrap().1 < e0);
}

#[test]
fn verify_thermo_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("thermo.csv");
    let out = msmix(&[
        "verify",
        "--suite",
        "thermo",
        "--seed",
        "42",
        "--samples",
        "1000",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("summary,thermo,,,,,,,true"));
}

#[test]
fn verify_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (p, threads) in [(&a, "1"), (&b, "3")] {
        let out = Command::new(BIN)
            .env("MSMIX_THREADS", threads)
            .args([
                "verify",
                "--suite",
                "all",
                "--seed",
                "7",
                "--samples",
                "150",
                "--report",
                p.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn constant_friction_control_reports_violations_without_gating() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("robust.csv");
    let out = msmix(&[
        "verify",
        "--suite",
        "robust",
        "--seed",
        "3",
        "--samples",
        "500",
        "--report",
        report.to_str().unwrap(),
        "--friction",
        "constant",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("check,robust,low_pressure_matrix_bound,"))
        .unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[3], "false", "non-gating");
    assert!(
        fields[5].parse::<usize>().unwrap() > 0,
        "violations are reported: {row}"
    );
    assert!(text.contains("friction=constant"));
}

#[test]
fn chart_state_on_reference_surface_is_its_own_coordinate() {
    let out = msmix(&[
        "chart",
        "--config",
        demo_config().to_str().unwrap(),
        "--state",
        "0.5,1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("s           = 1e0"), "{text}");
    assert!(text.contains("w           = 5e-1, 1e0"), "{text}");
}

#[test]
fn chart_point_matches_the_library() {
    use msmix::chart::{forward_chart, NormalizedState};
    let out = msmix(&[
        "chart",
        "--config",
        demo_config().to_str().unwrap(),
        "--point",
        "3.5,0.4,1.2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let x_line = text.lines().find(|l| l.starts_with("X ")).unwrap();
    let printed: Vec<f64> = x_line
        .split('=')
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.trim().parse().unwrap())
        .collect();
    let sp =
        msmix::thermo::SpeciesSet::log_mixture(&[1.0, 2.0], &[1.0, 0.5], &[2.0, 2.0], 1.0).unwrap();
    let w = NormalizedState::project(&sp, &[0.4, 1.2]).unwrap();
    assert_eq!(printed, forward_chart(&sp, 3.5, &w).unwrap());
}

#[test]
fn chart_rejects_states_outside_the_cone() {
    let out = msmix(&[
        "chart",
        "--config",
        demo_config().to_str().unwrap(),
        "--state",
        "-0.5,1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = msmix(&[
        "chart",
        "--config",
        demo_config().to_str().unwrap(),
        "--point",
        "1,0.5,2",
    ]);
    assert_eq!(out.status.code(), Some(3), "w off the reference surface");
}
