use std::process::Command;

use hma_core::channel::{export_channels, ChannelModel};
use hma_core::geometry::{build_planar_layout, PlanarSpec};
use hma_core::harness::{parse_csv, run_experiment, ChannelSource, ScenarioConfig, Scheme, CSV_HEADER};
use hma_core::wavelength_for_ghz;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hma-sim"))
}

#[test]
fn power_subcommand_prints_breakdown() {
    let out = bin().args(["power", "--arch", "HMA", "--n", "256", "--m", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total_w          5.985600"), "{text}");

    let out = bin().args(["power", "--arch", "DPA", "--n", "64"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("332.820000"));

    let out = bin().args(["power", "--arch", "nope", "--n", "4"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(
        &cfg,
        "# two-wavelength aperture\naperture_z = 1\naperture_x = 1\nn_drops = 1\nn_channels_per_drop = 2\n\
         p_t_sweep_dbm_per_m2 = 0, 20, 10\narchitectures = HMA-FP, HMA-SMP, DPA-MRC\n",
    )
    .unwrap();
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let st = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&csv_a).args(["--jobs", "1"]).status().unwrap();
    assert!(st.success());
    let st = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&csv_b).args(["--jobs", "3"]).status().unwrap();
    assert!(st.success());
    let a = std::fs::read_to_string(&csv_a).unwrap();
    assert_eq!(a, std::fs::read_to_string(&csv_b).unwrap());
    assert!(a.starts_with(&CSV_HEADER.join(",")));
    assert_eq!(parse_csv(&a).unwrap().len(), 9);

    let csv_c = dir.path().join("c.csv");
    let st = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&csv_c).args(["--seed", "99"]).status().unwrap();
    assert!(st.success());
    assert_ne!(a, std::fs::read_to_string(&csv_c).unwrap());
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "k_users = 2\nm_chains = 1\narchitectures = HMA-FP\n").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("m_chains"));

    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.cfg"))
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));
}

#[test]
fn imported_channels_set_trial_count() {
    let dir = tempfile::tempdir().unwrap();
    let lam = wavelength_for_ghz(3.0);
    let layout = build_planar_layout(&PlanarSpec::square_hma(1.0, 1, 1, lam)).unwrap();
    let model = ChannelModel::new(&layout, 3.0, false).unwrap();
    let chans: Vec<_> = (0..3).map(|s| model.draw_with_gains(&[1e-11], s)).collect();
    let path = dir.path().join("h.txt");
    export_channels(&chans, &path).unwrap();

    let cfg = ScenarioConfig {
        aperture_z: 1.0,
        aperture_x: 1.0,
        n_drops: 7,
        n_channels_per_drop: 5,
        p_t_sweep: (20.0, 20.0, 1.0),
        architectures: vec![Scheme::HmaFp, Scheme::HmaSmp],
        channel_source: ChannelSource::File(path.clone()),
        ..ScenarioConfig::default()
    };
    let rows = run_experiment(&cfg, Some(2)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.n_trials == 3 && r.failures == 0));

    // a phased-array baseline sees 4 patches, not 16 cells
    let mismatched = ScenarioConfig {
        architectures: vec![Scheme::DpaMrc],
        ..cfg
    };
    assert!(run_experiment(&mismatched, None).is_err());
}

#[test]
fn default_geometry_single_user_rows() {
    let cfg = ScenarioConfig {
        n_drops: 1,
        n_channels_per_drop: 1,
        ..ScenarioConfig::default()
    };
    let rows = run_experiment(&cfg, None).unwrap();
    assert_eq!(rows.len(), cfg.architectures.len() * cfg.sweep_points().len());
    assert!(rows.iter().all(|r| r.failures == 0 && r.mean_rate >= 0.0));
}
