use std::path::{Path, PathBuf};
use std::process::Command;

use steerdyn::commands::{self, Subject};
use steerdyn::load_config;
use steerdyn_core::emd::Architecture::{Feedback as FB, Feedforward as FF};

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../sample_eps.toml")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn steerdyn(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_steerdyn")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Sample config with `edits` applied as whole-line `key = value`
/// replacements, plus `extra` appended.
fn variant(dir: &Path, name: &str, edits: &[(&str, &str)], extra: &str) -> PathBuf {
    let mut text = std::fs::read_to_string(sample()).unwrap();
    for (key, value) in edits {
        let line = text.lines().find(|l| l.starts_with(&format!("{key} ="))).unwrap().to_string();
        text = text.replace(&line, &format!("{key} = {value}"));
    }
    text.push_str(extra);
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// FF with exact estimates, no lags and a pass-through velocity estimate.
const IDEAL_FF: &[(&str, &str)] = &[
    ("lambda_m_hat", "0.01"),
    ("l_d_hat", "60e-6"),
    ("l_q_hat", "60e-6"),
    ("r_hat", "0.02"),
    ("tau_c", "0.0"),
    ("tau_p", "0.0"),
    ("tau_omega", "0.0"),
];

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn kv<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}="))).unwrap()
}

#[test]
fn sample_config_validates() {
    let r = steerdyn(&["validate", "--config", sample().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("config ok"));
    load_config(&sample()).unwrap();
}

#[test]
fn every_violation_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "bad.toml", &[("j_h", "-1.0"), ("r", "-0.02"), ("tau_c", "-1e-4")], "");
    let r = steerdyn(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    for field in ["mechanical.j_h", "motor.r", "delays.tau_c"] {
        assert!(r.stderr.contains(field), "{field} missing from\n{}", r.stderr);
    }
    assert!(r.stderr.contains("3 invalid"));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[mechanical]\nj_h = 0.04\nb_h = oops\n").unwrap();
    let r = steerdyn(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("broken.toml:3:7"), "{}", r.stderr);

    std::fs::write(&path, std::fs::read_to_string(sample()).unwrap() + "\n[extra]\nx = 1\n").unwrap();
    let r = steerdyn(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("extra"), "{}", r.stderr);
}

#[test]
fn feedback_needs_gains() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(sample()).unwrap();
    let start = text.find("[pi_gains]").unwrap();
    let end = text.find("[assist]").unwrap();
    let stripped = format!("{}{}", &text[..start], &text[end..]);
    let path = dir.path().join("nogains.toml");
    std::fs::write(&path, &stripped).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(steerdyn(&["margins", "--config", p, "--arch", "fb"]).code, 1);
    assert_eq!(steerdyn(&["compare", "--config", p, "--out", dir.path().to_str().unwrap()]).code, 1);
    // without a request for feedback the config is usable
    assert_eq!(steerdyn(&["margins", "--config", p]).code, 0);

    std::fs::write(&path, stripped.replace("pade_order = 4", "pade_order = 4\narchitecture = \"fb\"")).unwrap();
    let r = steerdyn(&["validate", "--config", p]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("pi_gains"));
}

#[test]
fn usage_errors_exit_one() {
    let s = sample();
    let cfg = s.to_str().unwrap();
    assert_eq!(steerdyn(&["bode", "--config", cfg, "--subject", "Q"]).code, 1);
    assert_eq!(steerdyn(&["bode", "--config", cfg]).code, 1);
    assert_eq!(steerdyn(&["frobnicate"]).code, 1);
    assert_eq!(steerdyn(&["bode", "--config", cfg, "--subject", "A_t", "--grid", "1:10:50"]).code, 1);
    assert_eq!(steerdyn(&["bode", "--config", cfg, "--subject", "A_t", "--grid", "1:1000:10"]).code, 1);
    assert_eq!(steerdyn(&["sim", "--config", cfg, "--subject", "A_t", "--excitation", "ramp"]).code, 1);
    assert_eq!(steerdyn(&["validate", "--config", "/nonexistent/eps.toml"]).code, 1);
    let help = steerdyn(&["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("margins"));
    assert_eq!(steerdyn(&["--version"]).code, 0);
}

#[test]
fn ideal_feedforward_torque_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "ideal.toml", IDEAL_FF, "");
    let r = steerdyn(&["bode", "--config", cfg.to_str().unwrap(), "--subject", "A_t", "--arch", "ff"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with(commands::BODE_HEADER));
    for row in rows(&r.stdout) {
        assert!(row[1].abs() < 1e-9, "{row:?}");
    }

    let r = steerdyn(&["bode", "--config", cfg.to_str().unwrap(), "--subject", "ratio", "--arch", "ff"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for row in rows(&r.stdout) {
        assert!(row[1].abs() < 1e-9 && row[2].abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn bode_rows_follow_the_grid() {
    let s = sample();
    let cfg = load_config(&s).unwrap();
    let r = steerdyn(&["bode", "--config", s.to_str().unwrap(), "--subject", "Z_t", "--arch", "fb"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(rows(&r.stdout).len(), cfg.grid.len());

    let r = steerdyn(&["bode", "--config", s.to_str().unwrap(), "--subject", "Z_t", "--grid", "1:1000:25"]);
    let got = rows(&r.stdout);
    assert_eq!(got.len(), 76);
    assert_eq!(got[0][0], 1.0);
    assert_eq!(got[75][0], 1000.0);
}

#[test]
fn bode_csv_round_trips() {
    let s = sample();
    let cfg = load_config(&s).unwrap();
    for subject in Subject::ALL {
        for (arch, flag) in [(FF, "ff"), (FB, "fb")] {
            let r = steerdyn(&["bode", "--config", s.to_str().unwrap(), "--subject", subject.name(), "--arch", flag]);
            assert_eq!(r.code, 0, "{}", r.stderr);
            let table = rows(&r.stdout);
            let omegas: Vec<f64> = table.iter().map(|row| row[0]).collect();
            let again = commands::evaluate(&cfg, subject, arch, &omegas).unwrap();
            for (row, v) in table.iter().zip(again) {
                let mag = 20.0 * v.norm().log10();
                assert!((row[1] - mag).abs() <= 1e-9 * mag.abs().max(1.0), "{} {flag} {row:?}", subject.name());
                let dphi = (row[2] - v.arg().to_degrees()).rem_euclid(360.0);
                assert!(dphi.min(360.0 - dphi) < 1e-9, "{} {flag} {row:?}", subject.name());
            }
        }
    }
}

#[test]
fn outputs_are_deterministic() {
    let s = sample();
    let args = ["bode", "--config", s.to_str().unwrap(), "--subject", "W_r", "--arch", "ff"];
    assert_eq!(steerdyn(&args).stdout, steerdyn(&args).stdout);

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let r = steerdyn(&["compare", "--config", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    for f in commands::COMPARE_FILES {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn compare_bundle_shares_one_grid() {
    let s = sample();
    let dir = tempfile::tempdir().unwrap();
    let r = steerdyn(&["compare", "--config", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
    let omega = |csv: &str| rows(csv).iter().map(|r| r[0]).collect::<Vec<_>>();
    let ff = read("scaling_ff.csv");
    let fb = read("scaling_fb.csv");
    let eoltf = read("loop_eoltf.csv");
    assert_eq!(omega(&ff), omega(&fb));
    assert_eq!(omega(&ff), omega(&read("loop_mechanical.csv")));
    assert_eq!(omega(&ff), omega(&eoltf));
    assert!(eoltf.starts_with("omega_rad_s,ff_mag_db,ff_phase_deg,fb_mag_db,fb_phase_deg\n"));

    // integral action nulls the feedback disturbance path at low frequency
    let first = &rows(&fb)[0];
    assert!(first[1].abs() < 1e-3 && first[2].abs() < 0.1, "{first:?}");

    let margins = read("margins.txt");
    assert!(margins.contains("architecture=mechanical"));
    assert_eq!(kv(&margins, "ff_gain_margin_below_fb"), "true");
    assert_eq!(kv(&margins, "ff_phase_margin_below_fb"), "true");
}

#[test]
fn margins_report_and_exit_codes() {
    let s = sample();
    let r = steerdyn(&["margins", "--config", s.to_str().unwrap(), "--arch", "ff"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("FF steering loop: gain margin"));
    assert_eq!(kv(&r.stdout, "architecture"), "ff");
    assert_eq!(kv(&r.stdout, "loop_unstable"), "false");

    let dir = tempfile::tempdir().unwrap();
    let off = variant(dir.path(), "off.toml", &[("gain", "0.0")], "");
    let r = steerdyn(&["margins", "--config", off.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(kv(&r.stdout, "phase_margin_deg"), "undefined");
    assert_eq!(kv(&r.stdout, "gain_crossovers"), "0");

    let gm = |path: &Path| -> f64 {
        kv(&steerdyn(&["margins", "--config", path.to_str().unwrap(), "--arch", "fb"]).stdout, "gain_margin_db")
            .parse()
            .unwrap()
    };
    let double = variant(dir.path(), "double.toml", &[("gain", "0.36")], "");
    assert!((gm(&s) - gm(&double) - 6.0206).abs() < 1e-3);

    let hot = variant(dir.path(), "hot.toml", &[("gain", "2.0")], "");
    let r = steerdyn(&["margins", "--config", hot.to_str().unwrap(), "--arch", "ff"]);
    assert_eq!(r.code, 3, "{}", r.stdout);
    assert_eq!(kv(&r.stdout, "loop_unstable"), "true");
}

#[test]
fn feedback_step_settles_at_unity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "ideal.toml", IDEAL_FF, "");
    let r =
        steerdyn(&["sim", "--config", cfg.to_str().unwrap(), "--subject", "A_t", "--arch", "fb", "--duration", "0.2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("t,u,y\n"));
    let last = rows(&r.stdout).pop().unwrap();
    assert!((last[2] - 1.0).abs() < 1e-3, "{last:?}");
}

#[test]
fn sine_dwell_matches_analytic_at_midpoint() {
    let s = sample();
    let mid = load_config(&s).unwrap().grid.midpoint();
    let exc = format!("sine:{mid}");
    for (subject, arch) in [("A_t", "fb"), ("Z_t", "ff")] {
        let r = steerdyn(&[
            "sim",
            "--config",
            s.to_str().unwrap(),
            "--subject",
            subject,
            "--arch",
            arch,
            "--excitation",
            &exc,
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let mag: f64 = kv(&r.stderr, "dwell_mag_error_pct").parse().unwrap();
        let phase: f64 = kv(&r.stderr, "dwell_phase_error_deg").parse().unwrap();
        assert!(mag.abs() < 2.0 && phase.abs() < 2.0, "{subject} {arch}: {mag} % {phase} deg");
    }
}

#[test]
fn unstable_subject_lists_poles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant(dir.path(), "over.toml", &[("lambda_m_hat", "0.011")], "");
    let r = steerdyn(&["sim", "--config", cfg.to_str().unwrap(), "--subject", "Z_t", "--arch", "ff"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("poles:"), "{}", r.stderr);
    assert!(r.stdout.is_empty());
}

#[test]
fn files_land_in_out_dir() {
    let s = sample();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested");
    let r = steerdyn(&[
        "bode",
        "--config",
        s.to_str().unwrap(),
        "--subject",
        "W_t",
        "--arch",
        "ff",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("bode_W_t_ff.csv")).unwrap();
    assert!(csv.starts_with(commands::BODE_HEADER));
}

#[test]
fn sample_scaling_ratios_match_golden() {
    let s = sample();
    let dir = tempfile::tempdir().unwrap();
    let r = steerdyn(&["compare", "--config", s.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for f in ["scaling_ff.csv", "scaling_fb.csv"] {
        let want = rows(&std::fs::read_to_string(golden.join(f)).unwrap());
        let got = rows(&std::fs::read_to_string(dir.path().join(f)).unwrap());
        assert_eq!(want.len(), got.len());
        for (a, b) in want.iter().zip(&got) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-9 * a[k].abs().max(1.0), "{f}: {a:?} vs {b:?}");
            }
        }
        // the deviation from unity peaks near the mechanical modes
        let peak = got.iter().max_by(|a, b| a[1].abs().total_cmp(&b[1].abs())).unwrap();
        assert!(peak[1].abs() > 1.0 && (30.0..300.0).contains(&peak[0]), "{f}: {peak:?}");
    }
}
