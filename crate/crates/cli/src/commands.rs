//! Analysis commands. Each returns its output instead of printing so the
//! binary and the tests share one code path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use steerdyn_core::closed_loop::{assist_loop_at, eoltf, steering_margins, torque_scaling, Eoltf, TorqueScaling};
use steerdyn_core::emd::{Architecture, EmdResponse};
use steerdyn_core::mech::{two_mass, TwoMassModel};
use steerdyn_core::sim::{integrate, sine_dwell_frf_with, to_state_space, Signal};
use steerdyn_core::tf::{DelayRational, FrequencyGrid, FrequencyResponse, MarginReport, MIN_POINTS_PER_DECADE};
use steerdyn_core::{fmt17, Complex, Error};

use crate::config::SystemConfig;
use crate::error::CliError;

type C = Complex<f64>;
type Tf = DelayRational<f64>;

/// Header of every Bode CSV.
pub const BODE_HEADER: &str = "omega_rad_s,mag_db,phase_deg";

/// Files written by [`compare`].
pub const COMPARE_FILES: [&str; 5] =
    ["scaling_ff.csv", "scaling_fb.csv", "loop_mechanical.csv", "loop_eoltf.csv", "margins.txt"];

const MAX_SIM_STEPS: f64 = 5e6;

/// Text produced by a command plus its exit code.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    At,
    AOmega,
    Zt,
    Zr,
    Zd,
    Wt,
    Wr,
    Wd,
    Ratio,
}

impl Subject {
    pub const ALL: [Subject; 9] = [
        Subject::At,
        Subject::AOmega,
        Subject::Zt,
        Subject::Zr,
        Subject::Zd,
        Subject::Wt,
        Subject::Wr,
        Subject::Wd,
        Subject::Ratio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subject::At => "A_t",
            Subject::AOmega => "A_omega",
            Subject::Zt => "Z_t",
            Subject::Zr => "Z_r",
            Subject::Zd => "Z_d",
            Subject::Wt => "W_t",
            Subject::Wr => "W_r",
            Subject::Wd => "W_d",
            Subject::Ratio => "ratio",
        }
    }
}

impl FromStr for Subject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subject::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Subject::ALL.iter().map(|x| x.name()).collect();
            format!("unknown subject '{s}' (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    Step,
    Sine(f64),
}

impl FromStr for Excitation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "step" {
            return Ok(Excitation::Step);
        }
        let w = s
            .strip_prefix("sine:")
            .and_then(|w| w.parse::<f64>().ok())
            .ok_or_else(|| format!("excitation must be 'step' or 'sine:<rad/s>', got '{s}'"))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(format!("sine frequency must be finite and > 0, got {w}"));
        }
        Ok(Excitation::Sine(w))
    }
}

/// Parses `min:max:ppd` under the same rules as the `[grid]` section.
pub fn parse_grid(spec: &str) -> Result<FrequencyGrid<f64>, CliError> {
    let bad = || CliError::Usage(format!("--grid expects min:max:ppd, got '{spec}'"));
    let parts: Vec<f64> =
        spec.split(':').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [min, max, ppd] = parts[..] else { return Err(bad()) };
    if !(min.is_finite() && min > 0.0 && max.is_finite() && max >= 100.0 * min) {
        return Err(CliError::Usage("--grid must span at least two decades with min > 0".into()));
    }
    if !(ppd.is_finite() && ppd >= MIN_POINTS_PER_DECADE) {
        return Err(CliError::Usage("--grid needs at least 20 points per decade".into()));
    }
    FrequencyGrid::with_density(min, max, ppd).map_err(|e| CliError::Usage(e.to_string()))
}

/// `--arch`, then `model.architecture`, then feedback if gains are present.
pub fn resolve_architecture(cfg: &SystemConfig, flag: Option<Architecture>) -> Result<Architecture, CliError> {
    let arch = flag.or(cfg.architecture).unwrap_or(if cfg.gains.is_some() {
        Architecture::Feedback
    } else {
        Architecture::Feedforward
    });
    if arch == Architecture::Feedback && cfg.gains.is_none() {
        return Err(CliError::Usage("pi_gains: required for the feedback architecture".into()));
    }
    Ok(arch)
}

/// Exact analytic pipeline for one architecture.
struct Pipeline {
    emd: EmdResponse<f64>,
    e: Eoltf<f64>,
    ts: TorqueScaling<f64>,
}

impl Pipeline {
    fn new(cfg: &SystemConfig, arch: Architecture) -> Result<Self, CliError> {
        let mech = mechanics(cfg)?;
        let model = cfg.drive(arch).ok_or(Error::MissingGains)?;
        let emd = model.closed_form()?;
        Ok(Self { e: eoltf(&mech, &emd)?, ts: torque_scaling(&mech, &emd)?, emd })
    }

    fn identity(cfg: &SystemConfig) -> Result<Self, CliError> {
        let mech = mechanics(cfg)?;
        let emd = EmdResponse::identity();
        Ok(Self { e: eoltf(&mech, &emd)?, ts: torque_scaling(&mech, &emd)?, emd })
    }

    fn at(&self, subject: Subject, w: f64) -> Result<C, Error> {
        Ok(match subject {
            Subject::At => self.emd.eval_jw(w)?[0],
            Subject::AOmega => self.emd.eval_jw(w)?[1],
            Subject::Zt => self.e.eval_jw(w)?[0],
            Subject::Zr => self.e.eval_jw(w)?[1],
            Subject::Zd => self.e.eval_jw(w)?[2],
            Subject::Wt => self.ts.eval_jw(w)?[0],
            Subject::Wr => self.ts.eval_jw(w)?[1],
            Subject::Wd => self.ts.eval_jw(w)?[2],
            Subject::Ratio => {
                let a_t = self.emd.eval_jw(w)?[0];
                if a_t.norm() == 0.0 {
                    return Err(Error::DivisionByZero { what: "A_t", omega: w });
                }
                self.ts.eval_jw(w)?[0] / a_t
            }
        })
    }

    fn response(&self, subject: Subject, grid: &FrequencyGrid<f64>) -> Result<FrequencyResponse<f64>, Error> {
        FrequencyResponse::from_fn(grid, |w| self.at(subject, w))
    }
}

/// Exact analytic value of `subject` at each frequency in `omegas`.
pub fn evaluate(cfg: &SystemConfig, subject: Subject, arch: Architecture, omegas: &[f64]) -> Result<Vec<C>, CliError> {
    let p = Pipeline::new(cfg, arch)?;
    Ok(omegas.iter().map(|&w| p.at(subject, w)).collect::<Result<_, _>>()?)
}

fn mechanics(cfg: &SystemConfig) -> Result<TwoMassModel<f64>, CliError> {
    Ok(two_mass(&cfg.mechanical, cfg.provenance)?)
}

/// Bode table: magnitude in dB and unwrapped phase in degrees.
pub fn bode_csv(fr: &FrequencyResponse<f64>) -> String {
    bode_table(&[fr], &[""])
}

fn bode_table(frs: &[&FrequencyResponse<f64>], prefixes: &[&str]) -> String {
    let mut out = String::from("omega_rad_s");
    for p in prefixes {
        let _ = write!(out, ",{p}mag_db,{p}phase_deg");
    }
    out.push('\n');
    let cols: Vec<(Vec<f64>, Vec<f64>)> = frs.iter().map(|f| (f.magnitude_db(), f.phase_unwrapped_deg())).collect();
    for (i, &w) in frs[0].grid().omegas().iter().enumerate() {
        out.push_str(&fmt17(w));
        for (mag, ph) in &cols {
            let _ = write!(out, ",{},{}", fmt17(mag[i]), fmt17(ph[i]));
        }
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("cannot create {}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
}

pub fn bode(cfg: &SystemConfig, subject: Subject, arch: Architecture, out: Option<&Path>) -> Result<Outcome, CliError> {
    let fr = Pipeline::new(cfg, arch)?.response(subject, &cfg.grid)?;
    let csv = bode_csv(&fr);
    match out {
        Some(dir) => {
            let name = format!("bode_{}_{}.csv", subject.name(), arch.tag());
            write_file(dir, &name, &csv)?;
            Ok(Outcome { stdout: format!("wrote {}\n", dir.join(name).display()), ..Outcome::default() })
        }
        None => Ok(Outcome { stdout: csv, ..Outcome::default() }),
    }
}

fn describe(label: &str, r: &MarginReport<f64>) -> String {
    let gm = match (r.gain_margin_db.is_finite(), r.phase_crossover_rad_s) {
        (true, Some(w)) => format!("gain margin {:.2} dB at {:.4} rad/s", r.gain_margin_db, w),
        _ => "gain margin infinite (no phase crossover)".to_string(),
    };
    let pm = match (r.phase_margin_deg, r.gain_crossover_rad_s) {
        (Some(pm), Some(w)) => format!("phase margin {pm:.2} deg at {w:.4} rad/s"),
        _ => "phase margin undefined (no gain crossover)".to_string(),
    };
    format!("{label} steering loop: {gm}, {pm}")
}

pub fn steering_report(cfg: &SystemConfig, arch: Architecture) -> Result<MarginReport<f64>, CliError> {
    let p = Pipeline::new(cfg, arch)?;
    Ok(steering_margins(&p.e, &cfg.assist, &cfg.grid)?)
}

pub fn margins(cfg: &SystemConfig, arch: Architecture) -> Result<Outcome, CliError> {
    let r = steering_report(cfg, arch)?;
    let unstable = r.loop_unstable();
    let stdout =
        format!("{}\n{}loop_unstable={unstable}\n", describe(&arch.tag().to_uppercase(), &r), r.to_key_values());
    let stderr = if unstable { "closed steering loop is unstable\n".to_string() } else { String::new() };
    Ok(Outcome { stdout, stderr, code: if unstable { 3 } else { 0 } })
}

/// FF/FB comparison bundle written to `out`.
pub fn compare(cfg: &SystemConfig, out: &Path) -> Result<Outcome, CliError> {
    if cfg.gains.is_none() {
        return Err(CliError::Usage("pi_gains: required for the feedback architecture".into()));
    }
    let grid = &cfg.grid;
    let ff = Pipeline::new(cfg, Architecture::Feedforward)?;
    let fb = Pipeline::new(cfg, Architecture::Feedback)?;
    let bare = Pipeline::identity(cfg)?;
    let loop_fr = |p: &Pipeline| FrequencyResponse::from_fn(grid, |w| assist_loop_at(&p.e, &cfg.assist, w));

    write_file(out, COMPARE_FILES[0], &bode_csv(&ff.response(Subject::Ratio, grid)?))?;
    write_file(out, COMPARE_FILES[1], &bode_csv(&fb.response(Subject::Ratio, grid)?))?;
    write_file(out, COMPARE_FILES[2], &bode_csv(&loop_fr(&bare)?))?;
    let (lf, lb) = (loop_fr(&ff)?, loop_fr(&fb)?);
    write_file(out, COMPARE_FILES[3], &bode_table(&[&lf, &lb], &["ff_", "fb_"]))?;

    let mech = steering_margins(&bare.e, &cfg.assist, grid)?.with_tag("mechanical");
    let rf = steering_margins(&ff.e, &cfg.assist, grid)?;
    let rb = steering_margins(&fb.e, &cfg.assist, grid)?;
    let below = |a: &MarginReport<f64>, b: &MarginReport<f64>| {
        let gm = a.gain_margin_db < b.gain_margin_db;
        let pm = matches!((a.phase_margin_deg, b.phase_margin_deg), (Some(x), Some(y)) if x < y);
        (gm, pm)
    };
    let (gm, pm) = below(&rf, &rb);
    let mut text = String::new();
    for r in [&mech, &rf, &rb] {
        text.push_str(&r.to_key_values());
        text.push('\n');
    }
    let _ = writeln!(text, "ff_gain_margin_below_fb={gm}\nff_phase_margin_below_fb={pm}");
    write_file(out, COMPARE_FILES[4], &text)?;

    let mut stdout = String::new();
    for (label, r) in [("MECHANICAL", &mech), ("FF", &rf), ("FB", &rb)] {
        let _ = writeln!(stdout, "{}", describe(label, r));
    }
    for f in COMPARE_FILES {
        let _ = writeln!(stdout, "wrote {}", out.join(f).display());
    }
    Ok(Outcome { stdout, ..Outcome::default() })
}

/// Fully rational subject with every lag replaced by a Pade approximant.
pub fn rational_subject(cfg: &SystemConfig, subject: Subject, arch: Architecture) -> Result<Tf, CliError> {
    let model = cfg.drive(arch).ok_or(Error::MissingGains)?;
    let (a_t, a_w) = model.rationalized(cfg.pade_order)?;
    let emd = EmdResponse::symbolic(Some(arch), a_t.clone(), a_w.clone());
    let mech = mechanics(cfg)?;
    let pick = |set: Option<&[Tf; 3]>, i: usize| -> Result<Tf, CliError> {
        set.map(|s| s[i].clone()).ok_or(CliError::Compute(Error::NeedsGrid))
    };
    Ok(match subject {
        Subject::At => a_t,
        Subject::AOmega => a_w,
        Subject::Zt => pick(eoltf(&mech, &emd)?.symbolic(), 0)?,
        Subject::Zr => pick(eoltf(&mech, &emd)?.symbolic(), 1)?,
        Subject::Zd => pick(eoltf(&mech, &emd)?.symbolic(), 2)?,
        Subject::Wt => pick(torque_scaling(&mech, &emd)?.symbolic(), 0)?,
        Subject::Wr => pick(torque_scaling(&mech, &emd)?.symbolic(), 1)?,
        Subject::Wd => pick(torque_scaling(&mech, &emd)?.symbolic(), 2)?,
        Subject::Ratio => pick(torque_scaling(&mech, &emd)?.symbolic(), 0)?.mul(&a_t.inv()?),
    })
}

pub fn sim(
    cfg: &SystemConfig,
    subject: Subject,
    arch: Architecture,
    excitation: Excitation,
    duration: Option<f64>,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let tf = rational_subject(cfg, subject, arch)?;
    let mut fastest = 0.0f64;
    if tf.den().degree() > 0 {
        let report = tf.poles_and_stability()?;
        if !report.stable {
            let mut msg = format!("{} ({}) is not stable; poles:", subject.name(), arch.tag());
            for p in &report.poles {
                let _ = write!(msg, "\n  {} {:+}j", fmt17(p.re), fmt17(p.im));
            }
            return Err(CliError::Unstable(msg));
        }
        fastest = report.poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    }
    let ss = to_state_space(&tf, cfg.pade_order)?;

    let (signal, duration, h_signal) = match excitation {
        Excitation::Step => {
            let t = duration.unwrap_or(1.0);
            (Signal::Step { amplitude: 1.0 }, t, t / 1000.0)
        }
        Excitation::Sine(w) => {
            let period = std::f64::consts::TAU / w;
            (Signal::Sine { amplitude: 1.0, omega: w }, duration.unwrap_or(15.0 * period), period / 200.0)
        }
    };
    if !(duration.is_finite() && duration > 0.0) {
        return Err(CliError::Usage(format!("--duration must be finite and > 0, got {duration}")));
    }
    let h = if fastest > 0.0 { h_signal.min(0.5 / fastest) } else { h_signal };
    if duration / h > MAX_SIM_STEPS {
        return Err(CliError::Usage(format!(
            "{duration} s at step {h:e} s exceeds {MAX_SIM_STEPS:e} steps; shorten --duration"
        )));
    }
    let traj = integrate(&ss, &signal, h, duration)?;

    let mut stderr = String::new();
    for w in &traj.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if let Excitation::Sine(w) = excitation {
        let analytic = Pipeline::new(cfg, arch)?.at(subject, w)?;
        let grid = FrequencyGrid::new(vec![w])?;
        let dwell = sine_dwell_frf_with(&ss, &grid, &cfg.dwell)?;
        let measured = dwell.response.values()[0];
        let q = measured / analytic;
        let _ = writeln!(stderr, "dwell_omega_rad_s={w}");
        let _ = writeln!(stderr, "dwell_mag_error_pct={}", (q.norm() - 1.0) * 100.0);
        let _ = writeln!(stderr, "dwell_phase_error_deg={}", q.arg().to_degrees());
    }

    let csv = traj.to_csv();
    match out {
        Some(dir) => {
            let name = format!("sim_{}_{}.csv", subject.name(), arch.tag());
            write_file(dir, &name, &csv)?;
            Ok(Outcome { stdout: format!("wrote {}\n", dir.join(name).display()), stderr, code: 0 })
        }
        None => Ok(Outcome { stdout: csv, stderr, code: 0 }),
    }
}

/// Load-time check plus a consistency report of the drive models.
pub fn validate(cfg: &SystemConfig) -> Result<Outcome, CliError> {
    let mut stdout = String::from("config ok\n");
    let archs: &[Architecture] = if cfg.gains.is_some() {
        &[Architecture::Feedforward, Architecture::Feedback]
    } else {
        &[Architecture::Feedforward]
    };
    for &arch in archs {
        let model = cfg.drive(arch).ok_or(Error::MissingGains)?;
        let closed = model.closed_form()?;
        let composed = model.block_compose_frf(&cfg.operating_point, &cfg.grid)?;
        let (a, _) = closed.sample(&cfg.grid)?;
        let (b, _) = composed.sample(&cfg.grid)?;
        let worst = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).norm() / y.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let _ = writeln!(stdout, "{}_a_t_closed_vs_composed_max_rel={}", arch.tag(), worst);
    }
    Ok(Outcome { stdout, ..Outcome::default() })
}
