//! Experiment orchestration for the `diffamp` binary.
//!
//! A run is `(command, ScenarioConfig)`. It writes its data tables as CSV, a
//! `summary.json`, the config echo and the tool version into the output
//! directory. Runs with identical configs produce byte-identical files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amplifier_exact::{mgf_exact, mgf_monte_carlo, Mgf};
use crate::asymptotics::{divergence_witness, fit_decay, linspace, scan};
use crate::driver_field::{covariance, empirical_covariance, ensemble_member, SpectralWeights};
use crate::error::{Error, Result};
use crate::gamma_spectral::{eigen_closed_form, integrated_gamma, SpectrumSummary};
use crate::pde_solver::{
    evolve_stochastic_with_checkpoints, lemma1_invariance_check, mean_abs_e, KineticKind,
    SolverConfig, DEFAULT_CHECKPOINTS,
};
use crate::table::{emit_table, Cell, Column};
use crate::VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    CovarianceCheck,
    Mgf,
    Simulate,
    Sweep,
    Lemma1,
    Asymptotics,
    Witness,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Spectrum,
        Command::CovarianceCheck,
        Command::Mgf,
        Command::Simulate,
        Command::Sweep,
        Command::Lemma1,
        Command::Asymptotics,
        Command::Witness,
    ];

    /// Whether the command draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        !matches!(
            self,
            Command::Spectrum | Command::Asymptotics | Command::Witness
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::CovarianceCheck => "covariance-check",
            Command::Mgf => "mgf",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Lemma1 => "lemma1",
            Command::Asymptotics => "asymptotics",
            Command::Witness => "witness",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config {
                field: "command".into(),
                reason: format!("unknown subcommand `{s}`"),
            })
    }
}

/// `a:b:n`, `n` evenly spaced values from `a` to `b` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n)
    }

    fn parse_field(s: &str, field: &str) -> Result<Self> {
        s.parse().map_err(|e: String| Error::Config {
            field: field.into(),
            reason: e,
        })
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected `a:b:n`, got `{s}`"));
        };
        let lo: f64 = a
            .trim()
            .parse()
            .map_err(|e| format!("bad start `{a}`: {e}"))?;
        let hi: f64 = b
            .trim()
            .parse()
            .map_err(|e| format!("bad end `{b}`: {e}"))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|e| format!("bad count `{n}`: {e}"))?;
        if !lo.is_finite() || !hi.is_finite() || n == 0 || hi < lo {
            return Err(format!("`{s}` must have finite a <= b and n >= 1"));
        }
        Ok(Grid { lo, hi, n })
    }
}

/// `(n, ε_n)` pairs plus `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub n_max: usize,
    pub eps: Vec<(i64, f64)>,
}

impl Default for WeightsSpec {
    fn default() -> Self {
        WeightsSpec {
            n_max: 1,
            eps: vec![(0, 0.2), (1, 0.5), (-1, 0.3)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceOptions {
    pub dx_grid: String,
    pub dt_grid: String,
    pub samples: usize,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        CovarianceOptions {
            dx_grid: "0:0.5:5".into(),
            dt_grid: "0:0.5:3".into(),
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgfOptions {
    pub lambda_grid: String,
    pub samples: usize,
}

impl Default for MgfOptions {
    fn default() -> Self {
        MgfOptions {
            lambda_grid: "0:1.2:13".into(),
            samples: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    pub lambda: f64,
    /// Ensemble index of the realization to solve.
    pub realization: u64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            lambda: 0.5,
            realization: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub lambda_grid: String,
    pub samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            lambda_grid: "0:1:5".into(),
            samples: 1000,
        }
    }
}

/// Options whose coupling defaults to a multiple of `λ̄_c`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma1Options {
    pub lambda: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsOptions {
    pub lambda: Option<f64>,
    pub z_grid: String,
}

impl Default for AsymptoticsOptions {
    fn default() -> Self {
        AsymptoticsOptions {
            lambda: None,
            z_grid: "30:60:8".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessOptions {
    pub lambda: Option<f64>,
    pub z_max: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            lambda: None,
            z_max: 20.0,
        }
    }
}

/// Everything a run needs. `seed` is mandatory for the stochastic commands
/// (from the file or `--seed`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub covariance: CovarianceOptions,
    #[serde(default)]
    pub mgf: MgfOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
    #[serde(default)]
    pub lemma1: Lemma1Options,
    #[serde(default)]
    pub asymptotics: AsymptoticsOptions,
    #[serde(default)]
    pub witness: WitnessOptions,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<String>,
    pub samples: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            field: e
                .span()
                .map(|s| format!("at bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "config".into()),
            reason: e.message().to_owned(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, command: Command, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(l) = o.lambda {
            match command {
                Command::Simulate => self.simulate.lambda = l,
                Command::Lemma1 => self.lemma1.lambda = Some(l),
                Command::Asymptotics => self.asymptotics.lambda = Some(l),
                Command::Witness => self.witness.lambda = Some(l),
                _ => {}
            }
        }
        if let Some(g) = &o.lambda_grid {
            match command {
                Command::Mgf => self.mgf.lambda_grid = g.clone(),
                Command::Sweep => self.sweep.lambda_grid = g.clone(),
                _ => {}
            }
        }
        if let Some(n) = o.samples {
            match command {
                Command::CovarianceCheck => self.covariance.samples = n,
                Command::Mgf => self.mgf.samples = n,
                Command::Sweep => self.sweep.samples = n,
                Command::Lemma1 => self.lemma1.samples = Some(n),
                _ => {}
            }
        }
    }

    pub fn spectral_weights(&self) -> Result<SpectralWeights> {
        SpectralWeights::from_pairs(self.weights.n_max, &self.weights.eps).map_err(|e| {
            Error::Config {
                field: "weights".into(),
                reason: e.to_string(),
            }
        })
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config {
            field: "seed".into(),
            reason: "a seed is required (config `seed = ...` or `--seed`)".into(),
        })
    }
}

/// Process exit code for a run result: 0 ok, 1 invalid input, 2 runtime
/// failure or invariant violation.
pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(Error::Invariant(_)) | Err(Error::Io(_)) => 2,
        Err(_) => 1,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Files written, relative to `out_dir`.
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn table(&mut self, name: &str, schema: &[Column], rows: &[Vec<Cell>]) -> Result<()> {
        emit_table(&self.dir.join(name), schema, rows)?;
        self.files.push(name.into());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("json serializes");
        s.push('\n');
        self.text(name, &s)
    }
}

fn invariant(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Invariant(what()))
    }
}

/// Runs `command` and writes its outputs into `out_dir`.
///
/// `config_text` is echoed verbatim as `config.toml`; when `None` the
/// resolved config is serialized instead. `resolved.toml` always holds the
/// config after command-line overrides.
pub fn run_scenario(
    command: Command,
    cfg: &ScenarioConfig,
    config_text: Option<&str>,
    out_dir: &Path,
) -> Result<RunOutcome> {
    let seed = if command.is_stochastic() {
        Some(cfg.require_seed()?)
    } else {
        cfg.seed
    };
    let w = cfg.spectral_weights()?;
    cfg.solver.validate_for(&w).map_err(|e| Error::Config {
        field: "solver".into(),
        reason: e.to_string(),
    })?;

    std::fs::create_dir_all(out_dir)?;
    let mut out = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    out.text("config.toml", config_text.unwrap_or(&cfg.to_toml()))?;
    out.text("resolved.toml", &cfg.to_toml())?;
    out.text("version.txt", &format!("{VERSION}\n"))?;

    let results = match command {
        Command::Spectrum => run_spectrum(&w, &mut out)?,
        Command::CovarianceCheck => run_covariance(&w, cfg, seed.unwrap_or_default(), &mut out)?,
        Command::Mgf => run_mgf(&w, cfg, seed.unwrap_or_default(), &mut out)?,
        Command::Simulate => run_simulate(&w, cfg, seed.unwrap_or_default(), &mut out)?,
        Command::Sweep => run_sweep(&w, cfg, seed.unwrap_or_default(), &mut out)?,
        Command::Lemma1 => run_lemma1(&w, cfg, seed.unwrap_or_default(), &mut out)?,
        Command::Asymptotics => run_asymptotics(&w, cfg, &mut out)?,
        Command::Witness => run_witness(&w, cfg, &mut out)?,
    };
    let summary = serde_json::json!({
        "command": command.name(),
        "version": VERSION,
        "seed": seed,
        "results": results,
    });
    out.json("summary.json", &summary)?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        files: out.files,
        summary,
    })
}

fn run_spectrum(w: &SpectralWeights, out: &mut Writer) -> Result<serde_json::Value> {
    let dec = eigen_closed_form(w)?;
    let g = integrated_gamma(w);

    let m = w.dim();
    let id = nalgebra::DMatrix::<crate::Complex64>::identity(m, m);
    let unitary = (dec.p.adjoint() * &dec.p - id)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    invariant(unitary < 1e-12, || {
        format!("P†P deviates from I by {unitary:e}")
    })?;
    let rotated = g.congruence(&dec.p);
    let mut off = 0.0_f64;
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { dec.kappas[i] } else { 0.0 };
            off = off.max((rotated.as_matrix()[(i, j)] - crate::Complex64::new(want, 0.0)).norm());
        }
    }
    invariant(off < 1e-12, || {
        format!("P†GP differs from diag(κ) by {off:e}")
    })?;
    let ksum: f64 = dec.kappas.iter().sum();
    invariant((ksum - 1.0).abs() < 1e-12, || format!("Σκ = {ksum}"))?;

    let schema = [
        Column::integer("row"),
        Column::integer("col"),
        Column::real("re"),
        Column::real("im"),
    ];
    let dump = |mat: &nalgebra::DMatrix<crate::Complex64>| -> Vec<Vec<Cell>> {
        let mut rows = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let v = mat[(i, j)];
                rows.push(vec![
                    Cell::Integer(i as i64),
                    Cell::Integer(j as i64),
                    Cell::Real(v.re),
                    Cell::Real(v.im),
                ]);
            }
        }
        rows
    };
    out.table("integrated_gamma.csv", &schema, &dump(g.as_matrix()))?;
    out.table("diagonalizer.csv", &schema, &dump(&dec.p))?;
    let summary = serde_json::to_value(SpectrumSummary::from(&dec)).expect("serializes");
    out.json("spectrum.json", &summary)?;
    Ok(summary)
}

fn run_covariance(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let o = &cfg.covariance;
    let dxs = Grid::parse_field(&o.dx_grid, "covariance.dx_grid")?.values();
    let dts = Grid::parse_field(&o.dt_grid, "covariance.dt_grid")?.values();
    let c00 = covariance(w, 0.0, 0.0);
    invariant((c00.re - 1.0).abs() < 1e-12 && c00.im.abs() < 1e-12, || {
        format!("C(0,0) = {c00}")
    })?;

    let mut exact_rows = Vec::new();
    let mut check_rows = Vec::new();
    let mut misses = 0usize;
    for (i, &dx) in dxs.iter().enumerate() {
        for (j, &dt) in dts.iter().enumerate() {
            let c = covariance(w, dx, dt);
            invariant(c.norm() <= 1.0 + 1e-12, || {
                format!("|C({dx},{dt})| = {} > 1", c.norm())
            })?;
            exact_rows.push(vec![dx.into(), dt.into(), c.re.into(), c.im.into()]);
            let lag_seed = crate::rng::derive_seed(seed, (i * dts.len() + j) as u64);
            let est = empirical_covariance(w, dx, dt, o.samples, lag_seed)?;
            let ok = est.covariance.within(c, 3.0)
                && est
                    .pseudo_covariance
                    .within(crate::Complex64::new(0.0, 0.0), 3.0);
            misses += usize::from(!ok);
            let (cv, ps) = (est.covariance, est.pseudo_covariance);
            check_rows.push(vec![
                dx.into(),
                dt.into(),
                c.re.into(),
                c.im.into(),
                cv.mean_re.into(),
                cv.mean_im.into(),
                cv.stderr_re.into(),
                cv.stderr_im.into(),
                ps.mean_re.into(),
                ps.mean_im.into(),
                ps.stderr_re.into(),
                ps.stderr_im.into(),
                ok.into(),
            ]);
        }
    }
    out.table(
        "covariance.csv",
        &[
            Column::real("dx"),
            Column::real("dt"),
            Column::real("re"),
            Column::real("im"),
        ],
        &exact_rows,
    )?;
    let names = [
        "dx",
        "dt",
        "exact_re",
        "exact_im",
        "mc_re",
        "mc_im",
        "mc_stderr_re",
        "mc_stderr_im",
        "pseudo_re",
        "pseudo_im",
        "pseudo_stderr_re",
        "pseudo_stderr_im",
    ];
    let mut schema: Vec<Column> = names.iter().map(|n| Column::real(n)).collect();
    schema.push(Column::bool("within_3sigma"));
    out.table("covariance_check.csv", &schema, &check_rows)?;
    Ok(serde_json::json!({
        "lags": exact_rows.len(),
        "samples": o.samples,
        "outside_3sigma": misses,
    }))
}

fn run_mgf(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let o = &cfg.mgf;
    let lambdas = Grid::parse_field(&o.lambda_grid, "mgf.lambda_grid")?.values();
    let dec = eigen_closed_form(w)?;
    let mut rows = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        let exact = mgf_exact(w, l)?;
        let mc = mgf_monte_carlo(w, l, o.samples, crate::rng::derive_seed(seed, i as u64))?;
        if l >= dec.lambda_bar_c {
            invariant(exact == Mgf::Divergent, || {
                format!("finite MGF at λ = {l} ≥ λ̄_c")
            })?;
        }
        rows.push(vec![
            l.into(),
            exact.value().unwrap_or(f64::INFINITY).into(),
            mc.mean.into(),
            mc.stderr.into(),
            mc.diverged_flag.into(),
        ]);
    }
    out.table(
        "mgf.csv",
        &[
            Column::real("lambda"),
            Column::real("exact"),
            Column::real("mc_mean"),
            Column::real("mc_stderr"),
            Column::bool("flag"),
        ],
        &rows,
    )?;
    Ok(serde_json::json!({
        "lambda_bar_c": dec.lambda_bar_c,
        "points": lambdas.len(),
        "samples": o.samples,
    }))
}

fn run_simulate(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let o = &cfg.simulate;
    let r = ensemble_member(w, seed, o.realization);
    let ev = evolve_stochastic_with_checkpoints(w, &r, o.lambda, &cfg.solver, DEFAULT_CHECKPOINTS)?;
    let norms: Vec<f64> = ev.checkpoints.iter().map(|c| c.l2_norm).collect();
    if o.lambda == 0.0 && cfg.solver.kinetic == KineticKind::Diffraction {
        let drift = norms.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
        invariant(drift < 1e-10, || {
            format!("free propagation changed the norm by {drift:e}")
        })?;
    }
    // Diffusion damps the norm; the other kinetic terms preserve it.
    if !matches!(cfg.solver.kinetic, KineticKind::Diffusion { .. }) {
        let decreasing = norms.windows(2).any(|p| p[1] < p[0] * (1.0 - 1e-12));
        invariant(!decreasing, || {
            "L² norm decreased between checkpoints".into()
        })?;
    }

    let f = &ev.field;
    let rows: Vec<Vec<Cell>> = (0..f.n_x())
        .map(|j| {
            let v = f.value(j);
            vec![f.x(j).into(), f.abs_at(j).into(), v.re.into(), v.im.into()]
        })
        .collect();
    out.table(
        "field.csv",
        &[
            Column::real("x"),
            Column::real("abs_e"),
            Column::real("re"),
            Column::real("im"),
        ],
        &rows,
    )?;
    let rows: Vec<Vec<Cell>> = ev
        .checkpoints
        .iter()
        .map(|c| vec![c.time.into(), c.l2_norm.into()])
        .collect();
    out.table(
        "checkpoints.csv",
        &[Column::real("time"), Column::real("l2_norm")],
        &rows,
    )?;
    Ok(serde_json::json!({
        "lambda": o.lambda,
        "realization": o.realization,
        "abs_e_origin": f.abs_at(0),
        "l2_norm": f.l2_norm(),
    }))
}

fn run_sweep(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let o = &cfg.sweep;
    let lambdas = Grid::parse_field(&o.lambda_grid, "sweep.lambda_grid")?.values();
    let mut rows = Vec::new();
    for (i, &l) in lambdas.iter().enumerate() {
        let est = mean_abs_e(
            w,
            l,
            &cfg.solver,
            o.samples,
            crate::rng::derive_seed(seed, i as u64),
        )?;
        rows.push(vec![
            l.into(),
            est.mean.into(),
            est.stderr.into(),
            est.diverged_flag.into(),
        ]);
    }
    out.table(
        "sweep.csv",
        &[
            Column::real("lambda"),
            Column::real("mean"),
            Column::real("stderr"),
            Column::bool("flag"),
        ],
        &rows,
    )?;
    Ok(serde_json::json!({
        "lambda_bar_c": eigen_closed_form(w)?.lambda_bar_c,
        "points": lambdas.len(),
        "samples": o.samples,
    }))
}

fn run_lemma1(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let lbc = eigen_closed_form(w)?.lambda_bar_c;
    let lambda = cfg.lemma1.lambda.unwrap_or(0.5 * lbc);
    let samples = cfg.lemma1.samples.unwrap_or(10_000);
    let rep = lemma1_invariance_check(w, lambda, &cfg.solver, samples, seed)?;
    let rows = [("gamma", rep.direct), ("rotated", rep.rotated)]
        .into_iter()
        .map(|(name, e)| {
            vec![
                Cell::Text(name.into()),
                e.mean.into(),
                e.stderr.into(),
                Cell::Integer(e.n_samples as i64),
                e.max_sample_fraction.into(),
                e.diverged_flag.into(),
            ]
        })
        .collect::<Vec<_>>();
    out.table(
        "lemma1.csv",
        &[
            Column::text("coupling"),
            Column::real("mean"),
            Column::real("stderr"),
            Column::integer("n_samples"),
            Column::real("max_sample_fraction"),
            Column::bool("flag"),
        ],
        &rows,
    )?;
    Ok(serde_json::json!({
        "lambda": lambda,
        "direct": rep.direct,
        "rotated": rep.rotated,
        "overlap_3sigma": rep.overlaps(3.0),
    }))
}

fn run_asymptotics(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let dec = eigen_closed_form(w)?;
    let lambda = cfg.asymptotics.lambda.unwrap_or(dec.lambda_bar_c);
    let grid = Grid::parse_field(&cfg.asymptotics.z_grid, "asymptotics.z_grid")?.values();
    let points = scan(w, lambda, &grid, &cfg.solver)?;
    let rows: Vec<Vec<Cell>> = points
        .iter()
        .map(|p| {
            vec![
                p.z.into(),
                p.ln_g.exp().into(),
                p.ln_v_abs.exp().into(),
                p.predicted.into(),
            ]
        })
        .collect();
    out.table(
        "asymptotics.csv",
        &[
            Column::real("z"),
            Column::real("g"),
            Column::real("v_abs"),
            Column::real("predicted"),
        ],
        &rows,
    )?;
    let fit = if dec.alpha_m > 0.0 {
        let fit = fit_decay(w, lambda, &grid, &cfg.solver)?;
        let v = serde_json::to_value(fit).expect("serializes");
        out.json("decay_fit.json", &v)?;
        v
    } else {
        serde_json::Value::Null
    };
    Ok(serde_json::json!({ "lambda": lambda, "decay_fit": fit }))
}

fn run_witness(
    w: &SpectralWeights,
    cfg: &ScenarioConfig,
    out: &mut Writer,
) -> Result<serde_json::Value> {
    let lbc = eigen_closed_form(w)?.lambda_bar_c;
    let lambda = cfg.witness.lambda.unwrap_or(1.5 * lbc);
    let rep = divergence_witness(w, lambda, cfg.witness.z_max, &cfg.solver)?;
    let rows: Vec<Vec<Cell>> = rep
        .trace
        .iter()
        .map(|p| vec![p.z.into(), p.ln_g.into(), p.ln_g.exp().into()])
        .collect();
    out.table(
        "witness.csv",
        &[Column::real("z"), Column::real("ln_g"), Column::real("g")],
        &rows,
    )?;
    Ok(serde_json::json!({
        "lambda": lambda,
        "lambda_bar_c": lbc,
        "z_max": cfg.witness.z_max,
        "diverged": rep.diverged,
    }))
}
