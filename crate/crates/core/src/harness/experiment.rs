//! Monte-Carlo experiments and their CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use super::baselines::Scheme;
use super::baselines::{power_min_metric, sum_rate_metric, BaselineOptions};
use super::model_error::{model_error_study, ModelErrorOptions};
use crate::power_min::{run_algorithm1, PowerMinReport};
use crate::scenario::{db_to_linear, sub_stream, trial_channels, SystemConfig};
use crate::sum_rate::{random_init, run_algorithm2, RateStep};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    PowerMin,
    SumRate,
    ModelError,
    /// Per-iteration power of the proposed power minimisation.
    PowerTrace,
    /// Per-iteration rate of the proposed sum-rate design.
    RateTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[default]
    None,
    GammaDb,
    PowerDb,
    M,
    D,
    L,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::None => "none",
            SweepParam::GammaDb => "gamma_db",
            SweepParam::PowerDb => "power_db",
            SweepParam::M => "m",
            SweepParam::D => "d",
            SweepParam::L => "l",
        }
    }

    /// Configuration with the swept quantity set to `value`.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::None => {}
            SweepParam::GammaDb => c.gamma = db_to_linear(value),
            SweepParam::PowerDb => c.power = db_to_linear(value),
            SweepParam::M => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("M = {value} is not a positive integer")));
                }
                c.m = value as usize;
            }
            SweepParam::D => c.d = value,
            SweepParam::L => c.l = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub problem: Problem,
    pub sweep: SweepParam,
    pub values: Vec<f64>,
    pub trials: usize,
    pub schemes: Vec<Scheme>,
    pub no_selection_bs: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(name: &str, problem: Problem, sweep: SweepParam, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            problem,
            sweep,
            values,
            trials: 50,
            schemes: Scheme::ALL.to_vec(),
            no_selection_bs: None,
        }
    }

    /// Sweep values, or a single placeholder when nothing is swept.
    fn points(&self) -> Vec<f64> {
        if self.sweep == SweepParam::None || self.values.is_empty() {
            vec![f64::NAN]
        } else {
            self.values.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep != SweepParam::None && self.values.is_empty() {
            return Err(Error::Config("sweep without values".into()));
        }
        if matches!(self.problem, Problem::PowerMin | Problem::SumRate) && self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        Ok(())
    }
}

/// Built-in experiments.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    use Problem::*;
    use SweepParam::*;
    let spec = match name {
        "power-vs-gamma" => ExperimentSpec::new(name, PowerMin, GammaDb, vec![0.0, 5.0, 10.0]),
        "power-vs-m" => ExperimentSpec::new(name, PowerMin, M, vec![8.0, 16.0, 32.0]),
        "power-vs-d" => ExperimentSpec::new(name, PowerMin, D, vec![1.0, 2.0, 4.0, 6.0]),
        "power-vs-l" => ExperimentSpec::new(name, PowerMin, L, vec![40.0, 52.0, 64.0]),
        "rate-vs-power" => ExperimentSpec::new(name, SumRate, PowerDb, vec![-10.0, -5.0, 0.0]),
        "rate-vs-m" => ExperimentSpec::new(name, SumRate, M, vec![8.0, 16.0, 32.0]),
        "rate-vs-d" => ExperimentSpec::new(name, SumRate, D, vec![1.0, 2.0, 4.0, 6.0]),
        "rate-vs-l" => ExperimentSpec::new(name, SumRate, L, vec![40.0, 52.0, 64.0]),
        "power-convergence" => ExperimentSpec { trials: 10, ..ExperimentSpec::new(name, PowerTrace, None, vec![]) },
        "rate-convergence" => ExperimentSpec { trials: 10, ..ExperimentSpec::new(name, RateTrace, None, vec![]) },
        "model-error" => ExperimentSpec { trials: 10, ..ExperimentSpec::new(name, ModelError, None, vec![]) },
        _ => return Err(Error::UnknownExperiment(name.to_string())),
    };
    Ok(spec)
}

pub const PRESETS: [&str; 11] = [
    "power-vs-gamma",
    "power-vs-m",
    "power-vs-d",
    "power-vs-l",
    "rate-vs-power",
    "rate-vs-m",
    "rate-vs-d",
    "rate-vs-l",
    "power-convergence",
    "rate-convergence",
    "model-error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub trial: usize,
    pub sweep_param: SweepParam,
    pub sweep_value: f64,
    pub scheme: String,
    pub metric: f64,
    pub unit: &'static str,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone)]
pub enum ExperimentOutput {
    Results(Vec<ResultRow>),
    PowerTrace(Vec<(usize, PowerMinReport)>),
    RateTrace(Vec<(usize, Vec<RateStep>)>),
}

/// Stream of trial `t` reserved for algorithm randomness (channels use `2t`).
fn algo_stream(cfg: &SystemConfig, trial: usize) -> rand_chacha::ChaCha20Rng {
    sub_stream(cfg.seed, 2 * trial as u64 + 1)
}

fn trial_rows(spec: &ExperimentSpec, base: &SystemConfig, trial: usize, opts: &BaselineOptions) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for value in spec.points() {
        let cfg = if value.is_nan() { base.clone() } else { spec.sweep.apply(base, value)? };
        let (_, channels) = trial_channels(&cfg, trial as u64)?;
        let row = |scheme: &str, metric: f64, unit: &'static str, secs: f64| ResultRow {
            experiment: spec.name.clone(),
            seed: cfg.seed,
            trial,
            sweep_param: spec.sweep,
            sweep_value: value,
            scheme: scheme.to_string(),
            metric,
            unit,
            wall_clock_s: secs,
        };
        match spec.problem {
            Problem::PowerMin | Problem::SumRate => {
                for &scheme in &spec.schemes {
                    let mut rng = algo_stream(&cfg, trial);
                    let t0 = Instant::now();
                    let (metric, unit) = if spec.problem == Problem::PowerMin {
                        (power_min_metric(scheme, &channels, &cfg, &mut rng, opts)?, "W")
                    } else {
                        (sum_rate_metric(scheme, &channels, &cfg, &mut rng, opts)?, "bit/s/Hz")
                    };
                    rows.push(row(scheme.name(), metric, unit, t0.elapsed().as_secs_f64()));
                }
            }
            Problem::ModelError => {
                let res = model_error_study(&channels, &cfg, &mut algo_stream(&cfg, trial), &ModelErrorOptions::default())?;
                rows.push(row("simplified", res.simplified.sum_rate, "bit/s/Hz", res.simplified.seconds));
                rows.push(row("true_model", res.true_model.sum_rate, "bit/s/Hz", res.true_model.seconds));
            }
            Problem::PowerTrace | Problem::RateTrace => unreachable!("traces handled separately"),
        }
    }
    Ok(rows)
}

/// Runs all trials (in parallel) and returns the output in trial order.
pub fn run_experiment(spec: &ExperimentSpec, base: &SystemConfig) -> Result<ExperimentOutput> {
    spec.validate()?;
    base.validate()?;
    let opts = BaselineOptions { no_selection_bs: spec.no_selection_bs, ..Default::default() };
    match spec.problem {
        Problem::PowerTrace => {
            let traces = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let (_, ch) = trial_channels(base, t as u64)?;
                    Ok((t, run_algorithm1(&ch, base, &opts.alg1)?.report))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentOutput::PowerTrace(traces))
        }
        Problem::RateTrace => {
            let traces = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let (_, ch) = trial_channels(base, t as u64)?;
                    let init = random_init(base.s, base.m, &mut algo_stream(base, t));
                    Ok((t, run_algorithm2(&ch, base, &init, &opts.alg2)?.trace))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentOutput::RateTrace(traces))
        }
        _ => {
            let rows = (0..spec.trials)
                .into_par_iter()
                .map(|t| trial_rows(spec, base, t, &opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentOutput::Results(rows.into_iter().flatten().collect()))
        }
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.to_path_buf(), source: e }
}

/// Writes the deterministic result CSV.
pub fn write_output<W: Write>(output: &ExperimentOutput, seed: u64, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    match output {
        ExperimentOutput::Results(rows) => {
            wtr.write_record(["experiment", "seed", "trial", "sweep_param", "sweep_value", "scheme", "metric", "unit"])?;
            for r in rows {
                wtr.write_record([
                    r.experiment.clone(),
                    r.seed.to_string(),
                    r.trial.to_string(),
                    r.sweep_param.name().to_string(),
                    fmt_value(r.sweep_value),
                    r.scheme.clone(),
                    format!("{:e}", r.metric),
                    r.unit.to_string(),
                ])?;
            }
        }
        ExperimentOutput::PowerTrace(traces) => {
            wtr.write_record(["seed", "trial", "outer_iter", "bs", "power_watts", "sinr_min", "converged"])?;
            for (t, rep) in traces {
                for r in &rep.rows {
                    wtr.write_record([
                        seed.to_string(),
                        t.to_string(),
                        r.outer_iter.to_string(),
                        r.bs.to_string(),
                        format!("{:e}", r.power_watts),
                        format!("{:e}", r.sinr_min),
                        r.converged.to_string(),
                    ])?;
                }
            }
        }
        ExperimentOutput::RateTrace(traces) => {
            wtr.write_record(["seed", "trial", "outer_iter", "sum_rate_bps_hz", "objective_32a"])?;
            for (t, trace) in traces {
                for r in trace {
                    wtr.write_record([
                        seed.to_string(),
                        t.to_string(),
                        r.outer_iter.to_string(),
                        format!("{:e}", r.sum_rate),
                        format!("{:e}", r.objective),
                    ])?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| Error::Io { path: PathBuf::from("<csv>"), source: e })?;
    Ok(())
}

/// Wall-clock seconds per result row, kept apart so the main CSV stays
/// reproducible byte for byte.
pub fn write_timing<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["experiment", "trial", "sweep_value", "scheme", "wall_clock_s"])?;
    for r in rows {
        wtr.write_record([
            r.experiment.clone(),
            r.trial.to_string(),
            fmt_value(r.sweep_value),
            r.scheme.clone(),
            format!("{:e}", r.wall_clock_s),
        ])?;
    }
    wtr.flush().map_err(|e| Error::Io { path: PathBuf::from("<csv>"), source: e })?;
    Ok(())
}

/// Path of the timing file next to `out`.
pub fn timing_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".timing.csv");
    out.with_file_name(name)
}

/// Writes the result CSV to `out` and, for result rows, the timing file.
pub fn save_output(output: &ExperimentOutput, seed: u64, out: &Path) -> Result<()> {
    let file = std::fs::File::create(out).map_err(io_err(out))?;
    write_output(output, seed, std::io::BufWriter::new(file))?;
    if let ExperimentOutput::Results(rows) = output {
        let tp = timing_path(out);
        let file = std::fs::File::create(&tp).map_err(io_err(&tp))?;
        write_timing(rows, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

/// Mean metric per (sweep value, scheme), in first-appearance order.
pub fn mean_by_point(rows: &[ResultRow]) -> Vec<(f64, String, f64)> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        let pos = keys
            .iter()
            .position(|(v, s)| (v == &r.sweep_value || (v.is_nan() && r.sweep_value.is_nan())) && s == &r.scheme);
        let i = pos.unwrap_or_else(|| {
            keys.push((r.sweep_value, r.scheme.clone()));
            sums.push((0.0, 0));
            keys.len() - 1
        });
        sums[i].0 += r.metric;
        sums[i].1 += 1;
    }
    keys.into_iter()
        .zip(sums)
        .map(|((v, s), (sum, n))| (v, s, sum / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SystemConfig {
        SystemConfig { s: 2, k: 2, nt: 2, m: 4, ..SystemConfig::default() }
    }

    #[test]
    fn one_trial_one_value_one_scheme_is_one_row() {
        let spec = ExperimentSpec {
            trials: 1,
            schemes: vec![Scheme::NoIrs],
            ..ExperimentSpec::new("t", Problem::PowerMin, SweepParam::GammaDb, vec![5.0])
        };
        let out = run_experiment(&spec, &tiny()).unwrap();
        let mut buf = Vec::new();
        write_output(&out, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2, "{text}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let spec = ExperimentSpec {
            trials: 3,
            ..ExperimentSpec::new("t", Problem::SumRate, SweepParam::PowerDb, vec![-5.0, 0.0])
        };
        let render = || {
            let mut buf = Vec::new();
            write_output(&run_experiment(&spec, &tiny()).unwrap(), 1, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            assert_eq!(preset(name).unwrap().name, name);
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn timing_file_sits_next_to_output() {
        assert_eq!(timing_path(Path::new("/tmp/out.csv")), PathBuf::from("/tmp/out.timing.csv"));
    }

    #[test]
    fn means_group_by_point_and_scheme() {
        let mk = |v: f64, s: &str, m: f64| ResultRow {
            experiment: "e".into(),
            seed: 1,
            trial: 0,
            sweep_param: SweepParam::GammaDb,
            sweep_value: v,
            scheme: s.into(),
            metric: m,
            unit: "W",
            wall_clock_s: 0.0,
        };
        let rows = vec![mk(0.0, "a", 1.0), mk(0.0, "b", 2.0), mk(0.0, "a", 3.0), mk(5.0, "a", 4.0)];
        let means = mean_by_point(&rows);
        assert_eq!(means, vec![(0.0, "a".into(), 2.0), (0.0, "b".into(), 2.0), (5.0, "a".into(), 4.0)]);
    }
}
