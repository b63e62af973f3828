use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coopdrive::costmodel::{deployment_cost, CostParams};
use coopdrive::scenario::{
    compare, deltas_to_table, run, sweep, sweep_table, Report, ScenarioSource,
};
use coopdrive::sor::{plan_placement, DEFAULT_COVERAGE_EACH_DIRECTION_M, DEFAULT_POWER_W};
use coopdrive::vehicle::Mode;

#[derive(Parser)]
#[command(name = "coopdrive", version, about = "Cooperative vehicle-infrastructure driving simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    /// One JSON object per line: name, value, unit.
    Records,
    Table,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Records)]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<Mode>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one scenario and print its metrics.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Numeric override, PATH=VALUE (repeatable).
        #[arg(long = "param", value_name = "PATH=VALUE")]
        params: Vec<String>,
        /// Write the per-tick fusion log as JSON lines to this file.
        #[arg(long)]
        fusion_log: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Per-metric deltas between two saved reports (b minus a).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Run a scenario once per value of one numeric parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Dotted parameter path, e.g. channels.cv2x.jitter_max_ms.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Physical vs simulated testing cost and efficiency.
    Cost {
        /// Take the [cost] table of this scenario as the starting point.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        n_v: Option<f64>,
        #[arg(long)]
        c_p: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        n_s: Option<f64>,
        #[arg(long)]
        c_s: Option<f64>,
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long)]
        h_p: Option<f64>,
        #[arg(long)]
        h_s: Option<f64>,
        #[arg(long)]
        rtf: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Roadside unit positions, power and cost for a corridor.
    Placement {
        #[arg(long)]
        length_m: f64,
        #[arg(long, default_value_t = DEFAULT_COVERAGE_EACH_DIRECTION_M)]
        coverage_m: f64,
        /// Capital cost per unit.
        #[arg(long, default_value_t = 0.0)]
        unit_cost: f64,
        /// Energy price per kWh.
        #[arg(long, default_value_t = 0.0)]
        tariff: f64,
        #[command(flatten)]
        output: Output,
    },
}

type Res<T> = Result<T, String>;

fn source(args: &ScenarioArgs) -> Res<ScenarioSource> {
    let mut src = ScenarioSource::load(&args.scenario).map_err(|e| e.to_string())?;
    if let Some(m) = args.mode {
        src.set_mode(m);
    }
    if let Some(s) = args.seed {
        src.set_seed(s);
    }
    Ok(src)
}

fn emit(output: &Output, records: &Report, table: impl FnOnce() -> String) -> Res<()> {
    let text = match output.format {
        Format::Records => records.to_jsonl(),
        Format::Table => table(),
    };
    write_out(output.out.as_ref(), &text)
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Res<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Cmd) -> Res<()> {
    match cmd {
        Cmd::Run { scenario, params, fusion_log, output } => {
            let mut src = source(&scenario)?;
            for p in &params {
                let (path, value) = p.split_once('=').ok_or_else(|| format!("--param {p:?}: expected PATH=VALUE"))?;
                let v: f64 = value.trim().parse().map_err(|_| format!("--param {p:?}: value is not a number"))?;
                src.set_number(path.trim(), v).map_err(|e| e.to_string())?;
            }
            let mut sc = src.build().map_err(|e| e.to_string())?;
            sc.config.fusion_log |= fusion_log.is_some();
            let outcome = run(&sc);
            if let Some(path) = &fusion_log {
                let mut text = String::new();
                for e in &outcome.fusion_log {
                    text.push_str(&serde_json::to_string(e).map_err(|e| e.to_string())?);
                    text.push('\n');
                }
                write_out(Some(path), &text)?;
            }
            emit(&output, &outcome.report, || outcome.report.to_table())
        }
        Cmd::Compare { a, b, output } => {
            let load = |p: &PathBuf| -> Res<Report> {
                let text = std::fs::read_to_string(p).map_err(|e| format!("reading {}: {e}", p.display()))?;
                Report::from_jsonl(&text).map_err(|e| format!("{}: {e}", p.display()))
            };
            let deltas = compare(&load(&a)?, &load(&b)?).map_err(|e| e.to_string())?;
            let text = match output.format {
                Format::Records => deltas
                    .iter()
                    .map(|d| serde_json::to_string(d).map(|s| s + "\n"))
                    .collect::<Result<String, _>>()
                    .map_err(|e| e.to_string())?,
                Format::Table => deltas_to_table(&deltas),
            };
            write_out(output.out.as_ref(), &text)
        }
        Cmd::Sweep { scenario, param, values, output } => {
            let src = source(&scenario)?;
            let points = sweep(&src, &param, &values).map_err(|e| e.to_string())?;
            let text = match output.format {
                Format::Records => {
                    let mut text = String::new();
                    for p in &points {
                        for r in &p.report.records {
                            let line = serde_json::json!({
                                "sweep_param": param,
                                "sweep_value": p.value,
                                "name": r.name,
                                "value": r.value,
                                "unit": r.unit,
                            });
                            text.push_str(&line.to_string());
                            text.push('\n');
                        }
                    }
                    text
                }
                Format::Table => sweep_table(&param, &points, None),
            };
            write_out(output.out.as_ref(), &text)
        }
        Cmd::Cost { scenario, n_v, c_p, s, n_s, c_s, cap, h_p, h_s, rtf, output } => {
            let mut p = match &scenario {
                Some(path) => ScenarioSource::load(path).and_then(|s| s.config()).map_err(|e| e.to_string())?.cost,
                None => CostParams::default(),
            };
            let set = |slot: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *slot = v;
                }
            };
            set(&mut p.n_v, n_v);
            set(&mut p.c_p, c_p);
            set(&mut p.s, s);
            set(&mut p.n_s, n_s);
            set(&mut p.c_s, c_s);
            set(&mut p.h_p, h_p);
            set(&mut p.h_s, h_s);
            set(&mut p.rtf, rtf);
            if let Some(c) = cap {
                p.cap = c;
            }
            let rep = p.report().map_err(|errs| {
                errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            })?;
            let mut r = Report::default();
            r.push_f64("physical_cost_per_day", rep.physical_cost_per_day, "$/day");
            r.push_f64("sim_cost_per_day", rep.sim_cost_per_day, "$/day");
            r.push_f64("physical_km_per_day", rep.physical_km_per_day, "km/day");
            r.push_f64("sim_km_per_day", rep.sim_km_per_day, "km/day");
            r.push_f64("physical_cost_per_km", rep.physical_cost_per_km, "$/km");
            r.push_f64("sim_cost_per_km", rep.sim_cost_per_km, "$/km");
            r.push_f64("cost_per_km_ratio", rep.cost_per_km_ratio, "x");
            r.push_f64("efficiency_ratio", rep.efficiency_ratio, "x");
            r.push_f64("rtf_for_250x", rep.rtf_for_250x, "");
            emit(&output, &r, || r.to_table())
        }
        Cmd::Placement { length_m, coverage_m, unit_cost, tariff, output } => {
            let positions = plan_placement(length_m, coverage_m).map_err(|e| e.to_string())?;
            let mut r = Report::default();
            r.push_u64("sor_count", positions.len() as u64, "");
            r.push("positions_m", serde_json::json!(positions), "m");
            r.push_f64("power_w", positions.len() as f64 * DEFAULT_POWER_W, "W");
            if coverage_m == DEFAULT_COVERAGE_EACH_DIRECTION_M {
                let d = deployment_cost(length_m / 1000.0, unit_cost, tariff).map_err(|e| e.to_string())?;
                r.push_f64("capex", d.capex, "$");
                r.push_f64("power_cost_per_day", d.power_cost_per_day, "$/day");
            }
            emit(&output, &r, || r.to_table())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
