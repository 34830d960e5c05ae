use std::fs;
use std::path::Path;

use anyhow::Context;

use wide2nn::experiment::{read_rows, run_figure, summarize, write_rows, FigureKind, FigureSpec, MetricRow};

use crate::config::{activation_name, parse_activation, Settings};
use crate::error::{config_err, CliResult, Failure};
use crate::svg;

pub fn parse_kind(s: &str) -> CliResult<FigureKind> {
    FigureKind::parse(s).map_or_else(
        || config_err(format!("unknown figure {s:?} (test_vs_n, test_vs_d, margin_vs_m, lazy)")),
        Ok,
    )
}

pub fn preset(kind: FigureKind, name: &str) -> CliResult<FigureSpec> {
    match name {
        "desk" => Ok(FigureSpec::desk(kind)),
        "full" => Ok(FigureSpec::full_scale(kind)),
        _ => config_err(format!("unknown preset {name:?} (desk, full)")),
    }
}

/// Defaults for `figure` come from the chosen preset.
pub fn defaults(kind: FigureKind, preset_name: &str) -> CliResult<Settings> {
    let p = preset(kind, preset_name)?;
    let values: Vec<String> = p.values.iter().map(|v| v.to_string()).collect();
    Ok(Settings::with_defaults([
        ("figure", kind.name().to_owned()),
        ("preset", preset_name.to_owned()),
        ("values", values.join(",")),
        ("k", p.k.to_string()),
        ("d", p.d.to_string()),
        ("n", p.n.to_string()),
        ("m", p.width.to_string()),
        ("steps", p.steps.to_string()),
        ("replicates", p.replicates.to_string()),
        ("seed", p.seed.to_string()),
        ("n-test", p.n_test.to_string()),
        ("activation", activation_name(p.activation).to_owned()),
    ]))
}

pub fn spec_from_settings(s: &Settings) -> CliResult<FigureSpec> {
    let kind = parse_kind(s.raw("figure"))?;
    let spec = FigureSpec {
        kind,
        values: s.list("values")?,
        k: s.get("k")?,
        d: s.get("d")?,
        n: s.get("n")?,
        width: s.get("m")?,
        steps: s.get("steps")?,
        replicates: s.get("replicates")?,
        seed: s.get("seed")?,
        n_test: s.get("n-test")?,
        activation: parse_activation(s.raw("activation"))?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Metrics drawn for each figure; the CSV keeps all of them.
fn plotted(kind: FigureKind) -> &'static [&'static str] {
    match kind {
        FigureKind::TestVsN | FigureKind::TestVsD => &["test_error_both", "test_error_output"],
        FigureKind::MarginVsM => &["f1_margin", "best_f1_margin"],
        FigureKind::Lazy => &["mass_growth"],
    }
}

pub fn render_svg(kind: FigureKind, rows: &[MetricRow]) -> String {
    let summary = summarize(rows);
    svg::render(&summary, plotted(kind), kind.name(), kind.variable())
}

pub fn cmd_figure(settings: &Settings, out: &Path) -> CliResult<()> {
    let spec = spec_from_settings(settings)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.txt"), settings.render()).context("writing config")?;

    let rows = run_figure(&spec)?;
    let name = spec.kind.name();
    let csv_path = out.join(format!("{name}.csv"));
    let file = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_rows(&rows, file)?;
    fs::write(out.join(format!("{name}.svg")), render_svg(spec.kind, &rows)).context("writing svg")?;
    let summary = summarize(&rows);
    let text = serde_json::to_string_pretty(&summary).context("serializing summary")?;
    fs::write(out.join("summary.json"), text + "\n").context("writing summary")?;
    for s in summary.iter().filter(|s| plotted(spec.kind).contains(&s.metric.as_str())) {
        eprintln!(
            "{}={} {}: median {:.4} [{:.4}, {:.4}]",
            spec.kind.variable(),
            s.sweep_value,
            s.metric,
            s.median,
            s.q1,
            s.q3
        );
    }
    let failed = rows.iter().filter(|r| r.metric == "failed").count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} job(s) failed; see {}", csv_path.display())));
    }
    Ok(())
}

/// Regenerates the SVG from a figure CSV.
pub fn cmd_from_csv(kind: FigureKind, csv: &Path, svg_path: &Path) -> CliResult<()> {
    let file = fs::File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let rows = read_rows(file)?;
    fs::write(svg_path, render_svg(kind, &rows)).with_context(|| format!("writing {}", svg_path.display()))?;
    Ok(())
}
