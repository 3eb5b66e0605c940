//! Figure definitions: which table, which x column, which y columns.

use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::svg::{Chart, Series};
use crate::table::{Kind, Table};

pub struct Figure {
    pub id: &'static str,
    pub kind: Kind,
    pub title: &'static str,
    pub x: &'static str,
    pub x_label: &'static str,
    /// Exact column names, or a prefix ending in `*`.
    pub ys: &'static [&'static str],
    pub y_label: &'static str,
}

pub const FIGURES: [Figure; 12] = [
    Figure { id: "fig5a", kind: Kind::Rounds, title: "Mean bid per server", x: "slot", x_label: "slot", ys: &["bid_s*"], y_label: "bid ($/VM-hour)" },
    Figure { id: "fig5b", kind: Kind::Rounds, title: "Mean allocation price", x: "slot", x_label: "slot", ys: &["price"], y_label: "price ($/VM-hour)" },
    Figure { id: "fig6a", kind: Kind::Sweep, title: "Converged price vs UEs", x: "ues", x_label: "UEs J", ys: &["price"], y_label: "price ($/VM-hour)" },
    Figure { id: "fig6b", kind: Kind::Sweep, title: "Converged price vs servers", x: "servers", x_label: "servers I", ys: &["price"], y_label: "price ($/VM-hour)" },
    Figure { id: "fig7a", kind: Kind::Rounds, title: "Bids and allocation prices", x: "slot", x_label: "slot", ys: &["mean_bid", "price"], y_label: "$/VM-hour" },
    Figure { id: "fig7b", kind: Kind::Rounds, title: "Profit margin ratio", x: "slot", x_label: "slot", ys: &["margin_pct"], y_label: "margin (%)" },
    Figure { id: "fig8a", kind: Kind::Rounds, title: "Server profit", x: "slot", x_label: "slot", ys: &["utility_s*"], y_label: "utility" },
    Figure { id: "fig8b", kind: Kind::Rounds, title: "Sum of allocated valuations", x: "slot", x_label: "slot", ys: &["alloc_valuation"], y_label: "$/VM-hour" },
    Figure { id: "fig9a", kind: Kind::Sweep, title: "Composite social welfare", x: "vms", x_label: "VMs per server", ys: &["sw"], y_label: "composite SW" },
    Figure { id: "fig9b", kind: Kind::Sweep, title: "Mean UE QoE", x: "vms", x_label: "VMs per server", ys: &["qoe"], y_label: "QoE" },
    Figure { id: "fig10a", kind: Kind::Sweep, title: "Cost satisfaction", x: "davg_mid", x_label: "mean task size (MB)", ys: &["q_cost"], y_label: "Q_cost" },
    Figure { id: "fig10b", kind: Kind::Sweep, title: "Service latency", x: "davg_mid", x_label: "mean task size (MB)", ys: &["latency_s"], y_label: "latency (s)" },
];

pub fn figure(id: &str) -> Result<&'static Figure, CliError> {
    FIGURES.iter().find(|f| f.id == id).ok_or_else(|| {
        let known: Vec<&str> = FIGURES.iter().map(|f| f.id).collect();
        CliError::Usage(format!("unknown figure `{id}`; known: {}", known.join(", ")))
    })
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn build(fig: &Figure, inputs: &[PathBuf]) -> Result<Chart, CliError> {
    let mut series = Vec::new();
    for path in inputs {
        let t = Table::read(path)?;
        if t.kind != fig.kind {
            return Err(CliError::Usage(format!("{}: {} needs a {} table", path.display(), fig.id, fig.kind.name())));
        }
        let xi = t.index(fig.x, path)?;
        let mut ys = Vec::new();
        for pat in fig.ys {
            match pat.strip_suffix('*') {
                Some(prefix) => {
                    let found: Vec<usize> = (0..t.columns.len()).filter(|&i| t.columns[i].starts_with(prefix)).collect();
                    if found.is_empty() {
                        return Err(CliError::MissingColumn { path: path.display().to_string(), column: pat.to_string() });
                    }
                    ys.extend(found);
                }
                None => ys.push(t.index(pat, path)?),
            }
        }
        // one group per mechanism, in order of appearance
        let mech = t.columns.iter().position(|c| c == "mechanism");
        let mut groups: Vec<String> = Vec::new();
        for row in &t.rows {
            let g = mech.map(|m| row[m].clone()).unwrap_or_default();
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        let xs = t.numbers(xi);
        for g in &groups {
            for &yi in &ys {
                let vals = t.numbers(yi);
                let mut points: Vec<(f64, Option<f64>)> = (0..t.rows.len())
                    .filter(|&r| mech.map_or(true, |m| &t.rows[r][m] == g))
                    .filter_map(|r| xs[r].map(|x| (x, vals[r])))
                    .collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut label: Vec<String> = Vec::new();
                if inputs.len() > 1 {
                    label.push(stem(path));
                }
                if groups.len() > 1 || !g.is_empty() {
                    label.push(g.to_uppercase());
                }
                if ys.len() > 1 {
                    label.push(t.columns[yi].clone());
                }
                series.push(Series { label: label.join(" "), points });
            }
        }
    }
    Ok(Chart { title: fig.title.into(), x_label: fig.x_label.into(), y_label: fig.y_label.into(), series })
}
