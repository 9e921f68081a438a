//! Figure-ready tables and plots from a finished (or partial) sweep
//! directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::decode::{percentiles, DecodeReport, Percentiles};
use crate::error::Result;
use crate::experiment::catalog::{Cell, ExperimentId};
use crate::experiment::run::{write_atomic, AnalyticPoint, Manifest, NetResult, Status};
use crate::experiment::svg::{heat_table, LinePlot, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub n_nets: usize,
    pub n_ok: usize,
    /// Pooled over every fold of every successful network.
    pub ood: Percentiles,
    pub id: Percentiles,
    /// Median ID minus median OOD.
    pub gap: f64,
    pub mean_accuracy: f64,
    pub decode: Option<DecodeReport>,
    /// `(t, OOD percentiles, theory)` pooled over networks.
    pub over_time: Vec<(usize, Percentiles, f64)>,
    pub analytic: Vec<AnalyticPoint>,
    pub fixed_points: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub id: ExperimentId,
    pub cells: Vec<CellSummary>,
    /// Result files that are missing, unreadable or failed.
    pub problems: Vec<String>,
}

impl Summary {
    /// `(key, median OOD)` for every cell, in cell order.
    pub fn median_ood_by<K>(&self, key: impl Fn(&Cell) -> K) -> Vec<(K, f64)> {
        self.cells.iter().map(|c| (key(&c.cell), c.ood.p50)).collect()
    }
}

fn cell_summary(cell: &Cell, results: &[NetResult], n_nets: usize) -> CellSummary {
    let reports: Vec<DecodeReport> = results.iter().filter_map(|r| r.decode.clone()).collect();
    let decode = (!reports.is_empty()).then(|| DecodeReport::merge(&reports));
    let (ood, id) = match &decode {
        Some(d) => (d.ood, d.id),
        None => (percentiles(&[]), percentiles(&[])),
    };
    let accs: Vec<f64> = results.iter().filter_map(|r| r.train.as_ref().map(|t| t.mean_accuracy)).collect();
    let mean_accuracy = if accs.is_empty() {
        f64::NAN
    } else {
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    let mut over_time = Vec::new();
    let curves: Vec<_> = results.iter().filter_map(|r| r.over_time.as_ref()).collect();
    if let Some(first) = curves.first() {
        for (k, tp) in first.iter().enumerate() {
            // Percentiles across networks of each network's median.
            let pooled: Vec<f64> = curves.iter().map(|c| c[k].ood.p50).collect();
            over_time.push((tp.t, percentiles(&pooled), tp.theory));
        }
    }
    let analytic = results.iter().find_map(|r| r.analytic.clone()).unwrap_or_default();
    let fixed_points = results
        .iter()
        .filter_map(|r| r.fixed_points.as_ref().map(|f| (f.n_points, f.pca2)))
        .collect();
    CellSummary {
        cell: *cell,
        n_nets,
        n_ok: results.len(),
        gap: id.p50 - ood.p50,
        ood,
        id,
        mean_accuracy,
        decode,
        over_time,
        analytic,
        fixed_points,
    }
}

/// Reads the manifest and every result of `dir`, then writes
/// `summary.csv`, `summary.json` and the figure for the experiment.
/// Missing or corrupt results are listed in the summary rather than
/// aborting it.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let manifest = Manifest::load(dir)?;
    let mut problems = Vec::new();
    let mut cells = Vec::new();
    for mc in &manifest.cells {
        let mut ok = Vec::new();
        for net in &mc.nets {
            let path = dir.join(&net.result);
            let parsed = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<NetResult>(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(r) if r.status == Status::Ok => ok.push(r),
                Ok(r) => problems.push(format!("{}: {:?}", net.result, r.status)),
                Err(e) => problems.push(format!("{}: {e}", net.result)),
            }
        }
        cells.push(cell_summary(&mc.cell, &ok, mc.nets.len()));
    }
    let summary = Summary {
        id: manifest.id,
        cells,
        problems,
    };
    write_outputs(dir, &summary)?;
    Ok(summary)
}

fn write_outputs(dir: &Path, s: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| crate::error::Error::Format(e.to_string());
    w.write_record([
        "cell", "variant", "d", "n_tasks", "sigma_train", "rho", "n_nets", "n_ok", "ood_p25", "ood_p50", "ood_p75", "id_p25",
        "id_p50", "id_p75", "gap", "mean_accuracy",
    ])
    .map_err(csv_err)?;
    for c in &s.cells {
        let k = &c.cell;
        w.write_record([
            k.index.to_string(),
            k.variant.name().to_string(),
            k.d.to_string(),
            k.n_tasks.to_string(),
            k.sigma_train.to_string(),
            k.rho.to_string(),
            c.n_nets.to_string(),
            c.n_ok.to_string(),
            c.ood.p25.to_string(),
            c.ood.p50.to_string(),
            c.ood.p75.to_string(),
            c.id.p25.to_string(),
            c.id.p50.to_string(),
            c.id.p75.to_string(),
            c.gap.to_string(),
            c.mean_accuracy.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Format(e.to_string()))?;
    write_atomic(&dir.join("summary.csv"), &bytes)?;
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(s)?.as_bytes())?;

    let decode_line = |title: &str, x_label: &str, x: &dyn Fn(&Cell) -> f64, log_x: bool| {
        let ood = Series {
            name: "OOD".into(),
            points: s.cells.iter().map(|c| (x(&c.cell), c.ood.p50)).collect(),
            bars: s.cells.iter().map(|c| (x(&c.cell), c.ood.p25, c.ood.p75)).collect(),
            ..Default::default()
        };
        let id = Series {
            name: "ID".into(),
            points: s.cells.iter().map(|c| (x(&c.cell), c.id.p50)).collect(),
            bars: s.cells.iter().map(|c| (x(&c.cell), c.id.p25, c.id.p75)).collect(),
            ..Default::default()
        };
        LinePlot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: "decode r^2 (median, 25-75%)".into(),
            series: vec![ood, id],
            log_x,
        }
        .render()
    };
    match s.id {
        ExperimentId::E2 => {
            let svg = decode_line("r^2 against number of tasks", "N_task", &|c| c.n_tasks as f64, true);
            write_atomic(&dir.join("r2_vs_ntask.svg"), svg.as_bytes())?;
        }
        ExperimentId::E5 => {
            let svg = decode_line("r^2 against training noise", "sigma_train", &|c| c.sigma_train, false);
            write_atomic(&dir.join("r2_vs_sigma.svg"), svg.as_bytes())?;
        }
        ExperimentId::E6 => {
            let svg = decode_line("r^2 against factor correlation", "rho", &|c| c.rho, false);
            write_atomic(&dir.join("r2_vs_rho.svg"), svg.as_bytes())?;
        }
        ExperimentId::E4 => {
            let mut ds: Vec<usize> = s.cells.iter().map(|c| c.cell.d).collect();
            ds.dedup();
            let mut ns: Vec<usize> = s.cells.iter().map(|c| c.cell.n_tasks).collect();
            ns.sort_unstable();
            ns.dedup();
            let values: Vec<Vec<f64>> = ds
                .iter()
                .map(|&d| {
                    ns.iter()
                        .map(|&n| {
                            s.cells
                                .iter()
                                .find(|c| c.cell.d == d && c.cell.n_tasks == n)
                                .map_or(f64::NAN, |c| c.ood.p50)
                        })
                        .collect()
                })
                .collect();
            let rows: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
            let cols: Vec<String> = ns.iter().map(|n| n.to_string()).collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["d".to_string()];
            header.extend(cols.iter().cloned());
            w.write_record(&header).map_err(csv_err)?;
            for (r, v) in rows.iter().zip(&values) {
                let mut rec = vec![r.clone()];
                rec.extend(v.iter().map(|x| x.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| crate::error::Error::Format(e.to_string()))?;
            write_atomic(&dir.join("ood_grid.csv"), &bytes)?;
            let svg = heat_table("median OOD r^2", "D", &rows, "N_task", &cols, &values);
            write_atomic(&dir.join("ood_grid.svg"), svg.as_bytes())?;
        }
        ExperimentId::E8 => {
            if let Some(c) = s.cells.first().filter(|c| !c.over_time.is_empty()) {
                let plot = LinePlot {
                    title: "OOD r^2 over time".into(),
                    x_label: "t (steps)".into(),
                    y_label: "r^2".into(),
                    series: vec![
                        Series {
                            name: "network OOD".into(),
                            points: c.over_time.iter().map(|(t, p, _)| (*t as f64, p.p50)).collect(),
                            bars: c.over_time.iter().map(|(t, p, _)| (*t as f64, p.p25, p.p75)).collect(),
                            ..Default::default()
                        },
                        Series {
                            name: "theory".into(),
                            points: c.over_time.iter().map(|(t, _, th)| (*t as f64, *th)).collect(),
                            dashed: true,
                            ..Default::default()
                        },
                    ],
                    log_x: false,
                };
                write_atomic(&dir.join("r2_over_time.svg"), plot.render().as_bytes())?;
            }
        }
        ExperimentId::E11 => {
            if let Some(c) = s.cells.first() {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["t", "theory", "monte_carlo"]).map_err(csv_err)?;
                for p in &c.analytic {
                    w.write_record([p.t.to_string(), p.theory.to_string(), p.monte_carlo.to_string()])
                        .map_err(csv_err)?;
                }
                let bytes = w.into_inner().map_err(|e| crate::error::Error::Format(e.to_string()))?;
                write_atomic(&dir.join("theory_r2.csv"), &bytes)?;
                let plot = LinePlot {
                    title: "optimal r^2 over time".into(),
                    x_label: "t (steps)".into(),
                    y_label: "r^2".into(),
                    series: vec![
                        Series {
                            name: "closed form".into(),
                            points: c.analytic.iter().map(|p| (p.t as f64, p.theory)).collect(),
                            dashed: true,
                            ..Default::default()
                        },
                        Series {
                            name: "Monte Carlo".into(),
                            points: c.analytic.iter().map(|p| (p.t as f64, p.monte_carlo)).collect(),
                            ..Default::default()
                        },
                    ],
                    log_x: false,
                };
                write_atomic(&dir.join("theory_r2.svg"), plot.render().as_bytes())?;
            }
        }
        _ => {}
    }
    Ok(())
}
