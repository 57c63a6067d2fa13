//! Subcommand bodies. Each builds a [`Table`] from a resolved config.

use molcomm::capacity::{capacity_sweep, CapacitySettings};
use molcomm::modulation::{
    min_power_for_target_error, modulation_rate, Feasibility, ModulationScheme, WeightSettings,
};
use molcomm::montecarlo::{validate_approximations, MomentCheck, SimConfig};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Row, Table};

/// Upper end of the default feasibility search.
const DEFAULT_P_MAX_CAP: f64 = 0.999;

pub struct Outcome {
    pub table: Table,
    /// Set when a validation check failed.
    pub failed: bool,
    /// Non-fatal diagnostics for standard error.
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self {
            table,
            failed: false,
            warnings: Vec::new(),
        }
    }
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

pub fn moments(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let link = config.link()?;
    let p0 = config.p0;
    let a0 = link.receiver().bacterium().concentration_for_probability(p0)?;
    let a1 = link.stimulus_concentration(a0)?;
    let x = link.transmitter_output_moments(a1)?;
    let a2 = link.received_concentration_stats(a0)?;
    let y = link.receiver_output_moments(p0)?;
    let row = Row::new(vec![
        p0.into(),
        a0.into(),
        a1.into(),
        x.mean.into(),
        x.variance.into(),
        link.transmitter_variance_large_n(a1)?.into(),
        a2.mean.into(),
        a2.variance.into(),
        y.mean.into(),
        y.variance.into(),
        link.receiver_variance_large_n(p0)?.into(),
        link.normalized_output_std(p0)?.into(),
    ]);
    Ok(Outcome::ok(Table {
        command: "moments",
        columns: columns(&[
            "p0",
            "a0",
            "a1",
            "mean_x",
            "var_x",
            "var_x_large_n",
            "mean_a2",
            "var_a2",
            "mean_y",
            "var_y",
            "var_y_large_n",
            "normalized_std_y",
        ]),
        rows: vec![row],
    }))
}

fn check_row(p0: f64, quantity: &str, c: &MomentCheck) -> Vec<Cell> {
    vec![
        p0.into(),
        quantity.into(),
        c.analytic.mean.into(),
        c.empirical.mean.into(),
        c.empirical.std_error_mean.into(),
        c.mean_gap.into(),
        c.mean_pass.into(),
        c.analytic.variance.into(),
        c.empirical.variance.into(),
        c.empirical.std_error_variance.into(),
        c.variance_gap.into(),
        c.variance_pass.into(),
    ]
}

pub fn validate(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let link = config.link()?;
    let sim = SimConfig::new(config.trials, config.seed)?.with_antithetic(config.antithetic)?;
    let report = validate_approximations(&link, &config.p0_grid, &sim)?;
    let mut rows = Vec::new();
    for point in &report.points {
        for (name, check) in [("x", &point.x), ("a2", &point.a2), ("y", &point.y)] {
            let mut cells = check_row(point.p0, name, check);
            cells.push(point.clamp_events.into());
            cells.push(point.gain_draws.into());
            rows.push(Row::new(cells).with_detail("a0", point.a0).with_detail("a1", point.a1));
        }
    }
    let failed = !report.all_pass();
    let mut warnings = Vec::new();
    if failed {
        let bad: Vec<String> = report
            .points
            .iter()
            .filter(|p| !p.passed())
            .map(|p| p.p0.to_string())
            .collect();
        warnings.push(format!("validation FAILED at p0 = {}", bad.join(", ")));
    }
    Ok(Outcome {
        table: Table {
            command: "validate",
            columns: columns(&[
                "p0",
                "quantity",
                "analytic_mean",
                "empirical_mean",
                "std_error_mean",
                "mean_gap",
                "mean_check",
                "analytic_variance",
                "empirical_variance",
                "std_error_variance",
                "variance_gap",
                "variance_check",
                "clamp_events",
                "gain_draws",
            ]),
            rows,
        },
        failed,
        warnings,
    })
}

pub fn capacity_settings(config: &ExperimentConfig) -> CapacitySettings {
    CapacitySettings {
        levels: config.levels,
        bins: config.bins,
        tol: config.tol,
        max_iter: config.max_iter,
    }
}

pub fn weight_settings(config: &ExperimentConfig) -> WeightSettings {
    WeightSettings {
        bins: config.bins,
        tol: config.tol,
        max_iter: config.max_iter,
    }
}

pub fn capacity_table(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let link = config.link()?;
    let settings = capacity_settings(config);
    let cells = capacity_sweep(&link, &config.p_max_grid, &config.bacteria_list, &settings);
    let mut rows = Vec::with_capacity(cells.len());
    let mut capped = 0usize;
    let mut worst_gap = 0.0f64;
    for cell in &cells {
        let mut cells = vec![
            cell.bacteria.into(),
            cell.p_max.into(),
            settings.levels.into(),
            settings.bins.into(),
        ];
        let row = match &cell.outcome {
            Ok(r) => {
                if !r.converged {
                    capped += 1;
                    worst_gap = worst_gap.max(r.upper_bound_gap);
                }
                cells.extend([
                    r.capacity_bits.into(),
                    r.iterations.into(),
                    r.upper_bound_gap.into(),
                    if r.converged { "converged" } else { "max-iter" }.into(),
                ]);
                Row::new(cells).with_detail("input_distribution", &r.input_distribution)
            }
            Err(e) => {
                cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, format!("error: {e}").into()]);
                Row::new(cells)
            }
        };
        rows.push(row);
    }
    let mut warnings = Vec::new();
    if capped > 0 {
        warnings.push(format!(
            "{capped} of {} cells stopped at max_iter = {} (largest gap {worst_gap:.3e} bits)",
            cells.len(),
            settings.max_iter
        ));
    }
    Ok(Outcome {
        table: Table {
            command: "capacity-sweep",
            columns: columns(&["n", "p_max", "K", "B", "capacity_bits", "iterations", "gap", "status"]),
            rows,
        },
        failed: false,
        warnings,
    })
}

pub fn modulation_table(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let link = config.link()?;
    let settings = weight_settings(config);
    let widest = config.m_list.iter().copied().max().unwrap_or(0);
    let jobs: Vec<(usize, f64)> = config
        .m_list
        .iter()
        .flat_map(|&m| config.p_max_grid.iter().map(move |&p| (m, p)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(m, p_max)| {
            let (scheme, weights) = ModulationScheme::optimized(&link, m, p_max, &settings)?;
            let report = modulation_rate(&link, &scheme)?;
            Ok::<_, molcomm::Error>((scheme, weights, report))
        })
        .collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(m, p_max), result) in jobs.iter().zip(results) {
        let (scheme, weights, report) = result?;
        let mut cells: Vec<Cell> = vec![m.into(), p_max.into(), report.rate_bits.into(), report.total_error.into()];
        cells.extend(report.per_symbol_error.iter().map(|&e| Cell::from(e)));
        cells.resize(4 + widest, Cell::Empty);
        rows.push(
            Row::new(cells)
                .with_detail("weights", scheme.weights())
                .with_detail("weights_capacity_bits", weights.capacity_bits)
                .with_detail("region_error", report.region_error)
                .with_detail("decision_half_width", report.decision_half_width),
        );
    }
    let mut names = columns(&["m", "p_max", "rate_bits", "total_error"]);
    names.extend((0..widest).map(|i| format!("pe_{i}")));
    Ok(Outcome::ok(Table {
        command: "modulation-sweep",
        columns: names,
        rows,
    }))
}

pub fn feasibility(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let link = config.link()?;
    let settings = weight_settings(config);
    let jobs: Vec<(u32, usize)> = config
        .bacteria_list
        .iter()
        .flat_map(|&n| config.m_list.iter().map(move |&m| (n, m)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, m)| {
            let link = link.with_bacteria(n)?;
            let cap = config
                .p_max_cap
                .unwrap_or_else(|| DEFAULT_P_MAX_CAP.min(link.max_admissible_probability()));
            let found = min_power_for_target_error(&link, m, config.target_error, cap, &settings)?;
            Ok::<_, molcomm::Error>((cap, found))
        })
        .collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (&(n, m), result) in jobs.iter().zip(results) {
        let (cap, found) = result?;
        let (status, p_max, error) = match found {
            Feasibility::Feasible { p_max, total_error } => ("feasible", p_max, total_error),
            Feasibility::Infeasible { min_error, at_p_max } => ("infeasible", at_p_max, min_error),
        };
        rows.push(Row::new(vec![
            n.into(),
            m.into(),
            config.target_error.into(),
            cap.into(),
            status.into(),
            p_max.into(),
            error.into(),
        ]));
    }
    Ok(Outcome::ok(Table {
        command: "feasibility",
        columns: columns(&["n", "m", "target_error", "p_max_cap", "status", "p_max", "total_error"]),
        rows,
    }))
}
