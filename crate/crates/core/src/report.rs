//! Tabular output: tariff tables, validation and simulation reports, and
//! schedule CSV input.
//!
//! Every table renders either as aligned text or as CSV, with numbers fixed at
//! four decimals unless full precision is asked for.

use std::collections::BTreeMap;
use std::io::Read;

use crate::deductible::{DeductibleSchedule, ValidationReport};
use crate::error::{Error, Result};
use crate::relativity::{malus_entry_level, SteadyStateProfile};
use crate::simulate::SimulationReport;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self, full_precision: bool) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) if full_precision => format!("{v}"),
            Cell::Num(v) => fixed4(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Four decimals, without a sign on values that round to zero.
pub fn fixed4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self, full_precision: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.render(full_precision)))
                .map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    /// Right-aligned columns separated by two spaces.
    pub fn to_text(&self, full_precision: bool) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.render(full_precision)).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].len())
                    .chain([self.header[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |items: &[String]| {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = line(&self.header);
        out.push('\n');
        for r in &cells {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

/// Level table, top level first: `l, pi, r, premium` and, with a schedule,
/// `alpha, reduced_premium, d_0..d_m`.
pub fn tariff_table(
    profile: &SteadyStateProfile,
    mean_claim: f64,
    schedule: Option<&DeductibleSchedule>,
) -> Table {
    let mut header: Vec<String> = ["l", "pi", "r", "premium"].map(String::from).to_vec();
    if let Some(s) = schedule {
        header.push("alpha".into());
        header.push("reduced_premium".into());
        header.extend((0..s.num_types()).map(|i| format!("d_{i}")));
    }
    let rows = (0..profile.levels())
        .rev()
        .map(|l| {
            let premium = profile.premium(l, mean_claim);
            let mut row = vec![
                Cell::Int(l as u64),
                Cell::Num(profile.proportions[l]),
                Cell::Num(profile.relativities[l]),
                Cell::Num(premium),
            ];
            if let Some(s) = schedule {
                let alpha = s.alpha(l);
                row.push(Cell::Num(alpha));
                row.push(Cell::Num((1.0 - alpha) * premium));
                row.extend((0..s.num_types()).map(|i| Cell::Num(s.deductible(l, i))));
            }
            row
        })
        .collect();
    Table { header, rows }
}

fn yes_no(ok: bool) -> Cell {
    Cell::Text(if ok { "pass" } else { "FAIL" }.into())
}

/// One row per malus level with the residual and every check.
pub fn validation_table(report: &ValidationReport) -> Table {
    let header = [
        "l",
        "alpha",
        "residual",
        "residual_ok",
        "alpha_range",
        "assumption_1",
        "assumption_2_i",
        "assumption_2_ii",
        "assumption_2_iii",
        "top_type_bound",
        "alpha_nondecreasing",
    ]
    .map(String::from)
    .to_vec();
    let rows = report
        .levels
        .iter()
        .rev()
        .map(|c| {
            vec![
                Cell::Int(c.level as u64),
                Cell::Num(c.alpha),
                Cell::Text(format!("{:.3e}", c.residual)),
                yes_no(c.residual_ok),
                yes_no(c.alpha_range),
                yes_no(c.assumption1),
                yes_no(c.assumption2_bounds),
                yes_no(c.assumption2_row),
                yes_no(c.assumption2_column),
                yes_no(c.top_type_bound),
                yes_no(c.alpha_nondecreasing),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Empirical statistics next to their analytic targets, top level first.
///
/// `expected_paid[k]` belongs to level `malus_entry + k`.
pub fn simulation_table(
    report: &SimulationReport,
    profile: &SteadyStateProfile,
    expected_paid: &[f64],
) -> Table {
    let mut header: Vec<String> = ["l", "pi", "pi_sim", "pi_se", "r", "r_sim", "r_se"]
        .map(String::from)
        .to_vec();
    let with_paid = !report.mean_deductible_paid.is_empty();
    if with_paid {
        header.extend(["paid", "paid_sim", "paid_se"].map(String::from));
    }
    let rows = (0..profile.levels())
        .rev()
        .map(|l| {
            let mut row = vec![
                Cell::Int(l as u64),
                Cell::Num(profile.proportions[l]),
                Cell::Num(report.empirical_proportions[l]),
                Cell::Num(report.proportion_se[l]),
                Cell::Num(profile.relativities[l]),
                Cell::Num(report.empirical_relativities[l]),
                Cell::Num(report.relativity_se[l]),
            ];
            if with_paid {
                let k = report
                    .malus_entry
                    .and_then(|s0| l.checked_sub(s0))
                    .filter(|&k| k < report.mean_deductible_paid.len());
                match k {
                    Some(k) => {
                        row.push(Cell::Num(expected_paid.get(k).copied().unwrap_or(f64::NAN)));
                        row.push(Cell::Num(report.mean_deductible_paid[k]));
                        row.push(Cell::Num(report.deductible_se[k]));
                    }
                    None => row.extend([Cell::Num(0.0), Cell::Num(0.0), Cell::Num(0.0)]),
                }
            }
            row
        })
        .collect();
    Table { header, rows }
}

/// Reads a schedule from CSV with a header row.
///
/// Columns `l`, `alpha` and `d_0..d_m` are required; others (such as the
/// `pi`, `r` and premium columns written by [`tariff_table`]) are ignored.
/// Rows may come in any order. Levels below the malus entry must carry zero
/// reduction and zero deductibles.
pub fn read_schedule_csv<R: Read>(
    reader: R,
    num_types: usize,
    relativities: &[f64],
) -> Result<DeductibleSchedule> {
    let bad = |msg: String| Error::InvalidSchedule(msg);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| bad(format!("csv header: {e}")))?
        .clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let level_col = column("l")?;
    let alpha_col = column("alpha")?;
    let d_cols = (0..num_types)
        .map(|i| column(&format!("d_{i}")))
        .collect::<Result<Vec<_>>>()?;

    let mut by_level: BTreeMap<usize, (f64, Vec<f64>)> = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| bad(format!("csv row {}: {e}", line + 1)))?;
        let field = |j: usize| record.get(j).unwrap_or("");
        let level: usize = field(level_col).parse().map_err(|_| {
            bad(format!(
                "row {}: bad level {:?}",
                line + 1,
                field(level_col)
            ))
        })?;
        let num = |j: usize| {
            field(j)
                .parse::<f64>()
                .map_err(|_| bad(format!("level {level}: bad number {:?}", field(j))))
        };
        let alpha = num(alpha_col)?;
        let d = d_cols.iter().map(|&j| num(j)).collect::<Result<Vec<_>>>()?;
        if by_level.insert(level, (alpha, d)).is_some() {
            return Err(bad(format!("level {level} appears twice")));
        }
    }

    let s0 = malus_entry_level(relativities)?;
    let top = relativities.len() - 1;
    let mut alphas = Vec::new();
    let mut rows = Vec::new();
    for (&level, (alpha, d)) in &by_level {
        if level > top {
            return Err(bad(format!("level {level} above top level {top}")));
        }
        if level < s0 && (*alpha != 0.0 || d.iter().any(|v| *v != 0.0)) {
            return Err(bad(format!(
                "level {level} is a bonus level (malus zone starts at {s0}) but carries a reduction or deductible"
            )));
        }
    }
    for level in s0..=top {
        let (alpha, d) = by_level
            .get(&level)
            .ok_or_else(|| bad(format!("missing malus level {level}")))?;
        alphas.push(*alpha);
        rows.push(d.clone());
    }
    DeductibleSchedule::new(s0, alphas, rows)
}
