//! Accuracy report assembly and rendering: sixteen rows in curriculum
//! order, one column per method, a "Type Average" column, and a "Method
//! Average" row, as plain text and CSV. Percentages print to one decimal;
//! the CSV keeps full precision.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::taxonomy::{build_taxonomy, TYPE_COUNT};

/// Per-type accuracies (percent) for one method.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub name: String,
    pub per_type: BTreeMap<usize, f64>,
}

/// A fully computed report: inputs plus the derived averages.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub methods: Vec<MethodReport>,
    pub method_averages: Vec<f64>,
    pub type_averages: BTreeMap<usize, f64>,
    /// Mean of the method averages (the table's bottom-right cell).
    pub overall_average: f64,
}

/// Validate and aggregate: every method must cover all sixteen types; a
/// method's average is the unweighted mean of its sixteen accuracies.
pub fn build_report(methods: &[MethodReport]) -> Result<EvaluationReport> {
    if methods.is_empty() {
        return Err(Error::Usage("report needs at least one method".into()));
    }
    let taxonomy = build_taxonomy();
    for m in methods {
        for ty in taxonomy.types() {
            match m.per_type.get(&ty.id) {
                None => {
                    return Err(Error::Validation(format!(
                        "method '{}' is missing type {} ({})",
                        m.name, ty.id, ty.name
                    )))
                }
                Some(&v) if !(0.0..=100.0).contains(&v) => {
                    return Err(Error::Validation(format!(
                        "method '{}' has accuracy {v} for {} outside [0, 100]",
                        m.name, ty.name
                    )))
                }
                _ => {}
            }
        }
    }
    let method_averages: Vec<f64> = methods
        .iter()
        .map(|m| m.per_type.values().sum::<f64>() / TYPE_COUNT as f64)
        .collect();
    let type_averages: BTreeMap<usize, f64> = taxonomy
        .types()
        .iter()
        .map(|ty| {
            let mean = methods.iter().map(|m| m.per_type[&ty.id]).sum::<f64>()
                / methods.len() as f64;
            (ty.id, mean)
        })
        .collect();
    let overall_average = method_averages.iter().sum::<f64>() / methods.len() as f64;
    Ok(EvaluationReport {
        methods: methods.to_vec(),
        method_averages,
        type_averages,
        overall_average,
    })
}

/// Rendered forms of a report.
#[derive(Debug, Clone)]
pub struct RenderedReport {
    pub text: String,
    pub csv: String,
}

/// Render the text table and CSV. Deterministic: the same inputs yield
/// byte-identical output.
pub fn render_report(methods: &[MethodReport]) -> Result<RenderedReport> {
    let report = build_report(methods)?;
    let taxonomy = build_taxonomy();

    let mut header: Vec<String> = vec!["Phoneme Type".to_string()];
    header.extend(report.methods.iter().map(|m| m.name.clone()));
    header.push("Type Average".to_string());

    let mut rows: Vec<Vec<String>> = Vec::with_capacity(TYPE_COUNT + 1);
    for ty in taxonomy.types() {
        let mut row = vec![ty.name.clone()];
        for m in &report.methods {
            row.push(format!("{:.1}", m.per_type[&ty.id]));
        }
        row.push(format!("{:.1}", report.type_averages[&ty.id]));
        rows.push(row);
    }
    let mut avg_row = vec!["Method Average".to_string()];
    for avg in &report.method_averages {
        avg_row.push(format!("{avg:.1}"));
    }
    avg_row.push(format!("{:.1}", report.overall_average));
    rows.push(avg_row);

    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain(std::iter::once(header[c].len()))
                .max()
                .unwrap()
        })
        .collect();
    let fmt_row = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<width$}", width = widths[c])
                } else {
                    format!("{cell:>width$}", width = widths[c])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let rule = widths
        .iter()
        .map(|w| "-".repeat(*w))
        .collect::<Vec<_>>()
        .join("  ");
    let mut text = String::new();
    text.push_str(&fmt_row(&header));
    text.push('\n');
    text.push_str(&rule);
    text.push('\n');
    for (i, row) in rows.iter().enumerate() {
        if i == TYPE_COUNT {
            text.push_str(&rule);
            text.push('\n');
        }
        text.push_str(&fmt_row(row));
        text.push('\n');
    }

    let mut csv = String::new();
    let quote = |s: &str| {
        if s.contains(',') || s.contains('"') {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    csv.push_str(
        &header
            .iter()
            .map(|h| quote(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    csv.push('\n');
    for ty in taxonomy.types() {
        let mut cells = vec![quote(&ty.name)];
        for m in &report.methods {
            cells.push(m.per_type[&ty.id].to_string());
        }
        cells.push(report.type_averages[&ty.id].to_string());
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let mut cells = vec!["Method Average".to_string()];
    for avg in &report.method_averages {
        cells.push(avg.to_string());
    }
    cells.push(report.overall_average.to_string());
    csv.push_str(&cells.join(","));
    csv.push('\n');

    Ok(RenderedReport { text, csv })
}

/// Previously reported per-type accuracies for the three strategies on
/// the full-scale benchmark, usable as a side-by-side reference column.
/// Order: Fine-Tune, Multitask, Curriculum; rows in curriculum order.
pub const REFERENCE_ACCURACIES: [(&str, [f64; 3]); TYPE_COUNT] = [
    ("Major Location", [87.7, 87.5, 89.1]),
    ("Minor Location", [79.2, 78.1, 80.7]),
    ("Second Minor Location", [78.7, 77.2, 80.9]),
    ("Contact", [89.3, 88.6, 91.1]),
    ("Thumb Contact", [91.7, 91.1, 92.1]),
    ("Sign Type", [88.9, 87.9, 89.4]),
    ("Repeated Movement", [85.5, 85.4, 87.3]),
    ("Path Movement", [75.6, 75.4, 79.6]),
    ("Wrist Twist", [92.4, 92.6, 93.5]),
    ("Spread", [88.4, 88.0, 88.8]),
    ("Flexion", [81.2, 81.0, 83.2]),
    ("Thumb Position", [91.5, 91.5, 91.8]),
    ("Selected Fingers", [91.1, 90.2, 90.6]),
    ("Spread Change", [90.3, 89.5, 90.4]),
    ("Nondominant Handshape", [83.5, 81.7, 83.2]),
    ("Handshape", [77.4, 74.7, 76.9]),
];

/// The reference accuracies as ready-made method reports, marked
/// "paper-reported" so they are never mistaken for local results.
pub fn reference_reports() -> Vec<MethodReport> {
    let taxonomy = build_taxonomy();
    let names = ["Fine-Tune", "Multitask", "Curriculum"];
    names
        .iter()
        .enumerate()
        .map(|(col, base)| MethodReport {
            name: format!("{base} (paper-reported)"),
            per_type: REFERENCE_ACCURACIES
                .iter()
                .map(|(name, vals)| (taxonomy.by_name(name).unwrap().id, vals[col]))
                .collect(),
        })
        .collect()
}
