use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::MetricSet;

/// Rounds half-up to `decimals` places. A tiny slack absorbs binary
/// representation error so that e.g. 0.92485 rounds up.
pub fn round_half_up(x: f64, decimals: i32) -> f64 {
    let scale = libm::pow(10.0, decimals as f64);
    libm::floor(x * scale + 0.5 + 1e-9) / scale
}

fn cell(x: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:.4}", round_half_up(x, 4));
    s
}

/// Plain-text table plus its CSV twin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    pub csv: String,
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        let mut out = String::from("\"");
        out.push_str(&s.replace('"', "\"\""));
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

/// Columns Recall, Precision, F1, then Accuracy and ROC AUC when any row
/// carries them. Rows keep input order.
pub fn render_report<S: AsRef<str>>(rows: &[(S, MetricSet)]) -> Report {
    let with_acc = rows.iter().any(|r| r.1.accuracy.is_some());
    let with_auc = rows.iter().any(|r| r.1.roc_auc.is_some());

    let mut text_headers: Vec<&str> = alloc::vec!["Recall", "Prec.", "F1"];
    let mut csv_headers: Vec<&str> = alloc::vec!["Model", "Recall", "Precision", "F1"];
    if with_acc {
        text_headers.push("Acc.");
        csv_headers.push("Accuracy");
    }
    if with_auc {
        text_headers.push("AUC");
        csv_headers.push("ROC AUC");
    }

    let table: Vec<(String, Vec<String>)> = rows
        .iter()
        .map(|(name, m)| {
            let mut cells = alloc::vec![cell(m.recall), cell(m.precision), cell(m.f1)];
            let opt = |v: Option<f64>| v.map_or_else(|| String::from("-"), cell);
            if with_acc {
                cells.push(opt(m.accuracy));
            }
            if with_auc {
                cells.push(opt(m.roc_auc));
            }
            (String::from(name.as_ref()), cells)
        })
        .collect();

    let name_width = rows
        .iter()
        .map(|r| r.0.as_ref().chars().count())
        .max()
        .unwrap_or(0)
        .max(5);
    let col_width = 6;
    let mut text = String::new();
    let mut line = String::new();
    let _ = write!(line, "{:<name_width$}", "Model");
    for h in &text_headers {
        let _ = write!(line, "  {h:<col_width$}");
    }
    text.push_str(line.trim_end());
    text.push('\n');
    for (name, cells) in &table {
        line.clear();
        let _ = write!(line, "{name:<name_width$}");
        for c in cells {
            let _ = write!(line, "  {c:<col_width$}");
        }
        text.push_str(line.trim_end());
        text.push('\n');
    }

    let mut csv = csv_headers.join(",");
    csv.push('\n');
    for (name, cells) in &table {
        csv.push_str(&csv_escape(name));
        for c in cells {
            csv.push(',');
            if c != "-" {
                csv.push_str(c);
            }
        }
        csv.push('\n');
    }
    Report { text, csv }
}
