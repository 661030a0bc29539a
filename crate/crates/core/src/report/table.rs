//! Text and CSV renderings of agreement results.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Experiment1Result, Experiment2Result, Experiment3Result, ReportDocument};
use crate::stats::{
    CoefficientEstimate, CoefficientTable, Outcome, PoolGroup, PoolScope, PoolSelector, PooledRate,
    SignAgreementReport, Term,
};

/// Percentages at one decimal below 10%, whole numbers otherwise.
pub fn format_percent(p: f64) -> String {
    let v = p * 100.0;
    if v.is_nan() {
        "n/a".into()
    } else if v < 9.95 {
        format!("{v:.1}%")
    } else {
        format!("{v:.0}%")
    }
}

fn format_estimate(e: &CoefficientEstimate) -> String {
    format!("{:+.3} ({:.3})", e.value, e.se)
}

fn format_rate(rate: Option<&PooledRate>) -> String {
    match rate {
        Some(r) => format!("{}{}", format_percent(r.rate), if r.significant() { "*" } else { "" }),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// One CSV line: either a coefficient (`kind = coefficient`) or a pooled
/// rate (`kind = pooled`, `term` holding the metric key).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
    pub kind: String,
    pub term: String,
    pub outcome: Option<Outcome>,
    pub reference_value: Option<f64>,
    pub reference_se: Option<f64>,
    pub model_value: Option<f64>,
    pub model_se: Option<f64>,
    pub agreement: f64,
    pub p_value: Option<f64>,
    pub members: Option<usize>,
}

fn structural_mismatch(what: &str, a: &BTreeSet<(Outcome, Term)>, b: &BTreeSet<(Outcome, Term)>) -> Error {
    let diff: Vec<String> = a.symmetric_difference(b).map(|(o, t)| t.label(*o)).collect();
    Error::Structural(format!("{what} cover different coefficients: {}", diff.join(", ")))
}

/// Side-by-side coefficients and agreements, effects first then
/// countries, with pooled rates after each block and overall. Pooled
/// rates significant at the 5% level are starred.
pub fn render_comparison_table(
    reference: &CoefficientTable,
    model: &CoefficientTable,
    report: &SignAgreementReport,
) -> Result<RenderedTable> {
    let (rk, mk) = (reference.keys(), model.keys());
    if rk != mk {
        return Err(structural_mismatch("reference and model tables", &rk, &mk));
    }
    let ek: BTreeSet<(Outcome, Term)> = report.entries.iter().map(|e| (e.outcome, e.term)).collect();
    if ek != rk {
        return Err(structural_mismatch("agreement report and tables", &ek, &rk));
    }

    let terms: Vec<Term> = rk.iter().map(|(_, t)| *t).collect::<BTreeSet<_>>().into_iter().collect();
    let mut text = String::new();
    let width = 16;
    let _ = writeln!(
        text,
        "{:<6} | {:>w$} {:>w$} {:>6} | {:>w$} {:>w$} {:>6} | {:>6}",
        "",
        "P human",
        "P model",
        "agree",
        "M human",
        "M model",
        "agree",
        "P&M",
        w = width
    );
    let pooled_line = |text: &mut String, label: &str, group: PoolGroup| {
        let get = |scope| format_rate(report.pooled.get(&PoolSelector::new(group, scope)));
        let _ = writeln!(
            text,
            "{:<6} | {:>w$} {:>w$} {:>6} | {:>w$} {:>w$} {:>6} | {:>6}",
            label,
            "",
            "",
            get(PoolScope::Only(Outcome::Persuasion)),
            "",
            "",
            get(PoolScope::Only(Outcome::Mobilization)),
            get(PoolScope::Both),
            w = width
        );
    };
    let mut csv_rows = Vec::new();
    let mut previous_was_effect = None;
    for term in &terms {
        if previous_was_effect == Some(true) && term.is_country() {
            pooled_line(&mut text, "", PoolGroup::Framing);
        }
        previous_was_effect = Some(!term.is_country());
        let mut cells = Vec::new();
        let mut row_agreements = Vec::new();
        for outcome in Outcome::ALL {
            let (Some(r), Some(m), Some(a)) = (
                reference.get(*term, outcome),
                model.get(*term, outcome),
                report.agreement(*term, outcome),
            ) else {
                cells.extend([String::new(), String::new(), String::new()]);
                continue;
            };
            cells.extend([format_estimate(r), format_estimate(m), format_percent(a)]);
            row_agreements.push(a);
            csv_rows.push(ComparisonCsvRow {
                kind: "coefficient".into(),
                term: term.name(),
                outcome: Some(outcome),
                reference_value: Some(r.value),
                reference_se: Some(r.se),
                model_value: Some(m.value),
                model_se: Some(m.se),
                agreement: a,
                p_value: None,
                members: None,
            });
        }
        let both = if row_agreements.is_empty() {
            String::new()
        } else {
            format_percent(row_agreements.iter().sum::<f64>() / row_agreements.len() as f64)
        };
        let _ = writeln!(
            text,
            "{:<6} | {:>w$} {:>w$} {:>6} | {:>w$} {:>w$} {:>6} | {:>6}",
            term.display(),
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            cells[4],
            cells[5],
            both,
            w = width
        );
    }
    match previous_was_effect {
        Some(true) => pooled_line(&mut text, "", PoolGroup::Framing),
        Some(false) => pooled_line(&mut text, "", PoolGroup::Country),
        None => {}
    }
    pooled_line(&mut text, "All", PoolGroup::All);
    text.push_str("* significantly (p < 0.05) greater than chance\n");

    for (selector, rate) in &report.pooled {
        csv_rows.push(ComparisonCsvRow {
            kind: "pooled".into(),
            term: selector.key(),
            outcome: None,
            reference_value: None,
            reference_se: None,
            model_value: None,
            model_se: None,
            agreement: rate.rate,
            p_value: rate.p_value,
            members: Some(rate.members),
        });
    }
    Ok(RenderedTable {
        text,
        csv: write_csv(&csv_rows)?,
    })
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Argument(format!("csv: {e}")))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Argument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_comparison_csv(text: &str) -> Result<Vec<ComparisonCsvRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| Error::Argument(format!("csv: {e}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PooledCsvRow {
    run: String,
    metric: String,
    rate: f64,
    p_value: Option<f64>,
    sd: Option<f64>,
    significant: bool,
}

fn is_significant(p: Option<f64>) -> bool {
    p.is_some_and(|p| p < crate::stats::SIGNIFICANCE_LEVEL)
}

fn metric_label(selector: PoolSelector) -> &'static str {
    match selector.group {
        PoolGroup::Country => "Country-specific bias terms",
        PoolGroup::Framing => "Framing and relative deprivation coefficients",
        PoolGroup::All => "All coefficients",
    }
}

/// Masked against unmasked pooled rates.
pub fn render_masking_table(result: &Experiment1Result) -> Result<RenderedTable> {
    let mut text = format!("{:<48} {:>8} {:>8}\n", "Coefficients", "Masked", "Unmasked");
    let mut rows = Vec::new();
    for row in result.rows() {
        let mark = |p: Option<f64>| if is_significant(p) { "*" } else { "" };
        let _ = writeln!(
            text,
            "{:<48} {:>8} {:>8}",
            metric_label(row.metric),
            format!("{}{}", format_percent(row.masked), mark(row.masked_p)),
            format!("{}{}", format_percent(row.unmasked), mark(row.unmasked_p)),
        );
        for (run, rate, p) in [("masked", row.masked, row.masked_p), ("unmasked", row.unmasked, row.unmasked_p)] {
            rows.push(PooledCsvRow {
                run: run.into(),
                metric: row.metric.key(),
                rate,
                p_value: p,
                sd: None,
                significant: is_significant(p),
            });
        }
    }
    text.push_str("* significantly (p < 0.05) greater than chance\n");
    Ok(RenderedTable {
        text,
        csv: write_csv(&rows)?,
    })
}

fn run_rows(doc: &ReportDocument) -> Vec<PooledCsvRow> {
    [PoolSelector::COUNTRY, PoolSelector::FRAMING]
        .into_iter()
        .map(|sel| PooledCsvRow {
            run: doc.condition.clone(),
            metric: sel.key(),
            rate: doc.rate(sel),
            p_value: doc.p_value(sel),
            sd: None,
            significant: doc.significant(sel),
        })
        .collect()
}

fn pooled_text(rows: &[PooledCsvRow]) -> String {
    let mut text = format!("{:<20} {:>9} {:>9}\n", "Run", "Country", "Framing");
    for pair in rows.chunks(2) {
        let cell = |r: &PooledCsvRow| {
            let mark = if r.significant { "*" } else { "" };
            match r.sd {
                Some(sd) => format!("{}±{:.0}{mark}", format_percent(r.rate), sd * 100.0),
                None => format!("{}{mark}", format_percent(r.rate)),
            }
        };
        let _ = writeln!(text, "{:<20} {:>9} {:>9}", pair[0].run, cell(&pair[0]), cell(&pair[1]));
    }
    text.push_str("* significantly (p < 0.05) greater than chance\n");
    text
}

/// Pooled country and framing rates for each language.
pub fn render_language_table(result: &Experiment2Result) -> Result<RenderedTable> {
    let rows: Vec<PooledCsvRow> = result.runs.iter().flat_map(run_rows).collect();
    Ok(RenderedTable {
        text: pooled_text(&rows),
        csv: write_csv(&rows)?,
    })
}

/// Pooled rates per prompting scheme, with the spread across repetitions
/// for the shuffled schemes. A shuffled scheme is starred when most of its
/// repetitions were significant.
pub fn render_scheme_table(result: &Experiment3Result) -> Result<RenderedTable> {
    let mut rows: Vec<PooledCsvRow> = Vec::new();
    rows.extend(run_rows(&result.monolingual));
    rows.extend(run_rows(&result.native));
    for summary in [&result.country_shuffled, &result.full_shuffled] {
        for sel in [PoolSelector::COUNTRY, PoolSelector::FRAMING] {
            let m = summary.metric(sel);
            rows.push(PooledCsvRow {
                run: summary.mode.clone(),
                metric: sel.key(),
                rate: m.mean,
                p_value: None,
                sd: Some(m.sd),
                significant: m.significant,
            });
        }
    }
    Ok(RenderedTable {
        text: pooled_text(&rows),
        csv: write_csv(&rows)?,
    })
}
