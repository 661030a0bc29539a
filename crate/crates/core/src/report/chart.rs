//! Bar-chart data and a static SVG rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::country::Language;
use crate::error::{Error, Result};
use crate::experiment::{Experiment3Result, LanguageMode, ReportDocument};
use crate::stats::{PoolGroup, PoolSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    /// Agreement per prompting language.
    Exp2,
    /// Agreement per prompting scheme, with repetition spread.
    Exp3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    /// Language code or prompting scheme.
    pub group: String,
    pub metric: PoolSelector,
    pub value: f64,
    /// One standard deviation across repetitions, drawn as a whisker.
    pub sd: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartData {
    pub kind: ChartKind,
    pub title: String,
    pub bars: Vec<Bar>,
}

pub enum ChartInput<'a> {
    Languages(&'a [ReportDocument]),
    Schemes(&'a Experiment3Result),
}

const METRICS: [PoolSelector; 2] = [PoolSelector::COUNTRY, PoolSelector::FRAMING];

fn bar(group: String, doc: &ReportDocument, metric: PoolSelector) -> Bar {
    Bar {
        group,
        metric,
        value: doc.rate(metric),
        sd: None,
        p_value: doc.p_value(metric),
        significant: doc.significant(metric),
    }
}

pub fn emit_chart_data(input: ChartInput<'_>) -> Result<ChartData> {
    match input {
        ChartInput::Languages(reports) => language_chart(reports),
        ChartInput::Schemes(result) => scheme_chart(result),
    }
}

fn language_chart(reports: &[ReportDocument]) -> Result<ChartData> {
    if reports.is_empty() {
        return Err(Error::Structural("no reports to chart".into()));
    }
    let find = |language: Language| {
        reports
            .iter()
            .find(|r| r.language_mode == LanguageMode::Monolingual { language })
    };
    let missing: Vec<&str> = Language::ALL
        .into_iter()
        .filter(|&l| find(l).is_none())
        .map(|l| l.code())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Structural(format!("no report for {}", missing.join(", "))));
    }
    let mut bars = Vec::new();
    for language in Language::ALL {
        let doc = find(language).expect("checked above");
        for metric in METRICS {
            bars.push(bar(language.code().to_string(), doc, metric));
        }
    }
    Ok(ChartData {
        kind: ChartKind::Exp2,
        title: "Sign agreement by prompting language".into(),
        bars,
    })
}

fn scheme_chart(result: &Experiment3Result) -> Result<ChartData> {
    let mut bars = Vec::new();
    for doc in [&result.monolingual, &result.native] {
        for metric in METRICS {
            bars.push(bar(doc.condition.clone(), doc, metric));
        }
    }
    for summary in [&result.country_shuffled, &result.full_shuffled] {
        for metric in METRICS {
            let m = summary
                .metrics
                .get(&metric)
                .ok_or_else(|| Error::Structural(format!("{} lacks {metric}", summary.mode)))?;
            bars.push(Bar {
                group: summary.mode.clone(),
                metric,
                value: m.mean,
                sd: Some(m.sd),
                p_value: None,
                significant: m.significant,
            });
        }
    }
    Ok(ChartData {
        kind: ChartKind::Exp3,
        title: "Sign agreement by prompting scheme".into(),
        bars,
    })
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars on a 0 to 100% axis. Significant bars are drawn solid,
/// the rest pale.
pub fn render_svg(chart: &ChartData) -> String {
    const BAR: f64 = 22.0;
    const GAP: f64 = 18.0;
    const LEFT: f64 = 56.0;
    const TOP: f64 = 40.0;
    const HEIGHT: f64 = 260.0;
    const BOTTOM: f64 = 70.0;

    let mut groups: Vec<&str> = Vec::new();
    for b in &chart.bars {
        if !groups.contains(&b.group.as_str()) {
            groups.push(&b.group);
        }
    }
    let group_width = METRICS.len() as f64 * BAR + GAP;
    let width = LEFT + groups.len() as f64 * group_width + GAP;
    let total_height = TOP + HEIGHT + BOTTOM;
    let y = |v: f64| TOP + HEIGHT * (1.0 - v.clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_height:.0}" viewBox="0 0 {width:.0} {total_height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(&chart.title)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}%</text>"##,
            width - GAP / 2.0,
            y(tick),
            y(tick),
            LEFT - 6.0,
            y(tick) + 4.0,
            tick * 100.0
        );
    }
    for (g, group) in groups.iter().enumerate() {
        let x0 = LEFT + GAP + g as f64 * group_width;
        for b in chart.bars.iter().filter(|b| b.group == *group) {
            let k = METRICS.iter().position(|m| *m == b.metric).unwrap_or(0);
            let x = x0 + k as f64 * BAR;
            let colour = match b.metric.group {
                PoolGroup::Country => "#1f4e79",
                _ => "#8c2d04",
            };
            let opacity = if b.significant { 1.0 } else { 0.35 };
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{colour}" fill-opacity="{opacity}"><title>{} {}: {:.4}</title></rect>"#,
                y(b.value),
                BAR - 2.0,
                y(0.0) - y(b.value),
                escape(group),
                b.metric,
                b.value
            );
            if let Some(sd) = b.sd {
                let cx = x + (BAR - 2.0) / 2.0;
                let _ = writeln!(
                    svg,
                    r#"<line x1="{cx:.1}" x2="{cx:.1}" y1="{:.1}" y2="{:.1}" stroke="black"/>"#,
                    y(b.value + sd),
                    y(b.value - sd)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + METRICS.len() as f64 * BAR / 2.0,
            TOP + HEIGHT + 16.0,
            escape(group)
        );
    }
    let legend_y = TOP + HEIGHT + 44.0;
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{:.1}" width="10" height="10" fill="#1f4e79"/><text x="{:.1}" y="{:.1}">country terms</text><rect x="{:.1}" y="{:.1}" width="10" height="10" fill="#8c2d04"/><text x="{:.1}" y="{:.1}">framing and deprivation terms</text>"##,
        legend_y - 9.0,
        LEFT + 14.0,
        legend_y,
        LEFT + 120.0,
        legend_y - 9.0,
        LEFT + 134.0,
        legend_y
    );
    svg.push_str("</svg>\n");
    svg
}
