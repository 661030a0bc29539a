//! Reference data and rendering of results.

mod chart;
mod reference;
mod table;

pub use chart::{emit_chart_data, render_svg, Bar, ChartData, ChartInput, ChartKind};
pub use reference::{
    load_human_reference, load_published_model_table, parse_reference, verify_checksum, HumanReference,
    ROUNDED_COUNTRY_SUM_TOLERANCE,
};
pub use table::{
    format_percent, parse_comparison_csv, render_comparison_table, render_language_table, render_masking_table,
    render_scheme_table, ComparisonCsvRow, RenderedTable,
};
