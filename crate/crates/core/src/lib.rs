//! Persona survey simulation harness.
//!
//! The crate synthesizes a multinational respondent population, renders
//! questionnaire prompts for each respondent under controlled framing,
//! language and nationality-masking conditions, collects 1-7 ratings from a
//! pluggable backend, and scores the fidelity of the simulated responses
//! against a human reference by comparing the signs of fixed-effects
//! regression coefficients.
//!
//! Module map:
//!
//! - [`persona`]: population synthesis, framing assignment, JSON-lines I/O
//! - [`prompt`]: language catalogs and prompt rendering
//! - [`gateway`]: respondent backends (remote chat completion, synthetic)
//! - [`stats`]: scores, design matrices, OLS, sign agreement, permutations
//! - [`experiment`]: language plans and the three experiment drivers
//! - [`report`]: bundled reference tables, comparison tables, chart data

pub mod country;
pub mod error;
pub mod experiment;
pub mod gateway;
pub mod persona;
pub mod prompt;
pub mod report;
pub mod seed;
pub mod stats;

pub use country::{Country, Language};
pub use error::{Error, Result};
pub use persona::{FramingCondition, Gender, Persona, PopulationSpec};
pub use prompt::{LanguageCatalog, ProbeKind, RenderedPrompt};
