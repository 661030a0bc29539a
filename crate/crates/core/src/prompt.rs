//! Questionnaire prompt rendering.
//!
//! A prompt reads like a partly completed questionnaire: a demographics
//! block, the persona's relative-deprivation ratings, one of four article
//! versions, and a closing instruction followed by exactly one probe
//! statement. Every localized string comes from a [`LanguageCatalog`];
//! nothing user-visible is hard-coded here.
//!
//! Article templates may contain the placeholders `[nationals]` and
//! `[country]`. Each placeholder must sit inside an optional span delimited
//! by `⟦` and `⟧`. Unmasked rendering substitutes the persona's demonym and
//! country name and drops the delimiters; masked rendering removes every
//! span that holds a placeholder.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::country::{Country, Language};
use crate::error::{Error, Result};
use crate::persona::{FramingCondition, Gender, Persona};

pub const PLACEHOLDER_NATIONALS: &str = "[nationals]";
pub const PLACEHOLDER_COUNTRY: &str = "[country]";
pub const SPAN_OPEN: char = '\u{27E6}';
pub const SPAN_CLOSE: char = '\u{27E7}';

/// String keys every catalog must define.
pub const REQUIRED_STRINGS: [&str; 16] = [
    "intro",
    "demographics_header",
    "age_label",
    "gender_label",
    "gender.female",
    "gender.male",
    "gender.other",
    "education_label",
    "country_label",
    "deprivation_header",
    "deprivation_instruction",
    "article_header",
    "photo_label",
    "final_instruction",
    "scale_hint",
    "answer_label",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    #[serde(rename = "persuasion_1")]
    Persuasion1,
    #[serde(rename = "persuasion_2")]
    Persuasion2,
    #[serde(rename = "mobilization_1")]
    Mobilization1,
    #[serde(rename = "mobilization_2")]
    Mobilization2,
    #[serde(rename = "mobilization_3")]
    Mobilization3,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 5] = [
        ProbeKind::Persuasion1,
        ProbeKind::Persuasion2,
        ProbeKind::Mobilization1,
        ProbeKind::Mobilization2,
        ProbeKind::Mobilization3,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ProbeKind::Persuasion1 => "persuasion_1",
            ProbeKind::Persuasion2 => "persuasion_2",
            ProbeKind::Mobilization1 => "mobilization_1",
            ProbeKind::Mobilization2 => "mobilization_2",
            ProbeKind::Mobilization3 => "mobilization_3",
        }
    }

    pub fn is_persuasion(self) -> bool {
        matches!(self, ProbeKind::Persuasion1 | ProbeKind::Persuasion2)
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Template key for one of the four article versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticleKey {
    Factual,
    AntiElite,
    AntiImmigrant,
    Combined,
}

impl ArticleKey {
    pub const ALL: [ArticleKey; 4] = [
        ArticleKey::Factual,
        ArticleKey::AntiElite,
        ArticleKey::AntiImmigrant,
        ArticleKey::Combined,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ArticleKey::Factual => "factual",
            ArticleKey::AntiElite => "anti_elite",
            ArticleKey::AntiImmigrant => "anti_immigrant",
            ArticleKey::Combined => "combined",
        }
    }
}

pub fn select_article(framing: FramingCondition) -> ArticleKey {
    match (framing.anti_elite, framing.anti_immigrant) {
        (false, false) => ArticleKey::Factual,
        (true, false) => ArticleKey::AntiElite,
        (false, true) => ArticleKey::AntiImmigrant,
        (true, true) => ArticleKey::Combined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageCatalog {
    pub language_code: Language,
    pub strings: BTreeMap<String, String>,
    pub article_templates: BTreeMap<ArticleKey, String>,
    pub probe_statements: BTreeMap<ProbeKind, String>,
    pub deprivation_statements: Vec<String>,
    pub photo_alt_text: String,
}

/// On-disk shape; every field optional so validation can report all gaps
/// at once.
#[derive(Deserialize)]
struct RawCatalog {
    language_code: Option<String>,
    #[serde(default)]
    strings: BTreeMap<String, String>,
    #[serde(default)]
    article_templates: BTreeMap<String, String>,
    #[serde(default)]
    probe_statements: BTreeMap<String, String>,
    #[serde(default)]
    deprivation_statements: Vec<String>,
    photo_alt_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Segment<'a> {
    Text(&'a str),
    Optional(&'a str),
}

fn segments(template: &str) -> std::result::Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        match rest.find([SPAN_OPEN, SPAN_CLOSE]) {
            None => {
                out.push(Segment::Text(rest));
                break;
            }
            Some(pos) if rest[pos..].starts_with(SPAN_CLOSE) => {
                return Err("unmatched optional-span close".into());
            }
            Some(pos) => {
                if pos > 0 {
                    out.push(Segment::Text(&rest[..pos]));
                }
                let body_start = pos + SPAN_OPEN.len_utf8();
                let body_len = rest[body_start..]
                    .find([SPAN_OPEN, SPAN_CLOSE])
                    .filter(|&end| rest[body_start + end..].starts_with(SPAN_CLOSE))
                    .ok_or_else(|| "unterminated or nested optional span".to_string())?;
                out.push(Segment::Optional(&rest[body_start..body_start + body_len]));
                rest = &rest[body_start + body_len + SPAN_CLOSE.len_utf8()..];
            }
        }
    }
    Ok(out)
}

fn has_placeholder(s: &str) -> bool {
    s.contains(PLACEHOLDER_NATIONALS) || s.contains(PLACEHOLDER_COUNTRY)
}

fn country_key(country: Country) -> String {
    format!("country.{}", country.code())
}

fn nationals_key(country: Country) -> String {
    format!("nationals.{}", country.code())
}

impl LanguageCatalog {
    pub fn from_json(json: &str) -> Result<Self> {
        let raw: RawCatalog = serde_json::from_str(json)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawCatalog) -> Result<Self> {
        let mut problems = Vec::new();

        let language_code = match raw.language_code.as_deref().map(str::parse::<Language>) {
            Some(Ok(l)) => Some(l),
            Some(Err(_)) => {
                problems.push(format!("language_code {:?} is not a supported language", raw.language_code.unwrap_or_default()));
                None
            }
            None => {
                problems.push("missing key language_code".into());
                None
            }
        };

        for key in REQUIRED_STRINGS {
            if raw.strings.get(key).is_none_or(|s| s.trim().is_empty()) {
                problems.push(format!("missing key strings.{key}"));
            }
        }
        for country in Country::ALL {
            let has_name = raw.strings.contains_key(&country_key(country));
            let has_nationals = raw.strings.contains_key(&nationals_key(country));
            if has_name != has_nationals {
                let missing = if has_name { nationals_key(country) } else { country_key(country) };
                problems.push(format!("missing key strings.{missing}"));
            }
        }

        let mut article_templates = BTreeMap::new();
        for key in ArticleKey::ALL {
            let Some(text) = raw.article_templates.get(key.key()) else {
                problems.push(format!("missing key article_templates.{}", key.key()));
                continue;
            };
            match segments(text) {
                Err(e) => problems.push(format!("article_templates.{}: {e}", key.key())),
                Ok(segs) => {
                    let outside = segs.iter().any(|s| matches!(s, Segment::Text(t) if has_placeholder(t)));
                    if key == ArticleKey::Factual {
                        if has_placeholder(text) {
                            problems.push("article_templates.factual must not contain placeholders".into());
                        }
                    } else {
                        for ph in [PLACEHOLDER_NATIONALS, PLACEHOLDER_COUNTRY] {
                            if !text.contains(ph) {
                                problems.push(format!("article_templates.{} lacks placeholder {ph}", key.key()));
                            }
                        }
                        if outside {
                            problems.push(format!(
                                "article_templates.{} has a placeholder outside an optional span",
                                key.key()
                            ));
                        }
                    }
                }
            }
            article_templates.insert(key, text.clone());
        }
        for extra in raw.article_templates.keys() {
            if !ArticleKey::ALL.iter().any(|k| k.key() == extra) {
                problems.push(format!("unknown key article_templates.{extra}"));
            }
        }

        let mut probe_statements = BTreeMap::new();
        for probe in ProbeKind::ALL {
            match raw.probe_statements.get(probe.key()) {
                Some(text) if !text.trim().is_empty() => {
                    probe_statements.insert(probe, text.clone());
                }
                _ => problems.push(format!("missing key probe_statements.{}", probe.key())),
            }
        }
        for extra in raw.probe_statements.keys() {
            if !ProbeKind::ALL.iter().any(|p| p.key() == extra) {
                problems.push(format!("unknown key probe_statements.{extra}"));
            }
        }

        if raw.deprivation_statements.is_empty() {
            problems.push("missing key deprivation_statements".into());
        }
        if raw.photo_alt_text.as_deref().is_none_or(|s| s.trim().is_empty()) {
            problems.push("missing key photo_alt_text".into());
        }

        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            language_code: language_code.expect("checked above"),
            strings: raw.strings,
            article_templates,
            probe_statements,
            deprivation_statements: raw.deprivation_statements,
            photo_alt_text: raw.photo_alt_text.expect("checked above"),
        })
    }

    fn s(&self, key: &str) -> &str {
        self.strings.get(key).map(String::as_str).unwrap_or_default()
    }

    pub fn country_name(&self, country: Country) -> Option<&str> {
        self.strings.get(&country_key(country)).map(String::as_str)
    }

    pub fn nationals(&self, country: Country) -> Option<&str> {
        self.strings.get(&nationals_key(country)).map(String::as_str)
    }

    /// Every country name and demonym the catalog knows.
    pub fn lexicon(&self) -> Vec<&str> {
        Country::ALL
            .into_iter()
            .flat_map(|c| [self.country_name(c), self.nationals(c)])
            .flatten()
            .collect()
    }

    pub fn status(&self) -> &str {
        self.strings.get("catalog_status").map(String::as_str).unwrap_or("unspecified")
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<LanguageCatalog> {
    let text = std::fs::read_to_string(path.as_ref())?;
    LanguageCatalog::from_json(&text)
}

pub fn bundled_catalog_json(language: Language) -> &'static str {
    match language {
        Language::Dutch => include_str!("../data/catalogs/nl.json"),
        Language::English => include_str!("../data/catalogs/en.json"),
        Language::French => include_str!("../data/catalogs/fr.json"),
        Language::German => include_str!("../data/catalogs/de.json"),
        Language::Greek => include_str!("../data/catalogs/el.json"),
        Language::Hebrew => include_str!("../data/catalogs/iw.json"),
        Language::Italian => include_str!("../data/catalogs/it.json"),
        Language::Norwegian => include_str!("../data/catalogs/no.json"),
        Language::Polish => include_str!("../data/catalogs/pl.json"),
        Language::Romanian => include_str!("../data/catalogs/ro.json"),
        Language::Spanish => include_str!("../data/catalogs/es.json"),
        Language::Swedish => include_str!("../data/catalogs/sv.json"),
    }
}

pub fn bundled_catalog(language: Language) -> Result<LanguageCatalog> {
    LanguageCatalog::from_json(bundled_catalog_json(language))
}

pub type CatalogSet = BTreeMap<Language, LanguageCatalog>;

pub fn bundled_catalogs() -> Result<CatalogSet> {
    Language::ALL
        .into_iter()
        .map(|l| bundled_catalog(l).map(|c| (l, c)))
        .collect()
}

/// Load `<dir>/<code>.json` for each requested language.
pub fn load_catalog_dir(dir: impl AsRef<Path>, languages: &[Language]) -> Result<CatalogSet> {
    let dir = dir.as_ref();
    let mut set = CatalogSet::new();
    for &lang in languages {
        let path = dir.join(format!("{}.json", lang.code().to_ascii_lowercase()));
        let catalog = load_catalog(&path)?;
        if catalog.language_code != lang {
            return Err(Error::Config(format!(
                "{} declares language {} instead of {lang}",
                path.display(),
                catalog.language_code
            )));
        }
        set.insert(lang, catalog);
    }
    Ok(set)
}

/// What a rendered prompt reveals about its persona. A respondent that only
/// reads the prompt can react to nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosedFeatures {
    /// `None` when nationality is masked.
    pub country: Option<Country>,
    pub deprivation: f64,
    pub framing: FramingCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub persona_id: String,
    pub probe: ProbeKind,
    pub language_code: Language,
    pub masked: bool,
    pub framing: FramingCondition,
    pub disclosed: DisclosedFeatures,
}

fn tidy(text: &str) -> String {
    let mut lines = Vec::new();
    for line in text.lines() {
        let mut out = String::with_capacity(line.len());
        for ch in line.chars() {
            if ch == ' ' && out.ends_with(' ') {
                continue;
            }
            if matches!(ch, '.' | ',' | ';' | ':' | '!' | '?') && out.ends_with(' ') {
                out.pop();
            }
            out.push(ch);
        }
        lines.push(out.trim().to_string());
    }
    lines.join("\n")
}

/// Expand an article template for `country`, or strip its nationality
/// spans when `country` is `None`.
pub fn expand_article(template: &str, nationality: Option<(&str, &str)>) -> Result<String> {
    let segs = segments(template).map_err(Error::Render)?;
    let mut out = String::with_capacity(template.len());
    for seg in segs {
        match (seg, nationality) {
            (Segment::Text(t), _) => out.push_str(t),
            (Segment::Optional(t), None) if has_placeholder(t) => {}
            (Segment::Optional(t), None) => out.push_str(t),
            (Segment::Optional(t), Some((name, nationals))) => out.push_str(
                &t.replace(PLACEHOLDER_COUNTRY, name)
                    .replace(PLACEHOLDER_NATIONALS, nationals),
            ),
        }
    }
    if has_placeholder(&out) {
        return Err(Error::Render("placeholder outside optional span".into()));
    }
    Ok(tidy(&out))
}

/// The questionnaire text shared by all five probes.
pub fn render_preamble(persona: &Persona, catalog: &LanguageCatalog, mask_nationality: bool) -> Result<String> {
    if persona.deprivation_ratings.len() != catalog.deprivation_statements.len() {
        return Err(Error::Render(format!(
            "persona {} has {} deprivation ratings but catalog {} has {} statements",
            persona.id,
            persona.deprivation_ratings.len(),
            catalog.language_code,
            catalog.deprivation_statements.len()
        )));
    }
    let nationality = if mask_nationality {
        None
    } else {
        let name = catalog.country_name(persona.country);
        let nationals = catalog.nationals(persona.country);
        match name.zip(nationals) {
            Some(pair) => Some(pair),
            None => {
                return Err(Error::Render(format!(
                    "catalog {} has no lexicon entry for country {}",
                    catalog.language_code, persona.country
                )))
            }
        }
    };

    let gender = match persona.gender {
        Gender::Female => catalog.s("gender.female"),
        Gender::Male => catalog.s("gender.male"),
        Gender::Other => catalog.s("gender.other"),
    };
    let mut text = String::new();
    text.push_str(catalog.s("intro"));
    text.push_str("\n\n");
    text.push_str(catalog.s("demographics_header"));
    text.push('\n');
    text.push_str(&format!("{}: {}\n", catalog.s("age_label"), persona.age));
    text.push_str(&format!("{}: {}\n", catalog.s("gender_label"), gender));
    text.push_str(&format!("{}: {}\n", catalog.s("education_label"), persona.education));
    if let Some((name, _)) = nationality {
        text.push_str(&format!("{}: {}\n", catalog.s("country_label"), name));
    }
    text.push('\n');
    text.push_str(catalog.s("deprivation_header"));
    text.push('\n');
    text.push_str(catalog.s("deprivation_instruction"));
    text.push('\n');
    for (statement, rating) in catalog.deprivation_statements.iter().zip(&persona.deprivation_ratings) {
        text.push_str(&format!("{statement}: {rating}\n"));
    }
    text.push('\n');
    text.push_str(catalog.s("article_header"));
    text.push('\n');
    text.push_str(&format!("[{}: {}]\n", catalog.s("photo_label"), catalog.photo_alt_text));
    let template = &catalog.article_templates[&select_article(persona.framing)];
    text.push_str(&expand_article(template, nationality)?);
    text.push_str("\n\n");
    text.push_str(catalog.s("final_instruction"));
    text.push('\n');
    Ok(text)
}

fn finish(preamble: &str, catalog: &LanguageCatalog, probe: ProbeKind) -> String {
    format!(
        "{preamble}{} {}\n{}:",
        catalog.probe_statements[&probe],
        catalog.s("scale_hint"),
        catalog.s("answer_label")
    )
}

pub fn render_prompt(
    persona: &Persona,
    catalog: &LanguageCatalog,
    probe: ProbeKind,
    mask_nationality: bool,
) -> Result<RenderedPrompt> {
    let preamble = render_preamble(persona, catalog, mask_nationality)?;
    Ok(assemble(persona, catalog, &preamble, probe, mask_nationality))
}

/// Render all five probes, sharing the preamble.
pub fn render_all_probes(
    persona: &Persona,
    catalog: &LanguageCatalog,
    mask_nationality: bool,
) -> Result<Vec<RenderedPrompt>> {
    let preamble = render_preamble(persona, catalog, mask_nationality)?;
    Ok(ProbeKind::ALL
        .into_iter()
        .map(|probe| assemble(persona, catalog, &preamble, probe, mask_nationality))
        .collect())
}

fn assemble(
    persona: &Persona,
    catalog: &LanguageCatalog,
    preamble: &str,
    probe: ProbeKind,
    masked: bool,
) -> RenderedPrompt {
    RenderedPrompt {
        text: finish(preamble, catalog, probe),
        persona_id: persona.id.clone(),
        probe,
        language_code: catalog.language_code,
        masked,
        framing: persona.framing,
        disclosed: DisclosedFeatures {
            country: (!masked).then_some(persona.country),
            deprivation: persona.deprivation(),
            framing: persona.framing,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn persona(country: Country, framing: FramingCondition) -> Persona {
        Persona {
            id: "t-1".into(),
            country,
            age: 41,
            gender: Gender::Female,
            education: 5,
            deprivation_ratings: vec![4, 6, 3],
            framing,
        }
    }

    fn en() -> LanguageCatalog {
        bundled_catalog(Language::English).unwrap()
    }

    #[test]
    fn select_article_is_a_bijection() {
        assert_eq!(select_article(FramingCondition::FACTUAL), ArticleKey::Factual);
        assert_eq!(select_article(FramingCondition::ANTI_ELITE), ArticleKey::AntiElite);
        assert_eq!(select_article(FramingCondition::ANTI_IMMIGRANT), ArticleKey::AntiImmigrant);
        assert_eq!(select_article(FramingCondition::COMBINED), ArticleKey::Combined);
    }

    #[test]
    fn english_catalog_has_five_probes() {
        assert_eq!(en().probe_statements.len(), 5);
    }

    #[test]
    fn unmasked_german_anti_elite_names_the_country() {
        let p = render_prompt(&persona(Country::Germany, FramingCondition::ANTI_ELITE), &en(), ProbeKind::Persuasion1, false).unwrap();
        assert!(p.text.contains("Germany"));
        assert!(p.text.contains("Germans"));
        assert!(p.text.contains("Country of Residence: Germany"));
        assert!(!p.text.contains(PLACEHOLDER_COUNTRY));
        assert!(!p.text.contains(PLACEHOLDER_NATIONALS));
        assert_eq!(p.disclosed.country, Some(Country::Germany));
    }

    #[test]
    fn masked_rendering_hides_nationality() {
        let p = render_prompt(&persona(Country::Germany, FramingCondition::ANTI_ELITE), &en(), ProbeKind::Persuasion1, true).unwrap();
        assert!(!p.text.contains("Germany"));
        assert!(!p.text.contains("Germans"));
        assert!(!p.text.contains("Country of Residence"));
        assert!(!p.text.contains(SPAN_OPEN) && !p.text.contains(SPAN_CLOSE));
        assert_eq!(p.disclosed.country, None);
    }

    #[test]
    fn rendering_is_deterministic() {
        let pr = persona(Country::Greece, FramingCondition::COMBINED);
        let a = render_prompt(&pr, &en(), ProbeKind::Mobilization2, false).unwrap();
        let b = render_prompt(&pr, &en(), ProbeKind::Mobilization2, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rating_lines_follow_statements() {
        let p = render_prompt(&persona(Country::Spain, FramingCondition::FACTUAL), &en(), ProbeKind::Persuasion2, false).unwrap();
        let cat = en();
        for (s, r) in cat.deprivation_statements.iter().zip([4, 6, 3]) {
            assert!(p.text.contains(&format!("{s}: {r}\n")));
        }
    }

    #[test]
    fn section_order() {
        let cat = en();
        let p = render_prompt(&persona(Country::Spain, FramingCondition::COMBINED), &cat, ProbeKind::Mobilization3, false).unwrap();
        let pos = |k: &str| p.text.find(cat.s(k)).unwrap_or_else(|| panic!("{k}"));
        assert!(pos("demographics_header") < pos("country_label"));
        assert!(pos("country_label") < pos("deprivation_header"));
        assert!(pos("deprivation_header") < pos("article_header"));
        assert!(pos("article_header") < pos("final_instruction"));
        assert!(p.text.ends_with(&format!("{}:", cat.s("answer_label"))));
    }

    #[test]
    fn rating_count_mismatch_is_a_render_error() {
        let mut pr = persona(Country::Spain, FramingCondition::FACTUAL);
        pr.deprivation_ratings.push(2);
        assert!(matches!(render_prompt(&pr, &en(), ProbeKind::Persuasion1, false), Err(Error::Render(_))));
    }

    #[test]
    fn missing_lexicon_entry_is_a_render_error() {
        let mut cat = en();
        cat.strings.remove("country.it");
        cat.strings.remove("nationals.it");
        let pr = persona(Country::Italy, FramingCondition::FACTUAL);
        assert!(matches!(render_prompt(&pr, &cat, ProbeKind::Persuasion1, false), Err(Error::Render(_))));
        // masked rendering never needs the lexicon
        assert!(render_prompt(&pr, &cat, ProbeKind::Persuasion1, true).is_ok());
    }

    fn raw_en() -> serde_json::Value {
        serde_json::from_str(bundled_catalog_json(Language::English)).unwrap()
    }

    #[test]
    fn missing_probe_is_named() {
        let mut v = raw_en();
        v["probe_statements"].as_object_mut().unwrap().remove("mobilization_3");
        v["strings"].as_object_mut().unwrap().remove("intro");
        let err = LanguageCatalog::from_json(&v.to_string()).unwrap_err();
        let Error::Validation(problems) = err else { panic!("{err}") };
        assert!(problems.iter().any(|p| p.contains("probe_statements.mobilization_3")));
        assert!(problems.iter().any(|p| p.contains("strings.intro")));
    }

    #[test]
    fn anti_elite_without_country_placeholder_is_rejected() {
        let mut v = raw_en();
        let t = v["article_templates"]["anti_elite"].as_str().unwrap().replace("[country]", "the country");
        v["article_templates"]["anti_elite"] = t.into();
        let err = LanguageCatalog::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("anti_elite lacks placeholder [country]"), "{err}");
    }

    #[test]
    fn placeholder_outside_span_is_rejected() {
        let mut v = raw_en();
        let t = format!("{} [country]", v["article_templates"]["combined"].as_str().unwrap());
        v["article_templates"]["combined"] = t.into();
        let err = LanguageCatalog::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("outside an optional span"), "{err}");
    }

    #[test]
    fn factual_with_placeholder_is_rejected() {
        let mut v = raw_en();
        v["article_templates"]["factual"] = "News about ⟦[country]⟧.".into();
        assert!(LanguageCatalog::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn span_parser_edge_cases() {
        assert_eq!(segments("a⟦b⟧c").unwrap(), vec![Segment::Text("a"), Segment::Optional("b"), Segment::Text("c")]);
        assert!(segments("a⟦b").is_err());
        assert!(segments("a⟧b").is_err());
        assert!(segments("⟦a⟦b⟧⟧").is_err());
    }

    #[test]
    fn masked_expansion_removes_clause_and_tidies() {
        let t = "Prices rise⟦ in [country]⟧. ⟦Many [nationals] worry.⟧ Experts agree.";
        assert_eq!(expand_article(t, None).unwrap(), "Prices rise. Experts agree.");
        assert_eq!(
            expand_article(t, Some(("Spain", "Spaniards"))).unwrap(),
            "Prices rise in Spain. Many Spaniards worry. Experts agree."
        );
    }
}
