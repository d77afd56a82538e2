//! Balanced round-robin schedule and prompt rendering.
//!
//! Every unordered firm pair is visited once per (category, variant, order,
//! replication) cell. The emitted order is a seeded shuffle so that a live
//! endpoint sees a mix of firms rather than long runs of the same pair; the
//! membership of the schedule never depends on the seed.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::universe::FirmRecord;

pub const BASELINE: &str = "baseline";

/// The nine context categories, in the order they are shipped.
pub const PROMPT_CATEGORIES: [&str; 9] = [
    "Fundamental",
    "Technical",
    "Sentiment",
    "ESG",
    "Risk",
    "Growth",
    "Dividend",
    "Valuation",
    "Quality",
];

const FIRST: &str = "{company1}";
const SECOND: &str = "{company2}";
const INSTRUCTION: &str = "Answer with only the ticker symbol.";
const SHIPPED_TEMPLATES: &str = include_str!("../data/templates.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct PromptTemplate {
    category: String,
    variant: u8,
    text: String,
}

#[derive(Deserialize)]
struct RawTemplate {
    category: String,
    variant: u8,
    text: String,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = Error;

    fn try_from(raw: RawTemplate) -> Result<Self> {
        PromptTemplate::new(raw.category, raw.variant, raw.text)
    }
}

impl PromptTemplate {
    pub fn new(category: impl Into<String>, variant: u8, text: impl Into<String>) -> Result<Self> {
        let category = category.into();
        let text = text.into();
        if category.is_empty() {
            return Err(Error::Template("empty category".into()));
        }
        if !(1..=2).contains(&variant) {
            return Err(Error::Template(format!(
                "{category}: variant must be 1 or 2, got {variant}"
            )));
        }
        for placeholder in [FIRST, SECOND] {
            let count = text.matches(placeholder).count();
            if count != 1 {
                return Err(Error::Template(format!(
                    "{category} v{variant}: {placeholder} must appear exactly once (found {count})"
                )));
            }
        }
        if !text.ends_with(INSTRUCTION) {
            return Err(Error::Template(format!(
                "{category} v{variant}: text must end with {INSTRUCTION:?}"
            )));
        }
        Ok(PromptTemplate {
            category,
            variant,
            text,
        })
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn variant(&self) -> u8 {
        self.variant
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Substitutes the firms' display names into a template.
pub fn render_prompt(template: &PromptTemplate, first: &FirmRecord, second: &FirmRecord) -> Result<String> {
    if first.ticker == second.ticker {
        return Err(Error::Validation(format!(
            "cannot compare {} with itself",
            first.ticker
        )));
    }
    let text = template.text();
    let i = text
        .find(FIRST)
        .ok_or_else(|| Error::Template(format!("missing {FIRST}")))?;
    let j = text
        .find(SECOND)
        .ok_or_else(|| Error::Template(format!("missing {SECOND}")))?;
    // Substitute by position so a name containing a placeholder is left alone.
    let mut slots = [(i, FIRST.len(), first.name.as_str()), (j, SECOND.len(), second.name.as_str())];
    slots.sort_by_key(|s| s.0);
    let mut out = String::with_capacity(text.len() + first.name.len() + second.name.len());
    let mut cursor = 0;
    for (start, len, name) in slots {
        out.push_str(&text[cursor..start]);
        out.push_str(name);
        cursor = start + len;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
    hash: String,
}

impl TemplateSet {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let templates: Vec<PromptTemplate> = serde_json::from_str(text)
            .map_err(|e| Error::Template(format!("templates file: {e}")))?;
        for (i, t) in templates.iter().enumerate() {
            if templates[..i]
                .iter()
                .any(|o| o.category == t.category && o.variant == t.variant)
            {
                return Err(Error::Template(format!(
                    "duplicate template {} v{}",
                    t.category, t.variant
                )));
            }
        }
        Ok(TemplateSet {
            templates,
            hash: content_hash(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read templates {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn get(&self, category: &str, variant: u8) -> Result<&PromptTemplate> {
        self.templates
            .iter()
            .find(|t| t.category == category && t.variant == variant)
            .ok_or_else(|| Error::Template(format!("no template for {category} v{variant}")))
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    /// Content hash of the source JSON.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTask {
    pub task_key: String,
    pub firm_a: String,
    pub firm_b: String,
    pub category: String,
    pub variant: u8,
    pub order: u8,
    pub rep: u32,
    pub rendered_prompt: String,
}

impl ComparisonTask {
    /// Ticker shown as `{company1}`.
    pub fn first(&self) -> &str {
        if self.order == 1 {
            &self.firm_a
        } else {
            &self.firm_b
        }
    }

    pub fn second(&self) -> &str {
        if self.order == 1 {
            &self.firm_b
        } else {
            &self.firm_a
        }
    }
}

/// Stable identifier of a schedule cell.
pub fn task_key(firm_a: &str, firm_b: &str, category: &str, variant: u8, order: u8, rep: u32) -> String {
    let mut hasher = Sha256::new();
    for part in [firm_a, firm_b, category] {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    hasher.update(format!("{variant}\x1f{order}\x1f{rep}").as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleParams {
    pub categories: Vec<String>,
    pub variants: u8,
    pub orders: u8,
    pub reps: u32,
    pub seed: u64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            categories: PROMPT_CATEGORIES.iter().map(|c| c.to_string()).collect(),
            variants: 2,
            orders: 2,
            reps: 3,
            seed: 0,
        }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("at least one category is required".into()));
        }
        if !(1..=2).contains(&self.variants) {
            return Err(Error::Config(format!("variants must be 1 or 2, got {}", self.variants)));
        }
        if !(1..=2).contains(&self.orders) {
            return Err(Error::Config(format!("orders must be 1 or 2, got {}", self.orders)));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        Ok(())
    }

    /// C(n,2)·k·v·o·r
    pub fn total_tasks(&self, firms: usize) -> usize {
        firms * firms.saturating_sub(1) / 2 * self.cell_count()
    }

    /// (n−1)·k·v·o·r
    pub fn per_firm_tasks(&self, firms: usize) -> usize {
        firms.saturating_sub(1) * self.cell_count()
    }

    fn cell_count(&self) -> usize {
        self.categories.len() * self.variants as usize * self.orders as usize * self.reps as usize
    }
}

pub fn build_schedule(
    firms: &[FirmRecord],
    templates: &TemplateSet,
    params: &ScheduleParams,
) -> Result<Vec<ComparisonTask>> {
    params.validate()?;
    if firms.len() < 2 {
        return Err(Error::Config(format!(
            "a schedule needs at least 2 firms, got {}",
            firms.len()
        )));
    }
    let mut sorted: Vec<&FirmRecord> = firms.iter().collect();
    sorted.sort_by(|a, b| a.ticker.cmp(&b.ticker));
    if let Some(w) = sorted.windows(2).find(|w| w[0].ticker == w[1].ticker) {
        return Err(Error::Validation(format!("duplicate ticker {:?}", w[0].ticker)));
    }

    let mut tasks = Vec::with_capacity(params.total_tasks(firms.len()));
    for category in &params.categories {
        for variant in 1..=params.variants {
            let template = templates.get(category, variant)?;
            for order in 1..=params.orders {
                for rep in 1..=params.reps {
                    for (i, a) in sorted.iter().enumerate() {
                        for b in &sorted[i + 1..] {
                            let (first, second) = if order == 1 { (*a, *b) } else { (*b, *a) };
                            tasks.push(ComparisonTask {
                                task_key: task_key(&a.ticker, &b.ticker, category, variant, order, rep),
                                firm_a: a.ticker.clone(),
                                firm_b: b.ticker.clone(),
                                category: category.clone(),
                                variant,
                                order,
                                rep,
                                rendered_prompt: render_prompt(template, first, second)?,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    tasks.shuffle(&mut rng);
    Ok(tasks)
}

/// Writes one task per line for audit.
pub fn dump_schedule(tasks: &[ComparisonTask], out: &mut impl Write) -> Result<()> {
    for task in tasks {
        serde_json::to_writer(&mut *out, task)?;
        out.write_all(b"\n").map_err(|e| Error::io("writing schedule", e))?;
    }
    Ok(())
}
