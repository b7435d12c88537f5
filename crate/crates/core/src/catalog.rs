//! Categorized tool catalog backing `api-select` and `api-details`.
//!
//! # File format
//!
//! ```text
//! # tool-catalog v1
//! # name | category | description | inputs | outputs | example
//! stock_us_hist | Stock | Daily OHLCV history for a US ticker. | symbol:str:req:Ticker; start:str:opt:First day | date:str:Trading day; close:float:Close | df = sdk.stock_us_hist(symbol="NVDA")
//! ```
//!
//! The first non-blank line must be the `# tool-catalog v1` header; other
//! lines starting with `#` are comments. A record has six `|`-separated
//! fields. Inputs are `;`-separated `name:type:req|opt:description` entries,
//! outputs are `name:type:description`. Inside a field, `\|`, `\;`, `\\`,
//! `\n` and `\t` are escapes. A completely empty file is an empty catalog.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CATALOG_HEADER: &str = "# tool-catalog v1";
const COLUMNS_COMMENT: &str = "# name | category | description | inputs | outputs | example";

/// Categories holding the general tool families; everything else is specific.
pub const GENERAL_CATEGORIES: [&str; 3] = ["Web Search", "Code Interpreter", "Finish"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryKind {
    General,
    Specific,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub kind: CategoryKind,
}

impl Category {
    pub fn named(name: &str) -> Self {
        let kind = if GENERAL_CATEGORIES.contains(&name) {
            CategoryKind::General
        } else {
            CategoryKind::Specific
        };
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputParam {
    pub name: String,
    pub type_label: String,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputParam {
    pub name: String,
    pub type_label: String,
    pub description: String,
}

/// One catalog entry: the documentation handed to the model by `api-details`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub category: String,
    pub description: String,
    pub input_params: Vec<InputParam>,
    pub output_params: Vec<OutputParam>,
    pub usage_example: String,
}

impl ToolSpec {
    /// Plain-text API document used as prompt material for code writing.
    pub fn render_document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "API: {}", self.name);
        let _ = writeln!(out, "Category: {}", self.category);
        let _ = writeln!(out, "Description: {}", self.description);
        out.push_str("Input parameters:\n");
        if self.input_params.is_empty() {
            out.push_str("  (none)\n");
        }
        for p in &self.input_params {
            let req = if p.required { "required" } else { "optional" };
            let _ = writeln!(out, "  - {} ({}, {}): {}", p.name, p.type_label, req, p.description);
        }
        out.push_str("Output parameters:\n");
        if self.output_params.is_empty() {
            out.push_str("  (none)\n");
        }
        for p in &self.output_params {
            let _ = writeln!(out, "  - {} ({}): {}", p.name, p.type_label, p.description);
        }
        out.push_str("Usage example:\n");
        for line in self.usage_example.lines() {
            let _ = writeln!(out, "  {line}");
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate tool name `{name}` (first defined on line {first_line})")]
    DuplicateName {
        name: String,
        line: usize,
        first_line: usize,
    },
    #[error("line {line}: expected header `{CATALOG_HEADER}`")]
    MissingHeader { line: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LookupError {
    #[error("tool `{0}` not found")]
    ToolNotFound(String),
    #[error("category `{0}` not found")]
    CategoryNotFound(String),
}

/// Read-only after construction.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    specs: HashMap<String, ToolSpec>,
    categories: BTreeMap<String, Category>,
    /// Category names in order of first appearance.
    category_order: Vec<String>,
    /// Tool names per category, lexicographic.
    members: BTreeMap<String, Vec<String>>,
}

impl Catalog {
    /// Builds a catalog from specs, rejecting duplicate or invalid entries.
    pub fn from_specs(specs: impl IntoIterator<Item = ToolSpec>) -> Result<Self, CatalogError> {
        let mut builder = Builder::default();
        for (i, spec) in specs.into_iter().enumerate() {
            builder.add(i + 1, spec)?;
        }
        Ok(builder.finish())
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get_details(&self, name: &str) -> Result<&ToolSpec, LookupError> {
        self.specs
            .get(name)
            .ok_or_else(|| LookupError::ToolNotFound(name.to_string()))
    }

    /// Tool names in `category`, lexicographic.
    pub fn list_category(&self, category: &str) -> Result<&[String], LookupError> {
        self.members
            .get(category)
            .map(Vec::as_slice)
            .ok_or_else(|| LookupError::CategoryNotFound(category.to_string()))
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.get(name)
    }

    /// Categories in order of first appearance in the source.
    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.category_order.iter().map(|n| &self.categories[n])
    }

    pub fn specific_categories(&self) -> impl Iterator<Item = &Category> {
        self.categories().filter(|c| c.kind == CategoryKind::Specific)
    }

    pub fn count(&self, category: &str) -> usize {
        self.members.get(category).map_or(0, Vec::len)
    }

    /// Category name → tool count.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.members
            .iter()
            .map(|(k, v)| (k.clone(), v.len()))
            .collect()
    }

    pub fn specific_total(&self) -> usize {
        self.specific_categories().map(|c| self.count(&c.name)).sum()
    }

    /// Specs ordered by category (first appearance) then name.
    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.category_order
            .iter()
            .flat_map(|c| self.members[c].iter().map(|n| &self.specs[n]))
    }

    /// Specific-category specs in [`Catalog::specs`] order.
    pub fn specific_specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.specs().filter(|s| {
            self.categories
                .get(&s.category)
                .is_some_and(|c| c.kind == CategoryKind::Specific)
        })
    }

    /// Table-shaped count report: general then specific, with totals.
    pub fn count_report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:<20} {:>9}", "Categories", "Name", "Diversity");
        for kind in [CategoryKind::General, CategoryKind::Specific] {
            let label = match kind {
                CategoryKind::General => "General",
                CategoryKind::Specific => "Specific",
            };
            let mut first = true;
            for c in self.categories().filter(|c| c.kind == kind) {
                let shown = if first { label } else { "" };
                first = false;
                let _ = writeln!(out, "{:<10} {:<20} {:>9}", shown, c.name, self.count(&c.name));
            }
        }
        let _ = writeln!(out, "{:<10} {:<20} {:>9}", "Total", "specific", self.specific_total());
        let _ = writeln!(out, "{:<10} {:<20} {:>9}", "Total", "all", self.len());
        out
    }
}

#[derive(Default)]
struct Builder {
    specs: HashMap<String, (usize, ToolSpec)>,
    category_order: Vec<String>,
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Builder {
    fn add(&mut self, line: usize, spec: ToolSpec) -> Result<(), CatalogError> {
        let malformed = |reason: String| CatalogError::Malformed { line, reason };
        if !is_identifier(&spec.name) {
            return Err(malformed(format!("tool name `{}` is not an ASCII identifier", spec.name)));
        }
        if spec.category.trim().is_empty() {
            return Err(malformed(format!("tool `{}` has an empty category", spec.name)));
        }
        if spec.description.trim().is_empty() {
            return Err(malformed(format!("tool `{}` has an empty description", spec.name)));
        }
        let category = Category::named(&spec.category);
        if category.kind == CategoryKind::Specific && spec.usage_example.trim().is_empty() {
            return Err(malformed(format!("specific tool `{}` has no usage example", spec.name)));
        }
        if let Some((first_line, _)) = self.specs.get(&spec.name) {
            return Err(CatalogError::DuplicateName {
                name: spec.name,
                line,
                first_line: *first_line,
            });
        }
        if !self.category_order.contains(&spec.category) {
            self.category_order.push(spec.category.clone());
        }
        self.specs.insert(spec.name.clone(), (line, spec));
        Ok(())
    }

    fn finish(self) -> Catalog {
        let mut members: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut specs = HashMap::with_capacity(self.specs.len());
        for (name, (_, spec)) in self.specs {
            members.entry(spec.category.clone()).or_default().push(name.clone());
            specs.insert(name, spec);
        }
        for names in members.values_mut() {
            names.sort();
        }
        let categories = self
            .category_order
            .iter()
            .map(|n| (n.clone(), Category::named(n)))
            .collect();
        Catalog {
            specs,
            categories,
            category_order: self.category_order,
            members,
        }
    }
}

/// Splits on unescaped `sep`, resolving escapes in each piece.
fn split_escaped(field: &str, sep: char) -> Result<Vec<String>, String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => current.push('\n'),
                Some('t') => current.push('\t'),
                Some(e @ ('|' | ';' | '\\')) => current.push(e),
                Some(other) => return Err(format!("unknown escape `\\{other}`")),
                None => return Err("dangling escape at end of line".to_string()),
            }
        } else if c == sep {
            parts.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
    }
    parts.push(current);
    Ok(parts)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            ';' => out.push_str("\\;"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn parse_inputs(field: &str) -> Result<Vec<InputParam>, String> {
    if field.trim().is_empty() {
        return Ok(Vec::new());
    }
    split_escaped(field, ';')?
        .into_iter()
        .map(|entry| {
            let mut parts = entry.splitn(4, ':').map(str::trim);
            let (Some(name), Some(ty), Some(req), Some(desc)) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(format!("input parameter `{entry}` needs name:type:req|opt:description"));
            };
            let required = match req {
                "req" => true,
                "opt" => false,
                other => return Err(format!("input parameter `{name}`: expected req or opt, got `{other}`")),
            };
            if name.is_empty() {
                return Err("input parameter with empty name".to_string());
            }
            Ok(InputParam {
                name: name.to_string(),
                type_label: ty.to_string(),
                required,
                description: desc.to_string(),
            })
        })
        .collect()
}

fn parse_outputs(field: &str) -> Result<Vec<OutputParam>, String> {
    if field.trim().is_empty() {
        return Ok(Vec::new());
    }
    split_escaped(field, ';')?
        .into_iter()
        .map(|entry| {
            let mut parts = entry.splitn(3, ':').map(str::trim);
            let (Some(name), Some(ty), Some(desc)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("output parameter `{entry}` needs name:type:description"));
            };
            if name.is_empty() {
                return Err("output parameter with empty name".to_string());
            }
            Ok(OutputParam {
                name: name.to_string(),
                type_label: ty.to_string(),
                description: desc.to_string(),
            })
        })
        .collect()
}

/// Splits a record line on unescaped `|`, keeping escapes intact.
fn split_record(line: &str) -> Vec<&str> {
    let mut fields = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '|' {
            fields.push(&line[start..i]);
            start = i + 1;
        }
    }
    fields.push(&line[start..]);
    fields
}

fn unescape_field(raw: &str) -> Result<String, String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.trim().chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(e @ ('|' | ';' | '\\')) => out.push(e),
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling escape at end of line".to_string()),
        }
    }
    Ok(out)
}

fn parse_record(line_no: usize, line: &str) -> Result<ToolSpec, CatalogError> {
    let malformed = |reason: String| CatalogError::Malformed {
        line: line_no,
        reason,
    };
    let fields = split_record(line);
    if fields.len() != 6 {
        return Err(malformed(format!("expected 6 `|`-separated fields, found {}", fields.len())));
    }
    let text = |i: usize| unescape_field(fields[i]).map_err(malformed);
    Ok(ToolSpec {
        name: text(0)?,
        category: text(1)?,
        description: text(2)?,
        input_params: parse_inputs(fields[3].trim()).map_err(malformed)?,
        output_params: parse_outputs(fields[4].trim()).map_err(malformed)?,
        usage_example: text(5)?,
    })
}

/// Parses catalog source text.
pub fn ingest_catalog(source: &str) -> Result<Catalog, CatalogError> {
    let mut builder = Builder::default();
    let mut saw_header = false;
    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line.trim() != CATALOG_HEADER {
                return Err(CatalogError::MissingHeader { line: line_no });
            }
            saw_header = true;
            continue;
        }
        if line.trim_start().starts_with('#') {
            continue;
        }
        builder.add(line_no, parse_record(line_no, line)?)?;
    }
    Ok(builder.finish())
}

fn format_inputs(params: &[InputParam]) -> String {
    params
        .iter()
        .map(|p| {
            format!(
                "{}:{}:{}:{}",
                escape(&p.name),
                escape(&p.type_label),
                if p.required { "req" } else { "opt" },
                escape(&p.description)
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_outputs(params: &[OutputParam]) -> String {
    params
        .iter()
        .map(|p| format!("{}:{}:{}", escape(&p.name), escape(&p.type_label), escape(&p.description)))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Serializes a catalog in the `v1` file format, in [`Catalog::specs`] order.
pub fn write_catalog(catalog: &Catalog) -> String {
    let mut out = format!("{CATALOG_HEADER}\n{COLUMNS_COMMENT}\n");
    for spec in catalog.specs() {
        let _ = writeln!(
            out,
            "{} | {} | {} | {} | {} | {}",
            spec.name,
            escape(&spec.category),
            escape(&spec.description),
            format_inputs(&spec.input_params),
            format_outputs(&spec.output_params),
            escape(&spec.usage_example)
        );
    }
    out
}
