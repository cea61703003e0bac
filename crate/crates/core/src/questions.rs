//! Question templates, surface rendering and instantiation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use causim_physics::{Color, ShapeKind, SizeKind};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::{classify_relation, Relation, Task};
use crate::dsl::{self, Answer, AnswerType, EvalError, Literal, Program, SimContext, Slot, Type};

pub const BUNDLED_TEMPLATES: &str = include_str!("../data/templates.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Causal,
    Counterfactual,
    Descriptive,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Causal, Category::Counterfactual, Category::Descriptive];

    pub fn name(self) -> &'static str {
        match self {
            Category::Causal => "causal",
            Category::Counterfactual => "counterfactual",
            Category::Descriptive => "descriptive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subcategory {
    #[serde(rename = "C/A")]
    CausalYesNo,
    #[serde(rename = "C/N")]
    CausalCount,
    #[serde(rename = "CF/N")]
    CounterfactualCount,
    #[serde(rename = "CF/O")]
    CounterfactualYesNo,
    #[serde(rename = "D/2Q")]
    FinalState,
    #[serde(rename = "D/C")]
    Color,
    #[serde(rename = "D/C-T")]
    TemporalYesNo,
    #[serde(rename = "D/N-T")]
    TemporalCount,
    #[serde(rename = "D/N-V")]
    EventCount,
    #[serde(rename = "D/S")]
    Shape,
    #[serde(rename = "D/TO")]
    TemporalOrder,
}

impl Subcategory {
    pub const ALL: [Subcategory; 11] = [
        Subcategory::CausalYesNo,
        Subcategory::CausalCount,
        Subcategory::CounterfactualCount,
        Subcategory::CounterfactualYesNo,
        Subcategory::FinalState,
        Subcategory::Color,
        Subcategory::TemporalYesNo,
        Subcategory::TemporalCount,
        Subcategory::EventCount,
        Subcategory::Shape,
        Subcategory::TemporalOrder,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Subcategory::CausalYesNo => "C/A",
            Subcategory::CausalCount => "C/N",
            Subcategory::CounterfactualCount => "CF/N",
            Subcategory::CounterfactualYesNo => "CF/O",
            Subcategory::FinalState => "D/2Q",
            Subcategory::Color => "D/C",
            Subcategory::TemporalYesNo => "D/C-T",
            Subcategory::TemporalCount => "D/N-T",
            Subcategory::EventCount => "D/N-V",
            Subcategory::Shape => "D/S",
            Subcategory::TemporalOrder => "D/TO",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Subcategory::CausalYesNo | Subcategory::CausalCount => Category::Causal,
            Subcategory::CounterfactualCount | Subcategory::CounterfactualYesNo => Category::Counterfactual,
            _ => Category::Descriptive,
        }
    }

    /// Answer type every template of the subcategory must produce.
    pub fn answer_type(self) -> AnswerType {
        match self {
            Subcategory::CausalYesNo
            | Subcategory::CounterfactualYesNo
            | Subcategory::TemporalYesNo
            | Subcategory::TemporalOrder => AnswerType::Boolean,
            Subcategory::Color => AnswerType::Color,
            Subcategory::Shape => AnswerType::Shape,
            _ => AnswerType::Count,
        }
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerbClass {
    Cause,
    Enable,
    Prevent,
}

impl VerbClass {
    pub fn base(self) -> &'static str {
        match self {
            VerbClass::Cause => "cause",
            VerbClass::Enable => "enable",
            VerbClass::Prevent => "prevent",
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            VerbClass::Cause => Relation::Cause,
            VerbClass::Enable => Relation::Enable,
            VerbClass::Prevent => Relation::Prevent,
        }
    }
}

/// Interchangeable surface words, keyed by base word. Each list includes the
/// base word itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable(pub BTreeMap<String, Vec<String>>);

impl Default for SynonymTable {
    fn default() -> Self {
        let entries: &[(&str, &[&str])] = &[
            ("small", &["small", "tiny"]),
            ("large", &["large", "big"]),
            ("cube", &["cube", "square", "block"]),
            ("circle", &["circle", "ball", "sphere"]),
            ("cause", &["cause", "stimulate", "trigger"]),
            ("enable", &["enable", "help", "allow"]),
            ("prevent", &["prevent", "keep", "hold", "block", "hinder"]),
        ];
        SynonymTable(entries.iter().map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect())).collect())
    }
}

impl SynonymTable {
    /// No substitutions: every word renders as its base form.
    pub fn empty() -> Self {
        SynonymTable(BTreeMap::new())
    }

    pub fn choices<'a>(&'a self, base: &'a str) -> Vec<&'a str> {
        match self.0.get(base) {
            Some(list) if !list.is_empty() => list.iter().map(String::as_str).collect(),
            _ => vec![base],
        }
    }

    fn draw<R: Rng + ?Sized>(&self, base: &str, rng: &mut R) -> String {
        let choices = self.choices(base);
        choices[rng.random_range(0..choices.len())].to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionTemplate {
    pub id: String,
    pub category: Category,
    pub subcategory: Subcategory,
    pub answer_type: AnswerType,
    pub verb: Option<VerbClass>,
    /// Pair templates asking about one relation; bindings whose relation is
    /// none are rejected.
    pub relation: Option<VerbClass>,
    pub texts: Vec<String>,
    pub program: Program,
}

impl QuestionTemplate {
    /// Number of distinct objects the template refers to (0, 1 or 2).
    pub fn object_count(&self) -> usize {
        self.program.slots().iter().map(|s| s.object_index() + 1).max().unwrap_or(0)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    id: String,
    category: Category,
    subcategory: Subcategory,
    answer_type: AnswerType,
    #[serde(default)]
    verb: Option<VerbClass>,
    #[serde(default)]
    relation: Option<VerbClass>,
    texts: Vec<String>,
    program: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    catalog_version: String,
    #[serde(rename = "template")]
    templates: Vec<RawTemplate>,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("template catalog does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("template {id}: {reason}")]
    Invalid { id: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateCatalog {
    pub version: String,
    pub templates: Vec<QuestionTemplate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Text(String),
    Attr(Slot),
    Verb { third_person: bool },
}

fn tokenize_text(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        if open > 0 {
            out.push(Token::Text(rest[..open].to_string()));
        }
        let close = rest[open..].find('>').ok_or_else(|| format!("unclosed `<` in {text:?}"))? + open;
        let name = &rest[open + 1..close];
        out.push(match name {
            "verb" => Token::Verb { third_person: false },
            "verbs" => Token::Verb { third_person: true },
            other => Token::Attr(Slot::from_name(other).ok_or_else(|| format!("unknown token <{other}>"))?),
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Token::Text(rest.to_string()));
    }
    Ok(out)
}

fn text_slots(text: &str) -> Result<Vec<Slot>, String> {
    let mut s: Vec<Slot> = tokenize_text(text)?
        .into_iter()
        .filter_map(|t| match t {
            Token::Attr(s) => Some(s),
            _ => None,
        })
        .collect();
    s.sort();
    s.dedup();
    Ok(s)
}

impl QuestionTemplate {
    fn validate(&self) -> Result<(), String> {
        if self.texts.is_empty() {
            return Err("no text variants".into());
        }
        if self.subcategory.category() != self.category {
            return Err(format!("subcategory {} is not {}", self.subcategory, self.category.name()));
        }
        if self.subcategory.answer_type() != self.answer_type {
            return Err(format!("{} questions answer with {}", self.subcategory, self.subcategory.answer_type()));
        }
        let typed = dsl::typecheck(&self.program).map_err(|e| e.to_string())?;
        let want = match self.answer_type {
            AnswerType::Color => Type::Color,
            AnswerType::Shape => Type::Shape,
            AnswerType::Count => Type::Integer,
            AnswerType::Boolean => Type::Bool,
        };
        if typed.root != want {
            return Err(format!("program produces {} but answer type is {}", typed.root, self.answer_type));
        }
        let program_slots = self.program.slots();
        for t in &self.texts {
            let slots = text_slots(t)?;
            if slots != program_slots {
                return Err(format!("text {t:?} uses slots {slots:?}, program uses {program_slots:?}"));
            }
            let has_verb = tokenize_text(t)?.iter().any(|k| matches!(k, Token::Verb { .. }));
            if has_verb && self.verb.is_none() {
                return Err(format!("text {t:?} has a verb token but the template has no verb class"));
            }
        }
        let full_objects = (0..self.object_count())
            .all(|i| Slot::ALL.iter().filter(|s| s.object_index() == i).all(|s| program_slots.contains(s)));
        if !full_objects {
            return Err("objects must be referenced by size, color and shape together".into());
        }
        if self.category == Category::Causal && !self.program.uses_module("GetCounterfactEvents") {
            return Err("causal programs must use GetCounterfactEvents".into());
        }
        if self.relation.is_some() && self.object_count() != 2 {
            return Err("relation templates need an affector and a patient".into());
        }
        Ok(())
    }
}

impl TemplateCatalog {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let raw: RawCatalog = toml::from_str(text)?;
        let mut templates = Vec::with_capacity(raw.templates.len());
        for r in raw.templates {
            let invalid = |reason: String| TemplateError::Invalid { id: r.id.clone(), reason };
            let program = dsl::parse_program(&r.program).map_err(|e| invalid(e.to_string()))?;
            let t = QuestionTemplate {
                id: r.id.clone(),
                category: r.category,
                subcategory: r.subcategory,
                answer_type: r.answer_type,
                verb: r.verb,
                relation: r.relation,
                texts: r.texts,
                program,
            };
            t.validate().map_err(invalid)?;
            templates.push(t);
        }
        let mut ids: Vec<&str> = templates.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(TemplateError::Invalid { id: w[0].to_string(), reason: "duplicate id".into() });
        }
        Ok(TemplateCatalog { version: raw.catalog_version, templates })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TEMPLATES).expect("bundled template catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn get(&self, id: &str) -> Option<&QuestionTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }
}

/// The bundled template catalog.
pub fn enumerate_tasks() -> Vec<QuestionTemplate> {
    TemplateCatalog::bundled().templates
}

pub type Attributes = (SizeKind, Color, ShapeKind);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("slot ${0} is not bound")]
    Unbound(&'static str),
    #[error("verb token in a template without a verb class")]
    NoVerb,
    #[error("{0}")]
    Malformed(String),
}

/// Fills one text variant. Each token occurrence draws its synonym
/// independently, left to right.
pub fn render_text<R: Rng + ?Sized>(
    text: &str,
    objects: &[Attributes],
    verb: Option<VerbClass>,
    synonyms: &SynonymTable,
    rng: &mut R,
) -> Result<String, RenderError> {
    let mut out = String::new();
    for tok in tokenize_text(text).map_err(RenderError::Malformed)? {
        match tok {
            Token::Text(s) => out.push_str(&s),
            Token::Attr(slot) => {
                let (size, color, shape) =
                    *objects.get(slot.object_index()).ok_or(RenderError::Unbound(slot.name()))?;
                match slot {
                    Slot::Z | Slot::Z2 => out.push_str(&synonyms.draw(size.name(), rng)),
                    Slot::C | Slot::C2 => out.push_str(color.name()),
                    Slot::S | Slot::S2 => out.push_str(&synonyms.draw(shape.name(), rng)),
                }
            }
            Token::Verb { third_person } => {
                let v = synonyms.draw(verb.ok_or(RenderError::NoVerb)?.base(), rng);
                out.push_str(&v);
                if third_person {
                    out.push('s');
                }
            }
        }
    }
    Ok(out)
}

/// Every (size, color, shape) phrase in a question, in order of appearance.
/// Accepts the synonyms of the default table.
pub fn resolve_references(text: &str) -> Vec<Attributes> {
    let table = SynonymTable::default();
    let lookup_size = |w: &str| SizeKind::ALL.into_iter().find(|z| table.choices(z.name()).contains(&w));
    let lookup_color = |w: &str| Color::ALL.into_iter().find(|c| c.name() == w);
    let lookup_shape = |w: &str| ShapeKind::ALL.into_iter().find(|s| table.choices(s.name()).contains(&w));
    let words: Vec<String> =
        text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect();
    words.windows(3).filter_map(|w| Some((lookup_size(&w[0])?, lookup_color(&w[1])?, lookup_shape(&w[2])?))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub easy: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard: Option<Split>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    #[default]
    Unchecked,
    Stable,
    Unstable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub instance_id: String,
    pub scene_id: String,
    pub layout_id: u32,
    pub template_id: String,
    pub category: Category,
    pub subcategory: Subcategory,
    pub question: String,
    pub program: Program,
    pub answer: Answer,
    pub answer_type: AnswerType,
    /// Referenced object ids in slot order.
    pub objects: Vec<u32>,
    #[serde(default)]
    pub splits: SplitTags,
    #[serde(default)]
    pub validation: ValidationStatus,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Rejection {
    #[error("scene has {have} dynamic objects, template needs {need}")]
    TooFewObjects { have: usize, need: usize },
    #[error("no binding yields a valid answer")]
    NoValidAnswer,
    #[error("every binding has no causal relation")]
    NoRelation,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("relation check failed: {0}")]
    Counterfactual(String),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Ordered tuples of `k` distinct ids.
fn tuples(ids: &[u32], k: usize) -> Vec<Vec<u32>> {
    match k {
        0 => vec![vec![]],
        _ => {
            let mut out = Vec::new();
            for t in tuples(ids, k - 1) {
                for id in ids {
                    if !t.contains(id) {
                        let mut n = t.clone();
                        n.push(*id);
                        out.push(n);
                    }
                }
            }
            out
        }
    }
}

/// Slot values for the given objects.
pub fn slot_bindings(objects: &[Attributes]) -> BTreeMap<Slot, Literal> {
    let mut b = BTreeMap::new();
    for (i, (z, c, s)) in objects.iter().enumerate() {
        let (sz, sc, ss) = if i == 0 { (Slot::Z, Slot::C, Slot::S) } else { (Slot::Z2, Slot::C2, Slot::S2) };
        b.insert(sz, Literal::Size(*z));
        b.insert(sc, Literal::Color(*c));
        b.insert(ss, Literal::Shape(*s));
    }
    b
}

/// Scene identity needed to label an instance.
#[derive(Clone, Copy, Debug)]
pub struct SceneRef<'a> {
    pub scene_id: &'a str,
    pub layout_id: u32,
}

/// Binds the template to objects of the scene, trying bindings in random
/// order until one evaluates to a valid answer.
pub fn instantiate<R: Rng + ?Sized>(
    template: &QuestionTemplate,
    scene: SceneRef<'_>,
    ctx: &SimContext,
    synonyms: &SynonymTable,
    rng: &mut R,
) -> Result<QAInstance, Rejection> {
    let need = template.object_count();
    let ids = ctx.dynamic_ids();
    if ids.len() < need {
        return Err(Rejection::TooFewObjects { have: ids.len(), need });
    }
    let mut candidates = tuples(&ids, need);
    candidates.shuffle(rng);
    let mut saw_none_relation = false;
    for objects in candidates {
        let attrs: Vec<Attributes> =
            objects.iter().map(|id| ctx.attributes(*id).expect("dynamic ids have attributes")).collect();
        let program = template.program.substitute(&slot_bindings(&attrs));
        let Some(answer) = dsl::answer(&program, ctx)? else {
            continue;
        };
        if template.relation.is_some() {
            let rel = classify_relation(
                objects[0],
                objects[1],
                Task::EnterBasket,
                ctx.events(),
                ctx.counterfactuals().as_ref(),
                &ctx.intentions(),
            )
            .map_err(|e| Rejection::Counterfactual(e.to_string()))?;
            if rel.relation == Relation::None {
                saw_none_relation = true;
                continue;
            }
        }
        let variant = &template.texts[rng.random_range(0..template.texts.len())];
        let question = render_text(variant, &attrs, template.verb, synonyms, rng)?;
        let suffix: Vec<String> = objects.iter().map(|o| o.to_string()).collect();
        let instance_id = if suffix.is_empty() {
            format!("{}/{}", scene.scene_id, template.id)
        } else {
            format!("{}/{}/{}", scene.scene_id, template.id, suffix.join("-"))
        };
        return Ok(QAInstance {
            instance_id,
            scene_id: scene.scene_id.to_string(),
            layout_id: scene.layout_id,
            template_id: template.id.clone(),
            category: template.category,
            subcategory: template.subcategory,
            question,
            program,
            answer,
            answer_type: template.answer_type,
            objects,
            splits: SplitTags::default(),
            validation: ValidationStatus::Unchecked,
        });
    }
    Err(if saw_none_relation { Rejection::NoRelation } else { Rejection::NoValidAnswer })
}
