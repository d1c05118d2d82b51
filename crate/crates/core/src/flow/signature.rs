//! `C::a, C::b -> C::c` signatures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classify::InvariantType;
use crate::extract::{AttrRef, ComponentCatalog};

use super::FlowError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
    #[default]
    Undecided,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::Undecided => "undecided",
        }
    }

    pub fn parse(choice: &str) -> Option<Self> {
        match choice {
            "in" => Some(Direction::In),
            "out" => Some(Direction::Out),
            "undecided" => Some(Direction::Undecided),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a parameter has its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    #[default]
    None,
    /// The only parameter of a process invariant.
    SingleParameter,
    /// Produced elsewhere, so assumed consumed here (provisional).
    SharedAttribute,
    /// Assumptions only read knowledge.
    Assumption,
    Journal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeParameter {
    pub component: String,
    /// Attribute key, or `?` for "some knowledge of this component".
    pub attribute: String,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "is_default")]
    pub basis: Basis,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl KnowledgeParameter {
    pub fn new(attr: &AttrRef, direction: Direction) -> Self {
        KnowledgeParameter { component: attr.component.clone(), attribute: attr.attribute.clone(), direction, basis: Basis::None }
    }

    pub fn attr(&self) -> AttrRef {
        AttrRef::new(self.component.clone(), self.attribute.clone())
    }

    pub fn is_placeholder(&self) -> bool {
        self.attribute == AttrRef::PLACEHOLDER
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSignature {
    /// Requirement id the signature abstracts.
    pub invariant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_type: Option<InvariantType>,
    pub params: Vec<KnowledgeParameter>,
}

impl FlowSignature {
    pub fn new(invariant: impl Into<String>, invariant_type: Option<InvariantType>) -> Self {
        FlowSignature { invariant: invariant.into(), invariant_type, params: Vec::new() }
    }

    pub fn inputs(&self) -> impl Iterator<Item = &KnowledgeParameter> {
        self.params.iter().filter(|p| p.direction == Direction::In)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &KnowledgeParameter> {
        self.params.iter().filter(|p| p.direction == Direction::Out)
    }

    pub fn undecided(&self) -> impl Iterator<Item = &KnowledgeParameter> {
        self.params.iter().filter(|p| p.direction == Direction::Undecided)
    }

    pub fn is_finalized(&self) -> bool {
        self.params.iter().all(|p| p.direction != Direction::Undecided)
    }

    pub fn param(&self, attr: &AttrRef) -> Option<&KnowledgeParameter> {
        self.params.iter().find(|p| p.component == attr.component && p.attribute == attr.attribute)
    }

    /// Distinct component names, in parameter order.
    pub fn components(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for p in &self.params {
            if !out.contains(&p.component.as_str()) {
                out.push(&p.component);
            }
        }
        out
    }

    /// Inputs first, then undecided, then outputs; relative order kept.
    pub fn normalize(&mut self) {
        self.params.sort_by_key(|p| match p.direction {
            Direction::In => 0,
            Direction::Undecided => 1,
            Direction::Out => 2,
        });
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }
}

impl fmt::Display for FlowSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_signature(self))
    }
}

/// `E-Car::energy, E-Car::POI -> E-Car::plan`. Undecided parameters are
/// listed on the input side with a `~` prefix.
pub fn format_signature(sig: &FlowSignature) -> String {
    let name = |p: &KnowledgeParameter| format!("{}::{}", p.component, p.attribute);
    let mut lhs: Vec<String> = sig.inputs().map(name).collect();
    lhs.extend(sig.undecided().map(|p| format!("~{}", name(p))));
    let rhs: Vec<String> = sig.outputs().map(name).collect();
    match (lhs.is_empty(), rhs.is_empty()) {
        (true, true) => "->".to_string(),
        (true, false) => format!("-> {}", rhs.join(", ")),
        (false, true) => format!("{} ->", lhs.join(", ")),
        (false, false) => format!("{} -> {}", lhs.join(", "), rhs.join(", ")),
    }
}

/// Parses the text form back, resolving names against the catalog.
/// Attributes may be given by key or display name; they come back as keys.
pub fn parse_signature(text: &str, catalog: &ComponentCatalog) -> Result<FlowSignature, FlowError> {
    let arrow = text.find("->").ok_or_else(|| syntax(text.len(), "missing `->`"))?;
    if let Some(second) = text[arrow + 2..].find("->") {
        return Err(syntax(arrow + 2 + second, "second `->`"));
    }
    let mut sig = FlowSignature::new("", None);
    for (side, offset, default) in [(&text[..arrow], 0, Direction::In), (&text[arrow + 2..], arrow + 2, Direction::Out)] {
        if side.trim().is_empty() {
            continue;
        }
        let mut pos = offset;
        for piece in side.split(',') {
            let start = pos + (piece.len() - piece.trim_start().len());
            pos += piece.len() + 1;
            let mut item = piece.trim();
            if item.is_empty() {
                return Err(syntax(start, "empty parameter"));
            }
            let mut direction = default;
            if let Some(rest) = item.strip_prefix('~') {
                if default == Direction::Out {
                    return Err(syntax(start, "undecided parameter after `->`"));
                }
                direction = Direction::Undecided;
                item = rest;
            }
            let (component, attribute) = item.split_once("::").ok_or_else(|| syntax(start, "expected `Component::attribute`"))?;
            let (component, attribute) = (component.trim(), attribute.trim());
            if component.is_empty() || attribute.is_empty() || attribute.contains("::") {
                return Err(syntax(start, "expected `Component::attribute`"));
            }
            if catalog.component(component).is_none() {
                return Err(FlowError::UnknownName(component.to_string()));
            }
            let key = if attribute == AttrRef::PLACEHOLDER {
                attribute.to_string()
            } else {
                catalog
                    .attribute(component, attribute)
                    .map(|a| a.key.clone())
                    .ok_or_else(|| FlowError::UnknownName(format!("{component}::{attribute}")))?
            };
            sig.params.push(KnowledgeParameter::new(&AttrRef::new(component, key), direction));
        }
    }
    Ok(sig)
}

fn syntax(position: usize, reason: &str) -> FlowError {
    FlowError::SyntaxError { position, reason: reason.to_string() }
}
