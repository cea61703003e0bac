//! Program trees, literal arguments and their JSON encoding.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use causim_physics::{Color, ShapeKind, SizeKind};
use serde::{Deserialize, Serialize};

use super::types::Type;

/// Template placeholder: attributes of the first (`Z`, `C`, `S`) or second
/// (`Z2`, `C2`, `S2`) referenced object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Z,
    C,
    S,
    Z2,
    C2,
    S2,
}

impl Slot {
    pub const ALL: [Slot; 6] = [Slot::Z, Slot::C, Slot::S, Slot::Z2, Slot::C2, Slot::S2];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Z => "Z",
            Slot::C => "C",
            Slot::S => "S",
            Slot::Z2 => "Z2",
            Slot::C2 => "C2",
            Slot::S2 => "S2",
        }
    }

    pub fn from_name(s: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn value_type(self) -> Type {
        match self {
            Slot::Z | Slot::Z2 => Type::Size,
            Slot::C | Slot::C2 => Type::Color,
            Slot::S | Slot::S2 => Type::Shape,
        }
    }

    /// 0 for the first object, 1 for the second.
    pub fn object_index(self) -> usize {
        match self {
            Slot::Z | Slot::C | Slot::S => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Size(SizeKind),
    Color(Color),
    Shape(ShapeKind),
    Int(i64),
    Slot(Slot),
}

impl Literal {
    pub fn value_type(self) -> Type {
        match self {
            Literal::Size(_) => Type::Size,
            Literal::Color(_) => Type::Color,
            Literal::Shape(_) => Type::Shape,
            Literal::Int(_) => Type::Integer,
            Literal::Slot(s) => s.value_type(),
        }
    }
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl fmt::Display for Literal {
    /// Symbolic form without quotes: `Small`, `Yellow`, `Cube`, `$Z`, `3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Size(s) => f.write_str(&capitalized(s.name())),
            Literal::Color(c) => f.write_str(&capitalized(c.name())),
            Literal::Shape(s) => f.write_str(&capitalized(s.name())),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Slot(s) => write!(f, "${}", s.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownLiteral(pub String);

impl fmt::Display for UnknownLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown literal `{}`", self.0)
    }
}

impl std::error::Error for UnknownLiteral {}

impl FromStr for Literal {
    type Err = UnknownLiteral;

    /// Case-insensitive attribute names or `$SLOT`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix('$') {
            return Slot::from_name(name).map(Literal::Slot).ok_or_else(|| UnknownLiteral(s.to_string()));
        }
        let lower = s.to_ascii_lowercase();
        if let Some(z) = SizeKind::ALL.into_iter().find(|z| z.name() == lower) {
            return Ok(Literal::Size(z));
        }
        if let Some(c) = Color::ALL.into_iter().find(|c| c.name() == lower) {
            return Ok(Literal::Color(c));
        }
        if let Some(sh) = ShapeKind::ALL.into_iter().find(|sh| sh.name() == lower) {
            return Ok(Literal::Shape(sh));
        }
        Err(UnknownLiteral(s.to_string()))
    }
}

/// A program node. Literal arguments of a call always follow its child nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "NodeRepr", try_from = "NodeRepr")]
pub enum Node {
    Call { module: String, children: Vec<Node>, args: Vec<Literal> },
    Var(String),
}

impl Node {
    pub fn call(module: &str, children: Vec<Node>) -> Node {
        Node::Call { module: module.to_string(), children, args: vec![] }
    }

    pub fn call_with(module: &str, children: Vec<Node>, args: Vec<Literal>) -> Node {
        Node::Call { module: module.to_string(), children, args }
    }

    pub fn var(name: &str) -> Node {
        Node::Var(name.to_string())
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Node::Call { children, .. } = self {
            for c in children {
                c.visit(f);
            }
        }
    }

    fn visit_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        if let Node::Call { children, .. } = self {
            for c in children {
                c.visit_mut(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub name: String,
    pub value: Node,
}

/// Let-bindings evaluated in order, then the root expression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lets: Vec<Binding>,
    pub root: Node,
}

impl Program {
    pub fn new(root: Node) -> Self {
        Program { lets: vec![], root }
    }

    fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        for b in &self.lets {
            b.value.visit(&mut |n| out.push(n));
        }
        self.root.visit(&mut |n| out.push(n));
        out
    }

    /// Names of every module called, in visiting order.
    pub fn modules(&self) -> Vec<&str> {
        self.nodes()
            .into_iter()
            .filter_map(|n| match n {
                Node::Call { module, .. } => Some(module.as_str()),
                Node::Var(_) => None,
            })
            .collect()
    }

    pub fn uses_module(&self, name: &str) -> bool {
        self.modules().contains(&name)
    }

    pub fn slots(&self) -> Vec<Slot> {
        let mut out: Vec<Slot> = self
            .nodes()
            .into_iter()
            .filter_map(|n| match n {
                Node::Call { args, .. } => Some(args.iter().filter_map(|a| match a {
                    Literal::Slot(s) => Some(*s),
                    _ => None,
                })),
                Node::Var(_) => None,
            })
            .flatten()
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Replaces slot literals with bound values; unbound slots are left in place.
    pub fn substitute(&self, bindings: &BTreeMap<Slot, Literal>) -> Program {
        let mut p = self.clone();
        let mut sub = |n: &mut Node| {
            if let Node::Call { args, .. } = n {
                for a in args.iter_mut() {
                    if let Literal::Slot(s) = a {
                        if let Some(v) = bindings.get(s) {
                            *a = *v;
                        }
                    }
                }
            }
        };
        for b in &mut p.lets {
            b.value.visit_mut(&mut sub);
        }
        p.root.visit_mut(&mut sub);
        p
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("programs always serialize")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Program, serde_json::Error> {
        Program::deserialize(value)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ArgRepr {
    Int(i64),
    Str(String),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Call {
        module: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        children: Vec<NodeRepr>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<ArgRepr>,
    },
    Var {
        var: String,
    },
}

impl From<Node> for NodeRepr {
    fn from(n: Node) -> Self {
        match n {
            Node::Call { module, children, args } => NodeRepr::Call {
                module,
                children: children.into_iter().map(NodeRepr::from).collect(),
                args: args
                    .into_iter()
                    .map(|a| match a {
                        Literal::Int(i) => ArgRepr::Int(i),
                        other => ArgRepr::Str(other.to_string()),
                    })
                    .collect(),
            },
            Node::Var(var) => NodeRepr::Var { var },
        }
    }
}

impl TryFrom<NodeRepr> for Node {
    type Error = UnknownLiteral;

    fn try_from(r: NodeRepr) -> Result<Self, Self::Error> {
        Ok(match r {
            NodeRepr::Call { module, children, args } => Node::Call {
                module,
                children: children.into_iter().map(Node::try_from).collect::<Result<_, _>>()?,
                args: args
                    .into_iter()
                    .map(|a| match a {
                        ArgRepr::Int(i) => Ok(Literal::Int(i)),
                        ArgRepr::Str(s) => s.parse(),
                    })
                    .collect::<Result<_, _>>()?,
            },
            NodeRepr::Var { var } => Node::Var(var),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_names_round_trip() {
        for s in ["Small", "Large", "Yellow", "Gray", "Cube", "Circle", "$Z", "$S2", "7"] {
            let lit: Literal = s.parse().or_else(|_| s.parse::<i64>().map(Literal::Int).map_err(|_| ())).unwrap();
            assert_eq!(lit.to_string(), s);
        }
        assert!("Huge".parse::<Literal>().is_err());
        assert_eq!("yellow".parse::<Literal>(), Ok(Literal::Color(Color::Yellow)));
    }

    #[test]
    fn json_shape() {
        let p = Program {
            lets: vec![Binding { name: "X".into(), value: Node::call("SceneAtStart", vec![]) }],
            root: Node::call(
                "Count",
                vec![Node::call_with("FilterColor", vec![Node::var("X")], vec![Literal::Color(Color::Red)])],
            ),
        };
        let j = p.to_json();
        assert_eq!(j["root"]["children"][0]["args"][0], "Red");
        assert_eq!(j["root"]["children"][0]["children"][0]["var"], "X");
        assert_eq!(Program::from_json(&j).unwrap(), p);
    }
}
