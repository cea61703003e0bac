//! Static type checking against the module registry.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{Node, Program};
use super::types::{module_spec, Type};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("type error at {path}: {message}")]
pub struct TypeError {
    /// Slash-separated route from the program root, e.g. `root/Count/FilterDynamic`.
    pub path: String,
    pub message: String,
}

fn check_node(node: &Node, path: &str, env: &BTreeMap<String, Type>) -> Result<Type, TypeError> {
    match node {
        Node::Var(name) => env
            .get(name)
            .copied()
            .ok_or_else(|| TypeError { path: path.to_string(), message: format!("unbound variable `{name}`") }),
        Node::Call { module, children, args } => {
            let here = format!("{path}/{module}");
            let spec = module_spec(module)
                .ok_or_else(|| TypeError { path: here.clone(), message: format!("unknown module `{module}`") })?;
            let mut got = Vec::with_capacity(children.len() + args.len());
            for (i, c) in children.iter().enumerate() {
                got.push(check_node(c, &format!("{here}[{i}]"), env)?);
            }
            got.extend(args.iter().map(|a| a.value_type()));
            spec.signatures.iter().find(|s| s.inputs == got.as_slice()).map(|s| s.output).ok_or_else(|| {
                let expected: Vec<String> = spec.signatures.iter().map(|s| s.to_string()).collect();
                let given: Vec<String> = got.iter().map(|t| t.to_string()).collect();
                TypeError {
                    path: here,
                    message: format!("{module} expects {}, given ({})", expected.join(" or "), given.join(", ")),
                }
            })
        }
    }
}

/// Types of every binding and of the root; the root must be an answer type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub bindings: BTreeMap<String, Type>,
    pub root: Type,
}

pub fn typecheck(program: &Program) -> Result<TypedProgram, TypeError> {
    let mut env = BTreeMap::new();
    for b in &program.lets {
        if env.contains_key(&b.name) {
            return Err(TypeError { path: format!("let {}", b.name), message: "variable bound twice".into() });
        }
        let t = check_node(&b.value, &format!("let {}", b.name), &env)?;
        env.insert(b.name.clone(), t);
    }
    let root = check_node(&program.root, "root", &env)?;
    if !root.is_answer() {
        return Err(TypeError {
            path: "root".into(),
            message: format!("program produces {root}; expected Color, Shape, Integer or Bool"),
        });
    }
    Ok(TypedProgram { bindings: env, root })
}
