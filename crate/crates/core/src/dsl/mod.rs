//! Typed functional programs over simulation results.

pub mod ast;
pub mod check;
pub mod eval;
pub mod text;
pub mod types;

pub use ast::{Binding, Literal, Node, Program, Slot};
pub use check::{typecheck, TypeError, TypedProgram};
pub use eval::{
    answer, answer_vocabulary, evaluate, Answer, AnswerType, EvalError, ObjectInfo, ObjectKind, SimContext, Value,
};
pub use text::{parse_program, pretty, ParseError};
pub use types::{module_spec, ModuleGroup, Type, MODULES};
