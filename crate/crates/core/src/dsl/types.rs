//! Value types and the module signature registry.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Object,
    ObjectSet,
    ObjectSetList,
    Event,
    EventSet,
    EventSetList,
    Size,
    Color,
    Shape,
    Integer,
    Bool,
    BoolList,
}

impl Type {
    /// Types a whole program may produce.
    pub fn is_answer(self) -> bool {
        matches!(self, Type::Color | Type::Shape | Type::Integer | Type::Bool)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModuleGroup {
    Input,
    Output,
    ObjectFilter,
    EventFilter,
    Auxiliary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub inputs: &'static [Type],
    pub output: Type,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inputs: Vec<String> = self.inputs.iter().map(|t| t.to_string()).collect();
        write!(f, "({}) -> {}", inputs.join(", "), self.output)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ModuleSpec {
    pub name: &'static str,
    pub group: ModuleGroup,
    /// Overloads; most modules have one.
    pub signatures: &'static [Signature],
}

use ModuleGroup::*;
use Type::*;

macro_rules! sig {
    ([$($i:expr),*] -> $o:expr) => {
        Signature { inputs: &[$($i),*], output: $o }
    };
}

macro_rules! module {
    ($name:literal, $group:expr, $($sig:tt)*) => {
        ModuleSpec { name: $name, group: $group, signatures: &[$($sig)*] }
    };
}

pub const MODULES: &[ModuleSpec] = &[
    module!("SceneAtStart", Input, sig!([] -> ObjectSet)),
    module!("SceneAtEnd", Input, sig!([] -> ObjectSet)),
    module!("StartSceneStep", Input, sig!([] -> Integer)),
    module!("EndSceneStep", Input, sig!([] -> Integer)),
    module!("Events", Input, sig!([] -> EventSet)),
    module!("QueryColor", Output, sig!([Object] -> Color)),
    module!("QueryShape", Output, sig!([Object] -> Shape)),
    module!("Count", Output, sig!([ObjectSet] -> Integer)),
    module!("Exist", Output, sig!([ObjectSet] -> Bool), sig!([EventSet] -> Bool)),
    module!("AnyFalse", Output, sig!([BoolList] -> Bool)),
    module!("AnyTrue", Output, sig!([BoolList] -> Bool)),
    module!("IsBefore", Output, sig!([Event, Event] -> Bool)),
    module!("IsAfter", Output, sig!([Event, Event] -> Bool)),
    module!("FilterColor", ObjectFilter, sig!([ObjectSet, Color] -> ObjectSet)),
    module!("FilterShape", ObjectFilter, sig!([ObjectSet, Shape] -> ObjectSet)),
    module!("FilterSize", ObjectFilter, sig!([ObjectSet, Size] -> ObjectSet)),
    module!("FilterDynamic", ObjectFilter, sig!([ObjectSet] -> ObjectSet)),
    module!("FilterMoving", ObjectFilter, sig!([ObjectSet, Integer] -> ObjectSet)),
    module!("FilterStationary", ObjectFilter, sig!([ObjectSet, Integer] -> ObjectSet)),
    module!("FilterEvents", EventFilter, sig!([EventSet, Object] -> EventSet)),
    module!("FilterCollision", EventFilter, sig!([EventSet] -> EventSet)),
    module!("FilterCollisionWithDynamics", EventFilter, sig!([EventSet] -> EventSet)),
    module!("FilterCollideGround", EventFilter, sig!([EventSet] -> EventSet)),
    module!("FilterCollideGroundList", EventFilter, sig!([EventSetList] -> EventSetList)),
    module!("FilterCollideBasket", EventFilter, sig!([EventSet] -> EventSet)),
    module!("FilterCollideBasketList", EventFilter, sig!([EventSetList] -> EventSetList)),
    module!("FilterEnterBasket", EventFilter, sig!([EventSet] -> EventSet)),
    module!("FilterEnterBasketList", EventFilter, sig!([EventSetList] -> EventSetList)),
    module!("FilterBefore", EventFilter, sig!([EventSet, Event] -> EventSet)),
    module!("FilterAfter", EventFilter, sig!([EventSet, Event] -> EventSet)),
    module!("FilterFirst", EventFilter, sig!([EventSet] -> Event)),
    module!("FilterLast", EventFilter, sig!([EventSet] -> Event)),
    module!("EventPartner", EventFilter, sig!([Event, Object] -> Object)),
    module!("FilterObjectsFromEvents", EventFilter, sig!([EventSet] -> ObjectSet)),
    module!("FilterObjectsFromEventsList", EventFilter, sig!([EventSetList] -> ObjectSetList)),
    module!("GetCounterfactEvents", EventFilter, sig!([Object] -> EventSet)),
    module!("GetCounterfactEventsList", EventFilter, sig!([ObjectSet] -> EventSetList)),
    module!("Unique", Auxiliary, sig!([ObjectSet] -> Object)),
    module!("Intersect", Auxiliary, sig!([ObjectSet, ObjectSet] -> ObjectSet)),
    module!("IntersectList", Auxiliary, sig!([ObjectSetList, ObjectSet] -> ObjectSetList)),
    module!("Difference", Auxiliary, sig!([ObjectSet, ObjectSet] -> ObjectSet)),
    module!("ExistList", Auxiliary, sig!([ObjectSetList] -> BoolList), sig!([EventSetList] -> BoolList)),
    module!("AsList", Auxiliary, sig!([Object] -> ObjectSet)),
];

pub fn module_spec(name: &str) -> Option<&'static ModuleSpec> {
    MODULES.iter().find(|m| m.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_group_sizes() {
        let count = |g| MODULES.iter().filter(|m| m.group == g).count();
        assert_eq!(count(Input), 5);
        assert_eq!(count(Output), 8);
        assert_eq!(count(ObjectFilter), 6);
        assert_eq!(count(EventFilter), 18);
        assert_eq!(count(Auxiliary), 6);
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = MODULES.iter().map(|m| m.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), MODULES.len());
    }
}
