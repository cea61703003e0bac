//! Template narration of a scene's events.

use causim_physics::{SceneSpec, StaticKind};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleDescription {
    pub scene_id: String,
    pub sentences: Vec<String>,
    pub text: String,
}

/// Static kinds that never appear in a narration.
pub const SILENT_STATICS: [StaticKind; 5] =
    [StaticKind::LeftWall, StaticKind::RightWall, StaticKind::Platform, StaticKind::Ramp, StaticKind::Button];

/// "small red circle", "ground", "basket".
pub fn object_phrase(scene: &SceneSpec, id: u32) -> Option<String> {
    if let Some(d) = scene.dynamic(id) {
        return Some(format!("{} {} {}", d.size.name(), d.color.name(), d.shape.name()));
    }
    scene.static_element(id).map(|s| s.kind.name().to_string())
}

fn is_silent(scene: &SceneSpec, id: u32) -> bool {
    scene.static_element(id).is_some_and(|s| SILENT_STATICS.contains(&s.kind))
}

/// Events kept for narration, in canonical order.
pub fn narrated_events<'a>(scene: &SceneSpec, events: &'a [Event]) -> Vec<&'a Event> {
    let mut v: Vec<&Event> = events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Start | EventKind::End | EventKind::Collision | EventKind::EnterBasket))
        .filter(|e| !e.participants.iter().any(|p| is_silent(scene, *p)))
        .collect();
    v.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    v
}

fn sentence(scene: &SceneSpec, e: &Event) -> Option<String> {
    let phrase = |id| object_phrase(scene, id);
    Some(match (e.kind, e.participants.as_slice()) {
        (EventKind::Start, _) => "The video starts.".into(),
        (EventKind::End, _) => "The video ends.".into(),
        (EventKind::EnterBasket, [o]) => format!("The {} enters the basket.", phrase(*o)?),
        (EventKind::Collision, [a, b]) => {
            // Dynamic objects are the grammatical subject.
            let (a, b) = if scene.dynamic(*a).is_none() { (*b, *a) } else { (*a, *b) };
            format!("The {} collides with the {}.", phrase(a)?, phrase(b)?)
        }
        _ => return None,
    })
}

pub fn describe(scene: &SceneSpec, events: &[Event]) -> OracleDescription {
    let sentences: Vec<String> =
        narrated_events(scene, events).into_iter().filter_map(|e| sentence(scene, e)).collect();
    OracleDescription { scene_id: scene.scene_id.clone(), text: sentences.join(" "), sentences }
}
