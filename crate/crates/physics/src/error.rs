use crate::shape::ShapeError;

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum PhysicsError {
    #[error("step called with dt = {got}, world is configured for {expected}")]
    TimestepMismatch { expected: f64, got: f64 },
    #[error("solver blow-up at tick {tick}: object {object} reached speed {speed:.3} m/s")]
    BlowUp { tick: u64, object: u32, speed: f64 },
    #[error("duplicate object id {0}")]
    DuplicateId(u32),
    #[error("objects {a} and {b} interpenetrate by {:.4} m", -separation)]
    Overlap { a: u32, b: u32, separation: f64 },
    #[error("bad geometry on element {id}: {source}")]
    Shape { id: u32, source: ShapeError },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
