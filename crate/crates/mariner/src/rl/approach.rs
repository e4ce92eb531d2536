//! Scripted controller for the `approach` action: keep the target centered,
//! close until it reads as near, and never drive forward into something the
//! laser says is too close.

use serde::{Deserialize, Serialize};

use crate::perception::RelPos;
use crate::world::ControlPrimitive;

/// Forward motion is suppressed when the laser reads closer than this.
pub const APPROACH_SAFETY_DISTANCE: f64 = 2.0;

/// What the approach controller wants next. `ForwardDown` is forward motion
/// with a one-step downward pitch, used when the target sits below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproachCommand {
    Done,
    Primitive(ControlPrimitive),
    ForwardDown,
}

/// Maps the discretized target position to the next control. When the
/// forward laser reads inside the safety distance, forward motion becomes a
/// left turn so the vehicle slides around rather than into the obstruction.
pub fn approach_controller(relpos: RelPos, laser_forward: f64) -> ApproachCommand {
    let forward_blocked = laser_forward < APPROACH_SAFETY_DISTANCE;
    match relpos {
        RelPos::Close => ApproachCommand::Done,
        RelPos::LeftFar => ApproachCommand::Primitive(ControlPrimitive::TurnLeft),
        RelPos::RightFar => ApproachCommand::Primitive(ControlPrimitive::TurnRight),
        RelPos::TopFar => ApproachCommand::Primitive(ControlPrimitive::MoveUp),
        RelPos::CenterFar | RelPos::BottomFar if forward_blocked => {
            ApproachCommand::Primitive(ControlPrimitive::TurnLeft)
        }
        RelPos::CenterFar => ApproachCommand::Primitive(ControlPrimitive::MoveForward),
        RelPos::BottomFar => ApproachCommand::ForwardDown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_each_bucket() {
        assert_eq!(approach_controller(RelPos::Close, 50.0), ApproachCommand::Done);
        assert_eq!(
            approach_controller(RelPos::LeftFar, 50.0),
            ApproachCommand::Primitive(ControlPrimitive::TurnLeft)
        );
        assert_eq!(
            approach_controller(RelPos::RightFar, 50.0),
            ApproachCommand::Primitive(ControlPrimitive::TurnRight)
        );
        assert_eq!(
            approach_controller(RelPos::CenterFar, 50.0),
            ApproachCommand::Primitive(ControlPrimitive::MoveForward)
        );
        assert_eq!(
            approach_controller(RelPos::TopFar, 50.0),
            ApproachCommand::Primitive(ControlPrimitive::MoveUp)
        );
        assert_eq!(approach_controller(RelPos::BottomFar, 50.0), ApproachCommand::ForwardDown);
    }

    #[test]
    fn laser_suppresses_forward_motion() {
        assert_eq!(
            approach_controller(RelPos::CenterFar, 1.0),
            ApproachCommand::Primitive(ControlPrimitive::TurnLeft)
        );
        assert_eq!(
            approach_controller(RelPos::BottomFar, 1.5),
            ApproachCommand::Primitive(ControlPrimitive::TurnLeft)
        );
        // Close still terminates even with the laser hot: the approach is done.
        assert_eq!(approach_controller(RelPos::Close, 1.0), ApproachCommand::Done);
    }
}
