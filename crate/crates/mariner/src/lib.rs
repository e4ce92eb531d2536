//! A hierarchical plan-act-replan stack for a simulated autonomous
//! underwater vehicle.
//!
//! The crate layers four planners over a deterministic ocean world:
//!
//! * [`semantic`] scores where to search next from text descriptors, a
//!   persistent semantic map, and a marine knowledge file, then structures the
//!   winning directive into a symbolic task.
//! * [`htn`] decomposes the task into ground actions and validates plans.
//! * [`rl`] executes `navigate` with a trained Q-network policy and
//!   `approach` with a scripted tracking controller.
//! * [`replan`] watches sensor history after every control and routes
//!   recovery to the right level.
//!
//! [`mission`] orchestrates the loop end to end and writes replayable traces.

pub mod domain;
pub mod knowledge;
pub mod mission;
pub mod semantic;
pub mod perception;
pub mod replan;
pub mod rl;
pub mod world;
pub mod htn;
pub mod symbolic;
pub mod trace;

// The guide's code blocks compile and run as doc tests, keeping the book in
// lockstep with the library.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(world, "../../../book/src/world.md");
    chapter!(perception, "../../../book/src/perception.md");
    chapter!(semantic, "../../../book/src/semantic.md");
    chapter!(planning, "../../../book/src/planning.md");
    chapter!(motion, "../../../book/src/motion.md");
    chapter!(replanning, "../../../book/src/replanning.md");
    chapter!(missions, "../../../book/src/missions.md");
    chapter!(formats, "../../../book/src/formats.md");
}
