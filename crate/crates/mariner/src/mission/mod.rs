//! Mission orchestration: the perceive / propose / structure / plan /
//! execute / supervise loop, plus the ablation harnesses built on top of it.
//!
//! One runner owns one world and executes one command to completion. After
//! every executed control the supervision state is updated and evaluated;
//! recovery directives are serviced at the level they belong to (a
//! corrective turn right here, a rescue abort at the task level, a fresh
//! heuristic at the semantic level).

pub mod ablate;
pub mod config;

pub use ablate::{ablate, AblationMode, AblationOptions, AblationStats};
pub use config::{FaultSpec, LoadedMission, MissionConfig, MissionConfigError};

use std::io::{self, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::TypedName;
use crate::htn::{self, applicable, apply, GroundAction, Plan};
use crate::perception::{classify_relative_position, describe_view, detect_target};
use crate::replan::{
    dispatch, evaluate, RecoveryDirective, ReplanFlag, Side, SupervisionState,
};
use crate::rl::{approach_controller, build_observation, ApproachCommand};
use crate::semantic::{
    propose_heuristic, structure_task, update_semantic_map, PlanHeuristic, RegionFrame,
    RegionId, SemanticMap, ViewPoint, DESCRIPTOR_RANGE,
};
use crate::symbolic::{Literal, SymbolicState};
use crate::trace::{TraceEvent, TraceWriter};
use crate::world::{
    spawn_world, AuvState, ControlInput, ControlPrimitive, Fault, World,
};

/// Hard cap on planning rounds, a backstop behind the step budget.
const PHASE_LIMIT: usize = 60;
/// Controls allotted to one `navigate` action.
const NAVIGATE_CONTROL_BUDGET: usize = 30;
/// Controls allotted to one `approach` action.
const APPROACH_CONTROL_BUDGET: usize = 120;
/// Controls allotted to surfacing during `report`/`rescue`.
const SURFACE_CONTROL_BUDGET: usize = 80;
/// Horizontal distance from the mission origin that counts as having
/// traveled into a sector.
const SECTOR_ARRIVAL_DISTANCE: f64 = 20.0;
/// Horizontal closeness that ends a navigate leg at its waypoint.
const WAYPOINT_ARRIVAL_DISTANCE: f64 = 6.0;
/// Two entities within this distance satisfy a "near" context clause.
const CONTEXT_NEAR_DISTANCE: f64 = 20.0;

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// World position of a sighting reconstructed from its bearing, elevation,
/// and range relative to the vehicle.
fn visible_position(auv: &AuvState, e: &crate::world::VisibleEntity) -> [f64; 3] {
    let azimuth = auv.yaw - e.bearing;
    let horiz = e.range * e.elevation.cos();
    [
        auv.x + horiz * azimuth.cos(),
        auv.y + horiz * azimuth.sin(),
        auv.z + e.range * e.elevation.sin(),
    ]
}
/// The vehicle counts as surfaced at this depth.
const SURFACED_Z: f64 = -0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplanEvent {
    pub step: u64,
    pub flag: ReplanFlag,
    pub directive: RecoveryDirective,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseReport {
    pub heuristic: PlanHeuristic,
    pub init: String,
    pub goal: String,
    pub plan: Vec<String>,
    pub outcomes: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MissionReport {
    pub success: bool,
    pub total_steps: u64,
    pub reason: String,
    pub phases: Vec<PhaseReport>,
    pub replan_events: Vec<ReplanEvent>,
    pub final_pose: [f64; 6],
    /// Steps at which the vehicle registered a collision.
    pub collision_steps: Vec<u64>,
}

/// How far a mission is allowed to deviate from the full stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Full,
    /// Semantic evidence off: explore random unvisited sectors unless the
    /// target is directly in view.
    NoLlm,
    /// Task planner off: execute unvalidated plan proposals.
    NoTask,
}

/// Which supervision responses an executing action accepts.
#[derive(Clone, Copy, Debug)]
struct DispatchGuards {
    task: bool,
    obstacle: bool,
    accel: bool,
}

impl DispatchGuards {
    fn all() -> Self {
        DispatchGuards { task: true, obstacle: true, accel: true }
    }

    /// The approach controller manages its own laser standoff from the
    /// target, so the obstacle monitor stays out of its way.
    fn approach() -> Self {
        DispatchGuards { task: true, obstacle: false, accel: true }
    }

    /// Rescue must not retrigger itself while surfacing.
    fn rescue() -> Self {
        DispatchGuards { task: false, obstacle: false, accel: false }
    }
}

/// Outcome of executing one control or one action.
#[derive(Clone, Debug, PartialEq)]
enum Verdict {
    Continue,
    Completed,
    TargetLost,
    Rescue,
    Budget,
}

pub struct MissionRunner<'a, W: Write> {
    mission: &'a LoadedMission,
    mode: Mode,
    invalid_plan_probability: f64,
    seed: u64,
    world: World,
    objects: Vec<TypedName>,
    map: SemanticMap,
    anchor: RegionFrame,
    sup: SupervisionState,
    rng: ChaCha8Rng,
    trace: &'a mut TraceWriter<W>,
    total_controls: u64,
    sym: SymbolicState,
    goal: SymbolicState,
    detected: bool,
    approached: bool,
    reported: bool,
    phases: Vec<PhaseReport>,
    replan_events: Vec<ReplanEvent>,
    collision_steps: Vec<u64>,
    current_heuristic_region: RegionId,
    /// Depth the vehicle holds while navigating, set from the start pose.
    cruise_depth: f64,
}

impl<'a, W: Write> MissionRunner<'a, W> {
    pub fn new(
        mission: &'a LoadedMission,
        seed: u64,
        trace: &'a mut TraceWriter<W>,
    ) -> Result<Self, crate::world::WorldError> {
        Self::with_mode(mission, seed, Mode::Full, trace)
    }

    pub fn with_mode(
        mission: &'a LoadedMission,
        seed: u64,
        mode: Mode,
        trace: &'a mut TraceWriter<W>,
    ) -> Result<Self, crate::world::WorldError> {
        let mut world = spawn_world(&mission.world, seed)?;
        for spec in &mission.faults {
            let kind = spec.kind_parsed().expect("fault kinds validated at load");
            world.inject_fault(Fault::new(kind, spec.magnitude, spec.start_step, spec.end_step))?;
        }
        let anchor = RegionFrame::new([world.auv.x, world.auv.y]);
        let cruise_depth = world.auv.z;
        let sup = SupervisionState::new(
            mission.replanner,
            world.auv.speed,
            world.vehicle.turn_rate,
        );
        // Grounding universe: domain constants plus every object class in
        // the world plus the commanded target class.
        let mut objects = Vec::new();
        let mut add = |name: &str| {
            if !objects.iter().any(|o: &TypedName| o.name == name) {
                objects.push(TypedName { name: name.to_string(), ty: "object".into() });
            }
        };
        for e in world.entities.iter().filter(|e| e.is_solid()) {
            add(e.class.name());
        }
        add(mission.command.target_class.name());
        Ok(MissionRunner {
            mission,
            mode,
            invalid_plan_probability: 0.65,
            seed,
            world,
            objects,
            map: SemanticMap::default(),
            anchor,
            sup,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace,
            total_controls: 0,
            sym: SymbolicState::new(),
            goal: SymbolicState::new(),
            detected: false,
            approached: false,
            reported: false,
            phases: Vec::new(),
            replan_events: Vec::new(),
            collision_steps: Vec::new(),
            current_heuristic_region: RegionId(0),
            cruise_depth,
        })
    }

    pub fn with_invalid_plan_probability(mut self, p: f64) -> Self {
        self.invalid_plan_probability = p;
        self
    }

    /// Starts the mission with the goal predicate already satisfied, for
    /// exercising the degenerate already-done command.
    pub fn assume_reported(mut self) -> Self {
        self.reported = true;
        self
    }

    fn viewpoint(&self) -> ViewPoint {
        ViewPoint { position: self.world.auv.position(), yaw: self.world.auv.yaw }
    }

    fn pose_array(auv: &AuvState) -> [f64; 6] {
        [auv.x, auv.y, auv.z, auv.roll, auv.pitch, auv.yaw]
    }

    fn goal_satisfied(&self) -> bool {
        self.sym.entails(&self.goal)
    }

    fn target_entity_id(&self, arg: &str) -> Option<String> {
        if let Some(e) = self.world.entities.iter().find(|e| e.id == arg) {
            return Some(e.id.clone());
        }
        let candidates: Vec<&crate::world::Entity> =
            self.world.entities.iter().filter(|e| e.class.name() == arg).collect();
        if candidates.is_empty() {
            return None;
        }
        // With a context clause, pick the instance closest to a context
        // entity; otherwise the first declared instance.
        if let Some(context) = self.mission.command.context_class {
            if self.mission.command.target_class.name() == arg {
                let mut best: Option<(&crate::world::Entity, f64)> = None;
                for cand in &candidates {
                    for ctx in self.world.entities.iter().filter(|e| e.class == context) {
                        let d = dist3(cand.position, ctx.position);
                        if best.map(|(_, bd)| d < bd).unwrap_or(true) {
                            best = Some((cand, d));
                        }
                    }
                }
                if let Some((e, _)) = best {
                    return Some(e.id.clone());
                }
            }
        }
        Some(candidates[0].id.clone())
    }

    fn record_replan(&mut self, flag: ReplanFlag, directive: RecoveryDirective) -> io::Result<()> {
        let step = self.world.time_step;
        self.trace.write_event(&TraceEvent::Replan {
            step,
            flag: flag.code().unwrap_or(u8::MAX),
            directive: serde_json::to_string(&directive)
                .unwrap_or_default()
                .trim_matches('"')
                .to_string(),
        })?;
        self.replan_events.push(ReplanEvent { step, flag, directive });
        Ok(())
    }

    /// Executes one control: step, trace, supervise, and possibly service a
    /// recovery directive in place.
    fn exec_control(&mut self, u: ControlInput, guards: DispatchGuards) -> io::Result<Verdict> {
        let frame = self.world.step(u);
        self.total_controls += 1;
        if frame.collision {
            self.collision_steps.push(self.world.time_step);
        }
        self.trace.write_event(&TraceEvent::Step {
            step: self.world.time_step,
            pose: Self::pose_array(&self.world.auv),
            control: [u.heading, u.pitch_cmd],
        })?;
        self.sup.record(self.world.auv.speed, &frame);
        if self.total_controls >= self.mission.step_budget {
            return Ok(Verdict::Budget);
        }
        let flag = evaluate(&self.sup, self.goal_satisfied(), false);
        match flag {
            ReplanFlag::None | ReplanFlag::LlmReplan | ReplanFlag::Done => Ok(Verdict::Continue),
            ReplanFlag::TaskReplan => {
                if !guards.task {
                    return Ok(Verdict::Continue);
                }
                self.record_replan(flag, RecoveryDirective::AbortToRescue)?;
                Ok(Verdict::Rescue)
            }
            ReplanFlag::MotionReplan => {
                let directive = dispatch(flag, &self.sup).expect("motion flag dispatches");
                match directive {
                    RecoveryDirective::CorrectiveTurn(side) => {
                        if !guards.accel {
                            return Ok(Verdict::Continue);
                        }
                        self.record_replan(flag, directive)?;
                        let prim = match side {
                            Side::Left => ControlPrimitive::TurnLeft,
                            Side::Right => ControlPrimitive::TurnRight,
                        };
                        let u = self.control_for(prim);
                        self.exec_control_quiet(u)
                    }
                    RecoveryDirective::AvoidObstacle(side) => {
                        if !guards.obstacle {
                            return Ok(Verdict::Continue);
                        }
                        self.record_replan(flag, directive)?;
                        self.run_avoidance(side)
                    }
                    _ => Ok(Verdict::Continue),
                }
            }
        }
    }

    /// A control executed as part of a recovery maneuver: recorded and
    /// supervised for history, but no further dispatch.
    fn exec_control_quiet(&mut self, u: ControlInput) -> io::Result<Verdict> {
        let frame = self.world.step(u);
        self.total_controls += 1;
        if frame.collision {
            self.collision_steps.push(self.world.time_step);
        }
        self.trace.write_event(&TraceEvent::Step {
            step: self.world.time_step,
            pose: Self::pose_array(&self.world.auv),
            control: [u.heading, u.pitch_cmd],
        })?;
        self.sup.record(self.world.auv.speed, &frame);
        if self.total_controls >= self.mission.step_budget {
            return Ok(Verdict::Budget);
        }
        Ok(Verdict::Continue)
    }

    fn control_for(&self, prim: ControlPrimitive) -> ControlInput {
        prim.to_control(&self.world.auv, self.world.vehicle.turn_rate, self.world.vehicle.max_pitch)
    }

    /// Sidestep maneuver: turn away, slip past, turn back. Forward pushes
    /// only happen while the laser reads clear, otherwise the turn repeats.
    fn run_avoidance(&mut self, side: Side) -> io::Result<Verdict> {
        let (out, back) = match side {
            Side::Left => (ControlPrimitive::TurnLeft, ControlPrimitive::TurnRight),
            Side::Right => (ControlPrimitive::TurnRight, ControlPrimitive::TurnLeft),
        };
        let script = [
            out,
            ControlPrimitive::MoveForward,
            out,
            ControlPrimitive::MoveForward,
            ControlPrimitive::MoveForward,
            back,
            back,
        ];
        let clearance = self.sup.config().d_safe;
        for prim in script {
            let prim = if prim == ControlPrimitive::MoveForward
                && self.world.observe().laser_forward < clearance
            {
                out
            } else {
                prim
            };
            let u = self.control_for(prim);
            match self.exec_control_quiet(u)? {
                Verdict::Continue => {}
                other => return Ok(other),
            }
        }
        Ok(Verdict::Continue)
    }

    /// Perceive from the current pose, fold into the semantic map, and
    /// refresh target detection.
    fn perceive(&mut self) -> Vec<crate::perception::TextDescriptor> {
        let frame = self.world.observe();
        let descriptors = describe_view(&frame, &self.mission.noise, &mut self.rng);
        let vp = self.viewpoint();
        update_semantic_map(&mut self.map, &descriptors, &vp, &self.anchor, self.world.time_step);
        self.detected = self.detected_in_context(&frame, &descriptors);
        descriptors
    }

    /// Detection that honors the command's context: "the glider near the
    /// coral reef" is only detected when the described scene contains the
    /// target class and, if a context clause exists, a context sighting
    /// close to a target sighting. Class detection goes through the
    /// descriptors, so perception noise can miss or confuse it; the
    /// co-location geometry reads the sighting channel.
    fn detected_in_context(
        &self,
        frame: &crate::world::SensorFrame,
        descriptors: &[crate::perception::TextDescriptor],
    ) -> bool {
        let target = self.mission.command.target_class;
        if !detect_target(descriptors, target) {
            return false;
        }
        let Some(context) = self.mission.command.context_class else {
            return true;
        };
        if !detect_target(descriptors, context) {
            return false;
        }
        frame.visible_entities.iter().any(|e| {
            e.class == target
                && frame.visible_entities.iter().any(|c| {
                    c.class == context
                        && dist3(
                            visible_position(&self.world.auv, e),
                            visible_position(&self.world.auv, c),
                        ) <= CONTEXT_NEAR_DISTANCE
                })
        })
    }

    fn heuristic_for_phase(
        &mut self,
        descriptors: &[crate::perception::TextDescriptor],
    ) -> Result<PlanHeuristic, crate::semantic::SemanticError> {
        match self.mode {
            Mode::Full | Mode::NoTask => propose_heuristic(
                &self.mission.command,
                descriptors,
                &self.map,
                &self.mission.knowledge,
                &self.viewpoint(),
                &self.anchor,
                None,
                std::time::Duration::from_secs(5),
            ),
            Mode::NoLlm => {
                // Target in view: head straight for it. Otherwise pick an
                // unvisited sector uniformly at random.
                let frame = self.world.observe();
                if let Some(seen) = frame
                    .visible_entities
                    .iter()
                    .find(|e| e.class == self.mission.command.target_class)
                {
                    let azimuth = self.world.auv.yaw - seen.bearing;
                    let estimate = [
                        self.world.auv.x + DESCRIPTOR_RANGE * azimuth.cos(),
                        self.world.auv.y + DESCRIPTOR_RANGE * azimuth.sin(),
                        self.world.auv.z,
                    ];
                    let region = self.anchor.region_of(estimate);
                    return Ok(PlanHeuristic {
                        directive: format!("Head for the {region} area"),
                        target_region: region,
                        score: 1.0,
                        rationale: vec!["no_llm:target_in_view".into()],
                    });
                }
                let unvisited: Vec<RegionId> = RegionId::all()
                    .filter(|r| !self.map.visited_regions.contains(r))
                    .collect();
                let pool: Vec<RegionId> = if unvisited.is_empty() {
                    RegionId::all().collect()
                } else {
                    unvisited
                };
                let region = pool[self.rng.gen_range(0..pool.len())];
                Ok(PlanHeuristic {
                    directive: format!("Explore the {region} area"),
                    target_region: region,
                    score: 0.0,
                    rationale: vec!["no_llm:random_sector".into()],
                })
            }
        }
    }

    /// The unvalidated plan-proposal stub used by the task-planner ablation.
    /// With the configured probability it emits the interleaved
    /// navigate/sense pattern that clears proximity before capture.
    fn stub_plan(&mut self) -> Plan {
        let t = self.mission.command.target_class.name().to_string();
        let mk = |runner: &Self, name: &str, args: &[String]| {
            htn::ground_step(&runner.mission.domain, &runner.objects, name, args)
                .expect("marine domain actions ground")
        };
        if !self.detected {
            return Plan {
                steps: vec![mk(self, "navigate", &["auv".into()]), mk(self, "sense", &[])],
            };
        }
        let roll: f64 = self.rng.gen();
        if roll < self.invalid_plan_probability {
            Plan {
                steps: vec![
                    mk(self, "navigate", &["auv".into()]),
                    mk(self, "sense", &[]),
                    mk(self, "approach", std::slice::from_ref(&t)),
                    mk(self, "navigate", &["auv".into()]),
                    mk(self, "sense", &[]),
                    mk(self, "capture", std::slice::from_ref(&t)),
                    mk(self, "navigate", &["auv".into()]),
                    mk(self, "sense", &[]),
                    mk(self, "report", std::slice::from_ref(&t)),
                ],
            }
        } else {
            Plan {
                steps: vec![
                    mk(self, "approach", std::slice::from_ref(&t)),
                    mk(self, "capture", std::slice::from_ref(&t)),
                    mk(self, "report", std::slice::from_ref(&t)),
                ],
            }
        }
    }

    fn execute_action(&mut self, action: &GroundAction) -> io::Result<Verdict> {
        match action.name.as_str() {
            "navigate" => self.run_navigate(),
            "sense" => self.run_sense(),
            "approach" => self.run_approach(&action.args[0]),
            "capture" => Ok(Verdict::Completed),
            "report" | "rescue" => self.run_surface(action.name == "rescue"),
            other => {
                // Unknown primitive: no physical realization, treat as a
                // symbolic no-op so custom domains still execute.
                let _ = other;
                Ok(Verdict::Completed)
            }
        }
    }

    fn run_navigate(&mut self) -> io::Result<Verdict> {
        let region = self.current_heuristic_region;
        let waypoint_azimuth = region.center_azimuth();
        // Push one leg deeper into the directed sector: aim 25 m beyond the
        // current radius along the sector centerline.
        let dx0 = self.world.auv.x - self.anchor.origin[0];
        let dy0 = self.world.auv.y - self.anchor.origin[1];
        let radius = (dx0 * dx0 + dy0 * dy0).sqrt().max(SECTOR_ARRIVAL_DISTANCE);
        let waypoint = [
            self.anchor.origin[0] + (radius + 25.0) * waypoint_azimuth.cos(),
            self.anchor.origin[1] + (radius + 25.0) * waypoint_azimuth.sin(),
        ];
        for _ in 0..NAVIGATE_CONTROL_BUDGET {
            let frame = self.world.observe();
            let target_azimuth = (waypoint[1] - self.world.auv.y)
                .atan2(waypoint[0] - self.world.auv.x);
            // Gross reorientation is the executive's job; the policy only
            // sees headings inside the envelope it was trained on.
            let rel = crate::world::wrap_angle(target_azimuth - self.world.auv.yaw);
            let prim = if rel.abs() > 45f64.to_radians() {
                if rel > 0.0 {
                    ControlPrimitive::TurnLeft
                } else {
                    ControlPrimitive::TurnRight
                }
            } else {
                let obs = build_observation(
                    &frame,
                    self.world.sensors.max_range,
                    self.world.auv.yaw,
                    target_azimuth,
                );
                self.mission.policy.act(&obs).unwrap_or(ControlPrimitive::MoveForward)
            };
            let mut u = self.control_for(prim);
            // Trim toward the cruise depth with a 5 m lookahead; the policy
            // owns the horizontal motion, the executive owns the trim.
            let err = self.cruise_depth - self.world.auv.z;
            u.pitch_cmd = (err / 5.0)
                .atan()
                .clamp(-self.world.vehicle.max_pitch, self.world.vehicle.max_pitch);
            match self.exec_control(u, DispatchGuards::all())? {
                Verdict::Continue => {}
                other => return Ok(other),
            }
            let dx = self.world.auv.x - waypoint[0];
            let dy = self.world.auv.y - waypoint[1];
            if (dx * dx + dy * dy).sqrt() <= WAYPOINT_ARRIVAL_DISTANCE {
                break;
            }
        }
        Ok(Verdict::Completed)
    }

    /// A full in-place scan: twelve portward turns sweep the view cone
    /// through 360 degrees, folding every orientation into the map. If the
    /// target shows up, the vehicle turns back to face it so the next
    /// perception round sees it too.
    fn run_sense(&mut self) -> io::Result<Verdict> {
        let mut detection_yaw: Option<f64> = None;
        for _ in 0..12 {
            let u = self.control_for(ControlPrimitive::TurnLeft);
            match self.exec_control(u, DispatchGuards::all())? {
                Verdict::Continue => {}
                other => return Ok(other),
            }
            let frame = self.world.observe();
            let descriptors = describe_view(&frame, &self.mission.noise, &mut self.rng);
            let vp = self.viewpoint();
            update_semantic_map(
                &mut self.map,
                &descriptors,
                &vp,
                &self.anchor,
                self.world.time_step,
            );
            if self.detected_in_context(&frame, &descriptors) {
                self.detected = true;
                if detection_yaw.is_none() {
                    detection_yaw = Some(self.world.auv.yaw);
                }
            }
        }
        if let Some(yaw) = detection_yaw {
            for _ in 0..12 {
                let err = crate::world::wrap_angle(yaw - self.world.auv.yaw);
                if err.abs() <= self.world.vehicle.turn_rate / 2.0 {
                    break;
                }
                let prim = if err > 0.0 {
                    ControlPrimitive::TurnLeft
                } else {
                    ControlPrimitive::TurnRight
                };
                let u = self.control_for(prim);
                match self.exec_control(u, DispatchGuards::all())? {
                    Verdict::Continue => {}
                    other => return Ok(other),
                }
            }
        }
        Ok(Verdict::Completed)
    }

    fn run_approach(&mut self, target_arg: &str) -> io::Result<Verdict> {
        let Some(target_id) = self.target_entity_id(target_arg) else {
            return Ok(Verdict::TargetLost);
        };
        for _ in 0..APPROACH_CONTROL_BUDGET {
            let frame = self.world.observe();
            let relpos = match classify_relative_position(&frame, &target_id) {
                Ok(r) => r,
                Err(_) => return Ok(Verdict::TargetLost),
            };
            let command = approach_controller(relpos, frame.laser_forward);
            let seen = frame
                .visible_entities
                .iter()
                .find(|e| e.id == target_id)
                .expect("classification implies visibility");
            // The controller picks the maneuver; the executive realizes it
            // proportionally so small bearing errors produce small turns
            // (the attitude loop rate-limits either way).
            let track = ControlInput {
                heading: crate::world::wrap_angle(self.world.auv.yaw - seen.bearing),
                pitch_cmd: seen
                    .elevation
                    .clamp(-self.world.vehicle.max_pitch, self.world.vehicle.max_pitch),
            };
            let u = match command {
                ApproachCommand::Done => return Ok(Verdict::Completed),
                // A laser-forced breakaway turns at the full rate.
                ApproachCommand::Primitive(ControlPrimitive::TurnLeft)
                    if frame.laser_forward < crate::rl::approach::APPROACH_SAFETY_DISTANCE
                        && seen.bearing.abs() <= self.world.vehicle.turn_rate =>
                {
                    self.control_for(ControlPrimitive::TurnLeft)
                }
                ApproachCommand::Primitive(_) | ApproachCommand::ForwardDown => track,
            };
            match self.exec_control(u, DispatchGuards::approach())? {
                Verdict::Continue => {}
                other => return Ok(other),
            }
        }
        Ok(Verdict::TargetLost)
    }

    fn run_surface(&mut self, rescue: bool) -> io::Result<Verdict> {
        let guards = if rescue { DispatchGuards::rescue() } else { DispatchGuards::all() };
        for _ in 0..SURFACE_CONTROL_BUDGET {
            if self.world.auv.z >= SURFACED_Z {
                return Ok(Verdict::Completed);
            }
            // Ascend in a tight spiral so the climb stays on station instead
            // of running off toward whatever the vehicle last faced.
            let u = ControlInput {
                heading: crate::world::wrap_angle(
                    self.world.auv.yaw + self.world.vehicle.turn_rate,
                ),
                pitch_cmd: self.world.vehicle.max_pitch,
            };
            match self.exec_control(u, guards)? {
                Verdict::Continue => {}
                other => return Ok(other),
            }
        }
        Ok(Verdict::Completed)
    }

    /// Task-level abort: drop the plan, mark the replanning signal, and run
    /// the rescue plan to the surface.
    fn run_rescue(&mut self, phase: usize) -> io::Result<MissionReport> {
        self.sym.insert(Literal::pos("replanned", &[]));
        let goal = SymbolicState::from_literals([Literal::pos("reported", &["rescue"])]);
        let plan = htn::plan(&self.mission.domain, &self.objects, &self.sym, &goal)
            .unwrap_or_default();
        self.trace.write_event(&TraceEvent::Plan {
            phase,
            steps: plan.steps.iter().map(|s| s.to_string()).collect(),
        })?;
        for action in &plan.steps {
            self.trace.write_event(&TraceEvent::ActionStart {
                phase,
                action: action.to_string(),
            })?;
            let verdict = self.execute_action(action)?;
            self.trace.write_event(&TraceEvent::ActionEnd {
                phase,
                action: action.to_string(),
                outcome: format!("{verdict:?}"),
            })?;
            if let Some(p) = self.phases.last_mut() {
                p.outcomes.push((action.to_string(), format!("{verdict:?}")));
            }
            if verdict == Verdict::Completed {
                if let Ok(next) = apply(action, &self.sym) {
                    self.sym = next;
                }
            }
        }
        self.finish(false, "rescue")
    }

    fn finish(&mut self, success: bool, reason: &str) -> io::Result<MissionReport> {
        self.trace.write_event(&TraceEvent::MissionEnd {
            success,
            total_steps: self.total_controls,
            reason: reason.to_string(),
        })?;
        Ok(MissionReport {
            success,
            total_steps: self.total_controls,
            reason: reason.to_string(),
            phases: std::mem::take(&mut self.phases),
            replan_events: std::mem::take(&mut self.replan_events),
            final_pose: Self::pose_array(&self.world.auv),
            collision_steps: std::mem::take(&mut self.collision_steps),
        })
    }

    /// Runs the mission to completion.
    pub fn run(mut self) -> io::Result<MissionReport> {
        self.trace.write_event(&TraceEvent::MissionStart {
            command: self.mission.command_text.clone(),
            seed: self.seed,
        })?;

        for phase in 1..=PHASE_LIMIT {
            let descriptors = self.perceive();
            let heuristic = match self.heuristic_for_phase(&descriptors) {
                Ok(h) => h,
                Err(e) => return self.finish(false, &format!("semantic_error:{e}")),
            };
            self.current_heuristic_region = heuristic.target_region;
            self.trace.write_event(&TraceEvent::Heuristic {
                phase,
                directive: heuristic.directive.clone(),
                region: heuristic.target_region.to_string(),
                score: heuristic.score,
                rationale: heuristic.rationale.clone(),
            })?;

            let (init, goal) = structure_task(
                &heuristic,
                &self.mission.command,
                self.detected,
                self.approached,
                self.reported,
            );
            self.sym = init.clone();
            self.goal = goal.clone();
            self.trace.write_event(&TraceEvent::Task {
                phase,
                init: init.to_string(),
                goal: goal.to_string(),
            })?;

            let plan = if self.mode == Mode::NoTask {
                self.stub_plan()
            } else {
                match htn::plan(&self.mission.domain, &self.objects, &init, &goal) {
                    Ok(p) => p,
                    Err(e) => return self.finish(false, &format!("unsolvable:{e}")),
                }
            };
            self.trace.write_event(&TraceEvent::Plan {
                phase,
                steps: plan.steps.iter().map(|s| s.to_string()).collect(),
            })?;
            self.phases.push(PhaseReport {
                heuristic: heuristic.clone(),
                init: init.to_string(),
                goal: goal.to_string(),
                plan: plan.steps.iter().map(|s| s.to_string()).collect(),
                outcomes: Vec::new(),
            });

            // Execute the plan.
            for action in &plan.steps {
                self.trace.write_event(&TraceEvent::ActionStart {
                    phase,
                    action: action.to_string(),
                })?;
                // Unvalidated plans can carry inapplicable actions; the
                // full stack never reaches this branch.
                if !applicable(action, &self.sym) {
                    let violated = action
                        .preconditions
                        .iter()
                        .find(|l| !self.sym.holds(l))
                        .cloned()
                        .expect("inapplicable action has a violated precondition");
                    self.trace.write_event(&TraceEvent::ActionEnd {
                        phase,
                        action: action.to_string(),
                        outcome: format!("precondition violated: {violated}"),
                    })?;
                    if let Some(p) = self.phases.last_mut() {
                        p.outcomes.push((action.to_string(), "precondition_violated".into()));
                    }
                    return self.finish(false, "invalid_plan");
                }
                let verdict = self.execute_action(action)?;
                self.trace.write_event(&TraceEvent::ActionEnd {
                    phase,
                    action: action.to_string(),
                    outcome: format!("{verdict:?}"),
                })?;
                if let Some(p) = self.phases.last_mut() {
                    p.outcomes.push((action.to_string(), format!("{verdict:?}")));
                }
                match verdict {
                    Verdict::Completed => {
                        self.sym = apply(action, &self.sym).expect("applicability checked");
                        let t = self.mission.command.target_class.name();
                        self.approached = self.sym.holds(&Literal::pos("approached", &[t]));
                        self.reported =
                            self.reported || self.sym.holds(&Literal::pos("reported", &[t]));
                    }
                    Verdict::TargetLost => {
                        self.record_replan(ReplanFlag::LlmReplan, RecoveryDirective::NewHeuristic)?;
                        self.detected = false;
                        break;
                    }
                    Verdict::Rescue => return self.run_rescue(phase),
                    Verdict::Budget => return self.finish(false, "budget"),
                    Verdict::Continue => unreachable!(),
                }
            }

            // Plan exhausted (or abandoned): where does the mission stand?
            if self.goal_satisfied() {
                self.record_replan(ReplanFlag::Done, RecoveryDirective::Finish)?;
                return self.finish(true, "completed");
            }
            let flag = evaluate(&self.sup, false, true);
            match flag {
                ReplanFlag::TaskReplan => {
                    self.record_replan(flag, RecoveryDirective::AbortToRescue)?;
                    return self.run_rescue(phase);
                }
                ReplanFlag::LlmReplan | ReplanFlag::MotionReplan | ReplanFlag::None => {
                    // A new heuristic round. Motion-level noise at this
                    // boundary is picked up by the next plan's controls.
                    if !self
                        .replan_events
                        .last()
                        .map(|e| {
                            e.flag == ReplanFlag::LlmReplan && e.step == self.world.time_step
                        })
                        .unwrap_or(false)
                    {
                        self.record_replan(
                            ReplanFlag::LlmReplan,
                            RecoveryDirective::NewHeuristic,
                        )?;
                    }
                }
                ReplanFlag::Done => unreachable!("goal checked above"),
            }
        }
        self.finish(false, "phase_limit")
    }
}

/// Runs one mission with the full stack.
pub fn run_mission<W: Write>(
    mission: &LoadedMission,
    seed: u64,
    trace: &mut TraceWriter<W>,
) -> io::Result<MissionReport> {
    let runner = MissionRunner::new(mission, seed, trace)
        .map_err(|e| io::Error::other(e.to_string()))?;
    runner.run()
}

/// The canonical fault injected by each scripted situation.
pub fn situation_fault(scenario: u8) -> Option<FaultSpec> {
    Some(match scenario {
        1 => FaultSpec {
            kind: "speed_degradation".into(),
            magnitude: 0.4,
            start_step: 25,
            end_step: 100_000,
        },
        2 => FaultSpec {
            kind: "lateral_push".into(),
            magnitude: 3.0,
            start_step: 20,
            end_step: 22,
        },
        3 => FaultSpec {
            kind: "obstacle_spawn".into(),
            magnitude: 3.5,
            start_step: 12,
            end_step: 100_000,
        },
        _ => return None,
    })
}

/// Runs a scripted unexpected-situation scenario: the base mission with the
/// scenario's fault injected.
pub fn run_situation<W: Write>(
    base: &LoadedMission,
    scenario: u8,
    seed: u64,
    trace: &mut TraceWriter<W>,
) -> io::Result<MissionReport> {
    let fault = situation_fault(scenario)
        .ok_or_else(|| io::Error::other(format!("unknown scenario {scenario}")))?;
    let mut mission = base.clone();
    mission.faults.push(fault);
    run_mission(&mission, seed, trace)
}
