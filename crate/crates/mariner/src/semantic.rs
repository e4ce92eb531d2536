//! The semantic planner: a deterministic scoring oracle over text
//! descriptors, a persistent semantic map, and the marine knowledge base.
//! It proposes where to search next and structures the winning directive
//! into a symbolic task for the task planner.
//!
//! Candidate regions are eight horizontal bearing sectors around the mission
//! origin crossed with two depth bands. Evidence is additive: a direct
//! observation of the target class is worth 0.5, a knowledge-base attribute
//! match 0.3, a semantic-map relation match 0.2, and a region already visited
//! pays a 0.4 penalty; scores clamp to [0, 1].
//!
//! An external language-model backend can be plugged in through
//! [`SemanticBackend`]; on timeout or malformed output the oracle result is
//! used, so a flaky backend can never abort a mission.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeBase;
use crate::perception::{Direction, TextDescriptor};
use crate::symbolic::{Literal, SymbolicState};
use crate::world::{wrap_angle, EntityClass, Vec3};

pub const WEIGHT_OBSERVED: f64 = 0.5;
pub const WEIGHT_KNOWLEDGE: f64 = 0.3;
pub const WEIGHT_MAP_RELATION: f64 = 0.2;
pub const VISITED_PENALTY: f64 = 0.4;

/// Sector count around the mission origin.
pub const SECTORS: u8 = 8;
/// Depth separating the shallow band from the deep band.
pub const BAND_DEPTH: f64 = 10.0;
/// Nominal range used to place a descriptor without a measured distance.
pub const DESCRIPTOR_RANGE: f64 = 25.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticError {
    #[error("no candidate regions to score")]
    NoCandidates,
    #[error("command names no known target class: `{0}`")]
    UnknownTarget(String),
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("backend transport failed: {0}")]
    Transport(String),
}

/// Port for an external language-model service. Implementations answer a
/// rendered prompt within the timeout or fail; the caller always falls back
/// to the rule-based oracle.
pub trait SemanticBackend {
    fn query(&self, prompt: &str, timeout: Duration) -> Result<String, BackendError>;
}

/// A parsed operator command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionCommand {
    pub text: String,
    pub target_class: EntityClass,
    pub context_class: Option<EntityClass>,
}

impl MissionCommand {
    /// Extracts the target class and an optional `near <class>` context from
    /// free text, e.g. "Search the glider near coral reef".
    pub fn parse(text: &str) -> Result<Self, SemanticError> {
        let lower = text.to_lowercase().replace('_', " ");
        let phrases: [(&str, EntityClass); 6] = [
            ("coral reef", EntityClass::CoralReef),
            ("warship", EntityClass::Warship),
            ("glider", EntityClass::Glider),
            ("canyon", EntityClass::Canyon),
            ("hill", EntityClass::Hill),
            ("plain", EntityClass::Plain),
        ];
        let mut mentions: Vec<(usize, EntityClass)> = Vec::new();
        for (phrase, class) in phrases {
            let mut start = 0;
            while let Some(pos) = lower[start..].find(phrase) {
                mentions.push((start + pos, class));
                start += pos + phrase.len();
            }
        }
        mentions.sort_by_key(|m| m.0);
        let near_pos = lower.find(" near ");
        let context = near_pos.and_then(|np| {
            mentions.iter().find(|(pos, _)| *pos > np).map(|(_, class)| *class)
        });
        let target = mentions
            .iter()
            .map(|(_, class)| *class)
            .find(|class| Some(*class) != context)
            .ok_or_else(|| SemanticError::UnknownTarget(text.to_string()))?;
        Ok(MissionCommand { text: text.to_string(), target_class: target, context_class: context })
    }
}

/// One of the sixteen candidate regions: sector index 0..8, band 0 (shallow)
/// or 1 (deep).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId(pub u8);

impl RegionId {
    pub const COUNT: u8 = SECTORS * 2;

    pub fn new(sector: u8, deep: bool) -> Self {
        RegionId(sector % SECTORS + if deep { SECTORS } else { 0 })
    }

    pub fn sector(self) -> u8 {
        self.0 % SECTORS
    }

    pub fn is_deep(self) -> bool {
        self.0 >= SECTORS
    }

    /// Azimuth of the sector center, radians CCW from +x.
    pub fn center_azimuth(self) -> f64 {
        let width = std::f64::consts::TAU / SECTORS as f64;
        wrap_angle((self.sector() as f64 + 0.5) * width)
    }

    pub fn all() -> impl Iterator<Item = RegionId> {
        (0..Self::COUNT).map(RegionId)
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sector{}-{}", self.sector(), if self.is_deep() { "deep" } else { "shallow" })
    }
}

impl RegionId {
    pub fn parse(s: &str) -> Option<RegionId> {
        let rest = s.strip_prefix("sector")?;
        let (num, band) = rest.split_once('-')?;
        let sector: u8 = num.parse().ok()?;
        if sector >= SECTORS {
            return None;
        }
        match band {
            "shallow" => Some(RegionId::new(sector, false)),
            "deep" => Some(RegionId::new(sector, true)),
            _ => None,
        }
    }
}

/// World-anchored frame for the candidate regions, fixed at mission start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionFrame {
    pub origin: [f64; 2],
}

impl RegionFrame {
    pub fn new(origin: [f64; 2]) -> Self {
        RegionFrame { origin }
    }

    pub fn region_of(&self, position: Vec3) -> RegionId {
        let azimuth = (position[1] - self.origin[1]).atan2(position[0] - self.origin[0]);
        let width = std::f64::consts::TAU / SECTORS as f64;
        let mut turn = azimuth;
        if turn < 0.0 {
            turn += std::f64::consts::TAU;
        }
        let sector = ((turn / width) as u8).min(SECTORS - 1);
        RegionId::new(sector, position[2] <= -BAND_DEPTH)
    }
}

/// The vantage a set of descriptors was taken from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPoint {
    pub position: Vec3,
    pub yaw: f64,
}

/// Representative bearing of the left/right descriptor buckets, radians.
/// The buckets span everything beyond 10 degrees; this angle is where the
/// scorer assumes the subject sits when projecting it onto a region.
pub const SIDE_BUCKET_ANGLE: f64 = 35.0 * std::f64::consts::PI / 180.0;

impl ViewPoint {
    /// Projects a coarse descriptor direction (plus an optional depth
    /// estimate) onto a world region.
    fn region_for_depth(
        &self,
        frame: &RegionFrame,
        direction: Direction,
        subject_z: Option<f64>,
    ) -> RegionId {
        let estimate = self.position_for(direction, subject_z);
        let region = frame.region_of(estimate);
        match direction {
            Direction::Above => RegionId::new(region.sector(), false),
            Direction::Below => RegionId::new(region.sector(), true),
            _ => region,
        }
    }

    #[cfg(test)]
    fn region_for(&self, frame: &RegionFrame, direction: Direction) -> RegionId {
        self.region_for_depth(frame, direction, None)
    }

    /// Coarse world position for a map entry.
    fn position_for(&self, direction: Direction, subject_z: Option<f64>) -> Vec3 {
        let azimuth = match direction {
            Direction::Front | Direction::Above | Direction::Below => self.yaw,
            Direction::Left => self.yaw + SIDE_BUCKET_ANGLE,
            Direction::Right => self.yaw - SIDE_BUCKET_ANGLE,
        };
        let dz = match direction {
            Direction::Above => 5.0,
            Direction::Below => -5.0,
            _ => 0.0,
        };
        [
            self.position[0] + DESCRIPTOR_RANGE * azimuth.cos(),
            self.position[1] + DESCRIPTOR_RANGE * azimuth.sin(),
            subject_z.unwrap_or(self.position[2] + dz),
        ]
    }
}

/// One remembered observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub class: EntityClass,
    pub position_estimate: Vec3,
    pub region: RegionId,
    /// Free-text relation such as "glider near warship".
    pub relation: Option<String>,
    pub step_observed: u64,
}

/// Persistent memory of the explored environment within a mission. Entries
/// are append-only and the visited set only grows.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    pub entries: Vec<MapEntry>,
    pub visited_regions: BTreeSet<RegionId>,
}

impl SemanticMap {
    pub fn has_class_in(&self, class: EntityClass, region: RegionId) -> bool {
        self.entries.iter().any(|e| e.class == class && e.region == region)
    }
}

/// Records every new (class, region) observation and marks the viewpoint's
/// region visited.
pub fn update_semantic_map(
    map: &mut SemanticMap,
    descriptors: &[TextDescriptor],
    viewpoint: &ViewPoint,
    frame: &RegionFrame,
    step: u64,
) {
    let solid: Vec<&TextDescriptor> =
        descriptors.iter().filter(|d| !d.subject_class.is_landscape()).collect();
    for desc in descriptors {
        let region = viewpoint.region_for_depth(frame, desc.direction, desc.subject_z);
        if map.has_class_in(desc.subject_class, region) {
            continue;
        }
        let relation = solid
            .iter()
            .find(|other| {
                other.subject_class != desc.subject_class
                    && viewpoint.region_for_depth(frame, other.direction, other.subject_z)
                        == region
            })
            .map(|other| {
                format!("{} near {}", desc.subject_class.name(), other.subject_class.name())
            });
        map.entries.push(MapEntry {
            class: desc.subject_class,
            position_estimate: viewpoint.position_for(desc.direction, desc.subject_z),
            region,
            relation,
            step_observed: step,
        });
    }
    map.visited_regions.insert(frame.region_of(viewpoint.position));
}

/// A scored candidate region with the evidence that produced the score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRegion {
    pub region: RegionId,
    pub score: f64,
    pub rationale: Vec<String>,
}

/// The selected directive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanHeuristic {
    pub directive: String,
    pub target_region: RegionId,
    pub score: f64,
    pub rationale: Vec<String>,
}

fn content_words(text: &str) -> BTreeSet<String> {
    const STOP: [&str; 18] = [
        "a", "an", "the", "on", "in", "of", "with", "is", "are", "to", "and", "usually",
        "often", "near", "at", "its", "it", "for",
    ];
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !STOP.contains(w))
        .map(|w| w.strip_suffix('s').unwrap_or(w).to_string())
        .collect()
}

/// Keyword overlap between a descriptor and a knowledge attribute: at least
/// two shared content words (after a crude plural strip).
fn knowledge_match(descriptor_text: &str, attribute: &str) -> bool {
    let a = content_words(descriptor_text);
    let b = content_words(attribute);
    a.intersection(&b).count() >= 2
}

/// Scores every candidate region for how likely it is to complete the
/// command, given the current descriptors, the semantic map, and the
/// knowledge base. Returns all regions in id order.
pub fn score_candidates(
    command: &MissionCommand,
    descriptors: &[TextDescriptor],
    map: &SemanticMap,
    kb: &KnowledgeBase,
    viewpoint: &ViewPoint,
    frame: &RegionFrame,
) -> Vec<ScoredRegion> {
    let located: Vec<(RegionId, &TextDescriptor)> = descriptors
        .iter()
        .map(|d| (viewpoint.region_for_depth(frame, d.direction, d.subject_z), d))
        .collect();

    let mut kb_classes: Vec<EntityClass> = vec![command.target_class];
    if let Some(ctx) = command.context_class {
        kb_classes.push(ctx);
    }

    RegionId::all()
        .map(|region| {
            let mut score = 0.0;
            let mut rationale = Vec::new();

            let target_here = located
                .iter()
                .any(|(r, d)| *r == region && d.subject_class == command.target_class);
            if target_here {
                let context_ok = match command.context_class {
                    None => true,
                    Some(ctx) => {
                        located.iter().any(|(r, d)| *r == region && d.subject_class == ctx)
                            || map.has_class_in(ctx, region)
                    }
                };
                if context_ok {
                    score += WEIGHT_OBSERVED;
                    rationale.push(format!(
                        "observed:{} in {}",
                        command.target_class.name(),
                        region
                    ));
                } else {
                    rationale.push(format!(
                        "observed:{} in {} but context {} absent",
                        command.target_class.name(),
                        region,
                        command.context_class.unwrap().name()
                    ));
                }
            }

            let mut kb_hit = None;
            'kb: for class in &kb_classes {
                for fact in kb.facts_for(class.name()) {
                    for (r, d) in &located {
                        if *r == region && knowledge_match(&d.text, &fact.attribute) {
                            kb_hit = Some(format!("kb:{} ~ {}", class.name(), fact.attribute));
                            break 'kb;
                        }
                    }
                }
            }
            if let Some(tag) = kb_hit {
                score += WEIGHT_KNOWLEDGE;
                rationale.push(tag);
            }

            let relation_class = command.context_class.unwrap_or(command.target_class);
            if let Some(entry) =
                map.entries.iter().find(|e| e.class == relation_class && e.region == region)
            {
                score += WEIGHT_MAP_RELATION;
                rationale.push(match &entry.relation {
                    Some(rel) => format!("map:{rel}"),
                    None => format!("map:{} seen at step {}", entry.class.name(), entry.step_observed),
                });
            }

            if map.visited_regions.contains(&region) {
                score -= VISITED_PENALTY;
                rationale.push(format!("visited:{region}"));
            }

            ScoredRegion { region, score: score.clamp(0.0, 1.0), rationale }
        })
        .collect()
}

/// Picks the argmax candidate; ties resolve to the lowest region id.
pub fn make_heuristic(scored: &[ScoredRegion]) -> Result<PlanHeuristic, SemanticError> {
    let best = scored
        .iter()
        .max_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.region.cmp(&a.region))
        })
        .ok_or(SemanticError::NoCandidates)?;
    let mut directive = format!("Search the {} area", best.region);
    if let Some(kb_tag) = best.rationale.iter().find(|r| r.starts_with("kb:")) {
        directive.push_str(&format!(" ({})", &kb_tag[3..]));
    }
    Ok(PlanHeuristic {
        directive,
        target_region: best.region,
        score: best.score,
        rationale: best.rationale.clone(),
    })
}

/// Structures the heuristic and mission progress into a symbolic task.
///
/// The goal is always `(reported target)`. The initial state mirrors the
/// detected/approached/reported progress flags; while the target is
/// undetected it also records that no navigation or sensing round has
/// happened yet.
pub fn structure_task(
    _heuristic: &PlanHeuristic,
    command: &MissionCommand,
    detected: bool,
    approached: bool,
    reported: bool,
) -> (SymbolicState, SymbolicState) {
    let target = command.target_class.name();
    let mut init = SymbolicState::new();
    let lit = |name: &str, positive: bool| Literal {
        atom: crate::symbolic::Atom::new(name, &[target]),
        positive,
    };
    init.insert(lit("detected", detected));
    init.insert(lit("approached", approached));
    init.insert(lit("reported", reported));
    if !detected {
        init.insert(Literal::neg("navigated", &["auv"]));
        init.insert(Literal::neg("env_sensed", &[]));
    }
    let goal = SymbolicState::from_literals([Literal::pos("reported", &[target])]);
    (init, goal)
}

/// Renders the oracle's evidence into a prompt for an external backend.
pub fn render_prompt(
    command: &MissionCommand,
    descriptors: &[TextDescriptor],
    map: &SemanticMap,
) -> String {
    let mut out = format!("command: {}\nobservations:\n", command.text);
    for d in descriptors {
        out.push_str(&format!("- {}\n", d.text));
    }
    out.push_str("memory:\n");
    for e in &map.entries {
        out.push_str(&format!(
            "- {} in {}{}\n",
            e.class.name(),
            e.region,
            e.relation.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
        ));
    }
    out.push_str("answer with `<region>|<directive>` where region is like sector3-shallow\n");
    out
}

/// Parses a backend response of the form `sector3-shallow|directive text`.
pub fn parse_backend_response(response: &str) -> Option<(RegionId, String)> {
    let (region_str, directive) = response.trim().split_once('|')?;
    let region = RegionId::parse(region_str.trim())?;
    let directive = directive.trim();
    if directive.is_empty() {
        return None;
    }
    Some((region, directive.to_string()))
}

/// Full heuristic proposal: oracle scoring plus the optional backend, which
/// can override the directive when it answers in time with well-formed
/// output. Backend failure of any kind falls back to the oracle.
pub fn propose_heuristic(
    command: &MissionCommand,
    descriptors: &[TextDescriptor],
    map: &SemanticMap,
    kb: &KnowledgeBase,
    viewpoint: &ViewPoint,
    frame: &RegionFrame,
    backend: Option<&dyn SemanticBackend>,
    timeout: Duration,
) -> Result<PlanHeuristic, SemanticError> {
    let scored = score_candidates(command, descriptors, map, kb, viewpoint, frame);
    let oracle = make_heuristic(&scored)?;
    if let Some(backend) = backend {
        let prompt = render_prompt(command, descriptors, map);
        if let Ok(response) = backend.query(&prompt, timeout) {
            if let Some((region, directive)) = parse_backend_response(&response) {
                let score =
                    scored.iter().find(|s| s.region == region).map(|s| s.score).unwrap_or(0.0);
                return Ok(PlanHeuristic {
                    directive,
                    target_region: region,
                    score,
                    rationale: vec!["backend".into()],
                });
            }
        }
    }
    Ok(oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::marine_knowledge;
    use crate::perception::Direction;

    fn descriptor(class: EntityClass, direction: Direction, text: &str) -> TextDescriptor {
        TextDescriptor {
            text: text.into(),
            subject_class: class,
            direction,
            confidence: 1.0,
            subject_z: None,
        }
    }

    fn viewpoint() -> ViewPoint {
        ViewPoint { position: [0.0, 0.0, -12.0], yaw: 0.0 }
    }

    fn frame() -> RegionFrame {
        RegionFrame::new([0.0, 0.0])
    }

    #[test]
    fn command_parsing_extracts_target_and_context() {
        let c = MissionCommand::parse("Search the aborted warship").unwrap();
        assert_eq!(c.target_class, EntityClass::Warship);
        assert_eq!(c.context_class, None);

        let c = MissionCommand::parse("Search the glider near coral reef").unwrap();
        assert_eq!(c.target_class, EntityClass::Glider);
        assert_eq!(c.context_class, Some(EntityClass::CoralReef));

        assert!(MissionCommand::parse("do something nice").is_err());
    }

    #[test]
    fn target_in_view_scores_half_front_region() {
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let ds = vec![descriptor(EntityClass::Warship, Direction::Front, "a warship on the front")];
        let scored = score_candidates(
            &command,
            &ds,
            &SemanticMap::default(),
            &KnowledgeBase::default(),
            &viewpoint(),
            &frame(),
        );
        let front = viewpoint().region_for(&frame(), Direction::Front);
        for s in &scored {
            if s.region == front {
                assert!((s.score - 0.5).abs() < 1e-12);
            } else {
                assert_eq!(s.score, 0.0, "region {} should be baseline", s.region);
            }
        }
    }

    #[test]
    fn sunlit_plain_outscores_dark_hill_for_coral_reef() {
        let command = MissionCommand::parse("Search the coral reef").unwrap();
        let ds = vec![
            descriptor(
                EntityClass::Plain,
                Direction::Left,
                "a plain on the left, bright with ample sunlight",
            ),
            descriptor(EntityClass::Hill, Direction::Right, "a rocky hill on the right, in dark water"),
        ];
        let scored = score_candidates(
            &command,
            &ds,
            &SemanticMap::default(),
            &marine_knowledge(),
            &viewpoint(),
            &frame(),
        );
        let left = viewpoint().region_for(&frame(), Direction::Left);
        let right = viewpoint().region_for(&frame(), Direction::Right);
        let get = |r: RegionId| scored.iter().find(|s| s.region == r).unwrap().score;
        assert!(get(left) > get(right), "left {} right {}", get(left), get(right));
    }

    #[test]
    fn visited_regions_score_at_or_below_baseline() {
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let mut map = SemanticMap::default();
        for r in RegionId::all() {
            map.visited_regions.insert(r);
        }
        let scored = score_candidates(
            &command,
            &[],
            &map,
            &KnowledgeBase::default(),
            &viewpoint(),
            &frame(),
        );
        assert!(scored.iter().all(|s| s.score == 0.0));
        let h = make_heuristic(&scored).unwrap();
        assert_eq!(h.target_region, RegionId(0), "ties break to the lowest region id");
    }

    #[test]
    fn argmax_picks_highest_and_breaks_ties_low() {
        let mk = |region: u8, score: f64| ScoredRegion {
            region: RegionId(region),
            score,
            rationale: vec![],
        };
        let h = make_heuristic(&[mk(0, 0.2), mk(2, 0.7), mk(5, 0.7)]).unwrap();
        assert_eq!(h.target_region, RegionId(2));
        assert!(make_heuristic(&[]).is_err());
    }

    #[test]
    fn argmax_is_invariant_under_positive_scaling() {
        let mk = |region: u8, score: f64| ScoredRegion {
            region: RegionId(region),
            score,
            rationale: vec![],
        };
        let raw = vec![mk(0, 0.1), mk(3, 0.4), mk(9, 0.25)];
        let scaled: Vec<ScoredRegion> = raw
            .iter()
            .map(|s| ScoredRegion { score: s.score * 1.7, ..s.clone() })
            .collect();
        assert_eq!(
            make_heuristic(&raw).unwrap().target_region,
            make_heuristic(&scaled).unwrap().target_region
        );
    }

    #[test]
    fn mismatched_context_steers_away_from_seen_target() {
        // A glider is visible to the right next to a warship, but the command
        // wants the glider near the coral reef; a sunlit shallow plain lies
        // to the left.
        let command = MissionCommand::parse("Search the glider near coral reef").unwrap();
        let mut plain = descriptor(
            EntityClass::Plain,
            Direction::Left,
            "a plain on the left, bright with ample sunlight",
        );
        plain.subject_z = Some(-3.0);
        let ds = vec![
            descriptor(EntityClass::Glider, Direction::Right, "a glider on the right"),
            descriptor(EntityClass::Warship, Direction::Right, "a warship on the right"),
            plain,
        ];
        let mut map = SemanticMap::default();
        update_semantic_map(&mut map, &ds, &viewpoint(), &frame(), 0);
        let scored =
            score_candidates(&command, &ds, &map, &marine_knowledge(), &viewpoint(), &frame());
        let h = make_heuristic(&scored).unwrap();
        let right = viewpoint().region_for(&frame(), Direction::Right);
        let left = viewpoint().region_for_depth(&frame(), Direction::Left, Some(-3.0));
        assert_ne!(h.target_region, right, "must not chase the wrong glider");
        assert_eq!(h.target_region, left, "the sunlit plain is the best lead");
    }

    #[test]
    fn map_updates_are_append_only_and_deduplicated() {
        let ds = vec![
            descriptor(EntityClass::Glider, Direction::Right, "a glider on the right"),
            descriptor(EntityClass::Warship, Direction::Right, "a warship on the right"),
        ];
        let mut map = SemanticMap::default();
        update_semantic_map(&mut map, &ds, &viewpoint(), &frame(), 0);
        let first = map.clone();
        assert_eq!(map.entries.len(), 2);
        assert!(map.entries[0].relation.as_deref() == Some("glider near warship"));
        // Revisiting adds nothing and never mutates existing entries.
        update_semantic_map(&mut map, &ds, &viewpoint(), &frame(), 5);
        assert_eq!(map.entries, first.entries);
        assert_eq!(map.visited_regions, first.visited_regions);
        // Empty descriptors only grow the visited set.
        let vp2 = ViewPoint { position: [30.0, 30.0, -12.0], yaw: 0.0 };
        update_semantic_map(&mut map, &[], &vp2, &frame(), 6);
        assert_eq!(map.entries, first.entries);
        assert!(map.visited_regions.len() > first.visited_regions.len());
    }

    #[test]
    fn visited_penalty_never_beats_equal_evidence() {
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        // Same observation in two regions, one of them already visited.
        let ds = vec![
            descriptor(EntityClass::Warship, Direction::Left, "a warship on the left"),
            descriptor(EntityClass::Warship, Direction::Right, "a warship on the right"),
        ];
        let left = viewpoint().region_for(&frame(), Direction::Left);
        let right = viewpoint().region_for(&frame(), Direction::Right);
        let mut map = SemanticMap::default();
        map.visited_regions.insert(left);
        let scored =
            score_candidates(&command, &ds, &map, &KnowledgeBase::default(), &viewpoint(), &frame());
        let get = |r: RegionId| scored.iter().find(|s| s.region == r).unwrap().score;
        assert!(get(right) > get(left));
    }

    #[test]
    fn structure_task_detected_round() {
        let h = PlanHeuristic {
            directive: "Directly survey the warship".into(),
            target_region: RegionId(0),
            score: 0.5,
            rationale: vec![],
        };
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let (init, goal) = structure_task(&h, &command, true, false, false);
        assert!(init.holds(&Literal::pos("detected", &["warship"])));
        assert!(init.holds(&Literal::neg("approached", &["warship"])));
        assert!(init.holds(&Literal::neg("reported", &["warship"])));
        assert_eq!(
            goal,
            SymbolicState::from_literals([Literal::pos("reported", &["warship"])])
        );
        // The detected round does not mention navigation literals.
        assert!(!init.literals().any(|l| l.atom.predicate == "navigated"));
    }

    #[test]
    fn structure_task_undetected_round_adds_navigation_literals() {
        let h = PlanHeuristic {
            directive: "explore".into(),
            target_region: RegionId(0),
            score: 0.0,
            rationale: vec![],
        };
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let (init, _) = structure_task(&h, &command, false, false, false);
        assert!(init.holds(&Literal::neg("detected", &["warship"])));
        assert!(init.holds(&Literal::neg("navigated", &["auv"])));
        assert!(init.holds(&Literal::neg("env_sensed", &[])));
    }

    #[test]
    fn structure_task_reported_already_satisfies_goal() {
        let h = PlanHeuristic {
            directive: "done".into(),
            target_region: RegionId(0),
            score: 0.0,
            rationale: vec![],
        };
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let (init, goal) = structure_task(&h, &command, true, true, true);
        assert!(init.entails(&goal));
    }

    struct CannedBackend(String);
    impl SemanticBackend for CannedBackend {
        fn query(&self, _prompt: &str, _timeout: Duration) -> Result<String, BackendError> {
            Ok(self.0.clone())
        }
    }

    struct DeadBackend;
    impl SemanticBackend for DeadBackend {
        fn query(&self, _prompt: &str, timeout: Duration) -> Result<String, BackendError> {
            Err(BackendError::Timeout(timeout))
        }
    }

    #[test]
    fn backend_paths() {
        let command = MissionCommand::parse("Search the aborted warship").unwrap();
        let kb = KnowledgeBase::default();
        let map = SemanticMap::default();
        let run = |backend: Option<&dyn SemanticBackend>| {
            propose_heuristic(
                &command,
                &[],
                &map,
                &kb,
                &viewpoint(),
                &frame(),
                backend,
                Duration::from_millis(10),
            )
            .unwrap()
        };
        // Disabled: oracle.
        let oracle = run(None);
        assert_eq!(oracle.target_region, RegionId(0));
        // Well-formed: adopted verbatim.
        let canned = CannedBackend("sector5-deep|Sweep the far ridge".into());
        let h = run(Some(&canned));
        assert_eq!(h.target_region, RegionId::new(5, true));
        assert_eq!(h.directive, "Sweep the far ridge");
        // Unparsable or dead: fall back, mission proceeds.
        let garbage = CannedBackend("i cannot help with that".into());
        assert_eq!(run(Some(&garbage)).target_region, oracle.target_region);
        assert_eq!(run(Some(&DeadBackend)).target_region, oracle.target_region);
    }
}
