//! Action-sequence synthesis: shortest plans over the pose graph.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{BackendKind, SynthesisArtifact, SynthesisBackend, SynthesisError, SynthesisRequest};
use crate::kernel::{intended_pose, Cell, GridMap, KernelAction};
use crate::modality::Modality;
use crate::pose::Pose;

pub const BACKEND_ID: &str = "bfs-planner";
pub const REACH_GOAL: &str = "reach_goal";

fn pose_index(map: &GridMap, p: Pose) -> usize {
    (p.y as usize * map.width() + p.x as usize) * 4 + p.heading.index()
}

/// Breadth-first search over (x, y, heading) using the six kernel actions
/// under slip-free dynamics. Returns a shortest sequence ending on a goal
/// cell, `None` if no goal is reachable. Ties resolve by action id order.
pub fn plan_to_goal(map: &GridMap, start: Pose) -> Option<Vec<KernelAction>> {
    let start = Pose::new(start.x, start.y, start.heading);
    if map.blocked(start.x, start.y) {
        return None;
    }
    if map.cell(start.x, start.y) == Some(Cell::Goal) {
        return Some(Vec::new());
    }
    let mut parent: Vec<Option<(usize, KernelAction)>> = vec![None; map.width() * map.height() * 4];
    let mut seen = vec![false; parent.len()];
    let mut poses = vec![start; parent.len()];
    let s = pose_index(map, start);
    seen[s] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(p) = queue.pop_front() {
        let pi = pose_index(map, p);
        for a in KernelAction::ALL {
            let q = intended_pose(map, p, a);
            let qi = pose_index(map, q);
            if seen[qi] {
                continue;
            }
            seen[qi] = true;
            parent[qi] = Some((pi, a));
            poses[qi] = q;
            if map.cell(q.x, q.y) == Some(Cell::Goal) {
                let mut plan = Vec::new();
                let mut cur = qi;
                while let Some((prev, act)) = parent[cur] {
                    plan.push(act);
                    cur = prev;
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(q);
        }
    }
    None
}

/// Pose reached by executing `plan` slip-free from `start`.
pub fn execute_plan(map: &GridMap, start: Pose, plan: &[KernelAction]) -> Pose {
    plan.iter().fold(start, |p, &a| intended_pose(map, p, a))
}

pub fn plan_tokens(plan: &[KernelAction]) -> String {
    plan.iter().map(|a| a.token()).collect::<Vec<_>>().join(",")
}

/// Vision-language-action stand-in: turns the textual goal `reach_goal` and
/// the current state into an executable token sequence.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlannerPolicy;

impl SynthesisBackend for PlannerPolicy {
    fn id(&self) -> &str {
        BACKEND_ID
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Action
    }

    fn predict(&self, req: &SynthesisRequest<'_>) -> Result<SynthesisArtifact, SynthesisError> {
        let goal = req.input.text.as_deref().unwrap_or(REACH_GOAL).trim();
        if goal != REACH_GOAL {
            return Err(SynthesisError::UnsupportedGoal(goal.into()));
        }
        let map = req.kernel.map();
        let plan = plan_to_goal(map, req.state.pose).ok_or(SynthesisError::GoalUnreachable)?;
        let end = execute_plan(map, req.state.pose, &plan);
        let mut art = SynthesisArtifact::default();
        art.metadata.insert("backend".into(), BACKEND_ID.into());
        req.controls.echo(&mut art.metadata);
        art.metadata.insert("plan_length".into(), plan.len().to_string());
        art.metadata.insert(
            "expected_pose".into(),
            format!("{},{},{}", end.x, end.y, end.heading),
        );
        art.payloads.push((Modality::Action, plan_tokens(&plan).into_bytes()));
        Ok(art)
    }
}

/// Heading-free grid distance; equals the plan length because strafing
/// reaches every 4-neighbour in one action.
pub fn grid_distance_to_goal(map: &GridMap, from: (i32, i32)) -> Option<u32> {
    let d = map.cell_distances(from);
    map.goals()
        .filter_map(|(x, y)| d[y as usize * map.width() + x as usize])
        .min()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::mapgen::random_map;
    use crate::kernel::{KernelConfig, WorldKernel};
    use crate::pose::Heading;

    #[test]
    fn demo_plan() {
        let map = GridMap::demo();
        let plan = plan_to_goal(&map, Pose::new(1, 1, Heading::E)).unwrap();
        assert_eq!(plan.len(), 4);
        let end = execute_plan(&map, Pose::new(1, 1, Heading::E), &plan);
        assert_eq!((end.x, end.y), (3, 3));
        assert_eq!(plan_to_goal(&map, Pose::new(3, 3, Heading::N)), Some(Vec::new()));
    }

    #[test]
    fn walled_off_goal_unreachable() {
        // Valid map (goal reachable from start), then the goal gets sealed.
        let open = GridMap::parse("#######\n#S.#..#\n#..#G.#\n#.....#\n#######").unwrap();
        let sealed = open.with_cell(2, 3, Cell::Wall).with_cell(1, 3, Cell::Wall).with_cell(3, 3, Cell::Wall);
        assert_eq!(plan_to_goal(&sealed, Pose::new(1, 1, Heading::E)), None);
        let k = WorldKernel::new(sealed, KernelConfig::deterministic()).unwrap();
        let input = crate::operator::NormalizedInput::default();
        let s = k.initial_state();
        let r = PlannerPolicy.predict(&SynthesisRequest {
            input: &input,
            actions: &[],
            state: &s,
            kernel: &k,
            controls: Default::default(),
        });
        assert_eq!(r.err(), Some(SynthesisError::GoalUnreachable));
    }

    /// Iterative deepening over raw action sequences: the independent
    /// optimality oracle for short plans.
    fn shortest_by_enumeration(map: &GridMap, start: Pose, limit: usize) -> Option<usize> {
        fn dfs(map: &GridMap, p: Pose, depth: usize) -> bool {
            if map.cell(p.x, p.y) == Some(Cell::Goal) {
                return true;
            }
            depth > 0 && KernelAction::ALL.iter().any(|&a| dfs(map, intended_pose(map, p, a), depth - 1))
        }
        (0..=limit).find(|&d| dfs(map, start, d))
    }

    #[test]
    fn plans_are_optimal_on_random_maps() {
        for seed in 0..20 {
            let map = random_map(seed, 6, 6, 0.3);
            let (sx, sy) = map.start();
            let start = Pose::new(sx, sy, Heading::E);
            let plan = plan_to_goal(&map, start).unwrap();
            let end = execute_plan(&map, start, &plan);
            assert_eq!(map.cell(end.x, end.y), Some(Cell::Goal));
            assert_eq!(Some(plan.len() as u32), grid_distance_to_goal(&map, (sx, sy)));
            if plan.len() <= 6 {
                assert_eq!(shortest_by_enumeration(&map, start, plan.len()), Some(plan.len()));
            }
        }
    }
}
