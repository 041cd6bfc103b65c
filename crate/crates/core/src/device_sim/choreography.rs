//! Scripted fiducial choreography: a declarative list of place/move/lift
//! actions rendered into the frame stream a camera tracker would produce.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::tuio::{normalize_angle, FiducialState, SurfaceFrame};

use super::SimError;

/// Camera trackers commonly run near this rate; a default, not a contract.
pub const DEFAULT_FRAME_RATE_HZ: f64 = 30.0;

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE_HZ
}

/// One scripted manipulation of an object on the surface.
///
/// Sessions follow the TUIO convention: one id per physical placement,
/// never reused, so a script gets exactly one `place` and at most one
/// `lift` per session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    /// Object appears at a pose and stays until lifted.
    Place {
        t_ms: u64,
        session: i32,
        class: i32,
        x: f32,
        y: f32,
        angle: f32,
    },
    /// Linear glide from wherever the object is at `t_ms_start` to the
    /// target pose, arriving at `t_ms_end`; angle takes the shortest arc.
    MoveTo {
        t_ms_start: u64,
        t_ms_end: u64,
        session: i32,
        x: f32,
        y: f32,
        angle: f32,
    },
    /// Object leaves the surface.
    Lift { t_ms: u64, session: i32 },
}

/// A whole scripted scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoreographyScript {
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    pub actions: Vec<Action>,
}

/// Parse a script document. Unknown fields are errors — a typo in a show
/// file must fail at load, not silently change the performance.
pub fn load_script(document: &[u8]) -> Result<ChoreographyScript, SimError> {
    Ok(serde_json::from_slice(document)?)
}

/// Per-session plan assembled during validation.
struct SessionPlan {
    class: i32,
    placed_at: u64,
    place_pose: (f32, f32, f32),
    lifted_at: Option<u64>,
    /// (start, end, target pose), sorted by start.
    moves: Vec<(u64, u64, (f32, f32, f32))>,
}

fn check_position(x: f32, y: f32, what: &str) -> Result<(), SimError> {
    if !(x.is_finite() && y.is_finite() && (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
        return Err(SimError::ScriptInvalid(format!(
            "{what}: position ({x}, {y}) outside the unit square"
        )));
    }
    Ok(())
}

fn build_plans(script: &ChoreographyScript) -> Result<HashMap<i32, SessionPlan>, SimError> {
    if !(script.frame_rate_hz.is_finite() && script.frame_rate_hz > 0.0) {
        return Err(SimError::ScriptInvalid(format!(
            "frame rate {} must be positive",
            script.frame_rate_hz
        )));
    }
    let mut plans: HashMap<i32, SessionPlan> = HashMap::new();

    for action in &script.actions {
        if let Action::Place {
            t_ms,
            session,
            class,
            x,
            y,
            angle,
        } = *action
        {
            if session < 0 || class < 0 {
                return Err(SimError::ScriptInvalid(format!(
                    "place of session {session}: ids must be non-negative"
                )));
            }
            check_position(x, y, &format!("place of session {session}"))?;
            if !angle.is_finite() {
                return Err(SimError::ScriptInvalid(format!(
                    "place of session {session}: angle must be finite"
                )));
            }
            if plans.contains_key(&session) {
                return Err(SimError::ScriptInvalid(format!(
                    "session {session} placed twice; session ids are single-use"
                )));
            }
            plans.insert(
                session,
                SessionPlan {
                    class,
                    placed_at: t_ms,
                    place_pose: (x, y, normalize_angle(angle)),
                    lifted_at: None,
                    moves: Vec::new(),
                },
            );
        }
    }

    for action in &script.actions {
        match *action {
            Action::Place { .. } => {}
            Action::MoveTo {
                t_ms_start,
                t_ms_end,
                session,
                x,
                y,
                angle,
            } => {
                let plan = plans.get_mut(&session).ok_or_else(|| {
                    SimError::ScriptInvalid(format!("move of session {session} before any place"))
                })?;
                check_position(x, y, &format!("move of session {session}"))?;
                if !angle.is_finite() {
                    return Err(SimError::ScriptInvalid(format!(
                        "move of session {session}: angle must be finite"
                    )));
                }
                if t_ms_start >= t_ms_end {
                    return Err(SimError::ScriptInvalid(format!(
                        "move of session {session}: start {t_ms_start} must precede end {t_ms_end}"
                    )));
                }
                if t_ms_start < plan.placed_at {
                    return Err(SimError::ScriptInvalid(format!(
                        "move of session {session} starts before its place"
                    )));
                }
                plan.moves
                    .push((t_ms_start, t_ms_end, (x, y, normalize_angle(angle))));
            }
            Action::Lift { t_ms, session } => {
                let plan = plans.get_mut(&session).ok_or_else(|| {
                    SimError::ScriptInvalid(format!("lift of session {session} before any place"))
                })?;
                if plan.lifted_at.is_some() {
                    return Err(SimError::ScriptInvalid(format!(
                        "session {session} lifted twice"
                    )));
                }
                if t_ms <= plan.placed_at {
                    return Err(SimError::ScriptInvalid(format!(
                        "lift of session {session} must come after its place"
                    )));
                }
                plan.lifted_at = Some(t_ms);
            }
        }
    }

    for (session, plan) in &mut plans {
        plan.moves.sort_by_key(|&(start, _, _)| start);
        for pair in plan.moves.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(SimError::ScriptInvalid(format!(
                    "session {session}: moves starting at {} and {} overlap",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some(lifted) = plan.lifted_at {
            if plan.moves.last().is_some_and(|&(_, end, _)| end > lifted) {
                return Err(SimError::ScriptInvalid(format!(
                    "session {session}: move runs past its lift at {lifted} ms"
                )));
            }
        }
    }
    Ok(plans)
}

impl SessionPlan {
    fn alive_at(&self, t: u64) -> bool {
        t >= self.placed_at && self.lifted_at.is_none_or(|lift| t < lift)
    }

    /// Pose at time `t`, assuming `alive_at(t)`.
    fn pose_at(&self, t: u64) -> (f32, f32, f32) {
        let mut pose = self.place_pose;
        for &(start, end, target) in &self.moves {
            if t >= end {
                pose = target;
            } else if t >= start {
                let u = (t - start) as f32 / (end - start) as f32;
                let arc = shortest_arc(pose.2, target.2);
                pose = (
                    pose.0 + u * (target.0 - pose.0),
                    pose.1 + u * (target.1 - pose.1),
                    normalize_angle(pose.2 + u * arc),
                );
                break;
            } else {
                break;
            }
        }
        pose
    }
}

/// Signed angular distance from `from` to `to`, in (−π, π].
fn shortest_arc(from: f32, to: f32) -> f32 {
    use std::f32::consts::{PI, TAU};
    let raw = (to - from).rem_euclid(TAU);
    if raw > PI {
        raw - TAU
    } else {
        raw
    }
}

/// Render the script into one frame per tick.
///
/// Ticks land at `floor(i·1000/rate)` ms with fseq `i + 1`. `duration_ms`
/// defaults to one frame period past the last scripted action, so every
/// lift gets a frame that reports it gone. Set rows appear whenever a
/// session's state (pose or finite-difference kinematics) changed since
/// the previous frame; an unmoving object is carried by `alive` alone.
pub fn run_choreography(
    script: &ChoreographyScript,
    duration_ms: Option<u64>,
) -> Result<Vec<(u64, SurfaceFrame)>, SimError> {
    let plans = build_plans(script)?;
    let period_ms = (1000.0 / script.frame_rate_hz).ceil() as u64;
    let last_action = script
        .actions
        .iter()
        .map(|action| match *action {
            Action::Place { t_ms, .. } | Action::Lift { t_ms, .. } => t_ms,
            Action::MoveTo { t_ms_end, .. } => t_ms_end,
        })
        .max()
        .unwrap_or(0);
    let duration = duration_ms.unwrap_or(last_action + period_ms.max(1));

    let mut sessions: Vec<i32> = plans.keys().copied().collect();
    sessions.sort_unstable();

    let mut frames = Vec::new();
    let mut previous: HashMap<i32, FiducialState> = HashMap::new();
    let mut tick: u64 = 0;
    loop {
        let t = (tick as f64 * 1000.0 / script.frame_rate_hz).floor() as u64;
        if t >= duration {
            break;
        }
        let prev_t = if tick == 0 {
            None
        } else {
            Some(((tick - 1) as f64 * 1000.0 / script.frame_rate_hz).floor() as u64)
        };

        let mut alive = Vec::new();
        let mut states = Vec::new();
        for &session in &sessions {
            let plan = &plans[&session];
            if !plan.alive_at(t) {
                continue;
            }
            alive.push(session);
            let (x, y, angle) = plan.pose_at(t);
            let prior = previous.get(&session);
            let (vel_x, vel_y, vel_rot) = match (prior, prev_t) {
                (Some(prev), Some(pt)) if t > pt => {
                    let dt = (t - pt) as f32 / 1000.0;
                    (
                        (x - prev.x) / dt,
                        (y - prev.y) / dt,
                        shortest_arc(prev.angle, angle) / dt,
                    )
                }
                _ => (0.0, 0.0, 0.0),
            };
            let speed = (vel_x * vel_x + vel_y * vel_y).sqrt();
            let (accel_motion, accel_rot) = match (prior, prev_t) {
                (Some(prev), Some(pt)) if t > pt => {
                    let dt = (t - pt) as f32 / 1000.0;
                    let prev_speed = (prev.vel_x * prev.vel_x + prev.vel_y * prev.vel_y).sqrt();
                    ((speed - prev_speed) / dt, (vel_rot - prev.vel_rot) / dt)
                }
                _ => (0.0, 0.0),
            };
            let state = FiducialState {
                session_id: session,
                class_id: plan.class,
                x,
                y,
                angle,
                vel_x,
                vel_y,
                vel_rot,
                accel_motion,
                accel_rot,
            };
            if prior != Some(&state) {
                states.push(state);
            }
            previous.insert(session, state);
        }
        previous.retain(|session, _| alive.contains(session));

        frames.push((
            t,
            SurfaceFrame {
                fseq: (tick + 1) as i32,
                alive,
                states,
            },
        ));
        tick += 1;
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn place(t_ms: u64, session: i32, class: i32, x: f32, y: f32) -> Action {
        Action::Place {
            t_ms,
            session,
            class,
            x,
            y,
            angle: 0.0,
        }
    }

    fn script(actions: Vec<Action>) -> ChoreographyScript {
        ChoreographyScript {
            frame_rate_hz: 30.0,
            actions,
        }
    }

    #[test]
    fn empty_script_renders_empty_frames() {
        let frames = run_choreography(&script(vec![]), Some(100)).unwrap();
        assert_eq!(frames.len(), 3);
        for (i, (t, frame)) in frames.iter().enumerate() {
            assert_eq!(*t, (i as f64 * 1000.0 / 30.0).floor() as u64);
            assert_eq!(frame.fseq, i as i32 + 1);
            assert!(frame.alive.is_empty());
            assert!(frame.states.is_empty());
        }
    }

    #[test]
    fn place_then_lift_matches_tick_arithmetic() {
        let frames = run_choreography(
            &script(vec![
                place(0, 1, 4, 0.2, 0.2),
                Action::Lift {
                    t_ms: 100,
                    session: 1,
                },
            ]),
            Some(150),
        )
        .unwrap();
        let alive_times: Vec<u64> = frames
            .iter()
            .filter(|(_, f)| f.alive.contains(&1))
            .map(|(t, _)| *t)
            .collect();
        // Ticks at 0, 33, 66 precede the lift; 100 and 133 do not.
        assert_eq!(alive_times, vec![0, 33, 66]);
        assert_eq!(frames.len(), 5);
    }

    #[test]
    fn move_interpolates_linearly() {
        let frames = run_choreography(
            &script(vec![
                place(0, 1, 4, 0.0, 0.5),
                Action::MoveTo {
                    t_ms_start: 0,
                    t_ms_end: 1000,
                    session: 1,
                    x: 1.0,
                    y: 0.5,
                    angle: 0.0,
                },
            ]),
            Some(1100),
        )
        .unwrap();
        // Tick nearest the midpoint: t = 500 exactly at 30 Hz? Ticks land
        // at 466 and 500 (floor of 15·33.3·...); find the one at 500.
        let (t, frame) = frames
            .iter()
            .find(|(t, _)| *t == 500)
            .expect("a tick lands on 500 ms");
        let state = frame.states.iter().find(|s| s.session_id == 1).unwrap();
        let half_tick = 1000.0 / 30.0 / 2.0 / 1000.0; // as x-fraction per ms span
        assert!(
            (state.x - 0.5).abs() <= half_tick as f32,
            "x at t={t} was {}",
            state.x
        );
        // After the move, the object parks at the target with zero velocity.
        let last = frames.last().unwrap().1.alive.contains(&1);
        assert!(last);
    }

    #[test]
    fn angle_takes_the_shortest_arc() {
        use std::f32::consts::TAU;
        // 350° → 10°: the short way crosses zero, never sweeping near π.
        let frames = run_choreography(
            &script(vec![
                Action::Place {
                    t_ms: 0,
                    session: 1,
                    class: 4,
                    x: 0.5,
                    y: 0.5,
                    angle: 350.0 * TAU / 360.0,
                },
                Action::MoveTo {
                    t_ms_start: 0,
                    t_ms_end: 1000,
                    session: 1,
                    x: 0.5,
                    y: 0.5,
                    angle: 10.0 * TAU / 360.0,
                },
            ]),
            Some(1001),
        )
        .unwrap();
        for (_, frame) in &frames {
            if let Some(state) = frame.states.iter().find(|s| s.session_id == 1) {
                let degrees = state.angle * 360.0 / TAU;
                assert!(
                    degrees >= 349.0 || degrees <= 11.0,
                    "angle swept the long way: {degrees}°"
                );
            }
        }
    }

    #[test]
    fn stationary_object_emits_no_redundant_set_rows() {
        let frames = run_choreography(&script(vec![place(0, 1, 4, 0.2, 0.2)]), Some(200)).unwrap();
        let with_rows: Vec<&u64> = frames
            .iter()
            .filter(|(_, f)| !f.states.is_empty())
            .map(|(t, _)| t)
            .collect();
        assert_eq!(
            with_rows,
            vec![&0],
            "only the placement frame carries a set row"
        );
        for (_, frame) in &frames {
            assert_eq!(frame.alive, vec![1]);
        }
    }

    #[test]
    fn rejects_session_reuse_and_orphan_actions() {
        let reuse = script(vec![
            place(0, 1, 4, 0.2, 0.2),
            Action::Lift {
                t_ms: 100,
                session: 1,
            },
            place(200, 1, 4, 0.2, 0.2),
        ]);
        assert!(matches!(
            run_choreography(&reuse, None),
            Err(SimError::ScriptInvalid(_))
        ));
        let orphan = script(vec![Action::Lift {
            t_ms: 100,
            session: 1,
        }]);
        assert!(matches!(
            run_choreography(&orphan, None),
            Err(SimError::ScriptInvalid(_))
        ));
    }

    #[test]
    fn rejects_overlapping_moves() {
        let overlapping = script(vec![
            place(0, 1, 4, 0.0, 0.0),
            Action::MoveTo {
                t_ms_start: 0,
                t_ms_end: 1000,
                session: 1,
                x: 1.0,
                y: 0.0,
                angle: 0.0,
            },
            Action::MoveTo {
                t_ms_start: 500,
                t_ms_end: 1500,
                session: 1,
                x: 0.0,
                y: 1.0,
                angle: 0.0,
            },
        ]);
        assert!(matches!(
            run_choreography(&overlapping, None),
            Err(SimError::ScriptInvalid(_))
        ));
    }

    #[test]
    fn rejects_out_of_square_position() {
        let bad = script(vec![place(0, 1, 4, 1.2, 0.2)]);
        assert!(matches!(
            run_choreography(&bad, None),
            Err(SimError::ScriptInvalid(_))
        ));
    }

    #[test]
    fn script_json_round_trips_and_rejects_unknown_fields() {
        let doc = br#"{
            "frame_rate_hz": 30,
            "actions": [
                {"kind": "place", "t_ms": 0, "session": 1, "class": 4,
                 "x": 0.2, "y": 0.2, "angle": 0.0},
                {"kind": "lift", "t_ms": 500, "session": 1}
            ]
        }"#;
        let script = load_script(doc).unwrap();
        assert_eq!(script.actions.len(), 2);

        let typo = br#"{"actions": [{"kind": "place", "t_ms": 0, "session": 1,
            "class": 4, "x": 0.2, "y": 0.2, "angle": 0.0, "clas": 9}]}"#;
        assert!(matches!(load_script(typo), Err(SimError::BadDocument(_))));
    }
}
