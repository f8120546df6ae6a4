//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every check compares against an oracle computed here, not
//! against the code under test.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tower::ServiceExt;

use worldkit::log::replay;
use worldkit::service::{router, AppState};
use worldkit_core::kernel::{Cell, WorldKernel};
use worldkit_core::kernel::mapgen::random_map;
use worldkit_core::pipeline::expand_shorthand;
use worldkit_core::memory::{featurize, ContextQuery, MemoryConfig, MemoryStore, FEATURE_DIM};
use worldkit_core::reasoning::ReasoningKind;
use worldkit_core::representation::{DepthCamera, Occupancy, OccupancyGrid};
use worldkit_core::synthesis::action::plan_to_goal;
use worldkit_core::synthesis::audio::decode_waveform;
use worldkit_core::{
    encode_frame, GridMap, Heading, KernelAction, KernelConfig, Modality, ObservationFrame, Pipeline, PipelineConfig,
    SessionId, Task, TurnInput, WorldState,
};

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Option<u64>, Box<dyn FnOnce() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn non_terminal_states(map: &GridMap) -> Vec<WorldState> {
    let mut out = Vec::new();
    for y in 0..map.height() as i32 {
        for x in 0..map.width() as i32 {
            if map.cell(x, y) == Some(Cell::Free) {
                out.extend(Heading::ALL.iter().map(|&h| WorldState::at(x, y, h)));
            }
        }
    }
    out
}

fn transition_normalization() -> Outcome {
    let mut checked = 0usize;
    for seed in 0..10u64 {
        let (w, h) = (5 + (seed % 5) as usize, 5 + ((seed * 3) % 5) as usize);
        let map = random_map(seed, w, h, 0.25);
        let k = WorldKernel::new(map.clone(), KernelConfig::default()).map_err(|e| e.to_string())?;
        for s in non_terminal_states(&map) {
            for a in 0..KernelAction::ALL.len() {
                let d = k.transition_distribution(&s, a).map_err(|e| e.to_string())?;
                let sum: f64 = d.outcomes.iter().map(|(_, p)| p).sum();
                ensure((sum - 1.0).abs() <= 1e-12, || format!("map {seed} {s:?} a{a}: sum {sum}"))?;
                for (n, p) in &d.outcomes {
                    ensure(*p > 0.0, || format!("map {seed}: nonpositive mass {p}"))?;
                    ensure(!map.blocked(n.pose.x, n.pose.y), || format!("map {seed}: successor in wall {n:?}"))?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (state, action) pairs"))
}

fn slip_goodness_of_fit() -> Outcome {
    let critical = ChiSquared::new(1.0).map_err(|e| e.to_string())?.inverse_cdf(0.999);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut pairs = Vec::new();
    let mut seed = 100u64;
    while pairs.len() < 20 {
        let map = random_map(seed, 7, 7, 0.2);
        seed += 1;
        let k = WorldKernel::new(map.clone(), KernelConfig::default()).map_err(|e| e.to_string())?;
        let states = non_terminal_states(&map);
        let s = states[rng.gen_range(0..states.len())];
        let a = rng.gen_range(0..4usize);
        let d = k.transition_distribution(&s, a).map_err(|e| e.to_string())?;
        if d.outcomes.len() == 2 {
            pairs.push((k, s, a, d));
        }
    }
    let n = 10_000usize;
    let mut worst: f64 = 0.0;
    for (i, (k, s, a, d)) in pairs.iter().enumerate() {
        let mut draw_rng = ChaCha8Rng::seed_from_u64(7_000 + i as u64);
        let mut counts = [0usize; 2];
        for _ in 0..n {
            let next = k.sample_transition(s, *a, &mut draw_rng).map_err(|e| e.to_string())?;
            let slot = d
                .outcomes
                .iter()
                .position(|(o, _)| *o == next)
                .ok_or_else(|| format!("pair {i}: draw outside support"))?;
            counts[slot] += 1;
        }
        let stat: f64 = d
            .outcomes
            .iter()
            .zip(counts)
            .map(|((_, p), c)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        worst = worst.max(stat);
        ensure(stat < critical, || format!("pair {i}: chi2 {stat:.3} >= {critical:.3}"))?;
    }
    Ok(format!("20 pairs x {n} draws, max chi2 {worst:.3} < {critical:.3}"))
}

fn worldkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_worldkit"))
}

fn replay_and_tamper() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("session.jsonl");
    // Oscillates between (1,1) and (2,1) on the demo map; slips only keep it
    // there, so the session never goes terminal.
    let script = vec!["F,B,TL,TR"; 25].join(",");
    let t0 = Instant::now();
    let run = worldkit()
        .args(["run", "--task", "navigate", "--actions", &script, "--seed", "11", "--out"])
        .arg(&log)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(run.status.success(), || format!("run failed: {}", String::from_utf8_lossy(&run.stderr)))?;
    let text = std::fs::read_to_string(&log).map_err(|e| e.to_string())?;
    let turns = text.lines().filter(|l| l.contains("\"kind\":\"turn\"")).count();
    ensure(turns == 100, || format!("{turns} turns logged"))?;
    let ok = worldkit().args(["replay", "--log"]).arg(&log).output().map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure(ok.status.code() == Some(0), || format!("clean replay exit {:?}", ok.status.code()))?;
    ensure(elapsed < Duration::from_secs(5), || format!("run + replay took {elapsed:?}"))?;

    let bytes = text.as_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mutate = |rng: &mut ChaCha8Rng| {
        let mut m = bytes.to_vec();
        let i = rng.gen_range(0..m.len());
        let mut b: u8 = rng.gen();
        while b == m[i] {
            b = rng.gen();
        }
        m[i] = b;
        m
    };
    for k in 0..3 {
        let bad = dir.path().join(format!("bad{k}.jsonl"));
        std::fs::write(&bad, mutate(&mut rng)).map_err(|e| e.to_string())?;
        let out = worldkit().args(["replay", "--log"]).arg(&bad).output().map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(1), || format!("mutated log {k} exit {:?}", out.status.code()))?;
    }
    let sampled = 200;
    for k in 0..sampled {
        let m = mutate(&mut rng);
        let accepted = String::from_utf8(m).ok().is_some_and(|t| replay(&t).is_ok());
        ensure(!accepted, || format!("in-process mutation {k} replayed cleanly"))?;
    }
    Ok(format!("100 turns in {:.2}s, 3 binary + {sampled} in-process mutations rejected", elapsed.as_secs_f64()))
}

fn revisit_consistency() -> Outcome {
    let map = random_map(5, 8, 8, 0.2);
    let k = WorldKernel::new(map, KernelConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut seen: HashMap<(i32, i32, Heading), ObservationFrame> = HashMap::new();
    let mut state = k.initial_state();
    let mut revisits = 0;
    for _ in 0..200 {
        state = if state.terminal {
            k.initial_state()
        } else {
            k.sample_transition(&state, rng.gen_range(0..6), &mut rng).map_err(|e| e.to_string())?
        };
        let frame = k.observe(&state);
        let key = (state.pose.x, state.pose.y, state.pose.heading);
        if let Some(prev) = seen.get(&key) {
            revisits += 1;
            ensure(*prev == frame, || format!("frames differ at {key:?}"))?;
        } else {
            seen.insert(key, frame);
        }
    }
    ensure(revisits > 0, || "walk never revisited a pose".into())?;
    Ok(format!("{revisits} revisits over {} poses", seen.len()))
}

fn reconstruction() -> Outcome {
    let map = GridMap::demo();
    let expected = map.to_text().chars().filter(|&c| c == '#').count();
    let mut p = Pipeline::build(PipelineConfig::new(Task::Navigate, 3).with_kernel(KernelConfig::deterministic()))
        .map_err(|e| e.to_string())?;
    for walk in ["F,F,B,B", "TR,F,F", "TL,F,F"] {
        let tokens: Vec<&str> = walk.split(',').filter_map(expand_shorthand).collect();
        p.call_once(&TurnInput::actions(&tokens)).map_err(|e| e.message)?;
    }
    let grid = p.grid();
    for y in 0..map.height() as i32 {
        for x in 0..map.width() as i32 {
            let truth = map.cell(x, y).expect("in bounds");
            let want = Occupancy::from(truth);
            let got = grid.get(x, y);
            ensure(got == want, || format!("cell ({x},{y}): {got:?} vs {want:?}"))?;
        }
    }
    let points = grid.export_points().points.len();
    ensure(points == expected, || format!("{points} points, {expected} walls"))?;
    Ok(format!("{} cells exact, {points} points", map.width() * map.height()))
}

/// Marches at 1e-4 until the sample lands in a wall, then bisects.
fn marched_depth(map: &GridMap, ox: f64, oy: f64, yaw: f64) -> f64 {
    let th = yaw.to_radians();
    let (dx, dy) = (th.sin(), -th.cos());
    let wall = |t: f64| {
        let (x, y) = ((ox + t * dx).floor() as i32, (oy + t * dy).floor() as i32);
        map.blocked(x, y)
    };
    let step = 1e-4;
    let mut t = 0.0;
    while !wall(t) {
        t += step;
    }
    let (mut lo, mut hi) = (t - step, t);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if wall(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn depth_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..1000u64 {
        let map = random_map(300 + i % 10, 6 + (i % 4) as usize, 6 + (i % 3) as usize, 0.2);
        let grid = OccupancyGrid::from_map(&map);
        let free = non_terminal_states(&map);
        let s = free[rng.gen_range(0..free.len())];
        let (x, y) = (s.pose.x as f64 + rng.gen::<f64>(), s.pose.y as f64 + rng.gen::<f64>());
        let yaw = rng.gen_range(0.0..360.0);
        let d = grid.render_depth(DepthCamera { x, y, yaw }, 1, 1.0).map_err(|e| e.to_string())?;
        let oracle = marched_depth(&map, x, y, yaw);
        let err = (d.depths[0] - oracle).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("ray {i} at ({x:.4},{y:.4}) yaw {yaw:.4}: {} vs {oracle}", d.depths[0]))?;
    }
    Ok(format!("1000 rays, max error {worst:.2e}"))
}

fn unit_cos(a: &[f64; FEATURE_DIM], b: &[f64; FEATURE_DIM]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn memory_oracle() -> Outcome {
    let config = MemoryConfig {
        capacity: 256,
        ..MemoryConfig::default()
    };
    let mut store = MemoryStore::new(config).map_err(|e| e.to_string())?;
    let sid = SessionId::from_existing("acceptance");
    store.open_session(sid.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let palette = [0u8, 85, 170, 255];
    let pool: Vec<Vec<u8>> = (0..40)
        .map(|_| {
            let px = (0..25).map(|_| palette[rng.gen_range(0..4)]).collect();
            encode_frame(&ObservationFrame::new(5, 5, px).expect("5x5"))
        })
        .collect();
    let words = ["north", "wall", "goal", "corridor", "turn", "left", "right", "ahead"];
    for _ in 0..1000 {
        if rng.gen_bool(0.6) {
            let frame = &pool[rng.gen_range(0..pool.len())];
            store.record(&sid, (Modality::Image, frame), BTreeMap::new()).map_err(|e| e.to_string())?;
        } else {
            let text: Vec<&str> = (0..3).map(|_| words[rng.gen_range(0..words.len())]).collect();
            store
                .record(&sid, (Modality::Text, text.join(" ").as_bytes()), BTreeMap::new())
                .map_err(|e| e.to_string())?;
        }
    }

    let k = 8;
    for q in 0..100 {
        let feature = if q % 2 == 0 {
            featurize(Modality::Image, &pool[rng.gen_range(0..pool.len())])
        } else {
            let mut f = [0.0; FEATURE_DIM];
            f.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            f
        };
        let now_step = 1000 + rng.gen_range(0..50);
        let query = ContextQuery { feature, now_step };
        let records = store.session(&sid).expect("open").records();
        let mut brute: Vec<(f64, u64, &str)> = records
            .iter()
            .map(|r| {
                let age = (now_step - r.step) as f64;
                let s = 0.7 * unit_cos(&feature, &r.feature) + 0.3 * (-0.05 * age).exp();
                (s, r.step, r.id.as_str())
            })
            .collect();
        brute.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        let got = store.select(&sid, &query, k).map_err(|e| e.to_string())?;
        ensure(got.len() == k, || format!("query {q}: {} results", got.len()))?;
        let kth = brute[k - 1].0;
        for (i, s) in got.iter().enumerate() {
            ensure((s.score - brute[i].0).abs() <= 1e-12, || {
                format!("query {q} rank {i}: {} vs {}", s.score, brute[i].0)
            })?;
            let own = brute.iter().find(|b| b.2 == s.record.id).expect("present").0;
            ensure(own >= kth - 1e-12, || format!("query {q}: {} not in brute-force top {k}", s.record.id))?;
        }
    }

    let before = store.session(&sid).expect("open").total_weight();
    let ids: Vec<String> = store.session(&sid).expect("open").records().iter().map(|r| r.id.clone()).collect();
    let report = store.compress(&sid, &ids).map_err(|e| e.to_string())?;
    let mem = store.session(&sid).expect("open");
    ensure(mem.total_weight() == before, || format!("weight {} -> {}", before, mem.total_weight()))?;
    ensure(!report.merged.is_empty(), || "nothing merged".into())?;
    let after_compress = mem.len();

    // Recording past capacity again so manage has work to do.
    for i in 0..400 {
        store
            .record(&sid, (Modality::Text, format!("filler {i}").as_bytes()), BTreeMap::new())
            .map_err(|e| e.to_string())?;
    }
    store.manage(&sid).map_err(|e| e.to_string())?;
    let size = store.session(&sid).expect("open").len();
    ensure(size <= config.capacity, || format!("{size} records after manage"))?;
    Ok(format!(
        "100 queries exact; compress 1000 -> {after_compress} keeping weight {before}; manage -> {size}"
    ))
}

/// Breadth-first search over the exact deterministic transition model.
fn optimal_length(k: &WorldKernel, start: WorldState) -> Option<usize> {
    let key = |s: &WorldState| (s.pose.x, s.pose.y, s.pose.heading);
    let mut dist = HashMap::from([(key(&start), 0usize)]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&key(&s)];
        if s.terminal {
            return Some(d);
        }
        for a in 0..KernelAction::ALL.len() {
            for (n, _) in k.transition_distribution(&s, a).ok()?.outcomes {
                let n = WorldState { step: 0, ..n };
                if let std::collections::hash_map::Entry::Vacant(slot) = dist.entry(key(&n)) {
                    slot.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

fn planner_optimality() -> Outcome {
    let mut plans = 0;
    let mut longest = 0;
    for seed in 0..20u64 {
        let map = random_map(500 + seed, 5 + (seed % 3) as usize, 5 + ((seed / 3) % 3) as usize, 0.25);
        let k = WorldKernel::new(map.clone(), KernelConfig::deterministic()).map_err(|e| e.to_string())?;
        for s0 in non_terminal_states(&map) {
            let h = s0.pose.heading;
            let Some(plan) = plan_to_goal(&map, s0.pose) else {
                ensure(optimal_length(&k, s0).is_none(), || format!("map {seed} {s0:?}: reachable but no plan"))?;
                continue;
            };
            let best = optimal_length(&k, s0).ok_or_else(|| format!("map {seed} {s0:?}: oracle found no path"))?;
            ensure(plan.len() == best, || format!("map {seed} {h:?}: plan {} vs optimum {best}", plan.len()))?;
            let ids: Vec<usize> = plan.iter().map(|a| a.id()).collect();
            let traj = k.rollout(&s0, &ids, 0).map_err(|e| e.to_string())?;
            ensure(traj.len() == plan.len() && traj.final_state().is_some_and(|s| s.terminal), || {
                format!("map {seed} {s0:?}: plan does not end on the goal")
            })?;
            plans += 1;
            longest = longest.max(best);
        }
    }
    Ok(format!("{plans} plans optimal, longest {longest}"))
}

fn loop_closures() -> Outcome {
    let durations = [0.05, 0.1, 0.25, 0.5, 1.0];
    for d in durations {
        for event in ["step", "goal"] {
            let mut son = Pipeline::build(PipelineConfig::new(Task::Sonify, 2)).map_err(|e| e.to_string())?;
            let mut input = TurnInput::text(event);
            input.controls.insert("duration_s".into(), d);
            let env = son.call_once(&input).map_err(|e| e.message)?;
            let wave = decode_waveform(&env.artifacts[0].payload).map_err(|e| e.to_string())?;
            let mut rsn = Pipeline::build(PipelineConfig::new(Task::Reason, 2)).map_err(|e| e.to_string())?;
            let mut q = TurnInput::query(ReasoningKind::Audio, "event?");
            q.audio = Some(wave);
            let ans = rsn.call_once(&q).map_err(|e| e.message)?;
            ensure(ans.meta("answer.event") == Some(event), || {
                format!("{event} at {d}s heard as {:?}", ans.meta("answer.event"))
            })?;
        }
    }

    let mut act = Pipeline::build(PipelineConfig::new(Task::Act, 1)).map_err(|e| e.to_string())?;
    let env = act.call_once(&TurnInput::text("reach_goal")).map_err(|e| e.message)?;
    let plan = String::from_utf8(env.artifacts[0].payload.clone()).map_err(|e| e.to_string())?;
    let tokens: Vec<&str> = plan.split(',').collect();
    let mut nav = Pipeline::build(PipelineConfig::new(Task::Navigate, 1).with_kernel(KernelConfig::deterministic()))
        .map_err(|e| e.to_string())?;
    let env = nav.call_once(&TurnInput::actions(&tokens)).map_err(|e| e.message)?;
    let kc = KernelConfig::default();
    let expected = kc.goal_reward + kc.step_cost * (tokens.len() as f64 - 1.0);
    ensure(env.terminal, || "plan did not reach the goal".into())?;
    ensure((nav.cumulative_reward() - expected).abs() <= 1e-12, || {
        format!("reward {} vs {expected}", nav.cumulative_reward())
    })?;
    ensure(env.meta("cumulative_reward") == Some(format!("{expected:.6}").as_str()), || {
        format!("metadata {:?}", env.meta("cumulative_reward"))
    })?;
    Ok(format!("audio at {} durations; plan of {} reaches goal with {expected:.6}", durations.len(), tokens.len()))
}

fn memory_growth() -> Outcome {
    let mut p = Pipeline::build(PipelineConfig::new(Task::Navigate, 4)).map_err(|e| e.to_string())?;
    let cycle = ["move_forward", "move_backward", "turn_left", "turn_right"];
    for t in 0..25 {
        p.call_once(&TurnInput::actions(&[cycle[t % 4]])).map_err(|e| e.message)?;
    }
    let n = p.memory().session(p.session_id()).map_or(0, |m| m.len());
    ensure(n == 50, || format!("{n} records after 25 turns"))?;
    Ok("25 turns -> 50 records".into())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .expect("request");
    let res = app.clone().oneshot(req).await.expect("infallible");
    let status = res.status();
    let bytes = res.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, config: &Value) -> Result<String, String> {
    let (s, v) = call(app, Method::POST, "/sessions", Some(json!({ "config": config }))).await;
    ensure(s == StatusCode::CREATED, || format!("create: {s} {v}"))?;
    Ok(v["session_id"].as_str().unwrap_or_default().to_owned())
}

/// Drops what legitimately differs between sessions: the id, wherever it is
/// embedded, and the wall-clock stamp.
fn normalized(mut env: Value) -> Value {
    let id = env["session_id"].as_str().unwrap_or_default().to_owned();
    env["session_id"] = Value::Null;
    if let Some(refs) = env["memory_refs"].as_array_mut() {
        for r in refs {
            *r = Value::from(r.as_str().unwrap_or_default().replacen(&id, "", 1));
        }
    }
    if let Some(m) = env["metadata"].as_object_mut() {
        m.remove("timestamp_ms");
    }
    env
}

async fn service_isolation() -> Outcome {
    let configs = [
        json!({"task": "navigate", "seed": 21}),
        json!({"task": "navigate", "seed": 22, "map": random_map(9, 7, 7, 0.2).to_text()}),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let tokens = ["move_forward", "move_backward", "move_left", "move_right", "turn_left", "turn_right"];
    let scripts: Vec<Vec<Value>> = (0..2)
        .map(|_| {
            (0..12)
                .map(|_| {
                    let n = rng.gen_range(1..4);
                    json!({"actions": (0..n).map(|_| tokens[rng.gen_range(0..6)]).collect::<Vec<_>>()})
                })
                .collect()
        })
        .collect();

    let app = router(AppState::default());
    let mut serial: Vec<Vec<Value>> = Vec::new();
    for (cfg, script) in configs.iter().zip(&scripts) {
        let id = create(&app, cfg).await?;
        let mut envs = Vec::new();
        for req in script {
            let (_, v) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(req.clone())).await;
            envs.push(normalized(v));
        }
        serial.push(envs);
    }

    let a = create(&app, &configs[0]).await?;
    let b = create(&app, &configs[1]).await?;
    let (step_a, step_b) = (format!("/sessions/{a}/step"), format!("/sessions/{b}/step"));
    let mut interleaved = [Vec::new(), Vec::new()];
    for (req_a, req_b) in scripts[0].iter().zip(&scripts[1]) {
        let (ra, rb) = tokio::join!(
            call(&app, Method::POST, &step_a, Some(req_a.clone())),
            call(&app, Method::POST, &step_b, Some(req_b.clone())),
        );
        interleaved[0].push(normalized(ra.1));
        interleaved[1].push(normalized(rb.1));
    }
    for s in 0..2 {
        for t in 0..12 {
            ensure(serial[s][t] == interleaved[s][t], || format!("session {s} turn {t} differs"))?;
        }
    }

    let state = AppState::default();
    let app = router(state.clone());
    let id = create(&app, &configs[0]).await?;
    let lock = state.slot(&id).ok_or("slot missing")?.pipeline();
    let guard = lock.lock().await;
    let (s, _) = call(&app, Method::POST, &format!("/sessions/{id}/step"), Some(json!({"actions": ["turn_left"]}))).await;
    drop(guard);
    ensure(s == StatusCode::CONFLICT, || format!("in-flight step gave {s}"))?;

    let step = format!("/sessions/{id}/step");
    let burst = (0..8).map(|_| call(&app, Method::POST, &step, Some(json!({"actions": ["turn_left"]}))));
    let results = futures::future::join_all(burst).await;
    let ok = results.iter().filter(|r| r.0 == StatusCode::OK).count();
    ensure(results.iter().all(|r| r.0 == StatusCode::OK || r.0 == StatusCode::CONFLICT), || "unexpected status in burst".into())?;
    let turn = state.slot(&id).ok_or("slot missing")?.pipeline().lock().await.turn();
    ensure(turn as usize == ok, || format!("{ok} accepted steps but turn {turn}"))?;
    Ok(format!("2 x 12 interleaved turns match serial; 409 on held lock; burst accepted {ok}/8"))
}

fn main() -> ExitCode {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let checks: Vec<Check> = vec![
        ("transition distributions normalized", Some(5), Box::new(transition_normalization)),
        ("slip frequencies fit p_slip", Some(10), Box::new(slip_goodness_of_fit)),
        ("session log replay and tamper detection", None, Box::new(replay_and_tamper)),
        ("revisited poses render identical frames", None, Box::new(revisit_consistency)),
        ("reconstruction matches ground truth", None, Box::new(reconstruction)),
        ("depth raycasts match sampling oracle", None, Box::new(depth_oracle)),
        ("memory select/compress/manage oracle", None, Box::new(memory_oracle)),
        ("planner optimal and reaches goal", None, Box::new(planner_optimality)),
        ("audio and act-navigate loops close", None, Box::new(loop_closures)),
        ("two memory records per turn", None, Box::new(memory_growth)),
        ("service sessions isolated, 409 in flight", None, Box::new(move || runtime.block_on(service_isolation()))),
    ];
    let mut failed = 0;
    for (name, limit, check) in checks {
        let t0 = Instant::now();
        let mut outcome = check();
        let secs = t0.elapsed().as_secs_f64();
        if let (Ok(_), Some(l)) = (&outcome, limit) {
            if secs >= l as f64 {
                outcome = Err(format!("took {secs:.2}s, limit {l}s"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} ({secs:.2}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
