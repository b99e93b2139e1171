//! Concurrent start/stop/kill interleavings against the sim driver, watched
//! by a monitor that only accepts consistent cuts of store and route table.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use hub_core::containers::NewContainer;
use hub_core::{ContainerId, ContainerState, Hub, HubOptions, State};
use hub_server::proxy::{RouteEntry, RouteTable};
use hub_server::runtime::{route_prefix, Fault, Lifecycle, SimConfig, SimDriver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct World {
    _dir: tempfile::TempDir,
    pub hub: Arc<Hub>,
    pub sim: Arc<SimDriver>,
    pub routes: Arc<RouteTable>,
    pub life: Arc<Lifecycle>,
    pub containers: Vec<ContainerId>,
}

pub fn world(seed: u64, containers: usize, start_timeout: Duration) -> World {
    let dir = tempfile::tempdir().unwrap();
    let hub = Arc::new(Hub::ephemeral(dir.path(), HubOptions::default()));
    let sim = Arc::new(SimDriver::new(SimConfig { port_start: 40000, port_end: 59999, seed }));
    let routes = Arc::new(RouteTable::new());
    let life = Arc::new(Lifecycle::new(hub.clone(), routes.clone(), sim.clone(), start_timeout));
    let ids = (0..containers)
        .map(|i| {
            let user = hub.register_user(&format!("u{i}"), "u@x").unwrap().user_id;
            hub.create_container(&user, NewContainer { name: format!("c{i}"), ..Default::default() }).unwrap().container_id
        })
        .collect();
    World { _dir: dir, hub, sim, routes, life, containers: ids }
}

/// Store state and route table as they were at one common instant.
pub fn observe(hub: &Hub, routes: &RouteTable) -> (Arc<State>, Arc<BTreeMap<String, RouteEntry>>) {
    loop {
        let g1 = hub.store().generation();
        let (v1, table) = routes.snapshot();
        let state = hub.state();
        let g2 = hub.store().generation();
        let (v2, _) = routes.snapshot();
        if g1 == g2 && v1 == v2 {
            return (state, table);
        }
    }
}

pub fn violations(state: &State, table: &BTreeMap<String, RouteEntry>) -> Vec<String> {
    let mut out = Vec::new();
    for c in state.containers.values() {
        let route = table.get(&route_prefix(c));
        match c.state {
            ContainerState::Running => {
                let ok = matches!((&c.upstream_address, route), (Some(u), Some(r)) if *u == r.upstream);
                if !ok {
                    out.push(format!("{} running without upstream ({:?}, {:?})", c.container_id, c.upstream_address, route));
                }
            }
            ContainerState::Stopped if c.upstream_address.is_some() || route.is_some() => {
                out.push(format!("{} stopped with route ({:?}, {:?})", c.container_id, c.upstream_address, route));
            }
            _ => {}
        }
    }
    out
}

/// Routes whose container is gone or not running.
pub fn dangling(state: &State, table: &BTreeMap<String, RouteEntry>) -> Vec<String> {
    let live: Vec<String> = state
        .containers
        .values()
        .filter(|c| matches!(c.state, ContainerState::Running | ContainerState::Starting | ContainerState::Stopping))
        .map(route_prefix)
        .collect();
    table.keys().filter(|p| !live.contains(p)).cloned().collect()
}

#[derive(Debug, Default)]
pub struct RoundReport {
    pub observations: usize,
    /// Observations that caught at least one container running.
    pub running_seen: usize,
    pub violations: Vec<String>,
    pub ops: usize,
}

async fn random_op(w: &World, rng: &mut ChaCha8Rng) {
    let id = &w.containers[rng.random_range(0..w.containers.len())];
    match rng.random_range(0..10) {
        0..=2 => {
            let _ = w.life.request_start(id).await;
        }
        3 => {
            let _ = w.life.start(id).await;
        }
        4..=6 => {
            let _ = w.life.stop(id).await;
        }
        7 => {
            let _ = w.life.inspect(id).await;
        }
        8 => {
            if let Some(wid) = w.hub.container(id).ok().and_then(|c| c.workload_id) {
                w.sim.kill(&wid);
            }
        }
        _ => w.sim.inject(match rng.random_range(0..4) {
            0 => Fault::ImageNotFound,
            1 => Fault::Unavailable,
            2 => Fault::NeverReady,
            _ => Fault::DelayStart(Duration::from_millis(rng.random_range(1..30))),
        }),
    }
    if rng.random_bool(0.3) {
        tokio::time::sleep(Duration::from_millis(rng.random_range(0..5))).await;
    }
}

/// One round: `workers` tasks issue `ops` random operations each while the
/// monitor checks every consistent cut. Ends by stopping everything.
pub async fn race_round(seed: u64, workers: usize, ops: usize) -> RoundReport {
    let w = Arc::new(world(seed, 3, Duration::from_millis(80)));
    let done = Arc::new(AtomicBool::new(false));
    let monitor = {
        let (w, done) = (w.clone(), done.clone());
        tokio::spawn(async move {
            let mut report = RoundReport::default();
            while !done.load(Ordering::Acquire) {
                let (state, table) = observe(&w.hub, &w.routes);
                report.observations += 1;
                if state.containers.values().any(|c| c.state == ContainerState::Running) {
                    report.running_seen += 1;
                }
                report.violations.extend(violations(&state, &table));
                tokio::task::yield_now().await;
            }
            report
        })
    };
    let tasks: Vec<_> = (0..workers)
        .map(|i| {
            let w = w.clone();
            tokio::spawn(async move {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(i as u64));
                for _ in 0..ops {
                    random_op(&w, &mut rng).await;
                }
            })
        })
        .collect();
    for t in tasks {
        t.await.unwrap();
    }
    // background starts may still be in flight
    for _ in 0..200 {
        let (state, _) = observe(&w.hub, &w.routes);
        if state.containers.values().all(|c| !matches!(c.state, ContainerState::Starting | ContainerState::Stopping)) {
            break;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    done.store(true, Ordering::Release);
    let mut report = monitor.await.unwrap();
    report.ops = workers * ops;

    let (state, table) = observe(&w.hub, &w.routes);
    report.violations.extend(violations(&state, &table));
    report.violations.extend(dangling(&state, &table).into_iter().map(|p| format!("dangling route {p}")));
    for id in &w.containers {
        match w.life.stop(id).await {
            Ok(c) if c.state == ContainerState::Stopped => {}
            other => report.violations.push(format!("final stop of {id}: {other:?}")),
        }
        if w.routes.get(&route_prefix(&w.hub.container(id).unwrap())).is_some() {
            report.violations.push(format!("{id} stopped with route after final stop"));
        }
    }
    if !w.routes.is_empty() {
        report.violations.push(format!("routes left after stopping all: {:?}", w.routes.entries()));
    }
    if !w.sim.live_workloads().is_empty() {
        report.violations.push(format!("workloads left after stopping all: {:?}", w.sim.live_workloads()));
    }
    report
}

/// Sequential start/stop/kill traffic, checking right after every stop that
/// the stopped container has no route.
pub async fn stop_leaves_no_route(seed: u64, steps: usize) -> Result<usize, String> {
    let w = world(seed, 3, Duration::from_millis(80));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stops = 0;
    for step in 0..steps {
        let id = &w.containers[rng.random_range(0..w.containers.len())];
        match rng.random_range(0..6) {
            0 | 1 => {
                let _ = w.life.start(id).await;
            }
            2 => {
                let _ = w.life.request_start(id).await;
            }
            3 => {
                if let Some(wid) = w.hub.container(id).unwrap().workload_id {
                    w.sim.kill(&wid);
                }
                let _ = w.life.inspect(id).await;
            }
            _ => {
                if rng.random_bool(0.2) {
                    w.sim.inject(Fault::DelayStart(Duration::from_millis(10)));
                }
                let c = w.life.stop(id).await.map_err(|e| format!("step {step}: stop failed: {e}"))?;
                // stopping a container that never ran leaves it created
                if !matches!(c.state, ContainerState::Stopped | ContainerState::Created) {
                    return Err(format!("step {step}: stop ended in {:?}", c.state));
                }
                let (state, table) = observe(&w.hub, &w.routes);
                let c = state.container(id).unwrap();
                if c.state == ContainerState::Stopped && table.contains_key(&route_prefix(c)) {
                    return Err(format!("step {step}: {id} stopped with a route"));
                }
                let bad = dangling(&state, &table);
                if !bad.is_empty() {
                    return Err(format!("step {step}: dangling {bad:?}"));
                }
                stops += 1;
            }
        }
    }
    Ok(stops)
}
