//! Episode orchestration: wiring the engine, the command layer, and the
//! learners together for feudal and joint-action training, plus the
//! standalone agent pre-training loop.
//!
//! The commander acts only at decision points — when an agent needs a new
//! order. Its reward for a transition is the environment reward summed
//! over the steps since its previous decision; when several decisions land
//! on the same timestep, the first carries the whole interval and the rest
//! carry zero. Agents never see environment reward at all: their stream is
//! the order outcome alone.
//!
//! Training follows a strict one-update-per-push rule for both learners
//! (batches clamp to the buffer size early on), so update counts always
//! equal push counts.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::baseline::{joint_state_key, JointActionSpace};
use crate::engine::{
    env_step, reset, AgentState, CivilianState, EnemyState, Event, PrimitiveAction, WorldState,
};
use crate::feudal::{
    agent_reward, commander_action_count, encode_agent_obs,
    encode_commander_obs, make_order, order_space, order_status, scripted_agent_policy,
    wait_outcome, ObsVec, Order, OrderKind, OrderOutcome,
};
use crate::floorplan::Scenario;
use crate::learn::{
    epsilon_greedy, q_update, Ddqn, DdqnConfig, EpsilonSchedule, QTable, TabularTransition,
    Transition,
};

/// Tunable settings shared by every algorithm. All of these can be
/// overridden from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub gamma: f64,
    /// Gradient-descent learning rate (networks).
    pub lr: f64,
    /// Tabular learning rate.
    pub alpha: f64,
    pub batch_size: usize,
    pub capacity: usize,
    pub target_update_every: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay: u64,
    pub hidden: Vec<usize>,
    pub grad_clip: f64,
    /// Checkpoint period in episodes; 0 writes only the final checkpoint.
    pub ckpt_every: u64,
    /// Pre-training stops once the rolling order-success rate over
    /// `pretrain_window` sub-episodes reaches this.
    pub pretrain_threshold: f64,
    pub pretrain_window: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.99,
            lr: 1e-3,
            alpha: 0.1,
            batch_size: 32,
            capacity: 50_000,
            target_update_every: 500,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay: 50_000,
            hidden: vec![64, 64],
            grad_clip: 10.0,
            ckpt_every: 0,
            pretrain_threshold: 0.95,
            pretrain_window: 500,
        }
    }
}

impl HyperParams {
    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule::new(self.eps_start, self.eps_end, self.eps_decay)
    }

    pub fn ddqn_config(&self) -> DdqnConfig {
        DdqnConfig {
            gamma: self.gamma,
            lr: self.lr,
            batch_size: self.batch_size,
            target_update_every: self.target_update_every,
            grad_clip: self.grad_clip,
        }
    }
}

/// A value learner: either a lookup table over discrete keys or a
/// double-DQN over dense observations. Every push performs exactly one
/// update.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Tabular { table: QTable, alpha: f64, gamma: f64, pushes: u64 },
    Ddqn { net: Ddqn, pushes: u64 },
}

impl Learner {
    pub fn tabular(actions: usize, hp: &HyperParams) -> Self {
        Learner::Tabular { table: QTable::new(actions), alpha: hp.alpha, gamma: hp.gamma, pushes: 0 }
    }

    pub fn ddqn<R: Rng>(obs_len: usize, actions: usize, hp: &HyperParams, rng: &mut R) -> Self {
        let mut dims = vec![obs_len];
        dims.extend_from_slice(&hp.hidden);
        dims.push(actions);
        Learner::Ddqn { net: Ddqn::new(&dims, hp.capacity, hp.ddqn_config(), rng), pushes: 0 }
    }

    pub fn action_count(&self) -> usize {
        match self {
            Learner::Tabular { table, .. } => table.actions,
            Learner::Ddqn { net, .. } => net.online.output_len(),
        }
    }

    pub fn q(&self, obs: &ObsVec) -> Vec<f64> {
        match self {
            Learner::Tabular { table, .. } => table.values(&obs.key),
            Learner::Ddqn { net, .. } => net.q(&obs.values),
        }
    }

    /// Store one transition and perform its single matching update.
    pub fn push<R: Rng>(
        &mut self,
        state: &ObsVec,
        action: usize,
        reward: f64,
        next_state: &ObsVec,
        done: bool,
        next_mask: &[bool],
        rng: &mut R,
    ) {
        match self {
            Learner::Tabular { table, alpha, gamma, pushes } => {
                let t = TabularTransition {
                    key: state.key.clone(),
                    action,
                    reward,
                    next_key: next_state.key.clone(),
                    done,
                    next_mask: next_mask.to_vec(),
                };
                q_update(table, &t, *alpha, *gamma);
                *pushes += 1;
            }
            Learner::Ddqn { net, pushes } => {
                let t = Transition {
                    state: state.values.clone(),
                    action,
                    reward,
                    next_state: next_state.values.clone(),
                    done,
                    next_mask: next_mask.to_vec(),
                };
                net.push_and_train(t, rng);
                *pushes += 1;
            }
        }
    }

    pub fn pushes(&self) -> u64 {
        match self {
            Learner::Tabular { pushes, .. } | Learner::Ddqn { pushes, .. } => *pushes,
        }
    }

    /// Number of updates performed; equals [`Self::pushes`] by contract.
    pub fn train_steps(&self) -> u64 {
        match self {
            Learner::Tabular { pushes, .. } => *pushes,
            Learner::Ddqn { net, .. } => net.train_steps(),
        }
    }
}

/// How the low-level agents act (and whether they learn).
#[derive(Debug, Clone, PartialEq)]
pub enum AgentController {
    /// Hand-written order-following behaviour; nothing to train.
    Scripted,
    /// One shared learner trained concurrently with the commander.
    Learning { learner: Learner, eps: EpsilonSchedule },
    /// One shared learner with parameters held fixed; acts greedily.
    Frozen { learner: Learner },
}

impl AgentController {
    pub fn learner(&self) -> Option<&Learner> {
        match self {
            AgentController::Scripted => None,
            AgentController::Learning { learner, .. } | AgentController::Frozen { learner } => {
                Some(learner)
            }
        }
    }
}

/// Per-episode summary used for metrics rows and acceptance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub steps: u32,
    pub ret: f64,
    pub success: bool,
    pub agent_deaths: u32,
    pub civilian_alive: bool,
    pub orders_issued: u32,
    pub orders_completed: u32,
    pub commander_decisions: u32,
}

/// One trace record: the full post-step world plus what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: u32,
    pub agents: Vec<AgentState>,
    pub enemies: Vec<EnemyState>,
    pub civilians: Vec<CivilianState>,
    pub unclear: Vec<u8>,
    pub orders: Vec<Option<Order>>,
    pub actions: Vec<PrimitiveAction>,
    pub reward: f64,
    pub events: Vec<Event>,
}

fn trace_record(world: &WorldState, orders: &[Option<Order>], actions: &[PrimitiveAction], reward: f64, events: &[Event]) -> TraceStep {
    TraceStep {
        t: world.timestep,
        agents: world.agents.clone(),
        enemies: world.enemies.clone(),
        civilians: world.civilians.clone(),
        unclear: world.clearance.unclear.clone(),
        orders: orders.to_vec(),
        actions: actions.to_vec(),
        reward,
        events: events.to_vec(),
    }
}

/// Feudal episode runner: a commander learner on top, shared agents below.
pub struct FeudalDriver<'a> {
    pub scenario: &'a Scenario,
    pub commander: Learner,
    pub commander_eps: EpsilonSchedule,
    pub agents: AgentController,
}

impl<'a> FeudalDriver<'a> {
    pub fn new(scenario: &'a Scenario, commander: Learner, commander_eps: EpsilonSchedule, agents: AgentController) -> Self {
        FeudalDriver { scenario, commander, commander_eps, agents }
    }

    /// Play one episode. With `train` set, both learners update online
    /// (one update per push) and exploration follows the schedules;
    /// otherwise the policies act greedily and nothing changes.
    pub fn run_episode<R: Rng>(
        &mut self,
        train: bool,
        rng: &mut R,
        mut trace: Option<&mut Vec<TraceStep>>,
    ) -> EpisodeOutcome {
        let scenario = self.scenario;
        let n = scenario.agent_spawns.len();
        let cmd_actions = commander_action_count(scenario);
        let mut world = reset(scenario);
        let mut orders: Vec<Option<Order>> = vec![None; n];
        // Pending commander transition: (state, action, accumulated
        // environment reward closes it at the next decision point).
        let mut pending: Option<(ObsVec, usize)> = None;
        let mut caccum = 0.0;
        let mut out = EpisodeOutcome {
            steps: 0,
            ret: 0.0,
            success: false,
            agent_deaths: 0,
            civilian_alive: true,
            orders_issued: 0,
            orders_completed: 0,
            commander_decisions: 0,
        };

        let decide = |world: &WorldState,
                          orders: &mut Vec<Option<Order>>,
                          pending: &mut Option<(ObsVec, usize)>,
                          caccum: &mut f64,
                          commander: &mut Learner,
                          eps: &mut EpsilonSchedule,
                          out: &mut EpisodeOutcome,
                          agent_id: usize,
                          rng: &mut R| {
            let obs = encode_commander_obs(scenario, world, orders, Some(agent_id));
            let mask = order_space(scenario, world, agent_id);
            if let Some((ps, pa)) = pending.take() {
                if train {
                    commander.push(&ps, pa, *caccum, &obs, false, &mask, rng);
                }
                *caccum = 0.0;
            }
            let eps_now = if train { eps.advance() } else { 0.0 };
            let action = epsilon_greedy(&commander.q(&obs), &mask, eps_now, rng)
                .expect("wait is always a valid order");
            orders[agent_id] = Some(make_order(scenario, world, agent_id, action));
            *pending = Some((obs, action));
            out.orders_issued += 1;
            out.commander_decisions += 1;
        };

        // Initial decisions, ascending agent id.
        for id in 0..n {
            if world.agents[id].alive && !world.done {
                decide(
                    &world,
                    &mut orders,
                    &mut pending,
                    &mut caccum,
                    &mut self.commander,
                    &mut self.commander_eps,
                    &mut out,
                    id,
                    rng,
                );
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(trace_record(&world, &orders, &[], 0.0, &[]));
        }

        let all_actions = vec![true; PrimitiveAction::COUNT];
        while !world.done {
            // -- Select actions.
            let mut actions = vec![PrimitiveAction::Wait; n];
            let mut pre_obs: Vec<Option<ObsVec>> = vec![None; n];
            for id in 0..n {
                if !world.agents[id].alive {
                    continue;
                }
                let order = orders[id].as_ref().expect("every living agent holds an order");
                match &mut self.agents {
                    AgentController::Scripted => {
                        actions[id] = scripted_agent_policy(scenario, &world, id, order);
                    }
                    AgentController::Learning { learner, eps } => {
                        let obs = encode_agent_obs(scenario, &world, id, order);
                        let eps_now = if train { eps.advance() } else { 0.0 };
                        let a = epsilon_greedy(&learner.q(&obs), &all_actions, eps_now, rng).unwrap();
                        actions[id] = PrimitiveAction::from_index(a).unwrap();
                        pre_obs[id] = Some(obs);
                    }
                    AgentController::Frozen { learner } => {
                        let obs = encode_agent_obs(scenario, &world, id, order);
                        let a = epsilon_greedy(&learner.q(&obs), &all_actions, 0.0, rng).unwrap();
                        actions[id] = PrimitiveAction::from_index(a).unwrap();
                    }
                }
            }

            let step = env_step(scenario, &mut world, &actions).expect("stepping a live episode");
            out.steps += 1;
            out.ret += step.reward;
            caccum += step.reward;
            for e in &step.events {
                if matches!(e, Event::AgentDied(_)) {
                    out.agent_deaths += 1;
                }
            }

            // -- Evaluate every active order.
            let mut outcomes: Vec<Option<OrderOutcome>> = vec![None; n];
            for id in 0..n {
                if let Some(order) = &orders[id] {
                    outcomes[id] = Some(order_status(scenario, &world, id, order));
                }
            }
            let any_resolved_alive = (0..n).any(|id| {
                world.agents[id].alive && outcomes[id].is_some_and(|st| st.is_terminal())
            });
            // New orders pull every waiting agent along with them.
            if any_resolved_alive && !world.done {
                for id in 0..n {
                    let waiting = matches!(orders[id], Some(Order { kind: OrderKind::Wait, .. }));
                    if waiting && world.agents[id].alive && outcomes[id] == Some(OrderOutcome::InProgress) {
                        outcomes[id] = Some(wait_outcome(&world, orders[id].as_ref().unwrap().origin_room));
                    }
                }
            }

            // -- Record agent transitions and retire resolved orders.
            let mut needs_order: Vec<usize> = Vec::new();
            for id in 0..n {
                let Some(st) = outcomes[id] else { continue };
                let order = orders[id].as_ref().unwrap();
                let terminal = st.is_terminal() || world.done;
                if let AgentController::Learning { learner, .. } = &mut self.agents {
                    if train {
                        let obs2 = encode_agent_obs(scenario, &world, id, order);
                        learner.push(
                            pre_obs[id].as_ref().expect("living agents were observed"),
                            actions[id].index(),
                            agent_reward(st),
                            &obs2,
                            terminal,
                            &all_actions,
                            rng,
                        );
                    }
                }
                if st == OrderOutcome::Completed {
                    out.orders_completed += 1;
                }
                if terminal {
                    orders[id] = None;
                    if world.agents[id].alive && !world.done {
                        needs_order.push(id);
                    }
                }
            }

            // -- Commander decision points, ascending agent id.
            for &id in &needs_order {
                decide(
                    &world,
                    &mut orders,
                    &mut pending,
                    &mut caccum,
                    &mut self.commander,
                    &mut self.commander_eps,
                    &mut out,
                    id,
                    rng,
                );
            }
            if world.done {
                if let Some((ps, pa)) = pending.take() {
                    if train {
                        let obs = encode_commander_obs(scenario, &world, &orders, None);
                        let mask = vec![true; cmd_actions];
                        self.commander.push(&ps, pa, caccum, &obs, true, &mask, rng);
                    }
                    caccum = 0.0;
                }
            }

            if let Some(tr) = trace.as_deref_mut() {
                tr.push(trace_record(&world, &orders, &actions, step.reward, &step.events));
            }
        }

        out.success = world.clearance.all_clear();
        out.civilian_alive = world.civilians_alive();
        out
    }
}

/// Joint-action episode runner: one flat tabular learner over the global
/// state and the Cartesian action space.
pub struct JointDriver<'a> {
    pub scenario: &'a Scenario,
    pub space: JointActionSpace,
    pub learner: Learner,
    pub eps: EpsilonSchedule,
}

impl<'a> JointDriver<'a> {
    pub fn new(scenario: &'a Scenario, hp: &HyperParams) -> Self {
        let space = JointActionSpace::for_scenario(scenario);
        let learner = Learner::tabular(space.joint_count(), hp);
        JointDriver { scenario, space, learner, eps: hp.epsilon() }
    }

    pub fn run_episode<R: Rng>(
        &mut self,
        train: bool,
        rng: &mut R,
        mut trace: Option<&mut Vec<TraceStep>>,
    ) -> EpisodeOutcome {
        let scenario = self.scenario;
        let n = scenario.agent_spawns.len();
        let mut world = reset(scenario);
        let mask = vec![true; self.space.joint_count()];
        let mut out = EpisodeOutcome {
            steps: 0,
            ret: 0.0,
            success: false,
            agent_deaths: 0,
            civilian_alive: true,
            orders_issued: 0,
            orders_completed: 0,
            commander_decisions: 0,
        };
        let none_orders: Vec<Option<Order>> = vec![None; n];
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(trace_record(&world, &none_orders, &[], 0.0, &[]));
        }
        while !world.done {
            let key = ObsVec { values: Vec::new(), key: joint_state_key(&world) };
            let eps_now = if train { self.eps.advance() } else { 0.0 };
            let joint = epsilon_greedy(&self.learner.q(&key), &mask, eps_now, rng).unwrap();
            let actions = self.space.decode(joint).expect("selected action is in range");
            let step = env_step(scenario, &mut world, &actions).expect("stepping a live episode");
            out.steps += 1;
            out.ret += step.reward;
            for e in &step.events {
                if matches!(e, Event::AgentDied(_)) {
                    out.agent_deaths += 1;
                }
            }
            if train {
                let next = ObsVec { values: Vec::new(), key: joint_state_key(&world) };
                self.learner.push(&key, joint, step.reward, &next, world.done, &mask, rng);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(trace_record(&world, &none_orders, &actions, step.reward, &step.events));
            }
        }
        out.success = world.clearance.all_clear();
        out.civilian_alive = world.civilians_alive();
        out
    }
}

/// Build a single-agent world for pre-training: one agent standing at
/// `cell`, no enemies, no civilians.
pub fn pretrain_world(scenario: &Scenario, cell: crate::floorplan::Coord) -> WorldState {
    let mut world = reset(scenario);
    world.agents = vec![AgentState {
        id: 0,
        cell,
        hp: scenario.agent_hp,
        alive: true,
        room: scenario.plan.room_of(cell).expect("pre-training spawns on floor"),
        crossed: None,
    }];
    world.enemies.clear();
    world.civilians.clear();
    let prev = vec![1u8; scenario.plan.room_count()];
    world.clearance = crate::clearance::recompute_clearance(
        &scenario.plan,
        &prev,
        world.agents.iter().map(|a| a.room),
        core::iter::empty(),
    );
    world.done = world.clearance.all_clear();
    world
}

/// One pre-training sub-episode: an agent dropped uniformly at random into
/// a random room with a uniformly random valid order, run to resolution.
/// Returns whether the order was completed.
pub fn pretrain_episode<R: Rng>(
    scenario: &Scenario,
    learner: &mut Learner,
    eps: &mut EpsilonSchedule,
    train: bool,
    rng: &mut R,
) -> bool {
    let plan = &scenario.plan;
    let room_id = rng.gen_range(0..plan.room_count());
    let room = &plan.rooms[room_id];
    let cell = room.cells[rng.gen_range(0..room.cells.len())];
    let mut world = pretrain_world(scenario, cell);

    // Uniform over the valid order slots: each door of the room plus wait.
    let pick = rng.gen_range(0..room.doors.len() + 1);
    let slot = if pick < room.doors.len() { pick } else { scenario.dims.d_max };
    let order = make_order(scenario, &world, 0, slot);

    let all_actions = vec![true; PrimitiveAction::COUNT];
    loop {
        let obs = encode_agent_obs(scenario, &world, 0, &order);
        let eps_now = if train { eps.advance() } else { 0.0 };
        let a = epsilon_greedy(&learner.q(&obs), &all_actions, eps_now, rng).unwrap();
        let action = PrimitiveAction::from_index(a).unwrap();
        env_step(scenario, &mut world, &[action]).expect("pre-training episode still live");
        let st = order_status(scenario, &world, 0, &order);
        let terminal = st.is_terminal() || world.done;
        if train {
            let obs2 = encode_agent_obs(scenario, &world, 0, &order);
            learner.push(&obs, a, agent_reward(st), &obs2, terminal, &all_actions, rng);
        }
        if terminal {
            return st == OrderOutcome::Completed;
        }
    }
}

/// All-valid mask over the commander's slots; used for terminal states.
pub fn full_mask(len: usize) -> Vec<bool> {
    vec![true; len]
}
