#![allow(dead_code)]

use mopa::agent::{Agent, AgentConfig};
use mopa::world::*;

pub fn scene(seed: u64) -> Scene {
    generate_scene(&SceneGenConfig::default(), seed).unwrap()
}

pub fn episode(scene: &Scene, task: TaskConfig, seed: u64) -> Episode {
    generate_episode(scene, task, Split::Test, seed).unwrap()
}

/// Steps an agent through one episode, calling `inspect` after every step
/// with the agent, the pre-step state and the outcome.
pub fn rollout(
    scene: &Scene,
    ep: &Episode,
    cfg: AgentConfig,
    seed: u64,
    mut inspect: impl FnMut(&Agent, &AgentState, Action, &StepOutcome),
) -> AgentState {
    let sim = Simulator::new(scene, ep).unwrap();
    let (mut state, mut obs) = sim.reset();
    let mut agent = Agent::new(cfg, ep.task, seed, scene, ep.start.position());
    let mut collided = false;
    loop {
        let action = agent.act(&obs, collided);
        let (next, out) = sim.step(&state, action).unwrap();
        inspect(&agent, &state, action, &out);
        collided = out.collided;
        state = next;
        obs = out.observation;
        if out.episode_over {
            return state;
        }
    }
}
