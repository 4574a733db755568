use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_action, Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Physical constants and task settings for the swing-up task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Distance from the hinge to the pole's centre of mass.
    pub half_length: f64,
    pub gravity: f64,
    pub force: f64,
    pub dt: f64,
    pub horizon: usize,
    pub track_limit: f64,
    pub move_cost: f64,
    /// Initial angle is `π + U(−init_jitter, init_jitter)`.
    pub init_jitter: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            gravity: 9.8,
            force: 10.0,
            dt: 0.01,
            horizon: 1000,
            track_limit: 3.0,
            move_cost: 0.1,
            init_jitter: 0.01,
        }
    }
}

/// Sparse-reward cart-pole swing-up with three actions (push left, none,
/// push right). The pole starts hanging down; reward 1 is paid only while
/// it is upright, centred and nearly still, and every push costs
/// `move_cost`. Angle 0 is upright.
#[derive(Clone, Debug)]
pub struct CartpoleSwingup {
    params: CartpoleParams,
    x: f64,
    x_dot: f64,
    theta: f64,
    theta_dot: f64,
    t: usize,
    finished: bool,
    rng: Rng,
}

impl CartpoleSwingup {
    pub fn new(params: CartpoleParams, seed: u64) -> Result<Self> {
        let positive = [
            params.cart_mass,
            params.pole_mass,
            params.half_length,
            params.gravity,
            params.dt,
            params.track_limit,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || params.horizon == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid cartpole parameters {params:?}"
            )));
        }
        let mut env = Self {
            params,
            x: 0.0,
            x_dot: 0.0,
            theta: PI,
            theta_dot: 0.0,
            t: 0,
            finished: true,
            rng: rng_from_seed(seed),
        };
        env.reset();
        Ok(env)
    }

    pub fn params(&self) -> &CartpoleParams {
        &self.params
    }

    /// `(x, ẋ, θ, θ̇)`.
    pub fn physical_state(&self) -> (f64, f64, f64, f64) {
        (self.x, self.x_dot, self.theta, self.theta_dot)
    }

    pub fn set_physical_state(&mut self, x: f64, x_dot: f64, theta: f64, theta_dot: f64) {
        self.x = x;
        self.x_dot = x_dot;
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    /// Total mechanical energy, pole modelled as a uniform rod.
    pub fn energy(&self) -> f64 {
        let p = &self.params;
        let (m, l) = (p.pole_mass, p.half_length);
        0.5 * (p.cart_mass + m) * self.x_dot.powi(2)
            + m * l * self.x_dot * self.theta_dot * self.theta.cos()
            + (2.0 / 3.0) * m * l * l * self.theta_dot.powi(2)
            + m * p.gravity * l * self.theta.cos()
    }

    fn observation(&self) -> Observation {
        Observation::Dense(vec![
            self.theta.cos(),
            self.theta.sin(),
            self.theta_dot,
            self.x,
            self.x_dot,
        ])
    }

    /// Semi-implicit Euler step under horizontal `force`.
    pub fn integrate(&mut self, force: f64) {
        let p = &self.params;
        let total = p.cart_mass + p.pole_mass;
        let pml = p.pole_mass * p.half_length;
        let (sin, cos) = self.theta.sin_cos();
        let temp = (force + pml * self.theta_dot * self.theta_dot * sin) / total;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total));
        let x_acc = temp - pml * theta_acc * cos / total;
        self.x_dot += p.dt * x_acc;
        self.x += p.dt * self.x_dot;
        self.theta_dot += p.dt * theta_acc;
        self.theta += p.dt * self.theta_dot;
        if self.x.abs() > p.track_limit {
            self.x = p.track_limit.copysign(self.x);
            self.x_dot = 0.0;
        }
    }

    fn upright(&self) -> bool {
        self.theta.cos() > 0.95
            && self.x.abs() < 0.1
            && self.theta_dot.abs() < 1.0
            && self.x_dot.abs() < 1.0
    }
}

impl Environment for CartpoleSwingup {
    fn num_actions(&self) -> usize {
        3
    }

    fn observation_dim(&self) -> usize {
        5
    }

    fn reset(&mut self) -> Observation {
        let j = self.params.init_jitter;
        let jitter = if j > 0.0 {
            self.rng.random_range(-j..j)
        } else {
            0.0
        };
        self.x = 0.0;
        self.x_dot = 0.0;
        self.theta = PI + jitter;
        self.theta_dot = 0.0;
        self.t = 0;
        self.finished = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        check_action(action, 3)?;
        let state = self.observation();
        let force = (action as f64 - 1.0) * self.params.force;
        self.integrate(force);
        let mut reward = if self.upright() { 1.0 } else { 0.0 };
        if force != 0.0 {
            reward -= self.params.move_cost;
        }
        let t = self.t;
        self.t += 1;
        let next_state = if self.t >= self.params.horizon {
            self.finished = true;
            None
        } else {
            Some(self.observation())
        };
        Ok(Transition {
            state,
            action,
            reward,
            next_state,
            t,
        })
    }

    fn kind(&self) -> &'static str {
        "cartpole"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_hanging_down() {
        let mut env = CartpoleSwingup::new(CartpoleParams::default(), 4).unwrap();
        let obs = env.reset().to_dense();
        assert!(obs[0] < -0.9999);
        let (x, xd, th, thd) = env.physical_state();
        assert_eq!((x, xd, thd), (0.0, 0.0, 0.0));
        assert!((th - PI).abs() <= 0.01);
        // Jitter is redrawn each episode.
        let again = env.reset().to_dense();
        assert_ne!(obs, again);
    }

    #[test]
    fn zero_force_episode_earns_nothing_and_lasts_horizon() {
        let mut env = CartpoleSwingup::new(CartpoleParams::default(), 1).unwrap();
        env.reset();
        let (mut ret, mut steps) = (0.0, 0);
        loop {
            let tr = env.step(1).unwrap();
            ret += tr.reward;
            steps += 1;
            if tr.is_terminal() {
                break;
            }
        }
        assert_eq!(steps, 1000);
        assert_eq!(ret, 0.0);
        assert!(env.step(1).is_err());
    }

    #[test]
    fn free_swing_conserves_energy() {
        let mut env = CartpoleSwingup::new(CartpoleParams::default(), 0).unwrap();
        // Half-radian swing about the hanging position.
        env.set_physical_state(0.0, 0.0, PI - 0.5, 0.0);
        let e0 = env.energy();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            env.integrate(0.0);
            worst = worst.max((env.energy() - e0).abs());
        }
        assert!(
            worst / e0.abs() < 0.01,
            "relative drift {}",
            worst / e0.abs()
        );
    }

    #[test]
    fn pushes_cost() {
        let mut env = CartpoleSwingup::new(CartpoleParams::default(), 0).unwrap();
        env.reset();
        assert!((env.step(2).unwrap().reward + 0.1).abs() < 1e-12);
        assert!((env.step(0).unwrap().reward + 0.1).abs() < 1e-12);
    }
}
