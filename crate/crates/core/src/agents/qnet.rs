use std::sync::Arc;

use crate::ensemble::EnsembleMember;
use crate::env::{Observation, Transition};
use crate::error::{Error, Result};
use crate::nn::{apply_checked, DropoutMask, Mlp, Workspace};
use crate::rng::{rng_from_seed, Rng};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `r` for a terminal transition, else `r + γ·max_a' (f_θ⁻ + β·p)(s', a')`
/// with `θ⁻` the member's current parameters.
pub fn td_target(member: &EnsembleMember, tr: &Transition, gamma: f64) -> f64 {
    match &tr.next_state {
        None => tr.reward,
        Some(next) => {
            let mut ws = Workspace::default();
            let mut q = vec![0.0; member.net.output_dim()];
            member.predict_into(next.features(), &mut ws, &mut q);
            tr.reward + gamma * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }
    }
}

/// TD-learning settings shared by all value-based agents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdSettings {
    pub gamma: f64,
    pub batch_size: usize,
    pub sgd_steps: usize,
    /// Refresh a separate target network every this many learn calls.
    pub target_period: Option<usize>,
    /// Train and bootstrap under freshly sampled dropout masks.
    pub keep_probability: Option<f64>,
}

/// A Q-network member plus its private RNG, scratch space and optional
/// target copy.
#[derive(Clone, Debug)]
pub struct QLearner {
    pub member: EnsembleMember,
    rng: Rng,
    target: Option<Mlp>,
    learn_calls: u64,
    ws: Workspace,
    ws_prior: Workspace,
    grad: Vec<f64>,
    q: Vec<f64>,
}

impl QLearner {
    pub fn new(member: EnsembleMember, seed: u64) -> Self {
        let n = member.net.num_params();
        let a = member.net.output_dim();
        Self {
            member,
            rng: rng_from_seed(seed),
            target: None,
            learn_calls: 0,
            ws: Workspace::default(),
            ws_prior: Workspace::default(),
            grad: vec![0.0; n],
            q: vec![0.0; a],
        }
    }

    pub fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }

    pub fn sample_mask(&mut self, keep_probability: f64) -> DropoutMask {
        DropoutMask::sample(
            self.member.net.layer_sizes(),
            keep_probability,
            &mut self.rng,
        )
    }

    /// `(f + β·p)(obs)` under an optional dropout mask.
    pub fn q_values(&mut self, obs: &Observation, mask: Option<&DropoutMask>) -> &[f64] {
        let x = obs.features();
        self.q
            .copy_from_slice(self.member.net.forward_ws(x, mask, &mut self.ws));
        self.member
            .prior
            .add_into(x, &mut self.ws_prior, &mut self.q);
        &self.q
    }

    pub fn check_observation(&self, obs: &Observation) -> Result<()> {
        self.member.net.check_input(obs.features(), None)
    }

    /// One learn call: `settings.sgd_steps` Adam steps on minibatches drawn
    /// by `sample` from a buffer of `data_size` transitions. Targets use the
    /// parameters held at the start of the call (or the periodic target
    /// copy). Returns the last minibatch loss.
    pub fn learn(
        &mut self,
        settings: &TdSettings,
        data_size: usize,
        mut sample: impl FnMut(&mut Rng) -> Vec<Arc<Transition>>,
        bonus: &dyn Fn(&Transition) -> f64,
    ) -> Result<Option<f64>> {
        if let Some(period) = settings.target_period {
            if self.target.is_none() || self.learn_calls.is_multiple_of(period.max(1) as u64) {
                self.target = Some(self.member.net.clone());
            }
        }
        self.learn_calls += 1;
        let snapshot = match (&self.target, settings.sgd_steps > 1) {
            (Some(_), _) => None,
            (None, true) => Some(self.member.net.clone()),
            (None, false) => None,
        };
        let periodic = self.target.take();
        let target_net = periodic.as_ref().or(snapshot.as_ref());
        let mut last = Ok(None);
        for _ in 0..settings.sgd_steps {
            let batch = sample(&mut self.rng);
            if batch.is_empty() {
                break;
            }
            match self.sgd_step(settings, &batch, data_size, target_net, bonus) {
                Ok(loss) => last = Ok(Some(loss)),
                Err(e) => {
                    last = Err(e);
                    break;
                }
            }
        }
        self.target = periodic;
        last
    }

    /// Summed squared TD error over the minibatch, plus the anchor pull.
    ///
    /// The anchor `λ‖θ − θ₀‖²` belongs to the whole-buffer objective, so a
    /// minibatch of `B` out of `n` transitions carries `λB/n` of it.
    fn sgd_step(
        &mut self,
        settings: &TdSettings,
        batch: &[Arc<Transition>],
        data_size: usize,
        target_net: Option<&Mlp>,
        bonus: &dyn Fn(&Transition) -> f64,
    ) -> Result<f64> {
        let net = &self.member.net;
        let prior = &self.member.prior;
        let sizes = net.layer_sizes().to_vec();
        let mut d_out = vec![0.0; net.output_dim()];
        let mut q_next = vec![0.0; net.output_dim()];
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for tr in batch {
            if tr.action >= d_out.len() {
                return Err(Error::InvalidAction {
                    action: tr.action,
                    num_actions: d_out.len(),
                });
            }
            let mut y = tr.reward + bonus(tr);
            if let Some(next) = &tr.next_state {
                let mask = settings
                    .keep_probability
                    .map(|p| DropoutMask::sample(&sizes, p, &mut self.rng));
                let x = next.features();
                q_next.copy_from_slice(target_net.unwrap_or(net).forward_ws(
                    x,
                    mask.as_ref(),
                    &mut self.ws,
                ));
                prior.add_into(x, &mut self.ws_prior, &mut q_next);
                y += settings.gamma * q_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            }
            let mask = settings
                .keep_probability
                .map(|p| DropoutMask::sample(&sizes, p, &mut self.rng));
            let x = tr.state.features();
            let mut q = net.forward_ws(x, mask.as_ref(), &mut self.ws)[tr.action];
            if prior.scale() != 0.0 {
                q += prior.scale() * prior.net().forward_ws(x, None, &mut self.ws_prior)[tr.action];
            }
            let err = q - y;
            loss += err * err;
            d_out.iter_mut().for_each(|d| *d = 0.0);
            d_out[tr.action] = 2.0 * err;
            net.backward(&mut self.ws, &d_out, &mut self.grad);
        }
        if let (Some(anchor), lambda) = (&self.member.anchor, self.member.reg_lambda) {
            if lambda > 0.0 {
                let lambda = lambda * batch.len() as f64 / data_size.max(1) as f64;
                for ((g, p), a) in self.grad.iter_mut().zip(net.params()).zip(anchor) {
                    loss += lambda * (p - a) * (p - a);
                    *g += 2.0 * lambda * (p - a);
                }
            }
        }
        apply_checked(
            &mut self.member.net,
            &mut self.member.adam,
            loss,
            &self.grad,
        )?;
        Ok(loss)
    }
}
