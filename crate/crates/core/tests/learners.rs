use gsea_core::learners::{
    surrogate_loss, DqnConfig, DqnLearner, PpoConfig, PpoLearner, TaskKind, VTraceLearner,
};
use gsea_core::nn::{Activation, DecayedAdam, Mlp, MlpSpec, Model, Optimizer, ParamSet, Tape, Tensor};
use gsea_core::rng::{seeded, Rng};
use gsea_core::vtrace::VTraceConfig;
use gsea_core::{DiscretePolicyDist, Encoding, Observation, Trajectory, Transition};
use rand::Rng as _;

const WIDTH: usize = 4;
const ACTIONS: usize = 3;

fn net(rng: &mut Rng, out: usize) -> Mlp<f64> {
    Mlp::new(MlpSpec::new(vec![WIDTH, 16, out], Activation::Tanh).unwrap(), rng)
}

fn obs(rng: &mut Rng) -> Observation {
    Observation::vector((0..WIDTH).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Random segments whose behavior log-probs come from `policy`.
fn segments(rng: &mut Rng, policy: &Mlp<f64>, count: usize, len: usize) -> Vec<Trajectory> {
    (0..count)
        .map(|k| {
            let mut cur = obs(rng);
            let trs = (0..len)
                .map(|i| {
                    let logits = policy.forward_vec(&cur.data).unwrap();
                    let dist = DiscretePolicyDist::<f64>::from_logits(&logits, None).unwrap();
                    let action = dist.sample(rng);
                    let next = obs(rng);
                    let tr = Transition {
                        observation: cur.clone(),
                        action,
                        reward: rng.gen_range(-1.0..1.0),
                        next_observation: next.clone(),
                        terminal: k % 2 == 0 && i + 1 == len,
                        behavior_log_prob: dist.log_prob(action).unwrap(),
                        action_mask: None,
                        next_action_mask: None,
                    };
                    cur = next;
                    tr
                })
                .collect();
            Trajectory::new(trs).unwrap()
        })
        .collect()
}

fn accumulate_step(params: &mut ParamSet<f64>, opt: &mut DecayedAdam<f64>, grads: &gsea_core::nn::Gradients<f64>, bound: &[gsea_core::nn::Var]) {
    params.accumulate(grads, bound).unwrap();
    opt.step(params).unwrap();
}

#[test]
fn unclipped_ppo_on_policy_gradient_is_vanilla_policy_gradient() {
    for seed in 0..5 {
        let mut rng = seeded(seed);
        let policy = net(&mut rng, ACTIONS);
        let value = net(&mut rng, 1);
        let segs = segments(&mut rng, &policy, 3, 5);
        let cfg = PpoConfig { clip: f64::INFINITY, surrogate_epochs: 1, normalize_advantages: false, ..PpoConfig::for_task(TaskKind::Jssp) };
        let ppo = PpoLearner::new(policy.clone(), value, Box::new(DecayedAdam::new(1e-3, 0.0)), Box::new(DecayedAdam::new(1e-3, 0.0)), cfg, Encoding::Raw).unwrap();
        let batch = ppo.prepare(&segs).unwrap();

        let grad_of = |vanilla: bool| {
            let mut tape = Tape::new();
            let b = policy.params().bind(&mut tape);
            let x = tape.constant(batch.features.clone());
            let logits = policy.forward(&mut tape, &b, x).unwrap();
            let lp = tape.log_softmax(logits);
            let picked = tape.gather(lp, &batch.actions).unwrap();
            let loss = if vanilla {
                let adv = Tensor::from_vec(batch.advantages.len(), 1, batch.advantages.clone()).unwrap();
                let weighted = tape.mul_const(picked, adv).unwrap();
                let m = tape.mean(weighted);
                tape.neg(m)
            } else {
                surrogate_loss(&mut tape, picked, &batch.behavior_log_probs, &batch.advantages, f64::INFINITY).unwrap()
            };
            let g = tape.backward(loss).unwrap();
            let mut p = policy.params().clone();
            p.zero_grad();
            p.accumulate(&g, &b).unwrap();
            p.flat_grads()
        };
        for (a, b) in grad_of(false).iter().zip(grad_of(true)) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn all_learners_decrease_loss_on_a_frozen_batch() {
    for seed in 0..3 {
        let mut rng = seeded(10 + seed);
        let policy = net(&mut rng, ACTIONS);
        let value = net(&mut rng, 1);
        let segs = segments(&mut rng, &policy, 4, 6);
        let opt = || DecayedAdam::new(1e-3, 0.0);

        // DQN
        let mut dqn = DqnLearner::new(net(&mut rng, ACTIONS), Box::new(opt()), DqnConfig::default(), Encoding::Raw).unwrap();
        let trs: Vec<Transition> = segs.iter().flat_map(|s| s.transitions().to_vec()).collect();
        let batch = dqn.prepare(&trs).unwrap();
        let mut o = opt();
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let mut tape = Tape::new();
            let b = dqn.online.params().bind(&mut tape);
            let loss = dqn.loss(&dqn.online, &mut tape, &b, &batch).unwrap();
            let v = tape.value(loss).item();
            assert!(v < prev, "dqn seed {seed}: {v} >= {prev}");
            prev = v;
            let g = tape.backward(loss).unwrap();
            accumulate_step(dqn.online.params_mut(), &mut o, &g, &b);
        }

        // PPO
        let mut ppo = PpoLearner::new(policy.clone(), value.clone(), Box::new(opt()), Box::new(opt()), PpoConfig::for_task(TaskKind::Blockmaze), Encoding::Raw).unwrap();
        let batch = ppo.prepare(&segs).unwrap();
        let (mut po, mut vo) = (opt(), opt());
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let mut tape = Tape::new();
            let pb = ppo.policy.params().bind(&mut tape);
            let vb = ppo.value.params().bind(&mut tape);
            let (loss, parts) = ppo.loss(&ppo.policy, &ppo.value, &mut tape, &pb, &vb, &batch).unwrap();
            assert!(parts.total < prev, "ppo seed {seed}: {} >= {prev}", parts.total);
            prev = parts.total;
            let g = tape.backward(loss).unwrap();
            accumulate_step(ppo.policy.params_mut(), &mut po, &g, &pb);
            accumulate_step(ppo.value.params_mut(), &mut vo, &g, &vb);
        }

        // V-trace
        let mut vt = VTraceLearner::new(policy.clone(), value.clone(), Box::new(opt()), Box::new(opt()), VTraceConfig::default(), Encoding::Raw).unwrap();
        let batch = vt.prepare(&segs).unwrap();
        let (mut po, mut vo) = (opt(), opt());
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            let mut tape = Tape::new();
            let pb = vt.policy.params().bind(&mut tape);
            let vb = vt.value.params().bind(&mut tape);
            let (loss, parts) = vt.loss(&vt.policy, &vt.value, &mut tape, &pb, &vb, &batch).unwrap();
            assert!(parts.total < prev, "vtrace seed {seed}: {} >= {prev}", parts.total);
            prev = parts.total;
            let g = tape.backward(loss).unwrap();
            accumulate_step(vt.policy.params_mut(), &mut po, &g, &pb);
            accumulate_step(vt.value.params_mut(), &mut vo, &g, &vb);
        }
    }
}

#[test]
fn dqn_loss_matches_straight_line_recomputation() {
    let mut rng = seeded(30);
    let policy = net(&mut rng, ACTIONS);
    let segs = segments(&mut rng, &policy, 3, 4);
    let trs: Vec<Transition> = segs.iter().flat_map(|s| s.transitions().to_vec()).collect();
    let mut dqn = DqnLearner::new(net(&mut rng, ACTIONS), Box::new(DecayedAdam::new(1e-3, 0.0)), DqnConfig::default(), Encoding::Raw).unwrap();
    dqn.target = net(&mut rng, ACTIONS);
    let batch = dqn.prepare(&trs).unwrap();
    let mut tape = Tape::new();
    let b = dqn.online.params().bind_frozen(&mut tape);
    let loss = dqn.loss(&dqn.online, &mut tape, &b, &batch).unwrap();

    let huber = |x: f64| if x.abs() <= 1.0 { 0.5 * x * x } else { x.abs() - 0.5 };
    let mut total = 0.0;
    for tr in &trs {
        let q = dqn.online.forward_vec(&tr.observation.data).unwrap()[tr.action];
        let boot = if tr.terminal {
            0.0
        } else {
            dqn.target.forward_vec(&tr.next_observation.data).unwrap().into_iter().fold(f64::MIN, f64::max)
        };
        total += huber(q - (tr.reward + 0.99 * boot));
    }
    assert!((tape.value(loss).item() - total / trs.len() as f64).abs() < 1e-12);
}

#[test]
fn vtrace_loss_parts_recompute() {
    let mut rng = seeded(31);
    let policy = net(&mut rng, ACTIONS);
    let value = net(&mut rng, 1);
    let segs = segments(&mut rng, &policy, 3, 4);
    let cfg = VTraceConfig { entropy_cost: 0.01, ..VTraceConfig::default() };
    let vt = VTraceLearner::new(policy.clone(), value.clone(), Box::new(DecayedAdam::new(1e-3, 0.0)), Box::new(DecayedAdam::new(1e-3, 0.0)), cfg, Encoding::Raw).unwrap();
    let batch = vt.prepare(&segs).unwrap();
    let mut tape = Tape::new();
    let pb = vt.policy.params().bind_frozen(&mut tape);
    let vb = vt.value.params().bind_frozen(&mut tape);
    let (_, parts) = vt.loss(&vt.policy, &vt.value, &mut tape, &pb, &vb, &batch).unwrap();

    let (mut pg, mut vl, mut ent) = (0.0, 0.0, 0.0);
    for (i, tr) in segs.iter().flat_map(|s| s.transitions()).enumerate() {
        let logits = policy.forward_vec(&tr.observation.data).unwrap();
        let d = DiscretePolicyDist::<f64>::from_logits(&logits, None).unwrap();
        pg -= batch.advantages[i] * d.log_prob(tr.action).unwrap();
        let v = value.forward_vec(&tr.observation.data).unwrap()[0];
        vl += 0.5 * (batch.targets[i] - v).powi(2);
        ent -= d.entropy();
    }
    assert!((parts.policy - pg).abs() < 1e-10);
    assert!((parts.value - vl).abs() < 1e-10);
    assert!((parts.entropy - ent).abs() < 1e-10);
    assert!((parts.total - (pg + 0.5 * vl + 0.01 * ent)).abs() < 1e-10);
}

#[test]
fn dqn_learns_the_better_arm_of_a_two_state_bandit() {
    // state 0: arm 1 pays more; state 1: arm 0 pays more
    let means = [[0.2, 0.8], [0.7, -0.3]];
    let states = [Observation::vector(vec![1.0, 0.0]), Observation::vector(vec![0.0, 1.0])];
    for seed in 0..3 {
        let mut rng = seeded(50 + seed);
        let spec = MlpSpec::new(vec![2, 8, 2], Activation::Tanh).unwrap();
        let cfg = DqnConfig { gamma: 0.0, target_sync_interval: 50, ..DqnConfig::default() };
        let mut dqn = DqnLearner::new(Mlp::<f64>::new(spec, &mut rng), Box::new(DecayedAdam::new(1e-2, 0.0)), cfg, Encoding::Raw).unwrap();
        for _ in 0..400 {
            let batch: Vec<Transition> = (0..32)
                .map(|_| {
                    let s = rng.gen_range(0..2);
                    let a = rng.gen_range(0..2);
                    Transition {
                        observation: states[s].clone(),
                        action: a,
                        reward: means[s][a] + rng.gen_range(-0.5..0.5),
                        next_observation: states[s].clone(),
                        terminal: true,
                        behavior_log_prob: 0.5f64.ln(),
                        action_mask: None,
                        next_action_mask: None,
                    }
                })
                .collect();
            dqn.update(&batch).unwrap();
        }
        assert_eq!(dqn.greedy_action(&states[0], None).unwrap(), 1);
        assert_eq!(dqn.greedy_action(&states[1], None).unwrap(), 0);
    }
}
