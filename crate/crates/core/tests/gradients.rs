//! Analytic gradients against central finite differences.

use gsea_core::learners::{
    DqnConfig, DqnLearner, PpoConfig, PpoLearner, TaskKind, VTraceLearner,
};
use gsea_core::nn::{
    Activation, DecayedAdam, Mlp, MlpSpec, Model, ParamSet, RmsProp, Tape, Tensor, Var,
};
use gsea_core::rng::{seeded, Rng};
use gsea_core::testing::{central_differences, max_relative_error};
use gsea_core::vtrace::{value_grad_direction, value_loss, VTraceConfig};
use gsea_core::{Encoding, Observation, Trajectory, Transition};
use rand::Rng as _;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn random_tensor(rng: &mut Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap()
}

/// Checks `build` (params bound on a tape -> scalar loss) against finite
/// differences of the same forward computation.
fn check(params: &ParamSet<f64>, build: impl Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = build(&mut tape, &bound);
    let grads = tape.backward(loss).unwrap();
    let mut analytic = params.clone();
    analytic.zero_grad();
    analytic.accumulate(&grads, &bound).unwrap();
    let numeric = central_differences(params, H, |p| {
        let mut t = Tape::new();
        let b = p.bind_frozen(&mut t);
        let l = build(&mut t, &b);
        t.value(l).item()
    });
    max_relative_error(&analytic.flat_grads(), &numeric, FLOOR)
}

#[test]
fn elementwise_and_reduction_ops() {
    for seed in 0..20 {
        let mut rng = seeded(seed);
        let params = ParamSet::new(vec![
            random_tensor(&mut rng, 3, 4),
            random_tensor(&mut rng, 4, 5),
            random_tensor(&mut rng, 1, 5),
            random_tensor(&mut rng, 3, 5),
        ]);
        let err = check(&params, |t, b| {
            let h = t.matmul(b[0], b[1]).unwrap();
            let h = t.add_row(h, b[2]).unwrap();
            let a = t.tanh(h);
            let r = t.relu(h);
            let m = t.mul(a, b[3]).unwrap();
            let s = t.sub(m, r).unwrap();
            let sq = t.square(s);
            let e = t.exp(a);
            let lg = t.log(e);
            let hub = t.huber(lg, 0.3);
            let mn = t.min(hub, sq).unwrap();
            let cl = t.clamp(m, -0.2, 0.4);
            let sum = t.add(mn, cl).unwrap();
            let sm = t.softmax(sum);
            let ls = t.log_softmax(h);
            let prod = t.mul(sm, ls).unwrap();
            let rows = t.sum_rows(prod);
            let g = t.gather(ls, &[0, 4, 2]).unwrap();
            let both = t.add(rows, g).unwrap();
            let total = t.mean(both);
            let extra = t.sum(sq);
            let extra = t.scale(extra, 0.1);
            t.add(total, extra).unwrap()
        });
        assert!(err < TOL, "seed {seed}: relative error {err}");
    }
}

#[test]
fn structural_ops() {
    for seed in 0..20 {
        let mut rng = seeded(100 + seed);
        let params = ParamSet::new(vec![
            random_tensor(&mut rng, 4, 6),
            random_tensor(&mut rng, 3, 6),
            random_tensor(&mut rng, 1, 6),
        ]);
        let err = check(&params, |t, b| {
            let left = t.slice_cols(b[0], 0, 3).unwrap();
            let right = t.slice_cols(b[0], 3, 3).unwrap();
            let swapped = t.concat_cols(&[right, left]).unwrap();
            let stacked = t.concat_rows(&[swapped, b[1]]).unwrap();
            let picked = t.select_rows(stacked, &[6, 0, 0, 3, 5]).unwrap();
            let normed = t.layer_norm(picked, 1e-5);
            let scaled = t.mul_row(normed, b[2]).unwrap();
            let scores = t.matmul_nt(scaled, picked).unwrap();
            let resh = t.reshape(scores, 1, 25).unwrap();
            let masked = t
                .add_const(resh, &Tensor::from_vec(1, 25, vec![0.5; 25]).unwrap())
                .unwrap();
            let weighted = t
                .mul_const(masked, Tensor::from_vec(1, 25, (0..25).map(|i| i as f64 / 25.0).collect()).unwrap())
                .unwrap();
            let sm = t.log_softmax(weighted);
            let shifted = t.add_scalar(sm, 1.0);
            let neg = t.neg(shifted);
            t.mean(neg)
        });
        assert!(err < TOL, "seed {seed}: relative error {err}");
    }
}

#[test]
fn chain_rule_by_hand() {
    // (w x)^2 with w = 3, x = 2 -> d/dw = 2 (6) 2 = 24
    let params = ParamSet::new(vec![Tensor::scalar(3.0)]);
    let mut tape = Tape::new();
    let b = params.bind(&mut tape);
    let x = tape.constant(Tensor::scalar(2.0));
    let wx = tape.mul(b[0], x).unwrap();
    let loss = tape.square(wx);
    let g = tape.backward(loss).unwrap();
    assert_eq!(g.get(b[0]).unwrap().item(), 24.0);

    let mut tape = Tape::new();
    let b = params.bind(&mut tape);
    let c = tape.constant(Tensor::scalar(5.0));
    let g = tape.backward(c).unwrap();
    assert!(g.get(b[0]).is_none());
}

#[test]
fn backward_without_forward_is_a_state_error() {
    let tape = Tape::<f64>::new();
    let mut other = Tape::<f64>::new();
    let v = other.leaf(Tensor::scalar(1.0));
    assert!(matches!(
        tape.backward(v),
        Err(gsea_core::Error::State(_))
    ));
}

#[test]
fn mlp_gradients_on_200_parameter_net() {
    let spec = MlpSpec::new(vec![6, 14, 7, 2], Activation::Tanh).unwrap();
    for seed in 0..5 {
        let net = Mlp::<f64>::new(spec.clone(), &mut seeded(seed));
        assert!(net.params().count() >= 200);
        let mut rng = seeded(1000 + seed);
        let x = random_tensor(&mut rng, 5, 6);
        let y = random_tensor(&mut rng, 5, 2);
        let err = check(net.params(), |t, b| {
            let xi = t.constant(x.clone());
            let out = net.forward(t, b, xi).unwrap();
            let yi = t.constant(y.clone());
            let d = t.sub(out, yi).unwrap();
            let sq = t.square(d);
            t.mean(sq)
        });
        assert!(err < TOL, "seed {seed}: relative error {err}");
    }
}

#[test]
fn seeded_forward_matches_straight_line_evaluation() {
    let spec = MlpSpec::new(vec![2, 3, 2], Activation::Relu).unwrap();
    let net = Mlp::<f64>::new(spec, &mut seeded(0));
    let p = &net.params().tensors;
    let x = [1.0, 0.0];
    let mut hidden = [0.0; 3];
    for (j, h) in hidden.iter_mut().enumerate() {
        let mut acc = p[1].value.get(0, j);
        for (i, xi) in x.iter().enumerate() {
            acc += xi * p[0].value.get(i, j);
        }
        *h = acc.max(0.0);
    }
    let mut out = [0.0; 2];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = p[3].value.get(0, k);
        for (j, h) in hidden.iter().enumerate() {
            acc += h * p[2].value.get(j, k);
        }
        *o = acc;
    }
    let got = net.forward_vec(&x).unwrap();
    for (a, b) in got.iter().zip(out) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn value_loss_matches_linear_closed_form() {
    let mut rng = seeded(5);
    for _ in 0..10 {
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let feats: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let preds: Vec<f64> = feats
            .iter()
            .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect();
        let closed = value_grad_direction(&targets, &preds, &feats).unwrap();
        let params = ParamSet::new(vec![Tensor::from_vec(3, 1, w.clone()).unwrap()]);
        let xs = Tensor::from_rows(&feats).unwrap();
        let numeric = central_differences(&params, H, |p| {
            let mut t = Tape::new();
            let b = p.bind_frozen(&mut t);
            let x = t.constant(xs.clone());
            let v = t.matmul(x, b[0]).unwrap();
            let l = value_loss(&mut t, v, &targets).unwrap();
            t.value(l).item()
        });
        assert!(max_relative_error(&closed, &numeric, FLOOR) < TOL);
    }
}

fn random_segment(rng: &mut Rng, len: usize, actions: usize, width: usize, terminal: bool) -> Trajectory {
    let obs = |rng: &mut Rng| Observation::vector((0..width).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let mut trs = Vec::new();
    let mut cur = obs(rng);
    for i in 0..len {
        let next = obs(rng);
        trs.push(Transition {
            observation: cur.clone(),
            action: rng.gen_range(0..actions),
            reward: rng.gen_range(-1.0..1.0),
            next_observation: next.clone(),
            terminal: terminal && i + 1 == len,
            behavior_log_prob: -rng.gen_range(0.2..2.0),
            action_mask: None,
            next_action_mask: None,
        });
        cur = next;
    }
    Trajectory::new(trs).unwrap()
}

#[test]
fn learner_losses_match_finite_differences() {
    for seed in 0..5 {
        let mut rng = seeded(50 + seed);
        let pspec = MlpSpec::new(vec![4, 8, 3], Activation::Relu).unwrap();
        let vspec = MlpSpec::new(vec![4, 8, 1], Activation::Relu).unwrap();
        let policy = Mlp::<f64>::new(pspec.clone(), &mut rng);
        let value = Mlp::<f64>::new(vspec, &mut rng);
        let segs: Vec<_> = (0..3).map(|i| random_segment(&mut rng, 4, 3, 4, i == 0)).collect();

        // V-trace composite
        let vt = VTraceLearner::new(
            policy.clone(),
            value.clone(),
            Box::new(RmsProp::impala_defaults()),
            Box::new(RmsProp::impala_defaults()),
            VTraceConfig { entropy_cost: 0.01, ..Default::default() },
            Encoding::Raw,
        )
        .unwrap();
        let batch = vt.prepare(&segs).unwrap();
        let err = check(policy.params(), |t, b| {
            let vb = vt.value.params().bind_frozen(t);
            vt.loss(&policy, &vt.value, t, b, &vb, &batch).unwrap().0
        });
        assert!(err < TOL, "vtrace policy seed {seed}: {err}");

        // PPO clipped surrogate
        let ppo = PpoLearner::new(
            policy.clone(),
            value.clone(),
            Box::new(DecayedAdam::mgdt_defaults()),
            Box::new(DecayedAdam::mgdt_defaults()),
            PpoConfig { entropy_coef: 0.01, ..PpoConfig::for_task(TaskKind::Jssp) },
            Encoding::Raw,
        )
        .unwrap();
        let pb = ppo.prepare(&segs).unwrap();
        let err = check(policy.params(), |t, b| {
            let vb = ppo.value.params().bind_frozen(t);
            ppo.loss(&policy, &ppo.value, t, b, &vb, &pb).unwrap().0
        });
        assert!(err < TOL, "ppo seed {seed}: {err}");

        // DQN Huber
        let qspec = MlpSpec::new(vec![4, 8, 3], Activation::Relu).unwrap();
        let q = Mlp::<f64>::new(qspec.clone(), &mut rng);
        let dqn = DqnLearner::new(q, Box::new(DecayedAdam::mgdt_defaults()), DqnConfig::default(), Encoding::Raw)
            .unwrap();
        let trs: Vec<Transition> = segs.iter().flat_map(|s| s.transitions().to_vec()).collect();
        let db = dqn.prepare(&trs).unwrap();
        let err = check(dqn.online.params(), |t, b| {
            dqn.loss(&dqn.online, t, b, &db).unwrap()
        });
        assert!(err < TOL, "dqn seed {seed}: {err}");
    }
}

