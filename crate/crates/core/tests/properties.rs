use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use xrslot::channel::{generate_trace, RadioParams};
use xrslot::dqn::{select_action, QNetwork};
use xrslot::env::{e_max_default, reward, run_episode, RewardParams, XrEnv};
use xrslot::framemodel::simulate_frame;
use xrslot::harness::{coverage_distance, decision_regions, Coverage};
use xrslot::policies::{greedy_oracle, ActionGrid, ConstantPolicy, OraclePolicy};
use xrslot::traffic::{generate_frames, FramePair, TrafficParams};
use xrslot::SystemParams;

fn reward_params(p: &SystemParams, sigma: f64, window: usize) -> RewardParams {
    RewardParams { sigma, e_max: e_max_default(&p.slots, &p.headset, &p.traffic), window }
}

fn arb_slice() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-135.0f64..-85.0, 16).prop_map(|db| db.into_iter().map(|x| 10f64.powf(x / 10.0)).collect())
}

fn arb_frame() -> impl Strategy<Value = FramePair> {
    (50_000.0f64..220_000.0, 230_000.0f64..700_000.0).prop_map(|(d_ul, d_dl)| FramePair { frame_index: 0, d_ul, d_dl })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_is_pure_positive_and_finite(distance in 20.0f64..3_000.0, seed in any::<u64>()) {
        let r = RadioParams::default();
        let a = generate_trace(distance, 64, &r, 1.25e-4, seed).unwrap();
        let b = generate_trace(distance, 64, &r, 1.25e-4, seed).unwrap();
        prop_assert_eq!(&a.gains, &b.gains);
        prop_assert!(a.gains.iter().all(|g| g.is_finite() && *g > 0.0));
    }

    #[test]
    fn frames_respect_truncation(seed in any::<u64>(), std_fraction in 0.0f64..0.6) {
        let t = TrafficParams { std_fraction, ..Default::default() };
        let frames = generate_frames(&t, 200, seed).unwrap();
        let [lo, hi] = t.truncation;
        for f in &frames {
            prop_assert!(f.d_ul >= lo * t.mean_ul() && f.d_ul <= hi * t.mean_ul());
            prop_assert!(f.d_dl >= lo * t.mean_dl() && f.d_dl <= hi * t.mean_dl());
        }
        prop_assert_eq!(frames, generate_frames(&t, 200, seed).unwrap());
    }

    #[test]
    fn oracle_dominates_every_grid_action(frame in arb_frame(), slice in arb_slice(), sigma in 0.05f64..1.0) {
        let p = SystemParams::default();
        let rp = reward_params(&p, sigma, 1);
        let grid = ActionGrid::default_for(&p.slots);
        let (best, r_best) = greedy_oracle(&frame, &slice, &p, &grid, &rp).unwrap();
        prop_assert!(best.validate(&p.slots).is_ok());
        for a in grid.actions() {
            let r = reward(&simulate_frame(&frame, a, &slice, &p).unwrap(), &rp);
            prop_assert!(r_best >= r);
        }
        let (again, _) = greedy_oracle(&frame, &slice, &p, &grid, &rp).unwrap();
        prop_assert_eq!(best, again);
    }

    #[test]
    fn rewards_are_never_positive(frame in arb_frame(), slice in arb_slice(), idx in 0usize..680, sigma in 0.01f64..=1.0) {
        let p = SystemParams::default();
        let grid = ActionGrid::default_for(&p.slots);
        let out = simulate_frame(&frame, &grid.actions()[idx], &slice, &p).unwrap();
        let r = reward(&out, &reward_params(&p, sigma, 1));
        prop_assert!(r <= 0.0);
        if r == 0.0 {
            prop_assert!(!out.fli_ul && !out.fli_dl);
        }
    }

    #[test]
    fn windowed_reward_is_sum_of_frames(window in 1usize..6, idx in 0usize..680, seed in 0u64..1_000) {
        let p = SystemParams::default();
        let grid = ActionGrid::default_for(&p.slots);
        let action = grid.actions()[idx];
        let mut windowed = XrEnv::generate(p.clone(), reward_params(&p, 0.7, window), 400.0, 13, seed, seed + 1).unwrap();
        let mut single = XrEnv::generate(p.clone(), reward_params(&p, 0.7, 1), 400.0, 13, seed, seed + 1).unwrap();
        while !windowed.is_done() {
            let step = windowed.step(&action).unwrap();
            let mut sum = 0.0;
            for _ in 0..step.frame_rewards.len() {
                sum += single.step(&action).unwrap().reward;
            }
            prop_assert_eq!(step.reward, sum);
        }
        prop_assert!(single.is_done());
    }

    #[test]
    fn episodes_are_determined_by_seeds(seed in 0u64..1_000, idx in 0usize..680) {
        let p = SystemParams::default();
        let grid = ActionGrid::default_for(&p.slots);
        let run = |policy: &mut dyn xrslot::policies::Policy| {
            let mut env = XrEnv::generate(p.clone(), reward_params(&p, 0.7, 1), 350.0, 8, seed, seed ^ 0xabc).unwrap();
            run_episode(&mut env, policy).unwrap()
        };
        let mut c = ConstantPolicy::new("c", grid.clone(), idx).unwrap();
        prop_assert_eq!(run(&mut c), run(&mut ConstantPolicy::new("c", grid.clone(), idx).unwrap()));
        let mut o = OraclePolicy::new("o", grid.clone());
        let log = run(&mut o);
        prop_assert_eq!(&log, &run(&mut OraclePolicy::new("o", grid.clone())));
        for rec in &log {
            prop_assert!(rec.n_ul >= 1 && rec.n_ul + rec.n_dl <= 16);
        }
    }

    #[test]
    fn selected_actions_stay_on_the_grid(seed in any::<u64>(), eps in 0.0f64..=1.0, s in prop::array::uniform3(-3.0f64..3.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = QNetwork::random(8, 680, 1.0, &mut rng);
        let a = select_action(&net, &s, eps, &mut rng);
        prop_assert!(a < 680);
        if eps == 0.0 {
            prop_assert_eq!(a, net.argmax(&s));
        }
    }

    #[test]
    fn coverage_grows_with_the_limit(flr in prop::collection::vec(0.0f64..=1.0, 1..14), l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0) {
        let pts: Vec<(f64, f64)> = flr.iter().enumerate().map(|(i, f)| (100.0 + 50.0 * i as f64, *f)).collect();
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let d = |l| match coverage_distance(&pts, l).unwrap() {
            Coverage::Distance(d) => d,
            Coverage::BelowMinimum => 0.0,
        };
        prop_assert!(d(lo) <= d(hi));
    }

    #[test]
    fn regions_partition_the_grid(alpha in prop::collection::vec(0.0f64..=1.0, 1..14)) {
        let pts: Vec<(f64, f64)> = alpha.iter().enumerate().map(|(i, a)| (100.0 + 50.0 * i as f64, *a)).collect();
        let t = decision_regions(&pts, 0.9, 0.1).unwrap();
        prop_assert_eq!(t.points.len(), pts.len());
        prop_assert_eq!(t.regions.first().unwrap().start, pts[0].0);
        prop_assert_eq!(t.regions.last().unwrap().end, pts[pts.len() - 1].0);
        for w in t.regions.windows(2) {
            prop_assert!(w[0].kind != w[1].kind && w[0].end < w[1].start);
        }
        prop_assert_eq!(t.boundaries.len(), t.regions.len() - 1);
    }
}
