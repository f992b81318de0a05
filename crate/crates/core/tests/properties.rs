use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use streampred_core::assignment::*;
use streampred_core::decoders::*;
use streampred_core::geometry::*;
use streampred_core::map_encoding::*;
use streampred_core::math::{derive_seed, rng_from, uniform_matrix, PI};
use streampred_core::metrics::*;
use streampred_core::query_bank::*;
use streampred_core::scenario::*;

fn coord() -> impl Strategy<Value = f64> {
    -1e3..1e3f64
}

fn traj(max_len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((coord(), coord()), 1..max_len)
}

fn to_traj(v: &[(f64, f64)]) -> Trajectory {
    Trajectory::new(v.iter().map(|&(x, y)| Point2::new(x, y)).collect(), FrameTag::Global)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transform_round_trip(v in traj(20), ox in coord(), oy in coord(), h in -10.0..10.0f64) {
        let t = to_traj(&v);
        let f = FrameTransform::new(Point2::new(ox, oy), h);
        let back = transform_trajectory(&transform_trajectory(&t, &f, Direction::Forward).unwrap(), &f, Direction::Inverse).unwrap();
        for (a, b) in t.waypoints.iter().zip(&back.waypoints) {
            prop_assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn allocentric_frame_centres_agent(px in coord(), py in coord(), vx in -20.0..20.0f64, vy in -20.0..20.0f64) {
        prop_assume!(Point2::new(vx, vy).norm() > 1e-3);
        let v = Point2::new(vx, vy);
        let f = FrameTransform::new(Point2::new(px, py), v.angle());
        prop_assert!(f.to_local(Point2::new(px, py)).norm() < 1e-9);
        let lv = f.vector_to_local(v);
        prop_assert!(lv.x.abs() < 1e-9 && lv.y > 0.0);
    }

    #[test]
    fn displacement_symmetric_and_translation_invariant(
        v in prop::collection::vec((coord(), coord(), coord(), coord()), 1..15),
        dx in coord(), dy in coord()
    ) {
        let a = Trajectory::new(v.iter().map(|t| Point2::new(t.0, t.1)).collect(), FrameTag::Global);
        let b = Trajectory::new(v.iter().map(|t| Point2::new(t.2, t.3)).collect(), FrameTag::Global);
        let (ade, fde) = displacement_errors(&a, &b).unwrap();
        prop_assert_eq!(displacement_errors(&b, &a).unwrap(), (ade, fde));
        let d = Point2::new(dx, dy);
        let shift = |t: &Trajectory| Trajectory::new(t.waypoints.iter().map(|&p| p + d).collect(), FrameTag::Global);
        let (ade2, fde2) = displacement_errors(&shift(&a), &shift(&b)).unwrap();
        prop_assert!((ade - ade2).abs() < 1e-9 && (fde - fde2).abs() < 1e-9);
        let max = a.waypoints.iter().zip(&b.waypoints).map(|(p, q)| p.distance(*q)).fold(0.0, f64::max);
        prop_assert!(fde <= max && ade <= max + 1e-9);
    }

    #[test]
    fn hungarian_never_double_assigns(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let (r, c) = (rng.random_range(0..9), rng.random_range(0..9));
        let m = CostMatrix::from_fn(r, c, |_, _| if rng.random::<f64>() < 0.3 { f64::INFINITY } else { rng.random_range(-1.0..1.0) });
        let out = hungarian(&m).unwrap();
        let mut rows: Vec<usize> = out.pairs.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = out.pairs.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), out.pairs.len());
        prop_assert_eq!(cols.len(), out.pairs.len());
        prop_assert!(out.pairs.iter().all(|&(i, j)| m.get(i, j).is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn attention_rows_are_distributions(seed in any::<u64>(), nq in 1usize..6, nk in 1usize..8, d_k in 2usize..10) {
        let d_h = 8;
        let p = AttentionParams::seeded(d_h, d_k, seed).unwrap();
        let mut rng = rng_from(seed ^ 1);
        let q = uniform_matrix(&mut rng, nq, d_h, 3.0);
        let kv = uniform_matrix(&mut rng, nk, d_h, 3.0);
        let w = attention_weights(&q, &kv, &p).unwrap();
        for i in 0..nq {
            prop_assert!((w.row(i).sum() - 1.0).abs() < 1e-9);
            prop_assert!(w.row(i).iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn attention_key_permutation_invariant(seed in any::<u64>(), nk in 1usize..8) {
        let d_h = 10;
        let p = AttentionParams::seeded(d_h, 6, seed).unwrap();
        let mut rng = rng_from(seed ^ 2);
        let q = uniform_matrix(&mut rng, 3, d_h, 2.0);
        let kv = uniform_matrix(&mut rng, nk, d_h, 2.0);
        let mut perm: Vec<usize> = (0..nk).collect();
        for i in (1..nk).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let kv2 = DMatrix::from_fn(nk, d_h, |i, j| kv[(perm[i], j)]);
        let a = cross_attention_update(&q, &kv, &p).unwrap();
        let b = cross_attention_update(&q, &kv2, &p).unwrap();
        prop_assert!((a.queries - b.queries).amax() < 1e-9);
    }

    #[test]
    fn softmax_shift_invariant(z in prop::collection::vec(-50.0..50.0f64, 1..12), c in -100.0..100.0f64) {
        let a = softmax(&z);
        let shifted: Vec<f64> = z.iter().map(|x| x + c).collect();
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn layer_norm_moments(v in prop::collection::vec(-100.0..100.0f64, 2..64)) {
        let x = DVector::from_vec(v);
        prop_assume!(x.iter().any(|&a| (a - x[0]).abs() > 1e-3));
        let y = standardize(&x);
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let var = y.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bank_keeps_last_states(cap in 1usize..6, n in 0usize..15) {
        let mut bank = QueryMemoryBank::new(cap);
        let states: Vec<DVector<f64>> = (0..n).map(|i| DVector::from_element(3, i as f64)).collect();
        for s in &states {
            bank = bank_push(bank, TrackId(1), s.clone());
            prop_assert!(bank.len(TrackId(1)) <= cap);
        }
        let keep = n.min(cap);
        let got: Vec<DVector<f64>> = bank.history(TrackId(1)).into_iter().cloned().collect();
        prop_assert_eq!(got, states[n - keep..].to_vec());
    }

    #[test]
    fn polyline_feature_ignores_duplicates_and_order(seed in any::<u64>(), n in 1usize..6) {
        let p = MapEncoderParams::seeded(12, seed);
        let mut rng = rng_from(seed);
        let mut pt = Point2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let segs: Vec<MapSegment> = (0..n).map(|k| {
            let end = pt + Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let s = MapSegment { start: pt, end, attribute: 1, ordinal: k as u32 };
            pt = end;
            s
        }).collect();
        let base = encode_polylines(&[MapPolyline { id: 0, segments: segs.clone() }], &p);
        let mut shuffled = segs.clone();
        shuffled.reverse();
        shuffled.push(segs[0]);
        let other = encode_polylines(&[MapPolyline { id: 0, segments: shuffled }], &p);
        prop_assert_eq!(base.features, other.features);
    }

    #[test]
    fn nms_output_separated_subset(seed in any::<u64>(), n in 0usize..40, k in 1usize..8, radius in 0.5..4.0f64) {
        let mut rng = rng_from(seed);
        let cands: Vec<GoalCandidate> = (0..n).map(|_| GoalCandidate {
            position: Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)),
            score: rng.random_range(0.0..1.0),
            offset: Point2::ZERO,
        }).collect();
        let out = nms_select(&cands, k, radius).unwrap();
        prop_assert!(out.len() <= k);
        prop_assert!(out.iter().all(|c| cands.contains(c)));
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                prop_assert!(out[i].goal().distance(out[j].goal()) > radius);
            }
        }
        prop_assert_eq!(nms_select(&cands, k, radius).unwrap(), out);
    }

    #[test]
    fn variety_loss_is_a_minimum(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let t = rng.random_range(1..8);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| Trajectory::new((0..t).map(|_| Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect(), FrameTag::Allocentric);
        let gt = mk(&mut rng);
        let modes: Vec<Trajectory> = (0..4).map(|_| mk(&mut rng)).collect();
        let set = TrajectoryModeSet::new(modes.clone(), vec![0.25; 4]).unwrap();
        let v = variety_loss(&set, &gt, 1.0).unwrap();
        prop_assert!(v >= 0.0);
        // the selected mode is closest in L2 sum, so its smooth-l1 loss is
        // bounded by that distance sum times sqrt(2)
        let (_, d) = variety_select(&set, &gt).unwrap();
        prop_assert!(v <= std::f64::consts::SQRT_2 * d + 1e-9);
        prop_assert!(modes.iter().all(|m| m.waypoints.iter().zip(&gt.waypoints).map(|(a, b)| a.distance(*b)).sum::<f64>() >= d));
    }

    #[test]
    fn epa_rigid_invariance_and_penalty(seed in any::<u64>(), angle in -PI..PI, tx in coord(), ty in coord()) {
        let mut rng = rng_from(seed);
        let cfg = MetricConfig { t_future: 3, ..MetricConfig::default() };
        let n = rng.random_range(1..6);
        let mut preds = Vec::new();
        let mut gts = Vec::new();
        for k in 0..n {
            let at = Point2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
            let fut = Trajectory::new((1..=3).map(|s| at + Point2::new(0.0, s as f64)).collect(), FrameTag::Global);
            let jitter = Point2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let t = if rng.random::<bool>() { AgentType::Vehicle } else { AgentType::Pedestrian };
            let pf = Trajectory::new(fut.waypoints.iter().map(|&p| p + jitter).collect(), FrameTag::Global);
            preds.push(PredictedAgent { track_id: TrackId(k), agent_type: t, position: at + jitter, modes: TrajectoryModeSet::new(vec![pf], vec![1.0]).unwrap() });
            gts.push(GroundTruthFuture { track_id: TrackId(k), agent_type: t, position: at, future: Some(fut) });
        }
        let base = evaluate_step(&preds, &gts, &cfg).unwrap();
        let e0 = epa(&base, 0.5);
        for v in e0.per_type.iter().flatten() {
            prop_assert!(*v <= 1.0);
        }
        let f = FrameTransform::new(Point2::new(tx, ty), angle);
        let mv = |p: Point2| f.to_local(p);
        let mvt = |t: &Trajectory| Trajectory::new(t.waypoints.iter().map(|&p| mv(p)).collect(), FrameTag::Global);
        let preds2: Vec<PredictedAgent> = preds.iter().map(|a| PredictedAgent { position: mv(a.position), modes: TrajectoryModeSet::new(vec![mvt(&a.modes.modes[0])], vec![1.0]).unwrap(), ..a.clone() }).collect();
        let gts2: Vec<GroundTruthFuture> = gts.iter().map(|g| GroundTruthFuture { position: mv(g.position), future: g.future.as_ref().map(mvt), ..g.clone() }).collect();
        let moved = evaluate_step(&preds2, &gts2, &cfg).unwrap();
        prop_assert_eq!(epa(&moved, 0.5), e0);
        // one far-away false positive of a type with ground truth
        let t = gts[0].agent_type;
        let mut extra = preds.clone();
        extra.push(PredictedAgent { track_id: TrackId(999), agent_type: t, position: Point2::new(1e4, 1e4), ..preds[0].clone() });
        let e1 = epa(&evaluate_step(&extra, &gts, &cfg).unwrap(), 0.5);
        let n_gt = base.counters(t).n_gt as f64;
        // exact in real arithmetic; (h - a)/n and h/n - a/n may differ in the last ulp
        prop_assert!((e1.per_type[t.index()].unwrap() - (e0.per_type[t.index()].unwrap() - 0.5 / n_gt)).abs() < 1e-12);
        for e in match_step(&preds, &gts, &cfg).unwrap().errors {
            prop_assert_eq!(e.hit, e.min_fde <= cfg.tau_epa);
            prop_assert!(e.min_fde >= 0.0);
            let g = gts.iter().find(|g| g.track_id == e.gt_track).unwrap();
            prop_assert_eq!(g.agent_type, e.agent_type);
        }
    }

    #[test]
    fn generated_scenes_validate(seed in any::<u64>()) {
        let cfg = ScenarioConfig { occlusion_gap_frames: 3, ..ScenarioConfig::default() };
        let s = generate_synthetic(&cfg, seed).unwrap();
        prop_assert!(s.validate().is_ok());
        for a in &s.agents {
            let spans = a.presence_spans().len();
            if a.archetype == Some(Archetype::CrossingPedestrian) {
                prop_assert!(spans <= 2);
            } else {
                prop_assert_eq!(spans, 1);
            }
        }
    }
}

#[test]
fn feature_oracle_separates_close_states() {
    let p = FeatureOracleParams::new(16, 0.0, 3).unwrap();
    let mut rng = rng_from(0);
    let base = SemanticState {
        position: Point2::new(12.0, -4.0),
        velocity: Point2::new(1.0, 0.5),
        intent: Intent::None,
        agent_type: AgentType::Vehicle,
        size: BoxSize { length: 4.5, width: 1.9, height: 1.6 },
    };
    let a = feature_oracle(&base, &p, &mut rng).unwrap();
    for (dx, dy) in [(1e-6, 0.0), (0.0, 1e-6)] {
        let moved = SemanticState { position: base.position + Point2::new(dx, dy), ..base };
        assert_ne!(feature_oracle(&moved, &p, &mut rng).unwrap(), a);
    }
    for intent in [Intent::TurnLeft, Intent::TurnRight, Intent::Stopping] {
        assert_ne!(feature_oracle(&SemanticState { intent, ..base }, &p, &mut rng).unwrap(), a);
    }
}

#[test]
fn supervision_losses_zero_when_perfect() {
    let cfg = BoxCostConfig::default();
    let bbox = BoxParams {
        center: Point3::new(3.0, 4.0, 0.8),
        size: BoxSize { length: 4.5, width: 1.9, height: 1.6 },
        yaw: 0.0,
        velocity: Point2::ZERO,
    };
    let gt = [GtObject { track_id: TrackId(4), agent_type: AgentType::Vehicle, bbox }];
    let perfect = vec![
        DetectionOutput { probs: ClassProbs { vehicle: 1.0, pedestrian: 0.0, empty: 0.0 }, bbox },
        DetectionOutput { probs: ClassProbs { vehicle: 0.0, pedestrian: 0.0, empty: 1.0 }, bbox },
    ];
    let a = supervise_queries(&SupervisionAssignment::empty(2), &perfect, &gt, &cfg).unwrap();
    assert_eq!(supervision_losses(&a, &perfect, &cfg).unwrap(), (0.0, 0.0));
    let mut rng = rng_from(derive_seed(1, &[2]));
    for _ in 0..50 {
        let o = rng.random_range(0.0..1.0);
        let noisy: Vec<DetectionOutput> = perfect
            .iter()
            .map(|d| DetectionOutput { probs: ClassProbs { vehicle: o, pedestrian: 0.0, empty: 1.0 - o }, ..*d })
            .collect();
        let (c, b) = supervision_losses(&a, &noisy, &cfg).unwrap();
        assert!(c >= 0.0 && b >= 0.0);
    }
}

#[test]
fn map_fusion_two_by_two_oracle() {
    let d_h = 6;
    let params = AttentionParams::seeded(d_h, d_h, 17).unwrap();
    let enc = MapEncoderParams::seeded(d_h, 5);
    let poly = |id: u32, x: f64| MapPolyline {
        id,
        segments: vec![
            MapSegment { start: Point2::new(x, 0.0), end: Point2::new(x, 5.0), attribute: 1, ordinal: 0 },
            MapSegment { start: Point2::new(x, 5.0), end: Point2::new(x + 1.0, 10.0), attribute: 1, ordinal: 1 },
        ],
    };
    let map = encode_polylines(&[poly(0, -3.5), poly(1, 3.5)], &enc);
    let q = uniform_matrix(&mut rng_from(3), 2, d_h, 1.0);
    let got = fuse_map(&q, &map, &params).unwrap();
    // explicit loops: logits, softmax, weighted values, residual, FFN, layer norm
    for i in 0..2 {
        let qi: Vec<f64> = (0..d_h).map(|c| q[(i, c)]).collect();
        let proj = |x: &[f64], w: &DMatrix<f64>| -> Vec<f64> {
            (0..w.ncols()).map(|c| (0..d_h).map(|r| x[r] * w[(r, c)]).sum()).collect()
        };
        let qp = proj(&qi, &params.w_q);
        let logits: Vec<f64> = map
            .features
            .iter()
            .map(|f| {
                let kp = proj(f.as_slice(), &params.w_k);
                qp.iter().zip(&kp).map(|(a, b)| a * b).sum::<f64>() / (d_h as f64).sqrt()
            })
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let w: Vec<f64> = e.iter().map(|x| x / e.iter().sum::<f64>()).collect();
        let mut x = qi.clone();
        for (wk, f) in w.iter().zip(&map.features) {
            let v = proj(f.as_slice(), &params.w_v);
            for c in 0..d_h {
                x[c] += wk * v[c];
            }
        }
        let ffn = &params.ffn;
        let h: Vec<f64> = (0..d_h).map(|r| ((0..d_h).map(|c| ffn.w1[(r, c)] * x[c]).sum::<f64>() + ffn.b1[r]).max(0.0)).collect();
        let y: Vec<f64> = (0..d_h).map(|r| x[r] + (0..d_h).map(|c| ffn.w2[(r, c)] * h[c]).sum::<f64>() + ffn.b2[r]).collect();
        let mean = y.iter().sum::<f64>() / d_h as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d_h as f64;
        for c in 0..d_h {
            let expect = (y[c] - mean) / (var + 1e-12).sqrt();
            assert!((got[(i, c)] - expect).abs() < 1e-9, "query {i} coord {c}");
        }
    }
}
