use super::blocks::{encode_objects, World};
use super::family::{labels as family_labels, FamilyTree, Gender};
use super::graph::{labels as graph_labels, Graph};
use super::sorting::encode_slots;
use super::*;
use crate::rng::rng_from;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeSet;

fn random_perm(m: usize, seed: u64) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..m).collect();
    pi.shuffle(&mut rng_from(seed));
    pi
}

fn assert_binary(ts: &[PredTensor]) {
    for t in ts {
        assert!(t.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

// ---- family tree -------------------------------------------------------

#[test]
fn forced_parent_link() {
    use Gender::*;
    let tree = FamilyTree::from_links(vec![Male, Female], vec![None, Some(0)], vec![None, None]).unwrap();
    let [_, _, father, _] = tree.base_relations();
    assert_eq!(father.count(), 1);
    assert!(father.get(&[0, 1]));
}

#[test]
fn from_links_rejects_bad_trees() {
    use Gender::*;
    assert!(FamilyTree::from_links(vec![Female, Male], vec![None, Some(0)], vec![None, None]).is_none());
    assert!(FamilyTree::from_links(vec![Male, Male], vec![Some(1), Some(0)], vec![None, None]).is_none());
}

#[test]
fn family_generation_is_deterministic() {
    assert_eq!(FamilyTree::generate(20, 3).unwrap(), FamilyTree::generate(20, 3).unwrap());
    assert_ne!(FamilyTree::generate(20, 3).unwrap(), FamilyTree::generate(20, 4).unwrap());
    assert!(FamilyTree::generate(1, 0).is_err());
}

#[test]
fn has_father_rate_is_non_degenerate() {
    let (mut pos, mut total) = (0usize, 0usize);
    for seed in 0..10_000 {
        let t = FamilyTree::generate(20, seed).unwrap();
        pos += t.father.iter().filter(|f| f.is_some()).count();
        total += t.len();
    }
    let rate = pos as f64 / total as f64;
    assert!(rate > 0.0 && rate < 1.0, "rate {rate}");
}

#[test]
fn small_family_labels() {
    use Gender::*;
    // 0 father of 2, 2 father of 3; 1 is unrelated.
    let tree = FamilyTree::from_links(
        vec![Male, Female, Male, Female],
        vec![None, None, Some(0), Some(2)],
        vec![None, None, None, None],
    )
    .unwrap();
    let hf = family_labels(&tree, TaskKind::HasFather).unwrap();
    assert_eq!((0..4).filter(|&i| hf.get(&[i])).collect::<Vec<_>>(), vec![2, 3]);
    let gp = family_labels(&tree, TaskKind::IsGrandparent).unwrap();
    assert_eq!(gp.count(), 1);
    assert!(gp.get(&[0, 3]));
}

/// Kinship computed by walking parent links, independent of the rules.
fn traversal_oracle(t: &FamilyTree, task: TaskKind) -> Relation {
    let m = t.len();
    let is_parent = |p: usize, c: usize| t.father[c] == Some(p) || t.mother[c] == Some(p);
    let siblings = |a: usize, b: usize| a != b && t.parents(a).any(|p| is_parent(p, b));
    let brother = |a: usize, b: usize| t.gender[a] == Gender::Male && siblings(a, b);
    match task {
        TaskKind::HasFather => Relation::from_fn(1, m, |i| t.father[i[0]].is_some()),
        TaskKind::HasSister => {
            Relation::from_fn(1, m, |i| (0..m).any(|s| t.gender[s] == Gender::Female && siblings(s, i[0])))
        }
        TaskKind::IsGrandparent => Relation::from_fn(2, m, |i| t.parents(i[1]).any(|p| is_parent(i[0], p))),
        TaskKind::IsUncle => Relation::from_fn(2, m, |i| t.parents(i[1]).any(|p| brother(i[0], p))),
        TaskKind::IsMGUncle => Relation::from_fn(2, m, |i| {
            t.mother[i[1]].is_some_and(|mo| t.parents(mo).any(|g| brother(i[0], g)))
        }),
        _ => unreachable!(),
    }
}

#[test]
fn family_labels_match_traversal() {
    let targets = [TaskKind::HasFather, TaskKind::HasSister, TaskKind::IsGrandparent, TaskKind::IsUncle, TaskKind::IsMGUncle];
    let mut positives = [0usize; 5];
    for seed in 0..100 {
        let tree = FamilyTree::generate(12 + (seed as usize % 9), seed).unwrap();
        for (k, &task) in targets.iter().enumerate() {
            let got = family_labels(&tree, task).unwrap();
            assert_eq!(got, traversal_oracle(&tree, task), "{task} seed {seed}");
            positives[k] += got.count();
        }
    }
    assert!(positives.iter().all(|&p| p > 0), "{positives:?}");
}

// ---- graphs ------------------------------------------------------------

#[test]
fn two_node_graph() {
    let g = Graph::generate(2, (1, 1), 0, true).unwrap();
    assert!(g.edges[0][1] && g.edges[1][0]);
    assert!(!g.edges[0][0] && !g.edges[1][1]);
    assert!(Graph::generate(2, (2, 3), 0, false).is_err());
    assert_eq!(Graph::generate(10, (1, 4), 5, false), Graph::generate(10, (1, 4), 5, false));
}

#[test]
fn directed_degrees_follow_uniform_law() {
    let mut hist = [0usize; 5];
    for seed in 0..1000 {
        let g = Graph::generate(10, (1, 4), seed, false).unwrap();
        for x in 0..10 {
            assert!(!g.edges[x][x]);
            hist[g.out_degree(x)] += 1;
        }
    }
    assert_eq!(hist[0], 0);
    // 10^4 draws per histogram; each bin expects 2500 with sd ~43.
    for &h in &hist[1..] {
        assert!((h as f64 - 2500.0).abs() < 5.0 * 43.3, "{hist:?}");
    }
}

#[test]
fn small_graph_labels() {
    let g = Graph::from_edges(4, &[(0, 1), (1, 2)], false);
    let c = graph_labels(&g, TaskKind::Connectivity(4)).unwrap();
    assert!(c.get(&[0, 2]) && !c.get(&[0, 3]) && !c.get(&[2, 0]));
    let g2 = Graph::from_edges(4, &[(0, 1), (0, 2), (1, 2), (3, 0)], false);
    let d = graph_labels(&g2, TaskKind::OutDegree(2)).unwrap();
    assert_eq!((0..4).map(|i| d.get(&[i])).collect::<Vec<_>>(), vec![true, false, false, false]);
    let mut g3 = Graph::from_edges(3, &[(0, 1), (2, 0)], false);
    g3.colors = vec![0, 0, 2];
    let r = graph_labels(&g3, TaskKind::AdjacentToRed).unwrap();
    assert_eq!((0..3).map(|i| r.get(&[i])).collect::<Vec<_>>(), vec![true, false, true]);
}

#[test]
fn connectivity_matches_floyd_warshall() {
    for seed in 0..100 {
        let m = 6 + seed as usize % 10;
        let g = Graph::generate(m, (1, 3), seed, false).unwrap();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; m]; m];
        for x in 0..m {
            d[x][x] = 0;
            for y in 0..m {
                if g.edges[x][y] {
                    d[x][y] = 1;
                }
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        for k in [1, 2, 4, 6] {
            let got = graph_labels(&g, TaskKind::Connectivity(k)).unwrap();
            assert_eq!(got, Relation::from_fn(2, m, |i| d[i[0]][i[1]] <= k));
        }
    }
}

// ---- encoders ----------------------------------------------------------

#[test]
fn blocks_encoding_trichotomy() {
    let env = BlocksEnv::generate(5, 9).unwrap();
    let obs = env.observe();
    assert_binary(&obs);
    let t = &obs[2];
    let m = env.num_objects();
    for x in 0..m {
        for y in 0..m {
            if x != y {
                for attr in 0..4 {
                    let s: f64 = (0..3).map(|c| t.get(&[x, y], 3 * attr + c)).sum();
                    assert_eq!(s, 1.0);
                }
            }
        }
    }
}

#[test]
fn sorted_array_values_mirror_indices() {
    let env = SortEnv::new((0..6).collect());
    let t = env.encode();
    for c in 0..3 {
        assert_eq!(t.select_channels(&[c]), t.select_channels(&[3 + c]));
    }
}

#[test]
fn encodings_commute_with_relabeling() {
    for seed in 0..20 {
        let pi = random_perm(9, seed);
        let tree = FamilyTree::generate(9, seed).unwrap();
        let a = tree.relabel(&pi).premises();
        let b: Vec<_> = tree.premises().iter().map(|t| t.relabel(&pi).unwrap()).collect();
        assert_eq!(a, b);
        assert_eq!(
            family_labels(&tree.relabel(&pi), TaskKind::IsUncle).unwrap().to_tensor(),
            family_labels(&tree, TaskKind::IsUncle).unwrap().to_tensor().relabel(&pi).unwrap()
        );

        let g = Graph::generate(9, (1, 4), seed, false).unwrap();
        let a = g.relabel(&pi).premises();
        let b: Vec<_> = g.premises().iter().map(|t| t.relabel(&pi).unwrap()).collect();
        assert_eq!(a, b);

        let p = PathEnv::generate(9, seed, EnvMode::Train).unwrap();
        let a = p.relabel(&pi).observe();
        let b: Vec<_> = p.observe().iter().map(|t| t.relabel(&pi).unwrap()).collect();
        assert_eq!(a, b);

        // Attribute-encoded tasks: shuffling the object list relabels the encoding.
        let blocks = BlocksEnv::generate(4, seed).unwrap();
        let objects = blocks.objects();
        let pi = random_perm(objects.len(), seed + 100);
        let mut shuffled = objects.clone();
        for (i, o) in objects.iter().enumerate() {
            shuffled[pi[i]] = *o;
        }
        assert_eq!(encode_objects(&shuffled), encode_objects(&objects).relabel(&pi).unwrap());

        let sort = SortEnv::generate(7, seed).unwrap();
        let slots: Vec<_> = sort.array.iter().copied().enumerate().collect();
        let pi = random_perm(7, seed + 200);
        let mut shuffled = slots.clone();
        for (i, s) in slots.iter().enumerate() {
            shuffled[pi[i]] = *s;
        }
        assert_eq!(encode_slots(&shuffled), encode_slots(&slots).relabel(&pi).unwrap());
    }
}

// ---- environments ------------------------------------------------------

#[test]
fn sorting_one_swap() {
    let mut env = SortEnv::new(vec![1, 0]);
    let out = env.step(1).unwrap();
    assert!(out.solved && out.done);
    assert!((out.reward - 0.99).abs() < 1e-15);
    assert!(matches!(env.step(1), Err(TaskError::Finished)));
    let mut env = SortEnv::new(vec![2, 1, 0]);
    assert!(matches!(env.step(4), Err(TaskError::BadAction { .. })));
    assert!(matches!(env.step(9), Err(TaskError::BadAction { .. })));
}

#[test]
fn blocks_invalid_move_is_noop() {
    // Block 1 on block 2 on the ground; target differs.
    let current = World { on: vec![0, 2, 0] };
    let target = World { on: vec![0, 0, 1] };
    let mut env = BlocksEnv::new(current, target);
    let before = env.clone();
    // Move 2 onto ground: 2 is covered by 1, so nothing happens.
    let out = env.step(2 * 3).unwrap();
    assert!(!out.applied && !out.done);
    assert_eq!(out.reward, -0.01);
    assert_eq!(env.current, before.current);
    // Move 1 onto 2's top: 2 is not placeable either (1 sits there).
    assert!(!env.applies(3 + 2) || env.current.on[1] == 2);
    // Solve: 1 to ground, then 2 onto 1.
    assert!(!env.step(3).unwrap().solved);
    let out = env.step(2 * 3 + 1).unwrap();
    assert!(out.solved && out.done);
    assert!((out.reward - 0.99).abs() < 1e-15);
}

#[test]
fn blocks_coordinates_follow_stacks() {
    let w = World { on: vec![0, 0, 1, 0] };
    assert_eq!(w.coordinates(), vec![(0, 0), (1, 1), (1, 2), (3, 1)]);
    assert!(w.is_valid());
    assert!(!World { on: vec![0, 2, 1] }.is_valid());
    assert!(!World { on: vec![0, 0, 1, 1] }.is_valid());
}

#[test]
fn path_along_shortest_route() {
    // Chain 0-1-2-3-4 plus a detour from 0 to 5.
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 5)], true);
    let mut env = PathEnv::new(g, 0, 4).unwrap();
    assert_eq!(env.step_limit(), 4);
    let mut ep = Episode::default();
    for next in [1, 2, 3, 4] {
        let obs = env.observe();
        let out = env.step(next).unwrap();
        ep.transitions.push(Transition { observation: obs, head_input: HeadInput::None, action: next, reward: out.reward, legal: None });
        ep.success = out.solved;
    }
    assert!(ep.success && env.is_done());
    let v = ep.returns(GAMMA);
    let expect = -0.01 * (1.0 + 0.99 + 0.99f64.powi(2)) + 0.99f64.powi(3) * 0.99;
    assert!((v[0] - expect).abs() < 1e-12);
}

#[test]
fn path_noop_and_truncation() {
    let g = Graph::from_edges(4, &[(0, 1), (1, 2)], true);
    let mut env = PathEnv::new(g, 0, 2).unwrap();
    let out = env.step(3).unwrap();
    assert!(!out.applied && !out.done && env.current == 0);
    let out = env.step(1).unwrap();
    assert!(out.done && !out.solved, "limit is the distance, 2");
    assert!(PathEnv::new(Graph::from_edges(3, &[(0, 1)], true), 0, 2).is_none());
}

#[test]
fn path_generation_respects_distance_modes() {
    for seed in 0..50 {
        let e = PathEnv::generate(10, seed, EnvMode::Eval).unwrap();
        assert_eq!(e.distance(), 4);
        let t = PathEnv::generate(3 + seed as usize % 10, seed, EnvMode::Train).unwrap();
        assert!((1..=5).contains(&t.distance()));
        assert_ne!(t.current, t.target);
    }
    assert!(PathEnv::generate(4, 0, EnvMode::Eval).is_err());
}

#[test]
fn rl_env_dispatch() {
    for task in [TaskKind::Sorting, TaskKind::Path, TaskKind::BlocksWorld] {
        let env = RlEnv::generate(task, 5, 1, EnvMode::Train).unwrap();
        assert_eq!(env.task(), task);
        assert_eq!(env.size(), 5);
        assert!(!env.is_done());
        let obs = env.observe();
        let cfg = task.model_config().unwrap();
        for (r, t) in obs.iter().enumerate() {
            assert_eq!(t.channels(), cfg.input_channels[r]);
        }
    }
    assert!(RlEnv::generate(TaskKind::HasFather, 5, 1, EnvMode::Train).is_err());
}

#[test]
fn shouldmove_instances_carry_positive_labels() {
    let mut pos = 0;
    for seed in 0..50 {
        let inst = generate_labeled(TaskKind::ShouldMove, 4, seed).unwrap();
        assert_eq!(inst.num_objects(), 10);
        pos += inst.labels.count();
    }
    assert!(pos > 0);
}

#[test]
fn labeled_instances_fit_their_presets() {
    for task in [TaskKind::HasFather, TaskKind::IsMGUncle, TaskKind::AdjacentToRed, TaskKind::Connectivity(4), TaskKind::OutDegree(2), TaskKind::ShouldMove] {
        let inst = generate_labeled(task, 6, 2).unwrap();
        assert_binary(&inst.premises);
        assert_eq!(Some(inst.labels.arity()), task.label_arity());
        let cfg = task.model_config().unwrap();
        cfg.validate().unwrap();
        for (r, t) in inst.premises.iter().enumerate() {
            assert_eq!(t.channels(), cfg.input_channels[r], "{task}");
        }
    }
}

#[test]
fn task_names_round_trip() {
    let all = [
        TaskKind::HasFather,
        TaskKind::HasSister,
        TaskKind::IsGrandparent,
        TaskKind::IsUncle,
        TaskKind::IsMGUncle,
        TaskKind::AdjacentToRed,
        TaskKind::Connectivity(4),
        TaskKind::Connectivity(6),
        TaskKind::OutDegree(1),
        TaskKind::OutDegree(2),
        TaskKind::ShouldMove,
        TaskKind::Sorting,
        TaskKind::Path,
        TaskKind::BlocksWorld,
    ];
    let names: BTreeSet<String> = all.iter().map(|k| k.to_string()).collect();
    assert_eq!(names.len(), all.len());
    for k in all {
        assert_eq!(k.to_string().parse::<TaskKind>().unwrap(), k);
        k.model_preset().unwrap();
    }
    assert!("4-outdegre".parse::<TaskKind>().is_err());
    assert!("0-connectivity".parse::<TaskKind>().is_err());
    assert!(matches!(TaskKind::Connectivity(3).model_preset(), Err(TaskError::NoPreset(_))));
}

proptest! {
    #[test]
    fn returns_satisfy_recurrence(rewards in proptest::collection::vec(-1.0f64..1.0, 0..20), gamma in 0.01f64..=1.0) {
        let v = discounted_returns(&rewards, gamma);
        for t in 0..rewards.len() {
            let next = v.get(t + 1).copied().unwrap_or(0.0);
            prop_assert!((v[t] - (rewards[t] + gamma * next)).abs() < 1e-12);
        }
    }

    #[test]
    fn blocks_steps_preserve_validity(seed in 0u64..500, n in 1usize..7) {
        let mut env = BlocksEnv::generate(n, seed).unwrap();
        let mut rng = rng_from(seed ^ 77);
        prop_assert!(env.current.is_valid() && env.target.is_valid());
        while !env.is_done() {
            let a = loop {
                let a = rng.random_range(0..env.num_actions());
                if a / (n + 1) != a % (n + 1) {
                    break a;
                }
            };
            let before = env.current.clone();
            let out = env.step(a).unwrap();
            prop_assert!(env.current.is_valid());
            if !out.applied {
                prop_assert_eq!(&env.current, &before);
            }
            prop_assert!(env.steps_taken() <= env.step_limit());
        }
    }

    #[test]
    fn generators_are_deterministic(seed in 0u64..1000, m in 3usize..9) {
        prop_assert_eq!(FamilyTree::generate(m, seed).unwrap(), FamilyTree::generate(m, seed).unwrap());
        prop_assert_eq!(BlocksEnv::generate(m, seed).unwrap(), BlocksEnv::generate(m, seed).unwrap());
        prop_assert_eq!(SortEnv::generate(m, seed).unwrap(), SortEnv::generate(m, seed).unwrap());
        prop_assert_eq!(PathEnv::generate(m, seed, EnvMode::Train).unwrap(), PathEnv::generate(m, seed, EnvMode::Train).unwrap());
        let s = SortEnv::generate(m, seed).unwrap();
        let mut sorted = s.array.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..m).collect::<Vec<_>>());
    }
}
