mod common;

use std::collections::HashMap;
use std::sync::Arc;

use activecorr::estimators::EdgeScoreModel;
use activecorr::rng::rng_from_seed;
use activecorr::sampler::{sample_members, Session};
use common::{subsets, Fixture};

fn total_variation(counts: &HashMap<Vec<u32>, usize>, law: &[(Vec<u32>, f64)], draws: usize) -> f64 {
    law.iter()
        .map(|(s, q)| (counts.get(s).copied().unwrap_or(0) as f64 / draws as f64 - q).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn proposal_draws_follow_subset_law() {
    let fx = Fixture::random(5, 0.6, 17);
    let law = fx.proposal(3);
    let mut rng = rng_from_seed(5);
    let draws = 200_000;
    let mut counts = HashMap::new();
    for _ in 0..draws {
        let mut s = sample_members(0, 3, &fx.graph, &fx.model, &mut rng).unwrap();
        s.sort_unstable();
        *counts.entry(s).or_insert(0usize) += 1;
    }
    // no mass outside the support
    for s in counts.keys() {
        assert!(law.iter().any(|(t, q)| t == s && *q > 0.0), "{s:?}");
    }
    let tv = total_variation(&counts, &law, draws);
    assert!(tv < 0.01, "{tv}");
}

#[test]
fn session_subsets_follow_subset_law_at_every_size() {
    // one bin; the session's subset after k members has law q_k
    let fx = Fixture::random(6, 0.5, 23);
    let graph = Arc::new(fx.graph.clone());
    let model = Arc::new(fx.model.clone());
    let runs = 40_000;
    for k in [3usize, 4] {
        let law = fx.proposal(k);
        let mut counts = HashMap::new();
        for seed in 0..runs {
            let mut s = Session::new(graph.clone(), model.clone(), seed as u64).unwrap();
            while s.tracks()[0].state.k() < k {
                s.step_with(|v| fx.labels[v as usize]).unwrap();
            }
            let mut m = s.tracks()[0].state.members().to_vec();
            m.sort_unstable();
            *counts.entry(m).or_insert(0usize) += 1;
        }
        let tv = total_variation(&counts, &law, runs);
        assert!(tv < 0.02, "k {k}: {tv}");
    }
}

#[test]
fn uniform_scores_give_uniform_subsets() {
    let fx = Fixture::random(6, 0.5, 31);
    let uniform = EdgeScoreModel::uniform(&fx.graph, 2.0).unwrap();
    let all = subsets(6, 3);
    let law: Vec<(Vec<u32>, f64)> = all.iter().map(|s| (s.clone(), 1.0 / all.len() as f64)).collect();
    let mut rng = rng_from_seed(8);
    let draws = 100_000;
    let mut counts = HashMap::new();
    for _ in 0..draws {
        let mut s = sample_members(0, 3, &fx.graph, &uniform, &mut rng).unwrap();
        s.sort_unstable();
        *counts.entry(s).or_insert(0usize) += 1;
    }
    assert!(total_variation(&counts, &law, draws) < 0.01);
}
