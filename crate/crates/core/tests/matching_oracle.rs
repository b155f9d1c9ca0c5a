use kanjidist::matching::solve_binary_matching;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random forest: each index is a root or hangs below an earlier one.
/// Veins are root-to-leaf paths.
fn random_veins(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    let parent: Vec<Option<usize>> = (0..n).map(|i| if i == 0 || rng.gen_bool(0.3) { None } else { Some(rng.gen_range(0..i)) }).collect();
    (0..n)
        .filter(|i| !parent.contains(&Some(*i)))
        .map(|mut v| {
            let mut path = vec![v];
            while let Some(p) = parent[v] {
                path.push(p);
                v = p;
            }
            path
        })
        .collect()
}

/// Best subset by enumeration; among equal values the one that is
/// lexicographically smallest as a 0/1 vector in row-major order.
fn enumerate(profit: &[Vec<f64>], veins1: &[Vec<usize>], veins2: &[Vec<usize>]) -> (f64, Vec<(usize, usize)>) {
    let vars: Vec<(usize, usize, f64)> = profit
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(move |(j, p)| (i, j, *p)))
        .collect();
    assert!(vars.len() <= 20);
    let masks: Vec<u32> = veins1
        .iter()
        .map(|v| vars.iter().enumerate().filter(|(_, x)| v.contains(&x.0)).fold(0, |m, (k, _)| m | 1 << k))
        .chain(veins2.iter().map(|v| vars.iter().enumerate().filter(|(_, x)| v.contains(&x.1)).fold(0, |m, (k, _)| m | 1 << k)))
        .collect();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for set in 0u32..1 << vars.len() {
        if masks.iter().any(|m| (set & m).count_ones() > 1) {
            continue;
        }
        let bits: Vec<bool> = (0..vars.len()).map(|k| set >> k & 1 == 1).collect();
        let value: f64 = vars.iter().zip(&bits).filter(|(_, b)| **b).map(|(v, _)| v.2).sum();
        let better = match &best {
            None => true,
            Some((bv, bb)) => value > *bv || (value == *bv && bits < *bb),
        };
        if better {
            best = Some((value, bits));
        }
    }
    let (value, bits) = best.expect("empty set is feasible");
    (value, vars.iter().zip(bits).filter(|(_, b)| *b).map(|(v, _)| (v.0, v.1)).collect())
}

fn random_instance(rng: &mut ChaCha8Rng, dyadic: bool) -> (Vec<Vec<f64>>, Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (n1, n2) = (rng.gen_range(2..=7), rng.gen_range(2..=7));
    let mut profit = vec![vec![0.0; n2]; n1];
    let mut count = 0;
    for row in profit.iter_mut() {
        for p in row.iter_mut() {
            if count < 20 && rng.gen_bool(0.6) {
                *p = if dyadic { rng.gen_range(1..=4) as f64 / 8.0 } else { rng.gen_range(0.001..0.25) };
                count += 1;
            }
        }
    }
    (profit, random_veins(rng, n1), random_veins(rng, n2))
}

#[test]
fn solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        // every other instance uses profits from a small grid, so ties occur
        let (profit, v1, v2) = random_instance(&mut rng, case % 2 == 0);
        let (value, want) = enumerate(&profit, &v1, &v2);
        let got = solve_binary_matching(&profit, &v1, &v2).unwrap();
        let got_value: f64 = got.iter().map(|(i, j)| profit[*i][*j]).sum();
        assert_eq!(got, want, "case {case}: value {got_value} vs {value}");
    }
}
