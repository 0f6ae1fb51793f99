mod oracles;

use oracles::peel_oracle;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vitcube_core::cost_model::ArchFactors;
use vitcube_core::pareto::{
    apply_constraints, dominates, nondominated_sort, select_top, FractionBase, ModelRecord, SelectConfig,
};

fn rec(id: usize, macs: f64, acc: f64) -> ModelRecord {
    ModelRecord { id: format!("m{id:03}"), factors: ArchFactors::IDENTITY, macs, accuracy: acc, top5: None }
}

/// Coarse values so that ties in either objective are common.
fn random_records(rng: &mut StdRng, n: usize) -> Vec<ModelRecord> {
    (0..n).map(|i| rec(i, rng.gen_range(1..40) as f64 * 5e7, 0.5 + rng.gen_range(0..40) as f64 * 0.01)).collect()
}

#[test]
fn sort_matches_peeling_oracle_on_500_instances() {
    let mut rng = StdRng::seed_from_u64(500);
    for _ in 0..500 {
        let n = rng.gen_range(1..=200);
        let records = random_records(&mut rng, n);
        let f = nondominated_sort(&records).unwrap();
        assert_eq!(f.rank, peel_oracle(&records));
    }
}

#[test]
fn sort_200_records_matches_oracle() {
    let mut rng = StdRng::seed_from_u64(200);
    let records = random_records(&mut rng, 200);
    assert_eq!(nondominated_sort(&records).unwrap().rank, peel_oracle(&records));
}

#[test]
fn single_record_is_one_front() {
    let f = nondominated_sort(&[rec(0, 1e9, 0.8)]).unwrap();
    assert_eq!(f.fronts, vec![vec![0]]);
}

#[test]
fn front_invariants_hold() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..50 {
        let records = random_records(&mut rng, 120);
        let f = nondominated_sort(&records).unwrap();
        let mut seen = vec![0; records.len()];
        for (k, front) in f.fronts.iter().enumerate() {
            for &i in front {
                seen[i] += 1;
                assert!(front.iter().all(|&j| !dominates(&records[j], &records[i])));
                if k > 0 {
                    assert!(f.fronts[k - 1].iter().any(|&j| dominates(&records[j], &records[i])));
                }
            }
            let sorted = front.windows(2).all(|w| {
                let (a, b) = (&records[w[0]], &records[w[1]]);
                (a.macs, -a.accuracy, &a.id) <= (b.macs, -b.accuracy, &b.id)
            });
            assert!(sorted);
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn selection_size_and_constraints(
        pts in prop::collection::vec((0.05f64..1.4, 0.3f64..0.99), 0..120),
        fraction in 0.01f64..=1.0,
    ) {
        let m0 = 1.8e9;
        let records: Vec<ModelRecord> = pts.iter().enumerate().map(|(i, p)| rec(i, p.0 * m0, p.1)).collect();
        let s = select_top(&records, m0, &SelectConfig { fraction, ..SelectConfig::default() }).unwrap();
        let n_kept = apply_constraints(&records, m0).len();
        prop_assert_eq!(s.constrained_count, n_kept);
        let expected = ((fraction * n_kept as f64 - 1e-9).ceil() as usize).min(n_kept);
        prop_assert_eq!(s.records.len(), expected);
        for r in &s.records {
            prop_assert!(0.2 * m0 < r.macs && r.macs < 1.1 * m0 && 0.5 < r.accuracy && r.accuracy < 1.0);
        }
        // whole better fronts come before any partial one
        if let Some(&worst) = s.ranks.iter().max() {
            let before: usize = s.front_sizes[..worst].iter().sum();
            prop_assert_eq!(s.ranks.iter().filter(|&&r| r < worst).count(), before);
        }
    }

    #[test]
    fn selection_is_scale_invariant(
        pts in prop::collection::vec((0.05f64..1.4, 0.3f64..0.99), 1..80),
        scale in 1e-3f64..1e3,
        all in any::<bool>(),
    ) {
        let m0 = 1.8e9;
        let cfg = SelectConfig {
            fraction: 0.2,
            fraction_base: if all { FractionBase::All } else { FractionBase::Constrained },
        };
        let records: Vec<ModelRecord> = pts.iter().enumerate().map(|(i, p)| rec(i, p.0 * m0, p.1)).collect();
        let scaled: Vec<ModelRecord> = records.iter().map(|r| ModelRecord { macs: r.macs * scale, ..r.clone() }).collect();
        let a = select_top(&records, m0, &cfg).unwrap();
        let b = select_top(&scaled, m0 * scale, &cfg).unwrap();
        prop_assert_eq!(&a.indices, &b.indices);
        prop_assert_eq!(&a.front_sizes, &b.front_sizes);
        if !records.is_empty() {
            prop_assert_eq!(nondominated_sort(&records).unwrap(), nondominated_sort(&scaled).unwrap());
        }
    }
}
