//! Property-based invariants for maps, operators and the Kantorovich
//! distance.

use proptest::prelude::*;

use rde_core::maps::{PiecewiseMap, RandomSystem};
use rde_core::montecarlo::{kantorovich, kantorovich_two_sample};
use rde_core::transfer::{annealed_operator, StationaryDensity};

fn arbitrary_map() -> impl Strategy<Value = PiecewiseMap> {
    prop_oneof![
        (2u32..6).prop_map(|b| PiecewiseMap::beta(b).unwrap()),
        (1.05f64..4.0, 0.0f64..0.999)
            .prop_map(|(b, a)| PiecewiseMap::linear_mod1(b, a).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_domains_partition_the_interval(map in arbitrary_map(), xs in prop::collection::vec(0.0f64..1.0, 50)) {
        for x in xs {
            let hits = map
                .branches()
                .iter()
                .filter(|b| {
                    let (lo, hi) = b.domain();
                    lo <= x && x < hi
                })
                .count();
            prop_assert_eq!(hits, 1);
        }
    }

    #[test]
    fn preimages_invert_the_map(map in arbitrary_map(), xs in prop::collection::vec(0.0f64..1.0, 30)) {
        for x in xs {
            let pre = map.preimages(x).unwrap();
            let expected = map
                .branches()
                .iter()
                .filter(|b| b.image_contains(x))
                .count();
            prop_assert_eq!(pre.len(), expected);
            for (y, d) in pre {
                prop_assert!(d > 0.0);
                prop_assert!((map.eval(y).unwrap() - x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn operator_conserves_mass_and_positivity(
        map in arbitrary_map(),
        seed in 0u64..1000,
        n in 8usize..40,
    ) {
        let sys = RandomSystem::single(map);
        let op = annealed_operator(&sys, n).unwrap();
        let rng = rde_core::montecarlo::rng::CounterRng::new(seed);
        let v: Vec<f64> = (0..n).map(|i| rng.uniform_at(i as u64)).collect();
        let mut w = vec![0.0; n];
        op.apply_real(&v, &mut w).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((op.integral(&v) - op.integral(&w)).abs() < 1e-10);
        for s in op.column_sums().unwrap() {
            prop_assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn kantorovich_metric_axioms(
        mut a in prop::collection::vec(0.0f64..1.0, 1..40),
        mut b in prop::collection::vec(0.0f64..1.0, 1..40),
        mut c in prop::collection::vec(0.0f64..1.0, 1..40),
    ) {
        let sort = |v: &mut Vec<f64>| v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        sort(&mut a);
        sort(&mut b);
        sort(&mut c);
        let dab = kantorovich_two_sample(&a, &b).unwrap();
        let dba = kantorovich_two_sample(&b, &a).unwrap();
        let dbc = kantorovich_two_sample(&b, &c).unwrap();
        let dac = kantorovich_two_sample(&a, &c).unwrap();
        let daa = kantorovich_two_sample(&a, &a).unwrap();
        prop_assert!(daa.abs() < 1e-15);
        prop_assert!(dab >= 0.0);
        prop_assert!((dab - dba).abs() < 1e-12);
        // triangle inequality
        prop_assert!(dac <= dab + dbc + 1e-12);
        // consistency with the density form: empirical vs uniform density
        let mu = StationaryDensity::uniform(16);
        let direct = kantorovich(&a, &mu).unwrap();
        // oracle: dense uniform sample as a stand-in for the density
        let grid: Vec<f64> = (0..4000).map(|i| (i as f64 + 0.5) / 4000.0).collect();
        let sampled = kantorovich_two_sample(&a, &grid).unwrap();
        prop_assert!((direct - sampled).abs() < 2e-3, "direct {} vs sampled {}", direct, sampled);
    }

    #[test]
    fn empirical_law_ks_is_in_unit_interval(
        samples in prop::collection::vec(-3.0f64..3.0, 2..200),
    ) {
        let mut law = rde_core::montecarlo::EmpiricalLaw::new(samples);
        let ks = law.ks_vs_normal(1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&ks));
    }
}
