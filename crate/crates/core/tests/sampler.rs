use lisa_core::bart::{
    compute_partial_residual, predict, BartHyper, BartSampler, BartSettings, DecisionTree, Forest,
    InflationSpec, SplitRule,
};
use lisa_core::{Dataset, Generator, RngStream};

fn friedman(n: usize, sigma2: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 99);
    Generator::Friedman
        .generate(n, sigma2, &mut rng)
        .unwrap()
        .dataset
}

#[test]
fn single_machine_sigma2_lands_in_sanity_band() {
    let data = friedman(500, 1.0, 11);
    let settings = BartSettings::default().with_trees(20);
    let hyper = BartHyper::calibrated(settings, data.response()).unwrap();
    let mut sampler = BartSampler::new(data, hyper, InflationSpec::FULL).unwrap();
    let mut rng = RngStream::for_chain(5, 0);
    let mut acc = 0.0;
    for it in 0..2000 {
        sampler.gibbs_iteration(&mut rng).unwrap();
        if it >= 1000 {
            acc += sampler.forest().sigma2;
        }
    }
    let mean = acc / 1000.0;
    assert!((0.6..=1.5).contains(&mean), "posterior mean sigma2 {mean}");
}

#[test]
fn sweeps_are_deterministic_and_reconstruct_y() {
    let data = friedman(120, 1.0, 3);
    let hyper =
        BartHyper::calibrated(BartSettings::default().with_trees(5), data.response()).unwrap();
    let run = || {
        let mut s = BartSampler::new(data.clone(), hyper, InflationSpec::FULL).unwrap();
        let mut rng = RngStream::for_chain(1, 0);
        for _ in 0..50 {
            s.gibbs_iteration(&mut rng).unwrap();
        }
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(a.forest(), b.forest());
    assert_eq!(a.forest().sigma2.to_bits(), b.forest().sigma2.to_bits());

    let forest = a.forest();
    for j in 0..forest.trees.len() {
        let r = compute_partial_residual(forest, j, &data);
        for (i, ri) in r.iter().enumerate() {
            let own = forest.trees[j].predict(data.row(i));
            assert!(
                (ri + (predict(forest, data.row(i)).unwrap() - own) - data.response()[i]).abs()
                    < 1e-12
            );
        }
    }
    for (f, i) in a.fitted().iter().zip(0..) {
        assert!((f - predict(forest, data.row(i)).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn prediction_examples() {
    let stumps = Forest::stumps(3, 0.5, 1.0, 2);
    assert_eq!(predict(&stumps, &[9.0, -1.0]).unwrap(), 1.5);
    assert!(predict(&stumps, &[1.0]).is_err());

    let mut tree = DecisionTree::stump(0.0);
    tree.grow(
        DecisionTree::ROOT,
        SplitRule { var: 0, value: 0.5 },
        -1.0,
        1.0,
    );
    let forest = Forest {
        trees: vec![tree],
        sigma2: 1.0,
        n_features: 3,
    };
    assert_eq!(predict(&forest, &[0.2, 0.0, 0.0]).unwrap(), -1.0);
    assert_eq!(predict(&forest, &[0.7, 0.0, 0.0]).unwrap(), 1.0);

    let data = friedman(10, 1.0, 1);
    let one = Forest::stumps(1, 3.0, 1.0, data.p());
    assert_eq!(compute_partial_residual(&one, 0, &data), data.response());
}
