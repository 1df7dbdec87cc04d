//! How EM estimates behave under each missingness mechanism. MCAR and MAR
//! (driver observed) recover the marginal; MNAR biases it and nothing here
//! corrects that.

use cbn::data::{inject_missing, Mechanism, MissingnessSpec};
use cbn::params::{em_fit, EmConfig};
use cbn::{CausalBayesianNetwork, Cpt, Dag, Dataset, Variable};

// D -> X with X strongly tied to D.
fn truth() -> CausalBayesianNetwork {
    let v = |n: &str| Variable::with_states(n, &["lo", "hi"]).unwrap();
    let dag = Dag::new(vec!["D".into(), "X".into()], &[("D", "X")]).unwrap();
    let cpts = vec![
        Cpt::new(0, 2, vec![], vec![], vec![0.5, 0.5]).unwrap(),
        Cpt::new(1, 2, vec![0], vec![2], vec![0.8, 0.2, 0.2, 0.8]).unwrap(),
    ];
    CausalBayesianNetwork::new(dag, vec![v("D"), v("X")], cpts).unwrap()
}

fn estimated_p_hi(data: &Dataset) -> f64 {
    let bn = truth();
    let fit = em_fit(bn.dag(), data, &EmConfig { ess: 0.0, ..EmConfig::default() }).unwrap();
    fit.network.posterior(&[None, None], 1).unwrap()[1]
}

fn blank(mechanism: Mechanism) -> Dataset {
    let data = truth().sample(20_000, 1);
    let spec = MissingnessSpec {
        mechanism,
        rate: 0.3,
        target: "X".into(),
        seed: 2,
    };
    inject_missing(&data, &spec).unwrap()
}

#[test]
fn mcar_and_mar_recover_the_marginal() {
    for m in [Mechanism::Mcar, Mechanism::Mar { driver: "D".into() }] {
        let p = estimated_p_hi(&blank(m.clone()));
        assert!((p - 0.5).abs() < 0.02, "{m:?}: {p}");
    }
}

#[test]
fn mnar_biases_the_marginal_downward() {
    // hi cells vanish at rate 0.6, lo cells never
    let p = estimated_p_hi(&blank(Mechanism::Mnar));
    assert!(p < 0.45, "{p}");
    let complete = truth().sample(20_000, 1);
    assert!((estimated_p_hi(&complete) - 0.5).abs() < 0.02);
}
