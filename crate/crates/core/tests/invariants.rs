use proptest::prelude::*;
use psbr::dipole_geometry::alignment_set_4ls;
use psbr::liouvillian::build_generator;
use psbr::propagation::{log_grid, propagate_eigen, propagate_ode, steady_state};
use psbr::{AlignmentSet, DipoleVector, Generator, RateSet, ReducedState};

fn dipoles() -> impl Strategy<Value = AlignmentSet> {
    prop::array::uniform4(prop::array::uniform3(-1.0f64..1.0))
        .prop_filter("nonzero dipoles", |d| d.iter().all(|v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4))
        .prop_map(|d| {
            let v: Vec<DipoleVector> = d.iter().enumerate().map(|(k, c)| DipoleVector::new(format!("d{k}"), *c)).collect();
            alignment_set_4ls(&v[0], &v[1], &v[2], &v[3]).unwrap()
        })
}

fn gammas() -> impl Strategy<Value = [[f64; 2]; 2]> {
    prop::array::uniform2(prop::array::uniform2(0.1f64..3.0))
}

fn generator(gamma: [[f64; 2]; 2], nbar: [f64; 2], p: &AlignmentSet, dg: f64, de: f64) -> Generator {
    build_generator(&RateSet::from_gamma(gamma, nbar).unwrap(), p, dg, de, Default::default()).unwrap()
}

fn mixed_state(w: [f64; 4]) -> ReducedState {
    let t: f64 = w.iter().sum();
    ReducedState {
        pop_g1: w[0] / t,
        pop_g2: w[1] / t,
        pop_e1: w[2] / t,
        pop_e2: w[3] / t,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // With one bath temperature the Gibbs state is stationary whatever the
    // rates and dipole geometry: P_e/P_g = n̄/(1 + n̄), no coherence.
    #[test]
    fn gibbs_state_is_stationary(gamma in gammas(), nbar in 0.0f64..2.0, p in dipoles(), dg in 0.0f64..3.0, de in 0.0f64..3.0) {
        let gen = generator(gamma, [nbar; 2], &p, dg, de);
        let pg = (1.0 + nbar) / (2.0 * (1.0 + 2.0 * nbar));
        let gibbs = ReducedState { pop_g1: pg, pop_g2: pg, pop_e1: 0.5 - pg, pop_e2: 0.5 - pg, ..Default::default() };
        let d = gen.apply(&gibbs);
        prop_assert!(d.to_vector().amax() < 1e-13, "{d:?}");
    }

    #[test]
    fn propagation_preserves_trace(gamma in gammas(), nbar in prop::array::uniform2(0.0f64..1.0), p in dipoles(), w in prop::array::uniform4(0.01f64..1.0)) {
        let gen = generator(gamma, nbar, &p, 0.3, 0.7);
        let times = log_grid(1e-2, 1e3, 30).unwrap();
        let traj = propagate_eigen(&gen, &mixed_state(w), &times).unwrap();
        for s in &traj.states {
            prop_assert!((s.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn propagation_is_a_semigroup(gamma in gammas(), nbar in prop::array::uniform2(0.0f64..1.0), p in dipoles(), t1 in 0.01f64..5.0, t2 in 0.01f64..5.0) {
        let gen = generator(gamma, nbar, &p, 0.5, 0.2);
        let x0 = ReducedState::ground_mixture();
        let whole = propagate_eigen(&gen, &x0, &[t1 + t2]).unwrap().states[0];
        let mid = propagate_eigen(&gen, &x0, &[t1]).unwrap().states[0];
        let split = propagate_eigen(&gen, &mid, &[t2]).unwrap().states[0];
        prop_assert!(whole.max_abs_diff(&split) < 1e-10);
    }

    #[test]
    fn steady_state_is_annihilated(gamma in gammas(), nbar in prop::array::uniform2(0.01f64..1.0), p in dipoles()) {
        let gen = generator(gamma, nbar, &p, 0.3, 0.1);
        let ss = steady_state(&gen).unwrap();
        if let Some(x) = ss.state {
            prop_assert!((x.trace() - 1.0).abs() < 1e-12);
            prop_assert!(gen.apply(&x).to_vector().amax() < 1e-10);
        }
    }
}

#[test]
fn eigen_and_ode_agree_on_random_geometry() {
    let p = alignment_set_4ls(
        &DipoleVector::new("a", [1.0, 0.2, 0.0]),
        &DipoleVector::new("b", [0.3, 1.0, 0.1]),
        &DipoleVector::new("c", [0.0, 0.4, 1.0]),
        &DipoleVector::new("d", [0.7, 0.0, 0.7]),
    )
    .unwrap();
    let gen = generator([[1.2, 0.8], [0.6, 1.4]], [0.05, 0.02], &p, 0.3, 0.1);
    let times = log_grid(1e-2, 1e4, 200).unwrap();
    let x0 = ReducedState::ground_mixture();
    let a = propagate_eigen(&gen, &x0, &times).unwrap();
    let b = propagate_ode(&gen, &x0, &times, 1e-12).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-8);
}
