//! The learner only sees the `Plant` interface: replaying recorded states to
//! it through a plant that knows nothing about `A*`, `B*` reproduces the run.

use oslo_lqr::linalg::Vector;
use oslo_lqr::oslo::{
    run_learner, run_oslo, CertaintyEquivalence, OptimisticSdp, OsloConfig, PolicyRule,
    PracticalMultipliers,
};
use oslo_lqr::system::{KnownParams, Plant};
use oslo_lqr::{LqrInstance, SimRng, Trajectory};

struct ReplayPlant {
    known: KnownParams,
    traj: Trajectory,
    t: usize,
    x: Vector,
    max_action_gap: f64,
}

impl ReplayPlant {
    fn new(known: KnownParams, traj: Trajectory) -> Self {
        let x = traj.states[0].clone();
        ReplayPlant {
            known,
            traj,
            t: 0,
            x,
            max_action_gap: 0.0,
        }
    }
}

impl Plant for ReplayPlant {
    fn known(&self) -> &KnownParams {
        &self.known
    }

    fn state(&self) -> &Vector {
        &self.x
    }

    fn apply(&mut self, u: &Vector) -> oslo_lqr::Result<Vector> {
        let gap = (u - &self.traj.actions[self.t]).amax();
        self.max_action_gap = self.max_action_gap.max(gap);
        self.t += 1;
        self.x = self.traj.states[self.t].clone();
        Ok(self.x.clone())
    }
}

fn replay(rule: &mut dyn PolicyRule, name: &str) {
    let inst = LqrInstance::golden();
    let cfg = OsloConfig::practical(
        &inst.known(),
        512,
        0.1,
        inst.theta(),
        PracticalMultipliers::default(),
    )
    .unwrap();
    let rec = match name {
        "oslo" => run_oslo(&inst, &cfg, &Vector::zeros(1), SimRng::new(9)).unwrap(),
        _ => oslo_lqr::oslo::certainty_equivalence_baseline(
            &inst,
            &cfg,
            &Vector::zeros(1),
            SimRng::new(9),
        )
        .unwrap(),
    };
    // the replaying plant is built from a different hidden system
    let decoy = LqrInstance::scalar(-0.4, 3.0, 1.0, 1.0, 1.0).unwrap();
    let mut known = decoy.known();
    known.bounds = inst.bounds;
    let mut plant = ReplayPlant::new(known, rec.trajectory.clone());
    let log = run_learner(&mut plant, &cfg, rule).unwrap();
    assert_eq!(plant.t, 512);
    assert_eq!(plant.max_action_gap, 0.0);
    assert_eq!(log.epochs, rec.epochs);
    assert_eq!(log.quad_v_t, rec.quad_v_t);
}

#[test]
fn oslo_depends_only_on_observations() {
    replay(&mut OptimisticSdp, "oslo");
}

#[test]
fn certainty_equivalence_depends_only_on_observations() {
    replay(&mut CertaintyEquivalence::default(), "ce");
}
