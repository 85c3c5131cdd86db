use std::collections::BTreeMap;

use crate::model::{
    Arc, CensusTract, DistanceMatrix, GeoPoint, ModelError, PracticeSetting, Physician, ScenarioInstance,
    SystemParameters,
};

/// Assembles small scenarios with explicit distances, mostly for tests and
/// worked examples. Ids are 1-based in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ScenarioBuilder {
    params: SystemParameters,
    tracts: Vec<CensusTract>,
    physicians: Vec<Physician>,
    arcs: Vec<Arc>,
}

impl ScenarioBuilder {
    pub fn new(params: SystemParameters) -> Self {
        Self {
            params,
            ..Default::default()
        }
    }

    /// Adds a tract; returns its index.
    pub fn tract(&mut self, pop_medicaid: f64, pop_other: f64, mob_medicaid: f64, mob_other: f64) -> usize {
        let i = self.tracts.len();
        self.tracts.push(CensusTract {
            index: i,
            external_id: (i + 1) as i64,
            centroid: GeoPoint::new(0.0, 0.0),
            pop_medicaid,
            pop_other,
            mob_medicaid,
            mob_other,
            local_physicians: Vec::new(),
            covariates: BTreeMap::new(),
        });
        i
    }

    /// Adds a physician located in `tract`; returns its index.
    pub fn physician(&mut self, tract: usize, pam: f64, mc: f64) -> usize {
        let j = self.physicians.len();
        self.physicians.push(Physician {
            index: j,
            external_id: (j + 1) as i64,
            location: GeoPoint::new(0.0, 0.0),
            tract,
            pam,
            mc,
            setting: PracticeSetting::Other,
        });
        j
    }

    pub fn arc(&mut self, tract: usize, physician: usize, miles: f64) -> &mut Self {
        self.arcs.push(Arc { tract, physician, miles });
        self
    }

    pub fn build(&self) -> Result<ScenarioInstance, ModelError> {
        let d = DistanceMatrix::from_arcs(
            self.tracts.len(),
            self.physicians.len(),
            self.arcs.clone(),
            self.params.mi_max,
        )?;
        ScenarioInstance::new(self.tracts.clone(), self.physicians.clone(), d, self.params)
    }
}

/// Two tracts and two physicians: tract A has 200 children at distances
/// 2 and 8, tract B 100 children at 12 and 3. No floor, no congestion
/// limit, full mobility and Medicaid participation.
pub fn two_tract_example(pc: f64) -> ScenarioInstance {
    let params = SystemParameters {
        pc,
        lc: 0.0,
        cc: 1.0,
        ..SystemParameters::default()
    };
    let mut b = ScenarioBuilder::new(params);
    let a = b.tract(100.0, 100.0, 1.0, 1.0);
    let bt = b.tract(50.0, 50.0, 1.0, 1.0);
    let p1 = b.physician(a, 1.0, 1.0);
    let p2 = b.physician(bt, 1.0, 1.0);
    b.arc(a, p1, 2.0).arc(a, p2, 8.0).arc(bt, p1, 12.0).arc(bt, p2, 3.0);
    b.build().expect("example scenario is valid")
}
