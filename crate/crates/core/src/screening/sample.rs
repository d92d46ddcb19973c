use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScreeningError;
use crate::network::{islands, BranchRef, ContingencyEntry, GridCase};

/// Load-scale range of sampled contingencies.
pub const DEFAULT_LOAD_SCALE: (f64, f64) = (1.0, 1.2);

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRequest {
    pub k: usize,
    /// Branches out per sample.
    pub order: usize,
    pub seed: u64,
    /// Uniform load-scale range; `None` keeps nominal loading.
    pub load_scale: Option<(f64, f64)>,
}

impl SampleRequest {
    pub fn new(k: usize, order: usize, seed: u64) -> Self {
        Self { k, order, seed, load_scale: Some(DEFAULT_LOAD_SCALE) }
    }

    pub fn nominal(mut self) -> Self {
        self.load_scale = None;
        self
    }
}

fn branch_ref(case: &GridCase, k: usize) -> BranchRef {
    let b = &case.branches[k];
    BranchRef { from: b.from, to: b.to, circuit: b.circuit }
}

/// Draws `k` outage sets of `order` distinct in-service branches; sets that island the network are redrawn.
pub fn sample_contingencies(case: &GridCase, req: &SampleRequest) -> Result<Vec<ContingencyEntry>, ScreeningError> {
    if req.k == 0 || req.order == 0 {
        return Err(ScreeningError::Usage("sample count and order must be at least 1".into()));
    }
    if let Some((lo, hi)) = req.load_scale {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(ScreeningError::Usage(format!("invalid load-scale range [{lo}, {hi}]")));
        }
    }
    let live: Vec<usize> = (0..case.branches.len()).filter(|&k| case.branches[k].in_service()).collect();
    if req.order >= live.len() {
        return Err(ScreeningError::Infeasible(format!("order {} needs more than the {} in-service branches", req.order, live.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let width = req.k.to_string().len();
    let max_draws = 1000 * req.k + 10_000;
    let mut out = Vec::with_capacity(req.k);
    let mut draws = 0;
    while out.len() < req.k {
        if draws == max_draws {
            return Err(ScreeningError::Infeasible(format!(
                "only {} of {} non-islanding samples found in {draws} draws",
                out.len(),
                req.k
            )));
        }
        draws += 1;
        let mut picked: Vec<usize> = index::sample(&mut rng, live.len(), req.order).into_iter().map(|i| live[i]).collect();
        picked.sort_unstable();
        let scale = req.load_scale.map(|(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..hi) });
        if islands(case, &picked).len() > 1 {
            continue;
        }
        out.push(ContingencyEntry {
            id: format!("s{:0width$}", out.len() + 1),
            outages: picked.iter().map(|&k| branch_ref(case, k)).collect(),
            load_scale: scale,
        });
    }
    Ok(out)
}

/// Every single in-service branch outage, islanding ones included.
pub fn n_minus_1(case: &GridCase) -> Vec<ContingencyEntry> {
    case.branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.in_service())
        .map(|(k, _)| {
            let r = branch_ref(case, k);
            ContingencyEntry { id: format!("b{}-{}-{}", r.from, r.to, r.circuit), outages: vec![r], load_scale: None }
        })
        .collect()
}
