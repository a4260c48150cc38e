//! Finite-difference gradient checks on random tiny models (f64, no dropout).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::gce::{build_weighted_adjacency, extract_hop_pairs, AblationVariant, GceConfig};
use crate::ingest::UserSequence;
use crate::recent::make_window;
use crate::scalar::dot;
use crate::sparse::CsrMatrix;

use super::params::{ModelDims, ModelParams};
use super::pipeline::{encode, gradients, loss, GatheredRows, GlobalRows, ModelConfig, TrainingExample};
use super::sampling::uniform_negatives;

/// Default pass threshold on the relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Smallest gap between the best and second-best interest score accepted
/// for an instance, so perturbations cannot flip the argmax.
pub const MIN_ARGMAX_MARGIN: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Fourth-order central difference with step `h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

/// A self-contained gradient-check problem.
pub struct Instance {
    pub params: ModelParams<f64>,
    pub a_norm: CsrMatrix<f64>,
    pub cfg: ModelConfig,
    pub example: TrainingExample,
}

#[derive(Clone, Debug, Serialize)]
pub struct TensorReport {
    pub name: String,
    pub elements: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceReport {
    pub num_items: usize,
    pub d: usize,
    pub k: usize,
    pub l_rec: usize,
    pub l_layer: usize,
    pub heads: usize,
    pub tensors: Vec<TensorReport>,
}

impl InstanceReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub instances: Vec<InstanceReport>,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.instances.iter().map(InstanceReport::max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_err() <= tol
    }

    /// Worst error per tensor name across instances.
    pub fn per_tensor(&self) -> Vec<(String, f64)> {
        let mut worst: std::collections::BTreeMap<String, f64> = Default::default();
        for inst in &self.instances {
            for t in &inst.tensors {
                let e = worst.entry(t.name.clone()).or_insert(0.0);
                *e = e.max(t.max_rel_err);
            }
        }
        worst.into_iter().collect()
    }
}

fn argmax_margin(inst: &Instance) -> Result<f64> {
    let globals = GatheredRows::for_examples(&inst.a_norm, &inst.params.item_table, [&inst.example]);
    let enc = encode(&inst.example.window, &inst.params.encoder, &inst.cfg, &globals, None)?;
    let target = globals.global_row(inst.example.target);
    let mut scores: Vec<f64> = (0..enc.interests.k())
        .map(|k| dot(enc.interests.vectors.row(k), target))
        .collect();
    if scores.len() < 2 {
        return Ok(f64::INFINITY);
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    Ok(scores[0] - scores[1])
}

fn random_candidate<R: Rng>(rng: &mut R) -> Instance {
    let num_items = rng.gen_range(6..=12);
    let d = *[4usize, 8].choose(rng).unwrap();
    let k = *[1usize, 2, 4].choose(rng).unwrap();
    let l_rec = rng.gen_range(2..=5);
    let l_layer = rng.gen_range(1..=2);
    let heads = *[1usize, 2].choose(rng).unwrap();
    let l_time = rng.gen_range(2..=6);
    let dims = ModelDims {
        num_items,
        d,
        k,
        l_rec,
        l_time,
        heads,
        l_layer,
    };
    let cfg = ModelConfig {
        dims,
        time_unit_seconds: 1,
        residual: rng.gen_bool(0.3),
        dropout: 0.0,
    };

    // a few random histories feed the adjacency; the first one is the example
    let seqs: Vec<UserSequence> = (0..3)
        .map(|u| {
            let len = rng.gen_range(3..=8);
            let mut t = rng.gen_range(1..5i64);
            let mut items = Vec::with_capacity(len);
            let mut timestamps = Vec::with_capacity(len);
            for _ in 0..len {
                items.push(rng.gen_range(1..num_items));
                timestamps.push(t);
                t += rng.gen_range(0..4);
            }
            UserSequence { user: u, items, timestamps }
        })
        .collect();
    let gce = GceConfig {
        a: 0.6,
        b: 0.4,
        l_time: l_time as f64,
        time_unit_seconds: 1,
        variant: AblationVariant::Full,
        allow_self_pairs: false,
    };
    let acc = extract_hop_pairs(&seqs, &gce);
    let a_norm = build_weighted_adjacency::<f64>(&acc, 4.5, 2.0, 1.0, num_items).a_norm;

    let seq = &seqs[0];
    let end = rng.gen_range(1..seq.len());
    let target = seq.items[end];
    let negatives = uniform_negatives(rng, num_items, target, 3.min(num_items - 2));
    let example = TrainingExample {
        user: 0,
        window: make_window(seq, end, l_rec).unwrap(),
        target,
        negatives,
    };
    let params = ModelParams::uniform(&dims, 0.6, rng);
    Instance {
        params,
        a_norm,
        cfg,
        example,
    }
}

/// Random tiny instance whose interest selection has a safe margin.
pub fn random_instance<R: Rng>(rng: &mut R) -> Result<Instance> {
    loop {
        let inst = random_candidate(rng);
        if argmax_margin(&inst)? >= MIN_ARGMAX_MARGIN {
            return Ok(inst);
        }
    }
}

/// Compares analytic gradients with finite differences for every element of
/// every tensor.
pub fn check_instance(inst: &Instance) -> Result<InstanceReport> {
    let (_, analytic) = gradients(&inst.example, &inst.params, &inst.a_norm, &inst.cfg)?;
    let mut work = inst.params.clone();
    let names: Vec<String> = inst.params.tensors().into_iter().map(|(n, _)| n).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, name) in names.iter().enumerate() {
        let g = analytic.tensors()[ti].1.as_slice().to_vec();
        let mut worst = 0f64;
        for (e, &a) in g.iter().enumerate() {
            let theta = inst.params.tensors()[ti].1.as_slice()[e];
            let h = 1e-3 * theta.abs().max(1.0);
            let mut f = |delta: f64| {
                work.tensors_mut()[ti].1.as_mut_slice()[e] = theta + delta;
                loss(&inst.example, &work, &inst.a_norm, &inst.cfg).expect("forward on a valid instance")
            };
            let numeric = central_difference(&mut f, h);
            work.tensors_mut()[ti].1.as_mut_slice()[e] = theta;
            worst = worst.max(relative_error(a, numeric));
        }
        tensors.push(TensorReport {
            name: name.clone(),
            elements: g.len(),
            max_rel_err: worst,
        });
    }
    let d = &inst.cfg.dims;
    Ok(InstanceReport {
        num_items: d.num_items,
        d: d.d,
        k: d.k,
        l_rec: d.l_rec,
        l_layer: d.l_layer,
        heads: d.heads,
        tensors,
    })
}

/// Runs `instances` random checks from `seed`.
pub fn gradcheck(seed: u64, instances: usize) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(instances);
    for _ in 0..instances {
        let inst = random_instance(&mut rng)?;
        out.push(check_instance(&inst)?);
    }
    Ok(GradcheckReport { seed, instances: out })
}
