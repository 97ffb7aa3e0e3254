//! Finite-difference oracles for the tape.
//!
//! Every reference forward here is written independently in f64, so the
//! central differences are accurate far beyond f32 and the comparison
//! measures the analytic gradient alone.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semfield::encoding::{sh_basis, trilinear_weights};
use semfield::field::{DualBranchField, FieldConfig, LossWeights, TrainingBatch};
use semfield::geom::{Aabb, Point3};
use semfield::nn::{InterpStencil, NodeId, ParamStore, Tape, Tensor};

const FD_STEP: f64 = 1e-6;

/// Relative error of one gradient entry. The denominator is floored at
/// 1e-4 of the largest entry of the same check: an f32 gradient that is a
/// cancelling sum of O(scale) terms is only exact to a few ulps of those
/// terms, so a true zero comes back as ~1e-7·scale.
fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4 * scale).max(f64::MIN_POSITIVE);
    (analytic - numeric).abs() / denom
}

fn max_rel(pairs: &[(f64, f64)]) -> f64 {
    let scale = pairs.iter().fold(0.0f64, |m, &(a, n)| m.max(a.abs()).max(n.abs()));
    pairs.iter().map(|&(a, n)| rel_err(a, n, scale)).fold(0.0, f64::max)
}

fn central(f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// Central difference at half step, or `None` when a ReLU switches near
/// `x`. Away from kinks the gap between the one-sided slopes is linear in
/// the step and the central estimates at `h` and `h/2` agree; a kink within
/// the step breaks one of the two.
fn central_smooth(f: &mut dyn FnMut(f64) -> f64, x: f64) -> Option<f64> {
    let h = FD_STEP;
    let mid = f(x);
    let (lo, hi) = (f(x - h), f(x + h));
    let (lo2, hi2) = (f(x - h / 2.0), f(x + h / 2.0));
    let gap = (hi - mid) / h - (mid - lo) / h;
    let gap2 = (hi2 - mid) / (h / 2.0) - (mid - lo2) / (h / 2.0);
    let (c, c2) = ((hi - lo) / (2.0 * h), (hi2 - lo2) / h);
    let tol = 1e-4 * c.abs().max(c2.abs()) + 1e-7;
    if (gap2 - gap / 2.0).abs() > tol || (c - c2).abs() > tol {
        return None;
    }
    Some(c2)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Values away from zero by at least `gap`, so ReLU and |·| kinks stay out
/// of reach of the finite-difference step.
fn rand_away_from_zero(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(gap..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn tensor(shape: Vec<usize>, v: &[f64]) -> Tensor {
    Tensor::new(shape, v.iter().map(|&x| x as f32).collect()).unwrap()
}

fn f32_round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x as f32)).collect()
}

/// One elementwise or structural tape operation under test.
struct OpCase {
    shapes: Vec<Vec<usize>>,
    inputs: Vec<Vec<f64>>,
    build: Box<dyn Fn(&mut Tape, &[NodeId]) -> NodeId>,
    reference: Box<dyn Fn(&[Vec<f64>]) -> Vec<f64>>,
}

/// Scalarizes the op output with fixed random weights `c` and compares
/// d(c·y)/d(inputs) from the tape with f64 central differences.
fn check_op(case: OpCase, rng: &mut ChaCha8Rng) -> f64 {
    // the reference sees exactly what the tape sees
    let inputs: Vec<Vec<f64>> = case.inputs.iter().map(|v| f32_round(v)).collect();
    let out_len = (case.reference)(&inputs).len();
    let c = f32_round(&rand_vec(rng, out_len, -1.0, 1.0));

    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs
        .iter()
        .zip(&case.shapes)
        .map(|(v, s)| tape.input(tensor(s.clone(), v)))
        .collect();
    let y = (case.build)(&mut tape, &ids);
    let out_shape = tape.value(y).shape().to_vec();
    let cn = tape.input(tensor(out_shape, &c));
    let prod = tape.mul(y, cn).unwrap();
    let loss = tape.sum(prod);
    tape.backward(loss, &mut ParamStore::new()).unwrap();

    let objective = |xs: &[Vec<f64>]| -> f64 { (case.reference)(xs).iter().zip(&c).map(|(a, b)| a * b).sum() };
    let mut pairs = Vec::new();
    for (k, id) in ids.iter().enumerate() {
        let analytic = tape.grad(*id).map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        for i in 0..inputs[k].len() {
            let mut xs = inputs.clone();
            let x0 = xs[k][i];
            let mut f = |v: f64| {
                xs[k][i] = v;
                objective(&xs)
            };
            pairs.push((f64::from(analytic[i]), central(&mut f, x0)));
        }
    }
    max_rel(&pairs)
}

fn ref_linear(x: &[f64], w: &[f64], b: &[f64], batch: usize, inp: usize, out: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * out];
    for r in 0..batch {
        for o in 0..out {
            y[r * out + o] = b[o] + (0..inp).map(|i| x[r * inp + i] * w[i * out + o]).sum::<f64>();
        }
    }
    y
}

fn ref_ce(logits: &[f64], targets: &[Option<usize>], classes: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (r, t) in targets.iter().enumerate() {
        let Some(t) = *t else { continue };
        let row = &logits[r * classes..(r + 1) * classes];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[t];
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn ref_clamped_l1(p: &[f64], t: &[f64], tr: f64) -> f64 {
    p.iter().zip(t).map(|(a, b)| (a.clamp(-tr, tr) - b.clamp(-tr, tr)).abs()).sum::<f64>() / p.len() as f64
}

/// Largest relative gradient error over every differentiable tape operation
/// for one seed.
pub fn op_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (batch, inp, width) = (rng.random_range(1..5), rng.random_range(1..7), rng.random_range(1..6));

    // linear: gradients into x, w and b
    let case = OpCase {
        shapes: vec![vec![batch, inp], vec![inp, width], vec![width]],
        inputs: vec![
            rand_vec(&mut rng, batch * inp, -1.0, 1.0),
            rand_vec(&mut rng, inp * width, -1.0, 1.0),
            rand_vec(&mut rng, width, -1.0, 1.0),
        ],
        build: Box::new(|t, ids| t.linear(ids[0], ids[1], ids[2]).unwrap()),
        reference: Box::new(move |xs| ref_linear(&xs[0], &xs[1], &xs[2], batch, inp, width)),
    };
    out.push(("linear", check_op(case, &mut rng)));

    let n = batch * width;
    let case = OpCase {
        shapes: vec![vec![batch, width]],
        inputs: vec![rand_away_from_zero(&mut rng, n, 0.05)],
        build: Box::new(|t, ids| t.relu(ids[0])),
        reference: Box::new(|xs| xs[0].iter().map(|v| v.max(0.0)).collect()),
    };
    out.push(("relu", check_op(case, &mut rng)));

    let (ca, cb) = (inp, width);
    let case = OpCase {
        shapes: vec![vec![batch, ca], vec![batch, cb]],
        inputs: vec![rand_vec(&mut rng, batch * ca, -1.0, 1.0), rand_vec(&mut rng, batch * cb, -1.0, 1.0)],
        build: Box::new(|t, ids| t.concat(ids[0], ids[1]).unwrap()),
        reference: Box::new(move |xs| {
            (0..batch)
                .flat_map(|r| xs[0][r * ca..(r + 1) * ca].iter().chain(&xs[1][r * cb..(r + 1) * cb]).copied().collect::<Vec<_>>())
                .collect()
        }),
    };
    out.push(("concat", check_op(case, &mut rng)));

    let classes = rng.random_range(2..6);
    let targets: Vec<Option<usize>> = (0..batch + 2)
        .map(|i| if i == 0 || rng.random_bool(0.7) { Some(rng.random_range(0..classes)) } else { None })
        .collect();
    let rows = targets.len();
    let t2 = targets.clone();
    let case = OpCase {
        shapes: vec![vec![rows, classes]],
        inputs: vec![rand_vec(&mut rng, rows * classes, -3.0, 3.0)],
        build: Box::new(move |t, ids| t.masked_softmax_cross_entropy(ids[0], &targets).unwrap()),
        reference: Box::new(move |xs| vec![ref_ce(&xs[0], &t2, classes)]),
    };
    out.push(("masked_softmax_cross_entropy", check_op(case, &mut rng)));

    // predictions inside the band and away from their targets
    let tr = 0.02;
    let m = batch + 3;
    let preds: Vec<f64> = (0..m).map(|_| rng.random_range(-0.018..0.018)).collect();
    let targets: Vec<f64> = preds
        .iter()
        .map(|p| {
            let d = rng.random_range(0.001..0.03);
            if rng.random_bool(0.5) {
                p + d
            } else {
                p - d
            }
        })
        .collect();
    let tf: Vec<f32> = targets.iter().map(|&v| v as f32).collect();
    let tref = f32_round(&targets);
    let case = OpCase {
        shapes: vec![vec![m]],
        inputs: vec![preds],
        build: Box::new(move |t, ids| t.clamped_l1(ids[0], &tf, tr as f32).unwrap()),
        reference: Box::new(move |xs| vec![ref_clamped_l1(&xs[0], &tref, f64::from(tr as f32))]),
    };
    out.push(("clamped_l1", check_op(case, &mut rng)));

    let shape = vec![batch, width];
    let two = |rng: &mut ChaCha8Rng| vec![rand_vec(rng, n, -1.0, 1.0), rand_vec(rng, n, -1.0, 1.0)];
    type Bin = fn(&mut Tape, NodeId, NodeId) -> NodeId;
    let binaries: [(&str, Bin, fn(f64, f64) -> f64); 3] = [
        ("add", |t, a, b| t.add(a, b).unwrap(), |a, b| a + b),
        ("sub", |t, a, b| t.sub(a, b).unwrap(), |a, b| a - b),
        ("mul", |t, a, b| t.mul(a, b).unwrap(), |a, b| a * b),
    ];
    for (name, op, f) in binaries {
        let case = OpCase {
            shapes: vec![shape.clone(), shape.clone()],
            inputs: two(&mut rng),
            build: Box::new(move |t, ids| op(t, ids[0], ids[1])),
            reference: Box::new(move |xs| xs[0].iter().zip(&xs[1]).map(|(&a, &b)| f(a, b)).collect()),
        };
        out.push((name, check_op(case, &mut rng)));
    }

    let factor = rng.random_range(-2.0f64..2.0) as f32;
    let case = OpCase {
        shapes: vec![shape.clone()],
        inputs: vec![rand_vec(&mut rng, n, -1.0, 1.0)],
        build: Box::new(move |t, ids| t.scale(ids[0], factor)),
        reference: Box::new(move |xs| xs[0].iter().map(|v| v * f64::from(factor)).collect()),
    };
    out.push(("scale", check_op(case, &mut rng)));

    let c = rng.random_range(-2.0f64..2.0) as f32;
    let case = OpCase {
        shapes: vec![shape.clone()],
        inputs: vec![rand_vec(&mut rng, n, -1.0, 1.0)],
        build: Box::new(move |t, ids| t.add_scalar(ids[0], c)),
        reference: Box::new(move |xs| xs[0].iter().map(|v| v + f64::from(c)).collect()),
    };
    out.push(("add_scalar", check_op(case, &mut rng)));

    let case = OpCase {
        shapes: vec![shape.clone()],
        inputs: vec![rand_vec(&mut rng, n, -1.0, 1.0)],
        build: Box::new(|t, ids| t.sum(ids[0])),
        reference: Box::new(|xs| vec![xs[0].iter().sum()]),
    };
    out.push(("sum", check_op(case, &mut rng)));

    let case = OpCase {
        shapes: vec![shape],
        inputs: vec![rand_vec(&mut rng, n, -1.0, 1.0)],
        build: Box::new(|t, ids| t.mean(ids[0])),
        reference: Box::new(move |xs| vec![xs[0].iter().sum::<f64>() / n as f64]),
    };
    out.push(("mean", check_op(case, &mut rng)));

    out.push(("interpolate", interpolate_error(&mut rng)));
    out
}

/// Gradient of a weighted table gather with respect to the table rows.
fn interpolate_error(rng: &mut ChaCha8Rng) -> f64 {
    use semfield::nn::EmbeddingTable;
    let (tables, corners, width, rows) = (rng.random_range(1..4), rng.random_range(1..9), rng.random_range(1..4), 6u32);
    let batch = rng.random_range(1..5);
    let mut store = ParamStore::new();
    let ids: Vec<_> = (0..tables)
        .map(|l| store.add_table(format!("t{l}"), EmbeddingTable::new(rows, width, 7 + l as u64, 0.5)))
        .collect();
    let n = batch * tables * corners;
    // repeated rows in one stencil exercise gradient accumulation
    let srows: Vec<u32> = (0..n).map(|_| rng.random_range(0..rows)).collect();
    let sweights: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let stencil = InterpStencil {
        tables,
        corners,
        rows: srows.clone(),
        weights: sweights.clone(),
    };
    let c = f32_round(&rand_vec(rng, batch * tables * width, -1.0, 1.0));

    let mut tape = Tape::new();
    let y = tape.interpolate(&store, &ids, stencil).unwrap();
    let cn = tape.input(tensor(vec![batch, tables * width], &c));
    let prod = tape.mul(y, cn).unwrap();
    let loss = tape.sum(prod);
    tape.backward(loss, &mut store).unwrap();

    let values: Vec<Vec<f64>> = ids
        .iter()
        .map(|&t| {
            let tab = store.table(t);
            (0..rows).flat_map(|r| (0..width).map(move |k| (r, k))).map(|(r, k)| f64::from(tab.value(r, k))).collect()
        })
        .collect();
    let objective = |vals: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for b in 0..batch {
            for l in 0..tables {
                for k in 0..corners {
                    let i = (b * tables + l) * corners + k;
                    let (r, w) = (srows[i] as usize, f64::from(sweights[i]));
                    for f in 0..width {
                        s += c[b * tables * width + l * width + f] * w * vals[l][r * width + f];
                    }
                }
            }
        }
        s
    };
    let mut pairs = Vec::new();
    for (l, &tid) in ids.iter().enumerate() {
        let grads = store.table(tid).grads();
        for r in 0..rows {
            for f in 0..width {
                let analytic = grads.get(r).map_or(0.0, |g| f64::from(g[f]));
                let mut vals = values.clone();
                let x0 = vals[l][r as usize * width + f];
                let mut fun = |v: f64| {
                    vals[l][r as usize * width + f] = v;
                    objective(&vals)
                };
                pairs.push((analytic, central(&mut fun, x0)));
            }
        }
    }
    max_rel(&pairs)
}

/// f64 re-implementation of the dual-branch field and its training loss.
struct RefField<'a> {
    field: &'a DualBranchField,
    dense: Vec<Vec<f64>>,
    table_overrides: HashMap<(usize, u32, usize), f64>,
}

fn param_index(store: &ParamStore, id: semfield::nn::ParamId) -> usize {
    store.tensor_ids().position(|p| p == id).expect("registered tensor")
}

impl<'a> RefField<'a> {
    fn new(field: &'a DualBranchField) -> Self {
        let dense = field
            .params()
            .tensors()
            .map(|(_, t)| t.values().iter().map(|&v| f64::from(v)).collect())
            .collect();
        Self {
            field,
            dense,
            table_overrides: HashMap::new(),
        }
    }

    fn table_value(&self, level: usize, row: u32, col: usize) -> f64 {
        if let Some(&v) = self.table_overrides.get(&(level, row, col)) {
            return v;
        }
        let tid = self.field.hash_encoding().tables()[level];
        f64::from(self.field.params().table(tid).value(row, col))
    }

    /// `(level, row)` pairs read for `p`, with their weights.
    fn corners(&self, p: &Point3) -> Vec<(usize, u32, f64)> {
        let cfg = self.field.config().hash_grid;
        let b = self.field.bounds();
        let mut out = Vec::new();
        for level in 0..cfg.levels {
            let res = cfg.grid_resolution(level).unwrap();
            let mut base = [0u32; 3];
            let mut frac = [0.0; 3];
            for a in 0..3 {
                let u = ((p[a] - b.min[a]) / (b.max[a] - b.min[a])).clamp(0.0, 1.0);
                let pos = u * f64::from(res);
                let cell = (pos.floor() as u32).min(res - 1);
                base[a] = cell;
                frac[a] = pos - f64::from(cell);
            }
            for (k, w) in trilinear_weights(frac).into_iter().enumerate() {
                let corner = [base[0] + (k as u32 & 1), base[1] + ((k as u32 >> 1) & 1), base[2] + ((k as u32 >> 2) & 1)];
                out.push((level, cfg.hash_index(corner, level).unwrap(), w));
            }
        }
        out
    }

    fn mlp(&self, layers: &[(semfield::nn::ParamId, semfield::nn::ParamId)], widths: &[usize], x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let store = self.field.params();
        let mut h = x;
        let mut hidden = h.clone();
        for (i, &(w, b)) in layers.iter().enumerate() {
            let (wv, bv) = (&self.dense[param_index(store, w)], &self.dense[param_index(store, b)]);
            let mut y = ref_linear(&h, wv, bv, 1, widths[i], widths[i + 1]);
            if i + 1 < layers.len() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
                hidden = y.clone();
            }
            h = y;
        }
        (h, hidden)
    }

    fn sdf_branch(&self, p: &Point3) -> (f64, Vec<f64>) {
        let f = self.field.config().hash_grid.features_per_level;
        let mut enc = vec![0.0; self.field.config().hash_grid.output_dim()];
        for (level, row, w) in self.corners(p) {
            for k in 0..f {
                enc[level * f + k] += w * self.table_value(level, row, k);
            }
        }
        let mlp = self.field.sdf_mlp();
        let (out, hidden) = self.mlp(mlp.layers(), mlp.widths(), enc);
        (out[0], hidden)
    }

    fn logits(&self, p: &Point3, feature: &[f64]) -> Vec<f64> {
        let cfg = self.field.config();
        let mut input: Vec<f64> = match cfg.material_input {
            semfield::field::MaterialInput::SphericalHarmonics => {
                let d = (p - self.field.bounds().center()).normalize();
                let mut sh = vec![0f32; cfg.sh_bands * cfg.sh_bands];
                sh_basis([d.x, d.y, d.z], cfg.sh_bands, &mut sh);
                sh.iter().map(|&v| f64::from(v)).collect()
            }
            semfield::field::MaterialInput::RawPosition => vec![f64::from(p.x as f32), f64::from(p.y as f32), f64::from(p.z as f32)],
        };
        if cfg.feature_concat {
            input.extend_from_slice(feature);
        }
        let mlp = self.field.material_mlp();
        self.mlp(mlp.layers(), mlp.widths(), input).0
    }

    fn loss(&self, batch: &TrainingBatch, w: &LossWeights) -> f64 {
        let k = self.field.config().num_classes;
        let mut sdfs = Vec::new();
        let mut logits = Vec::new();
        for p in &batch.points {
            let (s, z) = self.sdf_branch(p);
            sdfs.push(s);
            logits.extend(self.logits(p, &z));
        }
        let targets: Vec<f64> = batch.sdf_targets.iter().map(|&t| f64::from(t)).collect();
        let mut total = f64::from(w.sdf_weight) * ref_clamped_l1(&sdfs, &targets, f64::from(w.truncation))
            + f64::from(w.material_weight) * ref_ce(&logits, &batch.labels, k);
        if w.eikonal_weight > 0.0 {
            let h = self.field.bounds().diagonal() * 1e-3;
            let inv = f64::from((0.5 / h) as f32);
            let mut acc = 0.0;
            for p in &batch.points {
                let mut g2 = 0.0;
                for a in 0..3 {
                    let mut e = Point3::zeros();
                    e[a] = h;
                    let g = (self.sdf_branch(&(p + e)).0 - self.sdf_branch(&(p - e)).0) * inv;
                    g2 += g * g;
                }
                acc += (g2 - 1.0).powi(2);
            }
            total += f64::from(w.eikonal_weight) * acc / batch.points.len() as f64;
        }
        total
    }
}

pub struct FieldCheck {
    pub max_rel: f64,
    pub checked: usize,
    /// Entries skipped because a ReLU switches within the difference step.
    pub kinks: usize,
    /// Largest |f32 forward − f64 reference| over the batch distances.
    pub forward_gap: f64,
}

/// End-to-end check of the training loss against an f64 re-implementation.
/// A sample of dense parameters and every feature of a sample of touched
/// table rows are differenced.
pub fn field_loss_check(seed: u64, weights: LossWeights, config: FieldConfig) -> FieldCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let bounds = Aabb::new([-0.07, -0.07, -0.09], [0.07, 0.07, 0.09]).unwrap();
    let mut field = DualBranchField::new(config, bounds, seed).unwrap();
    // larger table entries than the init scale so every level matters
    let tids = field.hash_encoding().tables().to_vec();
    let n = 10;
    let points: Vec<Point3> = (0..n)
        .map(|_| loop {
            let p = Point3::new(rng.random_range(-0.07..0.07), rng.random_range(-0.07..0.07), rng.random_range(-0.09..0.09));
            if p.norm() > 0.02 {
                break p;
            }
        })
        .collect();
    {
        let probe = RefField::new(&field);
        let rows: Vec<(usize, u32)> = points.iter().flat_map(|p| probe.corners(p)).map(|(l, r, _)| (l, r)).collect();
        for (l, r) in rows {
            let row = field.params_mut().table_mut(tids[l]).row_mut(r).unwrap();
            for v in row.iter_mut() {
                *v = rng.random_range(-0.01f32..0.01);
            }
        }
    }
    let reference = RefField::new(&field);
    let preds: Vec<f64> = points.iter().map(|p| reference.sdf_branch(p).0).collect();
    let tr = f64::from(weights.truncation);
    let targets: Vec<f32> = preds
        .iter()
        .map(|&p| {
            // keep predictions inside the band and away from their targets
            assert!(p.abs() < tr * 0.95, "prediction {p} too close to the truncation band");
            let d = rng.random_range(0.002..0.03);
            (if rng.random_bool(0.5) { p + d } else { p - d }) as f32
        })
        .collect();
    let k = field.config().num_classes;
    let labels: Vec<Option<usize>> = (0..n)
        .map(|i| if i % 3 == 2 { None } else { Some(rng.random_range(0..k)) })
        .collect();
    let batch = TrainingBatch {
        points: points.clone(),
        sdf_targets: targets,
        labels,
    };

    let f32_sdf = field.sdf(&points).unwrap();
    let forward_gap = f32_sdf.iter().zip(&preds).map(|(&a, &b)| (f64::from(a) - b).abs()).fold(0.0, f64::max);

    field.params_mut().zero_grad();
    let mut tape = Tape::new();
    let nodes = field.total_loss(&mut tape, &batch, &weights).unwrap();
    tape.backward(nodes.total, field.params_mut()).unwrap();

    let mut reference = RefField::new(&field);
    let mut pairs = Vec::new();
    let mut kinks = 0;
    let store = field.params();
    let tensor_ids: Vec<_> = store.tensor_ids().collect();
    for (ti, &id) in tensor_ids.iter().enumerate() {
        let len = store.tensor(id).len();
        let grad = store.tensor(id).grad().map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
        for _ in 0..6 {
            let i = rng.random_range(0..len);
            let x0 = reference.dense[ti][i];
            let mut f = |v: f64| {
                reference.dense[ti][i] = v;
                let l = reference.loss(&batch, &weights);
                reference.dense[ti][i] = x0;
                l
            };
            match central_smooth(&mut f, x0) {
                Some(n) => pairs.push((f64::from(grad[i]), n)),
                None => kinks += 1,
            }
        }
    }
    let touched: Vec<(usize, u32, f64)> = points.iter().flat_map(|p| reference.corners(p)).collect();
    let f = field.config().hash_grid.features_per_level;
    for _ in 0..24 {
        let (level, row, _) = touched[rng.random_range(0..touched.len())];
        let g = store.table(tids[level]).grads().get(row).map(<[f32]>::to_vec).unwrap_or_else(|| vec![0.0; f]);
        for (col, &gv) in g.iter().enumerate() {
            let x0 = reference.table_value(level, row, col);
            let mut fun = |v: f64| {
                reference.table_overrides.insert((level, row, col), v);
                let l = reference.loss(&batch, &weights);
                reference.table_overrides.remove(&(level, row, col));
                l
            };
            match central_smooth(&mut fun, x0) {
                Some(n) => pairs.push((f64::from(gv), n)),
                None => kinks += 1,
            }
        }
    }
    FieldCheck {
        max_rel: max_rel(&pairs),
        checked: pairs.len(),
        kinks,
        forward_gap,
    }
}
