//! Central finite-difference check of autodiff gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::error::Result;

/// Adjoints smaller than this are compared absolutely rather than relatively.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares backprop gradients of the scalar built by `build` with central
/// differences of step `h` on up to `samples` randomly chosen coordinates of
/// `store`. `build` must be deterministic (re-seed any RNG it uses).
pub fn check_gradients<R, F>(
    store: &mut ParamStore,
    samples: usize,
    h: f64,
    rng: &mut R,
    mut build: F,
) -> Result<GradCheckReport>
where
    R: Rng,
    F: FnMut(&mut Graph, &ParamStore) -> Result<Var>,
{
    store.zero_grad();
    let mut g = Graph::new(true);
    let loss = build(&mut g, store)?;
    g.backward(loss)?.accumulate_into(store);
    drop(g);

    let mut eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(true);
        let loss = build(&mut g, s)?;
        Ok(g.value(loss).item())
    };

    let offsets: Vec<(ParamId, usize)> = store
        .ids()
        .flat_map(|id| (0..store.value(id).len()).map(move |j| (id, j)))
        .collect();
    let n = samples.min(offsets.len());
    let mut report = GradCheckReport {
        coordinates: n,
        max_rel_error: 0.0,
        worst: None,
    };
    for k in sample(rng, offsets.len(), n) {
        let (id, j) = offsets[k];
        let analytic = store.grad(id).data()[j];
        let orig = store.value(id).data()[j];
        store.value_mut(id).data_mut()[j] = orig + h;
        let plus = eval(store)?;
        store.value_mut(id).data_mut()[j] = orig - h;
        let minus = eval(store)?;
        store.value_mut(id).data_mut()[j] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = rel_error(analytic, numeric);
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((store.get(id).name.clone(), j, analytic, numeric));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_primitive_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let w = store
            .add("w", crate::numerics::init_uniform(&[3, 4], 4, &mut rng))
            .unwrap();
        let m = store
            .add("m", crate::numerics::init_uniform(&[4, 3], 3, &mut rng))
            .unwrap();
        let e = store
            .add("e", crate::numerics::init_uniform(&[5, 4], 4, &mut rng))
            .unwrap();
        let b = store.add("b", Tensor::vector(vec![0.1, -0.2, 0.3])).unwrap();
        let report = check_gradients(&mut store, 1000, 1e-5, &mut rng, |g, s| {
            let mut drop_rng = ChaCha8Rng::seed_from_u64(99);
            let wv = g.param(s, w);
            let mv = g.param(s, m);
            let bv = g.param(s, b);
            let x = g.embedding_lookup(s, e, 2)?;
            let x2 = g.embedding_lookup(s, e, 4)?;
            let y = g.matvec(wv, x)?;
            let y = g.add(y, bv)?;
            let y = g.tanh(y);
            let k = g_const(g);
            let z = g.vecmat(y, k)?;
            let z = g.sigmoid(z);
            let z = g.dropout(z, 0.3, &mut drop_rng);
            let st = g.stack(&[x, x2])?;
            let mm = g.matmul(st, mv)?;
            let mm = g.add_row(mm, bv)?;
            let mean = g.mean_over_axis(mm, 0)?;
            let mean1 = g.mean_over_axis(mm, 1)?;
            let cat = g.concat(&[mean, mean1, z])?;
            let sl = g.slice(cat, 1, 5)?;
            let sm = g.softmax(sl)?;
            let ls = g.log_softmax(cat)?;
            let p = g.pick(ls, 2)?;
            let d = g.dot(sm, sm)?;
            let ex = g.exp(d);
            let diff = g.sub(ex, p)?;
            let sq = g.mul(diff, diff)?;
            let sc = g.scale(sq, 0.5);
            Ok(g.sum(sc))
        })
        .unwrap();
        assert!(report.passes(1e-6), "{report:?}");
        assert_eq!(report.coordinates, store.num_scalars());

        fn g_const(g: &mut Graph) -> Var {
            g.constant(Tensor::matrix(3, 2, vec![0.5, -1.0, 0.25, 2.0, -0.7, 0.3]).unwrap())
        }
    }
}
