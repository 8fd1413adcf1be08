//! Central finite-difference gradient checking.

use super::matrix::Matrix;
use super::tape::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is numerically zero are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tol
    }

    pub fn worst(&self) -> Option<&ParamReport> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `backward()` of the loss built by `f` against central differences
/// for every coordinate of `params`.
pub fn grad_check<F>(f: F, store: &ParamStore, params: &[ParamId], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(store, &mut tape)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Matrix> = params
        .iter()
        .map(|&id| {
            grads
                .param(id)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(store.get(id).rows(), store.get(id).cols()))
        })
        .collect();
    compare_gradients(&analytic, &f, store, params, h, tol)
}

/// Checks externally supplied gradients against central differences of the
/// loss built by `f`.
pub fn compare_gradients<F>(
    analytic: &[Matrix],
    f: F,
    store: &ParamStore,
    params: &[ParamId],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore, &mut Tape) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(s, &mut tape)?;
        Ok(tape.scalar(loss))
    };
    let mut probe = store.clone();
    let mut reports = Vec::with_capacity(params.len());
    let mut overall: f64 = 0.0;
    for (&id, a) in params.iter().zip(analytic) {
        let mut rep = ParamReport {
            name: store.name(id).to_string(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + h;
            let plus = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig - h;
            let minus = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a.data()[k], numeric);
            if err > rep.max_rel_error || k == 0 {
                rep.max_rel_error = err;
                rep.worst_index = k;
                rep.analytic = a.data()[k];
                rep.numeric = numeric;
            }
        }
        overall = overall.max(rep.max_rel_error);
        reports.push(rep);
    }
    Ok(GradCheckReport {
        max_rel_error: overall,
        tol,
        params: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// f(x) = xᵀ Q x with constant Q; analytic gradient (Q + Qᵀ) x.
    fn quadratic(q: Matrix) -> impl Fn(&ParamStore, &mut Tape) -> Result<Var> {
        move |s, tape| {
            let x = tape.param(s, ParamId(0));
            let qv = tape.constant(q.clone());
            let xt = tape.transpose(x);
            let qx = tape.matmul(qv, x)?;
            tape.matmul(xt, qx)
        }
    }

    #[test]
    fn quadratic_form_passes_tight_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random(4, 4, &mut rng);
        let mut store = ParamStore::new();
        let x = store.add("x", random(4, 1, &mut rng));
        let f = quadratic(q.clone());
        let rep = grad_check(&f, &store, &[x], 1e-5, 1e-6).unwrap();
        assert!(rep.passed(), "{rep:?}");

        let expected = q.add(&q.transpose()).unwrap().matmul(store.get(x)).unwrap();
        let mut tape = Tape::new();
        let loss = f(&store, &mut tape).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.param(x).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn sign_flipped_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random(3, 3, &mut rng);
        let mut store = ParamStore::new();
        let x = store.add("x", random(3, 1, &mut rng));
        let f = quadratic(q);
        let mut tape = Tape::new();
        let loss = f(&store, &mut tape).unwrap();
        let flipped = tape.backward(loss).unwrap().param(x).unwrap().scale(-1.0);
        let rep = compare_gradients(&[flipped], &f, &store, &[x], 1e-5, 1e-6).unwrap();
        assert!(!rep.passed());
    }

    #[test]
    fn softmax_cross_entropy_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let z = store.add("z", random(1, 4, &mut rng));
        let f = |s: &ParamStore, tape: &mut Tape| {
            let z = tape.param(s, ParamId(0));
            let p = tape.rowwise_softmax(z);
            tape.cross_entropy(p, 2)
        };
        let rep = grad_check(f, &store, &[z], 1e-5, 1e-4).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn matmul_gradient_matches_ones_times_bt() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let a = store.add("a", random(5, 4, &mut rng));
        let b = store.add("b", random(4, 3, &mut rng));
        let f = |s: &ParamStore, tape: &mut Tape| {
            let a = tape.param(s, ParamId(0));
            let b = tape.param(s, ParamId(1));
            let c = tape.matmul(a, b)?;
            Ok(tape.sum(c))
        };
        let rep = grad_check(f, &store, &[a, b], 1e-5, 1e-4).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let mut tape = Tape::new();
        let loss = f(&store, &mut tape).unwrap();
        let g = tape.backward(loss).unwrap();
        let expected = Matrix::ones(5, 3).matmul(&store.get(b).transpose()).unwrap();
        assert!(g.param(a).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn every_tape_op_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let a = store.add("a", random(3, 2, &mut rng).map(|v| v + 2.0));
        let b = store.add("b", random(1, 2, &mut rng));
        let f = |s: &ParamStore, tape: &mut Tape| {
            let a = tape.param(s, ParamId(0));
            let b = tape.param(s, ParamId(1));
            let t = tape.tanh(a);
            let r = tape.add_row(t, b)?;
            let n = tape.row_normalize(a, 1e-12);
            let h = tape.hcat(r, n)?;
            let sel = tape.select_rows(h, &[2, 0, 2])?;
            let st = tape.vstack(&[sel, h])?;
            let cs = tape.col_sums(st);
            let lse = tape.log_sum_exp(cs);
            let row = tape.row(h, 1)?;
            let fro = tape.frobenius_norm(row);
            let mse = tape.mean_squared_error(b, Matrix::row_vector(&[0.3, -0.2]))?;
            let ce = tape.cross_entropy(row, 3)?;
            let at = tape.transpose(a);
            let rl = tape.relu(at);
            let rs = tape.sum(rl);
            let m = tape.mean(a);
            let sub = tape.sub(lse, fro)?;
            let s2 = tape.add_scalar(sub, 1.0);
            tape.add_n(&[s2, mse, ce, rs, m])
        };
        let rep = grad_check(f, &store, &[a, b], 1e-5, 1e-6).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }
}
