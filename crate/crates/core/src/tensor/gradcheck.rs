//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use super::{ParameterStore, Tape, Tensor, VarId};

/// Worst relative error between `analytic` and central finite differences of
/// `loss` over every coordinate of every parameter in `store`.
///
/// The relative error for one coordinate is `|a - n| / max(|a|, |n|, 1)`,
/// which degrades to absolute error near zero where the numerical estimate is
/// dominated by round-off. Panics if the loss turns non-finite.
pub fn grad_check<F>(
    mut loss: F,
    store: &mut ParameterStore,
    analytic: &BTreeMap<String, Tensor>,
    eps: f64,
) -> f64
where
    F: FnMut(&ParameterStore) -> f64,
{
    assert!(eps > 0.0, "grad_check eps must be positive");
    let names: Vec<String> = store.names().cloned().collect();
    let mut worst = 0.0f64;
    for name in &names {
        let len = store.get(name).len();
        let a = analytic
            .get(name)
            .unwrap_or_else(|| panic!("missing analytic gradient for {name:?}"));
        assert_eq!(a.len(), len, "analytic gradient shape for {name:?}");
        for i in 0..len {
            let orig = store.get(name).data()[i];
            store.get_mut(name).data_mut()[i] = orig + eps;
            let up = loss(store);
            store.get_mut(name).data_mut()[i] = orig - eps;
            let down = loss(store);
            store.get_mut(name).data_mut()[i] = orig;
            assert!(
                up.is_finite() && down.is_finite(),
                "non-finite loss while probing {name:?}[{i}]"
            );
            let numeric = (up - down) / (2.0 * eps);
            let err = (a.data()[i] - numeric).abs()
                / a.data()[i].abs().max(numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// Convenience wrapper: `build` constructs the loss on a fresh tape from
/// staged parameter vars; the analytic gradient comes from one backward pass
/// and is then verified with [`grad_check`].
pub fn grad_check_tape<G>(build: G, store: &mut ParameterStore, eps: f64) -> f64
where
    G: Fn(&mut Tape, &BTreeMap<String, VarId>) -> VarId,
{
    let mut tape = Tape::new();
    let vars = store.stage(&mut tape);
    let root = build(&mut tape, &vars);
    assert!(tape.value(root).item().is_finite(), "non-finite loss");
    let mut grads = tape.backward(root);
    let analytic = store.collect_grads(&vars, &mut grads);

    grad_check(
        |s| {
            let mut t = Tape::new();
            let vars = s.stage(&mut t);
            let root = build(&mut t, &vars);
            t.value(root).item()
        },
        store,
        &analytic,
        eps,
    )
}
