mod common;

use catfilter::mode_est::{ica_mode, pca_mode, TraceEnsemble};
use catfilter::simulate::{estimation_ensemble, heralded_states, PhaseSource};
use catfilter::temporal::{inner_product, TemporalMode};

fn ensemble(count: usize, seed: u64) -> (TraceEnsemble, TemporalMode) {
    let cfg = common::small_config(10, seed);
    let mode = cfg.theory_mode().unwrap();
    let src = PhaseSource::new(&cfg, &heralded_states(&cfg).unwrap(), &mode, 0).unwrap();
    let ens = estimation_ensemble(&src, count).unwrap();
    let truth = mode.cropped(mode.grid.index_of(ens.grid.start).unwrap(), ens.grid.len).unwrap();
    (ens, truth)
}

fn rows(ens: &TraceEnsemble) -> Vec<Vec<f64>> {
    (0..ens.len()).map(|i| ens.row(i)).collect()
}

#[test]
fn estimates_are_unit_norm_and_order_free() {
    let (ens, _) = ensemble(2000, 1);
    let a = pca_mode(&ens).unwrap();
    assert!((a.norm() - 1.0).abs() < 1e-9);
    let mut r = rows(&ens);
    r.reverse();
    let rev = TraceEnsemble::new(ens.grid, ens.t0, r.clone()).unwrap();
    assert!((inner_product(&a, &pca_mode(&rev).unwrap()).unwrap() - 1.0).abs() < 1e-9);
    let scaled = TraceEnsemble::new(ens.grid, ens.t0, r.iter().map(|x| x.iter().map(|v| 7.5 * v).collect()).collect()).unwrap();
    assert!((inner_product(&a, &pca_mode(&scaled).unwrap()).unwrap() - 1.0).abs() < 1e-9);

    let i1 = ica_mode(&ens, 20, 3).unwrap();
    let i2 = ica_mode(&rev, 20, 3).unwrap();
    assert!((i1.norm() - 1.0).abs() < 1e-9);
    assert!(inner_product(&i1, &i2).unwrap() > 0.999);
}

#[test]
fn more_traces_do_not_hurt() {
    let mut med = Vec::new();
    for count in [1000, 3000, 10_000] {
        let mut ov: Vec<f64> = (0..5)
            .map(|s| {
                let (ens, truth) = ensemble(count, 100 + s);
                inner_product(&pca_mode(&ens).unwrap(), &truth).unwrap()
            })
            .collect();
        ov.sort_by(f64::total_cmp);
        med.push(ov[2]);
    }
    assert!(med[0] <= med[1] + 1e-3 && med[1] <= med[2] + 1e-3, "{med:?}");
}
