//! The Poissonized engine against the draw-by-draw engine and exact values.

use kton::exact::marginal_prob_bracket;
use kton::limits::harmonic;
use kton::sampler::{
    batch_fixed_draws, batch_until_complete, CollectorConfig, DrawSchedule, Engine, TrialRecord,
};
use kton::stats::{chi_square_pmf, ks_two_sample, summarize, tally, EmpiricalSample};

fn runs(n: u64, m: u32, seed: u64, trials: u64, engine: Engine) -> Vec<TrialRecord> {
    let config = CollectorConfig::new(n, m, seed, trials).unwrap().with_engine(engine);
    batch_until_complete(&config, 0).unwrap()
}

fn column(recs: &[TrialRecord], f: impl Fn(&TrialRecord) -> f64) -> Vec<f64> {
    recs.iter().map(f).collect()
}

#[test]
fn stopping_time_laws_agree() {
    for (n, m) in [(50, 1), (30, 2), (8, 3)] {
        let a = runs(n, m, 11, 20_000, Engine::Direct);
        let b = runs(n, m, 12, 20_000, Engine::Poissonized);
        let t = |r: &TrialRecord| r.total_draws as f64;
        let ks = ks_two_sample(
            &EmpiricalSample::new(column(&a, t)).unwrap(),
            &EmpiricalSample::new(column(&b, t)).unwrap(),
        );
        let p = ks.p_value_bound.unwrap();
        assert!(p > 1e-3, "n={n} m={m}: KS {} p {p}", ks.statistic);
    }
}

#[test]
fn poissonized_moments_match_harmonic_numbers() {
    for n in [20, 200] {
        let recs = runs(n, 1, 5, 40_000, Engine::Poissonized);
        let t = summarize(&column(&recs, |r| r.total_draws as f64)).unwrap();
        let target = n as f64 * harmonic(n);
        assert!((t.mean - target).abs() <= 4.0 * t.std_error, "{} vs {target}", t.mean);
        let s1 = summarize(&column(&recs, |r| r.kton(1) as f64)).unwrap();
        assert!((s1.mean - harmonic(n)).abs() <= 4.0 * s1.std_error, "{} vs {}", s1.mean, harmonic(n));
    }
}

#[test]
fn singleton_counts_agree_between_engines() {
    let n = 40;
    let a = runs(n, 2, 21, 20_000, Engine::Direct);
    let b = runs(n, 2, 22, 20_000, Engine::Poissonized);
    // Two-sample chi-square on S_2 at the stop: the direct sample gives the
    // reference law, so the statistic is compared with doubled variance.
    let ca = tally(a.iter().map(|r| r.kton(2)));
    let cb = tally(b.iter().map(|r| r.kton(2)));
    let mut stat = 0.0;
    let mut bins = 0;
    for r in 0..=*ca.keys().chain(cb.keys()).max().unwrap() {
        let x = *ca.get(&r).unwrap_or(&0) as f64;
        let y = *cb.get(&r).unwrap_or(&0) as f64;
        if x + y >= 10.0 {
            stat += (x - y) * (x - y) / (x + y);
            bins += 1;
        }
    }
    let dof = (bins - 1) as f64;
    assert!(stat < dof + 6.0 * (2.0 * dof).sqrt(), "chi2 {stat} on {dof}");
}

#[test]
fn fixed_draw_histograms_follow_exact_marginals() {
    let (n, draws, k) = (12u64, 30u64, 2u64);
    let config = CollectorConfig::new(n, 1, 9, 20_000).unwrap();
    let hists = batch_fixed_draws(&config, &DrawSchedule::custom(draws), 0).unwrap();
    assert!(hists.iter().all(|h| h.draws() == draws && h.n_total() == n));
    let counts = tally(hists.iter().map(|h| h.kton_count(k)));
    let pmf = |r: u64| marginal_prob_bracket(n, draws, k, r, None).unwrap().estimate;
    let g = chi_square_pmf(&counts, pmf, "exact marginal").unwrap();
    assert!(g.p_value_bound.unwrap() > 1e-3, "{g:?}");
}
