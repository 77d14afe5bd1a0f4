use super::{complex_z_score, frames, mc_rows, mean_stderr, Check, EstimatorReport, McConfig};
use crate::error::{Error, Result};
use crate::graphcalc::{catalog, evaluate_sum, AtomicGraph, CatalogTag, EvalContext, KernelSet};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Z-score threshold for statistics that vanish exactly in expectation.
pub const Z_THRESHOLD: f64 = 4.0;

/// `cfg.pairs` site pairs `(a, b)`; the first has `a = b`. Drawn from a stream
/// disjoint from the sample streams.
pub fn sample_pairs(cfg: &McConfig) -> Vec<(usize, usize)> {
    let n = cfg.geometry.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    (0..cfg.pairs)
        .map(|k| {
            let a = rng.gen_range(0..n);
            let b = if k == 0 { a } else { rng.gen_range(0..n) };
            (a, b)
        })
        .collect()
}

fn residual(cfg: &McConfig, tag: CatalogTag, name: &str) -> Result<EstimatorReport> {
    let mut r = residual_with_graphs(cfg, &catalog(tag)?, name)?;
    r.notes.insert(0, format!("catalog {tag:?}"));
    Ok(r)
}

/// `E [T_{a,bb} - m Theta_ab conj(G_bb) - sum_graphs A_{a,bb}]` at every point and pair,
/// for graphs with externals `a, b1, b2`.
pub fn residual_with_graphs(cfg: &McConfig, graphs: &[AtomicGraph], name: &str) -> Result<EstimatorReport> {
    let t0 = Instant::now();
    cfg.validate()?;
    if cfg.pairs == 0 {
        return Err(Error::InvalidArgument("need at least one (a, b) pair".into()));
    }
    let profile = cfg.build_profile()?;
    let points = cfg.spectral_points()?;
    let kernels = points.iter().map(|p| KernelSet::new(&profile, p)).collect::<Result<Vec<_>>>()?;
    for g in graphs {
        if g.internal_count() > cfg.budget.max_internal {
            return Err(Error::BudgetExceeded(format!(
                "{} has {} internal atoms, budget allows {}",
                g.name,
                g.internal_count(),
                cfg.budget.max_internal
            )));
        }
    }
    let pairs = sample_pairs(cfg);
    let n = cfg.geometry.n();

    let rows = mc_rows(cfg, |sample| {
        let fr = frames(sample, &points)?;
        let mut out = Vec::with_capacity(2 * points.len() * pairs.len());
        for ((frame, ks), pt) in fr.iter().zip(&kernels).zip(&points) {
            let ctx = EvalContext::new(ks).with_frame(frame).with_budget(cfg.budget);
            let theta = ks.theta.as_ref().expect("eta > 0");
            let g = frame.g();
            for &(a, b) in &pairs {
                let t: f64 = (0..n).map(|al| profile.s(a, al) * g.get(al, b).norm_sqr()).sum::<f64>() * pt.absm2;
                let lead = pt.m * theta.at(a, b) * g.get(b, b).conj();
                let graphs_value = evaluate_sum(graphs, &ctx, &[("a", a), ("b1", b), ("b2", b)])?;
                let r = C64::new(t, 0.0) - lead - graphs_value;
                out.push(r.re);
                out.push(r.im);
            }
        }
        Ok(out)
    })?;
    let (mean, stderr) = mean_stderr(&rows);

    let mut report = EstimatorReport::new(name, cfg);
    let mut k = 0;
    for pt in &points {
        for &(a, b) in &pairs {
            let label = format!("z={}{:+}i,a={a},b={b}", pt.z.re, pt.z.im);
            report.push_stat(format!("{label}:re"), mean[k], stderr[k]);
            report.push_stat(format!("{label}:im"), mean[k + 1], stderr[k + 1]);
            let (re, im) = (&report.stats[k], &report.stats[k + 1]);
            report.checks.push(Check::at_most(format!("{label}:z"), complex_z_score(re, im), Z_THRESHOLD));
            k += 2;
        }
    }
    report.notes.push(format!("{} graphs; pass when |mean| <= {Z_THRESHOLD} stderr", graphs.len()));
    report.runtime_seconds = t0.elapsed().as_secs_f64();
    Ok(report)
}

/// Second-order T-expansion residual, graphs from `catalog(A2)`.
pub fn residual_t2(cfg: &McConfig) -> Result<EstimatorReport> {
    residual(cfg, CatalogTag::A2, "residual_t2")
}

/// Third-order T-expansion residual, graphs from `catalog(A3)`.
pub fn residual_t3(cfg: &McConfig) -> Result<EstimatorReport> {
    residual(cfg, CatalogTag::A3, "residual_t3")
}
