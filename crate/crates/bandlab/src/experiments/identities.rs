use super::{Check, McConfig};
use crate::ensemble::{resolvent, sample_stream, ward_report};
use crate::error::Result;
use crate::graphcalc::{catalog, graph_kernel, renormalize_self_energy, CatalogTag, EvalContext, KernelSet};
use crate::kernels::{splus_kernel, sminus_kernel, theta_kernel, SelfEnergyKernel};
use crate::spectral::{mass_identity_residual, self_consistency_residual};
use std::sync::Arc;

/// Frames sampled per spectral point for the Ward check.
pub const WARD_FRAMES: usize = 4;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Exact identities at every point of `cfg`, in order: semicircle self-consistency,
/// the mass identity, `S+-` row sums and conjugation, the `Theta` row sum, the
/// Ward identities on sampled frames, and sum-zero plus parity of the
/// renormalized sixth-order self-energies.
///
/// Stops after the first failed check, which is then the last element.
pub fn exact_checks(cfg: &McConfig) -> Result<Vec<Check>> {
    cfg.validate()?;
    let profile = cfg.build_profile()?;
    let points = cfg.spectral_points()?;
    let lat = *cfg.geometry.lattice();
    let mut out = FailFast::default();
    macro_rules! push {
        ($c:expr) => {
            if !out.push($c) {
                return Ok(out.checks);
            }
        };
    }
    for pt in &points {
        let tag = format!("z={}{:+}i", pt.z.re, pt.z.im);
        push!(Check::at_most(format!("{tag}:self_consistency"), self_consistency_residual(pt), 1e-12));
        push!(Check::at_most(format!("{tag}:mass_identity"), mass_identity_residual(pt)?, 1e-12));

        let sp = splus_kernel(&profile, pt)?;
        let sm = sminus_kernel(&profile, pt)?;
        let m2 = pt.m * pt.m;
        let target = m2 / (1.0 - m2);
        push!(Check::at_most(format!("{tag}:splus_row_sum"), (sp.row_sum() - target).norm() / target.norm(), 1e-10));
        let conj = sp.values().iter().zip(sm.values()).map(|(a, b)| (a.conj() - b).norm()).fold(0.0, f64::max);
        push!(Check::at_most(format!("{tag}:sminus_is_conjugate"), conj, 0.0));

        let theta = theta_kernel(&profile, pt)?;
        let mass = pt.theta_mass.expect("eta > 0");
        push!(Check::at_most(format!("{tag}:theta_row_sum"), rel(theta.row_sum().re, mass), 1e-8));

        for s in 0..WARD_FRAMES.min(cfg.samples) as u64 {
            let sample = Arc::new(sample_stream(&profile, cfg.seed, s)?);
            let w = ward_report(&resolvent(&sample, pt.z)?);
            push!(Check::at_most(format!("{tag}:ward[{s}]"), w.residual() / w.scale, 1e-10));
        }

        let ks = KernelSet::new(&profile, pt)?;
        let ctx = EvalContext::new(&ks).with_budget(cfg.budget);
        for g in catalog(CatalogTag::E6)? {
            let e = SelfEnergyKernel::new(graph_kernel(&g, &ctx, "x", "y")?, 6, g.name.clone())?;
            let scale = e.kernel.values().iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
            let parity = (0..lat.n())
                .map(|i| (e.kernel.values()[i] - e.kernel.values()[lat.neg_index(i)]).norm())
                .fold(0.0, f64::max);
            push!(Check::at_most(format!("{tag}:{}:parity", g.name), parity / scale, 1e-12));
            let r = renormalize_self_energy(&e, &profile)?;
            push!(Check::at_most(format!("{tag}:{}:renormalized_row_sum", g.name), r.kernel.row_sum().norm() / scale, 1e-12));
            push!(Check::at_most(format!("{tag}:{}:renormalized_symbol0", g.name), r.kernel.symbol()[0].norm(), 1e-10));
        }
    }
    Ok(out.checks)
}

#[derive(Default)]
struct FailFast {
    checks: Vec<Check>,
}

impl FailFast {
    /// Records `c`; false once a check has failed.
    fn push(&mut self, c: Check) -> bool {
        let pass = c.pass;
        self.checks.push(c);
        pass
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileSpec;
    use crate::torus::BandGeometry;
    use num_complex::Complex64 as C64;

    #[test]
    fn all_identities_hold() {
        let g = BandGeometry::new(1, 16, 3).unwrap();
        let cfg = McConfig::new(g, ProfileSpec::gaussian(), vec![C64::new(0.3, 0.4), C64::new(-1.0, 1.0)]).samples(2);
        let checks = exact_checks(&cfg).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
        assert_eq!(checks.len(), 2 * (5 + 2 + 18));
    }

    fn run(values: &[f64]) -> Vec<Check> {
        let mut out = FailFast::default();
        for (i, v) in values.iter().enumerate() {
            if !out.push(Check::at_most(format!("c{i}"), *v, 1.0)) {
                break;
            }
        }
        out.checks
    }

    #[test]
    fn stops_at_first_failure() {
        let c = run(&[0.5, 2.0, 0.1, 3.0]);
        assert_eq!(c.len(), 2);
        assert_eq!(c.last().unwrap().name, "c1");
        assert!(!c.last().unwrap().pass);
        assert_eq!(run(&[0.0, 1.0]).len(), 2);
    }
}
