//! Invariant suite behind the `validate` scenario. Random inputs come from a
//! fixed-seed ChaCha8 stream so reruns are byte-identical.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::scenarios::{Cell, Table};
use super::Report;
use crate::correlations::{correlation_kernel, two_time_correlation};
use crate::error::Result;
use crate::evolution::{evolve_state_with, k_term_curves, propagate, propagate_with, Picture};
use crate::model::{
    build_generator, build_reduced_generator, f_tilde, product_state, LindbladGenerator, ModelOperators, ModelParams,
};
use crate::ode::linspace;
use crate::operators::{OperatorMatrix, StateMatrix, C64};
use crate::oracles::{self, SpectralFunction};

pub const SEED: u64 = 0x5eed_0ff2;
pub const DUALITY_PAIRS: usize = 20;
pub const FREQUENCIES: usize = 100;
pub const DUALITY_TIME: f64 = 1.0;
/// Amplifier cutoff for the random duality pairs.
pub const DUALITY_CUTOFF: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tolerance`.
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, tolerance, pass: value <= tolerance }
    }
}

fn max_dev(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn random_state(rng: &mut impl Rng, space: &crate::operators::CompositeSpace) -> Result<StateMatrix> {
    let n = space.total_dim();
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    StateMatrix::new(space.clone(), rho / tr, 1e-10)
}

pub fn random_operator(rng: &mut impl Rng, space: &crate::operators::CompositeSpace) -> Result<OperatorMatrix> {
    let n = space.total_dim();
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    OperatorMatrix::new(space.clone(), m)
}

fn state_checks(gen: &LindbladGenerator, horizon: f64, out: &mut Vec<Check>) -> Result<()> {
    let rho0 = product_state(gen.space(), 1, 0)?;
    let (mut trace, mut herm, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    evolve_state_with(gen, &rho0, &linspace(0.0, horizon, 26), |_, _, s| {
        trace = trace.max((s.trace() - 1.0).norm());
        let r = s.entries();
        herm = herm.max((r - r.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max));
        min_eig = min_eig.min(s.min_eigenvalue());
        Ok(())
    })?;
    out.push(Check::at_most("trace_preservation", trace, 1e-9));
    out.push(Check::at_most("hermiticity", herm, 1e-9));
    out.push(Check { name: "positivity", value: min_eig, tolerance: -1e-9, pass: min_eig >= -1e-9 });

    let id = OperatorMatrix::identity(gen.space());
    let mut unital = 0.0f64;
    propagate_with(gen, Picture::Heisenberg, &id, &linspace(0.0, horizon, 26), |_, _, y| {
        unital = unital.max((y - id.entries()).iter().map(|v| v.norm()).fold(0.0, f64::max));
        Ok(())
    })?;
    out.push(Check::at_most("adjoint_unitality", unital, 1e-9));
    Ok(())
}

fn duality_check(gen: &LindbladGenerator, t: f64, rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for _ in 0..DUALITY_PAIRS {
        let rho = random_state(rng, gen.space())?;
        let o = random_operator(rng, gen.space())?;
        let rho_op = OperatorMatrix::new(gen.space().clone(), rho.entries().clone())?;
        let rho_t = propagate(gen, Picture::Schrodinger, &rho_op, &[0.0, t])?.pop().expect("two samples");
        let o_t = propagate(gen, Picture::Heisenberg, &o, &[0.0, t])?.pop().expect("two samples");
        let schr = o.try_mul(&rho_t)?.trace();
        let heis = o_t.try_mul(&rho_op)?.trace();
        worst = worst.max((schr - heis).norm());
    }
    Ok(Check::at_most("schrodinger_heisenberg_duality", worst, 1e-8))
}

fn regression_checks(gen: &LindbladGenerator, horizon: f64, out: &mut Vec<Check>) -> Result<()> {
    let rho0 = product_state(gen.space(), 1, 0)?;
    let ops = ModelOperators::new(gen.space())?;
    let a = &ops.p2 + &ops.a;
    let b = &ops.lower01.adjoint() + &ops.p1;
    let mut worst = 0.0f64;
    let mut rho_samples = Vec::new();
    let ts = [0.0, 0.3 * horizon.min(10.0), horizon.min(10.0)];
    evolve_state_with(gen, &rho0, &ts, |_, _, s| {
        rho_samples.push(s.clone());
        Ok(())
    })?;
    for (&t, rho_t) in ts.iter().zip(&rho_samples) {
        let direct = rho_t.expectation(&a.try_mul(&b)?)?;
        worst = worst.max((two_time_correlation(gen, &rho0, &a, &b, t, 0.0)? - direct).norm());
    }
    out.push(Check::at_most("regression_tau_zero", worst, 1e-9));

    let f = f_tilde(gen.params(), gen.space())?;
    let kernel = correlation_kernel(gen, &rho0, &f, horizon.min(10.0), 41)?;
    out.push(Check::at_most("kernel_hermitian_symmetry", kernel.hermitian_defect(), 1e-8));
    Ok(())
}

fn spectral_checks(cfg: &RunConfig, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let p = &cfg.params;
    let width = p.kappa.max(p.gamma1 + p.gamma2);
    let worst = max_dev((0..FREQUENCIES).map(|_| {
        let w = p.detuning + rng.gen_range(-20.0..20.0) * width;
        (oracles::transmission(w, p).norm_sqr() + oracles::reflection(w, p).norm_sqr() - 1.0).abs()
    }));
    out.push(Check::at_most("transmission_plus_reflection", worst, 1e-12));
    if p.kappa > 0.0 {
        let norm = SpectralFunction::photon(p)?.norm_sqr_integral(1e-11)?.value;
        out.push(Check::at_most("photon_spectrum_normalization", (norm - 1.0).abs(), 1e-8));
    }
    let overlap = oracles::p_abs_overlap(p)?;
    out.push(Check::at_most("overlap_matches_closed_form", (overlap - oracles::p_abs(p)?).abs(), 1e-6));
    Ok(())
}

fn k_term_checks(cfg: &RunConfig, out: &mut Vec<Check>) -> Result<()> {
    let p = &cfg.params;
    let gen = build_reduced_generator(p)?;
    let curves = k_term_curves(&gen, &linspace(0.0, cfg.horizon, cfg.samples))?;
    let k2_limit = p.gamma2 / (p.gamma1 + p.gamma2);
    out.push(Check::at_most("k2_asymptote", (curves[1].last() - k2_limit).norm(), 1e-3));
    out.push(Check::at_most("k4_identically_one", max_dev(curves[3].values().iter().map(|v| (v - 1.0).norm())), 1e-3));
    if p.detuning == 0.0 {
        out.push(Check::at_most("k6_identically_zero", max_dev(curves[5].values().iter().map(|v| v.norm())), 1e-3));
    }
    out.push(Check::at_most("k1_matches_p_abs", (curves[0].last().re - oracles::p_abs(p)?).abs(), 1e-3));
    Ok(())
}

/// Runs every check on the configured model.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let full = build_generator(&cfg.params)?;
    let mut checks = Vec::new();
    state_checks(&full, cfg.horizon, &mut checks)?;
    let small = build_generator(&ModelParams { n_c: cfg.params.n_c.min(DUALITY_CUTOFF), ..cfg.params })?;
    checks.push(duality_check(&small, cfg.horizon.min(DUALITY_TIME), &mut rng)?);
    regression_checks(&full, cfg.horizon, &mut checks)?;
    spectral_checks(cfg, &mut rng, &mut checks)?;
    k_term_checks(cfg, &mut checks)?;
    Ok(checks)
}

pub fn report(cfg: &RunConfig) -> Result<Report> {
    let checks = run_checks(cfg)?;
    let mut table = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut summary = Vec::new();
    for c in &checks {
        table.push(vec![Cell::Text(c.name.into()), Cell::Num(c.value), Cell::Num(c.tolerance), Cell::Flag(c.pass)]);
        summary.push(format!("{:<32} {:>12.3e}  (tol {:.0e})  {}", c.name, c.value, c.tolerance, if c.pass { "ok" } else { "FAIL" }));
    }
    let failures = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    Ok(Report { table, summary, failures })
}
