//! Schrödinger and Heisenberg propagation under a [`LindbladGenerator`],
//! projection of evolved observables onto the K-term basis, and steady-state
//! detection on sampled curves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{product_state, LindbladGenerator, ModelOperators};
use crate::ode::{check_grid, Dopri5};
use crate::operators::{hs_inner, CompositeSpace, OperatorMatrix, StateMatrix, AMPLIFIER, C64};

/// Sampled curve on a strictly increasing time grid (times in units of 1/γ₁).
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    label: String,
    times: Vec<f64>,
    values: Vec<C64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        check_grid(&times)?;
        Ok(Self { label: label.into(), times, values })
    }

    pub fn real(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(label, times, values.into_iter().map(|v| C64::new(v, 0.0)).collect())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> C64 {
        *self.values.last().expect("series is never empty")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

/// Step cap in units of `1/‖L‖`; inside the stability region of the 5(4) pair.
const STABLE_STEP: f64 = 2.0;

fn integrator(gen: &LindbladGenerator) -> Dopri5 {
    let t = gen.params().tolerances;
    Dopri5::new(t.rtol, t.atol).with_max_step(STABLE_STEP / gen.norm_bound().max(f64::MIN_POSITIVE))
}

fn check_on(gen: &LindbladGenerator, space: &CompositeSpace) -> Result<()> {
    if gen.space() != space {
        return Err(Error::SpaceMismatch {
            left: gen.space().factor_dims().to_vec(),
            right: space.factor_dims().to_vec(),
        });
    }
    Ok(())
}

/// Propagates an arbitrary matrix (not necessarily a state) and streams the
/// samples to `observe`. `x0` is taken to sit at `times[0]`.
pub fn propagate_with<O>(
    gen: &LindbladGenerator,
    picture: Picture,
    x0: &OperatorMatrix,
    times: &[f64],
    mut observe: O,
) -> Result<()>
where
    O: FnMut(usize, f64, &DMatrix<C64>) -> Result<()>,
{
    check_on(gen, x0.space())?;
    let dp = integrator(gen);
    match picture {
        Picture::Schrodinger => dp.integrate(|y| gen.apply_raw(y), x0.entries().clone(), times, &mut observe)?,
        Picture::Heisenberg => {
            dp.integrate(|y| gen.apply_adjoint_raw(y), x0.entries().clone(), times, &mut observe)?
        }
    };
    Ok(())
}

pub fn propagate(
    gen: &LindbladGenerator,
    picture: Picture,
    x0: &OperatorMatrix,
    times: &[f64],
) -> Result<Vec<OperatorMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    propagate_with(gen, picture, x0, times, |_, _, y| {
        out.push(OperatorMatrix::new(gen.space().clone(), y.clone())?);
        Ok(())
    })?;
    Ok(out)
}

/// Population in the top two amplifier levels.
pub fn top_level_population(space: &CompositeSpace, rho: &DMatrix<C64>) -> f64 {
    let Some(n_c) = space.amplifier_cutoff() else {
        return 0.0;
    };
    (0..space.total_dim())
        .filter(|&i| space.levels(i)[AMPLIFIER] + 1 >= n_c)
        .map(|i| rho[(i, i)].re)
        .sum()
}

/// Streams `ρ(t)` for each grid time, checking every sample for Hermiticity,
/// unit trace, positivity and amplifier truncation.
pub fn evolve_state_with<O>(gen: &LindbladGenerator, rho0: &StateMatrix, times: &[f64], mut observe: O) -> Result<()>
where
    O: FnMut(usize, f64, &StateMatrix) -> Result<()>,
{
    let tol = gen.params().tolerances;
    rho0.validate(tol.positivity)?;
    let space = gen.space().clone();
    let x0 = OperatorMatrix::new(rho0.space().clone(), rho0.entries().clone())?;
    propagate_with(gen, Picture::Schrodinger, &x0, times, |k, t, y| {
        let state = StateMatrix::new_unchecked(space.clone(), y.clone());
        let top = top_level_population(&space, y);
        if top > tol.truncation {
            let n_c = space.amplifier_cutoff().unwrap_or(0);
            return Err(Error::TruncationBreach {
                time: t,
                population: top,
                tolerance: tol.truncation,
                n_c,
                suggested: n_c + 10,
            });
        }
        state
            .validate(tol.positivity)
            .map_err(|e| Error::InvalidState(format!("at t = {t}: {e}")))?;
        observe(k, t, &state)
    })
}

/// `ρ(t) = exp(L(t − t₀)) ρ₀` on the grid, `ρ₀` at `times[0]`.
pub fn evolve_state(gen: &LindbladGenerator, rho0: &StateMatrix, times: &[f64]) -> Result<Vec<StateMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    evolve_state_with(gen, rho0, times, |_, _, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

/// `O(t) = exp(L†(t − t₀)) O₀` on the grid.
pub fn evolve_observable(gen: &LindbladGenerator, o0: &OperatorMatrix, times: &[f64]) -> Result<Vec<OperatorMatrix>> {
    propagate(gen, Picture::Heisenberg, o0, times)
}

/// `tr(O ρ(t))` for each operator, sampled on the grid.
pub fn expectation_series(
    gen: &LindbladGenerator,
    rho0: &StateMatrix,
    ops: &[(&str, &OperatorMatrix)],
    times: &[f64],
) -> Result<Vec<TimeSeries>> {
    let mut values = vec![Vec::with_capacity(times.len()); ops.len()];
    evolve_state_with(gen, rho0, times, |_, _, s| {
        for (slot, (_, op)) in values.iter_mut().zip(ops) {
            slot.push(s.expectation(op)?);
        }
        Ok(())
    })?;
    ops.iter()
        .zip(values)
        .map(|((label, _), v)| TimeSeries::new(*label, times.to_vec(), v))
        .collect()
}

/// The six orthogonal operator components of the evolved `|F₂⟩⟨F₂|`
/// (tensored with the identity on the amplifier when present):
///
/// 1. `|1⟩⟨1| ⊗ |F₀⟩⟨F₀|`
/// 2. `|0⟩⟨0| ⊗ |F₁⟩⟨F₁|`
/// 3. `|1⟩⟨1| ⊗ |F₁⟩⟨F₁|`
/// 4. `I ⊗ |F₂⟩⟨F₂|`
/// 5. `a ⊗ |F₁⟩⟨F₀| + a† ⊗ |F₀⟩⟨F₁|`
/// 6. `i a ⊗ |F₁⟩⟨F₀| − i a† ⊗ |F₀⟩⟨F₁|`
#[derive(Clone, Debug)]
pub struct KBasis {
    terms: [OperatorMatrix; 6],
}

impl KBasis {
    pub fn new(space: &CompositeSpace) -> Result<Self> {
        let ops = ModelOperators::new(space)?;
        let n = ops.photon_number();
        let vac = &OperatorMatrix::identity(space) - &n;
        let forward = &ops.a * &ops.lower01.adjoint();
        let backward = forward.adjoint();
        let i = C64::new(0.0, 1.0);
        Ok(Self {
            terms: [
                &n * &ops.p0,
                &vac * &ops.p1,
                &n * &ops.p1,
                ops.p2.clone(),
                &forward + &backward,
                &forward.scale(i) - &backward.scale(i),
            ],
        })
    }

    pub fn terms(&self) -> &[OperatorMatrix; 6] {
        &self.terms
    }

    pub fn reconstruct(&self, coeffs: &[C64; 6]) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.terms[0].space());
        for (k, c) in self.terms.iter().zip(coeffs) {
            out = &out + &k.scale(*c);
        }
        out
    }
}

/// Hilbert–Schmidt projection `⟨K_i, O⟩ / ⟨K_i, K_i⟩` onto each basis element.
pub fn k_coefficients(o_t: &OperatorMatrix, basis: &KBasis) -> Result<[C64; 6]> {
    let mut out = [C64::new(0.0, 0.0); 6];
    for (slot, k) in out.iter_mut().zip(basis.terms()) {
        *slot = hs_inner(k, o_t)? / hs_inner(k, k)?;
    }
    Ok(out)
}

/// Heisenberg-evolves `|F₂⟩⟨F₂|` and returns the six K-coefficient curves.
pub fn k_term_curves(gen: &LindbladGenerator, times: &[f64]) -> Result<Vec<TimeSeries>> {
    let basis = KBasis::new(gen.space())?;
    let p2 = ModelOperators::new(gen.space())?.p2;
    let mut cols: Vec<Vec<C64>> = (0..6).map(|_| Vec::with_capacity(times.len())).collect();
    propagate_with(gen, Picture::Heisenberg, &p2, times, |_, _, y| {
        let o = OperatorMatrix::new(gen.space().clone(), y.clone())?;
        for (col, c) in cols.iter_mut().zip(k_coefficients(&o, &basis)?) {
            col.push(c);
        }
        Ok(())
    })?;
    cols.into_iter()
        .enumerate()
        .map(|(i, v)| TimeSeries::new(format!("k{}", i + 1), times.to_vec(), v))
        .collect()
}

/// `⟨c⟩(t)` from an arbitrary initial state on the full space.
pub fn amplitude_series(gen: &LindbladGenerator, rho0: &StateMatrix, times: &[f64]) -> Result<TimeSeries> {
    let c = ModelOperators::new(gen.space())?.amp.ok_or_else(|| Error::InvalidParameter {
        name: "space",
        reason: "generator has no amplifier factor".into(),
    })?;
    let mut series = expectation_series(gen, rho0, &[("c", &c)], times)?;
    Ok(series.remove(0))
}

/// `⟨1,F₀,0| c(t) |1,F₀,0⟩` in units of `μ/Γ`.
pub fn amplitude_term(gen: &LindbladGenerator, times: &[f64]) -> Result<TimeSeries> {
    let p = gen.params();
    if p.drive == 0.0 || p.amp_decay == 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "amplitude in units of mu/Gamma needs mu != 0 and Gamma > 0".into(),
        });
    }
    let rho0 = product_state(gen.space(), 1, 0)?;
    let raw = amplitude_series(gen, &rho0, times)?;
    let unit = p.drive / p.amp_decay;
    TimeSeries::new("c_over_mu_per_Gamma", raw.times().to_vec(), raw.values().iter().map(|v| v / unit).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyState {
    pub value: C64,
    /// First sample time after which the curve stays within `tol` of `value`.
    pub reached_at: f64,
}

/// Mean over the trailing `window` (a duration) if every sample in it lies
/// within `tol` of that mean.
pub fn detect_steady_state(series: &TimeSeries, window: f64, tol: f64) -> Result<SteadyState> {
    let times = series.times();
    let end = *times.last().expect("series is never empty");
    if !(window > 0.0) || window > end - times[0] {
        return Err(Error::InvalidGrid(format!(
            "window {window} does not fit in series span {}",
            end - times[0]
        )));
    }
    let start = times.partition_point(|&t| t < end - window);
    let tail = &series.values()[start..];
    if tail.len() < 2 {
        return Err(Error::InvalidGrid("fewer than two samples in the steady-state window".into()));
    }
    let mean = tail.iter().sum::<C64>() / tail.len() as f64;
    let max_deviation = tail.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    if max_deviation >= tol {
        return Err(Error::NotConverged { max_deviation, tolerance: tol });
    }
    let last_outside = series.values().iter().rposition(|v| (v - mean).norm() >= tol);
    let reached_at = match last_outside {
        None => times[0],
        Some(k) => times[k + 1],
    };
    Ok(SteadyState { value: mean, reached_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_generator, build_reduced_generator, ModelParams};
    use crate::ode::linspace;
    use approx::assert_abs_diff_eq;

    fn small() -> ModelParams {
        ModelParams { n_c: 8, ..ModelParams::default() }
    }

    #[test]
    fn frozen_generator_leaves_state_unchanged() {
        let p = ModelParams {
            kappa: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            amp_decay: 0.0,
            drive: 0.0,
            n_c: 3,
            ..ModelParams::default()
        };
        let gen = build_generator(&p).unwrap();
        let rho0 = product_state(gen.space(), 1, 1).unwrap();
        let traj = evolve_state(&gen, &rho0, &linspace(0.0, 5.0, 6)).unwrap();
        for s in traj {
            assert!((s.entries() - rho0.entries()).norm() < 1e-14);
        }
    }

    #[test]
    fn excited_molecule_splits_evenly() {
        let gen = build_reduced_generator(&ModelParams::default()).unwrap();
        let rho0 = product_state(gen.space(), 0, 1).unwrap();
        let p2 = ModelOperators::new(gen.space()).unwrap().p2;
        let s = expectation_series(&gen, &rho0, &[("p2", &p2)], &linspace(0.0, 40.0, 5)).unwrap();
        assert_abs_diff_eq!(s[0].last().re, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn cavity_decays_exponentially_and_ignores_molecule() {
        let times = linspace(0.0, 20.0, 41);
        let base = ModelParams { n_c: 20, ..small() };
        let variants = [
            (base, 0),
            (ModelParams { gamma2: 3.0, amp_decay: 0.4, drive: 0.3, ..base }, 1),
            (ModelParams { gamma1: 0.0, ..base }, 2),
        ];
        for (p, level) in variants {
            let gen = build_generator(&p).unwrap();
            let n = ModelOperators::new(gen.space()).unwrap().photon_number();
            let rho0 = product_state(gen.space(), 1, level).unwrap();
            let s = expectation_series(&gen, &rho0, &[("n", &n)], &times).unwrap();
            for (t, v) in times.iter().zip(s[0].values()) {
                assert_abs_diff_eq!(v.re, (-p.kappa * t).exp(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn cavity_amplitude_heisenberg_solution() {
        let p = ModelParams { detuning: 0.8, ..small() };
        let gen = build_generator(&p).unwrap();
        let a = ModelOperators::new(gen.space()).unwrap().a;
        let times = linspace(0.0, 10.0, 11);
        for (t, at) in times.iter().zip(evolve_observable(&gen, &a, &times).unwrap()) {
            assert!(at.max_abs_diff(&a.scale_real((-p.kappa * t / 2.0).exp())) < 1e-8);
        }
    }

    #[test]
    fn no_drive_keeps_amplifier_empty() {
        let p = ModelParams { drive: 0.0, ..small() };
        let gen = build_generator(&p).unwrap();
        let nc = ModelOperators::new(gen.space()).unwrap().amp_number().unwrap();
        let s = expectation_series(&gen, &product_state(gen.space(), 1, 0).unwrap(), &[("nc", &nc)], &linspace(0.0, 20.0, 21))
            .unwrap();
        assert!(s[0].values().iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn frozen_f2_amplitude_solves_linear_equation() {
        let p = ModelParams { kappa: 0.0, gamma1: 0.0, amp_detuning: 0.6, drive: 0.7, n_c: 12, ..ModelParams::default() };
        let gen = build_generator(&p).unwrap();
        let rho0 = product_state(gen.space(), 0, 2).unwrap();
        let times = linspace(0.0, 30.0, 31);
        let s = amplitude_series(&gen, &rho0, &times).unwrap();
        let lambda = C64::new(p.amp_decay / 2.0, p.amp_detuning);
        let steady = -C64::new(p.drive, 0.0) / lambda;
        for (t, v) in times.iter().zip(s.values()) {
            let exact = steady * (C64::new(1.0, 0.0) - (-lambda * *t).exp());
            assert!((v - exact).norm() < 1e-8, "t={t}: {v} vs {exact}");
        }
    }

    #[test]
    fn truncation_breach_is_reported() {
        let p = ModelParams { drive: 3.0, n_c: 4, ..ModelParams::default() };
        let gen = build_generator(&p).unwrap();
        let rho0 = product_state(gen.space(), 0, 2).unwrap();
        let err = evolve_state(&gen, &rho0, &linspace(0.0, 10.0, 11)).unwrap_err();
        match err {
            Error::TruncationBreach { n_c, suggested, .. } => {
                assert_eq!(n_c, 4);
                assert!(suggested > n_c);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn identity_is_stationary_in_heisenberg_picture() {
        let gen = build_generator(&small()).unwrap();
        let id = OperatorMatrix::identity(gen.space());
        for o in evolve_observable(&gen, &id, &linspace(0.0, 10.0, 6)).unwrap() {
            assert!(o.max_abs_diff(&id) < 1e-9, "{}", o.max_abs_diff(&id));
        }
    }

    #[test]
    fn k_basis_is_orthogonal_and_initially_k4() {
        for space in [CompositeSpace::reduced(), CompositeSpace::model(3)] {
            let basis = KBasis::new(&space).unwrap();
            for (i, ki) in basis.terms().iter().enumerate() {
                for (j, kj) in basis.terms().iter().enumerate() {
                    let ip = hs_inner(ki, kj).unwrap();
                    if i == j {
                        assert!(ip.re > 0.0);
                    } else {
                        assert!(ip.norm() < 1e-14, "K{} K{}", i + 1, j + 1);
                    }
                }
                assert!(ki.is_hermitian(0.0));
            }
            let p2 = ModelOperators::new(&space).unwrap().p2;
            let c = k_coefficients(&p2, &basis).unwrap();
            let expected = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
            for (got, want) in c.iter().zip(expected) {
                assert_abs_diff_eq!(got.re, want, epsilon = 1e-15);
                assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-15);
            }
            assert_eq!(basis.terms()[3], p2);
        }
    }

    #[test]
    fn evolved_projector_stays_in_k_span() {
        let p = ModelParams { detuning: 0.5, ..ModelParams::default() };
        let gen = build_reduced_generator(&p).unwrap();
        let basis = KBasis::new(gen.space()).unwrap();
        let p2 = ModelOperators::new(gen.space()).unwrap().p2;
        for o in evolve_observable(&gen, &p2, &[0.0, 1.0, 5.0, 20.0]).unwrap() {
            let c = k_coefficients(&o, &basis).unwrap();
            assert!(basis.reconstruct(&c).max_abs_diff(&o) < 1e-12);
        }
    }

    #[test]
    fn steady_state_detection() {
        let times = linspace(0.0, 50.0, 501);
        let flat = TimeSeries::real("flat", times.clone(), vec![0.25; 501]).unwrap();
        let ss = detect_steady_state(&flat, 10.0, 1e-4).unwrap();
        assert_eq!(ss.value, C64::new(0.25, 0.0));
        assert_eq!(ss.reached_at, 0.0);

        // e^{−Γt/2} first drops below tol at (2/Γ) ln(1/tol)
        let gamma = 1.0;
        let tol = 1e-3;
        let decay = TimeSeries::real("d", times.clone(), times.iter().map(|t| (-gamma * t / 2.0).exp()).collect()).unwrap();
        let ss = detect_steady_state(&decay, 10.0, tol).unwrap();
        let predicted = 2.0 / gamma * (1.0 / tol).ln();
        assert!((ss.reached_at - predicted).abs() <= 0.1 + 1e-9, "{} vs {predicted}", ss.reached_at);

        let ramp = TimeSeries::real("r", times.clone(), times.clone()).unwrap();
        assert!(matches!(detect_steady_state(&ramp, 10.0, 1e-4), Err(Error::NotConverged { .. })));
        assert!(detect_steady_state(&ramp, 60.0, 1e-4).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(TimeSeries::real("x", vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::real("x", vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
    }
}
