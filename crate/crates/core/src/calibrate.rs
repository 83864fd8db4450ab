//! Least-squares fitting of model parameters to measured count profiles.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::kirchhoff::FarField;
use crate::observables::{coincidence_intensity, singles_intensity, PatternKind};
use crate::vector::ComplexVec3;

/// Measured counts against detector angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSeries {
    beta: Vec<f64>,
    counts: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

impl ReferenceSeries {
    pub fn new(beta: Vec<f64>, counts: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidArgument("reference series is empty".into()));
        }
        if counts.len() != beta.len() || sigma.as_ref().is_some_and(|s| s.len() != beta.len()) {
            return Err(Error::InvalidArgument(
                "reference columns have different lengths".into(),
            ));
        }
        if let Some(i) = beta.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "beta must be strictly increasing (point {} after {})",
                beta[i + 1],
                beta[i]
            )));
        }
        if let Some(c) = counts.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "counts must be finite and >= 0, got {c}"
            )));
        }
        if let Some(s) = sigma
            .iter()
            .flatten()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and > 0, got {s}"
            )));
        }
        Ok(Self {
            beta,
            counts,
            sigma,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameter {
    C1,
    AmplitudeScale,
    LengthB,
    ThicknessC,
}

impl FitParameter {
    pub const ALL: [FitParameter; 4] = [
        Self::C1,
        Self::AmplitudeScale,
        Self::LengthB,
        Self::ThicknessC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::C1 => "c1",
            Self::AmplitudeScale => "scale",
            Self::LengthB => "b",
            Self::ThicknessC => "c",
        }
    }
}

impl std::str::FromStr for FitParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown fit parameter '{s}' (expected c1, scale, b or c)"
                ))
            })
    }
}

/// Values of every fittable quantity; `c2` follows `c1` when `c1` is free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterValues {
    pub c1: f64,
    pub c2: f64,
    pub amplitude_scale: f64,
    pub length_b: f64,
    pub thickness_c: f64,
}

impl ParameterValues {
    pub fn from_config(config: &SimConfig, amplitude_scale: f64) -> Self {
        Self {
            c1: config.wave.c1,
            c2: config.wave.c2,
            amplitude_scale,
            length_b: config.geometry.length_b,
            thickness_c: config.geometry.thickness_c,
        }
    }

    pub fn get(&self, p: FitParameter) -> f64 {
        match p {
            FitParameter::C1 => self.c1,
            FitParameter::AmplitudeScale => self.amplitude_scale,
            FitParameter::LengthB => self.length_b,
            FitParameter::ThicknessC => self.thickness_c,
        }
    }

    /// Sets `p`; setting `c1` also sets `c2 = sqrt(1 - c1^2)`.
    pub fn set(&mut self, p: FitParameter, v: f64) {
        match p {
            FitParameter::C1 => {
                self.c1 = v;
                self.c2 = (1.0 - v * v).max(0.0).sqrt();
            }
            FitParameter::AmplitudeScale => self.amplitude_scale = v,
            FitParameter::LengthB => self.length_b = v,
            FitParameter::ThicknessC => self.thickness_c = v,
        }
    }

    pub fn apply(&self, config: &SimConfig) -> SimConfig {
        let mut cfg = *config;
        cfg.wave.c1 = self.c1;
        cfg.wave.c2 = self.c2;
        cfg.geometry.length_b = self.length_b;
        cfg.geometry.thickness_c = self.thickness_c;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub free: Vec<FitParameter>,
    /// Overrides of the default search interval for individual parameters.
    pub bounds: Vec<(FitParameter, (f64, f64))>,
    pub initial: ParameterValues,
    pub target: PatternKind,
    pub max_evals: usize,
    /// Simplex spread, in units of each parameter's search interval.
    pub tol: f64,
}

impl FitSpec {
    /// Fit setup starting from the configuration's own values with unit scale.
    pub fn new(config: &SimConfig, free: Vec<FitParameter>) -> Self {
        Self {
            free,
            bounds: Vec::new(),
            initial: ParameterValues::from_config(config, 1.0),
            target: PatternKind::Singles,
            max_evals: 500,
            tol: 1e-7,
        }
    }

    pub fn bounds_of(&self, p: FitParameter) -> (f64, f64) {
        if let Some((_, b)) = self.bounds.iter().rev().find(|(q, _)| *q == p) {
            return *b;
        }
        let v = self.initial.get(p);
        match p {
            FitParameter::C1 => (1e-6, 1.0 - 1e-6),
            FitParameter::AmplitudeScale => (1e-2, 1e1),
            FitParameter::LengthB => (0.5 * v, 2.0 * v),
            FitParameter::ThicknessC => (0.0, if v > 0.0 { 4.0 * v } else { 1e-4 }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.free.iter().enumerate() {
            if self.free[..i].contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "fit parameter '{}' listed twice",
                    p.name()
                )));
            }
            let (lo, hi) = self.bounds_of(*p);
            let v = self.initial.get(*p);
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bounds for '{}' must satisfy lo < hi, got [{lo}, {hi}]",
                    p.name()
                )));
            }
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "initial '{}' = {v} is outside its bounds [{lo}, {hi}]",
                    p.name()
                )));
            }
            if *p == FitParameter::C1 && !(lo > 0.0 && hi < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "c1 bounds must lie inside (0, 1), got [{lo}, {hi}]"
                )));
            }
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidArgument("max_evals must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ParameterValues,
    pub rss: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    pub model: Vec<f64>,
}

/// Peak-normalized model pattern at the reference angles.
pub struct Model<'a> {
    base: SimConfig,
    target: PatternKind,
    beta: &'a [f64],
    /// Per-slit amplitudes, kept while the geometry is not being fitted.
    cached: Option<Vec<(ComplexVec3, Option<ComplexVec3>)>>,
}

impl<'a> Model<'a> {
    /// `geometry_fixed` allows the per-slit amplitudes to be computed once.
    pub fn new(
        base: &SimConfig,
        target: PatternKind,
        beta: &'a [f64],
        geometry_fixed: bool,
    ) -> Result<Self> {
        let cached = if geometry_fixed {
            Some(slit_amplitudes(base, beta)?)
        } else {
            None
        };
        Ok(Self {
            base: *base,
            target,
            beta,
            cached,
        })
    }

    pub fn evaluate(&self, params: &ParameterValues) -> Result<Vec<f64>> {
        let fresh;
        let amps = match &self.cached {
            Some(a) => a,
            None => {
                fresh = slit_amplitudes(&params.apply(&self.base), self.beta)?;
                &fresh
            }
        };
        let raw: Vec<f64> = amps
            .iter()
            .map(|(phi1, phi2)| {
                let total = match phi2 {
                    Some(phi2) => *phi1 * params.c1 + *phi2 * params.c2,
                    None => *phi1,
                };
                match self.target {
                    PatternKind::Singles => singles_intensity(&total),
                    PatternKind::Coincidence => coincidence_intensity(&total, &total),
                }
            })
            .collect();
        let peak = raw.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "model pattern has no positive finite peak ({peak})"
            )));
        }
        Ok(raw
            .iter()
            .map(|v| v / peak * params.amplitude_scale)
            .collect())
    }
}

fn slit_amplitudes(
    config: &SimConfig,
    beta: &[f64],
) -> Result<Vec<(ComplexVec3, Option<ComplexVec3>)>> {
    use rayon::prelude::*;
    let far = FarField::new(config)?;
    beta.par_iter()
        .map(|&b| {
            let amp = far.total_with(b, 1.0, 0.0).map_err(|e| Error::Model {
                beta: b,
                source: Box::new(e),
            })?;
            Ok(match amp.per_slit {
                Some((phi1, phi2)) => (phi1, Some(phi2)),
                None => (amp.value, None),
            })
        })
        .collect()
}

fn weighted_residuals(model: &[f64], reference: &ReferenceSeries) -> Vec<f64> {
    model
        .iter()
        .zip(&reference.counts)
        .enumerate()
        .map(|(i, (m, c))| {
            let s = reference.sigma.as_ref().map_or(1.0, |s| s[i]);
            (m - c) / s
        })
        .collect()
}

/// `(model - counts) / sigma` at each reference angle.
pub fn residuals(
    params: &ParameterValues,
    reference: &ReferenceSeries,
    config: &SimConfig,
    target: PatternKind,
) -> Result<Vec<f64>> {
    let model =
        Model::new(&params.apply(config), target, &reference.beta, false)?.evaluate(params)?;
    Ok(weighted_residuals(&model, reference))
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

struct Objective<'a> {
    model: Model<'a>,
    reference: &'a ReferenceSeries,
    free: Vec<FitParameter>,
    lo: Vec<f64>,
    span: Vec<f64>,
    start: ParameterValues,
    evaluations: usize,
    best: Option<(f64, Vec<f64>)>,
}

impl Objective<'_> {
    fn params(&self, u: &[f64]) -> ParameterValues {
        let mut p = self.start;
        for (i, f) in self.free.iter().enumerate() {
            p.set(*f, self.lo[i] + u[i].clamp(0.0, 1.0) * self.span[i]);
        }
        p
    }

    fn rss(&mut self, u: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let model = self.model.evaluate(&self.params(u))?;
        let rss = sum_sq(&weighted_residuals(&model, self.reference));
        if self.best.as_ref().is_none_or(|(b, _)| rss < *b) {
            self.best = Some((rss, u.to_vec()));
        }
        Ok(rss)
    }
}

/// Fits the free parameters by bounded Nelder-Mead simplex descent.
///
/// The search runs in coordinates scaled to `[0, 1]` per parameter with
/// trial points clamped to the bounds. After the first descent stops, a
/// fresh simplex is built around the best point and the descent repeats
/// once. `converged` reports whether the final simplex shrank below `tol`
/// within `max_evals` objective evaluations.
pub fn fit(spec: &FitSpec, reference: &ReferenceSeries, config: &SimConfig) -> Result<FitResult> {
    spec.validate()?;
    let mut start = spec.initial;
    if spec.free.contains(&FitParameter::C1) {
        start.set(FitParameter::C1, start.c1);
    }
    if spec.free.contains(&FitParameter::C1) && config.geometry.slit_count != 2 {
        return Err(Error::InvalidArgument(
            "c1 cannot be fitted for a single slit".into(),
        ));
    }
    let geometry_fixed = !spec
        .free
        .iter()
        .any(|p| matches!(p, FitParameter::LengthB | FitParameter::ThicknessC));
    let base = start.apply(config);
    let model = Model::new(&base, spec.target, &reference.beta, geometry_fixed)?;
    let (lo, span): (Vec<f64>, Vec<f64>) = spec
        .free
        .iter()
        .map(|p| {
            let (lo, hi) = spec.bounds_of(*p);
            (lo, hi - lo)
        })
        .unzip();
    let u0: Vec<f64> = spec
        .free
        .iter()
        .zip(lo.iter().zip(&span))
        .map(|(p, (lo, span))| ((start.get(*p) - lo) / span).clamp(0.0, 1.0))
        .collect();
    let mut obj = Objective {
        model,
        reference,
        free: spec.free.clone(),
        lo,
        span,
        start,
        evaluations: 0,
        best: None,
    };

    let converged = if spec.free.is_empty() {
        obj.rss(&u0)?;
        true
    } else {
        let first = nelder_mead(&mut obj, &u0, spec)?;
        let restart_from = obj.best.as_ref().map(|(_, u)| u.clone()).unwrap_or(u0);
        if obj.evaluations < spec.max_evals {
            nelder_mead(&mut obj, &restart_from, spec)?
        } else {
            first
        }
    };

    let (_, best_u) = obj.best.clone().expect("at least one evaluation");
    let params = obj.params(&best_u);
    let model = obj.model.evaluate(&params)?;
    let residuals = weighted_residuals(&model, reference);
    Ok(FitResult {
        params,
        rss: sum_sq(&residuals),
        evaluations: obj.evaluations,
        converged,
        residuals,
        model,
    })
}

const INITIAL_STEP: f64 = 0.1;

/// One simplex descent from `u0`; true when the spread fell below `tol`.
fn nelder_mead(obj: &mut Objective<'_>, u0: &[f64], spec: &FitSpec) -> Result<bool> {
    let n = u0.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = obj.rss(u0)?;
    simplex.push((u0.to_vec(), f0));
    for i in 0..n {
        let mut v = u0.to_vec();
        v[i] = if v[i] + INITIAL_STEP <= 1.0 {
            v[i] + INITIAL_STEP
        } else {
            v[i] - INITIAL_STEP
        };
        let f = obj.rss(&v)?;
        simplex.push((v, f));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < spec.tol {
            return Ok(true);
        }
        if obj.evaluations >= spec.max_evals {
            return Ok(false);
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(v, _)| v[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };

        let reflected = along(1.0);
        let fr = obj.rss(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = obj.rss(&expanded)?;
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst.1 {
            let c = along(0.5);
            let f = obj.rss(&c)?;
            (c, f)
        } else {
            let c = along(-0.5);
            let f = obj.rss(&c)?;
            (c, f)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = vertex
                .0
                .iter()
                .zip(&best)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            let f = obj.rss(&v)?;
            *vertex = (v, f);
        }
    }
}
