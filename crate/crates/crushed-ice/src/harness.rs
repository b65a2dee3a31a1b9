//! Experiment orchestration: seeded sweeps, statistics assembly, and output.
//!
//! Every run is driven by one [`ExperimentConfig`] and a master seed; all
//! randomness flows through addressed substreams, so identical config and
//! seed give byte-identical CSV outputs regardless of worker count. The three
//! experiments mirror the three claims under test: hard entrance times
//! converge to the limit clock (`crushed-ice`), soft Schrödinger potentials
//! are sandwiched between hard times at nearby radii (`schrodinger`), and
//! hard-obstacle Dirichlet solutions approach the relaxed solution
//! (`dirichlet`).

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::capacity::{check_scaling, ClassicalKernelSpec};
use crate::energy::{evenness_condition_estimate, GreenKernel, MeasureLaw, MeasureSampler};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geom;
use crate::model::{CenterLaw, Domain, RadiusRule, RandomCenterModel};
use crate::paths::{DiffusionSpec, StartLaw};
use crate::solvers::{
    compare_solutions, solve_fd_reference, solve_u_limit_mc, solve_un_mc, DirichletProblem,
    GridSpec,
};
use crate::stats::Estimate;
use crate::stopping::{
    empirical_law, ks_two_sample, sample_ensemble, stable_metric_estimate, ClockSample,
    StableTestSuite, StopRule,
};

/// Ensemble kinds, used as stream salts and output labels.
mod kind {
    pub const HARD: u64 = 1;
    pub const LIMIT: u64 = 2;
    pub const SOFT: u64 = 3;
    pub const SHRUNK: u64 = 4;
    pub const SOLUTION: u64 = 6;
}

fn salt(kind: u64, n_index: usize, env: u32) -> u64 {
    (kind << 40) | ((n_index as u64) << 20) | env as u64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchrodingerConfig {
    /// Target value of `c_n r_n^2`; the potential height is `c_n = value / r_n^2`.
    pub cn_rn2: f64,
    /// Radius shrink factor for the comparison entrance times.
    #[serde(default = "default_shrink_kappa")]
    pub shrink_kappa: f64,
}

fn default_shrink_kappa() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub f: ScalarField,
    pub phi: ScalarField,
    /// Box for the finite-difference reference.
    pub fd_lower: Vec<f64>,
    pub fd_upper: Vec<f64>,
    pub fd_m: usize,
    pub fd_m_refined: usize,
    /// Boundary value for the FD box when the walk domain is the full space
    /// (the far-field value of the solution).
    #[serde(default)]
    pub fd_boundary: Option<f64>,
    #[serde(default)]
    pub paths_per_point: Option<usize>,
    /// Horizon override for the solution walks.
    #[serde(default)]
    pub t_max: Option<f64>,
}

/// Full experiment description; see `configs/` for TOML examples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: RandomCenterModel,
    pub diffusion: DiffusionSpec,
    /// Environment replicates per sweep index.
    pub env_reps: u32,
    pub paths_per_env: usize,
    pub start: StartLaw,
    /// Limit killing-rate density; computed from the capacity density when
    /// absent, and cross-checked against it (with a warning) when present.
    #[serde(default)]
    pub limit_rate: Option<ScalarField>,
    #[serde(default)]
    pub suite: Option<StableTestSuite>,
    #[serde(default)]
    pub schrodinger: Option<SchrodingerConfig>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub eval_points: Option<Vec<Vec<f64>>>,
    /// Kernel pairs for the energy diagnostics.
    #[serde(default)]
    pub energy_pairs: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.model.kappas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "the kappa sweep must be strictly increasing".into(),
            ));
        }
        if self.env_reps == 0 || self.paths_per_env == 0 {
            return Err(Error::Config("need env_reps >= 1 and paths".into()));
        }
        if self.model.dim != self.diffusion.dim {
            return Err(Error::Config("model and diffusion dimensions differ".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        // The master seed governs the model stream.
        cfg.model.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Reduce sizes for smoke runs: fewer paths, fewer environments, and the
    /// sweep truncated at moderate obstacle counts.
    pub fn quicken(&mut self) {
        self.paths_per_env = self.paths_per_env.min(1500);
        self.env_reps = self.env_reps.min(2);
        let keep: Vec<u64> = self
            .model
            .kappas
            .iter()
            .copied()
            .filter(|&k| k <= 2000)
            .collect();
        if keep.len() >= 2 {
            self.model.kappas = keep;
        } else {
            self.model.kappas.truncate(2);
        }
        self.energy_pairs = Some(self.energy_pairs.unwrap_or(200_000).min(50_000));
        if let Some(p) = self.problem.as_mut() {
            p.paths_per_point = Some(p.paths_per_point.unwrap_or(20_000).min(2000));
            p.fd_m = p.fd_m.min(25);
            p.fd_m_refined = p.fd_m_refined.min(33);
        }
    }

    fn suite(&self) -> StableTestSuite {
        if let Some(s) = &self.suite {
            return s.clone();
        }
        match self.model.center_law.support_box() {
            Some((lo, hi)) if lo != hi => StableTestSuite::default_for_box(&lo, &hi),
            _ => StableTestSuite::default_for_box(&vec![0.0; self.model.dim], &vec![1.0; self.model.dim]),
        }
    }

    /// The capacity-density limit field `kappa_n q_n(x) mu(x)` at the largest
    /// sweep index.
    pub fn auto_limit_rate(&self) -> Result<ScalarField> {
        let model = &self.model;
        let n = model.n_count() - 1;
        let kappa = *model.kappas.last().unwrap();
        let spec = ClassicalKernelSpec::new(model.dim)?;
        let (lower, upper) = match &model.center_law {
            CenterLaw::UniformBox { lower, upper } => (lower.clone(), upper.clone()),
            CenterLaw::PointMass { .. } => {
                return Err(Error::Config(
                    "the limit rate must be given explicitly for singular center laws".into(),
                ))
            }
        };
        let vol: f64 = lower
            .iter()
            .zip(upper.iter())
            .map(|(a, b)| b - a)
            .product();
        match &model.radius_rule {
            rule @ (RadiusRule::KappaPower { .. } | RadiusRule::ExpInIndex { .. }) => {
                let r = rule.radius(n, kappa, &geom::zero());
                let level = kappa as f64 * spec.ball_capacity(r)? / vol;
                Ok(ScalarField::BoxIndicator {
                    lower,
                    upper,
                    inside: level,
                    outside: 0.0,
                })
            }
            RadiusRule::AffineField {
                coeff,
                power,
                axis,
                offset,
                slope,
            } => {
                if model.dim != 3 {
                    return Err(Error::Config(
                        "position-dependent radii need d = 3 for the affine capacity density"
                            .into(),
                    ));
                }
                let base = coeff / (kappa as f64).powf(*power);
                let scale = kappa as f64 * 4.0 * crate::capacity::PI * base / vol;
                let mut slope_vec = vec![0.0; model.dim];
                slope_vec[*axis] = scale * slope;
                Ok(ScalarField::AffineInBox {
                    lower,
                    upper,
                    offset: scale * offset,
                    slope: slope_vec,
                })
            }
        }
    }
}

/// One statistic with provenance. `n_index = -1` marks sweep-global rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatRow {
    pub n_index: i64,
    pub kappa: u64,
    pub env: u32,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub git_hash: String,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub rows: Vec<StatRow>,
    pub warnings: Vec<String>,
    pub metadata: RunMetadata,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    pub fn metric(&self, n_index: i64, env: u32, name: &str) -> Option<Estimate> {
        self.rows
            .iter()
            .find(|r| r.n_index == n_index && r.env == env && r.metric == name)
            .map(|r| Estimate::new(r.value, r.stderr))
    }

    /// Mean of a metric over environments at fixed `n`.
    pub fn metric_env_mean(&self, n_index: i64, name: &str) -> Option<Estimate> {
        let vals: Vec<&StatRow> = self
            .rows
            .iter()
            .filter(|r| r.n_index == n_index && r.metric == name)
            .collect();
        if vals.is_empty() {
            return None;
        }
        let m = vals.iter().map(|r| r.value).sum::<f64>() / vals.len() as f64;
        let se = (vals.iter().map(|r| r.stderr * r.stderr).sum::<f64>()).sqrt() / vals.len() as f64;
        Some(Estimate::new(m, se))
    }
}

struct Outputs {
    times: String,
    times_limit: String,
    times_soft: String,
    times_shrunk: String,
    stats: String,
    solutions: String,
}

impl Outputs {
    fn new(n_h: usize) -> Self {
        let mut header = String::from("n,env,replicate,event,time");
        for j in 1..=n_h {
            let _ = write!(header, ",H{j}");
        }
        header.push('\n');
        Self {
            times: header.clone(),
            times_limit: header.clone(),
            times_soft: header.clone(),
            times_shrunk: header,
            stats: String::from("n,env,metric,value,stderr\n"),
            solutions: String::from(
                "n,env,point_id,u_n,stderr_n,u_limit,stderr_limit,u_fd\n",
            ),
        }
    }

    fn push_times(buf: &mut String, n: i64, env: u32, samples: &[ClockSample]) {
        for (k, s) in samples.iter().enumerate() {
            let _ = write!(buf, "{n},{env},{k},{},{:.12e}", s.event.as_str(), s.time);
            for h in &s.h_values {
                let _ = write!(buf, ",{h:.3e}");
            }
            buf.push('\n');
        }
    }

    fn push_stat(&mut self, rows: &mut Vec<StatRow>, row: StatRow) {
        let _ = writeln!(
            self.stats,
            "{},{},{},{:.12e},{:.12e}",
            row.n_index, row.env, row.metric, row.value, row.stderr
        );
        rows.push(row);
    }

    fn write_all(&self, dir: &Path, with_solutions: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("times.csv"), &self.times)?;
        std::fs::write(dir.join("stats.csv"), &self.stats)?;
        if !self.times_limit.lines().nth(1).is_none() {
            std::fs::write(dir.join("times_limit.csv"), &self.times_limit)?;
        }
        if !self.times_soft.lines().nth(1).is_none() {
            std::fs::write(dir.join("times_soft.csv"), &self.times_soft)?;
        }
        if !self.times_shrunk.lines().nth(1).is_none() {
            std::fs::write(dir.join("times_shrunk.csv"), &self.times_shrunk)?;
        }
        if with_solutions {
            std::fs::write(dir.join("solutions.csv"), &self.solutions)?;
        }
        Ok(())
    }
}

fn git_hash() -> String {
    option_env!("GIT_HASH").unwrap_or("unknown").to_string()
}

/// Resolve the limit rate: compute the capacity-density field, compare with a
/// user-provided override, and warn on disagreement (a deliberate mismatch is
/// a valid negative control).
fn resolve_limit_rate(cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<ScalarField> {
    let auto = cfg.auto_limit_rate();
    match (&cfg.limit_rate, auto) {
        (None, Ok(auto)) => Ok(auto),
        (None, Err(e)) => Err(e),
        (Some(user), auto) => {
            if let Ok(auto) = auto {
                if let Some((lo, hi)) = cfg.model.center_law.support_box() {
                    let probes = [
                        geom::from_slice(
                            &lo.iter().zip(hi.iter()).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
                        ),
                        geom::from_slice(
                            &lo.iter().zip(hi.iter()).map(|(a, b)| 0.75 * a + 0.25 * b).collect::<Vec<_>>(),
                        ),
                        geom::from_slice(
                            &lo.iter().zip(hi.iter()).map(|(a, b)| 0.25 * a + 0.75 * b).collect::<Vec<_>>(),
                        ),
                    ];
                    for p in probes {
                        let ua = user.eval(&p);
                        let aa = auto.eval(&p);
                        if (ua - aa).abs() > 0.05 * aa.abs().max(1e-12) {
                            warnings.push(format!(
                                "limit rate at {:?} is {ua:.4}, capacity density gives {aa:.4}; using the configured value",
                                &p[..cfg.model.dim]
                            ));
                            break;
                        }
                    }
                }
            }
            Ok(user.clone())
        }
    }
}

fn measure_from_rate_field(h: &ScalarField) -> Result<MeasureSampler> {
    match h {
        ScalarField::BoxIndicator {
            lower,
            upper,
            inside,
            outside,
        } if *outside == 0.0 => {
            let vol: f64 = lower
                .iter()
                .zip(upper.iter())
                .map(|(a, b)| b - a)
                .product();
            Ok(MeasureSampler {
                total_mass: inside * vol,
                law: MeasureLaw::UniformBox {
                    lower: lower.clone(),
                    upper: upper.clone(),
                },
            })
        }
        ScalarField::AffineInBox {
            lower,
            upper,
            offset,
            slope,
        } => {
            let vol: f64 = lower
                .iter()
                .zip(upper.iter())
                .map(|(a, b)| b - a)
                .product();
            let mean = offset
                + slope
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(s, (a, b))| s * 0.5 * (a + b))
                    .sum::<f64>();
            Ok(MeasureSampler {
                total_mass: mean * vol,
                law: MeasureLaw::AffineTiltBox {
                    lower: lower.clone(),
                    upper: upper.clone(),
                    offset: *offset,
                    slope: slope.clone(),
                },
            })
        }
        _ => Err(Error::Config(
            "the rate field has no box-supported measure representation".into(),
        )),
    }
}

/// Crushed-ice convergence sweep: hard entrance-time ensembles per `(n, env)`
/// against the limit clock, with KS distances, the stable metric, Laplace
/// functional gaps, and energy diagnostics at the largest `n`.
pub fn run_crushed_ice(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();

    let scaling = check_scaling(&cfg.model, 4.0);
    if !scaling.bounded {
        return Err(Error::ScalingViolation(format!(
            "kappa_n rho_n^{{d-2}} grows without bound (sup so far {:.3})",
            scaling.sup
        )));
    }

    let suite = cfg.suite();
    let mut out = Outputs::new(suite.h_functionals.len());
    out.push_stat(
        &mut rows,
        StatRow {
            n_index: -1,
            kappa: 0,
            env: 0,
            metric: "scaling_sup".into(),
            value: scaling.sup,
            stderr: 0.0,
        },
    );

    let h_limit = resolve_limit_rate(cfg, &mut warnings)?;
    let domain = Domain::full_space(cfg.model.dim)?;
    let limit_ensemble = sample_ensemble(
        &cfg.diffusion,
        &domain,
        StopRule::RateClock(&h_limit),
        &cfg.start,
        &suite,
        cfg.paths_per_env,
        cfg.seed,
        salt(kind::LIMIT, 0, 0),
    )?;
    Outputs::push_times(&mut out.times_limit, -1, 0, &limit_ensemble);
    let limit_times: Vec<f64> = limit_ensemble.iter().map(|s| s.time).collect();
    let limit_law = empirical_law(&limit_times)?;

    let lambdas = [0.5, 1.0, 2.0];
    for n in 0..cfg.model.n_count() {
        let kappa = cfg.model.kappas[n];
        for env in 0..cfg.env_reps {
            let obstacles = cfg.model.sample_env(n, env as u64)?;
            let ensemble = sample_ensemble(
                &cfg.diffusion,
                &domain,
                StopRule::HardObstacle(&obstacles),
                &cfg.start,
                &suite,
                cfg.paths_per_env,
                cfg.seed,
                salt(kind::HARD, n, env),
            )?;
            Outputs::push_times(&mut out.times, n as i64, env, &ensemble);

            let times: Vec<f64> = ensemble.iter().map(|s| s.time).collect();
            let ks = ks_two_sample(&times, &limit_times)?;
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "ks_vs_limit".into(),
                    value: ks.statistic,
                    stderr: ks_noise_floor(times.len(), limit_times.len()),
                },
            );
            let rho = stable_metric_estimate(&ensemble, &limit_ensemble, &suite)?;
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "stable_metric_vs_limit".into(),
                    value: rho.value,
                    stderr: rho.stderr,
                },
            );
            let law = empirical_law(&times)?;
            for lambda in lambdas {
                let gap = law
                    .laplace_functional(lambda)
                    .minus(&limit_law.laplace_functional(lambda));
                out.push_stat(
                    &mut rows,
                    StatRow {
                        n_index: n as i64,
                        kappa,
                        env,
                        metric: format!("laplace_gap_{lambda}"),
                        value: gap.value,
                        stderr: gap.stderr,
                    },
                );
            }
            let hit_frac = ensemble
                .iter()
                .filter(|s| s.event == crate::stopping::StopKind::HitObstacle)
                .count() as f64
                / ensemble.len() as f64;
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "hit_fraction".into(),
                    value: hit_frac,
                    stderr: crate::stats::proportion_stderr(hit_frac, ensemble.len() as u64),
                },
            );
        }
    }

    // Energy diagnostics at the largest n.
    let n_last = cfg.model.n_count() - 1;
    match measure_from_rate_field(&h_limit) {
        Ok(eta) => {
            let kernel = GreenKernel::new(cfg.model.dim, 1.0)?;
            let pairs = cfg.energy_pairs.unwrap_or(200_000);
            let report =
                evenness_condition_estimate(&cfg.model, n_last, &eta, &kernel, pairs, cfg.seed)?;
            if let Some(margin) = report.margin {
                out.push_stat(
                    &mut rows,
                    StatRow {
                        n_index: n_last as i64,
                        kappa: cfg.model.kappas[n_last],
                        env: 0,
                        metric: "evenness_margin".into(),
                        value: margin.value,
                        stderr: margin.stderr,
                    },
                );
            }
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n_last as i64,
                    kappa: cfg.model.kappas[n_last],
                    env: 0,
                    metric: "evenness_violated".into(),
                    value: report.violated as u8 as f64,
                    stderr: 0.0,
                },
            );
        }
        Err(e) => warnings.push(format!("energy diagnostics skipped: {e}")),
    }

    if let Some(dir) = out_dir {
        out.write_all(dir, false)?;
    }
    let result = ExperimentResult {
        experiment: "crushed-ice".into(),
        rows,
        warnings,
        metadata: RunMetadata {
            seed: cfg.seed,
            git_hash: git_hash(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        },
        config: cfg.clone(),
    };
    if let Some(dir) = out_dir {
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?,
        )?;
    }
    Ok(result)
}

/// KS sampling resolution under the null, used as the reported noise scale.
fn ks_noise_floor(na: usize, nb: usize) -> f64 {
    let ne = (na as f64 * nb as f64) / (na + nb) as f64;
    1.0 / ne.sqrt()
}

/// Schrödinger-potential sweep: soft clock ensembles against the hard and
/// shrunk entrance times and the limit clock, with sandwich diagnostics.
pub fn run_schrodinger(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sch = cfg
        .schrodinger
        .as_ref()
        .ok_or_else(|| Error::Config("schrodinger experiment needs [schrodinger] config".into()))?;
    if cfg.model.radius_rule.is_position_dependent() {
        return Err(Error::Config(
            "the soft-potential model uses constant-per-n radii".into(),
        ));
    }
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();

    let suite = cfg.suite();
    let mut out = Outputs::new(suite.h_functionals.len());
    let h_limit = resolve_limit_rate(cfg, &mut warnings)?;
    let domain = Domain::full_space(cfg.model.dim)?;
    let limit_ensemble = sample_ensemble(
        &cfg.diffusion,
        &domain,
        StopRule::RateClock(&h_limit),
        &cfg.start,
        &suite,
        cfg.paths_per_env,
        cfg.seed,
        salt(kind::LIMIT, 0, 0),
    )?;
    Outputs::push_times(&mut out.times_limit, -1, 0, &limit_ensemble);
    let limit_times: Vec<f64> = limit_ensemble.iter().map(|s| s.time).collect();

    for n in 0..cfg.model.n_count() {
        let kappa = cfg.model.kappas[n];
        let r_n = cfg
            .model
            .radius_rule
            .radius(n, kappa.max(1), &geom::zero());
        let c_n = sch.cn_rn2 / (r_n * r_n);
        for env in 0..cfg.env_reps {
            let obstacles = cfg.model.sample_env(n, env as u64)?;
            let shrunk = obstacles.shrink(sch.shrink_kappa)?;

            let hard = sample_ensemble(
                &cfg.diffusion,
                &domain,
                StopRule::HardObstacle(&obstacles),
                &cfg.start,
                &suite,
                cfg.paths_per_env,
                cfg.seed,
                salt(kind::HARD, n, env),
            )?;
            let soft = sample_ensemble(
                &cfg.diffusion,
                &domain,
                StopRule::OccupationClock {
                    set: &obstacles,
                    height: c_n,
                },
                &cfg.start,
                &suite,
                cfg.paths_per_env,
                cfg.seed,
                salt(kind::SOFT, n, env),
            )?;
            let shrunk_ens = sample_ensemble(
                &cfg.diffusion,
                &domain,
                StopRule::HardObstacle(&shrunk),
                &cfg.start,
                &suite,
                cfg.paths_per_env,
                cfg.seed,
                salt(kind::SHRUNK, n, env),
            )?;
            Outputs::push_times(&mut out.times, n as i64, env, &hard);
            Outputs::push_times(&mut out.times_soft, n as i64, env, &soft);
            Outputs::push_times(&mut out.times_shrunk, n as i64, env, &shrunk_ens);

            let t_hard: Vec<f64> = hard.iter().map(|s| s.time).collect();
            let t_soft: Vec<f64> = soft.iter().map(|s| s.time).collect();
            let t_shrunk: Vec<f64> = shrunk_ens.iter().map(|s| s.time).collect();

            for (name, a, b) in [
                ("ks_soft_vs_hard", &t_soft, &t_hard),
                ("ks_soft_vs_limit", &t_soft, &limit_times),
                ("ks_hard_vs_limit", &t_hard, &limit_times),
                ("ks_soft_vs_shrunk", &t_soft, &t_shrunk),
            ] {
                let ks = ks_two_sample(a, b)?;
                out.push_stat(
                    &mut rows,
                    StatRow {
                        n_index: n as i64,
                        kappa,
                        env,
                        metric: name.into(),
                        value: ks.statistic,
                        stderr: ks_noise_floor(a.len(), b.len()),
                    },
                );
            }

            // Sandwich at the soft ensemble's quantiles: hard stops first,
            // shrunk last, so F_hard >= F_soft >= F_shrunk up to noise.
            let soft_law = empirical_law(&t_soft)?;
            let hard_law = empirical_law(&t_hard)?;
            let shrunk_law = empirical_law(&t_shrunk)?;
            let mut violation = 0.0f64;
            for q in 1..=9 {
                let tq = soft_law.quantile(q as f64 / 10.0);
                let fs = soft_law.cdf(tq);
                let fh = hard_law.cdf(tq);
                let fk = shrunk_law.cdf(tq);
                let sigma = |f: f64, n: usize| (f * (1.0 - f) / n as f64).sqrt();
                let s_upper = (sigma(fs, t_soft.len()).powi(2)
                    + sigma(fh, t_hard.len()).powi(2))
                .sqrt();
                let s_lower = (sigma(fs, t_soft.len()).powi(2)
                    + sigma(fk, t_shrunk.len()).powi(2))
                .sqrt();
                violation = violation
                    .max(fs - fh - 2.0 * s_upper)
                    .max(fk - fs - 2.0 * s_lower);
            }
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "sandwich_violation".into(),
                    value: violation.max(0.0),
                    stderr: 0.0,
                },
            );
        }
    }

    if let Some(dir) = out_dir {
        out.write_all(dir, false)?;
    }
    let result = ExperimentResult {
        experiment: "schrodinger".into(),
        rows,
        warnings,
        metadata: RunMetadata {
            seed: cfg.seed,
            git_hash: git_hash(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        },
        config: cfg.clone(),
    };
    if let Some(dir) = out_dir {
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?,
        )?;
    }
    Ok(result)
}

/// Dirichlet convergence sweep: hard-obstacle solution values per `(n, env)`
/// against the relaxed limit (Feynman–Kac and finite differences).
pub fn run_dirichlet(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pc = cfg
        .problem
        .as_ref()
        .ok_or_else(|| Error::Config("dirichlet experiment needs [problem] config".into()))?;
    let started = Instant::now();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let suite = cfg.suite();
    let mut out = Outputs::new(suite.h_functionals.len());

    let h_limit = resolve_limit_rate(cfg, &mut warnings)?;
    let domain = Domain::full_space(cfg.model.dim)?;
    let spec = DiffusionSpec {
        t_max: pc.t_max.unwrap_or(cfg.diffusion.t_max),
        ..cfg.diffusion
    };
    let paths = pc.paths_per_point.unwrap_or(20_000);

    let problem = DirichletProblem::new(pc.alpha, pc.f.clone(), pc.phi.clone())?;
    let relaxed = problem.clone().with_rate(h_limit.clone())?;

    let points: Vec<Vec<f64>> = cfg.eval_points.clone().unwrap_or_else(|| {
        vec![
            vec![0.5, 0.5, 0.5],
            vec![0.25, 0.25, 0.25],
            vec![0.75, 0.5, 0.25],
            vec![0.2, 0.7, 0.4],
            vec![0.6, 0.3, 0.8],
        ]
    });

    // Limit values: Feynman–Kac and the FD reference on the configured box.
    let mut u_limit = Vec::with_capacity(points.len());
    for (pid, p) in points.iter().enumerate() {
        let est = solve_u_limit_mc(
            &relaxed,
            &domain,
            p,
            paths,
            &spec,
            cfg.seed,
            salt(kind::LIMIT, 0, pid as u32),
        )?;
        u_limit.push(est);
    }
    let fd_problem = DirichletProblem {
        alpha: pc.alpha,
        f: pc.f.clone(),
        phi: match pc.fd_boundary {
            Some(v) => ScalarField::constant(v),
            None => pc.phi.clone(),
        },
        rate: Some(h_limit.clone()),
    };
    let grid = GridSpec {
        lower: pc.fd_lower.clone(),
        upper: pc.fd_upper.clone(),
        m: pc.fd_m,
    };
    let grid_fine = GridSpec {
        m: pc.fd_m_refined,
        ..grid.clone()
    };
    let fd_coarse = solve_fd_reference(&grid, &fd_problem, None)?;
    let fd_fine = solve_fd_reference(&grid_fine, &fd_problem, None)?;

    for (pid, p) in points.iter().enumerate() {
        let coarse = fd_coarse.interpolate(p);
        let fine = fd_fine.interpolate(p);
        let delta = (fine - coarse).abs();
        out.push_stat(
            &mut rows,
            StatRow {
                n_index: -1,
                kappa: 0,
                env: 0,
                metric: format!("fd_refinement_delta_p{pid}"),
                value: delta,
                stderr: 0.0,
            },
        );
        let mc = &u_limit[pid];
        let agree = (mc.value - fine).abs() <= (3.0 * mc.stderr).max(2.0 * delta) + mc.bias_bound;
        out.push_stat(
            &mut rows,
            StatRow {
                n_index: -1,
                kappa: 0,
                env: 0,
                metric: format!("fd_mc_agree_p{pid}"),
                value: agree as u8 as f64,
                stderr: 0.0,
            },
        );
        if !agree {
            warnings.push(format!(
                "limit solver mismatch at point {pid}: MC {:.4} +- {:.4}, FD {:.4} (delta {:.4})",
                mc.value, mc.stderr, fine, delta
            ));
        }
    }

    for n in 0..cfg.model.n_count() {
        let kappa = cfg.model.kappas[n];
        for env in 0..cfg.env_reps {
            let obstacles = cfg.model.sample_env(n, env as u64)?;
            // Evaluation points must avoid the sampled obstacles; nudge any
            // unlucky point deterministically along the diagonal.
            let mut pts = points.clone();
            for p in pts.iter_mut() {
                let mut probe = geom::from_slice(p);
                let mut tries = 0;
                while obstacles.nearest_distance(&probe) <= 0.0 && tries < 64 {
                    for item in probe.iter_mut().take(cfg.model.dim) {
                        *item += 3.0 * cfg.model.rho(n);
                    }
                    tries += 1;
                }
                *p = probe[..cfg.model.dim].to_vec();
            }

            let mut u_n = Vec::with_capacity(pts.len());
            for (pid, p) in pts.iter().enumerate() {
                let est = solve_un_mc(
                    &problem,
                    &domain,
                    Some(&obstacles),
                    p,
                    paths,
                    &spec,
                    cfg.seed,
                    salt(kind::SOLUTION, n, (env as usize * 64 + pid) as u32),
                )?;
                u_n.push(est);
            }
            let report = compare_solutions(
                &pts,
                &u_n.iter().map(|e| e.estimate()).collect::<Vec<_>>(),
                &u_limit.iter().map(|e| e.estimate()).collect::<Vec<_>>(),
            )?;
            for (pid, row) in report.rows.iter().enumerate() {
                let _ = writeln!(
                    out.solutions,
                    "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    n,
                    env,
                    pid,
                    row.u_n.value,
                    row.u_n.stderr,
                    row.u_limit.value,
                    row.u_limit.stderr,
                    fd_fine.interpolate(&row.point)
                );
                out.push_stat(
                    &mut rows,
                    StatRow {
                        n_index: n as i64,
                        kappa,
                        env,
                        metric: format!("solution_gap_p{pid}"),
                        value: row.gap.value,
                        stderr: row.gap.stderr,
                    },
                );
            }
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "solution_mean_abs_gap".into(),
                    value: report.mean_abs_gap,
                    stderr: report
                        .rows
                        .iter()
                        .map(|r| r.gap.stderr * r.gap.stderr)
                        .sum::<f64>()
                        .sqrt()
                        / report.rows.len() as f64,
                },
            );
            out.push_stat(
                &mut rows,
                StatRow {
                    n_index: n as i64,
                    kappa,
                    env,
                    metric: "solution_max_abs_gap".into(),
                    value: report.max_abs_gap,
                    stderr: 0.0,
                },
            );
        }
    }

    if let Some(dir) = out_dir {
        out.write_all(dir, true)?;
        std::fs::write(dir.join("fd_reference.csv"), fd_fine.to_csv())?;
    }
    let result = ExperimentResult {
        experiment: "dirichlet".into(),
        rows,
        warnings,
        metadata: RunMetadata {
            seed: cfg.seed,
            git_hash: git_hash(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        },
        config: cfg.clone(),
    };
    if let Some(dir) = out_dir {
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?,
        )?;
    }
    Ok(result)
}

/// Standard desk-scale crushed-ice configuration: unit cube, capacity sum 2.
pub fn preset_crushed_ice_3d(seed: u64) -> ExperimentConfig {
    let c = 2.0;
    ExperimentConfig {
        seed,
        model: RandomCenterModel {
            dim: 3,
            kappas: vec![125, 500, 2000, 8000],
            radius_rule: RadiusRule::KappaPower {
                coeff: c / (4.0 * crate::capacity::PI),
                power: 1.0,
            },
            center_law: CenterLaw::unit_cube(3),
            seed,
        },
        diffusion: DiffusionSpec {
            dim: 3,
            dt: 0.01,
            t_max: 4.0,
            shrink: 0.6,
        },
        env_reps: 3,
        paths_per_env: 100_000,
        start: StartLaw::UniformBox {
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
        },
        limit_rate: None,
        suite: None,
        schrodinger: None,
        problem: None,
        eval_points: None,
        energy_pairs: None,
    }
}

/// Position-dependent variant: radii proportional to `1 + x1` on the cube.
pub fn preset_crushed_ice_affine(seed: u64) -> ExperimentConfig {
    let c = 2.0;
    let z = 1.5; // mean of 1 + x1 over the cube
    let mut cfg = preset_crushed_ice_3d(seed);
    cfg.model.radius_rule = RadiusRule::AffineField {
        coeff: c / (z * 4.0 * crate::capacity::PI),
        power: 1.0,
        axis: 0,
        offset: 1.0,
        slope: 1.0,
    };
    cfg
}

/// Soft-potential configuration at moderate obstacle counts.
pub fn preset_schrodinger(seed: u64, cn_rn2: f64) -> ExperimentConfig {
    let mut cfg = preset_crushed_ice_3d(seed);
    cfg.model.kappas = vec![500, 2000];
    cfg.paths_per_env = 50_000;
    cfg.schrodinger = Some(SchrodingerConfig {
        cn_rn2,
        shrink_kappa: 0.9,
    });
    cfg
}

/// Dirichlet-solution configuration on the standard sweep.
pub fn preset_dirichlet(seed: u64) -> ExperimentConfig {
    let mut cfg = preset_crushed_ice_3d(seed);
    cfg.env_reps = 1;
    cfg.problem = Some(ProblemConfig {
        alpha: 1.0,
        f: ScalarField::constant(1.0),
        phi: ScalarField::zero(),
        fd_lower: vec![-2.0; 3],
        fd_upper: vec![3.0; 3],
        fd_m: 41,
        fd_m_refined: 81,
        fd_boundary: Some(1.0),
        paths_per_point: Some(20_000),
        t_max: Some(12.0),
    });
    cfg
}
