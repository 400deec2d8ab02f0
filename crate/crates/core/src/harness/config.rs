//! Flat `section.key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Every key
//! must be known; unknown or repeated keys are errors reported with their
//! line number.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bregman::GeometryKind;
use crate::error::{Error, Result};
use crate::kernel::{KernelKind, DEFAULT_BANDWIDTH};
use crate::stepsize::DEFAULT_C;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Random quadratic game with l1 blocks and a dual ball.
    Quadratic,
    /// Quadratic game without dual curvature and strongly convex blocks.
    StronglyConvex,
    /// Bilinear game with linear terms, l1 blocks and a dual ball.
    Bilinear,
    /// Multiple-kernel SVM on a synthetic two-cluster dataset.
    Kernel,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::StronglyConvex => "strongly-convex",
            ProblemKind::Bilinear => "bilinear",
            ProblemKind::Kernel => "kernel",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quadratic" => Ok(ProblemKind::Quadratic),
            "strongly-convex" => Ok(ProblemKind::StronglyConvex),
            "bilinear" => Ok(ProblemKind::Bilinear),
            "kernel" => Ok(ProblemKind::Kernel),
            _ => Err("expected quadratic, strongly-convex, bilinear or kernel".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Rapd1,
    Rapd2,
    Pdhg,
    MirrorProx,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Rapd1 => "rapd1",
            MethodKind::Rapd2 => "rapd2",
            MethodKind::Pdhg => "pdhg",
            MethodKind::MirrorProx => "mirror_prox",
        }
    }
}

impl FromStr for MethodKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rapd1" => Ok(MethodKind::Rapd1),
            "rapd2" => Ok(MethodKind::Rapd2),
            "pdhg" => Ok(MethodKind::Pdhg),
            "mirror_prox" => Ok(MethodKind::MirrorProx),
            _ => Err("expected rapd1, rapd2, pdhg or mirror_prox".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub n: usize,
    pub d: usize,
    pub blocks: usize,
    pub seed: u64,
    pub l1: f64,
    pub radius: f64,
    pub mu: f64,
    pub n_tr: usize,
    pub features: usize,
    pub lambda: f64,
    pub separation: f64,
    pub kernels: Vec<KernelKind>,
    pub c: Option<f64>,
    pub dual_bound: Option<f64>,
    pub fold_quadratic_into_f: bool,
    pub simplex_geometry: GeometryKind,
    pub gram_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSection {
    pub kind: MethodKind,
    /// Defaults to `max_i L_yx_i`.
    pub alpha: Option<f64>,
    pub c_tau: f64,
    pub c_sigma: f64,
    pub probs: Option<Vec<f64>>,
    pub lipschitz_scale: f64,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub iterations: usize,
    pub seeds: Vec<u64>,
    /// Reference metrics every `n` iterations; none when `None`.
    pub metric_every: Option<usize>,
    pub record_every: usize,
    pub time_budget: Option<f64>,
    pub target_rel_dist: Option<f64>,
    pub oracle_tol: f64,
    pub oracle_max_iters: usize,
    /// Saved certificate to use instead of solving for one.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write real elapsed times into `wall_s` (otherwise zeros, which keeps
    /// traces byte-reproducible).
    pub wall_clock: bool,
    pub csv: bool,
    pub summary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub method: MethodSection,
    pub run: RunSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSection {
                kind: ProblemKind::Quadratic,
                n: 32,
                d: 8,
                blocks: 8,
                seed: 0,
                l1: 0.1,
                radius: 2.0,
                mu: 1.0,
                n_tr: 200,
                features: 10,
                lambda: 1.0,
                separation: 1.0,
                kernels: KernelKind::standard().to_vec(),
                c: None,
                dual_bound: None,
                fold_quadratic_into_f: true,
                simplex_geometry: GeometryKind::Euclidean,
                gram_file: None,
            },
            method: MethodSection {
                kind: MethodKind::Rapd1,
                alpha: None,
                c_tau: DEFAULT_C,
                c_sigma: DEFAULT_C,
                probs: None,
                lipschitz_scale: 1.0,
                tau: None,
                sigma: None,
                lipschitz: None,
            },
            run: RunSection {
                iterations: 10_000,
                seeds: vec![0],
                metric_every: None,
                record_every: 1,
                time_budget: None,
                target_rel_dist: None,
                oracle_tol: 1e-10,
                oracle_max_iters: 1_000_000,
                reference: None,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                wall_clock: false,
                csv: true,
                summary: true,
            },
        }
    }
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse '{v}'"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(|e| parse(e.trim())).collect()
}

fn parse_kernel(v: &str, bw: f64) -> std::result::Result<KernelKind, String> {
    match v {
        "poly2" => Ok(KernelKind::Poly2),
        "gauss" => Ok(KernelKind::Gauss { bw }),
        "linear" => Ok(KernelKind::Linear),
        _ => Err(format!("unknown kernel '{v}', expected poly2, gauss or linear")),
    }
}

fn kernel_name(k: KernelKind) -> &'static str {
    match k {
        KernelKind::Poly2 => "poly2",
        KernelKind::Gauss { .. } => "gauss",
        KernelKind::Linear => "linear",
    }
}

fn positive(v: f64) -> std::result::Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn at_least_one(v: usize) -> std::result::Result<usize, String> {
    if v >= 1 {
        Ok(v)
    } else {
        Err("must be at least 1".into())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut bandwidth = DEFAULT_BANDWIDTH;
        let mut kernel_names: Option<(usize, Vec<String>)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            let err = |key: &str, message: String| Error::Config {
                line,
                key: key.to_string(),
                message,
            };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(trimmed, "expected 'section.key = value'".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(err(key, "key must have the form section.key".into()));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(key, "key given twice".into()));
            }
            if key == "problem.kernels" {
                kernel_names = Some((line, value.split(',').map(|s| s.trim().to_string()).collect()));
                continue;
            }
            if key == "problem.bandwidth" {
                bandwidth = parse(value).and_then(positive).map_err(|m| err(key, m))?;
                continue;
            }
            cfg.set(key, value).map_err(|m| err(key, m))?;
        }
        if let Some((line, names)) = kernel_names {
            cfg.problem.kernels = names
                .iter()
                .map(|n| parse_kernel(n, bandwidth))
                .collect::<std::result::Result<_, _>>()
                .map_err(|message| Error::Config {
                    line,
                    key: "problem.kernels".into(),
                    message,
                })?;
        } else {
            for k in cfg.problem.kernels.iter_mut() {
                if let KernelKind::Gauss { bw } = k {
                    *bw = bandwidth;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let (p, m, r, o) = (&mut self.problem, &mut self.method, &mut self.run, &mut self.output);
        match key {
            "problem.type" => p.kind = parse(v)?,
            "problem.n" => p.n = parse(v).and_then(at_least_one)?,
            "problem.d" => p.d = parse(v).and_then(at_least_one)?,
            "problem.blocks" => p.blocks = parse(v).and_then(at_least_one)?,
            "problem.seed" => p.seed = parse(v)?,
            "problem.l1" => p.l1 = parse(v)?,
            "problem.radius" => p.radius = parse(v).and_then(positive)?,
            "problem.mu" => p.mu = parse(v).and_then(positive)?,
            "problem.n_tr" => p.n_tr = parse(v)?,
            "problem.features" => p.features = parse(v)?,
            "problem.lambda" => p.lambda = parse(v).and_then(positive)?,
            "problem.separation" => p.separation = parse(v)?,
            "problem.c" => p.c = Some(parse(v).and_then(positive)?),
            "problem.dual_bound" => p.dual_bound = Some(parse(v).and_then(positive)?),
            "problem.fold_quadratic_into_f" => p.fold_quadratic_into_f = parse_bool(v)?,
            "problem.simplex_geometry" => {
                p.simplex_geometry = match v {
                    "euclidean" => GeometryKind::Euclidean,
                    "entropy" => GeometryKind::Entropy,
                    _ => return Err("expected euclidean or entropy".into()),
                }
            }
            "problem.gram_file" => p.gram_file = Some(PathBuf::from(v)),
            "method.name" => m.kind = parse(v)?,
            "method.alpha" => m.alpha = Some(parse(v).and_then(positive)?),
            "method.c_tau" => m.c_tau = parse(v).and_then(positive)?,
            "method.c_sigma" => m.c_sigma = parse(v).and_then(positive)?,
            "method.probs" => m.probs = Some(parse_list(v)?),
            "method.lipschitz_scale" => m.lipschitz_scale = parse(v).and_then(positive)?,
            "method.tau" => m.tau = Some(parse(v).and_then(positive)?),
            "method.sigma" => m.sigma = Some(parse(v).and_then(positive)?),
            "method.lipschitz" => m.lipschitz = Some(parse(v).and_then(positive)?),
            "run.iterations" => r.iterations = parse(v).and_then(at_least_one)?,
            "run.seeds" => r.seeds = parse_list(v)?,
            "run.metric_every" => {
                let n: usize = parse(v)?;
                r.metric_every = (n > 0).then_some(n);
            }
            "run.record_every" => r.record_every = parse(v).and_then(at_least_one)?,
            "run.time_budget" => r.time_budget = Some(parse(v).and_then(positive)?),
            "run.target_rel_dist" => r.target_rel_dist = Some(parse(v).and_then(positive)?),
            "run.oracle_tol" => r.oracle_tol = parse(v).and_then(positive)?,
            "run.oracle_max_iters" => r.oracle_max_iters = parse(v).and_then(at_least_one)?,
            "run.reference" => r.reference = Some(PathBuf::from(v)),
            "output.dir" => o.dir = PathBuf::from(v),
            "output.wall_clock" => o.wall_clock = parse_bool(v)?,
            "output.formats" => {
                o.csv = false;
                o.summary = false;
                for f in v.split(',').map(str::trim) {
                    match f {
                        "csv" => o.csv = true,
                        "summary" => o.summary = true,
                        _ => return Err(format!("unknown format '{f}', expected csv or summary")),
                    }
                }
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Cross-field checks that a single key cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                line: 0,
                key: key.into(),
                message,
            })
        };
        if self.run.seeds.is_empty() {
            return bad("run.seeds", "at least one seed is required".into());
        }
        let dim = match self.problem.kind {
            ProblemKind::Kernel => self.problem.n_tr,
            _ => self.problem.n,
        };
        if self.problem.blocks > dim {
            return bad(
                "problem.blocks",
                format!("{} blocks for a primal dimension of {dim}", self.problem.blocks),
            );
        }
        if self.problem.kind == ProblemKind::Kernel {
            if self.problem.n_tr < 10 || self.problem.features < 2 {
                return bad("problem.n_tr", "kernel data needs n_tr >= 10 and features >= 2".into());
            }
            if self.problem.kernels.is_empty() {
                return bad("problem.kernels", "at least one kernel is required".into());
            }
        }
        if self.problem.l1 < 0.0 {
            return bad("problem.l1", "must be nonnegative".into());
        }
        if let Some(p) = &self.method.probs {
            if p.len() != self.problem.blocks {
                return bad(
                    "method.probs",
                    format!("{} probabilities for {} blocks", p.len(), self.problem.blocks),
                );
            }
        }
        Ok(())
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let (p, m, r, o) = (&self.problem, &self.method, &self.run, &self.output);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let list = |v: &[f64]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
        kv("problem.type", p.kind.name().into());
        kv("problem.n", p.n.to_string());
        kv("problem.d", p.d.to_string());
        kv("problem.blocks", p.blocks.to_string());
        kv("problem.seed", p.seed.to_string());
        kv("problem.l1", p.l1.to_string());
        kv("problem.radius", p.radius.to_string());
        kv("problem.mu", p.mu.to_string());
        kv("problem.n_tr", p.n_tr.to_string());
        kv("problem.features", p.features.to_string());
        kv("problem.lambda", p.lambda.to_string());
        kv("problem.separation", p.separation.to_string());
        kv(
            "problem.kernels",
            p.kernels.iter().map(|&k| kernel_name(k)).collect::<Vec<_>>().join(","),
        );
        let bw = p.kernels.iter().find_map(|k| match k {
            KernelKind::Gauss { bw } => Some(*bw),
            _ => None,
        });
        kv("problem.bandwidth", bw.unwrap_or(DEFAULT_BANDWIDTH).to_string());
        if let Some(c) = p.c {
            kv("problem.c", c.to_string());
        }
        if let Some(b) = p.dual_bound {
            kv("problem.dual_bound", b.to_string());
        }
        kv("problem.fold_quadratic_into_f", p.fold_quadratic_into_f.to_string());
        kv(
            "problem.simplex_geometry",
            match p.simplex_geometry {
                GeometryKind::Entropy => "entropy",
                GeometryKind::Euclidean => "euclidean",
            }
            .into(),
        );
        if let Some(g) = &p.gram_file {
            kv("problem.gram_file", g.display().to_string());
        }
        kv("method.name", m.kind.name().into());
        for (k, v) in [
            ("method.alpha", m.alpha),
            ("method.tau", m.tau),
            ("method.sigma", m.sigma),
            ("method.lipschitz", m.lipschitz),
        ] {
            if let Some(v) = v {
                kv(k, v.to_string());
            }
        }
        kv("method.c_tau", m.c_tau.to_string());
        kv("method.c_sigma", m.c_sigma.to_string());
        if let Some(pr) = &m.probs {
            kv("method.probs", list(pr));
        }
        kv("method.lipschitz_scale", m.lipschitz_scale.to_string());
        kv("run.iterations", r.iterations.to_string());
        kv(
            "run.seeds",
            r.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        kv("run.metric_every", r.metric_every.unwrap_or(0).to_string());
        kv("run.record_every", r.record_every.to_string());
        if let Some(t) = r.time_budget {
            kv("run.time_budget", t.to_string());
        }
        if let Some(t) = r.target_rel_dist {
            kv("run.target_rel_dist", t.to_string());
        }
        kv("run.oracle_tol", r.oracle_tol.to_string());
        kv("run.oracle_max_iters", r.oracle_max_iters.to_string());
        if let Some(p) = &r.reference {
            kv("run.reference", p.display().to_string());
        }
        kv("output.dir", o.dir.display().to_string());
        kv("output.wall_clock", o.wall_clock.to_string());
        let formats: Vec<&str> = [(o.csv, "csv"), (o.summary, "summary")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if !formats.is_empty() {
            kv("output.formats", formats.join(","));
        }
        s
    }
}
