//! Turns a validated config into result artifacts.

use delone::calculus::{cell_comb, cos4_bump, l2_inner, laplacian, sobolev_norm, tlc_project, TlcFunction};
use delone::diffusion::{
    equilibrium_distance, ito_residual, sample_path, semigroup_apply_mc, semigroup_apply_quadrature,
    strong_feller_probe, BoundaryProbe, Rule,
};
use delone::ergodic::{cluster_frequency, FrequencyTable};
use delone::hodge::{hodge_complement_dim, liouville_kernel_dim, DiscreteL2Space};
use delone::hull::{hull_metric, orbit_metric, HullFunction, HullPoint};
use delone::sets::{delone_constants, patch, Cluster, DeloneSet, Tiling};
use delone::spectral::{
    complex_norm, heat_evolve_spectral, koopman_eigen_search, local_laplacian, norm, schrodinger_evolve,
    ProductEigenbasis,
};
use delone::{Error, Result};
use serde_json::{json, Value};

use crate::config::{Config, ConfigError, EvolveKind, FunctionSpec, Params, RuleSpec, SemigroupMethod};
use crate::output::{Artifact, Cell};

/// Objects resolved against the configured Delone set.
pub struct Prepared {
    pub set: DeloneSet,
    pub functions: Vec<TlcFunction>,
    pub points: Vec<HullPoint>,
}

impl Prepared {
    fn line(&self) -> Result<&Tiling> {
        match &self.set {
            DeloneSet::Line(t) => Ok(t),
            DeloneSet::Plane(_) => Err(Error::Unsupported("this experiment needs a one-dimensional set".into())),
        }
    }
}

fn line_of<'a>(set: &'a DeloneSet, field: &str) -> std::result::Result<&'a Tiling, ConfigError> {
    match set {
        DeloneSet::Line(t) => Ok(t),
        DeloneSet::Plane(_) => Err(ConfigError::field(field, "this experiment needs a one-dimensional set")),
    }
}

pub fn build_function(t: &Tiling, spec: &FunctionSpec) -> Result<TlcFunction> {
    match spec {
        FunctionSpec::Constant { value } => TlcFunction::constant(t, *value),
        FunctionSpec::LetterIndicator { letter } => TlcFunction::letter_indicator(t, *letter),
        FunctionSpec::Comb {
            level,
            cells,
            radius,
            terms,
            smoothness,
        } => {
            let cells = match cells {
                Some(c) => c.clone(),
                None => (0..t.cell_count(*level)? as u32).collect(),
            };
            let (terms, s) = match terms {
                Some(ts) => (ts.clone(), smoothness.unwrap_or(0)),
                None => (cos4_bump(0.0, *radius), smoothness.unwrap_or(3)),
            };
            cell_comb(t, *level, &cells, *radius, terms, s)
        }
        FunctionSpec::Tiles { terms, smoothness } => TlcFunction::on_tiles(t, 0, |_| terms.clone(), *smoothness),
        FunctionSpec::Tlc { function } => TlcFunction::new(
            t,
            function.level,
            function.support,
            function.profiles.clone(),
            function.smoothness,
        ),
    }
}

fn point(t: &Tiling, v: Option<&Value>, field: &str) -> std::result::Result<HullPoint, ConfigError> {
    match v {
        None => Ok(HullPoint::origin(t)),
        Some(v) => HullPoint::from_json(t, v).map_err(|e| ConfigError::field(field, e.to_string())),
    }
}

fn functions(t: &Tiling, specs: &[&FunctionSpec], field: &str) -> std::result::Result<Vec<TlcFunction>, ConfigError> {
    specs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            build_function(t, s).map_err(|e| {
                let f = if specs.len() == 1 {
                    field.to_string()
                } else {
                    format!("{field}[{k}]")
                };
                ConfigError::field(f, e.to_string())
            })
        })
        .collect()
}

/// Builds the set and every function and point the run needs, so that
/// configuration mistakes surface before any compute.
pub fn prepare(cfg: &Config) -> std::result::Result<Prepared, ConfigError> {
    let set = cfg
        .spec
        .build()
        .map_err(|e| ConfigError::field("spec", e.to_string()))?;
    let mut fs = Vec::new();
    let mut pts = Vec::new();
    match &cfg.parameters {
        Params::Generate(p) => {
            if !p.center.is_empty() && p.center.len() != cfg.spec.dimension() {
                return Err(ConfigError::field(
                    "parameters.center",
                    "length must match the dimension of the set",
                ));
            }
        }
        Params::Metric(p) => {
            let t = line_of(&set, "spec")?;
            for (k, v) in p.points.iter().enumerate() {
                pts.push(point(t, Some(v), &format!("parameters.points[{k}]"))?);
            }
            if pts.len() < 2 {
                return Err(ConfigError::field("parameters.points", "need at least two points"));
            }
        }
        Params::Frequencies(p) => {
            let t = line_of(&set, "spec")?;
            for (k, w) in p.clusters.iter().enumerate() {
                Cluster::from_word(t, w)
                    .map_err(|e| ConfigError::field(format!("parameters.clusters[{k}]"), e.to_string()))?;
            }
        }
        Params::Diffuse(p) => {
            let t = line_of(&set, "spec")?;
            pts.push(point(t, p.start.as_ref(), "parameters.start")?);
            if p.paths == 0 {
                return Err(ConfigError::field("parameters.paths", "must be positive"));
            }
        }
        Params::Semigroup(p) => {
            let t = line_of(&set, "spec")?;
            fs = functions(t, &[&p.function], "parameters.function")?;
            if p.points.is_empty() {
                pts.push(HullPoint::origin(t));
            }
            for (k, v) in p.points.iter().enumerate() {
                pts.push(point(t, Some(v), &format!("parameters.points[{k}]"))?);
            }
        }
        Params::Equilibrium(p) => {
            let t = line_of(&set, "spec")?;
            let specs: Vec<&FunctionSpec> = p.functions.iter().collect();
            fs = functions(t, &specs, "parameters.functions")?;
            pts.push(point(t, p.point.as_ref(), "parameters.point")?);
        }
        Params::Strongfeller(_) | Params::Spectrum(_) | Params::Hodge(_) | Params::Liouville(_) => {
            line_of(&set, "spec")?;
        }
        Params::Ito(p) => {
            let t = line_of(&set, "spec")?;
            fs = functions(t, &[&p.function], "parameters.function")?;
            if fs[0].smoothness < 2 {
                return Err(ConfigError::field(
                    "parameters.function",
                    "the Itô check needs two continuous derivatives",
                ));
            }
            pts.push(point(t, p.point.as_ref(), "parameters.point")?);
        }
        Params::Evolve(p) => {
            line_of(&set, "spec")?;
            match (&p.coefficients, &p.unit) {
                (Some(_), None) => {}
                (None, Some([_, j])) if *j >= 1 && *j <= p.modes => {}
                (None, Some(_)) => {
                    return Err(ConfigError::field(
                        "parameters.unit",
                        "mode index j must lie in 1..=modes",
                    ))
                }
                _ => {
                    return Err(ConfigError::field(
                        "parameters",
                        "give exactly one of `coefficients` and `unit`",
                    ))
                }
            }
        }
        Params::KoopmanScan(p) => {
            let t = line_of(&set, "spec")?;
            fs = functions(t, &[&p.function], "parameters.function")?;
            pts.push(point(t, p.start.as_ref(), "parameters.start")?);
        }
        Params::Sobolev(p) => {
            let t = line_of(&set, "spec")?;
            fs = functions(t, &[&p.function], "parameters.function")?;
        }
    }
    Ok(Prepared {
        set,
        functions: fs,
        points: pts,
    })
}

fn rule(r: &RuleSpec) -> Rule {
    match *r {
        RuleSpec::Composite { c, panel, order } => Rule::Composite { c, panel, order },
        RuleSpec::Hermite { order } => Rule::Hermite { order },
    }
}

fn csv(name: &str, header: Vec<&'static str>, rows: Vec<Vec<Cell>>) -> Artifact {
    Artifact::Csv {
        name: name.into(),
        header,
        rows,
    }
}

fn json_artifact(name: &str, value: Value) -> Artifact {
    Artifact::Json {
        name: name.into(),
        value,
    }
}

/// Runs the experiment. Input-type errors mean the configuration asked
/// for something impossible; diagnostics and divergences are numerical.
pub fn execute(cfg: &Config, prep: &Prepared) -> Result<Vec<Artifact>> {
    let seed = cfg.seed.unwrap_or(0);
    match &cfg.parameters {
        Params::Generate(p) => {
            let center = if p.center.is_empty() {
                vec![0.0; cfg.spec.dimension()]
            } else {
                p.center.clone()
            };
            let cluster = patch(&prep.set, &center, p.radius)?;
            let (r, big_r) = delone_constants(&prep.set, p.probe)?;
            Ok(vec![
                Artifact::CsvText {
                    name: "points.csv".into(),
                    text: cluster.to_csv(),
                },
                json_artifact(
                    "constants.json",
                    json!({"points": cluster.len(), "r": r, "R": big_r, "dimension": cfg.spec.dimension()}),
                ),
            ])
        }
        Params::Metric(p) => {
            let t = prep.line()?;
            let mut rows = Vec::new();
            for i in 0..prep.points.len() {
                for j in i + 1..prep.points.len() {
                    let (a, b) = (&prep.points[i], &prep.points[j]);
                    let rho = hull_metric(t, a, t, b, p.tol)?;
                    let orb = orbit_metric(t, a, b);
                    rows.push(vec![
                        Cell::U(i),
                        Cell::U(j),
                        Cell::F(rho),
                        if orb.is_finite() { Cell::F(orb) } else { Cell::Empty },
                    ]);
                }
            }
            Ok(vec![csv("metric.csv", vec!["i", "j", "rho", "orbit_distance"], rows)])
        }
        Params::Frequencies(p) => {
            let t = prep.line()?;
            let mut table = FrequencyTable::default();
            for w in &p.clusters {
                let c = Cluster::from_word(t, w)?;
                table.entries.push(cluster_frequency(t, w, &c, &p.windows)?);
            }
            let diag: Vec<Value> = table
                .entries
                .iter()
                .map(|e| json!({"cluster": e.label, "per_tile": e.per_tile(), "frequency": e.frequency(), "window_change": e.diagnostic}))
                .collect();
            Ok(vec![
                Artifact::CsvText {
                    name: "frequencies.csv".into(),
                    text: table.to_csv(),
                },
                json_artifact("frequencies.json", Value::Array(diag)),
            ])
        }
        Params::Diffuse(p) => {
            let start = &prep.points[0];
            let mut rows = Vec::new();
            let mut finals = Vec::with_capacity(p.paths);
            for k in 0..p.paths {
                let path = sample_path(start, &p.times, seed.wrapping_add(k as u64))?;
                let d = path.displacements();
                for (time, x) in p.times.iter().zip(&d) {
                    rows.push(vec![Cell::U(k), Cell::F(*time), Cell::F(*x)]);
                }
                finals.push(*d.last().unwrap_or(&0.0));
            }
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let second = finals.iter().map(|x| x * x).sum::<f64>() / n;
            let t_end = *p.times.last().unwrap_or(&0.0);
            Ok(vec![
                csv("paths.csv", vec!["path", "time", "displacement"], rows),
                json_artifact(
                    "paths_summary.json",
                    json!({"paths": p.paths, "t_final": t_end, "mean": mean, "second_moment": second, "expected_second_moment": t_end}),
                ),
            ])
        }
        Params::Semigroup(p) => {
            let t = prep.line()?;
            let f = &prep.functions[0];
            let r = rule(&p.rule);
            let mut rows = Vec::new();
            for (k, pt) in prep.points.iter().enumerate() {
                for &time in &p.times {
                    let e = match p.method {
                        SemigroupMethod::Quadrature => semigroup_apply_quadrature(t, f, time, pt, &r)?,
                        SemigroupMethod::MonteCarlo => semigroup_apply_mc(t, f, time, pt, p.paths, seed)?,
                    };
                    rows.push(vec![
                        Cell::U(k),
                        Cell::F(time),
                        Cell::F(f.at(t, pt)?),
                        Cell::F(e.value),
                        Cell::F(e.error),
                        Cell::U(e.n),
                    ]);
                }
            }
            Ok(vec![csv(
                "semigroup.csv",
                vec!["point", "t", "f", "value", "error", "n"],
                rows,
            )])
        }
        Params::Equilibrium(p) => {
            let t = prep.line()?;
            let one = TlcFunction::constant(t, 1.0)?;
            let means = prep
                .functions
                .iter()
                .map(|f| l2_inner(t, f, &one))
                .collect::<Result<Vec<f64>>>()?;
            let tests: Vec<(&dyn HullFunction, f64)> = prep
                .functions
                .iter()
                .zip(&means)
                .map(|(f, m)| (f as &dyn HullFunction, *m))
                .collect();
            let r = rule(&p.rule);
            let mut rows = Vec::new();
            for &time in &p.times {
                rows.push(vec![
                    Cell::F(time),
                    Cell::F(equilibrium_distance(t, &prep.points[0], time, &tests, &r)?),
                ]);
            }
            let mean_rows = means
                .iter()
                .enumerate()
                .map(|(k, m)| vec![Cell::U(k), Cell::F(*m)])
                .collect();
            Ok(vec![
                csv("equilibrium.csv", vec!["t", "distance"], rows),
                csv("means.csv", vec!["function", "mean"], mean_rows),
            ])
        }
        Params::Strongfeller(p) => {
            let t = prep.line()?;
            let star = t.parse_address(&[], None)?;
            let probe = BoundaryProbe {
                star,
                level: p.level,
                inner: p.inner,
                cap: p.cap,
            };
            let w = strong_feller_probe(t, &probe, p.depth, p.t_start, &rule(&p.rule))?;
            Ok(vec![json_artifact(
                "strongfeller.json",
                json!({
                    "t": w.t,
                    "delta": w.delta,
                    "inside": w.inside,
                    "outside": w.outside,
                    "inside_exceeds_one_third": w.inside > 1.0 / 3.0,
                    "outside_below_one_ninth": w.outside < 1.0 / 9.0,
                }),
            )])
        }
        Params::Ito(p) => {
            let t = prep.line()?;
            let f = &prep.functions[0];
            let lap = laplacian(f)?;
            let r = ito_residual(t, f, &lap, &prep.points[0], p.t, p.dt, p.paths, seed)?;
            Ok(vec![json_artifact(
                "ito.json",
                json!({
                    "coarse": r.coarse,
                    "fine": r.fine,
                    "extrapolated": r.extrapolated,
                    "sigma": r.sigma,
                    "paths": r.n,
                    "within_three_sigma": r.extrapolated.abs() <= 3.0 * r.sigma,
                }),
            )])
        }
        Params::Spectrum(p) => {
            let t = prep.line()?;
            let basis = ProductEigenbasis::new(t, p.level, p.epsilon, p.modes)?;
            let op = local_laplacian(&basis);
            Ok(vec![Artifact::CsvText {
                name: "spectrum.csv".into(),
                text: op.spectrum_csv(),
            }])
        }
        Params::Evolve(p) => {
            let t = prep.line()?;
            let basis = ProductEigenbasis::new(t, p.level, p.epsilon, p.modes)?;
            let c = match (&p.coefficients, p.unit) {
                (Some(c), _) => c.clone(),
                (None, Some([i, j])) => {
                    if i >= basis.shape().0 {
                        return Err(Error::Input(format!(
                            "unit index {i} exceeds the {} Cantor vectors",
                            basis.shape().0
                        )));
                    }
                    basis.unit(i, j)
                }
                (None, None) => return Err(Error::Input("no initial coefficients".into())),
            };
            let n0 = norm(&c);
            let mut rows = Vec::new();
            for &time in &p.times {
                let n = match p.kind {
                    EvolveKind::Heat => norm(&heat_evolve_spectral(&basis, &c, time)?),
                    EvolveKind::Schrodinger => complex_norm(&schrodinger_evolve(&basis, &c, time)?),
                };
                rows.push(vec![Cell::F(time), Cell::F(n), Cell::F(n - n0)]);
            }
            Ok(vec![csv("evolve.csv", vec!["t", "norm", "norm_change"], rows)])
        }
        Params::KoopmanScan(p) => {
            let t = prep.line()?;
            let amps = koopman_eigen_search(t, &prep.functions[0], &prep.points[0], &p.alphas, p.window)?;
            let rows = p
                .alphas
                .iter()
                .zip(&amps)
                .map(|(a, c)| vec![Cell::F(*a), Cell::F(*c)])
                .collect();
            Ok(vec![csv("koopman.csv", vec!["alpha", "amplitude"], rows)])
        }
        Params::Hodge(p) => {
            let t = prep.line()?;
            let pm = p.potential_modes.unwrap_or(2 * p.modes + 2);
            let w = DiscreteL2Space::glued(t, p.level, p.modes)?;
            let v = DiscreteL2Space::glued(t, p.level + p.potential_refinement, pm)?;
            let r = hodge_complement_dim(t, &w, &v)?;
            let rows = r
                .singular_values
                .iter()
                .enumerate()
                .map(|(k, s)| vec![Cell::U(k), Cell::F(*s)])
                .collect();
            let summary: Vec<Value> = r
                .complement
                .iter()
                .map(|v| {
                    let (arg, max) =
                        v.iter().enumerate().fold(
                            (0, 0.0f64),
                            |(a, m), (k, x)| if x.abs() > m { (k, x.abs()) } else { (a, m) },
                        );
                    json!({"length": v.len(), "norm": norm(std::slice::from_ref(v)), "max_abs": max, "argmax": arg})
                })
                .collect();
            Ok(vec![
                json_artifact(
                    "hodge.json",
                    json!({
                        "dimension": r.dimension,
                        "field_space_dimension": w.dim(),
                        "potential_space_dimension": v.dim(),
                        "gap_ratio": r.gap_ratio.is_finite().then_some(r.gap_ratio),
                        "gap_infinite": r.gap_ratio.is_infinite(),
                        "complement_vector_summary": summary,
                    }),
                ),
                csv("singular_values.csv", vec!["index", "singular_value"], rows),
            ])
        }
        Params::Liouville(p) => {
            let t = prep.line()?;
            let space = if p.glued {
                DiscreteL2Space::glued(t, p.level, p.modes)?
            } else {
                DiscreteL2Space::unglued(t, p.level, p.modes)?
            };
            let r = liouville_kernel_dim(t, &space)?;
            let rows = r
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, s)| vec![Cell::U(k), Cell::F(*s)])
                .collect();
            Ok(vec![
                json_artifact(
                    "liouville.json",
                    json!({"dimension": r.dimension, "space_dimension": space.dim(), "glued": p.glued}),
                ),
                csv("eigenvalues.csv", vec!["index", "eigenvalue"], rows),
            ])
        }
        Params::Sobolev(p) => {
            let t = prep.line()?;
            let f = &prep.functions[0];
            let mut rows = Vec::new();
            for k in 0..=p.max_order.min(f.smoothness) {
                rows.push(vec![Cell::Empty, Cell::U(k), Cell::F(sobolev_norm(t, f, k)?)]);
            }
            for &level in &p.project_levels {
                let g = tlc_project(t, f, level)?;
                for k in 0..=p.max_order.min(g.smoothness) {
                    rows.push(vec![Cell::U(level), Cell::U(k), Cell::F(sobolev_norm(t, &g, k)?)]);
                }
            }
            Ok(vec![csv(
                "sobolev.csv",
                vec!["projection_level", "order", "norm"],
                rows,
            )])
        }
    }
}

/// Whether a library error is a numerical failure rather than a bad request.
pub fn is_numerical(e: &Error) -> bool {
    matches!(e, Error::Diagnostic(_) | Error::Divergence(_))
}
