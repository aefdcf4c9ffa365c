use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use reeb_lab::calculus::Rule;
use reeb_lab::contact::ContactStructure;
use reeb_lab::expr::Expression;
use reeb_lab::flow::{fmt17, integrate, FlowError, IntegrateOptions, Trajectory};
use reeb_lab::geodesics::cogeodesic_reeb_compare;
use reeb_lab::par::Execution;
use reeb_lab::sampling::parse_counts;
use reeb_lab::scenarios::{self, builtin, EnergySpec, Expect, Scenario};

use crate::report::{RunReport, ScenarioInfo, Verdict};
use crate::svg::{Plot, Series};
use crate::{Cli, Command, Global, Target};

pub fn run(cli: &Cli) -> Result<RunReport> {
    let g = &cli.global;
    let out = g.out.as_path();
    match &cli.command {
        Command::List => list(),
        Command::VerifyContact { target, contact, grid } => {
            let sc = load(g, target, &[])?;
            let counts = grid.as_deref().map(counts).transpose()?;
            let mut rep = RunReport::new("verify-contact", Some(info(g, &sc)), json!({ "contact": contact, "grid": counts }));
            let ids: Vec<String> = match contact {
                Some(c) => vec![c.clone()],
                None => sc.contacts().iter().map(|(id, _)| id.clone()).collect(),
            };
            if ids.is_empty() {
                bail!("scenario `{}` has no active contact structure", sc.id());
            }
            for id in ids {
                let r = sc.verify_contact(&id, counts.as_deref(), Execution::default())?;
                let sign = match r.sign {
                    1 => "positive",
                    -1 => "negative",
                    _ => "changes sign",
                };
                rep.check(
                    format!("contact {id}"),
                    Verdict::from_bool(r.pass),
                    format!("min |α∧dα| {} over {} samples ({sign}), eps {}", fmt_g(r.min_abs_volume), r.samples, fmt_g(r.eps)),
                    serde_json::to_value(&r)?,
                );
            }
            Ok(rep)
        }
        Command::Reeb { target, at, contact } => {
            let sc = load(g, target, &[])?;
            let x = point(at)?;
            let (id, cs) = contact_of(&sc, contact.as_deref())?;
            let mut rep = RunReport::new("reeb", Some(info(g, &sc)), json!({ "contact": id, "at": x }));
            let s = cs.reeb_at(&x)?;
            let tol = sc.tolerances().reeb_residual;
            rep.check(
                format!("reeb {id}"),
                Verdict::from_bool(s.alpha_residual <= tol && s.kernel_residual <= tol),
                format!(
                    "R = [{}], |α(R)-1| {:.1e}, |i_R dα| {:.1e}, tol {:.0e}",
                    s.r.iter().map(|v| fmt_g(*v)).collect::<Vec<_>>().join(", "),
                    s.alpha_residual,
                    s.kernel_residual,
                    tol
                ),
                serde_json::to_value(&s)?,
            );
            Ok(rep)
        }
        Command::Flow { target, from, time, contact, metric, tol, samples } => {
            let sc = load(g, target, &[])?;
            let x0 = point(from)?;
            let tol = tol.unwrap_or(sc.tolerances().integrate);
            let (label, field): (String, Arc<dyn reeb_lab::flow::Field>) = match metric {
                Some(m) => {
                    let gm = sc.metric(m).ok_or_else(|| anyhow!("no metric `{m}`"))?;
                    (format!("geodesic {m}"), Arc::new(gm.geodesic_field()))
                }
                None => {
                    let (id, cs) = contact_of(&sc, contact.as_deref())?;
                    (format!("reeb {id}"), Arc::new(cs.reeb_field()))
                }
            };
            let mut rep = RunReport::new(
                "flow",
                Some(info(g, &sc)),
                json!({ "field": label, "from": x0, "time": time, "tol": tol, "samples": samples }),
            );
            let (tr, exit) = flow_to(field.as_ref(), &x0, *time, tol)?;
            prepare(out)?;
            let csv = out.join("trajectory.csv");
            tr.write_csv(std::fs::File::create(&csv)?, Some(*samples))?;
            rep.artifact(out, &csv);
            plot_trajectory(&mut rep, out, &tr, *samples, &format!("{} flow, {label}", sc.id()))?;
            let end = tr.end_state().to_vec();
            let summary = match &exit {
                Some(face) => format!("left the chart through {face} at t = {}", fmt_g(tr.t_end())),
                None => format!("reached t = {} at [{}]", fmt_g(tr.t_end()), join(&end)),
            };
            rep.check(
                label,
                Verdict::Pass,
                summary,
                json!({ "t_end": tr.t_end(), "end": end, "exit": exit, "steps": tr.times.len() - 1 }),
            );
            Ok(rep)
        }
        Command::Orbits { target, leaf, grid, tmax } => {
            let mut extra = Vec::new();
            if let Some(t) = leaf {
                let probe = load(g, target, &[])?;
                let p = probe
                    .config()
                    .leaf
                    .as_ref()
                    .ok_or_else(|| anyhow!("scenario `{}` has no leaf parameter", probe.id()))?
                    .parameter
                    .clone();
                extra.push((p, *t));
            }
            let sc = load(g, target, &extra)?;
            let counts = grid.as_deref().map(counts).transpose()?;
            let mut rep = RunReport::new(
                "orbits",
                Some(info(g, &sc)),
                json!({ "leaf": leaf, "grid": counts, "tmax": tmax }),
            );
            let r = sc.search_orbits(counts.as_deref(), *tmax, Execution::default())?;
            let found = !r.orbits.is_empty();
            let verdict = if found { Verdict::OrbitsFound } else { Verdict::NoOrbitFound };
            let mut summary = format!(
                "{} orbit(s) from {} seeds; {} near returns, {} left the chart",
                r.orbits.len(),
                r.seeds,
                r.near_returns,
                r.exits
            );
            if let Some(o) = r.orbits.first() {
                summary += &format!("; shortest period {} at [{}]", fmt_g(o.period), join(&o.point));
            }
            rep.check("orbit search", verdict, summary, serde_json::to_value(&r)?);
            if let Some(exp) = sc.expected_orbits() {
                let ok = match exp {
                    Expect::None => !found,
                    Expect::Orbits => found,
                };
                let want = if exp == Expect::None { "no orbit" } else { "orbits" };
                rep.check("expected outcome", Verdict::from_bool(ok), format!("scenario expects {want} on this leaf"), json!({ "expect": exp }));
            }
            for fx in sc.fixtures() {
                let f = sc.verify_fixture(fx)?;
                rep.check(
                    format!("fixture {}", f.id),
                    Verdict::from_bool(f.pass),
                    format!("period {} closes to {:.1e} (tol {:.0e})", fmt_g(f.period), f.residual, f.residual_tol),
                    serde_json::to_value(&f)?,
                );
            }
            prepare(out)?;
            let table = out.join("orbits.csv");
            let mut w = csv::Writer::from_path(&table)?;
            let field = sc.field(&sc.config().orbit_search.as_ref().expect("searched").field)?;
            let names: Vec<String> = field.chart().coords().iter().cloned().collect();
            let mut header = vec!["seed".to_string(), "period".into(), "residual".into()];
            header.extend(names.iter().cloned());
            w.write_record(&header)?;
            for o in &r.orbits {
                let mut rec = vec![o.seed.to_string(), fmt17(o.period), fmt17(o.residual)];
                rec.extend(o.point.iter().map(|v| fmt17(*v)));
                w.write_record(&rec)?;
            }
            w.flush()?;
            rep.artifact(out, &table);
            if found {
                let tol = sc.tolerances().integrate;
                let mut series = Vec::new();
                for (k, o) in r.orbits.iter().enumerate().take(8) {
                    let (tr, _) = flow_to(field.as_ref(), &o.point, o.period, tol)?;
                    series.push(Series {
                        name: format!("orbit {k}"),
                        points: tr.sample(400).into_iter().map(|(_, y)| (y[0], y[1])).collect(),
                    });
                }
                let plot = Plot {
                    title: format!("{} closed orbits ({} vs {})", sc.id(), names[1], names[0]),
                    xlabel: names[0].clone(),
                    ylabel: names[1].clone(),
                    series,
                };
                for p in plot.write(out, "orbit-projection")? {
                    rep.artifact(out, &p);
                }
            }
            Ok(rep)
        }
        Command::Certify { target, only } => {
            let sc = load(g, target, &[])?;
            let mut rep = RunReport::new("certify", Some(info(g, &sc)), json!({ "only": only }));
            let specs: Vec<_> = sc
                .certificates()
                .into_iter()
                .filter(|c| only.as_ref().map_or(true, |o| &c.id == o))
                .collect();
            if specs.is_empty() {
                bail!("no applicable certificate{}", only.as_ref().map(|o| format!(" `{o}`")).unwrap_or_default());
            }
            prepare(out)?;
            let path = out.join("certificates.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["id", "role", "functional", "eps", "margin", "samples", "skipped", "verdict"])?;
            for spec in specs {
                let r = sc.run_certificate(spec, Execution::default())?;
                let v = Verdict::from_bool(r.pass);
                w.write_record([
                    spec.id.clone(),
                    spec.role.clone(),
                    r.functional.clone(),
                    fmt17(r.eps),
                    fmt17(r.margin),
                    r.samples.to_string(),
                    r.skipped.to_string(),
                    v.as_str().to_string(),
                ])?;
                rep.check(
                    format!("certificate {}", spec.id),
                    v,
                    format!("inf dW(X) for W = {}: {} over {} samples (needs >= {})", r.functional, fmt_g(r.margin), r.samples, fmt_g(r.eps)),
                    serde_json::to_value(&r)?,
                );
            }
            w.flush()?;
            rep.artifact(out, &path);
            Ok(rep)
        }
        Command::Geodesics { target, metric, from, velocity, time, samples } => {
            let sc = load(g, target, &[])?;
            let id = match metric {
                Some(m) => m.clone(),
                None => sc
                    .metric_ids()
                    .first()
                    .map(|s| s.to_string())
                    .ok_or_else(|| anyhow!("scenario `{}` declares no metric", sc.id()))?,
            };
            let gm = sc.metric(&id).ok_or_else(|| anyhow!("no metric `{id}`"))?;
            let q = point(from)?;
            let mut rep = RunReport::new(
                "geodesics",
                Some(info(g, &sc)),
                json!({ "metric": id, "from": q, "velocity": velocity, "time": time }),
            );
            let gamma = gm.christoffel(&q)?;
            let gmat = gm.eval(&q)?;
            let n = gm.dim();
            let entries: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| gmat[(i, j)]).collect()).collect();
            rep.check(
                format!("christoffel {id}"),
                Verdict::Pass,
                format!("max |Γ| = {} at [{}]", fmt_g(gamma.gamma.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))), join(&q)),
                json!({ "metric": entries, "christoffel": gamma }),
            );
            if let Some(v) = velocity {
                let v = point(v)?;
                if v.len() != n {
                    bail!("velocity needs {n} components");
                }
                let field = gm.geodesic_field();
                let tol = sc.tolerances().integrate;
                let x0: Vec<f64> = q.iter().chain(&v).copied().collect();
                let e0 = field.speed_squared(&x0)?;
                let (tr, exit) = flow_to(&field, &x0, *time, tol)?;
                let mut drift = 0.0f64;
                for (_, y) in tr.sample(*samples) {
                    drift = drift.max((field.speed_squared(&y)? - e0).abs());
                }
                let bound = 10.0 * tol * e0.max(1.0);
                rep.check(
                    format!("speed {id}"),
                    Verdict::from_bool(drift <= bound),
                    format!(
                        "|g(v,v) - {}| <= {:.1e} over t in [0, {}]{}",
                        fmt_g(e0),
                        drift,
                        fmt_g(tr.t_end()),
                        exit.as_ref().map(|f| format!(" (left the chart through {f})")).unwrap_or_default()
                    ),
                    json!({ "speed_squared": e0, "drift": drift, "bound": bound, "t_end": tr.t_end(), "exit": exit }),
                );
                prepare(out)?;
                let csv_path = out.join("geodesic.csv");
                tr.write_csv(std::fs::File::create(&csv_path)?, Some(*samples))?;
                rep.artifact(out, &csv_path);
                if n >= 2 {
                    let names = gm.chart().coord_names();
                    let plot = Plot {
                        title: format!("{} geodesic of {id}", sc.id()),
                        xlabel: names[0].to_string(),
                        ylabel: names[1].to_string(),
                        series: vec![Series {
                            name: "base path".into(),
                            points: tr.sample(*samples).into_iter().map(|(_, y)| (y[0], y[1])).collect(),
                        }],
                    };
                    for p in plot.write(out, "geodesic-path")? {
                        rep.artifact(out, &p);
                    }
                }
            }
            Ok(rep)
        }
        Command::CompareCogeodesic { target, only, metric, at, psi, time } => {
            let sc = load(g, target, &[])?;
            let tol = sc.tolerances().integrate;
            let mut rep = RunReport::new(
                "compare-cogeodesic",
                Some(info(g, &sc)),
                json!({ "only": only, "metric": metric, "at": at, "psi": psi, "time": time }),
            );
            let mut runs = Vec::new();
            if let Some(m) = metric {
                let gm = sc.metric(m).ok_or_else(|| anyhow!("no metric `{m}`"))?;
                let q = point(at.as_deref().ok_or_else(|| anyhow!("--metric needs --at"))?)?;
                let psi = psi.ok_or_else(|| anyhow!("--metric needs --psi"))?;
                runs.push((format!("{m} ad hoc"), cogeodesic_reeb_compare(gm, &q, psi, *time, tol)?));
            } else {
                for c in sc.config().compare.iter().filter(|c| only.as_ref().map_or(true, |o| &c.id == o)) {
                    runs.push((c.id.clone(), sc.run_compare(c)?));
                }
            }
            if runs.is_empty() {
                bail!("nothing to compare; the scenario has no matching compare entry");
            }
            for (name, c) in runs {
                rep.check(
                    format!("cogeodesic {name}"),
                    Verdict::from_bool(c.max_deviation <= 100.0 * c.tol),
                    format!("max base deviation {:.2e} over T = {} (bound {:.0e})", c.max_deviation, fmt_g(c.time), 100.0 * c.tol),
                    serde_json::to_value(&c)?,
                );
            }
            Ok(rep)
        }
        Command::Energy { target, map } => {
            let sc = load(g, target, &[])?;
            let mut rep = RunReport::new("energy", Some(info(g, &sc)), json!({ "map": map }));
            let specs: Vec<EnergySpec> = if Path::new(map).is_file() {
                let text = std::fs::read_to_string(map)?;
                vec![serde_json::from_str(&text).with_context(|| format!("reading energy entry {map}"))?]
            } else if map == "all" {
                sc.energies().into_iter().cloned().collect()
            } else {
                vec![sc
                    .energies()
                    .into_iter()
                    .find(|e| &e.id == map)
                    .cloned()
                    .ok_or_else(|| anyhow!("no applicable energy entry `{map}`"))?]
            };
            if specs.is_empty() {
                bail!("scenario `{}` has no applicable energy entry", sc.id());
            }
            for spec in &specs {
                let r = sc.run_energy(spec, Rule::default())?;
                let summary = match r.expected {
                    Some(x) => format!("{:?} energy {} (expected {}, tol {:.0e})", r.kind, fmt17(r.value), fmt_g(x), r.tol.unwrap_or(1e-9)),
                    None => format!("{:?} energy {}", r.kind, fmt17(r.value)),
                };
                rep.check(format!("energy {}", r.id), Verdict::from_bool(r.pass.unwrap_or(true)), summary, serde_json::to_value(&r)?);
            }
            Ok(rep)
        }
    }
}

fn list() -> Result<RunReport> {
    let mut rep = RunReport::new("list", None, Value::Null);
    for id in builtin::IDS {
        let cfg = builtin::config(id).expect("built-in scenario parses");
        rep.check(id.to_string(), Verdict::Pass, cfg.description.clone(), json!({ "parameters": cfg.parameters }));
    }
    Ok(rep)
}

fn overrides(g: &Global) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    for kv in &g.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects NAME=VALUE, got `{kv}`"))?;
        m.insert(k.trim().to_string(), number(v)?);
    }
    Ok(m)
}

fn load(g: &Global, t: &Target, extra: &[(String, f64)]) -> Result<Scenario> {
    let mut ov = overrides(g)?;
    for (k, v) in extra {
        ov.insert(k.clone(), *v);
    }
    match (&g.config, &t.scenario) {
        (Some(path), None) => Ok(scenarios::load_config_with(path, &ov)?),
        (None, Some(id)) => Ok(scenarios::build_scenario(id, &ov)?),
        (Some(_), Some(_)) => bail!("give either a scenario id or --config, not both"),
        (None, None) => bail!("missing scenario id (or --config PATH)"),
    }
}

fn info(g: &Global, sc: &Scenario) -> ScenarioInfo {
    ScenarioInfo {
        id: sc.id().to_string(),
        overrides: overrides(g).unwrap_or_default(),
        config_path: g.config.as_ref().map(|p| p.display().to_string()),
        parameters: sc.params().clone(),
    }
}

fn contact_of<'a>(sc: &'a Scenario, id: Option<&str>) -> Result<(String, &'a Arc<ContactStructure>)> {
    match id {
        Some(c) => Ok((c.to_string(), sc.contact(c).ok_or_else(|| anyhow!("no active contact structure `{c}`"))?)),
        None => {
            let (c, cs) = sc.primary_contact().ok_or_else(|| anyhow!("scenario `{}` has no contact structure", sc.id()))?;
            Ok((c.to_string(), cs))
        }
    }
}

fn number(s: &str) -> Result<f64> {
    let e = Expression::parse(s.trim(), &[]).map_err(|e| anyhow!("bad number `{s}`: {e}"))?;
    e.eval(&[]).map_err(|e| anyhow!("bad number `{s}`: {e}"))
}

fn point(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(number).collect()
}

fn counts(s: &str) -> Result<Vec<usize>> {
    parse_counts(s).ok_or_else(|| anyhow!("grid must look like 6x6x6, got `{s}`"))
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// Integrate to `t`; a chart exit is not an error, it ends the trajectory.
fn flow_to(f: &dyn reeb_lab::flow::Field, x0: &[f64], t: f64, tol: f64) -> Result<(Trajectory, Option<String>)> {
    match integrate(f, x0, t, &IntegrateOptions::tol(tol)) {
        Ok(tr) => Ok((tr, None)),
        Err(FlowError::DomainExit { trajectory, face }) => Ok((*trajectory, Some(face))),
        Err(e) => Err(e.into()),
    }
}

fn plot_trajectory(rep: &mut RunReport, out: &Path, tr: &Trajectory, samples: usize, title: &str) -> Result<()> {
    let rows = tr.sample(samples);
    let series = tr
        .chart()
        .coords()
        .iter()
        .enumerate()
        .map(|(i, name)| Series {
            name: name.clone(),
            points: rows.iter().map(|(t, y)| (*t, y[i])).collect(),
        })
        .collect();
    let plot = Plot {
        title: title.to_string(),
        xlabel: "t".into(),
        ylabel: "coordinate".into(),
        series,
    };
    for p in plot.write(out, "trajectory-plot")? {
        rep.artifact(out, &p);
    }
    Ok(())
}

fn fmt_g(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.6e}")
    } else {
        format!("{v:.9}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_g(*x)).collect::<Vec<_>>().join(", ")
}
