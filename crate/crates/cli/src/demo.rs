//! Bundled scenarios. With `--out`, each writes `source.json`,
//! `model.json` (the target), `tau.json`, `omega.json` and `report.json`,
//! so `check-exact` can re-run it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use exactsem::scenarios;
use exactsem::{aggregate_micro_macro, check_exact, equilibrate, marginalize_childless, CheckConfig, Intervention, Sem};

use crate::docs::{write_json, DynamicsDoc, ModelDoc, OmegaDoc, ReportDoc, TauDoc};
use crate::{model_text, summary, write_triple, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Lightbulbs,
    Wrong1,
    Wrong2,
    MicroMacro,
    Dynamics,
    Fig3Marginalize,
}

pub fn run(name: DemoName, cfg: &CheckConfig, out: Option<&Path>) -> Result<Outcome> {
    match name {
        DemoName::Lightbulbs => lightbulbs(cfg, out),
        DemoName::Wrong1 => candidate(scenarios::wrong1(), "wrong1", cfg, out),
        DemoName::Wrong2 => candidate(scenarios::wrong2(), "wrong2", cfg, out),
        DemoName::MicroMacro => {
            let sem = scenarios::micro_macro();
            let t = aggregate_micro_macro(&sem, cfg)?;
            finish(&sem, t, out)
        }
        DemoName::Dynamics => {
            let spec = scenarios::dynamics();
            let t = equilibrate(&spec, cfg)?;
            let mut head = String::new();
            writeln!(head, "dynamics: x(t+1) = A x(t) + E, A = {:?}", spec.a.transpose().as_slice())?;
            match out {
                Some(dir) => {
                    let o = write_triple(dir, &t)?;
                    write_json(&dir.join("source.json"), &DynamicsDoc::from_spec(&spec))?;
                    Ok(Outcome::ok(head + &o.stdout))
                }
                None => Ok(Outcome::ok(head + &triple_text(&t))),
            }
        }
        DemoName::Fig3Marginalize => {
            let sem = scenarios::lightbulbs();
            let t = marginalize_childless(&sem, &BTreeSet::from(["L".to_string()]), cfg)?;
            finish(&sem, t, out)
        }
    }
}

fn triple_text(t: &exactsem::CertifiedTriple) -> String {
    format!("{}\n{}{}", t.provenance, summary(&t.report), model_text(&t.model))
}

fn finish(source: &Sem, t: exactsem::CertifiedTriple, out: Option<&Path>) -> Result<Outcome> {
    let head = format!("source model:\n{}", model_text(source));
    match out {
        Some(dir) => {
            let o = write_triple(dir, &t)?;
            write_json(&dir.join("source.json"), &ModelDoc::from_sem(source))?;
            Ok(Outcome::ok(head + &o.stdout))
        }
        None => Ok(Outcome::ok(head + &triple_text(&t))),
    }
}

fn candidate(c: scenarios::Candidate, name: &str, cfg: &CheckConfig, out: Option<&Path>) -> Result<Outcome> {
    let r = check_exact(&c.source, &c.target, &c.tau, &c.omega, cfg)?;
    let mut s = format!("{name}: source\n{}target\n{}", model_text(&c.source), model_text(&c.target));
    s.push_str(&summary(&r));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("source.json"), &ModelDoc::from_sem(&c.source))?;
        write_json(&dir.join("model.json"), &ModelDoc::from_sem(&c.target))?;
        write_json(&dir.join("tau.json"), &TauDoc::from_tau(&c.tau))?;
        write_json(&dir.join("omega.json"), &OmegaDoc::from_omega(&c.omega))?;
        write_json(&dir.join("report.json"), &ReportDoc::from_report(&r, Some(name)))?;
        writeln!(s, "wrote {}", dir.display())?;
    }
    Ok(Outcome {
        stdout: s,
        code: if r.exact { 0 } else { 1 },
    })
}

/// Monte Carlo `P(L = 1)` against the values enumerated from the eight
/// equally likely noise outcomes.
fn lightbulbs(cfg: &CheckConfig, out: Option<&Path>) -> Result<Outcome> {
    let sem = scenarios::lightbulbs();
    let n = cfg.samples;
    let mut s = format!("lightbulbs:\n{}", model_text(&sem));
    let mut ok = true;
    for (k, (i, target)) in [
        (Intervention::null(), 7.0 / 8.0),
        (Intervention::new([("B1", 0.0), ("B2", 0.0)]), 0.5),
    ]
    .into_iter()
    .enumerate()
    {
        let draws = sem.sample(&i, n, cfg.seed.wrapping_add(k as u64))?;
        let l = draws.column_by_label("L").expect("L is a variable");
        let p = l.iter().sum::<f64>() / n as f64;
        let sd = (target * (1.0 - target) / n as f64).sqrt();
        let within = (p - target).abs() <= 5.0 * sd;
        ok &= within;
        writeln!(
            s,
            "P(L=1 | {i}) = {p:.5} from {n} draws; enumerated {target}; |diff| = {:.2} sd{}",
            (p - target).abs() / sd,
            if within { "" } else { " (outside 5 sd)" }
        )?;
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("source.json"), &ModelDoc::from_sem(&sem))?;
    }
    Ok(Outcome {
        stdout: s,
        code: if ok { 0 } else { 1 },
    })
}
