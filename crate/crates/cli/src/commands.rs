//! Subcommand bodies. Each one validates its arguments, runs the core library
//! (inside a bounded worker pool where there is parallel work) and writes
//! ordered, deterministic output.

use std::path::Path;
use std::str::FromStr;

use qtda_core::classical::{persistence_column_reduction, triple_check, Agreement, BettiTable};
use qtda_core::complex::{jl_project, load_point_cloud, CloudFormat, FixedPoint, Mapping};
use qtda_core::emulator::{emulation_report, prepare_quantum_instance, run_seed, ProjectorMode, QuantumConfig};
use qtda_core::fixtures::{self, Fixture};
use qtda_core::gaps::{gap_report, gap_scaling_sweep, zeno_counterexample, SweepGenerator};
use qtda_core::resources::{
    compare as compare_reference, comparison_csv, exponent_fit, headline_speedup, total_runtime, Constants, CostGaps,
    CostModelInput, Memory, Reference, COMPARISON_FOOTNOTES, REPORT_NOTE,
};
use qtda_core::QtdaError;
use rayon::prelude::*;
use serde_json::json;

use crate::{CliError, CliResult, CompareArgs, CostArgs, GapsArgs, JlArgs, PersistenceArgs, QtdaArgs, ResourcesArgs, SourceArgs, ZenoArgs};

pub const CONSTANTS_ENV: &str = "QTDA_CONSTANTS";

fn parse<T: FromStr<Err = QtdaError>>(s: &str) -> CliResult<T> {
    Ok(s.parse::<T>()?)
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| CliError::Config(format!("bad {what} entry {t:?}"))))
        .collect()
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Big-O constants: explicit path, else $QTDA_CONSTANTS, else defaults.
pub fn load_constants(explicit: Option<&Path>) -> CliResult<Constants> {
    let env = std::env::var_os(CONSTANTS_ENV).map(std::path::PathBuf::from);
    match explicit.map(Path::to_path_buf).or(env) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            Ok(Constants::from_json_str(&text)?)
        }
        None => Ok(Constants::default()),
    }
}

/// Fixture or point cloud, with the fixture's canonical scale pair if any.
fn load_source(src: &SourceArgs) -> CliResult<Option<(Fixture, Option<(usize, usize)>)>> {
    if let Some(name) = &src.fixture {
        let (fx, mu_i, mu_j) = fixtures::named(name)?;
        let pair = (fx.scale_index(mu_i)?, fx.scale_index(mu_j)?);
        return Ok(Some((fx, Some(pair))));
    }
    let Some(path) = &src.input else {
        return Ok(None);
    };
    let format = match &src.format {
        Some(f) => parse::<CloudFormat>(f)?,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CloudFormat::Json,
            _ => CloudFormat::Csv,
        },
    };
    let fixed = FixedPoint::new(src.bits, src.frac_bits)?;
    let cloud = load_point_cloud(path, format, fixed).map_err(|e| match e {
        QtdaError::Io(source) => CliError::Io { path: path.clone(), source },
        other => CliError::Core(other),
    })?;
    Ok(Some((Fixture::from_cloud(cloud)?, None)))
}

fn require_source(src: &SourceArgs) -> CliResult<(Fixture, Option<(usize, usize)>)> {
    load_source(src)?.ok_or_else(|| CliError::Config("one of --input or --fixture is required".into()))
}

/// `all` (every i ≤ j), `consecutive` ((i, i) and (i, i+1)), `default`, `none`/empty, or `i,j;i,j`.
pub fn parse_scales(spec: &str, len: usize, default: Option<(usize, usize)>) -> CliResult<Vec<(usize, usize)>> {
    let spec = spec.trim();
    let pairs: Vec<(usize, usize)> = match spec {
        "" | "none" => Vec::new(),
        "all" => (0..len).flat_map(|i| (i..len).map(move |j| (i, j))).collect(),
        "consecutive" => (0..len)
            .flat_map(|i| std::iter::once((i, i)).chain((i + 1 < len).then_some((i, i + 1))))
            .collect(),
        "default" => vec![default.ok_or_else(|| {
            CliError::Config("--scales default needs a fixture; give explicit pairs `i,j`".into())
        })?],
        _ => spec
            .split(';')
            .map(|p| {
                let v: Vec<usize> = parse_list(p, "scale pair")?;
                match v.as_slice() {
                    [i, j] => Ok((*i, *j)),
                    _ => Err(CliError::Config(format!("scale pair {p:?} must be `i,j`"))),
                }
            })
            .collect::<CliResult<_>>()?,
    };
    for &(i, j) in &pairs {
        if i > j || j >= len {
            return Err(CliError::Config(format!("scale pair ({i}, {j}) needs i ≤ j < {len}")));
        }
    }
    Ok(pairs)
}

pub fn persistence(a: PersistenceArgs) -> CliResult<()> {
    let (fx, default) = require_source(&a.source)?;
    let n = fx.dm.n();
    if a.kmax >= n.max(1) {
        return Err(QtdaError::Infeasible(format!("kmax = {} but the cloud has only {n} points", a.kmax)).into());
    }
    let pairs = parse_scales(&a.scales, fx.schedule.len(), default)?;
    let pairing = persistence_column_reduction(&fx.schedule, &fx.dm, a.kmax)?;
    let table = BettiTable::from_pairing(&pairing, &pairs, a.kmax);
    let checks: Vec<Vec<Agreement>> = pool(a.jobs)?.install(|| {
        pairs
            .par_iter()
            .map(|&p| triple_check(&fx.dm, &fx.schedule, &[p], a.kmax))
            .collect::<qtda_core::Result<_>>()
    })?;
    let checks: Vec<Agreement> = checks.into_iter().flatten().collect();
    let torsion = checks.iter().filter(|c| c.torsion).count();
    let all_agree = checks.iter().filter(|c| !c.torsion).all(Agreement::agrees);
    let doc = json!({
        "k_max": a.kmax,
        "scales": fx.schedule.mus(),
        "entries": table.to_json_value()["entries"],
        "agreement": {
            "all_agree": all_agree,
            "checked": checks.len(),
            "torsion_flagged": torsion,
            "instances": checks,
        },
    });
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
            write_output(Some(&dir.join("betti.json")), &pretty(&doc))?;
            write_output(Some(&dir.join("pairs.csv")), &pairing.to_csv())
        }
        None => write_output(None, &pretty(&doc)),
    }
}

pub fn qtda(a: QtdaArgs) -> CliResult<()> {
    let (fx, default) = require_source(&a.source)?;
    let pairs = parse_scales(&a.scales, fx.schedule.len(), default)?;
    let constants = load_constants(a.constants.as_deref())?;
    let config = QuantumConfig {
        delta: a.delta,
        eta: a.eta,
        mode: parse::<ProjectorMode>(&a.mode)?,
        mapping: parse::<Mapping>(&a.mapping)?,
        success_constant: constants.success_constant,
    };
    if a.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let k_build = (a.k + 1).min(fx.dm.n().saturating_sub(1));
    let pool = pool(a.jobs)?;
    let prepared = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let cx_i = fx.complex(i, k_build)?;
                let cx_j = fx.complex(j, k_build)?;
                prepare_quantum_instance(&cx_i, &cx_j, a.k, config)
            })
            .collect::<qtda_core::Result<Vec<_>>>()
    })?;
    let jobs: Vec<(usize, u64)> = (0..pairs.len()).flat_map(|p| (0..a.seeds).map(move |s| (p, s))).collect();
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, s)| run_seed(&prepared[p], a.seed.wrapping_add(s)))
            .collect::<qtda_core::Result<Vec<_>>>()
    })?;
    if runs.len() == 1 {
        return write_output(a.out.as_deref(), &pretty(&emulation_report(&prepared[0], &runs[0])));
    }
    let mut matches = 0usize;
    let reports: Vec<serde_json::Value> = jobs
        .iter()
        .zip(&runs)
        .map(|(&(p, _), run)| {
            let prep = &prepared[p];
            let truth = prep.beta_classical as f64;
            let hit = match run.beta_rounded {
                Some(r) => r as f64 == truth,
                None => (run.beta_estimate - truth).abs() < a.delta,
            };
            matches += hit as usize;
            let (i, j) = pairs[p];
            json!({"i": i, "j": j, "k": a.k, "match": hit, "report": emulation_report(prep, run)})
        })
        .collect();
    let doc = json!({
        "runs": reports,
        "summary": {
            "runs": runs.len(),
            "matches": matches,
            "miss_rate": 1.0 - matches as f64 / runs.len() as f64,
            "eta": a.eta,
        },
    });
    write_output(a.out.as_deref(), &pretty(&doc))
}

fn parse_gaps(s: &str) -> CliResult<CostGaps> {
    let v: Vec<f64> = parse_list(s, "gap")?;
    match v.as_slice() {
        [g] => Ok(CostGaps::uniform(*g)),
        [dk, dk1, pipi] => Ok(CostGaps { dk: *dk, dk1: *dk1, pipi: *pipi }),
        _ => Err(CliError::Config(format!("--gaps takes one or three values (got {s:?})"))),
    }
}

/// Cost-model input from flags, with N, |S_k| and gaps measured when a source is given.
pub fn cost_input(a: &CostArgs) -> CliResult<CostModelInput> {
    let mut input = CostModelInput::new(a.n, a.k, parse::<Mapping>(&a.mapping)?);
    input.d = a.d;
    input.b = a.b;
    input.s_k = a.s_k;
    input.s_k1 = a.s_k1;
    input.s_sparse = a.s_sparse;
    input.beta = a.beta;
    input.gaps = parse_gaps(&a.gaps)?;
    input.hayakawa_gaps = match &a.hayakawa_gaps {
        Some(s) => match parse_list::<f64>(s, "Hayakawa gap")?.as_slice() {
            [l1, l2] => Some((*l1, *l2)),
            _ => return Err(CliError::Config("--hayakawa-gaps takes `Λ_1,Λ_2`".into())),
        },
        None => None,
    };
    input.delta = a.delta;
    input.eta = a.eta;
    input.memory = parse::<Memory>(&a.memory)?;
    input.constants = load_constants(a.constants.as_deref())?;
    if let Some((fx, default)) = load_source(&a.source)? {
        let pairs = parse_scales(&a.scales, fx.schedule.len(), default)?;
        let [(i, j)] = pairs.as_slice() else {
            return Err(CliError::Config("measurement needs exactly one scale pair".into()));
        };
        let k_build = (a.k + 1).min(fx.dm.n().saturating_sub(1));
        let (cx_i, cx_j) = (fx.complex(*i, k_build)?, fx.complex(*j, k_build)?);
        let g = gap_report(&cx_i, &cx_j, a.k)?;
        input.n = fx.dm.n();
        input.d = fx.cloud.dim();
        input.s_k = Some(cx_i.count(a.k) as f64);
        input.s_k1 = Some(cx_j.count(a.k + 1) as f64);
        input.gaps = CostGaps {
            dk: g.lambda_dk_i.unwrap_or(1.0),
            dk1: g.lambda_dk1_j.unwrap_or(1.0),
            pipi: g.lambda_pipi.unwrap_or(1.0),
        };
    }
    Ok(input)
}

pub fn resources(a: ResourcesArgs) -> CliResult<()> {
    let input = cost_input(&a.cost)?;
    let report = total_runtime(&input)?;
    let doc = json!({
        "input": input,
        "report": report,
    });
    write_output(a.out.as_deref(), &pretty(&doc))
}

fn references(spec: &str) -> CliResult<Vec<Reference>> {
    if spec.trim() == "all" {
        return Ok(Reference::ALL.to_vec());
    }
    spec.split(',').map(|r| parse::<Reference>(r.trim())).collect()
}

pub fn compare(a: CompareArgs) -> CliResult<()> {
    let input = cost_input(&a.cost)?;
    let refs = references(&a.reference)?;
    let mut rows = Vec::new();
    for &r in &refs {
        match compare_reference(&input, r) {
            Ok(row) => rows.push(row),
            // `all` skips rows whose extra parameters were not supplied.
            Err(QtdaError::InvalidArgument(_)) if a.reference.trim() == "all" && !matches!(r, Reference::SelfRef) => {}
            Err(e) => return Err(e.into()),
        }
    }
    write_output(a.out.as_deref(), &comparison_csv(&rows))?;
    if let Some(path) = &a.report {
        let sizes: Vec<usize> = parse_list(&a.fit_sizes, "fit size")?;
        let fits = rows
            .iter()
            .map(|row| exponent_fit(&input, row.reference, &sizes))
            .collect::<qtda_core::Result<Vec<_>>>()?;
        let footnotes: serde_json::Map<String, serde_json::Value> =
            COMPARISON_FOOTNOTES.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let doc = json!({
            "note": REPORT_NOTE,
            "input": input,
            "headline_speedup": headline_speedup(&input),
            "rows": rows,
            "exponent_fits": fits,
            "footnotes": footnotes,
        });
        write_output(Some(path), &pretty(&doc))?;
    }
    Ok(())
}

pub fn gaps(a: GapsArgs) -> CliResult<()> {
    let generator = parse::<SweepGenerator>(&a.generator)?;
    let sizes: Vec<usize> = parse_list(&a.sizes, "size")?;
    let table = pool(a.jobs)?.install(|| gap_scaling_sweep(generator, &sizes, a.k, a.trials, a.seed))?;
    write_output(a.out.as_deref(), &table.to_csv())?;
    if let Some(path) = &a.summary {
        let doc = json!({
            "generator": table.generator,
            "k": table.k,
            "seed": table.seed,
            "quartiles": table.summary(),
            "skipped": table.skipped,
        });
        write_output(Some(path), &pretty(&doc))?;
    }
    Ok(())
}

pub fn zeno(a: ZenoArgs) -> CliResult<()> {
    let report = zeno_counterexample()?;
    write_output(a.out.as_deref(), &pretty(&serde_json::to_value(report).map_err(QtdaError::from)?))
}

pub fn jl(a: JlArgs) -> CliResult<()> {
    let (fx, _) = require_source(&a.source)?;
    let (projected, cert) = jl_project(&fx.cloud, a.eps, a.seed)?;
    let doc = json!({
        "cloud": projected.to_json_value(),
        "certificate": cert,
        "seed": a.seed,
    });
    write_output(a.out.as_deref(), &pretty(&doc))
}
