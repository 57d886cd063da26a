mod args;
mod bench;
mod output;

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use girgs::estimator::DegreeEstimator;
use girgs::generate::{generate_girg, generate_hrg, thread_pool, StepTimings};
use girgs::hrg::{
    disk_radius, sample_hrg_uniforms, HrgCoordinates, HrgParams, HyperbolicRule, RadiusEstimator, ESTIMATE_PAIRS,
};
use girgs::model::{sample_weights, DegreeSpec, GirgParams};
use girgs::oracle::coupling_analysis;
use girgs::sink::{ChecksumSink, EdgeSink};

use args::{Cli, Command, CompareArgs, EstimateArgs, GirgArgs, HrgArgs, Model, OutputArgs};
use output::Provenance;

const VERSION: &str = concat!("girgs ", env!("CARGO_PKG_VERSION"));

#[derive(Debug)]
pub enum CliError {
    /// Parameter outside its valid range.
    Range(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Range(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn io(what: impl fmt::Display) -> impl FnOnce(io::Error) -> CliError {
        move |e| CliError::Io(format!("{what}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Range(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<girgs::Error> for CliError {
    fn from(e: girgs::Error) -> Self {
        CliError::Range(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Girg(a) => girg(a, &mut out),
        Command::Hrg(a) => hrg(a, &mut out),
        Command::Estimate(a) => estimate(a, &mut out),
        Command::Compare(a) => compare(a, &mut out),
        Command::Bench(a) => bench::run(a, &mut out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// In-memory edge list or checksum only.
enum Store {
    Edges(Vec<(u32, u32)>),
    Checksum(ChecksumSink),
}

impl Store {
    fn new(out: &OutputArgs) -> Self {
        if out.no_store {
            Store::Checksum(ChecksumSink::default())
        } else {
            Store::Edges(Vec::new())
        }
    }

    fn sink(&mut self) -> &mut dyn EdgeSink {
        match self {
            Store::Edges(e) => e,
            Store::Checksum(c) => c,
        }
    }

    fn checksum(&self) -> u64 {
        match self {
            Store::Edges(e) => {
                let mut c = ChecksumSink::default();
                c.push_batch(e);
                c.checksum
            }
            Store::Checksum(c) => c.checksum,
        }
    }

    /// Sorted so files do not depend on the worker count.
    fn write(self, out: &OutputArgs, n: usize, prov: &Provenance) -> Result<(), CliError> {
        if let (Some(path), Store::Edges(mut edges)) = (&out.edges_out, self) {
            edges.sort_unstable();
            output::write_edges(path, out.format, n, prov, &edges).map_err(CliError::io(path.display()))?;
        }
        Ok(())
    }
}

fn summary(
    out: &mut impl Write,
    model: &str,
    n: usize,
    m: u64,
    constant: String,
    checksum: u64,
    t: &StepTimings,
) -> Result<(), CliError> {
    let ms = |d: std::time::Duration| format!("{:.3}ms", d.as_secs_f64() * 1e3);
    writeln!(
        out,
        "{model} n={n} m={m} avg_degree={:.4} {constant} checksum={checksum:016x} weights={} positions={} binary={} pre={} edges={} total={}",
        2.0 * m as f64 / n as f64,
        ms(t.weights),
        ms(t.positions),
        ms(t.binary),
        ms(t.pre),
        ms(t.edges),
        ms(t.total()),
    )
    .map_err(CliError::io("standard output"))
}

fn write_coords(path: Option<&Path>, f: impl FnOnce(&Path) -> io::Result<()>) -> Result<(), CliError> {
    match path {
        Some(p) => f(p).map_err(CliError::io(p.display())),
        None => Ok(()),
    }
}

fn girg(a: &GirgArgs, out: &mut impl Write) -> Result<(), CliError> {
    let params = GirgParams {
        n: a.run.n,
        dim: a.dim,
        ple: a.ple,
        temp: a.run.temp,
        degree: match a.constant {
            Some(c) => DegreeSpec::Constant(c),
            None => DegreeSpec::Target(a.deg.unwrap_or(10.0)),
        },
        seed: a.run.seed,
    };
    let mut store = Store::new(&a.out);
    let res = generate_girg(&params, a.run.threads, store.sink())?;
    let mut prov: Provenance = vec![
        ("model", "girg".into()),
        ("n", params.n.to_string()),
        ("dim", params.dim.to_string()),
        ("ple", params.ple.to_string()),
        ("temp", params.temp.to_string()),
        ("c", res.c.to_string()),
    ];
    if let DegreeSpec::Target(t) = params.degree {
        prov.push(("target_degree", t.to_string()));
    }
    prov.extend([("seed", params.seed.to_string()), ("version", VERSION.into()), ("edges", res.edges.to_string())]);

    write_coords(a.out.coords_out.as_deref(), |p| {
        output::write_girg_coords(p, &prov, res.weights.as_slice(), res.positions.as_slice(), params.dim)
    })?;
    let checksum = store.checksum();
    store.write(&a.out, params.n, &prov)?;
    summary(out, "girg", params.n, res.edges, format!("c={}", res.c), checksum, &res.timings)
}

fn hrg(a: &HrgArgs, out: &mut impl Write) -> Result<(), CliError> {
    let params = HrgParams {
        n: a.run.n,
        alpha: a.alpha,
        temp: a.run.temp,
        degree: match a.offset {
            Some(c) => DegreeSpec::Constant(c),
            None => DegreeSpec::Target(a.deg.unwrap_or(10.0)),
        },
        seed: a.run.seed,
    };
    let mut store = Store::new(&a.out);
    let res = generate_hrg(&params, a.run.threads, store.sink())?;
    let big_r = res.coords.disk_radius();
    let mut prov: Provenance = vec![
        ("model", "hrg".into()),
        ("n", params.n.to_string()),
        ("alpha", params.alpha.to_string()),
        ("temp", params.temp.to_string()),
        ("C", res.offset.to_string()),
        ("R", big_r.to_string()),
    ];
    if let DegreeSpec::Target(t) = params.degree {
        prov.push(("target_degree", t.to_string()));
    }
    prov.extend([("seed", params.seed.to_string()), ("version", VERSION.into()), ("edges", res.edges.to_string())]);

    write_coords(a.out.coords_out.as_deref(), |p| {
        output::write_hrg_coords(p, &prov, res.coords.radii(), res.coords.angles())
    })?;
    let checksum = store.checksum();
    store.write(&a.out, params.n, &prov)?;
    let constant = format!("C={} R={big_r}", res.offset);
    summary(out, "hrg", params.n, res.edges, constant, checksum, &res.timings)
}

fn estimate(a: &EstimateArgs, out: &mut impl Write) -> Result<(), CliError> {
    let line = match a.model {
        Model::Girg => {
            let params = GirgParams {
                n: a.n,
                dim: a.dim,
                ple: a.ple,
                temp: a.temp,
                degree: DegreeSpec::Target(a.deg),
                seed: a.seed,
            };
            params.validate()?;
            let w = sample_weights(a.n, a.ple, a.seed)?;
            let e = DegreeEstimator::new(&w, a.dim, a.temp)?.estimate_c(a.deg)?;
            format!(
                "girg n={} c={} scale_factor={} expected_degree={} iterations={}",
                a.n, e.c, e.scale_factor, e.avg_degree, e.iterations
            )
        }
        Model::Hrg => {
            let params = HrgParams {
                n: a.n,
                alpha: a.alpha,
                temp: a.temp,
                degree: DegreeSpec::Target(a.deg),
                seed: a.seed,
            };
            params.validate()?;
            let u = sample_hrg_uniforms(a.n, a.seed)?;
            let e = RadiusEstimator::new(&u.radial, a.alpha, a.temp, ESTIMATE_PAIRS, 0)?.estimate(a.deg)?;
            format!(
                "hrg n={} C={} R={} expected_degree={} iterations={}",
                a.n, e.offset, e.disk_radius, e.avg_degree, e.iterations
            )
        }
    };
    writeln!(out, "{line}").map_err(CliError::io("standard output"))
}

fn compare(a: &CompareArgs, out: &mut impl Write) -> Result<(), CliError> {
    let params = HrgParams {
        n: a.n,
        alpha: a.alpha,
        temp: 0.0,
        degree: match a.offset {
            Some(c) => DegreeSpec::Constant(c),
            None => DegreeSpec::Target(a.deg.unwrap_or(100.0)),
        },
        seed: a.seed,
    };
    params.validate()?;
    if a.steps == 0 {
        return Err(CliError::Range("steps must be at least 1".into()));
    }
    let u = sample_hrg_uniforms(a.n, a.seed)?;
    let offset = match params.degree {
        DegreeSpec::Constant(c) => c,
        DegreeSpec::Target(t) => RadiusEstimator::new(&u.radial, a.alpha, 0.0, ESTIMATE_PAIRS, 0)?.estimate(t)?.offset,
    };
    let big_r = disk_radius(a.n, offset)?;
    let coords = HrgCoordinates::from_uniforms(&u, a.alpha, big_r)?;
    let rule = HyperbolicRule::new(big_r, 0.0)?;
    let cp = thread_pool(a.threads)?.install(|| coupling_analysis(&coords, &rule))?;
    let matched = cp.point(cp.degree_matched_constant())?;
    let points = cp.curve(a.steps);
    let line = format!(
        "compare n={} alpha={} C={offset} R={big_r} c_sub={} c_super={} d_girg={:.4} d_hrg={:.4} D_girg={:.4} matched_c={} missing={} extra={}",
        a.n, a.alpha, cp.c_sub, cp.c_super, cp.d_girg, cp.d_hrg, cp.big_d_girg, matched.c, matched.missing, matched.extra
    );
    match &a.out {
        Some(path) => {
            output::write_atomic(path, |w| cp.write_curve(w, &points)).map_err(CliError::io(path.display()))?;
            writeln!(out, "{line}").map_err(CliError::io("standard output"))
        }
        None => {
            writeln!(out, "% {line}").map_err(CliError::io("standard output"))?;
            cp.write_curve(out, &points).map_err(CliError::io("standard output"))
        }
    }
}
