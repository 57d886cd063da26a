//! Per-step timing sweeps.

use std::io::Write;
use std::time::Duration;

use girgs::generate::{generate_girg, generate_hrg, StepTimings};
use girgs::hrg::HrgParams;
use girgs::model::{DegreeSpec, GirgParams};
use girgs::sink::ChecksumSink;

use crate::args::{BenchArgs, Model};
use crate::CliError;

const STEPS: [&str; 6] = ["weights", "positions", "binary", "pre", "edges", "total"];

fn step_values(t: &StepTimings) -> [Duration; 6] {
    [t.weights, t.positions, t.binary, t.pre, t.edges, t.total()]
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

/// Writes a header row and one row per configuration: parameters, mean edge
/// count, then mean and standard deviation of nanoseconds per edge for each step.
pub fn run(args: &BenchArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.iters == 0 {
        return Err(CliError::Range("iters must be at least 1".into()));
    }
    let sep = args.sep.as_str();
    let mut head = vec!["model", "n", "dim", "temp", "deg", "iters", "edges"].join(sep);
    for s in STEPS {
        head.push_str(&format!("{sep}{s}_ns{sep}{s}_sd"));
    }
    writeln!(out, "{head}").map_err(CliError::io("standard output"))?;
    let dims = if args.model == Model::Hrg { vec![1] } else { args.dim.clone() };
    for &n in &args.n {
        for &dim in &dims {
            for &temp in &args.temp {
                for &deg in &args.deg {
                    let row = configuration(args, n, dim, temp, deg)?;
                    writeln!(out, "{}", row.join(sep)).map_err(CliError::io("standard output"))?;
                    out.flush().map_err(CliError::io("standard output"))?;
                }
            }
        }
    }
    Ok(())
}

fn configuration(args: &BenchArgs, n: usize, dim: usize, temp: f64, deg: f64) -> Result<Vec<String>, CliError> {
    let mut per_edge: Vec<[f64; 6]> = Vec::with_capacity(args.iters);
    let mut edges = Vec::with_capacity(args.iters);
    for i in 0..args.iters {
        let seed = args.seed.wrapping_add(i as u64);
        let mut sink = ChecksumSink::default();
        let (m, t) = match args.model {
            Model::Girg => {
                let p = GirgParams {
                    n,
                    dim,
                    ple: args.ple,
                    temp,
                    degree: DegreeSpec::Target(deg),
                    seed,
                };
                let o = generate_girg(&p, args.threads, &mut sink)?;
                (o.edges, o.timings)
            }
            Model::Hrg => {
                let p = HrgParams {
                    n,
                    alpha: args.alpha,
                    temp,
                    degree: DegreeSpec::Target(deg),
                    seed,
                };
                let o = generate_hrg(&p, args.threads, &mut sink)?;
                (o.edges, o.timings)
            }
        };
        let m_div = m.max(1) as f64;
        per_edge.push(step_values(&t).map(|d| d.as_secs_f64() * 1e9 / m_div));
        edges.push(m as f64);
    }
    let model = match args.model {
        Model::Girg => "girg",
        Model::Hrg => "hrg",
    };
    let mut row = vec![
        model.to_string(),
        n.to_string(),
        dim.to_string(),
        temp.to_string(),
        deg.to_string(),
        args.iters.to_string(),
        format!("{:.1}", mean_sd(&edges).0),
    ];
    for k in 0..STEPS.len() {
        let xs: Vec<f64> = per_edge.iter().map(|r| r[k]).collect();
        let (m, sd) = mean_sd(&xs);
        row.push(format!("{m:.3}"));
        row.push(format!("{sd:.3}"));
    }
    Ok(row)
}
