use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conv_approx::bounds::bound_report;
use conv_approx::harness::{
    erm_c_fit, erm_to_string, rate_sweep, sweep_to_string, with_thread_pool, ErmConfig, Format,
    SweepConfig,
};
use conv_approx::netbuild::{
    build_composite_network_with, build_radial_network_with, BuildOptions, FunctionDescriptor,
    NetworkSpec, ShiftRule, TargetFunction,
};
use conv_approx::neteval::{check_membership, forward};
use conv_approx::polyfactor::{factor_coefficient_certificate, factorize_filter};
use conv_approx::ridge::FeaturePolynomial;
use conv_approx::{Error, Filter, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "conv-approx", version, about = "Deep convolutional approximation networks and rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Radial,
    Composite,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShiftArg {
    Accumulated,
    Product,
}

#[derive(Subcommand)]
enum Command {
    /// Build one network per N and compare the measured sup error with the bound.
    RateSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Overrides the config's output path; `-` writes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit the output coefficients on noisy samples and report test risks.
    ErmFit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a network and write its JSON spec.
    Build {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a network spec at points given as comma-separated coordinates.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// A point such as `0.1,-0.2,0.3`; repeatable.
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        points: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Factor a filter, read as a JSON array, into filters of span at most s.
    Factorize {
        /// JSON file holding the filter; `-` reads stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        s: usize,
    },
    /// Print bound values and the membership report for a network.
    Bounds {
        /// Existing spec; otherwise the network options below are used.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        net: NetArgs,
        /// Sample size for the generalization shape.
        #[arg(long, default_value_t = 256)]
        m: usize,
        /// Covering-number scale.
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
    },
}

#[derive(Args)]
struct NetArgs {
    #[arg(long, value_enum, default_value = "radial")]
    kind: KindArg,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    s: usize,
    #[arg(long = "n", default_value_t = 4)]
    n: usize,
    /// Target as JSON, e.g. `{"family":"abs_shift","shift":0.3}`.
    #[arg(long, default_value = r#"{"family":"identity"}"#)]
    f: String,
    /// Feature polynomial as a JSON monomial map (composite only).
    #[arg(long)]
    feature: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "accumulated")]
    shift_rule: ShiftArg,
}

impl NetArgs {
    fn descriptor(&self) -> Result<FunctionDescriptor> {
        Ok(serde_json::from_str(&self.f)?)
    }

    fn build(&self) -> Result<NetworkSpec> {
        let desc = self.descriptor()?;
        let opts = BuildOptions {
            shift_rule: match self.shift_rule {
                ShiftArg::Accumulated => ShiftRule::AccumulatedNorm,
                ShiftArg::Product => ShiftRule::ProductOfNorms,
            },
        };
        match self.kind {
            KindArg::Radial => {
                let f = TargetFunction::from_descriptor(desc, 0.0, 1.0)?;
                build_radial_network_with(&f, self.d, self.s, self.n, opts)
            }
            KindArg::Composite => {
                let poly: FeaturePolynomial = match &self.feature {
                    Some(text) => serde_json::from_str(text)?,
                    None => conv_approx::harness::default_feature(self.d)?,
                };
                let f = TargetFunction::from_descriptor(desc, -1.0, 1.0)?;
                build_composite_network_with(&f, &poly, self.s, self.n, self.seed, opts)
            }
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        Ok(std::io::read_to_string(std::io::stdin())?)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => Ok(std::fs::write(p, text)?),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parameter(format!("bad coordinate {t:?}: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RateSweep { config, format, output } => {
            let cfg: SweepConfig = serde_json::from_str(&read_text(&config)?)?;
            let result = with_thread_pool(|| rate_sweep(&cfg))??;
            let target = output.or(cfg.output.clone());
            emit(&sweep_to_string(&result, format.into())?, target.as_deref())?;
            let to_stdout = target.as_deref().is_none_or(|p| p == Path::new("-"));
            if matches!(format, FormatArg::Csv) {
                if to_stdout {
                    eprintln!("slope {}", result.slope);
                } else {
                    println!("slope {}", result.slope);
                }
            }
            result.check()
        }
        Command::ErmFit { config, format, output } => {
            let cfg: ErmConfig = serde_json::from_str(&read_text(&config)?)?;
            let result = with_thread_pool(|| erm_c_fit(&cfg))??;
            let target = output.or(cfg.output.clone());
            emit(&erm_to_string(&result, format.into())?, target.as_deref())
        }
        Command::Build { net, output } => {
            let spec = net.build()?;
            emit(&(spec.to_json()? + "\n"), output.as_deref())
        }
        Command::Eval { spec, points, format } => {
            let spec = NetworkSpec::from_json(&read_text(&spec)?)?;
            let mut out = Vec::new();
            for p in &points {
                let x = parse_point(p)?;
                let t = forward(&spec, &x, false)?;
                if t.outside_ball {
                    eprintln!("warning: point {p} lies outside the unit ball");
                }
                out.push((x, t.output));
            }
            let text = match format {
                FormatArg::Json => {
                    let rows: Vec<_> = out.iter().map(|(x, y)| json!({"x": x, "output": y})).collect();
                    serde_json::to_string_pretty(&rows)? + "\n"
                }
                FormatArg::Csv => {
                    let mut s = String::from("point,output\n");
                    for (x, y) in &out {
                        let coords: Vec<String> = x.iter().map(f64::to_string).collect();
                        s.push_str(&format!("\"{}\",{y}\n", coords.join(",")));
                    }
                    s
                }
            };
            emit(&text, None)
        }
        Command::Factorize { input, s } => {
            let coeffs: Vec<f64> = serde_json::from_str(&read_text(&input)?)?;
            let w = Filter::new(coeffs);
            let fac = factorize_filter(&w, s)?;
            let cert = factor_coefficient_certificate(&fac, &w, s);
            let doc = json!({
                "factors": fac.factors,
                "scale_carrier_index": fac.scale_carrier_index,
                "residual": fac.residual,
                "certificate": cert,
            });
            emit(&(serde_json::to_string_pretty(&doc)? + "\n"), None)
        }
        Command::Bounds { spec, net, m, eta } => {
            let spec = match spec {
                Some(p) => NetworkSpec::from_json(&read_text(&p)?)?,
                None => net.build()?,
            };
            let f = TargetFunction::from_descriptor(net.descriptor()?, -1.0, 1.0)
                .or_else(|_| TargetFunction::from_descriptor(net.descriptor()?, 0.0, 1.0))?;
            let report = bound_report(&spec, f.alpha, f.seminorm, m, eta);
            let membership = check_membership(&spec, report.r);
            let doc = json!({ "bounds": report, "membership": membership });
            emit(&(serde_json::to_string_pretty(&doc)? + "\n"), None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
