use std::io::Read;
use std::path::{Path, PathBuf};

use hoig_core::data::write_csv;
use hoig_core::engine::{explain_stack, verify_properties};
use hoig_core::experiments::{
    run_realestate_experiment, run_synthetic_experiment, RealEstateConfig, SyntheticExperimentConfig, SyntheticModel,
};
use hoig_core::models::{fit_glm, fit_gpr, GlmOptions, GprOptions};
use hoig_core::synthetic::{generate_synthetic, SyntheticConfig};
use hoig_core::topology::{build_graph, build_simplicial, to_dot};
use hoig_core::{
    load_csv_excluding, AttributionTensor, CsvMode, Dataset, EngineConfig, Error, ExplanationRequest, Method,
    ModelSpec, PredictiveModel, QuadratureConfig, Rule,
};
use log::info;

use crate::{
    CliError, Command, DataArgs, ExperimentKind, ExplainArgs, ExportArgs, FormatArg, MethodArg, QuadratureArgs,
    RuleArg, SynthArgs, TrainKind, VerifyArgs,
};

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Synth(args) => synth(args),
        Command::Train { kind } => train(kind),
        Command::Explain(args) => explain(args),
        Command::Verify(args) => verify(args),
        Command::ExportGraph(args) => export_graph(args),
        Command::Experiment { kind } => experiment(kind),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(|e| io_error(path, e))?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| io_error(path, e))
    }
}

fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    let mode = if args.skip_bad_rows { CsvMode::SkipBadRows } else { CsvMode::Strict };
    let (data, report) =
        load_csv_excluding(&args.data, &args.target, &args.exclude, mode).map_err(|e| CliError::from(Error::from(e)))?;
    for skipped in &report.skipped {
        log::warn!("skipped {skipped}");
    }
    info!("read {} rows with {} features", report.rows_read, data.dim());
    Ok(data)
}

fn quadrature(args: &QuadratureArgs) -> CliResult<QuadratureConfig> {
    let rule = match args.rule {
        RuleArg::RightHand => Rule::RightHand,
        RuleArg::Trapezoid => Rule::Trapezoid,
    };
    let q = QuadratureConfig::new(args.points, rule);
    if !q.is_valid() {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    Ok(q)
}

fn method(arg: MethodArg) -> Method {
    match arg {
        MethodArg::Hessian => Method::HessianFormula,
        MethodArg::Compose => Method::OperatorComposition,
    }
}

fn parse_vector(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{what}: `{}` is not a finite number", v.trim())))
        })
        .collect()
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    text.push('\n');
    text
}

fn output_dir(out: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = out
        .or_else(|| std::env::var_os("HOIG_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hoig-out"));
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

fn synth(args: SynthArgs) -> CliResult {
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::Usage("--noise must be a non-negative number".into()));
    }
    let data = generate_synthetic(&SyntheticConfig {
        n_samples: args.samples,
        noise_scale: args.noise,
        seed: args.seed,
    });
    write_csv(&data, &args.out).map_err(|e| CliError::from(Error::from(e)))
}

fn train(kind: TrainKind) -> CliResult {
    let (spec, fit, out) = match kind {
        TrainKind::Gpr {
            data,
            lengthscale,
            signal_variance,
            noise_variance,
            grid_search,
            center_targets,
            out,
        } => {
            let dataset = load_data(&data)?;
            let options = GprOptions {
                lengthscale,
                signal_variance,
                noise_variance,
                grid_search,
                center_targets,
            };
            let (model, fit) = fit_gpr(&dataset, &options).map_err(|e| CliError::from(Error::from(e)))?;
            (ModelSpec::Gpr(model), to_json(&fit), out)
        }
        TrainKind::Glm {
            data,
            max_iters,
            tol,
            out,
        } => {
            let dataset = load_data(&data)?;
            let options = GlmOptions { max_iters, tol };
            let (model, fit) = fit_glm(&dataset, &options).map_err(|e| CliError::from(Error::from(e)))?;
            (ModelSpec::Glm(model), to_json(&fit), out)
        }
    };
    eprint!("{fit}");
    let mut text = spec.to_json();
    text.push('\n');
    write_output(out.as_deref(), &text)
}

fn load_model(path: &Path) -> CliResult<ModelSpec> {
    ModelSpec::load(path).map_err(|e| io_error(path, e))
}

fn explain(args: ExplainArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let data = match &args.data {
        Some(path) => Some(load_data(&DataArgs {
            data: path.clone(),
            target: args.target.clone(),
            exclude: args.exclude.clone(),
            skip_bad_rows: false,
        })?),
        None => None,
    };
    let input = match (&args.input, args.input_row, &data) {
        (Some(text), None, _) => parse_vector(text, "--input")?,
        (None, Some(row), Some(data)) => data
            .rows()
            .get(row)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("--input-row {row} is out of range ({} rows)", data.len())))?,
        _ => return Err(CliError::Usage("give either --input or --input-row with --data".into())),
    };
    if input.len() != model.dim() {
        return Err(CliError::Data(format!(
            "input has {} features, model expects {}",
            input.len(),
            model.dim()
        )));
    }
    let baseline_arg = args
        .baseline
        .clone()
        .unwrap_or_else(|| if model.is_standardized() { "mean".into() } else { "zero".into() });
    let (baseline, kind) = match baseline_arg.as_str() {
        "zero" => (vec![0.0; input.len()], "zero"),
        "mean" => {
            let mean = data
                .as_ref()
                .map(|d| d.column_means())
                .or_else(|| model.training_mean())
                .ok_or_else(|| CliError::Usage("a mean baseline needs --data or a model that stores its training data".into()))?;
            (mean, "mean")
        }
        text => (parse_vector(text, "--baseline")?, "explicit"),
    };
    if baseline.len() != input.len() {
        return Err(CliError::Usage(format!(
            "baseline has {} entries, input has {}",
            baseline.len(),
            input.len()
        )));
    }
    let q = quadrature(&args.quadrature)?;
    let req = ExplanationRequest::new(&model, &input, &baseline, args.order)
        .with_method(method(args.method))
        .with_quadrature(q)
        .with_baseline_kind(kind);
    let stack = explain_stack(&req, &EngineConfig::default()).map_err(|e| CliError::from(Error::from(e)))?;
    let names = model.feature_names().to_vec();
    let stack: Vec<AttributionTensor> = stack
        .into_iter()
        .map(|t| if names.len() == t.dim() { t.with_feature_names(names.clone()) } else { Ok(t) })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::from(Error::from(e)))?;
    for t in &stack {
        info!(
            "order {}: completeness defect {:.3e} (tolerance {:.3e})",
            t.order(),
            t.meta().diagnostics.completeness_defect,
            t.meta().tolerance
        );
    }
    write_output(args.out.as_deref(), &to_json(&stack))
}

fn load_stack(path: &Path) -> CliResult<Vec<AttributionTensor>> {
    let text = read_input(path)?;
    let stack: Vec<AttributionTensor> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if stack.is_empty() {
        return Err(CliError::Data(format!("{}: empty tensor stack", path.display())));
    }
    Ok(stack)
}

fn verify(args: VerifyArgs) -> CliResult {
    let stack = load_stack(&args.tensors)?;
    let report = verify_properties(&stack).map_err(|e| CliError::from(Error::from(e)))?;
    write_output(args.out.as_deref(), &to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Numerical(report.failures.join("; ")))
    }
}

fn find_order(stack: &[AttributionTensor], order: usize) -> Option<&AttributionTensor> {
    stack.iter().find(|t| t.order() == order)
}

fn export_graph(args: ExportArgs) -> CliResult {
    let stack = load_stack(&args.tensors)?;
    let (Some(first), Some(second)) = (find_order(&stack, 1), find_order(&stack, 2)) else {
        return Err(CliError::Data("the stack needs tensors of order 1 and 2".into()));
    };
    let text = match find_order(&stack, 3) {
        Some(third) => {
            let complex = build_simplicial(first, second, third, args.threshold).map_err(|e| CliError::from(Error::from(e)))?;
            match args.format {
                FormatArg::Json => complex.to_json() + "\n",
                FormatArg::Dot => complex.to_dot(),
            }
        }
        None => {
            let graph = build_graph(first, second, args.threshold).map_err(|e| CliError::from(Error::from(e)))?;
            match args.format {
                FormatArg::Json => graph.to_json() + "\n",
                FormatArg::Dot => to_dot(&graph),
            }
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn write_file(dir: &Path, name: &str, text: &str) -> CliResult {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn experiment(kind: ExperimentKind) -> CliResult {
    match kind {
        ExperimentKind::Synthetic {
            seed,
            samples,
            noise,
            true_model,
            quadrature: q,
            threshold,
            structure_threshold,
            out,
        } => {
            let cfg = SyntheticExperimentConfig {
                data: SyntheticConfig {
                    n_samples: samples,
                    noise_scale: noise,
                    seed,
                },
                model: if true_model { SyntheticModel::TruePolynomial } else { SyntheticModel::Gpr(GprOptions::default()) },
                quadrature: quadrature(&q)?,
                threshold,
                structure_threshold,
                ..SyntheticExperimentConfig::default()
            };
            let dir = output_dir(out)?;
            let report = run_synthetic_experiment(&cfg)?;
            write_file(&dir, "report.json", &to_json(&report))?;
            write_file(&dir, "graph.dot", &to_dot(&report.graph))?;
            write_file(&dir, "simplicial.dot", &report.simplicial.to_dot())?;
            println!(
                "edge F1 {:.3} at threshold {} ({:.3} at {}); triangles match: {}; verification {}",
                report.structure.f1,
                report.structure.threshold,
                report.display_structure.f1,
                report.display_structure.threshold,
                report.structure.triangles_match,
                if report.verification.passed { "passed" } else { "failed" }
            );
            if report.verification.passed {
                Ok(())
            } else {
                Err(CliError::Numerical(report.verification.failures.join("; ")))
            }
        }
        ExperimentKind::Realestate {
            data,
            houses,
            seed,
            order,
            method: m,
            quadrature: q,
            threshold,
            out,
        } => {
            let dataset = load_data(&data)?;
            let cfg = RealEstateConfig {
                houses,
                seed,
                quadrature: quadrature(&q)?,
                order,
                method: method(m),
                threshold,
                ..RealEstateConfig::default()
            };
            let dir = output_dir(out)?;
            let report = run_realestate_experiment(&dataset, &cfg)?;
            write_file(&dir, "report.json", &to_json(&report))?;
            for house in &report.houses {
                write_file(&dir, &format!("house_{}.dot", house.row), &house.dot)?;
            }
            let failed: Vec<String> = report
                .houses
                .iter()
                .filter(|h| !h.verification.passed)
                .map(|h| format!("row {}: {}", h.row, h.verification.failures.join("; ")))
                .collect();
            match report.mean_jaccard {
                Some(j) => println!("{} houses explained; mean edge Jaccard {j:.3}", report.houses.len()),
                None => println!("{} houses explained", report.houses.len()),
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Numerical(failed.join("; ")))
            }
        }
    }
}
