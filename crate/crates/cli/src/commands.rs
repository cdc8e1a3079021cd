use std::path::{Path, PathBuf};

use log::info;
use planar_core::datagen::{build_dataset, materialize, network_view, Dataset, DatasetSpec, EvalSample};
use planar_core::error::{Error, Result};
use planar_core::experiments::repro::{self, Corpora, TransferFamily};
use planar_core::experiments::{
    connection_count, evaluate_chained, run_on, sweep, transfer_matrix, write_sweep_csv,
    ChainedErrors, SweepAxis, SweepValue, TransferMatrix,
};
use planar_core::render::{emit_curves, render_panel, render_structure};
use planar_core::synth::{write_corpus, CorpusKind};
use planar_core::{GrayImage, Picture, PlanarNetwork, TrainReport};
use serde::Serialize;

use crate::config::{config_error, RunConfig};
use crate::{Cli, Command, Family};

/// Images per synthesised corpus.
const CORPUS_SIZE: usize = 300;

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    config.validate()?;
    let out = config.output.dir.clone();
    create_dir(&out)?;
    match cli.command {
        Command::Gen => gen(&config, &out),
        Command::Train => train(&config, &out),
        Command::Eval { checkpoint } => eval(&config, &out, &checkpoint),
        Command::Sweep { axis, values } => run_sweep(&mut config, &out, axis, values),
        Command::Transfer {
            family,
            drawings,
            photos,
        } => transfer(&config, &out, family, drawings, photos),
        Command::Render { checkpoint, image } => {
            render(&config, &out, &checkpoint, &image, cli.config.is_some())
        }
        Command::Repro {
            target,
            seeds,
            drawings,
            photos,
        } => run_repro(&config, &out, &target, seeds, cli.seed, drawings, photos),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn save_config(config: &RunConfig, out: &Path) -> Result<()> {
    write_text(&out.join("config.toml"), &config.to_toml()?)
}

fn save_summary<T: Serialize>(summary: &T, out: &Path) -> Result<()> {
    let text =
        toml::to_string_pretty(summary).map_err(|e| Error::Data(format!("encoding summary: {e}")))?;
    write_text(&out.join("summary.toml"), &text)
}

fn print_errors(label: &str, e: &ChainedErrors) {
    println!("{label}: 1X {:.4}  2X {:.4}  5X {:.4}", e.e1, e.e2, e.e5);
}

fn gen(config: &RunConfig, out: &Path) -> Result<()> {
    save_config(config, out)?;
    let data = build_dataset(&config.dataset)?;
    materialize(&data, &config.dataset, out)?;
    println!(
        "wrote {} training pairs and {} test samples to {}",
        data.train.len(),
        data.test.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    dataset_hash: String,
    connections: usize,
    batches: usize,
    final_train_error: f64,
    final_1x: f64,
    final_2x: Option<f64>,
    final_5x: Option<f64>,
}

fn train(config: &RunConfig, out: &Path) -> Result<()> {
    save_config(config, out)?;
    let spec = config.run_spec();
    let data = build_dataset(&spec.dataset)?;
    info!(
        "training on {} pairs, evaluating on {}",
        data.train.len(),
        data.test.len()
    );
    let outcome = run_on(&spec, &data)?;
    let (net, report) = (&outcome.network, &outcome.report);
    let summary = TrainSummary {
        seed: spec.training.seed,
        dataset_hash: spec.dataset.content_hash()?,
        connections: connection_count(net),
        batches: report.batch_train_error.len(),
        final_train_error: report.final_train_error(),
        final_1x: report.final_1x,
        final_2x: report.final_errors.map(|e| e.e2),
        final_5x: report.final_errors.map(|e| e.e5),
    };
    save_summary(&summary, out)?;
    if config.output.checkpoint {
        net.save(&out.join("checkpoint.json"))?;
    }
    if config.output.report {
        report.save_csv(&out.join("report.csv"))?;
        emit_curves(out, "curves", std::slice::from_ref(report), &[spec.dataset.transform.name()])?;
    }
    write_visuals(config, out, net, &data.test)?;
    match report.final_errors {
        Some(e) => print_errors("test error", &e),
        None => println!("test error: 1X {:.4}", report.final_1x),
    }
    Ok(())
}

fn write_visuals(config: &RunConfig, out: &Path, net: &PlanarNetwork, test: &[EvalSample]) -> Result<()> {
    if config.output.structure {
        let svg = render_structure(&net.export_structure(), &config.render)?;
        write_text(&out.join("structure.svg"), &svg)?;
    }
    if config.output.panels {
        for (k, sample) in test.iter().take(config.output.panel_samples).enumerate() {
            let mut pictures = vec![sample.input.clone()];
            let mut labels = vec!["input".to_string()];
            for (j, target) in &sample.targets {
                pictures.push(net.forward_chain(&sample.input, *j)?);
                labels.push(format!("{j}X out"));
                pictures.push(target.clone());
                labels.push(format!("{j}X true"));
            }
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            render_panel(&pictures, &labels, &config.panel)?
                .save_png(&out.join(format!("panel_{k:02}.png")))?;
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<PlanarNetwork> {
    if !path.is_file() {
        return Err(Error::Data(format!("checkpoint {} not found", path.display())));
    }
    PlanarNetwork::load(path)
}

fn check_topology(net: &PlanarNetwork, spec: &DatasetSpec) -> Result<()> {
    if net.topology().spec() != spec.topology {
        return Err(config_error(
            "topology",
            format!(
                "checkpoint network is {:?} but the config asks for {:?}",
                net.topology().spec(),
                spec.topology
            ),
        ));
    }
    Ok(())
}

fn eval(config: &RunConfig, out: &Path, checkpoint: &Path) -> Result<()> {
    let net = load_checkpoint(checkpoint)?;
    check_topology(&net, &config.dataset)?;
    save_config(config, out)?;
    let data = build_dataset(&config.dataset)?;
    let mut csv = String::from("chain,error\n");
    let chained = data
        .test
        .iter()
        .all(|s| s.target(2).is_some() && s.target(5).is_some());
    if chained {
        let e = evaluate_chained(&net, &data.test)?;
        for j in [1, 2, 5] {
            csv.push_str(&format!("{j},{}\n", e.at(j).unwrap_or(f64::NAN)));
        }
        print_errors("test error", &e);
    } else {
        let e1 = planar_core::experiments::evaluate_chain_length(&net, &data.test, 1)?;
        csv.push_str(&format!("1,{e1}\n"));
        println!("test error: 1X {e1:.4}");
    }
    write_text(&out.join("eval.csv"), &csv)
}

fn run_sweep(config: &mut RunConfig, out: &Path, axis: Option<String>, values: Vec<String>) -> Result<()> {
    let from_config = config.sweep.clone();
    let axis = axis
        .or_else(|| from_config.as_ref().map(|s| s.axis.clone()))
        .ok_or_else(|| config_error("sweep.axis", "give --axis or a [sweep] section"))?;
    let values = if values.is_empty() {
        from_config.map(|s| s.values).unwrap_or_default()
    } else {
        values
    };
    config.sweep = Some(crate::config::SweepConfig {
        axis: axis.clone(),
        values: values.clone(),
    });
    save_config(config, out)?;
    let axis: SweepAxis = axis.parse()?;
    let values = values
        .iter()
        .map(|v| v.parse::<SweepValue>())
        .collect::<Result<Vec<_>>>()?;
    let spec = config.run_spec();
    let rows = sweep(&spec, axis, &values)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, axis, spec.training.seed, &mut buf)?;
    write_text(&out.join("sweep.csv"), &String::from_utf8_lossy(&buf))?;
    let labels: Vec<String> = rows.iter().map(|r| format!("{axis}={}", r.value)).collect();
    let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
    let reports: Vec<TrainReport> = rows.iter().map(|r| r.report.clone()).collect();
    emit_curves(out, "curves", &reports, &labels)?;
    for r in &rows {
        print_errors(&format!("{axis}={}", r.value), &r.errors);
    }
    Ok(())
}

fn corpora(out: &Path, drawings: Option<PathBuf>, photos: Option<PathBuf>, seed: u64) -> Result<Corpora> {
    let make = |given: Option<PathBuf>, name: &str, kind: CorpusKind, salt: u64| -> Result<PathBuf> {
        if let Some(dir) = given {
            return Ok(dir);
        }
        let dir = out.join("corpora").join(name);
        if !dir.is_dir() {
            info!("synthesising {CORPUS_SIZE} {name} into {}", dir.display());
            write_corpus(&dir, kind, CORPUS_SIZE, seed.wrapping_add(salt))?;
        }
        Ok(dir)
    };
    Ok(Corpora {
        drawings: make(drawings, "drawings", CorpusKind::Drawings, 1)?,
        photos: make(photos, "photos", CorpusKind::Photos, 2)?,
    })
}

fn print_matrix(m: &TransferMatrix) {
    let width = m.labels.iter().map(|l| l.len()).max().unwrap_or(0);
    println!("1X error, rows trained, columns evaluated");
    print!("{:width$}", "");
    for l in &m.labels {
        print!("  {l:>w$}", w = l.len().max(6));
    }
    println!("  {:>8}", "mean");
    for (i, label) in m.labels.iter().enumerate() {
        print!("{label:width$}");
        for (j, l) in m.labels.iter().enumerate() {
            print!("  {:>w$.4}", m.cell(i, j).e1, w = l.len().max(6));
        }
        println!("  {:>8.4}", m.row_mean(i));
    }
}

fn transfer(
    config: &RunConfig,
    out: &Path,
    family: Option<Family>,
    drawings: Option<PathBuf>,
    photos: Option<PathBuf>,
) -> Result<()> {
    save_config(config, out)?;
    let datasets: Vec<(String, DatasetSpec)> = match (family, &config.transfer) {
        (Some(f), _) => {
            let family = match f {
                Family::Grayscale => TransferFamily::Grayscale,
                Family::BlackWhite => TransferFamily::BlackWhite,
                Family::Mixed => TransferFamily::Mixed,
            };
            let c = match family {
                TransferFamily::Mixed => None,
                _ => Some(corpora(out, drawings, photos, config.dataset.seed)?),
            };
            family
                .datasets(c.as_ref(), config.dataset.seed)?
                .into_iter()
                .map(|(label, d)| {
                    let d = DatasetSpec {
                        source: d.source,
                        bw: d.bw,
                        ..config.dataset.clone()
                    };
                    (label, d)
                })
                .collect()
        }
        (None, Some(t)) => t
            .datasets
            .iter()
            .map(|e| {
                let d = DatasetSpec {
                    source: e.source.clone(),
                    bw: e.bw,
                    ..config.dataset.clone()
                };
                (e.label.clone(), d)
            })
            .collect(),
        (None, None) => {
            return Err(config_error(
                "transfer.datasets",
                "give --family or a [transfer] dataset list",
            ))
        }
    };
    let matrix = transfer_matrix(&datasets, &config.training)?;
    matrix.save_csv(&out.join("transfer.csv"))?;
    print_matrix(&matrix);
    Ok(())
}

fn render(config: &RunConfig, out: &Path, checkpoint: &Path, images: &[PathBuf], with_data: bool) -> Result<()> {
    let net = load_checkpoint(checkpoint)?;
    let svg = render_structure(&net.export_structure(), &config.render)?;
    write_text(&out.join("structure.svg"), &svg)?;
    let spec = net.topology().spec();
    if with_data {
        check_topology(&net, &config.dataset)?;
        let data: Dataset = build_dataset(&config.dataset)?;
        let config = RunConfig {
            output: crate::config::OutputConfig {
                structure: false,
                ..config.output.clone()
            },
            ..config.clone()
        };
        write_visuals(&config, out, &net, &data.test)?;
    }
    for (k, path) in images.iter().enumerate() {
        let img = GrayImage::load(path)?;
        let input = network_view(&img, &spec)?;
        let mut pictures: Vec<Picture> = vec![input.clone()];
        for j in [1, 2, 5] {
            pictures.push(net.forward_chain(&input, j)?);
        }
        render_panel(&pictures, &["input", "1X", "2X", "5X"], &config.panel)?
            .save_png(&out.join(format!("image_{k:02}.png")))?;
    }
    println!("wrote renderings to {}", out.display());
    Ok(())
}

fn run_repro(
    config: &RunConfig,
    out: &Path,
    target: &str,
    count: usize,
    seed: Option<u64>,
    drawings: Option<PathBuf>,
    photos: Option<PathBuf>,
) -> Result<()> {
    if count == 0 {
        return Err(config_error("seeds", "need at least one seed"));
    }
    let first = seed.unwrap_or(0);
    let seeds: Vec<u64> = (first..first + count as u64).collect();
    save_config(config, out)?;
    let family = match target {
        "transfer_grayscale" => Some(TransferFamily::Grayscale),
        "transfer_bw" => Some(TransferFamily::BlackWhite),
        "transfer_mixed" => Some(TransferFamily::Mixed),
        _ => None,
    };
    match family {
        Some(family) => {
            let c = match family {
                TransferFamily::Mixed => None,
                _ => Some(corpora(out, drawings, photos, first)?),
            };
            let study = repro::transfer_study(family, c.as_ref(), &seeds)?;
            study.median.save_csv(&out.join(format!("{target}.csv")))?;
            print_matrix(&study.median);
        }
        None => {
            let table = repro::by_name(target, &seeds)?;
            table.save_csv(&out.join(format!("{target}.csv")))?;
            table.write_csv(std::io::stdout())?;
        }
    }
    Ok(())
}
