//! Command implementations behind the binary: training, evaluation,
//! error sweeps and plot-ready CSV export.
//!
//! CSV schemas:
//! - training metrics: `epoch,gamma,train_loss,train_acc,val_acc`
//! - correcting metrics: `epoch,train_loss,train_acc,val_acc`
//! - confusion matrix: ten count rows then `accuracy,<value>`
//! - sweep: `value,accuracy,accuracy_retrained` (last column empty
//!   without `--retrain-correcting`)
//! - field export: per-plane intensity grids (ny rows of nx values),
//!   `plane_power.csv` (`plane,total_power`), `detectors.csv`
//!   (`index,cx,cy,side`) and `x.csv` (`detector,power`)

use std::fs;
use std::path::{Path, PathBuf};

use crate::correcting::train_correcting_on_features;
use crate::dataio::config::{parse_angle, RunConfig};
use crate::dataio::idx::{load_split_dir, Dataset, Split};
use crate::dataio::netfile::{load_network, save_network};
use crate::error::{DonnError, Result};
use crate::eval::evaluate;
use crate::network::{DiffractiveNetwork, ErrorSpec, NeuronGeometry};
use crate::training::{train_optical_with, EpochMetrics};

pub const METRICS_HEADER: &str = "epoch,gamma,train_loss,train_acc,val_acc";
pub const CORRECTING_METRICS_HEADER: &str = "epoch,train_loss,train_acc,val_acc";
pub const SWEEP_HEADER: &str = "value,accuracy,accuracy_retrained";

/// Parameter axis of an error sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Uniform shift of every gap, um.
    Axial,
    /// Replacement phase-shift difference, radians.
    Theta,
    /// Replacement transmittance ratio.
    KRatio,
    /// Neuron thickness mapped through the slab phase model, um.
    Geometry,
    /// Layer spacing, trained from scratch per point, um.
    Distance,
    /// Layer count, trained from scratch per point.
    Layers,
}

impl SweepKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "axial" => Self::Axial,
            "theta" => Self::Theta,
            "kratio" => Self::KRatio,
            "geometry" => Self::Geometry,
            "distance" => Self::Distance,
            "layers" => Self::Layers,
            _ => {
                return Err(DonnError::InvalidParameter(format!(
                    "unknown sweep kind {s}; expected axial|theta|kratio|geometry|distance|layers"
                )))
            }
        })
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn metrics_row(m: &EpochMetrics) -> String {
    format!(
        "{},{},{},{},{}",
        m.epoch, m.gamma, m.train_loss, m.train_acc, m.val_acc
    )
}

/// Train the optical section, write `checkpoint.rodn` (binarized),
/// `checkpoint_real.rodn` (the selected epoch's real-valued phases, for
/// fine-tuning), `metrics.csv` and the effective `config.cfg`. Returns
/// the binarized validation accuracy. With `init_checkpoint`, training
/// warm-starts from that checkpoint's phases instead of a random draw.
pub fn cmd_train_optical(
    cfg: &RunConfig,
    dataset_dir: &Path,
    out: &Path,
    init_checkpoint: Option<&Path>,
) -> Result<f64> {
    ensure_out_dir(out)?;
    let mut data = load_split_dir(dataset_dir, Split::Train)?;
    if cfg.train_take > 0 {
        data = data.take(cfg.train_take);
    }
    let mut net = cfg.build_network()?;
    let mut opts = cfg.train_options();
    if let Some(init) = init_checkpoint {
        let (start, _) = load_network(init)?;
        if start.grid() != net.grid() || start.layers.len() != net.layers.len() {
            return Err(DonnError::InvalidParameter(format!(
                "init checkpoint {} does not match the configured architecture",
                init.display()
            )));
        }
        for (dst, src) in net.layers.iter_mut().zip(&start.layers) {
            dst.phases.assign(&src.phases);
        }
        opts.warm_start = true;
    }
    let encoding = cfg.encoding();
    let schedule = cfg.schedule();

    let mut rows = vec![METRICS_HEADER.to_string()];
    let ckpt_path = out.join("checkpoint.rodn");
    // Both modes run the schedule; in STE mode the data term is evaluated
    // at the binarized point while the penalty anchors the latent phases.
    let result = train_optical_with(
        &net,
        &data,
        &encoding,
        &schedule,
        &opts,
        &mut |m, binarized_net| {
            println!(
                "epoch {:>4}  gamma {:+.5}  loss {:.4}  train {:.4}  val {:.4}  bin_val {:.4}",
                m.epoch, m.gamma, m.train_loss, m.train_acc, m.val_acc, m.binarized_val_acc
            );
            rows.push(metrics_row(m));
            // Rolling checkpoint so long runs can be inspected early.
            save_network(binarized_net, None, &ckpt_path)
        },
    )?;

    save_network(&result.net, None, &ckpt_path)?;
    save_network(&result.real_net, None, &out.join("checkpoint_real.rodn"))?;
    fs::write(out.join("metrics.csv"), rows.join("\n") + "\n")?;
    fs::write(out.join("config.cfg"), cfg.to_text())?;
    println!(
        "trained: selected epoch {} with val acc {:.4} before binarization, {:.4} after; checkpoint at {}",
        result.selected_epoch,
        result.pre_binarize_val_acc,
        result.binarized_val_acc,
        ckpt_path.display()
    );
    Ok(result.binarized_val_acc)
}

/// Train the correcting layer against a binarized checkpoint; writes the
/// updated checkpoint and `correcting_metrics.csv`.
pub fn cmd_train_correcting(
    cfg: &RunConfig,
    checkpoint: &Path,
    dataset_dir: &Path,
    out: &Path,
) -> Result<f64> {
    ensure_out_dir(out)?;
    let (net, _) = load_network(checkpoint)?;
    if !net.binarized {
        return Err(DonnError::InvalidParameter(
            "checkpoint is not binarized; train the optical section first".into(),
        ));
    }
    let mut data = load_split_dir(dataset_dir, Split::Train)?;
    if cfg.train_take > 0 {
        data = data.take(cfg.train_take);
    }
    let features = crate::correcting::detector_features(&net, &data, &cfg.encoding())?;
    let (layer, metrics) =
        train_correcting_on_features(&features, &data.labels, &cfg.correcting_options())?;

    let mut rows = vec![CORRECTING_METRICS_HEADER.to_string()];
    for m in &metrics {
        rows.push(format!(
            "{},{},{},{}",
            m.epoch, m.train_loss, m.train_acc, m.val_acc
        ));
    }
    fs::write(out.join("correcting_metrics.csv"), rows.join("\n") + "\n")?;
    let ckpt_path = out.join("checkpoint.rodn");
    save_network(&net, Some(&layer), &ckpt_path)?;
    let best = metrics.iter().map(|m| m.val_acc).fold(f64::NAN, f64::max);
    println!(
        "correcting layer trained: best val acc {best:.4}; checkpoint at {}",
        ckpt_path.display()
    );
    Ok(best)
}

/// Evaluate a checkpoint over a dataset split; writes the confusion
/// matrix CSV and returns the accuracy.
pub fn cmd_eval(
    cfg: &RunConfig,
    checkpoint: &Path,
    dataset_dir: &Path,
    split: Split,
    use_correcting: bool,
    out: &Path,
) -> Result<f64> {
    ensure_out_dir(out)?;
    let (net, correcting) = load_network(checkpoint)?;
    let correcting = if use_correcting {
        Some(correcting.ok_or_else(|| {
            DonnError::InvalidParameter("checkpoint has no correcting layer".into())
        })?)
    } else {
        None
    };
    let data = load_split_dir(dataset_dir, split)?;
    let (acc, matrix) = evaluate(&net, correcting.as_ref(), &data, &cfg.encoding())?;
    let name = if use_correcting {
        "confusion_corrected.csv"
    } else {
        "confusion.csv"
    };
    fs::write(out.join(name), matrix.to_csv())?;
    println!("accuracy {acc:.4} over {} samples", data.len());
    Ok(acc)
}

fn parse_grid_values(kind: SweepKind, grid: &str) -> Result<Vec<f64>> {
    grid.split(',')
        .map(|tok| {
            let tok = tok.trim();
            match kind {
                SweepKind::Theta => parse_angle(tok),
                _ => tok.parse::<f64>().map_err(|_| {
                    DonnError::InvalidParameter(format!("bad sweep value: {tok}"))
                }),
            }
        })
        .collect()
}

fn error_spec_for(kind: SweepKind, value: f64, net: &DiffractiveNetwork) -> Result<ErrorSpec> {
    Ok(match kind {
        SweepKind::Axial => ErrorSpec::AxialShift(vec![value; net.distances.len()]),
        SweepKind::Theta => ErrorSpec::PhaseDifference(value),
        SweepKind::KRatio => ErrorSpec::TransmittanceRatio(value),
        SweepKind::Geometry => ErrorSpec::Geometry(NeuronGeometry {
            thickness: value,
            wavelength: net.grid().wavelength,
            ..NeuronGeometry::default()
        }),
        SweepKind::Distance | SweepKind::Layers => {
            return Err(DonnError::InvalidParameter(
                "distance/layers sweeps retrain from scratch".into(),
            ))
        }
    })
}

/// Retrain the correcting layer on a perturbed-but-frozen network using a
/// bounded subset of the training data, then evaluate on the test set.
fn retrained_accuracy(
    cfg: &RunConfig,
    net: &DiffractiveNetwork,
    train: &Dataset,
    test: &Dataset,
) -> Result<f64> {
    let subset = train.take(cfg.sweep_retrain_samples);
    let features = crate::correcting::detector_features(net, &subset, &cfg.encoding())?;
    let mut opts = cfg.correcting_options();
    opts.epochs = cfg.sweep_retrain_epochs;
    opts.val_count = opts.val_count.min(subset.len() / 5);
    let (layer, _) = train_correcting_on_features(&features, &subset.labels, &opts)?;
    let (acc, _) = evaluate(net, Some(&layer), test, &cfg.encoding())?;
    Ok(acc)
}

/// Sweep one error axis over a value grid; writes `sweep_<kind>.csv` with
/// one row per grid point in grid order.
pub fn cmd_sweep(
    cfg: &RunConfig,
    checkpoint: &Path,
    kind: SweepKind,
    grid: &str,
    retrain_correcting: bool,
    dataset_dir: &Path,
    out: &Path,
) -> Result<PathBuf> {
    ensure_out_dir(out)?;
    let values = parse_grid_values(kind, grid)?;
    if values.is_empty() {
        return Err(DonnError::InvalidParameter("empty sweep grid".into()));
    }
    let test = load_split_dir(dataset_dir, Split::Test)?;
    let need_train = retrain_correcting || matches!(kind, SweepKind::Distance | SweepKind::Layers);
    let train = if need_train {
        Some(load_split_dir(dataset_dir, Split::Train)?)
    } else {
        None
    };

    let mut rows = vec![SWEEP_HEADER.to_string()];
    match kind {
        SweepKind::Distance | SweepKind::Layers => {
            // Fig-11 style study: a fresh network per grid point.
            let train = train.as_ref().expect("train split loaded");
            for &v in &values {
                let mut point_cfg = cfg.clone();
                match kind {
                    SweepKind::Distance => {
                        point_cfg.distances_um = vec![v; point_cfg.layer_count + 1]
                    }
                    SweepKind::Layers => {
                        let layers = v as usize;
                        if layers == 0 || (v - layers as f64).abs() > 1e-9 {
                            return Err(DonnError::InvalidParameter(format!(
                                "layer count must be a positive integer, got {v}"
                            )));
                        }
                        point_cfg.layer_count = layers;
                        point_cfg.distances_um = vec![point_cfg.distances_um[0]; layers + 1];
                    }
                    _ => unreachable!(),
                }
                let net = point_cfg.build_network()?;
                let result = crate::training::train_optical(
                    &net,
                    train,
                    &point_cfg.encoding(),
                    &point_cfg.schedule(),
                    &point_cfg.train_options(),
                )?;
                let (acc, _) = evaluate(&result.net, None, &test, &point_cfg.encoding())?;
                let retrained = if retrain_correcting {
                    retrained_accuracy(&point_cfg, &result.net, train, &test)?.to_string()
                } else {
                    String::new()
                };
                println!("{kind:?} {v}: accuracy {acc:.4} {retrained}");
                rows.push(format!("{v},{acc},{retrained}"));
            }
        }
        _ => {
            let (net, correcting) = load_network(checkpoint)?;
            for &v in &values {
                let perturbed = net.inject_error(&error_spec_for(kind, v, &net)?)?;
                let (acc, _) = evaluate(&perturbed, correcting.as_ref(), &test, &cfg.encoding())?;
                let retrained = if retrain_correcting {
                    retrained_accuracy(cfg, &perturbed, train.as_ref().expect("loaded"), &test)?
                        .to_string()
                } else {
                    String::new()
                };
                println!("{kind:?} {v}: accuracy {acc:.4} {retrained}");
                rows.push(format!("{v},{acc},{retrained}"));
            }
        }
    }

    let name = format!("sweep_{}.csv", format!("{kind:?}").to_lowercase());
    let path = out.join(name);
    fs::write(&path, rows.join("\n") + "\n")?;
    Ok(path)
}

fn intensity_csv(field: &crate::field::WaveField) -> String {
    let mut s = String::new();
    for row in field.samples().rows() {
        let cells: Vec<String> = row.iter().map(|c| c.norm_sqr().to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Export per-plane intensity grids for one dataset sample, plus the
/// detector overlay and the detector power vector.
pub fn cmd_export_field(
    cfg: &RunConfig,
    checkpoint: &Path,
    dataset_dir: &Path,
    split: Split,
    index: usize,
    out: &Path,
) -> Result<()> {
    ensure_out_dir(out)?;
    let (net, _) = load_network(checkpoint)?;
    let data = load_split_dir(dataset_dir, split)?;
    if index >= data.len() {
        return Err(DonnError::InvalidParameter(format!(
            "sample index {index} out of range (dataset has {})",
            data.len()
        )));
    }
    let input = crate::dataio::encode::encode_image(
        &data.images[index],
        &cfg.encoding(),
        *net.grid(),
    )?;
    let trace = net.forward_trace(&input)?;

    let mut planes: Vec<(String, crate::field::WaveField)> =
        vec![("input".to_string(), input.clone())];
    for (l, arriving) in trace.arriving.iter().enumerate() {
        let after = crate::network::apply_layer(arriving, &net.layers[l])?;
        planes.push((format!("after_layer_{}", l + 1), after));
    }
    planes.push(("detector".to_string(), trace.detector_field.clone()));

    let mut power_rows = vec!["plane,total_power".to_string()];
    for (name, field) in &planes {
        fs::write(out.join(format!("intensity_{name}.csv")), intensity_csv(field))?;
        power_rows.push(format!("{name},{}", field.total_power()));
    }
    fs::write(out.join("plane_power.csv"), power_rows.join("\n") + "\n")?;

    let mut det_rows = vec!["index,cx,cy,side".to_string()];
    for (i, r) in net.detectors.regions.iter().enumerate() {
        det_rows.push(format!("{i},{},{},{}", r.cx, r.cy, r.side));
    }
    fs::write(out.join("detectors.csv"), det_rows.join("\n") + "\n")?;

    let mut x_rows = vec!["detector,power".to_string()];
    for (i, xi) in trace.x.iter().enumerate() {
        x_rows.push(format!("{i},{xi}"));
    }
    fs::write(out.join("x.csv"), x_rows.join("\n") + "\n")?;

    println!(
        "sample {index} (label {}): classified {}",
        data.labels[index],
        crate::network::classify(&trace.x)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_kind_parsing() {
        assert_eq!(SweepKind::parse("axial").unwrap(), SweepKind::Axial);
        assert_eq!(SweepKind::parse("kratio").unwrap(), SweepKind::KRatio);
        assert!(SweepKind::parse("bogus").is_err());
    }

    #[test]
    fn grid_value_parsing_with_angles() {
        let vals = parse_grid_values(SweepKind::Theta, "0.8pi, pi,1.2pi").unwrap();
        assert!((vals[0] - 0.8 * std::f64::consts::PI).abs() < 1e-12);
        assert!((vals[1] - std::f64::consts::PI).abs() < 1e-12);
        let plain = parse_grid_values(SweepKind::KRatio, "0.8,1.0,1.2").unwrap();
        assert_eq!(plain, vec![0.8, 1.0, 1.2]);
        assert!(parse_grid_values(SweepKind::Axial, "a,b").is_err());
    }
}
