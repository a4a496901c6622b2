use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use dtagn_core::eval::{confusion_matrix, fuse, ConfusionMatrix, ScoreVector};
use dtagn_core::fsutil::write_atomic;
use dtagn_core::netspec::load_model;
use dtagn_core::nn::Network;
use dtagn_core::report::{confusion_csv, confusion_text, pct};
use dtagn_core::{Error, Result};

use crate::args::{EvalArgs, FuseArgs, ReportArgs};
use crate::data::{check_model, filter_fold, Item, Prepared};

fn scores(model: &Network, items: &[Item]) -> Result<Vec<ScoreVector>> {
    items
        .iter()
        .map(|i| ScoreVector::from_tensor(&model.predict(&i.input)?))
        .collect()
}

struct Column<'a> {
    /// Used in file names and CSV headers.
    key: &'static str,
    name: &'a str,
    scores: Vec<ScoreVector>,
}

fn emit(items: &[Item], columns: &[Column], classes: usize, report: &ReportArgs, title: &str) -> Result<()> {
    let truths: Vec<usize> = items.iter().map(|i| i.label).collect();
    let mut matrices: Vec<(&str, &str, ConfusionMatrix)> = Vec::new();
    for c in columns {
        let preds: Vec<usize> = c.scores.iter().map(ScoreVector::prediction).collect();
        matrices.push((c.key, c.name, confusion_matrix(&truths, &preds, classes)?));
    }

    let mut summary = format!("{title}, {} sequences\n\n", items.len());
    writeln!(summary, "{:<20} {:>12}", "Network", "Accuracy (%)").unwrap();
    for (_, name, m) in &matrices {
        writeln!(summary, "{name:<20} {:>12}", pct(m.accuracy())).unwrap();
    }
    for (_, name, m) in &matrices {
        write!(summary, "\nConfusion matrix, {name} (rows: truth, columns: prediction, %)\n").unwrap();
        summary.push_str(&confusion_text(m, &report.class_names));
    }
    print!("{summary}");

    if let Some(dir) = &report.out {
        let mut csv = String::from("sequence_id,subject_id,label");
        for c in columns {
            write!(csv, ",{}", c.key).unwrap();
        }
        csv.push('\n');
        for (k, item) in items.iter().enumerate() {
            write!(csv, "{},{},{}", item.id, item.subject, item.label).unwrap();
            for c in columns {
                write!(csv, ",{}", c.scores[k].prediction()).unwrap();
            }
            csv.push('\n');
        }
        write_atomic(&dir.join("predictions.csv"), csv.as_bytes())?;
        for (key, _, m) in &matrices {
            write_atomic(
                &dir.join(format!("confusion_{key}.csv")),
                confusion_csv(m, &report.class_names).as_bytes(),
            )?;
        }
        write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    }
    Ok(())
}

fn scope(fold: Option<usize>) -> String {
    fold.map_or_else(|| "all sequences".to_string(), |f| format!("test fold {f}"))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let prepared = Prepared::load(&a.cache)?;
    let items = filter_fold(prepared.items()?, |i| &i.subject, a.folds.folds, a.folds.fold, true)?;
    check_model(&model, &items, "eval")?;
    let (key, name) = if model.input_shape().len() == 1 { ("geometry", "DTGN") } else { ("appearance", "DTAN") };
    let columns = [Column { key, name, scores: scores(&model, &items)? }];
    let title = format!("Evaluation of {} on {}", model.spec(), scope(a.folds.fold));
    emit(&items, &columns, model.classes(), &a.report, &title)
}

fn load_pair(model: &Path, cache: &Path, what: &str) -> Result<(Network, Vec<Item>)> {
    let model = load_model(model)?;
    let items = Prepared::load(cache)?.items()?;
    check_model(&model, &items, what)?;
    Ok((model, items))
}

pub fn fuse_cmd(a: &FuseArgs) -> Result<()> {
    let (app_model, app_items) = load_pair(&a.appearance_model, &a.appearance_cache, "appearance")?;
    let (geo_model, geo_items) = load_pair(&a.geometry_model, &a.geometry_cache, "geometry")?;
    if app_model.classes() != geo_model.classes() {
        return Err(Error::invalid(format!(
            "appearance model has {} classes, geometry model {}",
            app_model.classes(),
            geo_model.classes()
        )));
    }
    let mut geo_by_id: HashMap<String, Item> = geo_items.into_iter().map(|i| (i.id.clone(), i)).collect();
    let mut pairs = Vec::with_capacity(app_items.len());
    for app in app_items {
        let geo = geo_by_id
            .remove(&app.id)
            .ok_or_else(|| Error::invalid(format!("sequence {} has images but no landmarks", app.id)))?;
        if geo.subject != app.subject || geo.label != app.label {
            return Err(Error::invalid(format!(
                "sequence {} disagrees on subject or label between caches",
                app.id
            )));
        }
        pairs.push((app, geo));
    }
    if let Some(id) = geo_by_id.keys().min() {
        return Err(Error::invalid(format!("sequence {id} has landmarks but no images")));
    }
    let pairs = filter_fold(pairs, |p| &p.0.subject, a.folds.folds, a.folds.fold, true)?;
    let (app_items, geo_items): (Vec<Item>, Vec<Item>) = pairs.into_iter().unzip();

    let p = scores(&app_model, &app_items)?;
    let q = scores(&geo_model, &geo_items)?;
    let fused = p
        .iter()
        .zip(&q)
        .map(|(p, q)| fuse(p, q, a.alpha))
        .collect::<Result<Vec<_>>>()?;
    let fused_name = format!("DTAGN (alpha={})", a.alpha);
    let columns = [
        Column { key: "appearance", name: "DTAN", scores: p },
        Column { key: "geometry", name: "DTGN", scores: q },
        Column { key: "fused", name: &fused_name, scores: fused },
    ];
    let title = format!("Fusion on {}", scope(a.folds.fold));
    emit(&app_items, &columns, app_model.classes(), &a.report, &title)
}
