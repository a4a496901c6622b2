use dtagn_core::crossval::{run_crossval, CrossvalConfig, CrossvalData, StreamKind, StreamSetup};
use dtagn_core::fsutil::write_atomic;
use dtagn_core::netspec::write_model;
use dtagn_core::report::{summary_text, write_reports};
use dtagn_core::{Error, Result};

use crate::args::CrossvalArgs;
use crate::data::Prepared;
use crate::train::{appearance_augment, geometry_augment, log_csv, setup};

fn arch<'a>(arch: &'a Option<String>, flag: &str) -> Result<&'a str> {
    arch.as_deref()
        .ok_or_else(|| Error::invalid(format!("{flag} is required with its cache")))
}

pub fn run(a: &CrossvalArgs) -> Result<()> {
    let seed = a.seed.seed;
    let geometry = a.geometry_cache.as_deref().map(Prepared::geometry).transpose()?;
    let appearance = a.appearance_cache.as_deref().map(Prepared::appearance).transpose()?;
    if geometry.is_none() && appearance.is_none() {
        return Err(Error::invalid("give --geometry-cache, --appearance-cache or both"));
    }

    let geometry_setup: Option<StreamSetup> = match &geometry {
        Some(_) => Some(setup(
            arch(&a.geometry_arch, "--geometry-arch")?,
            1,
            &a.geometry_dropout,
            &a.hyper,
            a.geometry_epochs.unwrap_or(a.hyper.epochs),
            seed,
        )?),
        None => None,
    };
    let appearance_setup: Option<StreamSetup> = match &appearance {
        Some(c) => Some(setup(
            arch(&a.appearance_arch, "--appearance-arch")?,
            c.sequences.first().map_or(1, |s| s.len()),
            &a.appearance_dropout,
            &a.hyper,
            a.appearance_epochs.unwrap_or(a.hyper.epochs),
            seed,
        )?),
        None => None,
    };
    for (cache, what) in [(geometry.as_ref().map(|c| c.sequences.len()), "landmark"), (appearance.as_ref().map(|c| c.sequences.len()), "image")] {
        if cache == Some(0) {
            return Err(Error::invalid(format!("the {what} cache is empty")));
        }
    }

    let data = CrossvalData {
        geometry: geometry.as_ref().zip(geometry_setup.as_ref()).map(|(c, s)| (c.sequences.as_slice(), s)),
        appearance: appearance.as_ref().zip(appearance_setup.as_ref()).map(|(c, s)| (c.sequences.as_slice(), s)),
    };
    let config = CrossvalConfig {
        folds: a.folds,
        alpha: a.alpha,
        seed,
        workers: a.workers,
        geometry_augment: geometry_augment(&a.augment)?,
        appearance_augment: appearance_augment(&a.augment),
    };
    let report = run_crossval(data, &config)?;

    // Everything is computed before the first file is written.
    for fold in &report.folds {
        let k = fold.fold;
        for (model, history, name) in [
            (&fold.geometry_model, &fold.geometry_history, StreamKind::Geometry.name()),
            (&fold.appearance_model, &fold.appearance_history, StreamKind::Appearance.name()),
        ] {
            if let Some(m) = model {
                write_atomic(&a.out.join(format!("fold{k}_{name}.dtag")), &write_model(m))?;
                write_atomic(&a.out.join(format!("fold{k}_{name}_log.csv")), log_csv(history).as_bytes())?;
            }
        }
    }
    write_reports(&a.out, &report, &a.class_names)?;
    print!("{}", summary_text(&report, &a.class_names));
    println!("\nreports and models: {}", a.out.display());
    Ok(())
}
