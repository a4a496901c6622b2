use std::fmt::Write as _;
use std::path::PathBuf;

use dtagn_core::appearance::AppearanceAugment;
use dtagn_core::crossval::{train_appearance, train_geometry, StreamSetup};
use dtagn_core::fsutil::write_atomic;
use dtagn_core::geometry::GeometryAugment;
use dtagn_core::netspec::{parse_arch, save_model};
use dtagn_core::nn::{accuracy, BuildOptions, EpochStats, Sample, TrainConfig};
use dtagn_core::report::pct;
use dtagn_core::{Error, Result};

use crate::args::{AugmentArgs, Hyper, TrainArgs};
use crate::data::{filter_fold, Prepared};

pub fn geometry_augment(a: &AugmentArgs) -> Result<GeometryAugment> {
    let [lo, hi] = a.rotation[..] else {
        return Err(Error::invalid(format!(
            "--rotation takes two values low,high; got {}",
            a.rotation.len()
        )));
    };
    Ok(GeometryAugment {
        enabled: !a.no_augment,
        noise_sigma: a.noise_sigma,
        rotation: (lo, hi),
        ..Default::default()
    })
}

pub fn appearance_augment(a: &AugmentArgs) -> AppearanceAugment {
    AppearanceAugment {
        enabled: !a.no_augment,
        angles_deg: a.angles.clone(),
    }
}

pub fn setup(arch: &str, frames: usize, dropout: &[dtagn_core::Real], h: &Hyper, epochs: usize, seed: u64) -> Result<StreamSetup> {
    let setup = StreamSetup {
        spec: parse_arch(arch, frames)?,
        build: BuildOptions {
            init_std: h.init_std,
            dropout: dropout.to_vec(),
            lcn_floor: h.lcn_floor,
        },
        train: TrainConfig {
            learning_rate: h.learning_rate,
            momentum: h.momentum,
            weight_decay: h.weight_decay,
            batch_size: h.batch_size,
            epochs,
            seed,
        },
    };
    setup.train.validate()?;
    Ok(setup)
}

pub fn log_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for e in history {
        writeln!(out, "{},{:.6},{:.6}", e.epoch, e.loss, e.accuracy).unwrap();
    }
    out
}

pub fn run(a: &TrainArgs) -> Result<()> {
    let prepared = Prepared::load(&a.cache)?;
    let seed = a.seed.seed;
    let setup = setup(&a.arch, prepared.frames(), &a.dropout, &a.hyper, a.hyper.epochs, seed)?;
    let have = prepared
        .input_shape()
        .ok_or_else(|| Error::invalid(format!("{} is empty", a.cache.display())))?;
    if setup.spec.input_shape() != have {
        return Err(Error::invalid(format!(
            "{} expects inputs {:?} but the {} cache holds {:?}",
            setup.spec,
            setup.spec.input_shape(),
            prepared.kind(),
            have
        )));
    }
    // Fails early on dropout/architecture mismatches.
    dtagn_core::nn::Network::zeros(&setup.spec, &setup.build)?;

    let (model, history, originals) = match &prepared {
        Prepared::Geometry(c) => {
            let seqs = filter_fold(c.sequences.clone(), |s| &s.subject, a.folds.folds, a.folds.fold, false)?;
            let (m, h) = train_geometry(&seqs, &setup, &geometry_augment(&a.augment)?, seed)?;
            (m, h, seqs.len())
        }
        Prepared::Appearance(c) => {
            let seqs = filter_fold(c.sequences.clone(), |s| &s.subject, a.folds.folds, a.folds.fold, false)?;
            let (m, h) = train_appearance(&seqs, &setup, &appearance_augment(&a.augment), seed)?;
            (m, h, seqs.len())
        }
    };

    let items = filter_fold(prepared.items()?, |i| &i.subject, a.folds.folds, a.folds.fold, false)?;
    let samples: Vec<Sample> = items
        .into_iter()
        .map(|i| Sample { input: i.input, label: i.label })
        .collect();
    let train_acc = accuracy(&model, &samples)?;

    save_model(&model, &a.out)?;
    let log = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.csv");
        PathBuf::from(p)
    });
    write_atomic(&log, log_csv(&history).as_bytes())?;
    let last = history.last().copied();
    println!(
        "trained {} on {originals} sequences for {} epochs: final loss {:.6}, training accuracy {}% (originals, inference)",
        model.spec(),
        history.len(),
        last.map_or(0.0, |e| e.loss),
        pct(train_acc)
    );
    println!("model: {}", a.out.display());
    println!("log: {}", log.display());
    Ok(())
}
