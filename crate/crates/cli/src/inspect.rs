use std::fmt::Write as _;

use dtagn_core::fsutil::write_atomic;
use dtagn_core::geometry::build_geometry_trainset;
use dtagn_core::appearance::build_appearance_trainset;
use dtagn_core::introspect::{
    export_activations, export_feature_maps, export_filters, format_value, rank_landmarks, LabelledInput,
};
use dtagn_core::netspec::load_model;
use dtagn_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::{InspectActivations, InspectFilters, InspectLandmarks, InspectMaps};
use crate::data::{check_model, Prepared};
use crate::train::{appearance_augment, geometry_augment};

pub fn filters(a: &InspectFilters) -> Result<()> {
    let model = load_model(&a.model)?;
    let written = export_filters(&model, a.layer, &a.out)?;
    println!("wrote {} files to {}", written.len(), a.out.display());
    Ok(())
}

pub fn maps(a: &InspectMaps) -> Result<()> {
    let model = load_model(&a.model)?;
    let items = Prepared::load(&a.cache)?.items()?;
    let item = match &a.sequence {
        Some(id) => items
            .iter()
            .find(|i| &i.id == id)
            .ok_or_else(|| Error::invalid(format!("no sequence {id} in {}", a.cache.display())))?,
        None => items
            .first()
            .ok_or_else(|| Error::invalid(format!("{} is empty", a.cache.display())))?,
    };
    check_model(&model, std::slice::from_ref(item), "maps")?;
    let written = export_feature_maps(&model, &item.input, a.layer, &a.out)?;
    println!("wrote {} files for sequence {} to {}", written.len(), item.id, a.out.display());
    Ok(())
}

pub fn landmarks(a: &InspectLandmarks) -> Result<()> {
    let model = load_model(&a.model)?;
    let (points, frames) = match &a.cache {
        Some(path) => {
            let c = Prepared::geometry(path)?;
            (c.layout.points, c.layout.frames)
        }
        None => (a.points, a.frames),
    };
    let ranked = rank_landmarks(&model, points, frames, a.top)?;
    let mut csv = String::from("rank,point,score\n");
    println!("{:>4} {:>6} {:>12}", "rank", "point", "mean |w|");
    for (r, (point, score)) in ranked.iter().enumerate() {
        println!("{:>4} {point:>6} {score:>12.6}", r + 1);
        writeln!(csv, "{},{point},{}", r + 1, format_value(*score)).unwrap();
    }
    if let Some(out) = &a.out {
        write_atomic(out, csv.as_bytes())?;
    }
    Ok(())
}

pub fn activations(a: &InspectActivations) -> Result<()> {
    let model = load_model(&a.model)?;
    let prepared = Prepared::load(&a.cache)?;
    let items = prepared.items()?;
    check_model(&model, &items, "activations")?;
    let mut inputs: Vec<LabelledInput> = Vec::new();
    if a.augment {
        // Augmented copies, tagged `id#k` with k = 0 the original.
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.seed);
        let per: Vec<(String, Vec<(dtagn_core::Tensor, usize)>)> = match &prepared {
            Prepared::Geometry(c) => c
                .sequences
                .iter()
                .map(|s| {
                    let set = build_geometry_trainset(
                        std::slice::from_ref(s),
                        &geometry_augment(&a.augment_settings)?,
                        &mut rng,
                    )?;
                    let set = set
                        .into_iter()
                        .map(|(v, l)| Ok((v.to_tensor()?, l)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((s.sequence_id.clone(), set))
                })
                .collect::<Result<_>>()?,
            Prepared::Appearance(c) => c
                .sequences
                .iter()
                .map(|s| {
                    let set = build_appearance_trainset(std::slice::from_ref(s), &appearance_augment(&a.augment_settings))?;
                    Ok((s.sequence_id.clone(), set))
                })
                .collect::<Result<_>>()?,
        };
        for (id, set) in per {
            for (k, (input, label)) in set.into_iter().enumerate() {
                inputs.push(LabelledInput { id: format!("{id}#{k}"), label, input });
            }
        }
    } else {
        inputs.extend(items.into_iter().map(|i| LabelledInput { id: i.id, label: i.label, input: i.input }));
    }
    export_activations(&model, &inputs, a.layer, &a.out)?;
    println!("wrote {} rows to {}", inputs.len(), a.out.display());
    Ok(())
}
