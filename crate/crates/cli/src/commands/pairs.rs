use std::io::Write;

use answerable_core::corpus::{build_pairs_by_thread, QuestionRecord};
use answerable_core::eval::pairwise_agreement;
use anyhow::Result;
use serde::Serialize;

use crate::commands::{
    load_model, load_questions, score_map, score_records, stage_file, write_file,
};
use crate::config::RunConfig;

#[derive(Serialize)]
struct Agreement {
    pairs: usize,
    agreement: f64,
}

/// Builds time-adjacent answered/unanswered pairs per thread. With a model
/// checkpoint available, also reports how often the model agrees with the
/// host's choice.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let questions = load_questions(cfg)?;
    let pairs = build_pairs_by_thread(&questions);

    let use_model =
        cfg.model_file.is_some() || (!pairs.is_empty() && cfg.out.join("checkpoint").exists());
    let agreement = if use_model {
        let model = load_model(cfg)?;
        let members: Vec<QuestionRecord> = pairs
            .iter()
            .flat_map(|p| [p.answered.clone(), p.unanswered.clone()])
            .collect();
        let scores = score_records(cfg, &model, &members)?;
        Some(pairwise_agreement(&score_map(&members, &scores), &pairs)?)
    } else {
        None
    };

    let path = cfg.out.join("pairs.jsonl");
    stage_file(&path, |tmp| {
        let mut w = std::io::BufWriter::new(std::fs::File::create(tmp)?);
        for p in &pairs {
            serde_json::to_writer(&mut w, p)?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    })?;
    println!("pairs: {}", pairs.len());
    println!("wrote {}", path.display());

    if let Some(agreement) = agreement {
        let mut text = serde_json::to_string_pretty(&Agreement {
            pairs: pairs.len(),
            agreement,
        })?;
        text.push('\n');
        let agreement_path = cfg.out.join("agreement.json");
        write_file(&agreement_path, text.as_bytes())?;
        println!("pairwise agreement {agreement}");
        println!("wrote {}", agreement_path.display());
    }
    cfg.echo()?;
    Ok(())
}
