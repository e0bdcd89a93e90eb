use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;

use riskcal_core::model::{EvidenceRecord, ScoredRecord, validate_record};
use riskcal_core::scorers;

use crate::CliError;
use crate::io::{LineIssue, RunManifest, read_jsonl, write_jsonl};

use super::report_skipped;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ScoreMethod {
    /// Shannon entropy of the option-probability vector
    PeWhite,
    /// Entropy of option frequencies from black-box samples
    PeBlack,
    /// Entropy of semantic-cluster membership fractions
    SeBlack,
    /// Entropy of normalized per-cluster generative-probability masses
    SeWhite,
    /// Spectral-embedding eccentricity of the similarity matrix
    Ecc,
    /// One minus mean pairwise similarity
    Deg,
    /// Laplacian-eigenvalue cluster-count relaxation
    Eigv,
    /// Copy precomputed_uncertainty through unchanged
    Passthrough,
}

impl ScoreMethod {
    fn name(self) -> &'static str {
        match self {
            ScoreMethod::PeWhite => "pe_white",
            ScoreMethod::PeBlack => "pe_black",
            ScoreMethod::SeBlack => "se_black",
            ScoreMethod::SeWhite => "se_white",
            ScoreMethod::Ecc => "ecc",
            ScoreMethod::Deg => "deg",
            ScoreMethod::Eigv => "eigv",
            ScoreMethod::Passthrough => "passthrough",
        }
    }
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Evidence records, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Uncertainty measure to apply
    #[arg(long, value_enum)]
    pub method: ScoreMethod,
    /// Scored records are written here, one JSON object per line
    #[arg(long)]
    pub output: PathBuf,
    /// Abort (exit 3) if any record had to be skipped
    #[arg(long)]
    pub strict: bool,
    /// Option count for pe_black; inferred from the record when omitted
    #[arg(long)]
    pub num_options: Option<u32>,
    /// Embedding dimension for ecc
    #[arg(long, default_value_t = 2)]
    pub ecc_dim: usize,
}

fn score_record(
    record: &EvidenceRecord,
    method: ScoreMethod,
    num_options: Option<u32>,
    ecc_dim: usize,
) -> Result<f64, String> {
    let missing = |field: &str| format!("method {} needs {field}", method.name());
    match method {
        ScoreMethod::PeWhite => {
            let probs = record.option_probs.as_ref().ok_or_else(|| missing("option_probs"))?;
            scorers::predictive_entropy_white(probs).map_err(|e| e.to_string())
        }
        ScoreMethod::PeBlack => {
            let ids = record
                .sampled_option_ids
                .as_ref()
                .ok_or_else(|| missing("sampled_option_ids"))?;
            let options = num_options
                .or_else(|| record.option_probs.as_ref().map(|p| p.len() as u32))
                .or_else(|| ids.iter().max().map(|m| m + 1))
                .ok_or_else(|| missing("a resolvable option count"))?;
            scorers::predictive_entropy_black(ids, options).map_err(|e| e.to_string())
        }
        ScoreMethod::SeBlack => {
            let labels =
                record.cluster_labels.as_ref().ok_or_else(|| missing("cluster_labels"))?;
            scorers::semantic_entropy_black(labels).map_err(|e| e.to_string())
        }
        ScoreMethod::SeWhite => {
            let labels =
                record.cluster_labels.as_ref().ok_or_else(|| missing("cluster_labels"))?;
            let probs =
                record.sequence_probs.as_ref().ok_or_else(|| missing("sequence_probs"))?;
            scorers::semantic_entropy_white(labels, probs).map_err(|e| e.to_string())
        }
        ScoreMethod::Ecc | ScoreMethod::Deg | ScoreMethod::Eigv => {
            let raw = record.similarity.as_ref().ok_or_else(|| missing("similarity"))?;
            let w = scorers::normalize(raw).map_err(|e| e.to_string())?;
            match method {
                ScoreMethod::Ecc => {
                    scorers::eccentricity_score(&w, ecc_dim).map_err(|e| e.to_string())
                }
                ScoreMethod::Deg => Ok(scorers::degree_score(&w)),
                ScoreMethod::Eigv => Ok(scorers::eigenvalue_score(&w)),
                _ => unreachable!(),
            }
        }
        ScoreMethod::Passthrough => record
            .precomputed_uncertainty
            .ok_or_else(|| missing("precomputed_uncertainty")),
    }
}

pub fn run(args: ScoreArgs) -> Result<i32, CliError> {
    let read = read_jsonl::<EvidenceRecord>(&args.input)?;
    let mut skipped = read.skipped;
    let mut scored = Vec::with_capacity(read.records.len());
    for (line, record) in &read.records {
        let violations = validate_record(record);
        if !violations.is_empty() {
            skipped.push(LineIssue {
                line: *line,
                message: format!("record '{}': {}", record.id, violations.join("; ")),
            });
            continue;
        }
        match score_record(record, args.method, args.num_options, args.ecc_dim) {
            Ok(uncertainty) => match ScoredRecord::new(&record.id, uncertainty, record.admissible)
            {
                Ok(r) => scored.push(r),
                Err(e) => skipped.push(LineIssue {
                    line: *line,
                    message: format!("record '{}': {e}", record.id),
                }),
            },
            Err(message) => skipped.push(LineIssue {
                line: *line,
                message: format!("record '{}': {message}", record.id),
            }),
        }
    }
    skipped.sort_by_key(|issue| issue.line);
    report_skipped(&args.input, &skipped, args.strict)?;

    let mut manifest = RunManifest::new(
        "score",
        json!({
            "method": args.method.name(),
            "strict": args.strict,
            "num_options": args.num_options,
            "ecc_dim": args.ecc_dim,
        }),
    );
    manifest.add_input(&args.input)?;
    manifest.skipped_lines = skipped.len() as u64;
    write_jsonl(&args.output, &manifest, None, &scored)?;
    println!(
        "scored {} record(s) with {} ({} skipped) -> {}",
        scored.len(),
        args.method.name(),
        skipped.len(),
        args.output.display()
    );
    Ok(0)
}
