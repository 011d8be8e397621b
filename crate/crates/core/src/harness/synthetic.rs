//! Seeded bilingual toy collections with known relevance.
//!
//! Each "language" has its own surface words for a shared set of concepts.
//! Queries name two concepts by their primary word. Relevant documents
//! discuss both concepts through synonyms with a single literal query word,
//! while decoys repeat one literal query word without the topic, so a
//! lexical ranker prefers decoys and a semantic matcher can do better.
//! Every generated word ends in a digit, which keeps stemmers and
//! stopword lists from touching it.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{write_qrels, Document, Language, Qrels, Topic};
use crate::embeddings::{mock_vector, EmbeddingTable, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub concepts: usize,
    /// Words per concept and language; the first is used in queries.
    pub synonyms: usize,
    pub source_queries: usize,
    pub target_queries: usize,
    pub few_shot_queries: usize,
    pub relevant_per_query: usize,
    pub decoys_per_query: usize,
    pub background_docs: usize,
    pub filler_words: usize,
    pub doc_len: usize,
    /// Share of source queries held out for epoch selection.
    pub validation_fraction: f64,
    /// Weight of the per-word noise vector in aligned embeddings.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            concepts: 48,
            synonyms: 4,
            source_queries: 40,
            target_queries: 24,
            few_shot_queries: 8,
            relevant_per_query: 3,
            decoys_per_query: 3,
            background_docs: 60,
            filler_words: 400,
            doc_len: 40,
            validation_fraction: 0.25,
            noise: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCollection {
    pub name: String,
    pub language: Language,
    pub docs: Vec<Document>,
    pub topics: Vec<Topic>,
    pub qrels: Qrels,
    pub train_qids: Option<Vec<String>>,
    pub validation_qids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub source: SyntheticCollection,
    pub target: SyntheticCollection,
    pub few_shot: SyntheticCollection,
    /// Every generated word with its concept (`None` for filler).
    pub lexicon: Vec<(String, Option<usize>)>,
}

struct Lexicon<'a> {
    prefix: &'a str,
    cfg: &'a SyntheticConfig,
}

impl Lexicon<'_> {
    fn word(&self, concept: usize, k: usize) -> String {
        format!("{}{concept:03}v{k}", self.prefix)
    }

    fn filler(&self, n: usize) -> String {
        format!("{}f{n:04}", self.prefix)
    }

    fn synonym(&self, concept: usize, rng: &mut ChaCha8Rng) -> String {
        self.word(concept, rng.gen_range(1..self.cfg.synonyms.max(2)))
    }

    fn pad(&self, tokens: &mut Vec<String>, rng: &mut ChaCha8Rng) {
        while tokens.len() < self.cfg.doc_len {
            tokens.push(self.filler(rng.gen_range(0..self.cfg.filler_words.max(1))));
        }
        tokens.shuffle(rng);
    }
}

struct Plan<'a> {
    name: &'a str,
    language: Language,
    word_prefix: &'a str,
    qid_prefix: &'a str,
    docno_prefix: &'a str,
    queries: usize,
    background: usize,
    folds: bool,
}

fn generate_collection(plan: Plan<'_>, cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> SyntheticCollection {
    assert!(cfg.concepts >= 2, "need at least two concepts");
    let lex = Lexicon {
        prefix: plan.word_prefix,
        cfg,
    };
    let mut topics = Vec::new();
    // (tokens, judgment as (qid, grade))
    let mut bodies: Vec<(Vec<String>, Option<(String, u32)>)> = Vec::new();
    for q in 0..plan.queries {
        let qid = format!("{}{:03}", plan.qid_prefix, q + 1);
        let picked: Vec<usize> = rand::seq::index::sample(rng, cfg.concepts, 2).into_vec();
        let title = format!("{} {}", lex.word(picked[0], 0), lex.word(picked[1], 0));
        topics.push(Topic {
            qid: qid.clone(),
            title: title.clone(),
            description: title,
            language: plan.language,
        });
        for _ in 0..cfg.relevant_per_query {
            let mut toks = Vec::new();
            for &c in &picked {
                toks.push(lex.synonym(c, rng));
                toks.push(lex.synonym(c, rng));
            }
            toks.push(lex.word(picked[rng.gen_range(0..2)], 0));
            lex.pad(&mut toks, rng);
            bodies.push((toks, Some((qid.clone(), 1))));
        }
        for _ in 0..cfg.decoys_per_query {
            let literal = lex.word(picked[rng.gen_range(0..2)], 0);
            let mut toks = vec![literal; rng.gen_range(2..=3)];
            let other = loop {
                let c = rng.gen_range(0..cfg.concepts);
                if !picked.contains(&c) {
                    break c;
                }
            };
            toks.push(lex.synonym(other, rng));
            toks.push(lex.synonym(other, rng));
            lex.pad(&mut toks, rng);
            bodies.push((toks, Some((qid.clone(), 0))));
        }
    }
    for _ in 0..plan.background {
        let mut toks = Vec::new();
        for _ in 0..2 {
            let c = rng.gen_range(0..cfg.concepts);
            toks.push(lex.synonym(c, rng));
            toks.push(lex.synonym(c, rng));
        }
        lex.pad(&mut toks, rng);
        bodies.push((toks, None));
    }

    bodies.shuffle(rng);
    let mut docs = Vec::with_capacity(bodies.len());
    let mut qrels = Qrels::new();
    for (i, (toks, judgment)) in bodies.into_iter().enumerate() {
        let docno = format!("{}-{:05}", plan.docno_prefix, i + 1);
        if let Some((qid, grade)) = judgment {
            qrels.entry(qid).or_default().insert(docno.clone(), grade);
        }
        docs.push(Document {
            docno,
            body: toks.join(" "),
            language: plan.language,
        });
    }

    let (train_qids, validation_qids) = if plan.folds {
        let qids: Vec<String> = topics.iter().map(|t| t.qid.clone()).collect();
        let n_val = ((qids.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, qids.len().max(2) - 1);
        let split = qids.len() - n_val;
        (Some(qids[..split].to_vec()), Some(qids[split..].to_vec()))
    } else {
        (None, None)
    };
    SyntheticCollection {
        name: plan.name.to_string(),
        language: plan.language,
        docs,
        topics,
        qrels,
        train_qids,
        validation_qids,
    }
}

/// Generates the source collection (English analyzer, with folds), the
/// target collection (Spanish analyzer) and a small target-language
/// companion collection for few-shot training.
pub fn generate(cfg: &SyntheticConfig, seed: u64) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_C0DE);
    let source = generate_collection(
        Plan {
            name: "synthetic-source",
            language: Language::En,
            word_prefix: "src",
            qid_prefix: "S",
            docno_prefix: "SRC",
            queries: cfg.source_queries,
            background: cfg.background_docs,
            folds: true,
        },
        cfg,
        &mut rng,
    );
    let target = generate_collection(
        Plan {
            name: "synthetic-target",
            language: Language::Es,
            word_prefix: "tgt",
            qid_prefix: "T",
            docno_prefix: "TGT",
            queries: cfg.target_queries,
            background: cfg.background_docs,
            folds: false,
        },
        cfg,
        &mut rng,
    );
    let few_shot = generate_collection(
        Plan {
            name: "synthetic-fewshot",
            language: Language::Es,
            word_prefix: "tgt",
            qid_prefix: "F",
            docno_prefix: "FEW",
            queries: cfg.few_shot_queries,
            background: cfg.background_docs / 4,
            folds: false,
        },
        cfg,
        &mut rng,
    );

    let mut lexicon = Vec::new();
    for prefix in ["src", "tgt"] {
        let lex = Lexicon { prefix, cfg };
        for c in 0..cfg.concepts {
            for k in 0..cfg.synonyms.max(2) {
                lexicon.push((lex.word(c, k), Some(c)));
            }
        }
        for n in 0..cfg.filler_words.max(1) {
            lexicon.push((lex.filler(n), None));
        }
    }
    SyntheticWorld {
        source,
        target,
        few_shot,
        lexicon,
    }
}

impl SyntheticWorld {
    /// Vectors in which all words of a concept, in both languages, lie near
    /// a shared concept direction: `normalize(concept + noise · word)`.
    /// Filler words get plain mock vectors.
    pub fn aligned_embeddings(&self, dim: usize, noise: f64, seed: u64) -> EmbeddingTable {
        let mut table = EmbeddingTable::new(dim, Provenance::Mock);
        for (word, concept) in &self.lexicon {
            let own = mock_vector(word, dim, seed);
            let v = match concept {
                Some(c) => {
                    let base = mock_vector(&format!("concept#{c}"), dim, seed);
                    let mut v: Vec<f64> = base.iter().zip(&own).map(|(b, o)| b + noise * o).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x /= norm);
                    v
                }
                None => own,
            };
            table.insert(word.clone(), v).expect("dimension is consistent");
        }
        table
    }
}

pub fn docs_to_trec(docs: &[Document]) -> String {
    let mut s = String::new();
    for d in docs {
        s.push_str(&format!("<DOC>\n<DOCNO>{}</DOCNO>\n<TEXT>\n{}\n</TEXT>\n</DOC>\n", d.docno, d.body));
    }
    s
}

pub fn topics_to_trec(topics: &[Topic]) -> String {
    let mut s = String::new();
    for t in topics {
        s.push_str(&format!(
            "<top>\n<num> Number: {}\n<title> {}\n<desc> Description:\n{}\n</top>\n\n",
            t.qid, t.title, t.description
        ));
    }
    s
}

impl SyntheticCollection {
    fn texts(&self) -> [(&'static str, String); 3] {
        let mut qrels = Vec::new();
        write_qrels(&self.qrels, &mut qrels).expect("in-memory write");
        [
            ("docs.sgml", docs_to_trec(&self.docs)),
            ("topics.txt", topics_to_trec(&self.topics)),
            ("qrels.txt", String::from_utf8(qrels).expect("qrels are UTF-8")),
        ]
    }

    /// SHA-256 over the serialized docs, topics and qrels.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for (name, text) in self.texts() {
            h.update(name.as_bytes());
            h.update([0u8]);
            h.update(text.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes `docs.sgml`, `topics.txt`, `qrels.txt` and, when folds exist,
    /// `train_qids.txt` / `validation_qids.txt`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, text) in self.texts() {
            fs::write(dir.join(name), text)?;
        }
        for (name, qids) in [("train_qids.txt", &self.train_qids), ("validation_qids.txt", &self.validation_qids)] {
            if let Some(qids) = qids {
                fs::write(dir.join(name), qids.iter().map(|q| format!("{q}\n")).collect::<String>())?;
            }
        }
        Ok(())
    }
}
