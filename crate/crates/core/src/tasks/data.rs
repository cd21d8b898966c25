//! Synthetic datasets for the three tasks, and their on-disk format.
//!
//! Every generator plants exactly the regularity its rule programs state, so
//! the rules are true by construction unless a noise knob says otherwise.
//! Words are synthetic surfaces whose prefix gives their category (`n7` is a
//! noun, `w3_1` is the second member of relatedness cluster 3, ...). The
//! models never see the surface, only a vocabulary id.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{TaskError, TaskKind};
use crate::augment::ExternalPredicateTable;

pub const TAG_LABELS: [&str; 7] = ["B-NP", "I-NP", "B-VP", "I-VP", "B-PP", "I-PP", "O"];
pub const NLI_LABELS: [&str; 3] = ["Entail", "Contradict", "Neutral"];

const B_NP: usize = 0;
const I_NP: usize = 1;
const B_VP: usize = 2;
const I_VP: usize = 3;
const B_PP: usize = 4;
const I_PP: usize = 5;
const O: usize = 6;

/// Name of the relatedness table used by the alignment and inference rules.
pub const RELATED_TABLE: &str = "related";
/// Name of the noun lexicon used by the tagging rules.
pub const NOUN_TABLE: &str = "noun";

/// Token vocabulary. Id 0 is reserved for unknown surfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNKNOWN: &'static str = "<unk>";

    pub fn new<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        let mut v = Vocab {
            words: vec![Self::UNKNOWN.to_string()],
            index: HashMap::from([(Self::UNKNOWN.to_string(), 0)]),
        };
        for w in words {
            let w = w.into();
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        // The unknown entry is always present.
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggingExample {
    pub tokens: Vec<String>,
    /// Indices into [`TAG_LABELS`].
    pub labels: Vec<usize>,
    /// Which tokens are nouns (the values of `N(t)`).
    pub nouns: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentExample {
    pub paragraph: Vec<String>,
    pub query: Vec<String>,
    /// `(paragraph position, query position)` pairs of related content words.
    pub gold: Vec<(usize, usize)>,
    /// Inclusive answer span in the paragraph.
    pub answer: (usize, usize),
    pub paragraph_content: Vec<bool>,
    pub query_content: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceExample {
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    /// Index into [`NLI_LABELS`].
    pub label: usize,
    pub premise_content: Vec<bool>,
    pub hypothesis_content: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    Align(AlignmentExample),
    Tag(TaggingExample),
    Nli(InferenceExample),
}

impl Example {
    pub fn task(&self) -> TaskKind {
        match self {
            Example::Align(_) => TaskKind::Align,
            Example::Tag(_) => TaskKind::Tag,
            Example::Nli(_) => TaskKind::Nli,
        }
    }
}

/// A generated (or loaded) task: training pool, fixed test set, vocabulary and tables.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task: TaskKind,
    pub vocab: Vocab,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub tables: BTreeMap<String, Arc<ExternalPredicateTable>>,
}

/// Generator knobs shared by the three tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    /// Size of the training pool that fractions are drawn from.
    pub train: usize,
    pub test: usize,
    /// Number of content words (alignment, inference) or nouns (tagging).
    pub vocab_size: usize,
    /// Alignment: fraction of related pairs missing from the table.
    /// Tagging: probability of replacing a gold label by a random one.
    /// Inference: fraction of examples that contradict the unaligned-word rule.
    pub noise: f64,
}

impl GenConfig {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Align => GenConfig {
                seed: 7,
                train: 400,
                test: 200,
                vocab_size: 90,
                noise: 0.0,
            },
            TaskKind::Tag => GenConfig {
                seed: 7,
                train: 400,
                test: 200,
                vocab_size: 80,
                noise: 0.0,
            },
            TaskKind::Nli => GenConfig {
                seed: 7,
                train: 400,
                test: 300,
                vocab_size: 60,
                noise: 0.15,
            },
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::for_task(TaskKind::Tag)
    }
}

/// Generate the pool and test set of `task`.
pub fn generate(task: TaskKind, cfg: &GenConfig) -> TaskData {
    let n = cfg.train + cfg.test;
    let (vocab, mut examples, tables) = match task {
        TaskKind::Align => {
            let (ex, vocab, table) = gen_alignment(cfg.seed, n, cfg.vocab_size, cfg.noise);
            (vocab, ex.into_iter().map(Example::Align).collect::<Vec<_>>(), vec![table])
        }
        TaskKind::Tag => {
            let (ex, vocab, table) = gen_tagging(cfg.seed, n, cfg.vocab_size, cfg.noise);
            (vocab, ex.into_iter().map(Example::Tag).collect(), vec![table])
        }
        TaskKind::Nli => {
            let (ex, vocab, table) = gen_inference(cfg.seed, n, cfg.vocab_size, cfg.noise);
            (vocab, ex.into_iter().map(Example::Nli).collect(), vec![table])
        }
    };
    let test = examples.split_off(cfg.train);
    TaskData {
        task,
        vocab,
        train: examples,
        test,
        tables: tables.into_iter().map(|t| (t.name.clone(), Arc::new(t))).collect(),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn clusters(n_words: usize, size: usize) -> Vec<Vec<String>> {
    (0..n_words.div_ceil(size))
        .map(|c| (0..size).map(|k| format!("w{c}_{k}")).collect())
        .collect()
}

const FUNCTION_WORDS: usize = 6;

fn function_word(rng: &mut ChaCha8Rng) -> String {
    format!("f{}", rng.random_range(0..FUNCTION_WORDS))
}

/// Relatedness table over every ordered pair inside each cluster, each pair
/// dropped with probability `noise`.
fn relatedness(groups: &[Vec<String>], noise: f64, rng: &mut ChaCha8Rng) -> ExternalPredicateTable {
    let mut t = ExternalPredicateTable::new(RELATED_TABLE, 2);
    for g in groups {
        for a in g {
            for b in g {
                if !rng.random_bool(noise.clamp(0.0, 1.0)) {
                    t.insert([a.as_str(), b.as_str()], 1.0);
                }
            }
        }
    }
    t
}

/// Question-answering analog: the answer is the paragraph word related to
/// the query's one anchored content word.
pub fn gen_alignment(
    seed: u64,
    n: usize,
    vocab_size: usize,
    noise: f64,
) -> (Vec<AlignmentExample>, Vocab, ExternalPredicateTable) {
    let groups = clusters(vocab_size.max(6), 3);
    let mut rng = rng_for(seed, 1);
    let table = relatedness(&groups, noise, &mut rng_for(seed, 2));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let p_len = rng.random_range(10..=20);
        let q_len = rng.random_range(3..=8);
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng);
        let (anchor, others) = (order[0], &order[1..]);
        let mut paragraph = Vec::with_capacity(p_len);
        let mut paragraph_content = Vec::with_capacity(p_len);
        let mut next_cluster = others.iter().skip(1);
        for _ in 0..p_len {
            // Distinct clusters keep the gold alignment unambiguous; a small
            // vocabulary just yields more function words.
            match rng.random_bool(0.5).then(|| next_cluster.next()).flatten() {
                Some(&c) => {
                    paragraph.push(groups[c][rng.random_range(0..3)].clone());
                    paragraph_content.push(true);
                }
                None => {
                    paragraph.push(function_word(&mut rng));
                    paragraph_content.push(false);
                }
            }
        }
        let a = rng.random_range(0..p_len);
        paragraph[a] = groups[anchor][rng.random_range(0..3)].clone();
        paragraph_content[a] = true;

        let mut query: Vec<String> = (0..q_len).map(|_| function_word(&mut rng)).collect();
        let mut query_content = vec![false; q_len];
        let j = rng.random_range(0..q_len);
        query[j] = groups[anchor][rng.random_range(0..3)].clone();
        query_content[j] = true;
        // A distractor content word from a cluster absent from the paragraph.
        if q_len > 3 {
            let k = (j + 1 + rng.random_range(0..q_len - 1)) % q_len;
            query[k] = groups[others[0]][rng.random_range(0..3)].clone();
            query_content[k] = true;
        }
        out.push(AlignmentExample {
            paragraph,
            query,
            gold: vec![(a, j)],
            answer: (a, a),
            paragraph_content,
            query_content,
        });
    }
    let vocab = Vocab::new(
        (0..FUNCTION_WORDS)
            .map(|k| format!("f{k}"))
            .chain(groups.into_iter().flatten()),
    );
    (out, vocab, table)
}

/// Word categories of the chunking grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cat {
    Det,
    Adj,
    Noun,
    Aux,
    Verb,
    Prep,
    Other,
}

impl Cat {
    fn prefix(self) -> &'static str {
        match self {
            Cat::Det => "d",
            Cat::Adj => "a",
            Cat::Noun => "n",
            Cat::Aux => "x",
            Cat::Verb => "v",
            Cat::Prep => "p",
            Cat::Other => "o",
        }
    }
}

struct Lexicon {
    sizes: [(Cat, usize); 7],
}

impl Lexicon {
    fn new(nouns: usize) -> Self {
        Lexicon {
            sizes: [
                (Cat::Det, 3),
                (Cat::Adj, 16),
                (Cat::Noun, nouns.max(1)),
                (Cat::Aux, 3),
                (Cat::Verb, 30),
                (Cat::Prep, 6),
                (Cat::Other, 3),
            ],
        }
    }

    fn size(&self, cat: Cat) -> usize {
        self.sizes.iter().find(|(c, _)| *c == cat).map(|(_, n)| *n).unwrap_or(1)
    }

    fn word(&self, cat: Cat, rng: &mut ChaCha8Rng) -> String {
        format!("{}{}", cat.prefix(), rng.random_range(0..self.size(cat)))
    }

    fn all(&self) -> impl Iterator<Item = String> + '_ {
        self.sizes
            .iter()
            .flat_map(|&(c, n)| (0..n).map(move |k| format!("{}{k}", c.prefix())))
    }
}

/// Chunking analog. Sentences are `NP VP [NP] [PP NP] [O]` chunk sequences
/// where nouns only ever head noun phrases, so the pairwise label rules and
/// the noun rule hold on every noise-free sentence.
pub fn gen_tagging(seed: u64, n: usize, nouns: usize, noise: f64) -> (Vec<TaggingExample>, Vocab, ExternalPredicateTable) {
    let lex = Lexicon::new(nouns);
    let mut rng = rng_for(seed, 1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut words: Vec<(Cat, usize)> = Vec::new();
        noun_phrase(&mut rng, &mut words);
        if rng.random_bool(0.3) {
            words.push((Cat::Aux, B_VP));
            words.push((Cat::Verb, I_VP));
        } else {
            words.push((Cat::Verb, B_VP));
        }
        if rng.random_bool(0.7) {
            noun_phrase(&mut rng, &mut words);
        }
        if rng.random_bool(0.5) {
            words.push((Cat::Prep, B_PP));
            if rng.random_bool(0.15) {
                words.push((Cat::Prep, I_PP));
            }
            noun_phrase(&mut rng, &mut words);
        }
        if rng.random_bool(0.3) {
            words.push((Cat::Other, O));
        }
        let tokens = words.iter().map(|&(c, _)| lex.word(c, &mut rng)).collect();
        let nouns = words.iter().map(|&(c, _)| c == Cat::Noun).collect();
        let labels = words
            .iter()
            .map(|&(_, l)| {
                if noise > 0.0 && rng.random_bool(noise.min(1.0)) {
                    rng.random_range(0..TAG_LABELS.len())
                } else {
                    l
                }
            })
            .collect();
        out.push(TaggingExample { tokens, labels, nouns });
    }
    let mut table = ExternalPredicateTable::new(NOUN_TABLE, 1);
    for k in 0..lex.size(Cat::Noun) {
        table.insert([format!("n{k}")], 1.0);
    }
    (out, Vocab::new(lex.all()), table)
}

fn noun_phrase(rng: &mut ChaCha8Rng, out: &mut Vec<(Cat, usize)>) {
    let start = out.len();
    if rng.random_bool(0.6) {
        out.push((Cat::Det, I_NP));
    }
    for _ in 0..rng.random_range(0..=2) {
        out.push((Cat::Adj, I_NP));
    }
    out.push((Cat::Noun, I_NP));
    if rng.random_bool(0.2) {
        out.push((Cat::Noun, I_NP));
    }
    out[start].1 = B_NP;
}

const GENERIC_WORDS: usize = 4;
pub const NEGATION: &str = "not";

/// Inference analog. Entailment holds when every hypothesis content word
/// has a related premise word; a negation makes it a contradiction; an
/// unrelated hypothesis word makes it neutral. With probability
/// `counter_rate` an example instead carries a generic word (`g*`) that has
/// no related premise word yet is labeled entailment: a counter-example to
/// the unaligned-word rule.
pub fn gen_inference(
    seed: u64,
    n: usize,
    vocab_size: usize,
    counter_rate: f64,
) -> (Vec<InferenceExample>, Vocab, ExternalPredicateTable) {
    let groups = clusters(vocab_size.max(16), 2);
    let mut rng = rng_for(seed, 1);
    let table = relatedness(&groups, 0.0, &mut rng_for(seed, 2));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng);
        let n_prem = rng.random_range(3..=6);
        let (prem_clusters, rest) = order.split_at(n_prem);

        let mut premise = Vec::new();
        let mut premise_content = Vec::new();
        for &c in prem_clusters {
            if rng.random_bool(0.4) {
                premise.push(function_word(&mut rng));
                premise_content.push(false);
            }
            premise.push(groups[c][rng.random_range(0..2)].clone());
            premise_content.push(true);
        }

        let counter = rng.random_bool(counter_rate.clamp(0.0, 1.0));
        let label = if counter { 0 } else { rng.random_range(0..3) };
        let n_hyp = rng.random_range(1..=3.min(n_prem));
        let mut chosen: Vec<usize> = prem_clusters.to_vec();
        chosen.shuffle(&mut rng);
        let mut content: Vec<String> = chosen[..n_hyp]
            .iter()
            .map(|&c| groups[c][rng.random_range(0..2)].clone())
            .collect();
        match (counter, label) {
            (true, _) => {
                let k = rng.random_range(0..=content.len());
                content.insert(k, format!("g{}", rng.random_range(0..GENERIC_WORDS)));
            }
            (false, 2) => {
                let k = rng.random_range(0..content.len());
                content[k] = groups[rest[0]][rng.random_range(0..2)].clone();
            }
            _ => {}
        }
        let mut hypothesis = Vec::new();
        let mut hypothesis_content = Vec::new();
        for w in content {
            if rng.random_bool(0.3) {
                hypothesis.push(function_word(&mut rng));
                hypothesis_content.push(false);
            }
            hypothesis.push(w);
            hypothesis_content.push(true);
        }
        if label == 1 {
            let k = rng.random_range(0..=hypothesis.len());
            hypothesis.insert(k, NEGATION.to_string());
            hypothesis_content.insert(k, false);
        }
        out.push(InferenceExample {
            premise,
            hypothesis,
            label,
            premise_content,
            hypothesis_content,
        });
    }
    let vocab = Vocab::new(
        (0..FUNCTION_WORDS)
            .map(|k| format!("f{k}"))
            .chain(std::iter::once(NEGATION.to_string()))
            .chain((0..GENERIC_WORDS).map(|k| format!("g{k}")))
            .chain(groups.into_iter().flatten()),
    );
    (out, vocab, table)
}

// ---------------------------------------------------------------------------
// On-disk format: one example per line, tab-separated fields.

fn mask(m: &[bool]) -> String {
    m.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_mask(s: &str, len: usize) -> Result<Vec<bool>, String> {
    if s.len() != len {
        return Err(format!("mask `{s}` has {} entries, expected {len}", s.len()));
    }
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            _ => Err(format!("bad mask character `{c}`")),
        })
        .collect()
}

fn label_index(labels: &[&str], s: &str) -> Result<usize, String> {
    labels
        .iter()
        .position(|l| *l == s)
        .ok_or_else(|| format!("unknown label `{s}`"))
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("bad pair `{s}`"))?;
    let num = |x: &str| x.parse::<usize>().map_err(|_| format!("bad index `{x}`"));
    Ok((num(a)?, num(b)?))
}

impl Example {
    pub fn to_line(&self) -> String {
        match self {
            Example::Tag(e) => format!(
                "{}\t{}\t{}",
                e.tokens.join(" "),
                e.labels.iter().map(|&l| TAG_LABELS[l]).collect::<Vec<_>>().join(" "),
                mask(&e.nouns)
            ),
            Example::Nli(e) => format!(
                "{}\t{}\t{}\t{}\t{}",
                e.premise.join(" "),
                e.hypothesis.join(" "),
                NLI_LABELS[e.label],
                mask(&e.premise_content),
                mask(&e.hypothesis_content)
            ),
            Example::Align(e) => format!(
                "{}\t{}\t{}\t{}-{}\t{}\t{}",
                e.paragraph.join(" "),
                e.query.join(" "),
                e.gold.iter().map(|(i, j)| format!("{i}-{j}")).collect::<Vec<_>>().join(","),
                e.answer.0,
                e.answer.1,
                mask(&e.paragraph_content),
                mask(&e.query_content)
            ),
        }
    }

    pub fn parse_line(task: TaskKind, line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split('\t').collect();
        let want = match task {
            TaskKind::Tag => 3,
            TaskKind::Nli => 5,
            TaskKind::Align => 6,
        };
        if f.len() != want {
            return Err(format!("expected {want} tab-separated fields, found {}", f.len()));
        }
        Ok(match task {
            TaskKind::Tag => {
                let tokens = words(f[0]);
                let labels = f[1]
                    .split_whitespace()
                    .map(|l| label_index(&TAG_LABELS, l))
                    .collect::<Result<Vec<_>, _>>()?;
                if labels.len() != tokens.len() {
                    return Err("token and label counts differ".into());
                }
                let nouns = parse_mask(f[2], tokens.len())?;
                Example::Tag(TaggingExample { tokens, labels, nouns })
            }
            TaskKind::Nli => {
                let (premise, hypothesis) = (words(f[0]), words(f[1]));
                Example::Nli(InferenceExample {
                    label: label_index(&NLI_LABELS, f[2])?,
                    premise_content: parse_mask(f[3], premise.len())?,
                    hypothesis_content: parse_mask(f[4], hypothesis.len())?,
                    premise,
                    hypothesis,
                })
            }
            TaskKind::Align => {
                let (paragraph, query) = (words(f[0]), words(f[1]));
                let gold = f[2]
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(parse_pair)
                    .collect::<Result<Vec<_>, _>>()?;
                if gold.iter().any(|&(i, j)| i >= paragraph.len() || j >= query.len()) {
                    return Err("gold pair outside the sentences".into());
                }
                let answer = parse_pair(f[3])?;
                if answer.0 > answer.1 || answer.1 >= paragraph.len() {
                    return Err(format!("bad answer span `{}`", f[3]));
                }
                Example::Align(AlignmentExample {
                    gold,
                    answer,
                    paragraph_content: parse_mask(f[4], paragraph.len())?,
                    query_content: parse_mask(f[5], query.len())?,
                    paragraph,
                    query,
                })
            }
        })
    }
}

fn write_examples(path: &Path, examples: &[Example]) -> Result<(), TaskError> {
    let mut text = String::new();
    for e in examples {
        let _ = writeln!(text, "{}", e.to_line());
    }
    fs::write(path, text).map_err(|e| TaskError::io(path, e))
}

fn read_examples(path: &Path, task: TaskKind) -> Result<Vec<Example>, TaskError> {
    let text = fs::read_to_string(path).map_err(|e| TaskError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Example::parse_line(task, l).map_err(|message| TaskError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    task: TaskKind,
    tables: Vec<String>,
}

impl TaskData {
    /// Write `train.txt`, `test.txt`, `vocab.txt`, one `.tsv` per table and a manifest.
    pub fn save(&self, dir: &Path) -> Result<(), TaskError> {
        fs::create_dir_all(dir).map_err(|e| TaskError::io(dir, e))?;
        write_examples(&dir.join("train.txt"), &self.train)?;
        write_examples(&dir.join("test.txt"), &self.test)?;
        let vocab: String = self.vocab.words()[1..].iter().map(|w| format!("{w}\n")).collect();
        let vpath = dir.join("vocab.txt");
        fs::write(&vpath, vocab).map_err(|e| TaskError::io(&vpath, e))?;
        for (name, t) in &self.tables {
            let p = dir.join(format!("{name}.tsv"));
            fs::write(&p, t.to_tsv()).map_err(|e| TaskError::io(&p, e))?;
        }
        let manifest = Manifest {
            task: self.task,
            tables: self.tables.keys().cloned().collect(),
        };
        let mpath = dir.join("dataset.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&mpath, json + "\n").map_err(|e| TaskError::io(&mpath, e))
    }

    pub fn load(dir: &Path) -> Result<Self, TaskError> {
        let mpath = dir.join("dataset.json");
        let text = fs::read_to_string(&mpath).map_err(|e| TaskError::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| TaskError::Format {
            path: mpath.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let vpath = dir.join("vocab.txt");
        let vocab = fs::read_to_string(&vpath).map_err(|e| TaskError::io(&vpath, e))?;
        let mut tables = BTreeMap::new();
        for name in manifest.tables {
            let t = ExternalPredicateTable::load(&dir.join(format!("{name}.tsv")), &name, None)?;
            tables.insert(name, Arc::new(t));
        }
        Ok(TaskData {
            task: manifest.task,
            vocab: Vocab::new(vocab.lines().map(str::trim).filter(|l| !l.is_empty())),
            train: read_examples(&dir.join("train.txt"), manifest.task)?,
            test: read_examples(&dir.join("test.txt"), manifest.task)?,
            tables,
        })
    }
}

/// Fraction of gold alignment pairs whose surfaces are related in `table`.
pub fn related_gold_fraction(examples: &[AlignmentExample], table: &ExternalPredicateTable) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for e in examples {
        for &(i, j) in &e.gold {
            total += 1;
            if table.contains(&[&e.paragraph[i], &e.query[j]]) {
                hit += 1;
            }
        }
    }
    hit as f64 / total.max(1) as f64
}

/// Whether a tag sequence is well-formed BIO: every `I-X` continues an `X` chunk.
pub fn bio_valid(labels: &[usize]) -> bool {
    let chunk = |l: usize| match l {
        B_NP | I_NP => Some(0),
        B_VP | I_VP => Some(1),
        B_PP | I_PP => Some(2),
        _ => None,
    };
    let mut prev: Option<usize> = None;
    for &l in labels {
        if matches!(l, I_NP | I_VP | I_PP) && prev.and_then(chunk) != chunk(l) {
            return false;
        }
        prev = Some(l);
    }
    true
}

/// Violations of the four pairwise label rules in one predicted sequence.
pub fn pairwise_violations(labels: &[usize]) -> usize {
    const PAIRS: [(usize, usize); 4] = [(B_VP, I_NP), (I_NP, I_VP), (I_VP, I_NP), (B_PP, I_VP)];
    labels
        .windows(2)
        .filter(|w| PAIRS.contains(&(w[0], w[1])))
        .count()
}

/// Noun tokens predicted with a verb- or preposition-phrase label.
pub fn noun_violations(labels: &[usize], nouns: &[bool]) -> usize {
    labels
        .iter()
        .zip(nouns)
        .filter(|(&l, &n)| n && matches!(l, B_VP | I_VP | B_PP | I_PP))
        .count()
}

/// Distinct surfaces seen in `examples`, for unseen-word statistics.
pub fn seen_tokens(examples: &[Example]) -> HashSet<String> {
    let mut out = HashSet::new();
    for e in examples {
        match e {
            Example::Tag(t) => out.extend(t.tokens.iter().cloned()),
            Example::Nli(n) => out.extend(n.premise.iter().chain(&n.hypothesis).cloned()),
            Example::Align(a) => out.extend(a.paragraph.iter().chain(&a.query).cloned()),
        }
    }
    out
}
