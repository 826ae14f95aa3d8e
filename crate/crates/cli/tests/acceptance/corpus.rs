//! Seeded synthetic corpora for the acceptance criteria.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hjd_core::dataset::NliInstance;
use hjd_core::distribution::LabelDistribution;
use hjd_core::explanation::{ExplanationPool, ExplanationRecord, ExplanationSet, ExplanationSource};
use hjd_core::label::NliLabel;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOUNS: &[&str] = &[
    "farmer", "violin", "harbor", "bicycle", "lantern", "glacier", "orchard", "tractor", "kitten", "canyon", "market",
    "pilot", "meadow", "rocket", "teacher", "bakery", "river", "castle", "painter", "garden", "dancer", "tunnel",
    "sailor", "forest", "doctor", "bridge", "puppy", "island", "singer", "library", "chef", "desert", "tiger",
    "village", "camera", "student", "volcano", "engine", "parrot", "stadium",
];
const VERBS: &[&str] = &[
    "repairs",
    "carries",
    "paints",
    "watches",
    "cleans",
    "climbs",
    "follows",
    "builds",
    "photographs",
    "visits",
];

fn human(uid: &str, label: NliLabel, text: String, rank: u32) -> ExplanationRecord {
    ExplanationRecord::new(uid, label, text, ExplanationSource::Human, rank).expect("valid record")
}

/// One instance with `m` human explanations of cycling labels.
pub fn instance_with_set(m: usize) -> (NliInstance, ExplanationSet) {
    let inst = NliInstance::new(
        "c-1",
        "A farmer repairs a tractor near the orchard.",
        "Someone is fixing a vehicle.",
    )
    .expect("valid instance");
    let explanations = (0..m)
        .map(|i| {
            let label = NliLabel::ALL[i % 3];
            human(
                "c-1",
                label,
                format!("Comment {i} about the farmer and the tractor."),
                i as u32 + 1,
            )
        })
        .collect();
    (inst, ExplanationSet::new("c-1", explanations))
}

/// A pool for one uid with several explanations per label, with length ties
/// broken by rank.
pub fn selection_pool() -> (ExplanationPool, String) {
    let uid = "s-1".to_string();
    let texts: [&[&str]; 3] = [
        &[
            "short one",
            "a much longer entailment explanation here",
            "four words right here",
            "tied length of six words ok",
        ],
        &[
            "neutral",
            "neutral explanation with five words",
            "neutral text of five words",
        ],
        &["contradiction explained in a sentence of eight words", "brief"],
    ];
    let mut records = Vec::new();
    for label in NliLabel::ALL {
        for (i, t) in texts[label.index()].iter().enumerate() {
            records.push(
                ExplanationRecord::new(uid.clone(), label, *t, ExplanationSource::Model, i as u32 + 1).expect("valid"),
            );
        }
    }
    (ExplanationPool::from_records(records), uid)
}

/// `n` instances over disjoint vocabulary, each with four human comments
/// that mention its own premise words and carry random labels.
pub fn ablation_corpus(n: usize, seed: u64) -> (Vec<NliInstance>, BTreeMap<String, ExplanationSet>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n);
    let mut sets = BTreeMap::new();
    for i in 0..n {
        let uid = format!("a-{i:03}");
        let mut words: Vec<&str> = NOUNS.to_vec();
        words.shuffle(&mut rng);
        let (a, b, c) = (words[0], words[1], words[2]);
        let verb = VERBS[rng.random_range(0..VERBS.len())];
        let premise = format!("The {a} {verb} the {b} beside the {c}.");
        let hypothesis = format!("A {a} is near a {c}.");
        let comments = [
            format!("The {a} {verb} the {b} so the {a} is beside the {c}."),
            format!("Being beside the {c} means the {a} is near the {c}."),
            format!("The {b} and the {c} are mentioned but the {a} position is vague."),
            format!("The {a} might not be near the {c} while it {verb} the {b}."),
        ];
        let explanations = comments
            .into_iter()
            .enumerate()
            .map(|(k, t)| human(&uid, NliLabel::ALL[rng.random_range(0..3)], t, k as u32 + 1))
            .collect();
        sets.insert(uid.clone(), ExplanationSet::new(uid.clone(), explanations));
        instances.push(NliInstance::new(uid, premise, hypothesis).expect("valid instance"));
    }
    (instances, sets)
}

const CUES: [&[&str]; 3] = [
    &["certainly", "indeed", "definitely", "surely", "clearly"],
    &["perhaps", "maybe", "possibly", "probably", "likely"],
    &["never", "nobody", "nothing", "impossible", "refuses"],
];

/// Instances whose hypothesis carries two cue words of its label; one-hot
/// soft labels. Returns a 3:1 train/test split.
#[allow(clippy::type_complexity)]
pub fn separable_corpus(
    n: usize,
    seed: u64,
) -> (
    Vec<(NliInstance, LabelDistribution)>,
    Vec<(NliInstance, LabelDistribution)>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let items: Vec<(NliInstance, LabelDistribution)> = (0..n)
        .map(|i| {
            let label = NliLabel::ALL[rng.random_range(0..3)];
            let cues = CUES[label.index()];
            let a = NOUNS[rng.random_range(0..NOUNS.len())];
            let b = NOUNS[rng.random_range(0..NOUNS.len())];
            let verb = VERBS[rng.random_range(0..VERBS.len())];
            let premise = format!("The {a} {verb} the {b}.");
            let hypothesis = format!(
                "The {b} {} {} {verb} the {a}.",
                cues[rng.random_range(0..cues.len())],
                cues[rng.random_range(0..cues.len())]
            );
            let inst = NliInstance::new(format!("p-{i:04}"), premise, hypothesis).expect("valid instance");
            (inst, LabelDistribution::one_hot(label))
        })
        .collect();
    let cut = n * 3 / 4;
    (items[..cut].to_vec(), items[cut..].to_vec())
}

/// Moves the full mass of a random `fraction` of examples to the next label
/// in E → N → C → E order.
pub fn pair_flip(
    corpus: &[(NliInstance, LabelDistribution)],
    fraction: f64,
    seed: u64,
) -> Vec<(NliInstance, LabelDistribution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf11d);
    corpus
        .iter()
        .map(|(i, d)| {
            if rng.random_bool(fraction) {
                let next = NliLabel::ALL[(d.argmax().index() + 1) % 3];
                (i.clone(), LabelDistribution::one_hot(next))
            } else {
                (i.clone(), *d)
            }
        })
        .collect()
}

pub struct SuppliedFiles {
    pub config: PathBuf,
    pub mjd: PathBuf,
    pub hjd: PathBuf,
    pub mjd_values: BTreeMap<String, [f64; 3]>,
    pub hjd_values: BTreeMap<String, [f64; 3]>,
    pub eval: Vec<NliInstance>,
    pub seed: u64,
}

fn random_simplex(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let w: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() + 0.01);
    let s: f64 = w.iter().sum();
    let p = w.map(|v| v / s);
    LabelDistribution::from_weights(p).expect("valid").as_array()
}

/// Writes instances, an MJD file, an HJD file, labeled evaluation
/// instances and a config pointing at them.
pub fn user_supplied_files(dir: &Path, n: usize, seed: u64) -> std::io::Result<SuppliedFiles> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, test) = separable_corpus(n * 2, seed);
    let instances: Vec<&NliInstance> = train.iter().map(|(i, _)| i).take(n).collect();
    let mut mjd_values = BTreeMap::new();
    let mut hjd_values = BTreeMap::new();
    let (mut inst_lines, mut mjd_lines, mut hjd_lines) = (String::new(), String::new(), String::new());
    for inst in &instances {
        let (m, h) = (random_simplex(&mut rng), random_simplex(&mut rng));
        inst_lines.push_str(&serde_json::to_string(inst)?);
        inst_lines.push('\n');
        mjd_lines.push_str(&serde_json::json!({"uid": inst.uid, "distribution": m}).to_string());
        mjd_lines.push('\n');
        hjd_lines.push_str(&serde_json::json!({"uid": inst.uid, "probs": h}).to_string());
        hjd_lines.push('\n');
        mjd_values.insert(inst.uid.clone(), m);
        hjd_values.insert(inst.uid.clone(), h);
    }
    let mut eval_lines = String::new();
    let mut eval = Vec::new();
    for (inst, d) in &test {
        let mut v = serde_json::to_value(inst)?;
        v["label"] = serde_json::Value::String(d.argmax().code().to_string());
        eval_lines.push_str(&v.to_string());
        eval_lines.push('\n');
        eval.push(inst.clone());
    }
    let write = |name: &str, text: &str| -> std::io::Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, text)?;
        Ok(p)
    };
    let instances_path = write("instances.jsonl", &inst_lines)?;
    let mjd = write("mjd.jsonl", &mjd_lines)?;
    let hjd = write("hjd.jsonl", &hjd_lines)?;
    let eval_path = write("eval.jsonl", &eval_lines)?;
    let config = write(
        "config.toml",
        &format!(
            "seed = {seed}\n[paths]\ninstances = {:?}\neval_instances = {:?}\n[training]\ndim = 4096\ndev_fraction = 0.5\n",
            instances_path.display().to_string(),
            eval_path.display().to_string()
        ),
    )?;
    Ok(SuppliedFiles {
        config,
        mjd,
        hjd,
        mjd_values,
        hjd_values,
        eval,
        seed,
    })
}
