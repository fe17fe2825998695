//! Deterministic offline providers.
//!
//! Every output is a pure function of the request and the provider seed, so
//! whole bundles can be rebuilt byte-for-byte without network access.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{
    check_text_input, EmbeddingProvider, EmbeddingVector, ImageArtifact, ImageGenRequest, ImageProvider,
    ProviderError, RenderedImage, TextGenRequest, TextProvider, TextTask,
};
use crate::content::segment_sentences;
use crate::textutil::{stable_seed, word_count};

const HERO_NAMES: &[&str] = &[
    "Luna", "Pip", "Rowan", "Hazel", "Milo", "Juniper", "Basil", "Clover", "Fennel", "Olive", "Tamsin", "Bramble",
];
const ELDER_NAMES: &[&str] = &["Sage", "Orrin", "Maple", "Thistle", "Wren", "Cedric"];
const DISTRACTOR_NAMES: &[&str] = &[
    "Gideon", "Marigold", "Percival", "Rosalind", "Thaddeus", "Winifred", "Ignatius", "Beatrix", "Cornelius", "Philippa",
];
const ANIMALS: &[&str] = &[
    "rabbit", "fox", "owl", "badger", "otter", "hedgehog", "deer", "mole", "heron", "squirrel", "wolf", "beaver",
];
const COLORS: &[&str] = &["silver", "amber", "crimson", "golden", "violet", "emerald", "copper", "pale blue"];
const ADJECTIVES: &[&str] = &["ancient", "glowing", "tiny", "curious", "heavy", "shimmering", "forgotten", "gentle"];
const NUMBERS: &[&str] = &["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve"];
const EXTRA_NUMBERS: &[&str] = &["thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "twenty", "thirty", "forty"];
const FILLER_WORDS: &[&str] = &[
    "window", "blanket", "harbor", "thunder", "orchard", "ladder", "pencil", "meadow", "whistle", "candle", "garden",
    "button", "castle", "kettle", "saddle", "marble",
];
const DISTRACTOR_EVENTS: &[&str] = &[
    "A dragon burned down the village bakery.",
    "The friends sailed across the ocean on a paper boat.",
    "A wizard turned the river into solid gold.",
    "Everyone in the story moved to a big city.",
    "The main character won a singing contest.",
    "A storm destroyed every tree in the forest.",
];

struct Vocabulary {
    places: &'static [&'static str],
    landmarks: &'static [&'static str],
    objects: &'static [&'static str],
    weather: &'static [&'static str],
}

const FOREST: Vocabulary = Vocabulary {
    places: &["Willow Creek", "Amber Hollow", "Misty Ridge", "Copper Vale", "Lantern Marsh", "Fern Valley"],
    landmarks: &["old oak", "stone bridge", "mossy well", "hollow log", "waterfall"],
    objects: &["lantern", "map", "compass", "key", "feather", "ribbon"],
    weather: &["fog", "wind", "snow", "rain"],
};

const SPACE: Vocabulary = Vocabulary {
    places: &["Vega Station", "Crater Nine", "Nova Harbor", "Orion Dome", "Cinder Moon"],
    landmarks: &["radio tower", "landing pad", "glass dome", "signal beacon", "cargo bay"],
    objects: &["star chart", "crystal", "beacon", "robot", "engine part", "helmet"],
    weather: &["solar wind", "dust storm", "meteor rain", "static"],
};

// Placeholders: {H} hero, {A} hero animal, {F} friend, {B} friend animal,
// {P} home, {Q} destination, {G} elder, {K} elder animal, {O} object,
// {L} landmark, {W} weather. {N} {M} {C} {J} are rolled per sentence.
const STORY_TEMPLATES: &[&str] = &[
    "{H} the {A} lived in {P}, where {N} {J} streams met beneath the {L}.",
    "Every morning, {H} counted {M} {C} stones on the path to the {L}.",
    "One day, {H} found a {J} {O} hidden under a pile of {C} leaves.",
    "{F} the {B} said the {O} belonged to the old keeper of {Q}.",
    "The two friends decided to carry the {O} all the way to {Q}.",
    "They packed {N} loaves of bread, a rope, and a {C} blanket.",
    "The journey took {M} days, and the {W} grew stronger each night.",
    "On the second evening, {F} spotted a {J} bridge across the river.",
    "{H} felt nervous, but {F} reminded the {A} to stay calm and careful.",
    "Halfway across, the bridge swayed, and the {O} slipped toward the water.",
    "{H} caught it just in time and held it tightly with both paws.",
    "They rested beside a {C} rock and shared stories about {P}.",
    "When they reached {Q}, a crowd of {N} curious animals gathered around them.",
    "The keeper, an old {K} named {G}, smiled at the sight of the {O}.",
    "{G} explained that the {O} could guide lost travelers home through the {W}.",
    "As a reward, {G} gave {H} a {C} feather and taught {F} a new song.",
    "That night the {W} cleared, and {M} bright stars shone above {Q}.",
    "{H} realized that courage meant moving forward even when afraid.",
    "The friends promised to return to {Q} every spring.",
    "On the way home, they helped a young {B} who had lost the trail near the {L}.",
    "Back in {P}, everyone listened to the tale with wide eyes.",
    "{F} the {B} wrote the whole adventure down in a {C} notebook.",
    "Later that season, {H} carried {N} baskets of berries to the {L} for the festival.",
    "{G} visited {P} with {M} {J} gifts wrapped in {C} cloth.",
    "Some of the younger animals wanted to see the {O} for themselves.",
    "{H} led a small group of {N} explorers back toward the {L}.",
    "The {W} returned, but this time nobody was afraid of it.",
    "Together they marked the safe path with {M} {C} flags.",
    "{F} laughed and said the {O} had changed all of their lives.",
    "Years later, young animals still asked {H} about the {J} {O}.",
    "{H} always answered that friendship was the real treasure of the journey.",
];

/// Template-driven text generator covering stories, summaries, metadata
/// extraction and question sets.
#[derive(Debug, Clone)]
pub struct MockTextProvider {
    seed: u64,
}

impl MockTextProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn rng_for(&self, req: &TextGenRequest) -> ChaCha8Rng {
        let req_json = serde_json::to_vec(req).unwrap_or_default();
        let s = stable_seed(&[b"mock-text", &self.seed.to_le_bytes(), &req_json]);
        ChaCha8Rng::seed_from_u64(s)
    }
}

impl TextProvider for MockTextProvider {
    fn model_name(&self) -> &str {
        "mock-text-v1"
    }

    fn generate_text(&self, req: &TextGenRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let mut rng = self.rng_for(req);
        let context = req.context.as_deref().unwrap_or("");
        let target = req.target_words.unwrap_or(req.max_output_words).min(req.max_output_words).max(1) as usize;
        let out = match req.task {
            TextTask::Story => mock_story(&mut rng, &req.preferences, target),
            TextTask::Summary => mock_summary(context, target),
            TextTask::Metadata => extract_metadata_json(context).to_string(),
            TextTask::Questions => mock_questions(&mut rng, context).to_string(),
        };
        Ok(out)
    }
}

fn preference_value<'a>(prefs: &'a [String], key: &str) -> Option<&'a str> {
    prefs.iter().find_map(|p| {
        let (k, v) = p.split_once(':')?;
        if k.trim().to_ascii_lowercase().ends_with(key) {
            Some(v.trim().trim_end_matches('.').trim())
        } else {
            None
        }
    })
}

fn mock_story(rng: &mut ChaCha8Rng, prefs: &[String], target_words: usize) -> String {
    let genre = preference_value(prefs, "genre").unwrap_or("").to_ascii_lowercase();
    let vocab = if genre.contains("science") || genre == "sf" || genre.contains("space") { &SPACE } else { &FOREST };

    let hero = *HERO_NAMES.choose(rng).unwrap();
    let friend = loop {
        let f = *HERO_NAMES.choose(rng).unwrap();
        if f != hero {
            break f;
        }
    };
    let animal = match preference_value(prefs, "animal") {
        Some(a) if !a.is_empty() => a.to_ascii_lowercase(),
        _ => ANIMALS.choose(rng).unwrap().to_string(),
    };
    let friend_animal = ANIMALS.choose(rng).unwrap();
    let elder = *ELDER_NAMES.choose(rng).unwrap();
    let elder_animal = ANIMALS.choose(rng).unwrap();
    let mut places: Vec<&str> = vocab.places.to_vec();
    places.shuffle(rng);
    let (home, dest) = (places[0], places[1]);
    let object = *vocab.objects.choose(rng).unwrap();
    let landmark = *vocab.landmarks.choose(rng).unwrap();
    let weather = *vocab.weather.choose(rng).unwrap();
    let title_adj = *ADJECTIVES.choose(rng).unwrap();

    let fixed: [(&str, &str); 11] = [
        ("{H}", hero),
        ("{A}", &animal),
        ("{F}", friend),
        ("{B}", friend_animal),
        ("{P}", home),
        ("{Q}", dest),
        ("{G}", elder),
        ("{K}", elder_animal),
        ("{O}", object),
        ("{L}", landmark),
        ("{W}", weather),
    ];

    let mut sentences: Vec<String> = Vec::new();
    let mut words = 0usize;
    if let Some(fav) = preference_value(prefs, "favorite story") {
        let s = format!("{hero} had always loved an old tale called {fav}.");
        words += word_count(&s);
        sentences.push(s);
    }
    for i in 0.. {
        let mut s = STORY_TEMPLATES[i % STORY_TEMPLATES.len()].to_string();
        for (k, v) in fixed {
            s = s.replace(k, v);
        }
        s = s
            .replace("{N}", NUMBERS.choose(rng).unwrap())
            .replace("{M}", NUMBERS.choose(rng).unwrap())
            .replace("{C}", COLORS.choose(rng).unwrap())
            .replace("{J}", ADJECTIVES.choose(rng).unwrap());
        let n = word_count(&s);
        if words + n > target_words && !sentences.is_empty() {
            break;
        }
        words += n;
        sentences.push(s);
    }

    let body = sentences.chunks(5).map(|c| c.join(" ")).collect::<Vec<_>>().join("\n\n");
    format!("Title: {hero} and the {} {}\n\n{body}", capitalize(title_adj), capitalize(object))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Picks evenly spaced story sentences until the word target is reached,
/// cutting the last one short when needed.
fn mock_summary(story: &str, target_words: usize) -> String {
    let sentences: Vec<String> = segment_sentences(story).into_iter().map(|s| s.text).collect();
    if sentences.is_empty() {
        return String::new();
    }
    let stride = (sentences.len() / 6).max(1);
    let mut picked: Vec<String> = Vec::new();
    let mut words = 0usize;
    let mut i = 0;
    while i < sentences.len() && words < target_words {
        let s = &sentences[i];
        let n = word_count(s);
        if words + n <= target_words {
            words += n;
            picked.push(s.clone());
        } else {
            let remaining = target_words - words;
            if remaining >= 4 {
                let cut: Vec<&str> = s.split_whitespace().take(remaining).collect();
                let mut t = cut.join(" ");
                t = t.trim_end_matches([',', '.', ';', '!', '?']).to_string();
                t.push('.');
                picked.push(t);
            }
            break;
        }
        i += stride;
    }
    picked.join(" ")
}

const NOT_NAMES: &[&str] = &[
    "The", "A", "An", "I", "One", "Every", "On", "When", "As", "That", "Back", "Years", "Halfway", "They", "Later",
    "Some", "Together", "Title",
];

fn clean_token(t: &str) -> &str {
    t.trim_matches(|c: char| !c.is_alphanumeric())
}

fn is_capitalized(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_uppercase())
}

/// Heuristic character and setting extraction used by the mock for the
/// metadata task: "Name the animal" and "animal named Name" phrases yield
/// characters; other capitalized runs inside sentences are incidental
/// entities (places, objects).
pub fn extract_metadata_json(story: &str) -> serde_json::Value {
    let sentences = segment_sentences(story);
    let mut characters: Vec<(String, String)> = Vec::new();
    let char_index = |chars: &Vec<(String, String)>, name: &str| chars.iter().position(|(n, _)| n == name);

    for s in &sentences {
        let toks: Vec<&str> = s.text.split_whitespace().collect();
        for w in 0..toks.len() {
            let cur = clean_token(toks[w]);
            // "Luna the rabbit"
            if w + 2 < toks.len()
                && is_capitalized(cur)
                && !NOT_NAMES.contains(&cur)
                && toks[w + 1] == "the"
                && toks[w] == cur
            {
                let desc = clean_token(toks[w + 2]);
                if !desc.is_empty() && desc.chars().all(|c| c.is_lowercase()) && char_index(&characters, cur).is_none() {
                    characters.push((cur.to_string(), desc.to_string()));
                }
            }
            // "an old owl named Sage"
            if cur == "named" && w >= 1 && w + 1 < toks.len() {
                let name = clean_token(toks[w + 1]);
                let desc = clean_token(toks[w - 1]);
                if is_capitalized(name) && char_index(&characters, name).is_none() {
                    characters.push((name.to_string(), desc.to_string()));
                }
            }
        }
    }

    let mut incidental: BTreeSet<String> = BTreeSet::new();
    let mut per_sentence: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for s in &sentences {
        let toks: Vec<&str> = s.text.split_whitespace().collect();
        let mut found: Vec<String> = Vec::new();
        let mut w = 0;
        while w < toks.len() {
            let cur = clean_token(toks[w]);
            let is_char = char_index(&characters, cur).is_some();
            if is_char {
                found.push(cur.to_string());
                w += 1;
                continue;
            }
            if w > 0 && is_capitalized(cur) && !NOT_NAMES.contains(&cur) {
                // Greedy multi-word proper noun, stopping at punctuation.
                let mut parts = vec![cur.to_string()];
                let mut ends_clean = toks[w].ends_with(|c: char| c.is_alphanumeric());
                let mut j = w + 1;
                while ends_clean && j < toks.len() && is_capitalized(clean_token(toks[j])) {
                    let t = clean_token(toks[j]);
                    if char_index(&characters, t).is_some() {
                        break;
                    }
                    parts.push(t.to_string());
                    ends_clean = toks[j].ends_with(|c: char| c.is_alphanumeric());
                    j += 1;
                }
                let name = parts.join(" ");
                incidental.insert(name.clone());
                found.push(name);
                w = j;
                continue;
            }
            w += 1;
        }
        let mut seen = BTreeSet::new();
        found.retain(|n| seen.insert(n.clone()));
        if !found.is_empty() {
            per_sentence.insert(s.index, found);
        }
    }

    let mut style = vec![
        "storybook illustration".to_string(),
        "soft watercolor palette".to_string(),
        "consistent character design".to_string(),
    ];
    if let Some(place) = incidental.iter().find(|n| n.contains(' ')) {
        style.push(format!("setting: {place}"));
    }

    json!({
        "characters": characters.iter().map(|(n, d)| json!({"name": n, "descriptor": d})).collect::<Vec<_>>(),
        "style_descriptors": style,
        "per_sentence_entities": per_sentence,
        "incidental": incidental,
    })
}

fn mock_questions(rng: &mut ChaCha8Rng, story: &str) -> serde_json::Value {
    let sentences: Vec<String> = segment_sentences(story).into_iter().map(|s| s.text).collect();
    let meta = extract_metadata_json(story);
    let lower = story.to_lowercase();
    let story_words: BTreeSet<String> =
        lower.split_whitespace().map(|t| clean_token(t).to_string()).filter(|t| !t.is_empty()).collect();

    let names: Vec<String> = meta["characters"]
        .as_array()
        .map(|a| a.iter().filter_map(|c| c["name"].as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    let numbers: Vec<&str> = NUMBERS.iter().copied().filter(|n| story_words.contains(*n)).collect();
    let absent_numbers: Vec<&str> =
        NUMBERS.iter().chain(EXTRA_NUMBERS).copied().filter(|n| !story_words.contains(*n)).collect();
    let absent_names: Vec<&str> =
        DISTRACTOR_NAMES.iter().copied().filter(|n| !story_words.contains(&n.to_lowercase())).collect();

    let mut questions: Vec<serde_json::Value> = Vec::new();
    fn push(
        questions: &mut Vec<serde_json::Value>,
        rng: &mut ChaCha8Rng,
        stem: String,
        correct: String,
        mut wrong: Vec<String>,
        focus: &str,
    ) {
        wrong.truncate(3);
        let mut options = wrong;
        options.push(correct.clone());
        options.shuffle(rng);
        let correct_option = options.iter().position(|o| *o == correct).unwrap();
        questions.push(json!({
            "index": 0,
            "stem": stem,
            "options": options,
            "correct_option": correct_option,
            "focus": focus,
            "format": "multiple_choice",
        }));
    }
    let pick3 = |rng: &mut ChaCha8Rng, pool: &[&str]| -> Vec<String> {
        pool.choose_multiple(rng, 3).map(|s| s.to_string()).collect()
    };

    for name in names.iter().take(2) {
        let wrong = pick3(rng, &absent_names);
        push(&mut questions, rng, "Which of these characters appears in the story?".into(), name.clone(), wrong, "proper_noun");
    }
    for n in numbers.choose_multiple(rng, 2).copied().collect::<Vec<_>>() {
        let wrong = pick3(rng, &absent_numbers);
        push(&mut questions, rng, "Which number is mentioned in the story?".into(), n.to_string(), wrong, "numeric");
    }

    let synthesis_slots = 2;
    let comprehension_slots = 10 - questions.len() - synthesis_slots;
    let step = (sentences.len() / comprehension_slots.max(1)).max(1);
    let mut made = 0;
    let mut k = 0;
    while made < comprehension_slots && k < sentences.len() * 2 {
        let s = &sentences[(k * step + k / sentences.len().max(1)) % sentences.len()];
        k += 1;
        let toks: Vec<&str> = s.split_whitespace().collect();
        let Some(pos) = toks.iter().position(|t| {
            let c = clean_token(t);
            c.len() >= 5 && c.chars().all(|ch| ch.is_lowercase())
        }) else {
            continue;
        };
        let answer = clean_token(toks[pos]).to_string();
        let mut blanked = toks.clone();
        let replaced = toks[pos].replace(answer.as_str(), "____");
        blanked[pos] = &replaced;
        let pool: Vec<&str> = FILLER_WORDS.iter().copied().filter(|w| *w != answer && !s.contains(*w)).collect();
        let wrong = pick3(rng, &pool);
        push(
            &mut questions,
            rng,
            format!("Which word completes this sentence from the story: \"{}\"", blanked.join(" ")),
            answer,
            wrong,
            "comprehension",
        );
        made += 1;
    }
    for i in 0..synthesis_slots {
        let Some(s) = sentences.get(sentences.len() * (2 * i + 1) / 4) else { break };
        let pool: Vec<&str> = DISTRACTOR_EVENTS.iter().copied().filter(|e| !story.contains(*e)).collect();
        let wrong = pick3(rng, &pool);
        push(&mut questions, rng, "Which of these events happens in the story?".into(), s.clone(), wrong, "synthesis");
    }

    for (i, q) in questions.iter_mut().enumerate() {
        q["index"] = json!(i + 1);
    }
    json!({ "questions": questions })
}

/// Replays canned responses in order, repeating the last one. Counts calls.
#[derive(Debug, Default)]
pub struct ScriptedTextProvider {
    responses: Vec<String>,
    calls: AtomicUsize,
}

impl ScriptedTextProvider {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { responses: responses.into_iter().map(Into::into).collect(), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl TextProvider for ScriptedTextProvider {
    fn model_name(&self) -> &str {
        "scripted"
    }

    fn generate_text(&self, _req: &TextGenRequest) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .get(n.min(self.responses.len().saturating_sub(1)))
            .cloned()
            .ok_or(ProviderError::EmptyResponse)
    }
}

/// Renders a small binary PPM. The first prompt line is kept as a
/// `# caption:` header comment, which [`MockEmbeddingProvider`] reads back so
/// image vectors correlate with the sentence they illustrate.
#[derive(Debug, Clone, Default)]
pub struct MockImageProvider {
    size: u32,
}

impl MockImageProvider {
    pub fn new() -> Self {
        Self { size: 32 }
    }
}

impl ImageProvider for MockImageProvider {
    fn model_name(&self) -> &str {
        "mock-image-v1"
    }

    fn render(&self, req: &ImageGenRequest, _reference: Option<&ImageArtifact>) -> Result<RenderedImage, ProviderError> {
        req.validate()?;
        let size = if self.size == 0 { 32 } else { self.size };
        let seed = req.seed.unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(&[b"mock-image", req.prompt_text.as_bytes(), &seed.to_le_bytes()]));
        let caption = req.prompt_text.lines().next().unwrap_or("").trim();
        let caption = caption.strip_prefix("Scene:").unwrap_or(caption).trim().replace(['\r', '\n'], " ");

        let mut bytes = format!("P6\n# genread-mock seed={seed}\n# caption: {caption}\n{size} {size}\n255\n").into_bytes();
        let base: [u8; 3] = rng.random();
        let step: [u8; 3] = rng.random();
        for y in 0..size {
            for x in 0..size {
                for c in 0..3 {
                    let v = base[c] as u32 + (step[c] as u32 % 7) * (x + y) + if c == 0 { x } else { y };
                    bytes.push((v % 256) as u8);
                }
            }
        }
        Ok(RenderedImage { media_type: "image/x-portable-pixmap".into(), bytes, width_px: size, height_px: size })
    }
}

/// Hashed bag-of-words embedder. Each lowercase word maps to a seeded
/// pseudo-random direction; a text vector is their normalized sum, so texts
/// sharing words have positive cosine.
#[derive(Debug, Clone)]
pub struct MockEmbeddingProvider {
    dims: usize,
    token_budget: usize,
    seed: u64,
}

impl MockEmbeddingProvider {
    pub fn new(dims: usize, token_budget: usize) -> Self {
        Self { dims: dims.max(1), token_budget, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn direction(&self, key: &[&[u8]]) -> Vec<f64> {
        let mut parts: Vec<&[u8]> = vec![b"mock-embed", &[]];
        let seed_bytes = self.seed.to_le_bytes();
        parts[1] = &seed_bytes;
        parts.extend_from_slice(key);
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(&parts));
        (0..self.dims).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn bag_of_words(&self, text: &str) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dims];
        let mut any = false;
        for word in text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
            let w = word.to_lowercase();
            for (a, d) in acc.iter_mut().zip(self.direction(&[b"tok", w.as_bytes()])) {
                *a += d;
            }
            any = true;
        }
        any.then_some(acc)
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn ppm_caption(bytes: &[u8]) -> Option<String> {
    let header_end = bytes.len().min(4096);
    let head = String::from_utf8_lossy(&bytes[..header_end]);
    head.lines().find_map(|l| l.strip_prefix("# caption:").map(|c| c.trim().to_string()))
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn model_name(&self) -> &str {
        "mock-embed-v1"
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn token_budget(&self) -> usize {
        self.token_budget
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        check_text_input(text, self.token_budget)?;
        let v = self.bag_of_words(text).unwrap_or_else(|| self.direction(&[b"text", text.as_bytes()]));
        EmbeddingVector::new(normalize(v))
    }

    fn embed_image(&self, image: &ImageArtifact) -> Result<EmbeddingVector, ProviderError> {
        if image.bytes.is_empty() {
            return Err(ProviderError::InvalidRequest("image has no bytes".into()));
        }
        let noise = normalize(self.direction(&[b"image", &image.bytes]));
        let v = match ppm_caption(&image.bytes).and_then(|c| self.bag_of_words(&c)) {
            Some(bow) => normalize(bow).into_iter().zip(noise).map(|(a, b)| a + 0.5 * b).collect(),
            None => noise,
        };
        EmbeddingVector::new(normalize(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story_req(target: u32, seed: u64) -> TextGenRequest {
        let mut r = TextGenRequest::new(TextTask::Story, "Write a story", target + target / 5);
        r.target_words = Some(target);
        r.seed = Some(seed);
        r.preferences = vec!["Main character animal: otter.".into(), "Genre: adventure.".into()];
        r
    }

    #[test]
    fn story_hits_word_target_from_below() {
        let p = MockTextProvider::new(1);
        for seed in 0..20 {
            let text = p.generate_text(&story_req(500, seed)).unwrap();
            let body = text.split_once("\n\n").unwrap().1;
            let wc = word_count(body);
            assert!((470..=500).contains(&wc), "wc {wc}");
            assert!(body.contains("the otter"));
        }
    }

    #[test]
    fn summary_respects_target() {
        let p = MockTextProvider::new(1);
        let story = p.generate_text(&story_req(500, 4)).unwrap();
        let mut r = TextGenRequest::new(TextTask::Summary, "Summarize", 65);
        r.target_words = Some(50);
        r.context = Some(story);
        let s = p.generate_text(&r).unwrap();
        let wc = word_count(&s);
        assert!((40..=50).contains(&wc), "wc {wc}: {s}");
    }

    #[test]
    fn extraction_finds_named_animals() {
        let v = extract_metadata_json("An old owl named Sage lived in Fern Valley. Sage sang.");
        assert_eq!(v["characters"][0]["name"], "Sage");
        assert_eq!(v["characters"][0]["descriptor"], "owl");
        assert_eq!(v["incidental"][0], "Fern Valley");
    }

    #[test]
    fn image_embedding_tracks_caption() {
        let e = MockEmbeddingProvider::new(256, 77);
        let p = MockImageProvider::new();
        let req = |t: &str| ImageGenRequest { prompt_text: t.into(), reference_image: None, style_notes: vec![], seed: Some(1) };
        let img = |t: &str| {
            let r = p.render(&req(t), None).unwrap();
            ImageArtifact { id: "x".into(), media_type: r.media_type, bytes: r.bytes, width_px: 32, height_px: 32 }
        };
        let text = e.embed_text("the fox crossed the frozen river").unwrap();
        let near = e.embed_image(&img("Scene: the fox crossed the frozen river\nsummary")).unwrap();
        let far = e.embed_image(&img("Scene: a whale sang under purple skies\nsummary")).unwrap();
        let dot = |a: &EmbeddingVector, b: &EmbeddingVector| a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>();
        assert!(dot(&text, &near) > dot(&text, &far) + 0.3);
    }
}
