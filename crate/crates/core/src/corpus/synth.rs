//! Deterministic templated corpus generator: a desk-scale stand-in for a
//! crawled question corpus. Each pair couples a first-person activity post
//! with a follow-up question about a related scene topic; word types come
//! straight from the templates.

use std::path::Path;

use rand::Rng;

use crate::corpus::{CorpusPair, PairLike, WordType};
use crate::error::Result;
use crate::fsio;
use crate::rng::{stage_rng, Stage};

/// A scene: the activity named in posts plus the things a follow-up
/// question can ask about. `related[0]` is plural so counting questions
/// read naturally.
struct Scene {
    verb: &'static str,
    topic: &'static str,
    related: [&'static str; 3],
    place: &'static str,
    person: &'static str,
}

const SCENES: &[Scene] = &[
    Scene { verb: "sang", topic: "karaoke", related: ["songs", "microphone", "duet"], place: "bar", person: "friends" },
    Scene { verb: "cooked", topic: "dinner", related: ["noodles", "sushi", "dessert"], place: "restaurant", person: "family" },
    Scene { verb: "watched", topic: "movie", related: ["tickets", "popcorn", "trailer"], place: "cinema", person: "brother" },
    Scene { verb: "played", topic: "game", related: ["levels", "console", "controller"], place: "arcade", person: "cousin" },
    Scene { verb: "planned", topic: "trip", related: ["flights", "luggage", "hotel"], place: "airport", person: "sister" },
    Scene { verb: "read", topic: "book", related: ["chapters", "author", "ending"], place: "library", person: "teacher" },
    Scene { verb: "watered", topic: "garden", related: ["roses", "seeds", "soil"], place: "yard", person: "neighbor" },
    Scene { verb: "attended", topic: "concert", related: ["drums", "encore", "stage"], place: "stadium", person: "band" },
    Scene { verb: "baked", topic: "cake", related: ["candles", "frosting", "recipe"], place: "kitchen", person: "grandma" },
    Scene { verb: "adopted", topic: "puppy", related: ["treats", "leash", "kennel"], place: "shelter", person: "kids" },
    Scene { verb: "repaired", topic: "laptop", related: ["cables", "battery", "screen"], place: "office", person: "colleague" },
    Scene { verb: "finished", topic: "painting", related: ["brushes", "canvas", "frames"], place: "studio", person: "mentor" },
];

const SUBJECTS: &[&str] = &["i", "we"];
const TIMES: &[&[&str]] = &[&["yesterday"], &["today"], &["last", "night"], &["this", "morning"]];

/// One template token: a literal with its constructed type, or the sampled
/// topic slot (always a topic word).
enum Piece {
    I(&'static str),
    O(&'static str),
    V(&'static str),
    Slot,
}

enum Pool {
    /// related nouns, the place, or the people in the scene
    Any,
    /// the scene's plural noun (counting questions)
    Plural,
}

struct Template {
    pieces: &'static [Piece],
    pool: Pool,
}

use Piece::{Slot, I, O, V};

const TEMPLATES: &[Template] = &[
    Template { pieces: &[I("did"), O("you"), V("enjoy"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("was"), O("the"), Slot, O("good"), I("?")], pool: Pool::Any },
    Template { pieces: &[I("what"), I("did"), O("you"), V("think"), O("of"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("what"), V("happened"), O("to"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("where"), I("did"), O("you"), V("find"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("where"), I("is"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("how"), I("many"), Slot, I("did"), O("you"), V("get"), I("?")], pool: Pool::Plural },
    Template { pieces: &[I("how"), I("many"), Slot, I("did"), O("you"), V("see"), I("?")], pool: Pool::Plural },
    Template { pieces: &[I("who"), V("chose"), O("the"), Slot, I("?")], pool: Pool::Any },
    Template { pieces: &[I("who"), V("joined"), O("the"), Slot, I("?")], pool: Pool::Any },
];

/// Generate `n` typed pairs, fully determined by `seed`.
pub fn synth_corpus(seed: u64, n: usize) -> Vec<CorpusPair> {
    let mut rng = stage_rng(seed, Stage::Synth);
    (0..n)
        .map(|_| {
            let scene = &SCENES[rng.gen_range(0..SCENES.len())];
            let subject = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
            let time = TIMES[rng.gen_range(0..TIMES.len())];

            let mut post: Vec<String> =
                vec![subject.into(), scene.verb.into(), "the".into(), scene.topic.into()];
            post.extend(time.iter().map(|t| t.to_string()));

            let template = &TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            let slot = match template.pool {
                Pool::Any => {
                    let options = [
                        scene.related[0],
                        scene.related[1],
                        scene.related[2],
                        scene.place,
                        scene.person,
                    ];
                    options[rng.gen_range(0..options.len())]
                }
                Pool::Plural => scene.related[0],
            };

            let mut response = Vec::with_capacity(template.pieces.len());
            let mut response_types = Vec::with_capacity(template.pieces.len());
            for piece in template.pieces {
                let (tok, ty) = match piece {
                    I(t) => (*t, WordType::Interrogative),
                    O(t) => (*t, WordType::Ordinary),
                    V(t) => (*t, WordType::Topic),
                    Slot => (slot, WordType::Topic),
                };
                response.push(tok.to_string());
                response_types.push(ty);
            }
            CorpusPair { post, response, response_types }
        })
        .collect()
}

/// Write pairs as the standard `post<TAB>response` TSV.
pub fn write_pairs_tsv<P: PairLike>(path: &Path, pairs: &[P]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.post_tokens().join(" "));
        out.push('\t');
        out.push_str(&p.response_tokens().join(" "));
        out.push('\n');
    }
    fsio::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{is_question, tag_types, TypeLexicons};

    #[test]
    fn deterministic_and_question_form() {
        let lex = TypeLexicons::bundled();
        let a = synth_corpus(7, 50);
        let b = synth_corpus(7, 50);
        assert_eq!(a, b);
        assert!(is_question(&a[0].response, &lex));
        assert_ne!(a, synth_corpus(8, 50));
    }

    #[test]
    fn every_response_has_a_topic_token() {
        for pair in synth_corpus(7, 2000) {
            assert!(
                pair.response_types.contains(&WordType::Topic),
                "no topic token in {:?}",
                pair.response
            );
        }
    }

    #[test]
    fn constructed_types_agree_with_tagger() {
        let lex = TypeLexicons::bundled();
        for pair in synth_corpus(11, 500) {
            assert_eq!(
                tag_types(&pair.response, &lex),
                pair.response_types,
                "tagger disagrees on {:?}",
                pair.response
            );
        }
    }

    #[test]
    fn no_response_exceeds_universal_threshold() {
        use std::collections::HashMap;
        // The generator must survive distillation untouched: no response
        // string may co-occur with more than 10 distinct posts.
        let pairs = synth_corpus(7, 2000);
        let mut posts: HashMap<String, std::collections::HashSet<String>> = HashMap::new();
        for p in &pairs {
            posts.entry(p.response.join(" ")).or_default().insert(p.post.join(" "));
        }
        let worst = posts.values().map(|s| s.len()).max().unwrap();
        assert!(worst <= 10, "a response co-occurs with {worst} posts");
    }
}
